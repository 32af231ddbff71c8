use std::collections::HashSet;

use chrono::TimeDelta;
use serde::{Deserialize, Serialize};

use super::trips::{Mode, TripRecord};
use crate::geo::{haversine_km, BBox, LonLat};

/// Speed and duration window for one family of modes. Speed is exclusive at
/// zero and inclusive at the maximum; duration is inclusive on both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeBounds {
    pub max_speed_kmh: f64,
    pub min_duration_s: i64,
    pub max_duration_s: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleaningRules {
    pub bike: ModeBounds,
    pub transit: ModeBounds,
    /// Study-area box; trips with an endpoint outside it (after buffering) are dropped.
    pub bounds: Option<BBox>,
    pub bounds_buffer_km: f64,
}

impl Default for CleaningRules {
    fn default() -> Self {
        Self {
            bike: ModeBounds { max_speed_kmh: 35.0, min_duration_s: 60, max_duration_s: 4 * 3600 },
            transit: ModeBounds { max_speed_kmh: 120.0, min_duration_s: 60, max_duration_s: 6 * 3600 },
            bounds: None,
            bounds_buffer_km: 5.0,
        }
    }
}

impl CleaningRules {
    pub fn with_bounds(mut self, bbox: Option<BBox>) -> Self {
        self.bounds = bbox;
        self
    }

    fn for_mode(&self, mode: Mode) -> &ModeBounds {
        if mode.is_bike() {
            &self.bike
        } else {
            &self.transit
        }
    }
}

/// Record counts through cleaning and spatial join.
///
/// `input == output + dropped()` holds after cleaning and again after
/// [`CleaningReport::absorb_unmatched`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleaningReport {
    pub input: u64,
    pub output: u64,
    pub duplicate: u64,
    pub null_field: u64,
    pub out_of_bounds: u64,
    pub speed_anomaly: u64,
    pub duration_anomaly: u64,
    pub unmatched_endpoint: u64,
}

impl CleaningReport {
    pub fn dropped(&self) -> u64 {
        self.duplicate + self.null_field + self.out_of_bounds + self.speed_anomaly + self.duration_anomaly + self.unmatched_endpoint
    }

    pub fn reconciles(&self) -> bool {
        self.input == self.output + self.dropped()
    }

    /// Moves `n` records from the surviving count to `unmatched_endpoint`.
    pub fn absorb_unmatched(&mut self, n: u64) {
        assert!(n <= self.output, "more unmatched records than cleaned ones");
        self.output -= n;
        self.unmatched_endpoint += n;
    }

    /// Sums counts of independent batches.
    pub fn merge(&mut self, other: &CleaningReport) {
        self.input += other.input;
        self.output += other.output;
        self.duplicate += other.duplicate;
        self.null_field += other.null_field;
        self.out_of_bounds += other.out_of_bounds;
        self.speed_anomaly += other.speed_anomaly;
        self.duration_anomaly += other.duration_anomaly;
        self.unmatched_endpoint += other.unmatched_endpoint;
    }
}

fn valid_position(p: LonLat) -> bool {
    p.is_finite() && (-180.0..=180.0).contains(&p.lon) && (-90.0..=90.0).contains(&p.lat)
}

/// Deduplicates and filters trips; checks run in the order null field,
/// duplicate, bounds, duration, speed, and each record is counted once.
pub fn clean_trips(records: Vec<TripRecord>, rules: &CleaningRules) -> (Vec<TripRecord>, CleaningReport) {
    let mut report = CleaningReport { input: records.len() as u64, ..Default::default() };
    let area = rules.bounds.map(|b| b.buffered_km(rules.bounds_buffer_km));
    let mut seen: HashSet<(Mode, String, chrono::NaiveDateTime, u64, u64)> = HashSet::with_capacity(records.len());
    let mut kept = Vec::with_capacity(records.len());
    for r in records {
        if r.user_id.is_empty() || !r.origin.is_finite() || !r.dest.is_finite() {
            report.null_field += 1;
            continue;
        }
        let key = (r.mode, r.user_id.clone(), r.origin_time, r.origin.lon.to_bits(), r.origin.lat.to_bits());
        if !seen.insert(key) {
            report.duplicate += 1;
            continue;
        }
        let in_area = |p: LonLat| valid_position(p) && area.is_none_or(|b| b.contains(p));
        if !in_area(r.origin) || !in_area(r.dest) {
            report.out_of_bounds += 1;
            continue;
        }
        let bounds = rules.for_mode(r.mode);
        let duration = r.duration();
        if duration < TimeDelta::seconds(bounds.min_duration_s) || duration > TimeDelta::seconds(bounds.max_duration_s) {
            report.duration_anomaly += 1;
            continue;
        }
        let hours = duration.num_milliseconds() as f64 / 3.6e6;
        let speed = haversine_km(r.origin, r.dest) / hours;
        if !(speed > 0.0 && speed <= bounds.max_speed_kmh) {
            report.speed_anomaly += 1;
            continue;
        }
        kept.push(r);
    }
    report.output = kept.len() as u64;
    (kept, report)
}
