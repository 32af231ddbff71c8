//! Synthetic gravity cities with planted block structure.

use chrono::{NaiveDate, TimeDelta};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{haversine_km, rect_taz, LonLat, Taz, TazId};
use crate::ingest::{FlowMatrix, Mode, TripRecord};
use crate::partition::Partition;

const KM_PER_DEG_LAT: f64 = 111.194_926_644_558_73;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticCitySpec {
    pub rows: usize,
    pub cols: usize,
    pub cell_km: f64,
    pub block_rows: usize,
    pub block_cols: usize,
    /// Distance-decay exponent of the gravity weights.
    pub beta: f64,
    /// Weight factor for pairs inside the same block.
    pub intra_multiplier: f64,
    /// Whether trips may start and end in the same cell.
    pub self_trips: bool,
    pub trips: u64,
    pub seed: u64,
    pub min_population: f64,
    pub max_population: f64,
    /// South-west corner of the grid.
    pub origin: LonLat,
}

impl Default for SyntheticCitySpec {
    fn default() -> Self {
        Self {
            rows: 20,
            cols: 20,
            cell_km: 1.0,
            block_rows: 2,
            block_cols: 2,
            beta: 2.0,
            intra_multiplier: 10.0,
            self_trips: false,
            trips: 200_000,
            seed: 42,
            min_population: 1_000.0,
            max_population: 5_000.0,
            origin: LonLat::new(118.5, 31.9),
        }
    }
}

impl SyntheticCitySpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if self.rows == 0 || self.cols == 0 {
            return bad("grid must have at least one row and column");
        }
        if self.block_rows == 0 || self.block_cols == 0 || self.block_rows > self.rows || self.block_cols > self.cols {
            return bad("block layout must tile the grid");
        }
        if !(self.cell_km > 0.0 && self.cell_km.is_finite()) {
            return bad("cell_km must be > 0");
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad("beta must be >= 0");
        }
        if !(self.intra_multiplier > 0.0 && self.intra_multiplier.is_finite()) {
            return bad("intra_multiplier must be > 0");
        }
        if self.trips == 0 {
            return bad("trips must be > 0");
        }
        if !(self.min_population > 0.0 && self.max_population >= self.min_population && self.max_population.is_finite()) {
            return bad("population range must satisfy 0 < min <= max");
        }
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        self.rows * self.cols
    }

    pub fn block_count(&self) -> usize {
        self.block_rows * self.block_cols
    }

    /// Planted block of cell `(r, c)`.
    pub fn block_of(&self, r: usize, c: usize) -> usize {
        (r * self.block_rows / self.rows) * self.block_cols + c * self.block_cols / self.cols
    }

    fn cell_deg(&self) -> (f64, f64) {
        let dlat = self.cell_km / KM_PER_DEG_LAT;
        let dlon = dlat / self.origin.lat.to_radians().cos();
        (dlon, dlat)
    }
}

/// A generated city. `truth` is indexed like `tazs` (ascending id).
#[derive(Debug, Clone)]
pub struct SyntheticCity {
    pub spec: SyntheticCitySpec,
    pub tazs: Vec<Taz>,
    pub flows: FlowMatrix,
    pub truth: Partition,
}

impl SyntheticCity {
    pub fn truth_labels(&self) -> Vec<(TazId, usize)> {
        self.tazs.iter().zip(self.truth.assignment()).map(|(t, &z)| (t.id, z)).collect()
    }
}

fn build_tazs(spec: &SyntheticCitySpec, rng: &mut ChaCha8Rng) -> Result<Vec<Taz>> {
    let (dlon, dlat) = spec.cell_deg();
    let area = spec.cell_km * spec.cell_km * 1e6;
    let mut tazs = Vec::with_capacity(spec.cell_count());
    for r in 0..spec.rows {
        for c in 0..spec.cols {
            let min = LonLat::new(spec.origin.lon + c as f64 * dlon, spec.origin.lat + r as f64 * dlat);
            let max = LonLat::new(min.lon + dlon, min.lat + dlat);
            let pop = rng.random_range(spec.min_population..=spec.max_population).round();
            let emp = (pop * rng.random_range(0.2..0.6)).round();
            tazs.push(rect_taz((r * spec.cols + c + 1) as u64, min, max, area, pop, emp)?);
        }
    }
    Ok(tazs)
}

/// Gravity weights over all ordered pairs, row-major `i * n + j`.
fn pair_weights(spec: &SyntheticCitySpec, tazs: &[Taz]) -> Vec<f64> {
    let n = tazs.len();
    let intrazonal = 0.5 * (spec.cell_km * spec.cell_km / std::f64::consts::PI).sqrt();
    let block: Vec<usize> = (0..n).map(|i| spec.block_of(i / spec.cols, i % spec.cols)).collect();
    let mut w = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            if i == j && !spec.self_trips {
                w.push(0.0);
                continue;
            }
            let d = if i == j { intrazonal } else { haversine_km(tazs[i].centroid, tazs[j].centroid) };
            let mut g = tazs[i].population * tazs[j].population / d.powf(spec.beta);
            if block[i] == block[j] {
                g *= spec.intra_multiplier;
            }
            w.push(g);
        }
    }
    w
}

fn sample_pairs(spec: &SyntheticCitySpec, tazs: &[Taz], rng: &mut ChaCha8Rng) -> Result<Vec<(usize, usize)>> {
    let n = tazs.len();
    let dist = WeightedIndex::new(pair_weights(spec, tazs))
        .map_err(|e| Error::InvalidParameter(format!("gravity weights: {e}")))?;
    Ok((0..spec.trips).map(|_| dist.sample(rng)).map(|k| (k / n, k % n)).collect())
}

fn truth(spec: &SyntheticCitySpec) -> Partition {
    let labels: Vec<usize> =
        (0..spec.cell_count()).map(|i| spec.block_of(i / spec.cols, i % spec.cols)).collect();
    Partition::from_labels(&labels)
}

/// Generates TAZs and the aggregated flow matrix only.
pub fn generate_flows(spec: &SyntheticCitySpec) -> Result<SyntheticCity> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let tazs = build_tazs(spec, &mut rng)?;
    let mut flows = FlowMatrix::new();
    for (i, j) in sample_pairs(spec, &tazs, &mut rng)? {
        flows.add(tazs[i].id, tazs[j].id, 1);
    }
    Ok(SyntheticCity { spec: spec.clone(), tazs, flows, truth: truth(spec) })
}

/// Generates TAZs plus one trip record per sampled trip. Each record's
/// endpoints lie strictly inside the sampled cells and its timing passes
/// the default cleaning rules. The returned flow matrix is what ingesting
/// the records should reproduce.
pub fn generate(spec: &SyntheticCitySpec) -> Result<(SyntheticCity, Vec<TripRecord>)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let tazs = build_tazs(spec, &mut rng)?;
    let pairs = sample_pairs(spec, &tazs, &mut rng)?;
    let (dlon, dlat) = spec.cell_deg();
    let date = NaiveDate::from_ymd_opt(2019, 9, 2).expect("valid date");
    let day_start = date.and_hms_opt(5, 0, 0).expect("valid time");
    let mut flows = FlowMatrix::new();
    let mut records = Vec::with_capacity(pairs.len());
    let inside = |rng: &mut ChaCha8Rng, t: &Taz| {
        let min = t.bbox().min;
        LonLat::new(min.lon + dlon * rng.random_range(0.05..0.95), min.lat + dlat * rng.random_range(0.05..0.95))
    };
    for (k, (i, j)) in pairs.into_iter().enumerate() {
        let origin = inside(&mut rng, &tazs[i]);
        let dest = inside(&mut rng, &tazs[j]);
        let km = haversine_km(origin, dest);
        let (mode, speed_kmh) = if km < 3.0 {
            (if rng.random_bool(0.6) { Mode::Ffbs } else { Mode::PublicBike }, 12.0)
        } else {
            (if rng.random_bool(0.6) { Mode::Metro } else { Mode::Bus }, 25.0)
        };
        let secs = (km / speed_kmh * 3600.0).max(120.0) + rng.random_range(0.0..120.0);
        let origin_time = day_start + TimeDelta::seconds(rng.random_range(0..16 * 3600));
        let dest_time = origin_time + TimeDelta::seconds(secs.round() as i64);
        records.push(TripRecord { mode, user_id: format!("u{k}"), date, origin_time, dest_time, origin, dest });
        flows.add(tazs[i].id, tazs[j].id, 1);
        flows.add_mode_count(mode, 1);
    }
    Ok((SyntheticCity { spec: spec.clone(), tazs, flows, truth: truth(spec) }, records))
}
