//! Trip records to a TAZ-level flow matrix: parse, clean, spatially join,
//! aggregate.

mod clean;
mod flows;
mod join;
mod trips;

use serde::Serialize;

pub use clean::{clean_trips, CleaningReport, CleaningRules, ModeBounds};
pub use flows::{aggregate_flows, read_flow_csv, write_flow_csv, FlowMatrix, FLOW_HEADER};
pub use join::{spatial_join, JoinOutcome, JoinedTrip, TazIndex};
pub use trips::{parse_trips, write_trips, MalformedRow, Mode, ParsedTrips, TripRecord, TRIP_HEADER};

use crate::geo::Taz;

/// Counts from a full ingest run.
#[derive(Debug, Clone, Default, Serialize)]
pub struct IngestSummary {
    pub rows: u64,
    pub parsed: u64,
    pub malformed: u64,
    pub cleaning: CleaningReport,
    pub matched: u64,
}

impl IngestSummary {
    /// rows = parsed + malformed, parsed = cleaned + dropped, flow total = matched.
    pub fn conserves(&self, flows: &FlowMatrix) -> bool {
        self.rows == self.parsed + self.malformed
            && self.cleaning.input == self.parsed
            && self.cleaning.reconciles()
            && self.cleaning.output == self.matched
            && flows.total_trips() == self.matched
    }
}

/// Cleans, joins and aggregates already-parsed batches. Batches are cleaned
/// together so duplicates across files are caught.
pub fn ingest_parsed(batches: Vec<ParsedTrips>, tazs: &[Taz], rules: &CleaningRules) -> (FlowMatrix, IngestSummary) {
    let mut summary = IngestSummary::default();
    let mut records = Vec::new();
    for b in batches {
        summary.rows += b.rows() as u64;
        summary.parsed += b.records.len() as u64;
        summary.malformed += b.malformed.len() as u64;
        records.extend(b.records);
    }
    let index = TazIndex::new(tazs);
    let rules = if rules.bounds.is_none() { rules.clone().with_bounds(index.bounds()) } else { rules.clone() };
    let (cleaned, mut report) = clean_trips(records, &rules);
    let joined = spatial_join(&cleaned, &index);
    report.absorb_unmatched(joined.unmatched);
    summary.matched = joined.trips.len() as u64;
    summary.cleaning = report;
    (aggregate_flows(&joined.trips), summary)
}
