use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::join::JoinedTrip;
use super::trips::Mode;
use crate::error::{Error, Result};
use crate::geo::TazId;

/// Directed trip counts between TAZs, diagonal included.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FlowMatrix {
    flows: BTreeMap<(TazId, TazId), u64>,
    total_trips: u64,
    by_mode: BTreeMap<Mode, u64>,
}

impl FlowMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `trips` to cell `(origin, dest)`. Zero-trip cells are not stored.
    pub fn add(&mut self, origin: TazId, dest: TazId, trips: u64) {
        if trips == 0 {
            return;
        }
        *self.flows.entry((origin, dest)).or_insert(0) += trips;
        self.total_trips += trips;
    }

    pub fn add_mode_count(&mut self, mode: Mode, trips: u64) {
        *self.by_mode.entry(mode).or_insert(0) += trips;
    }

    pub fn get(&self, origin: TazId, dest: TazId) -> u64 {
        self.flows.get(&(origin, dest)).copied().unwrap_or(0)
    }

    /// Nonzero cells in (origin, dest) order.
    pub fn iter(&self) -> impl Iterator<Item = ((TazId, TazId), u64)> + '_ {
        self.flows.iter().map(|(&k, &v)| (k, v))
    }

    pub fn cell_count(&self) -> usize {
        self.flows.len()
    }

    pub fn total_trips(&self) -> u64 {
        self.total_trips
    }

    pub fn by_mode(&self) -> &BTreeMap<Mode, u64> {
        &self.by_mode
    }

    pub fn without_self_loops(&self) -> FlowMatrix {
        let mut out = FlowMatrix::new();
        for ((o, d), t) in self.iter().filter(|((o, d), _)| o != d) {
            out.add(o, d, t);
        }
        out
    }

    /// Sums two matrices; commutative.
    pub fn merge(&mut self, other: &FlowMatrix) {
        for ((o, d), t) in other.iter() {
            self.add(o, d, t);
        }
        for (&m, &c) in &other.by_mode {
            self.add_mode_count(m, c);
        }
    }
}

/// Counts joined trips into a flow matrix; mode counts go to provenance.
pub fn aggregate_flows(trips: &[JoinedTrip]) -> FlowMatrix {
    let mut m = FlowMatrix::new();
    for t in trips {
        m.add(t.origin, t.dest, 1);
        m.add_mode_count(t.mode, 1);
    }
    m
}

#[derive(Serialize, Deserialize)]
struct FlowRow {
    origin_id: u64,
    dest_id: u64,
    trips: u64,
}

pub const FLOW_HEADER: [&str; 3] = ["origin_id", "dest_id", "trips"];

pub fn write_flow_csv<W: Write>(m: &FlowMatrix, w: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    wtr.write_record(FLOW_HEADER)?;
    for ((o, d), t) in m.iter() {
        wtr.serialize(FlowRow { origin_id: o.0, dest_id: d.0, trips: t })?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_flow_csv<R: Read>(r: R) -> Result<FlowMatrix> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let found: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if found != FLOW_HEADER {
        return Err(Error::HeaderMismatch { expected: FLOW_HEADER.join(","), found: found.join(",") });
    }
    let mut m = FlowMatrix::new();
    for (i, row) in rdr.deserialize::<FlowRow>().enumerate() {
        let row = row.map_err(|e| Error::Malformed { line: i as u64 + 2, reason: e.to_string() })?;
        m.add(TazId(row.origin_id), TazId(row.dest_id), row.trips);
    }
    Ok(m)
}
