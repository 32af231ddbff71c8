use std::collections::HashMap;
use std::hash::Hash;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::TazId;

/// Total assignment of node indices to zone ids `0..zone_count`, every zone nonempty.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    zone_of: Vec<usize>,
    zone_count: usize,
}

impl Partition {
    pub fn new(zone_of: Vec<usize>) -> Result<Self> {
        let zone_count = zone_of.iter().max().map_or(0, |&m| m + 1);
        let mut used = vec![false; zone_count];
        for &z in &zone_of {
            used[z] = true;
        }
        if let Some(z) = used.iter().position(|&u| !u) {
            return Err(Error::InvalidPartition(format!("zone {z} is empty")));
        }
        Ok(Self { zone_of, zone_count })
    }

    /// Relabels arbitrary labels to zones numbered by first appearance.
    pub fn from_labels<L: Eq + Hash + Copy>(labels: &[L]) -> Self {
        let mut map: HashMap<L, usize> = HashMap::new();
        let zone_of = labels
            .iter()
            .map(|l| {
                let next = map.len();
                *map.entry(*l).or_insert(next)
            })
            .collect();
        Self { zone_of, zone_count: map.len() }
    }

    pub fn singletons(n: usize) -> Self {
        Self { zone_of: (0..n).collect(), zone_count: n }
    }

    pub fn single_zone(n: usize) -> Self {
        Self { zone_of: vec![0; n], zone_count: usize::from(n > 0) }
    }

    /// Same grouping with zones numbered by their smallest member.
    pub fn canonical(&self) -> Self {
        Self::from_labels(&self.zone_of)
    }

    pub fn len(&self) -> usize {
        self.zone_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zone_of.is_empty()
    }

    pub fn zone_of(&self, node: usize) -> usize {
        self.zone_of[node]
    }

    pub fn zone_count(&self) -> usize {
        self.zone_count
    }

    pub fn assignment(&self) -> &[usize] {
        &self.zone_of
    }

    /// Member lists per zone, each ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.zone_count];
        for (i, &z) in self.zone_of.iter().enumerate() {
            out[z].push(i);
        }
        out
    }

    /// True when both partitions group nodes identically.
    pub fn same_grouping(&self, other: &Partition) -> bool {
        self.canonical() == other.canonical()
    }
}

#[derive(Serialize, Deserialize)]
struct Row {
    taz_id: u64,
    zone_id: usize,
}

/// Writes `taz_id,zone_id`; `ids[i]` names node `i`.
pub fn write_partition_csv<W: Write>(ids: &[TazId], p: &Partition, w: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    wtr.write_record(["taz_id", "zone_id"])?;
    for (i, id) in ids.iter().enumerate() {
        wtr.serialize(Row { taz_id: id.0, zone_id: p.zone_of(i) })?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads `taz_id,zone_id` covering exactly `ids`. Zone labels are
/// renumbered canonically.
pub fn read_partition_csv<R: Read>(r: R, ids: &[TazId]) -> Result<Partition> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let found: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if found != ["taz_id", "zone_id"] {
        return Err(Error::HeaderMismatch { expected: "taz_id,zone_id".into(), found: found.join(",") });
    }
    let mut labels: Vec<Option<usize>> = vec![None; ids.len()];
    for (line, row) in rdr.deserialize::<Row>().enumerate() {
        let row = row.map_err(|e| Error::Malformed { line: line as u64 + 2, reason: e.to_string() })?;
        let i = ids
            .binary_search(&TazId(row.taz_id))
            .map_err(|_| Error::IdMismatch(format!("partition names unknown TAZ {}", row.taz_id)))?;
        if labels[i].replace(row.zone_id).is_some() {
            return Err(Error::InvalidPartition(format!("TAZ {} assigned twice", row.taz_id)));
        }
    }
    let labels = labels
        .into_iter()
        .enumerate()
        .map(|(i, l)| l.ok_or_else(|| Error::IdMismatch(format!("TAZ {} missing from partition", ids[i]))))
        .collect::<Result<Vec<_>>>()?;
    Ok(Partition::from_labels(&labels))
}
