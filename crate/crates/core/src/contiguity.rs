//! Spatial contiguity: split zones into polygon-connected pieces and merge
//! fragments back into neighboring zones.
//!
//! A fragment is a split-off piece, a zone under the minimum area, or a zone
//! with no trips at all. Fragments are repaired one at a time, fewest trips
//! first:
//!
//! 1. one neighboring zone: merge into it;
//! 2. several neighboring zones, flows to at least one: merge into the one
//!    with the largest quality gain (even when every gain is negative);
//! 3. several neighboring zones, no flows to any: merge into the one with
//!    the smallest area.

use std::collections::BTreeSet;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::induced_components;
use crate::geo::{AdjacencyGraph, TazId};
use crate::network::SpatialNetwork;
use crate::partition::Partition;
use crate::quality::{QualityConfig, QualityModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FragmentKind {
    EnclaveOneNeighbor,
    EnclaveMultiNeighbor,
    Orphan,
}

impl FragmentKind {
    /// Repair rule number applied to this kind.
    pub fn rule(self) -> u8 {
        match self {
            FragmentKind::EnclaveOneNeighbor => 1,
            FragmentKind::EnclaveMultiNeighbor => 2,
            FragmentKind::Orphan => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Fragment {
    pub zone: usize,
    pub members: Vec<TazId>,
    pub kind: FragmentKind,
    pub neighbor_zones: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepairConfig {
    /// Zones smaller than this are treated as fragments; 0 disables the rule.
    pub min_zone_km2: f64,
    pub quality: QualityConfig,
}

impl Default for RepairConfig {
    fn default() -> Self {
        Self { min_zone_km2: 0.0, quality: QualityConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairRecord {
    pub fragment: Vec<TazId>,
    pub rule: u8,
    /// Zone label in the split partition's numbering.
    pub target_zone: usize,
    pub delta_q: f64,
    /// Rule 2 merge taken although no neighbor offered a positive gain.
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepairOutcome {
    pub partition: Partition,
    pub log: Vec<RepairRecord>,
    /// Fragments left in place because they touch no other zone.
    pub islands: Vec<Vec<TazId>>,
    /// Zones that were split into more than one piece.
    pub split_zones: usize,
}

fn check_alignment(p: &Partition, adj: &AdjacencyGraph, net: &SpatialNetwork) -> Result<()> {
    if adj.ids() != net.ids() {
        return Err(Error::IdMismatch("adjacency graph and network cover different TAZs".into()));
    }
    if p.len() != net.node_count() {
        return Err(Error::InvalidPartition(format!(
            "partition covers {} nodes, network has {}",
            p.len(),
            net.node_count()
        )));
    }
    Ok(())
}

/// Splits every polygon-disconnected zone into its components. The largest
/// piece (by trips, then area, then lowest TAZ) keeps the zone id; the other
/// pieces get new ids after the existing ones.
pub fn split_components(p: &Partition, adj: &AdjacencyGraph, net: &SpatialNetwork) -> Result<Partition> {
    Ok(split_with_pieces(p, adj, net)?.0)
}

/// Also returns the new ids of split-off pieces.
fn split_with_pieces(p: &Partition, adj: &AdjacencyGraph, net: &SpatialNetwork) -> Result<(Partition, Vec<usize>)> {
    check_alignment(p, adj, net)?;
    let mut zone_of = p.assignment().to_vec();
    let mut next = p.zone_count();
    let mut pieces = Vec::new();
    for members in p.members() {
        let mut comps = induced_components(&members, |v| adj.neighbors(v).iter().copied());
        if comps.len() < 2 {
            continue;
        }
        let key = |c: &Vec<usize>| {
            let trips: u64 = c.iter().map(|&v| net.strength(v)).sum();
            let area: f64 = c.iter().map(|&v| net.attrs(v).area_m2).sum();
            (trips, area)
        };
        // components are ordered by smallest member, so the first maximum wins ties
        let keep = (0..comps.len())
            .fold(0, |best, i| {
                let (bt, ba) = key(&comps[best]);
                let (t, a) = key(&comps[i]);
                if t > bt || (t == bt && a > ba) { i } else { best }
            });
        for (i, comp) in comps.iter_mut().enumerate() {
            if i == keep {
                continue;
            }
            for &v in comp.iter() {
                zone_of[v] = next;
            }
            pieces.push(next);
            next += 1;
        }
    }
    Ok((Partition::new(zone_of)?, pieces))
}

/// Zone-level view used while repairing; labels stay fixed, merged zones
/// become empty.
struct Zones<'a> {
    net: &'a SpatialNetwork,
    adj: &'a AdjacencyGraph,
    /// Absent when the network has no trips.
    model: Option<QualityModel>,
    zone_of: Vec<usize>,
    members: Vec<Vec<usize>>,
    strength: Vec<f64>,
    trips: Vec<u64>,
    area: Vec<f64>,
}

impl<'a> Zones<'a> {
    fn new(p: &Partition, adj: &'a AdjacencyGraph, net: &'a SpatialNetwork, cfg: &QualityConfig) -> Result<Self> {
        let model = match QualityModel::new(net, cfg) {
            Ok(m) => Some(m),
            Err(Error::EmptyNetwork) => None,
            Err(e) => return Err(e),
        };
        let members = p.members();
        let strength = members
            .iter()
            .map(|m| m.iter().map(|&v| model.as_ref().map_or(0.0, |q| q.strength(v))).sum())
            .collect();
        let trips = members.iter().map(|m| m.iter().map(|&v| net.strength(v)).sum()).collect();
        let area = members.iter().map(|m| m.iter().map(|&v| net.attrs(v).area_m2).sum()).collect();
        Ok(Self { net, adj, model, zone_of: p.assignment().to_vec(), members, strength, trips, area })
    }

    fn neighbor_zones(&self, z: usize) -> Vec<usize> {
        let set: BTreeSet<usize> = self.members[z]
            .iter()
            .flat_map(|&v| self.adj.neighbors(v))
            .map(|&u| self.zone_of[u])
            .filter(|&t| t != z)
            .collect();
        set.into_iter().collect()
    }

    fn has_flow_to(&self, z: usize, targets: &[usize]) -> bool {
        self.members[z].iter().any(|&v| self.net.edges(v).any(|e| targets.binary_search(&self.zone_of[e.target]).is_ok()))
    }

    fn classify(&self, z: usize) -> Result<Fragment> {
        let neighbor_zones = self.neighbor_zones(z);
        let kind = match neighbor_zones.len() {
            0 => return Err(Error::IslandNoNeighbors(z)),
            1 => FragmentKind::EnclaveOneNeighbor,
            _ if self.has_flow_to(z, &neighbor_zones) => FragmentKind::EnclaveMultiNeighbor,
            _ => FragmentKind::Orphan,
        };
        let members = self.members[z].iter().map(|&v| self.net.ids()[v]).collect();
        Ok(Fragment { zone: z, members, kind, neighbor_zones })
    }

    /// Quality change from merging zones `a` and `b`.
    fn merge_gain(&self, a: usize, b: usize) -> f64 {
        let Some(model) = &self.model else { return 0.0 };
        let (p, n) = model.norms();
        let between: f64 = self.members[a]
            .iter()
            .flat_map(|&v| model.neighbors(v))
            .filter(|&(u, _)| self.zone_of[u] == b)
            .map(|(_, w)| w)
            .sum();
        2.0 * (between - self.strength[a] * self.strength[b] / n) / p
    }

    fn merge(&mut self, from: usize, into: usize) {
        let moved = std::mem::take(&mut self.members[from]);
        for &v in &moved {
            self.zone_of[v] = into;
        }
        self.members[into].extend(moved);
        self.members[into].sort_unstable();
        self.strength[into] += std::mem::take(&mut self.strength[from]);
        self.trips[into] += std::mem::take(&mut self.trips[from]);
        self.area[into] += std::mem::take(&mut self.area[from]);
    }
}

/// Classifies zone `zone` of `p` as a fragment.
pub fn classify_fragment(zone: usize, p: &Partition, adj: &AdjacencyGraph, net: &SpatialNetwork) -> Result<Fragment> {
    check_alignment(p, adj, net)?;
    if zone >= p.zone_count() {
        return Err(Error::UnknownZone(zone));
    }
    Zones::new(p, adj, net, &QualityConfig::standard())?.classify(zone)
}

/// Splits `p` into polygon-connected zones, then merges fragments until
/// every zone is contiguous and meets the area threshold.
pub fn repair(p: &Partition, adj: &AdjacencyGraph, net: &SpatialNetwork, cfg: &RepairConfig) -> Result<RepairOutcome> {
    if !(cfg.min_zone_km2 >= 0.0) {
        return Err(Error::InvalidParameter(format!("min_zone_km2 must be >= 0, got {}", cfg.min_zone_km2)));
    }
    let (split, pieces) = split_with_pieces(p, adj, net)?;
    let split_members = split.members();
    let split_zones = pieces.iter().map(|&z| p.zone_of(split_members[z][0])).collect::<BTreeSet<_>>().len();
    let mut zones = Zones::new(&split, adj, net, &cfg.quality)?;
    let mut marked: BTreeSet<usize> = pieces.into_iter().collect();
    let mut skipped: BTreeSet<usize> = BTreeSet::new();
    let mut islands = Vec::new();
    let mut log = Vec::new();
    let min_area = cfg.min_zone_km2 * 1e6;
    let bound = marked.len() + split.zone_count();
    loop {
        let live = zones.members.len();
        let next = (0..live)
            .filter(|&z| !zones.members[z].is_empty() && !skipped.contains(&z))
            .filter(|&z| marked.contains(&z) || zones.area[z] < min_area || zones.trips[z] == 0)
            .min_by_key(|&z| (zones.trips[z], z));
        let Some(f) = next else { break };
        if log.len() >= bound {
            return Err(Error::NonConvergence(log.len()));
        }
        let frag = match zones.classify(f) {
            Ok(frag) => frag,
            Err(Error::IslandNoNeighbors(_)) => {
                skipped.insert(f);
                islands.push(zones.members[f].iter().map(|&v| net.ids()[v]).collect());
                continue;
            }
            Err(e) => return Err(e),
        };
        let gains: Vec<(usize, f64)> = frag.neighbor_zones.iter().map(|&t| (t, zones.merge_gain(f, t))).collect();
        let (target, delta_q) = match frag.kind {
            FragmentKind::EnclaveOneNeighbor => gains[0],
            FragmentKind::EnclaveMultiNeighbor => {
                gains.iter().copied().fold(gains[0], |best, g| if g.1 > best.1 { g } else { best })
            }
            FragmentKind::Orphan => gains
                .iter()
                .copied()
                .fold(gains[0], |best, g| if zones.area[g.0] < zones.area[best.0] { g } else { best }),
        };
        log.push(RepairRecord {
            fragment: frag.members,
            rule: frag.kind.rule(),
            target_zone: target,
            delta_q,
            fallback: frag.kind == FragmentKind::EnclaveMultiNeighbor && delta_q < 0.0,
        });
        zones.merge(f, target);
        marked.remove(&f);
        skipped.retain(|&z| z != target);
    }
    Ok(RepairOutcome { partition: Partition::from_labels(&zones.zone_of), log, islands, split_zones })
}

/// True when every zone of `p` is polygon-connected.
pub fn is_contiguous(p: &Partition, adj: &AdjacencyGraph) -> bool {
    p.members().iter().all(|m| induced_components(m, |v| adj.neighbors(v).iter().copied()).len() <= 1)
}

/// One JSON object per line.
pub fn write_repair_log<W: Write>(log: &[RepairRecord], mut w: W) -> Result<()> {
    for rec in log {
        serde_json::to_writer(&mut w, rec)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{build_adjacency, build_distance_matrix, rect_taz, DistanceOptions, LonLat, Taz};
    use crate::ingest::FlowMatrix;
    use crate::network::build_network;

    fn strip(n: u64) -> Vec<Taz> {
        (0..n)
            .map(|i| {
                let x = i as f64 * 0.01;
                rect_taz(i + 1, LonLat::new(x, 0.0), LonLat::new(x + 0.01, 0.01), 1e6, 10.0, 0.0).unwrap()
            })
            .collect()
    }

    fn setup(tazs: &[Taz], flows: &[(u64, u64, u64)]) -> (AdjacencyGraph, SpatialNetwork) {
        let adj = build_adjacency(tazs, 1.0).unwrap();
        let dist = build_distance_matrix(tazs, None, DistanceOptions::default()).unwrap();
        let mut m = FlowMatrix::new();
        for &(o, d, t) in flows {
            m.add(TazId(o), TazId(d), t);
        }
        (adj, build_network(&m, &dist, 1.0).unwrap().with_attributes(tazs).unwrap())
    }

    #[test]
    fn contiguous_zones_untouched() {
        let tazs = strip(4);
        let (adj, net) = setup(&tazs, &[(1, 2, 5), (3, 4, 5)]);
        let p = Partition::new(vec![0, 0, 1, 1]).unwrap();
        assert_eq!(split_components(&p, &adj, &net).unwrap(), p);
        let out = repair(&p, &adj, &net, &RepairConfig::default()).unwrap();
        assert_eq!(out.partition, p);
        assert!(out.log.is_empty());
    }

    #[test]
    fn non_adjacent_pair_splits() {
        let tazs = strip(3);
        let (adj, net) = setup(&tazs, &[(1, 3, 5), (2, 2, 1)]);
        let p = Partition::new(vec![0, 1, 0]).unwrap();
        let s = split_components(&p, &adj, &net).unwrap();
        assert_eq!(s.zone_count(), 3);
        assert_eq!(s.zone_of(0), 0);
    }

    #[test]
    fn enclave_with_one_neighbor_merges() {
        let tazs = strip(3);
        let (adj, net) = setup(&tazs, &[(1, 3, 5), (2, 2, 1), (1, 2, 1)]);
        let p = Partition::new(vec![0, 1, 0]).unwrap();
        let out = repair(&p, &adj, &net, &RepairConfig::default()).unwrap();
        assert_eq!(out.log.len(), 1);
        assert_eq!(out.log[0].rule, 1);
        assert_eq!(out.partition.zone_count(), 2);
        assert!(is_contiguous(&out.partition, &adj));
    }

    #[test]
    fn island_reported_and_left() {
        let mut tazs = strip(2);
        tazs.push(rect_taz(3, LonLat::new(1.0, 1.0), LonLat::new(1.01, 1.01), 1e6, 1.0, 0.0).unwrap());
        let (adj, net) = setup(&tazs, &[(1, 3, 5), (1, 2, 1)]);
        let p = Partition::new(vec![0, 1, 0]).unwrap();
        let out = repair(&p, &adj, &net, &RepairConfig::default()).unwrap();
        assert_eq!(out.islands, vec![vec![TazId(3)]]);
        let split = split_components(&p, &adj, &net).unwrap();
        assert!(matches!(classify_fragment(2, &split, &adj, &net), Err(Error::IslandNoNeighbors(2))));
    }

    #[test]
    fn min_area_merges_small_zone() {
        let tazs = strip(3);
        let (adj, net) = setup(&tazs, &[(1, 2, 5), (3, 3, 5), (2, 3, 1)]);
        let p = Partition::new(vec![0, 0, 1]).unwrap();
        let cfg = RepairConfig { min_zone_km2: 1.5, ..Default::default() };
        let out = repair(&p, &adj, &net, &cfg).unwrap();
        assert_eq!(out.partition.zone_count(), 1);
    }

    #[test]
    fn repair_log_is_jsonl() {
        let rec = RepairRecord { fragment: vec![TazId(4)], rule: 3, target_zone: 1, delta_q: -0.5, fallback: false };
        let mut buf = Vec::new();
        write_repair_log(&[rec.clone(), rec], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.starts_with(r#"{"fragment":[4],"rule":3,"target_zone":1,"delta_q":-0.5,"fallback":false}"#));
    }
}
