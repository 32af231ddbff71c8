//! Zone plans: cut-off trip accounting, comparison against a reference
//! partition, and agglomeration into K macro-zones.
//!
//! Per zone, `intra` counts directed trips with both ends inside and
//! `total` counts trips with at least one end inside, so a trip between
//! two zones appears in both zones' totals. The plan-level figure uses the
//! grand total instead: `1 - sum(intra) / grand_total`.

mod export;
mod merge;

use serde::{Deserialize, Serialize};

pub use export::{plan_feature_collection, write_plan_csv, write_plan_geojson, write_plan_json};
pub use merge::{merge_to_k, MergeObjective, MergeOutcome, MergeStep, EXACT_MAX_ZONES};

use crate::error::{Error, Result};
use crate::geo::TazId;
use crate::network::SpatialNetwork;
use crate::partition::Partition;
use crate::quality::{geo_modularity, modularity, QualityConfig};

/// Cut-off percentage `100 * (1 - intra / total)`; zero when `total` is zero.
pub fn cutoff_pct(intra: u64, total: u64) -> f64 {
    if total == 0 {
        0.0
    } else {
        100.0 * (1.0 - intra as f64 / total as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneStats {
    pub zone: usize,
    pub taz_count: usize,
    pub area_km2: f64,
    pub population: f64,
    pub intra_trips: u64,
    pub total_trips: u64,
    pub cutoff_pct: f64,
}

/// Trip accounting of a partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffStats {
    pub zones: Vec<ZoneStats>,
    pub grand_total: u64,
    pub intra_total: u64,
    pub cut_trips: u64,
    pub total_cutoff_pct: f64,
}

pub fn cutoff_stats(p: &Partition, net: &SpatialNetwork) -> Result<CutoffStats> {
    if p.len() != net.node_count() {
        return Err(Error::InvalidPartition(format!(
            "partition covers {} nodes, network has {}",
            p.len(),
            net.node_count()
        )));
    }
    let k = p.zone_count();
    let mut intra = vec![0u64; k];
    let mut touching = vec![0u64; k];
    let mut zones: Vec<ZoneStats> = (0..k)
        .map(|zone| ZoneStats {
            zone,
            taz_count: 0,
            area_km2: 0.0,
            population: 0.0,
            intra_trips: 0,
            total_trips: 0,
            cutoff_pct: 0.0,
        })
        .collect();
    for i in 0..net.node_count() {
        let z = p.zone_of(i);
        let a = net.attrs(i);
        zones[z].taz_count += 1;
        zones[z].area_km2 += a.area_m2 / 1e6;
        zones[z].population += a.population;
        intra[z] += net.self_loop(i) / 2;
        for e in net.edges(i).filter(|e| e.target > i) {
            let zj = p.zone_of(e.target);
            if zj == z {
                intra[z] += e.weight;
            } else {
                touching[z] += e.weight;
                touching[zj] += e.weight;
            }
        }
    }
    for (z, s) in zones.iter_mut().enumerate() {
        s.intra_trips = intra[z];
        s.total_trips = intra[z] + touching[z];
        s.cutoff_pct = cutoff_pct(s.intra_trips, s.total_trips);
    }
    let grand_total = net.total_trips();
    let intra_total: u64 = intra.iter().sum();
    Ok(CutoffStats {
        zones,
        grand_total,
        intra_total,
        cut_trips: grand_total - intra_total,
        total_cutoff_pct: cutoff_pct(intra_total, grand_total),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub taz_id: TazId,
    pub zone_id: usize,
}

/// A partition with its trip accounting and both modularities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZonePlan {
    pub zone_count: usize,
    #[serde(flatten)]
    pub stats: CutoffStats,
    /// Absent when the network carries no trips.
    pub modularity: Option<f64>,
    pub geo_modularity: Option<f64>,
    pub quality: QualityConfig,
    pub assignment: Vec<Assignment>,
}

impl ZonePlan {
    pub fn new(p: &Partition, net: &SpatialNetwork, quality: &QualityConfig) -> Result<Self> {
        let stats = cutoff_stats(p, net)?;
        let empty = net.two_m() == 0;
        let q = if empty { None } else { Some(modularity(net, p)?) };
        let qg = if empty { None } else { Some(geo_modularity(net, p, quality)?) };
        let assignment =
            net.ids().iter().enumerate().map(|(i, &taz_id)| Assignment { taz_id, zone_id: p.zone_of(i) }).collect();
        Ok(Self { zone_count: p.zone_count(), stats, modularity: q, geo_modularity: qg, quality: *quality, assignment })
    }

    /// Rebuilds the partition over `ids` from the stored assignment.
    pub fn partition(&self, ids: &[TazId]) -> Result<Partition> {
        if self.assignment.len() != ids.len() || self.assignment.iter().zip(ids).any(|(a, id)| a.taz_id != *id) {
            return Err(Error::IdMismatch("plan assignment does not match the TAZ set".into()));
        }
        Partition::new(self.assignment.iter().map(|a| a.zone_id).collect())
    }
}

/// A plan next to a reference plan. Deltas are reference minus plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanComparison {
    pub plan: ZonePlan,
    pub reference: ZonePlan,
    pub delta_cutoff_pct: f64,
    pub delta_intra_trips: i64,
    pub delta_zone_count: i64,
    pub delta_modularity: Option<f64>,
}

pub fn compare_to_reference(
    p: &Partition,
    reference: &Partition,
    net: &SpatialNetwork,
    quality: &QualityConfig,
) -> Result<PlanComparison> {
    let plan = ZonePlan::new(p, net, quality)?;
    let reference = ZonePlan::new(reference, net, quality)?;
    Ok(PlanComparison {
        delta_cutoff_pct: reference.stats.total_cutoff_pct - plan.stats.total_cutoff_pct,
        delta_intra_trips: reference.stats.intra_total as i64 - plan.stats.intra_total as i64,
        delta_zone_count: reference.zone_count as i64 - plan.zone_count as i64,
        delta_modularity: plan.modularity.zip(reference.modularity).map(|(a, b)| b - a),
        plan,
        reference,
    })
}
