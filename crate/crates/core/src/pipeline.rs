//! End-to-end detection: Leiden, contiguity repair, plan statistics.

use crate::contiguity::{repair, RepairConfig, RepairOutcome};
use crate::error::Result;
use crate::geo::AdjacencyGraph;
use crate::leiden::{detect, DetectionResult, LeidenParams};
use crate::network::SpatialNetwork;
use crate::zoning::ZonePlan;

#[derive(Debug, Clone)]
pub struct Detection {
    pub detection: DetectionResult,
    pub repair: RepairOutcome,
    /// Plan of the repaired partition.
    pub plan: ZonePlan,
    /// Plan of the raw detected partition, before repair.
    pub raw_plan: ZonePlan,
}

/// Runs detection, then repair with the same quality configuration.
pub fn detect_zones(
    net: &SpatialNetwork,
    adj: &AdjacencyGraph,
    params: &LeidenParams,
    min_zone_km2: f64,
) -> Result<Detection> {
    let detection = detect(net, params)?;
    let cfg = RepairConfig { min_zone_km2, quality: params.quality };
    let repaired = repair(&detection.partition, adj, net, &cfg)?;
    let raw_plan = ZonePlan::new(&detection.partition, net, &params.quality)?;
    let plan = ZonePlan::new(&repaired.partition, net, &params.quality)?;
    Ok(Detection { detection, repair: repaired, plan, raw_plan })
}
