//! Partition quality: standard modularity and distance-deflated
//! ("geographic") modularity.
//!
//! Both are evaluated through one normalized form
//!
//! ```text
//! Q = (1/P) * sum_c [ In(c) - S(c)^2 / N ]
//! ```
//!
//! where `In(c)` sums observed weights over ordered member pairs (a
//! self-loop counted once), `S(c)` sums per-node null-model strengths, and
//! `P`, `N` are normalizers fixed by the configuration:
//!
//! | kind | observed weight | null strength | P | N |
//! |------|-----------------|---------------|---|---|
//! | Standard | `A_ij` | `k_i` | `2m` | `2m` |
//! | Geographic, raw `m` | `A_ij / d_ij^alpha` | `k_i / d_i` | `2m` | `2m` |
//! | Geographic, deflated `m` | `A_ij / d_ij^alpha` | `k_i / d_i` | `sum B` | `(sum w)^2 / sum B` |
//!
//! The deflated convention scales the null model so that its total matches
//! the deflated observed total, which makes the single-zone partition score
//! exactly zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{deflate, SpatialNetwork};
use crate::partition::Partition;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum QualityKind {
    Standard,
    #[default]
    Geographic,
}

/// Which total weight stands for `2m` in the geographic variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MConvention {
    #[default]
    RawWeight,
    DeflatedWeight,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityConfig {
    pub kind: QualityKind,
    pub alpha: f64,
    pub m_convention: MConvention,
}

impl Default for QualityConfig {
    fn default() -> Self {
        Self::geographic(1.0)
    }
}

impl QualityConfig {
    pub fn standard() -> Self {
        Self { kind: QualityKind::Standard, alpha: 1.0, m_convention: MConvention::RawWeight }
    }

    pub fn geographic(alpha: f64) -> Self {
        Self { kind: QualityKind::Geographic, alpha, m_convention: MConvention::RawWeight }
    }

    pub fn with_m_convention(mut self, m: MConvention) -> Self {
        self.m_convention = m;
        self
    }
}

/// Target of a single-node move.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MoveTarget {
    Zone(usize),
    /// A fresh zone holding only the moved node.
    NewZone,
}

/// The weighted graph a quality function actually scores, detached from the
/// trip network so it can be aggregated exactly.
#[derive(Debug, Clone)]
pub struct QualityModel {
    offsets: Vec<usize>,
    targets: Vec<usize>,
    weights: Vec<f64>,
    self_weight: Vec<f64>,
    strength: Vec<f64>,
    norm_observed: f64,
    norm_null: f64,
}

impl QualityModel {
    pub fn new(net: &SpatialNetwork, cfg: &QualityConfig) -> Result<Self> {
        if !(cfg.alpha >= 0.0 && cfg.alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!("alpha must be >= 0, got {}", cfg.alpha)));
        }
        let n = net.node_count();
        let two_m = net.two_m() as f64;
        if two_m == 0.0 {
            return Err(Error::EmptyNetwork);
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        let mut targets = Vec::new();
        let mut weights = Vec::new();
        let mut self_weight = Vec::with_capacity(n);
        let mut strength = Vec::with_capacity(n);
        let geographic = cfg.kind == QualityKind::Geographic;
        for i in 0..n {
            for e in net.edges(i) {
                targets.push(e.target);
                let w = if !geographic {
                    e.weight as f64
                } else {
                    if e.distance_km <= 0.0 && cfg.alpha > 0.0 {
                        return Err(Error::ZeroDistance(net.ids()[i], net.ids()[e.target]));
                    }
                    if cfg.alpha == net.alpha() {
                        e.deflated
                    } else {
                        deflate(e.weight as f64, e.distance_km, cfg.alpha)
                    }
                };
                weights.push(w);
            }
            offsets.push(targets.len());
            let sl = net.self_loop(i);
            if !geographic {
                self_weight.push(sl as f64);
                strength.push(net.strength(i) as f64);
            } else {
                if sl > 0 && net.intrazonal_km(i) <= 0.0 && cfg.alpha > 0.0 {
                    return Err(Error::ZeroDistance(net.ids()[i], net.ids()[i]));
                }
                self_weight.push(deflate(sl as f64, net.intrazonal_km(i), cfg.alpha));
                strength.push(net.null_strength(i));
            }
        }
        let (norm_observed, norm_null) = match (cfg.kind, cfg.m_convention) {
            (QualityKind::Geographic, MConvention::DeflatedWeight) => {
                let observed: f64 = weights.iter().sum::<f64>() + self_weight.iter().sum::<f64>();
                let null_total: f64 = strength.iter().sum();
                if observed <= 0.0 || null_total <= 0.0 {
                    return Err(Error::EmptyNetwork);
                }
                (observed, null_total * null_total / observed)
            }
            _ => (two_m, two_m),
        };
        Ok(Self { offsets, targets, weights, self_weight, strength, norm_observed, norm_null })
    }

    pub fn node_count(&self) -> usize {
        self.strength.len()
    }

    /// `(P, N)` normalizers.
    pub fn norms(&self) -> (f64, f64) {
        (self.norm_observed, self.norm_null)
    }

    pub fn strength(&self, i: usize) -> f64 {
        self.strength[i]
    }

    pub fn self_weight(&self, i: usize) -> f64 {
        self.self_weight[i]
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.offsets[i]..self.offsets[i + 1]).map(move |e| (self.targets[e], self.weights[e]))
    }

    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    /// Quality of an assignment (labels need not be contiguous but must be `< n`).
    pub fn evaluate(&self, zone_of: &[usize]) -> f64 {
        let n = self.node_count();
        let mut internal = vec![0.0; n.max(1)];
        let mut total = vec![0.0; n.max(1)];
        for i in 0..n {
            let z = zone_of[i];
            total[z] += self.strength[i];
            internal[z] += self.self_weight[i];
            for (j, w) in self.neighbors(i) {
                if zone_of[j] == z {
                    internal[z] += w;
                }
            }
        }
        // zones in first-appearance order, so relabeling cannot change rounding
        let mut seen = vec![false; n.max(1)];
        let mut sum = 0.0;
        for &z in &zone_of[..n] {
            if !std::mem::replace(&mut seen[z], true) {
                sum += internal[z] - total[z] * total[z] / self.norm_null;
            }
        }
        sum / self.norm_observed
    }

    /// Contracts the graph by `group_of` (contiguous labels `0..groups`).
    /// Internal weight becomes a self-loop, so quality is preserved exactly.
    pub(crate) fn aggregate(&self, group_of: &[usize], groups: usize) -> QualityModel {
        let mut strength = vec![0.0; groups];
        let mut self_weight = vec![0.0; groups];
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); groups];
        for i in 0..self.node_count() {
            let g = group_of[i];
            strength[g] += self.strength[i];
            self_weight[g] += self.self_weight[i];
            for (j, w) in self.neighbors(i) {
                let h = group_of[j];
                if h == g {
                    self_weight[g] += w;
                } else {
                    rows[g].push((h, w));
                }
            }
        }
        let mut offsets = Vec::with_capacity(groups + 1);
        offsets.push(0);
        let mut targets = Vec::new();
        let mut weights = Vec::new();
        for mut row in rows {
            row.sort_unstable_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for (h, w) in row {
                if last == Some(h) {
                    *weights.last_mut().unwrap() += w;
                } else {
                    targets.push(h);
                    weights.push(w);
                    last = Some(h);
                }
            }
            offsets.push(targets.len());
        }
        QualityModel {
            offsets,
            targets,
            weights,
            self_weight,
            strength,
            norm_observed: self.norm_observed,
            norm_null: self.norm_null,
        }
    }
}

/// A partition together with cached zone strengths, for O(degree) gains.
#[derive(Debug, Clone)]
pub struct QualityState<'a> {
    model: &'a QualityModel,
    zone_of: Vec<usize>,
    zone_strength: Vec<f64>,
    zone_size: Vec<usize>,
}

impl<'a> QualityState<'a> {
    pub fn new(model: &'a QualityModel, partition: &Partition) -> Result<Self> {
        if partition.len() != model.node_count() {
            return Err(Error::InvalidPartition(format!(
                "partition covers {} nodes, network has {}",
                partition.len(),
                model.node_count()
            )));
        }
        let mut zone_strength = vec![0.0; partition.zone_count()];
        let mut zone_size = vec![0; partition.zone_count()];
        for (i, &z) in partition.assignment().iter().enumerate() {
            zone_strength[z] += model.strength(i);
            zone_size[z] += 1;
        }
        Ok(Self { model, zone_of: partition.assignment().to_vec(), zone_strength, zone_size })
    }

    pub fn quality(&self) -> f64 {
        self.model.evaluate(&self.zone_of)
    }

    pub fn zone_of(&self, node: usize) -> usize {
        self.zone_of[node]
    }

    /// Change in quality if `node` moved to `target`. Does not mutate.
    pub fn move_gain(&self, node: usize, target: MoveTarget) -> Result<f64> {
        let m = self.model;
        if node >= m.node_count() {
            return Err(Error::UnknownNode(node));
        }
        let cur = self.zone_of[node];
        let target = match target {
            MoveTarget::Zone(z) if z >= self.zone_strength.len() => return Err(Error::UnknownZone(z)),
            MoveTarget::Zone(z) if z == cur => return Ok(0.0),
            MoveTarget::NewZone if self.zone_size[cur] == 1 => return Ok(0.0),
            t => t,
        };
        let mut to_cur = 0.0;
        let mut to_target = 0.0;
        for (j, w) in m.neighbors(node) {
            let z = self.zone_of[j];
            if z == cur {
                to_cur += w;
            } else if target == MoveTarget::Zone(z) {
                to_target += w;
            }
        }
        let s = m.strength(node);
        let target_strength = match target {
            MoveTarget::Zone(z) => self.zone_strength[z],
            MoveTarget::NewZone => 0.0,
        };
        let cur_strength = self.zone_strength[cur];
        let observed = 2.0 * (to_target - to_cur);
        let null = 2.0 * s * (target_strength - cur_strength + s) / m.norm_null;
        Ok((observed - null) / m.norm_observed)
    }
}

fn check_cover(net: &SpatialNetwork, p: &Partition) -> Result<()> {
    if p.len() != net.node_count() {
        return Err(Error::InvalidPartition(format!(
            "partition covers {} nodes, network has {}",
            p.len(),
            net.node_count()
        )));
    }
    Ok(())
}

/// Standard (Newman) modularity of `p` on the trip weights.
pub fn modularity(net: &SpatialNetwork, p: &Partition) -> Result<f64> {
    check_cover(net, p)?;
    Ok(QualityModel::new(net, &QualityConfig::standard())?.evaluate(p.assignment()))
}

/// Geographic modularity of `p`; `cfg.kind` is taken as geographic.
pub fn geo_modularity(net: &SpatialNetwork, p: &Partition, cfg: &QualityConfig) -> Result<f64> {
    check_cover(net, p)?;
    let cfg = QualityConfig { kind: QualityKind::Geographic, ..*cfg };
    Ok(QualityModel::new(net, &cfg)?.evaluate(p.assignment()))
}

/// Quality under whichever kind `cfg` names.
pub fn quality(net: &SpatialNetwork, p: &Partition, cfg: &QualityConfig) -> Result<f64> {
    check_cover(net, p)?;
    Ok(QualityModel::new(net, cfg)?.evaluate(p.assignment()))
}

/// One-off move gain. Building the state is O(n); reuse [`QualityState`]
/// when scoring many moves.
pub fn move_gain(
    net: &SpatialNetwork,
    p: &Partition,
    node: usize,
    target: MoveTarget,
    cfg: &QualityConfig,
) -> Result<f64> {
    let model = QualityModel::new(net, cfg)?;
    QualityState::new(&model, p)?.move_gain(node, target)
}
