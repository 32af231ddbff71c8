//! Leiden community detection: local moving, refinement, aggregation.

use std::collections::{BTreeSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::TazId;
use crate::network::{NodeAttrs, SpatialNetwork};
use crate::partition::Partition;
use crate::quality::{QualityConfig, QualityModel};

/// Moves must beat staying by this much (in normalized quality units).
const MOVE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeidenParams {
    pub seed: u64,
    pub max_outer_iters: usize,
    /// Refinement temperature; 0 picks the best merge deterministically.
    pub theta: f64,
    pub quality: QualityConfig,
    pub min_gain: f64,
}

impl Default for LeidenParams {
    fn default() -> Self {
        Self { seed: 42, max_outer_iters: 100, theta: 0.01, quality: QualityConfig::default(), min_gain: 1e-9 }
    }
}

impl LeidenParams {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_quality(mut self, quality: QualityConfig) -> Self {
        self.quality = quality;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.theta >= 0.0 && self.theta.is_finite()) {
            return Err(Error::InvalidParameter(format!("theta must be >= 0, got {}", self.theta)));
        }
        if self.max_outer_iters == 0 {
            return Err(Error::InvalidParameter("max_outer_iters must be >= 1".into()));
        }
        if !(self.min_gain >= 0.0) {
            return Err(Error::InvalidParameter(format!("min_gain must be >= 0, got {}", self.min_gain)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionResult {
    #[serde(skip)]
    pub partition: Partition,
    pub quality_trace: Vec<f64>,
    pub iterations: usize,
    pub seed_used: u64,
}

pub fn detect(net: &SpatialNetwork, params: &LeidenParams) -> Result<DetectionResult> {
    params.validate()?;
    let model = QualityModel::new(net, &params.quality)?;
    Ok(detect_model(&model, params))
}

/// Runs detection directly on a quality model.
pub fn detect_model(model: &QualityModel, params: &LeidenParams) -> DetectionResult {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n = model.node_count();
    let mut zone_of: Vec<usize> = (0..n).collect();
    let mut best_q = model.evaluate(&zone_of);
    let mut trace = Vec::new();
    let mut iterations = 0;
    while iterations < params.max_outer_iters {
        iterations += 1;
        let candidate = split_disconnected(model, &leiden_pass(model, &zone_of, &mut rng, params.theta));
        let q = model.evaluate(&candidate);
        let improved = q - best_q;
        if improved >= 0.0 {
            zone_of = candidate;
            best_q = q;
        }
        trace.push(best_q);
        if improved < params.min_gain {
            break;
        }
    }
    DetectionResult {
        partition: Partition::from_labels(&zone_of),
        quality_trace: trace,
        iterations,
        seed_used: params.seed,
    }
}

/// One full Leiden pass starting from `init` (labels `< n`). Returns labels
/// on the original nodes.
fn leiden_pass(model: &QualityModel, init: &[usize], rng: &mut ChaCha8Rng, theta: f64) -> Vec<usize> {
    let mut level = std::borrow::Cow::Borrowed(model);
    // original node -> node of the current level
    let mut node_map: Vec<usize> = (0..model.node_count()).collect();
    let mut zone_of = init.to_vec();
    loop {
        let n = level.node_count();
        local_move(&level, &mut zone_of);
        let zones = relabel(&mut zone_of);
        if zones == n {
            break;
        }
        let mut refined = refine(&level, &zone_of, rng, theta);
        let mut groups = relabel(&mut refined);
        if groups == n {
            // nothing merged inside zones; contract the zones themselves
            refined = zone_of.clone();
            groups = zones;
        }
        let mut next_zone = vec![0; groups];
        for (v, &g) in refined.iter().enumerate() {
            next_zone[g] = zone_of[v];
        }
        level = std::borrow::Cow::Owned(level.aggregate(&refined, groups));
        for m in node_map.iter_mut() {
            *m = refined[*m];
        }
        zone_of = next_zone;
    }
    node_map.iter().map(|&v| zone_of[v]).collect()
}

/// Renumbers labels by first appearance; returns the label count.
fn relabel(labels: &mut [usize]) -> usize {
    let mut map = vec![usize::MAX; labels.len()];
    let mut next = 0;
    for l in labels.iter_mut() {
        if map[*l] == usize::MAX {
            map[*l] = next;
            next += 1;
        }
        *l = map[*l];
    }
    next
}

/// Sums weights from `v` into each neighboring label, skipping `v` itself.
struct Scratch {
    weight: Vec<f64>,
    seen: Vec<bool>,
    touched: Vec<usize>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Self { weight: vec![0.0; n], seen: vec![false; n], touched: Vec::new() }
    }

    fn collect(&mut self, model: &QualityModel, v: usize, label: impl Fn(usize) -> Option<usize>) {
        for &z in &self.touched {
            self.weight[z] = 0.0;
            self.seen[z] = false;
        }
        self.touched.clear();
        for (u, w) in model.neighbors(v) {
            if let Some(z) = label(u) {
                if !self.seen[z] {
                    self.seen[z] = true;
                    self.touched.push(z);
                }
                self.weight[z] += w;
            }
        }
        self.touched.sort_unstable();
    }
}

fn local_move(model: &QualityModel, zone_of: &mut [usize]) {
    let n = model.node_count();
    let (norm_obs, norm_null) = model.norms();
    let mut zone_strength = vec![0.0; n];
    let mut zone_size = vec![0usize; n];
    for v in 0..n {
        zone_strength[zone_of[v]] += model.strength(v);
        zone_size[zone_of[v]] += 1;
    }
    let mut empty: BTreeSet<usize> = (0..n).filter(|&z| zone_size[z] == 0).collect();
    let mut queue: VecDeque<usize> = (0..n).collect();
    let mut queued = vec![true; n];
    let mut scratch = Scratch::new(n);
    while let Some(v) = queue.pop_front() {
        queued[v] = false;
        let cur = zone_of[v];
        let s = model.strength(v);
        scratch.collect(model, v, |u| Some(zone_of[u]));
        zone_strength[cur] -= s;
        zone_size[cur] -= 1;
        // gain of inserting the isolated v into z, times P/2
        let gain = |z: usize, w: f64| w - s * zone_strength[z] / norm_null;
        let stay = gain(cur, scratch.weight[cur]);
        let mut best = (cur, stay);
        let mut best_other: Option<(usize, f64)> = None;
        for &z in &scratch.touched {
            if z == cur {
                continue;
            }
            let g = gain(z, scratch.weight[z]);
            if best_other.is_none_or(|(_, bg)| g > bg) {
                best_other = Some((z, g));
            }
        }
        if zone_size[cur] > 0 {
            if let Some(&z) = empty.first() {
                if best_other.is_none_or(|(bz, bg)| 0.0 > bg || (0.0 == bg && z < bz)) {
                    best_other = Some((z, 0.0));
                }
            }
        }
        if let Some((z, g)) = best_other {
            if 2.0 * (g - stay) / norm_obs > MOVE_EPS {
                best = (z, g);
            }
        }
        let target = best.0;
        zone_strength[target] += s;
        zone_size[target] += 1;
        if target != cur {
            zone_of[v] = target;
            empty.remove(&target);
            if zone_size[cur] == 0 {
                empty.insert(cur);
            }
            for (u, _) in model.neighbors(v) {
                if !queued[u] && zone_of[u] != target {
                    queued[u] = true;
                    queue.push_back(u);
                }
            }
        }
    }
}

/// Splits each zone into well-connected subclusters, merging singletons
/// only within their own zone.
fn refine(model: &QualityModel, zone_of: &[usize], rng: &mut ChaCha8Rng, theta: f64) -> Vec<usize> {
    let n = model.node_count();
    let (_, norm_null) = model.norms();
    let mut zone_strength = vec![0.0; n];
    for v in 0..n {
        zone_strength[zone_of[v]] += model.strength(v);
    }
    let mut cluster: Vec<usize> = (0..n).collect();
    let mut cluster_strength: Vec<f64> = (0..n).map(|v| model.strength(v)).collect();
    let mut cluster_size = vec![1usize; n];
    // weight from each cluster to the rest of its zone
    let mut external: Vec<f64> = (0..n)
        .map(|v| model.neighbors(v).filter(|&(u, _)| zone_of[u] == zone_of[v]).map(|(_, w)| w).sum())
        .collect();
    let well_connected = |ext: f64, s: f64, total: f64| ext >= s * (total - s) / norm_null - 1e-12 * norm_null;
    let mut scratch = Scratch::new(n);
    let mut candidates: Vec<(usize, f64)> = Vec::new();
    for v in 0..n {
        if cluster_size[cluster[v]] != 1 {
            continue;
        }
        let z = zone_of[v];
        let s = model.strength(v);
        if !well_connected(external[v], s, zone_strength[z]) {
            continue;
        }
        scratch.collect(model, v, |u| (zone_of[u] == z).then_some(cluster[u]));
        candidates.clear();
        for &c in &scratch.touched {
            if c == cluster[v] || !well_connected(external[c], cluster_strength[c], zone_strength[z]) {
                continue;
            }
            let dq = scratch.weight[c] - s * cluster_strength[c] / norm_null;
            if dq > 0.0 {
                candidates.push((c, dq));
            }
        }
        let Some(target) = choose(&candidates, model.norms().0, theta, rng) else {
            continue;
        };
        let w = scratch.weight[target];
        let old = cluster[v];
        cluster[v] = target;
        cluster_size[old] = 0;
        cluster_size[target] += 1;
        cluster_strength[old] = 0.0;
        cluster_strength[target] += s;
        external[target] += external[v] - 2.0 * w;
    }
    cluster
}

/// Samples a candidate with probability proportional to `exp(dq / theta)`,
/// `dq` normalized; `theta == 0` takes the first best.
fn choose(candidates: &[(usize, f64)], norm_obs: f64, theta: f64, rng: &mut ChaCha8Rng) -> Option<usize> {
    let best = candidates.iter().copied().fold(None, |acc: Option<(usize, f64)>, c| match acc {
        Some(a) if a.1 >= c.1 => Some(a),
        _ => Some(c),
    })?;
    if theta == 0.0 || candidates.len() == 1 {
        return Some(best.0);
    }
    let scale = 2.0 / norm_obs / theta;
    let weights: Vec<f64> = candidates.iter().map(|&(_, dq)| ((dq - best.1) * scale).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut r = rng.random::<f64>() * total;
    for (&(c, _), w) in candidates.iter().zip(&weights) {
        if r < *w {
            return Some(c);
        }
        r -= w;
    }
    Some(best.0)
}

/// Splits zones whose members are not connected through positive-weight
/// edges. Never lowers quality.
fn split_disconnected(model: &QualityModel, zone_of: &[usize]) -> Vec<usize> {
    let n = model.node_count();
    let mut out = vec![usize::MAX; n];
    let mut next = 0;
    let mut stack = Vec::new();
    for start in 0..n {
        if out[start] != usize::MAX {
            continue;
        }
        out[start] = next;
        stack.push(start);
        while let Some(v) = stack.pop() {
            for (u, _) in model.neighbors(v) {
                if out[u] == usize::MAX && zone_of[u] == zone_of[start] {
                    out[u] = next;
                    stack.push(u);
                }
            }
        }
        next += 1;
    }
    out
}

/// Contracts each zone of `p` into one super-node. Internal trips become a
/// self-loop; distances between super-nodes are flow-weighted means of
/// member-pair distances; population and area are summed. Super-node ids
/// are the zone numbers.
pub fn aggregate(net: &SpatialNetwork, p: &Partition) -> Result<SpatialNetwork> {
    if p.len() != net.node_count() {
        return Err(Error::InvalidPartition(format!(
            "partition covers {} nodes, network has {}",
            p.len(),
            net.node_count()
        )));
    }
    let k = p.zone_count();
    let mut self_loops = vec![0u64; k];
    let mut intra_wd = vec![0.0; k];
    let mut intra_dsum = vec![0.0; k];
    let mut attrs = vec![NodeAttrs::default(); k];
    let mut pairs: std::collections::BTreeMap<(usize, usize), (u64, f64)> = Default::default();
    for i in 0..net.node_count() {
        let zi = p.zone_of(i);
        let a = net.attrs(i);
        attrs[zi].population += a.population;
        attrs[zi].area_m2 += a.area_m2;
        intra_dsum[zi] += net.intrazonal_km(i);
        let sl = net.self_loop(i);
        self_loops[zi] += sl;
        intra_wd[zi] += sl as f64 * net.intrazonal_km(i);
        for e in net.edges(i).filter(|e| e.target > i) {
            let zj = p.zone_of(e.target);
            if zi == zj {
                self_loops[zi] += 2 * e.weight;
                intra_wd[zi] += 2.0 * e.weight as f64 * e.distance_km;
            } else {
                let entry = pairs.entry((zi.min(zj), zi.max(zj))).or_insert((0, 0.0));
                entry.0 += e.weight;
                entry.1 += e.weight as f64 * e.distance_km;
            }
        }
    }
    let sizes: Vec<usize> = p.members().iter().map(Vec::len).collect();
    let intrazonal = (0..k)
        .map(|z| if self_loops[z] > 0 { intra_wd[z] / self_loops[z] as f64 } else { intra_dsum[z] / sizes[z] as f64 })
        .collect();
    let edges: Vec<_> = pairs.into_iter().map(|((a, b), (w, wd))| (a, b, w, wd / w as f64)).collect();
    let ids = (0..k as u64).map(TazId).collect();
    Ok(SpatialNetwork::from_undirected(ids, &edges, self_loops, intrazonal, attrs, net.alpha()))
}
