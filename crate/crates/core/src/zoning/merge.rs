use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{induced_components, AdjacencyGraph};
use crate::network::SpatialNetwork;
use crate::partition::Partition;

/// Largest zone count accepted by the exhaustive search.
pub const EXACT_MAX_ZONES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MergeObjective {
    pub k_target: usize,
    pub lambda_pop: f64,
    pub lambda_area: f64,
    /// Search all contiguous k-partitions of the zones instead of merging greedily.
    pub exact: bool,
}

impl MergeObjective {
    pub fn new(k_target: usize) -> Self {
        Self { k_target, lambda_pop: 1.0, lambda_area: 1.0, exact: false }
    }

    pub fn with_lambdas(mut self, pop: f64, area: f64) -> Self {
        self.lambda_pop = pop;
        self.lambda_area = area;
        self
    }

    pub fn exact(mut self, exact: bool) -> Self {
        self.exact = exact;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeStep {
    /// Zone labels of the input partition; `into` keeps its label.
    pub into: usize,
    pub from: usize,
    pub score: f64,
    pub cut_trips_after: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MergeOutcome {
    pub partition: Partition,
    /// Greedy steps in order; empty for the exact search.
    pub steps: Vec<MergeStep>,
    /// `cut / grand_total + lambda_pop * cv(pop) + lambda_area * cv(area)` of the result.
    pub objective: f64,
}

/// Coefficient of variation (population standard deviation over mean).
fn cv(sum: f64, sum_sq: f64, n: usize) -> f64 {
    if n == 0 || sum <= 0.0 {
        return 0.0;
    }
    let mean = sum / n as f64;
    let var = (sum_sq / n as f64 - mean * mean).max(0.0);
    var.sqrt() / mean
}

/// Zone-level summary of a partition.
struct ZoneGraph {
    pop: Vec<f64>,
    area: Vec<f64>,
    adjacent: Vec<BTreeSet<usize>>,
    /// Directed trips between distinct zones, keyed `(low, high)`.
    cross: BTreeMap<(usize, usize), u64>,
    cut: u64,
    grand: u64,
}

impl ZoneGraph {
    fn new(p: &Partition, adj: &AdjacencyGraph, net: &SpatialNetwork) -> Self {
        let k = p.zone_count();
        let mut pop = vec![0.0; k];
        let mut area = vec![0.0; k];
        let mut adjacent = vec![BTreeSet::new(); k];
        let mut cross = BTreeMap::new();
        let mut cut = 0;
        for i in 0..net.node_count() {
            let z = p.zone_of(i);
            pop[z] += net.attrs(i).population;
            area[z] += net.attrs(i).area_m2;
            for &j in adj.neighbors(i) {
                let zj = p.zone_of(j);
                if zj != z {
                    adjacent[z].insert(zj);
                }
            }
            for e in net.edges(i).filter(|e| e.target > i) {
                let zj = p.zone_of(e.target);
                if zj != z {
                    *cross.entry((z.min(zj), z.max(zj))).or_insert(0) += e.weight;
                    cut += e.weight;
                }
            }
        }
        Self { pop, area, adjacent, cross, cut, grand: net.total_trips() }
    }

    fn cross(&self, a: usize, b: usize) -> u64 {
        self.cross.get(&(a.min(b), a.max(b))).copied().unwrap_or(0)
    }

    fn components(&self) -> usize {
        let all: Vec<usize> = (0..self.pop.len()).collect();
        induced_components(&all, |z| self.adjacent[z].iter().copied()).len()
    }
}

/// Merges adjacent zones of `p` until `obj.k_target` remain, keeping every
/// zone polygon-connected. `p` should already be contiguous.
pub fn merge_to_k(p: &Partition, adj: &AdjacencyGraph, net: &SpatialNetwork, obj: &MergeObjective) -> Result<MergeOutcome> {
    if adj.ids() != net.ids() || p.len() != net.node_count() {
        return Err(Error::IdMismatch("partition, adjacency graph and network must cover the same TAZs".into()));
    }
    if obj.k_target == 0 {
        return Err(Error::InvalidParameter("k_target must be >= 1".into()));
    }
    if !(obj.lambda_pop >= 0.0 && obj.lambda_area >= 0.0) {
        return Err(Error::InvalidParameter("balance weights must be >= 0".into()));
    }
    if obj.k_target > p.zone_count() {
        return Err(Error::InvalidParameter(format!(
            "k_target {} exceeds the current zone count {}",
            obj.k_target,
            p.zone_count()
        )));
    }
    let zg = ZoneGraph::new(p, adj, net);
    let components = zg.components();
    if components > obj.k_target {
        return Err(Error::Infeasible { k: obj.k_target, components });
    }
    if obj.exact {
        if p.zone_count() > EXACT_MAX_ZONES {
            return Err(Error::InvalidParameter(format!(
                "exact merge supports at most {EXACT_MAX_ZONES} zones, got {}",
                p.zone_count()
            )));
        }
        return Ok(exact(p, &zg, obj));
    }
    Ok(greedy(p, zg, obj))
}

fn objective(cut: u64, grand: u64, pop: &[f64], area: &[f64], obj: &MergeObjective) -> f64 {
    let stats = |v: &[f64]| cv(v.iter().sum(), v.iter().map(|x| x * x).sum(), v.len());
    let cut_share = if grand == 0 { 0.0 } else { cut as f64 / grand as f64 };
    cut_share + obj.lambda_pop * stats(pop) + obj.lambda_area * stats(area)
}

fn greedy(p: &Partition, mut zg: ZoneGraph, obj: &MergeObjective) -> MergeOutcome {
    let mut label: Vec<usize> = (0..p.zone_count()).collect();
    let mut alive: BTreeSet<usize> = (0..p.zone_count()).collect();
    let sums = |v: &[f64], alive: &BTreeSet<usize>| {
        alive.iter().fold((0.0, 0.0), |(s, q), &z| (s + v[z], q + v[z] * v[z]))
    };
    let (pop_sum, mut pop_sq) = sums(&zg.pop, &alive);
    let (area_sum, mut area_sq) = sums(&zg.area, &alive);
    let grand = zg.grand.max(1) as f64;
    let mut steps = Vec::new();
    while alive.len() > obj.k_target {
        let n = alive.len();
        let pop_cv = cv(pop_sum, pop_sq, n);
        let area_cv = cv(area_sum, area_sq, n);
        let mut best: Option<(f64, usize, usize)> = None;
        for &a in &alive {
            for &b in zg.adjacent[a].range(a + 1..) {
                let merged_sq = |v: &[f64], sq: f64| sq + 2.0 * v[a] * v[b];
                let d_pop = cv(pop_sum, merged_sq(&zg.pop, pop_sq), n - 1) - pop_cv;
                let d_area = cv(area_sum, merged_sq(&zg.area, area_sq), n - 1) - area_cv;
                let score = zg.cross(a, b) as f64 / grand - obj.lambda_pop * d_pop - obj.lambda_area * d_area;
                if best.is_none_or(|(s, _, _)| score > s) {
                    best = Some((score, a, b));
                }
            }
        }
        let Some((score, a, b)) = best else { break };
        pop_sq += 2.0 * zg.pop[a] * zg.pop[b];
        area_sq += 2.0 * zg.area[a] * zg.area[b];
        zg.pop[a] += zg.pop[b];
        zg.area[a] += zg.area[b];
        zg.cut -= zg.cross(a, b);
        zg.cross.remove(&(a, b));
        let moved: Vec<((usize, usize), u64)> =
            zg.cross.iter().filter(|((x, y), _)| *x == b || *y == b).map(|(&k, &v)| (k, v)).collect();
        for ((x, y), w) in moved {
            zg.cross.remove(&(x, y));
            let other = if x == b { y } else { x };
            *zg.cross.entry((a.min(other), a.max(other))).or_insert(0) += w;
        }
        let b_adj = std::mem::take(&mut zg.adjacent[b]);
        for z in b_adj {
            zg.adjacent[z].remove(&b);
            if z != a {
                zg.adjacent[z].insert(a);
                zg.adjacent[a].insert(z);
            }
        }
        zg.adjacent[a].remove(&b);
        alive.remove(&b);
        for l in label.iter_mut() {
            if *l == b {
                *l = a;
            }
        }
        steps.push(MergeStep { into: a, from: b, score, cut_trips_after: zg.cut });
    }
    let pops: Vec<f64> = alive.iter().map(|&z| zg.pop[z]).collect();
    let areas: Vec<f64> = alive.iter().map(|&z| zg.area[z]).collect();
    let objective = objective(zg.cut, zg.grand, &pops, &areas, obj);
    let labels: Vec<usize> = p.assignment().iter().map(|&z| label[z]).collect();
    MergeOutcome { partition: Partition::from_labels(&labels), steps, objective }
}

/// Exhaustive search over partitions of the zones into `k` connected blocks.
fn exact(p: &Partition, zg: &ZoneGraph, obj: &MergeObjective) -> MergeOutcome {
    let m = p.zone_count();
    let nbr: Vec<u32> = (0..m).map(|z| zg.adjacent[z].iter().fold(0u32, |acc, &u| acc | 1 << u)).collect();
    let mut search = Exact { m, nbr, zg, obj, blocks: Vec::new(), best: None };
    search.place((1u32 << m) - 1, 0);
    let (objective, blocks) = search.best.expect("feasibility was checked");
    let mut label = vec![0; m];
    for (b, &mask) in blocks.iter().enumerate() {
        for (z, l) in label.iter_mut().enumerate() {
            if mask & (1 << z) != 0 {
                *l = b;
            }
        }
    }
    let labels: Vec<usize> = p.assignment().iter().map(|&z| label[z]).collect();
    MergeOutcome { partition: Partition::from_labels(&labels), steps: Vec::new(), objective }
}

struct Exact<'a> {
    m: usize,
    nbr: Vec<u32>,
    zg: &'a ZoneGraph,
    obj: &'a MergeObjective,
    blocks: Vec<u32>,
    best: Option<(f64, Vec<u32>)>,
}

impl Exact<'_> {
    fn components(&self, set: u32) -> usize {
        let mut rest = set;
        let mut count = 0;
        while rest != 0 {
            count += 1;
            let mut frontier = rest & rest.wrapping_neg();
            let mut comp = 0;
            while frontier != 0 {
                comp |= frontier;
                let mut next = 0;
                let mut f = frontier;
                while f != 0 {
                    let z = f.trailing_zeros() as usize;
                    next |= self.nbr[z];
                    f &= f - 1;
                }
                frontier = next & set & !comp;
            }
            rest &= !comp;
        }
        count
    }

    /// Directed trips leaving `block`.
    fn boundary(&self, block: u32) -> u64 {
        self.zg
            .cross
            .iter()
            .filter(|((a, b), _)| ((block >> a) & 1) != ((block >> b) & 1))
            .map(|(_, &w)| w)
            .sum()
    }

    fn bound(&self) -> f64 {
        let cut: u64 = self.blocks.iter().map(|&b| self.boundary(b)).sum::<u64>() / 2;
        cut as f64 / self.zg.grand.max(1) as f64
    }

    fn finish(&mut self) {
        let cut: u64 = self.blocks.iter().map(|&b| self.boundary(b)).sum::<u64>() / 2;
        let total = |v: &[f64], b: u32| (0..self.m).filter(|&z| b & (1 << z) != 0).map(|z| v[z]).sum::<f64>();
        let pops: Vec<f64> = self.blocks.iter().map(|&b| total(&self.zg.pop, b)).collect();
        let areas: Vec<f64> = self.blocks.iter().map(|&b| total(&self.zg.area, b)).collect();
        let value = objective(cut, self.zg.grand, &pops, &areas, self.obj);
        if self.best.as_ref().is_none_or(|(v, _)| value < *v) {
            self.best = Some((value, self.blocks.clone()));
        }
    }

    /// Splits `rest` into `k_target - placed` connected blocks.
    fn place(&mut self, rest: u32, placed: usize) {
        let left = self.obj.k_target - placed;
        if left == 1 {
            if self.components(rest) == 1 {
                self.blocks.push(rest);
                self.finish();
                self.blocks.pop();
            }
            return;
        }
        if (rest.count_ones() as usize) < left || self.components(rest) > left {
            return;
        }
        if self.best.as_ref().is_some_and(|(v, _)| self.bound() >= *v) {
            return;
        }
        let root = rest.trailing_zeros() as usize;
        let mut subsets = Vec::new();
        self.connected_sets(1 << root, self.nbr[root] & rest, 0, rest, &mut subsets);
        for s in subsets {
            let remaining = rest & !s;
            if remaining == 0 || self.components(remaining) > left - 1 {
                continue;
            }
            self.blocks.push(s);
            self.place(remaining, placed + 1);
            self.blocks.pop();
        }
    }

    /// Every connected subset of `within` that contains `set`, each once.
    fn connected_sets(&self, set: u32, frontier: u32, excluded: u32, within: u32, out: &mut Vec<u32>) {
        out.push(set);
        let mut f = frontier;
        let mut excluded = excluded;
        while f != 0 {
            let u = f.trailing_zeros() as usize;
            f &= f - 1;
            let grown = set | (1 << u);
            let next_frontier = (f | self.nbr[u]) & within & !grown & !excluded;
            self.connected_sets(grown, next_frontier, excluded, within, out);
            excluded |= 1 << u;
        }
    }
}
