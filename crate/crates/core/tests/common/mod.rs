#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use zonecut::geo::{build_distance_matrix, rect_taz, DistanceMatrix, DistanceOptions, LonLat, Taz, TazId};
use zonecut::ingest::FlowMatrix;
use zonecut::network::{build_network, SpatialNetwork};
use zonecut::partition::Partition;
use zonecut::quality::{MConvention, QualityConfig, QualityKind};

/// Rectangular TAZs on a `rows x cols` lattice of 0.01 degree cells, ids
/// `r * cols + c + 1`.
pub fn grid_tazs(rows: usize, cols: usize) -> Vec<Taz> {
    let mut out = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let (x, y) = (118.0 + c as f64 * 0.01, 32.0 + r as f64 * 0.01);
            let id = (r * cols + c + 1) as u64;
            out.push(rect_taz(id, LonLat::new(x, y), LonLat::new(x + 0.01, y + 0.01), 1.0e6, 100.0, 10.0).unwrap());
        }
    }
    out
}

/// A literal flow case: TAZ layer, directed flows and the matrices built from them.
pub struct Case {
    pub tazs: Vec<Taz>,
    pub flows: FlowMatrix,
    pub dist: DistanceMatrix,
}

impl Case {
    pub fn new(tazs: Vec<Taz>, flows: FlowMatrix) -> Self {
        let dist = build_distance_matrix(&tazs, None, DistanceOptions::default()).unwrap();
        Self { tazs, flows, dist }
    }

    pub fn network(&self, alpha: f64) -> SpatialNetwork {
        build_network(&self.flows, &self.dist, alpha).unwrap().with_attributes(&self.tazs).unwrap()
    }

    pub fn n(&self) -> usize {
        self.tazs.len()
    }

    /// Dense symmetric A from the raw directed flows.
    pub fn dense_a(&self) -> Vec<Vec<f64>> {
        let n = self.n();
        let mut a = vec![vec![0.0; n]; n];
        for ((o, d), t) in self.flows.iter() {
            let i = (o.0 - 1) as usize;
            let j = (d.0 - 1) as usize;
            a[i][j] += t as f64;
            a[j][i] += t as f64;
        }
        a
    }
}

/// Random flows over a `rows x cols` grid: each ordered pair gets a flow with
/// probability `density`, plus a few self-loops.
pub fn random_case(rng: &mut ChaCha8Rng, rows: usize, cols: usize, density: f64) -> Case {
    let tazs = grid_tazs(rows, cols);
    let n = tazs.len() as u64;
    let mut flows = FlowMatrix::new();
    for i in 1..=n {
        for j in 1..=n {
            let p = if i == j { 0.2 } else { density };
            if rng.random::<f64>() < p {
                flows.add(TazId(i), TazId(j), rng.random_range(1..50));
            }
        }
    }
    if flows.total_trips() == 0 {
        flows.add(TazId(1), TazId(n), 1);
    }
    Case::new(tazs, flows)
}

pub fn random_partition(rng: &mut ChaCha8Rng, n: usize) -> Partition {
    let k = rng.random_range(1..=n.min(6));
    let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
    Partition::from_labels(&labels)
}

/// Brute-force quality over all ordered pairs, straight from the definitions.
pub fn oracle_quality(case: &Case, p: &Partition, cfg: &QualityConfig) -> f64 {
    let n = case.n();
    let a = case.dense_a();
    let k: Vec<f64> = a.iter().map(|row| row.iter().sum()).collect();
    let two_m: f64 = k.iter().sum();
    let d = |i: usize, j: usize| case.dist.get(i, j);
    let same = |i: usize, j: usize| p.zone_of(i) == p.zone_of(j);
    match cfg.kind {
        QualityKind::Standard => {
            let mut q = 0.0;
            for i in 0..n {
                for j in 0..n {
                    if same(i, j) {
                        q += a[i][j] - k[i] * k[j] / two_m;
                    }
                }
            }
            q / two_m
        }
        QualityKind::Geographic => {
            let b = |i: usize, j: usize| if cfg.alpha == 0.0 { a[i][j] } else { a[i][j] / d(i, j).powf(cfg.alpha) };
            let w: Vec<f64> = (0..n)
                .map(|i| {
                    let dsum: f64 = (0..n).filter(|&j| a[i][j] > 0.0).map(|j| d(i, j)).sum();
                    if dsum > 0.0 { k[i] / dsum } else { 0.0 }
                })
                .collect();
            let (p_norm, n_norm) = match cfg.m_convention {
                MConvention::RawWeight => (two_m, two_m),
                MConvention::DeflatedWeight => {
                    let total_b: f64 = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| b(i, j)).sum();
                    let total_w: f64 = w.iter().sum();
                    (total_b, total_w * total_w / total_b)
                }
            };
            let mut q = 0.0;
            for i in 0..n {
                for j in 0..n {
                    if same(i, j) {
                        q += b(i, j) - w[i] * w[j] / n_norm;
                    }
                }
            }
            q / p_norm
        }
    }
}

pub fn all_configs() -> [QualityConfig; 3] {
    [
        QualityConfig::standard(),
        QualityConfig::geographic(1.0),
        QualityConfig::geographic(1.0).with_m_convention(MConvention::DeflatedWeight),
    ]
}

/// Connected components of `members` through positive-weight flow edges.
pub fn flow_components(net: &SpatialNetwork, members: &[usize]) -> usize {
    let inside: std::collections::HashSet<usize> = members.iter().copied().collect();
    let mut seen = std::collections::HashSet::new();
    let mut comps = 0;
    for &s in members {
        if !seen.insert(s) {
            continue;
        }
        comps += 1;
        let mut stack = vec![s];
        while let Some(v) = stack.pop() {
            for e in net.edges(v) {
                if inside.contains(&e.target) && seen.insert(e.target) {
                    stack.push(e.target);
                }
            }
        }
    }
    comps
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seeded region growing: `k` random seed cells, then repeatedly a random
/// zone claims a random unassigned neighbor. Contiguous by construction on
/// a connected adjacency graph.
pub fn random_contiguous(r: &mut ChaCha8Rng, adj: &zonecut::geo::AdjacencyGraph, k: usize) -> Partition {
    use rand::seq::IndexedRandom;
    let n = adj.len();
    let mut zone = vec![usize::MAX; n];
    let seeds = rand::seq::index::sample(r, n, k);
    let mut frontier: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (z, s) in seeds.iter().enumerate() {
        zone[s] = z;
        frontier[z].extend(adj.neighbors(s));
    }
    let mut left = n - k;
    while left > 0 {
        let z = r.random_range(0..k);
        frontier[z].retain(|&v| zone[v] == usize::MAX);
        let Some(&v) = frontier[z].choose(r) else { continue };
        zone[v] = z;
        frontier[z].extend(adj.neighbors(v));
        left -= 1;
    }
    Partition::from_labels(&zone)
}

/// A path through all cells plus random mostly-local extra edges.
pub fn random_connected(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> Case {
    let n = (rows * cols) as u64;
    let mut flows = FlowMatrix::new();
    for i in 1..n {
        flows.add(TazId(i), TazId(i + 1), r.random_range(1..5));
    }
    let extra = r.random_range(n..4 * n);
    for _ in 0..extra {
        let a = r.random_range(1..=n);
        let b = if r.random_bool(0.8) { (a + r.random_range(1..4)).min(n) } else { r.random_range(1..=n) };
        flows.add(TazId(a), TazId(b), r.random_range(1..30));
    }
    Case::new(grid_tazs(rows, cols), flows)
}

/// Cells in a row with the given areas in km^2.
pub fn strip_tazs(areas: &[f64]) -> Vec<Taz> {
    areas
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            let x = 118.0 + i as f64 * 0.01;
            rect_taz(i as u64 + 1, LonLat::new(x, 32.0), LonLat::new(x + 0.01, 32.01), a * 1e6, 100.0, 0.0).unwrap()
        })
        .collect()
}

pub fn flows_of(cells: &[(u64, u64, u64)]) -> FlowMatrix {
    let mut m = FlowMatrix::new();
    for &(o, d, t) in cells {
        m.add(TazId(o), TazId(d), t);
    }
    m
}

/// 5x5 grid with unit lattice flows and one heavy 1-25 link. Zone 0 holds
/// the two left columns plus the far corner cell 25, zone 1 the rest.
pub fn metro_fixture() -> (Case, Partition) {
    let mut cells = vec![];
    for i in 1..=25u64 {
        if i % 5 != 0 {
            cells.push((i, i + 1, 10));
        }
        if i <= 20 {
            cells.push((i, i + 5, 10));
        }
    }
    cells.push((1, 25, 500));
    let labels: Vec<usize> = (0..25).map(|i| usize::from(!(i % 5 < 2 || i == 24))).collect();
    (Case::new(grid_tazs(5, 5), flows_of(&cells)), Partition::new(labels).unwrap())
}

/// Strip X = {1,2}, fragment {3}, Y = {4,5} for the repair rules: trips
/// from the fragment go mostly to X (rule 2); none at all (rule 3, with
/// X larger than Y).
pub fn rule_two_fixture() -> (Case, Partition) {
    let case = Case::new(strip_tazs(&[2.0, 2.0, 1.0, 2.0, 2.0]), flows_of(&[(1, 2, 20), (2, 3, 10), (3, 4, 1), (4, 5, 20)]));
    (case, Partition::new(vec![0, 0, 1, 2, 2]).unwrap())
}

pub fn rule_three_fixture() -> (Case, Partition) {
    let case = Case::new(strip_tazs(&[2.0, 3.0, 1.0, 2.0, 2.0]), flows_of(&[(1, 2, 20), (4, 5, 20)]));
    (case, Partition::new(vec![0, 0, 1, 2, 2]).unwrap())
}
