//! The undirected spatial interaction network built from directed flows.
//!
//! Conventions:
//! - `A[i][j] = flow(i->j) + flow(j->i)` for `i != j`;
//! - `A[i][i] = 2 * flow(i->i)`, so within-TAZ trips count twice in `k[i]`;
//! - `k[i] = sum_j A[i][j]` and `2m = sum_i k[i]`, which is twice the trip total;
//! - `dsum[i]` is the sum of `d[i][j]` over every `j` with `A[i][j] > 0`,
//!   self-loop included.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geo::{DistanceMatrix, Taz, TazId};
use crate::ingest::FlowMatrix;

/// Per-node attributes carried through aggregation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct NodeAttrs {
    pub population: f64,
    pub area_m2: f64,
}

/// One incident edge as seen from a node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeRef {
    pub target: usize,
    pub weight: u64,
    pub distance_km: f64,
    pub deflated: f64,
}

#[derive(Debug, Clone)]
pub struct SpatialNetwork {
    ids: Vec<TazId>,
    offsets: Vec<usize>,
    targets: Vec<usize>,
    weights: Vec<u64>,
    distances: Vec<f64>,
    deflated: Vec<f64>,
    self_loops: Vec<u64>,
    intrazonal: Vec<f64>,
    self_deflated: Vec<f64>,
    strength: Vec<u64>,
    dist_sum: Vec<f64>,
    alpha: f64,
    attrs: Vec<NodeAttrs>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkSummary {
    pub nodes: usize,
    pub edges: usize,
    pub self_loops: usize,
    pub two_m: u64,
    pub total_trips: u64,
    pub isolated: Vec<TazId>,
}

pub(crate) fn deflate(weight: f64, d: f64, alpha: f64) -> f64 {
    if alpha == 0.0 {
        weight
    } else {
        weight / d.powf(alpha)
    }
}

/// Symmetrizes `flows` over the node set of `dist` (every TAZ becomes a
/// node, isolated or not) and caches distance-deflated weights for `alpha`.
pub fn build_network(flows: &FlowMatrix, dist: &DistanceMatrix, alpha: f64) -> Result<SpatialNetwork> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!("alpha must be >= 0, got {alpha}")));
    }
    let n = dist.len();
    let mut pairs: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let mut self_loops = vec![0u64; n];
    for ((o, d), t) in flows.iter() {
        let (Some(i), Some(j)) = (dist.index_of(o), dist.index_of(d)) else {
            return Err(Error::MissingDistance(o, d));
        };
        if i == j {
            self_loops[i] += 2 * t;
        } else {
            *pairs.entry((i.min(j), i.max(j))).or_insert(0) += t;
        }
    }
    let edges: Vec<(usize, usize, u64, f64)> = pairs.into_iter().map(|((i, j), w)| (i, j, w, dist.get(i, j))).collect();
    let intrazonal = (0..n).map(|i| dist.get(i, i)).collect();
    Ok(SpatialNetwork::from_undirected(
        dist.ids().to_vec(),
        &edges,
        self_loops,
        intrazonal,
        vec![NodeAttrs::default(); n],
        alpha,
    ))
}

impl SpatialNetwork {
    /// `edges` holds each undirected pair once as `(i, j, A_ij, d_ij)` with `i != j`.
    pub(crate) fn from_undirected(
        ids: Vec<TazId>,
        edges: &[(usize, usize, u64, f64)],
        self_loops: Vec<u64>,
        intrazonal: Vec<f64>,
        attrs: Vec<NodeAttrs>,
        alpha: f64,
    ) -> Self {
        let n = ids.len();
        let mut adj: Vec<Vec<(usize, u64, f64)>> = vec![Vec::new(); n];
        for &(i, j, w, d) in edges {
            debug_assert!(i != j);
            if w == 0 {
                continue;
            }
            adj[i].push((j, w, d));
            adj[j].push((i, w, d));
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        let m2 = adj.iter().map(Vec::len).sum();
        let (mut targets, mut weights, mut distances, mut deflated) =
            (Vec::with_capacity(m2), Vec::with_capacity(m2), Vec::with_capacity(m2), Vec::with_capacity(m2));
        let mut strength = vec![0u64; n];
        let mut dist_sum = vec![0.0; n];
        for (i, mut list) in adj.into_iter().enumerate() {
            list.sort_by_key(|e| e.0);
            for (j, w, d) in list {
                targets.push(j);
                weights.push(w);
                distances.push(d);
                deflated.push(deflate(w as f64, d, alpha));
                strength[i] += w;
                dist_sum[i] += d;
            }
            strength[i] += self_loops[i];
            if self_loops[i] > 0 {
                dist_sum[i] += intrazonal[i];
            }
            offsets.push(targets.len());
        }
        let self_deflated = self_loops.iter().zip(&intrazonal).map(|(&w, &d)| deflate(w as f64, d, alpha)).collect();
        Self {
            ids,
            offsets,
            targets,
            weights,
            distances,
            deflated,
            self_loops,
            intrazonal,
            self_deflated,
            strength,
            dist_sum,
            alpha,
            attrs,
        }
    }

    /// Copies population and area from the TAZ layer (matched by id).
    pub fn with_attributes(mut self, tazs: &[Taz]) -> Result<Self> {
        for t in tazs {
            if let Some(i) = self.index_of(t.id) {
                self.attrs[i] = NodeAttrs { population: t.population, area_m2: t.area_m2 };
            } else {
                return Err(Error::IdMismatch(format!("TAZ {} is not a network node", t.id)));
            }
        }
        Ok(self)
    }

    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn ids(&self) -> &[TazId] {
        &self.ids
    }

    pub fn index_of(&self, id: TazId) -> Option<usize> {
        self.ids.binary_search(&id).ok()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Off-diagonal incident edges of `i`, sorted by target.
    pub fn edges(&self, i: usize) -> impl Iterator<Item = EdgeRef> + '_ {
        (self.offsets[i]..self.offsets[i + 1]).map(move |e| EdgeRef {
            target: self.targets[e],
            weight: self.weights[e],
            distance_km: self.distances[e],
            deflated: self.deflated[e],
        })
    }

    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    /// `A[i][j]`, including the diagonal.
    pub fn weight(&self, i: usize, j: usize) -> u64 {
        if i == j {
            return self.self_loops[i];
        }
        let range = self.offsets[i]..self.offsets[i + 1];
        match self.targets[range.clone()].binary_search(&j) {
            Ok(k) => self.weights[range.start + k],
            Err(_) => 0,
        }
    }

    pub fn self_loop(&self, i: usize) -> u64 {
        self.self_loops[i]
    }

    pub fn self_loop_deflated(&self, i: usize) -> f64 {
        self.self_deflated[i]
    }

    pub fn intrazonal_km(&self, i: usize) -> f64 {
        self.intrazonal[i]
    }

    pub fn strength(&self, i: usize) -> u64 {
        self.strength[i]
    }

    pub fn dist_sum(&self, i: usize) -> f64 {
        self.dist_sum[i]
    }

    /// `w[i] = k[i] / dsum[i]`, zero for isolated nodes.
    pub fn null_strength(&self, i: usize) -> f64 {
        if self.strength[i] == 0 {
            0.0
        } else {
            self.strength[i] as f64 / self.dist_sum[i]
        }
    }

    pub fn two_m(&self) -> u64 {
        self.strength.iter().sum()
    }

    /// Trips represented by the network (`2m / 2`).
    pub fn total_trips(&self) -> u64 {
        self.two_m() / 2
    }

    pub fn is_isolated(&self, i: usize) -> bool {
        self.strength[i] == 0
    }

    pub fn attrs(&self, i: usize) -> NodeAttrs {
        self.attrs[i]
    }

    /// Directed trips from `i` to `j` implied by the symmetric weights, summed
    /// over both directions; for `i == j` the within-TAZ trips.
    pub fn undirected_trips(&self, i: usize, j: usize) -> u64 {
        if i == j {
            self.self_loops[i] / 2
        } else {
            self.weight(i, j)
        }
    }

    pub fn summary(&self) -> NetworkSummary {
        NetworkSummary {
            nodes: self.node_count(),
            edges: self.targets.len() / 2,
            self_loops: self.self_loops.iter().filter(|&&w| w > 0).count(),
            two_m: self.two_m(),
            total_trips: self.total_trips(),
            isolated: (0..self.node_count()).filter(|&i| self.is_isolated(i)).map(|i| self.ids[i]).collect(),
        }
    }

    /// Writes `i,j,weight,distance_km` for the upper triangle plus diagonal.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["i", "j", "weight", "distance_km"])?;
        for i in 0..self.node_count() {
            let mut row = |j: usize, weight: u64, d: f64| {
                wtr.write_record([self.ids[i].to_string(), self.ids[j].to_string(), weight.to_string(), format!("{d}")])
            };
            if self.self_loops[i] > 0 {
                row(i, self.self_loops[i], self.intrazonal[i])?;
            }
            for e in self.edges(i).filter(|e| e.target > i) {
                row(e.target, e.weight, e.distance_km)?;
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Convenience summary wrapper.
pub fn network_summary(net: &SpatialNetwork) -> NetworkSummary {
    net.summary()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{build_distance_matrix, rect_taz, DistanceOptions, LonLat};

    fn tazs(n: u64) -> Vec<Taz> {
        (1..=n)
            .map(|i| {
                let x = i as f64 * 0.01;
                rect_taz(i, LonLat::new(x, 0.0), LonLat::new(x + 0.01, 0.01), 1e6, 100.0, 0.0).unwrap()
            })
            .collect()
    }

    fn net(flows: &[(u64, u64, u64)], n: u64, alpha: f64) -> SpatialNetwork {
        let t = tazs(n);
        let dist = build_distance_matrix(&t, None, DistanceOptions::default()).unwrap();
        let mut m = FlowMatrix::new();
        for &(o, d, c) in flows {
            m.add(TazId(o), TazId(d), c);
        }
        build_network(&m, &dist, alpha).unwrap().with_attributes(&t).unwrap()
    }

    #[test]
    fn symmetrization() {
        let g = net(&[(1, 2, 14), (2, 1, 6)], 2, 1.0);
        assert_eq!(g.weight(0, 1), 20);
        assert_eq!(g.weight(1, 0), 20);
        assert_eq!(g.strength(0), 20);
        assert_eq!(g.strength(1), 20);
        assert_eq!(g.two_m(), 40);
        let s = g.summary();
        assert_eq!((s.nodes, s.edges, s.two_m), (2, 1, 40));
    }

    #[test]
    fn self_loop_counts_twice() {
        let g = net(&[(1, 1, 5)], 1, 1.0);
        assert_eq!(g.self_loop(0), 10);
        assert_eq!(g.strength(0), 10);
        assert_eq!(g.total_trips(), 5);
    }

    #[test]
    fn alpha_zero_disables_deflation() {
        let g = net(&[(1, 2, 14), (2, 3, 3), (3, 3, 2)], 3, 0.0);
        for i in 0..3 {
            for e in g.edges(i) {
                assert_eq!(e.deflated, e.weight as f64);
            }
            assert_eq!(g.self_loop_deflated(i), g.self_loop(i) as f64);
        }
    }

    #[test]
    fn deflated_weight_divides_by_distance() {
        let g = net(&[(1, 3, 10)], 3, 1.0);
        let e = g.edges(0).next().unwrap();
        assert!((e.deflated - 10.0 / e.distance_km).abs() < 1e-12);
        assert_eq!(g.dist_sum(0), e.distance_km);
    }

    #[test]
    fn isolated_nodes_flagged() {
        let g = net(&[(1, 2, 1)], 3, 1.0);
        assert_eq!(g.summary().isolated, vec![TazId(3)]);
        assert_eq!(g.null_strength(2), 0.0);
    }

    #[test]
    fn empty_network() {
        let g = net(&[], 0, 1.0);
        let s = g.summary();
        assert_eq!((s.nodes, s.edges, s.two_m), (0, 0, 0));
    }

    #[test]
    fn unknown_flow_id_is_missing_distance() {
        let t = tazs(2);
        let dist = build_distance_matrix(&t, None, DistanceOptions::default()).unwrap();
        let mut m = FlowMatrix::new();
        m.add(TazId(1), TazId(9), 1);
        assert!(matches!(build_network(&m, &dist, 1.0), Err(Error::MissingDistance(TazId(1), TazId(9)))));
    }

    #[test]
    fn dump_is_upper_triangle() {
        let g = net(&[(1, 2, 14), (2, 1, 6), (2, 2, 1)], 2, 1.0);
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "i,j,weight,distance_km");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("1,2,20,"));
        assert!(lines[2].starts_with("2,2,2,"));
    }
}
