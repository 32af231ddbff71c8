use std::collections::BTreeSet;

use super::planar::{boundary_segments, segment_dist2, LocalProjection, Segment};
use super::{Taz, TazId};
use crate::error::{Error, Result};

/// Queen-contiguity graph over a TAZ layer.
///
/// Nodes are held in ascending id order; `neighbors(i)` lists indices into
/// that order, sorted and without self-edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjacencyGraph {
    ids: Vec<TazId>,
    neighbors: Vec<Vec<usize>>,
}

impl AdjacencyGraph {
    /// Builds the graph from explicit id pairs. Self pairs are rejected.
    pub fn from_edges(ids: impl IntoIterator<Item = TazId>, edges: &[(TazId, TazId)]) -> Result<Self> {
        let set: BTreeSet<TazId> = ids.into_iter().collect();
        let ids: Vec<TazId> = set.into_iter().collect();
        let mut neighbors = vec![BTreeSet::new(); ids.len()];
        for &(a, b) in edges {
            if a == b {
                return Err(Error::InvalidParameter(format!("self adjacency on {a}")));
            }
            let ia = ids.binary_search(&a).map_err(|_| Error::IdMismatch(format!("unknown TAZ {a}")))?;
            let ib = ids.binary_search(&b).map_err(|_| Error::IdMismatch(format!("unknown TAZ {b}")))?;
            neighbors[ia].insert(ib);
            neighbors[ib].insert(ia);
        }
        Ok(Self {
            ids,
            neighbors: neighbors.into_iter().map(|s| s.into_iter().collect()).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[TazId] {
        &self.ids
    }

    pub fn index_of(&self, id: TazId) -> Option<usize> {
        self.ids.binary_search(&id).ok()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn are_adjacent(&self, a: TazId, b: TazId) -> bool {
        match (self.index_of(a), self.index_of(b)) {
            (Some(i), Some(j)) => self.neighbors[i].binary_search(&j).is_ok(),
            _ => false,
        }
    }

    /// Unordered edges as index pairs `(i, j)` with `i < j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.neighbors
            .iter()
            .enumerate()
            .flat_map(|(i, ns)| ns.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
    }

    pub fn edge_count(&self) -> usize {
        self.edges().count()
    }

    /// Connected components of the subgraph induced by `members` (node indices).
    pub fn components_within(&self, members: &[usize]) -> Vec<Vec<usize>> {
        induced_components(members, |v| self.neighbors[v].iter().copied())
    }
}

/// Connected components of the subgraph induced by `members`, each sorted,
/// ordered by smallest member.
pub(crate) fn induced_components<I>(members: &[usize], mut nbrs: impl FnMut(usize) -> I) -> Vec<Vec<usize>>
where
    I: Iterator<Item = usize>,
{
    let mut sorted = members.to_vec();
    sorted.sort_unstable();
    let inside = |v: usize| sorted.binary_search(&v).is_ok();
    let mut seen = vec![false; sorted.len()];
    let mut out = Vec::new();
    for start in 0..sorted.len() {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut comp = vec![sorted[start]];
        let mut stack = vec![sorted[start]];
        while let Some(v) = stack.pop() {
            for u in nbrs(v) {
                if inside(u) {
                    let k = sorted.binary_search(&u).unwrap();
                    if !seen[k] {
                        seen[k] = true;
                        comp.push(u);
                        stack.push(u);
                    }
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

struct Outline {
    segments: Vec<Segment>,
    min: [f64; 2],
    max: [f64; 2],
}

fn boxes_near(a: &Outline, b: &Outline, tol: f64) -> bool {
    a.min[0] <= b.max[0] + tol && b.min[0] <= a.max[0] + tol && a.min[1] <= b.max[1] + tol && b.min[1] <= a.max[1] + tol
}

fn seg_near_box(s: &Segment, o: &Outline, tol: f64) -> bool {
    let (x0, x1) = (s[0][0].min(s[1][0]), s[0][0].max(s[1][0]));
    let (y0, y1) = (s[0][1].min(s[1][1]), s[0][1].max(s[1][1]));
    x0 <= o.max[0] + tol && o.min[0] <= x1 + tol && y0 <= o.max[1] + tol && o.min[1] <= y1 + tol
}

fn touches(a: &Outline, b: &Outline, tol: f64) -> bool {
    let tol2 = tol * tol;
    let bs: Vec<&Segment> = b.segments.iter().filter(|s| seg_near_box(s, a, tol)).collect();
    a.segments
        .iter()
        .filter(|s| seg_near_box(s, b, tol))
        .any(|s| bs.iter().any(|t| segment_dist2(s, t) <= tol2))
}

/// Queen contiguity: two TAZs are adjacent when their boundaries come within
/// `snap_tol_m` meters of each other (any shared point at tolerance 0).
pub fn build_adjacency(tazs: &[Taz], snap_tol_m: f64) -> Result<AdjacencyGraph> {
    if !(snap_tol_m >= 0.0 && snap_tol_m.is_finite()) {
        return Err(Error::InvalidParameter(format!("snap tolerance must be >= 0, got {snap_tol_m}")));
    }
    let mut order: Vec<usize> = (0..tazs.len()).collect();
    order.sort_by_key(|&i| tazs[i].id);
    let ids: Vec<TazId> = order.iter().map(|&i| tazs[i].id).collect();
    for w in ids.windows(2) {
        if w[0] == w[1] {
            return Err(Error::DuplicateTaz(w[0]));
        }
    }
    if tazs.is_empty() {
        return Ok(AdjacencyGraph { ids, neighbors: Vec::new() });
    }
    let ref_lat = tazs.iter().map(|t| t.centroid.lat).sum::<f64>() / tazs.len() as f64;
    let proj = LocalProjection::new(ref_lat);
    let outlines: Vec<Outline> = order
        .iter()
        .map(|&i| {
            let segments = boundary_segments(&tazs[i].polygon, &proj);
            let mut min = [f64::INFINITY; 2];
            let mut max = [f64::NEG_INFINITY; 2];
            for s in &segments {
                for p in s {
                    for k in 0..2 {
                        min[k] = min[k].min(p[k]);
                        max[k] = max[k].max(p[k]);
                    }
                }
            }
            Outline { segments, min, max }
        })
        .collect();

    let mut sweep: Vec<usize> = (0..outlines.len()).collect();
    sweep.sort_by(|&a, &b| outlines[a].min[0].total_cmp(&outlines[b].min[0]).then(a.cmp(&b)));
    let mut neighbors = vec![Vec::new(); outlines.len()];
    for (pos, &i) in sweep.iter().enumerate() {
        for &j in &sweep[pos + 1..] {
            if outlines[j].min[0] > outlines[i].max[0] + snap_tol_m {
                break;
            }
            if boxes_near(&outlines[i], &outlines[j], snap_tol_m) && touches(&outlines[i], &outlines[j], snap_tol_m) {
                neighbors[i].push(j);
                neighbors[j].push(i);
            }
        }
    }
    for ns in &mut neighbors {
        ns.sort_unstable();
    }
    Ok(AdjacencyGraph { ids, neighbors })
}
