//! Small planar predicates over lon/lat rings.

use ::geo::{Area, Coord, LineString, MultiPolygon, Polygon};

use super::{LonLat, TazId, EARTH_RADIUS_KM};
use crate::error::{Error, Result};

fn close_ring(ring: &LineString<f64>) -> LineString<f64> {
    let mut pts = ring.0.clone();
    if let (Some(first), Some(last)) = (pts.first().copied(), pts.last().copied()) {
        if first != last {
            pts.push(first);
        }
    }
    LineString(pts)
}

fn ring_ok(ring: &LineString<f64>) -> bool {
    if ring.0.iter().any(|c| !(c.x.is_finite() && c.y.is_finite())) {
        return false;
    }
    let mut distinct: Vec<Coord<f64>> = ring.0.clone();
    distinct.dedup();
    distinct.len() >= 4
}

pub(crate) fn validate_polygon(id: TazId, mp: MultiPolygon<f64>) -> Result<MultiPolygon<f64>> {
    if mp.0.is_empty() {
        return Err(Error::InvalidGeometry(id, "no polygon parts".into()));
    }
    let mut parts = Vec::with_capacity(mp.0.len());
    for poly in mp.0 {
        let exterior = close_ring(poly.exterior());
        let interiors: Vec<_> = poly.interiors().iter().map(close_ring).collect();
        if !ring_ok(&exterior) || !interiors.iter().all(ring_ok) {
            return Err(Error::InvalidGeometry(id, "ring has fewer than 3 distinct vertices".into()));
        }
        let p = Polygon::new(exterior, interiors);
        if !(p.unsigned_area() > 0.0) {
            return Err(Error::InvalidGeometry(id, "polygon has zero area".into()));
        }
        parts.push(p);
    }
    Ok(MultiPolygon(parts))
}

fn on_segment(p: LonLat, a: Coord<f64>, b: Coord<f64>) -> bool {
    let eps = 1e-12;
    let cross = (b.x - a.x) * (p.lat - a.y) - (b.y - a.y) * (p.lon - a.x);
    let scale = (b.x - a.x).abs().max((b.y - a.y).abs()).max(1e-300);
    if cross.abs() > eps * scale.max(1.0) {
        return false;
    }
    p.lon >= a.x.min(b.x) - eps
        && p.lon <= a.x.max(b.x) + eps
        && p.lat >= a.y.min(b.y) - eps
        && p.lat <= a.y.max(b.y) + eps
}

enum RingHit {
    Inside,
    Boundary,
    Outside,
}

fn ring_test(p: LonLat, ring: &LineString<f64>) -> RingHit {
    let pts = &ring.0;
    let mut inside = false;
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if on_segment(p, a, b) {
            return RingHit::Boundary;
        }
        if (a.y > p.lat) != (b.y > p.lat) {
            let x = a.x + (p.lat - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.lon < x {
                inside = !inside;
            }
        }
    }
    if inside {
        RingHit::Inside
    } else {
        RingHit::Outside
    }
}

/// Point-in-polygon with the boundary counted as inside.
pub(crate) fn contains_point(mp: &MultiPolygon<f64>, p: LonLat) -> bool {
    mp.0.iter().any(|poly| match ring_test(p, poly.exterior()) {
        RingHit::Outside => false,
        RingHit::Boundary => true,
        RingHit::Inside => poly
            .interiors()
            .iter()
            .all(|hole| !matches!(ring_test(p, hole), RingHit::Inside)),
    })
}

/// Equirectangular projection to meters around a reference latitude.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LocalProjection {
    lat0_cos: f64,
    m_per_deg: f64,
}

impl LocalProjection {
    pub(crate) fn new(ref_lat: f64) -> Self {
        Self {
            lat0_cos: ref_lat.to_radians().cos(),
            m_per_deg: EARTH_RADIUS_KM * 1000.0 * std::f64::consts::PI / 180.0,
        }
    }

    pub(crate) fn project(&self, c: Coord<f64>) -> [f64; 2] {
        [c.x * self.lat0_cos * self.m_per_deg, c.y * self.m_per_deg]
    }
}

pub(crate) type Segment = [[f64; 2]; 2];

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn point_segment_dist2(p: [f64; 2], s: &Segment) -> f64 {
    let d = sub(s[1], s[0]);
    let len2 = dot(d, d);
    let t = if len2 > 0.0 { (dot(sub(p, s[0]), d) / len2).clamp(0.0, 1.0) } else { 0.0 };
    let q = [s[0][0] + t * d[0], s[0][1] + t * d[1]];
    let e = sub(p, q);
    dot(e, e)
}

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn segments_cross(s: &Segment, t: &Segment) -> bool {
    let d1 = orient(t[0], t[1], s[0]);
    let d2 = orient(t[0], t[1], s[1]);
    let d3 = orient(s[0], s[1], t[0]);
    let d4 = orient(s[0], s[1], t[1]);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

/// Squared minimum distance between two segments.
pub(crate) fn segment_dist2(s: &Segment, t: &Segment) -> f64 {
    if segments_cross(s, t) {
        return 0.0;
    }
    point_segment_dist2(s[0], t)
        .min(point_segment_dist2(s[1], t))
        .min(point_segment_dist2(t[0], s))
        .min(point_segment_dist2(t[1], s))
}

/// All ring segments of a multipolygon in projected meters.
pub(crate) fn boundary_segments(mp: &MultiPolygon<f64>, proj: &LocalProjection) -> Vec<Segment> {
    let mut out = Vec::new();
    for poly in &mp.0 {
        for ring in std::iter::once(poly.exterior()).chain(poly.interiors()) {
            for w in ring.0.windows(2) {
                out.push([proj.project(w[0]), proj.project(w[1])]);
            }
        }
    }
    out
}
