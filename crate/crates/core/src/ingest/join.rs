use super::trips::{Mode, TripRecord};
use crate::geo::planar::contains_point;
use crate::geo::{BBox, LonLat, Taz, TazId};

/// Uniform-grid index over TAZ bounding boxes for point lookup.
pub struct TazIndex<'a> {
    tazs: Vec<&'a Taz>,
    bounds: Option<BBox>,
    nx: usize,
    ny: usize,
    cells: Vec<Vec<u32>>,
}

impl<'a> TazIndex<'a> {
    pub fn new(tazs: &'a [Taz]) -> Self {
        let mut sorted: Vec<&Taz> = tazs.iter().collect();
        sorted.sort_by_key(|t| t.id);
        let bounds = crate::geo::layer_bbox(tazs);
        let Some(b) = bounds else {
            return Self { tazs: sorted, bounds, nx: 0, ny: 0, cells: Vec::new() };
        };
        let side = ((sorted.len() as f64).sqrt().ceil() as usize).clamp(1, 1024);
        let (nx, ny) = (side, side);
        let mut cells = vec![Vec::new(); nx * ny];
        let idx = Self::cell_fn(b, nx, ny);
        for (k, t) in sorted.iter().enumerate() {
            let tb = t.bbox();
            let (x0, y0) = idx(tb.min);
            let (x1, y1) = idx(tb.max);
            for y in y0..=y1 {
                for x in x0..=x1 {
                    cells[y * nx + x].push(k as u32);
                }
            }
        }
        Self { tazs: sorted, bounds, nx, ny, cells }
    }

    fn cell_fn(b: BBox, nx: usize, ny: usize) -> impl Fn(LonLat) -> (usize, usize) {
        let w = (b.max.lon - b.min.lon).max(1e-12);
        let h = (b.max.lat - b.min.lat).max(1e-12);
        move |p: LonLat| {
            let fx = ((p.lon - b.min.lon) / w * nx as f64).floor();
            let fy = ((p.lat - b.min.lat) / h * ny as f64).floor();
            ((fx.max(0.0) as usize).min(nx - 1), (fy.max(0.0) as usize).min(ny - 1))
        }
    }

    pub fn bounds(&self) -> Option<BBox> {
        self.bounds
    }

    /// TAZ containing `p`; boundary points go to the lowest id.
    pub fn locate(&self, p: LonLat) -> Option<TazId> {
        let b = self.bounds?;
        if !b.contains(p) {
            return None;
        }
        let (x, y) = Self::cell_fn(b, self.nx, self.ny)(p);
        // cell lists are in ascending id order
        self.cells[y * self.nx + x]
            .iter()
            .map(|&k| self.tazs[k as usize])
            .find(|t| t.bbox().contains(p) && contains_point(&t.polygon, p))
            .map(|t| t.id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JoinedTrip {
    pub mode: Mode,
    pub origin: TazId,
    pub dest: TazId,
}

#[derive(Debug, Clone, Default)]
pub struct JoinOutcome {
    pub trips: Vec<JoinedTrip>,
    pub unmatched: u64,
}

/// Assigns both endpoints of every trip to a TAZ. Trips with an endpoint
/// outside every TAZ are dropped and counted.
pub fn spatial_join(records: &[TripRecord], index: &TazIndex<'_>) -> JoinOutcome {
    let mut out = JoinOutcome { trips: Vec::with_capacity(records.len()), unmatched: 0 };
    for r in records {
        match (index.locate(r.origin), index.locate(r.dest)) {
            (Some(o), Some(d)) => out.trips.push(JoinedTrip { mode: r.mode, origin: o, dest: d }),
            _ => out.unmatched += 1,
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::rect_taz;

    fn layer() -> Vec<Taz> {
        vec![
            rect_taz(2, LonLat::new(1.0, 0.0), LonLat::new(2.0, 1.0), 1e6, 0.0, 0.0).unwrap(),
            rect_taz(1, LonLat::new(0.0, 0.0), LonLat::new(1.0, 1.0), 1e6, 0.0, 0.0).unwrap(),
            rect_taz(3, LonLat::new(0.0, 1.0), LonLat::new(2.0, 2.0), 1e6, 0.0, 0.0).unwrap(),
        ]
    }

    #[test]
    fn centroid_lands_in_its_taz() {
        let tazs = layer();
        let idx = TazIndex::new(&tazs);
        for t in &tazs {
            assert_eq!(idx.locate(t.centroid), Some(t.id));
        }
    }

    #[test]
    fn shared_boundary_goes_to_lowest_id() {
        let tazs = layer();
        let idx = TazIndex::new(&tazs);
        assert_eq!(idx.locate(LonLat::new(1.0, 0.5)), Some(TazId(1)));
        assert_eq!(idx.locate(LonLat::new(1.5, 1.0)), Some(TazId(2)));
        assert_eq!(idx.locate(LonLat::new(1.0, 1.0)), Some(TazId(1)));
    }

    #[test]
    fn sea_point_is_unmatched() {
        let tazs = layer();
        let idx = TazIndex::new(&tazs);
        assert_eq!(idx.locate(LonLat::new(5.0, 5.0)), None);
        let date = chrono::NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        let t0 = date.and_hms_opt(8, 0, 0).unwrap();
        let rec = TripRecord {
            mode: Mode::Bus,
            user_id: "x".into(),
            date,
            origin_time: t0,
            dest_time: t0,
            origin: LonLat::new(0.5, 0.5),
            dest: LonLat::new(5.0, 5.0),
        };
        let out = spatial_join(&[rec], &idx);
        assert_eq!(out.unmatched, 1);
        assert!(out.trips.is_empty());
    }
}
