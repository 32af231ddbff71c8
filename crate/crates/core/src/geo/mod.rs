//! TAZ domain types, geometry predicates, centroid distances and the
//! polygon-contiguity graph.

mod adjacency;
mod distance;
mod io;
pub(crate) mod planar;

use std::fmt;

use ::geo::{BoundingRect, Centroid};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use adjacency::{build_adjacency, AdjacencyGraph};
pub(crate) use adjacency::induced_components;
pub(crate) use io::multipolygon_value;
pub use distance::{
    build_distance_matrix, read_distance_csv, DistanceMatrix, DistanceOptions, DistanceSource,
    Intrazonal, UserDistances,
};
pub use io::{read_taz_geojson, taz_feature_collection, write_taz_geojson};

/// Mean Earth radius used by every great-circle computation in the crate.
pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// Identifier of a traffic analysis zone.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct TazId(pub u64);

impl fmt::Display for TazId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl From<u64> for TazId {
    fn from(v: u64) -> Self {
        TazId(v)
    }
}

/// WGS-84 position in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LonLat {
    pub lon: f64,
    pub lat: f64,
}

impl LonLat {
    pub const fn new(lon: f64, lat: f64) -> Self {
        Self { lon, lat }
    }

    pub fn is_finite(&self) -> bool {
        self.lon.is_finite() && self.lat.is_finite()
    }
}

/// Great-circle distance in kilometers (haversine, R = 6371 km).
pub fn haversine_km(a: LonLat, b: LonLat) -> f64 {
    let (lat1, lat2) = (a.lat.to_radians(), b.lat.to_radians());
    let dlat = lat2 - lat1;
    let dlon = (b.lon - a.lon).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// Axis-aligned lon/lat box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub min: LonLat,
    pub max: LonLat,
}

impl BBox {
    pub fn contains(&self, p: LonLat) -> bool {
        p.lon >= self.min.lon && p.lon <= self.max.lon && p.lat >= self.min.lat && p.lat <= self.max.lat
    }

    pub fn union(&self, other: &BBox) -> BBox {
        BBox {
            min: LonLat::new(self.min.lon.min(other.min.lon), self.min.lat.min(other.min.lat)),
            max: LonLat::new(self.max.lon.max(other.max.lon), self.max.lat.max(other.max.lat)),
        }
    }

    /// Grow the box by `km` on every side.
    pub fn buffered_km(&self, km: f64) -> BBox {
        let dlat = (km / EARTH_RADIUS_KM).to_degrees();
        let mid = 0.5 * (self.min.lat + self.max.lat);
        let cos = mid.to_radians().cos().abs().max(1e-6);
        let dlon = dlat / cos;
        BBox {
            min: LonLat::new(self.min.lon - dlon, (self.min.lat - dlat).max(-90.0)),
            max: LonLat::new(self.max.lon + dlon, (self.max.lat + dlat).min(90.0)),
        }
    }
}

/// A traffic analysis zone.
#[derive(Debug, Clone)]
pub struct Taz {
    pub id: TazId,
    pub polygon: ::geo::MultiPolygon<f64>,
    pub centroid: LonLat,
    pub area_m2: f64,
    pub population: f64,
    pub employment: f64,
}

impl Taz {
    /// Validates the geometry and derives the centroid. Rings are closed if needed.
    pub fn new(
        id: TazId,
        polygon: ::geo::MultiPolygon<f64>,
        area_m2: f64,
        population: f64,
        employment: f64,
    ) -> Result<Self> {
        let polygon = planar::validate_polygon(id, polygon)?;
        if !(area_m2.is_finite() && area_m2 > 0.0) {
            return Err(Error::InvalidGeometry(id, format!("area_m2 must be > 0, got {area_m2}")));
        }
        if !(population >= 0.0 && employment >= 0.0) {
            return Err(Error::InvalidGeometry(
                id,
                "population and employment must be non-negative".into(),
            ));
        }
        let c = polygon
            .centroid()
            .ok_or_else(|| Error::InvalidGeometry(id, "empty polygon".into()))?;
        Ok(Self {
            id,
            polygon,
            centroid: LonLat::new(c.x(), c.y()),
            area_m2,
            population,
            employment,
        })
    }

    pub fn bbox(&self) -> BBox {
        // validated polygons are nonempty
        let r = self.polygon.bounding_rect().expect("validated polygon");
        BBox {
            min: LonLat::new(r.min().x, r.min().y),
            max: LonLat::new(r.max().x, r.max().y),
        }
    }

    pub fn area_km2(&self) -> f64 {
        self.area_m2 / 1e6
    }
}

/// Great-circle distance between TAZ centroids, before any flooring.
pub fn centroid_distance(a: &Taz, b: &Taz) -> f64 {
    haversine_km(a.centroid, b.centroid)
}

/// Sorts TAZs by id and rejects duplicates.
pub fn sort_tazs(tazs: &mut [Taz]) -> Result<()> {
    tazs.sort_by_key(|t| t.id);
    for w in tazs.windows(2) {
        if w[0].id == w[1].id {
            return Err(Error::DuplicateTaz(w[0].id));
        }
    }
    Ok(())
}

/// Bounding box of a TAZ layer, `None` when empty.
pub fn layer_bbox(tazs: &[Taz]) -> Option<BBox> {
    tazs.iter().map(Taz::bbox).reduce(|a, b| a.union(&b))
}

/// Builds an axis-aligned rectangular TAZ, mostly useful for fixtures and synthetic cities.
pub fn rect_taz(
    id: u64,
    min: LonLat,
    max: LonLat,
    area_m2: f64,
    population: f64,
    employment: f64,
) -> Result<Taz> {
    let poly = ::geo::Polygon::new(
        ::geo::LineString::from(vec![
            (min.lon, min.lat),
            (max.lon, min.lat),
            (max.lon, max.lat),
            (min.lon, max.lat),
            (min.lon, min.lat),
        ]),
        vec![],
    );
    Taz::new(TazId(id), ::geo::MultiPolygon(vec![poly]), area_m2, population, employment)
}
