use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};

use super::{haversine_km, LonLat, Taz, TazId};
use crate::error::{Error, Result};

/// How `d[i][i]` is filled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule", content = "km")]
pub enum Intrazonal {
    /// `0.5 * sqrt(area / pi)`, half the radius of the equal-area circle.
    HalfEquivalentRadius,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceOptions {
    pub floor_km: f64,
    pub intrazonal: Intrazonal,
}

impl Default for DistanceOptions {
    fn default() -> Self {
        Self { floor_km: 0.05, intrazonal: Intrazonal::HalfEquivalentRadius }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceSource {
    ComputedCentroid,
    UserSupplied,
}

/// Unordered user-supplied distances in km, as read from `origin_id,dest_id,km`.
#[derive(Debug, Clone, Default)]
pub struct UserDistances {
    entries: BTreeMap<(TazId, TazId), f64>,
}

impl UserDistances {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records one directed entry. Both directions of a pair may be given;
    /// they must then agree within 1e-6.
    pub fn insert(&mut self, a: TazId, b: TazId, km: f64) -> Result<()> {
        if a == b {
            return Ok(());
        }
        let key = (a.min(b), a.max(b));
        if let Some(&prev) = self.entries.get(&key) {
            if (prev - km).abs() > 1e-6 {
                return Err(Error::AsymmetricMatrix(a, b, prev, km));
            }
            self.entries.insert(key, 0.5 * (prev + km));
        } else {
            self.entries.insert(key, km);
        }
        Ok(())
    }

    fn get(&self, a: TazId, b: TazId) -> Option<f64> {
        self.entries.get(&(a.min(b), a.max(b))).copied()
    }
}

#[derive(Deserialize)]
struct DistRow {
    origin_id: u64,
    dest_id: u64,
    km: f64,
}

/// Reads a `origin_id,dest_id,km` CSV.
pub fn read_distance_csv<R: Read>(reader: R) -> Result<UserDistances> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let expected = ["origin_id", "dest_id", "km"];
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::HeaderMismatch {
            expected: expected.join(","),
            found: headers.iter().collect::<Vec<_>>().join(","),
        });
    }
    let mut out = UserDistances::new();
    for (line, row) in rdr.deserialize::<DistRow>().enumerate() {
        let row = row.map_err(|e| Error::Malformed { line: line as u64 + 2, reason: e.to_string() })?;
        if !(row.km.is_finite() && row.km >= 0.0) {
            return Err(Error::Malformed { line: line as u64 + 2, reason: format!("bad distance {}", row.km) });
        }
        out.insert(TazId(row.origin_id), TazId(row.dest_id), row.km)?;
    }
    Ok(out)
}

#[derive(Debug, Clone)]
enum Storage {
    Centroid(Vec<LonLat>),
    Dense(Vec<f64>),
}

/// Symmetric TAZ-to-TAZ distances in km, indexed in ascending id order.
///
/// Off-diagonal entries are floored at `floor_km`; the diagonal holds the
/// intrazonal distance (also floored).
#[derive(Debug, Clone)]
pub struct DistanceMatrix {
    ids: Vec<TazId>,
    source: DistanceSource,
    diagonal: Vec<f64>,
    floor_km: f64,
    storage: Storage,
}

impl DistanceMatrix {
    pub fn ids(&self) -> &[TazId] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn source(&self) -> DistanceSource {
        self.source
    }

    pub fn index_of(&self, id: TazId) -> Option<usize> {
        self.ids.binary_search(&id).ok()
    }

    /// Distance by index.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.diagonal[i];
        }
        let raw = match &self.storage {
            Storage::Centroid(c) => {
                // fixed argument order keeps d[i][j] == d[j][i] bit-for-bit
                let (a, b) = if i < j { (i, j) } else { (j, i) };
                haversine_km(c[a], c[b])
            }
            Storage::Dense(d) => d[i * self.ids.len() + j],
        };
        raw.max(self.floor_km)
    }

    pub fn get_by_id(&self, a: TazId, b: TazId) -> Option<f64> {
        Some(self.get(self.index_of(a)?, self.index_of(b)?))
    }
}

fn intrazonal_km(t: &Taz, rule: Intrazonal) -> f64 {
    match rule {
        Intrazonal::HalfEquivalentRadius => 0.5 * (t.area_m2 / std::f64::consts::PI).sqrt() / 1000.0,
        Intrazonal::Fixed(km) => km,
    }
}

/// Builds the distance matrix from centroids, or from a user matrix that must
/// cover every unordered pair.
pub fn build_distance_matrix(
    tazs: &[Taz],
    user: Option<&UserDistances>,
    opts: DistanceOptions,
) -> Result<DistanceMatrix> {
    if !(opts.floor_km >= 0.0 && opts.floor_km.is_finite()) {
        return Err(Error::InvalidParameter(format!("distance floor must be >= 0, got {}", opts.floor_km)));
    }
    let mut order: Vec<&Taz> = tazs.iter().collect();
    order.sort_by_key(|t| t.id);
    for w in order.windows(2) {
        if w[0].id == w[1].id {
            return Err(Error::DuplicateTaz(w[0].id));
        }
    }
    let ids: Vec<TazId> = order.iter().map(|t| t.id).collect();
    let diagonal: Vec<f64> = order.iter().map(|t| intrazonal_km(t, opts.intrazonal).max(opts.floor_km)).collect();
    let (source, storage) = match user {
        None => (DistanceSource::ComputedCentroid, Storage::Centroid(order.iter().map(|t| t.centroid).collect())),
        Some(u) => {
            let n = ids.len();
            let mut dense = vec![0.0; n * n];
            for i in 0..n {
                for j in i + 1..n {
                    let d = u.get(ids[i], ids[j]).ok_or(Error::IncompleteMatrix(ids[i], ids[j]))?;
                    dense[i * n + j] = d;
                    dense[j * n + i] = d;
                }
            }
            (DistanceSource::UserSupplied, Storage::Dense(dense))
        }
    };
    Ok(DistanceMatrix { ids, source, diagonal, floor_km: opts.floor_km, storage })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::rect_taz;
    use approx::assert_abs_diff_eq;

    fn two() -> Vec<Taz> {
        vec![
            rect_taz(2, LonLat::new(118.0, 33.0 - 0.001), LonLat::new(118.002, 33.001), 143_597.0, 0.0, 0.0).unwrap(),
            rect_taz(1, LonLat::new(117.999, 31.999), LonLat::new(118.001, 32.001), 143_597.0, 0.0, 0.0).unwrap(),
        ]
    }

    #[test]
    fn centroid_matrix_matches_haversine() {
        let tazs = two();
        let m = build_distance_matrix(&tazs, None, DistanceOptions::default()).unwrap();
        assert_eq!(m.ids(), &[TazId(1), TazId(2)]);
        let expected = haversine_km(tazs[1].centroid, tazs[0].centroid);
        assert_eq!(m.get(0, 1), expected);
        assert_eq!(m.get(1, 0), expected);
        assert_eq!(m.source(), DistanceSource::ComputedCentroid);
    }

    #[test]
    fn intrazonal_half_radius() {
        let m = build_distance_matrix(&two(), None, DistanceOptions::default()).unwrap();
        // 0.5 * sqrt(143597 / pi) m
        assert_abs_diff_eq!(m.get(0, 0), 0.1069, epsilon = 1e-3);
    }

    #[test]
    fn floor_applies() {
        let a = rect_taz(1, LonLat::new(0.0, 0.0), LonLat::new(0.001, 0.001), 10.0, 0.0, 0.0).unwrap();
        let b = rect_taz(2, LonLat::new(0.0, 0.0), LonLat::new(0.001, 0.001), 10.0, 0.0, 0.0).unwrap();
        let m = build_distance_matrix(&[a, b], None, DistanceOptions::default()).unwrap();
        assert_eq!(m.get(0, 1), 0.05);
        assert_eq!(m.get(0, 0), 0.05);
    }

    #[test]
    fn user_matrix_passthrough() {
        let mut u = UserDistances::new();
        u.insert(TazId(1), TazId(2), 1.3).unwrap();
        u.insert(TazId(2), TazId(1), 1.3).unwrap();
        let m = build_distance_matrix(&two(), Some(&u), DistanceOptions::default()).unwrap();
        assert_eq!(m.get(0, 1), 1.3);
        assert_eq!(m.source(), DistanceSource::UserSupplied);
        assert_abs_diff_eq!(m.get(1, 1), 0.1069, epsilon = 1e-3);
    }

    #[test]
    fn user_matrix_errors() {
        let u = UserDistances::new();
        assert!(matches!(
            build_distance_matrix(&two(), Some(&u), DistanceOptions::default()),
            Err(Error::IncompleteMatrix(TazId(1), TazId(2)))
        ));
        let mut u = UserDistances::new();
        u.insert(TazId(1), TazId(2), 1.3).unwrap();
        assert!(matches!(u.insert(TazId(2), TazId(1), 1.4), Err(Error::AsymmetricMatrix(..))));
    }

    #[test]
    fn csv_reader() {
        let csv = "origin_id,dest_id,km\n1,2,1.3\n2,1,1.3\n";
        let u = read_distance_csv(csv.as_bytes()).unwrap();
        assert_eq!(u.get(TazId(2), TazId(1)), Some(1.3));
        let bad = "a,b,c\n";
        assert!(matches!(read_distance_csv(bad.as_bytes()), Err(Error::HeaderMismatch { .. })));
    }
}
