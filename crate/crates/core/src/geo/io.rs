use std::io::{Read, Write};

use ::geo::{Coord, LineString, MultiPolygon, Polygon};
use geojson::{Feature, FeatureCollection, GeoJson, Geometry, JsonObject, Value};
use serde_json::json;

use super::{Taz, TazId};
use crate::error::{Error, Result};

fn ring_from(id: TazId, ring: &[Vec<f64>]) -> Result<LineString<f64>> {
    ring.iter()
        .map(|p| match p.as_slice() {
            [x, y, ..] => Ok(Coord { x: *x, y: *y }),
            _ => Err(Error::InvalidGeometry(id, "position with fewer than 2 coordinates".into())),
        })
        .collect::<Result<Vec<_>>>()
        .map(LineString)
}

fn polygon_from(id: TazId, rings: &[Vec<Vec<f64>>]) -> Result<Polygon<f64>> {
    let mut it = rings.iter();
    let ext = it.next().ok_or_else(|| Error::InvalidGeometry(id, "polygon without rings".into()))?;
    let exterior = ring_from(id, ext)?;
    let interiors = it.map(|r| ring_from(id, r)).collect::<Result<Vec<_>>>()?;
    Ok(Polygon::new(exterior, interiors))
}

fn number(props: &JsonObject, key: &str, feature: usize) -> Result<f64> {
    props
        .get(key)
        .and_then(|v| v.as_f64())
        .ok_or_else(|| Error::InvalidTazLayer(format!("feature #{feature}: missing numeric property `{key}`")))
}

/// Reads a GeoJSON FeatureCollection of TAZ polygons.
///
/// Each feature needs `id`, `population`, `employment` and `area_m2`
/// properties and a Polygon or MultiPolygon geometry. Areas are never
/// recomputed from geometry.
pub fn read_taz_geojson<R: Read>(mut reader: R) -> Result<Vec<Taz>> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    let gj: GeoJson = text.parse()?;
    let fc = match gj {
        GeoJson::FeatureCollection(fc) => fc,
        _ => return Err(Error::InvalidTazLayer("expected a FeatureCollection".into())),
    };
    let mut out = Vec::with_capacity(fc.features.len());
    for (k, f) in fc.features.iter().enumerate() {
        let props = f
            .properties
            .as_ref()
            .ok_or_else(|| Error::InvalidTazLayer(format!("feature #{k}: no properties")))?;
        let raw_id = props
            .get("id")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::InvalidTazLayer(format!("feature #{k}: `id` must be a non-negative integer")))?;
        let id = TazId(raw_id);
        let population = number(props, "population", k)?;
        let employment = number(props, "employment", k)?;
        let area = number(props, "area_m2", k)?;
        let geom = f.geometry.as_ref().ok_or_else(|| Error::InvalidGeometry(id, "missing geometry".into()))?;
        let mp = match &geom.value {
            Value::Polygon(rings) => MultiPolygon(vec![polygon_from(id, rings)?]),
            Value::MultiPolygon(polys) => {
                MultiPolygon(polys.iter().map(|p| polygon_from(id, p)).collect::<Result<_>>()?)
            }
            other => {
                return Err(Error::InvalidGeometry(id, format!("unsupported geometry {}", other.type_name())))
            }
        };
        out.push(Taz::new(id, mp, area, population, employment)?);
    }
    super::sort_tazs(&mut out)?;
    Ok(out)
}

pub(crate) fn multipolygon_value(mp: &MultiPolygon<f64>) -> Value {
    let ring = |ls: &LineString<f64>| ls.0.iter().map(|c| vec![c.x, c.y]).collect::<Vec<_>>();
    let polys: Vec<Vec<Vec<Vec<f64>>>> = mp
        .0
        .iter()
        .map(|p| std::iter::once(ring(p.exterior())).chain(p.interiors().iter().map(ring)).collect())
        .collect();
    if polys.len() == 1 {
        Value::Polygon(polys.into_iter().next().unwrap())
    } else {
        Value::MultiPolygon(polys)
    }
}

/// TAZ layer as a FeatureCollection; `extra` adds properties per TAZ.
pub fn taz_feature_collection(tazs: &[Taz], mut extra: impl FnMut(&Taz, &mut JsonObject)) -> FeatureCollection {
    let features = tazs
        .iter()
        .map(|t| {
            let mut props = JsonObject::new();
            props.insert("id".into(), json!(t.id.0));
            props.insert("population".into(), json!(t.population));
            props.insert("employment".into(), json!(t.employment));
            props.insert("area_m2".into(), json!(t.area_m2));
            extra(t, &mut props);
            Feature {
                bbox: None,
                geometry: Some(Geometry::new(multipolygon_value(&t.polygon))),
                id: None,
                properties: Some(props),
                foreign_members: None,
            }
        })
        .collect();
    FeatureCollection { bbox: None, features, foreign_members: None }
}

pub fn write_taz_geojson<W: Write>(tazs: &[Taz], mut w: W) -> Result<()> {
    let fc = taz_feature_collection(tazs, |_, _| {});
    serde_json::to_writer(&mut w, &fc)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{rect_taz, LonLat};

    #[test]
    fn roundtrip() {
        let tazs = vec![
            rect_taz(7, LonLat::new(0.0, 0.0), LonLat::new(1.0, 1.0), 143_597.0, 5162.0, 836.0).unwrap(),
            rect_taz(2, LonLat::new(1.0, 0.0), LonLat::new(2.0, 1.0), 74_344.0, 344.0, 167.0).unwrap(),
        ];
        let mut buf = Vec::new();
        write_taz_geojson(&tazs, &mut buf).unwrap();
        let back = read_taz_geojson(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].id, TazId(2));
        assert_eq!(back[1].population, 5162.0);
        assert_eq!(back[1].polygon, tazs[0].polygon);
    }

    #[test]
    fn missing_area_is_an_error() {
        let text = r#"{"type":"FeatureCollection","features":[{"type":"Feature","properties":{"id":1,"population":1,"employment":0},
            "geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1],[0,0]]]}}]}"#;
        assert!(matches!(read_taz_geojson(text.as_bytes()), Err(Error::InvalidTazLayer(_))));
    }

    #[test]
    fn point_geometry_is_invalid() {
        let text = r#"{"type":"FeatureCollection","features":[{"type":"Feature","properties":{"id":1,"population":1,"employment":0,"area_m2":5},
            "geometry":{"type":"Point","coordinates":[0,0]}}]}"#;
        assert!(matches!(read_taz_geojson(text.as_bytes()), Err(Error::InvalidGeometry(TazId(1), _))));
    }
}
