use std::io::Write;

use geojson::{Feature, FeatureCollection, Geometry, JsonObject};
use serde_json::json;

use super::ZonePlan;
use crate::error::{Error, Result};
use crate::geo::{multipolygon_value, taz_feature_collection, Taz};

pub fn write_plan_json<W: Write>(plan: &ZonePlan, mut w: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, plan)?;
    w.write_all(b"\n")?;
    Ok(())
}

/// One row per zone plus a `Sum` row whose total is the grand trip total.
pub fn write_plan_csv<W: Write>(plan: &ZonePlan, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["zone", "taz_count", "area_km2", "population", "intra_trips", "total_trips", "cutoff_pct"])?;
    for z in &plan.stats.zones {
        wtr.write_record([
            z.zone.to_string(),
            z.taz_count.to_string(),
            format!("{:.2}", z.area_km2),
            format!("{:.0}", z.population),
            z.intra_trips.to_string(),
            z.total_trips.to_string(),
            format!("{:.1}", z.cutoff_pct),
        ])?;
    }
    let s = &plan.stats;
    wtr.write_record([
        "Sum".to_string(),
        s.zones.iter().map(|z| z.taz_count).sum::<usize>().to_string(),
        format!("{:.2}", s.zones.iter().map(|z| z.area_km2).sum::<f64>()),
        format!("{:.0}", s.zones.iter().map(|z| z.population).sum::<f64>()),
        s.intra_total.to_string(),
        s.grand_total.to_string(),
        format!("{:.1}", s.total_cutoff_pct),
    ])?;
    wtr.flush()?;
    Ok(())
}

/// TAZ features tagged with `zone_id` and `layer = "taz"`, followed by one
/// dissolved outline per zone with `layer = "zone"`.
pub fn plan_feature_collection(plan: &ZonePlan, tazs: &[Taz]) -> Result<FeatureCollection> {
    if tazs.len() != plan.assignment.len() || tazs.iter().zip(&plan.assignment).any(|(t, a)| t.id != a.taz_id) {
        return Err(Error::IdMismatch("TAZ layer does not match the plan".into()));
    }
    let mut fc = taz_feature_collection(tazs, |t, props| {
        let a = plan.assignment.iter().find(|a| a.taz_id == t.id).expect("checked above");
        props.insert("layer".into(), json!("taz"));
        props.insert("zone_id".into(), json!(a.zone_id));
    });
    for z in &plan.stats.zones {
        let polys: Vec<&::geo::Polygon<f64>> = tazs
            .iter()
            .zip(&plan.assignment)
            .filter(|(_, a)| a.zone_id == z.zone)
            .flat_map(|(t, _)| t.polygon.0.iter())
            .collect();
        let outline = ::geo::unary_union(polys);
        let mut props = JsonObject::new();
        props.insert("layer".into(), json!("zone"));
        props.insert("zone_id".into(), json!(z.zone));
        props.insert("area_km2".into(), json!(z.area_km2));
        props.insert("population".into(), json!(z.population));
        props.insert("intra_trips".into(), json!(z.intra_trips));
        props.insert("total_trips".into(), json!(z.total_trips));
        props.insert("cutoff_pct".into(), json!(z.cutoff_pct));
        fc.features.push(Feature {
            bbox: None,
            geometry: Some(Geometry::new(multipolygon_value(&outline))),
            id: None,
            properties: Some(props),
            foreign_members: None,
        });
    }
    Ok(fc)
}

pub fn write_plan_geojson<W: Write>(plan: &ZonePlan, tazs: &[Taz], mut w: W) -> Result<()> {
    serde_json::to_writer(&mut w, &plan_feature_collection(plan, tazs)?)?;
    w.write_all(b"\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{build_distance_matrix, rect_taz, DistanceOptions, LonLat, TazId};
    use crate::ingest::FlowMatrix;
    use crate::network::build_network;
    use crate::partition::Partition;
    use crate::quality::QualityConfig;

    fn plan() -> (ZonePlan, Vec<Taz>) {
        let tazs: Vec<_> = (0..3)
            .map(|i| {
                let x = i as f64 * 0.01;
                rect_taz(i + 1, LonLat::new(x, 0.0), LonLat::new(x + 0.01, 0.01), 1e6, 10.0, 0.0).unwrap()
            })
            .collect();
        let dist = build_distance_matrix(&tazs, None, DistanceOptions::default()).unwrap();
        let mut m = FlowMatrix::new();
        m.add(TazId(1), TazId(2), 3);
        m.add(TazId(2), TazId(3), 1);
        let net = build_network(&m, &dist, 1.0).unwrap().with_attributes(&tazs).unwrap();
        let p = Partition::new(vec![0, 0, 1]).unwrap();
        (ZonePlan::new(&p, &net, &QualityConfig::default()).unwrap(), tazs)
    }

    #[test]
    fn csv_has_sum_row() {
        let (plan, _) = plan();
        let mut buf = Vec::new();
        write_plan_csv(&plan, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "zone,taz_count,area_km2,population,intra_trips,total_trips,cutoff_pct\n\
             0,2,2.00,20,3,4,25.0\n\
             1,1,1.00,10,0,1,100.0\n\
             Sum,3,3.00,30,3,4,25.0\n"
        );
    }

    #[test]
    fn geojson_dissolves_zones() {
        let (plan, tazs) = plan();
        let fc = plan_feature_collection(&plan, &tazs).unwrap();
        assert_eq!(fc.features.len(), 5);
        let outline = &fc.features[3];
        assert_eq!(outline.property("layer").unwrap(), "zone");
        match &outline.geometry.as_ref().unwrap().value {
            geojson::Value::Polygon(rings) => assert_eq!(rings.len(), 1),
            other => panic!("expected one polygon, got {other:?}"),
        }
        assert_eq!(fc.features[2].property("zone_id").unwrap(), 1);
    }
}
