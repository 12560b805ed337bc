//! Systematic and random sample plans over a district with a hole.

use tagmap::geo::{haversine_m, regions_from_geojson, GeoPoint};
use tagmap::sampling::{build_plan, GridSpec};

const DISTRICT: &str = r#"{
  "type": "Feature",
  "properties": {"name": "Se"},
  "geometry": {"type": "Polygon", "coordinates": [
    [[-46.640, -23.555], [-46.628, -23.555], [-46.628, -23.545], [-46.640, -23.545], [-46.640, -23.555]],
    [[-46.636, -23.552], [-46.632, -23.552], [-46.632, -23.548], [-46.636, -23.548], [-46.636, -23.552]]
  ]}
}"#;

pub fn run() -> tagmap::Result<()> {
    let value: serde_json::Value = serde_json::from_str(DISTRICT).expect("embedded GeoJSON");
    let region = regions_from_geojson(&value, "district")?.remove(0);

    let grid = build_plan(&region, &GridSpec::systematic(102.0))?;
    let first = grid.points[0].location;
    let east = grid.points[1].location;
    println!(
        "systematic: {} points in {}, neighbor gap {:.1} m",
        grid.points.len(),
        grid.region_id,
        haversine_m(first, east)
    );

    let shifted = GridSpec::systematic(102.0).with_anchor(GeoPoint::new(-23.5545, -46.6395)?);
    println!("anchored:   {} points", build_plan(&region, &shifted)?.points.len());

    let random = build_plan(&region, &GridSpec::random(250, 7))?;
    println!("random:     {} points, first {}", random.points.len(), random.points[0].point_id);

    let dir = tempfile::tempdir().map_err(|e| tagmap::Error::Format(e.to_string()))?;
    let path = dir.path().join("plan.jsonl");
    grid.write_jsonl(&path)?;
    let header = std::fs::read_to_string(&path).unwrap_or_default();
    println!("plan header: {}", header.lines().next().unwrap_or(""));
    Ok(())
}

#[allow(dead_code)]
fn main() -> tagmap::Result<()> {
    run()
}
