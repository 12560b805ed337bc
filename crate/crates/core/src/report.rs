//! Map-ready outputs: region GeoJSON, CSV tables, an SVG choropleth and run metadata.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::geo::{region_geometry, GeoPoint, RegionPolygon};
use crate::io::{self, csv_field};
use crate::metrics::{LocationLevel, RegionScore, YearHistogram};
use crate::sampling::{SamplePlan, Strategy};
use crate::survey_sim::BiasVarianceRow;

pub const SCORES_GEOJSON: &str = "scores.geojson";
pub const POINTS_CSV: &str = "points.csv";
pub const YEARS_CSV: &str = "years.csv";
pub const CHOROPLETH_SVG: &str = "choropleth.svg";
pub const METADATA_JSON: &str = "metadata.json";

const MAP_WIDTH: f64 = 800.0;
const MAP_MARGIN: f64 = 20.0;
const LEGEND_HEIGHT: f64 = 60.0;
const FILL: &str = "#b2182b";

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Fill opacity for each scored region: linear between the lowest and
/// highest mean level, full when they coincide.
pub fn opacities(scores: &[RegionScore]) -> BTreeMap<String, f64> {
    let min = scores.iter().map(|s| s.mean_level).fold(f64::INFINITY, f64::min);
    let max = scores.iter().map(|s| s.mean_level).fold(f64::NEG_INFINITY, f64::max);
    scores
        .iter()
        .map(|s| {
            let o = if max > min { (s.mean_level - min) / (max - min) } else { 1.0 };
            (s.region_id.clone(), o)
        })
        .collect()
}

/// Equirectangular projection of the regions' joint bbox into the map frame.
struct Frame {
    min_lon: f64,
    max_lat: f64,
    scale: f64,
    kx: f64,
    height: f64,
}

impl Frame {
    fn fit(regions: &[&RegionPolygon]) -> Self {
        let mut min_lat = f64::INFINITY;
        let mut max_lat = f64::NEG_INFINITY;
        let mut min_lon = f64::INFINITY;
        let mut max_lon = f64::NEG_INFINITY;
        for r in regions {
            let b = r.bbox();
            min_lat = min_lat.min(b.min_lat);
            max_lat = max_lat.max(b.max_lat);
            min_lon = min_lon.min(b.min_lon);
            max_lon = max_lon.max(b.max_lon);
        }
        if regions.is_empty() {
            (min_lat, max_lat, min_lon, max_lon) = (0.0, 1.0, 0.0, 1.0);
        }
        let kx = (0.5 * (min_lat + max_lat)).to_radians().cos();
        let w = ((max_lon - min_lon) * kx).max(1e-12);
        let h = (max_lat - min_lat).max(1e-12);
        let scale = (MAP_WIDTH - 2.0 * MAP_MARGIN) / w;
        Frame {
            min_lon,
            max_lat,
            scale,
            kx,
            height: h * scale + 2.0 * MAP_MARGIN,
        }
    }

    fn project(&self, p: GeoPoint) -> (f64, f64) {
        (
            MAP_MARGIN + (p.lon() - self.min_lon) * self.kx * self.scale,
            MAP_MARGIN + (self.max_lat - p.lat()) * self.scale,
        )
    }
}

fn ring_path(out: &mut String, frame: &Frame, ring: &[GeoPoint]) {
    for (i, p) in ring.iter().enumerate() {
        let (x, y) = frame.project(*p);
        let _ = write!(out, "{}{x:.2},{y:.2}", if i == 0 { "M" } else { "L" });
    }
    out.push('Z');
}

/// Choropleth of mean levels. Regions are drawn in region id order; regions
/// without a score are hatched.
pub fn emit_choropleth(scores: &[RegionScore], regions: &[RegionPolygon]) -> String {
    let mut sorted: Vec<&RegionPolygon> = regions.iter().collect();
    sorted.sort_by(|a, b| a.region_id.cmp(&b.region_id));
    let frame = Frame::fit(&sorted);
    let opacity = opacities(scores);
    let by_id: BTreeMap<&str, &RegionScore> = scores.iter().map(|s| (s.region_id.as_str(), s)).collect();
    let total_h = frame.height + LEGEND_HEIGHT;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{MAP_WIDTH:.0}" height="{total_h:.0}" viewBox="0 0 {MAP_WIDTH:.0} {total_h:.2}">"#
    );
    svg.push_str(concat!(
        "<defs>\n",
        r##"<pattern id="nodata" patternUnits="userSpaceOnUse" width="8" height="8" patternTransform="rotate(45)">"##,
        r##"<line x1="0" y1="0" x2="0" y2="8" stroke="#888888" stroke-width="2"/></pattern>"##,
        "\n",
        r##"<linearGradient id="scale"><stop offset="0" stop-color="#b2182b" stop-opacity="0"/>"##,
        r##"<stop offset="1" stop-color="#b2182b" stop-opacity="1"/></linearGradient>"##,
        "\n</defs>\n"
    ));
    for r in &sorted {
        let mut d = String::new();
        for part in r.parts() {
            ring_path(&mut d, &frame, &part.exterior);
            for h in &part.holes {
                ring_path(&mut d, &frame, h);
            }
        }
        let id = xml_escape(&r.region_id);
        match (by_id.get(r.region_id.as_str()), opacity.get(&r.region_id)) {
            (Some(s), Some(o)) => {
                let _ = writeln!(
                    svg,
                    r##"<path d="{d}" fill="{FILL}" fill-opacity="{o:.4}" fill-rule="evenodd" stroke="#333333" stroke-width="1"><title>{id}: {} (n={})</title></path>"##,
                    s.mean_level, s.n
                );
            }
            _ => {
                let _ = writeln!(
                    svg,
                    r##"<path d="{d}" fill="url(#nodata)" fill-rule="evenodd" stroke="#333333" stroke-width="1"><title>{id}: no data</title></path>"##
                );
            }
        }
    }
    let min = scores.iter().map(|s| s.mean_level).fold(f64::INFINITY, f64::min);
    let max = scores.iter().map(|s| s.mean_level).fold(f64::NEG_INFINITY, f64::max);
    let y = frame.height + 10.0;
    let _ = writeln!(svg, r#"<g id="legend" font-family="sans-serif" font-size="12">"#);
    if scores.is_empty() {
        let _ = writeln!(svg, r#"<text x="{MAP_MARGIN:.0}" y="{:.2}">no scores</text>"#, y + 14.0);
    } else {
        let _ = writeln!(
            svg,
            r##"<rect x="{MAP_MARGIN:.0}" y="{y:.2}" width="200" height="14" fill="url(#scale)" stroke="#333333"/>"##
        );
        let _ = writeln!(svg, r#"<text x="{MAP_MARGIN:.0}" y="{:.2}">{min}</text>"#, y + 30.0);
        let _ = writeln!(
            svg,
            r#"<text x="{:.0}" y="{:.2}" text-anchor="end">{max}</text>"#,
            MAP_MARGIN + 200.0,
            y + 30.0
        );
    }
    let _ = writeln!(
        svg,
        r##"<rect x="260" y="{y:.2}" width="14" height="14" fill="url(#nodata)" stroke="#333333"/>"##
    );
    let _ = writeln!(svg, r#"<text x="280" y="{:.2}">no data</text>"#, y + 12.0);
    svg.push_str("</g>\n</svg>\n");
    svg
}

/// FeatureCollection with one feature per region in id order. Regions
/// without locations get `n = 0` and a null `mean_level`.
pub fn scores_geojson(scores: &[RegionScore], regions: &[RegionPolygon]) -> Value {
    let by_id: BTreeMap<&str, &RegionScore> = scores.iter().map(|s| (s.region_id.as_str(), s)).collect();
    let mut sorted: Vec<&RegionPolygon> = regions.iter().collect();
    sorted.sort_by(|a, b| a.region_id.cmp(&b.region_id));
    let features: Vec<Value> = sorted
        .iter()
        .map(|r| {
            let (n, mean) = match by_id.get(r.region_id.as_str()) {
                Some(s) => (s.n, json!(s.mean_level)),
                None => (0, Value::Null),
            };
            json!({
                "type": "Feature",
                "properties": {"region_id": r.region_id, "n": n, "mean_level": mean},
                "geometry": region_geometry(r),
            })
        })
        .collect();
    json!({"type": "FeatureCollection", "features": features})
}

/// One row per scored location, in plan order.
pub fn points_csv(plan: &SamplePlan, levels: &[LocationLevel], region_of: &BTreeMap<String, String>) -> String {
    let by_id: BTreeMap<&str, &LocationLevel> = levels.iter().map(|l| (l.point_id.as_str(), l)).collect();
    let mut out = String::from("point_id,lat,lon,region_id,views_counted,level\n");
    for p in &plan.points {
        if let Some(l) = by_id.get(p.point_id.as_str()) {
            let region = region_of.get(&p.point_id).map(String::as_str).unwrap_or("");
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                csv_field(&p.point_id),
                p.location.lat(),
                p.location.lon(),
                csv_field(region),
                l.views_counted,
                l.level
            );
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct RunMetadata {
    pub tool_version: String,
    pub config_hash: String,
    /// File name of the manifest the report was built from.
    pub manifest: String,
    pub manifest_sha256: String,
    pub points_scored: usize,
    pub points_unassigned: usize,
    pub created_at: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportBundle {
    pub geojson: String,
    pub points_csv: String,
    pub years_csv: String,
    pub svg: String,
    pub metadata: RunMetadata,
}

impl ReportBundle {
    #[allow(clippy::too_many_arguments)]
    pub fn assemble(
        regions: &[RegionPolygon],
        scores: &[RegionScore],
        plan: &SamplePlan,
        levels: &[LocationLevel],
        region_of: &BTreeMap<String, String>,
        years: &YearHistogram,
        metadata: RunMetadata,
    ) -> Result<Self> {
        let mut geojson =
            serde_json::to_string_pretty(&scores_geojson(scores, regions)).map_err(|e| Error::json("report geojson", e))?;
        geojson.push('\n');
        Ok(ReportBundle {
            geojson,
            points_csv: points_csv(plan, levels, region_of),
            years_csv: years.to_csv(),
            svg: emit_choropleth(scores, regions),
            metadata,
        })
    }

    /// Writes the five bundle files into `dir`, each atomically.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut meta = serde_json::to_string_pretty(&self.metadata).map_err(|e| Error::json("metadata", e))?;
        meta.push('\n');
        io::write_atomic(&dir.join(SCORES_GEOJSON), self.geojson.as_bytes())?;
        io::write_atomic(&dir.join(POINTS_CSV), self.points_csv.as_bytes())?;
        io::write_atomic(&dir.join(YEARS_CSV), self.years_csv.as_bytes())?;
        io::write_atomic(&dir.join(CHOROPLETH_SVG), self.svg.as_bytes())?;
        io::write_atomic(&dir.join(METADATA_JSON), meta.as_bytes())
    }
}

pub fn timestamp_now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

/// Mean absolute error against the sampling parameter, one panel per strategy.
pub fn error_chart_svg(rows: &[BiasVarianceRow]) -> String {
    const W: f64 = 360.0;
    const H: f64 = 240.0;
    const PAD: f64 = 40.0;
    let panels: Vec<(Strategy, &str, &str)> = [
        (Strategy::Systematic, "systematic", "spacing (m)"),
        (Strategy::Random, "random", "sample size"),
    ]
    .into_iter()
    .filter(|(s, _, _)| rows.iter().any(|r| r.strategy == *s))
    .collect();
    let total_w = W * panels.len().max(1) as f64;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total_w:.0}" height="{H:.0}" font-family="sans-serif" font-size="11">"#
    );
    for (i, (strategy, name, xlabel)) in panels.iter().enumerate() {
        let mut pts: Vec<&BiasVarianceRow> = rows.iter().filter(|r| r.strategy == *strategy).collect();
        pts.sort_by(|a, b| a.param.total_cmp(&b.param));
        let x0 = W * i as f64;
        let (pmin, pmax) = (pts[0].param, pts[pts.len() - 1].param);
        let emax = pts.iter().map(|r| r.mean_abs_error).fold(0.0, f64::max);
        let px = |p: f64| {
            if pmax > pmin {
                x0 + PAD + (p - pmin) / (pmax - pmin) * (W - 2.0 * PAD)
            } else {
                x0 + W / 2.0
            }
        };
        let py = |e: f64| if emax > 0.0 { H - PAD - e / emax * (H - 2.0 * PAD) } else { H - PAD };
        let _ = writeln!(
            svg,
            r##"<g id="{name}"><line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#333333"/><line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#333333"/>"##,
            x0 + PAD,
            H - PAD,
            x0 + W - PAD,
            H - PAD,
            x0 + PAD,
            PAD,
            x0 + PAD,
            H - PAD
        );
        let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}">{name}: mean |error|, max {emax:.4e}</text>"#, x0 + PAD, PAD - 12.0);
        let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{xlabel}</text>"#, x0 + W / 2.0, H - 8.0);
        let line: Vec<String> = pts.iter().map(|r| format!("{:.2},{:.2}", px(r.param), py(r.mean_abs_error))).collect();
        let _ = writeln!(svg, r##"<polyline points="{}" fill="none" stroke="{FILL}" stroke-width="2"/>"##, line.join(" "));
        for r in &pts {
            let _ = writeln!(
                svg,
                r##"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{FILL}"><title>{}: {}</title></circle>"##,
                px(r.param),
                py(r.mean_abs_error),
                r.param,
                r.mean_abs_error
            );
        }
        svg.push_str("</g>\n");
    }
    svg.push_str("</svg>\n");
    svg
}
