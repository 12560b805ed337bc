//! Geodetic primitives on a mean-radius sphere.
//!
//! Coordinates are WGS84 degrees. Distances use the haversine formula and
//! grid steps use a local equirectangular approximation, which is accurate
//! to well under a percent at the ~100 m scales the survey grid works at.
//! Polygon tests run in the plain lat/lon plane.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Length of one degree of latitude (and of longitude at the equator).
pub const METERS_PER_DEGREE: f64 = PI * EARTH_RADIUS_M / 180.0;

/// Points closer than this to a ring edge count as lying on it.
pub const BOUNDARY_EPS_DEG: f64 = 1e-9;

const POLE_LIMIT_DEG: f64 = 89.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPoint", into = "RawPoint")]
pub struct GeoPoint {
    lat_deg: f64,
    lon_deg: f64,
}

#[derive(Serialize, Deserialize)]
struct RawPoint {
    lat: f64,
    lon: f64,
}

impl TryFrom<RawPoint> for GeoPoint {
    type Error = Error;

    fn try_from(raw: RawPoint) -> Result<Self> {
        GeoPoint::new(raw.lat, raw.lon)
    }
}

impl From<GeoPoint> for RawPoint {
    fn from(p: GeoPoint) -> Self {
        RawPoint {
            lat: p.lat_deg,
            lon: p.lon_deg,
        }
    }
}

impl GeoPoint {
    /// Builds a point, normalizing a longitude of exactly 180° to -180°.
    pub fn new(lat_deg: f64, lon_deg: f64) -> Result<Self> {
        if !lat_deg.is_finite() || !lon_deg.is_finite() {
            return Err(Error::InvalidCoordinate(format!(
                "non-finite coordinate ({lat_deg}, {lon_deg})"
            )));
        }
        if !(-90.0..=90.0).contains(&lat_deg) {
            return Err(Error::InvalidCoordinate(format!(
                "latitude {lat_deg} outside [-90, 90]"
            )));
        }
        if !(-180.0..=180.0).contains(&lon_deg) {
            return Err(Error::InvalidCoordinate(format!(
                "longitude {lon_deg} outside [-180, 180)"
            )));
        }
        let lon_deg = if lon_deg == 180.0 { -180.0 } else { lon_deg };
        Ok(GeoPoint { lat_deg, lon_deg })
    }

    pub fn lat(&self) -> f64 {
        self.lat_deg
    }

    pub fn lon(&self) -> f64 {
        self.lon_deg
    }
}

/// Great-circle distance in meters on the mean Earth sphere.
pub fn haversine_m(a: GeoPoint, b: GeoPoint) -> f64 {
    let phi1 = a.lat_deg.to_radians();
    let phi2 = b.lat_deg.to_radians();
    let dphi = (b.lat_deg - a.lat_deg).to_radians();
    let dlambda = (b.lon_deg - a.lon_deg).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// Degree increments that correspond to `spacing_m` meters north and east of `at`.
pub fn local_degree_steps(at: GeoPoint, spacing_m: f64) -> Result<(f64, f64)> {
    if at.lat_deg.abs() >= POLE_LIMIT_DEG {
        return Err(Error::PoleProximity { lat_deg: at.lat_deg });
    }
    if !spacing_m.is_finite() || spacing_m <= 0.0 {
        return Err(Error::InvalidSpacing(spacing_m));
    }
    let dlat = spacing_m / METERS_PER_DEGREE;
    let dlon = dlat / at.lat_deg.to_radians().cos();
    Ok((dlat, dlon))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min_lat: f64,
    pub max_lat: f64,
    pub min_lon: f64,
    pub max_lon: f64,
}

impl BoundingBox {
    pub fn mid_lat(&self) -> f64 {
        0.5 * (self.min_lat + self.max_lat)
    }

    pub fn min_corner(&self) -> GeoPoint {
        GeoPoint {
            lat_deg: self.min_lat,
            lon_deg: self.min_lon,
        }
    }

    pub fn contains(&self, p: GeoPoint) -> bool {
        p.lat_deg >= self.min_lat - BOUNDARY_EPS_DEG
            && p.lat_deg <= self.max_lat + BOUNDARY_EPS_DEG
            && p.lon_deg >= self.min_lon - BOUNDARY_EPS_DEG
            && p.lon_deg <= self.max_lon + BOUNDARY_EPS_DEG
    }
}

/// One outer ring plus its holes. Rings are stored closed.
#[derive(Debug, Clone, PartialEq)]
pub struct PolygonPart {
    pub exterior: Vec<GeoPoint>,
    pub holes: Vec<Vec<GeoPoint>>,
}

/// A survey region. Most regions have a single part; districts loaded from
/// GeoJSON MultiPolygons keep every part.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionPolygon {
    pub region_id: String,
    parts: Vec<PolygonPart>,
    bbox: BoundingBox,
}

impl RegionPolygon {
    pub fn new(
        region_id: impl Into<String>,
        exterior: Vec<GeoPoint>,
        holes: Vec<Vec<GeoPoint>>,
    ) -> Result<Self> {
        Self::from_parts(region_id, vec![(exterior, holes)])
    }

    pub fn from_parts(
        region_id: impl Into<String>,
        parts: Vec<(Vec<GeoPoint>, Vec<Vec<GeoPoint>>)>,
    ) -> Result<Self> {
        let region_id = region_id.into();
        if parts.is_empty() {
            return Err(Error::InvalidPolygon(format!("{region_id}: no rings")));
        }
        let mut built = Vec::with_capacity(parts.len());
        for (exterior, holes) in parts {
            let exterior = normalize_ring(exterior, &region_id)?;
            if ring_self_intersects(&exterior) {
                return Err(Error::InvalidPolygon(format!(
                    "{region_id}: exterior ring self-intersects"
                )));
            }
            let holes = holes
                .into_iter()
                .map(|h| normalize_ring(h, &region_id))
                .collect::<Result<Vec<_>>>()?;
            built.push(PolygonPart { exterior, holes });
        }
        let bbox = bbox_of(built.iter().flat_map(|p| p.exterior.iter()));
        Ok(RegionPolygon {
            region_id,
            parts: built,
            bbox,
        })
    }

    /// Builds an axis-aligned rectangle region from two opposite corners.
    pub fn rectangle(region_id: impl Into<String>, min: GeoPoint, max: GeoPoint) -> Result<Self> {
        let ring = vec![
            min,
            GeoPoint::new(min.lat_deg, max.lon_deg)?,
            max,
            GeoPoint::new(max.lat_deg, min.lon_deg)?,
        ];
        Self::new(region_id, ring, Vec::new())
    }

    /// Joins several regions into one multi-part region, e.g. a city made of districts.
    pub fn merge(region_id: impl Into<String>, regions: &[RegionPolygon]) -> Result<Self> {
        let parts: Vec<PolygonPart> = regions.iter().flat_map(|r| r.parts.clone()).collect();
        if parts.is_empty() {
            return Err(Error::InvalidPolygon("nothing to merge".into()));
        }
        let bbox = bbox_of(parts.iter().flat_map(|p| p.exterior.iter()));
        Ok(RegionPolygon {
            region_id: region_id.into(),
            parts,
            bbox,
        })
    }

    pub fn parts(&self) -> &[PolygonPart] {
        &self.parts
    }

    /// Exterior ring of the first part.
    pub fn exterior(&self) -> &[GeoPoint] {
        &self.parts[0].exterior
    }

    pub fn bbox(&self) -> BoundingBox {
        self.bbox
    }
}

fn bbox_of<'a>(points: impl Iterator<Item = &'a GeoPoint>) -> BoundingBox {
    let mut bb = BoundingBox {
        min_lat: f64::INFINITY,
        max_lat: f64::NEG_INFINITY,
        min_lon: f64::INFINITY,
        max_lon: f64::NEG_INFINITY,
    };
    for p in points {
        bb.min_lat = bb.min_lat.min(p.lat_deg);
        bb.max_lat = bb.max_lat.max(p.lat_deg);
        bb.min_lon = bb.min_lon.min(p.lon_deg);
        bb.max_lon = bb.max_lon.max(p.lon_deg);
    }
    bb
}

/// Drops repeated consecutive vertices, closes the ring and checks it spans an area.
fn normalize_ring(ring: Vec<GeoPoint>, region_id: &str) -> Result<Vec<GeoPoint>> {
    let mut out: Vec<GeoPoint> = Vec::with_capacity(ring.len() + 1);
    for p in ring {
        if out.last() != Some(&p) {
            out.push(p);
        }
    }
    if out.len() > 1 && out.first() == out.last() {
        out.pop();
    }
    if out.len() < 3 {
        return Err(Error::InvalidPolygon(format!(
            "{region_id}: ring needs at least 3 distinct vertices"
        )));
    }
    for w in out.windows(2).chain(std::iter::once(&[out[out.len() - 1], out[0]][..])) {
        if (w[1].lon_deg - w[0].lon_deg).abs() > 180.0 {
            return Err(Error::AntimeridianCrossing);
        }
    }
    out.push(out[0]);
    if ring_signed_area_deg2(&out).abs() < 1e-20 {
        return Err(Error::InvalidPolygon(format!("{region_id}: ring has zero area")));
    }
    Ok(out)
}

/// Shoelace area of a closed ring in squared degrees (lon as x, lat as y).
fn ring_signed_area_deg2(ring: &[GeoPoint]) -> f64 {
    ring.windows(2)
        .map(|w| w[0].lon_deg * w[1].lat_deg - w[1].lon_deg * w[0].lat_deg)
        .sum::<f64>()
        / 2.0
}

fn orient(a: GeoPoint, b: GeoPoint, c: GeoPoint) -> f64 {
    (b.lon_deg - a.lon_deg) * (c.lat_deg - a.lat_deg)
        - (b.lat_deg - a.lat_deg) * (c.lon_deg - a.lon_deg)
}

fn within_box(a: GeoPoint, b: GeoPoint, p: GeoPoint) -> bool {
    p.lon_deg >= a.lon_deg.min(b.lon_deg)
        && p.lon_deg <= a.lon_deg.max(b.lon_deg)
        && p.lat_deg >= a.lat_deg.min(b.lat_deg)
        && p.lat_deg <= a.lat_deg.max(b.lat_deg)
}

fn segments_intersect(a: GeoPoint, b: GeoPoint, c: GeoPoint, d: GeoPoint) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && within_box(c, d, a))
        || (d2 == 0.0 && within_box(c, d, b))
        || (d3 == 0.0 && within_box(a, b, c))
        || (d4 == 0.0 && within_box(a, b, d))
}

fn ring_self_intersects(ring: &[GeoPoint]) -> bool {
    let n = ring.len() - 1;
    for i in 0..n {
        for j in (i + 1)..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            if segments_intersect(ring[i], ring[i + 1], ring[j], ring[j + 1]) {
                return true;
            }
        }
    }
    false
}

fn on_segment(p: GeoPoint, a: GeoPoint, b: GeoPoint) -> bool {
    let (px, py) = (p.lon_deg - a.lon_deg, p.lat_deg - a.lat_deg);
    let (dx, dy) = (b.lon_deg - a.lon_deg, b.lat_deg - a.lat_deg);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        ((px * dx + py * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (ex, ey) = (px - t * dx, py - t * dy);
    ex * ex + ey * ey <= BOUNDARY_EPS_DEG * BOUNDARY_EPS_DEG
}

fn on_ring_boundary(p: GeoPoint, ring: &[GeoPoint]) -> bool {
    ring.windows(2).any(|w| on_segment(p, w[0], w[1]))
}

/// Even-odd crossing test, ignoring the boundary.
fn ring_crossings_odd(p: GeoPoint, ring: &[GeoPoint]) -> bool {
    let mut inside = false;
    for w in ring.windows(2) {
        let (a, b) = (w[0], w[1]);
        if (a.lat_deg > p.lat_deg) != (b.lat_deg > p.lat_deg) {
            let x = a.lon_deg
                + (p.lat_deg - a.lat_deg) * (b.lon_deg - a.lon_deg) / (b.lat_deg - a.lat_deg);
            if p.lon_deg < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// Ray-casting containment test; points on any ring's boundary are inside.
pub fn point_in_polygon(p: GeoPoint, poly: &RegionPolygon) -> bool {
    if !poly.bbox.contains(p) {
        return false;
    }
    poly.parts.iter().any(|part| {
        if on_ring_boundary(p, &part.exterior) || part.holes.iter().any(|h| on_ring_boundary(p, h)) {
            return true;
        }
        ring_crossings_odd(p, &part.exterior) && !part.holes.iter().any(|h| ring_crossings_odd(p, h))
    })
}

/// True when `p` lies on any ring of `poly`, within [`BOUNDARY_EPS_DEG`].
pub fn on_region_boundary(p: GeoPoint, poly: &RegionPolygon) -> bool {
    poly.bbox.contains(p)
        && poly.parts.iter().any(|part| {
            on_ring_boundary(p, &part.exterior) || part.holes.iter().any(|h| on_ring_boundary(p, h))
        })
}

/// Reads every Polygon/MultiPolygon in a GeoJSON file (geometry, Feature or
/// FeatureCollection) as a region.
pub fn load_regions(path: &Path) -> Result<Vec<RegionPolygon>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: Value =
        serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
    let fallback = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "region".into());
    regions_from_geojson(&value, &fallback)
}

pub fn regions_from_geojson(value: &Value, fallback_id: &str) -> Result<Vec<RegionPolygon>> {
    let kind = value.get("type").and_then(Value::as_str).unwrap_or_default();
    match kind {
        "FeatureCollection" => {
            let features = value
                .get("features")
                .and_then(Value::as_array)
                .ok_or_else(|| Error::Format("FeatureCollection without features".into()))?;
            let single = features.len() == 1;
            features
                .iter()
                .enumerate()
                .map(|(i, f)| {
                    let id = if single {
                        fallback_id.to_string()
                    } else {
                        format!("{fallback_id}-{i}")
                    };
                    feature_region(f, &id)
                })
                .collect()
        }
        "Feature" => Ok(vec![feature_region(value, fallback_id)?]),
        "Polygon" | "MultiPolygon" => Ok(vec![geometry_region(value, fallback_id.to_string())?]),
        other => Err(Error::Format(format!("unsupported GeoJSON type {other:?}"))),
    }
}

fn feature_region(feature: &Value, fallback_id: &str) -> Result<RegionPolygon> {
    let props = feature.get("properties");
    let id = ["region_id", "id", "name"]
        .iter()
        .find_map(|k| props.and_then(|p| p.get(*k)).and_then(value_to_id))
        .or_else(|| feature.get("id").and_then(value_to_id))
        .unwrap_or_else(|| fallback_id.to_string());
    let geometry = feature
        .get("geometry")
        .ok_or_else(|| Error::Format(format!("feature {id} has no geometry")))?;
    geometry_region(geometry, id)
}

fn value_to_id(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn geometry_region(geometry: &Value, id: String) -> Result<RegionPolygon> {
    let kind = geometry.get("type").and_then(Value::as_str).unwrap_or_default();
    let coords = geometry
        .get("coordinates")
        .ok_or_else(|| Error::Format(format!("{id}: geometry without coordinates")))?;
    let polygons: Vec<&Value> = match kind {
        "Polygon" => vec![coords],
        "MultiPolygon" => coords
            .as_array()
            .ok_or_else(|| Error::Format(format!("{id}: malformed MultiPolygon")))?
            .iter()
            .collect(),
        other => {
            return Err(Error::Format(format!(
                "{id}: geometry type {other:?} is not a polygon"
            )))
        }
    };
    let mut parts = Vec::with_capacity(polygons.len());
    for poly in polygons {
        let rings = poly
            .as_array()
            .ok_or_else(|| Error::Format(format!("{id}: malformed polygon")))?;
        let mut rings = rings.iter().map(|r| parse_ring(r, &id));
        let exterior = rings
            .next()
            .ok_or_else(|| Error::Format(format!("{id}: polygon without rings")))??;
        let holes = rings.collect::<Result<Vec<_>>>()?;
        parts.push((exterior, holes));
    }
    RegionPolygon::from_parts(id, parts)
}

fn parse_ring(ring: &Value, id: &str) -> Result<Vec<GeoPoint>> {
    let positions = ring
        .as_array()
        .ok_or_else(|| Error::Format(format!("{id}: malformed ring")))?;
    positions
        .iter()
        .map(|pos| {
            let lon = pos.get(0).and_then(Value::as_f64);
            let lat = pos.get(1).and_then(Value::as_f64);
            match (lon, lat) {
                (Some(lon), Some(lat)) => GeoPoint::new(lat, lon),
                _ => Err(Error::Format(format!("{id}: malformed position {pos}"))),
            }
        })
        .collect()
}

/// GeoJSON geometry of a region, in (lon, lat) order.
pub fn region_geometry(region: &RegionPolygon) -> Value {
    let ring_json = |ring: &[GeoPoint]| -> Value {
        Value::Array(
            ring.iter()
                .map(|p| serde_json::json!([p.lon_deg, p.lat_deg]))
                .collect(),
        )
    };
    let polys: Vec<Value> = region
        .parts
        .iter()
        .map(|part| {
            let mut rings = vec![ring_json(&part.exterior)];
            rings.extend(part.holes.iter().map(|h| ring_json(h)));
            Value::Array(rings)
        })
        .collect();
    if polys.len() == 1 {
        serde_json::json!({"type": "Polygon", "coordinates": polys[0]})
    } else {
        serde_json::json!({"type": "MultiPolygon", "coordinates": polys})
    }
}
