//! Vector features in lon/lat, their projected planar form, and GeoJSON I/O.

use std::collections::BTreeMap;
use std::path::Path;

use serde_json::{json, Map, Value};

use super::projection::Projection;
use crate::error::{Error, Result};

pub type Coord = [f64; 2];

/// Geometry in lon/lat degrees (or meters, for [`PlanarGeometry`]).
#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    /// Exterior ring followed by holes; rings are closed.
    Polygon(Vec<Vec<Coord>>),
    Polyline(Vec<Coord>),
    Point(Coord),
    Multi(Vec<Geometry>),
}

/// Geometry with coordinates in projected meters.
pub type PlanarGeometry = Geometry;

#[derive(Debug, Clone, PartialEq)]
pub struct VectorFeature {
    pub geometry: Geometry,
    pub properties: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanarFeature {
    pub geometry: PlanarGeometry,
    pub properties: BTreeMap<String, String>,
}

impl Geometry {
    /// Closes rings and drops repeated vertices; rejects degenerate parts.
    pub fn cleaned(self) -> Result<Geometry> {
        Ok(match self {
            Geometry::Polygon(rings) => {
                let mut out = Vec::with_capacity(rings.len());
                for ring in rings {
                    let mut r: Vec<Coord> = Vec::with_capacity(ring.len() + 1);
                    for p in ring {
                        if r.last() != Some(&p) {
                            r.push(p);
                        }
                    }
                    if r.first() != r.last() {
                        r.push(r[0]);
                    }
                    if r.len() < 4 {
                        return Err(Error::Geometry("polygon ring needs three distinct vertices".into()));
                    }
                    out.push(r);
                }
                if out.is_empty() {
                    return Err(Error::Geometry("polygon without rings".into()));
                }
                Geometry::Polygon(out)
            }
            Geometry::Polyline(coords) => {
                if coords.is_empty() {
                    return Err(Error::Geometry("empty polyline".into()));
                }
                Geometry::Polyline(coords)
            }
            Geometry::Multi(parts) => Geometry::Multi(
                parts
                    .into_iter()
                    .map(Geometry::cleaned)
                    .collect::<Result<Vec<_>>>()?,
            ),
            g @ Geometry::Point(_) => g,
        })
    }

    pub fn coords(&self) -> Vec<Coord> {
        let mut out = Vec::new();
        self.visit_coords(&mut |c| out.push(c));
        out
    }

    fn visit_coords(&self, f: &mut impl FnMut(Coord)) {
        match self {
            Geometry::Polygon(rings) => rings.iter().flatten().for_each(|&c| f(c)),
            Geometry::Polyline(cs) => cs.iter().for_each(|&c| f(c)),
            Geometry::Point(c) => f(*c),
            Geometry::Multi(parts) => parts.iter().for_each(|p| p.visit_coords(f)),
        }
    }

    pub fn try_map_coords(&self, f: &impl Fn(Coord) -> Result<Coord>) -> Result<Geometry> {
        Ok(match self {
            Geometry::Polygon(rings) => Geometry::Polygon(
                rings
                    .iter()
                    .map(|r| r.iter().map(|&c| f(c)).collect::<Result<Vec<_>>>())
                    .collect::<Result<Vec<_>>>()?,
            ),
            Geometry::Polyline(cs) => Geometry::Polyline(cs.iter().map(|&c| f(c)).collect::<Result<_>>()?),
            Geometry::Point(c) => Geometry::Point(f(*c)?),
            Geometry::Multi(parts) => Geometry::Multi(
                parts
                    .iter()
                    .map(|p| p.try_map_coords(f))
                    .collect::<Result<Vec<_>>>()?,
            ),
        })
    }

    /// Bounding box `(min_x, min_y, max_x, max_y)`.
    pub fn bbox(&self) -> Option<(f64, f64, f64, f64)> {
        let mut bb: Option<(f64, f64, f64, f64)> = None;
        self.visit_coords(&mut |[x, y]| {
            bb = Some(match bb {
                None => (x, y, x, y),
                Some((a, b, c, d)) => (a.min(x), b.min(y), c.max(x), d.max(y)),
            })
        });
        bb
    }

    /// Signed-area-weighted centroid of the polygonal parts (planar).
    /// Falls back to the vertex mean for non-areal geometry.
    pub fn centroid(&self) -> Option<Coord> {
        let (mut a, mut cx, mut cy) = (0.0, 0.0, 0.0);
        self.accumulate_area(&mut a, &mut cx, &mut cy);
        if a.abs() > 0.0 {
            return Some([cx / (6.0 * a), cy / (6.0 * a)]);
        }
        let cs = self.coords();
        if cs.is_empty() {
            return None;
        }
        let n = cs.len() as f64;
        Some([
            cs.iter().map(|c| c[0]).sum::<f64>() / n,
            cs.iter().map(|c| c[1]).sum::<f64>() / n,
        ])
    }

    /// Planar area of polygonal parts (holes subtracted).
    pub fn area(&self) -> f64 {
        let (mut a, mut cx, mut cy) = (0.0, 0.0, 0.0);
        self.accumulate_area(&mut a, &mut cx, &mut cy);
        a.abs()
    }

    fn accumulate_area(&self, a: &mut f64, cx: &mut f64, cy: &mut f64) {
        match self {
            Geometry::Polygon(rings) => {
                for (i, ring) in rings.iter().enumerate() {
                    let (ra, rx, ry) = ring_moments(ring);
                    // exterior counts positive, holes negative, regardless of winding
                    let s = if i == 0 { ra.signum() } else { -ra.signum() };
                    *a += s * ra;
                    *cx += s * rx;
                    *cy += s * ry;
                }
            }
            Geometry::Multi(parts) => parts.iter().for_each(|p| p.accumulate_area(a, cx, cy)),
            _ => {}
        }
    }
}

fn ring_moments(ring: &[Coord]) -> (f64, f64, f64) {
    let (mut a, mut cx, mut cy) = (0.0, 0.0, 0.0);
    for w in ring.windows(2) {
        let ([x0, y0], [x1, y1]) = (w[0], w[1]);
        let cross = x0 * y1 - x1 * y0;
        a += cross;
        cx += (x0 + x1) * cross;
        cy += (y0 + y1) * cross;
    }
    (a / 2.0, cx, cy)
}

impl VectorFeature {
    pub fn new(geometry: Geometry) -> Result<Self> {
        let geometry = geometry.cleaned()?;
        for [lon, lat] in geometry.coords() {
            if !(-180.0..=180.0).contains(&lon) || !(-90.0..=90.0).contains(&lat) {
                return Err(Error::Geometry(format!("coordinate ({lon}, {lat}) out of range")));
            }
        }
        Ok(Self {
            geometry,
            properties: BTreeMap::new(),
        })
    }

    pub fn with_property(mut self, key: &str, value: impl Into<String>) -> Self {
        self.properties.insert(key.to_string(), value.into());
        self
    }

    pub fn property(&self, key: &str) -> Option<&str> {
        self.properties.get(key).map(String::as_str)
    }

    pub fn project(&self, proj: &Projection) -> Result<PlanarFeature> {
        Ok(PlanarFeature {
            geometry: self.geometry.try_map_coords(&|[lon, lat]| {
                let (x, y) = proj.forward(lon, lat)?;
                Ok([x, y])
            })?,
            properties: self.properties.clone(),
        })
    }

    /// Centroid in lon/lat, computed in a projection centered on the
    /// feature's bounding box.
    pub fn centroid_lonlat(&self) -> Result<Coord> {
        let (x0, y0, x1, y1) = self
            .geometry
            .bbox()
            .ok_or_else(|| Error::Geometry("empty geometry".into()))?;
        let proj = Projection::new((x0 + x1) / 2.0, (y0 + y1) / 2.0)?;
        let planar = self.project(&proj)?;
        let [x, y] = planar
            .geometry
            .centroid()
            .ok_or_else(|| Error::Geometry("empty geometry".into()))?;
        let (lon, lat) = proj.inverse(x, y)?;
        Ok([lon, lat])
    }

    /// Projection centered on this feature's bounding box center.
    pub fn local_projection(&self) -> Result<Projection> {
        let (x0, y0, x1, y1) = self
            .geometry
            .bbox()
            .ok_or_else(|| Error::Geometry("empty geometry".into()))?;
        Projection::new((x0 + x1) / 2.0, (y0 + y1) / 2.0)
    }
}

fn parse_coord(v: &Value) -> Result<Coord> {
    let arr = v
        .as_array()
        .filter(|a| a.len() >= 2)
        .ok_or_else(|| Error::Geometry("position must be an array of two numbers".into()))?;
    let x = arr[0].as_f64().ok_or_else(|| Error::Geometry("non-numeric coordinate".into()))?;
    let y = arr[1].as_f64().ok_or_else(|| Error::Geometry("non-numeric coordinate".into()))?;
    Ok([x, y])
}

fn parse_line(v: &Value) -> Result<Vec<Coord>> {
    v.as_array()
        .ok_or_else(|| Error::Geometry("expected an array of positions".into()))?
        .iter()
        .map(parse_coord)
        .collect()
}

fn parse_rings(v: &Value) -> Result<Vec<Vec<Coord>>> {
    v.as_array()
        .ok_or_else(|| Error::Geometry("expected an array of rings".into()))?
        .iter()
        .map(parse_line)
        .collect()
}

fn parse_geometry(v: &Value) -> Result<Geometry> {
    let kind = v
        .get("type")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::Geometry("geometry without type".into()))?;
    let coords = || {
        v.get("coordinates")
            .ok_or_else(|| Error::Geometry(format!("{kind} without coordinates")))
    };
    let each = |f: &dyn Fn(&Value) -> Result<Geometry>| -> Result<Geometry> {
        let parts = coords()?
            .as_array()
            .ok_or_else(|| Error::Geometry("expected array".into()))?
            .iter()
            .map(f)
            .collect::<Result<Vec<_>>>()?;
        Ok(Geometry::Multi(parts))
    };
    match kind {
        "Point" => Ok(Geometry::Point(parse_coord(coords()?)?)),
        "LineString" => Ok(Geometry::Polyline(parse_line(coords()?)?)),
        "Polygon" => Ok(Geometry::Polygon(parse_rings(coords()?)?)),
        "MultiPoint" => each(&|c| Ok(Geometry::Point(parse_coord(c)?))),
        "MultiLineString" => each(&|c| Ok(Geometry::Polyline(parse_line(c)?))),
        "MultiPolygon" => each(&|c| Ok(Geometry::Polygon(parse_rings(c)?))),
        "GeometryCollection" => Ok(Geometry::Multi(
            v.get("geometries")
                .and_then(Value::as_array)
                .ok_or_else(|| Error::Geometry("collection without geometries".into()))?
                .iter()
                .map(parse_geometry)
                .collect::<Result<_>>()?,
        )),
        other => Err(Error::Geometry(format!("unsupported geometry type {other}"))),
    }
}

fn property_string(v: &Value) -> Option<String> {
    match v {
        Value::Null => None,
        Value::String(s) => Some(s.clone()),
        other => Some(other.to_string()),
    }
}

/// Parses a GeoJSON FeatureCollection. Features with null geometry are skipped.
pub fn parse_feature_collection(text: &str) -> Result<Vec<VectorFeature>> {
    let doc: Value = serde_json::from_str(text)?;
    if doc.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(Error::Geometry("expected a GeoJSON FeatureCollection".into()));
    }
    let features = doc
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Geometry("FeatureCollection without features".into()))?;
    let mut out = Vec::with_capacity(features.len());
    for f in features {
        if let Some(feature) = parse_feature(f)? {
            out.push(feature);
        }
    }
    Ok(out)
}

/// Parses one GeoJSON Feature; `None` for a null geometry.
pub fn parse_feature(f: &Value) -> Result<Option<VectorFeature>> {
    let Some(g) = f.get("geometry").filter(|g| !g.is_null()) else {
        return Ok(None);
    };
    let mut feature = VectorFeature::new(parse_geometry(g)?)?;
    if let Some(props) = f.get("properties").and_then(Value::as_object) {
        for (k, v) in props {
            if let Some(s) = property_string(v) {
                feature.properties.insert(k.clone(), s);
            }
        }
    }
    Ok(Some(feature))
}

pub fn read_geojson(path: impl AsRef<Path>) -> Result<Vec<VectorFeature>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    parse_feature_collection(&text)
}

pub fn geometry_to_json(g: &Geometry) -> Value {
    let pos = |c: &Coord| json!([c[0], c[1]]);
    let line = |cs: &[Coord]| Value::Array(cs.iter().map(pos).collect());
    let rings = |rs: &[Vec<Coord>]| Value::Array(rs.iter().map(|r| line(r)).collect());
    match g {
        Geometry::Point(c) => json!({"type": "Point", "coordinates": pos(c)}),
        Geometry::Polyline(cs) => json!({"type": "LineString", "coordinates": line(cs)}),
        Geometry::Polygon(rs) => json!({"type": "Polygon", "coordinates": rings(rs)}),
        Geometry::Multi(parts) => {
            if parts.iter().all(|p| matches!(p, Geometry::Polygon(_))) {
                let polys: Vec<Value> = parts
                    .iter()
                    .map(|p| match p {
                        Geometry::Polygon(rs) => rings(rs),
                        _ => unreachable!(),
                    })
                    .collect();
                json!({"type": "MultiPolygon", "coordinates": polys})
            } else {
                json!({
                    "type": "GeometryCollection",
                    "geometries": parts.iter().map(geometry_to_json).collect::<Vec<_>>()
                })
            }
        }
    }
}

pub fn feature_json(geometry: &Geometry, properties: Map<String, Value>) -> Value {
    json!({
        "type": "Feature",
        "geometry": geometry_to_json(geometry),
        "properties": Value::Object(properties),
    })
}

pub fn feature_collection(features: Vec<Value>) -> Value {
    json!({"type": "FeatureCollection", "features": features})
}
