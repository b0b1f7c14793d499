//! Turbine and PV park placement on eligibility masks.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::grid::vector::{feature_collection, feature_json};
use crate::grid::{Geometry, GridSpec, Mask, Projection};
use crate::tech::Tech;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TurbineSpec {
    /// MW
    pub rated_power: f64,
    /// m
    pub rotor_diameter: f64,
    /// m
    pub hub_height: f64,
}

impl Default for TurbineSpec {
    fn default() -> Self {
        Self {
            rated_power: 4.2,
            rotor_diameter: 136.0,
            hub_height: 120.0,
        }
    }
}

impl TurbineSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if ok(self.rated_power) && ok(self.rotor_diameter) && ok(self.hub_height) {
            Ok(())
        } else {
            Err(Error::invalid(format!("turbine parameters must be positive: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PvParams {
    /// m²/kWp
    pub land_use: f64,
    /// m
    pub seed_spacing: f64,
    pub module_name: String,
}

impl Default for PvParams {
    fn default() -> Self {
        Self {
            land_use: 20.0,
            seed_spacing: 1000.0,
            module_name: "Winaico WSx-240P6".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlacementItem {
    /// Planar location in the mask's projected frame.
    pub location: (f64, f64),
    /// MW
    pub capacity: f64,
    /// PV park cells as a multipolygon of row runs (planar).
    pub footprint: Option<Geometry>,
    /// m², zero for turbines.
    pub area_m2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlacementSet {
    pub tech: Tech,
    pub items: Vec<PlacementItem>,
    /// MW
    pub total_capacity: f64,
}

impl PlacementSet {
    fn new(tech: Tech, items: Vec<PlacementItem>) -> Self {
        let total_capacity = items.iter().map(|i| i.capacity).sum();
        Self {
            tech,
            items,
            total_capacity,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// GeoJSON in lon/lat: turbine points carry `capacity_mw`, PV parks carry
    /// `area_m2` and `capacity_kwp`.
    pub fn to_geojson(&self, projection: &Projection) -> Result<Value> {
        let to_lonlat = |c: [f64; 2]| -> Result<[f64; 2]> {
            let (lon, lat) = projection.inverse(c[0], c[1])?;
            Ok([lon, lat])
        };
        let mut features = Vec::with_capacity(self.items.len());
        for item in &self.items {
            let mut props = Map::new();
            let geometry = match (self.tech, &item.footprint) {
                (Tech::Pv, Some(fp)) => {
                    props.insert("area_m2".into(), json!(item.area_m2));
                    props.insert("capacity_kwp".into(), json!(item.capacity * 1000.0));
                    fp.try_map_coords(&to_lonlat)?
                }
                _ => {
                    props.insert("capacity_mw".into(), json!(item.capacity));
                    Geometry::Point(to_lonlat([item.location.0, item.location.1])?)
                }
            };
            features.push(feature_json(&geometry, props));
        }
        Ok(feature_collection(features))
    }
}

/// Sine and cosine of an angle in degrees, exact at multiples of 90°.
fn sin_cos_deg(deg: f64) -> (f64, f64) {
    let quarter = deg / 90.0;
    if quarter.fract() == 0.0 {
        match (quarter as i64).rem_euclid(4) {
            0 => (0.0, 1.0),
            1 => (1.0, 0.0),
            2 => (0.0, -1.0),
            _ => (-1.0, 0.0),
        }
    } else {
        deg.to_radians().sin_cos()
    }
}

/// Range of the true cells' extents projected on direction `(dx, dy)`.
fn extent_along(mask: &Mask, dx: f64, dy: f64) -> Option<(f64, f64)> {
    let spec = mask.spec();
    let h = spec.cell_size / 2.0;
    let reach = h * (dx.abs() + dy.abs());
    let mut range: Option<(f64, f64)> = None;
    for (r, c) in mask.iter_true() {
        let (x, y) = spec.cell_center(r, c);
        let p = x * dx + y * dy;
        let (lo, hi) = (p - reach, p + reach);
        range = Some(match range {
            None => (lo, hi),
            Some((a, b)) => (a.min(lo), b.max(hi)),
        });
    }
    range
}

/// Positions of lattice nodes centered on `[lo, hi]` with the given pitch.
fn centered_nodes(lo: f64, hi: f64, pitch: f64) -> Vec<f64> {
    let len = hi - lo;
    let k = (len / pitch).floor() as usize + 1;
    let offset = (len - (k - 1) as f64 * pitch) / 2.0;
    (0..k).map(|i| lo + offset + i as f64 * pitch).collect()
}

fn eligible_at(mask: &Mask, x: f64, y: f64) -> bool {
    mask.spec().cell_at(x, y).is_some_and(|(r, c)| mask.get(r, c))
}

/// Places turbines on a lattice with pitch 8D along the main wind direction
/// (degrees clockwise from north) and 4D across it.
///
/// Because every node pair differs by whole pitches on at least one axis, the
/// elliptical spacing constraint holds by construction.
pub fn place_wind(mask: &Mask, spec: &TurbineSpec, main_direction_deg: f64) -> Result<PlacementSet> {
    spec.validate()?;
    if !(0.0..360.0).contains(&main_direction_deg) {
        return Err(Error::invalid(format!(
            "main wind direction must be in [0, 360), got {main_direction_deg}"
        )));
    }
    let (s, c) = sin_cos_deg(main_direction_deg);
    let (ux, uy) = (s, c);
    let (vx, vy) = (c, -s);
    let (Some((u0, u1)), Some((v0, v1))) = (extent_along(mask, ux, uy), extent_along(mask, vx, vy)) else {
        return Ok(PlacementSet::new(Tech::Wind, Vec::new()));
    };
    let along = centered_nodes(u0, u1, 8.0 * spec.rotor_diameter);
    let across = centered_nodes(v0, v1, 4.0 * spec.rotor_diameter);
    let mut items = Vec::new();
    for &a in &along {
        for &b in &across {
            let x = a * ux + b * vx;
            let y = a * uy + b * vy;
            if eligible_at(mask, x, y) {
                items.push(PlacementItem {
                    location: (x, y),
                    capacity: spec.rated_power,
                    footprint: None,
                    area_m2: 0.0,
                });
            }
        }
    }
    Ok(PlacementSet::new(Tech::Wind, items))
}

/// True iff every pair satisfies `(Δ∥/8D)² + (Δ⊥/4D)² >= 1`.
pub fn spacing_respected(items: &[PlacementItem], rotor_diameter: f64, main_direction_deg: f64) -> bool {
    let (s, c) = sin_cos_deg(main_direction_deg);
    let (a, b) = (8.0 * rotor_diameter, 4.0 * rotor_diameter);
    let tol = 1e-9;
    for (i, p) in items.iter().enumerate() {
        for q in &items[i + 1..] {
            let (dx, dy) = (q.location.0 - p.location.0, q.location.1 - p.location.1);
            let along = dx * s + dy * c;
            let across = dx * c - dy * s;
            if (along / a).powi(2) + (across / b).powi(2) < 1.0 - tol {
                return false;
            }
        }
    }
    true
}

/// Circular mean of directions in degrees, in `[0, 360)`. `None` if the
/// directions cancel out or the series is empty.
pub fn circular_mean_deg(directions: &[f64]) -> Option<f64> {
    let (mut s, mut c) = (0.0, 0.0);
    for d in directions.iter().filter(|d| d.is_finite()) {
        let (ds, dc) = d.to_radians().sin_cos();
        s += ds;
        c += dc;
    }
    if s.hypot(c) < 1e-9 {
        return None;
    }
    let deg = s.atan2(c).to_degrees().rem_euclid(360.0);
    Some(if deg >= 360.0 { 0.0 } else { deg })
}

/// Nearest-point lookup over seeds bucketed on a square grid.
struct SeedIndex {
    seeds: Vec<(f64, f64)>,
    bucket: f64,
    buckets: HashMap<(i64, i64), Vec<usize>>,
    span: i64,
}

impl SeedIndex {
    fn new(seeds: Vec<(f64, f64)>, bucket: f64) -> Self {
        let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        let key = |x: f64, y: f64| ((x / bucket).floor() as i64, (y / bucket).floor() as i64);
        for (i, &(x, y)) in seeds.iter().enumerate() {
            buckets.entry(key(x, y)).or_default().push(i);
        }
        let span = buckets
            .keys()
            .flat_map(|&(a, b)| [a.abs(), b.abs()])
            .max()
            .unwrap_or(0)
            * 2
            + 2;
        Self {
            seeds,
            bucket,
            buckets,
            span,
        }
    }

    /// Index of the nearest seed; ties go to the lowest index.
    fn nearest(&self, x: f64, y: f64) -> Option<usize> {
        let (bx, by) = ((x / self.bucket).floor() as i64, (y / self.bucket).floor() as i64);
        let mut best: Option<(f64, usize)> = None;
        let mut ring = 0i64;
        loop {
            for (dx, dy) in ring_offsets(ring) {
                if let Some(ids) = self.buckets.get(&(bx + dx, by + dy)) {
                    for &i in ids {
                        let (sx, sy) = self.seeds[i];
                        let d2 = (sx - x).powi(2) + (sy - y).powi(2);
                        let better = match best {
                            None => true,
                            Some((bd, bi)) => d2 < bd || (d2 == bd && i < bi),
                        };
                        if better {
                            best = Some((d2, i));
                        }
                    }
                }
            }
            // everything in ring r+1 is at least r bucket widths away
            if let Some((d2, i)) = best {
                let bound = ring as f64 * self.bucket;
                if d2 < bound * bound {
                    return Some(i);
                }
            }
            if ring > self.span + (bx.abs().max(by.abs())) {
                return best.map(|(_, i)| i);
            }
            ring += 1;
        }
    }
}

fn ring_offsets(r: i64) -> Vec<(i64, i64)> {
    if r == 0 {
        return vec![(0, 0)];
    }
    let mut out = Vec::with_capacity(8 * r as usize);
    for d in -r..=r {
        out.push((d, -r));
        out.push((d, r));
    }
    for d in -r + 1..r {
        out.push((-r, d));
        out.push((r, d));
    }
    out
}

/// 4-connected components of cells sharing the same owner, each in
/// ascending index order, ordered by owner and then by first cell.
fn components(spec: &GridSpec, owner: &[u32]) -> Vec<Vec<usize>> {
    const NONE: u32 = u32::MAX;
    let ncols = spec.ncols;
    let mut seen = vec![false; owner.len()];
    let mut out: Vec<(u32, Vec<usize>)> = Vec::new();
    for start in 0..owner.len() {
        if owner[start] == NONE || seen[start] {
            continue;
        }
        let id = owner[start];
        seen[start] = true;
        let mut comp = vec![start];
        let mut stack = vec![start];
        while let Some(i) = stack.pop() {
            let (r, c) = (i / ncols, i % ncols);
            let mut neighbours = [usize::MAX; 4];
            if r > 0 {
                neighbours[0] = i - ncols;
            }
            if r + 1 < spec.nrows {
                neighbours[1] = i + ncols;
            }
            if c > 0 {
                neighbours[2] = i - 1;
            }
            if c + 1 < ncols {
                neighbours[3] = i + 1;
            }
            for j in neighbours.into_iter().filter(|&j| j != usize::MAX) {
                if owner[j] == id && !seen[j] {
                    seen[j] = true;
                    comp.push(j);
                    stack.push(j);
                }
            }
        }
        comp.sort_unstable();
        out.push((id, comp));
    }
    out.sort_by_key(|(id, _)| *id);
    out.into_iter().map(|(_, c)| c).collect()
}

/// Row runs of the cells as rectangles.
fn footprint_geometry(spec: &GridSpec, cells: &[usize]) -> Geometry {
    let ncols = spec.ncols;
    let cs = spec.cell_size;
    let mut parts = Vec::new();
    let mut i = 0;
    while i < cells.len() {
        let (r, c0) = (cells[i] / ncols, cells[i] % ncols);
        let mut j = i + 1;
        while j < cells.len() && cells[j] == cells[j - 1] + 1 && cells[j] / ncols == r {
            j += 1;
        }
        let c1 = c0 + (j - i);
        let x0 = spec.origin_x + c0 as f64 * cs;
        let x1 = spec.origin_x + c1 as f64 * cs;
        let y1 = spec.origin_y + (spec.nrows - r) as f64 * cs;
        let y0 = y1 - cs;
        parts.push(Geometry::Polygon(vec![vec![
            [x0, y0],
            [x1, y0],
            [x1, y1],
            [x0, y1],
            [x0, y0],
        ]]));
        i = j;
    }
    Geometry::Multi(parts)
}

/// Seeds on a bounding-box-centered square lattice, kept where eligible,
/// numbered north to south then west to east.
pub fn pv_seeds(mask: &Mask, seed_spacing: f64) -> Vec<(f64, f64)> {
    let (Some((x0, x1)), Some((y0, y1))) = (extent_along(mask, 1.0, 0.0), extent_along(mask, 0.0, 1.0)) else {
        return Vec::new();
    };
    let xs = centered_nodes(x0, x1, seed_spacing);
    let ys = centered_nodes(y0, y1, seed_spacing);
    let mut seeds = Vec::new();
    for &y in ys.iter().rev() {
        for &x in &xs {
            if eligible_at(mask, x, y) {
                seeds.push((x, y));
            }
        }
    }
    seeds
}

/// Partitions the eligible cells into parks: nearest-seed regions split into
/// 4-connected pieces.
pub fn place_pv(mask: &Mask, params: &PvParams) -> Result<PlacementSet> {
    if !(params.land_use > 0.0) || !(params.seed_spacing > 0.0) {
        return Err(Error::invalid("land use and seed spacing must be positive"));
    }
    let spec = *mask.spec();
    let seeds = pv_seeds(mask, params.seed_spacing);

    let mut owner = vec![u32::MAX; spec.len()];
    if seeds.is_empty() {
        for (o, &c) in owner.iter_mut().zip(mask.cells()) {
            if c {
                *o = 0;
            }
        }
    } else {
        let index = SeedIndex::new(seeds, params.seed_spacing);
        for (i, o) in owner.iter_mut().enumerate() {
            if mask.cells()[i] {
                let (x, y) = spec.cell_center(i / spec.ncols, i % spec.ncols);
                *o = index.nearest(x, y).expect("seed set is non-empty") as u32;
            }
        }
    }

    let cell_area = spec.cell_area_m2();
    let mut items = Vec::new();
    for comp in components(&spec, &owner) {
        let n = comp.len() as f64;
        let (mut sx, mut sy) = (0.0, 0.0);
        for &i in &comp {
            let (x, y) = spec.cell_center(i / spec.ncols, i % spec.ncols);
            sx += x;
            sy += y;
        }
        let area_m2 = n * cell_area;
        items.push(PlacementItem {
            location: (sx / n, sy / n),
            capacity: area_m2 / params.land_use / 1000.0,
            footprint: Some(footprint_geometry(&spec, &comp)),
            area_m2,
        });
    }
    Ok(PlacementSet::new(Tech::Pv, items))
}

/// PV capacity in GWp for an area in km² at a land use in m²/kWp.
pub fn capacity_from_area(area_km2: f64, land_use: f64) -> Result<f64> {
    if !(area_km2 > 0.0) || !(land_use > 0.0) || !area_km2.is_finite() || !land_use.is_finite() {
        return Err(Error::invalid(format!(
            "area and land use must be positive, got {area_km2} km² and {land_use} m²/kWp"
        )));
    }
    Ok(area_km2 / land_use)
}
