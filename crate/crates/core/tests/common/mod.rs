//! Shared helpers for integration tests: random fixtures and brute-force oracles.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use h2atlas::eligibility::{default_catalog, BufferMap, CriterionSpec, RegionLayers};
use h2atlas::grid::{Geometry, GridSpec, Projection, VectorFeature};
use h2atlas::ressim::{simulate_pv, simulate_wind, GenAsset, WeatherSeries, HOURS_PER_YEAR};
use h2atlas::service::fixture::{synthetic_weather, SyntheticWeather};
use h2atlas::placement::TurbineSpec;
use h2atlas::tech::Tech;

pub type Pt = [f64; 2];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Planar geometry to lon/lat through `proj`.
pub fn to_lonlat(proj: &Projection, g: &Geometry) -> Geometry {
    g.try_map_coords(&|[x, y]| {
        let (lon, lat) = proj.inverse(x, y)?;
        Ok([lon, lat])
    })
    .unwrap()
}

pub fn feature(proj: &Projection, planar: Geometry) -> VectorFeature {
    VectorFeature::new(to_lonlat(proj, &planar)).unwrap()
}

pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Geometry {
    Geometry::Polygon(vec![vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1], [x0, y0]]])
}

/// Star-shaped polygon around `(cx, cy)`.
pub fn star(rng: &mut ChaCha8Rng, cx: f64, cy: f64, r_lo: f64, r_hi: f64, n: usize) -> Geometry {
    let mut ring: Vec<Pt> = (0..n)
        .map(|k| {
            let a = 2.0 * std::f64::consts::PI * (k as f64 + rng.gen_range(0.0..0.8)) / n as f64;
            let r = rng.gen_range(r_lo..r_hi);
            [cx + r * a.cos(), cy + r * a.sin()]
        })
        .collect();
    ring.push(ring[0]);
    Geometry::Polygon(vec![ring])
}

/// Random exclusion-eligibility instance in lon/lat.
pub struct EligFixture {
    pub region: VectorFeature,
    pub criteria: Vec<CriterionSpec>,
    pub layers: BTreeMap<String, Vec<VectorFeature>>,
    pub buffers: BufferMap,
}

impl EligFixture {
    pub fn max_buffer(&self) -> f64 {
        self.buffers.values().fold(0.0f64, |m, &b| m.max(b))
    }

    pub fn build(&self, margin: f64) -> RegionLayers {
        RegionLayers::build("fx", &self.region, &self.criteria, &self.layers, 100.0, margin).unwrap()
    }
}

/// Region up to ~9 km radius with 1 to `max_criteria` criteria of polygons,
/// polylines and points; buffers in [0, 1000] m.
pub fn random_elig_fixture(seed: u64, max_criteria: usize) -> EligFixture {
    let mut rng = rng(seed);
    let lon0 = rng.gen_range(-10.0..30.0);
    let lat0 = rng.gen_range(-20.0..15.0);
    let proj = Projection::new(lon0, lat0).unwrap();
    let rr = rng.gen_range(3000.0..8000.0);
    let nv = rng.gen_range(8..16);
    let region = star(&mut rng, 0.0, 0.0, 0.5 * rr, rr, nv);
    let catalog = default_catalog();
    let n = rng.gen_range(1..=max_criteria);
    let mut ids: Vec<usize> = (0..catalog.len()).collect();
    for i in 0..n {
        let j = rng.gen_range(i..ids.len());
        ids.swap(i, j);
    }
    let mut criteria = Vec::new();
    let mut layers = BTreeMap::new();
    let mut buffers = BufferMap::new();
    for &i in &ids[..n] {
        let c = catalog[i].clone();
        let mut feats = Vec::new();
        for _ in 0..rng.gen_range(1..=4) {
            let cx = rng.gen_range(-rr..rr);
            let cy = rng.gen_range(-rr..rr);
            let g = match rng.gen_range(0..3) {
                0 => {
                    let hi = 600.0 + rng.gen_range(0.0..1500.0);
                    let nv = rng.gen_range(3..9);
                    star(&mut rng, cx, cy, 200.0, hi, nv)
                }
                1 => {
                    let mut pts = vec![[cx, cy]];
                    for _ in 0..rng.gen_range(1..6) {
                        let [x, y] = *pts.last().unwrap();
                        pts.push([x + rng.gen_range(-2500.0..2500.0), y + rng.gen_range(-2500.0..2500.0)]);
                    }
                    Geometry::Polyline(pts)
                }
                _ => Geometry::Point([cx, cy]),
            };
            feats.push(feature(&proj, g));
        }
        buffers.insert(c.id, rng.gen_range(0.0..1000.0));
        layers.insert(c.source_layer.clone(), feats);
        criteria.push(c);
    }
    criteria.sort_by_key(|c| c.id);
    EligFixture {
        region: feature(&proj, region),
        criteria,
        layers,
        buffers,
    }
}

/// Even-odd point in polygon over all rings.
pub fn point_in_rings(p: Pt, rings: &[Vec<Pt>]) -> bool {
    let mut inside = false;
    for ring in rings {
        for w in ring.windows(2) {
            let (a, b) = (w[0], w[1]);
            if (a[1] > p[1]) != (b[1] > p[1]) {
                let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
                if p[0] < x {
                    inside = !inside;
                }
            }
        }
    }
    inside
}

pub fn dist2_point_segment(p: Pt, a: Pt, b: Pt) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let l2 = dx * dx + dy * dy;
    let t = if l2 > 0.0 {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / l2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (ex, ey) = (a[0] + t * dx - p[0], a[1] + t * dy - p[1]);
    ex * ex + ey * ey
}

/// Whether a cell center is covered by a planar geometry under the
/// cell-center rule (inside a polygon, or within half a cell of a line/point).
pub fn covers(g: &Geometry, p: Pt, half: f64) -> bool {
    match g {
        Geometry::Polygon(rings) => point_in_rings(p, rings),
        Geometry::Polyline(pts) => {
            if pts.len() == 1 {
                return dist2_point_segment(p, pts[0], pts[0]) <= half * half;
            }
            pts.windows(2).any(|w| dist2_point_segment(p, w[0], w[1]) <= half * half)
        }
        Geometry::Point(c) => dist2_point_segment(p, *c, *c) <= half * half,
        Geometry::Multi(parts) => parts.iter().any(|g| covers(g, p, half)),
    }
}

pub fn project(proj: &Projection, g: &Geometry) -> Geometry {
    g.try_map_coords(&|[lon, lat]| {
        let (x, y) = proj.forward(lon, lat)?;
        Ok([x, y])
    })
    .unwrap()
}

/// Brute-force eligibility on the engine's grid and projection.
///
/// Returns the eligible mask (row-major) and the region cell count, plus the
/// number of region cells attributed to each criterion in id order.
pub fn oracle_eligibility(
    spec: &GridSpec,
    proj: &Projection,
    region: &VectorFeature,
    criteria: &[CriterionSpec],
    layers: &BTreeMap<String, Vec<VectorFeature>>,
    buffers: &BufferMap,
) -> (Vec<bool>, usize, BTreeMap<u8, usize>) {
    let half = spec.cell_size / 2.0;
    let centers: Vec<Pt> = (0..spec.nrows)
        .flat_map(|r| (0..spec.ncols).map(move |c| (r, c)))
        .map(|(r, c)| {
            let (x, y) = spec.cell_center(r, c);
            [x, y]
        })
        .collect();
    let region_g = project(proj, &region.geometry);
    let in_region: Vec<bool> = centers.iter().map(|&p| covers(&region_g, p, half)).collect();
    let mut eligible = in_region.clone();
    let mut ledger = BTreeMap::new();
    let mut sorted: Vec<&CriterionSpec> = criteria.iter().collect();
    sorted.sort_by_key(|c| c.id);
    for c in sorted {
        let geoms: Vec<Geometry> = layers
            .get(&c.source_layer)
            .map(|fs| fs.iter().map(|f| project(proj, &f.geometry)).collect())
            .unwrap_or_default();
        let raw: Vec<bool> = centers.iter().map(|&p| geoms.iter().any(|g| covers(g, p, half))).collect();
        let b = buffers.get(&c.id).copied().unwrap_or(0.0);
        let k = (b / spec.cell_size).ceil() as i64 + 1;
        let mut count = 0usize;
        for r in 0..spec.nrows as i64 {
            for col in 0..spec.ncols as i64 {
                let idx = (r as usize) * spec.ncols + col as usize;
                if !eligible[idx] {
                    continue;
                }
                let p = centers[idx];
                let mut hit = false;
                'win: for rr in (r - k).max(0)..=(r + k).min(spec.nrows as i64 - 1) {
                    for cc in (col - k).max(0)..=(col + k).min(spec.ncols as i64 - 1) {
                        let j = (rr as usize) * spec.ncols + cc as usize;
                        if raw[j] {
                            let q = centers[j];
                            if (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) <= b * b {
                                hit = true;
                                break 'win;
                            }
                        }
                    }
                }
                if hit {
                    eligible[idx] = false;
                    count += 1;
                }
            }
        }
        ledger.insert(c.id, count);
    }
    let region_cells = in_region.iter().filter(|&&v| v).count();
    (eligible, region_cells, ledger)
}

/// Synthetic weather whose PV capacity factor lands in `[lo, hi]`.
pub fn weather_with_pv_cf(lo: f64, hi: f64, seed: u64) -> (WeatherSeries, f64) {
    for k in 0..200 {
        let clearness = 0.35 + 0.005 * k as f64;
        let w = synthetic_weather(&SyntheticWeather {
            clearness,
            lat: 12.0,
            seed,
            ..SyntheticWeather::default()
        });
        let cf = mean(&simulate_pv(&w));
        if (lo..=hi).contains(&cf) {
            return (w, cf);
        }
    }
    panic!("no clearness yields PV cf in [{lo}, {hi}]");
}

/// Synthetic weather whose wind capacity factor lands in `[lo, hi]`.
pub fn weather_with_wind_cf(lo: f64, hi: f64, seed: u64, spec: &TurbineSpec) -> (WeatherSeries, f64) {
    for k in 0..400 {
        let mean_wind = 2.0 + 0.025 * k as f64;
        let w = synthetic_weather(&SyntheticWeather {
            mean_wind,
            seed,
            ..SyntheticWeather::default()
        });
        let cf = mean(&simulate_wind(&w, spec).unwrap());
        if (lo..=hi).contains(&cf) {
            return (w, cf);
        }
    }
    panic!("no mean wind yields wind cf in [{lo}, {hi}]");
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Random same-technology assets with short series.
pub fn random_assets(rng: &mut ChaCha8Rng, hours: usize) -> Vec<GenAsset> {
    let tech = if rng.gen_bool(0.5) { Tech::Pv } else { Tech::Wind };
    let n = rng.gen_range(1..40);
    (0..n)
        .map(|_| {
            let level = rng.gen_range(0.05..0.5);
            let cf: Vec<f64> = (0..hours).map(|_| (level * rng.gen_range(0.0..2.0f64)).min(1.0)).collect();
            let lcoe = if rng.gen_bool(0.1) { 0.05 } else { rng.gen_range(0.02..0.4) };
            GenAsset::new(tech, rng.gen_range(0.1..50.0), cf, lcoe)
        })
        .collect()
}

pub const HOURS: usize = HOURS_PER_YEAR;
