//! Deterministic synthetic datasets: weather series and a small three-region
//! bundle that exercises every pipeline stage.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::eligibility::{default_catalog, CRITERIA_COUNT};
use crate::error::{Error, Result};
use crate::grid::{write_float_grid, FloatGrid, GridSpec, Projection};
use crate::ressim::weather::format_weather_csv;
use crate::ressim::{WeatherSeries, HOURS_PER_YEAR};
use crate::water::scenario::{file_name, COMBOS};
use crate::water::{window_for, Rcp};

/// Knobs for [`synthetic_weather`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticWeather {
    pub lat: f64,
    /// Long-run mean wind speed at the reference height, m/s.
    pub mean_wind: f64,
    /// Mean daily clearness index in (0, 1].
    pub clearness: f64,
    /// Prevailing wind direction, degrees.
    pub direction: f64,
    pub mean_temp: f64,
    pub seed: u64,
}

impl Default for SyntheticWeather {
    fn default() -> Self {
        Self {
            lat: 6.8,
            mean_wind: 5.5,
            clearness: 0.62,
            direction: 225.0,
            mean_temp: 27.0,
            seed: 1,
        }
    }
}

fn std_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

/// One year of hourly weather.
///
/// GHI follows the clear-sky solar elevation at `lat` scaled by a random daily
/// clearness; wind speed is Rayleigh-distributed with hourly persistence and a
/// mild afternoon peak.
pub fn synthetic_weather(p: &SyntheticWeather) -> WeatherSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let n = HOURS_PER_YEAR;
    let phi = p.lat.to_radians();
    let sigma = p.mean_wind / (PI / 2.0).sqrt();
    let rho: f64 = 0.95;
    let innov = (1.0 - rho * rho).sqrt();
    let (mut x, mut y) = (std_normal(&mut rng), std_normal(&mut rng));
    let mut day_k = p.clearness;
    let mut wind_speed = Vec::with_capacity(n);
    let mut ghi = Vec::with_capacity(n);
    let mut air_temp = Vec::with_capacity(n);
    let mut dir = Vec::with_capacity(n);
    for h in 0..n {
        let day = h / 24;
        let hour = (h % 24) as f64 + 0.5;
        if h % 24 == 0 {
            day_k = (p.clearness + 0.18 * (rng.gen::<f64>() - 0.5) * 2.0).clamp(0.05, 1.0);
        }
        let decl = 23.44f64.to_radians() * (2.0 * PI * (284.0 + day as f64 + 1.0) / 365.0).sin();
        let omega = (15.0 * (hour - 12.0)).to_radians();
        let sin_el = phi.sin() * decl.sin() + phi.cos() * decl.cos() * omega.cos();
        let g = if sin_el > 0.0 {
            1367.0 * sin_el * day_k
        } else {
            0.0
        };
        ghi.push((g.min(1200.0) * 10.0).round() / 10.0);

        x = rho * x + innov * std_normal(&mut rng);
        y = rho * y + innov * std_normal(&mut rng);
        let diurnal = 1.0 + 0.15 * (2.0 * PI * (hour - 15.0) / 24.0).cos();
        let v = sigma * x.hypot(y) * diurnal;
        wind_speed.push((v * 1000.0).round() / 1000.0);

        let t = p.mean_temp + 4.0 * (2.0 * PI * (hour - 9.0) / 24.0).sin();
        air_temp.push((t * 100.0).round() / 100.0);

        let d = (p.direction + 25.0 * std_normal(&mut rng)).rem_euclid(360.0);
        dir.push((d * 10.0).round() / 10.0 % 360.0);
    }
    WeatherSeries {
        location: None,
        reference_height: crate::ressim::DEFAULT_REFERENCE_HEIGHT,
        wind_speed,
        ghi,
        air_temp,
        wind_direction: Some(dir),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FixtureOptions {
    /// Adds a fourth region whose geometry cannot be parsed.
    pub corrupt_region: bool,
}

pub const FIXTURE_REGIONS: [&str; 3] = ["BEN.10_1", "BEN.10_2", "BEN.11_1"];

/// Region boxes: gid, lon0, lat0, lon1, lat1, elevation.
const BOXES: [(&str, f64, f64, f64, f64, f64); 3] = [
    ("BEN.10_1", 2.45, 6.55, 2.52, 6.62, 20.0),
    ("BEN.10_2", 2.52, 6.55, 2.59, 6.62, 35.0),
    ("BEN.11_1", 2.40, 6.90, 2.47, 6.97, 120.0),
];

const WATER_CENTER: [f64; 2] = [2.5, 6.75];

fn write_json(path: &Path, v: &Value) -> Result<()> {
    let bytes = serde_json::to_vec_pretty(v)?;
    fs::write(path, bytes).map_err(|e| Error::file(path, e))
}

fn fc(features: Vec<Value>) -> Value {
    json!({"type": "FeatureCollection", "features": features})
}

fn line(coords: &[[f64; 2]]) -> Value {
    json!({"type": "Feature", "properties": {}, "geometry": {"type": "LineString", "coordinates": coords}})
}

fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Value {
    json!({"type": "Feature", "properties": {}, "geometry": {"type": "Polygon",
        "coordinates": [[[x0, y0], [x1, y0], [x1, y1], [x0, y1], [x0, y0]]]}})
}

fn point(x: f64, y: f64) -> Value {
    json!({"type": "Feature", "properties": {}, "geometry": {"type": "Point", "coordinates": [x, y]}})
}

/// Writes the bundle under `dir` and returns the config path.
pub fn write_fixture(dir: &Path, opts: FixtureOptions) -> Result<PathBuf> {
    let mk = |p: &Path| fs::create_dir_all(p).map_err(|e| Error::file(p, e));
    mk(dir)?;
    for sub in ["criteria", "weather", "hydro", "water"] {
        mk(&dir.join(sub))?;
    }

    // regions
    let mut regions: Vec<Value> = BOXES
        .iter()
        .map(|&(gid, x0, y0, x1, y1, elev)| {
            let mut f = rect(x0, y0, x1, y1);
            f["properties"] = json!({"gid": gid, "country": "BEN", "elevation_m": elev});
            f
        })
        .collect();
    if opts.corrupt_region {
        regions.push(json!({"type": "Feature", "properties": {"gid": "BEN.99_1", "country": "BEN"},
            "geometry": {"type": "Polygon", "coordinates": [[[2.6, "x"], [2.7, 6.6]]]}}));
    }
    write_json(&dir.join("regions.geojson"), &fc(regions))?;

    // criterion layers, keyed by catalog source layer
    let catalog = default_catalog();
    let key = |i: usize| catalog[i].source_layer.clone();
    let layers: Vec<(String, Value)> = vec![
        (
            key(0),
            fc(vec![rect(2.47, 6.57, 2.485, 6.585), rect(2.56, 6.60, 2.575, 6.615), rect(2.42, 6.93, 2.44, 6.95)]),
        ),
        (key(1), fc(vec![point(2.50, 6.60), point(2.57, 6.57), point(2.45, 6.92)])),
        (key(3), fc(vec![line(&[[2.40, 6.58], [2.60, 6.60]]), line(&[[2.43, 6.88], [2.44, 7.0]])])),
        (key(4), fc(vec![line(&[[2.53, 6.54], [2.55, 6.63]])])),
        (key(8), fc(vec![line(&[[2.44, 6.61], [2.60, 6.56]])])),
        (key(17), fc(vec![rect(2.575, 6.555, 2.585, 6.57)])),
        (key(19), fc(vec![line(&[[2.46, 6.54], [2.49, 6.58], [2.48, 6.63]]), line(&[[2.40, 6.95], [2.48, 6.93]])])),
        (key(21), fc(vec![rect(2.40, 6.96, 2.43, 6.98), rect(2.505, 6.555, 2.52, 6.565)])),
        (key(31), fc(vec![rect(2.455, 6.905, 2.475, 6.925)])),
    ];
    for (name, v) in &layers {
        write_json(&dir.join("criteria").join(format!("{name}.geojson")), v)?;
    }

    // preferences: BEN gives part of the catalog, neighbours give all of it
    let mut prefs = Vec::new();
    for (country, scale, partial) in [("BEN", 1.0, true), ("TGO", 0.8, false), ("NGA", 1.3, false)] {
        for (tech, base) in [("wind", 400.0), ("pv", 150.0)] {
            let mut buffers = serde_json::Map::new();
            for id in 1..=CRITERIA_COUNT as u8 {
                if partial && id % 3 == 0 {
                    continue;
                }
                let b = (base * scale * (1.0 + (id % 5) as f64 * 0.25)).round();
                buffers.insert(id.to_string(), json!(b));
            }
            prefs.push(json!({"country": country, "tech": tech, "buffers": buffers}));
        }
    }
    write_json(&dir.join("preferences.json"), &Value::Array(prefs))?;

    // weather
    for (k, &(gid, _, y0, _, y1, _)) in BOXES.iter().enumerate() {
        let w = synthetic_weather(&SyntheticWeather {
            lat: (y0 + y1) / 2.0,
            mean_wind: 5.6 + 0.4 * k as f64,
            clearness: 0.60 + 0.02 * k as f64,
            direction: 200.0 + 20.0 * k as f64,
            seed: 100 + k as u64,
            ..Default::default()
        });
        let text = format_weather_csv(&w, 2019)?;
        let path = dir.join("weather").join(format!("{gid}.csv"));
        fs::write(&path, text).map_err(|e| Error::file(&path, e))?;
    }

    // hydro for the first region only
    let hydro = "id,type,capacity_mw,m01,m02,m03,m04,m05,m06,m07,m08,m09,m10,m11,m12\n\
                 OUE-1,run-of-river,12,2000,1500,1800,2600,4000,5500,6800,7600,7900,6500,4200,2600\n\
                 OUE-2,run-of-river,0.8,100,100,100,100,100,100,100,100,100,100,100,100\n";
    let path = dir.join("hydro").join("BEN.10_1.csv");
    fs::write(&path, hydro).map_err(|e| Error::file(&path, e))?;

    write_water(&dir.join("water"), 2030)?;

    // coastline along the Bight of Benin
    write_json(&dir.join("coastline.geojson"), &fc(vec![line(&[[1.6, 6.22], [2.2, 6.33], [2.8, 6.40]])]))?;

    let demo = "gid,area_km2,urban_pop,rural_pop,labor_share,unemployment,poverty,no_access_elec_u,no_access_elec_r,no_access_fuel_u,no_access_fuel_r\n\
                BEN.10_1,60.5,42000,31000,0.55,0.016,0.38,0.31,0.78,0.72,0.97\n\
                BEN.10_2,60.5,18000,36000,0.56,0.019,0.44,0.35,0.82,0.80,0.98\n\
                BEN.11_1,60.4,9000,41000,0.53,0.012,0.52,,0.88,0.85,\n";
    let path = dir.join("demographics.csv");
    fs::write(&path, demo).map_err(|e| Error::file(&path, e))?;

    let config = json!({
        "name": "benin-fixture",
        "scenario": {"year": 2030, "rcp": "rcp26", "case": "medium"},
        "inputs": {
            "regions": "regions.geojson",
            "criteria_dir": "criteria",
            "preferences": "preferences.json",
            "weather_dir": "weather",
            "hydro_dir": "hydro",
            "water_dir": "water",
            "water_grid_center": WATER_CENTER,
            "coastline": "coastline.geojson",
            "demographics": "demographics.csv"
        },
        "eligibility": {"cell_size": 100.0, "whatif_margin_m": 1500.0},
        "curve": {
            "base_demand_t": 1000.0,
            "growth": 1.06,
            "max_steps": 12,
            "resolution": {"kind": "representative_days", "days": 12}
        },
        "socio": {"national": {"no_access_elec_u": 0.33, "no_access_fuel_r": 0.96}}
    });
    let path = dir.join("config.json");
    write_json(&path, &config)?;
    Ok(path)
}

/// Water balance grids for every year and combination of the target year's
/// window (RCP 2.6 only).
fn write_water(dir: &Path, target_year: u16) -> Result<()> {
    let proj = Projection::new(WATER_CENTER[0], WATER_CENTER[1])?;
    let (cx, cy) = proj.forward(WATER_CENTER[0], WATER_CENTER[1])?;
    let cell = 4000.0;
    let n = 16usize;
    let half = cell * n as f64 / 2.0;
    let spec = GridSpec::new(cx - half, cy - half, cell, n, n)?;
    let (y0, y1) = window_for(target_year)?;
    let mut rng = ChaCha8Rng::seed_from_u64(2030);
    for year in y0..=y1 {
        for combo in 1..=COMBOS {
            let trend = (year - y0) as f64;
            let mut grids: Vec<Vec<f64>> = vec![Vec::with_capacity(n * n); 5];
            for r in 0..n {
                for c in 0..n {
                    // wetter towards the coast (south)
                    let south = r as f64 / n as f64;
                    let p = 1050.0 + 250.0 * south - 2.0 * trend + 60.0 * (rng.gen::<f64>() - 0.5) + 8.0 * combo as f64;
                    let i = 40.0 + 10.0 * rng.gen::<f64>();
                    let et = 760.0 + 40.0 * (c as f64 / n as f64) + 30.0 * (rng.gen::<f64>() - 0.5);
                    let q = 160.0 + 20.0 * rng.gen::<f64>();
                    let swu = 8.0 + 4.0 * rng.gen::<f64>();
                    for (g, v) in grids.iter_mut().zip([p, i, et, q, swu]) {
                        g.push((v * 100.0).round() / 100.0);
                    }
                }
            }
            for (var, values) in ["p", "i", "et", "q", "swu"].iter().zip(grids) {
                let grid = FloatGrid::from_values(spec, values)?;
                write_float_grid(dir.join(file_name(var, year, combo, Rcp::Rcp26)), &grid)?;
            }
        }
    }
    Ok(())
}
