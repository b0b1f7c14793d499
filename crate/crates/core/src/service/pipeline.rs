//! Stage orchestration: eligibility → placement → simulation/clustering →
//! water → optimization → socio, memoized by input digest.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::config::{RunConfig, Scenario};
use super::store::{digest_dir, digest_file, digest_json, now, RegionRecord, RegionStatus, RunManifest, RunStatus, Store};
use crate::eligibility::{
    default_catalog, load_layers, read_catalog, read_preferences, resolve_buffers, BufferMap, CriterionSpec,
    EligibilityResult, PreferenceSet, RegionLayers,
};
use crate::error::{Error, Result};
use crate::grid::vector::parse_feature;
use crate::grid::{format_float_grid, format_mask, read_float_grid, read_mask, rasterize, FloatGrid, Mask, Projection, VectorFeature};
use crate::h2opt::{
    cost_potential_curve, curve_csv_string, CostPotentialCurve, HydroSource, NodeModel, ResSource, WaterBudget,
};
use crate::placement::{circular_mean_deg, place_pv, place_wind};
use crate::ressim::{
    cluster_by_lcoe, default_bins, hydro_hourly, lcoe, read_hydro_csv, read_weather_csv, simulate_pv, simulate_wind,
    Component, GenAsset, LcoeCluster, HOURS_PER_YEAR,
};
use crate::socio::{compute_index, read_demographics_csv, CompositeIndex, RegionDemographics};
use crate::tech::Tech;
use crate::water::{desal_water_cost, region_mean, region_volume, scenario_average, DesalCost, DirSource};

pub const MODULE_VERSIONS: [(&str, &str); 7] = [
    ("eligibility", "1"),
    ("placement", "1"),
    ("ressim", "1"),
    ("water", "1"),
    ("h2opt", "1"),
    ("socio", "1"),
    ("service", "1"),
];

pub const LAYER_NAMES: [&str; 6] = ["eligibility", "lcoe_wind", "lcoe_pv", "sustainable_yield", "lcoh", "socio_composite"];

fn module_versions() -> BTreeMap<String, String> {
    MODULE_VERSIONS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

#[derive(Debug, Clone, Copy, Default)]
pub struct PipelineOptions {
    /// Worker threads for region and raster parallelism; all cores when `None`.
    pub threads: Option<usize>,
}

#[derive(Debug, Clone)]
pub enum RunOutcome {
    /// A finished run with the same identity already existed.
    Cached(RunManifest),
    Completed(RunManifest),
}

impl RunOutcome {
    pub fn manifest(&self) -> &RunManifest {
        match self {
            RunOutcome::Cached(m) | RunOutcome::Completed(m) => m,
        }
    }
}

/// Content digests of every input dataset.
pub fn input_digests(config: &RunConfig) -> Result<BTreeMap<String, String>> {
    let i = &config.inputs;
    let mut d = BTreeMap::new();
    let file = |p: &Path| digest_file(&config.resolve(p));
    let dir = |p: &Path| {
        let r = config.resolve(p);
        if r.is_dir() {
            digest_dir(&r)
        } else {
            Err(Error::NotFound(format!("input directory {}", r.display())))
        }
    };
    d.insert("regions".into(), file(&i.regions)?);
    d.insert("criteria_dir".into(), dir(&i.criteria_dir)?);
    d.insert("preferences".into(), file(&i.preferences)?);
    d.insert("weather_dir".into(), dir(&i.weather_dir)?);
    d.insert("water_dir".into(), dir(&i.water_dir)?);
    if let Some(p) = &i.catalog {
        d.insert("catalog".into(), file(p)?);
    }
    if let Some(p) = &i.hydro_dir {
        d.insert("hydro_dir".into(), dir(p)?);
    }
    if let Some(p) = &i.coastline {
        d.insert("coastline".into(), file(p)?);
    }
    if let Some(p) = &i.demographics {
        d.insert("demographics".into(), file(p)?);
    }
    Ok(d)
}

/// Run identity: digest of the canonical config, input digests and module versions.
pub fn compute_run_id(config: &RunConfig, digests: &BTreeMap<String, String>) -> String {
    let id = digest_json(&(config.identity_json(), digests, module_versions()));
    id[..16].to_string()
}

/// Region feature as parsed from the input collection.
struct RegionInput {
    gid: String,
    raw: Value,
    feature: Result<VectorFeature>,
}

fn load_regions(config: &RunConfig) -> Result<Vec<RegionInput>> {
    let path = config.resolve(&config.inputs.regions);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::file(&path, e))?;
    let doc: Value = serde_json::from_str(&text)?;
    let features = doc
        .get("features")
        .and_then(Value::as_array)
        .filter(|_| doc.get("type").and_then(Value::as_str) == Some("FeatureCollection"))
        .ok_or_else(|| Error::Data(format!("{}: expected a FeatureCollection", path.display())))?;
    let mut out = Vec::new();
    for (k, f) in features.iter().enumerate() {
        let gid = match f.pointer("/properties/gid") {
            Some(Value::String(s)) => s.clone(),
            Some(Value::Number(n)) => n.to_string(),
            _ => format!("feature-{k}"),
        };
        let feature = match parse_feature(f) {
            Ok(Some(v)) => Ok(v),
            Ok(None) => Err(Error::Geometry(format!("{gid}: missing geometry"))),
            Err(e) => Err(e),
        };
        out.push(RegionInput {
            gid,
            raw: f.clone(),
            feature,
        });
    }
    if let Some(selected) = &config.regions {
        for gid in selected {
            if !out.iter().any(|r| &r.gid == gid) {
                return Err(Error::NotFound(format!("region {gid} in {}", path.display())));
            }
        }
        out.retain(|r| selected.contains(&r.gid));
    }
    let mut seen = std::collections::BTreeSet::new();
    for r in &out {
        if !seen.insert(r.gid.clone()) {
            return Err(Error::Data(format!("duplicate region gid {}", r.gid)));
        }
    }
    Ok(out)
}

/// Inputs shared by all regions.
struct Shared {
    catalog: Vec<CriterionSpec>,
    prefs: Vec<PreferenceSet>,
    layers: BTreeMap<String, Vec<VectorFeature>>,
    coast: Option<Vec<VectorFeature>>,
    sy: FloatGrid,
    sy_key: String,
    water_projection: Projection,
    digests: BTreeMap<String, String>,
}

// ---------------------------------------------------------------------------
// Stage outputs

#[derive(Debug, Clone, Serialize, Deserialize)]
struct EligibilityStage {
    projection: Projection,
    margin_m: f64,
    layer_ids: Vec<u8>,
    nonempty: Vec<u8>,
    buffers: BTreeMap<Tech, BufferMap>,
    results: BTreeMap<Tech, EligibilityResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TechResources {
    pub tech: Tech,
    pub units: usize,
    pub capacity_mw: f64,
    pub eligible_area_km2: f64,
    /// Capacity-weighted mean capacity factor.
    pub mean_cf: Option<f64>,
    /// Energy-weighted mean LCOE, €/kWh.
    pub lcoe: Option<f64>,
    pub clusters: Vec<LcoeCluster>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceStage {
    pub main_wind_direction_deg: f64,
    pub wind: TechResources,
    pub pv: TechResources,
    pub hydro: Vec<HydroSource>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaterStage {
    /// mm/yr, signed
    pub sy_mean_mm: Option<f64>,
    /// m³/yr of positive yield
    pub groundwater_m3: f64,
    pub desal: Option<DesalCost>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub desal_note: Option<String>,
}

struct RegionOutput {
    record: RegionRecord,
    eligibility: Option<EligibilityStage>,
    resources: Option<ResourceStage>,
    water: Option<WaterStage>,
    curve: Option<CostPotentialCurve>,
    hits: usize,
    misses: usize,
}

/// Memo wrapper counting hits and misses.
struct Memo<'a> {
    store: &'a Store,
    hits: usize,
    misses: usize,
}

impl Memo<'_> {
    fn get_or<T, F>(&mut self, stage: &str, key: &str, compute: F) -> Result<T>
    where
        T: Serialize + for<'de> Deserialize<'de>,
        F: FnOnce() -> Result<T>,
    {
        if let Some(v) = self.store.memo_get(stage, key) {
            self.hits += 1;
            return Ok(v);
        }
        self.misses += 1;
        let v = compute()?;
        self.store.memo_put(stage, key, &v)?;
        Ok(v)
    }
}

fn stage_key(stage: &str, parts: &impl Serialize) -> String {
    let version = MODULE_VERSIONS.iter().find(|(k, _)| *k == stage).map_or("0", |(_, v)| v);
    digest_json(&(stage, version, parts))
}

// ---------------------------------------------------------------------------
// Eligibility

fn eligibility_stage(
    memo: &mut Memo,
    config: &RunConfig,
    shared: &Shared,
    gid: &str,
    region: &VectorFeature,
) -> Result<(String, EligibilityStage)> {
    let country = region.property("country").unwrap_or("").to_string();
    let mut buffers = BTreeMap::new();
    for tech in Tech::ALL {
        buffers.insert(tech, resolve_buffers(&shared.prefs, &country, tech, &shared.catalog)?);
    }
    let max_buffer = buffers.values().flat_map(|b| b.values()).fold(0.0f64, |m, &v| m.max(v));
    let margin = max_buffer + config.eligibility.whatif_margin_m;
    let key = stage_key(
        "eligibility",
        &(
            gid,
            crate::grid::vector::geometry_to_json(&region.geometry),
            &shared.catalog,
            shared.digests.get("criteria_dir"),
            &buffers,
            config.eligibility.cell_size,
            margin,
        ),
    );
    let store = memo.store;
    let dir = store.memo_dir("eligibility", &key);
    let stage = memo.get_or("eligibility", &key, || {
        let layers = RegionLayers::build(gid, region, &shared.catalog, &shared.layers, config.eligibility.cell_size, margin)?;
        let mut results = BTreeMap::new();
        for tech in Tech::ALL {
            let r = layers.evaluate(&buffers[&tech], tech)?;
            store.memo_write("eligibility", &key, &format!("mask_{tech}.asc"), format_mask(r.mask()).as_bytes())?;
            results.insert(tech, r);
        }
        store.memo_write("eligibility", &key, "region.asc", format_mask(&layers.region_mask).as_bytes())?;
        let mut nonempty = Vec::new();
        for (id, m) in &layers.layers {
            if m.cells().iter().any(|&c| c) {
                store.memo_write("eligibility", &key, &format!("layer_{id}.asc"), format_mask(m).as_bytes())?;
                nonempty.push(*id);
            }
        }
        Ok(EligibilityStage {
            projection: layers.projection,
            margin_m: margin,
            layer_ids: layers.layers.keys().copied().collect(),
            nonempty,
            buffers: buffers.clone(),
            results,
        })
    })?;
    let mut stage = stage;
    for (tech, r) in stage.results.iter_mut() {
        if r.mask.is_none() {
            r.mask = Some(read_mask(dir.join(format!("mask_{tech}.asc")))?);
        }
    }
    Ok((key, stage))
}

fn load_region_layers(store: &Store, key: &str, gid: &str) -> Result<(RegionLayers, EligibilityStage)> {
    let stage: EligibilityStage = store
        .memo_get("eligibility", key)
        .ok_or_else(|| Error::NotFound(format!("rasterized layers for {gid}")))?;
    let dir = store.memo_dir("eligibility", key);
    let region_mask = read_mask(dir.join("region.asc"))?;
    let spec = *region_mask.spec();
    let mut layers = BTreeMap::new();
    for id in &stage.layer_ids {
        let m = if stage.nonempty.contains(id) {
            read_mask(dir.join(format!("layer_{id}.asc")))?
        } else {
            Mask::new(spec)
        };
        layers.insert(*id, m);
    }
    Ok((
        RegionLayers {
            region_id: gid.to_string(),
            projection: stage.projection,
            region_mask,
            layers,
            margin_m: stage.margin_m,
        },
        stage,
    ))
}

// ---------------------------------------------------------------------------
// Resources

fn tech_resources(
    tech: Tech,
    items_capacity: Vec<f64>,
    cf: &[f64],
    eligible_area_km2: f64,
    config: &RunConfig,
) -> Result<TechResources> {
    let te = &config.techno_economics;
    let year = config.scenario.year;
    let mut assets = Vec::new();
    for cap in items_capacity {
        if cap <= 0.0 {
            continue;
        }
        let energy = cap * cf.iter().sum::<f64>();
        match lcoe(cap, energy, te, Component::from(tech), year) {
            Ok(l) => assets.push(GenAsset::new(tech, cap, cf.to_vec(), l)),
            Err(Error::NoYield) => {}
            Err(e) => return Err(e),
        }
    }
    let units = assets.len();
    let capacity_mw: f64 = assets.iter().map(|a| a.capacity).sum();
    let energy: f64 = assets.iter().map(|a| a.annual_energy).sum();
    let clusters = if assets.is_empty() {
        Vec::new()
    } else {
        cluster_by_lcoe(&assets, default_bins(tech))?
    };
    let mean_cf = (capacity_mw > 0.0).then(|| energy / (capacity_mw * HOURS_PER_YEAR as f64));
    let lcoe = (energy > 0.0).then(|| assets.iter().map(|a| a.lcoe * a.annual_energy).sum::<f64>() / energy);
    Ok(TechResources {
        tech,
        units,
        capacity_mw,
        eligible_area_km2,
        mean_cf,
        lcoe,
        clusters,
    })
}

fn resource_stage(
    memo: &mut Memo,
    config: &RunConfig,
    gid: &str,
    elig_key: &str,
    elig: &EligibilityStage,
) -> Result<(String, ResourceStage)> {
    let weather_path = config.resolve(&config.inputs.weather_dir).join(format!("{gid}.csv"));
    let weather_digest = digest_file(&weather_path)
        .map_err(|_| Error::NotFound(format!("weather for region {gid} ({})", weather_path.display())))?;
    let hydro_path = config
        .inputs
        .hydro_dir
        .as_ref()
        .map(|d| config.resolve(d).join(format!("{gid}.csv")))
        .filter(|p| p.is_file());
    let hydro_digest = hydro_path.as_ref().map(|p| digest_file(p)).transpose()?;
    let key = stage_key(
        "ressim",
        &(
            elig_key,
            &weather_digest,
            &hydro_digest,
            &config.turbine,
            &config.pv,
            &config.techno_economics,
            config.scenario.year,
            config.weather_reference_height,
        ),
    );
    let stage = memo.get_or("ressim", &key, || {
        let weather = read_weather_csv(&weather_path, config.weather_reference_height)?;
        let main_dir = weather
            .wind_direction
            .as_deref()
            .and_then(circular_mean_deg)
            .map(|d| if d >= 360.0 { 0.0 } else { d })
            .unwrap_or(0.0);
        let wind_mask = elig.results[&Tech::Wind].mask();
        let pv_mask = elig.results[&Tech::Pv].mask();
        let turbines = place_wind(wind_mask, &config.turbine, main_dir)?;
        let parks = place_pv(pv_mask, &config.pv)?;
        let wind_cf = simulate_wind(&weather, &config.turbine)?;
        let pv_cf = simulate_pv(&weather);
        let wind = tech_resources(
            Tech::Wind,
            turbines.items.iter().map(|i| i.capacity).collect(),
            &wind_cf,
            wind_mask.area_km2(),
            config,
        )?;
        let pv = tech_resources(
            Tech::Pv,
            parks.items.iter().map(|i| i.capacity).collect(),
            &pv_cf,
            pv_mask.area_km2(),
            config,
        )?;
        let mut hydro = Vec::new();
        if let Some(p) = &hydro_path {
            for plant in read_hydro_csv(p)? {
                hydro.push(HydroSource {
                    series: hydro_hourly(&plant, HOURS_PER_YEAR)?,
                    id: plant.id,
                    kind: plant.kind,
                    capacity_mw: plant.capacity_mw,
                });
            }
        }
        Ok(ResourceStage {
            main_wind_direction_deg: main_dir,
            wind,
            pv,
            hydro,
        })
    })?;
    Ok((key, stage))
}

// ---------------------------------------------------------------------------
// Water

fn water_stage(
    memo: &mut Memo,
    config: &RunConfig,
    shared: &Shared,
    region: &VectorFeature,
    resources: &ResourceStage,
) -> Result<(String, WaterStage)> {
    let elevation: f64 = match region.property("elevation_m") {
        Some(s) => s
            .parse()
            .map_err(|_| Error::Data(format!("elevation_m {s:?} is not a number")))?,
        None => 0.0,
    };
    let key = stage_key(
        "water",
        &(
            &shared.sy_key,
            crate::grid::vector::geometry_to_json(&region.geometry),
            shared.digests.get("coastline"),
            elevation,
            &config.water,
            resources.pv.lcoe,
        ),
    );
    let stage = memo.get_or("water", &key, || {
        let planar = region.project(&shared.water_projection)?;
        let mask = rasterize(std::slice::from_ref(&planar), shared.sy.spec());
        let (sy_mean_mm, groundwater_m3) = if mask.popcount() == 0 {
            (None, 0.0)
        } else {
            (region_mean(&shared.sy, &mask)?, region_volume(&shared.sy, &mask)?)
        };
        let (desal, desal_note) = match (&shared.coast, resources.pv.lcoe) {
            (None, _) => (None, Some("no coastline dataset".to_string())),
            (Some(_), None) => (None, Some("no PV potential to price desalination power".to_string())),
            (Some(coast), Some(solar)) => match desal_water_cost(region, coast, elevation, solar, &config.water.desal) {
                Ok(c) => (Some(c), None),
                Err(Error::NoCoastalAccess(d)) => (None, Some(format!("no coastal access ({d} km)"))),
                Err(e) => return Err(e),
            },
        };
        Ok(WaterStage {
            sy_mean_mm,
            groundwater_m3,
            desal,
            desal_note,
        })
    })?;
    Ok((key, stage))
}

/// Per-region groundwater summary for one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaterSummary {
    pub gid: String,
    pub sy_mean_mm: Option<f64>,
    pub groundwater_m3: f64,
}

/// Sustainable yield per configured region for `scenario`, without touching a store.
pub fn water_summary(config: &RunConfig, scenario: Scenario) -> Result<Vec<WaterSummary>> {
    let spec = scenario.water_spec()?;
    let r = scenario_average(&DirSource::new(config.resolve(&config.inputs.water_dir)), &spec)?;
    let [lon, lat] = config.inputs.water_grid_center;
    let proj = Projection::new(lon, lat)?;
    let mut out = Vec::new();
    for region in load_regions(config)? {
        let Ok(feature) = region.feature else {
            log::warn!("{}: skipped, unreadable geometry", region.gid);
            continue;
        };
        let planar = feature.project(&proj)?;
        let mask = rasterize(std::slice::from_ref(&planar), r.sy.spec());
        let (sy_mean_mm, groundwater_m3) = if mask.popcount() == 0 {
            (None, 0.0)
        } else {
            (region_mean(&r.sy, &mask)?, region_volume(&r.sy, &mask)?)
        };
        out.push(WaterSummary {
            gid: region.gid,
            sy_mean_mm,
            groundwater_m3,
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Optimization

pub fn node_model(config: &RunConfig, gid: &str, resources: &ResourceStage, water: &WaterStage) -> NodeModel {
    let mut node = NodeModel::new(gid, config.scenario.year);
    for c in resources.wind.clusters.iter().chain(&resources.pv.clusters) {
        node.sources.push(ResSource {
            tech: c.tech,
            potential_mw: c.capacity,
            cf_series: c.cf_series.clone(),
            lcoe: Some(c.lcoe),
        });
    }
    node.hydro = resources.hydro.clone();
    node.water = WaterBudget {
        groundwater_m3: water.groundwater_m3,
        groundwater_cost: config.water.groundwater_cost,
        desal_cost: water.desal.map(|d| d.delivered),
    };
    node.techno_economics = config.techno_economics.clone();
    node.battery = config.battery.clone();
    node
}

fn curve_stage(memo: &mut Memo, config: &RunConfig, node: &NodeModel) -> Result<(String, CostPotentialCurve)> {
    let key = stage_key("h2opt", &(node, &config.curve));
    let curve = memo.get_or("h2opt", &key, || {
        if node.sources.is_empty() && node.hydro.is_empty() {
            return Ok(CostPotentialCurve {
                region_id: node.region_id.clone(),
                year: node.year,
                points: Vec::new(),
                end: crate::h2opt::CurveEnd::InfeasibleAtNextStep,
                diagnostic: Some("no renewable potential".into()),
            });
        }
        cost_potential_curve(node, &config.curve)
    })?;
    Ok((key, curve))
}

// ---------------------------------------------------------------------------

fn process_region(store: &Store, config: &RunConfig, shared: &Shared, input: &RegionInput) -> RegionOutput {
    let mut memo = Memo {
        store,
        hits: 0,
        misses: 0,
    };
    let mut out = RegionOutput {
        record: RegionRecord {
            gid: input.gid.clone(),
            status: RegionStatus::Failed,
            error: None,
            stages: BTreeMap::new(),
        },
        eligibility: None,
        resources: None,
        water: None,
        curve: None,
        hits: 0,
        misses: 0,
    };
    let result = (|| -> Result<()> {
        let region = match &input.feature {
            Ok(f) => f,
            Err(Error::Geometry(m)) => return Err(Error::Geometry(m.clone())),
            Err(e) => return Err(Error::Geometry(e.to_string())),
        };
        let (ek, elig) = eligibility_stage(&mut memo, config, shared, &input.gid, region)?;
        out.record.stages.insert("eligibility".into(), ek.clone());
        let (rk, res) = resource_stage(&mut memo, config, &input.gid, &ek, &elig)?;
        out.record.stages.insert("ressim".into(), rk);
        out.eligibility = Some(elig);
        let (wk, water) = water_stage(&mut memo, config, shared, region, &res)?;
        out.record.stages.insert("water".into(), wk);
        let node = node_model(config, &input.gid, &res, &water);
        let (ck, curve) = curve_stage(&mut memo, config, &node)?;
        out.record.stages.insert("h2opt".into(), ck);
        out.resources = Some(res);
        out.water = Some(water);
        out.curve = Some(curve);
        Ok(())
    })();
    match result {
        Ok(()) => out.record.status = RegionStatus::Done,
        Err(e) => {
            log::warn!("region {} failed: {e}", input.gid);
            out.record.error = Some(e.to_string());
        }
    }
    out.hits = memo.hits;
    out.misses = memo.misses;
    out
}

fn load_shared(store: &Store, config: &RunConfig, digests: BTreeMap<String, String>) -> Result<Shared> {
    let i = &config.inputs;
    let catalog = match &i.catalog {
        Some(p) => read_catalog(config.resolve(p))?,
        None => default_catalog(),
    };
    let prefs = read_preferences(config.resolve(&i.preferences))?;
    let layers = load_layers(config.resolve(&i.criteria_dir), &catalog)?;
    let coast = i
        .coastline
        .as_ref()
        .map(|p| crate::grid::vector::read_geojson(config.resolve(p)))
        .transpose()?;
    let spec = config.scenario.water_spec()?;
    let sy_key = stage_key("water", &("scenario", digests.get("water_dir"), spec.key()));
    let sy_path = store.memo_dir("water", &sy_key).join("sy.asc");
    let sy = match read_float_grid(&sy_path) {
        Ok(g) => g,
        Err(_) => {
            let r = scenario_average(&DirSource::new(config.resolve(&i.water_dir)), &spec)?;
            store.memo_write("water", &sy_key, "sy.asc", format_float_grid(&r.sy).as_bytes())?;
            r.sy
        }
    };
    let [lon, lat] = i.water_grid_center;
    Ok(Shared {
        catalog,
        prefs,
        layers,
        coast,
        sy,
        sy_key,
        water_projection: Projection::new(lon, lat)?,
        digests,
    })
}

// ---------------------------------------------------------------------------
// Layers

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerFile {
    pub name: String,
    pub unit: String,
    pub run_id: String,
    pub scenario: Scenario,
    /// gid to value; `null` for regions without one.
    pub values: BTreeMap<String, Option<f64>>,
    /// Extra per-region properties.
    pub properties: BTreeMap<String, Map<String, Value>>,
}

fn layer(name: &str, unit: &str, run_id: &str, scenario: Scenario) -> LayerFile {
    LayerFile {
        name: name.into(),
        unit: unit.into(),
        run_id: run_id.into(),
        scenario,
        values: BTreeMap::new(),
        properties: BTreeMap::new(),
    }
}

fn props(v: Value) -> Map<String, Value> {
    match v {
        Value::Object(m) => m,
        _ => Map::new(),
    }
}

fn build_layers(run_id: &str, scenario: Scenario, outputs: &[RegionOutput], socio: Option<&CompositeIndex>) -> Vec<LayerFile> {
    let mut elig = layer("eligibility", "fraction", run_id, scenario);
    let mut lw = layer("lcoe_wind", "EUR/kWh", run_id, scenario);
    let mut lp = layer("lcoe_pv", "EUR/kWh", run_id, scenario);
    let mut sy = layer("sustainable_yield", "mm/yr", run_id, scenario);
    let mut lcoh = layer("lcoh", "EUR/kg", run_id, scenario);
    let mut soc = layer("socio_composite", "z", run_id, scenario);
    for o in outputs {
        let gid = o.record.gid.clone();
        let done = o.record.status == RegionStatus::Done;
        let e = o.eligibility.as_ref().filter(|_| done);
        elig.values.insert(
            gid.clone(),
            e.and_then(|e| {
                let w = e.results[&Tech::Wind].mask();
                let p = e.results[&Tech::Pv].mask();
                let n = e.results[&Tech::Wind].region_cells;
                w.or(p).ok().map(|u| u.popcount() as f64 / n as f64)
            }),
        );
        if let Some(e) = e {
            elig.properties.insert(
                gid.clone(),
                props(json!({
                    "eligible_fraction_wind": e.results[&Tech::Wind].eligible_fraction,
                    "eligible_fraction_pv": e.results[&Tech::Pv].eligible_fraction,
                })),
            );
        }
        let r = o.resources.as_ref().filter(|_| done);
        for (lay, tr) in [(&mut lw, r.map(|r| &r.wind)), (&mut lp, r.map(|r| &r.pv))] {
            lay.values.insert(gid.clone(), tr.and_then(|t| t.lcoe));
            if let Some(t) = tr {
                lay.properties.insert(
                    gid.clone(),
                    props(json!({"capacity_mw": t.capacity_mw, "units": t.units, "mean_cf": t.mean_cf})),
                );
            }
        }
        let w = o.water.as_ref().filter(|_| done);
        sy.values.insert(gid.clone(), w.and_then(|w| w.sy_mean_mm));
        if let Some(w) = w {
            sy.properties.insert(
                gid.clone(),
                props(json!({"groundwater_m3": w.groundwater_m3, "desal_cost": w.desal.map(|d| d.delivered)})),
            );
        }
        let c = o.curve.as_ref().filter(|_| done);
        lcoh.values.insert(gid.clone(), c.and_then(|c| c.points.first().map(|p| p.lcoh)));
        if let Some(c) = c {
            lcoh.properties.insert(
                gid.clone(),
                props(json!({"steps": c.points.len(), "max_demand_t": c.max_demand_t(), "end": c.end})),
            );
        }
        let s = socio.and_then(|s| s.regions.iter().find(|r| r.gid == gid));
        soc.values.insert(gid.clone(), s.map(|s| s.composite));
        if let Some(s) = s {
            soc.properties.insert(gid, props(json!({"class": s.class, "raw": s.raw, "z": s.z})));
        }
    }
    vec![elig, lw, lp, sy, lcoh, soc]
}

fn socio_stage(
    memo: &mut Memo,
    config: &RunConfig,
    digests: &BTreeMap<String, String>,
    done: &[String],
) -> Result<Option<CompositeIndex>> {
    let Some(path) = &config.inputs.demographics else {
        return Ok(None);
    };
    let key = stage_key("socio", &(digests.get("demographics"), &config.socio, done));
    memo.get_or("socio", &key, || {
        let rows: Vec<RegionDemographics> = read_demographics_csv(config.resolve(path))?
            .into_iter()
            .filter(|d| done.contains(&d.gid))
            .collect();
        if rows.len() < 2 {
            log::warn!("socio index needs at least two regions with demographics; layer left empty");
            return Ok(None);
        }
        compute_index(&rows, &config.socio.national, &config.socio.employment, config.socio.weights).map(Some)
    })
}

fn write_outputs(store: &Store, run_id: &str, outputs: &[RegionOutput], layers: &[LayerFile], inputs: &[RegionInput]) -> Result<()> {
    for o in outputs {
        let gid = &o.record.gid;
        if let Some(e) = &o.eligibility {
            for (tech, r) in &e.results {
                store.write_run_file(run_id, &format!("regions/{gid}/eligibility_{tech}.json"), &serde_json::to_vec_pretty(r)?)?;
                store.write_run_file(run_id, &format!("regions/{gid}/eligibility_{tech}.asc"), format_mask(r.mask()).as_bytes())?;
            }
        }
        if let Some(r) = &o.resources {
            let summary = json!({
                "main_wind_direction_deg": r.main_wind_direction_deg,
                "wind": {"units": r.wind.units, "capacity_mw": r.wind.capacity_mw, "mean_cf": r.wind.mean_cf, "lcoe": r.wind.lcoe, "clusters": r.wind.clusters.len()},
                "pv": {"units": r.pv.units, "capacity_mw": r.pv.capacity_mw, "mean_cf": r.pv.mean_cf, "lcoe": r.pv.lcoe, "clusters": r.pv.clusters.len()},
                "hydro_plants": r.hydro.len(),
            });
            store.write_run_file(run_id, &format!("regions/{gid}/resources.json"), &serde_json::to_vec_pretty(&summary)?)?;
        }
        if let Some(w) = &o.water {
            store.write_run_file(run_id, &format!("regions/{gid}/water.json"), &serde_json::to_vec_pretty(w)?)?;
        }
        if let Some(c) = &o.curve {
            store.write_run_file(run_id, &format!("regions/{gid}/curve.json"), &serde_json::to_vec_pretty(c)?)?;
            store.write_run_file(run_id, &format!("regions/{gid}/curve.csv"), curve_csv_string(c)?.as_bytes())?;
        }
    }
    for l in layers {
        store.write_run_file(run_id, &format!("layers/{}.json", l.name), &serde_json::to_vec_pretty(l)?)?;
    }
    let features: Vec<Value> = inputs
        .iter()
        .map(|r| {
            let mut f = r.raw.clone();
            if r.feature.is_err() {
                f["geometry"] = Value::Null;
            }
            f
        })
        .collect();
    let fc = crate::grid::vector::feature_collection(features);
    store.write_run_file(run_id, "regions.geojson", &serde_json::to_vec(&fc)?)?;
    Ok(())
}

/// Identity of a config without running it.
pub fn prepare(config: &RunConfig) -> Result<(String, BTreeMap<String, String>)> {
    config.validate()?;
    let digests = input_digests(config)?;
    Ok((compute_run_id(config, &digests), digests))
}

pub fn new_manifest(config: &RunConfig, run_id: &str, digests: BTreeMap<String, String>) -> RunManifest {
    let t = now();
    RunManifest {
        run_id: run_id.to_string(),
        name: config.name.clone(),
        scenario: config.scenario,
        status: RunStatus::Pending,
        regions: Vec::new(),
        module_versions: module_versions(),
        input_digests: digests,
        layers: Vec::new(),
        created_at: t.clone(),
        updated_at: t,
        cache_hits: 0,
        cache_misses: 0,
        error: None,
    }
}

/// Runs every stage for every region and writes the run to the store.
///
/// A run whose identity is already done in the store is returned as cached
/// without recomputation.
pub fn run_pipeline(store: &Store, config: &RunConfig, opts: PipelineOptions) -> Result<RunOutcome> {
    let (run_id, digests) = prepare(config)?;
    if let Ok(m) = store.read_manifest(&run_id) {
        if m.status == RunStatus::Done {
            return Ok(RunOutcome::Cached(m));
        }
    }
    let mut manifest = new_manifest(config, &run_id, digests.clone());
    store.write_manifest(&manifest)?;
    execute(store, config, &mut manifest, opts)?;
    Ok(RunOutcome::Completed(manifest))
}

/// Executes a pending manifest to completion.
pub fn execute(store: &Store, config: &RunConfig, manifest: &mut RunManifest, opts: PipelineOptions) -> Result<()> {
    manifest.advance(RunStatus::Running)?;
    store.write_manifest(manifest)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = opts.threads {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder.build().map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let result = pool.install(|| run_stages(store, config, manifest));
    if let Err(e) = &result {
        manifest.error = Some(e.to_string());
        manifest.advance(RunStatus::Failed)?;
        store.write_manifest(manifest)?;
    }
    result
}

fn run_stages(store: &Store, config: &RunConfig, manifest: &mut RunManifest) -> Result<()> {
    store.write_run_file(&manifest.run_id, "config.json", config.identity_json().as_bytes())?;
    let regions = load_regions(config)?;
    let shared = load_shared(store, config, manifest.input_digests.clone())?;
    let outputs: Vec<RegionOutput> = regions
        .par_iter()
        .map(|r| process_region(store, config, &shared, r))
        .collect();
    let done: Vec<String> = outputs
        .iter()
        .filter(|o| o.record.status == RegionStatus::Done)
        .map(|o| o.record.gid.clone())
        .collect();
    let mut memo = Memo {
        store,
        hits: 0,
        misses: 0,
    };
    let socio = socio_stage(&mut memo, config, &shared.digests, &done)?;
    let layers = build_layers(&manifest.run_id, config.scenario, &outputs, socio.as_ref());
    write_outputs(store, &manifest.run_id, &outputs, &layers, &regions)?;
    manifest.cache_hits = memo.hits + outputs.iter().map(|o| o.hits).sum::<usize>();
    manifest.cache_misses = memo.misses + outputs.iter().map(|o| o.misses).sum::<usize>();
    manifest.regions = outputs.into_iter().map(|o| o.record).collect();
    manifest.layers = layers.iter().map(|l| l.name.clone()).collect();
    manifest.advance(RunStatus::Done)?;
    store.write_manifest(manifest)
}

// ---------------------------------------------------------------------------
// Queries on finished runs

pub fn read_layer(store: &Store, run_id: &str, name: &str) -> Result<LayerFile> {
    let bytes = store.read_run_file(run_id, &format!("layers/{name}.json"))?;
    Ok(serde_json::from_slice(&bytes)?)
}

/// GeoJSON FeatureCollection of a layer with `gid`, `value` and `unit` on
/// every feature.
pub fn layer_geojson(store: &Store, run_id: &str, name: &str) -> Result<Value> {
    let layer = read_layer(store, run_id, name)?;
    let regions: Value = serde_json::from_slice(&store.read_run_file(run_id, "regions.geojson")?)?;
    let mut features = Vec::new();
    for f in regions["features"].as_array().into_iter().flatten() {
        let gid = match f.pointer("/properties/gid") {
            Some(Value::String(s)) => s.clone(),
            Some(Value::Number(n)) => n.to_string(),
            _ => continue,
        };
        let mut p = Map::new();
        p.insert("gid".into(), json!(gid));
        p.insert("value".into(), json!(layer.values.get(&gid).copied().flatten()));
        p.insert("unit".into(), json!(layer.unit));
        if let Some(extra) = layer.properties.get(&gid) {
            for (k, v) in extra {
                p.insert(k.clone(), v.clone());
            }
        }
        features.push(json!({"type": "Feature", "geometry": f["geometry"].clone(), "properties": p}));
    }
    Ok(json!({
        "type": "FeatureCollection",
        "name": layer.name,
        "run_id": layer.run_id,
        "scenario": layer.scenario,
        "unit": layer.unit,
        "features": features,
    }))
}

pub const LAYER_CSV_HEADER: &str = "gid,value,unit";

pub fn layer_csv(store: &Store, run_id: &str, name: &str) -> Result<String> {
    let layer = read_layer(store, run_id, name)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(LAYER_CSV_HEADER.split(','))?;
    for (gid, v) in &layer.values {
        w.write_record([gid.as_str(), &v.map(|x| x.to_string()).unwrap_or_default(), &layer.unit])?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?).expect("utf-8"))
}

pub fn read_curve(store: &Store, run_id: &str, gid: &str) -> Result<CostPotentialCurve> {
    let bytes = store.read_run_file(run_id, &format!("regions/{gid}/curve.json"))?;
    Ok(serde_json::from_slice(&bytes)?)
}

pub fn read_curve_csv(store: &Store, run_id: &str, gid: &str) -> Result<String> {
    let bytes = store.read_run_file(run_id, &format!("regions/{gid}/curve.csv"))?;
    Ok(String::from_utf8_lossy(&bytes).into_owned())
}

pub fn read_eligibility(store: &Store, run_id: &str, gid: &str, tech: Tech) -> Result<EligibilityResult> {
    let bytes = store.read_run_file(run_id, &format!("regions/{gid}/eligibility_{tech}.json"))?;
    Ok(serde_json::from_slice(&bytes)?)
}

/// Most recent done run containing `gid` as a done region.
pub fn latest_run_with_region(store: &Store, gid: &str) -> Result<RunManifest> {
    store
        .list_runs()?
        .into_iter()
        .rev()
        .find(|m| m.status == RunStatus::Done && m.region(gid).is_some_and(|r| r.status == RegionStatus::Done))
        .ok_or_else(|| Error::NotFound(format!("no finished run contains region {gid}")))
}

/// Recomputes one region's eligibility with buffer overrides on the
/// rasterized layers of a finished run. Nothing is written.
pub fn whatif_eligibility(store: &Store, run_id: &str, gid: &str, tech: Tech, overrides: &BufferMap) -> Result<EligibilityResult> {
    let m = store.read_manifest(run_id)?;
    let rec = m
        .region(gid)
        .filter(|r| r.status == RegionStatus::Done)
        .ok_or_else(|| Error::NotFound(format!("region {gid} in run {run_id}")))?;
    let key = rec
        .stages
        .get("eligibility")
        .ok_or_else(|| Error::NotFound(format!("eligibility stage for {gid}")))?;
    let (layers, stage) = load_region_layers(store, key, gid)?;
    let mut buffers = stage.buffers[&tech].clone();
    for (id, &b) in overrides {
        if !buffers.contains_key(id) {
            return Err(Error::invalid(format!("unknown criterion id {id}")));
        }
        if !(b >= 0.0) || !b.is_finite() {
            return Err(Error::invalid(format!("buffer for criterion {id} must be >= 0, got {b}")));
        }
        buffers.insert(*id, b);
    }
    layers.evaluate(&buffers, tech)
}
