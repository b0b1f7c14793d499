use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::h2opt::{BatteryParams, CurveConfig};
use crate::placement::{PvParams, TurbineSpec};
use crate::ressim::{TechnoEconomics, DEFAULT_REFERENCE_HEIGHT};
use crate::socio::{validate_weights, EmploymentParams, NationalRates, DEFAULT_WEIGHTS, INDICATORS};
use crate::water::{window_for, Case, DesalParams, Rcp, ScenarioSpec, DEFAULT_GROUNDWATER_COST};

/// Config schema shipped with the crate.
pub const CONFIG_SCHEMA: &str = include_str!("../../schema/run-config.schema.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub year: u16,
    pub rcp: Rcp,
    pub case: Case,
}

impl Scenario {
    pub fn water_spec(&self) -> Result<ScenarioSpec> {
        ScenarioSpec::new(self.rcp, self.case, self.year)
    }

    pub fn key(&self) -> String {
        format!("{}_{}_{}", self.rcp.tag(), self.case.as_str(), self.year)
    }

    /// Parses `rcp26_medium_2030`.
    pub fn parse_key(s: &str) -> Result<Scenario> {
        let parts: Vec<&str> = s.split('_').collect();
        let [rcp, case, year] = parts.as_slice() else {
            return Err(Error::invalid(format!("scenario {s:?} must look like rcp26_medium_2030")));
        };
        let year: u16 = year
            .parse()
            .map_err(|_| Error::invalid(format!("bad scenario year in {s:?}")))?;
        Ok(Scenario {
            year,
            rcp: rcp.parse()?,
            case: case.parse()?,
        })
    }
}

/// Input datasets. Relative paths resolve against the config's base directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inputs {
    /// GeoJSON FeatureCollection; each feature has a `gid` and a `country`
    /// property and optionally `elevation_m`.
    pub regions: PathBuf,
    /// Directory of `{source_layer}.geojson` criterion layers.
    pub criteria_dir: PathBuf,
    /// Buffer preferences (JSON list of preference sets).
    pub preferences: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub catalog: Option<PathBuf>,
    /// Directory of `{gid}.csv` hourly weather files.
    pub weather_dir: PathBuf,
    /// Directory of optional `{gid}.csv` hydropower inventories.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hydro_dir: Option<PathBuf>,
    /// Directory of `{var}_{year}_{combo}_{rcp}.asc` water balance grids.
    pub water_dir: PathBuf,
    /// lon, lat center of the equal-area frame the water grids use.
    pub water_grid_center: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coastline: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demographics: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EligibilityConfig {
    /// m
    pub cell_size: f64,
    /// Extra rasterized border beyond the largest buffer, m. Bounds what-if
    /// buffer increases.
    pub whatif_margin_m: f64,
}

impl Default for EligibilityConfig {
    fn default() -> Self {
        Self {
            cell_size: 100.0,
            whatif_margin_m: 2000.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaterConfig {
    /// €/m³
    pub groundwater_cost: f64,
    pub desal: DesalParams,
}

impl Default for WaterConfig {
    fn default() -> Self {
        Self {
            groundwater_cost: DEFAULT_GROUNDWATER_COST,
            desal: DesalParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SocioConfig {
    pub employment: EmploymentParams,
    pub national: NationalRates,
    pub weights: [f64; INDICATORS],
}

impl Default for SocioConfig {
    fn default() -> Self {
        Self {
            employment: EmploymentParams::default(),
            national: NationalRates::default(),
            weights: DEFAULT_WEIGHTS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    pub scenario: Scenario,
    pub inputs: Inputs,
    /// Restricts the run to these gids; all regions when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regions: Option<Vec<String>>,
    /// Base directory for relative input paths. Not part of the run identity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_dir: Option<PathBuf>,
    #[serde(default)]
    pub eligibility: EligibilityConfig,
    #[serde(default)]
    pub turbine: TurbineSpec,
    #[serde(default)]
    pub pv: PvParams,
    #[serde(default = "default_reference_height")]
    pub weather_reference_height: f64,
    #[serde(default)]
    pub techno_economics: TechnoEconomics,
    #[serde(default)]
    pub battery: BatteryParams,
    #[serde(default)]
    pub curve: CurveConfig,
    #[serde(default)]
    pub water: WaterConfig,
    #[serde(default)]
    pub socio: SocioConfig,
}

fn default_reference_height() -> f64 {
    DEFAULT_REFERENCE_HEIGHT
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative inputs resolve against its directory
    /// unless `base_dir` says otherwise.
    pub fn read(path: impl AsRef<Path>) -> Result<RunConfig> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        let dir = path.parent().unwrap_or(Path::new("."));
        cfg.base_dir = Some(match cfg.base_dir.take() {
            Some(b) if b.is_absolute() => b,
            Some(b) => dir.join(b),
            None => dir.to_path_buf(),
        });
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(Error::Config("name must not be empty".into()));
        }
        if !crate::ressim::YEARS.contains(&self.scenario.year) {
            return Err(Error::Config(format!("no cost data for year {}", self.scenario.year)));
        }
        window_for(self.scenario.year).map_err(|e| Error::Config(e.to_string()))?;
        let [lon, lat] = self.inputs.water_grid_center;
        if !(-180.0..=180.0).contains(&lon) || !(-90.0..=90.0).contains(&lat) {
            return Err(Error::Config("water_grid_center must be lon, lat in degrees".into()));
        }
        let e = &self.eligibility;
        if !(e.cell_size > 0.0) || !(e.whatif_margin_m >= 0.0) {
            return Err(Error::Config("cell_size must be positive and whatif_margin_m >= 0".into()));
        }
        if let Some(r) = &self.regions {
            if r.is_empty() {
                return Err(Error::Config("regions must not be empty when given".into()));
            }
        }
        if !(self.weather_reference_height > 0.0) {
            return Err(Error::Config("weather_reference_height must be positive".into()));
        }
        let cfg_err = |e: Error| Error::Config(e.to_string());
        self.turbine.validate().map_err(cfg_err)?;
        if !(self.pv.land_use > 0.0) || !(self.pv.seed_spacing > 0.0) {
            return Err(Error::Config("pv land_use and seed_spacing must be positive".into()));
        }
        self.techno_economics.validate().map_err(cfg_err)?;
        self.curve.validate()?;
        self.water.desal.validate()?;
        if !(self.water.groundwater_cost >= 0.0) {
            return Err(Error::Config("groundwater_cost must be >= 0".into()));
        }
        self.socio.employment.validate().map_err(cfg_err)?;
        validate_weights(&self.socio.weights).map_err(cfg_err)?;
        let b = &self.battery;
        if !(b.efficiency > 0.0 && b.efficiency <= 1.0) || !(b.c_rate > 0.0) {
            return Err(Error::Config("invalid battery parameters".into()));
        }
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        match &self.base_dir {
            Some(base) if p.is_relative() => base.join(p),
            _ => p.to_path_buf(),
        }
    }

    /// Canonical JSON used for the run identity (`base_dir` excluded).
    pub fn identity_json(&self) -> String {
        let mut c = self.clone();
        c.base_dir = None;
        serde_json::to_string(&c).expect("config serializes")
    }
}
