use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::balance::{recharge, sustainable_yield, Case, WaterBalanceInputs};
use crate::error::{Error, Result};
use crate::grid::{read_float_grid, FloatGrid, GridSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Rcp {
    #[serde(rename = "rcp26")]
    Rcp26,
    #[serde(rename = "rcp85")]
    Rcp85,
}

impl Rcp {
    pub fn tag(self) -> &'static str {
        match self {
            Rcp::Rcp26 => "rcp26",
            Rcp::Rcp85 => "rcp85",
        }
    }
}

impl fmt::Display for Rcp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl std::str::FromStr for Rcp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rcp26" | "2.6" | "rcp2.6" => Ok(Rcp::Rcp26),
            "rcp85" | "8.5" | "rcp8.5" => Ok(Rcp::Rcp85),
            _ => Err(Error::invalid(format!("unknown RCP {s:?}"))),
        }
    }
}

/// Number of climate model combinations averaged per year.
pub const COMBOS: u8 = 6;

pub const VARIABLES: [&str; 5] = ["p", "i", "et", "q", "swu"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub rcp: Rcp,
    pub case: Case,
    pub target_year: u16,
}

/// Averaging window (inclusive) for a target year.
pub fn window_for(target_year: u16) -> Result<(u16, u16)> {
    match target_year {
        2020 => Ok((2015, 2035)),
        2030 => Ok((2015, 2045)),
        2050 => Ok((2036, 2065)),
        y => Err(Error::invalid(format!("no averaging window for target year {y} (use 2020, 2030 or 2050)"))),
    }
}

impl ScenarioSpec {
    pub fn new(rcp: Rcp, case: Case, target_year: u16) -> Result<Self> {
        window_for(target_year)?;
        Ok(Self { rcp, case, target_year })
    }

    pub fn window(&self) -> Result<(u16, u16)> {
        window_for(self.target_year)
    }

    /// Short key such as `rcp26_medium_2030`.
    pub fn key(&self) -> String {
        format!("{}_{}_{}", self.rcp.tag(), self.case.as_str(), self.target_year)
    }
}

/// Supplier of gridded water balance inputs.
pub trait WaterSource {
    fn contains(&self, var: &str, year: u16, combo: u8, rcp: Rcp) -> bool;
    fn load(&self, var: &str, year: u16, combo: u8, rcp: Rcp) -> Result<FloatGrid>;
}

/// Directory of `{var}_{year}_{combo}_{rcp}.asc` files.
#[derive(Debug, Clone)]
pub struct DirSource {
    pub root: PathBuf,
}

impl DirSource {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn path(&self, var: &str, year: u16, combo: u8, rcp: Rcp) -> PathBuf {
        self.root.join(file_name(var, year, combo, rcp))
    }
}

pub fn file_name(var: &str, year: u16, combo: u8, rcp: Rcp) -> String {
    format!("{var}_{year}_{combo}_{}.asc", rcp.tag())
}

impl WaterSource for DirSource {
    fn contains(&self, var: &str, year: u16, combo: u8, rcp: Rcp) -> bool {
        self.path(var, year, combo, rcp).is_file()
    }

    fn load(&self, var: &str, year: u16, combo: u8, rcp: Rcp) -> Result<FloatGrid> {
        read_float_grid(self.path(var, year, combo, rcp))
    }
}

/// In-memory inputs keyed by `(var, year, combo, rcp)`.
#[derive(Debug, Clone, Default)]
pub struct MemorySource {
    pub grids: BTreeMap<(String, u16, u8, Rcp), FloatGrid>,
}

impl MemorySource {
    pub fn insert(&mut self, var: &str, year: u16, combo: u8, rcp: Rcp, grid: FloatGrid) {
        self.grids.insert((var.to_string(), year, combo, rcp), grid);
    }
}

impl WaterSource for MemorySource {
    fn contains(&self, var: &str, year: u16, combo: u8, rcp: Rcp) -> bool {
        self.grids.contains_key(&(var.to_string(), year, combo, rcp))
    }

    fn load(&self, var: &str, year: u16, combo: u8, rcp: Rcp) -> Result<FloatGrid> {
        self.grids
            .get(&(var.to_string(), year, combo, rcp))
            .cloned()
            .ok_or_else(|| Error::NotFound(file_name(var, year, combo, rcp)))
    }
}

#[derive(Debug, Clone)]
pub struct WaterScenarioResult {
    pub spec: ScenarioSpec,
    /// Signed sustainable yield in mm/yr.
    pub sy: FloatGrid,
}

fn load_inputs(source: &dyn WaterSource, year: u16, combo: u8, rcp: Rcp) -> Result<WaterBalanceInputs> {
    let get = |v: &str| source.load(v, year, combo, rcp).map(Some);
    Ok(WaterBalanceInputs {
        p: get("p")?,
        i: get("i")?,
        et: get("et")?,
        q: get("q")?,
        swu: get("swu")?,
    })
}

/// Lists every `(var, year, combo)` missing from the window.
pub fn inventory_gaps(source: &dyn WaterSource, spec: &ScenarioSpec) -> Result<Vec<String>> {
    let (y0, y1) = spec.window()?;
    let mut missing = Vec::new();
    for year in y0..=y1 {
        for combo in 1..=COMBOS {
            for var in VARIABLES {
                if !source.contains(var, year, combo, spec.rcp) {
                    missing.push(file_name(var, year, combo, spec.rcp));
                }
            }
        }
    }
    Ok(missing)
}

/// Mean sustainable yield: first over the model combinations of each year,
/// then over the years of the window.
pub fn scenario_average(source: &dyn WaterSource, spec: &ScenarioSpec) -> Result<WaterScenarioResult> {
    let gaps = inventory_gaps(source, spec)?;
    if !gaps.is_empty() {
        return Err(Error::MissingScenarioData(gaps));
    }
    let (y0, y1) = spec.window()?;
    let mut grid_spec: Option<GridSpec> = None;
    let mut year_sum: Vec<f64> = Vec::new();
    for year in y0..=y1 {
        let mut combo_sum: Vec<f64> = Vec::new();
        for combo in 1..=COMBOS {
            let inputs = load_inputs(source, year, combo, spec.rcp)?;
            let r = recharge(&inputs)?;
            let swu = inputs.swu.as_ref().expect("inventory checked");
            let sy = sustainable_yield(&r, swu, spec.case)?;
            match &grid_spec {
                None => grid_spec = Some(*sy.spec()),
                Some(g) if g != sy.spec() => {
                    return Err(Error::DimensionMismatch(format!(
                        "{} is on a different grid",
                        file_name("p", year, combo, spec.rcp)
                    )))
                }
                _ => {}
            }
            if combo_sum.is_empty() {
                combo_sum = vec![0.0; sy.values().len()];
            }
            for (a, &v) in combo_sum.iter_mut().zip(sy.values()) {
                *a += v;
            }
        }
        if year_sum.is_empty() {
            year_sum = vec![0.0; combo_sum.len()];
        }
        for (a, &v) in year_sum.iter_mut().zip(&combo_sum) {
            *a += v / COMBOS as f64;
        }
    }
    let n_years = (y1 - y0 + 1) as f64;
    let values = year_sum.into_iter().map(|v| v / n_years).collect();
    Ok(WaterScenarioResult {
        spec: *spec,
        sy: FloatGrid::from_values(grid_spec.expect("window is non-empty"), values)?,
    })
}

/// Writes one grid per variable, year and combination under `dir`.
pub fn write_inputs(dir: &Path, source: &MemorySource) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
    for ((var, year, combo, rcp), grid) in &source.grids {
        crate::grid::write_float_grid(dir.join(file_name(var, *year, *combo, *rcp)), grid)?;
    }
    Ok(())
}
