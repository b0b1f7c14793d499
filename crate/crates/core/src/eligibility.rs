//! Land eligibility under per-country buffer preferences.
//!
//! Every criterion is a hard exclusion: its layer is rasterized onto the
//! region grid, buffered by the resolved distance and removed from the region
//! mask. The exclusion ledger attributes each excluded cell to the first
//! criterion (in catalog id order) that removed it.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{self, dilate, rasterize, GridSpec, Mask, Projection, VectorFeature};
use crate::tech::Tech;

/// Number of exclusion criteria in the catalog.
pub const CRITERIA_COUNT: usize = 33;

/// Buffer distances in meters keyed by criterion id.
pub type BufferMap = BTreeMap<u8, f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionSpec {
    pub id: u8,
    pub name: String,
    pub source_layer: String,
}

const CATALOG: [&str; CRITERIA_COUNT] = [
    "Settlements (connected)",
    "Settlements (isolated)",
    "Airports",
    "Primary Roadways",
    "Secondary Roadways",
    "Agricultural Areas",
    "Pasture Areas",
    "Railways",
    "Power Lines",
    "Historical Sites",
    "Recreational Areas",
    "Leisure and Camping",
    "Industrial Areas",
    "Commercial Areas",
    "Mining Sites",
    "Military Areas",
    "National Borders",
    "Lakes",
    "Creeks",
    "Rivers",
    "Coastlines (Ocean, general)",
    "Woodlands (All Forests)",
    "(Standard) Wetlands",
    "Specially protected Wetlands",
    "Sand Dunes",
    "Natural Habitats",
    "Biospheres",
    "Wildernesses",
    "Bird Areas",
    "Protected Landscapes",
    "Natural Reserves",
    "National Parks, State Parks, etc.",
    "Natural Monuments",
];

fn layer_key(name: &str) -> String {
    let mut key = String::new();
    for ch in name.chars() {
        if ch.is_ascii_alphanumeric() {
            key.push(ch.to_ascii_lowercase());
        } else if !key.ends_with('_') && !key.is_empty() {
            key.push('_');
        }
    }
    key.trim_end_matches('_').to_string()
}

/// The full 33-criterion catalog with default layer keys
/// (e.g. `primary_roadways`).
pub fn default_catalog() -> Vec<CriterionSpec> {
    CATALOG
        .iter()
        .enumerate()
        .map(|(i, name)| CriterionSpec {
            id: (i + 1) as u8,
            name: name.to_string(),
            source_layer: layer_key(name),
        })
        .collect()
}

/// Checks that ids are unique and every catalog id 1..=33 is present.
pub fn validate_catalog(catalog: &[CriterionSpec]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for c in catalog {
        if !seen.insert(c.id) {
            return Err(Error::Data(format!("duplicate criterion id {}", c.id)));
        }
    }
    let missing: Vec<String> = (1..=CRITERIA_COUNT as u8)
        .filter(|id| !seen.contains(id))
        .map(|id| id.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Data(format!("catalog is missing criteria {}", missing.join(", "))));
    }
    Ok(())
}

pub fn read_catalog(path: impl AsRef<Path>) -> Result<Vec<CriterionSpec>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    let catalog: Vec<CriterionSpec> = serde_json::from_str(&text)?;
    validate_catalog(&catalog)?;
    Ok(catalog)
}

/// One country's buffer choices for one technology.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceSet {
    pub country: String,
    pub tech: Tech,
    #[serde(rename = "buffers")]
    pub buffers_m: BufferMap,
}

impl PreferenceSet {
    pub fn validate(&self) -> Result<()> {
        for (id, &b) in &self.buffers_m {
            if !(b >= 0.0) || !b.is_finite() {
                return Err(Error::Data(format!(
                    "{} {}: buffer for criterion {id} must be >= 0, got {b}",
                    self.country, self.tech
                )));
            }
        }
        Ok(())
    }
}

pub fn read_preferences(path: impl AsRef<Path>) -> Result<Vec<PreferenceSet>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    let prefs: Vec<PreferenceSet> = serde_json::from_str(&text)?;
    for p in &prefs {
        p.validate()?;
    }
    Ok(prefs)
}

/// Median with the even-count convention of averaging the two middle values.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    })
}

fn corpus_values(prefs: &[PreferenceSet], tech: Tech, id: u8) -> Vec<f64> {
    prefs
        .iter()
        .filter(|p| p.tech == tech)
        .filter_map(|p| p.buffers_m.get(&id).copied())
        .collect()
}

/// Complete buffer map for `country`: its own value where present, otherwise
/// the median over every country that supplied one for the same technology.
pub fn resolve_buffers(
    prefs: &[PreferenceSet],
    country: &str,
    tech: Tech,
    criteria: &[CriterionSpec],
) -> Result<BufferMap> {
    let own = prefs
        .iter()
        .find(|p| p.tech == tech && p.country.eq_ignore_ascii_case(country));
    let mut out = BufferMap::new();
    for c in criteria {
        let value = match own.and_then(|p| p.buffers_m.get(&c.id)) {
            Some(&v) => v,
            None => median(&corpus_values(prefs, tech, c.id)).ok_or_else(|| Error::NoPreferenceData {
                criterion: c.id,
                tech: tech.to_string(),
            })?,
        };
        out.insert(c.id, value);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeviationUnit {
    Percent,
    /// Used when the median is zero and a relative deviation is undefined.
    Meters,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    pub country: String,
    pub value_m: f64,
    pub deviation: f64,
    pub unit: DeviationUnit,
}

/// Per-country deviation of a criterion's buffer from the cross-country median.
pub fn sensitivity_table(prefs: &[PreferenceSet], criterion: u8, tech: Tech) -> Result<Vec<Deviation>> {
    let supplied: Vec<(&str, f64)> = prefs
        .iter()
        .filter(|p| p.tech == tech)
        .filter_map(|p| p.buffers_m.get(&criterion).map(|&v| (p.country.as_str(), v)))
        .collect();
    if supplied.len() < 2 {
        return Err(Error::invalid(format!(
            "criterion {criterion} ({tech}) needs values from at least two countries"
        )));
    }
    let values: Vec<f64> = supplied.iter().map(|&(_, v)| v).collect();
    let med = median(&values).unwrap_or_default();
    Ok(supplied
        .into_iter()
        .map(|(country, v)| {
            let (deviation, unit) = if med == 0.0 {
                (v - med, DeviationUnit::Meters)
            } else {
                ((v - med) / med * 100.0, DeviationUnit::Percent)
            };
            Deviation {
                country: country.to_string(),
                value_m: v,
                deviation,
                unit,
            }
        })
        .collect())
}

/// Unbuffered criterion layers rasterized onto a region's grid.
///
/// The grid extends `margin_m` beyond the region so that features just outside
/// the border can still exclude land inside it; buffers larger than the margin
/// are rejected by [`RegionLayers::evaluate`].
#[derive(Debug, Clone)]
pub struct RegionLayers {
    pub region_id: String,
    pub projection: Projection,
    pub region_mask: Mask,
    pub layers: BTreeMap<u8, Mask>,
    pub margin_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EligibilityResult {
    pub region_id: String,
    pub tech: Tech,
    #[serde(skip)]
    pub mask: Option<Mask>,
    pub region_cells: usize,
    pub eligible_cells: usize,
    pub eligible_fraction: f64,
    /// Fraction of the region newly excluded by each criterion, in id order.
    pub ledger: BTreeMap<u8, f64>,
}

impl EligibilityResult {
    pub fn mask(&self) -> &Mask {
        self.mask.as_ref().expect("eligibility result carries its mask")
    }

    pub fn eligible_area_km2(&self) -> f64 {
        self.mask.as_ref().map_or(0.0, Mask::area_km2)
    }
}

impl RegionLayers {
    /// Projects and rasterizes the region and each criterion's layer.
    ///
    /// `layers` maps source-layer keys to features; keys absent from the map
    /// are treated as empty layers.
    pub fn build(
        region_id: &str,
        region: &VectorFeature,
        criteria: &[CriterionSpec],
        layers: &BTreeMap<String, Vec<VectorFeature>>,
        cell_size: f64,
        margin_m: f64,
    ) -> Result<Self> {
        let projection = region.local_projection()?;
        let planar_region = region.project(&projection)?;
        let (x0, y0, x1, y1) = planar_region
            .geometry
            .bbox()
            .ok_or_else(|| Error::Geometry(format!("{region_id}: empty region geometry")))?;
        let spec = GridSpec::covering(x0 - margin_m, y0 - margin_m, x1 + margin_m, y1 + margin_m, cell_size)?;
        let region_mask = rasterize(std::slice::from_ref(&planar_region), &spec);
        Self::from_parts(region_id, projection, region_mask, criteria, layers, margin_m)
    }

    /// Same as [`RegionLayers::build`] for a region already rasterized.
    pub fn from_parts(
        region_id: &str,
        projection: Projection,
        region_mask: Mask,
        criteria: &[CriterionSpec],
        layers: &BTreeMap<String, Vec<VectorFeature>>,
        margin_m: f64,
    ) -> Result<Self> {
        if region_mask.popcount() == 0 {
            return Err(Error::RegionBelowResolution(region_id.to_string()));
        }
        let spec = *region_mask.spec();
        let mut rasters = BTreeMap::new();
        for c in criteria {
            let features = layers.get(&c.source_layer).map(Vec::as_slice).unwrap_or(&[]);
            let planar = features
                .iter()
                .map(|f| f.project(&projection))
                .collect::<Result<Vec<_>>>()?;
            rasters.insert(c.id, rasterize(&planar, &spec));
        }
        Ok(Self {
            region_id: region_id.to_string(),
            projection,
            region_mask,
            layers: rasters,
            margin_m,
        })
    }

    /// Applies buffered exclusions in ascending criterion id order.
    pub fn evaluate(&self, buffers: &BufferMap, tech: Tech) -> Result<EligibilityResult> {
        let region_cells = self.region_mask.popcount();
        if region_cells == 0 {
            return Err(Error::RegionBelowResolution(self.region_id.clone()));
        }
        let mut remaining = self.region_mask.clone();
        let mut ledger = BTreeMap::new();
        for (&id, layer) in &self.layers {
            let radius = buffers.get(&id).copied().unwrap_or(0.0);
            if radius > self.margin_m {
                return Err(Error::invalid(format!(
                    "buffer {radius} m for criterion {id} exceeds the rasterized margin of {} m",
                    self.margin_m
                )));
            }
            let mut newly = 0usize;
            if layer.cells().iter().any(|&c| c) {
                let buffered = dilate(layer, radius)?;
                for (cell, &hit) in remaining.cells_mut().iter_mut().zip(buffered.cells()) {
                    if hit && *cell {
                        *cell = false;
                        newly += 1;
                    }
                }
            }
            ledger.insert(id, newly as f64 / region_cells as f64);
        }
        let eligible_cells = remaining.popcount();
        Ok(EligibilityResult {
            region_id: self.region_id.clone(),
            tech,
            eligible_fraction: eligible_cells as f64 / region_cells as f64,
            mask: Some(remaining),
            region_cells,
            eligible_cells,
            ledger,
        })
    }
}

/// Rasterizes a region and its criterion layers, then applies the buffers.
pub fn compute_eligibility(
    region_id: &str,
    region: &VectorFeature,
    criteria: &[CriterionSpec],
    layers: &BTreeMap<String, Vec<VectorFeature>>,
    buffers: &BufferMap,
    tech: Tech,
    cell_size: f64,
) -> Result<EligibilityResult> {
    let margin = buffers.values().fold(0.0f64, |m, &b| m.max(b));
    RegionLayers::build(region_id, region, criteria, layers, cell_size, margin)?.evaluate(buffers, tech)
}

/// Loads every criterion layer named in the catalog from `dir/{source_layer}.geojson`.
/// Missing files yield empty layers.
pub fn load_layers(dir: impl AsRef<Path>, criteria: &[CriterionSpec]) -> Result<BTreeMap<String, Vec<VectorFeature>>> {
    let dir = dir.as_ref();
    let mut out = BTreeMap::new();
    for c in criteria {
        let path = dir.join(format!("{}.geojson", c.source_layer));
        if path.exists() {
            out.insert(c.source_layer.clone(), grid::vector::read_geojson(&path)?);
        }
    }
    Ok(out)
}
