//! Socio-economic impact indicators and their composite index.
//!
//! Four raw indicators per region (energy access, employment, clean cooking
//! fuel access, poverty) are standardized over the region set and combined
//! with fixed weights; composites are then binned into five classes.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionDemographics {
    pub gid: String,
    pub area_km2: f64,
    pub urban_pop: f64,
    pub rural_pop: f64,
    /// Share of the population aged 15 to 64.
    pub labor_share: f64,
    pub unemployment: f64,
    pub poverty: f64,
    /// Shares without electricity access; `None` falls back to national rates.
    pub no_access_elec_u: Option<f64>,
    pub no_access_elec_r: Option<f64>,
    /// Shares without clean cooking fuel access.
    pub no_access_fuel_u: Option<f64>,
    pub no_access_fuel_r: Option<f64>,
}

/// National rates used where ADM-1 rates are missing.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct NationalRates {
    pub no_access_elec_u: Option<f64>,
    pub no_access_elec_r: Option<f64>,
    pub no_access_fuel_u: Option<f64>,
    pub no_access_fuel_r: Option<f64>,
}

fn fraction(name: &str, gid: &str, v: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(Error::invalid(format!("{gid}: {name} = {v} is not a fraction")))
    }
}

impl RegionDemographics {
    pub fn validate(&self) -> Result<()> {
        if !(self.area_km2 > 0.0) || !self.area_km2.is_finite() {
            return Err(Error::invalid(format!("{}: area must be positive, got {}", self.gid, self.area_km2)));
        }
        if !(self.urban_pop >= 0.0) || !(self.rural_pop >= 0.0) {
            return Err(Error::invalid(format!("{}: populations must be >= 0", self.gid)));
        }
        fraction("labor_share", &self.gid, self.labor_share)?;
        fraction("unemployment", &self.gid, self.unemployment)?;
        fraction("poverty", &self.gid, self.poverty)?;
        for (n, v) in [
            ("no_access_elec_u", self.no_access_elec_u),
            ("no_access_elec_r", self.no_access_elec_r),
            ("no_access_fuel_u", self.no_access_fuel_u),
            ("no_access_fuel_r", self.no_access_fuel_r),
        ] {
            if let Some(v) = v {
                fraction(n, &self.gid, v)?;
            }
        }
        Ok(())
    }

    pub fn total_pop(&self) -> f64 {
        self.urban_pop + self.rural_pop
    }

    /// Fills missing access rates from national values.
    pub fn with_national(&self, national: &NationalRates) -> RegionDemographics {
        RegionDemographics {
            no_access_elec_u: self.no_access_elec_u.or(national.no_access_elec_u),
            no_access_elec_r: self.no_access_elec_r.or(national.no_access_elec_r),
            no_access_fuel_u: self.no_access_fuel_u.or(national.no_access_fuel_u),
            no_access_fuel_r: self.no_access_fuel_r.or(national.no_access_fuel_r),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmploymentParams {
    /// Regional multiplier.
    pub rm: f64,
    /// Jobs per MWp.
    pub ef_pv: f64,
    pub ef_wind: f64,
    pub ef_hydro: f64,
    pub ef_pth: f64,
}

impl Default for EmploymentParams {
    fn default() -> Self {
        Self {
            rm: 1.0,
            ef_pv: 5.1,
            ef_wind: 3.2,
            ef_hydro: 5.9,
            ef_pth: 1.7,
        }
    }
}

impl EmploymentParams {
    pub fn validate(&self) -> Result<()> {
        let all = [self.rm, self.ef_pv, self.ef_wind, self.ef_hydro, self.ef_pth];
        if all.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::invalid("employment parameters must be finite and >= 0"));
        }
        Ok(())
    }

    pub fn ef_res_mean(&self) -> f64 {
        (self.ef_pv + self.ef_wind + self.ef_hydro) / 3.0
    }
}

fn check_area(d: &RegionDemographics) -> Result<()> {
    if !(d.area_km2 > 0.0) {
        return Err(Error::invalid(format!("{}: area must be positive, got {}", d.gid, d.area_km2)));
    }
    Ok(())
}

fn access_weighted(d: &RegionDemographics, u: Option<f64>, r: Option<f64>, what: &str) -> Result<f64> {
    check_area(d)?;
    let (Some(u), Some(r)) = (u, r) else {
        return Err(Error::Data(format!("{}: missing {what} access rates", d.gid)));
    };
    Ok((u * d.urban_pop + r * d.rural_pop) / d.area_km2)
}

/// I1: population without electricity access per km².
pub fn energy_access_indicator(d: &RegionDemographics) -> Result<f64> {
    access_weighted(d, d.no_access_elec_u, d.no_access_elec_r, "electricity")
}

/// I3: population without clean cooking fuel access per km².
pub fn biomass_indicator(d: &RegionDemographics) -> Result<f64> {
    access_weighted(d, d.no_access_fuel_u, d.no_access_fuel_r, "clean fuel")
}

/// I2: employment potential per km².
pub fn employment_indicator(d: &RegionDemographics, p: &EmploymentParams) -> Result<f64> {
    check_area(d)?;
    p.validate()?;
    let labor = d.labor_share * d.total_pop();
    Ok(p.rm * (p.ef_res_mean() + p.ef_pth) * d.unemployment * labor / d.area_km2)
}

/// I4: poverty in percent.
pub fn poverty_indicator(d: &RegionDemographics) -> f64 {
    d.poverty * 100.0
}

/// Standardizes with the population standard deviation. A constant input
/// yields zeros and a warning.
pub fn zscore_normalize(values: &[f64]) -> Result<Vec<f64>> {
    if values.len() < 2 {
        return Err(Error::invalid("z-scores need at least two regions"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("z-scores need finite values"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    if sd == 0.0 || sd <= f64::EPSILON * mean.abs() {
        log::warn!("indicator has zero variance over {} regions; z-scores set to 0", values.len());
        return Ok(vec![0.0; values.len()]);
    }
    Ok(values.iter().map(|v| (v - mean) / sd).collect())
}

pub const INDICATORS: usize = 4;

/// Direct effects (I1, I2) at 1/3 each, indirect (I3, I4) at 1/6 each.
pub const DEFAULT_WEIGHTS: [f64; INDICATORS] = [1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ImpactClass {
    #[serde(rename = "very low")]
    VeryLow,
    #[serde(rename = "low")]
    Low,
    #[serde(rename = "medium")]
    Medium,
    #[serde(rename = "high")]
    High,
    #[serde(rename = "very high")]
    VeryHigh,
}

impl ImpactClass {
    pub const ALL: [ImpactClass; 5] = [
        ImpactClass::VeryLow,
        ImpactClass::Low,
        ImpactClass::Medium,
        ImpactClass::High,
        ImpactClass::VeryHigh,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ImpactClass::VeryLow => "very low",
            ImpactClass::Low => "low",
            ImpactClass::Medium => "medium",
            ImpactClass::High => "high",
            ImpactClass::VeryHigh => "very high",
        }
    }
}

/// Quintile classes from mid-ranks: tied values share a class, and a
/// constant vector is all medium.
pub fn quintile_classes(values: &[f64]) -> Vec<ImpactClass> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut classes = vec![ImpactClass::Medium; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0;
        let k = (((midrank + 0.5) * 5.0 / n as f64).floor() as usize).min(4);
        for &idx in &order[i..=j] {
            classes[idx] = ImpactClass::ALL[k];
        }
        i = j + 1;
    }
    classes
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionIndex {
    pub gid: String,
    /// I1..I4
    pub raw: [f64; INDICATORS],
    pub z: [f64; INDICATORS],
    pub composite: f64,
    pub class: ImpactClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositeIndex {
    pub weights: [f64; INDICATORS],
    pub regions: Vec<RegionIndex>,
}

pub fn validate_weights(weights: &[f64]) -> Result<()> {
    if weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::invalid("weights must be >= 0"));
    }
    let s: f64 = weights.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("weights must sum to 1, got {s}")));
    }
    Ok(())
}

/// `Σ wᵢ·zᵢ` per region, with one z vector per indicator.
pub fn composite(zs: &[Vec<f64>], weights: &[f64]) -> Result<Vec<f64>> {
    validate_weights(weights)?;
    if zs.len() != weights.len() {
        return Err(Error::DimensionMismatch(format!("{} indicators but {} weights", zs.len(), weights.len())));
    }
    let n = zs.first().map_or(0, Vec::len);
    if zs.iter().any(|z| z.len() != n) {
        return Err(Error::DimensionMismatch("indicators cover different region counts".into()));
    }
    Ok((0..n).map(|r| zs.iter().zip(weights).map(|(z, w)| w * z[r]).sum()).collect())
}

/// Raw indicators for each region, in input order.
pub fn raw_indicators(regions: &[RegionDemographics], params: &EmploymentParams) -> Result<Vec<[f64; INDICATORS]>> {
    regions
        .iter()
        .map(|d| {
            d.validate()?;
            Ok([
                energy_access_indicator(d)?,
                employment_indicator(d, params)?,
                biomass_indicator(d)?,
                poverty_indicator(d),
            ])
        })
        .collect()
}

/// Standardizes, weights and classifies raw indicators over the region set.
pub fn composite_from_raw(gids: &[String], raw: &[[f64; INDICATORS]], weights: [f64; INDICATORS]) -> Result<CompositeIndex> {
    if gids.len() != raw.len() {
        return Err(Error::DimensionMismatch("one gid per raw indicator row".into()));
    }
    let zs = (0..INDICATORS)
        .map(|k| zscore_normalize(&raw.iter().map(|r| r[k]).collect::<Vec<_>>()))
        .collect::<Result<Vec<_>>>()?;
    let comp = composite(&zs, &weights)?;
    let classes = quintile_classes(&comp);
    let regions = (0..raw.len())
        .map(|r| RegionIndex {
            gid: gids[r].clone(),
            raw: raw[r],
            z: [zs[0][r], zs[1][r], zs[2][r], zs[3][r]],
            composite: comp[r],
            class: classes[r],
        })
        .collect();
    Ok(CompositeIndex { weights, regions })
}

/// Full computation from demographics.
pub fn compute_index(
    regions: &[RegionDemographics],
    national: &NationalRates,
    params: &EmploymentParams,
    weights: [f64; INDICATORS],
) -> Result<CompositeIndex> {
    let filled: Vec<RegionDemographics> = regions.iter().map(|d| d.with_national(national)).collect();
    let raw = raw_indicators(&filled, params)?;
    let gids: Vec<String> = filled.iter().map(|d| d.gid.clone()).collect();
    composite_from_raw(&gids, &raw, weights)
}

pub const DEMOGRAPHICS_HEADER: [&str; 11] = [
    "gid",
    "area_km2",
    "urban_pop",
    "rural_pop",
    "labor_share",
    "unemployment",
    "poverty",
    "no_access_elec_u",
    "no_access_elec_r",
    "no_access_fuel_u",
    "no_access_fuel_r",
];

pub fn parse_demographics_csv<R: Read>(reader: R) -> Result<Vec<RegionDemographics>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != DEMOGRAPHICS_HEADER {
        return Err(Error::Data(format!(
            "demographics header must be `{}`",
            DEMOGRAPHICS_HEADER.join(",")
        )));
    }
    let mut out = Vec::new();
    for rec in rdr.deserialize() {
        let d: RegionDemographics = rec?;
        d.validate()?;
        out.push(d);
    }
    Ok(out)
}

pub fn read_demographics_csv(path: impl AsRef<Path>) -> Result<Vec<RegionDemographics>> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| Error::file(path, e))?;
    parse_demographics_csv(f)
}

pub fn write_demographics_csv<W: std::io::Write>(regions: &[RegionDemographics], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(DEMOGRAPHICS_HEADER)?;
    for d in regions {
        w.serialize(d)?;
    }
    w.flush()?;
    Ok(())
}
