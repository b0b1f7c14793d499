use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HydroType {
    RunOfRiver,
    Reservoir,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HydroPlant {
    pub id: String,
    pub kind: HydroType,
    /// MW
    pub capacity_mw: f64,
    /// MWh per calendar month.
    pub monthly_gen: [f64; 12],
}

/// Plants at or below this capacity are left out of the inventory.
pub const MIN_CAPACITY_MW: f64 = 1.0;

const DAYS: [u32; 12] = [31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31];

fn month_hours(year_len: usize) -> Result<[f64; 12]> {
    let mut days = DAYS;
    match year_len {
        8760 => {}
        8784 => days[1] = 29,
        _ => return Err(Error::invalid(format!("year length must be 8760 or 8784 hours, got {year_len}"))),
    }
    Ok(days.map(|d| d as f64 * 24.0))
}

/// Hourly generation in MWh/h: monthly means anchored mid-month and joined
/// linearly, wrapping from December to January. Hour `t` is sampled at its
/// midpoint `t + 0.5`.
pub fn hydro_hourly(plant: &HydroPlant, year_len: usize) -> Result<Vec<f64>> {
    if let Some(m) = plant.monthly_gen.iter().position(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::Data(format!(
            "{}: monthly generation for month {} must be >= 0",
            plant.id,
            m + 1
        )));
    }
    let hours = month_hours(year_len)?;
    let total = year_len as f64;
    let mut anchors = [(0.0, 0.0); 12];
    let mut start = 0.0;
    for m in 0..12 {
        anchors[m] = (start + hours[m] / 2.0, plant.monthly_gen[m] / hours[m]);
        start += hours[m];
    }
    // wrap neighbours on either side of the year
    let mut pts = Vec::with_capacity(14);
    pts.push((anchors[11].0 - total, anchors[11].1));
    pts.extend_from_slice(&anchors);
    pts.push((anchors[0].0 + total, anchors[0].1));

    let mut out = Vec::with_capacity(year_len);
    let mut seg = 0;
    for h in 0..year_len {
        let t = h as f64 + 0.5;
        while pts[seg + 1].0 < t {
            seg += 1;
        }
        let ((t0, v0), (t1, v1)) = (pts[seg], pts[seg + 1]);
        let w = (t - t0) / (t1 - t0);
        out.push((v0 + w * (v1 - v0)).max(0.0));
    }
    Ok(out)
}

#[derive(Debug, Deserialize)]
struct HydroRow {
    id: String,
    #[serde(rename = "type")]
    kind: String,
    capacity_mw: f64,
    m01: f64,
    m02: f64,
    m03: f64,
    m04: f64,
    m05: f64,
    m06: f64,
    m07: f64,
    m08: f64,
    m09: f64,
    m10: f64,
    m11: f64,
    m12: f64,
}

fn parse_kind(s: &str) -> Result<HydroType> {
    match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
        "run-of-river" | "ror" => Ok(HydroType::RunOfRiver),
        "reservoir" | "dam" => Ok(HydroType::Reservoir),
        other => Err(Error::Data(format!("unknown hydropower type {other:?}"))),
    }
}

/// Reads `id,type,capacity_mw,m01..m12`. Extra columns (such as dry or wet
/// year variants) are ignored. Plants of 1 MW or less are skipped.
pub fn parse_hydro_csv(reader: impl std::io::Read) -> Result<Vec<HydroPlant>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.deserialize::<HydroRow>() {
        let r = row?;
        if r.capacity_mw <= MIN_CAPACITY_MW {
            continue;
        }
        let plant = HydroPlant {
            kind: parse_kind(&r.kind)?,
            capacity_mw: r.capacity_mw,
            monthly_gen: [r.m01, r.m02, r.m03, r.m04, r.m05, r.m06, r.m07, r.m08, r.m09, r.m10, r.m11, r.m12],
            id: r.id,
        };
        if plant.monthly_gen.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::Data(format!("{}: negative monthly generation", plant.id)));
        }
        out.push(plant);
    }
    Ok(out)
}

pub fn read_hydro_csv(path: impl AsRef<Path>) -> Result<Vec<HydroPlant>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::file(path, e))?;
    parse_hydro_csv(file)
}
