use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{FloatGrid, Mask};

/// Share of recharge reserved as environmental flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Case {
    Conservative,
    Medium,
    Extreme,
}

impl Case {
    pub const ALL: [Case; 3] = [Case::Conservative, Case::Medium, Case::Extreme];

    pub fn env_flow_fraction(self) -> f64 {
        match self {
            Case::Conservative => 0.9,
            Case::Medium => 0.6,
            Case::Extreme => 0.3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Case::Conservative => "conservative",
            Case::Medium => "medium",
            Case::Extreme => "extreme",
        }
    }
}

impl std::str::FromStr for Case {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Case::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown case {s:?}")))
    }
}

/// `R = P + I - ET - Q` in mm/yr. Negative values are kept.
#[inline]
pub fn recharge_value(p: f64, i: f64, et: f64, q: f64) -> f64 {
    (p + i) - et - q
}

/// `SY = (1 - f)·R - SWU` in mm/yr.
#[inline]
pub fn sustainable_yield_value(r: f64, swu: f64, case: Case) -> f64 {
    (1.0 - case.env_flow_fraction()) * r - swu
}

/// Water balance components for one year and model combination.
#[derive(Debug, Clone, Default)]
pub struct WaterBalanceInputs {
    pub p: Option<FloatGrid>,
    pub i: Option<FloatGrid>,
    pub et: Option<FloatGrid>,
    pub q: Option<FloatGrid>,
    pub swu: Option<FloatGrid>,
}

impl WaterBalanceInputs {
    pub fn missing(&self) -> Vec<String> {
        [
            ("p", self.p.is_none()),
            ("i", self.i.is_none()),
            ("et", self.et.is_none()),
            ("q", self.q.is_none()),
            ("swu", self.swu.is_none()),
        ]
        .into_iter()
        .filter(|(_, m)| *m)
        .map(|(n, _)| n.to_string())
        .collect()
    }
}

fn same_shape(grids: &[&FloatGrid]) -> Result<()> {
    if grids.windows(2).all(|w| w[0].same_shape(w[1])) {
        Ok(())
    } else {
        Err(Error::DimensionMismatch("water balance grids are on different grids".into()))
    }
}

/// Cell-wise recharge. Missing cells in any input stay missing.
pub fn recharge(inputs: &WaterBalanceInputs) -> Result<FloatGrid> {
    let (Some(p), Some(i), Some(et), Some(q)) = (&inputs.p, &inputs.i, &inputs.et, &inputs.q) else {
        let missing: Vec<String> = inputs.missing().into_iter().filter(|m| m != "swu").collect();
        return Err(Error::MissingComponents(missing));
    };
    same_shape(&[p, i, et, q])?;
    let values = p
        .values()
        .par_iter()
        .zip(i.values().par_iter())
        .zip(et.values().par_iter())
        .zip(q.values().par_iter())
        .map(|(((&p, &i), &et), &q)| recharge_value(p, i, et, q))
        .collect();
    FloatGrid::from_values(*p.spec(), values)
}

/// Cell-wise sustainable yield.
pub fn sustainable_yield(r: &FloatGrid, swu: &FloatGrid, case: Case) -> Result<FloatGrid> {
    same_shape(&[r, swu])?;
    let values = r
        .values()
        .par_iter()
        .zip(swu.values().par_iter())
        .map(|(&r, &s)| sustainable_yield_value(r, s, case))
        .collect();
    FloatGrid::from_values(*r.spec(), values)
}

/// Extractable volume in m³/yr over the masked cells: negative cells count
/// as zero and missing cells are skipped.
pub fn region_volume(sy: &FloatGrid, region: &Mask) -> Result<f64> {
    if !sy.spec().same_shape(region.spec()) {
        return Err(Error::DimensionMismatch("yield grid and region mask differ".into()));
    }
    let area = sy.spec().cell_area_m2();
    Ok(sy
        .values()
        .iter()
        .zip(region.cells())
        .filter(|(v, &m)| m && !v.is_nan())
        .map(|(&v, _)| v.max(0.0) * 1.0e-3 * area)
        .sum())
}

/// Mean of the non-missing masked cells in mm/yr, `None` if there are none.
pub fn region_mean(grid: &FloatGrid, region: &Mask) -> Result<Option<f64>> {
    if !grid.spec().same_shape(region.spec()) {
        return Err(Error::DimensionMismatch("grid and region mask differ".into()));
    }
    let (mut sum, mut n) = (0.0, 0usize);
    for (&v, &m) in grid.values().iter().zip(region.cells()) {
        if m && !v.is_nan() {
            sum += v;
            n += 1;
        }
    }
    Ok((n > 0).then(|| sum / n as f64))
}
