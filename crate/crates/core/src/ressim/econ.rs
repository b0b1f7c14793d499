use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cost-bearing components of a regional hydrogen node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Component {
    Wind,
    Pv,
    RunOfRiver,
    Reservoir,
    Electrolyzer,
    /// Capex and fixed O&M are per kWh of storage energy.
    Battery,
}

impl Component {
    pub const ALL: [Component; 6] = [
        Component::Wind,
        Component::Pv,
        Component::RunOfRiver,
        Component::Reservoir,
        Component::Electrolyzer,
        Component::Battery,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Component::Wind => "wind",
            Component::Pv => "pv",
            Component::RunOfRiver => "run_of_river",
            Component::Reservoir => "reservoir",
            Component::Electrolyzer => "electrolyzer",
            Component::Battery => "battery",
        }
    }
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Component {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Component::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown component {s:?}")))
    }
}

impl From<crate::tech::Tech> for Component {
    fn from(t: crate::tech::Tech) -> Self {
        match t {
            crate::tech::Tech::Wind => Component::Wind,
            crate::tech::Tech::Pv => Component::Pv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    /// € per kW (per kWh for the battery)
    pub capex: f64,
    /// Percent of capex per year
    pub fix_om_pct: f64,
    /// € per kWh generated
    pub var_om: f64,
    /// Years
    pub lifetime: u32,
}

impl CostParams {
    const fn new(capex: f64, fix_om_pct: f64, var_om: f64, lifetime: u32) -> Self {
        Self {
            capex,
            fix_om_pct,
            var_om,
            lifetime,
        }
    }

    pub fn fix_om(&self) -> f64 {
        self.fix_om_pct / 100.0
    }
}

pub const YEARS: [u16; 4] = [2020, 2030, 2040, 2050];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TechnoEconomics {
    pub discount_rate: f64,
    pub components: BTreeMap<Component, BTreeMap<u16, CostParams>>,
}

impl Default for TechnoEconomics {
    fn default() -> Self {
        let rows: [(Component, [f64; 4], f64, f64, u32); 6] = [
            (Component::Wind, [1290.0, 1130.0, 1050.0, 1000.0], 2.5, 0.0, 20),
            (Component::Pv, [690.0, 450.0, 370.0, 320.0], 1.7, 0.0, 20),
            (Component::RunOfRiver, [1000.0; 4], 2.5, 0.005, 40),
            (Component::Reservoir, [1700.0; 4], 2.5, 0.005, 40),
            (Component::Electrolyzer, [800.0, 500.0, 400.0, 350.0], 3.0, 0.0, 10),
            (Component::Battery, [311.0, 175.0, 153.0, 131.0], 2.5, 0.0, 15),
        ];
        let components = rows
            .into_iter()
            .map(|(c, capex, fix, var, life)| {
                let by_year = YEARS
                    .into_iter()
                    .zip(capex)
                    .map(|(y, k)| (y, CostParams::new(k, fix, var, life)))
                    .collect();
                (c, by_year)
            })
            .collect();
        Self {
            discount_rate: 0.08,
            components,
        }
    }
}

impl TechnoEconomics {
    pub fn validate(&self) -> Result<()> {
        if !(self.discount_rate > 0.0 && self.discount_rate < 1.0) {
            return Err(Error::Config(format!(
                "discount rate must lie in (0, 1), got {}",
                self.discount_rate
            )));
        }
        for (c, years) in &self.components {
            for (y, p) in years {
                if p.lifetime == 0 || !(p.capex >= 0.0) || !(p.fix_om_pct >= 0.0) || !(p.var_om >= 0.0) {
                    return Err(Error::Config(format!("invalid cost parameters for {c} {y}: {p:?}")));
                }
            }
        }
        Ok(())
    }

    pub fn get(&self, component: Component, year: u16) -> Result<CostParams> {
        self.components
            .get(&component)
            .and_then(|m| m.get(&year))
            .copied()
            .ok_or_else(|| Error::Config(format!("no cost data for {component} in {year}")))
    }

    /// Annual cost per unit of capacity: `(CRF + fix_om)·capex`.
    pub fn annualized_capex(&self, component: Component, year: u16) -> Result<f64> {
        let p = self.get(component, year)?;
        Ok((crf(self.discount_rate, p.lifetime) + p.fix_om()) * p.capex)
    }
}

/// Capital recovery factor `r(1+r)^n / ((1+r)^n - 1)`, `1/n` at `r = 0`.
pub fn crf(rate: f64, lifetime: u32) -> f64 {
    let n = lifetime as f64;
    if rate == 0.0 {
        return 1.0 / n;
    }
    let g = n * rate.ln_1p();
    rate * g.exp() / g.exp_m1()
}

/// Levelized cost in €/kWh for a plant of `capacity_mw` producing
/// `annual_energy_mwh` per year.
pub fn lcoe(
    capacity_mw: f64,
    annual_energy_mwh: f64,
    te: &TechnoEconomics,
    component: Component,
    year: u16,
) -> Result<f64> {
    if !(annual_energy_mwh > 0.0) {
        return Err(Error::NoYield);
    }
    if !(capacity_mw > 0.0) {
        return Err(Error::invalid(format!("capacity must be positive, got {capacity_mw}")));
    }
    let p = te.get(component, year)?;
    let annual_cost_eur = te.annualized_capex(component, year)? * capacity_mw * 1000.0;
    Ok(annual_cost_eur / (annual_energy_mwh * 1000.0) + p.var_om)
}
