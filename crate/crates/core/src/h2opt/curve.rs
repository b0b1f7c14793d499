use std::io::Write;

use serde::{Deserialize, Serialize};

use super::lp::SolverOptions;
use super::model::{build_lp, solve_lp, NodeModel, SolveResult, TemporalResolution};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CurveConfig {
    /// First demand step, t H₂ per year.
    pub base_demand_t: f64,
    /// Demand grows by this factor per step.
    pub growth: f64,
    pub max_steps: usize,
    pub resolution: TemporalResolution,
}

impl Default for CurveConfig {
    fn default() -> Self {
        Self {
            base_demand_t: 1000.0,
            growth: 1.06,
            max_steps: 50,
            resolution: TemporalResolution::default(),
        }
    }
}

impl CurveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.base_demand_t > 0.0) || !self.base_demand_t.is_finite() {
            return Err(Error::Config("base demand must be positive".into()));
        }
        if !(self.growth > 1.0) || !self.growth.is_finite() {
            return Err(Error::Config("demand growth factor must exceed 1".into()));
        }
        if self.max_steps == 0 {
            return Err(Error::Config("max_steps must be at least 1".into()));
        }
        Ok(())
    }

    pub fn demand_at(&self, step: usize) -> f64 {
        self.base_demand_t * self.growth.powi(step as i32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveEnd {
    /// The next demand step could not be met.
    InfeasibleAtNextStep,
    MaxSteps,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub step: usize,
    pub demand_t: f64,
    pub lcoh: f64,
    pub result: SolveResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostPotentialCurve {
    pub region_id: String,
    pub year: u16,
    pub points: Vec<CurvePoint>,
    pub end: CurveEnd,
    /// Set when even the first step is infeasible.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub diagnostic: Option<String>,
}

impl CostPotentialCurve {
    pub fn max_demand_t(&self) -> f64 {
        self.points.last().map_or(0.0, |p| p.demand_t)
    }
}

/// Solves the node at geometrically growing demand until it becomes
/// infeasible or `max_steps` points are collected.
pub fn cost_potential_curve(node: &NodeModel, config: &CurveConfig) -> Result<CostPotentialCurve> {
    cost_potential_curve_with(node, config, &SolverOptions::default())
}

pub fn cost_potential_curve_with(node: &NodeModel, config: &CurveConfig, opts: &SolverOptions) -> Result<CostPotentialCurve> {
    config.validate()?;
    node.validate()?;
    let mut points = Vec::new();
    let mut end = CurveEnd::MaxSteps;
    let mut diagnostic = None;
    for step in 0..config.max_steps {
        let demand = config.demand_at(step);
        let lp = build_lp(node, demand, config.resolution)?;
        match solve_lp(&lp, opts) {
            Ok(mut r) => {
                r.dispatch = None;
                points.push(CurvePoint {
                    step,
                    demand_t: demand,
                    lcoh: r.lcoh,
                    result: r,
                });
            }
            Err(Error::Infeasible(msg)) => {
                end = CurveEnd::InfeasibleAtNextStep;
                if step == 0 {
                    log::warn!("{}: no feasible demand step: {msg}", node.region_id);
                    diagnostic = Some(msg);
                }
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(CostPotentialCurve {
        region_id: node.region_id.clone(),
        year: node.year,
        points,
        end,
        diagnostic,
    })
}

/// Demand that remains for export after local hydrogen and electricity needs,
/// in t H₂. Local electricity (MWh) counts at the electrolyzer's specific energy.
pub fn deduct_local_demand(demand_t: f64, local_h2_t: f64, local_elec_mwh: f64, kwh_per_kg: f64) -> f64 {
    (demand_t - local_h2_t - local_elec_mwh / kwh_per_kg).max(0.0)
}

pub const CURVE_CSV_HEADER: [&str; 9] = [
    "step",
    "demand_t",
    "lcoh",
    "share_pv",
    "share_wind",
    "share_hydro",
    "share_ely",
    "share_batt",
    "share_water",
];

pub fn write_curve_csv<W: Write>(curve: &CostPotentialCurve, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CURVE_CSV_HEADER)?;
    for p in &curve.points {
        let s = &p.result.shares;
        let row = [p.demand_t, p.lcoh, s.pv, s.wind, s.hydro, s.ely, s.batt, s.water];
        let mut rec = vec![p.step.to_string()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(Error::Io)?;
    Ok(())
}

pub fn curve_csv_string(curve: &CostPotentialCurve) -> Result<String> {
    let mut buf = Vec::new();
    write_curve_csv(curve, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}
