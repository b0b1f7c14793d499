use serde::{Deserialize, Serialize};

use super::lp::{self, LpInstance, SolverOptions};
use crate::error::{Error, Result};
use crate::ressim::{Component, HydroType, TechnoEconomics, HOURS_PER_YEAR};
use crate::tech::Tech;
use crate::water::DEFAULT_GROUNDWATER_COST;

/// Electrolyzer specific energy in kWh per kg H₂.
pub const ELECTROLYZER_KWH_PER_KG: f64 = 47.6;
/// Process water in m³ per kg H₂ (9 kg of water).
pub const WATER_M3_PER_KG: f64 = 0.009;

/// A renewable supply block: one LCOE cluster with its potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResSource {
    pub tech: Tech,
    /// Upper bound on installed capacity, MW.
    pub potential_mw: f64,
    /// Hourly capacity factors over one year.
    pub cf_series: Vec<f64>,
    /// Informational, €/kWh.
    #[serde(default)]
    pub lcoe: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HydroSource {
    pub id: String,
    pub kind: HydroType,
    /// Existing capacity, MW.
    pub capacity_mw: f64,
    /// Available generation in MWh per hour over one year.
    pub series: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WaterBudget {
    /// Sustainable groundwater volume, m³/yr.
    pub groundwater_m3: f64,
    /// €/m³
    pub groundwater_cost: f64,
    /// Delivered desalinated water, €/m³; `None` without coastal access.
    pub desal_cost: Option<f64>,
}

impl Default for WaterBudget {
    fn default() -> Self {
        Self {
            groundwater_m3: 0.0,
            groundwater_cost: DEFAULT_GROUNDWATER_COST,
            desal_cost: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BatteryParams {
    /// One-way efficiency.
    pub efficiency: f64,
    /// Maximum charge or discharge power per unit of energy capacity, 1/h.
    pub c_rate: f64,
    /// Optional cap on the energy capacity, MWh.
    pub max_energy_mwh: Option<f64>,
}

impl Default for BatteryParams {
    fn default() -> Self {
        Self {
            efficiency: 0.96,
            c_rate: 1.0,
            max_energy_mwh: None,
        }
    }
}

/// Single-node description of one region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeModel {
    pub region_id: String,
    pub year: u16,
    pub sources: Vec<ResSource>,
    #[serde(default)]
    pub hydro: Vec<HydroSource>,
    #[serde(default)]
    pub water: WaterBudget,
    #[serde(default)]
    pub techno_economics: TechnoEconomics,
    #[serde(default)]
    pub battery: BatteryParams,
    #[serde(default = "default_kwh_per_kg")]
    pub electrolyzer_kwh_per_kg: f64,
    #[serde(default = "default_water_per_kg")]
    pub water_m3_per_kg: f64,
}

fn default_kwh_per_kg() -> f64 {
    ELECTROLYZER_KWH_PER_KG
}

fn default_water_per_kg() -> f64 {
    WATER_M3_PER_KG
}

impl NodeModel {
    pub fn new(region_id: &str, year: u16) -> Self {
        Self {
            region_id: region_id.to_string(),
            year,
            sources: Vec::new(),
            hydro: Vec::new(),
            water: WaterBudget::default(),
            techno_economics: TechnoEconomics::default(),
            battery: BatteryParams::default(),
            electrolyzer_kwh_per_kg: ELECTROLYZER_KWH_PER_KG,
            water_m3_per_kg: WATER_M3_PER_KG,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = HOURS_PER_YEAR;
        for (k, s) in self.sources.iter().enumerate() {
            if !(s.potential_mw > 0.0) || !s.potential_mw.is_finite() {
                return Err(Error::invalid(format!("source {k}: potential must be positive")));
            }
            if s.cf_series.len() != n || s.cf_series.iter().any(|c| !(0.0..=1.0).contains(c)) {
                return Err(Error::invalid(format!("source {k}: needs {n} capacity factors in [0, 1]")));
            }
        }
        for h in &self.hydro {
            if !(h.capacity_mw > 0.0) || h.series.len() != n || h.series.iter().any(|v| !(*v >= 0.0)) {
                return Err(Error::invalid(format!(
                    "hydro plant {}: needs positive capacity and {n} nonnegative values",
                    h.id
                )));
            }
        }
        let w = &self.water;
        if !(w.groundwater_m3 >= 0.0) || !(w.groundwater_cost >= 0.0) || w.desal_cost.is_some_and(|c| !(c >= 0.0)) {
            return Err(Error::invalid("water budget and costs must be >= 0"));
        }
        let b = &self.battery;
        if !(b.efficiency > 0.0 && b.efficiency <= 1.0) || !(b.c_rate > 0.0) || b.max_energy_mwh.is_some_and(|e| !(e >= 0.0)) {
            return Err(Error::invalid("invalid battery parameters"));
        }
        if !(self.electrolyzer_kwh_per_kg > 0.0) || !(self.water_m3_per_kg >= 0.0) {
            return Err(Error::invalid("electrolyzer parameters must be positive"));
        }
        self.techno_economics.validate()?;
        for c in Component::ALL {
            self.techno_economics.get(c, self.year)?;
        }
        Ok(())
    }

    /// Flat electrolyzer load in MW for an annual demand in t H₂.
    pub fn electrolyzer_load_mw(&self, demand_t: f64) -> f64 {
        demand_t * self.electrolyzer_kwh_per_kg / HOURS_PER_YEAR as f64
    }
}

/// How the year is discretized for the LP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TemporalResolution {
    Hourly,
    /// Contiguous blocks of `hours`, averaged.
    Downsample { hours: usize },
    /// `days` evenly spread days of 24 hours, each standing for `365/days` days.
    RepresentativeDays { days: usize },
}

impl Default for TemporalResolution {
    fn default() -> Self {
        TemporalResolution::RepresentativeDays { days: 24 }
    }
}

/// Period `t`: `hours` are the original hour indices it averages, `duration`
/// drives storage dynamics and `weight` scales it to a full year.
#[derive(Debug, Clone, PartialEq)]
pub struct Period {
    pub hours: Vec<usize>,
    pub duration_h: f64,
    pub weight_h: f64,
}

pub fn periods(resolution: TemporalResolution) -> Result<Vec<Period>> {
    let n = HOURS_PER_YEAR;
    Ok(match resolution {
        TemporalResolution::Hourly => (0..n)
            .map(|h| Period {
                hours: vec![h],
                duration_h: 1.0,
                weight_h: 1.0,
            })
            .collect(),
        TemporalResolution::Downsample { hours } => {
            if hours == 0 || hours > n {
                return Err(Error::invalid(format!("downsample block must be 1..={n} hours")));
            }
            (0..n)
                .step_by(hours)
                .map(|s| {
                    let e = (s + hours).min(n);
                    Period {
                        hours: (s..e).collect(),
                        duration_h: (e - s) as f64,
                        weight_h: (e - s) as f64,
                    }
                })
                .collect()
        }
        TemporalResolution::RepresentativeDays { days } => {
            if days == 0 || days > 365 {
                return Err(Error::invalid("representative days must be 1..=365"));
            }
            let weight = 365.0 / days as f64;
            (0..days)
                .flat_map(|k| {
                    let day = ((k as f64 + 0.5) * 365.0 / days as f64).floor() as usize;
                    (0..24).map(move |h| Period {
                        hours: vec![day * 24 + h],
                        duration_h: 1.0,
                        weight_h: weight,
                    })
                })
                .collect()
        }
    })
}

fn aggregate(series: &[f64], periods: &[Period]) -> Vec<f64> {
    periods
        .iter()
        .map(|p| p.hours.iter().map(|&h| series[h]).sum::<f64>() / p.hours.len() as f64)
        .collect()
}

/// Column indices of the node LP.
#[derive(Debug, Clone)]
pub struct Layout {
    pub res_cap: Vec<usize>,
    pub hydro_cap: Vec<usize>,
    /// `hydro_gen[h][t]`
    pub hydro_gen: Vec<Vec<usize>>,
    pub ely_cap: usize,
    pub batt_energy: usize,
    pub charge: Vec<usize>,
    pub discharge: Vec<usize>,
    pub soc: Vec<usize>,
    pub curtail: Vec<usize>,
    pub v_gw: usize,
    pub v_ds: usize,
    pub balance_rows: Vec<usize>,
}

/// A built node LP together with what is needed to interpret its solution.
#[derive(Debug, Clone)]
pub struct NodeLp {
    pub lp: LpInstance,
    pub layout: Layout,
    pub periods: Vec<Period>,
    pub res_cf: Vec<Vec<f64>>,
    pub hydro_avail: Vec<Vec<f64>>,
    pub demand_t: f64,
    pub load_mw: f64,
    pub water_m3: f64,
    res_techs: Vec<Tech>,
    res_unit_cost: Vec<f64>,
    hydro_unit_cost: Vec<f64>,
    hydro_var_cost: Vec<f64>,
    ely_unit_cost: f64,
    batt_unit_cost: f64,
    region_id: String,
    efficiency: f64,
}

/// Builds the capacity-expansion LP for an annual demand of `demand_t` t H₂.
///
/// Power is in MW, energy in MWh and money in € per year.
pub fn build_lp(node: &NodeModel, demand_t: f64, resolution: TemporalResolution) -> Result<NodeLp> {
    if !(demand_t > 0.0) || !demand_t.is_finite() {
        return Err(Error::invalid(format!("demand must be positive, got {demand_t}")));
    }
    node.validate()?;
    let te = &node.techno_economics;
    let year = node.year;
    let per_mw = |c: Component| te.annualized_capex(c, year).map(|v| v * 1000.0);
    let periods = periods(resolution)?;
    let nt = periods.len();
    let load = node.electrolyzer_load_mw(demand_t);
    let water_m3 = node.water_m3_per_kg * demand_t * 1000.0;
    let eta = node.battery.efficiency;

    let mut lp = LpInstance::default();
    let balance_rows: Vec<usize> = (0..nt).map(|_| lp.add_row(load, load)).collect();
    let soc_rows: Vec<usize> = (0..nt).map(|_| lp.add_row(0.0, 0.0)).collect();
    let ely_row = lp.add_row(load, f64::INFINITY);
    let water_row = lp.add_row(water_m3, water_m3);
    // per period: charge ≤ c·E, discharge ≤ c·E, soc ≤ E
    let ch_rows: Vec<usize> = (0..nt).map(|_| lp.add_row(f64::NEG_INFINITY, 0.0)).collect();
    let dis_rows: Vec<usize> = (0..nt).map(|_| lp.add_row(f64::NEG_INFINITY, 0.0)).collect();
    let soc_cap_rows: Vec<usize> = (0..nt).map(|_| lp.add_row(f64::NEG_INFINITY, 0.0)).collect();

    let mut res_cf = Vec::new();
    let mut res_cap = Vec::new();
    let mut res_unit_cost = Vec::new();
    for s in &node.sources {
        let cost = per_mw(s.tech.into())?;
        let cf = aggregate(&s.cf_series, &periods);
        let col = lp.add_col(cost, 0.0, s.potential_mw);
        for (t, &f) in cf.iter().enumerate() {
            lp.set(balance_rows[t], col, f);
        }
        res_cf.push(cf);
        res_cap.push(col);
        res_unit_cost.push(cost);
    }

    let mut hydro_cap = Vec::new();
    let mut hydro_gen = Vec::new();
    let mut hydro_avail = Vec::new();
    let mut hydro_unit_cost = Vec::new();
    let mut hydro_var_cost = Vec::new();
    for h in &node.hydro {
        let comp = match h.kind {
            HydroType::RunOfRiver => Component::RunOfRiver,
            HydroType::Reservoir => Component::Reservoir,
        };
        let cost = per_mw(comp)?;
        let var = te.get(comp, year)?.var_om * 1000.0;
        let avail = aggregate(&h.series, &periods);
        let cap_col = lp.add_col(cost, 0.0, h.capacity_mw);
        let mut gens = Vec::with_capacity(nt);
        for (t, p) in periods.iter().enumerate() {
            // gen ≤ (available / existing capacity)·Cap
            let row = lp.add_row(f64::NEG_INFINITY, 0.0);
            let g = lp.add_col(var * p.weight_h, 0.0, f64::INFINITY);
            lp.set(row, g, 1.0);
            lp.set(row, cap_col, -avail[t] / h.capacity_mw);
            lp.set(balance_rows[t], g, 1.0);
            gens.push(g);
        }
        hydro_cap.push(cap_col);
        hydro_gen.push(gens);
        hydro_avail.push(avail);
        hydro_unit_cost.push(cost);
        hydro_var_cost.push(var);
    }

    let ely_cost = per_mw(Component::Electrolyzer)?;
    let ely_cap = lp.add_col(ely_cost, 0.0, f64::INFINITY);
    lp.set(ely_row, ely_cap, 1.0);

    let batt_cost = per_mw(Component::Battery)?;
    let batt_energy = lp.add_col(batt_cost, 0.0, node.battery.max_energy_mwh.unwrap_or(f64::INFINITY));
    let c_rate = node.battery.c_rate;
    let mut charge = Vec::with_capacity(nt);
    let mut discharge = Vec::with_capacity(nt);
    let mut soc = Vec::with_capacity(nt);
    let mut curtail = Vec::with_capacity(nt);
    for t in 0..nt {
        let ch = lp.add_col(0.0, 0.0, f64::INFINITY);
        let dis = lp.add_col(0.0, 0.0, f64::INFINITY);
        let s = lp.add_col(0.0, 0.0, f64::INFINITY);
        let cu = lp.add_col(0.0, 0.0, f64::INFINITY);
        lp.set(balance_rows[t], ch, -1.0);
        lp.set(balance_rows[t], dis, 1.0);
        lp.set(balance_rows[t], cu, -1.0);
        lp.set(ch_rows[t], ch, 1.0);
        lp.set(ch_rows[t], batt_energy, -c_rate);
        lp.set(dis_rows[t], dis, 1.0);
        lp.set(dis_rows[t], batt_energy, -c_rate);
        lp.set(soc_cap_rows[t], s, 1.0);
        lp.set(soc_cap_rows[t], batt_energy, -1.0);
        charge.push(ch);
        discharge.push(dis);
        soc.push(s);
        curtail.push(cu);
    }
    // soc[t+1] - soc[t] - d·(η·ch[t] - dis[t]/η) = 0, cyclic
    for t in 0..nt {
        let next = (t + 1) % nt;
        let d = periods[t].duration_h;
        let row = soc_rows[t];
        if next == t {
            // single period: the cycle closes on itself
        } else {
            lp.set(row, soc[next], 1.0);
            lp.set(row, soc[t], -1.0);
        }
        lp.set(row, charge[t], -d * eta);
        lp.set(row, discharge[t], d / eta);
    }

    let gw_cap = node.water.groundwater_m3;
    let v_gw = lp.add_col(node.water.groundwater_cost, 0.0, gw_cap);
    let (ds_cost, ds_cap) = match node.water.desal_cost {
        Some(c) => (c, f64::INFINITY),
        None => (0.0, 0.0),
    };
    let v_ds = lp.add_col(ds_cost, 0.0, ds_cap);
    lp.set(water_row, v_gw, 1.0);
    lp.set(water_row, v_ds, 1.0);

    Ok(NodeLp {
        lp,
        layout: Layout {
            res_cap,
            hydro_cap,
            hydro_gen,
            ely_cap,
            batt_energy,
            charge,
            discharge,
            soc,
            curtail,
            v_gw,
            v_ds,
            balance_rows,
        },
        periods,
        res_cf,
        hydro_avail,
        demand_t,
        load_mw: load,
        water_m3,
        res_techs: node.sources.iter().map(|s| s.tech).collect(),
        res_unit_cost,
        hydro_unit_cost,
        hydro_var_cost,
        ely_unit_cost: ely_cost,
        batt_unit_cost: batt_cost,
        region_id: node.region_id.clone(),
        efficiency: eta,
    })
}

/// Annual cost split by technology, € per year.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub pv: f64,
    pub wind: f64,
    pub hydro: f64,
    pub ely: f64,
    pub batt: f64,
    pub water: f64,
}

impl CostBreakdown {
    pub fn total(&self) -> f64 {
        self.pv + self.wind + self.hydro + self.ely + self.batt + self.water
    }

    /// Fractions of the total, in the same field order.
    pub fn shares(&self) -> CostBreakdown {
        let t = self.total();
        if t <= 0.0 {
            return CostBreakdown::default();
        }
        CostBreakdown {
            pv: self.pv / t,
            wind: self.wind / t,
            hydro: self.hydro / t,
            ely: self.ely / t,
            batt: self.batt / t,
            water: self.water / t,
        }
    }
}

/// Per-period dispatch in MW (SOC in MWh at the start of each period).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Dispatch {
    pub duration_h: Vec<f64>,
    pub weight_h: Vec<f64>,
    /// Gross available renewable output per source.
    pub res_gen: Vec<Vec<f64>>,
    pub hydro_gen: Vec<Vec<f64>>,
    pub charge: Vec<f64>,
    pub discharge: Vec<f64>,
    pub soc: Vec<f64>,
    pub curtail: Vec<f64>,
    pub electrolyzer: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Capacities {
    /// MW per renewable source, in node order.
    pub res_mw: Vec<f64>,
    pub res_tech: Vec<Tech>,
    pub hydro_mw: Vec<f64>,
    pub electrolyzer_mw: f64,
    pub battery_mwh: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub region_id: String,
    pub demand_t: f64,
    pub capacities: Capacities,
    /// € per year
    pub annual_cost: f64,
    /// € per kg
    pub lcoh: f64,
    pub groundwater_m3: f64,
    pub desal_m3: f64,
    pub costs: CostBreakdown,
    pub shares: CostBreakdown,
    /// Relative primal-dual gap reported by the solve.
    pub gap: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub dispatch: Option<Dispatch>,
}

impl SolveResult {
    /// Largest power balance violation relative to the largest term, over all periods.
    pub fn power_balance_residual(&self) -> f64 {
        let Some(d) = &self.dispatch else { return 0.0 };
        let mut worst = 0.0f64;
        for t in 0..d.charge.len() {
            let res: f64 = d.res_gen.iter().map(|g| g[t]).sum();
            let hyd: f64 = d.hydro_gen.iter().map(|g| g[t]).sum();
            let terms = [res, hyd, d.discharge[t], d.charge[t], d.curtail[t], d.electrolyzer[t]];
            let scale = terms.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            let r = res + hyd + d.discharge[t] - d.charge[t] - d.curtail[t] - d.electrolyzer[t];
            worst = worst.max(r.abs() / scale);
        }
        worst
    }

    /// Net stored energy over the cycle, MWh. Zero for a cyclic state of charge.
    pub fn soc_cycle_residual(&self, efficiency: f64) -> f64 {
        let Some(d) = &self.dispatch else { return 0.0 };
        (0..d.charge.len())
            .map(|t| d.duration_h[t] * (efficiency * d.charge[t] - d.discharge[t] / efficiency))
            .sum::<f64>()
            .abs()
    }

    /// `|water need - (groundwater + desal)|` in m³.
    pub fn water_residual(&self, water_m3_per_kg: f64) -> f64 {
        (water_m3_per_kg * self.demand_t * 1000.0 - self.groundwater_m3 - self.desal_m3).abs()
    }
}

/// Solves a built node LP. Infeasible instances are errors, never zeros.
pub fn solve_lp(node_lp: &NodeLp, opts: &SolverOptions) -> Result<SolveResult> {
    let sol = lp::solve(&node_lp.lp, opts).map_err(|e| match e {
        Error::Infeasible(_) => Error::Infeasible(format!(
            "{}: demand of {} t/yr cannot be met",
            node_lp.region_id, node_lp.demand_t
        )),
        other => other,
    })?;
    let x = |j: usize| sol.x[j].max(0.0);
    let l = &node_lp.layout;
    let nt = node_lp.periods.len();

    let res_mw: Vec<f64> = l.res_cap.iter().map(|&j| x(j)).collect();
    let hydro_mw: Vec<f64> = l.hydro_cap.iter().map(|&j| x(j)).collect();
    let mut costs = CostBreakdown::default();
    let src_techs = node_lp.res_techs.clone();
    for (k, &cap) in res_mw.iter().enumerate() {
        let c = cap * node_lp.res_unit_cost[k];
        match src_techs[k] {
            Tech::Pv => costs.pv += c,
            Tech::Wind => costs.wind += c,
        }
    }
    for (k, &cap) in hydro_mw.iter().enumerate() {
        costs.hydro += cap * node_lp.hydro_unit_cost[k];
        for (t, &g) in l.hydro_gen[k].iter().enumerate() {
            costs.hydro += node_lp.hydro_var_cost[k] * node_lp.periods[t].weight_h * x(g);
        }
    }
    let ely = x(l.ely_cap);
    let batt = x(l.batt_energy);
    costs.ely = ely * node_lp.ely_unit_cost;
    costs.batt = batt * node_lp.batt_unit_cost;
    let (gw, ds) = (x(l.v_gw), x(l.v_ds));
    costs.water = gw * node_lp.lp.col_cost[l.v_gw] + ds * node_lp.lp.col_cost[l.v_ds];

    let dispatch = Dispatch {
        duration_h: node_lp.periods.iter().map(|p| p.duration_h).collect(),
        weight_h: node_lp.periods.iter().map(|p| p.weight_h).collect(),
        res_gen: res_mw
            .iter()
            .zip(&node_lp.res_cf)
            .map(|(&cap, cf)| cf.iter().map(|f| f * cap).collect())
            .collect(),
        hydro_gen: l.hydro_gen.iter().map(|g| g.iter().map(|&j| x(j)).collect()).collect(),
        charge: l.charge.iter().map(|&j| x(j)).collect(),
        discharge: l.discharge.iter().map(|&j| x(j)).collect(),
        soc: l.soc.iter().map(|&j| x(j)).collect(),
        curtail: l.curtail.iter().map(|&j| x(j)).collect(),
        electrolyzer: vec![node_lp.load_mw; nt],
    };

    let annual_cost = costs.total();
    Ok(SolveResult {
        region_id: node_lp.region_id.clone(),
        demand_t: node_lp.demand_t,
        capacities: Capacities {
            res_mw,
            res_tech: src_techs,
            hydro_mw,
            electrolyzer_mw: ely,
            battery_mwh: batt,
        },
        annual_cost,
        lcoh: annual_cost / (node_lp.demand_t * 1000.0),
        groundwater_m3: gw,
        desal_m3: ds,
        shares: costs.shares(),
        costs,
        gap: sol.gap,
        dispatch: Some(dispatch),
    })
}

impl NodeLp {
    pub fn efficiency(&self) -> f64 {
        self.efficiency
    }
}

/// Builds and solves in one call.
pub fn solve_node(node: &NodeModel, demand_t: f64, resolution: TemporalResolution) -> Result<SolveResult> {
    solve_lp(&build_lp(node, demand_t, resolution)?, &SolverOptions::default())
}
