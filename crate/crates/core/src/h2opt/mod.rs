//! Least-cost hydrogen production per region and cost-potential curves.
//!
//! Each region is a single copper-plate node: renewable clusters, existing
//! hydro, a battery and an electrolyzer running at a flat load, with water
//! drawn from groundwater or delivered desalination.

pub mod curve;
pub mod lp;
pub mod model;

pub use curve::{
    cost_potential_curve, cost_potential_curve_with, curve_csv_string, deduct_local_demand, write_curve_csv,
    CostPotentialCurve, CurveConfig, CurveEnd, CurvePoint, CURVE_CSV_HEADER,
};
pub use lp::{LpInstance, LpSolution, SolverOptions};
pub use model::{
    build_lp, periods, solve_lp, solve_node, BatteryParams, Capacities, CostBreakdown, Dispatch, HydroSource, NodeLp,
    NodeModel, Period, ResSource, SolveResult, TemporalResolution, WaterBudget, ELECTROLYZER_KWH_PER_KG,
    WATER_M3_PER_KG,
};
