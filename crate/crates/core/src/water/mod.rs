//! Groundwater sustainable yield and desalinated water costs.

pub mod balance;
pub mod desal;
pub mod scenario;

pub use balance::{
    recharge, recharge_value, region_mean, region_volume, sustainable_yield, sustainable_yield_value, Case,
    WaterBalanceInputs,
};
pub use desal::{coast_distance_km, delivered_cost, desal_water_cost, DesalCost, DesalParams, PipeParams};
pub use scenario::{
    scenario_average, window_for, DirSource, MemorySource, Rcp, ScenarioSpec, WaterScenarioResult, WaterSource,
};

/// Default groundwater extraction cost in €/m³.
pub const DEFAULT_GROUNDWATER_COST: f64 = 0.10;
