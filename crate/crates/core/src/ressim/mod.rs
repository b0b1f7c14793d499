//! Hourly generation, levelized costs and LCOE clustering.

pub mod cluster;
pub mod econ;
pub mod hydro;
pub mod pv;
pub mod weather;
pub mod wind;

pub use cluster::{cluster_by_lcoe, default_bins, GenAsset, LcoeCluster};
pub use econ::{crf, lcoe, Component, CostParams, TechnoEconomics, YEARS};
pub use hydro::{hydro_hourly, read_hydro_csv, HydroPlant, HydroType};
pub use pv::{simulate_pv, simulate_pv_with, PvModel};
pub use weather::{read_weather_csv, WeatherSeries, DEFAULT_REFERENCE_HEIGHT, HOURS_PER_YEAR};
pub use wind::{simulate_wind, simulate_wind_with, WindModel};
