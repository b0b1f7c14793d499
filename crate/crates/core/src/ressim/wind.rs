use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::weather::WeatherSeries;
use crate::error::{Error, Result};
use crate::placement::TurbineSpec;

/// Parametric power curve and log-law shear.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindModel {
    /// Surface roughness length in m.
    pub roughness_m: f64,
    /// kg/m³
    pub air_density: f64,
    pub cp_eff: f64,
    /// m/s
    pub cut_in: f64,
    /// m/s
    pub cut_out: f64,
}

impl Default for WindModel {
    fn default() -> Self {
        Self {
            roughness_m: 0.1,
            air_density: 1.225,
            cp_eff: 0.40,
            cut_in: 3.0,
            cut_out: 25.0,
        }
    }
}

impl WindModel {
    /// Wind speed at which the rotor reaches rated power.
    pub fn rated_speed(&self, spec: &TurbineSpec) -> f64 {
        let area = PI * (spec.rotor_diameter / 2.0).powi(2);
        (spec.rated_power * 1.0e6 / (0.5 * self.air_density * self.cp_eff * area)).cbrt()
    }

    /// Capacity factor at hub-height speed `v` for rated speed `v_r`.
    pub fn power_curve(&self, v: f64, v_r: f64) -> f64 {
        if v < self.cut_in || v > self.cut_out {
            0.0
        } else if v >= v_r {
            1.0
        } else {
            let ci3 = self.cut_in.powi(3);
            ((v.powi(3) - ci3) / (v_r.powi(3) - ci3)).clamp(0.0, 1.0)
        }
    }

    /// Log-law factor from `reference_height` to `hub_height`.
    pub fn shear_factor(&self, reference_height: f64, hub_height: f64) -> Result<f64> {
        let z0 = self.roughness_m;
        if !(z0 > 0.0) {
            return Err(Error::invalid(format!("roughness length must be positive, got {z0}")));
        }
        if !(reference_height > z0) || !(hub_height > z0) {
            return Err(Error::invalid("reference and hub heights must exceed the roughness length"));
        }
        Ok((hub_height / z0).ln() / (reference_height / z0).ln())
    }
}

pub fn simulate_wind(weather: &WeatherSeries, spec: &TurbineSpec) -> Result<Vec<f64>> {
    simulate_wind_with(weather, spec, &WindModel::default())
}

/// Hourly capacity factors for one turbine.
pub fn simulate_wind_with(weather: &WeatherSeries, spec: &TurbineSpec, model: &WindModel) -> Result<Vec<f64>> {
    spec.validate()?;
    if model.cut_in >= model.cut_out || model.cut_in < 0.0 {
        return Err(Error::invalid("cut-in speed must be below cut-out speed"));
    }
    let shear = model.shear_factor(weather.reference_height, spec.hub_height)?;
    let v_r = model.rated_speed(spec);
    Ok(weather
        .wind_speed
        .iter()
        .map(|&v| model.power_curve(v * shear, v_r))
        .collect())
}
