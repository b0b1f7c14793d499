use serde::{Deserialize, Serialize};

use super::weather::WeatherSeries;

/// Fixed open-field module with a NOCT cell-temperature model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PvModel {
    /// °C
    pub noct: f64,
    /// Power temperature coefficient per K.
    pub gamma: f64,
}

impl Default for PvModel {
    fn default() -> Self {
        Self {
            noct: 45.0,
            gamma: -0.0045,
        }
    }
}

impl PvModel {
    pub fn cell_temperature(&self, ghi: f64, t_amb: f64) -> f64 {
        t_amb + ghi * (self.noct - 20.0) / 800.0
    }

    pub fn capacity_factor(&self, ghi: f64, t_amb: f64) -> f64 {
        let t_cell = self.cell_temperature(ghi, t_amb);
        ((ghi / 1000.0) * (1.0 + self.gamma * (t_cell - 25.0))).clamp(0.0, 1.0)
    }
}

pub fn simulate_pv(weather: &WeatherSeries) -> Vec<f64> {
    simulate_pv_with(weather, &PvModel::default())
}

pub fn simulate_pv_with(weather: &WeatherSeries, model: &PvModel) -> Vec<f64> {
    weather
        .ghi
        .iter()
        .zip(&weather.air_temp)
        .map(|(&g, &t)| model.capacity_factor(g, t))
        .collect()
}
