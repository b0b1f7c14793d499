use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean Earth radius used for the spherical projection, in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// Spherical Lambert azimuthal equal-area projection centered on a region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub center_lon: f64,
    pub center_lat: f64,
}

impl Projection {
    pub fn new(center_lon: f64, center_lat: f64) -> Result<Self> {
        if !(-180.0..=180.0).contains(&center_lon) || !(-90.0..=90.0).contains(&center_lat) {
            return Err(Error::invalid(format!(
                "projection center ({center_lon}, {center_lat}) out of range"
            )));
        }
        Ok(Self {
            center_lon,
            center_lat,
        })
    }

    /// lon/lat degrees to planar meters.
    pub fn forward(&self, lon: f64, lat: f64) -> Result<(f64, f64)> {
        if !(-90.0..=90.0).contains(&lat) || !lon.is_finite() {
            return Err(Error::invalid(format!("latitude {lat} out of range")));
        }
        let (sin_p0, cos_p0) = self.center_lat.to_radians().sin_cos();
        let (sin_p, cos_p) = lat.to_radians().sin_cos();
        let (sin_dl, cos_dl) = (lon - self.center_lon).to_radians().sin_cos();
        let denom = 1.0 + sin_p0 * sin_p + cos_p0 * cos_p * cos_dl;
        if denom <= 1e-12 {
            return Err(Error::ProjectionSingularity);
        }
        let k = (2.0 / denom).sqrt();
        Ok((
            EARTH_RADIUS_M * k * cos_p * sin_dl,
            EARTH_RADIUS_M * k * (cos_p0 * sin_p - sin_p0 * cos_p * cos_dl),
        ))
    }

    /// Planar meters back to lon/lat degrees.
    pub fn inverse(&self, x: f64, y: f64) -> Result<(f64, f64)> {
        let rho = x.hypot(y);
        if rho == 0.0 {
            return Ok((self.center_lon, self.center_lat));
        }
        let ratio = rho / (2.0 * EARTH_RADIUS_M);
        if ratio > 1.0 {
            return Err(Error::invalid(format!("planar point ({x}, {y}) outside the projected disc")));
        }
        let c = 2.0 * ratio.asin();
        let (sin_c, cos_c) = c.sin_cos();
        let (sin_p0, cos_p0) = self.center_lat.to_radians().sin_cos();
        let lat = (cos_c * sin_p0 + y * sin_c * cos_p0 / rho).clamp(-1.0, 1.0).asin();
        let dl = (x * sin_c).atan2(rho * cos_p0 * cos_c - y * sin_p0 * sin_c);
        let mut lon = self.center_lon + dl.to_degrees();
        if lon > 180.0 {
            lon -= 360.0;
        } else if lon < -180.0 {
            lon += 360.0;
        }
        Ok((lon, lat.to_degrees()))
    }

    /// Great-circle distance in meters between the projection center and a
    /// projected point. Exact for this projection, since planar radius is
    /// `2R·sin(c/2)` for angular distance `c`.
    pub fn distance_from_center(x: f64, y: f64) -> f64 {
        let ratio = (x.hypot(y) / (2.0 * EARTH_RADIUS_M)).min(1.0);
        2.0 * EARTH_RADIUS_M * ratio.asin()
    }
}

/// Haversine great-circle distance in meters.
pub fn great_circle_m(lon1: f64, lat1: f64, lon2: f64, lat2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = p2 - p1;
    let dl = (lon2 - lon1).to_radians();
    let a = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * a.sqrt().min(1.0).asin()
}
