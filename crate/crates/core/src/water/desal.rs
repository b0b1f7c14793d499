use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Geometry, Projection, VectorFeature, EARTH_RADIUS_M};
use crate::ressim::crf;

const RHO_WATER: f64 = 1000.0;
const GRAVITY: f64 = 9.81;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipeParams {
    /// € per (m³/h) of capacity per km
    pub capex_per_m3h_km: f64,
    /// Years
    pub lifetime: u32,
    /// Percent of capex per year
    pub fix_om_pct: f64,
    /// Friction head in m per km
    pub friction_head_m_per_km: f64,
    pub pump_efficiency: f64,
}

impl Default for PipeParams {
    fn default() -> Self {
        Self {
            capex_per_m3h_km: 50.0,
            lifetime: 40,
            fix_om_pct: 1.0,
            friction_head_m_per_km: 1.0,
            pump_efficiency: 0.75,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DesalParams {
    /// kWh per m³
    pub specific_energy: f64,
    /// € per (m³/day) of capacity
    pub capex_per_capacity: f64,
    /// Percent of capex per year
    pub fix_om_pct: f64,
    /// Years
    pub lifetime: u32,
    /// m³/h
    pub reference_plant: f64,
    /// Round-the-clock electricity price as a multiple of the solar LCOE.
    pub solar_lcoe_24h_multiplier: f64,
    pub detour_factor: f64,
    pub availability: f64,
    pub discount_rate: f64,
    /// Regions farther from the coast than this (km) have no access.
    pub max_coast_distance_km: f64,
    pub pipe: PipeParams,
}

impl Default for DesalParams {
    fn default() -> Self {
        Self {
            specific_energy: 3.5,
            capex_per_capacity: 1000.0,
            fix_om_pct: 2.5,
            lifetime: 25,
            reference_plant: 367_000.0,
            solar_lcoe_24h_multiplier: 3.0,
            detour_factor: 1.3,
            availability: 0.95,
            discount_rate: 0.08,
            max_coast_distance_km: 5000.0,
            pipe: PipeParams::default(),
        }
    }
}

impl DesalParams {
    pub fn validate(&self) -> Result<()> {
        let pos = [
            self.specific_energy,
            self.capex_per_capacity,
            self.reference_plant,
            self.solar_lcoe_24h_multiplier,
            self.availability,
            self.discount_rate,
            self.max_coast_distance_km,
            self.pipe.capex_per_m3h_km,
            self.pipe.pump_efficiency,
        ];
        if pos.iter().any(|v| !(*v > 0.0))
            || self.fix_om_pct < 0.0
            || self.pipe.fix_om_pct < 0.0
            || self.pipe.friction_head_m_per_km < 0.0
            || self.lifetime == 0
            || self.pipe.lifetime == 0
            || self.availability > 1.0
            || self.pipe.pump_efficiency > 1.0
        {
            return Err(Error::Config("desalination parameters must be positive".into()));
        }
        if self.detour_factor < 1.0 {
            return Err(Error::Config("detour factor must be at least 1".into()));
        }
        Ok(())
    }

    fn electricity_price(&self, solar_lcoe: f64) -> f64 {
        self.solar_lcoe_24h_multiplier * solar_lcoe
    }

    /// Plant levelized cost of water in €/m³.
    pub fn plant_lcow(&self, solar_lcoe: f64) -> f64 {
        let annuity = crf(self.discount_rate, self.lifetime) + self.fix_om_pct / 100.0;
        let m3_per_year_per_capacity = 365.0 * self.availability;
        annuity * self.capex_per_capacity / m3_per_year_per_capacity
            + self.specific_energy * self.electricity_price(solar_lcoe)
    }

    /// Pumping energy in kWh/m³ over a routed length in km.
    pub fn pump_energy(&self, routed_km: f64, elevation_m: f64) -> f64 {
        let head = elevation_m.max(0.0) + self.pipe.friction_head_m_per_km * routed_km;
        RHO_WATER * GRAVITY * head / (3.6e6 * self.pipe.pump_efficiency)
    }

    /// Pipeline annuity plus pumping cost in €/m³ over a routed length in km.
    pub fn transport_cost(&self, routed_km: f64, elevation_m: f64, solar_lcoe: f64) -> f64 {
        let p = &self.pipe;
        let annuity = crf(self.discount_rate, p.lifetime) + p.fix_om_pct / 100.0;
        let pipe = annuity * p.capex_per_m3h_km * routed_km / (8760.0 * self.availability);
        pipe + self.pump_energy(routed_km, elevation_m) * self.electricity_price(solar_lcoe)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesalCost {
    /// Great-circle distance from the region centroid to the coast, km.
    pub coast_distance_km: f64,
    /// Routed pipeline length, km.
    pub routed_km: f64,
    pub plant: f64,
    pub transport: f64,
    /// €/m³ delivered.
    pub delivered: f64,
}

/// Delivered cost for a known straight-line coast distance in km.
pub fn delivered_cost(params: &DesalParams, coast_distance_km: f64, elevation_m: f64, solar_lcoe: f64) -> Result<DesalCost> {
    params.validate()?;
    if !(solar_lcoe > 0.0) {
        return Err(Error::invalid(format!("solar LCOE must be positive, got {solar_lcoe}")));
    }
    if !(coast_distance_km >= 0.0) {
        return Err(Error::invalid("coast distance must be >= 0"));
    }
    if coast_distance_km > params.max_coast_distance_km {
        return Err(Error::NoCoastalAccess(coast_distance_km));
    }
    let routed_km = coast_distance_km * params.detour_factor;
    let plant = params.plant_lcow(solar_lcoe);
    let transport = params.transport_cost(routed_km, elevation_m, solar_lcoe);
    Ok(DesalCost {
        coast_distance_km,
        routed_km,
        plant,
        transport,
        delivered: plant + transport,
    })
}

fn origin_segment_distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (-(a[0] * dx + a[1] * dy) / len2).clamp(0.0, 1.0)
    };
    (a[0] + t * dx).hypot(a[1] + t * dy)
}

fn collect_lines(g: &Geometry, out: &mut Vec<Vec<[f64; 2]>>) {
    match g {
        Geometry::Polyline(cs) => out.push(cs.clone()),
        Geometry::Polygon(rings) => out.extend(rings.iter().cloned()),
        Geometry::Point(c) => out.push(vec![*c]),
        Geometry::Multi(parts) => parts.iter().for_each(|p| collect_lines(p, out)),
    }
}

/// Great-circle distance in km from the region centroid to the nearest
/// point of the coastline.
///
/// Distances are measured in an azimuthal equal-area frame centered on the
/// centroid, where radial planar distance maps exactly to arc length.
pub fn coast_distance_km(region: &VectorFeature, coast: &[VectorFeature]) -> Result<f64> {
    let [lon, lat] = region.centroid_lonlat()?;
    let proj = Projection::new(lon, lat)?;
    let mut best = f64::INFINITY;
    for feature in coast {
        let mut lines = Vec::new();
        collect_lines(&feature.geometry, &mut lines);
        for line in lines {
            // coastline vertices on the far hemisphere cannot be nearest
            let pts: Vec<Option<[f64; 2]>> = line
                .iter()
                .map(|c| proj.forward(c[0], c[1]).ok().map(|(x, y)| [x, y]))
                .collect();
            if pts.len() == 1 {
                if let Some(p) = pts[0] {
                    best = best.min(p[0].hypot(p[1]));
                }
            }
            for w in pts.windows(2) {
                if let (Some(a), Some(b)) = (w[0], w[1]) {
                    best = best.min(origin_segment_distance(a, b));
                }
            }
        }
    }
    if !best.is_finite() {
        return Err(Error::NoCoastalAccess(f64::INFINITY));
    }
    let r2 = 2.0 * EARTH_RADIUS_M;
    Ok(r2 * (best / r2).min(1.0).asin() / 1000.0)
}

/// Delivered desalinated water cost for a region.
pub fn desal_water_cost(
    region: &VectorFeature,
    coast: &[VectorFeature],
    elevation_m: f64,
    solar_lcoe: f64,
    params: &DesalParams,
) -> Result<DesalCost> {
    let d = coast_distance_km(region, coast)?;
    delivered_cost(params, d, elevation_m, solar_lcoe)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_transport_limit() {
        let p = DesalParams::default();
        let c = delivered_cost(&p, 0.0, 0.0, 0.02).unwrap();
        assert_eq!(c.delivered, c.plant);
        assert_eq!(c.transport, 0.0);
    }

    #[test]
    fn monotone_in_distance_and_elevation() {
        let p = DesalParams::default();
        let a = delivered_cost(&p, 100.0, 0.0, 0.02).unwrap().delivered;
        let b = delivered_cost(&p, 200.0, 0.0, 0.02).unwrap().delivered;
        let c = delivered_cost(&p, 200.0, 300.0, 0.02).unwrap().delivered;
        assert!(a < b && b < c);
        // below sea level pumps nothing extra
        assert_eq!(
            delivered_cost(&p, 200.0, -50.0, 0.02).unwrap().delivered,
            delivered_cost(&p, 200.0, 0.0, 0.02).unwrap().delivered
        );
    }

    #[test]
    fn far_inland_has_no_access() {
        let p = DesalParams::default();
        assert!(matches!(delivered_cost(&p, 5001.0, 0.0, 0.02), Err(Error::NoCoastalAccess(_))));
        assert!(delivered_cost(&p, 10.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn coast_distance_along_meridian() {
        // square around (2, 7.5) and a coastline along latitude 6.5
        let region = VectorFeature::new(Geometry::Polygon(vec![vec![
            [1.9, 7.4],
            [2.1, 7.4],
            [2.1, 7.6],
            [1.9, 7.6],
            [1.9, 7.4],
        ]]))
        .unwrap();
        let coast = VectorFeature::new(Geometry::Polyline(vec![[0.0, 6.5], [4.0, 6.5]])).unwrap();
        let d = coast_distance_km(&region, &[coast]).unwrap();
        let [_, clat] = region.centroid_lonlat().unwrap();
        let expected = EARTH_RADIUS_M * (clat - 6.5).to_radians() / 1000.0;
        // the chord between vertices bulges slightly poleward of the parallel
        assert!((d - expected).abs() < 0.5, "{d} vs {expected}");
    }
}
