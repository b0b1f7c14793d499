use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tech::Tech;

/// A placed generator with its simulated output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenAsset {
    pub tech: Tech,
    /// MW
    pub capacity: f64,
    pub cf_series: Vec<f64>,
    /// €/kWh
    pub lcoe: f64,
    /// MWh per year
    pub annual_energy: f64,
}

impl GenAsset {
    pub fn new(tech: Tech, capacity: f64, cf_series: Vec<f64>, lcoe: f64) -> Self {
        let annual_energy = capacity * cf_series.iter().sum::<f64>();
        Self {
            tech,
            capacity,
            cf_series,
            lcoe,
            annual_energy,
        }
    }

    pub fn mean_cf(&self) -> f64 {
        self.cf_series.iter().sum::<f64>() / self.cf_series.len().max(1) as f64
    }
}

/// Capacity-weighted aggregate of the assets in one LCOE bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LcoeCluster {
    pub tech: Tech,
    pub bin_index: usize,
    /// MW
    pub capacity: f64,
    pub cf_series: Vec<f64>,
    /// €/kWh
    pub lcoe: f64,
    pub members: usize,
}

impl LcoeCluster {
    /// MWh per year.
    pub fn annual_energy(&self) -> f64 {
        self.capacity * self.cf_series.iter().sum::<f64>()
    }
}

/// Default bin counts: wind uses twice as many clusters as PV.
pub fn default_bins(tech: Tech) -> usize {
    match tech {
        Tech::Pv => 10,
        Tech::Wind => 20,
    }
}

/// Groups assets into `n_bins` evenly spaced LCOE bins on `[min, max]`.
/// Empty bins are dropped; clusters come out in ascending bin order.
pub fn cluster_by_lcoe(assets: &[GenAsset], n_bins: usize) -> Result<Vec<LcoeCluster>> {
    let first = assets
        .first()
        .ok_or_else(|| Error::invalid("cannot cluster an empty asset list"))?;
    if n_bins == 0 {
        return Err(Error::invalid("number of bins must be positive"));
    }
    let hours = first.cf_series.len();
    for a in assets {
        if a.tech != first.tech {
            return Err(Error::invalid("assets of different technologies cannot share clusters"));
        }
        if a.cf_series.len() != hours {
            return Err(Error::DimensionMismatch("assets have series of different lengths".into()));
        }
        if !(a.capacity > 0.0) || !a.lcoe.is_finite() {
            return Err(Error::invalid("assets need positive capacity and finite LCOE"));
        }
    }
    let lo = assets.iter().map(|a| a.lcoe).fold(f64::INFINITY, f64::min);
    let hi = assets.iter().map(|a| a.lcoe).fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / n_bins as f64;
    let bin_of = |l: f64| -> usize {
        if width == 0.0 {
            0
        } else {
            (((l - lo) / width).floor() as usize).min(n_bins - 1)
        }
    };

    struct Acc {
        capacity: f64,
        weighted: Vec<f64>,
        lcoe: f64,
        members: usize,
        lo: Vec<f64>,
        hi: Vec<f64>,
        lcoe_lo: f64,
        lcoe_hi: f64,
    }
    let mut bins: Vec<Option<Acc>> = (0..n_bins).map(|_| None).collect();
    for a in assets {
        let acc = bins[bin_of(a.lcoe)].get_or_insert_with(|| Acc {
            capacity: 0.0,
            weighted: vec![0.0; hours],
            lcoe: 0.0,
            members: 0,
            lo: vec![f64::INFINITY; hours],
            hi: vec![f64::NEG_INFINITY; hours],
            lcoe_lo: f64::INFINITY,
            lcoe_hi: f64::NEG_INFINITY,
        });
        acc.capacity += a.capacity;
        acc.lcoe += a.capacity * a.lcoe;
        acc.members += 1;
        acc.lcoe_lo = acc.lcoe_lo.min(a.lcoe);
        acc.lcoe_hi = acc.lcoe_hi.max(a.lcoe);
        for (h, &cf) in a.cf_series.iter().enumerate() {
            acc.weighted[h] += a.capacity * cf;
            acc.lo[h] = acc.lo[h].min(cf);
            acc.hi[h] = acc.hi[h].max(cf);
        }
    }
    Ok(bins
        .into_iter()
        .enumerate()
        .filter_map(|(i, acc)| {
            acc.map(|acc| {
                // weighted means can drift outside the envelope by rounding
                let lcoe = (acc.lcoe / acc.capacity).clamp(acc.lcoe_lo, acc.lcoe_hi);
                let cf_series = (0..hours)
                    .map(|h| (acc.weighted[h] / acc.capacity).clamp(acc.lo[h], acc.hi[h]))
                    .collect();
                LcoeCluster {
                    tech: first.tech,
                    bin_index: i,
                    capacity: acc.capacity,
                    cf_series,
                    lcoe,
                    members: acc.members,
                }
            })
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_assets_form_one_cluster() {
        let a = GenAsset::new(Tech::Pv, 2.0, vec![0.1, 0.5, 0.0], 0.03);
        let c = cluster_by_lcoe(&[a.clone(), a.clone(), a.clone()], 10).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].cf_series, a.cf_series);
        assert_eq!(c[0].lcoe, 0.03);
        assert_eq!(c[0].capacity, 6.0);
    }

    #[test]
    fn two_assets_two_bins() {
        let a = GenAsset::new(Tech::Wind, 1.0, vec![0.2; 4], 0.10);
        let b = GenAsset::new(Tech::Wind, 3.0, vec![0.4; 4], 0.30);
        let c = cluster_by_lcoe(&[a, b], 2).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!((c[0].members, c[1].members), (1, 1));
        assert_eq!(c[1].bin_index, 1);
        assert_eq!(c[0].capacity + c[1].capacity, 4.0);
    }

    #[test]
    fn rejects_mixed_input() {
        let a = GenAsset::new(Tech::Wind, 1.0, vec![0.2; 4], 0.10);
        let b = GenAsset::new(Tech::Pv, 1.0, vec![0.2; 4], 0.10);
        assert!(cluster_by_lcoe(&[a, b], 2).is_err());
        assert!(cluster_by_lcoe(&[], 2).is_err());
    }
}
