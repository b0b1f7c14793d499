//! Property tests for cross-module invariants.

mod common;

use proptest::prelude::*;

use h2atlas::eligibility::BufferMap;
use h2atlas::grid::{dilate, format_float_grid, format_mask, parse_float_grid, FloatGrid, GridSpec, Mask, Projection};
use h2atlas::h2opt::{cost_potential_curve, solve_lp, build_lp, CurveConfig, NodeModel, ResSource, SolverOptions, TemporalResolution, WaterBudget};
use h2atlas::ressim::{lcoe, Component, TechnoEconomics, HOURS_PER_YEAR};
use h2atlas::socio::{composite_from_raw, zscore_normalize, DEFAULT_WEIGHTS};
use h2atlas::tech::Tech;
use h2atlas::water::{delivered_cost, DesalParams};

fn mask_strategy() -> impl Strategy<Value = Mask> {
    (3usize..24, 3usize..24, 0.0f64..0.3).prop_flat_map(|(nc, nr, density)| {
        proptest::collection::vec(proptest::bool::weighted(density.max(0.01)), nc * nr).prop_map(move |cells| {
            Mask::from_cells(GridSpec::new(0.0, 0.0, 100.0, nc, nr).unwrap(), cells).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn projection_round_trip(lon0 in -20.0f64..40.0, lat0 in -30.0f64..30.0, r in 0.0f64..500_000.0, a in 0.0f64..std::f64::consts::TAU) {
        let p = Projection::new(lon0, lat0).unwrap();
        let (x, y) = (r * a.cos(), r * a.sin());
        let (lon, lat) = p.inverse(x, y).unwrap();
        let (x2, y2) = p.forward(lon, lat).unwrap();
        prop_assert!((x - x2).hypot(y - y2) < 1e-6);
    }

    #[test]
    fn dilation_matches_all_pairs(mask in mask_strategy(), radius in 0.0f64..450.0) {
        let out = dilate(&mask, radius).unwrap();
        let spec = *mask.spec();
        let seeds: Vec<(f64, f64)> = mask.iter_true().map(|(r, c)| spec.cell_center(r, c)).collect();
        for r in 0..spec.nrows {
            for c in 0..spec.ncols {
                let (x, y) = spec.cell_center(r, c);
                let hit = seeds.iter().any(|&(sx, sy)| (x - sx).hypot(y - sy) <= radius);
                prop_assert_eq!(out.get(r, c), hit, "cell ({}, {})", r, c);
            }
        }
        prop_assert!(mask.is_subset_of(&out));
    }

    #[test]
    fn ascii_grids_round_trip(mask in mask_strategy(), seed in any::<u64>()) {
        use rand::Rng;
        let text = format_mask(&mask);
        let back = parse_float_grid(&text).unwrap();
        prop_assert_eq!(back.spec(), mask.spec());
        for (v, &b) in back.values().iter().zip(mask.cells()) {
            prop_assert_eq!(*v, if b { 1.0 } else { 0.0 });
        }
        let mut r = common::rng(seed);
        let vals: Vec<f64> = (0..mask.spec().len()).map(|_| r.gen_range(-1e6..1e6)).collect();
        let g = FloatGrid::from_values(*mask.spec(), vals).unwrap();
        let back = parse_float_grid(&format_float_grid(&g)).unwrap();
        prop_assert_eq!(back.values(), g.values());
    }

    #[test]
    fn eligibility_ledger_partitions_region(seed in 0u64..10_000) {
        let fx = common::random_elig_fixture(seed, 4);
        let layers = fx.build(fx.max_buffer() + 300.0);
        for tech in [Tech::Wind, Tech::Pv] {
            let res = layers.evaluate(&fx.buffers, tech).unwrap();
            let total: f64 = res.ledger.values().sum::<f64>() + res.eligible_fraction;
            prop_assert!((total - 1.0).abs() < 1e-9, "{}", total);
            prop_assert_eq!(res.eligible_fraction, res.eligible_cells as f64 / res.region_cells as f64);
            let grown: BufferMap = fx.buffers.iter().map(|(&k, &v)| (k, v + 300.0)).collect();
            let more = layers.evaluate(&grown, tech).unwrap();
            prop_assert!(more.mask().is_subset_of(res.mask()));
        }
    }

    #[test]
    fn lcoe_monotone(cap in 0.1f64..500.0, energy in 1.0f64..2e6, k in 1.01f64..3.0, year in prop::sample::select(vec![2020u16, 2030, 2040, 2050])) {
        let te = TechnoEconomics::default();
        for c in [Component::Pv, Component::Wind] {
            let base = lcoe(cap, energy, &te, c, year).unwrap();
            prop_assert!(lcoe(cap, energy * k, &te, c, year).unwrap() < base);
            let mut dear = te.clone();
            let mut p = dear.get(c, year).unwrap();
            p.capex *= k;
            dear.components.get_mut(&c).unwrap().insert(year, p);
            prop_assert!(lcoe(cap, energy, &dear, c, year).unwrap() > base);
        }
    }

    #[test]
    fn zscores_are_standardized(v in proptest::collection::vec(-1e4f64..1e4, 2..60)) {
        prop_assume!(v.iter().any(|x| (x - v[0]).abs() > 1e-6));
        let z = zscore_normalize(&v).unwrap();
        let n = z.len() as f64;
        let m = z.iter().sum::<f64>() / n;
        let sd = (z.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt();
        prop_assert!(m.abs() < 1e-9 && (sd - 1.0).abs() < 1e-9);
    }

    #[test]
    fn composite_follows_region_permutation(
        raw in proptest::collection::vec(prop::array::uniform4(0.0f64..1000.0), 3..25),
        shift in 1usize..24,
    ) {
        let gids: Vec<String> = (0..raw.len()).map(|k| format!("R{k}")).collect();
        let base = composite_from_raw(&gids, &raw, DEFAULT_WEIGHTS).unwrap();
        let n = raw.len();
        let perm: Vec<usize> = (0..n).map(|k| (k + shift) % n).collect();
        let p_raw: Vec<[f64; 4]> = perm.iter().map(|&k| raw[k]).collect();
        let p_gids: Vec<String> = perm.iter().map(|&k| gids[k].clone()).collect();
        let moved = composite_from_raw(&p_gids, &p_raw, DEFAULT_WEIGHTS).unwrap();
        for (i, &k) in perm.iter().enumerate() {
            prop_assert_eq!(&moved.regions[i].gid, &base.regions[k].gid);
            prop_assert!((moved.regions[i].composite - base.regions[k].composite).abs() < 1e-12);
        }
    }

    #[test]
    fn desal_cost_grows_with_distance_and_lift(d in 0.0f64..300.0, extra in 1.0f64..200.0, h in 0.0f64..800.0, lcoe in 0.01f64..0.2) {
        let p = DesalParams::default();
        let a = delivered_cost(&p, d, h, lcoe).unwrap();
        let b = delivered_cost(&p, d + extra, h, lcoe).unwrap();
        let c = delivered_cost(&p, d, h + extra, lcoe).unwrap();
        prop_assert!(b.delivered > a.delivered && c.delivered > a.delivered);
        prop_assert!((a.plant + a.transport - a.delivered).abs() < 1e-12);
        prop_assert!(a.routed_km >= a.coast_distance_km);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn lp_solutions_are_consistent(
        pv_level in 0.15f64..0.3,
        wind_level in 0.1f64..0.5,
        phase in 0usize..24,
        demand in 200.0f64..3000.0,
        gw in 0.0f64..4e4,
    ) {
        let pv: Vec<f64> = (0..HOURS_PER_YEAR).map(|h| {
            let t = (h % 24) as f64;
            if (6.0..18.0).contains(&t) { (pv_level * 2.6 * (std::f64::consts::PI * (t - 6.0) / 12.0).sin()).min(1.0) } else { 0.0 }
        }).collect();
        let wind: Vec<f64> = (0..HOURS_PER_YEAR).map(|h| {
            let t = ((h + phase) % 24) as f64;
            (wind_level * (1.0 + 0.6 * (std::f64::consts::TAU * t / 24.0).sin())).clamp(0.0, 1.0)
        }).collect();
        let mut node = NodeModel::new("p", 2030);
        node.sources.push(ResSource { tech: Tech::Pv, potential_mw: 1e4, cf_series: pv, lcoe: None });
        node.sources.push(ResSource { tech: Tech::Wind, potential_mw: 1e4, cf_series: wind, lcoe: None });
        node.water = WaterBudget { groundwater_m3: gw, desal_cost: Some(2.0), ..WaterBudget::default() };
        let res = solve_lp(&build_lp(&node, demand, TemporalResolution::RepresentativeDays { days: 4 }).unwrap(), &SolverOptions::default()).unwrap();
        let s = &res.shares;
        let sum = s.pv + s.wind + s.hydro + s.ely + s.batt + s.water;
        prop_assert!((sum - 1.0).abs() < 1e-9, "{}", sum);
        prop_assert!([s.pv, s.wind, s.hydro, s.ely, s.batt, s.water].iter().all(|v| *v >= 0.0));
        prop_assert!(res.capacities.res_mw.iter().all(|c| *c >= -1e-9) && res.capacities.battery_mwh >= -1e-9);
        prop_assert!((res.lcoh - res.annual_cost / (demand * 1000.0)).abs() <= 1e-12 * res.lcoh.max(1.0));
        prop_assert!(res.groundwater_m3 <= gw * (1.0 + 1e-9) + 1e-6);
        prop_assert!(res.water_residual(node.water_m3_per_kg) <= 1e-6 * demand * 9000.0);
    }
}

#[test]
fn curve_steps_grow_by_six_percent() {
    let mut node = NodeModel::new("c", 2030);
    node.sources.push(ResSource {
        tech: Tech::Wind,
        potential_mw: 40.0,
        cf_series: vec![0.4; HOURS_PER_YEAR],
        lcoe: None,
    });
    node.water = WaterBudget {
        groundwater_m3: 1e8,
        ..WaterBudget::default()
    };
    let curve = cost_potential_curve(&node, &CurveConfig::default()).unwrap();
    assert!(curve.points.len() > 2);
    for w in curve.points.windows(2) {
        assert!((w[1].demand_t / w[0].demand_t - 1.06).abs() < 1e-12);
        assert!(w[1].lcoh >= w[0].lcoh * (1.0 - 2e-6));
    }
}
