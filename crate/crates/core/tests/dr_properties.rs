//! Diminishing-returns structure of both objective families, plus
//! property tests over the numeric building blocks.

mod common;

use common::*;
use drsub::analysis::{trajectory_statistic, RunSeries, Series, SeriesPoint, Statistic, TrialBattery};
use drsub::geometry::{Polytope, DEFAULT_MAX_SWEEPS};
use drsub::objectives::Objective;
use drsub::optimizers::{run, Algorithm, RunConfig};
use drsub::oracle::{NoiseKind, NoiseModel};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;

fn dr_checks<O: Objective>(f: &O, seed: u64, samples: usize) {
    let mut r = rng(seed);
    let n = f.dim();
    for _ in 0..samples {
        let x = random_feasible(f.polytope(), &mut r);
        let h = f.hessian(&x).unwrap();
        let (i, j) = (r.random_range(0..n), r.random_range(0..n));
        assert!(h[(i, j)] <= 1e-12);

        let (lo, hi) = random_ordered_pair(f.polytope(), &mut r);
        assert!(f.value(&lo).unwrap() <= f.value(&hi).unwrap() + 1e-9);
        let (g_lo, g_hi) = (f.gradient(&lo).unwrap(), f.gradient(&hi).unwrap());
        assert!(g_lo.iter().zip(g_hi.iter()).all(|(a, b)| *a >= b - 1e-9));
    }
}

#[test]
fn nqp_instances_are_monotone_dr() {
    for seed in 0..3 {
        dr_checks(&random_nqp(seed), 100 + seed, 500);
    }
    dr_checks(&five_dim_nqp(7), 7, 500);
}

#[test]
fn budget_instances_are_monotone_dr() {
    dr_checks(&random_budget(1, 1), 21, 500);
    dr_checks(&random_budget(2, 3), 22, 500);
}

fn small_polytope() -> impl Strategy<Value = Polytope> {
    (1usize..=4, 0usize..=3, any::<u64>()).prop_map(|(n, m, seed)| {
        let mut r = rng(seed);
        Polytope::new(
            DMatrix::from_fn(m, n, |_, _| r.random_range(0.0..2.0)),
            DVector::from_fn(m, |_, _| r.random_range(0.5..2.0)),
            DVector::from_fn(n, |_, _| r.random_range(0.5..2.0)),
        )
        .unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projection_lands_inside(p in small_polytope(), seed in any::<u64>()) {
        let mut r = rng(seed);
        let y = DVector::from_fn(p.dim(), |_, _| r.random_range(-4.0..4.0));
        let x = p.project(&y, 1e-10, DEFAULT_MAX_SWEEPS).unwrap();
        prop_assert!(p.contains(&x, 1e-6).unwrap());
    }

    #[test]
    fn lmo_dominates_feasible_points(p in small_polytope(), seed in any::<u64>()) {
        let mut r = rng(seed);
        let g = DVector::from_fn(p.dim(), |_, _| r.random_range(-1.0..1.0));
        let v = p.lmo(&g).unwrap();
        prop_assert!(p.contains(&v, 1e-9).unwrap());
        for _ in 0..20 {
            let x = random_feasible(&p, &mut r);
            prop_assert!(g.dot(&v) >= g.dot(&x) - 1e-9);
        }
    }

    #[test]
    fn order_statistics_are_ordered_and_permutation_invariant(
        values in proptest::collection::vec(proptest::collection::vec(-5.0f64..5.0, 4), 1..12),
        rotate in 0usize..12,
    ) {
        let series = |ids: &[usize]| -> Vec<RunSeries> {
            ids.iter().map(|&i| RunSeries {
                run_id: i as u64,
                algorithm: "pga".into(),
                points: values[i].iter().enumerate().map(|(k, &v)| SeriesPoint {
                    t: k as u64 + 1, f_true: v, f_running_avg: v,
                }).collect(),
            }).collect()
        };
        let mut ids: Vec<usize> = (0..values.len()).collect();
        let a = TrialBattery::new(series(&ids)).unwrap();
        ids.rotate_left(rotate % values.len());
        let b = TrialBattery::new(series(&ids)).unwrap();
        let stat = |bat: &TrialBattery, s| trajectory_statistic(bat, s, Series::FTrue).unwrap().points;
        let (min, med, q90) = (stat(&a, Statistic::Min), stat(&a, Statistic::Median), stat(&a, Statistic::Quantile(0.9)));
        for k in 0..4 {
            prop_assert!(min[k].1 <= med[k].1 && med[k].1 <= q90[k].1);
        }
        prop_assert_eq!(med, stat(&b, Statistic::Median));
    }

    #[test]
    fn every_iterate_is_feasible(seed in 0u64..1000, alg in 0usize..4) {
        let f = five_dim_nqp(seed);
        let alg = [Algorithm::Pga, Algorithm::BoostedPga, Algorithm::Scg, Algorithm::Scgpp][alg];
        let mut cfg = RunConfig::new(alg, 15).with_run(seed, 1);
        cfg.batch_size = Some(3);
        let noise = NoiseModel::new(NoiseKind::GaussianFixed { sigma: 0.5 });
        let rec = run(&f, noise, &cfg).unwrap();
        for it in &rec.iterates {
            prop_assert!(f.polytope().contains(it.x.as_ref().unwrap(), 1e-6).unwrap());
        }
        let mut sum = 0.0;
        for it in &rec.iterates {
            sum += it.f_true;
            prop_assert!((it.f_running_avg - sum / it.t as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn runs_replay_bit_for_bit(seed in any::<u64>(), run_id in any::<u64>()) {
        let f = one_dim_nqp();
        let noise = NoiseModel::new(NoiseKind::ClippedGaussian { sigma: 0.2 });
        let cfg = RunConfig::new(Algorithm::Scg, 10).with_run(seed, run_id);
        prop_assert_eq!(run(&f, noise, &cfg).unwrap(), run(&f, noise, &cfg).unwrap());
    }
}
