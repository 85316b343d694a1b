mod common;

use common::*;
use drsub::bounds::spectral_norm;
use drsub::objectives::{
    load_bipartite, BudgetOptions, FrequencyMapping, NqpGenerator, Objective,
};
use nalgebra::DVector;

fn check_gradients<O: Objective>(f: &O, seed: u64, points: usize) {
    let mut r = rng(seed);
    for _ in 0..points {
        // keep a margin from the lower bound so central differences stay in x ≥ 0
        let x = random_feasible(f.polytope(), &mut r).map(|v| v + 1e-3);
        let g = f.gradient(&x).unwrap();
        assert!(rel_err(&g, &fd_gradient(f, &x, 1e-6)) < 1e-5);
        let h = f.hessian(&x).unwrap();
        assert!(rel_err_mat(&h, &fd_hessian(f, &x, 1e-5)) < 1e-4);
    }
}

#[test]
fn nqp_derivatives_match_finite_differences() {
    check_gradients(&random_nqp(11), 1, 100);
    check_gradients(&five_dim_nqp(7), 2, 100);
}

#[test]
fn budget_derivatives_match_finite_differences() {
    check_gradients(&random_budget(5, 1), 3, 100);
    check_gradients(&random_budget(6, 3), 4, 100);
}

#[test]
fn paper_scale_generator_instance() {
    let f = NqpGenerator::new(100, 50, -100.0, 0.0).generate(9).unwrap();
    assert!(f.h_matrix().iter().all(|&v| (-100.0..=0.0).contains(&v)));
    assert!(f.gradient(&DVector::zeros(100)).unwrap().iter().all(|&g| g >= 0.0));
}

#[test]
fn spectral_norm_matches_jacobi() {
    for seed in 0..10 {
        let f = random_nqp(seed);
        let power = spectral_norm(f.h_matrix()).unwrap();
        let jacobi = jacobi_spectral_radius(f.h_matrix());
        assert!((power - jacobi).abs() <= 1e-9 * jacobi, "{power} vs {jacobi}");
    }
    let b = random_budget(3, 2);
    let h0 = b.hessian(&DVector::zeros(b.dim())).unwrap();
    assert!((b.smoothness_bound().unwrap() - jacobi_spectral_radius(&h0)).abs() < 1e-9);
}

#[test]
fn budget_file_round_trip_through_loader() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("one.tsv");
    std::fs::write(&path, "k1\tc1\t3\n").unwrap();
    let f = load_bipartite(&path, FrequencyMapping::Exponential, &BudgetOptions::default()).unwrap();
    assert!((f.edges()[0].probability - (1.0 - (-1f64).exp())).abs() < 1e-15);
    std::fs::write(&path, "").unwrap();
    let err = load_bipartite(&path, FrequencyMapping::Exponential, &BudgetOptions::default()).unwrap_err();
    assert_eq!(err.to_string(), "no edges");
    let missing = dir.path().join("absent.tsv");
    let err = load_bipartite(&missing, FrequencyMapping::Exponential, &BudgetOptions::default()).unwrap_err();
    assert!(err.to_string().contains("absent.tsv"));
}

#[test]
fn budget_value_stays_in_range() {
    let mut r = rng(8);
    let f = random_budget(2, 2);
    let cap: f64 = f.alphas().iter().sum::<f64>() * f.customers() as f64;
    for _ in 0..200 {
        let x = random_feasible(f.polytope(), &mut r);
        let v = f.value(&x).unwrap();
        assert!((0.0..=cap).contains(&v));
    }
}
