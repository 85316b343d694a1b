mod common;

use common::*;
use drsub::geometry::{Polytope, DEFAULT_MAX_SWEEPS};
use nalgebra::DVector;
use rand::Rng;

fn v(xs: &[f64]) -> DVector<f64> {
    DVector::from_vec(xs.to_vec())
}

#[test]
fn halfspace_projection_matches_grid_minimizer() {
    let p = halfspace_square();
    for y in [v(&[1.0, 1.0]), v(&[2.0, 0.3]), v(&[-0.5, 1.5]), v(&[0.9, 0.4])] {
        let x = p.project(&y, 1e-10, DEFAULT_MAX_SWEEPS).unwrap();
        let grid = grid_project_2d(&p, &y, 1e-3);
        assert!((&x - &grid).norm() <= 2e-3, "y={y:?} x={x:?} grid={grid:?}");
    }
    let x = p.project(&v(&[1.0, 1.0]), 1e-10, DEFAULT_MAX_SWEEPS).unwrap();
    assert!((&x - v(&[0.5, 0.5])).norm() < 1e-8);
}

#[test]
fn projection_is_feasible_and_beats_sampled_points() {
    let mut r = rng(1);
    for _ in 0..1000 {
        let p = random_small_polytope(&mut r);
        let y = DVector::from_fn(p.dim(), |j, _| r.random_range(-2.0..2.0) * p.upper()[j]);
        let x = p.project(&y, 1e-10, DEFAULT_MAX_SWEEPS).unwrap();
        assert!(p.contains(&x, 1e-6).unwrap());
        for _ in 0..100 {
            let z = random_feasible(&p, &mut r);
            assert!((&x - &y).norm() <= (&z - &y).norm() + 1e-6);
        }
    }
}

#[test]
fn projection_is_idempotent_and_fixes_feasible_points() {
    let mut r = rng(2);
    for _ in 0..200 {
        let p = random_small_polytope(&mut r);
        let z = random_feasible(&p, &mut r);
        if p.contains(&z, 0.0).unwrap() {
            assert_eq!(p.project(&z, 1e-8, DEFAULT_MAX_SWEEPS).unwrap(), z);
        }
        let y = DVector::from_fn(p.dim(), |_, _| r.random_range(-3.0..3.0));
        let once = p.project(&y, 1e-10, DEFAULT_MAX_SWEEPS).unwrap();
        let twice = p.project(&once, 1e-10, DEFAULT_MAX_SWEEPS).unwrap();
        assert!((&once - &twice).norm() < 1e-8);
    }
}

#[test]
fn lmo_listed_instances() {
    let square = Polytope::unit_box(2);
    assert_eq!(square.lmo(&v(&[-1.0, -1.0])).unwrap(), v(&[0.0, 0.0]));
    assert_eq!(square.lmo(&v(&[1.0, 0.0])).unwrap(), v(&[1.0, 0.0]));
    let p = halfspace_square();
    let verts = enumerate_vertices(&p);
    assert_eq!(verts.len(), 3);
    let g = v(&[2.0, 1.0]);
    assert_eq!(p.lmo(&g).unwrap(), argmax_vertex(&verts, &g).1);
    assert_eq!(p.lmo(&g).unwrap(), v(&[1.0, 0.0]));
}

#[test]
fn lmo_matches_vertex_enumeration() {
    let mut r = rng(3);
    for _ in 0..1000 {
        let p = random_small_polytope(&mut r);
        let verts = enumerate_vertices(&p);
        let g = DVector::from_fn(p.dim(), |_, _| r.random_range(-1.0..1.0));
        let (best, vertex) = argmax_vertex(&verts, &g);
        let out = p.lmo(&g).unwrap();
        assert!((g.dot(&out) - best).abs() < 1e-9);
        assert!((&out - &vertex).norm() < 1e-9, "lmo {out:?} vs {vertex:?}");
    }
}

#[test]
fn frank_wolfe_steps_stay_feasible() {
    let mut r = rng(4);
    for _ in 0..100 {
        let p = random_small_polytope(&mut r);
        let steps = 50;
        let mut x = DVector::zeros(p.dim());
        for _ in 0..steps {
            let g = DVector::from_fn(p.dim(), |_, _| r.random_range(-1.0..1.0));
            x += p.lmo(&g).unwrap() / steps as f64;
        }
        assert!(p.contains(&x, 1e-9).unwrap());
    }
}

#[test]
fn diameter_examples() {
    assert!((Polytope::unit_box(5).diameter_bound() - 5f64.sqrt()).abs() < 1e-15);
    assert_eq!(Polytope::boxed(v(&[3.0, 4.0])).unwrap().diameter_bound(), 5.0);
}
