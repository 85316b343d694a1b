//! Independent brute-force oracles shared by the integration suites.
#![allow(dead_code)]

use drsub::geometry::Polytope;
use drsub::objectives::{
    synthetic_bipartite, BudgetAllocationObjective, BudgetOptions, ConstraintFill, FrequencyMapping,
    NqpGenerator, NqpObjective, Objective, SyntheticBipartite,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn halfspace_square() -> Polytope {
    Polytope::new(
        DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
        DVector::from_vec(vec![1.0]),
        DVector::from_element(2, 1.0),
    )
    .unwrap()
}

/// Feasible grid point nearest to `y` in a 2-D polytope, at grid `step`.
pub fn grid_project_2d(p: &Polytope, y: &DVector<f64>, step: f64) -> DVector<f64> {
    let u = p.upper();
    let nx = (u[0] / step).round() as usize;
    let ny = (u[1] / step).round() as usize;
    let mut best = (f64::INFINITY, DVector::zeros(2));
    for i in 0..=nx {
        for j in 0..=ny {
            let x = DVector::from_vec(vec![i as f64 * step, j as f64 * step]);
            if !p.contains(&x, 1e-12).unwrap() {
                continue;
            }
            let d = (&x - y).norm_squared();
            if d < best.0 {
                best = (d, x);
            }
        }
    }
    best.1
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// All vertices, by solving every choice of `n` active constraints among
/// `Ax ≤ b`, `x ≥ 0`, `x ≤ u`.
pub fn enumerate_vertices(p: &Polytope) -> Vec<DVector<f64>> {
    let n = p.dim();
    let m = p.num_constraints();
    let mut rows: Vec<(DVector<f64>, f64)> = Vec::new();
    for i in 0..m {
        rows.push((p.a().row(i).transpose(), p.b()[i]));
    }
    for j in 0..n {
        let mut e = DVector::zeros(n);
        e[j] = 1.0;
        rows.push((-e.clone(), 0.0));
        rows.push((e, p.upper()[j]));
    }
    let mut vertices: Vec<DVector<f64>> = Vec::new();
    for active in combinations(rows.len(), n) {
        let a = DMatrix::from_fn(n, n, |r, c| rows[active[r]].0[c]);
        let b = DVector::from_fn(n, |r, _| rows[active[r]].1);
        let Some(x) = a.lu().solve(&b) else { continue };
        if !p.contains(&x, 1e-9).unwrap() {
            continue;
        }
        if !vertices.iter().any(|v| (v - &x).norm() < 1e-9) {
            vertices.push(x);
        }
    }
    vertices
}

pub fn argmax_vertex(vertices: &[DVector<f64>], g: &DVector<f64>) -> (f64, DVector<f64>) {
    vertices
        .iter()
        .map(|v| (g.dot(v), v.clone()))
        .fold((f64::NEG_INFINITY, DVector::zeros(g.len())), |a, b| if b.0 > a.0 { b } else { a })
}

/// Random small polytope with `n ≤ 4`, `m ≤ 3`.
pub fn random_small_polytope(r: &mut impl Rng) -> Polytope {
    let n = r.random_range(1..=4);
    let m = r.random_range(0..=3);
    Polytope::new(
        DMatrix::from_fn(m, n, |_, _| r.random_range(0.0..2.0)),
        DVector::from_fn(m, |_, _| r.random_range(0.5..2.0)),
        DVector::from_fn(n, |_, _| r.random_range(0.5..2.0)),
    )
    .unwrap()
}

/// Uniform point in the box, rescaled toward the origin until feasible.
pub fn random_feasible(p: &Polytope, r: &mut impl Rng) -> DVector<f64> {
    let n = p.dim();
    let x = DVector::from_fn(n, |j, _| r.random::<f64>() * p.upper()[j]);
    let mut scale = 1.0;
    for i in 0..p.num_constraints() {
        let ax = p.a().row(i).transpose().dot(&x);
        if ax > p.b()[i] {
            scale = f64::min(scale, p.b()[i] / ax);
        }
    }
    x * scale
}

/// A random pair `x ≤ y` of feasible points.
pub fn random_ordered_pair(p: &Polytope, r: &mut impl Rng) -> (DVector<f64>, DVector<f64>) {
    let y = random_feasible(p, r);
    let x = y.map(|v| v * r.random::<f64>());
    (x, y)
}

pub fn fd_gradient<O: Objective>(f: &O, x: &DVector<f64>, h: f64) -> DVector<f64> {
    DVector::from_fn(x.len(), |j, _| {
        let mut plus = x.clone();
        let mut minus = x.clone();
        plus[j] += h;
        minus[j] -= h;
        (f.value(&plus).unwrap() - f.value(&minus).unwrap()) / (2.0 * h)
    })
}

/// Central differences of the analytic gradient.
pub fn fd_hessian<O: Objective>(f: &O, x: &DVector<f64>, h: f64) -> DMatrix<f64> {
    let n = x.len();
    let mut out = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut plus = x.clone();
        let mut minus = x.clone();
        plus[j] += h;
        minus[j] -= h;
        let col = (f.gradient(&plus).unwrap() - f.gradient(&minus).unwrap()) / (2.0 * h);
        out.set_column(j, &col);
    }
    out
}

/// Largest absolute eigenvalue of a symmetric matrix by cyclic Jacobi.
pub fn jacobi_spectral_radius(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut a = m.clone();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[(i, i)].abs()).fold(0.0, f64::max)
}

pub fn one_dim_nqp() -> NqpObjective {
    NqpObjective::new(DMatrix::from_element(1, 1, -1.0), Polytope::unit_box(1)).unwrap()
}

pub fn five_dim_nqp(seed: u64) -> NqpObjective {
    NqpGenerator::new(5, 1, -1.0, 0.0)
        .with_fill(ConstraintFill::Constant(0.2))
        .generate(seed)
        .unwrap()
}

pub fn random_nqp(seed: u64) -> NqpObjective {
    NqpGenerator::new(6, 3, -10.0, 0.0).generate(seed).unwrap()
}

pub fn random_budget(seed: u64, advertisers: usize) -> BudgetAllocationObjective {
    let spec = SyntheticBipartite {
        channels: 4,
        customers: 6,
        density: 0.6,
        max_frequency: 8,
    };
    let edges = synthetic_bipartite(seed, &spec).unwrap();
    BudgetAllocationObjective::from_frequencies(
        spec.channels,
        spec.customers,
        &edges,
        FrequencyMapping::Exponential,
        &BudgetOptions {
            advertisers,
            alphas: None,
            upper: Some(2.0),
        },
    )
    .unwrap()
}

/// Max relative error `|a-b| / max(1, |b|)`.
pub fn rel_err(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs() / y.abs().max(1.0))
        .fold(0.0, f64::max)
}

pub fn rel_err_mat(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs() / y.abs().max(1.0))
        .fold(0.0, f64::max)
}
