#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use tls_cond::cond_exact::{build_k_matrix, ExactFormulaWork};
use tls_cond::tls::{solve_tls, svd_bundle, SvdBundle, TlsSolution};
use tls_cond::TlsProblem;

pub fn problem(a: &[f64], b: &[f64]) -> TlsProblem {
    TlsProblem::new(
        DMatrix::from_column_slice(b.len(), a.len() / b.len(), a),
        DVector::from_column_slice(b),
        "fixture",
    )
    .unwrap()
}

/// A = [2; 0], b = [0; 1]: x = 0.
pub fn fix_a() -> TlsProblem {
    problem(&[2.0, 0.0], &[0.0, 1.0])
}

/// A = [1; 0], b = [1; 1]: x = golden ratio.
pub fn fix_b() -> TlsProblem {
    problem(&[1.0, 0.0], &[1.0, 1.0])
}

pub fn phi() -> f64 {
    (1.0 + 5f64.sqrt()) / 2.0
}

pub struct Solved {
    pub problem: TlsProblem,
    pub bundle: SvdBundle,
    pub solution: TlsSolution,
    pub work: ExactFormulaWork,
}

pub fn solve(problem: TlsProblem) -> Solved {
    let bundle = svd_bundle(&problem).unwrap();
    let solution = solve_tls(&problem, &bundle).unwrap();
    let work = ExactFormulaWork::compact(&problem, &bundle, &solution).unwrap();
    Solved {
        problem,
        bundle,
        solution,
        work,
    }
}

pub fn solve_with_k(problem: TlsProblem) -> Solved {
    let bundle = svd_bundle(&problem).unwrap();
    let solution = solve_tls(&problem, &bundle).unwrap();
    let work = build_k_matrix(&problem, &bundle, &solution).unwrap();
    Solved {
        problem,
        bundle,
        solution,
        work,
    }
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Central-difference Jacobian of the TLS solution map with respect to
/// `[vec(A); b]`, one column per entry, re-solving from scratch each time.
pub fn finite_difference_k(problem: &TlsProblem, h: f64) -> DMatrix<f64> {
    let (m, n) = (problem.rows(), problem.cols());
    let base = problem.augmented();
    let solve_x = |ab: &DMatrix<f64>| {
        let p = TlsProblem::from_augmented(ab, "fd").unwrap();
        let bundle = svd_bundle(&p).unwrap();
        solve_tls(&p, &bundle).unwrap().x
    };
    let mut k = DMatrix::zeros(n, m * (n + 1));
    for c in 0..m * (n + 1) {
        let (i, j) = (c % m, c / m);
        let mut plus = base.clone();
        plus[(i, j)] += h;
        let mut minus = base.clone();
        minus[(i, j)] -= h;
        let col = (solve_x(&plus) - solve_x(&minus)) / (2.0 * h);
        k.set_column(c, &col);
    }
    k
}

/// `A₁ = PX`, `A₂ = (I − P)Y` with `P` a random rank-`k` orthogonal
/// projector, so `A₁ᵀA₂ = O`.
pub fn orthogonal_split(n: usize, seed: u64) -> (DMatrix<f64>, DMatrix<f64>) {
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut gaussian = |r: usize, c: usize| DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(&mut rng));
    let k = 1 + (seed as usize) % (n - 1);
    let q = tls_cond::linalg::thin_svd(&gaussian(n, n)).unwrap().u;
    let basis = q.columns(0, k).into_owned();
    let p = &basis * basis.transpose();
    let a1 = &p * gaussian(n, n);
    let a2 = (DMatrix::identity(n, n) - p) * gaussian(n, n);
    (a1, a2)
}

/// Largest violation of `½(‖A₁‖+‖A₂‖) ≤ ‖A₁+A₂‖ ≤ ‖A₁‖+‖A₂‖`, relative to
/// `‖A₁‖+‖A₂‖`; nonpositive when both hold.
pub fn orthogonal_split_violation(a1: &DMatrix<f64>, a2: &DMatrix<f64>) -> f64 {
    use tls_cond::linalg::spectral_norm;
    let (n1, n2) = (spectral_norm(a1).unwrap(), spectral_norm(a2).unwrap());
    let sum = spectral_norm(&(a1 + a2)).unwrap();
    (0.5 * (n1 + n2) - sum).max(sum - n1 - n2) / (n1 + n2)
}

/// The four blocks of `generate_v`'s output written out as sums of rank-one
/// terms, with `U` redrawn from the same stream.
pub fn expected_v_blocks(n: usize, v_tilde: &DMatrix<f64>, alpha: f64, seed: u64) -> DMatrix<f64> {
    use tls_cond::generators::{haar_orthogonal_stream, GENERATE_V_STREAM};
    let u = haar_orthogonal_stream(n, seed, GENERATE_V_STREAM);
    let c = (1.0 - alpha * alpha).sqrt();
    let mut v = DMatrix::zeros(n + 1, n + 1);
    for k in 0..n {
        let w = if k + 1 == n { alpha } else { 1.0 };
        for i in 0..n {
            for j in 0..n {
                v[(i, j)] += w * u[(i, k)] * v_tilde[(j, k)];
            }
        }
    }
    for i in 0..n {
        v[(i, n)] = c * u[(i, n - 1)];
        v[(n, i)] = c * v_tilde[(i, n - 1)];
    }
    v[(n, n)] = -alpha;
    v
}
