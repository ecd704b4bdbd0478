//! Exact path Rényi divergences against brute-force oracles: full path
//! enumeration for the finite chain and dense Gaussian algebra for AR(1).

use nalgebra::{DMatrix, DVector};
use pacvb_core::divergence::{renyi_exact, PathDivergenceQuery};
use pacvb_core::rng::from_seed;
use pacvb_core::{InitLaw, InitMode, ModelKind};
use rand::Rng;

fn kernel(k: usize, theta: f64) -> DMatrix<f64> {
    let mut p = DMatrix::zeros(k + 1, k + 1);
    p[(0, 1)] = 1.0;
    p[(k, k - 1)] = 1.0;
    for i in 1..k {
        p[(i, i + 1)] = theta;
        p[(i, i - 1)] = 1.0 - theta;
    }
    p
}

/// Solves πP = π, Σπ = 1 as a dense linear system.
fn stationary(p: &DMatrix<f64>) -> Vec<f64> {
    let s = p.nrows();
    let mut a = p.transpose() - DMatrix::identity(s, s);
    for j in 0..s {
        a[(s - 1, j)] = 1.0;
    }
    let mut rhs = DVector::zeros(s);
    rhs[s - 1] = 1.0;
    a.lu().solve(&rhs).unwrap().iter().copied().collect()
}

/// (α−1)⁻¹ log Σ_paths p^α q^{1−α}, enumerating all (k+1)^{n+1} paths.
fn enumerate(k: usize, theta: f64, theta0: f64, n: usize, alpha: f64, init: (&[f64], &[f64])) -> f64 {
    let (p, q) = (kernel(k, theta), kernel(k, theta0));
    let s = k + 1;
    let mut total = 0.0;
    let mut path = vec![0usize; n + 1];
    for code in 0..s.pow(n as u32 + 1) {
        let mut c = code;
        for x in path.iter_mut() {
            *x = c % s;
            c /= s;
        }
        let (mut pp, mut qq) = (init.0[path[0]], init.1[path[0]]);
        for w in path.windows(2) {
            pp *= p[(w[0], w[1])];
            qq *= q[(w[0], w[1])];
        }
        if pp > 0.0 && qq > 0.0 {
            total += pp.powf(alpha) * qq.powf(1.0 - alpha);
        }
    }
    total.ln() / (alpha - 1.0)
}

#[test]
fn finite_chain_matches_enumeration() {
    let mut rng = from_seed(7);
    let k = 3;
    let kind = ModelKind::FiniteBd { k };
    for _ in 0..20 {
        let theta: f64 = rng.random_range(0.05..0.95);
        let theta0: f64 = rng.random_range(0.05..0.95);
        let alpha: f64 = rng.random_range(0.05..0.95);
        for n in 1..=6 {
            let pi = stationary(&kernel(k, theta));
            let pi0 = stationary(&kernel(k, theta0));
            let want = enumerate(k, theta, theta0, n, alpha, (&pi, &pi0));
            let got = renyi_exact(&PathDivergenceQuery::new(kind, theta, theta0, n, alpha, InitMode::InvariantPair)).unwrap();
            assert!((got - want).abs() < 1e-10, "pair n={n}: {got} vs {want}");

            let x0 = 1 + n % 2;
            let mut point = vec![0.0; k + 1];
            point[x0] = 1.0;
            let want = enumerate(k, theta, theta0, n, alpha, (&point, &point));
            let q =
                PathDivergenceQuery::new(kind, theta, theta0, n, alpha, InitMode::Shared).with_init(InitLaw::Point(x0 as f64));
            let got = renyi_exact(&q).unwrap();
            assert!((got - want).abs() < 1e-10, "shared n={n}: {got} vs {want}");
        }
    }
}

/// log ∫ f1^α f2^{1−α} for Gaussian densities.
fn gaussian_log_affinity(m1: &DVector<f64>, s1: &DMatrix<f64>, m2: &DVector<f64>, s2: &DMatrix<f64>, alpha: f64) -> f64 {
    let l1 = s1.clone().try_inverse().unwrap();
    let l2 = s2.clone().try_inverse().unwrap();
    let lam = &l1 * alpha + &l2 * (1.0 - alpha);
    let h = &l1 * m1 * alpha + &l2 * m2 * (1.0 - alpha);
    let lam_inv = lam.clone().try_inverse().unwrap();
    let quad = alpha * m1.dot(&(&l1 * m1)) + (1.0 - alpha) * m2.dot(&(&l2 * m2)) - h.dot(&(&lam_inv * &h));
    -0.5 * quad - 0.5 * lam.determinant().ln() - 0.5 * alpha * s1.determinant().ln() - 0.5 * (1.0 - alpha) * s2.determinant().ln()
}

fn stationary_cov(theta: f64, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n + 1, n + 1, |i, j| theta.powi((i as i32 - j as i32).abs()) / (1.0 - theta * theta))
}

/// Law of x_1..x_n given x_0 = c.
fn conditional_law(theta: f64, n: usize, c: f64) -> (DVector<f64>, DMatrix<f64>) {
    let mean = DVector::from_fn(n, |i, _| theta.powi(i as i32 + 1) * c);
    let cov = DMatrix::from_fn(n, n, |i, j| (1..=i.min(j) + 1).map(|k| theta.powi((i + 1 - k + j + 1 - k) as i32)).sum());
    (mean, cov)
}

#[test]
fn ar1_matches_dense_gaussian_algebra() {
    let cases = [(0.3, -0.5, 0.5, 8), (0.9, 0.7, 0.2, 5), (-0.6, 0.4, 0.8, 12), (0.0, 0.5, 0.5, 3)];
    for &(theta, theta0, alpha, n) in &cases {
        let zero = DVector::zeros(n + 1);
        let want =
            gaussian_log_affinity(&zero, &stationary_cov(theta, n), &zero, &stationary_cov(theta0, n), alpha) / (alpha - 1.0);
        let got = renyi_exact(&PathDivergenceQuery::new(ModelKind::Ar1Gauss, theta, theta0, n, alpha, InitMode::InvariantPair))
            .unwrap();
        assert!((got - want).abs() < 1e-9 * want.max(1.0), "pair {theta} {theta0}: {got} vs {want}");

        let c = 1.5;
        let (m1, s1) = conditional_law(theta, n, c);
        let (m2, s2) = conditional_law(theta0, n, c);
        let want = gaussian_log_affinity(&m1, &s1, &m2, &s2, alpha) / (alpha - 1.0);
        let q =
            PathDivergenceQuery::new(ModelKind::Ar1Gauss, theta, theta0, n, alpha, InitMode::Shared).with_init(InitLaw::Point(c));
        let got = renyi_exact(&q).unwrap();
        assert!((got - want).abs() < 1e-9 * want.max(1.0), "shared {theta} {theta0}: {got} vs {want}");
    }
}
