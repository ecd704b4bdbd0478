use nalgebra::{DMatrix, SymmetricEigen};
use pacvb_core::mixing::{alpha_event_lb, default_drift_grid, drift_check_ar1, mixing_sum, slem_profile, MixingProfile};
use pacvb_core::models::invariant;
use pacvb_core::ModelKind;

/// Eigenvalues of the finite kernel through D^{1/2} P D^{-1/2}, ascending.
fn spectrum(k: usize, theta: f64) -> Vec<f64> {
    let kind = ModelKind::FiniteBd { k };
    let chain = kind.chain(theta).unwrap();
    let pi = invariant(&kind, theta).unwrap().masses().unwrap().to_vec();
    let p = DMatrix::from_fn(k + 1, k + 1, |i, j| chain.step_logmass(i, j).exp());
    let s = DMatrix::from_fn(k + 1, k + 1, |i, j| p[(i, j)] * (pi[i] / pi[j]).sqrt());
    assert!((&s - s.transpose()).amax() < 1e-12, "kernel is reversible");
    let mut ev: Vec<f64> = SymmetricEigen::new(s).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

#[test]
fn spectral_profile_matches_dense_eigensolver() {
    for k in [2, 3, 5, 10, 20] {
        for theta in [0.1, 0.35, 0.5, 0.8] {
            let ev = spectrum(k, theta);
            assert!((ev[k] - 1.0).abs() < 1e-10 && (ev[0] + 1.0).abs() < 1e-10, "bipartite spectrum");
            let lambda2 = ev[k - 1];
            let p = slem_profile(&ModelKind::FiniteBd { k }, theta).unwrap();
            assert_eq!(p.period, 2);
            assert!((p.r - lambda2 * lambda2).abs() < 1e-10, "k={k} θ={theta}: {} vs {}", p.r, lambda2 * lambda2);
        }
    }
}

#[test]
fn reflected_profile_dominates_every_truncation() {
    for theta in [0.1, 0.3, 0.45] {
        let p = slem_profile(&ModelKind::ReflectedBd, theta).unwrap();
        for k in [10, 40, 80] {
            let ev = spectrum(k, theta);
            assert!(p.r >= ev[k - 1].powi(2) - 1e-12);
        }
    }
}

#[test]
fn exact_alpha_coefficients_sit_under_the_envelope() {
    for k in [3, 6, 10] {
        for theta in [0.2, 0.5, 0.7] {
            let kind = ModelKind::FiniteBd { k };
            let p = slem_profile(&kind, theta).unwrap();
            let mut last = f64::INFINITY;
            for lag in 1..12 {
                let a = alpha_event_lb(&kind, theta, lag).unwrap();
                assert!(a.by_class <= p.envelope(lag) + 1e-12, "k={k} θ={theta} lag={lag}: {} > {}", a.by_class, p.envelope(lag));
                assert!((a.unconditioned - 0.25).abs() < 1e-12);
                assert!(a.by_class <= last + 1e-12);
                last = a.by_class;
            }
        }
    }
}

#[test]
fn mixing_sum_is_the_series() {
    let p = MixingProfile::new(0.25, 0.6, 2).unwrap();
    let u = 1.0 / 3.0;
    let series: f64 = (0..4000).map(|k| p.envelope(k).powf(u)).sum();
    assert!((mixing_sum(&p, 1.0) - series).abs() < 1e-10);
}

#[test]
fn drift_threshold() {
    let grid = default_drift_grid();
    let inside = 0.85 * 2f64.powf(1.0 / 6.0 - 1.0);
    let r = drift_check_ar1(inside, 1.0, &grid).unwrap();
    assert!(r.holds && r.analytic_holds);
    assert!((r.analytic_coefficient - 32.0 * inside.powi(6)).abs() < 1e-12);
    let r = drift_check_ar1(0.99, 1.0, &grid).unwrap();
    assert!(!r.analytic_holds);
}
