use pacvb_core::beta::family_kl;
use pacvb_core::certify::{assemble, prepare, replicate, theorem22_rhs, theorem51_rhs, EpsilonSource, ExperimentConfig};
use pacvb_core::conditions::{condition_i, condition_iii, condition_row, rate_fit, rho_n_recipe, summarize, ConditionSetup};
use pacvb_core::divergence::{var_rn_bound, var_rn_empirical};
use pacvb_core::mixing::model_profile;
use pacvb_core::{BetaLaw, FamilyLaw, InitLaw, InitMode, ModelKind};
use proptest::prelude::*;

#[test]
fn prior_kl_grows_like_half_log_n() {
    let prior: FamilyLaw = BetaLaw::uniform().into();
    for theta0 in [0.1, 0.35, 0.5, 0.9] {
        let excess: Vec<f64> = (4..=14)
            .map(|e| {
                let n = 1usize << e;
                let rho = BetaLaw::new(n as f64 * theta0, n as f64 * (1.0 - theta0)).unwrap();
                family_kl(&rho.into(), &prior).unwrap() - 0.5 * (n as f64).ln()
            })
            .collect();
        let max = excess.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!(max - excess[0] < 2.0, "θ0={theta0}: {excess:?}");
        // the excess settles to a constant
        assert!((excess[10] - excess[9]).abs() < 1e-3);
    }
}

#[test]
fn recipe_is_the_concentrating_beta() {
    let r = rho_n_recipe(&ModelKind::FiniteBd { k: 10 }, 0.3, 100).unwrap();
    let b = r.base();
    assert!((b.a - 30.0).abs() < 1e-12 && (b.b - 70.0).abs() < 1e-12);
    let r = rho_n_recipe(&ModelKind::Ar1Gauss, 0.5, 64).unwrap();
    assert_eq!(r.support(), (-1.0, 1.0));
    assert!((r.mean() - 0.5).abs() < 1e-12);
}

#[test]
fn conditions_are_nonnegative_and_fit() {
    let prior: FamilyLaw = BetaLaw::uniform().into();
    let setup = ConditionSetup::well_specified(ModelKind::FiniteBd { k: 10 }, 0.3, InitMode::InvariantPair, InitLaw::Invariant);
    let rows: Vec<_> = [16, 32, 64, 128, 256].iter().map(|&n| condition_row(&setup, n, &prior, 200, n as u64).unwrap()).collect();
    for r in &rows {
        assert!(r.cond_i >= 0.0 && r.cond_ii >= 0.0 && r.cond_iii >= 0.0);
        assert!(r.epsilon_n() >= r.cond_iii / r.n as f64);
    }
    let rep = summarize(rows).unwrap();
    assert!(rep.slope_i.unwrap().slope < 0.0);
    assert!(rep.slope_iii.unwrap().slope < 0.0);
    assert!(rep.growth_iii.unwrap().slope > 0.0);
    assert!(condition_i(&setup, 64).unwrap() > 0.0);
    assert!(condition_iii(&setup.model, 0.3, 64, &prior).unwrap() > 0.0);
}

#[test]
fn rate_fit_recovers_power_laws() {
    let ns: Vec<f64> = (4..12).map(|e| (1u64 << e) as f64).collect();
    let v: Vec<f64> = ns.iter().map(|n| 3.0 * n.powf(-0.5)).collect();
    let f = rate_fit(&ns, &v).unwrap();
    assert!((f.slope + 0.5).abs() < 1e-12 && (f.intercept - 3f64.ln()).abs() < 1e-12 && f.r_squared > 1.0 - 1e-12);
    assert!(rate_fit(&ns[..3], &v[..3]).is_err());
}

#[test]
fn empirical_variance_sits_under_the_mixing_bound() {
    for (k, theta0, theta) in [(10, 0.35, 0.5), (5, 0.6, 0.4)] {
        let kind = ModelKind::FiniteBd { k };
        let profile = model_profile(&kind, theta0).unwrap();
        for n in [64, 256] {
            let emp = var_rn_empirical(&kind, theta, theta0, n, 2000, 11, InitMode::InvariantPair, &InitLaw::Invariant).unwrap();
            let bound =
                var_rn_bound(&kind, theta, theta0, n, 1.0, &profile, InitMode::InvariantPair, &InitLaw::Invariant).unwrap();
            assert!(emp.estimate <= bound, "n={n}: {} > {bound}", emp.estimate);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bounds_loosen_as_confidence_grows(
        alpha in 0.05f64..0.95, n in 1usize..5000, en in 1e-4f64..1.0, e1 in 0.001f64..0.4, e2 in 0.001f64..0.4, eta in 0.001f64..0.4,
        mean in -10.0f64..100.0, var in 0.0f64..100.0
    ) {
        let (lo, hi) = (e1.min(e2), e1.max(e2));
        prop_assert!(theorem22_rhs(alpha, n, en, lo, eta).unwrap() >= theorem22_rhs(alpha, n, en, hi, eta).unwrap());
        prop_assert!(theorem22_rhs(alpha, n, en, eta, lo).unwrap() >= theorem22_rhs(alpha, n, en, eta, hi).unwrap());
        let t51 = theorem51_rhs(alpha, n, en, lo, eta, mean, var).unwrap();
        prop_assert!(t51 >= theorem51_rhs(alpha, n, en, hi, eta, mean, var).unwrap());
        prop_assert!(theorem51_rhs(alpha, n, en, lo, eta, mean + 1.0, var).unwrap() > t51);
    }
}

fn small_config() -> ExperimentConfig {
    ExperimentConfig {
        model: ModelKind::FiniteBd { k: 5 },
        theta0: 0.4,
        n: 60,
        alpha: 0.5,
        prior: BetaLaw::uniform().into(),
        init_mode: InitMode::InvariantPair,
        init: InitLaw::Invariant,
        replications: 50,
        epsilon: 0.05,
        eta: 0.05,
        epsilon_n: EpsilonSource::FromConditions { replications: 200 },
        seed: 9,
        misspec: None,
        inner_replications: 200,
    }
}

#[test]
fn report_does_not_depend_on_replication_order() {
    let prep = prepare(&small_config()).unwrap();
    let forward: Vec<_> = (0..50).map(|r| replicate(&prep, r)).collect();
    let mut shuffled = forward.clone();
    shuffled.reverse();
    shuffled.swap(3, 17);
    let a = assemble(&prep, forward);
    let b = assemble(&prep, shuffled);
    assert_eq!(a, b);
    assert_eq!(a.completed, 50);
    assert!(!a.partial);
    assert!(a.coverage >= 0.9);
    assert!((a.guaranteed_level - 0.9).abs() < 1e-15);
}

#[test]
fn misspecified_run_at_zero_amplitude_is_well_specified() {
    let mut c = small_config();
    c.model = ModelKind::ReflectedBd;
    c.theta0 = 0.3;
    c.prior = rho_n_recipe(&ModelKind::ReflectedBd, 0.25, 1).unwrap().with_shapes(1.0, 1.0).unwrap();
    c.misspec = Some(0.0);
    let prep = prepare(&c).unwrap();
    let m = prep.misspec.unwrap();
    assert_eq!(m.projection.theta_star, 0.3);
    assert!(m.projection.kl_rate.abs() < 1e-12);
    assert!(m.mean_ratio.abs() < 1e-12 && m.var_ratio.abs() < 1e-12);
}

#[test]
fn invalid_configs_are_config_errors() {
    let mut c = small_config();
    c.alpha = 1.0;
    assert!(prepare(&c).unwrap_err().is_config());
    let mut c = small_config();
    c.replications = 10;
    assert!(prepare(&c).unwrap_err().is_config());
    let mut c = small_config();
    c.misspec = Some(0.1);
    assert!(prepare(&c).unwrap_err().is_config());
}
