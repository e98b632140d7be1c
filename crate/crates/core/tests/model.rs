use casemix_core::datagen::{expit, gen_diagnosis, gen_prognosis, logit, DiagnosisEnvSpec, PrognosisEnvSpec};
use casemix_core::model::{
    fit_logistic, fit_logistic_xy, mean_gradient, mean_log_likelihood, LogisticModel, RiskModel,
    DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use casemix_core::numerics::{sample_bernoulli, sample_normal};
use casemix_core::{Error, Seed};
use proptest::prelude::*;

fn simulate(b0: f64, b1: f64, n: usize, seed: Seed) -> (Vec<f64>, Vec<bool>) {
    let mut rng = seed.stream();
    let xs: Vec<f64> = (0..n).map(|_| sample_normal(0.0, 1.0, &mut rng).unwrap()).collect();
    let ys = xs.iter().map(|&x| sample_bernoulli(expit(b0 + b1 * x), &mut rng).unwrap()).collect();
    (xs, ys)
}

#[test]
fn recovers_known_coefficients() {
    let (xs, ys) = simulate(0.3, 0.7, 200_000, Seed(31));
    let (m, report) = fit_logistic_xy(&xs, &ys, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
    assert!(report.converged);
    assert!((m.intercept - 0.3).abs() < 0.02, "{m:?}");
    assert!((m.slope - 0.7).abs() < 0.02, "{m:?}");
    assert!(report.final_gradient_norm < 1e-8);
}

#[test]
fn prognosis_fit_is_identity_link() {
    let spec = PrognosisEnvSpec::new("gp", 5.0, 10.0).unwrap();
    let (m, _) = fit_logistic(&gen_prognosis(&spec, 200_000, Seed(32)).unwrap(), DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
    assert!(m.intercept.abs() < 0.03 && (m.slope - 1.0).abs() < 0.03, "{m:?}");
}

#[test]
fn diagnosis_fit_recovers_bayes_posterior() {
    let spec = DiagnosisEnvSpec::new("screening", 0.2).unwrap();
    let (m, _) = fit_logistic(&gen_diagnosis(&spec, 200_000, Seed(33)).unwrap(), DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
    let b0 = -0.5 + logit(0.2).unwrap();
    assert!((m.intercept - b0).abs() < 0.03, "{m:?} vs {b0}");
    assert!((m.slope - 1.0).abs() < 0.03, "{m:?}");
}

#[test]
fn gradient_matches_finite_differences() {
    let (xs, ys) = simulate(-0.4, 1.2, 500, Seed(34));
    let mut rng = Seed(35).stream();
    let h = 1e-6;
    for _ in 0..100 {
        let b0 = sample_normal(0.0, 1.5, &mut rng).unwrap();
        let b1 = sample_normal(0.0, 1.5, &mut rng).unwrap();
        let g = mean_gradient(&xs, &ys, b0, b1);
        let fd0 = (mean_log_likelihood(&xs, &ys, b0 + h, b1) - mean_log_likelihood(&xs, &ys, b0 - h, b1)) / (2.0 * h);
        let fd1 = (mean_log_likelihood(&xs, &ys, b0, b1 + h) - mean_log_likelihood(&xs, &ys, b0, b1 - h)) / (2.0 * h);
        for (a, f) in [(g[0], fd0), (g[1], fd1)] {
            assert!((a - f).abs() <= 1e-5 * f.abs().max(1e-3), "analytic {a} vs fd {f}");
        }
    }
}

#[test]
fn likelihood_never_decreases() {
    for s in 0..20 {
        let (xs, ys) = simulate(1.5, -2.0, 300, Seed(100 + s));
        let (_, report) = fit_logistic_xy(&xs, &ys, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        for w in report.log_likelihood_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-12, "{:?}", report.log_likelihood_trace);
        }
    }
}

#[test]
fn iteration_cap_is_reported_not_fatal() {
    let (xs, ys) = simulate(0.3, 0.7, 1000, Seed(36));
    let (_, report) = fit_logistic_xy(&xs, &ys, 1e-300, 2).unwrap();
    assert!(!report.converged);
    assert_eq!(report.iterations, 2);
}

#[test]
fn separable_and_degenerate_data_are_rejected() {
    let xs = [-2.0, -1.0, 1.0, 2.0];
    let err = fit_logistic_xy(&xs, &[false, false, true, true], DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap_err();
    assert!(matches!(err, Error::Separation { .. }), "{err:?}");
    let err = fit_logistic_xy(&xs, &[true; 4], DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap_err();
    assert!(matches!(err, Error::Unfittable(_)));
}

proptest! {
    #[test]
    fn predictions_are_monotone_in_x(b0 in -5.0f64..5.0, b1 in -5.0f64..5.0, a in -10.0f64..10.0, d in 0.0f64..5.0) {
        let m = LogisticModel::new(b0, b1).unwrap();
        let (lo, hi) = (m.risk(a), m.risk(a + d));
        if b1 >= 0.0 { prop_assert!(hi >= lo); } else { prop_assert!(hi <= lo); }
        prop_assert!((0.0..=1.0).contains(&lo));
    }
}
