//! Univariate logistic regression and oracle risk models.

use serde::{Deserialize, Serialize};

use crate::datagen::{expit, Dataset, DiagnosisEnvSpec, EnvSpec, ForkEnvSpec};
use crate::error::{domain, Error, Result};

/// Anything that maps a feature value to a predicted probability.
pub trait RiskModel {
    fn risk(&self, x: f64) -> f64;

    fn predict_all(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.risk(x)).collect()
    }
}

impl<F: Fn(f64) -> f64> RiskModel for F {
    fn risk(&self, x: f64) -> f64 {
        self(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub intercept: f64,
    pub slope: f64,
}

impl LogisticModel {
    pub fn new(intercept: f64, slope: f64) -> Result<Self> {
        if !intercept.is_finite() || !slope.is_finite() {
            return Err(domain(format!(
                "logistic coefficients must be finite, got ({intercept}, {slope})"
            )));
        }
        Ok(Self { intercept, slope })
    }

    pub fn predict(&self, x: f64) -> f64 {
        expit(self.intercept + self.slope * x)
    }
}

impl RiskModel for LogisticModel {
    fn risk(&self, x: f64) -> f64 {
        self.predict(x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub iterations: usize,
    /// Gradient below `tol`, or the remaining Newton gain is below f64 resolution.
    pub converged: bool,
    pub final_gradient_norm: f64,
    /// Mean log-likelihood after each accepted iterate, starting point first.
    pub log_likelihood_trace: Vec<f64>,
}

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 100;
const MAX_HALVINGS: usize = 10;
const SEPARATION_BOUND: f64 = 30.0;
/// Relative log-likelihood change below which no further ascent is representable.
const LL_FLOOR: f64 = 64.0 * f64::EPSILON;

/// ln(1 + e^l) without overflow.
fn softplus(l: f64) -> f64 {
    if l > 0.0 {
        l + (-l).exp().ln_1p()
    } else {
        l.exp().ln_1p()
    }
}

/// Mean Bernoulli log-likelihood of `ys` under expit(intercept + slope·x).
pub fn mean_log_likelihood(xs: &[f64], ys: &[bool], intercept: f64, slope: f64) -> f64 {
    let total: f64 = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| {
            let l = intercept + slope * x;
            if y {
                l - softplus(l)
            } else {
                -softplus(l)
            }
        })
        .sum();
    total / xs.len() as f64
}

/// Gradient of [`mean_log_likelihood`] with respect to (intercept, slope).
pub fn mean_gradient(xs: &[f64], ys: &[bool], intercept: f64, slope: f64) -> [f64; 2] {
    let n = xs.len() as f64;
    let (g0, g1) = xs.iter().zip(ys).fold((0.0, 0.0), |(g0, g1), (&x, &y)| {
        let r = f64::from(u8::from(y)) - expit(intercept + slope * x);
        (g0 + r, g1 + r * x)
    });
    [g0 / n, g1 / n]
}

/// Negated Hessian of the mean log-likelihood (the mean Fisher information).
fn mean_information(xs: &[f64], intercept: f64, slope: f64) -> [[f64; 2]; 2] {
    let n = xs.len() as f64;
    let (a, b, c) = xs.iter().fold((0.0, 0.0, 0.0), |(a, b, c), &x| {
        let p = expit(intercept + slope * x);
        let w = p * (1.0 - p);
        (a + w, b + w * x, c + w * x * x)
    });
    [[a / n, b / n], [b / n, c / n]]
}

fn norm(g: [f64; 2]) -> f64 {
    g[0].hypot(g[1])
}

/// With one feature, (quasi-)separation means the classes do not overlap:
/// the MLE slope is then unbounded and Newton iterates only drift outward.
fn separation_in_feature(xs: &[f64], ys: &[bool]) -> Option<Error> {
    let range = |class: bool| {
        xs.iter()
            .zip(ys)
            .filter(|(_, &y)| y == class)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (&x, _)| {
                (lo.min(x), hi.max(x))
            })
    };
    let (neg_lo, neg_hi) = range(false);
    let (pos_lo, pos_hi) = range(true);
    (neg_hi <= pos_lo || pos_hi <= neg_lo).then_some(Error::Separation {
        iterations: 0,
        magnitude: f64::INFINITY,
    })
}

/// Maximum-likelihood logistic fit by Newton–Raphson with step halving.
pub fn fit_logistic(data: &Dataset, tol: f64, max_iter: usize) -> Result<(LogisticModel, FitReport)> {
    fit_logistic_xy(&data.xs(), &data.labels(), tol, max_iter)
}

pub fn fit_logistic_xy(
    xs: &[f64],
    ys: &[bool],
    tol: f64,
    max_iter: usize,
) -> Result<(LogisticModel, FitReport)> {
    if xs.len() != ys.len() {
        return Err(Error::Contract(format!(
            "{} features but {} labels",
            xs.len(),
            ys.len()
        )));
    }
    if !(tol > 0.0) {
        return Err(domain(format!("tolerance must be positive, got {tol}")));
    }
    let positives = ys.iter().filter(|&&y| y).count();
    if positives == 0 || positives == ys.len() {
        return Err(Error::Unfittable(
            "data must contain both outcome classes".into(),
        ));
    }

    if let Some(err) = separation_in_feature(xs, ys) {
        return Err(err);
    }

    // Start at the marginal log-odds with zero slope.
    let prevalence = positives as f64 / ys.len() as f64;
    let mut beta = [prevalence.ln() - (-prevalence).ln_1p(), 0.0];
    let mut ll = mean_log_likelihood(xs, ys, beta[0], beta[1]);
    let mut grad = mean_gradient(xs, ys, beta[0], beta[1]);
    let mut trace = vec![ll];
    let mut iterations = 0;
    let mut at_floor = false;

    while norm(grad) > tol && iterations < max_iter {
        iterations += 1;
        let info = mean_information(xs, beta[0], beta[1]);
        let det = info[0][0] * info[1][1] - info[0][1] * info[1][0];
        if !(det > 0.0) {
            return Err(Error::Unfittable(format!(
                "information matrix is singular at iteration {iterations}"
            )));
        }
        let step = [
            (info[1][1] * grad[0] - info[0][1] * grad[1]) / det,
            (info[0][0] * grad[1] - info[1][0] * grad[0]) / det,
        ];
        // Newton decrement: the predicted gain of a full step.
        let decrement = grad[0] * step[0] + grad[1] * step[1];
        if decrement <= LL_FLOOR * ll.abs().max(1.0) {
            at_floor = true;
            break;
        }

        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let cand = [beta[0] + scale * step[0], beta[1] + scale * step[1]];
            let cand_ll = mean_log_likelihood(xs, ys, cand[0], cand[1]);
            if cand_ll >= ll {
                accepted = Some((cand, cand_ll));
                break;
            }
            scale *= 0.5;
        }
        let Some((cand, cand_ll)) = accepted else {
            break;
        };

        let magnitude = cand[0].abs().max(cand[1].abs());
        if magnitude > SEPARATION_BOUND {
            return Err(Error::Separation {
                iterations,
                magnitude,
            });
        }
        beta = cand;
        ll = cand_ll;
        trace.push(ll);
        grad = mean_gradient(xs, ys, beta[0], beta[1]);
    }

    let final_gradient_norm = norm(grad);
    Ok((
        LogisticModel::new(beta[0], beta[1])?,
        FitReport {
            iterations,
            converged: final_gradient_norm <= tol || at_floor,
            final_gradient_norm,
            log_likelihood_trace: trace,
        },
    ))
}

/// The true P(Y = 1 | X = x) of a data-generating mechanism.
#[derive(Debug, Clone, PartialEq)]
pub enum OracleModel {
    /// expit(x), shared by every prognosis environment.
    Prognosis,
    Diagnosis(DiagnosisEnvSpec),
    Fork(ForkEnvSpec),
}

pub fn oracle_model(spec: &EnvSpec) -> OracleModel {
    match spec {
        EnvSpec::Prognosis(_) => OracleModel::Prognosis,
        EnvSpec::Diagnosis(s) => OracleModel::Diagnosis(s.clone()),
        EnvSpec::Fork(s) => OracleModel::Fork(s.clone()),
    }
}

impl RiskModel for OracleModel {
    fn risk(&self, x: f64) -> f64 {
        match self {
            OracleModel::Prognosis => expit(x),
            OracleModel::Diagnosis(s) => s.posterior(x),
            OracleModel::Fork(s) => s.risk_given_x(x),
        }
    }
}
