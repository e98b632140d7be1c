//! Exact finite distributions over (X, Y) and case-mix shifts on them.
//!
//! A shift of P(X) that keeps P(Y | X) leaves a perfectly calibrated model
//! perfectly calibrated; a shift of P(Y) that keeps P(X | Y) leaves
//! sensitivity, specificity and AUC unchanged. On a finite support both facts
//! can be checked by summation to machine precision, which is what the
//! `verify_*` functions and the randomized batches below do.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::model::RiskModel;
use crate::numerics::{RngStream, Seed};

const MASS_TOL: f64 = 1e-12;

/// Tolerance used by the theorem checks.
pub const THEOREM_TOL: f64 = 1e-12;

/// Joint probability table p(x, y) on a finite support of X.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteJoint {
    x_values: Vec<f64>,
    /// `mass[i] = [p(x_i, y = 0), p(x_i, y = 1)]`.
    mass: Vec<[f64; 2]>,
}

fn check_probability_vector(v: &[f64], what: &str) -> Result<()> {
    if v.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
        return Err(domain(format!("{what} has a negative or non-finite entry")));
    }
    let total: f64 = v.iter().sum();
    if (total - 1.0).abs() > MASS_TOL {
        return Err(domain(format!("{what} sums to {total}, not 1")));
    }
    Ok(())
}

impl DiscreteJoint {
    pub fn new(x_values: Vec<f64>, mass: Vec<[f64; 2]>) -> Result<Self> {
        if x_values.is_empty() || x_values.len() != mass.len() {
            return Err(Error::Contract(format!(
                "{} support points but {} mass rows",
                x_values.len(),
                mass.len()
            )));
        }
        let mut sorted = x_values.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.iter().any(|x| !x.is_finite()) || sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(domain("support values must be finite and distinct"));
        }
        let flat: Vec<f64> = mass.iter().flatten().copied().collect();
        check_probability_vector(&flat, "joint mass")?;
        if let Some(i) = mass.iter().position(|m| !(m[0] + m[1] > 0.0)) {
            return Err(domain(format!(
                "support point x={} has zero marginal mass",
                x_values[i]
            )));
        }
        Ok(Self { x_values, mass })
    }

    pub fn x_values(&self) -> &[f64] {
        &self.x_values
    }

    pub fn mass(&self) -> &[[f64; 2]] {
        &self.mass
    }

    pub fn support_size(&self) -> usize {
        self.x_values.len()
    }

    pub fn marginal_x(&self) -> Vec<f64> {
        self.mass.iter().map(|m| m[0] + m[1]).collect()
    }

    /// `[P(Y = 0), P(Y = 1)]`.
    pub fn marginal_y(&self) -> [f64; 2] {
        self.mass
            .iter()
            .fold([0.0, 0.0], |acc, m| [acc[0] + m[0], acc[1] + m[1]])
    }

    /// P(Y = 1 | X = x_i) for every support point.
    pub fn risk_given_x(&self) -> Vec<f64> {
        self.mass.iter().map(|m| m[1] / (m[0] + m[1])).collect()
    }

    /// P(X = x_i | Y = y). Fails if the class has no mass.
    pub fn x_given_y(&self, y: bool) -> Result<Vec<f64>> {
        let col = usize::from(y);
        let total = self.marginal_y()[col];
        if !(total > 0.0) {
            return Err(Error::UndefinedMetric(format!("class y={} has no mass", col)));
        }
        Ok(self.mass.iter().map(|m| m[col] / total).collect())
    }

    /// Draws `n` i.i.d. (x, y) pairs.
    pub fn sample(&self, n: usize, rng: &mut RngStream) -> (Vec<f64>, Vec<bool>) {
        let mut cumulative = Vec::with_capacity(2 * self.mass.len());
        let mut acc = 0.0;
        for m in &self.mass {
            for &p in m {
                acc += p;
                cumulative.push(acc);
            }
        }
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        for _ in 0..n {
            let u: f64 = rng.gen::<f64>() * acc;
            let cell = cumulative.partition_point(|&c| c <= u).min(cumulative.len() - 1);
            xs.push(self.x_values[cell / 2]);
            ys.push(cell % 2 == 1);
        }
        (xs, ys)
    }

    /// Random joint for property checks: support size uniform in 2..=20,
    /// distinct support drawn uniformly on (−5, 5), flat-Dirichlet cell masses.
    pub fn random(rng: &mut RngStream) -> Self {
        let k = rng.gen_range(2..=20);
        let x_values = loop {
            let mut xs: Vec<f64> = (0..k).map(|_| rng.gen_range(-5.0..5.0)).collect();
            xs.sort_by(f64::total_cmp);
            if xs.windows(2).all(|w| w[0] < w[1]) {
                break xs;
            }
        };
        let flat = dirichlet_flat(2 * k, rng);
        let mass = flat.chunks(2).map(|c| [c[0], c[1]]).collect();
        Self::new(x_values, mass).expect("dirichlet draw is a valid joint")
    }
}

/// Flat Dirichlet draw of dimension `k`, normalised so it sums to 1.
fn dirichlet_flat(k: usize, rng: &mut RngStream) -> Vec<f64> {
    let raw: Vec<f64> = (0..k)
        .map(|_| {
            let e: f64 = Exp1.sample(rng);
            e.max(f64::MIN_POSITIVE)
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|v| v / total).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftKind {
    ShiftXMarginal,
    ShiftYMarginal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftSpec {
    pub kind: ShiftKind,
    pub new_marginal: Vec<f64>,
}

impl ShiftSpec {
    pub fn apply(&self, joint: &DiscreteJoint) -> Result<DiscreteJoint> {
        match self.kind {
            ShiftKind::ShiftXMarginal => shift_x_marginal(joint, &self.new_marginal),
            ShiftKind::ShiftYMarginal => match self.new_marginal.as_slice() {
                &[p0, p1] => shift_y_marginal(joint, [p0, p1]),
                other => Err(Error::Contract(format!(
                    "Y marginal needs 2 entries, got {}",
                    other.len()
                ))),
            },
        }
    }
}

/// Replaces P(X) by `new_px` (indexed like the support) keeping P(Y | X).
/// Support points that receive zero mass are dropped.
pub fn shift_x_marginal(joint: &DiscreteJoint, new_px: &[f64]) -> Result<DiscreteJoint> {
    if new_px.len() != joint.support_size() {
        return Err(Error::TransportViolation(format!(
            "new X marginal has {} entries for a support of {}",
            new_px.len(),
            joint.support_size()
        )));
    }
    check_probability_vector(new_px, "new X marginal")?;
    let risks = joint.risk_given_x();
    let mut x_values = Vec::new();
    let mut mass = Vec::new();
    for ((&x, &p), &r) in joint.x_values.iter().zip(new_px).zip(&risks) {
        if p > 0.0 {
            x_values.push(x);
            mass.push([p * (1.0 - r), p * r]);
        }
    }
    DiscreteJoint::new(x_values, mass)
}

/// Like [`shift_x_marginal`] but with the marginal keyed by support value;
/// any value outside the original support is a transport violation.
pub fn shift_x_marginal_keyed(joint: &DiscreteJoint, new_px: &[(f64, f64)]) -> Result<DiscreteJoint> {
    let mut dense = vec![0.0; joint.support_size()];
    for &(x, p) in new_px {
        match joint.x_values.iter().position(|&v| v == x) {
            Some(i) => dense[i] += p,
            None if p > 0.0 => {
                return Err(Error::TransportViolation(format!(
                    "x={x} lies outside the support of the source distribution"
                )))
            }
            None => {}
        }
    }
    shift_x_marginal(joint, &dense)
}

fn check_nondegenerate(py: [f64; 2], what: &str) -> Result<()> {
    if !(py[1] > 0.0 && py[1] < 1.0 && py[0] > 0.0) {
        return Err(Error::Precondition(format!(
            "{what} Y marginal must be non-degenerate, got P(Y=1)={}",
            py[1]
        )));
    }
    Ok(())
}

/// Replaces P(Y) by `new_py = [P(Y=0), P(Y=1)]` keeping P(X | Y).
pub fn shift_y_marginal(joint: &DiscreteJoint, new_py: [f64; 2]) -> Result<DiscreteJoint> {
    let old = joint.marginal_y();
    check_nondegenerate(old, "source")?;
    check_nondegenerate(new_py, "target")?;
    check_probability_vector(&new_py, "new Y marginal")?;
    let mass = joint
        .mass
        .iter()
        .map(|m| [m[0] / old[0] * new_py[0], m[1] / old[1] * new_py[1]])
        .collect();
    DiscreteJoint::new(joint.x_values.clone(), mass)
}

/// Predictions tabulated on a finite support. Off-support inputs give NaN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedModel {
    table: Vec<(f64, f64)>,
}

impl TabulatedModel {
    pub fn new(x_values: &[f64], predictions: &[f64]) -> Result<Self> {
        if x_values.len() != predictions.len() {
            return Err(Error::Contract("support and prediction lengths differ".into()));
        }
        let mut table: Vec<(f64, f64)> = x_values.iter().copied().zip(predictions.iter().copied()).collect();
        table.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self { table })
    }

    /// The model f(x) = P(Y = 1 | X = x) of `joint`, perfectly calibrated on it.
    pub fn calibrated_for(joint: &DiscreteJoint) -> Self {
        Self::new(joint.x_values(), &joint.risk_given_x()).expect("matching lengths")
    }

    /// Random predictions in [0, 1] on the support of `joint`: monotone in x
    /// half of the time, and coarsened to one decimal (creating ties) 30% of
    /// the time.
    pub fn random_for(joint: &DiscreteJoint, rng: &mut RngStream) -> Self {
        let k = joint.support_size();
        let mut preds: Vec<f64> = (0..k).map(|_| rng.gen::<f64>()).collect();
        if rng.gen_bool(0.5) {
            preds.sort_by(f64::total_cmp);
        }
        if rng.gen_bool(0.3) {
            for p in &mut preds {
                *p = (*p * 10.0).round() / 10.0;
            }
        }
        Self::new(joint.x_values(), &preds).expect("matching lengths")
    }
}

impl RiskModel for TabulatedModel {
    fn risk(&self, x: f64) -> f64 {
        match self.table.binary_search_by(|(v, _)| v.total_cmp(&x)) {
            Ok(i) => self.table[i].1,
            Err(_) => f64::NAN,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactOperatingPoint {
    pub tau: f64,
    pub sensitivity: f64,
    pub specificity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactMetrics {
    pub auc: f64,
    pub operating_points: Vec<ExactOperatingPoint>,
    pub ici: f64,
}

fn predictions_on(joint: &DiscreteJoint, f: &dyn RiskModel) -> Result<Vec<f64>> {
    let preds: Vec<f64> = joint.x_values.iter().map(|&x| f.risk(x)).collect();
    if let Some(i) = preds.iter().position(|p| p.is_nan()) {
        return Err(domain(format!(
            "model is undefined at support point x={}",
            joint.x_values[i]
        )));
    }
    Ok(preds)
}

/// P(f(X⁺) > f(X⁻)) + ½ P(f(X⁺) = f(X⁻)) for independent class-conditional draws.
pub fn exact_auc(joint: &DiscreteJoint, f: &dyn RiskModel) -> Result<f64> {
    let preds = predictions_on(joint, f)?;
    let pos = joint.x_given_y(true)?;
    let neg = joint.x_given_y(false)?;
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds[a].total_cmp(&preds[b]));

    let mut auc = 0.0;
    let mut neg_below = 0.0;
    let mut i = 0;
    while i < order.len() {
        let value = preds[order[i]];
        let (mut block_pos, mut block_neg) = (0.0, 0.0);
        while i < order.len() && preds[order[i]] == value {
            block_pos += pos[order[i]];
            block_neg += neg[order[i]];
            i += 1;
        }
        auc += block_pos * (neg_below + 0.5 * block_neg);
        neg_below += block_neg;
    }
    Ok(auc)
}

/// Sensitivity P(f(X) > τ | Y = 1) and specificity P(f(X) ≤ τ | Y = 0).
pub fn exact_operating_point(joint: &DiscreteJoint, f: &dyn RiskModel, tau: f64) -> Result<ExactOperatingPoint> {
    let preds = predictions_on(joint, f)?;
    let pos = joint.x_given_y(true)?;
    let neg = joint.x_given_y(false)?;
    let mut sensitivity = 0.0;
    let mut specificity = 0.0;
    for ((&p, &wp), &wn) in preds.iter().zip(&pos).zip(&neg) {
        if p > tau {
            sensitivity += wp;
        } else {
            specificity += wn;
        }
    }
    Ok(ExactOperatingPoint {
        tau,
        sensitivity,
        specificity,
    })
}

/// Σ_x P(x) |P(Y = 1 | x) − f(x)|.
pub fn exact_ici(joint: &DiscreteJoint, f: &dyn RiskModel) -> Result<f64> {
    let preds = predictions_on(joint, f)?;
    Ok(joint
        .marginal_x()
        .iter()
        .zip(joint.risk_given_x())
        .zip(&preds)
        .map(|((w, r), p)| w * (r - p).abs())
        .sum())
}

pub fn exact_metrics(joint: &DiscreteJoint, f: &dyn RiskModel, taus: &[f64]) -> Result<ExactMetrics> {
    Ok(ExactMetrics {
        auc: exact_auc(joint, f)?,
        operating_points: taus
            .iter()
            .map(|&t| exact_operating_point(joint, f, t))
            .collect::<Result<_>>()?,
        ici: exact_ici(joint, f)?,
    })
}

/// Outcome of one theorem check, serialised as a verification report row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub case_id: String,
    pub seed: u64,
    pub pre_metric: f64,
    pub post_metric: f64,
    pub max_abs_diff: f64,
    pub pass: bool,
}

/// Result of a discrimination check; also records how calibration moved.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminationCheck {
    pub report: VerificationReport,
    pub ici_before: f64,
    pub ici_after: f64,
}

pub type XShift<'a> = &'a (dyn Fn(&DiscreteJoint, &[f64]) -> Result<DiscreteJoint> + Sync);
pub type YShift<'a> = &'a (dyn Fn(&DiscreteJoint, [f64; 2]) -> Result<DiscreteJoint> + Sync);

/// A calibrated model stays calibrated after an X-marginal shift.
/// `pre_metric`/`post_metric` are the exact ICI before and after.
pub fn verify_theorem_calibration(
    joint: &DiscreteJoint,
    f: &dyn RiskModel,
    new_px: &[f64],
) -> Result<VerificationReport> {
    verify_theorem_calibration_with(joint, f, new_px, &shift_x_marginal)
}

/// As [`verify_theorem_calibration`] with a caller-supplied shift operator.
pub fn verify_theorem_calibration_with(
    joint: &DiscreteJoint,
    f: &dyn RiskModel,
    new_px: &[f64],
    shift: XShift<'_>,
) -> Result<VerificationReport> {
    let pre = exact_ici(joint, f)?;
    if pre > THEOREM_TOL {
        return Err(Error::Precondition(format!(
            "model is not perfectly calibrated on the source distribution (ICI = {pre:e})"
        )));
    }
    let shifted = shift(joint, new_px)?;
    let post = exact_ici(&shifted, f)?;
    Ok(VerificationReport {
        case_id: String::new(),
        seed: 0,
        pre_metric: pre,
        post_metric: post,
        max_abs_diff: post,
        pass: post <= THEOREM_TOL,
    })
}

/// Sensitivity and specificity at every threshold in the prediction support,
/// and AUC, are unchanged by a Y-marginal shift. `pre_metric`/`post_metric`
/// are the AUC before and after.
pub fn verify_theorem_discrimination(
    joint: &DiscreteJoint,
    f: &dyn RiskModel,
    new_py: [f64; 2],
) -> Result<DiscriminationCheck> {
    verify_theorem_discrimination_with(joint, f, new_py, &shift_y_marginal)
}

pub fn verify_theorem_discrimination_with(
    joint: &DiscreteJoint,
    f: &dyn RiskModel,
    new_py: [f64; 2],
    shift: YShift<'_>,
) -> Result<DiscriminationCheck> {
    check_nondegenerate(joint.marginal_y(), "source")?;
    check_nondegenerate(new_py, "target")?;
    let shifted = shift(joint, new_py)?;

    let mut taus = predictions_on(joint, f)?;
    taus.sort_by(f64::total_cmp);
    taus.dedup();
    // Below every prediction: all calls positive.
    taus.insert(0, f64::NEG_INFINITY);

    let before = exact_metrics(joint, f, &taus)?;
    let after = exact_metrics(&shifted, f, &taus)?;
    let max_abs_diff = before
        .operating_points
        .iter()
        .zip(&after.operating_points)
        .flat_map(|(a, b)| {
            [
                (a.sensitivity - b.sensitivity).abs(),
                (a.specificity - b.specificity).abs(),
            ]
        })
        .fold((before.auc - after.auc).abs(), f64::max);
    Ok(DiscriminationCheck {
        report: VerificationReport {
            case_id: String::new(),
            seed: 0,
            pre_metric: before.auc,
            post_metric: after.auc,
            max_abs_diff,
            pass: max_abs_diff <= THEOREM_TOL,
        },
        ici_before: before.ici,
        ici_after: after.ici,
    })
}

/// Summary of a randomized batch of theorem checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub theorem: String,
    pub n_cases: usize,
    pub n_pass: usize,
    pub max_abs_diff: f64,
    /// Discrimination batches only: fraction of cases whose exact ICI moved.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ici_changed_fraction: Option<f64>,
    pub cases: Vec<VerificationReport>,
}

impl BatchSummary {
    pub fn all_pass(&self) -> bool {
        self.n_pass == self.n_cases
    }

    fn from_reports(theorem: &str, cases: Vec<VerificationReport>, ici_changed_fraction: Option<f64>) -> Self {
        Self {
            theorem: theorem.to_string(),
            n_cases: cases.len(),
            n_pass: cases.iter().filter(|c| c.pass).count(),
            max_abs_diff: cases.iter().map(|c| c.max_abs_diff).fold(0.0, f64::max),
            ici_changed_fraction,
            cases,
        }
    }
}

/// Random X marginal on `k` points; 20% of the time some (not all) points
/// are zeroed to exercise support restriction.
fn random_x_marginal(k: usize, rng: &mut RngStream) -> Vec<f64> {
    let mut px = dirichlet_flat(k, rng);
    if rng.gen_bool(0.2) {
        let keep = rng.gen_range(0..k);
        for (i, p) in px.iter_mut().enumerate() {
            if i != keep && rng.gen_bool(0.5) {
                *p = 0.0;
            }
        }
        let total: f64 = px.iter().sum();
        px.iter_mut().for_each(|p| *p /= total);
    }
    px
}

/// Runs `n_cases` calibration checks, case `i` seeded by `seed.replicate(i)`.
pub fn run_calibration_batch(n_cases: usize, seed: Seed, shift: XShift<'_>) -> Result<BatchSummary> {
    let cases = (0..n_cases)
        .map(|i| {
            let case_seed = seed.replicate(i as u64);
            let mut rng = case_seed.stream();
            let joint = DiscreteJoint::random(&mut rng);
            let f = TabulatedModel::calibrated_for(&joint);
            let new_px = random_x_marginal(joint.support_size(), &mut rng);
            let mut report = verify_theorem_calibration_with(&joint, &f, &new_px, shift)?;
            report.case_id = format!("calibration-{i}");
            report.seed = case_seed.value();
            Ok(report)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BatchSummary::from_reports("calibration", cases, None))
}

/// Runs `n_cases` discrimination checks, case `i` seeded by `seed.replicate(i)`.
pub fn run_discrimination_batch(n_cases: usize, seed: Seed, shift: YShift<'_>) -> Result<BatchSummary> {
    let mut changed = 0usize;
    let cases = (0..n_cases)
        .map(|i| {
            let case_seed = seed.replicate(i as u64);
            let mut rng = case_seed.stream();
            let joint = DiscreteJoint::random(&mut rng);
            let f = TabulatedModel::random_for(&joint, &mut rng);
            let p1 = rng.gen_range(0.02..0.98);
            let check = verify_theorem_discrimination_with(&joint, &f, [1.0 - p1, p1], shift)?;
            if (check.ici_before - check.ici_after).abs() > THEOREM_TOL {
                changed += 1;
            }
            let mut report = check.report;
            report.case_id = format!("discrimination-{i}");
            report.seed = case_seed.value();
            Ok(report)
        })
        .collect::<Result<Vec<_>>>()?;
    let fraction = if n_cases == 0 { 0.0 } else { changed as f64 / n_cases as f64 };
    Ok(BatchSummary::from_reports("discrimination", cases, Some(fraction)))
}

/// Three-variable fork Z → X, Z → Y with finite Z and X.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForkJoint {
    pub x_values: Vec<f64>,
    pub z_prior: Vec<f64>,
    /// `x_given_z[z][i] = P(X = x_i | Z = z)`.
    pub x_given_z: Vec<Vec<f64>>,
    /// `y_given_z[z] = P(Y = 1 | Z = z)`.
    pub y_given_z: Vec<f64>,
}

impl ForkJoint {
    /// Binary confounder with a two-point feature.
    pub fn example() -> Self {
        Self {
            x_values: vec![0.0, 1.0],
            z_prior: vec![0.5, 0.5],
            x_given_z: vec![vec![0.8, 0.2], vec![0.3, 0.7]],
            y_given_z: vec![0.1, 0.6],
        }
    }

    pub fn with_z_prior(&self, z_prior: Vec<f64>) -> Result<Self> {
        if z_prior.len() != self.z_prior.len() {
            return Err(Error::Contract("Z prior has the wrong length".into()));
        }
        check_probability_vector(&z_prior, "Z prior")?;
        Ok(Self {
            z_prior,
            ..self.clone()
        })
    }

    /// Marginalises Z out: p(x, y) = Σ_z P(z) P(x | z) P(y | z).
    pub fn to_joint(&self) -> Result<DiscreteJoint> {
        let mut mass = vec![[0.0, 0.0]; self.x_values.len()];
        for ((pz, px), py) in self.z_prior.iter().zip(&self.x_given_z).zip(&self.y_given_z) {
            for (cell, p) in mass.iter_mut().zip(px) {
                cell[0] += pz * p * (1.0 - py);
                cell[1] += pz * p * py;
            }
        }
        DiscreteJoint::new(self.x_values.clone(), mass)
    }
}
