//! Data-generating mechanisms for the three prediction settings.
//!
//! * prognosis (causal): `p ~ Beta(α, β)`, `x = logit(p)`, `y ~ Bernoulli(p)`;
//!   the environment moves P(X) and leaves P(Y | X) alone.
//! * diagnosis (anti-causal): `y ~ Bernoulli(prevalence)`, `x ~ N(y, 1)`;
//!   the environment moves P(Y) and leaves P(X | Y) alone.
//! * fork (confounded): `z ~ N(μ_z, 1)`, `x = z + N(0, 1)`, `y ~ Bernoulli(expit(z))`;
//!   the environment moves P(Z) and with it both conditionals.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::numerics::{sample_bernoulli, sample_normal, BetaSampler, Seed};

/// Log-odds of a probability strictly inside (0, 1).
pub fn logit(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(domain(format!("logit requires 0 < p < 1, got {p}")));
    }
    Ok(p.ln() - (-p).ln_1p())
}

/// Logistic function, evaluated without overflow for large |l|.
pub fn expit(l: f64) -> f64 {
    if l >= 0.0 {
        1.0 / (1.0 + (-l).exp())
    } else {
        let e = l.exp();
        e / (1.0 + e)
    }
}

/// Direction of prediction relative to the causal structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    Causal,
    AntiCausal,
    Confounded,
}

impl Direction {
    /// Name of the clinical task usually associated with the direction.
    pub fn task_name(&self) -> &'static str {
        match self {
            Direction::Causal => "prognosis",
            Direction::AntiCausal => "diagnosis",
            Direction::Confounded => "fork",
        }
    }
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Direction::Causal => "causal",
            Direction::AntiCausal => "anti-causal",
            Direction::Confounded => "confounded",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrognosisEnvSpec {
    pub label: String,
    pub alpha: f64,
    pub beta: f64,
}

impl PrognosisEnvSpec {
    pub fn new(label: impl Into<String>, alpha: f64, beta: f64) -> Result<Self> {
        let spec = Self {
            label: label.into(),
            alpha,
            beta,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.beta > 0.0) || !self.alpha.is_finite() || !self.beta.is_finite()
        {
            return Err(domain(format!(
                "environment '{}': beta shapes must be finite and positive, got alpha={}, beta={}",
                self.label, self.alpha, self.beta
            )));
        }
        Ok(())
    }

    /// Outcome prevalence implied by the Beta mean.
    pub fn prevalence(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosisEnvSpec {
    pub label: String,
    pub prevalence: f64,
}

impl DiagnosisEnvSpec {
    pub fn new(label: impl Into<String>, prevalence: f64) -> Result<Self> {
        let spec = Self {
            label: label.into(),
            prevalence,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.prevalence > 0.0 && self.prevalence < 1.0) {
            return Err(domain(format!(
                "environment '{}': prevalence must lie in (0, 1), got {}",
                self.label, self.prevalence
            )));
        }
        Ok(())
    }

    /// Posterior P(Y = 1 | X = x) under the Gaussian class conditionals.
    ///
    /// The likelihood ratio N(x; 1, 1) / N(x; 0, 1) is exp(x − ½), so the
    /// posterior log-odds are logit(prevalence) + x − ½.
    pub fn posterior(&self, x: f64) -> f64 {
        let prior = self.prevalence.ln() - (-self.prevalence).ln_1p();
        expit(x - 0.5 + prior)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForkEnvSpec {
    pub label: String,
    pub mu_z: f64,
}

impl ForkEnvSpec {
    pub fn new(label: impl Into<String>, mu_z: f64) -> Result<Self> {
        let spec = Self {
            label: label.into(),
            mu_z,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mu_z.is_finite() {
            return Err(domain(format!(
                "environment '{}': mu_z must be finite, got {}",
                self.label, self.mu_z
            )));
        }
        Ok(())
    }

    /// P(Y = 1 | X = x). Given x, Z ~ N((x + μ_z)/2, ½), so the risk is a
    /// logistic-normal mean with no closed form.
    pub fn risk_given_x(&self, x: f64) -> f64 {
        logistic_normal_mean(0.5 * (x + self.mu_z), std::f64::consts::FRAC_1_SQRT_2)
    }
}

/// E[expit(Z)] for Z ~ N(mean, sd²).
///
/// Trapezoidal rule on ±12 sd. The integrand is analytic in a strip of
/// half-width π around the real axis, so the rule converges geometrically in
/// the step count and 241 nodes are accurate to rounding.
pub fn logistic_normal_mean(mean: f64, sd: f64) -> f64 {
    const HALF_WIDTH: f64 = 12.0;
    const NODES: usize = 241;
    let step = 2.0 * HALF_WIDTH / (NODES - 1) as f64;
    let mut total = 0.0;
    let mut weight_sum = 0.0;
    for i in 0..NODES {
        let u = -HALF_WIDTH + step * i as f64;
        let w = (-0.5 * u * u).exp();
        total += w * expit(mean + sd * u);
        weight_sum += w;
    }
    total / weight_sum
}

/// Any of the three environment kinds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvSpec {
    Prognosis(PrognosisEnvSpec),
    Diagnosis(DiagnosisEnvSpec),
    Fork(ForkEnvSpec),
}

impl EnvSpec {
    pub fn label(&self) -> &str {
        match self {
            EnvSpec::Prognosis(s) => &s.label,
            EnvSpec::Diagnosis(s) => &s.label,
            EnvSpec::Fork(s) => &s.label,
        }
    }

    pub fn direction(&self) -> Direction {
        match self {
            EnvSpec::Prognosis(_) => Direction::Causal,
            EnvSpec::Diagnosis(_) => Direction::AntiCausal,
            EnvSpec::Fork(_) => Direction::Confounded,
        }
    }

    pub fn generate(&self, n: usize, seed: Seed) -> Result<Dataset> {
        match self {
            EnvSpec::Prognosis(s) => gen_prognosis(s, n, seed),
            EnvSpec::Diagnosis(s) => gen_diagnosis(s, n, seed),
            EnvSpec::Fork(s) => gen_fork(s, n, seed),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub x: f64,
    pub y: bool,
    pub true_risk: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub samples: Vec<LabeledSample>,
    pub environment_label: String,
    pub direction: Direction,
}

fn check_size(n: usize) -> Result<()> {
    if n == 0 {
        return Err(domain("sample size must be at least 1"));
    }
    Ok(())
}

pub fn gen_prognosis(spec: &PrognosisEnvSpec, n: usize, seed: Seed) -> Result<Dataset> {
    spec.validate()?;
    check_size(n)?;
    let sampler = BetaSampler::new(spec.alpha, spec.beta)?;
    let mut rng = seed.stream();
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        let x = logit(sampler.sample(&mut rng))?;
        // Round-trip through the feature so the stored risk is exactly expit(x).
        let risk = expit(x);
        let y = sample_bernoulli(risk, &mut rng)?;
        samples.push(LabeledSample {
            x,
            y,
            true_risk: Some(risk),
        });
    }
    Ok(Dataset {
        samples,
        environment_label: spec.label.clone(),
        direction: Direction::Causal,
    })
}

pub fn gen_diagnosis(spec: &DiagnosisEnvSpec, n: usize, seed: Seed) -> Result<Dataset> {
    spec.validate()?;
    check_size(n)?;
    let mut rng = seed.stream();
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        let y = sample_bernoulli(spec.prevalence, &mut rng)?;
        let x = sample_normal(if y { 1.0 } else { 0.0 }, 1.0, &mut rng)?;
        samples.push(LabeledSample {
            x,
            y,
            true_risk: Some(spec.posterior(x)),
        });
    }
    Ok(Dataset {
        samples,
        environment_label: spec.label.clone(),
        direction: Direction::AntiCausal,
    })
}

/// Fork samples carry `true_risk = expit(z)`, the risk given the confounder.
/// Use [`ForkEnvSpec::risk_given_x`] for P(Y = 1 | X).
pub fn gen_fork(spec: &ForkEnvSpec, n: usize, seed: Seed) -> Result<Dataset> {
    spec.validate()?;
    check_size(n)?;
    let mut rng = seed.stream();
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        let z = sample_normal(spec.mu_z, 1.0, &mut rng)?;
        let x = z + sample_normal(0.0, 1.0, &mut rng)?;
        let risk = expit(z);
        let y = sample_bernoulli(risk, &mut rng)?;
        samples.push(LabeledSample {
            x,
            y,
            true_risk: Some(risk),
        });
    }
    Ok(Dataset {
        samples,
        environment_label: spec.label.clone(),
        direction: Direction::Confounded,
    })
}

pub const CSV_HEADER: &str = "x,y,true_risk";

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn xs(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.x).collect()
    }

    pub fn labels(&self) -> Vec<bool> {
        self.samples.iter().map(|s| s.y).collect()
    }

    /// Stored true risks, or `None` if any sample lacks one.
    pub fn true_risks(&self) -> Option<Vec<f64>> {
        self.samples.iter().map(|s| s.true_risk).collect()
    }

    /// Observed outcome rate.
    pub fn prevalence(&self) -> f64 {
        if self.samples.is_empty() {
            return f64::NAN;
        }
        self.samples.iter().filter(|s| s.y).count() as f64 / self.samples.len() as f64
    }

    /// Writes `x,y,true_risk` rows with 17 significant digits, LF endings.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for s in &self.samples {
            write!(out, "{:.16e},{},", s.x, u8::from(s.y))?;
            if let Some(r) = s.true_risk {
                write!(out, "{r:.16e}")?;
            }
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_csv<R: Read>(
        input: R,
        environment_label: impl Into<String>,
        direction: Direction,
    ) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let header = reader.headers().map_err(|e| Error::Format {
            line: 1,
            message: e.to_string(),
        })?;
        if header.iter().collect::<Vec<_>>() != ["x", "y", "true_risk"] {
            return Err(Error::Format {
                line: 1,
                message: format!("expected header '{CSV_HEADER}'"),
            });
        }
        let mut samples = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| Error::Format {
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            })?;
            let line = record.position().map_or(0, |p| p.line());
            let bad = |message: String| Error::Format { line, message };
            let x: f64 = record[0]
                .parse()
                .map_err(|_| bad(format!("invalid x '{}'", &record[0])))?;
            let y = match &record[1] {
                "0" => false,
                "1" => true,
                other => return Err(bad(format!("invalid y '{other}'"))),
            };
            let true_risk = match &record[2] {
                "" => None,
                s => {
                    let r: f64 = s.parse().map_err(|_| bad(format!("invalid true_risk '{s}'")))?;
                    if !(0.0..=1.0).contains(&r) {
                        return Err(bad(format!("true_risk {r} outside [0, 1]")));
                    }
                    Some(r)
                }
            };
            samples.push(LabeledSample { x, y, true_risk });
        }
        Ok(Dataset {
            samples,
            environment_label: environment_label.into(),
            direction,
        })
    }
}
