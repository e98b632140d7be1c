//! Beta, normal and Bernoulli draws from an explicit stream.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use super::rng::RngStream;
use crate::error::{domain, Result};

/// Beta(a, b) sampler built from two unit-scale Gamma draws.
///
/// Draws that round to exactly 0 or 1 are discarded, so every returned
/// value lies strictly inside (0, 1).
#[derive(Debug, Clone, Copy)]
pub struct BetaSampler {
    a: Gamma<f64>,
    b: Gamma<f64>,
}

impl BetaSampler {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0) || a.is_infinite() || b.is_infinite() {
            return Err(domain(format!(
                "beta shapes must be finite and positive, got a={a}, b={b}"
            )));
        }
        let gamma = |shape: f64| {
            Gamma::new(shape, 1.0).map_err(|e| domain(format!("gamma shape {shape}: {e}")))
        };
        Ok(Self {
            a: gamma(a)?,
            b: gamma(b)?,
        })
    }

    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        loop {
            let ga = self.a.sample(rng);
            let gb = self.b.sample(rng);
            let p = ga / (ga + gb);
            if p > 0.0 && p < 1.0 {
                return p;
            }
        }
    }
}

pub fn sample_beta(a: f64, b: f64, rng: &mut RngStream) -> Result<f64> {
    Ok(BetaSampler::new(a, b)?.sample(rng))
}

pub fn sample_normal(mu: f64, sigma: f64, rng: &mut RngStream) -> Result<f64> {
    if !mu.is_finite() || !(sigma > 0.0) || sigma.is_infinite() {
        return Err(domain(format!(
            "normal requires finite mu and sigma > 0, got mu={mu}, sigma={sigma}"
        )));
    }
    let z: f64 = StandardNormal.sample(rng);
    Ok(mu + sigma * z)
}

pub fn sample_bernoulli(p: f64, rng: &mut RngStream) -> Result<bool> {
    if !(0.0..=1.0).contains(&p) {
        return Err(domain(format!("bernoulli requires 0 <= p <= 1, got {p}")));
    }
    Ok(rng.gen::<f64>() < p)
}
