//! Densities and the F distribution.

use serde::{Deserialize, Serialize};

use super::special::{ln_beta, reg_inc_beta};
use crate::error::{domain, Result};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Degrees of freedom of an F distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FParams {
    d1: u32,
    d2: u32,
}

impl FParams {
    pub fn new(d1: u32, d2: u32) -> Result<Self> {
        if d1 == 0 || d2 == 0 {
            return Err(domain(format!(
                "F degrees of freedom must be >= 1, got ({d1}, {d2})"
            )));
        }
        Ok(Self { d1, d2 })
    }

    pub fn d1(&self) -> u32 {
        self.d1
    }

    pub fn d2(&self) -> u32 {
        self.d2
    }

    /// Degrees of freedom with numerator and denominator exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            d1: self.d2,
            d2: self.d1,
        }
    }
}

fn check_support(x: f64) -> Result<()> {
    if x.is_nan() || x < 0.0 {
        return Err(domain(format!("F support is x >= 0, got {x}")));
    }
    Ok(())
}

/// CDF of the F distribution, I_{d1 x / (d1 x + d2)}(d1/2, d2/2).
pub fn f_cdf(x: f64, params: FParams) -> Result<f64> {
    check_support(x)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    let d1 = f64::from(params.d1);
    let d2 = f64::from(params.d2);
    let scaled = d1 * x;
    // Evaluate whichever beta argument is below 1/2 so neither tail loses digits.
    if scaled <= d2 {
        reg_inc_beta(scaled / (scaled + d2), d1 / 2.0, d2 / 2.0)
    } else {
        Ok(1.0 - reg_inc_beta(d2 / (scaled + d2), d2 / 2.0, d1 / 2.0)?)
    }
}

/// Survival function 1 − CDF of the F distribution.
pub fn f_sf(x: f64, params: FParams) -> Result<f64> {
    check_support(x)?;
    if x == 0.0 {
        return Ok(1.0);
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    let d1 = f64::from(params.d1);
    let d2 = f64::from(params.d2);
    let scaled = d1 * x;
    if scaled <= d2 {
        Ok(1.0 - reg_inc_beta(scaled / (scaled + d2), d1 / 2.0, d2 / 2.0)?)
    } else {
        reg_inc_beta(d2 / (scaled + d2), d2 / 2.0, d1 / 2.0)
    }
}

const QUANTILE_MAX_ITER: usize = 200;
const QUANTILE_REL_TOL: f64 = 1e-12;

/// Quantile of the F distribution by bisection on [`f_cdf`].
pub fn f_quantile(p: f64, params: FParams) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(domain(format!("F quantile requires 0 < p < 1, got {p}")));
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while f_cdf(hi, params)? < p {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return Err(domain(format!("F quantile for p={p} exceeds representable range")));
        }
    }
    for _ in 0..QUANTILE_MAX_ITER {
        if hi - lo <= QUANTILE_REL_TOL * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if f_cdf(mid, params)? < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Density of Beta(a, b) at x ∈ [0, 1].
pub fn beta_pdf(x: f64, a: f64, b: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(domain(format!("beta density requires 0 <= x <= 1, got {x}")));
    }
    if !(a > 0.0 && b > 0.0) {
        return Err(domain(format!("beta shapes must be positive, got a={a}, b={b}")));
    }
    let ln_norm = ln_beta(a, b)?;
    let edge = |shape: f64| -> f64 {
        match shape.partial_cmp(&1.0) {
            Some(std::cmp::Ordering::Less) => f64::INFINITY,
            Some(std::cmp::Ordering::Equal) => 1.0,
            _ => 0.0,
        }
    };
    if x == 0.0 {
        return Ok(edge(a) * if a == 1.0 { (-ln_norm).exp() } else { 1.0 });
    }
    if x == 1.0 {
        return Ok(edge(b) * if b == 1.0 { (-ln_norm).exp() } else { 1.0 });
    }
    Ok(((a - 1.0) * x.ln() + (b - 1.0) * (-x).ln_1p() - ln_norm).exp())
}

/// Density of N(mu, sigma²) at x.
pub fn normal_pdf(x: f64, mu: f64, sigma: f64) -> f64 {
    let z = (x - mu) / sigma;
    FRAC_1_SQRT_2PI / sigma * (-0.5 * z * z).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f_cdf_median_at_one_for_equal_df() {
        for d in [1, 2, 5, 10, 37, 1000] {
            let p = FParams::new(d, d).unwrap();
            assert!((f_cdf(1.0, p).unwrap() - 0.5).abs() < 1e-12, "d={d}");
            assert!((f_quantile(0.5, p).unwrap() - 1.0).abs() < 1e-9, "d={d}");
        }
    }

    #[test]
    fn f_cdf_support_boundary_and_errors() {
        let p = FParams::new(3, 7).unwrap();
        assert_eq!(f_cdf(0.0, p).unwrap(), 0.0);
        assert_eq!(f_sf(0.0, p).unwrap(), 1.0);
        assert!(f_cdf(-1.0, p).is_err());
        assert!(FParams::new(0, 3).is_err());
        assert!(FParams::new(3, 0).is_err());
    }

    #[test]
    fn cdf_and_sf_are_complementary() {
        let p = FParams::new(4, 9).unwrap();
        for &x in &[0.01, 0.3, 1.0, 2.2, 8.0, 50.0] {
            let s = f_cdf(x, p).unwrap() + f_sf(x, p).unwrap();
            assert!((s - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn quantile_round_trip() {
        let p = FParams::new(10, 12).unwrap();
        let q = f_quantile(0.975, p).unwrap();
        assert!((f_cdf(q, p).unwrap() - 0.975).abs() < 1e-9);
        assert!(f_quantile(0.0, p).is_err());
        assert!(f_quantile(1.0, p).is_err());
    }

    #[test]
    fn quantile_of_tiny_probability() {
        let p = FParams::new(1, 1).unwrap();
        let q = f_quantile(1e-9, p).unwrap();
        assert!(q > 0.0);
        assert!((f_cdf(q, p).unwrap() - 1e-9).abs() < 1e-15);
    }

    #[test]
    fn beta_pdf_uniform_and_errors() {
        assert!((beta_pdf(0.3, 1.0, 1.0).unwrap() - 1.0).abs() < 1e-14);
        assert!((beta_pdf(0.0, 1.0, 1.0).unwrap() - 1.0).abs() < 1e-14);
        // Beta(2, 2) density 6x(1-x)
        assert!((beta_pdf(0.25, 2.0, 2.0).unwrap() - 1.125).abs() < 1e-13);
        assert_eq!(beta_pdf(0.0, 2.0, 20.0).unwrap(), 0.0);
        assert!(beta_pdf(1.5, 2.0, 2.0).is_err());
    }

    #[test]
    fn normal_pdf_peak() {
        assert!((normal_pdf(1.0, 1.0, 1.0) - FRAC_1_SQRT_2PI).abs() < 1e-16);
        assert!(normal_pdf(1.0, 1.0, 1.0) > normal_pdf(1.001, 1.0, 1.0));
        assert!(normal_pdf(1.0, 1.0, 1.0) > normal_pdf(0.999, 1.0, 1.0));
    }
}
