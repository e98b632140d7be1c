//! Reference computations for tests.
//!
//! Nothing here depends on `casemix-core`: distribution functions are
//! obtained by adaptive quadrature of unnormalised densities, and rank
//! statistics by exhaustive pair enumeration.

// Gauss–Kronrod 7/15 nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn kronrod_panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(centre - dx) + f(centre + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, (kronrod - gauss).abs() * half)
}

/// Global adaptive Gauss–Kronrod (7/15) integral of `f` over [a, b]:
/// the panel with the largest error estimate is bisected until the summed
/// estimate drops below `tol` or the panel budget runs out.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    const MAX_PANELS: usize = 2000;
    let (v, e) = kronrod_panel(&f, a, b);
    let mut panels = vec![(a, b, v, e)];
    loop {
        let total_err: f64 = panels.iter().map(|p| p.3).sum();
        if total_err <= tol || panels.len() >= MAX_PANELS {
            break;
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (lo, hi, _, _) = panels.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = kronrod_panel(&f, lo, mid);
        let (v2, e2) = kronrod_panel(&f, mid, hi);
        panels.push((lo, mid, v1, e1));
        panels.push((mid, hi, v2, e2));
    }
    panels.iter().map(|p| p.2).sum()
}

/// F(d1, d2) CDF as a ratio of quadratures of the unnormalised density,
/// after the substitution x = (t / (1 − t))², which removes the endpoint
/// singularities for every d1, d2 ≥ 1.
pub fn f_cdf(x: f64, d1: f64, d2: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let log_density = |x: f64| (0.5 * d1 - 1.0) * x.ln() - 0.5 * (d1 + d2) * (d1 * x + d2).ln();
    // Scale by the log-density at x = 1 to keep large-df integrands finite.
    let reference = log_density(1.0);
    let integrand = |t: f64| {
        let r = t / (1.0 - t);
        let x = r * r;
        let jacobian = 2.0 * t / (1.0 - t).powi(3);
        (log_density(x) - reference).exp() * jacobian
    };
    let t_of_x = x.sqrt() / (1.0 + x.sqrt());
    let total = integrate(integrand, 0.0, 1.0, 1e-14);
    let upper = integrate(integrand, t_of_x, 1.0, 1e-14);
    // Integrate whichever side is smaller to keep relative accuracy in the tails.
    if upper < 0.5 * total {
        1.0 - upper / total
    } else {
        integrate(integrand, 0.0, t_of_x, 1e-14) / total
    }
}

/// Inverse of [`f_cdf`] by bisection.
pub fn f_quantile(p: f64, d1: f64, d2: f64) -> f64 {
    let mut hi = 1.0;
    while f_cdf(hi, d1, d2) < p {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if f_cdf(mid, d1, d2) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Standard normal CDF by quadrature of the density from 0 to z.
pub fn normal_cdf(z: f64) -> f64 {
    let density = |u: f64| (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt();
    0.5 + integrate(density, 0.0, z, 1e-15)
}

/// Tallies over all positive–negative pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairTally {
    pub wins: u64,
    pub ties: u64,
    pub losses: u64,
    pub positives: u64,
    pub negatives: u64,
}

impl PairTally {
    pub fn auc(&self) -> f64 {
        (2 * self.wins + self.ties) as f64 / (2 * self.positives * self.negatives) as f64
    }
}

/// O(n²) enumeration of every positive–negative pair.
pub fn enumerate_pairs(preds: &[f64], labels: &[bool]) -> PairTally {
    let mut t = PairTally {
        wins: 0,
        ties: 0,
        losses: 0,
        positives: labels.iter().filter(|&&y| y).count() as u64,
        negatives: labels.iter().filter(|&&y| !y).count() as u64,
    };
    for (i, &pi) in preds.iter().enumerate() {
        if !labels[i] {
            continue;
        }
        for (j, &pj) in preds.iter().enumerate() {
            if labels[j] {
                continue;
            }
            if pi > pj {
                t.wins += 1;
            } else if pi == pj {
                t.ties += 1;
            } else {
                t.losses += 1;
            }
        }
    }
    t
}

/// One-sample Kolmogorov–Smirnov distance against a continuous CDF.
pub fn ks_distance<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let c = cdf(x);
            (c - i as f64 / n).abs().max(((i + 1) as f64 / n - c).abs())
        })
        .fold(0.0, f64::max)
}

/// Two-sample Kolmogorov–Smirnov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Hanley–McNeil standard error of an AUC estimate.
pub fn auc_standard_error(auc: f64, positives: f64, negatives: f64) -> f64 {
    let q1 = auc / (2.0 - auc);
    let q2 = 2.0 * auc * auc / (1.0 + auc);
    ((auc * (1.0 - auc) + (positives - 1.0) * (q1 - auc * auc) + (negatives - 1.0) * (q2 - auc * auc))
        / (positives * negatives))
        .sqrt()
}
