//! Discrimination and calibration metrics on finite samples.
//!
//! A positive call at threshold τ means `pred > τ`; predictions equal to τ
//! are negative calls. AUC gives tied positive–negative pairs half credit,
//! which makes it equal to the trapezoidal area under [`roc_curve`].

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::datagen::expit;
use crate::error::{domain, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    #[serde(rename = "tp")]
    pub true_pos: u64,
    #[serde(rename = "fp")]
    pub false_pos: u64,
    #[serde(rename = "fn")]
    pub false_neg: u64,
    #[serde(rename = "tn")]
    pub true_neg: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.true_pos + self.false_pos + self.false_neg + self.true_neg
    }
}

fn check_paired(preds: &[f64], labels_len: usize) -> Result<()> {
    if preds.len() != labels_len {
        return Err(Error::Contract(format!(
            "{} predictions but {} labels",
            preds.len(),
            labels_len
        )));
    }
    if preds.is_empty() {
        return Err(Error::Contract("empty prediction set".into()));
    }
    if let Some(p) = preds.iter().find(|p| p.is_nan()) {
        return Err(domain(format!("prediction is not a number: {p}")));
    }
    Ok(())
}

fn class_sizes(labels: &[bool]) -> Result<(u64, u64)> {
    let pos = labels.iter().filter(|&&y| y).count() as u64;
    let neg = labels.len() as u64 - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric(format!(
            "need both outcome classes, got {pos} positives and {neg} negatives"
        )));
    }
    Ok((pos, neg))
}

pub fn confusion_at(preds: &[f64], labels: &[bool], tau: f64) -> Result<ConfusionCounts> {
    check_paired(preds, labels.len())?;
    let mut c = ConfusionCounts {
        true_pos: 0,
        false_pos: 0,
        false_neg: 0,
        true_neg: 0,
    };
    for (&p, &y) in preds.iter().zip(labels) {
        match (p > tau, y) {
            (true, true) => c.true_pos += 1,
            (true, false) => c.false_pos += 1,
            (false, true) => c.false_neg += 1,
            (false, false) => c.true_neg += 1,
        }
    }
    Ok(c)
}

pub fn sensitivity(c: &ConfusionCounts) -> Result<f64> {
    let positives = c.true_pos + c.false_neg;
    if positives == 0 {
        return Err(Error::UndefinedMetric(
            "sensitivity needs at least one positive".into(),
        ));
    }
    Ok(c.true_pos as f64 / positives as f64)
}

pub fn specificity(c: &ConfusionCounts) -> Result<f64> {
    let negatives = c.true_neg + c.false_pos;
    if negatives == 0 {
        return Err(Error::UndefinedMetric(
            "specificity needs at least one negative".into(),
        ));
    }
    Ok(c.true_neg as f64 / negatives as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    pub threshold: f64,
}

/// Operating points ordered from the strictest threshold to −∞.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
}

impl RocCurve {
    pub fn trapezoid_area(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1].fpr - w[0].fpr) * 0.5 * (w[0].tpr + w[1].tpr))
            .sum()
    }

    /// Sensitivity at a given false-positive rate, interpolating linearly
    /// between operating points (the upper envelope within vertical runs).
    pub fn tpr_at(&self, fpr: f64) -> f64 {
        let pts = &self.points;
        let idx = pts.partition_point(|p| p.fpr < fpr);
        if idx == 0 {
            // Highest tpr among points with fpr == first fpr.
            return pts
                .iter()
                .take_while(|p| p.fpr <= fpr)
                .map(|p| p.tpr)
                .fold(pts[0].tpr, f64::max);
        }
        if idx == pts.len() {
            return pts[pts.len() - 1].tpr;
        }
        let (a, b) = (pts[idx - 1], pts[idx]);
        if b.fpr == fpr {
            return pts[idx..]
                .iter()
                .take_while(|p| p.fpr == fpr)
                .map(|p| p.tpr)
                .fold(b.tpr, f64::max);
        }
        a.tpr + (b.tpr - a.tpr) * (fpr - a.fpr) / (b.fpr - a.fpr)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "fpr,tpr,threshold")?;
        for p in &self.points {
            writeln!(out, "{},{},{}", p.fpr, p.tpr, p.threshold)?;
        }
        Ok(())
    }
}

/// Sorts (prediction, label) pairs by descending prediction.
fn sorted_desc(preds: &[f64], labels: &[bool]) -> Vec<(f64, bool)> {
    let mut pairs: Vec<(f64, bool)> = preds.iter().copied().zip(labels.iter().copied()).collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    pairs
}

pub fn roc_curve(preds: &[f64], labels: &[bool]) -> Result<RocCurve> {
    check_paired(preds, labels.len())?;
    let (pos, neg) = class_sizes(labels)?;
    let pairs = sorted_desc(preds, labels);

    let mut points = Vec::new();
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut i = 0;
    while i < pairs.len() {
        let value = pairs[i].0;
        // Everything strictly above `value` has been called positive so far.
        points.push(RocPoint {
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
            threshold: value,
        });
        while i < pairs.len() && pairs[i].0 == value {
            if pairs[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
    }
    points.push(RocPoint {
        fpr: 1.0,
        tpr: 1.0,
        threshold: f64::NEG_INFINITY,
    });
    Ok(RocCurve { points })
}

/// Positive–negative pair tallies underlying the Mann–Whitney AUC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairCounts {
    /// Pairs in which the positive scores strictly higher.
    pub concordant: u128,
    pub tied: u128,
    pub positives: u64,
    pub negatives: u64,
}

impl PairCounts {
    pub fn auc(&self) -> f64 {
        let total = 2 * u128::from(self.positives) * u128::from(self.negatives);
        (2 * self.concordant + self.tied) as f64 / total as f64
    }
}

pub fn pair_counts(preds: &[f64], labels: &[bool]) -> Result<PairCounts> {
    check_paired(preds, labels.len())?;
    let (positives, negatives) = class_sizes(labels)?;
    let mut pairs = sorted_desc(preds, labels);
    pairs.reverse();

    let mut negatives_below: u128 = 0;
    let mut concordant: u128 = 0;
    let mut tied: u128 = 0;
    let mut i = 0;
    while i < pairs.len() {
        let value = pairs[i].0;
        let (mut block_pos, mut block_neg) = (0u128, 0u128);
        while i < pairs.len() && pairs[i].0 == value {
            if pairs[i].1 {
                block_pos += 1;
            } else {
                block_neg += 1;
            }
            i += 1;
        }
        concordant += block_pos * negatives_below;
        tied += block_pos * block_neg;
        negatives_below += block_neg;
    }
    Ok(PairCounts {
        concordant,
        tied,
        positives,
        negatives,
    })
}

/// Mann–Whitney AUC with half credit for ties.
pub fn auc(preds: &[f64], labels: &[bool]) -> Result<f64> {
    Ok(pair_counts(preds, labels)?.auc())
}

/// Mean absolute difference between predictions and known true risks.
pub fn ici_oracle(preds: &[f64], true_risks: &[f64]) -> Result<f64> {
    check_paired(preds, true_risks.len())?;
    let total: f64 = preds
        .iter()
        .zip(true_risks)
        .map(|(p, r)| (p - r).abs())
        .sum();
    Ok(total / preds.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBin {
    pub mean_predicted: f64,
    pub observed_rate: f64,
    pub count: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BinningRule {
    /// Quantile bins of the predictions; tied predictions never straddle bins.
    EqualFrequency,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationCurve {
    pub bins: Vec<CalibrationBin>,
    pub rule: BinningRule,
}

impl CalibrationCurve {
    pub fn total_count(&self) -> u64 {
        self.bins.iter().map(|b| b.count).sum()
    }

    /// Count-weighted mean |observed − predicted| over bins.
    pub fn expected_calibration_error(&self) -> f64 {
        let n = self.total_count() as f64;
        self.bins
            .iter()
            .map(|b| b.count as f64 * (b.observed_rate - b.mean_predicted).abs())
            .sum::<f64>()
            / n
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "mean_predicted,observed_rate,count")?;
        for b in &self.bins {
            writeln!(out, "{},{},{}", b.mean_predicted, b.observed_rate, b.count)?;
        }
        Ok(())
    }
}

pub const DEFAULT_CALIBRATION_BINS: usize = 10;

pub fn calibration_curve(preds: &[f64], labels: &[bool], n_bins: usize) -> Result<CalibrationCurve> {
    check_paired(preds, labels.len())?;
    let n = preds.len();
    if n_bins < 2 {
        return Err(Error::Contract(format!("need at least 2 bins, got {n_bins}")));
    }
    if n_bins > n {
        return Err(Error::Contract(format!(
            "{n_bins} bins requested for {n} observations"
        )));
    }
    let mut pairs = sorted_desc(preds, labels);
    pairs.reverse();

    let mut bins = Vec::with_capacity(n_bins);
    let mut start = 0;
    for k in 1..=n_bins {
        if start >= n {
            break;
        }
        let mut end = ((k as f64) * n as f64 / n_bins as f64).round() as usize;
        end = end.clamp(start, n);
        // Extend through a tie block so identical predictions share one bin.
        while end < n && end > 0 && pairs[end].0 == pairs[end - 1].0 {
            end += 1;
        }
        if end == start {
            continue;
        }
        let slice = &pairs[start..end];
        let count = slice.len() as f64;
        bins.push(CalibrationBin {
            mean_predicted: slice.iter().map(|p| p.0).sum::<f64>() / count,
            observed_rate: slice.iter().filter(|p| p.1).count() as f64 / count,
            count: slice.len() as u64,
        });
        start = end;
    }
    Ok(CalibrationCurve {
        bins,
        rule: BinningRule::EqualFrequency,
    })
}

const CITL_TOL: f64 = 1e-12;
const CITL_MAX_ITER: usize = 200;

/// Log-odds offset `c` maximising the likelihood of `labels` under
/// expit(logit(pred) + c). Positive when the model under-predicts.
pub fn calibration_in_the_large(preds: &[f64], labels: &[bool]) -> Result<f64> {
    check_paired(preds, labels.len())?;
    class_sizes(labels)?;
    let mut log_odds = Vec::with_capacity(preds.len());
    for &p in preds {
        if !(p > 0.0 && p < 1.0) {
            return Err(domain(format!(
                "calibration-in-the-large needs predictions inside (0, 1), got {p}"
            )));
        }
        log_odds.push(p.ln() - (-p).ln_1p());
    }
    let n = preds.len() as f64;
    let observed = labels.iter().filter(|&&y| y).count() as f64 / n;
    // score(c) = observed − mean expit(l + c), strictly decreasing in c.
    let score_and_slope = |c: f64| {
        let (s, w) = log_odds.iter().fold((0.0, 0.0), |(s, w), &l| {
            let p = expit(l + c);
            (s + p, w + p * (1.0 - p))
        });
        (observed - s / n, w / n)
    };

    let (mut lo, mut hi) = (-1.0, 1.0);
    while score_and_slope(lo).0 < 0.0 {
        lo *= 2.0;
    }
    while score_and_slope(hi).0 > 0.0 {
        hi *= 2.0;
    }
    let mut c = 0.0_f64.clamp(lo, hi);
    for _ in 0..CITL_MAX_ITER {
        let (score, slope) = score_and_slope(c);
        if score.abs() < CITL_TOL {
            break;
        }
        if score > 0.0 {
            lo = c;
        } else {
            hi = c;
        }
        let newton = c + score / slope;
        c = if slope > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSummary {
    pub ici: f64,
    pub binned_ece: f64,
    pub citl_logit_offset: f64,
}

pub fn calibration_summary(
    preds: &[f64],
    labels: &[bool],
    true_risks: &[f64],
    n_bins: usize,
) -> Result<CalibrationSummary> {
    Ok(CalibrationSummary {
        ici: ici_oracle(preds, true_risks)?,
        binned_ece: calibration_curve(preds, labels, n_bins)?.expected_calibration_error(),
        citl_logit_offset: calibration_in_the_large(preds, labels)?,
    })
}
