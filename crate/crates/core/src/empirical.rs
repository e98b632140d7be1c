//! Relative AUC change across external validations and the variance-ratio
//! F-test between prognostic and diagnostic models.
//!
//! Each validation contributes one independent δ sample, even when a model
//! has several validations; within-model correlation is not modelled.

use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::numerics::{f_cdf, f_quantile, f_sf, FParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelType {
    Diagnostic,
    Prognostic,
}

impl FromStr for ModelType {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "diagnostic" => Ok(ModelType::Diagnostic),
            "prognostic" => Ok(ModelType::Prognostic),
            _ => Err(format!("model_type must be 'diagnostic' or 'prognostic', got '{s}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationRecord {
    pub model_id: String,
    pub model_type: ModelType,
    pub auc_original: f64,
    pub auc_validation: f64,
}

/// δ = ((AUC₁ − ½) − (AUC₀ − ½)) / (AUC₀ − ½).
pub fn relative_delta(auc0: f64, auc1: f64) -> Result<f64> {
    if !(auc0 > 0.5) {
        return Err(Error::NonInformativeBaseline(auc0));
    }
    if !auc1.is_finite() {
        return Err(domain(format!("validation AUC must be finite, got {auc1}")));
    }
    Ok(((auc1 - 0.5) - (auc0 - 0.5)) / (auc0 - 0.5))
}

/// Unbiased sample variance (n − 1 denominator).
pub fn sample_variance(xs: &[f64]) -> Result<f64> {
    if xs.len() < 2 {
        return Err(Error::Contract(format!(
            "sample variance needs at least 2 values, got {}",
            xs.len()
        )));
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    Ok(xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Sidedness {
    #[default]
    TwoSided,
    /// Alternative: the first group has the larger variance.
    Greater,
    /// Alternative: the first group has the smaller variance.
    Less,
}

impl FromStr for Sidedness {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "two-sided" => Ok(Sidedness::TwoSided),
            "greater" => Ok(Sidedness::Greater),
            "less" => Ok(Sidedness::Less),
            _ => Err(format!("sidedness must be two-sided, greater or less, got '{s}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceTest {
    pub var_a: f64,
    pub var_b: f64,
    pub ratio: f64,
    pub df_a: u32,
    pub df_b: u32,
    pub ci_low: f64,
    pub ci_high: f64,
    pub p_value: f64,
}

/// Two-sided F-test of var(a) = var(b).
pub fn variance_ratio_test(a: &[f64], b: &[f64], confidence: f64) -> Result<VarianceTest> {
    variance_ratio_test_with(a, b, confidence, Sidedness::TwoSided)
}

/// F-test of var(a) = var(b). The confidence interval for the ratio is
/// always two-sided; `sidedness` only selects the p-value.
pub fn variance_ratio_test_with(
    a: &[f64],
    b: &[f64],
    confidence: f64,
    sidedness: Sidedness,
) -> Result<VarianceTest> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(domain(format!("confidence must lie in (0, 1), got {confidence}")));
    }
    let var_a = sample_variance(a)?;
    let var_b = sample_variance(b)?;
    if !(var_b > 0.0) {
        return Err(Error::DegenerateVariance(
            "denominator group has zero variance".into(),
        ));
    }
    let df = |xs: &[f64]| {
        u32::try_from(xs.len() - 1).map_err(|_| domain("group too large for F degrees of freedom"))
    };
    let params = FParams::new(df(a)?, df(b)?)?;
    let ratio = var_a / var_b;

    let lower_tail = f_cdf(ratio, params)?;
    let upper_tail = f_sf(ratio, params)?;
    let p_value = match sidedness {
        Sidedness::TwoSided => (2.0 * lower_tail.min(upper_tail)).min(1.0),
        Sidedness::Greater => upper_tail,
        Sidedness::Less => lower_tail,
    };

    let alpha = 1.0 - confidence;
    let ci_low = ratio / f_quantile(1.0 - alpha / 2.0, params)?;
    let ci_high = ratio / f_quantile(alpha / 2.0, params)?;
    Ok(VarianceTest {
        var_a,
        var_b,
        ratio,
        df_a: params.d1(),
        df_b: params.d2(),
        ci_low,
        ci_high,
        p_value,
    })
}

pub const CSV_HEADER: [&str; 4] = ["model_id", "model_type", "auc_original", "auc_validation"];

/// A data row that failed parsing or validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowIssue {
    pub line: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Ingested {
    pub records: Vec<ValidationRecord>,
    /// Rows skipped in lenient mode.
    pub rejected: Vec<RowIssue>,
}

fn parse_row(record: &csv::StringRecord) -> std::result::Result<ValidationRecord, String> {
    if record.len() != CSV_HEADER.len() {
        return Err(format!("expected 4 fields, found {}", record.len()));
    }
    let model_type: ModelType = record[1].parse()?;
    let auc = |i: usize| -> std::result::Result<f64, String> {
        let v: f64 = record[i]
            .trim()
            .parse()
            .map_err(|_| format!("{} is not a number: '{}'", CSV_HEADER[i], &record[i]))?;
        if !(0.0..=1.0).contains(&v) {
            return Err(format!("{} = {v} is outside [0, 1]", CSV_HEADER[i]));
        }
        Ok(v)
    };
    Ok(ValidationRecord {
        model_id: record[0].to_string(),
        model_type,
        auc_original: auc(2)?,
        auc_validation: auc(3)?,
    })
}

/// Reads validation records. In strict mode the first bad row is fatal;
/// otherwise bad rows are collected in [`Ingested::rejected`].
pub fn ingest_reader<R: Read>(input: R, strict: bool) -> Result<Ingested> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(input);
    let header = reader.headers().map_err(|e| Error::Format {
        line: 1,
        message: e.to_string(),
    })?;
    if header.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(Error::Format {
            line: 1,
            message: format!("expected header '{}'", CSV_HEADER.join(",")),
        });
    }
    let mut out = Ingested::default();
    for row in reader.records() {
        let row = row.map_err(|e| Error::Format {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line());
        match parse_row(&row) {
            Ok(record) => out.records.push(record),
            Err(message) if strict => return Err(Error::Format { line, message }),
            Err(message) => out.rejected.push(RowIssue { line, message }),
        }
    }
    Ok(out)
}

pub fn ingest_csv(path: &Path, strict: bool) -> Result<Ingested> {
    let file = std::fs::File::open(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    ingest_reader(std::io::BufReader::new(file), strict)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaEntry {
    pub model_id: String,
    pub model_type: ModelType,
    pub auc_original: f64,
    pub auc_validation: f64,
    /// `None` when the baseline AUC is not above 0.5.
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalReport {
    pub n_prognostic: usize,
    pub n_diagnostic: usize,
    pub var_prognostic: f64,
    pub var_diagnostic: f64,
    pub ratio: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub p_value: f64,
    /// Records left out of the δ analysis because AUC₀ ≤ 0.5.
    pub excluded_rows: usize,
    pub df_prognostic: u32,
    pub df_diagnostic: u32,
    pub confidence: f64,
    pub sidedness: Sidedness,
    pub deltas: Vec<DeltaEntry>,
}

/// Computes δ for every record and tests var(δ_prognostic) against
/// var(δ_diagnostic).
pub fn analyze(records: &[ValidationRecord], confidence: f64, sidedness: Sidedness) -> Result<EmpiricalReport> {
    let mut prognostic = Vec::new();
    let mut diagnostic = Vec::new();
    let mut excluded_rows = 0;
    let mut deltas = Vec::with_capacity(records.len());
    for r in records {
        let delta = match relative_delta(r.auc_original, r.auc_validation) {
            Ok(d) => Some(d),
            Err(Error::NonInformativeBaseline(_)) => {
                excluded_rows += 1;
                None
            }
            Err(e) => return Err(e),
        };
        if let Some(d) = delta {
            match r.model_type {
                ModelType::Prognostic => prognostic.push(d),
                ModelType::Diagnostic => diagnostic.push(d),
            }
        }
        deltas.push(DeltaEntry {
            model_id: r.model_id.clone(),
            model_type: r.model_type,
            auc_original: r.auc_original,
            auc_validation: r.auc_validation,
            delta,
        });
    }
    let test = variance_ratio_test_with(&prognostic, &diagnostic, confidence, sidedness)?;
    Ok(EmpiricalReport {
        n_prognostic: prognostic.len(),
        n_diagnostic: diagnostic.len(),
        var_prognostic: test.var_a,
        var_diagnostic: test.var_b,
        ratio: test.ratio,
        ci_low: test.ci_low,
        ci_high: test.ci_high,
        p_value: test.p_value,
        excluded_rows,
        df_prognostic: test.df_a,
        df_diagnostic: test.df_b,
        confidence,
        sidedness,
        deltas,
    })
}
