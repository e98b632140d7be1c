//! The six subcommands as library functions. Each writes its outputs under
//! the output directory and returns a summary for the caller to print.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use casemix_core::datagen::{expit, logistic_normal_mean, Direction, EnvSpec};
use casemix_core::empirical::{analyze, ingest_csv, EmpiricalReport, RowIssue, Sidedness};
use casemix_core::metrics::{
    auc, calibration_curve, calibration_in_the_large, ici_oracle, roc_curve, CalibrationCurve, RocCurve,
};
use casemix_core::model::{fit_logistic, oracle_model, LogisticModel, RiskModel, DEFAULT_MAX_ITER, DEFAULT_TOL};
use casemix_core::numerics::{beta_pdf, normal_pdf};
use casemix_core::transport::{
    run_calibration_batch, run_discrimination_batch, shift_x_marginal, shift_y_marginal,
    verify_theorem_calibration, verify_theorem_discrimination, BatchSummary, DiscreteJoint, TabulatedModel,
    VerificationReport, XShift, YShift,
};
use casemix_core::{Result as CoreResult, Seed};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult, Context};

/// Everything a command needs besides its own flags.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub config: ExperimentConfig,
    pub seed: Seed,
    pub out: PathBuf,
}

impl RunContext {
    fn ensure_out(&self) -> CliResult<&Path> {
        fs::create_dir_all(&self.out).map_err(|e| CliError::io(&self.out, e))?;
        Ok(&self.out)
    }
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

fn write_with(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> CliResult<()> {
    let mut w = create(path)?;
    body(&mut w).and_then(|_| w.flush()).map_err(|e| CliError::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    write_with(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value).map_err(std::io::Error::from)?;
        writeln!(w)
    })
}

// ---------------------------------------------------------------- simulate

#[derive(Debug, Clone, Serialize)]
pub struct SimulateSummary {
    pub path: PathBuf,
    pub direction: Direction,
    pub environment: String,
    pub n: usize,
    pub prevalence: f64,
}

pub fn cmd_simulate(ctx: &RunContext, direction: Direction, env: &str, n: usize) -> CliResult<SimulateSummary> {
    if n < 2 {
        return Err(CliError::Config(format!("sample size must be at least 2, got {n}")));
    }
    let spec = ctx.config.environments.find(direction, env)?;
    let seed = ctx.seed.derive(&[direction.task_name(), env, "simulate"]);
    let data = spec.generate(n, seed).context(format!("simulating {}/{env}", direction.task_name()))?;
    let path = ctx.ensure_out()?.join(format!("{}_{env}.csv", direction.task_name()));
    write_with(&path, |w| data.write_csv(w))?;
    Ok(SimulateSummary {
        path,
        direction,
        environment: env.to_string(),
        n,
        prevalence: data.prevalence(),
    })
}

// -------------------------------------------------------------------- grid

/// One trained model scored on one evaluation environment.
#[derive(Debug, Clone)]
pub struct Cell {
    pub direction: Direction,
    pub train_env: String,
    pub eval_env: String,
    pub model: LogisticModel,
    pub xs: Vec<f64>,
    pub preds: Vec<f64>,
    pub labels: Vec<bool>,
    /// P(Y = 1 | X) of the evaluation environment at each sample.
    pub oracle_risks: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridRow {
    pub direction: Direction,
    pub task: String,
    pub train_env: String,
    pub eval_env: String,
    pub auc: f64,
    pub ici: f64,
    pub citl: f64,
    pub intercept: f64,
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridReport {
    pub seed: Seed,
    pub n_train: usize,
    pub n_eval: usize,
    pub rows: Vec<GridRow>,
}

pub const GRID_DIRECTIONS: [Direction; 2] = [Direction::Causal, Direction::AntiCausal];

fn train(config: &ExperimentConfig, seed: Seed, spec: &EnvSpec) -> CoreResult<LogisticModel> {
    let task = spec.direction().task_name();
    let data = spec.generate(config.n_train, seed.derive(&[task, spec.label(), "train"]))?;
    let (model, report) = fit_logistic(&data, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    if !report.converged {
        return Err(casemix_core::Error::Unfittable(format!(
            "no convergence after {} iterations (gradient norm {:e})",
            report.iterations, report.final_gradient_norm
        )));
    }
    Ok(model)
}

/// Fits one model per (direction, training environment) and scores it on
/// every environment of the same direction. Cells run in parallel; each
/// draws its data from a seed derived from its own coordinates, so the
/// result does not depend on scheduling.
pub fn grid_cells(config: &ExperimentConfig, seed: Seed, directions: &[Direction]) -> CliResult<Vec<Cell>> {
    let pairs: Vec<(EnvSpec, EnvSpec)> = directions
        .iter()
        .flat_map(|&d| {
            let envs = config.environments.for_direction(d);
            envs.iter()
                .flat_map(|t| envs.iter().map(move |e| (t.clone(), e.clone())))
                .collect::<Vec<_>>()
        })
        .collect();

    let training: Vec<EnvSpec> = directions
        .iter()
        .flat_map(|&d| config.environments.for_direction(d))
        .collect();
    let models: Vec<LogisticModel> = training
        .par_iter()
        .map(|spec| {
            train(config, seed, spec)
                .context(format!("fitting {} model on '{}'", spec.direction().task_name(), spec.label()))
        })
        .collect::<CliResult<_>>()?;
    let model_for = |spec: &EnvSpec| {
        let i = training
            .iter()
            .position(|t| t == spec)
            .expect("every training spec was fitted");
        models[i]
    };

    pairs
        .par_iter()
        .map(|(train_spec, eval_spec)| {
            let direction = train_spec.direction();
            let task = direction.task_name();
            let cell_seed = seed.derive(&[task, train_spec.label(), eval_spec.label()]);
            let data = eval_spec
                .generate(config.n_eval, cell_seed)
                .context(format!("generating {task} data for '{}'", eval_spec.label()))?;
            let xs = data.xs();
            let model = model_for(train_spec);
            Ok(Cell {
                direction,
                train_env: train_spec.label().to_string(),
                eval_env: eval_spec.label().to_string(),
                model,
                preds: model.predict_all(&xs),
                labels: data.labels(),
                oracle_risks: oracle_model(eval_spec).predict_all(&xs),
                xs,
            })
        })
        .collect()
}

fn score(cell: &Cell) -> CoreResult<GridRow> {
    Ok(GridRow {
        direction: cell.direction,
        task: cell.direction.task_name().to_string(),
        train_env: cell.train_env.clone(),
        eval_env: cell.eval_env.clone(),
        auc: auc(&cell.preds, &cell.labels)?,
        ici: ici_oracle(&cell.preds, &cell.oracle_risks)?,
        citl: calibration_in_the_large(&cell.preds, &cell.labels)?,
        intercept: cell.model.intercept,
        slope: cell.model.slope,
    })
}

pub fn grid_report(config: &ExperimentConfig, seed: Seed, directions: &[Direction]) -> CliResult<GridReport> {
    let cells = grid_cells(config, seed, directions)?;
    let rows = cells
        .par_iter()
        .map(|c| {
            score(c).context(format!(
                "scoring {} model trained on '{}' at '{}'",
                c.direction.task_name(),
                c.train_env,
                c.eval_env
            ))
        })
        .collect::<CliResult<_>>()?;
    Ok(GridReport {
        seed,
        n_train: config.n_train,
        n_eval: config.n_eval,
        rows,
    })
}

pub fn cmd_grid(ctx: &RunContext, directions: &[Direction]) -> CliResult<GridReport> {
    let report = grid_report(&ctx.config, ctx.seed, directions)?;
    let out = ctx.ensure_out()?;
    write_json(&out.join("grid.json"), &report)?;
    write_with(&out.join("grid.csv"), |w| {
        writeln!(w, "direction,task,train_env,eval_env,auc,ici,citl,intercept,slope")?;
        for r in &report.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                r.direction, r.task, r.train_env, r.eval_env, r.auc, r.ici, r.citl, r.intercept, r.slope
            )?;
        }
        Ok(())
    })?;
    Ok(report)
}

// ------------------------------------------------------------------ curves

pub const DEFAULT_ROC_POINTS: usize = 1001;

/// Keeps `max_points` operating points evenly spaced along the curve,
/// always including both ends.
pub fn thin_roc(curve: &RocCurve, max_points: usize) -> RocCurve {
    let n = curve.points.len();
    if n <= max_points || max_points < 2 {
        return curve.clone();
    }
    let mut points = Vec::with_capacity(max_points);
    for k in 0..max_points {
        let idx = (k as f64 * (n - 1) as f64 / (max_points - 1) as f64).round() as usize;
        if points.last().is_none_or(|&(i, _)| i != idx) {
            points.push((idx, curve.points[idx]));
        }
    }
    RocCurve {
        points: points.into_iter().map(|(_, p)| p).collect(),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CurveFiles {
    pub direction: Direction,
    pub train_env: String,
    pub eval_env: String,
    pub roc: PathBuf,
    pub calibration: PathBuf,
}

pub fn cmd_curves(
    ctx: &RunContext,
    directions: &[Direction],
    n_bins: usize,
    max_roc_points: usize,
) -> CliResult<Vec<CurveFiles>> {
    let cells = grid_cells(&ctx.config, ctx.seed, directions)?;
    let dir = ctx.ensure_out()?.join("curves");
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    cells
        .par_iter()
        .map(|c| {
            let name = format!("{}_{}_{}", c.direction.task_name(), c.train_env, c.eval_env);
            let curves: CoreResult<(RocCurve, CalibrationCurve)> = (|| {
                Ok((
                    roc_curve(&c.preds, &c.labels)?,
                    calibration_curve(&c.preds, &c.labels, n_bins)?,
                ))
            })();
            let (roc, cal) = curves.context(format!("curves for {name}"))?;
            let files = CurveFiles {
                direction: c.direction,
                train_env: c.train_env.clone(),
                eval_env: c.eval_env.clone(),
                roc: dir.join(format!("roc_{name}.csv")),
                calibration: dir.join(format!("calibration_{name}.csv")),
            };
            write_with(&files.roc, |w| thin_roc(&roc, max_roc_points).write_csv(w))?;
            write_with(&files.calibration, |w| cal.write_csv(w))?;
            Ok(files)
        })
        .collect()
}

// ---------------------------------------------------------------- theorems

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoremReport {
    pub seed: Seed,
    pub n_cases: usize,
    pub all_pass: bool,
    pub smoke: Vec<VerificationReport>,
    pub calibration: BatchSummary,
    pub discrimination: BatchSummary,
}

/// Shift operators under test; the defaults are the real ones.
#[derive(Clone, Copy)]
pub struct ShiftOperators<'a> {
    pub x: XShift<'a>,
    pub y: YShift<'a>,
}

impl Default for ShiftOperators<'static> {
    fn default() -> Self {
        Self {
            x: &shift_x_marginal,
            y: &shift_y_marginal,
        }
    }
}

/// Shifting a joint onto its own marginals must change nothing.
fn identity_smoke(seed: Seed) -> CoreResult<Vec<VerificationReport>> {
    let mut rng = seed.derive(&["smoke"]).stream();
    let joint = DiscreteJoint::random(&mut rng);
    let calibrated = TabulatedModel::calibrated_for(&joint);
    let mut cal = verify_theorem_calibration(&joint, &calibrated, &joint.marginal_x())?;
    cal.case_id = "identity-x-shift".into();
    let model = TabulatedModel::random_for(&joint, &mut rng);
    let mut disc = verify_theorem_discrimination(&joint, &model, joint.marginal_y())?.report;
    disc.case_id = "identity-y-shift".into();
    Ok(vec![cal, disc])
}

pub fn run_theorems(n_cases: usize, seed: Seed, ops: ShiftOperators<'_>) -> CliResult<TheoremReport> {
    if n_cases == 0 {
        return Err(CliError::Config("n_cases must be at least 1".into()));
    }
    let smoke = identity_smoke(seed).context("identity smoke check")?;
    let (cal, disc) = rayon::join(
        || run_calibration_batch(n_cases, seed.derive(&["calibration"]), ops.x),
        || run_discrimination_batch(n_cases, seed.derive(&["discrimination"]), ops.y),
    );
    let calibration = cal.context("calibration batch")?;
    let discrimination = disc.context("discrimination batch")?;
    let all_pass = smoke.iter().all(|r| r.pass) && calibration.all_pass() && discrimination.all_pass();
    Ok(TheoremReport {
        seed,
        n_cases,
        all_pass,
        smoke,
        calibration,
        discrimination,
    })
}

/// Writes `theorems.json`; a failing check is reported after the file is written.
pub fn cmd_theorems(ctx: &RunContext, n_cases: usize, ops: ShiftOperators<'_>) -> CliResult<TheoremReport> {
    let report = run_theorems(n_cases, ctx.seed, ops)?;
    write_json(&ctx.ensure_out()?.join("theorems.json"), &report)?;
    if !report.all_pass {
        return Err(CliError::Verification(format!(
            "calibration {}/{} passed (max diff {:e}), discrimination {}/{} passed (max diff {:e})",
            report.calibration.n_pass,
            report.calibration.n_cases,
            report.calibration.max_abs_diff,
            report.discrimination.n_pass,
            report.discrimination.n_cases,
            report.discrimination.max_abs_diff
        )));
    }
    Ok(report)
}

/// Deliberately broken operators, kept for negative-control runs.
pub mod corrupted {
    use super::*;

    /// Moves P(X) but also pulls every P(Y | x) toward one half.
    pub fn x_shift(joint: &DiscreteJoint, px: &[f64]) -> CoreResult<DiscreteJoint> {
        let shifted = shift_x_marginal(joint, px)?;
        let mass = shifted
            .mass()
            .iter()
            .map(|m| {
                let total = m[0] + m[1];
                let r = 0.9 * m[1] / total + 0.05;
                [total * (1.0 - r), total * r]
            })
            .collect();
        DiscreteJoint::new(shifted.x_values().to_vec(), mass)
    }

    /// Moves P(Y) but also tilts P(X | Y = 1) toward larger x.
    pub fn y_shift(joint: &DiscreteJoint, py: [f64; 2]) -> CoreResult<DiscreteJoint> {
        let shifted = shift_y_marginal(joint, py)?;
        let k = shifted.support_size() as f64;
        let tilt: Vec<f64> = (0..shifted.support_size()).map(|i| 1.0 + i as f64 / k).collect();
        let total: f64 = shifted.mass().iter().zip(&tilt).map(|(m, t)| m[1] * t).sum();
        let mass = shifted
            .mass()
            .iter()
            .zip(&tilt)
            .map(|(m, t)| [m[0], m[1] * t / total * py[1]])
            .collect();
        DiscreteJoint::new(shifted.x_values().to_vec(), mass)
    }
}

// --------------------------------------------------------------- empirical

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalOutput {
    #[serde(flatten)]
    pub report: EmpiricalReport,
    pub rejected_rows: Vec<RowIssue>,
}

pub fn cmd_empirical(
    ctx: &RunContext,
    csv: &Path,
    confidence: f64,
    sidedness: Sidedness,
    strict: bool,
) -> CliResult<EmpiricalOutput> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(CliError::Config(format!("confidence must lie in (0, 1), got {confidence}")));
    }
    let ingested = ingest_csv(csv, strict).context(csv.display().to_string())?;
    let report = analyze(&ingested.records, confidence, sidedness).context(csv.display().to_string())?;
    let output = EmpiricalOutput {
        report,
        rejected_rows: ingested.rejected,
    };
    write_json(&ctx.ensure_out()?.join("empirical.json"), &output)?;
    Ok(output)
}

// --------------------------------------------------------------- densities

pub const BETA_GRID_POINTS: usize = 10_001;
const X_GRID_MIN: f64 = -6.0;
const X_GRID_MAX: f64 = 7.0;
const X_GRID_POINTS: usize = 1301;

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct DensityFiles {
    pub beta: PathBuf,
    pub class_conditional: PathBuf,
    pub posterior: PathBuf,
    pub prevalence: PathBuf,
}

pub fn cmd_densities(ctx: &RunContext) -> CliResult<DensityFiles> {
    let envs = &ctx.config.environments;
    let out = ctx.ensure_out()?;
    let files = DensityFiles {
        beta: out.join("density_beta.csv"),
        class_conditional: out.join("density_x_given_y.csv"),
        posterior: out.join("risk_given_x.csv"),
        prevalence: out.join("prevalence.csv"),
    };

    let ps = grid(0.0, 1.0, BETA_GRID_POINTS);
    let beta_cols = envs
        .prognosis
        .iter()
        .map(|e| ps.iter().map(|&p| beta_pdf(p, e.alpha, e.beta)).collect::<CoreResult<Vec<_>>>())
        .collect::<CoreResult<Vec<_>>>()
        .context("beta densities")?;
    write_with(&files.beta, |w| {
        let labels: Vec<&str> = envs.prognosis.iter().map(|e| e.label.as_str()).collect();
        writeln!(w, "p,{}", labels.join(","))?;
        for (i, p) in ps.iter().enumerate() {
            write!(w, "{p}")?;
            for col in &beta_cols {
                write!(w, ",{}", col[i])?;
            }
            writeln!(w)?;
        }
        Ok(())
    })?;

    let xs = grid(X_GRID_MIN, X_GRID_MAX, X_GRID_POINTS);
    write_with(&files.class_conditional, |w| {
        writeln!(w, "x,y0,y1")?;
        for &x in &xs {
            writeln!(w, "{x},{},{}", normal_pdf(x, 0.0, 1.0), normal_pdf(x, 1.0, 1.0))?;
        }
        Ok(())
    })?;

    write_with(&files.posterior, |w| {
        let mut header = vec!["x".to_string(), "prognosis".to_string()];
        header.extend(envs.diagnosis.iter().map(|e| format!("diagnosis_{}", e.label)));
        header.extend(envs.fork.iter().map(|e| format!("fork_{}", e.label)));
        writeln!(w, "{}", header.join(","))?;
        for &x in &xs {
            write!(w, "{x},{}", expit(x))?;
            for e in &envs.diagnosis {
                write!(w, ",{}", e.posterior(x))?;
            }
            for e in &envs.fork {
                write!(w, ",{}", e.risk_given_x(x))?;
            }
            writeln!(w)?;
        }
        Ok(())
    })?;

    write_with(&files.prevalence, |w| {
        writeln!(w, "task,environment,prevalence")?;
        for e in &envs.prognosis {
            writeln!(w, "prognosis,{},{}", e.label, e.prevalence())?;
        }
        for e in &envs.diagnosis {
            writeln!(w, "diagnosis,{},{}", e.label, e.prevalence)?;
        }
        for e in &envs.fork {
            writeln!(w, "fork,{},{}", e.label, logistic_normal_mean(e.mu_z, 1.0))?;
        }
        Ok(())
    })?;
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;
    use casemix_core::metrics::RocPoint;

    #[test]
    fn thinning_keeps_ends() {
        let points: Vec<RocPoint> = (0..=100)
            .map(|i| RocPoint { fpr: i as f64 / 100.0, tpr: (i as f64 / 100.0).sqrt(), threshold: -(i as f64) })
            .collect();
        let curve = RocCurve { points };
        let thin = thin_roc(&curve, 11);
        assert_eq!(thin.points.len(), 11);
        assert_eq!(thin.points[0], curve.points[0]);
        assert_eq!(thin.points[10], curve.points[100]);
        assert_eq!(thin_roc(&curve, 500), curve);
    }

    #[test]
    fn grid_has_six_models_and_eighteen_cells() {
        let config = ExperimentConfig { n_train: 2000, n_eval: 2000, ..Default::default() };
        let report = grid_report(&config, Seed(3), &GRID_DIRECTIONS).unwrap();
        assert_eq!(report.rows.len(), 18);
        let mut models: Vec<(String, String)> =
            report.rows.iter().map(|r| (r.task.clone(), r.train_env.clone())).collect();
        models.dedup();
        assert_eq!(models.len(), 6);
    }

    #[test]
    fn theorem_smoke_passes() {
        let report = run_theorems(5, Seed(9), ShiftOperators::default()).unwrap();
        assert!(report.all_pass);
        assert!(report.smoke.iter().all(|r| r.pass));
    }
}
