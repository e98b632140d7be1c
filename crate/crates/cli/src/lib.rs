//! Reproducible experiments on prediction under case-mix shift.

pub mod commands;
pub mod config;
pub mod error;

use std::path::PathBuf;

use casemix_core::datagen::Direction;
use casemix_core::empirical::Sidedness;
use casemix_core::Seed;
use clap::{Parser, Subcommand, ValueEnum};

use crate::commands::{RunContext, ShiftOperators, DEFAULT_ROC_POINTS, GRID_DIRECTIONS};
use crate::config::ExperimentConfig;
pub use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "casemix", version, about = "Simulate, score and test prediction models under case-mix shift")]
pub struct Cli {
    /// Master seed; falls back to CASEMIX_SEED, then the config file.
    #[arg(long, global = true, env = "CASEMIX_SEED")]
    pub seed: Option<u64>,
    /// JSON experiment configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TaskArg {
    Prognosis,
    Diagnosis,
    Fork,
}

impl From<TaskArg> for Direction {
    fn from(t: TaskArg) -> Self {
        match t {
            TaskArg::Prognosis => Direction::Causal,
            TaskArg::Diagnosis => Direction::AntiCausal,
            TaskArg::Fork => Direction::Confounded,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SidednessArg {
    TwoSided,
    Greater,
    Less,
}

impl From<SidednessArg> for Sidedness {
    fn from(s: SidednessArg) -> Self {
        match s {
            SidednessArg::TwoSided => Sidedness::TwoSided,
            SidednessArg::Greater => Sidedness::Greater,
            SidednessArg::Less => Sidedness::Less,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CorruptArg {
    X,
    Y,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw one dataset and write it as CSV.
    Simulate {
        /// Task; defaults to the config's direction.
        #[arg(long, value_enum)]
        task: Option<TaskArg>,
        /// Environment label; defaults to the config's train_env.
        #[arg(long)]
        env: Option<String>,
        /// Sample size; defaults to the config's n_eval.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Train on every environment, evaluate on every environment.
    Grid {
        /// Also run the confounded (fork) task.
        #[arg(long)]
        with_fork: bool,
    },
    /// ROC and calibration curves for every (train, eval) pair.
    Curves {
        #[arg(long)]
        with_fork: bool,
        #[arg(long, default_value_t = casemix_core::metrics::DEFAULT_CALIBRATION_BINS)]
        bins: usize,
        /// Upper bound on ROC points written per curve.
        #[arg(long, default_value_t = DEFAULT_ROC_POINTS)]
        max_roc_points: usize,
    },
    /// Exact randomized checks of the two transport results.
    Theorems {
        #[arg(long, default_value_t = 500)]
        n_cases: usize,
        /// Replace a shift operator with a broken one (negative control).
        #[arg(long, value_enum, hide = true)]
        corrupt_shift: Option<CorruptArg>,
    },
    /// Variance of relative AUC change, prognostic vs diagnostic.
    Empirical {
        /// CSV with model_id,model_type,auc_original,auc_validation.
        #[arg(long)]
        csv: PathBuf,
        #[arg(long, default_value_t = 0.95)]
        confidence: f64,
        #[arg(long, value_enum, default_value = "two-sided")]
        sidedness: SidednessArg,
        /// Abort on the first malformed row instead of skipping it.
        #[arg(long)]
        strict: bool,
    },
    /// Density and risk curves for plotting.
    Densities,
}

fn directions(with_fork: bool) -> Vec<Direction> {
    let mut d = GRID_DIRECTIONS.to_vec();
    if with_fork {
        d.push(Direction::Confounded);
    }
    d
}

/// Runs a parsed command line and returns the text to print on success.
pub fn run(cli: Cli) -> CliResult<String> {
    let config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let seed = cli.seed.map(Seed).unwrap_or(config.seed);
    let ctx = RunContext { config, seed, out: cli.out };

    match cli.command {
        Command::Simulate { task, env, n } => {
            let direction = task.map_or(ctx.config.direction, Direction::from);
            let env = env.unwrap_or_else(|| ctx.config.train_env.clone());
            let s = commands::cmd_simulate(&ctx, direction, &env, n.unwrap_or(ctx.config.n_eval))?;
            Ok(format!(
                "{} {}: n={} prevalence={:.4} -> {}",
                direction.task_name(),
                s.environment,
                s.n,
                s.prevalence,
                s.path.display()
            ))
        }
        Command::Grid { with_fork } => {
            let report = commands::cmd_grid(&ctx, &directions(with_fork))?;
            let mut text = String::from("task       train      eval       auc     ici     citl\n");
            for r in &report.rows {
                text.push_str(&format!(
                    "{:<10} {:<10} {:<10} {:.4}  {:.4}  {:+.4}\n",
                    r.task, r.train_env, r.eval_env, r.auc, r.ici, r.citl
                ));
            }
            Ok(text.trim_end().to_string())
        }
        Command::Curves { with_fork, bins, max_roc_points } => {
            let files = commands::cmd_curves(&ctx, &directions(with_fork), bins, max_roc_points)?;
            Ok(format!("wrote {} ROC and calibration file pairs under {}", files.len(), ctx.out.join("curves").display()))
        }
        Command::Theorems { n_cases, corrupt_shift } => {
            let mut ops = ShiftOperators::default();
            match corrupt_shift {
                Some(CorruptArg::X) => ops.x = &commands::corrupted::x_shift,
                Some(CorruptArg::Y) => ops.y = &commands::corrupted::y_shift,
                None => {}
            }
            let r = commands::cmd_theorems(&ctx, n_cases, ops)?;
            Ok(format!(
                "calibration {}/{} (max diff {:e}); discrimination {}/{} (max diff {:e})",
                r.calibration.n_pass,
                r.calibration.n_cases,
                r.calibration.max_abs_diff,
                r.discrimination.n_pass,
                r.discrimination.n_cases,
                r.discrimination.max_abs_diff
            ))
        }
        Command::Empirical { csv, confidence, sidedness, strict } => {
            let o = commands::cmd_empirical(&ctx, &csv, confidence, sidedness.into(), strict)?;
            let r = &o.report;
            Ok(format!(
                "n_prognostic={} n_diagnostic={} excluded={} rejected={}\nratio={:.4} CI=[{:.4}, {:.4}] p={:.3e}",
                r.n_prognostic,
                r.n_diagnostic,
                r.excluded_rows,
                o.rejected_rows.len(),
                r.ratio,
                r.ci_low,
                r.ci_high,
                r.p_value
            ))
        }
        Command::Densities => {
            let f = commands::cmd_densities(&ctx)?;
            Ok(format!(
                "wrote {}, {}, {}, {}",
                f.beta.display(),
                f.class_conditional.display(),
                f.posterior.display(),
                f.prevalence.display()
            ))
        }
    }
}
