//! Experiment configuration: environments, sizes, seed.

use std::path::Path;

use casemix_core::datagen::{DiagnosisEnvSpec, Direction, EnvSpec, ForkEnvSpec, PrognosisEnvSpec};
use casemix_core::Seed;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const DEFAULT_SEED: Seed = Seed(20_261_019);
pub const DEFAULT_N_TRAIN: usize = 50_000;
pub const DEFAULT_N_EVAL: usize = 200_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Environments {
    pub prognosis: Vec<PrognosisEnvSpec>,
    pub diagnosis: Vec<DiagnosisEnvSpec>,
    pub fork: Vec<ForkEnvSpec>,
}

impl Default for Environments {
    fn default() -> Self {
        let prog = |l: &str, a, b| PrognosisEnvSpec { label: l.into(), alpha: a, beta: b };
        let diag = |l: &str, p| DiagnosisEnvSpec { label: l.into(), prevalence: p };
        let fork = |l: &str, mu_z| ForkEnvSpec { label: l.into(), mu_z };
        Self {
            prognosis: vec![prog("screening", 2.0, 20.0), prog("gp", 5.0, 10.0), prog("hospital", 10.0, 20.0)],
            diagnosis: vec![diag("screening", 0.2), diag("gp", 1.0 / 3.0), diag("hospital", 0.5)],
            fork: vec![fork("screening", -1.0), fork("gp", 0.0), fork("hospital", 1.0)],
        }
    }
}

impl Environments {
    pub fn for_direction(&self, direction: Direction) -> Vec<EnvSpec> {
        match direction {
            Direction::Causal => self.prognosis.iter().cloned().map(EnvSpec::Prognosis).collect(),
            Direction::AntiCausal => self.diagnosis.iter().cloned().map(EnvSpec::Diagnosis).collect(),
            Direction::Confounded => self.fork.iter().cloned().map(EnvSpec::Fork).collect(),
        }
    }

    pub fn find(&self, direction: Direction, label: &str) -> CliResult<EnvSpec> {
        self.for_direction(direction)
            .into_iter()
            .find(|e| e.label() == label)
            .ok_or_else(|| {
                CliError::Config(format!(
                    "unknown {} environment '{label}' (known: {})",
                    direction.task_name(),
                    self.labels(direction).join(", ")
                ))
            })
    }

    pub fn labels(&self, direction: Direction) -> Vec<String> {
        self.for_direction(direction).iter().map(|e| e.label().to_string()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub environments: Environments,
    pub train_env: String,
    pub n_train: usize,
    pub n_eval: usize,
    pub seed: Seed,
    pub direction: Direction,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            environments: Environments::default(),
            train_env: "screening".into(),
            n_train: DEFAULT_N_TRAIN,
            n_eval: DEFAULT_N_EVAL,
            seed: DEFAULT_SEED,
            direction: Direction::Causal,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let config: Self =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.n_train < 2 || self.n_eval < 2 {
            return Err(CliError::Config(format!(
                "sample sizes must be at least 2 (n_train={}, n_eval={})",
                self.n_train, self.n_eval
            )));
        }
        for direction in [Direction::Causal, Direction::AntiCausal, Direction::Confounded] {
            let envs = self.environments.for_direction(direction);
            let mut labels = self.environments.labels(direction);
            labels.sort();
            labels.dedup();
            if labels.len() != envs.len() {
                return Err(CliError::Config(format!(
                    "duplicate {} environment labels",
                    direction.task_name()
                )));
            }
            for env in &envs {
                let check = match env {
                    EnvSpec::Prognosis(s) => s.validate(),
                    EnvSpec::Diagnosis(s) => s.validate(),
                    EnvSpec::Fork(s) => s.validate(),
                };
                check.map_err(|e| CliError::Config(e.to_string()))?;
            }
        }
        self.environments.find(self.direction, &self.train_env)?;
        Ok(())
    }
}
