//! Experiment configuration: a JSON file plus flag overrides.

use serde::{Deserialize, Serialize};

use combcore::controllization::{RandomizationKind, RandomizationMode};
use combcore::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    ExactControllization,
    Scaling,
    Coefficients,
    SwitchCompare,
    CombAudit,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::ExactControllization => "exact-controllization",
            ExperimentKind::Scaling => "scaling",
            ExperimentKind::Coefficients => "coefficients",
            ExperimentKind::SwitchCompare => "switch-compare",
            ExperimentKind::CombAudit => "comb-audit",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "exact-controllization" => Ok(Self::ExactControllization),
            "scaling" => Ok(Self::Scaling),
            "coefficients" => Ok(Self::Coefficients),
            "switch-compare" => Ok(Self::SwitchCompare),
            "comb-audit" => Ok(Self::CombAudit),
            other => Err(Error::Parameter(format!("unknown experiment '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SetChoice {
    Pauli,
    Clifford,
}

impl SetChoice {
    pub fn kind(self) -> RandomizationKind {
        match self {
            SetChoice::Pauli => RandomizationKind::Pauli,
            SetChoice::Clifford => RandomizationKind::Clifford,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeChoice {
    Average,
    Sampled,
}

/// Full experiment configuration with defaults suitable for the acceptance
/// thresholds baked into each runner.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Option<ExperimentKind>,
    /// Target dimensions for exact controllization.
    pub dims: Vec<usize>,
    /// Evolution time.
    pub t: f64,
    /// Step counts for the scaling experiment.
    pub n_list: Vec<usize>,
    /// Step count for the coefficients experiment.
    pub n: usize,
    /// Number of seeded cases (unitaries or Hamiltonians).
    pub seeds: usize,
    /// Master seed.
    pub seed: u64,
    pub set: SetChoice,
    pub mode: ModeChoice,
    /// Trials in sampled mode.
    pub trials: usize,
    /// Pauli-mixture weights for switch-compare.
    pub alpha: Option<[f64; 4]>,
    /// Instance count for comb-audit.
    pub cases: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: None,
            dims: vec![2, 3],
            t: 1.0,
            n_list: vec![4, 8, 16, 32, 64, 128, 256],
            n: 100,
            seeds: 20,
            seed: 0,
            set: SetChoice::Pauli,
            mode: ModeChoice::Average,
            trials: 10_000,
            alpha: None,
            cases: 100,
        }
    }
}

impl ExperimentConfig {
    pub fn mode(&self) -> RandomizationMode {
        match self.mode {
            ModeChoice::Average => RandomizationMode::Average,
            ModeChoice::Sampled => RandomizationMode::Sampled {
                trials: self.trials,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.experiment.is_none() {
            return Err(Error::Parameter("no experiment selected".into()));
        }
        if self.dims.iter().any(|&d| !(2..=4).contains(&d)) {
            return Err(Error::Parameter("dims must lie in 2..=4".into()));
        }
        if self.n_list.is_empty() || self.n_list.iter().any(|&n| n == 0 || n > 1 << 16) {
            return Err(Error::Parameter("n_list entries must lie in 1..=65536".into()));
        }
        if self.n == 0 || self.n > 1 << 16 {
            return Err(Error::Parameter("n must lie in 1..=65536".into()));
        }
        if self.seeds == 0 || self.seeds > 10_000 {
            return Err(Error::Parameter("seeds must lie in 1..=10000".into()));
        }
        if self.trials == 0 || self.trials > 1_000_000 {
            return Err(Error::Parameter("trials must lie in 1..=1000000".into()));
        }
        if self.cases == 0 || self.cases > 10_000 {
            return Err(Error::Parameter("cases must lie in 1..=10000".into()));
        }
        if let Some(alpha) = &self.alpha {
            let norm: f64 = alpha.iter().map(|a| a * a).sum();
            if alpha.iter().any(|&a| a < 0.0) || (norm - 1.0).abs() > 1e-6 {
                return Err(Error::Parameter(
                    "alpha must be non-negative with Σα² = 1".into(),
                ));
            }
        }
        Ok(())
    }
}
