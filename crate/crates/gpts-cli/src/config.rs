use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path as FsPath;

use gpts::search::{SelectionStrategy, StoppingRule, UpdateMode};
use gpts::{chi_gaussian, chi_linear, chi_mdp, ChiSequence};

/// CLI-level error with a stable exit-code category.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(std::io::Error),
    Core(gpts::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "configuration: {msg}"),
            CliError::Io(e) => write!(f, "io: {e}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<gpts::Error> for CliError {
    fn from(e: gpts::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use gpts::Error::*;
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Core(e) => match e {
                Parameter(_) | DepthMismatch { .. } => 2,
                Input(_) | UnsupportedKernel(_) => 3,
                SizeCap { .. } => 4,
                Regime(_) => 5,
                DegenerateUpdate(_) => 6,
                Environment(_) => 7,
                ExhaustedTree => 8,
                PropertyViolation(_) => 9,
            },
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn default_noise_var() -> f64 {
    0.01
}
fn default_delta() -> f64 {
    0.05
}
fn default_beta_scale() -> f64 {
    1.0
}
fn default_horizon() -> usize {
    100
}
fn default_replications() -> usize {
    1
}
fn default_gram_cap() -> usize {
    gpts::spectrum::DEFAULT_GRAM_CAP
}

/// Kernel choice in a config file or on the command line.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KernelConfig {
    pub kind: String,
    #[serde(rename = "B")]
    pub branching: usize,
    #[serde(rename = "D")]
    pub depth: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig { kind: "linear".into(), branching: 2, depth: 3, s: None, gamma: None }
    }
}

impl KernelConfig {
    pub fn chi(&self) -> CliResult<ChiSequence> {
        match self.kind.as_str() {
            "linear" => Ok(chi_linear(self.branching, self.depth)?),
            "gaussian" => {
                let s = self.s.ok_or_else(|| {
                    CliError::Config("gaussian kernel needs the width `s`".into())
                })?;
                Ok(chi_gaussian(self.branching, self.depth, s)?)
            }
            "mdp" => {
                let gamma = self.gamma.ok_or_else(|| {
                    CliError::Config("mdp kernel needs the discount `gamma`".into())
                })?;
                Ok(chi_mdp(self.branching, self.depth, gamma)?)
            }
            other => Err(CliError::Config(format!(
                "unknown kernel kind `{other}` (expected linear | gaussian | mdp)"
            ))),
        }
    }
}

/// Stopping rule in a config file.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum StoppingConfig {
    #[default]
    Fixed,
    ConfidenceWidth { threshold: f64 },
}

impl StoppingConfig {
    pub fn to_rule(&self, horizon: usize) -> StoppingRule {
        match self {
            StoppingConfig::Fixed => StoppingRule::FixedIterations(horizon),
            StoppingConfig::ConfidenceWidth { threshold } => {
                StoppingRule::ConfidenceWidth { threshold: *threshold, max_iterations: horizon }
            }
        }
    }
}

fn default_update_mode() -> String {
    "incremental".into()
}
fn default_selection() -> String {
    "flat".into()
}

/// One structured config file drives every subcommand; flags override.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub kernel: KernelConfig,
    #[serde(default = "default_noise_var")]
    pub noise_var: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_beta_scale")]
    pub beta_scale: f64,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub stopping: StoppingConfig,
    #[serde(default = "default_update_mode")]
    pub update_mode: String,
    #[serde(default = "default_selection")]
    pub selection: String,
    #[serde(default = "default_gram_cap")]
    pub gram_cap: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observation_noise_std: Option<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

impl ExperimentConfig {
    pub fn load(path: &FsPath) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)?;
        let config: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.replications < 1 {
            return Err(CliError::Config("replications must be >= 1".into()));
        }
        if self.noise_var < 0.0 || !self.noise_var.is_finite() {
            return Err(CliError::Config(format!(
                "noise_var must be finite and >= 0, got {}",
                self.noise_var
            )));
        }
        self.update_mode()?;
        self.selection_strategy()?;
        Ok(())
    }

    pub fn update_mode(&self) -> CliResult<UpdateMode> {
        match self.update_mode.as_str() {
            "incremental" => Ok(UpdateMode::Incremental),
            "recompute" => Ok(UpdateMode::Recompute),
            other => Err(CliError::Config(format!(
                "unknown update mode `{other}` (expected incremental | recompute)"
            ))),
        }
    }

    pub fn selection_strategy(&self) -> CliResult<SelectionStrategy> {
        match self.selection.as_str() {
            "flat" => Ok(SelectionStrategy::FlatScan),
            "descent" => Ok(SelectionStrategy::TreeDescent),
            other => Err(CliError::Config(format!(
                "unknown selection strategy `{other}` (expected flat | descent)"
            ))),
        }
    }
}
