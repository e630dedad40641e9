//! Experiment configuration: a single JSON document that fully determines
//! every output byte of a run. All defaults are materialized at load time and
//! echoed into output headers so reports are self-describing.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Where instances come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InstanceSpec {
    /// Uniform random 3CNF instances.
    Random { m: usize, k: usize, count: usize },
    /// Planted (guaranteed-satisfiable) 3CNF instances.
    Planted { m: usize, k: usize, count: usize },
    /// Existing DIMACS files, passed through the compiler.
    Files { paths: Vec<PathBuf> },
}

impl InstanceSpec {
    pub fn count(&self) -> usize {
        match self {
            InstanceSpec::Random { count, .. } | InstanceSpec::Planted { count, .. } => *count,
            InstanceSpec::Files { paths } => paths.len(),
        }
    }
}

/// Candidate-batch parameters for the inner searches.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Candidates sampled per greedy-random iteration. Default: the full
    /// vocabulary when |V| <= 8, otherwise 64 (resolved per instance when
    /// absent).
    pub batch: Option<usize>,
    /// Candidates evaluated per gradient-greedy iteration. Default:
    /// min(|V|, 8), resolved per instance when absent.
    pub top_k: Option<usize>,
}

fn default_total_iterations() -> usize {
    1000
}

fn default_cuts() -> Vec<usize> {
    vec![500, 1000]
}

/// Iteration budgets and reporting cuts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetConfig {
    /// Total search iterations per instance and arm.
    #[serde(default = "default_total_iterations")]
    pub total_iterations: usize,
    /// Budget cuts reported from the same traces (success within <= cut
    /// counted iterations).
    #[serde(default = "default_cuts")]
    pub cuts: Vec<usize>,
}

impl Default for BudgetConfig {
    fn default() -> Self {
        Self { total_iterations: default_total_iterations(), cuts: default_cuts() }
    }
}

fn default_lr() -> f64 {
    0.05
}

fn default_max_steps() -> usize {
    2000
}

fn default_keep_every() -> usize {
    1
}

fn default_stride() -> usize {
    1
}

fn default_binary_attempt_iterations() -> usize {
    50
}

/// Chain construction and stage-scheduling parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    #[serde(default = "default_keep_every")]
    pub keep_every: usize,
    #[serde(default)]
    pub allow_partial: bool,
    /// Success threshold; `null` means the instance threshold (-k).
    #[serde(default)]
    pub threshold: Option<f64>,
    /// Visit every `stride`-th checkpoint in the staged walk.
    #[serde(default = "default_stride")]
    pub stride: usize,
    /// Per-attempt iteration cap of the binary-search scheduler.
    #[serde(default = "default_binary_attempt_iterations")]
    pub binary_attempt_iterations: usize,
    /// Cumulative retry cap per checkpoint; `null` means 10x the per-attempt
    /// cap.
    #[serde(default)]
    pub binary_cumulative_cap: Option<usize>,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            lr: default_lr(),
            max_steps: default_max_steps(),
            keep_every: default_keep_every(),
            allow_partial: false,
            threshold: None,
            stride: default_stride(),
            binary_attempt_iterations: default_binary_attempt_iterations(),
            binary_cumulative_cap: None,
        }
    }
}

impl ChainConfig {
    pub fn cumulative_cap(&self) -> usize {
        self.binary_cumulative_cap.unwrap_or(10 * self.binary_attempt_iterations)
    }
}

fn default_positions_per_instance() -> usize {
    4
}

fn default_persistence() -> f64 {
    0.99
}

fn default_identity_controls() -> usize {
    5
}

fn default_control_vocab() -> usize {
    8
}

fn default_control_hidden() -> usize {
    16
}

/// Ranking-evaluation protocol parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEvalConfig {
    #[serde(default = "default_positions_per_instance")]
    pub positions_per_instance: usize,
    #[serde(default = "default_persistence")]
    pub persistence: f64,
    /// Evaluation depth; `null` means the full vocabulary.
    #[serde(default)]
    pub depth: Option<usize>,
    /// Number of random identity-activation control instances.
    #[serde(default = "default_identity_controls")]
    pub identity_controls: usize,
    #[serde(default = "default_control_vocab")]
    pub control_vocab: usize,
    #[serde(default = "default_control_hidden")]
    pub control_hidden: usize,
}

impl Default for RankEvalConfig {
    fn default() -> Self {
        Self {
            positions_per_instance: default_positions_per_instance(),
            persistence: default_persistence(),
            depth: None,
            identity_controls: default_identity_controls(),
            control_vocab: default_control_vocab(),
            control_hidden: default_control_hidden(),
        }
    }
}

/// Benchmark arms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    Gr,
    GradientGreedy,
    FhGr,
    FhGradientGreedy,
    FhBinary,
}

impl Arm {
    pub fn is_staged(self) -> bool {
        matches!(self, Arm::FhGr | Arm::FhGradientGreedy | Arm::FhBinary)
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Arm::Gr => "gr",
            Arm::GradientGreedy => "gradient_greedy",
            Arm::FhGr => "fh_gr",
            Arm::FhGradientGreedy => "fh_gradient_greedy",
            Arm::FhBinary => "fh_binary",
        };
        f.write_str(name)
    }
}

impl FromStr for Arm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gr" => Ok(Arm::Gr),
            "gradient_greedy" => Ok(Arm::GradientGreedy),
            "fh_gr" => Ok(Arm::FhGr),
            "fh_gradient_greedy" => Ok(Arm::FhGradientGreedy),
            "fh_binary" => Ok(Arm::FhBinary),
            other => Err(format!("unknown arm {other:?}")),
        }
    }
}

fn default_arms() -> Vec<Arm> {
    vec![Arm::Gr, Arm::GradientGreedy, Arm::FhGr]
}

/// The experiment configuration document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Base seed; every random decision derives from it.
    pub seed: u64,
    pub output_dir: PathBuf,
    pub instances: InstanceSpec,
    /// Anchor input; `null` means the all-zeros sequence.
    #[serde(default)]
    pub anchor: Option<Vec<usize>>,
    #[serde(default)]
    pub search: SearchConfig,
    #[serde(default)]
    pub budget: BudgetConfig,
    #[serde(default)]
    pub chain: ChainConfig,
    #[serde(default = "default_arms")]
    pub arms: Vec<Arm>,
    #[serde(default)]
    pub rankeval: RankEvalConfig,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        let config: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::config(format!("bad config {}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.budget.cuts.is_empty() {
            return Err(CliError::config("at least one budget cut is required"));
        }
        if self.arms.is_empty() {
            return Err(CliError::config("at least one arm is required"));
        }
        if self.instances.count() == 0 {
            return Err(CliError::config("instance count must be >= 1"));
        }
        if let InstanceSpec::Files { paths } = &self.instances {
            for p in paths {
                if !p.exists() {
                    return Err(CliError::config(format!(
                        "instance file {} does not exist",
                        p.display()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Apply command-line overrides.
    pub fn with_overrides(mut self, seed: Option<u64>, out: Option<PathBuf>) -> CliResult<Self> {
        if let Some(s) = seed {
            self.seed = s;
        }
        if let Some(o) = out {
            self.output_dir = o;
        }
        self.validate()?;
        Ok(self)
    }

    /// Resolved per-instance batch size.
    pub fn batch_for(&self, vocab: usize) -> usize {
        self.search.batch.unwrap_or(if vocab <= 8 { vocab } else { 64 })
    }

    /// Resolved per-instance gradient-greedy width.
    pub fn top_k_for(&self, vocab: usize) -> usize {
        self.search.top_k.unwrap_or(vocab.min(8))
    }
}
