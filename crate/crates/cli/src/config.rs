//! Experiment configuration: one JSON file per run, hashed into every
//! artifact so outputs can always be traced back to their inputs.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use modlab::{BlockModelParams, Kernel};

pub const ARTIFACT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: BlockModelParams,
    /// One run per seed; `--seed` on the command line restricts to a single one.
    pub seeds: Vec<u64>,
    /// Output directory; `--out` overrides.
    #[serde(default = "default_out")]
    pub out: PathBuf,
    /// Read the graph from an edge-list file instead of sampling it. The
    /// planted partition is still the contiguous-blocks one for (n, k).
    #[serde(default)]
    pub graph: Option<PathBuf>,
    #[serde(flatten)]
    pub kind: ExperimentKind,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Score one partition per seed: modularity breakdown, distance, region.
    Score {
        start: StartSpec,
        #[serde(default = "default_nu")]
        nu: f64,
    },
    /// Empirical landscape curve over a distance grid.
    Landscape {
        d_grid: Vec<f64>,
        #[serde(default)]
        band: Option<f64>,
        #[serde(default = "default_budget")]
        search_budget: usize,
    },
    /// Enumeration oracle vs the closed form on one polytope slice.
    Oracle {
        t: f64,
        resolution: usize,
        #[serde(default)]
        balanced: bool,
    },
    /// Deterministic best-improvement ascent from a configured start.
    Greedy {
        start: StartSpec,
        #[serde(default = "default_steps")]
        max_steps: u64,
        #[serde(default = "default_sample_every")]
        sample_every: u64,
        #[serde(default = "default_nu")]
        nu: f64,
    },
    /// Finite-temperature chain from a configured start.
    Mcmc {
        start: StartSpec,
        beta: f64,
        #[serde(default)]
        kernel: Kernel,
        #[serde(default = "default_steps")]
        max_steps: u64,
        #[serde(default = "default_sample_every")]
        sample_every: u64,
        #[serde(default = "default_nu")]
        nu: f64,
    },
    /// Exact Gibbs table for a small instance.
    GibbsOracle { beta: f64 },
    /// Overlap-gap certificate over the standard probe family.
    OgpCert {
        #[serde(default = "default_nu")]
        nu: f64,
        #[serde(default = "default_grid_points")]
        grid_points: usize,
        #[serde(default = "default_steps")]
        greedy_steps: u64,
    },
}

impl ExperimentKind {
    pub fn verb(&self) -> &'static str {
        match self {
            ExperimentKind::Score { .. } => "score",
            ExperimentKind::Landscape { .. } => "landscape",
            ExperimentKind::Oracle { .. } => "oracle",
            ExperimentKind::Greedy { .. } => "greedy",
            ExperimentKind::Mcmc { .. } => "mcmc",
            ExperimentKind::GibbsOracle { .. } => "gibbs-oracle",
            ExperimentKind::OgpCert { .. } => "ogp-cert",
        }
    }
}

fn default_nu() -> f64 {
    0.3
}

fn default_budget() -> usize {
    20
}

fn default_steps() -> u64 {
    1_000_000
}

fn default_sample_every() -> u64 {
    1_000
}

fn default_grid_points() -> usize {
    12
}

/// Where a chain or score starts from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StartSpec {
    Planted,
    Decoy { i: usize, j: usize },
    Interpolated { i: usize, j: usize, t: f64 },
    BalancedRandom,
    /// One label per line, as written by `save_partition`.
    File { path: PathBuf },
}

impl ExperimentConfig {
    pub fn validate(&self) -> modlab::Result<()> {
        self.model.validate()?;
        if self.seeds.is_empty() {
            return Err(modlab::Error::InvalidParams("seeds must be nonempty".into()));
        }
        match &self.kind {
            ExperimentKind::Landscape { d_grid, .. } => {
                if d_grid.is_empty() {
                    return Err(modlab::Error::InvalidParams("d_grid must be nonempty".into()));
                }
            }
            ExperimentKind::Oracle { t, resolution, .. } => {
                modlab::SignaturePolytopeSpec::new(self.model.k, *t, false)?;
                if *resolution == 0 {
                    return Err(modlab::Error::InvalidParams("resolution must be positive".into()));
                }
            }
            _ => {}
        }
        Ok(())
    }
}
