//! Run configuration shared by flags and config files.
//!
//! Every flag has a config-file key of the same name with dashes replaced by
//! underscores. Flags win over the file. The resolved configuration, with
//! every default filled in, is written next to the outputs; replaying it
//! reproduces them. `threads` and `out` are left out because they never
//! change results.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Read options from a TOML file; flags override it.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    /// full, csve, hsve or single.
    #[arg(long)]
    pub method: Option<String>,
    /// builtin:or, builtin:planted, builtin:linear=<csv> or exec:<command>.
    #[arg(long)]
    pub oracle: Option<String>,
    /// Background dataset: a CSV path, builtin:or-domain, builtin:planted-domain
    /// or builtin:planted-corr.
    #[arg(long, visible_alias = "background")]
    pub dataset: Option<String>,
    /// One instance to explain, as comma-separated values.
    #[arg(long, allow_hyphen_values = true)]
    pub target: Option<String>,
    /// CSV of instances to explain, optionally with a label column.
    #[arg(long)]
    pub targets: Option<String>,
    /// Weighted feature graph: a CSV matrix, builtin:two-cliques or dataset
    /// (correlations of the background dataset).
    #[arg(long)]
    pub graph: Option<String>,
    /// Binary adjacency CSV.
    #[arg(long)]
    pub adjacency: Option<String>,
    /// Partition CSV with node_id,community_id rows.
    #[arg(long)]
    pub partition: Option<String>,
    /// Edge threshold: a number, mean or -inf.
    #[arg(long, allow_hyphen_values = true)]
    pub threshold: Option<String>,
    #[arg(long)]
    pub mc_samples: Option<usize>,
    #[arg(long)]
    pub exact_cutoff: Option<usize>,
    /// plugin or single-draw.
    #[arg(long)]
    pub mc_mode: Option<String>,
    /// Background draws per marginal: a count or all.
    #[arg(long)]
    pub marginal_samples: Option<String>,
    /// Comma-separated feature indices to explain.
    #[arg(long)]
    pub features: Option<String>,
    /// Comma-separated group sizes used to normalize attributions.
    #[arg(long)]
    pub group_sizes: Option<String>,
    /// Comma-separated coverage fractions for corruption.
    #[arg(long)]
    pub coverage: Option<String>,
    /// Attribution CSV to corrupt with.
    #[arg(long)]
    pub attribution: Option<String>,
    /// Class whose probability is tracked; defaults to the predicted class.
    #[arg(long)]
    pub target_class: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub log_base: Option<f64>,
    #[arg(long)]
    pub prob_floor: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub oracle_timeout_ms: Option<u64>,
    /// Validation property to run; all when omitted.
    #[arg(long)]
    pub property: Option<String>,
    /// Largest player count in the identity scan.
    #[arg(long)]
    pub n: Option<usize>,

    /// Worker threads; defaults to available parallelism.
    #[arg(long)]
    #[serde(skip)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

macro_rules! merge_fields {
    ($dst:ident, $src:ident; $($f:ident),*) => {
        $( if $dst.$f.is_none() { $dst.$f = $src.$f.clone(); } )*
    };
}

impl RunConfig {
    /// Fills unset fields from the config file named by `--config`.
    pub fn with_file(mut self) -> Result<Self, CliError> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        let file: RunConfig = toml::from_str(&text).map_err(|e| {
            CliError::usage(format!("bad config {}: {}", path.display(), e.message()))
        })?;
        merge_fields!(self, file;
            method, oracle, dataset, target, targets, graph, adjacency, partition, threshold,
            mc_samples, exact_cutoff, mc_mode, marginal_samples, features, group_sizes, coverage,
            attribution, target_class, seed, log_base, prob_floor, batch_size, oracle_timeout_ms,
            property, n);
        Ok(self)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn write_resolved(&self, dir: &Path) -> Result<(), CliError> {
        let text = toml::to_string(self).map_err(|e| CliError::internal(e.to_string()))?;
        std::fs::write(dir.join("config.toml"), text).map_err(CliError::from_io)
    }
}

pub const DEFAULT_MC_SAMPLES: usize = 1000;
pub const DEFAULT_EXACT_CUTOFF: usize = 12;
pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_BATCH_SIZE: usize = 256;
pub const DEFAULT_TIMEOUT_MS: u64 = 60_000;
pub const DEFAULT_COVERAGE: &str = "0.9";
pub const DEFAULT_THRESHOLD: &str = "mean";
