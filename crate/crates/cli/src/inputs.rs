//! Parsing of oracle, dataset, graph and list arguments.

use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use graphsve::fixtures::{binary_domain, planted_blocks, planted_correlation_dataset, two_cliques};
use graphsve::graph::correlation_graph;
use graphsve::io::{read_dataset, read_graph, read_table, LabelledDataset};
use graphsve::oracle::{LinearSoftmax, OrGate, SubprocessOracle};
use graphsve::{
    BackgroundDataset, FeatureGraph, FeatureSet, Instance, MarginalSamples, PredictionOracle,
};

use crate::CliError;

/// Block size of the `builtin:planted` oracle and its domain.
pub const PLANTED_BLOCK: usize = 3;
pub const PLANTED_SEED: u64 = 0;
pub const PLANTED_CORR_ROWS: usize = 10_000;
pub const PLANTED_CORR_RHO: f64 = 0.8;
pub const TWO_CLIQUE_SIZE: usize = 5;

pub fn require<'a>(value: &'a Option<String>, flag: &str) -> Result<&'a str, CliError> {
    value
        .as_deref()
        .ok_or_else(|| CliError::usage(format!("--{flag} is required")))
}

pub fn oracle(arg: &str, timeout_ms: u64) -> Result<Arc<dyn PredictionOracle>, CliError> {
    if let Some(cmd) = arg.strip_prefix("exec:") {
        let argv: Vec<String> = cmd.split_whitespace().map(String::from).collect();
        if argv.is_empty() {
            return Err(CliError::usage("exec: oracle needs a command"));
        }
        return Ok(Arc::new(SubprocessOracle::spawn(&argv, timeout_ms, None)?));
    }
    if let Some(path) = arg.strip_prefix("builtin:linear=") {
        let rows = read_table(Path::new(path))?;
        let mut weights = Vec::with_capacity(rows.len());
        let mut bias = Vec::with_capacity(rows.len());
        for mut row in rows {
            let b = row
                .pop()
                .ok_or_else(|| CliError::usage(format!("{path}: empty weight row")))?;
            bias.push(b);
            weights.push(row);
        }
        return Ok(Arc::new(LinearSoftmax::new(weights, bias)?));
    }
    match arg {
        "builtin:or" => Ok(Arc::new(OrGate)),
        "builtin:planted" => Ok(planted_blocks(PLANTED_BLOCK, PLANTED_SEED).oracle),
        other => Err(CliError::usage(format!(
            "unknown oracle `{other}`; expected builtin:or, builtin:planted, builtin:linear=<csv> or exec:<command>"
        ))),
    }
}

pub fn dataset(arg: &str) -> Result<LabelledDataset, CliError> {
    let data = match arg {
        "builtin:or-domain" => binary_domain(2),
        "builtin:planted-domain" => binary_domain(2 * PLANTED_BLOCK),
        "builtin:planted-corr" => {
            planted_correlation_dataset(PLANTED_CORR_ROWS, PLANTED_CORR_RHO, 0)?
        }
        path if path.starts_with("builtin:") => {
            return Err(CliError::usage(format!("unknown dataset `{path}`")));
        }
        path => return Ok(read_dataset(Path::new(path))?),
    };
    Ok(LabelledDataset { data, labels: None })
}

/// A graph from a matrix CSV, `builtin:two-cliques`, or `dataset` for the
/// correlation graph of `data`.
pub fn graph(arg: &str, data: Option<&BackgroundDataset>) -> Result<FeatureGraph, CliError> {
    match arg {
        "builtin:two-cliques" => Ok(two_cliques(TWO_CLIQUE_SIZE)),
        "dataset" => {
            let data = data.ok_or_else(|| CliError::usage("--graph dataset needs --dataset"))?;
            Ok(correlation_graph(data)?)
        }
        path if path.starts_with("builtin:") => {
            Err(CliError::usage(format!("unknown graph `{path}`")))
        }
        path => Ok(read_graph(Path::new(path))?),
    }
}

/// `mean` gives `None`; `-inf` keeps every off-diagonal pair.
pub fn threshold(arg: &str) -> Result<Option<f64>, CliError> {
    match arg {
        "mean" => Ok(None),
        "-inf" => Ok(Some(f64::NEG_INFINITY)),
        s => s
            .parse::<f64>()
            .ok()
            .filter(|t| !t.is_nan())
            .map(Some)
            .ok_or_else(|| {
                CliError::usage(format!(
                    "bad threshold `{s}`; expected a number, mean or -inf"
                ))
            }),
    }
}

pub fn marginal_samples(arg: &str) -> Result<MarginalSamples, CliError> {
    match arg {
        "all" => Ok(MarginalSamples::All),
        s => match s.parse::<usize>() {
            Ok(k) if k > 0 => Ok(MarginalSamples::Count(k)),
            _ => Err(CliError::usage(format!("bad marginal sample count `{s}`"))),
        },
    }
}

pub fn list<T: FromStr>(arg: &str, what: &str) -> Result<Vec<T>, CliError> {
    arg.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| CliError::usage(format!("bad {what} `{}` in `{arg}`", s.trim())))
        })
        .collect()
}

pub fn features(arg: &str) -> Result<FeatureSet, CliError> {
    Ok(list::<usize>(arg, "feature index")?.into_iter().collect())
}

/// Instances to explain with their labels when known.
pub struct Targets {
    pub instances: Vec<Instance>,
    pub labels: Option<Vec<usize>>,
}

pub fn targets(target: &Option<String>, targets: &Option<String>) -> Result<Targets, CliError> {
    match (target, targets) {
        (Some(_), Some(_)) => Err(CliError::usage(
            "give either --target or --targets, not both",
        )),
        (Some(t), None) => {
            let values = list::<f64>(t, "target value")?;
            Ok(Targets {
                instances: vec![Instance::new(values)?],
                labels: None,
            })
        }
        (None, Some(path)) => {
            let d = dataset(path)?;
            Ok(Targets {
                instances: d.data.instances().to_vec(),
                labels: d.labels,
            })
        }
        (None, None) => Err(CliError::usage("--target or --targets is required")),
    }
}
