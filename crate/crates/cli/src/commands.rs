//! Subcommand implementations.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use graphsve::eval::{corruption_study, normalize, plot_rows, ranking, CorruptionCase};
use graphsve::graph::{binarize, detect_communities_binary, greedy_modularity};
use graphsve::io::{
    read_adjacency, read_attributions, read_partition, write_adjacency, write_attributions,
    write_matrix, write_partition, write_plot_data,
};
use graphsve::validation::{run_all, run_property, ValidateOptions, PROPERTIES};
use graphsve::{
    explain_with_stats, BackgroundDataset, BinaryAdjacency, CommunityPartition, ExplainRequest,
    FeatureGraph, GameConfig, McMode, PredictionOracle, SveMethod, SveOptions,
};

use crate::config::*;
use crate::inputs::{self, require, Targets};
use crate::{CliError, ErrorClass};

type Result<T> = std::result::Result<T, CliError>;

fn usage_parse<T: std::str::FromStr<Err = graphsve::Error>>(s: &str) -> Result<T> {
    s.parse()
        .map_err(|e: graphsve::Error| CliError::usage(e.to_string()))
}

fn prepare_out(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.out_dir();
    fs::create_dir_all(&dir).map_err(CliError::from_io)?;
    Ok(dir)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(CliError::from_io)
}

fn set_default<T>(slot: &mut Option<T>, value: T) {
    if slot.is_none() {
        *slot = Some(value);
    }
}

/// Fills defaults of the options that shape the coalition game.
fn resolve_game(cfg: &mut RunConfig) {
    set_default(&mut cfg.seed, DEFAULT_SEED);
    set_default(&mut cfg.marginal_samples, "all".into());
    set_default(&mut cfg.log_base, 2.0);
    set_default(&mut cfg.prob_floor, 1e-12);
    set_default(&mut cfg.batch_size, DEFAULT_BATCH_SIZE);
    set_default(&mut cfg.oracle_timeout_ms, DEFAULT_TIMEOUT_MS);
}

fn game_config(
    cfg: &RunConfig,
    target: graphsve::Instance,
    background: Arc<BackgroundDataset>,
) -> Result<GameConfig> {
    let mut game = GameConfig::new(target, background);
    game.marginal_samples =
        inputs::marginal_samples(cfg.marginal_samples.as_deref().unwrap_or("all"))?;
    game.log_base = cfg.log_base.unwrap_or(2.0);
    game.prob_floor = cfg.prob_floor.unwrap_or(1e-12);
    game.seed = cfg.seed.unwrap_or(DEFAULT_SEED);
    game.batch_size = cfg.batch_size.unwrap_or(DEFAULT_BATCH_SIZE);
    game.validate()?;
    Ok(game)
}

struct Loaded {
    oracle: Arc<dyn PredictionOracle>,
    background: Arc<BackgroundDataset>,
    targets: Targets,
}

fn load_common(cfg: &RunConfig) -> Result<Loaded> {
    let background = inputs::dataset(require(&cfg.dataset, "dataset")?)?.data;
    let targets = inputs::targets(&cfg.target, &cfg.targets)?;
    let oracle = inputs::oracle(
        require(&cfg.oracle, "oracle")?,
        cfg.oracle_timeout_ms.unwrap_or(DEFAULT_TIMEOUT_MS),
    )?;
    Ok(Loaded {
        oracle,
        background: Arc::new(background),
        targets,
    })
}

fn load_graph(cfg: &RunConfig, data: Option<&BackgroundDataset>) -> Result<Option<FeatureGraph>> {
    cfg.graph
        .as_deref()
        .map(|g| inputs::graph(g, data))
        .transpose()
}

pub fn explain(mut cfg: RunConfig) -> Result<()> {
    set_default(&mut cfg.method, "full".into());
    set_default(&mut cfg.mc_samples, DEFAULT_MC_SAMPLES);
    set_default(&mut cfg.exact_cutoff, DEFAULT_EXACT_CUTOFF);
    set_default(&mut cfg.mc_mode, McMode::Plugin.as_str().into());
    resolve_game(&mut cfg);
    if cfg.graph.is_some() {
        set_default(&mut cfg.threshold, DEFAULT_THRESHOLD.into());
    }

    let method: SveMethod = usage_parse(cfg.method.as_deref().unwrap_or_default())?;
    let mut req = ExplainRequest::new(method);
    req.options = SveOptions {
        mc_samples: cfg.mc_samples.unwrap_or(DEFAULT_MC_SAMPLES),
        exact_cutoff: cfg.exact_cutoff.unwrap_or(DEFAULT_EXACT_CUTOFF),
        seed: cfg.seed.unwrap_or(DEFAULT_SEED),
        features: cfg.features.as_deref().map(inputs::features).transpose()?,
        mc_mode: usage_parse(cfg.mc_mode.as_deref().unwrap_or_default())?,
        allow_mc: true,
    };

    let loaded = load_common(&cfg)?;
    let graph = load_graph(&cfg, Some(&loaded.background))?;
    match method {
        SveMethod::Csve => req.adjacency = adjacency_for(&cfg, graph.as_ref())?,
        SveMethod::Hsve => req.partition = partition_for(&cfg, graph.as_ref())?,
        SveMethod::Full | SveMethod::Single => {}
    }
    let n = loaded.oracle.n_features();
    req.validate(n)?;
    let group_sizes = match cfg.group_sizes.as_deref() {
        Some(s) => inputs::list::<usize>(s, "group size")?,
        None => vec![1; n],
    };

    let out = prepare_out(&cfg)?;
    let started = Instant::now();
    let mut attributions = Vec::new();
    let mut plots = Vec::new();
    let mut log = String::new();
    for (i, target) in loaded.targets.instances.iter().enumerate() {
        let game = game_config(&cfg, target.clone(), loaded.background.clone())?;
        let (a, stats) = explain_with_stats(loaded.oracle.clone(), game, &req)?;
        let norm = normalize(&a, &group_sizes)?;
        if norm.max_skipped {
            log::warn!("instance {i}: no positive attribution, normalized by group size only");
        }
        writeln!(
            log,
            "instance {i}: method={} value_calls={} marginals={} predictions={}",
            a.method, a.value_calls, stats.marginals, stats.predictions
        )
        .expect("string write");
        plots.push(plot_rows(&a, &norm.attribution));
        attributions.push(a);
    }
    let elapsed = started.elapsed();
    writeln!(log, "instances: {}", attributions.len()).expect("string write");
    writeln!(log, "wall_time_ms: {}", elapsed.as_millis()).expect("string write");
    writeln!(log, "threads: {}", rayon::current_num_threads()).expect("string write");

    write_attributions(&out.join("attribution.csv"), &attributions)?;
    write_plot_data(&out.join("normalized.csv"), &plots)?;
    cfg.write_resolved(&out)?;
    write_text(&out.join("run_log.txt"), &log)?;
    Ok(())
}

fn adjacency_for(cfg: &RunConfig, graph: Option<&FeatureGraph>) -> Result<Option<BinaryAdjacency>> {
    if let Some(path) = &cfg.adjacency {
        return Ok(Some(read_adjacency(Path::new(path))?));
    }
    graph
        .map(|g| {
            Ok(binarize(
                g,
                inputs::threshold(cfg.threshold.as_deref().unwrap_or(DEFAULT_THRESHOLD))?,
            ))
        })
        .transpose()
}

fn partition_for(
    cfg: &RunConfig,
    graph: Option<&FeatureGraph>,
) -> Result<Option<CommunityPartition>> {
    if let Some(path) = &cfg.partition {
        return Ok(Some(read_partition(Path::new(path))?));
    }
    if let Some(g) = graph {
        return Ok(Some(greedy_modularity(g).0));
    }
    if let Some(path) = &cfg.adjacency {
        return Ok(Some(detect_communities_binary(&read_adjacency(
            Path::new(path),
        )?)));
    }
    Ok(None)
}

/// Weighted graph from `--graph`, else the correlation graph of `--dataset`.
fn graph_input(cfg: &RunConfig) -> Result<FeatureGraph> {
    match (&cfg.graph, &cfg.dataset) {
        (Some(g), _) if g != "dataset" => inputs::graph(g, None),
        (_, Some(d)) => inputs::graph("dataset", Some(&inputs::dataset(d)?.data)),
        _ => Err(CliError::usage("--graph or --dataset is required")),
    }
}

pub fn graph(mut cfg: RunConfig) -> Result<()> {
    set_default(&mut cfg.threshold, DEFAULT_THRESHOLD.into());
    let g = graph_input(&cfg)?;
    let adj = binarize(
        &g,
        inputs::threshold(cfg.threshold.as_deref().unwrap_or_default())?,
    );
    let out = prepare_out(&cfg)?;
    write_matrix(&out.join("weights.csv"), &g.rows())?;
    write_adjacency(&out.join("adjacency.csv"), &adj)?;
    let summary = format!(
        "n,edges,threshold_used\n{},{},{}\n",
        g.n(),
        adj.edge_count(),
        adj.threshold_used()
    );
    write_text(&out.join("graph_summary.csv"), &summary)?;
    cfg.write_resolved(&out)?;
    println!(
        "{} features, {} edges, threshold_used {}",
        g.n(),
        adj.edge_count(),
        adj.threshold_used()
    );
    Ok(())
}

pub fn communities(cfg: RunConfig) -> Result<()> {
    let g = match &cfg.adjacency {
        Some(path) => FeatureGraph::from_adjacency(&read_adjacency(Path::new(path))?),
        None => graph_input(&cfg)?,
    };
    let (partition, trace) = greedy_modularity(&g);
    let out = prepare_out(&cfg)?;
    write_partition(&out.join("partition.csv"), &partition)?;
    let mut merges = String::from("step,into,from,gain,modularity\n");
    for (k, m) in trace.merges.iter().enumerate() {
        writeln!(
            merges,
            "{k},{},{},{},{}",
            m.into, m.from, m.gain, m.modularity
        )
        .expect("string write");
    }
    write_text(&out.join("merges.csv"), &merges)?;
    let summary = format!(
        "communities,modularity,initial_modularity\n{},{},{}\n",
        partition.len(),
        trace.modularity,
        trace.initial_modularity
    );
    write_text(&out.join("communities_summary.csv"), &summary)?;
    cfg.write_resolved(&out)?;
    println!(
        "{} communities, modularity {}",
        partition.len(),
        trace.modularity
    );
    Ok(())
}

fn argmax_class(oracle: &dyn PredictionOracle, cfg: &GameConfig) -> Result<usize> {
    Ok(ranking(&oracle.predict(&cfg.target)?)[0])
}

pub fn corrupt(mut cfg: RunConfig) -> Result<()> {
    set_default(&mut cfg.coverage, DEFAULT_COVERAGE.into());
    resolve_game(&mut cfg);
    let mut coverages =
        inputs::list::<f64>(cfg.coverage.as_deref().unwrap_or_default(), "coverage")?;
    if coverages.iter().any(|c| !(*c > 0.0 && *c <= 1.0)) {
        return Err(CliError::usage("coverage fractions must lie in (0, 1]"));
    }
    coverages.sort_by(f64::total_cmp);
    coverages.dedup();

    let loaded = load_common(&cfg)?;
    let n = loaded.oracle.n_features();
    let attributions = read_attributions(Path::new(require(&cfg.attribution, "attribution")?), n)?;
    if attributions.len() != loaded.targets.instances.len() {
        return Err(CliError::new(
            ErrorClass::Input,
            format!(
                "{} attributions for {} target instances",
                attributions.len(),
                loaded.targets.instances.len()
            ),
        ));
    }
    let mut cases = Vec::with_capacity(attributions.len());
    for (i, (target, attribution)) in loaded
        .targets
        .instances
        .iter()
        .zip(attributions)
        .enumerate()
    {
        let game = game_config(&cfg, target.clone(), loaded.background.clone())?;
        let target_class = match cfg.target_class {
            Some(c) => c,
            None => argmax_class(loaded.oracle.as_ref(), &game)?,
        };
        cases.push(CorruptionCase {
            cfg: game,
            attribution,
            target_class,
            label: loaded.targets.labels.as_ref().map(|l| l[i]),
        });
    }

    let studies = coverages
        .iter()
        .map(|&c| corruption_study(loaded.oracle.as_ref(), &cases, c))
        .collect::<graphsve::Result<Vec<_>>>()?;

    let fmt_opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut rows = String::from(
        "instance,coverage,target_class,corrupted,prob_before,prob_after,delta_prob,delta_acc\n",
    );
    for (c, study) in coverages.iter().zip(&studies) {
        for (i, r) in study.reports.iter().enumerate() {
            let prefix: Vec<String> = r.ranked_prefix.iter().map(usize::to_string).collect();
            writeln!(
                rows,
                "{i},{c},{},{},{},{},{},{}",
                r.target_class,
                prefix.join(" "),
                r.prob_before,
                r.prob_after,
                r.delta_prob,
                fmt_opt(r.delta_acc)
            )
            .expect("string write");
        }
    }

    let mut all_nested = true;
    let mut summary =
        String::from("coverage,mean_delta_prob,std_delta_prob,delta_acc,nested_in_next\n");
    for (k, (c, study)) in coverages.iter().zip(&studies).enumerate() {
        let nested = studies.get(k + 1).map(|next| {
            study
                .reports
                .iter()
                .zip(&next.reports)
                .all(|(a, b)| a.corrupted_features.is_subset(&b.corrupted_features))
        });
        all_nested &= nested.unwrap_or(true);
        writeln!(
            summary,
            "{c},{},{},{},{}",
            study.mean_delta_prob,
            study.std_delta_prob,
            fmt_opt(study.delta_acc),
            nested.map(|b| b.to_string()).unwrap_or_default()
        )
        .expect("string write");
        println!(
            "coverage {c}: mean delta_prob {} (std {})",
            study.mean_delta_prob, study.std_delta_prob
        );
    }
    println!("prefixes nested: {all_nested}");

    let out = prepare_out(&cfg)?;
    write_text(&out.join("corruption.csv"), &rows)?;
    write_text(&out.join("corruption_summary.csv"), &summary)?;
    cfg.write_resolved(&out)?;
    if !all_nested {
        return Err(CliError::new(
            ErrorClass::Validation,
            "coverage prefixes are not nested",
        ));
    }
    Ok(())
}

pub fn validate(mut cfg: RunConfig) -> Result<()> {
    set_default(&mut cfg.seed, DEFAULT_SEED);
    set_default(&mut cfg.n, ValidateOptions::default().identity_n);
    let opts = ValidateOptions {
        identity_n: cfg.n.unwrap_or_default(),
        seed: cfg.seed.unwrap_or_default(),
    };
    let outcomes = match cfg.property.as_deref() {
        None | Some("all") => run_all(&opts)?,
        Some(p) if PROPERTIES.contains(&p) => vec![run_property(p, &opts)?],
        Some(p) => {
            return Err(CliError::usage(format!(
                "unknown property `{p}`; expected one of {}",
                PROPERTIES.join(", ")
            )))
        }
    };
    let mut failed = 0;
    let mut report = String::from("property,passed,residual,detail\n");
    for o in &outcomes {
        let status = if o.passed { "PASS" } else { "FAIL" };
        println!("{status} {} residual={:e} {}", o.name, o.residual, o.detail);
        writeln!(
            report,
            "{},{},{},\"{}\"",
            o.name,
            o.passed,
            o.residual,
            o.detail.replace('"', "'")
        )
        .expect("string write");
        failed += usize::from(!o.passed);
    }
    if cfg.out.is_some() {
        let out = prepare_out(&cfg)?;
        write_text(&out.join("validation.csv"), &report)?;
        cfg.write_resolved(&out)?;
    }
    if failed > 0 {
        return Err(CliError::new(
            ErrorClass::Validation,
            format!("{failed} of {} properties failed", outcomes.len()),
        ));
    }
    Ok(())
}
