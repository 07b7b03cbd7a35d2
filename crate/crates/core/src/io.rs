//! CSV readers and writers for datasets, graphs, partitions and attributions.
//!
//! Parse errors carry the 1-based line and column of the offending field.
//! Floats are written in their shortest round-trip form.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use csv::{ReaderBuilder, StringRecord};

use crate::data::{BackgroundDataset, Instance};
use crate::error::{Error, Result};
use crate::eval::PlotRow;
use crate::feature_set::FeatureSet;
use crate::game::{Attribution, Method};
use crate::graph::{BinaryAdjacency, CommunityPartition, FeatureGraph};

/// Name of the optional class-label column in dataset files.
pub const LABEL_COLUMN: &str = "label";

fn parse_error(path: &Path, line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        column,
        message: message.into(),
    }
}

fn line_of(rec: &StringRecord) -> usize {
    rec.position().map_or(0, |p| p.line() as usize)
}

fn field<T: FromStr>(path: &Path, rec: &StringRecord, col: usize) -> Result<T> {
    let raw = rec
        .get(col)
        .ok_or_else(|| parse_error(path, line_of(rec), col + 1, "missing field"))?;
    raw.trim()
        .parse()
        .map_err(|_| parse_error(path, line_of(rec), col + 1, format!("cannot parse `{raw}`")))
}

fn finite(path: &Path, rec: &StringRecord, col: usize) -> Result<f64> {
    let v: f64 = field(path, rec, col)?;
    if !v.is_finite() {
        return Err(parse_error(
            path,
            line_of(rec),
            col + 1,
            format!("value {v} is not finite"),
        ));
    }
    Ok(v)
}

fn records(path: &Path, headers: bool) -> Result<(Option<StringRecord>, Vec<StringRecord>)> {
    let mut rdr = ReaderBuilder::new()
        .has_headers(headers)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let header = if headers {
        Some(rdr.headers().map_err(|e| csv_error(path, e))?.clone())
    } else {
        None
    };
    let rows = rdr
        .records()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| csv_error(path, e))?;
    Ok((header, rows))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        kind => parse_error(path, line, 0, format!("{kind:?}")),
    }
}

fn check_width(path: &Path, rec: &StringRecord, expected: usize) -> Result<()> {
    if rec.len() != expected {
        return Err(parse_error(
            path,
            line_of(rec),
            rec.len().min(expected) + 1,
            format!("expected {expected} fields, found {}", rec.len()),
        ));
    }
    Ok(())
}

/// A dataset file: feature columns plus an optional integer label column.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelledDataset {
    pub data: BackgroundDataset,
    pub labels: Option<Vec<usize>>,
}

pub fn read_dataset(path: &Path) -> Result<LabelledDataset> {
    let (header, rows) = records(path, true)?;
    let header = header.expect("headers requested");
    let label_col = header.iter().position(|h| h == LABEL_COLUMN);
    let names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != label_col)
        .map(|(_, h)| h.to_string())
        .collect();
    if names.is_empty() {
        return Err(parse_error(path, 1, 1, "no feature columns"));
    }
    let mut instances = Vec::with_capacity(rows.len());
    let mut labels = Vec::new();
    for rec in &rows {
        check_width(path, rec, header.len())?;
        let mut values = Vec::with_capacity(names.len());
        for col in 0..header.len() {
            if Some(col) == label_col {
                labels.push(field::<usize>(path, rec, col)?);
            } else {
                values.push(finite(path, rec, col)?);
            }
        }
        instances.push(Instance::new(values)?);
    }
    if instances.is_empty() {
        return Err(parse_error(path, 2, 1, "dataset has no rows"));
    }
    Ok(LabelledDataset {
        data: BackgroundDataset::with_names(names, instances)?,
        labels: label_col.map(|_| labels),
    })
}

pub fn write_dataset(
    path: &Path,
    data: &BackgroundDataset,
    labels: Option<&[usize]>,
) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let mut header = data.feature_names().join(",");
    if labels.is_some() {
        header.push_str(",label");
    }
    writeln!(out, "{header}")?;
    for (i, x) in data.instances().iter().enumerate() {
        let mut line = join(x.values());
        if let Some(l) = labels {
            line.push_str(&format!(",{}", l[i]));
        }
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// A rectangular numeric table without header.
pub fn read_table(path: &Path) -> Result<Vec<Vec<f64>>> {
    let (_, rows) = records(path, false)?;
    let width = match rows.first() {
        Some(rec) => rec.len(),
        None => return Err(parse_error(path, 1, 1, "table is empty")),
    };
    rows.iter()
        .map(|rec| {
            check_width(path, rec, width)?;
            (0..width).map(|c| finite(path, rec, c)).collect()
        })
        .collect()
}

/// A square numeric matrix without header.
pub fn read_matrix(path: &Path) -> Result<Vec<Vec<f64>>> {
    let (_, rows) = records(path, false)?;
    let n = rows.len();
    if n == 0 {
        return Err(parse_error(path, 1, 1, "matrix is empty"));
    }
    rows.iter()
        .map(|rec| {
            check_width(path, rec, n)?;
            (0..n).map(|c| finite(path, rec, c)).collect()
        })
        .collect()
}

pub fn read_graph(path: &Path) -> Result<FeatureGraph> {
    FeatureGraph::from_matrix(read_matrix(path)?)
}

/// A square 0/1 matrix without header.
pub fn read_adjacency(path: &Path) -> Result<BinaryAdjacency> {
    let (_, rows) = records(path, false)?;
    let n = rows.len();
    if n == 0 {
        return Err(parse_error(path, 1, 1, "adjacency is empty"));
    }
    let bits = rows
        .iter()
        .map(|rec| {
            check_width(path, rec, n)?;
            (0..n)
                .map(|c| match field::<u8>(path, rec, c)? {
                    0 => Ok(false),
                    1 => Ok(true),
                    v => Err(parse_error(
                        path,
                        line_of(rec),
                        c + 1,
                        format!("expected 0 or 1, found {v}"),
                    )),
                })
                .collect()
        })
        .collect::<Result<Vec<Vec<bool>>>>()?;
    BinaryAdjacency::from_bits(bits)
}

pub fn write_matrix(path: &Path, rows: &[Vec<f64>]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for row in rows {
        writeln!(out, "{}", join(row))?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_adjacency(path: &Path, adj: &BinaryAdjacency) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for row in adj.rows() {
        let line: Vec<&str> = row.iter().map(|b| if *b { "1" } else { "0" }).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    out.flush()?;
    Ok(())
}

/// `node_id,community_id` rows covering every node exactly once.
pub fn read_partition(path: &Path) -> Result<CommunityPartition> {
    let (_, rows) = records(path, true)?;
    let mut labels: BTreeMap<usize, usize> = BTreeMap::new();
    for rec in &rows {
        check_width(path, rec, 2)?;
        let node: usize = field(path, rec, 0)?;
        let community: usize = field(path, rec, 1)?;
        if labels.insert(node, community).is_some() {
            return Err(parse_error(
                path,
                line_of(rec),
                1,
                format!("node {node} listed twice"),
            ));
        }
    }
    let n = labels.len();
    if let Some((&node, _)) = labels.iter().find(|(&k, _)| k >= n) {
        return Err(Error::InvalidPartition(format!(
            "node ids must be 0..{n}, found {node}"
        )));
    }
    if n == 0 {
        return Err(parse_error(path, 1, 1, "partition is empty"));
    }
    Ok(CommunityPartition::from_labels(
        &labels.into_values().collect::<Vec<_>>(),
    ))
}

pub fn write_partition(path: &Path, partition: &CommunityPartition) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "node_id,community_id")?;
    for (node, c) in partition.labels().iter().enumerate() {
        writeln!(out, "{node},{c}")?;
    }
    out.flush()?;
    Ok(())
}

/// `instance,feature_id,phi,method` rows for every computed feature.
pub fn write_attributions(path: &Path, attributions: &[Attribution]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "instance,feature_id,phi,method")?;
    for (i, a) in attributions.iter().enumerate() {
        for r in &a.computed {
            writeln!(out, "{i},{r},{},{}", a.phi[r], a.method)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads attributions of width `n_features`, one per instance id in
/// ascending order.
pub fn read_attributions(path: &Path, n_features: usize) -> Result<Vec<Attribution>> {
    let (_, rows) = records(path, true)?;
    let mut by_instance: BTreeMap<usize, Attribution> = BTreeMap::new();
    for rec in &rows {
        check_width(path, rec, 4)?;
        let instance: usize = field(path, rec, 0)?;
        let r: usize = field(path, rec, 1)?;
        let phi = finite(path, rec, 2)?;
        let method: Method = rec[3].parse().map_err(|_| {
            parse_error(
                path,
                line_of(rec),
                4,
                format!("unknown method `{}`", &rec[3]),
            )
        })?;
        if r >= n_features {
            return Err(parse_error(
                path,
                line_of(rec),
                2,
                format!("feature {r} out of range for {n_features} features"),
            ));
        }
        let a = by_instance.entry(instance).or_insert_with(|| {
            let mut a = Attribution::new(vec![0.0; n_features], method, 0);
            a.computed = FeatureSet::empty();
            a
        });
        if a.method != method {
            return Err(parse_error(
                path,
                line_of(rec),
                4,
                "mixed methods within one instance",
            ));
        }
        if a.computed.contains(r) {
            return Err(parse_error(
                path,
                line_of(rec),
                2,
                format!("feature {r} listed twice"),
            ));
        }
        a.phi[r] = phi;
        a.computed.insert(r);
    }
    if by_instance.is_empty() {
        return Err(parse_error(path, 1, 1, "no attribution rows"));
    }
    Ok(by_instance.into_values().collect())
}

/// `instance,feature_id,phi,normalized_phi,rank` rows.
pub fn write_plot_data(path: &Path, rows: &[Vec<PlotRow>]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "instance,feature_id,phi,normalized_phi,rank")?;
    for (i, inst) in rows.iter().enumerate() {
        for r in inst {
            writeln!(
                out,
                "{i},{},{},{},{}",
                r.feature_id, r.phi, r.normalized_phi, r.rank
            )?;
        }
    }
    out.flush()?;
    Ok(())
}
