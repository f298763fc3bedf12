//! CSV formats for networks, attributes, activation logs and thresholds.
//!
//! * edges: `src,dst`
//! * attributes: `node,f0,...,f{m-1}`
//! * activation log: `node,activation_time`
//! * thresholds: `node,threshold`
//!
//! Node tokens that all parse as non-negative integers are used as ids
//! directly. Otherwise tokens are mapped to dense ids in order of first
//! appearance, attribute rows first.

use std::collections::HashMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::ltm::DiffusionTrace;
use crate::network::{Graph, NodeId};

#[derive(Clone, Debug, PartialEq)]
pub enum NodeIndex {
    /// Tokens are the ids themselves; `count` nodes.
    Numeric { count: usize },
    Named { names: Vec<String>, lookup: HashMap<String, NodeId> },
}

impl NodeIndex {
    fn build<'a>(tokens: impl Iterator<Item = &'a str> + Clone) -> NodeIndex {
        let numeric: Option<Vec<usize>> = tokens.clone().map(|t| t.parse::<usize>().ok()).collect();
        match numeric {
            Some(ids) => NodeIndex::Numeric { count: ids.into_iter().max().map_or(0, |m| m + 1) },
            None => {
                let mut names = Vec::new();
                let mut lookup = HashMap::new();
                for t in tokens {
                    lookup.entry(t.to_string()).or_insert_with(|| {
                        names.push(t.to_string());
                        names.len() - 1
                    });
                }
                NodeIndex::Named { names, lookup }
            }
        }
    }

    pub fn len(&self) -> usize {
        match self {
            NodeIndex::Numeric { count } => *count,
            NodeIndex::Named { names, .. } => names.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, token: &str) -> Option<NodeId> {
        match self {
            NodeIndex::Numeric { count } => token.parse::<usize>().ok().filter(|id| id < count),
            NodeIndex::Named { lookup, .. } => lookup.get(token).copied(),
        }
    }

    /// External token for a dense id.
    pub fn name(&self, id: NodeId) -> String {
        match self {
            NodeIndex::Numeric { .. } => id.to_string(),
            NodeIndex::Named { names, .. } => names[id].clone(),
        }
    }
}

struct Row {
    line: u64,
    fields: Vec<String>,
}

fn read_rows(path: &Path, expected_header: &[&str], open_ended: bool) -> Result<Vec<Row>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let header = reader.headers().map_err(|e| Error::format(Some(1), e.to_string()))?.clone();
    let names: Vec<&str> = header.iter().collect();
    let header_ok = if open_ended {
        names.first() == expected_header.first()
            && names[1..].iter().enumerate().all(|(j, n)| *n == format!("f{j}"))
    } else {
        names == expected_header
    };
    if !header_ok {
        return Err(Error::format(
            Some(1),
            format!("{}: unexpected header `{}`", path.display(), names.join(",")),
        ));
    }
    let width = names.len();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            Error::format(e.position().map(|p| p.line()), format!("{}: {e}", path.display()))
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if record.len() != width {
            return Err(Error::format(
                Some(line),
                format!("{}: expected {width} fields, found {}", path.display(), record.len()),
            ));
        }
        rows.push(Row { line, fields: record.iter().map(str::to_string).collect() });
    }
    Ok(rows)
}

fn parse_f64(s: &str, line: u64, what: &str) -> Result<f64> {
    s.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| Error::format(Some(line), format!("invalid {what} `{s}`")))
}

/// Reads an edge CSV and an optional attribute CSV into a graph.
pub fn load_network(edges: &Path, attributes: Option<&Path>, directed: bool) -> Result<(Graph, NodeIndex)> {
    let edge_rows = read_rows(edges, &["src", "dst"], false)?;
    let attr_rows = match attributes {
        Some(p) => read_rows(p, &["node"], true)?,
        None => Vec::new(),
    };
    let tokens = attr_rows
        .iter()
        .map(|r| r.fields[0].as_str())
        .chain(edge_rows.iter().flat_map(|r| [r.fields[0].as_str(), r.fields[1].as_str()]));
    let index = NodeIndex::build(tokens);
    let n = index.len();

    let features = if attributes.is_some() {
        let m = attr_rows.first().map_or(0, |r| r.fields.len() - 1);
        let mut features: Vec<Option<Vec<f64>>> = vec![None; n];
        for row in &attr_rows {
            let id = index.get(&row.fields[0]).expect("indexed above");
            if features[id].is_some() {
                return Err(Error::format(Some(row.line), format!("duplicate attribute row for node `{}`", row.fields[0])));
            }
            let values = row.fields[1..]
                .iter()
                .map(|s| parse_f64(s, row.line, "attribute"))
                .collect::<Result<Vec<f64>>>()?;
            features[id] = Some(values);
        }
        let mut out = Vec::with_capacity(n);
        for (id, f) in features.into_iter().enumerate() {
            match f {
                Some(f) => out.push(f),
                None if m == 0 => out.push(Vec::new()),
                None => {
                    return Err(Error::format(None, format!("node `{}` has no attribute row", index.name(id))));
                }
            }
        }
        Some(out)
    } else {
        None
    };

    let pairs = edge_rows
        .iter()
        .map(|r| (index.get(&r.fields[0]).expect("indexed"), index.get(&r.fields[1]).expect("indexed")))
        .collect::<Vec<_>>();
    let graph = Graph::with_edges(n, pairs, directed, features)?;
    Ok((graph, index))
}

/// Reads an activation log into a trace over `index.len()` nodes.
///
/// Horizon is the largest activation time (0 for an empty log); nodes absent
/// from the log never activate.
pub fn load_activation_log(path: &Path, index: &NodeIndex) -> Result<DiffusionTrace> {
    let rows = read_rows(path, &["node", "activation_time"], false)?;
    let mut times: Vec<Option<usize>> = vec![None; index.len()];
    let mut horizon = 0;
    for row in &rows {
        let node = index
            .get(&row.fields[0])
            .ok_or_else(|| Error::format(Some(row.line), format!("unknown node `{}`", row.fields[0])))?;
        let t: i64 = row.fields[1]
            .parse()
            .map_err(|_| Error::format(Some(row.line), format!("invalid activation time `{}`", row.fields[1])))?;
        if t < 0 {
            return Err(Error::format(Some(row.line), format!("negative activation time {t}")));
        }
        if times[node].is_some() {
            return Err(Error::format(Some(row.line), format!("duplicate node `{}`", row.fields[0])));
        }
        times[node] = Some(t as usize);
        horizon = horizon.max(t as usize);
    }
    DiffusionTrace::from_activation_times(&times, horizon)
}

/// Reads `node,threshold`; every indexed node must appear exactly once.
pub fn load_thresholds(path: &Path, index: &NodeIndex) -> Result<Vec<f64>> {
    let rows = read_rows(path, &["node", "threshold"], false)?;
    let mut out: Vec<Option<f64>> = vec![None; index.len()];
    for row in &rows {
        let node = index
            .get(&row.fields[0])
            .ok_or_else(|| Error::format(Some(row.line), format!("unknown node `{}`", row.fields[0])))?;
        if out[node].is_some() {
            return Err(Error::format(Some(row.line), format!("duplicate node `{}`", row.fields[0])));
        }
        out[node] = Some(parse_f64(&row.fields[1], row.line, "threshold")?);
    }
    out.into_iter()
        .enumerate()
        .map(|(v, t)| t.ok_or_else(|| Error::format(None, format!("node `{}` has no threshold", index.name(v)))))
        .collect()
}

fn create(path: &Path) -> Result<std::io::BufWriter<File>> {
    File::create(path).map(std::io::BufWriter::new).map_err(|e| Error::io(path, e))
}

fn finish(path: &Path, w: impl FnOnce() -> std::io::Result<()>) -> Result<()> {
    w().map_err(|e| Error::io(path, e))
}

pub fn write_edge_csv(path: &Path, g: &Graph) -> Result<()> {
    let mut out = create(path)?;
    finish(path, || {
        writeln!(out, "src,dst")?;
        for (u, v) in g.edges() {
            writeln!(out, "{u},{v}")?;
        }
        out.flush()
    })
}

pub fn write_attribute_csv(path: &Path, features: &[Vec<f64>]) -> Result<()> {
    let m = features.first().map_or(0, Vec::len);
    let mut out = create(path)?;
    finish(path, || {
        write!(out, "node")?;
        for j in 0..m {
            write!(out, ",f{j}")?;
        }
        writeln!(out)?;
        for (v, row) in features.iter().enumerate() {
            write!(out, "{v}")?;
            for x in row {
                write!(out, ",{x}")?;
            }
            writeln!(out)?;
        }
        out.flush()
    })
}

pub fn write_activation_log(path: &Path, trace: &DiffusionTrace) -> Result<()> {
    let mut out = create(path)?;
    finish(path, || {
        writeln!(out, "node,activation_time")?;
        for (v, t) in trace.activation_times().iter().enumerate() {
            if let Some(t) = t {
                writeln!(out, "{v},{t}")?;
            }
        }
        out.flush()
    })
}

pub fn write_thresholds(path: &Path, thresholds: &[f64]) -> Result<()> {
    let mut out = create(path)?;
    finish(path, || {
        writeln!(out, "node,threshold")?;
        for (v, t) in thresholds.iter().enumerate() {
            writeln!(out, "{v},{t}")?;
        }
        out.flush()
    })
}
