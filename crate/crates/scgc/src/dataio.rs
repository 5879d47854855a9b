//! Dataset loading and saving, checkpoint files, and run-artifact writers.
//!
//! Formats are text so fixtures stay hand-inspectable:
//! - `features.tsv`: header line `n<TAB>d`, then n tab-separated rows
//! - `edges.txt`: one `i j` pair per line, 0-based, `#` starts a comment
//! - `labels.txt`: one integer label per line

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, ScgcError};
use crate::graph::{build_knn_graph_with, KnnMetric, SparseGraph};
use crate::inference::TrainedModel;
use crate::matrix::Matrix;
use crate::pipeline::RunHistory;

pub const FEATURES_FILE: &str = "features.tsv";
pub const EDGES_FILE: &str = "edges.txt";
pub const LABELS_FILE: &str = "labels.txt";

/// A loaded clustering problem: features, structure, optional ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub features: Matrix,
    pub graph: SparseGraph,
    pub labels: Option<Vec<usize>>,
    /// Distinct label count when labels are present, else 0.
    pub class_count: usize,
}

fn parse_err(file: &Path, line: usize, msg: impl Into<String>) -> ScgcError {
    ScgcError::Parse {
        file: file.display().to_string(),
        line,
        msg: msg.into(),
    }
}

/// Features from TSV with an `n d` header row.
pub fn read_features_tsv(path: &Path) -> Result<Matrix> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (header_no, header) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "empty features file"))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| parse_err(path, header_no + 1, format!("bad header: {e}")))?;
    if dims.len() != 2 {
        return Err(parse_err(path, header_no + 1, "header must be `n d`"));
    }
    let (n, d) = (dims[0], dims[1]);
    let mut data = Vec::with_capacity(n * d);
    let mut rows = 0usize;
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let mut count = 0usize;
        for token in line.split_whitespace() {
            let v: f64 = token
                .parse()
                .map_err(|e| parse_err(path, idx + 1, format!("bad value `{token}`: {e}")))?;
            data.push(v);
            count += 1;
        }
        if count != d {
            return Err(parse_err(
                path,
                idx + 1,
                format!("expected {d} values, got {count}"),
            ));
        }
        rows += 1;
    }
    if rows != n {
        return Err(parse_err(
            path,
            1,
            format!("header says {n} rows, file has {rows}"),
        ));
    }
    Matrix::from_vec(n, d, data)
}

pub fn write_features_tsv(path: &Path, features: &Matrix) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("{}\t{}\n", features.rows(), features.cols()));
    for i in 0..features.rows() {
        let row: Vec<String> = features.row(i).iter().map(|v| format!("{v}")).collect();
        out.push_str(&row.join("\t"));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Edge list with 0-based indices; index bounds are checked against `n` so
/// errors can name the offending line.
pub fn read_edge_list(path: &Path, n: usize) -> Result<Vec<(usize, usize)>> {
    let text = fs::read_to_string(path)?;
    let mut edges = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 2 {
            return Err(parse_err(path, idx + 1, "expected two indices per line"));
        }
        let parse = |t: &str| -> Result<usize> {
            t.parse()
                .map_err(|e| parse_err(path, idx + 1, format!("bad index `{t}`: {e}")))
        };
        let (i, j) = (parse(tokens[0])?, parse(tokens[1])?);
        if i >= n || j >= n {
            return Err(parse_err(
                path,
                idx + 1,
                format!("index out of range for {n} nodes"),
            ));
        }
        if i == j {
            return Err(parse_err(path, idx + 1, format!("self-loop at node {i}")));
        }
        edges.push((i, j));
    }
    Ok(edges)
}

pub fn write_edge_list(path: &Path, graph: &SparseGraph) -> Result<()> {
    let mut out = String::from("# i j\n");
    for (i, j) in graph.edges() {
        out.push_str(&format!("{i} {j}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path)?;
    let mut labels = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        labels.push(
            line.parse()
                .map_err(|e| parse_err(path, idx + 1, format!("bad label `{line}`: {e}")))?,
        );
    }
    Ok(labels)
}

pub fn write_labels(path: &Path, labels: &[usize]) -> Result<()> {
    let mut out = String::new();
    for l in labels {
        out.push_str(&format!("{l}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Load a dataset directory. Structure comes from `edges.txt` when present,
/// or is built as a KNN graph from features when `knn_k` is given; having
/// both is ambiguous and rejected.
pub fn load_dataset(dir: &Path, knn_k: Option<usize>) -> Result<Dataset> {
    load_dataset_with(dir, knn_k, KnnMetric::Euclidean)
}

pub fn load_dataset_with(dir: &Path, knn_k: Option<usize>, metric: KnnMetric) -> Result<Dataset> {
    let features = read_features_tsv(&dir.join(FEATURES_FILE))?;
    let n = features.rows();

    let edges_path = dir.join(EDGES_FILE);
    let graph = match (edges_path.exists(), knn_k) {
        (true, Some(_)) => {
            return Err(ScgcError::InvalidInput(format!(
                "both {EDGES_FILE} and a KNN neighbor count were given; structure source is ambiguous"
            )));
        }
        (true, None) => SparseGraph::from_edges(n, read_edge_list(&edges_path, n)?)?,
        (false, Some(k)) => build_knn_graph_with(&features, k, metric)?,
        (false, None) => {
            return Err(ScgcError::InvalidInput(format!(
                "no {EDGES_FILE} in {} and no KNN neighbor count given",
                dir.display()
            )));
        }
    };

    let labels_path = dir.join(LABELS_FILE);
    let labels = if labels_path.exists() {
        let labels = read_labels(&labels_path)?;
        if labels.len() != n {
            return Err(ScgcError::InvalidInput(format!(
                "{} labels for {n} nodes",
                labels.len()
            )));
        }
        Some(labels)
    } else {
        None
    };
    let class_count = labels
        .as_ref()
        .and_then(|l| l.iter().max().map(|&m| m + 1))
        .unwrap_or(0);

    let name = dir
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    Ok(Dataset {
        name,
        features,
        graph,
        labels,
        class_count,
    })
}

/// Features and labels only, for evaluation: no structure source is
/// required or read.
pub fn load_features_and_labels(dir: &Path) -> Result<(Matrix, Option<Vec<usize>>)> {
    let features = read_features_tsv(&dir.join(FEATURES_FILE))?;
    let labels_path = dir.join(LABELS_FILE);
    let labels = if labels_path.exists() {
        let labels = read_labels(&labels_path)?;
        if labels.len() != features.rows() {
            return Err(ScgcError::InvalidInput(format!(
                "{} labels for {} nodes",
                labels.len(),
                features.rows()
            )));
        }
        Some(labels)
    } else {
        None
    };
    Ok((features, labels))
}

pub fn save_dataset(dir: &Path, dataset: &Dataset) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_features_tsv(&dir.join(FEATURES_FILE), &dataset.features)?;
    write_edge_list(&dir.join(EDGES_FILE), &dataset.graph)?;
    if let Some(labels) = &dataset.labels {
        write_labels(&dir.join(LABELS_FILE), labels)?;
    }
    Ok(())
}

/// Current checkpoint format number.
pub const CHECKPOINT_FORMAT: u32 = 1;

/// Self-describing JSON checkpoint: format number, the seed the run was
/// initialized with, explicit dims, and the full model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: u32,
    pub seed: u64,
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub embed_dim: usize,
    pub model: TrainedModel,
}

impl Checkpoint {
    pub fn new(seed: u64, model: TrainedModel) -> Self {
        let enc = &model.params.encoder;
        let input_dim = enc[0].w.rows();
        let hidden_dims = enc[..enc.len() - 1].iter().map(|l| l.w.cols()).collect();
        let embed_dim = model.params.embed_dim();
        Self {
            format: CHECKPOINT_FORMAT,
            seed,
            input_dim,
            hidden_dims,
            embed_dim,
            model,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string(self)?;
        fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let text = fs::read_to_string(path)?;
        let checkpoint: Checkpoint = serde_json::from_str(&text)?;
        if checkpoint.format != CHECKPOINT_FORMAT {
            return Err(ScgcError::InvalidInput(format!(
                "unsupported checkpoint format {} (expected {CHECKPOINT_FORMAT})",
                checkpoint.format
            )));
        }
        checkpoint.model.params.validate()?;
        Ok(checkpoint)
    }
}

/// Node embeddings as TSV, one row per node.
pub fn write_embeddings_tsv(path: &Path, embeddings: &Matrix) -> Result<()> {
    let mut out = String::new();
    for i in 0..embeddings.rows() {
        let row: Vec<String> = embeddings.row(i).iter().map(|v| format!("{v}")).collect();
        out.push_str(&row.join("\t"));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Training history as line-delimited JSON, one epoch per line.
pub fn write_history_jsonl(path: &Path, history: &RunHistory) -> Result<()> {
    let mut file = fs::File::create(path)?;
    for record in &history.epochs {
        serde_json::to_writer(&mut file, record)?;
        file.write_all(b"\n")?;
    }
    Ok(())
}
