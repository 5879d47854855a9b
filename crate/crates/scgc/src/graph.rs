//! Graph structure: sparse undirected adjacency, symmetric normalization,
//! multi-hop influence matrices, KNN construction, and a stochastic block
//! model generator for fixtures.

use std::collections::BTreeSet;

use crate::error::{Result, ScgcError};
use crate::matrix::{matmul, Matrix};
use crate::rng::RngState;

/// Undirected graph as a node count plus a canonical edge set (i < j).
/// No self-loops; the self-connection is added only during normalization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseGraph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl SparseGraph {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            edges: BTreeSet::new(),
        }
    }

    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut g = Self::new(n);
        for (i, j) in edges {
            g.add_edge(i, j)?;
        }
        Ok(g)
    }

    /// Insert an undirected edge. Rejects self-loops and out-of-range nodes;
    /// duplicates are a no-op.
    pub fn add_edge(&mut self, i: usize, j: usize) -> Result<()> {
        if i == j {
            return Err(ScgcError::InvalidInput(format!("self-loop at node {i}")));
        }
        if i >= self.n || j >= self.n {
            return Err(ScgcError::InvalidInput(format!(
                "edge ({i}, {j}) out of range for {} nodes",
                self.n
            )));
        }
        self.edges.insert((i.min(j), i.max(j)));
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&(i.min(j), i.max(j)))
    }

    /// Edges in canonical (i < j) order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0usize; self.n];
        for &(i, j) in &self.edges {
            d[i] += 1;
            d[j] += 1;
        }
        d
    }

    pub fn to_dense_adjacency(&self) -> Matrix {
        let mut a = Matrix::zeros(self.n, self.n);
        for &(i, j) in &self.edges {
            a.set(i, j, 1.0);
            a.set(j, i, 1.0);
        }
        a
    }
}

/// Symmetrically normalized adjacency with self-connections:
/// D^{-1/2} (A + I) D^{-1/2}, where D is the degree matrix of A + I.
/// Isolated nodes get degree 1 from the self-connection, so this never
/// divides by zero.
pub fn normalize_adjacency(g: &SparseGraph) -> Matrix {
    let n = g.node_count();
    let mut deg = vec![1.0f64; n]; // self-connection
    for (i, j) in g.edges() {
        deg[i] += 1.0;
        deg[j] += 1.0;
    }
    let inv_sqrt: Vec<f64> = deg.iter().map(|d| 1.0 / d.sqrt()).collect();
    let mut a_hat = Matrix::zeros(n, n);
    for i in 0..n {
        a_hat.set(i, i, inv_sqrt[i] * inv_sqrt[i]);
    }
    for (i, j) in g.edges() {
        let v = inv_sqrt[i] * inv_sqrt[j];
        a_hat.set(i, j, v);
        a_hat.set(j, i, v);
    }
    a_hat
}

/// How the influence weights were formed from powers of the normalized
/// adjacency.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InfluenceMode {
    /// Sum of all powers 1..=R: multi-hop contributions accumulate.
    Cumulative,
    /// A single power r: only the exact r-hop relationship.
    SinglePower,
}

/// Dense pairwise influence weights derived from the normalized adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceMatrix {
    n: usize,
    gamma: Matrix,
    hops: usize,
    mode: InfluenceMode,
}

impl InfluenceMatrix {
    /// Wrap explicit influence weights, e.g. a custom scheme. Weights must
    /// be square with non-negative entries.
    pub fn from_gamma(gamma: Matrix, hops: usize, mode: InfluenceMode) -> Result<Self> {
        if gamma.rows() != gamma.cols() {
            return Err(ScgcError::DimMismatch {
                op: "InfluenceMatrix::from_gamma",
                lhs: format!("{}x{}", gamma.rows(), gamma.cols()),
                rhs: "square".into(),
            });
        }
        if gamma.data().iter().any(|&v| v < 0.0) {
            return Err(ScgcError::InvalidInput("negative influence weight".into()));
        }
        Ok(Self {
            n: gamma.rows(),
            gamma,
            hops,
            mode,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn gamma(&self) -> &Matrix {
        &self.gamma
    }

    pub fn hops(&self) -> usize {
        self.hops
    }

    pub fn mode(&self) -> InfluenceMode {
        self.mode
    }

    /// B x B sub-block for a batch of node indices, preserving mode and hops.
    pub fn slice(&self, idx: &[usize]) -> InfluenceMatrix {
        let b = idx.len();
        let mut gamma = Matrix::zeros(b, b);
        for (r, &i) in idx.iter().enumerate() {
            for (c, &j) in idx.iter().enumerate() {
                gamma.set(r, c, self.gamma.get(i, j));
            }
        }
        InfluenceMatrix {
            n: b,
            gamma,
            hops: self.hops,
            mode: self.mode,
        }
    }
}

fn check_influence_input(a_hat: &Matrix, hops: usize) -> Result<()> {
    if hops == 0 {
        return Err(ScgcError::InvalidInput(
            "influence needs at least one hop".into(),
        ));
    }
    if a_hat.rows() != a_hat.cols() {
        return Err(ScgcError::DimMismatch {
            op: "influence",
            lhs: format!("{}x{}", a_hat.rows(), a_hat.cols()),
            rhs: "square".into(),
        });
    }
    for i in 0..a_hat.rows() {
        for j in (i + 1)..a_hat.cols() {
            if (a_hat.get(i, j) - a_hat.get(j, i)).abs() > 1e-12 {
                return Err(ScgcError::InvalidInput(format!(
                    "normalized adjacency not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    Ok(())
}

/// Cumulative influence: gamma = sum of powers A_hat^r for r = 1..=hops,
/// formed once by iterated multiplication before training starts.
pub fn cumulative_influence(a_hat: &Matrix, hops: usize) -> Result<InfluenceMatrix> {
    check_influence_input(a_hat, hops)?;
    let mut power = a_hat.clone();
    let mut gamma = a_hat.clone();
    for _ in 1..hops {
        power = matmul(&power, a_hat)?;
        gamma.add_assign(&power);
    }
    Ok(InfluenceMatrix {
        n: a_hat.rows(),
        gamma,
        hops,
        mode: InfluenceMode::Cumulative,
    })
}

/// Single-power influence: gamma = A_hat^r for one fixed hop depth.
pub fn single_power_influence(a_hat: &Matrix, hops: usize) -> Result<InfluenceMatrix> {
    check_influence_input(a_hat, hops)?;
    let mut gamma = a_hat.clone();
    for _ in 1..hops {
        gamma = matmul(&gamma, a_hat)?;
    }
    Ok(InfluenceMatrix {
        n: a_hat.rows(),
        gamma,
        hops,
        mode: InfluenceMode::SinglePower,
    })
}

/// Distance used when building KNN graphs from features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KnnMetric {
    #[default]
    Euclidean,
    /// 1 - cosine similarity; zero-norm rows compare as maximally distant.
    Cosine,
}

/// Undirected KNN graph: each node links to its k nearest neighbors, and
/// the directed edge sets are unioned. Ties break toward the lower index.
pub fn build_knn_graph(features: &Matrix, k: usize) -> Result<SparseGraph> {
    build_knn_graph_with(features, k, KnnMetric::Euclidean)
}

pub fn build_knn_graph_with(features: &Matrix, k: usize, metric: KnnMetric) -> Result<SparseGraph> {
    let n = features.rows();
    if k == 0 {
        return Err(ScgcError::InvalidInput("knn needs k >= 1".into()));
    }
    if k >= n {
        return Err(ScgcError::InvalidInput(format!(
            "knn needs k < n, got k={k} with {n} nodes"
        )));
    }
    if !features.is_finite() {
        return Err(ScgcError::NonFinite("knn features".into()));
    }

    let dist = |a: &[f64], b: &[f64]| -> f64 {
        match metric {
            KnnMetric::Euclidean => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
            KnnMetric::Cosine => {
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
                let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
                if na == 0.0 || nb == 0.0 {
                    2.0
                } else {
                    1.0 - dot / (na * nb)
                }
            }
        }
    };

    let mut g = SparseGraph::new(n);
    let mut order: Vec<usize> = Vec::with_capacity(n - 1);
    for i in 0..n {
        order.clear();
        order.extend((0..n).filter(|&j| j != i));
        let row_i = features.row(i);
        // sort by (distance, index): lower index wins ties, duplicates included
        order.sort_by(|&a, &b| {
            let da = dist(row_i, features.row(a));
            let db = dist(row_i, features.row(b));
            da.partial_cmp(&db).unwrap().then(a.cmp(&b))
        });
        for &j in order.iter().take(k) {
            g.add_edge(i, j)?;
        }
    }
    Ok(g)
}

/// Stochastic block model fixture: planted communities with one-hot block
/// features plus Gaussian noise. Returns (graph, features, block labels).
pub fn sbm_generate(
    block_sizes: &[usize],
    p_in: f64,
    p_out: f64,
    feature_dim: usize,
    noise_sigma: f64,
    rng: &mut RngState,
) -> Result<(SparseGraph, Matrix, Vec<usize>)> {
    if block_sizes.is_empty() || block_sizes.contains(&0) {
        return Err(ScgcError::InvalidInput("empty block in block_sizes".into()));
    }
    if !(0.0..=1.0).contains(&p_in) || !(0.0..=1.0).contains(&p_out) || p_out >= p_in {
        return Err(ScgcError::InvalidInput(format!(
            "need 0 <= p_out < p_in <= 1, got p_in={p_in}, p_out={p_out}"
        )));
    }
    if feature_dim < block_sizes.len() {
        return Err(ScgcError::InvalidInput(format!(
            "feature_dim {feature_dim} < {} blocks",
            block_sizes.len()
        )));
    }
    if noise_sigma < 0.0 {
        return Err(ScgcError::InvalidInput("noise_sigma must be >= 0".into()));
    }

    let n: usize = block_sizes.iter().sum();
    let mut labels = Vec::with_capacity(n);
    for (block, &size) in block_sizes.iter().enumerate() {
        labels.extend(std::iter::repeat_n(block, size));
    }

    let mut g = SparseGraph::new(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let p = if labels[i] == labels[j] { p_in } else { p_out };
            if rng.next_f64() < p {
                g.add_edge(i, j)?;
            }
        }
    }

    let mut features = Matrix::zeros(n, feature_dim);
    for i in 0..n {
        for d in 0..feature_dim {
            let base = if d == labels[i] { 1.0 } else { 0.0 };
            let noise = if noise_sigma > 0.0 {
                noise_sigma * rng.next_normal()
            } else {
                0.0
            };
            features.set(i, d, base + noise);
        }
    }

    Ok((g, features, labels))
}
