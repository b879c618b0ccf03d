//! Partition update: dissimilarity graph of the (filtered) attributes, the
//! graph-regularized spectral embedding, and k-means on the embedding rows.

mod kmeans;

pub use kmeans::{kmeans, kmeans_fit, lloyd, plus_plus_init, KMeansFit, KMeansOptions};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::eig_sym;

/// Lower bound applied to dissimilarity degrees so `D^{-1/2}` stays finite
/// when attribute rows coincide.
pub const DEGREE_FLOOR: f64 = 1e-12;

/// Attribute widths above this use the Gram-matrix formulation.
const GRAM_THRESHOLD: usize = 64;

/// Hard assignment of `N` nodes to `k` non-empty clusters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    labels: Vec<usize>,
    k: usize,
}

impl Partition {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        let mut sizes = vec![0usize; k];
        for &l in &labels {
            if l >= k {
                return Err(Error::structural(format!(
                    "label {l} out of range for k = {k}"
                )));
            }
            sizes[l] += 1;
        }
        if let Some(c) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::structural(format!("cluster {c} of {k} is empty")));
        }
        Ok(Self { labels, k })
    }

    /// Infers `k` as `max(label) + 1`.
    pub fn from_labels(labels: Vec<usize>) -> Result<Self> {
        let k = labels.iter().max().map_or(0, |m| m + 1);
        Self::new(labels, k)
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    /// Cluster indicator matrix `Z` with `Z[i, c] = 1` iff node `i` is in cluster `c`.
    pub fn indicator(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.len(), self.k, |i, c| {
            if self.labels[i] == c {
                1.0
            } else {
                0.0
            }
        })
    }
}

/// Pairwise squared Euclidean distances between attribute rows, with
/// (floored) row sums as degrees.
#[derive(Debug, Clone)]
pub struct DissimilarityGraph {
    pub weights: DMatrix<f64>,
    pub degrees: Vec<f64>,
}

impl DissimilarityGraph {
    pub fn n_nodes(&self) -> usize {
        self.degrees.len()
    }

    /// True when every pair of rows coincides, i.e. no pair carries any weight.
    pub fn is_flat(&self) -> bool {
        self.degrees.iter().all(|&d| d <= DEGREE_FLOOR)
    }
}

pub fn dissimilarity_matrix(attrs: &DMatrix<f64>) -> Result<DissimilarityGraph> {
    let n = attrs.nrows();
    if n < 2 {
        return Err(Error::structural(format!(
            "dissimilarity needs at least 2 rows, got {n}"
        )));
    }
    let p = attrs.ncols();
    let mut w = DMatrix::zeros(n, n);
    if p > GRAM_THRESHOLD {
        let gram = attrs * attrs.transpose();
        for j in 0..n {
            for i in (j + 1)..n {
                let d = (gram[(i, i)] + gram[(j, j)] - 2.0 * gram[(i, j)]).max(0.0);
                w[(i, j)] = d;
                w[(j, i)] = d;
            }
        }
    } else {
        let rows: Vec<Vec<f64>> = attrs
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect();
        for j in 0..n {
            for i in (j + 1)..n {
                let d: f64 = rows[i]
                    .iter()
                    .zip(&rows[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                w[(i, j)] = d;
                w[(j, i)] = d;
            }
        }
    }
    let degrees = w.column_iter().map(|c| c.sum().max(DEGREE_FLOOR)).collect();
    Ok(DissimilarityGraph {
        weights: w,
        degrees,
    })
}

/// `vol(V_c)`: the summed dissimilarity degree of each cluster.
pub fn cluster_volumes(dg: &DissimilarityGraph, part: &Partition) -> Result<Vec<f64>> {
    if part.len() != dg.n_nodes() {
        return Err(Error::structural(format!(
            "partition covers {} nodes, dissimilarity graph has {}",
            part.len(),
            dg.n_nodes()
        )));
    }
    let mut vols = vec![0.0; part.k()];
    let mut sizes = vec![0usize; part.k()];
    for (i, &c) in part.labels().iter().enumerate() {
        vols[c] += dg.degrees[i];
        sizes[c] += 1;
    }
    if let Some(c) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::structural(format!("cluster {c} is empty")));
    }
    Ok(vols)
}

/// `W' = D_W^{-1/2} W D_W^{-1/2} - 2 alpha A_n`.
pub fn embedding_operator(
    dg: &DissimilarityGraph,
    a_n: &DMatrix<f64>,
    alpha: f64,
) -> Result<DMatrix<f64>> {
    let n = dg.n_nodes();
    if a_n.nrows() != n || a_n.ncols() != n {
        return Err(Error::structural(format!(
            "normalized adjacency is {}x{}, expected {n}x{n}",
            a_n.nrows(),
            a_n.ncols()
        )));
    }
    if !(alpha >= 0.0) {
        return Err(Error::structural(format!(
            "alpha must be >= 0, got {alpha}"
        )));
    }
    let s: Vec<f64> = dg.degrees.iter().map(|d| 1.0 / d.sqrt()).collect();
    let mut op = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in j..n {
            let v = s[i] * dg.weights[(i, j)] * s[j] - 2.0 * alpha * a_n[(i, j)];
            op[(i, j)] = v;
            op[(j, i)] = v;
        }
    }
    Ok(op)
}

/// Bottom-`k` eigenpairs of the embedding operator.
#[derive(Debug, Clone)]
pub struct SpectralEmbedding {
    /// `N x k`, orthonormal columns.
    pub vectors: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
}

pub fn spectral_embed(
    dg: &DissimilarityGraph,
    a_n: &DMatrix<f64>,
    alpha: f64,
    k: usize,
) -> Result<SpectralEmbedding> {
    let n = dg.n_nodes();
    if k == 0 || k > n {
        return Err(Error::structural(format!(
            "embedding dimension {k} must be in 1..={n}"
        )));
    }
    let op = embedding_operator(dg, a_n, alpha)?;
    let evd = eig_sym(&op)?;
    Ok(SpectralEmbedding {
        vectors: evd.leading(k),
        eigenvalues: evd.eigenvalues.iter().take(k).copied().collect(),
    })
}

/// Scales embedding rows to unit norm; zero rows are left untouched.
pub fn normalize_rows(mut m: DMatrix<f64>) -> DMatrix<f64> {
    for mut row in m.row_iter_mut() {
        let norm = row.norm();
        if norm > 0.0 {
            row /= norm;
        }
    }
    m
}
