//! Attributed graphs, degree normalization and the normalized Laplacian.
//!
//! Every spectral quantity in the crate goes through [`eig_sym`], a dense
//! symmetric eigensolver that returns the full spectrum in ascending order.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Absolute asymmetry accepted by [`eig_sym`].
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Symmetric, nonnegative, zero-diagonal adjacency stored row-compressed.
#[derive(Debug, Clone, PartialEq)]
pub struct Adjacency {
    n: usize,
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    weights: Vec<f64>,
}

impl Adjacency {
    /// Builds an undirected adjacency from a list of `(u, v, weight)` edges.
    ///
    /// Edges are symmetrized with `A <- max(A, A^T)`, self-loops are dropped
    /// and repeated edges collapse to the largest weight seen.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (u, v, w) in edges {
            if u >= n || v >= n {
                return Err(Error::structural(format!(
                    "edge ({u}, {v}) out of range for {n} nodes"
                )));
            }
            if !w.is_finite() || w < 0.0 {
                return Err(Error::structural(format!(
                    "edge ({u}, {v}) has invalid weight {w}"
                )));
            }
            if u == v || w == 0.0 {
                continue;
            }
            rows[u].push((v, w));
            rows[v].push((u, w));
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut neighbors = Vec::new();
        let mut weights = Vec::new();
        offsets.push(0);
        for mut row in rows {
            row.sort_by(|a, b| a.0.cmp(&b.0));
            let mut iter = row.into_iter().peekable();
            while let Some((j, mut w)) = iter.next() {
                while let Some(&(j2, w2)) = iter.peek() {
                    if j2 != j {
                        break;
                    }
                    w = w.max(w2);
                    iter.next();
                }
                neighbors.push(j);
                weights.push(w);
            }
            offsets.push(neighbors.len());
        }
        Ok(Self {
            n,
            offsets,
            neighbors,
            weights,
        })
    }

    /// Wraps a dense matrix, rejecting anything that is not exactly symmetric,
    /// nonnegative and zero on the diagonal.
    pub fn from_dense(a: &DMatrix<f64>) -> Result<Self> {
        check_adjacency(a)?;
        let n = a.nrows();
        let mut edges = Vec::new();
        for j in 0..n {
            for i in (j + 1)..n {
                let w = a[(i, j)];
                if w != 0.0 {
                    edges.push((i, j, w));
                }
            }
        }
        Self::from_edges(n, edges)
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    /// Number of undirected edges.
    pub fn n_edges(&self) -> usize {
        self.neighbors.len() / 2
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.offsets[i]..self.offsets[i + 1];
        self.neighbors[range.clone()]
            .iter()
            .copied()
            .zip(self.weights[range].iter().copied())
    }

    /// Undirected edges `(u, v, w)` with `u < v`, in row order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            self.neighbors(i)
                .filter(move |&(j, _)| i < j)
                .map(move |(j, w)| (i, j, w))
        })
    }

    pub fn degrees(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.neighbors(i).map(|(_, w)| w).sum())
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, w) in self.neighbors(i) {
                a[(i, j)] = w;
            }
        }
        a
    }
}

/// Graph topology, node attributes (`F`, one row per node) and optional
/// ground-truth labels.
#[derive(Debug, Clone)]
pub struct AttributedGraph {
    adjacency: Adjacency,
    attributes: DMatrix<f64>,
    labels: Option<Vec<usize>>,
    node_ids: Option<Vec<String>>,
}

impl AttributedGraph {
    pub fn new(
        adjacency: Adjacency,
        attributes: DMatrix<f64>,
        labels: Option<Vec<usize>>,
    ) -> Result<Self> {
        let n = adjacency.n_nodes();
        if attributes.nrows() != n {
            return Err(Error::structural(format!(
                "attribute matrix has {} rows for {n} nodes",
                attributes.nrows()
            )));
        }
        if attributes.iter().any(|v| !v.is_finite()) {
            return Err(Error::structural(
                "attribute matrix contains non-finite values",
            ));
        }
        if let Some(labels) = &labels {
            if labels.len() != n {
                return Err(Error::structural(format!(
                    "{} labels for {n} nodes",
                    labels.len()
                )));
            }
            check_contiguous(labels)?;
        }
        Ok(Self {
            adjacency,
            attributes,
            labels,
            node_ids: None,
        })
    }

    pub fn with_node_ids(mut self, ids: Vec<String>) -> Result<Self> {
        if ids.len() != self.n_nodes() {
            return Err(Error::structural(format!(
                "{} node ids for {} nodes",
                ids.len(),
                self.n_nodes()
            )));
        }
        self.node_ids = Some(ids);
        Ok(self)
    }

    pub fn n_nodes(&self) -> usize {
        self.adjacency.n_nodes()
    }

    pub fn adjacency(&self) -> &Adjacency {
        &self.adjacency
    }

    pub fn attributes(&self) -> &DMatrix<f64> {
        &self.attributes
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn node_ids(&self) -> Option<&[String]> {
        self.node_ids.as_deref()
    }

    /// Number of distinct ground-truth classes, if labels are present.
    pub fn n_classes(&self) -> Option<usize> {
        self.labels
            .as_ref()
            .map(|l| l.iter().max().map_or(0, |m| m + 1))
    }

    /// Scales every attribute row to unit Euclidean norm (zero rows stay zero).
    pub fn row_normalize_attributes(&mut self) {
        for mut row in self.attributes.row_iter_mut() {
            let norm = row.norm();
            if norm > 0.0 {
                row /= norm;
            }
        }
    }
}

fn check_contiguous(labels: &[usize]) -> Result<()> {
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut seen = vec![false; k];
    for &l in labels {
        seen[l] = true;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::structural(format!(
            "labels are not contiguous: class {missing} of 0..{k} is unused"
        )));
    }
    Ok(())
}

fn check_adjacency(a: &DMatrix<f64>) -> Result<()> {
    if !a.is_square() {
        return Err(Error::structural(format!(
            "adjacency must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let n = a.nrows();
    for j in 0..n {
        if a[(j, j)] != 0.0 {
            return Err(Error::structural(format!("nonzero diagonal at node {j}")));
        }
        for i in 0..n {
            let w = a[(i, j)];
            if !w.is_finite() || w < 0.0 {
                return Err(Error::structural(format!(
                    "invalid weight {w} at ({i}, {j})"
                )));
            }
            if w != a[(j, i)] {
                return Err(Error::structural(format!(
                    "adjacency is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    Ok(())
}

fn inv_sqrt_degrees(degrees: &[f64]) -> Vec<f64> {
    degrees
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
        .collect()
}

/// `D^{-1/2} A D^{-1/2}`; rows and columns of isolated nodes are zero.
pub fn normalize_adjacency(graph: &AttributedGraph) -> DMatrix<f64> {
    let adj = graph.adjacency();
    let n = adj.n_nodes();
    let s = inv_sqrt_degrees(&adj.degrees());
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        for (j, w) in adj.neighbors(i).filter(|&(j, _)| j > i) {
            let v = s[i] * w * s[j];
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// Dense variant of [`normalize_adjacency`] for matrices that did not come
/// through [`Adjacency`].
pub fn normalize_adjacency_dense(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_adjacency(a)?;
    let degrees: Vec<f64> = a.row_iter().map(|r| r.sum()).collect();
    let s = inv_sqrt_degrees(&degrees);
    let n = a.nrows();
    let mut out = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in (j + 1)..n {
            let v = s[i] * a[(i, j)] * s[j];
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    Ok(out)
}

/// `L_n = I - D^{-1/2} A D^{-1/2}`. Isolated nodes keep a unit diagonal.
pub fn normalized_laplacian(graph: &AttributedGraph) -> DMatrix<f64> {
    laplacian_from_normalized(normalize_adjacency(graph))
}

pub fn normalized_laplacian_dense(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(laplacian_from_normalized(normalize_adjacency_dense(a)?))
}

fn laplacian_from_normalized(a_n: DMatrix<f64>) -> DMatrix<f64> {
    let mut l = -a_n;
    for i in 0..l.nrows() {
        l[(i, i)] = 1.0;
    }
    l
}

/// Eigenvalues in nondecreasing order with matching orthonormal eigenvectors
/// (one per column).
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Eigenvectors of the `k` smallest eigenvalues.
    pub fn leading(&self, k: usize) -> DMatrix<f64> {
        self.eigenvectors.columns(0, k).into_owned()
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        let scaled = DMatrix::from_fn(self.dim(), self.dim(), |i, j| {
            self.eigenvectors[(i, j)] * self.eigenvalues[j]
        });
        scaled * self.eigenvectors.transpose()
    }
}

/// Full dense eigendecomposition of a symmetric matrix.
///
/// The solver runs single-threaded so results are bit-stable for a build;
/// callers parallelize across independent problems instead.
pub fn eig_sym(m: &DMatrix<f64>) -> Result<SpectralDecomposition> {
    if !m.is_square() {
        return Err(Error::structural(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let n = m.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let (a, b) = (m[(i, j)], m[(j, i)]);
            if !a.is_finite() || (a - b).abs() > SYMMETRY_TOL {
                return Err(Error::structural(format!(
                    "matrix is not symmetric at ({i}, {j}): {a} vs {b}"
                )));
            }
        }
    }
    if n == 0 {
        return Ok(SpectralDecomposition {
            eigenvalues: DVector::zeros(0),
            eigenvectors: DMatrix::zeros(0, 0),
        });
    }
    let fm = faer::Mat::<f64>::from_fn(n, n, |i, j| m[(i, j)]);
    let evd = fm
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::structural(format!("eigensolver failed: {e:?}")))?;
    let s = evd.S().column_vector();
    let u = evd.U();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s[a].total_cmp(&s[b]));
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&k| s[k]));
    let eigenvectors = DMatrix::from_fn(n, n, |i, j| u[(i, order[j])]);
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    })
}
