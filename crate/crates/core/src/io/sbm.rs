//! Attributed stochastic block model with planted labels.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Adjacency, AttributedGraph};
use crate::rng::rng_for;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbmParams {
    pub n_nodes: usize,
    pub k: usize,
    pub p_in: f64,
    pub p_out: f64,
    /// Attribute dimension; at least `k - 1` so centers can be equidistant.
    pub attr_dim: usize,
    /// Distance between any two block centers.
    pub center_separation: f64,
    pub attr_noise_sigma: f64,
    pub seed: u64,
}

impl SbmParams {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.n_nodes < self.k {
            return Err(Error::Config(format!(
                "need 1 <= k <= n, got k = {}, n = {}",
                self.k, self.n_nodes
            )));
        }
        if !(0.0 <= self.p_out && self.p_out <= self.p_in && self.p_in <= 1.0) {
            return Err(Error::Config(format!(
                "need 0 <= p_out <= p_in <= 1, got p_in = {}, p_out = {}",
                self.p_in, self.p_out
            )));
        }
        if !(self.attr_noise_sigma >= 0.0) || !self.attr_noise_sigma.is_finite() {
            return Err(Error::Config(format!(
                "noise sigma must be >= 0, got {}",
                self.attr_noise_sigma
            )));
        }
        if !(self.center_separation >= 0.0) || !self.center_separation.is_finite() {
            return Err(Error::Config(format!(
                "center separation must be >= 0, got {}",
                self.center_separation
            )));
        }
        if self.attr_dim == 0 || self.attr_dim + 1 < self.k {
            return Err(Error::Config(format!(
                "attribute dimension {} cannot hold {} equidistant centers",
                self.attr_dim, self.k
            )));
        }
        Ok(())
    }

    /// Block of every node; block sizes differ by at most one.
    pub fn blocks(&self) -> Vec<usize> {
        let base = self.n_nodes / self.k;
        let extra = self.n_nodes % self.k;
        (0..self.k)
            .flat_map(|b| std::iter::repeat_n(b, base + usize::from(b < extra)))
            .collect()
    }

    /// Regular-simplex centers (`k x attr_dim`) with pairwise distance
    /// `center_separation`, using the Helmert basis of the sum-zero subspace.
    pub fn centers(&self) -> DMatrix<f64> {
        let k = self.k;
        let scale = self.center_separation / std::f64::consts::SQRT_2;
        DMatrix::from_fn(k, self.attr_dim, |c, d| {
            let j = d + 1;
            if j >= k {
                return 0.0;
            }
            let norm = ((j * (j + 1)) as f64).sqrt();
            let v = if c < j {
                1.0
            } else if c == j {
                -(j as f64)
            } else {
                0.0
            };
            scale * v / norm
        })
    }
}

pub fn generate_sbm(params: &SbmParams) -> Result<AttributedGraph> {
    params.validate()?;
    let n = params.n_nodes;
    let blocks = params.blocks();

    let mut edge_rng = rng_for(params.seed, 0);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let p = if blocks[i] == blocks[j] {
                params.p_in
            } else {
                params.p_out
            };
            if edge_rng.random::<f64>() < p {
                edges.push((i, j, 1.0));
            }
        }
    }

    let mut attr_rng = rng_for(params.seed, 1);
    let noise = Normal::new(0.0, params.attr_noise_sigma)
        .map_err(|e| Error::Config(format!("noise distribution: {e}")))?;
    let centers = params.centers();
    let mut attributes = DMatrix::zeros(n, params.attr_dim);
    for i in 0..n {
        for d in 0..params.attr_dim {
            attributes[(i, d)] = centers[(blocks[i], d)] + noise.sample(&mut attr_rng);
        }
    }

    AttributedGraph::new(Adjacency::from_edges(n, edges)?, attributes, Some(blocks))
}
