//! Partition agreement (NMI, ARI) and the normalized association/cut objective.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::clustering::{cluster_volumes, dissimilarity_matrix, DissimilarityGraph, Partition};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub nmi: f64,
    pub ari: f64,
    pub cost: Option<f64>,
}

impl MetricReport {
    pub fn compare(truth: &[usize], predicted: &[usize]) -> Result<Self> {
        Ok(Self {
            nmi: nmi(truth, predicted)?,
            ari: ari(truth, predicted)?,
            cost: None,
        })
    }
}

struct Contingency {
    n: f64,
    cells: Vec<f64>,
    rows: Vec<f64>,
    cols: Vec<f64>,
}

fn contingency(a: &[usize], b: &[usize]) -> Result<Contingency> {
    if a.len() != b.len() {
        return Err(Error::structural(format!(
            "label vectors differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    // compact arbitrary label values to dense indices
    let index = |labels: &[usize]| {
        let mut ids = BTreeMap::new();
        let mapped: Vec<usize> = labels
            .iter()
            .map(|l| {
                let next = ids.len();
                *ids.entry(*l).or_insert(next)
            })
            .collect();
        (mapped, ids.len())
    };
    let (ai, ka) = index(a);
    let (bi, kb) = index(b);
    let mut cells = vec![0.0; ka * kb];
    let mut rows = vec![0.0; ka];
    let mut cols = vec![0.0; kb];
    for (&x, &y) in ai.iter().zip(&bi) {
        cells[x * kb + y] += 1.0;
        rows[x] += 1.0;
        cols[y] += 1.0;
    }
    Ok(Contingency {
        n: a.len() as f64,
        cells,
        rows,
        cols,
    })
}

fn entropy(counts: &[f64], n: f64) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| {
            let p = c / n;
            -p * p.ln()
        })
        .sum()
}

/// Normalized mutual information with arithmetic-mean normalization,
/// `2 I(a; b) / (H(a) + H(b))`.
///
/// Two single-cluster labelings score 1; a single cluster against anything
/// else scores 0.
pub fn nmi(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.is_empty() {
        return Err(Error::structural("nmi of empty labelings"));
    }
    let t = contingency(a, b)?;
    let ha = entropy(&t.rows, t.n);
    let hb = entropy(&t.cols, t.n);
    if ha == 0.0 && hb == 0.0 {
        return Ok(1.0);
    }
    if ha == 0.0 || hb == 0.0 {
        return Ok(0.0);
    }
    let kb = t.cols.len();
    let mut mi = 0.0;
    for (x, &rx) in t.rows.iter().enumerate() {
        for (y, &cy) in t.cols.iter().enumerate() {
            let nxy = t.cells[x * kb + y];
            if nxy > 0.0 {
                mi += nxy / t.n * (t.n * nxy / (rx * cy)).ln();
            }
        }
    }
    Ok((2.0 * mi / (ha + hb)).clamp(0.0, 1.0))
}

fn choose2(x: f64) -> f64 {
    x * (x - 1.0) / 2.0
}

/// Hubert-Arabie adjusted Rand index.
pub fn ari(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() < 2 {
        return Err(Error::structural("ari needs at least two items"));
    }
    let t = contingency(a, b)?;
    let index: f64 = t.cells.iter().map(|&c| choose2(c)).sum();
    let sum_a: f64 = t.rows.iter().map(|&c| choose2(c)).sum();
    let sum_b: f64 = t.cols.iter().map(|&c| choose2(c)).sum();
    let expected = sum_a * sum_b / choose2(t.n);
    let max = 0.5 * (sum_a + sum_b);
    if max == expected {
        // both labelings all-singletons or both single-cluster
        return Ok(if sum_a == sum_b && index == sum_a {
            1.0
        } else {
            0.0
        });
    }
    Ok((index - expected) / (max - expected))
}

/// Intra-class association and inter-class cut of a filtered signal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveTerms {
    /// `sum_c 1/vol_c sum_{i,j in V_c} ||x_i - x_j||^2`
    pub intra: f64,
    /// `sum_c 1/vol_c sum_{i in V_c, j not in V_c} ||x_i - x_j||^2`
    pub inter: f64,
}

impl ObjectiveTerms {
    pub fn cost(&self, gamma: f64) -> f64 {
        self.intra - gamma * self.inter
    }
}

pub fn objective_terms(filtered: &DMatrix<f64>, part: &Partition) -> Result<ObjectiveTerms> {
    let dg = dissimilarity_matrix(filtered)?;
    objective_terms_with(&dg, part)
}

pub fn objective_terms_with(dg: &DissimilarityGraph, part: &Partition) -> Result<ObjectiveTerms> {
    if dg.is_flat() {
        return Err(Error::degenerate(
            "all filtered attribute rows coincide; cluster volumes vanish",
        ));
    }
    let vols = cluster_volumes(dg, part)?;
    let labels = part.labels();
    let n = labels.len();
    let mut intra = vec![0.0; part.k()];
    let mut inter = vec![0.0; part.k()];
    for i in 0..n {
        let c = labels[i];
        for j in 0..n {
            let w = dg.weights[(i, j)];
            if labels[j] == c {
                intra[c] += w;
            } else {
                inter[c] += w;
            }
        }
    }
    Ok(ObjectiveTerms {
        intra: intra.iter().zip(&vols).map(|(s, v)| s / v).sum(),
        inter: inter.iter().zip(&vols).map(|(s, v)| s / v).sum(),
    })
}

/// Direct evaluation of `intra - gamma * inter` with volumes taken from the
/// dissimilarity graph of `filtered`.
pub fn objective_cost(filtered: &DMatrix<f64>, part: &Partition, gamma: f64) -> Result<f64> {
    Ok(objective_terms(filtered, part)?.cost(gamma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const EXACT: f64 = 1e-12;

    #[test]
    fn nmi_cases() {
        assert!((nmi(&[0, 0, 1, 1], &[0, 0, 1, 1]).unwrap() - 1.0).abs() <= EXACT);
        assert!((nmi(&[0, 0, 1, 1], &[5, 5, 2, 2]).unwrap() - 1.0).abs() <= EXACT);
        assert!(nmi(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap().abs() <= EXACT);
        // H(a) = ln 2, H(b) = 1.5 ln 2, b refines a so I = ln 2
        assert!((nmi(&[0, 0, 1, 1], &[0, 0, 1, 2]).unwrap() - 0.8).abs() <= EXACT);
    }

    #[test]
    fn nmi_degenerate_conventions() {
        assert_eq!(nmi(&[0, 0, 0], &[1, 1, 1]).unwrap(), 1.0);
        assert_eq!(nmi(&[0, 0, 0], &[0, 1, 1]).unwrap(), 0.0);
        assert!(nmi(&[0, 1], &[0]).is_err());
    }

    #[test]
    fn ari_cases() {
        assert!((ari(&[0, 0, 1, 1], &[1, 1, 0, 0]).unwrap() - 1.0).abs() <= EXACT);
        assert!((ari(&[0, 1, 2, 2], &[0, 1, 2, 2]).unwrap() - 1.0).abs() <= EXACT);
        assert!((ari(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap() + 0.5).abs() <= EXACT);
        assert_eq!(ari(&[0, 1, 2], &[0, 1, 2]).unwrap(), 1.0);
        assert_eq!(ari(&[0, 0, 0], &[0, 0, 0]).unwrap(), 1.0);
        assert!(ari(&[0, 1, 1], &[0, 1]).is_err());
    }

    #[test]
    fn symmetric_and_relabel_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let n = rng.random_range(2..60);
            let a: Vec<usize> = (0..n).map(|_| rng.random_range(0..4)).collect();
            let b: Vec<usize> = (0..n).map(|_| rng.random_range(0..5)).collect();
            let mut perm: Vec<usize> = (0..5).collect();
            perm.shuffle(&mut rng);
            let b2: Vec<usize> = b.iter().map(|&l| perm[l] + 10).collect();
            for f in [nmi, ari] {
                let base = f(&a, &b).unwrap();
                assert!((base - f(&b, &a).unwrap()).abs() <= EXACT);
                assert!((base - f(&a, &b2).unwrap()).abs() <= EXACT);
            }
            let v = nmi(&a, &b).unwrap();
            assert!((0.0..=1.0).contains(&v));
            assert!(ari(&a, &b).unwrap() <= 1.0);
        }
    }

    #[test]
    fn ari_of_independent_labelings_centers_on_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let trials = 1000;
        let mut total = 0.0;
        for _ in 0..trials {
            let a: Vec<usize> = (0..100).map(|_| rng.random_range(0..4)).collect();
            let b: Vec<usize> = (0..100).map(|_| rng.random_range(0..4)).collect();
            total += ari(&a, &b).unwrap();
        }
        assert!((total / trials as f64).abs() <= 0.02);
    }

    #[test]
    fn cost_of_two_node_single_cluster() {
        let f = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let part = Partition::new(vec![0, 0], 1).unwrap();
        for gamma in [0.0, 0.3, 7.0] {
            assert!((objective_cost(&f, &part, gamma).unwrap() - 1.0).abs() <= EXACT);
        }
    }

    #[test]
    fn identical_rows_within_clusters_have_no_association() {
        let f = DMatrix::from_row_slice(4, 2, &[0., 0., 0., 0., 3., 1., 3., 1.]);
        let part = Partition::new(vec![0, 0, 1, 1], 2).unwrap();
        let terms = objective_terms(&f, &part).unwrap();
        assert_eq!(terms.intra, 0.0);
        assert!(terms.inter > 0.0);
    }

    #[test]
    fn flat_signal_is_degenerate() {
        let f = DMatrix::from_element(3, 2, 1.5);
        let part = Partition::new(vec![0, 1, 1], 2).unwrap();
        assert!(matches!(
            objective_cost(&f, &part, 1.0),
            Err(Error::Degenerate(_))
        ));
    }
}
