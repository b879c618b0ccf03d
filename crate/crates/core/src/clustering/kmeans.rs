//! Lloyd's k-means with k-means++ seeding and best-of-restarts selection.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Partition;
use crate::error::{Error, Result};
use crate::rng::rng_for;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KMeansOptions {
    pub restarts: usize,
    pub max_iter: usize,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        Self {
            restarts: 20,
            max_iter: 300,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub partition: Partition,
    /// `k x d`, one centroid per row.
    pub centers: DMatrix<f64>,
    pub wcss: f64,
    /// Within-cluster sum of squares after every center update.
    pub wcss_trace: Vec<f64>,
    pub iterations: usize,
}

/// Row-major copy of the point cloud; the hot loops walk rows.
struct Points {
    data: Vec<f64>,
    n: usize,
    d: usize,
}

impl Points {
    fn new(m: &DMatrix<f64>) -> Self {
        let (n, d) = m.shape();
        let mut data = Vec::with_capacity(n * d);
        for i in 0..n {
            data.extend(m.row(i).iter());
        }
        Self { data, n, d }
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }
}

fn sqdist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Clusters the rows of `points` into `k` groups, keeping the restart with the
/// lowest within-cluster sum of squares.
pub fn kmeans(points: &DMatrix<f64>, k: usize, restarts: usize, seed: u64) -> Result<Partition> {
    let opts = KMeansOptions {
        restarts,
        ..KMeansOptions::default()
    };
    kmeans_fit(points, k, &opts, seed).map(|fit| fit.partition)
}

pub fn kmeans_fit(
    points: &DMatrix<f64>,
    k: usize,
    opts: &KMeansOptions,
    seed: u64,
) -> Result<KMeansFit> {
    let n = points.nrows();
    if k == 0 || n < k {
        return Err(Error::structural(format!(
            "k-means needs 1 <= k <= N, got k = {k}, N = {n}"
        )));
    }
    let pts = Points::new(points);
    let restarts = opts.restarts.max(1);
    let fits: Vec<KMeansFit> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_for(seed, r as u64);
            let init = init_centers(&pts, k, &mut rng);
            run_lloyd(&pts, init, k, opts.max_iter)
        })
        .collect();
    // first restart wins ties, so the outcome does not depend on scheduling
    let best = fits
        .into_iter()
        .reduce(|best, fit| if fit.wcss < best.wcss { fit } else { best })
        .expect("at least one restart");
    Ok(best)
}

/// k-means++ seeding: `k x d` initial centers.
pub fn plus_plus_init(points: &DMatrix<f64>, k: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let pts = Points::new(points);
    let flat = init_centers(&pts, k, rng);
    DMatrix::from_row_slice(k, pts.d, &flat)
}

fn init_centers(pts: &Points, k: usize, rng: &mut impl Rng) -> Vec<f64> {
    let mut centers = Vec::with_capacity(k * pts.d);
    let first = rng.random_range(0..pts.n);
    centers.extend_from_slice(pts.row(first));
    let mut nearest: Vec<f64> = (0..pts.n)
        .map(|i| sqdist(pts.row(i), pts.row(first)))
        .collect();
    for _ in 1..k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 && total.is_finite() {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = pts.n - 1;
            for (i, &w) in nearest.iter().enumerate() {
                acc += w;
                if acc > target && w > 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..pts.n)
        };
        let c = pts.row(pick).to_vec();
        for (i, slot) in nearest.iter_mut().enumerate() {
            *slot = slot.min(sqdist(pts.row(i), &c));
        }
        centers.extend_from_slice(&c);
    }
    centers
}

/// Runs Lloyd iterations from explicit `k x d` initial centers.
pub fn lloyd(
    points: &DMatrix<f64>,
    init_centers: &DMatrix<f64>,
    max_iter: usize,
) -> Result<KMeansFit> {
    let k = init_centers.nrows();
    let n = points.nrows();
    if k == 0 || n < k || init_centers.ncols() != points.ncols() {
        return Err(Error::structural(format!(
            "lloyd: {k} centers of width {} for {n} points of width {}",
            init_centers.ncols(),
            points.ncols()
        )));
    }
    let pts = Points::new(points);
    let mut flat = Vec::with_capacity(k * pts.d);
    for c in 0..k {
        flat.extend(init_centers.row(c).iter());
    }
    Ok(run_lloyd(&pts, flat, k, max_iter))
}

fn run_lloyd(pts: &Points, mut centers: Vec<f64>, k: usize, max_iter: usize) -> KMeansFit {
    let d = pts.d;
    let mut labels = assign(pts, &centers, k);
    repair_empty(pts, &centers, &mut labels, k);
    centers = update_centers(pts, &labels, k);
    let mut trace = vec![wcss(pts, &centers, &labels)];
    let mut iterations = 1;
    while iterations < max_iter.max(1) {
        let mut next = assign(pts, &centers, k);
        repair_empty(pts, &centers, &mut next, k);
        if next == labels {
            break;
        }
        labels = next;
        centers = update_centers(pts, &labels, k);
        trace.push(wcss(pts, &centers, &labels));
        iterations += 1;
    }
    let partition = Partition::new(labels, k).expect("repair leaves every cluster populated");
    KMeansFit {
        partition,
        centers: DMatrix::from_row_slice(k, d, &centers),
        wcss: *trace.last().expect("non-empty trace"),
        wcss_trace: trace,
        iterations,
    }
}

fn assign(pts: &Points, centers: &[f64], k: usize) -> Vec<usize> {
    let d = pts.d;
    (0..pts.n)
        .map(|i| {
            let x = pts.row(i);
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for c in 0..k {
                let dist = sqdist(x, &centers[c * d..(c + 1) * d]);
                if dist < best_d {
                    best_d = dist;
                    best = c;
                }
            }
            best
        })
        .collect()
}

/// Moves the point farthest from its centroid into each empty cluster.
fn repair_empty(pts: &Points, centers: &[f64], labels: &mut [usize], k: usize) {
    let d = pts.d;
    let mut sizes = vec![0usize; k];
    for &l in labels.iter() {
        sizes[l] += 1;
    }
    if sizes.iter().all(|&s| s > 0) {
        return;
    }
    let mut dist: Vec<f64> = (0..pts.n)
        .map(|i| {
            let c = labels[i];
            sqdist(pts.row(i), &centers[c * d..(c + 1) * d])
        })
        .collect();
    for empty in 0..k {
        if sizes[empty] > 0 {
            continue;
        }
        let mut victim = None;
        let mut far = -1.0;
        for i in 0..pts.n {
            if sizes[labels[i]] > 1 && dist[i] > far {
                far = dist[i];
                victim = Some(i);
            }
        }
        let i = victim.expect("N >= k leaves a cluster with two members");
        sizes[labels[i]] -= 1;
        labels[i] = empty;
        sizes[empty] = 1;
        dist[i] = 0.0;
    }
}

fn update_centers(pts: &Points, labels: &[usize], k: usize) -> Vec<f64> {
    let d = pts.d;
    let mut sums = vec![0.0; k * d];
    let mut counts = vec![0usize; k];
    for (i, &c) in labels.iter().enumerate() {
        counts[c] += 1;
        for (s, x) in sums[c * d..(c + 1) * d].iter_mut().zip(pts.row(i)) {
            *s += x;
        }
    }
    for c in 0..k {
        let inv = 1.0 / counts[c] as f64;
        sums[c * d..(c + 1) * d].iter_mut().for_each(|s| *s *= inv);
    }
    sums
}

fn wcss(pts: &Points, centers: &[f64], labels: &[usize]) -> f64 {
    let d = pts.d;
    labels
        .iter()
        .enumerate()
        .map(|(i, &c)| sqdist(pts.row(i), &centers[c * d..(c + 1) * d]))
        .sum()
}
