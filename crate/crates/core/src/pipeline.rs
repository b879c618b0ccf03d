//! The alternating loop: cluster the attributes, design the best polynomial
//! filter for that partition, re-cluster the filtered attributes, repeat.
//!
//! Each outer iteration builds the coefficient Gram matrix `S` for the
//! current partition, takes all `T` eigenvectors of `S` as candidate
//! filters, clusters the attributes filtered by each candidate and adopts the
//! candidate with the best selection score. The loop stops once the adopted
//! score changes by less than the convergence tolerance.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{
    cluster_volumes, dissimilarity_matrix, kmeans_fit, normalize_rows, spectral_embed,
    KMeansOptions, Partition,
};
use crate::error::{Error, Result};
use crate::filter::{candidate_filters, select_gamma, CForm, FilterBank, FilterCoefficients};
use crate::graph::{eig_sym, normalize_adjacency, normalized_laplacian, AttributedGraph};
use crate::metrics::{nmi, objective_terms_with, MetricReport};
use crate::rng::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode", content = "value")]
pub enum GammaMode {
    /// `tr(F^T B F) / tr(F^T C F)` after the initial clustering.
    AdaptiveRatio,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionMode {
    /// NMI of each candidate partition against the ground-truth labels.
    GroundTruthNmi,
    /// Lowest normalized association minus `gamma` times normalized cut.
    InternalCost,
    /// NMI against the partition adopted in the previous iteration.
    ConsecutiveNmi,
}

impl SelectionMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            SelectionMode::GroundTruthNmi => "ground-truth-nmi",
            SelectionMode::InternalCost => "internal-cost",
            SelectionMode::ConsecutiveNmi => "consecutive-nmi",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub k: usize,
    pub t_order: usize,
    pub alpha: f64,
    pub gamma_mode: GammaMode,
    pub selection: SelectionMode,
    pub seed: u64,
    pub max_outer_iters: usize,
    pub convergence_tol: f64,
    pub kmeans: KMeansOptions,
    pub c_form: CForm,
    /// Re-derive `gamma` from the adopted filter after every iteration.
    pub recompute_gamma: bool,
    /// Unit-normalize embedding rows before k-means.
    pub normalize_embedding: bool,
}

impl RunConfig {
    pub fn new(k: usize, t_order: usize) -> Self {
        Self {
            k,
            t_order,
            alpha: 0.0,
            gamma_mode: GammaMode::AdaptiveRatio,
            selection: SelectionMode::GroundTruthNmi,
            seed: 0,
            max_outer_iters: 50,
            convergence_tol: 1e-4,
            kmeans: KMeansOptions::default(),
            c_form: CForm::Derived,
            recompute_gamma: false,
            normalize_embedding: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if self.t_order == 0 {
            return Err(Error::Config("filter order T must be at least 1".into()));
        }
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(Error::Config(format!(
                "alpha must be >= 0, got {}",
                self.alpha
            )));
        }
        if !(self.convergence_tol > 0.0) {
            return Err(Error::Config(format!(
                "convergence tolerance must be > 0, got {}",
                self.convergence_tol
            )));
        }
        if self.max_outer_iters == 0 {
            return Err(Error::Config("max_outer_iters must be at least 1".into()));
        }
        if let GammaMode::Fixed(g) = self.gamma_mode {
            if !(g >= 0.0) || !g.is_finite() {
                return Err(Error::Config(format!("gamma must be >= 0, got {g}")));
            }
        }
        Ok(())
    }
}

/// One outer iteration of the alternation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// Selection score per candidate, higher is better; `None` marks a
    /// degenerate candidate.
    pub candidate_scores: Vec<Option<f64>>,
    /// Objective value per candidate at the iteration's `gamma`.
    pub candidate_costs: Vec<Option<f64>>,
    /// Eigenvalues of `S`, ascending, aligned with the candidates.
    pub s_eigenvalues: Vec<f64>,
    pub chosen: usize,
    pub gamma: f64,
    pub score: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub method: String,
    pub config: Option<RunConfig>,
    pub partition: Partition,
    pub h: FilterCoefficients,
    /// `gamma` in effect at the end of the run.
    pub gamma: Option<f64>,
    pub history: Vec<IterationRecord>,
    pub metrics: Option<MetricReport>,
    /// Agreement of the initial (unfiltered) clustering with the labels.
    pub initial_metrics: Option<MetricReport>,
    pub converged: bool,
    pub iterations: usize,
}

/// Everything that depends only on the graph: `A_n`, the Laplacian spectrum
/// and the attributes in that eigenbasis. Reused across runs and grid cells.
pub struct Prepared<'g> {
    graph: &'g AttributedGraph,
    a_n: DMatrix<f64>,
    bank: FilterBank,
}

impl<'g> Prepared<'g> {
    pub fn new(graph: &'g AttributedGraph) -> Result<Self> {
        let a_n = normalize_adjacency(graph);
        let spectrum = eig_sym(&normalized_laplacian(graph))?;
        let bank = FilterBank::new(spectrum, graph.attributes())?;
        Ok(Self { graph, a_n, bank })
    }

    pub fn graph(&self) -> &AttributedGraph {
        self.graph
    }

    pub fn normalized_adjacency(&self) -> &DMatrix<f64> {
        &self.a_n
    }

    pub fn bank(&self) -> &FilterBank {
        &self.bank
    }

    fn cluster(&self, attrs: &DMatrix<f64>, cfg: &RunConfig, seed: u64) -> Result<Clustered> {
        let dg = dissimilarity_matrix(attrs)?;
        if dg.is_flat() {
            return Err(Error::degenerate("all attribute rows coincide"));
        }
        let emb = spectral_embed(&dg, &self.a_n, cfg.alpha, cfg.k)?;
        let points = if cfg.normalize_embedding {
            normalize_rows(emb.vectors)
        } else {
            emb.vectors
        };
        let partition = kmeans_fit(&points, cfg.k, &cfg.kmeans, seed)?.partition;
        let volumes = cluster_volumes(&dg, &partition)?;
        let terms = objective_terms_with(&dg, &partition)?;
        Ok(Clustered {
            partition,
            volumes,
            intra: terms.intra,
            inter: terms.inter,
        })
    }

    pub fn initial_partition(&self, cfg: &RunConfig) -> Result<Partition> {
        cfg.validate()?;
        self.check_k(cfg)?;
        Ok(self
            .cluster(self.graph.attributes(), cfg, derive_seed(cfg.seed, 0))?
            .partition)
    }

    fn check_k(&self, cfg: &RunConfig) -> Result<()> {
        if cfg.k > self.graph.n_nodes() {
            return Err(Error::Config(format!(
                "k = {} exceeds the {} nodes of the graph",
                cfg.k,
                self.graph.n_nodes()
            )));
        }
        Ok(())
    }

    /// State right after the initial clustering of the raw attributes.
    pub fn initial_state(&self, cfg: &RunConfig) -> Result<State> {
        cfg.validate()?;
        self.check_k(cfg)?;
        if cfg.selection == SelectionMode::GroundTruthNmi && self.graph.labels().is_none() {
            return Err(Error::Config(
                "ground-truth selection needs node labels".into(),
            ));
        }
        let attrs = self.graph.attributes();
        let init = self.cluster(attrs, cfg, derive_seed(cfg.seed, 0))?;
        let gamma = match cfg.gamma_mode {
            GammaMode::AdaptiveRatio => {
                select_gamma(attrs, &init.partition, &init.volumes, cfg.c_form)?
            }
            GammaMode::Fixed(g) => g,
        };
        let score = match cfg.selection {
            SelectionMode::InternalCost => -(init.intra - gamma * init.inter),
            // the first comparison is against zero agreement
            SelectionMode::GroundTruthNmi | SelectionMode::ConsecutiveNmi => 0.0,
        };
        Ok(State {
            partition: init.partition,
            volumes: init.volumes,
            h: FilterCoefficients::identity(cfg.t_order),
            gamma,
            score,
        })
    }

    fn score(
        &self,
        cfg: &RunConfig,
        c: &Clustered,
        gamma: f64,
        previous: &Partition,
    ) -> Result<f64> {
        Ok(match cfg.selection {
            SelectionMode::GroundTruthNmi => {
                let truth = self.graph.labels().ok_or_else(|| {
                    Error::Config("ground-truth selection needs node labels".into())
                })?;
                nmi(truth, c.partition.labels())?
            }
            SelectionMode::InternalCost => -(c.intra - gamma * c.inter),
            SelectionMode::ConsecutiveNmi => nmi(previous.labels(), c.partition.labels())?,
        })
    }

    /// One filter-design / re-clustering round.
    pub fn step(&self, state: &State, cfg: &RunConfig) -> Result<(State, IterationRecord)> {
        let s = self.bank.s_matrix(
            &state.partition,
            &state.volumes,
            state.gamma,
            cfg.t_order,
            cfg.c_form,
        )?;
        let candidates = candidate_filters(&s)?;
        let outcomes: Vec<Option<(Clustered, f64)>> = candidates
            .filters
            .par_iter()
            .enumerate()
            .map(|(m, h)| {
                let filtered = self.bank.filter(h);
                match self.cluster(&filtered, cfg, derive_seed(cfg.seed, 1 + m as u64)) {
                    Ok(c) => {
                        let score = self.score(cfg, &c, state.gamma, &state.partition)?;
                        Ok(Some((c, score)))
                    }
                    Err(Error::Degenerate(_)) => Ok(None),
                    Err(e) => Err(e),
                }
            })
            .collect::<Result<_>>()?;

        let mut chosen: Option<usize> = None;
        for (m, o) in outcomes.iter().enumerate() {
            if let Some((_, score)) = o {
                let better = match chosen {
                    None => true,
                    Some(b) => *score > outcomes[b].as_ref().expect("chosen is scored").1,
                };
                if better {
                    chosen = Some(m);
                }
            }
        }
        let chosen = chosen.ok_or_else(|| {
            Error::degenerate("every candidate filter produced a degenerate partition")
        })?;

        let record = IterationRecord {
            candidate_scores: outcomes
                .iter()
                .map(|o| o.as_ref().map(|(_, s)| *s))
                .collect(),
            candidate_costs: outcomes
                .iter()
                .map(|o| o.as_ref().map(|(c, _)| c.intra - state.gamma * c.inter))
                .collect(),
            s_eigenvalues: candidates.eigenvalues.clone(),
            chosen,
            gamma: state.gamma,
            score: outcomes[chosen].as_ref().expect("chosen is scored").1,
            cost: {
                let c = &outcomes[chosen].as_ref().expect("chosen is scored").0;
                c.intra - state.gamma * c.inter
            },
        };

        let h = candidates.filters[chosen].clone();
        let (best, score) = outcomes
            .into_iter()
            .nth(chosen)
            .flatten()
            .expect("chosen is scored");
        let gamma = if cfg.recompute_gamma && matches!(cfg.gamma_mode, GammaMode::AdaptiveRatio) {
            let filtered = self.bank.filter(&h);
            match select_gamma(&filtered, &best.partition, &best.volumes, cfg.c_form) {
                Ok(g) => g,
                Err(Error::Degenerate(_)) => state.gamma,
                Err(e) => return Err(e),
            }
        } else {
            state.gamma
        };
        let next = State {
            partition: best.partition,
            volumes: best.volumes,
            h,
            gamma,
            score,
        };
        Ok((next, record))
    }

    pub fn run(&self, cfg: &RunConfig) -> Result<RunResult> {
        let mut state = self.initial_state(cfg)?;
        let initial_metrics = self
            .graph
            .labels()
            .map(|truth| MetricReport::compare(truth, state.partition.labels()))
            .transpose()?;
        let mut history = Vec::new();
        let mut converged = false;
        while history.len() < cfg.max_outer_iters {
            let (next, record) = self.step(&state, cfg)?;
            let delta = (next.score - state.score).abs();
            history.push(record);
            state = next;
            if delta <= cfg.convergence_tol {
                converged = true;
                break;
            }
        }
        let metrics = self.report(&state)?;
        Ok(RunResult {
            method: "grafica".into(),
            config: Some(cfg.clone()),
            partition: state.partition,
            h: state.h,
            gamma: Some(state.gamma),
            iterations: history.len(),
            history,
            metrics,
            initial_metrics,
            converged,
        })
    }

    fn report(&self, state: &State) -> Result<Option<MetricReport>> {
        let Some(truth) = self.graph.labels() else {
            return Ok(None);
        };
        let mut m = MetricReport::compare(truth, state.partition.labels())?;
        let filtered = self.bank.filter(&state.h);
        m.cost = crate::metrics::objective_cost(&filtered, &state.partition, state.gamma).ok();
        Ok(Some(m))
    }
}

struct Clustered {
    partition: Partition,
    volumes: Vec<f64>,
    intra: f64,
    inter: f64,
}

/// Alternation state carried between outer iterations.
#[derive(Debug, Clone)]
pub struct State {
    pub partition: Partition,
    pub volumes: Vec<f64>,
    pub h: FilterCoefficients,
    pub gamma: f64,
    /// Selection score of the current partition (higher is better).
    pub score: f64,
}

pub fn initial_partition(graph: &AttributedGraph, cfg: &RunConfig) -> Result<Partition> {
    Prepared::new(graph)?.initial_partition(cfg)
}

pub fn grafica_run(graph: &AttributedGraph, cfg: &RunConfig) -> Result<RunResult> {
    Prepared::new(graph)?.run(cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Baseline {
    /// k-means on the raw attribute rows.
    KmeansAttrs,
    /// Spectral clustering of the attribute dissimilarity graph alone.
    ScAttrs,
    /// Spectral clustering of the graph alone (bottom eigenvectors of `L_n`).
    ScGraph,
}

impl Baseline {
    pub fn as_str(&self) -> &'static str {
        match self {
            Baseline::KmeansAttrs => "kmeans-attrs",
            Baseline::ScAttrs => "sc-attrs",
            Baseline::ScGraph => "sc-graph",
        }
    }
}

pub fn run_baseline(
    graph: &AttributedGraph,
    method: Baseline,
    k: usize,
    seed: u64,
    kmeans: &KMeansOptions,
) -> Result<RunResult> {
    if k == 0 || k > graph.n_nodes() {
        return Err(Error::Config(format!(
            "k = {k} must be in 1..={}",
            graph.n_nodes()
        )));
    }
    let seed = derive_seed(seed, 0);
    let partition = match method {
        Baseline::KmeansAttrs => kmeans_fit(graph.attributes(), k, kmeans, seed)?.partition,
        Baseline::ScAttrs => {
            let dg = dissimilarity_matrix(graph.attributes())?;
            let a_n = normalize_adjacency(graph);
            let emb = spectral_embed(&dg, &a_n, 0.0, k)?;
            kmeans_fit(&emb.vectors, k, kmeans, seed)?.partition
        }
        Baseline::ScGraph => {
            let spectrum = eig_sym(&normalized_laplacian(graph))?;
            kmeans_fit(&spectrum.leading(k), k, kmeans, seed)?.partition
        }
    };
    let metrics = graph
        .labels()
        .map(|truth| MetricReport::compare(truth, partition.labels()))
        .transpose()?;
    Ok(RunResult {
        method: method.as_str().into(),
        config: None,
        partition,
        h: FilterCoefficients::identity(1),
        gamma: None,
        history: Vec::new(),
        metrics,
        initial_metrics: None,
        converged: true,
        iterations: 0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub t_order: usize,
    pub alpha: f64,
    pub nmi: Option<f64>,
    pub ari: Option<f64>,
    /// Objective value of the final partition at the run's `gamma`.
    pub final_cost: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub h: FilterCoefficients,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// Index of the best row: highest NMI when labels exist, otherwise the
    /// lowest final cost.
    pub best: usize,
    pub best_result: RunResult,
}

/// One run per `(T, alpha)` cell, all with the base configuration's seed.
pub fn sweep(
    graph: &AttributedGraph,
    base: &RunConfig,
    t_grid: &[usize],
    alpha_grid: &[f64],
) -> Result<SweepTable> {
    if t_grid.is_empty() || alpha_grid.is_empty() {
        return Err(Error::Config("sweep grids must be non-empty".into()));
    }
    let prepared = Prepared::new(graph)?;
    let cells: Vec<(usize, f64)> = t_grid
        .iter()
        .flat_map(|&t| alpha_grid.iter().map(move |&a| (t, a)))
        .collect();
    let results: Vec<RunResult> = cells
        .par_iter()
        .map(|&(t_order, alpha)| {
            let cfg = RunConfig {
                t_order,
                alpha,
                ..base.clone()
            };
            prepared.run(&cfg)
        })
        .collect::<Result<_>>()?;

    let rows: Vec<SweepRow> = cells
        .iter()
        .zip(&results)
        .map(|(&(t_order, alpha), r)| SweepRow {
            t_order,
            alpha,
            nmi: r.metrics.map(|m| m.nmi),
            ari: r.metrics.map(|m| m.ari),
            final_cost: r
                .metrics
                .and_then(|m| m.cost)
                .or_else(|| r.history.last().map(|h| h.cost)),
            iterations: r.iterations,
            converged: r.converged,
            h: r.h.clone(),
        })
        .collect();

    let key = |row: &SweepRow| match row.nmi {
        Some(v) => v,
        None => -row.final_cost.unwrap_or(f64::INFINITY),
    };
    let mut best = 0;
    for (i, row) in rows.iter().enumerate().skip(1) {
        if key(row) > key(&rows[best]) {
            best = i;
        }
    }
    let best_result = results.into_iter().nth(best).expect("non-empty grid");
    Ok(SweepTable {
        rows,
        best,
        best_result,
    })
}
