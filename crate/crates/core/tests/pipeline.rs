use grafica::clustering::KMeansOptions;
use grafica::io::{generate_sbm, SbmParams};
use grafica::metrics::nmi;
use grafica::pipeline::{
    grafica_run, initial_partition, run_baseline, sweep, Baseline, GammaMode, Prepared, RunConfig,
    SelectionMode,
};
use grafica::Error;

fn sbm(seed: u64) -> grafica::graph::AttributedGraph {
    generate_sbm(&SbmParams {
        n_nodes: 80,
        k: 3,
        p_in: 0.3,
        p_out: 0.03,
        attr_dim: 4,
        center_separation: 4.0,
        attr_noise_sigma: 1.0,
        seed,
    })
    .unwrap()
}

fn config(selection: SelectionMode) -> RunConfig {
    RunConfig {
        alpha: 0.05,
        selection,
        seed: 3,
        kmeans: KMeansOptions {
            restarts: 5,
            max_iter: 100,
        },
        ..RunConfig::new(3, 4)
    }
}

#[test]
fn history_respects_argmax_and_filter_invariants() {
    let g = sbm(1);
    for selection in [
        SelectionMode::GroundTruthNmi,
        SelectionMode::InternalCost,
        SelectionMode::ConsecutiveNmi,
    ] {
        let cfg = config(selection);
        let r = grafica_run(&g, &cfg).unwrap();
        assert_eq!(r.history.len(), r.iterations);
        assert!(r.iterations >= 1 && r.iterations <= cfg.max_outer_iters);
        assert!((r.h.coeffs().iter().map(|c| c * c).sum::<f64>() - 1.0).abs() < 1e-10);
        assert_eq!(r.h.order(), cfg.t_order);
        for rec in &r.history {
            assert!(rec.chosen < cfg.t_order);
            assert_eq!(rec.candidate_scores.len(), cfg.t_order);
            let best = rec
                .candidate_scores
                .iter()
                .flatten()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(rec.score, best);
            assert_eq!(rec.candidate_scores[rec.chosen], Some(best));
            if selection == SelectionMode::InternalCost {
                let min_cost = rec
                    .candidate_costs
                    .iter()
                    .flatten()
                    .copied()
                    .fold(f64::INFINITY, f64::min);
                assert_eq!(rec.cost, min_cost);
            }
        }
    }
}

#[test]
fn adopted_filter_is_a_candidate_of_the_last_step() {
    let g = sbm(2);
    let cfg = config(SelectionMode::GroundTruthNmi);
    let prepared = Prepared::new(&g).unwrap();
    let state = prepared.initial_state(&cfg).unwrap();
    let (next, rec) = prepared.step(&state, &cfg).unwrap();
    let s = prepared
        .bank()
        .s_matrix(
            &state.partition,
            &state.volumes,
            state.gamma,
            cfg.t_order,
            cfg.c_form,
        )
        .unwrap();
    let cands = grafica::filter::candidate_filters(&s).unwrap();
    assert_eq!(cands.filters[rec.chosen], next.h);
    assert_eq!(rec.s_eigenvalues, cands.eigenvalues);
}

#[test]
fn first_order_filter_runs() {
    let g = sbm(3);
    let cfg = RunConfig {
        t_order: 1,
        ..config(SelectionMode::InternalCost)
    };
    let a = grafica_run(&g, &cfg).unwrap();
    let b = grafica_run(&g, &cfg).unwrap();
    assert_eq!(a.h.coeffs(), &[1.0]);
    assert_eq!(a, b);
}

#[test]
fn runs_are_deterministic() {
    let g = sbm(4);
    let cfg = config(SelectionMode::GroundTruthNmi);
    let a = grafica_run(&g, &cfg).unwrap();
    let b = grafica_run(&g, &cfg).unwrap();
    assert_eq!(a, b);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let c = pool.install(|| grafica_run(&g, &cfg).unwrap());
    assert_eq!(a, c);
}

#[test]
fn planted_blocks_are_recovered() {
    let g = sbm(5);
    let r = grafica_run(&g, &config(SelectionMode::InternalCost)).unwrap();
    assert!(r.metrics.unwrap().nmi >= 0.95, "{:?}", r.metrics);
}

#[test]
fn iteration_cap_is_respected() {
    let g = sbm(6);
    let cfg = RunConfig {
        max_outer_iters: 1,
        ..config(SelectionMode::GroundTruthNmi)
    };
    let r = grafica_run(&g, &cfg).unwrap();
    assert_eq!(r.iterations, 1);
}

#[test]
fn fixed_gamma_is_kept() {
    let g = sbm(7);
    let cfg = RunConfig {
        gamma_mode: GammaMode::Fixed(0.25),
        ..config(SelectionMode::InternalCost)
    };
    let r = grafica_run(&g, &cfg).unwrap();
    assert_eq!(r.gamma, Some(0.25));
    assert!(r.history.iter().all(|h| h.gamma == 0.25));
}

#[test]
fn ground_truth_selection_needs_labels() {
    let g = sbm(8);
    let unlabeled =
        grafica::graph::AttributedGraph::new(g.adjacency().clone(), g.attributes().clone(), None)
            .unwrap();
    let err = grafica_run(&unlabeled, &config(SelectionMode::GroundTruthNmi)).unwrap_err();
    assert!(matches!(err, Error::Config(_)), "{err}");
    let r = grafica_run(&unlabeled, &config(SelectionMode::InternalCost)).unwrap();
    assert!(r.metrics.is_none());
}

#[test]
fn invalid_configs_are_rejected() {
    let g = sbm(9);
    for cfg in [
        RunConfig {
            t_order: 0,
            ..config(SelectionMode::InternalCost)
        },
        RunConfig {
            alpha: -0.1,
            ..config(SelectionMode::InternalCost)
        },
        RunConfig {
            convergence_tol: 0.0,
            ..config(SelectionMode::InternalCost)
        },
        RunConfig {
            k: 500,
            ..config(SelectionMode::InternalCost)
        },
    ] {
        assert!(matches!(grafica_run(&g, &cfg), Err(Error::Config(_))));
    }
}

#[test]
fn single_cluster_initial_partition() {
    let g = sbm(10);
    let cfg = RunConfig {
        k: 1,
        ..config(SelectionMode::InternalCost)
    };
    let p = initial_partition(&g, &cfg).unwrap();
    assert!(p.labels().iter().all(|&l| l == 0));
}

#[test]
fn baselines_recover_agreeing_structure() {
    let g = generate_sbm(&SbmParams {
        n_nodes: 60,
        k: 2,
        p_in: 0.5,
        p_out: 0.0,
        attr_dim: 3,
        center_separation: 10.0,
        attr_noise_sigma: 0.5,
        seed: 1,
    })
    .unwrap();
    for method in [Baseline::KmeansAttrs, Baseline::ScAttrs, Baseline::ScGraph] {
        let r = run_baseline(&g, method, 2, 0, &KMeansOptions::default()).unwrap();
        assert_eq!(r.method, method.as_str());
        let truth = g.labels().unwrap();
        assert_eq!(nmi(truth, r.partition.labels()).unwrap(), 1.0, "{method:?}");
    }
}

#[test]
fn sweep_picks_best_cell_and_matches_single_runs() {
    let g = sbm(11);
    let base = config(SelectionMode::GroundTruthNmi);
    let table = sweep(&g, &base, &[2, 3], &[0.0, 0.1]).unwrap();
    assert_eq!(table.rows.len(), 4);
    let best = &table.rows[table.best];
    assert!(table.rows.iter().all(|r| r.nmi <= best.nmi));

    let single = sweep(&g, &base, &[base.t_order], &[base.alpha]).unwrap();
    assert_eq!(single.best_result, grafica_run(&g, &base).unwrap());
    assert_eq!(sweep(&g, &base, &[2, 3], &[0.0, 0.1]).unwrap(), table);
    assert!(matches!(
        sweep(&g, &base, &[], &[0.0]),
        Err(Error::Config(_))
    ));
}
