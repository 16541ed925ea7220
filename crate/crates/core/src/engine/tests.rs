use std::time::Duration;

use proptest::prelude::*;

use super::*;
use crate::dataset::{synth_blobs, BlobSpec};
use crate::model::{Architecture, ProbVector, TrainHyper};
use crate::uncertainty::lcu;

fn blobs() -> Arc<Dataset> {
    Arc::new(synth_blobs(&BlobSpec { classes: 3, dim: 8, per_class: 60, spread: 0.3, seed: 1 }).unwrap())
}

fn config(metric: Metric) -> RunConfig {
    RunConfig {
        metric,
        per_round_k: 5,
        seed_size: 6,
        test_size: 40,
        pool_size: None,
        max_rounds: Some(4),
        epsilon: None,
        hyper: TrainHyper { learning_rate: 0.5, minibatch_size: 8, epochs_per_round: 3, l2: 0.0 },
        arch: Architecture::Softmax,
        rng_seed: 11,
        cold_start: false,
        scan: ScanMode::Global,
    }
}

#[test]
fn one_round_moves_k_examples() {
    let ds = blobs();
    let cfg = RunConfig { pool_size: Some(5), per_round_k: 2, ..config(Metric::Entropy) };
    let mut engine = Engine::new(cfg, ds.clone()).unwrap();
    let pool_before = engine.pool().to_vec();
    let record = engine.step_round(&mut SimulatedOracle::new(ds)).unwrap();
    assert_eq!(engine.pool().len(), 3);
    assert_eq!(engine.labeled().len(), 8);
    assert_eq!(record.selected_ids.len(), 2);
    assert_eq!(record.labeled_count, 6);
    for id in &record.selected_ids {
        assert!(pool_before.contains(id));
        assert!(engine.labeled().contains_key(id));
        assert!(!engine.pool().contains(id));
    }
}

#[test]
fn random_metric_is_reproducible() {
    let ds = blobs();
    let a = run(config(Metric::RANDOM), ds.clone()).unwrap();
    let b = run(config(Metric::RANDOM), ds.clone()).unwrap();
    assert_eq!(a.without_timing(), b.without_timing());
    let other = run(config(Metric::Random { stream: 3 }), ds).unwrap();
    assert_ne!(a.records[0].selected_ids, other.records[0].selected_ids);
}

#[test]
fn least_confidence_matches_full_rescoring() {
    let ds = blobs();
    let cfg = RunConfig { max_rounds: Some(1), per_round_k: 7, ..config(Metric::LeastConfidence) };
    let mut engine = Engine::new(cfg, ds.clone()).unwrap();
    let pool = engine.pool().to_vec();
    let record = engine.step_round(&mut SimulatedOracle::new(ds.clone())).unwrap();

    // independent scan: score everything, full sort, take the first 7
    let mut scored: Vec<(f64, usize)> =
        pool.iter().map(|&id| (lcu(&engine.model().predict_proba(&ds.examples()[id].features).unwrap()), id)).collect();
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    let mut expected: Vec<usize> = scored[..7].iter().map(|p| p.1).collect();
    expected.sort();
    assert_eq!(record.selected_ids, expected);
}

#[test]
fn epsilon_one_stops_after_first_round() {
    let cfg = RunConfig { epsilon: Some(1.0), max_rounds: None, ..config(Metric::Entropy) };
    let trace = run(cfg, blobs()).unwrap();
    assert_eq!(trace.records.len(), 1);
    assert_eq!(trace.stop_reason, Some(StopReason::TrainingErrorBound));
}

#[test]
fn round_limit_gives_exact_record_count() {
    let cfg = RunConfig { max_rounds: Some(10), per_round_k: 3, ..config(Metric::SmallestMargin) };
    let trace = run(cfg, blobs()).unwrap();
    assert_eq!(trace.records.len(), 10);
    assert_eq!(trace.stop_reason, Some(StopReason::MaxRounds));
    let counts: Vec<usize> = trace.records.iter().map(|r| r.labeled_count).collect();
    assert_eq!(counts, (0..10).map(|r| 6 + 3 * r).collect::<Vec<_>>());
}

#[test]
fn pool_exhaustion() {
    let cfg = RunConfig { pool_size: Some(7), per_round_k: 3, max_rounds: Some(10), ..config(Metric::LargestMargin) };
    let trace = run(cfg, blobs()).unwrap();
    let sizes: Vec<usize> = trace.records.iter().map(|r| r.selected_ids.len()).collect();
    assert_eq!(sizes, [3, 3, 1]);
    assert_eq!(trace.stop_reason, Some(StopReason::PoolExhausted));
}

#[test]
fn empty_pool_still_records_a_round() {
    let ds = blobs();
    let cfg = RunConfig { pool_size: Some(0), ..config(Metric::Entropy) };
    let trace = run(cfg, ds).unwrap();
    assert_eq!(trace.records.len(), 1);
    assert!(trace.records[0].selected_ids.is_empty());
    assert_eq!(trace.stop_reason, Some(StopReason::PoolExhausted));
}

#[test]
fn simulated_labels_equal_ground_truth() {
    let ds = blobs();
    let mut engine = Engine::new(config(Metric::Entropy), ds.clone()).unwrap();
    let trace = engine.run_to_end(&mut SimulatedOracle::new(ds.clone())).unwrap();
    for (&id, &label) in engine.labeled() {
        assert_eq!(label, ds.examples()[id].true_label);
    }
    assert!(trace.records.iter().all(|r| r.oracle_agreement == 1.0));
}

#[test]
fn disjointness_and_growth_every_round() {
    let ds = blobs();
    let mut engine =
        Engine::new(RunConfig { max_rounds: Some(6), ..config(Metric::LeastConfidence) }, ds.clone()).unwrap();
    let mut oracle = SimulatedOracle::new(ds.clone());
    let pool0 = engine.pool().len();
    for r in 1..=6 {
        engine.step_round(&mut oracle).unwrap();
        engine.check_invariants().unwrap();
        assert_eq!(engine.labeled().len(), 6 + 5 * r);
        assert_eq!(engine.pool().len(), pool0 - 5 * r);
        assert_eq!(engine.labeled().len() + engine.pool().len() + engine.test_ids().len(), ds.len());
        let test = engine.test_ids();
        assert!(engine.records().last().unwrap().selected_ids.iter().all(|id| !test.contains(id)));
    }
    assert!(engine.is_finished());
    assert!(matches!(engine.step_round(&mut oracle), Err(EngineError::Finished(StopReason::MaxRounds))));
}

struct Unresponsive;

impl Oracle for Unresponsive {
    fn label(&mut self, _: &[usize]) -> Result<Vec<usize>, OracleError> {
        Err(OracleError::Timeout)
    }
}

#[test]
fn oracle_timeout_leaves_state_unchanged() {
    let ds = blobs();
    let mut engine = Engine::new(config(Metric::Entropy), ds.clone()).unwrap();
    let labeled = engine.labeled().clone();
    let pool = engine.pool().to_vec();
    let model = engine.model().clone();
    assert!(matches!(engine.step_round(&mut Unresponsive), Err(EngineError::OracleTimeout)));
    assert_eq!(engine.labeled(), &labeled);
    assert_eq!(engine.pool(), pool);
    assert_eq!(engine.model(), &model);
    assert!(engine.records().is_empty());
    assert!(engine.pending_query().is_none());

    // the retry is the round that would have run without the timeout
    let retried = engine.step_round(&mut SimulatedOracle::new(ds.clone())).unwrap();
    let fresh = run(RunConfig { max_rounds: Some(1), ..config(Metric::Entropy) }, ds).unwrap();
    assert_eq!(retried.selected_ids, fresh.records[0].selected_ids);
}

#[test]
fn queued_oracle_drives_a_round() {
    let ds = blobs();
    let (mut oracle, handle) = QueuedOracle::new(Duration::from_secs(30));
    let truth = ds.clone();
    let answerer = std::thread::spawn(move || {
        let ids = handle.wait_for_queries(Duration::from_secs(30));
        for id in ids {
            // a careless annotator: everything is class 0
            handle.answer(id, 0).unwrap();
        }
        truth.len()
    });
    let mut engine = Engine::new(config(Metric::Entropy), ds.clone()).unwrap();
    let record = engine.step_round(&mut oracle).unwrap();
    answerer.join().unwrap();
    assert_eq!(record.selected_labels, vec![0; 5]);
    let truly_zero = record.selected_ids.iter().filter(|&&id| ds.examples()[id].true_label == 0).count();
    assert_eq!(record.oracle_agreement, truly_zero as f64 / 5.0);
    assert!(record.selected_ids.iter().all(|id| engine.labeled()[id] == 0));
}

#[test]
fn split_round_protocol_errors() {
    let ds = blobs();
    let mut engine = Engine::new(config(Metric::Entropy), ds).unwrap();
    assert!(matches!(engine.complete_round(&[]), Err(EngineError::NoPendingRound)));
    let query = engine.begin_round().unwrap().to_vec();
    assert_eq!(engine.pending_query().unwrap(), query);
    assert!(matches!(engine.begin_round(), Err(EngineError::RoundPending)));
    assert!(matches!(engine.complete_round(&[0]), Err(EngineError::LabelCount { expected: 5, got: 1 })));
    assert!(matches!(
        engine.complete_round(&[0, 1, 2, 0, 9]),
        Err(EngineError::LabelOutOfRange { label: 9, classes: 3 })
    ));
    // still pending after rejected answers
    assert_eq!(engine.complete_round(&[0, 1, 2, 0, 1]).unwrap().selected_labels, vec![0, 1, 2, 0, 1]);
    assert!(engine.pending_query().is_none());
}

/// Predicts uniformly no matter what it is trained on.
#[derive(Clone)]
struct Uniform {
    classes: usize,
    dim: usize,
}

impl Classifier for Uniform {
    fn num_classes(&self) -> usize {
        self.classes
    }
    fn feature_dim(&self) -> usize {
        self.dim
    }
    fn predict_proba(&self, _: &[f64]) -> Result<ProbVector, ModelError> {
        ProbVector::uniform(self.classes)
    }
    fn fit_round(&mut self, _: &[Sample<'_>], _: &TrainHyper, _: u64) -> Result<f64, ModelError> {
        Ok((self.classes as f64).ln())
    }
    fn reinitialize(&mut self) {}
}

#[test]
fn uniform_predictions_make_every_measure_pick_lowest_ids() {
    let ds = blobs();
    let mut picks = Vec::new();
    for metric in [Metric::LargestMargin, Metric::SmallestMargin, Metric::LeastConfidence, Metric::Entropy] {
        let model = Uniform { classes: 3, dim: 8 };
        let mut engine = Engine::with_model(RunConfig { metric, ..config(metric) }, ds.clone(), model).unwrap();
        let lowest: Vec<usize> = engine.pool()[..5].to_vec();
        let record = engine.step_round(&mut SimulatedOracle::new(ds.clone())).unwrap();
        assert_eq!(record.selected_ids, lowest);
        picks.push(record.selected_ids);
    }
    assert!(picks.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn mismatched_model_rejected() {
    let ds = blobs();
    assert!(Engine::with_model(config(Metric::Entropy), ds, Uniform { classes: 4, dim: 8 }).is_err());
}

#[test]
fn cold_start_retrains_from_initialization() {
    let ds = blobs();
    let warm = run(config(Metric::Entropy), ds.clone()).unwrap();
    let cold_cfg = RunConfig { cold_start: true, ..config(Metric::Entropy) };
    let cold = run(cold_cfg.clone(), ds.clone()).unwrap();
    assert_eq!(cold.without_timing(), run(cold_cfg, ds).unwrap().without_timing());
    // the first round trains the same initial model either way
    assert_eq!(warm.records[0].selected_ids, cold.records[0].selected_ids);
    assert_ne!(warm.records[1].train_loss, cold.records[1].train_loss);
}

#[test]
fn batched_scan_covering_pool_equals_global() {
    let ds = blobs();
    let global = run(config(Metric::LeastConfidence), ds.clone()).unwrap();
    let batched =
        run(RunConfig { scan: ScanMode::Batched { batch: 10_000 }, ..config(Metric::LeastConfidence) }, ds.clone())
            .unwrap();
    let strip = |t: &RunTrace| t.records.iter().map(|r| r.selected_ids.clone()).collect::<Vec<_>>();
    assert_eq!(strip(&global), strip(&batched));
    let small =
        run(RunConfig { scan: ScanMode::Batched { batch: 16 }, ..config(Metric::LeastConfidence) }, ds).unwrap();
    assert!(small.records.iter().all(|r| r.selected_ids.len() == 5));
}

#[test]
fn trace_independent_of_thread_count() {
    let ds = blobs();
    let cfg = RunConfig { arch: Architecture::Mlp { hidden: 6 }, ..config(Metric::Entropy) };
    let traces: Vec<RunTrace> = [1, 2, 5]
        .iter()
        .map(|&n| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
            pool.install(|| run(cfg.clone(), ds.clone()).unwrap().without_timing())
        })
        .collect();
    assert!(traces.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn compare_aligns_runs() {
    let ds = blobs();
    let cmp =
        compare_runs(ds.clone(), &config(Metric::Entropy), &[Metric::LeastConfidence, Metric::RANDOM], &[1, 2, 3])
            .unwrap();
    assert_eq!(cmp.traces.len(), 6);
    assert!(cmp.traces.iter().all(|t| t.records.len() == 4));
    assert_eq!(cmp.accuracy.len(), 2);
    assert_eq!(cmp.accuracy[1].label, "random");
    for (m, series) in cmp.accuracy.iter().enumerate() {
        let group = &cmp.traces[m * 3..m * 3 + 3];
        for (i, &(round, mean)) in series.points.iter().enumerate() {
            assert_eq!(round, i + 1);
            let expected = group.iter().map(|t| t.records[i].test_accuracy).sum::<f64>() / 3.0;
            assert!((mean - expected).abs() < 1e-15);
        }
    }
    // shared split and initial model per seed: round 1 trains identically
    for s in 0..3 {
        let (a, b) = (&cmp.traces[s], &cmp.traces[3 + s]);
        assert_eq!(a.seed, b.seed);
        assert_eq!(a.records[0].test_accuracy, b.records[0].test_accuracy);
        assert_eq!(a.records[0].labeled_support, b.records[0].labeled_support);
    }
    assert!(compare_runs(ds.clone(), &config(Metric::Entropy), &[Metric::Entropy], &[1]).is_err());
    assert!(compare_runs(ds.clone(), &config(Metric::Entropy), &[Metric::Entropy, Metric::Entropy], &[1]).is_err());
    assert!(compare_runs(ds, &config(Metric::Entropy), &[Metric::Entropy, Metric::RANDOM], &[]).is_err());
}

proptest! {
    #[test]
    fn batched_select_properties(
        values in prop::collection::vec((0u8..6).prop_map(|v| v as f64), 1..60),
        k in 1usize..10,
        batch in 1usize..20,
    ) {
        let k = k.min(values.len());
        let chosen = batched_select(&values, k, batch);
        prop_assert_eq!(chosen.len(), k);
        prop_assert!(chosen.windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(batched_select(&values, k, values.len()), select_top_k(&values, k));
        // every chunk's own best is never beaten by a lower chunk member
        let chosen_min = chosen.iter().map(|&i| values[i]).fold(f64::INFINITY, f64::min);
        let global_top = select_top_k(&values, 1)[0];
        prop_assert!(values[global_top] >= chosen_min);
        prop_assert!(chosen.contains(&global_top));
    }
}
