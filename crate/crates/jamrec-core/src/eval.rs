//! Experiment orchestration: train/test runs across jammer switching times,
//! aggregate accuracy curves, per-policy accuracies and confusion matrices.
//!
//! Every run derives its own seeds from the master seed, so results are
//! reproducible bit-for-bit regardless of how runs are scheduled across
//! worker threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::encoding::{make_training_chunks, test_window};
use crate::error::{Error, Result};
use crate::gru::{predict_policy, train, GruParams, Hyperparams};
use crate::seed::derive_seed;
use crate::sim::{run_episode, PolicyKind, SimConfig, SlotRecord, POLICY_COUNT};

/// Stream labels for per-run seed derivation.
const STREAM_TRAIN_SIM: u64 = 1;
const STREAM_TRAIN_MODEL: u64 = 2;
const STREAM_TEST_SIM: u64 = 3;

/// Full experiment description: the simulation template, network
/// hyperparameters and the sweep protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// Simulation template; `switch_period` and `seed` are overridden per
    /// sweep point and run.
    pub sim: SimConfig,
    pub hyper: Hyperparams,
    /// Switching periods to sweep.
    pub k_values: Vec<usize>,
    /// Independent runs per switching period.
    pub n_runs: usize,
    /// Slots per test episode.
    pub test_len: usize,
    /// Test window length fed to the classifier (C).
    pub window_len: usize,
    /// Training chunk length (P).
    pub chunk_len: usize,
    /// Master seed from which all per-run seeds derive.
    pub master_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            sim: SimConfig::default(),
            hyper: Hyperparams::default(),
            k_values: (0..10).map(|i| 5 + 20 * i).collect(),
            n_runs: 100,
            test_len: 2000,
            window_len: 20,
            chunk_len: 20,
            master_seed: 1,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        self.hyper.validate()?;
        if self.k_values.is_empty() {
            return Err(Error::InvalidConfig("k_values must be non-empty".into()));
        }
        if self.k_values.iter().any(|&k| k == 0) {
            return Err(Error::InvalidConfig("k_values must be positive".into()));
        }
        if self.n_runs == 0 {
            return Err(Error::InvalidConfig("n_runs must be positive".into()));
        }
        if self.window_len == 0 {
            return Err(Error::InvalidConfig("window_len must be positive".into()));
        }
        if self.chunk_len == 0 || self.chunk_len > self.sim.episode_len {
            return Err(Error::InvalidConfig(format!(
                "chunk_len must be in 1..={}",
                self.sim.episode_len
            )));
        }
        if self.test_len <= self.window_len {
            return Err(Error::InvalidConfig(format!(
                "test_len ({}) must exceed window_len ({})",
                self.test_len, self.window_len
            )));
        }
        Ok(())
    }
}

/// 5x5 confusion counts; rows are true policies, columns predictions.
pub type ConfusionMatrix = [[u64; POLICY_COUNT]; POLICY_COUNT];

/// Aggregated results for one switching period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KReport {
    pub k: usize,
    /// Pooled accuracy over all runs (trace of `confusion` over its total).
    pub mean_accuracy: f64,
    /// Sample standard deviation of per-run accuracies (0 for a single run).
    pub std_accuracy: f64,
    /// Diagonal over row sum, per policy; `None` for an empty row.
    pub per_policy_accuracy: [Option<f64>; POLICY_COUNT],
    /// Confusion counts pooled over all runs.
    pub confusion: ConfusionMatrix,
}

/// Accuracy curve and confusion matrices over the swept switching periods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_runs: usize,
    pub entries: Vec<KReport>,
}

impl EvalReport {
    pub fn entry(&self, k: usize) -> Option<&KReport> {
        self.entries.iter().find(|e| e.k == k)
    }
}

/// Classify every slot of a test trace that has a full window of history.
///
/// Slots `window_len - 1 ..` are evaluated, including slots right after
/// policy switches; returns `(true label, predicted label)` pairs in slot
/// order.
pub fn evaluate_run(
    params: &GruParams,
    test_trace: &[SlotRecord],
    n_channels: usize,
    window_len: usize,
) -> Result<Vec<(PolicyKind, PolicyKind)>> {
    if test_trace.len() < window_len {
        return Err(Error::InvalidArgument(format!(
            "test trace of {} slots is shorter than the window ({window_len})",
            test_trace.len()
        )));
    }
    let mut pairs = Vec::with_capacity(test_trace.len() + 1 - window_len);
    for t in window_len - 1..test_trace.len() {
        let window = test_window(test_trace, t, n_channels, window_len)?;
        let predicted = predict_policy(&window, params)?;
        pairs.push((test_trace[t].label, predicted));
    }
    Ok(pairs)
}

/// Fraction of pairs with matching prediction.
pub fn accuracy(pairs: &[(PolicyKind, PolicyKind)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("no prediction pairs".into()));
    }
    let correct = pairs.iter().filter(|(t, p)| t == p).count();
    Ok(correct as f64 / pairs.len() as f64)
}

/// Count predictions per (true, predicted) cell.
pub fn confusion_matrix(pairs: &[(PolicyKind, PolicyKind)]) -> ConfusionMatrix {
    let mut counts = [[0u64; POLICY_COUNT]; POLICY_COUNT];
    for &(true_label, predicted) in pairs {
        counts[true_label.code() as usize][predicted.code() as usize] += 1;
    }
    counts
}

/// Per-policy accuracy: diagonal entry over row sum; `None` where a policy
/// was never evaluated.
pub fn per_policy_accuracy(confusion: &ConfusionMatrix) -> [Option<f64>; POLICY_COUNT] {
    let mut out = [None; POLICY_COUNT];
    for (i, row) in confusion.iter().enumerate() {
        let total: u64 = row.iter().sum();
        if total > 0 {
            out[i] = Some(row[i] as f64 / total as f64);
        }
    }
    out
}

/// Normalize a confusion row to parts-per-hundred (rounded).
pub fn row_normalized(confusion: &ConfusionMatrix) -> [[f64; POLICY_COUNT]; POLICY_COUNT] {
    let mut out = [[0.0; POLICY_COUNT]; POLICY_COUNT];
    for (i, row) in confusion.iter().enumerate() {
        let total: u64 = row.iter().sum();
        if total > 0 {
            for (j, &count) in row.iter().enumerate() {
                out[i][j] = 100.0 * count as f64 / total as f64;
            }
        }
    }
    out
}

/// One train/evaluate run at a given switching period.
///
/// A fresh training episode is simulated, a fresh model trained on it, and a
/// fresh test episode evaluated; all three streams derive from the master
/// seed, the switching period and the run index.
pub fn single_run(
    config: &ExperimentConfig,
    k: usize,
    run_idx: usize,
) -> Result<Vec<(PolicyKind, PolicyKind)>> {
    let mut train_sim = config.sim.clone();
    train_sim.switch_period = k;
    train_sim.seed = derive_seed(config.master_seed, &[STREAM_TRAIN_SIM, k as u64, run_idx as u64]);
    let train_trace = run_episode(&train_sim, &mut ChaCha8Rng::seed_from_u64(train_sim.seed))?;
    let chunks = make_training_chunks(&train_trace, train_sim.n_channels, config.chunk_len)?;

    let mut hyper = config.hyper.clone();
    hyper.seed = derive_seed(config.master_seed, &[STREAM_TRAIN_MODEL, k as u64, run_idx as u64]);
    let (params, _history) = train(&chunks, &hyper)?;

    let mut test_sim = config.sim.clone();
    test_sim.switch_period = k;
    test_sim.episode_len = config.test_len;
    test_sim.seed = derive_seed(config.master_seed, &[STREAM_TEST_SIM, k as u64, run_idx as u64]);
    let test_trace = run_episode(&test_sim, &mut ChaCha8Rng::seed_from_u64(test_sim.seed))?;

    evaluate_run(&params, &test_trace, test_sim.n_channels, config.window_len)
}

/// Sweep the switching periods: `n_runs` independent train/test runs per K,
/// pooled into one confusion matrix and accuracy summary per K.
///
/// Runs execute in parallel; aggregation is an order-independent reduction,
/// so the report is deterministic given the master seed.
pub fn sweep_switching_times(config: &ExperimentConfig) -> Result<EvalReport> {
    config.validate()?;
    let jobs: Vec<(usize, usize)> = config
        .k_values
        .iter()
        .flat_map(|&k| (0..config.n_runs).map(move |run| (k, run)))
        .collect();

    let outcomes: Vec<Result<(usize, ConfusionMatrix, f64)>> = jobs
        .par_iter()
        .map(|&(k, run)| {
            let pairs = single_run(config, k, run).map_err(|e| {
                Error::InvalidArgument(format!("run {run} at K={k} failed: {e}"))
            })?;
            Ok((k, confusion_matrix(&pairs), accuracy(&pairs)?))
        })
        .collect();

    let mut entries = Vec::with_capacity(config.k_values.len());
    for &k in &config.k_values {
        let mut pooled: ConfusionMatrix = [[0; POLICY_COUNT]; POLICY_COUNT];
        let mut run_accuracies = Vec::with_capacity(config.n_runs);
        for (job, outcome) in jobs.iter().zip(&outcomes) {
            if job.0 != k {
                continue;
            }
            match outcome {
                Ok((_, confusion, acc)) => {
                    for (dst, src) in pooled.iter_mut().zip(confusion) {
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d += s;
                        }
                    }
                    run_accuracies.push(*acc);
                }
                Err(e) => return Err(Error::InvalidArgument(e.to_string())),
            }
        }
        let total: u64 = pooled.iter().flatten().sum();
        let diag: u64 = (0..POLICY_COUNT).map(|i| pooled[i][i]).sum();
        let mean_accuracy = diag as f64 / total as f64;
        let std_accuracy = sample_std(&run_accuracies);
        entries.push(KReport {
            k,
            mean_accuracy,
            std_accuracy,
            per_policy_accuracy: per_policy_accuracy(&pooled),
            confusion: pooled,
        });
    }

    Ok(EvalReport { n_runs: config.n_runs, entries })
}

fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
        / (values.len() - 1) as f64;
    var.sqrt()
}
