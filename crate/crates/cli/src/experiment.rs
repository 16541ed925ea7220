//! `run` and `compare`.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use alearn::dataset::{BlobSpec, DataSpec};
use alearn::engine::{compare_runs, run, RunConfig, ScanMode};
use alearn::report::{
    emit_csv, emit_curves_svg, emit_json, mean_series, per_class_series, render_summary, summarize, AxesConfig,
};
use alearn::{Architecture, Dataset, Metric, RunTrace, TrainHyper};
use clap::{Args, ValueEnum};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DataKind {
    Mnist,
    Blobs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ArchKind {
    Softmax,
    Mlp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ScanKind {
    Global,
    Batched,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Softmax model on MNIST, minibatch 128, 5.3% of the pool per round.
    MnistSoftmax,
    /// One-hidden-layer MLP (128 units) on MNIST.
    MnistMlp,
    /// Softmax model on synthetic blobs, 4.2% of the pool per round.
    BlobsSoftmax,
}

/// Values a preset supplies; explicit flags win.
struct PresetValues {
    data: DataKind,
    arch: ArchKind,
    hidden: usize,
    lr: f64,
    minibatch: usize,
    epochs: usize,
    pool_fraction: Option<f64>,
}

impl Preset {
    fn values(self) -> PresetValues {
        match self {
            Preset::MnistSoftmax => PresetValues {
                data: DataKind::Mnist,
                arch: ArchKind::Softmax,
                hidden: DEFAULT_HIDDEN,
                lr: 0.1,
                minibatch: 128,
                epochs: 10,
                pool_fraction: Some(0.053),
            },
            Preset::MnistMlp => PresetValues {
                data: DataKind::Mnist,
                arch: ArchKind::Mlp,
                hidden: 128,
                lr: 0.1,
                minibatch: 32,
                epochs: 30,
                pool_fraction: None,
            },
            Preset::BlobsSoftmax => PresetValues {
                data: DataKind::Blobs,
                arch: ArchKind::Softmax,
                hidden: DEFAULT_HIDDEN,
                lr: 0.5,
                minibatch: 32,
                epochs: 10,
                pool_fraction: Some(0.042),
            },
        }
    }
}

const DEFAULT_HIDDEN: usize = 64;
const DEFAULT_K: usize = 10;
const DEFAULT_ROUNDS: usize = 10;

#[derive(Args, Debug, Clone)]
pub struct ExperimentArgs {
    /// Dataset [default: blobs, or the preset's]
    #[arg(long, value_enum)]
    pub data: Option<DataKind>,
    /// Directory holding the MNIST IDX files
    #[arg(long, env = "ALEARN_MNIST_DIR", default_value = "data/mnist")]
    pub mnist_dir: PathBuf,
    /// Keep only these MNIST digits, e.g. 0,1
    #[arg(long, value_delimiter = ',')]
    pub classes: Option<Vec<usize>>,
    /// Synthetic blobs: number of classes
    #[arg(long, default_value_t = 4)]
    pub blob_classes: usize,
    /// Synthetic blobs: feature dimension
    #[arg(long, default_value_t = 16)]
    pub blob_dim: usize,
    /// Synthetic blobs: examples per class
    #[arg(long, default_value_t = 500)]
    pub blob_per_class: usize,
    /// Synthetic blobs: noise standard deviation
    #[arg(long, default_value_t = 0.35)]
    pub blob_spread: f64,
    /// Seed for generating the synthetic dataset (not the run)
    #[arg(long, default_value_t = 0)]
    pub data_seed: u64,
    /// Examples queried per round [default: 10, or the preset's share of the pool]
    #[arg(long)]
    pub k: Option<usize>,
    /// Initially labeled examples
    #[arg(long, default_value_t = 20)]
    pub seed_size: usize,
    /// Held-out test examples
    #[arg(long, default_value_t = 1000)]
    pub test_size: usize,
    /// Cap on the unlabeled pool [default: all remaining examples]
    #[arg(long)]
    pub pool: Option<usize>,
    /// Maximum rounds [default: 10 unless --epsilon is given]
    #[arg(long)]
    pub rounds: Option<usize>,
    /// Stop once the training error is at most this
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub epochs_per_round: Option<usize>,
    /// SGD learning rate
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub minibatch: Option<usize>,
    /// L2 weight decay
    #[arg(long, default_value_t = 0.0)]
    pub l2: f64,
    #[arg(long, value_enum)]
    pub arch: Option<ArchKind>,
    /// Hidden units (implies --arch mlp when --arch is absent)
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Re-initialize the model every round
    #[arg(long)]
    pub cold_start: bool,
    #[arg(long, value_enum, default_value = "global")]
    pub scan: ScanKind,
    /// Chunk size for --scan batched
    #[arg(long, default_value_t = 1000)]
    pub scan_batch: usize,
    /// Output directory
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Run seed (replicates use seed, seed+1, ...)
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: ExperimentArgs,
    #[arg(long, default_value = "entropy")]
    pub metric: Metric,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    #[command(flatten)]
    pub common: ExperimentArgs,
    /// Metrics to compare [default: lmu,smu,lcu,entropy,random]
    #[arg(long, value_delimiter = ',')]
    pub metrics: Option<Vec<Metric>>,
    #[arg(long, default_value_t = 3)]
    pub replicates: u64,
    /// Accuracy level for the rounds-to-threshold column
    #[arg(long, default_value_t = 0.9)]
    pub threshold: f64,
}

impl ExperimentArgs {
    fn data_spec(&self, kind: DataKind) -> DataSpec {
        match kind {
            DataKind::Mnist => DataSpec::Mnist { classes: self.classes.clone() },
            DataKind::Blobs => DataSpec::Blobs(BlobSpec {
                classes: self.blob_classes,
                dim: self.blob_dim,
                per_class: self.blob_per_class,
                spread: self.blob_spread,
                seed: self.data_seed,
            }),
        }
    }

    /// Loads the dataset and fills in the run configuration.
    pub fn build(&self, metric: Metric) -> Result<(Arc<Dataset>, RunConfig), CliError> {
        let preset = self.preset.map(Preset::values);
        let kind = self.data.or(preset.as_ref().map(|p| p.data)).unwrap_or(DataKind::Blobs);
        if kind == DataKind::Blobs && self.classes.is_some() {
            return Err(CliError::Usage("--classes applies to --data mnist".into()));
        }
        let mnist_dir = (kind == DataKind::Mnist).then_some(self.mnist_dir.as_path());
        let dataset = Arc::new(self.data_spec(kind).load(mnist_dir)?);

        let arch_kind = self
            .arch
            .or(self.hidden.map(|_| ArchKind::Mlp))
            .or(preset.as_ref().map(|p| p.arch))
            .unwrap_or(ArchKind::Softmax);
        let arch = match arch_kind {
            ArchKind::Softmax => Architecture::Softmax,
            ArchKind::Mlp => Architecture::Mlp {
                hidden: self.hidden.or(preset.as_ref().map(|p| p.hidden)).unwrap_or(DEFAULT_HIDDEN),
            },
        };
        let pool_len = self.pool.unwrap_or_else(|| dataset.len().saturating_sub(self.seed_size + self.test_size));
        let k = match (self.k, preset.as_ref().and_then(|p| p.pool_fraction)) {
            (Some(k), _) => k,
            (None, Some(fraction)) => ((pool_len as f64 * fraction).round() as usize).max(1),
            (None, None) => DEFAULT_K,
        };
        let hyper = TrainHyper {
            learning_rate: self.lr.or(preset.as_ref().map(|p| p.lr)).unwrap_or(0.1),
            minibatch_size: self.minibatch.or(preset.as_ref().map(|p| p.minibatch)).unwrap_or(32),
            epochs_per_round: self.epochs_per_round.or(preset.as_ref().map(|p| p.epochs)).unwrap_or(10),
            l2: self.l2,
        };
        let config = RunConfig {
            metric,
            per_round_k: k,
            seed_size: self.seed_size,
            test_size: self.test_size,
            pool_size: self.pool,
            max_rounds: self.rounds.or(if self.epsilon.is_none() { Some(DEFAULT_ROUNDS) } else { None }),
            epsilon: self.epsilon,
            hyper,
            arch,
            rng_seed: self.seed,
            cold_start: self.cold_start,
            scan: match self.scan {
                ScanKind::Global => ScanMode::Global,
                ScanKind::Batched => ScanMode::Batched { batch: self.scan_batch },
            },
        };
        config.validate()?;
        Ok((dataset, config))
    }
}

fn prepare_out(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Other(format!("{}: {e}", dir.display())))
}

fn write_per_class(trace: &RunTrace, path: &Path) -> Result<(), CliError> {
    let axes = AxesConfig::rounds(format!("per-class test accuracy ({})", trace.run_id), "test accuracy")
        .with_y_range(0.0, 1.0);
    emit_curves_svg(&per_class_series(trace)?, &axes, path)?;
    Ok(())
}

pub fn cmd_run(args: &RunArgs) -> Result<(), CliError> {
    let (dataset, config) = args.common.build(args.metric)?;
    let out = &args.common.out;
    prepare_out(out)?;
    let trace = run(config, dataset)?;
    let traces = std::slice::from_ref(&trace);

    emit_csv(traces, &out.join("trace.csv"))?;
    emit_json(traces, &out.join("trace.json"))?;
    let refs = [&trace];
    let accuracy = mean_series(trace.metric.to_string(), &refs, |r| r.test_accuracy)?;
    emit_curves_svg(
        &[accuracy],
        &AxesConfig::rounds(format!("test accuracy ({})", trace.run_id), "test accuracy").with_y_range(0.0, 1.0),
        &out.join("accuracy.svg"),
    )?;
    let loss = mean_series(trace.metric.to_string(), &refs, |r| r.train_loss)?;
    emit_curves_svg(
        &[loss],
        &AxesConfig::rounds(format!("training loss ({})", trace.run_id), "training loss"),
        &out.join("loss.svg"),
    )?;
    write_per_class(&trace, &out.join("per_class.svg"))?;

    let last = trace.records.last().expect("a run has at least one round");
    let reason = trace.stop_reason.map_or_else(|| "not stopped".to_string(), |r| r.to_string());
    println!("{}: {} rounds, stopped: {reason}", trace.run_id, trace.records.len());
    println!(
        "final test accuracy {:.4} with {} labeled examples ({} queried in the last round)",
        last.test_accuracy,
        last.labeled_count,
        last.selected_ids.len()
    );
    println!("wrote {}", out.display());
    Ok(())
}

pub fn cmd_compare(args: &CompareArgs) -> Result<(), CliError> {
    let metrics = args.metrics.clone().unwrap_or_else(|| Metric::ALL.to_vec());
    if args.replicates == 0 {
        return Err(CliError::Usage("--replicates must be >= 1".into()));
    }
    let (dataset, base) = args.common.build(metrics[0])?;
    let seeds: Vec<u64> = (0..args.replicates).map(|i| base.rng_seed + i).collect();
    let out = &args.common.out;
    prepare_out(out)?;
    let comparison = compare_runs(dataset, &base, &metrics, &seeds)?;
    let traces = &comparison.traces;

    emit_csv(traces, &out.join("compare.csv"))?;
    emit_json(traces, &out.join("compare.json"))?;
    emit_curves_svg(
        &comparison.accuracy,
        &AxesConfig::rounds(format!("mean test accuracy over {} runs", seeds.len()), "test accuracy"),
        &out.join("accuracy.svg"),
    )?;
    let losses = traces
        .chunks(seeds.len())
        .map(|group| {
            let refs: Vec<&RunTrace> = group.iter().collect();
            mean_series(group[0].metric.to_string(), &refs, |r| r.train_loss)
        })
        .collect::<Result<Vec<_>, _>>()?;
    emit_curves_svg(&losses, &AxesConfig::rounds("mean training loss", "training loss"), &out.join("loss.svg"))?;
    for group in traces.chunks(seeds.len()) {
        write_per_class(&group[0], &out.join(format!("per_class_{}.svg", group[0].metric)))?;
    }

    let rows = summarize(traces, args.threshold)?;
    let table = render_summary(&rows, args.threshold);
    std::fs::write(out.join("summary.txt"), &table)?;
    let mut json = serde_json::to_vec_pretty(&rows).expect("summary serializes");
    json.push(b'\n');
    std::fs::write(out.join("summary.json"), json)?;
    print!("{table}");
    println!("wrote {} traces to {}", traces.len(), out.display());
    Ok(())
}
