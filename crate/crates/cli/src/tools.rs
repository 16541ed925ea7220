//! `gradcheck`, `inspect` and `serve`.

use std::net::IpAddr;
use std::path::PathBuf;

use alearn::dataset::{
    mnist_from_parts, parse_idx_images, parse_idx_labels, DataSpec, DatasetError, MNIST_TEST_IMAGES, MNIST_TEST_LABELS,
    MNIST_TRAIN_IMAGES, MNIST_TRAIN_LABELS,
};
use alearn::model::grad_check_sampled;
use alearn::rng::{self, Purpose};
use alearn::{Architecture, ModelParams};
use alearn_service::ServiceConfig;
use clap::{Args, ValueEnum};
use rand::Rng;

use crate::error::CliError;
use crate::experiment::{ArchKind, DataKind};

#[derive(Args, Debug)]
pub struct GradcheckArgs {
    #[arg(long, value_enum, default_value = "softmax")]
    pub arch: ArchKind,
    #[arg(long, default_value_t = 16)]
    pub hidden: usize,
    #[arg(long, default_value_t = 20)]
    pub features: usize,
    #[arg(long, default_value_t = 5)]
    pub classes: usize,
    /// Random (model, input, label) draws to check
    #[arg(long, default_value_t = 100)]
    pub draws: u64,
    /// Largest acceptable relative error [default: 1e-6 softmax, 1e-4 mlp]
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Central-difference step
    #[arg(long, default_value_t = 1e-5)]
    pub step: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn cmd_gradcheck(args: &GradcheckArgs) -> Result<(), CliError> {
    let arch = match args.arch {
        ArchKind::Softmax => Architecture::Softmax,
        ArchKind::Mlp => Architecture::Mlp { hidden: args.hidden },
    };
    let threshold = args.threshold.unwrap_or(match args.arch {
        ArchKind::Softmax => 1e-6,
        ArchKind::Mlp => 1e-4,
    });
    if args.draws == 0 {
        return Err(CliError::Usage("--draws must be >= 1".into()));
    }
    if args.features == 0 || args.classes < 2 {
        return Err(CliError::Usage("need --features >= 1 and --classes >= 2".into()));
    }

    let mut worst = (0.0_f64, 0);
    for draw in 0..args.draws {
        let model = ModelParams::init(arch, args.features, args.classes, args.seed.wrapping_add(draw))
            .map_err(|e| CliError::Usage(e.to_string()))?;
        let mut rng = rng::stream(args.seed, Purpose::GradCheck, draw + 1);
        let x: Vec<f64> = (0..args.features).map(|_| rng.random_range(-1.0..1.0)).collect();
        let label = rng.random_range(0..args.classes);
        let err = grad_check_sampled(&model, &x, label, args.step, alearn::model::GRADCHECK_MIN_COORDS, draw)?;
        if err > worst.0 || err.is_nan() {
            worst = (err, draw);
        }
    }
    println!(
        "{arch}: {} draws, worst relative error {:.3e} (draw {}), threshold {threshold:.0e}",
        args.draws, worst.0, worst.1
    );
    if worst.0 <= threshold {
        println!("ok");
        Ok(())
    } else {
        Err(CliError::GradientBreach(format!("relative error {:.3e} exceeds {threshold:.0e}", worst.0)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum IdxSet {
    Train,
    Test,
}

#[derive(Args, Debug)]
pub struct InspectArgs {
    #[arg(long, env = "ALEARN_MNIST_DIR", default_value = "data/mnist")]
    pub mnist_dir: PathBuf,
    #[arg(long, value_enum, default_value = "train")]
    pub set: IdxSet,
    /// Image file (overrides --mnist-dir/--set)
    #[arg(long, requires = "labels")]
    pub images: Option<PathBuf>,
    /// Label file (overrides --mnist-dir/--set)
    #[arg(long, requires = "images")]
    pub labels: Option<PathBuf>,
    /// Keep only these digits
    #[arg(long, value_delimiter = ',')]
    pub classes: Option<Vec<usize>>,
}

fn read(path: &PathBuf) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|source| DatasetError::Io { path: path.clone(), source }.into())
}

pub fn cmd_inspect(args: &InspectArgs) -> Result<(), CliError> {
    let (image_path, label_path) = match (&args.images, &args.labels) {
        (Some(i), Some(l)) => (i.clone(), l.clone()),
        _ => {
            let (i, l) = match args.set {
                IdxSet::Train => (MNIST_TRAIN_IMAGES, MNIST_TRAIN_LABELS),
                IdxSet::Test => (MNIST_TEST_IMAGES, MNIST_TEST_LABELS),
            };
            (args.mnist_dir.join(i), args.mnist_dir.join(l))
        }
    };
    let image_bytes = read(&image_path)?;
    let label_bytes = read(&label_path)?;
    let images = parse_idx_images(&image_bytes)?;
    let labels = parse_idx_labels(&label_bytes)?;
    let dataset = mnist_from_parts(&images, &labels, args.classes.as_deref())?;

    println!("{} examples, {}x{}, {} classes", dataset.len(), images.rows, images.cols, dataset.num_classes());
    let histogram = dataset.class_histogram();
    for (name, count) in dataset.class_names().iter().zip(&histogram) {
        println!("  {name:>3}: {count}");
    }
    let identical = images.to_bytes() == image_bytes && labels.to_bytes() == label_bytes;
    println!("IDX round trip: {}", if identical { "byte-identical" } else { "MISMATCH" });
    if identical {
        Ok(())
    } else {
        Err(CliError::Data("re-encoded IDX files differ from the originals".into()))
    }
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    pub bind: IpAddr,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Enables `{"kind": "mnist"}` sessions
    #[arg(long, env = "ALEARN_MNIST_DIR")]
    pub mnist_dir: Option<PathBuf>,
    /// Write a JSON snapshot of each session after every round
    #[arg(long)]
    pub snapshot_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 16)]
    pub max_sessions: usize,
    /// Data for sessions that do not name any
    #[arg(long, value_enum, default_value = "blobs")]
    pub default_data: DataKind,
}

pub fn cmd_serve(args: &ServeArgs) -> Result<(), CliError> {
    if args.max_sessions == 0 {
        return Err(CliError::Usage("--max-sessions must be >= 1".into()));
    }
    if args.default_data == DataKind::Mnist && args.mnist_dir.is_none() {
        return Err(CliError::Usage("--default-data mnist needs --mnist-dir".into()));
    }
    if let Some(dir) = &args.snapshot_dir {
        std::fs::create_dir_all(dir)?;
    }
    let mut config = ServiceConfig {
        mnist_dir: args.mnist_dir.clone(),
        max_sessions: args.max_sessions,
        snapshot_dir: args.snapshot_dir.clone(),
        ..ServiceConfig::default()
    };
    if args.default_data == DataKind::Mnist {
        config.default_data = DataSpec::Mnist { classes: None };
    }

    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind((args.bind, args.port)).await?;
        println!("listening on http://{}", listener.local_addr()?);
        alearn_service::serve(listener, config).await
    })?;
    Ok(())
}
