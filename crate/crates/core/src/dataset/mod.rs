//! Classification datasets: loading, generation and splitting.

mod idx;
mod split;
mod synth;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use idx::{parse_idx_images, parse_idx_labels, IdxImages, IdxLabels, IMAGE_MAGIC, LABEL_MAGIC};
pub use split::{split, Split, SplitSpec, SEED_REDRAW_LIMIT};
pub use synth::{synth_blobs, BlobSpec};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("bad magic number: expected {expected:#010x}, found {found:#010x}")]
    BadMagic { expected: u32, found: u32 },
    #[error("truncated IDX data: header implies {expected} bytes, got {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("label {label} at index {index} is out of range 0..=9")]
    LabelOutOfRange { index: usize, label: u8 },
    #[error("image file has {images} entries but label file has {labels}")]
    CountMismatch { images: usize, labels: usize },
    #[error("split needs {requested} examples but the dataset has {available}")]
    InfeasibleSplit { requested: usize, available: usize },
    #[error("no seed set with at least two classes after {attempts} draws")]
    SeedNotDiverse { attempts: usize },
    #[error("invalid dataset: {0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Example {
    /// Stable index of the example within its dataset.
    pub id: usize,
    /// Feature values in `[0, 1]`.
    pub features: Vec<f64>,
    pub true_label: usize,
}

/// A labeled collection. Labels are ground truth; learners only see them
/// through an oracle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    examples: Vec<Example>,
    num_classes: usize,
    feature_dim: usize,
    class_names: Vec<String>,
    /// `(rows, cols)` when the features are a row-major grayscale image.
    image_shape: Option<(usize, usize)>,
}

impl Dataset {
    /// Builds a dataset, checking that ids equal positions, labels are in
    /// range, every class is present, features share one dimension and lie
    /// in `[0, 1]`.
    pub fn new(
        examples: Vec<Example>,
        class_names: Vec<String>,
        image_shape: Option<(usize, usize)>,
    ) -> Result<Self, DatasetError> {
        let num_classes = class_names.len();
        if num_classes < 2 {
            return Err(DatasetError::Invalid(format!("need at least 2 classes, got {num_classes}")));
        }
        let feature_dim = examples.first().map(|e| e.features.len()).unwrap_or(0);
        if feature_dim == 0 {
            return Err(DatasetError::Invalid("no examples or zero-dimensional features".into()));
        }
        if let Some((rows, cols)) = image_shape {
            if rows * cols != feature_dim {
                return Err(DatasetError::Invalid(format!(
                    "image shape {rows}x{cols} does not match feature_dim {feature_dim}"
                )));
            }
        }
        let mut support = vec![0usize; num_classes];
        for (pos, ex) in examples.iter().enumerate() {
            if ex.id != pos {
                return Err(DatasetError::Invalid(format!("example at position {pos} has id {}", ex.id)));
            }
            if ex.true_label >= num_classes {
                return Err(DatasetError::Invalid(format!(
                    "example {pos} has label {} but K = {num_classes}",
                    ex.true_label
                )));
            }
            if ex.features.len() != feature_dim {
                return Err(DatasetError::Invalid(format!(
                    "example {pos} has {} features, expected {feature_dim}",
                    ex.features.len()
                )));
            }
            if ex.features.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(DatasetError::Invalid(format!("example {pos} has features outside [0, 1]")));
            }
            support[ex.true_label] += 1;
        }
        if let Some(empty) = support.iter().position(|&n| n == 0) {
            return Err(DatasetError::Invalid(format!("class {empty} has no examples")));
        }
        Ok(Self { examples, num_classes, feature_dim, class_names, image_shape })
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn get(&self, id: usize) -> Option<&Example> {
        self.examples.get(id)
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn image_shape(&self) -> Option<(usize, usize)> {
        self.image_shape
    }

    /// Number of examples per class.
    pub fn class_histogram(&self) -> Vec<usize> {
        let mut hist = vec![0; self.num_classes];
        for ex in &self.examples {
            hist[ex.true_label] += 1;
        }
        hist
    }
}

/// Standard MNIST file names inside a data directory.
pub const MNIST_TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const MNIST_TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
pub const MNIST_TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
pub const MNIST_TEST_LABELS: &str = "t10k-labels-idx1-ubyte";

fn read_file(path: &Path) -> Result<Vec<u8>, DatasetError> {
    std::fs::read(path).map_err(|source| DatasetError::Io { path: path.to_owned(), source })
}

/// Loads an MNIST image/label file pair.
///
/// Pixels are scaled by 1/255. With a class filter, only the listed digits
/// are kept and they are re-indexed densely in ascending digit order, so
/// `{7, 3}` maps digit 3 to class 0 and digit 7 to class 1. Ids are assigned
/// densely in file order after filtering.
pub fn load_mnist(
    image_path: &Path,
    label_path: &Path,
    class_filter: Option<&[usize]>,
) -> Result<Dataset, DatasetError> {
    let images = parse_idx_images(&read_file(image_path)?)?;
    let labels = parse_idx_labels(&read_file(label_path)?)?;
    mnist_from_parts(&images, &labels, class_filter)
}

/// Same as [`load_mnist`] on already-parsed files.
pub fn mnist_from_parts(
    images: &IdxImages,
    labels: &IdxLabels,
    class_filter: Option<&[usize]>,
) -> Result<Dataset, DatasetError> {
    if images.count() != labels.count() {
        return Err(DatasetError::CountMismatch { images: images.count(), labels: labels.count() });
    }
    let kept: Vec<usize> = match class_filter {
        Some(filter) => {
            let mut f = filter.to_vec();
            f.sort_unstable();
            f.dedup();
            if let Some(bad) = f.iter().find(|&&c| c > 9) {
                return Err(DatasetError::Invalid(format!("class filter contains {bad}, digits are 0..=9")));
            }
            f
        }
        None => (0..10).collect(),
    };
    let mut remap = [usize::MAX; 10];
    for (dense, &digit) in kept.iter().enumerate() {
        remap[digit] = dense;
    }

    let mut examples = Vec::new();
    for (i, &digit) in labels.labels.iter().enumerate() {
        let class = remap[usize::from(digit)];
        if class == usize::MAX {
            continue;
        }
        let features = images.image(i).iter().map(|&b| f64::from(b) / 255.0).collect();
        examples.push(Example { id: examples.len(), features, true_label: class });
    }
    let class_names = kept.iter().map(|d| d.to_string()).collect();
    Dataset::new(examples, class_names, Some((images.rows as usize, images.cols as usize)))
}

/// Where a dataset comes from, as named in configs and requests.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DataSpec {
    /// The MNIST training files, optionally restricted to some digits.
    Mnist {
        #[serde(default)]
        classes: Option<Vec<usize>>,
    },
    Blobs(BlobSpec),
}

impl DataSpec {
    /// `mnist_dir` holds the standard MNIST file names; only needed for
    /// [`DataSpec::Mnist`].
    pub fn load(&self, mnist_dir: Option<&Path>) -> Result<Dataset, DatasetError> {
        match self {
            DataSpec::Mnist { classes } => {
                let dir = mnist_dir.ok_or_else(|| DatasetError::Invalid("no MNIST directory configured".into()))?;
                load_mnist(&dir.join(MNIST_TRAIN_IMAGES), &dir.join(MNIST_TRAIN_LABELS), classes.as_deref())
            }
            DataSpec::Blobs(spec) => synth_blobs(spec),
        }
    }
}
