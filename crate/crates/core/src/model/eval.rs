use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Classifier, ModelError, Sample, LOSS_PROB_FLOOR};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub mean_loss: f64,
    /// `correct_c / support_c`; a class absent from the set reports 1.0.
    pub per_class_accuracy: Vec<f64>,
    pub per_class_support: Vec<usize>,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

/// Scores `model` on a non-empty labeled set. Predictions may run in
/// parallel; all reductions run in input order, so results are
/// independent of the thread count.
pub fn evaluate<C: Classifier + ?Sized>(model: &C, samples: &[Sample<'_>]) -> Result<Evaluation, ModelError> {
    if samples.is_empty() {
        return Err(ModelError::EmptyTrainingSet);
    }
    let k = model.num_classes();
    let outcomes: Vec<(usize, f64)> = samples
        .par_iter()
        .map(|s| {
            if s.label >= k {
                return Err(ModelError::LabelOutOfRange { label: s.label, classes: k });
            }
            let p = model.predict_proba(s.features)?;
            Ok((p.argmax(), -p.as_slice()[s.label].max(LOSS_PROB_FLOOR).ln()))
        })
        .collect::<Result<_, _>>()?;

    let mut confusion = vec![vec![0usize; k]; k];
    let mut loss_sum = 0.0;
    for (s, &(pred, loss)) in samples.iter().zip(&outcomes) {
        confusion[s.label][pred] += 1;
        loss_sum += loss;
    }
    let support: Vec<usize> = confusion.iter().map(|row| row.iter().sum()).collect();
    let correct: usize = (0..k).map(|c| confusion[c][c]).sum();
    let per_class_accuracy =
        (0..k).map(|c| if support[c] == 0 { 1.0 } else { confusion[c][c] as f64 / support[c] as f64 }).collect();
    Ok(Evaluation {
        accuracy: correct as f64 / samples.len() as f64,
        mean_loss: loss_sum / samples.len() as f64,
        per_class_accuracy,
        per_class_support: support,
        confusion,
    })
}
