use serde::Serialize;

use crate::arch::{prepare_input, Network, NUM_CLASSES};
use crate::data::DatasetArchive;
use crate::error::{Error, Result};
use crate::layers::{softmax_cross_entropy, Module};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub samples: usize,
    pub accuracy: f64,
    /// Rows are true labels, columns predictions.
    pub confusion: [[usize; NUM_CLASSES]; NUM_CLASSES],
    /// Mean cross-entropy, when logits were available.
    pub loss: Option<f64>,
}

impl EvalReport {
    /// Recall per true class; `None` for classes with no samples.
    pub fn per_class_accuracy(&self) -> [Option<f64>; NUM_CLASSES] {
        let mut out = [None; NUM_CLASSES];
        for (c, row) in self.confusion.iter().enumerate() {
            let n: usize = row.iter().sum();
            if n > 0 {
                out[c] = Some(row[c] as f64 / n as f64);
            }
        }
        out
    }
}

pub fn evaluate_predictions(predictions: &[usize], labels: &[usize]) -> Result<EvalReport> {
    if predictions.len() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::EmptyDataset("nothing to evaluate".into()));
    }
    let mut confusion = [[0usize; NUM_CLASSES]; NUM_CLASSES];
    for (&p, &l) in predictions.iter().zip(labels) {
        if p >= NUM_CLASSES || l >= NUM_CLASSES {
            return Err(Error::InvalidArgument(format!("class index {} out of range", p.max(l))));
        }
        confusion[l][p] += 1;
    }
    let correct: usize = (0..NUM_CLASSES).map(|c| confusion[c][c]).sum();
    Ok(EvalReport {
        samples: labels.len(),
        accuracy: correct as f64 / labels.len() as f64,
        confusion,
        loss: None,
    })
}

/// Inference-mode accuracy, confusion and loss over `indices`.
pub fn evaluate(net: &Network, archive: &DatasetArchive, indices: &[usize], batch_size: usize) -> Result<EvalReport> {
    let kind = net.arch().input_kind();
    let mut predictions = Vec::with_capacity(indices.len());
    let mut loss_sum = 0.0f64;
    for chunk in indices.chunks(batch_size.max(1)) {
        let x = prepare_input(&archive.batch(chunk)?, kind)?;
        let labels = archive.batch_labels(chunk);
        let logits = net.forward(&x)?;
        let (loss, _) = softmax_cross_entropy(&logits, &labels)?;
        loss_sum += loss as f64 * chunk.len() as f64;
        predictions.extend(logits.argmax_rows()?);
    }
    let mut report = evaluate_predictions(&predictions, &archive.batch_labels(indices))?;
    report.loss = Some(loss_sum / indices.len() as f64);
    Ok(report)
}
