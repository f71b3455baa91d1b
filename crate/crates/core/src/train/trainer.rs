use std::env;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use super::{augment, evaluate, lr_at_epoch, split_dataset, AdamHyper, AdamState, Split, TrainConfig};
use crate::arch::{build_network, prepare_input, ArchId, Network};
use crate::data::DatasetArchive;
use crate::error::{Error, Result};
use crate::layers::{softmax_cross_entropy, Module};
use crate::rng::Rng;
use crate::tensor::Tensor;

/// Set to `0`, `false`, `off` or `no` to add wall-clock columns to the
/// metrics series. Any other value, or leaving it unset, keeps every
/// artifact a pure function of the seed, config and data.
pub const DETERMINISTIC_ENV: &str = "TIMECONV_DETERMINISTIC";

pub fn deterministic_mode() -> bool {
    match env::var(DETERMINISTIC_ENV) {
        Ok(v) => !matches!(v.trim().to_ascii_lowercase().as_str(), "0" | "false" | "off" | "no"),
        Err(_) => true,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsRecord {
    /// 0-based.
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    /// Running accuracy of the training forward passes (augmented input,
    /// batch statistics).
    pub train_accuracy: f64,
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
    /// Only recorded outside deterministic mode.
    pub seconds: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Weights from the epoch with the best validation accuracy (lower
    /// validation loss breaks ties); the final weights without a
    /// validation set.
    pub best: Network,
    pub best_epoch: usize,
    pub last: Network,
    pub metrics: Vec<MetricsRecord>,
    pub split: Split,
}

/// One optimizer step on a prepared batch. Returns the batch loss and
/// the number of correct predictions.
#[allow(clippy::too_many_arguments)]
pub fn train_step(
    net: &mut Network,
    state: &mut AdamState,
    names: &[String],
    x: &Tensor<f32>,
    labels: &[usize],
    lr: f64,
    hyper: &AdamHyper,
) -> Result<(f32, usize)> {
    let (logits, cache) = net.forward_train(x)?;
    let (loss, grad) = softmax_cross_entropy(&logits, labels)?;
    if !loss.is_finite() {
        return Err(Error::Diverged {
            epoch: 0,
            batch: 0,
            loss: loss as f64,
        });
    }
    let correct = logits.argmax_rows()?.iter().zip(labels).filter(|(p, l)| p == l).count();
    let mut grads = net.zero_grads();
    net.backward(&cache, &grad, &mut grads)?;
    super::adam_step(net.params_mut(), &grads, names, state, lr, hyper)?;
    Ok((loss, correct))
}

/// Full protocol: seeded split, per-epoch shuffle and augmentation, Adam
/// under the stepped schedule, validation after every epoch.
pub fn train(arch: ArchId, archive: &DatasetArchive, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let split = split_dataset(archive.len(), config.split, config.seed)?;
    if split.train.is_empty() {
        return Err(Error::EmptyDataset(format!("{} samples leave no training split", archive.len())));
    }
    let root = Rng::new(config.seed);
    let mut net: Network = build_network(arch, &mut root.derive(1));
    let names = net.param_names();
    let mut state = AdamState::new(&net.params());
    let kind = arch.input_kind();
    let timed = !deterministic_mode();

    let mut metrics = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, f64, usize, Network)> = None;
    for epoch in 0..config.epochs {
        let started = Instant::now();
        let lr = lr_at_epoch(config, epoch)?;
        let mut order = split.train.clone();
        root.derive(2).derive(epoch as u64).shuffle(&mut order);
        let mut aug_rng = root.derive(3).derive(epoch as u64);
        let (mut loss_sum, mut correct) = (0.0f64, 0usize);
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let mut x = prepare_input(&archive.batch(chunk)?, kind)?;
            let per = x.numel() / chunk.len();
            for sample in x.data_mut().chunks_mut(per) {
                let warped = augment(sample, &config.augment, &mut aug_rng);
                sample.copy_from_slice(&warped);
            }
            let labels = archive.batch_labels(chunk);
            let (loss, ok) = train_step(&mut net, &mut state, &names, &x, &labels, lr, &config.adam).map_err(|e| match e {
                Error::Diverged { loss, .. } => Error::Diverged { epoch, batch: b, loss },
                other => other,
            })?;
            loss_sum += loss as f64 * chunk.len() as f64;
            correct += ok;
        }
        let n = order.len() as f64;
        let (val_loss, val_accuracy) = if split.val.is_empty() {
            (None, None)
        } else {
            let r = evaluate(&net, archive, &split.val, config.batch_size)?;
            (r.loss, Some(r.accuracy))
        };
        let record = MetricsRecord {
            epoch,
            lr,
            train_loss: loss_sum / n,
            train_accuracy: correct as f64 / n,
            val_loss,
            val_accuracy,
            seconds: timed.then(|| started.elapsed().as_secs_f64()),
        };
        log::info!(
            "{arch} epoch {epoch}: lr {lr:.1e} loss {:.4} acc {:.3} val {:?}",
            record.train_loss,
            record.train_accuracy,
            val_accuracy
        );
        if let (Some(acc), Some(loss)) = (val_accuracy, val_loss) {
            let better = match &best {
                None => true,
                Some((a, l, _, _)) => acc > *a || (acc == *a && loss < *l),
            };
            if better {
                best = Some((acc, loss, epoch, net.clone()));
            }
        }
        metrics.push(record);
    }
    let (best_epoch, best) = match best {
        Some((_, _, e, n)) => (e, n),
        None => (config.epochs - 1, net.clone()),
    };
    Ok(TrainOutcome {
        best,
        best_epoch,
        last: net,
        metrics,
        split,
    })
}

/// Comma-separated series with a header. The `seconds` column is present
/// only when at least one record carries a timing.
pub fn write_metrics_csv(path: impl AsRef<Path>, records: &[MetricsRecord]) -> Result<()> {
    let path = path.as_ref();
    let timed = records.iter().any(|r| r.seconds.is_some());
    let to_err = |e: csv::Error| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(to_err)?;
    let mut header = vec!["epoch", "lr", "train_loss", "train_accuracy", "val_loss", "val_accuracy"];
    if timed {
        header.push("seconds");
    }
    w.write_record(&header).map_err(to_err)?;
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    for r in records {
        let mut row = vec![
            r.epoch.to_string(),
            r.lr.to_string(),
            r.train_loss.to_string(),
            r.train_accuracy.to_string(),
            opt(r.val_loss),
            opt(r.val_accuracy),
        ];
        if timed {
            row.push(opt(r.seconds));
        }
        w.write_record(&row).map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SynthConfig};
    use crate::train::AugmentConfig;

    fn tiny_config(epochs: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            batch_size: 8,
            seed: 11,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn reproducible_metrics() {
        let data = generate_synthetic(&SynthConfig::new(3), 1);
        let a = train(ArchId::Xception2d, &data, &tiny_config(2)).unwrap();
        let b = train(ArchId::Xception2d, &data, &tiny_config(2)).unwrap();
        assert_eq!(a.metrics, b.metrics);
        assert_eq!(a.metrics.len(), 2);
        assert!(a.metrics.iter().all(|m| m.train_loss.is_finite()));
    }

    #[test]
    fn divergence_reports_position() {
        let data = generate_synthetic(&SynthConfig::new(2), 1);
        let mut cfg = tiny_config(1);
        cfg.initial_lr = 1e30;
        cfg.augment = AugmentConfig::none();
        let err = train(ArchId::Xception2d, &data, &cfg).unwrap_err();
        assert!(
            matches!(err, Error::Diverged { epoch: 0, .. } | Error::NonFinite { .. }),
            "{err}"
        );
    }

    #[test]
    fn csv_columns() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let rec = MetricsRecord {
            epoch: 0,
            lr: 1e-3,
            train_loss: 1.5,
            train_accuracy: 0.25,
            val_loss: None,
            val_accuracy: None,
            seconds: None,
        };
        write_metrics_csv(&path, std::slice::from_ref(&rec)).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "epoch,lr,train_loss,train_accuracy,val_loss,val_accuracy\n0,0.001,1.5,0.25,,\n");
        let timed = MetricsRecord {
            seconds: Some(2.0),
            ..rec
        };
        write_metrics_csv(&path, &[timed]).unwrap();
        assert!(std::fs::read_to_string(&path).unwrap().starts_with("epoch,lr,train_loss,train_accuracy,val_loss,val_accuracy,seconds\n"));
    }
}
