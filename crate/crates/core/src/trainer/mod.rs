//! Classifier training with augmentation, dropout and early stopping, plus
//! the evaluation metrics and Table-I style aggregation.

mod metrics;
mod report;

pub use metrics::{accuracy, auc};
pub use report::{aggregate_results, published_table, ExperimentReport, FoldScores, Regime, ReportRow};

use serde::{Deserialize, Serialize};

use crate::augment::{random_augment, AugmentRanges};
use crate::autodiff::{adam_step, AdamState, Tape};
use crate::error::{Error, Result};
use crate::featnet::{batch_tensor, forward_on_tape, predict_proba, Mode, NetworkSpec, WeightBundle};
use crate::image::Image;
use crate::seeds;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs_max: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub dropout: f64,
    pub patience: usize,
    /// Traditional augmentation applied per sample per epoch; `None` disables it.
    pub augment: Option<AugmentRanges>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs_max: 50,
            batch_size: 32,
            learning_rate: 1e-3,
            dropout: 0.5,
            patience: 5,
            augment: Some(AugmentRanges::default()),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs_max == 0 || self.patience >= self.epochs_max {
            return Err(Error::InvalidArgument(format!(
                "need 0 <= patience < epochs_max, got patience {} epochs_max {}",
                self.patience, self.epochs_max
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidArgument(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if self.batch_size == 0 || self.learning_rate <= 0.0 {
            return Err(Error::InvalidArgument("batch_size and learning_rate must be positive".into()));
        }
        if let Some(r) = &self.augment {
            r.validate()?;
        }
        Ok(())
    }
}

/// Patience-based early stopping on a validation loss.
#[derive(Clone, Debug)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    since_best: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping { patience, best: f64::INFINITY, best_epoch: 0, since_best: 0 }
    }

    /// Records the loss of `epoch`; returns `true` if it is a new best.
    pub fn observe(&mut self, epoch: usize, loss: f64) -> bool {
        if loss < self.best {
            self.best = loss;
            self.best_epoch = epoch;
            self.since_best = 0;
            true
        } else {
            self.since_best += 1;
            false
        }
    }

    pub fn should_stop(&self) -> bool {
        self.since_best >= self.patience
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best_loss(&self) -> f64 {
        self.best
    }
}

#[derive(Clone, Debug)]
pub struct FitOutcome {
    /// Weights from the epoch with the lowest validation loss.
    pub bundle: WeightBundle,
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub best_epoch: usize,
    pub epochs_run: usize,
}

/// Mean cross-entropy of `bundle` on labelled images, in inference mode.
pub fn evaluation_loss(bundle: &WeightBundle, samples: &[(&Image, u8)]) -> Result<f64> {
    let k = bundle.spec.num_outputs().unwrap_or(2);
    let mut total = 0.0;
    for chunk in samples.chunks(64) {
        let imgs: Vec<&Image> = chunk.iter().map(|s| s.0).collect();
        let probs = predict_proba(bundle, &imgs)?;
        for (i, (_, label)) in chunk.iter().enumerate() {
            total -= probs[i * k + *label as usize].max(f64::MIN_POSITIVE).ln();
        }
    }
    Ok(total / samples.len() as f64)
}

/// Mini-batch Adam training with per-sample augmentation and dropout,
/// stopped early on validation loss.
pub fn fit(init: WeightBundle, train: &[(&Image, u8)], val: &[(&Image, u8)], cfg: &TrainConfig) -> Result<FitOutcome> {
    cfg.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::InvalidArgument("training and validation sets must be non-empty".into()));
    }
    let mut bundle = init;
    let mut states: Vec<(AdamState, AdamState)> = bundle
        .layers
        .iter()
        .map(|l| (AdamState::for_tensor(&l.kernel, cfg.learning_rate), AdamState::for_tensor(&l.bias, cfg.learning_rate)))
        .collect();
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best = bundle.clone();
    let (mut train_curve, mut val_curve) = (Vec::new(), Vec::new());
    let mut epochs_run = 0;
    for epoch in 0..cfg.epochs_max {
        epochs_run = epoch + 1;
        let mut order: Vec<usize> = (0..train.len()).collect();
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut seeds::rng(cfg.seed, &[1, epoch as u64]));
        let mut epoch_loss = 0.0;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let images: Vec<Image> = batch
                .iter()
                .map(|&i| match &cfg.augment {
                    Some(r) => random_augment(train[i].0, r, seeds::derive(cfg.seed, &[2, epoch as u64, i as u64])),
                    None => Ok(train[i].0.clone()),
                })
                .collect::<Result<_>>()?;
            let targets: Vec<usize> = batch.iter().map(|&i| train[i].1 as usize).collect();
            let refs: Vec<&Image> = images.iter().collect();
            let mut tape = Tape::new();
            let x = tape.constant(batch_tensor(&refs)?);
            let mut drop_rng = seeds::rng(cfg.seed, &[3, epoch as u64, b as u64]);
            let pass = forward_on_tape(
                &mut tape,
                &bundle,
                x,
                true,
                Mode::Train { dropout: cfg.dropout, rng: &mut drop_rng },
                None,
            )?;
            let logits = *pass.outputs.last().expect("non-empty network");
            let loss = tape.softmax_cross_entropy(logits, &targets)?;
            let lv = tape.value(loss).item();
            if !lv.is_finite() {
                return Err(Error::NonFinite { context: "training loss".into(), iteration: epoch });
            }
            epoch_loss += lv * batch.len() as f64;
            let mut grads = tape.backward(loss)?;
            for ((layer, (kv, bv)), (sk, sb)) in bundle.layers.iter_mut().zip(&pass.params).zip(&mut states) {
                adam_step(&mut layer.kernel, &grads.take(*kv), sk)?;
                adam_step(&mut layer.bias, &grads.take(*bv), sb)?;
            }
        }
        train_curve.push(epoch_loss / train.len() as f64);
        let vl = evaluation_loss(&bundle, val)?;
        if !vl.is_finite() {
            return Err(Error::NonFinite { context: "validation loss".into(), iteration: epoch });
        }
        val_curve.push(vl);
        log::debug!("epoch {epoch}: train {:.4} val {vl:.4}", train_curve[epoch]);
        if stopper.observe(epoch, vl) {
            best = bundle.clone();
        }
        if stopper.should_stop() {
            break;
        }
    }
    Ok(FitOutcome { bundle: best, train_loss: train_curve, val_loss: val_curve, best_epoch: stopper.best_epoch(), epochs_run })
}

/// A trained 2-way classifier and its architecture tag.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierModel {
    pub architecture: String,
    pub bundle: WeightBundle,
}

/// Training and evaluation record of one (architecture, regime, fold) run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub architecture: String,
    pub regime: Regime,
    pub fold: usize,
    pub val_auc: f64,
    pub val_accuracy: f64,
    pub test_auc: Option<f64>,
    pub test_accuracy: Option<f64>,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub config_digest: String,
    pub seed: u64,
}

/// Probability of class 1 (malignant-analog) per image, dropout disabled.
pub fn predict_scores(model: &ClassifierModel, images: &[&Image]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(images.len());
    for chunk in images.chunks(64) {
        let probs = predict_proba(&model.bundle, chunk)?;
        out.extend(probs.chunks_exact(2).map(|p| p[1]));
    }
    Ok(out)
}

pub fn score_metrics(model: &ClassifierModel, samples: &[(&Image, u8)]) -> Result<(f64, f64)> {
    let imgs: Vec<&Image> = samples.iter().map(|s| s.0).collect();
    let labels: Vec<u8> = samples.iter().map(|s| s.1).collect();
    let scores = predict_scores(model, &imgs)?;
    Ok((auc(&scores, &labels)?, accuracy(&scores, &labels, 0.5)))
}

/// Trains `architecture` on `train`, early-stopping on the real `val` set.
pub fn train_classifier(
    architecture: &str,
    spec: &NetworkSpec,
    train: &[(&Image, u8)],
    val: &[(&Image, u8)],
    cfg: &TrainConfig,
) -> Result<(ClassifierModel, FitOutcome, f64, f64)> {
    if train.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    let classes: std::collections::BTreeSet<u8> = val.iter().map(|s| s.1).collect();
    if classes.len() < 2 {
        return Err(Error::InvalidArgument("validation set must contain both classes".into()));
    }
    let init = WeightBundle::init(spec, seeds::derive(cfg.seed, &[0]))?;
    let outcome = fit(init, train, val, cfg)?;
    let model = ClassifierModel { architecture: architecture.to_string(), bundle: outcome.bundle.clone() };
    let (val_auc, val_acc) = score_metrics(&model, val)?;
    Ok((model, outcome, val_auc, val_acc))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn improving_loss_runs_to_max_epochs() {
        let mut s = EarlyStopping::new(3);
        let mut epochs = 0;
        for (e, loss) in (0..20).map(|e| (e, 1.0 / (e as f64 + 1.0))) {
            epochs += 1;
            assert!(s.observe(e, loss));
            if s.should_stop() {
                break;
            }
        }
        assert_eq!(epochs, 20);
        assert_eq!(s.best_epoch(), 19);
    }

    #[test]
    fn stalls_trigger_stop_after_patience() {
        let mut s = EarlyStopping::new(2);
        s.observe(0, 1.0);
        s.observe(1, 0.5);
        s.observe(2, 0.6);
        assert!(!s.should_stop());
        s.observe(3, 0.5);
        assert!(s.should_stop());
        assert_eq!(s.best_epoch(), 1);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        assert!(TrainConfig { patience: 50, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { dropout: 1.0, ..Default::default() }.validate().is_err());
    }

    fn symmetric_zero(arch: &str) -> ClassifierModel {
        let spec = NetworkSpec::classifier(arch, 16, 16).unwrap();
        ClassifierModel { architecture: arch.into(), bundle: WeightBundle::zeros(&spec).unwrap() }
    }

    #[test]
    fn zero_model_scores_one_half() {
        let img = Image::new(16, 16, 3, (0..768).map(|i| (i % 11) as f64 / 11.0).collect()).unwrap();
        let m = symmetric_zero("mini-vgg-a");
        assert_eq!(predict_scores(&m, &[&img, &img]).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn batched_prediction_equals_single() {
        let spec = NetworkSpec::classifier("mini-dense", 16, 16).unwrap();
        let model = ClassifierModel { architecture: "mini-dense".into(), bundle: WeightBundle::init(&spec, 4).unwrap() };
        let imgs: Vec<Image> = (0..5)
            .map(|s| Image::new(16, 16, 3, (0..768).map(|i| ((i * (s + 3)) % 17) as f64 / 17.0).collect()).unwrap())
            .collect();
        let refs: Vec<&Image> = imgs.iter().collect();
        let batched = predict_scores(&model, &refs).unwrap();
        for (img, b) in imgs.iter().zip(&batched) {
            assert_eq!(predict_scores(&model, &[img]).unwrap()[0], *b);
        }
        let probs = predict_proba(&model.bundle, &refs).unwrap();
        for p in probs.chunks_exact(2) {
            assert!((p[0] + p[1] - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn single_class_validation_rejected() {
        let spec = NetworkSpec::classifier("mini-vgg-a", 16, 16).unwrap();
        let img = Image::zeros(16, 16, 3);
        let r = train_classifier("mini-vgg-a", &spec, &[(&img, 0)], &[(&img, 1), (&img, 1)], &TrainConfig::default());
        assert!(r.is_err());
    }
}
