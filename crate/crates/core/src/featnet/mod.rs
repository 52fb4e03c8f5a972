//! The layered convolutional feature extractor that supplies style and
//! content activations, and its weight file format.

mod forward;
mod spec;
mod weights;

pub use forward::{batch_tensor, forward_features, forward_on_tape, predict_proba, FeatureActivations, ForwardPass, Mode, INPUT_CENTER};
pub(crate) use forward::check_input;
pub use spec::{LayerKind, LayerShape, LayerSpec, NetworkSpec, ParamShape};
pub use weights::{load_weights, save_weights, LayerWeights, WeightBundle, FORMAT_VERSION, MAGIC};

use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::image::Image;
use crate::seeds;
use crate::trainer::{self, TrainConfig};

/// Minimum images per class accepted by [`train_feature_extractor`].
pub const MIN_PER_CLASS: usize = 20;

#[derive(Clone, Debug)]
pub struct FeatureTraining {
    pub bundle: WeightBundle,
    /// Accuracy of the classifier head on the held-out 20%.
    pub held_out_accuracy: f64,
    pub epochs_run: usize,
}

/// Trains `spec` as a classifier on labelled images. A stratified 20% is held
/// out for early stopping and for the reported accuracy.
pub fn train_feature_extractor(
    corpus: &[(&Image, u8)],
    spec: &NetworkSpec,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<FeatureTraining> {
    let mut by_class: BTreeMap<u8, Vec<usize>> = BTreeMap::new();
    for (i, (_, label)) in corpus.iter().enumerate() {
        by_class.entry(*label).or_default().push(i);
    }
    if by_class.len() < 2 || by_class.values().any(|v| v.len() < MIN_PER_CLASS) {
        let counts: Vec<String> = by_class.iter().map(|(k, v)| format!("class {k}: {}", v.len())).collect();
        return Err(Error::CorpusTooSmall(format!(
            "need at least 2 classes with {MIN_PER_CLASS} images each, got [{}]",
            counts.join(", ")
        )));
    }
    let mut train = Vec::new();
    let mut held = Vec::new();
    for (class, mut idx) in by_class {
        idx.shuffle(&mut seeds::rng(seed, &[10, u64::from(class)]));
        let n_held = (idx.len() as f64 * 0.2).round().max(1.0) as usize;
        for (j, i) in idx.into_iter().enumerate() {
            if j < n_held {
                held.push(corpus[i]);
            } else {
                train.push(corpus[i]);
            }
        }
    }
    let cfg = TrainConfig { seed, ..cfg.clone() };
    let init = WeightBundle::init(spec, seeds::derive(seed, &[11]))?;
    let outcome = trainer::fit(init, &train, &held, &cfg)?;
    let mut bundle = outcome.bundle;
    bundle.seed = seed;
    let imgs: Vec<&Image> = held.iter().map(|s| s.0).collect();
    let labels: Vec<u8> = held.iter().map(|s| s.1).collect();
    let probs = predict_proba(&bundle, &imgs)?;
    let k = spec.num_outputs().unwrap_or(2);
    let correct = probs
        .chunks_exact(k)
        .zip(&labels)
        .filter(|(p, &l)| {
            let argmax = p.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).unwrap_or(0);
            argmax == l as usize
        })
        .count();
    Ok(FeatureTraining {
        bundle,
        held_out_accuracy: correct as f64 / held.len() as f64,
        epochs_run: outcome.epochs_run,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image(seed: u64) -> Image {
        let data = (0..16 * 16 * 3).map(|i| ((i as u64 * 31 + seed * 7) % 13) as f64 / 13.0).collect();
        Image::new(16, 16, 3, data).unwrap()
    }

    #[test]
    fn zero_weights_give_zero_activations() {
        let spec = NetworkSpec::feature_net(16, 16);
        let b = WeightBundle::zeros(&spec).unwrap();
        let acts = forward_features(&b, &image(1), &["conv1_1", "conv3_2", "fc2"]).unwrap();
        assert_eq!(acts.len(), 3);
        for t in acts.values() {
            assert!(t.data().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn pooling_halves_spatial_size() {
        let spec = NetworkSpec::feature_net(32, 32);
        let b = WeightBundle::init(&spec, 1).unwrap();
        let img = Image::new(32, 32, 3, vec![0.5; 32 * 32 * 3]).unwrap();
        let acts = forward_features(&b, &img, &["conv1_1", "conv2_1", "conv3_1", "conv4_1"]).unwrap();
        assert_eq!(acts["conv1_1"].shape(), &[32, 32, 16]);
        assert_eq!(acts["conv2_1"].shape(), &[16, 16, 32]);
        assert_eq!(acts["conv3_1"].shape(), &[8, 8, 64]);
        assert_eq!(acts["conv4_1"].shape(), &[4, 4, 64]);
        let mut prev = usize::MAX;
        for name in ["conv1_1", "conv2_1", "conv3_1", "conv4_1"] {
            let s = acts[name].shape()[0];
            assert!(s <= prev);
            prev = s;
        }
    }

    #[test]
    fn forward_is_pure() {
        let spec = NetworkSpec::feature_net(16, 16);
        let b = WeightBundle::init(&spec, 9).unwrap();
        let a1 = forward_features(&b, &image(3), &["conv2_2", "conv4_2"]).unwrap();
        let a2 = forward_features(&b, &image(3), &["conv2_2", "conv4_2"]).unwrap();
        assert_eq!(a1, a2);
    }

    #[test]
    fn unknown_layer_and_size_mismatch() {
        let spec = NetworkSpec::feature_net(16, 16);
        let b = WeightBundle::init(&spec, 9).unwrap();
        assert!(matches!(forward_features(&b, &image(3), &["conv7_1"]), Err(Error::UnknownLayer { .. })));
        let big = Image::zeros(32, 32, 3);
        assert!(matches!(forward_features(&b, &big, &["conv1_1"]), Err(Error::Shape(_))));
    }

    #[test]
    fn single_class_corpus_rejected() {
        let imgs: Vec<Image> = (0..30).map(image).collect();
        let corpus: Vec<(&Image, u8)> = imgs.iter().map(|i| (i, 0)).collect();
        let spec = NetworkSpec::feature_net(16, 16);
        let r = train_feature_extractor(&corpus, &spec, &TrainConfig::default(), 1);
        assert!(matches!(r, Err(Error::CorpusTooSmall(_))));
    }
}
