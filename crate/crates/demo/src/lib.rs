//! Browser bindings for three small explorers: style transfer stepped one
//! Adam update at a time, the affine augmentations, and the balancing
//! threshold used for pseudo-labels. Everything runs on the procedural
//! corpus, so the page needs no data files.

use rand::Rng;
use wasm_bindgen::prelude::*;

use styleforge::augment::{apply_composed, random_augment, AffineOp, AugmentRanges, Axis};
use styleforge::autodiff::{adam_step, AdamState, Tensor};
use styleforge::featnet::{NetworkSpec, WeightBundle};
use styleforge::image::Image;
use styleforge::nst::{loss_and_gradient, LossBreakdown, StyleTransferConfig, Targets};
use styleforge::pipeline::{balance_threshold, corpus_image, rank_split_labels, BENIGN, MALIGNANT};
use styleforge::seeds;
use styleforge::trainer::auc;

/// Side of every demo image in pixels.
pub const SIZE: usize = 32;
const CORPUS_SEED: u64 = 7;

fn err(e: styleforge::Error) -> String {
    e.to_string()
}

fn corpus(label: u8, index: u32) -> Image {
    corpus_image(label, index as usize, SIZE, SIZE, CORPUS_SEED)
}

/// RGBA bytes of a corpus image, for a canvas `ImageData`.
#[wasm_bindgen]
pub fn corpus_rgba(malignant: bool, index: u32) -> Vec<u8> {
    corpus(if malignant { MALIGNANT } else { BENIGN }, index).to_rgba8()
}

#[wasm_bindgen]
pub fn image_size() -> u32 {
    SIZE as u32
}

/// Style transfer from a benign content image towards a malignant style
/// image, advanced on demand.
#[wasm_bindgen]
pub struct NstSession {
    bundle: WeightBundle,
    cfg: StyleTransferConfig,
    targets: Targets,
    content: Image,
    style: Image,
    base: Image,
    adam: AdamState,
    iteration: u32,
    last: Option<LossBreakdown>,
}

#[wasm_bindgen]
impl NstSession {
    /// The feature network is randomly initialised from `seed`; random
    /// convolutional features already carry usable texture statistics.
    #[wasm_bindgen(constructor)]
    pub fn new(content_index: u32, style_index: u32, seed: u32, learning_rate: f64) -> Result<NstSession, String> {
        let bundle = WeightBundle::init(&NetworkSpec::feature_net(SIZE, SIZE), u64::from(seed)).map_err(err)?;
        let cfg = StyleTransferConfig { learning_rate, ..StyleTransferConfig::default() };
        cfg.validate().map_err(err)?;
        let content = corpus(BENIGN, content_index);
        let style = corpus(MALIGNANT, style_index);
        let targets = Targets::new(&bundle, &content, &style, &cfg).map_err(err)?;
        let adam = AdamState::new(content.data.len(), learning_rate);
        Ok(NstSession { bundle, cfg, targets, base: content.clone(), content, style, adam, iteration: 0, last: None })
    }

    /// Runs `n` optimisation steps and returns the total loss measured before
    /// the last of them.
    pub fn step(&mut self, n: u32) -> Result<f64, String> {
        let shape = [self.base.height, self.base.width, self.base.channels];
        for _ in 0..n {
            let (lb, grad) = loss_and_gradient(&self.bundle, &self.targets, &self.base, &self.cfg).map_err(err)?;
            if !lb.total.is_finite() {
                return Err(format!("loss became non-finite at iteration {}", self.iteration));
            }
            let mut px = Tensor::new(shape.to_vec(), std::mem::take(&mut self.base.data)).map_err(err)?;
            adam_step(&mut px, &grad, &mut self.adam).map_err(err)?;
            self.base.data = px.into_data();
            self.base.clamp_unit();
            self.iteration += 1;
            self.last = Some(lb);
        }
        Ok(self.total_loss())
    }

    pub fn iteration(&self) -> u32 {
        self.iteration
    }

    pub fn total_loss(&self) -> f64 {
        self.last.as_ref().map_or(f64::NAN, |l| l.total)
    }

    pub fn content_loss(&self) -> f64 {
        self.last.as_ref().map_or(f64::NAN, |l| l.content)
    }

    pub fn style_loss(&self) -> f64 {
        self.last.as_ref().map_or(f64::NAN, |l| l.style)
    }

    pub fn image_rgba(&self) -> Vec<u8> {
        self.base.to_rgba8()
    }

    pub fn content_rgba(&self) -> Vec<u8> {
        self.content.to_rgba8()
    }

    pub fn style_rgba(&self) -> Vec<u8> {
        self.style.to_rgba8()
    }
}

impl NstSession {
    pub fn image(&self) -> &Image {
        &self.base
    }
}

/// One explicit rotation → zoom → shear → optional reflection of a corpus
/// image.
#[wasm_bindgen]
pub fn augment_rgba(
    malignant: bool,
    index: u32,
    rotation_deg: f64,
    zoom: f64,
    shear: f64,
    reflect: bool,
) -> Result<Vec<u8>, String> {
    let img = corpus(if malignant { MALIGNANT } else { BENIGN }, index);
    let mut ops = vec![AffineOp::Rotation(rotation_deg), AffineOp::Zoom(zoom), AffineOp::Shear(shear)];
    if reflect {
        ops.push(AffineOp::Reflection(Axis::Horizontal));
    }
    Ok(apply_composed(&img, &ops).map_err(err)?.to_rgba8())
}

/// A draw from the default training-time augmentation ranges.
#[wasm_bindgen]
pub fn random_augment_rgba(malignant: bool, index: u32, seed: u32) -> Result<Vec<u8>, String> {
    let img = corpus(if malignant { MALIGNANT } else { BENIGN }, index);
    Ok(random_augment(&img, &AugmentRanges::default(), u64::from(seed)).map_err(err)?.to_rgba8())
}

/// Scores for a simulated batch of synthetic images and the balancing
/// threshold chosen for them.
#[wasm_bindgen]
pub struct ThresholdView {
    scores: Vec<f64>,
    truth: Vec<u8>,
    labels: Vec<u8>,
    threshold: f64,
    auc: f64,
}

#[wasm_bindgen]
impl ThresholdView {
    /// `n` scores; the hidden malignant-like fraction is `skew`, and the two
    /// groups' means sit `separation` apart around 0.5.
    #[wasm_bindgen(constructor)]
    pub fn new(n: u32, separation: f64, skew: f64, seed: u32) -> Result<ThresholdView, String> {
        if n < 2 {
            return Err("need at least two scores".into());
        }
        if !(0.0..=1.0).contains(&skew) {
            return Err(format!("skew must lie in [0, 1], got {skew}"));
        }
        let mut rng = seeds::rng(u64::from(seed), &[seeds::tag("threshold-demo")]);
        let mut scores = Vec::with_capacity(n as usize);
        let mut truth = Vec::with_capacity(n as usize);
        for _ in 0..n {
            let positive = rng.random_bool(skew);
            // Sum of four uniforms: a cheap bell shape with spread ≈ 0.14.
            let noise: f64 = (0..4).map(|_| rng.random::<f64>()).sum::<f64>() / 4.0 - 0.5;
            let centre = if positive { 0.5 + separation / 2.0 } else { 0.5 - separation / 2.0 };
            scores.push((centre + noise).clamp(0.0, 1.0));
            truth.push(u8::from(positive));
        }
        let (threshold, labels) = match balance_threshold(&scores) {
            Ok(r) => (r.threshold, scores.iter().map(|&s| u8::from(s >= r.threshold)).collect()),
            Err(_) => (f64::NAN, rank_split_labels(&scores)),
        };
        let auc = auc(&scores, &truth).unwrap_or(f64::NAN);
        Ok(ThresholdView { scores, truth, labels, threshold, auc })
    }

    pub fn scores(&self) -> Vec<f64> {
        self.scores.clone()
    }

    /// Hidden group of each score, 1 for malignant-like.
    pub fn truth(&self) -> Vec<u8> {
        self.truth.clone()
    }

    /// Pseudo-labels from the balancing threshold.
    pub fn labels(&self) -> Vec<u8> {
        self.labels.clone()
    }

    /// NaN when ties forced the rank split.
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// AUC of the scores against the hidden groups.
    pub fn auc(&self) -> f64 {
        self.auc
    }

    /// Pseudo-labels that agree with the hidden group.
    pub fn agreement(&self) -> f64 {
        let same = self.labels.iter().zip(&self.truth).filter(|(a, b)| a == b).count();
        same as f64 / self.labels.len() as f64
    }

    /// Fraction labelled malignant when cutting at `cut` instead.
    pub fn positive_rate_at(&self, cut: f64) -> f64 {
        self.scores.iter().filter(|&&s| s >= cut).count() as f64 / self.scores.len() as f64
    }
}
