//! Neural style transfer: optimise a base image so its deep features match a
//! content image and its Gram statistics match a style image.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::autodiff::{adam_step, AdamState, Tape, Tensor, Var};
use crate::error::{shape_err, Error, Result};
use crate::featnet::{batch_tensor, check_input, forward_features, forward_on_tape, Mode, WeightBundle};
use crate::image::Image;
use crate::seeds;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitPolicy {
    Content,
    Noise,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    Max,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StyleTransferConfig {
    pub content_weight: f64,
    pub style_weight: f64,
    pub content_layer: String,
    pub style_layers: Vec<String>,
    pub iterations: usize,
    pub learning_rate: f64,
    pub init: InitPolicy,
    pub pooling: Pooling,
}

impl Default for StyleTransferConfig {
    fn default() -> Self {
        StyleTransferConfig {
            content_weight: 0.025,
            style_weight: 1.0,
            content_layer: "conv4_2".into(),
            style_layers: ["conv1_1", "conv2_1", "conv3_1", "conv4_1"].map(String::from).to_vec(),
            iterations: 200,
            learning_rate: 0.01,
            init: InitPolicy::Content,
            pooling: Pooling::Max,
        }
    }
}

impl StyleTransferConfig {
    /// Checks weights, iteration count and learning rate. Layer names are
    /// checked against a network with [`validate_for`](Self::validate_for).
    pub fn validate(&self) -> Result<()> {
        let (wc, ws) = (self.content_weight, self.style_weight);
        if !(wc.is_finite() && ws.is_finite()) || wc < 0.0 || ws < 0.0 {
            return Err(Error::Config(format!("loss weights must be finite and ≥ 0, got w_c={wc}, w_s={ws}")));
        }
        if wc == 0.0 && ws == 0.0 {
            return Err(Error::Config("content and style weights are both zero".into()));
        }
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be at least 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if self.style_layers.is_empty() {
            return Err(Error::Config("at least one style layer is required".into()));
        }
        Ok(())
    }

    pub fn validate_for(&self, bundle: &WeightBundle) -> Result<()> {
        self.validate()?;
        bundle.spec.index_of(&self.content_layer)?;
        for l in &self.style_layers {
            bundle.spec.index_of(l)?;
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serialises");
        hex::encode(Sha256::digest(&json))
    }
}

/// C×C channel Gram matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct GramMatrix {
    pub channels: usize,
    pub data: Vec<f64>,
    /// Number of spatial positions H·W the inner products were divided by.
    pub normalization: f64,
}

impl GramMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.channels + j]
    }

    /// Largest |G[i][j] − G[j][i]|.
    pub fn asymmetry(&self) -> f64 {
        let c = self.channels;
        let mut worst = 0.0f64;
        for i in 0..c {
            for j in 0..i {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }
}

pub fn gram_matrix(activation: &Tensor) -> Result<GramMatrix> {
    let (positions, channels) = match activation.shape() {
        [h, w, c] | [1, h, w, c] => (h * w, *c),
        s => return shape_err(format!("gram_matrix expects an H×W×C activation, got {s:?}")),
    };
    if activation.is_empty() {
        return shape_err("gram_matrix of an empty activation");
    }
    let data = crate::autodiff::kernels::gram(activation.data(), positions, channels);
    Ok(GramMatrix { channels, data, normalization: positions as f64 })
}

fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

pub fn content_loss(base: &Tensor, target: &Tensor) -> Result<f64> {
    if base.shape() != target.shape() {
        return shape_err(format!("content representations differ: {:?} vs {:?}", base.shape(), target.shape()));
    }
    if base.is_empty() {
        return shape_err("empty content representation");
    }
    Ok(mse(base.data(), target.data()))
}

/// Mean over style layers of the Gram-matrix MSE.
pub fn style_loss(base: &BTreeMap<String, GramMatrix>, target: &BTreeMap<String, GramMatrix>) -> Result<f64> {
    let missing: Vec<&str> = base
        .keys()
        .filter(|k| !target.contains_key(*k))
        .chain(target.keys().filter(|k| !base.contains_key(*k)))
        .map(String::as_str)
        .collect();
    if !missing.is_empty() {
        return Err(Error::InvalidArgument(format!("style layer sets differ; unmatched: {}", missing.join(", "))));
    }
    if base.is_empty() {
        return Err(Error::InvalidArgument("no style layers".into()));
    }
    let mut sum = 0.0;
    for (name, g) in base {
        let a = &target[name];
        if g.channels != a.channels {
            return shape_err(format!("layer `{name}`: Gram sizes {} and {} differ", g.channels, a.channels));
        }
        sum += mse(&g.data, &a.data);
    }
    Ok(sum / base.len() as f64)
}

pub fn total_loss(content: f64, style: f64, cfg: &StyleTransferConfig) -> Result<f64> {
    if content.is_nan() || style.is_nan() || content < 0.0 || style < 0.0 {
        return Err(Error::InvalidArgument(format!("losses must be ≥ 0, got L_c={content}, L_s={style}")));
    }
    Ok(cfg.content_weight * content + cfg.style_weight * style)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub content: f64,
    pub style: f64,
    pub total: f64,
    pub per_layer: Vec<(String, f64)>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub content_id: String,
    pub style_id: String,
    pub seed: u64,
    pub config_digest: String,
}

#[derive(Clone, Debug)]
pub struct SynthesisResult {
    pub image: Image,
    /// Losses of the base image before each optimisation step.
    pub trace: Vec<LossBreakdown>,
    /// Losses of the returned image.
    pub final_loss: LossBreakdown,
    pub provenance: Provenance,
}

/// Precomputed content and style targets for one (content, style) pair.
pub struct Targets {
    content: Tensor,
    style: Vec<(String, Tensor)>,
    content_idx: usize,
    style_idx: Vec<usize>,
    deepest: usize,
}

impl Targets {
    pub fn new(bundle: &WeightBundle, content: &Image, style: &Image, cfg: &StyleTransferConfig) -> Result<Self> {
        cfg.validate_for(bundle)?;
        check_input(bundle, content)?;
        check_input(bundle, style)?;
        let spec = &bundle.spec;
        let content_idx = spec.index_of(&cfg.content_layer)?;
        let style_idx: Vec<usize> = cfg.style_layers.iter().map(|l| spec.index_of(l)).collect::<Result<_>>()?;
        let deepest = style_idx.iter().copied().chain([content_idx]).max().unwrap_or(content_idx);
        let p = forward_features(bundle, content, &[&cfg.content_layer])?;
        let content_t = p[&cfg.content_layer].clone();
        let names: Vec<&str> = cfg.style_layers.iter().map(String::as_str).collect();
        let a = forward_features(bundle, style, &names)?;
        let mut style_t = Vec::new();
        for name in &cfg.style_layers {
            let g = gram_matrix(&a[name])?;
            style_t.push((name.clone(), Tensor::new(vec![g.channels, g.channels], g.data)?));
        }
        Ok(Targets { content: content_t, style: style_t, content_idx, style_idx, deepest })
    }
}

/// Loss of `pixels` against `targets` and its gradient with respect to the
/// pixels.
pub fn loss_and_gradient(
    bundle: &WeightBundle,
    targets: &Targets,
    pixels: &Image,
    cfg: &StyleTransferConfig,
) -> Result<(LossBreakdown, Tensor)> {
    let mut tape = Tape::new();
    let (lb, x, total) = record_loss(&mut tape, bundle, targets, pixels, cfg, true)?;
    let grads = tape.backward(total)?;
    let g = grads.wrt(x);
    let g = g.reshape(&[pixels.height, pixels.width, pixels.channels])?;
    Ok((lb, g))
}

/// Loss of `pixels` against `targets` without a gradient.
pub fn evaluate_loss(
    bundle: &WeightBundle,
    targets: &Targets,
    pixels: &Image,
    cfg: &StyleTransferConfig,
) -> Result<LossBreakdown> {
    let mut tape = Tape::new();
    Ok(record_loss(&mut tape, bundle, targets, pixels, cfg, false)?.0)
}

fn record_loss(
    tape: &mut Tape,
    bundle: &WeightBundle,
    targets: &Targets,
    pixels: &Image,
    cfg: &StyleTransferConfig,
    grad: bool,
) -> Result<(LossBreakdown, Var, Var)> {
    let input = batch_tensor(&[pixels])?;
    let x = if grad { tape.param(input) } else { tape.constant(input) };
    let pass = forward_on_tape(tape, bundle, x, false, Mode::Inference, Some(targets.deepest))?;
    let f = pass.outputs[targets.content_idx];
    let f = tape.reshape(f, targets.content.shape())?;
    let p = tape.constant(targets.content.clone());
    let lc = tape.mse(f, p)?;
    let weight = 1.0 / targets.style.len() as f64;
    let mut terms = Vec::with_capacity(targets.style.len());
    let mut per_layer = Vec::with_capacity(targets.style.len());
    for ((name, a), &idx) in targets.style.iter().zip(&targets.style_idx) {
        let g = tape.gram(pass.outputs[idx])?;
        let a = tape.constant(a.clone());
        let l = tape.mse(g, a)?;
        per_layer.push((name.clone(), tape.value(l).item()));
        terms.push((l, weight));
    }
    let ls = tape.weighted_sum(&terms)?;
    let lt = tape.weighted_sum(&[(lc, cfg.content_weight), (ls, cfg.style_weight)])?;
    let lb = LossBreakdown {
        content: tape.value(lc).item(),
        style: tape.value(ls).item(),
        total: tape.value(lt).item(),
        per_layer,
    };
    Ok((lb, x, lt))
}

/// Runs `cfg.iterations` Adam steps on the pixels of a base image, clamping
/// to [0,1] after each step.
pub fn synthesize(
    content: &Image,
    style: &Image,
    bundle: &WeightBundle,
    cfg: &StyleTransferConfig,
    seed: u64,
) -> Result<SynthesisResult> {
    let targets = Targets::new(bundle, content, style, cfg)?;
    let mut base = match cfg.init {
        InitPolicy::Content => content.clone(),
        InitPolicy::Noise => {
            let mut rng = seeds::rng(seed, &[seeds::tag("nst-noise")]);
            let data = (0..content.data.len()).map(|_| rng.random::<f64>()).collect();
            Image::new(content.height, content.width, content.channels, data)?
        }
    };
    let mut adam = AdamState::new(base.data.len(), cfg.learning_rate);
    let mut trace = Vec::with_capacity(cfg.iterations);
    let shape = vec![base.height, base.width, base.channels];
    for it in 0..cfg.iterations {
        let (lb, grad) = loss_and_gradient(bundle, &targets, &base, cfg)?;
        if !lb.total.is_finite() || !grad.all_finite() {
            return Err(Error::NonFinite { context: "style transfer loss".into(), iteration: it });
        }
        trace.push(lb);
        let mut px = Tensor::new(shape.clone(), std::mem::take(&mut base.data))?;
        adam_step(&mut px, &grad, &mut adam)?;
        base.data = px.into_data();
        base.clamp_unit();
    }
    let final_loss = evaluate_loss(bundle, &targets, &base, cfg)?;
    if !final_loss.total.is_finite() {
        return Err(Error::NonFinite { context: "style transfer loss".into(), iteration: cfg.iterations });
    }
    Ok(SynthesisResult {
        image: base,
        trace,
        final_loss,
        provenance: Provenance { seed, config_digest: cfg.digest(), ..Provenance::default() },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::featnet::NetworkSpec;
    use proptest::prelude::*;

    fn gram_from(c: usize, data: Vec<f64>) -> GramMatrix {
        GramMatrix { channels: c, data, normalization: 1.0 }
    }

    fn pattern(h: usize, w: usize, phase: f64) -> Image {
        let mut img = Image::zeros(h, w, 3);
        for y in 0..h {
            for x in 0..w {
                for c in 0..3 {
                    let v = 0.5 + 0.4 * ((x as f64 + phase) * 0.7 + y as f64 * 0.3 + c as f64).sin();
                    img.set(y, x, c, v);
                }
            }
        }
        img
    }

    /// Cyclic Jacobi eigenvalue sweep for symmetric matrices.
    pub(crate) fn jacobi_eigenvalues(mut a: Vec<f64>, n: usize) -> Vec<f64> {
        for _ in 0..100 {
            let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i * n + j].powi(2)).sum();
            if off < 1e-30 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a[p * n + q];
                    if apq.abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[k * n + p];
                        let akq = a[k * n + q];
                        a[k * n + p] = c * akp - s * akq;
                        a[k * n + q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[p * n + k];
                        let aqk = a[q * n + k];
                        a[p * n + k] = c * apk - s * aqk;
                        a[q * n + k] = s * apk + c * aqk;
                    }
                }
            }
        }
        (0..n).map(|i| a[i * n + i]).collect()
    }

    #[test]
    fn gram_examples() {
        let g = gram_matrix(&Tensor::new(vec![1, 2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap()).unwrap();
        assert_eq!(g.data, vec![0.5, 0.0, 0.0, 0.5]);
        let g = gram_matrix(&Tensor::new(vec![1, 2, 2], vec![1.0; 4]).unwrap()).unwrap();
        assert_eq!(g.data, vec![1.0; 4]);
    }

    #[test]
    fn gram_matches_inner_products() {
        let (h, w, c) = (3, 4, 5);
        let data: Vec<f64> = (0..h * w * c).map(|i| ((i * 37 % 11) as f64 - 5.0) / 3.0).collect();
        let g = gram_matrix(&Tensor::new(vec![h, w, c], data.clone()).unwrap()).unwrap();
        for i in 0..c {
            for j in 0..c {
                let dot: f64 = (0..h * w).map(|p| data[p * c + i] * data[p * c + j]).sum();
                assert!((g.get(i, j) - dot / 12.0).abs() < 1e-12);
            }
        }
        assert!(g.asymmetry() <= 1e-12);
    }

    #[test]
    fn jacobi_oracle_diagonalises() {
        let mut e = jacobi_eigenvalues(vec![2.0, 1.0, 1.0, 2.0], 2);
        e.sort_by(f64::total_cmp);
        assert!((e[0] - 1.0).abs() < 1e-12 && (e[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn loss_examples() {
        let f = Tensor::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        let p = Tensor::from_vec(vec![1.0, 2.0, 3.0, 5.0]);
        assert_eq!(content_loss(&f, &f).unwrap(), 0.0);
        assert_eq!(content_loss(&f, &p).unwrap(), 0.25);
        assert!(content_loss(&f, &Tensor::from_vec(vec![1.0])).is_err());

        let one = |g: GramMatrix| BTreeMap::from([("conv1_1".to_string(), g)]);
        let l = style_loss(&one(gram_from(2, vec![1.0, 0.0, 0.0, 1.0])), &one(gram_from(2, vec![0.0; 4]))).unwrap();
        assert_eq!(l, 0.5);
        let base = BTreeMap::from([
            ("a".to_string(), gram_from(1, vec![0.2f64.sqrt()])),
            ("b".to_string(), gram_from(1, vec![0.4f64.sqrt()])),
        ]);
        let zero = BTreeMap::from([("a".to_string(), gram_from(1, vec![0.0])), ("b".to_string(), gram_from(1, vec![0.0]))]);
        assert!((style_loss(&base, &zero).unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(style_loss(&base, &base).unwrap(), 0.0);
        let only_a = BTreeMap::from([("a".to_string(), gram_from(1, vec![0.0]))]);
        let err = style_loss(&base, &only_a).unwrap_err().to_string();
        assert!(err.contains('b'), "{err}");
    }

    #[test]
    fn total_loss_examples() {
        let cfg = StyleTransferConfig::default();
        assert!((total_loss(2.0, 3.0, &cfg).unwrap() - 3.05).abs() < 1e-15);
        assert_eq!(total_loss(0.0, 0.0, &cfg).unwrap(), 0.0);
        let cfg0 = StyleTransferConfig { content_weight: 0.0, ..cfg.clone() };
        assert_eq!(total_loss(2.0, 3.0, &cfg0).unwrap(), 3.0);
        assert!(total_loss(-1.0, 3.0, &cfg).is_err());
    }

    #[test]
    fn config_validation() {
        let ok = StyleTransferConfig::default();
        assert!(ok.validate().is_ok());
        assert!(StyleTransferConfig { iterations: 0, ..ok.clone() }.validate().is_err());
        assert!(StyleTransferConfig { content_weight: 0.0, style_weight: 0.0, ..ok.clone() }.validate().is_err());
        assert!(StyleTransferConfig { style_weight: -1.0, ..ok.clone() }.validate().is_err());
        let bundle = WeightBundle::init(&NetworkSpec::feature_net(8, 8), 1).unwrap();
        let bad = StyleTransferConfig { content_layer: "conv9_9".into(), ..ok };
        assert!(matches!(bad.validate_for(&bundle), Err(Error::UnknownLayer { .. })));
    }

    #[test]
    fn fixpoint_when_style_equals_content() {
        let bundle = WeightBundle::init(&NetworkSpec::feature_net(16, 16), 3).unwrap();
        let img = pattern(16, 16, 0.0);
        let cfg = StyleTransferConfig { iterations: 3, ..StyleTransferConfig::default() };
        let targets = Targets::new(&bundle, &img, &img, &cfg).unwrap();
        let (lb, g) = loss_and_gradient(&bundle, &targets, &img, &cfg).unwrap();
        assert_eq!(lb.total, 0.0);
        assert!(g.data().iter().all(|&v| v == 0.0));
        let r = synthesize(&img, &img, &bundle, &cfg, 5).unwrap();
        assert_eq!(r.image, img);
        assert_eq!(r.trace.len(), 3);
    }

    #[test]
    fn one_iteration_and_size_mismatch() {
        let bundle = WeightBundle::init(&NetworkSpec::feature_net(8, 8), 3).unwrap();
        let cfg = StyleTransferConfig { iterations: 1, ..StyleTransferConfig::default() };
        let r = synthesize(&pattern(8, 8, 0.0), &pattern(8, 8, 2.0), &bundle, &cfg, 1).unwrap();
        assert_eq!(r.trace.len(), 1);
        assert!(r.image.data.iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(matches!(synthesize(&pattern(16, 16, 0.0), &pattern(8, 8, 0.0), &bundle, &cfg, 1), Err(Error::Shape(_))));
    }

    #[test]
    fn trace_decomposes_and_is_deterministic() {
        let bundle = WeightBundle::init(&NetworkSpec::feature_net(8, 8), 4).unwrap();
        let cfg = StyleTransferConfig { iterations: 5, ..StyleTransferConfig::default() };
        let a = synthesize(&pattern(8, 8, 0.0), &pattern(8, 8, 3.0), &bundle, &cfg, 9).unwrap();
        let b = synthesize(&pattern(8, 8, 0.0), &pattern(8, 8, 3.0), &bundle, &cfg, 9).unwrap();
        assert_eq!(a.image, b.image);
        for lb in &a.trace {
            assert!((lb.total - (cfg.content_weight * lb.content + cfg.style_weight * lb.style)).abs() <= 1e-12);
        }
        assert_eq!(a.provenance.config_digest, cfg.digest());
    }

    #[test]
    fn pixel_gradient_matches_finite_differences() {
        let bundle = WeightBundle::init(&NetworkSpec::feature_net(8, 8), 11).unwrap();
        let cfg = StyleTransferConfig::default();
        let content = pattern(8, 8, 0.0);
        let targets = Targets::new(&bundle, &content, &pattern(8, 8, 2.5), &cfg).unwrap();
        let x = pattern(8, 8, 1.0);
        let (_, g) = loss_and_gradient(&bundle, &targets, &x, &cfg).unwrap();
        let h = 1e-5;
        for i in (0..x.data.len()).step_by(7) {
            let mut xp = x.clone();
            xp.data[i] += h;
            let mut xm = x.clone();
            xm.data[i] -= h;
            let fd = (evaluate_loss(&bundle, &targets, &xp, &cfg).unwrap().total
                - evaluate_loss(&bundle, &targets, &xm, &cfg).unwrap().total)
                / (2.0 * h);
            let an = g.data()[i];
            let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-8);
            assert!(rel <= 1e-4, "pixel {i}: fd {fd} vs {an}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn gram_is_symmetric_psd(h in 1usize..5, w in 1usize..5, c in 1usize..7, seed in any::<u64>()) {
            let mut rng = seeds::rng(seed, &[]);
            let data: Vec<f64> = (0..h * w * c).map(|_| rand::Rng::random_range(&mut rng, -2.0..2.0)).collect();
            let g = gram_matrix(&Tensor::new(vec![h, w, c], data).unwrap()).unwrap();
            prop_assert!(g.asymmetry() <= 1e-12);
            for i in 0..c {
                prop_assert!(g.get(i, i) >= 0.0);
            }
            let min = jacobi_eigenvalues(g.data.clone(), c).into_iter().fold(f64::INFINITY, f64::min);
            prop_assert!(min >= -1e-10);
        }
    }
}
