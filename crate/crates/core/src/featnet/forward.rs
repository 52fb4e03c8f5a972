use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{LayerKind, WeightBundle};
use crate::autodiff::{softmax_rows, Padding, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::image::Image;

/// Layer name → activation captured during a forward pass.
pub type FeatureActivations = BTreeMap<String, Tensor>;

pub enum Mode<'a> {
    Inference,
    /// Dropout layers draw inverted-dropout masks from `rng`.
    Train { dropout: f64, rng: &'a mut ChaCha8Rng },
}

/// Pixels are shifted by this amount before the first layer.
pub const INPUT_CENTER: f64 = 0.5;

/// Vars recorded by [`forward_on_tape`].
pub struct ForwardPass {
    /// Output of every executed layer, in layer order.
    pub outputs: Vec<Var>,
    /// (kernel, bias) vars of every parameterised layer that was executed.
    pub params: Vec<(Var, Var)>,
}

/// Runs `bundle` on a batched N×H×W×C input already on the tape, after
/// centring it by [`INPUT_CENTER`]. Execution
/// stops after layer `stop_after` when given. Parameters are registered as
/// trainable when `trainable` is set, otherwise as constants.
pub fn forward_on_tape(
    tape: &mut Tape,
    bundle: &WeightBundle,
    input: Var,
    trainable: bool,
    mut mode: Mode<'_>,
    stop_after: Option<usize>,
) -> Result<ForwardPass> {
    let spec = &bundle.spec;
    let last = stop_after.unwrap_or(spec.layers.len() - 1);
    let shape = tape.value(input).shape().to_vec();
    let offset = tape.constant(Tensor::full(&shape, -INPUT_CENTER));
    let mut cur = tape.weighted_sum(&[(input, 1.0), (offset, 1.0)])?;
    let mut outputs = Vec::with_capacity(last + 1);
    let mut params = Vec::new();
    let mut weights = bundle.layers.iter();
    for layer in &spec.layers[..=last] {
        cur = match &layer.kind {
            LayerKind::Conv { .. } | LayerKind::DenseConv { .. } | LayerKind::Dense { .. } => {
                let lw = weights.next().filter(|w| w.name == layer.name).ok_or_else(|| {
                    Error::InvalidArgument(format!("no weights for layer `{}`", layer.name))
                })?;
                let (k, b) = if trainable {
                    (tape.param(lw.kernel.clone()), tape.param(lw.bias.clone()))
                } else {
                    (tape.constant(lw.kernel.clone()), tape.constant(lw.bias.clone()))
                };
                params.push((k, b));
                match layer.kind {
                    LayerKind::Conv { .. } => tape.conv2d(cur, k, b, Padding::Same)?,
                    LayerKind::DenseConv { .. } => {
                        let c = tape.conv2d(cur, k, b, Padding::Same)?;
                        let r = tape.relu(c);
                        tape.concat_channels(cur, r)?
                    }
                    _ => {
                        let shape = tape.value(cur).shape().to_vec();
                        let flat = if shape.len() > 2 {
                            let n = shape[0];
                            tape.reshape(cur, &[n, shape[1..].iter().product()])?
                        } else {
                            cur
                        };
                        tape.dense(flat, k, b)?
                    }
                }
            }
            LayerKind::Relu => tape.relu(cur),
            LayerKind::Pool => tape.max_pool2d(cur)?,
            LayerKind::Dropout => match &mut mode {
                Mode::Train { dropout, rng } if *dropout > 0.0 => {
                    let keep = 1.0 - *dropout;
                    let shape = tape.value(cur).shape().to_vec();
                    let n: usize = shape.iter().product();
                    let mask = (0..n).map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 }).collect();
                    tape.mul_const(cur, Tensor::new(shape, mask)?)?
                }
                _ => cur,
            },
        };
        outputs.push(cur);
    }
    Ok(ForwardPass { outputs, params })
}

/// Stacks same-sized images into an N×H×W×C tensor.
pub fn batch_tensor(images: &[&Image]) -> Result<Tensor> {
    let first = images.first().ok_or_else(|| Error::InvalidArgument("empty image batch".into()))?;
    let (h, w, c) = first.dims();
    let mut data = Vec::with_capacity(images.len() * h * w * c);
    for img in images {
        if img.dims() != (h, w, c) {
            return Err(Error::Shape(format!("batch mixes {:?} and {:?} images", (h, w, c), img.dims())));
        }
        data.extend_from_slice(&img.data);
    }
    Tensor::new(vec![images.len(), h, w, c], data)
}

pub(crate) fn check_input(bundle: &WeightBundle, image: &Image) -> Result<()> {
    let [h, w, c] = bundle.spec.input;
    if image.dims() != (h, w, c) {
        return Err(Error::Shape(format!(
            "network expects {h}×{w}×{c} images, got {}×{}×{}",
            image.height, image.width, image.channels
        )));
    }
    Ok(())
}

/// Activations of exactly the requested layers for one image.
pub fn forward_features(bundle: &WeightBundle, image: &Image, layers: &[&str]) -> Result<FeatureActivations> {
    check_input(bundle, image)?;
    let idx: Vec<usize> = layers.iter().map(|n| bundle.spec.index_of(n)).collect::<Result<_>>()?;
    let Some(&deepest) = idx.iter().max() else {
        return Ok(FeatureActivations::new());
    };
    let mut tape = Tape::new();
    let x = tape.constant(batch_tensor(&[image])?);
    let pass = forward_on_tape(&mut tape, bundle, x, false, Mode::Inference, Some(deepest))?;
    let mut out = FeatureActivations::new();
    for (name, i) in layers.iter().zip(idx) {
        let t = tape.value(pass.outputs[i]);
        let unbatched = t.clone().reshape(&t.shape()[1..])?;
        out.insert(name.to_string(), unbatched);
    }
    Ok(out)
}

/// Softmax class probabilities (N×K, row-major) for a batch of images.
pub fn predict_proba(bundle: &WeightBundle, images: &[&Image]) -> Result<Vec<f64>> {
    for img in images {
        check_input(bundle, img)?;
    }
    if images.is_empty() {
        return Ok(Vec::new());
    }
    let k = bundle
        .spec
        .num_outputs()
        .ok_or_else(|| Error::InvalidArgument("network has no dense output head".into()))?;
    let mut tape = Tape::new();
    let x = tape.constant(batch_tensor(images)?);
    let pass = forward_on_tape(&mut tape, bundle, x, false, Mode::Inference, None)?;
    let logits = tape.value(*pass.outputs.last().expect("non-empty network"));
    Ok(softmax_rows(logits.data(), k))
}
