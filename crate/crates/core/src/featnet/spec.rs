use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One layer of a feed-forward network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: LayerKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerKind {
    /// Same-padded convolution.
    Conv { kernel: usize, out_channels: usize },
    /// Densely connected convolution: output = concat(input, relu(conv(input))).
    DenseConv { kernel: usize, growth: usize },
    Relu,
    /// 2×2 stride-2 max pool.
    Pool,
    /// Inverted dropout; the rate comes from the training config.
    Dropout,
    /// Fully connected layer. Spatial inputs are flattened first.
    Dense { units: usize },
}

impl LayerKind {
    pub fn has_params(&self) -> bool {
        matches!(self, LayerKind::Conv { .. } | LayerKind::DenseConv { .. } | LayerKind::Dense { .. })
    }
}

impl LayerSpec {
    fn new(name: &str, kind: LayerKind) -> Self {
        LayerSpec { name: name.to_string(), kind }
    }
}

/// Layer list plus input geometry (H, W, C).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input: [usize; 3],
    pub layers: Vec<LayerSpec>,
}

/// Output shape of a layer, without the batch axis.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LayerShape {
    Spatial { h: usize, w: usize, c: usize },
    Flat(usize),
}

impl LayerShape {
    pub fn dims(&self) -> Vec<usize> {
        match *self {
            LayerShape::Spatial { h, w, c } => vec![h, w, c],
            LayerShape::Flat(n) => vec![n],
        }
    }

    pub fn len(&self) -> usize {
        self.dims().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Kernel and bias shapes of a parameterised layer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamShape {
    pub kernel: Vec<usize>,
    pub bias: Vec<usize>,
}

fn conv(name: &str, out_channels: usize) -> LayerSpec {
    LayerSpec::new(name, LayerKind::Conv { kernel: 3, out_channels })
}

fn relu(name: &str) -> LayerSpec {
    LayerSpec::new(name, LayerKind::Relu)
}

fn pool(name: &str) -> LayerSpec {
    LayerSpec::new(name, LayerKind::Pool)
}

fn dense(name: &str, units: usize) -> LayerSpec {
    LayerSpec::new(name, LayerKind::Dense { units })
}

impl NetworkSpec {
    /// The miniature VGG used for style transfer features: four blocks of two
    /// 3×3 convs (16/32/64/64 channels) each followed by a 2×2 max pool, then
    /// two dense layers ending in a 2-way head.
    pub fn feature_net(h: usize, w: usize) -> Self {
        let mut layers = Vec::new();
        for (block, ch) in [16, 32, 64, 64].into_iter().enumerate() {
            let b = block + 1;
            layers.push(conv(&format!("conv{b}_1"), ch));
            layers.push(relu(&format!("relu{b}_1")));
            layers.push(conv(&format!("conv{b}_2"), ch));
            layers.push(relu(&format!("relu{b}_2")));
            layers.push(pool(&format!("pool{b}")));
        }
        layers.push(dense("fc1", 64));
        layers.push(relu("relu_fc1"));
        layers.push(LayerSpec::new("drop1", LayerKind::Dropout));
        layers.push(dense("fc2", 2));
        NetworkSpec { input: [h, w, 3], layers }
    }

    /// Downstream classifier architectures by tag: `mini-vgg-a` (three single
    /// conv blocks), `mini-vgg-b` (three double conv blocks) and `mini-dense`
    /// (a stem plus two densely connected blocks).
    pub fn classifier(arch: &str, h: usize, w: usize) -> Result<Self> {
        let mut layers = Vec::new();
        match arch {
            "mini-vgg-a" => {
                for (b, ch) in [(1, 8), (2, 16), (3, 32)] {
                    layers.push(conv(&format!("conv{b}_1"), ch));
                    layers.push(relu(&format!("relu{b}_1")));
                    layers.push(pool(&format!("pool{b}")));
                }
            }
            "mini-vgg-b" => {
                for (b, ch) in [(1, 8), (2, 16), (3, 32)] {
                    layers.push(conv(&format!("conv{b}_1"), ch));
                    layers.push(relu(&format!("relu{b}_1")));
                    layers.push(conv(&format!("conv{b}_2"), ch));
                    layers.push(relu(&format!("relu{b}_2")));
                    layers.push(pool(&format!("pool{b}")));
                }
            }
            "mini-dense" => {
                layers.push(conv("stem", 8));
                layers.push(relu("relu_stem"));
                layers.push(pool("pool1"));
                for b in 1..=2 {
                    layers.push(LayerSpec::new(&format!("dense{b}_1"), LayerKind::DenseConv { kernel: 3, growth: 8 }));
                    layers.push(LayerSpec::new(&format!("dense{b}_2"), LayerKind::DenseConv { kernel: 3, growth: 8 }));
                    layers.push(pool(&format!("pool{}", b + 1)));
                }
            }
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown architecture `{other}` (expected mini-vgg-a, mini-vgg-b or mini-dense)"
                )))
            }
        }
        layers.push(dense("fc1", 32));
        layers.push(relu("relu_fc1"));
        layers.push(LayerSpec::new("drop1", LayerKind::Dropout));
        layers.push(dense("fc2", 2));
        let spec = NetworkSpec { input: [h, w, 3], layers };
        spec.validate()?;
        Ok(spec)
    }

    pub fn layer_names(&self) -> Vec<String> {
        self.layers.iter().map(|l| l.name.clone()).collect()
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.layers.iter().position(|l| l.name == name).ok_or_else(|| Error::UnknownLayer {
            name: name.to_string(),
            valid: self.layer_names(),
        })
    }

    /// Checks name uniqueness, the conv–pool–conv block structure and shape
    /// consistency.
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for l in &self.layers {
            if !seen.insert(l.name.as_str()) {
                return Err(Error::InvalidArgument(format!("duplicate layer name `{}`", l.name)));
            }
        }
        let first_conv = self.layers.iter().position(|l| matches!(l.kind, LayerKind::Conv { .. } | LayerKind::DenseConv { .. }));
        let separated = first_conv.is_some_and(|i| {
            self.layers[i..].iter().skip_while(|l| !matches!(l.kind, LayerKind::Pool)).any(|l| {
                matches!(l.kind, LayerKind::Conv { .. } | LayerKind::DenseConv { .. })
            })
        });
        if !separated {
            return Err(Error::InvalidArgument(
                "network needs at least two conv blocks separated by a pool".into(),
            ));
        }
        for l in &self.layers {
            match l.kind {
                LayerKind::Conv { kernel, out_channels } if kernel % 2 == 0 || out_channels == 0 => {
                    return Err(Error::InvalidArgument(format!("layer `{}`: kernel must be odd, channels positive", l.name)));
                }
                LayerKind::DenseConv { kernel, growth } if kernel % 2 == 0 || growth == 0 => {
                    return Err(Error::InvalidArgument(format!("layer `{}`: kernel must be odd, growth positive", l.name)));
                }
                LayerKind::Dense { units: 0 } => {
                    return Err(Error::InvalidArgument(format!("layer `{}` has zero units", l.name)));
                }
                _ => {}
            }
        }
        self.shapes().map(|_| ())
    }

    /// Output shape of every layer, in order.
    pub fn shapes(&self) -> Result<Vec<LayerShape>> {
        let [h, w, c] = self.input;
        if h == 0 || w == 0 || c == 0 {
            return Err(Error::InvalidArgument(format!("input geometry {:?} must be positive", self.input)));
        }
        let mut cur = LayerShape::Spatial { h, w, c };
        let mut out = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            cur = match (&l.kind, &cur) {
                (LayerKind::Conv { out_channels, .. }, LayerShape::Spatial { h, w, .. }) => {
                    LayerShape::Spatial { h: *h, w: *w, c: *out_channels }
                }
                (LayerKind::DenseConv { growth, .. }, LayerShape::Spatial { h, w, c }) => {
                    LayerShape::Spatial { h: *h, w: *w, c: c + growth }
                }
                (LayerKind::Pool, LayerShape::Spatial { h, w, c }) => {
                    LayerShape::Spatial { h: h.div_ceil(2), w: w.div_ceil(2), c: *c }
                }
                (LayerKind::Relu | LayerKind::Dropout, s) => s.clone(),
                (LayerKind::Dense { units }, _) => LayerShape::Flat(*units),
                (_, LayerShape::Flat(_)) => {
                    return Err(Error::InvalidArgument(format!(
                        "layer `{}` needs a spatial input but follows a dense layer",
                        l.name
                    )))
                }
            };
            out.push(cur.clone());
        }
        Ok(out)
    }

    /// Kernel/bias shapes of each parameterised layer, in layer order.
    pub fn param_shapes(&self) -> Result<Vec<(String, ParamShape)>> {
        let shapes = self.shapes()?;
        let mut prev = LayerShape::Spatial { h: self.input[0], w: self.input[1], c: self.input[2] };
        let mut out = Vec::new();
        for (l, s) in self.layers.iter().zip(shapes) {
            let p = match (&l.kind, &prev) {
                (LayerKind::Conv { kernel, out_channels }, LayerShape::Spatial { c, .. }) => {
                    Some(ParamShape { kernel: vec![*kernel, *kernel, *c, *out_channels], bias: vec![*out_channels] })
                }
                (LayerKind::DenseConv { kernel, growth }, LayerShape::Spatial { c, .. }) => {
                    Some(ParamShape { kernel: vec![*kernel, *kernel, *c, *growth], bias: vec![*growth] })
                }
                (LayerKind::Dense { units }, p) => Some(ParamShape { kernel: vec![p.len(), *units], bias: vec![*units] }),
                _ => None,
            };
            if let Some(p) = p {
                out.push((l.name.clone(), p));
            }
            prev = s;
        }
        Ok(out)
    }

    /// Number of logits produced by the last layer, if it is dense.
    pub fn num_outputs(&self) -> Option<usize> {
        match self.layers.last()?.kind {
            LayerKind::Dense { units } => Some(units),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feature_net_shapes() {
        let spec = NetworkSpec::feature_net(32, 32);
        spec.validate().unwrap();
        let shapes = spec.shapes().unwrap();
        let at = |n: &str| shapes[spec.index_of(n).unwrap()].clone();
        assert_eq!(at("conv1_1"), LayerShape::Spatial { h: 32, w: 32, c: 16 });
        assert_eq!(at("conv3_1"), LayerShape::Spatial { h: 8, w: 8, c: 64 });
        assert_eq!(at("conv4_2"), LayerShape::Spatial { h: 4, w: 4, c: 64 });
        assert_eq!(at("fc2"), LayerShape::Flat(2));
        let convs = spec.layers.iter().filter(|l| matches!(l.kind, LayerKind::Conv { .. })).count();
        assert_eq!(convs, 8);
    }

    #[test]
    fn classifiers_validate() {
        for arch in ["mini-vgg-a", "mini-vgg-b", "mini-dense"] {
            let s = NetworkSpec::classifier(arch, 32, 32).unwrap();
            assert_eq!(s.num_outputs(), Some(2));
        }
        assert!(NetworkSpec::classifier("vgg16", 32, 32).is_err());
    }

    #[test]
    fn rejects_duplicate_names_and_missing_blocks() {
        let mut spec = NetworkSpec::feature_net(16, 16);
        spec.layers[1].name = "conv1_1".into();
        assert!(spec.validate().is_err());

        let flat = NetworkSpec {
            input: [8, 8, 3],
            layers: vec![conv("c1", 4), relu("r1"), dense("fc", 2)],
        };
        assert!(flat.validate().is_err());
    }

    #[test]
    fn unknown_layer_lists_valid_names() {
        let spec = NetworkSpec::feature_net(16, 16);
        match spec.index_of("conv9_9") {
            Err(Error::UnknownLayer { valid, .. }) => assert!(valid.contains(&"conv4_2".to_string())),
            other => panic!("unexpected {other:?}"),
        }
    }
}
