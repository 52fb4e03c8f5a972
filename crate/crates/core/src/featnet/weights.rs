//! Weight bundles and the `.sfwb` binary format.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "SFWB"                          magic
//! u32 version                     currently 1
//! u32 layer count
//! per layer:
//!   u32 name length, UTF-8 name
//!   kernel: u32 rank, rank × u32 dims, prod(dims) × f64
//!   bias:   u32 rank, rank × u32 dims, prod(dims) × f64
//! trailer:
//!   u64 training seed
//!   u32 length, UTF-8 JSON {"spec": NetworkSpec, "digest": String}
//! ```

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::NetworkSpec;
use crate::autodiff::Tensor;
use crate::error::{Error, Result, WeightFileError};

pub const MAGIC: &[u8; 4] = b"SFWB";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct LayerWeights {
    pub name: String,
    pub kernel: Tensor,
    pub bias: Tensor,
}

/// Parameters of every conv/dense layer of `spec`, in layer order.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightBundle {
    pub spec: NetworkSpec,
    pub layers: Vec<LayerWeights>,
    pub version: u32,
    pub seed: u64,
    /// Digest of the configuration that produced these weights.
    pub digest: String,
}

#[derive(Serialize, Deserialize)]
struct Trailer {
    spec: NetworkSpec,
    digest: String,
}

impl WeightBundle {
    /// He-normal kernels and zero biases, drawn from `seed`.
    pub fn init(spec: &NetworkSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::new();
        for (name, shape) in spec.param_shapes()? {
            let fan_in: usize = shape.kernel[..shape.kernel.len() - 1].iter().product();
            let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
            let n: usize = shape.kernel.iter().product();
            let data = (0..n).map(|_| normal.sample(&mut rng)).collect();
            layers.push(LayerWeights {
                name,
                kernel: Tensor::new(shape.kernel, data)?,
                bias: Tensor::zeros(&shape.bias),
            });
        }
        Ok(WeightBundle { spec: spec.clone(), layers, version: FORMAT_VERSION, seed, digest: String::new() })
    }

    pub fn zeros(spec: &NetworkSpec) -> Result<Self> {
        let mut b = Self::init(spec, 0)?;
        for l in &mut b.layers {
            l.kernel.data_mut().fill(0.0);
        }
        Ok(b)
    }

    pub fn layer(&self, name: &str) -> Option<&LayerWeights> {
        self.layers.iter().find(|l| l.name == name)
    }

    /// Every parameterised layer of the spec must appear once with matching shapes.
    pub fn check_against_spec(&self) -> Result<()> {
        let expected = self.spec.param_shapes()?;
        if expected.len() != self.layers.len() {
            return Err(WeightFileError::Malformed(format!(
                "bundle has {} layers, spec expects {}",
                self.layers.len(),
                expected.len()
            ))
            .into());
        }
        for ((name, shape), l) in expected.iter().zip(&self.layers) {
            if *name != l.name {
                return Err(WeightFileError::Malformed(format!("expected layer `{name}`, found `{}`", l.name)).into());
            }
            if l.kernel.shape() != shape.kernel.as_slice() {
                return Err(WeightFileError::ShapeMismatch {
                    layer: name.clone(),
                    expected: shape.kernel.clone(),
                    found: l.kernel.shape().to_vec(),
                }
                .into());
            }
            if l.bias.shape() != shape.bias.as_slice() {
                return Err(WeightFileError::ShapeMismatch {
                    layer: name.clone(),
                    expected: shape.bias.clone(),
                    found: l.bias.shape().to_vec(),
                }
                .into());
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&self.version.to_le_bytes());
        out.extend_from_slice(&(self.layers.len() as u32).to_le_bytes());
        for l in &self.layers {
            out.extend_from_slice(&(l.name.len() as u32).to_le_bytes());
            out.extend_from_slice(l.name.as_bytes());
            for t in [&l.kernel, &l.bias] {
                out.extend_from_slice(&(t.rank() as u32).to_le_bytes());
                for &d in t.shape() {
                    out.extend_from_slice(&(d as u32).to_le_bytes());
                }
                for v in t.data() {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        out.extend_from_slice(&self.seed.to_le_bytes());
        let trailer = serde_json::to_vec(&Trailer { spec: self.spec.clone(), digest: self.digest.clone() })
            .expect("spec serializes");
        out.extend_from_slice(&(trailer.len() as u32).to_le_bytes());
        out.extend_from_slice(&trailer);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0, section: "header".into() };
        let magic: [u8; 4] = r.take(4)?.try_into().expect("4 bytes");
        if &magic != MAGIC {
            return Err(WeightFileError::BadMagic(magic).into());
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(WeightFileError::UnsupportedVersion(version).into());
        }
        let count = r.u32()? as usize;
        let mut layers = Vec::with_capacity(count.min(1024));
        for i in 0..count {
            r.section = format!("layer #{i} name");
            let len = r.u32()? as usize;
            let name = String::from_utf8(r.take(len)?.to_vec())
                .map_err(|_| WeightFileError::Malformed(format!("layer #{i} name is not UTF-8")))?;
            r.section = name.clone();
            let kernel = r.tensor()?;
            let bias = r.tensor()?;
            layers.push(LayerWeights { name, kernel, bias });
        }
        r.section = "trailer".into();
        let seed = r.u64()?;
        let len = r.u32()? as usize;
        let trailer: Trailer = serde_json::from_slice(r.take(len)?)
            .map_err(|e| WeightFileError::Malformed(format!("trailer: {e}")))?;
        if r.pos != bytes.len() {
            return Err(WeightFileError::Malformed(format!("{} trailing bytes", bytes.len() - r.pos)).into());
        }
        let bundle = WeightBundle { spec: trailer.spec, layers, version, seed, digest: trailer.digest };
        bundle.check_against_spec()?;
        Ok(bundle)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    section: String,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(WeightFileError::Truncated { layer: self.section.clone() }.into());
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn tensor(&mut self) -> Result<Tensor> {
        let rank = self.u32()? as usize;
        if rank == 0 || rank > 8 {
            return Err(WeightFileError::Malformed(format!("layer `{}` has rank {rank}", self.section)).into());
        }
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(self.u32()? as usize);
        }
        let n = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d)).ok_or_else(|| {
            Error::from(WeightFileError::Malformed(format!("layer `{}` dims overflow", self.section)))
        })?;
        let raw = self.take(n.checked_mul(8).ok_or_else(|| {
            Error::from(WeightFileError::Malformed(format!("layer `{}` too large", self.section)))
        })?)?;
        let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        Tensor::new(dims, data).map_err(|e| WeightFileError::Malformed(e.to_string()).into())
    }
}

pub fn save_weights(bundle: &WeightBundle, path: &Path) -> Result<()> {
    fs::write(path, bundle.to_bytes())?;
    Ok(())
}

pub fn load_weights(path: &Path) -> Result<WeightBundle> {
    WeightBundle::from_bytes(&fs::read(path)?)
}
