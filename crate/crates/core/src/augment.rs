//! Traditional affine augmentation: rotation, zoom, shear and reflection.
//!
//! Every transform is an inverse-mapped resample about the image centre with
//! bilinear interpolation; samples that fall outside the source are zero.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    /// Mirror left-right.
    Horizontal,
    /// Mirror top-bottom.
    Vertical,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AffineOp {
    /// Degrees, in [-180, 180].
    Rotation(f64),
    /// Scale factor > 0; values above 1 zoom in.
    Zoom(f64),
    /// Horizontal shear factor: x' = x + k·y.
    Shear(f64),
    Reflection(Axis),
}

/// 2×2 linear map acting on centre-relative (x, y) coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Linear([[f64; 2]; 2]);

impl Linear {
    const IDENTITY: Linear = Linear([[1.0, 0.0], [0.0, 1.0]]);

    fn then(self, next: Linear) -> Linear {
        let (a, b) = (next.0, self.0);
        Linear([
            [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
            [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
        ])
    }

    fn inverse(self) -> Linear {
        let m = self.0;
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        Linear([[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]])
    }
}

impl AffineOp {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            AffineOp::Rotation(d) => (-180.0..=180.0).contains(&d),
            AffineOp::Zoom(s) => s > 0.0 && s.is_finite(),
            AffineOp::Shear(k) => k.is_finite(),
            AffineOp::Reflection(_) => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("affine parameter out of range: {self:?}")))
        }
    }

    fn linear(&self) -> Linear {
        match *self {
            AffineOp::Rotation(deg) => {
                let (s, c) = deg.to_radians().sin_cos();
                Linear([[c, -s], [s, c]])
            }
            AffineOp::Zoom(z) => Linear([[z, 0.0], [0.0, z]]),
            AffineOp::Shear(k) => Linear([[1.0, k], [0.0, 1.0]]),
            AffineOp::Reflection(Axis::Horizontal) => Linear([[-1.0, 0.0], [0.0, 1.0]]),
            AffineOp::Reflection(Axis::Vertical) => Linear([[1.0, 0.0], [0.0, -1.0]]),
        }
    }
}

pub fn apply_affine(image: &Image, op: AffineOp) -> Result<Image> {
    op.validate()?;
    Ok(resample(image, op.linear()))
}

/// Applies `ops` in order as a single resample.
pub fn apply_composed(image: &Image, ops: &[AffineOp]) -> Result<Image> {
    let mut m = Linear::IDENTITY;
    for op in ops {
        op.validate()?;
        m = m.then(op.linear());
    }
    Ok(resample(image, m))
}

fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() < 1e-9 {
        r
    } else {
        v
    }
}

fn resample(image: &Image, forward: Linear) -> Image {
    if forward == Linear::IDENTITY {
        return image.clone();
    }
    let inv = forward.inverse().0;
    let (h, w, ch) = image.dims();
    let cy = (h as f64 - 1.0) / 2.0;
    let cx = (w as f64 - 1.0) / 2.0;
    let mut out = Image::zeros(h, w, ch);
    for y in 0..h {
        for x in 0..w {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            let sx = snap(inv[0][0] * dx + inv[0][1] * dy + cx);
            let sy = snap(inv[1][0] * dx + inv[1][1] * dy + cy);
            if sx <= -1.0 || sy <= -1.0 || sx >= w as f64 || sy >= h as f64 {
                continue;
            }
            let x0 = sx.floor();
            let y0 = sy.floor();
            let fx = sx - x0;
            let fy = sy - y0;
            let (x0, y0) = (x0 as isize, y0 as isize);
            for c in 0..ch {
                let at = |yy: isize, xx: isize| -> f64 {
                    if yy < 0 || xx < 0 || yy >= h as isize || xx >= w as isize {
                        0.0
                    } else {
                        image.get(yy as usize, xx as usize, c)
                    }
                };
                let v = if fx == 0.0 && fy == 0.0 {
                    at(y0, x0)
                } else {
                    (1.0 - fy) * ((1.0 - fx) * at(y0, x0) + fx * at(y0, x0 + 1))
                        + fy * ((1.0 - fx) * at(y0 + 1, x0) + fx * at(y0 + 1, x0 + 1))
                };
                out.set(y, x, c, v);
            }
        }
    }
    out
}

/// Sampling ranges for [`random_augment`]. Each interval is inclusive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentRanges {
    pub rotation_deg: [f64; 2],
    pub zoom: [f64; 2],
    pub shear: [f64; 2],
    /// Probability of a horizontal reflection.
    pub reflection_p: f64,
}

impl Default for AugmentRanges {
    fn default() -> Self {
        AugmentRanges { rotation_deg: [-20.0, 20.0], zoom: [0.9, 1.1], shear: [-0.1, 0.1], reflection_p: 0.5 }
    }
}

impl AugmentRanges {
    pub fn identity() -> Self {
        AugmentRanges { rotation_deg: [0.0, 0.0], zoom: [1.0, 1.0], shear: [0.0, 0.0], reflection_p: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(format!("augment range {what} invalid: {self:?}")));
        let [r0, r1] = self.rotation_deg;
        if !(r0 <= r1 && r0 >= -180.0 && r1 <= 180.0) {
            return bad("rotation_deg");
        }
        let [z0, z1] = self.zoom;
        if !(z0 <= z1 && z0 > 0.0 && z1.is_finite()) {
            return bad("zoom");
        }
        let [s0, s1] = self.shear;
        if !(s0 <= s1 && s0.is_finite() && s1.is_finite()) {
            return bad("shear");
        }
        if !(0.0..=1.0).contains(&self.reflection_p) {
            return bad("reflection_p");
        }
        Ok(())
    }

    /// Draws one parameter per transform kind, in rotation→zoom→shear→reflection order.
    pub fn sample(&self, rng: &mut impl Rng) -> Vec<AffineOp> {
        let draw = |rng: &mut dyn rand::RngCore, [lo, hi]: [f64; 2]| if lo == hi { lo } else { rng.random_range(lo..=hi) };
        let mut ops = vec![
            AffineOp::Rotation(draw(rng, self.rotation_deg)),
            AffineOp::Zoom(draw(rng, self.zoom)),
            AffineOp::Shear(draw(rng, self.shear)),
        ];
        if rng.random::<f64>() < self.reflection_p {
            ops.push(AffineOp::Reflection(Axis::Horizontal));
        }
        ops
    }
}

/// Random rotation, zoom, shear and optional reflection, fully determined by `seed`.
pub fn random_augment(image: &Image, ranges: &AugmentRanges, seed: u64) -> Result<Image> {
    ranges.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    apply_composed(image, &ranges.sample(&mut rng))
}
