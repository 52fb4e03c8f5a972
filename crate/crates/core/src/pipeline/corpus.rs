//! Procedural two-class image corpus: soft round blobs against irregular,
//! striped and speckled lesions.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::manifest::{class_name, DatasetManifest, ManifestRecord, BENIGN, MALIGNANT};
use crate::error::{Error, Result};
use crate::image::{write_png, Image};
use crate::seeds;

fn skin(rng: &mut ChaCha8Rng) -> [f64; 3] {
    let t = rng.random_range(-1.0..1.0);
    [0.82 + 0.06 * t, 0.66 + 0.06 * t, 0.56 + 0.05 * t]
}

fn lesion_color(rng: &mut ChaCha8Rng) -> [f64; 3] {
    let t = rng.random_range(-1.0..1.0);
    [0.52 + 0.08 * t, 0.36 + 0.06 * t, 0.27 + 0.05 * t]
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

struct Ellipse {
    cy: f64,
    cx: f64,
    ry: f64,
    rx: f64,
    angle: f64,
}

impl Ellipse {
    fn random(rng: &mut ChaCha8Rng, h: usize, w: usize) -> Self {
        let (hf, wf) = (h as f64, w as f64);
        Ellipse {
            cy: hf / 2.0 + rng.random_range(-0.1..0.1) * hf,
            cx: wf / 2.0 + rng.random_range(-0.1..0.1) * wf,
            ry: rng.random_range(0.2..0.32) * hf,
            rx: rng.random_range(0.2..0.32) * wf,
            angle: rng.random_range(0.0..PI),
        }
    }

    /// Normalised radius and polar angle of pixel (y, x).
    fn polar(&self, y: usize, x: usize) -> (f64, f64) {
        let (dy, dx) = (y as f64 + 0.5 - self.cy, x as f64 + 0.5 - self.cx);
        let (s, c) = self.angle.sin_cos();
        let u = (dx * c + dy * s) / self.rx;
        let v = (-dx * s + dy * c) / self.ry;
        ((u * u + v * v).sqrt(), v.atan2(u))
    }
}

/// Smooth, low-frequency radial blob.
pub fn benign_image(h: usize, w: usize, rng: &mut ChaCha8Rng) -> Image {
    let bg = skin(rng);
    let fg = lesion_color(rng);
    let e = Ellipse::random(rng, h, w);
    let shade = rng.random_range(0.1..0.25);
    let noise = Normal::new(0.0, 0.01).expect("valid sigma");
    let mut img = Image::zeros(h, w, 3);
    for y in 0..h {
        for x in 0..w {
            let (r, _) = e.polar(y, x);
            let m = sigmoid((1.0 - r) * 6.0);
            let core = 1.0 - shade * (1.0 - r.min(1.0));
            for c in 0..3 {
                let v = bg[c] * (1.0 - m) + fg[c] * core * m + noise.sample(rng);
                img.set(y, x, c, v.clamp(0.0, 1.0));
            }
        }
    }
    img
}

/// Irregular border filled with an oriented high-frequency stripe texture and
/// dark speckles.
pub fn malignant_image(h: usize, w: usize, rng: &mut ChaCha8Rng) -> Image {
    let bg = skin(rng);
    let fg = lesion_color(rng).map(|v| v * 0.85);
    let e = Ellipse::random(rng, h, w);
    let lobes = [(rng.random_range(2..5) as f64, rng.random_range(0.12..0.25), rng.random_range(0.0..2.0 * PI)),
        (rng.random_range(5..8) as f64, rng.random_range(0.06..0.14), rng.random_range(0.0..2.0 * PI))];
    let orient = rng.random_range(0.0..PI);
    let freq = rng.random_range(0.22..0.36);
    let phase = rng.random_range(0.0..2.0 * PI);
    let amp = rng.random_range(0.14..0.22);
    let speckle = rng.random_range(0.08..0.18);
    let noise = Normal::new(0.0, 0.01).expect("valid sigma");
    let (so, co) = orient.sin_cos();
    let mut img = Image::zeros(h, w, 3);
    for y in 0..h {
        for x in 0..w {
            let (r, theta) = e.polar(y, x);
            let border = 1.0 + lobes.iter().map(|(k, a, p)| a * (k * theta + p).sin()).sum::<f64>();
            let m = sigmoid((border - r) * 14.0);
            let u = x as f64 * co + y as f64 * so;
            let stripe = amp * (2.0 * PI * freq * u + phase).cos();
            let dot = if rng.random::<f64>() < speckle { -0.2 } else { 0.0 };
            for c in 0..3 {
                let v = bg[c] * (1.0 - m) + (fg[c] + stripe + dot) * m + noise.sample(rng);
                img.set(y, x, c, v.clamp(0.0, 1.0));
            }
        }
    }
    img
}

/// Image for `index` of class `label`, independent of every other image.
pub fn corpus_image(label: u8, index: usize, h: usize, w: usize, seed: u64) -> Image {
    let mut rng = seeds::rng(seed, &[seeds::tag("corpus"), u64::from(label), index as u64]);
    if label == BENIGN {
        benign_image(h, w, &mut rng)
    } else {
        malignant_image(h, w, &mut rng)
    }
}

pub fn real_id(label: u8, index: usize) -> String {
    let prefix = if label == BENIGN { "benign" } else { "malignant" };
    format!("{prefix}-{index:04}")
}

/// Writes `2·n_per_class` PNGs under `dir/real/` and returns their manifest,
/// rooted at `dir`. `png_text` is embedded in every file.
pub fn gen_corpus(
    dir: &Path,
    n_per_class: usize,
    size: (usize, usize),
    seed: u64,
    png_text: &[(&str, &str)],
) -> Result<DatasetManifest> {
    let (h, w) = size;
    if n_per_class == 0 {
        return Err(Error::InvalidArgument("n_per_class must be at least 1".into()));
    }
    if h < 16 || w < 16 {
        return Err(Error::InvalidArgument(format!("image size must be at least 16×16, got {h}×{w}")));
    }
    let real = dir.join("real");
    fs::create_dir_all(&real)
        .map_err(|e| Error::InvalidArgument(format!("cannot create {}: {e}", real.display())))?;
    let mut manifest = DatasetManifest::new(dir);
    for label in [BENIGN, MALIGNANT] {
        for i in 0..n_per_class {
            let id = real_id(label, i);
            let rel = format!("real/{id}.png");
            let img = corpus_image(label, i, h, w, seed);
            let mut text = vec![("class", class_name(label))];
            text.extend_from_slice(png_text);
            write_png(&dir.join(&rel), &img, &text)?;
            manifest.push(ManifestRecord::real(id, rel, label))?;
        }
    }
    Ok(manifest)
}

/// Mean absolute 4-neighbour Laplacian over interior pixels and channels.
pub fn laplacian_energy(img: &Image) -> f64 {
    let (h, w, ch) = img.dims();
    let mut sum = 0.0;
    let mut n = 0usize;
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            for c in 0..ch {
                let l = img.get(y - 1, x, c) + img.get(y + 1, x, c) + img.get(y, x - 1, c) + img.get(y, x + 1, c)
                    - 4.0 * img.get(y, x, c);
                sum += l.abs();
                n += 1;
            }
        }
    }
    sum / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classes_separate_by_laplacian_energy() {
        let n = 60;
        let b: Vec<f64> = (0..n).map(|i| laplacian_energy(&corpus_image(BENIGN, i, 32, 32, 5))).collect();
        let m: Vec<f64> = (0..n).map(|i| laplacian_energy(&corpus_image(MALIGNANT, i, 32, 32, 5))).collect();
        let mut wins = 0;
        for mb in &m {
            for bb in &b {
                if mb > bb {
                    wins += 1;
                }
            }
        }
        assert!(wins as f64 / (n * n) as f64 >= 0.95, "{wins}");
    }

    #[test]
    fn images_are_deterministic_and_in_range() {
        let a = corpus_image(MALIGNANT, 3, 24, 20, 1);
        assert_eq!(a, corpus_image(MALIGNANT, 3, 24, 20, 1));
        assert_ne!(a, corpus_image(MALIGNANT, 4, 24, 20, 1));
        assert_eq!(a.dims(), (24, 20, 3));
        assert!(a.data.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn rejects_bad_sizes() {
        let dir = tempfile::tempdir().unwrap();
        assert!(gen_corpus(dir.path(), 0, (32, 32), 1, &[]).is_err());
        assert!(gen_corpus(dir.path(), 1, (8, 32), 1, &[]).is_err());
    }
}
