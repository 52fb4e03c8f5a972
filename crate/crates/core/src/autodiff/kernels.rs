//! Raw numeric kernels behind the tape operations. All buffers are row-major
//! with channels last (N×H×W×C).

/// C[m×n] = A[m×k]·B[k×n] (+ C when `accumulate`), with arbitrary strides on A and B.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    rsa: isize,
    csa: isize,
    b: &[f64],
    rsb: isize,
    csb: isize,
    c: &mut [f64],
    accumulate: bool,
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(c.len() >= m * n);
    let beta = if accumulate { 1.0 } else { 0.0 };
    if k == 0 {
        if !accumulate {
            c[..m * n].fill(0.0);
        }
        return;
    }
    // SAFETY: the strides describe views that stay inside `a`, `b` and `c`;
    // callers pass dense row-major buffers whose sizes are checked above or
    // by the shape validation in the tape.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct ConvGeometry {
    pub batch: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub in_c: usize,
    pub k_h: usize,
    pub k_w: usize,
    pub out_c: usize,
    pub pad: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl ConvGeometry {
    pub fn patch_len(&self) -> usize {
        self.k_h * self.k_w * self.in_c
    }

    pub fn positions(&self) -> usize {
        self.batch * self.out_h * self.out_w
    }
}

/// Unfolds every receptive field into a row of the returned matrix
/// (positions × Kh·Kw·Cin). Out-of-bounds samples are zero.
pub(crate) fn im2col(input: &[f64], g: &ConvGeometry) -> Vec<f64> {
    let plen = g.patch_len();
    let mut cols = vec![0.0; g.positions() * plen];
    let c = g.in_c;
    for n in 0..g.batch {
        let img = &input[n * g.in_h * g.in_w * c..(n + 1) * g.in_h * g.in_w * c];
        for oy in 0..g.out_h {
            for ox in 0..g.out_w {
                let row = ((n * g.out_h + oy) * g.out_w + ox) * plen;
                for ky in 0..g.k_h {
                    let iy = (oy + ky) as isize - g.pad as isize;
                    if iy < 0 || iy >= g.in_h as isize {
                        continue;
                    }
                    for kx in 0..g.k_w {
                        let ix = (ox + kx) as isize - g.pad as isize;
                        if ix < 0 || ix >= g.in_w as isize {
                            continue;
                        }
                        let src = (iy as usize * g.in_w + ix as usize) * c;
                        let dst = row + (ky * g.k_w + kx) * c;
                        cols[dst..dst + c].copy_from_slice(&img[src..src + c]);
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: scatter-adds patch rows back onto the input grid.
pub(crate) fn col2im(cols: &[f64], g: &ConvGeometry) -> Vec<f64> {
    let plen = g.patch_len();
    let c = g.in_c;
    let mut out = vec![0.0; g.batch * g.in_h * g.in_w * c];
    for n in 0..g.batch {
        let base = n * g.in_h * g.in_w * c;
        for oy in 0..g.out_h {
            for ox in 0..g.out_w {
                let row = ((n * g.out_h + oy) * g.out_w + ox) * plen;
                for ky in 0..g.k_h {
                    let iy = (oy + ky) as isize - g.pad as isize;
                    if iy < 0 || iy >= g.in_h as isize {
                        continue;
                    }
                    for kx in 0..g.k_w {
                        let ix = (ox + kx) as isize - g.pad as isize;
                        if ix < 0 || ix >= g.in_w as isize {
                            continue;
                        }
                        let dst = base + (iy as usize * g.in_w + ix as usize) * c;
                        let src = row + (ky * g.k_w + kx) * c;
                        for (o, v) in out[dst..dst + c].iter_mut().zip(&cols[src..src + c]) {
                            *o += v;
                        }
                    }
                }
            }
        }
    }
    out
}

/// 2×2 stride-2 max pooling. Odd trailing rows/columns are padded by edge
/// replication, so the output is ceil(H/2)×ceil(W/2). Returns the pooled
/// values and, per output element, the flat input index that won.
pub(crate) fn max_pool_2x2(
    input: &[f64],
    batch: usize,
    h: usize,
    w: usize,
    c: usize,
) -> (Vec<f64>, Vec<usize>, usize, usize) {
    let oh = h.div_ceil(2);
    let ow = w.div_ceil(2);
    let mut out = vec![0.0; batch * oh * ow * c];
    let mut arg = vec![0usize; out.len()];
    for n in 0..batch {
        for oy in 0..oh {
            for ox in 0..ow {
                for ch in 0..c {
                    let mut best = f64::NEG_INFINITY;
                    let mut best_idx = usize::MAX;
                    // Row-major scan of the window; strict `>` keeps the first
                    // (lowest-index) maximum on ties.
                    for dy in 0..2 {
                        let iy = (2 * oy + dy).min(h - 1);
                        for dx in 0..2 {
                            let ix = (2 * ox + dx).min(w - 1);
                            let idx = ((n * h + iy) * w + ix) * c + ch;
                            let v = input[idx];
                            if best_idx == usize::MAX || v > best {
                                best = v;
                                best_idx = idx;
                            }
                        }
                    }
                    let o = ((n * oh + oy) * ow + ox) * c + ch;
                    out[o] = best;
                    arg[o] = best_idx;
                }
            }
        }
    }
    (out, arg, oh, ow)
}

/// Channel Gram matrix of a positions×channels feature block, divided by
/// the number of positions. Only the upper triangle is accumulated and then
/// mirrored, so the result is exactly symmetric.
pub(crate) fn gram(features: &[f64], positions: usize, channels: usize) -> Vec<f64> {
    let mut g = vec![0.0; channels * channels];
    for p in 0..positions {
        let row = &features[p * channels..(p + 1) * channels];
        for i in 0..channels {
            let fi = row[i];
            if fi == 0.0 {
                continue;
            }
            let gi = &mut g[i * channels..(i + 1) * channels];
            for j in i..channels {
                gi[j] += fi * row[j];
            }
        }
    }
    let norm = positions as f64;
    for i in 0..channels {
        for j in i..channels {
            let v = g[i * channels + j] / norm;
            g[i * channels + j] = v;
            g[j * channels + i] = v;
        }
    }
    g
}
