use super::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// Direct sliding-window convolution, independent of im2col/gemm.
fn conv_oracle(x: &Tensor, k: &Tensor, b: &Tensor, pad: usize) -> Vec<f64> {
    let (h, w, c) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (kh, kw, co) = (k.shape()[0], k.shape()[1], k.shape()[3]);
    let oh = h + 2 * pad - kh + 1;
    let ow = w + 2 * pad - kw + 1;
    let mut out = vec![0.0; oh * ow * co];
    for oy in 0..oh {
        for ox in 0..ow {
            for o in 0..co {
                let mut acc = b.data()[o];
                for ky in 0..kh {
                    for kx in 0..kw {
                        let iy = oy as isize + ky as isize - pad as isize;
                        let ix = ox as isize + kx as isize - pad as isize;
                        if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                            continue;
                        }
                        for ci in 0..c {
                            let xv = x.data()[(iy as usize * w + ix as usize) * c + ci];
                            let kv = k.data()[((ky * kw + kx) * c + ci) * co + o];
                            acc += xv * kv;
                        }
                    }
                }
                out[(oy * ow + ox) * co + o] = acc;
            }
        }
    }
    out
}

#[test]
fn conv_identity_kernel() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = random(&[5, 4, 1], &mut rng);
    let mut tape = Tape::new();
    let xi = tape.constant(x.clone());
    let k = tape.constant(Tensor::new(vec![1, 1, 1, 1], vec![1.0]).unwrap());
    let b = tape.constant(Tensor::zeros(&[1]));
    let y = tape.conv2d(xi, k, b, Padding::Same).unwrap();
    assert_eq!(tape.value(y), &x);
}

#[test]
fn conv_constant_field_valid() {
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::full(&[4, 4, 1], 5.0));
    let k = tape.constant(Tensor::full(&[3, 3, 1, 1], 1.0));
    let b = tape.constant(Tensor::zeros(&[1]));
    let y = tape.conv2d(x, k, b, Padding::Valid).unwrap();
    assert_eq!(tape.value(y).shape(), &[2, 2, 1]);
    assert!(tape.value(y).data().iter().all(|&v| v == 45.0));
}

#[test]
fn conv_matches_sliding_window_oracle() {
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random(&[4, 4, 2], &mut rng);
        let k = random(&[3, 3, 2, 3], &mut rng);
        let b = random(&[3], &mut rng);
        for (padding, pad) in [(Padding::Valid, 0), (Padding::Same, 1)] {
            let mut tape = Tape::new();
            let (xv, kv, bv) = (tape.constant(x.clone()), tape.constant(k.clone()), tape.constant(b.clone()));
            let y = tape.conv2d(xv, kv, bv, padding).unwrap();
            let expected = conv_oracle(&x, &k, &b, pad);
            for (a, e) in tape.value(y).data().iter().zip(&expected) {
                assert!((a - e).abs() <= 1e-12, "{a} vs {e}");
            }
        }
    }
}

#[test]
fn conv_batched_equals_per_image() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = random(&[3, 5, 5, 2], &mut rng);
    let k = random(&[3, 3, 2, 4], &mut rng);
    let b = random(&[4], &mut rng);
    let mut tape = Tape::new();
    let (xv, kv, bv) = (tape.constant(x.clone()), tape.constant(k.clone()), tape.constant(b.clone()));
    let y = tape.conv2d(xv, kv, bv, Padding::Same).unwrap();
    let per = 5 * 5 * 4;
    for n in 0..3 {
        let img = Tensor::new(vec![5, 5, 2], x.data()[n * 50..(n + 1) * 50].to_vec()).unwrap();
        let expected = conv_oracle(&img, &k, &b, 1);
        for (a, e) in tape.value(y).data()[n * per..(n + 1) * per].iter().zip(&expected) {
            assert!((a - e).abs() <= 1e-12);
        }
        let mut single = Tape::new();
        let (xi, ki, bi) = (single.constant(img), single.constant(k.clone()), single.constant(b.clone()));
        let yi = single.conv2d(xi, ki, bi, Padding::Same).unwrap();
        assert_eq!(&tape.value(y).data()[n * per..(n + 1) * per], single.value(yi).data());
    }
}

#[test]
fn conv_shape_errors() {
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::zeros(&[4, 4, 2]));
    let k_even = tape.constant(Tensor::zeros(&[2, 2, 2, 1]));
    let k_chan = tape.constant(Tensor::zeros(&[3, 3, 3, 1]));
    let b = tape.constant(Tensor::zeros(&[1]));
    let b_bad = tape.constant(Tensor::zeros(&[2]));
    let k_ok = tape.constant(Tensor::zeros(&[3, 3, 2, 1]));
    assert!(matches!(tape.conv2d(x, k_even, b, Padding::Same), Err(crate::Error::Shape(_))));
    assert!(matches!(tape.conv2d(x, k_chan, b, Padding::Same), Err(crate::Error::Shape(_))));
    assert!(matches!(tape.conv2d(x, k_ok, b_bad, Padding::Same), Err(crate::Error::Shape(_))));
}

#[test]
fn max_pool_examples() {
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::new(vec![2, 2, 1], vec![1.0, 2.0, 3.0, 4.0]).unwrap());
    let y = tape.max_pool2d(x).unwrap();
    assert_eq!(tape.value(y).data(), &[4.0]);

    let c = tape.constant(Tensor::full(&[4, 6, 2], 0.7));
    let y = tape.max_pool2d(c).unwrap();
    assert_eq!(tape.value(y).shape(), &[2, 3, 2]);
    assert!(tape.value(y).data().iter().all(|&v| v == 0.7));
}

#[test]
fn max_pool_matches_window_scan() {
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random(&[6, 6, 1], &mut rng);
        let mut tape = Tape::new();
        let xv = tape.constant(x.clone());
        let y = tape.max_pool2d(xv).unwrap();
        for oy in 0..3 {
            for ox in 0..3 {
                let m = [(0, 0), (0, 1), (1, 0), (1, 1)]
                    .iter()
                    .map(|(dy, dx)| x.data()[(2 * oy + dy) * 6 + 2 * ox + dx])
                    .fold(f64::NEG_INFINITY, f64::max);
                assert_eq!(tape.value(y).data()[oy * 3 + ox], m);
            }
        }
    }
}

#[test]
fn max_pool_odd_dims_replicate_edge() {
    let mut tape = Tape::new();
    let x = tape.param(Tensor::new(vec![3, 3, 1], (1..=9).map(f64::from).collect()).unwrap());
    let y = tape.max_pool2d(x).unwrap();
    assert_eq!(tape.value(y).shape(), &[2, 2, 1]);
    assert_eq!(tape.value(y).data(), &[5.0, 6.0, 8.0, 9.0]);
    let s = tape.weighted_sum(&[(y, 1.0)]).unwrap();
    let r = tape.reshape(s, &[4]).unwrap();
    let w = tape.constant(Tensor::new(vec![4, 1], vec![1.0, 2.0, 3.0, 4.0]).unwrap());
    let b = tape.constant(Tensor::zeros(&[1]));
    let out = tape.dense(r, w, b).unwrap();
    let g = tape.backward(out).unwrap().wrt(x);
    assert_eq!(g.data(), &[0.0, 0.0, 0.0, 0.0, 1.0, 2.0, 0.0, 3.0, 4.0]);
}

#[test]
fn max_pool_ties_route_to_lowest_index() {
    let mut tape = Tape::new();
    let x = tape.param(Tensor::full(&[2, 2, 1], 1.0));
    let y = tape.max_pool2d(x).unwrap();
    let r = tape.reshape(y, &[1]).unwrap();
    let g = tape.backward(r).unwrap().wrt(x);
    assert_eq!(g.data(), &[1.0, 0.0, 0.0, 0.0]);
}

#[test]
fn max_pool_rejects_bad_rank() {
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::zeros(&[4]));
    assert!(tape.max_pool2d(x).is_err());
}

#[test]
fn relu_examples() {
    let mut tape = Tape::new();
    let x = tape.param(Tensor::from_vec(vec![-1.0, 0.0, 2.0]));
    let y = tape.relu(x);
    assert_eq!(tape.value(y).data(), &[0.0, 0.0, 2.0]);
    let w = tape.constant(Tensor::new(vec![3, 1], vec![1.0, 1.0, 1.0]).unwrap());
    let b = tape.constant(Tensor::zeros(&[1]));
    let s = tape.dense(y, w, b).unwrap();
    let g = tape.backward(s).unwrap().wrt(x);
    assert_eq!(g.data(), &[0.0, 0.0, 1.0]);

    let mut tape = Tape::new();
    let x = tape.param(Tensor::from_vec(vec![-3.0, -0.5]));
    let y = tape.relu(x);
    assert_eq!(tape.value(y).data(), &[0.0, 0.0]);
    let z = tape.constant(Tensor::zeros(&[2]));
    let l = tape.mse(y, z).unwrap();
    assert_eq!(tape.backward(l).unwrap().wrt(x).data(), &[0.0, 0.0]);
}

#[test]
fn relu_matches_elementwise_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x = random(&[50], &mut rng);
    let mut tape = Tape::new();
    let xv = tape.constant(x.clone());
    let y = tape.relu(xv);
    let expected: Vec<f64> = x.data().iter().map(|&v| v.max(0.0)).collect();
    assert_eq!(tape.value(y).data(), expected.as_slice());
}

#[test]
fn dense_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = random(&[4], &mut rng);
    let mut eye = Tensor::zeros(&[4, 4]);
    for i in 0..4 {
        eye.data_mut()[i * 4 + i] = 1.0;
    }
    let mut tape = Tape::new();
    let xv = tape.constant(x.clone());
    let w = tape.constant(eye);
    let b = tape.constant(Tensor::zeros(&[4]));
    let y = tape.dense(xv, w, b).unwrap();
    assert_eq!(tape.value(y), &x);

    let wz = tape.constant(Tensor::zeros(&[4, 3]));
    let bias = Tensor::from_vec(vec![0.5, -1.0, 2.0]);
    let bv = tape.constant(bias.clone());
    let y = tape.dense(xv, wz, bv).unwrap();
    assert_eq!(tape.value(y), &bias);

    let wr = random(&[4, 3], &mut rng);
    let wv = tape.constant(wr.clone());
    let y = tape.dense(xv, wv, bv).unwrap();
    for j in 0..3 {
        let mut acc = bias.data()[j];
        for i in 0..4 {
            acc += x.data()[i] * wr.data()[i * 3 + j];
        }
        assert!((tape.value(y).data()[j] - acc).abs() <= 1e-12);
    }
    let bad = tape.constant(Tensor::zeros(&[5, 3]));
    assert!(tape.dense(xv, bad, bv).is_err());
}

#[test]
fn mse_examples() {
    let mut tape = Tape::new();
    let a = tape.constant(Tensor::from_vec(vec![1.0, 2.0, 3.0, 4.0]));
    let b = tape.constant(Tensor::from_vec(vec![1.0, 2.0, 3.0, 5.0]));
    let l = tape.mse(a, b).unwrap();
    assert_eq!(tape.value(l).item(), 0.25);
    let l0 = tape.mse(a, a).unwrap();
    assert_eq!(tape.value(l0).item(), 0.0);
    let c = tape.constant(Tensor::zeros(&[3]));
    assert!(tape.mse(a, c).is_err());

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (x, y) = (random(&[17], &mut rng), random(&[17], &mut rng));
    let (xv, yv) = (tape.constant(x.clone()), tape.constant(y.clone()));
    let l = tape.mse(xv, yv).unwrap();
    let mut s = 0.0;
    for i in 0..17 {
        s += (x.data()[i] - y.data()[i]).powi(2);
    }
    assert!((tape.value(l).item() - s / 17.0).abs() <= 1e-12);
}

#[test]
fn backward_examples() {
    let mut tape = Tape::new();
    let x = tape.param(Tensor::from_vec(vec![3.0]));
    let z = tape.constant(Tensor::zeros(&[1]));
    let l = tape.mse(x, z).unwrap();
    assert_eq!(tape.backward(l).unwrap().wrt(x).data(), &[6.0]);

    let mut tape = Tape::new();
    let x = tape.param(Tensor::from_vec(vec![1.0, 2.0]));
    let y = tape.param(Tensor::from_vec(vec![0.5]));
    let z = tape.constant(Tensor::zeros(&[1]));
    let l = tape.mse(y, z).unwrap();
    let g = tape.backward(l).unwrap();
    assert_eq!(g.wrt(x).data(), &[0.0, 0.0]);
    assert!(g.get(x).is_none());

    let v = tape.relu(x);
    assert!(tape.backward(v).is_err());
}

/// Central finite differences of `f` at `x`.
fn numeric_grad(x: &Tensor, f: &dyn Fn(&Tensor) -> f64) -> Vec<f64> {
    let h = 1e-5;
    (0..x.len())
        .map(|i| {
            let mut p = x.clone();
            p.data_mut()[i] += h;
            let mut m = x.clone();
            m.data_mut()[i] -= h;
            (f(&p) - f(&m)) / (2.0 * h)
        })
        .collect()
}

fn assert_grad_close(analytic: &[f64], numeric: &[f64]) {
    for (a, n) in analytic.iter().zip(numeric) {
        let denom = a.abs().max(n.abs()).max(1e-6);
        assert!((a - n).abs() / denom <= 1e-4 || (a - n).abs() < 1e-9, "analytic {a} numeric {n}");
    }
}

#[test]
fn composed_graph_matches_finite_differences() {
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let x = random(&[6, 6, 2], &mut rng);
        let k = random(&[3, 3, 2, 3], &mut rng);
        let b = random(&[3], &mut rng);
        let target = random(&[3, 3, 3], &mut rng);
        let eval = |x: &Tensor, k: &Tensor, b: &Tensor| -> (f64, Tensor, Tensor, Tensor) {
            let mut tape = Tape::new();
            let (xv, kv, bv) = (tape.param(x.clone()), tape.param(k.clone()), tape.param(b.clone()));
            let t = tape.constant(target.clone());
            let c = tape.conv2d(xv, kv, bv, Padding::Same).unwrap();
            let r = tape.relu(c);
            let p = tape.max_pool2d(r).unwrap();
            let l = tape.mse(p, t).unwrap();
            let g = tape.backward(l).unwrap();
            (tape.value(l).item(), g.wrt(xv), g.wrt(kv), g.wrt(bv))
        };
        let (_, gx, gk, gb) = eval(&x, &k, &b);
        assert_grad_close(gx.data(), &numeric_grad(&x, &|x| eval(x, &k, &b).0));
        assert_grad_close(gk.data(), &numeric_grad(&k, &|k| eval(&x, k, &b).0));
        assert_grad_close(gb.data(), &numeric_grad(&b, &|b| eval(&x, &k, b).0));
    }
}

#[test]
fn gram_and_softmax_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let x = random(&[3, 4, 3], &mut rng);
    let a = random(&[3, 3], &mut rng);
    let f = |x: &Tensor| -> (f64, Tensor) {
        let mut tape = Tape::new();
        let xv = tape.param(x.clone());
        let av = tape.constant(a.clone());
        let g = tape.gram(xv).unwrap();
        let l = tape.mse(g, av).unwrap();
        let gr = tape.backward(l).unwrap();
        (tape.value(l).item(), gr.wrt(xv))
    };
    assert_grad_close(f(&x).1.data(), &numeric_grad(&x, &|x| f(x).0));

    let logits = random(&[4, 3], &mut rng);
    let targets = [0usize, 2, 1, 2];
    let f = |z: &Tensor| -> (f64, Tensor) {
        let mut tape = Tape::new();
        let zv = tape.param(z.clone());
        let l = tape.softmax_cross_entropy(zv, &targets).unwrap();
        let gr = tape.backward(l).unwrap();
        (tape.value(l).item(), gr.wrt(zv))
    };
    assert_grad_close(f(&logits).1.data(), &numeric_grad(&logits, &|z| f(z).0));
}

#[test]
fn concat_routes_gradients_to_both_inputs() {
    let mut tape = Tape::new();
    let a = tape.param(Tensor::new(vec![2, 1], vec![1.0, 2.0]).unwrap());
    let b = tape.param(Tensor::new(vec![2, 2], vec![3.0, 4.0, 5.0, 6.0]).unwrap());
    let c = tape.concat_channels(a, b).unwrap();
    assert_eq!(tape.value(c).data(), &[1.0, 3.0, 4.0, 2.0, 5.0, 6.0]);
    let flat = tape.reshape(c, &[6]).unwrap();
    let w = tape.constant(Tensor::new(vec![6, 1], (1..=6).map(f64::from).collect()).unwrap());
    let bias = tape.constant(Tensor::zeros(&[1]));
    let out = tape.dense(flat, w, bias).unwrap();
    let g = tape.backward(out).unwrap();
    assert_eq!(g.wrt(a).data(), &[1.0, 4.0]);
    assert_eq!(g.wrt(b).data(), &[2.0, 3.0, 5.0, 6.0]);
}

#[test]
fn backward_is_linear() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x = random(&[4, 4, 2], &mut rng);
    let t1 = random(&[4, 4, 2], &mut rng);
    let t2 = random(&[2, 2], &mut rng);
    let (alpha, beta) = (0.7, -1.3);
    let run = |wa: f64, wb: f64| -> Tensor {
        let mut tape = Tape::new();
        let xv = tape.param(x.clone());
        let (c1, c2) = (tape.constant(t1.clone()), tape.constant(t2.clone()));
        let l1 = tape.mse(xv, c1).unwrap();
        let g = tape.gram(xv).unwrap();
        let l2 = tape.mse(g, c2).unwrap();
        let l = tape.weighted_sum(&[(l1, wa), (l2, wb)]).unwrap();
        tape.backward(l).unwrap().wrt(xv)
    };
    let combined = run(alpha, beta);
    let g1 = run(1.0, 0.0);
    let g2 = run(0.0, 1.0);
    for i in 0..combined.len() {
        let lin = alpha * g1.data()[i] + beta * g2.data()[i];
        assert!((combined.data()[i] - lin).abs() <= 1e-10);
    }
}

#[test]
fn pool_gradient_mass_is_conserved() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let x = random(&[5, 7, 3], &mut rng);
    let mut tape = Tape::new();
    let xv = tape.param(x);
    let p = tape.max_pool2d(xv).unwrap();
    let n = tape.value(p).len();
    let flat = tape.reshape(p, &[n]).unwrap();
    let w = random(&[n, 1], &mut rng);
    let wsum: f64 = w.sum();
    let wv = tape.constant(w);
    let b = tape.constant(Tensor::zeros(&[1]));
    let out = tape.dense(flat, wv, b).unwrap();
    let g = tape.backward(out).unwrap().wrt(xv);
    assert!((g.sum() - wsum).abs() < 1e-12);
}
