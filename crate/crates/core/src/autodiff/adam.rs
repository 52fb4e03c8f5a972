use super::Tensor;
use crate::error::{shape_err, Result};

/// Per-parameter Adam state with bias-corrected moment estimates.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub t: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    /// Defaults: beta1 0.9, beta2 0.999, eps 1e-8.
    pub fn new(len: usize, lr: f64) -> Self {
        Self::with_hyper(len, lr, 0.9, 0.999, 1e-8)
    }

    pub fn with_hyper(len: usize, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        AdamState { t: 0, m: vec![0.0; len], v: vec![0.0; len], lr, beta1, beta2, eps }
    }

    pub fn for_tensor(param: &Tensor, lr: f64) -> Self {
        Self::new(param.len(), lr)
    }
}

/// One Adam update of `params` in place.
pub fn adam_step(params: &mut Tensor, grads: &Tensor, state: &mut AdamState) -> Result<()> {
    if params.shape() != grads.shape() {
        return shape_err(format!(
            "adam: parameter shape {:?} differs from gradient shape {:?}",
            params.shape(),
            grads.shape()
        ));
    }
    adam_step_slice(params.data_mut(), grads.data(), state)
}

pub fn adam_step_slice(params: &mut [f64], grads: &[f64], state: &mut AdamState) -> Result<()> {
    if params.len() != grads.len() || state.m.len() != params.len() {
        return shape_err(format!(
            "adam: {} parameters, {} gradients, state sized for {}",
            params.len(),
            grads.len(),
            state.m.len()
        ));
    }
    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(&mut state.m).zip(&mut state.v) {
        *m = state.beta1 * *m + (1.0 - state.beta1) * g;
        *v = state.beta2 * *v + (1.0 - state.beta2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut p = Tensor::from_vec(vec![0.3, -1.2, 4.0]);
        let before = p.clone();
        let mut s = AdamState::for_tensor(&p, 0.01);
        adam_step(&mut p, &Tensor::zeros(&[3]), &mut s).unwrap();
        assert_eq!(p, before);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // m̂ = g, v̂ = g², so the first update is lr·g/(|g|+eps).
        let mut p = Tensor::from_vec(vec![0.0, 2.0]);
        let mut s = AdamState::for_tensor(&p, 0.01);
        adam_step(&mut p, &Tensor::from_vec(vec![1.0, 1.0]), &mut s).unwrap();
        let expected = 0.01 * 1.0 / (1.0 + 1e-8);
        assert!((p.data()[0] + expected).abs() < 1e-15);
        assert!((p.data()[0] + 0.01).abs() < 1e-6);
        assert!((p.data()[1] - (2.0 - expected)).abs() < 1e-15);
    }

    #[test]
    fn identical_runs_are_bit_identical() {
        let run = || {
            let mut p = Tensor::from_vec(vec![0.5, -0.25, 1.5]);
            let mut s = AdamState::for_tensor(&p, 0.01);
            for i in 0..20 {
                let g: Vec<f64> = p.data().iter().map(|x| x * 2.0 + i as f64 * 0.1).collect();
                adam_step(&mut p, &Tensor::from_vec(g), &mut s).unwrap();
            }
            (p, s)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut p = Tensor::from_vec(vec![1.0, 2.0]);
        let mut s = AdamState::for_tensor(&p, 0.01);
        assert!(adam_step(&mut p, &Tensor::from_vec(vec![1.0]), &mut s).is_err());
        assert_eq!(s.t, 0);
    }
}
