//! Adam with decoupled weight decay, and global-norm gradient clipping.

use super::{ParamStore, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 5.0e-5,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub config: AdamConfig,
    first: Vec<Tensor>,
    second: Vec<Tensor>,
    step: u64,
}

impl OptimizerState {
    pub fn new(params: &ParamStore, config: AdamConfig) -> Self {
        let zeros = || -> Vec<Tensor> {
            params
                .tensors()
                .iter()
                .map(|t| Tensor::zeros(t.shape()))
                .collect()
        };
        OptimizerState {
            config,
            first: zeros(),
            second: zeros(),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moments(&self) -> &[Tensor] {
        &self.first
    }

    pub fn second_moments(&self) -> &[Tensor] {
        &self.second
    }
}

/// Scales every gradient by `threshold / norm` when the global L2 norm
/// exceeds `threshold`. Returns the norm before clipping.
pub fn clip_gradients(grads: &mut [Tensor], threshold: f64) -> Result<f64> {
    if !(threshold > 0.0) {
        return Err(Error::Contract(format!(
            "clip threshold must be positive, got {threshold}"
        )));
    }
    let norm = grads
        .iter()
        .flat_map(|g| g.data())
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt();
    if norm > threshold {
        let factor = threshold / norm;
        for g in grads.iter_mut() {
            g.data_mut().iter_mut().for_each(|x| *x *= factor);
        }
    }
    Ok(norm)
}

/// One bias-corrected Adam update followed by decoupled weight decay
/// (`p ← p − α·λ·p`, applied to the pre-update value).
pub fn adam_step(
    params: &mut ParamStore,
    grads: &[Tensor],
    state: &mut OptimizerState,
) -> Result<()> {
    if grads.len() != params.len() || state.first.len() != params.len() {
        return Err(Error::Contract(format!(
            "adam_step: {} parameters, {} gradients, {} moment slots",
            params.len(),
            grads.len(),
            state.first.len()
        )));
    }
    for (p, g) in params.tensors().iter().zip(grads) {
        if p.shape() != g.shape() {
            return Err(Error::shape("adam_step", p.shape(), g.shape()));
        }
    }
    state.step += 1;
    let AdamConfig {
        learning_rate: lr,
        beta1,
        beta2,
        eps,
        weight_decay,
    } = state.config;
    let t = state.step as i32;
    let bc1 = 1.0 - beta1.powi(t);
    let bc2 = 1.0 - beta2.powi(t);
    for (k, param) in params.tensors_mut().iter_mut().enumerate() {
        let g = grads[k].data();
        let m = state.first[k].data_mut();
        for (mi, gi) in m.iter_mut().zip(g) {
            *mi = beta1 * *mi + (1.0 - beta1) * gi;
        }
        let v = state.second[k].data_mut();
        for (vi, gi) in v.iter_mut().zip(g) {
            *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
        }
        let m = state.first[k].data();
        let v = state.second[k].data();
        for (j, x) in param.data_mut().iter_mut().enumerate() {
            let decayed = *x - lr * weight_decay * *x;
            let m_hat = m[j] / bc1;
            let v_hat = v[j] / bc2;
            *x = decayed - lr * m_hat / (v_hat.sqrt() + eps);
        }
        param.round_in_place();
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Precision;

    fn scalar_store(x: f64) -> ParamStore {
        let mut p = ParamStore::new(Precision::Binary64);
        p.add("x", Tensor::vector(vec![x])).unwrap();
        p
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = scalar_store(1.0);
        let cfg = AdamConfig {
            learning_rate: 0.1,
            weight_decay: 0.0,
            ..AdamConfig::default()
        };
        let mut st = OptimizerState::new(&p, cfg);
        adam_step(&mut p, &[Tensor::vector(vec![1.0])], &mut st).unwrap();
        let delta = p.tensors()[0].data()[0] - 1.0;
        assert!((delta + 0.1).abs() < 1e-8, "{delta}");
        assert_eq!(st.step_count(), 1);
    }

    #[test]
    fn three_step_trajectory_matches_recurrence() {
        // Hand-unrolled recurrence, kept separate from adam_step's loop.
        let (lr, b1, b2, eps, wd) = (0.01, 0.9, 0.999, 1e-8, 0.1);
        let grads = [0.5, -0.25, 1.5];
        let mut x = 2.0f64;
        let (mut m, mut v) = (0.0f64, 0.0f64);
        let mut expected = Vec::new();
        for (t, g) in grads.iter().enumerate() {
            let t = (t + 1) as i32;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - b1.powi(t));
            let vh = v / (1.0 - b2.powi(t));
            x = x * (1.0 - lr * wd) - lr * mh / (vh.sqrt() + eps);
            expected.push(x);
        }

        let mut p = scalar_store(2.0);
        let cfg = AdamConfig {
            learning_rate: lr,
            beta1: b1,
            beta2: b2,
            eps,
            weight_decay: wd,
        };
        let mut st = OptimizerState::new(&p, cfg);
        for (g, want) in grads.iter().zip(&expected) {
            adam_step(&mut p, &[Tensor::vector(vec![*g])], &mut st).unwrap();
            assert!((p.tensors()[0].data()[0] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_gradients_without_decay_are_identity() {
        let mut p = scalar_store(0.75);
        let cfg = AdamConfig {
            weight_decay: 0.0,
            ..AdamConfig::default()
        };
        let mut st = OptimizerState::new(&p, cfg);
        for _ in 0..5 {
            adam_step(&mut p, &[Tensor::vector(vec![0.0])], &mut st).unwrap();
        }
        assert_eq!(p.tensors()[0].data(), &[0.75]);
    }

    #[test]
    fn clipping_closed_forms() {
        let mut small = vec![Tensor::vector(vec![0.4, 0.0])];
        clip_gradients(&mut small, 0.5).unwrap();
        assert_eq!(small[0].data(), &[0.4, 0.0]);

        let mut big = vec![Tensor::vector(vec![3.0, 4.0])];
        let norm = clip_gradients(&mut big, 0.5).unwrap();
        assert_eq!(norm, 5.0);
        assert!((big[0].data()[0] - 0.3).abs() < 1e-15);
        assert!((big[0].data()[1] - 0.4).abs() < 1e-15);

        assert!(clip_gradients(&mut big, 0.0).is_err());
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut p = scalar_store(1.0);
        let mut st = OptimizerState::new(&p, AdamConfig::default());
        assert!(adam_step(&mut p, &[Tensor::vector(vec![1.0, 2.0])], &mut st).is_err());
    }
}
