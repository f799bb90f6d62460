//! Adam optimizer over named parameter slots.

use std::collections::HashMap;

use crate::networks::layers::ParamSlots;
use crate::scalar::{s, Scalar};
use crate::tensor::Tensor;

/// Per-parameter first/second moment state, keyed by parameter name so it
/// survives checkpointing.
pub struct Adam<S: Scalar> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Update count (bias correction uses `t`).
    pub t: u64,
    m: HashMap<String, Vec<S>>,
    v: HashMap<String, Vec<S>>,
}

impl<S: Scalar> Adam<S> {
    pub fn new(lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Adam { lr, beta1, beta2, eps, t: 0, m: HashMap::new(), v: HashMap::new() }
    }

    /// Applies one update to every slot that has a gradient, replacing the
    /// tensor with a fresh tracked leaf (gradients cleared). Parameters
    /// without gradients are left untouched.
    pub fn step(&mut self, params: &mut ParamSlots<'_, S>) {
        self.t += 1;
        let b1: S = s(self.beta1);
        let b2: S = s(self.beta2);
        let one = S::one();
        let bc1 = one - s::<S>(self.beta1.powi(self.t as i32));
        let bc2 = one - s::<S>(self.beta2.powi(self.t as i32));
        let lr: S = s(self.lr);
        let eps: S = s(self.eps);
        for (name, slot) in params.iter_mut() {
            let Some(grad) = slot.grad() else { continue };
            let n = slot.numel();
            let m = self.m.entry(name.clone()).or_insert_with(|| vec![S::zero(); n]);
            let v = self.v.entry(name.clone()).or_insert_with(|| vec![S::zero(); n]);
            let mut new_data = slot.data().to_vec();
            for i in 0..n {
                let g = grad[i];
                m[i] = b1 * m[i] + (one - b1) * g;
                v[i] = b2 * v[i] + (one - b2) * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                new_data[i] = new_data[i] - lr * m_hat / (v_hat.sqrt() + eps);
            }
            **slot = Tensor::param(slot.shape().to_vec(), new_data).expect("adam update");
        }
    }

    /// Serializes moment state as named tensors for checkpointing.
    pub fn state_tensors(&self) -> Vec<(String, Tensor<S>)> {
        let mut out = Vec::new();
        let mut names: Vec<&String> = self.m.keys().collect();
        names.sort();
        for name in names {
            let m = &self.m[name];
            let v = &self.v[name];
            out.push((
                format!("opt.m.{name}"),
                Tensor::from_vec(vec![m.len()], m.clone()).expect("adam m"),
            ));
            out.push((
                format!("opt.v.{name}"),
                Tensor::from_vec(vec![v.len()], v.clone()).expect("adam v"),
            ));
        }
        out
    }

    pub fn load_state(&mut self, t: u64, tensors: &[(String, Tensor<S>)]) {
        self.t = t;
        for (name, tensor) in tensors {
            if let Some(param) = name.strip_prefix("opt.m.") {
                self.m.insert(param.to_string(), tensor.data().to_vec());
            } else if let Some(param) = name.strip_prefix("opt.v.") {
                self.v.insert(param.to_string(), tensor.data().to_vec());
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adam_descends_a_quadratic() {
        let mut w = Tensor::param(vec![2], vec![5.0f64, -3.0]).unwrap();
        let mut adam = Adam::new(0.1, 0.9, 0.999, 1e-8);
        for _ in 0..200 {
            let loss = w.square().sum_all();
            loss.backward().unwrap();
            let mut slots = vec![("w".to_string(), &mut w)];
            adam.step(&mut slots);
        }
        assert!(w.data()[0].abs() < 0.2, "{:?}", w.data());
        assert!(w.data()[1].abs() < 0.2, "{:?}", w.data());
    }

    #[test]
    fn first_step_matches_closed_form() {
        // With bias correction, the very first Adam step is
        // -lr * g / (|g| + eps') approximately = -lr * sign(g).
        let mut w = Tensor::param(vec![1], vec![1.0f64]).unwrap();
        let mut adam = Adam::new(0.01, 0.9, 0.999, 1e-8);
        let loss = w.mul_scalar(3.0).sum_all();
        loss.backward().unwrap();
        let mut slots = vec![("w".to_string(), &mut w)];
        adam.step(&mut slots);
        assert!((w.data()[0] - (1.0 - 0.01)).abs() < 1e-6, "{}", w.data()[0]);
    }

    #[test]
    fn state_roundtrip_resumes_identically() {
        let run = |resume_at: Option<u64>| -> Vec<f64> {
            let mut w = Tensor::param(vec![2], vec![2.0f64, -1.0]).unwrap();
            let mut adam = Adam::new(0.05, 0.9, 0.999, 1e-8);
            let mut saved: Option<(u64, Vec<(String, Tensor<f64>)>, Vec<f64>)> = None;
            for step in 0..10 {
                if Some(step) == resume_at {
                    saved = Some((adam.t, adam.state_tensors(), w.data().to_vec()));
                }
                let loss = w.square().sum_all();
                loss.backward().unwrap();
                let mut slots = vec![("w".to_string(), &mut w)];
                adam.step(&mut slots);
            }
            if let Some((t, state, w_data)) = saved {
                // replay the tail from the snapshot
                let mut w2 = Tensor::param(vec![2], w_data).unwrap();
                let mut adam2 = Adam::new(0.05, 0.9, 0.999, 1e-8);
                adam2.load_state(t, &state);
                for _ in resume_at.unwrap()..10 {
                    let loss = w2.square().sum_all();
                    loss.backward().unwrap();
                    let mut slots = vec![("w".to_string(), &mut w2)];
                    adam2.step(&mut slots);
                }
                return w2.data().to_vec();
            }
            w.data().to_vec()
        };
        let straight = run(None);
        let resumed = run(Some(4));
        assert_eq!(straight, resumed);
    }

    #[test]
    fn parameters_without_gradient_are_untouched(){
        let mut w = Tensor::param(vec![1], vec![7.0f64]).unwrap();
        let mut adam = Adam::new(0.1, 0.9, 0.999, 1e-8);
        let mut slots = vec![("w".to_string(), &mut w)];
        adam.step(&mut slots);
        assert_eq!(w.data(), &[7.0]);
    }
}
