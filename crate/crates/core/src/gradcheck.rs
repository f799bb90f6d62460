//! Central finite-difference gradient checking.
//!
//! The numeric side only ever evaluates forward passes on perturbed copies
//! of the input data, so it is independent of the backward implementation
//! it verifies. All checks run in `f64`.

use crate::tensor::Tensor;

/// Central-difference gradient of `f` at `x`: `(f(x+h) - f(x-h)) / 2h`
/// per element.
pub fn fd_gradient(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut grad = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        let orig = probe[i];
        probe[i] = orig + h;
        let fp = f(&probe);
        probe[i] = orig - h;
        let fm = f(&probe);
        probe[i] = orig;
        grad[i] = (fp - fm) / (2.0 * h);
    }
    grad
}

/// Worst relative error between analytic and numeric gradients over the
/// elements where either exceeds `floor` in magnitude.
pub fn max_rel_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    let mut worst = 0.0f64;
    for (&a, &n) in analytic.iter().zip(numeric) {
        if a.abs() <= floor && n.abs() <= floor {
            continue;
        }
        let rel = (a - n).abs() / a.abs().max(n.abs());
        worst = worst.max(rel);
    }
    worst
}

/// Default finite-difference step.
pub const FD_STEP: f64 = 1e-5;
/// Gradient magnitudes below this are not compared.
pub const FD_FLOOR: f64 = 1e-8;

/// Checks the gradient of a scalar-valued tensor function with respect to
/// one leaf input. `build` receives the (tracked) input tensor and must
/// return the scalar output; it is re-invoked with perturbed data for the
/// numeric side. Returns the worst relative error.
pub fn check_scalar_fn(
    x0: &Tensor<f64>,
    build: &dyn Fn(&Tensor<f64>) -> Tensor<f64>,
) -> f64 {
    let leaf = Tensor::from_vec(x0.shape().to_vec(), x0.data().to_vec())
        .expect("leaf")
        .requires_grad_leaf();
    let out = build(&leaf);
    assert_eq!(out.numel(), 1, "check_scalar_fn needs a scalar output");
    out.backward().expect("backward");
    let analytic = leaf.grad().expect("analytic gradient");

    let shape = x0.shape().to_vec();
    let numeric = fd_gradient(
        &|data: &[f64]| {
            let probe = Tensor::from_vec(shape.clone(), data.to_vec()).expect("probe");
            crate::tensor::no_grad(|| build(&probe)).item()
        },
        x0.data(),
        FD_STEP,
    );
    max_rel_error(&analytic, &numeric, FD_FLOOR)
}

/// Asserts the analytic gradient matches finite differences within `tol`.
pub fn assert_grad_close(
    x0: &Tensor<f64>,
    tol: f64,
    build: &dyn Fn(&Tensor<f64>) -> Tensor<f64>,
) {
    let err = check_scalar_fn(x0, build);
    assert!(err < tol, "gradient mismatch: worst rel err {err:.3e} >= {tol:.1e}");
}

/// Like [`check_scalar_fn`] but probes only `n_samples` randomly chosen
/// input elements — the spot-check variant for large inputs where a full
/// sweep would dominate the test run.
pub fn check_scalar_fn_sampled(
    x0: &Tensor<f64>,
    n_samples: usize,
    seed: u64,
    build: &dyn Fn(&Tensor<f64>) -> Tensor<f64>,
) -> f64 {
    let leaf = Tensor::from_vec(x0.shape().to_vec(), x0.data().to_vec())
        .expect("leaf")
        .requires_grad_leaf();
    let out = build(&leaf);
    assert_eq!(out.numel(), 1, "sampled gradcheck needs a scalar output");
    out.backward().expect("backward");
    let analytic = leaf.grad().expect("analytic gradient");

    let mut rng = crate::rng::Rng::seed_from(seed);
    let shape = x0.shape().to_vec();
    let mut probe = x0.data().to_vec();
    let mut worst = 0.0f64;
    let eval = |data: &[f64]| {
        let t = Tensor::from_vec(shape.clone(), data.to_vec()).expect("probe");
        crate::tensor::no_grad(|| build(&t)).item()
    };
    for _ in 0..n_samples.min(probe.len()) {
        let i = rng.below(probe.len());
        let orig = probe[i];
        probe[i] = orig + FD_STEP;
        let fp = eval(&probe);
        probe[i] = orig - FD_STEP;
        let fm = eval(&probe);
        probe[i] = orig;
        let numeric = (fp - fm) / (2.0 * FD_STEP);
        if analytic[i].abs() <= FD_FLOOR && numeric.abs() <= FD_FLOOR {
            continue;
        }
        let rel = (analytic[i] - numeric).abs() / analytic[i].abs().max(numeric.abs());
        worst = worst.max(rel);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fd_matches_known_derivative() {
        let f = |x: &[f64]| x[0] * x[0] * x[1];
        let g = fd_gradient(&f, &[2.0, 3.0], 1e-6);
        assert!((g[0] - 12.0).abs() < 1e-6);
        assert!((g[1] - 4.0).abs() < 1e-6);
    }

    #[test]
    fn check_scalar_fn_on_composite() {
        let x = Tensor::from_vec(vec![4], vec![0.3, -0.7, 1.2, 0.05]).unwrap();
        let err = check_scalar_fn(&x, &|t| t.sigmoid().mul(&t.tanh()).unwrap().sum_all());
        assert!(err < 1e-7, "err {err}");
    }

    #[test]
    fn max_rel_error_ignores_tiny_pairs() {
        assert_eq!(max_rel_error(&[1e-12], &[5e-12], 1e-8), 0.0);
        assert!(max_rel_error(&[1.0], &[1.1], 1e-8) > 0.09);
    }
}
