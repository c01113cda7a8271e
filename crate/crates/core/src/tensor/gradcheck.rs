//! Central finite-difference verification of analytic gradients.

use super::Tensor;
use crate::error::{arg_err, dim_err, Result};

/// Outcome of comparing an analytic gradient against central differences.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckReport {
    /// `max_i |analytic_i - numeric_i| / max(1e-8, |numeric_i|)`.
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub coords: usize,
}

/// Compares `analytic` (the gradient of `loss` at `x`) against
/// `(loss(x + eps e_i) - loss(x - eps e_i)) / (2 eps)` for every coordinate.
pub fn check_gradient(
    mut loss: impl FnMut(&Tensor<f64>) -> Result<f64>,
    x: &Tensor<f64>,
    analytic: &Tensor<f64>,
    eps: f64,
) -> Result<CheckReport> {
    if !(eps > 0.0) {
        return arg_err(format!(
            "finite-difference step must be positive, got {eps}"
        ));
    }
    if analytic.shape() != x.shape() {
        return dim_err(format!(
            "analytic gradient {:?} does not match input {:?}",
            analytic.shape(),
            x.shape()
        ));
    }
    let mut probe = x.clone();
    let mut report = CheckReport {
        max_rel_error: 0.0,
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
        coords: x.len(),
    };
    for i in 0..x.len() {
        let orig = x.data()[i];
        probe.data_mut()[i] = orig + eps;
        let up = loss(&probe)?;
        probe.data_mut()[i] = orig - eps;
        let down = loss(&probe)?;
        probe.data_mut()[i] = orig;
        let numeric = (up - down) / (2.0 * eps);
        let a = analytic.data()[i];
        let rel = (a - numeric).abs() / numeric.abs().max(1e-8);
        if rel > report.max_rel_error || rel.is_nan() {
            report.max_rel_error = rel;
            report.worst_index = i;
            report.analytic = a;
            report.numeric = numeric;
        }
    }
    Ok(report)
}

/// Maximum relative error between the analytic gradient returned by `f` and
/// central differences of its loss. `f` maps a point to `(loss, gradient)`.
pub fn finite_diff_check(
    mut f: impl FnMut(&Tensor<f64>) -> Result<(f64, Tensor<f64>)>,
    x: &Tensor<f64>,
    eps: f64,
) -> Result<f64> {
    if !(eps > 0.0) {
        return arg_err(format!(
            "finite-difference step must be positive, got {eps}"
        ));
    }
    let (_, analytic) = f(x)?;
    let report = check_gradient(|p| f(p).map(|(l, _)| l), x, &analytic, eps)?;
    Ok(report.max_rel_error)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sum_of_squares() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = Tensor::<f64>::randn(&[4, 5], 1.0, &mut rng);
        let err = finite_diff_check(|p| Ok((p.sq_norm(), p.map(|v| 2.0 * v))), &x, 1e-5).unwrap();
        assert!(err < 1e-7, "{err}");
    }

    #[test]
    fn non_positive_eps_is_rejected() {
        let x = Tensor::<f64>::zeros(&[2]);
        for eps in [0.0, -1e-5, f64::NAN] {
            let r = finite_diff_check(|p| Ok((p.sum(), Tensor::full(&[2], 1.0))), &x, eps);
            assert!(matches!(r, Err(crate::Error::Argument(_))));
        }
    }

    #[test]
    fn wrong_gradient_is_detected() {
        let x = Tensor::full(&[3], 1.0);
        let err = finite_diff_check(|p| Ok((p.sq_norm(), p.clone())), &x, 1e-5).unwrap();
        assert!(err > 0.4);
    }
}
