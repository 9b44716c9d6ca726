use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Central-difference step.
pub const FD_STEP: f64 = 1e-5;

/// Compares the analytic gradient returned by `f` against central finite
/// differences and returns `max_i |g_i − g_fd_i| / max(1, |g_fd_i|)`.
///
/// `f` maps a point to `(value, gradient)`; only the value is used at the
/// perturbed points.
pub fn grad_check<F>(f: F, x: &Tensor<f64>) -> Result<f64>
where
    F: Fn(&Tensor<f64>) -> Result<(f64, Tensor<f64>)>,
{
    let (value, analytic) = f(x)?;
    if !value.is_finite() {
        return Err(Error::Evaluation(format!("f(x) = {value} is not finite")));
    }
    if analytic.shape() != x.shape() {
        return Err(Error::Dimension(format!(
            "gradient shape {:?} differs from input shape {:?}",
            analytic.shape(),
            x.shape()
        )));
    }
    let mut probe = x.clone();
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        let orig = x.data()[i];
        probe.data_mut()[i] = orig + FD_STEP;
        let plus = f(&probe)?.0;
        probe.data_mut()[i] = orig - FD_STEP;
        let minus = f(&probe)?.0;
        probe.data_mut()[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::Evaluation(format!(
                "non-finite value while perturbing coordinate {i}"
            )));
        }
        let fd = (plus - minus) / (2.0 * FD_STEP);
        let err = (analytic.data()[i] - fd).abs() / fd.abs().max(1.0);
        worst = worst.max(err);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_is_exact() {
        let x = Tensor::new(vec![2], vec![1.0, 2.0]).unwrap();
        let f = |x: &Tensor<f64>| {
            let v = x.data().iter().map(|a| a * a).sum::<f64>();
            let g = Tensor::from_fn(x.shape(), |i| 2.0 * x.data()[i]);
            Ok((v, g))
        };
        assert_eq!(f(&x).unwrap().1.data(), &[2.0, 4.0]);
        assert!(grad_check(f, &x).unwrap() <= 1e-7);
    }

    #[test]
    fn constant_has_zero_error() {
        let x = Tensor::new(vec![3], vec![0.5, -1.0, 9.0]).unwrap();
        let err = grad_check(|x| Ok((3.25, Tensor::zeros(x.shape()))), &x).unwrap();
        assert_eq!(err, 0.0);
    }

    #[test]
    fn wrong_gradient_is_detected() {
        let x = Tensor::new(vec![1], vec![1.0]).unwrap();
        let err = grad_check(|x| Ok((x.data()[0].powi(2), Tensor::filled(&[1], 1.0))), &x).unwrap();
        assert!((err - 0.5).abs() < 1e-6);
    }

    #[test]
    fn non_finite_value_is_an_error() {
        let x = Tensor::new(vec![1], vec![0.0]).unwrap();
        let r = grad_check(|x| Ok((1.0 / x.data()[0], Tensor::zeros(&[1]))), &x);
        assert!(matches!(r, Err(Error::Evaluation(_))));
    }
}
