use crate::error::{Error, Result};
use crate::numerics::{Real, Tensor};

/// Cross-entropy against `q = (1−ε)·onehot + ε/K`, averaged over the batch.
/// Returns the loss and its gradient with respect to the logits,
/// `(softmax(logits) − q) / B`.
pub fn label_smoothed_loss<T: Real>(logits: &Tensor<T>, targets: &[usize], epsilon: f64) -> Result<(f64, Tensor<T>)> {
    let &[b, k] = logits.shape() else {
        return Err(Error::Dimension(format!("logits must be B×K, got {:?}", logits.shape())));
    };
    if k < 2 {
        return Err(Error::Parameter(format!("label smoothing needs at least 2 classes, got {k}")));
    }
    if targets.len() != b {
        return Err(Error::Dimension(format!("{} targets for a batch of {b}", targets.len())));
    }
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::Parameter(format!("label smoothing {epsilon} must lie in [0, 1)")));
    }
    let off = epsilon / k as f64;
    let on = 1.0 - epsilon + off;
    let mut total = 0.0;
    let mut grad = Vec::with_capacity(b * k);
    for (row, &target) in logits.data().chunks_exact(k).zip(targets) {
        if target >= k {
            return Err(Error::Parameter(format!("target {target} out of range for {k} classes")));
        }
        let max = row.iter().map(|v| v.as_f64()).fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|v| (v.as_f64() - max).exp()).sum();
        let log_z = max + sum.ln();
        for (c, v) in row.iter().enumerate() {
            let q = if c == target { on } else { off };
            let log_p = v.as_f64() - log_z;
            total -= q * log_p;
            grad.push(T::of((log_p.exp() - q) / b as f64));
        }
    }
    Ok((total / b as f64, Tensor::new(vec![b, k], grad)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::grad_check;
    use proptest::prelude::*;

    #[test]
    fn uniform_logits_give_ln_k() {
        let l = Tensor::<f64>::filled(&[3, 7], 0.4);
        let (loss, _) = label_smoothed_loss(&l, &[0, 3, 6], 0.1).unwrap();
        assert!((loss - 7f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn minimum_is_entropy_of_target() {
        // Logits equal to log q realize q exactly.
        let q: Vec<f64> = (0..10).map(|c| if c == 2 { 0.91 } else { 0.01 }).collect();
        let l = Tensor::new(vec![1, 10], q.iter().map(|v| v.ln()).collect()).unwrap();
        let (loss, grad) = label_smoothed_loss(&l, &[2], 0.1).unwrap();
        let entropy: f64 = q.iter().map(|v| -v * v.ln()).sum();
        assert!((loss - entropy).abs() < 1e-12);
        assert!((entropy - 0.5002).abs() < 1e-3);
        assert!(grad.data().iter().all(|g| g.abs() < 1e-12));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let l = Tensor::from_fn(&[3, 5], |i| ((i * 7) % 11) as f64 * 0.3 - 1.0);
        let err = grad_check(|x| label_smoothed_loss(x, &[1, 4, 0], 0.1), &l).unwrap();
        assert!(err <= 1e-6, "{err}");
    }

    #[test]
    fn bad_target_is_rejected() {
        let l = Tensor::<f64>::zeros(&[1, 3]);
        assert!(matches!(label_smoothed_loss(&l, &[3], 0.1), Err(Error::Parameter(_))));
    }

    #[test]
    fn descent_converges_to_entropy() {
        let mut l = Tensor::<f64>::zeros(&[1, 4]);
        for _ in 0..5000 {
            let (_, g) = label_smoothed_loss(&l, &[1], 0.1).unwrap();
            for (v, gv) in l.data_mut().iter_mut().zip(g.data()) {
                *v -= 5.0 * gv;
            }
        }
        let (loss, _) = label_smoothed_loss(&l, &[1], 0.1).unwrap();
        let q = [0.025, 0.925, 0.025, 0.025];
        let entropy: f64 = q.iter().map(|v: &f64| -v * v.ln()).sum();
        assert!((loss - entropy).abs() < 1e-9, "{loss} vs {entropy}");
    }

    proptest! {
        #[test]
        fn loss_never_below_target_entropy(values in prop::collection::vec(-20.0f64..20.0, 6), t in 0usize..6) {
            let l = Tensor::new(vec![1, 6], values).unwrap();
            let (loss, _) = label_smoothed_loss(&l, &[t], 0.1).unwrap();
            let on: f64 = 0.9 + 0.1 / 6.0;
            let off = 0.1f64 / 6.0;
            let entropy = -on * on.ln() - 5.0 * off * off.ln();
            prop_assert!(loss >= entropy - 1e-12);
        }
    }
}
