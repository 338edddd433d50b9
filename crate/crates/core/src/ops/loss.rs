use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Mean softmax cross-entropy against label-smoothed one-hot targets.
///
/// The target puts `1 − s` on the true class and `s / (k − 1)` on each other
/// class (with `k = 1` the single class gets everything). Returns the loss
/// and its gradient with respect to `logits[B×k]`.
pub fn softmax_xent<T: Scalar>(
    logits: &Tensor<T>,
    labels: &[usize],
    smoothing: f64,
) -> Result<(T, Tensor<T>)> {
    let [batch, k] = *logits.shape() else {
        return Err(Error::shape(format!(
            "softmax_xent expects [B, k] logits, got {:?}",
            logits.shape()
        )));
    };
    if labels.len() != batch {
        return Err(Error::shape(format!(
            "softmax_xent: {} labels for a batch of {batch}",
            labels.len()
        )));
    }
    if !(0.0..1.0).contains(&smoothing) {
        return Err(Error::config(format!(
            "label smoothing {smoothing} not in [0, 1)"
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::Data(format!(
            "label {bad} out of range for {k} classes"
        )));
    }
    let (on, off) = if k == 1 {
        (1.0, 0.0)
    } else {
        (1.0 - smoothing, smoothing / (k as f64 - 1.0))
    };
    let inv_b = 1.0 / batch as f64;
    let mut loss = 0.0f64;
    let mut grad = Vec::with_capacity(batch * k);
    for (row, &label) in logits.data().chunks(k).zip(labels) {
        let max = row.iter().fold(f64::NEG_INFINITY, |m, v| m.max(v.as_f64()));
        let shifted: Vec<f64> = row.iter().map(|v| v.as_f64() - max).collect();
        let log_z = shifted.iter().map(|v| v.exp()).sum::<f64>().ln();
        for (j, &s) in shifted.iter().enumerate() {
            let target = if j == label { on } else { off };
            let log_p = s - log_z;
            loss -= target * log_p;
            grad.push(T::from_f64((log_p.exp() - target) * inv_b));
        }
    }
    Ok((
        T::from_f64(loss * inv_b),
        Tensor::from_vec(logits.shape(), grad)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_log_k() {
        let logits = Tensor::<f64>::zeros(&[3, 5]).unwrap();
        let (loss, _) = softmax_xent(&logits, &[0, 1, 4], 0.0).unwrap();
        assert!((loss - 5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn confident_correct_prediction_has_vanishing_loss() {
        let logits = Tensor::from_vec(&[1, 3], vec![100.0f64, 0.0, 0.0]).unwrap();
        let (loss, _) = softmax_xent(&logits, &[0], 0.0).unwrap();
        assert!(loss < 1e-40);
    }

    #[test]
    fn smoothed_binary_uniform_is_log_two() {
        let logits = Tensor::<f64>::zeros(&[1, 2]).unwrap();
        let (loss, _) = softmax_xent(&logits, &[1], 0.1).unwrap();
        assert!((loss - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn gradient_rows_sum_to_zero() {
        let logits = Tensor::from_vec(&[2, 3], vec![0.3f64, -1.0, 2.0, 0.0, 0.5, 0.1]).unwrap();
        let (_, g) = softmax_xent(&logits, &[2, 0], 0.1).unwrap();
        for row in g.data().chunks(3) {
            assert!(row.iter().sum::<f64>().abs() < 1e-15);
        }
    }

    #[test]
    fn errors() {
        let logits = Tensor::<f64>::zeros(&[1, 2]).unwrap();
        assert!(matches!(
            softmax_xent(&logits, &[2], 0.0),
            Err(Error::Data(_))
        ));
        assert!(softmax_xent(&logits, &[0, 1], 0.0).is_err());
        assert!(softmax_xent(&logits, &[0], 1.0).is_err());
    }
}
