use crate::error::{Error, Result};
use crate::tensor::{shape_str, Scalar, Tensor};

/// Mean categorical cross-entropy of softmax(logits) against integer labels.
///
/// Returns the loss and its gradient with respect to the logits,
/// `(softmax - onehot) / B`. Rows are max-shifted before exponentiation.
pub fn softmax_cross_entropy<T: Scalar>(logits: &Tensor<T>, labels: &[usize]) -> Result<(T, Tensor<T>)> {
    if logits.rank() != 2 || logits.shape()[0] != labels.len() {
        return Err(Error::dim(
            "softmax_cross_entropy",
            format!("[{} x K] logits", labels.len()),
            shape_str(logits.shape()),
        ));
    }
    let (batch, k) = (logits.shape()[0], logits.shape()[1]);
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::InvalidArgument(format!("label {bad} outside [0, {k})")));
    }
    let inv_b = T::one() / T::from_usize(batch).unwrap();
    let mut grad = Tensor::zeros(logits.shape());
    let mut loss = T::zero();
    for ((row, g), &label) in logits.data().chunks(k).zip(grad.data_mut().chunks_mut(k)).zip(labels) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut denom = T::zero();
        for (gi, &v) in g.iter_mut().zip(row) {
            *gi = (v - max).exp();
            denom += *gi;
        }
        // -log softmax[label] = log(denom) - (z_label - max)
        loss += denom.ln() - (row[label] - max);
        for gi in g.iter_mut() {
            *gi = *gi / denom * inv_b;
        }
        g[label] -= inv_b;
    }
    Ok((loss * inv_b, grad))
}

/// Row-wise softmax of `[B, K]` logits.
pub fn softmax<T: Scalar>(logits: &Tensor<T>) -> Result<Tensor<T>> {
    logits.expect_rank(2, "softmax")?;
    let k = logits.shape()[1];
    let mut out = logits.clone();
    for row in out.data_mut().chunks_mut(k) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut denom = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            denom += *v;
        }
        row.iter_mut().for_each(|v| *v /= denom);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_log_k() {
        let logits = Tensor::<f64>::zeros(&[3, 7]);
        let (loss, _) = softmax_cross_entropy(&logits, &[0, 3, 6]).unwrap();
        assert!((loss - 7f64.ln()).abs() < 1e-12);
        assert!((loss - 1.94591).abs() < 1e-5);
    }

    #[test]
    fn saturated_correct_class() {
        let mut logits = Tensor::<f64>::zeros(&[1, 7]);
        logits.data_mut()[2] = 100.0;
        let (loss, _) = softmax_cross_entropy(&logits, &[2]).unwrap();
        assert!(loss < 1e-6);
    }

    #[test]
    fn rejects_out_of_range_label() {
        let logits = Tensor::<f32>::zeros(&[1, 7]);
        assert!(softmax_cross_entropy(&logits, &[7]).is_err());
    }

    #[test]
    fn gradient_rows_sum_to_zero() {
        let logits = Tensor::<f64>::from_fn(&[2, 4], |i| (i as f64).sin());
        let (_, g) = softmax_cross_entropy(&logits, &[1, 3]).unwrap();
        for row in g.data().chunks(4) {
            assert!(row.iter().sum::<f64>().abs() < 1e-15);
        }
    }
}
