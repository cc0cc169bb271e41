use ndarray::{Array1, Array2, ArrayView1};

/// Cross-entropy of one logit vector and its gradient with respect to the
/// logits. Softmax for `C > 1`; for a single logit, binary cross-entropy on
/// its sigmoid with `label` 1 meaning positive.
pub fn cross_entropy(logits: ArrayView1<f64>, label: usize) -> (f64, Array1<f64>) {
    if logits.len() == 1 {
        let z = logits[0];
        let y = if label > 0 { 1.0 } else { 0.0 };
        // -log sigmoid(z) = softplus(-z)
        let loss = softplus(if y == 1.0 { -z } else { z });
        let p = crate::nnet::layers::sigmoid(z);
        return (loss, Array1::from_elem(1, p - y));
    }
    let m = logits.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let shifted = logits.mapv(|z| z - m);
    let sum: f64 = shifted.iter().map(|z| z.exp()).sum();
    let lse = sum.ln();
    let loss = lse - shifted[label];
    let mut grad = shifted.mapv(|z| (z - lse).exp());
    grad[label] -= 1.0;
    (loss, grad)
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Mean cross-entropy over a batch of pooled logits and the gradient of
/// that mean.
pub fn batch_cross_entropy(pooled: &Array2<f64>, labels: &[usize]) -> (f64, Array2<f64>) {
    let n = pooled.nrows();
    assert_eq!(n, labels.len(), "one label per row");
    let mut grad = Array2::zeros(pooled.raw_dim());
    let mut total = 0.0;
    for (i, &label) in labels.iter().enumerate() {
        let (l, g) = cross_entropy(pooled.row(i), label);
        total += l;
        grad.row_mut(i).assign(&(g / n as f64));
    }
    (total / n as f64, grad)
}
