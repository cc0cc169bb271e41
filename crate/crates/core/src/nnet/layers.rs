//! Layer primitives on sequence batches stored as `(n_seq * t) x channels`
//! matrices, row `s * t + i` holding frame `i` of sequence `s`.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};

#[derive(Debug, Clone)]
pub(crate) struct BnCache {
    pub xhat: Array2<f64>,
    pub inv_std: Array1<f64>,
    pub mean: Array1<f64>,
    /// Biased batch variance (train mode) or the running variance.
    pub var: Array1<f64>,
    pub rows: usize,
    pub train: bool,
}

pub(crate) fn bn_forward(
    x: &Array2<f64>,
    gamma: ArrayView1<f64>,
    beta: ArrayView1<f64>,
    run_mean: ArrayView1<f64>,
    run_var: ArrayView1<f64>,
    eps: f64,
    train: bool,
) -> (Array2<f64>, BnCache) {
    let rows = x.nrows();
    let (mean, var) = if train {
        let mean = x.mean_axis(Axis(0)).expect("non-empty batch");
        let var = x.axis_iter(Axis(0)).fold(Array1::zeros(x.ncols()), |acc, r| {
            let d = &r - &mean;
            acc + &d * &d
        }) / rows as f64;
        (mean, var)
    } else {
        (run_mean.to_owned(), run_var.to_owned())
    };
    let inv_std = var.mapv(|v| 1.0 / (v + eps).sqrt());
    let xhat = (x - &mean) * &inv_std;
    let y = &xhat * &gamma + &beta;
    (
        y,
        BnCache {
            xhat,
            inv_std,
            mean,
            var,
            rows,
            train,
        },
    )
}

/// Returns `(dx, dgamma, dbeta)`.
pub(crate) fn bn_backward(
    dy: &Array2<f64>,
    gamma: ArrayView1<f64>,
    cache: &BnCache,
) -> (Array2<f64>, Array1<f64>, Array1<f64>) {
    let dbeta = dy.sum_axis(Axis(0));
    let dgamma = (dy * &cache.xhat).sum_axis(Axis(0));
    let scale = &gamma * &cache.inv_std;
    let dx = if cache.train {
        let n = cache.rows as f64;
        let mean_dy = &dbeta / n;
        let mean_dy_xhat = &dgamma / n;
        (dy - &mean_dy - &cache.xhat * &mean_dy_xhat) * &scale
    } else {
        dy * &scale
    };
    (dx, dgamma, dbeta)
}

/// Valid strided convolution over time. `w` is `(k * cin) x cout` with tap
/// `j` of input channel `c` at row `j * cin + c`.
pub(crate) fn conv_forward(
    x: &Array2<f64>,
    n_seq: usize,
    t: usize,
    w: &Array2<f64>,
    b: ArrayView1<f64>,
    k: usize,
    stride: usize,
) -> (Array2<f64>, usize, Array2<f64>) {
    let cin = x.ncols();
    let t_out = conv_out_len(t, k, stride);
    let mut cols = Array2::zeros((n_seq * t_out, k * cin));
    for s in 0..n_seq {
        for o in 0..t_out {
            let mut row = cols.row_mut(s * t_out + o);
            for j in 0..k {
                row.slice_mut(s![j * cin..(j + 1) * cin])
                    .assign(&x.row(s * t + o * stride + j));
            }
        }
    }
    let y = cols.dot(w) + &b;
    (y, t_out, cols)
}

pub(crate) fn conv_out_len(t: usize, k: usize, stride: usize) -> usize {
    if t < k {
        0
    } else {
        (t - k) / stride + 1
    }
}

/// Returns `(dx, dw, db)`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn conv_backward(
    dy: &Array2<f64>,
    cols: &Array2<f64>,
    w: &Array2<f64>,
    n_seq: usize,
    t: usize,
    cin: usize,
    k: usize,
    stride: usize,
) -> (Array2<f64>, Array2<f64>, Array1<f64>) {
    let t_out = conv_out_len(t, k, stride);
    let dw = cols.t().dot(dy);
    let db = dy.sum_axis(Axis(0));
    let dcols = dy.dot(&w.t());
    let mut dx = Array2::zeros((n_seq * t, cin));
    for s in 0..n_seq {
        for o in 0..t_out {
            let row = dcols.row(s * t_out + o);
            for j in 0..k {
                let mut dst = dx.row_mut(s * t + o * stride + j);
                dst += &row.slice(s![j * cin..(j + 1) * cin]);
            }
        }
    }
    (dx, dw, db)
}

pub(crate) fn dense_forward(x: &Array2<f64>, w: &Array2<f64>, b: ArrayView1<f64>) -> Array2<f64> {
    x.dot(w) + &b
}

/// Returns `(dx, dw, db)`.
pub(crate) fn dense_backward(
    dy: &Array2<f64>,
    x: &Array2<f64>,
    w: &Array2<f64>,
) -> (Array2<f64>, Array2<f64>, Array1<f64>) {
    (dy.dot(&w.t()), x.t().dot(dy), dy.sum_axis(Axis(0)))
}

/// Causal dilated depthwise convolution, `w` is `k x channels`; tap `k-1`
/// multiplies the current frame, tap `j` the frame `(k-1-j) * dilation` back.
pub(crate) fn depthwise_forward(
    x: &Array2<f64>,
    n_seq: usize,
    t: usize,
    w: &Array2<f64>,
    b: ArrayView1<f64>,
    dilation: usize,
) -> Array2<f64> {
    let k = w.nrows();
    let mut y = Array2::zeros(x.raw_dim());
    y += &b;
    for s in 0..n_seq {
        let base = s * t;
        for j in 0..k {
            let shift = (k - 1 - j) * dilation;
            if shift >= t {
                continue;
            }
            let src = x.slice(s![base..base + t - shift, ..]);
            let mut dst = y.slice_mut(s![base + shift..base + t, ..]);
            dst.zip_mut_with(&(&src * &w.row(j)), |d, v| *d += v);
        }
    }
    y
}

/// Returns `(dx, dw, db)`.
pub(crate) fn depthwise_backward(
    dy: &Array2<f64>,
    x: &Array2<f64>,
    n_seq: usize,
    t: usize,
    w: &Array2<f64>,
    dilation: usize,
) -> (Array2<f64>, Array2<f64>, Array1<f64>) {
    let k = w.nrows();
    let mut dx = Array2::zeros(x.raw_dim());
    let mut dw = Array2::zeros(w.raw_dim());
    for s in 0..n_seq {
        let base = s * t;
        for j in 0..k {
            let shift = (k - 1 - j) * dilation;
            if shift >= t {
                continue;
            }
            let g = dy.slice(s![base + shift..base + t, ..]);
            let src = x.slice(s![base..base + t - shift, ..]);
            let mut dwj = dw.row_mut(j);
            dwj += &(&g * &src).sum_axis(Axis(0));
            let mut dst = dx.slice_mut(s![base..base + t - shift, ..]);
            dst.zip_mut_with(&(&g * &w.row(j)), |d, v| *d += v);
        }
    }
    (dx, dw, dy.sum_axis(Axis(0)))
}

pub(crate) fn prelu_forward(x: &Array2<f64>, a: f64) -> Array2<f64> {
    x.mapv(|v| if v > 0.0 { v } else { a * v })
}

/// Returns `(dx, da)`.
pub(crate) fn prelu_backward(dy: &Array2<f64>, x: &Array2<f64>, a: f64) -> (Array2<f64>, f64) {
    let mut da = 0.0;
    let mut dx = dy.clone();
    ndarray::Zip::from(&mut dx).and(x).for_each(|d, &v| {
        if v <= 0.0 {
            da += *d * v;
            *d *= a;
        }
    });
    (dx, da)
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Max over time per sequence and class. Returns pooled `n_seq x c` and the
/// frame index of every maximum (first one on ties).
pub(crate) fn maxpool_forward(x: ArrayView2<f64>, n_seq: usize, t: usize) -> (Array2<f64>, Vec<usize>) {
    let c = x.ncols();
    let mut out = Array2::zeros((n_seq, c));
    let mut idx = vec![0usize; n_seq * c];
    for s in 0..n_seq {
        for k in 0..c {
            let mut best = (0, f64::NEG_INFINITY);
            for i in 0..t {
                let v = x[[s * t + i, k]];
                if v > best.1 {
                    best = (i, v);
                }
            }
            out[[s, k]] = best.1;
            idx[s * c + k] = best.0;
        }
    }
    (out, idx)
}

pub(crate) fn maxpool_backward(dpooled: &Array2<f64>, idx: &[usize], t: usize) -> Array2<f64> {
    let (n_seq, c) = dpooled.dim();
    let mut dx = Array2::zeros((n_seq * t, c));
    for s in 0..n_seq {
        for k in 0..c {
            dx[[s * t + idx[s * c + k], k]] = dpooled[[s, k]];
        }
    }
    dx
}

/// Rows of the sequences listed in `seqs`, in that order.
pub(crate) fn gather_seqs(x: &Array2<f64>, t: usize, seqs: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros((seqs.len() * t, x.ncols()));
    for (i, &s) in seqs.iter().enumerate() {
        out.slice_mut(s![i * t..(i + 1) * t, ..])
            .assign(&x.slice(s![s * t..(s + 1) * t, ..]));
    }
    out
}

pub(crate) fn scatter_seqs(dst: &mut Array2<f64>, src: &Array2<f64>, t: usize, seqs: &[usize]) {
    for (i, &s) in seqs.iter().enumerate() {
        dst.slice_mut(s![s * t..(s + 1) * t, ..])
            .assign(&src.slice(s![i * t..(i + 1) * t, ..]));
    }
}

pub(crate) fn hconcat(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    ndarray::concatenate(Axis(1), &[a.view(), b.view()]).expect("matching rows")
}

pub(crate) fn vconcat(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    ndarray::concatenate(Axis(0), &[a.view(), b.view()]).expect("matching columns")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_for;
    use rand::Rng;

    fn rand_mat(seed: u64, r: usize, c: usize) -> Array2<f64> {
        let mut rng = rng_for(seed, &[]);
        Array2::from_shape_fn((r, c), |_| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn depthwise_matches_direct_sum() {
        let (n, t, c, d) = (2, 9, 3, 2);
        let x = rand_mat(1, n * t, c);
        let w = rand_mat(2, 5, c);
        let b = Array1::from(vec![0.1, -0.2, 0.3]);
        let y = depthwise_forward(&x, n, t, &w, b.view(), d);
        for s in 0..n {
            for i in 0..t {
                for ch in 0..c {
                    let mut want = b[ch];
                    for j in 0..5 {
                        let back = (4 - j) * d;
                        if i >= back {
                            want += w[[j, ch]] * x[[s * t + i - back, ch]];
                        }
                    }
                    assert!((y[[s * t + i, ch]] - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn conv_matches_direct_sum() {
        let (n, t, cin, cout, k, st) = (2, 11, 3, 4, 5, 2);
        let x = rand_mat(3, n * t, cin);
        let w = rand_mat(4, k * cin, cout);
        let b = Array1::zeros(cout);
        let (y, t_out, _) = conv_forward(&x, n, t, &w, b.view(), k, st);
        assert_eq!(t_out, 4);
        for s in 0..n {
            for o in 0..t_out {
                for co in 0..cout {
                    let mut want = 0.0;
                    for j in 0..k {
                        for ci in 0..cin {
                            want += w[[j * cin + ci, co]] * x[[s * t + o * st + j, ci]];
                        }
                    }
                    assert!((y[[s * t_out + o, co]] - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn maxpool_picks_first_peak() {
        let x = Array2::from_shape_vec((3, 2), vec![1.0, 5.0, 3.0, 5.0, 2.0, 0.0]).unwrap();
        let (p, idx) = maxpool_forward(x.view(), 1, 3);
        assert_eq!(p.row(0).to_vec(), vec![3.0, 5.0]);
        assert_eq!(idx, vec![1, 0]);
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
        assert!((sigmoid(2.0) + sigmoid(-2.0) - 1.0).abs() < 1e-15);
    }
}
