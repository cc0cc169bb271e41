use num_complex::Complex64;
use rustfft::FftPlanner;

use super::AudioBuffer;

/// Kernels at most this long use the direct form.
const DIRECT_MAX_TAPS: usize = 64;

/// Full linear convolution, length `signal.len() + kernel.len() - 1`.
pub fn fir_convolve_full(signal: &[f64], kernel: &[f64]) -> Vec<f64> {
    if kernel.len() <= DIRECT_MAX_TAPS || signal.len() <= DIRECT_MAX_TAPS {
        fir_convolve_direct(signal, kernel)
    } else {
        fir_convolve_fft(signal, kernel)
    }
}

pub fn fir_convolve_direct(signal: &[f64], kernel: &[f64]) -> Vec<f64> {
    if signal.is_empty() || kernel.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; signal.len() + kernel.len() - 1];
    for (i, &x) in signal.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (o, &h) in out[i..].iter_mut().zip(kernel) {
            *o += x * h;
        }
    }
    out
}

pub fn fir_convolve_fft(signal: &[f64], kernel: &[f64]) -> Vec<f64> {
    if signal.is_empty() || kernel.is_empty() {
        return Vec::new();
    }
    let out_len = signal.len() + kernel.len() - 1;
    let n = out_len.next_power_of_two();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let to_buf = |v: &[f64]| {
        let mut b: Vec<Complex64> = v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        b.resize(n, Complex64::new(0.0, 0.0));
        b
    };
    let mut a = to_buf(signal);
    let mut b = to_buf(kernel);
    fwd.process(&mut a);
    fwd.process(&mut b);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= y;
    }
    inv.process(&mut a);
    let scale = 1.0 / n as f64;
    a[..out_len].iter().map(|c| c.re * scale).collect()
}

/// Convolution truncated to the signal length, as used for mixing.
pub fn fir_convolve(signal: &AudioBuffer, kernel: &[f64]) -> AudioBuffer {
    assert!(!kernel.is_empty(), "FIR kernel must be nonempty");
    let mut full = fir_convolve_full(signal.samples(), kernel);
    full.truncate(signal.len());
    AudioBuffer::new(full).expect("convolution of finite inputs is finite")
}
