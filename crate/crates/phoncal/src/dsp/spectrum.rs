//! FFT plumbing for cyclic (periodic steady-state) filtering.
//!
//! Level metrology treats a track as one period of a periodic waveform:
//! filters are applied by multiplying the track's DFT with the filter's
//! frequency response and transforming back. This yields the exact
//! steady-state response — no startup transient, and measured levels are
//! exactly invariant to circular time shifts of the input.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

/// Filters `x` cyclically. `response` receives each bin's index and digital
/// radian frequency ω_k = 2πk/N (0 ≤ ω_k < 2π, covering negative
/// frequencies in the upper half) and returns the filter's complex response
/// there. For real-coefficient filters the output is real up to rounding;
/// the imaginary residue is discarded.
pub(crate) fn cyclic_filter<F>(x: &[f64], response: F) -> Vec<f64>
where
    F: Fn(usize, f64) -> Complex64,
{
    let n = x.len();
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    let step = std::f64::consts::TAU / n as f64;
    for (k, bin) in buf.iter_mut().enumerate() {
        *bin *= response(k, k as f64 * step);
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    buf.iter().map(|c| c.re * scale).collect()
}

/// Per-bin complex response of an FIR under cyclic convolution at period
/// `n`: taps are wrapped modulo `n` (exact for periodic inputs, whatever
/// the relative lengths) and transformed.
pub(crate) fn fir_bin_responses(taps: &[f64], n: usize) -> Vec<Complex64> {
    let mut wrapped = vec![Complex64::new(0.0, 0.0); n];
    for (i, &t) in taps.iter().enumerate() {
        wrapped[i % n].re += t;
    }
    FftPlanner::new().plan_fft_forward(n).process(&mut wrapped);
    wrapped
}
