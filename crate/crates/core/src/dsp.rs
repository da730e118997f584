//! Signal-processing primitives shared by the feature extractors: windows,
//! FFT helpers, linear prediction, band-limited interpolation and IIR filters.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Hamming window. `periodic` uses the DFT-even form (denominator `n`).
pub fn hamming(n: usize, periodic: bool) -> Vec<f64> {
    cosine_window(n, periodic, 0.54, 0.46)
}

/// Hann window. `periodic` uses the DFT-even form (denominator `n`).
pub fn hann(n: usize, periodic: bool) -> Vec<f64> {
    cosine_window(n, periodic, 0.5, 0.5)
}

fn cosine_window(n: usize, periodic: bool, a0: f64, a1: f64) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    let denom = if periodic { n } else { n - 1 } as f64;
    (0..n)
        .map(|i| a0 - a1 * (2.0 * PI * i as f64 / denom).cos())
        .collect()
}

/// Zeroth-order modified Bessel function of the first kind.
pub fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Kaiser window evaluated at a normalized position `u` in `[-1, 1]`.
pub fn kaiser_at(u: f64, beta: f64) -> f64 {
    if u.abs() > 1.0 {
        return 0.0;
    }
    bessel_i0(beta * (1.0 - u * u).sqrt()) / bessel_i0(beta)
}

pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = PI * x;
        px.sin() / px
    }
}

/// Thin wrapper around a cached forward/inverse FFT pair of one size.
pub struct FftPair {
    pub len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl FftPair {
    pub fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        FftPair {
            len,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        }
    }

    /// Forward transform of a real signal, zero-padded (or truncated) to `len`.
    pub fn forward_real(&self, x: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = (0..self.len)
            .map(|i| Complex64::new(x.get(i).copied().unwrap_or(0.0), 0.0))
            .collect();
        self.forward.process(&mut buf);
        buf
    }

    pub fn forward(&self, buf: &mut [Complex64]) {
        self.forward.process(buf);
    }

    /// Unnormalized inverse transform; divide by `len` for the true inverse.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.inverse.process(buf);
    }
}

/// Biased autocorrelation `r[k] = sum_n x[n] x[n+k]` for `k = 0..=max_lag`.
pub fn autocorrelation(x: &[f64], max_lag: usize) -> Vec<f64> {
    (0..=max_lag)
        .map(|k| {
            if k >= x.len() {
                0.0
            } else {
                x[..x.len() - k]
                    .iter()
                    .zip(&x[k..])
                    .map(|(a, b)| a * b)
                    .sum()
            }
        })
        .collect()
}

/// Result of a Levinson-Durbin recursion. `a[0] == 1`; the prediction error
/// filter is `A(z) = sum_k a[k] z^-k`.
#[derive(Debug, Clone)]
pub struct Lpc {
    pub a: Vec<f64>,
    pub error: f64,
    pub stable: bool,
}

/// Levinson-Durbin recursion on autocorrelation `r[0..=order]`.
pub fn levinson_durbin(r: &[f64], order: usize) -> Lpc {
    let mut a = vec![0.0; order + 1];
    a[0] = 1.0;
    let mut err = r[0];
    let mut stable = true;
    if err <= 0.0 {
        return Lpc {
            a,
            error: 0.0,
            stable: true,
        };
    }
    for i in 1..=order {
        let mut acc = r[i];
        for j in 1..i {
            acc += a[j] * r[i - j];
        }
        let k = -acc / err;
        if k.abs() >= 1.0 {
            stable = false;
        }
        let prev = a.clone();
        for j in 1..i {
            a[j] = prev[j] + k * prev[i - j];
        }
        a[i] = k;
        err *= 1.0 - k * k;
        if err <= 0.0 {
            err = 0.0;
            break;
        }
    }
    Lpc {
        a,
        error: err,
        stable,
    }
}

/// Autocorrelation-method LPC of `frame` with a Hamming analysis window.
/// A tiny white-noise correction keeps the recursion well-posed on
/// near-silent frames.
pub fn lpc_autocorrelation(frame: &[f64], order: usize) -> Lpc {
    let w = hamming(frame.len(), false);
    let windowed: Vec<f64> = frame.iter().zip(&w).map(|(x, w)| x * w).collect();
    let mut r = autocorrelation(&windowed, order);
    r[0] *= 1.0 + 1e-9;
    levinson_durbin(&r, order)
}

/// Covariance-method LPC: minimizes `sum_{m=order}^{n-1} (x[m] + sum_k a_k x[m-k])^2`.
/// A relative ridge of `1e-9 * trace` resolves rank-deficient inputs (for
/// example a constant sequence) to the minimum-norm-like solution.
pub fn lpc_covariance(x: &[f64], order: usize) -> Vec<f64> {
    let n = x.len();
    let mut a = vec![0.0; order + 1];
    a[0] = 1.0;
    if n <= order {
        return a;
    }
    let mut phi = nalgebra::DMatrix::<f64>::zeros(order, order);
    let mut psi = nalgebra::DVector::<f64>::zeros(order);
    for m in order..n {
        for i in 1..=order {
            psi[i - 1] += x[m] * x[m - i];
            for j in 1..=order {
                phi[(i - 1, j - 1)] += x[m - i] * x[m - j];
            }
        }
    }
    let ridge = 1e-9 * phi.trace().max(f64::MIN_POSITIVE);
    for i in 0..order {
        phi[(i, i)] += ridge;
    }
    if let Some(sol) = phi.cholesky().map(|c| c.solve(&(-psi))) {
        for i in 0..order {
            a[i + 1] = sol[i];
        }
    }
    a
}

/// Applies an FIR prediction-error filter `a` to `x`, using samples before
/// `start` as history. Returns `e[n]` for `n in start..end`.
pub fn inverse_filter(x: &[f64], a: &[f64], start: usize, end: usize) -> Vec<f64> {
    (start..end)
        .map(|n| {
            a.iter()
                .enumerate()
                .filter(|(k, _)| *k <= n)
                .map(|(k, ak)| ak * x[n - k])
                .sum()
        })
        .collect()
}

/// Magnitude response of the all-pole model `1/A(z)` (without gain) at
/// frequency `f` for sampling rate `fs`.
pub fn allpole_magnitude(a: &[f64], f: f64, fs: f64) -> f64 {
    let w = 2.0 * PI * f / fs;
    let mut acc = Complex64::new(0.0, 0.0);
    for (k, ak) in a.iter().enumerate() {
        acc += Complex64::from_polar(*ak, -w * k as f64);
    }
    1.0 / acc.norm().max(1e-300)
}

/// Kaiser-windowed sinc interpolator for fractional sample positions.
#[derive(Debug, Clone, Copy)]
pub struct SincInterpolator {
    /// Zero crossings on each side of the kernel centre.
    pub zero_crossings: usize,
    pub beta: f64,
}

impl Default for SincInterpolator {
    fn default() -> Self {
        SincInterpolator {
            zero_crossings: 32,
            beta: 9.0,
        }
    }
}

impl SincInterpolator {
    /// Kernel half-width in input samples for a given cutoff (fraction of
    /// the input Nyquist rate, `0 < cutoff <= 1`).
    pub fn half_width(&self, cutoff: f64) -> f64 {
        self.zero_crossings as f64 / cutoff
    }

    /// Interpolated value of `x` at fractional index `t`. Samples outside the
    /// buffer are treated as zero.
    pub fn at(&self, x: &[f64], t: f64, cutoff: f64) -> f64 {
        let hw = self.half_width(cutoff);
        let lo = (t - hw).ceil().max(0.0) as usize;
        let hi = ((t + hw).floor() as isize).min(x.len() as isize - 1);
        if hi < lo as isize {
            return 0.0;
        }
        let mut acc = 0.0;
        for (k, xk) in x.iter().enumerate().take(hi as usize + 1).skip(lo) {
            let d = t - k as f64;
            acc += xk * cutoff * sinc(cutoff * d) * kaiser_at(d / hw, self.beta);
        }
        acc
    }
}

/// Cascaded second-order sections, each `[b0, b1, b2, a0, a1, a2]` with `a0 = 1`.
#[derive(Debug, Clone)]
pub struct Sos {
    pub sections: Vec<[f64; 6]>,
}

impl Sos {
    /// Digital Butterworth band-pass of prototype order `order` (the band-pass
    /// filter itself has order `2 * order`) via the bilinear transform with
    /// prewarping.
    pub fn butter_bandpass(order: usize, low_hz: f64, high_hz: f64, fs: f64) -> Sos {
        assert!(order >= 1 && low_hz > 0.0 && high_hz > low_hz && high_hz < fs / 2.0);
        let fs2 = 2.0 * fs;
        let w1 = fs2 * (PI * low_hz / fs).tan();
        let w2 = fs2 * (PI * high_hz / fs).tan();
        let bw = w2 - w1;
        let w0sq = w1 * w2;

        // analog low-pass prototype poles
        let proto: Vec<Complex64> = (0..order)
            .map(|k| {
                let theta = PI * (2 * k + order + 1) as f64 / (2 * order) as f64;
                Complex64::from_polar(1.0, theta)
            })
            .collect();

        // low-pass to band-pass: s^2 - p*bw*s + w0^2 = 0
        let mut analog_poles = Vec::with_capacity(2 * order);
        for p in &proto {
            let pb = p * bw;
            let disc = (pb * pb - 4.0 * w0sq).sqrt();
            analog_poles.push((pb + disc) / 2.0);
            analog_poles.push((pb - disc) / 2.0);
        }
        let analog_gain = bw.powi(order as i32);

        // bilinear transform; `order` zeros at s=0 map to z=1, the remaining
        // `order` zeros at infinity map to z=-1
        let digital_poles: Vec<Complex64> =
            analog_poles.iter().map(|p| (fs2 + p) / (fs2 - p)).collect();
        let num: Complex64 = Complex64::new(fs2, 0.0).powi(order as i32);
        let den: Complex64 = analog_poles
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, p| acc * (fs2 - p));
        let gain = analog_gain * (num / den).re;

        // pair poles into sections: complex poles with their conjugates,
        // real poles two by two
        let mut complex: Vec<Complex64> = digital_poles
            .iter()
            .copied()
            .filter(|p| p.im > 1e-12)
            .collect();
        complex.sort_by(|a, b| a.arg().partial_cmp(&b.arg()).unwrap());
        let mut real: Vec<f64> = digital_poles
            .iter()
            .filter(|p| p.im.abs() <= 1e-12)
            .map(|p| p.re)
            .collect();
        real.sort_by(|a, b| a.partial_cmp(b).unwrap());

        let mut sections = Vec::with_capacity(order);
        for p in complex {
            sections.push([1.0, 0.0, -1.0, 1.0, -2.0 * p.re, p.norm_sqr()]);
        }
        for pair in real.chunks(2) {
            let (p1, p2) = (pair[0], *pair.get(1).unwrap_or(&0.0));
            sections.push([1.0, 0.0, -1.0, 1.0, -(p1 + p2), p1 * p2]);
        }
        if let Some(first) = sections.first_mut() {
            first[0] *= gain;
            first[1] *= gain;
            first[2] *= gain;
        }
        Sos { sections }
    }

    /// Complex frequency response at `f` Hz.
    pub fn response(&self, f: f64, fs: f64) -> Complex64 {
        let z1 = Complex64::from_polar(1.0, -2.0 * PI * f / fs);
        let z2 = z1 * z1;
        self.sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| {
                acc * (s[0] + s[1] * z1 + s[2] * z2) / (s[3] + s[4] * z1 + s[5] * z2)
            })
    }

    /// Causal filtering, zero initial state (direct form II transposed).
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        for s in &self.sections {
            let (mut z1, mut z2) = (0.0, 0.0);
            for v in y.iter_mut() {
                let input = *v;
                let out = s[0] * input + z1;
                z1 = s[1] * input - s[4] * out + z2;
                z2 = s[2] * input - s[5] * out;
                *v = out;
            }
        }
        y
    }

    /// Zero-phase forward-backward filtering with odd-symmetric edge extension.
    pub fn filtfilt(&self, x: &[f64], padlen: usize) -> Vec<f64> {
        let n = x.len();
        if n == 0 {
            return Vec::new();
        }
        let pad = padlen.min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        for i in (1..=pad).rev() {
            ext.push(2.0 * x[0] - x[i]);
        }
        ext.extend_from_slice(x);
        for i in 1..=pad {
            ext.push(2.0 * x[n - 1] - x[n - 1 - i]);
        }
        let mut y = self.filter(&ext);
        y.reverse();
        let mut y = self.filter(&y);
        y.reverse();
        y[pad..pad + n].to_vec()
    }
}

/// Number of samples at each edge of `lowpass_zero_phase` output that
/// depend on the zero padding.
pub fn lowpass_half_len(cutoff: f64, fs: f64) -> usize {
    (8.0 / (2.0 * cutoff / fs)).ceil() as usize
}

/// Zero-phase windowed-sinc low-pass filter (Hann window, 8 zero crossings
/// per side). Samples beyond the edges are treated as zero.
pub fn lowpass_zero_phase(x: &[f64], cutoff: f64, fs: f64) -> Vec<f64> {
    let fc = cutoff / fs;
    let half = lowpass_half_len(cutoff, fs);
    let w = hann(2 * half + 1, false);
    let taps: Vec<f64> = (0..=2 * half)
        .map(|k| 2.0 * fc * sinc(2.0 * fc * (k as f64 - half as f64)) * w[k])
        .collect();
    let gain: f64 = taps.iter().sum();
    let n = x.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n - 1);
            let mut acc = 0.0;
            for j in lo..=hi {
                acc += x[j] * taps[j + half - i];
            }
            acc / gain
        })
        .collect()
}

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

/// Population standard deviation (divides by `n`).
pub fn std_population(x: &[f64]) -> f64 {
    let m = mean(x);
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64).sqrt()
}

/// Sample standard deviation (divides by `n - 1`); zero for fewer than two values.
pub fn std_sample(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64).sqrt()
}

/// Refines a discrete peak at `i` with a parabola through its neighbours.
/// Returns `(offset, value)` with `offset` in `[-0.5, 0.5]`.
pub fn parabolic_peak(y_prev: f64, y: f64, y_next: f64) -> (f64, f64) {
    let denom = y_prev - 2.0 * y + y_next;
    if denom.abs() < 1e-300 || denom >= 0.0 {
        return (0.0, y);
    }
    let offset = (0.5 * (y_prev - y_next) / denom).clamp(-0.5, 0.5);
    (offset, y - 0.25 * (y_prev - y_next) * offset)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn levinson_recovers_ar2() {
        // AR(2): x[n] = 1.3 x[n-1] - 0.6 x[n-2] + e[n]; exact autocorrelation
        // from the Yule-Walker equations
        let (a1, a2) = (-1.3, 0.6);
        let rho1 = -a1 / (1.0 + a2);
        let rho2 = -a1 * rho1 - a2;
        let r = [1.0, rho1, rho2];
        let lpc = levinson_durbin(&r, 2);
        assert!((lpc.a[1] - a1).abs() < 1e-12);
        assert!((lpc.a[2] - a2).abs() < 1e-12);
        assert!(lpc.stable);
    }

    #[test]
    fn covariance_lpc_predicts_sinusoid_exactly() {
        // a sampled sinusoid obeys x[m] = 2cos(w) x[m-1] - x[m-2]
        let w = 0.3;
        let x: Vec<f64> = (0..200).map(|n| (w * n as f64 + 0.4).sin()).collect();
        let a = lpc_covariance(&x, 2);
        assert!((a[1] + 2.0 * w.cos()).abs() < 1e-6);
        assert!((a[2] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn butterworth_bandpass_response() {
        let fs = 200.0;
        let sos = Sos::butter_bandpass(3, 9.0, 14.0, fs);
        assert_eq!(sos.sections.len(), 3);
        let centre = (9.0f64 * 14.0).sqrt();
        // digital centre is the prewarped geometric mean; close to it
        assert!((sos.response(centre, fs).norm() - 1.0).abs() < 0.02);
        // -3 dB at the band edges
        for edge in [9.0, 14.0] {
            let g = sos.response(edge, fs).norm();
            assert!((g - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9, "{g}");
        }
        assert!(sos.response(0.0, fs).norm() < 1e-12);
        assert!(sos.response(5.0, fs).norm() < 0.1);
    }

    #[test]
    fn filtfilt_is_zero_phase() {
        let fs = 200.0;
        let sos = Sos::butter_bandpass(3, 9.0, 14.0, fs);
        let x: Vec<f64> = (0..2000)
            .map(|n| (2.0 * PI * 11.5 * n as f64 / fs).sin())
            .collect();
        let y = sos.filtfilt(&x, 200);
        // away from the edges the output tracks the input in phase
        let mid = &y[600..1400];
        let xm = &x[600..1400];
        let dot: f64 = mid.iter().zip(xm).map(|(a, b)| a * b).sum();
        let na: f64 = mid.iter().map(|a| a * a).sum::<f64>().sqrt();
        let nb: f64 = xm.iter().map(|a| a * a).sum::<f64>().sqrt();
        assert!(dot / (na * nb) > 0.999);
    }

    #[test]
    fn sinc_interpolation_reconstructs_bandlimited_signal() {
        let x: Vec<f64> = (0..400).map(|n| (0.2 * n as f64).sin()).collect();
        let interp = SincInterpolator::default();
        for t in [150.25, 200.5, 210.75] {
            let v = interp.at(&x, t, 1.0);
            assert!((v - (0.2 * t).sin()).abs() < 1e-4, "{t}: {v}");
        }
    }

    #[test]
    fn windows_have_expected_endpoints() {
        let h = hamming(5, false);
        assert!((h[0] - 0.08).abs() < 1e-12 && (h[2] - 1.0).abs() < 1e-12);
        let p = hann(4, true);
        assert!((p[0]).abs() < 1e-12 && (p[2] - 1.0).abs() < 1e-12);
    }
}
