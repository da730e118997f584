//! Features of the F0 contour: pitch range, pitch period entropy and the
//! vibrato index in the flutter band.

use serde::{Deserialize, Serialize};

use crate::dsp::{hann, lpc_covariance, mean, FftPair, Sos};
use crate::error::{Error, Result};
use crate::pitch::F0Contour;

pub const PPE_BINS: usize = 31;
pub const PPE_RANGE: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourFeatures {
    pub pfr: f64,
    pub ppe: f64,
    pub pvi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourConfig {
    pub min_duration_s: f64,
    pub whitening_order: usize,
    pub vibrato_low: f64,
    pub vibrato_high: f64,
    pub filter_order: usize,
    pub welch_window_s: f64,
    pub welch_overlap: f64,
}

impl Default for ContourConfig {
    fn default() -> Self {
        ContourConfig {
            min_duration_s: 2.0,
            whitening_order: 2,
            vibrato_low: 9.0,
            vibrato_high: 14.0,
            filter_order: 3,
            welch_window_s: 1.0,
            welch_overlap: 0.95,
        }
    }
}

/// Pitch range in semitones over voiced frames.
pub fn pfr(contour: &F0Contour) -> Result<f64> {
    let v = contour.voiced_values();
    if v.is_empty() {
        return Err(Error::NoVoicedFrames);
    }
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(12.0 * (hi / lo).log2())
}

fn require_duration(contour: &F0Contour, cfg: &ContourConfig) -> Result<Vec<f64>> {
    let required = (cfg.min_duration_s / contour.step).round() as usize;
    let voiced = contour.voiced_count();
    if voiced < required {
        return Err(Error::TooShort {
            what: "voiced contour (frames)",
            required,
            actual: voiced,
        });
    }
    Ok(contour.bridged())
}

/// Shannon entropy (bits) of the histogram of `residuals` over
/// [`PPE_BINS`] equal bins on `[-PPE_RANGE, PPE_RANGE]`, out-of-range values
/// counted in the end bins.
pub fn residual_entropy(residuals: &[f64]) -> f64 {
    let mut counts = [0usize; PPE_BINS];
    let width = 2.0 * PPE_RANGE / PPE_BINS as f64;
    for r in residuals {
        let idx = ((r + PPE_RANGE) / width).floor();
        let idx = idx.clamp(0.0, (PPE_BINS - 1) as f64) as usize;
        counts[idx] += 1;
    }
    let n = residuals.len() as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// Pitch period entropy in bits.
pub fn ppe(contour: &F0Contour) -> Result<f64> {
    ppe_with(contour, &ContourConfig::default())
}

pub fn ppe_with(contour: &F0Contour, cfg: &ContourConfig) -> Result<f64> {
    let f0 = require_duration(contour, cfg)?;
    let f_low = contour.mean_f0() / std::f64::consts::SQRT_2;
    let p: Vec<f64> = f0.iter().map(|f| 12.0 * (f / f_low).log2()).collect();
    let order = cfg.whitening_order;
    let a = lpc_covariance(&p, order);
    let residuals: Vec<f64> = (order..p.len())
        .map(|m| (0..=order).map(|k| a[k] * p[m - k]).sum())
        .collect();
    Ok(residual_entropy(&residuals))
}

/// Welch amplitude spectrum: periodic Hann segments with per-segment mean
/// removal, `|X| * 2 / sum(w)` averaged over segments. Returns one value per
/// bin from 0 Hz up to Nyquist.
pub fn welch_amplitude(x: &[f64], seg_len: usize, hop: usize) -> Vec<f64> {
    let w = hann(seg_len, true);
    let wsum: f64 = w.iter().sum();
    let fft = FftPair::new(seg_len);
    let mut acc = vec![0.0; seg_len / 2 + 1];
    let mut segments = 0;
    let mut start = 0;
    while start + seg_len <= x.len() {
        let seg = &x[start..start + seg_len];
        let m = mean(seg);
        let windowed: Vec<f64> = seg.iter().zip(&w).map(|(v, w)| (v - m) * w).collect();
        let spec = fft.forward_real(&windowed);
        for (a, s) in acc.iter_mut().zip(&spec) {
            *a += s.norm() * 2.0 / wsum;
        }
        segments += 1;
        start += hop;
    }
    if segments > 0 {
        acc.iter_mut().for_each(|a| *a /= segments as f64);
    }
    acc
}

/// Vibrato index: summed Welch amplitude of the normalized, band-passed
/// contour over the vibrato band.
pub fn pvi(contour: &F0Contour) -> Result<f64> {
    pvi_with(contour, &ContourConfig::default())
}

pub fn pvi_with(contour: &F0Contour, cfg: &ContourConfig) -> Result<f64> {
    let f0 = require_duration(contour, cfg)?;
    let rate = 1.0 / contour.step;
    let mu = mean(&f0);
    let normalized: Vec<f64> = f0.iter().map(|f| f / mu - 1.0).collect();
    let sos = Sos::butter_bandpass(cfg.filter_order, cfg.vibrato_low, cfg.vibrato_high, rate);
    let filtered = sos.filtfilt(&normalized, 200);
    let seg_len = (cfg.welch_window_s * rate).round() as usize;
    let hop = ((1.0 - cfg.welch_overlap) * seg_len as f64)
        .round()
        .max(1.0) as usize;
    if filtered.len() < seg_len {
        return Err(Error::TooShort {
            what: "bridged contour (frames)",
            required: seg_len,
            actual: filtered.len(),
        });
    }
    let amp = welch_amplitude(&filtered, seg_len, hop);
    let df = rate / seg_len as f64;
    Ok(amp
        .iter()
        .enumerate()
        .filter(|(k, _)| {
            let f = *k as f64 * df;
            f >= cfg.vibrato_low - 1e-9 && f <= cfg.vibrato_high + 1e-9
        })
        .map(|(_, a)| a)
        .sum())
}

pub fn contour_features(contour: &F0Contour) -> Result<ContourFeatures> {
    Ok(ContourFeatures {
        pfr: pfr(contour)?,
        ppe: ppe(contour)?,
        pvi: pvi(contour)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn contour_of(f: impl Fn(f64) -> f64, seconds: f64) -> F0Contour {
        let n = (seconds / 0.005).round() as usize;
        F0Contour::from_values((0..n).map(|m| f(m as f64 * 0.005)).collect(), 0.02, 0.005)
    }

    #[test]
    fn pfr_examples() {
        assert_eq!(pfr(&contour_of(|_| 150.0, 1.0)).unwrap(), 0.0);
        let c = F0Contour::from_values(vec![100.0, 140.0, 200.0, f64::NAN], 0.0, 0.005);
        assert!((pfr(&c).unwrap() - 12.0).abs() < 1e-12);
        let c = F0Contour::from_values(vec![150.0, 100.0, 120.0], 0.0, 0.005);
        assert!((pfr(&c).unwrap() - 7.019_550_008_653_874).abs() < 1e-9);
        let empty = F0Contour::from_values(vec![f64::NAN; 3], 0.0, 0.005);
        assert!(pfr(&empty).is_err());
    }

    #[test]
    fn ppe_limits() {
        assert_eq!(ppe(&contour_of(|_| 150.0, 3.0)).unwrap(), 0.0);
        let width = 3.0 / 31.0;
        let uniform: Vec<f64> = (0..31 * 20)
            .map(|i| -1.5 + width * ((i % 31) as f64 + 0.5))
            .collect();
        assert!((residual_entropy(&uniform) - 31f64.log2()).abs() < 1e-12);
        let outliers = [-9.0, 9.0, -1.5, 1.5];
        assert!((residual_entropy(&outliers) - 1.0).abs() < 1e-12);
        assert!(matches!(
            ppe(&contour_of(|_| 150.0, 1.5)),
            Err(Error::TooShort { .. })
        ));
    }

    #[test]
    fn ppe_grows_with_irregularity() {
        let noise = crate::synth::gaussian(600, 1.0, 4);
        let smooth = contour_of(|t| 150.0 + 3.0 * (2.0 * PI * 5.0 * t).sin(), 3.0);
        let rough = F0Contour::from_values(
            noise.iter().map(|z| 150.0 * (1.0 + 0.03 * z)).collect(),
            0.02,
            0.005,
        );
        assert!(ppe(&rough).unwrap() > ppe(&smooth).unwrap() + 1.0);
    }

    #[test]
    fn pvi_constant_is_zero() {
        assert!(pvi(&contour_of(|_| 150.0, 3.0)).unwrap() < 1e-9);
    }

    #[test]
    fn pvi_prefers_flutter_band() {
        let fm = |rate: f64| {
            contour_of(
                move |t| 150.0 * (1.0 + 0.02 * (2.0 * PI * rate * t).sin()),
                3.0,
            )
        };
        let p11 = pvi(&fm(11.0)).unwrap();
        let p5 = pvi(&fm(5.0)).unwrap();
        assert!(p11 >= 5.0 * p5, "{p11} vs {p5}");
        // the band sum roughly recovers the modulation depth
        assert!(p11 > 0.01 && p11 < 0.05, "{p11}");
    }

    #[test]
    fn welch_recovers_sine_amplitude() {
        let x: Vec<f64> = (0..1000)
            .map(|n| 0.3 * (2.0 * PI * 10.0 * n as f64 / 200.0).sin())
            .collect();
        let a = welch_amplitude(&x, 200, 10);
        assert!((a[10] - 0.3).abs() < 1e-9, "{}", a[10]);
    }

    #[test]
    fn gaps_are_bridged() {
        let mut v: Vec<f64> = (0..600)
            .map(|m| 150.0 + 2.0 * (2.0 * PI * 11.0 * m as f64 * 0.005).sin())
            .collect();
        for g in v.iter_mut().skip(300).take(5) {
            *g = f64::NAN;
        }
        let c = F0Contour::from_values(v, 0.02, 0.005);
        assert!(pvi(&c).unwrap().is_finite());
        assert!(ppe(&c).unwrap().is_finite());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn pvi_is_pitch_scale_invariant(c in 0.3f64..4.0, rate in 3.0f64..20.0, depth in 0.001f64..0.05) {
            let base = contour_of(|t| 120.0 * (1.0 + depth * (2.0 * PI * rate * t).sin()), 2.5);
            let scaled = F0Contour::from_values(base.values.iter().map(|f| f * c).collect(), 0.02, 0.005);
            let (a, b) = (pvi(&base).unwrap(), pvi(&scaled).unwrap());
            prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
        }

        #[test]
        fn ppe_is_bounded(seed in 0u64..1000, spread in 0.0f64..0.2) {
            let z = crate::synth::gaussian(450, 1.0, seed);
            let c = F0Contour::from_values(z.iter().map(|v| 150.0 * (1.0 + spread * v).max(0.2)).collect(), 0.0, 0.005);
            let p = ppe(&c).unwrap();
            prop_assert!((0.0..=31f64.log2() + 1e-12).contains(&p));
        }

        #[test]
        fn pfr_ignores_order(mut v in prop::collection::vec(60.0f64..450.0, 2..50)) {
            let a = pfr(&F0Contour::from_values(v.clone(), 0.0, 0.005)).unwrap();
            v.reverse();
            v.rotate_left(1);
            let b = pfr(&F0Contour::from_values(v, 0.0, 0.005)).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
