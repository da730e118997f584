//! Harmonics-to-noise ratio and glottal-to-noise excitation ratio.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dataset::{resample_samples, VoiceRecording};
use crate::dsp::{
    inverse_filter, lpc_autocorrelation, mean, parabolic_peak, std_population, FftPair,
};
use crate::error::{Error, Result};
use crate::pitch::F0Contour;

pub const HNR_MIN_DB: f64 = -20.0;
pub const HNR_MAX_DB: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseFeatures {
    pub hnr: f64,
    pub gne_mean: f64,
    pub gne_sd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HnrConfig {
    pub window_s: f64,
    pub hop_s: f64,
    pub f_min: f64,
    pub f_max: f64,
    /// Relative half-width of the lag search around the contour period.
    pub lag_tolerance: f64,
}

impl Default for HnrConfig {
    fn default() -> Self {
        HnrConfig {
            window_s: 0.040,
            hop_s: 0.010,
            f_min: 60.0,
            f_max: 450.0,
            lag_tolerance: 0.2,
        }
    }
}

fn periodicity_to_db(r: f64) -> f64 {
    if r <= 0.0 {
        return HNR_MIN_DB;
    }
    if r >= 1.0 {
        return HNR_MAX_DB;
    }
    (10.0 * (r / (1.0 - r)).log10()).clamp(HNR_MIN_DB, HNR_MAX_DB)
}

/// Normalized autocorrelation of a frame at integer lag `tau`.
fn frame_nccf(x: &[f64], tau: usize) -> f64 {
    let n = x.len();
    if tau >= n {
        return 0.0;
    }
    let (mut uv, mut uu, mut vv) = (0.0, 0.0, 0.0);
    for i in 0..n - tau {
        let (u, v) = (x[i], x[i + tau]);
        uv += u * v;
        uu += u * u;
        vv += v * v;
    }
    let d = (uu * vv).sqrt();
    if d <= 1e-30 {
        0.0
    } else {
        uv / d
    }
}

/// Frame-averaged HNR over voiced frames, in dB.
pub fn hnr(rec: &VoiceRecording, contour: &F0Contour) -> Result<f64> {
    hnr_with(rec, contour, &HnrConfig::default())
}

pub fn hnr_with(rec: &VoiceRecording, contour: &F0Contour, cfg: &HnrConfig) -> Result<f64> {
    let fs = rec.sample_rate;
    let x = &rec.samples;
    let win = (cfg.window_s * fs).round() as usize;
    let hop = (cfg.hop_s * fs).round() as usize;
    let lag_lo = (fs / cfg.f_max).floor().max(1.0) as usize;
    let lag_hi = (fs / cfg.f_min).ceil() as usize;
    if x.len() < win || hop == 0 {
        return Err(Error::NoVoicedFrames);
    }
    let mut values = Vec::new();
    let mut frame = vec![0.0; win];
    let mut start = 0;
    while start + win <= x.len() {
        let centre = (start as f64 + win as f64 / 2.0) / fs;
        let voiced = contour.frame_at(centre).is_some_and(|m| contour.voiced[m]);
        if let (true, Some(f0)) = (voiced, contour.f0_at(centre)) {
            frame.copy_from_slice(&x[start..start + win]);
            let dc = mean(&frame);
            frame.iter_mut().for_each(|v| *v -= dc);
            let t = fs / f0;
            let lo = ((t * (1.0 - cfg.lag_tolerance)).floor() as usize)
                .max(lag_lo)
                .max(1);
            let hi = ((t * (1.0 + cfg.lag_tolerance)).ceil() as usize)
                .min(lag_hi)
                .min(win - 2);
            if lo + 1 < hi {
                let r: Vec<f64> = (lo - 1..=hi + 1)
                    .map(|tau| frame_nccf(&frame, tau))
                    .collect();
                let mut best = f64::NEG_INFINITY;
                for k in 1..r.len() - 1 {
                    if r[k] >= r[k - 1] && r[k] >= r[k + 1] {
                        best = best.max(parabolic_peak(r[k - 1], r[k], r[k + 1]).1);
                    }
                }
                if !best.is_finite() {
                    best = r[1..r.len() - 1]
                        .iter()
                        .cloned()
                        .fold(f64::NEG_INFINITY, f64::max);
                }
                values.push(periodicity_to_db(best));
            }
        }
        start += hop;
    }
    if values.is_empty() {
        return Err(Error::NoVoicedFrames);
    }
    Ok(mean(&values).clamp(HNR_MIN_DB, HNR_MAX_DB))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GneConfig {
    pub analysis_rate: f64,
    pub window_s: f64,
    pub hop_s: f64,
    pub lpc_order: usize,
    pub band_centres: Vec<f64>,
    pub bandwidth: f64,
    /// Minimum centre-frequency separation for a band pair to count.
    pub min_separation: f64,
    pub max_lag_s: f64,
}

impl Default for GneConfig {
    fn default() -> Self {
        GneConfig {
            analysis_rate: 8000.0,
            window_s: 0.030,
            hop_s: 0.010,
            lpc_order: 10,
            band_centres: vec![500.0, 1500.0, 2500.0],
            bandwidth: 1000.0,
            min_separation: 500.0,
            max_lag_s: 0.0003,
        }
    }
}

/// Hilbert envelope of `x` restricted to one band: FFT, keep positive
/// frequencies under a Hann-shaped band mask, inverse FFT, magnitude.
fn band_envelope(
    spectrum: &[Complex64],
    fft: &FftPair,
    centre: f64,
    bandwidth: f64,
    fs: f64,
    len: usize,
) -> Vec<f64> {
    let n = fft.len;
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for (k, v) in spectrum.iter().enumerate().take(n / 2 + 1) {
        let f = k as f64 * fs / n as f64;
        let d = (f - centre) / bandwidth;
        if d.abs() < 0.5 {
            let w = 0.5 + 0.5 * (2.0 * std::f64::consts::PI * d).cos();
            buf[k] = *v * (2.0 * w);
        }
    }
    fft.inverse(&mut buf);
    buf[..len].iter().map(|c| c.norm() / n as f64).collect()
}

/// Maximum Pearson correlation between two envelopes over lags `-max_lag..=max_lag`.
fn max_lagged_correlation(a: &[f64], b: &[f64], max_lag: usize) -> f64 {
    let n = a.len();
    let mut best = f64::NEG_INFINITY;
    for lag in -(max_lag as isize)..=(max_lag as isize) {
        let (sa, sb) = if lag >= 0 {
            (0usize, lag as usize)
        } else {
            ((-lag) as usize, 0usize)
        };
        let len = n - lag.unsigned_abs();
        let (u, v) = (&a[sa..sa + len], &b[sb..sb + len]);
        let (mu, mv) = (mean(u), mean(v));
        let (mut uv, mut uu, mut vv) = (0.0, 0.0, 0.0);
        for (p, q) in u.iter().zip(v) {
            let (p, q) = (p - mu, q - mv);
            uv += p * q;
            uu += p * p;
            vv += q * q;
        }
        let d = (uu * vv).sqrt();
        let r = if d <= 1e-300 { 0.0 } else { uv / d };
        best = best.max(r);
    }
    best
}

/// Per-frame GNE values.
pub fn gne_frames(rec: &VoiceRecording, cfg: &GneConfig) -> Result<Vec<f64>> {
    if rec.duration() < 0.5 {
        return Err(Error::TooShort {
            what: "recording for GNE (samples)",
            required: (0.5 * rec.sample_rate).ceil() as usize,
            actual: rec.samples.len(),
        });
    }
    let fs = cfg.analysis_rate;
    let x = if (rec.sample_rate - fs).abs() < 1e-9 {
        rec.samples.clone()
    } else {
        resample_samples(&rec.samples, rec.sample_rate, fs)
    };
    let win = (cfg.window_s * fs).round() as usize;
    let hop = (cfg.hop_s * fs).round() as usize;
    let max_lag = (cfg.max_lag_s * fs).round() as usize;
    let fft = FftPair::new((2 * win).next_power_of_two());
    let mut pairs = Vec::new();
    for i in 0..cfg.band_centres.len() {
        for j in i + 1..cfg.band_centres.len() {
            if (cfg.band_centres[i] - cfg.band_centres[j]).abs() >= cfg.min_separation {
                pairs.push((i, j));
            }
        }
    }
    let mut out = Vec::new();
    let mut start = 0;
    while start + win <= x.len() {
        let frame = &x[start..start + win];
        let lpc = lpc_autocorrelation(frame, cfg.lpc_order);
        let residual = inverse_filter(&x, &lpc.a, start, start + win);
        let spectrum = fft.forward_real(&residual);
        let envs: Vec<Vec<f64>> = cfg
            .band_centres
            .iter()
            .map(|&c| band_envelope(&spectrum, &fft, c, cfg.bandwidth, fs, win))
            .collect();
        let g = pairs
            .iter()
            .map(|&(i, j)| max_lagged_correlation(&envs[i], &envs[j], max_lag))
            .fold(f64::NEG_INFINITY, f64::max);
        out.push(if g.is_finite() {
            g.clamp(0.0, 1.0)
        } else {
            0.0
        });
        start += hop;
    }
    if out.is_empty() {
        return Err(Error::TooShort {
            what: "recording for GNE (samples)",
            required: win,
            actual: x.len(),
        });
    }
    Ok(out)
}

/// Mean and population SD of the frame GNE values.
pub fn gne(rec: &VoiceRecording) -> Result<(f64, f64)> {
    gne_with(rec, &GneConfig::default())
}

pub fn gne_with(rec: &VoiceRecording, cfg: &GneConfig) -> Result<(f64, f64)> {
    let frames = gne_frames(rec, cfg)?;
    Ok((mean(&frames), std_population(&frames)))
}

pub fn noise_features(rec: &VoiceRecording, contour: &F0Contour) -> Result<NoiseFeatures> {
    let hnr = hnr(rec, contour)?;
    let (gne_mean, gne_sd) = gne(rec)?;
    Ok(NoiseFeatures {
        hnr,
        gne_mean,
        gne_sd,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pitch::track_f0;
    use crate::synth;

    fn periodic(f0: f64, dur: f64, fs: f64) -> VoiceRecording {
        synth::periodic_from_harmonics(f0, &[1.0, 0.5, 0.3, 0.2], dur, fs)
    }

    fn flat_contour(f0: f64, frames: usize) -> F0Contour {
        F0Contour::from_values(vec![f0; frames], 0.02, 0.005)
    }

    #[test]
    fn pure_tone_hnr_is_clamped_high() {
        let rec = synth::periodic_from_harmonics(150.0, &[1.0], 2.0, 44100.0);
        let c = track_f0(&rec).unwrap();
        assert_eq!(hnr(&rec, &c).unwrap(), HNR_MAX_DB);
    }

    #[test]
    fn equal_power_mix_is_near_zero_db() {
        let fs = 44100.0;
        let p = periodic(150.0, 2.0, fs);
        let power = p.samples.iter().map(|v| v * v).sum::<f64>() / p.samples.len() as f64;
        let noise = synth::gaussian(p.samples.len(), power.sqrt(), 11);
        let mixed: Vec<f64> = p.samples.iter().zip(&noise).map(|(a, b)| a + b).collect();
        let rec = VoiceRecording::from_samples(mixed, fs);
        let h = hnr(&rec, &flat_contour(150.0, 400)).unwrap();
        assert!(h.abs() <= 1.0, "{h}");
    }

    #[test]
    fn hnr_decreases_with_noise() {
        let fs = 44100.0;
        let p = periodic(140.0, 2.0, fs);
        let power = p.samples.iter().map(|v| v * v).sum::<f64>() / p.samples.len() as f64;
        let c = flat_contour(140.0, 400);
        let values: Vec<f64> = [20.0, 0.0, -20.0]
            .iter()
            .map(|snr: &f64| {
                let rms = (power / 10f64.powf(snr / 10.0)).sqrt();
                let noise = synth::gaussian(p.samples.len(), rms, 5);
                let mixed = p.samples.iter().zip(&noise).map(|(a, b)| a + b).collect();
                hnr(&VoiceRecording::from_samples(mixed, fs), &c).unwrap()
            })
            .collect();
        assert!(values[0] > values[1] && values[1] > values[2], "{values:?}");
    }

    #[test]
    fn unvoiced_contour_has_no_frames() {
        let rec = synth::white_noise(1.0, 44100.0, 0.1, 1);
        let c = F0Contour::from_values(vec![f64::NAN; 190], 0.02, 0.005);
        assert!(matches!(hnr(&rec, &c), Err(Error::NoVoicedFrames)));
    }

    fn glottal_like(fs: f64) -> VoiceRecording {
        let mut rec = synth::pulse_train(110.0, 1.5, fs);
        for (f, bw) in [(600.0, 80.0), (1300.0, 100.0), (2400.0, 150.0)] {
            synth::resonate(&mut rec.samples, f, bw, fs);
        }
        rec
    }

    #[test]
    fn gne_separates_pulses_from_noise() {
        let fs = 16000.0;
        let (g_pulse, _) = gne(&glottal_like(fs)).unwrap();
        let (g_noise, _) = gne(&synth::white_noise(1.5, fs, 0.1, 3)).unwrap();
        assert!(g_pulse >= 0.85, "{g_pulse}");
        assert!(g_noise < g_pulse, "{g_noise}");
    }

    #[test]
    fn gne_is_deterministic_and_gain_invariant() {
        let fs = 16000.0;
        let rec = glottal_like(fs);
        let a = gne(&rec).unwrap();
        assert_eq!(a, gne(&rec).unwrap());
        let scaled = rec.with_samples(rec.samples.iter().map(|v| v * 7.5).collect(), fs);
        let b = gne(&scaled).unwrap();
        assert!((a.0 - b.0).abs() < 1e-6);
    }

    #[test]
    fn gne_frames_in_unit_interval_and_short_input_rejected() {
        let frames = gne_frames(
            &synth::white_noise(0.8, 8000.0, 0.2, 9),
            &GneConfig::default(),
        )
        .unwrap();
        assert!(frames.iter().all(|g| (0.0..=1.0).contains(g)));
        assert!(matches!(
            gne(&synth::white_noise(0.3, 8000.0, 0.2, 9)),
            Err(Error::TooShort { .. })
        ));
    }
}
