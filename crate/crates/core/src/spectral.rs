//! Mel-cepstral coefficients, their dynamics, all-pole spectral envelopes,
//! the second formant and the envelope distance between two vowels.

use serde::{Deserialize, Serialize};

use crate::dataset::{resample_samples, VoiceRecording, Vowel};
use crate::dsp::{allpole_magnitude, hamming, levinson_durbin, parabolic_peak, FftPair, Lpc};
use crate::error::{Error, Result};

pub const N_MFCC: usize = 12;
pub const N_MEL: usize = 20;
pub const ENVELOPE_POINTS: usize = 256;
pub const MAX_FREQ: f64 = 4000.0;

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MfccConfig {
    pub window_s: f64,
    pub hop_s: f64,
    pub max_freq: f64,
}

impl Default for MfccConfig {
    fn default() -> Self {
        MfccConfig {
            window_s: 0.025,
            hop_s: 0.010,
            max_freq: MAX_FREQ,
        }
    }
}

/// Triangular filters equally spaced on the mel scale over `[0, max_freq]`,
/// each normalized to unit sum. Row `k` holds weights for FFT bins `0..bins`.
pub fn mel_filterbank(n_fft: usize, fs: f64, max_freq: f64) -> Vec<Vec<f64>> {
    let bins = ((max_freq / fs * n_fft as f64).floor() as usize).min(n_fft / 2) + 1;
    let top = hz_to_mel(max_freq);
    let edges: Vec<f64> = (0..N_MEL + 2)
        .map(|i| mel_to_hz(top * i as f64 / (N_MEL + 1) as f64))
        .collect();
    (0..N_MEL)
        .map(|k| {
            let (lo, mid, hi) = (edges[k], edges[k + 1], edges[k + 2]);
            let mut w: Vec<f64> = (0..bins)
                .map(|j| {
                    let f = j as f64 * fs / n_fft as f64;
                    if f <= lo || f >= hi {
                        0.0
                    } else if f <= mid {
                        (f - lo) / (mid - lo)
                    } else {
                        (hi - f) / (hi - mid)
                    }
                })
                .collect();
            let sum: f64 = w.iter().sum();
            if sum > 0.0 {
                w.iter_mut().for_each(|v| *v /= sum);
            } else {
                let j = ((mid * n_fft as f64 / fs).round() as usize).min(bins - 1);
                w[j] = 1.0;
            }
            w
        })
        .collect()
}

/// Cosine transform of the log band energies, coefficients 1..=12.
pub fn cepstrum_from_bands(s: &[f64]) -> [f64; N_MFCC] {
    let m_bands = s.len() as f64;
    let logs: Vec<f64> = s.iter().map(|v| v.max(1e-12).ln()).collect();
    let mut out = [0.0; N_MFCC];
    for (m, c) in out.iter_mut().enumerate() {
        let m = (m + 1) as f64;
        *c = logs
            .iter()
            .enumerate()
            .map(|(k, l)| l * (m * (k as f64 + 0.5) * std::f64::consts::PI / m_bands).cos())
            .sum();
    }
    out
}

/// MFCC vectors for every full frame of the recording.
pub fn frame_mfccs(rec: &VoiceRecording, cfg: &MfccConfig) -> Result<Vec<[f64; N_MFCC]>> {
    let fs = rec.sample_rate;
    let win = (cfg.window_s * fs).round() as usize;
    let hop = (cfg.hop_s * fs).round() as usize;
    if rec.samples.len() < win || win == 0 {
        return Err(Error::TooShort {
            what: "recording for MFCC (samples)",
            required: win,
            actual: rec.samples.len(),
        });
    }
    let n_fft = win.next_power_of_two();
    let fft = FftPair::new(n_fft);
    let bank = mel_filterbank(n_fft, fs, cfg.max_freq.min(fs / 2.0));
    let w = hamming(win, false);
    let mut out = Vec::new();
    let mut start = 0;
    while start + win <= rec.samples.len() {
        let frame: Vec<f64> = rec.samples[start..start + win]
            .iter()
            .zip(&w)
            .map(|(x, w)| x * w)
            .collect();
        let spec = fft.forward_real(&frame);
        let bands: Vec<f64> = bank
            .iter()
            .map(|row| row.iter().zip(&spec).map(|(w, x)| w * x.norm()).sum())
            .collect();
        out.push(cepstrum_from_bands(&bands));
        start += hop;
    }
    Ok(out)
}

/// Time-averaged MFCC(1..12).
pub fn mfcc(rec: &VoiceRecording) -> Result<[f64; N_MFCC]> {
    let frames = frame_mfccs(rec, &MfccConfig::default())?;
    Ok(average(&frames))
}

fn average(frames: &[[f64; N_MFCC]]) -> [f64; N_MFCC] {
    let mut out = [0.0; N_MFCC];
    for f in frames {
        for (o, v) in out.iter_mut().zip(f) {
            *o += v;
        }
    }
    out.iter_mut().for_each(|o| *o /= frames.len() as f64);
    out
}

/// Mean absolute regression delta over +-2 frames.
pub fn delta_mfcc(frames: &[[f64; N_MFCC]]) -> Result<[f64; N_MFCC]> {
    if frames.len() < 5 {
        return Err(Error::TooShort {
            what: "MFCC frame sequence",
            required: 5,
            actual: frames.len(),
        });
    }
    let mut out = [0.0; N_MFCC];
    let valid = frames.len() - 4;
    for t in 2..frames.len() - 2 {
        for (c, o) in out.iter_mut().enumerate() {
            let d =
                (frames[t + 1][c] - frames[t - 1][c]) + 2.0 * (frames[t + 2][c] - frames[t - 2][c]);
            *o += (d / 10.0).abs();
        }
    }
    out.iter_mut().for_each(|o| *o /= valid as f64);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralEnvelope {
    /// dB magnitude at [`ENVELOPE_POINTS`] uniform points over `[0, 4000]` Hz.
    pub db: Vec<f64>,
    pub order: usize,
}

impl SpectralEnvelope {
    pub fn frequencies(&self) -> Vec<f64> {
        envelope_grid(self.db.len())
    }
}

fn envelope_grid(p: usize) -> Vec<f64> {
    (0..p)
        .map(|k| MAX_FREQ * k as f64 / (p - 1) as f64)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeConfig {
    pub analysis_rate: f64,
    pub order: usize,
    pub frame_len: usize,
    pub hop: usize,
    pub n_fft: usize,
}

impl Default for EnvelopeConfig {
    fn default() -> Self {
        EnvelopeConfig {
            analysis_rate: 8000.0,
            order: 24,
            frame_len: 256,
            hop: 80,
            n_fft: 512,
        }
    }
}

/// All-pole envelope fitted to the time-averaged power spectrum.
pub fn spectral_envelope(rec: &VoiceRecording) -> Result<SpectralEnvelope> {
    spectral_envelope_with(rec, &EnvelopeConfig::default())
}

pub fn spectral_envelope_with(
    rec: &VoiceRecording,
    cfg: &EnvelopeConfig,
) -> Result<SpectralEnvelope> {
    let fs = cfg.analysis_rate;
    let x = if (rec.sample_rate - fs).abs() < 1e-9 {
        rec.samples.clone()
    } else {
        resample_samples(&rec.samples, rec.sample_rate, fs)
    };
    if x.len() < cfg.frame_len {
        return Err(Error::TooShort {
            what: "recording for spectral envelope (samples at 8 kHz)",
            required: cfg.frame_len,
            actual: x.len(),
        });
    }
    let fft = FftPair::new(cfg.n_fft);
    let w = hamming(cfg.frame_len, false);
    let mut power = vec![0.0; cfg.n_fft];
    let mut frames = 0;
    let mut start = 0;
    while start + cfg.frame_len <= x.len() {
        let frame: Vec<f64> = x[start..start + cfg.frame_len]
            .iter()
            .zip(&w)
            .map(|(a, b)| a * b)
            .collect();
        for (p, s) in power.iter_mut().zip(fft.forward_real(&frame)) {
            *p += s.norm_sqr();
        }
        frames += 1;
        start += cfg.hop;
    }
    let mut buf: Vec<num_complex::Complex64> = power
        .iter()
        .map(|p| num_complex::Complex64::new(p / frames as f64, 0.0))
        .collect();
    fft.inverse(&mut buf);
    let r: Vec<f64> = buf[..=cfg.order]
        .iter()
        .map(|c| c.re / cfg.n_fft as f64)
        .collect();
    let lpc = fit_stable(&r, cfg.order)?;
    let db = envelope_grid(ENVELOPE_POINTS)
        .iter()
        .map(|&f| 20.0 * allpole_magnitude(&lpc.a, f, fs).log10())
        .collect();
    Ok(SpectralEnvelope {
        db,
        order: cfg.order,
    })
}

fn fit_stable(r: &[f64], order: usize) -> Result<Lpc> {
    if r[0] <= 0.0 {
        return Err(Error::InvalidInput(
            "silent recording has no spectral envelope".into(),
        ));
    }
    let mut lambda = 1e-9;
    while lambda <= 1e-1 {
        let mut rr = r.to_vec();
        rr[0] *= 1.0 + lambda;
        let lpc = levinson_durbin(&rr, order);
        if lpc.stable && lpc.error > 0.0 {
            return Ok(lpc);
        }
        lambda *= 10.0;
    }
    Err(Error::InvalidInput("all-pole fit did not stabilize".into()))
}

/// Mean absolute dB difference between two envelopes.
pub fn envelope_distance(e_i: &SpectralEnvelope, e_a: &SpectralEnvelope) -> Result<f64> {
    if e_i.db.len() != e_a.db.len() {
        return Err(Error::DimensionMismatch {
            expected: e_i.db.len(),
            actual: e_a.db.len(),
        });
    }
    let sum: f64 = e_i.db.iter().zip(&e_a.db).map(|(a, b)| (a - b).abs()).sum();
    Ok(sum / e_i.db.len() as f64)
}

pub fn f2_band(vowel: Vowel) -> (f64, f64) {
    match vowel {
        Vowel::I => (1500.0, 3200.0),
        Vowel::A => (900.0, 1800.0),
    }
}

/// Local maxima above 250 Hz with at least 1 dB prominence, as refined
/// `(frequency, level)` pairs in increasing frequency.
pub fn envelope_peaks(env: &SpectralEnvelope) -> Vec<(f64, f64)> {
    let y = &env.db;
    let f = env.frequencies();
    let df = f[1] - f[0];
    let mut peaks = Vec::new();
    for k in 1..y.len() - 1 {
        if !(y[k] > y[k - 1] && y[k] >= y[k + 1]) || f[k] <= 250.0 {
            continue;
        }
        let mut left_min = y[k];
        for j in (0..k).rev() {
            if y[j] > y[k] {
                break;
            }
            left_min = left_min.min(y[j]);
        }
        let mut right_min = y[k];
        for &v in &y[k + 1..] {
            if v > y[k] {
                break;
            }
            right_min = right_min.min(v);
        }
        if y[k] - left_min.max(right_min) < 1.0 {
            continue;
        }
        let (off, val) = parabolic_peak(y[k - 1], y[k], y[k + 1]);
        peaks.push((f[k] + off * df, val));
    }
    peaks
}

/// Second-formant frequency, or `None` when no qualifying peak lies in the
/// vowel's search band.
pub fn second_formant(env: &SpectralEnvelope, vowel: Vowel) -> Option<f64> {
    let (lo, hi) = f2_band(vowel);
    let peaks = envelope_peaks(env);
    let in_band = |f: f64| f >= lo && f <= hi;
    if let Some(&(f, _)) = peaks.get(1) {
        if in_band(f) {
            return Some(f);
        }
    }
    peaks
        .iter()
        .filter(|(f, _)| in_band(*f))
        .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .map(|p| p.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VowelSpectral {
    pub mfcc: [f64; N_MFCC],
    pub delta_mfcc: [f64; N_MFCC],
    pub envelope: SpectralEnvelope,
    pub f2: Option<f64>,
}

pub fn vowel_spectral(rec: &VoiceRecording) -> Result<VowelSpectral> {
    let frames = frame_mfccs(rec, &MfccConfig::default())?;
    let envelope = spectral_envelope(rec)?;
    let f2 = second_formant(&envelope, rec.vowel);
    Ok(VowelSpectral {
        mfcc: average(&frames),
        delta_mfcc: delta_mfcc(&frames)?,
        envelope,
        f2,
    })
}

/// Features that combine both vowels of a subject.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairSpectral {
    pub f2_i: Option<f64>,
    pub f2_conv: Option<f64>,
    pub d1: f64,
}

pub fn pair_spectral(a: &VowelSpectral, i: &VowelSpectral) -> Result<PairSpectral> {
    Ok(PairSpectral {
        f2_i: i.f2,
        f2_conv: match (i.f2, a.f2) {
            (Some(fi), Some(fa)) => Some((fi - fa).abs()),
            _ => None,
        },
        d1: envelope_distance(&i.envelope, &a.envelope)?,
    })
}
