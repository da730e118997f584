//! Deterministic synthetic signals with known construction, used to check the
//! analysis chain against ground truth and to build demonstration corpora.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dataset::{write_manifest, write_wav_i16, Label, ManifestEntry, VoiceRecording, Vowel};
use crate::dsp::{hann, sinc};
use crate::error::{Error, Result};

/// Unit impulses at `round(k * fs / f0)`.
pub fn pulse_train(f0: f64, duration: f64, fs: f64) -> VoiceRecording {
    let n = (duration * fs).round() as usize;
    let mut x = vec![0.0; n];
    let mut k = 0usize;
    loop {
        let pos = (k as f64 * fs / f0).round() as usize;
        if pos >= n {
            break;
        }
        x[pos] = 0.9;
        k += 1;
    }
    VoiceRecording::from_samples(x, fs)
}

pub fn white_noise(duration: f64, fs: f64, rms: f64, seed: u64) -> VoiceRecording {
    VoiceRecording::from_samples(gaussian(((duration * fs).round()) as usize, rms, seed), fs)
}

/// Gaussian white noise with the given RMS.
pub fn gaussian(n: usize, rms: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| rms * Distribution::<f64>::sample(&StandardNormal, &mut rng))
        .collect()
}

/// `sum_p amps[p] * sin(2 pi (p+1) f0 t)`.
pub fn periodic_from_harmonics(f0: f64, amps: &[f64], duration: f64, fs: f64) -> VoiceRecording {
    let n = (duration * fs).round() as usize;
    let x = (0..n)
        .map(|i| {
            let t = i as f64 / fs;
            amps.iter()
                .enumerate()
                .map(|(p, a)| a * (2.0 * PI * (p + 1) as f64 * f0 * t).sin())
                .sum()
        })
        .collect();
    VoiceRecording::from_samples(x, fs)
}

/// Harmonic-rich tone whose F0 follows `f0_of_t`; phase is integrated sample
/// by sample.
pub fn tone_with_contour(
    f0_of_t: impl Fn(f64) -> f64,
    amps: &[f64],
    duration: f64,
    fs: f64,
) -> VoiceRecording {
    let n = (duration * fs).round() as usize;
    let mut phase = 0.0;
    let mut x = Vec::with_capacity(n);
    for i in 0..n {
        let f = f0_of_t(i as f64 / fs);
        x.push(
            amps.iter()
                .enumerate()
                .map(|(p, a)| a * ((p + 1) as f64 * phase).sin())
                .sum(),
        );
        phase = (phase + 2.0 * PI * f / fs) % (2.0 * PI);
    }
    VoiceRecording::from_samples(x, fs)
}

/// Linear F0 glide from `f_start` to `f_end` over `duration`.
pub fn glide(f_start: f64, f_end: f64, duration: f64, fs: f64) -> VoiceRecording {
    let slope = (f_end - f_start) / duration;
    tone_with_contour(|t| f_start + slope * t, &[0.5, 0.3, 0.2], duration, fs)
}

/// Sawtooth rising from `-amp` to `amp` once per period.
pub fn sawtooth(f0: f64, amp: f64, duration: f64, fs: f64) -> VoiceRecording {
    let n = (duration * fs).round() as usize;
    let x = (0..n)
        .map(|i| {
            let frac = (i as f64 * f0 / fs).fract();
            amp * (2.0 * frac - 1.0)
        })
        .collect();
    VoiceRecording::from_samples(x, fs)
}

/// Two-pole resonator applied in place.
pub fn resonate(x: &mut [f64], freq: f64, bandwidth: f64, fs: f64) {
    let r = (-PI * bandwidth / fs).exp();
    let a1 = 2.0 * r * (2.0 * PI * freq / fs).cos();
    let a2 = -r * r;
    let gain = 1.0 - r;
    let (mut y1, mut y2) = (0.0, 0.0);
    for v in x.iter_mut() {
        let y = gain * *v + a1 * y1 + a2 * y2;
        y2 = y1;
        y1 = y;
        *v = y;
    }
}

/// Adds a band-limited pulse of height `amp` centred at fractional index `pos`.
fn add_pulse(x: &mut [f64], pos: f64, amp: f64) {
    const HALF: isize = 16;
    let w = hann(2 * HALF as usize + 1, false);
    let centre = pos.round() as isize;
    for k in -HALF..=HALF {
        let idx = centre + k;
        if idx < 0 || idx as usize >= x.len() {
            continue;
        }
        let d = idx as f64 - pos;
        let wi = w[(k + HALF) as usize];
        x[idx as usize] += amp * 0.9 * sinc(0.9 * d) * wi;
    }
}

/// Parameters of a source-filter vowel model: pulse excitation with optional
/// jitter, shimmer and sinusoidal F0 modulation, through formant resonators,
/// plus additive noise.
#[derive(Debug, Clone)]
pub struct VoiceSpec {
    pub f0: f64,
    pub duration: f64,
    pub sample_rate: f64,
    /// `(frequency, bandwidth)` pairs in Hz.
    pub formants: Vec<(f64, f64)>,
    /// Relative standard deviation of cycle length.
    pub jitter: f64,
    /// Relative standard deviation of cycle amplitude.
    pub shimmer: f64,
    pub vibrato_rate: f64,
    /// Relative F0 modulation depth.
    pub vibrato_depth: f64,
    /// Noise RMS relative to the voiced signal RMS.
    pub noise: f64,
    pub peak: f64,
    pub seed: u64,
}

impl VoiceSpec {
    pub fn vowel(vowel: Vowel, f0: f64, seed: u64) -> Self {
        let formants = match vowel {
            Vowel::A => vec![
                (700.0, 90.0),
                (1220.0, 100.0),
                (2600.0, 140.0),
                (3300.0, 180.0),
            ],
            Vowel::I => vec![
                (300.0, 70.0),
                (2300.0, 110.0),
                (3000.0, 140.0),
                (3600.0, 180.0),
            ],
        };
        VoiceSpec {
            f0,
            duration: 3.0,
            sample_rate: 44100.0,
            formants,
            jitter: 0.003,
            shimmer: 0.02,
            vibrato_rate: 5.5,
            vibrato_depth: 0.004,
            noise: 0.01,
            peak: 0.5,
            seed,
        }
    }

    pub fn render(&self) -> Vec<f64> {
        let fs = self.sample_rate;
        let n = (self.duration * fs).round() as usize;
        let mut x = vec![0.0; n];
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut t = 0.01;
        while t * fs < n as f64 {
            let f = self.f0 * (1.0 + self.vibrato_depth * (2.0 * PI * self.vibrato_rate * t).sin());
            let z: f64 = StandardNormal.sample(&mut rng);
            let a: f64 = StandardNormal.sample(&mut rng);
            add_pulse(&mut x, t * fs, 1.0 + self.shimmer * a);
            t += (1.0 + self.jitter * z) / f;
        }
        // glottal spectral tilt
        let mut prev = 0.0;
        for v in x.iter_mut() {
            let y = *v + 0.9 * prev;
            prev = y;
            *v = y;
        }
        let mut last = 0.0;
        for v in x.iter_mut() {
            let d = *v - last;
            last = *v;
            *v = d;
        }
        for &(f, bw) in &self.formants {
            resonate(&mut x, f, bw, fs);
        }
        let rms = (x.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
        let noise = gaussian(n, self.noise * rms, self.seed ^ 0x9e37_79b9);
        for (v, e) in x.iter_mut().zip(noise) {
            *v += e;
        }
        // 20 ms fades
        let fade = (0.02 * fs) as usize;
        for i in 0..fade.min(n / 2) {
            let g = i as f64 / fade as f64;
            x[i] *= g;
            x[n - 1 - i] *= g;
        }
        let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if peak > 0.0 {
            x.iter_mut().for_each(|v| *v *= self.peak / peak);
        }
        x
    }

    pub fn recording(&self, subject_id: &str, vowel: Vowel, label: Label) -> VoiceRecording {
        VoiceRecording::new(self.render(), self.sample_rate, subject_id, vowel, label)
    }
}

/// A subject whose two vowels differ by group: the ALS-like group gets
/// flutter-range F0 modulation, higher jitter and noise, and centralized
/// vowel formants.
pub fn synthetic_subject(index: usize, label: Label, seed: u64) -> (VoiceSpec, VoiceSpec) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(index as u64 * 7919));
    let mut u = move || -> f64 { StandardNormal.sample(&mut rng) };
    let female = index % 2 == 0;
    let f0 = if female { 200.0 } else { 120.0 } * (1.0 + 0.08 * u());
    let mut a = VoiceSpec::vowel(Vowel::A, f0, seed ^ (index as u64 * 31 + 1));
    let mut i = VoiceSpec::vowel(Vowel::I, f0 * 1.03, seed ^ (index as u64 * 31 + 2));
    for spec in [&mut a, &mut i] {
        spec.duration = 2.5 + 0.3 * u().abs();
    }
    if label == Label::Als {
        let centralize = 0.25 + 0.1 * u().abs();
        i.formants[1].0 -= centralize * 800.0;
        a.formants[1].0 += centralize * 250.0;
        for spec in [&mut a, &mut i] {
            spec.vibrato_rate = 11.0 + 1.0 * u();
            spec.vibrato_depth = 0.012 + 0.003 * u().abs();
            spec.jitter = 0.008 + 0.002 * u().abs();
            spec.shimmer = 0.05;
            spec.noise = 0.05;
        }
    } else {
        for spec in [&mut a, &mut i] {
            spec.vibrato_rate = 5.0 + 0.5 * u();
            spec.vibrato_depth = 0.003;
        }
    }
    (a, i)
}

/// Writes a WAV corpus of synthetic subjects and its manifest under `dir`;
/// returns the manifest path. Subjects `S001..` are HC first, then ALS.
pub fn write_synthetic_corpus(dir: &Path, n_hc: usize, n_als: usize, seed: u64) -> Result<PathBuf> {
    let wav_dir = dir.join("wav");
    std::fs::create_dir_all(&wav_dir).map_err(|e| Error::io(&wav_dir, e))?;
    let mut entries = Vec::new();
    for k in 0..n_hc + n_als {
        let label = if k < n_hc { Label::Hc } else { Label::Als };
        let id = format!("S{:03}", k + 1);
        let (a, i) = synthetic_subject(k, label, seed);
        for (spec, vowel) in [(a, Vowel::A), (i, Vowel::I)] {
            let path = wav_dir.join(format!("{id}_{}.wav", vowel.suffix()));
            write_wav_i16(&path, &[spec.render()], spec.sample_rate as u32)?;
            entries.push(ManifestEntry {
                subject_id: id.clone(),
                vowel,
                label,
                path,
            });
        }
    }
    let manifest = dir.join("manifest.csv");
    write_manifest(&manifest, &entries)?;
    Ok(manifest)
}
