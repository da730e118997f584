//! Pitch-synchronous harmonic amplitudes over frames of a fixed number of
//! glottal cycles.

use serde::{Deserialize, Serialize};

use crate::dsp::{hamming, mean, std_population, FftPair, SincInterpolator};
use crate::error::{Error, Result};
use crate::pitch::PeriodSegmentation;

pub const HARMONICS: usize = 8;
pub const REL_EPS: f64 = 1e-6;
/// Amplitude floor relative to the global maximum (-240 dB).
const FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarmonicConfig {
    /// Cycles per analysis frame.
    pub cycles_per_frame: usize,
    /// Interpolated points per cycle.
    pub points_per_cycle: usize,
}

impl Default for HarmonicConfig {
    fn default() -> Self {
        HarmonicConfig {
            cycles_per_frame: 8,
            points_per_cycle: 512,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarmonicFeatures {
    pub h_mu: [f64; HARMONICS],
    pub h_sd: [f64; HARMONICS],
    pub rel_h: [f64; HARMONICS],
}

/// Raw harmonic amplitudes, one row of [`HARMONICS`] values per frame.
pub fn harmonic_amplitudes(
    samples: &[f64],
    seg: &PeriodSegmentation,
    cfg: &HarmonicConfig,
) -> Result<Vec<[f64; HARMONICS]>> {
    let nc = cfg.cycles_per_frame;
    if seg.cycles() < nc + 1 {
        return Err(Error::InsufficientCycles {
            found: seg.cycles(),
            required: nc + 1,
        });
    }
    let npts = nc * cfg.points_per_cycle;
    let fft = FftPair::new(npts);
    let window = hamming(npts, true);
    let interp = SincInterpolator::default();
    let b = &seg.boundaries;
    let mut rows = Vec::new();
    let mut i = 0;
    while (nc - 1) * i + nc < b.len() {
        let (s, e) = (b[(nc - 1) * i] as f64, b[(nc - 1) * i + nc] as f64);
        i += 1;
        let step = (e - s) / npts as f64;
        let cutoff = (1.0 / step).min(1.0);
        let hw = interp.half_width(cutoff);
        if s - hw < 0.0 || e + hw > (samples.len() - 1) as f64 {
            continue;
        }
        let frame: Vec<f64> = (0..npts)
            .map(|j| interp.at(samples, s + j as f64 * step, cutoff) * window[j])
            .collect();
        let spec = fft.forward_real(&frame);
        let mut row = [0.0; HARMONICS];
        for (p, h) in row.iter_mut().enumerate() {
            *h = spec[(p + 1) * nc].norm();
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::InsufficientCycles {
            found: seg.cycles(),
            required: nc + 1,
        });
    }
    Ok(rows)
}

/// Harmonic means, SDs and stability indices in dB relative to the strongest
/// harmonic amplitude over all frames.
pub fn harmonic_profile(samples: &[f64], seg: &PeriodSegmentation) -> Result<HarmonicFeatures> {
    harmonic_profile_with(samples, seg, &HarmonicConfig::default())
}

pub fn harmonic_profile_with(
    samples: &[f64],
    seg: &PeriodSegmentation,
    cfg: &HarmonicConfig,
) -> Result<HarmonicFeatures> {
    let rows = harmonic_amplitudes(samples, seg, cfg)?;
    let global = rows.iter().flatten().cloned().fold(0.0f64, f64::max);
    if global <= 0.0 {
        return Err(Error::InvalidInput("silent harmonic frames".into()));
    }
    let mut out = HarmonicFeatures {
        h_mu: [0.0; HARMONICS],
        h_sd: [0.0; HARMONICS],
        rel_h: [0.0; HARMONICS],
    };
    for p in 0..HARMONICS {
        let db: Vec<f64> = rows
            .iter()
            .map(|r| 20.0 * (r[p] / global).max(FLOOR).log10())
            .collect();
        out.h_mu[p] = mean(&db);
        out.h_sd[p] = std_population(&db);
        out.rel_h[p] = 1.0 / (out.h_mu[p].abs() + out.h_sd[p] + REL_EPS);
    }
    Ok(out)
}
