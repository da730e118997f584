//! F0 tracking at a fixed 5 ms step and segmentation of the waveform into
//! glottal cycles.
//!
//! The tracker computes a normalized cross-correlation function (NCCF) per
//! 40 ms frame, keeps the strongest interpolated peaks as candidates, and
//! picks a path through each voiced run with a Viterbi search that penalizes
//! octave jumps. Period boundaries are placed by marching from the strongest
//! waveform peak one local period at a time, each step refined by waveform
//! matching against the neighbouring cycle and snapped to the positive peak.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::VoiceRecording;
use crate::dsp::{lowpass_half_len, lowpass_zero_phase, parabolic_peak, FftPair};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PitchConfig {
    pub f_min: f64,
    pub f_max: f64,
    pub window_s: f64,
    pub step_s: f64,
    pub voicing_threshold: f64,
    /// Strength bonus per octave for shorter lags, favours the fundamental
    /// over its subharmonics.
    pub octave_cost: f64,
    /// Viterbi transition cost per octave of frame-to-frame F0 change.
    pub octave_jump_cost: f64,
    pub max_candidates: usize,
    /// Low-pass cutoff applied before correlation analysis, in Hz.
    pub analysis_cutoff: f64,
}

impl Default for PitchConfig {
    fn default() -> Self {
        PitchConfig {
            f_min: 60.0,
            f_max: 450.0,
            window_s: 0.040,
            step_s: 0.005,
            voicing_threshold: 0.5,
            octave_cost: 0.01,
            octave_jump_cost: 0.35,
            max_candidates: 6,
            analysis_cutoff: 1000.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F0Contour {
    /// F0 per frame in Hz; `NaN` on unvoiced frames.
    pub values: Vec<f64>,
    pub voiced: Vec<bool>,
    /// Time of frame 0 in seconds.
    pub start_time: f64,
    pub step: f64,
    /// Peak NCCF value per frame, for diagnostics.
    pub strength: Vec<f64>,
}

impl F0Contour {
    /// Builds a contour from per-frame F0 values; non-finite or non-positive
    /// values are unvoiced.
    pub fn from_values(values: Vec<f64>, start_time: f64, step: f64) -> Self {
        let voiced: Vec<bool> = values.iter().map(|v| v.is_finite() && *v > 0.0).collect();
        let values = values
            .iter()
            .zip(&voiced)
            .map(|(v, &ok)| if ok { *v } else { f64::NAN })
            .collect();
        let strength = voiced.iter().map(|&v| if v { 1.0 } else { 0.0 }).collect();
        F0Contour {
            values,
            voiced,
            start_time,
            step,
            strength,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, frame: usize) -> f64 {
        self.start_time + frame as f64 * self.step
    }

    pub fn voiced_values(&self) -> Vec<f64> {
        self.values
            .iter()
            .zip(&self.voiced)
            .filter(|(_, &v)| v)
            .map(|(f, _)| *f)
            .collect()
    }

    pub fn voiced_count(&self) -> usize {
        self.voiced.iter().filter(|&&v| v).count()
    }

    pub fn voiced_fraction(&self) -> f64 {
        if self.voiced.is_empty() {
            0.0
        } else {
            self.voiced_count() as f64 / self.voiced.len() as f64
        }
    }

    /// Mean F0 over voiced frames (`NaN` when none are voiced).
    pub fn mean_f0(&self) -> f64 {
        crate::dsp::mean(&self.voiced_values())
    }

    /// Nearest frame index for a time in seconds, if inside the contour.
    pub fn frame_at(&self, t: f64) -> Option<usize> {
        if self.values.is_empty() {
            return None;
        }
        let idx = ((t - self.start_time) / self.step).round();
        if idx < 0.0 || idx as usize >= self.values.len() {
            None
        } else {
            Some(idx as usize)
        }
    }

    /// Voiced F0 linearly interpolated at time `t`, falling back to the
    /// nearest voiced frame inside an unvoiced gap.
    pub fn f0_at(&self, t: f64) -> Option<f64> {
        let pos = (t - self.start_time) / self.step;
        let n = self.values.len();
        if n == 0 {
            return None;
        }
        let lo = pos.floor().clamp(0.0, (n - 1) as f64) as usize;
        let hi = (lo + 1).min(n - 1);
        match (self.voiced[lo], self.voiced[hi]) {
            (true, true) => {
                let frac = (pos - lo as f64).clamp(0.0, 1.0);
                Some(self.values[lo] * (1.0 - frac) + self.values[hi] * frac)
            }
            (true, false) => Some(self.values[lo]),
            (false, true) => Some(self.values[hi]),
            (false, false) => None,
        }
    }

    /// Longest run of consecutive voiced frames as `(first, last)` inclusive.
    pub fn longest_voiced_run(&self) -> Option<(usize, usize)> {
        let mut best: Option<(usize, usize)> = None;
        let mut start = None;
        for (i, &v) in self
            .voiced
            .iter()
            .chain(std::iter::once(&false))
            .enumerate()
        {
            match (v, start) {
                (true, None) => start = Some(i),
                (false, Some(s)) => {
                    if best.is_none_or(|(a, b)| i - 1 - s > b - a) {
                        best = Some((s, i - 1));
                    }
                    start = None;
                }
                _ => {}
            }
        }
        best
    }

    /// Contour restricted to the first..last voiced frame with interior
    /// unvoiced gaps bridged by linear interpolation.
    pub fn bridged(&self) -> Vec<f64> {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| self.voiced[i]).collect();
        let (Some(&first), Some(&last)) = (idx.first(), idx.last()) else {
            return Vec::new();
        };
        let mut out = Vec::with_capacity(last - first + 1);
        let mut prev = first;
        for &i in &idx {
            if i > prev + 1 {
                let (a, b) = (self.values[prev], self.values[i]);
                for g in prev + 1..i {
                    let frac = (g - prev) as f64 / (i - prev) as f64;
                    out.push(a + (b - a) * frac);
                }
            }
            out.push(self.values[i]);
            prev = i;
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    f0: f64,
    strength: f64,
}

/// `left(lag)` gives the correlation at `lag - 1` measured from a window
/// advanced by one sample, so both neighbours of a peak see the same pairs.
fn frame_candidates(
    nccf: &[f64],
    left: impl Fn(usize) -> f64,
    lag_min: usize,
    fs: f64,
    cfg: &PitchConfig,
) -> (Vec<Candidate>, f64) {
    let mut peaks = Vec::new();
    let mut best = 0.0f64;
    let upper = nccf.len() - 1;
    for lag in lag_min.max(1)..upper {
        let (a, b, c) = (nccf[lag - 1], nccf[lag], nccf[lag + 1]);
        if b > 0.0 && b >= a && b > c {
            let (off, val) = parabolic_peak(left(lag), b, c);
            let val = val.min(1.0);
            let t = lag as f64 + off;
            let f0 = fs / t;
            if f0 < cfg.f_min || f0 > cfg.f_max {
                continue;
            }
            best = best.max(val);
            let strength = val - cfg.octave_cost * (cfg.f_min * t / fs).log2();
            peaks.push(Candidate { f0, strength });
        }
    }
    peaks.sort_by(|a, b| b.strength.partial_cmp(&a.strength).unwrap());
    peaks.truncate(cfg.max_candidates);
    (peaks, best)
}

/// Estimates the F0 contour at a fixed step.
pub fn track_f0(rec: &VoiceRecording) -> Result<F0Contour> {
    track_f0_with(rec, &PitchConfig::default())
}

pub fn track_f0_with(rec: &VoiceRecording, cfg: &PitchConfig) -> Result<F0Contour> {
    let fs = rec.sample_rate;
    let smoothed = lowpass_zero_phase(&rec.samples, cfg.analysis_cutoff, fs);
    let win = (cfg.window_s * fs).round() as usize;
    let lag_min = (fs / cfg.f_max).floor() as usize;
    let lag_max = (fs / cfg.f_min).ceil() as usize + 1;
    let seg_len = win + lag_max + 1;
    let mut edge = lowpass_half_len(cfg.analysis_cutoff, fs);
    if smoothed.len() < seg_len + 2 * edge {
        edge = 0;
    }
    let x = &smoothed[edge..smoothed.len() - edge];
    let unvoiceable = |voiced, total, mean_peak| Error::Unvoiceable {
        voiced,
        total,
        mean_peak,
    };
    if x.len() < seg_len {
        return Err(unvoiceable(0, 0, 0.0));
    }
    let n_frames = ((x.len() - seg_len) as f64 / (cfg.step_s * fs)).floor() as usize + 1;
    let fft = FftPair::new(seg_len.next_power_of_two());

    // prefix sums of squares for the shifted-window energies
    let mut frames: Vec<(Vec<Candidate>, f64)> = Vec::with_capacity(n_frames);
    let mut seg = vec![0.0; seg_len];
    for m in 0..n_frames {
        let start = (m as f64 * cfg.step_s * fs).round() as usize;
        seg.copy_from_slice(&x[start..start + seg_len]);
        let dc = crate::dsp::mean(&seg);
        seg.iter_mut().for_each(|v| *v -= dc);
        let mut prefix = vec![0.0; seg_len + 1];
        for i in 0..seg_len {
            prefix[i + 1] = prefix[i] + seg[i] * seg[i];
        }
        let e0 = prefix[win];
        if e0 <= 1e-20 {
            frames.push((Vec::new(), 0.0));
            continue;
        }
        let head: Vec<f64> = seg[..win].to_vec();
        let a = fft.forward_real(&head);
        let mut b = fft.forward_real(&seg);
        for (bi, ai) in b.iter_mut().zip(&a) {
            *bi *= ai.conj();
        }
        fft.inverse(&mut b);
        let scale = 1.0 / fft.len as f64;
        let nccf: Vec<f64> = (0..=lag_max)
            .map(|lag| {
                let et = prefix[lag + win] - prefix[lag];
                let denom = (e0 * et).sqrt();
                if denom <= 1e-20 {
                    0.0
                } else {
                    b[lag].re * scale / denom
                }
            })
            .collect();
        let e1 = prefix[win + 1] - prefix[1];
        let left = |lag: usize| {
            let et = prefix[lag + win] - prefix[lag];
            let denom = (e1 * et).sqrt();
            if denom <= 1e-20 {
                return 0.0;
            }
            let dot: f64 = seg[1..=win]
                .iter()
                .zip(&seg[lag..lag + win])
                .map(|(p, q)| p * q)
                .sum();
            dot / denom
        };
        frames.push(frame_candidates(&nccf, left, lag_min, fs, cfg));
    }

    let voiced: Vec<bool> = frames
        .iter()
        .map(|(c, best)| !c.is_empty() && *best >= cfg.voicing_threshold)
        .collect();
    let strength: Vec<f64> = frames.iter().map(|(_, b)| *b).collect();
    let voiced_count = voiced.iter().filter(|&&v| v).count();
    if voiced_count * 2 < n_frames || voiced_count == 0 {
        return Err(unvoiceable(
            voiced_count,
            n_frames,
            crate::dsp::mean(&strength),
        ));
    }

    let mut values = vec![f64::NAN; n_frames];
    let mut m = 0;
    while m < n_frames {
        if !voiced[m] {
            m += 1;
            continue;
        }
        let run_start = m;
        while m < n_frames && voiced[m] {
            m += 1;
        }
        let path = viterbi(&frames[run_start..m], cfg);
        for (k, f) in path.into_iter().enumerate() {
            values[run_start + k] = f;
        }
    }

    Ok(F0Contour {
        values,
        voiced,
        start_time: (edge as f64 + win as f64 / 2.0) / fs,
        step: cfg.step_s,
        strength,
    })
}

fn viterbi(frames: &[(Vec<Candidate>, f64)], cfg: &PitchConfig) -> Vec<f64> {
    let mut cost: Vec<f64> = frames[0].0.iter().map(|c| -c.strength).collect();
    let mut back: Vec<Vec<usize>> = vec![vec![0; cost.len()]];
    for t in 1..frames.len() {
        let (prev, cur) = (&frames[t - 1].0, &frames[t].0);
        let mut next_cost = Vec::with_capacity(cur.len());
        let mut ptr = Vec::with_capacity(cur.len());
        for c in cur {
            let (arg, best) = prev
                .iter()
                .enumerate()
                .map(|(j, p)| {
                    (
                        j,
                        cost[j] + cfg.octave_jump_cost * (c.f0 / p.f0).log2().abs(),
                    )
                })
                .fold(
                    (0, f64::INFINITY),
                    |acc, cur| if cur.1 < acc.1 { cur } else { acc },
                );
            next_cost.push(best - c.strength);
            ptr.push(arg);
        }
        cost = next_cost;
        back.push(ptr);
    }
    let mut state = cost
        .iter()
        .enumerate()
        .fold(
            (0, f64::INFINITY),
            |acc, (j, &c)| if c < acc.1 { (j, c) } else { acc },
        )
        .0;
    let mut path = vec![0.0; frames.len()];
    for t in (0..frames.len()).rev() {
        path[t] = frames[t].0[state].f0;
        state = back[t][state];
    }
    path
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodSegmentation {
    /// Strictly increasing cycle boundaries (sample indices).
    pub boundaries: Vec<usize>,
    /// Cycle durations in seconds.
    pub periods: Vec<f64>,
    /// Peak absolute amplitude per cycle.
    pub amplitudes: Vec<f64>,
    pub sample_rate: f64,
}

impl PeriodSegmentation {
    /// Builds a segmentation from boundaries, deriving periods and amplitudes.
    pub fn from_boundaries(samples: &[f64], boundaries: Vec<usize>, sample_rate: f64) -> Self {
        let periods = boundaries
            .windows(2)
            .map(|w| (w[1] - w[0]) as f64 / sample_rate)
            .collect();
        let amplitudes = boundaries
            .windows(2)
            .map(|w| {
                samples[w[0]..w[1]]
                    .iter()
                    .fold(0.0f64, |m, v| m.max(v.abs()))
            })
            .collect();
        PeriodSegmentation {
            boundaries,
            periods,
            amplitudes,
            sample_rate,
        }
    }

    pub fn cycles(&self) -> usize {
        self.periods.len()
    }
}

pub const MIN_CYCLES: usize = 30;

/// Normalized correlation between `x[a..a+len]` and `x[b..b+len]`.
fn ncc(x: &[f64], a: usize, b: usize, len: usize) -> f64 {
    let (u, v) = (&x[a..a + len], &x[b..b + len]);
    let (mut uv, mut uu, mut vv) = (0.0, 0.0, 0.0);
    for (p, q) in u.iter().zip(v) {
        uv += p * q;
        uu += p * p;
        vv += q * q;
    }
    let d = (uu * vv).sqrt();
    if d <= 1e-30 {
        0.0
    } else {
        uv / d
    }
}

fn snap_to_peak(x: &[f64], centre: usize, radius: usize, lo: usize, hi: usize) -> usize {
    let a = centre.saturating_sub(radius).max(lo);
    let b = (centre + radius).min(hi);
    let mut best = centre.clamp(a, b);
    for i in a..=b {
        if x[i] > x[best] {
            best = i;
        }
    }
    best
}

/// Segments the longest voiced run into fundamental periods.
pub fn segment_periods(rec: &VoiceRecording, contour: &F0Contour) -> Result<PeriodSegmentation> {
    segment_periods_with(rec, contour, &PitchConfig::default())
}

pub fn segment_periods_with(
    rec: &VoiceRecording,
    contour: &F0Contour,
    cfg: &PitchConfig,
) -> Result<PeriodSegmentation> {
    let fs = rec.sample_rate;
    let raw = &rec.samples;
    let smoothed = lowpass_zero_phase(raw, cfg.analysis_cutoff, fs);
    let x = &smoothed;
    let insufficient = |found| Error::InsufficientCycles {
        found,
        required: MIN_CYCLES,
    };
    let Some((first, last)) = contour.longest_voiced_run() else {
        return Err(insufficient(0));
    };
    let half_win = cfg.window_s / 2.0;
    let lo = ((contour.time(first) - half_win) * fs).floor().max(0.0) as usize;
    let hi = (((contour.time(last) + half_win) * fs).ceil() as usize).min(x.len() - 1);
    if hi <= lo + 2 {
        return Err(insufficient(0));
    }
    let min_lag = (fs / cfg.f_max).ceil() as usize;
    let max_lag = (fs / cfg.f_min).floor() as usize;
    let local_period = |pos: usize| -> Option<f64> {
        let t = pos as f64 / fs;
        let t = t.clamp(contour.time(first), contour.time(last));
        contour.f0_at(t).map(|f| fs / f)
    };

    let seed = (lo..=hi).fold(lo, |best, i| if raw[i] > raw[best] { i } else { best });
    let mut right = vec![seed];
    let mut prev_len: Option<usize> = None;
    loop {
        let b = *right.last().unwrap();
        let Some(t) = local_period(b) else { break };
        let len = t.round() as usize;
        let tmin = ((0.75 * t).round() as usize).max(min_lag);
        let tmax = ((1.25 * t).round() as usize).min(max_lag);
        if b + tmax + 1 > hi || tmin > tmax {
            break;
        }
        // cycle ending at the candidate vs the cycle ending at b
        let use_back = b >= len;
        let (mut best_tau, mut best_r) = (0, f64::NEG_INFINITY);
        for tau in tmin..=tmax {
            let r = if use_back {
                ncc(x, b - len, b + tau - len, len)
            } else if b + tau + len <= x.len() {
                ncc(x, b, b + tau, len)
            } else {
                continue;
            };
            if r > best_r {
                best_r = r;
                best_tau = tau;
            }
        }
        if best_tau == 0 || best_r < 0.3 {
            break;
        }
        let radius = ((0.1 * t).round() as usize).max(1);
        let c = snap_to_peak(raw, b + best_tau, radius, b + tmin, (b + tmax).min(hi));
        let d = c - b;
        if d < min_lag || d > max_lag || prev_len.is_some_and(|p| d * 2 < p || d > 2 * p) {
            break;
        }
        prev_len = Some(d);
        right.push(c);
    }

    let mut left: Vec<usize> = Vec::new();
    let mut prev_len = right.get(1).map(|r| r - seed);
    let mut b = seed;
    loop {
        let Some(t) = local_period(b) else { break };
        let len = t.round() as usize;
        let tmin = ((0.75 * t).round() as usize).max(min_lag);
        let tmax = ((1.25 * t).round() as usize).min(max_lag);
        if b < lo + tmax || tmin > tmax {
            break;
        }
        let use_fwd = b + len <= x.len();
        let (mut best_tau, mut best_r) = (0, f64::NEG_INFINITY);
        for tau in tmin..=tmax {
            let r = if use_fwd {
                ncc(x, b, b - tau, len)
            } else if b >= tau + len {
                ncc(x, b - len, b - tau - len, len)
            } else {
                continue;
            };
            if r > best_r {
                best_r = r;
                best_tau = tau;
            }
        }
        if best_tau == 0 || best_r < 0.3 {
            break;
        }
        let radius = ((0.1 * t).round() as usize).max(1);
        let c = snap_to_peak(raw, b - best_tau, radius, (b - tmax).max(lo), b - tmin);
        let d = b - c;
        if d < min_lag || d > max_lag || prev_len.is_some_and(|p| d * 2 < p || d > 2 * p) {
            break;
        }
        prev_len = Some(d);
        left.push(c);
        b = c;
    }

    left.reverse();
    left.extend(right);
    let boundaries = left;
    let cycles = boundaries.len().saturating_sub(1);
    if cycles < MIN_CYCLES {
        return Err(insufficient(cycles));
    }
    Ok(PeriodSegmentation::from_boundaries(raw, boundaries, fs))
}

/// Writes the contour and boundaries as tab-separated text for inspection.
pub fn write_debug(
    path: &Path,
    contour: &F0Contour,
    seg: Option<&PeriodSegmentation>,
) -> Result<()> {
    let mut out = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut text = String::from("# contour\ntime_s\tf0_hz\tvoiced\tstrength\n");
    for i in 0..contour.len() {
        text.push_str(&format!(
            "{:.4}\t{:.4}\t{}\t{:.4}\n",
            contour.time(i),
            contour.values[i],
            contour.voiced[i] as u8,
            contour.strength[i]
        ));
    }
    if let Some(seg) = seg {
        text.push_str("# periods\nboundary\tt0_s\tamplitude\n");
        for i in 0..seg.cycles() {
            text.push_str(&format!(
                "{}\t{:.7}\t{:.6}\n",
                seg.boundaries[i], seg.periods[i], seg.amplitudes[i]
            ));
        }
    }
    out.write_all(text.as_bytes())
        .map_err(|e| Error::io(path, e))
}
