//! Cycle-to-cycle perturbation measures on period and amplitude sequences.
//! All results are percentages.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pitch::PeriodSegmentation;

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn local_perturbation(x: &[f64], what: &'static str) -> Result<f64> {
    if x.len() < 2 {
        return Err(Error::TooShort {
            what,
            required: 2,
            actual: x.len(),
        });
    }
    let diffs: f64 = x.windows(2).map(|w| (w[0] - w[1]).abs()).sum();
    Ok(diffs / (x.len() - 1) as f64 / mean(x) * 100.0)
}

/// Mean absolute deviation of each value from its centred `window`-point
/// moving average, relative to the overall mean.
fn perturbation_quotient(x: &[f64], window: usize, what: &'static str) -> Result<f64> {
    if window < 3 || window % 2 == 0 {
        return Err(Error::InvalidInput(format!(
            "perturbation window must be odd and at least 3, got {window}"
        )));
    }
    let n = x.len();
    if n < window {
        return Err(Error::TooShort {
            what,
            required: window,
            actual: n,
        });
    }
    let half = window / 2;
    let mut acc = 0.0;
    for i in half..n - half {
        let offset: f64 = x[i - half..=i + half].iter().map(|v| x[i] - v).sum();
        acc += (offset / window as f64).abs();
    }
    Ok(acc / (n - window + 1) as f64 / mean(x) * 100.0)
}

/// Local jitter: mean absolute difference of consecutive periods over the mean period.
pub fn jitter_local(periods: &[f64]) -> Result<f64> {
    local_perturbation(periods, "period sequence")
}

pub fn jitter_ppq(periods: &[f64], window: usize) -> Result<f64> {
    perturbation_quotient(periods, window, "period sequence")
}

pub fn shimmer_local(amplitudes: &[f64]) -> Result<f64> {
    local_perturbation(amplitudes, "amplitude sequence")
}

pub fn shimmer_apq(amplitudes: &[f64], window: usize) -> Result<f64> {
    perturbation_quotient(amplitudes, window, "amplitude sequence")
}

fn sign(v: f64) -> i32 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

/// Directional perturbation factor: percentage of direction changes in the
/// period-difference sequence, normalized by the number of periods.
pub fn dfp(periods: &[f64]) -> Result<f64> {
    let n = periods.len();
    if n < 3 {
        return Err(Error::TooShort {
            what: "period sequence",
            required: 3,
            actual: n,
        });
    }
    let signs: Vec<i32> = periods.windows(2).map(|w| sign(w[1] - w[0])).collect();
    let changes: i32 = signs.windows(2).map(|s| (s[1] - s[0]).abs()).sum();
    Ok(100.0 * (changes as f64 / 2.0) / n as f64)
}

/// Perturbation features of one recording. Windowed quotients are `None`
/// when the recording has fewer cycles than the window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationFeatures {
    pub j_loc: Option<f64>,
    pub j_ppq3: Option<f64>,
    pub j_ppq5: Option<f64>,
    pub j_ppq55: Option<f64>,
    pub s_loc: Option<f64>,
    pub s_apq3: Option<f64>,
    pub s_apq5: Option<f64>,
    pub s_apq11: Option<f64>,
    pub s_apq55: Option<f64>,
    pub dfp: Option<f64>,
}

impl PerturbationFeatures {
    pub fn from_segmentation(seg: &PeriodSegmentation) -> Self {
        let (t, a) = (&seg.periods, &seg.amplitudes);
        PerturbationFeatures {
            j_loc: jitter_local(t).ok(),
            j_ppq3: jitter_ppq(t, 3).ok(),
            j_ppq5: jitter_ppq(t, 5).ok(),
            j_ppq55: jitter_ppq(t, 55).ok(),
            s_loc: shimmer_local(a).ok(),
            s_apq3: shimmer_apq(a, 3).ok(),
            s_apq5: shimmer_apq(a, 5).ok(),
            s_apq11: shimmer_apq(a, 11).ok(),
            s_apq55: shimmer_apq(a, 55).ok(),
            dfp: dfp(t).ok(),
        }
    }

    pub fn as_array(&self) -> [Option<f64>; 10] {
        [
            self.j_loc,
            self.j_ppq3,
            self.j_ppq5,
            self.j_ppq55,
            self.s_loc,
            self.s_apq3,
            self.s_apq5,
            self.s_apq11,
            self.s_apq55,
            self.dfp,
        ]
    }
}
