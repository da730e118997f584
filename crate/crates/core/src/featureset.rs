//! The 131-column subject feature table: canonical names, assembly,
//! delimited-text I/O, standardization, the correlation survey and kernel
//! density exports.

use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::contour::ContourFeatures;
use crate::dataset::Label;
use crate::error::{Error, Result};
use crate::harmonics::{HarmonicFeatures, HARMONICS};
use crate::noise::NoiseFeatures;
use crate::perturb::PerturbationFeatures;
use crate::spectral::{PairSpectral, VowelSpectral, N_MFCC};

pub const VOWEL_BLOCK: usize = 64;
pub const FEATURE_COUNT: usize = 131;
/// Bumped whenever the canonical column order changes.
pub const FEATURE_SCHEMA_VERSION: u32 = 1;

fn vowel_names(suffix: &str) -> Vec<String> {
    let mut base: Vec<String> = [
        "J_loc", "J_ppq3", "J_ppq5", "J_ppq55", "S_loc", "S_apq3", "S_apq5", "S_apq11", "S_apq55",
        "DPF", "HNR", "GNE_mu", "GNE_sd", "PFR", "PPE", "PVI",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    base.extend((1..=HARMONICS).map(|p| format!("H{p}_mu")));
    base.extend((1..=HARMONICS).map(|p| format!("H{p}_sd")));
    base.extend((1..=HARMONICS).map(|p| format!("RelH{p}")));
    base.extend((1..=N_MFCC).map(|m| format!("MFCC{m}")));
    base.extend((1..=N_MFCC).map(|m| format!("dMFCC{m}")));
    base.into_iter().map(|n| format!("{n}_{suffix}")).collect()
}

/// Canonical feature names in table order.
pub fn feature_names() -> Vec<String> {
    let mut names = vowel_names("a");
    names.extend(vowel_names("i"));
    names.push("F2_i".into());
    names.push("d1".into());
    names.push("F2_conv".into());
    names
}

fn opt(v: Option<f64>) -> f64 {
    v.filter(|x| x.is_finite()).unwrap_or(f64::NAN)
}

/// Per-vowel results of every analysis stage; `None` marks a stage that
/// failed or was not applicable.
#[derive(Debug, Clone, Default)]
pub struct VowelFeatures {
    pub perturbation: Option<PerturbationFeatures>,
    pub hnr: Option<f64>,
    pub gne: Option<(f64, f64)>,
    pub pfr: Option<f64>,
    pub ppe: Option<f64>,
    pub pvi: Option<f64>,
    pub harmonics: Option<HarmonicFeatures>,
    pub spectral: Option<VowelSpectral>,
}

impl VowelFeatures {
    pub fn with_noise(mut self, n: NoiseFeatures) -> Self {
        self.hnr = Some(n.hnr);
        self.gne = Some((n.gne_mean, n.gne_sd));
        self
    }

    pub fn with_contour(mut self, c: ContourFeatures) -> Self {
        self.pfr = Some(c.pfr);
        self.ppe = Some(c.ppe);
        self.pvi = Some(c.pvi);
        self
    }

    /// The 64 per-vowel values in canonical order, `NaN` where missing.
    pub fn block(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(VOWEL_BLOCK);
        match &self.perturbation {
            Some(p) => out.extend(p.as_array().iter().map(|v| opt(*v))),
            None => out.extend([f64::NAN; 10]),
        }
        out.push(opt(self.hnr));
        out.push(opt(self.gne.map(|g| g.0)));
        out.push(opt(self.gne.map(|g| g.1)));
        out.push(opt(self.pfr));
        out.push(opt(self.ppe));
        out.push(opt(self.pvi));
        match &self.harmonics {
            Some(h) => {
                out.extend(h.h_mu.iter().map(|v| opt(Some(*v))));
                out.extend(h.h_sd.iter().map(|v| opt(Some(*v))));
                out.extend(h.rel_h.iter().map(|v| opt(Some(*v))));
            }
            None => out.extend([f64::NAN; 3 * HARMONICS]),
        }
        match &self.spectral {
            Some(s) => {
                out.extend(s.mfcc.iter().map(|v| opt(Some(*v))));
                out.extend(s.delta_mfcc.iter().map(|v| opt(Some(*v))));
            }
            None => out.extend([f64::NAN; 2 * N_MFCC]),
        }
        debug_assert_eq!(out.len(), VOWEL_BLOCK);
        out
    }
}

/// Canonical 131-vector from both vowels and the joint spectral features.
pub fn assemble(a: &VowelFeatures, i: &VowelFeatures, pair: Option<&PairSpectral>) -> Vec<f64> {
    let mut v = a.block();
    v.extend(i.block());
    v.push(opt(pair.and_then(|p| p.f2_i)));
    v.push(opt(pair.map(|p| p.d1)));
    v.push(opt(pair.and_then(|p| p.f2_conv)));
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTable {
    pub names: Vec<String>,
    pub subject_ids: Vec<String>,
    pub labels: Vec<Label>,
    /// One row per subject; `NaN` marks a missing value.
    pub rows: Vec<Vec<f64>>,
    pub standardized: bool,
}

impl FeatureTable {
    pub fn new(names: Vec<String>) -> Self {
        FeatureTable {
            names,
            subject_ids: Vec::new(),
            labels: Vec::new(),
            rows: Vec::new(),
            standardized: false,
        }
    }

    pub fn push(&mut self, subject_id: &str, label: Label, row: Vec<f64>) -> Result<()> {
        if row.len() != self.names.len() {
            return Err(Error::DimensionMismatch {
                expected: self.names.len(),
                actual: row.len(),
            });
        }
        self.subject_ids.push(subject_id.to_string());
        self.labels.push(label);
        self.rows.push(row);
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.names.len()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Column indices of `names`, in the given order.
    pub fn indices_of(&self, names: &[String]) -> Result<Vec<usize>> {
        names
            .iter()
            .map(|n| {
                self.index_of(n)
                    .ok_or_else(|| Error::InvalidInput(format!("unknown feature '{n}'")))
            })
            .collect()
    }

    pub fn select_columns(&self, idx: &[usize]) -> FeatureTable {
        FeatureTable {
            names: idx.iter().map(|&j| self.names[j].clone()).collect(),
            subject_ids: self.subject_ids.clone(),
            labels: self.labels.clone(),
            rows: self
                .rows
                .iter()
                .map(|r| idx.iter().map(|&j| r[j]).collect())
                .collect(),
            standardized: self.standardized,
        }
    }

    pub fn select_rows(&self, idx: &[usize]) -> FeatureTable {
        FeatureTable {
            names: self.names.clone(),
            subject_ids: idx.iter().map(|&i| self.subject_ids[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            standardized: self.standardized,
        }
    }

    pub fn missing_per_row(&self) -> Vec<usize> {
        self.rows
            .iter()
            .map(|r| r.iter().filter(|v| !v.is_finite()).count())
            .collect()
    }

    pub fn class_counts(&self) -> (usize, usize) {
        let als = self.labels.iter().filter(|l| l.is_positive()).count();
        (self.labels.len() - als, als)
    }

    pub fn is_canonical(&self) -> bool {
        self.names == feature_names()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(file)
    }

    pub fn write_to<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["subject_id".to_string(), "label".to_string()];
        header.extend(self.names.iter().cloned());
        wtr.write_record(&header)?;
        for ((id, label), row) in self.subject_ids.iter().zip(&self.labels).zip(&self.rows) {
            let mut rec = vec![id.clone(), label.as_u8().to_string()];
            rec.extend(row.iter().map(|v| {
                if v.is_finite() {
                    format!("{v}")
                } else {
                    "NA".into()
                }
            }));
            wtr.write_record(&rec)?;
        }
        wtr.flush().map_err(|e| Error::io("<feature table>", e))?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<FeatureTable> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(file)
    }

    pub fn read_from<R: std::io::Read>(r: R) -> Result<FeatureTable> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
        let header = rdr.headers()?.clone();
        if header.len() < 3 || &header[0] != "subject_id" || &header[1] != "label" {
            return Err(Error::Format(
                "header must start with subject_id,label followed by feature names".into(),
            ));
        }
        let mut table = FeatureTable::new(header.iter().skip(2).map(String::from).collect());
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let label = rec[1]
                .trim()
                .parse::<u8>()
                .ok()
                .and_then(Label::from_u8)
                .ok_or_else(|| Error::Format(format!("row {}: label must be 0 or 1", line + 2)))?;
            let row = rec
                .iter()
                .skip(2)
                .map(|s| match s.trim() {
                    "NA" | "" | "NaN" => Ok(f64::NAN),
                    t => t
                        .parse::<f64>()
                        .map_err(|_| Error::Format(format!("row {}: bad number '{t}'", line + 2))),
                })
                .collect::<Result<Vec<f64>>>()?;
            table.push(rec[0].trim(), label, row)?;
        }
        Ok(table)
    }
}

/// Per-feature mean imputation and z-scoring with parameters fitted on
/// training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    /// Features with zero spread, which are only centred.
    pub passthrough: Vec<bool>,
}

impl Standardizer {
    /// Fits on the given rows; missing values are ignored in the statistics.
    pub fn fit(rows: &[Vec<f64>]) -> Result<Standardizer> {
        let d = rows
            .first()
            .map(|r| r.len())
            .ok_or_else(|| Error::InvalidInput("cannot fit standardization on zero rows".into()))?;
        let mut mean = vec![0.0; d];
        let mut sd = vec![0.0; d];
        let mut passthrough = vec![false; d];
        for j in 0..d {
            let col: Vec<f64> = rows
                .iter()
                .map(|r| r[j])
                .filter(|v| v.is_finite())
                .collect();
            if col.is_empty() {
                passthrough[j] = true;
                continue;
            }
            let m = crate::dsp::mean(&col);
            let s = crate::dsp::std_population(&col);
            mean[j] = m;
            if s > 1e-12 * m.abs().max(1e-300) && s > 0.0 {
                sd[j] = s;
            } else {
                passthrough[j] = true;
            }
        }
        Ok(Standardizer {
            mean,
            sd,
            passthrough,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn transform_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: row.len(),
            });
        }
        Ok(row
            .iter()
            .enumerate()
            .map(|(j, &v)| {
                let v = if v.is_finite() { v } else { self.mean[j] };
                if self.passthrough[j] {
                    v - self.mean[j]
                } else {
                    (v - self.mean[j]) / self.sd[j]
                }
            })
            .collect())
    }

    pub fn transform_rows(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        rows.iter().map(|r| self.transform_row(r)).collect()
    }

    /// Applies the parameters to a raw table. A table that is already
    /// standardized is rejected.
    pub fn apply(&self, table: &FeatureTable) -> Result<FeatureTable> {
        if table.standardized {
            return Err(Error::InvalidInput(
                "feature table is already standardized".into(),
            ));
        }
        let mut out = table.clone();
        out.rows = self.transform_rows(&table.rows)?;
        out.standardized = true;
        Ok(out)
    }
}

/// Fits on all rows of `table` and returns the standardized table.
pub fn standardize(table: &FeatureTable) -> Result<(FeatureTable, Standardizer)> {
    let s = Standardizer::fit(&table.rows)?;
    Ok((s.apply(table)?, s))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyEntry {
    pub feature: String,
    pub r: f64,
    pub p: f64,
    pub n: usize,
    pub zero_variance: bool,
}

pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let mx = crate::dsp::mean(x);
    let my = crate::dsp::mean(y);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Two-sided p-value of a Pearson correlation via the t transform.
pub fn correlation_p_value(r: f64, n: usize) -> f64 {
    if n < 3 {
        return 1.0;
    }
    if r.abs() >= 1.0 {
        return 0.0;
    }
    let df = (n - 2) as f64;
    let t = r * (df / (1.0 - r * r)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("valid degrees of freedom");
    (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0)
}

pub fn p_threshold(p: f64) -> &'static str {
    if p < 0.001 {
        "<0.001"
    } else if p < 0.01 {
        "<0.01"
    } else if p < 0.05 {
        "<0.05"
    } else {
        "n.s."
    }
}

/// Pearson correlation of every feature with the labels, ranked by |r|.
/// Missing values are dropped pairwise.
pub fn correlation_survey(table: &FeatureTable) -> Result<Vec<SurveyEntry>> {
    let (hc, als) = table.class_counts();
    if table.n_rows() < 3 || hc == 0 || als == 0 {
        return Err(Error::DegenerateClass(format!(
            "survey needs at least 3 rows and both classes (HC={hc}, ALS={als})"
        )));
    }
    let y: Vec<f64> = table.labels.iter().map(|l| l.as_u8() as f64).collect();
    let mut entries: Vec<SurveyEntry> = (0..table.n_features())
        .map(|j| {
            let (xs, ys): (Vec<f64>, Vec<f64>) = table
                .rows
                .iter()
                .zip(&y)
                .filter(|(r, _)| r[j].is_finite())
                .map(|(r, l)| (r[j], *l))
                .unzip();
            let n = xs.len();
            match pearson(&xs, &ys) {
                Some(r) if n >= 3 => SurveyEntry {
                    feature: table.names[j].clone(),
                    r,
                    p: correlation_p_value(r, n),
                    n,
                    zero_variance: false,
                },
                _ => SurveyEntry {
                    feature: table.names[j].clone(),
                    r: 0.0,
                    p: 1.0,
                    n,
                    zero_variance: true,
                },
            }
        })
        .collect();
    entries.sort_by(|a, b| b.r.abs().partial_cmp(&a.r.abs()).unwrap());
    Ok(entries)
}

pub fn write_survey(path: &Path, entries: &[SurveyEntry]) -> Result<()> {
    let mut text = String::from("rank\tfeature\tr\tp\tp_threshold\tn\tzero_variance\n");
    for (k, e) in entries.iter().enumerate() {
        text.push_str(&format!(
            "{}\t{}\t{:.4}\t{:.3e}\t{}\t{}\t{}\n",
            k + 1,
            e.feature,
            e.r,
            e.p,
            p_threshold(e.p),
            e.n,
            e.zero_variance as u8
        ));
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Silverman's rule-of-thumb bandwidth.
pub fn silverman_bandwidth(x: &[f64]) -> f64 {
    let mut s = x.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let sd = crate::dsp::std_sample(x);
    let iqr = quantile(&s, 0.75) - quantile(&s, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    0.9 * spread * (x.len() as f64).powf(-0.2)
}

pub fn gaussian_kde(x: &[f64], bandwidth: f64, grid: &[f64]) -> Vec<f64> {
    let norm = 1.0 / (x.len() as f64 * bandwidth * (2.0 * std::f64::consts::PI).sqrt());
    grid.iter()
        .map(|g| {
            x.iter()
                .map(|xi| (-0.5 * ((g - xi) / bandwidth).powi(2)).exp())
                .sum::<f64>()
                * norm
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityCurves {
    pub grid: Vec<f64>,
    pub hc: Vec<f64>,
    pub als: Vec<f64>,
    pub bandwidth_hc: f64,
    pub bandwidth_als: f64,
}

pub const DENSITY_POINTS: usize = 200;

/// Per-class Gaussian KDE on a shared grid spanning the data range plus
/// three bandwidths on each side.
pub fn density_export(values: &[f64], labels: &[Label]) -> Result<DensityCurves> {
    let split = |positive: bool| -> Vec<f64> {
        values
            .iter()
            .zip(labels)
            .filter(|(v, l)| v.is_finite() && l.is_positive() == positive)
            .map(|(v, _)| *v)
            .collect()
    };
    let (hc, als) = (split(false), split(true));
    for (name, class) in [("HC", &hc), ("ALS", &als)] {
        if class.len() < 5 {
            return Err(Error::DegenerateClass(format!(
                "{name} has {} values, need at least 5 for a density estimate",
                class.len()
            )));
        }
    }
    let (bh, ba) = (silverman_bandwidth(&hc), silverman_bandwidth(&als));
    for (name, bw) in [("HC", bh), ("ALS", ba)] {
        if !(bw > 0.0) {
            return Err(Error::DegenerateClass(format!(
                "{name} values are all identical"
            )));
        }
    }
    let all = hc.iter().chain(&als);
    let lo = all.clone().cloned().fold(f64::INFINITY, f64::min) - 3.0 * bh.max(ba);
    let hi = all.cloned().fold(f64::NEG_INFINITY, f64::max) + 3.0 * bh.max(ba);
    let grid: Vec<f64> = (0..DENSITY_POINTS)
        .map(|k| lo + (hi - lo) * k as f64 / (DENSITY_POINTS - 1) as f64)
        .collect();
    Ok(DensityCurves {
        hc: gaussian_kde(&hc, bh, &grid),
        als: gaussian_kde(&als, ba, &grid),
        grid,
        bandwidth_hc: bh,
        bandwidth_als: ba,
    })
}

pub fn write_density(path: &Path, feature: &str, d: &DensityCurves) -> Result<()> {
    let mut text = format!("{feature}\tdensity_hc\tdensity_als\n");
    for k in 0..d.grid.len() {
        text.push_str(&format!(
            "{:.6e}\t{:.6e}\t{:.6e}\n",
            d.grid[k], d.hc[k], d.als[k]
        ));
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
