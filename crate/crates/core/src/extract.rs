//! Per-recording feature extraction across a corpus, with a log of what
//! each recording went through.

use std::fmt::Write as _;
use std::path::Path;

use log::{debug, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contour::{pfr, ppe, pvi};
use crate::dataset::{
    decode_recording, trim_silence, CorpusManifest, Label, TrimDecision, VoiceRecording, Vowel,
};
use crate::error::{Error, Result};
use crate::featureset::{assemble, feature_names, FeatureTable, VowelFeatures};
use crate::harmonics::harmonic_profile;
use crate::noise::{gne, hnr};
use crate::perturb::PerturbationFeatures;
use crate::pitch::{segment_periods, track_f0};
use crate::spectral::{pair_spectral, vowel_spectral};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingLog {
    pub subject_id: String,
    pub vowel: Vowel,
    pub trim_start: usize,
    pub trim_end: usize,
    pub original_len: usize,
    pub duration_s: f64,
    /// Fraction of voiced contour frames, `None` if tracking failed.
    pub voicing_rate: Option<f64>,
    pub cycles: Option<usize>,
    /// `stage: message` for every stage that failed.
    pub failures: Vec<String>,
    pub missing: usize,
}

impl RecordingLog {
    fn new(rec: &VoiceRecording, trim: &TrimDecision) -> Self {
        RecordingLog {
            subject_id: rec.subject_id.clone(),
            vowel: rec.vowel,
            trim_start: trim.start,
            trim_end: trim.end,
            original_len: trim.original_len,
            duration_s: rec.duration(),
            voicing_rate: None,
            cycles: None,
            failures: Vec::new(),
            missing: 0,
        }
    }

    fn record<T>(&mut self, stage: &str, r: Result<T>) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                debug!("{} /{}/ {stage}: {e}", self.subject_id, self.vowel.suffix());
                self.failures.push(format!("{stage}: {e}"));
                None
            }
        }
    }
}

/// Runs every analysis stage on a trimmed recording. Failing stages leave
/// their features missing and are noted in the log.
pub fn analyse_recording(raw: &VoiceRecording) -> (VowelFeatures, RecordingLog) {
    let (rec, trim) = trim_silence(raw);
    let mut log = RecordingLog::new(&rec, &trim);
    let mut f = VowelFeatures::default();
    if let Some(contour) = log.record("pitch", track_f0(&rec)) {
        log.voicing_rate = Some(contour.voiced_fraction());
        f.hnr = log.record("hnr", hnr(&rec, &contour));
        f.pfr = log.record("pfr", pfr(&contour));
        f.ppe = log.record("ppe", ppe(&contour));
        f.pvi = log.record("pvi", pvi(&contour));
        if let Some(seg) = log.record("periods", segment_periods(&rec, &contour)) {
            log.cycles = Some(seg.cycles());
            f.perturbation = Some(PerturbationFeatures::from_segmentation(&seg));
            f.harmonics = log.record("harmonics", harmonic_profile(&rec.samples, &seg));
        }
    }
    f.gne = log.record("gne", gne(&rec));
    f.spectral = log.record("spectral", vowel_spectral(&rec));
    log.missing = f.block().iter().filter(|v| v.is_nan()).count();
    (f, log)
}

/// The 131-value row of one subject plus the logs of both recordings.
pub fn extract_pair(a: &VoiceRecording, i: &VoiceRecording) -> (Vec<f64>, [RecordingLog; 2]) {
    let (fa, mut la) = analyse_recording(a);
    let (fi, mut li) = analyse_recording(i);
    let pair = match (&fa.spectral, &fi.spectral) {
        (Some(sa), Some(si)) => li.record("pair-spectral", pair_spectral(sa, si)),
        _ => None,
    };
    let row = assemble(&fa, &fi, pair.as_ref());
    let joint_missing = row[row.len() - 3..].iter().filter(|v| v.is_nan()).count();
    la.missing = row[..row.len() / 2].iter().filter(|v| v.is_nan()).count();
    li.missing += joint_missing;
    (row, [la, li])
}

#[derive(Debug, Clone)]
pub struct Extraction {
    pub table: FeatureTable,
    pub logs: Vec<RecordingLog>,
}

/// Extracts all subjects in parallel; rows follow the order of `subjects`.
pub fn extract_subjects(
    subjects: Vec<(String, Label, VoiceRecording, VoiceRecording)>,
) -> Result<Extraction> {
    if subjects.is_empty() {
        return Err(Error::InvalidInput("no subjects to extract".into()));
    }
    let results: Vec<(Vec<f64>, [RecordingLog; 2])> = subjects
        .par_iter()
        .map(|(_, _, a, i)| extract_pair(a, i))
        .collect();
    let mut table = FeatureTable::new(feature_names());
    let mut logs = Vec::with_capacity(2 * results.len());
    for ((id, label, _, _), (row, pair_logs)) in subjects.iter().zip(results) {
        let missing = row.iter().filter(|v| v.is_nan()).count();
        if missing > 0 {
            warn!("{id}: {missing} feature(s) missing");
        }
        table.push(id, *label, row)?;
        logs.extend(pair_logs);
    }
    Ok(Extraction { table, logs })
}

/// Decodes every recording of the manifest (a decode failure aborts) and
/// extracts the feature table.
pub fn extract_corpus(manifest: &CorpusManifest) -> Result<Extraction> {
    let decoded: Vec<VoiceRecording> = manifest
        .entries
        .par_iter()
        .map(decode_recording)
        .collect::<Result<_>>()?;
    let subjects = manifest
        .subjects
        .iter()
        .map(|s| {
            (
                s.subject_id.clone(),
                s.label,
                decoded[s.a].clone(),
                decoded[s.i].clone(),
            )
        })
        .collect();
    extract_subjects(subjects)
}

pub fn render_logs(logs: &[RecordingLog]) -> String {
    let mut s = String::from("subject_id\tvowel\ttrim_start\ttrim_end\toriginal_len\tduration_s\tvoicing_rate\tcycles\tmissing\tfailures\n");
    for l in logs {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{:.4}\t{}\t{}\t{}\t{}",
            l.subject_id,
            l.vowel.suffix(),
            l.trim_start,
            l.trim_end,
            l.original_len,
            l.duration_s,
            l.voicing_rate
                .map(|v| format!("{v:.4}"))
                .unwrap_or_else(|| "NA".into()),
            l.cycles
                .map(|c| c.to_string())
                .unwrap_or_else(|| "NA".into()),
            l.missing,
            l.failures.join("; ").replace('\t', " "),
        );
    }
    s
}

pub fn write_logs(path: &Path, logs: &[RecordingLog]) -> Result<()> {
    std::fs::write(path, render_logs(logs)).map_err(|e| Error::io(path, e))
}
