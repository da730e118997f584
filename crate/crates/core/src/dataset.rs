//! Corpus manifests, WAV decoding, silence trimming and resampling.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::dsp::{kaiser_at, sinc};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Vowel {
    A,
    I,
}

impl Vowel {
    pub fn suffix(self) -> &'static str {
        match self {
            Vowel::A => "a",
            Vowel::I => "i",
        }
    }

    pub fn parse(s: &str) -> Option<Vowel> {
        match s.trim().to_ascii_lowercase().as_str() {
            "a" | "/a/" => Some(Vowel::A),
            "i" | "/i/" => Some(Vowel::I),
            _ => None,
        }
    }
}

impl fmt::Display for Vowel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.suffix())
    }
}

/// Binary diagnosis label. `Als` is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Hc = 0,
    Als = 1,
}

impl Label {
    pub fn from_u8(v: u8) -> Option<Label> {
        match v {
            0 => Some(Label::Hc),
            1 => Some(Label::Als),
            _ => None,
        }
    }

    pub fn as_u8(self) -> u8 {
        self as u8
    }

    pub fn is_positive(self) -> bool {
        self == Label::Als
    }
}

#[derive(Debug, Clone)]
pub struct VoiceRecording {
    pub samples: Vec<f64>,
    pub sample_rate: f64,
    pub subject_id: String,
    pub vowel: Vowel,
    pub label: Label,
}

impl VoiceRecording {
    pub fn new(
        samples: Vec<f64>,
        sample_rate: f64,
        subject_id: impl Into<String>,
        vowel: Vowel,
        label: Label,
    ) -> Self {
        VoiceRecording {
            samples,
            sample_rate,
            subject_id: subject_id.into(),
            vowel,
            label,
        }
    }

    /// Unlabelled recording for synthetic analysis.
    pub fn from_samples(samples: Vec<f64>, sample_rate: f64) -> Self {
        VoiceRecording::new(samples, sample_rate, "synthetic", Vowel::A, Label::Hc)
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    pub fn with_samples(&self, samples: Vec<f64>, sample_rate: f64) -> Self {
        VoiceRecording {
            samples,
            sample_rate,
            subject_id: self.subject_id.clone(),
            vowel: self.vowel,
            label: self.label,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub subject_id: String,
    pub vowel: Vowel,
    pub label: Label,
    pub path: PathBuf,
}

/// Both recordings of one subject, as indices into `CorpusManifest::entries`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubjectPair {
    pub subject_id: String,
    pub label: Label,
    pub a: usize,
    pub i: usize,
}

#[derive(Debug, Clone, Default)]
pub struct CorpusManifest {
    pub entries: Vec<ManifestEntry>,
    pub subjects: Vec<SubjectPair>,
}

impl CorpusManifest {
    /// Validates the pairing invariant and groups entries by subject, in
    /// order of first appearance.
    pub fn from_entries(entries: Vec<ManifestEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Manifest("no entries".into()));
        }
        let mut order: Vec<String> = Vec::new();
        let mut slots: HashMap<String, (Option<usize>, Option<usize>)> = HashMap::new();
        for (idx, e) in entries.iter().enumerate() {
            let slot = slots.entry(e.subject_id.clone()).or_insert_with(|| {
                order.push(e.subject_id.clone());
                (None, None)
            });
            let target = match e.vowel {
                Vowel::A => &mut slot.0,
                Vowel::I => &mut slot.1,
            };
            if target.is_some() {
                return Err(Error::Manifest(format!(
                    "subject {} has more than one /{}/ recording",
                    e.subject_id, e.vowel
                )));
            }
            *target = Some(idx);
        }
        let mut subjects = Vec::with_capacity(order.len());
        for id in order {
            let (a, i) = slots[&id];
            let (a, i) = match (a, i) {
                (Some(a), Some(i)) => (a, i),
                (None, _) => {
                    return Err(Error::Manifest(format!(
                        "subject {id} is missing its /a/ recording"
                    )))
                }
                (_, None) => {
                    return Err(Error::Manifest(format!(
                        "subject {id} is missing its /i/ recording"
                    )))
                }
            };
            if entries[a].label != entries[i].label {
                return Err(Error::Manifest(format!(
                    "subject {id} has conflicting labels on /a/ and /i/"
                )));
            }
            subjects.push(SubjectPair {
                subject_id: id,
                label: entries[a].label,
                a,
                i,
            });
        }
        Ok(CorpusManifest { entries, subjects })
    }

    /// Subject counts as `(hc, als)`.
    pub fn class_counts(&self) -> (usize, usize) {
        let als = self
            .subjects
            .iter()
            .filter(|s| s.label == Label::Als)
            .count();
        (self.subjects.len() - als, als)
    }

    /// Keeps only the listed subjects, preserving manifest order.
    pub fn restrict_to(&self, subject_ids: &[String]) -> Result<Self> {
        let keep: std::collections::HashSet<&str> =
            subject_ids.iter().map(String::as_str).collect();
        let entries: Vec<ManifestEntry> = self
            .entries
            .iter()
            .filter(|e| keep.contains(e.subject_id.as_str()))
            .cloned()
            .collect();
        CorpusManifest::from_entries(entries)
    }
}

fn detect_delimiter(header: &str) -> u8 {
    [b'\t', b';', b',']
        .into_iter()
        .max_by_key(|d| header.bytes().filter(|b| b == d).count())
        .filter(|d| header.as_bytes().contains(d))
        .unwrap_or(b',')
}

/// Parses a manifest (`subject_id, vowel, label, path` with a header row).
/// Relative paths resolve against the manifest's directory. Every referenced
/// file must exist and be 16-bit linear PCM WAV with one or two channels.
pub fn load_corpus(manifest_path: &Path) -> Result<CorpusManifest> {
    let text = fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let entries = parse_manifest(&text, base)?;
    for e in &entries {
        if !e.path.exists() {
            return Err(Error::Manifest(format!(
                "audio file not found: {}",
                e.path.display()
            )));
        }
        check_wav_header(&e.path)?;
    }
    let manifest = CorpusManifest::from_entries(entries)?;
    let (hc, als) = manifest.class_counts();
    info!(
        "corpus: {} subjects ({} ALS, {} HC), {} recordings",
        manifest.subjects.len(),
        als,
        hc,
        manifest.entries.len()
    );
    Ok(manifest)
}

pub fn parse_manifest(text: &str, base: &Path) -> Result<Vec<ManifestEntry>> {
    let first = text.lines().next().unwrap_or("");
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(detect_delimiter(first))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim_start_matches('\u{feff}').to_ascii_lowercase())
        .collect();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Manifest(format!("missing column `{name}` in header")))
    };
    let (c_id, c_vowel, c_label, c_path) = (
        col("subject_id")?,
        col("vowel")?,
        col("label")?,
        col("path")?,
    );
    let mut entries = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let field = |c: usize| record.get(c).unwrap_or("").to_string();
        let row = line + 2;
        let vowel = Vowel::parse(&field(c_vowel))
            .ok_or_else(|| Error::Manifest(format!("row {row}: vowel must be `a` or `i`")))?;
        let label = field(c_label)
            .parse::<u8>()
            .ok()
            .and_then(Label::from_u8)
            .ok_or_else(|| Error::Manifest(format!("row {row}: label must be 0 or 1")))?;
        let subject_id = field(c_id);
        if subject_id.is_empty() {
            return Err(Error::Manifest(format!("row {row}: empty subject_id")));
        }
        let raw = PathBuf::from(field(c_path));
        let path = if raw.is_absolute() {
            raw
        } else {
            base.join(raw)
        };
        entries.push(ManifestEntry {
            subject_id,
            vowel,
            label,
            path,
        });
    }
    if entries.is_empty() {
        return Err(Error::Manifest("no entries".into()));
    }
    Ok(entries)
}

pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let base = path.parent().unwrap_or(Path::new("."));
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["subject_id", "vowel", "label", "path"])?;
    for e in entries {
        let rel = e.path.strip_prefix(base).unwrap_or(&e.path);
        w.write_record([
            e.subject_id.as_str(),
            e.vowel.suffix(),
            &e.label.as_u8().to_string(),
            &rel.to_string_lossy(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn check_wav_header(path: &Path) -> Result<hound::WavSpec> {
    let reader = hound::WavReader::open(path).map_err(|e| audio_error(path, e))?;
    let spec = reader.spec();
    validate_spec(path, spec)?;
    Ok(spec)
}

fn validate_spec(path: &Path, spec: hound::WavSpec) -> Result<()> {
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::Audio {
            path: path.to_path_buf(),
            reason: format!(
                "expected 16-bit linear PCM, found {:?} {}-bit",
                spec.sample_format, spec.bits_per_sample
            ),
        });
    }
    if !(1..=2).contains(&spec.channels) {
        return Err(Error::Audio {
            path: path.to_path_buf(),
            reason: format!("expected 1 or 2 channels, found {}", spec.channels),
        });
    }
    if spec.sample_rate == 0 {
        return Err(Error::Audio {
            path: path.to_path_buf(),
            reason: "zero sample rate".into(),
        });
    }
    Ok(())
}

fn audio_error(path: &Path, e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::Audio {
            path: path.to_path_buf(),
            reason: other.to_string(),
        },
    }
}

/// Decodes a 16-bit PCM WAV into a mono recording scaled by `1/2^15`.
/// Stereo input is averaged across channels.
pub fn decode_recording(entry: &ManifestEntry) -> Result<VoiceRecording> {
    let path = &entry.path;
    let mut reader = hound::WavReader::open(path).map_err(|e| audio_error(path, e))?;
    let spec = reader.spec();
    validate_spec(path, spec)?;
    let raw: Vec<i16> = reader
        .samples::<i16>()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| audio_error(path, e))?;
    let channels = spec.channels as usize;
    let samples: Vec<f64> = raw
        .chunks_exact(channels)
        .map(|frame| frame.iter().map(|&s| s as f64).sum::<f64>() / (channels as f64 * 32768.0))
        .collect();
    if samples.is_empty() {
        return Err(Error::Audio {
            path: path.clone(),
            reason: "zero-length audio".into(),
        });
    }
    Ok(VoiceRecording::new(
        samples,
        spec.sample_rate as f64,
        entry.subject_id.clone(),
        entry.vowel,
        entry.label,
    ))
}

/// Writes interleaved 16-bit PCM. Values are scaled by `2^15` and saturated.
pub fn write_wav_i16(path: &Path, channels: &[Vec<f64>], sample_rate: u32) -> Result<()> {
    let spec = hound::WavSpec {
        channels: channels.len() as u16,
        sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(path, spec).map_err(|e| audio_error(path, e))?;
    let n = channels.iter().map(Vec::len).min().unwrap_or(0);
    for i in 0..n {
        for ch in channels {
            let v = (ch[i] * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
            w.write_sample(v).map_err(|e| audio_error(path, e))?;
        }
    }
    w.finalize().map_err(|e| audio_error(path, e))?;
    Ok(())
}

/// Outcome of leading/trailing silence removal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrimDecision {
    pub start: usize,
    pub end: usize,
    pub original_len: usize,
}

impl TrimDecision {
    pub fn trimmed(&self) -> bool {
        self.start > 0 || self.end < self.original_len
    }
}

pub const TRIM_THRESHOLD_DBFS: f64 = -40.0;
pub const TRIM_HANGOVER_S: f64 = 0.2;

/// Removes leading and trailing segments whose 10 ms RMS level stays below
/// -40 dBFS, keeping a 200 ms hangover on each side. A recording with no
/// frame above threshold is returned untouched.
pub fn trim_silence(rec: &VoiceRecording) -> (VoiceRecording, TrimDecision) {
    let n = rec.samples.len();
    let frame = ((0.01 * rec.sample_rate).round() as usize).max(1);
    let threshold = 10f64.powf(TRIM_THRESHOLD_DBFS / 20.0);
    let loud: Vec<usize> = rec
        .samples
        .chunks(frame)
        .enumerate()
        .filter(|(_, c)| {
            (c.iter().map(|v| v * v).sum::<f64>() / c.len() as f64).sqrt() >= threshold
        })
        .map(|(i, _)| i)
        .collect();
    let untouched = TrimDecision {
        start: 0,
        end: n,
        original_len: n,
    };
    let (Some(&first), Some(&last)) = (loud.first(), loud.last()) else {
        return (rec.clone(), untouched);
    };
    let hang = (TRIM_HANGOVER_S * rec.sample_rate).round() as usize;
    let start = (first * frame).saturating_sub(hang);
    let end = ((last + 1) * frame + hang).min(n);
    let decision = TrimDecision {
        start,
        end,
        original_len: n,
    };
    (
        rec.with_samples(rec.samples[start..end].to_vec(), rec.sample_rate),
        decision,
    )
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

const RESAMPLE_ZERO_CROSSINGS: f64 = 24.0;
const RESAMPLE_BETA: f64 = 10.0;
const RESAMPLE_CUTOFF: f64 = 0.45;

/// Windowed-sinc resampler with cutoff at `0.45 * min(source, target)` rate.
/// Rational rate pairs with a modest interpolation factor use a precomputed
/// polyphase table; other pairs evaluate the kernel directly.
pub fn resample(rec: &VoiceRecording, target_rate: f64) -> Result<VoiceRecording> {
    if !(target_rate > 0.0) || !target_rate.is_finite() {
        return Err(Error::InvalidInput(format!(
            "target rate must be positive, got {target_rate}"
        )));
    }
    if (target_rate - rec.sample_rate).abs() < 1e-9 {
        return Ok(rec.clone());
    }
    let samples = resample_samples(&rec.samples, rec.sample_rate, target_rate);
    Ok(rec.with_samples(samples, target_rate))
}

pub fn resample_samples(x: &[f64], source_rate: f64, target_rate: f64) -> Vec<f64> {
    let ratio = target_rate / source_rate;
    let out_len = (x.len() as f64 * ratio).round() as usize;
    // cutoff relative to the input Nyquist frequency
    let cutoff = 2.0 * RESAMPLE_CUTOFF * source_rate.min(target_rate) / source_rate;
    let half_width = RESAMPLE_ZERO_CROSSINGS / cutoff;
    let taps = 2 * half_width.ceil() as usize + 2;
    let kernel = |d: f64| cutoff * sinc(cutoff * d) * kaiser_at(d / half_width, RESAMPLE_BETA);

    let (src, tgt) = (source_rate.round() as u64, target_rate.round() as u64);
    let integral =
        (source_rate - src as f64).abs() < 1e-9 && (target_rate - tgt as f64).abs() < 1e-9;
    let up = if integral {
        tgt / gcd(src, tgt)
    } else {
        u64::MAX
    };
    let down = if integral { src / gcd(src, tgt) } else { 0 };

    if up <= 4096 {
        // output n sits at input position n*down/up = base + phase/up
        let phases: Vec<Vec<f64>> = (0..up)
            .map(|p| {
                let frac = p as f64 / up as f64;
                (0..taps)
                    .map(|j| {
                        let k = j as f64 - (taps / 2) as f64 + 1.0;
                        kernel(frac - k)
                    })
                    .collect()
            })
            .collect();
        (0..out_len)
            .map(|n| {
                let pos = n as u64 * down;
                let base = (pos / up) as isize;
                let table = &phases[(pos % up) as usize];
                let mut acc = 0.0;
                for (j, h) in table.iter().enumerate() {
                    let k = base + j as isize - (taps / 2) as isize + 1;
                    if k >= 0 && (k as usize) < x.len() {
                        acc += h * x[k as usize];
                    }
                }
                acc
            })
            .collect()
    } else {
        (0..out_len)
            .map(|n| {
                let t = n as f64 / ratio;
                let lo = (t - half_width).ceil().max(0.0) as usize;
                let hi = ((t + half_width).floor() as isize).min(x.len() as isize - 1);
                (lo as isize..=hi)
                    .map(|k| x[k as usize] * kernel(t - k as f64))
                    .sum()
            })
            .collect()
    }
}

/// Subject codes of the ALS group in the public Minsk ALS voice database.
pub const MINSK_ALS_SUBJECTS: [&str; 31] = [
    "008", "020", "021", "022", "024", "025", "027", "028", "031", "032", "039", "042", "046",
    "048", "052", "055", "058", "062", "064", "068", "072", "076", "078", "080", "084", "092",
    "094", "096", "098", "100", "102",
];

/// ALS subjects of that database diagnosed less than a year before recording.
pub const EARLY_ALS_SUBJECTS: [&str; 12] = [
    "022", "025", "028", "031", "039", "046", "055", "058", "068", "072", "076", "078",
];

fn label_from_path(rel: &Path) -> Option<Label> {
    for comp in rel.components() {
        let c = comp.as_os_str().to_string_lossy().to_ascii_lowercase();
        let tokens: Vec<&str> = c.split(|ch: char| !ch.is_ascii_alphanumeric()).collect();
        if tokens
            .iter()
            .any(|t| *t == "als" || *t == "patients" || *t == "patient")
        {
            return Some(Label::Als);
        }
        if tokens.iter().any(|t| {
            matches!(
                *t,
                "hc" | "healthy" | "control" | "controls" | "norm" | "normal"
            )
        }) {
            return Some(Label::Hc);
        }
    }
    None
}

/// Builds manifest entries from a directory tree of `<subject>_<vowel>.wav`
/// style files. The subject id is the first digit run in the file stem (or
/// the parent directory name); the vowel is a standalone `a`/`i` token.
/// Labels come from an `ALS`/`HC` path component when present, otherwise
/// from membership in `als_ids`.
pub fn import_directory(root: &Path, als_ids: &[&str]) -> Result<Vec<ManifestEntry>> {
    let digits = regex::Regex::new(r"\d+").expect("static regex");
    let mut files = Vec::new();
    collect_wavs(root, &mut files)?;
    files.sort();
    let mut entries = Vec::new();
    for path in files {
        let rel = path.strip_prefix(root).unwrap_or(&path).to_path_buf();
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().to_string())
            .unwrap_or_default();
        let parent = rel
            .parent()
            .and_then(|p| p.file_name())
            .map(|s| s.to_string_lossy().to_string())
            .unwrap_or_default();
        let id = digits
            .find(&stem)
            .or_else(|| digits.find(&parent))
            .map(|m| m.as_str().to_string());
        let vowel = stem
            .split(|c: char| !c.is_ascii_alphanumeric())
            .find_map(Vowel::parse);
        let (Some(subject_id), Some(vowel)) = (id, vowel) else {
            warn!(
                "skipping {}: cannot infer subject id and vowel",
                rel.display()
            );
            continue;
        };
        let label = label_from_path(rel.parent().unwrap_or(Path::new(""))).unwrap_or_else(|| {
            if als_ids.contains(&subject_id.as_str()) {
                Label::Als
            } else {
                Label::Hc
            }
        });
        entries.push(ManifestEntry {
            subject_id,
            vowel,
            label,
            path,
        });
    }
    // stable subject-major order
    let mut grouped: BTreeMap<(String, Vowel), ManifestEntry> = BTreeMap::new();
    for e in entries {
        grouped.insert((e.subject_id.clone(), e.vowel), e);
    }
    let entries: Vec<ManifestEntry> = grouped.into_values().collect();
    if entries.is_empty() {
        return Err(Error::Manifest(format!(
            "no recognizable recordings under {}",
            root.display()
        )));
    }
    Ok(entries)
}

fn collect_wavs(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if path.is_dir() {
            collect_wavs(&path, out)?;
        } else if path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("wav"))
        {
            out.push(path);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn entry(id: &str, vowel: Vowel, label: Label) -> ManifestEntry {
        ManifestEntry {
            subject_id: id.into(),
            vowel,
            label,
            path: PathBuf::from(format!("{id}_{vowel}.wav")),
        }
    }

    #[test]
    fn empty_manifest_is_rejected() {
        let err = parse_manifest("subject_id,vowel,label,path\n", Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("no entries"));
        let err = CorpusManifest::from_entries(vec![]).unwrap_err();
        assert!(err.to_string().contains("no entries"));
    }

    #[test]
    fn unpaired_subject_is_named() {
        let entries = vec![
            entry("001", Vowel::A, Label::Hc),
            entry("001", Vowel::I, Label::Hc),
            entry("002", Vowel::A, Label::Als),
        ];
        let err = CorpusManifest::from_entries(entries).unwrap_err();
        assert!(err.to_string().contains("002"), "{err}");
    }

    #[test]
    fn conflicting_labels_rejected() {
        let entries = vec![
            entry("001", Vowel::A, Label::Hc),
            entry("001", Vowel::I, Label::Als),
        ];
        assert!(CorpusManifest::from_entries(entries).is_err());
    }

    #[test]
    fn manifest_parses_tab_delimited_and_counts() {
        let text = "subject_id\tvowel\tlabel\tpath\n\
                    001\ta\t0\tx/001_a.wav\n001\ti\t0\tx/001_i.wav\n\
                    002\tA\t1\tx/002_a.wav\n002\tI\t1\tx/002_i.wav\n";
        let entries = parse_manifest(text, Path::new("/data")).unwrap();
        assert_eq!(entries[0].path, PathBuf::from("/data/x/001_a.wav"));
        let m = CorpusManifest::from_entries(entries).unwrap();
        assert_eq!(m.class_counts(), (1, 1));
        assert_eq!(m.subjects[1].subject_id, "002");
    }

    #[test]
    fn bad_label_rejected() {
        let text = "subject_id,vowel,label,path\n001,a,2,x.wav\n";
        assert!(parse_manifest(text, Path::new(".")).is_err());
    }

    #[test]
    fn decode_scaling_and_stereo_average() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.wav");
        write_wav_i16(&p, &[vec![32767.0 / 32768.0, 0.0, -1.0]], 44100).unwrap();
        let rec = decode_recording(&ManifestEntry {
            subject_id: "s".into(),
            vowel: Vowel::A,
            label: Label::Hc,
            path: p,
        })
        .unwrap();
        assert_eq!(rec.samples, vec![32767.0 / 32768.0, 0.0, -1.0]);
        assert_eq!(rec.sample_rate, 44100.0);

        let p = dir.path().join("s.wav");
        let x: Vec<f64> = (0..100).map(|i| (i as f64 * 0.1).sin() * 0.5).collect();
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        write_wav_i16(&p, &[x, neg], 8000).unwrap();
        let rec = decode_recording(&ManifestEntry {
            subject_id: "s".into(),
            vowel: Vowel::I,
            label: Label::Als,
            path: p,
        })
        .unwrap();
        assert!(rec.samples.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn decode_rejects_zero_length_and_float() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("empty.wav");
        write_wav_i16(&p, &[vec![]], 44100).unwrap();
        let e = ManifestEntry {
            subject_id: "s".into(),
            vowel: Vowel::A,
            label: Label::Hc,
            path: p,
        };
        assert!(decode_recording(&e)
            .unwrap_err()
            .to_string()
            .contains("zero-length"));

        let p = dir.path().join("float.wav");
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 8000,
            bits_per_sample: 32,
            sample_format: hound::SampleFormat::Float,
        };
        let mut w = hound::WavWriter::create(&p, spec).unwrap();
        w.write_sample(0.5f32).unwrap();
        w.finalize().unwrap();
        assert!(matches!(check_wav_header(&p), Err(Error::Audio { .. })));

        let p = dir.path().join("junk.wav");
        fs::write(&p, b"not a wave file").unwrap();
        assert!(check_wav_header(&p).is_err());
    }

    #[test]
    fn three_second_file_sample_count() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.wav");
        write_wav_i16(&p, &[vec![0.1; 132_300]], 44100).unwrap();
        let rec = decode_recording(&ManifestEntry {
            subject_id: "s".into(),
            vowel: Vowel::A,
            label: Label::Hc,
            path: p,
        })
        .unwrap();
        assert_eq!(rec.samples.len(), 132_300);
        assert!((rec.duration() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn resample_length_and_identity() {
        let n = (4.41 * 44100.0) as usize;
        let rec = VoiceRecording::from_samples(vec![0.0; n], 44100.0);
        let out = resample(&rec, 8000.0).unwrap();
        assert!((out.samples.len() as i64 - 35280).abs() <= 1);
        let same = resample(&rec, 44100.0).unwrap();
        assert_eq!(same.samples, rec.samples);
        assert!(resample(&rec, 0.0).is_err());
    }

    fn peak_frequency(x: &[f64], fs: f64) -> f64 {
        let n = x.len().next_power_of_two() * 4;
        let fft = crate::dsp::FftPair::new(n);
        let spec = fft.forward_real(x);
        let (k, _) = spec[..n / 2]
            .iter()
            .enumerate()
            .map(|(k, c)| (k, c.norm()))
            .fold(
                (0, 0.0),
                |best, cur| if cur.1 > best.1 { cur } else { best },
            );
        k as f64 * fs / n as f64
    }

    #[test]
    fn resample_preserves_tone_frequency() {
        let x: Vec<f64> = (0..44100 * 2)
            .map(|n| (2.0 * PI * 100.0 * n as f64 / 44100.0).sin() * 0.5)
            .collect();
        let rec = VoiceRecording::from_samples(x, 44100.0);
        let out = resample(&rec, 8000.0).unwrap();
        let f = peak_frequency(&out.samples, 8000.0);
        assert!((f - 100.0).abs() <= 1.0, "{f}");
    }

    #[test]
    fn resample_attenuates_aliasing_components() {
        // a 6 kHz tone is above the 3.6 kHz cutoff for 8 kHz output
        let x: Vec<f64> = (0..44100)
            .map(|n| (2.0 * PI * 6000.0 * n as f64 / 44100.0).sin())
            .collect();
        let out = resample_samples(&x, 44100.0, 8000.0);
        let rms = (out[200..out.len() - 200].iter().map(|v| v * v).sum::<f64>()
            / (out.len() - 400) as f64)
            .sqrt();
        assert!(rms < 1e-3, "{rms}");
    }

    #[test]
    fn trim_removes_silent_edges_with_hangover() {
        let fs = 8000.0;
        let mut x = vec![0.0; 8000];
        x.extend((0..16000).map(|n| 0.3 * (0.05 * n as f64).sin()));
        x.extend(vec![0.0; 8000]);
        let rec = VoiceRecording::from_samples(x, fs);
        let (out, d) = trim_silence(&rec);
        assert!(d.trimmed());
        assert_eq!(d.start, 8000 - 1600);
        assert_eq!(d.end, 24000 + 1600);
        assert_eq!(out.samples.len(), d.end - d.start);

        let quiet = VoiceRecording::from_samples(vec![1e-4; 4000], fs);
        let (_, d) = trim_silence(&quiet);
        assert!(!d.trimmed());
    }

    #[test]
    fn import_infers_ids_vowels_and_labels() {
        let dir = tempfile::tempdir().unwrap();
        for (sub, name) in [
            ("ALS", "008_a"),
            ("ALS", "008_i"),
            ("HC", "001_A"),
            ("HC", "001_I"),
        ] {
            let d = dir.path().join(sub);
            fs::create_dir_all(&d).unwrap();
            write_wav_i16(&d.join(format!("{name}.wav")), &[vec![0.0; 10]], 8000).unwrap();
        }
        let entries = import_directory(dir.path(), &[]).unwrap();
        let m = CorpusManifest::from_entries(entries).unwrap();
        assert_eq!(m.subjects.len(), 2);
        assert_eq!(m.subjects[0].subject_id, "001");
        assert_eq!(m.subjects[0].label, Label::Hc);
        assert_eq!(m.subjects[1].label, Label::Als);

        let flat = tempfile::tempdir().unwrap();
        for name in ["008_a", "008_i", "001_a", "001_i"] {
            write_wav_i16(
                &flat.path().join(format!("{name}.wav")),
                &[vec![0.0; 10]],
                8000,
            )
            .unwrap();
        }
        let entries = import_directory(flat.path(), &MINSK_ALS_SUBJECTS).unwrap();
        let m = CorpusManifest::from_entries(entries).unwrap();
        assert_eq!(m.class_counts(), (1, 1));
    }

    #[test]
    fn manifest_roundtrip_through_file() {
        let dir = tempfile::tempdir().unwrap();
        let mut entries = Vec::new();
        for id in ["010", "011"] {
            for v in [Vowel::A, Vowel::I] {
                let p = dir.path().join(format!("{id}_{v}.wav"));
                write_wav_i16(&p, &[vec![0.0; 10]], 8000).unwrap();
                entries.push(ManifestEntry {
                    subject_id: id.into(),
                    vowel: v,
                    label: if id == "010" { Label::Als } else { Label::Hc },
                    path: p,
                });
            }
        }
        let mpath = dir.path().join("manifest.csv");
        write_manifest(&mpath, &entries).unwrap();
        let m = load_corpus(&mpath).unwrap();
        assert_eq!(m.entries, entries);
        // determinism of entry order
        let again = load_corpus(&mpath).unwrap();
        assert_eq!(again.entries, m.entries);
    }

    #[test]
    fn missing_audio_file_is_fatal_with_path() {
        let dir = tempfile::tempdir().unwrap();
        let mpath = dir.path().join("manifest.csv");
        fs::write(
            &mpath,
            "subject_id,vowel,label,path\n001,a,0,nope.wav\n001,i,0,nope2.wav\n",
        )
        .unwrap();
        let err = load_corpus(&mpath).unwrap_err();
        assert!(err.to_string().contains("nope.wav"));
    }
}
