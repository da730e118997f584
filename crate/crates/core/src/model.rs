//! Two-class Fisher discriminant with an equal-error bias, evaluation
//! metrics, repeated stratified k-fold and leave-one-subject-out validation.

use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Label;
use crate::error::{Error, Result};
use crate::featureset::Standardizer;

pub const MODEL_FORMAT: &str = "vowelmark-lda";
pub const MODEL_VERSION: u32 = 1;
pub const DEFAULT_SEED: u64 = 20200131;

const CONDITION_LIMIT: f64 = 1e8;

/// Discriminant direction and the ridge added to the within-class scatter.
#[derive(Debug, Clone, PartialEq)]
pub struct Direction {
    pub w: Vec<f64>,
    pub ridge: f64,
}

fn class_means(x: &[Vec<f64>], y: &[Label]) -> Result<(DVector<f64>, DVector<f64>, usize, usize)> {
    let d = x.first().map(|r| r.len()).unwrap_or(0);
    let mut m1 = DVector::zeros(d);
    let mut m0 = DVector::zeros(d);
    let (mut n1, mut n0) = (0usize, 0usize);
    for (row, l) in x.iter().zip(y) {
        if row.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: row.len(),
            });
        }
        let v = DVector::from_column_slice(row);
        if l.is_positive() {
            m1 += v;
            n1 += 1;
        } else {
            m0 += v;
            n0 += 1;
        }
    }
    if n1 < 2 || n0 < 2 || d == 0 {
        return Err(Error::DegenerateClass(format!(
            "LDA needs at least 2 rows per class and one feature (ALS={n1}, HC={n0}, d={d})"
        )));
    }
    Ok((m1 / n1 as f64, m0 / n0 as f64, n1, n0))
}

/// Within-class scatter matrix.
pub fn within_class_scatter(x: &[Vec<f64>], y: &[Label]) -> Result<DMatrix<f64>> {
    let (m1, m0, _, _) = class_means(x, y)?;
    let d = m1.len();
    let mut sw = DMatrix::zeros(d, d);
    for (row, l) in x.iter().zip(y) {
        let c = DVector::from_column_slice(row) - if l.is_positive() { &m1 } else { &m0 };
        sw += &c * c.transpose();
    }
    Ok(sw)
}

/// Solves `S_B w = lambda (S_W + ridge I) w` for the leading eigenvector via
/// a Cholesky reduction to a symmetric problem. The ridge is zero unless
/// `S_W` is singular or badly conditioned.
pub fn fit_direction(x: &[Vec<f64>], y: &[Label]) -> Result<Direction> {
    let (m1, m0, _, _) = class_means(x, y)?;
    let d = m1.len();
    let sw = within_class_scatter(x, y)?;
    let diff = &m1 - &m0;
    let sb = &diff * diff.transpose();

    let eig = SymmetricEigen::new(sw.clone()).eigenvalues;
    let (lo, hi) = eig
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    let ill = !(lo > 0.0) || hi / lo > CONDITION_LIMIT;
    let ridge = if ill {
        (1e-3 * sw.trace() / d as f64).max(1e-6)
    } else {
        0.0
    };
    let mut s = sw;
    for i in 0..d {
        s[(i, i)] += ridge;
    }
    let chol = s.cholesky().ok_or_else(|| {
        Error::DegenerateClass("within-class scatter is not positive definite".into())
    })?;
    let l = chol.l();
    let l_inv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::DegenerateClass("within-class scatter factor is singular".into()))?;
    let c = &l_inv * sb * l_inv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let e = SymmetricEigen::new(c);
    let (imax, _) =
        e.eigenvalues
            .iter()
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc },
            );
    let v = e.eigenvectors.column(imax).into_owned();
    let mut w = l_inv.transpose() * v;
    let norm = w.norm();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::DegenerateClass(
            "discriminant direction vanished".into(),
        ));
    }
    w /= norm;
    if w.dot(&diff) < 0.0 {
        w = -w;
    }
    Ok(Direction {
        w: w.iter().cloned().collect(),
        ridge,
    })
}

pub fn project(w: &[f64], row: &[f64]) -> f64 {
    w.iter().zip(row).map(|(a, b)| a * b).sum()
}

/// Threshold on projections that best balances sensitivity and specificity.
/// Candidates are midpoints between adjacent distinct projections (or the
/// single value when all coincide); ties prefer higher accuracy, then the
/// lower threshold. Returns the bias `b = -threshold`.
pub fn select_bias(projections: &[f64], y: &[Label]) -> f64 {
    let mut sorted: Vec<f64> = projections.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    sorted.dedup();
    let candidates: Vec<f64> = if sorted.len() < 2 {
        sorted.clone()
    } else {
        sorted.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    };
    let (pos, neg) = y.iter().fold((0usize, 0usize), |(p, n), l| {
        if l.is_positive() {
            (p + 1, n)
        } else {
            (p, n + 1)
        }
    });
    let mut best: Option<(f64, f64, f64)> = None;
    for &theta in &candidates {
        let (mut tp, mut tn) = (0usize, 0usize);
        for (p, l) in projections.iter().zip(y) {
            match (*p > theta, l.is_positive()) {
                (true, true) => tp += 1,
                (false, false) => tn += 1,
                _ => {}
            }
        }
        let sens = if pos > 0 { tp as f64 / pos as f64 } else { 0.0 };
        let spec = if neg > 0 { tn as f64 / neg as f64 } else { 0.0 };
        let gap = (sens - spec).abs();
        let acc = (tp + tn) as f64 / y.len() as f64;
        let better = match best {
            None => true,
            Some((g, a, _)) => gap < g - 1e-15 || ((gap - g).abs() <= 1e-15 && acc > a + 1e-15),
        };
        if better {
            best = Some((gap, acc, theta));
        }
    }
    -best.map(|b| b.2).unwrap_or(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    pub feature_names: Vec<String>,
    pub w: Vec<f64>,
    pub b: f64,
    pub ridge: f64,
    pub standardizer: Standardizer,
}

impl LdaModel {
    /// Fits standardization, direction and bias on raw training rows.
    pub fn train(feature_names: &[String], x: &[Vec<f64>], y: &[Label]) -> Result<LdaModel> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                actual: y.len(),
            });
        }
        let standardizer = Standardizer::fit(x)?;
        let z = standardizer.transform_rows(x)?;
        let dir = fit_direction(&z, y)?;
        let proj: Vec<f64> = z.iter().map(|r| project(&dir.w, r)).collect();
        let b = select_bias(&proj, y);
        Ok(LdaModel {
            feature_names: feature_names.to_vec(),
            w: dir.w,
            b,
            ridge: dir.ridge,
            standardizer,
        })
    }

    /// Score of an already standardized row.
    pub fn score_standardized(&self, z: &[f64]) -> Result<f64> {
        if z.len() != self.w.len() {
            return Err(Error::DimensionMismatch {
                expected: self.w.len(),
                actual: z.len(),
            });
        }
        Ok(project(&self.w, z) + self.b)
    }

    /// Label and score of a raw row; a zero score is classed as HC.
    pub fn predict(&self, raw: &[f64]) -> Result<(Label, f64)> {
        let z = self.standardizer.transform_row(raw)?;
        let s = self.score_standardized(&z)?;
        Ok((if s > 0.0 { Label::Als } else { Label::Hc }, s))
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            model: self.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<LdaModel> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
            return Err(Error::Format(format!(
                "unsupported model file {} v{} (expected {MODEL_FORMAT} v{MODEL_VERSION})",
                file.format, file.version
            )));
        }
        let m = file.model;
        let d = m.feature_names.len();
        for (what, len) in [
            ("w", m.w.len()),
            ("mean", m.standardizer.mean.len()),
            ("sd", m.standardizer.sd.len()),
            ("passthrough", m.standardizer.passthrough.len()),
        ] {
            if len != d {
                return Err(Error::Format(format!(
                    "model field {what} has {len} entries for {d} features"
                )));
            }
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<LdaModel> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    model: LdaModel,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn add(&mut self, truth: Label, predicted: Label) {
        match (truth.is_positive(), predicted.is_positive()) {
            (true, true) => self.tp += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fp += 1,
            (true, false) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    /// `None` when there are no positive cases.
    pub sensitivity: Option<f64>,
    /// `None` when there are no negative cases.
    pub specificity: Option<f64>,
}

/// Accuracy, sensitivity and specificity in percent.
pub fn metrics(c: &Confusion) -> Result<Metrics> {
    if c.total() == 0 {
        return Err(Error::InvalidInput("confusion matrix is empty".into()));
    }
    let ratio = |a: usize, b: usize| {
        if a + b == 0 {
            None
        } else {
            Some(100.0 * a as f64 / (a + b) as f64)
        }
    };
    Ok(Metrics {
        accuracy: 100.0 * (c.tp + c.tn) as f64 / c.total() as f64,
        sensitivity: ratio(c.tp, c.fn_),
        specificity: ratio(c.tn, c.fp),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub repetitions: Vec<Confusion>,
    pub acc_mean: f64,
    pub acc_sd: f64,
    pub sens_mean: f64,
    pub sens_sd: f64,
    pub spec_mean: f64,
    pub spec_sd: f64,
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let v: Vec<f64> = v.iter().cloned().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let sd = if v.len() > 1 {
        crate::dsp::std_sample(&v)
    } else {
        0.0
    };
    (crate::dsp::mean(&v), sd)
}

impl EvalReport {
    pub fn from_confusions(repetitions: Vec<Confusion>) -> Result<EvalReport> {
        let m: Vec<Metrics> = repetitions.iter().map(metrics).collect::<Result<_>>()?;
        let acc: Vec<f64> = m.iter().map(|x| x.accuracy).collect();
        let sens: Vec<f64> = m
            .iter()
            .map(|x| x.sensitivity.unwrap_or(f64::NAN))
            .collect();
        let spec: Vec<f64> = m
            .iter()
            .map(|x| x.specificity.unwrap_or(f64::NAN))
            .collect();
        let (acc_mean, acc_sd) = mean_sd(&acc);
        let (sens_mean, sens_sd) = mean_sd(&sens);
        let (spec_mean, spec_sd) = mean_sd(&spec);
        Ok(EvalReport {
            repetitions,
            acc_mean,
            acc_sd,
            sens_mean,
            sens_sd,
            spec_mean,
            spec_sd,
        })
    }

    pub fn render(&self) -> String {
        let mut s = String::from("repetition\tTP\tTN\tFP\tFN\n");
        for (r, c) in self.repetitions.iter().enumerate() {
            s.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                r + 1,
                c.tp,
                c.tn,
                c.fp,
                c.fn_
            ));
        }
        s.push_str(&format!(
            "# accuracy\t{:.2}\t{:.2}\n# sensitivity\t{:.2}\t{:.2}\n# specificity\t{:.2}\t{:.2}\n",
            self.acc_mean, self.acc_sd, self.sens_mean, self.sens_sd, self.spec_mean, self.spec_sd
        ));
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub folds: usize,
    pub repetitions: usize,
    pub seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            folds: 8,
            repetitions: 40,
            seed: DEFAULT_SEED,
        }
    }
}

/// Generator for repetition `rep`: the base seed selects the key, the
/// repetition selects the stream.
pub fn repetition_rng(seed: u64, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep as u64);
    rng
}

/// Stratified fold assignment: each class is shuffled and dealt round-robin,
/// the dealing position carrying over between classes so fold sizes differ
/// by at most one.
pub fn stratified_folds(y: &[Label], k: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 folds, got {k}"
        )));
    }
    let mut folds = vec![Vec::new(); k];
    let mut pos = 0;
    for positive in [false, true] {
        let mut idx: Vec<usize> = (0..y.len())
            .filter(|&i| y[i].is_positive() == positive)
            .collect();
        if idx.len() < k {
            return Err(Error::DegenerateClass(format!(
                "stratification infeasible: {} {} rows for {k} folds",
                idx.len(),
                if positive { "ALS" } else { "HC" }
            )));
        }
        idx.shuffle(rng);
        for i in idx {
            folds[pos % k].push(i);
            pos += 1;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Called once per trained fold with `(repetition, fold, standardizer)`.
pub type FoldHook<'a> = &'a (dyn Fn(usize, usize, &Standardizer) + Sync);

fn run_folds(
    names: &[String],
    x: &[Vec<f64>],
    y: &[Label],
    folds: &[Vec<usize>],
    rep: usize,
    hook: Option<FoldHook>,
) -> Result<Confusion> {
    let mut conf = Confusion::default();
    let mut in_test = vec![false; x.len()];
    for (f, test) in folds.iter().enumerate() {
        in_test.iter_mut().for_each(|v| *v = false);
        test.iter().for_each(|&i| in_test[i] = true);
        let train: Vec<usize> = (0..x.len()).filter(|&i| !in_test[i]).collect();
        let xt: Vec<Vec<f64>> = train.iter().map(|&i| x[i].clone()).collect();
        let yt: Vec<Label> = train.iter().map(|&i| y[i]).collect();
        let model = LdaModel::train(names, &xt, &yt)?;
        if let Some(h) = hook {
            h(rep, f, &model.standardizer);
        }
        for &i in test {
            conf.add(y[i], model.predict(&x[i])?.0);
        }
    }
    Ok(conf)
}

/// Repeated stratified k-fold validation on raw rows. Repetitions run in
/// parallel and are reduced in index order.
pub fn stratified_kfold_cv(x: &[Vec<f64>], y: &[Label], cfg: &CvConfig) -> Result<EvalReport> {
    stratified_kfold_cv_with_hook(x, y, cfg, None)
}

pub fn stratified_kfold_cv_with_hook(
    x: &[Vec<f64>],
    y: &[Label],
    cfg: &CvConfig,
    hook: Option<FoldHook>,
) -> Result<EvalReport> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    let names: Vec<String> = (0..x.first().map(|r| r.len()).unwrap_or(0))
        .map(|j| format!("x{j}"))
        .collect();
    let confusions: Vec<Confusion> = (0..cfg.repetitions)
        .into_par_iter()
        .map(|rep| {
            let mut rng = repetition_rng(cfg.seed, rep);
            let folds = stratified_folds(y, cfg.folds, &mut rng)?;
            run_folds(&names, x, y, &folds, rep, hook)
        })
        .collect::<Result<_>>()?;
    EvalReport::from_confusions(confusions)
}

/// Leave-one-subject-out validation (one row per subject).
pub fn loso_cv(x: &[Vec<f64>], y: &[Label]) -> Result<EvalReport> {
    if x.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "LOSO needs at least 3 subjects, got {}",
            x.len()
        )));
    }
    let names: Vec<String> = (0..x[0].len()).map(|j| format!("x{j}")).collect();
    let folds: Vec<Vec<usize>> = (0..x.len()).map(|i| vec![i]).collect();
    let conf = run_folds(&names, x, y, &folds, 0, None)?;
    EvalReport::from_confusions(vec![conf])
}

/// How a feature subset is scored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Protocol {
    KFold(CvConfig),
    Loso,
}

pub fn evaluate(x: &[Vec<f64>], y: &[Label], protocol: &Protocol) -> Result<EvalReport> {
    match protocol {
        Protocol::KFold(cfg) => stratified_kfold_cv(x, y, cfg),
        Protocol::Loso => loso_cv(x, y),
    }
}

/// Columns `idx` of every row.
pub fn columns(x: &[Vec<f64>], idx: &[usize]) -> Vec<Vec<f64>> {
    x.iter()
        .map(|r| idx.iter().map(|&j| r[j]).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn labels(n1: usize, n0: usize) -> Vec<Label> {
        let mut y = vec![Label::Als; n1];
        y.extend(vec![Label::Hc; n0]);
        y
    }

    fn gaussian_problem(seed: u64, d: usize, n: usize) -> (Vec<Vec<f64>>, Vec<Label>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shift: Vec<f64> = (0..d)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let mix: Vec<Vec<f64>> = (0..d)
            .map(|_| (0..d).map(|_| rng.gen_range(-0.5..0.5)).collect())
            .collect();
        let y = labels(n / 2, n - n / 2);
        let x = y
            .iter()
            .map(|l| {
                let z: Vec<f64> = (0..d)
                    .map(|_| rng.sample::<f64, _>(StandardNormal))
                    .collect();
                (0..d)
                    .map(|i| {
                        let mixed: f64 = z[i] + (0..d).map(|j| mix[i][j] * z[j]).sum::<f64>();
                        mixed + if l.is_positive() { shift[i] } else { 0.0 }
                    })
                    .collect()
            })
            .collect();
        (x, y)
    }

    /// Direct `S_W^-1 (mu1 - mu0)` by LU solve.
    fn closed_form(x: &[Vec<f64>], y: &[Label]) -> DVector<f64> {
        let (m1, m0, _, _) = class_means(x, y).unwrap();
        let sw = within_class_scatter(x, y).unwrap();
        sw.lu().solve(&(m1 - m0)).unwrap()
    }

    fn cosine(a: &[f64], b: &DVector<f64>) -> f64 {
        let a = DVector::from_column_slice(a);
        a.dot(b) / (a.norm() * b.norm())
    }

    #[test]
    fn identity_scatter_example() {
        let x = vec![
            vec![-0.5, 0.0],
            vec![0.5, 0.0],
            vec![0.0, -0.5],
            vec![0.0, 0.5],
            vec![0.5, 1.0],
            vec![1.5, 1.0],
            vec![1.0, 0.5],
            vec![1.0, 1.5],
        ];
        let y = labels(0, 4)
            .into_iter()
            .chain(labels(4, 0))
            .collect::<Vec<_>>();
        let dir = fit_direction(&x, &y).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!(
            (dir.w[0] - s).abs() < 1e-12 && (dir.w[1] - s).abs() < 1e-12,
            "{:?}",
            dir.w
        );
        assert_eq!(dir.ridge, 0.0);
    }

    #[test]
    fn duplicated_rows_keep_direction() {
        let (x, y) = gaussian_problem(3, 4, 40);
        let mut x2 = x.clone();
        x2.extend(x.iter().cloned());
        let mut y2 = y.clone();
        y2.extend(y.iter().cloned());
        let a = fit_direction(&x, &y).unwrap().w;
        let b = fit_direction(&x2, &y2).unwrap().w;
        assert!(a.iter().zip(&b).all(|(p, q)| (p - q).abs() < 1e-10));
    }

    #[test]
    fn matches_closed_form() {
        let (x, y) = gaussian_problem(11, 5, 200);
        let dir = fit_direction(&x, &y).unwrap();
        assert!(cosine(&dir.w, &closed_form(&x, &y)) >= 1.0 - 1e-8);
    }

    #[test]
    fn singular_scatter_gets_ridge() {
        let (mut x, y) = gaussian_problem(5, 3, 20);
        for r in &mut x {
            let v = r[0] + r[1];
            r.push(v);
        }
        let dir = fit_direction(&x, &y).unwrap();
        assert!(dir.ridge > 0.0);
        assert!(dir.w.iter().all(|v| v.is_finite()));
        let wide: Vec<Vec<f64>> = x
            .iter()
            .map(|r| r.iter().cycle().take(30).cloned().collect())
            .collect();
        assert!(fit_direction(&wide, &y).unwrap().ridge > 0.0);
    }

    #[test]
    fn degenerate_classes_rejected() {
        let x = vec![vec![1.0], vec![2.0], vec![3.0]];
        assert!(matches!(
            fit_direction(&x, &[Label::Als, Label::Hc, Label::Hc]),
            Err(Error::DegenerateClass(_))
        ));
    }

    #[test]
    fn bias_examples() {
        let p = [-3.0, -2.0, -1.0, 1.0, 2.0, 3.0];
        let y = labels(0, 3)
            .into_iter()
            .chain(labels(3, 0))
            .collect::<Vec<_>>();
        assert_eq!(select_bias(&p, &y), 0.0);
        // constant projection for every row: finite bias, no panic
        assert_eq!(select_bias(&[0.7; 4], &labels(2, 2)), -0.7);
        let p = [0.0, 1.0, 2.0, 3.0];
        let y = [Label::Hc, Label::Als, Label::Hc, Label::Als];
        assert_eq!(select_bias(&p, &y), -1.5);
        // equal gap at both candidates: the more accurate one wins
        let y = [Label::Als, Label::Hc, Label::Als];
        assert_eq!(select_bias(&[0.0, 1.0, 2.0], &y), -1.5);
    }

    fn brute_force_gap(p: &[f64], y: &[Label]) -> f64 {
        let mut best = f64::INFINITY;
        let pos = y.iter().filter(|l| l.is_positive()).count() as f64;
        let neg = y.len() as f64 - pos;
        let mut cands: Vec<f64> = p.to_vec();
        cands.push(f64::NEG_INFINITY);
        for &t in &cands {
            let tp = p
                .iter()
                .zip(y)
                .filter(|(v, l)| **v > t && l.is_positive())
                .count() as f64;
            let tn = p
                .iter()
                .zip(y)
                .filter(|(v, l)| **v <= t && !l.is_positive())
                .count() as f64;
            best = best.min((tp / pos - tn / neg).abs());
        }
        best
    }

    #[test]
    fn interleaved_bias_is_optimal() {
        let p: Vec<f64> = (0..11).map(|i| i as f64).collect();
        let y: Vec<Label> = (0..11)
            .map(|i| if i % 2 == 0 { Label::Hc } else { Label::Als })
            .collect();
        let b = select_bias(&p, &y);
        let tp = p
            .iter()
            .zip(&y)
            .filter(|(v, l)| **v + b > 0.0 && l.is_positive())
            .count() as f64;
        let tn = p
            .iter()
            .zip(&y)
            .filter(|(v, l)| **v + b <= 0.0 && !l.is_positive())
            .count() as f64;
        let gap = (tp / 5.0 - tn / 6.0).abs();
        assert!((gap - brute_force_gap(&p, &y)).abs() < 1e-12);
    }

    #[test]
    fn prediction_boundary_and_training_fit() {
        let (x, y) = gaussian_problem(8, 3, 60);
        let sep: Vec<Vec<f64>> = x
            .iter()
            .zip(&y)
            .map(|(r, l)| {
                r.iter()
                    .map(|v| v + if l.is_positive() { 20.0 } else { 0.0 })
                    .collect()
            })
            .collect();
        let names: Vec<String> = vec!["a".into(), "b".into(), "c".into()];
        let m = LdaModel::train(&names, &sep, &y).unwrap();
        for (r, l) in sep.iter().zip(&y) {
            assert_eq!(m.predict(r).unwrap().0, *l);
        }
        let wn: f64 = m.w.iter().map(|v| v * v).sum();
        let on_boundary: Vec<f64> = m.w.iter().map(|v| -m.b * v / wn).collect();
        assert_eq!(
            m.score_standardized(&on_boundary).unwrap().abs() < 1e-12,
            true
        );
        let mut flipped = m.clone();
        flipped.w.iter_mut().for_each(|v| *v = -*v);
        flipped.b = -m.b;
        for r in &sep {
            let (a, s) = m.predict(r).unwrap();
            let (b, _) = flipped.predict(r).unwrap();
            if s != 0.0 {
                assert_ne!(a, b);
            }
        }
        assert!(matches!(
            m.predict(&[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn metrics_examples() {
        let m = metrics(&Confusion {
            tp: 2,
            tn: 3,
            fp: 1,
            fn_: 0,
        })
        .unwrap();
        assert!((m.accuracy - 83.333_333_333).abs() < 1e-6);
        assert_eq!(m.sensitivity, Some(100.0));
        assert_eq!(m.specificity, Some(75.0));
        let m = metrics(&Confusion {
            tp: 1,
            tn: 1,
            fp: 1,
            fn_: 1,
        })
        .unwrap();
        assert_eq!(
            (m.accuracy, m.sensitivity, m.specificity),
            (50.0, Some(50.0), Some(50.0))
        );
        let m = metrics(&Confusion {
            tp: 0,
            tn: 3,
            fp: 1,
            fn_: 0,
        })
        .unwrap();
        assert_eq!(m.sensitivity, None);
        assert!(metrics(&Confusion::default()).is_err());
    }

    #[test]
    fn model_file_round_trip() {
        let (x, y) = gaussian_problem(2, 2, 20);
        let m = LdaModel::train(&["p".into(), "q".into()], &x, &y).unwrap();
        let back = LdaModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(m, back);
        let broken = m
            .to_json()
            .unwrap()
            .replace("\"version\": 1", "\"version\": 9");
        assert!(LdaModel::from_json(&broken).is_err());
        let mut short = m.clone();
        short.w.pop();
        short.feature_names.pop();
        assert!(LdaModel::from_json(&short.to_json().unwrap()).is_err());
    }

    #[test]
    fn folds_are_stratified() {
        let y = labels(31, 33);
        let folds = stratified_folds(&y, 8, &mut repetition_rng(DEFAULT_SEED, 0)).unwrap();
        let mut seen: Vec<usize> = folds.iter().flatten().cloned().collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..64).collect::<Vec<_>>());
        for f in &folds {
            let als = f.iter().filter(|&&i| y[i].is_positive()).count();
            assert_eq!(f.len(), 8);
            assert!((3..=4).contains(&als));
        }
        assert!(stratified_folds(&labels(3, 20), 8, &mut repetition_rng(1, 0)).is_err());
    }

    #[test]
    fn oracle_feature_is_perfect() {
        let y = labels(12, 14);
        let x: Vec<Vec<f64>> = y
            .iter()
            .enumerate()
            .map(|(i, l)| vec![l.as_u8() as f64 + 0.01 * (i % 3) as f64])
            .collect();
        let r = stratified_kfold_cv(
            &x,
            &y,
            &CvConfig {
                folds: 4,
                repetitions: 5,
                seed: 3,
            },
        )
        .unwrap();
        assert_eq!((r.acc_mean, r.acc_sd), (100.0, 0.0));
        let l = loso_cv(&x, &y).unwrap();
        assert_eq!(l.acc_mean, 100.0);
        assert_eq!(l.repetitions[0].total(), 26);
    }

    #[test]
    fn loso_smallest_case() {
        let x = vec![vec![0.0, 1.0], vec![1.0, 0.3], vec![2.0, 0.1]];
        let y = vec![Label::Hc, Label::Hc, Label::Als];
        // a single ALS row leaves a training fold with one ALS row
        assert!(loso_cv(&x, &y).is_err());
        let x: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let y = vec![Label::Hc, Label::Hc, Label::Hc, Label::Als, Label::Als];
        let _ = loso_cv(&x, &y);
    }

    #[test]
    fn fold_standardization_never_sees_test_rows() {
        let (x, y) = gaussian_problem(4, 3, 32);
        let cfg = CvConfig {
            folds: 4,
            repetitions: 3,
            seed: 99,
        };
        let record = |x: &[Vec<f64>]| {
            let log = std::sync::Mutex::new(Vec::new());
            let hook = |r: usize, f: usize, s: &Standardizer| {
                log.lock()
                    .unwrap()
                    .push((r, f, s.mean.clone(), s.sd.clone()))
            };
            stratified_kfold_cv_with_hook(x, &y, &cfg, Some(&hook)).unwrap();
            let mut v = log.into_inner().unwrap();
            v.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
            v
        };
        let base = record(&x);
        let folds = stratified_folds(&y, 4, &mut repetition_rng(99, 1)).unwrap();
        let victim = folds[2][0];
        let mut perturbed = x.clone();
        perturbed[victim] = vec![1e6, -1e6, 3e5];
        let after = record(&perturbed);
        let (b, a) = (&base[1 * 4 + 2], &after[1 * 4 + 2]);
        assert_eq!((b.0, b.1), (1, 2));
        assert_eq!(b.2, a.2);
        assert_eq!(b.3, a.3);
        assert_ne!(base[1 * 4], after[1 * 4]);
    }

    #[test]
    fn cv_is_deterministic() {
        let (x, y) = gaussian_problem(6, 3, 40);
        let cfg = CvConfig {
            folds: 5,
            repetitions: 6,
            seed: 17,
        };
        let a = stratified_kfold_cv(&x, &y, &cfg).unwrap();
        let b = stratified_kfold_cv(&x, &y, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.render(), b.render());
        assert!(a.repetitions.iter().all(|c| c.total() == 40));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn direction_matches_closed_form(seed in 0u64..100_000, d in 1usize..=10) {
            let (x, y) = gaussian_problem(seed, d, 30 + 4 * d);
            let dir = fit_direction(&x, &y).unwrap();
            prop_assume!(dir.ridge == 0.0);
            prop_assert!(cosine(&dir.w, &closed_form(&x, &y)) >= 1.0 - 1e-8);
        }

        #[test]
        fn labels_invariant_under_positive_scaling(seed in 0u64..100_000, c in 0.01f64..100.0) {
            let (x, y) = gaussian_problem(seed, 3, 30);
            let names: Vec<String> = vec!["a".into(), "b".into(), "c".into()];
            let m = LdaModel::train(&names, &x, &y).unwrap();
            let mut scaled = m.clone();
            scaled.w.iter_mut().for_each(|v| *v *= c);
            scaled.b *= c;
            for r in &x {
                prop_assert_eq!(m.predict(r).unwrap().0, scaled.predict(r).unwrap().0);
            }
        }
    }
}
