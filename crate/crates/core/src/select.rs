//! Feature rankings (QoV, Relief, RelieFF, LASSO path) and backward-stepwise
//! subset refinement.

use std::fmt;
use std::str::FromStr;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Label;
use crate::error::{Error, Result};
use crate::featureset::{standardize, FeatureTable};
use crate::model::{columns, evaluate, EvalReport, Protocol};

pub const DEFAULT_K_NEIGHBORS: usize = 11;
pub const LASSO_GRID: usize = 100;
pub const LASSO_RATIO: f64 = 1e-4;
pub const LASSO_TOL: f64 = 1e-7;
pub const LASSO_MAX_SWEEPS: usize = 10_000;
const DUPLICATE_TOL: f64 = 1e-12;
const BSS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    QoV,
    Relief,
    RelieFF,
    Lasso,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::QoV => "qov",
            Method::Relief => "relief",
            Method::RelieFF => "relieff",
            Method::Lasso => "lasso",
        })
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Method> {
        match s.to_ascii_lowercase().as_str() {
            "qov" => Ok(Method::QoV),
            "relief" => Ok(Method::Relief),
            "relieff" => Ok(Method::RelieFF),
            "lasso" => Ok(Method::Lasso),
            other => Err(Error::InvalidInput(format!(
                "unknown ranking method {other:?}"
            ))),
        }
    }
}

/// Features ordered from most to least relevant with their scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRanking {
    pub method: Method,
    pub features: Vec<String>,
    pub scores: Vec<f64>,
}

impl FeatureRanking {
    /// Orders by descending score; equal scores keep the table's column order.
    fn from_scores(method: Method, names: &[String], scores: Vec<f64>) -> FeatureRanking {
        let mut idx: Vec<usize> = (0..names.len()).collect();
        idx.sort_by(|&a, &b| {
            scores[b]
                .partial_cmp(&scores[a])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        FeatureRanking {
            method,
            features: idx.iter().map(|&i| names[i].clone()).collect(),
            scores: idx.iter().map(|&i| scores[i]).collect(),
        }
    }

    pub fn top(&self, n: usize) -> &[String] {
        &self.features[..n.min(self.features.len())]
    }

    pub fn score_of(&self, name: &str) -> Option<f64> {
        self.features
            .iter()
            .position(|f| f == name)
            .map(|i| self.scores[i])
    }

    pub fn render(&self) -> String {
        let mut s = format!("# method\t{}\nrank\tfeature\tscore\n", self.method);
        for (r, (f, v)) in self.features.iter().zip(&self.scores).enumerate() {
            s.push_str(&format!("{}\t{}\t{:.6e}\n", r + 1, f, v));
        }
        s
    }
}

fn prepared(table: &FeatureTable) -> Result<FeatureTable> {
    let (hc, als) = table.class_counts();
    if hc == 0 || als == 0 {
        return Err(Error::DegenerateClass(format!(
            "ranking needs both classes (HC={hc}, ALS={als})"
        )));
    }
    if table.standardized {
        Ok(table.clone())
    } else {
        Ok(standardize(table)?.0)
    }
}

pub fn rank(method: Method, table: &FeatureTable, k_neighbors: usize) -> Result<FeatureRanking> {
    match method {
        Method::QoV => rank_qov(table),
        Method::Relief => rank_relief(table),
        Method::RelieFF => rank_relieff(table, k_neighbors),
        Method::Lasso => rank_lasso(table),
    }
}

/// Inverse mean class impurity of one feature. The impurity of a class is
/// the share of all samples that belong to the other class yet fall inside
/// this class's value span, floored at `1/(2n)`.
pub fn qov_score(values: &[f64], labels: &[Label]) -> f64 {
    let n = values.len();
    let floor = 1.0 / (2.0 * n as f64);
    let mut total = 0.0;
    for positive in [false, true] {
        let own = values
            .iter()
            .zip(labels)
            .filter(|(_, l)| l.is_positive() == positive)
            .map(|(v, _)| *v);
        let (lo, hi) = own.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(v), b.max(v))
        });
        let inside = values
            .iter()
            .zip(labels)
            .filter(|(v, l)| l.is_positive() != positive && **v >= lo && **v <= hi)
            .count();
        total += (inside as f64 / n as f64).max(floor);
    }
    2.0 / total
}

pub fn rank_qov(table: &FeatureTable) -> Result<FeatureRanking> {
    let t = prepared(table)?;
    let scores = (0..t.n_features())
        .map(|j| qov_score(&t.column(j), &t.labels))
        .collect();
    Ok(FeatureRanking::from_scores(Method::QoV, &t.names, scores))
}

struct ReliefData {
    x: Vec<Vec<f64>>,
    y: Vec<Label>,
    inv_range: Vec<f64>,
}

impl ReliefData {
    fn new(t: &FeatureTable) -> ReliefData {
        let inv_range = (0..t.n_features())
            .map(|j| {
                let c = t.column(j);
                let lo = c.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = c.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                if hi > lo {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            })
            .collect();
        ReliefData {
            x: t.rows.clone(),
            y: t.labels.clone(),
            inv_range,
        }
    }

    fn diff(&self, j: usize, a: usize, b: usize) -> f64 {
        (self.x[a][j] - self.x[b][j]).abs() * self.inv_range[j]
    }

    fn distance(&self, a: usize, b: usize) -> f64 {
        (0..self.inv_range.len()).map(|j| self.diff(j, a, b)).sum()
    }

    /// The `k` nearest rows of the same (`hit`) or other class, nearest
    /// first, ties to the lower index.
    fn neighbours(&self, i: usize, hit: bool, k: usize) -> Vec<usize> {
        let mut c: Vec<(f64, usize)> = (0..self.x.len())
            .filter(|&r| r != i && (self.y[r] == self.y[i]) == hit)
            .map(|r| (self.distance(i, r), r))
            .collect();
        c.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        c.into_iter().take(k).map(|(_, r)| r).collect()
    }
}

fn relief_weights(t: &FeatureTable, k: usize) -> Vec<f64> {
    let data = ReliefData::new(t);
    let (n, d) = (t.n_rows(), t.n_features());
    let mut w = vec![0.0; d];
    let mut skipped = 0;
    for i in 0..n {
        let hits = data.neighbours(i, true, k);
        let misses = data.neighbours(i, false, k);
        if hits.is_empty() {
            skipped += 1;
            continue;
        }
        for (j, wj) in w.iter_mut().enumerate() {
            let m: f64 =
                misses.iter().map(|&r| data.diff(j, i, r)).sum::<f64>() / misses.len() as f64;
            let h: f64 = hits.iter().map(|&r| data.diff(j, i, r)).sum::<f64>() / hits.len() as f64;
            *wj += m - h;
        }
    }
    if skipped > 0 {
        warn!("relief: {skipped} instance(s) without a same-class neighbour skipped");
    }
    w.iter_mut().for_each(|v| *v /= n as f64);
    w
}

/// Single-neighbour Relief over every instance.
pub fn rank_relief(table: &FeatureTable) -> Result<FeatureRanking> {
    let t = prepared(table)?;
    let w = relief_weights(&t, 1);
    Ok(FeatureRanking::from_scores(Method::Relief, &t.names, w))
}

/// RelieFF with `k` nearest hits and misses; `k` is clamped below the
/// smallest class size.
pub fn rank_relieff(table: &FeatureTable, k: usize) -> Result<FeatureRanking> {
    let t = prepared(table)?;
    let (hc, als) = t.class_counts();
    let limit = hc.min(als).saturating_sub(1).max(1);
    let k = if k == 0 || k > limit {
        warn!("relieff: k={k} clamped to {limit}");
        limit.min(k.max(1))
    } else {
        k
    };
    let w = relief_weights(&t, k);
    Ok(FeatureRanking::from_scores(Method::RelieFF, &t.names, w))
}

fn soft_threshold(z: f64, g: f64) -> f64 {
    if z > g {
        z - g
    } else if z < -g {
        z + g
    } else {
        0.0
    }
}

/// Coefficient path of `(1/2n)||y - X b||^2 + lambda ||b||_1` by cyclic
/// coordinate descent with warm starts. Columns are used as given. Each
/// entry is `None` where the sweep limit was hit.
pub fn lasso_path(x: &[Vec<f64>], y: &[f64], lambdas: &[f64]) -> Vec<Option<Vec<f64>>> {
    let n = x.len();
    let d = x.first().map(|r| r.len()).unwrap_or(0);
    let cols: Vec<Vec<f64>> = (0..d).map(|j| x.iter().map(|r| r[j]).collect()).collect();
    let sq: Vec<f64> = cols
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>() / n as f64)
        .collect();
    let mut beta = vec![0.0; d];
    let mut resid = y.to_vec();
    let mut out = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let mut converged = false;
        for _ in 0..LASSO_MAX_SWEEPS {
            let mut max_step = 0.0f64;
            for j in 0..d {
                if sq[j] == 0.0 {
                    continue;
                }
                let c = &cols[j];
                let rho = c.iter().zip(&resid).map(|(a, b)| a * b).sum::<f64>() / n as f64
                    + sq[j] * beta[j];
                let new = soft_threshold(rho, lambda) / sq[j];
                let step = new - beta[j];
                if step != 0.0 {
                    resid.iter_mut().zip(c).for_each(|(r, v)| *r -= step * v);
                    beta[j] = new;
                    max_step = max_step.max(step.abs());
                }
            }
            if max_step < LASSO_TOL {
                converged = true;
                break;
            }
        }
        out.push(if converged { Some(beta.clone()) } else { None });
    }
    out
}

/// Log-spaced grid from `lambda_max` down to `LASSO_RATIO * lambda_max`.
pub fn lasso_grid(lambda_max: f64) -> Vec<f64> {
    (0..LASSO_GRID)
        .map(|i| lambda_max * LASSO_RATIO.powf(i as f64 / (LASSO_GRID - 1) as f64))
        .collect()
}

/// Ranks by the largest grid `lambda` at which each coefficient is nonzero;
/// identical columns share their group's score.
pub fn rank_lasso(table: &FeatureTable) -> Result<FeatureRanking> {
    let t = prepared(table)?;
    let z = standardize(&FeatureTable {
        standardized: false,
        ..t.clone()
    })?
    .0;
    let n = z.n_rows() as f64;
    let yb: Vec<f64> = z.labels.iter().map(|l| l.as_u8() as f64).collect();
    let my = crate::dsp::mean(&yb);
    let y: Vec<f64> = yb.iter().map(|v| v - my).collect();
    let d = z.n_features();
    let lambda_max = (0..d)
        .map(|j| {
            z.rows
                .iter()
                .zip(&y)
                .map(|(r, v)| r[j] * v)
                .sum::<f64>()
                .abs()
                / n
        })
        .fold(0.0, f64::max);
    let mut scores = vec![0.0; d];
    if lambda_max > 0.0 {
        let grid = lasso_grid(lambda_max);
        let path = lasso_path(&z.rows, &y, &grid);
        let mut failed = 0;
        for (lambda, beta) in grid.iter().zip(&path) {
            match beta {
                Some(b) => {
                    for j in 0..d {
                        if b[j] != 0.0 && scores[j] == 0.0 {
                            scores[j] = *lambda;
                        }
                    }
                }
                None => failed += 1,
            }
        }
        if failed > 0 {
            warn!("lasso: {failed} grid point(s) did not converge and were skipped");
        }
    }
    let cols: Vec<Vec<f64>> = (0..d).map(|j| z.column(j)).collect();
    let mut group = vec![usize::MAX; d];
    for a in 0..d {
        if group[a] != usize::MAX {
            continue;
        }
        group[a] = a;
        for b in a + 1..d {
            if group[b] == usize::MAX
                && cols[a]
                    .iter()
                    .zip(&cols[b])
                    .all(|(p, q)| (p - q).abs() <= DUPLICATE_TOL)
            {
                group[b] = a;
            }
        }
    }
    let mut best = vec![0.0f64; d];
    for j in 0..d {
        best[group[j]] = best[group[j]].max(scores[j]);
    }
    let shared: Vec<f64> = (0..d).map(|j| best[group[j]]).collect();
    Ok(FeatureRanking::from_scores(Method::Lasso, &z.names, shared))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BssStep {
    pub removed: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BssResult {
    pub subset: Vec<usize>,
    pub initial_accuracy: f64,
    pub accuracy: f64,
    pub trace: Vec<BssStep>,
}

/// Greedy backward elimination. Each round scores every single removal and
/// applies the best one (first on ties) unless it lowers accuracy.
pub fn backward_stepwise<F>(subset: &[usize], evaluate: F) -> Result<BssResult>
where
    F: Fn(&[usize]) -> Result<f64> + Sync,
{
    if subset.is_empty() {
        return Err(Error::InvalidInput(
            "backward selection needs a non-empty subset".into(),
        ));
    }
    let mut current = subset.to_vec();
    let initial = evaluate(&current)?;
    let mut acc = initial;
    let mut trace = Vec::new();
    while current.len() > 1 {
        let trials: Vec<f64> = (0..current.len())
            .into_par_iter()
            .map(|i| {
                let mut s = current.clone();
                s.remove(i);
                evaluate(&s)
            })
            .collect::<Result<_>>()?;
        let (bi, ba) = trials
            .iter()
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |b, (i, &a)| if a > b.1 { (i, a) } else { b },
            );
        if ba < acc - BSS_TOL {
            break;
        }
        trace.push(BssStep {
            removed: current.remove(bi),
            accuracy: ba,
        });
        acc = ba;
    }
    Ok(BssResult {
        subset: current,
        initial_accuracy: initial,
        accuracy: acc,
        trace,
    })
}

/// Mean validated accuracy of the LDA on the columns `subset` of `x`.
pub fn cv_accuracy(
    x: &[Vec<f64>],
    y: &[Label],
    subset: &[usize],
    protocol: &Protocol,
) -> Result<f64> {
    Ok(evaluate(&columns(x, subset), y, protocol)?.acc_mean)
}

/// Evaluation of the top-`n` prefixes of `order` for `n = 1..=max_n`.
pub fn subset_curve(
    x: &[Vec<f64>],
    y: &[Label],
    order: &[usize],
    max_n: usize,
    protocol: &Protocol,
) -> Result<Vec<EvalReport>> {
    (1..=max_n.min(order.len()))
        .map(|n| evaluate(&columns(x, &order[..n]), y, protocol))
        .collect()
}

/// Smallest `n` reaching the highest mean accuracy on a curve.
pub fn best_prefix(curve: &[EvalReport]) -> Option<usize> {
    let best = curve
        .iter()
        .map(|r| r.acc_mean)
        .fold(f64::NEG_INFINITY, f64::max);
    curve
        .iter()
        .position(|r| r.acc_mean >= best - BSS_TOL)
        .map(|i| i + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CvConfig;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn table(names: &[&str], rows: Vec<Vec<f64>>, labels: Vec<Label>) -> FeatureTable {
        let mut t = FeatureTable::new(names.iter().map(|s| s.to_string()).collect());
        for (i, (r, l)) in rows.into_iter().zip(labels).enumerate() {
            t.push(&format!("s{i:03}"), l, r).unwrap();
        }
        t
    }

    fn alternating(n: usize) -> Vec<Label> {
        (0..n)
            .map(|i| if i % 2 == 0 { Label::Hc } else { Label::Als })
            .collect()
    }

    fn noisy_table(n: usize, seed: u64) -> FeatureTable {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y = alternating(n);
        let rows = y
            .iter()
            .map(|l| {
                let s = l.as_u8() as f64;
                vec![
                    s + 0.3 * rng.sample::<f64, _>(StandardNormal),
                    rng.sample::<f64, _>(StandardNormal),
                    0.5 * s + rng.sample::<f64, _>(StandardNormal),
                ]
            })
            .collect();
        table(&["signal", "noise", "weak"], rows, y)
    }

    #[test]
    fn qov_limits() {
        let y = alternating(20);
        let sep: Vec<f64> = y
            .iter()
            .enumerate()
            .map(|(i, l)| l.as_u8() as f64 * 10.0 + i as f64 * 0.01)
            .collect();
        assert_eq!(qov_score(&sep, &y), 2.0 / (2.0 / 40.0));
        assert_eq!(qov_score(&[3.0; 20], &y), 2.0);
        // overlap oracle: identical distributions leave nearly every
        // opposite-class sample inside each span
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let y = alternating(400);
        let same: Vec<f64> = (0..400)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let q = qov_score(&same, &y);
        assert!(q > 2.0 && q < 2.1, "{q}");
    }

    #[test]
    fn label_feature_tops_every_ranking() {
        let t = noisy_table(60, 2);
        for m in [Method::QoV, Method::Relief, Method::RelieFF, Method::Lasso] {
            let r = rank(m, &t, 5).unwrap();
            assert_eq!(r.features[0], "signal", "{m}");
            assert_eq!(r.features.len(), 3);
        }
    }

    #[test]
    fn relief_noise_weight_vanishes() {
        let t = noisy_table(500, 3);
        let r = rank_relief(&t).unwrap();
        assert!(r.score_of("noise").unwrap().abs() < 0.1);
        assert!(r.score_of("signal").unwrap() > 5.0 * r.score_of("noise").unwrap().abs());
    }

    #[test]
    fn relief_duplicate_columns_match() {
        let t = noisy_table(50, 4);
        let rows = t.rows.iter().map(|r| vec![r[0], r[1], r[1]]).collect();
        let d = table(&["a", "b", "c"], rows, t.labels.clone());
        for r in [rank_relief(&d).unwrap(), rank_relieff(&d, 4).unwrap()] {
            assert!((r.score_of("b").unwrap() - r.score_of("c").unwrap()).abs() <= 1e-12);
            let pb = r.features.iter().position(|f| f == "b").unwrap();
            assert_eq!(r.features[pb + 1], "c");
        }
    }

    #[test]
    fn relieff_k1_is_relief() {
        let t = noisy_table(80, 5);
        let a = rank_relief(&t).unwrap();
        let b = rank_relieff(&t, 1).unwrap();
        assert_eq!(a.features, b.features);
        assert_eq!(a.scores, b.scores);
    }

    #[test]
    fn relieff_clamps_k() {
        let t = noisy_table(12, 6);
        let r = rank_relieff(&t, 50).unwrap();
        assert_eq!(r.features.len(), 3);
        assert_eq!(r, rank_relieff(&t, 5).unwrap());
    }

    #[test]
    fn relief_skips_singleton_class() {
        let mut y = vec![Label::Hc; 9];
        y.push(Label::Als);
        let rows = (0..10)
            .map(|i| vec![i as f64, (i * 7 % 5) as f64])
            .collect();
        let r = rank_relief(&table(&["a", "b"], rows, y)).unwrap();
        assert!(r.scores.iter().all(|s| s.is_finite()));
    }

    fn walsh(n: usize, d: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| {
                (1..=d)
                    .map(|j| {
                        if (i & j).count_ones() % 2 == 0 {
                            1.0
                        } else {
                            -1.0
                        }
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn lasso_orthonormal_matches_soft_threshold() {
        let x = walsh(16, 5);
        let beta_true = [0.9, -0.4, 0.2, 0.0, 0.05];
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let y: Vec<f64> = x
            .iter()
            .map(|r| {
                r.iter().zip(&beta_true).map(|(a, b)| a * b).sum::<f64>()
                    + 0.01 * rng.sample::<f64, _>(StandardNormal)
            })
            .collect();
        let ym = crate::dsp::mean(&y);
        let y: Vec<f64> = y.iter().map(|v| v - ym).collect();
        let ols: Vec<f64> = (0..5)
            .map(|j| x.iter().zip(&y).map(|(r, v)| r[j] * v).sum::<f64>() / 16.0)
            .collect();
        let lambda_max = ols.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let grid = lasso_grid(lambda_max);
        let path = lasso_path(&x, &y, &grid);
        for (lambda, b) in grid.iter().zip(&path) {
            let b = b.as_ref().unwrap();
            for j in 0..5 {
                assert!((b[j] - soft_threshold(ols[j], *lambda)).abs() < 1e-6);
            }
        }
        assert!(path[0].as_ref().unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn lasso_groups_duplicates() {
        let t = noisy_table(60, 8);
        let rows = t
            .rows
            .iter()
            .map(|r| vec![r[1], r[0], r[2], r[0]])
            .collect();
        let d = table(&["n", "s1", "w", "s2"], rows, t.labels.clone());
        let r = rank_lasso(&d).unwrap();
        assert_eq!(&r.features[..2], &["s1".to_string(), "s2".to_string()]);
        assert_eq!(r.scores[0], r.scores[1]);
    }

    #[test]
    fn lasso_ignores_feature_scale() {
        let t = noisy_table(60, 9);
        let rows = t
            .rows
            .iter()
            .map(|r| vec![r[0] * 1e3, r[1] * 1e-3, r[2] * 7.0])
            .collect();
        let s = table(&["signal", "noise", "weak"], rows, t.labels.clone());
        assert_eq!(
            rank_lasso(&t).unwrap().features,
            rank_lasso(&s).unwrap().features
        );
    }

    #[test]
    fn bss_drops_planted_noise_first() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let y = alternating(64);
        let x: Vec<Vec<f64>> = y
            .iter()
            .map(|l| {
                let s = l.as_u8() as f64;
                let e = 2.0 * rng.sample::<f64, _>(StandardNormal);
                vec![
                    s + e,
                    rng.sample::<f64, _>(StandardNormal),
                    s - e + 0.2 * rng.sample::<f64, _>(StandardNormal),
                ]
            })
            .collect();
        let p = Protocol::KFold(CvConfig {
            folds: 8,
            repetitions: 5,
            seed: 1,
        });
        let res = backward_stepwise(&[0, 1, 2], |s| cv_accuracy(&x, &y, s, &p)).unwrap();
        assert_eq!(res.trace.first().map(|s| s.removed), Some(1));
        assert!(res.accuracy >= res.initial_accuracy);
        let mut prev = res.initial_accuracy;
        for s in &res.trace {
            assert!(s.accuracy >= prev - 1e-12);
            prev = s.accuracy;
        }
    }

    #[test]
    fn bss_single_feature_unchanged() {
        let res = backward_stepwise(&[4], |_| Ok(90.0)).unwrap();
        assert_eq!(res.subset, vec![4]);
        assert!(res.trace.is_empty());
        assert!(backward_stepwise(&[], |_| Ok(0.0)).is_err());
    }

    #[test]
    fn bss_stops_when_every_removal_hurts() {
        let res = backward_stepwise(&[0, 1, 2], |s| Ok(s.len() as f64)).unwrap();
        assert_eq!(res.subset, vec![0, 1, 2]);
        // equal accuracy: removals continue down to one feature, first on ties
        let res = backward_stepwise(&[5, 6, 7], |_| Ok(1.0)).unwrap();
        assert_eq!(res.subset, vec![7]);
        assert_eq!(
            res.trace.iter().map(|s| s.removed).collect::<Vec<_>>(),
            vec![5, 6]
        );
    }

    #[test]
    fn curve_prefers_smallest_best_prefix() {
        let y = alternating(24);
        let x: Vec<Vec<f64>> = y
            .iter()
            .enumerate()
            .map(|(i, l)| {
                vec![
                    (i % 5) as f64,
                    l.as_u8() as f64 + 0.01 * (i % 3) as f64,
                    (i * 7 % 11) as f64,
                ]
            })
            .collect();
        let p = Protocol::KFold(CvConfig {
            folds: 4,
            repetitions: 3,
            seed: 2,
        });
        let curve = subset_curve(&x, &y, &[1, 0, 2], 3, &p).unwrap();
        assert_eq!(curve.len(), 3);
        assert_eq!(curve[0].acc_mean, 100.0);
        assert_eq!(best_prefix(&curve), Some(1));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn rankings_are_permutations(seed in 0u64..10_000, k in 1usize..8) {
            let t = noisy_table(30, seed);
            for m in [Method::QoV, Method::Relief, Method::RelieFF, Method::Lasso] {
                let r = rank(m, &t, k).unwrap();
                let mut f = r.features.clone();
                f.sort();
                prop_assert_eq!(f, vec!["noise".to_string(), "signal".into(), "weak".into()]);
                prop_assert!(r.scores.windows(2).all(|w| w[0] >= w[1]));
                prop_assert_eq!(&r, &rank(m, &t, k).unwrap());
            }
        }
    }
}
