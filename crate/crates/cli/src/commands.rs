use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use log::{info, warn};

use vowelmark::dataset::{
    import_directory, load_corpus, write_manifest, CorpusManifest, EARLY_ALS_SUBJECTS,
    MINSK_ALS_SUBJECTS,
};
use vowelmark::extract::{extract_corpus, write_logs};
use vowelmark::featureset::{
    correlation_survey, density_export, write_density, write_survey, FeatureTable,
};
use vowelmark::model::{
    columns, evaluate, metrics, Confusion, CvConfig, EvalReport, LdaModel, Protocol,
};
use vowelmark::select::{
    backward_stepwise, best_prefix, cv_accuracy, rank, subset_curve, BssResult, Method,
};
use vowelmark::Error;

use crate::{Cli, Command, Common};

pub fn run(cli: &Cli) -> Result<()> {
    let c = &cli.common;
    match &cli.command {
        Command::Ingest { root } => ingest(c, root.as_deref()),
        Command::Extract => extract(c),
        Command::Survey { top } => survey(c, *top),
        Command::Select { bss } => select(c, *bss),
        Command::Train => train(c),
        Command::Cv => cv(c),
        Command::Pipeline { max_n } => pipeline(c, *max_n),
        Command::Report { model } => report(c, model.as_deref()),
    }
}

fn out_dir(c: &Common) -> Result<&Path> {
    fs::create_dir_all(&c.out).with_context(|| format!("creating {}", c.out.display()))?;
    Ok(&c.out)
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn read_list(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let items: Vec<String> = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect();
    if items.is_empty() {
        return Err(Error::InvalidInput(format!("{} lists nothing", path.display())).into());
    }
    Ok(items)
}

/// Subject ids selected by `--subjects` / `--early`, if any.
fn subject_filter(c: &Common, hc_ids: impl Iterator<Item = String>) -> Result<Option<Vec<String>>> {
    let mut keep: Option<Vec<String>> = match &c.subjects {
        Some(p) => Some(read_list(p)?),
        None => None,
    };
    if c.early {
        let mut ids: Vec<String> = hc_ids.collect();
        ids.extend(EARLY_ALS_SUBJECTS.iter().map(|s| s.to_string()));
        keep = Some(match keep {
            Some(k) => k.into_iter().filter(|id| ids.contains(id)).collect(),
            None => ids,
        });
    }
    Ok(keep)
}

fn table_path(c: &Common) -> PathBuf {
    c.table
        .clone()
        .unwrap_or_else(|| c.out.join("features.csv"))
}

/// The feature table restricted to the selected subjects.
fn load_table(c: &Common) -> Result<FeatureTable> {
    let path = table_path(c);
    let table = FeatureTable::read_csv(&path)
        .with_context(|| format!("reading feature table {}", path.display()))?;
    let hc = table
        .subject_ids
        .iter()
        .zip(&table.labels)
        .filter(|(_, l)| !l.is_positive())
        .map(|(id, _)| id.clone());
    match subject_filter(c, hc)? {
        Some(keep) => {
            let idx: Vec<usize> = (0..table.n_rows())
                .filter(|&r| keep.contains(&table.subject_ids[r]))
                .collect();
            if idx.is_empty() {
                return Err(Error::InvalidInput("subject filter leaves no rows".into()).into());
            }
            Ok(table.select_rows(&idx))
        }
        None => Ok(table),
    }
}

/// The table restricted to `--subset` columns when given.
fn load_subset_table(c: &Common) -> Result<FeatureTable> {
    let table = load_table(c)?;
    match &c.subset {
        Some(p) => {
            let names = read_list(p)?;
            let idx = table.indices_of(&names)?;
            Ok(table.select_columns(&idx))
        }
        None => Ok(table),
    }
}

fn protocol(c: &Common) -> Protocol {
    if c.loso {
        Protocol::Loso
    } else {
        Protocol::KFold(CvConfig {
            folds: c.folds,
            repetitions: c.reps,
            seed: c.seed,
        })
    }
}

fn protocol_label(c: &Common) -> String {
    if c.loso {
        "leave-one-subject-out".into()
    } else {
        format!("{}-fold x {} (seed {})", c.folds, c.reps, c.seed)
    }
}

fn summary_line(r: &EvalReport) -> String {
    format!(
        "accuracy {:.2} +/- {:.2}  sensitivity {:.2} +/- {:.2}  specificity {:.2} +/- {:.2}",
        r.acc_mean, r.acc_sd, r.sens_mean, r.sens_sd, r.spec_mean, r.spec_sd
    )
}

fn ingest(c: &Common, root: Option<&Path>) -> Result<()> {
    let manifest = match (root, &c.manifest) {
        (Some(r), _) => CorpusManifest::from_entries(import_directory(r, &MINSK_ALS_SUBJECTS)?)?,
        (None, Some(m)) => load_corpus(m)?,
        (None, None) => {
            return Err(
                Error::InvalidInput("give a recordings directory or --manifest".into()).into(),
            )
        }
    };
    let out = out_dir(c)?.join("manifest.csv");
    write_manifest(&out, &manifest.entries)?;
    let (hc, als) = manifest.class_counts();
    println!(
        "{} subjects (HC={hc}, ALS={als}) -> {}",
        manifest.subjects.len(),
        out.display()
    );
    Ok(())
}

fn extract(c: &Common) -> Result<()> {
    let path = c
        .manifest
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("extract needs --manifest".into()))?;
    let mut manifest = load_corpus(path)?;
    let hc = manifest
        .subjects
        .iter()
        .filter(|s| !s.label.is_positive())
        .map(|s| s.subject_id.clone());
    if let Some(keep) = subject_filter(c, hc.collect::<Vec<_>>().into_iter())? {
        manifest = manifest.restrict_to(&keep)?;
    }
    info!("extracting {} subjects", manifest.subjects.len());
    let ex = extract_corpus(&manifest)?;
    let out = out_dir(c)?;
    let table = out.join("features.csv");
    ex.table.write_csv(&table)?;
    write_logs(&out.join("extraction_log.tsv"), &ex.logs)?;
    let incomplete = ex
        .table
        .missing_per_row()
        .iter()
        .filter(|&&m| m > 0)
        .count();
    println!(
        "{} rows x {} features -> {} ({incomplete} row(s) with missing values)",
        ex.table.n_rows(),
        ex.table.n_features(),
        table.display()
    );
    Ok(())
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|ch| {
            if ch.is_ascii_alphanumeric() || ch == '_' {
                ch
            } else {
                '_'
            }
        })
        .collect()
}

fn survey(c: &Common, top: usize) -> Result<()> {
    let table = load_table(c)?;
    let entries = correlation_survey(&table)?;
    let out = out_dir(c)?;
    write_survey(&out.join("survey.tsv"), &entries)?;
    let dir = out.join("density");
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    for e in entries.iter().take(top) {
        let j = table
            .index_of(&e.feature)
            .expect("survey names come from the table");
        match density_export(&table.column(j), &table.labels) {
            Ok(d) => write_density(
                &dir.join(format!("{}.tsv", sanitize(&e.feature))),
                &e.feature,
                &d,
            )?,
            Err(err) => warn!("{}: no density export ({err})", e.feature),
        }
    }
    for (k, e) in entries.iter().take(top.max(5)).enumerate() {
        println!(
            "{:>3}  {:<14} r = {:+.3}  p = {:.2e}",
            k + 1,
            e.feature,
            e.r,
            e.p
        );
    }
    Ok(())
}

fn render_bss(names: &[String], res: &BssResult) -> String {
    let mut s = format!(
        "round\tremoved\taccuracy\n0\t-\t{:.4}\n",
        res.initial_accuracy
    );
    for (k, step) in res.trace.iter().enumerate() {
        let _ = writeln!(
            s,
            "{}\t{}\t{:.4}",
            k + 1,
            names[step.removed],
            step.accuracy
        );
    }
    s
}

fn subset_text(names: &[String], idx: &[usize]) -> String {
    idx.iter().map(|&j| format!("{}\n", names[j])).collect()
}

fn select(c: &Common, bss: Option<usize>) -> Result<()> {
    let table = load_table(c)?;
    let method: Method = c.fs.into();
    let ranking = rank(method, &table, c.k_neighbors)?;
    let out = out_dir(c)?;
    write(
        &out.join(format!("ranking_{method}.tsv")),
        &ranking.render(),
    )?;
    println!("{method} ranking, top 10: {}", ranking.top(10).join(", "));
    if let Some(n) = bss {
        let start = table.indices_of(ranking.top(n))?;
        let p = protocol(c);
        let res = backward_stepwise(&start, |s| {
            cv_accuracy(&table.rows, &table.labels, s, &p)
        })?;
        write(
            &out.join(format!("bss_{method}_{n}.tsv")),
            &render_bss(&table.names, &res),
        )?;
        write(
            &out.join(format!("subset_{method}_{n}.txt")),
            &subset_text(&table.names, &res.subset),
        )?;
        println!(
            "backward selection from {n}: {} feature(s), accuracy {:.2} -> {:.2}",
            res.subset.len(),
            res.initial_accuracy,
            res.accuracy
        );
    }
    Ok(())
}

fn train(c: &Common) -> Result<()> {
    let table = load_subset_table(c)?;
    let model = LdaModel::train(&table.names, &table.rows, &table.labels)?;
    let path = out_dir(c)?.join("model.json");
    model.save(&path)?;
    let mut conf = Confusion::default();
    for (row, l) in table.rows.iter().zip(&table.labels) {
        conf.add(*l, model.predict(row)?.0);
    }
    let m = metrics(&conf)?;
    println!(
        "{} features, training accuracy {:.2} -> {}",
        table.n_features(),
        m.accuracy,
        path.display()
    );
    Ok(())
}

fn cv(c: &Common) -> Result<()> {
    let table = load_subset_table(c)?;
    let report = evaluate(&table.rows, &table.labels, &protocol(c))?;
    let out = out_dir(c)?;
    let text = format!(
        "# protocol\t{}\n# features\t{}\n{}",
        protocol_label(c),
        table.n_features(),
        report.render()
    );
    write(&out.join("cv_report.tsv"), &text)?;
    println!("{}", summary_line(&report));
    Ok(())
}

fn render_curve(names: &[String], order: &[usize], curve: &[EvalReport]) -> String {
    let mut s = String::from("n,added,acc_mean,acc_sd,sens_mean,sens_sd,spec_mean,spec_sd\n");
    for (k, r) in curve.iter().enumerate() {
        let _ = writeln!(
            s,
            "{},{},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4}",
            k + 1,
            names[order[k]],
            r.acc_mean,
            r.acc_sd,
            r.sens_mean,
            r.sens_sd,
            r.spec_mean,
            r.spec_sd
        );
    }
    s
}

fn pipeline(c: &Common, max_n: Option<usize>) -> Result<()> {
    let table = load_table(c)?;
    let method: Method = c.fs.into();
    let p = protocol(c);
    let out = out_dir(c)?;

    let ranking = rank(method, &table, c.k_neighbors)?;
    write(
        &out.join(format!("ranking_{method}.tsv")),
        &ranking.render(),
    )?;
    let order = table.indices_of(&ranking.features)?;
    let max_n = max_n.unwrap_or(order.len()).clamp(1, order.len());
    info!("sweeping subset sizes 1..={max_n}");
    let curve = subset_curve(&table.rows, &table.labels, &order, max_n, &p)?;
    write(
        &out.join(format!("curve_{method}.csv")),
        &render_curve(&table.names, &order, &curve),
    )?;
    let best_n = best_prefix(&curve).expect("curve has at least one point");

    info!("backward selection from the best {best_n}");
    let bss = backward_stepwise(&order[..best_n], |s| {
        cv_accuracy(&table.rows, &table.labels, s, &p)
    })?;
    write(
        &out.join(format!("bss_{method}_{best_n}.tsv")),
        &render_bss(&table.names, &bss),
    )?;
    write(
        &out.join("subset.txt"),
        &subset_text(&table.names, &bss.subset),
    )?;

    let final_report = evaluate(&columns(&table.rows, &bss.subset), &table.labels, &p)?;
    let names: Vec<String> = bss.subset.iter().map(|&j| table.names[j].clone()).collect();
    let model = LdaModel::train(&names, &columns(&table.rows, &bss.subset), &table.labels)?;
    model.save(&out.join("model.json"))?;

    let (hc, als) = table.class_counts();
    let mut s = String::new();
    let _ = writeln!(s, "subjects\t{} (HC={hc}, ALS={als})", table.n_rows());
    let _ = writeln!(s, "ranking\t{method}");
    let _ = writeln!(s, "protocol\t{}", protocol_label(c));
    let _ = writeln!(
        s,
        "best_prefix\t{best_n}\t{:.4}",
        curve[best_n - 1].acc_mean
    );
    let _ = writeln!(s, "after_bss\t{}\t{:.4}", bss.subset.len(), bss.accuracy);
    let _ = writeln!(
        s,
        "accuracy\t{:.4}\t{:.4}",
        final_report.acc_mean, final_report.acc_sd
    );
    let _ = writeln!(
        s,
        "sensitivity\t{:.4}\t{:.4}",
        final_report.sens_mean, final_report.sens_sd
    );
    let _ = writeln!(
        s,
        "specificity\t{:.4}\t{:.4}",
        final_report.spec_mean, final_report.spec_sd
    );
    let _ = writeln!(s, "features\t{}", names.join(","));
    write(&out.join("pipeline_report.tsv"), &s)?;
    write(&out.join("cv_report.tsv"), &final_report.render())?;
    println!(
        "{method}: best prefix N={best_n} ({:.2}%), after backward selection {} feature(s)",
        curve[best_n - 1].acc_mean,
        names.len()
    );
    println!("{}", summary_line(&final_report));
    Ok(())
}

fn report(c: &Common, model_path: Option<&Path>) -> Result<()> {
    let path = model_path
        .map(Path::to_path_buf)
        .unwrap_or_else(|| c.out.join("model.json"));
    let model = LdaModel::load(&path)?;
    let table = load_table(c)?;
    let idx = table.indices_of(&model.feature_names)?;
    let mut conf = Confusion::default();
    let mut s = String::from("subject_id\tlabel\tpredicted\tscore\n");
    for r in 0..table.n_rows() {
        let row: Vec<f64> = idx.iter().map(|&j| table.rows[r][j]).collect();
        let (pred, score) = model.predict(&row)?;
        conf.add(table.labels[r], pred);
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{:.6}",
            table.subject_ids[r],
            table.labels[r].as_u8(),
            pred.as_u8(),
            score
        );
    }
    let out = out_dir(c)?;
    write(&out.join("predictions.tsv"), &s)?;
    let m = metrics(&conf)?;
    let fmt = |v: Option<f64>| v.map(|x| format!("{x:.2}")).unwrap_or_else(|| "NA".into());
    println!(
        "TP={} TN={} FP={} FN={}  accuracy {:.2}  sensitivity {}  specificity {}",
        conf.tp,
        conf.tn,
        conf.fp,
        conf.fn_,
        m.accuracy,
        fmt(m.sensitivity),
        fmt(m.specificity)
    );
    Ok(())
}
