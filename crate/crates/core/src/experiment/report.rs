//! Tables and figures from an artifact directory: similarity histograms,
//! similarity against time gap, familiarity effects and SRIS coefficients.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::svg::{self, Dot, HistBin, Series};
use super::{files, open_artifact, AnalysisConfig, FitStatus, HypothesisRow, CONTINUOUS_REGRESSORS, GROUP_REGRESSORS, SRIS_OUTCOMES};
use crate::econometrics::{z_975, LevelEffect, RegressionRow};
use crate::error::{invalid, Error, Result};
use crate::rank_similarity::{read_similarity_csv, ListKind, SimilarityRow};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilaritySummary {
    pub list_kind: ListKind,
    pub measure: String,
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    pub share_identical: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct HistRow {
    bin_low: f64,
    bin_high: f64,
    count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub list_kind: ListKind,
    pub max_gap_hours: f64,
    pub n: usize,
    pub mean_jaccard: f64,
    pub mean_rbo: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRow {
    pub model: String,
    pub term: String,
    pub estimate: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub p: f64,
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    pub similarity: Vec<SimilaritySummary>,
    pub gap_curve: Vec<GapRow>,
    pub sris_effects: Vec<CoefficientRow>,
    pub skipped_fits: Vec<String>,
}

fn read_rows<T: DeserializeOwned>(dir: &Path, name: &str) -> Result<Vec<T>> {
    csv::Reader::from_reader(open_artifact(dir, name)?)
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        f64::NAN
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

fn median(sorted: &[f64]) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        n if n % 2 == 1 => sorted[n / 2],
        n => (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0,
    }
}

fn histogram(sorted: &[f64], n_bins: usize) -> Vec<HistBin> {
    let mut counts = vec![0usize; n_bins];
    for &v in sorted {
        let k = ((v * n_bins as f64).floor() as usize).min(n_bins - 1);
        counts[k] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(k, count)| HistBin { lo: k as f64 / n_bins as f64, hi: (k + 1) as f64 / n_bins as f64, count })
        .collect()
}

fn kind_name(kind: ListKind) -> &'static str {
    match kind {
        ListKind::Organic => "organic",
        ListKind::TopStories => "top_stories",
    }
}

fn similarity_section(out: &Path, rows: &[SimilarityRow], cfg: &AnalysisConfig, report: &mut Report) -> Result<()> {
    for kind in [ListKind::Organic, ListKind::TopStories] {
        let of_kind: Vec<&SimilarityRow> = rows.iter().filter(|r| r.list_kind == kind).collect();
        for (measure, get) in [("jaccard", (|r: &SimilarityRow| r.jaccard) as fn(&SimilarityRow) -> f64), ("rbo", |r| r.rbo_ext)] {
            let mut values: Vec<f64> = of_kind.iter().map(|r| get(r)).collect();
            values.sort_by(f64::total_cmp);
            let (m, med) = (mean(&values), median(&values));
            let identical = values.iter().filter(|&&v| v >= 1.0).count();
            report.similarity.push(SimilaritySummary {
                list_kind: kind,
                measure: measure.into(),
                n: values.len(),
                mean: m,
                median: med,
                share_identical: if values.is_empty() { f64::NAN } else { identical as f64 / values.len() as f64 },
            });
            let bins = histogram(&values, cfg.histogram_bins);
            let stem = format!("similarity_hist_{}_{measure}", kind_name(kind));
            let hist: Vec<HistRow> = bins.iter().map(|b| HistRow { bin_low: b.lo, bin_high: b.hi, count: b.count }).collect();
            write_rows(&out.join(format!("{stem}.csv")), &hist)?;
            let title = format!("{} pairwise {measure}", kind_name(kind));
            fs::write(out.join(format!("{stem}.svg")), svg::histogram(&title, measure, &bins, m, med))?;
        }

        let mut thresholds = cfg.gap_thresholds_hours.clone();
        thresholds.sort_by(f64::total_cmp);
        let mut curve = Vec::new();
        for &h in &thresholds {
            let within: Vec<&&SimilarityRow> = of_kind.iter().filter(|r| r.gap_hours <= h).collect();
            let j: Vec<f64> = within.iter().map(|r| r.jaccard).collect();
            let r: Vec<f64> = within.iter().map(|r| r.rbo_ext).collect();
            curve.push(GapRow { list_kind: kind, max_gap_hours: h, n: within.len(), mean_jaccard: mean(&j), mean_rbo: mean(&r) });
        }
        let series = [
            Series { name: "Jaccard".into(), points: curve.iter().map(|g| (g.max_gap_hours, g.mean_jaccard)).collect() },
            Series { name: "RBO".into(), points: curve.iter().map(|g| (g.max_gap_hours, g.mean_rbo)).collect() },
        ];
        let title = format!("{} similarity by maximum time gap", kind_name(kind));
        let svg = svg::lines(&title, "maximum gap between queries (hours)", "mean similarity", &series);
        fs::write(out.join(format!("gap_curve_{}.svg", kind_name(kind))), svg)?;
        report.gap_curve.extend(curve);
    }
    write_rows(&out.join("similarity_summary.csv"), &report.similarity)?;
    write_rows(&out.join("gap_curve.csv"), &report.gap_curve)?;
    Ok(())
}

fn coefficients(model: &str, table: &[RegressionRow], terms: &[&str]) -> Result<Vec<CoefficientRow>> {
    let z = z_975();
    terms
        .iter()
        .map(|term| {
            let r = table
                .iter()
                .find(|r| r.term == *term)
                .ok_or_else(|| invalid(format!("{model} table lacks term {term}")))?;
            Ok(CoefficientRow {
                model: model.into(),
                term: r.term.clone(),
                estimate: r.estimate,
                se: r.clustered_se,
                ci_low: r.estimate - z * r.clustered_se,
                ci_high: r.estimate + z * r.clustered_se,
                p: r.p,
            })
        })
        .collect()
}

fn fit_section(dir: &Path, out: &Path, report: &mut Report) -> Result<()> {
    let fits = format!("{}/", files::FITS);
    let status: BTreeMap<String, FitStatus> = read_rows::<FitStatus>(dir, &format!("{fits}status.csv"))?
        .into_iter()
        .map(|s| (s.name.clone(), s))
        .collect();
    let available = |name: &str| -> Result<bool> {
        match status.get(name) {
            None => Err(Error::MissingArtifact(format!("{fits}status.csv entry {name}"))),
            Some(s) => Ok(s.status == "ok"),
        }
    };

    for suffix in ["organic", "top_stories"] {
        let name = format!("familiarity_{suffix}");
        if !available(&name)? {
            report.skipped_fits.push(name);
            continue;
        }
        let levels: Vec<LevelEffect> = read_rows(dir, &format!("{fits}{name}.csv"))?;
        write_rows(&out.join(format!("{name}.csv")), &levels)?;
        let dots: Vec<Dot> = levels
            .iter()
            .map(|l| Dot { label: l.level.clone(), estimate: l.estimate, low: l.ci_low, high: l.ci_high })
            .collect();
        let title = format!("Familiar domains in {} results by prior visits", suffix.replace('_', " "));
        fs::write(out.join(format!("{name}.svg")), svg::dot_ci(&title, "prior visits", "marginal effect", &dots))?;
    }

    let mut rank_rows = Vec::new();
    for suffix in ["organic", "top_stories"] {
        let name = format!("familiar_rank_{suffix}");
        if !available(&name)? {
            report.skipped_fits.push(name);
            continue;
        }
        let table: Vec<RegressionRow> = read_rows(dir, &format!("{fits}{name}.csv"))?;
        rank_rows.extend(coefficients(&name, &table, &["prior_visits"])?);
    }
    write_rows(&out.join("familiar_rank.csv"), &rank_rows)?;

    let mut continuous = Vec::new();
    for outcome in SRIS_OUTCOMES {
        if available(outcome)? {
            let table: Vec<RegressionRow> = read_rows(dir, &format!("{fits}{outcome}.csv"))?;
            report.sris_effects.extend(coefficients(outcome, &table, &GROUP_REGRESSORS)?);
        } else {
            report.skipped_fits.push(outcome.into());
        }
        let name = format!("{outcome}_continuous");
        if available(&name)? {
            let table: Vec<RegressionRow> = read_rows(dir, &format!("{fits}{name}.csv"))?;
            continuous.extend(coefficients(&name, &table, &CONTINUOUS_REGRESSORS)?);
        } else {
            report.skipped_fits.push(name);
        }
    }
    write_rows(&out.join("sris_effects.csv"), &report.sris_effects)?;
    write_rows(&out.join("sris_continuous.csv"), &continuous)?;
    for outcome in SRIS_OUTCOMES {
        let dots: Vec<Dot> = report
            .sris_effects
            .iter()
            .filter(|c| c.model == outcome)
            .map(|c| Dot { label: c.term.clone(), estimate: c.estimate, low: c.ci_low, high: c.ci_high })
            .collect();
        if !dots.is_empty() {
            let svg = svg::dot_ci(&format!("{outcome} by user and city partisanship"), "indicator", "coefficient", &dots);
            fs::write(out.join(format!("{outcome}.svg")), svg)?;
        }
    }

    let hypotheses: Vec<HypothesisRow> = read_rows(dir, &format!("{fits}hypotheses.csv"))?;
    write_rows(&out.join("hypotheses.csv"), &hypotheses)?;
    Ok(())
}

/// Builds `report/` inside `dir` from the similarity table and fit outputs.
pub fn report(dir: &Path, cfg: &AnalysisConfig) -> Result<Report> {
    if cfg.histogram_bins == 0 {
        return Err(invalid("histogram_bins must be >= 1"));
    }
    let similarity = read_similarity_csv(open_artifact(dir, files::SIMILARITY)?)?;
    let out = dir.join(files::REPORT);
    fs::create_dir_all(&out)?;
    let mut report = Report::default();
    similarity_section(&out, &similarity, cfg, &mut report)?;
    fit_section(dir, &out, &mut report)?;
    Ok(report)
}
