use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use chrono::NaiveDate;
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct TrendObservation {
    pub term: String,
    pub state: String,
    pub date: NaiveDate,
    /// Relative search frequency on `[0, 100]`.
    pub value: f64,
    #[serde(deserialize_with = "flag")]
    pub is_reference: bool,
}

fn flag<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<bool, D::Error> {
    let s = String::deserialize(d)?;
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" => Ok(true),
        "0" | "false" | "no" | "" => Ok(false),
        other => Err(serde::de::Error::custom(format!("bad flag `{other}`"))),
    }
}

#[derive(Debug, Clone, Default)]
pub struct TrendSeries {
    pub observations: Vec<TrendObservation>,
}

impl TrendSeries {
    /// Reads `term,state,date,value,is_reference`.
    pub fn from_csv<R: Read>(r: R) -> Result<Self> {
        let mut observations = Vec::new();
        for row in csv::Reader::from_reader(r).deserialize() {
            let obs: TrendObservation = row?;
            if !(0.0..=100.0).contains(&obs.value) {
                return Err(invalid(format!("trend value {} outside [0,100]", obs.value)));
            }
            observations.push(obs);
        }
        Ok(TrendSeries { observations })
    }
}

/// Keeps terms used (value > 0) on at least `min_days` distinct days and in
/// at least `min_states` distinct states. Input order is preserved.
pub fn trend_filter(terms: &[String], series: &TrendSeries, min_days: usize, min_states: usize) -> Vec<String> {
    let mut days: BTreeMap<&str, BTreeSet<NaiveDate>> = BTreeMap::new();
    let mut states: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for o in series.observations.iter().filter(|o| o.value > 0.0) {
        days.entry(&o.term).or_default().insert(o.date);
        states.entry(&o.term).or_default().insert(&o.state);
    }
    terms
        .iter()
        .filter(|t| {
            days.get(t.as_str()).map_or(0, BTreeSet::len) >= min_days
                && states.get(t.as_str()).map_or(0, BTreeSet::len) >= min_states
        })
        .cloned()
        .collect()
}

/// Per `(term, state)`: the mean over days of the term's frequency relative to
/// the reference term, normalized by that ratio's maximum over all states
/// and days and scaled to `[0, 100]`. Days where the reference reads 0 are
/// skipped.
pub fn average_relative_frequency(series: &TrendSeries) -> BTreeMap<(String, String), f64> {
    let reference: BTreeMap<(&str, NaiveDate), f64> = series
        .observations
        .iter()
        .filter(|o| o.is_reference)
        .map(|o| ((o.state.as_str(), o.date), o.value))
        .collect();

    let mut ratios: BTreeMap<&str, BTreeMap<&str, Vec<f64>>> = BTreeMap::new();
    for o in series.observations.iter().filter(|o| !o.is_reference) {
        if let Some(&r) = reference.get(&(o.state.as_str(), o.date)) {
            if r > 0.0 {
                ratios.entry(&o.term).or_default().entry(&o.state).or_default().push(o.value / r);
            }
        }
    }

    let mut out = BTreeMap::new();
    for (term, by_state) in ratios {
        let max = by_state.values().flatten().fold(0.0f64, |m, &x| m.max(x));
        for (state, rs) in by_state {
            let mean = if max > 0.0 {
                rs.iter().map(|r| r / max * 100.0).sum::<f64>() / rs.len() as f64
            } else {
                0.0
            };
            out.insert((term.to_string(), state.to_string()), mean);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NetVolume {
    pub rep: f64,
    pub dem: f64,
    pub net: f64,
}

/// Republican and Democrat search volume per state from averaged relative
/// frequencies (`term, state → [0,100]`); terms without data in a state count 0.
pub fn net_search_volume(
    fbar: &BTreeMap<(String, String), f64>,
    rep_terms: &[String],
    dem_terms: &[String],
) -> Result<BTreeMap<String, NetVolume>> {
    if rep_terms.is_empty() || dem_terms.is_empty() {
        return Err(invalid("need at least one term per side"));
    }
    let states: BTreeSet<&str> = fbar.keys().map(|(_, s)| s.as_str()).collect();
    let volume = |terms: &[String], state: &str| {
        terms
            .iter()
            .map(|t| fbar.get(&(t.clone(), state.to_string())).copied().unwrap_or(0.0))
            .sum::<f64>()
            / (terms.len() as f64 * 100.0)
    };
    Ok(states
        .into_iter()
        .map(|s| {
            let rep = volume(rep_terms, s);
            let dem = volume(dem_terms, s);
            (s.to_string(), NetVolume { rep, dem, net: rep - dem })
        })
        .collect())
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(invalid("vectors differ in length"));
    }
    if x.len() < 3 {
        return Err(invalid("need at least 3 points"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate("zero variance".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Correlation of net search volume with vote margins, matched by state.
pub fn validate_correlation(net: &BTreeMap<String, NetVolume>, margins: &BTreeMap<String, f64>) -> Result<f64> {
    let (x, y): (Vec<f64>, Vec<f64>) = net
        .iter()
        .filter_map(|(s, v)| margins.get(s).map(|m| (v.net, *m)))
        .unzip();
    pearson(&x, &y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TermLabel {
    Democrat,
    Republican,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartisanTerm {
    pub term: String,
    /// Position on `[-1, 1]`, negative = liberal.
    pub score: f64,
    pub label: TermLabel,
}

impl PartisanTerm {
    pub fn new(term: impl Into<String>, score: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&score) {
            return Err(invalid(format!("term score {score} outside [-1,1]")));
        }
        let label = if score < 0.0 { TermLabel::Democrat } else { TermLabel::Republican };
        Ok(PartisanTerm { term: term.into(), score, label })
    }
}

/// One related-query row: `(term, related_query, top_metric)`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct RelatedQuery {
    pub term: String,
    pub related_query: String,
    pub top_metric: f64,
}

impl RelatedQuery {
    pub fn from_csv<R: Read>(r: R) -> Result<Vec<Self>> {
        csv::Reader::from_reader(r)
            .deserialize()
            .map(|row| row.map_err(Error::from))
            .collect()
    }
}

/// Related queries searched at least 90% as often as `term`, carrying its
/// score.
///
/// The term's own metric is its self row `(term, term, m)` when present,
/// otherwise 100, the top of the related-queries scale.
pub fn expand_related(term: &PartisanTerm, related: &[RelatedQuery]) -> Vec<PartisanTerm> {
    let rows: Vec<&RelatedQuery> = related.iter().filter(|r| r.term == term.term).collect();
    let base = rows
        .iter()
        .find(|r| r.related_query == term.term)
        .map_or(100.0, |r| r.top_metric);
    rows.into_iter()
        .filter(|r| r.related_query != term.term)
        // m >= 0.9·base, kept in exact integer-ish arithmetic
        .filter(|r| r.top_metric * 10.0 >= base * 9.0)
        .map(|r| PartisanTerm {
            term: r.related_query.clone(),
            score: term.score,
            label: term.label,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub terms: Vec<PartisanTerm>,
    pub shortfall: bool,
}

/// Terms with `|score| > cutoff`, strongest first (ties on the term string),
/// at most `n`. Duplicate terms keep their strongest score.
pub fn select_search_terms(candidates: &[PartisanTerm], cutoff: f64, n: usize) -> Selection {
    let mut best: BTreeMap<&str, &PartisanTerm> = BTreeMap::new();
    for c in candidates.iter().filter(|c| c.score.abs() > cutoff) {
        best.entry(&c.term)
            .and_modify(|e| {
                if c.score.abs() > e.score.abs() {
                    *e = c;
                }
            })
            .or_insert(c);
    }
    let mut terms: Vec<PartisanTerm> = best.into_values().cloned().collect();
    terms.sort_by(|a, b| b.score.abs().total_cmp(&a.score.abs()).then_with(|| a.term.cmp(&b.term)));
    let shortfall = terms.len() < n;
    terms.truncate(n);
    Selection { terms, shortfall }
}
