//! Partisan search-term lexicon from a speaker corpus, state-level search
//! trends and related-query tables.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lexicon::synthetic::{synthetic_inputs, SyntheticConfig};
use crate::lexicon::{
    average_relative_frequency, expand_related, net_search_volume, partisan_loading, rescale_t_values,
    select_search_terms, trend_filter, validate_correlation, PartisanTerm, RelatedQuery, SpeakerCorpus, TermLabel,
    TrendSeries,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LexiconSource {
    Synthetic {
        #[serde(default)]
        synthetic: SyntheticConfig,
    },
    /// CSV inputs; relative paths resolve against the config file's directory.
    Files {
        speakers: PathBuf,
        trends: PathBuf,
        related: PathBuf,
        /// `state,margin` with margin = Republican minus Democrat share.
        margins: PathBuf,
    },
}

fn default_min_days() -> usize {
    50
}
fn default_min_states() -> usize {
    10
}
fn default_n_terms() -> usize {
    50
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out/lexicon")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexiconConfig {
    pub source: LexiconSource,
    #[serde(default = "default_min_days")]
    pub min_days: usize,
    #[serde(default = "default_min_states")]
    pub min_states: usize,
    /// Terms kept per side.
    #[serde(default = "default_n_terms")]
    pub n_terms: usize,
    /// Minimum `|score|` for a term to be kept.
    #[serde(default)]
    pub cutoff: f64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

pub struct LexiconInputs {
    pub speakers: SpeakerCorpus,
    pub trends: TrendSeries,
    pub related: Vec<RelatedQuery>,
    pub margins: BTreeMap<String, f64>,
}

#[derive(Deserialize)]
struct MarginRow {
    state: String,
    margin: f64,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|_| Error::MissingFixture(path.to_path_buf()))
}

impl LexiconConfig {
    pub fn load(path: &Path) -> Result<(Self, PathBuf)> {
        let text = fs::read_to_string(path).map_err(|_| Error::MissingFixture(path.to_path_buf()))?;
        let cfg: Self = serde_json::from_str(&text)?;
        if cfg.n_terms == 0 {
            return Err(invalid("n_terms must be >= 1"));
        }
        Ok((cfg, path.parent().unwrap_or(Path::new(".")).to_path_buf()))
    }

    pub fn inputs(&self, base: &Path, seed: u64) -> Result<LexiconInputs> {
        match &self.source {
            LexiconSource::Synthetic { synthetic } => {
                let s = synthetic_inputs(seed, synthetic)?;
                Ok(LexiconInputs { speakers: s.speakers, trends: s.trends, related: s.related, margins: s.margins })
            }
            LexiconSource::Files { speakers, trends, related, margins } => {
                let margins = csv::Reader::from_reader(open(&base.join(margins))?)
                    .deserialize::<MarginRow>()
                    .map(|r| r.map(|r| (r.state, r.margin)).map_err(Error::from))
                    .collect::<Result<_>>()?;
                Ok(LexiconInputs {
                    speakers: SpeakerCorpus::from_csv(open(&base.join(speakers))?)?,
                    trends: TrendSeries::from_csv(open(&base.join(trends))?)?,
                    related: RelatedQuery::from_csv(open(&base.join(related))?)?,
                    margins,
                })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoadingRow {
    pub phrase: String,
    pub beta: f64,
    pub se: f64,
    pub t: f64,
    pub score: f64,
    pub passes_trend_filter: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateRow {
    pub state: String,
    pub rep: f64,
    pub dem: f64,
    pub net: f64,
    pub margin: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LexiconSummary {
    pub n_phrases: usize,
    pub n_after_trend_filter: usize,
    pub n_democrat: usize,
    pub n_republican: usize,
    pub democrat_shortfall: bool,
    pub republican_shortfall: bool,
    /// Correlation of net partisan search volume with vote margin.
    pub correlation: f64,
}

#[derive(Debug, Clone)]
pub struct LexiconOutput {
    pub loadings: Vec<LoadingRow>,
    pub terms: Vec<PartisanTerm>,
    pub states: Vec<StateRow>,
    pub summary: LexiconSummary,
}

pub fn build_lexicon(cfg: &LexiconConfig, inputs: &LexiconInputs) -> Result<LexiconOutput> {
    let phrases: Vec<String> = inputs.speakers.phrases().into_iter().map(String::from).collect();
    let loadings = phrases
        .iter()
        .map(|p| partisan_loading(&inputs.speakers, p))
        .collect::<Result<Vec<_>>>()?;
    let scores = rescale_t_values(&loadings.iter().map(|l| l.t).collect::<Vec<_>>())?;
    let kept = trend_filter(&phrases, &inputs.trends, cfg.min_days, cfg.min_states);

    let mut rows = Vec::with_capacity(phrases.len());
    let mut base_terms = Vec::new();
    for ((phrase, l), score) in phrases.iter().zip(&loadings).zip(&scores) {
        let passes = kept.binary_search(phrase).is_ok();
        rows.push(LoadingRow { phrase: phrase.clone(), beta: l.beta, se: l.se, t: l.t, score: *score, passes_trend_filter: passes });
        if passes {
            base_terms.push(PartisanTerm::new(phrase.clone(), *score)?);
        }
    }

    let mut selected = Vec::new();
    let mut shortfall = BTreeMap::new();
    for label in [TermLabel::Democrat, TermLabel::Republican] {
        let side: Vec<PartisanTerm> = base_terms.iter().filter(|t| t.label == label).cloned().collect();
        let mut candidates = side.clone();
        for t in &side {
            candidates.extend(expand_related(t, &inputs.related));
        }
        let sel = select_search_terms(&candidates, cfg.cutoff, cfg.n_terms);
        shortfall.insert(label, sel.shortfall);
        selected.extend(sel.terms);
    }

    let side_terms = |label| -> Vec<String> {
        base_terms.iter().filter(|t| t.label == label).map(|t| t.term.clone()).collect()
    };
    let fbar = average_relative_frequency(&inputs.trends);
    let net = net_search_volume(&fbar, &side_terms(TermLabel::Republican), &side_terms(TermLabel::Democrat))?;
    let correlation = validate_correlation(&net, &inputs.margins)?;
    let states = net
        .iter()
        .map(|(s, v)| StateRow { state: s.clone(), rep: v.rep, dem: v.dem, net: v.net, margin: inputs.margins.get(s).copied() })
        .collect();

    let count = |label| selected.iter().filter(|t| t.label == label).count();
    let summary = LexiconSummary {
        n_phrases: phrases.len(),
        n_after_trend_filter: base_terms.len(),
        n_democrat: count(TermLabel::Democrat),
        n_republican: count(TermLabel::Republican),
        democrat_shortfall: shortfall[&TermLabel::Democrat],
        republican_shortfall: shortfall[&TermLabel::Republican],
        correlation,
    };
    Ok(LexiconOutput { loadings: rows, terms: selected, states, summary })
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_lexicon(dir: &Path, out: &LexiconOutput) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_csv(&dir.join("loadings.csv"), &out.loadings)?;
    write_csv(&dir.join("terms.csv"), &out.terms)?;
    write_csv(&dir.join("states.csv"), &out.states)?;
    let mut text = serde_json::to_string_pretty(&out.summary)?;
    text.push('\n');
    fs::write(dir.join("summary.json"), text)?;
    Ok(())
}
