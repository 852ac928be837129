//! Seeded synthetic inputs for the lexicon pipeline: a side-tagged corpus
//! with planted partisan items, a speaker corpus with ideological slopes,
//! state-level search trends and related-query tables.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{Days, NaiveDate};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::{RelatedQuery, Side, Speaker, SpeakerCorpus, TaggedCounts, TrendObservation, TrendSeries};
use crate::error::{invalid, Result};
use crate::seed;

const TAG_CORPUS: u64 = 0xC0;
const TAG_SPEAKERS: u64 = 0x5E;
const TAG_TRENDS: u64 = 0x7E;

pub const REFERENCE_TERM: &str = "weather";

fn poisson(rng: &mut impl Rng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive mean").sample(rng) as u64
}

pub struct PlantedCorpus {
    pub counts: TaggedCounts,
    pub planted: BTreeSet<String>,
}

/// `n_neutral` items used equally by both sides and `n_planted` items that
/// `side` uses `skew` times as often; base rates are uniform on `[50, 150]`.
pub fn planted_corpus(seed: u64, n_planted: usize, n_neutral: usize, skew: f64, side: Side) -> Result<PlantedCorpus> {
    if !(skew > 0.0 && skew.is_finite()) {
        return Err(invalid("skew must be positive"));
    }
    let mut rng = seed::rng(seed, &[TAG_CORPUS]);
    let mut ids: Vec<usize> = (0..n_planted + n_neutral).collect();
    ids.shuffle(&mut rng);
    let mut counts = TaggedCounts::new();
    let mut planted = BTreeSet::new();
    for (k, id) in ids.into_iter().enumerate() {
        let item = format!("bigram {id:04}");
        let base = rng.random_range(50.0..150.0);
        let (mut r, mut d) = (base, base);
        if k < n_planted {
            planted.insert(item.clone());
            match side {
                Side::R => r *= skew,
                Side::D => d *= skew,
            }
        }
        counts.add(&item, Side::R, poisson(&mut rng, r));
        counts.add(&item, Side::D, poisson(&mut rng, d));
    }
    Ok(PlantedCorpus { counts, planted })
}

fn default_n_speakers() -> usize {
    80
}
fn default_n_phrases() -> usize {
    160
}
fn default_n_states() -> usize {
    20
}
fn default_n_days() -> usize {
    120
}
fn default_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2019, 1, 1).expect("valid date")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    #[serde(default = "default_n_speakers")]
    pub n_speakers: usize,
    /// Phrases in the speaker corpus; a third lean left, a third right.
    #[serde(default = "default_n_phrases")]
    pub n_phrases: usize,
    #[serde(default = "default_n_states")]
    pub n_states: usize,
    #[serde(default = "default_n_days")]
    pub n_days: usize,
    #[serde(default = "default_start")]
    pub start_date: NaiveDate,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_speakers: default_n_speakers(),
            n_phrases: default_n_phrases(),
            n_states: default_n_states(),
            n_days: default_n_days(),
            start_date: default_start(),
        }
    }
}

pub struct SyntheticInputs {
    pub speakers: SpeakerCorpus,
    pub trends: TrendSeries,
    pub related: Vec<RelatedQuery>,
    /// Republican minus Democrat vote share per state, in points.
    pub margins: BTreeMap<String, f64>,
}

/// Phrase `i` leans left for `i % 3 == 0`, right for `i % 3 == 1`, and is
/// neutral otherwise.
fn phrase_lean(i: usize) -> f64 {
    match i % 3 {
        0 => -1.0,
        1 => 1.0,
        _ => 0.0,
    }
}

pub fn phrase_name(i: usize) -> String {
    format!("phrase {i:03}")
}

pub fn synthetic_inputs(seed: u64, cfg: &SyntheticConfig) -> Result<SyntheticInputs> {
    if cfg.n_speakers < 3 || cfg.n_phrases < 3 || cfg.n_states < 3 || cfg.n_days < 1 {
        return Err(invalid("synthetic lexicon needs >= 3 speakers, phrases and states and >= 1 day"));
    }
    let mut rng = seed::rng(seed, &[TAG_SPEAKERS]);
    let mut speakers = SpeakerCorpus::default();
    let strengths: Vec<f64> = (0..cfg.n_phrases).map(|_| rng.random_range(0.6..1.4)).collect();
    for c in 0..cfg.n_speakers {
        let ideology: f64 = rng.random_range(-1.0..=1.0);
        let mut s = Speaker { ideology, counts: BTreeMap::new() };
        for (i, strength) in strengths.iter().enumerate() {
            let mean = 20.0 * (1.5 * phrase_lean(i) * strength * ideology).exp();
            s.counts.insert(phrase_name(i), poisson(&mut rng, mean));
        }
        speakers.speakers.insert(format!("speaker {c:03}"), s);
    }

    let mut rng = seed::rng(seed, &[TAG_TRENDS]);
    let states: Vec<(String, f64)> =
        (0..cfg.n_states).map(|s| (format!("S{s:02}"), rng.random_range(0.3..0.7))).collect();
    let margins = states.iter().map(|(s, r)| (s.clone(), 100.0 * (2.0 * r - 1.0))).collect();

    let mut observations = Vec::new();
    let dates: Vec<NaiveDate> = (0..cfg.n_days as u64).map(|d| cfg.start_date + Days::new(d)).collect();
    for (state, _) in &states {
        for &date in &dates {
            let v = rng.random_range(40.0..60.0f64).round();
            observations.push(TrendObservation {
                term: REFERENCE_TERM.into(),
                state: state.clone(),
                date,
                value: v,
                is_reference: true,
            });
        }
    }
    let mut related = Vec::new();
    for i in 0..cfg.n_phrases {
        let term = phrase_name(i);
        // every tenth phrase is too rare to pass the usage filter
        let activity = if i % 10 == 9 { 0.2 } else { 0.9 };
        let mut raw = Vec::new();
        for (state, rep) in &states {
            let lean = match phrase_lean(i) {
                l if l > 0.0 => *rep,
                l if l < 0.0 => 1.0 - rep,
                _ => 0.5,
            };
            for &date in &dates {
                let used = rng.random_bool(activity);
                let v = if used { lean * rng.random_range(0.7..1.3) } else { 0.0 };
                raw.push((state.clone(), date, v));
            }
        }
        let max = raw.iter().fold(0.0f64, |m, r| m.max(r.2));
        for (state, date, v) in raw {
            let value = if max > 0.0 { (v / max * 100.0).round() } else { 0.0 };
            observations.push(TrendObservation { term: term.clone(), state, date, value, is_reference: false });
        }
        related.push(RelatedQuery { term: term.clone(), related_query: term.clone(), top_metric: 100.0 });
        for k in 0..rng.random_range(0..=3usize) {
            related.push(RelatedQuery {
                term: term.clone(),
                related_query: format!("{term} {}", ["news", "today", "vote"][k]),
                top_metric: rng.random_range(60.0..=100.0f64).round(),
            });
        }
    }
    Ok(SyntheticInputs { speakers, trends: TrendSeries { observations }, related, margins })
}
