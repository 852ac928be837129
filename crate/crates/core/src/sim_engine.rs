//! A simulated search engine with injectable personalization.
//!
//! Scores are `base + familiarity + locality + ideology + noise`, each term
//! controlled by a nonnegative weight in [`PersonalizationConfig`]. With all
//! weights and the noise at zero every user receives the same page.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use chrono::{DateTime, Datelike, FixedOffset, NaiveDate};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::population::{Ideology, UserProfile};
use crate::records::SerpRecord;
use crate::seed;

const TAG_NOISE: u64 = 0x4015E;
const TAG_STORIES: u64 = 0x5709;
/// Added to the base relevance of a domain whose name is the query.
pub const NAVIGATIONAL_BOOST: f64 = 10.0;

/// One (query, domain) row of the index. Rows with an empty query register
/// the domain for the general web only; queries without their own rows are
/// served from every known domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WebIndexEntry {
    pub query: String,
    pub domain: String,
    pub base_relevance: f64,
    pub pi: f64,
    pub locality: Option<String>,
    pub is_news: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct WebIndex {
    by_query: BTreeMap<String, Vec<WebIndexEntry>>,
    general: BTreeMap<String, WebIndexEntry>,
}

impl WebIndex {
    pub fn new(entries: impl IntoIterator<Item = WebIndexEntry>) -> Result<Self> {
        let mut index = WebIndex::default();
        for e in entries {
            index.insert(e)?;
        }
        Ok(index)
    }

    pub fn insert(&mut self, entry: WebIndexEntry) -> Result<()> {
        if !entry.base_relevance.is_finite() {
            return Err(invalid(format!("non-finite base relevance for {}", entry.domain)));
        }
        if !(-100.0..=100.0).contains(&entry.pi) {
            return Err(invalid(format!("pi {} of {} outside [-100,100]", entry.pi, entry.domain)));
        }
        let general = WebIndexEntry { query: String::new(), base_relevance: 0.0, ..entry.clone() };
        match self.general.get(&entry.domain) {
            Some(g) if g.pi != general.pi || g.locality != general.locality || g.is_news != general.is_news => {
                return Err(invalid(format!("conflicting attributes for {}", entry.domain)));
            }
            Some(_) => {}
            None => {
                self.general.insert(entry.domain.clone(), general);
            }
        }
        if !entry.query.is_empty() {
            let rows = self.by_query.entry(entry.query.clone()).or_default();
            if rows.iter().any(|r| r.domain == entry.domain) {
                return Err(invalid(format!("duplicate row ({}, {})", entry.query, entry.domain)));
            }
            rows.push(entry);
        }
        Ok(())
    }

    /// Errors when a locality is not one of `cities`.
    pub fn check_localities(&self, cities: &BTreeSet<String>) -> Result<()> {
        for e in self.general.values() {
            if let Some(city) = &e.locality {
                if !cities.contains(city) {
                    return Err(invalid(format!("{} has unknown locality {city}", e.domain)));
                }
            }
        }
        Ok(())
    }

    pub fn domains(&self) -> impl Iterator<Item = &WebIndexEntry> {
        self.general.values()
    }

    pub fn queries(&self) -> impl Iterator<Item = &str> {
        self.by_query.keys().map(String::as_str)
    }

    /// Candidate entries for `query`, sorted by domain.
    pub fn candidates(&self, query: &str) -> Vec<WebIndexEntry> {
        let q = query.trim().to_lowercase();
        let mut out: Vec<WebIndexEntry> = match self.by_query.get(query) {
            Some(rows) => rows.clone(),
            None => self
                .general
                .values()
                .map(|g| WebIndexEntry {
                    query: query.to_string(),
                    base_relevance: unit_hash(&q, &g.domain),
                    ..g.clone()
                })
                .collect(),
        };
        for e in &mut out {
            if is_navigational(&q, &e.domain) {
                e.base_relevance += NAVIGATIONAL_BOOST;
            }
        }
        out.sort_by(|a, b| a.domain.cmp(&b.domain));
        out
    }

    pub fn from_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut entries = Vec::new();
        for row in rdr.deserialize() {
            entries.push(row?);
        }
        Self::new(entries)
    }

    /// Query rows first, then general-only domains.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let listed: BTreeSet<&str> = self.by_query.values().flatten().map(|e| e.domain.as_str()).collect();
        for rows in self.by_query.values() {
            for e in rows {
                wtr.serialize(e)?;
            }
        }
        for g in self.general.values().filter(|g| !listed.contains(g.domain.as_str())) {
            wtr.serialize(g)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn is_navigational(query: &str, domain: &str) -> bool {
    query == domain || domain.split('.').next() == Some(query)
}

fn unit_hash(query: &str, domain: &str) -> f64 {
    let h = seed::derive(seed::hash_str(query), &[seed::hash_str(domain)]);
    (h >> 11) as f64 / (1u64 << 53) as f64
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamiliarityForm {
    /// `ln(1 + visits)`
    #[default]
    Log,
    /// `visits`
    Linear,
}

impl FamiliarityForm {
    pub fn apply(self, visits: u64) -> f64 {
        match self {
            FamiliarityForm::Log => (visits as f64).ln_1p(),
            FamiliarityForm::Linear => visits as f64,
        }
    }
}

fn default_page_size() -> usize {
    8
}
fn default_top_stories_size() -> usize {
    3
}
fn default_top_stories_prob() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonalizationConfig {
    #[serde(default)]
    pub lambda_fam: f64,
    #[serde(default)]
    pub lambda_local: f64,
    #[serde(default)]
    pub lambda_ideo: f64,
    #[serde(default)]
    pub noise_sd: f64,
    #[serde(default = "default_page_size")]
    pub page_size: usize,
    #[serde(default = "default_top_stories_size")]
    pub top_stories_size: usize,
    /// Chance that a (query, date) page carries a top-stories component.
    #[serde(default = "default_top_stories_prob")]
    pub top_stories_prob: f64,
    #[serde(default)]
    pub familiarity_form: FamiliarityForm,
}

impl Default for PersonalizationConfig {
    fn default() -> Self {
        Self {
            lambda_fam: 0.0,
            lambda_local: 0.0,
            lambda_ideo: 0.0,
            noise_sd: 0.0,
            page_size: default_page_size(),
            top_stories_size: default_top_stories_size(),
            top_stories_prob: default_top_stories_prob(),
            familiarity_form: FamiliarityForm::Log,
        }
    }
}

impl PersonalizationConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda_fam", self.lambda_fam),
            ("lambda_local", self.lambda_local),
            ("lambda_ideo", self.lambda_ideo),
            ("noise_sd", self.noise_sd),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if self.page_size == 0 {
            return Err(invalid("page_size must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.top_stories_prob) {
            return Err(invalid("top_stories_prob must lie in [0,1]"));
        }
        Ok(())
    }
}

/// Per-user visit counts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EngineState {
    visits: BTreeMap<String, BTreeMap<String, u64>>,
}

impl EngineState {
    pub fn new<S: Into<String>>(users: impl IntoIterator<Item = S>) -> Self {
        Self { visits: users.into_iter().map(|u| (u.into(), BTreeMap::new())).collect() }
    }

    /// Returns the new count.
    pub fn record_visit(&mut self, user_id: &str, domain: &str) -> Result<u64> {
        let counts = self.visits.get_mut(user_id).ok_or_else(|| Error::UnknownUser(user_id.into()))?;
        let c = counts.entry(domain.to_string()).or_insert(0);
        *c += 1;
        Ok(*c)
    }

    pub fn visits(&self, user_id: &str, domain: &str) -> u64 {
        self.visits.get(user_id).and_then(|m| m.get(domain)).copied().unwrap_or(0)
    }
}

fn ideology_affinity(ideology: Ideology, pi: f64) -> f64 {
    let s = if pi > 0.0 {
        1.0
    } else if pi < 0.0 {
        -1.0
    } else {
        0.0
    };
    match ideology {
        Ideology::Republican => s,
        Ideology::Democrat => -s,
        Ideology::Nonpartisan => 0.0,
    }
}

/// Personalized score of `entry`; `noise` is a standard-normal draw scaled
/// by `config.noise_sd`.
pub fn personalize_score(
    entry: &WebIndexEntry,
    user: &UserProfile,
    state: &EngineState,
    config: &PersonalizationConfig,
    noise: f64,
) -> f64 {
    let mut score = entry.base_relevance;
    if config.lambda_fam != 0.0 {
        score += config.lambda_fam * config.familiarity_form.apply(state.visits(&user.user_id, &entry.domain));
    }
    if config.lambda_local != 0.0 && entry.locality.as_deref() == Some(user.city.as_str()) {
        score += config.lambda_local;
    }
    if config.lambda_ideo != 0.0 {
        score += config.lambda_ideo * ideology_affinity(user.ideology, entry.pi);
    }
    score + config.noise_sd * noise
}

fn day(date: NaiveDate) -> u64 {
    date.num_days_from_ce() as u64
}

fn rank(
    candidates: &[WebIndexEntry],
    user: &UserProfile,
    state: &EngineState,
    config: &PersonalizationConfig,
    rng: &mut impl Rng,
) -> Vec<(f64, String)> {
    let mut scored: Vec<(f64, String)> = candidates
        .iter()
        .map(|e| {
            let z: f64 = if config.noise_sd > 0.0 { rng.sample(StandardNormal) } else { 0.0 };
            (personalize_score(e, user, state, config, z), e.domain.clone())
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    scored
}

/// Serves one result page. Noise is drawn from a stream keyed on
/// `(seed, user, query, date)`; whether the page carries top stories depends
/// on `(seed, query, date)` only.
pub fn serve(
    index: &WebIndex,
    query: &str,
    user: &UserProfile,
    ts: DateTime<FixedOffset>,
    state: &EngineState,
    config: &PersonalizationConfig,
    seed: u64,
) -> Result<SerpRecord> {
    serve_from(&index.candidates(query), query, user, ts, state, config, seed)
}

/// [`serve`] over precomputed, domain-sorted candidates.
pub fn serve_from(
    candidates: &[WebIndexEntry],
    query: &str,
    user: &UserProfile,
    ts: DateTime<FixedOffset>,
    state: &EngineState,
    config: &PersonalizationConfig,
    seed: u64,
) -> Result<SerpRecord> {
    let date = ts.date_naive();
    if candidates.len() < config.page_size {
        return Err(Error::ShortPool {
            pool: format!("candidates for `{query}`"),
            needed: config.page_size,
            available: candidates.len(),
        });
    }
    let qh = seed::hash_str(query);
    let mut rng = seed::rng(seed, &[TAG_NOISE, seed::hash_str(&user.user_id), qh, day(date)]);
    let organic = rank(candidates, user, state, config, &mut rng)
        .into_iter()
        .take(config.page_size)
        .map(|(_, d)| d)
        .collect();

    let mut story_rng = seed::rng(seed, &[TAG_STORIES, qh, day(date)]);
    let has_stories = config.top_stories_size > 0 && story_rng.random_bool(config.top_stories_prob);
    let news: Vec<WebIndexEntry> = candidates.iter().filter(|e| e.is_news).cloned().collect();
    let top_stories = (has_stories && !news.is_empty()).then(|| {
        rank(&news, user, state, config, &mut rng)
            .into_iter()
            .take(config.top_stories_size)
            .map(|(_, d)| d)
            .collect()
    });

    Ok(SerpRecord {
        user_id: user.user_id.clone(),
        ts,
        query: query.to_string(),
        organic,
        top_stories,
        lang: user.browser_language.clone(),
    })
}
