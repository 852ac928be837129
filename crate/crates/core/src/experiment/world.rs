//! Synthetic web for the simulated engine: which domains answer the
//! election queries, their ideology scores, and the metadata the localness
//! coder sees.

use std::collections::BTreeSet;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::ideology_index::{IdeologyTable, MergePolicy};
use crate::localness::DomainMetadata;
use crate::population::{CityProfile, PopulationConfig};
use crate::seed;
use crate::sim_engine::{WebIndex, WebIndexEntry};

const TAG_WORLD: u64 = 0x3041D;
const OUTLET_SUFFIXES: [&str; 5] = ["herald", "dispatch", "courier", "ledger", "gazette"];

fn default_national() -> usize {
    30
}
fn default_per_query() -> usize {
    14
}
fn default_local_per_city() -> usize {
    2
}
fn default_national_base() -> (f64, f64) {
    (0.5, 1.5)
}
fn default_local_base() -> (f64, f64) {
    (0.0, 0.8)
}
fn default_local_slope() -> f64 {
    2.0
}
fn default_local_sd() -> f64 {
    10.0
}
fn default_national_sd() -> f64 {
    25.0
}
fn default_jitter() -> f64 {
    0.03
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    /// The first this-many popular domains are national news outlets.
    #[serde(default = "default_national")]
    pub n_national_news: usize,
    /// National outlets answering each election query.
    #[serde(default = "default_per_query")]
    pub national_per_query: usize,
    #[serde(default = "default_local_per_city")]
    pub local_per_city: usize,
    #[serde(default = "default_national_base")]
    pub national_base: (f64, f64),
    #[serde(default = "default_local_base")]
    pub local_base: (f64, f64),
    /// Local outlet ideology is `slope · (rep share − 50) + N(0, sd)`.
    #[serde(default = "default_local_slope")]
    pub local_pi_slope: f64,
    #[serde(default = "default_local_sd")]
    pub local_pi_sd: f64,
    #[serde(default = "default_national_sd")]
    pub national_pi_sd: f64,
    /// Spread of the five ideology indices around a domain's score (raw scale).
    #[serde(default = "default_jitter")]
    pub index_jitter: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields defaulted")
    }
}

#[derive(Debug, Clone)]
pub struct World {
    pub index: WebIndex,
    pub ideology: IdeologyTable,
    pub metadata: Vec<DomainMetadata>,
}

pub fn city_token(name: &str) -> String {
    name.to_lowercase().chars().filter(char::is_ascii_alphanumeric).collect()
}

fn clamp_pi(v: f64) -> f64 {
    v.clamp(-95.0, 95.0)
}

struct Domain {
    name: String,
    pi: f64,
    locality: Option<String>,
    is_news: bool,
    meta: DomainMetadata,
}

fn meta(domain: &str, text: &str, collections: &[&str]) -> DomainMetadata {
    DomainMetadata {
        domain: domain.into(),
        tld: domain.rsplit('.').next().unwrap_or("").into(),
        description_text: text.into(),
        collections: collections.iter().map(|s| s.to_string()).collect(),
    }
}

pub fn build_world(
    population: &PopulationConfig,
    cities: &[CityProfile],
    election_queries: &BTreeSet<String>,
    cfg: &WorldConfig,
    seed: u64,
) -> Result<World> {
    if cfg.n_national_news > population.popular_domains.len() {
        return Err(Error::ShortPool {
            pool: "popular_domains (national news)".into(),
            needed: cfg.n_national_news,
            available: population.popular_domains.len(),
        });
    }
    if cfg.national_per_query > cfg.n_national_news {
        return Err(invalid("national_per_query exceeds n_national_news"));
    }
    if cfg.local_per_city > OUTLET_SUFFIXES.len() {
        return Err(invalid(format!("local_per_city is at most {}", OUTLET_SUFFIXES.len())));
    }
    for (lo, hi) in [cfg.national_base, cfg.local_base] {
        if !(lo < hi) {
            return Err(invalid("base relevance ranges must satisfy lo < hi"));
        }
    }
    let mut rng = seed::rng(seed, &[TAG_WORLD]);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");

    let mut domains = Vec::new();
    for (i, d) in population.popular_domains.iter().enumerate() {
        let news = i < cfg.n_national_news;
        let pi = clamp_pi(cfg.national_pi_sd * std_normal.sample(&mut rng) * if news { 1.0 } else { 0.5 });
        let m = match (news, i % 2) {
            (true, 0) => meta(d, "Breaking news and analysis", &["United States - National"]),
            (true, _) => meta(d, "National and international news coverage", &[]),
            (false, _) => meta(d, "Shop, stream and share online", &[]),
        };
        domains.push(Domain { name: d.clone(), pi, locality: None, is_news: news, meta: m });
    }
    for (pool, sign) in [(&population.partisan_domains.democrat, -1.0), (&population.partisan_domains.republican, 1.0)] {
        for d in pool {
            let pi = sign * rng.random_range(50.0..90.0);
            let m = meta(d, "Commentary and opinion from across the USA", &[]);
            domains.push(Domain { name: d.clone(), pi, locality: None, is_news: false, meta: m });
        }
    }
    let mut local_names = Vec::new();
    for city in cities {
        let token = city_token(&city.name);
        for (k, suffix) in OUTLET_SUFFIXES.iter().take(cfg.local_per_city).enumerate() {
            let name = format!("{token}{suffix}.com");
            let pi = clamp_pi(
                cfg.local_pi_slope * (city.rep_vote_share_2016 - 50.0) + cfg.local_pi_sd * std_normal.sample(&mut rng),
            );
            let m = if k == 0 {
                meta(&name, &format!("News, weather and sports for {}", city.name), &["United States - State & Local"])
            } else {
                meta(&name, &format!("Your source for local news in {}", city.name), &[])
            };
            local_names.push(name.clone());
            domains.push(Domain { name, pi, locality: Some(city.name.clone()), is_news: true, meta: m });
        }
    }

    let mut seen = BTreeSet::new();
    for d in &domains {
        if !seen.insert(d.name.as_str()) {
            return Err(invalid(format!("domain {} appears in more than one pool", d.name)));
        }
    }

    let mut ideology = IdeologyTable::new(MergePolicy::ZeroFill);
    for d in &domains {
        let raw = std::array::from_fn(|_| {
            Some((d.pi / 100.0 + cfg.index_jitter * std_normal.sample(&mut rng)).clamp(-1.0, 1.0))
        });
        ideology.insert(&d.name, raw)?;
    }

    let entry = |d: &Domain, query: &str, base: f64| WebIndexEntry {
        query: query.into(),
        domain: d.name.clone(),
        base_relevance: base,
        pi: ideology.pi(&d.name),
        locality: d.locality.clone(),
        is_news: d.is_news,
    };
    let mut index = WebIndex::default();
    let national = &domains[..cfg.n_national_news];
    let locals: Vec<&Domain> = domains.iter().filter(|d| d.locality.is_some()).collect();
    for q in election_queries {
        for i in index::sample(&mut rng, national.len(), cfg.national_per_query).into_vec() {
            index.insert(entry(&national[i], q, rng.random_range(cfg.national_base.0..cfg.national_base.1)))?;
        }
        for d in &locals {
            index.insert(entry(d, q, rng.random_range(cfg.local_base.0..cfg.local_base.1)))?;
        }
    }
    for d in &domains {
        index.insert(entry(d, "", 0.0))?;
    }

    let mut metadata: Vec<DomainMetadata> = domains.into_iter().map(|d| d.meta).collect();
    metadata.sort_by(|a, b| a.domain.cmp(&b.domain));
    Ok(World { index, ideology, metadata })
}
