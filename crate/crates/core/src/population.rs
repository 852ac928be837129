//! Seeded synthetic user population and daily activity plans.
//!
//! Every city receives the same number of Democrat, Republican and
//! nonpartisan users. Each user's random assignments come from a stream
//! seeded by `(master seed, user index)`, and each day's plan from
//! `(master seed, user id, date ordinal)`, so any single user or day can be
//! regenerated in isolation.

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Read, Write};

use chrono::{Datelike, NaiveDate, NaiveTime, Timelike};
use rand::seq::{index, IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::seed;

const TAG_ASSIGN: u64 = 0xA551;
const TAG_USER: u64 = 0x05E2;
const TAG_DAY: u64 = 0xDA7E;

/// Local activity window, seconds after midnight.
pub const DAY_START_SECS: u32 = 9 * 3600;
pub const DAY_END_SECS: u32 = 16 * 3600;
/// Actions of a session spread over at most this many seconds after its start.
const SESSION_SPAN_SECS: u32 = 15 * 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ideology {
    Democrat,
    Republican,
    Nonpartisan,
}

impl Ideology {
    pub fn is_partisan(self) -> bool {
        self != Ideology::Nonpartisan
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CityCategory {
    Democrat,
    Republican,
    Purple,
}

/// Category from the 2016 Republican vote share (percent).
pub fn classify_city(rep_share: f64, dem_threshold: f64, rep_threshold: f64) -> Result<CityCategory> {
    if !(dem_threshold < rep_threshold) {
        return Err(invalid(format!("thresholds inverted: {dem_threshold} >= {rep_threshold}")));
    }
    if !(0.0..=100.0).contains(&rep_share) {
        return Err(invalid(format!("vote share {rep_share} outside [0,100]")));
    }
    Ok(if rep_share >= rep_threshold {
        CityCategory::Republican
    } else if rep_share <= dem_threshold {
        CityCategory::Democrat
    } else {
        CityCategory::Purple
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CityInput {
    pub name: String,
    pub rep_vote_share_2016: f64,
    /// Offset of local time from UTC, in minutes.
    pub utc_offset_minutes: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CityProfile {
    pub name: String,
    pub rep_vote_share_2016: f64,
    pub category: CityCategory,
    pub utc_offset_minutes: i32,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SidePools {
    pub democrat: Vec<String>,
    pub republican: Vec<String>,
}

impl SidePools {
    fn side(&self, ideology: Ideology) -> &[String] {
        match ideology {
            Ideology::Democrat => &self.democrat,
            Ideology::Republican => &self.republican,
            Ideology::Nonpartisan => &[],
        }
    }
}

fn default_dem_threshold() -> f64 {
    45.0
}
fn default_rep_threshold() -> f64 {
    55.0
}
fn default_users_per_group() -> usize {
    2
}
fn default_ten() -> usize {
    10
}
fn default_fifty() -> usize {
    50
}
fn default_language() -> String {
    "en-US".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationConfig {
    pub cities: Vec<CityInput>,
    pub popular_domains: Vec<String>,
    pub partisan_domains: SidePools,
    pub partisan_terms: SidePools,
    pub hashtags: SidePools,
    /// Everyday queries such as "ups tracker".
    pub common_search_terms: Vec<String>,
    #[serde(default = "default_dem_threshold")]
    pub dem_threshold: f64,
    #[serde(default = "default_rep_threshold")]
    pub rep_threshold: f64,
    /// Users of each ideology per city.
    #[serde(default = "default_users_per_group")]
    pub users_per_group: usize,
    #[serde(default = "default_ten")]
    pub n_popular_favorites: usize,
    #[serde(default = "default_ten")]
    pub n_partisan_favorites: usize,
    #[serde(default = "default_fifty")]
    pub n_partisan_terms: usize,
    #[serde(default = "default_ten")]
    pub n_hashtags: usize,
    #[serde(default = "default_language")]
    pub browser_language: String,
}

impl PopulationConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    fn check_pools(&self) -> Result<()> {
        let short = |pool: &str, needed: usize, available: usize| {
            if available < needed {
                Err(Error::ShortPool { pool: pool.into(), needed, available })
            } else {
                Ok(())
            }
        };
        short("cities", 1, self.cities.len())?;
        short("popular_domains", self.n_popular_favorites, self.popular_domains.len())?;
        short("partisan_domains.democrat", self.n_partisan_favorites, self.partisan_domains.democrat.len())?;
        short("partisan_domains.republican", self.n_partisan_favorites, self.partisan_domains.republican.len())?;
        short("partisan_terms.democrat", self.n_partisan_terms, self.partisan_terms.democrat.len())?;
        short("partisan_terms.republican", self.n_partisan_terms, self.partisan_terms.republican.len())?;
        short("hashtags.democrat", self.n_hashtags, self.hashtags.democrat.len())?;
        short("hashtags.republican", self.n_hashtags, self.hashtags.republican.len())?;
        short("common_search_terms", 1, self.common_search_terms.len())?;
        if self.users_per_group == 0 {
            return Err(invalid("users_per_group must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub user_id: String,
    pub index: usize,
    pub fingerprint_id: String,
    pub ideology: Ideology,
    pub city: String,
    pub browser_language: String,
    pub favorite_popular_domains: BTreeSet<String>,
    pub favorite_partisan_domains: BTreeSet<String>,
    pub partisan_terms: Vec<String>,
    pub partisan_hashtags: Vec<String>,
}

impl UserProfile {
    /// Popular and partisan favorites together.
    pub fn favorites(&self) -> BTreeSet<String> {
        self.favorite_popular_domains
            .union(&self.favorite_partisan_domains)
            .cloned()
            .collect()
    }

    /// Terms plus hashtags.
    pub fn partisan_search_items(&self) -> Vec<String> {
        self.partisan_terms.iter().chain(&self.partisan_hashtags).cloned().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Population {
    pub cities: Vec<CityProfile>,
    pub users: Vec<UserProfile>,
}

impl Population {
    pub fn user(&self, user_id: &str) -> Option<&UserProfile> {
        self.users.iter().find(|u| u.user_id == user_id)
    }

    pub fn city(&self, name: &str) -> Option<&CityProfile> {
        self.cities.iter().find(|c| c.name == name)
    }

    /// One profile per line.
    pub fn write_users_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for u in &self.users {
            serde_json::to_writer(&mut w, u)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_users_jsonl<R: Read>(r: R) -> Result<Vec<UserProfile>> {
        let mut users = Vec::new();
        for line in BufReader::new(r).lines() {
            let line = line?;
            if !line.trim().is_empty() {
                users.push(serde_json::from_str(&line)?);
            }
        }
        Ok(users)
    }
}

/// Builds the population: `users_per_group` users of each ideology in every
/// city, assigned to slots by a seeded shuffle.
pub fn generate_population(config: &PopulationConfig, seed: u64) -> Result<Population> {
    config.check_pools()?;
    let cities = config
        .cities
        .iter()
        .map(|c| {
            Ok(CityProfile {
                name: c.name.clone(),
                rep_vote_share_2016: c.rep_vote_share_2016,
                category: classify_city(c.rep_vote_share_2016, config.dem_threshold, config.rep_threshold)?,
                utc_offset_minutes: c.utc_offset_minutes,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut slots = Vec::new();
    for city in &cities {
        for ideology in [Ideology::Democrat, Ideology::Republican, Ideology::Nonpartisan] {
            for _ in 0..config.users_per_group {
                slots.push((city.name.clone(), ideology));
            }
        }
    }
    slots.shuffle(&mut seed::rng(seed, &[TAG_ASSIGN]));

    let users = slots
        .into_iter()
        .enumerate()
        .map(|(index, (city, ideology))| make_user(config, seed, index, city, ideology))
        .collect();
    Ok(Population { cities, users })
}

fn sample(rng: &mut impl Rng, pool: &[String], n: usize) -> Vec<String> {
    index::sample(rng, pool.len(), n).into_iter().map(|i| pool[i].clone()).collect()
}

fn make_user(config: &PopulationConfig, master: u64, index: usize, city: String, ideology: Ideology) -> UserProfile {
    let mut rng = seed::rng(master, &[TAG_USER, index as u64]);
    let token: u64 = rng.random();
    let favorite_popular_domains = sample(&mut rng, &config.popular_domains, config.n_popular_favorites)
        .into_iter()
        .collect();
    let (partisan, terms, tags) = if ideology.is_partisan() {
        (
            sample(&mut rng, config.partisan_domains.side(ideology), config.n_partisan_favorites),
            sample(&mut rng, config.partisan_terms.side(ideology), config.n_partisan_terms),
            sample(&mut rng, config.hashtags.side(ideology), config.n_hashtags),
        )
    } else {
        Default::default()
    };
    UserProfile {
        user_id: format!("u{index:03}"),
        index,
        // index prefix guarantees uniqueness; the token makes it opaque
        fingerprint_id: format!("fp{index:03}-{token:016x}"),
        ideology,
        city,
        browser_language: config.browser_language.clone(),
        favorite_popular_domains,
        favorite_partisan_domains: partisan.into_iter().collect(),
        partisan_terms: terms,
        partisan_hashtags: tags,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "target", rename_all = "snake_case")]
pub enum ActionKind {
    VisitPopular(String),
    VisitPartisan(String),
    SearchCommon(String),
    SearchPartisan(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Action {
    /// Local time.
    pub time: NaiveTime,
    pub kind: ActionKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivityPlan {
    pub user_id: String,
    pub date: NaiveDate,
    /// Session start times, ascending, local.
    pub sessions: Vec<NaiveTime>,
    /// All actions of the day in time order.
    pub actions: Vec<Action>,
}

impl ActivityPlan {
    pub fn count(&self, pred: impl Fn(&ActionKind) -> bool) -> usize {
        self.actions.iter().filter(|a| pred(&a.kind)).count()
    }

    pub fn partisan_visits(&self) -> usize {
        self.count(|k| matches!(k, ActionKind::VisitPartisan(_)))
    }

    pub fn popular_visits(&self) -> usize {
        self.count(|k| matches!(k, ActionKind::VisitPopular(_)))
    }

    pub fn common_searches(&self) -> usize {
        self.count(|k| matches!(k, ActionKind::SearchCommon(_)))
    }

    pub fn partisan_searches(&self) -> usize {
        self.count(|k| matches!(k, ActionKind::SearchPartisan(_)))
    }
}

fn time_of(secs: u32) -> NaiveTime {
    NaiveTime::from_num_seconds_from_midnight_opt(secs, 0).expect("seconds within a day")
}

/// One user's browsing and search plan for `date`.
///
/// 1–3 sessions between 9:00 and 16:00 local; 1–3 visits to popular
/// favorites and 1–2 everyday searches; partisan users add 3–5 visits to
/// their partisan favorites and 3–9 partisan searches drawn from their terms,
/// hashtags and favorite partisan domain names.
pub fn daily_schedule(user: &UserProfile, date: NaiveDate, seed: u64, common_terms: &[String]) -> ActivityPlan {
    let mut rng = seed::rng(
        seed,
        &[TAG_DAY, seed::hash_str(&user.user_id), date.num_days_from_ce() as u64],
    );

    let n_sessions = rng.random_range(1..=3);
    let mut sessions: Vec<u32> = (0..n_sessions)
        .map(|_| rng.random_range(DAY_START_SECS..=DAY_END_SECS))
        .collect();
    sessions.sort_unstable();

    let mut kinds = Vec::new();
    let popular: Vec<&String> = user.favorite_popular_domains.iter().collect();
    if !popular.is_empty() {
        let n = rng.random_range(1..=3usize).min(popular.len());
        for i in index::sample(&mut rng, popular.len(), n) {
            kinds.push(ActionKind::VisitPopular(popular[i].clone()));
        }
    }
    if !common_terms.is_empty() {
        for _ in 0..rng.random_range(1..=2) {
            kinds.push(ActionKind::SearchCommon(common_terms.choose(&mut rng).unwrap().clone()));
        }
    }
    if user.ideology.is_partisan() {
        let partisan: Vec<&String> = user.favorite_partisan_domains.iter().collect();
        if !partisan.is_empty() {
            let n = rng.random_range(3..=5usize).min(partisan.len());
            for i in index::sample(&mut rng, partisan.len(), n) {
                kinds.push(ActionKind::VisitPartisan(partisan[i].clone()));
            }
        }
        let items: Vec<String> = user
            .partisan_search_items()
            .into_iter()
            .chain(user.favorite_partisan_domains.iter().cloned())
            .collect();
        if !items.is_empty() {
            for _ in 0..rng.random_range(3..=9) {
                kinds.push(ActionKind::SearchPartisan(items.choose(&mut rng).unwrap().clone()));
            }
        }
    }

    let mut actions: Vec<Action> = kinds
        .into_iter()
        .map(|kind| {
            let start = sessions[rng.random_range(0..sessions.len())];
            let secs = (start + rng.random_range(0..=SESSION_SPAN_SECS)).min(DAY_END_SECS);
            Action { time: time_of(secs), kind }
        })
        .collect();
    actions.sort_by_key(|a| a.time.num_seconds_from_midnight());

    ActivityPlan {
        user_id: user.user_id.clone(),
        date,
        sessions: sessions.into_iter().map(time_of).collect(),
        actions,
    }
}
