use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use chrono::{DateTime, FixedOffset, NaiveDate};
use serde::{Deserialize, Serialize};

use super::Observation;
use crate::error::{invalid, Error, Result};
use crate::ideology_index::{subset_sris, DomainSubset, IdeologyTable, ScoreSource, SubsetSelector};
use crate::localness::LocalLabel;
use crate::population::{CityCategory, CityProfile, Ideology, UserProfile};
use crate::rank_similarity::Persistence;
use crate::records::{ActivityEvent, ActivityKind, SerpRecord};

/// One user's result page for one election query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelRow {
    pub user_id: String,
    pub city: String,
    pub date: NaiveDate,
    pub ts: DateTime<FixedOffset>,
    pub query: String,
    pub browser_language: String,
    pub n_familiar: usize,
    pub top_familiar_rank: Option<usize>,
    /// Same counts on the top-stories list; missing without one.
    pub stories_n_familiar: Option<usize>,
    pub stories_top_familiar_rank: Option<usize>,
    pub prior_visits: u64,
    pub prior_searches: u64,
    pub sris_all: Option<f64>,
    pub sris_new: Option<f64>,
    pub sris_new_local: Option<f64>,
    pub sris_new_nonlocal: Option<f64>,
    pub user_dem: u8,
    pub user_rep: u8,
    pub city_dem: u8,
    pub city_rep: u8,
    /// Mean ideology of favorites visited so far.
    pub visited_sites_ideology: Option<f64>,
    pub city_rep_share: f64,
}

fn count(v: usize) -> Option<f64> {
    Some(v as f64)
}

impl Observation for PanelRow {
    fn value(&self, var: &str) -> Result<Option<f64>> {
        Ok(match var {
            "n_familiar" => count(self.n_familiar),
            "top_familiar_rank" => self.top_familiar_rank.and_then(count),
            "stories_n_familiar" => self.stories_n_familiar.and_then(count),
            "stories_top_familiar_rank" => self.stories_top_familiar_rank.and_then(count),
            "prior_visits" => Some(self.prior_visits as f64),
            "prior_searches" => Some(self.prior_searches as f64),
            "sris_all" => self.sris_all,
            "sris_new" => self.sris_new,
            "sris_new_local" => self.sris_new_local,
            "sris_new_nonlocal" => self.sris_new_nonlocal,
            "user_dem" => Some(self.user_dem.into()),
            "user_rep" => Some(self.user_rep.into()),
            "city_dem" => Some(self.city_dem.into()),
            "city_rep" => Some(self.city_rep.into()),
            "visited_sites_ideology" => self.visited_sites_ideology,
            "city_rep_share" => Some(self.city_rep_share),
            _ => return Err(invalid(format!("unknown panel variable `{var}`"))),
        })
    }

    fn key(&self, dim: &str) -> Result<String> {
        Ok(match dim {
            "user" | "user_id" => self.user_id.clone(),
            "city" => self.city.clone(),
            "date" => self.date.to_string(),
            "query" => self.query.clone(),
            "browser_language" => self.browser_language.clone(),
            _ => return Err(invalid(format!("unknown panel dimension `{dim}`"))),
        })
    }
}

pub struct PanelInputs<'a> {
    pub users: &'a [UserProfile],
    pub cities: &'a [CityProfile],
    pub ideology: &'a IdeologyTable,
    /// Domains missing here count as non-local.
    pub localness: &'a BTreeMap<String, LocalLabel>,
    pub activity: &'a [ActivityEvent],
    pub persistence: Persistence<f64>,
    pub score_source: ScoreSource,
}

fn familiarity(list: &[String], favorites: &BTreeSet<String>) -> (usize, Option<usize>) {
    let n = list.iter().filter(|d| favorites.contains(*d)).count();
    let top = list.iter().position(|d| favorites.contains(d)).map(|i| i + 1);
    (n, top)
}

fn names_favorite(query: &str, favorites: &BTreeSet<String>) -> bool {
    let q = query.trim().to_lowercase();
    favorites.iter().any(|f| *f == q || f.split('.').next() == Some(q.as_str()))
}

/// Running totals over one user's activity, in time order.
struct History {
    times: Vec<DateTime<FixedOffset>>,
    visits: Vec<u64>,
    searches: Vec<u64>,
    fav_visits: Vec<u64>,
    fav_pi: Vec<f64>,
}

impl History {
    fn new(
        mut events: Vec<&ActivityEvent>,
        favorites: &BTreeSet<String>,
        in_results: &BTreeSet<&str>,
        table: &IdeologyTable,
        source: ScoreSource,
    ) -> Self {
        events.sort_by_key(|e| e.ts);
        let mut h = History {
            times: Vec::new(),
            visits: vec![0],
            searches: vec![0],
            fav_visits: vec![0],
            fav_pi: vec![0.0],
        };
        for e in events {
            let fav = e.kind == ActivityKind::Visit && favorites.contains(&e.target);
            let relevant = fav && in_results.contains(e.target.as_str());
            let search = e.kind == ActivityKind::Search && names_favorite(&e.target, favorites);
            h.times.push(e.ts);
            h.visits.push(h.visits.last().unwrap() + u64::from(relevant));
            h.searches.push(h.searches.last().unwrap() + u64::from(search));
            h.fav_visits.push(h.fav_visits.last().unwrap() + u64::from(fav));
            let pi = if fav { table.score(&e.target, source) } else { 0.0 };
            h.fav_pi.push(h.fav_pi.last().unwrap() + pi);
        }
        h
    }

    /// Number of events strictly before `ts`.
    fn before(&self, ts: DateTime<FixedOffset>) -> usize {
        self.times.partition_point(|t| *t < ts)
    }
}

/// One row per election-query record; prior activity counts only events
/// strictly before the record's timestamp.
pub fn build_panel(records: &[SerpRecord], inputs: &PanelInputs<'_>) -> Result<Vec<PanelRow>> {
    let users: BTreeMap<&str, &UserProfile> = inputs.users.iter().map(|u| (u.user_id.as_str(), u)).collect();
    let cities: BTreeMap<&str, &CityProfile> = inputs.cities.iter().map(|c| (c.name.as_str(), c)).collect();
    let in_results: BTreeSet<&str> = records
        .iter()
        .flat_map(|r| r.organic.iter().chain(r.top_stories.iter().flatten()))
        .map(String::as_str)
        .collect();

    let mut events_by_user: BTreeMap<&str, Vec<&ActivityEvent>> = BTreeMap::new();
    for e in inputs.activity {
        if !users.contains_key(e.user_id.as_str()) {
            return Err(Error::UnknownUser(e.user_id.clone()));
        }
        events_by_user.entry(&e.user_id).or_default().push(e);
    }
    let mut favorites = BTreeMap::new();
    let mut histories = BTreeMap::new();
    for (&id, user) in &users {
        let fav = user.favorites();
        let events = events_by_user.remove(id).unwrap_or_default();
        histories.insert(id, History::new(events, &fav, &in_results, inputs.ideology, inputs.score_source));
        favorites.insert(id, fav);
    }

    let is_local = |d: &str| inputs.localness.get(d) == Some(&LocalLabel::Local);
    let mut rows = Vec::with_capacity(records.len());
    for rec in records {
        let user = users.get(rec.user_id.as_str()).ok_or_else(|| Error::UnknownUser(rec.user_id.clone()))?;
        let city = cities
            .get(user.city.as_str())
            .ok_or_else(|| invalid(format!("user {} has unknown city {}", user.user_id, user.city)))?;
        let fav = &favorites[rec.user_id.as_str()];
        let hist = &histories[rec.user_id.as_str()];
        let k = hist.before(rec.ts);

        let (n_familiar, top_familiar_rank) = familiarity(&rec.organic, fav);
        let stories = rec.top_stories.as_deref().map(|s| familiarity(s, fav));
        let score = |selector| {
            let subset = DomainSubset { selector, favorites: fav, is_local: &is_local };
            subset_sris(&rec.organic, &subset, inputs.ideology, inputs.persistence, inputs.score_source)
        };

        rows.push(PanelRow {
            user_id: rec.user_id.clone(),
            city: city.name.clone(),
            date: rec.date(),
            ts: rec.ts,
            query: rec.query.clone(),
            browser_language: rec.lang.clone(),
            n_familiar,
            top_familiar_rank,
            stories_n_familiar: stories.map(|s| s.0),
            stories_top_familiar_rank: stories.and_then(|s| s.1),
            prior_visits: hist.visits[k],
            prior_searches: hist.searches[k],
            sris_all: score(SubsetSelector::All)?,
            sris_new: score(SubsetSelector::New)?,
            sris_new_local: score(SubsetSelector::NewLocal)?,
            sris_new_nonlocal: score(SubsetSelector::NewNonlocal)?,
            user_dem: u8::from(user.ideology == Ideology::Democrat),
            user_rep: u8::from(user.ideology == Ideology::Republican),
            city_dem: u8::from(city.category == CityCategory::Democrat),
            city_rep: u8::from(city.category == CityCategory::Republican),
            visited_sites_ideology: (hist.fav_visits[k] > 0).then(|| hist.fav_pi[k] / hist.fav_visits[k] as f64),
            city_rep_share: city.rep_vote_share_2016,
        });
    }
    rows.sort_by(|a, b| (a.date, &a.user_id, a.ts, &a.query).cmp(&(b.date, &b.user_id, b.ts, &b.query)));
    Ok(rows)
}

/// Drops rows whose `variable` lies strictly above the nearest-rank
/// `(100 - top_pct)` percentile. Rows with a missing value are kept.
pub fn trim_outliers<R: Observation>(rows: Vec<R>, variable: &str, top_pct: f64) -> Result<Vec<R>> {
    if !(0.0..100.0).contains(&top_pct) {
        return Err(invalid(format!("top_pct {top_pct} outside [0,100)")));
    }
    let mut values = Vec::with_capacity(rows.len());
    for r in &rows {
        if let Some(v) = r.value(variable)? {
            values.push(v);
        }
    }
    if values.is_empty() {
        return Ok(rows);
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    let rank = (((100.0 - top_pct) / 100.0) * n as f64).ceil().clamp(1.0, n as f64) as usize;
    let cutoff = values[rank - 1];
    let mut kept = Vec::with_capacity(rows.len());
    for r in rows {
        if r.value(variable)?.is_none_or(|v| v <= cutoff) {
            kept.push(r);
        }
    }
    Ok(kept)
}

pub fn write_panel_csv<W: Write>(w: W, rows: &[PanelRow]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_panel_csv<R: Read>(r: R) -> Result<Vec<PanelRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    rdr.deserialize().map(|row| row.map_err(Error::from)).collect()
}
