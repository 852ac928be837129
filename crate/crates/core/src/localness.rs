//! Local versus non-local coding of result domains.
//!
//! Rules run in a fixed order and the first one that decides wins:
//! collection membership, then metadata text, then domain structure.
//! Anything left over is `Unresolved` and goes to a manual review file.

use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_EXCLUSIONS: [&str; 4] = ["fox", "globe", "how", "media"];

pub const STATE_ABBREVIATIONS: [&str; 51] = [
    "al", "ak", "az", "ar", "ca", "co", "ct", "de", "dc", "fl", "ga", "hi", "id", "il", "in", "ia", "ks", "ky",
    "la", "me", "md", "ma", "mi", "mn", "ms", "mo", "mt", "ne", "nv", "nh", "nj", "nm", "ny", "nc", "nd", "oh",
    "ok", "or", "pa", "ri", "sc", "sd", "tn", "tx", "ut", "vt", "va", "wa", "wv", "wi", "wy",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainMetadata {
    pub domain: String,
    pub tld: String,
    pub description_text: String,
    /// Semicolon-separated collection names.
    #[serde(with = "collections")]
    pub collections: BTreeSet<String>,
}

mod collections {
    use std::collections::BTreeSet;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(set: &BTreeSet<String>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&set.iter().cloned().collect::<Vec<_>>().join(";"))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeSet<String>, D::Error> {
        let raw = String::deserialize(d)?;
        Ok(raw.split(';').map(str::trim).filter(|t| !t.is_empty()).map(String::from).collect())
    }
}

pub fn read_metadata_csv<R: Read>(r: R) -> Result<Vec<DomainMetadata>> {
    let mut rdr = csv::Reader::from_reader(r);
    rdr.deserialize().map(|row| row.map_err(Error::from)).collect()
}

pub fn write_metadata_csv<W: Write>(w: W, rows: &[DomainMetadata]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for row in rows {
        wtr.serialize(row)?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlaceLexicon {
    us_place_names: BTreeSet<String>,
    local_indicators: BTreeSet<String>,
    nonlocal_indicators: BTreeSet<String>,
    state_abbreviations: BTreeSet<String>,
    exclusions: BTreeSet<String>,
}

fn normalize_phrase(s: &str) -> String {
    tokenize(s).join(" ")
}

fn tokenize(s: &str) -> Vec<String> {
    s.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(String::from)
        .collect()
}

fn phrase_set<I, S>(items: I) -> BTreeSet<String>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    items.into_iter().map(|s| normalize_phrase(s.as_ref())).filter(|s| !s.is_empty()).collect()
}

impl PlaceLexicon {
    /// Uses the default exclusions and the 50 states plus DC.
    pub fn new<I, J, K, S, T, U>(places: I, local: J, nonlocal: K) -> Self
    where
        I: IntoIterator<Item = S>,
        J: IntoIterator<Item = T>,
        K: IntoIterator<Item = U>,
        S: AsRef<str>,
        T: AsRef<str>,
        U: AsRef<str>,
    {
        Self {
            us_place_names: phrase_set(places),
            local_indicators: phrase_set(local),
            nonlocal_indicators: phrase_set(nonlocal),
            state_abbreviations: phrase_set(STATE_ABBREVIATIONS),
            exclusions: phrase_set(DEFAULT_EXCLUSIONS),
        }
    }

    pub fn with_exclusions<I: IntoIterator<Item = S>, S: AsRef<str>>(mut self, extra: I) -> Self {
        self.exclusions.extend(phrase_set(extra));
        self
    }

    /// Reads `places.txt`, `local_indicators.txt` and `nonlocal_indicators.txt`
    /// (one entry per line, `#` comments) from `dir`.
    pub fn from_dir(dir: &Path) -> Result<Self> {
        let read = |name: &str| -> Result<Vec<String>> {
            let path = dir.join(name);
            let text = std::fs::read_to_string(&path).map_err(|_| Error::MissingFixture(path))?;
            Ok(text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(String::from)
                .collect())
        };
        Ok(Self::new(read("places.txt")?, read("local_indicators.txt")?, read("nonlocal_indicators.txt")?))
    }

    fn places(&self) -> impl Iterator<Item = &String> {
        self.us_place_names.iter().filter(|p| !self.exclusions.contains(*p))
    }

    fn is_place(&self, phrase: &str) -> bool {
        self.us_place_names.contains(phrase) && !self.exclusions.contains(phrase)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LocalLabel {
    Local,
    NonLocal,
    Unresolved,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    MembershipNational,
    MembershipStatesLocal,
    TextLocalOnly,
    TextNonlocalOnly,
    TextMixedMetadataLocal,
    TextMixedRatio,
    StructuralForeignTld,
    StructuralStateAbbreviation,
    Unresolved,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MatchCounts {
    pub local: usize,
    pub nonlocal: usize,
}

/// Local and non-local matches in the metadata text, longest phrase first.
pub fn text_matches(text: &str, lexicon: &PlaceLexicon) -> MatchCounts {
    let tokens = tokenize(text);
    let max_len = lexicon
        .us_place_names
        .iter()
        .chain(&lexicon.local_indicators)
        .chain(&lexicon.nonlocal_indicators)
        .map(|p| p.split(' ').count())
        .max()
        .unwrap_or(0);
    let mut counts = MatchCounts::default();
    let mut i = 0;
    while i < tokens.len() {
        let mut step = 1;
        for len in (1..=max_len.min(tokens.len() - i)).rev() {
            let phrase = tokens[i..i + len].join(" ");
            if lexicon.nonlocal_indicators.contains(&phrase) {
                counts.nonlocal += 1;
            } else if lexicon.local_indicators.contains(&phrase) || lexicon.is_place(&phrase) {
                counts.local += 1;
            } else {
                continue;
            }
            step = len;
            break;
        }
        i += step;
    }
    counts
}

/// Labels of `domain` left of `tld`.
fn name_labels<'a>(domain: &'a str, tld: &str) -> Vec<&'a str> {
    let stripped = domain
        .strip_suffix(tld)
        .and_then(|s| s.strip_suffix('.'))
        .filter(|_| !tld.is_empty())
        .unwrap_or(domain);
    stripped.split('.').filter(|l| !l.is_empty()).collect()
}

/// Terms contained in the domain name, each counted once.
fn domain_matches(meta: &DomainMetadata, lexicon: &PlaceLexicon) -> MatchCounts {
    let domain = meta.domain.to_lowercase();
    let labels = name_labels(&domain, &meta.tld.to_lowercase());
    let hit = |term: &String| {
        let squashed = term.replace(' ', "");
        labels.iter().any(|l| l.replace('-', "").contains(&squashed))
    };
    MatchCounts {
        local: lexicon.local_indicators.iter().chain(lexicon.places()).filter(|t| hit(t)).count(),
        nonlocal: lexicon.nonlocal_indicators.iter().filter(|t| hit(t)).count(),
    }
}

fn squash(tag: &str) -> String {
    tag.to_lowercase().chars().filter(|c| c.is_alphanumeric()).collect()
}

fn membership(meta: &DomainMetadata) -> Option<(LocalLabel, Rule)> {
    let tags: Vec<String> = meta.collections.iter().map(|t| squash(t)).collect();
    if tags.iter().any(|t| t.contains("national") && !t.contains("international")) {
        return Some((LocalLabel::NonLocal, Rule::MembershipNational));
    }
    if tags.iter().any(|t| t.contains("stateslocal") || t.contains("statelocal")) {
        return Some((LocalLabel::Local, Rule::MembershipStatesLocal));
    }
    None
}

fn text_rule(meta: &DomainMetadata, lexicon: &PlaceLexicon) -> Option<(LocalLabel, Rule)> {
    let tags = text_matches(&meta.description_text, lexicon);
    let dom = domain_matches(meta, lexicon);
    let local = tags.local + dom.local;
    let nonlocal = tags.nonlocal + dom.nonlocal;
    match (local > 0, nonlocal > 0) {
        (true, false) => Some((LocalLabel::Local, Rule::TextLocalOnly)),
        (false, true) => Some((LocalLabel::NonLocal, Rule::TextNonlocalOnly)),
        (true, true) if tags.local > 0 && tags.nonlocal == 0 => {
            Some((LocalLabel::Local, Rule::TextMixedMetadataLocal))
        }
        (true, true) if local >= 3 * nonlocal => Some((LocalLabel::Local, Rule::TextMixedRatio)),
        _ => None,
    }
}

fn structural_rule(meta: &DomainMetadata, lexicon: &PlaceLexicon) -> Option<(LocalLabel, Rule)> {
    let tld = meta.tld.to_lowercase();
    let last = tld.rsplit('.').next().unwrap_or("");
    if last.len() == 2 && last.chars().all(|c| c.is_ascii_alphabetic()) && last != "us" {
        return Some((LocalLabel::NonLocal, Rule::StructuralForeignTld));
    }
    let domain = meta.domain.to_lowercase();
    if name_labels(&domain, &tld).iter().any(|l| lexicon.state_abbreviations.contains(*l)) {
        return Some((LocalLabel::Local, Rule::StructuralStateAbbreviation));
    }
    None
}

pub fn classify_local(meta: &DomainMetadata, lexicon: &PlaceLexicon) -> (LocalLabel, Rule) {
    membership(meta)
        .or_else(|| text_rule(meta, lexicon))
        .or_else(|| structural_rule(meta, lexicon))
        .unwrap_or((LocalLabel::Unresolved, Rule::Unresolved))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalnessRow {
    pub domain: String,
    pub label: LocalLabel,
    pub rule_fired: Rule,
}

pub fn classify_all(metadata: &[DomainMetadata], lexicon: &PlaceLexicon) -> Vec<LocalnessRow> {
    let mut rows: Vec<LocalnessRow> = metadata
        .iter()
        .map(|m| {
            let (label, rule_fired) = classify_local(m, lexicon);
            LocalnessRow { domain: m.domain.clone(), label, rule_fired }
        })
        .collect();
    rows.sort_by(|a, b| a.domain.cmp(&b.domain));
    rows
}

pub fn write_labels_csv<W: Write>(w: W, rows: &[LocalnessRow]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for row in rows {
        wtr.serialize(row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Only the `Unresolved` rows.
pub fn write_review_csv<W: Write>(w: W, rows: &[LocalnessRow]) -> Result<()> {
    let pending: Vec<LocalnessRow> = rows.iter().filter(|r| r.label == LocalLabel::Unresolved).cloned().collect();
    write_labels_csv(w, &pending)
}

pub fn read_labels_csv<R: Read>(r: R) -> Result<Vec<LocalnessRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    rdr.deserialize().map(|row| row.map_err(Error::from)).collect()
}
