//! Per-domain ideology scores and the rank-weighted ideology score of a page.
//!
//! Five published website ideology indices enter as raw scores on `[-1, 1]`,
//! are rescaled to `[-100, 100]` and averaged into one merged score per
//! domain. A page's score is the average of its domains' merged scores,
//! weighted by `(1-p) p^(d-1)` for rank `d`.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rank_similarity::{rank_weight, Persistence};
use crate::Scalar;

pub const SCALE_MIN: f64 = -100.0;
pub const SCALE_MAX: f64 = 100.0;

/// The five source indices, in fixture column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexKind {
    /// Facebook sharing alignment score.
    Alignment,
    /// News-article partisanship score.
    Partisanship,
    /// Crowd-rated bias score.
    Mturk,
    /// Survey-based trust score.
    Pew,
    /// Twitter audience bias score.
    AudienceBias,
}

impl IndexKind {
    pub const ALL: [IndexKind; 5] = [
        IndexKind::Alignment,
        IndexKind::Partisanship,
        IndexKind::Mturk,
        IndexKind::Pew,
        IndexKind::AudienceBias,
    ];

    pub fn column(self) -> &'static str {
        match self {
            IndexKind::Alignment => "alignment",
            IndexKind::Partisanship => "partisanship",
            IndexKind::Mturk => "mturk",
            IndexKind::Pew => "pew",
            IndexKind::AudienceBias => "audience_bias",
        }
    }

    /// Native range of the raw score. All five sources publish on `[-1, 1]`.
    pub fn raw_range(self) -> (f64, f64) {
        (-1.0, 1.0)
    }

    fn position(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MergePolicy {
    /// Missing indices count as 0 and the mean runs over all five.
    #[default]
    ZeroFill,
    /// Mean over the indices that are present; 0 when none are.
    AvailableOnly,
}

/// Affine map of `[a, b]` onto `[-100, 100]`.
pub fn rescale_index<T: Scalar>(raw: T, source_range: (T, T)) -> Result<T> {
    let (a, b) = source_range;
    if !(a < b) {
        return Err(invalid(format!("empty source range [{a:?}, {b:?}]")));
    }
    if !(raw >= a && raw <= b) {
        return Err(invalid(format!("raw score {raw:?} outside [{a:?}, {b:?}]")));
    }
    let hundred = T::from_count(100);
    let two = T::from_count(2);
    Ok((raw - a) / (b - a) * two * hundred - hundred)
}

/// Merges up to five rescaled index scores into one.
pub fn merge_pi<T: Scalar>(scores: &[Option<T>; 5], policy: MergePolicy) -> T {
    let present: Vec<T> = scores.iter().flatten().copied().collect();
    let total = present.iter().fold(T::zero(), |acc, &x| acc + x);
    match policy {
        MergePolicy::ZeroFill => total / T::from_count(5),
        MergePolicy::AvailableOnly if present.is_empty() => T::zero(),
        MergePolicy::AvailableOnly => total / T::from_count(present.len()),
    }
}

/// Rank-weighted mean of the page's ideology scores, ranks starting at 1.
pub fn sris<T: Scalar>(pis: &[T], p: Persistence<T>) -> Result<T> {
    if pis.is_empty() {
        return Err(Error::EmptyList);
    }
    let mut num = T::zero();
    let mut den = T::zero();
    for (i, &pi) in pis.iter().enumerate() {
        let w = rank_weight(i + 1, p)?;
        num = num + pi * w;
        den = den + w;
    }
    Ok(num / den)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdeologyEntry {
    /// Raw scores on each source's native range.
    pub raw: [Option<f64>; 5],
    /// Merged score on `[-100, 100]`.
    pub pi: f64,
}

impl IdeologyEntry {
    pub fn rescaled(&self, kind: IndexKind) -> Option<f64> {
        self.raw[kind.position()].map(|r| rescale_index(r, kind.raw_range()).expect("validated on insert"))
    }
}

/// Which score of a domain to use when scoring a page.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreSource {
    Merged,
    /// One source index alone; missing values count as 0.
    Single(IndexKind),
}

/// Domain → ideology scores.
#[derive(Debug, Clone, Default)]
pub struct IdeologyTable {
    entries: BTreeMap<String, IdeologyEntry>,
    policy: MergePolicy,
}

#[derive(Debug, Serialize, Deserialize)]
struct IdeologyCsvRow {
    domain: String,
    alignment: Option<f64>,
    partisanship: Option<f64>,
    mturk: Option<f64>,
    pew: Option<f64>,
    audience_bias: Option<f64>,
}

impl IdeologyTable {
    pub fn new(policy: MergePolicy) -> Self {
        IdeologyTable {
            entries: BTreeMap::new(),
            policy,
        }
    }

    pub fn policy(&self) -> MergePolicy {
        self.policy
    }

    pub fn insert(&mut self, domain: &str, raw: [Option<f64>; 5]) -> Result<()> {
        let mut rescaled = [None; 5];
        for kind in IndexKind::ALL {
            if let Some(r) = raw[kind.position()] {
                rescaled[kind.position()] = Some(
                    rescale_index(r, kind.raw_range())
                        .map_err(|e| invalid(format!("{domain}/{}: {e}", kind.column())))?,
                );
            }
        }
        let pi = merge_pi(&rescaled, self.policy);
        self.entries.insert(domain.to_ascii_lowercase(), IdeologyEntry { raw, pi });
        Ok(())
    }

    pub fn get(&self, domain: &str) -> Option<&IdeologyEntry> {
        self.entries.get(domain)
    }

    /// Merged score; domains absent from every index are neutral.
    pub fn pi(&self, domain: &str) -> f64 {
        self.score(domain, ScoreSource::Merged)
    }

    pub fn score(&self, domain: &str, source: ScoreSource) -> f64 {
        match (self.entries.get(domain), source) {
            (None, _) => 0.0,
            (Some(e), ScoreSource::Merged) => e.pi,
            (Some(e), ScoreSource::Single(kind)) => e.rescaled(kind).unwrap_or(0.0),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn domains(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Score of a full page.
    pub fn sris(&self, page: &[String], p: Persistence<f64>) -> Result<f64> {
        self.sris_with(page, p, ScoreSource::Merged)
    }

    pub fn sris_with(&self, page: &[String], p: Persistence<f64>, source: ScoreSource) -> Result<f64> {
        let pis: Vec<f64> = page.iter().map(|d| self.score(d, source)).collect();
        sris(&pis, p)
    }

    /// Reads `domain,alignment,partisanship,mturk,pew,audience_bias`; empty
    /// cells are missing scores.
    pub fn from_csv<R: Read>(r: R, policy: MergePolicy) -> Result<Self> {
        let mut table = IdeologyTable::new(policy);
        let mut rdr = csv::Reader::from_reader(r);
        for row in rdr.deserialize() {
            let row: IdeologyCsvRow = row?;
            table.insert(
                &row.domain,
                [row.alignment, row.partisanship, row.mturk, row.pew, row.audience_bias],
            )?;
        }
        Ok(table)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        for (domain, e) in &self.entries {
            wtr.serialize(IdeologyCsvRow {
                domain: domain.clone(),
                alignment: e.raw[0],
                partisanship: e.raw[1],
                mturk: e.raw[2],
                pew: e.raw[3],
                audience_bias: e.raw[4],
            })?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Which domains of a page enter a subset score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubsetSelector {
    All,
    /// Outside the evaluating user's favorites.
    New,
    NewLocal,
    NewNonlocal,
}

impl SubsetSelector {
    pub const ALL: [SubsetSelector; 4] = [
        SubsetSelector::All,
        SubsetSelector::New,
        SubsetSelector::NewLocal,
        SubsetSelector::NewNonlocal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SubsetSelector::All => "all",
            SubsetSelector::New => "new",
            SubsetSelector::NewLocal => "new-local",
            SubsetSelector::NewNonlocal => "new-nonlocal",
        }
    }
}

/// Selector plus the per-user context it needs.
pub struct DomainSubset<'a> {
    pub selector: SubsetSelector,
    pub favorites: &'a BTreeSet<String>,
    pub is_local: &'a dyn Fn(&str) -> bool,
}

impl DomainSubset<'_> {
    pub fn keeps(&self, domain: &str) -> bool {
        let new = !self.favorites.contains(domain);
        match self.selector {
            SubsetSelector::All => true,
            SubsetSelector::New => new,
            SubsetSelector::NewLocal => new && (self.is_local)(domain),
            SubsetSelector::NewNonlocal => new && !(self.is_local)(domain),
        }
    }
}

/// Filters the page, re-ranks survivors from 1 and scores them; `None` when
/// nothing survives.
pub fn subset_sris(
    page: &[String],
    subset: &DomainSubset<'_>,
    table: &IdeologyTable,
    p: Persistence<f64>,
    source: ScoreSource,
) -> Result<Option<f64>> {
    let kept: Vec<f64> = page
        .iter()
        .filter(|d| subset.keeps(d))
        .map(|d| table.score(d, source))
        .collect();
    if kept.is_empty() {
        return Ok(None);
    }
    sris(&kept, p).map(Some)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Exact;
    use approx::assert_abs_diff_eq;

    fn p9() -> Persistence<f64> {
        Persistence::new(0.9).unwrap()
    }

    fn page(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn rescale_examples() {
        assert_eq!(rescale_index(0.0, (-1.0, 1.0)).unwrap(), 0.0);
        assert_eq!(rescale_index(1.0, (-1.0, 1.0)).unwrap(), 100.0);
        assert_eq!(rescale_index(0.25, (-1.0, 1.0)).unwrap(), 25.0);
        assert_eq!(rescale_index(3.0, (1.0, 5.0)).unwrap(), 0.0);
        assert_eq!(
            rescale_index(Exact::new(1, 3), (Exact::from_integer(-1), Exact::from_integer(1))).unwrap(),
            Exact::new(100, 3)
        );
        assert!(rescale_index(1.5, (-1.0, 1.0)).is_err());
        assert!(rescale_index(0.0, (1.0, 1.0)).is_err());
    }

    #[test]
    fn merge_examples() {
        let all = [Some(60.0); 5];
        assert_eq!(merge_pi(&all, MergePolicy::ZeroFill), 60.0);
        assert_eq!(merge_pi(&all, MergePolicy::AvailableOnly), 60.0);
        let one = [Some(50.0), None, None, None, None];
        assert_eq!(merge_pi(&one, MergePolicy::ZeroFill), 10.0);
        assert_eq!(merge_pi(&one, MergePolicy::AvailableOnly), 50.0);
        assert_eq!(merge_pi::<f64>(&[None; 5], MergePolicy::AvailableOnly), 0.0);
    }

    #[test]
    fn sris_examples() {
        assert_eq!(sris(&[0.0, 0.0, 0.0], p9()).unwrap(), 0.0);
        assert_abs_diff_eq!(sris(&[50.0], p9()).unwrap(), 50.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sris(&[100.0, -100.0], p9()).unwrap(), 100.0 / 19.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sris(&[100.0, -100.0], p9()).unwrap(), 5.2632, epsilon = 1e-4);
        assert!(sris::<f64>(&[], p9()).is_err());
    }

    #[test]
    fn sris_exact() {
        let p = Persistence::new(Exact::new(9, 10)).unwrap();
        let got = sris(&[Exact::from_integer(100), Exact::from_integer(-100)], p).unwrap();
        assert_eq!(got, Exact::new(100, 19));
    }

    #[test]
    fn table_csv_and_lookup() {
        let csv = "domain,alignment,partisanship,mturk,pew,audience_bias\n\
                   left.com,-1,-0.5,,,\n\
                   right.com,0.5,,,,\n";
        let t = IdeologyTable::from_csv(csv.as_bytes(), MergePolicy::ZeroFill).unwrap();
        assert_abs_diff_eq!(t.pi("left.com"), -30.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t.pi("right.com"), 10.0, epsilon = 1e-12);
        assert_eq!(t.pi("unknown.com"), 0.0);
        assert_eq!(t.score("left.com", ScoreSource::Single(IndexKind::Partisanship)), -50.0);
        assert_eq!(t.score("left.com", ScoreSource::Single(IndexKind::Pew)), 0.0);

        let t2 = IdeologyTable::from_csv(csv.as_bytes(), MergePolicy::AvailableOnly).unwrap();
        assert_abs_diff_eq!(t2.pi("left.com"), -75.0, epsilon = 1e-12);

        let mut out = Vec::new();
        t.write_csv(&mut out).unwrap();
        let back = IdeologyTable::from_csv(out.as_slice(), MergePolicy::ZeroFill).unwrap();
        assert_eq!(back.get("left.com"), t.get("left.com"));
    }

    #[test]
    fn out_of_range_raw_rejected() {
        let csv = "domain,alignment,partisanship,mturk,pew,audience_bias\nx.com,2,,,,\n";
        assert!(IdeologyTable::from_csv(csv.as_bytes(), MergePolicy::ZeroFill).is_err());
    }

    fn table() -> IdeologyTable {
        let mut t = IdeologyTable::new(MergePolicy::AvailableOnly);
        t.insert("fav.com", [Some(1.0), None, None, None, None]).unwrap();
        t.insert("new.com", [Some(-1.0), None, None, None, None]).unwrap();
        t.insert("local.com", [Some(0.5), None, None, None, None]).unwrap();
        t
    }

    #[test]
    fn subset_examples() {
        let t = table();
        let favs: BTreeSet<String> = ["fav.com".to_string()].into();
        let is_local = |d: &str| d == "local.com";
        let subset = |selector| DomainSubset { selector, favorites: &favs, is_local: &is_local };

        let full = page("fav.com new.com local.com");
        assert_eq!(
            subset_sris(&full, &subset(SubsetSelector::All), &t, p9(), ScoreSource::Merged).unwrap(),
            Some(t.sris(&full, p9()).unwrap())
        );
        assert_eq!(
            subset_sris(&page("fav.com"), &subset(SubsetSelector::New), &t, p9(), ScoreSource::Merged).unwrap(),
            None
        );
        let got = subset_sris(&page("fav.com new.com"), &subset(SubsetSelector::New), &t, p9(), ScoreSource::Merged)
            .unwrap()
            .unwrap();
        assert_abs_diff_eq!(got, -100.0, epsilon = 1e-12);
        let local = subset_sris(&full, &subset(SubsetSelector::NewLocal), &t, p9(), ScoreSource::Merged).unwrap();
        assert_abs_diff_eq!(local.unwrap(), 50.0, epsilon = 1e-12);
        let nonlocal = subset_sris(&full, &subset(SubsetSelector::NewNonlocal), &t, p9(), ScoreSource::Merged).unwrap();
        assert_abs_diff_eq!(nonlocal.unwrap(), -100.0, epsilon = 1e-12);
    }
}
