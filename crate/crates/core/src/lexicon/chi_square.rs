use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Side {
    #[serde(rename = "R", alias = "r", alias = "republican", alias = "Republican")]
    R,
    #[serde(rename = "D", alias = "d", alias = "democrat", alias = "Democrat")]
    D,
}

/// Pearson χ² of the 2×2 table (item vs. rest) × (Republican vs. Democrat).
///
/// Arguments are the item's counts on each side and the counts of all other
/// items on each side.
pub fn chi_square_partisanship(f_r: f64, f_d: f64, f_not_r: f64, f_not_d: f64) -> Result<f64> {
    for (name, v) in [("f_r", f_r), ("f_d", f_d), ("f_~r", f_not_r), ("f_~d", f_not_d)] {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(invalid(format!("{name} must be a finite nonnegative count")));
        }
    }
    let num = f_r * f_not_d - f_d * f_not_r;
    let den = (f_r + f_d) * (f_not_r + f_not_d) * (f_r + f_not_r) * (f_d + f_not_d);
    if den == 0.0 {
        return Err(Error::Degenerate("contingency table has an empty margin".into()));
    }
    Ok(num * num / den)
}

/// Per-item counts by side, with corpus totals.
#[derive(Debug, Clone, Default)]
pub struct TaggedCounts {
    items: BTreeMap<String, (u64, u64)>,
}

#[derive(Debug, Deserialize)]
struct CorpusRow {
    item: String,
    side: Side,
    count: u64,
}

impl TaggedCounts {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, item: &str, side: Side, count: u64) {
        let e = self.items.entry(item.to_string()).or_default();
        match side {
            Side::R => e.0 += count,
            Side::D => e.1 += count,
        }
    }

    /// `(f_r, f_d)` for one item.
    pub fn get(&self, item: &str) -> Option<(u64, u64)> {
        self.items.get(item).copied()
    }

    /// `(F_r, F_d)`.
    pub fn totals(&self) -> (u64, u64) {
        self.items.values().fold((0, 0), |(r, d), &(a, b)| (r + a, d + b))
    }

    /// `(item, (f_r, f_d))` in item order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, (u64, u64))> {
        self.items.iter().map(|(k, &v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn chi_square(&self, item: &str) -> Result<f64> {
        let (f_r, f_d) = self.get(item).ok_or_else(|| invalid(format!("unknown item `{item}`")))?;
        let (tr, td) = self.totals();
        chi_square_partisanship(f_r as f64, f_d as f64, (tr - f_r) as f64, (td - f_d) as f64)
    }

    /// Reads `item,side,count` rows; repeated items accumulate.
    pub fn from_csv<R: Read>(r: R) -> Result<Self> {
        let mut out = TaggedCounts::new();
        for row in csv::Reader::from_reader(r).deserialize() {
            let row: CorpusRow = row?;
            out.add(&row.item, row.side, row.count);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopItems {
    /// `(item, χ²)`, most partisan first.
    pub items: Vec<(String, f64)>,
    /// Fewer than the requested number qualified.
    pub shortfall: bool,
}

/// The `n` items used more by `side` than by the other side, ranked by χ²
/// descending with ties broken on the item string.
pub fn top_partisan_items(counts: &TaggedCounts, n: usize, side: Side) -> Result<TopItems> {
    if n == 0 {
        return Err(invalid("n must be >= 1"));
    }
    let mut scored = Vec::new();
    for (item, &(f_r, f_d)) in &counts.items {
        let leans = match side {
            Side::R => f_r > f_d,
            Side::D => f_d > f_r,
        };
        if leans {
            scored.push((item.clone(), counts.chi_square(item)?));
        }
    }
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let shortfall = scored.len() < n;
    scored.truncate(n);
    Ok(TopItems { items: scored, shortfall })
}
