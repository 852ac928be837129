use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{jaccard, rbo_ext, Persistence, RankedList};
use crate::error::{Error, Result};
use crate::records::SerpRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ListKind {
    Organic,
    TopStories,
}

/// Similarity of two users' pages for the same query on the same day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityRow {
    pub user_i: String,
    pub user_j: String,
    pub query: String,
    pub date: NaiveDate,
    pub gap_hours: f64,
    pub jaccard: f64,
    pub rbo_ext: f64,
    pub list_kind: ListKind,
}

/// Compares every pair of distinct users who issued the same query on the
/// same local date, keeping pairs whose query times lie within
/// `max_gap_hours` (`None` = unlimited).
///
/// Organic lists are always compared; top-story lists only when both pages
/// carry one. Pairs where either list is empty are skipped. Output is sorted
/// by `(user_i, user_j, query, date, list_kind)`.
pub fn pairwise_similarity(
    records: &[SerpRecord],
    max_gap_hours: Option<f64>,
    p: Persistence<f64>,
) -> Result<Vec<SimilarityRow>> {
    let mut groups: BTreeMap<(&str, NaiveDate), Vec<&SerpRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.query.as_str(), r.date())).or_default().push(r);
    }

    let mut rows = Vec::new();
    for ((query, date), mut group) in groups {
        group.sort_by(|a, b| a.user_id.cmp(&b.user_id).then(a.ts.cmp(&b.ts)));
        let lists: Vec<(RankedList, Option<RankedList>)> = group
            .iter()
            .map(|r| (RankedList::new(&r.organic), r.top_stories.as_ref().map(RankedList::new)))
            .collect();
        for (i, a) in group.iter().enumerate() {
            for (j, b) in group.iter().enumerate().skip(i + 1) {
                if a.user_id == b.user_id {
                    continue;
                }
                let gap_hours = (a.ts - b.ts).num_milliseconds().abs() as f64 / 3_600_000.0;
                if max_gap_hours.is_some_and(|max| gap_hours > max) {
                    continue;
                }
                let mut push = |kind: ListKind, la: &RankedList, lb: &RankedList| -> Result<()> {
                    if la.is_empty() || lb.is_empty() {
                        return Ok(());
                    }
                    rows.push(SimilarityRow {
                        user_i: a.user_id.clone(),
                        user_j: b.user_id.clone(),
                        query: query.to_string(),
                        date,
                        gap_hours,
                        jaccard: jaccard(la, lb),
                        rbo_ext: rbo_ext(la, lb, p)?,
                        list_kind: kind,
                    });
                    Ok(())
                };
                push(ListKind::Organic, &lists[i].0, &lists[j].0)?;
                if let (Some(ta), Some(tb)) = (&lists[i].1, &lists[j].1) {
                    push(ListKind::TopStories, ta, tb)?;
                }
            }
        }
    }
    rows.sort_by(|x, y| {
        (&x.user_i, &x.user_j, &x.query, x.date, x.list_kind)
            .cmp(&(&y.user_i, &y.user_j, &y.query, y.date, y.list_kind))
            .then(x.gap_hours.total_cmp(&y.gap_hours))
    });
    Ok(rows)
}

/// CSV with header `user_i,user_j,query,date,gap_hours,jaccard,rbo_ext,list_kind`.
pub fn write_similarity_csv<W: Write>(w: W, rows: &[SimilarityRow]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_similarity_csv<R: Read>(r: R) -> Result<Vec<SimilarityRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    rdr.deserialize().map(|row| row.map_err(Error::from)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{DateTime, FixedOffset};

    fn rec(user: &str, ts: &str, organic: &[&str], top: Option<&[&str]>) -> SerpRecord {
        SerpRecord {
            user_id: user.into(),
            ts: DateTime::<FixedOffset>::parse_from_rfc3339(ts).unwrap(),
            query: "electoral vote".into(),
            organic: organic.iter().map(|s| s.to_string()).collect(),
            top_stories: top.map(|t| t.iter().map(|s| s.to_string()).collect()),
            lang: "en-US".into(),
        }
    }

    #[test]
    fn three_users_give_three_pairs() {
        let recs = vec![
            rec("u2", "2020-11-04T10:00:00-05:00", &["a", "b"], None),
            rec("u1", "2020-11-04T10:30:00-05:00", &["a", "b"], None),
            rec("u3", "2020-11-04T11:00:00-05:00", &["b", "c"], None),
        ];
        let rows = pairwise_similarity(&recs, None, Persistence::default()).unwrap();
        assert_eq!(rows.len(), 3);
        let pairs: Vec<_> = rows.iter().map(|r| (r.user_i.as_str(), r.user_j.as_str())).collect();
        assert_eq!(pairs, vec![("u1", "u2"), ("u1", "u3"), ("u2", "u3")]);
        assert_eq!(rows[0].jaccard, 1.0);
        assert!((rows[0].rbo_ext - 1.0).abs() < 1e-12);
        assert!((rows[0].gap_hours - 0.5).abs() < 1e-12);
    }

    #[test]
    fn gap_filter_excludes_distant_pairs() {
        let recs = vec![
            rec("u1", "2020-11-04T10:00:00-05:00", &["a"], None),
            rec("u2", "2020-11-04T11:00:00-05:00", &["a"], None),
        ];
        assert!(pairwise_similarity(&recs, Some(0.01), Persistence::default()).unwrap().is_empty());
        assert_eq!(pairwise_similarity(&recs, Some(1.0), Persistence::default()).unwrap().len(), 1);
    }

    #[test]
    fn top_stories_only_when_both_present() {
        let recs = vec![
            rec("u1", "2020-11-04T10:00:00-05:00", &["a"], Some(&["x", "y"])),
            rec("u2", "2020-11-04T10:00:00-05:00", &["a"], Some(&["y", "x"])),
            rec("u3", "2020-11-04T10:00:00-05:00", &["a"], None),
        ];
        let rows = pairwise_similarity(&recs, None, Persistence::default()).unwrap();
        let ts: Vec<_> = rows.iter().filter(|r| r.list_kind == ListKind::TopStories).collect();
        assert_eq!(ts.len(), 1);
        assert_eq!(ts[0].jaccard, 1.0);
        assert!((ts[0].rbo_ext - 0.9).abs() < 1e-12);
    }

    #[test]
    fn different_dates_or_queries_not_paired() {
        let mut b = rec("u2", "2020-11-05T10:00:00-05:00", &["a"], None);
        let a = rec("u1", "2020-11-04T10:00:00-05:00", &["a"], None);
        assert!(pairwise_similarity(&[a.clone(), b.clone()], None, Persistence::default()).unwrap().is_empty());
        b.ts = a.ts;
        b.query = "other".into();
        assert!(pairwise_similarity(&[a, b], None, Persistence::default()).unwrap().is_empty());
    }

    #[test]
    fn csv_header_layout() {
        let recs = vec![
            rec("u1", "2020-11-04T10:00:00-05:00", &["a"], None),
            rec("u2", "2020-11-04T10:00:00-05:00", &["a"], None),
        ];
        let rows = pairwise_similarity(&recs, None, Persistence::default()).unwrap();
        let mut buf = Vec::new();
        write_similarity_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("user_i,user_j,query,date,gap_hours,jaccard,rbo_ext,list_kind\n"));
        assert!(text.contains(",organic\n"));
    }
}
