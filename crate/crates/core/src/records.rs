//! Observed result pages and their JSON Lines encoding.
//!
//! The same record type is emitted by the simulated engine and read back by
//! the analysis layer, so externally collected pages in this schema can be
//! analyzed without changes.

use std::io::{BufRead, BufReader, Read, Write};

use chrono::{DateTime, FixedOffset, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One observed search-results page.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SerpRecord {
    pub user_id: String,
    /// Local wall-clock time of the query, with its UTC offset.
    pub ts: DateTime<FixedOffset>,
    pub query: String,
    /// Organic result domains, rank order.
    pub organic: Vec<String>,
    /// Top-stories domains, rank order; `None` when the page had no such component.
    pub top_stories: Option<Vec<String>>,
    pub lang: String,
}

impl SerpRecord {
    /// Calendar date in the user's local time zone.
    pub fn date(&self) -> NaiveDate {
        self.ts.date_naive()
    }
}

pub fn write_jsonl<W: Write>(mut w: W, records: &[SerpRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl<R: Read>(r: R) -> Result<Vec<SerpRecord>> {
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: SerpRecord = serde_json::from_str(&line).map_err(|e| {
            Error::InvalidInput(format!("serp record line {}: {e}", lineno + 1))
        })?;
        out.push(rec);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivityKind {
    /// Page visit; `target` is a domain.
    Visit,
    /// Search; `target` is the query text.
    Search,
}

/// One browsing or search action outside the election queries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivityEvent {
    pub user_id: String,
    pub ts: DateTime<FixedOffset>,
    pub kind: ActivityKind,
    pub target: String,
}

pub fn write_activity_csv<W: Write>(w: W, events: &[ActivityEvent]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for e in events {
        wtr.serialize(e)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_activity_csv<R: Read>(r: R) -> Result<Vec<ActivityEvent>> {
    let mut rdr = csv::Reader::from_reader(r);
    rdr.deserialize().map(|row| row.map_err(Error::from)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_external_record_with_null_top_stories() {
        let line = r#"{"user_id":"u7","ts":"2020-11-04T10:15:00-06:00","query":"electoral vote","organic":["nytimes.com","cnn.com"],"top_stories":null,"lang":"en-US"}"#;
        let recs = read_jsonl(line.as_bytes()).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].top_stories, None);
        assert_eq!(recs[0].date(), NaiveDate::from_ymd_opt(2020, 11, 4).unwrap());

        let mut buf = Vec::new();
        write_jsonl(&mut buf, &recs).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().trim_end(), line);
    }

    #[test]
    fn bad_line_reports_its_number() {
        let input = "\n{\"user_id\":1}\n";
        let err = read_jsonl(input.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn activity_csv_round_trip() {
        let ts = DateTime::parse_from_rfc3339("2020-10-20T09:15:00-05:00").unwrap();
        let events = vec![
            ActivityEvent { user_id: "u1".into(), ts, kind: ActivityKind::Visit, target: "cnn.com".into() },
            ActivityEvent { user_id: "u1".into(), ts, kind: ActivityKind::Search, target: "ups tracker".into() },
        ];
        let mut buf = Vec::new();
        write_activity_csv(&mut buf, &events).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("user_id,ts,kind,target\n"));
        assert_eq!(read_activity_csv(buf.as_slice()).unwrap(), events);
    }
}
