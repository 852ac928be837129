use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use serde::Deserialize;

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Speaker {
    /// Roll-call ideology on `[-1, 1]`.
    pub ideology: f64,
    pub counts: BTreeMap<String, u64>,
}

impl Speaker {
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    /// Share of this speaker's phrase uses that are `phrase`.
    pub fn relative_frequency(&self, phrase: &str) -> Option<f64> {
        let total = self.total();
        (total > 0).then(|| self.counts.get(phrase).copied().unwrap_or(0) as f64 / total as f64)
    }
}

#[derive(Debug, Clone, Default)]
pub struct SpeakerCorpus {
    pub speakers: BTreeMap<String, Speaker>,
}

#[derive(Debug, Deserialize)]
struct SpeakerRow {
    speaker: String,
    dw_nominate: f64,
    phrase: String,
    count: u64,
}

impl SpeakerCorpus {
    /// Reads `speaker,dw_nominate,phrase,count`.
    pub fn from_csv<R: Read>(r: R) -> Result<Self> {
        let mut corpus = SpeakerCorpus::default();
        for row in csv::Reader::from_reader(r).deserialize() {
            let row: SpeakerRow = row?;
            if !(-1.0..=1.0).contains(&row.dw_nominate) {
                return Err(invalid(format!("speaker {} ideology {} outside [-1,1]", row.speaker, row.dw_nominate)));
            }
            let s = corpus.speakers.entry(row.speaker).or_default();
            s.ideology = row.dw_nominate;
            *s.counts.entry(row.phrase).or_default() += row.count;
        }
        Ok(corpus)
    }

    pub fn phrases(&self) -> BTreeSet<&str> {
        self.speakers
            .values()
            .flat_map(|s| s.counts.keys().map(String::as_str))
            .collect()
    }
}

/// Slope of a phrase's relative frequency on speaker ideology.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Loading {
    pub intercept: f64,
    pub beta: f64,
    pub se: f64,
    /// `beta / se`; infinite when the fit is exact and the slope nonzero.
    pub t: f64,
    pub n: usize,
}

/// OLS of relative frequency on ideology across speakers, with intercept.
/// Speakers who used no phrases at all are skipped.
pub fn partisan_loading(corpus: &SpeakerCorpus, phrase: &str) -> Result<Loading> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = corpus
        .speakers
        .values()
        .filter_map(|s| s.relative_frequency(phrase).map(|f| (s.ideology, f)))
        .unzip();
    simple_ols(&xs, &ys)
}

pub(crate) fn simple_ols(xs: &[f64], ys: &[f64]) -> Result<Loading> {
    let n = xs.len();
    if n < 3 {
        return Err(invalid(format!("need at least 3 observations, have {n}")));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("regressor is constant".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let beta = sxy / sxx;
    let intercept = my - beta * mx;
    let rss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - beta * x).powi(2)).sum();
    let se = (rss / (nf - 2.0) / sxx).sqrt();
    let t = if se > 0.0 {
        beta / se
    } else if beta == 0.0 {
        0.0
    } else {
        beta.signum() * f64::INFINITY
    };
    Ok(Loading { intercept, beta, se, t, n })
}

/// Divides by the largest absolute value, mapping it to ±1.
pub fn rescale_t_values(t_values: &[f64]) -> Result<Vec<f64>> {
    if t_values.is_empty() {
        return Err(invalid("no t-values"));
    }
    if t_values.iter().any(|t| !t.is_finite()) {
        return Err(invalid("t-values must be finite"));
    }
    let max = t_values.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    if max == 0.0 {
        return Err(Error::Degenerate("all t-values are zero".into()));
    }
    Ok(t_values.iter().map(|t| t / max).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn corpus(rows: &[(&str, f64, &str, u64)]) -> SpeakerCorpus {
        let mut csv = String::from("speaker,dw_nominate,phrase,count\n");
        for (s, x, p, c) in rows {
            csv.push_str(&format!("{s},{x},{p},{c}\n"));
        }
        SpeakerCorpus::from_csv(csv.as_bytes()).unwrap()
    }

    #[test]
    fn flat_response_has_zero_slope() {
        let c = corpus(&[
            ("a", -1.0, "tax cut", 1),
            ("a", -1.0, "other", 9),
            ("b", 0.0, "tax cut", 2),
            ("b", 0.0, "other", 18),
            ("c", 1.0, "tax cut", 3),
            ("c", 1.0, "other", 27),
        ]);
        let l = partisan_loading(&c, "tax cut").unwrap();
        assert_abs_diff_eq!(l.beta, 0.0, epsilon = 1e-15);
        assert_eq!(l.t, 0.0);
    }

    #[test]
    fn two_point_design() {
        // frequencies 0 at -1 and 0.1 at +1 → slope 0.05
        let c = corpus(&[
            ("a", -1.0, "other", 10),
            ("b", -1.0, "other", 10),
            ("c", 1.0, "clean energi", 1),
            ("c", 1.0, "other", 9),
            ("d", 1.0, "clean energi", 2),
            ("d", 1.0, "other", 18),
        ]);
        let l = partisan_loading(&c, "clean energi").unwrap();
        assert_abs_diff_eq!(l.beta, 0.05, epsilon = 1e-15);
        assert_abs_diff_eq!(l.intercept, 0.05, epsilon = 1e-15);
        assert_eq!(l.n, 4);
    }

    #[test]
    fn exact_linear_fit() {
        let xs = [-0.8, -0.2, 0.1, 0.6, 0.9];
        let ys: Vec<f64> = xs.iter().map(|x| 0.2 * x + 0.3).collect();
        let l = simple_ols(&xs, &ys).unwrap();
        assert_abs_diff_eq!(l.beta, 0.2, epsilon = 1e-14);
        assert_abs_diff_eq!(l.intercept, 0.3, epsilon = 1e-14);
        assert!(l.se < 1e-12);
    }

    #[test]
    fn constant_regressor_errors() {
        assert!(matches!(simple_ols(&[0.5; 4], &[1.0, 2.0, 3.0, 4.0]), Err(Error::Degenerate(_))));
        assert!(simple_ols(&[0.1, 0.2], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn rescale_examples() {
        let r = rescale_t_values(&[-6.44, 3.22]).unwrap();
        assert_abs_diff_eq!(r[0], -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r[1], 0.5, epsilon = 1e-15);
        assert_eq!(rescale_t_values(&[5.0]).unwrap(), vec![1.0]);
        assert_eq!(rescale_t_values(&[0.0, 4.0]).unwrap(), vec![0.0, 1.0]);
        assert!(rescale_t_values(&[0.0, 0.0]).is_err());
        assert!(rescale_t_values(&[]).is_err());
    }
}
