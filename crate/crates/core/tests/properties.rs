use std::collections::{BTreeMap, BTreeSet};

use chrono::{FixedOffset, TimeZone};
use proptest::prelude::*;

use serp_audit::econometrics::{cluster_vcov_raw, ols_fe, trim_outliers, Observation};
use serp_audit::ideology_index::sris;
use serp_audit::lexicon::{chi_square_partisanship, partisan_loading, rescale_t_values, Speaker, SpeakerCorpus};
use serp_audit::localness::{classify_local, DomainMetadata, LocalLabel, PlaceLexicon};
use serp_audit::population::{generate_population, Ideology, PopulationConfig, UserProfile};
use serp_audit::rank_similarity::{
    fit_persistence, jaccard, prefix_weight, rank_weight, rbo_ext, CalibrationMode, Persistence, RankedList,
};
use serp_audit::sim_engine::{serve_from, EngineState, PersonalizationConfig, WebIndexEntry};
use serp_audit::Result;

fn list(max: usize) -> impl Strategy<Value = Vec<String>> {
    proptest::sample::subsequence((0..10).collect::<Vec<u32>>(), 1..=max)
        .prop_shuffle()
        .prop_map(|v| v.into_iter().map(|i| format!("d{i}.com")).collect())
}

fn p() -> Persistence<f64> {
    Persistence::new(0.9).unwrap()
}

proptest! {
    #[test]
    fn similarity_is_symmetric_and_bounded(a in list(8), b in list(8), q in 0.05f64..0.95) {
        let (s, t) = (RankedList::new(&a), RankedList::new(&b));
        let q = Persistence::new(q).unwrap();
        let j1: f64 = jaccard(&s, &t);
        let j2: f64 = jaccard(&t, &s);
        let r1 = rbo_ext(&s, &t, q).unwrap();
        let r2 = rbo_ext(&t, &s, q).unwrap();
        prop_assert_eq!(j1, j2);
        prop_assert!((r1 - r2).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&j1));
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&r1));
        prop_assert!((rbo_ext(&s, &s, q).unwrap() - 1.0).abs() < 1e-12);
        prop_assert_eq!(jaccard::<f64>(&s, &s), 1.0);
    }

    #[test]
    fn disjoint_lists_score_zero(n in 1usize..6) {
        let s = RankedList::new((0..n).map(|i| format!("a{i}")));
        let t = RankedList::new((0..n).map(|i| format!("b{i}")));
        prop_assert_eq!(jaccard::<f64>(&s, &t), 0.0);
        prop_assert_eq!(rbo_ext(&s, &t, p()).unwrap(), 0.0);
    }

    #[test]
    fn rbo_ignores_domain_names(a in list(6), b in list(6), perm in Just((0..10u32).collect::<Vec<_>>()).prop_shuffle()) {
        let rename = |v: &[String]| -> Vec<String> {
            v.iter().map(|d| {
                let i: usize = d[1..d.len() - 4].parse().unwrap();
                format!("renamed{}.org", perm[i])
            }).collect()
        };
        let before = rbo_ext(&RankedList::new(&a), &RankedList::new(&b), p()).unwrap();
        let after = rbo_ext(&RankedList::new(rename(&a)), &RankedList::new(rename(&b)), p()).unwrap();
        prop_assert_eq!(before, after);
    }

    #[test]
    fn rank_weights_sum_to_one(q in 0.01f64..0.99) {
        let q = Persistence::new(q).unwrap();
        let total: f64 = (1..=10_000).map(|d| rank_weight(d, q).unwrap()).sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn fit_persistence_is_right_inverse(q in 0.05f64..0.98, depth in 1usize..20) {
        let m = prefix_weight(Persistence::new(q).unwrap(), depth).unwrap();
        prop_assume!(m > 1e-6 && m < 1.0 - 1e-6);
        let fitted = fit_persistence(m, depth, CalibrationMode::RboPrefix).unwrap();
        prop_assert!((prefix_weight(fitted, depth).unwrap() - m).abs() < 1e-5);
    }

    #[test]
    fn sris_is_antisymmetric_convex_and_shrinks_with_padding(
        pis in proptest::collection::vec(-100.0f64..100.0, 1..10),
        pad in 1usize..5,
    ) {
        let s = sris(&pis, p()).unwrap();
        let neg: Vec<f64> = pis.iter().map(|v| -v).collect();
        prop_assert_eq!(sris(&neg, p()).unwrap(), -s);
        let lo = pis.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = pis.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(s >= lo - 1e-9 && s <= hi + 1e-9);
        let mut padded = pis.clone();
        padded.extend(std::iter::repeat_n(0.0, pad));
        let sp = sris(&padded, p()).unwrap();
        prop_assert!(sp.abs() <= s.abs() + 1e-12);
        prop_assert!(sp * s >= 0.0);
    }

    #[test]
    fn chi_square_ignores_side_labels(a in 0.0f64..1e4, b in 0.0f64..1e4, c in 1.0f64..1e5, d in 1.0f64..1e5) {
        let x = chi_square_partisanship(a, b, c, d);
        let y = chi_square_partisanship(b, a, d, c);
        match (x, y) {
            (Ok(x), Ok(y)) => prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0)),
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "one orientation failed"),
        }
    }

    #[test]
    fn loading_matches_closed_form(
        speakers in proptest::collection::vec((-1.0f64..=1.0, 0u64..40, 1u64..40), 3..30)
    ) {
        let mut corpus = SpeakerCorpus::default();
        for (i, (ideology, target, other)) in speakers.iter().enumerate() {
            let counts = BTreeMap::from([("target".to_string(), *target), ("other".to_string(), *other)]);
            corpus.speakers.insert(format!("s{i:02}"), Speaker { ideology: *ideology, counts });
        }
        let xs: Vec<f64> = speakers.iter().map(|s| s.0).collect();
        let ys: Vec<f64> = speakers.iter().map(|s| s.1 as f64 / (s.1 + s.2) as f64).collect();
        let n = xs.len() as f64;
        let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
        let var: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        prop_assume!(var > 1e-6);
        let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let beta = partisan_loading(&corpus, "target").unwrap().beta;
        prop_assert!((beta - cov / var).abs() <= 1e-12);
    }

    #[test]
    fn rescaled_t_values_keep_order_and_are_idempotent(ts in proptest::collection::vec(-50.0f64..50.0, 1..30)) {
        prop_assume!(ts.iter().any(|t| *t != 0.0));
        let once = rescale_t_values(&ts).unwrap();
        let twice = rescale_t_values(&once).unwrap();
        prop_assert_eq!(&once, &twice);
        for (a, b) in ts.iter().zip(&once) {
            prop_assert_eq!(a.signum() == b.signum() || *a == 0.0, true);
        }
        for i in 0..ts.len() {
            for j in 0..ts.len() {
                if ts[i] < ts[j] {
                    prop_assert!(once[i] <= once[j]);
                }
            }
        }
    }
}

const PLACES: [&str; 4] = ["springfield", "tulsa", "media", "denver"];
const WORDS: [&str; 10] = ["springfield", "tulsa", "media", "denver", "local news", "national", "usa", "sports", "daily", "weather"];

fn metadata() -> impl Strategy<Value = DomainMetadata> {
    (
        proptest::sample::subsequence(WORDS.to_vec(), 0..5),
        prop_oneof![Just("com"), Just("org"), Just("uk"), Just("gov")],
        prop_oneof![Just("tulsatimes"), Just("dailyreport"), Just("txnews"), Just("springfieldsun")],
        proptest::sample::subsequence(vec!["United States - National", "United States - State & Local", "Blogs"], 0..2),
    )
        .prop_map(|(words, tld, label, collections)| DomainMetadata {
            domain: format!("{label}.{tld}"),
            tld: tld.into(),
            description_text: words.join(" "),
            collections: collections.into_iter().map(String::from).collect(),
        })
}

proptest! {
    #[test]
    fn exclusions_never_create_local_labels(meta in metadata(), excluded in proptest::sample::subsequence(PLACES.to_vec(), 0..4)) {
        let lexicon = PlaceLexicon::new(PLACES, ["local news", "local"], ["national", "usa"]);
        let (before, _) = classify_local(&meta, &lexicon);
        prop_assert_eq!(before, classify_local(&meta, &lexicon).0);
        let (after, _) = classify_local(&meta, &lexicon.clone().with_exclusions(excluded));
        if before == LocalLabel::NonLocal {
            prop_assert_ne!(after, LocalLabel::Local);
        }
    }
}

#[derive(Clone, Debug)]
struct Row {
    y: f64,
    x: f64,
    fe: u8,
    g: u8,
    h: u8,
}

impl Observation for Row {
    fn value(&self, var: &str) -> Result<Option<f64>> {
        Ok(Some(if var == "y" { self.y } else { self.x }))
    }
    fn key(&self, dim: &str) -> Result<String> {
        Ok(match dim {
            "fe" => self.fe,
            "g" => self.g,
            _ => self.h,
        }
        .to_string())
    }
}

fn rows() -> impl Strategy<Value = Vec<Row>> {
    proptest::collection::vec(
        (-5.0f64..5.0, -3.0f64..3.0, 0u8..3, 0u8..5, 0u8..4).prop_map(|(y, x, fe, g, h)| Row { y, x, fe, g, h }),
        20..60,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn residuals_are_orthogonal_to_regressors(data in rows()) {
        let Ok(fit) = ols_fe(&data, "y", &["x"], &["fe"]) else { return Ok(()) };
        let x = fit.design();
        let e = fit.residuals();
        for j in 0..x.ncols() {
            let col = x.column(j);
            prop_assert!(col.dot(e).abs() <= 1e-8 * (col.norm() * e.norm()).max(1.0));
        }
    }

    #[test]
    fn clustered_variance_ignores_cluster_labels(data in rows(), shift in 1u8..200) {
        let Ok(fit) = ols_fe(&data, "y", &["x"], &["fe"]) else { return Ok(()) };
        let Ok((v, _)) = cluster_vcov_raw(&fit, &data, &["g", "h"]) else { return Ok(()) };
        let relabeled: Vec<Row> = data
            .iter()
            .map(|r| Row { g: r.g.wrapping_mul(7).wrapping_add(shift), h: 250 - r.h, ..r.clone() })
            .collect();
        let (w, _) = cluster_vcov_raw(&fit, &relabeled, &["g", "h"]).unwrap();
        prop_assert!((&v - &w).abs().max() <= 1e-12 * v.abs().max().max(1.0));
    }

    #[test]
    fn trimming_without_extremes_changes_nothing(data in rows()) {
        let trimmed = trim_outliers(data.clone(), "x", 0.5).unwrap();
        prop_assert_eq!(trimmed.len(), data.len());
        let (Ok(a), Ok(b)) = (ols_fe(&data, "y", &["x"], &["fe"]), ols_fe(&trimmed, "y", &["x"], &["fe"])) else {
            return Ok(());
        };
        prop_assert_eq!(a.coef, b.coef);
    }
}

fn population_config() -> PopulationConfig {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/population.json");
    PopulationConfig::from_json(&std::fs::read_to_string(path).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn population_is_reproducible_with_unique_fingerprints(seed in any::<u64>()) {
        let cfg = population_config();
        let a = generate_population(&cfg, seed).unwrap();
        let b = generate_population(&cfg, seed).unwrap();
        prop_assert_eq!(&a.users, &b.users);
        let fps: BTreeSet<&str> = a.users.iter().map(|u| u.fingerprint_id.as_str()).collect();
        prop_assert_eq!(fps.len(), a.users.len());
    }
}

#[test]
fn favorite_sets_differ_within_a_party() {
    let cfg = population_config();
    let differ = (0..20u64).any(|seed| {
        let pop = generate_population(&cfg, seed).unwrap();
        let dems: BTreeSet<_> = pop
            .users
            .iter()
            .filter(|u| u.ideology == Ideology::Democrat)
            .map(|u| &u.favorite_partisan_domains)
            .collect();
        dems.len() > 1
    });
    assert!(differ);
}

fn engine_user(favorites: &BTreeSet<String>) -> UserProfile {
    UserProfile {
        user_id: "u000".into(),
        index: 0,
        fingerprint_id: "fp000".into(),
        ideology: Ideology::Nonpartisan,
        city: "Tulsa".into(),
        browser_language: "en-US".into(),
        favorite_popular_domains: favorites.clone(),
        favorite_partisan_domains: BTreeSet::new(),
        partisan_terms: Vec::new(),
        partisan_hashtags: Vec::new(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn familiarity_weight_never_reduces_favorites_on_page(
        bases in proptest::collection::vec(0.0f64..2.0, 12),
        visits in proptest::collection::vec(0u64..6, 12),
        favorite_mask in proptest::collection::vec(any::<bool>(), 12),
        lambda in 0.0f64..2.0,
        extra in 0.0f64..2.0,
        noise in 0.0f64..1.0,
        seed in any::<u64>(),
    ) {
        let candidates: Vec<WebIndexEntry> = bases
            .iter()
            .enumerate()
            .map(|(i, &b)| WebIndexEntry {
                query: "q".into(),
                domain: format!("d{i:02}.com"),
                base_relevance: b,
                pi: 0.0,
                locality: None,
                is_news: i % 2 == 0,
            })
            .collect();
        let favorites: BTreeSet<String> =
            (0..12).filter(|&i| favorite_mask[i]).map(|i| format!("d{i:02}.com")).collect();
        let user = engine_user(&favorites);
        let mut state = EngineState::new(["u000"]);
        for d in &favorites {
            let i: usize = d[1..3].parse().unwrap();
            for _ in 0..visits[i] {
                state.record_visit("u000", d).unwrap();
            }
        }
        let ts = FixedOffset::east_opt(-6 * 3600).unwrap().with_ymd_and_hms(2020, 10, 5, 16, 30, 0).unwrap();
        let count = |lambda_fam: f64| {
            let config = PersonalizationConfig { lambda_fam, noise_sd: noise, ..Default::default() };
            let page = serve_from(&candidates, "q", &user, ts, &state, &config, seed).unwrap();
            let again = serve_from(&candidates, "q", &user, ts, &state, &config, seed).unwrap();
            assert_eq!(page, again);
            page.organic.iter().filter(|d| favorites.contains(*d)).count()
        };
        prop_assert!(count(lambda) <= count(lambda + extra));
    }
}
