//! End-to-end runs: population, synthetic web, day-by-day simulation,
//! panel construction, regressions and reports, all written to one
//! artifact directory with a hash manifest.
//!
//! Each stage reads its inputs from the artifact directory, so externally
//! collected result pages dropped in as `serp_records.jsonl` go through the
//! same analysis.

pub mod lexicon_run;
pub mod report;
mod svg;
pub mod world;

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use chrono::{Days, Duration, FixedOffset, NaiveDate, NaiveTime, TimeZone};
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::econometrics::{
    self, build_panel, dummy_marginal_effects, linear_hypothesis, regression_table, trim_outliers, Binning,
    EffectsSpec, FitResult, FitSummary, LevelEffect, PanelInputs, PanelRow, RegressionRow, Spec, WaldTest,
};
use crate::error::{invalid, Error, Result};
use crate::ideology_index::{IdeologyTable, MergePolicy, ScoreSource};
use crate::localness::{self, classify_all, LocalLabel, LocalnessRow, PlaceLexicon};
use crate::population::{
    daily_schedule, generate_population, ActionKind, CityProfile, Population, PopulationConfig, UserProfile,
};
use crate::rank_similarity::{pairwise_similarity, write_similarity_csv, Persistence, SimilarityRow};
use crate::records::{self, ActivityEvent, ActivityKind, SerpRecord};
use crate::seed;
use crate::sim_engine::{serve_from, EngineState, PersonalizationConfig, WebIndex, WebIndexEntry};

pub use world::{build_world, World, WorldConfig};

const TAG_ELECTION: u64 = 0xE1EC;

pub mod files {
    pub const CITIES: &str = "cities.json";
    pub const POPULATION: &str = "population.jsonl";
    pub const INDEX: &str = "index.csv";
    pub const IDEOLOGY: &str = "ideology.csv";
    pub const METADATA: &str = "metadata.csv";
    pub const LOCALNESS: &str = "localness.csv";
    pub const LOCALNESS_REVIEW: &str = "localness_review.csv";
    pub const ACTIVITY: &str = "activity.csv";
    pub const SERP_RECORDS: &str = "serp_records.jsonl";
    pub const SIMILARITY: &str = "similarity.csv";
    pub const PANEL: &str = "panel.csv";
    pub const FITS: &str = "fits";
    pub const REPORT: &str = "report";
    pub const MANIFEST: &str = "manifest.json";
}

fn default_n_days() -> usize {
    30
}
fn default_persistence() -> f64 {
    crate::DEFAULT_PERSISTENCE
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_election_time() -> NaiveTime {
    NaiveTime::from_hms_opt(16, 30, 0).expect("valid time")
}
fn default_trim() -> f64 {
    0.5
}
fn default_bins() -> Option<Vec<i64>> {
    Some(vec![0, 1, 3, 6, 11, 21])
}
fn default_fe() -> Vec<String> {
    ["date", "query", "browser_language"].map(String::from).to_vec()
}
fn default_clusters() -> Vec<String> {
    ["date", "query", "user"].map(String::from).to_vec()
}
fn default_gaps() -> Vec<f64> {
    vec![0.25, 0.5, 1.0, 2.0, 3.0, 4.0, 6.0]
}
fn default_hist_bins() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    /// Share (percent) of highest prior-visit rows dropped from familiarity fits.
    #[serde(default = "default_trim")]
    pub trim_top_pct: f64,
    /// Lower edges grouping prior-visit counts; `null` uses every level.
    #[serde(default = "default_bins")]
    pub visit_bins: Option<Vec<i64>>,
    #[serde(default = "default_fe")]
    pub fixed_effects: Vec<String>,
    #[serde(default = "default_clusters")]
    pub cluster_dims: Vec<String>,
    #[serde(default = "default_gaps")]
    pub gap_thresholds_hours: Vec<f64>,
    #[serde(default = "default_hist_bins")]
    pub histogram_bins: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields defaulted")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_n_days")]
    pub n_days: usize,
    pub start_date: NaiveDate,
    /// Election queries per day; day `d` uses entry `d % len`.
    pub election_queries: Vec<Vec<String>>,
    /// Local time of a user's first election query; later ones follow at
    /// two-minute steps after a per-user, per-day delay of up to 20 minutes.
    #[serde(default = "default_election_time")]
    pub election_time: NaiveTime,
    #[serde(default)]
    pub engine: PersonalizationConfig,
    #[serde(default = "default_persistence")]
    pub persistence: f64,
    /// Relative paths resolve against the config file's directory.
    pub population_config: PathBuf,
    pub place_lexicon_dir: PathBuf,
    #[serde(default)]
    pub world: WorldConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

/// A validated configuration with its fixtures loaded.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub population: PopulationConfig,
    pub lexicon: PlaceLexicon,
}

fn read_fixture(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|_| Error::MissingFixture(path.to_path_buf()))
}

impl Experiment {
    pub fn load(path: &Path) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(&read_fixture(path)?)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let population = PopulationConfig::from_json(&read_fixture(&base.join(&config.population_config))?)?;
        let lexicon = PlaceLexicon::from_dir(&base.join(&config.place_lexicon_dir))?;
        Self::new(config, population, lexicon)
    }

    pub fn new(config: ExperimentConfig, population: PopulationConfig, lexicon: PlaceLexicon) -> Result<Self> {
        if config.n_days == 0 {
            return Err(invalid("n_days must be >= 1"));
        }
        if config.election_queries.is_empty() || config.election_queries.iter().any(Vec::is_empty) {
            return Err(invalid("every day needs at least one election query"));
        }
        Persistence::new(config.persistence)?;
        config.engine.validate()?;
        Ok(Self { config, population, lexicon })
    }

    fn persistence(&self) -> Persistence<f64> {
        Persistence::new(self.config.persistence).expect("validated")
    }

    pub fn election_query_pool(&self) -> BTreeSet<String> {
        self.config.election_queries.iter().flatten().cloned().collect()
    }

    pub fn queries_for_day(&self, day: usize) -> &[String] {
        &self.config.election_queries[day % self.config.election_queries.len()]
    }
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub population: Population,
    pub world: World,
    pub localness: Vec<LocalnessRow>,
    pub activity: Vec<ActivityEvent>,
    /// Election-query pages only.
    pub records: Vec<SerpRecord>,
}

fn offset(city: &CityProfile) -> Result<FixedOffset> {
    FixedOffset::east_opt(city.utc_offset_minutes * 60)
        .ok_or_else(|| invalid(format!("bad UTC offset for {}", city.name)))
}

struct Runner<'a> {
    exp: &'a Experiment,
    seed: u64,
    index: &'a WebIndex,
    state: EngineState,
    cache: BTreeMap<String, Vec<WebIndexEntry>>,
    activity: Vec<ActivityEvent>,
    records: Vec<SerpRecord>,
}

impl Runner<'_> {
    fn visit(&mut self, user: &UserProfile, ts: chrono::DateTime<FixedOffset>, domain: &str) -> Result<()> {
        self.state.record_visit(&user.user_id, domain)?;
        self.activity.push(ActivityEvent {
            user_id: user.user_id.clone(),
            ts,
            kind: ActivityKind::Visit,
            target: domain.to_string(),
        });
        Ok(())
    }

    fn search(&mut self, user: &UserProfile, ts: chrono::DateTime<FixedOffset>, query: &str) -> Result<SerpRecord> {
        let candidates = self.cache.entry(query.to_string()).or_insert_with(|| self.index.candidates(query));
        serve_from(candidates, query, user, ts, &self.state, &self.exp.config.engine, self.seed)
    }

    /// Users always open the first organic result.
    fn click_first(&mut self, user: &UserProfile, page: &SerpRecord, after: Duration) -> Result<()> {
        if let Some(first) = page.organic.first() {
            self.visit(user, page.ts + after, first)?;
        }
        Ok(())
    }

    fn day(&mut self, users: &[UserProfile], cities: &BTreeMap<&str, &CityProfile>, day: usize) -> Result<()> {
        let date = self.exp.config.start_date + Days::new(day as u64);
        let queries = self.exp.queries_for_day(day).to_vec();
        for user in users {
            let city = cities
                .get(user.city.as_str())
                .ok_or_else(|| invalid(format!("user {} has unknown city {}", user.user_id, user.city)))?;
            let tz = offset(city)?;
            let local = |t: NaiveTime| {
                tz.from_local_datetime(&date.and_time(t)).single().ok_or_else(|| invalid("ambiguous local time"))
            };
            let plan = daily_schedule(user, date, self.seed, &self.exp.population.common_search_terms);
            for action in &plan.actions {
                let ts = local(action.time)?;
                match &action.kind {
                    ActionKind::VisitPopular(d) | ActionKind::VisitPartisan(d) => self.visit(user, ts, d)?,
                    ActionKind::SearchCommon(q) | ActionKind::SearchPartisan(q) => {
                        self.activity.push(ActivityEvent {
                            user_id: user.user_id.clone(),
                            ts,
                            kind: ActivityKind::Search,
                            target: q.clone(),
                        });
                        let page = self.search(user, ts, q)?;
                        self.click_first(user, &page, Duration::seconds(5))?;
                    }
                }
            }
            let mut rng = seed::rng(self.seed, &[TAG_ELECTION, seed::hash_str(&user.user_id), day as u64]);
            let start = local(self.exp.config.election_time)? + Duration::minutes(rng.random_range(0..=20));
            for (k, q) in queries.iter().enumerate() {
                let ts = start + Duration::minutes(2 * k as i64);
                let page = self.search(user, ts, q)?;
                self.click_first(user, &page, Duration::seconds(10))?;
                self.records.push(page);
            }
        }
        Ok(())
    }
}

/// Runs the whole simulated study in memory.
pub fn simulate(exp: &Experiment, seed: u64) -> Result<Simulation> {
    let population = generate_population(&exp.population, seed)?;
    let world = build_world(&exp.population, &population.cities, &exp.election_query_pool(), &exp.config.world, seed)?;
    let city_names: BTreeSet<String> = population.cities.iter().map(|c| c.name.clone()).collect();
    world.index.check_localities(&city_names)?;
    let localness = classify_all(&world.metadata, &exp.lexicon);

    let cities: BTreeMap<&str, &CityProfile> = population.cities.iter().map(|c| (c.name.as_str(), c)).collect();
    let mut runner = Runner {
        exp,
        seed,
        index: &world.index,
        state: EngineState::new(population.users.iter().map(|u| u.user_id.clone())),
        cache: BTreeMap::new(),
        activity: Vec::new(),
        records: Vec::new(),
    };
    for day in 0..exp.config.n_days {
        runner.day(&population.users, &cities, day)?;
    }
    let (activity, records) = (runner.activity, runner.records);
    Ok(Simulation { population, world, localness, activity, records })
}

/// Everything the panel needs, independent of where it came from.
#[derive(Debug, Clone)]
pub struct AnalysisInputs {
    pub users: Vec<UserProfile>,
    pub cities: Vec<CityProfile>,
    pub ideology: IdeologyTable,
    pub localness: BTreeMap<String, LocalLabel>,
    pub activity: Vec<ActivityEvent>,
    pub records: Vec<SerpRecord>,
}

impl AnalysisInputs {
    pub fn from_simulation(sim: &Simulation) -> Self {
        Self {
            users: sim.population.users.clone(),
            cities: sim.population.cities.clone(),
            ideology: sim.world.ideology.clone(),
            localness: sim.localness.iter().map(|r| (r.domain.clone(), r.label)).collect(),
            activity: sim.activity.clone(),
            records: sim.records.clone(),
        }
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let users = crate::population::Population::read_users_jsonl(open_artifact(dir, files::POPULATION)?)?;
        let cities = serde_json::from_reader(open_artifact(dir, files::CITIES)?)?;
        let ideology = IdeologyTable::from_csv(open_artifact(dir, files::IDEOLOGY)?, MergePolicy::ZeroFill)?;
        let localness = localness::read_labels_csv(open_artifact(dir, files::LOCALNESS)?)?
            .into_iter()
            .map(|r| (r.domain, r.label))
            .collect();
        let activity = records::read_activity_csv(open_artifact(dir, files::ACTIVITY)?)?;
        let records = records::read_jsonl(open_artifact(dir, files::SERP_RECORDS)?)?;
        Ok(Self { users, cities, ideology, localness, activity, records })
    }

    pub fn panel(&self, persistence: Persistence<f64>) -> Result<Vec<PanelRow>> {
        build_panel(
            &self.records,
            &PanelInputs {
                users: &self.users,
                cities: &self.cities,
                ideology: &self.ideology,
                localness: &self.localness,
                activity: &self.activity,
                persistence,
                score_source: ScoreSource::Merged,
            },
        )
    }
}

pub(crate) fn open_artifact(dir: &Path, name: &str) -> Result<BufReader<File>> {
    File::open(dir.join(name)).map(BufReader::new).map_err(|_| Error::MissingArtifact(name.into()))
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

pub fn write_population(dir: &Path, population: &Population) -> Result<()> {
    fs::create_dir_all(dir)?;
    population.write_users_jsonl(create(dir, files::POPULATION)?)?;
    let mut cities = serde_json::to_string_pretty(&population.cities)?;
    cities.push('\n');
    fs::write(dir.join(files::CITIES), cities)?;
    Ok(())
}

pub fn write_simulation(dir: &Path, sim: &Simulation) -> Result<()> {
    write_population(dir, &sim.population)?;
    sim.world.index.write_csv(create(dir, files::INDEX)?)?;
    sim.world.ideology.write_csv(create(dir, files::IDEOLOGY)?)?;
    localness::write_metadata_csv(create(dir, files::METADATA)?, &sim.world.metadata)?;
    localness::write_labels_csv(create(dir, files::LOCALNESS)?, &sim.localness)?;
    localness::write_review_csv(create(dir, files::LOCALNESS_REVIEW)?, &sim.localness)?;
    records::write_activity_csv(create(dir, files::ACTIVITY)?, &sim.activity)?;
    records::write_jsonl(create(dir, files::SERP_RECORDS)?, &sim.records)?;
    Ok(())
}

/// Panel plus pairwise similarity from the artifacts in `dir`.
pub fn panel_stage(exp: &Experiment, dir: &Path) -> Result<(Vec<PanelRow>, Vec<SimilarityRow>)> {
    let inputs = AnalysisInputs::load(dir)?;
    let panel = inputs.panel(exp.persistence())?;
    let similarity = pairwise_similarity(&inputs.records, None, exp.persistence())?;
    econometrics::write_panel_csv(create(dir, files::PANEL)?, &panel)?;
    write_similarity_csv(create(dir, files::SIMILARITY)?, &similarity)?;
    Ok((panel, similarity))
}

#[derive(Debug, Clone)]
pub enum FitOutput {
    Effects(Vec<LevelEffect>),
    Regression(Box<FitResult>),
}

#[derive(Debug, Clone)]
pub struct FitEntry {
    pub name: String,
    pub result: std::result::Result<FitOutput, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisRow {
    pub model: String,
    pub a: String,
    pub b: String,
    pub difference: f64,
    pub variance: f64,
    pub statistic: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, Default)]
pub struct Analysis {
    pub entries: Vec<FitEntry>,
    pub hypotheses: Vec<HypothesisRow>,
}

impl Analysis {
    pub fn get(&self, name: &str) -> Option<&FitOutput> {
        self.entries.iter().find(|e| e.name == name).and_then(|e| e.result.as_ref().ok())
    }

    pub fn regression(&self, name: &str) -> Option<&FitResult> {
        match self.get(name)? {
            FitOutput::Regression(f) => Some(f),
            FitOutput::Effects(_) => None,
        }
    }

    pub fn effects(&self, name: &str) -> Option<&[LevelEffect]> {
        match self.get(name)? {
            FitOutput::Effects(e) => Some(e),
            FitOutput::Regression(_) => None,
        }
    }
}

pub const SRIS_OUTCOMES: [&str; 4] = ["sris_new", "sris_all", "sris_new_local", "sris_new_nonlocal"];
pub const GROUP_REGRESSORS: [&str; 4] = ["user_dem", "user_rep", "city_dem", "city_rep"];
pub const CONTINUOUS_REGRESSORS: [&str; 2] = ["visited_sites_ideology", "city_rep_share"];

/// All regressions behind the report.
pub fn analyze(panel: &[PanelRow], cfg: &AnalysisConfig) -> Result<Analysis> {
    let fe: Vec<&str> = cfg.fixed_effects.iter().map(String::as_str).collect();
    let clusters: Vec<&str> = cfg.cluster_dims.iter().map(String::as_str).collect();
    let bins = cfg.visit_bins.clone().map(Binning::new).transpose()?;
    let trimmed = trim_outliers(panel.to_vec(), "prior_visits", cfg.trim_top_pct)?;
    let mut out = Analysis::default();

    for (suffix, outcome, rank) in [
        ("organic", "n_familiar", "top_familiar_rank"),
        ("top_stories", "stories_n_familiar", "stories_top_familiar_rank"),
    ] {
        let spec = EffectsSpec {
            outcome,
            driver: "prior_visits",
            reference: 0,
            bins: bins.as_ref(),
            controls: &[],
            fixed_effects: &fe,
            cluster_dims: &clusters,
        };
        out.entries.push(FitEntry {
            name: format!("familiarity_{suffix}"),
            result: dummy_marginal_effects(&trimmed, &spec).map(FitOutput::Effects).map_err(|e| e.to_string()),
        });
        let spec = Spec { outcome: rank, regressors: &["prior_visits"], fixed_effects: &fe, cluster_dims: &clusters };
        out.entries.push(FitEntry {
            name: format!("familiar_rank_{suffix}"),
            result: econometrics::fit_clustered(&trimmed, &spec)
                .map(|f| FitOutput::Regression(Box::new(f)))
                .map_err(|e| e.to_string()),
        });
    }

    for outcome in SRIS_OUTCOMES {
        let spec = Spec { outcome, regressors: &GROUP_REGRESSORS, fixed_effects: &fe, cluster_dims: &clusters };
        let fit = econometrics::fit_clustered(panel, &spec);
        if let Ok(fit) = &fit {
            for (a, b) in [("user_dem", "user_rep"), ("city_dem", "city_rep")] {
                let WaldTest { difference, variance, statistic, p_value } = linear_hypothesis(fit, a, b)?;
                out.hypotheses.push(HypothesisRow {
                    model: outcome.into(),
                    a: a.into(),
                    b: b.into(),
                    difference,
                    variance,
                    statistic,
                    p_value,
                });
            }
        }
        out.entries.push(FitEntry {
            name: outcome.to_string(),
            result: fit.map(|f| FitOutput::Regression(Box::new(f))).map_err(|e| e.to_string()),
        });
        let spec = Spec { outcome, regressors: &CONTINUOUS_REGRESSORS, fixed_effects: &fe, cluster_dims: &clusters };
        out.entries.push(FitEntry {
            name: format!("{outcome}_continuous"),
            result: econometrics::fit_clustered(panel, &spec)
                .map(|f| FitOutput::Regression(Box::new(f)))
                .map_err(|e| e.to_string()),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitStatus {
    pub name: String,
    pub kind: String,
    pub status: String,
    pub message: String,
}

fn write_rows<T: Serialize>(dir: &Path, name: &str, rows: &[T]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(create(dir, name)?);
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_analysis(dir: &Path, analysis: &Analysis) -> Result<()> {
    let fits = dir.join(files::FITS);
    fs::create_dir_all(&fits)?;
    let mut status = Vec::new();
    for entry in &analysis.entries {
        let (kind, state, message) = match &entry.result {
            Ok(FitOutput::Effects(levels)) => {
                write_rows(&fits, &format!("{}.csv", entry.name), levels)?;
                ("effects", "ok", String::new())
            }
            Ok(FitOutput::Regression(fit)) => {
                write_rows::<RegressionRow>(&fits, &format!("{}.csv", entry.name), &regression_table(fit)?)?;
                let mut summary = serde_json::to_string_pretty(&FitSummary::of(fit))?;
                summary.push('\n');
                fs::write(fits.join(format!("{}.json", entry.name)), summary)?;
                ("regression", "ok", String::new())
            }
            Err(msg) => ("", "failed", msg.clone()),
        };
        status.push(FitStatus { name: entry.name.clone(), kind: kind.into(), status: state.into(), message });
    }
    write_rows(&fits, "hypotheses.csv", &analysis.hypotheses)?;
    write_rows(&fits, "status.csv", &status)?;
    Ok(())
}

pub fn fit_stage(exp: &Experiment, dir: &Path) -> Result<Analysis> {
    let panel = econometrics::read_panel_csv(open_artifact(dir, files::PANEL)?)?;
    let analysis = analyze(&panel, &exp.config.analysis)?;
    write_analysis(dir, &analysis)?;
    Ok(analysis)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub crate_version: String,
    pub config: ExperimentConfig,
    /// Relative path → SHA-256 of every other file in the directory.
    pub files: BTreeMap<String, String>,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn collect_files(root: &Path, dir: &Path, out: &mut BTreeMap<String, String>) -> Result<()> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)?.map(|e| e.map(|e| e.path())).collect::<std::io::Result<_>>()?;
    entries.sort();
    for path in entries {
        if path.is_dir() {
            collect_files(root, &path, out)?;
        } else {
            let rel = path.strip_prefix(root).expect("under root");
            let rel: Vec<String> = rel.components().map(|c| c.as_os_str().to_string_lossy().into_owned()).collect();
            let rel = rel.join("/");
            if rel != files::MANIFEST {
                out.insert(rel, hex(&Sha256::digest(fs::read(&path)?)));
            }
        }
    }
    Ok(())
}

pub fn write_manifest(dir: &Path, exp: &Experiment, seed: u64) -> Result<Manifest> {
    let mut hashes = BTreeMap::new();
    collect_files(dir, dir, &mut hashes)?;
    let manifest = Manifest {
        seed,
        crate_version: env!("CARGO_PKG_VERSION").into(),
        config: ExperimentConfig { seed, ..exp.config.clone() },
        files: hashes,
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(dir.join(files::MANIFEST), text)?;
    Ok(manifest)
}

pub fn simulate_stage(exp: &Experiment, dir: &Path, seed: u64) -> Result<Simulation> {
    let sim = simulate(exp, seed)?;
    write_simulation(dir, &sim)?;
    Ok(sim)
}

/// Simulation, panel and fits into `dir`, followed by the manifest.
pub fn run_experiment(exp: &Experiment, dir: &Path, seed: u64) -> Result<Manifest> {
    simulate_stage(exp, dir, seed)?;
    panel_stage(exp, dir)?;
    fit_stage(exp, dir)?;
    write_manifest(dir, exp, seed)
}
