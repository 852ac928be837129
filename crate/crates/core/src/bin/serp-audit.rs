use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use serp_audit::experiment::lexicon_run::{build_lexicon, write_lexicon, LexiconConfig};
use serp_audit::experiment::{self, report::report, Experiment};
use serp_audit::population::{generate_population, PopulationConfig};
use serp_audit::{Error, Result};

/// Search-personalization audit pipeline.
#[derive(Parser)]
#[command(name = "serp-audit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Master seed; defaults to the config's `seed` where it has one, else 0.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic user population from a population config.
    Genpop(Common),
    /// Build the partisan search-term lexicon.
    Lexicon(Common),
    /// Run the day-by-day simulation and write its artifacts.
    Simulate(Common),
    /// Build the regression panel and pairwise similarity table.
    Panel(Common),
    /// Run all regressions on the panel.
    Fit(Common),
    /// Write report tables and figures.
    Report(Common),
}

fn experiment(c: &Common) -> Result<(Experiment, PathBuf, u64)> {
    let exp = Experiment::load(&c.config)?;
    let dir = c.out.clone().unwrap_or_else(|| exp.config.output_dir.clone());
    let seed = c.seed.unwrap_or(exp.config.seed);
    Ok((exp, dir, seed))
}

fn run(command: Command) -> Result<serde_json::Value> {
    match command {
        Command::Genpop(c) => {
            let text = fs::read_to_string(&c.config).map_err(|_| Error::MissingFixture(c.config.clone()))?;
            let cfg = PopulationConfig::from_json(&text)?;
            let population = generate_population(&cfg, c.seed.unwrap_or(0))?;
            let dir = c.out.unwrap_or_else(|| PathBuf::from("out/population"));
            experiment::write_population(&dir, &population)?;
            Ok(json!({"users": population.users.len(), "cities": population.cities.len(), "dir": dir}))
        }
        Command::Lexicon(c) => {
            let (cfg, base) = LexiconConfig::load(&c.config)?;
            let inputs = cfg.inputs(&base, c.seed.unwrap_or(0))?;
            let out = build_lexicon(&cfg, &inputs)?;
            let dir = c.out.unwrap_or_else(|| cfg.output_dir.clone());
            write_lexicon(&dir, &out)?;
            Ok(json!({"terms": out.terms.len(), "correlation": out.summary.correlation, "dir": dir}))
        }
        Command::Simulate(c) => {
            let (exp, dir, seed) = experiment(&c)?;
            let sim = experiment::simulate_stage(&exp, &dir, seed)?;
            experiment::write_manifest(&dir, &exp, seed)?;
            Ok(json!({"serp_records": sim.records.len(), "activity": sim.activity.len(), "dir": dir}))
        }
        Command::Panel(c) => {
            let (exp, dir, seed) = experiment(&c)?;
            let (panel, similarity) = experiment::panel_stage(&exp, &dir)?;
            experiment::write_manifest(&dir, &exp, seed)?;
            Ok(json!({"panel_rows": panel.len(), "similarity_rows": similarity.len(), "dir": dir}))
        }
        Command::Fit(c) => {
            let (exp, dir, seed) = experiment(&c)?;
            let analysis = experiment::fit_stage(&exp, &dir)?;
            experiment::write_manifest(&dir, &exp, seed)?;
            let failed: Vec<&str> =
                analysis.entries.iter().filter(|e| e.result.is_err()).map(|e| e.name.as_str()).collect();
            Ok(json!({"fits": analysis.entries.len(), "failed": failed, "dir": dir}))
        }
        Command::Report(c) => {
            let (exp, dir, seed) = experiment(&c)?;
            let r = report(&dir, &exp.config.analysis)?;
            let manifest = experiment::write_manifest(&dir, &exp, seed)?;
            Ok(json!({"files": manifest.files.len(), "skipped_fits": r.skipped_fits, "dir": dir}))
        }
    }
}

fn fail(kind: &str, message: impl std::fmt::Display) -> ExitCode {
    let line = json!({"error": kind, "message": message.to_string().replace('\n', " ")});
    eprintln!("{line}");
    ExitCode::FAILURE
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => return fail("usage", e.render().to_string().trim()),
    };
    match run(cli.command) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => fail(e.kind(), &e),
    }
}
