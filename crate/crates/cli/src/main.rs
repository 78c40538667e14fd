//! `h22lab` command line: experiments, oracle runs and verification suites.

mod config;
mod experiment;
mod report;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use experiment::{theorem_bound, Row, Status};
use h22lab::oracle::quadrature_expectations;
use h22lab::regime::constants;
use h22lab::sampler::{estimate, make_observable, ChainSet, Observable};
use h22lab::verify::{run_suite, Suite};
use report::{sibling, write_chain_rows, write_file, write_rows, ChainRow, Provenance};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "h22lab", version, about = "Moment bounds of the H^{2|2} model: sampling, quadrature and verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the MCMC sampler on a config and write the bound report.
    Sample {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config output path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a verification suite and print one JSON report per lemma.
    Verify {
        #[arg(long)]
        suite: Suite,
        #[arg(long, default_value_t = 500)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write `<suite>_<lemma>.json` files here.
        #[arg(long)]
        report_dir: Option<PathBuf>,
    },
    /// Print the regime constants as JSON.
    Constants {
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 0.0)]
        gamma: f64,
        #[arg(long)]
        kappa: f64,
    },
    /// Evaluate the config's observables by quadrature (at most two sites).
    Oracle {
        #[arg(long)]
        config: PathBuf,
        /// CSV destination; stdout when absent and the config names none.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// 0 when every row passes or is vacuous, 1 otherwise.
fn verdict(rows: &[Row]) -> u8 {
    let vacuous = rows.iter().filter(|r| r.status == Status::Vacuous).count();
    if vacuous > 0 {
        eprintln!("warning: {vacuous} row(s) vacuous, the hypotheses of the bound do not hold");
    }
    u8::from(rows.iter().any(|r| r.status == Status::Fail))
}

fn compile(cfg: &config::ExperimentConfig) -> Result<(h22lab::PinnedGraph, Vec<Observable>)> {
    let graph = cfg.graph.build().context("building graph")?;
    let obs = cfg
        .observables
        .iter()
        .map(|s| make_observable(&graph, s))
        .collect::<h22lab::Result<Vec<_>>>()
        .context("compiling observables")?;
    Ok((graph, obs))
}

fn sample(config: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Result<u8> {
    let loaded = config::load(config)?;
    let cfg = &loaded.config;
    let seed = seed.unwrap_or(cfg.seed);
    let Some(out) = out.or_else(|| cfg.output.clone()) else {
        bail!("no output path: pass --out or set \"output\" in the config");
    };
    let (graph, obs) = compile(cfg)?;
    let chains = ChainSet::run_for(&graph, &cfg.sampler, seed, &obs)?;
    let mut rows = Vec::with_capacity(obs.len());
    let mut chain_rows = Vec::new();
    for (spec, o) in cfg.observables.iter().zip(&obs) {
        let p = chains.pooled(o)?;
        rows.push(Row::new(spec, p.mean, p.stderr, Some(p.ess), &theorem_bound(cfg, spec)));
        for c in &chains.chains {
            let e = estimate(c, o, chains.params.batches)?;
            chain_rows.push(ChainRow {
                chain_id: c.chain_id,
                observable: o.name(),
                mean: e.mean,
                stderr: e.stderr,
                ess: e.ess,
                acceptance_rate: c.acceptance_rate,
            });
        }
    }
    let mut prov = Provenance::new("sample", config, &loaded.raw, seed, chains.chains.len());
    prov.warnings.extend(chains.warnings().map(str::to_owned));
    for (spec, o) in cfg.observables.iter().zip(&obs) {
        let rhat = chains.pooled(o)?.rhat;
        if rhat > h22lab::sampler::RHAT_THRESHOLD {
            prov.warnings.push(format!("{spec}: split R-hat {rhat:.4}"));
        }
    }
    for w in &prov.warnings {
        eprintln!("warning: {w}");
    }
    write_file(&out, |b| write_rows(b, &rows))?;
    write_file(&sibling(&out, ".chains.csv"), |b| write_chain_rows(b, &chain_rows))?;
    write_file(&sibling(&out, ".provenance.json"), |b| Ok(serde_json::to_writer_pretty(b, &prov)?))?;
    Ok(verdict(&rows))
}

fn oracle(config: &Path, out: Option<PathBuf>) -> Result<u8> {
    let loaded = config::load(config)?;
    let cfg = &loaded.config;
    let (graph, obs) = compile(cfg)?;
    let results = quadrature_expectations(&graph, &obs, &cfg.quadrature)?;
    let mut prov = Provenance::new("oracle", config, &loaded.raw, cfg.seed, 0);
    let rows: Vec<Row> = cfg
        .observables
        .iter()
        .zip(&results)
        .map(|(spec, r)| {
            if r.flagged {
                prov.warnings.push(format!("{spec}: quadrature error indicator {:.3e}", r.error_indicator));
            }
            Row::new(spec, r.value, r.error_indicator, None, &theorem_bound(cfg, spec))
        })
        .collect();
    for w in &prov.warnings {
        eprintln!("warning: {w}");
    }
    match out.or_else(|| cfg.output.clone()) {
        Some(out) => {
            write_file(&out, |b| write_rows(b, &rows))?;
            write_file(&sibling(&out, ".provenance.json"), |b| Ok(serde_json::to_writer_pretty(b, &prov)?))?;
        }
        None => write_rows(std::io::stdout().lock(), &rows)?,
    }
    Ok(verdict(&rows))
}

fn verify(suite: Suite, trials: usize, seed: u64, report_dir: Option<PathBuf>) -> Result<u8> {
    let report = run_suite(suite, trials, seed)?;
    let mut stdout = std::io::stdout().lock();
    write!(stdout, "{}", report.summary())?;
    for l in &report.lemmas {
        writeln!(stdout, "{}", l.to_json())?;
    }
    if let Some(dir) = report_dir {
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        for l in &report.lemmas {
            let path = dir.join(format!("{suite}_{}.json", l.lemma));
            std::fs::write(&path, l.to_json() + "\n").with_context(|| format!("writing {}", path.display()))?;
        }
    }
    Ok(u8::from(!report.passed()))
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Sample { config, seed, out } => sample(&config, seed, out),
        Command::Oracle { config, out } => oracle(&config, out),
        Command::Verify { suite, trials, seed, report_dir } => verify(suite, trials, seed, report_dir),
        Command::Constants { alpha, gamma, kappa } => {
            println!("{}", constants(alpha, gamma, kappa)?.to_json());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
