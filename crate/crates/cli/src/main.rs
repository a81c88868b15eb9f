//! `ap3`: command-line front end for the ap3-core experiments.
//!
//! Every run writes its primary output and a `manifest.json` into one
//! directory (`--out`, or `runs/<timestamp>-seed<seed>`), and prints the
//! primary output. Exit codes: 0 success, 1 validation error, 2 budget error.

mod commands;
mod manifest;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use manifest::{
    default_run_dir, digest_file, now_ms, sha256_hex, FileDigest, RunManifest, MANIFEST_FILE,
};

#[derive(Parser, Serialize, Debug, Clone)]
#[command(
    name = "ap3",
    version,
    about = "Three-term progressions in Z/qZ",
    arg_required_else_help = true
)]
pub struct Cli {
    /// Worker threads, 0 = one per core.
    #[arg(long, global = true, env = "AP3_THREADS", default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Serialize, Debug, Clone)]
pub enum Command {
    /// Ordered 3-AP counts of a set file.
    Count(commands::CountArgs),
    /// Exponential sums of a set file.
    Spectrum(commands::SpectrumArgs),
    /// Dilation search and the W(k, v) spectral certificate.
    Rectify(commands::RectifyArgs),
    /// Progression-free sets in {1..x}, their embedding mod q, exact nu(n).
    Behrend(commands::BehrendArgs),
    /// Minimum nontrivial count over m-subsets.
    Search(commands::SearchArgs),
    /// Progression double-counting audit.
    Audit(commands::AuditArgs),
    /// mu_q against mu_p for a companion prime.
    Transfer(commands::TransferArgs),
    /// The full search, rectify, transfer and profile pipeline.
    Experiment(commands::ExperimentArgs),
    /// Exact r_q over a window of primes.
    Ratio(commands::RatioArgs),
    /// Re-run a manifest and compare output digests.
    Replay(ReplayArgs),
}

#[derive(Args, Serialize, Debug, Clone)]
pub struct Output {
    /// Run directory; defaults to runs/<timestamp>-seed<seed>.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(ValueEnum, Serialize, Debug, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Args, Serialize, Debug, Clone)]
pub struct ReplayArgs {
    /// Manifest written by an earlier run.
    pub manifest: PathBuf,
    /// Directory for the replayed run.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// What a command produced, before it is written to the run directory.
pub struct Produced {
    pub primary: String,
    pub ext: &'static str,
    /// Additional files, by name.
    pub extra: Vec<(String, String)>,
    pub inputs: Vec<PathBuf>,
    pub seed: Option<u64>,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Count(_) => "count",
            Command::Spectrum(_) => "spectrum",
            Command::Rectify(_) => "rectify",
            Command::Behrend(_) => "behrend",
            Command::Search(_) => "search",
            Command::Audit(_) => "audit",
            Command::Transfer(_) => "transfer",
            Command::Experiment(_) => "experiment",
            Command::Ratio(_) => "ratio",
            Command::Replay(_) => "replay",
        }
    }

    fn output_mut(&mut self) -> Option<&mut Output> {
        Some(match self {
            Command::Count(a) => &mut a.output,
            Command::Spectrum(a) => &mut a.output,
            Command::Rectify(a) => &mut a.output,
            Command::Behrend(a) => &mut a.output,
            Command::Search(a) => &mut a.output,
            Command::Audit(a) => &mut a.output,
            Command::Transfer(a) => &mut a.output,
            Command::Experiment(a) => &mut a.output,
            Command::Ratio(a) => &mut a.output,
            Command::Replay(_) => return None,
        })
    }

    fn produce(&self) -> Result<Produced> {
        match self {
            Command::Count(a) => commands::count(a),
            Command::Spectrum(a) => commands::spectrum(a),
            Command::Rectify(a) => commands::rectify(a),
            Command::Behrend(a) => commands::behrend(a),
            Command::Search(a) => commands::search(a),
            Command::Audit(a) => commands::audit(a),
            Command::Transfer(a) => commands::transfer(a),
            Command::Experiment(a) => commands::experiment(a),
            Command::Ratio(a) => commands::ratio(a),
            Command::Replay(_) => unreachable!("replay is dispatched separately"),
        }
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    ExitCode::from(run(&argv))
}

fn run(argv: &[String]) -> u8 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let ok = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let _ = e.print();
            return if ok { 0 } else { 1 };
        }
    };
    if cli.threads > 0 {
        // a second initialization only happens in tests; the first pool stands
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global();
    }
    let result = match &cli.command {
        Command::Replay(r) => replay(r),
        _ => execute(cli, argv).map(|(_, code)| code),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ap3_core::Error>()
                .is_some_and(|e| e.is_budget())
            {
                2
            } else {
                1
            }
        }
    }
}

/// Runs a non-replay command and writes its run directory.
fn execute(cli: Cli, argv: &[String]) -> Result<(PathBuf, u8)> {
    let started = now_ms();
    let produced = cli.command.produce()?;
    let output = cli
        .command
        .clone()
        .output_mut()
        .cloned()
        .expect("not replay");
    let dir = output
        .out
        .clone()
        .unwrap_or_else(|| default_run_dir(produced.seed));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;

    let primary_name = format!("output.{}", produced.ext);
    let mut outputs = Vec::new();
    for (name, text) in std::iter::once((&primary_name, &produced.primary))
        .chain(produced.extra.iter().map(|(n, t)| (n, t)))
    {
        fs::write(dir.join(name), text).with_context(|| format!("writing {name}"))?;
        outputs.push(FileDigest {
            path: name.clone(),
            sha256: sha256_hex(text.as_bytes()),
        });
    }
    let inputs = produced
        .inputs
        .iter()
        .map(|p| digest_file(p))
        .collect::<Result<Vec<_>>>()?;
    let manifest = RunManifest {
        tool: "ap3".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        argv: argv.to_vec(),
        command: cli.command.name().into(),
        config: serde_json::to_value(&cli)?,
        seed: produced.seed,
        threads: cli.threads,
        started_unix_ms: started,
        finished_unix_ms: now_ms(),
        inputs,
        outputs,
        primary_output: primary_name,
    };
    fs::write(
        dir.join(MANIFEST_FILE),
        serde_json::to_string_pretty(&manifest)? + "\n",
    )?;
    print!("{}", produced.primary);
    Ok((dir, 0))
}

#[derive(Serialize)]
struct ReplayReport {
    manifest: String,
    replay_dir: String,
    identical: bool,
    inputs_unchanged: bool,
    files: Vec<ReplayFile>,
}

#[derive(Serialize)]
struct ReplayFile {
    path: String,
    recorded: String,
    replayed: Option<String>,
    identical: bool,
}

fn replay(args: &ReplayArgs) -> Result<u8> {
    let recorded = manifest::RunManifest::load(&args.manifest)?;
    if recorded.command == "replay" {
        bail!("a replay manifest cannot be replayed");
    }
    let mut cli = Cli::try_parse_from(&recorded.argv).context("manifest argv no longer parses")?;
    let dir = args.out.clone().unwrap_or_else(|| {
        let parent = args.manifest.parent().unwrap_or(Path::new("."));
        parent.join(format!("replay-{}", now_ms()))
    });
    cli.command.output_mut().expect("not replay").out = Some(dir.clone());
    let inputs_unchanged = recorded
        .inputs
        .iter()
        .all(|f| digest_file(Path::new(&f.path)).is_ok_and(|d| d.sha256 == f.sha256));

    // the replayed primary output goes to the run directory, not stdout
    let produced = cli.command.produce()?;
    fs::create_dir_all(&dir)?;
    let mut written = vec![(format!("output.{}", produced.ext), produced.primary)];
    written.extend(produced.extra);
    let mut files = Vec::new();
    for f in &recorded.outputs {
        let replayed = written
            .iter()
            .find(|(n, _)| *n == f.path)
            .map(|(_, t)| sha256_hex(t.as_bytes()));
        files.push(ReplayFile {
            identical: replayed.as_deref() == Some(f.sha256.as_str()),
            path: f.path.clone(),
            recorded: f.sha256.clone(),
            replayed,
        });
    }
    for (name, text) in &written {
        fs::write(dir.join(name), text)?;
    }
    let report = ReplayReport {
        manifest: args.manifest.display().to_string(),
        replay_dir: dir.display().to_string(),
        identical: files.iter().all(|f| f.identical) && files.len() == written.len(),
        inputs_unchanged,
        files,
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(if report.identical { 0 } else { 1 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(xs: &[&str]) -> Vec<String> {
        std::iter::once("ap3")
            .chain(xs.iter().copied())
            .map(String::from)
            .collect()
    }

    #[test]
    fn parse_errors_exit_one() {
        assert_eq!(run(&args(&[])), 1);
        assert_eq!(run(&args(&["frobnicate"])), 1);
        assert_eq!(run(&args(&["search", "--q", "7", "--bogus"])), 1);
        assert_eq!(run(&args(&["--help"])), 0);
    }

    #[test]
    fn budget_parser() {
        assert_eq!(commands::parse_budget("100").unwrap(), 100);
        assert_eq!(commands::parse_budget("1e8").unwrap(), 100_000_000);
        assert!(commands::parse_budget("-3").is_err());
        assert!(commands::parse_budget("x").is_err());
    }
}
