//! The `mbt` command line.
//!
//! Exit codes: 0 pass, 1 test failures, 2 configuration, model, adapter or
//! artifact errors.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::coverage::{
    emit_series, events_to_ndjson, export_run_log, fold_run_log, format_stats, parse_run_log,
    series_from_events, series_from_snapshots,
};
use crate::engine::{run_online_with_clock, FailurePolicy, RunConfig, SystemClock, Verdict};
use crate::generators::GeneratorKind;
use crate::model::{parse_suite, validate_suite, Diagnostic, Severity, Suite};
use crate::sim::{load_sut_spec, Simulator};
use crate::stop::{parse_stop_spec, StopCondition};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

pub const RUN_CSV: &str = "run.csv";
pub const COVERAGE_NDJSON: &str = "coverage.ndjson";
pub const SUMMARY_TXT: &str = "summary.txt";
pub const SUITE_JSON: &str = "suite.json";
pub const EVENTS_NDJSON: &str = "events.ndjson";

#[derive(Debug, Parser)]
#[command(
    name = "mbt",
    version,
    about = "Model-based testing: validate, generate, run and report"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a suite and print diagnostics
    Validate {
        #[arg(long)]
        suite: PathBuf,
    },
    /// Print a generated path, one step per line
    Generate(GenerateArgs),
    /// Run the suite against a simulated SUT and write artifacts
    Run(RunArgs),
    /// Rebuild the summary from a run directory
    Report {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub suite: PathBuf,
    /// random, weighted, quickrandom or astar:<model>/<element>
    #[arg(long, default_value = "random")]
    pub generator: String,
    #[arg(long, default_value = "edge_coverage(100)")]
    pub stop: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub suite: PathBuf,
    #[arg(long)]
    pub sut: PathBuf,
    #[arg(long, default_value = "random")]
    pub generator: String,
    #[arg(long, default_value = "edge_coverage(100)")]
    pub stop: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Seconds between coverage snapshots
    #[arg(long, default_value_t = 5.0)]
    pub interval: f64,
    /// abort or continue
    #[arg(long = "on-failure", default_value = "abort")]
    pub on_failure: String,
    #[arg(long)]
    pub out: PathBuf,
}

/// Message for stderr plus exit code 2.
struct Fatal(String);

impl<E: std::fmt::Display> From<E> for Fatal {
    fn from(e: E) -> Self {
        Fatal(e.to_string())
    }
}

fn read(path: &Path) -> Result<String, Fatal> {
    fs::read_to_string(path).map_err(|e| Fatal(format!("cannot read {}: {e}", path.display())))
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), Fatal> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Fatal(format!("cannot write {}: {e}", path.display())))
}

fn finish(result: Result<i32, Fatal>, err: &mut dyn Write) -> i32 {
    match result {
        Ok(code) => code,
        Err(Fatal(message)) => {
            let _ = writeln!(err, "error: {message}");
            EXIT_ERROR
        }
    }
}

/// Parses and validates, printing every diagnostic. Fails on any error.
fn load_suite(path: &Path, err: &mut dyn Write) -> Result<Suite, Fatal> {
    let suite =
        parse_suite(&read(path)?).map_err(|e| Fatal(Diagnostic::from_error(&e).to_string()))?;
    let diags = validate_suite(&suite);
    for d in &diags {
        let _ = writeln!(err, "{d}");
    }
    if diags.iter().any(|d| d.severity == Severity::Error) {
        return Err(Fatal(format!("{} is not a valid suite", path.display())));
    }
    Ok(suite)
}

fn parse_plan(generator: &str, stop: &str) -> Result<(GeneratorKind, StopCondition), Fatal> {
    Ok((generator.parse()?, parse_stop_spec(stop)?))
}

pub fn cmd_validate(suite: &Path, err: &mut dyn Write) -> i32 {
    finish(load_suite(suite, err).map(|_| EXIT_PASS), err)
}

pub fn cmd_generate(args: &GenerateArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = (|| {
        let suite = load_suite(&args.suite, err)?;
        let (generator, stop) = parse_plan(&args.generator, &args.stop)?;
        let steps = crate::engine::generate_offline(&suite, &generator, &stop, args.seed)?;
        for s in steps {
            writeln!(out, "{s}")?;
        }
        Ok(EXIT_PASS)
    })();
    finish(result, err)
}

pub fn cmd_run(args: &RunArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = (|| {
        let suite = load_suite(&args.suite, err)?;
        let spec = load_sut_spec(&read(&args.sut)?)?;
        let (generator, stop) = parse_plan(&args.generator, &args.stop)?;
        let failure_policy: FailurePolicy = args.on_failure.parse().map_err(Fatal)?;
        if !(args.interval.is_finite() && args.interval > 0.0) {
            return Err(Fatal(format!(
                "--interval must be a positive number of seconds, got {}",
                args.interval
            )));
        }
        let cfg = RunConfig {
            seed: args.seed,
            failure_policy,
            snapshot_interval_s: args.interval,
            ..RunConfig::default()
        };

        let clock = SystemClock::new();
        let mut sim = Simulator::new(spec, Box::new(clock));
        let report = run_online_with_clock(&suite, &generator, &stop, &mut sim, &cfg, &clock)?;

        let mut points = series_from_events(sim.events())?;
        points.extend(series_from_snapshots(&report.snapshots));
        points.sort_by(|a, b| a.t.total_cmp(&b.t));
        let summary = format_stats(&report.final_coverage);

        fs::create_dir_all(&args.out)
            .map_err(|e| Fatal(format!("cannot create {}: {e}", args.out.display())))?;
        write_file(&args.out, RUN_CSV, &export_run_log(&report))?;
        write_file(&args.out, COVERAGE_NDJSON, &emit_series(&points)?)?;
        write_file(&args.out, SUMMARY_TXT, &summary)?;
        write_file(&args.out, SUITE_JSON, &suite.to_json())?;
        write_file(&args.out, EVENTS_NDJSON, &events_to_ndjson(sim.events()))?;

        write!(out, "{summary}")?;
        for f in &report.failures {
            let fault = f
                .fault_id
                .as_deref()
                .map(|id| format!(" [{id}]"))
                .unwrap_or_default();
            writeln!(err, "step {}: {}{fault}", f.seq, f.message)?;
        }
        Ok(match report.verdict {
            Verdict::Pass => EXIT_PASS,
            Verdict::Fail => EXIT_FAIL,
        })
    })();
    finish(result, err)
}

/// Folds `run.csv` against `suite.json` and checks the result against
/// `summary.txt`.
pub fn cmd_report(dir: &Path, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = (|| {
        let suite = parse_suite(&read(&dir.join(SUITE_JSON))?)?;
        let rows = parse_run_log(&read(&dir.join(RUN_CSV))?)?;
        let summary = read(&dir.join(SUMMARY_TXT))?;
        let folded = format_stats(&fold_run_log(&rows, &suite)?);
        if folded != summary {
            let mut message = format!(
                "internal consistency error: {} disagrees with {}",
                RUN_CSV, SUMMARY_TXT
            );
            for (a, b) in folded.lines().zip(summary.lines()).filter(|(a, b)| a != b) {
                message.push_str(&format!("\n  run log: {a}\n  summary: {b}"));
            }
            return Err(Fatal(message));
        }
        write!(out, "{folded}")?;
        Ok(EXIT_PASS)
    })();
    finish(result, err)
}

pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match cli.command {
        Command::Validate { suite } => cmd_validate(&suite, err),
        Command::Generate(args) => cmd_generate(&args, out, err),
        Command::Run(args) => cmd_run(&args, out, err),
        Command::Report { out: dir } => cmd_report(&dir, out, err),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::LINE;

    fn args(argv: &[&str]) -> Cli {
        Cli::try_parse_from(argv).unwrap()
    }

    #[test]
    fn flags_and_defaults() {
        let Command::Run(run) = args(&[
            "mbt", "run", "--suite", "s.json", "--sut", "u.json", "--out", "o",
        ])
        .command
        else {
            panic!("expected run");
        };
        assert_eq!(run.generator, "random");
        assert_eq!(run.stop, "edge_coverage(100)");
        assert_eq!(
            (run.seed, run.interval, run.on_failure.as_str()),
            (0, 5.0, "abort")
        );
        assert!(Cli::try_parse_from(["mbt", "run", "--suite", "s.json"]).is_err());
    }

    #[test]
    fn generate_line_model() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("line.json");
        fs::write(&path, LINE).unwrap();
        let gen = GenerateArgs {
            suite: path,
            generator: "quickrandom".into(),
            stop: "edge_coverage(100)".into(),
            seed: 3,
        };
        let (mut out, mut err) = (Vec::new(), Vec::new());
        assert_eq!(cmd_generate(&gen, &mut out, &mut err), EXIT_PASS);
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text, "vertex n_a (m/a)\nedge e_ab (m/ab)\nvertex n_b (m/b)\nedge e_bc (m/bc)\nvertex n_c (m/c)\n");
        // line model ends in a dead end, so the warning goes to stderr
        assert!(String::from_utf8(err).unwrap().contains("dead-end-vertex"));
    }

    #[test]
    fn bad_specs_exit_two() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("line.json");
        fs::write(&path, LINE).unwrap();
        for (generator, stop) in [
            ("zigzag", "never"),
            ("random", "edge_coverage(150)"),
            ("astar:m/zz", "never"),
        ] {
            let gen = GenerateArgs {
                suite: path.clone(),
                generator: generator.into(),
                stop: stop.into(),
                seed: 0,
            };
            let (mut out, mut err) = (Vec::new(), Vec::new());
            assert_eq!(
                cmd_generate(&gen, &mut out, &mut err),
                EXIT_ERROR,
                "{generator} {stop}"
            );
            assert!(String::from_utf8(err).unwrap().contains("error:"));
        }
        let mut err = Vec::new();
        assert_eq!(
            cmd_validate(&dir.path().join("missing.json"), &mut err),
            EXIT_ERROR
        );
    }
}
