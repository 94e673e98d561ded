use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cohort_trends::pipeline::{run_stages, Overrides, Run, Stage};
use cohort_trends::synth::{cohort_series, emit_truth, generate_cohort, SynthSpec};
use cohort_trends::{Error, Result};

#[derive(Parser)]
#[command(name = "cohort-trends", version, about = "Longitudinal achievement trend analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic cohorts with known ground truth.
    Simulate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// One cohort per seed; overrides the spec's seed.
        #[arg(long)]
        seed: Vec<u64>,
    },
    /// Correlation screening and common-test intersection.
    Screen(StageArgs),
    /// Trend-vector clustering and cross-cohort matching.
    Cluster(StageArgs),
    /// Logistic regressions and common factors.
    Infer(StageArgs),
    /// All stages in order.
    RunAll(StageArgs),
}

#[derive(Args)]
struct StageArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the clustering seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    skip_screening: bool,
    /// Exit with status 3 when cohort clusterings disagree.
    #[arg(long)]
    require_consistency: bool,
}

fn simulate(spec_path: &Path, out: &Path, seeds: &[u64]) -> Result<()> {
    let bytes = std::fs::read(spec_path).map_err(|e| Error::Io { path: spec_path.into(), source: e })?;
    let spec: SynthSpec = serde_json::from_slice(&bytes)?;
    let seeds = if seeds.is_empty() { vec![spec.seed] } else { seeds.to_vec() };
    let specs = cohort_series(&spec, &seeds);
    for s in &specs {
        let cohort = generate_cohort(s)?;
        let dir = if specs.len() == 1 { out.to_path_buf() } else { out.join(&s.cohort_id) };
        emit_truth(&cohort, &dir)?;
        println!("wrote cohort {} ({} students) to {}", s.cohort_id, s.n_students, dir.display());
    }
    Ok(())
}

fn stages(args: &StageArgs, stages: &[Stage]) -> Result<()> {
    let overrides = Overrides {
        seed: args.seed,
        skip_screening: args.skip_screening,
        require_consistency: args.require_consistency,
        out: args.out.clone(),
    };
    let run = Run::load(&args.config, overrides)?;
    let manifest = run_stages(&run, stages)?;
    println!(
        "{} report file(s) in {}; content hash {}",
        manifest.outputs.len(),
        run.out_dir().display(),
        manifest.content_hash
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Simulate { spec, out, seed } => simulate(spec, out, seed),
        Command::Screen(a) => stages(a, &[Stage::Screen]),
        Command::Cluster(a) => stages(a, &[Stage::Cluster]),
        Command::Infer(a) => stages(a, &[Stage::Infer]),
        Command::RunAll(a) => stages(a, &[Stage::Screen, Stage::Cluster, Stage::Infer]),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::ScreeningFailed { removals, .. } = &e {
                for r in removals {
                    eprintln!("  removed {}: {}", r.test.test_id, r.reason);
                }
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
