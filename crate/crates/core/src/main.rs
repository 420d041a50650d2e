use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};

use activepos::cli::{
    parse_config, sha256_hex, summarize_file, verify_manifest, write_atomic, write_results, ConfigError, FileDigest,
    RunManifest, MANIFEST_FILE, RESULTS_FILE, SUMMARY_TEXT_FILE,
};
use activepos::protocol::{run_experiment, ExperimentConfig, Strategy};
use activepos::scene::{build_scene, generate_pool, write_dataset};
use activepos::seed;

const POOL_FILE: &str = "pool.csv";

#[derive(Parser)]
#[command(name = "activepos", version, about = "Active-learning data selection for fingerprint positioning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the pool of realization 0 (all BS) as CSV.
    GenPool(Common),
    /// Run the selection experiment and write results, summaries and a plot.
    Run(Common),
    /// Recompute summaries and the plot from an existing results.csv.
    Report(Common),
    /// Check the files of an output directory against its manifest.
    Verify(Common),
}

#[derive(Args)]
struct Common {
    /// Config file with [scene], [train] and [experiment] sections.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides experiment.base_seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides experiment.n_realizations.
    #[arg(long)]
    realizations: Option<usize>,
    /// Overrides experiment.workers.
    #[arg(long)]
    workers: Option<usize>,
    /// Comma-separated strategies, e.g. random,genie,practical.
    #[arg(long, value_delimiter = ',')]
    strategies: Option<Vec<Strategy>>,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

fn now_s() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn load_config(args: &Common) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &args.config {
        Some(path) => parse_config(path)?,
        None => ExperimentConfig::default(),
    };
    let e = &mut cfg.experiment;
    if let Some(s) = args.seed {
        e.base_seed = s;
    }
    if let Some(r) = args.realizations {
        e.n_realizations = r;
    }
    if let Some(w) = args.workers {
        e.workers = w;
    }
    if let Some(s) = &args.strategies {
        e.strategies = s.clone();
    }
    cfg.validate().map_err(|e| Failure::Config(e.to_string()))?;
    Ok(cfg)
}

fn manifest(command: &str, started: u64, cfg: ExperimentConfig, files: Vec<FileDigest>) -> RunManifest {
    let e = &cfg.experiment;
    RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        command: command.to_string(),
        started_unix_s: started,
        finished_unix_s: now_s(),
        realization_seeds: (0..e.n_realizations).map(|r| seed::derive(e.base_seed, "realization", &[r as u64])).collect(),
        files,
        config: cfg,
    }
}

fn gen_pool(args: &Common) -> Result<(), Failure> {
    let started = now_s();
    let cfg = load_config(args)?;
    let scene = build_scene(cfg.scene.clone()).map_err(|e| Failure::Config(e.to_string()))?;
    let realization_seed = seed::derive(cfg.experiment.base_seed, "realization", &[0]);
    let pool_seed = seed::derive(realization_seed, "pool", &[]);
    let pool = generate_pool(&scene, cfg.experiment.pool_size, pool_seed);
    let mut bytes = Vec::new();
    write_dataset(&mut bytes, &pool, &cfg.scene, pool_seed).map_err(runtime)?;
    std::fs::create_dir_all(&args.out).map_err(runtime)?;
    write_atomic(&args.out.join(POOL_FILE), &bytes).map_err(runtime)?;
    let digest = FileDigest { path: POOL_FILE.into(), sha256: sha256_hex(&bytes) };
    manifest("gen-pool", started, cfg, vec![digest]).write(&args.out).map_err(runtime)?;
    eprintln!("wrote {} samples to {}", pool.len(), args.out.join(POOL_FILE).display());
    Ok(())
}

fn run(args: &Common) -> Result<(), Failure> {
    let started = now_s();
    let cfg = load_config(args)?;
    let outcome = run_experiment(&cfg).map_err(runtime)?;
    let files = write_results(Some(&outcome.results), &outcome.summary, &args.out).map_err(runtime)?;
    manifest("run", started, cfg, files).write(&args.out).map_err(runtime)?;
    print_summary(&args.out)
}

fn report(args: &Common) -> Result<(), Failure> {
    let started = now_s();
    let summary = summarize_file(&args.out.join(RESULTS_FILE)).map_err(runtime)?;
    let written = write_results(None, &summary, &args.out).map_err(runtime)?;
    let manifest_path = args.out.join(MANIFEST_FILE);
    let updated = if manifest_path.exists() {
        let mut m = RunManifest::read(&manifest_path).map_err(runtime)?;
        for d in written {
            match m.files.iter_mut().find(|f| f.path == d.path) {
                Some(f) => *f = d,
                None => m.files.push(d),
            }
        }
        m.finished_unix_s = now_s();
        m
    } else {
        let bytes = std::fs::read(args.out.join(RESULTS_FILE)).map_err(runtime)?;
        let mut files = vec![FileDigest { path: RESULTS_FILE.into(), sha256: sha256_hex(&bytes) }];
        files.extend(written);
        manifest("report", started, load_config(args)?, files)
    };
    updated.write(&args.out).map_err(runtime)?;
    print_summary(&args.out)
}

fn verify(args: &Common) -> Result<(), Failure> {
    let m = verify_manifest(&args.out.join(MANIFEST_FILE)).map_err(runtime)?;
    for f in &m.files {
        println!("ok {}", f.path);
    }
    Ok(())
}

fn print_summary(dir: &Path) -> Result<(), Failure> {
    let text = std::fs::read_to_string(dir.join(SUMMARY_TEXT_FILE)).map_err(runtime)?;
    print!("{text}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match &cli.command {
        Command::GenPool(a) => gen_pool(a),
        Command::Run(a) => run(a),
        Command::Report(a) => report(a),
        Command::Verify(a) => verify(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
