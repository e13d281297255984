use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hpdpg::driver::{emit_reports, read_records_json, run_adaptation, run_checks, AdaptConfig, Manifest};
use hpdpg::Error;

#[derive(Parser)]
#[command(name = "hpdpg", version, about = "hp-adaptive DPG runs on triangular meshes")]
struct Cli {
    /// Worker threads (0 = one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an adaptation from a `key = value` config file.
    Run {
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Re-emit convergence.csv and manifest.json from a run directory's records.json.
    Report {
        #[arg(long)]
        dir: PathBuf,
    },
    /// Run the built-in invariant checks.
    Verify,
}

/// One flag per config key; values use the config-file syntax.
#[derive(Args, Default)]
struct Overrides {
    #[arg(long)]
    case: Option<String>,
    #[arg(long)]
    epsilon: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    growth: Option<String>,
    #[arg(long = "fixed_complexity", alias = "fixed-complexity")]
    fixed_complexity: Option<String>,
    #[arg(long = "max_adapt", alias = "max-adapt")]
    max_adapt: Option<String>,
    #[arg(long = "p_init", alias = "p-init")]
    p_init: Option<String>,
    #[arg(long = "p_min", alias = "p-min")]
    p_min: Option<String>,
    #[arg(long = "p_max", alias = "p-max")]
    p_max: Option<String>,
    #[arg(long = "delta_p", alias = "delta-p")]
    delta_p: Option<String>,
    #[arg(long = "adapt_p", alias = "adapt-p")]
    adapt_p: Option<String>,
    #[arg(long)]
    anisotropy: Option<String>,
    #[arg(long)]
    remesher: Option<String>,
    #[arg(long = "mesher_cmd", alias = "mesher-cmd")]
    mesher_cmd: Option<String>,
    #[arg(long = "mesh_in", alias = "mesh-in")]
    mesh_in: Option<String>,
    #[arg(long = "initial_n", alias = "initial-n")]
    initial_n: Option<String>,
    #[arg(long = "out_dir", alias = "out-dir")]
    out_dir: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    condense: Option<String>,
    #[arg(long)]
    patch: Option<String>,
    #[arg(long = "error_floor", alias = "error-floor")]
    error_floor: Option<String>,
}

impl Overrides {
    fn pairs(&self) -> Vec<(&'static str, &Option<String>)> {
        vec![
            ("case", &self.case),
            ("epsilon", &self.epsilon),
            ("alpha", &self.alpha),
            ("mode", &self.mode),
            ("growth", &self.growth),
            ("fixed_complexity", &self.fixed_complexity),
            ("max_adapt", &self.max_adapt),
            ("p_init", &self.p_init),
            ("p_min", &self.p_min),
            ("p_max", &self.p_max),
            ("delta_p", &self.delta_p),
            ("adapt_p", &self.adapt_p),
            ("anisotropy", &self.anisotropy),
            ("remesher", &self.remesher),
            ("mesher_cmd", &self.mesher_cmd),
            ("mesh_in", &self.mesh_in),
            ("initial_n", &self.initial_n),
            ("out_dir", &self.out_dir),
            ("seed", &self.seed),
            ("condense", &self.condense),
            ("patch", &self.patch),
            ("error_floor", &self.error_floor),
        ]
    }
}

fn run(config: Option<PathBuf>, overrides: &Overrides, threads: Option<usize>) -> Result<(), Error> {
    let mut cfg = match config {
        Some(p) => AdaptConfig::from_file(p)?,
        None => AdaptConfig::default(),
    };
    for (key, value) in overrides.pairs() {
        if let Some(v) = value {
            cfg.set(key, v)?;
        }
    }
    if let Some(t) = threads {
        cfg.threads = t;
    }
    cfg.validate()?;
    let records = run_adaptation(&cfg)?;
    let manifest = emit_reports(&records, &cfg, &cfg.out_dir)?;
    let last = records.last().expect("at least one record");
    println!(
        "{} adaptations, final ne {} ndof {} energy error {:.3e}",
        last.adapt, last.ne, last.ndof, last.energy_error
    );
    if let Some(fit) = manifest.exp_fit {
        println!("exponential fit: b = {:.4}, R^2 = {:.4}", fit.b, fit.r_squared);
    }
    Ok(())
}

fn report(dir: PathBuf) -> Result<(), Error> {
    let records = read_records_json(dir.join("records.json"))?;
    let cfg = match std::fs::read_to_string(dir.join("manifest.json")) {
        Ok(text) => serde_json::from_str::<Manifest>(&text)?.config,
        Err(_) => AdaptConfig::default(),
    };
    emit_reports(&records, &cfg, &dir)?;
    println!("{} records written to {}", records.len(), dir.join("convergence.csv").display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, overrides } => run(config, &overrides, cli.threads),
        Command::Report { dir } => report(dir),
        Command::Verify => {
            let checks = run_checks();
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            if checks.iter().all(|c| c.passed) {
                Ok(())
            } else {
                Err(Error::Solver("invariant checks failed".into()))
            }
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
