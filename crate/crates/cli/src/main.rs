use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use spinfluid_cli::config::parse_config;
use spinfluid_cli::presets::{list_presets, preset};
use spinfluid_cli::{run, ConfigError, RawConfig, RunOptions};

/// Spin-orbit quantum hydrodynamics: bohmion particles, the spectral Pauli
/// solver and the identity suite.
#[derive(Parser, Debug)]
#[command(name = "spinfluid", version)]
struct Args {
    /// Scenario file (TOML).
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in scenario name.
    #[arg(long)]
    preset: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    steps: Option<i64>,
    #[arg(long, allow_negative_numbers = true)]
    dt: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 picks the number of cores.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Run the identity suite and exit with status 3 if any check fails.
    #[arg(long)]
    check: bool,
    /// Print the built-in scenarios and exit.
    #[arg(long)]
    list_presets: bool,
}

const EXIT_RUNTIME: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_CHECK: u8 = 3;

fn load(args: &Args) -> Result<RawConfig, ConfigError> {
    let mut raw = match (&args.config, &args.preset) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
                path: path.clone(),
                source,
            })?;
            parse_config(&text)?
        }
        (None, Some(name)) => preset(name)
            .ok_or_else(|| ConfigError::Validation(vec![format!("preset: unknown name `{name}`")]))?,
        (None, None) => {
            return Err(ConfigError::Validation(vec![
                "one of --config or --preset is required".into(),
            ]))
        }
    };
    if let Some(out) = &args.out {
        raw.out_dir = Some(out.clone());
    }
    if args.steps.is_some() {
        raw.steps = args.steps;
    }
    if args.dt.is_some() {
        raw.dt = args.dt;
    }
    if args.seed.is_some() {
        raw.seed = args.seed;
    }
    Ok(raw)
}

fn main() -> ExitCode {
    let args = Args::parse();
    if args.list_presets {
        for (name, desc) in list_presets() {
            println!("{name:<22} {desc}");
        }
        return ExitCode::SUCCESS;
    }
    let cfg = match load(&args).and_then(|raw| raw.validate()) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(match e {
                ConfigError::Io { .. } => EXIT_RUNTIME,
                _ => EXIT_VALIDATION,
            });
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(args.threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(EXIT_RUNTIME);
        }
    };
    let opts = RunOptions { check: args.check };
    match pool.install(|| run(&cfg, &opts)) {
        Ok(outcome) => {
            for c in &outcome.summary.checks {
                let tag = if c.pass { "PASS" } else { "FAIL" };
                println!("{tag} {} = {:e} (threshold {:e})", c.name, c.value, c.threshold);
            }
            println!("wrote {}", outcome.out_dir.display());
            if args.check && !outcome.passed() {
                ExitCode::from(EXIT_CHECK)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
