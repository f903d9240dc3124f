use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use bohmlab::io::OutputDir;
use bohmlab::scenario::{built_in, run_scenario, ScenarioConfig, BUILT_IN};
use bohmlab::verify::{verify_all, VerifyOptions};
use bohmlab::Error;

const EXIT_RUNTIME: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_CRITERION: u8 = 3;

#[derive(Parser)]
#[command(name = "bohmlab", version, about = "Beam-splitter relaxation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file, or a built-in scenario by name.
    Run { scenario: String },
    /// Run the acceptance suite and print the criterion table.
    Verify {
        /// Propagator time step relative to its accuracy bound; above 1 the
        /// solver refuses to run (negative control).
        #[arg(long, default_value_t = 1.0)]
        dt_factor: f64,
    },
    /// List the built-in scenarios.
    ListScenarios,
}

fn load(scenario: &str) -> Result<ScenarioConfig, Error> {
    let path = Path::new(scenario);
    if path.exists() {
        return ScenarioConfig::load(path);
    }
    match built_in(scenario) {
        Some(b) => ScenarioConfig::from_toml(b.toml),
        None => Err(Error::Config {
            path: "scenario".into(),
            message: format!("`{scenario}` is neither a file nor a built-in scenario"),
        }),
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config { .. } | Error::InvalidParameter { .. } => EXIT_CONFIG,
        Error::Scenario { source, .. } => exit_code(source),
        _ => EXIT_RUNTIME,
    }
}

fn run(cli: &Cli, scenario: &str) -> Result<u8, Error> {
    let mut config = load(scenario)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let out = cli
        .out
        .clone()
        .or_else(|| config.out.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(config.name()));
    let outcome = run_scenario(&config, &out)?;
    for c in &outcome.checks {
        println!(
            "{:<32} {:>12.4e}  {:<24} {}",
            c.name,
            c.value,
            c.target,
            if c.passed { "PASS" } else { "FAIL" }
        );
    }
    println!(
        "{} files in {} ({:.1} s)",
        outcome.manifest.outputs.len() + 1,
        out.display(),
        outcome.manifest.wall_time_s
    );
    Ok(if outcome.passed() { 0 } else { EXIT_CRITERION })
}

fn verify(cli: &Cli, dt_factor: f64) -> Result<u8, Error> {
    if !(dt_factor > 0.0) {
        return Err(Error::Config {
            path: "dt_factor".into(),
            message: "must be positive".into(),
        });
    }
    let opts = VerifyOptions {
        dt_factor,
        ..VerifyOptions::default()
    }
    .with_seed(cli.seed.unwrap_or(0));
    let report = verify_all(&opts);
    print!("{}", report.table());
    if let Some(out) = &cli.out {
        let mut dir = OutputDir::create(out)?;
        dir.write_json("verify.json", &report)?;
    }
    let failed = report.criteria.iter().filter(|c| !c.passed).count();
    println!("{} of {} criteria passed", report.criteria.len() - failed, report.criteria.len());
    Ok(if failed == 0 { 0 } else { EXIT_CRITERION })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: --threads: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    let result = match &cli.command {
        Command::Run { scenario } => run(&cli, scenario),
        Command::Verify { dt_factor } => verify(&cli, *dt_factor),
        Command::ListScenarios => {
            for b in &BUILT_IN {
                let description = ScenarioConfig::from_toml(b.toml)
                    .ok()
                    .and_then(|c| c.description)
                    .unwrap_or_default();
                println!("{:<20} {description}", b.name);
            }
            Ok(0)
        }
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
