use clap::{Args, Parser, Subcommand};
use multilift::harness::{export_results, run_monte_carlo, ConfigError, McOutcome, Scenario, SimConfig};
use multilift::validation::run_validation;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_DIVERGED: u8 = 3;

#[derive(Parser)]
#[command(name = "multilift", version, about = "Cooperative slung-payload pose estimation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single episode.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run a Monte Carlo campaign.
    Mc {
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        campaign: Campaign,
    },
    /// Run a built-in scenario.
    Scenario {
        /// pirouette, pirouette-commloss, lissajous or lissajous-commloss
        name: String,
        /// Print the scenario config as TOML and exit.
        #[arg(long)]
        print_config: bool,
        #[command(flatten)]
        campaign: Campaign,
    },
    /// Run the built-in self-checks.
    Validate,
}

#[derive(Args)]
struct Campaign {
    /// Number of runs; falls back to the config value (50 by default).
    #[arg(long)]
    runs: Option<u32>,
    #[arg(long, default_value_t = 1)]
    parallel: usize,
    /// Master seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn load_config(path: Option<&Path>) -> Result<SimConfig, ConfigError> {
    match path {
        Some(p) => SimConfig::load(p),
        None => Ok(SimConfig::default()),
    }
}

fn config_error(e: impl std::fmt::Display) -> ExitCode {
    eprintln!("config error: {e}");
    ExitCode::from(EXIT_CONFIG)
}

fn execute(cfg: &SimConfig, parallel: usize, out: &Path) -> ExitCode {
    if let Err(e) = cfg.validate() {
        return config_error(e);
    }
    let McOutcome { summary, logs } = run_monte_carlo(cfg, parallel.max(1));
    let files = match export_results(cfg, &summary, &logs, out) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("export failed: {e}");
            return ExitCode::from(EXIT_FAILURE);
        }
    };
    println!(
        "{} run(s), {} included, summary at {}",
        logs.len(),
        summary.runs_included,
        files.summary.display()
    );
    if let Some(last) = summary.rows.last() {
        println!(
            "final mean position error {:.4} m, orientation error {:.4} rad",
            last.groups[0].mean, last.groups[1].mean
        );
    }
    let diverged: Vec<_> = logs.iter().filter_map(|l| l.divergence.as_ref().map(|d| (l.seed, d))).collect();
    for (seed, d) in &diverged {
        eprintln!(
            "seed {seed} diverged at t={:.2} (agent {}): {}",
            d.time, d.agent, d.reason
        );
    }
    if diverged.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_DIVERGED)
    }
}

fn campaign(mut cfg: SimConfig, c: &Campaign) -> ExitCode {
    if let Some(runs) = c.runs {
        cfg.runs = runs;
    }
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    execute(&cfg, c.parallel, &c.out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, seed, out } => match load_config(config.as_deref()) {
            Ok(mut cfg) => {
                cfg.seed = seed;
                cfg.runs = 1;
                execute(&cfg, 1, &out)
            }
            Err(e) => config_error(e),
        },
        Command::Mc { config, campaign: c } => match load_config(config.as_deref()) {
            Ok(cfg) => campaign(cfg, &c),
            Err(e) => config_error(e),
        },
        Command::Scenario {
            name,
            print_config,
            campaign: c,
        } => {
            let scenario: Scenario = match name.parse() {
                Ok(s) => s,
                Err(e) => return config_error(e),
            };
            if print_config {
                print!("{}", scenario.config().to_toml_string());
                return ExitCode::SUCCESS;
            }
            campaign(scenario.config(), &c)
        }
        Command::Validate => {
            let checks = run_validation();
            for c in &checks {
                let tag = if c.passed { "PASS" } else { "FAIL" };
                println!("{tag} {}: {}", c.name, c.detail);
            }
            if checks.iter().all(|c| c.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_FAILURE)
            }
        }
    }
}
