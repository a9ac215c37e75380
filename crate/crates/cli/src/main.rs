use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mmv_cli::config::SEED_ENV;
use mmv_cli::{
    cmd_capm, cmd_list_scenarios, cmd_montecarlo, cmd_simulate, cmd_solve, resolve_seed, OutputFormat, RunOptions,
    ScenarioConfig,
};

#[derive(Parser)]
#[command(
    name = "mmv",
    version,
    about = "MV and MMV portfolio experiments in jump-diffusion markets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the preference constants of a scenario.
    Solve(Common),
    /// Simulate one shared path and write every strategy along it.
    Simulate(Common),
    /// Run a Monte Carlo experiment over terminal wealth.
    Montecarlo(Common),
    /// Estimate CAPM betas in a multi-asset scenario.
    Capm(Common),
    /// List the built-in scenarios.
    ListScenarios,
}

#[derive(Args)]
struct Common {
    /// Built-in scenario name or path to a TOML scenario file.
    #[arg(long, default_value = "constant-0.2")]
    scenario: String,
    /// Root seed; overrides MMV_SEED and the scenario file.
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo path count.
    #[arg(long)]
    paths: Option<usize>,
    /// Time steps on [t0, T].
    #[arg(long)]
    steps: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
}

impl Common {
    fn load(&self) -> anyhow::Result<(ScenarioConfig, RunOptions)> {
        let mut cfg = ScenarioConfig::resolve(&self.scenario)?;
        if let Some(p) = self.paths {
            cfg.mc.paths = p;
        }
        if let Some(s) = self.steps {
            cfg.mc.steps = s;
        }
        cfg.validate()?;
        let env = std::env::var(SEED_ENV).ok();
        let seed = resolve_seed(self.seed, env.as_deref(), cfg.mc.seed)?;
        let opts = RunOptions {
            seed,
            out_dir: self.out.clone().unwrap_or_else(|| cfg.output.dir.clone()),
            format: self.format.unwrap_or(cfg.output.format),
        };
        Ok((cfg, opts))
    }
}

type Handler = fn(&ScenarioConfig, &RunOptions) -> anyhow::Result<String>;

fn run(cli: Cli) -> anyhow::Result<String> {
    let (common, f): (&Common, Handler) = match &cli.command {
        Command::ListScenarios => return Ok(cmd_list_scenarios()),
        Command::Solve(c) => (c, cmd_solve),
        Command::Simulate(c) => (c, cmd_simulate),
        Command::Montecarlo(c) => (c, cmd_montecarlo),
        Command::Capm(c) => (c, cmd_capm),
    };
    let (cfg, opts) = common.load()?;
    f(&cfg, &opts)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
