use std::path::PathBuf;
use std::process::ExitCode;

use bregman_dre_cli::config::{AlphaChoice, Overrides, RunConfig};
use bregman_dre_cli::{run, Command};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bregman-dre", version, about = "Density-ratio estimation with Bregman-divergence losses")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Tabulate a constructed loss on a score grid
    LossShow(Common),
    /// Fit a ratio model and write model.json + metrics.json
    Fit(Common),
    /// Score a saved model
    Eval(Common),
    /// Population fits of the quadratic ratio family on a piecewise pair
    Fig1(Common),
    /// Kernel fits over the α grid and two sample sizes
    Fig2(Common),
    /// Importance-weighted regression under four weightings
    Fig3(Common),
    /// Run the identity suite; exit 3 on failure
    Check(Common),
}

#[derive(Args)]
struct Common {
    /// Flat JSON config; flags below override it
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: out)
    #[arg(long)]
    out: Option<PathBuf>,
    /// kulsif, lr, klest, boost, poly or ew
    #[arg(long)]
    family: Option<String>,
    /// Exponent for poly
    #[arg(long, allow_negative_numbers = true)]
    k: Option<f64>,
    /// Tikhonov weight, or `cv`
    #[arg(long)]
    alpha: Option<AlphaChoice>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (cmd, common) = match cli.command {
        Cmd::LossShow(c) => (Command::LossShow, c),
        Cmd::Fit(c) => (Command::Fit, c),
        Cmd::Eval(c) => (Command::Eval, c),
        Cmd::Fig1(c) => (Command::Fig1, c),
        Cmd::Fig2(c) => (Command::Fig2, c),
        Cmd::Fig3(c) => (Command::Fig3, c),
        Cmd::Check(c) => (Command::Check, c),
    };
    let overrides = Overrides {
        seed: common.seed,
        out: common.out,
        family: common.family,
        k: common.k,
        alpha: common.alpha,
    };
    let result = RunConfig::load(common.config.as_deref(), &overrides).and_then(|cfg| run(cmd, &cfg));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
