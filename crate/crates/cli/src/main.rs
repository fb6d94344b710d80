use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dnop_cli::commands::{cmd_boundary, cmd_bs_price, cmd_crr_price, cmd_eval, cmd_gen_data, cmd_train};
use dnop_cli::verify::{cmd_verify, Suite, SUITES};
use dnop_cli::{exit_code, RunConfig};
use serde::Serialize;

/// Learn the American put pricing operator from finite-difference surfaces.
#[derive(Parser, Debug)]
#[command(name = "dnop", version)]
struct Args {
    /// TOML run configuration; defaults apply to anything omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Root seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Price the strike family and write the dataset.
    GenData,
    /// Train the operator on the dataset.
    Train,
    /// Score the checkpoint on every dataset strike.
    Eval,
    /// Export FD and learned exercise boundaries for one strike.
    Boundary {
        #[arg(long)]
        strike: f64,
    },
    /// Run a verification suite.
    Verify {
        #[arg(help = format!("one of: {SUITES}"))]
        suite: String,
    },
    /// Black-Scholes European put and call.
    BsPrice {
        #[arg(long)]
        strike: f64,
        #[arg(long, default_value_t = 100.0)]
        spot: f64,
        /// Time to maturity; the grid maturity when omitted.
        #[arg(long)]
        tau: Option<f64>,
    },
    /// Cox-Ross-Rubinstein American put.
    CrrPrice {
        #[arg(long)]
        strike: f64,
        #[arg(long, default_value_t = 100.0)]
        spot: f64,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long, default_value_t = 5000)]
        steps: usize,
    },
}

fn print_json<T: Serialize>(value: &T) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run(args: Args) -> anyhow::Result<()> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = args.out {
        cfg.out_dir = out;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let tau = |t: Option<f64>| t.unwrap_or(cfg.grid.maturity);
    match args.command {
        Command::GenData => print_json(&cmd_gen_data(&cfg)?),
        Command::Train => {
            let r = cmd_train(&cfg)?;
            print_json(&serde_json::json!({
                "final_train_loss": r.final_train_loss,
                "final_test_loss": r.final_test_loss,
                "test_metrics": r.test_metrics,
            }))
        }
        Command::Eval => print_json(&cmd_eval(&cfg)?),
        Command::Boundary { strike } => {
            let r = cmd_boundary(&cfg, strike)?;
            print_json(&serde_json::json!({ "strike": r.strike, "max_node_distance": r.max_node_distance }))
        }
        Command::Verify { suite } => {
            let suite: Suite = suite.parse::<Suite>().map_err(anyhow::Error::from)?;
            let r = cmd_verify(&cfg, suite)?;
            print_json(&r)
        }
        Command::BsPrice { strike, spot, tau: t } => print_json(&cmd_bs_price(&cfg, spot, strike, tau(t))?),
        Command::CrrPrice { strike, spot, tau: t, steps } => {
            print_json(&cmd_crr_price(&cfg, spot, strike, tau(t), steps)?)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
