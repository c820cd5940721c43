use std::ops::RangeInclusive;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use aninorm::bench::{self, BenchConfig, RunStatus, DEFAULT_A_LIST};
use aninorm::{anisotropy, norms, verify, AnisoQuery, ShapingFilter, StateSpaceModel};

#[derive(Parser)]
#[command(
    name = "aninorm",
    version,
    about = "Anisotropic norm of discrete-time LTI systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ModelArg {
    /// Model JSON file with keys "A", "B", "C", "D".
    #[arg(long)]
    model: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// a-anisotropic norm.
    Norm {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        a: f64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// H2 norm.
    H2 {
        #[command(flatten)]
        model: ModelArg,
    },
    /// H-infinity norm.
    Hinf {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Mean anisotropy of a square model used as a shaping filter.
    Anisotropy {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long, default_value_t = anisotropy::DEFAULT_GRID)]
        grid: usize,
    },
    /// Whether the a-anisotropic norm is below gamma, with a witness.
    Feasible {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        a: f64,
        #[arg(long)]
        gamma: f64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Cross-check the norm against the grid and Monte Carlo oracles.
    Verify {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        a: f64,
        #[arg(long, default_value_t = 2000)]
        grid: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        samples: usize,
    },
    /// Randomized MAIN vs GRID sweep, written as CSV.
    Bench {
        /// Inclusive state-dimension range, e.g. 1..8.
        #[arg(long, value_parser = parse_range, default_value = "1..8")]
        n: RangeInclusive<usize>,
        /// Comma-separated input dimensions.
        #[arg(long, value_delimiter = ',', default_value = "3,5")]
        m: Vec<usize>,
        #[arg(long, default_value_t = 2)]
        p: usize,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        /// Comma-separated anisotropy levels.
        #[arg(long = "a-list", value_delimiter = ',')]
        a_list: Option<Vec<f64>>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long = "rho-cap", default_value_t = 0.999_999)]
        rho_cap: f64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        /// q-grid size of the GRID runs.
        #[arg(long, default_value_t = 500)]
        grid: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-size and per-level summary of a benchmark CSV.
    Summarize { csv: PathBuf },
}

fn parse_range(s: &str) -> Result<RangeInclusive<usize>, String> {
    let (lo, hi) = s
        .split_once("..")
        .ok_or_else(|| format!("expected A..B, got {s:?}"))?;
    let lo: usize = lo.trim().parse().map_err(|e| format!("{e}"))?;
    let hi: usize = hi.trim().parse().map_err(|e| format!("{e}"))?;
    if lo == 0 || lo > hi {
        return Err(format!("need 1 <= A <= B, got {s:?}"));
    }
    Ok(lo..=hi)
}

enum Output {
    Json(Value),
    Text(String),
}

fn run(command: Command) -> aninorm::Result<Output> {
    let load = |m: &ModelArg| StateSpaceModel::load(&m.model);
    let out = match command {
        Command::Norm { model, a, tol } => {
            let res = aninorm::anisotropic_norm(&AnisoQuery::new(load(&model)?, a).with_tol(tol))?;
            Output::Json(serde_json::to_value(res).expect("serializable"))
        }
        Command::H2 { model } => Output::Json(json!({ "gamma": norms::h2_norm(&load(&model)?)? })),
        Command::Hinf { model, tol } => {
            Output::Json(json!({ "gamma": norms::hinf_norm(&load(&model)?, tol)? }))
        }
        Command::Anisotropy { model, grid } => {
            let value = anisotropy::mean_anisotropy(&ShapingFilter::new(load(&model)?)?, grid)?;
            Output::Json(json!({
                "mean_anisotropy": value.is_finite().then_some(value),
                "rank_deficient": value.is_infinite(),
            }))
        }
        Command::Feasible { model, a, gamma, tol } => {
            let res = aninorm::aninorm_feasible(&load(&model)?, a, gamma, tol)?;
            Output::Json(serde_json::to_value(res).expect("serializable"))
        }
        Command::Verify {
            model,
            a,
            grid,
            seed,
            samples,
        } => {
            let f = load(&model)?;
            let main = aninorm::anisotropic_norm(&AnisoQuery::new(f.clone(), a))?;
            let oracle = verify::grid_oracle_norm(&f, a, grid)?;
            let mc = verify::monte_carlo_lower_bound(&f, a, samples, seed)?;
            let limits = verify::limits_check(&f, &[0.0, a])?;
            let convexity = verify::convexity_probe(&f, a, 50, seed)?;
            Output::Json(json!({
                "gamma": main.gamma,
                "grid_oracle": oracle,
                "monte_carlo_lower_bound": mc,
                "limits": limits,
                "convexity": convexity,
                "consistent": oracle.gamma >= main.gamma - 1e-9
                    && mc <= main.gamma + 1e-6
                    && limits.pass,
            }))
        }
        Command::Bench {
            n,
            m,
            p,
            trials,
            a_list,
            seed,
            rho_cap,
            tol,
            grid,
            out,
        } => {
            let config = BenchConfig {
                n_range: n,
                m_list: m,
                p,
                trials,
                a_list: a_list.unwrap_or_else(|| DEFAULT_A_LIST.to_vec()),
                master_seed: seed,
                rho_cap,
                tolerance: tol,
                grid_size: grid,
                out_path: Some(out.clone()),
                threads: None,
            };
            let records = bench::run_bench(&config)?;
            let mut counts = serde_json::Map::new();
            for status in RunStatus::ALL {
                let c = records.iter().filter(|r| r.status == status).count();
                counts.insert(status.as_str().to_string(), json!(c));
            }
            Output::Json(json!({ "records": records.len(), "out": out, "status_counts": counts }))
        }
        Command::Summarize { csv } => Output::Text(bench::summarize(csv)?),
    };
    Ok(out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(Output::Json(v)) => {
            println!("{v}");
            ExitCode::SUCCESS
        }
        Ok(Output::Text(t)) => {
            print!("{t}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
