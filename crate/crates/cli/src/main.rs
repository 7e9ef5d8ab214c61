use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gridseg::heuristics::{HeuristicSpec, Scheme};
use gridseg_cli::commands::{cmd_defend, cmd_dispatch, cmd_evaluate, cmd_threat, CommonOptions, Method};
use gridseg_cli::report::Report;

#[derive(Parser)]
#[command(
    name = "gridseg",
    version,
    about = "Worst-case EV charging attacks and operator segmentation on DC grids"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Grid case (JSON).
    #[arg(long)]
    case: PathBuf,
    /// Charging fleet: CSV (aggregated or raw station records) or JSON.
    #[arg(long)]
    fleet: PathBuf,
    /// Scenario configuration (TOML or JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Scenarios evaluated in parallel.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Relative MIP gap.
    #[arg(long, default_value_t = 1e-6)]
    gap: f64,
    /// Per-solve time limit in seconds.
    #[arg(long)]
    time_limit: Option<f64>,
    /// Write every model in LP format into this directory.
    #[arg(long)]
    dump_lp: Option<PathBuf>,
    /// Override the assignment grid denominator D.
    #[arg(long)]
    discretization: Option<u32>,
    /// Keep only the N largest operators hackable.
    #[arg(long)]
    top_n: Option<usize>,
}

impl From<Common> for CommonOptions {
    fn from(c: Common) -> Self {
        CommonOptions {
            case: c.case,
            fleet: c.fleet,
            config: c.config,
            out_dir: c.out_dir,
            jobs: c.jobs,
            gap: c.gap,
            time_limit: c.time_limit,
            dump_lp: c.dump_lp,
            discretization: c.discretization,
            top_n: c.top_n,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Ccg,
    UniThres,
    ClusSeg,
    ItinThres,
    ItinClus,
}

#[derive(Subcommand)]
enum Command {
    /// Worst-case attack without segmentation.
    Threat(Common),
    /// Design a segmentation.
    Defend {
        #[arg(value_enum)]
        method: MethodArg,
        #[command(flatten)]
        common: Common,
        /// Capacity per segment in MW (uni_thres).
        #[arg(long)]
        cs: Option<f64>,
        /// Segments per operator (clus_seg) or parts per split (itin_*).
        #[arg(long, default_value_t = 2)]
        ks: usize,
        /// Capacity balance penalty for clustering.
        #[arg(long, default_value_t = 1e5)]
        lambda: f64,
        /// Iteration limit for the itin_* schemes.
        #[arg(long, default_value_t = 10)]
        max_iterations: usize,
    },
    /// Worst-case attack under a given segmentation.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Segmentation file as written by `defend`.
        #[arg(long)]
        segmentation: PathBuf,
    },
    /// Economic dispatch and pre-attack branch loading.
    Dispatch(Common),
}

fn summarize(report: &Report) {
    for s in &report.scenarios {
        let mut line = format!("{}: dispatch {:.1} MW", s.name, s.dispatch.total_generation_mw);
        if let Some(d) = &s.defense {
            line += &format!(", {} segments ({}, {})", d.segments_used, d.method, d.status);
        }
        if let Some(a) = &s.attack {
            line += &format!(", {} worst-case overloads", a.overload_count);
        }
        println!("{line}");
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Threat(c) => cmd_threat(&c.into()),
        Command::Dispatch(c) => cmd_dispatch(&c.into()),
        Command::Evaluate { common, segmentation } => cmd_evaluate(&common.into(), &segmentation),
        Command::Defend {
            method,
            common,
            cs,
            ks,
            lambda,
            max_iterations,
        } => {
            let heuristic = |scheme| {
                Method::Heuristic(HeuristicSpec {
                    scheme,
                    cs,
                    ks,
                    lambda,
                    max_iterations,
                })
            };
            let method = match method {
                MethodArg::Ccg => Method::Ccg,
                MethodArg::UniThres => heuristic(Scheme::UniThres),
                MethodArg::ClusSeg => heuristic(Scheme::ClusSeg),
                MethodArg::ItinThres => heuristic(Scheme::ItinThres),
                MethodArg::ItinClus => heuristic(Scheme::ItinClus),
            };
            cmd_defend(&common.into(), &method)
        }
    };
    match result {
        Ok(report) => {
            summarize(&report);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
