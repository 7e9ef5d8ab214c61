//! The four subcommands. Each loads the inputs, runs every configured
//! scenario (in parallel up to `jobs`), writes its files into `out_dir` and
//! returns the report.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use gridseg::adversary::solve_worst_case_attack;
use gridseg::ccg::{run_ccg, DefenseStatus};
use gridseg::fleet::{minimal_segmentation, SegmentationFile};
use gridseg::grid::Dispatch;
use gridseg::heuristics::{run_heuristic, HeuristicSpec};
use gridseg::ingest::fleet_from_csv;
use gridseg::milp::BackendKind;
use gridseg::{FleetModel, GridCase, Instance, Segmentation, SolverOptions};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::config::{RunConfig, ScenarioConfig};
use crate::geojson::overlay;
use crate::report::{
    branch_table, AttackReport, BoundsRecord, DefenseReport, DispatchSummary, FleetSummary, InputDigest, Report,
    RunInfo, ScenarioReport,
};
use crate::{CliError, EXIT_DEFENSE_INFEASIBLE, EXIT_PARSE};

/// Options shared by all subcommands.
#[derive(Debug, Clone)]
pub struct CommonOptions {
    pub case: PathBuf,
    pub fleet: PathBuf,
    pub config: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub jobs: usize,
    pub gap: f64,
    pub time_limit: Option<f64>,
    pub dump_lp: Option<PathBuf>,
    pub discretization: Option<u32>,
    pub top_n: Option<usize>,
}

#[derive(Debug, Clone)]
pub enum Method {
    Ccg,
    Heuristic(HeuristicSpec),
}

impl Method {
    fn name(&self) -> String {
        match self {
            Method::Ccg => "ccg".into(),
            Method::Heuristic(spec) => spec.scheme.to_string(),
        }
    }
}

pub struct Inputs {
    pub grid: GridCase,
    pub fleet: FleetModel,
    pub config: RunConfig,
    pub digest: InputDigest,
    pub solver: SolverOptions,
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::parse(format!("{}: {e}", path.display())))
}

fn sha256(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn utf8(bytes: &[u8], path: &Path) -> Result<String, CliError> {
    String::from_utf8(bytes.to_vec()).map_err(|_| CliError::parse(format!("{}: not valid UTF-8", path.display())))
}

pub fn load_inputs(opts: &CommonOptions) -> Result<Inputs, CliError> {
    let case_bytes = read_bytes(&opts.case)?;
    let grid = GridCase::from_json_str(&utf8(&case_bytes, &opts.case)?)
        .map_err(|e| CliError::parse(format!("{}: {e}", opts.case.display())))?;
    let (mut config, config_sha256) = match &opts.config {
        Some(path) => {
            let bytes = read_bytes(path)?;
            (RunConfig::parse(&utf8(&bytes, path)?)?, Some(sha256(&bytes)))
        }
        None => (RunConfig::default(), None),
    };
    if let Some(d) = opts.discretization {
        config.discretization = d;
    }
    if opts.top_n.is_some() {
        config.top_n = opts.top_n;
    }
    config.validate()?;

    let fleet_bytes = read_bytes(&opts.fleet)?;
    let fleet_text = utf8(&fleet_bytes, &opts.fleet)?;
    let is_json = opts.fleet.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let fleet = if is_json {
        let fleet: FleetModel =
            serde_json::from_str(&fleet_text).map_err(|e| CliError::parse(format!("{}: {e}", opts.fleet.display())))?;
        let fleet = fleet.with_discretization(config.discretization)?;
        fleet.check_against(&grid)?;
        fleet
    } else {
        fleet_from_csv(&fleet_text, &grid, config.discretization, config.top_n)
            .map_err(|e| CliError::parse(format!("{}: {e}", opts.fleet.display())))?
    };

    let solver = SolverOptions {
        backend: BackendKind::from_env()?,
        mip_gap: opts.gap,
        time_limit: opts.time_limit,
        dump_dir: opts.dump_lp.clone(),
        ..SolverOptions::default()
    };
    Ok(Inputs {
        grid,
        fleet,
        config,
        digest: InputDigest {
            case_sha256: sha256(&case_bytes),
            fleet_sha256: sha256(&fleet_bytes),
            config_sha256,
            segmentation_sha256: None,
        },
        solver,
    })
}

/// Grid and dispatch for one scenario.
pub fn scenario_instance(inputs: &Inputs, scenario: &ScenarioConfig) -> Result<(Instance, Dispatch), CliError> {
    let grid = scenario.apply(&inputs.grid)?;
    Ok(Instance::with_economic_dispatch(
        grid,
        inputs.fleet.clone(),
        scenario.adversary.coincidence,
        &inputs.solver,
    )?)
}

/// Files produced by one scenario besides its report section.
struct ScenarioOutput {
    report: ScenarioReport,
    files: Vec<(String, String)>,
    runtime: f64,
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

fn run_scenarios(
    inputs: &Inputs,
    jobs: usize,
    run: impl Fn(&ScenarioConfig) -> Result<ScenarioOutput, CliError> + Sync,
) -> Result<Vec<ScenarioOutput>, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError {
            code: crate::EXIT_OTHER,
            message: e.to_string(),
        })?;
    pool.install(|| inputs.config.scenarios.par_iter().map(&run).collect())
}

fn finish(
    command: &str,
    inputs: &Inputs,
    opts: &CommonOptions,
    outputs: Vec<ScenarioOutput>,
    started: (u64, Instant),
) -> Result<Report, CliError> {
    std::fs::create_dir_all(&opts.out_dir)?;
    let mut scenarios = Vec::new();
    let mut runtimes = BTreeMap::new();
    for out in outputs {
        for (name, body) in &out.files {
            std::fs::write(opts.out_dir.join(name), body)?;
        }
        runtimes.insert(out.report.name.clone(), out.runtime);
        scenarios.push(out.report);
    }
    let fleet = &inputs.fleet;
    let report = Report {
        tool: "gridseg".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        inputs: inputs.digest.clone(),
        fleet: FleetSummary {
            operators: fleet.operators().len(),
            hackable_operators: fleet.operators().iter().filter(|o| o.hackable).count(),
            total_capacity_mw: fleet.total_capacity(),
            discretization: fleet.discretization(),
        },
        scenarios,
        run_info: RunInfo {
            started_unix_s: started.0,
            elapsed_s: started.1.elapsed().as_secs_f64(),
            scenario_runtime_s: runtimes,
            solver: inputs.solver.backend.to_string(),
        },
    };
    std::fs::write(opts.out_dir.join(format!("{command}_report.json")), to_json(&report))?;
    Ok(report)
}

fn start_clock() -> (u64, Instant) {
    let unix = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    (unix, Instant::now())
}

/// Attack section, branch table and overlay for a segmentation.
fn evaluate_segmentation(
    instance: &Instance,
    scenario: &ScenarioConfig,
    seg: &Segmentation,
    solver: &SolverOptions,
) -> Result<(AttackReport, Vec<crate::report::BranchLoading>, String), CliError> {
    let params = &scenario.adversary;
    let outcome = solve_worst_case_attack(instance, seg, params, solver)?;
    let attack = AttackReport::verified(instance, seg, &outcome, params)?;
    let base = instance.base_flows(params.coincidence)?;
    let branches = branch_table(instance, &base, Some(&outcome));
    let geo = to_json(&overlay(instance, &branches, Some(&outcome)));
    Ok((attack, branches, geo))
}

pub fn cmd_dispatch(opts: &CommonOptions) -> Result<Report, CliError> {
    let started = start_clock();
    let inputs = load_inputs(opts)?;
    let outputs = run_scenarios(&inputs, opts.jobs, |scenario| {
        let t = Instant::now();
        let (instance, dispatch) = scenario_instance(&inputs, scenario)?;
        let base = instance.base_flows(scenario.adversary.coincidence)?;
        let branches = branch_table(&instance, &base, None);
        let geo = to_json(&overlay(&instance, &branches, None));
        Ok(ScenarioOutput {
            report: ScenarioReport {
                name: scenario.name.clone(),
                k: scenario.k,
                dispatch: DispatchSummary::new(&instance, &dispatch),
                attack: None,
                defense: None,
                branches,
            },
            files: vec![(format!("overlay_{}.geojson", scenario.name), geo)],
            runtime: t.elapsed().as_secs_f64(),
        })
    })?;
    finish("dispatch", &inputs, opts, outputs, started)
}

pub fn cmd_threat(opts: &CommonOptions) -> Result<Report, CliError> {
    let started = start_clock();
    let inputs = load_inputs(opts)?;
    let outputs = run_scenarios(&inputs, opts.jobs, |scenario| {
        let t = Instant::now();
        let (instance, dispatch) = scenario_instance(&inputs, scenario)?;
        let seg = minimal_segmentation(&instance.fleet);
        let (attack, branches, geo) = evaluate_segmentation(&instance, scenario, &seg, &inputs.solver)?;
        Ok(ScenarioOutput {
            report: ScenarioReport {
                name: scenario.name.clone(),
                k: scenario.k,
                dispatch: DispatchSummary::new(&instance, &dispatch),
                attack: Some(attack),
                defense: None,
                branches,
            },
            files: vec![(format!("overlay_{}.geojson", scenario.name), geo)],
            runtime: t.elapsed().as_secs_f64(),
        })
    })?;
    finish("threat", &inputs, opts, outputs, started)
}

pub fn cmd_defend(opts: &CommonOptions, method: &Method) -> Result<Report, CliError> {
    let started = start_clock();
    let inputs = load_inputs(opts)?;
    if let Method::Heuristic(spec) = method {
        spec.validate()?;
    }
    let outputs = run_scenarios(&inputs, opts.jobs, |scenario| {
        let t = Instant::now();
        let (instance, dispatch) = scenario_instance(&inputs, scenario)?;
        let params = &scenario.adversary;
        let seg_file = format!("segmentation_{}.json", scenario.name);
        let (seg, mut defense) = match method {
            Method::Ccg => {
                let res = run_ccg(&instance, scenario.k, params, &inputs.config.limits, &inputs.solver)?;
                let status = match res.status {
                    DefenseStatus::Optimal => "optimal",
                    DefenseStatus::Infeasible => "infeasible",
                    DefenseStatus::IterationLimit => "iteration_limit",
                    DefenseStatus::TimeLimit => "time_limit",
                };
                let report = DefenseReport {
                    method: method.name(),
                    segments_used: res.segments_used,
                    status: status.into(),
                    lower_bound: Some(res.lower_bound),
                    upper_bound: Some(res.upper_bound),
                    iterations: res
                        .iterations
                        .iter()
                        .map(|it| BoundsRecord {
                            segments_used: it.segments_used,
                            lower_bound: it.lower_bound,
                            upper_bound: it.upper_bound,
                        })
                        .collect(),
                    columns: res.columns.len(),
                    segmentation_file: seg_file.clone(),
                    verified_overloads: 0,
                    acceptable: false,
                };
                (res.segmentation, report)
            }
            Method::Heuristic(spec) => {
                let res = run_heuristic(&instance, params, spec, scenario.k, &inputs.solver)?;
                let report = DefenseReport {
                    method: method.name(),
                    segments_used: res.segments_used,
                    status: if res.converged { "converged" } else { "not_converged" }.into(),
                    lower_bound: None,
                    upper_bound: None,
                    iterations: res
                        .trace
                        .iter()
                        .map(|s| BoundsRecord {
                            segments_used: s.segments_used,
                            lower_bound: 0,
                            upper_bound: s.overloads,
                        })
                        .collect(),
                    columns: 0,
                    segmentation_file: seg_file.clone(),
                    verified_overloads: 0,
                    acceptable: false,
                };
                (res.segmentation, report)
            }
        };
        let (attack, branches, geo) = evaluate_segmentation(&instance, scenario, &seg, &inputs.solver)?;
        defense.verified_overloads = attack.overload_count;
        defense.acceptable = attack.overload_count <= scenario.k as usize;
        Ok(ScenarioOutput {
            report: ScenarioReport {
                name: scenario.name.clone(),
                k: scenario.k,
                dispatch: DispatchSummary::new(&instance, &dispatch),
                attack: Some(attack),
                defense: Some(defense),
                branches,
            },
            files: vec![
                (seg_file, to_json(&seg.to_file(&instance.fleet))),
                (format!("overlay_{}.geojson", scenario.name), geo),
            ],
            runtime: t.elapsed().as_secs_f64(),
        })
    })?;
    let report = finish("defend", &inputs, opts, outputs, started)?;
    if let Some(bad) = report
        .scenarios
        .iter()
        .find(|s| s.defense.as_ref().is_some_and(|d| !d.acceptable))
    {
        return Err(CliError {
            code: EXIT_DEFENSE_INFEASIBLE,
            message: format!(
                "no segmentation with at most {} overloads found for scenario '{}'",
                bad.k, bad.name
            ),
        });
    }
    Ok(report)
}

pub fn cmd_evaluate(opts: &CommonOptions, segmentation: &Path) -> Result<Report, CliError> {
    let started = start_clock();
    let mut inputs = load_inputs(opts)?;
    let bytes = read_bytes(segmentation)?;
    let file: SegmentationFile = serde_json::from_str(&utf8(&bytes, segmentation)?).map_err(|e| CliError {
        code: EXIT_PARSE,
        message: format!("{}: {e}", segmentation.display()),
    })?;
    inputs.digest.segmentation_sha256 = Some(sha256(&bytes));
    if file.denominator != inputs.fleet.discretization() {
        inputs.fleet = inputs.fleet.with_discretization(file.denominator)?;
    }
    let seg = Segmentation::from_file(&file, &inputs.fleet)?;
    let outputs = run_scenarios(&inputs, opts.jobs, |scenario| {
        let t = Instant::now();
        let (instance, dispatch) = scenario_instance(&inputs, scenario)?;
        let (attack, branches, geo) = evaluate_segmentation(&instance, scenario, &seg, &inputs.solver)?;
        Ok(ScenarioOutput {
            report: ScenarioReport {
                name: scenario.name.clone(),
                k: scenario.k,
                dispatch: DispatchSummary::new(&instance, &dispatch),
                attack: Some(attack),
                defense: None,
                branches,
            },
            files: vec![(format!("overlay_{}.geojson", scenario.name), geo)],
            runtime: t.elapsed().as_secs_f64(),
        })
    })?;
    finish("evaluate", &inputs, opts, outputs, started)
}
