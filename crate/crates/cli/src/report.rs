//! JSON report types. Everything outside `run_info` is a pure function of
//! the inputs, so two runs on the same inputs differ only there.

use std::collections::BTreeMap;

use gridseg::adversary::replay_attack;
use gridseg::grid::Dispatch;
use gridseg::{AdversaryParams, AttackOutcome, Instance, Segmentation};
use serde::{Deserialize, Serialize};

use crate::{CliError, EXIT_SOLVER};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
pub struct InputDigest {
    pub case_sha256: String,
    pub fleet_sha256: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config_sha256: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub segmentation_sha256: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
pub struct FleetSummary {
    pub operators: usize,
    pub hackable_operators: usize,
    pub total_capacity_mw: f64,
    pub discretization: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
pub struct GeneratorDispatch {
    pub id: String,
    pub bus: String,
    pub mw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
pub struct DispatchSummary {
    pub total_generation_mw: f64,
    pub cost: f64,
    pub generators: Vec<GeneratorDispatch>,
}

impl DispatchSummary {
    pub fn new(instance: &Instance, dispatch: &Dispatch) -> Self {
        DispatchSummary {
            total_generation_mw: dispatch.total(),
            cost: dispatch.cost,
            generators: instance
                .grid
                .generators()
                .iter()
                .zip(&dispatch.generation)
                .map(|(g, &mw)| GeneratorDispatch {
                    id: g.id.clone(),
                    bus: g.bus.clone(),
                    mw,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
pub struct HackedSegment {
    pub operator: String,
    /// 1-based.
    pub segment: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
pub struct LoadChange {
    pub operator: String,
    pub bus: String,
    pub l_pos_mw: f64,
    pub l_neg_mw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
pub struct AttackReport {
    pub segments_used: usize,
    pub overload_count: usize,
    pub overloaded_branches: Vec<String>,
    /// Frequency deviation in p.u. of the FCR gain base.
    pub freq_dev: f64,
    pub net_change_mw: f64,
    pub hacked_segments: Vec<HackedSegment>,
    pub load_changes: Vec<LoadChange>,
    /// Set once the attack has been replayed through DC power flow and
    /// reproduced the same overloads.
    pub replay_verified: bool,
}

impl AttackReport {
    /// Replays the attack and fails if the replay disagrees with the solver.
    pub fn verified(
        instance: &Instance,
        seg: &Segmentation,
        outcome: &AttackOutcome,
        params: &AdversaryParams,
    ) -> Result<Self, CliError> {
        let replay = replay_attack(instance, &outcome.attack, params)?;
        if replay.u_pos != outcome.u_pos || replay.u_neg != outcome.u_neg {
            return Err(CliError {
                code: EXIT_SOLVER,
                message: "worst-case attack does not reproduce under replay".into(),
            });
        }
        let ops = instance.fleet.operators();
        let mut hacked_segments = Vec::new();
        let mut load_changes = Vec::new();
        for (o, op) in ops.iter().enumerate() {
            for (s, &h) in outcome.attack.hacked[o].iter().enumerate() {
                if h {
                    hacked_segments.push(HackedSegment {
                        operator: op.id.clone(),
                        segment: s + 1,
                    });
                }
            }
            for (j, site) in op.sites.iter().enumerate() {
                let (p, n) = (outcome.attack.l_pos[o][j], outcome.attack.l_neg[o][j]);
                if p > 0.0 || n > 0.0 {
                    load_changes.push(LoadChange {
                        operator: op.id.clone(),
                        bus: site.bus.clone(),
                        l_pos_mw: p,
                        l_neg_mw: n,
                    });
                }
            }
        }
        Ok(AttackReport {
            segments_used: seg.segments_used(),
            overload_count: replay.overload_count,
            overloaded_branches: replay
                .overloaded_branches()
                .into_iter()
                .map(|l| instance.grid.branches()[l].id.clone())
                .collect(),
            freq_dev: replay.freq_dev,
            net_change_mw: outcome.attack.net_change(),
            hacked_segments,
            load_changes,
            replay_verified: true,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
pub struct BranchLoading {
    pub id: String,
    pub from_bus: String,
    pub to_bus: String,
    pub patl_mw: f64,
    pub threshold_mw: f64,
    pub base_flow_mw: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attack_flow_mw: Option<f64>,
    /// |flow| / threshold in percent, using the attack flow when present.
    pub loading_pct: f64,
    pub overloaded: bool,
}

pub fn branch_table(instance: &Instance, base_flows: &[f64], attack: Option<&AttackOutcome>) -> Vec<BranchLoading> {
    instance
        .grid
        .branches()
        .iter()
        .enumerate()
        .map(|(l, br)| {
            let attack_flow = attack.map(|a| a.flows[l]);
            let flow = attack_flow.unwrap_or(base_flows[l]);
            BranchLoading {
                id: br.id.clone(),
                from_bus: br.from_bus.clone(),
                to_bus: br.to_bus.clone(),
                patl_mw: br.rating_patl,
                threshold_mw: br.overload_threshold,
                base_flow_mw: base_flows[l],
                attack_flow_mw: attack_flow,
                loading_pct: 100.0 * flow.abs() / br.overload_threshold,
                overloaded: attack.is_some_and(|a| a.u_pos[l] || a.u_neg[l]),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
pub struct BoundsRecord {
    pub segments_used: usize,
    pub lower_bound: usize,
    pub upper_bound: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
pub struct DefenseReport {
    pub method: String,
    pub segments_used: usize,
    /// `optimal`, `infeasible`, `iteration_limit`, `time_limit`, `converged`
    /// or `not_converged`.
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lower_bound: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub upper_bound: Option<usize>,
    /// CCG bounds per iteration, or heuristic steps.
    pub iterations: Vec<BoundsRecord>,
    pub columns: usize,
    pub segmentation_file: String,
    /// Worst-case overloads of the returned segmentation, re-solved and replayed.
    pub verified_overloads: usize,
    pub acceptable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
pub struct ScenarioReport {
    pub name: String,
    pub k: u32,
    pub dispatch: DispatchSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attack: Option<AttackReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub defense: Option<DefenseReport>,
    pub branches: Vec<BranchLoading>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
pub struct RunInfo {
    pub started_unix_s: u64,
    pub elapsed_s: f64,
    pub scenario_runtime_s: BTreeMap<String, f64>,
    pub solver: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub inputs: InputDigest,
    pub fleet: FleetSummary,
    pub scenarios: Vec<ScenarioReport>,
    pub run_info: RunInfo,
}
