//! Exact defense design by column-and-constraint generation: a growing master
//! problem over segmentations, cut by worst-case attacks from the sub-problem.

use std::collections::HashSet;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::adversary::{add_network_block, solve_worst_case_attack, AdversaryParams, AttackOutcome};
use crate::error::{Error, Result};
use crate::fleet::{maximal_segmentation, minimal_segmentation, OperatorSegmentation, Segmentation};
use crate::instance::Instance;
use crate::milp::{self, ModelSpec, ObjectiveSense, RowSense, SolveStatus, SolverOptions, VarId};

/// A fixed attack α taken from a sub-problem solve. Rates are MW of load
/// change per unit of hacked share, so that `rate * Σ_s h_s a_{o,n,s}`
/// reproduces the original attack under the segmentation it was solved for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackColumn {
    pub iteration: usize,
    pub hacked: Vec<Vec<bool>>,
    pub rate_pos: Vec<Vec<f64>>,
    pub rate_neg: Vec<Vec<f64>>,
    /// Overloads the attack caused against its source segmentation.
    pub source_overloads: usize,
}

impl AttackColumn {
    pub fn from_outcome(instance: &Instance, seg: &Segmentation, outcome: &AttackOutcome, iteration: usize) -> Self {
        let attack = &outcome.attack;
        let mut rate_pos = Vec::new();
        let mut rate_neg = Vec::new();
        for (o, op) in instance.fleet.operators().iter().enumerate() {
            let mut rp = Vec::with_capacity(op.sites.len());
            let mut rn = Vec::with_capacity(op.sites.len());
            for j in 0..op.sites.len() {
                let share = seg.hacked_fraction(o, j, &attack.hacked[o]);
                if share > 0.0 {
                    rp.push(attack.l_pos[o][j] / share);
                    rn.push(attack.l_neg[o][j] / share);
                } else {
                    rp.push(0.0);
                    rn.push(0.0);
                }
            }
            rate_pos.push(rp);
            rate_neg.push(rn);
        }
        AttackColumn {
            iteration,
            hacked: attack.hacked.clone(),
            rate_pos,
            rate_neg,
            source_overloads: outcome.overload_count,
        }
    }

    fn check(&self, instance: &Instance, params: &AdversaryParams) -> Result<()> {
        let ops = instance.fleet.operators();
        let d = instance.fleet.discretization();
        if self.hacked.len() != ops.len() || self.rate_pos.len() != ops.len() || self.rate_neg.len() != ops.len() {
            return Err(Error::MalformedColumn("column shape does not match fleet".into()));
        }
        let hacked = self.hacked.iter().flatten().filter(|&&h| h).count();
        if hacked > params.hack_budget as usize {
            return Err(Error::MalformedColumn(format!(
                "{hacked} hacked segments exceed budget"
            )));
        }
        for (o, op) in ops.iter().enumerate() {
            if self.hacked[o].len() != op.segment_slots(d) {
                return Err(Error::MalformedColumn(format!("segment count mismatch for {}", op.id)));
            }
            if !op.hackable && self.hacked[o].iter().any(|&h| h) {
                return Err(Error::MalformedColumn(format!("operator {} is not hackable", op.id)));
            }
            for (j, site) in op.sites.iter().enumerate() {
                let (rp, rn) = (self.rate_pos[o][j], self.rate_neg[o][j]);
                let tol = 1e-6 * instance.base_mva();
                if rp < -tol || rp > site.capacity * params.pos_rate() + tol {
                    return Err(Error::MalformedColumn(format!(
                        "l_pos rate {rp} out of bounds at {}/{}",
                        op.id, site.bus
                    )));
                }
                if rn < -tol || rn > site.capacity * params.neg_rate() + tol {
                    return Err(Error::MalformedColumn(format!(
                        "l_neg rate {rn} out of bounds at {}/{}",
                        op.id, site.bus
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Master problem with handles to the segmentation variables.
#[derive(Debug, Clone)]
pub struct MasterModel {
    pub spec: ModelSpec,
    /// `shares[o][site][slot]`, `None` for non-hackable operators.
    shares: Vec<Option<Vec<Vec<VarId>>>>,
    used: Vec<Option<Vec<VarId>>>,
}

impl MasterModel {
    fn segmentation(&self, instance: &Instance, values: &[f64]) -> Segmentation {
        let d = instance.fleet.discretization();
        let minimal = minimal_segmentation(&instance.fleet);
        let operators = instance
            .fleet
            .operators()
            .iter()
            .enumerate()
            .map(|(o, op)| match (&self.shares[o], &self.used[o]) {
                (Some(x), Some(_)) => {
                    let mut os = OperatorSegmentation {
                        used: vec![false; op.segment_slots(d)],
                        shares: x
                            .iter()
                            .map(|row| row.iter().map(|v| values[v.0].round().max(0.0) as u32).collect())
                            .collect(),
                    };
                    os.compact(op.segment_slots(d));
                    os
                }
                _ => minimal.operators[o].clone(),
            })
            .collect();
        Segmentation {
            denominator: d,
            operators,
        }
    }
}

const LEX_WEIGHT_CAP: f64 = 1e5;

/// Margin (p.u.) by which a rescaled column must exceed the net-change bound
/// before the master may treat it as void.
const LAA_GAP_PU: f64 = 1e-4;

/// Place values for the leading sites; sites past the cap get weight 0.
fn lex_weights(sites: usize, d: u32) -> Vec<f64> {
    let radix = d as f64 + 1.0;
    let mut lead = 0;
    while lead < sites && radix.powi(lead as i32 + 1) <= LEX_WEIGHT_CAP {
        lead += 1;
    }
    (0..sites)
        .map(|j| {
            if j < lead {
                radix.powi((lead - 1 - j) as i32)
            } else {
                0.0
            }
        })
        .collect()
}

/// Builds the master problem: minimize used segments subject to the
/// assignment rules and, for every column, the network response to that
/// fixed attack scaled to the candidate segmentation with at most `k`
/// overloads (threshold F without ε). A column only binds on segmentations
/// where its rescaled attack still respects the net-change bound. Segments
/// must be nonempty and are ordered lexicographically by their shares.
pub fn build_master(
    instance: &Instance,
    columns: &[AttackColumn],
    k: u32,
    params: &AdversaryParams,
) -> Result<MasterModel> {
    params.validate()?;
    let fleet = &instance.fleet;
    let d = fleet.discretization();
    let base = instance.base_mva();
    let mut model = ModelSpec::new("master", ObjectiveSense::Minimize);
    let mut shares = Vec::new();
    let mut used = Vec::new();
    let mut objective = Vec::new();
    let mut fixed_segments = 0.0;

    for op in fleet.operators() {
        if !op.hackable {
            shares.push(None);
            used.push(None);
            fixed_segments += 1.0;
            continue;
        }
        let slots = op.segment_slots(d);
        let b: Vec<VarId> = (0..slots)
            .map(|s| model.binary(format!("b[{},{}]", op.id, s + 1)))
            .collect();
        let x: Vec<Vec<VarId>> = op
            .sites
            .iter()
            .map(|site| {
                (0..slots)
                    .map(|s| model.integer(format!("x[{},{},{}]", op.id, site.bus, s + 1), 0.0, d as f64))
                    .collect()
            })
            .collect();
        for (site, row) in op.sites.iter().zip(&x) {
            model.add_constraint(
                format!("assign[{},{}]", op.id, site.bus),
                row.iter().map(|&v| (v, 1.0)).collect(),
                RowSense::Eq,
                d as f64,
            );
            for (s, &v) in row.iter().enumerate() {
                model.add_constraint(
                    format!("use[{},{},{}]", op.id, site.bus, s + 1),
                    vec![(v, 1.0), (b[s], -(d as f64))],
                    RowSense::Le,
                    0.0,
                );
            }
        }
        model.add_constraint(format!("first[{}]", op.id), vec![(b[0], 1.0)], RowSense::Eq, 1.0);
        for s in 1..slots {
            model.add_constraint(
                format!("order[{},{}]", op.id, s + 1),
                vec![(b[s], 1.0), (b[s - 1], -1.0)],
                RowSense::Le,
                0.0,
            );
        }
        for (s, &bs) in b.iter().enumerate() {
            let mut terms = vec![(bs, 1.0)];
            terms.extend(x.iter().map(|row| (row[s], -1.0)));
            model.add_constraint(format!("nonempty[{},{}]", op.id, s + 1), terms, RowSense::Le, 0.0);
        }
        // Segments ordered by their share vector read as a base-(D+1) number,
        // over as many leading sites as the encoding allows.
        let weights = lex_weights(op.sites.len(), d);
        for s in 1..slots {
            let mut terms: Vec<(VarId, f64)> = Vec::new();
            for (row, &w) in x.iter().zip(&weights).filter(|(_, &w)| w > 0.0) {
                terms.push((row[s - 1], w));
                terms.push((row[s], -w));
            }
            model.add_constraint(format!("lex[{},{}]", op.id, s + 1), terms, RowSense::Ge, 0.0);
        }
        objective.extend(b.iter().map(|&v| (v, 1.0)));
        shares.push(Some(x));
        used.push(Some(b));
    }

    // η only loosens the per-column rows, so it sits at its upper bound K.
    let eta = model.continuous("eta", k as f64, k as f64);

    for (c, col) in columns.iter().enumerate() {
        col.check(instance, params)?;
        let tag = format!("_c{}", c + 1);
        let mut net_change: Vec<Vec<(VarId, f64)>> = vec![Vec::new(); instance.grid.buses().len()];
        for (o, op) in fleet.operators().iter().enumerate() {
            let Some(x) = &shares[o] else { continue };
            for j in 0..op.sites.len() {
                let rate = (col.rate_pos[o][j] - col.rate_neg[o][j]) / base / d as f64;
                if rate == 0.0 {
                    continue;
                }
                let n = instance.site_bus(o, j);
                for (s, &h) in col.hacked[o].iter().enumerate() {
                    if h {
                        net_change[n].push((x[j][s], rate));
                    }
                }
            }
        }
        let block = add_network_block(&mut model, instance, params, 0.0, &tag, &net_change)?;
        let mut terms: Vec<(VarId, f64)> = block.u_pos.iter().chain(&block.u_neg).map(|&u| (u, 1.0)).collect();
        terms.push((eta, -1.0));

        // The rescaled attack may break the net-change bound, in which case it
        // is not an attack on this segmentation and must not count. `active`
        // may only drop to 0 when the bound is violated by at least LAA_GAP_PU.
        let total: Vec<(VarId, f64)> = net_change.iter().flatten().copied().collect();
        let reach: f64 = total.iter().map(|(_, c)| c.abs() * d as f64).sum();
        let laa = params.laa_max / base;
        if reach > laa {
            let active = model.binary(format!("active{tag}"));
            let side = model.binary(format!("side{tag}"));
            let big = reach + laa + LAA_GAP_PU;
            let slack = 2.0 * instance.grid.branches().len() as f64;
            terms.push((active, slack));
            model.add_constraint(format!("overloads{tag}"), terms, RowSense::Le, slack);
            let mut above = total.clone();
            above.extend([(active, big), (side, big)]);
            model.add_constraint(format!("void_hi{tag}"), above, RowSense::Ge, laa + LAA_GAP_PU);
            let mut below = total;
            below.extend([(active, -big), (side, big)]);
            model.add_constraint(format!("void_lo{tag}"), below, RowSense::Le, big - laa - LAA_GAP_PU);
        } else {
            model.add_constraint(format!("overloads{tag}"), terms, RowSense::Le, 0.0);
        }
    }

    model.set_objective(objective);
    model.objective.constant = fixed_segments;
    Ok(MasterModel {
        spec: model,
        shares,
        used,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DefenseStatus {
    Optimal,
    Infeasible,
    IterationLimit,
    TimeLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// Segments of the segmentation evaluated by the sub-problem this iteration.
    pub segments_used: usize,
    pub lower_bound: usize,
    pub upper_bound: usize,
    /// Seconds.
    pub runtime: f64,
    pub segmentation: Segmentation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefenseResult {
    pub segmentation: Segmentation,
    pub segments_used: usize,
    pub lower_bound: usize,
    pub upper_bound: usize,
    pub iterations: Vec<IterationRecord>,
    pub status: DefenseStatus,
    pub columns: Vec<AttackColumn>,
    /// Worst case for the returned segmentation, when it was evaluated.
    pub worst_case: Option<AttackOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[serde(default)]
pub struct CcgLimits {
    pub max_iterations: usize,
    /// Seconds.
    pub time_limit: f64,
}

impl Default for CcgLimits {
    fn default() -> Self {
        CcgLimits {
            max_iterations: 100,
            time_limit: 3600.0,
        }
    }
}

/// Runs the CCG loop starting from the minimal segmentation. The loop stops
/// as soon as the sub-problem certifies the current segmentation with at most
/// `k` overloads, and that segmentation is returned.
pub fn run_ccg(
    instance: &Instance,
    k: u32,
    params: &AdversaryParams,
    limits: &CcgLimits,
    opts: &SolverOptions,
) -> Result<DefenseResult> {
    if params.epsilon <= 0.0 {
        return Err(Error::MalformedModel("CCG requires epsilon > 0".into()));
    }
    let start = Instant::now();
    let remaining = |opts: &SolverOptions| {
        let left = (limits.time_limit - start.elapsed().as_secs_f64()).max(1.0);
        SolverOptions {
            time_limit: Some(opts.time_limit.map_or(left, |t| t.min(left))),
            ..opts.clone()
        }
    };

    let (finest, capped) = maximal_segmentation(&instance.fleet);
    if !capped.is_empty() {
        log::info!("segment slots capped for operators {capped:?}");
    }
    let lower = solve_worst_case_attack(instance, &finest, params, &remaining(opts))?;
    let mut lower_bound = lower.overload_count;
    let mut upper_bound = instance.grid.branches().len();
    let mut current = minimal_segmentation(&instance.fleet);
    log::info!("ccg: lower bound from finest segmentation {lower_bound}");
    if lower_bound > k as usize {
        return Ok(DefenseResult {
            segments_used: current.segments_used(),
            segmentation: current,
            lower_bound,
            upper_bound,
            iterations: Vec::new(),
            status: DefenseStatus::Infeasible,
            columns: Vec::new(),
            worst_case: None,
        });
    }

    let mut columns = Vec::new();
    let mut iterations = Vec::new();
    let mut seen = HashSet::new();
    seen.insert(current.clone());
    let mut status = DefenseStatus::IterationLimit;
    let mut worst_case = None;

    for i in 1..=limits.max_iterations {
        let t0 = Instant::now();
        if start.elapsed().as_secs_f64() > limits.time_limit {
            status = DefenseStatus::TimeLimit;
            break;
        }
        let outcome = solve_worst_case_attack(instance, &current, params, &remaining(opts))?;
        upper_bound = outcome.overload_count;
        log::info!(
            "ccg iteration {i}: {} segments, {} worst-case overloads",
            current.segments_used(),
            upper_bound
        );
        if upper_bound <= k as usize {
            lower_bound = k as usize;
            iterations.push(IterationRecord {
                segments_used: current.segments_used(),
                lower_bound,
                upper_bound,
                runtime: t0.elapsed().as_secs_f64(),
                segmentation: current.clone(),
            });
            worst_case = Some(outcome);
            status = DefenseStatus::Optimal;
            break;
        }
        columns.push(AttackColumn::from_outcome(instance, &current, &outcome, i));
        let master = build_master(instance, &columns, k, params)?;
        let res = milp::solve(&master.spec, &remaining(opts))?;
        let evaluated = current.segments_used();
        match res.status {
            SolveStatus::Optimal => {}
            SolveStatus::Infeasible => {
                iterations.push(IterationRecord {
                    segments_used: evaluated,
                    lower_bound,
                    upper_bound,
                    runtime: t0.elapsed().as_secs_f64(),
                    segmentation: current.clone(),
                });
                status = DefenseStatus::Infeasible;
                worst_case = Some(outcome);
                break;
            }
            SolveStatus::TimeLimit => {
                status = DefenseStatus::TimeLimit;
                worst_case = Some(outcome);
                break;
            }
            other => return Err(Error::SolverFailure(format!("master problem status {other:?}"))),
        }
        lower_bound = k as usize;
        iterations.push(IterationRecord {
            segments_used: evaluated,
            lower_bound,
            upper_bound,
            runtime: t0.elapsed().as_secs_f64(),
            segmentation: current.clone(),
        });
        let values = res.values.as_ref().expect("optimal master has values");
        let next = master.segmentation(instance, values);
        if !seen.insert(next.clone()) {
            return Err(Error::SolverFailure(format!(
                "master repeated a segmentation in iteration {i}"
            )));
        }
        current = next;
        worst_case = None;
    }

    Ok(DefenseResult {
        segments_used: current.segments_used(),
        segmentation: current,
        lower_bound,
        upper_bound,
        iterations,
        status,
        columns,
        worst_case,
    })
}
