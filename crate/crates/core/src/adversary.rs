//! Worst-case load-altering attack: the overload-maximizing MILP for a fixed
//! segmentation, and a solver-free replay of a given attack.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fleet::Segmentation;
use crate::instance::Instance;
use crate::milp::{self, ModelSpec, ObjectiveSense, RowSense, SolveStatus, SolverOptions, VarId};

/// Overload test slack for replayed flows, in p.u. Matches the solver's
/// feasibility tolerance with some headroom.
pub const OVERLOAD_TOL_PU: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[serde(default)]
pub struct AdversaryParams {
    /// Maximum number of compromised segments.
    pub hack_budget: u32,
    /// Fraction of installed capacity charging at any time.
    pub coincidence: f64,
    /// Fraction of idle capacity an attacker can switch on.
    pub act_fraction: f64,
    /// Fraction of charging capacity that can be reversed into injection.
    pub v2g_fraction: f64,
    /// Bound on |Σ(l_pos - l_neg)| in MW.
    pub laa_max: f64,
    /// Big-M in p.u.
    pub big_m: f64,
    /// Relative increase of overload thresholds in the sub-problem.
    pub epsilon: f64,
}

impl Default for AdversaryParams {
    fn default() -> Self {
        AdversaryParams {
            hack_budget: 2,
            coincidence: 0.2,
            act_fraction: 1.0,
            v2g_fraction: 0.0,
            laa_max: 0.0,
            big_m: 100.0,
            epsilon: 1e-3,
        }
    }
}

impl AdversaryParams {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !(unit(self.coincidence) && unit(self.act_fraction) && unit(self.v2g_fraction)) {
            return Err(Error::MalformedModel("C, C_ACT and C_V2G must lie in [0, 1]".into()));
        }
        if !(self.laa_max >= 0.0) || !(self.big_m > 0.0) || !(self.epsilon >= 0.0) {
            return Err(Error::MalformedModel(
                "need laa_max >= 0, big_m > 0, epsilon >= 0".into(),
            ));
        }
        Ok(())
    }

    /// Upper bound on l_pos per MW of hacked installed capacity.
    pub fn pos_rate(&self) -> f64 {
        (1.0 - self.coincidence) * self.act_fraction
    }

    /// Upper bound on l_neg per MW of hacked installed capacity.
    pub fn neg_rate(&self) -> f64 {
        self.coincidence * (1.0 + self.v2g_fraction)
    }
}

/// Hacked segments and the load changes (MW) the attacker applies, aligned
/// with the fleet: `hacked[o][s]`, `l_pos[o][site]`, `l_neg[o][site]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackInstance {
    pub hacked: Vec<Vec<bool>>,
    pub l_pos: Vec<Vec<f64>>,
    pub l_neg: Vec<Vec<f64>>,
}

impl AttackInstance {
    /// The empty attack shaped for `seg`.
    pub fn none(instance: &Instance, seg: &Segmentation) -> Self {
        let ops = instance.fleet.operators();
        AttackInstance {
            hacked: seg.operators.iter().map(|o| vec![false; o.slots()]).collect(),
            l_pos: ops.iter().map(|o| vec![0.0; o.sites.len()]).collect(),
            l_neg: ops.iter().map(|o| vec![0.0; o.sites.len()]).collect(),
        }
    }

    pub fn hacked_count(&self) -> usize {
        self.hacked.iter().flatten().filter(|&&h| h).count()
    }

    /// Σ(l_pos - l_neg) in MW.
    pub fn net_change(&self) -> f64 {
        self.l_pos.iter().flatten().sum::<f64>() - self.l_neg.iter().flatten().sum::<f64>()
    }

    /// Checks budget, hackability and the per-site magnitude bounds against
    /// the segmentation the attack targets.
    pub fn check(&self, instance: &Instance, seg: &Segmentation, params: &AdversaryParams) -> Result<(), String> {
        let ops = instance.fleet.operators();
        if self.hacked.len() != ops.len() || self.l_pos.len() != ops.len() || self.l_neg.len() != ops.len() {
            return Err("attack shape does not match fleet".into());
        }
        if self.hacked_count() > params.hack_budget as usize {
            return Err(format!(
                "{} segments hacked, budget {}",
                self.hacked_count(),
                params.hack_budget
            ));
        }
        for (o, op) in ops.iter().enumerate() {
            if !op.hackable && self.hacked[o].iter().any(|&h| h) {
                return Err(format!("operator {} is not hackable", op.id));
            }
            for (j, site) in op.sites.iter().enumerate() {
                let frac = seg.hacked_fraction(o, j, &self.hacked[o]);
                let tol = 1e-6 * instance.base_mva();
                let (lp, ln) = (self.l_pos[o][j], self.l_neg[o][j]);
                if lp < -tol || ln < -tol {
                    return Err(format!("negative load change at {}/{}", op.id, site.bus));
                }
                if lp > site.capacity * params.pos_rate() * frac + tol {
                    return Err(format!("l_pos {lp} exceeds bound at {}/{}", op.id, site.bus));
                }
                if ln > site.capacity * params.neg_rate() * frac + tol {
                    return Err(format!("l_neg {ln} exceeds bound at {}/{}", op.id, site.bus));
                }
            }
        }
        Ok(())
    }
}

/// An attack together with the grid state it produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackOutcome {
    pub attack: AttackInstance,
    /// MW per branch.
    pub flows: Vec<f64>,
    /// rad per bus.
    pub angles: Vec<f64>,
    pub freq_dev: f64,
    pub u_pos: Vec<bool>,
    pub u_neg: Vec<bool>,
    pub overload_count: usize,
}

impl AttackOutcome {
    pub fn overloaded_branches(&self) -> Vec<usize> {
        (0..self.u_pos.len())
            .filter(|&l| self.u_pos[l] || self.u_neg[l])
            .collect()
    }
}

/// Variable handles of an adversary model, for reading solutions back.
#[derive(Debug, Clone)]
pub struct AdversaryModel {
    pub spec: ModelSpec,
    hacked: Vec<Vec<Option<VarId>>>,
    l_pos: Vec<Vec<Option<VarId>>>,
    l_neg: Vec<Vec<Option<VarId>>>,
    flows: Vec<VarId>,
    angles: Vec<VarId>,
    freq_dev: VarId,
    u_pos: Vec<VarId>,
    u_neg: Vec<VarId>,
}

/// Overload threshold F_l (1 + ε) in p.u.
pub(crate) fn thresholds_pu(instance: &Instance, epsilon: f64) -> Vec<f64> {
    let base = instance.base_mva();
    instance
        .grid
        .branches()
        .iter()
        .map(|br| br.overload_threshold * (1.0 + epsilon) / base)
        .collect()
}

/// Handles for the DC network block shared by the adversary and master models.
pub(crate) struct NetworkBlock {
    pub flows: Vec<VarId>,
    pub angles: Vec<VarId>,
    pub freq_dev: VarId,
    pub u_pos: Vec<VarId>,
    pub u_neg: Vec<VarId>,
}

/// Adds nodal balance with frequency response, DC flow, the frequency
/// deviation definition and big-M overload indicators. `net_change[n]` lists
/// terms whose sum is the attacker's net load increase at bus n (p.u.).
pub(crate) fn add_network_block(
    model: &mut ModelSpec,
    instance: &Instance,
    params: &AdversaryParams,
    epsilon: f64,
    tag: &str,
    net_change: &[Vec<(VarId, f64)>],
) -> Result<NetworkBlock> {
    let grid = &instance.grid;
    let base = instance.base_mva();
    let injections = instance.base_injections_pu(params.coincidence)?;
    let has_attack = net_change.iter().any(|t| !t.is_empty());
    let total_fcr = instance.total_fcr_pu();
    if has_attack && total_fcr <= 0.0 {
        return Err(Error::ZeroFcr);
    }

    let angles: Vec<VarId> = grid
        .buses()
        .iter()
        .enumerate()
        .map(|(i, b)| {
            if i == grid.reference_bus() {
                model.continuous(format!("theta{tag}[{}]", b.id), 0.0, 0.0)
            } else {
                model.free(format!("theta{tag}[{}]", b.id))
            }
        })
        .collect();
    let flows: Vec<VarId> = grid
        .branches()
        .iter()
        .map(|br| model.free(format!("f{tag}[{}]", br.id)))
        .collect();
    let freq_dev = if has_attack {
        model.free(format!("fD{tag}"))
    } else {
        model.continuous(format!("fD{tag}"), 0.0, 0.0)
    };
    let u_pos: Vec<VarId> = grid
        .branches()
        .iter()
        .map(|br| model.binary(format!("uP{tag}[{}]", br.id)))
        .collect();
    let u_neg: Vec<VarId> = grid
        .branches()
        .iter()
        .map(|br| model.binary(format!("uN{tag}[{}]", br.id)))
        .collect();

    // Nodal balance: Σ_l I_nl f_l + Σ_g K_g fD + net_n = Σ_g P_g - C·L_n - P^D_n.
    let mut rows: Vec<Vec<(VarId, f64)>> = vec![Vec::new(); grid.buses().len()];
    for l in 0..grid.branches().len() {
        let (from, to) = grid.branch_ends(l);
        rows[from].push((flows[l], 1.0));
        rows[to].push((flows[l], -1.0));
    }
    if has_attack {
        for (g, k) in instance.fcr_gains.iter().enumerate() {
            if *k > 0.0 {
                rows[grid.generator_bus(g)].push((freq_dev, k / base));
            }
        }
    }
    for (n, terms) in net_change.iter().enumerate() {
        rows[n].extend_from_slice(terms);
    }
    for (n, terms) in rows.into_iter().enumerate() {
        model.add_constraint(
            format!("balance{tag}[{}]", grid.buses()[n].id),
            terms,
            RowSense::Eq,
            injections[n],
        );
    }

    for (l, br) in grid.branches().iter().enumerate() {
        let (from, to) = grid.branch_ends(l);
        model.add_constraint(
            format!("dc_flow{tag}[{}]", br.id),
            vec![
                (flows[l], 1.0),
                (angles[from], -br.susceptance),
                (angles[to], br.susceptance),
            ],
            RowSense::Eq,
            0.0,
        );
    }

    if has_attack {
        // fD · Σ K + Σ net = 0
        let mut terms = vec![(freq_dev, total_fcr)];
        terms.extend(net_change.iter().flatten().copied());
        model.add_constraint(format!("freq_dev{tag}"), terms, RowSense::Eq, 0.0);
    }

    let m = params.big_m;
    for (l, (br, thr)) in grid.branches().iter().zip(thresholds_pu(instance, epsilon)).enumerate() {
        let id = &br.id;
        let (f, up, un) = (flows[l], u_pos[l], u_neg[l]);
        model.add_constraint(
            format!("ovl_p_hi{tag}[{id}]"),
            vec![(f, 1.0), (up, -m)],
            RowSense::Le,
            thr,
        );
        model.add_constraint(
            format!("ovl_p_lo{tag}[{id}]"),
            vec![(f, 1.0), (up, -m)],
            RowSense::Ge,
            thr - m,
        );
        model.add_constraint(
            format!("ovl_n_hi{tag}[{id}]"),
            vec![(f, -1.0), (un, -m)],
            RowSense::Le,
            thr,
        );
        model.add_constraint(
            format!("ovl_n_lo{tag}[{id}]"),
            vec![(f, -1.0), (un, -m)],
            RowSense::Ge,
            thr - m,
        );
    }

    Ok(NetworkBlock {
        flows,
        angles,
        freq_dev,
        u_pos,
        u_neg,
    })
}

/// Rough upper bound on any branch flow (p.u.): all generation plus all
/// charging capacity pushed through one branch.
fn flow_bound_pu(instance: &Instance) -> f64 {
    let gen: f64 = instance.grid.generators().iter().map(|g| g.p_max).sum();
    (gen + instance.fleet.total_capacity() + instance.grid.total_base_load()) / instance.base_mva()
}

pub fn build_adversary_model(
    instance: &Instance,
    seg: &Segmentation,
    params: &AdversaryParams,
) -> Result<AdversaryModel> {
    params.validate()?;
    let violations = crate::fleet::validate_segmentation(&instance.fleet, seg);
    if let Some(v) = violations.first() {
        return Err(Error::SegmentationMismatch(v.to_string()));
    }
    let base = instance.base_mva();
    let max_thr = thresholds_pu(instance, params.epsilon).into_iter().fold(0.0, f64::max);
    if max_thr + flow_bound_pu(instance) >= params.big_m {
        log::warn!(
            "big-M {} may bind: thresholds up to {max_thr:.2} p.u., flows bounded by {:.2} p.u.",
            params.big_m,
            flow_bound_pu(instance)
        );
    }

    let mut model = ModelSpec::new("adversary", ObjectiveSense::Maximize);
    let ops = instance.fleet.operators();
    let mut hacked = Vec::with_capacity(ops.len());
    let mut l_pos = Vec::with_capacity(ops.len());
    let mut l_neg = Vec::with_capacity(ops.len());
    let mut budget_terms = Vec::new();
    let mut net_change: Vec<Vec<(VarId, f64)>> = vec![Vec::new(); instance.grid.buses().len()];

    for (o, op) in ops.iter().enumerate() {
        let os = &seg.operators[o];
        if !op.hackable {
            hacked.push(vec![None; os.slots()]);
            l_pos.push(vec![None; op.sites.len()]);
            l_neg.push(vec![None; op.sites.len()]);
            continue;
        }
        let h: Vec<Option<VarId>> = (0..os.slots())
            .map(|s| {
                let carries = os.shares.iter().any(|row| row[s] > 0);
                carries.then(|| model.binary(format!("h[{},{}]", op.id, s + 1)))
            })
            .collect();
        budget_terms.extend(h.iter().flatten().map(|&v| (v, 1.0)));
        let mut lp_row = Vec::with_capacity(op.sites.len());
        let mut ln_row = Vec::with_capacity(op.sites.len());
        for (j, site) in op.sites.iter().enumerate() {
            let lp = model.continuous(format!("lpos[{},{}]", op.id, site.bus), 0.0, f64::INFINITY);
            let ln = model.continuous(format!("lneg[{},{}]", op.id, site.bus), 0.0, f64::INFINITY);
            let cap = site.capacity / base;
            let hacked_share: Vec<(VarId, f64)> = h
                .iter()
                .enumerate()
                .filter_map(|(s, v)| v.map(|v| (v, seg.fraction(o, j, s))))
                .filter(|&(_, a)| a > 0.0)
                .collect();
            let mut pos = vec![(lp, 1.0)];
            pos.extend(hacked_share.iter().map(|&(v, a)| (v, -cap * params.pos_rate() * a)));
            model.add_constraint(format!("laa_pos[{},{}]", op.id, site.bus), pos, RowSense::Le, 0.0);
            let mut neg = vec![(ln, 1.0)];
            neg.extend(hacked_share.iter().map(|&(v, a)| (v, -cap * params.neg_rate() * a)));
            model.add_constraint(format!("laa_neg[{},{}]", op.id, site.bus), neg, RowSense::Le, 0.0);
            let n = instance.site_bus(o, j);
            net_change[n].push((lp, 1.0));
            net_change[n].push((ln, -1.0));
            lp_row.push(Some(lp));
            ln_row.push(Some(ln));
        }
        hacked.push(h);
        l_pos.push(lp_row);
        l_neg.push(ln_row);
    }

    model.add_constraint("budget", budget_terms, RowSense::Le, params.hack_budget as f64);
    let net_terms: Vec<(VarId, f64)> = net_change.iter().flatten().copied().collect();
    model.add_constraint("laa_sum_hi", net_terms.clone(), RowSense::Le, params.laa_max / base);
    model.add_constraint("laa_sum_lo", net_terms, RowSense::Ge, -params.laa_max / base);

    let block = add_network_block(&mut model, instance, params, params.epsilon, "", &net_change)?;
    model.set_objective(block.u_pos.iter().chain(&block.u_neg).map(|&u| (u, 1.0)).collect());

    Ok(AdversaryModel {
        spec: model,
        hacked,
        l_pos,
        l_neg,
        flows: block.flows,
        angles: block.angles,
        freq_dev: block.freq_dev,
        u_pos: block.u_pos,
        u_neg: block.u_neg,
    })
}

/// Solves the sub-problem for `seg` and returns the overload-maximizing attack.
/// The outcome is cross-checked against [`replay_attack`].
pub fn solve_worst_case_attack(
    instance: &Instance,
    seg: &Segmentation,
    params: &AdversaryParams,
    opts: &SolverOptions,
) -> Result<AttackOutcome> {
    let am = build_adversary_model(instance, seg, params)?;
    let res = milp::solve(&am.spec, opts)?;
    if res.status != SolveStatus::Optimal {
        return Err(Error::SolverFailure(format!("adversary model status {:?}", res.status)));
    }
    let base = instance.base_mva();
    let read = |v: &Option<VarId>| v.map_or(0.0, |v| (res.value(v) * base).max(0.0));
    let attack = AttackInstance {
        hacked: am
            .hacked
            .iter()
            .map(|row| row.iter().map(|v| v.is_some_and(|v| res.value(v) > 0.5)).collect())
            .collect(),
        l_pos: am.l_pos.iter().map(|row| row.iter().map(read).collect()).collect(),
        l_neg: am.l_neg.iter().map(|row| row.iter().map(read).collect()).collect(),
    };
    let u_pos: Vec<bool> = am.u_pos.iter().map(|&v| res.value(v) > 0.5).collect();
    let u_neg: Vec<bool> = am.u_neg.iter().map(|&v| res.value(v) > 0.5).collect();
    let outcome = AttackOutcome {
        flows: am.flows.iter().map(|&v| res.value(v) * base).collect(),
        angles: am.angles.iter().map(|&v| res.value(v)).collect(),
        freq_dev: res.value(am.freq_dev),
        overload_count: u_pos.iter().chain(&u_neg).filter(|&&u| u).count(),
        u_pos,
        u_neg,
        attack,
    };
    if outcome.overload_count as f64 != res.objective_value.round() {
        return Err(Error::ReplayMismatch("indicator count differs from objective".into()));
    }
    check_big_m(instance, &outcome, params)?;

    let replay = replay_attack(instance, &outcome.attack, params)?;
    if replay.overload_count != outcome.overload_count {
        return Err(Error::ReplayMismatch(format!(
            "adversary MILP reports {} overloads, replay finds {}",
            outcome.overload_count, replay.overload_count
        )));
    }
    Ok(outcome)
}

/// Fails when an optimal flow comes close enough to ±(F_l(1+ε) + M) that the
/// big-M constant could have cut off part of the feasible region.
pub fn check_big_m(instance: &Instance, outcome: &AttackOutcome, params: &AdversaryParams) -> Result<()> {
    let base = instance.base_mva();
    for ((br, thr), f) in instance
        .grid
        .branches()
        .iter()
        .zip(thresholds_pu(instance, params.epsilon))
        .zip(&outcome.flows)
    {
        let f = f.abs() / base;
        if f + thr >= params.big_m {
            return Err(Error::BigMBinding {
                big_m: params.big_m,
                branch: br.id.clone(),
                flow: f,
            });
        }
    }
    Ok(())
}

/// Evaluates an attack without a solver: frequency deviation from the net
/// load change, nodal injections, DC flows, and thresholding at F_l(1+ε)
/// (a branch at or above the threshold counts as overloaded).
pub fn replay_attack(instance: &Instance, attack: &AttackInstance, params: &AdversaryParams) -> Result<AttackOutcome> {
    let base = instance.base_mva();
    let mut injections = instance.base_injections_pu(params.coincidence)?;
    let mut net_total = 0.0;
    for (o, op) in instance.fleet.operators().iter().enumerate() {
        for j in 0..op.sites.len() {
            let net = (attack.l_pos[o][j] - attack.l_neg[o][j]) / base;
            injections[instance.site_bus(o, j)] -= net;
            net_total += net;
        }
    }
    let total_fcr = instance.total_fcr_pu();
    let freq_dev = if net_total == 0.0 {
        0.0
    } else if total_fcr > 0.0 {
        -net_total / total_fcr
    } else {
        return Err(Error::ZeroFcr);
    };
    for (g, k) in instance.fcr_gains.iter().enumerate() {
        injections[instance.grid.generator_bus(g)] -= k / base * freq_dev;
    }
    let net: f64 = injections.iter().sum();
    if net.abs() > crate::grid::BALANCE_TOL_PU {
        return Err(Error::UnbalancedInjections { net });
    }
    let (angles, flows_pu) = instance.matrices.solve_pu(&injections);
    let thresholds = thresholds_pu(instance, params.epsilon);
    let u_pos: Vec<bool> = flows_pu
        .iter()
        .zip(&thresholds)
        .map(|(f, t)| *f >= t - OVERLOAD_TOL_PU)
        .collect();
    let u_neg: Vec<bool> = flows_pu
        .iter()
        .zip(&thresholds)
        .map(|(f, t)| -*f >= t - OVERLOAD_TOL_PU)
        .collect();
    Ok(AttackOutcome {
        attack: attack.clone(),
        flows: flows_pu.iter().map(|f| f * base).collect(),
        angles,
        freq_dev,
        overload_count: u_pos.iter().chain(&u_neg).filter(|&&u| u).count(),
        u_pos,
        u_neg,
    })
}
