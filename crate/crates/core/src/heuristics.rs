//! Heuristic segmentation schemes: uniform thresholding, balanced
//! clustering, and iterative informed splitting of hacked segments.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversary::{solve_worst_case_attack, AdversaryParams, AttackOutcome};
use crate::error::{Error, Result};
use crate::fleet::{minimal_segmentation, FleetModel, OperatorSegmentation, Segmentation};
use crate::grid::electrical_distances;
use crate::instance::Instance;
use crate::milp::{self, ModelSpec, ObjectiveSense, RowSense, SolveStatus, SolverOptions, VarId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    UniThres,
    ClusSeg,
    ItinThres,
    ItinClus,
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uni_thres" => Ok(Scheme::UniThres),
            "clus_seg" => Ok(Scheme::ClusSeg),
            "itin_thres" => Ok(Scheme::ItinThres),
            "itin_clus" => Ok(Scheme::ItinClus),
            other => Err(Error::Parse(format!("unknown heuristic scheme '{other}'"))),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::UniThres => "uni_thres",
            Scheme::ClusSeg => "clus_seg",
            Scheme::ItinThres => "itin_thres",
            Scheme::ItinClus => "itin_clus",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeuristicSpec {
    pub scheme: Scheme,
    /// Capacity per segment in MW (uni_thres).
    pub cs: Option<f64>,
    /// Segments per operator (clus_seg) or parts per split (itin_*).
    pub ks: usize,
    pub lambda: f64,
    pub max_iterations: usize,
}

impl HeuristicSpec {
    pub fn new(scheme: Scheme) -> Self {
        HeuristicSpec {
            scheme,
            cs: None,
            ks: 2,
            lambda: 1e5,
            max_iterations: 10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.scheme == Scheme::UniThres && !self.cs.is_some_and(|cs| cs > 0.0) {
            return Err(Error::Parse("uni_thres needs a positive capacity per segment".into()));
        }
        if self.ks == 0 || !(self.lambda >= 0.0) {
            return Err(Error::Parse("ks must be >= 1 and lambda >= 0".into()));
        }
        Ok(())
    }
}

/// Splits `total` units into `parts` integers differing by at most one. The
/// larger parts start at `offset` and wrap around.
fn even_split(total: u32, parts: usize, offset: usize) -> Vec<u32> {
    let q = total / parts as u32;
    let r = total as usize % parts;
    let mut out = vec![q; parts];
    for t in 0..r {
        out[(offset + t) % parts] += 1;
    }
    out
}

/// Uniform thresholding: each hackable operator gets ceil(total / cs)
/// segments and every site is spread evenly over them on the 1/D grid.
/// Non-hackable operators keep a single segment.
pub fn uni_thres(fleet: &FleetModel, cs: f64) -> Result<Segmentation> {
    if !(cs > 0.0) {
        return Err(Error::Parse("capacity per segment must be positive".into()));
    }
    let d = fleet.discretization();
    let mut seg = minimal_segmentation(fleet);
    for (op, os) in fleet.operators().iter().zip(seg.operators.iter_mut()) {
        if !op.hackable {
            continue;
        }
        let m = ((op.total_capacity() / cs) - 1e-9).ceil().max(1.0) as usize;
        let slots = op.segment_slots(d);
        if m > slots {
            return Err(Error::SegmentLimit {
                operator: op.id.clone(),
                needed: m,
                available: slots,
            });
        }
        if (d as usize) < m {
            return Err(Error::GridTooCoarse {
                denominator: d,
                parts: m,
            });
        }
        for (j, row) in os.shares.iter_mut().enumerate() {
            let parts = even_split(d, m, j * (d as usize % m));
            row.iter_mut().for_each(|x| *x = 0);
            row[..m].copy_from_slice(&parts);
        }
        os.used = (0..slots).map(|s| s < m).collect();
    }
    Ok(seg)
}

/// Capacitated clustering of sites into at most `ks` bus-atomic groups:
/// minimize intra-cluster electrical distance plus `lambda` times the largest
/// deviation of a cluster's capacity from the mean. Returns a label per site.
pub fn cluster_sites(
    distances: &[Vec<f64>],
    capacities: &[f64],
    ks: usize,
    lambda: f64,
    opts: &SolverOptions,
) -> Result<Vec<usize>> {
    let n = capacities.len();
    let ks = ks.min(n).max(1);
    if ks == 1 {
        return Ok(vec![0; n]);
    }
    let mut model = ModelSpec::new("clustering", ObjectiveSense::Minimize);
    let y: Vec<Vec<VarId>> = (0..n)
        .map(|i| (0..ks).map(|s| model.binary(format!("y[{i},{s}]"))).collect())
        .collect();
    let kappa = model.continuous("kappa", 0.0, f64::INFINITY);
    let mut objective = vec![(kappa, lambda)];
    for (i, row) in y.iter().enumerate() {
        model.add_constraint(
            format!("one[{i}]"),
            row.iter().map(|&v| (v, 1.0)).collect(),
            RowSense::Eq,
            1.0,
        );
    }
    // Site 0 goes to cluster 0; removes one relabeling symmetry.
    model.add_constraint("anchor", vec![(y[0][0], 1.0)], RowSense::Eq, 1.0);
    for i in 0..n {
        for k in i + 1..n {
            let dist = distances[i][k];
            if dist == 0.0 {
                continue;
            }
            for s in 0..ks {
                let z = model.continuous(format!("z[{i},{k},{s}]"), 0.0, 1.0);
                model.add_constraint(
                    format!("z_lo[{i},{k},{s}]"),
                    vec![(z, 1.0), (y[i][s], -1.0), (y[k][s], -1.0)],
                    RowSense::Ge,
                    -1.0,
                );
                model.add_constraint(
                    format!("z_hi1[{i},{k},{s}]"),
                    vec![(z, 1.0), (y[i][s], -1.0)],
                    RowSense::Le,
                    0.0,
                );
                model.add_constraint(
                    format!("z_hi2[{i},{k},{s}]"),
                    vec![(z, 1.0), (y[k][s], -1.0)],
                    RowSense::Le,
                    0.0,
                );
                objective.push((z, 2.0 * dist));
            }
        }
    }
    let mean = capacities.iter().sum::<f64>() / ks as f64;
    for s in 0..ks {
        let mut hi: Vec<(VarId, f64)> = (0..n).map(|i| (y[i][s], capacities[i])).collect();
        let mut lo: Vec<(VarId, f64)> = hi.iter().map(|&(v, c)| (v, -c)).collect();
        hi.push((kappa, -1.0));
        lo.push((kappa, -1.0));
        model.add_constraint(format!("balance_hi[{s}]"), hi, RowSense::Le, mean);
        model.add_constraint(format!("balance_lo[{s}]"), lo, RowSense::Le, -mean);
    }
    model.set_objective(objective);
    let res = milp::solve(&model, opts)?;
    if res.status != SolveStatus::Optimal {
        return Err(Error::SolverFailure(format!("clustering status {:?}", res.status)));
    }
    Ok(y.iter()
        .map(|row| {
            row.iter()
                .position(|&v| res.value(v) > 0.5)
                .expect("one cluster per site")
        })
        .collect())
}

fn site_distances(instance: &Instance, buses: &[usize]) -> Vec<Vec<f64>> {
    let full = electrical_distances(&instance.matrices);
    buses
        .iter()
        .map(|&a| buses.iter().map(|&b| full[(a, b)]).collect())
        .collect()
}

/// Balanced clustering: each hackable operator's sites are grouped into `ks`
/// bus-atomic segments. Capacities enter in p.u.
pub fn balanced_clustering(instance: &Instance, ks: usize, lambda: f64, opts: &SolverOptions) -> Result<Segmentation> {
    let fleet = &instance.fleet;
    let d = fleet.discretization();
    let mut seg = minimal_segmentation(fleet);
    let labels: Vec<Option<Vec<usize>>> = fleet
        .operators()
        .par_iter()
        .enumerate()
        .map(|(o, op)| {
            if !op.hackable || op.sites.len() < 2 || ks < 2 {
                return Ok(None);
            }
            let buses: Vec<usize> = (0..op.sites.len()).map(|j| instance.site_bus(o, j)).collect();
            let caps: Vec<f64> = op.sites.iter().map(|s| s.capacity / instance.base_mva()).collect();
            cluster_sites(&site_distances(instance, &buses), &caps, ks, lambda, opts).map(Some)
        })
        .collect::<Result<_>>()?;
    for ((op, os), labels) in fleet.operators().iter().zip(seg.operators.iter_mut()).zip(labels) {
        let Some(labels) = labels else { continue };
        let slots = op.segment_slots(d);
        let needed = labels.iter().max().map_or(1, |m| m + 1);
        if needed > slots {
            return Err(Error::SegmentLimit {
                operator: op.id.clone(),
                needed,
                available: slots,
            });
        }
        for (row, &c) in os.shares.iter_mut().zip(&labels) {
            row.iter_mut().for_each(|x| *x = 0);
            row[c] = d;
        }
        os.used = vec![true; slots];
        os.compact(slots);
    }
    Ok(seg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeuristicStep {
    pub iteration: usize,
    pub segments_used: usize,
    pub overloads: usize,
    /// Segments hacked by the worst case at this step.
    pub hacked_segments: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeuristicResult {
    pub segmentation: Segmentation,
    pub segments_used: usize,
    /// False when the iteration limit was reached, or no hacked segment could
    /// be split further, with more than K overloads left.
    pub converged: bool,
    pub trace: Vec<HeuristicStep>,
    /// Worst case for the returned segmentation, when it was evaluated.
    pub worst_case: Option<AttackOutcome>,
}

/// Splits hacked segment `s` of one operator into up to `ks` parts, using
/// free slots for the new parts. Returns false if nothing could be split.
fn split_segment(
    instance: &Instance,
    o: usize,
    os: &mut OperatorSegmentation,
    s: usize,
    spec: &HeuristicSpec,
    cluster: bool,
    opts: &SolverOptions,
) -> Result<bool> {
    let op = &instance.fleet.operators()[o];
    let members: Vec<usize> = (0..os.shares.len()).filter(|&j| os.shares[j][s] > 0).collect();
    let free: Vec<usize> = (0..os.slots())
        .filter(|&t| !os.used[t] && os.segment_column(t).iter().all(|&x| x == 0))
        .collect();

    let mut targets = vec![s];
    let mut moves: Vec<(usize, Vec<u32>)> = Vec::new();
    if cluster && members.len() >= 2 {
        let buses: Vec<usize> = members.iter().map(|&j| instance.site_bus(o, j)).collect();
        let d = instance.fleet.discretization() as f64;
        let caps: Vec<f64> = members
            .iter()
            .map(|&j| op.sites[j].capacity * os.shares[j][s] as f64 / d / instance.base_mva())
            .collect();
        let labels = cluster_sites(&site_distances(instance, &buses), &caps, spec.ks, spec.lambda, opts)?;
        let parts = labels.iter().max().map_or(1, |m| m + 1);
        for &j in &members {
            let mut split = vec![0; parts];
            split[labels[members.iter().position(|&m| m == j).unwrap()]] = os.shares[j][s];
            moves.push((j, split));
        }
    } else {
        for (k, &j) in members.iter().enumerate() {
            moves.push((j, even_split(os.shares[j][s], spec.ks, k)));
        }
    }
    let parts = moves.iter().map(|(_, p)| p.len()).max().unwrap_or(1);
    let nonempty: Vec<usize> = (0..parts).filter(|&p| moves.iter().any(|(_, v)| v[p] > 0)).collect();
    if nonempty.len() < 2 {
        return Ok(false);
    }
    if free.len() < nonempty.len() - 1 {
        return Err(Error::SegmentLimit {
            operator: op.id.clone(),
            needed: os.segments_used() + nonempty.len() - 1,
            available: os.slots(),
        });
    }
    targets.extend(free.iter().take(nonempty.len() - 1));
    for (j, split) in moves {
        os.shares[j][s] = 0;
        for (t, &p) in targets.iter().zip(&nonempty) {
            os.shares[j][*t] += split[p];
        }
    }
    for &t in &targets {
        os.used[t] = true;
    }
    Ok(true)
}

/// Iterative informed segmentation: starting from the minimal segmentation,
/// repeatedly solve the worst-case attack and split every hacked segment
/// into `ks` parts, uniformly per site (`cluster = false`) or by clustering
/// the segment's sites (`cluster = true`), until at most `k` overloads remain.
pub fn iterative_informed(
    instance: &Instance,
    params: &AdversaryParams,
    spec: &HeuristicSpec,
    k: u32,
    cluster: bool,
    opts: &SolverOptions,
) -> Result<HeuristicResult> {
    if params.epsilon <= 0.0 {
        return Err(Error::MalformedModel("iterative schemes require epsilon > 0".into()));
    }
    let mut seg = minimal_segmentation(&instance.fleet);
    let mut trace = Vec::new();
    for iteration in 0..=spec.max_iterations {
        let outcome = solve_worst_case_attack(instance, &seg, params, opts)?;
        trace.push(HeuristicStep {
            iteration,
            segments_used: seg.segments_used(),
            overloads: outcome.overload_count,
            hacked_segments: outcome.attack.hacked_count(),
        });
        log::info!(
            "itin iteration {iteration}: {} segments, {} overloads",
            seg.segments_used(),
            outcome.overload_count
        );
        let done = |seg: Segmentation, converged| HeuristicResult {
            segments_used: seg.segments_used(),
            segmentation: seg,
            converged,
            trace: trace.clone(),
            worst_case: Some(outcome.clone()),
        };
        if outcome.overload_count <= k as usize {
            return Ok(done(seg, true));
        }
        if iteration == spec.max_iterations {
            return Ok(done(seg, false));
        }
        let mut progressed = false;
        for (o, hacked) in outcome.attack.hacked.iter().enumerate() {
            for (s, _) in hacked.iter().enumerate().filter(|(_, &h)| h) {
                progressed |= split_segment(instance, o, &mut seg.operators[o], s, spec, cluster, opts)?;
            }
        }
        if !progressed {
            log::warn!(
                "no hacked segment can be split further on the 1/{} grid",
                seg.denominator
            );
            return Ok(done(seg, false));
        }
    }
    unreachable!("loop returns on its last iteration")
}

/// Runs any of the four schemes. Non-iterative schemes are evaluated once
/// with the sub-problem so the result carries its worst case.
pub fn run_heuristic(
    instance: &Instance,
    params: &AdversaryParams,
    spec: &HeuristicSpec,
    k: u32,
    opts: &SolverOptions,
) -> Result<HeuristicResult> {
    spec.validate()?;
    let seg = match spec.scheme {
        Scheme::ItinThres => return iterative_informed(instance, params, spec, k, false, opts),
        Scheme::ItinClus => return iterative_informed(instance, params, spec, k, true, opts),
        Scheme::UniThres => uni_thres(&instance.fleet, spec.cs.expect("validated"))?,
        Scheme::ClusSeg => balanced_clustering(instance, spec.ks, spec.lambda, opts)?,
    };
    let outcome = solve_worst_case_attack(instance, &seg, params, opts)?;
    Ok(HeuristicResult {
        segments_used: seg.segments_used(),
        converged: outcome.overload_count <= k as usize,
        trace: vec![HeuristicStep {
            iteration: 0,
            segments_used: seg.segments_used(),
            overloads: outcome.overload_count,
            hacked_segments: outcome.attack.hacked_count(),
        }],
        segmentation: seg,
        worst_case: Some(outcome),
    })
}
