//! Brute-force references for tiny instances: exhaustive segmentation
//! enumeration, a lattice search over attacks, and defense by enumeration.

use itertools::Itertools;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversary::{replay_attack, solve_worst_case_attack, AdversaryParams, AttackInstance, AttackOutcome};
use crate::error::{Error, Result};
use crate::fleet::{FleetModel, OperatorSegmentation, Segmentation};
use crate::instance::Instance;
use crate::milp::SolverOptions;

pub const DEFAULT_ENUMERATION_CAP: u128 = 1_000_000;

/// Lattice search refuses more replays than this.
pub const LATTICE_CAP: u128 = 5_000_000;

/// All segmentations of one operator's `sites` buses into at most `slots`
/// segments on the 1/D grid, up to relabeling: multisets of nonzero columns
/// summing to (D, …, D), listed in non-increasing lexicographic order.
fn operator_segmentations(sites: usize, d: u32, slots: usize, cap: u128) -> Result<Vec<OperatorSegmentation>> {
    let mut columns: Vec<Vec<u32>> = (0..sites)
        .map(|_| 0..=d)
        .multi_cartesian_product()
        .filter(|c| c.iter().any(|&x| x > 0))
        .collect();
    columns.sort_unstable_by(|a, b| b.cmp(a));

    let mut out = Vec::new();
    let mut stack = Vec::new();
    fn recurse(
        columns: &[Vec<u32>],
        start: usize,
        remaining: &mut Vec<u32>,
        slots: usize,
        stack: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
        cap: u128,
    ) -> Result<()> {
        if remaining.iter().all(|&r| r == 0) {
            if out.len() as u128 >= cap {
                return Err(Error::TooLarge {
                    size: out.len() as u128 + 1,
                    cap,
                });
            }
            out.push(stack.clone());
            return Ok(());
        }
        if stack.len() == slots {
            return Ok(());
        }
        for (c, column) in columns.iter().enumerate().skip(start) {
            if column.iter().zip(remaining.iter()).all(|(x, r)| x <= r) {
                remaining.iter_mut().zip(column).for_each(|(r, x)| *r -= x);
                stack.push(c);
                recurse(columns, c, remaining, slots, stack, out, cap)?;
                stack.pop();
                remaining.iter_mut().zip(column).for_each(|(r, x)| *r += x);
            }
        }
        Ok(())
    }
    let mut picks = Vec::new();
    recurse(&columns, 0, &mut vec![d; sites], slots, &mut stack, &mut picks, cap)?;
    for pick in picks {
        let mut shares = vec![vec![0; slots]; sites];
        for (s, &c) in pick.iter().enumerate() {
            for j in 0..sites {
                shares[j][s] = columns[c][j];
            }
        }
        out.push(OperatorSegmentation {
            used: (0..slots).map(|s| s < pick.len().max(1)).collect(),
            shares,
        });
    }
    Ok(out)
}

/// Number of distinct segmentations of the fleet up to relabeling.
pub fn count_segmentations(fleet: &FleetModel, cap: u128) -> Result<u128> {
    let d = fleet.discretization();
    let mut total: u128 = 1;
    for op in fleet.operators() {
        let n = operator_segmentations(op.sites.len(), d, op.segment_slots(d), cap)?.len() as u128;
        total = total.saturating_mul(n);
        if total > cap {
            return Err(Error::TooLarge { size: total, cap });
        }
    }
    Ok(total)
}

/// Every distinct segmentation of the fleet up to relabeling of segments.
pub fn enumerate_segmentations(fleet: &FleetModel, cap: u128) -> Result<Vec<Segmentation>> {
    count_segmentations(fleet, cap)?;
    let d = fleet.discretization();
    let per_op: Vec<Vec<OperatorSegmentation>> = fleet
        .operators()
        .iter()
        .map(|op| operator_segmentations(op.sites.len(), d, op.segment_slots(d), cap))
        .collect::<Result<_>>()?;
    let mut out = vec![Vec::new()];
    for options in per_op {
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<OperatorSegmentation>| {
                options.iter().map(move |os| {
                    let mut p = prefix.clone();
                    p.push(os.clone());
                    p
                })
            })
            .collect();
    }
    Ok(out
        .into_iter()
        .map(|operators| Segmentation {
            denominator: d,
            operators,
        })
        .collect())
}

/// Keeps |Σ net| within `limit` by shrinking the side that overshoots.
fn project_net(net: &mut [f64], limit: f64) {
    let pos: f64 = net.iter().filter(|&&x| x > 0.0).sum();
    let neg: f64 = net.iter().filter(|&&x| x < 0.0).sum();
    let total = pos + neg;
    if total > limit {
        let t = (limit - neg) / pos;
        net.iter_mut().filter(|x| **x > 0.0).for_each(|x| *x *= t);
    } else if total < -limit {
        let t = (-limit - pos) / neg;
        net.iter_mut().filter(|x| **x < 0.0).for_each(|x| *x *= t);
    }
}

/// Enumerates hacked-segment subsets within the budget and, for each, a grid
/// of per-site net load changes with `levels` points on each of the l_pos and
/// l_neg bounds. Only the net change at a site affects the grid, so one of
/// l_pos, l_neg is always zero. Every candidate is a valid attack, so the
/// best replayed overload count is a lower bound on the adversary optimum.
pub fn lattice_attack_search(
    instance: &Instance,
    seg: &Segmentation,
    params: &AdversaryParams,
    levels: usize,
) -> Result<AttackOutcome> {
    if !(2..=5).contains(&levels) {
        return Err(Error::MalformedModel("levels must lie in 2..=5".into()));
    }
    let ops = instance.fleet.operators();
    let targets: Vec<(usize, usize)> = ops
        .iter()
        .enumerate()
        .filter(|(_, op)| op.hackable)
        .flat_map(|(o, _)| {
            let os = &seg.operators[o];
            (0..os.slots())
                .filter(move |&s| os.shares.iter().any(|row| row[s] > 0))
                .map(move |s| (o, s))
        })
        .collect();
    let sites: Vec<(usize, usize)> = ops
        .iter()
        .enumerate()
        .filter(|(_, op)| op.hackable)
        .flat_map(|(o, op)| (0..op.sites.len()).map(move |j| (o, j)))
        .collect();
    if targets.len() > 12 || sites.len() > 8 {
        return Err(Error::TooLarge {
            size: targets.len().max(sites.len()) as u128,
            cap: 12,
        });
    }
    let budget = (params.hack_budget as usize).min(targets.len());
    let subsets: Vec<Vec<usize>> = (0..=budget).flat_map(|k| (0..targets.len()).combinations(k)).collect();
    let per_site = (2 * levels - 1) as u128;
    let size = subsets.len() as u128 * per_site.saturating_pow(sites.len() as u32);
    if size > LATTICE_CAP {
        return Err(Error::TooLarge { size, cap: LATTICE_CAP });
    }

    let empty = AttackInstance::none(instance, seg);
    let best = subsets
        .par_iter()
        .map(|subset| -> Result<Option<AttackOutcome>> {
            let mut attack = empty.clone();
            for &t in subset {
                let (o, s) = targets[t];
                attack.hacked[o][s] = true;
            }
            // candidate net changes per site, in MW
            let choices: Vec<Vec<f64>> = sites
                .iter()
                .map(|&(o, j)| {
                    let frac = seg.hacked_fraction(o, j, &attack.hacked[o]);
                    let cap = ops[o].sites[j].capacity * frac;
                    let mut v = vec![0.0];
                    for i in 1..levels {
                        let step = i as f64 / (levels - 1) as f64;
                        if params.pos_rate() > 0.0 && cap > 0.0 {
                            v.push(cap * params.pos_rate() * step);
                        }
                        if params.neg_rate() > 0.0 && cap > 0.0 {
                            v.push(-cap * params.neg_rate() * step);
                        }
                    }
                    v
                })
                .collect();
            let mut best: Option<AttackOutcome> = None;
            for combo in choices.iter().map(|c| c.iter().copied()).multi_cartesian_product() {
                let mut net = combo;
                project_net(&mut net, params.laa_max);
                for (&(o, j), &x) in sites.iter().zip(&net) {
                    attack.l_pos[o][j] = x.max(0.0);
                    attack.l_neg[o][j] = (-x).max(0.0);
                }
                let out = replay_attack(instance, &attack, params)?;
                if best.as_ref().map_or(true, |b| out.overload_count > b.overload_count) {
                    best = Some(out);
                }
            }
            if sites.is_empty() {
                best = Some(replay_attack(instance, &attack, params)?);
            }
            Ok(best)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .fold(None::<AttackOutcome>, |acc, out| match acc {
            Some(a) if a.overload_count >= out.overload_count => Some(a),
            _ => Some(out),
        });
    best.map_or_else(|| replay_attack(instance, &empty, params), Ok)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BruteForceResult {
    /// Cheapest safe segmentation, `None` if no segmentation is safe.
    pub segmentation: Option<Segmentation>,
    pub segments_used: Option<usize>,
    pub evaluated: usize,
}

/// Minimum-segment defense by enumeration: candidates are evaluated with the
/// sub-problem in order of segment count and the first one with at most `k`
/// worst-case overloads is returned. Within a segment count the first safe
/// candidate in enumeration order wins.
pub fn brute_force_defense(
    instance: &Instance,
    k: u32,
    params: &AdversaryParams,
    opts: &SolverOptions,
    cap: u128,
) -> Result<BruteForceResult> {
    let mut all = enumerate_segmentations(&instance.fleet, cap)?;
    all.sort_by_key(Segmentation::segments_used);
    let mut evaluated = 0;
    for group in all.chunk_by(|a, b| a.segments_used() == b.segments_used()) {
        let found = group
            .par_iter()
            .map(|seg| solve_worst_case_attack(instance, seg, params, opts).map(|o| o.overload_count <= k as usize))
            .collect::<Result<Vec<bool>>>()?;
        evaluated += group.len();
        if let Some(pos) = found.iter().position(|&ok| ok) {
            let seg = group[pos].clone();
            return Ok(BruteForceResult {
                segments_used: Some(seg.segments_used()),
                segmentation: Some(seg),
                evaluated,
            });
        }
    }
    Ok(BruteForceResult {
        segmentation: None,
        segments_used: None,
        evaluated,
    })
}
