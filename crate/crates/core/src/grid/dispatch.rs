use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{build_network_matrices, GridCase};
use crate::error::{Error, Result};
use crate::milp::{self, ModelSpec, ObjectiveSense, RowSense, SolveStatus, SolverOptions};

/// Result of the DC-OPF economic dispatch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dispatch {
    /// Per generator, MW, in case order.
    pub generation: Vec<f64>,
    /// Per branch, MW.
    pub flows: Vec<f64>,
    /// Currency per hour.
    pub cost: f64,
}

impl Dispatch {
    pub fn total(&self) -> f64 {
        self.generation.iter().sum()
    }
}

/// Least-cost dispatch meeting `fixed_load` (MW per bus) under DC flow and PATL limits.
pub fn economic_dispatch(grid: &GridCase, fixed_load: &[f64], opts: &SolverOptions) -> Result<Dispatch> {
    let n = grid.buses().len();
    assert_eq!(fixed_load.len(), n, "one load value per bus");
    let base = grid.base_mva();
    let matrices = build_network_matrices(grid)?;

    let available: f64 = grid.generators().iter().map(|g| g.p_max * g.availability).sum();
    let must_run: f64 = grid.generators().iter().map(|g| g.p_min * g.availability).sum();
    let load: f64 = fixed_load.iter().sum();
    if available < load - 1e-9 || must_run > load + 1e-9 {
        return Err(Error::InfeasibleDispatch(format!(
            "load {load:.1} MW outside generation range [{must_run:.1}, {available:.1}] MW"
        )));
    }

    let mut model = ModelSpec::new("economic_dispatch", ObjectiveSense::Minimize);
    let gen_vars: Vec<_> = grid
        .generators()
        .iter()
        .map(|g| {
            model.continuous(
                format!("pg[{}]", g.id),
                g.p_min * g.availability / base,
                g.p_max * g.availability / base,
            )
        })
        .collect();
    let theta: Vec<_> = grid
        .buses()
        .iter()
        .enumerate()
        .map(|(i, b)| {
            if i == grid.reference_bus() {
                model.continuous(format!("theta[{}]", b.id), 0.0, 0.0)
            } else {
                model.free(format!("theta[{}]", b.id))
            }
        })
        .collect();
    let flow: Vec<_> = grid
        .branches()
        .iter()
        .map(|br| model.continuous(format!("f[{}]", br.id), -br.rating_patl / base, br.rating_patl / base))
        .collect();

    for (l, br) in grid.branches().iter().enumerate() {
        let (from, to) = grid.branch_ends(l);
        model.add_constraint(
            format!("dc_flow[{}]", br.id),
            vec![
                (flow[l], 1.0),
                (theta[from], -br.susceptance),
                (theta[to], br.susceptance),
            ],
            RowSense::Eq,
            0.0,
        );
    }
    let mut terms_at: Vec<Vec<_>> = vec![Vec::new(); n];
    for (g, &v) in gen_vars.iter().enumerate() {
        terms_at[grid.generator_bus(g)].push((v, 1.0));
    }
    for l in 0..grid.branches().len() {
        let (from, to) = grid.branch_ends(l);
        terms_at[from].push((flow[l], -1.0));
        terms_at[to].push((flow[l], 1.0));
    }
    for (i, terms) in terms_at.into_iter().enumerate() {
        model.add_constraint(
            format!("balance[{}]", grid.buses()[i].id),
            terms,
            RowSense::Eq,
            fixed_load[i] / base,
        );
    }
    model.set_objective(
        grid.generators()
            .iter()
            .zip(&gen_vars)
            .map(|(g, &v)| (v, g.marginal_cost * base))
            .collect(),
    );

    let result = milp::solve(&model, opts)?;
    if result.status != SolveStatus::Optimal {
        return Err(Error::InfeasibleDispatch(format!("LP status {:?}", result.status)));
    }

    let mut generation: Vec<f64> = grid
        .generators()
        .iter()
        .zip(&gen_vars)
        .map(|(g, &v)| (result.value(v) * base).clamp(g.p_min * g.availability, g.p_max * g.availability))
        .collect();
    canonicalize_ties(grid, &mut generation);

    let mut injections: Vec<f64> = fixed_load.iter().map(|l| -l).collect();
    for (g, p) in generation.iter().enumerate() {
        injections[grid.generator_bus(g)] += p;
    }
    // Absorb solver round-off at the reference bus so the result balances exactly.
    let residual: f64 = injections.iter().sum();
    injections[grid.reference_bus()] -= residual;
    let (_, flows) = matrices.solve_pu(&injections.iter().map(|p| p / base).collect::<Vec<_>>());
    let flows: Vec<f64> = flows.into_iter().map(|f| f * base).collect();
    for (br, f) in grid.branches().iter().zip(&flows) {
        if f.abs() > br.rating_patl * (1.0 + 1e-6) + 1e-6 {
            return Err(Error::ReplayMismatch(format!(
                "dispatch flow {f:.4} MW exceeds PATL {} on branch {}",
                br.rating_patl, br.id
            )));
        }
    }
    if residual.abs() > 1e-6 * base {
        return Err(Error::ReplayMismatch(format!(
            "dispatch leaves {residual:.3e} MW unbalanced"
        )));
    }
    let cost = grid
        .generators()
        .iter()
        .zip(&generation)
        .map(|(g, p)| g.marginal_cost * p)
        .sum();
    Ok(Dispatch {
        generation,
        flows,
        cost,
    })
}

/// Identical units at the same bus are interchangeable; split their total evenly
/// so the output does not depend on how the LP broke the tie.
fn canonicalize_ties(grid: &GridCase, generation: &mut [f64]) {
    let mut groups: HashMap<(usize, u64, u64, u64), Vec<usize>> = HashMap::new();
    for (i, g) in grid.generators().iter().enumerate() {
        let key = (
            grid.generator_bus(i),
            g.marginal_cost.to_bits(),
            (g.p_min * g.availability).to_bits(),
            (g.p_max * g.availability).to_bits(),
        );
        groups.entry(key).or_default().push(i);
    }
    for members in groups.values().filter(|m| m.len() > 1) {
        let share = members.iter().map(|&i| generation[i]).sum::<f64>() / members.len() as f64;
        for &i in members {
            generation[i] = share;
        }
    }
}

/// FCR gains proportional to the scheduled output, with constant 1 (MW per unit deviation).
pub fn fcr_gains_from_dispatch(dispatch: &[f64]) -> Result<Vec<f64>> {
    if dispatch.iter().all(|&p| p <= 0.0) {
        return Err(Error::ZeroFcr);
    }
    Ok(dispatch.iter().map(|&p| p.max(0.0)).collect())
}
