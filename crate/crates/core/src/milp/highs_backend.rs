use highs::{HighsModelStatus, HighsSolutionStatus, RowProblem, Sense};

use super::{ModelSpec, ObjectiveSense, RowSense, SolveResult, SolveStatus, SolverOptions, VarKind};
use crate::error::{Error, Result};

pub(super) fn solve(model: &ModelSpec, opts: &SolverOptions) -> Result<SolveResult> {
    if model.variables.is_empty() {
        let feasible = model.constraints.iter().all(|c| match c.sense {
            RowSense::Le => 0.0 <= c.rhs,
            RowSense::Ge => 0.0 >= c.rhs,
            RowSense::Eq => c.rhs == 0.0,
        });
        return Ok(SolveResult {
            status: if feasible {
                SolveStatus::Optimal
            } else {
                SolveStatus::Infeasible
            },
            objective_value: model.objective.constant,
            values: feasible.then(Vec::new),
            gap: 0.0,
            runtime: 0.0,
        });
    }

    let mut costs = vec![0.0; model.variables.len()];
    for &(id, c) in &model.objective.terms {
        costs[id.0] += c;
    }

    let mut pb = RowProblem::new();
    let cols: Vec<_> = model
        .variables
        .iter()
        .zip(&costs)
        .map(|(v, &c)| pb.add_column_with_integrality(c, v.lower..=v.upper, v.kind != VarKind::Continuous))
        .collect();
    for row in &model.constraints {
        let terms: Vec<_> = row.terms.iter().map(|&(id, c)| (cols[id.0], c)).collect();
        match row.sense {
            RowSense::Le => pb.add_row(f64::NEG_INFINITY..=row.rhs, terms),
            RowSense::Ge => pb.add_row(row.rhs..=f64::INFINITY, terms),
            RowSense::Eq => pb.add_row(row.rhs..=row.rhs, terms),
        }
    }

    let sense = match model.objective.sense {
        ObjectiveSense::Minimize => Sense::Minimise,
        ObjectiveSense::Maximize => Sense::Maximise,
    };
    let mut hm = pb
        .try_optimise(sense)
        .map_err(|s| Error::SolverFailure(format!("HiGHS rejected model {}: {s:?}", model.name)))?;
    hm.make_quiet();
    hm.set_option("output_flag", false);
    hm.set_option("mip_rel_gap", opts.mip_gap);
    hm.set_option("primal_feasibility_tolerance", opts.feasibility_tol);
    hm.set_option("mip_feasibility_tolerance", opts.feasibility_tol);
    if let Some(t) = opts.time_limit {
        hm.set_option("time_limit", t.max(0.0));
    }

    let solved = hm
        .try_solve()
        .map_err(|s| Error::SolverFailure(format!("HiGHS failed on {}: {s:?}", model.name)))?;
    let has_point = solved.primal_solution_status() == HighsSolutionStatus::Feasible;
    let status = match solved.status() {
        HighsModelStatus::Optimal => SolveStatus::Optimal,
        HighsModelStatus::Infeasible => SolveStatus::Infeasible,
        HighsModelStatus::Unbounded | HighsModelStatus::UnboundedOrInfeasible => SolveStatus::Unbounded,
        HighsModelStatus::ReachedTimeLimit => SolveStatus::TimeLimit,
        other => {
            return Err(Error::SolverFailure(format!(
                "HiGHS returned {other:?} on {}",
                model.name
            )))
        }
    };
    let keep_values = match status {
        SolveStatus::Optimal | SolveStatus::GapLimit => true,
        SolveStatus::TimeLimit => has_point,
        _ => false,
    };
    let gap = if model.is_mip() { solved.mip_gap() } else { 0.0 };
    let values = keep_values.then(|| solved.get_solution().columns().to_vec());
    Ok(SolveResult {
        status,
        objective_value: solved.objective_value() + model.objective.constant,
        values,
        gap: if gap.is_finite() { gap } else { 0.0 },
        runtime: 0.0,
    })
}
