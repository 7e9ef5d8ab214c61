//! Solver-agnostic LP/MILP models.
//!
//! Models are assembled as a [`ModelSpec`], handed to a backend through
//! [`solve`], and every returned point is re-checked against the model by an
//! evaluator that does not touch the backend.

mod highs_backend;
mod lp_format;

use std::collections::HashSet;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarKind {
    Continuous,
    Binary,
    Integer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowSense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub sense: RowSense,
    pub rhs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveSense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub sense: ObjectiveSense,
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

/// A linear model with named variables and constraints, in insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub name: String,
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    pub objective: Objective,
}

impl ModelSpec {
    pub fn new(name: impl Into<String>, sense: ObjectiveSense) -> Self {
        ModelSpec {
            name: name.into(),
            variables: Vec::new(),
            constraints: Vec::new(),
            objective: Objective {
                sense,
                terms: Vec::new(),
                constant: 0.0,
            },
        }
    }

    pub fn add_var(&mut self, name: impl Into<String>, kind: VarKind, lower: f64, upper: f64) -> VarId {
        let (lower, upper) = match kind {
            VarKind::Binary => (lower.max(0.0), upper.min(1.0)),
            _ => (lower, upper),
        };
        self.variables.push(Variable {
            name: name.into(),
            kind,
            lower,
            upper,
        });
        VarId(self.variables.len() - 1)
    }

    pub fn continuous(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> VarId {
        self.add_var(name, VarKind::Continuous, lower, upper)
    }

    pub fn free(&mut self, name: impl Into<String>) -> VarId {
        self.add_var(name, VarKind::Continuous, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn binary(&mut self, name: impl Into<String>) -> VarId {
        self.add_var(name, VarKind::Binary, 0.0, 1.0)
    }

    pub fn integer(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> VarId {
        self.add_var(name, VarKind::Integer, lower, upper)
    }

    pub fn add_constraint(&mut self, name: impl Into<String>, terms: Vec<(VarId, f64)>, sense: RowSense, rhs: f64) {
        self.constraints.push(Constraint {
            name: name.into(),
            terms: merge_terms(terms),
            sense,
            rhs,
        });
    }

    pub fn set_objective(&mut self, terms: Vec<(VarId, f64)>) {
        self.objective.terms = merge_terms(terms);
    }

    pub fn var(&self, id: VarId) -> &Variable {
        &self.variables[id.0]
    }

    pub fn is_mip(&self) -> bool {
        self.variables.iter().any(|v| v.kind != VarKind::Continuous)
    }

    /// Checks the structural invariants: unique names, known variables,
    /// finite bounds on integer variables, finite coefficients.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::MalformedModel(msg));
        let mut names = HashSet::with_capacity(self.variables.len());
        for v in &self.variables {
            if !names.insert(v.name.as_str()) {
                return bad(format!("duplicate variable name {}", v.name));
            }
            if v.lower > v.upper || v.lower.is_nan() || v.upper.is_nan() {
                return bad(format!("variable {} has empty bounds", v.name));
            }
            if v.kind != VarKind::Continuous && !(v.lower.is_finite() && v.upper.is_finite()) {
                return bad(format!("integer variable {} has infinite bounds", v.name));
            }
        }
        let n = self.variables.len();
        let check_terms = |what: &str, terms: &[(VarId, f64)]| -> Result<()> {
            for &(id, c) in terms {
                if id.0 >= n {
                    return bad(format!("{what} references undeclared variable #{}", id.0));
                }
                if !c.is_finite() {
                    return bad(format!("{what} has a non-finite coefficient"));
                }
            }
            Ok(())
        };
        let mut row_names = HashSet::with_capacity(self.constraints.len());
        for c in &self.constraints {
            if !row_names.insert(c.name.as_str()) {
                return bad(format!("duplicate constraint name {}", c.name));
            }
            if !c.rhs.is_finite() {
                return bad(format!("constraint {} has a non-finite rhs", c.name));
            }
            check_terms(&c.name, &c.terms)?;
        }
        check_terms("objective", &self.objective.terms)
    }

    pub fn objective_at(&self, values: &[f64]) -> f64 {
        self.objective.constant
            + self
                .objective
                .terms
                .iter()
                .map(|&(id, c)| c * values[id.0])
                .sum::<f64>()
    }

    /// Writes the model in CPLEX LP text format.
    pub fn to_lp_string(&self) -> String {
        lp_format::write(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Stopped at a gap limit above the requested one (not produced by HiGHS,
    /// which reports such runs as optimal within `mip_rel_gap`).
    GapLimit,
    TimeLimit,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub objective_value: f64,
    /// Indexed by [`VarId`]; integer variables are rounded to integers.
    pub values: Option<Vec<f64>>,
    pub gap: f64,
    pub runtime: f64,
}

impl SolveResult {
    pub fn value(&self, id: VarId) -> f64 {
        self.values.as_ref().expect("solve result carries values")[id.0]
    }

    pub fn value_by_name(&self, model: &ModelSpec, name: &str) -> Option<f64> {
        let idx = model.variables.iter().position(|v| v.name == name)?;
        self.values.as_ref().map(|v| v[idx])
    }

    pub fn has_values(&self) -> bool {
        self.values.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Highs,
}

impl FromStr for BackendKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "" | "highs" => Ok(BackendKind::Highs),
            other => Err(Error::BackendUnavailable(other.to_string())),
        }
    }
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackendKind::Highs => f.write_str("highs"),
        }
    }
}

impl BackendKind {
    /// Reads `GRIDSEG_SOLVER`, defaulting to HiGHS when unset.
    pub fn from_env() -> Result<Self> {
        match std::env::var("GRIDSEG_SOLVER") {
            Ok(v) => v.parse(),
            Err(_) => Ok(BackendKind::Highs),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub backend: BackendKind,
    /// Relative MIP gap.
    pub mip_gap: f64,
    /// Seconds.
    pub time_limit: Option<f64>,
    pub feasibility_tol: f64,
    /// When set, each model is written here in LP format before solving.
    pub dump_dir: Option<PathBuf>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            backend: BackendKind::Highs,
            mip_gap: 1e-6,
            time_limit: None,
            feasibility_tol: 1e-7,
            dump_dir: None,
        }
    }
}

/// Absolute row violation allowed by the replay check, scaled by row magnitude.
const REPLAY_TOL: f64 = 1e-6;

/// Evaluates `values` against every bound, integrality requirement and row of
/// `model`. Returns the first violation found.
/// Sums repeated variables; solvers reject a column twice in one row.
fn merge_terms(terms: Vec<(VarId, f64)>) -> Vec<(VarId, f64)> {
    let mut position: std::collections::HashMap<VarId, usize> = std::collections::HashMap::with_capacity(terms.len());
    let mut merged: Vec<(VarId, f64)> = Vec::with_capacity(terms.len());
    for (v, c) in terms {
        match position.entry(v) {
            std::collections::hash_map::Entry::Occupied(e) => merged[*e.get()].1 += c,
            std::collections::hash_map::Entry::Vacant(e) => {
                e.insert(merged.len());
                merged.push((v, c));
            }
        }
    }
    merged
}

pub fn check_solution(model: &ModelSpec, values: &[f64]) -> std::result::Result<(), String> {
    if values.len() != model.variables.len() {
        return Err(format!(
            "{} values for {} variables",
            values.len(),
            model.variables.len()
        ));
    }
    for (v, &x) in model.variables.iter().zip(values) {
        let scale = 1.0 + x.abs();
        if x < v.lower - REPLAY_TOL * scale || x > v.upper + REPLAY_TOL * scale {
            return Err(format!("{} = {x} outside [{}, {}]", v.name, v.lower, v.upper));
        }
        if v.kind != VarKind::Continuous && (x - x.round()).abs() > 1e-9 {
            return Err(format!("{} = {x} is not integral", v.name));
        }
    }
    for c in &model.constraints {
        let mut lhs = 0.0;
        let mut scale = 1.0 + c.rhs.abs();
        for &(id, coef) in &c.terms {
            let t = coef * values[id.0];
            lhs += t;
            scale = scale.max(t.abs());
        }
        let tol = REPLAY_TOL * scale;
        let ok = match c.sense {
            RowSense::Le => lhs <= c.rhs + tol,
            RowSense::Ge => lhs >= c.rhs - tol,
            RowSense::Eq => (lhs - c.rhs).abs() <= tol,
        };
        if !ok {
            return Err(format!("row {}: lhs {lhs} vs rhs {}", c.name, c.rhs));
        }
    }
    Ok(())
}

/// Solves `model` to proven optimality (within `opts.mip_gap`) and replays the
/// returned point through [`check_solution`].
pub fn solve(model: &ModelSpec, opts: &SolverOptions) -> Result<SolveResult> {
    model.validate()?;
    if let Some(dir) = &opts.dump_dir {
        std::fs::create_dir_all(dir)?;
        let file = dir.join(format!("{}.lp", sanitize(&model.name)));
        std::fs::write(file, model.to_lp_string())?;
    }

    let start = Instant::now();
    let mut result = match opts.backend {
        BackendKind::Highs => highs_backend::solve(model, opts)?,
    };
    result.runtime = start.elapsed().as_secs_f64();

    if let Some(values) = result.values.as_mut() {
        for (v, x) in model.variables.iter().zip(values.iter_mut()) {
            if v.kind != VarKind::Continuous {
                *x = x.round();
            }
        }
        check_solution(model, values).map_err(|e| Error::ReplayMismatch(format!("model {}: {e}", model.name)))?;
        let recomputed = model.objective_at(values);
        if (recomputed - result.objective_value).abs() > 1e-6 * (1.0 + recomputed.abs()) {
            return Err(Error::ReplayMismatch(format!(
                "model {}: objective {} reported, {} recomputed",
                model.name, result.objective_value, recomputed
            )));
        }
        result.objective_value = recomputed;
    }
    Ok(result)
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}
