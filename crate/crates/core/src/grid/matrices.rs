use nalgebra::{DMatrix, DVector};

use super::{GridCase, BALANCE_TOL_PU};
use crate::error::{Error, Result};

/// Incidence, branch-bus susceptance and the inverse of the reduced bus
/// susceptance matrix of a [`GridCase`]. Everything here is per-unit.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkMatrices {
    /// |N|×|L|, +1 at the from bus and -1 at the to bus of each branch.
    pub incidence: DMatrix<f64>,
    /// |L|×|N|, row l is b_l (e_from - e_to)ᵀ.
    pub branch_susceptance: DMatrix<f64>,
    /// (|N|-1)×(|N|-1) inverse of the bus susceptance matrix without the reference row/column.
    pub reduced_bus_susceptance_inverse: DMatrix<f64>,
    pub reference_bus: usize,
    pub base_mva: f64,
}

impl NetworkMatrices {
    pub fn num_buses(&self) -> usize {
        self.incidence.nrows()
    }

    pub fn num_branches(&self) -> usize {
        self.incidence.ncols()
    }

    fn reduced_index(&self, bus: usize) -> Option<usize> {
        match bus.cmp(&self.reference_bus) {
            std::cmp::Ordering::Less => Some(bus),
            std::cmp::Ordering::Equal => None,
            std::cmp::Ordering::Greater => Some(bus - 1),
        }
    }

    /// Angles (rad) and flows for per-unit injections, without the balance check.
    pub fn solve_pu(&self, injections_pu: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.num_buses();
        let reduced: DVector<f64> = DVector::from_iterator(
            n - 1,
            (0..n).filter(|&i| i != self.reference_bus).map(|i| injections_pu[i]),
        );
        let theta_red = &self.reduced_bus_susceptance_inverse * reduced;
        let theta: Vec<f64> = (0..n)
            .map(|i| self.reduced_index(i).map_or(0.0, |r| theta_red[r]))
            .collect();
        let flows = &self.branch_susceptance * DVector::from_column_slice(&theta);
        (theta, flows.iter().copied().collect())
    }

    /// Flows in p.u. after checking that the injections balance.
    pub fn flows_pu(&self, injections_pu: &[f64]) -> Result<Vec<f64>> {
        let net: f64 = injections_pu.iter().sum();
        if net.abs() > BALANCE_TOL_PU {
            return Err(Error::UnbalancedInjections { net });
        }
        Ok(self.solve_pu(injections_pu).1)
    }

    /// The reduced inverse lifted to |N|×|N| with a zero reference row and column.
    pub fn lifted_impedance(&self) -> DMatrix<f64> {
        let n = self.num_buses();
        DMatrix::from_fn(n, n, |i, k| match (self.reduced_index(i), self.reduced_index(k)) {
            (Some(r), Some(c)) => self.reduced_bus_susceptance_inverse[(r, c)],
            _ => 0.0,
        })
    }
}

fn is_connected(grid: &GridCase) -> bool {
    let n = grid.buses().len();
    let mut adjacency = vec![Vec::new(); n];
    for l in 0..grid.branches().len() {
        let (a, b) = grid.branch_ends(l);
        adjacency[a].push(b);
        adjacency[b].push(a);
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(v) = stack.pop() {
        for &w in &adjacency[v] {
            if !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

pub fn build_network_matrices(grid: &GridCase) -> Result<NetworkMatrices> {
    let n = grid.buses().len();
    let m = grid.branches().len();
    if n < 2 {
        // A single bus has nothing to solve for; keep a 0×0 inverse.
        return Ok(NetworkMatrices {
            incidence: DMatrix::zeros(n, m),
            branch_susceptance: DMatrix::zeros(m, n),
            reduced_bus_susceptance_inverse: DMatrix::zeros(0, 0),
            reference_bus: grid.reference_bus(),
            base_mva: grid.base_mva(),
        });
    }
    if !is_connected(grid) {
        return Err(Error::SingularNetwork);
    }

    let mut incidence = DMatrix::zeros(n, m);
    let mut branch_susceptance = DMatrix::zeros(m, n);
    for (l, br) in grid.branches().iter().enumerate() {
        let (from, to) = grid.branch_ends(l);
        incidence[(from, l)] = 1.0;
        incidence[(to, l)] = -1.0;
        branch_susceptance[(l, from)] = br.susceptance;
        branch_susceptance[(l, to)] = -br.susceptance;
    }

    let bus_susceptance = &incidence * &branch_susceptance;
    let reference = grid.reference_bus();
    let keep: Vec<usize> = (0..n).filter(|&i| i != reference).collect();
    let reduced = bus_susceptance.select_rows(&keep).select_columns(&keep);
    let inverse = reduced.try_inverse().ok_or(Error::SingularNetwork)?;

    Ok(NetworkMatrices {
        incidence,
        branch_susceptance,
        reduced_bus_susceptance_inverse: inverse,
        reference_bus: reference,
        base_mva: grid.base_mva(),
    })
}

/// DC power flow for per-bus injections in MW. Returns (flows MW, angles rad).
pub fn dc_power_flow(matrices: &NetworkMatrices, injections_mw: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let base = matrices.base_mva;
    let pu: Vec<f64> = injections_mw.iter().map(|p| p / base).collect();
    let net: f64 = pu.iter().sum();
    if net.abs() > BALANCE_TOL_PU {
        return Err(Error::UnbalancedInjections { net });
    }
    let (angles, flows) = matrices.solve_pu(&pu);
    Ok((flows.into_iter().map(|f| f * base).collect(), angles))
}

/// Thevenin-style electrical distance |Z_nn + Z_kk - 2 Z_nk| in p.u.
pub fn electrical_distances(matrices: &NetworkMatrices) -> DMatrix<f64> {
    let z = matrices.lifted_impedance();
    let n = z.nrows();
    DMatrix::from_fn(n, n, |i, k| {
        if i == k {
            0.0
        } else {
            (z[(i, i)] + z[(k, k)] - 2.0 * z[(i, k)]).abs()
        }
    })
}
