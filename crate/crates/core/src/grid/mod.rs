//! Grid data model: buses, branches, generators and the case container.
//!
//! All quantities stored here are in the units of the case file (MW, MVA).
//! Optimization models convert to per-unit on [`GridCase::base_mva`].

mod dispatch;
mod matrices;

pub use dispatch::{economic_dispatch, fcr_gains_from_dispatch, Dispatch};
pub use matrices::{build_network_matrices, dc_power_flow, electrical_distances, NetworkMatrices};

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for the net-injection balance check, in per-unit.
pub const BALANCE_TOL_PU: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct Bus {
    pub id: String,
    /// Fixed demand P^D in MW.
    pub base_load: f64,
    /// (lat, lon) in degrees.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords: Option<(f64, f64)>,
    /// Whether the bus feeds a distribution grid and may host charging stations.
    #[serde(default)]
    pub dist_grid_connected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct Branch {
    pub id: String,
    pub from_bus: String,
    pub to_bus: String,
    /// Series susceptance magnitude in p.u. on the case base.
    pub susceptance: f64,
    /// Permanent attainable loading (MW), the dispatch limit.
    pub rating_patl: f64,
    /// Flow (MW) at or above which the branch counts as overloaded.
    pub overload_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct Generator {
    pub id: String,
    pub bus: String,
    pub p_min: f64,
    pub p_max: f64,
    /// Currency per MWh.
    pub marginal_cost: f64,
    #[serde(default = "one")]
    pub availability: f64,
    /// Technology class used by scenario availability factors (e.g. `wind`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<String>,
}

fn one() -> f64 {
    1.0
}

/// On-disk shape of a grid case; `reference_bus` may be omitted.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct GridCaseFile {
    pub base_mva: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_bus: Option<String>,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub generators: Vec<Generator>,
}

/// A validated transmission grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridCaseFile", into = "GridCaseFile")]
pub struct GridCase {
    base_mva: f64,
    reference_bus: usize,
    buses: Vec<Bus>,
    branches: Vec<Branch>,
    generators: Vec<Generator>,
    bus_index: HashMap<String, usize>,
    branch_ends: Vec<(usize, usize)>,
    generator_bus: Vec<usize>,
}

impl TryFrom<GridCaseFile> for GridCase {
    type Error = Error;

    fn try_from(file: GridCaseFile) -> Result<Self> {
        GridCase::new(
            file.base_mva,
            file.reference_bus,
            file.buses,
            file.branches,
            file.generators,
        )
    }
}

impl From<GridCase> for GridCaseFile {
    fn from(case: GridCase) -> Self {
        GridCaseFile {
            base_mva: case.base_mva,
            reference_bus: Some(case.buses[case.reference_bus].id.clone()),
            buses: case.buses,
            branches: case.branches,
            generators: case.generators,
        }
    }
}

/// Orders identifiers numerically when both parse as integers, lexically otherwise.
pub fn natural_id_cmp(a: &str, b: &str) -> Ordering {
    match (a.parse::<i64>(), b.parse::<i64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y),
        _ => a.cmp(b),
    }
}

impl GridCase {
    pub fn new(
        base_mva: f64,
        reference_bus: Option<String>,
        buses: Vec<Bus>,
        branches: Vec<Branch>,
        generators: Vec<Generator>,
    ) -> Result<Self> {
        let invalid = |msg: String| Err(Error::InvalidGrid(msg));
        if !(base_mva > 0.0) {
            return invalid(format!("base_mva must be positive, got {base_mva}"));
        }
        if buses.is_empty() {
            return invalid("case has no buses".into());
        }

        let mut bus_index = HashMap::with_capacity(buses.len());
        for (i, bus) in buses.iter().enumerate() {
            if bus_index.insert(bus.id.clone(), i).is_some() {
                return invalid(format!("duplicate bus id {}", bus.id));
            }
            if !(bus.base_load >= 0.0) {
                return invalid(format!("bus {} has negative base load", bus.id));
            }
        }
        let lookup = |id: &str, what: &str| -> Result<usize> {
            bus_index
                .get(id)
                .copied()
                .ok_or_else(|| Error::InvalidGrid(format!("{what} references unknown bus {id}")))
        };

        let mut seen = HashSet::new();
        let mut branch_ends = Vec::with_capacity(branches.len());
        for br in &branches {
            if !seen.insert(br.id.as_str()) {
                return invalid(format!("duplicate branch id {}", br.id));
            }
            let from = lookup(&br.from_bus, &format!("branch {}", br.id))?;
            let to = lookup(&br.to_bus, &format!("branch {}", br.id))?;
            if from == to {
                return invalid(format!("branch {} is a self-loop", br.id));
            }
            if !(br.susceptance > 0.0) {
                return invalid(format!("branch {} has non-positive susceptance", br.id));
            }
            if !(br.rating_patl > 0.0) || br.overload_threshold < br.rating_patl {
                return invalid(format!("branch {} needs overload_threshold >= rating_patl > 0", br.id));
            }
            branch_ends.push((from, to));
        }

        seen.clear();
        let mut generator_bus = Vec::with_capacity(generators.len());
        for g in &generators {
            if !seen.insert(g.id.as_str()) {
                return invalid(format!("duplicate generator id {}", g.id));
            }
            generator_bus.push(lookup(&g.bus, &format!("generator {}", g.id))?);
            if !(g.p_min >= 0.0 && g.p_min <= g.p_max) {
                return invalid(format!("generator {} needs 0 <= p_min <= p_max", g.id));
            }
            if !(0.0..=1.0).contains(&g.availability) {
                return invalid(format!("generator {} availability outside [0, 1]", g.id));
            }
            if !(g.marginal_cost.is_finite()) {
                return invalid(format!("generator {} has non-finite cost", g.id));
            }
        }

        let reference_bus = match reference_bus {
            Some(id) => lookup(&id, "reference_bus")?,
            None => generator_bus
                .iter()
                .copied()
                .min_by(|&a, &b| natural_id_cmp(&buses[a].id, &buses[b].id))
                .ok_or_else(|| Error::InvalidGrid("no reference bus given and no generator present".into()))?,
        };

        Ok(GridCase {
            base_mva,
            reference_bus,
            buses,
            branches,
            generators,
            bus_index,
            branch_ends,
            generator_bus,
        })
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: GridCaseFile = serde_json::from_str(s).map_err(|e| Error::Parse(format!("grid case: {e}")))?;
        file.try_into()
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&GridCaseFile::from(self.clone())).expect("grid case serializes")
    }

    pub fn base_mva(&self) -> f64 {
        self.base_mva
    }

    pub fn reference_bus(&self) -> usize {
        self.reference_bus
    }

    pub fn buses(&self) -> &[Bus] {
        &self.buses
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }

    pub fn bus_index(&self, id: &str) -> Option<usize> {
        self.bus_index.get(id).copied()
    }

    /// (from, to) bus indices of branch `l`.
    pub fn branch_ends(&self, l: usize) -> (usize, usize) {
        self.branch_ends[l]
    }

    pub fn generator_bus(&self, g: usize) -> usize {
        self.generator_bus[g]
    }

    pub fn total_base_load(&self) -> f64 {
        self.buses.iter().map(|b| b.base_load).sum()
    }

    /// Returns a copy with every bus, branch and generator passed through the
    /// given closures. Identifiers and topology must not change.
    pub fn map_elements(
        &self,
        mut bus: impl FnMut(&mut Bus),
        mut branch: impl FnMut(&mut Branch),
        mut generator: impl FnMut(&mut Generator),
    ) -> Result<Self> {
        let mut buses = self.buses.clone();
        let mut branches = self.branches.clone();
        let mut generators = self.generators.clone();
        buses.iter_mut().for_each(&mut bus);
        branches.iter_mut().for_each(&mut branch);
        generators.iter_mut().for_each(&mut generator);
        GridCase::new(
            self.base_mva,
            Some(self.buses[self.reference_bus].id.clone()),
            buses,
            branches,
            generators,
        )
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub fn bus(id: &str, load: f64) -> Bus {
        Bus {
            id: id.into(),
            base_load: load,
            coords: None,
            dist_grid_connected: true,
        }
    }

    pub fn branch(id: &str, from: &str, to: &str, b: f64, rating: f64) -> Branch {
        Branch {
            id: id.into(),
            from_bus: from.into(),
            to_bus: to.into(),
            susceptance: b,
            rating_patl: rating,
            overload_threshold: rating,
        }
    }

    pub fn generator(id: &str, bus: &str, p_max: f64, cost: f64) -> Generator {
        Generator {
            id: id.into(),
            bus: bus.into(),
            p_min: 0.0,
            p_max,
            marginal_cost: cost,
            availability: 1.0,
            class: None,
        }
    }

    /// Three buses in a ring with unit susceptances, generator at bus 1.
    pub fn ring3() -> GridCase {
        GridCase::new(
            100.0,
            Some("1".into()),
            vec![bus("1", 0.0), bus("2", 90.0), bus("3", 0.0)],
            vec![
                branch("a", "1", "2", 1.0, 500.0),
                branch("b", "2", "3", 1.0, 500.0),
                branch("c", "1", "3", 1.0, 500.0),
            ],
            vec![generator("g1", "1", 200.0, 10.0)],
        )
        .unwrap()
    }

    #[test]
    fn reference_defaults_to_lowest_generator_bus() {
        let case = GridCase::new(
            100.0,
            None,
            vec![bus("10", 0.0), bus("2", 0.0), bus("7", 0.0)],
            vec![branch("a", "10", "2", 1.0, 1.0), branch("b", "2", "7", 1.0, 1.0)],
            vec![generator("g", "10", 1.0, 1.0), generator("h", "7", 1.0, 1.0)],
        )
        .unwrap();
        assert_eq!(case.buses()[case.reference_bus()].id, "7");
    }

    #[test]
    fn rejects_bad_elements() {
        let self_loop = GridCase::new(
            100.0,
            None,
            vec![bus("1", 0.0)],
            vec![branch("a", "1", "1", 1.0, 1.0)],
            vec![generator("g", "1", 1.0, 1.0)],
        );
        assert!(matches!(self_loop, Err(Error::InvalidGrid(_))));

        let mut low = branch("a", "1", "2", 1.0, 10.0);
        low.overload_threshold = 5.0;
        let bad_threshold = GridCase::new(
            100.0,
            None,
            vec![bus("1", 0.0), bus("2", 0.0)],
            vec![low],
            vec![generator("g", "1", 1.0, 1.0)],
        );
        assert!(matches!(bad_threshold, Err(Error::InvalidGrid(_))));

        let unknown = GridCase::new(
            100.0,
            None,
            vec![bus("1", 0.0)],
            vec![],
            vec![generator("g", "9", 1.0, 1.0)],
        );
        assert!(matches!(unknown, Err(Error::InvalidGrid(_))));
    }

    #[test]
    fn json_round_trip() {
        let case = ring3();
        let back = GridCase::from_json_str(&case.to_json_string()).unwrap();
        assert_eq!(case, back);
    }

    #[test]
    fn natural_ordering() {
        assert_eq!(natural_id_cmp("2", "10"), Ordering::Less);
        assert_eq!(natural_id_cmp("b", "a"), Ordering::Greater);
    }
}
