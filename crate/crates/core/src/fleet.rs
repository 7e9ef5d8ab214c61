//! Charging-station operators, their per-bus capacities, and segmentations of
//! each operator's capacity on the 1/D grid.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridCase;

/// Installed EVCS capacity of one operator at one bus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct Site {
    pub bus: String,
    /// MW.
    pub capacity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct Operator {
    pub id: String,
    pub hackable: bool,
    /// Explicit |S_o|; defaults to D × number of sites.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_segments: Option<usize>,
    pub sites: Vec<Site>,
}

impl Operator {
    pub fn new(id: impl Into<String>, hackable: bool, sites: Vec<Site>) -> Self {
        Operator {
            id: id.into(),
            hackable,
            max_segments: None,
            sites,
        }
    }

    pub fn total_capacity(&self) -> f64 {
        self.sites.iter().map(|s| s.capacity).sum()
    }

    /// Number of segment slots |S_o| under discretization `d`.
    pub fn segment_slots(&self, d: u32) -> usize {
        self.max_segments.unwrap_or(d as usize * self.sites.len()).max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct FleetModel {
    operators: Vec<Operator>,
    discretization: u32,
}

impl FleetModel {
    /// Sites with zero capacity are dropped; everything else must be positive.
    pub fn new(mut operators: Vec<Operator>, discretization: u32) -> Result<Self> {
        let invalid = |m: String| Err(Error::InvalidFleet(m));
        if discretization == 0 {
            return invalid("discretization D must be at least 1".into());
        }
        let mut ids = HashSet::new();
        for op in &mut operators {
            if !ids.insert(op.id.clone()) {
                return invalid(format!("duplicate operator {}", op.id));
            }
            if op.max_segments == Some(0) {
                return invalid(format!("operator {} has max_segments = 0", op.id));
            }
            let mut buses = HashSet::new();
            for site in &op.sites {
                if !(site.capacity >= 0.0 && site.capacity.is_finite()) {
                    return invalid(format!("operator {} has invalid capacity at bus {}", op.id, site.bus));
                }
                if !buses.insert(site.bus.clone()) {
                    return invalid(format!("operator {} lists bus {} twice", op.id, site.bus));
                }
            }
            op.sites.retain(|s| s.capacity > 0.0);
        }
        Ok(FleetModel {
            operators,
            discretization,
        })
    }

    pub fn empty(discretization: u32) -> Self {
        FleetModel {
            operators: Vec::new(),
            discretization: discretization.max(1),
        }
    }

    pub fn operators(&self) -> &[Operator] {
        &self.operators
    }

    pub fn discretization(&self) -> u32 {
        self.discretization
    }

    pub fn with_discretization(&self, d: u32) -> Result<Self> {
        FleetModel::new(self.operators.clone(), d)
    }

    pub fn capacity(&self, operator: &str, bus: &str) -> f64 {
        self.operators
            .iter()
            .find(|o| o.id == operator)
            .and_then(|o| o.sites.iter().find(|s| s.bus == bus))
            .map_or(0.0, |s| s.capacity)
    }

    pub fn total_capacity(&self) -> f64 {
        self.operators.iter().map(Operator::total_capacity).sum()
    }

    /// Checks bus references against the grid; capacity may only sit at
    /// distribution-connected buses.
    pub fn check_against(&self, grid: &GridCase) -> Result<()> {
        for op in &self.operators {
            for site in &op.sites {
                let idx = grid.bus_index(&site.bus).ok_or_else(|| {
                    Error::InvalidFleet(format!("operator {} references unknown bus {}", op.id, site.bus))
                })?;
                if !grid.buses()[idx].dist_grid_connected {
                    return Err(Error::InvalidFleet(format!(
                        "operator {} has capacity at bus {} which is not distribution-connected",
                        op.id, site.bus
                    )));
                }
            }
        }
        Ok(())
    }

    /// Per-bus expected charging load C·Σ_o L_{o,n} in MW.
    pub fn expected_load(&self, grid: &GridCase, coincidence: f64) -> Vec<f64> {
        let mut load = vec![0.0; grid.buses().len()];
        for op in &self.operators {
            for site in &op.sites {
                if let Some(i) = grid.bus_index(&site.bus) {
                    load[i] += coincidence * site.capacity;
                }
            }
        }
        load
    }
}

/// One operator's assignment: `shares[site][segment]` numerators over D and
/// the segment-use flags b.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OperatorSegmentation {
    pub used: Vec<bool>,
    pub shares: Vec<Vec<u32>>,
}

impl OperatorSegmentation {
    pub fn slots(&self) -> usize {
        self.used.len()
    }

    pub fn segments_used(&self) -> usize {
        self.used.iter().filter(|&&u| u).count()
    }

    /// Numerators of one segment across sites.
    pub fn segment_column(&self, s: usize) -> Vec<u32> {
        self.shares.iter().map(|row| row[s]).collect()
    }

    fn is_empty_segment(&self, s: usize) -> bool {
        self.shares.iter().all(|row| row[s] == 0)
    }

    /// Drops empty segments and orders the rest so used ones come first.
    pub fn compact(&mut self, slots: usize) {
        let keep: Vec<usize> = (0..self.slots()).filter(|&s| !self.is_empty_segment(s)).collect();
        let sites = self.shares.len();
        let width = slots.max(keep.len());
        let mut shares = vec![vec![0; width]; sites];
        for (new, &old) in keep.iter().enumerate() {
            for j in 0..sites {
                shares[j][new] = self.shares[j][old];
            }
        }
        let mut used = vec![false; width];
        used[..keep.len()].iter_mut().for_each(|u| *u = true);
        if keep.is_empty() && width > 0 {
            used[0] = true;
        }
        self.used = used;
        self.shares = shares;
    }

    /// Used segments as columns, sorted, for comparisons up to relabeling.
    pub fn canonical_columns(&self) -> Vec<Vec<u32>> {
        let mut cols: Vec<Vec<u32>> = (0..self.slots())
            .filter(|&s| !self.is_empty_segment(s))
            .map(|s| self.segment_column(s))
            .collect();
        cols.sort_unstable_by(|a, b| b.cmp(a));
        cols
    }
}

/// Assignment fractions a_{o,n,s} = shares / D plus segment-use flags,
/// aligned positionally with a [`FleetModel`] (operator, then site order).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Segmentation {
    pub denominator: u32,
    pub operators: Vec<OperatorSegmentation>,
}

impl Segmentation {
    pub fn segments_used(&self) -> usize {
        self.operators.iter().map(OperatorSegmentation::segments_used).sum()
    }

    pub fn fraction(&self, operator: usize, site: usize, segment: usize) -> f64 {
        self.operators[operator].shares[site][segment] as f64 / self.denominator as f64
    }

    /// Σ_s h_s a_{o,n,s} for the hacked segment flags of one operator.
    pub fn hacked_fraction(&self, operator: usize, site: usize, hacked: &[bool]) -> f64 {
        let row = &self.operators[operator].shares[site];
        let num: u32 = row.iter().zip(hacked).filter(|(_, &h)| h).map(|(&x, _)| x).sum();
        num as f64 / self.denominator as f64
    }

    /// Key identifying the segmentation up to relabeling of segments.
    pub fn canonical_key(&self) -> Vec<Vec<Vec<u32>>> {
        self.operators
            .iter()
            .map(OperatorSegmentation::canonical_columns)
            .collect()
    }

    pub fn to_file(&self, fleet: &FleetModel) -> SegmentationFile {
        let mut assignments = Vec::new();
        let mut segments = Vec::new();
        for (op, seg) in fleet.operators().iter().zip(&self.operators) {
            for (s, &used) in seg.used.iter().enumerate() {
                segments.push(SegmentUse {
                    operator: op.id.clone(),
                    segment: s + 1,
                    used,
                });
            }
            for (site, row) in op.sites.iter().zip(&seg.shares) {
                for (s, &numerator) in row.iter().enumerate() {
                    if numerator > 0 {
                        assignments.push(Assignment {
                            operator: op.id.clone(),
                            bus: site.bus.clone(),
                            segment: s + 1,
                            numerator,
                        });
                    }
                }
            }
        }
        SegmentationFile {
            denominator: self.denominator,
            assignments,
            segments,
        }
    }

    /// Resolves a file against `fleet`. Unknown operators or buses, and
    /// segment indices without a use flag, are mismatches.
    pub fn from_file(file: &SegmentationFile, fleet: &FleetModel) -> Result<Self> {
        let mismatch = |m: String| Error::SegmentationMismatch(m);
        let op_index: HashMap<&str, usize> = fleet
            .operators()
            .iter()
            .enumerate()
            .map(|(i, o)| (o.id.as_str(), i))
            .collect();
        let mut slots = vec![0usize; fleet.operators().len()];
        for su in &file.segments {
            let o = *op_index
                .get(su.operator.as_str())
                .ok_or_else(|| mismatch(format!("unknown operator {}", su.operator)))?;
            if su.segment == 0 {
                return Err(mismatch("segment indices start at 1".into()));
            }
            slots[o] = slots[o].max(su.segment);
        }
        let mut ops: Vec<OperatorSegmentation> = fleet
            .operators()
            .iter()
            .zip(&slots)
            .map(|(op, &k)| OperatorSegmentation {
                used: vec![false; k],
                shares: vec![vec![0; k]; op.sites.len()],
            })
            .collect();
        for su in &file.segments {
            ops[op_index[su.operator.as_str()]].used[su.segment - 1] = su.used;
        }
        for a in &file.assignments {
            let o = *op_index
                .get(a.operator.as_str())
                .ok_or_else(|| mismatch(format!("unknown operator {}", a.operator)))?;
            let j = fleet.operators()[o]
                .sites
                .iter()
                .position(|s| s.bus == a.bus)
                .ok_or_else(|| mismatch(format!("operator {} has no capacity at bus {}", a.operator, a.bus)))?;
            if a.segment == 0 || a.segment > slots[o] {
                return Err(mismatch(format!(
                    "assignment to segment {} of operator {} which has no use flag",
                    a.segment, a.operator
                )));
            }
            ops[o].shares[j][a.segment - 1] += a.numerator;
        }
        Ok(Segmentation {
            denominator: file.denominator,
            operators: ops,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct Assignment {
    pub operator: String,
    pub bus: String,
    /// 1-based.
    pub segment: usize,
    pub numerator: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct SegmentUse {
    pub operator: String,
    pub segment: usize,
    pub used: bool,
}

/// JSON exchange format for segmentations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct SegmentationFile {
    #[serde(rename = "D")]
    pub denominator: u32,
    pub assignments: Vec<Assignment>,
    pub segments: Vec<SegmentUse>,
}

/// Every operator on a single segment (a_0).
pub fn minimal_segmentation(fleet: &FleetModel) -> Segmentation {
    let d = fleet.discretization();
    let operators = fleet
        .operators()
        .iter()
        .map(|op| {
            let slots = op.segment_slots(d);
            let mut used = vec![false; slots];
            used[0] = true;
            let shares = op
                .sites
                .iter()
                .map(|_| {
                    let mut row = vec![0; slots];
                    row[0] = d;
                    row
                })
                .collect();
            OperatorSegmentation { used, shares }
        })
        .collect();
    Segmentation {
        denominator: d,
        operators,
    }
}

/// Finest segmentation a^max: one 1/D unit of one bus per segment. When an
/// operator has fewer slots than units, units are dealt round-robin over the
/// available slots; such operators are listed in the second return value.
pub fn maximal_segmentation(fleet: &FleetModel) -> (Segmentation, Vec<String>) {
    let d = fleet.discretization();
    let mut capped = Vec::new();
    let operators = fleet
        .operators()
        .iter()
        .map(|op| {
            let slots = op.segment_slots(d);
            let units = d as usize * op.sites.len();
            if units > slots {
                capped.push(op.id.clone());
            }
            let mut shares = vec![vec![0; slots]; op.sites.len()];
            for k in 0..units {
                shares[k / d as usize][k % slots] += 1;
            }
            let mut used = vec![false; slots];
            used[..units.min(slots).max(1)].iter_mut().for_each(|u| *u = true);
            OperatorSegmentation { used, shares }
        })
        .collect();
    (
        Segmentation {
            denominator: d,
            operators,
        },
        capped,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolatedConstraint {
    /// Shapes or D disagree with the fleet.
    Shape,
    /// Σ_s a_{o,n,s} = 1.
    FullAssignment,
    /// a_{o,n,s} ≤ b_{o,s}.
    AssignedToUsed,
    /// b_{o,s} ≤ b_{o,s-1}.
    SymmetryBreaking,
    /// More slots than |S_o|.
    SegmentLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub constraint: ViolatedConstraint,
    pub operator: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bus: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub segment: Option<usize>,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} at operator {}", self.constraint, self.operator)?;
        if let Some(b) = &self.bus {
            write!(f, ", bus {b}")?;
        }
        if let Some(s) = self.segment {
            write!(f, ", segment {}", s + 1)?;
        }
        write!(f, ": {}", self.detail)
    }
}

/// Lists every violated segmentation constraint; empty iff `seg` is valid for `fleet`.
pub fn validate_segmentation(fleet: &FleetModel, seg: &Segmentation) -> Vec<Violation> {
    let mut out = Vec::new();
    let d = fleet.discretization();
    let mut push = |constraint, operator: &str, bus: Option<&str>, segment, detail: String| {
        out.push(Violation {
            constraint,
            operator: operator.to_string(),
            bus: bus.map(str::to_string),
            segment,
            detail,
        })
    };
    if seg.denominator != d {
        push(
            ViolatedConstraint::Shape,
            "*",
            None,
            None,
            format!("D = {} but fleet uses {d}", seg.denominator),
        );
    }
    if seg.operators.len() != fleet.operators().len() {
        push(
            ViolatedConstraint::Shape,
            "*",
            None,
            None,
            format!(
                "{} operators, fleet has {}",
                seg.operators.len(),
                fleet.operators().len()
            ),
        );
        return out;
    }
    for (op, os) in fleet.operators().iter().zip(&seg.operators) {
        if os.shares.len() != op.sites.len() || os.shares.iter().any(|r| r.len() != os.used.len()) {
            push(
                ViolatedConstraint::Shape,
                &op.id,
                None,
                None,
                "share matrix shape mismatch".into(),
            );
            continue;
        }
        if os.segments_used() > op.segment_slots(d) {
            push(
                ViolatedConstraint::SegmentLimit,
                &op.id,
                None,
                None,
                format!(
                    "{} segments used, {} available",
                    os.segments_used(),
                    op.segment_slots(d)
                ),
            );
        }
        for (site, row) in op.sites.iter().zip(&os.shares) {
            let total: u32 = row.iter().sum();
            if total != seg.denominator {
                push(
                    ViolatedConstraint::FullAssignment,
                    &op.id,
                    Some(&site.bus),
                    None,
                    format!("assigned {total}/{}", seg.denominator),
                );
            }
            for (s, &x) in row.iter().enumerate() {
                if x > 0 && !os.used[s] {
                    push(
                        ViolatedConstraint::AssignedToUsed,
                        &op.id,
                        Some(&site.bus),
                        Some(s),
                        format!("{x}/{} assigned to an unused segment", seg.denominator),
                    );
                }
            }
        }
        for s in 1..os.used.len() {
            if os.used[s] && !os.used[s - 1] {
                push(
                    ViolatedConstraint::SymmetryBreaking,
                    &op.id,
                    None,
                    Some(s),
                    "segment used while its predecessor is not".into(),
                );
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn op(id: &str, caps: &[(&str, f64)]) -> Operator {
        Operator::new(
            id,
            true,
            caps.iter()
                .map(|&(b, c)| Site {
                    bus: b.into(),
                    capacity: c,
                })
                .collect(),
        )
    }

    #[test]
    fn minimal_uses_one_segment_per_operator() {
        let fleet = FleetModel::new(
            (0..5)
                .map(|i| op(&format!("o{i}"), &[("1", 10.0), ("2", 5.0)]))
                .collect(),
            2,
        )
        .unwrap();
        let seg = minimal_segmentation(&fleet);
        assert_eq!(seg.segments_used(), 5);
        assert!(validate_segmentation(&fleet, &seg).is_empty());

        let one = FleetModel::new(vec![op("a", &[("1", 1.0), ("2", 1.0), ("3", 1.0)])], 1).unwrap();
        let seg = minimal_segmentation(&one);
        assert!((0..3).all(|j| seg.fraction(0, j, 0) == 1.0));

        let empty = FleetModel::empty(2);
        assert_eq!(minimal_segmentation(&empty).segments_used(), 0);
    }

    #[test]
    fn maximal_uncapped() {
        let fleet = FleetModel::new(vec![op("a", &[("1", 4.0), ("2", 2.0)])], 2).unwrap();
        let (seg, capped) = maximal_segmentation(&fleet);
        assert!(capped.is_empty());
        assert_eq!(seg.segments_used(), 4);
        for s in 0..4 {
            let col = seg.operators[0].segment_column(s);
            assert_eq!(col.iter().sum::<u32>(), 1, "segment {s} holds one half of one bus");
        }
        assert!(validate_segmentation(&fleet, &seg).is_empty());

        let d1 = FleetModel::new(vec![op("a", &[("1", 1.0), ("2", 1.0), ("3", 1.0)])], 1).unwrap();
        assert_eq!(maximal_segmentation(&d1).0.segments_used(), 3);
    }

    #[test]
    fn maximal_capped_balances_fill() {
        let mut o = op("a", &[("1", 1.0), ("2", 1.0)]);
        o.max_segments = Some(2);
        let fleet = FleetModel::new(vec![o], 2).unwrap();
        let (seg, capped) = maximal_segmentation(&fleet);
        assert_eq!(capped, vec!["a".to_string()]);
        assert_eq!(seg.segments_used(), 2);
        assert_eq!(seg.operators[0].shares, vec![vec![1, 1], vec![1, 1]]);
        assert!(validate_segmentation(&fleet, &seg).is_empty());
    }

    #[test]
    fn validation_reports_each_violation() {
        let fleet = FleetModel::new(vec![op("a", &[("1", 1.0), ("2", 1.0)])], 2).unwrap();
        let mut seg = minimal_segmentation(&fleet);
        seg.operators[0].shares[0][0] = 1;
        let v = validate_segmentation(&fleet, &seg);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].constraint, ViolatedConstraint::FullAssignment);
        assert_eq!(v[0].bus.as_deref(), Some("1"));

        let mut seg = minimal_segmentation(&fleet);
        seg.operators[0].used[0] = false;
        seg.operators[0].used[1] = true;
        seg.operators[0].shares = vec![vec![0, 2, 0, 0], vec![0, 2, 0, 0]];
        let v = validate_segmentation(&fleet, &seg);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].constraint, ViolatedConstraint::SymmetryBreaking);

        let mut seg = minimal_segmentation(&fleet);
        seg.operators[0].shares[1] = vec![1, 1, 0, 0];
        let v = validate_segmentation(&fleet, &seg);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].constraint, ViolatedConstraint::AssignedToUsed);
    }

    #[test]
    fn file_mismatch_detected() {
        let fleet = FleetModel::new(vec![op("a", &[("1", 1.0)])], 1).unwrap();
        let other = FleetModel::new(vec![op("b", &[("1", 1.0)])], 1).unwrap();
        let file = minimal_segmentation(&fleet).to_file(&fleet);
        assert!(matches!(
            Segmentation::from_file(&file, &other),
            Err(Error::SegmentationMismatch(_))
        ));
    }

    #[test]
    fn fleet_rejects_bad_input() {
        assert!(FleetModel::new(vec![], 0).is_err());
        assert!(FleetModel::new(vec![op("a", &[]), op("a", &[])], 1).is_err());
        assert!(FleetModel::new(vec![op("a", &[("1", -1.0)])], 1).is_err());
        let f = FleetModel::new(vec![op("a", &[("1", 0.0), ("2", 3.0)])], 1).unwrap();
        assert_eq!(f.operators()[0].sites.len(), 1);
        assert_eq!(f.capacity("a", "2"), 3.0);
    }

    /// Random valid segmentation: each site's D units dealt to random segments.
    fn arb_segmentation() -> impl Strategy<Value = (FleetModel, Segmentation)> {
        (1u32..5, proptest::collection::vec(1usize..4, 1..4), any::<u64>()).prop_map(|(d, sizes, seed)| {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let ops: Vec<Operator> = sizes
                .iter()
                .enumerate()
                .map(|(i, &n)| {
                    let caps: Vec<(String, f64)> =
                        (0..n).map(|j| (j.to_string(), rng.gen_range(1..100) as f64)).collect();
                    Operator::new(
                        format!("o{i}"),
                        true,
                        caps.into_iter().map(|(bus, capacity)| Site { bus, capacity }).collect(),
                    )
                })
                .collect();
            let fleet = FleetModel::new(ops, d).unwrap();
            let operators = fleet
                .operators()
                .iter()
                .map(|op| {
                    let slots = op.segment_slots(d);
                    let mut os = OperatorSegmentation {
                        used: vec![true; slots],
                        shares: vec![vec![0; slots]; op.sites.len()],
                    };
                    for row in &mut os.shares {
                        for _ in 0..d {
                            row[rng.gen_range(0..slots)] += 1;
                        }
                    }
                    os.compact(slots);
                    os
                })
                .collect();
            (
                fleet,
                Segmentation {
                    denominator: d,
                    operators,
                },
            )
        })
    }

    proptest! {
        #[test]
        fn file_round_trip((fleet, seg) in arb_segmentation()) {
            prop_assert!(validate_segmentation(&fleet, &seg).is_empty());
            let json = serde_json::to_string(&seg.to_file(&fleet)).unwrap();
            let file: SegmentationFile = serde_json::from_str(&json).unwrap();
            prop_assert_eq!(Segmentation::from_file(&file, &fleet).unwrap(), seg);
        }

        #[test]
        fn capacity_conserved((fleet, seg) in arb_segmentation()) {
            // Exact on the 1/D grid: numerators per site sum to D.
            for (op, os) in fleet.operators().iter().zip(&seg.operators) {
                let weighted: u64 = op.sites.iter().zip(&os.shares)
                    .map(|(s, row)| s.capacity as u64 * row.iter().map(|&x| x as u64).sum::<u64>())
                    .sum();
                let total: u64 = op.sites.iter().map(|s| s.capacity as u64).sum();
                prop_assert_eq!(weighted, total * seg.denominator as u64);
            }
        }

        #[test]
        fn maximal_uses_d_per_site(sizes in proptest::collection::vec(1usize..5, 1..4), d in 1u32..4) {
            let ops = sizes.iter().enumerate().map(|(i, &n)| {
                Operator::new(format!("o{i}"), true,
                    (0..n).map(|j| Site { bus: j.to_string(), capacity: 1.0 }).collect())
            }).collect();
            let fleet = FleetModel::new(ops, d).unwrap();
            let (seg, capped) = maximal_segmentation(&fleet);
            prop_assert!(capped.is_empty());
            for (op, os) in fleet.operators().iter().zip(&seg.operators) {
                prop_assert_eq!(os.segments_used(), d as usize * op.sites.len());
            }
            prop_assert!(validate_segmentation(&fleet, &seg).is_empty());
        }
    }
}
