//! Worst-case load-altering attacks from compromised EV-charging operators on
//! a DC power grid, and segmentation of operator infrastructure to bound them.

pub mod adversary;
pub mod ccg;
pub mod error;
pub mod fleet;
pub mod grid;
pub mod heuristics;
pub mod ingest;
pub mod instance;
pub mod milp;
pub mod oracle;
pub mod synth;

pub use adversary::{AdversaryParams, AttackInstance, AttackOutcome};
pub use ccg::{run_ccg, CcgLimits, DefenseResult, DefenseStatus};
pub use error::{Error, Result};
pub use fleet::{FleetModel, Operator, Segmentation, Site};
pub use grid::{GridCase, NetworkMatrices};
pub use heuristics::{HeuristicResult, HeuristicSpec, Scheme};
pub use instance::Instance;
pub use milp::SolverOptions;
