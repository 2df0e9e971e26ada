//! Solvers for the collaborative dial-a-ride problem with workload-balance
//! constraints.
//!
//! Several transport companies pool their ride requests and vehicles. A joint
//! plan minimizes total routing cost while bounding, per company, how much
//! direct travel time (`S_m`) and how many passengers (`U_m`) it acquires
//! from or concedes to partners.
//!
//! * [`model`]: instances, coalition structure and balance thresholds
//! * [`schedule`], [`solution`]: route timing, feasibility, cost and balances
//! * [`measures`]: request relatedness and closeness tables
//! * [`alns`]: adaptive large neighborhood search
//! * [`oracle`]: exhaustive exact solver for tiny instances
//! * [`milp`]: LP-format model export and solution import
//! * [`generator`], [`io`]: synthetic instances and file formats
//! * [`bench`]: solve, benchmark and multi-day harness

pub mod alns;
pub mod bench;
pub mod error;
pub mod generator;
pub mod io;
pub mod measures;
pub mod milp;
pub mod model;
pub mod oracle;
pub mod schedule;
pub mod solution;

pub use error::{Error, Result};
pub use model::{BalanceSpec, Instance, Mode};
pub use solution::Solution;
