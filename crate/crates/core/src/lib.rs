//! Fault localisation and automated repair of quantum circuits.
//!
//! A faulty circuit is compared against expected output distributions over
//! every basis input in the X, Y and Z measurement bases. Gates are ranked by
//! how much removing or patching them improves the fitness, and patches are
//! tried in order of that ranking until every test passes or the budget runs
//! out.

pub mod bench;
pub mod circuit;
pub mod engine;
pub mod error;
pub mod localizer;
pub mod optimizer;
pub mod patcher;
pub mod simulator;
pub mod testkit;

pub use circuit::{emit_qasm, parse_qasm, Circuit, GateApp, GateKind};
pub use engine::{random_search, repair, Budget, RepairConfig, RepairReport, Status};
pub use error::{Error, Result};
pub use localizer::{localize, GateId, SuspiciousnessTable};
pub use patcher::{generate_patches, inject_faults, order_uniform, Patch, PatchKind};
pub use simulator::{run_exact, Distribution, MeasBasis, Simulator, StateVectorSimulator};
pub use testkit::{fitness, generate_suite, hellinger, Evaluator, FitnessScore, Oracle, TestSuite};
