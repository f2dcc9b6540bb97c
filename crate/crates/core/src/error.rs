use thiserror::Error;

use crate::circuit::QasmError;
use crate::engine::RepairReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("gate index {index} out of range for {len} gates")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("qubit {qubit} out of range for a {width}-qubit circuit")]
    QubitOutOfRange { qubit: usize, width: usize },
    #[error("invalid gate: {0}")]
    InvalidGate(String),
    #[error("width mismatch: expected {expected} qubits, found {found}")]
    WidthMismatch { expected: usize, found: usize },
    #[error("{qubits} qubits exceeds the configured maximum of {max}")]
    TooWide { qubits: usize, max: usize },
    #[error("the circuit passes every test case; nothing to repair")]
    NoFailingTest,
    #[error("unknown gate identity {0}")]
    UnknownGate(String),
    #[error("every generated mutant is equivalent under the test suite")]
    NoNonEquivalentMutant,
    #[error("budget exhausted during fault localisation")]
    BudgetTooSmall(Box<RepairReport>),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid expected-distribution data: {0}")]
    InvalidExpected(String),
    #[error(transparent)]
    Qasm(#[from] QasmError),
}
