//! Circuit intermediate representation.
//!
//! A [`Circuit`] keeps its unitary gates in program order; measurements and
//! barriers are stored alongside but never take part in gate indexing, so
//! positions `0..n` always address the repairable gates.

mod gate;
mod qasm;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use gate::{GateApp, GateKind};
pub use qasm::{emit_qasm, parse_qasm, QasmError};

use crate::error::{Error, Result};

/// A barrier sitting in front of the gate at `before` (or at the end when
/// `before == gates.len()`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Barrier {
    pub before: usize,
    pub qubits: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    num_qubits: usize,
    num_clbits: usize,
    gates: Vec<GateApp>,
    measurements: BTreeMap<usize, usize>,
    barriers: Vec<Barrier>,
}

impl Circuit {
    pub fn new(num_qubits: usize) -> Self {
        Circuit::with_clbits(num_qubits, 0)
    }

    pub fn with_clbits(num_qubits: usize, num_clbits: usize) -> Self {
        Circuit { num_qubits, num_clbits, gates: Vec::new(), measurements: BTreeMap::new(), barriers: Vec::new() }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn num_clbits(&self) -> usize {
        self.num_clbits
    }

    pub fn gates(&self) -> &[GateApp] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn measurements(&self) -> &BTreeMap<usize, usize> {
        &self.measurements
    }

    pub fn barriers(&self) -> &[Barrier] {
        &self.barriers
    }

    /// Appends a gate while building a circuit.
    pub fn push(&mut self, mut gate: GateApp) -> Result<()> {
        self.validate(&gate)?;
        gate.position = self.gates.len();
        self.gates.push(gate);
        Ok(())
    }

    /// Builder-style [`push`](Self::push) for the common case of a fixed gate.
    pub fn with(mut self, kind: GateKind, qubits: &[usize], params: &[f64]) -> Result<Self> {
        self.push(GateApp::new(kind, qubits.to_vec(), params.to_vec()))?;
        Ok(self)
    }

    /// Maps `qubit` onto classical bit `clbit`, growing the classical register if needed.
    pub fn measure(&mut self, qubit: usize, clbit: usize) -> Result<()> {
        if qubit >= self.num_qubits {
            return Err(Error::QubitOutOfRange { qubit, width: self.num_qubits });
        }
        self.num_clbits = self.num_clbits.max(clbit + 1);
        self.measurements.insert(qubit, clbit);
        Ok(())
    }

    /// Measures qubit `i` into clbit `i` for every qubit.
    pub fn measure_all(&mut self) {
        self.num_clbits = self.num_clbits.max(self.num_qubits);
        for q in 0..self.num_qubits {
            self.measurements.insert(q, q);
        }
    }

    pub fn add_barrier(&mut self, qubits: Vec<usize>) -> Result<()> {
        for &qubit in &qubits {
            if qubit >= self.num_qubits {
                return Err(Error::QubitOutOfRange { qubit, width: self.num_qubits });
            }
        }
        self.barriers.push(Barrier { before: self.gates.len(), qubits });
        Ok(())
    }

    /// Checks a gate against the catalog and this circuit's width.
    pub fn validate(&self, gate: &GateApp) -> Result<()> {
        if !gate.kind.is_unitary() {
            return Err(Error::InvalidGate(format!("{} is not a repairable gate", gate.kind)));
        }
        if gate.qubits.len() != gate.kind.arity() {
            return Err(Error::InvalidGate(format!(
                "{} acts on {} qubits, got {}",
                gate.kind,
                gate.kind.arity(),
                gate.qubits.len()
            )));
        }
        if gate.params.len() != gate.kind.param_count() {
            return Err(Error::InvalidGate(format!(
                "{} takes {} parameters, got {}",
                gate.kind,
                gate.kind.param_count(),
                gate.params.len()
            )));
        }
        if let Some(p) = gate.params.iter().find(|p| !p.is_finite()) {
            return Err(Error::InvalidGate(format!("non-finite angle {p}")));
        }
        for (i, &qubit) in gate.qubits.iter().enumerate() {
            if qubit >= self.num_qubits {
                return Err(Error::QubitOutOfRange { qubit, width: self.num_qubits });
            }
            if gate.qubits[..i].contains(&qubit) {
                return Err(Error::InvalidGate(format!("{} repeats qubit {qubit}", gate.kind)));
            }
        }
        Ok(())
    }

    pub fn remove_gate(&self, pos: usize) -> Result<Circuit> {
        if pos >= self.gates.len() {
            return Err(Error::IndexOutOfRange { index: pos, len: self.gates.len() });
        }
        let mut out = self.clone();
        out.gates.remove(pos);
        for barrier in &mut out.barriers {
            if barrier.before > pos {
                barrier.before -= 1;
            }
        }
        out.renumber();
        Ok(out)
    }

    /// Inserts `gate` so that it ends up at index `pos`.
    pub fn insert_gate(&self, pos: usize, gate: GateApp) -> Result<Circuit> {
        if pos > self.gates.len() {
            return Err(Error::IndexOutOfRange { index: pos, len: self.gates.len() });
        }
        self.validate(&gate)?;
        let mut out = self.clone();
        out.gates.insert(pos, gate);
        // A barrier in front of `pos` ends up in front of the inserted gate.
        for barrier in &mut out.barriers {
            if barrier.before > pos {
                barrier.before += 1;
            }
        }
        out.renumber();
        Ok(out)
    }

    pub fn replace_gate(&self, pos: usize, gate: GateApp) -> Result<Circuit> {
        if pos >= self.gates.len() {
            return Err(Error::IndexOutOfRange { index: pos, len: self.gates.len() });
        }
        self.validate(&gate)?;
        let mut out = self.clone();
        out.gates[pos] = gate;
        out.renumber();
        Ok(out)
    }

    /// Gate list equality with parameters rounded to 1e-9; measurements and
    /// barriers are ignored.
    pub fn structurally_equal(&self, other: &Circuit) -> bool {
        self.num_qubits == other.num_qubits && self.structural_key() == other.structural_key()
    }

    /// Hashable form of the gate list used for syntactic deduplication.
    pub fn structural_key(&self) -> Vec<(GateKind, Vec<usize>, Vec<i64>)> {
        self.gates
            .iter()
            .map(|g| {
                let params = g.params.iter().map(|p| (p * 1e9).round() as i64).collect();
                (g.kind, g.qubits.clone(), params)
            })
            .collect()
    }

    fn renumber(&mut self) {
        for (i, gate) in self.gates.iter_mut().enumerate() {
            gate.position = i;
        }
    }
}
