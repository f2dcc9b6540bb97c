//! Gate catalog and gate applications.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Every gate the toolchain understands. Anything else is rejected at parse time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateKind {
    Id,
    X,
    Y,
    Z,
    H,
    S,
    Sdg,
    T,
    Tdg,
    Rx,
    Ry,
    Rz,
    P,
    U,
    Cx,
    Cz,
    Cp,
    Crz,
    Swap,
    Ccx,
    Measure,
    Barrier,
}

impl GateKind {
    /// The unitary gates, in catalog order.
    pub const UNITARY: [GateKind; 20] = [
        GateKind::Id,
        GateKind::X,
        GateKind::Y,
        GateKind::Z,
        GateKind::H,
        GateKind::S,
        GateKind::Sdg,
        GateKind::T,
        GateKind::Tdg,
        GateKind::Rx,
        GateKind::Ry,
        GateKind::Rz,
        GateKind::P,
        GateKind::U,
        GateKind::Cx,
        GateKind::Cz,
        GateKind::Cp,
        GateKind::Crz,
        GateKind::Swap,
        GateKind::Ccx,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GateKind::Id => "id",
            GateKind::X => "x",
            GateKind::Y => "y",
            GateKind::Z => "z",
            GateKind::H => "h",
            GateKind::S => "s",
            GateKind::Sdg => "sdg",
            GateKind::T => "t",
            GateKind::Tdg => "tdg",
            GateKind::Rx => "rx",
            GateKind::Ry => "ry",
            GateKind::Rz => "rz",
            GateKind::P => "p",
            GateKind::U => "u",
            GateKind::Cx => "cx",
            GateKind::Cz => "cz",
            GateKind::Cp => "cp",
            GateKind::Crz => "crz",
            GateKind::Swap => "swap",
            GateKind::Ccx => "ccx",
            GateKind::Measure => "measure",
            GateKind::Barrier => "barrier",
        }
    }

    /// Looks up a gate by its qelib1 name. A few legacy aliases map onto the
    /// canonical catalog entry (`u3`/`U` to `u`, `u1` to `p`, `cu1` to `cp`, `CX` to `cx`).
    pub fn from_name(name: &str) -> Option<GateKind> {
        let kind = match name {
            "id" | "i" => GateKind::Id,
            "x" => GateKind::X,
            "y" => GateKind::Y,
            "z" => GateKind::Z,
            "h" => GateKind::H,
            "s" => GateKind::S,
            "sdg" => GateKind::Sdg,
            "t" => GateKind::T,
            "tdg" => GateKind::Tdg,
            "rx" => GateKind::Rx,
            "ry" => GateKind::Ry,
            "rz" => GateKind::Rz,
            "p" | "u1" => GateKind::P,
            "u" | "u3" | "U" => GateKind::U,
            "cx" | "CX" => GateKind::Cx,
            "cz" => GateKind::Cz,
            "cp" | "cu1" => GateKind::Cp,
            "crz" => GateKind::Crz,
            "swap" => GateKind::Swap,
            "ccx" => GateKind::Ccx,
            "measure" => GateKind::Measure,
            "barrier" => GateKind::Barrier,
            _ => return None,
        };
        Some(kind)
    }

    pub fn param_count(self) -> usize {
        match self {
            GateKind::Rx | GateKind::Ry | GateKind::Rz | GateKind::P | GateKind::Cp | GateKind::Crz => 1,
            GateKind::U => 3,
            _ => 0,
        }
    }

    /// Number of qubits the gate acts on. Barriers are variadic and report 0.
    pub fn arity(self) -> usize {
        match self {
            GateKind::Cx | GateKind::Cz | GateKind::Cp | GateKind::Crz | GateKind::Swap => 2,
            GateKind::Ccx => 3,
            GateKind::Barrier => 0,
            _ => 1,
        }
    }

    pub fn is_parametric(self) -> bool {
        self.param_count() > 0
    }

    pub fn is_unitary(self) -> bool {
        !matches!(self, GateKind::Measure | GateKind::Barrier)
    }

    /// Swapping the operands leaves the gate unchanged.
    pub fn is_symmetric(self) -> bool {
        matches!(self, GateKind::Cz | GateKind::Cp | GateKind::Swap)
    }

    /// Diagonal in the computational basis.
    pub fn is_diagonal(self) -> bool {
        matches!(
            self,
            GateKind::Id
                | GateKind::Z
                | GateKind::S
                | GateKind::Sdg
                | GateKind::T
                | GateKind::Tdg
                | GateKind::Rz
                | GateKind::P
                | GateKind::Cz
                | GateKind::Cp
                | GateKind::Crz
        )
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One gate placed in a circuit.
///
/// `position` is the gate's index in the repairable gate list and is kept
/// contiguous by [`Circuit`](super::Circuit) on every edit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateApp {
    pub kind: GateKind,
    pub qubits: Vec<usize>,
    pub params: Vec<f64>,
    pub position: usize,
}

impl GateApp {
    /// Builds a gate with a placeholder position; circuits renumber on insertion.
    pub fn new(kind: GateKind, qubits: Vec<usize>, params: Vec<f64>) -> Self {
        GateApp { kind, qubits, params, position: 0 }
    }

    pub fn unparametrised(kind: GateKind, qubits: &[usize]) -> Self {
        GateApp::new(kind, qubits.to_vec(), Vec::new())
    }

    /// Kind, qubits and parameters match; position is ignored.
    pub fn same_operation(&self, other: &GateApp) -> bool {
        self.kind == other.kind && self.qubits == other.qubits && self.params == other.params
    }
}

impl fmt::Display for GateApp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind)?;
        if !self.params.is_empty() {
            let params: Vec<String> = self.params.iter().map(|p| format!("{p}")).collect();
            write!(f, "({})", params.join(","))?;
        }
        let qubits: Vec<String> = self.qubits.iter().map(|q| format!("q{q}")).collect();
        write!(f, " {}", qubits.join(","))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_param_counts() {
        for kind in GateKind::UNITARY {
            let expected = match kind {
                GateKind::Rx | GateKind::Ry | GateKind::Rz | GateKind::P | GateKind::Cp | GateKind::Crz => 1,
                GateKind::U => 3,
                _ => 0,
            };
            assert_eq!(kind.param_count(), expected, "{kind}");
        }
    }

    #[test]
    fn names_round_trip() {
        for kind in GateKind::UNITARY {
            assert_eq!(GateKind::from_name(kind.name()), Some(kind));
        }
        assert_eq!(GateKind::from_name("u3"), Some(GateKind::U));
        assert_eq!(GateKind::from_name("cu1"), Some(GateKind::Cp));
        assert_eq!(GateKind::from_name("rzz"), None);
    }
}
