//! Reference circuits in the style of the MQT benchmark families.

use std::f64::consts::PI;

use crate::circuit::{Circuit, GateApp, GateKind};
use crate::error::{Error, Result};

fn build(n: usize, gates: Vec<(GateKind, Vec<usize>, Vec<f64>)>) -> Circuit {
    let mut c = Circuit::new(n);
    for (kind, qubits, params) in gates {
        c.push(GateApp::new(kind, qubits, params)).expect("benchmark gates are valid");
    }
    c.measure_all();
    c
}

fn g(kind: GateKind, qubits: &[usize]) -> (GateKind, Vec<usize>, Vec<f64>) {
    (kind, qubits.to_vec(), Vec::new())
}

fn gp(kind: GateKind, qubits: &[usize], params: &[f64]) -> (GateKind, Vec<usize>, Vec<f64>) {
    (kind, qubits.to_vec(), params.to_vec())
}

pub fn ghz(n: usize) -> Circuit {
    let mut gates = vec![g(GateKind::H, &[0])];
    for i in 0..n.saturating_sub(1) {
        gates.push(g(GateKind::Cx, &[i, i + 1]));
    }
    build(n, gates)
}

/// Deutsch-Jozsa with a balanced oracle; the last qubit is the ancilla.
pub fn dj(n: usize) -> Circuit {
    let anc = n - 1;
    let flipped: Vec<usize> = (0..anc).filter(|i| i % 2 == 0).collect();
    let mut gates = vec![g(GateKind::X, &[anc])];
    gates.extend((0..n).map(|q| g(GateKind::H, &[q])));
    gates.extend(flipped.iter().map(|&q| g(GateKind::X, &[q])));
    gates.extend((0..anc).map(|q| g(GateKind::Cx, &[q, anc])));
    gates.extend(flipped.iter().map(|&q| g(GateKind::X, &[q])));
    gates.extend((0..anc).map(|q| g(GateKind::H, &[q])));
    build(n, gates)
}

pub fn graphstate(n: usize) -> Circuit {
    let mut gates: Vec<_> = (0..n).map(|q| g(GateKind::H, &[q])).collect();
    if n == 2 {
        gates.push(g(GateKind::Cz, &[0, 1]));
    } else {
        gates.extend((0..n).map(|i| g(GateKind::Cz, &[i, (i + 1) % n])));
    }
    build(n, gates)
}

pub fn wstate(n: usize) -> Circuit {
    let mut gates = vec![g(GateKind::X, &[n - 1])];
    for m in 1..n {
        let theta = (1.0 / (n - m + 1) as f64).sqrt().acos();
        let (control, target) = (n - m, n - m - 1);
        gates.push(gp(GateKind::Ry, &[target], &[-theta]));
        gates.push(g(GateKind::Cz, &[control, target]));
        gates.push(gp(GateKind::Ry, &[target], &[theta]));
    }
    for k in (1..n).rev() {
        gates.push(g(GateKind::Cx, &[k - 1, k]));
    }
    build(n, gates)
}

pub fn qft(n: usize) -> Circuit {
    let mut gates = Vec::new();
    for j in (0..n).rev() {
        gates.push(g(GateKind::H, &[j]));
        for k in (0..j).rev() {
            gates.push(gp(GateKind::Cp, &[k, j], &[PI / (1u64 << (j - k)) as f64]));
        }
    }
    for i in 0..n / 2 {
        gates.push(g(GateKind::Swap, &[i, n - 1 - i]));
    }
    build(n, gates)
}

/// Three-qubit Grover search for `|101⟩`, two iterations.
pub fn grover3() -> Circuit {
    let ccz = |gates: &mut Vec<_>| {
        gates.push(g(GateKind::H, &[2]));
        gates.push(g(GateKind::Ccx, &[0, 1, 2]));
        gates.push(g(GateKind::H, &[2]));
    };
    let mut gates: Vec<_> = (0..3).map(|q| g(GateKind::H, &[q])).collect();
    for _ in 0..2 {
        gates.push(g(GateKind::X, &[1]));
        ccz(&mut gates);
        gates.push(g(GateKind::X, &[1]));
        gates.extend((0..3).map(|q| g(GateKind::H, &[q])));
        gates.extend((0..3).map(|q| g(GateKind::X, &[q])));
        ccz(&mut gates);
        gates.extend((0..3).map(|q| g(GateKind::X, &[q])));
        gates.extend((0..3).map(|q| g(GateKind::H, &[q])));
    }
    build(3, gates)
}

/// Looks up a circuit by family name and width, e.g. `ghz3`, `qft4`, `grover3`.
pub fn by_name(name: &str) -> Result<Circuit> {
    let split = name.find(|ch: char| ch.is_ascii_digit()).unwrap_or(name.len());
    let (family, digits) = name.split_at(split);
    let n: usize = digits.parse().map_err(|_| Error::InvalidConfig(format!("unknown benchmark {name:?}")))?;
    let min = match family {
        "dj" => 2,
        "grover" => 3,
        _ => 2,
    };
    if n < min || n > 12 {
        return Err(Error::InvalidConfig(format!("unsupported width in {name:?}")));
    }
    Ok(match family {
        "ghz" => ghz(n),
        "dj" => dj(n),
        "graphstate" => graphstate(n),
        "wstate" => wstate(n),
        "qft" => qft(n),
        "grover" if n == 3 => grover3(),
        _ => return Err(Error::InvalidConfig(format!("unknown benchmark {name:?}"))),
    })
}

/// Ten reference circuits between 2 and 6 qubits.
pub fn catalog() -> Vec<(&'static str, Circuit)> {
    vec![
        ("ghz2", ghz(2)),
        ("ghz6", ghz(6)),
        ("dj4", dj(4)),
        ("graphstate4", graphstate(4)),
        ("graphstate5", graphstate(5)),
        ("wstate3", wstate(3)),
        ("wstate4", wstate(4)),
        ("qft3", qft(3)),
        ("qft4", qft(4)),
        ("grover3", grover3()),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::{run_exact, MeasBasis};

    fn z_probs(c: &Circuit) -> Vec<f64> {
        run_exact(c, 0, MeasBasis::Z).unwrap().probs().to_vec()
    }

    #[test]
    fn ghz_is_cat_state() {
        let p = z_probs(&ghz(3));
        assert!((p[0] - 0.5).abs() < 1e-12 && (p[7] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn wstate_has_uniform_single_excitations() {
        let p = z_probs(&wstate(4));
        for (i, pi) in p.iter().enumerate() {
            let expected = if (i as u32).count_ones() == 1 { 0.25 } else { 0.0 };
            assert!((pi - expected).abs() < 1e-12, "{i}: {pi}");
        }
    }

    #[test]
    fn balanced_dj_never_returns_zero() {
        let p = z_probs(&dj(4));
        let zero_inputs: f64 = p.iter().enumerate().filter(|(i, _)| i & 0b111 == 0).map(|(_, v)| v).sum();
        assert!(zero_inputs < 1e-12);
    }

    #[test]
    fn grover_amplifies_marked_state() {
        let p = z_probs(&grover3());
        assert!(p[0b101] > 0.9, "{}", p[0b101]);
    }

    #[test]
    fn qft_of_zero_is_uniform() {
        for v in z_probs(&qft(3)) {
            assert!((v - 0.125).abs() < 1e-12);
        }
    }

    #[test]
    fn names_resolve() {
        assert_eq!(by_name("qft4").unwrap(), qft(4));
        assert!(by_name("nope3").is_err());
        assert!(by_name("ghz").is_err());
        assert_eq!(catalog().len(), 10);
    }
}
