//! Exact statevector execution and seeded shot sampling.
//!
//! Amplitudes are indexed little-endian: qubit 0 is the least-significant
//! bit of the basis-state index, and the rightmost character of an outcome
//! bitstring.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use num_complex::Complex64;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution as _;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, GateApp, GateKind};
use crate::error::{Error, Result};

/// Widest register the simulator accepts.
pub const MAX_QUBITS: usize = 24;

type Matrix2 = [[Complex64; 2]; 2];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Measurement basis applied uniformly to every qubit before readout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MeasBasis {
    X,
    Y,
    Z,
}

impl MeasBasis {
    pub const ALL: [MeasBasis; 3] = [MeasBasis::X, MeasBasis::Y, MeasBasis::Z];

    pub fn as_char(self) -> char {
        match self {
            MeasBasis::X => 'X',
            MeasBasis::Y => 'Y',
            MeasBasis::Z => 'Z',
        }
    }

    pub fn from_char(c: char) -> Option<MeasBasis> {
        match c {
            'X' | 'x' => Some(MeasBasis::X),
            'Y' | 'y' => Some(MeasBasis::Y),
            'Z' | 'z' => Some(MeasBasis::Z),
            _ => None,
        }
    }
}

impl fmt::Display for MeasBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

/// Probability of every outcome of a `num_qubits`-bit readout.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    num_qubits: usize,
    probs: Vec<f64>,
}

impl Distribution {
    /// Wraps raw probabilities; `probs.len()` must be `2^num_qubits`, entries
    /// non-negative and summing to 1 within 1e-9.
    pub fn from_probs(num_qubits: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != 1usize << num_qubits {
            return Err(Error::InvalidExpected(format!("{} probabilities for {num_qubits} qubits", probs.len())));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidExpected("negative or non-finite probability".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidExpected(format!("probabilities sum to {total}")));
        }
        Ok(Distribution { num_qubits, probs })
    }

    /// All mass on a single outcome.
    pub fn point(num_qubits: usize, outcome: usize) -> Self {
        let mut probs = vec![0.0; 1 << num_qubits];
        probs[outcome] = 1.0;
        Distribution { num_qubits, probs }
    }

    /// Builds a distribution from `{bitstring: prob}` pairs; missing outcomes are 0.
    pub fn from_bitstrings<'a>(num_qubits: usize, entries: impl IntoIterator<Item = (&'a str, f64)>) -> Result<Self> {
        let mut probs = vec![0.0; 1 << num_qubits];
        for (bits, p) in entries {
            let outcome = parse_bitstring(bits, num_qubits)?;
            probs[outcome] += p;
        }
        Distribution::from_probs(num_qubits, probs)
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, outcome: usize) -> f64 {
        self.probs[outcome]
    }

    /// Non-zero outcomes keyed by bitstring (qubit 0 rightmost).
    pub fn to_map(&self) -> BTreeMap<String, f64> {
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > 0.0)
            .map(|(i, p)| (format_bitstring(i, self.num_qubits), *p))
            .collect()
    }
}

pub fn format_bitstring(outcome: usize, num_qubits: usize) -> String {
    (0..num_qubits).rev().map(|q| if outcome >> q & 1 == 1 { '1' } else { '0' }).collect()
}

pub fn parse_bitstring(bits: &str, num_qubits: usize) -> Result<usize> {
    if bits.len() != num_qubits || !bits.chars().all(|c| c == '0' || c == '1') {
        return Err(Error::InvalidExpected(format!("`{bits}` is not a {num_qubits}-bit outcome")));
    }
    Ok(usize::from_str_radix(bits, 2).unwrap_or(0))
}

/// Pure-state register with in-place gate kernels.
#[derive(Debug, Clone)]
pub struct StateVector {
    num_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// The computational basis state `|index⟩`.
    pub fn basis(num_qubits: usize, index: usize) -> Self {
        let mut amps = vec![ZERO; 1 << num_qubits];
        amps[index] = ONE;
        StateVector { num_qubits, amps }
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn apply(&mut self, gate: &GateApp) {
        let q = &gate.qubits;
        match gate.kind {
            GateKind::Id | GateKind::Measure | GateKind::Barrier => {}
            GateKind::Cx | GateKind::Cz | GateKind::Cp | GateKind::Crz => {
                let m = target_matrix(gate.kind, &gate.params);
                self.apply_controlled(&[q[0]], q[1], &m);
            }
            GateKind::Ccx => {
                let m = target_matrix(GateKind::X, &[]);
                self.apply_controlled(&[q[0], q[1]], q[2], &m);
            }
            GateKind::Swap => self.apply_swap(q[0], q[1]),
            kind => {
                let m = target_matrix(kind, &gate.params);
                self.apply_single(q[0], &m);
            }
        }
    }

    fn apply_single(&mut self, target: usize, m: &Matrix2) {
        let mask = 1usize << target;
        for i in 0..self.amps.len() {
            if i & mask != 0 {
                continue;
            }
            let j = i | mask;
            let (a0, a1) = (self.amps[i], self.amps[j]);
            self.amps[i] = m[0][0] * a0 + m[0][1] * a1;
            self.amps[j] = m[1][0] * a0 + m[1][1] * a1;
        }
    }

    fn apply_controlled(&mut self, controls: &[usize], target: usize, m: &Matrix2) {
        let control_mask = controls.iter().fold(0usize, |acc, c| acc | 1 << c);
        let mask = 1usize << target;
        for i in 0..self.amps.len() {
            if i & mask != 0 || i & control_mask != control_mask {
                continue;
            }
            let j = i | mask;
            let (a0, a1) = (self.amps[i], self.amps[j]);
            self.amps[i] = m[0][0] * a0 + m[0][1] * a1;
            self.amps[j] = m[1][0] * a0 + m[1][1] * a1;
        }
    }

    fn apply_swap(&mut self, a: usize, b: usize) {
        let (ma, mb) = (1usize << a, 1usize << b);
        for i in 0..self.amps.len() {
            // visit each |..1_a..0_b..⟩ / |..0_a..1_b..⟩ pair once
            if i & ma != 0 && i & mb == 0 {
                self.amps.swap(i, (i & !ma) | mb);
            }
        }
    }

    /// Rotates every qubit so that a computational-basis readout measures `basis`.
    pub fn rotate_to(&mut self, basis: MeasBasis) {
        let h = target_matrix(GateKind::H, &[]);
        let sdg = target_matrix(GateKind::Sdg, &[]);
        for q in 0..self.num_qubits {
            match basis {
                MeasBasis::Z => {}
                MeasBasis::X => self.apply_single(q, &h),
                MeasBasis::Y => {
                    self.apply_single(q, &sdg);
                    self.apply_single(q, &h);
                }
            }
        }
    }
}

/// 2x2 matrix applied to the target qubit (for controlled gates, the
/// block applied when all controls are set).
fn target_matrix(kind: GateKind, params: &[f64]) -> Matrix2 {
    let i = Complex64::i();
    let phase = |theta: f64| Complex64::from_polar(1.0, theta);
    let r = FRAC_1_SQRT_2;
    match kind {
        GateKind::Id => [[ONE, ZERO], [ZERO, ONE]],
        GateKind::X | GateKind::Cx | GateKind::Ccx => [[ZERO, ONE], [ONE, ZERO]],
        GateKind::Y => [[ZERO, -i], [i, ZERO]],
        GateKind::Z | GateKind::Cz => [[ONE, ZERO], [ZERO, -ONE]],
        GateKind::H => [[ONE * r, ONE * r], [ONE * r, -ONE * r]],
        GateKind::S => [[ONE, ZERO], [ZERO, i]],
        GateKind::Sdg => [[ONE, ZERO], [ZERO, -i]],
        GateKind::T => [[ONE, ZERO], [ZERO, phase(std::f64::consts::FRAC_PI_4)]],
        GateKind::Tdg => [[ONE, ZERO], [ZERO, phase(-std::f64::consts::FRAC_PI_4)]],
        GateKind::Rx => {
            let (s, c) = (params[0] / 2.0).sin_cos();
            [[ONE * c, -i * s], [-i * s, ONE * c]]
        }
        GateKind::Ry => {
            let (s, c) = (params[0] / 2.0).sin_cos();
            [[ONE * c, -ONE * s], [ONE * s, ONE * c]]
        }
        GateKind::Rz | GateKind::Crz => [[phase(-params[0] / 2.0), ZERO], [ZERO, phase(params[0] / 2.0)]],
        GateKind::P | GateKind::Cp => [[ONE, ZERO], [ZERO, phase(params[0])]],
        GateKind::U => {
            let (theta, phi, lambda) = (params[0], params[1], params[2]);
            let (s, c) = (theta / 2.0).sin_cos();
            [[ONE * c, -phase(lambda) * s], [phase(phi) * s, phase(phi + lambda) * c]]
        }
        GateKind::Swap | GateKind::Measure | GateKind::Barrier => {
            unreachable!("{kind} has no single-qubit block")
        }
    }
}

/// Final statevector after preparing `|input⟩` and applying `c`.
pub fn run_state(c: &Circuit, input: usize) -> Result<StateVector> {
    let q = c.num_qubits();
    if q > MAX_QUBITS {
        return Err(Error::TooWide { qubits: q, max: MAX_QUBITS });
    }
    if input >> q != 0 {
        return Err(Error::WidthMismatch { expected: q, found: (usize::BITS - input.leading_zeros()) as usize });
    }
    let mut state = StateVector::basis(q, input);
    for gate in c.gates() {
        state.apply(gate);
    }
    Ok(state)
}

/// Exact outcome probabilities for `c` on basis input `input`, read out in `basis`.
pub fn run_exact(c: &Circuit, input: usize, basis: MeasBasis) -> Result<Distribution> {
    let mut state = run_state(c, input)?;
    state.rotate_to(basis);
    Ok(Distribution { num_qubits: c.num_qubits(), probs: state.probabilities() })
}

/// Empirical distribution of `shots` seeded draws from `d`.
pub fn sample(d: &Distribution, shots: usize, seed: u64) -> Distribution {
    let shots = shots.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let index = WeightedIndex::new(&d.probs).expect("distribution has positive mass");
    let mut counts = vec![0usize; d.probs.len()];
    for _ in 0..shots {
        counts[index.sample(&mut rng)] += 1;
    }
    let probs = counts.into_iter().map(|k| k as f64 / shots as f64).collect();
    Distribution { num_qubits: d.num_qubits, probs }
}

/// Shot count used in sampled mode: `2^q × 2`.
pub fn default_shots(num_qubits: usize) -> usize {
    (1usize << num_qubits) * 2
}

/// Anything that can execute a circuit on a basis input and report a distribution.
///
/// The repair engine only talks to this trait, so callers can wrap the
/// default backend (for instance to count executions).
pub trait Simulator: Sync {
    fn run(&self, c: &Circuit, input: usize, basis: MeasBasis) -> Result<Distribution>;
}

/// Exact statevector backend.
#[derive(Debug, Clone, Copy, Default)]
pub struct StateVectorSimulator;

impl Simulator for StateVectorSimulator {
    fn run(&self, c: &Circuit, input: usize, basis: MeasBasis) -> Result<Distribution> {
        run_exact(c, input, basis)
    }
}

impl<S: Simulator + ?Sized> Simulator for &S {
    fn run(&self, c: &Circuit, input: usize, basis: MeasBasis) -> Result<Distribution> {
        (**self).run(c, input, basis)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bell() -> Circuit {
        Circuit::new(2).with(GateKind::H, &[0], &[]).unwrap().with(GateKind::Cx, &[0, 1], &[]).unwrap()
    }

    #[test]
    fn bell_in_z_basis() {
        let d = run_exact(&bell(), 0, MeasBasis::Z).unwrap();
        let expected = [0.5, 0.0, 0.0, 0.5];
        for (p, e) in d.probs().iter().zip(expected) {
            assert!((p - e).abs() < 1e-12);
        }
        assert_eq!(d.to_map().keys().collect::<Vec<_>>(), ["00", "11"]);
    }

    #[test]
    fn empty_circuit_is_point_mass() {
        let d = run_exact(&Circuit::new(3), 0, MeasBasis::Z).unwrap();
        assert_eq!(d, Distribution::point(3, 0));
    }

    #[test]
    fn basis_rotations() {
        // |0⟩ read in X is uniform; |+i⟩ = S H |0⟩ reads as a point in Y.
        let d = run_exact(&Circuit::new(1), 0, MeasBasis::X).unwrap();
        assert!((d.prob(0) - 0.5).abs() < 1e-12);
        let plus_i = Circuit::new(1).with(GateKind::H, &[0], &[]).unwrap().with(GateKind::S, &[0], &[]).unwrap();
        let d = run_exact(&plus_i, 0, MeasBasis::Y).unwrap();
        assert!((d.prob(0) - 1.0).abs() < 1e-12, "{d:?}");
    }

    #[test]
    fn little_endian_ordering() {
        let c = Circuit::new(3).with(GateKind::X, &[0], &[]).unwrap();
        let d = run_exact(&c, 0, MeasBasis::Z).unwrap();
        assert_eq!(d.to_map().keys().next().unwrap(), "001");
        let d = run_exact(&Circuit::new(3), 0b100, MeasBasis::Z).unwrap();
        assert_eq!(d.prob(4), 1.0);
    }

    #[test]
    fn input_out_of_range() {
        assert!(matches!(run_exact(&bell(), 4, MeasBasis::Z), Err(Error::WidthMismatch { expected: 2, .. })));
    }

    #[test]
    fn shots_formula() {
        assert_eq!(default_shots(1), 4);
        assert_eq!(default_shots(2), 8);
        assert_eq!(default_shots(13), 16384);
    }

    #[test]
    fn sampling_point_mass() {
        let d = Distribution::point(2, 0b01);
        let s = sample(&d, 8, 7);
        assert_eq!(s, d);
    }

    #[test]
    fn sampling_support_and_determinism() {
        let d = run_exact(&bell(), 0, MeasBasis::Z).unwrap();
        let a = sample(&d, 8, 42);
        let b = sample(&d, 8, 42);
        assert_eq!(a, b);
        assert_eq!(a.prob(0b01) + a.prob(0b10), 0.0);
        assert!((a.prob(0) + a.prob(3) - 1.0).abs() < 1e-12);
        let k = a.prob(0) * 8.0;
        assert!((k - k.round()).abs() < 1e-12);
    }

    #[test]
    fn bitstring_helpers() {
        assert_eq!(format_bitstring(0b011, 3), "011");
        assert_eq!(parse_bitstring("110", 3).unwrap(), 6);
        assert!(parse_bitstring("12", 2).is_err());
        assert!(parse_bitstring("1", 2).is_err());
    }
}
