//! Test suites, the two-rule oracle and the fitness function.
//!
//! A suite holds one case per (basis-state input, measurement basis) pair.
//! Fitness is the number of failing cases plus the Hellinger distance of
//! every case, so it is zero exactly when the candidate reproduces the
//! expected distributions.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::Circuit;
use crate::error::{Error, Result};
use crate::simulator::{self, format_bitstring, Distribution, MeasBasis, Simulator, StateVectorSimulator};

/// Widest reference accepted by [`generate_suite`] unless overridden.
pub const DEFAULT_MAX_SUITE_QUBITS: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct TestCase {
    pub id: String,
    pub input: usize,
    pub basis: MeasBasis,
    pub expected: Distribution,
}

impl TestCase {
    /// `"<input bits>-<basis>"`, e.g. `"01-X"`.
    pub fn make_id(input: usize, basis: MeasBasis, num_qubits: usize) -> String {
        format!("{}-{}", format_bitstring(input, num_qubits), basis)
    }

    pub fn parse_id(id: &str, num_qubits: usize) -> Result<(usize, MeasBasis)> {
        let bad = || Error::InvalidExpected(format!("malformed test id `{id}`"));
        let (bits, basis) = id.rsplit_once('-').ok_or_else(bad)?;
        let mut chars = basis.chars();
        let basis = match (chars.next(), chars.next()) {
            (Some(c), None) => MeasBasis::from_char(c).ok_or_else(bad)?,
            _ => return Err(bad()),
        };
        Ok((simulator::parse_bitstring(bits, num_qubits)?, basis))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestSuite {
    num_qubits: usize,
    cases: Vec<TestCase>,
    reference: Option<Circuit>,
}

impl TestSuite {
    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn cases(&self) -> &[TestCase] {
        &self.cases
    }

    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }

    pub fn reference(&self) -> Option<&Circuit> {
        self.reference.as_ref()
    }

    /// Builds a suite from a `{test_id: {bitstring: prob}}` map, for faults
    /// that come without a clean reference circuit.
    pub fn from_expected(num_qubits: usize, expected: &BTreeMap<String, BTreeMap<String, f64>>) -> Result<TestSuite> {
        let mut cases = Vec::with_capacity(expected.len());
        for (id, dist) in expected {
            let (input, basis) = TestCase::parse_id(id, num_qubits)?;
            let expected = Distribution::from_bitstrings(num_qubits, dist.iter().map(|(k, v)| (k.as_str(), *v)))?;
            cases.push(TestCase { id: TestCase::make_id(input, basis, num_qubits), input, basis, expected });
        }
        if cases.is_empty() {
            return Err(Error::InvalidExpected("no test cases".into()));
        }
        cases.sort_by(|a, b| a.id.cmp(&b.id));
        Ok(TestSuite { num_qubits, cases, reference: None })
    }

    pub fn from_expected_json(num_qubits: usize, json: &str) -> Result<TestSuite> {
        let map: BTreeMap<String, BTreeMap<String, f64>> =
            serde_json::from_str(json).map_err(|e| Error::InvalidExpected(e.to_string()))?;
        TestSuite::from_expected(num_qubits, &map)
    }

    /// The expected distributions in the same `{test_id: {bitstring: prob}}` shape.
    pub fn expected_map(&self) -> BTreeMap<String, BTreeMap<String, f64>> {
        self.cases.iter().map(|c| (c.id.clone(), c.expected.to_map())).collect()
    }
}

/// One case per input in `0..2^q` and per basis, expected values taken from `reference`.
pub fn generate_suite(reference: &Circuit) -> Result<TestSuite> {
    generate_suite_with_limit(reference, DEFAULT_MAX_SUITE_QUBITS)
}

pub fn generate_suite_with_limit(reference: &Circuit, max_qubits: usize) -> Result<TestSuite> {
    let q = reference.num_qubits();
    if q > max_qubits {
        return Err(Error::TooWide { qubits: q, max: max_qubits });
    }
    let mut cases = Vec::with_capacity(3 << q);
    for input in 0..1usize << q {
        for basis in MeasBasis::ALL {
            cases.push(TestCase {
                id: TestCase::make_id(input, basis, q),
                input,
                basis,
                expected: simulator::run_exact(reference, input, basis)?,
            });
        }
    }
    Ok(TestSuite { num_qubits: q, cases, reference: Some(reference.clone()) })
}

/// Hellinger distance `(1/√2)·‖√p − √q‖₂`, clamped to `[0, 1]`.
pub fn hellinger(p: &Distribution, q: &Distribution) -> f64 {
    assert_eq!(p.num_qubits(), q.num_qubits(), "distributions over different outcome spaces");
    let sum: f64 = p
        .probs()
        .iter()
        .zip(q.probs())
        .map(|(a, b)| {
            let d = a.sqrt() - b.sqrt();
            d * d
        })
        .sum();
    (sum.sqrt() * std::f64::consts::FRAC_1_SQRT_2).clamp(0.0, 1.0)
}

/// Outcome of one test case.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub passed: bool,
    pub hellinger: f64,
    pub wrong_output: bool,
}

/// Thresholds of the two-rule oracle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Oracle {
    /// Largest Hellinger distance a passing case may show.
    pub tau_fail: f64,
    /// Probabilities at or below this count as zero.
    pub eps_zero: f64,
}

impl Default for Oracle {
    fn default() -> Self {
        Oracle { tau_fail: 0.1, eps_zero: 1e-9 }
    }
}

impl Oracle {
    /// Default thresholds widened to absorb the noise of `shots` samples.
    pub fn for_shots(shots: usize) -> Self {
        Oracle { tau_fail: 0.1 + 2.0 / (shots as f64).sqrt(), ..Oracle::default() }
    }
}

/// A case fails if it shows an outcome the expectation rules out, or if its
/// distribution is further than `tau_fail` from the expected one.
pub fn judge(observed: &Distribution, tc: &TestCase, tau_fail: f64, eps_zero: f64) -> Verdict {
    let wrong_output = observed.probs().iter().zip(tc.expected.probs()).any(|(o, e)| *o > eps_zero && *e <= eps_zero);
    let hellinger = hellinger(observed, &tc.expected);
    Verdict { passed: !wrong_output && hellinger <= tau_fail, hellinger, wrong_output }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitnessScore {
    pub failed_count: usize,
    pub hellinger_sum: f64,
    pub value: f64,
    #[serde(skip)]
    pub verdicts: Vec<Verdict>,
}

impl FitnessScore {
    /// Reduces per-case verdicts in suite order.
    pub fn from_verdicts(verdicts: Vec<Verdict>) -> Self {
        let failed_count = verdicts.iter().filter(|v| !v.passed).count();
        let mut hellinger_sum = 0.0;
        for v in &verdicts {
            hellinger_sum += v.hellinger;
        }
        FitnessScore { failed_count, hellinger_sum, value: failed_count as f64 + hellinger_sum, verdicts }
    }

    pub fn all_passed(&self) -> bool {
        self.failed_count == 0
    }
}

/// How observed distributions are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShotsMode {
    /// Born-rule probabilities straight from the statevector.
    Exact,
    /// `2^q × 2` seeded shots per case.
    Sampled,
}

/// Runs a suite against candidate circuits.
pub struct Evaluator<'a, S: Simulator = StateVectorSimulator> {
    suite: &'a TestSuite,
    simulator: S,
    oracle: Oracle,
    mode: ShotsMode,
    seed: u64,
}

impl<'a> Evaluator<'a, StateVectorSimulator> {
    pub fn new(suite: &'a TestSuite) -> Self {
        Evaluator::with_simulator(suite, StateVectorSimulator)
    }
}

impl<'a, S: Simulator> Evaluator<'a, S> {
    pub fn with_simulator(suite: &'a TestSuite, simulator: S) -> Self {
        Evaluator { suite, simulator, oracle: Oracle::default(), mode: ShotsMode::Exact, seed: 0 }
    }

    pub fn oracle(mut self, oracle: Oracle) -> Self {
        self.oracle = oracle;
        self
    }

    pub fn mode(mut self, mode: ShotsMode, seed: u64) -> Self {
        self.mode = mode;
        self.seed = seed;
        self
    }

    pub fn suite(&self) -> &TestSuite {
        self.suite
    }

    pub fn simulator(&self) -> &S {
        &self.simulator
    }

    pub fn fitness(&self, c: &Circuit) -> Result<FitnessScore> {
        let q = self.suite.num_qubits;
        if c.num_qubits() != q {
            return Err(Error::WidthMismatch { expected: q, found: c.num_qubits() });
        }
        let run_case = |(i, tc): (usize, &TestCase)| -> Result<Verdict> {
            let exact = self.simulator.run(c, tc.input, tc.basis)?;
            let observed = match self.mode {
                ShotsMode::Exact => exact,
                ShotsMode::Sampled => simulator::sample(&exact, simulator::default_shots(q), case_seed(self.seed, i)),
            };
            Ok(judge(&observed, tc, self.oracle.tau_fail, self.oracle.eps_zero))
        };
        // Small registers are cheaper to run inline than to fan out.
        let verdicts: Result<Vec<Verdict>> = if q >= 6 {
            self.suite.cases.par_iter().enumerate().map(run_case).collect()
        } else {
            self.suite.cases.iter().enumerate().map(run_case).collect()
        };
        Ok(FitnessScore::from_verdicts(verdicts?))
    }
}

fn case_seed(seed: u64, case: usize) -> u64 {
    seed ^ (case as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Exact-mode fitness with default oracle thresholds.
pub fn fitness(c: &Circuit, ts: &TestSuite) -> Result<FitnessScore> {
    Evaluator::new(ts).fitness(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::GateKind;

    fn dist(q: usize, probs: &[f64]) -> Distribution {
        Distribution::from_probs(q, probs.to_vec()).unwrap()
    }

    fn bell() -> Circuit {
        Circuit::new(2).with(GateKind::H, &[0], &[]).unwrap().with(GateKind::Cx, &[0, 1], &[]).unwrap()
    }

    #[test]
    fn hellinger_values() {
        let p = dist(1, &[0.5, 0.5]);
        assert_eq!(hellinger(&p, &p), 0.0);
        assert_eq!(hellinger(&dist(1, &[1.0, 0.0]), &dist(1, &[0.0, 1.0])), 1.0);
        // sqrt(1 - 1/sqrt(2)) = 0.5411961001461970
        let h = hellinger(&p, &dist(1, &[1.0, 0.0]));
        assert!((h - 0.541_196_100_146_197).abs() < 1e-12, "{h}");
    }

    #[test]
    fn suite_size_and_ids() {
        let ts = generate_suite(&bell()).unwrap();
        assert_eq!(ts.len(), 12);
        assert_eq!(ts.cases()[0].id, "00-X");
        assert_eq!(ts.cases()[11].id, "11-Z");
        let z00 = ts.cases().iter().find(|c| c.id == "00-Z").unwrap();
        assert!((z00.expected.prob(0) - 0.5).abs() < 1e-12);
        assert!((z00.expected.prob(3) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn identity_reference_expects_points_in_z() {
        let ts = generate_suite(&Circuit::new(1).with(GateKind::Id, &[0], &[]).unwrap()).unwrap();
        let z: Vec<_> = ts.cases().iter().filter(|c| c.basis == MeasBasis::Z).collect();
        assert_eq!(z[0].expected, Distribution::point(1, 0));
        assert_eq!(z[1].expected, Distribution::point(1, 1));
    }

    #[test]
    fn suite_rejects_wide_reference() {
        let err = generate_suite_with_limit(&Circuit::new(5), 4).unwrap_err();
        assert!(matches!(err, Error::TooWide { qubits: 5, max: 4 }));
    }

    #[test]
    fn judge_rules() {
        let ts = generate_suite(&bell()).unwrap();
        let tc = ts.cases().iter().find(|c| c.id == "00-Z").unwrap();
        let ok = judge(&tc.expected, tc, 0.1, 1e-9);
        assert!(ok.passed && !ok.wrong_output && ok.hellinger == 0.0);

        let wrong = judge(&Distribution::point(2, 0b01), tc, 0.1, 1e-9);
        assert!(wrong.wrong_output && !wrong.passed);

        // H = (1/√2)·sqrt((√.7−√.5)² + (√.3−√.5)²) = 0.1452366588341136
        let skewed = judge(&dist(2, &[0.7, 0.0, 0.0, 0.3]), tc, 0.1, 1e-9);
        assert!(!skewed.wrong_output && !skewed.passed);
        assert!((skewed.hellinger - 0.145_236_658_834_113_6).abs() < 1e-12, "{}", skewed.hellinger);
        assert!(judge(&dist(2, &[0.7, 0.0, 0.0, 0.3]), tc, 0.2, 1e-9).passed);
    }

    #[test]
    fn fitness_of_reference_is_zero() {
        let ts = generate_suite(&bell()).unwrap();
        let f = fitness(&bell(), &ts).unwrap();
        assert_eq!(f.value, 0.0);
        assert_eq!(f.verdicts.len(), 12);
    }

    #[test]
    fn fitness_without_hadamard() {
        let ts = generate_suite(&bell()).unwrap();
        let f = fitness(&bell().remove_gate(0).unwrap(), &ts).unwrap();
        assert!(f.failed_count >= 1);
        assert!(f.value > 0.0);
        assert_eq!(f.value, f.failed_count as f64 + f.hellinger_sum);
    }

    #[test]
    fn fitness_width_mismatch() {
        let ts = generate_suite(&bell()).unwrap();
        assert!(matches!(fitness(&Circuit::new(3), &ts), Err(Error::WidthMismatch { expected: 2, found: 3 })));
    }

    #[test]
    fn expected_json_round_trip() {
        let ts = generate_suite(&bell()).unwrap();
        let json = serde_json::to_string(&ts.expected_map()).unwrap();
        let back = TestSuite::from_expected_json(2, &json).unwrap();
        assert_eq!(back.len(), 12);
        assert!(back.reference().is_none());
        assert_eq!(fitness(&bell(), &back).unwrap().failed_count, 0);
        assert!(TestSuite::from_expected_json(2, r#"{"0-Z": {"00": 1.0}}"#).is_err());
        assert!(TestSuite::from_expected_json(2, r#"{"00-Q": {"00": 1.0}}"#).is_err());
        assert!(TestSuite::from_expected_json(2, r#"{"00-Z": {"00": 0.4}}"#).is_err());
    }

    #[test]
    fn sampled_mode_is_seeded() {
        let ts = generate_suite(&bell()).unwrap();
        let eval = Evaluator::new(&ts).mode(ShotsMode::Sampled, 9).oracle(Oracle::for_shots(8));
        let a = eval.fitness(&bell()).unwrap();
        let b = eval.fitness(&bell()).unwrap();
        assert_eq!(a, b);
    }
}
