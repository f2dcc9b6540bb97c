//! Fault localisation by single-gate removal.
//!
//! Every gate of the faulty circuit is removed in turn and the suite re-run.
//! A gate's suspiciousness accumulates `baseline − fit(candidate)` for every
//! candidate linked to it, so gates whose edits lower fitness rise to the top.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::circuit::{Circuit, GateKind};
use crate::error::{Error, Result};
use crate::simulator::Simulator;
use crate::testkit::{Evaluator, FitnessScore};

/// Identity of a gate in the original (unedited) circuit.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GateId {
    pub position: usize,
    pub kind: GateKind,
    pub qubits: Vec<usize>,
}

impl GateId {
    pub fn of(c: &Circuit, position: usize) -> Option<GateId> {
        c.gates().get(position).map(|g| GateId { position, kind: g.kind, qubits: g.qubits.clone() })
    }
}

impl fmt::Display for GateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let qs: Vec<String> = self.qubits.iter().map(|q| q.to_string()).collect();
        write!(f, "{}:{}[{}]", self.position, self.kind, qs.join(","))
    }
}

impl FromStr for GateId {
    type Err = Error;

    /// Parses the `position:kind[q0,q1]` form produced by `Display`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::UnknownGate(s.to_string());
        let (pos, rest) = s.split_once(':').ok_or_else(bad)?;
        let (kind, qubits) = rest.strip_suffix(']').and_then(|r| r.split_once('[')).ok_or_else(bad)?;
        let qubits = if qubits.is_empty() {
            Vec::new()
        } else {
            qubits.split(',').map(|q| q.parse().map_err(|_| bad())).collect::<Result<_>>()?
        };
        Ok(GateId {
            position: pos.parse().map_err(|_| bad())?,
            kind: GateKind::from_name(kind).ok_or_else(bad)?,
            qubits,
        })
    }
}

impl Serialize for GateId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for GateId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Accumulated suspiciousness per gate of the faulty circuit.
#[derive(Debug, Clone, PartialEq)]
pub struct SuspiciousnessTable {
    entries: Vec<(GateId, f64)>,
}

impl SuspiciousnessTable {
    /// Every repairable gate starts at zero.
    pub fn new(c: &Circuit) -> Self {
        let entries = (0..c.len()).map(|p| (GateId::of(c, p).unwrap(), 0.0)).collect();
        SuspiciousnessTable { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn add(&mut self, position: usize, delta: f64) {
        self.entries[position].1 += delta;
    }

    pub fn score(&self, gate: &GateId) -> Option<f64> {
        self.entries.get(gate.position).filter(|(id, _)| id == gate).map(|(_, s)| *s)
    }

    pub fn score_at(&self, position: usize) -> f64 {
        self.entries[position].1
    }

    /// Most suspicious first; ties go to the earlier gate.
    pub fn ranking(&self) -> Vec<(GateId, f64)> {
        let mut ranked = self.entries.clone();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.position.cmp(&b.0.position)));
        ranked
    }

    /// Position of `gate` in the ranking scaled to `[0, 100]`; 0 is the top.
    pub fn rank_percentile(&self, gate: &GateId) -> Result<f64> {
        let ranking = self.ranking();
        let index =
            ranking.iter().position(|(id, _)| id == gate).ok_or_else(|| Error::UnknownGate(gate.to_string()))?;
        if ranking.len() == 1 {
            return Ok(0.0);
        }
        Ok(index as f64 / (ranking.len() - 1) as f64 * 100.0)
    }

    /// The `count` highest-ranked gates.
    pub fn top(&self, count: usize) -> HashSet<GateId> {
        self.ranking().into_iter().take(count).map(|(id, _)| id).collect()
    }
}

/// Caps on the removal sweep. `None` means unlimited.
#[derive(Debug, Clone, Copy, Default)]
pub struct SweepLimit {
    pub max_evals: Option<usize>,
    pub deadline: Option<Instant>,
}

impl SweepLimit {
    fn exhausted(&self, evals: usize) -> bool {
        self.max_evals.is_some_and(|m| evals >= m) || self.deadline.is_some_and(|d| Instant::now() >= d)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SweepOutcome {
    /// Every removal was evaluated and none passed the suite.
    Complete,
    /// Removing the gate at `position` made every test pass.
    Repaired { position: usize, circuit: Circuit, fitness: FitnessScore },
    /// The limit ran out before every gate was tried.
    Exhausted,
}

#[derive(Debug, Clone)]
pub struct Localization {
    pub table: SuspiciousnessTable,
    pub outcome: SweepOutcome,
    /// Fitness of each evaluated removal, in position order.
    pub removals: Vec<(usize, FitnessScore)>,
    pub evals: usize,
    pub elapsed: Duration,
}

/// Runs the full removal sweep.
pub fn localize<S: Simulator>(
    c_init: &Circuit,
    eval: &Evaluator<'_, S>,
    baseline: &FitnessScore,
) -> Result<Localization> {
    localize_within(c_init, eval, baseline, SweepLimit::default())
}

/// Removal sweep that stops early when `limit` is reached.
///
/// Scores always use `baseline` as the reference fitness. The first removal
/// (in position order) that passes every case short-circuits the sweep.
pub fn localize_within<S: Simulator>(
    c_init: &Circuit,
    eval: &Evaluator<'_, S>,
    baseline: &FitnessScore,
    limit: SweepLimit,
) -> Result<Localization> {
    if baseline.all_passed() {
        return Err(Error::NoFailingTest);
    }
    let start = Instant::now();
    let mut table = SuspiciousnessTable::new(c_init);
    let mut removals = Vec::with_capacity(c_init.len());
    let mut evals = 0;
    let mut outcome = SweepOutcome::Complete;
    for position in 0..c_init.len() {
        if limit.exhausted(evals) {
            outcome = SweepOutcome::Exhausted;
            break;
        }
        let candidate = c_init.remove_gate(position)?;
        let fit = eval.fitness(&candidate)?;
        evals += 1;
        if fit.all_passed() {
            outcome = SweepOutcome::Repaired { position, circuit: candidate, fitness: fit.clone() };
            removals.push((position, fit));
            break;
        }
        table.add(position, baseline.value - fit.value);
        removals.push((position, fit));
    }
    Ok(Localization { table, outcome, removals, evals, elapsed: start.elapsed() })
}
