//! Iterative repair driven by gate suspiciousness, plus the random-search baseline.
//!
//! `repair` runs in two phases. The removal sweep scores every gate and may
//! already produce a fix. Otherwise the remaining budget is split evenly over
//! `iterations` rounds; each round consumes patches from a uniformly spread
//! queue, updates the suspiciousness of each patch's anchor gate, and at the
//! end of the round the queue is pruned to patches anchored on the most
//! suspicious `1 − i/I` fraction of gates.

use std::collections::HashSet;
use std::ops::ControlFlow;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{emit_qasm, Circuit, GateKind};
use crate::error::{Error, Result};
use crate::localizer::{localize_within, GateId, SuspiciousnessTable, SweepLimit, SweepOutcome};
use crate::optimizer::{minimize_until, OptBudget};
use crate::patcher::{generate_patches, order_uniform, prune_to_gates, Patch, PatchKind, DEFAULT_PATCH_CATALOG};
use crate::simulator::{Simulator, StateVectorSimulator};
use crate::testkit::{Evaluator, FitnessScore, Oracle, ShotsMode, TestSuite};

/// Total budget for one run, in either currency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Budget {
    Seconds(f64),
    /// Fitness evaluations (one evaluation runs the whole suite once).
    Evals(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairConfig {
    pub budget: Budget,
    pub iterations: usize,
    pub optimizer: OptBudget,
    pub tau_fail: f64,
    pub eps_zero: f64,
    pub shots_mode: ShotsMode,
    pub seed: u64,
    /// Length of the best-patch list in the report.
    pub top_k: usize,
    pub patch_catalog: Vec<GateKind>,
}

impl Default for RepairConfig {
    fn default() -> Self {
        let oracle = Oracle::default();
        RepairConfig {
            budget: Budget::Seconds(7200.0),
            iterations: 4,
            optimizer: OptBudget::default(),
            tau_fail: oracle.tau_fail,
            eps_zero: oracle.eps_zero,
            shots_mode: ShotsMode::Exact,
            seed: 0,
            top_k: 10,
            patch_catalog: DEFAULT_PATCH_CATALOG.to_vec(),
        }
    }
}

impl RepairConfig {
    pub fn with_eval_budget(evals: usize) -> Self {
        RepairConfig { budget: Budget::Evals(evals), ..RepairConfig::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("iterations must be at least 1".into()));
        }
        match self.budget {
            Budget::Evals(0) => return Err(Error::InvalidConfig("budget must be positive".into())),
            Budget::Seconds(s) if s.is_nan() || s <= 0.0 => {
                return Err(Error::InvalidConfig("budget must be positive".into()))
            }
            _ => {}
        }
        if self.optimizer.max_evals == 0 {
            return Err(Error::InvalidConfig("optimizer budget must be at least 1".into()));
        }
        Ok(())
    }

    fn oracle(&self) -> Oracle {
        Oracle { tau_fail: self.tau_fail, eps_zero: self.eps_zero }
    }
}

/// Tracks budget consumption for one run.
#[derive(Debug, Clone)]
struct Meter {
    budget: Budget,
    start: Instant,
    evals: usize,
}

impl Meter {
    fn new(budget: Budget) -> Self {
        Meter { budget, start: Instant::now(), evals: 0 }
    }

    fn exhausted(&self) -> bool {
        match self.budget {
            Budget::Evals(n) => self.evals >= n,
            Budget::Seconds(s) => self.start.elapsed().as_secs_f64() >= s,
        }
    }

    fn remaining_evals(&self) -> Option<usize> {
        match self.budget {
            Budget::Evals(n) => Some(n.saturating_sub(self.evals)),
            Budget::Seconds(_) => None,
        }
    }

    fn limit(&self) -> SweepLimit {
        match self.budget {
            Budget::Evals(n) => SweepLimit { max_evals: Some(n.saturating_sub(self.evals)), deadline: None },
            Budget::Seconds(s) => {
                SweepLimit { max_evals: None, deadline: Some(self.start + Duration::from_secs_f64(s)) }
            }
        }
    }
}

/// Budget window of one repair iteration: `[0, end)` measured from the start
/// of the patch phase, with `end = B_r · i / I`.
#[derive(Debug, Clone, Copy)]
enum Window {
    Evals { used_at_start: usize, end: usize },
    Seconds { started: Instant, end: f64 },
}

impl Window {
    fn remaining(&self, meter: &Meter) -> Option<usize> {
        match *self {
            Window::Evals { used_at_start, end } => Some(end.saturating_sub(meter.evals - used_at_start)),
            Window::Seconds { .. } => None,
        }
    }

    fn open(&self, meter: &Meter) -> bool {
        match *self {
            Window::Evals { .. } => self.remaining(meter).unwrap() > 0,
            Window::Seconds { started, end } => started.elapsed().as_secs_f64() < end && !meter.exhausted(),
        }
    }
}

/// Fraction of the ranking kept after iteration `i` of `total`.
pub fn pruning_keep_fraction(i: usize, total: usize) -> f64 {
    1.0 - i as f64 / total as f64
}

/// Number of gates kept after iteration `i`: `max(1, ceil(fraction × n))`.
pub fn pruning_keep_count(i: usize, total: usize, n_gates: usize) -> usize {
    let kept = (pruning_keep_fraction(i, total) * n_gates as f64 - 1e-9).ceil();
    (kept.max(0.0) as usize).max(1).min(n_gates)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Repaired,
    NotFixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchRecord {
    pub kind: PatchKind,
    pub position: usize,
    pub gate: GateKind,
    pub qubits: Vec<usize>,
    pub params: Vec<f64>,
    pub fitness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub gate_id: GateId,
    pub score: f64,
    pub percentile: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairReport {
    pub status: Status,
    pub repaired_qasm: Option<String>,
    pub best_patches: Vec<PatchRecord>,
    pub ranking: Vec<RankEntry>,
    pub improvement_pct: f64,
    pub fault_percentile: Option<f64>,
    pub evals_used: usize,
    pub wall_seconds: f64,
    pub baseline_fitness: f64,
    pub patches_tried: usize,
    pub localisation_complete: bool,
    pub config: RepairConfig,
}

impl RepairReport {
    /// Looks up a known faulty gate in the ranking and records its percentile.
    pub fn locate_fault(&mut self, fault: &GateId) -> Result<f64> {
        let entry =
            self.ranking.iter().find(|e| &e.gate_id == fault).ok_or_else(|| Error::UnknownGate(fault.to_string()))?;
        self.fault_percentile = Some(entry.percentile);
        Ok(entry.percentile)
    }

    pub fn repaired_circuit(&self) -> Option<Result<Circuit>> {
        self.repaired_qasm.as_deref().map(|q| crate::circuit::parse_qasm(q).map_err(Error::from))
    }
}

/// Best candidates seen so far, ascending by fitness, ties in evaluation order.
#[derive(Debug, Default)]
struct BestList {
    limit: usize,
    ceiling: f64,
    entries: Vec<PatchRecord>,
}

impl BestList {
    fn new(limit: usize, ceiling: f64) -> Self {
        BestList { limit, ceiling, entries: Vec::new() }
    }

    fn offer(&mut self, patch: &Patch, params: &[f64], fitness: f64) {
        if fitness > self.ceiling || self.limit == 0 {
            return;
        }
        let at = self.entries.partition_point(|e| e.fitness <= fitness);
        if at >= self.limit {
            return;
        }
        self.entries.insert(
            at,
            PatchRecord {
                kind: patch.kind,
                position: patch.position,
                gate: patch.gate,
                qubits: patch.qubits.clone(),
                params: params.to_vec(),
                fitness,
            },
        );
        self.entries.truncate(self.limit);
    }

    fn best(&self) -> Option<f64> {
        self.entries.first().map(|e| e.fitness)
    }
}

/// Everything a finished run needs to build its report.
struct RunState {
    meter: Meter,
    baseline: FitnessScore,
    table: SuspiciousnessTable,
    best: BestList,
    patches_tried: usize,
    localisation_complete: bool,
}

impl RunState {
    fn report(self, cfg: &RepairConfig, repaired: Option<&Circuit>) -> RepairReport {
        let ranking: Vec<RankEntry> = {
            let ranked = self.table.ranking();
            let n = ranked.len();
            ranked
                .into_iter()
                .enumerate()
                .map(|(i, (gate_id, score))| RankEntry {
                    gate_id,
                    score,
                    percentile: if n <= 1 { 0.0 } else { i as f64 / (n - 1) as f64 * 100.0 },
                })
                .collect()
        };
        let base = self.baseline.value;
        let improvement_pct = if repaired.is_some() {
            100.0
        } else {
            match self.best.best() {
                Some(best) if base > 0.0 => ((base - best) / base * 100.0).clamp(0.0, 100.0),
                _ => 0.0,
            }
        };
        RepairReport {
            status: if repaired.is_some() { Status::Repaired } else { Status::NotFixed },
            repaired_qasm: repaired.map(emit_qasm),
            best_patches: self.best.entries,
            ranking,
            improvement_pct,
            fault_percentile: None,
            evals_used: self.meter.evals,
            wall_seconds: self.meter.start.elapsed().as_secs_f64(),
            baseline_fitness: base,
            patches_tried: self.patches_tried,
            localisation_complete: self.localisation_complete,
            config: cfg.clone(),
        }
    }
}

fn evaluator<'a, S: Simulator>(ts: &'a TestSuite, cfg: &RepairConfig, sim: S) -> Evaluator<'a, S> {
    let oracle = match cfg.shots_mode {
        ShotsMode::Exact => cfg.oracle(),
        ShotsMode::Sampled => {
            // Widen the default threshold for shot noise unless the caller changed it.
            let shots = crate::simulator::default_shots(ts.num_qubits());
            if cfg.tau_fail == Oracle::default().tau_fail {
                Oracle { eps_zero: cfg.eps_zero, ..Oracle::for_shots(shots) }
            } else {
                cfg.oracle()
            }
        }
    };
    Evaluator::with_simulator(ts, sim).oracle(oracle).mode(cfg.shots_mode, cfg.seed)
}

/// Outcome of evaluating one patch.
struct Trial {
    params: Vec<f64>,
    fitness: FitnessScore,
    circuit: Circuit,
}

/// Evaluates `patch` on `c_init`, tuning angles when needed. `cap` bounds the
/// number of fitness evaluations; `sampler` replaces the optimizer with that
/// many random angle draws (used by random search).
fn try_patch<S: Simulator>(
    c_init: &Circuit,
    patch: &Patch,
    eval: &Evaluator<'_, S>,
    meter: &mut Meter,
    opt: OptBudget,
    cap: usize,
    sampler: Option<&mut ChaCha8Rng>,
) -> Result<Option<Trial>> {
    if cap == 0 {
        return Ok(None);
    }
    if !patch.needs_tuning() {
        let circuit = patch.apply(c_init, &[])?;
        let fitness = eval.fitness(&circuit)?;
        meter.evals += 1;
        return Ok(Some(Trial { params: patch.params.clone().unwrap_or_default(), fitness, circuit }));
    }
    let dim = patch.gate.param_count();
    let budget = OptBudget { max_evals: opt.max_evals.min(cap), ..opt };
    let mut best: Option<Trial> = None;
    let mut error = None;
    let mut consider = |angles: &[f64], meter: &mut Meter| -> ControlFlow<f64, f64> {
        let outcome = patch.apply(c_init, angles).and_then(|c| eval.fitness(&c).map(|f| (c, f)));
        meter.evals += 1;
        match outcome {
            Ok((circuit, fitness)) => {
                let value = fitness.value;
                let passed = fitness.all_passed();
                if best.as_ref().is_none_or(|b| value < b.fitness.value) || passed {
                    best = Some(Trial { params: angles.to_vec(), fitness, circuit });
                }
                if passed {
                    ControlFlow::Break(value)
                } else {
                    ControlFlow::Continue(value)
                }
            }
            Err(e) => {
                error = Some(e);
                ControlFlow::Break(f64::INFINITY)
            }
        }
    };
    match sampler {
        None => {
            minimize_until(|x| consider(x, meter), &vec![0.0; dim], budget);
        }
        Some(rng) => {
            for _ in 0..budget.max_evals {
                let angles: Vec<f64> =
                    (0..dim).map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)).collect();
                if consider(&angles, meter).is_break() {
                    break;
                }
            }
        }
    }
    if let Some(e) = error {
        return Err(e);
    }
    Ok(best)
}

/// Repairs `c_init` against `ts` with the default statevector backend.
pub fn repair(c_init: &Circuit, ts: &TestSuite, cfg: &RepairConfig) -> Result<RepairReport> {
    repair_with(c_init, ts, cfg, StateVectorSimulator)
}

pub fn repair_with<S: Simulator>(c_init: &Circuit, ts: &TestSuite, cfg: &RepairConfig, sim: S) -> Result<RepairReport> {
    cfg.validate()?;
    let eval = evaluator(ts, cfg, sim);
    let mut meter = Meter::new(cfg.budget);
    let baseline = eval.fitness(c_init)?;
    meter.evals += 1;
    if baseline.all_passed() {
        return Err(Error::NoFailingTest);
    }

    let loc = localize_within(c_init, &eval, &baseline, meter.limit())?;
    meter.evals += loc.evals;
    let mut state = RunState {
        meter,
        best: BestList::new(cfg.top_k, baseline.value),
        baseline,
        table: loc.table,
        patches_tried: 0,
        localisation_complete: loc.outcome != SweepOutcome::Exhausted,
    };
    for (position, fit) in &loc.removals {
        let deleted = &c_init.gates()[*position];
        let patch = Patch {
            kind: PatchKind::Delete,
            position: *position,
            gate: deleted.kind,
            qubits: deleted.qubits.clone(),
            params: Some(deleted.params.clone()),
            anchor: GateId::of(c_init, *position),
        };
        state.best.offer(&patch, &deleted.params, fit.value);
    }
    match loc.outcome {
        SweepOutcome::Repaired { circuit, .. } => return Ok(state.report(cfg, Some(&circuit))),
        SweepOutcome::Exhausted => return Err(Error::BudgetTooSmall(Box::new(state.report(cfg, None)))),
        SweepOutcome::Complete => {}
    }

    let mut queue = order_uniform(generate_patches(c_init, &cfg.patch_catalog), c_init);
    let phase_start = Instant::now();
    let used_at_start = state.meter.evals;
    let remaining_evals = state.meter.remaining_evals();
    let remaining_secs = match cfg.budget {
        Budget::Seconds(s) => (s - state.meter.start.elapsed().as_secs_f64()).max(0.0),
        Budget::Evals(_) => 0.0,
    };
    let total = cfg.iterations;
    for i in 1..=total {
        let window = match remaining_evals {
            Some(r) => Window::Evals { used_at_start, end: r * i / total },
            None => Window::Seconds { started: phase_start, end: remaining_secs * i as f64 / total as f64 },
        };
        while window.open(&state.meter) {
            let Some(patch) = queue.pop() else { break };
            let cap = window.remaining(&state.meter).unwrap_or(usize::MAX);
            let Some(trial) = try_patch(c_init, &patch, &eval, &mut state.meter, cfg.optimizer, cap, None)? else {
                break;
            };
            state.patches_tried += 1;
            if trial.fitness.all_passed() {
                state.best.offer(&patch, &trial.params, trial.fitness.value);
                return Ok(state.report(cfg, Some(&trial.circuit)));
            }
            if let Some(anchor) = &patch.anchor {
                state.table.add(anchor.position, state.baseline.value - trial.fitness.value);
            }
            state.best.offer(&patch, &trial.params, trial.fitness.value);
        }
        if queue.is_empty() || state.meter.exhausted() || i == total {
            break;
        }
        let keep: HashSet<GateId> = state.table.top(pruning_keep_count(i, total, state.table.len()));
        queue = prune_to_gates(queue, &keep);
    }
    Ok(state.report(cfg, None))
}

/// Unguided baseline: patches drawn uniformly without replacement from the
/// unordered pool; parametric patches get `optimizer.max_evals` random angle
/// draws instead of the optimizer.
pub fn random_search(c_init: &Circuit, ts: &TestSuite, cfg: &RepairConfig) -> Result<RepairReport> {
    random_search_with(c_init, ts, cfg, StateVectorSimulator)
}

pub fn random_search_with<S: Simulator>(
    c_init: &Circuit,
    ts: &TestSuite,
    cfg: &RepairConfig,
    sim: S,
) -> Result<RepairReport> {
    cfg.validate()?;
    let eval = evaluator(ts, cfg, sim);
    let mut meter = Meter::new(cfg.budget);
    let baseline = eval.fitness(c_init)?;
    meter.evals += 1;
    if baseline.all_passed() {
        return Err(Error::NoFailingTest);
    }
    let mut state = RunState {
        meter,
        best: BestList::new(cfg.top_k, baseline.value),
        baseline,
        table: SuspiciousnessTable::new(c_init),
        patches_tried: 0,
        localisation_complete: false,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut pool = generate_patches(c_init, &cfg.patch_catalog).into_vec();
    pool.shuffle(&mut rng);
    for patch in pool {
        if state.meter.exhausted() {
            break;
        }
        let cap = state.meter.remaining_evals().unwrap_or(usize::MAX);
        let Some(trial) = try_patch(c_init, &patch, &eval, &mut state.meter, cfg.optimizer, cap, Some(&mut rng))?
        else {
            break;
        };
        state.patches_tried += 1;
        if trial.fitness.all_passed() {
            state.best.offer(&patch, &trial.params, trial.fitness.value);
            return Ok(state.report(cfg, Some(&trial.circuit)));
        }
        if let Some(anchor) = &patch.anchor {
            state.table.add(anchor.position, state.baseline.value - trial.fitness.value);
        }
        state.best.offer(&patch, &trial.params, trial.fitness.value);
    }
    Ok(state.report(cfg, None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testkit::{fitness, generate_suite};

    fn bell() -> Circuit {
        let mut c = Circuit::new(2).with(GateKind::H, &[0], &[]).unwrap().with(GateKind::Cx, &[0, 1], &[]).unwrap();
        c.measure_all();
        c
    }

    fn bell_h_to_x() -> Circuit {
        bell().replace_gate(0, crate::circuit::GateApp::unparametrised(GateKind::X, &[0])).unwrap()
    }

    #[test]
    fn keep_fraction() {
        assert_eq!(pruning_keep_fraction(1, 4), 0.75);
        assert_eq!(pruning_keep_fraction(4, 4), 0.0);
        assert_eq!(pruning_keep_count(2, 4, 10), 5);
        assert_eq!(pruning_keep_count(1, 4, 10), 8);
        assert_eq!(pruning_keep_count(3, 4, 2), 1);
    }

    #[test]
    fn config_validation() {
        let mut cfg = RepairConfig::with_eval_budget(10);
        assert!(cfg.validate().is_ok());
        cfg.iterations = 0;
        assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
        assert!(RepairConfig::with_eval_budget(0).validate().is_err());
    }

    #[test]
    fn spurious_z_is_fixed_by_localisation() {
        let ts = generate_suite(&bell()).unwrap();
        let faulty = bell().with(GateKind::Z, &[0], &[]).unwrap();
        let report = repair(&faulty, &ts, &RepairConfig::with_eval_budget(100)).unwrap();
        assert_eq!(report.status, Status::Repaired);
        assert_eq!(report.patches_tried, 0);
        assert_eq!(report.improvement_pct, 100.0);
        let fixed = report.repaired_circuit().unwrap().unwrap();
        assert_eq!(fitness(&fixed, &ts).unwrap().failed_count, 0);
    }

    #[test]
    fn replaced_hadamard_is_restored() {
        let ts = generate_suite(&bell()).unwrap();
        let report = repair(&bell_h_to_x(), &ts, &RepairConfig::with_eval_budget(500)).unwrap();
        assert_eq!(report.status, Status::Repaired);
        let fixed = report.repaired_circuit().unwrap().unwrap();
        assert_eq!(fitness(&fixed, &ts).unwrap().failed_count, 0);
        assert!(report.evals_used <= 500);
    }

    #[test]
    fn random_search_is_deterministic_and_finds_fix() {
        let ts = generate_suite(&bell()).unwrap();
        let cfg = RepairConfig { seed: 5, ..RepairConfig::with_eval_budget(2000) };
        let a = random_search(&bell_h_to_x(), &ts, &cfg).unwrap();
        let b = random_search(&bell_h_to_x(), &ts, &cfg).unwrap();
        let strip = |mut r: RepairReport| {
            r.wall_seconds = 0.0;
            serde_json::to_string(&r).unwrap()
        };
        assert_eq!(strip(a.clone()), strip(b));
        assert_eq!(a.status, Status::Repaired);
    }

    #[test]
    fn random_search_with_no_budget_left() {
        let ts = generate_suite(&bell()).unwrap();
        let report = random_search(&bell_h_to_x(), &ts, &RepairConfig::with_eval_budget(1)).unwrap();
        assert_eq!(report.status, Status::NotFixed);
        assert_eq!(report.patches_tried, 0);
        assert_eq!(report.evals_used, 1);
    }

    #[test]
    fn budget_exhausted_during_localisation() {
        let ts = generate_suite(&bell()).unwrap();
        match repair(&bell_h_to_x(), &ts, &RepairConfig::with_eval_budget(2)) {
            Err(Error::BudgetTooSmall(report)) => {
                assert!(!report.localisation_complete);
                assert_eq!(report.status, Status::NotFixed);
                assert_eq!(report.evals_used, 2);
                assert_eq!(report.ranking.len(), 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn correct_circuit_is_rejected() {
        let ts = generate_suite(&bell()).unwrap();
        assert!(matches!(repair(&bell(), &ts, &RepairConfig::with_eval_budget(10)), Err(Error::NoFailingTest)));
        assert!(matches!(random_search(&bell(), &ts, &RepairConfig::with_eval_budget(10)), Err(Error::NoFailingTest)));
    }

    #[test]
    fn best_list_is_sorted_and_capped() {
        let patch = Patch {
            kind: PatchKind::Add,
            position: 0,
            gate: GateKind::X,
            qubits: vec![0],
            params: Some(vec![]),
            anchor: None,
        };
        let mut list = BestList::new(3, 5.0);
        for f in [4.0, 6.0, 1.0, 3.0, 2.0, 5.0] {
            list.offer(&patch, &[], f);
        }
        let got: Vec<f64> = list.entries.iter().map(|e| e.fitness).collect();
        assert_eq!(got, [1.0, 2.0, 3.0]);
    }
}
