//! Candidate patches and fault injection.
//!
//! A patch is a single gate edit against the faulty circuit: insert a gate
//! before position `p`, or replace the gate at `p`. Every patch is linked to
//! an anchor gate of the original circuit so suspiciousness-based pruning can
//! drop whole regions of the pool at once.

use std::collections::{BTreeMap, HashSet, VecDeque};
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{emit_qasm, Circuit, GateApp, GateKind};
use crate::error::{Error, Result};
use crate::localizer::GateId;
use crate::testkit::{generate_suite, Evaluator};

/// Gates tried by default when generating patches.
pub const DEFAULT_PATCH_CATALOG: [GateKind; 12] = [
    GateKind::X,
    GateKind::Y,
    GateKind::Z,
    GateKind::H,
    GateKind::S,
    GateKind::T,
    GateKind::Rx,
    GateKind::Ry,
    GateKind::Rz,
    GateKind::Cx,
    GateKind::Cz,
    GateKind::Swap,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PatchKind {
    Add,
    Replace,
    /// Only produced by the removal sweep; never generated into a pool.
    Delete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Patch {
    pub kind: PatchKind,
    pub position: usize,
    pub gate: GateKind,
    pub qubits: Vec<usize>,
    /// `None` while the angles still have to be tuned.
    pub params: Option<Vec<f64>>,
    pub anchor: Option<GateId>,
}

impl Patch {
    pub fn needs_tuning(&self) -> bool {
        self.params.is_none()
    }

    /// Applies the patch to `c` using `angles` for an untuned parametric gate.
    pub fn apply(&self, c: &Circuit, angles: &[f64]) -> Result<Circuit> {
        Ok(self.apply_with_undo(c, angles)?.0)
    }

    /// Applies the patch and returns what is needed to take it back out.
    pub fn apply_with_undo(&self, c: &Circuit, angles: &[f64]) -> Result<(Circuit, Undo)> {
        match self.kind {
            PatchKind::Add => {
                let out = c.insert_gate(self.position, self.gate_app(angles)?)?;
                Ok((out, Undo::Remove(self.position)))
            }
            PatchKind::Replace => {
                let displaced = c
                    .gates()
                    .get(self.position)
                    .cloned()
                    .ok_or(Error::IndexOutOfRange { index: self.position, len: c.len() })?;
                let out = c.replace_gate(self.position, self.gate_app(angles)?)?;
                Ok((out, Undo::Restore(displaced)))
            }
            PatchKind::Delete => {
                let displaced = c
                    .gates()
                    .get(self.position)
                    .cloned()
                    .ok_or(Error::IndexOutOfRange { index: self.position, len: c.len() })?;
                Ok((c.remove_gate(self.position)?, Undo::Reinsert(displaced)))
            }
        }
    }

    /// The gate this patch writes into the circuit.
    pub fn gate_app(&self, angles: &[f64]) -> Result<GateApp> {
        let params = match &self.params {
            Some(p) => p.clone(),
            None if angles.len() == self.gate.param_count() => angles.to_vec(),
            None => {
                return Err(Error::InvalidGate(format!(
                    "{} needs {} angles, got {}",
                    self.gate,
                    self.gate.param_count(),
                    angles.len()
                )))
            }
        };
        Ok(GateApp::new(self.gate, self.qubits.clone(), params))
    }

    /// Identity used for pool deduplication.
    fn key(&self) -> (PatchKind, usize, GateKind, Vec<usize>) {
        (self.kind, self.position, self.gate, self.qubits.clone())
    }
}

impl fmt::Display for Patch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            PatchKind::Add => "add",
            PatchKind::Replace => "replace",
            PatchKind::Delete => "delete",
        };
        let qs: Vec<String> = self.qubits.iter().map(|q| format!("q{q}")).collect();
        write!(f, "{kind}@{} {} {}", self.position, self.gate, qs.join(","))
    }
}

/// Inverse of an applied patch.
#[derive(Debug, Clone, PartialEq)]
pub enum Undo {
    Remove(usize),
    Restore(GateApp),
    Reinsert(GateApp),
}

impl Undo {
    pub fn revert(&self, patched: &Circuit) -> Result<Circuit> {
        match self {
            Undo::Remove(pos) => patched.remove_gate(*pos),
            Undo::Restore(gate) => patched.replace_gate(gate.position, gate.clone()),
            Undo::Reinsert(gate) => patched.insert_gate(gate.position, gate.clone()),
        }
    }
}

/// An ordered list of patches consumed front to back.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PatchQueue {
    patches: VecDeque<Patch>,
}

impl PatchQueue {
    pub fn new(patches: Vec<Patch>) -> Self {
        PatchQueue { patches: patches.into() }
    }

    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Patch> {
        self.patches.iter()
    }

    pub fn pop(&mut self) -> Option<Patch> {
        self.patches.pop_front()
    }

    pub fn into_vec(self) -> Vec<Patch> {
        self.patches.into()
    }
}

fn qubit_tuples(arity: usize, width: usize, symmetric: bool) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(arity);
    fn rec(arity: usize, width: usize, symmetric: bool, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == arity {
            out.push(current.clone());
            return;
        }
        for q in 0..width {
            if current.contains(&q) || (symmetric && current.last().is_some_and(|&last| q < last)) {
                continue;
            }
            current.push(q);
            rec(arity, width, symmetric, current, out);
            current.pop();
        }
    }
    rec(arity, width, symmetric, &mut current, &mut out);
    out
}

fn same_qubits(kind: GateKind, a: &[usize], b: &[usize]) -> bool {
    if kind.is_symmetric() {
        let (mut a, mut b) = (a.to_vec(), b.to_vec());
        a.sort_unstable();
        b.sort_unstable();
        a == b
    } else {
        a == b
    }
}

/// Every single-gate insertion and replacement over `catalog`.
///
/// Ordered qubit tuples are used, except for gates symmetric in their
/// operands (cz, cp, swap) where one order suffices. Replacements that
/// reproduce the existing gate are skipped.
pub fn generate_patches(c: &Circuit, catalog: &[GateKind]) -> PatchQueue {
    let width = c.num_qubits();
    let kinds: Vec<GateKind> = catalog.iter().copied().filter(|k| k.is_unitary() && k.arity() <= width).collect();
    let tuples: Vec<(GateKind, Vec<Vec<usize>>)> =
        kinds.iter().map(|&k| (k, qubit_tuples(k.arity(), width, k.is_symmetric()))).collect();
    let n = c.len();
    let anchor_for_add = |pos: usize| GateId::of(c, pos.min(n.saturating_sub(1)));
    let mut pool = Vec::new();
    let mut seen = HashSet::new();
    let mut push = |patch: Patch, pool: &mut Vec<Patch>| {
        if seen.insert(patch.key()) {
            pool.push(patch);
        }
    };
    for pos in 0..=n {
        for (kind, qubit_sets) in &tuples {
            let params = if kind.is_parametric() { None } else { Some(Vec::new()) };
            for qubits in qubit_sets {
                push(
                    Patch {
                        kind: PatchKind::Add,
                        position: pos,
                        gate: *kind,
                        qubits: qubits.clone(),
                        params: params.clone(),
                        anchor: anchor_for_add(pos),
                    },
                    &mut pool,
                );
                if pos == n {
                    continue;
                }
                let existing = &c.gates()[pos];
                // Parametric replacements of the same gate can still retune its angle.
                let no_op =
                    existing.kind == *kind && same_qubits(*kind, &existing.qubits, qubits) && !kind.is_parametric();
                if no_op {
                    continue;
                }
                push(
                    Patch {
                        kind: PatchKind::Replace,
                        position: pos,
                        gate: *kind,
                        qubits: qubits.clone(),
                        params: params.clone(),
                        anchor: GateId::of(c, pos),
                    },
                    &mut pool,
                );
            }
        }
    }
    PatchQueue::new(pool)
}

/// Spreads the pool across the circuit.
///
/// Positions are visited round-robin. Each visit takes one patch, alternating
/// between insertions and replacements at that position, and within each of
/// those lists the gate kinds are interleaved so that successive picks at the
/// same position use different gates. Starting kinds are staggered by
/// position so early picks cover a variety of gates.
pub fn order_uniform(pool: PatchQueue, c: &Circuit) -> PatchQueue {
    let n = c.len();
    let mut kinds: Vec<GateKind> = pool.iter().map(|p| p.gate).collect();
    kinds.sort();
    kinds.dedup();
    // per position: [adds, replaces], each as kind-interleaved lists
    let mut slots: BTreeMap<usize, [VecDeque<Patch>; 2]> = BTreeMap::new();
    let mut grouped: BTreeMap<(usize, usize), BTreeMap<GateKind, VecDeque<Patch>>> = BTreeMap::new();
    for patch in pool.into_vec() {
        let side = usize::from(patch.kind != PatchKind::Add);
        grouped.entry((patch.position, side)).or_default().entry(patch.gate).or_default().push_back(patch);
    }
    for ((pos, side), mut by_kind) in grouped {
        let k = kinds.len().max(1);
        let mut order: Vec<GateKind> = kinds.clone();
        order.rotate_left((pos + side) % k);
        let mut lane = VecDeque::new();
        loop {
            let mut took = false;
            for kind in &order {
                if let Some(p) = by_kind.get_mut(kind).and_then(|q| q.pop_front()) {
                    lane.push_back(p);
                    took = true;
                }
            }
            if !took {
                break;
            }
        }
        slots.entry(pos).or_default()[side] = lane;
    }
    let mut out = Vec::new();
    let mut visits = vec![0usize; n + 1];
    while !slots.is_empty() {
        let positions: Vec<usize> = slots.keys().copied().collect();
        for pos in positions {
            let lanes = slots.get_mut(&pos).unwrap();
            let prefer = (pos + visits[pos.min(n)]) % 2;
            visits[pos.min(n)] += 1;
            let pick = lanes[prefer].pop_front().or_else(|| lanes[1 - prefer].pop_front());
            if let Some(p) = pick {
                out.push(p);
            }
            if lanes[0].is_empty() && lanes[1].is_empty() {
                slots.remove(&pos);
            }
        }
    }
    PatchQueue::new(out)
}

/// Keeps patches whose anchor is in `keep`, preserving order. Anchorless
/// patches (possible only for an empty circuit) are kept.
pub fn prune_to_gates(q: PatchQueue, keep: &HashSet<GateId>) -> PatchQueue {
    PatchQueue::new(q.into_vec().into_iter().filter(|p| p.anchor.as_ref().is_none_or(|a| keep.contains(a))).collect())
}

/// Mutation operator families used to build faulty circuits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MutationGroup {
    Add,
    Remove,
    Replace,
}

impl MutationGroup {
    pub const ALL: [MutationGroup; 3] = [MutationGroup::Add, MutationGroup::Remove, MutationGroup::Replace];

    pub fn name(self) -> &'static str {
        match self {
            MutationGroup::Add => "add",
            MutationGroup::Remove => "remove",
            MutationGroup::Replace => "replace",
        }
    }
}

/// Gates that mutation operators insert or substitute.
pub const DEFAULT_MUTATION_CATALOG: [GateKind; 11] = [
    GateKind::X,
    GateKind::Y,
    GateKind::Z,
    GateKind::H,
    GateKind::S,
    GateKind::Sdg,
    GateKind::T,
    GateKind::Tdg,
    GateKind::Cx,
    GateKind::Cz,
    GateKind::Swap,
];

#[derive(Debug, Clone, PartialEq)]
pub struct Mutant {
    pub id: String,
    pub group: MutationGroup,
    pub circuit: Circuit,
    /// The faulty gate in the mutant's own numbering. For removals this is
    /// the gate now sitting where the removed one was (or the last gate).
    pub fault: Option<GateId>,
    pub description: String,
}

fn candidates(c: &Circuit, group: MutationGroup, catalog: &[GateKind]) -> Vec<(Circuit, Option<GateId>, String)> {
    let n = c.len();
    let mut out = Vec::new();
    match group {
        MutationGroup::Add => {
            for pos in 0..=n {
                for &kind in catalog.iter().filter(|k| !k.is_parametric() && k.arity() <= c.num_qubits()) {
                    for qubits in qubit_tuples(kind.arity(), c.num_qubits(), false) {
                        let gate = GateApp::new(kind, qubits, Vec::new());
                        let desc = format!("add {gate} at {pos}");
                        if let Ok(m) = c.insert_gate(pos, gate) {
                            let fault = GateId::of(&m, pos);
                            out.push((m, fault, desc));
                        }
                    }
                }
            }
        }
        MutationGroup::Remove => {
            for pos in 0..n {
                let m = c.remove_gate(pos).expect("position in range");
                let fault = GateId::of(&m, pos.min(m.len().saturating_sub(1)));
                out.push((m, fault, format!("remove {} at {pos}", c.gates()[pos])));
            }
        }
        MutationGroup::Replace => {
            for pos in 0..n {
                let original = &c.gates()[pos];
                for &kind in catalog.iter().filter(|k| !k.is_parametric()) {
                    if kind == original.kind || kind.arity() != original.kind.arity() {
                        continue;
                    }
                    let gate = GateApp::new(kind, original.qubits.clone(), Vec::new());
                    let desc = format!("replace {original} at {pos} with {gate}");
                    if let Ok(m) = c.replace_gate(pos, gate) {
                        let fault = GateId::of(&m, pos);
                        out.push((m, fault, desc));
                    }
                }
            }
        }
    }
    out
}

/// Injects single-gate faults into a correct circuit.
///
/// All mutants of each operator group are enumerated and deduplicated
/// syntactically (first occurrence wins, across groups). Each group is then
/// shuffled with a seeded RNG and walked until `per_group` mutants that fail
/// at least one test of `c`'s suite have been found.
pub fn inject_faults(c: &Circuit, seed: u64, per_group: usize) -> Result<Vec<Mutant>> {
    inject_faults_with(c, seed, per_group, &DEFAULT_MUTATION_CATALOG)
}

pub fn inject_faults_with(c: &Circuit, seed: u64, per_group: usize, catalog: &[GateKind]) -> Result<Vec<Mutant>> {
    let suite = generate_suite(c)?;
    let eval = Evaluator::new(&suite);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::new();
    seen.insert(c.structural_key());
    let mut mutants = Vec::new();
    for group in MutationGroup::ALL {
        let mut pool: Vec<_> =
            candidates(c, group, catalog).into_iter().filter(|(m, _, _)| seen.insert(m.structural_key())).collect();
        pool.shuffle(&mut rng);
        let mut taken = 0;
        for (circuit, fault, description) in pool {
            if taken == per_group {
                break;
            }
            if eval.fitness(&circuit)?.all_passed() {
                continue;
            }
            mutants.push(Mutant { id: format!("{}-{taken}", group.name()), group, circuit, fault, description });
            taken += 1;
        }
    }
    if mutants.is_empty() && per_group > 0 {
        return Err(Error::NoNonEquivalentMutant);
    }
    Ok(mutants)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub file: String,
    pub group: MutationGroup,
    pub fault_gate: Option<GateId>,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub seed: u64,
    pub per_group: usize,
    pub mutants: Vec<ManifestEntry>,
}

/// Writes one `<id>.qasm` per mutant plus `manifest.json` into `dir`.
pub fn write_corpus(dir: &Path, mutants: &[Mutant], seed: u64, per_group: usize) -> std::io::Result<CorpusManifest> {
    std::fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(mutants.len());
    for m in mutants {
        let file = format!("{}.qasm", m.id);
        std::fs::write(dir.join(&file), emit_qasm(&m.circuit))?;
        entries.push(ManifestEntry {
            id: m.id.clone(),
            file,
            group: m.group,
            fault_gate: m.fault.clone(),
            description: m.description.clone(),
        });
    }
    let manifest = CorpusManifest { seed, per_group, mutants: entries };
    let json = serde_json::to_string_pretty(&manifest).map_err(std::io::Error::other)?;
    std::fs::write(dir.join("manifest.json"), json + "\n")?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h_only() -> Circuit {
        Circuit::new(1).with(GateKind::H, &[0], &[]).unwrap()
    }

    #[test]
    fn single_gate_pool_by_hand() {
        let pool = generate_patches(&h_only(), &[GateKind::X, GateKind::H]);
        let adds = pool.iter().filter(|p| p.kind == PatchKind::Add).count();
        let replaces: Vec<_> = pool.iter().filter(|p| p.kind == PatchKind::Replace).collect();
        assert_eq!(adds, 4);
        assert_eq!(replaces.len(), 1);
        assert_eq!(replaces[0].gate, GateKind::X);
        assert_eq!(pool.len(), 5);
    }

    #[test]
    fn empty_circuit_pool() {
        let pool = generate_patches(&Circuit::new(1), &[GateKind::X, GateKind::H, GateKind::Rz]);
        assert_eq!(pool.len(), 3);
        assert!(pool.iter().all(|p| p.kind == PatchKind::Add && p.anchor.is_none()));
    }

    #[test]
    fn cx_in_both_orders() {
        let c = Circuit::new(2).with(GateKind::H, &[0], &[]).unwrap();
        let pool = generate_patches(&c, &[GateKind::Cx, GateKind::Cz]);
        let cx_adds: HashSet<Vec<usize>> = pool
            .iter()
            .filter(|p| p.gate == GateKind::Cx && p.kind == PatchKind::Add && p.position == 0)
            .map(|p| p.qubits.clone())
            .collect();
        assert_eq!(cx_adds, HashSet::from([vec![0, 1], vec![1, 0]]));
        let cz_adds =
            pool.iter().filter(|p| p.gate == GateKind::Cz && p.kind == PatchKind::Add && p.position == 0).count();
        assert_eq!(cz_adds, 1);
    }

    #[test]
    fn anchors() {
        let c = Circuit::new(1).with(GateKind::H, &[0], &[]).unwrap().with(GateKind::X, &[0], &[]).unwrap();
        let pool = generate_patches(&c, &[GateKind::Z]);
        for p in pool.iter() {
            let expected = match (p.kind, p.position) {
                (PatchKind::Add, 2) => 1,
                (_, pos) => pos,
            };
            assert_eq!(p.anchor.as_ref().unwrap().position, expected, "{p}");
        }
    }

    #[test]
    fn apply_and_undo() {
        let c = h_only();
        let pool = generate_patches(&c, &DEFAULT_PATCH_CATALOG);
        for p in pool.iter() {
            let angles = vec![0.3; p.gate.param_count()];
            let (patched, undo) = p.apply_with_undo(&c, &angles).unwrap();
            assert_eq!(undo.revert(&patched).unwrap(), c, "{p}");
        }
    }

    #[test]
    fn uniform_order_singleton_and_permutation() {
        let c = h_only();
        let single = PatchQueue::new(vec![generate_patches(&c, &[GateKind::X]).pop().unwrap()]);
        assert_eq!(order_uniform(single.clone(), &c), single);

        let pool = generate_patches(&c, &[GateKind::X, GateKind::H]);
        let ordered = order_uniform(pool.clone(), &c);
        assert_eq!(ordered.len(), pool.len());
        let mut a: Vec<String> = pool.iter().map(|p| p.to_string()).collect();
        let mut b: Vec<String> = ordered.iter().map(|p| p.to_string()).collect();
        a.sort();
        b.sort();
        assert_eq!(a, b);
        let first: Vec<&Patch> = ordered.iter().take(2).collect();
        assert!(first[0].position != first[1].position || first[0].gate != first[1].gate);
    }

    #[test]
    fn prune_filters_by_anchor() {
        let c = Circuit::new(2).with(GateKind::H, &[0], &[]).unwrap().with(GateKind::Cx, &[0, 1], &[]).unwrap();
        let pool = order_uniform(generate_patches(&c, &DEFAULT_PATCH_CATALOG), &c);
        let all: HashSet<GateId> = (0..2).map(|p| GateId::of(&c, p).unwrap()).collect();
        assert_eq!(prune_to_gates(pool.clone(), &all), pool);
        assert!(prune_to_gates(pool.clone(), &HashSet::new()).is_empty());
        let first = HashSet::from([GateId::of(&c, 0).unwrap()]);
        let kept = prune_to_gates(pool, &first);
        assert!(!kept.is_empty());
        assert!(kept.iter().all(|p| p.anchor.as_ref().unwrap().position == 0));
    }

    #[test]
    fn identity_circuit_has_no_faults_to_inject() {
        // Removing or substituting an identity can still be detected, so only
        // check the degenerate all-equivalent case with an empty catalog.
        let c = Circuit::new(1).with(GateKind::Id, &[0], &[]).unwrap();
        let err = inject_faults_with(&c, 1, 1, &[]).unwrap_err();
        assert!(matches!(err, Error::NoNonEquivalentMutant));
    }

    #[test]
    fn duplicate_mutants_are_merged() {
        // Adding h before or after the existing h yields the same gate list.
        let c = h_only();
        let adds = candidates(&c, MutationGroup::Add, &[GateKind::H]);
        assert_eq!(adds.len(), 2);
        assert!(adds[0].0.structurally_equal(&adds[1].0));
        let mutants = inject_faults_with(&c, 3, 5, &[GateKind::H]).unwrap();
        let add_count = mutants.iter().filter(|m| m.group == MutationGroup::Add).count();
        assert_eq!(add_count, 1);
    }
}
