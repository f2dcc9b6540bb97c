use std::collections::HashSet;

use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use qrep_core::engine::{repair, RepairConfig, Status};
use qrep_core::patcher::{generate_patches, order_uniform, DEFAULT_PATCH_CATALOG};
use qrep_core::simulator::{run_state, Distribution, MeasBasis};
use qrep_core::testkit::{fitness, generate_suite, hellinger, judge, TestCase};
use qrep_core::{emit_qasm, parse_qasm, Circuit, Error, GateApp, GateKind};

fn gate_strategy(width: usize) -> impl Strategy<Value = GateApp> {
    let kinds: Vec<GateKind> = GateKind::UNITARY.iter().copied().filter(|k| k.arity() <= width).collect();
    (
        prop::sample::select(kinds),
        Just((0..width).collect::<Vec<usize>>()).prop_shuffle(),
        prop::collection::vec(-7.0f64..7.0, 3),
    )
        .prop_map(|(kind, mut qubits, mut params)| {
            qubits.truncate(kind.arity());
            params.truncate(kind.param_count());
            GateApp::new(kind, qubits, params)
        })
}

fn circuit_strategy() -> impl Strategy<Value = Circuit> {
    (1usize..=3).prop_flat_map(|width| {
        prop::collection::vec(gate_strategy(width), 0..10).prop_map(move |gates| {
            let mut c = Circuit::new(width);
            for g in gates {
                c.push(g).unwrap();
            }
            c
        })
    })
}

fn distribution_strategy(num_qubits: usize) -> impl Strategy<Value = Distribution> {
    prop::collection::vec(0.0f64..1.0, 1 << num_qubits).prop_filter_map("needs mass", move |w| {
        let total: f64 = w.iter().sum();
        (total > 1e-6).then(|| Distribution::from_probs(num_qubits, w.iter().map(|x| x / total).collect()).unwrap())
    })
}

proptest! {
    #[test]
    fn qasm_round_trip(mut c in circuit_strategy()) {
        c.measure_all();
        let back = parse_qasm(&emit_qasm(&c)).unwrap();
        prop_assert_eq!(back, c);
    }

    #[test]
    fn simulation_preserves_norm(c in circuit_strategy(), input in 0usize..8) {
        let input = input % (1 << c.num_qubits());
        let state = run_state(&c, input).unwrap();
        assert_abs_diff_eq!(state.norm_sqr(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn hellinger_is_a_bounded_metric(
        p in distribution_strategy(2),
        q in distribution_strategy(2),
        r in distribution_strategy(2),
    ) {
        let (pq, qp) = (hellinger(&p, &q), hellinger(&q, &p));
        prop_assert!((0.0..=1.0).contains(&pq));
        assert_abs_diff_eq!(pq, qp, epsilon = 1e-15);
        assert_abs_diff_eq!(hellinger(&p, &p), 0.0, epsilon = 1e-15);
        prop_assert!(pq <= hellinger(&p, &r) + hellinger(&r, &q) + 1e-12);
    }

    #[test]
    fn judge_passes_only_close_distributions(
        expected in distribution_strategy(2),
        observed in distribution_strategy(2),
        tau in 0.0f64..1.0,
    ) {
        let tc = TestCase { id: "00-Z".into(), input: 0, basis: MeasBasis::Z, expected: expected.clone() };
        let v = judge(&observed, &tc, tau, 1e-9);
        prop_assert_eq!(v.hellinger, hellinger(&observed, &expected));
        if v.passed {
            prop_assert!(v.hellinger <= tau && !v.wrong_output);
        }
        if v.hellinger > tau {
            prop_assert!(!v.passed);
        }
        // a looser threshold can only turn failures into passes
        let looser = judge(&observed, &tc, (tau + 0.1).min(1.0), 1e-9);
        prop_assert!(looser.passed || !v.passed);
    }

    #[test]
    fn patches_revert_exactly(c in circuit_strategy(), angle in -3.0f64..3.0) {
        for patch in generate_patches(&c, &DEFAULT_PATCH_CATALOG).iter() {
            let angles = if patch.needs_tuning() { vec![angle; patch.gate.param_count()] } else { vec![] };
            let (patched, undo) = patch.apply_with_undo(&c, &angles).unwrap();
            prop_assert_eq!(&undo.revert(&patched).unwrap(), &c);
        }
    }

    #[test]
    fn uniform_order_is_a_permutation(c in circuit_strategy()) {
        let pool = generate_patches(&c, &DEFAULT_PATCH_CATALOG);
        let before: Vec<String> = pool.iter().map(|p| p.to_string()).collect();
        let ordered = order_uniform(pool, &c);
        let mut after: Vec<String> = ordered.iter().map(|p| p.to_string()).collect();
        prop_assert_eq!(after.len(), before.len());
        let unique: HashSet<&String> = after.iter().collect();
        prop_assert_eq!(unique.len(), after.len());
        let mut before = before;
        before.sort();
        after.sort();
        prop_assert_eq!(before, after);
    }

    #[test]
    fn fitness_is_non_negative_and_zero_on_reference(reference in circuit_strategy(), other in circuit_strategy()) {
        let ts = generate_suite(&reference).unwrap();
        prop_assert_eq!(fitness(&reference, &ts).unwrap().value, 0.0);
        if other.num_qubits() == reference.num_qubits() {
            let f = fitness(&other, &ts).unwrap();
            prop_assert!(f.value >= 0.0 && f.failed_count <= ts.len());
            prop_assert!(f.value <= f.failed_count as f64 + ts.len() as f64);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn repair_respects_eval_budget(reference in circuit_strategy(), faulty in circuit_strategy(), budget in 1usize..120) {
        prop_assume!(reference.num_qubits() == faulty.num_qubits());
        let ts = generate_suite(&reference).unwrap();
        let cfg = RepairConfig { iterations: 3, ..RepairConfig::with_eval_budget(budget) };
        match repair(&faulty, &ts, &cfg) {
            Ok(report) => {
                prop_assert!(report.evals_used <= budget);
                prop_assert!((0.0..=100.0).contains(&report.improvement_pct));
                if report.status == Status::Repaired {
                    let fixed = report.repaired_circuit().unwrap().unwrap();
                    prop_assert!(fitness(&fixed, &ts).unwrap().all_passed());
                }
                for pair in report.ranking.windows(2) {
                    prop_assert!(pair[0].score >= pair[1].score);
                    prop_assert!(pair[0].percentile < pair[1].percentile);
                }
            }
            Err(Error::BudgetTooSmall(report)) => prop_assert!(report.evals_used <= budget),
            Err(Error::NoFailingTest) => {}
            Err(e) => prop_assert!(false, "{e}"),
        }
    }
}
