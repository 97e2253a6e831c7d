use super::*;
use crate::numerics::Rational;
use crate::testutil::MEAN4;

fn r(n: i64) -> Rational {
    Rational::from_int(n)
}

fn q(n: i64, d: i64) -> Rational {
    Rational::ratio(n, d)
}

fn mean4() -> Circuit {
    parse_circuit(MEAN4).unwrap()
}

fn reg() -> ExtensionRegistry {
    ExtensionRegistry::standard()
}

#[test]
fn mean4_structure() {
    let c = mean4();
    assert_eq!(c.size(), 8);
    assert_eq!(c.edges().len(), 7);
    assert_eq!(c.input_count(), 4);
    assert_eq!(c.output_count(), 1);
}

#[test]
fn mean4_validates_per_class() {
    let mut c = mean4();
    assert!(c.validate().is_valid());
    c.set_class(CircuitClass::SemiUnbounded);
    assert!(
        c.validate().is_valid(),
        "plus fan-in 4 with binary times is fine semi-unbounded"
    );
    c.set_class(CircuitClass::Bounded);
    let report = c.validate();
    assert!(report
        .violations
        .iter()
        .any(|v| matches!(v, Violation::FanInDiscipline { gate: 6, .. })));
}

#[test]
fn cycle_is_reported() {
    let c = Circuit::new(
        CircuitClass::Unbounded,
        vec![
            GateLabel::Input(1),
            GateLabel::Plus,
            GateLabel::Plus,
            GateLabel::Output(1),
        ],
        vec![
            Edge {
                from: 1,
                to: 2,
                alpha: 1,
            },
            Edge {
                from: 3,
                to: 2,
                alpha: 2,
            },
            Edge {
                from: 2,
                to: 3,
                alpha: 1,
            },
            Edge {
                from: 3,
                to: 4,
                alpha: 1,
            },
        ],
    );
    assert!(c.validate().violations.contains(&Violation::Cycle));
}

#[test]
fn alpha_gap_is_reported() {
    let c = Circuit::new(
        CircuitClass::Unbounded,
        vec![
            GateLabel::Input(1),
            GateLabel::Input(2),
            GateLabel::Plus,
            GateLabel::Output(1),
        ],
        vec![
            Edge {
                from: 1,
                to: 3,
                alpha: 1,
            },
            Edge {
                from: 2,
                to: 3,
                alpha: 3,
            },
            Edge {
                from: 3,
                to: 4,
                alpha: 1,
            },
        ],
    );
    assert!(c
        .validate()
        .violations
        .iter()
        .any(|v| matches!(v, Violation::AlphaGap { gate: 3, .. })));
}

#[test]
fn mean4_evaluates() {
    let c = mean4();
    let out = c.evaluate(&[r(1), r(2), r(3), r(4)], &reg()).unwrap();
    assert_eq!(out, vec![q(5, 2)]);
}

#[test]
fn single_wire_is_identity() {
    let c = parse_circuit("class bounded\ngate 1 input 1\ngate 2 output 1\n").unwrap();
    assert!(c.validate().is_valid());
    assert_eq!(c.evaluate(&[r(9)], &reg()).unwrap(), vec![r(9)]);
    assert_eq!(c.metrics().depth, 1);
}

#[test]
fn sign_of_difference() {
    let src = "class semi\n\
               gate 1 input 1\n\
               gate 2 input 2\n\
               gate 3 const -1\n\
               gate 4 times 3 2\n\
               gate 5 plus 1 4\n\
               gate 6 sign 5\n\
               gate 7 output 6\n";
    let c = parse_circuit(src).unwrap();
    assert!(c.validate().is_valid());
    assert_eq!(c.evaluate(&[r(2), r(5)], &reg()).unwrap(), vec![r(-1)]);
    assert_eq!(c.evaluate(&[r(5), r(2)], &reg()).unwrap(), vec![r(1)]);
}

#[test]
fn evaluate_checks_arity_and_registry() {
    let c = mean4();
    assert!(matches!(
        c.evaluate(&[r(1)], &reg()),
        Err(EvalError::ArityMismatch {
            expected: 4,
            got: 1
        })
    ));
    let e = parse_circuit("class semi\ngate 1 input 1\ngate 2 ext mystery 1\ngate 3 output 2\n")
        .unwrap();
    assert!(matches!(
        e.evaluate(&[r(1)], &reg()),
        Err(EvalError::UnregisteredExtension { .. })
    ));
}

#[test]
fn metrics_examples() {
    assert_eq!(
        mean4().metrics(),
        CircuitMetrics {
            size: 8,
            depth: 3,
            fan_in_max_plus: 4,
            fan_in_max_times: 2,
        }
    );
    let tiny = parse_circuit("class bounded\ngate 1 const 7\ngate 2 output 1\n").unwrap();
    assert_eq!(tiny.metrics().size, 2);
    assert_eq!(tiny.metrics().depth, 1);
    let empty = Circuit::new(CircuitClass::Bounded, vec![], vec![]);
    assert_eq!(empty.metrics().size, 0);
    assert_eq!(empty.metrics().depth, 0);
}

#[test]
fn text_round_trip_is_canonical() {
    let c = mean4();
    let rendered = render_circuit(&c);
    let again = parse_circuit(&rendered).unwrap();
    assert_eq!(c, again);
    assert_eq!(render_circuit(&again), rendered);
}

#[test]
fn parser_rejects_gaps_and_bad_class() {
    assert!(parse_circuit("class semi\ngate 2 input 1\n").is_err());
    assert!(parse_circuit("class what\n").is_err());
    assert!(parse_circuit("gate 1 input 1\n").is_err());
    assert!(parse_circuit("class semi\ngate 1 const 1.5\n").is_err());
}

#[test]
fn random_circuits_are_valid_and_deterministic() {
    for class in [
        CircuitClass::Bounded,
        CircuitClass::SemiUnbounded,
        CircuitClass::Unbounded,
    ] {
        for seed in 0..30 {
            let spec = RandomCircuitSpec {
                class,
                max_depth: 1 + (seed as usize % 4),
                max_gates: 2 + (seed as usize % 25),
                extension_whitelist: if class == CircuitClass::SemiUnbounded && seed % 3 == 0 {
                    vec!["sign".into()]
                } else {
                    vec![]
                },
                seed,
            };
            let c = random_circuit(&spec, &reg()).unwrap();
            let report = c.validate();
            assert!(report.is_valid(), "seed {seed} class {class}: {report}");
            assert!(c.metrics().depth <= spec.max_depth);
            assert!(c.size() <= spec.max_gates);
            let again = random_circuit(&spec, &reg()).unwrap();
            assert_eq!(c, again, "same seed must give identical circuits");
        }
    }
}

#[test]
fn text_round_trips_random_circuits() {
    for class in [CircuitClass::Bounded, CircuitClass::SemiUnbounded, CircuitClass::Unbounded] {
        for seed in 200..240 {
            let spec = RandomCircuitSpec {
                class,
                max_depth: 4,
                max_gates: 24,
                extension_whitelist: if class == CircuitClass::SemiUnbounded {
                    vec!["sign".into(), "relu".into()]
                } else {
                    vec![]
                },
                seed,
            };
            let c = random_circuit(&spec, &reg()).unwrap();
            let text = render_circuit(&c);
            let again = parse_circuit(&text).unwrap();
            assert_eq!(c, again, "seed {seed} class {class}");
            assert_eq!(render_circuit(&again), text);
        }
    }
}

#[test]
fn random_circuit_rejects_infeasible() {
    let spec = RandomCircuitSpec {
        class: CircuitClass::Bounded,
        max_depth: 3,
        max_gates: 1,
        extension_whitelist: vec![],
        seed: 0,
    };
    assert!(random_circuit(&spec, &reg()).is_err());
}

/// Applies a structure-preserving relabeling of gate indices. The
/// permutation must keep output gates in their relative order.
fn relabel(c: &Circuit, perm: &[usize]) -> Circuit {
    let gates = (1..=c.size())
        .map(|new_idx| {
            let old = perm.iter().position(|&p| p == new_idx).unwrap() + 1;
            c.gate(old).clone()
        })
        .collect();
    let edges = c
        .edges()
        .iter()
        .map(|e| Edge {
            from: perm[e.from - 1],
            to: perm[e.to - 1],
            alpha: e.alpha,
        })
        .collect();
    Circuit::new(c.class(), gates, edges)
}

#[test]
fn evaluate_invariant_under_relabeling() {
    use rand::prelude::*;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    for seed in 0..20 {
        let spec = RandomCircuitSpec {
            class: CircuitClass::Unbounded,
            max_depth: 3,
            max_gates: 14,
            extension_whitelist: vec![],
            seed,
        };
        let c = random_circuit(&spec, &reg()).unwrap();
        // permute non-output gates, keep outputs where they are
        let outputs: Vec<usize> = c
            .gates()
            .filter(|(_, g)| matches!(g, GateLabel::Output(_)))
            .map(|(i, _)| i)
            .collect();
        let mut rest: Vec<usize> = (1..=c.size()).filter(|i| !outputs.contains(i)).collect();
        rest.shuffle(&mut rng);
        let mut perm = vec![0usize; c.size()];
        let mut it = rest.into_iter();
        for old in 1..=c.size() {
            perm[old - 1] = if outputs.contains(&old) {
                old
            } else {
                it.next().unwrap()
            };
        }
        let relabeled = relabel(&c, &perm);
        assert!(relabeled.validate().is_valid());
        let u: Vec<Rational> = (0..c.input_count()).map(|i| r(i as i64 - 2)).collect();
        assert_eq!(
            c.evaluate(&u, &reg()).unwrap(),
            relabeled.evaluate(&u, &reg()).unwrap(),
            "seed {seed}"
        );
    }
}

#[test]
fn alpha_permutation_is_harmless_unbounded() {
    use rand::prelude::*;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
    for seed in 0..20 {
        let spec = RandomCircuitSpec {
            class: CircuitClass::Unbounded,
            max_depth: 4,
            max_gates: 16,
            extension_whitelist: vec![],
            seed: 1000 + seed,
        };
        let c = random_circuit(&spec, &reg()).unwrap();
        let inc = c.incoming();
        let mut edges = Vec::new();
        #[allow(clippy::needless_range_loop)] // gate indices are 1-based
        for idx in 1..=c.size() {
            let mut alphas: Vec<usize> = (1..=inc[idx].len()).collect();
            if matches!(c.gate(idx), GateLabel::Plus | GateLabel::Times) {
                alphas.shuffle(&mut rng);
            }
            for (e, a) in inc[idx].iter().zip(alphas) {
                edges.push(Edge { alpha: a, ..*e });
            }
        }
        let shuffled = Circuit::new(
            c.class(),
            (1..=c.size()).map(|i| c.gate(i).clone()).collect(),
            edges,
        );
        assert!(shuffled.validate().is_valid());
        let u: Vec<Rational> = (0..c.input_count()).map(|i| q(i as i64 + 1, 3)).collect();
        assert_eq!(
            c.evaluate(&u, &reg()).unwrap(),
            shuffled.evaluate(&u, &reg()).unwrap()
        );
    }
}

/// Rewrites wide plus/times gates as balanced binary trees.
fn binarize(c: &Circuit) -> Circuit {
    let inc = c.incoming();
    let mut gates: Vec<GateLabel> = Vec::new();
    let mut edges: Vec<Edge> = Vec::new();
    let mut map = vec![0usize; c.size() + 1];
    for (old, g) in c.gates() {
        let preds: Vec<usize> = inc[old].iter().map(|e| map[e.from]).collect();
        match g {
            GateLabel::Plus | GateLabel::Times if preds.len() > 2 => {
                let mut level = preds;
                while level.len() > 1 {
                    let mut next = Vec::new();
                    for pair in level.chunks(2) {
                        if pair.len() == 1 {
                            next.push(pair[0]);
                            continue;
                        }
                        gates.push(g.clone());
                        let idx = gates.len();
                        edges.push(Edge {
                            from: pair[0],
                            to: idx,
                            alpha: 1,
                        });
                        edges.push(Edge {
                            from: pair[1],
                            to: idx,
                            alpha: 2,
                        });
                        next.push(idx);
                    }
                    level = next;
                }
                map[old] = level[0];
            }
            _ => {
                gates.push(g.clone());
                let idx = gates.len();
                for (i, p) in preds.iter().enumerate() {
                    edges.push(Edge {
                        from: *p,
                        to: idx,
                        alpha: i + 1,
                    });
                }
                map[old] = idx;
            }
        }
    }
    Circuit::new(CircuitClass::Bounded, gates, edges)
}

#[test]
fn binary_tree_expansion_preserves_value_and_bounds_depth() {
    for seed in 0..15 {
        let spec = RandomCircuitSpec {
            class: CircuitClass::Unbounded,
            max_depth: 3,
            max_gates: 18,
            extension_whitelist: vec![],
            seed: 50 + seed,
        };
        let c = random_circuit(&spec, &reg()).unwrap();
        let b = binarize(&c);
        assert!(b.validate().is_valid(), "{}", b.validate());
        let u: Vec<Rational> = (0..c.input_count()).map(|i| r(2 - i as i64)).collect();
        assert_eq!(
            c.evaluate(&u, &reg()).unwrap(),
            b.evaluate(&u, &reg()).unwrap()
        );
        let m = c.metrics();
        let max_fan = m.fan_in_max_plus.max(m.fan_in_max_times).max(2);
        let factor = usize::BITS - (max_fan - 1).leading_zeros(); // ceil(log2)
        assert!(b.metrics().depth <= m.depth * factor as usize);
    }
}
