use super::*;
use crate::circuit::{parse_circuit, random_circuit, CircuitClass, RandomCircuitSpec};
use crate::encoding::{embed, COMP_BIN, COMP_I, COMP_S, COMP_V};
use crate::testutil::{q, r, MEAN4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn reg() -> ExtensionRegistry {
    ExtensionRegistry::standard()
}

fn mean4() -> Circuit {
    parse_circuit(MEAN4).unwrap()
}

fn mean4_embedded(dim: usize) -> Vec<Vec<Rational>> {
    let seq = encode(&mean4(), &[r(1), r(2), r(3), r(4)], &TypeConstants::base()).unwrap();
    embed(&seq, dim).unwrap().raw()
}

#[test]
fn generalized_layout_matches_tuple() {
    let cfg = build(&ConstructionFamily::Generalized, 3, &reg()).unwrap();
    assert_eq!(cfg.dim, 5);
    assert_eq!(cfg.layers.len(), 6);
    assert_eq!(cfg.input_embedding, InputEmbedding::Identity);
    let l1 = &cfg.layers[0];
    assert_eq!(
        l1.heads[0].attention,
        AttentionSpec::Builtin(BuiltinAttention::EdgeEq)
    );
    assert_eq!(l1.heads[0].pooling, ws(ScoreTransform::Id));
    let l2 = &cfg.layers[1];
    assert_eq!(
        l2.heads[0].attention,
        AttentionSpec::Builtin(BuiltinAttention::VertexEq)
    );
    assert_eq!(l2.heads[0].pooling, ws(ScoreTransform::Id));
    assert_eq!(
        l2.heads[1].attention,
        AttentionSpec::Builtin(BuiltinAttention::VertexEq)
    );
    assert_eq!(l2.heads[1].pooling, wp(ScoreTransform::Id));
}

#[test]
fn fsac_layout_matches_tuple() {
    let cfg = build(&ConstructionFamily::AvgFsac, 1, &reg()).unwrap();
    assert_eq!(cfg.dim, 8);
    assert_eq!(cfg.layers.len(), 2);
    let l2 = &cfg.layers[1];
    let names: Vec<String> = l2
        .heads
        .iter()
        .map(|h| match &h.attention {
            AttentionSpec::Builtin(b) => b.to_string(),
            other => panic!("unexpected head {other:?}"),
        })
        .collect();
    assert_eq!(names, vec!["att_V_dp", "att_B(1)", "att_B(2)"]);
    assert!(l2
        .heads
        .iter()
        .all(|h| h.pooling == ws(ScoreTransform::Avg)));
}

#[test]
fn sign_layout_matches_tuple() {
    let cfg = build(&ConstructionFamily::AvgSign, 2, &reg()).unwrap();
    assert_eq!(cfg.dim, 9);
    assert_eq!(cfg.layers.len(), 4);
    let names: Vec<String> = cfg.layers[1]
        .heads
        .iter()
        .map(|h| match &h.attention {
            AttentionSpec::Builtin(b) => b.to_string(),
            other => panic!("unexpected head {other:?}"),
        })
        .collect();
    assert_eq!(
        names,
        vec![
            "att_V_dp",
            "att_B(1)",
            "att_B(2)",
            "att_z_plus",
            "att_z_minus",
            "att_sign"
        ]
    );
}

#[test]
fn ext_head_count_tracks_max_arity() {
    let mut registry = reg();
    registry.register(crate::circuit::ExtensionFn::new(
        "med3",
        3,
        |a| {
            let mut v = a.to_vec();
            v.sort();
            v[1].clone()
        },
        None,
    ));
    let cfg = build(
        &ConstructionFamily::AvgExt(vec!["sign".into(), "med3".into()]),
        1,
        &registry,
    )
    .unwrap();
    // att_V_dp + att_B(1..3)
    assert_eq!(cfg.layers[1].heads.len(), 4);
    assert_eq!(cfg.layers[0].heads.len(), 4);
    assert!(build(&ConstructionFamily::AvgExt(vec!["nope".into()]), 1, &reg()).is_err());
}

#[test]
fn attention_anchor_values() {
    let e7 = mean4_embedded(7);
    // co-edge head scores: 2*s_x*s_y - s_y^2, maximal on the diagonal blocks
    let att =
        |b: &BuiltinAttention, x: &[Rational], y: &[Rational]| builtin_attention(b, x, y).unwrap();
    assert_eq!(att(&BuiltinAttention::VertexDp, &e7[5], &e7[0]), r(11));
    assert_eq!(att(&BuiltinAttention::VertexDp, &e7[5], &e7[5]), r(36));
    assert_eq!(att(&BuiltinAttention::VertexDp, &e7[11], &e7[11]), r(64));
    let e8 = mean4_embedded(8);
    assert_eq!(
        att(&BuiltinAttention::Predecessor(2), &e8[10], &e8[10]),
        r(53)
    );
    assert_eq!(
        att(&BuiltinAttention::Predecessor(2), &e8[11], &e8[11]),
        r(67)
    );
    assert_eq!(
        att(&BuiltinAttention::Predecessor(2), &e8[3], &e8[6]),
        r(16)
    );
    assert_eq!(att(&BuiltinAttention::EdgeDp, &e8[11], &e8[9]), r(49));
    // dimension checks reject short vectors
    assert!(builtin_attention(&BuiltinAttention::VertexDp, &[r(1)], &[r(1)]).is_err());
}

#[test]
fn activation_examples() {
    let types = TypeConstants::base();
    let registry = reg();
    let act = |name: &BuiltinActivation, inputs: &[Vec<Rational>]| {
        builtin_activation(name, inputs, &types, CharfinMode::ZeroBased, &registry).unwrap()
    };
    let vec5 = |s: i64, t: Rational, v: Rational| {
        let mut x = vec![r(s), r(0), r(0), t, v];
        x = crate::encoding::embed_vector(&x, 7).unwrap();
        x
    };

    // fan-in correction: k = 2 * 5/2 - 1 = 4 predecessors
    let x = vec5(6, TypeConstants::t_plus(), r(0));
    let y = vec5(0, r(0), q(7, 3));
    let mut z = vec5(0, r(0), r(0));
    z[COMP_I] = q(5, 2);
    let out = act(&BuiltinActivation::EdgeAvg, &[x.clone(), y, z]);
    assert_eq!(out[COMP_V], r(4) * q(7, 3));
    // non-v components retained
    assert_eq!(out[COMP_S], x[COMP_S]);

    // binary multiplication at gate 7 of the running example
    let x_in = vec5(7, TypeConstants::t_times(), r(0));
    let x_plus = vec5(0, r(0), r(99));
    let x1 = vec5(0, r(0), q(1, 4));
    let x2 = vec5(0, r(0), r(10));
    let out = act(&BuiltinActivation::VertexSemi, &[x_in, x_plus, x1, x2]);
    assert_eq!(out[COMP_V], q(5, 2));

    // inputs keep their value whatever the heads say
    let x_in = vec5(3, TypeConstants::t_input(), q(-3, 7));
    let junk = vec5(9, r(0), r(42));
    let out = act(
        &BuiltinActivation::VertexAvg,
        &[x_in.clone(), junk.clone(), junk],
    );
    assert_eq!(out[COMP_V], q(-3, 7));

    // arity errors are reported
    assert!(builtin_activation(
        &BuiltinActivation::VertexSemi,
        &[x_in.clone(), x_in.clone()],
        &types,
        CharfinMode::ZeroBased,
        &registry,
    )
    .is_err());
}

fn eval_oracle(c: &Circuit, u: &[Rational]) -> Vec<Rational> {
    c.evaluate(u, &reg()).unwrap()
}

#[test]
fn mean4_simulates_under_fac() {
    let c = mean4();
    let u = [r(1), r(2), r(3), r(4)];
    let (out, _) = simulate(
        &ConstructionFamily::AvgFac,
        3,
        &c,
        &u,
        &reg(),
        TraceMode::LastLayer,
    )
    .unwrap();
    assert_eq!(out, vec![q(5, 2)]);
    assert_eq!(out, eval_oracle(&c, &u));
}

#[test]
fn mean4_simulates_under_gen() {
    let c = mean4();
    let u = [q(1, 3), r(-2), r(5), q(7, 2)];
    let (out, _) = simulate(
        &ConstructionFamily::Generalized,
        3,
        &c,
        &u,
        &reg(),
        TraceMode::LastLayer,
    )
    .unwrap();
    assert_eq!(out, eval_oracle(&c, &u));
}

#[test]
fn binary_sum_simulates_under_fnc() {
    let c = parse_circuit(
        "class bounded\ngate 1 input 1\ngate 2 input 2\ngate 3 plus 1 2\ngate 4 output 3\n",
    )
    .unwrap();
    let (out, _) = simulate(
        &ConstructionFamily::HardFnc,
        2,
        &c,
        &[r(3), r(4)],
        &reg(),
        TraceMode::LastLayer,
    )
    .unwrap();
    assert_eq!(out, vec![r(7)]);
}

fn sign_diff_circuit() -> Circuit {
    parse_circuit(
        "class semi\n\
         gate 1 input 1\n\
         gate 2 input 2\n\
         gate 3 const -1\n\
         gate 4 times 3 2\n\
         gate 5 plus 1 4\n\
         gate 6 sign 5\n\
         gate 7 output 6\n",
    )
    .unwrap()
}

#[test]
fn sign_of_difference_simulates() {
    let c = sign_diff_circuit();
    assert_eq!(c.metrics().depth, 4);
    let (out, _) = simulate(
        &ConstructionFamily::AvgSign,
        4,
        &c,
        &[r(2), r(5)],
        &reg(),
        TraceMode::LastLayer,
    )
    .unwrap();
    assert_eq!(out, vec![r(-1)]);
    // the stated bound is sharp: 2 two-layer blocks cannot finish a
    // depth-4 circuit
    assert!(matches!(
        simulate(
            &ConstructionFamily::AvgSign,
            2,
            &c,
            &[r(2), r(5)],
            &reg(),
            TraceMode::LastLayer
        ),
        Err(SimulateError::Admissibility(
            AdmissibilityError::DepthExceeded { .. }
        ))
    ));
}

#[test]
fn admissibility_rejects_wrong_class() {
    let c = mean4(); // plus gate with fan-in 4
    assert!(matches!(
        simulate(
            &ConstructionFamily::HardFnc,
            3,
            &c,
            &[r(1), r(2), r(3), r(4)],
            &reg(),
            TraceMode::LastLayer
        ),
        Err(SimulateError::Admissibility(AdmissibilityError::FanIn {
            gate: 6,
            ..
        }))
    ));
    let s = sign_diff_circuit();
    assert!(matches!(
        check_admissible(&ConstructionFamily::AvgFsac, 4, &s),
        Err(AdmissibilityError::DisallowedGate { gate: 6, .. })
    ));
    // ext basis must cover every extension gate
    let e =
        parse_circuit("class semi\ngate 1 input 1\ngate 2 ext relu 1\ngate 3 output 2\n").unwrap();
    assert!(check_admissible(&ConstructionFamily::AvgExt(vec!["relu".into()]), 2, &e).is_ok());
    assert!(check_admissible(&ConstructionFamily::AvgExt(vec!["sign".into()]), 2, &e).is_err());
}

pub(crate) fn family_random_spec(
    family: &ConstructionFamily,
    seed: u64,
    max_depth: usize,
    max_gates: usize,
) -> RandomCircuitSpec {
    let (class, whitelist) = match family {
        ConstructionFamily::Generalized | ConstructionFamily::AvgFac => {
            (CircuitClass::Unbounded, vec![])
        }
        ConstructionFamily::AvgFsac => (CircuitClass::SemiUnbounded, vec![]),
        ConstructionFamily::HardFnc => (CircuitClass::Bounded, vec![]),
        ConstructionFamily::AvgExt(names) => (CircuitClass::SemiUnbounded, names.clone()),
        ConstructionFamily::AvgSign => (CircuitClass::SemiUnbounded, vec!["sign".into()]),
    };
    RandomCircuitSpec {
        class,
        max_depth,
        max_gates,
        extension_whitelist: whitelist,
        seed,
    }
}

pub(crate) fn random_inputs(rng: &mut ChaCha8Rng, count: usize) -> Vec<Rational> {
    (0..count)
        .map(|_| Rational::ratio(rng.gen_range(-9..=9), rng.gen_range(1..=9)))
        .collect()
}

fn oracle_round(family: &ConstructionFamily, seeds: std::ops::Range<u64>, depth: usize) {
    let registry = reg();
    let mut rng = ChaCha8Rng::seed_from_u64(999);
    for seed in seeds {
        let spec = family_random_spec(family, seed, depth, 18);
        let c = random_circuit(&spec, &registry).unwrap();
        let u = random_inputs(&mut rng, c.input_count());
        let expected = c.evaluate(&u, &registry).unwrap();
        let (got, _) = simulate(family, depth, &c, &u, &registry, TraceMode::LastLayer)
            .unwrap_or_else(|e| {
                panic!(
                    "{family} seed {seed}: {e}\n{}",
                    crate::circuit::render_circuit(&c)
                )
            });
        assert_eq!(
            got,
            expected,
            "{family} seed {seed}\n{}",
            crate::circuit::render_circuit(&c)
        );
    }
}

#[test]
fn oracle_smoke_all_families() {
    for family in [
        ConstructionFamily::Generalized,
        ConstructionFamily::AvgFac,
        ConstructionFamily::AvgFsac,
        ConstructionFamily::HardFnc,
        ConstructionFamily::AvgExt(vec!["sign".into()]),
        ConstructionFamily::AvgExt(vec!["relu".into()]),
        ConstructionFamily::AvgSign,
    ] {
        oracle_round(&family, 0..12, 4);
    }
}

#[test]
fn stacking_more_blocks_changes_nothing() {
    let registry = reg();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for seed in 0..8 {
        let family = ConstructionFamily::AvgFsac;
        let spec = family_random_spec(&family, seed, 3, 14);
        let c = random_circuit(&spec, &registry).unwrap();
        let u = random_inputs(&mut rng, c.input_count());
        let a = simulate(&family, 3, &c, &u, &registry, TraceMode::LastLayer)
            .unwrap()
            .0;
        let b = simulate(&family, 5, &c, &u, &registry, TraceMode::LastLayer)
            .unwrap()
            .0;
        assert_eq!(a, b);
        assert_eq!(a, c.evaluate(&u, &registry).unwrap());
    }
}

#[test]
fn vdp_score_anchors_via_trace() {
    let cfg = build(&ConstructionFamily::AvgFac, 1, &reg()).unwrap();
    let seq = mean4_embedded(7);
    let mut cfg = cfg;
    cfg.input_embedding = InputEmbedding::Identity;
    let (_, trace) = run(&cfg, &seq, TraceMode::Full).unwrap();
    let att = &trace.layer(2).unwrap().attention[0];
    // table orientation: x by column, y by row; engine rows are queries x
    assert_eq!(att.get(5, 0), &r(11)); // (row x1, col x6)
    assert_eq!(att.get(5, 5), &r(36));
    assert_eq!(att.get(11, 11), &r(64));
}

#[test]
fn hardleft_and_avg_agree_on_bounded_circuits() {
    let registry = reg();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for seed in 100..112 {
        let spec = family_random_spec(&ConstructionFamily::HardFnc, seed, 3, 14);
        let c = random_circuit(&spec, &registry).unwrap();
        let u = random_inputs(&mut rng, c.input_count());
        let left = simulate(
            &ConstructionFamily::HardFnc,
            3,
            &c,
            &u,
            &registry,
            TraceMode::LastLayer,
        )
        .unwrap()
        .0;
        // same construction with average pooling everywhere
        let mut cfg = build(&ConstructionFamily::HardFnc, 3, &registry).unwrap();
        for layer in &mut cfg.layers {
            for head in &mut layer.heads {
                if head.pooling.transform == ScoreTransform::HardLeft {
                    head.pooling.transform = ScoreTransform::Avg;
                }
            }
        }
        let seq = encode(&c, &u, &cfg.types).unwrap();
        let (final_seq, _) = run(&cfg, &seq.raw(), TraceMode::LastLayer).unwrap();
        let avg = decode_outputs(c.output_count(), &final_seq).unwrap();
        assert_eq!(left, avg, "seed {seed}");
        assert_eq!(left, c.evaluate(&u, &registry).unwrap());
    }
}

#[test]
fn sign_probe_heads_behave_as_stated() {
    let registry = reg();
    let c = parse_circuit("class semi\ngate 1 input 1\ngate 2 sign 1\ngate 3 output 2\n").unwrap();
    // the t_sign edge vector sits at position 1 of the canonical encoding
    let cases = [
        (r(-3), Some(r(1)), None, r(0), r(-1)),
        (r(0), Some(q(3, 2)), Some(q(3, 2)), r(1), r(0)),
        (q(7, 2), None, Some(r(1)), r(0), r(1)),
    ];
    for (v, want_pos, want_neg, want_zero, want_sign) in cases {
        let (out, trace) = simulate(
            &ConstructionFamily::AvgSign,
            2,
            &c,
            std::slice::from_ref(&v),
            &registry,
            TraceMode::Full,
        )
        .unwrap();
        assert_eq!(out, vec![crate::numerics::sign(&v)]);
        let layer2 = trace.layer(2).unwrap();
        let u_pos = &layer2.pooled[3][1];
        let u_neg = &layer2.pooled[4][1];
        let u_sgn = &layer2.pooled[5][1];
        if let Some(want) = want_pos {
            assert_eq!(u_pos[COMP_S], want, "u+ successor for v = {v}");
        }
        if let Some(want) = want_neg {
            assert_eq!(u_neg[COMP_S], want, "u- successor for v = {v}");
        }
        let one = Rational::one();
        let zero_formula = r(4) * (&u_pos[COMP_S] - &one) * (&u_neg[COMP_S] - &one);
        assert_eq!(zero_formula, want_zero, "zero formula for v = {v}");
        let sign_formula = (&one - &zero_formula) * (r(2) * &u_sgn[COMP_BIN] - &one);
        assert_eq!(sign_formula, want_sign, "sign formula for v = {v}");
    }
}

#[test]
fn simulate_outputs_are_permutation_invariant() {
    use rand::seq::SliceRandom;
    let registry = reg();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for seed in 0..10 {
        let family = if seed % 2 == 0 {
            ConstructionFamily::AvgFsac
        } else {
            ConstructionFamily::AvgSign
        };
        let spec = family_random_spec(&family, seed, 3, 14);
        let c = random_circuit(&spec, &registry).unwrap();
        let u = random_inputs(&mut rng, c.input_count());
        let cfg = build(&family, 3, &registry).unwrap();
        let seq = encode(&c, &u, &cfg.types).unwrap();
        let mut raw = seq.raw();
        let canonical = {
            let (out, _) = run(&cfg, &raw, TraceMode::LastLayer).unwrap();
            decode_outputs(c.output_count(), &out).unwrap()
        };
        raw.shuffle(&mut rng);
        let (out, _) = run(&cfg, &raw, TraceMode::LastLayer).unwrap();
        let permuted = decode_outputs(c.output_count(), &out).unwrap();
        assert_eq!(canonical, permuted, "family {family} seed {seed}");
        assert_eq!(canonical, c.evaluate(&u, &registry).unwrap());
    }
}

#[test]
fn charfin_realizations_agree_end_to_end() {
    let registry = reg();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for seed in 0..8 {
        let family = ConstructionFamily::AvgSign;
        let spec = family_random_spec(&family, seed, 3, 14);
        let c = random_circuit(&spec, &registry).unwrap();
        let u = random_inputs(&mut rng, c.input_count());
        let mut zero_cfg = build(&family, 3, &registry).unwrap();
        zero_cfg.charfin = CharfinMode::ZeroBased;
        let mut lagrange_cfg = zero_cfg.clone();
        lagrange_cfg.charfin = CharfinMode::Lagrange;
        let seq = encode(&c, &u, &zero_cfg.types).unwrap();
        let a = run(&zero_cfg, &seq.raw(), TraceMode::LastLayer).unwrap().0;
        let b = run(&lagrange_cfg, &seq.raw(), TraceMode::LastLayer)
            .unwrap()
            .0;
        assert_eq!(a, b, "seed {seed}");
    }
}

#[test]
fn wide_extension_basis_simulates() {
    // an arity-3 host function forces a third att_B head
    let mut registry = reg();
    registry.register(crate::circuit::ExtensionFn::new(
        "med3",
        3,
        |a| {
            let mut v = a.to_vec();
            v.sort();
            v[1].clone()
        },
        None,
    ));
    let family = ConstructionFamily::AvgExt(vec!["med3".into(), "sign".into()]);
    let c = parse_circuit(
        "class semi\n\
         gate 1 input 1\n\
         gate 2 input 2\n\
         gate 3 input 3\n\
         gate 4 ext med3 1 2 3\n\
         gate 5 sign 4\n\
         gate 6 plus 4 5\n\
         gate 7 output 6\n",
    )
    .unwrap();
    assert!(c.validate().is_valid());
    for u in [
        [q(1, 2), r(-3), r(2)],
        [r(0), r(0), r(-1)],
        [r(5), q(-7, 3), q(9, 4)],
    ] {
        let expected = c.evaluate(&u, &registry).unwrap();
        let (got, _) =
            simulate(&family, 4, &c, &u, &registry, TraceMode::LastLayer).unwrap();
        assert_eq!(got, expected, "inputs {u:?}");
    }
}

#[test]
fn cli_names_round_trip() {
    for family in [
        ConstructionFamily::Generalized,
        ConstructionFamily::AvgFac,
        ConstructionFamily::AvgFsac,
        ConstructionFamily::HardFnc,
        ConstructionFamily::AvgExt(vec!["sign".into(), "relu".into()]),
        ConstructionFamily::AvgSign,
    ] {
        assert_eq!(
            ConstructionFamily::parse_cli(&family.cli_name()),
            Some(family)
        );
    }
    assert_eq!(ConstructionFamily::parse_cli("nope"), None);
}
