//! Seeded random generator for valid circuits of a requested class.
//!
//! Generated circuits also satisfy the stricter shape the simulating
//! transformers assume: every function gate has fan-in >= 1, `times` gates in
//! the semi-unbounded and bounded classes are exactly binary, and `plus`
//! gates in the bounded class are exactly binary.

use std::fmt;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use super::{Circuit, CircuitClass, Edge, ExtensionRegistry, GateLabel};
use crate::numerics::Rational;

#[derive(Clone, Debug)]
pub struct RandomCircuitSpec {
    pub class: CircuitClass,
    pub max_depth: usize,
    pub max_gates: usize,
    /// Extra gate kinds to sprinkle in: `"sign"` for sign gates, any other
    /// name must be a registered extension function.
    pub extension_whitelist: Vec<String>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RandomCircuitError {
    Infeasible(String),
    UnknownExtension(String),
}

impl fmt::Display for RandomCircuitError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RandomCircuitError::Infeasible(s) => write!(f, "infeasible spec: {s}"),
            RandomCircuitError::UnknownExtension(s) => {
                write!(f, "unknown extension `{s}` in whitelist")
            }
        }
    }
}

impl std::error::Error for RandomCircuitError {}

enum ExtraKind {
    Sign,
    Ext { name: String, arity: usize },
}

pub fn random_circuit(
    spec: &RandomCircuitSpec,
    registry: &ExtensionRegistry,
) -> Result<Circuit, RandomCircuitError> {
    if spec.max_depth < 1 {
        return Err(RandomCircuitError::Infeasible(
            "max_depth must be >= 1".into(),
        ));
    }
    if spec.max_gates < 2 {
        return Err(RandomCircuitError::Infeasible(
            "max_gates must fit at least one input and one output".into(),
        ));
    }
    let mut extras = Vec::new();
    for name in &spec.extension_whitelist {
        if name == "sign" {
            extras.push(ExtraKind::Sign);
        } else {
            let f = registry
                .get(name)
                .ok_or_else(|| RandomCircuitError::UnknownExtension(name.clone()))?;
            if f.arity == 0 {
                return Err(RandomCircuitError::Infeasible(format!(
                    "extension `{name}` has arity 0"
                )));
            }
            extras.push(ExtraKind::Ext {
                name: name.clone(),
                arity: f.arity,
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    // Reserve room: inputs + consts + outputs, the rest is internal budget.
    let n_outputs = if spec.max_gates >= 8 {
        rng.gen_range(1..=2)
    } else {
        1
    };
    let max_inputs = (spec.max_gates - n_outputs).clamp(1, 3);
    let n_inputs = rng.gen_range(1..=max_inputs);
    let room = spec.max_gates - n_inputs - n_outputs;
    // keep at least two source gates so binary gates always have a pool
    let min_consts = if n_inputs < 2 && room > 0 { 1 } else { 0 };
    let n_consts = if room > min_consts {
        rng.gen_range(min_consts..=room.min(2))
    } else {
        min_consts
    };
    let internal_budget = room - n_consts;

    let mut gates: Vec<GateLabel> = Vec::new();
    let mut edges: Vec<Edge> = Vec::new();
    for k in 1..=n_inputs {
        gates.push(GateLabel::Input(k));
    }
    for _ in 0..n_consts {
        let n = rng.gen_range(-9i64..=9);
        let d = rng.gen_range(1i64..=9);
        gates.push(GateLabel::Constant(Rational::ratio(n, d)));
    }

    // internal layers keep every source-to-output path within max_depth:
    // a gate in layer l has paths of length <= l, plus one output edge
    let depth_room = spec.max_depth - 1;
    let n_layers = if internal_budget == 0 || depth_room == 0 {
        0
    } else {
        rng.gen_range(1..=depth_room.min(internal_budget))
    };
    let mut layer_sizes = vec![1usize; n_layers];
    let mut spare = if n_layers == 0 {
        0
    } else {
        internal_budget - n_layers
    };
    // bias toward small circuits; the oracle cares about shape, not bulk
    while spare > 0 && rng.gen_bool(0.5) {
        let i = rng.gen_range(0..n_layers);
        layer_sizes[i] += 1;
        spare -= 1;
    }

    let mut pool: Vec<usize> = (1..=gates.len()).collect();
    for &size in &layer_sizes {
        let layer_start = gates.len() + 1;
        for _ in 0..size {
            let idx = gates.len() + 1;
            let (label, fan_in) = pick_kind(&mut rng, spec.class, &extras, pool.len());
            let preds = rand::seq::index::sample(&mut rng, pool.len(), fan_in.min(pool.len()));
            gates.push(label);
            for (i, p) in preds.iter().enumerate() {
                edges.push(Edge {
                    from: pool[p],
                    to: idx,
                    alpha: i + 1,
                });
            }
        }
        pool.extend(layer_start..=gates.len());
    }

    // outputs last, so their indices ascend with their labels
    for k in 1..=n_outputs {
        let idx = gates.len() + 1;
        let driver = pool[rng.gen_range(0..pool.len())];
        gates.push(GateLabel::Output(k));
        edges.push(Edge {
            from: driver,
            to: idx,
            alpha: 1,
        });
    }

    Ok(Circuit::new(spec.class, gates, edges))
}

fn pick_kind(
    rng: &mut ChaCha8Rng,
    class: CircuitClass,
    extras: &[ExtraKind],
    pool: usize,
) -> (GateLabel, usize) {
    if !extras.is_empty() && rng.gen_bool(0.35) {
        match &extras[rng.gen_range(0..extras.len())] {
            ExtraKind::Sign => return (GateLabel::Sign, 1),
            ExtraKind::Ext { name, arity } => {
                if *arity <= pool {
                    return (
                        GateLabel::Extension {
                            name: name.clone(),
                            arity: *arity,
                        },
                        *arity,
                    );
                }
            }
        }
    }
    let wide = |rng: &mut ChaCha8Rng| rng.gen_range(1..=4usize.min(pool));
    let binary_ok = pool >= 2;
    match class {
        CircuitClass::Bounded => {
            // binary plus and times only
            if rng.gen_bool(0.5) {
                (GateLabel::Plus, 2)
            } else {
                (GateLabel::Times, 2)
            }
        }
        CircuitClass::SemiUnbounded => {
            if binary_ok && rng.gen_bool(0.4) {
                (GateLabel::Times, 2)
            } else {
                (GateLabel::Plus, wide(rng))
            }
        }
        CircuitClass::Unbounded => {
            if rng.gen_bool(0.5) {
                (GateLabel::Plus, wide(rng))
            } else {
                (GateLabel::Times, wide(rng))
            }
        }
    }
}
