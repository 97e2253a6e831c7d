//! Builders for the concrete simulating transformers, one per supported
//! circuit class, and the end-to-end `simulate` pipeline (encode, embed,
//! run, decode) with its admissibility checks.
//!
//! Every builder emits `2K` layers: `K` copies of a two-layer block. The
//! first layer of a block fetches each predecessor's value onto the edge
//! vectors, the second combines the fetched values per gate type. A circuit
//! of depth `d` (edges on the longest source-to-output path, output edge
//! included) is simulated exactly by any `K >= d`.

use std::fmt;

use crate::circuit::{Circuit, ExtensionRegistry, GateLabel, ValidationReport};
use crate::encoding::{decode_outputs, encode, DecodeError, EncodeError, TypeConstants};
use crate::engine::{
    attention_value, builtin_activation_value, run, ActivationSpec, AttentionSpec,
    BuiltinActivation, BuiltinAttention, CharfinMode, ChiCtx, EngineError, ExecutionTrace,
    HeadSpec, InputEmbedding, LayerSpec, PoolFamily, PoolingSpec, PositionalEmbedding,
    ScoreTransform, TraceMode, TransformerConfig,
};
use crate::numerics::Rational;

/// Which simulating construction to instantiate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ConstructionFamily {
    /// Dimension 5, equality attention, identity weights. Simulates
    /// unbounded fan-in circuits.
    Generalized,
    /// Dimension 7, dot-product attention, average weights. Simulates
    /// unbounded fan-in circuits.
    AvgFac,
    /// Dimension 8, adds the `att_B(k)` heads for binary multiplication.
    /// Simulates semi-unbounded fan-in circuits.
    AvgFsac,
    /// Dimension 8, leftmost hard attention. Simulates bounded fan-in
    /// circuits.
    HardFnc,
    /// Dimension 8, extension-gate fetches through `att_B` heads and host
    /// basis functions in the activation. Simulates semi-unbounded circuits
    /// over the named basis.
    AvgExt(Vec<String>),
    /// Dimension 9, probe heads recovering `sign` through average attention.
    /// Simulates semi-unbounded circuits with sign gates.
    AvgSign,
}

impl ConstructionFamily {
    /// CLI-facing names: `gen`, `fac`, `fsac`, `fnc`, `ext:<names>`, `sign`.
    pub fn parse_cli(s: &str) -> Option<Self> {
        Some(match s {
            "gen" => ConstructionFamily::Generalized,
            "fac" => ConstructionFamily::AvgFac,
            "fsac" => ConstructionFamily::AvgFsac,
            "fnc" => ConstructionFamily::HardFnc,
            "sign" => ConstructionFamily::AvgSign,
            _ => {
                let names = s.strip_prefix("ext:")?;
                ConstructionFamily::AvgExt(
                    names
                        .split(',')
                        .map(|n| n.trim().to_string())
                        .filter(|n| !n.is_empty())
                        .collect(),
                )
            }
        })
    }

    pub fn cli_name(&self) -> String {
        match self {
            ConstructionFamily::Generalized => "gen".into(),
            ConstructionFamily::AvgFac => "fac".into(),
            ConstructionFamily::AvgFsac => "fsac".into(),
            ConstructionFamily::HardFnc => "fnc".into(),
            ConstructionFamily::AvgExt(names) => format!("ext:{}", names.join(",")),
            ConstructionFamily::AvgSign => "sign".into(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ConstructionFamily::Generalized => 5,
            ConstructionFamily::AvgFac => 7,
            ConstructionFamily::AvgFsac
            | ConstructionFamily::HardFnc
            | ConstructionFamily::AvgExt(_) => 8,
            ConstructionFamily::AvgSign => 9,
        }
    }
}

impl fmt::Display for ConstructionFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.cli_name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BuildError {
    DepthBound,
    UnknownBasisFunction { name: String },
    BadBasisArity { name: String, arity: usize },
}

impl fmt::Display for BuildError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BuildError::DepthBound => write!(f, "depth bound must be >= 1"),
            BuildError::UnknownBasisFunction { name } => {
                write!(f, "basis function `{name}` is not registered")
            }
            BuildError::BadBasisArity { name, arity } => {
                write!(f, "basis function `{name}` has arity {arity}, need >= 1")
            }
        }
    }
}

impl std::error::Error for BuildError {}

fn ws(transform: ScoreTransform) -> PoolingSpec {
    PoolingSpec {
        family: PoolFamily::WeightedSum,
        transform,
    }
}

fn wp(transform: ScoreTransform) -> PoolingSpec {
    PoolingSpec {
        family: PoolFamily::WeightedProduct,
        transform,
    }
}

fn head(attention: BuiltinAttention, pooling: PoolingSpec) -> HeadSpec {
    HeadSpec {
        attention: AttentionSpec::Builtin(attention),
        pooling,
    }
}

/// A head whose result no activation reads. Recorded in traces all the same.
fn unused_head() -> HeadSpec {
    head(BuiltinAttention::EdgeEq, ws(ScoreTransform::Id))
}

fn basis_arity(name: &str, registry: &ExtensionRegistry) -> Result<usize, BuildError> {
    if name == "sign" {
        return Ok(1);
    }
    let f = registry
        .get(name)
        .ok_or_else(|| BuildError::UnknownBasisFunction {
            name: name.to_string(),
        })?;
    Ok(f.arity)
}

/// Builds the `2 * depth_bound`-layer simulating transformer for a family.
pub fn build(
    family: &ConstructionFamily,
    depth_bound: usize,
    registry: &ExtensionRegistry,
) -> Result<TransformerConfig, BuildError> {
    if depth_bound < 1 {
        return Err(BuildError::DepthBound);
    }
    let (fetch_layer, combine_layer, types, embedding) = match family {
        ConstructionFamily::Generalized => (
            LayerSpec {
                heads: vec![
                    head(BuiltinAttention::EdgeEq, ws(ScoreTransform::Id)),
                    unused_head(),
                ],
                activation: ActivationSpec::Builtin(BuiltinActivation::EdgeGeneral),
            },
            LayerSpec {
                heads: vec![
                    head(BuiltinAttention::VertexEq, ws(ScoreTransform::Id)),
                    head(BuiltinAttention::VertexEq, wp(ScoreTransform::Id)),
                ],
                activation: ActivationSpec::Builtin(BuiltinActivation::VertexGeneral),
            },
            TypeConstants::base(),
            InputEmbedding::Identity,
        ),
        ConstructionFamily::AvgFac => (
            LayerSpec {
                heads: vec![
                    head(BuiltinAttention::EdgeDp, ws(ScoreTransform::Avg)),
                    head(BuiltinAttention::VertexDp, ws(ScoreTransform::Avg)),
                ],
                activation: ActivationSpec::Builtin(BuiltinActivation::EdgeAvg),
            },
            LayerSpec {
                heads: vec![
                    head(BuiltinAttention::VertexDp, ws(ScoreTransform::Avg)),
                    head(BuiltinAttention::VertexDp, wp(ScoreTransform::Avg)),
                ],
                activation: ActivationSpec::Builtin(BuiltinActivation::VertexAvg),
            },
            TypeConstants::base(),
            InputEmbedding::Extend(7),
        ),
        ConstructionFamily::AvgFsac => (
            LayerSpec {
                heads: vec![
                    head(BuiltinAttention::EdgeDp, ws(ScoreTransform::Avg)),
                    head(BuiltinAttention::VertexDp, ws(ScoreTransform::Avg)),
                    unused_head(),
                ],
                activation: ActivationSpec::Builtin(BuiltinActivation::EdgeSemi),
            },
            LayerSpec {
                heads: vec![
                    head(BuiltinAttention::VertexDp, ws(ScoreTransform::Avg)),
                    head(BuiltinAttention::Predecessor(1), ws(ScoreTransform::Avg)),
                    head(BuiltinAttention::Predecessor(2), ws(ScoreTransform::Avg)),
                ],
                activation: ActivationSpec::Builtin(BuiltinActivation::VertexSemi),
            },
            TypeConstants::base(),
            InputEmbedding::Extend(8),
        ),
        ConstructionFamily::HardFnc => (
            LayerSpec {
                heads: vec![
                    head(BuiltinAttention::EdgeDp, ws(ScoreTransform::HardLeft)),
                    unused_head(),
                ],
                activation: ActivationSpec::Builtin(BuiltinActivation::EdgeFnc),
            },
            LayerSpec {
                heads: vec![
                    head(
                        BuiltinAttention::Predecessor(1),
                        ws(ScoreTransform::HardLeft),
                    ),
                    head(
                        BuiltinAttention::Predecessor(2),
                        ws(ScoreTransform::HardLeft),
                    ),
                ],
                activation: ActivationSpec::Builtin(BuiltinActivation::VertexFnc),
            },
            TypeConstants::base(),
            InputEmbedding::Extend(8),
        ),
        ConstructionFamily::AvgExt(names) => {
            let mut max_arity = 0usize;
            for name in names {
                let arity = basis_arity(name, registry)?;
                if arity < 1 {
                    return Err(BuildError::BadBasisArity {
                        name: name.clone(),
                        arity,
                    });
                }
                max_arity = max_arity.max(arity);
            }
            let fetch_heads = max_arity.max(2);
            let mut combine = vec![head(BuiltinAttention::VertexDp, ws(ScoreTransform::Avg))];
            for k in 1..=fetch_heads {
                combine.push(head(
                    BuiltinAttention::Predecessor(k),
                    ws(ScoreTransform::Avg),
                ));
            }
            let mut fetch = vec![
                head(BuiltinAttention::EdgeDp, ws(ScoreTransform::Avg)),
                head(BuiltinAttention::VertexDp, ws(ScoreTransform::Avg)),
            ];
            while fetch.len() < combine.len() {
                fetch.push(unused_head());
            }
            (
                LayerSpec {
                    heads: fetch,
                    activation: ActivationSpec::Builtin(BuiltinActivation::EdgeSemi),
                },
                LayerSpec {
                    heads: combine,
                    activation: ActivationSpec::Builtin(BuiltinActivation::VertexExt(
                        names.clone(),
                    )),
                },
                TypeConstants::for_registry(registry),
                InputEmbedding::Extend(8),
            )
        }
        ConstructionFamily::AvgSign => (
            LayerSpec {
                heads: vec![
                    head(BuiltinAttention::EdgeDp, ws(ScoreTransform::Avg)),
                    head(BuiltinAttention::VertexDp, ws(ScoreTransform::Avg)),
                    unused_head(),
                    unused_head(),
                    unused_head(),
                    unused_head(),
                ],
                activation: ActivationSpec::Builtin(BuiltinActivation::EdgeSemi),
            },
            LayerSpec {
                heads: vec![
                    head(BuiltinAttention::VertexDp, ws(ScoreTransform::Avg)),
                    head(BuiltinAttention::Predecessor(1), ws(ScoreTransform::Avg)),
                    head(BuiltinAttention::Predecessor(2), ws(ScoreTransform::Avg)),
                    head(BuiltinAttention::ZeroProbePlus, ws(ScoreTransform::Avg)),
                    head(BuiltinAttention::ZeroProbeMinus, ws(ScoreTransform::Avg)),
                    head(BuiltinAttention::SignProbe, ws(ScoreTransform::Avg)),
                ],
                activation: ActivationSpec::Builtin(BuiltinActivation::VertexSign),
            },
            TypeConstants::base(),
            InputEmbedding::Extend(9),
        ),
    };

    let mut layers = Vec::with_capacity(2 * depth_bound);
    for _ in 0..depth_bound {
        layers.push(fetch_layer.clone());
        layers.push(combine_layer.clone());
    }
    Ok(TransformerConfig {
        dim: family.dim(),
        input_embedding: embedding,
        positional_embedding: PositionalEmbedding::None,
        layers,
        types,
        charfin: CharfinMode::ZeroBased,
        extensions: registry.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AdmissibilityError {
    Invalid(ValidationReport),
    DepthExceeded { depth: usize, bound: usize },
    DisallowedGate { gate: usize, reason: String },
    FanIn { gate: usize, reason: String },
}

impl fmt::Display for AdmissibilityError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AdmissibilityError::Invalid(report) => write!(f, "circuit is invalid: {report}"),
            AdmissibilityError::DepthExceeded { depth, bound } => {
                write!(
                    f,
                    "circuit depth {depth} exceeds the construction's bound {bound}"
                )
            }
            AdmissibilityError::DisallowedGate { gate, reason } => {
                write!(f, "gate {gate}: {reason}")
            }
            AdmissibilityError::FanIn { gate, reason } => write!(f, "gate {gate}: {reason}"),
        }
    }
}

impl std::error::Error for AdmissibilityError {}

/// Checks what the chosen construction assumes of a circuit: fan-in shape per
/// gate kind, which extra gates are allowed, and the depth bound.
pub fn check_admissible(
    family: &ConstructionFamily,
    depth_bound: usize,
    c: &Circuit,
) -> Result<(), AdmissibilityError> {
    let report = c.validate();
    if !report.is_valid() {
        return Err(AdmissibilityError::Invalid(report));
    }
    let metrics = c.metrics();
    if metrics.depth > depth_bound {
        return Err(AdmissibilityError::DepthExceeded {
            depth: metrics.depth,
            bound: depth_bound,
        });
    }
    let inc = c.incoming();
    let binary_times = !matches!(
        family,
        ConstructionFamily::Generalized | ConstructionFamily::AvgFac
    );
    let binary_plus = matches!(family, ConstructionFamily::HardFnc);
    for (idx, g) in c.gates() {
        let fan_in = inc[idx].len();
        match g {
            GateLabel::Plus => {
                if fan_in == 0 {
                    return Err(AdmissibilityError::FanIn {
                        gate: idx,
                        reason: "plus gate without predecessors cannot be encoded".into(),
                    });
                }
                if binary_plus && fan_in != 2 {
                    return Err(AdmissibilityError::FanIn {
                        gate: idx,
                        reason: format!("plus gate has fan-in {fan_in}, bounded basis needs 2"),
                    });
                }
            }
            GateLabel::Times => {
                if fan_in == 0 {
                    return Err(AdmissibilityError::FanIn {
                        gate: idx,
                        reason: "times gate without predecessors cannot be encoded".into(),
                    });
                }
                if binary_times && fan_in != 2 {
                    return Err(AdmissibilityError::FanIn {
                        gate: idx,
                        reason: format!(
                            "times gate has fan-in {fan_in}, this construction needs 2"
                        ),
                    });
                }
            }
            GateLabel::Sign => {
                let ok = matches!(family, ConstructionFamily::AvgSign)
                    || matches!(family, ConstructionFamily::AvgExt(names)
                        if names.iter().any(|n| n == "sign"));
                if !ok {
                    return Err(AdmissibilityError::DisallowedGate {
                        gate: idx,
                        reason: format!("sign gate not simulated by `{family}`"),
                    });
                }
            }
            GateLabel::Extension { name, .. } => {
                let ok = matches!(family, ConstructionFamily::AvgExt(names)
                    if names.iter().any(|n| n == name));
                if !ok {
                    return Err(AdmissibilityError::DisallowedGate {
                        gate: idx,
                        reason: format!("extension gate `{name}` not simulated by `{family}`"),
                    });
                }
            }
            _ => {}
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SimulateError {
    Build(BuildError),
    Admissibility(AdmissibilityError),
    Encode(EncodeError),
    Engine(EngineError),
    Decode(DecodeError),
}

impl fmt::Display for SimulateError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimulateError::Build(e) => write!(f, "{e}"),
            SimulateError::Admissibility(e) => write!(f, "{e}"),
            SimulateError::Encode(e) => write!(f, "{e}"),
            SimulateError::Engine(e) => write!(f, "{e}"),
            SimulateError::Decode(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for SimulateError {}

/// Encode, run, decode: the transformer's outputs at the output edges, which
/// equal `evaluate(c, inputs)` exactly for admissible circuits.
pub fn simulate(
    family: &ConstructionFamily,
    depth_bound: usize,
    c: &Circuit,
    inputs: &[Rational],
    registry: &ExtensionRegistry,
    trace_mode: TraceMode,
) -> Result<(Vec<Rational>, ExecutionTrace), SimulateError> {
    check_admissible(family, depth_bound, c).map_err(SimulateError::Admissibility)?;
    let cfg = build(family, depth_bound, registry).map_err(SimulateError::Build)?;
    let seq = encode(c, inputs, &cfg.types).map_err(SimulateError::Encode)?;
    let (final_seq, trace) = run(&cfg, &seq.raw(), trace_mode).map_err(SimulateError::Engine)?;
    let outputs = decode_outputs(c.output_count(), &final_seq).map_err(SimulateError::Decode)?;
    Ok((outputs, trace))
}

/// Scores a named builtin attention function on a pair of vectors.
pub fn builtin_attention(
    name: &BuiltinAttention,
    x: &[Rational],
    y: &[Rational],
) -> Result<Rational, EngineError> {
    attention_value(&AttentionSpec::Builtin(name.clone()), x, y)
}

/// Applies a named builtin activation; `inputs[0]` is the position's own
/// vector, the rest are pooled head results.
pub fn builtin_activation(
    name: &BuiltinActivation,
    inputs: &[Vec<Rational>],
    types: &TypeConstants,
    mode: CharfinMode,
    registry: &ExtensionRegistry,
) -> Result<Vec<Rational>, EngineError> {
    let chi = ChiCtx::new(types, mode);
    builtin_activation_value(name, inputs, types, &chi, registry)
}

#[cfg(test)]
mod tests;
