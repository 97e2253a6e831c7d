//! Transformer config text format.
//!
//! ```text
//! dim 8
//! embed embed5to8
//! charfin zero
//! layer
//! head att_E_dp WS/avg
//! head att_V_dp WS/avg
//! head att_E_eq WS/id
//! act act_E_semi
//! layer
//! head att_V_dp WS/avg
//! head att_B(1) WS/avg
//! head att_B(2) WS/avg
//! act act_V_semi
//! ```
//!
//! Dot-product heads inline both matrices row-major:
//! `head dp <d*d rationals> <d*d rationals> WS/avg`. Host functions
//! reference circuit files by path relative to the config file:
//! `head circuit <path> WS/avg`, `act circuit <path>`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use super::{
    ActivationSpec, AttentionSpec, BuiltinActivation, BuiltinAttention, CharfinMode, HeadSpec,
    InputEmbedding, LayerSpec, Matrix, PoolFamily, PoolingSpec, PositionalEmbedding,
    ScoreTransform, TransformerConfig,
};
use crate::circuit::{parse_circuit, to_gadget, ExtensionRegistry};
use crate::encoding::TypeConstants;
use crate::numerics::Rational;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigTextError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ConfigTextError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for ConfigTextError {}

fn err(line: usize, message: impl Into<String>) -> ConfigTextError {
    ConfigTextError {
        line,
        message: message.into(),
    }
}

pub fn parse_pooling(token: &str) -> Option<PoolingSpec> {
    let (family, transform) = token.split_once('/')?;
    let family = match family {
        "WS" => PoolFamily::WeightedSum,
        "WP" => PoolFamily::WeightedProduct,
        _ => return None,
    };
    let transform = match transform {
        "id" => ScoreTransform::Id,
        "avg" => ScoreTransform::Avg,
        "hardleft" => ScoreTransform::HardLeft,
        "hardright" => ScoreTransform::HardRight,
        _ => return None,
    };
    Some(PoolingSpec { family, transform })
}

pub fn parse_builtin_attention(token: &str) -> Option<BuiltinAttention> {
    Some(match token {
        "att_E_eq" => BuiltinAttention::EdgeEq,
        "att_V_eq" => BuiltinAttention::VertexEq,
        "att_E_dp" => BuiltinAttention::EdgeDp,
        "att_V_dp" => BuiltinAttention::VertexDp,
        "att_z_plus" => BuiltinAttention::ZeroProbePlus,
        "att_z_minus" => BuiltinAttention::ZeroProbeMinus,
        "att_sign" => BuiltinAttention::SignProbe,
        _ => {
            let k = token.strip_prefix("att_B(")?.strip_suffix(')')?;
            let k: usize = k.parse().ok().filter(|&k| k >= 1)?;
            BuiltinAttention::Predecessor(k)
        }
    })
}

pub fn parse_builtin_activation(token: &str) -> Option<BuiltinActivation> {
    Some(match token {
        "act_E_gen" => BuiltinActivation::EdgeGeneral,
        "act_V_gen" => BuiltinActivation::VertexGeneral,
        "act_E_avg" => BuiltinActivation::EdgeAvg,
        "act_V_avg" => BuiltinActivation::VertexAvg,
        "act_E_semi" => BuiltinActivation::EdgeSemi,
        "act_V_semi" => BuiltinActivation::VertexSemi,
        "act_E_fnc" => BuiltinActivation::EdgeFnc,
        "act_V_fnc" => BuiltinActivation::VertexFnc,
        "act_V_sign" => BuiltinActivation::VertexSign,
        _ => {
            let names = token.strip_prefix("act_V_ext(")?.strip_suffix(')')?;
            BuiltinActivation::VertexExt(
                names
                    .split(',')
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .collect(),
            )
        }
    })
}

fn load_gadget(
    base: Option<&Path>,
    rel: &str,
    lineno: usize,
) -> Result<crate::gadget::GadgetCircuit, ConfigTextError> {
    let base = base.ok_or_else(|| {
        err(
            lineno,
            "host circuit references need a config file location to resolve paths",
        )
    })?;
    let path = base.join(rel);
    let text = std::fs::read_to_string(&path)
        .map_err(|e| err(lineno, format!("cannot read `{}`: {e}", path.display())))?;
    let circuit = parse_circuit(&text).map_err(|e| err(lineno, format!("in `{rel}`: {e}")))?;
    to_gadget(&circuit, rel).map_err(|e| err(lineno, format!("in `{rel}`: {e}")))
}

/// Parses a config. `base` is the directory host-circuit paths resolve
/// against; `registry` provides the host functions for `act_V_ext`.
pub fn parse_config(
    input: &str,
    base: Option<&Path>,
    registry: &ExtensionRegistry,
) -> Result<TransformerConfig, ConfigTextError> {
    let mut dim = None;
    let mut embed = None;
    let mut charfin = CharfinMode::ZeroBased;
    let mut extensions: Vec<String> = Vec::new();
    let mut pos_table: BTreeMap<(usize, usize), Vec<Rational>> = BTreeMap::new();
    let mut layers: Vec<(Vec<HeadSpec>, Option<ActivationSpec>, usize)> = Vec::new();

    for (lineno, raw) in input.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let head_token = tokens.next().unwrap();
        let rest: Vec<&str> = tokens.collect();
        match head_token {
            "dim" => {
                let d: usize = rest
                    .first()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| err(lineno, "bad dimension"))?;
                if dim.replace(d).is_some() {
                    return Err(err(lineno, "duplicate dim"));
                }
            }
            "embed" => {
                let e = match rest.as_slice() {
                    ["identity"] => InputEmbedding::Identity,
                    ["embed5to7"] => InputEmbedding::Extend(7),
                    ["embed5to8"] => InputEmbedding::Extend(8),
                    ["embed5to9"] => InputEmbedding::Extend(9),
                    ["circuit", rel] => InputEmbedding::Host(load_gadget(base, rel, lineno)?),
                    _ => return Err(err(lineno, "bad embedding name")),
                };
                if embed.replace(e).is_some() {
                    return Err(err(lineno, "duplicate embed"));
                }
            }
            "charfin" => {
                charfin = match rest.as_slice() {
                    ["zero"] => CharfinMode::ZeroBased,
                    ["lagrange"] => CharfinMode::Lagrange,
                    _ => return Err(err(lineno, "charfin must be `zero` or `lagrange`")),
                };
            }
            "extensions" => {
                extensions = rest.iter().map(|s| s.to_string()).collect();
            }
            "pos" => {
                if rest.len() < 2 {
                    return Err(err(lineno, "pos needs `<i> <n> <components>`"));
                }
                let i: usize = rest[0].parse().map_err(|_| err(lineno, "bad pos index"))?;
                let n: usize = rest[1].parse().map_err(|_| err(lineno, "bad pos length"))?;
                let comps: Vec<Rational> = rest[2..]
                    .iter()
                    .map(|t| t.parse().map_err(|e| err(lineno, format!("{e}"))))
                    .collect::<Result<_, _>>()?;
                pos_table.insert((i, n), comps);
            }
            "layer" => layers.push((Vec::new(), None, lineno)),
            "head" => {
                let layer = layers
                    .last_mut()
                    .ok_or_else(|| err(lineno, "`head` before any `layer`"))?;
                if rest.is_empty() {
                    return Err(err(lineno, "head needs an attention spec and a pooling"));
                }
                let pooling = parse_pooling(rest.last().unwrap())
                    .ok_or_else(|| err(lineno, "bad pooling spec (want e.g. WS/avg)"))?;
                let spec_tokens = &rest[..rest.len() - 1];
                let attention = match spec_tokens {
                    ["dp", mats @ ..] => {
                        let d = dim.ok_or_else(|| err(lineno, "`dim` must come first"))?;
                        if mats.len() != 2 * d * d {
                            return Err(err(
                                lineno,
                                format!(
                                    "dp head needs {} rationals, got {}",
                                    2 * d * d,
                                    mats.len()
                                ),
                            ));
                        }
                        let vals: Vec<Rational> = mats
                            .iter()
                            .map(|t| t.parse().map_err(|e| err(lineno, format!("{e}"))))
                            .collect::<Result<_, _>>()?;
                        let rows = |vals: &[Rational]| {
                            (0..d).map(|r| vals[r * d..(r + 1) * d].to_vec()).collect()
                        };
                        AttentionSpec::DotProduct {
                            a: Matrix::from_rows(rows(&vals[..d * d])),
                            b: Matrix::from_rows(rows(&vals[d * d..])),
                        }
                    }
                    ["circuit", rel] => AttentionSpec::Host(load_gadget(base, rel, lineno)?),
                    [one] => AttentionSpec::Builtin(
                        parse_builtin_attention(one)
                            .ok_or_else(|| err(lineno, format!("unknown attention `{one}`")))?,
                    ),
                    _ => return Err(err(lineno, "bad head spec")),
                };
                layer.0.push(HeadSpec { attention, pooling });
            }
            "act" => {
                let layer = layers
                    .last_mut()
                    .ok_or_else(|| err(lineno, "`act` before any `layer`"))?;
                let spec = match rest.as_slice() {
                    ["circuit", rel] => ActivationSpec::Host(load_gadget(base, rel, lineno)?),
                    [one] => ActivationSpec::Builtin(
                        parse_builtin_activation(one)
                            .ok_or_else(|| err(lineno, format!("unknown activation `{one}`")))?,
                    ),
                    _ => return Err(err(lineno, "bad act spec")),
                };
                if layer.1.replace(spec).is_some() {
                    return Err(err(lineno, "duplicate act in layer"));
                }
            }
            other => return Err(err(lineno, format!("unknown directive `{other}`"))),
        }
    }

    let dim = dim.ok_or_else(|| err(0, "missing `dim`"))?;
    let input_embedding = embed.unwrap_or(InputEmbedding::Identity);
    let layers = layers
        .into_iter()
        .map(|(heads, act, lineno)| {
            let activation = act.ok_or_else(|| err(lineno, "layer without an `act` line"))?;
            if heads.is_empty() {
                return Err(err(lineno, "layer without heads"));
            }
            Ok(LayerSpec { heads, activation })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let positional_embedding = if pos_table.is_empty() {
        PositionalEmbedding::None
    } else {
        PositionalEmbedding::Table(pos_table)
    };
    Ok(TransformerConfig {
        dim,
        input_embedding,
        positional_embedding,
        layers,
        types: TypeConstants::with_extensions(extensions),
        charfin,
        extensions: registry.clone(),
    })
}

/// Canonical rendering. Host specs cannot be rendered (their file paths are
/// not part of the config) and produce an error.
pub fn render_config(cfg: &TransformerConfig) -> Result<String, ConfigTextError> {
    let mut out = String::new();
    out.push_str(&format!("dim {}\n", cfg.dim));
    let embed = match &cfg.input_embedding {
        InputEmbedding::Identity => "identity".to_string(),
        InputEmbedding::Extend(d) => format!("embed5to{d}"),
        InputEmbedding::Host(_) => return Err(err(0, "host input embedding has no textual form")),
    };
    out.push_str(&format!("embed {embed}\n"));
    if cfg.charfin == CharfinMode::Lagrange {
        out.push_str("charfin lagrange\n");
    }
    let ext_names: Vec<String> = cfg.types.extension_names().to_vec();
    if !ext_names.is_empty() {
        out.push_str(&format!("extensions {}\n", ext_names.join(" ")));
    }
    if let PositionalEmbedding::Table(table) = &cfg.positional_embedding {
        for ((i, n), comps) in table {
            let cells: Vec<String> = comps.iter().map(Rational::to_string).collect();
            out.push_str(&format!("pos {i} {n} {}\n", cells.join(" ")));
        }
    }
    for layer in &cfg.layers {
        out.push_str("layer\n");
        for head in &layer.heads {
            let spec = match &head.attention {
                AttentionSpec::Builtin(b) => b.to_string(),
                AttentionSpec::DotProduct { a, b } => {
                    let mut cells = Vec::new();
                    for m in [a, b] {
                        for row in m.rows() {
                            cells.extend(row.iter().map(Rational::to_string));
                        }
                    }
                    format!("dp {}", cells.join(" "))
                }
                AttentionSpec::Host(_) => return Err(err(0, "host attention has no textual form")),
            };
            out.push_str(&format!("head {spec} {}\n", head.pooling));
        }
        match &layer.activation {
            ActivationSpec::Builtin(b) => out.push_str(&format!("act {b}\n")),
            ActivationSpec::Host(_) => return Err(err(0, "host activation has no textual form")),
        }
    }
    Ok(out)
}
