//! The sequence encoding of circuits: one 5-dimensional vector per constant
//! or input gate and one per edge, plus the decoder that reads output values
//! back off the incoming edges of output gates.
//!
//! Vector components are `(s, p, i, t, v)`: successor gate index, predecessor
//! gate index, edge alpha, gate-type constant, payload value. Input
//! embeddings append `(one, ssq, isq, bin)` as needed by the dot-product
//! attention constructions; encoded files themselves are always dimension 5.

use std::fmt;

use crate::circuit::{Circuit, ExtensionRegistry, GateLabel};
use crate::numerics::{charfin, Rational};

pub const COMP_S: usize = 0;
pub const COMP_P: usize = 1;
pub const COMP_I: usize = 2;
pub const COMP_T: usize = 3;
pub const COMP_V: usize = 4;
pub const COMP_ONE: usize = 5;
pub const COMP_SSQ: usize = 6;
pub const COMP_ISQ: usize = 7;
pub const COMP_BIN: usize = 8;

/// The distinct constants standing for gate types. Base types are fixed
/// small naturals; extension functions get `7, 8, ...` in registration
/// order. `sign` is the distinguished extension and is always `6`.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct TypeConstants {
    extensions: Vec<String>,
}

impl TypeConstants {
    pub fn base() -> Self {
        TypeConstants::default()
    }

    pub fn with_extensions<I: IntoIterator<Item = S>, S: Into<String>>(names: I) -> Self {
        TypeConstants {
            extensions: names.into_iter().map(Into::into).collect(),
        }
    }

    pub fn for_registry(registry: &ExtensionRegistry) -> Self {
        TypeConstants::with_extensions(registry.names().map(str::to_string))
    }

    pub fn extension_names(&self) -> &[String] {
        &self.extensions
    }

    pub fn t_const() -> Rational {
        Rational::from_int(1)
    }

    pub fn t_input() -> Rational {
        Rational::from_int(2)
    }

    pub fn t_output() -> Rational {
        Rational::from_int(3)
    }

    pub fn t_plus() -> Rational {
        Rational::from_int(4)
    }

    pub fn t_times() -> Rational {
        Rational::from_int(5)
    }

    pub fn t_sign() -> Rational {
        Rational::from_int(6)
    }

    pub fn extension(&self, name: &str) -> Option<Rational> {
        if name == "sign" {
            return Some(Self::t_sign());
        }
        self.extensions
            .iter()
            .position(|n| n == name)
            .map(|i| Rational::from_int(7 + i as i64))
    }

    /// Every registered type constant, pairwise distinct; the characteristic
    /// functions' support set.
    pub fn all(&self) -> Vec<Rational> {
        (1..=6 + self.extensions.len() as i64)
            .map(Rational::from_int)
            .collect()
    }

    /// Type constant carried by edges into the given gate.
    pub fn of_target(&self, label: &GateLabel) -> Result<Rational, EncodeError> {
        match label {
            GateLabel::Output(_) => Ok(Self::t_output()),
            GateLabel::Plus => Ok(Self::t_plus()),
            GateLabel::Times => Ok(Self::t_times()),
            GateLabel::Sign => Ok(Self::t_sign()),
            GateLabel::Extension { name, .. } => self
                .extension(name)
                .ok_or_else(|| EncodeError::UnknownExtension { name: name.clone() }),
            GateLabel::Constant(_) | GateLabel::Input(_) => Err(EncodeError::SourceAsTarget),
        }
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct EncodedVector {
    comps: Vec<Rational>,
}

impl EncodedVector {
    pub fn new(comps: Vec<Rational>) -> Self {
        assert!(
            (5..=9).contains(&comps.len()),
            "encoded vectors have 5 to 9 components"
        );
        EncodedVector { comps }
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn comps(&self) -> &[Rational] {
        &self.comps
    }

    pub fn s(&self) -> &Rational {
        &self.comps[COMP_S]
    }

    pub fn p(&self) -> &Rational {
        &self.comps[COMP_P]
    }

    pub fn i(&self) -> &Rational {
        &self.comps[COMP_I]
    }

    pub fn t(&self) -> &Rational {
        &self.comps[COMP_T]
    }

    pub fn v(&self) -> &Rational {
        &self.comps[COMP_V]
    }
}

impl fmt::Debug for EncodedVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.comps.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedSequence {
    pub dim: usize,
    pub vectors: Vec<EncodedVector>,
}

impl EncodedSequence {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn raw(&self) -> Vec<Vec<Rational>> {
        self.vectors.iter().map(|v| v.comps.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EncodeError {
    ArityMismatch { expected: usize, got: usize },
    UnknownExtension { name: String },
    SourceAsTarget,
}

impl fmt::Display for EncodeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EncodeError::ArityMismatch { expected, got } => {
                write!(f, "circuit takes {expected} inputs, got {got}")
            }
            EncodeError::UnknownExtension { name } => {
                write!(f, "no type constant registered for extension `{name}`")
            }
            EncodeError::SourceAsTarget => {
                write!(f, "constant or input gate cannot be an edge target")
            }
        }
    }
}

impl std::error::Error for EncodeError {}

/// Encodes a circuit and an input vector as a sequence of 5-vectors, in
/// canonical order: node vectors ascending by gate index, then edge vectors
/// ascending by (successor, alpha).
pub fn encode(
    c: &Circuit,
    inputs: &[Rational],
    types: &TypeConstants,
) -> Result<EncodedSequence, EncodeError> {
    let m = c.input_count();
    if inputs.len() != m {
        return Err(EncodeError::ArityMismatch {
            expected: m,
            got: inputs.len(),
        });
    }
    let mut vectors = Vec::new();
    let zero = Rational::zero;
    for (idx, g) in c.gates() {
        let (t, v) = match g {
            GateLabel::Constant(v) => (TypeConstants::t_const(), v.clone()),
            GateLabel::Input(k) => (TypeConstants::t_input(), inputs[*k - 1].clone()),
            _ => continue,
        };
        vectors.push(EncodedVector::new(vec![
            Rational::from_int(idx as i64),
            zero(),
            zero(),
            t,
            v,
        ]));
    }
    let mut edges: Vec<_> = c.edges().to_vec();
    edges.sort_by_key(|e| (e.to, e.alpha));
    for e in edges {
        let t = types.of_target(c.gate(e.to))?;
        vectors.push(EncodedVector::new(vec![
            Rational::from_int(e.to as i64),
            Rational::from_int(e.from as i64),
            Rational::from_int(e.alpha as i64),
            t,
            zero(),
        ]));
    }
    Ok(EncodedSequence { dim: 5, vectors })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DecodeError {
    OutputCount { expected: usize, got: usize },
    ShortVector { position: usize, dim: usize },
}

impl fmt::Display for DecodeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecodeError::OutputCount { expected, got } => {
                write!(f, "expected {expected} output-edge vectors, found {got}")
            }
            DecodeError::ShortVector { position, dim } => {
                write!(f, "vector {position} has dimension {dim} < 5")
            }
        }
    }
}

impl std::error::Error for DecodeError {}

/// Reads the `v` components of the `t_output` vectors, ordered by ascending
/// successor index. Works on raw vectors of any dimension >= 5, so it can be
/// applied directly to transformer outputs.
pub fn decode_outputs(
    output_count: usize,
    vectors: &[Vec<Rational>],
) -> Result<Vec<Rational>, DecodeError> {
    let t_out = TypeConstants::t_output();
    let mut found: Vec<(&Rational, &Rational)> = Vec::new();
    for (pos, v) in vectors.iter().enumerate() {
        if v.len() < 5 {
            return Err(DecodeError::ShortVector {
                position: pos,
                dim: v.len(),
            });
        }
        if v[COMP_T] == t_out {
            found.push((&v[COMP_S], &v[COMP_V]));
        }
    }
    if found.len() != output_count {
        return Err(DecodeError::OutputCount {
            expected: output_count,
            got: found.len(),
        });
    }
    found.sort_by(|a, b| a.0.cmp(b.0));
    Ok(found.into_iter().map(|(_, v)| v.clone()).collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmbedError {
    pub from: usize,
    pub to: usize,
}

impl fmt::Display for EmbedError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "no embedding from dimension {} to {}",
            self.from, self.to
        )
    }
}

impl std::error::Error for EmbedError {}

/// Appends the derived components used by the dot-product constructions:
/// dimension 7 adds `(1, s^2)`, 8 adds `i^2`, 9 adds the output-type
/// indicator `bin`.
pub fn embed_vector(comps: &[Rational], target_dim: usize) -> Result<Vec<Rational>, EmbedError> {
    if comps.len() != 5 || !matches!(target_dim, 5 | 7 | 8 | 9) {
        return Err(EmbedError {
            from: comps.len(),
            to: target_dim,
        });
    }
    let mut out = comps.to_vec();
    if target_dim >= 7 {
        out.push(Rational::one());
        out.push(comps[COMP_S].square());
    }
    if target_dim >= 8 {
        out.push(comps[COMP_I].square());
    }
    if target_dim >= 9 {
        out.push(charfin(&TypeConstants::t_output(), &comps[COMP_T]));
    }
    Ok(out)
}

pub fn embed(seq: &EncodedSequence, target_dim: usize) -> Result<EncodedSequence, EmbedError> {
    if seq.dim != 5 {
        return Err(EmbedError {
            from: seq.dim,
            to: target_dim,
        });
    }
    let vectors = seq
        .vectors
        .iter()
        .map(|v| embed_vector(v.comps(), target_dim).map(EncodedVector::new))
        .collect::<Result<_, _>>()?;
    Ok(EncodedSequence {
        dim: target_dim,
        vectors,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceTextError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for SequenceTextError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for SequenceTextError {}

/// Sequence file: header `dim <d>`, then one vector per line, components as
/// rational literals separated by single spaces.
pub fn parse_sequence(input: &str) -> Result<EncodedSequence, SequenceTextError> {
    let mut dim = None;
    let mut vectors = Vec::new();
    for (lineno, raw) in input.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("dim ") {
            let d: usize = rest.trim().parse().map_err(|_| SequenceTextError {
                line: lineno,
                message: format!("bad dimension `{rest}`"),
            })?;
            if !(5..=9).contains(&d) {
                return Err(SequenceTextError {
                    line: lineno,
                    message: format!("dimension {d} out of range 5..9"),
                });
            }
            if dim.replace(d).is_some() {
                return Err(SequenceTextError {
                    line: lineno,
                    message: "duplicate dim".into(),
                });
            }
            continue;
        }
        let d = dim.ok_or(SequenceTextError {
            line: lineno,
            message: "missing `dim <d>` header".into(),
        })?;
        let comps: Vec<Rational> = line
            .split_whitespace()
            .map(|t| {
                t.parse().map_err(|e| SequenceTextError {
                    line: lineno,
                    message: format!("{e}"),
                })
            })
            .collect::<Result<_, _>>()?;
        if comps.len() != d {
            return Err(SequenceTextError {
                line: lineno,
                message: format!("expected {d} components, got {}", comps.len()),
            });
        }
        vectors.push(EncodedVector::new(comps));
    }
    let dim = dim.ok_or(SequenceTextError {
        line: 0,
        message: "missing `dim` header".into(),
    })?;
    Ok(EncodedSequence { dim, vectors })
}

pub fn render_sequence(seq: &EncodedSequence) -> String {
    render_raw_sequence(seq.dim, &seq.raw())
}

pub fn render_raw_sequence(dim: usize, vectors: &[Vec<Rational>]) -> String {
    let mut out = format!("dim {dim}\n");
    for v in vectors {
        let line: Vec<String> = v.iter().map(Rational::to_string).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}
