//! Generalized transformer executor over exact rationals: input and
//! positional embeddings, per-layer per-head attention, pooling, activation.
//!
//! A transformer here is plain data ([`TransformerConfig`]); running it is a
//! pure function from vector sequences to vector sequences. Heads within a
//! layer are independent; layers are sequential.

mod builtins;
mod text;

pub use builtins::{
    attention_value, builtin_activation_value, BuiltinActivation, BuiltinAttention,
};
pub use text::{parse_config, render_config, ConfigTextError};

use std::collections::BTreeMap;
use std::fmt;

use crate::circuit::ExtensionRegistry;
use crate::encoding::{embed_vector, EmbedError, TypeConstants};
use crate::gadget::{GadgetCircuit, GadgetError};
use crate::numerics::{LagrangeTable, Rational};

/// Square rational matrix, row-major. Used both for dot-product attention
/// weights (d x d) and attention-score traces (n x n).
#[derive(Clone, PartialEq, Eq)]
pub struct Matrix {
    n: usize,
    data: Vec<Rational>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Matrix {
            n,
            data: vec![Rational::zero(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n);
        for i in 0..n {
            m.set(i, i, Rational::one());
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Rational>>) -> Self {
        let n = rows.len();
        assert!(rows.iter().all(|r| r.len() == n), "matrix must be square");
        Matrix {
            n,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, row: usize, col: usize) -> &Rational {
        &self.data[row * self.n + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: Rational) {
        self.data[row * self.n + col] = v;
    }

    pub fn row(&self, row: usize) -> &[Rational] {
        &self.data[row * self.n..(row + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[Rational]> {
        self.data.chunks(self.n)
    }

    pub fn mul_vec(&self, v: &[Rational]) -> Vec<Rational> {
        assert_eq!(v.len(), self.n);
        self.rows()
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Nonzero entries as (row, col, value); the sparse form the circuitizer
    /// consumes.
    pub fn nonzero(&self) -> Vec<(usize, usize, &Rational)> {
        let mut out = Vec::new();
        for r in 0..self.n {
            for c in 0..self.n {
                let v = self.get(r, c);
                if !v.is_zero() {
                    out.push((r, c, v));
                }
            }
        }
        out
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{}", self.n, self.n)?;
        for row in self.rows() {
            let cells: Vec<String> = row.iter().map(Rational::to_string).collect();
            writeln!(f, "  [{}]", cells.join(", "))?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScoreTransform {
    Id,
    Avg,
    HardLeft,
    HardRight,
}

impl ScoreTransform {
    pub fn name(&self) -> &'static str {
        match self {
            ScoreTransform::Id => "id",
            ScoreTransform::Avg => "avg",
            ScoreTransform::HardLeft => "hardleft",
            ScoreTransform::HardRight => "hardright",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PoolFamily {
    /// Weighted sum of all vectors.
    WeightedSum,
    /// Componentwise product over vectors with nonzero transformed weight.
    WeightedProduct,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PoolingSpec {
    pub family: PoolFamily,
    pub transform: ScoreTransform,
}

impl fmt::Display for PoolingSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let fam = match self.family {
            PoolFamily::WeightedSum => "WS",
            PoolFamily::WeightedProduct => "WP",
        };
        write!(f, "{fam}/{}", self.transform.name())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum AttentionSpec {
    /// `(x, y) -> Ax . By`.
    DotProduct {
        a: Matrix,
        b: Matrix,
    },
    Builtin(BuiltinAttention),
    /// Host circuit with `2 * dim` inputs and one output; `x` then `y`.
    Host(GadgetCircuit),
}

#[derive(Clone, Debug, PartialEq)]
pub enum ActivationSpec {
    Builtin(BuiltinActivation),
    /// Host circuit with `(H + 1) * dim` inputs and `dim` outputs.
    Host(GadgetCircuit),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum InputEmbedding {
    Identity,
    /// Appends the derived components, 5 -> 7 | 8 | 9.
    Extend(usize),
    Host(GadgetCircuit),
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub enum PositionalEmbedding {
    #[default]
    None,
    /// Finite lookup `(position, length) -> vector`; absent keys mean zero.
    Table(BTreeMap<(usize, usize), Vec<Rational>>),
}

/// Which charfin realization the built-in activations use. Both agree on
/// every registered type constant, so they are interchangeable on valid
/// encodings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum CharfinMode {
    #[default]
    ZeroBased,
    Lagrange,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HeadSpec {
    pub attention: AttentionSpec,
    pub pooling: PoolingSpec,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerSpec {
    pub heads: Vec<HeadSpec>,
    pub activation: ActivationSpec,
}

#[derive(Clone, Debug)]
pub struct TransformerConfig {
    pub dim: usize,
    pub input_embedding: InputEmbedding,
    pub positional_embedding: PositionalEmbedding,
    pub layers: Vec<LayerSpec>,
    pub types: TypeConstants,
    pub charfin: CharfinMode,
    pub extensions: ExtensionRegistry,
}

impl TransformerConfig {
    /// Dimension the raw input vectors must have.
    pub fn input_dim(&self) -> usize {
        match &self.input_embedding {
            InputEmbedding::Identity => self.dim,
            InputEmbedding::Extend(_) => 5,
            InputEmbedding::Host(g) => g.arity_in(),
        }
    }

    /// The same layer stack applied to already-embedded vectors. This is the
    /// function a compiled circuit computes.
    pub fn with_identity_embedding(&self) -> TransformerConfig {
        let mut cfg = self.clone();
        cfg.input_embedding = InputEmbedding::Identity;
        cfg
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TraceMode {
    Full,
    #[default]
    LastLayer,
}

#[derive(Clone, Debug, Default)]
pub struct LayerTrace {
    /// Per head: n x n scores, query index by row, key index by column.
    pub attention: Vec<Matrix>,
    /// Per head: pooled vector per position.
    pub pooled: Vec<Vec<Vec<Rational>>>,
    /// The layer's output sequence.
    pub outputs: Vec<Vec<Rational>>,
}

#[derive(Clone, Debug, Default)]
pub struct ExecutionTrace {
    /// 1-based layer index paired with that layer's trace.
    pub layers: Vec<(usize, LayerTrace)>,
}

impl ExecutionTrace {
    pub fn layer(&self, k: usize) -> Option<&LayerTrace> {
        self.layers.iter().find(|(i, _)| *i == k).map(|(_, t)| t)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EngineError {
    EmptySequence,
    LengthMismatch {
        vectors: usize,
        scores: usize,
    },
    DimMismatch {
        what: String,
        expected: usize,
        got: usize,
    },
    BuiltinDim {
        name: String,
        needs: usize,
        got: usize,
    },
    ActivationArity {
        name: String,
        needs: usize,
        got: usize,
    },
    UnknownBasisFunction {
        name: String,
    },
    Gadget(GadgetError),
    Embed(EmbedError),
}

impl fmt::Display for EngineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EngineError::EmptySequence => write!(f, "score transform on an empty sequence"),
            EngineError::LengthMismatch { vectors, scores } => {
                write!(f, "pooling {vectors} vectors against {scores} scores")
            }
            EngineError::DimMismatch {
                what,
                expected,
                got,
            } => {
                write!(f, "{what}: expected dimension {expected}, got {got}")
            }
            EngineError::BuiltinDim { name, needs, got } => {
                write!(f, "builtin `{name}` needs dimension >= {needs}, got {got}")
            }
            EngineError::ActivationArity { name, needs, got } => {
                write!(f, "activation `{name}` needs {needs} inputs, got {got}")
            }
            EngineError::UnknownBasisFunction { name } => {
                write!(f, "basis function `{name}` is not registered")
            }
            EngineError::Gadget(e) => write!(f, "{e}"),
            EngineError::Embed(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for EngineError {}

impl From<GadgetError> for EngineError {
    fn from(e: GadgetError) -> Self {
        EngineError::Gadget(e)
    }
}

impl From<EmbedError> for EngineError {
    fn from(e: EmbedError) -> Self {
        EngineError::Embed(e)
    }
}

/// The argmax set of a nonempty score vector, as 0-based indices.
pub fn argmax_set(scores: &[Rational]) -> Vec<usize> {
    let max = scores.iter().max().expect("nonempty scores");
    scores
        .iter()
        .enumerate()
        .filter(|(_, s)| *s == max)
        .map(|(i, _)| i)
        .collect()
}

/// Applies a score transform: `id` passes scores through, `avg` spreads
/// weight `1/|M|` over the argmax set `M`, `hardleft`/`hardright` put weight
/// one on the leftmost/rightmost maximal position.
pub fn score_transform(
    transform: ScoreTransform,
    scores: &[Rational],
) -> Result<Vec<Rational>, EngineError> {
    if scores.is_empty() {
        return Err(EngineError::EmptySequence);
    }
    Ok(match transform {
        ScoreTransform::Id => scores.to_vec(),
        ScoreTransform::Avg => {
            let m = argmax_set(scores);
            let w = Rational::from_int(m.len() as i64)
                .recip()
                .expect("argmax set nonempty");
            let mut out = vec![Rational::zero(); scores.len()];
            for i in m {
                out[i] = w.clone();
            }
            out
        }
        ScoreTransform::HardLeft | ScoreTransform::HardRight => {
            let m = argmax_set(scores);
            let pick = if transform == ScoreTransform::HardLeft {
                m[0]
            } else {
                *m.last().expect("argmax set nonempty")
            };
            let mut out = vec![Rational::zero(); scores.len()];
            out[pick] = Rational::one();
            out
        }
    })
}

/// Pools a sequence of vectors against attention scores. The weighted sum is
/// over all positions; the weighted product multiplies componentwise over
/// positions with nonzero transformed weight, and an empty product is the
/// all-ones vector.
pub fn pool(
    spec: PoolingSpec,
    vectors: &[Vec<Rational>],
    scores: &[Rational],
) -> Result<Vec<Rational>, EngineError> {
    if vectors.len() != scores.len() {
        return Err(EngineError::LengthMismatch {
            vectors: vectors.len(),
            scores: scores.len(),
        });
    }
    if vectors.is_empty() {
        return Err(EngineError::EmptySequence);
    }
    let dim = vectors[0].len();
    let weights = score_transform(spec.transform, scores)?;
    match spec.family {
        PoolFamily::WeightedSum => {
            let mut acc = vec![Rational::zero(); dim];
            for (w, x) in weights.iter().zip(vectors) {
                if w.is_zero() {
                    continue;
                }
                for (a, c) in acc.iter_mut().zip(x) {
                    *a = &*a + w * c;
                }
            }
            Ok(acc)
        }
        PoolFamily::WeightedProduct => {
            let mut acc = vec![Rational::one(); dim];
            for (w, x) in weights.iter().zip(vectors) {
                if w.is_zero() {
                    continue;
                }
                for (a, c) in acc.iter_mut().zip(x) {
                    *a = &*a * (w * c);
                }
            }
            Ok(acc)
        }
    }
}

/// Characteristic-function context: evaluates the indicator of a registered
/// type constant in the chosen realization.
pub struct ChiCtx {
    mode: CharfinMode,
    support: Vec<Rational>,
    tables: Vec<LagrangeTable>,
}

impl ChiCtx {
    pub fn new(types: &TypeConstants, mode: CharfinMode) -> Self {
        let support = types.all();
        let tables = match mode {
            CharfinMode::ZeroBased => Vec::new(),
            CharfinMode::Lagrange => support
                .iter()
                .map(|t| {
                    LagrangeTable::new(support.clone(), t).expect("type constants are distinct")
                })
                .collect(),
        };
        ChiCtx {
            mode,
            support,
            tables,
        }
    }

    pub fn chi(&self, t: &Rational, x: &Rational) -> Rational {
        match self.mode {
            CharfinMode::ZeroBased => crate::numerics::charfin(t, x),
            CharfinMode::Lagrange => {
                let i = self
                    .support
                    .iter()
                    .position(|s| s == t)
                    .expect("chi target is a registered type constant");
                self.tables[i].eval(x)
            }
        }
    }

    pub fn chi_sum(&self, ts: &[Rational], x: &Rational) -> Rational {
        ts.iter().map(|t| self.chi(t, x)).sum()
    }
}

fn embed_input(cfg: &TransformerConfig, x: &[Rational]) -> Result<Vec<Rational>, EngineError> {
    let embedded = match &cfg.input_embedding {
        InputEmbedding::Identity => {
            if x.len() != cfg.dim {
                return Err(EngineError::DimMismatch {
                    what: "identity embedding input".into(),
                    expected: cfg.dim,
                    got: x.len(),
                });
            }
            x.to_vec()
        }
        InputEmbedding::Extend(d) => {
            if *d != cfg.dim {
                return Err(EngineError::DimMismatch {
                    what: "embedding target".into(),
                    expected: cfg.dim,
                    got: *d,
                });
            }
            embed_vector(x, *d)?
        }
        InputEmbedding::Host(g) => g.eval(x)?,
    };
    if embedded.len() != cfg.dim {
        return Err(EngineError::DimMismatch {
            what: "embedded vector".into(),
            expected: cfg.dim,
            got: embedded.len(),
        });
    }
    Ok(embedded)
}

/// Runs the transformer on a raw vector sequence and returns the final
/// sequence together with an execution trace.
pub fn run(
    cfg: &TransformerConfig,
    input: &[Vec<Rational>],
    trace_mode: TraceMode,
) -> Result<(Vec<Vec<Rational>>, ExecutionTrace), EngineError> {
    let n = input.len();
    let chi = ChiCtx::new(&cfg.types, cfg.charfin);

    let mut current: Vec<Vec<Rational>> = Vec::with_capacity(n);
    for (pos, x) in input.iter().enumerate() {
        let mut y = embed_input(cfg, x)?;
        if let PositionalEmbedding::Table(table) = &cfg.positional_embedding {
            if let Some(p) = table.get(&(pos + 1, n)) {
                if p.len() != cfg.dim {
                    return Err(EngineError::DimMismatch {
                        what: format!("positional embedding at ({}, {n})", pos + 1),
                        expected: cfg.dim,
                        got: p.len(),
                    });
                }
                for (a, b) in y.iter_mut().zip(p) {
                    *a = &*a + b;
                }
            }
        }
        current.push(y);
    }

    let mut trace = ExecutionTrace::default();
    for (k, layer) in cfg.layers.iter().enumerate() {
        let mut pooled_per_head: Vec<Vec<Vec<Rational>>> = Vec::with_capacity(layer.heads.len());
        let mut score_matrices: Vec<Matrix> = Vec::with_capacity(layer.heads.len());
        for head in &layer.heads {
            let mut scores = Matrix::zeros(n);
            for i in 0..n {
                for j in 0..n {
                    scores.set(
                        i,
                        j,
                        attention_value(&head.attention, &current[i], &current[j])?,
                    );
                }
            }
            let pooled = (0..n)
                .map(|i| pool(head.pooling, &current, scores.row(i)))
                .collect::<Result<Vec<_>, _>>()?;
            score_matrices.push(scores);
            pooled_per_head.push(pooled);
        }

        let mut next = Vec::with_capacity(n);
        for i in 0..n {
            let mut act_inputs: Vec<Vec<Rational>> = Vec::with_capacity(layer.heads.len() + 1);
            act_inputs.push(current[i].clone());
            for pooled in &pooled_per_head {
                act_inputs.push(pooled[i].clone());
            }
            next.push(activation_value(&layer.activation, &act_inputs, cfg, &chi)?);
        }
        current = next;

        let keep = trace_mode == TraceMode::Full || k + 1 == cfg.layers.len();
        if keep {
            if trace_mode == TraceMode::LastLayer {
                trace.layers.clear();
            }
            trace.layers.push((
                k + 1,
                LayerTrace {
                    attention: score_matrices,
                    pooled: pooled_per_head,
                    outputs: current.clone(),
                },
            ));
        }
    }
    Ok((current, trace))
}

pub(crate) fn activation_value(
    spec: &ActivationSpec,
    inputs: &[Vec<Rational>],
    cfg: &TransformerConfig,
    chi: &ChiCtx,
) -> Result<Vec<Rational>, EngineError> {
    match spec {
        ActivationSpec::Builtin(b) => {
            builtin_activation_value(b, inputs, &cfg.types, chi, &cfg.extensions)
        }
        ActivationSpec::Host(g) => {
            let flat: Vec<Rational> = inputs.iter().flatten().cloned().collect();
            if flat.len() != g.arity_in() {
                return Err(EngineError::ActivationArity {
                    name: g.name().to_string(),
                    needs: g.arity_in(),
                    got: flat.len(),
                });
            }
            Ok(g.eval(&flat)?)
        }
    }
}
