//! Compiles a transformer at a fixed sequence length into one arithmetic
//! circuit over `{+_*, x, sign}`, or `{+_*, x_*, sign}` when weighted-product
//! pooling is present.
//!
//! The compiled circuit takes the already-embedded input sequence, flattened
//! position-major (`n * dim` inputs), and produces the flattened output
//! sequence (`n * dim` outputs). Positional-embedding values are baked into
//! constant gates. Attention scores, score transforms, pooling and
//! activations are unrolled per layer; every stage has depth independent of
//! `n`, so the whole circuit's depth depends only on the config.

pub mod gadgets;

pub use gadgets::{gadget_eval_check, GadgetCheckError};

use std::collections::HashMap;
use std::fmt;
use std::ops::Range;

use crate::circuit::{Circuit, CircuitClass, Edge, GateLabel};
use crate::encoding::{TypeConstants, COMP_BIN, COMP_I, COMP_P, COMP_S, COMP_T, COMP_V};
use crate::engine::{
    ActivationSpec, AttentionSpec, BuiltinActivation, BuiltinAttention, CharfinMode, Matrix,
    PoolFamily, PositionalEmbedding, ScoreTransform, TransformerConfig,
};
use crate::gadget::{GadgetCircuit, GadgetNode};
use crate::numerics::{LagrangeTable, Rational};

/// A gate index in the circuit under construction.
pub type Wire = usize;

/// Append-only circuit builder. Emitted `times` gates are binary unless
/// [`CircuitBuilder::times_wide`] is used explicitly; constants are
/// deduplicated.
pub struct CircuitBuilder {
    class: CircuitClass,
    gates: Vec<GateLabel>,
    edges: Vec<Edge>,
    consts: HashMap<Rational, Wire>,
    next_input: usize,
    next_output: usize,
    sections: Vec<(Range<usize>, String)>,
    section_start: usize,
    section_label: Option<String>,
}

impl CircuitBuilder {
    pub fn new(class: CircuitClass) -> Self {
        CircuitBuilder {
            class,
            gates: Vec::new(),
            edges: Vec::new(),
            consts: HashMap::new(),
            next_input: 0,
            next_output: 0,
            sections: Vec::new(),
            section_start: 0,
            section_label: None,
        }
    }

    fn push(&mut self, label: GateLabel, preds: &[Wire]) -> Wire {
        self.gates.push(label);
        let idx = self.gates.len();
        for (i, &from) in preds.iter().enumerate() {
            self.edges.push(Edge {
                from,
                to: idx,
                alpha: i + 1,
            });
        }
        idx
    }

    pub fn input(&mut self) -> Wire {
        self.next_input += 1;
        self.push(GateLabel::Input(self.next_input), &[])
    }

    pub fn output(&mut self, from: Wire) -> Wire {
        self.next_output += 1;
        self.push(GateLabel::Output(self.next_output), &[from])
    }

    pub fn constant(&mut self, v: Rational) -> Wire {
        if let Some(&w) = self.consts.get(&v) {
            return w;
        }
        let w = self.push(GateLabel::Constant(v.clone()), &[]);
        self.consts.insert(v, w);
        w
    }

    pub fn int(&mut self, n: i64) -> Wire {
        self.constant(Rational::from_int(n))
    }

    /// n-ary sum; empty sums become the zero constant and single wires pass
    /// through without a gate.
    pub fn plus(&mut self, args: Vec<Wire>) -> Wire {
        match args.len() {
            0 => self.int(0),
            1 => args[0],
            _ => self.push(GateLabel::Plus, &args),
        }
    }

    /// Always emits a sum gate, even unary.
    pub fn plus_gate(&mut self, args: Vec<Wire>) -> Wire {
        assert!(!args.is_empty(), "plus_gate needs at least one summand");
        self.push(GateLabel::Plus, &args)
    }

    pub fn mul2(&mut self, a: Wire, b: Wire) -> Wire {
        self.push(GateLabel::Times, &[a, b])
    }

    /// Left fold of binary multiplications.
    pub fn mul_chain(&mut self, args: &[Wire]) -> Wire {
        match args {
            [] => self.int(1),
            [a] => *a,
            [first, rest @ ..] => {
                let mut acc = *first;
                for &a in rest {
                    acc = self.mul2(acc, a);
                }
                acc
            }
        }
    }

    /// One unbounded multiplication gate; requires the unbounded class.
    /// Unary products still emit a gate so pooling depth is independent of
    /// the sequence length.
    pub fn times_wide(&mut self, args: Vec<Wire>) -> Wire {
        match args.len() {
            0 => self.int(1),
            2 => self.mul2(args[0], args[1]),
            _ => {
                debug_assert_eq!(self.class, CircuitClass::Unbounded);
                self.push(GateLabel::Times, &args)
            }
        }
    }

    pub fn sign(&mut self, a: Wire) -> Wire {
        self.push(GateLabel::Sign, &[a])
    }

    pub fn neg(&mut self, a: Wire) -> Wire {
        self.scale(Rational::from_int(-1), a)
    }

    pub fn sub(&mut self, a: Wire, b: Wire) -> Wire {
        let nb = self.neg(b);
        self.plus(vec![a, nb])
    }

    pub fn scale(&mut self, c: Rational, a: Wire) -> Wire {
        if c.is_one() {
            return a;
        }
        let k = self.constant(c);
        self.mul2(k, a)
    }

    pub fn zero_fn(&mut self, a: Wire) -> Wire {
        let sq = self.mul2(a, a);
        let s = self.sign(sq);
        let one = self.int(1);
        self.sub(one, s)
    }

    /// Starts a provenance section; the previous one closes at the current
    /// gate count.
    pub fn section(&mut self, label: impl Into<String>) {
        self.close_section();
        self.section_start = self.gates.len();
        self.section_label = Some(label.into());
    }

    fn close_section(&mut self) {
        if let Some(label) = self.section_label.take() {
            let end = self.gates.len();
            if end > self.section_start {
                self.sections.push((self.section_start + 1..end + 1, label));
            }
        }
    }

    pub fn finish(mut self) -> CompiledCircuit {
        self.close_section();
        CompiledCircuit {
            circuit: Circuit::new(self.class, self.gates, self.edges),
            provenance: self.sections,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CompiledCircuit {
    pub circuit: Circuit,
    /// Gate-index ranges (1-based, half-open) tagged with the stage that
    /// produced them.
    pub provenance: Vec<(Range<usize>, String)>,
}

impl CompiledCircuit {
    pub fn provenance_comments(&self) -> Vec<String> {
        self.provenance
            .iter()
            .map(|(r, label)| format!("gates {}..{}: {label}", r.start, r.end - 1))
            .collect()
    }
}

/// Splices a gadget body into the builder, mapping its input ports onto
/// existing wires. Returns the output wires.
pub fn splice(b: &mut CircuitBuilder, gadget: &GadgetCircuit, inputs: &[Wire]) -> Vec<Wire> {
    assert_eq!(
        inputs.len(),
        gadget.arity_in(),
        "gadget `{}` splice arity",
        gadget.name()
    );
    let mut map = Vec::with_capacity(gadget.nodes().len());
    for node in gadget.nodes() {
        let wire = match node {
            GadgetNode::Port(k) => inputs[*k],
            GadgetNode::Const(c) => b.constant(c.clone()),
            GadgetNode::Plus(args) => {
                let ws: Vec<Wire> = args.iter().map(|&a| map[a]).collect();
                // keep the node even when unary so spliced depth matches the
                // gadget's declared depth
                b.plus_gate(ws)
            }
            GadgetNode::Times(args) => {
                let ws: Vec<Wire> = args.iter().map(|&a| map[a]).collect();
                b.mul_chain(&ws)
            }
            GadgetNode::Sign(a) => b.sign(map[*a]),
        };
        map.push(wire);
    }
    gadget.outputs().iter().map(|&o| map[o]).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CompileError {
    EmptyLength,
    MissingRealization { name: String },
    BadConfig { message: String },
}

impl fmt::Display for CompileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CompileError::EmptyLength => write!(f, "sequence length must be >= 1"),
            CompileError::MissingRealization { name } => {
                write!(f, "`{name}` has no circuit realization")
            }
            CompileError::BadConfig { message } => write!(f, "{message}"),
        }
    }
}

impl std::error::Error for CompileError {}

fn uses_weighted_product(cfg: &TransformerConfig) -> bool {
    cfg.layers
        .iter()
        .flat_map(|l| &l.heads)
        .any(|h| h.pooling.family == PoolFamily::WeightedProduct)
}

struct ChiEmitter {
    mode: CharfinMode,
    support: Vec<Rational>,
}

impl ChiEmitter {
    fn new(types: &TypeConstants, mode: CharfinMode) -> Self {
        ChiEmitter {
            mode,
            support: types.all(),
        }
    }

    fn chi(&self, b: &mut CircuitBuilder, t: &Rational, x: Wire) -> Wire {
        match self.mode {
            CharfinMode::ZeroBased => {
                let c = b.constant(t.clone());
                let d = b.sub(x, c);
                b.zero_fn(d)
            }
            CharfinMode::Lagrange => {
                let table = LagrangeTable::new(self.support.clone(), t)
                    .expect("type constants are distinct");
                let mut factors = Vec::new();
                for point in table.support() {
                    if point == t {
                        continue;
                    }
                    let c = b.constant(point.clone());
                    let diff = b.sub(x, c);
                    let inv = (t - point).recip().expect("distinct support");
                    factors.push(b.scale(inv, diff));
                }
                b.mul_chain(&factors)
            }
        }
    }

    fn chi_sum(&self, b: &mut CircuitBuilder, ts: &[Rational], x: Wire) -> Wire {
        let terms: Vec<Wire> = ts.iter().map(|t| self.chi(b, t, x)).collect();
        b.plus(terms)
    }
}

fn emit_dot_product(
    b: &mut CircuitBuilder,
    ma: &Matrix,
    mb: &Matrix,
    x: &[Wire],
    y: &[Wire],
) -> Wire {
    let side = |b: &mut CircuitBuilder, m: &Matrix, v: &[Wire]| -> Vec<Option<Wire>> {
        (0..m.size())
            .map(|r| {
                let terms: Vec<Wire> = (0..m.size())
                    .filter(|&c| !m.get(r, c).is_zero())
                    .map(|c| b.scale(m.get(r, c).clone(), v[c]))
                    .collect();
                if terms.is_empty() {
                    None
                } else {
                    Some(b.plus(terms))
                }
            })
            .collect()
    };
    let ax = side(b, ma, x);
    let by = side(b, mb, y);
    let products: Vec<Wire> = ax
        .iter()
        .zip(&by)
        .filter_map(|(l, r)| match (l, r) {
            (Some(l), Some(r)) => Some(b.mul2(*l, *r)),
            _ => None,
        })
        .collect();
    b.plus(products)
}

fn emit_attention(
    b: &mut CircuitBuilder,
    spec: &AttentionSpec,
    x: &[Wire],
    y: &[Wire],
) -> Result<Wire, CompileError> {
    match spec {
        AttentionSpec::DotProduct { a, b: mb } => Ok(emit_dot_product(b, a, mb, x, y)),
        AttentionSpec::Builtin(builtin) => match builtin {
            BuiltinAttention::EdgeEq | BuiltinAttention::VertexEq => {
                let key = if *builtin == BuiltinAttention::EdgeEq {
                    x[COMP_P]
                } else {
                    x[COMP_S]
                };
                let d = b.sub(key, y[COMP_S]);
                let hit = b.zero_fn(d);
                if *builtin == BuiltinAttention::EdgeEq {
                    let z0 = b.zero_fn(y[COMP_I]);
                    let one = b.int(1);
                    let d1 = b.sub(y[COMP_I], one);
                    let z1 = b.zero_fn(d1);
                    let carrier = b.plus(vec![z0, z1]);
                    Ok(b.mul2(hit, carrier))
                } else {
                    Ok(hit)
                }
            }
            _ => {
                let (ma, mb) =
                    builtin
                        .dot_product(x.len())
                        .ok_or_else(|| CompileError::BadConfig {
                            message: format!("`{builtin}` needs dimension > {}", x.len()),
                        })?;
                Ok(emit_dot_product(b, &ma, &mb, x, y))
            }
        },
        AttentionSpec::Host(g) => {
            if g.arity_in() != x.len() + y.len() || g.arity_out() != 1 {
                return Err(CompileError::BadConfig {
                    message: format!("host attention `{}` has wrong port counts", g.name()),
                });
            }
            let mut args = x.to_vec();
            args.extend_from_slice(y);
            Ok(splice(b, g, &args)[0])
        }
    }
}

fn emit_weights(b: &mut CircuitBuilder, transform: ScoreTransform, scores: &[Wire]) -> Vec<Wire> {
    match transform {
        ScoreTransform::Id => scores.to_vec(),
        ScoreTransform::Avg => splice(b, &gadgets::avg_weights_gadget(scores.len()), scores),
        ScoreTransform::HardLeft => {
            splice(b, &gadgets::hard_weights_gadget(scores.len(), true), scores)
        }
        ScoreTransform::HardRight => splice(
            b,
            &gadgets::hard_weights_gadget(scores.len(), false),
            scores,
        ),
    }
}

fn emit_pool(
    b: &mut CircuitBuilder,
    family: PoolFamily,
    weights: &[Wire],
    columns: &[Vec<Wire>],
    dim: usize,
) -> Vec<Wire> {
    (0..dim)
        .map(|c| match family {
            PoolFamily::WeightedSum => {
                let terms: Vec<Wire> = weights
                    .iter()
                    .zip(columns)
                    .map(|(&w, x)| b.mul2(w, x[c]))
                    .collect();
                b.plus_gate(terms)
            }
            PoolFamily::WeightedProduct => {
                // w*x + (1 - sign(w^2)): the factor for zero weight is 1, so
                // multiplying over all positions skips exactly those
                let terms: Vec<Wire> = weights
                    .iter()
                    .zip(columns)
                    .map(|(&w, x)| {
                        let wx = b.mul2(w, x[c]);
                        let nz = {
                            let sq = b.mul2(w, w);
                            b.sign(sq)
                        };
                        let one = b.int(1);
                        let skip = b.sub(one, nz);
                        b.plus(vec![wx, skip])
                    })
                    .collect();
                b.times_wide(terms)
            }
        })
        .collect()
}

fn emit_activation(
    b: &mut CircuitBuilder,
    spec: &ActivationSpec,
    inputs: &[Vec<Wire>],
    cfg: &TransformerConfig,
    chi: &ChiEmitter,
) -> Result<Vec<Wire>, CompileError> {
    let dim = cfg.dim;
    match spec {
        ActivationSpec::Host(g) => {
            if g.arity_in() != inputs.len() * dim || g.arity_out() != dim {
                return Err(CompileError::BadConfig {
                    message: format!("host activation `{}` has wrong port counts", g.name()),
                });
            }
            let flat: Vec<Wire> = inputs.iter().flatten().copied().collect();
            Ok(splice(b, g, &flat))
        }
        ActivationSpec::Builtin(act) => {
            if inputs.len() < act.min_heads() + 1 {
                return Err(CompileError::BadConfig {
                    message: format!("activation `{act}` needs {} head results", act.min_heads()),
                });
            }
            let x = &inputs[0];
            let t = x[COMP_T];
            let vx = x[COMP_V];
            let source = chi.chi_sum(b, &[TypeConstants::t_input(), TypeConstants::t_const()], t);
            let out_plus = chi.chi_sum(b, &[TypeConstants::t_output(), TypeConstants::t_plus()], t);
            let fetch_all = |b: &mut CircuitBuilder, chi: &ChiEmitter| {
                chi.chi_sum(
                    b,
                    &[
                        TypeConstants::t_output(),
                        TypeConstants::t_plus(),
                        TypeConstants::t_times(),
                    ],
                    t,
                )
            };
            let correction = |b: &mut CircuitBuilder, iz: Wire| {
                let two = b.int(2);
                let scaled = b.mul2(two, iz);
                let one = b.int(1);
                b.sub(scaled, one)
            };
            let v = match act {
                BuiltinActivation::EdgeGeneral | BuiltinActivation::EdgeFnc => {
                    let vy = inputs[1][COMP_V];
                    let fetch = fetch_all(b, chi);
                    let t1 = b.mul2(source, vx);
                    let t2 = b.mul2(fetch, vy);
                    b.plus(vec![t1, t2])
                }
                BuiltinActivation::EdgeAvg => {
                    let vy = inputs[1][COMP_V];
                    let iz = inputs[2][COMP_I];
                    let fetch = fetch_all(b, chi);
                    let corr = correction(b, iz);
                    let t1 = b.mul2(source, vx);
                    let scaled = b.mul2(corr, vy);
                    let t2 = b.mul2(fetch, scaled);
                    b.plus(vec![t1, t2])
                }
                BuiltinActivation::EdgeSemi => {
                    let vy = inputs[1][COMP_V];
                    let iz = inputs[2][COMP_I];
                    let corr = correction(b, iz);
                    let one = b.int(1);
                    let known = b.plus(vec![source, out_plus]);
                    let rest = b.sub(one, known);
                    let t1 = b.mul2(source, vx);
                    let scaled = b.mul2(corr, vy);
                    let t2 = b.mul2(out_plus, scaled);
                    let t3 = b.mul2(rest, vy);
                    b.plus(vec![t1, t2, t3])
                }
                BuiltinActivation::VertexGeneral | BuiltinActivation::VertexAvg => {
                    let vplus = inputs[1][COMP_V];
                    let vtimes = inputs[2][COMP_V];
                    let times = chi.chi(b, &TypeConstants::t_times(), t);
                    let t1 = b.mul2(source, vx);
                    let t2 = b.mul2(out_plus, vplus);
                    let t3 = b.mul2(times, vtimes);
                    b.plus(vec![t1, t2, t3])
                }
                BuiltinActivation::VertexSemi => {
                    let vplus = inputs[1][COMP_V];
                    let v1 = inputs[2][COMP_V];
                    let v2 = inputs[3][COMP_V];
                    let times = chi.chi(b, &TypeConstants::t_times(), t);
                    let t1 = b.mul2(source, vx);
                    let t2 = b.mul2(out_plus, vplus);
                    let prod = b.mul2(v1, v2);
                    let t3 = b.mul2(times, prod);
                    b.plus(vec![t1, t2, t3])
                }
                BuiltinActivation::VertexFnc => {
                    let v1 = inputs[1][COMP_V];
                    let v2 = inputs[2][COMP_V];
                    let out = chi.chi(b, &TypeConstants::t_output(), t);
                    let plus = chi.chi(b, &TypeConstants::t_plus(), t);
                    let times = chi.chi(b, &TypeConstants::t_times(), t);
                    let t1 = b.mul2(source, vx);
                    let t2 = b.mul2(out, v1);
                    let sum = b.plus(vec![v1, v2]);
                    let t3 = b.mul2(plus, sum);
                    let prod = b.mul2(v1, v2);
                    let t4 = b.mul2(times, prod);
                    b.plus(vec![t1, t2, t3, t4])
                }
                BuiltinActivation::VertexExt(names) => {
                    let vplus = inputs[1][COMP_V];
                    let v1 = inputs[2][COMP_V];
                    let v2 = inputs[3][COMP_V];
                    let times = chi.chi(b, &TypeConstants::t_times(), t);
                    let t1 = b.mul2(source, vx);
                    let t2 = b.mul2(out_plus, vplus);
                    let prod = b.mul2(v1, v2);
                    let t3 = b.mul2(times, prod);
                    let mut terms = vec![t1, t2, t3];
                    for name in names {
                        let tb =
                            cfg.types
                                .extension(name)
                                .ok_or_else(|| CompileError::BadConfig {
                                    message: format!(
                                        "basis function `{name}` has no type constant"
                                    ),
                                })?;
                        let value = if name == "sign" {
                            b.sign(v1)
                        } else {
                            let f = cfg.extensions.get(name).ok_or_else(|| {
                                CompileError::MissingRealization { name: name.clone() }
                            })?;
                            let gadget = f.gadget.as_ref().ok_or_else(|| {
                                CompileError::MissingRealization { name: name.clone() }
                            })?;
                            let args: Vec<Wire> =
                                (0..f.arity).map(|j| inputs[2 + j][COMP_V]).collect();
                            splice(b, gadget, &args)[0]
                        };
                        let sel = chi.chi(b, &tb, t);
                        terms.push(b.mul2(sel, value));
                    }
                    b.plus(terms)
                }
                BuiltinActivation::VertexSign => {
                    let vplus = inputs[1][COMP_V];
                    let v1 = inputs[2][COMP_V];
                    let v2 = inputs[3][COMP_V];
                    let up_s = inputs[4][COMP_S];
                    let um_s = inputs[5][COMP_S];
                    let u_bin = inputs[6][COMP_BIN];
                    let times = chi.chi(b, &TypeConstants::t_times(), t);
                    let sign_t = chi.chi(b, &TypeConstants::t_sign(), t);
                    let one = b.int(1);
                    let a = b.sub(up_s, one);
                    let c = b.sub(um_s, one);
                    let four = b.int(4);
                    let prod_ac = b.mul2(a, c);
                    let zero_v = b.mul2(four, prod_ac);
                    let not_zero = b.sub(one, zero_v);
                    let two = b.int(2);
                    let scaled_bin = b.mul2(two, u_bin);
                    let swing = b.sub(scaled_bin, one);
                    let sign_v = b.mul2(not_zero, swing);
                    let t1 = b.mul2(source, vx);
                    let t2 = b.mul2(out_plus, vplus);
                    let prod = b.mul2(v1, v2);
                    let t3 = b.mul2(times, prod);
                    let t4 = b.mul2(sign_t, sign_v);
                    b.plus(vec![t1, t2, t3, t4])
                }
            };
            let mut out = x.clone();
            out[COMP_V] = v;
            Ok(out)
        }
    }
}

/// Compiles the layer stack of a config at sequence length `n`. The input
/// embedding is taken as already applied: the circuit reads `n * dim`
/// rationals and writes `n * dim`.
pub fn compile(cfg: &TransformerConfig, n: usize) -> Result<CompiledCircuit, CompileError> {
    if n == 0 {
        return Err(CompileError::EmptyLength);
    }
    let class = if uses_weighted_product(cfg) {
        CircuitClass::Unbounded
    } else {
        CircuitClass::SemiUnbounded
    };
    let dim = cfg.dim;
    let chi = ChiEmitter::new(&cfg.types, cfg.charfin);
    let mut b = CircuitBuilder::new(class);

    b.section("inputs");
    let mut wires: Vec<Vec<Wire>> = (0..n)
        .map(|_| (0..dim).map(|_| b.input()).collect())
        .collect();

    if let PositionalEmbedding::Table(table) = &cfg.positional_embedding {
        b.section("positional embedding");
        for (pos, row) in wires.iter_mut().enumerate() {
            if let Some(p) = table.get(&(pos + 1, n)) {
                if p.len() != dim {
                    return Err(CompileError::BadConfig {
                        message: format!(
                            "positional vector at ({}, {n}) has wrong length",
                            pos + 1
                        ),
                    });
                }
                for (w, c) in row.iter_mut().zip(p) {
                    if !c.is_zero() {
                        let k = b.constant(c.clone());
                        *w = b.plus(vec![*w, k]);
                    }
                }
            }
        }
    }

    for (k, layer) in cfg.layers.iter().enumerate() {
        let mut pooled: Vec<Vec<Vec<Wire>>> = Vec::with_capacity(layer.heads.len());
        for (h, headspec) in layer.heads.iter().enumerate() {
            b.section(format!("layer {} head {} scores", k + 1, h + 1));
            let mut score_rows: Vec<Vec<Wire>> = Vec::with_capacity(n);
            for i in 0..n {
                let row = (0..n)
                    .map(|j| emit_attention(&mut b, &headspec.attention, &wires[i], &wires[j]))
                    .collect::<Result<Vec<_>, _>>()?;
                score_rows.push(row);
            }
            b.section(format!("layer {} head {} pooling", k + 1, h + 1));
            let mut head_pooled = Vec::with_capacity(n);
            for row in &score_rows {
                let weights = emit_weights(&mut b, headspec.pooling.transform, row);
                head_pooled.push(emit_pool(
                    &mut b,
                    headspec.pooling.family,
                    &weights,
                    &wires,
                    dim,
                ));
            }
            pooled.push(head_pooled);
        }

        b.section(format!("layer {} activation", k + 1));
        let mut next = Vec::with_capacity(n);
        for i in 0..n {
            let mut act_inputs = Vec::with_capacity(layer.heads.len() + 1);
            act_inputs.push(wires[i].clone());
            for head_pooled in &pooled {
                act_inputs.push(head_pooled[i].clone());
            }
            next.push(emit_activation(
                &mut b,
                &layer.activation,
                &act_inputs,
                cfg,
                &chi,
            )?);
        }
        wires = next;
    }

    b.section("outputs");
    for row in &wires {
        for &w in row {
            b.output(w);
        }
    }
    Ok(b.finish())
}
