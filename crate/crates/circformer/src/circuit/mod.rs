//! The arithmetic-circuit data model: a DAG of gates with α-numbered edges,
//! validated against a fan-in discipline and evaluated exactly over the
//! rationals.
//!
//! Gate indices are `1..=size` with no gaps. Output gates appear in ascending
//! index order of their output label, which is what lets the sequence
//! encoding recover output order without storing labels.

mod random;
mod text;

pub use random::{random_circuit, RandomCircuitError, RandomCircuitSpec};
pub use text::{parse_circuit, render_circuit, render_circuit_with_comments, CircuitTextError};

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use crate::gadget::GadgetCircuit;
use crate::numerics::{self, Rational};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GateLabel {
    Constant(Rational),
    /// `in_k`, 1-based.
    Input(usize),
    /// `out_k`, 1-based.
    Output(usize),
    Plus,
    Times,
    Sign,
    Extension {
        name: String,
        arity: usize,
    },
}

impl GateLabel {
    pub fn is_source(&self) -> bool {
        matches!(self, GateLabel::Constant(_) | GateLabel::Input(_))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CircuitClass {
    /// Binary `+` and `×`.
    Bounded,
    /// Unbounded `+`, binary `×`.
    SemiUnbounded,
    /// Unbounded `+` and `×`.
    Unbounded,
}

impl fmt::Display for CircuitClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CircuitClass::Bounded => "bounded",
            CircuitClass::SemiUnbounded => "semi",
            CircuitClass::Unbounded => "unbounded",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    /// Predecessor gate index.
    pub from: usize,
    /// Successor gate index.
    pub to: usize,
    /// Position among the successor's incoming edges, `1..=fan_in`.
    pub alpha: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Circuit {
    class: CircuitClass,
    gates: Vec<GateLabel>,
    edges: Vec<Edge>,
}

impl Circuit {
    pub fn new(class: CircuitClass, gates: Vec<GateLabel>, edges: Vec<Edge>) -> Self {
        Circuit {
            class,
            gates,
            edges,
        }
    }

    pub fn class(&self) -> CircuitClass {
        self.class
    }

    pub fn set_class(&mut self, class: CircuitClass) {
        self.class = class;
    }

    pub fn size(&self) -> usize {
        self.gates.len()
    }

    /// Label of gate `idx` (1-based).
    pub fn gate(&self, idx: usize) -> &GateLabel {
        &self.gates[idx - 1]
    }

    pub fn gates(&self) -> impl Iterator<Item = (usize, &GateLabel)> {
        self.gates.iter().enumerate().map(|(i, g)| (i + 1, g))
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn input_count(&self) -> usize {
        self.gates
            .iter()
            .filter(|g| matches!(g, GateLabel::Input(_)))
            .count()
    }

    pub fn output_count(&self) -> usize {
        self.gates
            .iter()
            .filter(|g| matches!(g, GateLabel::Output(_)))
            .count()
    }

    /// Incoming edges of each gate, sorted by alpha. Index 0 is unused.
    pub fn incoming(&self) -> Vec<Vec<Edge>> {
        let mut inc = vec![Vec::new(); self.size() + 1];
        for e in &self.edges {
            if e.to >= 1 && e.to <= self.size() {
                inc[e.to].push(*e);
            }
        }
        for v in &mut inc {
            v.sort_by_key(|e| e.alpha);
        }
        inc
    }

    fn out_degree(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.size() + 1];
        for e in &self.edges {
            if e.from >= 1 && e.from <= self.size() {
                deg[e.from] += 1;
            }
        }
        deg
    }

    /// Topological order of gate indices, or `None` if the edge relation has
    /// a cycle.
    fn topo_order(&self) -> Option<Vec<usize>> {
        let n = self.size();
        let mut indeg = vec![0usize; n + 1];
        let mut succs = vec![Vec::new(); n + 1];
        for e in &self.edges {
            if e.from < 1 || e.from > n || e.to < 1 || e.to > n {
                return None;
            }
            indeg[e.to] += 1;
            succs[e.from].push(e.to);
        }
        let mut queue: Vec<usize> = (1..=n).filter(|&v| indeg[v] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(v) = queue.pop() {
            order.push(v);
            for &w in &succs[v] {
                indeg[w] -= 1;
                if indeg[w] == 0 {
                    queue.push(w);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    /// Checks every structural invariant; violations are data, not failures.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        let n = self.size();

        for (i, e) in self.edges.iter().enumerate() {
            if e.from < 1 || e.from > n || e.to < 1 || e.to > n {
                violations.push(Violation::EdgeOutOfRange {
                    edge: i,
                    from: e.from,
                    to: e.to,
                });
            }
        }
        if !violations.is_empty() {
            return ValidationReport { violations };
        }

        if self.topo_order().is_none() {
            violations.push(Violation::Cycle);
        }

        let inc = self.incoming();
        let outdeg = self.out_degree();

        // in_k / out_k each assigned exactly once, k = 1..m and 1..n
        let mut input_ks = HashMap::new();
        let mut output_gates = Vec::new();
        for (idx, g) in self.gates() {
            match g {
                GateLabel::Input(k) => {
                    if let Some(prev) = input_ks.insert(*k, idx) {
                        violations.push(Violation::DuplicateInputLabel {
                            k: *k,
                            gates: (prev, idx),
                        });
                    }
                }
                GateLabel::Output(k) => output_gates.push((idx, *k)),
                _ => {}
            }
        }
        let m = input_ks.len();
        for k in 1..=m {
            if !input_ks.contains_key(&k) {
                violations.push(Violation::MissingInputLabel { k });
            }
        }
        let mut output_ks = HashMap::new();
        for &(idx, k) in &output_gates {
            if let Some(prev) = output_ks.insert(k, idx) {
                violations.push(Violation::DuplicateOutputLabel {
                    k,
                    gates: (prev, idx),
                });
            }
        }
        for k in 1..=output_gates.len() {
            if !output_ks.contains_key(&k) {
                violations.push(Violation::MissingOutputLabel { k });
            }
        }
        // output gate indices ascending in k
        let mut by_k = output_gates.clone();
        by_k.sort_by_key(|&(_, k)| k);
        if by_k.windows(2).any(|w| w[0].0 >= w[1].0) {
            violations.push(Violation::OutputOrder);
        }

        for (idx, g) in self.gates() {
            let fan_in = inc[idx].len();
            let alphas: Vec<usize> = inc[idx].iter().map(|e| e.alpha).collect();
            if alphas.iter().enumerate().any(|(i, &a)| a != i + 1) {
                violations.push(Violation::AlphaGap {
                    gate: idx,
                    alphas: alphas.clone(),
                });
            }
            match g {
                GateLabel::Constant(_) | GateLabel::Input(_) => {
                    if fan_in != 0 {
                        violations.push(Violation::SourceFanIn { gate: idx, fan_in });
                    }
                }
                GateLabel::Output(_) => {
                    if fan_in != 1 {
                        violations.push(Violation::OutputFanIn { gate: idx, fan_in });
                    }
                    if outdeg[idx] != 0 {
                        violations.push(Violation::OutputFanOut {
                            gate: idx,
                            fan_out: outdeg[idx],
                        });
                    }
                }
                GateLabel::Plus => {
                    let max = match self.class {
                        CircuitClass::Bounded => Some(2),
                        _ => None,
                    };
                    if let Some(max) = max {
                        if fan_in > max {
                            violations.push(Violation::FanInDiscipline {
                                gate: idx,
                                label: "plus".into(),
                                fan_in,
                                class: self.class,
                            });
                        }
                    }
                }
                GateLabel::Times => {
                    let bad = match self.class {
                        CircuitClass::Bounded => fan_in > 2,
                        CircuitClass::SemiUnbounded => fan_in != 2,
                        CircuitClass::Unbounded => false,
                    };
                    if bad {
                        violations.push(Violation::FanInDiscipline {
                            gate: idx,
                            label: "times".into(),
                            fan_in,
                            class: self.class,
                        });
                    }
                }
                GateLabel::Sign => {
                    if fan_in != 1 {
                        violations.push(Violation::SignFanIn { gate: idx, fan_in });
                    }
                }
                GateLabel::Extension { name, arity } => {
                    if fan_in != *arity {
                        violations.push(Violation::ExtensionArity {
                            gate: idx,
                            name: name.clone(),
                            arity: *arity,
                            fan_in,
                        });
                    }
                }
            }
        }

        ValidationReport { violations }
    }

    /// Evaluates output gates in label order on `inputs`, per the inductive
    /// gate semantics. Plus and Times fold their predecessors in alpha order.
    pub fn evaluate(
        &self,
        inputs: &[Rational],
        registry: &ExtensionRegistry,
    ) -> Result<Vec<Rational>, EvalError> {
        let m = self.input_count();
        if inputs.len() != m {
            return Err(EvalError::ArityMismatch {
                expected: m,
                got: inputs.len(),
            });
        }
        let order = self.topo_order().ok_or(EvalError::Cyclic)?;
        let inc = self.incoming();
        let mut values: Vec<Option<Rational>> = vec![None; self.size() + 1];
        for idx in order {
            let args = |values: &Vec<Option<Rational>>| -> Vec<Rational> {
                inc[idx]
                    .iter()
                    .map(|e| values[e.from].clone().expect("predecessor evaluated"))
                    .collect()
            };
            let v = match self.gate(idx) {
                GateLabel::Constant(c) => c.clone(),
                GateLabel::Input(k) => inputs[*k - 1].clone(),
                GateLabel::Output(_) => args(&values).pop().ok_or(EvalError::Malformed {
                    gate: idx,
                    reason: "output gate without incoming edge".into(),
                })?,
                GateLabel::Plus => args(&values).iter().sum(),
                GateLabel::Times => args(&values).iter().fold(Rational::one(), |acc, x| acc * x),
                GateLabel::Sign => {
                    let a = args(&values);
                    if a.len() != 1 {
                        return Err(EvalError::Malformed {
                            gate: idx,
                            reason: format!("sign gate with fan-in {}", a.len()),
                        });
                    }
                    numerics::sign(&a[0])
                }
                GateLabel::Extension { name, arity } => {
                    let f = registry
                        .get(name)
                        .ok_or_else(|| EvalError::UnregisteredExtension { name: name.clone() })?;
                    let a = args(&values);
                    if a.len() != *arity || f.arity != *arity {
                        return Err(EvalError::Malformed {
                            gate: idx,
                            reason: format!(
                                "extension `{name}` arity {} applied to {} arguments",
                                f.arity,
                                a.len()
                            ),
                        });
                    }
                    f.apply(&a)
                }
            };
            values[idx] = Some(v);
        }
        let mut outs: Vec<(usize, Rational)> = self
            .gates()
            .filter_map(|(idx, g)| match g {
                GateLabel::Output(k) => Some((*k, values[idx].clone().expect("evaluated"))),
                _ => None,
            })
            .collect();
        outs.sort_by_key(|&(k, _)| k);
        Ok(outs.into_iter().map(|(_, v)| v).collect())
    }

    /// Size, depth and maximum fan-ins. Depth counts edges on the longest
    /// path from an input or constant gate to an output gate.
    pub fn metrics(&self) -> CircuitMetrics {
        let order = self.topo_order().unwrap_or_default();
        let inc = self.incoming();
        let mut dist: Vec<Option<usize>> = vec![None; self.size() + 1];
        for idx in order {
            dist[idx] = if self.gate(idx).is_source() {
                Some(0)
            } else {
                inc[idx]
                    .iter()
                    .filter_map(|e| dist[e.from])
                    .max()
                    .map(|d| d + 1)
            };
        }
        let depth = self
            .gates()
            .filter(|(_, g)| matches!(g, GateLabel::Output(_)))
            .filter_map(|(idx, _)| dist[idx])
            .max()
            .unwrap_or(0);
        let mut fan_in_max_plus = 0;
        let mut fan_in_max_times = 0;
        for (idx, g) in self.gates() {
            match g {
                GateLabel::Plus => fan_in_max_plus = fan_in_max_plus.max(inc[idx].len()),
                GateLabel::Times => fan_in_max_times = fan_in_max_times.max(inc[idx].len()),
                _ => {}
            }
        }
        CircuitMetrics {
            size: self.size(),
            depth,
            fan_in_max_plus,
            fan_in_max_times,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CircuitMetrics {
    pub size: usize,
    pub depth: usize,
    pub fan_in_max_plus: usize,
    pub fan_in_max_times: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    Cycle,
    EdgeOutOfRange {
        edge: usize,
        from: usize,
        to: usize,
    },
    AlphaGap {
        gate: usize,
        alphas: Vec<usize>,
    },
    SourceFanIn {
        gate: usize,
        fan_in: usize,
    },
    OutputFanIn {
        gate: usize,
        fan_in: usize,
    },
    OutputFanOut {
        gate: usize,
        fan_out: usize,
    },
    DuplicateInputLabel {
        k: usize,
        gates: (usize, usize),
    },
    MissingInputLabel {
        k: usize,
    },
    DuplicateOutputLabel {
        k: usize,
        gates: (usize, usize),
    },
    MissingOutputLabel {
        k: usize,
    },
    OutputOrder,
    FanInDiscipline {
        gate: usize,
        label: String,
        fan_in: usize,
        class: CircuitClass,
    },
    SignFanIn {
        gate: usize,
        fan_in: usize,
    },
    ExtensionArity {
        gate: usize,
        name: String,
        arity: usize,
        fan_in: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Cycle => write!(f, "acyclic: edge relation has a cycle"),
            Violation::EdgeOutOfRange { edge, from, to } => {
                write!(
                    f,
                    "edge #{edge} references gates out of range ({from} -> {to})"
                )
            }
            Violation::AlphaGap { gate, alphas } => {
                write!(f, "alpha contiguity: gate {gate} has alphas {alphas:?}")
            }
            Violation::SourceFanIn { gate, fan_in } => {
                write!(f, "gate {gate} is a source but has fan-in {fan_in}")
            }
            Violation::OutputFanIn { gate, fan_in } => {
                write!(f, "output gate {gate} has fan-in {fan_in}, expected 1")
            }
            Violation::OutputFanOut { gate, fan_out } => {
                write!(f, "output gate {gate} has fan-out {fan_out}, expected 0")
            }
            Violation::DuplicateInputLabel { k, gates } => {
                write!(
                    f,
                    "input label in_{k} used by gates {} and {}",
                    gates.0, gates.1
                )
            }
            Violation::MissingInputLabel { k } => write!(f, "input label in_{k} missing"),
            Violation::DuplicateOutputLabel { k, gates } => {
                write!(
                    f,
                    "output label out_{k} used by gates {} and {}",
                    gates.0, gates.1
                )
            }
            Violation::MissingOutputLabel { k } => write!(f, "output label out_{k} missing"),
            Violation::OutputOrder => {
                write!(f, "output gate indices not ascending in their labels")
            }
            Violation::FanInDiscipline {
                gate,
                label,
                fan_in,
                class,
            } => {
                write!(
                    f,
                    "{label} gate {gate} has fan-in {fan_in}, not allowed in class {class}"
                )
            }
            Violation::SignFanIn { gate, fan_in } => {
                write!(f, "sign gate {gate} has fan-in {fan_in}, expected 1")
            }
            Violation::ExtensionArity {
                gate,
                name,
                arity,
                fan_in,
            } => {
                write!(
                    f,
                    "extension gate {gate} (`{name}`, arity {arity}) has fan-in {fan_in}"
                )
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_valid() {
            writeln!(f, "valid")
        } else {
            for v in &self.violations {
                writeln!(f, "violation: {v}")?;
            }
            Ok(())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvalError {
    ArityMismatch { expected: usize, got: usize },
    Cyclic,
    UnregisteredExtension { name: String },
    Malformed { gate: usize, reason: String },
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::ArityMismatch { expected, got } => {
                write!(f, "circuit takes {expected} inputs, got {got}")
            }
            EvalError::Cyclic => write!(f, "circuit is cyclic"),
            EvalError::UnregisteredExtension { name } => {
                write!(f, "extension function `{name}` is not registered")
            }
            EvalError::Malformed { gate, reason } => write!(f, "gate {gate}: {reason}"),
        }
    }
}

impl std::error::Error for EvalError {}

pub type HostFn = Arc<dyn Fn(&[Rational]) -> Rational + Send + Sync>;

/// A registered host function usable as an extension gate. Must be pure.
#[derive(Clone)]
pub struct ExtensionFn {
    pub name: String,
    pub arity: usize,
    func: HostFn,
    /// Circuit realization over `{+, ×, sign}`, when one exists. Required by
    /// the circuitizer, not by evaluation.
    pub gadget: Option<GadgetCircuit>,
}

impl ExtensionFn {
    pub fn new(
        name: impl Into<String>,
        arity: usize,
        func: impl Fn(&[Rational]) -> Rational + Send + Sync + 'static,
        gadget: Option<GadgetCircuit>,
    ) -> Self {
        ExtensionFn {
            name: name.into(),
            arity,
            func: Arc::new(func),
            gadget,
        }
    }

    pub fn apply(&self, args: &[Rational]) -> Rational {
        (self.func)(args)
    }
}

impl fmt::Debug for ExtensionFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExtensionFn")
            .field("name", &self.name)
            .field("arity", &self.arity)
            .finish()
    }
}

/// Reinterprets a whole circuit as a gadget fragment: input gates become
/// input ports in label order, output gates become output ports. Extension
/// gates are not allowed in gadget bodies.
pub fn to_gadget(c: &Circuit, name: &str) -> Result<GadgetCircuit, String> {
    use crate::gadget::GadgetBuilder;
    let report = c.validate();
    if !report.is_valid() {
        return Err(format!("invalid circuit: {report}"));
    }
    let mut b = GadgetBuilder::new(name);
    // ports in label order, so port j carries in_{j+1}
    let mut port_nodes = vec![0usize; c.input_count()];
    for k in 1..=c.input_count() {
        port_nodes[k - 1] = b.port(format!("in{k}"));
    }
    let order = c.topo_order().ok_or("cyclic circuit")?;
    let inc = c.incoming();
    let mut map = vec![usize::MAX; c.size() + 1];
    let mut outputs: Vec<(usize, usize)> = Vec::new();
    for idx in order {
        let preds: Vec<usize> = inc[idx].iter().map(|e| map[e.from]).collect();
        let node = match c.gate(idx) {
            GateLabel::Input(k) => port_nodes[*k - 1],
            GateLabel::Constant(v) => b.constant(v.clone()),
            GateLabel::Plus => b.plus(preds),
            GateLabel::Times => b.mul_chain(&preds),
            GateLabel::Sign => b.sign(preds[0]),
            GateLabel::Output(k) => {
                outputs.push((*k, preds[0]));
                preds[0]
            }
            GateLabel::Extension { name, .. } => {
                return Err(format!(
                    "extension gate `{name}` not allowed in a gadget body"
                ))
            }
        };
        map[idx] = node;
    }
    outputs.sort_by_key(|&(k, _)| k);
    Ok(b.finish(
        outputs
            .into_iter()
            .map(|(k, n)| (format!("out{k}"), n))
            .collect(),
    ))
}

/// Host functions available to extension gates, in registration order. The
/// order matters: the sequence encoding assigns type constants by it.
#[derive(Clone, Debug, Default)]
pub struct ExtensionRegistry {
    fns: Vec<ExtensionFn>,
}

impl ExtensionRegistry {
    pub fn empty() -> Self {
        ExtensionRegistry::default()
    }

    /// The registry used by the command-line tools: `relu` only. `sign` is a
    /// first-class gate label, not an extension.
    pub fn standard() -> Self {
        let mut b = crate::gadget::GadgetBuilder::new("relu");
        let x = b.port("x");
        let s = b.sign(x);
        let sq = b.mul2(s, s);
        let sum = b.plus(vec![sq, s]);
        let half = b.scale(Rational::ratio(1, 2), sum);
        let y = b.mul2(x, half);
        let relu_gadget = b.finish(vec![("out".into(), y)]);
        let mut reg = ExtensionRegistry::empty();
        reg.register(ExtensionFn::new(
            "relu",
            1,
            |a| numerics::relu(&a[0]),
            Some(relu_gadget),
        ));
        reg
    }

    pub fn register(&mut self, f: ExtensionFn) {
        self.fns.push(f);
    }

    pub fn get(&self, name: &str) -> Option<&ExtensionFn> {
        self.fns.iter().find(|f| f.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.fns.iter().map(|f| f.name.as_str())
    }
}

#[cfg(test)]
mod tests;
