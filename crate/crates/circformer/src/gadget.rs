//! Circuit fragments with named input/output ports.
//!
//! A [`GadgetCircuit`] is a small DAG over `{const, +, ×, sign}` whose ports
//! are splice points. Gadgets serve two roles: host-defined attention or
//! activation functions for the engine (evaluated directly), and the building
//! blocks the circuitizer splices into compiled circuits.

use std::fmt;

use crate::numerics::{self, Rational};

pub type NodeId = usize;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GadgetNode {
    /// k-th input port (0-based).
    Port(usize),
    Const(Rational),
    Plus(Vec<NodeId>),
    Times(Vec<NodeId>),
    Sign(NodeId),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GadgetCircuit {
    name: String,
    ports_in: Vec<String>,
    ports_out: Vec<String>,
    nodes: Vec<GadgetNode>,
    outputs: Vec<NodeId>,
}

impl GadgetCircuit {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn ports_in(&self) -> &[String] {
        &self.ports_in
    }

    pub fn ports_out(&self) -> &[String] {
        &self.ports_out
    }

    pub fn arity_in(&self) -> usize {
        self.ports_in.len()
    }

    pub fn arity_out(&self) -> usize {
        self.ports_out.len()
    }

    pub fn nodes(&self) -> &[GadgetNode] {
        &self.nodes
    }

    pub fn outputs(&self) -> &[NodeId] {
        &self.outputs
    }

    /// Gate count of the fragment (ports excluded).
    pub fn size(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| !matches!(n, GadgetNode::Port(_)))
            .count()
    }

    /// Longest port/const-to-output path length in edges.
    pub fn depth(&self) -> usize {
        let mut dist = vec![0usize; self.nodes.len()];
        for (id, node) in self.nodes.iter().enumerate() {
            dist[id] = match node {
                GadgetNode::Port(_) | GadgetNode::Const(_) => 0,
                GadgetNode::Plus(args) | GadgetNode::Times(args) => {
                    1 + args.iter().map(|&a| dist[a]).max().unwrap_or(0)
                }
                GadgetNode::Sign(a) => 1 + dist[*a],
            };
        }
        self.outputs.iter().map(|&o| dist[o]).max().unwrap_or(0)
    }

    /// Evaluates the fragment on concrete port values.
    pub fn eval(&self, args: &[Rational]) -> Result<Vec<Rational>, GadgetError> {
        if args.len() != self.ports_in.len() {
            return Err(GadgetError::ArityMismatch {
                gadget: self.name.clone(),
                expected: self.ports_in.len(),
                got: args.len(),
            });
        }
        let mut values: Vec<Rational> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let v = match node {
                GadgetNode::Port(k) => args[*k].clone(),
                GadgetNode::Const(c) => c.clone(),
                GadgetNode::Plus(a) => a.iter().map(|&i| &values[i]).sum(),
                GadgetNode::Times(a) => a.iter().fold(Rational::one(), |acc, &i| acc * &values[i]),
                GadgetNode::Sign(a) => numerics::sign(&values[*a]),
            };
            values.push(v);
        }
        Ok(self.outputs.iter().map(|&o| values[o].clone()).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GadgetError {
    ArityMismatch {
        gadget: String,
        expected: usize,
        got: usize,
    },
}

impl fmt::Display for GadgetError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GadgetError::ArityMismatch {
                gadget,
                expected,
                got,
            } => {
                write!(f, "gadget `{gadget}` takes {expected} inputs, got {got}")
            }
        }
    }
}

impl std::error::Error for GadgetError {}

/// Append-only builder for gadget bodies. Nodes are created in topological
/// order by construction, so evaluation is a single pass.
pub struct GadgetBuilder {
    name: String,
    ports_in: Vec<String>,
    nodes: Vec<GadgetNode>,
}

impl GadgetBuilder {
    pub fn new(name: impl Into<String>) -> Self {
        GadgetBuilder {
            name: name.into(),
            ports_in: Vec::new(),
            nodes: Vec::new(),
        }
    }

    pub fn port(&mut self, name: impl Into<String>) -> NodeId {
        let k = self.ports_in.len();
        self.ports_in.push(name.into());
        self.push(GadgetNode::Port(k))
    }

    pub fn ports(&mut self, prefix: &str, count: usize) -> Vec<NodeId> {
        (0..count)
            .map(|k| self.port(format!("{prefix}{k}")))
            .collect()
    }

    pub fn constant(&mut self, c: Rational) -> NodeId {
        self.push(GadgetNode::Const(c))
    }

    pub fn int(&mut self, n: i64) -> NodeId {
        self.constant(Rational::from_int(n))
    }

    pub fn plus(&mut self, args: Vec<NodeId>) -> NodeId {
        match args.len() {
            0 => self.int(0),
            1 => args[0],
            _ => self.push(GadgetNode::Plus(args)),
        }
    }

    /// Always emits a sum node, even for a single summand. The weight
    /// gadgets use this so their depth does not depend on `n`.
    pub fn plus_gate(&mut self, args: Vec<NodeId>) -> NodeId {
        assert!(!args.is_empty(), "plus_gate needs at least one summand");
        self.push(GadgetNode::Plus(args))
    }

    pub fn mul2(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(GadgetNode::Times(vec![a, b]))
    }

    /// Left fold of binary multiplications; never emits fan-in > 2.
    pub fn mul_chain(&mut self, args: &[NodeId]) -> NodeId {
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

    pub fn sign(&mut self, a: NodeId) -> NodeId {
        self.push(GadgetNode::Sign(a))
    }

    pub fn neg(&mut self, a: NodeId) -> NodeId {
        let m = self.int(-1);
        self.mul2(m, a)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let nb = self.neg(b);
        self.plus(vec![a, nb])
    }

    pub fn scale(&mut self, c: Rational, a: NodeId) -> NodeId {
        let k = self.constant(c);
        self.mul2(k, a)
    }

    /// `1 - sign((a - b)^2)`: equality indicator.
    pub fn eq(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let d = self.sub(a, b);
        let sq = self.mul2(d, d);
        let s = self.sign(sq);
        let one = self.int(1);
        self.sub(one, s)
    }

    /// `1 - sign(a^2)`: zero indicator.
    pub fn zero_fn(&mut self, a: NodeId) -> NodeId {
        let sq = self.mul2(a, a);
        let s = self.sign(sq);
        let one = self.int(1);
        self.sub(one, s)
    }

    /// `(sign(a - b)^2 + sign(a - b)) / 2`: strict greater-than indicator.
    pub fn gt(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let d = self.sub(a, b);
        let s = self.sign(d);
        let sq = self.mul2(s, s);
        let sum = self.plus(vec![sq, s]);
        self.scale(Rational::ratio(1, 2), sum)
    }

    pub fn finish(self, outputs: Vec<(String, NodeId)>) -> GadgetCircuit {
        let (ports_out, outs) = outputs.into_iter().unzip();
        GadgetCircuit {
            name: self.name,
            ports_in: self.ports_in,
            ports_out,
            nodes: self.nodes,
            outputs: outs,
        }
    }

    fn push(&mut self, node: GadgetNode) -> NodeId {
        self.nodes.push(node);
        self.nodes.len() - 1
    }
}
