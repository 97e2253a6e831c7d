//! The constant-depth gadget library the compiler splices: comparison and
//! selection circuits over `{+, x, sign}` realizing the score transforms.
//!
//! Shapes, writing `s` for `sign`:
//!
//! * `eq(x, y) = 1 - s((x - y)^2)`, `zero(x) = eq(x, 0)`
//! * `gt(x, y) = (s(x - y)^2 + s(x - y)) / 2`
//! * `is_max_i(a) = 1 - s(sum_j gt(a_j, a_i))`
//! * `card(a) = sum_i is_max_i(a)`, the argmax-set size
//! * `recip_table_n(k) = sum_{j=1..n} (1/j) * eq(k, j)`, a reciprocal by
//!   table lookup, which is what keeps average weights constant-depth
//! * `avg_i = is_max_i * recip_table_n(card)`
//! * `hardleft_i = is_max_i * zero(sum_{j<i} is_max_j)` and mirrored
//!   `hardright_i`
//!
//! Each gadget's depth is a constant independent of `n`; sizes are `O(n^2)`
//! for the weight gadgets.

use std::fmt;

use crate::gadget::{GadgetBuilder, GadgetCircuit, NodeId};
use crate::numerics::{LagrangeTable, Rational};

pub fn eq_gadget() -> GadgetCircuit {
    let mut b = GadgetBuilder::new("eq");
    let x = b.port("x");
    let y = b.port("y");
    let out = b.eq(x, y);
    b.finish(vec![("out".into(), out)])
}

pub fn gt_gadget() -> GadgetCircuit {
    let mut b = GadgetBuilder::new("gt");
    let x = b.port("x");
    let y = b.port("y");
    let out = b.gt(x, y);
    b.finish(vec![("out".into(), out)])
}

pub fn zero_gadget() -> GadgetCircuit {
    let mut b = GadgetBuilder::new("zero");
    let x = b.port("x");
    let out = b.zero_fn(x);
    b.finish(vec![("out".into(), out)])
}

pub fn sign_gadget() -> GadgetCircuit {
    let mut b = GadgetBuilder::new("sign");
    let x = b.port("x");
    let out = b.sign(x);
    b.finish(vec![("out".into(), out)])
}

pub fn relu_gadget() -> GadgetCircuit {
    let mut b = GadgetBuilder::new("relu");
    let x = b.port("x");
    let s = b.sign(x);
    let sq = b.mul2(s, s);
    let sum = b.plus(vec![sq, s]);
    let half = b.scale(Rational::ratio(1, 2), sum);
    let out = b.mul2(x, half);
    b.finish(vec![("out".into(), out)])
}

/// `charfin_r` by the ring route: `zero(x - r)`.
pub fn charfin_gadget(r: &Rational) -> GadgetCircuit {
    let mut b = GadgetBuilder::new(format!("charfin[{r}]"));
    let x = b.port("x");
    let c = b.constant(r.clone());
    let d = b.sub(x, c);
    let out = b.zero_fn(d);
    b.finish(vec![("out".into(), out)])
}

/// `charfin_a` over a finite support by the field route: the Lagrange basis
/// polynomial, sign-free.
pub fn lagrange_gadget(table: &LagrangeTable) -> GadgetCircuit {
    let mut b = GadgetBuilder::new(format!("lagrange[{}]", table.target()));
    let x = b.port("x");
    let mut factors = Vec::new();
    let a = table.target().clone();
    for point in table.support() {
        if point == &a {
            continue;
        }
        let c = b.constant(point.clone());
        let diff = b.sub(x, c);
        let inv = (&a - point).recip().expect("distinct support");
        factors.push(b.scale(inv, diff));
    }
    let out = b.mul_chain(&factors);
    b.finish(vec![("out".into(), out)])
}

fn emit_is_max(b: &mut GadgetBuilder, scores: &[NodeId], i: usize) -> NodeId {
    let beaten: Vec<NodeId> = scores.iter().map(|&a| b.gt(a, scores[i])).collect();
    let total = b.plus_gate(beaten);
    let s = b.sign(total);
    let one = b.int(1);
    b.sub(one, s)
}

/// 1 iff position `i` (1-based) is in the argmax set; `n` input ports.
pub fn is_max_gadget(n: usize, i: usize) -> GadgetCircuit {
    assert!((1..=n).contains(&i));
    let mut b = GadgetBuilder::new(format!("is_max_{i}"));
    let scores = b.ports("a", n);
    let out = emit_is_max(&mut b, &scores, i - 1);
    b.finish(vec![("out".into(), out)])
}

/// Size of the argmax set of the `n` inputs.
pub fn card_gadget(n: usize) -> GadgetCircuit {
    let mut b = GadgetBuilder::new("card");
    let scores = b.ports("a", n);
    let maxima: Vec<NodeId> = (0..n).map(|i| emit_is_max(&mut b, &scores, i)).collect();
    let out = b.plus_gate(maxima);
    b.finish(vec![("out".into(), out)])
}

fn emit_recip_table(b: &mut GadgetBuilder, n: usize, k: NodeId) -> NodeId {
    let terms: Vec<NodeId> = (1..=n)
        .map(|j| {
            let jj = b.int(j as i64);
            let hit = b.eq(k, jj);
            b.scale(Rational::ratio(1, j as i64), hit)
        })
        .collect();
    b.plus_gate(terms)
}

/// `1/k` for `k` in `1..=n`, by table lookup; `0` outside the table.
pub fn recip_table_gadget(n: usize) -> GadgetCircuit {
    let mut b = GadgetBuilder::new(format!("recip_table_{n}"));
    let k = b.port("k");
    let out = emit_recip_table(&mut b, n, k);
    b.finish(vec![("out".into(), out)])
}

/// All `n` average-attention weights of a score row: `1/|M|` on the argmax
/// set, `0` elsewhere.
pub fn avg_weights_gadget(n: usize) -> GadgetCircuit {
    let mut b = GadgetBuilder::new(format!("avg_weights_{n}"));
    let scores = b.ports("a", n);
    let maxima: Vec<NodeId> = (0..n).map(|i| emit_is_max(&mut b, &scores, i)).collect();
    let card = b.plus_gate(maxima.clone());
    let recip = emit_recip_table(&mut b, n, card);
    let outs = maxima
        .iter()
        .enumerate()
        .map(|(i, &m)| (format!("w{}", i + 1), b.mul2(m, recip)))
        .collect();
    b.finish(outs)
}

/// One-hot weights at the leftmost (or rightmost) maximal position.
pub fn hard_weights_gadget(n: usize, leftmost: bool) -> GadgetCircuit {
    let name = if leftmost { "hardleft" } else { "hardright" };
    let mut b = GadgetBuilder::new(format!("{name}_weights_{n}"));
    let scores = b.ports("a", n);
    let maxima: Vec<NodeId> = (0..n).map(|i| emit_is_max(&mut b, &scores, i)).collect();
    let outs = (0..n)
        .map(|i| {
            let mut before: Vec<NodeId> = if leftmost {
                maxima[..i].to_vec()
            } else {
                maxima[i + 1..].to_vec()
            };
            // a zero summand riding on a full-depth wire keeps the shape of
            // every position identical, so depth is independent of n
            let zero = b.int(0);
            before.push(b.mul2(zero, maxima[i]));
            let blocked = b.plus_gate(before);
            let first = b.zero_fn(blocked);
            (format!("w{}", i + 1), b.mul2(maxima[i], first))
        })
        .collect();
    b.finish(outs)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GadgetCheckError {
    UnknownGadget(String),
    BadArity { name: String, message: String },
}

impl fmt::Display for GadgetCheckError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GadgetCheckError::UnknownGadget(n) => write!(f, "unknown gadget `{n}`"),
            GadgetCheckError::BadArity { name, message } => write!(f, "gadget `{name}`: {message}"),
        }
    }
}

impl std::error::Error for GadgetCheckError {}

/// Standalone oracle for the gadget library: builds the named gadget, splices
/// it into a throwaway circuit, evaluates. Vector gadgets infer `n` from the
/// argument count; indexed names (`avg_2`, `is_max_1`, ...) are 1-based.
pub fn gadget_eval_check(name: &str, args: &[Rational]) -> Result<Rational, GadgetCheckError> {
    let bad = |message: &str| GadgetCheckError::BadArity {
        name: name.to_string(),
        message: message.to_string(),
    };
    let n = args.len();
    let indexed = |prefix: &str| -> Option<usize> {
        name.strip_prefix(prefix)
            .and_then(|i| i.parse::<usize>().ok())
    };
    let (gadget, gadget_args, pick) = if let Some(i) = indexed("is_max_") {
        (is_max_gadget(n, i), args.to_vec(), 0)
    } else if let Some(i) = indexed("avg_") {
        if !(1..=n).contains(&i) {
            return Err(bad("index out of range"));
        }
        (avg_weights_gadget(n), args.to_vec(), i - 1)
    } else if let Some(i) = indexed("hardleft_") {
        if !(1..=n).contains(&i) {
            return Err(bad("index out of range"));
        }
        (hard_weights_gadget(n, true), args.to_vec(), i - 1)
    } else if let Some(i) = indexed("hardright_") {
        if !(1..=n).contains(&i) {
            return Err(bad("index out of range"));
        }
        (hard_weights_gadget(n, false), args.to_vec(), i - 1)
    } else if let Some(table_n) = indexed("recip_table_") {
        if n != 1 {
            return Err(bad("takes one argument"));
        }
        (recip_table_gadget(table_n), args.to_vec(), 0)
    } else {
        match name {
            "eq" => (eq_gadget(), args.to_vec(), 0),
            "gt" => (gt_gadget(), args.to_vec(), 0),
            "zero" => (zero_gadget(), args.to_vec(), 0),
            "sign" => (sign_gadget(), args.to_vec(), 0),
            "relu" => (relu_gadget(), args.to_vec(), 0),
            "card" => (card_gadget(n), args.to_vec(), 0),
            "charfin" => {
                if n != 2 {
                    return Err(bad("takes r then x"));
                }
                (charfin_gadget(&args[0]), vec![args[1].clone()], 0)
            }
            "lagrange" => {
                // target a, evaluation point x, then the rest of the support
                if n < 2 {
                    return Err(bad("takes a, x, then further support points"));
                }
                let mut support = vec![args[0].clone()];
                support.extend_from_slice(&args[2..]);
                let table =
                    LagrangeTable::new(support, &args[0]).map_err(|e| bad(&e.to_string()))?;
                (lagrange_gadget(&table), vec![args[1].clone()], 0)
            }
            _ => return Err(GadgetCheckError::UnknownGadget(name.to_string())),
        }
    };
    let outs = gadget.eval(&gadget_args).map_err(|e| bad(&e.to_string()))?;
    Ok(outs[pick].clone())
}
