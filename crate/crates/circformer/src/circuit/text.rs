//! Line-based circuit text format.
//!
//! ```text
//! # comment
//! class semi
//! gate 1 input 1
//! gate 2 const -5/3
//! gate 3 plus 1 2
//! gate 4 output 3
//! ```
//!
//! Edge alphas are the left-to-right listing order of predecessor indices.
//! Output labels are implicit: output gates take `out_1, out_2, ...` in
//! ascending gate-index order.

use std::fmt;

use super::{Circuit, CircuitClass, Edge, GateLabel};
use crate::numerics::Rational;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CircuitTextError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for CircuitTextError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for CircuitTextError {}

fn err(line: usize, message: impl Into<String>) -> CircuitTextError {
    CircuitTextError {
        line,
        message: message.into(),
    }
}

pub fn parse_circuit(input: &str) -> Result<Circuit, CircuitTextError> {
    let mut class = None;
    // (gate index, label, predecessor list, line)
    let mut decls: Vec<(usize, GateLabel, Vec<usize>, usize)> = Vec::new();

    for (lineno, raw) in input.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("class") => {
                let c = match tokens.next() {
                    Some("bounded") => CircuitClass::Bounded,
                    Some("semi") => CircuitClass::SemiUnbounded,
                    Some("unbounded") => CircuitClass::Unbounded,
                    other => {
                        return Err(err(
                            lineno,
                            format!("expected `bounded`, `semi` or `unbounded`, got {other:?}"),
                        ))
                    }
                };
                if class.replace(c).is_some() {
                    return Err(err(lineno, "duplicate `class` line"));
                }
            }
            Some("gate") => {
                let idx: usize = tokens
                    .next()
                    .and_then(|t| t.parse().ok())
                    .filter(|&i| i >= 1)
                    .ok_or_else(|| err(lineno, "expected positive gate index"))?;
                let kind = tokens
                    .next()
                    .ok_or_else(|| err(lineno, "missing gate kind"))?;
                let rest: Vec<&str> = tokens.collect();
                let preds_of = |toks: &[&str]| -> Result<Vec<usize>, CircuitTextError> {
                    toks.iter()
                        .map(|t| {
                            t.parse::<usize>()
                                .ok()
                                .filter(|&i| i >= 1)
                                .ok_or_else(|| err(lineno, format!("bad gate reference `{t}`")))
                        })
                        .collect()
                };
                let (label, preds) = match kind {
                    "input" => {
                        let k: usize = rest
                            .first()
                            .and_then(|t| t.parse().ok())
                            .filter(|&k| k >= 1)
                            .ok_or_else(|| err(lineno, "input gate needs a positive index"))?;
                        if rest.len() != 1 {
                            return Err(err(lineno, "input gate takes exactly one index"));
                        }
                        (GateLabel::Input(k), Vec::new())
                    }
                    "const" => {
                        let lit = rest
                            .first()
                            .ok_or_else(|| err(lineno, "const gate needs a rational literal"))?;
                        if rest.len() != 1 {
                            return Err(err(lineno, "const gate takes exactly one literal"));
                        }
                        let v: Rational = lit.parse().map_err(|e| err(lineno, format!("{e}")))?;
                        (GateLabel::Constant(v), Vec::new())
                    }
                    "output" => {
                        let preds = preds_of(&rest)?;
                        // label k assigned later, by ascending gate index
                        (GateLabel::Output(0), preds)
                    }
                    "plus" => (GateLabel::Plus, preds_of(&rest)?),
                    "times" => (GateLabel::Times, preds_of(&rest)?),
                    "sign" => (GateLabel::Sign, preds_of(&rest)?),
                    "ext" => {
                        let name = rest
                            .first()
                            .ok_or_else(|| err(lineno, "ext gate needs a function name"))?
                            .to_string();
                        let preds = preds_of(&rest[1..])?;
                        let arity = preds.len();
                        (GateLabel::Extension { name, arity }, preds)
                    }
                    other => return Err(err(lineno, format!("unknown gate kind `{other}`"))),
                };
                decls.push((idx, label, preds, lineno));
            }
            Some(other) => return Err(err(lineno, format!("unknown directive `{other}`"))),
            None => {}
        }
    }

    let class = class.ok_or_else(|| err(0, "missing `class` header line"))?;
    decls.sort_by_key(|&(idx, _, _, _)| idx);
    for (pos, &(idx, _, _, lineno)) in decls.iter().enumerate() {
        if idx != pos + 1 {
            return Err(err(
                lineno,
                format!(
                    "gate indices must be 1..{} with no gaps, found {idx}",
                    decls.len()
                ),
            ));
        }
    }

    let mut gates = Vec::with_capacity(decls.len());
    let mut edges = Vec::new();
    let mut next_output = 1usize;
    for (idx, label, preds, _) in decls {
        let label = match label {
            GateLabel::Output(_) => {
                let k = next_output;
                next_output += 1;
                GateLabel::Output(k)
            }
            other => other,
        };
        gates.push(label);
        for (i, from) in preds.into_iter().enumerate() {
            edges.push(Edge {
                from,
                to: idx,
                alpha: i + 1,
            });
        }
    }

    Ok(Circuit::new(class, gates, edges))
}

pub fn render_circuit(c: &Circuit) -> String {
    render_circuit_with_comments(c, &[])
}

/// Canonical rendering: class header, then gates ascending, predecessors in
/// alpha order. `comments` lines are emitted verbatim after the header.
pub fn render_circuit_with_comments(c: &Circuit, comments: &[String]) -> String {
    let mut out = String::new();
    out.push_str(&format!("class {}\n", c.class()));
    for line in comments {
        out.push_str(&format!("# {line}\n"));
    }
    let inc = c.incoming();
    for (idx, g) in c.gates() {
        let preds = || {
            inc[idx]
                .iter()
                .map(|e| e.from.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        };
        let line = match g {
            GateLabel::Input(k) => format!("gate {idx} input {k}"),
            GateLabel::Constant(v) => format!("gate {idx} const {v}"),
            GateLabel::Output(_) => format!("gate {idx} output {}", preds()),
            GateLabel::Plus => format!("gate {idx} plus {}", preds()),
            GateLabel::Times => format!("gate {idx} times {}", preds()),
            GateLabel::Sign => format!("gate {idx} sign {}", preds()),
            GateLabel::Extension { name, .. } => format!("gate {idx} ext {name} {}", preds()),
        };
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}
