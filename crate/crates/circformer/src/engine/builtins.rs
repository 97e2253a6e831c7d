//! The named attention and activation functions of the simulating
//! constructions.
//!
//! Attention naming: `att_E_*` scores an edge vector against candidate
//! predecessor-side vectors (keyed on `p`), `att_V_*` against co-edges of the
//! same gate (keyed on `s`). `att_B(k)` additionally keys on edge alpha `k`;
//! the `z`/`sign` probes implement the attention-based sign recovery.
//!
//! Every dot-product-style builtin is the bilinear form `x . (M y)` for a
//! sparse matrix `M`; [`BuiltinAttention::dot_product`] returns `(I, M)` so
//! the equivalence is checkable and the circuitizer can reuse it. The
//! eq-style builtins are compositions of `zero` on differences and expose a
//! gadget realization instead.

use std::fmt;

use super::{AttentionSpec, ChiCtx, EngineError, Matrix};
use crate::circuit::ExtensionRegistry;
use crate::encoding::{
    TypeConstants, COMP_BIN, COMP_I, COMP_ISQ, COMP_ONE, COMP_P, COMP_S, COMP_SSQ, COMP_T, COMP_V,
};
use crate::gadget::{GadgetBuilder, GadgetCircuit};
use crate::numerics::{zero_fn, Rational};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BuiltinAttention {
    /// 1 iff `x_p = y_s` and `y_i` is 0 or 1: fetches the one vector that
    /// carries the predecessor gate's value.
    EdgeEq,
    /// 1 iff `x_s = y_s`: co-edges of the same gate attend to each other.
    VertexEq,
    /// `x_p^2 - (y_s - x_p)^2`, maximal exactly on `y_s = x_p`.
    EdgeDp,
    /// `x_s^2 - (y_s - x_s)^2`, maximal exactly on `y_s = x_s`.
    VertexDp,
    /// `att_B(k)`: adds `k^2 - (y_i - k)^2`, picking out the k-th edge.
    Predecessor(usize),
    /// `att_z_plus` / `att_z_minus`: probes gates 1 and 2 to recover zero(v).
    ZeroProbePlus,
    ZeroProbeMinus,
    /// `att_sign`: `x_v * y_bin`.
    SignProbe,
}

impl BuiltinAttention {
    pub fn min_dim(&self) -> usize {
        match self {
            BuiltinAttention::EdgeEq | BuiltinAttention::VertexEq => 5,
            BuiltinAttention::EdgeDp | BuiltinAttention::VertexDp => 7,
            BuiltinAttention::Predecessor(_)
            | BuiltinAttention::ZeroProbePlus
            | BuiltinAttention::ZeroProbeMinus => 8,
            BuiltinAttention::SignProbe => 9,
        }
    }

    /// The `(A, B)` matrices with `score = Ax . By`, for the dot-product
    /// style builtins. Eq-style builtins have no bilinear form; use
    /// [`BuiltinAttention::gadget`] for those.
    pub fn dot_product(&self, dim: usize) -> Option<(Matrix, Matrix)> {
        if dim < self.min_dim() {
            return None;
        }
        let mut m = Matrix::zeros(dim);
        let one = Rational::one;
        match self {
            BuiltinAttention::EdgeEq | BuiltinAttention::VertexEq => return None,
            BuiltinAttention::EdgeDp => {
                m.set(COMP_P, COMP_S, Rational::from_int(2));
                m.set(COMP_ONE, COMP_SSQ, -one());
            }
            BuiltinAttention::VertexDp => {
                m.set(COMP_S, COMP_S, Rational::from_int(2));
                m.set(COMP_ONE, COMP_SSQ, -one());
            }
            BuiltinAttention::Predecessor(k) => {
                m.set(COMP_S, COMP_S, Rational::from_int(2));
                m.set(COMP_ONE, COMP_SSQ, -one());
                m.set(COMP_ONE, COMP_I, Rational::from_int(2 * *k as i64));
                m.set(COMP_ONE, COMP_ISQ, -one());
            }
            BuiltinAttention::ZeroProbePlus | BuiltinAttention::ZeroProbeMinus => {
                let sign = if matches!(self, BuiltinAttention::ZeroProbePlus) {
                    1
                } else {
                    -1
                };
                m.set(COMP_V, COMP_S, Rational::from_int(sign));
                m.set(COMP_ONE, COMP_S, Rational::from_int(3));
                m.set(COMP_ONE, COMP_SSQ, -one());
                m.set(COMP_ONE, COMP_I, one());
                m.set(COMP_ONE, COMP_ISQ, -one());
            }
            BuiltinAttention::SignProbe => {
                m.set(COMP_V, COMP_BIN, one());
            }
        }
        Some((Matrix::identity(dim), m))
    }

    /// Gadget realization over `{+, x, sign}` with `2 * dim` input ports.
    /// Only needed for the eq-style builtins; the others go through
    /// [`BuiltinAttention::dot_product`].
    pub fn gadget(&self, dim: usize) -> Option<GadgetCircuit> {
        match self {
            BuiltinAttention::EdgeEq | BuiltinAttention::VertexEq => {
                let mut b = GadgetBuilder::new(self.to_string());
                let xs = b.ports("x", dim);
                let ys = b.ports("y", dim);
                let key = if matches!(self, BuiltinAttention::EdgeEq) {
                    xs[COMP_P]
                } else {
                    xs[COMP_S]
                };
                let hit = b.eq(key, ys[COMP_S]);
                let out = if matches!(self, BuiltinAttention::EdgeEq) {
                    // restrict to the unique carrier: node vector (i = 0) or
                    // first edge (i = 1)
                    let z0 = b.zero_fn(ys[COMP_I]);
                    let one = b.int(1);
                    let z1 = b.eq(ys[COMP_I], one);
                    let any = b.plus(vec![z0, z1]);
                    b.mul2(hit, any)
                } else {
                    hit
                };
                Some(b.finish(vec![("score".into(), out)]))
            }
            _ => None,
        }
    }
}

impl fmt::Display for BuiltinAttention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BuiltinAttention::EdgeEq => write!(f, "att_E_eq"),
            BuiltinAttention::VertexEq => write!(f, "att_V_eq"),
            BuiltinAttention::EdgeDp => write!(f, "att_E_dp"),
            BuiltinAttention::VertexDp => write!(f, "att_V_dp"),
            BuiltinAttention::Predecessor(k) => write!(f, "att_B({k})"),
            BuiltinAttention::ZeroProbePlus => write!(f, "att_z_plus"),
            BuiltinAttention::ZeroProbeMinus => write!(f, "att_z_minus"),
            BuiltinAttention::SignProbe => write!(f, "att_sign"),
        }
    }
}

/// Exact score of any attention spec on a pair of vectors.
pub fn attention_value(
    spec: &AttentionSpec,
    x: &[Rational],
    y: &[Rational],
) -> Result<Rational, EngineError> {
    if x.len() != y.len() {
        return Err(EngineError::DimMismatch {
            what: "attention arguments".into(),
            expected: x.len(),
            got: y.len(),
        });
    }
    match spec {
        AttentionSpec::DotProduct { a, b } => {
            if a.size() != x.len() || b.size() != x.len() {
                return Err(EngineError::DimMismatch {
                    what: "dot-product matrices".into(),
                    expected: x.len(),
                    got: a.size(),
                });
            }
            let ax = a.mul_vec(x);
            let by = b.mul_vec(y);
            Ok(ax.iter().zip(&by).map(|(p, q)| p * q).sum())
        }
        AttentionSpec::Builtin(b) => {
            if x.len() < b.min_dim() {
                return Err(EngineError::BuiltinDim {
                    name: b.to_string(),
                    needs: b.min_dim(),
                    got: x.len(),
                });
            }
            Ok(builtin_attention_score(b, x, y))
        }
        AttentionSpec::Host(g) => {
            if g.arity_in() != 2 * x.len() || g.arity_out() != 1 {
                return Err(EngineError::DimMismatch {
                    what: format!("host attention `{}` ports", g.name()),
                    expected: 2 * x.len(),
                    got: g.arity_in(),
                });
            }
            let mut args = x.to_vec();
            args.extend_from_slice(y);
            Ok(g.eval(&args)?.remove(0))
        }
    }
}

fn builtin_attention_score(b: &BuiltinAttention, x: &[Rational], y: &[Rational]) -> Rational {
    let two = Rational::from_int(2);
    match b {
        BuiltinAttention::EdgeEq => {
            let hit = zero_fn(&(&x[COMP_P] - &y[COMP_S]));
            let carrier = zero_fn(&y[COMP_I]) + zero_fn(&(&y[COMP_I] - &Rational::one()));
            hit * carrier
        }
        BuiltinAttention::VertexEq => zero_fn(&(&x[COMP_S] - &y[COMP_S])),
        BuiltinAttention::EdgeDp => &two * &x[COMP_P] * &y[COMP_S] - &x[COMP_ONE] * &y[COMP_SSQ],
        BuiltinAttention::VertexDp => &two * &x[COMP_S] * &y[COMP_S] - &x[COMP_ONE] * &y[COMP_SSQ],
        BuiltinAttention::Predecessor(k) => {
            let k2 = Rational::from_int(2 * *k as i64);
            &two * &x[COMP_S] * &y[COMP_S] - &x[COMP_ONE] * &y[COMP_SSQ]
                + k2 * &x[COMP_ONE] * &y[COMP_I]
                - &x[COMP_ONE] * &y[COMP_ISQ]
        }
        BuiltinAttention::ZeroProbePlus | BuiltinAttention::ZeroProbeMinus => {
            let v = if matches!(b, BuiltinAttention::ZeroProbePlus) {
                x[COMP_V].clone()
            } else {
                -&x[COMP_V]
            };
            v * &y[COMP_S] + Rational::from_int(3) * &x[COMP_ONE] * &y[COMP_S]
                - &x[COMP_ONE] * &y[COMP_SSQ]
                + &x[COMP_ONE] * &y[COMP_I]
                - &x[COMP_ONE] * &y[COMP_ISQ]
        }
        BuiltinAttention::SignProbe => &x[COMP_V] * &y[COMP_BIN],
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BuiltinActivation {
    /// Two-head block, identity weights: fetch predecessor values.
    EdgeGeneral,
    /// Two-head block, identity weights: sum / product by gate type.
    VertexGeneral,
    /// Average-attention variant with the fan-in correction `2*i - 1`.
    EdgeAvg,
    VertexAvg,
    /// Semi-unbounded variant: correction for output/plus only; times and
    /// extension edges pass through uncorrected.
    EdgeSemi,
    VertexSemi,
    /// Bounded variant, no correction; values come from `att_B` heads.
    EdgeFnc,
    VertexFnc,
    /// Semi-unbounded plus registered basis functions by type constant.
    VertexExt(Vec<String>),
    /// Semi-unbounded plus the attention-based sign recovery.
    VertexSign,
}

impl BuiltinActivation {
    /// Minimum number of attention-head results (activation arity is this
    /// plus one for the position's own vector).
    pub fn min_heads(&self) -> usize {
        match self {
            BuiltinActivation::EdgeGeneral | BuiltinActivation::EdgeFnc => 1,
            BuiltinActivation::VertexGeneral
            | BuiltinActivation::VertexAvg
            | BuiltinActivation::EdgeAvg
            | BuiltinActivation::EdgeSemi
            | BuiltinActivation::VertexFnc => 2,
            BuiltinActivation::VertexSemi => 3,
            // at least x^+, att_B(1), att_B(2); wider bases are checked
            // against the registry during evaluation
            BuiltinActivation::VertexExt(_) => 3,
            BuiltinActivation::VertexSign => 6,
        }
    }

    pub fn min_dim(&self) -> usize {
        match self {
            BuiltinActivation::VertexSign => 9,
            _ => 5,
        }
    }
}

impl fmt::Display for BuiltinActivation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BuiltinActivation::EdgeGeneral => write!(f, "act_E_gen"),
            BuiltinActivation::VertexGeneral => write!(f, "act_V_gen"),
            BuiltinActivation::EdgeAvg => write!(f, "act_E_avg"),
            BuiltinActivation::VertexAvg => write!(f, "act_V_avg"),
            BuiltinActivation::EdgeSemi => write!(f, "act_E_semi"),
            BuiltinActivation::VertexSemi => write!(f, "act_V_semi"),
            BuiltinActivation::EdgeFnc => write!(f, "act_E_fnc"),
            BuiltinActivation::VertexFnc => write!(f, "act_V_fnc"),
            BuiltinActivation::VertexExt(names) => write!(f, "act_V_ext({})", names.join(",")),
            BuiltinActivation::VertexSign => write!(f, "act_V_sign"),
        }
    }
}

/// Applies a built-in activation. `inputs[0]` is the position's own vector,
/// `inputs[1..]` the pooled head results in head order. Every non-`v`
/// component of the result is retained from `inputs[0]`.
pub fn builtin_activation_value(
    act: &BuiltinActivation,
    inputs: &[Vec<Rational>],
    types: &TypeConstants,
    chi: &ChiCtx,
    extensions: &ExtensionRegistry,
) -> Result<Vec<Rational>, EngineError> {
    let needs = act.min_heads() + 1;
    if inputs.len() < needs {
        return Err(EngineError::ActivationArity {
            name: act.to_string(),
            needs,
            got: inputs.len(),
        });
    }
    let x = &inputs[0];
    if x.len() < act.min_dim() {
        return Err(EngineError::BuiltinDim {
            name: act.to_string(),
            needs: act.min_dim(),
            got: x.len(),
        });
    }
    let t = &x[COMP_T];
    let vx = &x[COMP_V];
    let source = chi.chi_sum(&[TypeConstants::t_input(), TypeConstants::t_const()], t);
    let out_plus = chi.chi_sum(&[TypeConstants::t_output(), TypeConstants::t_plus()], t);

    let v = match act {
        BuiltinActivation::EdgeGeneral | BuiltinActivation::EdgeFnc => {
            let vy = &inputs[1][COMP_V];
            let fetch = chi.chi_sum(
                &[
                    TypeConstants::t_output(),
                    TypeConstants::t_plus(),
                    TypeConstants::t_times(),
                ],
                t,
            );
            source * vx + fetch * vy
        }
        BuiltinActivation::EdgeAvg => {
            let vy = &inputs[1][COMP_V];
            let iz = &inputs[2][COMP_I];
            let fetch = chi.chi_sum(
                &[
                    TypeConstants::t_output(),
                    TypeConstants::t_plus(),
                    TypeConstants::t_times(),
                ],
                t,
            );
            let correction = Rational::from_int(2) * iz - Rational::one();
            source * vx + fetch * correction * vy
        }
        BuiltinActivation::EdgeSemi => {
            // correction for output/plus; every other non-source type (times,
            // sign, extensions) passes the fetched value through unscaled.
            // On registered type constants 1 - source - out_plus equals the
            // characteristic sum over those remaining types.
            let vy = &inputs[1][COMP_V];
            let iz = &inputs[2][COMP_I];
            let correction = Rational::from_int(2) * iz - Rational::one();
            let rest = Rational::one() - &source - &out_plus;
            &source * vx + out_plus * correction * vy + rest * vy
        }
        BuiltinActivation::VertexGeneral | BuiltinActivation::VertexAvg => {
            let vplus = &inputs[1][COMP_V];
            let vtimes = &inputs[2][COMP_V];
            let times = chi.chi(&TypeConstants::t_times(), t);
            source * vx + out_plus * vplus + times * vtimes
        }
        BuiltinActivation::VertexSemi => {
            let vplus = &inputs[1][COMP_V];
            let v1 = &inputs[2][COMP_V];
            let v2 = &inputs[3][COMP_V];
            let times = chi.chi(&TypeConstants::t_times(), t);
            source * vx + out_plus * vplus + times * (v1 * v2)
        }
        BuiltinActivation::VertexFnc => {
            let v1 = &inputs[1][COMP_V];
            let v2 = &inputs[2][COMP_V];
            let out = chi.chi(&TypeConstants::t_output(), t);
            let plus = chi.chi(&TypeConstants::t_plus(), t);
            let times = chi.chi(&TypeConstants::t_times(), t);
            source * vx + out * v1 + plus * (v1 + v2) + times * (v1 * v2)
        }
        BuiltinActivation::VertexExt(names) => {
            let vplus = &inputs[1][COMP_V];
            let v1 = &inputs[2][COMP_V];
            let v2 = &inputs[3][COMP_V];
            let times = chi.chi(&TypeConstants::t_times(), t);
            let mut v = source * vx + out_plus * vplus + times * (v1 * v2);
            for name in names {
                let tb = types
                    .extension(name)
                    .ok_or_else(|| EngineError::UnknownBasisFunction { name: name.clone() })?;
                let arity = if name == "sign" {
                    1
                } else {
                    extensions
                        .get(name)
                        .ok_or_else(|| EngineError::UnknownBasisFunction { name: name.clone() })?
                        .arity
                };
                if inputs.len() < 2 + arity {
                    return Err(EngineError::ActivationArity {
                        name: act.to_string(),
                        needs: 2 + arity,
                        got: inputs.len(),
                    });
                }
                let args: Vec<Rational> =
                    (0..arity).map(|j| inputs[2 + j][COMP_V].clone()).collect();
                let value = if name == "sign" {
                    crate::numerics::sign(&args[0])
                } else {
                    extensions.get(name).expect("checked above").apply(&args)
                };
                v = v + chi.chi(&tb, t) * value;
            }
            v
        }
        BuiltinActivation::VertexSign => {
            let vplus = &inputs[1][COMP_V];
            let v1 = &inputs[2][COMP_V];
            let v2 = &inputs[3][COMP_V];
            let u_pos = &inputs[4];
            let u_neg = &inputs[5];
            let u_sgn = &inputs[6];
            let times = chi.chi(&TypeConstants::t_times(), t);
            let sign_t = chi.chi(&TypeConstants::t_sign(), t);
            let one = Rational::one();
            let zero_v = Rational::from_int(4) * (&u_pos[COMP_S] - &one) * (&u_neg[COMP_S] - &one);
            let sign_v = (&one - &zero_v) * (Rational::from_int(2) * &u_sgn[COMP_BIN] - &one);
            source * vx + out_plus * vplus + times * (v1 * v2) + sign_t * sign_v
        }
    };

    let mut out = x.clone();
    out[COMP_V] = v;
    Ok(out)
}
