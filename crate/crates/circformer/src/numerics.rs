//! Exact rational arithmetic and the scalar helper functions used throughout
//! the crate: `sign`, `zero_fn`, finite characteristic functions and Lagrange
//! interpolation polynomials.
//!
//! Every value in this crate is a [`Rational`]. Results are always kept in
//! canonical lowest terms with a positive denominator, so equality and
//! hashing are structural.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// Arbitrary-precision rational in canonical form (gcd 1, denominator > 0).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Rational(BigRational);

impl Rational {
    pub fn zero() -> Self {
        Rational(BigRational::zero())
    }

    pub fn one() -> Self {
        Rational(BigRational::one())
    }

    pub fn from_int(n: i64) -> Self {
        Rational(BigRational::from_integer(BigInt::from(n)))
    }

    /// `n/d` from machine integers. Panics on `d == 0`.
    pub fn ratio(n: i64, d: i64) -> Self {
        assert!(d != 0, "rational with zero denominator");
        Rational(BigRational::new(BigInt::from(n), BigInt::from(d)))
    }

    /// Canonical rational from big integers, rejecting a zero denominator.
    pub fn new(numer: BigInt, denom: BigInt) -> Result<Self, RationalError> {
        if denom.is_zero() {
            return Err(RationalError::ZeroDenominator);
        }
        Ok(Rational(BigRational::new(numer, denom)))
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.0.is_one()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn is_positive(&self) -> bool {
        self.0.is_positive()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn square(&self) -> Self {
        Rational(&self.0 * &self.0)
    }

    /// Multiplicative inverse; `None` for zero.
    pub fn recip(&self) -> Option<Self> {
        if self.is_zero() {
            None
        } else {
            Some(Rational(self.0.recip()))
        }
    }

    pub fn abs(&self) -> Self {
        Rational(self.0.abs())
    }
}

impl From<i64> for Rational {
    fn from(n: i64) -> Self {
        Rational::from_int(n)
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Strict parser for the rational literal syntax shared by all file formats:
/// optional minus sign, decimal integer, optional `/` and positive decimal
/// denominator. No floats, no whitespace, no leading `+`.
impl FromStr for Rational {
    type Err = RationalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (numer, denom) = match s.split_once('/') {
            Some((n, d)) => (n, Some(d)),
            None => (s, None),
        };
        let numer_body = numer.strip_prefix('-').unwrap_or(numer);
        if numer_body.is_empty() || !numer_body.bytes().all(|b| b.is_ascii_digit()) {
            return Err(RationalError::Malformed(s.to_string()));
        }
        let n: BigInt = numer
            .parse()
            .map_err(|_| RationalError::Malformed(s.to_string()))?;
        let d: BigInt = match denom {
            None => BigInt::one(),
            Some(d) => {
                if d.is_empty() || !d.bytes().all(|b| b.is_ascii_digit()) {
                    return Err(RationalError::Malformed(s.to_string()));
                }
                let d: BigInt = d
                    .parse()
                    .map_err(|_| RationalError::Malformed(s.to_string()))?;
                if d.is_zero() {
                    return Err(RationalError::ZeroDenominator);
                }
                d
            }
        };
        Ok(Rational(BigRational::new(n, d)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RationalError {
    ZeroDenominator,
    Malformed(String),
}

impl fmt::Display for RationalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RationalError::ZeroDenominator => write!(f, "rational with zero denominator"),
            RationalError::Malformed(s) => write!(f, "malformed rational literal `{s}`"),
        }
    }
}

impl std::error::Error for RationalError {}

macro_rules! forward_binop {
    ($trait:ident, $method:ident) => {
        impl $trait for Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                Rational((self.0).$method(rhs.0))
            }
        }
        impl $trait<&Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: &Rational) -> Rational {
                Rational((self.0).$method(&rhs.0))
            }
        }
        impl $trait<Rational> for &Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                Rational((&self.0).$method(rhs.0))
            }
        }
        impl $trait<&Rational> for &Rational {
            type Output = Rational;
            fn $method(self, rhs: &Rational) -> Rational {
                Rational((&self.0).$method(&rhs.0))
            }
        }
    };
}

forward_binop!(Add, add);
forward_binop!(Sub, sub);
forward_binop!(Mul, mul);

impl Div for Rational {
    type Output = Rational;
    fn div(self, rhs: Rational) -> Rational {
        &self / &rhs
    }
}

impl Div<&Rational> for &Rational {
    type Output = Rational;
    fn div(self, rhs: &Rational) -> Rational {
        assert!(!rhs.is_zero(), "division by zero rational");
        Rational(&self.0 / &rhs.0)
    }
}

impl Neg for Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-self.0)
    }
}

impl Neg for &Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-&self.0)
    }
}

impl Sum for Rational {
    fn sum<I: Iterator<Item = Rational>>(iter: I) -> Rational {
        iter.fold(Rational::zero(), |a, b| a + b)
    }
}

impl<'a> Sum<&'a Rational> for Rational {
    fn sum<I: Iterator<Item = &'a Rational>>(iter: I) -> Rational {
        iter.fold(Rational::zero(), |a, b| a + b)
    }
}

/// Trichotomy on `x` vs `0`, as a rational in `{-1, 0, 1}`.
pub fn sign(x: &Rational) -> Rational {
    match x.cmp(&Rational::zero()) {
        Ordering::Greater => Rational::one(),
        Ordering::Equal => Rational::zero(),
        Ordering::Less => -Rational::one(),
    }
}

/// `1` iff `x = 0`, else `0`.
pub fn zero_fn(x: &Rational) -> Rational {
    if x.is_zero() {
        Rational::one()
    } else {
        Rational::zero()
    }
}

/// Characteristic function of `r` within the ring: `zero_fn(x - r)`.
pub fn charfin(r: &Rational, x: &Rational) -> Rational {
    zero_fn(&(x - r))
}

/// `x` if `x > 0` else `0`; algebraically `x * (sign(x)^2 + sign(x)) / 2`.
pub fn relu(x: &Rational) -> Rational {
    if x.is_positive() {
        x.clone()
    } else {
        Rational::zero()
    }
}

/// A Lagrange basis polynomial over a finite support set: evaluates to `1`
/// at the target point and to `0` at every other point of the support.
/// Denominators `(a - b)^-1` are precomputed at construction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LagrangeTable {
    support: Vec<Rational>,
    target: usize,
    denominators: Vec<Rational>,
}

impl LagrangeTable {
    /// Builds the basis polynomial for `target` within `support`. Rejects
    /// duplicate support points and a target outside the support.
    pub fn new(support: Vec<Rational>, target: &Rational) -> Result<Self, LagrangeError> {
        for (i, a) in support.iter().enumerate() {
            for b in &support[i + 1..] {
                if a == b {
                    return Err(LagrangeError::DuplicateSupport(a.clone()));
                }
            }
        }
        let target_idx = support
            .iter()
            .position(|a| a == target)
            .ok_or_else(|| LagrangeError::TargetNotInSupport(target.clone()))?;
        let a = &support[target_idx];
        let denominators = support
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != target_idx)
            .map(|(_, b)| (a - b).recip().expect("distinct support points"))
            .collect();
        Ok(LagrangeTable {
            support,
            target: target_idx,
            denominators,
        })
    }

    pub fn support(&self) -> &[Rational] {
        &self.support
    }

    pub fn target(&self) -> &Rational {
        &self.support[self.target]
    }

    /// Evaluates the polynomial `prod_{b != a} (x - b) * (a - b)^-1`.
    pub fn eval(&self, x: &Rational) -> Rational {
        let mut acc = Rational::one();
        let mut d = self.denominators.iter();
        for (i, b) in self.support.iter().enumerate() {
            if i == self.target {
                continue;
            }
            acc = acc * (x - b) * d.next().expect("denominator per non-target point");
        }
        acc
    }
}

/// See [`LagrangeTable::eval`].
pub fn lagrange_eval(table: &LagrangeTable, x: &Rational) -> Rational {
    table.eval(x)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LagrangeError {
    DuplicateSupport(Rational),
    TargetNotInSupport(Rational),
}

impl fmt::Display for LagrangeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LagrangeError::DuplicateSupport(a) => {
                write!(f, "duplicate support point {a}")
            }
            LagrangeError::TargetNotInSupport(a) => {
                write!(f, "target {a} is not a support point")
            }
        }
    }
}

impl std::error::Error for LagrangeError {}
