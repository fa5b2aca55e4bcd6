//! Exact ordered-field arithmetic over Q(sqrt(d)).
//!
//! Every quantity in the engine (entitlements, cut points, appraisals,
//! measure masses) is a [`Scalar`]: a canonical `rat + coef*sqrt(d)` with
//! fully reduced big-rational components. One squarefree radicand `d` is
//! fixed per engine run; `d = 0` means pure rationals. Comparison is
//! decided by rational sign analysis, never by floating point.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExactError {
    #[error("radicand {0} is not usable: must be 0 or a squarefree integer >= 2")]
    BadRadicand(u64),
    #[error("mismatched radicands: sqrt({0}) vs sqrt({1})")]
    MismatchedRadicands(u64, u64),
    #[error("division by zero")]
    DivisionByZero,
    #[error("cannot parse scalar from {0:?}")]
    Parse(String),
}

/// The context-wide radicand. `Radicand::new` rejects 1 and non-squarefree
/// values, for which the `rat + coef*sqrt(d)` form would not be unique.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Radicand(u64);

impl Radicand {
    pub const RATIONAL: Radicand = Radicand(0);

    pub fn new(d: u64) -> Result<Self, ExactError> {
        if d == 1 {
            return Err(ExactError::BadRadicand(d));
        }
        let mut p: u64 = 2;
        while p.saturating_mul(p) <= d {
            if d.is_multiple_of(p * p) {
                return Err(ExactError::BadRadicand(d));
            }
            p += 1;
        }
        Ok(Radicand(d))
    }

    pub fn value(self) -> u64 {
        self.0
    }

    pub fn is_rational(self) -> bool {
        self.0 == 0
    }
}

/// An element of Q(sqrt(d)), stored as `rat + coef*sqrt(d)` with both
/// fractions reduced. Scalars with `coef = 0` carry radicand 0, so purely
/// rational values compare and combine freely across contexts.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Scalar {
    rat: BigRational,
    coef: BigRational,
    radicand: u64,
}

impl Scalar {
    pub fn zero() -> Self {
        Scalar::from_rational(BigRational::zero())
    }

    pub fn one() -> Self {
        Scalar::from_rational(BigRational::one())
    }

    pub fn from_rational(rat: BigRational) -> Self {
        Scalar {
            rat,
            coef: BigRational::zero(),
            radicand: 0,
        }
    }

    pub fn from_integer(n: i64) -> Self {
        Scalar::from_rational(BigRational::from_integer(BigInt::from(n)))
    }

    /// `p/q` as a scalar. Panics if `q == 0`; intended for literals.
    pub fn ratio(p: i64, q: i64) -> Self {
        Scalar::from_rational(BigRational::new(BigInt::from(p), BigInt::from(q)))
    }

    /// `rat + coef*sqrt(d)` in the given context.
    pub fn with_radical(rat: BigRational, coef: BigRational, d: Radicand) -> Self {
        Scalar::normalize(rat, coef, d.value())
    }

    fn normalize(rat: BigRational, coef: BigRational, radicand: u64) -> Self {
        if coef.is_zero() || radicand == 0 {
            Scalar {
                rat,
                coef: BigRational::zero(),
                radicand: 0,
            }
        } else {
            Scalar {
                rat,
                coef,
                radicand,
            }
        }
    }

    pub fn rational_part(&self) -> &BigRational {
        &self.rat
    }

    pub fn radical_coef(&self) -> &BigRational {
        &self.coef
    }

    pub fn radicand(&self) -> u64 {
        self.radicand
    }

    pub fn is_zero(&self) -> bool {
        self.rat.is_zero() && self.coef.is_zero()
    }

    pub fn is_rational(&self) -> bool {
        self.coef.is_zero()
    }

    /// The reduced denominator, defined only for rational scalars.
    pub fn rational_denominator(&self) -> Option<&BigInt> {
        if self.is_rational() {
            Some(self.rat.denom())
        } else {
            None
        }
    }

    fn unify(a: &Scalar, b: &Scalar) -> Result<u64, ExactError> {
        match (a.radicand, b.radicand) {
            (0, d) | (d, 0) => Ok(d),
            (d1, d2) if d1 == d2 => Ok(d1),
            (d1, d2) => Err(ExactError::MismatchedRadicands(d1, d2)),
        }
    }

    pub fn checked_add(&self, other: &Scalar) -> Result<Scalar, ExactError> {
        let d = Scalar::unify(self, other)?;
        Ok(Scalar::normalize(
            &self.rat + &other.rat,
            &self.coef + &other.coef,
            d,
        ))
    }

    pub fn checked_sub(&self, other: &Scalar) -> Result<Scalar, ExactError> {
        let d = Scalar::unify(self, other)?;
        Ok(Scalar::normalize(
            &self.rat - &other.rat,
            &self.coef - &other.coef,
            d,
        ))
    }

    pub fn checked_mul(&self, other: &Scalar) -> Result<Scalar, ExactError> {
        let d = Scalar::unify(self, other)?;
        let dd = BigRational::from_integer(BigInt::from(d));
        let rat = &self.rat * &other.rat + &self.coef * &other.coef * &dd;
        let coef = &self.rat * &other.coef + &self.coef * &other.rat;
        Ok(Scalar::normalize(rat, coef, d))
    }

    /// Multiplicative inverse by conjugate rationalization. Inverting zero
    /// is a hard error, never a saturating value.
    pub fn checked_inv(&self) -> Result<Scalar, ExactError> {
        if self.is_zero() {
            return Err(ExactError::DivisionByZero);
        }
        if self.coef.is_zero() {
            return Ok(Scalar::from_rational(self.rat.recip()));
        }
        let dd = BigRational::from_integer(BigInt::from(self.radicand));
        // (a + b*sqrt(d))^-1 = (a - b*sqrt(d)) / (a^2 - b^2 d); the norm is
        // nonzero because d is squarefree and not 1, so sqrt(d) is irrational.
        let norm = &self.rat * &self.rat - &self.coef * &self.coef * &dd;
        debug_assert!(!norm.is_zero());
        Ok(Scalar::normalize(
            &self.rat / &norm,
            -(&self.coef / &norm),
            self.radicand,
        ))
    }

    pub fn checked_div(&self, other: &Scalar) -> Result<Scalar, ExactError> {
        self.checked_mul(&other.checked_inv()?)
    }

    /// Sign of the real number `rat + coef*sqrt(d)`: case split on the signs
    /// of the two components, with `rat^2` vs `coef^2 * d` breaking the
    /// mixed-sign cases.
    pub fn sign(&self) -> Ordering {
        let sr = rational_sign(&self.rat);
        if self.coef.is_zero() {
            return sr;
        }
        let sc = rational_sign(&self.coef);
        if self.rat.is_zero() {
            return sc;
        }
        match (sr, sc) {
            (Ordering::Greater, Ordering::Greater) => Ordering::Greater,
            (Ordering::Less, Ordering::Less) => Ordering::Less,
            (Ordering::Greater, Ordering::Less) | (Ordering::Less, Ordering::Greater) => {
                let dd = BigRational::from_integer(BigInt::from(self.radicand));
                let lhs = &self.rat * &self.rat;
                let rhs = &self.coef * &self.coef * &dd;
                // |rat| vs |coef|*sqrt(d): compare squares, then give the
                // larger magnitude its component's sign.
                match lhs.cmp(&rhs) {
                    Ordering::Greater => sr,
                    Ordering::Less => sc,
                    Ordering::Equal => unreachable!("sqrt(d) irrational"),
                }
            }
            _ => unreachable!(),
        }
    }

    /// Total order on the reals of one field. Errors on mismatched radicands.
    pub fn compare(a: &Scalar, b: &Scalar) -> Result<Ordering, ExactError> {
        Ok(a.checked_sub(b)?.sign())
    }

    pub fn min(a: Scalar, b: Scalar) -> Scalar {
        if a <= b {
            a
        } else {
            b
        }
    }

    pub fn max(a: Scalar, b: Scalar) -> Scalar {
        if a >= b {
            a
        } else {
            b
        }
    }

    pub fn abs(&self) -> Scalar {
        if self.sign() == Ordering::Less {
            -self.clone()
        } else {
            self.clone()
        }
    }

    /// Approximate value for report columns; never used in decisions.
    pub fn to_f64(&self) -> f64 {
        let mut v = self.rat.to_f64().unwrap_or(f64::NAN);
        if !self.coef.is_zero() {
            v += self.coef.to_f64().unwrap_or(f64::NAN) * (self.radicand as f64).sqrt();
        }
        v
    }
}

fn rational_sign(r: &BigRational) -> Ordering {
    if r.is_zero() {
        Ordering::Equal
    } else if r.is_positive() {
        Ordering::Greater
    } else {
        Ordering::Less
    }
}

impl PartialOrd for Scalar {
    fn partial_cmp(&self, other: &Scalar) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scalar {
    /// Panics on mismatched radicands; engine code keeps one field per run.
    fn cmp(&self, other: &Scalar) -> Ordering {
        Scalar::compare(self, other).expect("scalars from different fields")
    }
}

macro_rules! scalar_binop {
    ($trait:ident, $method:ident, $checked:ident) => {
        impl $trait for &Scalar {
            type Output = Scalar;
            fn $method(self, rhs: &Scalar) -> Scalar {
                self.$checked(rhs).expect("scalars from different fields")
            }
        }
        impl $trait for Scalar {
            type Output = Scalar;
            fn $method(self, rhs: Scalar) -> Scalar {
                (&self).$method(&rhs)
            }
        }
        impl $trait<&Scalar> for Scalar {
            type Output = Scalar;
            fn $method(self, rhs: &Scalar) -> Scalar {
                (&self).$method(rhs)
            }
        }
        impl $trait<Scalar> for &Scalar {
            type Output = Scalar;
            fn $method(self, rhs: Scalar) -> Scalar {
                self.$method(&rhs)
            }
        }
    };
}

scalar_binop!(Add, add, checked_add);
scalar_binop!(Sub, sub, checked_sub);
scalar_binop!(Mul, mul, checked_mul);
scalar_binop!(Div, div, checked_div);

impl Neg for &Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        Scalar::normalize(-&self.rat, -&self.coef, self.radicand)
    }
}

impl Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        -&self
    }
}

impl std::iter::Sum for Scalar {
    fn sum<I: Iterator<Item = Scalar>>(iter: I) -> Scalar {
        iter.fold(Scalar::zero(), |acc, x| acc + x)
    }
}

impl<'a> std::iter::Sum<&'a Scalar> for Scalar {
    fn sum<I: Iterator<Item = &'a Scalar>>(iter: I) -> Scalar {
        iter.fold(Scalar::zero(), |acc, x| acc + x)
    }
}

fn fmt_ratio(r: &BigRational, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if r.denom().is_one() {
        write!(f, "{}", r.numer())
    } else {
        write!(f, "{}/{}", r.numer(), r.denom())
    }
}

impl fmt::Display for Scalar {
    /// Textual form used verbatim in all JSON documents: `p/q` for
    /// rationals, `p/q+r/s√d` (or `-r/s√d`) for extension elements.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coef.is_zero() {
            return fmt_ratio(&self.rat, f);
        }
        fmt_ratio(&self.rat, f)?;
        if self.coef.is_positive() {
            write!(f, "+")?;
            fmt_ratio(&self.coef, f)?;
        } else {
            write!(f, "-")?;
            fmt_ratio(&self.coef.abs(), f)?;
        }
        write!(f, "\u{221a}{}", self.radicand)
    }
}

fn parse_ratio(s: &str) -> Option<BigRational> {
    let s = s.trim();
    if let Some((p, q)) = s.split_once('/') {
        let num = BigInt::from_str(p.trim()).ok()?;
        let den = BigInt::from_str(q.trim()).ok()?;
        if den.is_zero() {
            return None;
        }
        Some(BigRational::new(num, den))
    } else {
        let num = BigInt::from_str(s).ok()?;
        Some(BigRational::from_integer(num))
    }
}

impl FromStr for Scalar {
    type Err = ExactError;

    /// Accepts the emitted forms plus `sqrt` as an ASCII alias for `√`.
    fn from_str(s: &str) -> Result<Self, ExactError> {
        let err = || ExactError::Parse(s.to_string());
        let text = s.trim().replace("sqrt", "\u{221a}");
        let (head, d) = match text.split_once('\u{221a}') {
            None => {
                let rat = parse_ratio(&text).ok_or_else(err)?;
                return Ok(Scalar::from_rational(rat));
            }
            Some((head, tail)) => {
                let d: u64 = tail.trim().parse().map_err(|_| err())?;
                (head.trim_end().to_string(), d)
            }
        };
        let d = Radicand::new(d).map_err(|_| err())?;
        // Split "p/q+r/s" at the sign that separates the two components,
        // skipping a leading sign on p.
        let bytes = head.as_bytes();
        let mut split = None;
        for (i, &b) in bytes.iter().enumerate().skip(1) {
            if (b == b'+' || b == b'-') && bytes[i - 1] != b'/' && bytes[i - 1] != b'+' {
                split = Some(i);
            }
        }
        let (rat, coef) = match split {
            Some(i) => {
                let rat = parse_ratio(&head[..i]).ok_or_else(err)?;
                let sign = if bytes[i] == b'-' { -1 } else { 1 };
                let coef = parse_ratio(&head[i + 1..]).ok_or_else(err)?
                    * BigRational::from_integer(BigInt::from(sign));
                (rat, coef)
            }
            None => {
                // No separator: the whole head is the radical coefficient,
                // as in "1/2√5"; an empty head means plain "√5".
                if head.is_empty() {
                    (BigRational::zero(), BigRational::one())
                } else {
                    (BigRational::zero(), parse_ratio(&head).ok_or_else(err)?)
                }
            }
        };
        Ok(Scalar::with_radical(rat, coef, d))
    }
}

impl Serialize for Scalar {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Scalar {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Scalar, D::Error> {
        let s = String::deserialize(deserializer)?;
        Scalar::from_str(&s).map_err(serde::de::Error::custom)
    }
}

/// (-1+√5)/2, the inverse golden ratio used by the two-agent demos.
pub fn golden_entitlement() -> Scalar {
    Scalar::with_radical(
        BigRational::new(BigInt::from(-1), BigInt::from(2)),
        BigRational::new(BigInt::from(1), BigInt::from(2)),
        Radicand::new(5).unwrap(),
    )
}

/// Scales a list of scalars onto one common denominator, returning the
/// per-scalar `(rat, coef)` integer numerators and the shared denominator.
/// Backbone of the integer fast paths in the enumeration modules.
pub fn common_denominator(values: &[&Scalar]) -> (Vec<(BigInt, BigInt)>, BigUint) {
    use num_integer::Integer;
    let mut den = BigInt::one();
    for v in values {
        den = den.lcm(v.rat.denom());
        den = den.lcm(v.coef.denom());
    }
    let scaled = values
        .iter()
        .map(|v| {
            (
                v.rat.numer() * (&den / v.rat.denom()),
                v.coef.numer() * (&den / v.coef.denom()),
            )
        })
        .collect();
    (scaled, den.to_biguint().expect("positive lcm"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(text: &str) -> Scalar {
        text.parse().unwrap()
    }

    #[test]
    fn golden_vs_three_fifths() {
        // (-1+√5)/2 vs 3/5: cross-multiplication gives √5 > 11/5 ⇔ 5 > 121/25.
        let g = golden_entitlement();
        assert_eq!(Scalar::compare(&g, &s("3/5")).unwrap(), Ordering::Greater);
    }

    #[test]
    fn equal_halves() {
        assert_eq!(
            Scalar::compare(&s("1/2"), &s("1/2")).unwrap(),
            Ordering::Equal
        );
    }

    #[test]
    fn sqrt_five_vs_nine_fourths() {
        // 0 + 1·√5 vs 9/4: 5 < 81/16.
        assert_eq!(
            Scalar::compare(&s("\u{221a}5"), &s("9/4")).unwrap(),
            Ordering::Less
        );
    }

    #[test]
    fn mismatched_radicands_error() {
        let a = s("1+1\u{221a}5");
        let b = s("1+1\u{221a}7");
        assert!(matches!(
            Scalar::compare(&a, &b),
            Err(ExactError::MismatchedRadicands(5, 7))
        ));
    }

    #[test]
    fn radicand_validation() {
        assert!(Radicand::new(0).is_ok());
        assert!(Radicand::new(1).is_err());
        assert!(Radicand::new(4).is_err());
        assert!(Radicand::new(5).is_ok());
        assert!(Radicand::new(12).is_err());
        assert!(Radicand::new(30).is_ok());
    }

    #[test]
    fn inversion_by_conjugate() {
        let g = golden_entitlement();
        let inv = g.checked_inv().unwrap();
        assert_eq!(g.checked_mul(&inv).unwrap(), Scalar::one());
        // 1/x for the inverse golden ratio is the golden ratio (1+√5)/2 = x+1.
        assert_eq!(inv, g.checked_add(&Scalar::one()).unwrap());
        assert!(matches!(
            Scalar::zero().checked_inv(),
            Err(ExactError::DivisionByZero)
        ));
    }

    #[test]
    fn display_round_trip_hand_cases() {
        for text in [
            "0",
            "1/2",
            "-3/7",
            "2",
            "-1/2+1/2\u{221a}5",
            "1/3-2/5\u{221a}5",
        ] {
            let v = s(text);
            assert_eq!(v.to_string(), text);
            assert_eq!(s(&v.to_string()), v);
        }
        assert_eq!(s("1/2+1/2sqrt5"), s("1/2+1/2\u{221a}5"));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_rational(cap: i64) -> impl Strategy<Value = BigRational> {
            (-cap..=cap, 1..=cap)
                .prop_map(|(p, q)| BigRational::new(BigInt::from(p), BigInt::from(q)))
        }

        fn arb_scalar(cap: i64) -> impl Strategy<Value = Scalar> {
            (arb_rational(cap), arb_rational(cap))
                .prop_map(|(rat, coef)| Scalar::with_radical(rat, coef, Radicand::new(5).unwrap()))
        }

        proptest! {
            #[test]
            fn field_axioms(a in arb_scalar(40), b in arb_scalar(40), c in arb_scalar(40)) {
                prop_assert_eq!(&(&a + &b) + &c, &a + &(&b + &c));
                prop_assert_eq!(&a + &b, &b + &a);
                prop_assert_eq!(&(&a * &b) * &c, &a * &(&b * &c));
                prop_assert_eq!(&a * &(&b + &c), &(&a * &b) + &(&a * &c));
                prop_assert_eq!(&a - &a, Scalar::zero());
                if !a.is_zero() {
                    prop_assert_eq!(&a * &a.checked_inv().unwrap(), Scalar::one());
                }
            }

            #[test]
            fn canonical_forms(a in arb_scalar(40), b in arb_scalar(40)) {
                let v = &a * &b;
                prop_assert!(v.rational_part().denom().is_positive());
                prop_assert!(v.radical_coef().denom().is_positive());
                if v.radical_coef().is_zero() {
                    prop_assert_eq!(v.radicand(), 0);
                }
            }

            #[test]
            fn serialization_round_trip(a in arb_scalar(1000)) {
                let text = serde_json::to_string(&a).unwrap();
                let back: Scalar = serde_json::from_str(&text).unwrap();
                prop_assert_eq!(a, back);
            }
        }
    }

    #[test]
    fn compare_agrees_with_float_oracle() {
        // Denominators are capped at 100, which keeps genuinely distinct
        // field elements at least ~1e-11 apart; f64 noise is far below that.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xE5AC7);
        let d = Radicand::new(5).unwrap();
        let random_scalar = |rng: &mut rand_chacha::ChaCha8Rng| {
            let q1 = rng.random_range(1..=100i64);
            let q2 = rng.random_range(1..=100i64);
            Scalar::with_radical(
                BigRational::new(
                    BigInt::from(rng.random_range(-100..=100i64)),
                    BigInt::from(q1),
                ),
                BigRational::new(
                    BigInt::from(rng.random_range(-100..=100i64)),
                    BigInt::from(q2),
                ),
                d,
            )
        };
        for _ in 0..10_000 {
            let a = random_scalar(&mut rng);
            let b = random_scalar(&mut rng);
            let exact = Scalar::compare(&a, &b).unwrap();
            let fa = a.to_f64();
            let fb = b.to_f64();
            if (fa - fb).abs() > 1e-9 {
                let float = if fa < fb {
                    Ordering::Less
                } else {
                    Ordering::Greater
                };
                assert_eq!(exact, float, "{a} vs {b}");
            } else {
                assert_eq!(exact, Ordering::Equal, "{a} vs {b}");
            }
        }
    }
}
