//! Entitlement profiles, the clonage/precision/fineness indices, the
//! closed-form query bound calculators, and adversary level schedules.
//!
//! Clonage is the least common denominator of the entitlements (infinite
//! when one is irrational), precision the largest reduced denominator,
//! fineness the least m with 1/m at or below the smallest positive
//! entitlement. The bound calculators evaluate their formulas by exact
//! integer search, never through floating logarithms.

use crate::exact::Scalar;
use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IndicesError {
    #[error("entitlements must lie in [0,1] and sum to exactly 1")]
    BadProfile,
    #[error("argument must be a positive integer")]
    NonPositiveArgument,
    #[error("bound requires at least two agents")]
    TooFewAgents,
    #[error("schedule for c* = {0} exceeds representable size")]
    ScheduleTooLarge(u32),
}

/// Per-agent shares in \[0,1\] summing to exactly 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Scalar>", into = "Vec<Scalar>")]
pub struct EntitlementProfile {
    entitlements: Vec<Scalar>,
}

impl EntitlementProfile {
    pub fn new(entitlements: Vec<Scalar>) -> Result<Self, IndicesError> {
        if entitlements.is_empty()
            || entitlements
                .iter()
                .any(|e| e.sign() == Ordering::Less || e > &Scalar::one())
            || entitlements.iter().sum::<Scalar>() != Scalar::one()
        {
            return Err(IndicesError::BadProfile);
        }
        Ok(EntitlementProfile { entitlements })
    }

    /// Equal shares 1/n.
    pub fn equal(n: usize) -> Self {
        EntitlementProfile {
            entitlements: vec![Scalar::ratio(1, n as i64); n],
        }
    }

    /// The two-agent profile ((-1+√5)/2, (3-√5)/2) behind the golden-ratio
    /// demos: the unique split where the first share equals the ratio of
    /// the second share to the first.
    pub fn golden() -> Self {
        let x = crate::exact::golden_entitlement();
        EntitlementProfile {
            entitlements: vec![x.clone(), Scalar::one() - x],
        }
    }

    pub fn agents(&self) -> usize {
        self.entitlements.len()
    }

    pub fn share(&self, agent: usize) -> &Scalar {
        &self.entitlements[agent]
    }

    pub fn shares(&self) -> &[Scalar] {
        &self.entitlements
    }
}

impl From<EntitlementProfile> for Vec<Scalar> {
    fn from(e: EntitlementProfile) -> Self {
        e.entitlements
    }
}

impl TryFrom<Vec<Scalar>> for EntitlementProfile {
    type Error = IndicesError;
    fn try_from(v: Vec<Scalar>) -> Result<Self, IndicesError> {
        EntitlementProfile::new(v)
    }
}

/// A positive integer index or infinity. Infinity is a distinguished
/// value, not a sentinel integer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IndexValue {
    Finite(BigUint),
    Infinite,
}

impl IndexValue {
    pub fn finite(&self) -> Option<&BigUint> {
        match self {
            IndexValue::Finite(v) => Some(v),
            IndexValue::Infinite => None,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, IndexValue::Infinite)
    }
}

impl PartialOrd for IndexValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for IndexValue {
    fn cmp(&self, other: &Self) -> Ordering {
        use IndexValue::*;
        match (self, other) {
            (Infinite, Infinite) => Ordering::Equal,
            (Infinite, Finite(_)) => Ordering::Greater,
            (Finite(_), Infinite) => Ordering::Less,
            (Finite(a), Finite(b)) => a.cmp(b),
        }
    }
}

impl fmt::Display for IndexValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IndexValue::Finite(v) => write!(f, "{v}"),
            IndexValue::Infinite => write!(f, "\u{221e}"),
        }
    }
}

impl Serialize for IndexValue {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            IndexValue::Finite(v) => s.serialize_str(&v.to_string()),
            IndexValue::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for IndexValue {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        if text == "inf" || text == "\u{221e}" {
            Ok(IndexValue::Infinite)
        } else {
            text.parse::<BigUint>()
                .map(IndexValue::Finite)
                .map_err(serde::de::Error::custom)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexReport {
    pub clonage: IndexValue,
    pub precision: IndexValue,
    #[serde(with = "biguint_string")]
    pub fineness: BigUint,
}

/// Decimal-string (de)serialization for big unsigned integers, matching
/// the textual forms used everywhere else in the JSON documents.
mod biguint_string {
    use num_bigint::BigUint;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Precision of a single share: the reduced denominator, infinite for an
/// extension-field (irrational) share.
pub fn share_precision(e: &Scalar) -> IndexValue {
    match e.rational_denominator() {
        Some(d) => IndexValue::Finite(d.to_biguint().expect("denominators are positive")),
        None => IndexValue::Infinite,
    }
}

/// Fineness of a single share: 1 for a zero share, else the least m with
/// 1/m at most the share, i.e. ceil(1/e).
fn share_fineness(e: &Scalar) -> BigUint {
    if e.is_zero() {
        return BigUint::one();
    }
    let mut m = BigUint::one();
    // For rational e = p/q this is ceil(q/p); for an irrational share walk
    // up from that of a rational lower bound. The walk is short because
    // shares live in (0, 1].
    if let Some(den) = e.rational_denominator() {
        let num = e.rational_part().numer();
        let (q, r) = den.div_rem(num);
        m = q.to_biguint().expect("positive share");
        if !r.is_zero() {
            m += BigUint::one();
        }
    } else {
        loop {
            let candidate = Scalar::from_rational(num_rational::BigRational::new(
                BigInt::one(),
                BigInt::from_biguint(num_bigint::Sign::Plus, m.clone()),
            ));
            if &candidate <= e {
                break;
            }
            m += BigUint::one();
        }
    }
    m
}

/// Clonage, precision, and fineness of a profile.
pub fn compute_indices(e: &EntitlementProfile) -> IndexReport {
    let mut clonage = BigUint::one();
    let mut precision = BigUint::one();
    let mut fineness = BigUint::one();
    let mut infinite = false;
    for share in e.shares() {
        match share_precision(share) {
            IndexValue::Finite(d) => {
                clonage = clonage.lcm(&d);
                precision = precision.max(d);
            }
            IndexValue::Infinite => infinite = true,
        }
        fineness = fineness.max(share_fineness(share));
    }
    if infinite {
        IndexReport {
            clonage: IndexValue::Infinite,
            precision: IndexValue::Infinite,
            fineness,
        }
    } else {
        IndexReport {
            clonage: IndexValue::Finite(clonage),
            precision: IndexValue::Finite(precision),
            fineness,
        }
    }
}

fn require_positive(v: &BigUint) -> Result<(), IndicesError> {
    if v.is_zero() {
        Err(IndicesError::NonPositiveArgument)
    } else {
        Ok(())
    }
}

/// max{c in N0 : p >= 2^(2^c - 1)}, the two-agent lower bound given a
/// precision level p, found by exact integer search.
pub fn precision_lower_bound(p: &BigUint) -> Result<u32, IndicesError> {
    require_positive(p)?;
    let mut c = 0u32;
    loop {
        let exponent = (1u64 << (c + 1)) - 1;
        let power = BigUint::one() << exponent;
        if &power > p {
            return Ok(c);
        }
        c += 1;
    }
}

/// max{k >= 0 : (2^(2^k - 1))^(n-1) <= c}, the main lower bound given a
/// clonage level c with n agents; 0 is the floor.
pub fn clonage_lower_bound(c: &BigUint, n: usize) -> Result<u32, IndicesError> {
    require_positive(c)?;
    if n < 2 {
        return Err(IndicesError::TooFewAgents);
    }
    let mut k = 0u32;
    loop {
        let exponent = ((1u64 << (k + 1)) - 1) * (n as u64 - 1);
        let power = BigUint::one() << exponent;
        if &power > c {
            return Ok(k);
        }
        k += 1;
    }
}

/// 2(n-1)·ceil(log2 c), the protocol upper bound for clonage c.
pub fn clonage_upper_bound(c: &BigUint, n: usize) -> Result<BigUint, IndicesError> {
    require_positive(c)?;
    if n < 2 {
        return Err(IndicesError::TooFewAgents);
    }
    let ceil_log2 = if c.is_one() {
        0
    } else {
        (c - BigUint::one()).bits()
    };
    Ok(BigUint::from(2 * (n as u64 - 1) * ceil_log2))
}

/// (n-1)·log3(f) reported as the exact pair plus a display approximation;
/// never used in control flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinenessBound {
    pub factor: u64,
    #[serde(with = "biguint_string")]
    pub fineness: BigUint,
    pub approx: f64,
}

pub fn fineness_lower_bound(f: &BigUint, n: usize) -> Result<FinenessBound, IndicesError> {
    require_positive(f)?;
    if n < 2 {
        return Err(IndicesError::TooFewAgents);
    }
    let factor = n as u64 - 1;
    let approx = factor as f64 * f.to_f64().unwrap_or(f64::INFINITY).ln() / 3f64.ln();
    Ok(FinenessBound {
        factor,
        fineness: f.clone(),
        approx,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleMode {
    /// l0 = 2^(3^c*), then l_{c+1} = floor(sqrt(l_c / 2)).
    Paper,
    /// The smallest l0 whose iterates stay at or above 2, built by the
    /// backward recurrence l_{c-1} = 2·l_c².
    Minimal,
}

impl fmt::Display for ScheduleMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScheduleMode::Paper => write!(f, "paper"),
            ScheduleMode::Minimal => write!(f, "minimal"),
        }
    }
}

/// One deficiency-level decay step.
pub fn next_level(level: &BigUint) -> BigUint {
    (level / BigUint::from(2u32)).sqrt()
}

/// The level schedule l_0..l_{c*} for the adversary; both modes end with
/// l_{c*} >= 2.
pub fn adversary_schedule(mode: ScheduleMode, c_star: u32) -> Result<Vec<BigUint>, IndicesError> {
    if c_star > 16 {
        return Err(IndicesError::ScheduleTooLarge(c_star));
    }
    match mode {
        ScheduleMode::Paper => {
            let exponent = 3u64.pow(c_star);
            let mut levels = vec![BigUint::one() << exponent];
            for _ in 0..c_star {
                let next = next_level(levels.last().unwrap());
                levels.push(next);
            }
            Ok(levels)
        }
        ScheduleMode::Minimal => {
            let mut levels = vec![BigUint::from(2u32)];
            for _ in 0..c_star {
                let last = levels.last().unwrap();
                levels.push(BigUint::from(2u32) * last * last);
            }
            levels.reverse();
            Ok(levels)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(parts: &[&str]) -> EntitlementProfile {
        EntitlementProfile::new(parts.iter().map(|p| p.parse().unwrap()).collect()).unwrap()
    }

    fn big(v: u64) -> BigUint {
        BigUint::from(v)
    }

    #[test]
    fn index_examples() {
        let r = compute_indices(&profile(&["1/2", "1/3", "1/10", "1/15"]));
        assert_eq!(r.clonage, IndexValue::Finite(big(30)));
        assert_eq!(r.precision, IndexValue::Finite(big(15)));

        let r = compute_indices(&EntitlementProfile::golden());
        assert!(r.clonage.is_infinite());
        assert!(r.precision.is_infinite());
        assert_eq!(r.fineness, big(3));

        let r = compute_indices(&profile(&["5/14", "9/14"]));
        assert_eq!(r.fineness, big(3));
        assert_eq!(r.precision, IndexValue::Finite(big(14)));

        let r = compute_indices(&profile(&["1"]));
        assert_eq!(r.clonage, IndexValue::Finite(big(1)));
        assert_eq!(r.precision, IndexValue::Finite(big(1)));
        assert_eq!(r.fineness, big(1));
    }

    #[test]
    fn bound_examples() {
        assert_eq!(precision_lower_bound(&big(1)).unwrap(), 0);
        assert_eq!(precision_lower_bound(&big(8)).unwrap(), 2);
        assert_eq!(clonage_lower_bound(&big(512), 2).unwrap(), 3);
        assert_eq!(clonage_upper_bound(&big(8), 3).unwrap(), big(12));
        assert_eq!(clonage_upper_bound(&big(1), 2).unwrap(), big(0));
        assert!(clonage_lower_bound(&big(4), 1).is_err());
        assert!(precision_lower_bound(&big(0)).is_err());
        let fb = fineness_lower_bound(&big(9), 3).unwrap();
        assert_eq!((fb.factor, fb.fineness), (2, big(9)));
        assert!((fb.approx - 4.0).abs() < 1e-9);
    }

    #[test]
    fn precision_bound_matches_bit_length_closed_form() {
        // floor(log2 log2 2p) over p = 1..2^20, via exact bit arithmetic:
        // p >= 2^(2^c - 1) iff bits(p) >= 2^c, so the max c is
        // bits(bits(p)) - 1.
        for p in 1u64..=(1 << 20) {
            let expected = 64 - u64::from(p.leading_zeros()); // bits(p)
            let expected = 64 - u32::try_from(expected.leading_zeros()).unwrap() - 1;
            assert_eq!(precision_lower_bound(&big(p)).unwrap(), expected, "p = {p}");
        }
    }

    #[test]
    fn schedule_examples() {
        let paper = adversary_schedule(ScheduleMode::Paper, 2).unwrap();
        assert_eq!(paper, vec![big(512), big(16), big(2)]);
        let minimal = adversary_schedule(ScheduleMode::Minimal, 2).unwrap();
        assert_eq!(minimal, vec![big(128), big(8), big(2)]);
        let minimal = adversary_schedule(ScheduleMode::Minimal, 3).unwrap();
        assert_eq!(minimal, vec![big(32768), big(128), big(8), big(2)]);
        assert_eq!(
            adversary_schedule(ScheduleMode::Paper, 0).unwrap(),
            vec![big(2)]
        );
    }

    #[test]
    fn schedules_decay_by_the_recurrence_and_stay_above_two() {
        for mode in [ScheduleMode::Paper, ScheduleMode::Minimal] {
            for c_star in 0..=6 {
                let levels = adversary_schedule(mode, c_star).unwrap();
                assert_eq!(levels.len() as u32, c_star + 1);
                for w in levels.windows(2) {
                    assert_eq!(w[1], next_level(&w[0]));
                }
                assert!(levels.last().unwrap() >= &big(2));
                // l_c >= 2^(2^(c*-c) - 1) along every generated schedule.
                for (c, level) in levels.iter().enumerate() {
                    let floor = BigUint::one() << ((1u64 << (c_star as usize - c)) - 1);
                    assert!(level >= &floor, "{mode} c*={c_star} c={c}");
                }
            }
        }
    }

    #[test]
    fn index_inequalities_hold_on_random_profiles() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x1D1CE5);
        for round in 0..10_000 {
            let n = 2 + (round % 5);
            let e = crate::sampling::random_entitlements(&mut rng, n, 60);
            let r = compute_indices(&e);
            let c = r.clonage.finite().expect("rational profile").clone();
            let p = r.precision.finite().unwrap().clone();
            assert!(c >= p, "C >= P");
            assert!(p >= r.fineness, "P >= F");
            assert!(p.pow(n as u32 - 1) >= c, "P^(n-1) >= C");
        }
    }

    #[test]
    fn fineness_never_bounds_precision() {
        // The family e^m: shares 1/2 ± 1/(2m+1); fineness is pinned at 3
        // while precision 4m+2 grows without bound.
        for m in 3i64..=100 {
            let lo = Scalar::ratio(1, 2) - Scalar::ratio(1, 2 * m + 1);
            let hi = Scalar::ratio(1, 2) + Scalar::ratio(1, 2 * m + 1);
            let e = EntitlementProfile::new(vec![lo, hi, Scalar::zero()]).unwrap();
            let r = compute_indices(&e);
            assert_eq!(r.fineness, big(3));
            assert_eq!(r.precision, IndexValue::Finite(big(4 * m as u64 + 2)));
        }
    }
}
