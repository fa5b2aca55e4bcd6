//! The interval cake (0,1] with the standard knife.
//!
//! Servings are canonical finite unions of half-open intervals; kitchen
//! measures are piecewise-constant strictly positive densities, which
//! realize both kitchen-measure axioms exactly: the only null serving is
//! the empty one, and every (serving, proportion) pair admits an exact
//! prefix cut.
//!
//! The knife block is the singleton standard knife t ↦ (0, t], so queries
//! carry no knife argument. A multi-knife kitchen (say, a square cake with
//! two axis knives) would reintroduce that argument and generalize
//! [`threshold_and_cut`]; nothing else in the engine depends on the knife
//! being one-dimensional.

use crate::exact::Scalar;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KitchenError {
    #[error("interval ({}, {}] is not inside (0, 1] or is empty", .0.0, .0.1)]
    BadInterval(Box<(Scalar, Scalar)>),
    #[error("measure breakpoints must start at 0, end at 1, and strictly increase")]
    BadBreakpoints,
    #[error("measure masses must be strictly positive and sum to 1")]
    BadMasses,
    #[error("proportion {0} is outside [0, 1]")]
    BadProportion(Box<Scalar>),
    #[error("profile has {0} agents, expected {1}")]
    WrongProfileSize(usize, usize),
}

pub type AgentId = usize;

/// A canonical finite union of half-open subintervals of (0,1]: sorted,
/// pairwise disjoint, maximally merged. The empty serving is the empty
/// list and is the only sliver on this kitchen.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<(Scalar, Scalar)>", into = "Vec<(Scalar, Scalar)>")]
pub struct Serving {
    intervals: Vec<(Scalar, Scalar)>,
}

impl Serving {
    pub fn empty() -> Self {
        Serving { intervals: vec![] }
    }

    /// The whole cake (0,1].
    pub fn whole() -> Self {
        Serving {
            intervals: vec![(Scalar::zero(), Scalar::one())],
        }
    }

    /// The standard knife's prefix (0, t], clamped to the cake.
    pub fn prefix(t: &Scalar) -> Self {
        if t.sign() != Ordering::Greater {
            Serving::empty()
        } else {
            Serving {
                intervals: vec![(Scalar::zero(), Scalar::min(t.clone(), Scalar::one()))],
            }
        }
    }

    /// Canonicalizes an arbitrary list of intervals (union semantics).
    pub fn from_intervals(
        intervals: impl IntoIterator<Item = (Scalar, Scalar)>,
    ) -> Result<Self, KitchenError> {
        let mut items: Vec<(Scalar, Scalar)> = Vec::new();
        for (lo, hi) in intervals {
            if lo.sign() == Ordering::Less || lo >= hi || hi > Scalar::one() {
                return Err(KitchenError::BadInterval(Box::new((lo, hi))));
            }
            items.push((lo, hi));
        }
        items.sort();
        let mut merged: Vec<(Scalar, Scalar)> = Vec::new();
        for (lo, hi) in items {
            match merged.last_mut() {
                Some((_, last_hi)) if lo <= *last_hi => {
                    if hi > *last_hi {
                        *last_hi = hi;
                    }
                }
                _ => merged.push((lo, hi)),
            }
        }
        Ok(Serving { intervals: merged })
    }

    pub fn intervals(&self) -> &[(Scalar, Scalar)] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Total interval length.
    pub fn length(&self) -> Scalar {
        self.intervals.iter().map(|(lo, hi)| hi - lo).sum()
    }

    /// Largest endpoint, i.e. the supremum of the serving; `None` if empty.
    pub fn sup(&self) -> Option<&Scalar> {
        self.intervals.last().map(|(_, hi)| hi)
    }

    pub fn union(&self, other: &Serving) -> Serving {
        Serving::from_intervals(self.intervals.iter().chain(other.intervals.iter()).cloned())
            .expect("operands are canonical")
    }

    pub fn intersect(&self, other: &Serving) -> Serving {
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.intervals.len() && j < other.intervals.len() {
            let (a_lo, a_hi) = &self.intervals[i];
            let (b_lo, b_hi) = &other.intervals[j];
            let lo = Scalar::max(a_lo.clone(), b_lo.clone());
            let hi = Scalar::min(a_hi.clone(), b_hi.clone());
            if lo < hi {
                out.push((lo, hi));
            }
            if a_hi <= b_hi {
                i += 1;
            } else {
                j += 1;
            }
        }
        Serving { intervals: out }
    }

    pub fn difference(&self, other: &Serving) -> Serving {
        let mut out: Vec<(Scalar, Scalar)> = Vec::new();
        for (lo, hi) in &self.intervals {
            let mut cursor = lo.clone();
            for (b_lo, b_hi) in &other.intervals {
                if b_hi <= &cursor {
                    continue;
                }
                if b_lo >= hi {
                    break;
                }
                if *b_lo > cursor {
                    out.push((cursor.clone(), Scalar::min(b_lo.clone(), hi.clone())));
                }
                cursor = Scalar::max(cursor, b_hi.clone());
                if cursor >= *hi {
                    break;
                }
            }
            if cursor < *hi {
                out.push((cursor, hi.clone()));
            }
        }
        Serving { intervals: out }
    }

    pub fn complement(&self) -> Serving {
        Serving::whole().difference(self)
    }

    pub fn contains(&self, other: &Serving) -> bool {
        other.difference(self).is_empty()
    }

    /// Membership of a single point x in (0,1].
    pub fn contains_point(&self, x: &Scalar) -> bool {
        self.intervals.iter().any(|(lo, hi)| lo < x && x <= hi)
    }
}

impl From<Serving> for Vec<(Scalar, Scalar)> {
    fn from(s: Serving) -> Self {
        s.intervals
    }
}

impl TryFrom<Vec<(Scalar, Scalar)>> for Serving {
    type Error = KitchenError;
    fn try_from(v: Vec<(Scalar, Scalar)>) -> Result<Self, KitchenError> {
        Serving::from_intervals(v)
    }
}

impl fmt::Display for Serving {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return write!(f, "\u{2205}");
        }
        for (i, (lo, hi)) in self.intervals.iter().enumerate() {
            if i > 0 {
                write!(f, " \u{222a} ")?;
            }
            write!(f, "({lo}, {hi}]")?;
        }
        Ok(())
    }
}

/// A piecewise-constant strictly positive probability density on (0,1],
/// stored as breakpoints 0 = t0 < ... < tk = 1 and per-segment masses.
/// The induced CDF is piecewise linear, continuous, strictly increasing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "MeasureDoc", into = "MeasureDoc")]
pub struct KitchenMeasure {
    breakpoints: Vec<Scalar>,
    masses: Vec<Scalar>,
    // cumulative mass up to each breakpoint, cached for CDF evaluation
    #[serde(skip)]
    cumulative: Vec<Scalar>,
}

fn cumulative_masses(masses: &[Scalar]) -> Vec<Scalar> {
    let mut cumulative = Vec::with_capacity(masses.len() + 1);
    cumulative.push(Scalar::zero());
    for m in masses {
        let last = cumulative.last().unwrap().clone();
        cumulative.push(last + m);
    }
    cumulative
}

#[derive(Serialize, Deserialize)]
struct MeasureDoc {
    breakpoints: Vec<Scalar>,
    masses: Vec<Scalar>,
}

impl From<KitchenMeasure> for MeasureDoc {
    fn from(m: KitchenMeasure) -> Self {
        MeasureDoc {
            breakpoints: m.breakpoints,
            masses: m.masses,
        }
    }
}

impl TryFrom<MeasureDoc> for KitchenMeasure {
    type Error = KitchenError;
    fn try_from(doc: MeasureDoc) -> Result<Self, KitchenError> {
        KitchenMeasure::new(doc.breakpoints, doc.masses)
    }
}

impl KitchenMeasure {
    pub fn new(breakpoints: Vec<Scalar>, masses: Vec<Scalar>) -> Result<Self, KitchenError> {
        if breakpoints.len() < 2
            || breakpoints.len() != masses.len() + 1
            || !breakpoints[0].is_zero()
            || breakpoints[breakpoints.len() - 1] != Scalar::one()
            || breakpoints.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(KitchenError::BadBreakpoints);
        }
        if masses.iter().any(|m| m.sign() != Ordering::Greater)
            || masses.iter().sum::<Scalar>() != Scalar::one()
        {
            return Err(KitchenError::BadMasses);
        }
        let cumulative = cumulative_masses(&masses);
        Ok(KitchenMeasure {
            breakpoints,
            masses,
            cumulative,
        })
    }

    pub fn uniform() -> Self {
        KitchenMeasure {
            breakpoints: vec![Scalar::zero(), Scalar::one()],
            cumulative: cumulative_masses(&[Scalar::one()]),
            masses: vec![Scalar::one()],
        }
    }

    /// Builds a measure from `(lo, hi, mass)` segments that partition (0,1].
    pub fn from_segments(
        segments: impl IntoIterator<Item = (Scalar, Scalar, Scalar)>,
    ) -> Result<Self, KitchenError> {
        let mut segs: Vec<(Scalar, Scalar, Scalar)> = segments.into_iter().collect();
        segs.sort_by(|a, b| a.0.cmp(&b.0));
        let mut breakpoints = vec![Scalar::zero()];
        let mut masses = Vec::new();
        for (lo, hi, mass) in segs {
            if &lo != breakpoints.last().unwrap() {
                return Err(KitchenError::BadBreakpoints);
            }
            breakpoints.push(hi);
            masses.push(mass);
        }
        KitchenMeasure::new(breakpoints, masses)
    }

    pub fn breakpoints(&self) -> &[Scalar] {
        &self.breakpoints
    }

    pub fn masses(&self) -> &[Scalar] {
        &self.masses
    }

    /// CDF at x, for x in \[0,1\].
    pub fn cdf(&self, x: &Scalar) -> Scalar {
        for (i, mass) in self.masses.iter().enumerate() {
            let (lo, hi) = (&self.breakpoints[i], &self.breakpoints[i + 1]);
            if x >= hi {
                continue;
            }
            if x > lo {
                return &self.cumulative[i] + &(mass * &((x - lo) / &(hi - lo)));
            }
            return self.cumulative[i].clone();
        }
        self.cumulative[self.masses.len()].clone()
    }

    /// The measure of a serving: additive, monotone, total mass 1, zero
    /// exactly on the empty serving.
    pub fn value(&self, s: &Serving) -> Scalar {
        s.intervals()
            .iter()
            .map(|(lo, hi)| self.cdf(hi) - self.cdf(lo))
            .sum()
    }

    /// Least t with value(S ∩ (0,t]) = target, for 0 <= target <= value(S).
    /// Walks S's intervals refined by the measure's breakpoints and inverts
    /// the CDF inside the segment where the running mass reaches the target.
    fn prefix_threshold(&self, s: &Serving, target: &Scalar) -> Scalar {
        if target.sign() != Ordering::Greater {
            return Scalar::zero();
        }
        let mut acc = Scalar::zero();
        for (lo, hi) in s.intervals() {
            let gain = self.cdf(hi) - self.cdf(lo);
            if &(&acc + &gain) < target {
                acc = acc + gain;
                continue;
            }
            // The crossing lies in (lo, hi]; refine by measure segments.
            let mut cursor = lo.clone();
            for (i, mass) in self.masses.iter().enumerate() {
                let (b_lo, b_hi) = (&self.breakpoints[i], &self.breakpoints[i + 1]);
                if b_hi <= &cursor {
                    continue;
                }
                if b_lo >= hi {
                    break;
                }
                let seg_lo = Scalar::max(cursor.clone(), b_lo.clone());
                let seg_hi = Scalar::min(hi.clone(), b_hi.clone());
                let density = mass / &(b_hi - b_lo);
                let seg_gain = &density * &(&seg_hi - &seg_lo);
                let need = target - &acc;
                if seg_gain >= need {
                    return &seg_lo + &(&need / &density);
                }
                acc = acc + seg_gain;
                cursor = seg_hi;
            }
        }
        // target exceeds value(S) only through caller error; land at 1.
        Scalar::one()
    }
}

/// A Robertson-Webb query: a cutter, a serving, and a target proportion.
/// The knife argument is omitted because the knife block here is the
/// singleton standard knife.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "QueryDoc", into = "QueryDoc")]
pub struct Query {
    pub cutter: AgentId,
    pub serving: Serving,
    pub proportion: Scalar,
}

#[derive(Serialize, Deserialize)]
struct QueryDoc {
    cutter: AgentId,
    serving: Serving,
    proportion: Scalar,
}

impl From<Query> for QueryDoc {
    fn from(q: Query) -> Self {
        QueryDoc {
            cutter: q.cutter,
            serving: q.serving,
            proportion: q.proportion,
        }
    }
}

impl TryFrom<QueryDoc> for Query {
    type Error = KitchenError;
    fn try_from(doc: QueryDoc) -> Result<Self, KitchenError> {
        Query::new(doc.cutter, doc.serving, doc.proportion)
    }
}

impl Query {
    pub fn new(
        cutter: AgentId,
        serving: Serving,
        proportion: Scalar,
    ) -> Result<Self, KitchenError> {
        if proportion.sign() == Ordering::Less || proportion > Scalar::one() {
            return Err(KitchenError::BadProportion(Box::new(proportion)));
        }
        Ok(Query {
            cutter,
            serving,
            proportion,
        })
    }
}

/// The (q|μ_i)-threshold and cut piece: tau is the least knife parameter at
/// which the prefix of the serving reaches the target value, and the piece
/// is S ∩ (0, tau]. The piece's value equals proportion · value(S) exactly.
pub fn threshold_and_cut(measure: &KitchenMeasure, q: &Query) -> (Scalar, Serving) {
    let total = measure.value(&q.serving);
    let target = &q.proportion * &total;
    let tau = measure.prefix_threshold(&q.serving, &target);
    let piece = q.serving.intersect(&Serving::prefix(&tau));
    (tau, piece)
}

/// A finite record: servings with per-agent appraisals.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    pub entries: Vec<(Serving, Vec<Scalar>)>,
}

/// The (q|μ)-response: both the queried serving and the cutter's piece,
/// appraised by every agent.
pub fn respond(q: &Query, profile: &[KitchenMeasure]) -> Record {
    let (_, piece) = threshold_and_cut(&profile[q.cutter], q);
    let appraise = |s: &Serving| profile.iter().map(|m| m.value(s)).collect::<Vec<_>>();
    Record {
        entries: vec![
            (q.serving.clone(), appraise(&q.serving)),
            (piece.clone(), appraise(&piece)),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sc(text: &str) -> Scalar {
        text.parse().unwrap()
    }

    fn serving(pairs: &[(&str, &str)]) -> Serving {
        Serving::from_intervals(pairs.iter().map(|(a, b)| (sc(a), sc(b)))).unwrap()
    }

    /// Density 2 on (0,1/4], 2/3 on (1/4,1]: masses 1/2 and 1/2.
    fn skewed() -> KitchenMeasure {
        KitchenMeasure::new(
            vec![sc("0"), sc("1/4"), sc("1")],
            vec![sc("1/2"), sc("1/2")],
        )
        .unwrap()
    }

    #[test]
    fn measure_value_examples() {
        let u = KitchenMeasure::uniform();
        assert_eq!(u.value(&Serving::whole()), Scalar::one());
        assert_eq!(
            u.value(&serving(&[("0", "1/4"), ("1/2", "3/4")])),
            sc("1/2")
        );
        // Hand CDF: F(1/2) = 1/2 + (1/4)(2/3) = 2/3.
        assert_eq!(skewed().value(&serving(&[("0", "1/2")])), sc("2/3"));
    }

    #[test]
    fn threshold_examples() {
        let u = KitchenMeasure::uniform();
        let q = Query::new(0, Serving::whole(), sc("1/2")).unwrap();
        let (tau, piece) = threshold_and_cut(&u, &q);
        assert_eq!(tau, sc("1/2"));
        assert_eq!(piece, serving(&[("0", "1/2")]));

        let q = Query::new(0, serving(&[("1/2", "1")]), sc("1/2")).unwrap();
        let (tau, piece) = threshold_and_cut(&u, &q);
        assert_eq!(tau, sc("3/4"));
        assert_eq!(piece, serving(&[("1/2", "3/4")]));

        // Invert the skewed CDF by hand: need 1/4 of total mass, density 2.
        let q = Query::new(0, Serving::whole(), sc("1/4")).unwrap();
        let (tau, _) = threshold_and_cut(&skewed(), &q);
        assert_eq!(tau, sc("1/8"));

        let q = Query::new(0, serving(&[("1/3", "2/3")]), sc("0")).unwrap();
        let (tau, piece) = threshold_and_cut(&skewed(), &q);
        assert_eq!(tau, Scalar::zero());
        assert!(piece.is_empty());
    }

    #[test]
    fn respond_examples() {
        let u = KitchenMeasure::uniform();
        let q = Query::new(0, Serving::whole(), sc("1/2")).unwrap();
        let r = respond(&q, &[u.clone(), u.clone()]);
        assert_eq!(r.entries[0], (Serving::whole(), vec![sc("1"), sc("1")]));
        assert_eq!(
            r.entries[1],
            (serving(&[("0", "1/2")]), vec![sc("1/2"), sc("1/2")])
        );

        // Second agent: density 1/2 on (0,1/2], 3/2 on (1/2,1].
        let tilted = KitchenMeasure::new(
            vec![sc("0"), sc("1/2"), sc("1")],
            vec![sc("1/4"), sc("3/4")],
        )
        .unwrap();
        let r = respond(&q, &[u.clone(), tilted]);
        assert_eq!(r.entries[1].1, vec![sc("1/2"), sc("1/4")]);

        let q = Query::new(0, Serving::whole(), sc("1")).unwrap();
        let r = respond(&q, &[u.clone(), u]);
        assert_eq!(r.entries[1].0, Serving::whole());
    }

    #[test]
    fn canonicalization_merges_and_sorts() {
        let s = serving(&[("1/2", "3/4"), ("0", "1/4"), ("1/4", "1/2")]);
        assert_eq!(s, serving(&[("0", "3/4")]));
        assert!(Serving::from_intervals(vec![(sc("1/2"), sc("1/2"))]).is_err());
        assert!(Serving::from_intervals(vec![(sc("1/2"), sc("9/8"))]).is_err());
    }

    #[test]
    fn set_ops_agree_with_point_sampling() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5E7);
        let random_serving = |rng: &mut rand_chacha::ChaCha8Rng| {
            let mut cuts: Vec<i64> = (0..6).map(|_| rng.random_range(0..=24)).collect();
            cuts.sort_unstable();
            cuts.dedup();
            let mut intervals = Vec::new();
            for pair in cuts.chunks(2) {
                if let [a, b] = pair {
                    intervals.push((Scalar::ratio(*a, 24), Scalar::ratio(*b, 24)));
                }
            }
            Serving::from_intervals(intervals).unwrap()
        };
        for _ in 0..200 {
            let a = random_serving(&mut rng);
            let b = random_serving(&mut rng);
            let (u, i, d, c) = (
                a.union(&b),
                a.intersect(&b),
                a.difference(&b),
                a.complement(),
            );
            for k in 1..=200i64 {
                let x = Scalar::ratio(k, 200);
                let (in_a, in_b) = (a.contains_point(&x), b.contains_point(&x));
                assert_eq!(u.contains_point(&x), in_a || in_b);
                assert_eq!(i.contains_point(&x), in_a && in_b);
                assert_eq!(d.contains_point(&x), in_a && !in_b);
                assert_eq!(c.contains_point(&x), !in_a);
            }
            let again = Serving::from_intervals(u.intervals().to_vec()).unwrap();
            assert_eq!(again, u);
        }
    }

    #[test]
    fn threshold_identity_and_minimality() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x11D);
        for round in 0..1000 {
            let m = crate::sampling::random_measure(&mut rng, 4);
            let s = crate::sampling::random_serving(&mut rng, 3, 40);
            if s.is_empty() {
                continue;
            }
            let p = if round % 5 == 0 {
                // Exercise irrational proportions too.
                sc("-1/2+1/2\u{221a}5")
            } else {
                let den = rng.random_range(1..=30i64);
                Scalar::ratio(rng.random_range(0..=den), den)
            };
            let q = Query::new(0, s.clone(), p.clone()).unwrap();
            let (tau, piece) = threshold_and_cut(&m, &q);
            assert_eq!(m.value(&piece), &p * &m.value(&s), "identity");
            assert!(piece == s.intersect(&Serving::prefix(&tau)));
            // Minimality: a slightly earlier knife stop falls short.
            if tau.sign() == Ordering::Greater {
                for denom in [7i64, 97, 1009] {
                    let t = &tau * &Scalar::ratio(denom - 1, denom);
                    let early = m.value(&s.intersect(&Serving::prefix(&t)));
                    assert!(early < &p * &m.value(&s));
                }
            }
        }
    }
}
