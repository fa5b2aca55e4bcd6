//! Two-agent hyperallocation values and the brute-force ℓ-deficiency
//! decision procedure.
//!
//! A record is ℓ-deficient when no hyperallocation over at most ℓ cake
//! replicas is simultaneously acceptable to agent 1 (value at least e1 by
//! agent 1's appraisal) and conceded by agent 2 (value at most e1 by agent
//! 2's). Hyperallocation values depend only on the per-cell weight vector,
//! so the checker enumerates weight vectors, grouped by exact value pairs
//! and pruned on both constraints. The checker is an exactness oracle: it
//! reports an infeasible instance rather than approximating when the node
//! budget runs out.

use crate::exact::{common_denominator, Scalar};
use crate::kitchen::AgentId;
use crate::records::PartitionRecord;
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DeficiencyError {
    #[error("deficiency is defined for two-agent records, got {0} agents")]
    NotTwoAgents(usize),
    #[error("level must be at least 1")]
    BadLevel,
    #[error("weights are not aligned with the record's cells")]
    MisalignedWeights,
    #[error("enumeration budget exhausted after {0} nodes; instance reported infeasible")]
    Infeasible(u64),
    #[error("record is not {0}-deficient")]
    NotDeficient(u64),
}

/// Node budget for one enumeration call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnumerationBudget(pub u64);

impl Default for EnumerationBudget {
    fn default() -> Self {
        EnumerationBudget(20_000_000)
    }
}

/// r replicas of the cake plus one weight per cell: agent 1 receives the
/// cell in exactly that many replicas. Two hyperallocations with the same
/// weight vector have the same extended value for every agent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightedHyperallocation {
    pub replicas: u64,
    pub weights: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum DeficiencyVerdict {
    Deficient,
    Counterexample(WeightedHyperallocation),
}

impl DeficiencyVerdict {
    pub fn is_deficient(&self) -> bool {
        matches!(self, DeficiencyVerdict::Deficient)
    }
}

/// Σ_A w_A · α_agent(A) / r, the hyperallocation extension.
pub fn hyper_value(
    record: &PartitionRecord,
    agent: AgentId,
    h: &WeightedHyperallocation,
) -> Result<Scalar, DeficiencyError> {
    if h.weights.len() != record.cells().len() {
        return Err(DeficiencyError::MisalignedWeights);
    }
    if h.replicas == 0 || h.weights.iter().any(|&w| w > h.replicas) {
        return Err(DeficiencyError::BadLevel);
    }
    let total: Scalar = record
        .agent_values(agent)
        .iter()
        .zip(&h.weights)
        .map(|(v, &w)| v * &Scalar::from_integer(w as i64))
        .sum();
    Ok(total / Scalar::from_integer(h.replicas as i64))
}

/// Decides ℓ-deficiency of a two-agent record with the distinguished agent
/// 1 and threshold e1; callers canonicalize roles.
pub fn is_deficient(
    record: &PartitionRecord,
    e1: &Scalar,
    level: u64,
    budget: EnumerationBudget,
) -> Result<DeficiencyVerdict, DeficiencyError> {
    if record.agents() != 2 {
        return Err(DeficiencyError::NotTwoAgents(record.agents()));
    }
    is_deficient_values(
        record.agent_values(0),
        record.agent_values(1),
        e1,
        level,
        budget,
    )
}

/// The least deficit max{e1 - value1(h), value2(h) - e1} over hyperallocations
/// of a level-deficient record; strictly positive by deficiency.
pub fn min_deficit(
    record: &PartitionRecord,
    e1: &Scalar,
    level: u64,
    budget: EnumerationBudget,
) -> Result<Scalar, DeficiencyError> {
    if record.agents() != 2 {
        return Err(DeficiencyError::NotTwoAgents(record.agents()));
    }
    min_deficit_values(
        record.agent_values(0),
        record.agent_values(1),
        e1,
        level,
        budget,
    )
}

pub(crate) fn is_deficient_values(
    values1: &[Scalar],
    values2: &[Scalar],
    e1: &Scalar,
    level: u64,
    budget: EnumerationBudget,
) -> Result<DeficiencyVerdict, DeficiencyError> {
    if level == 0 {
        return Err(DeficiencyError::BadLevel);
    }
    let table = scaled::ScaledTable::build_for_level(values1, values2, e1, level);
    let hit = table.search(level, budget, scaled::Goal::Counterexample)?;
    Ok(match hit {
        Some((replicas, weights)) => {
            DeficiencyVerdict::Counterexample(WeightedHyperallocation { replicas, weights })
        }
        None => DeficiencyVerdict::Deficient,
    })
}

pub(crate) fn min_deficit_values(
    values1: &[Scalar],
    values2: &[Scalar],
    e1: &Scalar,
    level: u64,
    budget: EnumerationBudget,
) -> Result<Scalar, DeficiencyError> {
    if level == 0 {
        return Err(DeficiencyError::BadLevel);
    }
    let table = scaled::ScaledTable::build_for_level(values1, values2, e1, level);
    table.min_deficit(level, budget)
}

/// Exact integer arithmetic on values scaled to a common denominator:
/// every appraisal becomes a pair (rat, coef) meaning (rat + coef√d)/den.
/// An i128 path handles instances whose linear combinations provably fit;
/// everything else runs on big integers.
pub(crate) mod scaled {
    use super::*;

    /// rat + coef·√d, in units of the table's common denominator.
    #[derive(Debug, Clone, PartialEq, Eq)]
    pub(crate) struct QPair<T> {
        pub rat: T,
        pub coef: T,
    }

    pub(crate) trait Coef: Clone + Ord + std::fmt::Debug {
        fn zero() -> Self;
        fn to_bigint(&self) -> BigInt;
        fn add(&self, o: &Self) -> Self;
        fn sub(&self, o: &Self) -> Self;
        fn mul_u64(&self, k: u64) -> Self;
        /// Sign of rat + coef·√d via the rational sign case split.
        fn sign_pair(rat: &Self, coef: &Self, d: u64) -> Ordering;
    }

    impl Coef for i128 {
        fn zero() -> Self {
            0
        }
        fn to_bigint(&self) -> BigInt {
            BigInt::from(*self)
        }
        fn add(&self, o: &Self) -> Self {
            self + o
        }
        fn sub(&self, o: &Self) -> Self {
            self - o
        }
        fn mul_u64(&self, k: u64) -> Self {
            self * k as i128
        }
        fn sign_pair(rat: &Self, coef: &Self, d: u64) -> Ordering {
            if *coef == 0 {
                return rat.cmp(&0);
            }
            if *rat == 0 {
                return coef.cmp(&0);
            }
            match (rat.cmp(&0), coef.cmp(&0)) {
                (Ordering::Greater, Ordering::Greater) => Ordering::Greater,
                (Ordering::Less, Ordering::Less) => Ordering::Less,
                (sr, _) => {
                    // Mixed signs: compare rat² with coef²·d, escalating to
                    // big integers if the squares overflow.
                    let exact = rat.checked_mul(*rat).zip(
                        coef.checked_mul(*coef)
                            .and_then(|c2| c2.checked_mul(d as i128)),
                    );
                    let ord = match exact {
                        Some((r2, c2d)) => r2.cmp(&c2d),
                        None => {
                            let r2 = BigInt::from(*rat) * BigInt::from(*rat);
                            let c2d = BigInt::from(*coef) * BigInt::from(*coef) * BigInt::from(d);
                            r2.cmp(&c2d)
                        }
                    };
                    match ord {
                        Ordering::Greater => sr,
                        Ordering::Less => sr.reverse(),
                        Ordering::Equal => unreachable!("√d is irrational"),
                    }
                }
            }
        }
    }

    impl Coef for BigInt {
        fn zero() -> Self {
            <BigInt as Zero>::zero()
        }
        fn to_bigint(&self) -> BigInt {
            self.clone()
        }
        fn add(&self, o: &Self) -> Self {
            self + o
        }
        fn sub(&self, o: &Self) -> Self {
            self - o
        }
        fn mul_u64(&self, k: u64) -> Self {
            self * BigInt::from(k)
        }
        fn sign_pair(rat: &Self, coef: &Self, d: u64) -> Ordering {
            if Zero::is_zero(coef) {
                return rat.cmp(&<BigInt as Zero>::zero());
            }
            if Zero::is_zero(rat) {
                return coef.cmp(&<BigInt as Zero>::zero());
            }
            match (rat.is_positive(), coef.is_positive()) {
                (true, true) => Ordering::Greater,
                (false, false) => Ordering::Less,
                (sr, _) => {
                    let r2 = rat * rat;
                    let c2d = coef * coef * BigInt::from(d);
                    match r2.cmp(&c2d) {
                        Ordering::Greater => {
                            if sr {
                                Ordering::Greater
                            } else {
                                Ordering::Less
                            }
                        }
                        Ordering::Less => {
                            if sr {
                                Ordering::Less
                            } else {
                                Ordering::Greater
                            }
                        }
                        Ordering::Equal => unreachable!("√d is irrational"),
                    }
                }
            }
        }
    }

    impl<T: Coef> QPair<T> {
        pub fn zero() -> Self {
            QPair {
                rat: T::zero(),
                coef: T::zero(),
            }
        }
        pub fn add(&self, o: &Self) -> Self {
            QPair {
                rat: self.rat.add(&o.rat),
                coef: self.coef.add(&o.coef),
            }
        }
        pub fn sub(&self, o: &Self) -> Self {
            QPair {
                rat: self.rat.sub(&o.rat),
                coef: self.coef.sub(&o.coef),
            }
        }
        pub fn mul_u64(&self, k: u64) -> Self {
            QPair {
                rat: self.rat.mul_u64(k),
                coef: self.coef.mul_u64(k),
            }
        }
        pub fn sign(&self, d: u64) -> Ordering {
            T::sign_pair(&self.rat, &self.coef, d)
        }
        pub fn cmp_in(&self, other: &Self, d: u64) -> Ordering {
            self.sub(other).sign(d)
        }
    }

    /// Cells deduped by exact value pairs; a group's total weight ranges
    /// over 0..=count·r and any total is realizable with per-cell weights
    /// at most r.
    struct Group<T> {
        v1: QPair<T>,
        v2: QPair<T>,
        count: u64,
        members: Vec<usize>,
    }

    enum Backend {
        Fast(Vec<Group<i128>>, QPair<i128>),
        Big(Vec<Group<BigInt>>, QPair<BigInt>),
    }

    pub(crate) struct ScaledTable {
        backend: Backend,
        pub radicand: u64,
        pub denominator: BigUint,
        cell_count: usize,
    }

    #[derive(Clone, Copy, PartialEq, Eq)]
    pub(crate) enum Goal {
        Counterexample,
    }

    pub(crate) fn scale_all(values: &[&Scalar]) -> (Vec<QPair<BigInt>>, BigUint, u64) {
        let radicand = values.iter().map(|v| v.radicand()).max().unwrap_or(0);
        let (pairs, den) = common_denominator(values);
        let pairs = pairs
            .into_iter()
            .map(|(rat, coef)| QPair { rat, coef })
            .collect();
        (pairs, den, radicand)
    }

    fn try_narrow(
        pairs: &[QPair<BigInt>],
        cells: usize,
        level_hint: u64,
    ) -> Option<Vec<QPair<i128>>> {
        // Headroom is quadratic in the level: linear combinations touch
        // (cells+2)·(level+1) terms and the deficit comparison multiplies
        // them by a replica count once more.
        let mut magnitude = BigUint::zero();
        for p in pairs {
            magnitude = magnitude.max(p.rat.magnitude().clone());
            magnitude = magnitude.max(p.coef.magnitude().clone());
        }
        let factor = BigUint::from(4 * (cells as u64 + 2))
            * BigUint::from(level_hint.saturating_add(1))
            * BigUint::from(level_hint.saturating_add(1));
        if (magnitude * factor).bits() >= 126 {
            return None;
        }
        pairs
            .iter()
            .map(|p| {
                Some(QPair {
                    rat: p.rat.to_i128()?,
                    coef: p.coef.to_i128()?,
                })
            })
            .collect()
    }

    impl ScaledTable {
        pub fn build_for_level(
            values1: &[Scalar],
            values2: &[Scalar],
            e1: &Scalar,
            level_hint: u64,
        ) -> ScaledTable {
            let cells = values1.len();
            let mut refs: Vec<&Scalar> = Vec::with_capacity(2 * cells + 1);
            refs.extend(values1);
            refs.extend(values2);
            refs.push(e1);
            let (pairs, denominator, radicand) = scale_all(&refs);
            let backend = match try_narrow(&pairs, cells, level_hint) {
                Some(narrow) => {
                    let groups = group_cells(&narrow[..cells], &narrow[cells..2 * cells], radicand);
                    Backend::Fast(groups, narrow[2 * cells].clone())
                }
                None => {
                    let groups = group_cells(&pairs[..cells], &pairs[cells..2 * cells], radicand);
                    Backend::Big(groups, pairs[2 * cells].clone())
                }
            };
            ScaledTable {
                backend,
                radicand,
                denominator,
                cell_count: cells,
            }
        }

        /// Searches for a weight vector with value1 >= e1 and value2 <= e1.
        /// `Ok(None)` means deficient: the whole space was excluded.
        pub fn search(
            &self,
            level: u64,
            budget: EnumerationBudget,
            _goal: Goal,
        ) -> Result<Option<(u64, Vec<u64>)>, DeficiencyError> {
            match &self.backend {
                Backend::Fast(groups, e1) => {
                    search_counterexample(groups, e1, level, self.radicand, budget, self.cell_count)
                }
                Backend::Big(groups, e1) => {
                    search_counterexample(groups, e1, level, self.radicand, budget, self.cell_count)
                }
            }
        }

        pub fn min_deficit(
            &self,
            level: u64,
            budget: EnumerationBudget,
        ) -> Result<Scalar, DeficiencyError> {
            let (m, r) = match &self.backend {
                Backend::Fast(groups, e1) => {
                    let (m, r) = search_min_deficit(groups, e1, level, self.radicand, budget)?;
                    (
                        QPair {
                            rat: m.rat.to_bigint(),
                            coef: m.coef.to_bigint(),
                        },
                        r,
                    )
                }
                Backend::Big(groups, e1) => {
                    search_min_deficit(groups, e1, level, self.radicand, budget)?
                }
            };
            let den = BigInt::from_biguint(num_bigint::Sign::Plus, self.denominator.clone())
                * BigInt::from(r);
            let rat = BigRational::new(m.rat, den.clone());
            let coef = BigRational::new(m.coef, den);
            Ok(Scalar::with_radical(
                rat,
                coef,
                crate::exact::Radicand::new(self.radicand).expect("validated at construction"),
            ))
        }
    }

    fn group_cells<T: Coef>(v1: &[QPair<T>], v2: &[QPair<T>], d: u64) -> Vec<Group<T>> {
        let mut groups: Vec<Group<T>> = Vec::new();
        for (idx, (a, b)) in v1.iter().zip(v2).enumerate() {
            match groups.iter_mut().find(|g| &g.v1 == a && &g.v2 == b) {
                Some(g) => {
                    g.count += 1;
                    g.members.push(idx);
                }
                None => groups.push(Group {
                    v1: a.clone(),
                    v2: b.clone(),
                    count: 1,
                    members: vec![idx],
                }),
            }
        }
        // Large second-agent values first so the concession bound prunes
        // close to the root.
        groups.sort_by(|a, b| QPair::cmp_in(&b.v2, &a.v2, d).then(a.members[0].cmp(&b.members[0])));
        groups
    }

    struct SearchCtx<'a, T: Coef> {
        groups: &'a [Group<T>],
        d: u64,
        target: QPair<T>,
        r: u64,
        suffix_max1: Vec<QPair<T>>,
        nodes: &'a mut u64,
        max_nodes: u64,
    }

    fn search_counterexample<T: Coef>(
        groups: &[Group<T>],
        e1: &QPair<T>,
        level: u64,
        d: u64,
        budget: EnumerationBudget,
        cell_count: usize,
    ) -> Result<Option<(u64, Vec<u64>)>, DeficiencyError> {
        let mut nodes = 0u64;
        for r in 1..=level {
            let target = e1.mul_u64(r);
            let mut suffix_max1 = vec![QPair::zero(); groups.len() + 1];
            for i in (0..groups.len()).rev() {
                suffix_max1[i] = suffix_max1[i + 1].add(&groups[i].v1.mul_u64(groups[i].count * r));
            }
            let mut ctx = SearchCtx {
                groups,
                d,
                target,
                r,
                suffix_max1,
                nodes: &mut nodes,
                max_nodes: budget.0,
            };
            let mut chosen = vec![0u64; groups.len()];
            if dfs_counterexample(&mut ctx, 0, &QPair::zero(), &QPair::zero(), &mut chosen)? {
                let mut weights = vec![0u64; cell_count];
                for (g, &total) in groups.iter().zip(chosen.iter()) {
                    let mut rest = total;
                    for &m in &g.members {
                        let take = rest.min(r);
                        weights[m] = take;
                        rest -= take;
                    }
                }
                return Ok(Some((r, weights)));
            }
        }
        Ok(None)
    }

    fn dfs_counterexample<T: Coef>(
        ctx: &mut SearchCtx<'_, T>,
        g: usize,
        s1: &QPair<T>,
        s2: &QPair<T>,
        chosen: &mut [u64],
    ) -> Result<bool, DeficiencyError> {
        *ctx.nodes += 1;
        if *ctx.nodes > ctx.max_nodes {
            return Err(DeficiencyError::Infeasible(*ctx.nodes));
        }
        if g == ctx.groups.len() {
            return Ok(s1.cmp_in(&ctx.target, ctx.d) != Ordering::Less
                && s2.cmp_in(&ctx.target, ctx.d) != Ordering::Greater);
        }
        // Acceptance can no longer be reached even taking everything left.
        if s1.add(&ctx.suffix_max1[g]).cmp_in(&ctx.target, ctx.d) == Ordering::Less {
            return Ok(false);
        }
        // Concession already lost; later weights only push value2 higher.
        if s2.cmp_in(&ctx.target, ctx.d) == Ordering::Greater {
            return Ok(false);
        }
        let group = &ctx.groups[g];
        let cap = group.count * ctx.r;
        let mut t1 = s1.clone();
        let mut t2 = s2.clone();
        for w in 0..=cap {
            if w > 0 {
                t1 = t1.add(&group.v1);
                t2 = t2.add(&group.v2);
                if t2.cmp_in(&ctx.target, ctx.d) == Ordering::Greater {
                    break;
                }
            }
            chosen[g] = w;
            if dfs_counterexample(ctx, g + 1, &t1, &t2, chosen)? {
                return Ok(true);
            }
        }
        chosen[g] = 0;
        Ok(false)
    }

    fn search_min_deficit<T: Coef>(
        groups: &[Group<T>],
        e1: &QPair<T>,
        level: u64,
        d: u64,
        budget: EnumerationBudget,
    ) -> Result<(QPair<T>, u64), DeficiencyError> {
        let mut nodes = 0u64;
        let mut best: Option<(QPair<T>, u64)> = None;
        for r in 1..=level {
            let target = e1.mul_u64(r);
            let mut suffix_max1 = vec![QPair::zero(); groups.len() + 1];
            for i in (0..groups.len()).rev() {
                suffix_max1[i] = suffix_max1[i + 1].add(&groups[i].v1.mul_u64(groups[i].count * r));
            }
            let mut ctx = SearchCtx {
                groups,
                d,
                target,
                r,
                suffix_max1,
                nodes: &mut nodes,
                max_nodes: budget.0,
            };
            dfs_min_deficit(
                &mut ctx,
                0,
                &QPair::zero(),
                &QPair::zero(),
                &mut best,
                level,
            )?;
        }
        best.ok_or(DeficiencyError::NotDeficient(level))
    }

    /// Pushes `best` down over all leaves; a non-positive deficit at a leaf
    /// means the record was not deficient after all.
    fn dfs_min_deficit<T: Coef>(
        ctx: &mut SearchCtx<'_, T>,
        g: usize,
        s1: &QPair<T>,
        s2: &QPair<T>,
        best: &mut Option<(QPair<T>, u64)>,
        level: u64,
    ) -> Result<(), DeficiencyError> {
        *ctx.nodes += 1;
        if *ctx.nodes > ctx.max_nodes {
            return Err(DeficiencyError::Infeasible(*ctx.nodes));
        }
        let improves = |cand: &QPair<T>, cand_r: u64, best: &Option<(QPair<T>, u64)>| match best {
            None => true,
            // cand/(cand_r·den) < incumbent/(inc_r·den), cross-multiplied.
            Some((inc, inc_r)) => {
                cand.mul_u64(*inc_r).cmp_in(&inc.mul_u64(cand_r), ctx.d) == Ordering::Less
            }
        };
        if g == ctx.groups.len() {
            let short = ctx.target.sub(s1);
            let over = s2.sub(&ctx.target);
            let deficit = if short.cmp_in(&over, ctx.d) == Ordering::Greater {
                short
            } else {
                over
            };
            if deficit.sign(ctx.d) != Ordering::Greater {
                return Err(DeficiencyError::NotDeficient(level));
            }
            if improves(&deficit, ctx.r, best) {
                *best = Some((deficit, ctx.r));
            }
            return Ok(());
        }
        // Subtree bound: shortfall can only shrink to target - (s1 + max
        // remaining), concession overshoot only grow from s2 - target.
        let lb_short = ctx.target.sub(&s1.add(&ctx.suffix_max1[g]));
        let lb_over = s2.sub(&ctx.target);
        let lb = if lb_short.cmp_in(&lb_over, ctx.d) == Ordering::Greater {
            lb_short
        } else {
            lb_over
        };
        if lb.sign(ctx.d) == Ordering::Greater && !improves(&lb, ctx.r, best) {
            return Ok(());
        }
        let group = &ctx.groups[g];
        let cap = group.count * ctx.r;
        let mut t1 = s1.clone();
        let mut t2 = s2.clone();
        for w in 0..=cap {
            if w > 0 {
                t1 = t1.add(&group.v1);
                t2 = t2.add(&group.v2);
            }
            dfs_min_deficit(ctx, g + 1, &t1, &t2, best, level)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kitchen::Serving;

    fn sc(text: &str) -> Scalar {
        text.parse().unwrap()
    }

    fn record(values1: &[&str], values2: &[&str]) -> PartitionRecord {
        let n = values1.len() as i64;
        let cells: Vec<Serving> = (0..n)
            .map(|i| {
                Serving::from_intervals(vec![(Scalar::ratio(i, n), Scalar::ratio(i + 1, n))])
                    .unwrap()
            })
            .collect();
        PartitionRecord::new(
            cells,
            vec![
                values1.iter().map(|v| sc(v)).collect(),
                values2.iter().map(|v| sc(v)).collect(),
            ],
        )
        .unwrap()
    }

    fn budget() -> EnumerationBudget {
        EnumerationBudget::default()
    }

    #[test]
    fn hyper_value_examples() {
        let r = record(&["1/2", "1/2"], &["1/2", "1/2"]);
        let h = WeightedHyperallocation {
            replicas: 2,
            weights: vec![1, 0],
        };
        assert_eq!(hyper_value(&r, 0, &h).unwrap(), sc("1/4"));
        let h = WeightedHyperallocation {
            replicas: 3,
            weights: vec![3, 3],
        };
        assert_eq!(hyper_value(&r, 1, &h).unwrap(), sc("1"));

        let r = record(&["1/4", "3/4"], &["1/2", "1/2"]);
        let h = WeightedHyperallocation {
            replicas: 3,
            weights: vec![2, 1],
        };
        assert_eq!(hyper_value(&r, 0, &h).unwrap(), sc("5/12"));
        let bad = WeightedHyperallocation {
            replicas: 1,
            weights: vec![1],
        };
        assert!(hyper_value(&r, 0, &bad).is_err());
    }

    #[test]
    fn trivial_record_examples() {
        let r = PartitionRecord::trivial(2);
        assert!(is_deficient(&r, &sc("1/2"), 1, budget())
            .unwrap()
            .is_deficient());
        // At level 2 both agents value (r=2, w=1) at exactly 1/2.
        assert_eq!(
            is_deficient(&r, &sc("1/2"), 2, budget()).unwrap(),
            DeficiencyVerdict::Counterexample(WeightedHyperallocation {
                replicas: 2,
                weights: vec![1],
            })
        );
        // No rational w/r can accept-and-concede across an irrational e1.
        let g = crate::exact::golden_entitlement();
        assert!(is_deficient(&r, &g, 64, budget()).unwrap().is_deficient());
    }

    #[test]
    fn min_deficit_examples() {
        let r = PartitionRecord::trivial(2);
        assert_eq!(min_deficit(&r, &sc("2/5"), 1, budget()).unwrap(), sc("2/5"));
        assert_eq!(min_deficit(&r, &sc("1/2"), 1, budget()).unwrap(), sc("1/2"));
        assert!(matches!(
            min_deficit(&r, &sc("1/2"), 2, budget()),
            Err(DeficiencyError::NotDeficient(2))
        ));
        let g = crate::exact::golden_entitlement();
        let d = min_deficit(&r, &g, 8, budget()).unwrap();
        assert_eq!(d.sign(), std::cmp::Ordering::Greater);
    }

    #[test]
    fn initial_record_criterion() {
        // {C} with unit values is ℓ-deficient iff e1 has no representation
        // with denominator at most ℓ.
        let r = PartitionRecord::trivial(2);
        for num in 0..=12i64 {
            for den in num.max(1)..=12 {
                let e1 = Scalar::ratio(num, den);
                for level in 1..=12u64 {
                    let expressible =
                        (1..=level as i64).any(|q| (num * q) % den == 0 && num * q <= den * q);
                    let verdict = is_deficient(&r, &e1, level, budget()).unwrap();
                    assert_eq!(
                        verdict.is_deficient(),
                        !expressible,
                        "e1={e1} level={level}"
                    );
                }
            }
        }
    }

    #[test]
    fn deficiency_is_monotone_down_in_level() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x0DEF);
        for i in 0..200 {
            let r = crate::sampling::random_record(&mut rng, 2, 3, i % 3 == 0);
            let e1 = if i % 2 == 0 {
                crate::exact::golden_entitlement()
            } else {
                sc("13/17")
            };
            for level in (2..=6u64).rev() {
                if is_deficient(&r, &e1, level, budget())
                    .unwrap()
                    .is_deficient()
                {
                    assert!(is_deficient(&r, &e1, level - 1, budget())
                        .unwrap()
                        .is_deficient());
                }
            }
        }
    }

    #[test]
    fn role_swap_preserves_the_verdict() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5A5A);
        for i in 0..200 {
            let r = crate::sampling::random_record(&mut rng, 2, 3, i % 4 == 0);
            let e1 = crate::sampling::random_proportion(&mut rng, 9);
            let e2 = Scalar::one() - &e1;
            for level in 1..=4u64 {
                let direct = is_deficient(&r, &e1, level, budget()).unwrap();
                let swapped = is_deficient(&r.swap_agents(), &e2, level, budget()).unwrap();
                assert_eq!(direct.is_deficient(), swapped.is_deficient());
            }
        }
    }

    #[test]
    fn counterexamples_are_genuine() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xC0DE);
        for i in 0..300 {
            let r = crate::sampling::random_record(&mut rng, 2, 4, i % 5 == 0);
            let e1 = crate::sampling::random_proportion(&mut rng, 7);
            if let DeficiencyVerdict::Counterexample(h) =
                is_deficient(&r, &e1, 4, budget()).unwrap()
            {
                let v1 = hyper_value(&r, 0, &h).unwrap();
                let v2 = hyper_value(&r, 1, &h).unwrap();
                assert!(v1 >= e1 && v2 <= e1, "reported counterexample must violate");
            }
        }
    }

    #[test]
    fn budget_exhaustion_reports_infeasible() {
        // An irrational threshold on {C} has no counterexample at any
        // level, so the weight space must be exhausted; a 10-node budget
        // cannot cover a thousand replica counts.
        let r = PartitionRecord::trivial(2);
        let tiny = EnumerationBudget(10);
        assert!(matches!(
            is_deficient(&r, &crate::exact::golden_entitlement(), 1000, tiny),
            Err(DeficiencyError::Infeasible(_))
        ));
    }
}
