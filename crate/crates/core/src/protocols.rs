//! Mediator strategies.
//!
//! A mediator is a pure function from the chronicle (the query/response
//! exchanges so far) to the next action, which makes information-set
//! measurability structural: identical chronicles always produce identical
//! actions. The cloned Dubins-Spanier protocol and a divide-and-conquer
//! halving protocol serve the division game; the budgeted wrapper plus the
//! random and greedy mediators form the corpus the adversary is run
//! against.

use crate::exact::Scalar;
use crate::indices::{compute_indices, EntitlementProfile, IndexValue};
use crate::kitchen::{AgentId, Query, Serving};
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("cloned Dubins-Spanier needs rational entitlements (finite clonage)")]
    IrrationalEntitlement,
    #[error("clonage {0} exceeds the configured cap {1}")]
    ClonageTooLarge(String, u64),
    #[error("this protocol requires equal entitlements")]
    UnequalEntitlements,
    #[error("servings must be pairwise disjoint and exhaust the cake")]
    NotAnAllocation,
    #[error("unknown mediator {0:?}")]
    UnknownMediator(String),
}

/// Per-agent servings, pairwise disjoint and collectively exhaustive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Serving>", into = "Vec<Serving>")]
pub struct Allocation {
    servings: Vec<Serving>,
}

impl Allocation {
    pub fn new(servings: Vec<Serving>) -> Result<Self, ProtocolError> {
        let mut union = Serving::empty();
        let mut total = Scalar::zero();
        for s in &servings {
            total = total + s.length();
            union = union.union(s);
        }
        if union != Serving::whole() || total != Scalar::one() {
            return Err(ProtocolError::NotAnAllocation);
        }
        Ok(Allocation { servings })
    }

    pub fn agents(&self) -> usize {
        self.servings.len()
    }

    pub fn serving(&self, agent: AgentId) -> &Serving {
        &self.servings[agent]
    }

    pub fn servings(&self) -> &[Serving] {
        &self.servings
    }
}

impl From<Allocation> for Vec<Serving> {
    fn from(a: Allocation) -> Self {
        a.servings
    }
}

impl TryFrom<Vec<Serving>> for Allocation {
    type Error = ProtocolError;
    fn try_from(v: Vec<Serving>) -> Result<Self, ProtocolError> {
        Allocation::new(v)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    Ask(Query),
    Allocate(Allocation),
}

/// One completed exchange as the mediator sees it: the queried serving and
/// the cut piece, each with every agent's appraisal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exchange {
    pub query: Query,
    pub serving_values: Vec<Scalar>,
    pub piece: Serving,
    pub piece_values: Vec<Scalar>,
}

/// A protocol: a pure strategy mapping chronicles to actions.
pub trait Mediator {
    fn name(&self) -> String;
    fn next_action(&self, chronicle: &[Exchange]) -> Action;
}

/// The cloned Dubins-Spanier protocol: with clonage c, agent i fields
/// c·e_i clones; every round each remaining clone cuts the remaining
/// suffix at 1/(clones remaining), the leftmost cutter's owner takes the
/// prefix, and the final lone clone is still queried, for (c²+c)/2 queries
/// in total. The output is e-proportional against every measure profile.
pub struct ClonedDubinsSpanier {
    owners: Vec<AgentId>,
    agents: usize,
}

impl ClonedDubinsSpanier {
    pub const CLONAGE_CAP: u64 = 100_000;

    pub fn new(e: &EntitlementProfile) -> Result<Self, ProtocolError> {
        let report = compute_indices(e);
        let clonage = match report.clonage {
            IndexValue::Finite(c) => c,
            IndexValue::Infinite => return Err(ProtocolError::IrrationalEntitlement),
        };
        let c = clonage
            .to_u64()
            .filter(|&c| c <= Self::CLONAGE_CAP)
            .ok_or_else(|| {
                ProtocolError::ClonageTooLarge(clonage.to_string(), Self::CLONAGE_CAP)
            })?;
        let mut owners = Vec::new();
        for (agent, share) in e.shares().iter().enumerate() {
            let count = share * &Scalar::from_integer(c as i64);
            let count = count
                .rational_denominator()
                .filter(|d| d.to_u64() == Some(1))
                .map(|_| count.rational_part().numer().to_u64().expect("small"))
                .expect("clonage clears every denominator");
            owners.extend(std::iter::repeat_n(agent, count as usize));
        }
        Ok(ClonedDubinsSpanier {
            owners,
            agents: e.agents(),
        })
    }

    pub fn total_queries(&self) -> u64 {
        let c = self.owners.len() as u64;
        c * (c + 1) / 2
    }
}

/// Replays rounds of clone cuts from the chronicle. Ties on the leftmost
/// cut go to the smallest clone index, which pins down deterministic
/// replay; the convention of querying the lone final clone keeps the count
/// at exactly (c²+c)/2.
impl Mediator for ClonedDubinsSpanier {
    fn name(&self) -> String {
        "cloned-ds".into()
    }

    fn next_action(&self, chronicle: &[Exchange]) -> Action {
        let mut remaining = Serving::whole();
        let mut clones: Vec<AgentId> = self.owners.clone();
        let mut pieces: Vec<Serving> = vec![Serving::empty(); self.agents];
        let mut consumed = 0usize;
        while !clones.is_empty() {
            let k = clones.len();
            if chronicle.len() < consumed + k {
                let next_clone = chronicle.len() - consumed;
                let q = Query::new(
                    clones[next_clone],
                    remaining.clone(),
                    Scalar::ratio(1, k as i64),
                )
                .expect("proportion 1/k is in range");
                return Action::Ask(q);
            }
            let round = &chronicle[consumed..consumed + k];
            consumed += k;
            let mut leftmost = 0usize;
            for (idx, exchange) in round.iter().enumerate().skip(1) {
                let best = round[leftmost].piece.sup().expect("pieces are nonempty");
                let this = exchange.piece.sup().expect("pieces are nonempty");
                if this < best {
                    leftmost = idx;
                }
            }
            let piece = round[leftmost].piece.clone();
            pieces[clones[leftmost]] = pieces[clones[leftmost]].union(&piece);
            remaining = remaining.difference(&piece);
            clones.remove(leftmost);
        }
        Action::Allocate(Allocation::new(pieces).expect("pieces partition the cake"))
    }
}

/// Divide-and-conquer halving for equal entitlements: every agent in a
/// group marks the ⌊k/2⌋/k point of the group's serving, the group splits
/// at the median mark, and the halves recurse. Costs at most n·⌈log2 n⌉
/// queries and is proportional for every measure profile.
pub struct EvenPaz {
    agents: usize,
}

impl EvenPaz {
    pub fn new(e: &EntitlementProfile) -> Result<Self, ProtocolError> {
        let n = e.agents();
        if e.shares().iter().any(|s| s != &Scalar::ratio(1, n as i64)) {
            return Err(ProtocolError::UnequalEntitlements);
        }
        Ok(EvenPaz { agents: n })
    }
}

enum Walk {
    NeedQuery(Query),
    Assigned(Vec<(AgentId, Serving)>),
}

fn halving_walk(
    group: &[AgentId],
    region: &Serving,
    chronicle: &[Exchange],
    cursor: &mut usize,
) -> Walk {
    if group.len() == 1 {
        return Walk::Assigned(vec![(group[0], region.clone())]);
    }
    let k = group.len();
    let h = k / 2;
    let mut marks: Vec<(Scalar, AgentId, Serving)> = Vec::with_capacity(k);
    for &agent in group {
        if *cursor >= chronicle.len() {
            let q = Query::new(agent, region.clone(), Scalar::ratio(h as i64, k as i64))
                .expect("proportion in range");
            return Walk::NeedQuery(q);
        }
        let exchange = &chronicle[*cursor];
        *cursor += 1;
        let sup = exchange.piece.sup().cloned().unwrap_or_else(Scalar::zero);
        marks.push((sup, agent, exchange.piece.clone()));
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        marks[a]
            .0
            .cmp(&marks[b].0)
            .then(marks[a].1.cmp(&marks[b].1))
    });
    let left_group: Vec<AgentId> = order[..h].iter().map(|&i| marks[i].1).collect();
    let right_group: Vec<AgentId> = order[h..].iter().map(|&i| marks[i].1).collect();
    let split_piece = &marks[order[h - 1]].2;
    let left_region = split_piece.clone();
    let right_region = region.difference(&left_region);
    match halving_walk(&left_group, &left_region, chronicle, cursor) {
        Walk::NeedQuery(q) => Walk::NeedQuery(q),
        Walk::Assigned(mut left) => {
            match halving_walk(&right_group, &right_region, chronicle, cursor) {
                Walk::NeedQuery(q) => Walk::NeedQuery(q),
                Walk::Assigned(right) => {
                    left.extend(right);
                    Walk::Assigned(left)
                }
            }
        }
    }
}

impl Mediator for EvenPaz {
    fn name(&self) -> String {
        "even-paz".into()
    }

    fn next_action(&self, chronicle: &[Exchange]) -> Action {
        let group: Vec<AgentId> = (0..self.agents).collect();
        let mut cursor = 0usize;
        match halving_walk(&group, &Serving::whole(), chronicle, &mut cursor) {
            Walk::NeedQuery(q) => Action::Ask(q),
            Walk::Assigned(assignments) => {
                let mut servings = vec![Serving::empty(); self.agents];
                for (agent, serving) in assignments {
                    servings[agent] = servings[agent].union(&serving);
                }
                Action::Allocate(Allocation::new(servings).expect("halving partitions the cake"))
            }
        }
    }
}

/// Budget-limited cloned Dubins-Spanier: runs the protocol (on a rational
/// stand-in profile when the true one has an irrational share) but stops
/// after `stop_after` queries and allocates its current holdings, with the
/// unassigned remainder going to the agent with the largest unmet share.
/// This is the protocol wrapper the lower-bound duels are run against.
pub struct BudgetedClonedDs {
    inner: ClonedDubinsSpanier,
    stop_after: usize,
    entitlements: EntitlementProfile,
}

impl BudgetedClonedDs {
    pub fn new(e: &EntitlementProfile, stop_after: usize) -> Result<Self, ProtocolError> {
        let inner = match ClonedDubinsSpanier::new(e) {
            Ok(inner) => inner,
            Err(ProtocolError::IrrationalEntitlement | ProtocolError::ClonageTooLarge(..)) => {
                ClonedDubinsSpanier::new(&rational_stand_in(e))?
            }
            Err(other) => return Err(other),
        };
        Ok(BudgetedClonedDs {
            inner,
            stop_after,
            entitlements: e.clone(),
        })
    }
}

/// Nearby all-rational profile with denominators at most 16: floors on a
/// sixteenth grid, remainder to the last agent.
fn rational_stand_in(e: &EntitlementProfile) -> EntitlementProfile {
    let grid = 16i64;
    let mut shares: Vec<Scalar> = Vec::with_capacity(e.agents());
    let mut used = Scalar::zero();
    for share in &e.shares()[..e.agents() - 1] {
        let mut k = 0i64;
        while Scalar::ratio(k + 1, grid) <= *share {
            k += 1;
        }
        let approx = Scalar::ratio(k, grid);
        used = used + &approx;
        shares.push(approx);
    }
    shares.push(Scalar::one() - used);
    EntitlementProfile::new(shares).expect("floored shares still sum to one")
}

impl Mediator for BudgetedClonedDs {
    fn name(&self) -> String {
        "cloned-ds".into()
    }

    fn next_action(&self, chronicle: &[Exchange]) -> Action {
        if chronicle.len() < self.stop_after {
            if let Action::Ask(q) = self.inner.next_action(chronicle) {
                return Action::Ask(q);
            }
        }
        // Out of budget (or the plan finished): allocate current holdings.
        let mut servings = vec![Serving::empty(); self.entitlements.agents()];
        let mut remaining = Serving::whole();
        let mut clones: Vec<AgentId> = self.inner.owners.clone();
        let mut consumed = 0usize;
        while !clones.is_empty() && chronicle.len() >= consumed + clones.len() {
            let k = clones.len();
            let round = &chronicle[consumed..consumed + k];
            consumed += k;
            let mut leftmost = 0usize;
            for (idx, exchange) in round.iter().enumerate().skip(1) {
                if exchange.piece.sup() < round[leftmost].piece.sup() {
                    leftmost = idx;
                }
            }
            let piece = round[leftmost].piece.clone();
            servings[clones[leftmost]] = servings[clones[leftmost]].union(&piece);
            remaining = remaining.difference(&piece);
            clones.remove(leftmost);
        }
        // Remainder to the agent with the largest unmet entitlement, by a
        // crude length proxy; any choice is legal here.
        let mut needy = 0usize;
        let mut best_gap = &self.entitlements.shares()[0] - &servings[0].length();
        for (agent, serving) in servings.iter().enumerate().skip(1) {
            let gap = &self.entitlements.shares()[agent] - &serving.length();
            if gap > best_gap {
                best_gap = gap;
                needy = agent;
            }
        }
        servings[needy] = servings[needy].union(&remaining);
        Action::Allocate(Allocation::new(servings).expect("holdings partition the cake"))
    }
}

/// Asks a few random queries, then allocates by random prefix cuts. The
/// action is a function of the seed and the chronicle only.
pub struct RandomMediator {
    pub seed: u64,
    agents: usize,
    stop_after: usize,
}

impl RandomMediator {
    pub fn new(agents: usize, seed: u64, stop_after: usize) -> Self {
        RandomMediator {
            seed,
            agents,
            stop_after,
        }
    }
}

impl Mediator for RandomMediator {
    fn name(&self) -> String {
        "random".into()
    }

    fn next_action(&self, chronicle: &[Exchange]) -> Action {
        let mut rng = ChaCha8Rng::seed_from_u64(
            self.seed ^ (chronicle.len() as u64).wrapping_mul(0x9E3779B97F4A7C15),
        );
        if chronicle.len() >= self.stop_after {
            let grid = 24i64;
            let mut cuts: Vec<i64> = (0..self.agents - 1)
                .map(|_| rng.random_range(1..grid))
                .collect();
            cuts.sort_unstable();
            cuts.dedup();
            let mut bounds = vec![Scalar::zero()];
            bounds.extend(cuts.into_iter().map(|c| Scalar::ratio(c, grid)));
            bounds.push(Scalar::one());
            let mut servings: Vec<Serving> = bounds
                .windows(2)
                .map(|w| Serving::from_intervals(vec![(w[0].clone(), w[1].clone())]).unwrap())
                .collect();
            // Deduplicated cuts can leave fewer pieces than agents.
            while servings.len() < self.agents {
                servings.push(Serving::empty());
            }
            return Action::Allocate(Allocation::new(servings).expect("prefix cuts partition"));
        }
        let q = crate::sampling::random_query(&mut rng, self.agents, 16);
        Action::Ask(q)
    }
}

/// Cell-grabbing: asks each agent in turn to cut the unclaimed suffix at
/// the agent's share of what remains, hands over the piece, and allocates
/// after n-1 queries.
pub struct GreedyMediator {
    entitlements: EntitlementProfile,
}

impl GreedyMediator {
    pub fn new(e: &EntitlementProfile) -> Self {
        GreedyMediator {
            entitlements: e.clone(),
        }
    }
}

impl Mediator for GreedyMediator {
    fn name(&self) -> String {
        "greedy".into()
    }

    fn next_action(&self, chronicle: &[Exchange]) -> Action {
        let n = self.entitlements.agents();
        let mut remaining = Serving::whole();
        let mut servings = vec![Serving::empty(); n];
        for (slot, exchange) in servings.iter_mut().zip(chronicle.iter().take(n - 1)) {
            *slot = exchange.piece.clone();
            remaining = remaining.difference(&exchange.piece);
        }
        let asked = chronicle.len();
        if asked < n - 1 {
            let rest_share: Scalar = self.entitlements.shares()[asked..].iter().sum();
            let proportion = if rest_share.is_zero() {
                Scalar::zero()
            } else {
                self.entitlements.share(asked) / &rest_share
            };
            let q = Query::new(asked, remaining, proportion).expect("ratio of shares is in [0,1]");
            return Action::Ask(q);
        }
        servings[n - 1] = remaining;
        Action::Allocate(Allocation::new(servings).expect("pieces partition the cake"))
    }
}

/// Strategy registry for the command line: `cloned-ds`, `even-paz`,
/// `random`, `greedy`. `cloned-ds` silently switches to the budgeted
/// wrapper when the profile's clonage is infinite or too large to field.
pub fn mediator_by_name(
    name: &str,
    e: &EntitlementProfile,
    stop_after: usize,
    seed: u64,
) -> Result<Box<dyn Mediator>, ProtocolError> {
    match name {
        "cloned-ds" => match ClonedDubinsSpanier::new(e) {
            Ok(m) => Ok(Box::new(m)),
            Err(ProtocolError::IrrationalEntitlement | ProtocolError::ClonageTooLarge(..)) => {
                Ok(Box::new(BudgetedClonedDs::new(e, stop_after)?))
            }
            Err(other) => Err(other),
        },
        "cloned-ds-wrapper" => Ok(Box::new(BudgetedClonedDs::new(e, stop_after)?)),
        "even-paz" => Ok(Box::new(EvenPaz::new(e)?)),
        "random" => Ok(Box::new(RandomMediator::new(e.agents(), seed, stop_after))),
        "greedy" => Ok(Box::new(GreedyMediator::new(e))),
        other => Err(ProtocolError::UnknownMediator(other.to_string())),
    }
}
