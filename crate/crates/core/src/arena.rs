//! The two games: the division game against a fixed measure profile and
//! the adversary game against a response-choosing opponent.
//!
//! Both games drive a mediator strategy and persist the full exchange as a
//! transcript whose response records chain-refine into one partition
//! record. The adversary game validates every response at the interface
//! (an invalid record is an adversary fault rather than the mediator's
//! problem) and judges final allocations against *all* measure profiles
//! extending the record: an allocation passes only when every agent's
//! fully-contained cells already cover that agent's entitlement.

use crate::exact::Scalar;
use crate::indices::EntitlementProfile;
use crate::kitchen::{threshold_and_cut, KitchenMeasure, Query, Serving};
use crate::protocols::{Action, Allocation, Exchange, Mediator};
use crate::records::{validate_record, PartitionRecord, UltraVerdict};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ArenaError {
    #[error("allocation has {0} servings for {1} agents")]
    WrongAgentCount(usize, usize),
    #[error("nature's profile must extend the running record: {0}")]
    InconsistentProfile(String),
    #[error("replay diverged at step {0}")]
    ReplayMismatch(usize),
    #[error(transparent)]
    Protocol(#[from] crate::protocols::ProtocolError),
    #[error(transparent)]
    Adversary(#[from] crate::adversary::AdversaryError),
    #[error(transparent)]
    Indices(#[from] crate::indices::IndicesError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GameMode {
    Division,
    Adversary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Accepted,
    Rejected,
    BudgetExceeded,
    AdversaryFault,
}

impl Verdict {
    /// Process exit code: 0 accepted, 1 rejected (or out of budget), 2 fault.
    pub fn exit_code(&self) -> i32 {
        match self {
            Verdict::Accepted => 0,
            Verdict::Rejected | Verdict::BudgetExceeded => 1,
            Verdict::AdversaryFault => 2,
        }
    }
}

pub const TRANSCRIPT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptStep {
    pub query: Query,
    pub record: PartitionRecord,
}

/// A full game run: configuration, the query/record steps, the final
/// allocation, the exact query count, and the verdict.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub version: u32,
    pub mode: GameMode,
    pub radicand: u64,
    pub entitlements: Vec<Scalar>,
    pub mediator: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub adversary: Option<AdversaryInfo>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub measures: Option<Vec<KitchenMeasure>>,
    pub seed: u64,
    pub budget: u64,
    pub steps: Vec<TranscriptStep>,
    pub cost: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub final_allocation: Option<Allocation>,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdversaryInfo {
    pub c_star: u32,
    pub schedule_mode: crate::indices::ScheduleMode,
    pub checked: bool,
}

/// Per-agent exact proportionality check, listing every shortfall.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProportionalityReport {
    pub accepted: bool,
    pub shortfalls: Vec<(usize, Scalar)>,
}

/// μ_i(X_i) ≥ e_i for every agent, with exact deficits on failure.
pub fn check_proportional(
    profile: &[KitchenMeasure],
    e: &EntitlementProfile,
    x: &Allocation,
) -> Result<ProportionalityReport, ArenaError> {
    if x.agents() != e.agents() || profile.len() != e.agents() {
        return Err(ArenaError::WrongAgentCount(x.agents(), e.agents()));
    }
    let mut shortfalls = Vec::new();
    for (agent, measure) in profile.iter().enumerate() {
        let got = measure.value(x.serving(agent));
        let want = e.share(agent);
        if &got < want {
            shortfalls.push((agent, want - &got));
        }
    }
    Ok(ProportionalityReport {
        accepted: shortfalls.is_empty(),
        shortfalls,
    })
}

/// Accepts iff the allocation is proportional under *every* measure
/// profile extending the record: agent i's cells fully inside X_i must
/// already sum to e_i, because partial cells can be squeezed arbitrarily
/// close to worthless but never to exactly zero.
pub fn judge_allocation(
    record: &PartitionRecord,
    e: &EntitlementProfile,
    x: &Allocation,
) -> Result<Verdict, ArenaError> {
    if x.agents() != e.agents() || record.agents() != e.agents() {
        return Err(ArenaError::WrongAgentCount(x.agents(), e.agents()));
    }
    for agent in 0..e.agents() {
        if &record.contained_value(agent, x.serving(agent)) < e.share(agent) {
            return Ok(Verdict::Rejected);
        }
    }
    Ok(Verdict::Accepted)
}

/// When the judge rejects, exhibits a concrete extending measure profile
/// under which the allocation misses some entitlement: the shorted agent's
/// partial-cell mass is squeezed toward the cell parts outside the
/// allocation.
pub fn rejecting_profile(
    record: &PartitionRecord,
    e: &EntitlementProfile,
    x: &Allocation,
) -> Option<Vec<KitchenMeasure>> {
    let agent = (0..e.agents()).find(|&a| &record.contained_value(a, x.serving(a)) < e.share(a))?;
    let gap = e.share(agent) - &record.contained_value(agent, x.serving(agent));
    let partials: Vec<usize> = (0..record.cells().len())
        .filter(|&c| {
            let cell = &record.cells()[c];
            !x.serving(agent).contains(cell) && !cell.intersect(x.serving(agent)).is_empty()
        })
        .collect();
    let mut profile = record.witness_profile();
    if partials.is_empty() {
        return Some(profile);
    }
    // Give each partial cell's inside part a sliver of mass: the total
    // inside contribution stays below the gap.
    let share = &gap / &Scalar::from_integer(2 * partials.len() as i64);
    let mut segments = Vec::new();
    for (idx, cell) in record.cells().iter().enumerate() {
        let value = record.value(agent, idx);
        if partials.contains(&idx) {
            let inside = cell.intersect(x.serving(agent));
            let outside = cell.difference(x.serving(agent));
            let inside_mass = Scalar::min(share.clone(), value * &Scalar::ratio(1, 2));
            let outside_mass = value - &inside_mass;
            for (lo, hi) in inside.intervals() {
                segments.push((
                    lo.clone(),
                    hi.clone(),
                    &inside_mass * &((hi - lo) / &inside.length()),
                ));
            }
            for (lo, hi) in outside.intervals() {
                segments.push((
                    lo.clone(),
                    hi.clone(),
                    &outside_mass * &((hi - lo) / &outside.length()),
                ));
            }
        } else {
            for (lo, hi) in cell.intervals() {
                segments.push((
                    lo.clone(),
                    hi.clone(),
                    value * &((hi - lo) / &cell.length()),
                ));
            }
        }
    }
    profile[agent] = KitchenMeasure::from_segments(segments).expect("cell pieces cover the cake");
    Some(profile)
}

/// Sums each agent's values over the record cells inside `s`. Sound only
/// when every cell is entirely inside or outside `s`, which holds for the
/// servings of a query the record refines; a single interior point then
/// decides containment.
fn sum_inside(record: &PartitionRecord, s: &Serving) -> Vec<Scalar> {
    let mut totals = vec![Scalar::zero(); record.agents()];
    for (idx, cell) in record.cells().iter().enumerate() {
        let (lo, hi) = &cell.intervals()[0];
        let probe = (lo + hi) * Scalar::ratio(1, 2);
        if s.contains_point(&probe) {
            for (agent, total) in totals.iter_mut().enumerate() {
                *total = &*total + record.value(agent, idx);
            }
        }
    }
    totals
}

/// Derives the mediator-visible exchange from a validated response record.
fn exchange_from_record(q: &Query, record: &PartitionRecord, cut: &Scalar) -> Exchange {
    let piece = q.serving.intersect(&Serving::prefix(cut));
    Exchange {
        serving_values: sum_inside(record, &q.serving),
        piece_values: sum_inside(record, &piece),
        piece,
        query: q.clone(),
    }
}

/// Runs a protocol against nature's fixed measure profile. The verdict
/// judges the final allocation against that profile, exactly.
pub fn run_division_game(
    mediator: &dyn Mediator,
    e: &EntitlementProfile,
    profile: &[KitchenMeasure],
    budget: u64,
    seed: u64,
) -> Result<Transcript, ArenaError> {
    let mut running = PartitionRecord::trivial(e.agents());
    let mut steps: Vec<TranscriptStep> = Vec::new();
    let mut chronicle: Vec<Exchange> = Vec::new();
    let radicand = radicand_of(e);
    loop {
        match mediator.next_action(&chronicle) {
            Action::Ask(q) => {
                if steps.len() as u64 >= budget {
                    return Ok(finish_transcript(
                        GameMode::Division,
                        radicand,
                        e,
                        mediator.name(),
                        None,
                        Some(profile.to_vec()),
                        seed,
                        budget,
                        steps,
                        None,
                        Verdict::BudgetExceeded,
                        vec![],
                    ));
                }
                // The running record is itself profile-derived, so the
                // extends-precondition holds by construction.
                let record = crate::records::ultraresponse_unchecked(&running, &q, profile);
                let (cut, _) = threshold_and_cut(&profile[q.cutter], &q);
                chronicle.push(exchange_from_record(&q, &record, &cut));
                running = record.clone();
                steps.push(TranscriptStep { query: q, record });
            }
            Action::Allocate(x) => {
                let report = check_proportional(profile, e, &x)?;
                let verdict = if report.accepted {
                    Verdict::Accepted
                } else {
                    Verdict::Rejected
                };
                return Ok(finish_transcript(
                    GameMode::Division,
                    radicand,
                    e,
                    mediator.name(),
                    None,
                    Some(profile.to_vec()),
                    seed,
                    budget,
                    steps,
                    Some(x),
                    verdict,
                    vec![],
                ));
            }
        }
    }
}

/// An adversary: chooses a response record for each query.
pub trait AdversaryResponder {
    fn name(&self) -> String;
    fn respond(&mut self, q: &Query) -> PartitionRecord;
    fn notes(&self) -> Vec<String> {
        Vec::new()
    }
}

/// Nature wrapped as an adversary: responds from a fixed measure profile.
/// Feeding a division game's profile here reproduces that game's steps.
pub struct NatureAdversary {
    profile: Vec<KitchenMeasure>,
    record: PartitionRecord,
}

impl NatureAdversary {
    pub fn new(profile: Vec<KitchenMeasure>) -> Self {
        let record = PartitionRecord::trivial(profile.len());
        NatureAdversary { profile, record }
    }
}

impl AdversaryResponder for NatureAdversary {
    fn name(&self) -> String {
        "nature".into()
    }

    fn respond(&mut self, q: &Query) -> PartitionRecord {
        let record = crate::records::ultraresponse_unchecked(&self.record, q, &self.profile);
        self.record = record.clone();
        record
    }
}

impl AdversaryResponder for crate::adversary::ScheduledAdversary {
    fn name(&self) -> String {
        "scheduled".into()
    }

    fn respond(&mut self, q: &Query) -> PartitionRecord {
        crate::adversary::ScheduledAdversary::respond(self, q)
    }

    fn notes(&self) -> Vec<String> {
        crate::adversary::ScheduledAdversary::notes(self).to_vec()
    }
}

/// Runs the mediator against a response-choosing adversary. Every response
/// must validate as an ultraresponse of the running record; a failure is
/// an adversary fault unless `permissive` is set, in which case play goes
/// on over an empty domain and any final allocation is accepted.
#[allow(clippy::too_many_arguments)]
pub fn run_adversary_game(
    mediator: &dyn Mediator,
    adversary: &mut dyn AdversaryResponder,
    e: &EntitlementProfile,
    budget: u64,
    seed: u64,
    permissive: bool,
    info: Option<AdversaryInfo>,
) -> Result<Transcript, ArenaError> {
    let mut running = PartitionRecord::trivial(e.agents());
    let mut steps: Vec<TranscriptStep> = Vec::new();
    let mut chronicle: Vec<Exchange> = Vec::new();
    let mut domain_empty = false;
    let mut notes: Vec<String> = Vec::new();
    let radicand = radicand_of(e);
    loop {
        match mediator.next_action(&chronicle) {
            Action::Ask(q) => {
                if steps.len() as u64 >= budget {
                    notes.extend(adversary.notes());
                    return Ok(finish_transcript(
                        GameMode::Adversary,
                        radicand,
                        e,
                        mediator.name(),
                        info,
                        None,
                        seed,
                        budget,
                        steps,
                        None,
                        Verdict::BudgetExceeded,
                        notes,
                    ));
                }
                let record = adversary.respond(&q);
                match validate_record(&running, &q, &record) {
                    UltraVerdict::Accept { cut } => {
                        chronicle.push(exchange_from_record(&q, &record, &cut));
                        running = record.clone();
                        steps.push(TranscriptStep { query: q, record });
                    }
                    UltraVerdict::Reject(violation) => {
                        if !permissive {
                            notes.push(format!("adversary response violated {violation}"));
                            notes.extend(adversary.notes());
                            steps.push(TranscriptStep { query: q, record });
                            return Ok(finish_transcript(
                                GameMode::Adversary,
                                radicand,
                                e,
                                mediator.name(),
                                info,
                                None,
                                seed,
                                budget,
                                steps,
                                None,
                                Verdict::AdversaryFault,
                                notes,
                            ));
                        }
                        // Inconsistent responses empty the domain: the
                        // mediator wins with any allocation from here on.
                        domain_empty = true;
                        notes.push(format!(
                            "response {} violated {violation}; domain is empty",
                            steps.len() + 1
                        ));
                        chronicle.push(Exchange {
                            serving_values: vec![Scalar::zero(); e.agents()],
                            piece_values: vec![Scalar::zero(); e.agents()],
                            piece: Serving::empty(),
                            query: q.clone(),
                        });
                        steps.push(TranscriptStep { query: q, record });
                    }
                }
            }
            Action::Allocate(x) => {
                let verdict = if domain_empty {
                    Verdict::Accepted
                } else {
                    judge_allocation(&running, e, &x)?
                };
                notes.extend(adversary.notes());
                return Ok(finish_transcript(
                    GameMode::Adversary,
                    radicand,
                    e,
                    mediator.name(),
                    info,
                    None,
                    seed,
                    budget,
                    steps,
                    Some(x),
                    verdict,
                    notes,
                ));
            }
        }
    }
}

fn radicand_of(e: &EntitlementProfile) -> u64 {
    e.shares().iter().map(|s| s.radicand()).max().unwrap_or(0)
}

#[allow(clippy::too_many_arguments)]
fn finish_transcript(
    mode: GameMode,
    radicand: u64,
    e: &EntitlementProfile,
    mediator: String,
    adversary: Option<AdversaryInfo>,
    measures: Option<Vec<KitchenMeasure>>,
    seed: u64,
    budget: u64,
    steps: Vec<TranscriptStep>,
    final_allocation: Option<Allocation>,
    verdict: Verdict,
    notes: Vec<String>,
) -> Transcript {
    Transcript {
        version: TRANSCRIPT_VERSION,
        mode,
        radicand,
        entitlements: e.shares().to_vec(),
        mediator,
        adversary,
        measures,
        seed,
        budget,
        cost: steps.len() as u64,
        steps,
        final_allocation,
        verdict,
        notes,
    }
}

/// Re-runs a transcript's configuration from scratch and checks that the
/// emitted transcript is identical; the byte-for-byte comparison is the
/// protocol-measurability and determinism gate.
pub fn replay(transcript: &Transcript) -> Result<Transcript, ArenaError> {
    let e =
        EntitlementProfile::new(transcript.entitlements.clone()).map_err(ArenaError::Indices)?;
    let mediator = crate::protocols::mediator_by_name(
        &transcript.mediator,
        &e,
        transcript
            .adversary
            .as_ref()
            .map(|a| a.c_star as usize)
            .unwrap_or(transcript.budget as usize),
        transcript.seed,
    )?;
    let again = match transcript.mode {
        GameMode::Division => {
            let profile = transcript.measures.clone().ok_or_else(|| {
                ArenaError::InconsistentProfile("transcript lacks measures".into())
            })?;
            run_division_game(
                mediator.as_ref(),
                &e,
                &profile,
                transcript.budget,
                transcript.seed,
            )?
        }
        GameMode::Adversary => {
            let info = transcript.adversary.clone().ok_or_else(|| {
                ArenaError::InconsistentProfile("transcript lacks adversary".into())
            })?;
            let mut adversary = crate::adversary::ScheduledAdversary::new(
                &e,
                info.schedule_mode,
                info.c_star,
                crate::adversary::AdversaryOptions {
                    checked: info.checked,
                    budget: Default::default(),
                },
            )?;
            run_adversary_game(
                mediator.as_ref(),
                &mut adversary,
                &e,
                transcript.budget,
                transcript.seed,
                false,
                Some(info),
            )?
        }
    };
    for (i, (a, b)) in transcript.steps.iter().zip(&again.steps).enumerate() {
        if a != b {
            return Err(ArenaError::ReplayMismatch(i));
        }
    }
    if transcript != &again {
        return Err(ArenaError::ReplayMismatch(transcript.steps.len()));
    }
    Ok(again)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocols::ClonedDubinsSpanier;

    fn sc(text: &str) -> Scalar {
        text.parse().unwrap()
    }

    fn serving(pairs: &[(&str, &str)]) -> Serving {
        Serving::from_intervals(pairs.iter().map(|(a, b)| (sc(a), sc(b)))).unwrap()
    }

    fn uniforms(n: usize) -> Vec<KitchenMeasure> {
        vec![KitchenMeasure::uniform(); n]
    }

    #[test]
    fn cloned_ds_division_game_halves() {
        let e = EntitlementProfile::equal(2);
        let mediator = ClonedDubinsSpanier::new(&e).unwrap();
        let t = run_division_game(&mediator, &e, &uniforms(2), 1 << 10, 0).unwrap();
        assert_eq!(t.cost, 3);
        assert_eq!(t.verdict, Verdict::Accepted);
        let x = t.final_allocation.unwrap();
        assert_eq!(x.serving(0), &serving(&[("0", "1/2")]));
        assert_eq!(x.serving(1), &serving(&[("1/2", "1")]));
    }

    #[test]
    fn cloned_ds_one_third_two_thirds() {
        let e = EntitlementProfile::new(vec![sc("1/3"), sc("2/3")]).unwrap();
        let mediator = ClonedDubinsSpanier::new(&e).unwrap();
        let t = run_division_game(&mediator, &e, &uniforms(2), 1 << 10, 0).unwrap();
        assert_eq!(t.cost, 6);
        assert_eq!(t.verdict, Verdict::Accepted);
        let x = t.final_allocation.unwrap();
        assert_eq!(x.serving(0).length(), sc("1/3"));
        assert_eq!(x.serving(1).length(), sc("2/3"));
    }

    #[test]
    fn greedy_allocation_rejected_when_short() {
        // A strategy that allocates everything to agent 1 at cost 0.
        struct Grabby;
        impl Mediator for Grabby {
            fn name(&self) -> String {
                "grabby".into()
            }
            fn next_action(&self, _: &[Exchange]) -> Action {
                Action::Allocate(Allocation::new(vec![Serving::whole(), Serving::empty()]).unwrap())
            }
        }
        let e = EntitlementProfile::equal(2);
        let t = run_division_game(&Grabby, &e, &uniforms(2), 16, 0).unwrap();
        assert_eq!(t.cost, 0);
        assert_eq!(t.verdict, Verdict::Rejected);

        // With entitlements (1, 0) the same allocation is accepted at 0.
        let e = EntitlementProfile::new(vec![sc("1"), sc("0")]).unwrap();
        let t = run_division_game(&Grabby, &e, &uniforms(2), 16, 0).unwrap();
        assert_eq!((t.cost, t.verdict), (0, Verdict::Accepted));
    }

    #[test]
    fn budget_zero_stops_querying_strategies() {
        let e = EntitlementProfile::equal(2);
        let mediator = ClonedDubinsSpanier::new(&e).unwrap();
        let t = run_division_game(&mediator, &e, &uniforms(2), 0, 0).unwrap();
        assert_eq!(t.verdict, Verdict::BudgetExceeded);
        assert_eq!(t.cost, 0);
    }

    #[test]
    fn judge_examples() {
        let record = PartitionRecord::new(
            vec![serving(&[("0", "1/2")]), serving(&[("1/2", "1")])],
            vec![vec![sc("1/2"), sc("1/2")], vec![sc("1/4"), sc("3/4")]],
        )
        .unwrap();
        let e = EntitlementProfile::equal(2);
        let halves =
            Allocation::new(vec![serving(&[("0", "1/2")]), serving(&[("1/2", "1")])]).unwrap();
        assert_eq!(
            judge_allocation(&record, &e, &halves).unwrap(),
            Verdict::Accepted
        );

        let lopsided =
            Allocation::new(vec![serving(&[("0", "3/4")]), serving(&[("3/4", "1")])]).unwrap();
        assert_eq!(
            judge_allocation(&record, &e, &lopsided).unwrap(),
            Verdict::Rejected
        );
        let witness = rejecting_profile(&record, &e, &lopsided).unwrap();
        let report = check_proportional(&witness, &e, &lopsided).unwrap();
        assert!(
            !report.accepted,
            "rejecting profile must witness the failure"
        );

        let one = EntitlementProfile::new(vec![sc("1")]).unwrap();
        let whole = Allocation::new(vec![Serving::whole()]).unwrap();
        assert_eq!(
            judge_allocation(&PartitionRecord::trivial(1), &one, &whole).unwrap(),
            Verdict::Accepted
        );
    }

    #[test]
    fn check_proportional_examples() {
        let e = EntitlementProfile::equal(2);
        let halves =
            Allocation::new(vec![serving(&[("0", "1/2")]), serving(&[("1/2", "1")])]).unwrap();
        assert!(
            check_proportional(&uniforms(2), &e, &halves)
                .unwrap()
                .accepted
        );

        let e = EntitlementProfile::new(vec![sc("2/3"), sc("1/3")]).unwrap();
        let report = check_proportional(&uniforms(2), &e, &halves).unwrap();
        assert!(!report.accepted);
        assert_eq!(report.shortfalls, vec![(0, sc("1/6"))]);

        let e = EntitlementProfile::new(vec![sc("0"), sc("1")]).unwrap();
        let all_to_two = Allocation::new(vec![Serving::empty(), Serving::whole()]).unwrap();
        assert!(
            check_proportional(&uniforms(2), &e, &all_to_two)
                .unwrap()
                .accepted
        );
    }

    #[test]
    fn division_and_adversary_games_agree_on_nature() {
        let e = EntitlementProfile::equal(4);
        let mediator = ClonedDubinsSpanier::new(&e).unwrap();
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xA9EE);
        for _ in 0..10 {
            let profile = crate::sampling::random_profile(&mut rng, 4, 3);
            let division = run_division_game(&mediator, &e, &profile, 1 << 10, 7).unwrap();
            let mut nature = NatureAdversary::new(profile);
            let duel =
                run_adversary_game(&mediator, &mut nature, &e, 1 << 10, 7, false, None).unwrap();
            assert_eq!(division.steps, duel.steps);
            assert_eq!(division.cost, duel.cost);
            assert_eq!(division.final_allocation, duel.final_allocation);
            assert_eq!(division.verdict, duel.verdict);
        }
    }

    #[test]
    fn adversary_fault_on_invalid_record() {
        struct Liar;
        impl AdversaryResponder for Liar {
            fn name(&self) -> String {
                "liar".into()
            }
            fn respond(&mut self, _q: &Query) -> PartitionRecord {
                // Cell sums do not match the trivial record.
                PartitionRecord::new(
                    vec![
                        Serving::from_intervals(vec![(sc("0"), sc("1/2"))]).unwrap(),
                        Serving::from_intervals(vec![(sc("1/2"), sc("1"))]).unwrap(),
                    ],
                    vec![vec![sc("1/2"), sc("1/2")], vec![sc("1/2"), sc("1/2")]],
                )
                .unwrap()
            }
        }
        // A claimed half-split answers a 1/2-proportion query fine, so use
        // unequal entitlements to make the first query's ratio differ.
        let e3 = EntitlementProfile::new(vec![sc("1/3"), sc("2/3")]).unwrap();
        let mediator3 = ClonedDubinsSpanier::new(&e3).unwrap();
        let mut liar = Liar;
        let t = run_adversary_game(&mediator3, &mut liar, &e3, 1 << 6, 0, false, None).unwrap();
        assert_eq!(t.verdict, Verdict::AdversaryFault);
        assert_eq!(t.verdict.exit_code(), 2);
    }

    #[test]
    fn judge_soundness_against_sampling() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x1CE);
        let e = EntitlementProfile::equal(2);
        for i in 0..200 {
            let record = crate::sampling::random_record(&mut rng, 2, 4, i % 3 == 0);
            // A random prefix allocation.
            let cut = crate::sampling::random_proportion(&mut rng, 16);
            let first = Serving::prefix(&cut);
            let second = first.complement();
            if first.is_empty() || second.is_empty() {
                continue;
            }
            let x = Allocation::new(vec![first, second]).unwrap();
            match judge_allocation(&record, &e, &x).unwrap() {
                Verdict::Rejected => {
                    let witness = rejecting_profile(&record, &e, &x).unwrap();
                    for (agent, m) in witness.iter().enumerate() {
                        for (c, cell) in record.cells().iter().enumerate() {
                            assert_eq!(&m.value(cell), record.value(agent, c));
                        }
                    }
                    assert!(!check_proportional(&witness, &e, &x).unwrap().accepted);
                }
                Verdict::Accepted => {
                    // Random extensions never refute an accepted verdict.
                    for _ in 0..5 {
                        let profile = perturbed_extension(&mut rng, &record);
                        assert!(check_proportional(&profile, &e, &x).unwrap().accepted);
                    }
                }
                other => panic!("unexpected verdict {other:?}"),
            }
        }
    }

    /// A random measure profile extending the record: each cell's mass is
    /// split unevenly across the cell's own lattice refinement.
    fn perturbed_extension<R: rand::Rng>(
        rng: &mut R,
        record: &PartitionRecord,
    ) -> Vec<KitchenMeasure> {
        (0..record.agents())
            .map(|agent| {
                let mut segments = Vec::new();
                for (idx, cell) in record.cells().iter().enumerate() {
                    let value = record.value(agent, idx);
                    let intervals = cell.intervals();
                    let weights: Vec<i64> =
                        intervals.iter().map(|_| rng.random_range(1..=5)).collect();
                    let total: i64 = weights.iter().sum();
                    for ((lo, hi), w) in intervals.iter().zip(weights) {
                        segments.push((lo.clone(), hi.clone(), value * &Scalar::ratio(w, total)));
                    }
                }
                KitchenMeasure::from_segments(segments).unwrap()
            })
            .collect()
    }
}
