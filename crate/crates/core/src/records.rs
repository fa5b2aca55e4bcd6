//! Partition records: the mediator's knowledge state.
//!
//! A partition record is a partition of the cake into cells plus one exact
//! appraisal per agent per cell. Responses are normalized into partition
//! records incrementally (ultraresponses), refusing to reconstruct atom
//! values from overlapping servings. The validity test is constructive:
//! `witness_measure` realizes any valid record as a concrete kitchen
//! measure, so the extending-measure set is never empty.

use crate::exact::Scalar;
use crate::kitchen::{threshold_and_cut, AgentId, KitchenMeasure, Query, Serving};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RecordError {
    #[error("cells do not partition the cake (disjoint, nonempty, exhaustive)")]
    NotAPartition,
    #[error("agent {0}: values must be positive, aligned with cells, and sum to 1")]
    BadValues(AgentId),
    #[error("record needs at least one agent")]
    NoAgents,
    #[error("measure profile does not extend the record at agent {agent}, cell {cell}")]
    ProfileMismatch { agent: AgentId, cell: usize },
    #[error("profile has {0} agents, record has {1}")]
    WrongProfileSize(usize, usize),
}

/// A valid partition record: cells partition (0,1], every appraisal is
/// strictly positive, and each agent's appraisals sum to 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RecordDoc", into = "RecordDoc")]
pub struct PartitionRecord {
    cells: Vec<Serving>,
    // values[agent][cell]
    values: Vec<Vec<Scalar>>,
}

/// JSON document form: `{cells: [...], values: {"1": [...], "2": [...]}}`
/// with 1-based agent keys. Conversion into `PartitionRecord` validates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecordDoc {
    pub cells: Vec<Serving>,
    pub values: BTreeMap<u32, Vec<Scalar>>,
}

impl From<PartitionRecord> for RecordDoc {
    fn from(r: PartitionRecord) -> Self {
        RecordDoc {
            cells: r.cells,
            values: r
                .values
                .into_iter()
                .enumerate()
                .map(|(i, v)| (i as u32 + 1, v))
                .collect(),
        }
    }
}

impl TryFrom<RecordDoc> for PartitionRecord {
    type Error = RecordError;
    fn try_from(doc: RecordDoc) -> Result<Self, RecordError> {
        let agents = doc.values.len();
        let mut values = vec![Vec::new(); agents];
        for (key, vals) in doc.values {
            let idx = key as usize;
            if idx == 0 || idx > agents {
                return Err(RecordError::BadValues(idx));
            }
            values[idx - 1] = vals;
        }
        PartitionRecord::new(doc.cells, values)
    }
}

impl PartitionRecord {
    /// Builds and validates; cells are put in canonical left-to-right order.
    pub fn new(cells: Vec<Serving>, values: Vec<Vec<Scalar>>) -> Result<Self, RecordError> {
        if values.is_empty() {
            return Err(RecordError::NoAgents);
        }
        if !is_partition(&cells) {
            return Err(RecordError::NotAPartition);
        }
        for (agent, vals) in values.iter().enumerate() {
            if vals.len() != cells.len()
                || vals.iter().any(|v| v.sign() != Ordering::Greater)
                || vals.iter().sum::<Scalar>() != Scalar::one()
            {
                return Err(RecordError::BadValues(agent));
            }
        }
        let mut order: Vec<usize> = (0..cells.len()).collect();
        order.sort_by(|&a, &b| cells[a].intervals()[0].0.cmp(&cells[b].intervals()[0].0));
        let cells = order.iter().map(|&i| cells[i].clone()).collect();
        let values = values
            .into_iter()
            .map(|vals| order.iter().map(|&i| vals[i].clone()).collect())
            .collect();
        Ok(PartitionRecord { cells, values })
    }

    /// The one-cell record {C} with unit appraisals.
    pub fn trivial(agents: usize) -> Self {
        PartitionRecord {
            cells: vec![Serving::whole()],
            values: vec![vec![Scalar::one()]; agents],
        }
    }

    pub fn agents(&self) -> usize {
        self.values.len()
    }

    pub fn cells(&self) -> &[Serving] {
        &self.cells
    }

    pub fn value(&self, agent: AgentId, cell: usize) -> &Scalar {
        &self.values[agent][cell]
    }

    pub fn agent_values(&self, agent: AgentId) -> &[Scalar] {
        &self.values[agent]
    }

    /// Subalgebra extension: the agent's value of a union of cells.
    /// `None` when the serving is not a union of this record's cells.
    pub fn extension(&self, agent: AgentId, s: &Serving) -> Option<Scalar> {
        let mut total = Scalar::zero();
        let mut covered = Serving::empty();
        for (cell, value) in self.cells.iter().zip(&self.values[agent]) {
            if s.contains(cell) {
                total = total + value;
                covered = covered.union(cell);
            }
        }
        if covered == *s {
            Some(total)
        } else {
            None
        }
    }

    /// Sum of the agent's values over cells fully contained in `s`; the
    /// infimum of `μ(s)` over measures extending this record.
    pub fn contained_value(&self, agent: AgentId, s: &Serving) -> Scalar {
        self.cells
            .iter()
            .zip(&self.values[agent])
            .filter(|(cell, _)| s.contains(cell))
            .map(|(_, v)| v.clone())
            .sum()
    }

    /// A record with the two agent roles exchanged. Only meaningful for
    /// two-agent records; used for cutter-first role canonicalization.
    pub fn swap_agents(&self) -> PartitionRecord {
        assert_eq!(self.agents(), 2);
        PartitionRecord {
            cells: self.cells.clone(),
            values: vec![self.values[1].clone(), self.values[0].clone()],
        }
    }

    /// The canonical extending measure for one agent: each cell's value
    /// spread uniformly over the cell's intervals.
    pub fn witness_measure(&self, agent: AgentId) -> KitchenMeasure {
        let mut segments = Vec::new();
        for (cell, value) in self.cells.iter().zip(&self.values[agent]) {
            let len = cell.length();
            for (lo, hi) in cell.intervals() {
                segments.push((lo.clone(), hi.clone(), value * &((hi - lo) / &len)));
            }
        }
        KitchenMeasure::from_segments(segments).expect("cells partition the cake")
    }

    /// Canonical witness measures for every agent.
    pub fn witness_profile(&self) -> Vec<KitchenMeasure> {
        (0..self.agents())
            .map(|a| self.witness_measure(a))
            .collect()
    }
}

impl fmt::Display for PartitionRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, cell) in self.cells.iter().enumerate() {
            write!(f, "{cell}: ")?;
            for (a, vals) in self.values.iter().enumerate() {
                if a > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{}", vals[i])?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

fn is_partition(cells: &[Serving]) -> bool {
    if cells.is_empty() || cells.iter().any(Serving::is_empty) {
        return false;
    }
    let mut union = Serving::empty();
    let mut total = Scalar::zero();
    for cell in cells {
        total = total + cell.length();
        union = union.union(cell);
    }
    // Disjointness via lengths: the union's length drops below the sum
    // exactly when two cells overlap.
    union == Serving::whole() && total == Scalar::one()
}

/// Refines `prev` by the cut a measure profile gives for `q`: each cell
/// splits into at most three atoms (inside the cut piece, inside the
/// serving beyond the piece, outside the serving), valued by the profile.
pub fn ultraresponse_from_measures(
    prev: &PartitionRecord,
    q: &Query,
    profile: &[KitchenMeasure],
) -> Result<PartitionRecord, RecordError> {
    if profile.len() != prev.agents() {
        return Err(RecordError::WrongProfileSize(profile.len(), prev.agents()));
    }
    for (agent, measure) in profile.iter().enumerate() {
        for (cell_idx, cell) in prev.cells().iter().enumerate() {
            if &measure.value(cell) != prev.value(agent, cell_idx) {
                return Err(RecordError::ProfileMismatch {
                    agent,
                    cell: cell_idx,
                });
            }
        }
    }
    Ok(ultraresponse_unchecked(prev, q, profile))
}

/// The refinement without the extends-the-record precondition check, for
/// callers that built `prev` from the same profile and hold the invariant
/// by construction. Cells the cut leaves whole keep their recorded values;
/// only genuinely split cells are re-measured.
pub(crate) fn ultraresponse_unchecked(
    prev: &PartitionRecord,
    q: &Query,
    profile: &[KitchenMeasure],
) -> PartitionRecord {
    let (_, piece) = threshold_and_cut(&profile[q.cutter], q);
    let mut cells = Vec::new();
    let mut values: Vec<Vec<Scalar>> = vec![Vec::new(); profile.len()];
    for (cell_idx, cell) in prev.cells().iter().enumerate() {
        let in_piece = cell.intersect(&piece);
        let in_rest = cell.intersect(&q.serving).difference(&piece);
        let outside = cell.difference(&q.serving);
        let atoms: Vec<Serving> = [in_piece, in_rest, outside]
            .into_iter()
            .filter(|a| !a.is_empty())
            .collect();
        if atoms.len() == 1 {
            cells.push(cell.clone());
            for (agent, vals) in values.iter_mut().enumerate() {
                vals.push(prev.value(agent, cell_idx).clone());
            }
        } else {
            for atom in atoms {
                for (agent, vals) in values.iter_mut().enumerate() {
                    vals.push(profile[agent].value(&atom));
                }
                cells.push(atom);
            }
        }
    }
    PartitionRecord::new(cells, values).expect("profile-derived refinements are valid")
}

/// Outcome of the ultraresponse validity test, naming the violated clause.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum UltraVerdict {
    /// Valid; carries a cut parameter realizing the refinement.
    Accept {
        cut: Scalar,
    },
    Reject(UltraViolation),
}

impl UltraVerdict {
    pub fn is_accept(&self) -> bool {
        matches!(self, UltraVerdict::Accept { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UltraViolation {
    /// Not a partition of the cake aligned with the appraisals.
    Structure,
    /// No single knife stop yields these atoms with the cutter's exact ratio.
    CutCompatibility,
    /// Some agent's sub-cell values do not sum to the parent cell's value.
    AppraisalCompatibility,
    /// A value is zero or negative, or an empty cell was kept.
    SliverCompatibility,
}

impl fmt::Display for UltraViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            UltraViolation::Structure => "structure",
            UltraViolation::CutCompatibility => "cut compatibility",
            UltraViolation::AppraisalCompatibility => "appraisal compatibility",
            UltraViolation::SliverCompatibility => "sliver compatibility",
        };
        write!(f, "{name}")
    }
}

/// Decides whether `(cells, values)` is a legitimate ultraresponse to `q`
/// from `prev`: a single prefix cut of the queried serving refines `prev`
/// into these atoms, the cutter's extended values meet the target ratio
/// exactly, per-cell sums are preserved, and no nonempty atom is null.
///
/// Cut compatibility is checked structurally, by searching the finitely
/// many distinct knife stops; on this kitchen the cutter's piece is always
/// a prefix of the serving, so this is equivalent to the existence of an
/// extending measure realizing the cut.
pub fn validate_ultraresponse(
    prev: &PartitionRecord,
    q: &Query,
    cells: &[Serving],
    values: &[Vec<Scalar>],
) -> UltraVerdict {
    use UltraVerdict::Reject;
    use UltraViolation::*;

    if values.len() != prev.agents()
        || cells.is_empty()
        || q.cutter >= prev.agents()
        || values.iter().any(|vals| vals.len() != cells.len())
    {
        return Reject(Structure);
    }
    if !is_partition(cells) {
        // An empty kept cell is a sliver-clause failure, not a shape failure.
        if cells.iter().any(Serving::is_empty) {
            return Reject(SliverCompatibility);
        }
        return Reject(Structure);
    }
    if values
        .iter()
        .any(|vals| vals.iter().any(|v| v.sign() != Ordering::Greater))
    {
        return Reject(SliverCompatibility);
    }

    // Parent lookup; every atom must sit inside exactly one previous cell.
    let mut parent = Vec::with_capacity(cells.len());
    for cell in cells {
        match prev.cells().iter().position(|p| p.contains(cell)) {
            Some(idx) => parent.push(idx),
            None => return Reject(CutCompatibility),
        }
    }

    for (agent, agent_values) in values.iter().enumerate() {
        for parent_idx in 0..prev.cells().len() {
            let sum: Scalar = agent_values
                .iter()
                .zip(&parent)
                .filter(|(_, &p)| p == parent_idx)
                .map(|(v, _)| v.clone())
                .sum();
            if &sum != prev.value(agent, parent_idx) {
                return Reject(AppraisalCompatibility);
            }
        }
    }

    // Candidate knife stops: 0 plus the supremum of every atom inside S.
    let mut stops = vec![Scalar::zero()];
    for cell in cells {
        if q.serving.contains(cell) {
            stops.push(cell.sup().expect("nonempty").clone());
        }
    }
    'stops: for t in stops {
        let piece = q.serving.intersect(&Serving::prefix(&t));
        for (parent_idx, parent_cell) in prev.cells().iter().enumerate() {
            let expect = [
                parent_cell.intersect(&piece),
                parent_cell.intersect(&q.serving).difference(&piece),
                parent_cell.difference(&q.serving),
            ];
            let mut children: Vec<&Serving> = cells
                .iter()
                .zip(&parent)
                .filter(|(_, &p)| p == parent_idx)
                .map(|(c, _)| c)
                .collect();
            for region in expect.iter().filter(|r| !r.is_empty()) {
                match children.iter().position(|c| *c == region) {
                    Some(at) => {
                        children.remove(at);
                    }
                    None => continue 'stops,
                }
            }
            if !children.is_empty() {
                continue 'stops;
            }
        }
        // Cutter's exact ratio over the extension to the new atoms.
        let piece_value: Scalar = cells
            .iter()
            .zip(&values[q.cutter])
            .filter(|(c, _)| piece.contains(c))
            .map(|(_, v)| v.clone())
            .sum();
        let serving_value: Scalar = cells
            .iter()
            .zip(&values[q.cutter])
            .filter(|(c, _)| q.serving.contains(c))
            .map(|(_, v)| v.clone())
            .sum();
        if piece_value == &q.proportion * &serving_value {
            return UltraVerdict::Accept { cut: t };
        }
    }
    Reject(CutCompatibility)
}

/// Convenience form of [`validate_ultraresponse`] for a built record.
pub fn validate_record(prev: &PartitionRecord, q: &Query, cand: &PartitionRecord) -> UltraVerdict {
    validate_ultraresponse(prev, q, cand.cells(), &cand.values)
}
