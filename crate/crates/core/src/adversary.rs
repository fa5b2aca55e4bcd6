//! The constructive adversary.
//!
//! Given a level-deficient partition record and any query, the adversary
//! manufactures an ultraresponse that stays ⌊√(ℓ/2)⌋-deficient: cell
//! queries get the direct two-piece construction, general queries go
//! through the three-column cutter table, Row Polarization, a delegated
//! cell split, and an ε-perturbation that restores strict positivity
//! without giving up the cutter's exact ratio. The scheduled strategy chains
//! these responses along a level schedule, forcing any mediator past c*
//! queries; past the schedule it answers from the canonical witness.
//!
//! Responses are machine-verified: every emitted record must pass the
//! ultraresponse validator, and deficiency is re-checked by brute force
//! whenever the enumeration budget allows.

use crate::deficiency::scaled::{self, Coef, QPair};
use crate::deficiency::{
    is_deficient_values, min_deficit_values, DeficiencyError, EnumerationBudget,
};
use crate::exact::{Radicand, Scalar};
use crate::indices::{
    adversary_schedule, share_precision, EntitlementProfile, IndicesError, ScheduleMode,
};
use crate::kitchen::{threshold_and_cut, AgentId, Query, Serving};
use crate::records::{ultraresponse_from_measures, validate_record, PartitionRecord};
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::ToPrimitive;
use std::cmp::Ordering;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AdversaryError {
    #[error("adversary machinery needs a two-agent record, got {0} agents")]
    NotTwoAgents(usize),
    #[error("query serving is not a cell of the record")]
    NotACell,
    #[error("enumeration infeasible within budget: {0}")]
    Infeasible(#[from] DeficiencyError),
    #[error("schedule error: {0}")]
    Schedule(#[from] IndicesError),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
    #[error("merge reduction needs more than two agents")]
    MergeNotNeeded,
    #[error("profile has no positive-precision agent")]
    DegenerateProfile,
}

#[derive(Debug, Clone, Default)]
pub struct AdversaryOptions {
    /// Re-verify deficiency of every emitted record by brute force when
    /// the enumeration fits the budget.
    pub checked: bool,
    pub budget: EnumerationBudget,
}

/// ⌊√(ℓ/2)⌋, the next deficiency level.
pub fn decayed_level(level: u64) -> u64 {
    floor_sqrt(level / 2)
}

fn floor_sqrt(v: u64) -> u64 {
    if v == 0 {
        return 0;
    }
    // Start above the true root (f64 sqrt is within 2 even past 2^53),
    // then walk down; squares are taken in u128 to survive the top of the
    // u64 range.
    let mut x = (v as f64).sqrt() as u64 + 2;
    while (x as u128) * (x as u128) > v as u128 {
        x -= 1;
    }
    x
}

/// The cutter-first view of a two-agent record: the construction always
/// reads agent 0 as the cutter. Deficiency survives the role swap with the
/// threshold replaced by its complement.
struct CutterFrame<'a> {
    values_cut: &'a [Scalar],
    values_resp: &'a [Scalar],
    e_cut: Scalar,
    cutter: AgentId,
}

fn cutter_frame<'a>(
    record: &'a PartitionRecord,
    e1: &Scalar,
    cutter: AgentId,
) -> Result<CutterFrame<'a>, AdversaryError> {
    if record.agents() != 2 {
        return Err(AdversaryError::NotTwoAgents(record.agents()));
    }
    let e_cut = if cutter == 0 {
        e1.clone()
    } else {
        Scalar::one() - e1
    };
    Ok(CutterFrame {
        values_cut: record.agent_values(cutter),
        values_resp: record.agent_values(1 - cutter),
        e_cut,
        cutter,
    })
}

type Crossing<T> = Option<(QPair<T>, u64)>;

/// Extreme line crossings over the candidate hyperallocations: the heart
/// of the two-piece split. For the responder value `v` assigned to the
/// first piece, a candidate X (cutter value at least the threshold) is
/// ruled out when its line stays strictly above the threshold at `v`.
/// Returns the largest minimal crossing among piece-heavy candidates and
/// the smallest maximal crossing among remainder-heavy ones, each as a
/// numerator over a positive slope, plus the two existence flags.
#[allow(clippy::too_many_arguments)]
fn crossing_sweep<T: Coef>(
    other_cut: &[QPair<T>],
    other_resp: &[QPair<T>],
    e_cut: &QPair<T>,
    v1: &QPair<T>,
    rest1: &QPair<T>,
    v_sup: &QPair<T>,
    d: u64,
    lplus: u64,
    budget: EnumerationBudget,
) -> Result<(Crossing<T>, Crossing<T>, bool, bool), DeficiencyError> {
    struct Sweep<T: Coef> {
        groups: Vec<(QPair<T>, QPair<T>, u64)>, // (cut, resp, count)
        d: u64,
        nodes: u64,
        max_nodes: u64,
        // best piece-heavy crossing, as numerator over positive slope
        best_hi: Option<(QPair<T>, u64)>,
        best_lo: Option<(QPair<T>, u64)>,
        has_hi: bool,
        has_lo: bool,
    }

    let mut groups: Vec<(QPair<T>, QPair<T>, u64)> = Vec::new();
    for (c, p) in other_cut.iter().zip(other_resp) {
        match groups.iter_mut().find(|(gc, gp, _)| gc == c && gp == p) {
            Some((_, _, count)) => *count += 1,
            None => groups.push((c.clone(), p.clone(), 1)),
        }
    }

    let mut sweep = Sweep {
        groups,
        d,
        nodes: 0,
        max_nodes: budget.0,
        best_hi: None,
        best_lo: None,
        has_hi: false,
        has_lo: false,
    };

    // A fresh candidate numerator improves the piece-heavy maximum when
    // N/slope is larger, the remainder-heavy minimum when smaller.
    fn better<T: Coef>(
        cand: &QPair<T>,
        slope: u64,
        incumbent: &Option<(QPair<T>, u64)>,
        d: u64,
        want_larger: bool,
    ) -> bool {
        match incumbent {
            None => true,
            Some((inc, inc_slope)) => {
                let ord = cand.mul_u64(*inc_slope).cmp_in(&inc.mul_u64(slope), d);
                if want_larger {
                    ord == Ordering::Greater
                } else {
                    ord == Ordering::Less
                }
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn dfs<T: Coef>(
        sweep: &mut Sweep<T>,
        g: usize,
        r: u64,
        need_cut: &QPair<T>, // remaining cutter value required for candidacy
        suffix_cut: &[QPair<T>],
        sum_resp: &QPair<T>,
        crossing_base: &QPair<T>, // r·e − w″·v_sup
        slope: i64,
    ) -> Result<(), DeficiencyError> {
        sweep.nodes += 1;
        if sweep.nodes > sweep.max_nodes {
            return Err(DeficiencyError::Infeasible(sweep.nodes));
        }
        let d = sweep.d;
        // Numerator of the crossing at the current partial responder sum;
        // adding more responder value only lowers it.
        let num_now = crossing_base.sub(sum_resp);
        if slope > 0 {
            if sweep.has_hi && !better(&num_now, slope as u64, &sweep.best_hi, d, true) {
                return Ok(());
            }
        } else if sweep.has_lo {
            let neg = QPair::zero().sub(&num_now);
            if !better(&neg, (-slope) as u64, &sweep.best_lo, d, false) {
                return Ok(());
            }
        }
        if g == sweep.groups.len() {
            if need_cut.sign(d) == Ordering::Greater {
                return Ok(()); // not a candidate
            }
            if slope > 0 {
                if better(&num_now, slope as u64, &sweep.best_hi, d, true) {
                    sweep.best_hi = Some((num_now, slope as u64));
                }
                sweep.has_hi = true;
            } else {
                let neg = QPair::zero().sub(&num_now);
                if better(&neg, (-slope) as u64, &sweep.best_lo, d, false) {
                    sweep.best_lo = Some((neg, (-slope) as u64));
                }
                sweep.has_lo = true;
            }
            return Ok(());
        }
        // Candidacy is out of reach even taking every remaining copy.
        if suffix_cut[g].cmp_in(need_cut, d) == Ordering::Less {
            return Ok(());
        }
        let (gc, gp, count) = sweep.groups[g].clone();
        let cap = count * r;
        let mut need = need_cut.clone();
        let mut resp = sum_resp.clone();
        for w in 0..=cap {
            if w > 0 {
                need = need.sub(&gc);
                resp = resp.add(&gp);
            }
            dfs(
                sweep,
                g + 1,
                r,
                &need,
                suffix_cut,
                &resp,
                crossing_base,
                slope,
            )?;
        }
        Ok(())
    }

    for r in 1..=lplus {
        let target = e_cut.mul_u64(r);
        let mut suffix_cut = vec![QPair::zero(); sweep.groups.len() + 1];
        for i in (0..sweep.groups.len()).rev() {
            let term = sweep.groups[i].0.mul_u64(sweep.groups[i].2 * r);
            suffix_cut[i] = suffix_cut[i + 1].add(&term);
        }
        for w_piece in 0..=r {
            for w_rest in 0..=r {
                let slope = w_piece as i64 - w_rest as i64;
                if slope == 0 {
                    continue;
                }
                let from_split = v1.mul_u64(w_piece).add(&rest1.mul_u64(w_rest));
                let need_cut = target.sub(&from_split);
                let crossing_base = target.sub(&v_sup.mul_u64(w_rest));
                dfs(
                    &mut sweep,
                    0,
                    r,
                    &need_cut,
                    &suffix_cut,
                    &QPair::zero(),
                    &crossing_base,
                    slope,
                )?;
            }
        }
    }
    Ok((sweep.best_hi, sweep.best_lo, sweep.has_hi, sweep.has_lo))
}

fn pair_to_scalar<T: Coef>(pair: &QPair<T>, slope: u64, den: &BigUint, d: u64) -> Scalar {
    let full_den = BigInt::from_biguint(num_bigint::Sign::Plus, den.clone()) * BigInt::from(slope);
    Scalar::with_radical(
        BigRational::new(pair.rat.to_bigint(), full_den.clone()),
        BigRational::new(pair.coef.to_bigint(), full_den),
        Radicand::new(d).expect("radicand validated upstream"),
    )
}

/// Picks the responder's value for the first piece of a split of
/// `split_cell`, given that the cutter assigns it `v1`. The returned value
/// keeps the refined record ⌊√(ℓ/2)⌋-deficient if the input record was
/// ℓ-deficient (threshold `e_cut` for the cutter).
fn responder_split_value(
    values_cut: &[Scalar],
    values_resp: &[Scalar],
    e_cut: &Scalar,
    split_cell: usize,
    v1: &Scalar,
    lplus: u64,
    budget: EnumerationBudget,
) -> Result<Scalar, AdversaryError> {
    let m = &values_cut[split_cell];
    let v_sup = &values_resp[split_cell];
    let rest1 = m - v1;
    let mut refs: Vec<&Scalar> = Vec::new();
    refs.extend(values_cut.iter());
    refs.extend(values_resp.iter());
    refs.push(e_cut);
    refs.push(v1);
    refs.push(&rest1);
    let (pairs, den, d) = scaled::scale_all(&refs);
    let s = values_cut.len();
    let other_cut: Vec<QPair<BigInt>> = (0..s)
        .filter(|&i| i != split_cell)
        .map(|i| pairs[i].clone())
        .collect();
    let other_resp: Vec<QPair<BigInt>> = (0..s)
        .filter(|&i| i != split_cell)
        .map(|i| pairs[s + i].clone())
        .collect();
    let e_pair = pairs[2 * s].clone();
    let v1_pair = pairs[2 * s + 1].clone();
    let rest_pair = pairs[2 * s + 2].clone();
    let vsup_pair = pairs[s + split_cell].clone();

    // i128 lane when all linear combinations provably fit.
    let narrowed: Option<Vec<QPair<i128>>> = {
        let mut all = other_cut.clone();
        all.extend(other_resp.iter().cloned());
        all.push(e_pair.clone());
        all.push(v1_pair.clone());
        all.push(rest_pair.clone());
        all.push(vsup_pair.clone());
        let mut magnitude = BigUint::default();
        for p in &all {
            magnitude = magnitude.max(p.rat.magnitude().clone());
            magnitude = magnitude.max(p.coef.magnitude().clone());
        }
        let factor = BigUint::from(4u64 * (s as u64 + 3))
            * BigUint::from(lplus + 1)
            * BigUint::from(lplus + 1);
        if (magnitude * factor).bits() < 126 {
            all.iter()
                .map(|p| {
                    Some(QPair {
                        rat: p.rat.to_i128()?,
                        coef: p.coef.to_i128()?,
                    })
                })
                .collect()
        } else {
            None
        }
    };

    let (best_hi, best_lo, has_hi, has_lo) = match narrowed {
        Some(all) => {
            let k = other_cut.len();
            let (hi, lo, fh, fl) = crossing_sweep(
                &all[..k],
                &all[k..2 * k],
                &all[2 * k],
                &all[2 * k + 1],
                &all[2 * k + 2],
                &all[2 * k + 3],
                d,
                lplus,
                budget,
            )?;
            (
                hi.map(|(p, s)| {
                    (
                        QPair {
                            rat: BigInt::from(p.rat),
                            coef: BigInt::from(p.coef),
                        },
                        s,
                    )
                }),
                lo.map(|(p, s)| {
                    (
                        QPair {
                            rat: BigInt::from(p.rat),
                            coef: BigInt::from(p.coef),
                        },
                        s,
                    )
                }),
                fh,
                fl,
            )
        }
        None => crossing_sweep(
            &other_cut,
            &other_resp,
            &e_pair,
            &v1_pair,
            &rest_pair,
            &vsup_pair,
            d,
            lplus,
            budget,
        )?,
    };

    let half = Scalar::ratio(1, 2);
    let v_star = match (has_hi, has_lo) {
        (false, false) => v_sup * &half,
        (true, false) => {
            let v_prime = Scalar::max(
                Scalar::zero(),
                best_hi
                    .map(|(p, sl)| pair_to_scalar(&p, sl, &den, d))
                    .expect("flagged"),
            );
            (&v_prime + v_sup) * half
        }
        (false, true) => {
            let v_dprime = Scalar::min(
                v_sup.clone(),
                best_lo
                    .map(|(p, sl)| pair_to_scalar(&p, sl, &den, d))
                    .expect("flagged"),
            );
            v_dprime * half
        }
        (true, true) => {
            let v_prime = Scalar::max(
                Scalar::zero(),
                best_hi
                    .map(|(p, sl)| pair_to_scalar(&p, sl, &den, d))
                    .expect("flagged"),
            );
            let v_dprime = Scalar::min(
                v_sup.clone(),
                best_lo
                    .map(|(p, sl)| pair_to_scalar(&p, sl, &den, d))
                    .expect("flagged"),
            );
            if v_prime >= v_dprime {
                return Err(AdversaryError::Invariant(format!(
                    "no admissible split value: v' = {v_prime} >= v'' = {v_dprime}; \
                     input record was not deficient at the claimed level"
                )));
            }
            (&v_prime + &v_dprime) * half
        }
    };
    if v_star.sign() != Ordering::Greater || &v_star >= v_sup {
        return Err(AdversaryError::Invariant(format!(
            "split value {v_star} escapes (0, {v_sup})"
        )));
    }
    Ok(v_star)
}

/// Cell-query response: splits the queried cell at the canonical witness
/// cut, gives the cutter the exact requested value and the responder the
/// crossing-midpoint value. The record must be `level`-deficient for
/// agent 0's threshold `e1`; the output is ⌊√(level/2)⌋-deficient.
pub fn respond_cell_query(
    record: &PartitionRecord,
    e1: &Scalar,
    level: u64,
    q: &Query,
    options: &AdversaryOptions,
) -> Result<PartitionRecord, AdversaryError> {
    let frame = cutter_frame(record, e1, q.cutter)?;
    let cell_idx = record
        .cells()
        .iter()
        .position(|c| c == &q.serving)
        .ok_or(AdversaryError::NotACell)?;
    let lplus = floor_sqrt(level / 2);
    if lplus == 0 {
        // Nothing survives at level 0; any consistent response will do.
        let out = ultraresponse_from_measures(record, q, &record.witness_profile())
            .map_err(|e| AdversaryError::Invariant(e.to_string()))?;
        return finish(record, e1, q, out, 0, options);
    }
    let witness = record.witness_measure(frame.cutter);
    let (_, piece) = threshold_and_cut(&witness, q);
    if piece.is_empty() || piece == q.serving {
        let out = ultraresponse_from_measures(record, q, &record.witness_profile())
            .map_err(|e| AdversaryError::Invariant(e.to_string()))?;
        return finish(record, e1, q, out, lplus, options);
    }
    let v1 = &q.proportion * &frame.values_cut[cell_idx];
    let v_star = responder_split_value(
        frame.values_cut,
        frame.values_resp,
        &frame.e_cut,
        cell_idx,
        &v1,
        lplus,
        options.budget,
    )?;
    let mut cells = record.cells().to_vec();
    let rest_serving = q.serving.difference(&piece);
    cells[cell_idx] = piece;
    cells.push(rest_serving);
    let mut new_cut = frame.values_cut.to_vec();
    let rest1 = &frame.values_cut[cell_idx] - &v1;
    new_cut[cell_idx] = v1;
    new_cut.push(rest1);
    let mut new_resp = frame.values_resp.to_vec();
    let rest2 = &frame.values_resp[cell_idx] - &v_star;
    new_resp[cell_idx] = v_star;
    new_resp.push(rest2);
    let values = if frame.cutter == 0 {
        vec![new_cut, new_resp]
    } else {
        vec![new_resp, new_cut]
    };
    let out = PartitionRecord::new(cells, values)
        .map_err(|e| AdversaryError::Invariant(e.to_string()))?;
    finish(record, e1, q, out, lplus, options)
}

/// Validation gate shared by the response constructions: the emitted record
/// must be a legitimate ultraresponse, and in checked mode it must pass
/// the brute-force deficiency oracle whenever the budget allows.
fn finish(
    prev: &PartitionRecord,
    e1: &Scalar,
    q: &Query,
    out: PartitionRecord,
    lplus: u64,
    options: &AdversaryOptions,
) -> Result<PartitionRecord, AdversaryError> {
    let verdict = validate_record(prev, q, &out);
    if !verdict.is_accept() {
        return Err(AdversaryError::Invariant(format!(
            "constructed response failed validation: {verdict:?}"
        )));
    }
    if options.checked && lplus >= 1 {
        match is_deficient_values(
            out.agent_values(0),
            out.agent_values(1),
            e1,
            lplus,
            options.budget,
        ) {
            Ok(v) if !v.is_deficient() => {
                return Err(AdversaryError::Invariant(format!(
                    "response is not {lplus}-deficient"
                )));
            }
            _ => {}
        }
    }
    Ok(out)
}

/// One cell of the cutter table: a (row, column) serving with per-agent
/// appraisals; empty entries carry value 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableEntry {
    pub serving: Serving,
    pub values: Vec<Scalar>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableRow {
    pub cell: Serving,
    pub entries: [TableEntry; 3],
}

/// The three-column table of a general query against a partition record:
/// rows are the record's cells, columns are (piece, serving beyond the
/// piece, outside the serving).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CutterTable {
    pub cutter: AgentId,
    pub rows: Vec<TableRow>,
}

impl CutterTable {
    fn build(record: &PartitionRecord, q: &Query, piece: &Serving) -> CutterTable {
        let witnesses = record.witness_profile();
        let rows = record
            .cells()
            .iter()
            .map(|cell| {
                let servings = [
                    cell.intersect(piece),
                    cell.intersect(&q.serving).difference(piece),
                    cell.difference(&q.serving),
                ];
                TableRow {
                    cell: cell.clone(),
                    entries: servings.map(|s| TableEntry {
                        values: witnesses.iter().map(|m| m.value(&s)).collect(),
                        serving: s,
                    }),
                }
            })
            .collect();
        CutterTable {
            cutter: q.cutter,
            rows,
        }
    }

    fn split_rows(&self, agent: AgentId) -> Vec<usize> {
        (0..self.rows.len())
            .filter(|&j| {
                self.rows[j]
                    .entries
                    .iter()
                    .filter(|e| e.values[agent].sign() == Ordering::Greater)
                    .count()
                    > 1
            })
            .collect()
    }

    /// Σ column-1 minus p · Σ (column-1 + column-2) of the agent's values;
    /// zero exactly when the cutter-appraisal ratio holds.
    fn ratio_error(&self, agent: AgentId, p: &Scalar) -> Scalar {
        let mut col1 = Scalar::zero();
        let mut col12 = Scalar::zero();
        for row in &self.rows {
            col1 = col1 + &row.entries[0].values[agent];
            col12 = col12 + &row.entries[0].values[agent] + &row.entries[1].values[agent];
        }
        col1 - &(p * &col12)
    }
}

/// Effect of one unit of value in a column on the cutter-ratio expression
/// Σ col1 − p·Σ(col1+col2).
fn column_weight(col: usize, p: &Scalar) -> Scalar {
    match col {
        0 => Scalar::one() - p,
        1 => -p.clone(),
        _ => Scalar::zero(),
    }
}

/// Row Polarization: repeatedly pairs the first and last rows with split
/// cutter appraisals and transfers value (at the ratio-preserving rate λ*)
/// until at most one split row remains. Row sums, the zero set on empty
/// entries, and the global cutter ratio are preserved at every stage.
pub fn row_polarize(table: &CutterTable, p: &Scalar) -> Result<CutterTable, AdversaryError> {
    let mut table = table.clone();
    let agent = table.cutter;
    let max_stages = 9 * table.rows.len() + 9;
    for _ in 0..=max_stages {
        let splits = table.split_rows(agent);
        if splits.len() <= 1 {
            return Ok(table);
        }
        let j1 = splits[0];
        let j2 = *splits.last().unwrap();
        let pos =
            |row: &TableRow, col: usize| row.entries[col].values[agent].sign() == Ordering::Greater;
        // Raising transfer in the first split row.
        let (src1, snk1) = {
            let row = &table.rows[j1];
            if pos(row, 0) && pos(row, 1) {
                (1, 0)
            } else if pos(row, 0) && pos(row, 2) {
                (2, 0)
            } else {
                (1, 2)
            }
        };
        // Lowering transfer in the last split row.
        let (src2, snk2) = {
            let row = &table.rows[j2];
            if pos(row, 0) && pos(row, 1) {
                (0, 1)
            } else if pos(row, 0) && pos(row, 2) {
                (0, 2)
            } else {
                (2, 1)
            }
        };
        let a1 = column_weight(snk1, p) - column_weight(src1, p);
        let a2 = column_weight(src2, p) - column_weight(snk2, p);
        debug_assert!(a1.sign() != Ordering::Less && a2.sign() != Ordering::Less);
        let amount1;
        let amount2;
        if a1.is_zero() {
            amount1 = table.rows[j1].entries[src1].values[agent].clone();
            amount2 = Scalar::zero();
        } else if a2.is_zero() {
            return Err(AdversaryError::Invariant(
                "ratio-preserving transfer rate does not exist".into(),
            ));
        } else {
            let lambda = &a1 / &a2;
            let s1 = table.rows[j1].entries[src1].values[agent].clone();
            let s2 = table.rows[j2].entries[src2].values[agent].clone();
            let v = Scalar::min(s1, &s2 / &lambda);
            amount2 = &lambda * &v;
            amount1 = v;
        }
        let apply = |table: &mut CutterTable, row: usize, src: usize, snk: usize, v: &Scalar| {
            let vals = &mut table.rows[row];
            vals.entries[src].values[agent] = &vals.entries[src].values[agent] - v;
            vals.entries[snk].values[agent] = &vals.entries[snk].values[agent] + v;
        };
        apply(&mut table, j1, src1, snk1, &amount1);
        apply(&mut table, j2, src2, snk2, &amount2);
    }
    Err(AdversaryError::Invariant(
        "row polarization failed to terminate".into(),
    ))
}

/// General-query response (arbitrary serving): table, polarization, the
/// delegated cell split, value transport, ε-perturbation, and exact-ratio
/// repair, all behind the validation gate.
pub fn respond_general_query(
    record: &PartitionRecord,
    e1: &Scalar,
    level: u64,
    q: &Query,
    options: &AdversaryOptions,
) -> Result<PartitionRecord, AdversaryError> {
    let frame = cutter_frame(record, e1, q.cutter)?;
    let lplus = floor_sqrt(level / 2);
    if lplus == 0 {
        let out = ultraresponse_from_measures(record, q, &record.witness_profile())
            .map_err(|e| AdversaryError::Invariant(e.to_string()))?;
        return finish(record, e1, q, out, 0, options);
    }
    let s = record.cells().len();
    let witness = record.witness_measure(frame.cutter);
    let (_, piece) = threshold_and_cut(&witness, q);
    let p = &q.proportion;

    let table = CutterTable::build(record, q, &piece);
    let mut table = row_polarize(&table, p)?;
    let cutter = frame.cutter;
    debug_assert!(table.ratio_error(cutter, p).is_zero());

    // Clear the split row's third column into the first two, splitting
    // p : (1-p); this preserves the global ratio and leaves the row split
    // across the first two columns only. Rows whose value sits entirely
    // in one entry are left alone: a query cannot split them further.
    let splits = table.split_rows(cutter);
    if splits.len() > 1 {
        return Err(AdversaryError::Invariant(
            "polarization left two split rows".into(),
        ));
    }
    let split_row = splits.first().copied();
    if let Some(j) = split_row {
        let row = &mut table.rows[j];
        let third = row.entries[2].values[cutter].clone();
        if third.sign() == Ordering::Greater
            && row.entries[0].values[cutter].sign() == Ordering::Greater
            && row.entries[1].values[cutter].sign() == Ordering::Greater
        {
            row.entries[0].values[cutter] = &row.entries[0].values[cutter] + &(p * &third);
            row.entries[1].values[cutter] =
                &row.entries[1].values[cutter] + &((Scalar::one() - p) * &third);
            row.entries[2].values[cutter] = Scalar::zero();
        }
    }

    // Delegated split of the one remaining split row, and the transported
    // per-entry appraisals for both agents.
    let mut plan: Vec<[(Scalar, Scalar); 3]> = Vec::with_capacity(s);
    let mut pstar_cut = frame.values_cut.to_vec();
    let mut pstar_resp = frame.values_resp.to_vec();
    for (j, row) in table.rows.iter().enumerate() {
        let mut row_plan = [
            (Scalar::zero(), Scalar::zero()),
            (Scalar::zero(), Scalar::zero()),
            (Scalar::zero(), Scalar::zero()),
        ];
        if split_row == Some(j) {
            let cols: Vec<usize> = (0..3)
                .filter(|&c| row.entries[c].values[cutter].sign() == Ordering::Greater)
                .collect();
            if cols.len() != 2 {
                return Err(AdversaryError::Invariant(format!(
                    "split row carries {} positive entries",
                    cols.len()
                )));
            }
            let x_a = row.entries[cols[0]].values[cutter].clone();
            let x_b = row.entries[cols[1]].values[cutter].clone();
            let v_star = responder_split_value(
                frame.values_cut,
                frame.values_resp,
                &frame.e_cut,
                j,
                &x_a,
                lplus,
                options.budget,
            )?;
            let v_rest = &frame.values_resp[j] - &v_star;
            row_plan[cols[0]] = (x_a.clone(), v_star.clone());
            row_plan[cols[1]] = (x_b.clone(), v_rest.clone());
            pstar_cut[j] = x_a.clone();
            pstar_cut.push(x_b);
            pstar_resp[j] = v_star;
            pstar_resp.push(v_rest);
        } else {
            let carrier = (0..3)
                .find(|&c| row.entries[c].values[cutter].sign() == Ordering::Greater)
                .ok_or_else(|| AdversaryError::Invariant("valueless row".into()))?;
            row_plan[carrier] = (frame.values_cut[j].clone(), frame.values_resp[j].clone());
        }
        plan.push(row_plan);
    }

    // Least deficit of the delegated record bounds how much total value
    // the perturbation may move before deficiency could flip.
    let delta_min =
        min_deficit_values(&pstar_cut, &pstar_resp, &frame.e_cut, lplus, options.budget)?;
    if options.checked {
        match is_deficient_values(&pstar_cut, &pstar_resp, &frame.e_cut, lplus, options.budget) {
            Ok(v) if !v.is_deficient() => {
                return Err(AdversaryError::Invariant(
                    "delegated record lost deficiency".into(),
                ));
            }
            _ => {}
        }
    }

    let mut eps = {
        let mut smallest: Option<Scalar> = None;
        for row_plan in &plan {
            for (a, b) in row_plan {
                for v in [a, b] {
                    if v.sign() == Ordering::Greater {
                        smallest = Some(match smallest {
                            None => v.clone(),
                            Some(s) => Scalar::min(s, v.clone()),
                        });
                    }
                }
            }
        }
        let quarter = smallest.expect("some value is positive") * Scalar::ratio(1, 4);
        let spread = &delta_min
            / &(Scalar::from_integer(3 * s as i64)
                * Scalar::from_integer(lplus as i64)
                * Scalar::from_integer(2));
        Scalar::min(quarter, spread)
    };

    for _ in 0..64 {
        match assemble(&table, &plan, cutter, p, &eps, &delta_min) {
            Ok(Some(out)) => return finish(record, e1, q, out, lplus, options),
            Ok(None) => eps = eps * Scalar::ratio(1, 2),
            Err(e) => return Err(e),
        }
    }
    Err(AdversaryError::Invariant(
        "perturbation repair failed to converge".into(),
    ))
}

/// One ε attempt: perturb zero nonempty entries, repair the cutter ratio
/// with a single in-row transfer, and accept only when the total drift of
/// each agent stays strictly below the deficiency margin. `Ok(None)` asks
/// the caller to retry with a smaller ε.
fn assemble(
    table: &CutterTable,
    plan: &[[(Scalar, Scalar); 3]],
    cutter: AgentId,
    p: &Scalar,
    eps: &Scalar,
    delta_min: &Scalar,
) -> Result<Option<PartitionRecord>, AdversaryError> {
    let rows = table.rows.len();
    let mut cut_vals: Vec<[Scalar; 3]> = Vec::with_capacity(rows);
    let mut resp_vals: Vec<[Scalar; 3]> = Vec::with_capacity(rows);
    for row_plan in plan {
        cut_vals.push([
            row_plan[0].0.clone(),
            row_plan[1].0.clone(),
            row_plan[2].0.clone(),
        ]);
        resp_vals.push([
            row_plan[0].1.clone(),
            row_plan[1].1.clone(),
            row_plan[2].1.clone(),
        ]);
    }
    // Per-agent ε-perturbation: every nonempty zero-valued entry becomes a
    // sink at ε, sources in the row pay in equal shares.
    for vals in [&mut cut_vals, &mut resp_vals] {
        for (j, row_vals) in vals.iter_mut().enumerate() {
            let nonempty: Vec<usize> = (0..3)
                .filter(|&c| !table.rows[j].entries[c].serving.is_empty())
                .collect();
            let sinks: Vec<usize> = nonempty
                .iter()
                .copied()
                .filter(|&c| row_vals[c].sign() != Ordering::Greater)
                .collect();
            if sinks.is_empty() {
                continue;
            }
            let sources: Vec<usize> = nonempty
                .iter()
                .copied()
                .filter(|&c| row_vals[c].sign() == Ordering::Greater)
                .collect();
            let toll = &(eps * &Scalar::from_integer(sinks.len() as i64))
                / &Scalar::from_integer(sources.len() as i64);
            for &c in &sinks {
                row_vals[c] = eps.clone();
            }
            for &c in &sources {
                row_vals[c] = &row_vals[c] - &toll;
                if row_vals[c].sign() != Ordering::Greater {
                    return Ok(None);
                }
            }
        }
    }

    // Restore the cutter's exact ratio with one in-row transfer between
    // positive entries.
    let mut err = Scalar::zero();
    for row_vals in &cut_vals {
        for (c, v) in row_vals.iter().enumerate() {
            err = err + &(&column_weight(c, p) * v);
        }
    }
    let mut applied = err.is_zero();
    if !applied {
        'search: for (j, row_vals) in cut_vals.iter().enumerate() {
            for from in 0..3 {
                for to in 0..3 {
                    if from == to
                        || table.rows[j].entries[from].serving.is_empty()
                        || table.rows[j].entries[to].serving.is_empty()
                    {
                        continue;
                    }
                    let psi = column_weight(to, p) - column_weight(from, p);
                    if psi.is_zero() {
                        continue;
                    }
                    let y = -(&err) / &psi;
                    if y.sign() == Ordering::Greater && y < row_vals[from] {
                        let row = j;
                        cut_vals[row][from] = &cut_vals[row][from] - &y;
                        cut_vals[row][to] = &cut_vals[row][to] + &y;
                        applied = true;
                        break 'search;
                    }
                }
            }
        }
    }
    if !applied {
        return Ok(None);
    }

    // Certificate: the total absolute drift from the transported values
    // must stay below the deficiency margin for each agent.
    for (vals, reference) in [(&cut_vals, 0usize), (&resp_vals, 1usize)] {
        let mut drift = Scalar::zero();
        for (j, row_vals) in vals.iter().enumerate() {
            for c in 0..3 {
                let planned = if reference == 0 {
                    &plan[j][c].0
                } else {
                    &plan[j][c].1
                };
                drift = drift + &(&row_vals[c] - planned).abs();
            }
        }
        if &drift >= delta_min {
            return Ok(None);
        }
    }

    let mut cells = Vec::new();
    let mut out_cut = Vec::new();
    let mut out_resp = Vec::new();
    for (j, row) in table.rows.iter().enumerate() {
        for c in 0..3 {
            if row.entries[c].serving.is_empty() {
                continue;
            }
            cells.push(row.entries[c].serving.clone());
            out_cut.push(cut_vals[j][c].clone());
            out_resp.push(resp_vals[j][c].clone());
        }
    }
    let values = if cutter == 0 {
        vec![out_cut, out_resp]
    } else {
        vec![out_resp, out_cut]
    };
    let out = PartitionRecord::new(cells, values)
        .map_err(|e| AdversaryError::Invariant(format!("assembled record invalid: {e}")))?;
    Ok(Some(out))
}

/// Distinguished-agent selection for the many-agent reduction: the agent
/// of maximal precision (irrational counts as infinite), ties to the
/// lowest id. Returns the merged two-agent profile (e_i, 1 - e_i).
pub fn merge_extend(e: &EntitlementProfile) -> Result<(usize, EntitlementProfile), AdversaryError> {
    if e.agents() <= 2 {
        return Err(AdversaryError::MergeNotNeeded);
    }
    let distinguished = pick_distinguished(e);
    let share = e.share(distinguished).clone();
    let pair = EntitlementProfile::new(vec![share.clone(), Scalar::one() - share])
        .map_err(|err| AdversaryError::Invariant(err.to_string()))?;
    Ok((distinguished, pair))
}

fn pick_distinguished(e: &EntitlementProfile) -> usize {
    let mut best = 0usize;
    for i in 1..e.agents() {
        if share_precision(e.share(i)) > share_precision(e.share(best)) {
            best = i;
        }
    }
    best
}

/// The scheduled adversary: maintains a level-deficient two-agent
/// partition record along the schedule; each response comes from the
/// general-query construction while levels remain, afterwards from the
/// canonical witness measures. Every mediator facing it either spends
/// more than c* queries or has its final allocation rejected.
pub struct ScheduledAdversary {
    agents: usize,
    distinguished: usize,
    e1: Scalar,
    schedule: Vec<BigUint>,
    answered: usize,
    record2: PartitionRecord,
    options: AdversaryOptions,
    notes: Vec<String>,
}

impl ScheduledAdversary {
    pub fn new(
        e: &EntitlementProfile,
        mode: ScheduleMode,
        c_star: u32,
        options: AdversaryOptions,
    ) -> Result<Self, AdversaryError> {
        let agents = e.agents();
        if agents < 2 {
            return Err(AdversaryError::DegenerateProfile);
        }
        let (distinguished, e1) = if agents == 2 {
            let d = pick_distinguished(e);
            (d, e.share(d).clone())
        } else {
            let (d, pair) = merge_extend(e)?;
            (d, pair.share(0).clone())
        };
        let schedule = adversary_schedule(mode, c_star)?;
        let mut notes = Vec::new();
        if let crate::indices::IndexValue::Finite(p) = share_precision(&e1) {
            if p <= schedule[0] {
                notes.push(format!(
                    "entitlement precision {p} does not exceed the opening level {};                      the schedule cannot guarantee forcing past {c_star}",
                    schedule[0]
                ));
            }
        }
        Ok(ScheduledAdversary {
            agents,
            distinguished,
            e1,
            schedule,
            answered: 0,
            record2: PartitionRecord::trivial(2),
            options,
            notes,
        })
    }

    pub fn distinguished(&self) -> usize {
        self.distinguished
    }

    pub fn schedule(&self) -> &[BigUint] {
        &self.schedule
    }

    pub fn notes(&self) -> &[String] {
        &self.notes
    }

    /// The two-agent role view of a query: the distinguished agent cuts as
    /// role 0, every merged agent as role 1.
    fn role_query(&self, q: &Query) -> Query {
        Query {
            cutter: usize::from(q.cutter != self.distinguished),
            serving: q.serving.clone(),
            proportion: q.proportion.clone(),
        }
    }

    /// Publishes the two-agent record for all agents: merged agents mirror
    /// role 1's appraisal.
    fn publish(&self, record2: &PartitionRecord) -> PartitionRecord {
        if self.agents == 2 && self.distinguished == 0 {
            return record2.clone();
        }
        let values = (0..self.agents)
            .map(|i| {
                let role = usize::from(i != self.distinguished);
                record2.agent_values(role).to_vec()
            })
            .collect();
        PartitionRecord::new(record2.cells().to_vec(), values).expect("role expansion is valid")
    }

    /// One strategy step: respond to the query and advance the schedule.
    pub fn respond(&mut self, q: &Query) -> PartitionRecord {
        let q2 = self.role_query(q);
        let step = self.answered;
        let within_schedule = step + 1 < self.schedule.len();
        let response = if within_schedule {
            match self.schedule[step].to_u64() {
                Some(level) => {
                    match respond_general_query(&self.record2, &self.e1, level, &q2, &self.options)
                    {
                        Ok(out) => Ok(out),
                        Err(AdversaryError::Infeasible(err)) => {
                            self.notes.push(format!(
                                "query {}: level {} beyond enumeration budget ({err}); \
                                 responded from the canonical witness, decay guarantee \
                                 not machine-checked",
                                step + 1,
                                self.schedule[step]
                            ));
                            Err(())
                        }
                        Err(err) => {
                            self.notes
                                .push(format!("query {}: construction error: {err}", step + 1));
                            Err(())
                        }
                    }
                }
                None => {
                    self.notes.push(format!(
                        "query {}: level {} exceeds machine range; responded from the \
                         canonical witness, decay guarantee not machine-checked",
                        step + 1,
                        self.schedule[step]
                    ));
                    Err(())
                }
            }
        } else {
            Err(())
        };
        let record2 = response.unwrap_or_else(|_| {
            ultraresponse_from_measures(&self.record2, &q2, &self.record2.witness_profile())
                .expect("witness profile extends its own record")
        });
        self.record2 = record2;
        self.answered += 1;
        self.publish(&self.record2)
    }
}
