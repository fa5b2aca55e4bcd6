//! Seeded random instances: measures, servings, records, entitlements.
//!
//! Shared by the property suites and the CLI's random-profile runs. All
//! generators take a caller-owned RNG so runs stay reproducible.

use crate::exact::Scalar;
use crate::indices::EntitlementProfile;
use crate::kitchen::{KitchenMeasure, Query, Serving};
use crate::records::PartitionRecord;
use rand::Rng;

/// A rational in [0, 1] with denominator at most `max_den`.
pub fn random_proportion<R: Rng>(rng: &mut R, max_den: i64) -> Scalar {
    let den = rng.random_range(1..=max_den);
    Scalar::ratio(rng.random_range(0..=den), den)
}

/// A piecewise-constant measure with up to `max_segments` segments, all
/// masses positive rationals summing to 1.
pub fn random_measure<R: Rng>(rng: &mut R, max_segments: usize) -> KitchenMeasure {
    let segments = rng.random_range(1..=max_segments.max(1));
    let grid = 4 * segments as i64 + rng.random_range(0..=8);
    let mut cuts: Vec<i64> = Vec::new();
    while cuts.len() < segments - 1 {
        let c = rng.random_range(1..grid);
        if !cuts.contains(&c) {
            cuts.push(c);
        }
    }
    cuts.sort_unstable();
    let mut breakpoints = vec![Scalar::zero()];
    breakpoints.extend(cuts.iter().map(|&c| Scalar::ratio(c, grid)));
    breakpoints.push(Scalar::one());
    let weights: Vec<i64> = (0..segments).map(|_| rng.random_range(1..=9)).collect();
    let total: i64 = weights.iter().sum();
    let masses = weights.iter().map(|&w| Scalar::ratio(w, total)).collect();
    KitchenMeasure::new(breakpoints, masses).expect("generated segments are well formed")
}

/// A measure profile with one independent random measure per agent.
pub fn random_profile<R: Rng>(
    rng: &mut R,
    agents: usize,
    max_segments: usize,
) -> Vec<KitchenMeasure> {
    (0..agents)
        .map(|_| random_measure(rng, max_segments))
        .collect()
}

/// A serving with up to `max_intervals` intervals on a 1/grid lattice.
/// May be empty.
pub fn random_serving<R: Rng>(rng: &mut R, max_intervals: usize, grid: i64) -> Serving {
    let mut cuts: Vec<i64> = Vec::new();
    for _ in 0..2 * max_intervals {
        cuts.push(rng.random_range(0..=grid));
    }
    cuts.sort_unstable();
    cuts.dedup();
    let mut intervals = Vec::new();
    for pair in cuts.chunks(2) {
        if let [a, b] = pair {
            if rng.random_bool(0.75) {
                intervals.push((Scalar::ratio(*a, grid), Scalar::ratio(*b, grid)));
            }
        }
    }
    Serving::from_intervals(intervals).expect("lattice intervals are inside the cake")
}

/// A random query: any cutter, a nonempty random serving, and a rational
/// proportion (occasionally exactly 0 or 1 to hit the trivial-cut paths).
pub fn random_query<R: Rng>(rng: &mut R, agents: usize, grid: i64) -> Query {
    let serving = loop {
        let s = random_serving(rng, 3, grid);
        if !s.is_empty() {
            break s;
        }
    };
    let proportion = match rng.random_range(0..10) {
        0 => Scalar::zero(),
        1 => Scalar::one(),
        _ => random_proportion(rng, 12),
    };
    Query::new(rng.random_range(0..agents), serving, proportion).expect("proportion in range")
}

/// Positive rationals summing to one.
fn random_simplex<R: Rng>(rng: &mut R, parts: usize) -> Vec<Scalar> {
    let weights: Vec<i64> = (0..parts).map(|_| rng.random_range(1..=19)).collect();
    let total: i64 = weights.iter().sum();
    weights.iter().map(|&w| Scalar::ratio(w, total)).collect()
}

/// A valid partition record with up to `max_cells` cells. Cells are unions
/// of lattice intervals, so some are disconnected. With `radical` set, each
/// agent's values get a ±ε√5 twist that cancels across cells, exercising
/// the extension-field paths while keeping every value positive.
pub fn random_record<R: Rng>(
    rng: &mut R,
    agents: usize,
    max_cells: usize,
    radical: bool,
) -> PartitionRecord {
    let cells_wanted = rng.random_range(1..=max_cells.max(1));
    let pieces = rng.random_range(cells_wanted..=cells_wanted + 2);
    let grid = 4 * pieces as i64;
    let mut cuts: Vec<i64> = Vec::new();
    while cuts.len() < pieces - 1 {
        let c = rng.random_range(1..grid);
        if !cuts.contains(&c) {
            cuts.push(c);
        }
    }
    cuts.sort_unstable();
    let mut bounds = vec![0];
    bounds.extend(cuts);
    bounds.push(grid);
    // Deal the contiguous pieces onto cells, each cell taking at least one.
    let mut owner: Vec<usize> = (0..pieces)
        .map(|i| {
            if i < cells_wanted {
                i
            } else {
                rng.random_range(0..cells_wanted)
            }
        })
        .collect();
    // A fixed shuffle keeps cell 0 from always owning the leftmost piece.
    for i in (1..owner.len()).rev() {
        owner.swap(i, rng.random_range(0..=i));
    }
    let mut cells = Vec::new();
    for cell in 0..cells_wanted {
        let intervals = (0..pieces).filter(|&i| owner[i] == cell).map(|i| {
            (
                Scalar::ratio(bounds[i], grid),
                Scalar::ratio(bounds[i + 1], grid),
            )
        });
        cells.push(Serving::from_intervals(intervals).expect("lattice intervals"));
    }
    let mut values: Vec<Vec<Scalar>> = (0..agents)
        .map(|_| random_simplex(rng, cells_wanted))
        .collect();
    if radical && cells_wanted >= 2 {
        let twist: Scalar = "1/1000\u{221a}5".parse().unwrap();
        for vals in values.iter_mut() {
            let (a, b) = (
                rng.random_range(0..cells_wanted),
                rng.random_range(0..cells_wanted),
            );
            if a != b {
                vals[a] = &vals[a] + &twist;
                vals[b] = &vals[b] - &twist;
            }
        }
    }
    PartitionRecord::new(cells, values).expect("constructed cells partition the cake")
}

/// A random rational entitlement profile with per-agent denominators at
/// most `max_den`, summing to one exactly.
pub fn random_entitlements<R: Rng>(rng: &mut R, agents: usize, max_den: i64) -> EntitlementProfile {
    loop {
        let mut parts: Vec<Scalar> = (0..agents - 1)
            .map(|_| {
                let den = rng.random_range(1..=max_den);
                Scalar::ratio(rng.random_range(0..=den), den)
            })
            .collect();
        let rest = Scalar::one() - parts.iter().sum::<Scalar>();
        if rest.sign() == std::cmp::Ordering::Less {
            continue;
        }
        parts.push(rest);
        if let Ok(profile) = EntitlementProfile::new(parts) {
            return profile;
        }
    }
}
