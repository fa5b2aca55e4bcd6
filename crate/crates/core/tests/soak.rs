//! Long-running randomized soak over the adversary constructions, beyond
//! the acceptance suite's pinned scale. Ignored by default:
//!
//! ```sh
//! cargo test -p rwcake --test soak -- --ignored --nocapture
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rwcake::adversary::{
    decayed_level, respond_cell_query, respond_general_query, AdversaryOptions, ScheduledAdversary,
};
use rwcake::arena::{run_adversary_game, Verdict};
use rwcake::deficiency::{is_deficient, EnumerationBudget};
use rwcake::exact::{golden_entitlement, Scalar};
use rwcake::indices::ScheduleMode;
use rwcake::kitchen::Query;
use rwcake::protocols::mediator_by_name;
use rwcake::records::validate_record;
use rwcake::sampling;
use rwcake::EntitlementProfile;

#[test]
#[ignore = "long soak; run explicitly"]
fn decay_soak_two_thousand_records() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x50AC);
    let budget = EnumerationBudget::default();
    let options = AdversaryOptions {
        checked: false,
        budget,
    };
    let mut produced = 0usize;
    let mut attempts = 0usize;
    while produced < 2000 {
        attempts += 1;
        assert!(attempts < 200_000, "generator starved");
        let record = sampling::random_record(&mut rng, 2, 5, attempts % 3 == 0);
        let e1 = match attempts % 5 {
            0 => golden_entitlement(),
            1 => Scalar::ratio(1009, 2027) + golden_entitlement() * Scalar::ratio(1, 1000),
            2 => Scalar::ratio(257, 521),
            3 => Scalar::ratio(rng.random_range(1..=168), 169),
            _ => sampling::random_proportion(&mut rng, 113),
        };
        let level = rng.random_range(4..=18u64);
        match is_deficient(&record, &e1, level, budget) {
            Ok(v) if v.is_deficient() => {}
            _ => continue,
        }
        produced += 1;
        let lplus = decayed_level(level);
        let cell = record.cells()[rng.random_range(0..record.cells().len())].clone();
        let q = Query::new(
            rng.random_range(0..2),
            cell,
            sampling::random_proportion(&mut rng, 20),
        )
        .unwrap();
        let out = respond_cell_query(&record, &e1, level, &q, &options).unwrap();
        assert!(
            validate_record(&record, &q, &out).is_accept(),
            "record {produced}"
        );
        assert!(is_deficient(&out, &e1, lplus, budget)
            .unwrap()
            .is_deficient());

        let q = sampling::random_query(&mut rng, 2, 24);
        let out = respond_general_query(&record, &e1, level, &q, &options).unwrap();
        assert!(
            validate_record(&record, &q, &out).is_accept(),
            "record {produced}"
        );
        assert!(is_deficient(&out, &e1, lplus, budget)
            .unwrap()
            .is_deficient());
        if produced % 500 == 0 {
            println!("{produced} records survived");
        }
    }
}

#[test]
#[ignore = "long soak; run explicitly"]
fn duel_soak_many_seeds() {
    let profiles = [
        EntitlementProfile::golden(),
        EntitlementProfile::new(vec![
            Scalar::ratio(25000, 40961),
            Scalar::one() - Scalar::ratio(25000, 40961),
        ])
        .unwrap(),
    ];
    for e in &profiles {
        for (mode, c_star) in [(ScheduleMode::Paper, 2), (ScheduleMode::Minimal, 3)] {
            for mediator_name in ["cloned-ds", "random", "greedy"] {
                for seed in 0..200u64 {
                    let mut adversary =
                        ScheduledAdversary::new(e, mode, c_star, AdversaryOptions::default())
                            .unwrap();
                    let mediator =
                        mediator_by_name(mediator_name, e, c_star as usize, seed).unwrap();
                    let t = run_adversary_game(
                        mediator.as_ref(),
                        &mut adversary,
                        e,
                        c_star as u64 + 1,
                        seed,
                        false,
                        None,
                    )
                    .unwrap();
                    let forced = t.verdict != Verdict::Accepted || t.cost > c_star as u64;
                    assert!(
                        forced,
                        "{mediator_name} seed {seed} c*={c_star}: {:?}/{}",
                        t.verdict, t.cost
                    );
                }
            }
        }
    }
}
