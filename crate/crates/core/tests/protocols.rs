//! Protocol-level behavior across the division game: exact query counts,
//! exact proportionality under random measures, and halving costs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rwcake::arena::{check_proportional, run_division_game, Verdict};
use rwcake::exact::Scalar;
use rwcake::kitchen::Serving;
use rwcake::protocols::{ClonedDubinsSpanier, EvenPaz};
use rwcake::sampling;
use rwcake::EntitlementProfile;

fn sc(text: &str) -> Scalar {
    text.parse().unwrap()
}

#[test]
fn cloned_ds_exact_proportionality_random_rational_entitlements() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x9000);
    let mut runs = 0;
    while runs < 100 {
        // Profiles off the 1/12 grid keep the clonage at 12 or below.
        let n = rng.random_range(2..=4usize);
        let mut parts: Vec<i64> = (0..n).map(|_| rng.random_range(0..=6)).collect();
        let used: i64 = parts.iter().sum();
        if used >= 12 {
            continue;
        }
        parts[n - 1] += 12 - used;
        let e = match EntitlementProfile::new(parts.iter().map(|&k| Scalar::ratio(k, 12)).collect())
        {
            Ok(e) => e,
            Err(_) => continue,
        };
        let mediator = match ClonedDubinsSpanier::new(&e) {
            Ok(m) => m,
            Err(_) => continue,
        };
        runs += 1;
        let profile = sampling::random_profile(&mut rng, n, 3);
        let t = run_division_game(&mediator, &e, &profile, 1 << 12, runs as u64).unwrap();
        assert_eq!(t.verdict, Verdict::Accepted);
        assert_eq!(t.cost, mediator.total_queries());
        let report = check_proportional(&profile, &e, &t.final_allocation.unwrap()).unwrap();
        assert!(report.accepted, "exact e-proportionality");
    }
}

#[test]
fn even_paz_costs_and_outputs() {
    // One agent: the whole cake in zero queries.
    let e = EntitlementProfile::equal(1);
    let t = run_division_game(
        &EvenPaz::new(&e).unwrap(),
        &e,
        &[rwcake::KitchenMeasure::uniform()],
        16,
        0,
    )
    .unwrap();
    assert_eq!((t.cost, t.verdict), (0, Verdict::Accepted));
    assert_eq!(t.final_allocation.unwrap().serving(0), &Serving::whole());

    // Two uniform agents: halves in two queries.
    let e = EntitlementProfile::equal(2);
    let uniforms = vec![rwcake::KitchenMeasure::uniform(); 2];
    let t = run_division_game(&EvenPaz::new(&e).unwrap(), &e, &uniforms, 16, 0).unwrap();
    assert_eq!((t.cost, t.verdict), (2, Verdict::Accepted));
    let x = t.final_allocation.unwrap();
    assert_eq!(x.serving(0).length(), sc("1/2"));

    // Four uniform agents: quarters within n·ceil(log2 n) = 8 queries.
    let e = EntitlementProfile::equal(4);
    let uniforms = vec![rwcake::KitchenMeasure::uniform(); 4];
    let t = run_division_game(&EvenPaz::new(&e).unwrap(), &e, &uniforms, 64, 0).unwrap();
    assert!(t.cost <= 8, "cost {} over the halving bound", t.cost);
    assert_eq!(t.verdict, Verdict::Accepted);
    for agent in 0..4 {
        assert_eq!(
            t.final_allocation.as_ref().unwrap().serving(agent).length(),
            sc("1/4")
        );
    }

    assert!(EvenPaz::new(&EntitlementProfile::new(vec![sc("1/3"), sc("2/3")]).unwrap()).is_err());
}

#[test]
fn even_paz_proportional_on_random_profiles() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x9001);
    for n in 2..=6usize {
        let e = EntitlementProfile::equal(n);
        let mediator = EvenPaz::new(&e).unwrap();
        let bound = n as u64 * (n as f64).log2().ceil() as u64;
        for round in 0..20 {
            let profile = sampling::random_profile(&mut rng, n, 3);
            let t = run_division_game(&mediator, &e, &profile, 256, round).unwrap();
            assert_eq!(t.verdict, Verdict::Accepted);
            assert!(t.cost <= bound, "n = {n}: cost {} > {bound}", t.cost);
            let report = check_proportional(&profile, &e, &t.final_allocation.unwrap()).unwrap();
            assert!(report.accepted);
        }
    }
}
