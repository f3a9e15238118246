use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ttpqd::archive::{relaxed_thresholds, GridSpec, InsertOutcome, MapGrid};
use ttpqd::kp_ops::{pwt_dp, random_feasible_packing, repair_packing};
use ttpqd::oracle::{random_instance, random_tour};
use ttpqd::tsp_ops::{eax_1ab_detailed, two_opt_move, two_opt_reverse};
use ttpqd::ttp::{tour_length, ttp_objective};
use ttpqd::{Instance, InstanceBuilder, Item, PackingList, Solution, Tour};

fn instance(seed: u64) -> Instance {
    random_instance(&mut ChaCha8Rng::seed_from_u64(seed), 12, 16, 40, 200)
}

fn synthetic(f: f64, g: f64, z: f64) -> Solution {
    Solution {
        tour: Tour::identity(3),
        packing: PackingList::empty(0),
        f,
        g,
        z,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distances_are_symmetric(seed in any::<u64>()) {
        let inst = instance(seed);
        for u in 0..inst.n() {
            prop_assert_eq!(inst.distance(u, u), 0.0);
            for v in 0..inst.n() {
                prop_assert_eq!(inst.distance(u, v), inst.distance(v, u));
                prop_assert!(inst.distance(u, v) >= 0.0);
            }
        }
    }

    #[test]
    fn instances_survive_a_text_round_trip(seed in any::<u64>()) {
        let inst = instance(seed);
        let back: Instance = inst.to_ttp_string().parse().unwrap();
        prop_assert_eq!(back, inst);
    }

    #[test]
    fn tours_lead_with_the_first_city(perm in Just((0..9usize).collect::<Vec<_>>()).prop_shuffle()) {
        let t = Tour::new(perm.clone()).unwrap();
        prop_assert_eq!(t.order()[0], 0);
        let mut sorted = t.order().to_vec();
        sorted.sort();
        prop_assert_eq!(sorted, (0..9).collect::<Vec<_>>());
        // same cyclic sequence
        let k = perm.iter().position(|&c| c == 0).unwrap();
        let rotated: Vec<usize> = perm[k..].iter().chain(&perm[..k]).copied().collect();
        prop_assert_eq!(t.order(), &rotated[..]);
    }

    #[test]
    fn repair_yields_a_feasible_subset(seed in any::<u64>()) {
        let inst = instance(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let all = PackingList::from_picks(&inst, vec![true; inst.m()]).unwrap();
        let mut y = all.clone();
        repair_packing(&inst, &mut y, &mut rng);
        prop_assert!(y.is_feasible(&inst));
        prop_assert!(y.is_coherent(&inst));
        prop_assert!(y.picked().all(|j| all.is_picked(j)));
    }

    #[test]
    fn packing_dp_beats_random_packings(seed in any::<u64>()) {
        let inst = instance(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let t = random_tour(&inst, &mut rng);
        let best = pwt_dp(&inst, &t);
        prop_assert!(best.packing.is_feasible(&inst));
        prop_assert!((ttp_objective(&inst, &t, &best.packing).unwrap() - best.z).abs() <= 1e-9);
        for _ in 0..20 {
            let y = random_feasible_packing(&inst, &mut rng);
            prop_assert!(ttp_objective(&inst, &t, &y).unwrap() <= best.z + 1e-9);
        }
    }

    #[test]
    fn free_items_add_exactly_their_profit(seed in any::<u64>(), profit in 0u32..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(3..10);
        let coords = (0..n).map(|_| (rng.gen_range(0..50) as f64, rng.gen_range(0..50) as f64)).collect();
        let mut b = InstanceBuilder::new(coords, ttpqd::EdgeWeightType::Ceil2d);
        b.items = vec![
            Item { profit: profit as f64, weight: 0, city: rng.gen_range(1..n) },
            Item { profit: 1.0, weight: 3, city: 1 },
        ];
        b.capacity = 5;
        b.min_speed = 0.1;
        b.max_speed = 1.0;
        b.renting_ratio = 1.5;
        let inst = b.build().unwrap();
        let t = random_tour(&inst, &mut rng);
        let none = PackingList::empty(2);
        let free = PackingList::from_indices(&inst, &[0]).unwrap();
        let z0 = ttp_objective(&inst, &t, &none).unwrap();
        let z1 = ttp_objective(&inst, &t, &free).unwrap();
        prop_assert_eq!(z1 - z0, profit as f64);
    }

    #[test]
    fn operators_keep_tours_valid(seed in any::<u64>()) {
        let inst = instance(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_tour(&inst, &mut rng);
        let b = random_tour(&inst, &mut rng);
        let out = eax_1ab_detailed(&inst, &a, &b, &mut rng);
        prop_assert_eq!(&Tour::new(out.child.order().to_vec()).unwrap(), &out.child);
        if let Some(c) = &out.cycle {
            prop_assert!(c.validate(&a, &b).is_ok());
        }
        let moved = two_opt_move(&a, &mut rng);
        prop_assert_eq!(&Tour::new(moved.order().to_vec()).unwrap(), &moved);
        let n = inst.n();
        if n >= 3 {
            let i = rng.gen_range(1..n);
            let j = rng.gen_range(i..n);
            let once = two_opt_reverse(&a, i, j);
            prop_assert_eq!(two_opt_reverse(&once, i, j), a.clone());
            prop_assert_eq!(tour_length(&inst, &a.reversed()), tour_length(&inst, &a));
        }
    }

    #[test]
    fn cells_contain_their_descriptors(
        f_star in 1.0f64..1e5,
        g_star in 1.0f64..1e5,
        a1 in 0.001f64..1.0,
        a2 in 0.001f64..1.0,
        d1 in 1usize..40,
        d2 in 1usize..40,
        u in 0.0f64..=1.0,
        v in 0.0f64..=1.0,
    ) {
        let spec = GridSpec::new(f_star, g_star, a1, a2, d1, d2).unwrap();
        let f = spec.f_star + u * (spec.f_max - spec.f_star);
        let g = spec.g_min + v * (spec.g_star - spec.g_min);
        let f = f.clamp(spec.f_star, spec.f_max);
        let g = g.clamp(spec.g_min, spec.g_star);
        let (i, j) = spec.cell_index(f, g).unwrap();
        prop_assert!((1..=d1).contains(&i) && (1..=d2).contains(&j));
        let (flo, fhi) = spec.f_range(i);
        let (glo, ghi) = spec.g_range(j);
        let tol = 1e-9 * (f_star + g_star);
        prop_assert!(flo - tol <= f && f <= fhi + tol);
        prop_assert!(glo - tol <= g && g <= ghi + tol);
    }

    #[test]
    fn relaxed_bounds_are_the_population_extremes(
        pts in prop::collection::vec((1.0f64..2.0, 0.1f64..1.0), 1..60),
    ) {
        let (f_star, g_star) = (100.0, 500.0);
        let p0: Vec<Solution> = pts.iter().map(|&(a, b)| synthetic(a * f_star, b * g_star, 0.0)).collect();
        let spec = relaxed_thresholds(&p0, f_star, g_star, 20, 20, 1e-3).unwrap();
        let max_f = p0.iter().map(|s| s.f).fold(f64::NEG_INFINITY, f64::max);
        let min_g = p0.iter().map(|s| s.g).fold(f64::INFINITY, f64::min);
        if max_f > f_star {
            prop_assert!((spec.f_max - max_f).abs() <= 1e-12 * max_f);
            prop_assert!(((1.0 + spec.alpha1) * f_star - max_f).abs() <= 1e-12 * max_f);
        }
        if min_g < g_star {
            prop_assert!((spec.g_min - min_g).abs() <= 1e-12 * g_star);
            prop_assert!(((1.0 - spec.alpha2) * g_star - min_g).abs() <= 1e-12 * g_star);
        }
        prop_assert_eq!(spec.f_star, f_star);
        prop_assert_eq!(spec.g_star, g_star);
        for s in &p0 {
            prop_assert!(spec.cell_index(s.f, s.g).is_some());
        }
    }

    #[test]
    fn archive_is_elitist_and_replayable(
        offers in prop::collection::vec((95.0f64..110.0, 700.0f64..1010.0, -50.0f64..50.0), 1..300),
    ) {
        let spec = GridSpec::new(100.0, 1000.0, 0.05, 0.2, 8, 8).unwrap();
        let mut grid = MapGrid::new(spec);
        let mut best_offered = std::collections::HashMap::new();
        let mut log = Vec::new();
        for &(f, g, z) in &offers {
            let s = synthetic(f, g, z);
            let before = spec.cell_index(f, g).and_then(|(i, j)| grid.get(i, j).map(|o| o.z));
            let (outcome, cell) = grid.try_insert(&s);
            match (cell, before) {
                (None, _) => prop_assert_eq!(outcome, InsertOutcome::Discarded),
                (Some(_), None) => prop_assert_eq!(outcome, InsertOutcome::Filled),
                (Some(_), Some(b)) if z > b => prop_assert_eq!(outcome, InsertOutcome::Replaced),
                (Some(_), Some(_)) => prop_assert_eq!(outcome, InsertOutcome::Rejected),
            }
            if let Some(c) = cell {
                let e = best_offered.entry(c).or_insert(f64::NEG_INFINITY);
                *e = f64::max(*e, z);
                prop_assert_eq!(grid.get(c.0, c.1).unwrap().z, *e);
            }
            if outcome.changed_map() {
                log.push(s);
            }
        }
        prop_assert!(grid.check_invariants(None).is_ok());
        prop_assert_eq!(grid.occupied_count(), best_offered.len());

        let mut replay = MapGrid::new(spec);
        for s in &log {
            prop_assert!(replay.try_insert(s).0.changed_map());
        }
        prop_assert_eq!(replay.snapshot(), grid.snapshot());
    }
}

#[test]
fn snapshots_restore_on_the_instance() {
    let inst = instance(3);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let tours: Vec<Tour> = (0..40).map(|_| random_tour(&inst, &mut rng)).collect();
    let sols: Vec<Solution> = tours
        .into_iter()
        .map(|t| {
            let y = pwt_dp(&inst, &t).packing;
            Solution::evaluate(&inst, t, y).unwrap()
        })
        .collect();
    let f_star = sols.iter().map(|s| s.f).fold(f64::INFINITY, f64::min);
    let (g_star, _) = ttpqd::kp_ops::kp_optimal(&inst);
    let spec = relaxed_thresholds(&sols, f_star, g_star.max(1.0), 6, 6, 1e-3).unwrap();
    let mut grid = MapGrid::new(spec);
    for s in &sols {
        grid.try_insert(s);
    }
    let json = serde_json::to_string(&grid.snapshot()).unwrap();
    let back: ttpqd::MapSnapshot = serde_json::from_str(&json).unwrap();
    let restored = back.restore(&inst).unwrap();
    assert_eq!(restored.snapshot(), grid.snapshot());

    let mut tampered = back.clone();
    tampered.cells[0].z += 1.0;
    assert!(tampered.restore(&inst).is_err());
    let mut moved = back.clone();
    moved.cells[0].i = if moved.cells[0].i == 1 { 2 } else { 1 };
    assert!(moved.restore(&inst).is_err());

    let csv = grid.to_csv();
    assert_eq!(csv.lines().count(), grid.occupied_count() + 1);
    assert!(csv.starts_with("i,j,f,g,z\n"));
}
