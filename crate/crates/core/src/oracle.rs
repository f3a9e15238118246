//! Brute-force reference solvers for small instances.
//!
//! Everything here enumerates instead of optimizing, so it is only usable for
//! a handful of cities and items. The test suites and the `oracle` CLI
//! subcommand check the exact solvers against these.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::instance::{EdgeWeightType, Instance, InstanceBuilder, Item};
use crate::kp_ops::{kp_optimal, pwt_dp};
use crate::tsp_ops::{evolve_initial_tours, InitConfig};
use crate::ttp::{tour_length, ttp_objective, PackingList, Tour};

/// Random instance with `2..=max_n` cities on a 100x100 grid, `0..=max_m`
/// items with integer profits in `0..=100` and weights in `1..=max_weight`,
/// and a capacity in `1..=max_capacity`.
pub fn random_instance<R: Rng + ?Sized>(
    rng: &mut R,
    max_n: usize,
    max_m: usize,
    max_weight: u64,
    max_capacity: u64,
) -> Instance {
    let n = rng.gen_range(2..=max_n.max(2));
    let coords = (0..n)
        .map(|_| (rng.gen_range(0..=100) as f64, rng.gen_range(0..=100) as f64))
        .collect();
    let metric = if rng.gen_bool(0.5) {
        EdgeWeightType::Ceil2d
    } else {
        EdgeWeightType::Euc2d
    };
    let mut b = InstanceBuilder::new(coords, metric);
    b.name = "random".into();
    let m = rng.gen_range(0..=max_m);
    b.items = (0..m)
        .map(|_| Item {
            profit: rng.gen_range(0..=100) as f64,
            weight: rng.gen_range(1..=max_weight),
            city: rng.gen_range(1..n),
        })
        .collect();
    b.capacity = rng.gen_range(1..=max_capacity);
    b.min_speed = 0.1;
    b.max_speed = 1.0;
    b.renting_ratio = (rng.gen_range(0.0..3.0f64) * 100.0).round() / 100.0;
    b.build().expect("generated instance is valid")
}

pub fn random_tour<R: Rng + ?Sized>(inst: &Instance, rng: &mut R) -> Tour {
    let mut order: Vec<usize> = (0..inst.n()).collect();
    order[1..].shuffle(rng);
    Tour::new(order).expect("shuffled identity is a permutation")
}

fn subset(m: usize, mask: u64) -> Vec<bool> {
    (0..m).map(|j| mask >> j & 1 == 1).collect()
}

/// Best profit over all feasible subsets (Gray-code walk, exact for integer
/// profits). Panics when `m > 30`.
pub fn brute_force_kp(inst: &Instance) -> (f64, PackingList) {
    let m = inst.m();
    assert!(m <= 30, "brute force limited to 30 items");
    let cap = inst.capacity();
    let (mut weight, mut profit) = (0u64, 0.0f64);
    let (mut best, mut best_mask) = (0.0f64, 0u64);
    let mut gray = 0u64;
    for k in 1..(1u64 << m) {
        let j = k.trailing_zeros() as usize;
        gray ^= 1 << j;
        let item = inst.item(j);
        if gray >> j & 1 == 1 {
            weight += item.weight;
            profit += item.profit;
        } else {
            weight -= item.weight;
            profit -= item.profit;
        }
        if weight <= cap && profit > best {
            best = profit;
            best_mask = gray;
        }
    }
    let y = PackingList::from_picks(inst, subset(m, best_mask)).unwrap();
    (best, y)
}

/// Best TTP objective for a fixed tour over all feasible packings, each
/// evaluated from scratch. Panics when `m > 24`.
pub fn brute_force_pwt(inst: &Instance, t: &Tour) -> (f64, PackingList) {
    let m = inst.m();
    assert!(m <= 24, "brute force limited to 24 items");
    let mut best: Option<(f64, u64)> = None;
    for mask in 0..(1u64 << m) {
        let y = PackingList::from_picks(inst, subset(m, mask)).unwrap();
        if !y.is_feasible(inst) {
            continue;
        }
        let z = ttp_objective(inst, t, &y).unwrap();
        if best.is_none_or(|(b, _)| z > b) {
            best = Some((z, mask));
        }
    }
    let (z, mask) = best.expect("the empty packing is always feasible");
    (z, PackingList::from_picks(inst, subset(m, mask)).unwrap())
}

/// Shortest tour by enumerating every permutation with city 0 fixed.
/// Panics when `n > 10`.
pub fn brute_force_tsp(inst: &Instance) -> (f64, Tour) {
    let n = inst.n();
    assert!(n <= 10, "brute force limited to 10 cities");
    let mut rest: Vec<usize> = (1..n).collect();
    let mut best = (f64::INFINITY, Tour::identity(n));
    permute(&mut rest, 0, &mut |perm| {
        let mut order = Vec::with_capacity(n);
        order.push(0);
        order.extend_from_slice(perm);
        let t = Tour::new(order).unwrap();
        let f = crate::ttp::tour_length(inst, &t);
        if f < best.0 {
            best = (f, t);
        }
    });
    best
}

fn permute(xs: &mut [usize], k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == xs.len() {
        visit(xs);
        return;
    }
    for i in k..xs.len() {
        xs.swap(k, i);
        permute(xs, k + 1, visit);
        xs.swap(k, i);
    }
}

/// Result of comparing one exact solver with its brute-force counterpart.
#[derive(Debug, Clone)]
pub struct CheckReport {
    pub name: &'static str,
    pub cases: usize,
    pub mismatches: Vec<String>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Cross-checks the packing DP, the knapsack DP and the tour GA against
/// enumeration on `cases` random instances each.
pub fn run_checks(cases: usize, seed: u64) -> Vec<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pwt = CheckReport {
        name: "packing DP vs enumeration",
        cases,
        mismatches: vec![],
    };
    for k in 0..cases {
        let inst = random_instance(&mut rng, 8, 14, 30, 100);
        let t = random_tour(&inst, &mut rng);
        let (want, _) = brute_force_pwt(&inst, &t);
        let got = pwt_dp(&inst, &t);
        let rescored = ttp_objective(&inst, &t, &got.packing).unwrap();
        if (got.z - want).abs() > 1e-9 || (rescored - want).abs() > 1e-9 {
            pwt.mismatches.push(format!(
                "case {k}: dp {} (rescored {rescored}), enumeration {want}",
                got.z
            ));
        }
    }
    let mut kp = CheckReport {
        name: "knapsack DP vs enumeration",
        cases,
        mismatches: vec![],
    };
    for k in 0..cases {
        let inst = random_instance(&mut rng, 3, 20, 30, 150);
        let (want, _) = brute_force_kp(&inst);
        let (got, y) = kp_optimal(&inst);
        if got != want || y.total_profit() != got || !y.is_feasible(&inst) {
            kp.mismatches
                .push(format!("case {k}: dp {got}, enumeration {want}"));
        }
    }
    let mut tsp = CheckReport {
        name: "tour GA vs enumeration",
        cases,
        mismatches: vec![],
    };
    let cfg = InitConfig {
        pop_size: 10,
        generations: 200,
        ..InitConfig::default()
    };
    for k in 0..cases {
        let inst = random_instance(&mut rng, 8, 0, 1, 1);
        let (want, _) = brute_force_tsp(&inst);
        let out = evolve_initial_tours(&inst, None, &cfg, &mut rng);
        let got = tour_length(&inst, &out.tours[0]);
        if got != want {
            tsp.mismatches
                .push(format!("case {k}: GA {got}, enumeration {want}"));
        }
    }
    vec![pwt, kp, tsp]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gray_walk_agrees_with_direct_sums() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let inst = random_instance(&mut rng, 4, 10, 20, 40);
            let (g, y) = brute_force_kp(&inst);
            assert_eq!(y.total_profit(), g);
            let mut best = 0.0f64;
            for mask in 0..(1u64 << inst.m()) {
                let y = PackingList::from_picks(&inst, subset(inst.m(), mask)).unwrap();
                if y.is_feasible(&inst) {
                    best = best.max(y.total_profit());
                }
            }
            assert_eq!(best, g);
        }
    }

    #[test]
    fn tsp_enumeration_on_a_square() {
        let mut b = InstanceBuilder::new(
            vec![(0.0, 0.0), (10.0, 10.0), (10.0, 0.0), (0.0, 10.0)],
            EdgeWeightType::Euc2d,
        );
        b.capacity = 1;
        let inst = b.build().unwrap();
        assert_eq!(brute_force_tsp(&inst).0, 40.0);
    }
}
