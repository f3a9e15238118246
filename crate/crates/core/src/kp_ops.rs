//! Packing-list operators: exact 0/1 knapsack DP, the exact packing-while-
//! traveling DP for a fixed tour, and the (1+1) EA packer with random repair.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::instance::Instance;
use crate::ttp::{ttp_objective, PackingList, Tour};

/// One decision bit per (item, weight) cell, used for traceback.
struct BitTable {
    words_per_row: usize,
    bits: Vec<u64>,
}

impl BitTable {
    fn new(rows: usize, cols: usize) -> Self {
        let words_per_row = cols.div_ceil(64);
        BitTable {
            words_per_row,
            bits: vec![0; rows * words_per_row],
        }
    }

    #[inline]
    fn set(&mut self, row: usize, col: usize) {
        self.bits[row * self.words_per_row + col / 64] |= 1 << (col % 64);
    }

    #[inline]
    fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.words_per_row + col / 64] & (1 << (col % 64)) != 0
    }
}

/// Maximizes total profit subject to the capacity, ignoring the tour.
///
/// Returns `g*` and one optimal packing. Ties prefer leaving an item out.
pub fn kp_optimal(inst: &Instance) -> (f64, PackingList) {
    let m = inst.m();
    let cap = inst.capacity() as usize;
    let mut best = vec![0.0f64; cap + 1];
    let mut take = BitTable::new(m, cap + 1);
    for j in 0..m {
        let item = inst.item(j);
        let w = item.weight as usize;
        if w > cap {
            continue;
        }
        for c in (w..=cap).rev() {
            let cand = best[c - w] + item.profit;
            if cand > best[c] {
                best[c] = cand;
                take.set(j, c);
            }
        }
    }
    let mut picks = vec![false; m];
    let mut c = cap;
    for j in (0..m).rev() {
        if take.get(j, c) {
            picks[j] = true;
            c -= inst.item(j).weight as usize;
        }
    }
    let y = PackingList::from_picks(inst, picks).expect("length matches");
    (best[cap], y)
}

/// Items sorted by the tour position of their city, ties by item index.
pub fn pwt_item_order(inst: &Instance, t: &Tour) -> Vec<usize> {
    t.order()
        .iter()
        .flat_map(|&city| inst.items_at(city).iter().copied())
        .collect()
}

/// For each tour position, the length of the tour legs from that position
/// back to the start (inclusive of the closing leg).
pub fn suffix_lengths(inst: &Instance, t: &Tour) -> Vec<f64> {
    let o = t.order();
    let n = o.len();
    let mut suffix = vec![0.0; n + 1];
    for i in (0..n).rev() {
        suffix[i] = suffix[i + 1] + inst.distance(o[i], o[(i + 1) % n]);
    }
    suffix.truncate(n);
    suffix
}

/// Result of the packing-while-traveling DP.
#[derive(Debug, Clone)]
pub struct PwtResult {
    /// Best objective value found in the table.
    pub z: f64,
    pub packing: PackingList,
    /// Item processing order.
    pub item_order: Vec<usize>,
}

/// Exact optimal packing for a fixed tour.
///
/// `beta[j]` holds the best objective over item prefixes with total weight
/// exactly `j`; adding item `i` at weight `j` changes the travel time of
/// every leg after its city from `1/v(j - w_i)` to `1/v(j)`.
pub fn pwt_dp(inst: &Instance, t: &Tour) -> PwtResult {
    let m = inst.m();
    let cap = inst.capacity() as usize;
    let rent = inst.renting_ratio();
    let order = pwt_item_order(inst, t);
    let pos = t.positions();
    let suffix = suffix_lengths(inst, t);

    let inv_speed: Vec<f64> = (0..=cap).map(|j| 1.0 / inst.speed(j as u64)).collect();
    let base = -rent * suffix[0] * inv_speed[0];

    let mut beta = vec![f64::NEG_INFINITY; cap + 1];
    beta[0] = base;
    let mut take = BitTable::new(order.len(), cap + 1);
    let mut reach = 0usize;

    for (row, &i) in order.iter().enumerate() {
        let item = inst.item(i);
        let w = item.weight as usize;
        if w > cap {
            continue;
        }
        let legs = rent * suffix[pos[item.city]];
        let top = (reach + w).min(cap);
        for j in (w..=top).rev() {
            let prev = beta[j - w];
            if prev == f64::NEG_INFINITY {
                continue;
            }
            let cand = prev + item.profit - legs * (inv_speed[j] - inv_speed[j - w]);
            if cand > beta[j] {
                beta[j] = cand;
                take.set(row, j);
            }
        }
        reach = top;
    }

    let mut best_j = 0;
    for j in 0..=reach {
        if beta[j] > beta[best_j] {
            best_j = j;
        }
    }
    let mut picks = vec![false; m];
    let mut j = best_j;
    for row in (0..order.len()).rev() {
        if take.get(row, j) {
            let i = order[row];
            picks[i] = true;
            j -= inst.item(i).weight as usize;
        }
    }
    debug_assert_eq!(j, 0);
    PwtResult {
        z: beta[best_j],
        packing: PackingList::from_picks(inst, picks).expect("length matches"),
        item_order: order,
    }
}

/// Drops picked items uniformly at random until the packing fits.
pub fn repair_packing<R: Rng + ?Sized>(inst: &Instance, y: &mut PackingList, rng: &mut R) {
    if y.is_feasible(inst) {
        return;
    }
    let mut picked: Vec<usize> = y.picked().collect();
    while !y.is_feasible(inst) {
        let k = rng.gen_range(0..picked.len());
        let j = picked.swap_remove(k);
        y.drop_item(inst, j);
    }
}

/// Flips each bit independently with probability `1/m`. Returns whether
/// anything changed.
pub fn bit_flip<R: Rng + ?Sized>(inst: &Instance, y: &mut PackingList, rng: &mut R) -> bool {
    let m = y.len();
    if m == 0 {
        return false;
    }
    let rate = 1.0 / m as f64;
    let mut changed = false;
    for j in 0..m {
        if rng.gen_bool(rate) {
            y.flip(inst, j);
            changed = true;
        }
    }
    changed
}

/// (1+1) EA on the packing of a fixed tour: bit-flip mutation, random repair,
/// accept on strict improvement.
pub fn ea_packer<R: Rng + ?Sized>(
    inst: &Instance,
    t: &Tour,
    seed: &PackingList,
    iters: usize,
    rng: &mut R,
) -> PackingList {
    let mut current = seed.clone();
    if inst.m() == 0 || iters == 0 {
        return current;
    }
    let mut current_z = ttp_objective(inst, t, &current).expect("seed packing must be feasible");
    for _ in 0..iters {
        let mut child = current.clone();
        if !bit_flip(inst, &mut child, rng) {
            continue;
        }
        repair_packing(inst, &mut child, rng);
        let z = ttp_objective(inst, t, &child).expect("repaired packing is feasible");
        if z > current_z {
            current = child;
            current_z = z;
        }
    }
    current
}

/// Picks uniformly random items in random order while they fit.
pub fn random_feasible_packing<R: Rng + ?Sized>(inst: &Instance, rng: &mut R) -> PackingList {
    let mut y = PackingList::empty(inst.m());
    let mut idx: Vec<usize> = (0..inst.m()).collect();
    idx.shuffle(rng);
    for j in idx {
        if rng.gen_bool(0.5) && y.total_weight() + inst.item(j).weight <= inst.capacity() {
            y.pick(inst, j);
        }
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{EdgeWeightType, InstanceBuilder, Item};
    use crate::oracle;
    use crate::ttp::{kp_value, Tour};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn hand_instance() -> Instance {
        let h = (75.0f64).sqrt();
        let mut b = InstanceBuilder::new(
            vec![(0.0, 0.0), (10.0, 0.0), (5.0, h)],
            EdgeWeightType::Euc2d,
        );
        b.capacity = 10;
        b.min_speed = 0.1;
        b.max_speed = 1.0;
        b.renting_ratio = 1.0;
        b.items = vec![Item {
            profit: 100.0,
            weight: 10,
            city: 1,
        }];
        b.build().unwrap()
    }

    fn knapsack(items: &[(f64, u64)], cap: u64) -> Instance {
        let mut b = InstanceBuilder::new(vec![(0.0, 0.0), (1.0, 0.0)], EdgeWeightType::Euc2d);
        b.capacity = cap;
        b.items = items
            .iter()
            .map(|&(profit, weight)| Item {
                profit,
                weight,
                city: 1,
            })
            .collect();
        b.build().unwrap()
    }

    #[test]
    fn kp_without_items() {
        let inst = knapsack(&[], 0);
        let (g, y) = kp_optimal(&inst);
        assert_eq!(g, 0.0);
        assert_eq!(y.count(), 0);
    }

    #[test]
    fn kp_textbook_case() {
        // all 8 subsets: best feasible is {20, 30} with 220
        let inst = knapsack(&[(60.0, 10), (100.0, 20), (120.0, 30)], 50);
        let (g, y) = kp_optimal(&inst);
        assert_eq!(g, 220.0);
        assert_eq!(y.picked().collect::<Vec<_>>(), vec![1, 2]);
        assert_eq!(oracle::brute_force_kp(&inst).0, 220.0);
    }

    #[test]
    fn kp_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..40 {
            let inst = oracle::random_instance(&mut rng, 4, 12, 30, 60);
            let (g, y) = kp_optimal(&inst);
            assert_eq!(g, oracle::brute_force_kp(&inst).0);
            assert_eq!(kp_value(&inst, &y), g);
            assert!(y.is_feasible(&inst));
        }
    }

    #[test]
    fn pwt_hand_instance() {
        let inst = hand_instance();
        let r = pwt_dp(&inst, &Tour::identity(3));
        assert!((r.z - (-30.0)).abs() < 1e-9);
        assert_eq!(r.packing.count(), 0);
    }

    #[test]
    fn pwt_without_items() {
        let mut b = InstanceBuilder::new(
            vec![(0.0, 0.0), (3.0, 4.0), (6.0, 0.0)],
            EdgeWeightType::Ceil2d,
        );
        b.renting_ratio = 2.0;
        b.max_speed = 2.0;
        let inst = b.build().unwrap();
        let r = pwt_dp(&inst, &Tour::identity(3));
        assert!((r.z - (-2.0 * 16.0 / 2.0)).abs() < 1e-12);
        assert_eq!(r.packing.len(), 0);
    }

    #[test]
    fn item_order_follows_tour_then_index() {
        let mut b = InstanceBuilder::new(
            vec![(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)],
            EdgeWeightType::Euc2d,
        );
        b.capacity = 10;
        b.items = [(2, 1.0), (1, 1.0), (2, 1.0), (1, 1.0)]
            .iter()
            .map(|&(city, profit)| Item {
                profit,
                weight: 1,
                city,
            })
            .collect();
        let inst = b.build().unwrap();
        let t = Tour::new(vec![0, 2, 1]).unwrap();
        assert_eq!(pwt_item_order(&inst, &t), vec![0, 2, 1, 3]);
    }

    #[test]
    fn pwt_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..40 {
            let inst = oracle::random_instance(&mut rng, 6, 10, 30, 80);
            let t = oracle::random_tour(&inst, &mut rng);
            let r = pwt_dp(&inst, &t);
            let (z, _) = oracle::brute_force_pwt(&inst, &t);
            assert!((r.z - z).abs() < 1e-9, "{} vs {}", r.z, z);
            let direct = ttp_objective(&inst, &t, &r.packing).unwrap();
            assert!((direct - z).abs() < 1e-9);
        }
    }

    #[test]
    fn repair_keeps_feasible_input() {
        let inst = knapsack(&[(1.0, 3), (1.0, 3)], 6);
        let mut y = PackingList::from_picks(&inst, vec![true, true]).unwrap();
        let before = y.clone();
        repair_packing(&inst, &mut y, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(y, before);
    }

    #[test]
    fn repair_chooses_uniformly() {
        let inst = knapsack(&[(1.0, 5), (1.0, 5)], 5);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let trials = 10_000;
        let mut first_kept = 0;
        for _ in 0..trials {
            let mut y = PackingList::from_picks(&inst, vec![true, true]).unwrap();
            repair_packing(&inst, &mut y, &mut rng);
            assert_eq!(y.count(), 1);
            if y.is_picked(0) {
                first_kept += 1;
            }
        }
        let frac = first_kept as f64 / trials as f64;
        assert!((frac - 0.5).abs() <= 0.05, "{frac}");
    }

    #[test]
    fn ea_zero_iterations_returns_seed() {
        let inst = hand_instance();
        let seed = PackingList::from_indices(&inst, &[0]).unwrap();
        let out = ea_packer(
            &inst,
            &Tour::identity(3),
            &seed,
            0,
            &mut ChaCha8Rng::seed_from_u64(1),
        );
        assert_eq!(out, seed);
    }

    #[test]
    fn ea_single_item_reaches_optimum() {
        // picking the item is worth it: tiny weight, big profit
        let mut b = InstanceBuilder::new(
            vec![(0.0, 0.0), (10.0, 0.0), (10.0, 10.0)],
            EdgeWeightType::Euc2d,
        );
        b.capacity = 100;
        b.renting_ratio = 0.5;
        b.items = vec![Item {
            profit: 50.0,
            weight: 1,
            city: 1,
        }];
        let inst = b.build().unwrap();
        let t = Tour::identity(3);
        let seed = PackingList::empty(1);
        let seed_z = ttp_objective(&inst, &t, &seed).unwrap();
        let best_z = pwt_dp(&inst, &t).z;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut optimal = 0;
        for _ in 0..100 {
            let out = ea_packer(&inst, &t, &seed, 50, &mut rng);
            let z = ttp_objective(&inst, &t, &out).unwrap();
            assert!(z >= seed_z);
            if (z - best_z).abs() < 1e-9 {
                optimal += 1;
            }
        }
        assert!(optimal >= 90, "{optimal}");
    }
}
