//! Tour variation: EAX-1AB crossover, random 2-OPT moves, 2-OPT descent and
//! the EAX-based population initializer.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::instance::Instance;
use crate::ttp::{parse_list, tour_length, Tour, TtpError};

const NONE: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Parent {
    A,
    B,
}

impl Parent {
    fn other(self) -> Parent {
        match self {
            Parent::A => Parent::B,
            Parent::B => Parent::A,
        }
    }
}

/// A directed edge of an AB-cycle, tagged with the parent it came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AbEdge {
    pub from: usize,
    pub to: usize,
    pub parent: Parent,
}

/// Closed walk alternating parent-A and parent-B edges, starting with an A edge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbCycle {
    edges: Vec<AbEdge>,
}

fn undirected(u: usize, v: usize) -> (usize, usize) {
    (u.min(v), u.max(v))
}

impl AbCycle {
    pub fn edges(&self) -> &[AbEdge] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Checks alternation, closure, edge origin and uniqueness against the parents.
    pub fn validate(&self, a: &Tour, b: &Tour) -> Result<(), String> {
        let k = self.edges.len();
        if k < 4 || !k.is_multiple_of(2) {
            return Err(format!("length {k} is not an even number >= 4"));
        }
        let ea: HashSet<_> = a.edges().collect();
        let eb: HashSet<_> = b.edges().collect();
        let mut seen = HashSet::new();
        for (idx, e) in self.edges.iter().enumerate() {
            let expected = if idx % 2 == 0 { Parent::A } else { Parent::B };
            if e.parent != expected {
                return Err(format!("edge {idx} breaks alternation"));
            }
            let next = &self.edges[(idx + 1) % k];
            if e.to != next.from {
                return Err(format!("edge {idx} does not connect to its successor"));
            }
            let key = undirected(e.from, e.to);
            let (own, other) = match e.parent {
                Parent::A => (&ea, &eb),
                Parent::B => (&eb, &ea),
            };
            if !own.contains(&key) || other.contains(&key) {
                return Err(format!(
                    "edge {key:?} is not exclusive to parent {:?}",
                    e.parent
                ));
            }
            if !seen.insert(key) {
                return Err(format!("edge {key:?} used twice"));
            }
        }
        Ok(())
    }
}

/// `adj[c] = [predecessor, successor]` in tour order.
pub(crate) fn adjacency(t: &Tour) -> Vec<[usize; 2]> {
    let o = t.order();
    let n = o.len();
    let mut adj = vec![[NONE; 2]; n];
    for i in 0..n {
        adj[o[i]] = [o[(i + n - 1) % n], o[(i + 1) % n]];
    }
    adj
}

fn is_adjacent(adj: &[[usize; 2]], u: usize, v: usize) -> bool {
    adj[u][0] == v || adj[u][1] == v
}

/// Edges of one parent absent from the other, as per-node neighbor slots.
struct ExclusiveEdges {
    slots: Vec<[usize; 2]>,
}

impl ExclusiveEdges {
    fn new(own: &[[usize; 2]], other: &[[usize; 2]]) -> Self {
        let slots = own
            .iter()
            .enumerate()
            .map(|(u, nb)| {
                let mut s = [NONE; 2];
                for (k, &v) in nb.iter().enumerate() {
                    // n = 2 tours list the same neighbor twice
                    if !is_adjacent(other, u, v) && !(k == 1 && nb[0] == v) {
                        s[k] = v;
                    }
                }
                s
            })
            .collect();
        ExclusiveEdges { slots }
    }

    fn available(&self, u: usize) -> impl Iterator<Item = usize> + '_ {
        self.slots[u].iter().copied().filter(|&v| v != NONE)
    }

    fn remove(&mut self, u: usize, v: usize) {
        for (a, b) in [(u, v), (v, u)] {
            if let Some(s) = self.slots[a].iter_mut().find(|s| **s == b) {
                *s = NONE;
            }
        }
    }
}

/// Builds one AB-cycle by a random alternating walk over the edges exclusive
/// to either parent. Returns `None` when the parents share every edge.
pub fn build_ab_cycle<R: Rng + ?Sized>(a: &Tour, b: &Tour, rng: &mut R) -> Option<AbCycle> {
    let n = a.len();
    if n < 4 || b.len() != n {
        return None;
    }
    let adj_a = adjacency(a);
    let adj_b = adjacency(b);
    let mut excl = [
        ExclusiveEdges::new(&adj_a, &adj_b),
        ExclusiveEdges::new(&adj_b, &adj_a),
    ];
    let starts: Vec<usize> = (0..n)
        .filter(|&u| excl[0].available(u).next().is_some())
        .collect();
    if starts.is_empty() {
        return None;
    }
    let start = *starts.choose(rng).unwrap();

    // last_origin[node][parity]: latest walk index at which `node` was the
    // origin of an edge of that parity (even = A, odd = B)
    let mut last_origin = vec![[NONE; 2]; n];
    last_origin[start][0] = 0;
    let mut walk: Vec<AbEdge> = Vec::new();
    let mut current = start;
    let mut parent = Parent::A;
    loop {
        let pool = &mut excl[parent as usize];
        let options: Vec<usize> = pool.available(current).collect();
        // balanced exclusive degrees guarantee the walk can always continue
        let next = *options
            .choose(rng)
            .expect("alternating walk cannot get stuck");
        pool.remove(current, next);
        walk.push(AbEdge {
            from: current,
            to: next,
            parent,
        });
        let len = walk.len();
        let closing = last_origin[next][len % 2];
        if closing != NONE {
            let mut edges = walk.split_off(closing);
            if closing % 2 == 1 {
                edges.rotate_left(1);
            }
            return Some(AbCycle { edges });
        }
        last_origin[next][len % 2] = len;
        current = next;
        parent = parent.other();
    }
}

/// Diagnostics of one EAX-1AB application.
#[derive(Debug, Clone)]
pub struct EaxOutcome {
    pub child: Tour,
    pub cycle: Option<AbCycle>,
    /// Number of sub-tours in the intermediate solution.
    pub subtours: usize,
    /// Edges added while reconnecting sub-tours.
    pub merge_edges: Vec<(usize, usize)>,
}

/// EAX with a single AB-cycle. Falls back to a copy of `a` when no AB-cycle exists.
pub fn eax_1ab<R: Rng + ?Sized>(inst: &Instance, a: &Tour, b: &Tour, rng: &mut R) -> Tour {
    eax_1ab_detailed(inst, a, b, rng).child
}

pub fn eax_1ab_detailed<R: Rng + ?Sized>(
    inst: &Instance,
    a: &Tour,
    b: &Tour,
    rng: &mut R,
) -> EaxOutcome {
    let Some(cycle) = build_ab_cycle(a, b, rng) else {
        return EaxOutcome {
            child: a.clone(),
            cycle: None,
            subtours: 1,
            merge_edges: Vec::new(),
        };
    };
    let adj_a = adjacency(a);
    let mut adj = adj_a.clone();
    for e in cycle.edges.iter().filter(|e| e.parent == Parent::A) {
        unlink(&mut adj, e.from, e.to);
    }
    for e in cycle.edges.iter().filter(|e| e.parent == Parent::B) {
        link(&mut adj, e.from, e.to);
    }

    let mut comps = subtours(&adj);
    let subtour_count = comps.len();
    let mut merge_edges = Vec::new();
    while comps.len() > 1 {
        let (added, removed) = best_merge(inst, &adj, &comps);
        for (u, v) in removed {
            unlink(&mut adj, u, v);
        }
        for (u, v) in added {
            link(&mut adj, u, v);
            merge_edges.push(undirected(u, v));
        }
        comps = subtours(&adj);
    }

    EaxOutcome {
        child: orient_like(&adj, &adj_a),
        cycle: Some(cycle),
        subtours: subtour_count,
        merge_edges,
    }
}

fn unlink(adj: &mut [[usize; 2]], u: usize, v: usize) {
    for (a, b) in [(u, v), (v, u)] {
        let slot = adj[a].iter_mut().find(|s| **s == b).expect("edge present");
        *slot = NONE;
    }
}

fn link(adj: &mut [[usize; 2]], u: usize, v: usize) {
    for (a, b) in [(u, v), (v, u)] {
        let slot = adj[a].iter_mut().find(|s| **s == NONE).expect("free slot");
        *slot = b;
    }
}

/// Cycles of a 2-regular graph, each listed in traversal order, ordered by
/// their smallest city.
fn subtours(adj: &[[usize; 2]]) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for s in 0..n {
        if seen[s] {
            continue;
        }
        let mut cyc = vec![s];
        seen[s] = true;
        let (mut prev, mut cur) = (s, adj[s][0]);
        while cur != s {
            seen[cur] = true;
            cyc.push(cur);
            let next = if adj[cur][0] == prev {
                adj[cur][1]
            } else {
                adj[cur][0]
            };
            prev = cur;
            cur = next;
        }
        out.push(cyc);
    }
    out
}

fn cycle_edges(c: &[usize]) -> impl Iterator<Item = (usize, usize)> + '_ {
    let k = c.len();
    (0..k).map(move |i| (c[i], c[(i + 1) % k]))
}

/// Cheapest 2-exchange joining the smallest sub-tour to any other one.
/// Returns (edges to add, edges to remove).
#[allow(clippy::type_complexity)]
fn best_merge(
    inst: &Instance,
    adj: &[[usize; 2]],
    comps: &[Vec<usize>],
) -> ([(usize, usize); 2], [(usize, usize); 2]) {
    let _ = adj;
    let r = comps
        .iter()
        .enumerate()
        .min_by_key(|(idx, c)| (c.len(), *idx))
        .map(|(idx, _)| idx)
        .unwrap();
    let mut best: Option<(f64, [(usize, usize); 2], [(usize, usize); 2])> = None;
    for (a, b) in cycle_edges(&comps[r]) {
        let dab = inst.distance(a, b);
        for (idx, other) in comps.iter().enumerate() {
            if idx == r {
                continue;
            }
            for (c, d) in cycle_edges(other) {
                let base = -dab - inst.distance(c, d);
                let straight = base + inst.distance(a, c) + inst.distance(b, d);
                let crossed = base + inst.distance(a, d) + inst.distance(b, c);
                for (gain, add) in [(straight, [(a, c), (b, d)]), (crossed, [(a, d), (b, c)])] {
                    if best.as_ref().is_none_or(|(g, _, _)| gain < *g) {
                        best = Some((gain, add, [(a, b), (c, d)]));
                    }
                }
            }
        }
    }
    let (_, add, remove) = best.expect("at least two sub-tours");
    (add, remove)
}

/// Converts a Hamiltonian cycle to a tour, choosing the traversal direction
/// that agrees with more of `reference`'s directed edges.
fn orient_like(adj: &[[usize; 2]], reference: &[[usize; 2]]) -> Tour {
    let n = adj.len();
    let mut order = Vec::with_capacity(n);
    order.push(0);
    let (mut prev, mut cur) = (0, adj[0][0].min(adj[0][1]));
    while cur != 0 {
        order.push(cur);
        let next = if adj[cur][0] == prev {
            adj[cur][1]
        } else {
            adj[cur][0]
        };
        prev = cur;
        cur = next;
    }
    debug_assert_eq!(order.len(), n, "merged graph must be one cycle");
    let (mut fwd, mut bwd) = (0usize, 0usize);
    for i in 0..n {
        let (u, v) = (order[i], order[(i + 1) % n]);
        if reference[u][1] == v {
            fwd += 1;
        } else if reference[u][0] == v {
            bwd += 1;
        }
    }
    let t = Tour::from_canonical(order);
    if bwd > fwd {
        t.reversed()
    } else {
        t
    }
}

/// Reverses the tour segment between 0-based positions `i` and `j`
/// (inclusive, either order). Position 0 stays pinned to city 0.
pub fn two_opt_reverse(t: &Tour, i: usize, j: usize) -> Tour {
    let (lo, hi) = (i.min(j), i.max(j));
    assert!(lo >= 1 && hi < t.len(), "positions must lie in 1..n");
    let mut order = t.order().to_vec();
    order[lo..=hi].reverse();
    Tour::from_canonical(order)
}

/// Random 2-OPT move: two positions after the depot drawn uniformly, the
/// segment between them reversed.
pub fn two_opt_move<R: Rng + ?Sized>(t: &Tour, rng: &mut R) -> Tour {
    let n = t.len();
    if n < 3 {
        return t.clone();
    }
    let i = rng.gen_range(1..n);
    let j = rng.gen_range(1..n);
    two_opt_reverse(t, i, j)
}

/// `k` nearest cities of every city, closest first.
pub fn neighbor_lists(inst: &Instance, k: usize) -> Vec<Vec<usize>> {
    let n = inst.n();
    (0..n)
        .map(|u| {
            let mut others: Vec<usize> = (0..n).filter(|&v| v != u).collect();
            others.sort_by(|&x, &y| {
                inst.distance(u, x)
                    .total_cmp(&inst.distance(u, y))
                    .then(x.cmp(&y))
            });
            others.truncate(k);
            others
        })
        .collect()
}

/// Replaces edges starting at positions `p` and `q` by reversing the
/// segment between them. Keeps `pos` in sync.
fn apply_exchange(order: &mut [usize], pos: &mut [usize], p: usize, q: usize) {
    let (lo, hi) = (p.min(q) + 1, p.max(q));
    order[lo..=hi].reverse();
    for (k, &c) in order[lo..=hi].iter().enumerate() {
        pos[c] = lo + k;
    }
}

/// 2-OPT local search to a local optimum: a neighbor-list pass with
/// don't-look bits followed by full first-improvement scans.
pub fn two_opt_descent(inst: &Instance, t: &Tour, neighbors: &[Vec<usize>]) -> Tour {
    let n = t.len();
    if n < 4 {
        return t.clone();
    }
    let mut order = t.order().to_vec();
    let mut pos = t.positions();
    let d = |u: usize, v: usize| inst.distance(u, v);
    const EPS: f64 = 1e-9;

    let mut queue: Vec<usize> = order.clone();
    let mut queued = vec![true; n];
    while let Some(a) = queue.pop() {
        queued[a] = false;
        let mut improved = false;
        'dirs: for forward in [true, false] {
            let pa = pos[a];
            let b = if forward {
                order[(pa + 1) % n]
            } else {
                order[(pa + n - 1) % n]
            };
            let dab = d(a, b);
            for &c in &neighbors[a] {
                let dac = d(a, c);
                if dac >= dab {
                    break;
                }
                let pc = pos[c];
                let dn = if forward {
                    order[(pc + 1) % n]
                } else {
                    order[(pc + n - 1) % n]
                };
                if c == b || dn == a {
                    continue;
                }
                let gain = dab + d(c, dn) - dac - d(b, dn);
                if gain > EPS {
                    // edges (a,b) and (c,dn) start at these positions
                    let (p, q) = if forward {
                        (pa, pc)
                    } else {
                        ((pa + n - 1) % n, (pc + n - 1) % n)
                    };
                    apply_exchange(&mut order, &mut pos, p, q);
                    for x in [a, b, c, dn] {
                        if !queued[x] {
                            queued[x] = true;
                            queue.push(x);
                        }
                    }
                    improved = true;
                    break 'dirs;
                }
            }
        }
        if improved && !queued[a] {
            queued[a] = true;
            queue.push(a);
        }
    }

    loop {
        let mut improved = false;
        for p in 0..n - 2 {
            for q in p + 2..n {
                if p == 0 && q == n - 1 {
                    continue;
                }
                let (a, b) = (order[p], order[p + 1]);
                let (c, dn) = (order[q], order[(q + 1) % n]);
                if d(a, b) + d(c, dn) - d(a, c) - d(b, dn) > EPS {
                    apply_exchange(&mut order, &mut pos, p, q);
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
    Tour::from_canonical(order)
}

pub fn random_tour<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Tour {
    let mut order: Vec<usize> = (0..n).collect();
    order[1..].shuffle(rng);
    Tour::from_canonical(order)
}

/// Direction-free key: two tours share it iff they have the same edge set.
pub fn cycle_key(t: &Tour) -> Vec<usize> {
    let o = t.order();
    if o.len() > 2 && o[1] > o[o.len() - 1] {
        t.reversed().order().to_vec()
    } else {
        o.to_vec()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct InitConfig {
    pub pop_size: usize,
    /// Generation budget of the EAX phase.
    pub generations: usize,
    /// Stop after this many consecutive generations without a replacement.
    pub stall_generations: usize,
    /// Children tried per parent pair; the best one competes with parent A.
    pub offspring_per_pair: usize,
    /// Size of the nearest-neighbor lists used by 2-OPT descent.
    pub neighbors: usize,
}

impl Default for InitConfig {
    fn default() -> Self {
        InitConfig {
            pop_size: 50,
            generations: 5000,
            stall_generations: 100,
            offspring_per_pair: 10,
            neighbors: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InitStatus {
    ReachedTarget,
    /// No target was given; the run ended on budget or stagnation.
    Converged,
    BudgetExhaustedBelowTarget,
}

#[derive(Debug, Clone)]
pub struct InitOutcome {
    /// Distinct tours, shortest first.
    pub tours: Vec<Tour>,
    pub lengths: Vec<f64>,
    pub status: InitStatus,
    pub generations: usize,
    /// Best length after seeding and after every generation.
    pub best_trace: Vec<f64>,
}

/// Generational EAX GA: 2-OPT-optimized random seeds, then EAX-1AB
/// generations where each parent is replaced by a shorter, new child.
pub fn evolve_initial_tours<R: Rng + ?Sized>(
    inst: &Instance,
    target_f: Option<f64>,
    cfg: &InitConfig,
    rng: &mut R,
) -> InitOutcome {
    let n = inst.n();
    let pop_size = cfg.pop_size.max(2);
    let neighbors = neighbor_lists(inst, cfg.neighbors);

    let mut pop: Vec<(Tour, f64)> = Vec::with_capacity(pop_size);
    let mut keys: HashSet<Vec<usize>> = HashSet::new();
    let mut attempts = 0;
    while pop.len() < pop_size {
        attempts += 1;
        let raw = random_tour(n, rng);
        let t = two_opt_descent(inst, &raw, &neighbors);
        // small instances may not have enough distinct local optima: fall
        // back to unimproved tours, then to duplicates
        let pick = if keys.insert(cycle_key(&t)) {
            Some(t)
        } else if attempts > 20 * pop_size && keys.insert(cycle_key(&raw)) {
            Some(raw)
        } else if attempts > 40 * pop_size {
            Some(t)
        } else {
            None
        };
        if let Some(t) = pick {
            let f = tour_length(inst, &t);
            pop.push((t, f));
        }
    }

    let best_of = |pop: &[(Tour, f64)]| pop.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let reached = |best: f64| target_f.is_some_and(|tf| best <= tf);
    let mut best_trace = vec![best_of(&pop)];
    let mut generations = 0;
    let mut stall = 0;

    while generations < cfg.generations && !reached(*best_trace.last().unwrap()) {
        generations += 1;
        let mut idx: Vec<usize> = (0..pop.len()).collect();
        idx.shuffle(rng);
        let mut replaced = false;
        for k in 0..idx.len() {
            let (ia, ib) = (idx[k], idx[(k + 1) % idx.len()]);
            let mut best_child: Option<(Tour, f64)> = None;
            for _ in 0..cfg.offspring_per_pair.max(1) {
                let child = eax_1ab(inst, &pop[ia].0, &pop[ib].0, rng);
                let f = tour_length(inst, &child);
                if best_child.as_ref().is_none_or(|(_, bf)| f < *bf) {
                    best_child = Some((child, f));
                }
            }
            let (child, f) = best_child.unwrap();
            if f < pop[ia].1 {
                let key = cycle_key(&child);
                if !keys.contains(&key) {
                    keys.remove(&cycle_key(&pop[ia].0));
                    keys.insert(key);
                    pop[ia] = (child, f);
                    replaced = true;
                }
            }
        }
        best_trace.push(best_of(&pop));
        stall = if replaced { 0 } else { stall + 1 };
        if stall >= cfg.stall_generations {
            break;
        }
    }

    let best = *best_trace.last().unwrap();
    let status = match target_f {
        None => InitStatus::Converged,
        Some(_) if reached(best) => InitStatus::ReachedTarget,
        Some(_) => InitStatus::BudgetExhaustedBelowTarget,
    };

    let mut seen = HashSet::new();
    pop.retain(|(t, _)| seen.insert(cycle_key(t)));
    pop.sort_by(|x, y| x.1.total_cmp(&y.1));
    let (tours, lengths) = pop.into_iter().unzip();
    InitOutcome {
        tours,
        lengths,
        status,
        generations,
        best_trace,
    }
}

/// Reads newline-separated, comma-joined 1-based permutations.
pub fn parse_tours(inst: &Instance, text: &str) -> Result<Vec<Tour>, TtpError> {
    text.lines()
        .filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|l| Tour::for_instance(inst, parse_list(l)?))
        .collect()
}

pub fn format_tours(tours: &[Tour]) -> String {
    let mut out = String::new();
    for t in tours {
        let line: Vec<String> = t.order().iter().map(|c| (c + 1).to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{EdgeWeightType, InstanceBuilder};
    use crate::oracle;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn square(n: usize, seed: u64) -> Instance {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coords = (0..n)
            .map(|_| (rng.gen_range(0..100) as f64, rng.gen_range(0..100) as f64))
            .collect();
        InstanceBuilder::new(coords, EdgeWeightType::Euc2d)
            .build()
            .unwrap()
    }

    #[test]
    fn identical_parents_have_no_ab_cycle() {
        let t = Tour::new(vec![0, 3, 1, 2, 4]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(build_ab_cycle(&t, &t, &mut rng).is_none());
        let inst = square(5, 1);
        assert_eq!(eax_1ab(&inst, &t, &t, &mut rng), t);
    }

    #[test]
    fn reversed_parent_shares_all_edges() {
        let t = Tour::new(vec![0, 3, 1, 2, 4]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(build_ab_cycle(&t, &t.reversed(), &mut rng).is_none());
    }

    /// All alternating closed walks using each exclusive edge at most once,
    /// up to rotation, starting with an A edge.
    fn enumerate_ab_cycles(a: &Tour, b: &Tour) -> Vec<Vec<(usize, usize)>> {
        let ea: Vec<_> = a.edges().filter(|e| !b.edges().any(|f| f == *e)).collect();
        let eb: Vec<_> = b.edges().filter(|e| !a.edges().any(|f| f == *e)).collect();
        let mut found = Vec::new();
        fn rec(
            path: &mut Vec<(usize, usize)>,
            nodes: &mut Vec<usize>,
            ea: &[(usize, usize)],
            eb: &[(usize, usize)],
            found: &mut Vec<Vec<(usize, usize)>>,
        ) {
            let cur = *nodes.last().unwrap();
            let use_a = path.len().is_multiple_of(2);
            let pool = if use_a { ea } else { eb };
            for &(u, v) in pool {
                let next = if u == cur {
                    v
                } else if v == cur {
                    u
                } else {
                    continue;
                };
                if path.contains(&(u, v)) {
                    continue;
                }
                path.push((u, v));
                nodes.push(next);
                if path.len().is_multiple_of(2) && next == nodes[0] {
                    let mut key = path.clone();
                    key.sort();
                    if !found.contains(&key) {
                        found.push(key);
                    }
                }
                rec(path, nodes, ea, eb, found);
                path.pop();
                nodes.pop();
            }
        }
        for s in 0..a.len() {
            rec(&mut Vec::new(), &mut vec![s], &ea, &eb, &mut found);
        }
        found
    }

    #[test]
    fn four_city_ab_cycle_matches_enumeration() {
        let a = Tour::new(vec![0, 1, 2, 3]).unwrap();
        let b = Tour::new(vec![0, 2, 1, 3]).unwrap();
        let all = enumerate_ab_cycles(&a, &b);
        assert!(!all.is_empty());
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let c = build_ab_cycle(&a, &b, &mut rng).unwrap();
            c.validate(&a, &b).unwrap();
            assert!(c.len() == 4 || c.len() == 8);
            let mut key: Vec<_> = c.edges().iter().map(|e| undirected(e.from, e.to)).collect();
            key.sort();
            assert!(all.contains(&key), "{key:?} not among {all:?}");
        }
    }

    #[test]
    fn eax_children_are_valid_and_use_known_edges() {
        let inst = square(30, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..300 {
            let a = random_tour(30, &mut rng);
            let b = random_tour(30, &mut rng);
            let out = eax_1ab_detailed(&inst, &a, &b, &mut rng);
            let child = &out.child;
            assert_eq!(Tour::new(child.order().to_vec()).unwrap(), *child);
            assert_eq!(child.order()[0], 0);
            if let Some(c) = &out.cycle {
                c.validate(&a, &b).unwrap();
            }
            assert_eq!(out.merge_edges.len(), 2 * (out.subtours - 1));
            let ea: HashSet<_> = a.edges().collect();
            let eb: HashSet<_> = b.edges().collect();
            let em: HashSet<_> = out.merge_edges.iter().copied().collect();
            for e in child.edges() {
                assert!(ea.contains(&e) || eb.contains(&e) || em.contains(&e));
            }
        }
    }

    #[test]
    fn two_opt_examples() {
        let t = Tour::identity(5);
        assert_eq!(two_opt_reverse(&t, 1, 3).order(), &[0, 3, 2, 1, 4]);
        assert_eq!(two_opt_reverse(&t, 2, 2), t);
        let once = two_opt_reverse(&t, 1, 4);
        assert_eq!(two_opt_reverse(&once, 1, 4), t);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let moved = two_opt_move(&t, &mut rng);
            assert_eq!(moved.order()[0], 0);
            assert!(Tour::new(moved.order().to_vec()).is_ok());
        }
    }

    #[test]
    fn descent_reaches_a_two_opt_optimum() {
        let inst = square(40, 2);
        let nb = neighbor_lists(&inst, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let start = random_tour(40, &mut rng);
        let t = two_opt_descent(&inst, &start, &nb);
        assert!(tour_length(&inst, &t) <= tour_length(&inst, &start));
        let f = tour_length(&inst, &t);
        for i in 1..40 {
            for j in i + 1..40 {
                assert!(tour_length(&inst, &two_opt_reverse(&t, i, j)) >= f - 1e-9);
            }
        }
    }

    #[test]
    fn initializer_finds_five_city_optimum() {
        let inst = square(5, 8);
        let (opt, _) = oracle::brute_force_tsp(&inst);
        let cfg = InitConfig {
            pop_size: 6,
            generations: 50,
            ..InitConfig::default()
        };
        let out = evolve_initial_tours(&inst, None, &cfg, &mut ChaCha8Rng::seed_from_u64(2));
        assert_eq!(out.lengths[0], opt);
        assert!(out.lengths.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn initializer_tiny_population_stays_valid() {
        // four cities admit only three distinct cycles
        let inst = square(4, 5);
        let cfg = InitConfig {
            pop_size: 2,
            generations: 20,
            ..InitConfig::default()
        };
        let out = evolve_initial_tours(&inst, None, &cfg, &mut ChaCha8Rng::seed_from_u64(4));
        assert!(!out.tours.is_empty());
        for t in &out.tours {
            assert!(Tour::new(t.order().to_vec()).is_ok());
        }
        assert!(out.best_trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn tour_file_round_trip() {
        let inst = square(6, 1);
        let tours = vec![
            Tour::identity(6),
            Tour::new(vec![0, 5, 4, 3, 2, 1]).unwrap(),
        ];
        let text = format_tours(&tours);
        assert_eq!(text.lines().next().unwrap(), "1,2,3,4,5,6");
        assert_eq!(parse_tours(&inst, &text).unwrap(), tours);
        assert!(parse_tours(&inst, "1,2,3\n").is_err());
    }
}
