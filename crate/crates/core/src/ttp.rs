//! Tours, packing lists and exact evaluation of the tour length `f`, the
//! packing profit `g` and the TTP objective `z`.

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::Instance;

#[derive(Debug, Error, PartialEq)]
pub enum TtpError {
    #[error("invalid tour: {0}")]
    InvalidTour(String),
    #[error("packing has length {got}, instance has {expected} items")]
    PackingLength { expected: usize, got: usize },
    #[error("packing weight {weight} exceeds capacity {capacity}")]
    InfeasiblePacking { weight: u64, capacity: u64 },
    #[error("cannot parse solution: {0}")]
    Format(String),
}

/// A permutation of the cities, rotated so that city 0 leads.
///
/// Direction is preserved: the objective depends on it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Tour {
    order: Vec<usize>,
}

impl Tour {
    /// Validates `order` as a permutation of `0..order.len()` and rotates it
    /// to start at city 0.
    pub fn new(mut order: Vec<usize>) -> Result<Self, TtpError> {
        let n = order.len();
        if n == 0 {
            return Err(TtpError::InvalidTour("empty tour".into()));
        }
        let mut seen = vec![false; n];
        for &c in &order {
            if c >= n {
                return Err(TtpError::InvalidTour(format!("city {c} out of range")));
            }
            if std::mem::replace(&mut seen[c], true) {
                return Err(TtpError::InvalidTour(format!("city {c} repeated")));
            }
        }
        let start = order.iter().position(|&c| c == 0).unwrap();
        order.rotate_left(start);
        Ok(Tour { order })
    }

    /// Like [`Tour::new`], additionally checking the city count.
    pub fn for_instance(inst: &Instance, order: Vec<usize>) -> Result<Self, TtpError> {
        if order.len() != inst.n() {
            return Err(TtpError::InvalidTour(format!(
                "tour has {} cities, instance has {}",
                order.len(),
                inst.n()
            )));
        }
        Tour::new(order)
    }

    /// The identity tour 0, 1, ..., n-1.
    pub fn identity(n: usize) -> Self {
        Tour {
            order: (0..n).collect(),
        }
    }

    /// Callers guarantee `order` is a permutation with `order[0] == 0`.
    pub(crate) fn from_canonical(order: Vec<usize>) -> Self {
        debug_assert!(Tour::new(order.clone())
            .map(|t| t.order == order)
            .unwrap_or(false));
        Tour { order }
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// `pos[c]` is the position of city `c` in the tour.
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.order.len()];
        for (i, &c) in self.order.iter().enumerate() {
            pos[c] = i;
        }
        pos
    }

    /// Undirected edges as `(min, max)` pairs, in tour order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.order.len();
        (0..n).map(move |i| {
            let a = self.order[i];
            let b = self.order[(i + 1) % n];
            (a.min(b), a.max(b))
        })
    }

    /// The same cycle traversed backwards, still starting at city 0.
    pub fn reversed(&self) -> Tour {
        let mut order = self.order.clone();
        order[1..].reverse();
        Tour { order }
    }
}

impl TryFrom<Vec<usize>> for Tour {
    type Error = TtpError;

    fn try_from(order: Vec<usize>) -> Result<Self, Self::Error> {
        Tour::new(order)
    }
}

impl From<Tour> for Vec<usize> {
    fn from(t: Tour) -> Self {
        t.order
    }
}

/// Item selection with cached total weight and profit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackingList {
    picks: Vec<bool>,
    total_weight: u64,
    total_profit: f64,
}

impl PackingList {
    pub fn empty(m: usize) -> Self {
        PackingList {
            picks: vec![false; m],
            total_weight: 0,
            total_profit: 0.0,
        }
    }

    pub fn from_picks(inst: &Instance, picks: Vec<bool>) -> Result<Self, TtpError> {
        if picks.len() != inst.m() {
            return Err(TtpError::PackingLength {
                expected: inst.m(),
                got: picks.len(),
            });
        }
        let mut p = PackingList::empty(0);
        p.picks = picks;
        p.recompute(inst);
        Ok(p)
    }

    pub fn from_indices(inst: &Instance, indices: &[usize]) -> Result<Self, TtpError> {
        let mut picks = vec![false; inst.m()];
        for &j in indices {
            if j >= inst.m() {
                return Err(TtpError::PackingLength {
                    expected: inst.m(),
                    got: j + 1,
                });
            }
            picks[j] = true;
        }
        PackingList::from_picks(inst, picks)
    }

    /// Picks item `j` when it is not already picked.
    pub fn pick(&mut self, inst: &Instance, j: usize) {
        if !self.picks[j] {
            self.flip(inst, j);
        }
    }

    pub fn drop_item(&mut self, inst: &Instance, j: usize) {
        if self.picks[j] {
            self.flip(inst, j);
        }
    }

    pub fn flip(&mut self, inst: &Instance, j: usize) {
        let item = inst.item(j);
        if self.picks[j] {
            self.picks[j] = false;
            self.total_weight -= item.weight;
            self.total_profit -= item.profit;
        } else {
            self.picks[j] = true;
            self.total_weight += item.weight;
            self.total_profit += item.profit;
        }
    }

    /// Recomputes both caches from scratch, summing in index order.
    pub fn recompute(&mut self, inst: &Instance) {
        let (w, p) = self.picked().fold((0u64, 0.0f64), |(w, p), j| {
            (w + inst.item(j).weight, p + inst.item(j).profit)
        });
        self.total_weight = w;
        self.total_profit = p;
    }

    pub fn picks(&self) -> &[bool] {
        &self.picks
    }

    pub fn is_picked(&self, j: usize) -> bool {
        self.picks[j]
    }

    pub fn picked(&self) -> impl Iterator<Item = usize> + '_ {
        self.picks
            .iter()
            .enumerate()
            .filter_map(|(j, &b)| b.then_some(j))
    }

    pub fn count(&self) -> usize {
        self.picks.iter().filter(|&&b| b).count()
    }

    pub fn len(&self) -> usize {
        self.picks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.picks.is_empty()
    }

    pub fn total_weight(&self) -> u64 {
        self.total_weight
    }

    pub fn total_profit(&self) -> f64 {
        self.total_profit
    }

    pub fn is_feasible(&self, inst: &Instance) -> bool {
        self.total_weight <= inst.capacity()
    }

    /// True when both caches agree with a recomputation (profit to 1e-9 relative).
    pub fn is_coherent(&self, inst: &Instance) -> bool {
        let mut fresh = self.clone();
        fresh.recompute(inst);
        fresh.total_weight == self.total_weight
            && (fresh.total_profit - self.total_profit).abs()
                <= 1e-9 * fresh.total_profit.abs().max(1.0)
    }
}

/// `f`: closed tour length.
pub fn tour_length(inst: &Instance, t: &Tour) -> f64 {
    let o = t.order();
    let n = o.len();
    let mut f = inst.distance(o[n - 1], o[0]);
    for w in o.windows(2) {
        f += inst.distance(w[0], w[1]);
    }
    f
}

/// `g`: total profit of the picked items.
pub fn kp_value(inst: &Instance, y: &PackingList) -> f64 {
    y.picked().map(|j| inst.item(j).profit).sum()
}

pub fn is_feasible(inst: &Instance, y: &PackingList) -> bool {
    y.is_feasible(inst)
}

/// Travel time of `t` when items of `y` are picked up as their city is left.
pub fn travel_time(inst: &Instance, t: &Tour, y: &PackingList) -> f64 {
    let o = t.order();
    let n = o.len();
    let mut weight = 0u64;
    let mut time = 0.0;
    for i in 0..n {
        let city = o[i];
        for &j in inst.items_at(city) {
            if y.is_picked(j) {
                weight += inst.item(j).weight;
            }
        }
        let next = o[(i + 1) % n];
        time += inst.distance(city, next) / inst.speed(weight);
    }
    time
}

/// `z = g(y) - R * travel_time(t, y)`.
pub fn ttp_objective(inst: &Instance, t: &Tour, y: &PackingList) -> Result<f64, TtpError> {
    if y.len() != inst.m() {
        return Err(TtpError::PackingLength {
            expected: inst.m(),
            got: y.len(),
        });
    }
    if !y.is_feasible(inst) {
        return Err(TtpError::InfeasiblePacking {
            weight: y.total_weight(),
            capacity: inst.capacity(),
        });
    }
    Ok(kp_value(inst, y) - inst.renting_ratio() * travel_time(inst, t, y))
}

/// A feasible tour/packing pair with cached descriptor `(f, g)` and fitness `z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub tour: Tour,
    pub packing: PackingList,
    pub f: f64,
    pub g: f64,
    pub z: f64,
}

impl Solution {
    pub fn evaluate(inst: &Instance, tour: Tour, packing: PackingList) -> Result<Self, TtpError> {
        if tour.len() != inst.n() {
            return Err(TtpError::InvalidTour(format!(
                "tour has {} cities, instance has {}",
                tour.len(),
                inst.n()
            )));
        }
        let z = ttp_objective(inst, &tour, &packing)?;
        let f = tour_length(inst, &tour);
        let g = kp_value(inst, &packing);
        Ok(Solution {
            tour,
            packing,
            f,
            g,
            z,
        })
    }

    /// Checks cache coherence and feasibility against `inst`.
    pub fn is_coherent(&self, inst: &Instance) -> bool {
        self.packing.is_coherent(inst)
            && self.packing.is_feasible(inst)
            && self.tour.len() == inst.n()
            && self.f == tour_length(inst, &self.tour)
            && self.g == kp_value(inst, &self.packing)
            && ttp_objective(inst, &self.tour, &self.packing).ok() == Some(self.z)
    }

    /// Two-line exchange format: 1-based tour, then 1-based picked items.
    pub fn to_exchange_string(&self) -> String {
        let mut out = String::new();
        write_list(&mut out, self.tour.order().iter().map(|c| c + 1));
        out.push('\n');
        write_list(&mut out, self.packing.picked().map(|j| j + 1));
        out.push('\n');
        out
    }

    pub fn from_exchange_str(inst: &Instance, text: &str) -> Result<Self, TtpError> {
        let mut lines = text.lines();
        let tour_line = lines
            .next()
            .ok_or_else(|| TtpError::Format("missing tour line".into()))?;
        let items_line = lines.next().unwrap_or("");
        let order = parse_list(tour_line)?;
        let picked = parse_list(items_line)?;
        let tour = Tour::for_instance(inst, order)?;
        let packing = PackingList::from_indices(inst, &picked)?;
        Solution::evaluate(inst, tour, packing)
    }
}

impl fmt::Display for Solution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "z={:.4} f={} g={} items={}",
            self.z,
            self.f,
            self.g,
            self.packing.count()
        )
    }
}

fn write_list(out: &mut String, xs: impl Iterator<Item = usize>) {
    for (k, x) in xs.enumerate() {
        if k > 0 {
            out.push(',');
        }
        let _ = write!(out, "{x}");
    }
}

/// Parses a comma-separated list of 1-based indices into 0-based ones.
/// Surrounding brackets and whitespace are ignored.
pub(crate) fn parse_list(line: &str) -> Result<Vec<usize>, TtpError> {
    let body = line.trim().trim_start_matches('[').trim_end_matches(']');
    if body.trim().is_empty() {
        return Ok(Vec::new());
    }
    body.split(',')
        .map(|tok| {
            let tok = tok.trim();
            match tok.parse::<usize>() {
                Ok(v) if v >= 1 => Ok(v - 1),
                _ => Err(TtpError::Format(format!("bad index {tok:?}"))),
            }
        })
        .collect()
}
