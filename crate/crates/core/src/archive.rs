//! The δ1×δ2 MAP-Elites grid over the (tour length, packing profit) plane.
//!
//! Axis `i` bins tour lengths in `[f*, f_max]`, axis `j` bins profits in
//! `[g_min, g*]`. Both ranges are closed: values on the far boundary fall into
//! the last cell. Indices are 1-based, so cell `(1, δ2)` is the one closest to
//! both reference optima.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::Instance;
use crate::ttp::Solution;

#[derive(Debug, Error, PartialEq)]
pub enum ArchiveError {
    #[error("invalid grid: {0}")]
    InvalidSpec(String),
    #[error("cannot derive thresholds from an empty population")]
    EmptyPopulation,
    #[error("snapshot violates archive invariants: {0}")]
    Corrupt(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub f_star: f64,
    pub g_star: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub delta1: usize,
    pub delta2: usize,
    /// Upper tour-length boundary, `(1 + alpha1) f*` unless set explicitly.
    pub f_max: f64,
    /// Lower profit boundary, `(1 - alpha2) g*` unless set explicitly.
    pub g_min: f64,
}

impl GridSpec {
    pub fn new(
        f_star: f64,
        g_star: f64,
        alpha1: f64,
        alpha2: f64,
        delta1: usize,
        delta2: usize,
    ) -> Result<Self, ArchiveError> {
        let spec = GridSpec {
            f_star,
            g_star,
            alpha1,
            alpha2,
            delta1,
            delta2,
            f_max: (1.0 + alpha1) * f_star,
            g_min: (1.0 - alpha2) * g_star,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Grid whose far boundaries are given directly; the gaps are derived.
    pub fn with_bounds(
        f_star: f64,
        f_max: f64,
        g_star: f64,
        g_min: f64,
        delta1: usize,
        delta2: usize,
    ) -> Result<Self, ArchiveError> {
        let spec = GridSpec {
            f_star,
            g_star,
            alpha1: f_max / f_star - 1.0,
            alpha2: 1.0 - g_min / g_star,
            delta1,
            delta2,
            f_max,
            g_min,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), ArchiveError> {
        let bad = |msg: String| Err(ArchiveError::InvalidSpec(msg));
        if !(self.f_star > 0.0 && self.f_star.is_finite()) {
            return bad(format!("f* must be positive, got {}", self.f_star));
        }
        if !(self.g_star > 0.0 && self.g_star.is_finite()) {
            return bad(format!("g* must be positive, got {}", self.g_star));
        }
        if !(self.alpha1 > 0.0 && self.alpha2 > 0.0) {
            return bad(format!(
                "gaps must be positive, got alpha1={} alpha2={}",
                self.alpha1, self.alpha2
            ));
        }
        if !(self.f_max > self.f_star && self.g_min < self.g_star) {
            return bad("grid spans must be non-empty".to_string());
        }
        if self.delta1 == 0 || self.delta2 == 0 {
            return bad("cell counts must be at least 1".to_string());
        }
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        self.delta1 * self.delta2
    }

    /// 1-based cell of a descriptor, or `None` outside the covered region.
    pub fn cell_index(&self, f: f64, g: f64) -> Option<(usize, usize)> {
        if !(f >= self.f_star && f <= self.f_max && g >= self.g_min && g <= self.g_star) {
            return None;
        }
        let bin = |x: f64, lo: f64, hi: f64, cells: usize| -> usize {
            let k = ((x - lo) * cells as f64 / (hi - lo)).floor() as usize;
            k.min(cells - 1) + 1
        };
        Some((
            bin(f, self.f_star, self.f_max, self.delta1),
            bin(g, self.g_min, self.g_star, self.delta2),
        ))
    }

    /// Half-open tour-length range `[lo, hi)` of column `i`.
    pub fn f_range(&self, i: usize) -> (f64, f64) {
        let w = (self.f_max - self.f_star) / self.delta1 as f64;
        (self.f_star + (i - 1) as f64 * w, self.f_star + i as f64 * w)
    }

    /// Half-open profit range `[lo, hi)` of row `j`.
    pub fn g_range(&self, j: usize) -> (f64, f64) {
        let w = (self.g_star - self.g_min) / self.delta2 as f64;
        (self.g_min + (j - 1) as f64 * w, self.g_min + j as f64 * w)
    }
}

/// Thresholds taken from the extremes of an initial population: the longest
/// tour sets `f_max`, the smallest profit sets `g_min`. A degenerate span is
/// widened to `epsilon` times the reference value.
pub fn relaxed_thresholds(
    p0: &[Solution],
    f_star: f64,
    g_star: f64,
    delta1: usize,
    delta2: usize,
    epsilon: f64,
) -> Result<GridSpec, ArchiveError> {
    if p0.is_empty() {
        return Err(ArchiveError::EmptyPopulation);
    }
    let max_f = p0.iter().map(|s| s.f).fold(f64::NEG_INFINITY, f64::max);
    let min_g = p0.iter().map(|s| s.g).fold(f64::INFINITY, f64::min);
    let f_max = if max_f > f_star {
        max_f
    } else {
        (1.0 + epsilon) * f_star
    };
    let g_min = if min_g < g_star {
        min_g
    } else {
        (1.0 - epsilon) * g_star
    };
    GridSpec::with_bounds(f_star, f_max, g_star, g_min, delta1, delta2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InsertOutcome {
    /// Outside the covered region.
    Discarded,
    Filled,
    Replaced,
    /// The occupant is at least as good.
    Rejected,
}

impl InsertOutcome {
    pub fn changed_map(self) -> bool {
        matches!(self, InsertOutcome::Filled | InsertOutcome::Replaced)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeCounts {
    pub discarded: u64,
    pub filled: u64,
    pub replaced: u64,
    pub rejected: u64,
}

impl OutcomeCounts {
    pub fn record(&mut self, o: InsertOutcome) {
        match o {
            InsertOutcome::Discarded => self.discarded += 1,
            InsertOutcome::Filled => self.filled += 1,
            InsertOutcome::Replaced => self.replaced += 1,
            InsertOutcome::Rejected => self.rejected += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.discarded + self.filled + self.replaced + self.rejected
    }
}

/// Elitist archive: one solution per cell, the best `z` ever offered to it.
#[derive(Debug, Clone, PartialEq)]
pub struct MapGrid {
    spec: GridSpec,
    cells: Vec<Option<Solution>>,
    counts: OutcomeCounts,
}

impl MapGrid {
    pub fn new(spec: GridSpec) -> Self {
        MapGrid {
            spec,
            cells: vec![None; spec.cell_count()],
            counts: OutcomeCounts::default(),
        }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn counts(&self) -> OutcomeCounts {
        self.counts
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        (i - 1) * self.spec.delta2 + (j - 1)
    }

    pub fn get(&self, i: usize, j: usize) -> Option<&Solution> {
        self.cells[self.slot(i, j)].as_ref()
    }

    pub fn try_insert(&mut self, s: &Solution) -> (InsertOutcome, Option<(usize, usize)>) {
        let outcome = match self.spec.cell_index(s.f, s.g) {
            None => (InsertOutcome::Discarded, None),
            Some((i, j)) => {
                let slot = self.slot(i, j);
                let o = match &self.cells[slot] {
                    None => InsertOutcome::Filled,
                    Some(occ) if s.z > occ.z => InsertOutcome::Replaced,
                    Some(_) => InsertOutcome::Rejected,
                };
                if o.changed_map() {
                    self.cells[slot] = Some(s.clone());
                }
                (o, Some((i, j)))
            }
        };
        self.counts.record(outcome.0);
        outcome
    }

    /// Counts an offspring known to fall outside the grid without building it.
    pub fn record_discard(&mut self) {
        self.counts.record(InsertOutcome::Discarded);
    }

    /// Occupied cells in row-major `(i, j)` order.
    pub fn occupied(&self) -> impl Iterator<Item = ((usize, usize), &Solution)> + '_ {
        let d2 = self.spec.delta2;
        self.cells
            .iter()
            .enumerate()
            .filter_map(move |(k, c)| c.as_ref().map(|s| ((k / d2 + 1, k % d2 + 1), s)))
    }

    pub fn occupied_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_some()).count()
    }

    pub fn best(&self) -> Option<&Solution> {
        self.occupied()
            .map(|(_, s)| s)
            .fold(None, |acc: Option<&Solution>, s| match acc {
                Some(b) if b.z >= s.z => Some(b),
                _ => Some(s),
            })
    }

    /// Checks cell membership of every occupant; with an instance, also cache
    /// coherence and feasibility.
    pub fn check_invariants(&self, inst: Option<&Instance>) -> Result<(), ArchiveError> {
        for ((i, j), s) in self.occupied() {
            if self.spec.cell_index(s.f, s.g) != Some((i, j)) {
                return Err(ArchiveError::Corrupt(format!(
                    "occupant of ({i}, {j}) with f={} g={} belongs elsewhere",
                    s.f, s.g
                )));
            }
            if let Some(inst) = inst {
                if !s.is_coherent(inst) {
                    return Err(ArchiveError::Corrupt(format!(
                        "occupant of ({i}, {j}) has stale caches or is infeasible"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn snapshot(&self) -> MapSnapshot {
        MapSnapshot {
            spec: self.spec,
            cells: self
                .occupied()
                .map(|((i, j), s)| SnapshotCell {
                    i,
                    j,
                    f: s.f,
                    g: s.g,
                    z: s.z,
                    tour: s.tour.order().iter().map(|c| c + 1).collect(),
                    picks: s.packing.picked().map(|k| k + 1).collect(),
                })
                .collect(),
        }
    }

    /// Flat `i,j,f,g,z` table of occupied cells.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["i", "j", "f", "g", "z"]).unwrap();
        for ((i, j), s) in self.occupied() {
            w.serialize((i, j, s.f, s.g, s.z)).unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotCell {
    pub i: usize,
    pub j: usize,
    pub f: f64,
    pub g: f64,
    pub z: f64,
    /// 1-based city order.
    pub tour: Vec<usize>,
    /// 1-based picked item indices.
    pub picks: Vec<usize>,
}

/// Serializable view of an archive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapSnapshot {
    pub spec: GridSpec,
    pub cells: Vec<SnapshotCell>,
}

impl MapSnapshot {
    /// Rebuilds the archive, re-evaluating every stored solution on `inst`
    /// and checking that the stored descriptors and cells agree.
    pub fn restore(&self, inst: &Instance) -> Result<MapGrid, ArchiveError> {
        self.spec.validate()?;
        let mut grid = MapGrid::new(self.spec);
        for c in &self.cells {
            let corrupt =
                |msg: String| ArchiveError::Corrupt(format!("cell ({}, {}): {msg}", c.i, c.j));
            if c.i == 0 || c.i > self.spec.delta1 || c.j == 0 || c.j > self.spec.delta2 {
                return Err(corrupt("index outside the grid".into()));
            }
            let order: Vec<usize> = c.tour.iter().map(|x| x.wrapping_sub(1)).collect();
            let tour =
                crate::ttp::Tour::for_instance(inst, order).map_err(|e| corrupt(e.to_string()))?;
            let picks: Vec<usize> = c.picks.iter().map(|x| x.wrapping_sub(1)).collect();
            let packing = crate::ttp::PackingList::from_indices(inst, &picks)
                .map_err(|e| corrupt(e.to_string()))?;
            let s = Solution::evaluate(inst, tour, packing).map_err(|e| corrupt(e.to_string()))?;
            if s.f != c.f || s.g != c.g || s.z != c.z {
                return Err(corrupt(format!(
                    "stored (f, g, z) = ({}, {}, {}) but evaluates to ({}, {}, {})",
                    c.f, c.g, c.z, s.f, s.g, s.z
                )));
            }
            if grid.get(c.i, c.j).is_some() {
                return Err(corrupt("cell listed twice".into()));
            }
            let slot = grid.slot(c.i, c.j);
            grid.cells[slot] = Some(s);
        }
        grid.check_invariants(Some(inst))?;
        Ok(grid)
    }
}
