//! Outer loops: population initialization, the bi-level MAP-Elites EA and the
//! (μ+1) EA baseline.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::archive::{
    relaxed_thresholds, ArchiveError, GridSpec, InsertOutcome, MapGrid, OutcomeCounts,
};
use crate::instance::Instance;
use crate::kp_ops::{ea_packer, kp_optimal, pwt_dp, repair_packing};
use crate::tsp_ops::{eax_1ab, evolve_initial_tours, two_opt_move, InitConfig, InitStatus};
use crate::ttp::{tour_length, PackingList, Solution, Tour, TtpError};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Grid(#[from] ArchiveError),
    #[error(transparent)]
    Tour(#[from] TtpError),
    #[error(
        "no initial solution lies inside the grid (f* = {f_star}, g* = {g_star}, \
         initial f in [{min_f}, {max_f}], g in [{min_g}, {max_g}])"
    )]
    GridUnreachable {
        f_star: f64,
        g_star: f64,
        min_f: f64,
        max_f: f64,
        min_g: f64,
        max_g: f64,
    },
    #[error("population needs at least {needed} solutions, got {got}")]
    PopulationTooSmall { needed: usize, got: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TspOperator {
    #[serde(rename = "eax")]
    Eax,
    #[serde(rename = "2opt")]
    TwoOpt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KpOperator {
    #[serde(rename = "dp")]
    Dp,
    #[serde(rename = "ea")]
    Ea,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridMode {
    Prefixed,
    Relaxed,
}

macro_rules! keyword_enum {
    ($ty:ident { $($variant:ident => $kw:literal),+ $(,)? }) => {
        impl $ty {
            pub fn as_str(self) -> &'static str {
                match self { $($ty::$variant => $kw),+ }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $ty {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s.to_ascii_lowercase().as_str() {
                    $($kw => Ok($ty::$variant),)+
                    other => Err(format!(
                        "unknown {} '{other}', expected one of: {}",
                        stringify!($ty),
                        [$($kw),+].join(", ")
                    )),
                }
            }
        }
    };
}

keyword_enum!(TspOperator { Eax => "eax", TwoOpt => "2opt" });
keyword_enum!(KpOperator { Dp => "dp", Ea => "ea" });
keyword_enum!(GridMode { Prefixed => "prefixed", Relaxed => "relaxed" });

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub tsp_operator: TspOperator,
    pub kp_operator: KpOperator,
    /// Offspring generated after initialization.
    pub iterations: u64,
    /// Wallclock budget in seconds, initialization included.
    pub time_limit_s: Option<f64>,
    pub grid_mode: GridMode,
    pub alpha1: f64,
    pub alpha2: f64,
    pub delta1: usize,
    pub delta2: usize,
    /// Relative width given to a zero-width span in relaxed mode.
    pub relaxed_epsilon: f64,
    /// Initial tour GA; its population size is also μ for the baseline.
    pub init: InitConfig,
    /// Mutation steps of the (1+1) EA packer per packing.
    pub ea_iterations: usize,
    /// Reference tour length; when absent it is taken from the initial tours.
    pub f_star: Option<f64>,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tsp_operator: TspOperator::Eax,
            kp_operator: KpOperator::Dp,
            iterations: 10_000,
            time_limit_s: Some(3600.0),
            grid_mode: GridMode::Prefixed,
            alpha1: 0.05,
            alpha2: 0.20,
            delta1: 20,
            delta2: 20,
            relaxed_epsilon: 1e-3,
            init: InitConfig::default(),
            ea_iterations: 2000,
            f_star: None,
            seed: 0,
        }
    }
}

impl SolverConfig {
    /// Gaps for instances whose tour and packing parts are far apart in scale.
    pub fn unbalanced(mut self) -> Self {
        self.alpha1 = 0.02;
        self.alpha2 = 0.60;
        self
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |m: &str| Err(SolverError::Config(m.to_string()));
        if self.init.pop_size < 1 {
            return bad("population size must be at least 1");
        }
        if self.delta1 == 0 || self.delta2 == 0 {
            return bad("cell counts must be at least 1");
        }
        if self.grid_mode == GridMode::Prefixed && !(self.alpha1 > 0.0 && self.alpha2 > 0.0) {
            return bad("gaps must be positive");
        }
        if self.relaxed_epsilon.is_nan() || self.relaxed_epsilon <= 0.0 {
            return bad("relaxed epsilon must be positive");
        }
        if let Some(t) = self.time_limit_s {
            if t.is_nan() || t <= 0.0 {
                return bad("time limit must be positive");
            }
        }
        if let Some(f) = self.f_star {
            if !(f > 0.0 && f.is_finite()) {
                return bad("f* must be positive");
            }
        }
        Ok(())
    }
}

/// Reference optima anchoring the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub f_star: f64,
    pub g_star: f64,
    /// A packing attaining `g_star`.
    pub kp_optimum: PackingList,
}

#[derive(Debug, Clone)]
pub struct Initialization {
    pub population: Vec<Solution>,
    pub reference: Reference,
    /// Outcome of the tour GA; `None` when tours came from the caller.
    pub init_status: Option<InitStatus>,
}

/// Packs `t` with the configured operator. The EA starts from `seed`.
pub fn pack<R: Rng + ?Sized>(
    inst: &Instance,
    t: &Tour,
    op: KpOperator,
    seed: &PackingList,
    ea_iterations: usize,
    rng: &mut R,
) -> PackingList {
    match op {
        KpOperator::Dp => pwt_dp(inst, t).packing,
        KpOperator::Ea => ea_packer(inst, t, seed, ea_iterations, rng),
    }
}

/// Builds the initial population. Tours come from `tours` when given,
/// otherwise from the EAX tour GA. f* is the configured value, else the
/// shortest initial tour; g* is the exact knapsack optimum.
pub fn initialize_population<R: Rng + ?Sized>(
    inst: &Instance,
    cfg: &SolverConfig,
    tours: Option<&[Tour]>,
    rng: &mut R,
) -> Result<Initialization, SolverError> {
    cfg.validate()?;
    let (tours, init_status) = match tours {
        Some(ts) if !ts.is_empty() => {
            for t in ts {
                if t.len() != inst.n() {
                    return Err(TtpError::InvalidTour(format!(
                        "tour has {} cities, instance has {}",
                        t.len(),
                        inst.n()
                    ))
                    .into());
                }
            }
            (ts.to_vec(), None)
        }
        Some(_) => return Err(SolverError::PopulationTooSmall { needed: 1, got: 0 }),
        None => {
            let out = evolve_initial_tours(inst, cfg.f_star, &cfg.init, rng);
            (out.tours, Some(out.status))
        }
    };
    let f_star = cfg.f_star.unwrap_or_else(|| {
        tours
            .iter()
            .map(|t| tour_length(inst, t))
            .fold(f64::INFINITY, f64::min)
    });
    let (g_star, kp_optimum) = kp_optimal(inst);

    let mut seed = kp_optimum.clone();
    repair_packing(inst, &mut seed, rng);
    let population = tours
        .into_iter()
        .map(|t| {
            let y = pack(inst, &t, cfg.kp_operator, &seed, cfg.ea_iterations, rng);
            Solution::evaluate(inst, t, y)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Initialization {
        population,
        reference: Reference {
            f_star,
            g_star,
            kp_optimum,
        },
        init_status,
    })
}

/// Grid for a run: fixed gaps, or spans taken from the initial population.
pub fn grid_spec(
    cfg: &SolverConfig,
    reference: &Reference,
    population: &[Solution],
) -> Result<GridSpec, SolverError> {
    let (f, g) = (reference.f_star, reference.g_star);
    let spec = match cfg.grid_mode {
        GridMode::Prefixed => GridSpec::new(f, g, cfg.alpha1, cfg.alpha2, cfg.delta1, cfg.delta2)?,
        GridMode::Relaxed => relaxed_thresholds(
            population,
            f,
            g,
            cfg.delta1,
            cfg.delta2,
            cfg.relaxed_epsilon,
        )?,
    };
    Ok(spec)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    MapElites,
    MuPlusOne,
}

/// One change of the archive or population. Iteration 0 is initialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEvent {
    pub iter: u64,
    pub outcome: InsertOutcome,
    /// Cell of the solution; absent for baseline solutions outside the grid.
    pub i: Option<usize>,
    pub j: Option<usize>,
    pub f: f64,
    pub g: f64,
    pub z: f64,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub reference: Reference,
    pub spec: GridSpec,
    /// Final archive (MAP-Elites runs only).
    pub map: Option<MapGrid>,
    /// Final population: archive occupants in cell order, or the baseline's μ
    /// individuals in their storage order.
    pub population: Vec<Solution>,
    pub best: Solution,
    /// Best z after initialization, then after every iteration.
    pub trace: Vec<f64>,
    pub events: Vec<RunEvent>,
    /// Offspring outcomes, initialization excluded. For the baseline a
    /// surviving offspring counts as replaced and a discarded one as rejected.
    pub counts: OutcomeCounts,
    pub iterations: u64,
    /// Iterations where EAX had to mate a solution with itself.
    pub self_matings: u64,
    pub init_status: Option<InitStatus>,
    pub elapsed: Duration,
}

impl RunResult {
    pub fn best_z(&self) -> f64 {
        self.best.z
    }

    /// Number of distinct (f, g) pairs in the final population.
    pub fn distinct_descriptors(&self) -> usize {
        self.population
            .iter()
            .map(|s| (s.f.to_bits(), s.g.to_bits()))
            .collect::<HashSet<_>>()
            .len()
    }

    /// Events as JSON lines.
    pub fn events_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("events serialize"));
            out.push('\n');
        }
        out
    }
}

struct Budget {
    start: Instant,
    limit: Option<Duration>,
}

impl Budget {
    fn new(cfg: &SolverConfig) -> Self {
        Budget {
            start: Instant::now(),
            limit: cfg.time_limit_s.map(Duration::from_secs_f64),
        }
    }

    fn expired(&self) -> bool {
        self.limit.is_some_and(|l| self.start.elapsed() >= l)
    }
}

/// Indices of one or two parents among `k` candidates. EAX takes two
/// distinct ones unless only one exists.
fn pick_parents<R: Rng + ?Sized>(op: TspOperator, k: usize, rng: &mut R) -> (usize, usize) {
    let a = rng.gen_range(0..k);
    match op {
        TspOperator::TwoOpt => (a, a),
        TspOperator::Eax if k == 1 => (a, a),
        TspOperator::Eax => {
            let b = rng.gen_range(0..k - 1);
            (a, if b >= a { b + 1 } else { b })
        }
    }
}

fn child_tour<R: Rng + ?Sized>(
    inst: &Instance,
    op: TspOperator,
    a: &Tour,
    b: &Tour,
    rng: &mut R,
) -> Tour {
    match op {
        TspOperator::Eax => eax_1ab(inst, a, b, rng),
        TspOperator::TwoOpt => two_opt_move(a, rng),
    }
}

fn event(
    iter: u64,
    outcome: InsertOutcome,
    cell: Option<(usize, usize)>,
    s: &Solution,
) -> RunEvent {
    RunEvent {
        iter,
        outcome,
        i: cell.map(|c| c.0),
        j: cell.map(|c| c.1),
        f: s.f,
        g: s.g,
        z: s.z,
    }
}

/// Bi-level MAP-Elites EA. Tours come from `tours` or the tour GA.
pub fn bmbea_run<R: Rng + ?Sized>(
    inst: &Instance,
    cfg: &SolverConfig,
    tours: Option<&[Tour]>,
    rng: &mut R,
) -> Result<RunResult, SolverError> {
    let budget = Budget::new(cfg);
    let init = initialize_population(inst, cfg, tours, rng)?;
    let spec = grid_spec(cfg, &init.reference, &init.population)?;
    let mut grid = MapGrid::new(spec);
    let mut events = Vec::new();
    // cells in the order they were first filled, for uniform parent draws
    let mut occupied: Vec<(usize, usize)> = Vec::new();
    for s in &init.population {
        let (o, cell) = grid.try_insert(s);
        if o.changed_map() {
            events.push(event(0, o, cell, s));
        }
        if o == InsertOutcome::Filled {
            occupied.push(cell.unwrap());
        }
    }
    if occupied.is_empty() {
        let pop = &init.population;
        let min = |v: fn(&Solution) -> f64| pop.iter().map(v).fold(f64::INFINITY, f64::min);
        let max = |v: fn(&Solution) -> f64| pop.iter().map(v).fold(f64::NEG_INFINITY, f64::max);
        return Err(SolverError::GridUnreachable {
            f_star: init.reference.f_star,
            g_star: init.reference.g_star,
            min_f: min(|s| s.f),
            max_f: max(|s| s.f),
            min_g: min(|s| s.g),
            max_g: max(|s| s.g),
        });
    }
    let init_counts = grid.counts();

    let mut best_z = grid.best().unwrap().z;
    let mut trace = vec![best_z];
    let mut iterations = 0;
    let mut self_matings = 0;
    while iterations < cfg.iterations && !budget.expired() {
        iterations += 1;
        let (pa, pb) = pick_parents(cfg.tsp_operator, occupied.len(), rng);
        if cfg.tsp_operator == TspOperator::Eax && pa == pb {
            self_matings += 1;
        }
        let a = grid.get(occupied[pa].0, occupied[pa].1).unwrap();
        let b = grid.get(occupied[pb].0, occupied[pb].1).unwrap();
        let tour = child_tour(inst, cfg.tsp_operator, &a.tour, &b.tour, rng);
        let f = tour_length(inst, &tour);
        let child = if f < spec.f_star || f > spec.f_max {
            // no packing can bring this tour into the grid
            None
        } else {
            let y = pack(
                inst,
                &tour,
                cfg.kp_operator,
                &a.packing,
                cfg.ea_iterations,
                rng,
            );
            Some(Solution::evaluate(inst, tour, y)?)
        };
        match child {
            None => grid.record_discard(),
            Some(s) => {
                let (o, cell) = grid.try_insert(&s);
                if o.changed_map() {
                    events.push(event(iterations, o, cell, &s));
                    best_z = best_z.max(s.z);
                }
                if o == InsertOutcome::Filled {
                    occupied.push(cell.unwrap());
                }
            }
        }
        trace.push(best_z);
    }

    let total = grid.counts();
    let counts = OutcomeCounts {
        discarded: total.discarded - init_counts.discarded,
        filled: total.filled - init_counts.filled,
        replaced: total.replaced - init_counts.replaced,
        rejected: total.rejected - init_counts.rejected,
    };
    let population: Vec<Solution> = grid.occupied().map(|(_, s)| s.clone()).collect();
    let best = grid.best().unwrap().clone();
    Ok(RunResult {
        algorithm: Algorithm::MapElites,
        seed: cfg.seed,
        reference: init.reference,
        spec,
        map: Some(grid),
        population,
        best,
        trace,
        events,
        counts,
        iterations,
        self_matings,
        init_status: init.init_status,
        elapsed: budget.start.elapsed(),
    })
}

/// (μ+1) EA with the same initialization and variation; each offspring joins
/// the population and the worst individual (oldest among equals) leaves.
pub fn mu_plus_one_run<R: Rng + ?Sized>(
    inst: &Instance,
    cfg: &SolverConfig,
    tours: Option<&[Tour]>,
    rng: &mut R,
) -> Result<RunResult, SolverError> {
    let budget = Budget::new(cfg);
    let init = initialize_population(inst, cfg, tours, rng)?;
    if init.population.len() < 2 {
        return Err(SolverError::PopulationTooSmall {
            needed: 2,
            got: init.population.len(),
        });
    }
    let spec = grid_spec(cfg, &init.reference, &init.population)?;
    // (solution, birth iteration)
    let mut pop: Vec<(Solution, u64)> = init.population.into_iter().map(|s| (s, 0)).collect();
    let mut events: Vec<RunEvent> = pop
        .iter()
        .map(|(s, _)| event(0, InsertOutcome::Filled, spec.cell_index(s.f, s.g), s))
        .collect();

    let best_of =
        |pop: &[(Solution, u64)]| pop.iter().map(|p| p.0.z).fold(f64::NEG_INFINITY, f64::max);
    let mut trace = vec![best_of(&pop)];
    let mut counts = OutcomeCounts::default();
    let mut iterations = 0;
    while iterations < cfg.iterations && !budget.expired() {
        iterations += 1;
        let (pa, pb) = pick_parents(cfg.tsp_operator, pop.len(), rng);
        let (a, b) = (&pop[pa].0, &pop[pb].0);
        let tour = child_tour(inst, cfg.tsp_operator, &a.tour, &b.tour, rng);
        let y = pack(
            inst,
            &tour,
            cfg.kp_operator,
            &a.packing,
            cfg.ea_iterations,
            rng,
        );
        let s = Solution::evaluate(inst, tour, y)?;
        pop.push((s, iterations));
        let worst = (0..pop.len())
            .min_by(|&x, &y| {
                pop[x]
                    .0
                    .z
                    .total_cmp(&pop[y].0.z)
                    .then(pop[x].1.cmp(&pop[y].1))
            })
            .unwrap();
        pop.remove(worst);
        if worst == pop.len() {
            counts.record(InsertOutcome::Rejected);
        } else {
            counts.record(InsertOutcome::Replaced);
            let (s, _) = pop.last().unwrap();
            events.push(event(
                iterations,
                InsertOutcome::Replaced,
                spec.cell_index(s.f, s.g),
                s,
            ));
        }
        trace.push(best_of(&pop));
    }

    let population: Vec<Solution> = pop.into_iter().map(|p| p.0).collect();
    let best = population
        .iter()
        .fold(None::<&Solution>, |acc, s| match acc {
            Some(b) if b.z >= s.z => Some(b),
            _ => Some(s),
        })
        .unwrap()
        .clone();
    Ok(RunResult {
        algorithm: Algorithm::MuPlusOne,
        seed: cfg.seed,
        reference: init.reference,
        spec,
        map: None,
        population,
        best,
        trace,
        events,
        counts,
        iterations,
        self_matings: 0,
        init_status: init.init_status,
        elapsed: budget.start.elapsed(),
    })
}
