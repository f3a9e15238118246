//! Multi-run experiments: seeding, parallel execution, aggregation and
//! artifact export.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::archive::{GridSpec, MapGrid, MapSnapshot};
use crate::instance::{Instance, InstanceError};
use crate::render::{render_heatmap, HeatmapMode};
use crate::solvers::{bmbea_run, mu_plus_one_run, Algorithm, RunResult, SolverConfig, SolverError};
use crate::tsp_ops::parse_tours;
use crate::ttp::{Tour, TtpError};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Instance {
        path: PathBuf,
        source: InstanceError,
    },
    #[error("{path}: {source}")]
    Tours { path: PathBuf, source: TtpError },
    #[error("run {run} (seed {seed}) on {instance}: {source}")]
    Run {
        instance: String,
        run: usize,
        seed: u64,
        source: SolverError,
    },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("invalid experiment: {0}")]
    Invalid(String),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exports {
    pub summary: bool,
    pub run_logs: bool,
    pub maps: bool,
    pub quality_svg: bool,
    pub frequency_svg: bool,
}

impl Default for Exports {
    fn default() -> Self {
        Exports {
            summary: true,
            run_logs: true,
            maps: true,
            quality_svg: true,
            frequency_svg: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub instances: Vec<PathBuf>,
    pub solver: SolverConfig,
    pub algorithm: Algorithm,
    pub runs: usize,
    /// Where artifacts go; nothing is written when absent.
    pub out_dir: Option<PathBuf>,
    /// Initial tours shared by every run instead of the tour GA.
    pub tours_file: Option<PathBuf>,
    /// Concurrent runs; 0 lets the thread pool decide.
    pub jobs: usize,
    pub exports: Exports,
    /// When false, wallclock figures are left out of the summary and
    /// manifest so that repeated experiments produce identical files.
    pub record_timing: bool,
}

impl ExperimentSpec {
    pub fn new(instance: impl Into<PathBuf>, solver: SolverConfig) -> Self {
        ExperimentSpec {
            instances: vec![instance.into()],
            solver,
            algorithm: Algorithm::MapElites,
            runs: 10,
            out_dir: None,
            tours_file: None,
            jobs: 0,
            exports: Exports::default(),
            record_timing: true,
        }
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.runs as u64)
            .map(|k| self.solver.seed.wrapping_add(k))
            .collect()
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.runs == 0 {
            return Err(HarnessError::Invalid("run count must be at least 1".into()));
        }
        if self.instances.is_empty() {
            return Err(HarnessError::Invalid("no instance given".into()));
        }
        self.solver
            .validate()
            .map_err(|e| HarnessError::Invalid(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateCell {
    pub occupancy: usize,
    pub mean_z: Option<f64>,
}

/// Per-cell statistics over several runs: how many runs occupied the cell and
/// the mean z of those occupants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateMap {
    /// Grid of the first run; used for axis labels.
    pub spec: GridSpec,
    /// Whether later runs used different thresholds.
    pub spec_varies: bool,
    pub runs: usize,
    cells: Vec<AggregateCell>,
}

impl AggregateMap {
    pub fn empty(spec: GridSpec, runs: usize) -> Self {
        AggregateMap {
            spec,
            spec_varies: false,
            runs,
            cells: vec![
                AggregateCell {
                    occupancy: 0,
                    mean_z: None
                };
                spec.cell_count()
            ],
        }
    }

    /// Aggregates one list of `(i, j, z)` occupants per run.
    pub fn from_runs<I>(specs: &[GridSpec], runs: I) -> Self
    where
        I: IntoIterator,
        I::Item: IntoIterator<Item = (usize, usize, f64)>,
    {
        let spec = specs[0];
        let mut agg = AggregateMap::empty(spec, specs.len());
        agg.spec_varies = specs.iter().any(|s| *s != spec);
        let mut sums = vec![0.0f64; spec.cell_count()];
        for run in runs {
            for (i, j, z) in run {
                let k = (i - 1) * spec.delta2 + (j - 1);
                agg.cells[k].occupancy += 1;
                sums[k] += z;
            }
        }
        for (c, s) in agg.cells.iter_mut().zip(sums) {
            if c.occupancy > 0 {
                c.mean_z = Some(s / c.occupancy as f64);
            }
        }
        agg
    }

    pub fn from_maps(maps: &[MapGrid]) -> Self {
        let specs: Vec<GridSpec> = maps.iter().map(|m| *m.spec()).collect();
        Self::from_runs(
            &specs,
            maps.iter().map(|m| {
                m.occupied()
                    .map(|((i, j), s)| (i, j, s.z))
                    .collect::<Vec<_>>()
            }),
        )
    }

    pub fn from_snapshots(snaps: &[MapSnapshot]) -> Result<Self, HarnessError> {
        let first = snaps
            .first()
            .ok_or_else(|| HarnessError::Invalid("no snapshots".into()))?;
        if snaps
            .iter()
            .any(|s| (s.spec.delta1, s.spec.delta2) != (first.spec.delta1, first.spec.delta2))
        {
            return Err(HarnessError::Invalid(
                "snapshots use different grid sizes".into(),
            ));
        }
        for s in snaps {
            for c in &s.cells {
                if c.i == 0 || c.i > s.spec.delta1 || c.j == 0 || c.j > s.spec.delta2 {
                    return Err(HarnessError::Invalid(format!(
                        "cell ({}, {}) outside the grid",
                        c.i, c.j
                    )));
                }
            }
        }
        let specs: Vec<GridSpec> = snaps.iter().map(|s| s.spec).collect();
        Ok(Self::from_runs(
            &specs,
            snaps
                .iter()
                .map(|s| s.cells.iter().map(|c| (c.i, c.j, c.z)).collect::<Vec<_>>()),
        ))
    }

    /// 1-based cell.
    pub fn cell(&self, i: usize, j: usize) -> AggregateCell {
        self.cells[(i - 1) * self.spec.delta2 + (j - 1)]
    }

    pub fn cells(&self) -> impl Iterator<Item = ((usize, usize), AggregateCell)> + '_ {
        let d2 = self.spec.delta2;
        self.cells
            .iter()
            .enumerate()
            .map(move |(k, c)| ((k / d2 + 1, k % d2 + 1), *c))
    }
}

/// Final archive of a run; baseline populations are binned into their grid.
pub fn final_map(r: &RunResult) -> MapGrid {
    match &r.map {
        Some(m) => m.clone(),
        None => {
            let mut m = MapGrid::new(r.spec);
            for s in &r.population {
                m.try_insert(s);
            }
            m
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub avg_z: f64,
    pub best_z: f64,
    pub mean_elapsed_s: f64,
    pub per_run_z: Vec<f64>,
}

/// Mean and maximum of the per-run best z, plus mean wallclock seconds.
pub fn summarize_runs(results: &[RunResult]) -> Summary {
    let elapsed: Vec<f64> = results.iter().map(|r| r.elapsed.as_secs_f64()).collect();
    summarize_scores(results.iter().map(|r| r.best_z()).collect(), &elapsed)
}

pub fn summarize_scores(per_run_z: Vec<f64>, elapsed_s: &[f64]) -> Summary {
    assert!(!per_run_z.is_empty(), "summary needs at least one run");
    let n = per_run_z.len() as f64;
    Summary {
        avg_z: per_run_z.iter().sum::<f64>() / n,
        best_z: per_run_z.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mean_elapsed_s: elapsed_s.iter().sum::<f64>() / n,
        per_run_z,
    }
}

#[derive(Debug)]
pub struct InstanceOutcome {
    /// File stem used to label rows and artifacts.
    pub label: String,
    pub results: Vec<RunResult>,
    pub summary: Summary,
    pub aggregate: AggregateMap,
}

#[derive(Debug)]
pub struct ExperimentReport {
    pub instances: Vec<InstanceOutcome>,
}

fn label_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

pub fn load_tours(inst: &Instance, path: &Path) -> Result<Vec<Tour>, HarnessError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_tours(inst, &text).map_err(|source| HarnessError::Tours {
        path: path.to_path_buf(),
        source,
    })
}

/// One run with its own RNG stream seeded from `cfg.seed`.
pub fn single_run(
    inst: &Instance,
    cfg: &SolverConfig,
    algorithm: Algorithm,
    tours: Option<&[Tour]>,
) -> Result<RunResult, SolverError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    match algorithm {
        Algorithm::MapElites => bmbea_run(inst, cfg, tours, &mut rng),
        Algorithm::MuPlusOne => mu_plus_one_run(inst, cfg, tours, &mut rng),
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    status: &'a str,
    error: Option<String>,
    spec: &'a ExperimentSpec,
    seeds: Vec<u64>,
    instances: Vec<ManifestInstance>,
    timing: &'static str,
}

#[derive(Serialize)]
struct ManifestInstance {
    label: String,
    path: PathBuf,
    completed_runs: usize,
    f_star: Vec<f64>,
    g_star: Option<f64>,
    per_run_z: Vec<f64>,
    occupied_cells: Vec<usize>,
    elapsed_s: Option<Vec<f64>>,
    grid_varies_between_runs: bool,
    quality_colormap: &'static str,
    frequency_colormap: &'static str,
}

const TIMING_NOTE: &str = "mean_cpu_s and elapsed_s are wallclock seconds per run, \
initialization included; they are not process CPU time";

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), HarnessError> {
    fs::write(path, contents).map_err(io_err(path))
}

fn manifest_entry(
    spec: &ExperimentSpec,
    label: String,
    path: &Path,
    results: &[RunResult],
) -> ManifestInstance {
    ManifestInstance {
        label,
        path: path.to_path_buf(),
        completed_runs: results.len(),
        f_star: results.iter().map(|r| r.reference.f_star).collect(),
        g_star: results.first().map(|r| r.reference.g_star),
        per_run_z: results.iter().map(|r| r.best_z()).collect(),
        occupied_cells: results
            .iter()
            .map(|r| final_map(r).occupied_count())
            .collect(),
        elapsed_s: spec
            .record_timing
            .then(|| results.iter().map(|r| r.elapsed.as_secs_f64()).collect()),
        grid_varies_between_runs: results.iter().any(|r| r.spec != results[0].spec),
        quality_colormap: "per-figure min-max of mean z, yellow to dark red; grey is empty",
        frequency_colormap: "occupancy divided by run count, yellow to dark red; grey is empty",
    }
}

fn write_manifest(
    dir: &Path,
    spec: &ExperimentSpec,
    status: &str,
    error: Option<String>,
    instances: Vec<ManifestInstance>,
) -> Result<(), HarnessError> {
    let m = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        status,
        error,
        spec,
        seeds: spec.seeds(),
        instances,
        timing: TIMING_NOTE,
    };
    write(
        &dir.join("manifest.json"),
        serde_json::to_string_pretty(&m).expect("manifest serializes") + "\n",
    )
}

/// Runs every instance `spec.runs` times with seeds `seed, seed + 1, ...`
/// and writes the requested artifacts. A failing run stops the experiment
/// after writing a manifest of what completed.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport, HarnessError> {
    spec.validate()?;
    if let Some(dir) = &spec.out_dir {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.jobs)
        .build()
        .map_err(|e| HarnessError::Invalid(format!("thread pool: {e}")))?;

    let mut outcomes: Vec<InstanceOutcome> = Vec::new();
    let mut manifest: Vec<ManifestInstance> = Vec::new();
    for path in &spec.instances {
        let label = label_of(path);
        let inst = Instance::from_file(path).map_err(|source| HarnessError::Instance {
            path: path.clone(),
            source,
        })?;
        let tours = match &spec.tours_file {
            Some(p) => Some(load_tours(&inst, p)?),
            None => None,
        };
        let seeds = spec.seeds();
        let attempts: Vec<Result<RunResult, SolverError>> = pool.install(|| {
            seeds
                .par_iter()
                .map(|&seed| {
                    let cfg = SolverConfig {
                        seed,
                        ..spec.solver.clone()
                    };
                    single_run(&inst, &cfg, spec.algorithm, tours.as_deref())
                })
                .collect()
        });

        let mut results = Vec::with_capacity(attempts.len());
        let mut failure = None;
        for (run, a) in attempts.into_iter().enumerate() {
            match a {
                Ok(r) => results.push(r),
                Err(source) => {
                    failure = Some(HarnessError::Run {
                        instance: label.clone(),
                        run,
                        seed: seeds[run],
                        source,
                    });
                    break;
                }
            }
        }
        if let Some(err) = failure {
            if let Some(dir) = &spec.out_dir {
                manifest.push(manifest_entry(spec, label, path, &results));
                write_manifest(dir, spec, "failed", Some(err.to_string()), manifest)?;
            }
            return Err(err);
        }

        let maps: Vec<MapGrid> = results.iter().map(final_map).collect();
        let aggregate = AggregateMap::from_maps(&maps);
        let summary = summarize_runs(&results);
        if let Some(root) = &spec.out_dir {
            let dir = if spec.instances.len() > 1 {
                root.join(&label)
            } else {
                root.clone()
            };
            fs::create_dir_all(&dir).map_err(io_err(&dir))?;
            export_runs(spec, &dir, &label, &results, &maps, &aggregate)?;
        }
        manifest.push(manifest_entry(spec, label.clone(), path, &results));
        outcomes.push(InstanceOutcome {
            label,
            results,
            summary,
            aggregate,
        });
    }

    if let Some(dir) = &spec.out_dir {
        if spec.exports.summary {
            write(&dir.join("summary.csv"), summary_csv(spec, &outcomes))?;
            write(&dir.join("scores.csv"), scores_csv(spec, &outcomes))?;
        }
        write_manifest(dir, spec, "complete", None, manifest)?;
    }
    Ok(ExperimentReport {
        instances: outcomes,
    })
}

fn export_runs(
    spec: &ExperimentSpec,
    dir: &Path,
    label: &str,
    results: &[RunResult],
    maps: &[MapGrid],
    aggregate: &AggregateMap,
) -> Result<(), HarnessError> {
    for (k, (r, m)) in results.iter().zip(maps).enumerate() {
        if spec.exports.run_logs {
            write(&dir.join(format!("run_{k}.jsonl")), r.events_jsonl())?;
        }
        if spec.exports.maps {
            let snap = serde_json::to_string(&m.snapshot()).expect("snapshot serializes");
            write(&dir.join(format!("map_{k}.json")), snap + "\n")?;
            write(&dir.join(format!("map_{k}.csv")), m.to_csv())?;
        }
    }
    let algo = match spec.algorithm {
        Algorithm::MapElites => "MAP-Elites",
        Algorithm::MuPlusOne => "(mu+1) EA",
    };
    let ops = format!("{}+{}", spec.solver.tsp_operator, spec.solver.kp_operator);
    if spec.exports.quality_svg {
        let title = format!("{label} {algo} {ops}: mean z over {} runs", results.len());
        write(
            &dir.join("quality.svg"),
            render_heatmap(aggregate, HeatmapMode::Quality, &title),
        )?;
    }
    if spec.exports.frequency_svg {
        let title = format!(
            "{label} {algo} {ops}: cell frequency over {} runs",
            results.len()
        );
        write(
            &dir.join("frequency.svg"),
            render_heatmap(aggregate, HeatmapMode::Frequency, &title),
        )?;
    }
    Ok(())
}

/// Columns: instance, tsp_op, kp_op, runs, avg_z, best_z, mean_cpu_s.
pub fn summary_csv(spec: &ExperimentSpec, outcomes: &[InstanceOutcome]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "instance",
        "tsp_op",
        "kp_op",
        "runs",
        "avg_z",
        "best_z",
        "mean_cpu_s",
    ])
    .unwrap();
    for o in outcomes {
        let cpu = if spec.record_timing {
            format!("{:.3}", o.summary.mean_elapsed_s)
        } else {
            String::new()
        };
        w.write_record([
            o.label.clone(),
            spec.solver.tsp_operator.to_string(),
            spec.solver.kp_operator.to_string(),
            o.results.len().to_string(),
            o.summary.avg_z.to_string(),
            o.summary.best_z.to_string(),
            cpu,
        ])
        .unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

/// One row per run, for external statistics.
pub fn scores_csv(spec: &ExperimentSpec, outcomes: &[InstanceOutcome]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "instance",
        "tsp_op",
        "kp_op",
        "run",
        "seed",
        "best_z",
        "occupied_cells",
        "iterations",
    ])
    .unwrap();
    for o in outcomes {
        for (k, r) in o.results.iter().enumerate() {
            w.write_record([
                o.label.clone(),
                spec.solver.tsp_operator.to_string(),
                spec.solver.kp_operator.to_string(),
                k.to_string(),
                r.seed.to_string(),
                r.best_z().to_string(),
                final_map(r).occupied_count().to_string(),
                r.iterations.to_string(),
            ])
            .unwrap();
        }
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

/// Reads `map_*.json` snapshots from a directory, ordered by run number.
pub fn read_snapshots(dir: &Path) -> Result<Vec<MapSnapshot>, HarnessError> {
    let mut found: Vec<(usize, PathBuf)> = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if let Some(k) = name
            .strip_prefix("map_")
            .and_then(|r| r.strip_suffix(".json"))
            .and_then(|k| k.parse().ok())
        {
            found.push((k, path));
        }
    }
    found.sort();
    found
        .into_iter()
        .map(|(_, p)| {
            let text = fs::read_to_string(&p).map_err(io_err(&p))?;
            serde_json::from_str(&text)
                .map_err(|e| HarnessError::Invalid(format!("{}: {e}", p.display())))
        })
        .collect()
}
