use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use ttpqd::harness::{
    read_snapshots, run_experiment, AggregateMap, ExperimentReport, ExperimentSpec, Exports,
};
use ttpqd::oracle::run_checks;
use ttpqd::render::{render_heatmap, HeatmapMode};
use ttpqd::solvers::{Algorithm, GridMode, KpOperator, SolverConfig, TspOperator};
use ttpqd::tsp_ops::InitConfig;

#[derive(Parser)]
#[command(
    name = "ttpqd",
    version,
    about = "MAP-Elites search for the Traveling Thief Problem"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the solver once and print the best solution.
    Solve {
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Run several seeded runs per instance and export maps, logs and summaries.
    Experiment {
        #[command(flatten)]
        solver: SolverArgs,
        /// Instance file; repeat for several instances.
        #[arg(long, required = true)]
        instance: Vec<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 10)]
        runs: usize,
        /// Concurrent runs (0 = one per core).
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        /// Leave wallclock figures out of the outputs so reruns are byte-identical.
        #[arg(long)]
        no_timing: bool,
        #[arg(long)]
        no_svg: bool,
    },
    /// Render quality and frequency heatmaps from saved map_<k>.json snapshots.
    Render {
        /// Directory holding the snapshots.
        #[arg(long)]
        maps_dir: PathBuf,
        /// Defaults to the snapshot directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long, default_value = "MAP-Elites archive")]
        title: String,
    },
    /// Check the exact solvers against brute-force enumeration.
    Oracle {
        #[arg(long, default_value_t = 200)]
        cases: usize,
        #[arg(long, env = "TTPQD_SEED", default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgorithmArg {
    MapElites,
    MuPlusOne,
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, default_value = "eax")]
    tsp_op: TspOperator,
    #[arg(long, default_value = "dp")]
    kp_op: KpOperator,
    #[arg(long, value_enum, default_value = "map-elites")]
    algorithm: AlgorithmArg,
    /// Offspring per run.
    #[arg(long, default_value_t = 10_000)]
    iters: u64,
    #[arg(long, env = "TTPQD_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    alpha1: Option<f64>,
    #[arg(long)]
    alpha2: Option<f64>,
    /// Use the 2% / 60% gaps for unbalanced instances.
    #[arg(long)]
    unbalanced: bool,
    #[arg(long, default_value_t = 20)]
    delta1: usize,
    #[arg(long, default_value_t = 20)]
    delta2: usize,
    #[arg(long, default_value = "prefixed")]
    grid_mode: GridMode,
    /// Reference tour length; otherwise the shortest initial tour.
    #[arg(long)]
    fstar: Option<f64>,
    /// Initial tours, one comma-separated 1-based permutation per line.
    #[arg(long)]
    tours_file: Option<PathBuf>,
    /// Wallclock seconds per run (0 = unlimited).
    #[arg(long, default_value_t = 3600.0)]
    time_limit: f64,
    #[arg(long, default_value_t = 50)]
    pop_size: usize,
    /// Generation budget of the initial tour GA.
    #[arg(long, default_value_t = 5000)]
    init_generations: usize,
    /// Mutation steps of the (1+1) EA packer.
    #[arg(long, default_value_t = 2000)]
    ea_iters: usize,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig {
        let mut cfg = SolverConfig {
            tsp_operator: self.tsp_op,
            kp_operator: self.kp_op,
            iterations: self.iters,
            time_limit_s: (self.time_limit > 0.0).then_some(self.time_limit),
            grid_mode: self.grid_mode,
            delta1: self.delta1,
            delta2: self.delta2,
            init: InitConfig {
                pop_size: self.pop_size,
                generations: self.init_generations,
                ..InitConfig::default()
            },
            ea_iterations: self.ea_iters,
            f_star: self.fstar,
            seed: self.seed,
            ..SolverConfig::default()
        };
        if self.unbalanced {
            cfg = cfg.unbalanced();
        }
        if let Some(a) = self.alpha1 {
            cfg.alpha1 = a;
        }
        if let Some(a) = self.alpha2 {
            cfg.alpha2 = a;
        }
        cfg
    }

    fn experiment(&self, instances: Vec<PathBuf>, out_dir: Option<PathBuf>) -> ExperimentSpec {
        ExperimentSpec {
            instances,
            solver: self.config(),
            algorithm: match self.algorithm {
                AlgorithmArg::MapElites => Algorithm::MapElites,
                AlgorithmArg::MuPlusOne => Algorithm::MuPlusOne,
            },
            runs: 1,
            out_dir,
            tours_file: self.tours_file.clone(),
            jobs: 0,
            exports: Exports::default(),
            record_timing: true,
        }
    }
}

fn print_summary(spec: &ExperimentSpec, report: &ExperimentReport) {
    for o in &report.instances {
        let s = &o.summary;
        println!(
            "{}  {}+{}  runs {}  avg z {:.2}  best z {:.2}  mean {:.1} s",
            o.label,
            spec.solver.tsp_operator,
            spec.solver.kp_operator,
            o.results.len(),
            s.avg_z,
            s.best_z,
            s.mean_elapsed_s
        );
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Solve {
            solver,
            instance,
            out_dir,
        } => {
            let spec = solver.experiment(vec![instance], out_dir);
            let report = run_experiment(&spec)?;
            let r = &report.instances[0].results[0];
            eprintln!(
                "f* {}  g* {}  iterations {}  occupied cells {}  {:?}",
                r.reference.f_star,
                r.reference.g_star,
                r.iterations,
                ttpqd::harness::final_map(r).occupied_count(),
                r.counts
            );
            eprintln!("best: f {} g {} z {}", r.best.f, r.best.g, r.best.z);
            print!("{}", r.best.to_exchange_string());
        }
        Command::Experiment {
            solver,
            instance,
            out_dir,
            runs,
            jobs,
            no_timing,
            no_svg,
        } => {
            let mut spec = solver.experiment(instance, Some(out_dir.clone()));
            spec.runs = runs;
            spec.jobs = jobs;
            spec.record_timing = !no_timing;
            if no_svg {
                spec.exports.quality_svg = false;
                spec.exports.frequency_svg = false;
            }
            let report = run_experiment(&spec)?;
            print_summary(&spec, &report);
            eprintln!("artifacts in {}", out_dir.display());
        }
        Command::Render {
            maps_dir,
            out_dir,
            title,
        } => {
            let snaps = read_snapshots(&maps_dir)?;
            if snaps.is_empty() {
                bail!("no map_<k>.json snapshots in {}", maps_dir.display());
            }
            let agg = AggregateMap::from_snapshots(&snaps)?;
            let out = out_dir.unwrap_or(maps_dir);
            std::fs::create_dir_all(&out).map_err(|e| anyhow!("{}: {e}", out.display()))?;
            for (mode, file) in [
                (HeatmapMode::Quality, "quality.svg"),
                (HeatmapMode::Frequency, "frequency.svg"),
            ] {
                let path = out.join(file);
                std::fs::write(&path, render_heatmap(&agg, mode, &title))
                    .map_err(|e| anyhow!("{}: {e}", path.display()))?;
            }
            eprintln!("rendered {} snapshots into {}", snaps.len(), out.display());
        }
        Command::Oracle { cases, seed } => {
            let mut ok = true;
            for r in run_checks(cases, seed) {
                let verdict = if r.passed() { "PASS" } else { "FAIL" };
                println!("{verdict} {} ({} cases)", r.name, r.cases);
                for m in &r.mismatches {
                    println!("    {m}");
                }
                ok &= r.passed();
            }
            return Ok(ok);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            // library errors already carry their causes in the message
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solver_args(extra: &[&str]) -> SolverArgs {
        let mut argv = vec!["ttpqd", "solve", "--instance", "x.ttp"];
        argv.extend_from_slice(extra);
        match Cli::try_parse_from(argv).unwrap().command {
            Command::Solve { solver, .. } => solver,
            _ => unreachable!(),
        }
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn defaults_match_the_solver_defaults() {
        let cfg = solver_args(&["--seed", "3"]).config();
        assert_eq!(cfg.tsp_operator, TspOperator::Eax);
        assert_eq!(cfg.kp_operator, KpOperator::Dp);
        assert_eq!(cfg.iterations, 10_000);
        assert_eq!((cfg.alpha1, cfg.alpha2), (0.05, 0.2));
        assert_eq!((cfg.delta1, cfg.delta2), (20, 20));
        assert_eq!(cfg.time_limit_s, Some(3600.0));
        assert_eq!(cfg.init.pop_size, 50);
        assert_eq!(cfg.seed, 3);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn flags_reach_the_config() {
        let cfg = solver_args(&[
            "--tsp-op",
            "2opt",
            "--kp-op",
            "ea",
            "--unbalanced",
            "--alpha2",
            "0.5",
            "--grid-mode",
            "relaxed",
            "--time-limit",
            "0",
            "--fstar",
            "426",
        ])
        .config();
        assert_eq!(cfg.tsp_operator, TspOperator::TwoOpt);
        assert_eq!(cfg.kp_operator, KpOperator::Ea);
        assert_eq!((cfg.alpha1, cfg.alpha2), (0.02, 0.5));
        assert_eq!(cfg.grid_mode, GridMode::Relaxed);
        assert_eq!(cfg.time_limit_s, None);
        assert_eq!(cfg.f_star, Some(426.0));
    }

    #[test]
    fn unknown_operators_are_refused() {
        let argv = ["ttpqd", "solve", "--instance", "x.ttp", "--tsp-op", "3opt"];
        assert!(Cli::try_parse_from(argv).is_err());
    }
}
