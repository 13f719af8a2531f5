use std::io::Write;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::builder::PossibleValuesParser;
use clap::{Args, Parser, Subcommand};
use seapath_bench::generate::{generate_scenario, GenSpec};
use seapath_bench::run::{run_with, write_csv, Axis, Outcome, SweepSpec};
use seapath_bench::scenario::{load_solution, save_solution, Scenario};
use seapath_bench::sweep;
use seapath_core::conflict::validate;
use seapath_core::*;
use seapath_distrib::RemotePlanner;

#[derive(Parser)]
#[command(name = "seapath", version, about = "Path planning for agents with long bodies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a scenario with a given root block structure.
    Gen {
        #[command(flatten)]
        grid: GridArgs,
        /// Block sizes, e.g. 4,1.
        #[arg(long, value_delimiter = ',', required = true)]
        blocks: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory to write scenario-<seed>.json into; stdout if absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve a scenario in this process.
    Run {
        scenario: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run algorithms over generated scenarios along one axis.
    Sweep {
        /// agents, path-length, grid-size or density.
        #[arg(long)]
        axis: Axis,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = Algorithm::NAMES.map(String::from))]
        algos: Vec<String>,
        #[arg(long, default_value = "deeper")]
        heuristic: Heuristic,
        #[command(flatten)]
        grid: GridArgs,
        /// Block sizes for axes other than agents.
        #[arg(long, value_delimiter = ',', default_values_t = [3, 2])]
        blocks: Vec<usize>,
        /// First seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Seeds per axis value.
        #[arg(long, default_value_t = 1)]
        runs: u64,
        #[arg(long, default_value_t = 60.0)]
        time_limit: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a solution file against a scenario.
    Validate { scenario: PathBuf, solution: PathBuf },
    /// Answer search requests for the agents of a scenario.
    ServeWorker {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        listen: String,
    },
    /// Solve a scenario with the searches running on workers.
    ServeCoordinator {
        scenario: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        workers: Vec<String>,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Leave the workers running afterwards.
        #[arg(long)]
        keep_workers: bool,
    },
}

#[derive(Args)]
struct GridArgs {
    #[arg(long, default_value_t = 8)]
    rows: usize,
    #[arg(long, default_value_t = 8)]
    cols: usize,
    /// Edge deletion probability before connectivity repair.
    #[arg(long, default_value_t = 0.0)]
    density: f64,
    /// Shortest allowed unconstrained travel time.
    #[arg(long)]
    min_path: Option<Time>,
    /// Longest allowed unconstrained travel time.
    #[arg(long)]
    max_path: Option<Time>,
}

impl GridArgs {
    fn spec(&self, blocks: Vec<usize>, seed: u64) -> GenSpec {
        let mut spec = GenSpec::new(self.rows, self.cols, blocks, seed);
        spec.density = self.density;
        if let Some(t) = self.min_path {
            spec.path_band.0 = t;
        }
        if let Some(t) = self.max_path {
            spec.path_band.1 = t;
        }
        spec
    }
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, default_value = "xcbs-a", value_parser = PossibleValuesParser::new(Algorithm::NAMES))]
    algo: String,
    #[arg(long, default_value = "deeper")]
    heuristic: Heuristic,
    /// Seconds before the search gives up.
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long)]
    node_limit: Option<usize>,
}

impl SolverArgs {
    fn algorithm(&self) -> Result<Algorithm> {
        Algorithm::parse(&self.algo, self.heuristic).map_err(anyhow::Error::msg)
    }

    fn options(&self) -> SolveOptions {
        SolveOptions {
            trace: false,
            node_limit: self.node_limit,
            time_limit: self.time_limit.map(Duration::from_secs_f64),
        }
    }
}

fn load(path: &Path) -> Result<(Scenario, RoadNetwork, Vec<SEAgent>)> {
    let scenario = Scenario::load(path)?;
    let (net, agents) = scenario.resolve().with_context(|| format!("in {}", path.display()))?;
    Ok((scenario, net, agents))
}

fn report(outcome: &Outcome, net: &RoadNetwork, out: Option<&Path>) -> Result<()> {
    let row = &outcome.row;
    write_csv(std::io::stdout().lock(), std::slice::from_ref(row))?;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        let stem = format!("{}-{}", row.algorithm, row.seed);
        save_solution(&dir.join(format!("{stem}.json")), &outcome.report.solution, net)?;
        write_csv(std::fs::File::create(dir.join(format!("{stem}.csv")))?, std::slice::from_ref(row))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Gen { grid, blocks, seed, out } => {
            let scenario = generate_scenario(&grid.spec(blocks, seed))?;
            match out {
                Some(dir) => {
                    std::fs::create_dir_all(&dir)?;
                    let path = dir.join(format!("scenario-{seed}.json"));
                    scenario.save(&path)?;
                    println!("{}", path.display());
                }
                None => print!("{}", scenario.to_json()),
            }
        }
        Command::Run { scenario, solver, out } => {
            let (s, net, agents) = load(&scenario)?;
            let planner = LocalPlanner::new(&net, &agents);
            let outcome = run_with(&s, &net, &agents, solver.algorithm()?, &planner, solver.options())?;
            report(&outcome, &net, out.as_deref())?;
        }
        Command::Sweep {
            axis,
            values,
            algos,
            heuristic,
            grid,
            blocks,
            seed,
            runs,
            time_limit,
            out,
        } => {
            let algorithms = algos
                .iter()
                .map(|a| Algorithm::parse(a, heuristic))
                .collect::<Result<Vec<_>, _>>()
                .map_err(anyhow::Error::msg)?;
            let spec = SweepSpec {
                axis,
                values,
                algorithms,
                seeds: (seed..seed + runs).collect(),
                base: grid.spec(blocks, seed),
                options: SolveOptions {
                    time_limit: Some(Duration::from_secs_f64(time_limit)),
                    ..SolveOptions::default()
                },
            };
            let rows = sweep(&spec)?;
            match out {
                Some(dir) => {
                    std::fs::create_dir_all(&dir)?;
                    let path = dir.join("sweep.csv");
                    write_csv(std::fs::File::create(&path)?, &rows)?;
                    println!("{}", path.display());
                }
                None => write_csv(std::io::stdout().lock(), &rows)?,
            }
        }
        Command::Validate { scenario, solution } => {
            let (_, net, agents) = load(&scenario)?;
            let plans = load_solution(&solution, &net)?;
            if plans.iter().map(|p| p.agent).ne(agents.iter().map(|a| a.id)) {
                bail!("solution does not hold exactly one plan per agent");
            }
            let v = validate(&plans, &agents, &net)?;
            let cost: Time = plans.iter().map(|p| p.cost).sum();
            if v.has_conflict {
                for b in v.partition.non_singleton() {
                    let ids: Vec<String> = b.iter().map(|a| a.to_string()).collect();
                    println!("conflict {}", ids.join(" "));
                }
                bail!("solution has conflicts");
            }
            println!("ok cost {cost}");
        }
        Command::ServeWorker { scenario, listen } => {
            let (_, net, agents) = load(&scenario)?;
            let listener = TcpListener::bind(&listen).with_context(|| format!("binding {listen}"))?;
            println!("listening {}", listener.local_addr()?);
            std::io::stdout().flush()?;
            seapath_distrib::serve(listener, &net, &agents)?;
        }
        Command::ServeCoordinator {
            scenario,
            workers,
            solver,
            out,
            keep_workers,
        } => {
            let (s, net, agents) = load(&scenario)?;
            let planner = RemotePlanner::connect(&workers, &agents, &net)?;
            let outcome = run_with(&s, &net, &agents, solver.algorithm()?, &planner, solver.options());
            if !keep_workers {
                planner.shutdown();
            }
            report(&outcome?, &net, out.as_deref())?;
        }
    }
    Ok(())
}
