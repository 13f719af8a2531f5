use std::io::Write;

use seapath_core::agents::unconstrained_plan;
use seapath_core::conflict::validate;
use seapath_core::highlevel::solve;
use seapath_core::planner::Planner;
use seapath_core::*;
use serde::Serialize;

use crate::generate::{generate_scenario, GenSpec};
use crate::scenario::{Scenario, ScenarioError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    /// The solver returned a solution that failed re-validation.
    Invalid,
    Timeout,
    NodeLimit,
    Unsolved,
    GenFailed,
    Error,
}

/// One CSV line. Failed cells leave cost and node counts empty.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub algorithm: String,
    pub seed: u64,
    pub agents: usize,
    /// Non-singleton blocks of the root partition.
    pub blocks: usize,
    pub grid: String,
    pub density: f64,
    pub cost: Option<Time>,
    pub nodes_generated: Option<usize>,
    pub nodes_evaluated: Option<usize>,
    pub elapsed_ms: u128,
    pub status: Status,
}

pub const CSV_HEADER: [&str; 11] = [
    "algorithm",
    "seed",
    "agents",
    "blocks",
    "grid",
    "density",
    "cost",
    "nodes_generated",
    "nodes_evaluated",
    "elapsed_ms",
    "status",
];

pub fn write_csv(out: impl Write, rows: &[BenchRow]) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("{algorithm} returned a solution with conflicts among {agents:?}")]
    Invalid { algorithm: String, agents: Vec<Vec<AgentId>> },
    #[error("{algorithm} returned a malformed solution: {reason}")]
    Malformed { algorithm: String, reason: String },
    #[error("sweep values must be ascending")]
    Unsorted,
}

impl RunError {
    pub fn status(&self) -> Status {
        match self {
            RunError::Invalid { .. } | RunError::Malformed { .. } => Status::Invalid,
            RunError::Solve(SolveError::TimeLimit(_)) => Status::Timeout,
            RunError::Solve(SolveError::NodeLimit(_)) => Status::NodeLimit,
            RunError::Solve(SolveError::Exhausted | SolveError::Unreachable(_)) => Status::Unsolved,
            _ => Status::Error,
        }
    }
}

pub struct Outcome {
    pub row: BenchRow,
    pub report: SolveReport,
}

/// Non-singleton blocks among the agents' fastest plans.
pub fn root_blocks(agents: &[SEAgent], net: &RoadNetwork) -> Result<usize, SolveError> {
    let root = agents
        .iter()
        .map(|a| unconstrained_plan(a, net)?.ok_or(SolveError::Unreachable(a.id)))
        .collect::<Result<Vec<_>, SolveError>>()?;
    Ok(validate(&root, agents, net)?.partition.non_singleton_count())
}

fn row(scenario: &Scenario, algorithm: Algorithm, blocks: usize, status: Status) -> BenchRow {
    BenchRow {
        algorithm: algorithm.name().to_string(),
        seed: scenario.seed,
        agents: scenario.agents.len(),
        blocks,
        grid: scenario.grid(),
        density: scenario.meta.density,
        cost: None,
        nodes_generated: None,
        nodes_evaluated: None,
        elapsed_ms: 0,
        status,
    }
}

/// Solves with `planner`, then checks the answer independently of the
/// solver before calling it a success.
pub fn run_with(
    scenario: &Scenario,
    net: &RoadNetwork,
    agents: &[SEAgent],
    algorithm: Algorithm,
    planner: &dyn Planner,
    options: SolveOptions,
) -> Result<Outcome, RunError> {
    let blocks = root_blocks(agents, net)?;
    let report = solve(algorithm, agents, net, planner, options)?;
    let malformed = |reason: String| RunError::Malformed {
        algorithm: algorithm.name().to_string(),
        reason,
    };
    let ids: Vec<AgentId> = report.solution.iter().map(|p| p.agent).collect();
    if ids != agents.iter().map(|a| a.id).collect::<Vec<_>>() {
        return Err(malformed("plans do not match the agents".into()));
    }
    let v = validate(&report.solution, agents, net).map_err(|e| malformed(e.to_string()))?;
    if v.has_conflict {
        return Err(RunError::Invalid {
            algorithm: algorithm.name().to_string(),
            agents: v.partition.non_singleton().cloned().collect(),
        });
    }
    let total: Time = report.solution.iter().map(|p| p.cost).sum();
    if total != report.cost {
        return Err(malformed(format!("reported cost {} but plans sum to {total}", report.cost)));
    }
    let mut r = row(scenario, algorithm, blocks, Status::Ok);
    r.cost = Some(report.cost);
    r.nodes_generated = Some(report.nodes_generated);
    r.nodes_evaluated = Some(report.nodes_evaluated);
    r.elapsed_ms = report.elapsed.as_millis();
    Ok(Outcome { row: r, report })
}

pub fn run(scenario: &Scenario, algorithm: Algorithm, options: SolveOptions) -> Result<Outcome, RunError> {
    let (net, agents) = scenario.resolve()?;
    let planner = LocalPlanner::new(&net, &agents);
    run_with(scenario, &net, &agents, algorithm, &planner, options)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    Agents,
    /// Band centre in edges; the band is one edge either side.
    PathLength,
    /// Side of a square grid.
    GridSize,
    Density,
}

impl std::str::FromStr for Axis {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "agents" => Axis::Agents,
            "path-length" => Axis::PathLength,
            "grid-size" => Axis::GridSize,
            "density" => Axis::Density,
            _ => return Err(format!("unknown axis `{s}` (agents, path-length, grid-size, density)")),
        })
    }
}

#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub axis: Axis,
    pub values: Vec<f64>,
    pub algorithms: Vec<Algorithm>,
    pub seeds: Vec<u64>,
    /// Everything the axis does not set.
    pub base: GenSpec,
    pub options: SolveOptions,
}

/// Blocks of three, then whatever is left.
pub fn default_blocks(agents: usize) -> Vec<usize> {
    let mut out = vec![3; agents / 3];
    if agents % 3 > 0 {
        out.push(agents % 3);
    }
    out
}

impl SweepSpec {
    fn cell(&self, value: f64, seed: u64) -> GenSpec {
        let mut spec = self.base.clone();
        spec.seed = seed;
        match self.axis {
            Axis::Agents => spec.block_spec = default_blocks(value as usize),
            Axis::PathLength => {
                let edge = seapath_core::units::travel_time(spec.edge_length, spec.edge_speed.min(spec.agent_speed));
                let lo = ((value - 1.0).max(1.0) * edge.millis() as f64).round() as i64;
                let hi = ((value + 1.0) * edge.millis() as f64).round() as i64;
                spec.path_band = (Time::from_millis(lo), Time::from_millis(hi));
            }
            Axis::GridSize => {
                spec.rows = value as usize;
                spec.cols = value as usize;
                let fresh = GenSpec::new(spec.rows, spec.cols, spec.block_spec.clone(), seed);
                spec.path_band = fresh.path_band;
            }
            Axis::Density => spec.density = value,
        }
        spec
    }
}

/// One row per (value, seed, algorithm). Failed cells become failure rows.
pub fn sweep(spec: &SweepSpec) -> Result<Vec<BenchRow>, RunError> {
    if spec.values.windows(2).any(|w| w[0] > w[1]) {
        return Err(RunError::Unsorted);
    }
    let mut rows = Vec::new();
    for &value in &spec.values {
        for &seed in &spec.seeds {
            let g = spec.cell(value, seed);
            let scenario = match generate_scenario(&g) {
                Ok(s) => s,
                Err(_) => {
                    for &a in &spec.algorithms {
                        rows.push(BenchRow {
                            algorithm: a.name().to_string(),
                            seed,
                            agents: g.agent_count(),
                            blocks: 0,
                            grid: format!("{}x{}", g.rows, g.cols),
                            density: g.density,
                            cost: None,
                            nodes_generated: None,
                            nodes_evaluated: None,
                            elapsed_ms: 0,
                            status: Status::GenFailed,
                        });
                    }
                    continue;
                }
            };
            let (net, agents) = scenario.resolve()?;
            let blocks = root_blocks(&agents, &net)?;
            let planner = LocalPlanner::new(&net, &agents);
            for &a in &spec.algorithms {
                match run_with(&scenario, &net, &agents, a, &planner, spec.options.clone()) {
                    Ok(o) => rows.push(o.row),
                    Err(e) => rows.push(row(&scenario, a, blocks, e.status())),
                }
            }
        }
    }
    Ok(rows)
}
