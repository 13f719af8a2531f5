#[path = "../../core/tests/support/oracle.rs"]
mod oracle;

use seapath_bench::generate::{generate_scenario, GenSpec};
use seapath_bench::run::{default_blocks, run, sweep, write_csv, Axis, BenchRow, RunError, Status, SweepSpec};
use seapath_bench::scenario::{load_solution, save_solution, Scenario};
use seapath_core::agents::unconstrained_plan;
use seapath_core::*;

fn scenario(rows: usize, blocks: Vec<usize>, seed: u64) -> Scenario {
    generate_scenario(&GenSpec::new(rows, rows, blocks, seed)).unwrap()
}

fn spec(axis: Axis, values: Vec<f64>, algorithms: Vec<Algorithm>, seeds: Vec<u64>) -> SweepSpec {
    SweepSpec {
        axis,
        values,
        algorithms,
        seeds,
        base: GenSpec::new(6, 6, vec![2, 1], 0),
        options: SolveOptions::default(),
    }
}

fn without_time(rows: &[BenchRow]) -> Vec<BenchRow> {
    rows.iter().map(|r| BenchRow { elapsed_ms: 0, ..r.clone() }).collect()
}

#[test]
fn greedy_on_conflict_free_scenario_is_free() {
    let s = scenario(6, vec![1, 1, 1, 1], 2);
    let (net, agents) = s.resolve().unwrap();
    let free: Time = agents.iter().map(|a| unconstrained_plan(a, &net).unwrap().unwrap().cost).sum();
    let o = run(&s, Algorithm::Greedy, SolveOptions::default()).unwrap();
    assert_eq!(o.row.cost, Some(free));
    assert_eq!(o.row.blocks, 0);
    assert_eq!(o.row.status, Status::Ok);
}

#[test]
fn xcbsa_on_four_and_one() {
    for seed in 0..5 {
        let s = scenario(5, vec![4, 1], seed);
        let o = run(&s, Algorithm::XcbsA, SolveOptions::default()).unwrap();
        assert_eq!(o.row.blocks, 1);
        assert!(o.row.nodes_evaluated < o.row.nodes_generated, "seed {seed}: {:?}", o.row);
    }
}

#[test]
fn la_matches_xcbs() {
    for seed in 0..5 {
        let s = scenario(6, vec![3, 2], seed);
        let la = run(&s, Algorithm::XcbsLa, SolveOptions::default()).unwrap();
        let x = run(&s, Algorithm::Xcbs, SolveOptions::default()).unwrap();
        assert_eq!(la.row.cost, x.row.cost, "seed {seed}");
    }
}

#[test]
fn solution_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario(6, vec![2, 2], 4);
    let path = dir.path().join("s.json");
    s.save(&path).unwrap();
    assert_eq!(Scenario::load(&path).unwrap(), s);
    let (net, _) = s.resolve().unwrap();
    let o = run(&s, Algorithm::XcbsAEff(Heuristic::DeeperFirst), SolveOptions::default()).unwrap();
    let sol = dir.path().join("sol.json");
    save_solution(&sol, &o.report.solution, &net).unwrap();
    assert_eq!(load_solution(&sol, &net).unwrap(), o.report.solution);
}

#[test]
fn single_cell_sweep() {
    let rows = sweep(&spec(Axis::Agents, vec![3.0], vec![Algorithm::XcbsA], vec![1])).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].agents, 3);
}

#[test]
fn agent_axis_orders_expansions() {
    let algorithms = vec![Algorithm::Xcbs, Algorithm::XcbsA];
    let rows = sweep(&spec(Axis::Agents, vec![5.0, 7.0, 9.0], algorithms, vec![1])).unwrap();
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r.status == Status::Ok), "{rows:?}");
    for pair in rows.chunks(2) {
        assert_eq!(pair[0].algorithm, "xcbs");
        assert!(pair[1].nodes_evaluated <= pair[0].nodes_evaluated, "{pair:?}");
    }
}

#[test]
fn sweeps_repeat_exactly() {
    let s = spec(Axis::Density, vec![0.0, 0.2], vec![Algorithm::Greedy, Algorithm::XcbsLa], vec![3, 4]);
    let a = sweep(&s).unwrap();
    let b = sweep(&s).unwrap();
    assert_eq!(a.len(), 8);
    assert_eq!(without_time(&a), without_time(&b));
}

#[test]
fn other_axes() {
    let grid = sweep(&spec(Axis::GridSize, vec![5.0, 7.0], vec![Algorithm::XcbsA], vec![0])).unwrap();
    assert_eq!(grid.iter().map(|r| r.grid.as_str()).collect::<Vec<_>>(), ["5x5", "7x7"]);
    let path = sweep(&spec(Axis::PathLength, vec![3.0, 5.0], vec![Algorithm::XcbsA], vec![0])).unwrap();
    assert!(path.iter().all(|r| r.status == Status::Ok));
    assert!(matches!(sweep(&spec(Axis::Density, vec![0.3, 0.1], vec![], vec![0])), Err(RunError::Unsorted)));
}

#[test]
fn failed_cells_become_rows() {
    let mut s = spec(Axis::GridSize, vec![2.0], vec![Algorithm::Xcbs, Algorithm::XcbsA], vec![0]);
    s.base.block_spec = vec![3];
    let rows = sweep(&s).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.status == Status::GenFailed && r.cost.is_none()));

    let mut s = spec(Axis::Agents, vec![6.0], vec![Algorithm::Xcbs], vec![0]);
    s.options.node_limit = Some(1);
    let rows = sweep(&s).unwrap();
    assert_eq!(rows[0].status, Status::NodeLimit);
}

#[test]
fn csv_layout() {
    let rows = sweep(&spec(Axis::Agents, vec![2.0], vec![Algorithm::XcbsA], vec![0])).unwrap();
    let mut out = Vec::new();
    write_csv(&mut out, &rows).unwrap();
    let text = String::from_utf8(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "algorithm,seed,agents,blocks,grid,density,cost,nodes_generated,nodes_evaluated,elapsed_ms,status");
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("xcbs-a,0,2,1,6x6,0.0,"), "{}", lines[1]);
    assert!(lines[1].ends_with(",ok"));
}

#[test]
fn block_defaults() {
    assert_eq!(default_blocks(5), vec![3, 2]);
    assert_eq!(default_blocks(7), vec![3, 3, 1]);
    assert_eq!(default_blocks(9), vec![3, 3, 3]);
}

#[test]
fn xcbs_detour_may_reuse_the_conflict_edge_later() {
    // head-on in a corridor; the optimum sends one agent round a loop that
    // rejoins the corridor after the other has left it
    let mut g = GenSpec::new(5, 5, vec![2], 20);
    g.density = 0.2;
    let s = generate_scenario(&g).unwrap();
    let (net, agents) = s.resolve().unwrap();
    let opt = oracle::joint_optimum(&agents, &net, 1_000_000).unwrap();
    assert_eq!(opt, Time::from_units(22));
    let x = run(&s, Algorithm::Xcbs, SolveOptions::default()).unwrap();
    let la = run(&s, Algorithm::XcbsLa, SolveOptions::default()).unwrap();
    assert_eq!(x.row.cost, Some(opt));
    assert_eq!(la.row.cost, Some(opt));
}
