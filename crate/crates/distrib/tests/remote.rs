use std::io::BufReader;
use std::net::TcpListener;
use std::sync::Mutex;
use std::thread::JoinHandle;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use seapath_core::agents::unconstrained_plan;
use seapath_core::conflict::validate;
use seapath_core::highlevel::solve;
use seapath_core::lowlevel::{derive_constraints, low_level_search, ConstraintSet};
use seapath_core::planner::{BlockQuery, PlanQuery, Planner, PlannerError};
use seapath_core::roadnet::{EdgeRecord, NetworkFile};
use seapath_core::*;
use seapath_distrib::wire::{encode, read_message, write_message, Message};
use seapath_distrib::{serve, RemotePlanner};

fn worker(net: &RoadNetwork, agents: &[SEAgent]) -> (String, JoinHandle<()>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let address = listener.local_addr().unwrap().to_string();
    let (net, agents) = (net.clone(), agents.to_vec());
    let handle = std::thread::spawn(move || serve(listener, &net, &agents).unwrap());
    (address, handle)
}

fn workers(n: usize, net: &RoadNetwork, agents: &[SEAgent]) -> (Vec<String>, Vec<JoinHandle<()>>) {
    (0..n).map(|_| worker(net, agents)).unzip()
}

fn corridor(n: usize) -> RoadNetwork {
    let vertices = (1..=n).map(|i| format!("v{i}")).collect();
    let edges = (1..n)
        .map(|i| EdgeRecord {
            id: format!("e{i}"),
            a: format!("v{i}"),
            b: format!("v{}", i + 1),
            length: Distance::from_units(10),
            speed: Speed::from_units(5),
        })
        .collect();
    RoadNetwork::from_file(&NetworkFile { vertices, edges }).unwrap()
}

fn agent(id: u32, from: u32, to: u32) -> SEAgent {
    SEAgent {
        id: AgentId(id),
        length: Distance::from_units(5),
        initial: VertexId(from),
        destination: VertexId(to),
        speed: Speed::from_units(5),
    }
}

const ALGORITHMS: [Algorithm; 5] = [
    Algorithm::Greedy,
    Algorithm::Xcbs,
    Algorithm::XcbsA,
    Algorithm::XcbsAEff(Heuristic::DeeperFirst),
    Algorithm::XcbsLa,
];

/// Counts the queries an in-process run hands to its planner.
struct Counting<'a> {
    inner: LocalPlanner<'a>,
    log: Mutex<Vec<AgentId>>,
}

impl Planner for Counting<'_> {
    fn plan_batch(&self, queries: &[PlanQuery]) -> Result<Vec<Plan>, PlannerError> {
        self.log.lock().unwrap().extend(queries.iter().map(|q| q.agent));
        self.inner.plan_batch(queries)
    }

    fn solve_blocks(&self, queries: &[BlockQuery]) -> Result<Vec<Vec<Plan>>, PlannerError> {
        self.inner.solve_blocks(queries)
    }
}

fn assert_same(a: &SolveReport, b: &SolveReport) {
    assert_eq!(a.solution, b.solution, "{}", a.algorithm);
    assert_eq!(a.cost, b.cost, "{}", a.algorithm);
    assert_eq!(a.nodes_generated, b.nodes_generated, "{}", a.algorithm);
    assert_eq!(a.nodes_evaluated, b.nodes_evaluated, "{}", a.algorithm);
}

#[test]
fn one_agent_one_worker() {
    let net = build_grid(3, 3, Distance::from_units(10), Speed::from_units(5)).unwrap();
    let agents = [agent(1, 0, 8)];
    let (addrs, handles) = workers(1, &net, &agents);
    let remote = RemotePlanner::connect(&addrs, &agents, &net).unwrap();
    let q = PlanQuery {
        agent: AgentId(1),
        constraints: ConstraintSet::default(),
        seed: None,
        committed_to: vec![],
    };
    let plans = remote.plan_batch(&[q]).unwrap();
    assert_eq!(plans[0], unconstrained_plan(&agents[0], &net).unwrap().unwrap());
    assert_eq!(remote.stats().plan_requests, 1);
    remote.shutdown();
    for h in handles {
        h.join().unwrap();
    }
}

#[test]
fn remote_answer_matches_local_search() {
    let net = build_grid(4, 4, Distance::from_units(10), Speed::from_units(5)).unwrap();
    let agents = [agent(1, 0, 15), agent(2, 3, 12), agent(3, 12, 3)];
    let root: Vec<Plan> = agents.iter().map(|a| unconstrained_plan(a, &net).unwrap().unwrap()).collect();
    let constraints = derive_constraints(&agents[0], &[(&agents[1], &root[1]), (&agents[2], &root[2])], &net).unwrap();
    let local = low_level_search(&agents[0], &net, &constraints, None).unwrap();
    let (addrs, handles) = workers(2, &net, &agents);
    let remote = RemotePlanner::connect(&addrs, &agents, &net).unwrap();
    let got = remote
        .plan_batch(&[PlanQuery {
            agent: AgentId(1),
            constraints,
            seed: None,
            committed_to: vec![AgentId(2), AgentId(3)],
        }])
        .unwrap();
    assert_eq!(got[0], local);
    remote.shutdown();
    handles.into_iter().for_each(|h| h.join().unwrap());
}

#[test]
fn corridor_pair_matches_in_process() {
    // a 5-vertex corridor with a siding at v3 so both can get through
    let mut file = NetworkFile {
        vertices: (1..=6).map(|i| format!("v{i}")).collect(),
        edges: vec![],
    };
    for (id, a, b) in [("e1", 1, 2), ("e2", 2, 3), ("e3", 3, 4), ("e4", 4, 5), ("e5", 3, 6)] {
        file.edges.push(EdgeRecord {
            id: id.into(),
            a: format!("v{a}"),
            b: format!("v{b}"),
            length: Distance::from_units(10),
            speed: Speed::from_units(5),
        });
    }
    let net = RoadNetwork::from_file(&file).unwrap();
    let agents = [agent(1, 0, 4), agent(2, 4, 5)];
    let local = solve(Algorithm::XcbsA, &agents, &net, &LocalPlanner::new(&net, &agents), SolveOptions::default()).unwrap();
    let (addrs, handles) = workers(2, &net, &agents);
    let remote = RemotePlanner::connect(&addrs, &agents, &net).unwrap();
    let r = solve(Algorithm::XcbsA, &agents, &net, &remote, SolveOptions::default()).unwrap();
    assert_same(&local, &r);
    assert!(!validate(&r.solution, &agents, &net).unwrap().has_conflict);
    remote.shutdown();
    handles.into_iter().for_each(|h| h.join().unwrap());
}

#[test]
fn distributed_runs_are_identical() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let net = build_grid(5, 5, Distance::from_units(10), Speed::from_units(5)).unwrap();
    for _ in 0..6 {
        let n = rng.gen_range(2..=5);
        let mut ends: Vec<u32> = (0..25).collect();
        let agents: Vec<SEAgent> = (1..=n)
            .map(|i| {
                let a = ends.swap_remove(rng.gen_range(0..ends.len()));
                let b = ends.swap_remove(rng.gen_range(0..ends.len()));
                agent(i, a, b)
            })
            .collect();
        let (addrs, hs) = workers(2, &net, &agents);
        let remote = RemotePlanner::connect(&addrs, &agents, &net).unwrap();
        for algorithm in ALGORITHMS {
            let counting = Counting {
                inner: LocalPlanner::new(&net, &agents),
                log: Mutex::new(Vec::new()),
            };
            let before = remote.request_log().len();
            let local = solve(algorithm, &agents, &net, &counting, SolveOptions::default()).unwrap();
            let r = solve(algorithm, &agents, &net, &remote, SolveOptions::default()).unwrap();
            assert_same(&local, &r);
            assert_eq!(remote.request_log()[before..], counting.log.lock().unwrap()[..]);
        }
        remote.shutdown();
        hs.into_iter().for_each(|h| h.join().unwrap());
    }
}

#[test]
fn lost_worker_names_its_agent() {
    let net = corridor(4);
    let agents = [agent(1, 0, 3), agent(2, 3, 0)];
    // agent 1 goes to a real worker, agent 2 to one that dies on its first request
    let (good, good_handle) = worker(&net, &agents);
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let bad = listener.local_addr().unwrap().to_string();
    let dying = std::thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let mut out = stream.try_clone().unwrap();
        let mut input = BufReader::new(stream);
        loop {
            match read_message(&mut input).unwrap() {
                Message::Hello { agent } => write_message(&mut out, &Message::Hello { agent }).unwrap(),
                _ => return,
            }
        }
    });
    let remote = RemotePlanner::connect(&[good, bad], &agents, &net).unwrap();
    let err = solve(Algorithm::XcbsA, &agents, &net, &remote, SolveOptions::default()).unwrap_err();
    dying.join().unwrap();
    let text = err.to_string();
    assert!(text.contains(&AgentId(2).to_string()), "{text}");
    // the dead worker stays dead
    let again = remote.plan_batch(&[PlanQuery {
        agent: AgentId(2),
        constraints: ConstraintSet::default(),
        seed: None,
        committed_to: vec![],
    }]);
    assert!(again.is_err());
    remote.shutdown();
    good_handle.join().unwrap();
}

#[test]
fn worker_survives_garbage() {
    let net = corridor(3);
    let agents = [agent(1, 0, 2)];
    let (addr, handle) = worker(&net, &agents);
    let stream = std::net::TcpStream::connect(&addr).unwrap();
    let mut out = stream.try_clone().unwrap();
    let mut input = BufReader::new(stream);
    let junk = b"{not json";
    let mut frame = (junk.len() as u32).to_be_bytes().to_vec();
    frame.extend_from_slice(junk);
    std::io::Write::write_all(&mut out, &frame).unwrap();
    assert!(matches!(read_message(&mut input).unwrap(), Message::Error { request: None, .. }));
    // unknown agent and unknown location come back as errors too
    write_message(&mut out, &Message::Hello { agent: AgentId(9) }).unwrap();
    assert!(matches!(read_message(&mut input).unwrap(), Message::Error { .. }));
    write_message(
        &mut out,
        &Message::PlanRequest {
            request: 4,
            agent: AgentId(1),
            constraints: vec![seapath_core::agents::ConstraintRecord {
                loc: "nowhere".into(),
                start: Time::from_units(0),
                end: Time::from_units(1),
                owner: AgentId(2),
            }],
            committed_to: vec![],
            seed: None,
        },
    )
    .unwrap();
    assert!(matches!(read_message(&mut input).unwrap(), Message::Error { request: Some(4), .. }));
    // and the connection still answers
    write_message(
        &mut out,
        &Message::PlanRequest {
            request: 5,
            agent: AgentId(1),
            constraints: vec![],
            committed_to: vec![],
            seed: None,
        },
    )
    .unwrap();
    match read_message(&mut input).unwrap() {
        Message::PlanResponse { request, cost, .. } => {
            assert_eq!(request, 5);
            assert_eq!(cost, Time::from_units(4));
        }
        other => panic!("{other:?}"),
    }
    std::io::Write::write_all(&mut out, &encode(&Message::Shutdown)).unwrap();
    handle.join().unwrap();
}
