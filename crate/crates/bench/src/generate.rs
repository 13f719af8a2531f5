//! Random scenarios whose root partition has a chosen block structure.
//!
//! Agents are placed one at a time on their fastest routes. The first member
//! of a block must not touch anyone placed so far; each further member is
//! aimed at an interior vertex of an earlier member's route, timed to arrive
//! about when that member does, and kept only if it conflicts with its own
//! block and nobody else. Every attempt draws from its own ChaCha stream of
//! the seed, so a retry never depends on how far the previous one got.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use seapath_core::agents::{occupancy, unconstrained_plan, AgentRecord, Itinerary, OccupancyRecord};
use seapath_core::conflict::{validate, Partition};
use seapath_core::roadnet::{EdgeRecord, NetworkFile};
use seapath_core::*;

use crate::scenario::{Scenario, ScenarioMeta};

pub const MAX_ATTEMPTS: u64 = 64;
const TRIES_PER_AGENT: usize = 400;

#[derive(Clone, Debug, PartialEq)]
pub struct GenSpec {
    pub rows: usize,
    pub cols: usize,
    pub block_spec: Vec<usize>,
    /// Allowed unconstrained travel time of every agent, inclusive.
    pub path_band: (Time, Time),
    /// Probability of deleting each grid edge before connectivity repair.
    pub density: f64,
    pub body_lengths: Vec<Distance>,
    pub edge_length: Distance,
    pub edge_speed: Speed,
    pub agent_speed: Speed,
    pub seed: u64,
}

impl GenSpec {
    /// Unit-free defaults: edges 10 long at speed 5, agents at speed 5 with
    /// bodies of half or one edge, any route of at least two edges.
    pub fn new(rows: usize, cols: usize, block_spec: Vec<usize>, seed: u64) -> Self {
        let edge = Time::from_units(2).millis();
        let longest = (rows + cols).saturating_sub(2).max(2) as i64;
        GenSpec {
            rows,
            cols,
            block_spec,
            path_band: (Time::from_millis(2 * edge), Time::from_millis(longest * edge)),
            density: 0.0,
            body_lengths: vec![Distance::from_units(5), Distance::from_units(10)],
            edge_length: Distance::from_units(10),
            edge_speed: Speed::from_units(5),
            agent_speed: Speed::from_units(5),
            seed,
        }
    }

    pub fn agent_count(&self) -> usize {
        self.block_spec.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GenError {
    #[error("block spec is empty or has a zero-size block")]
    BadBlocks,
    #[error("a {rows}x{cols} grid cannot hold {agents} agents with distinct endpoints")]
    GridTooSmall { rows: usize, cols: usize, agents: usize },
    #[error("path band [{0}, {1}] is empty")]
    BadBand(Time, Time),
    #[error("density {0} is outside [0, 1)")]
    BadDensity(f64),
    #[error("no placement found in {attempts} attempts on a {rows}x{cols} grid; try a larger grid")]
    Exhausted { attempts: u64, rows: usize, cols: usize },
    #[error(transparent)]
    Network(#[from] seapath_core::roadnet::NetworkError),
}

struct Placed {
    agent: SEAgent,
    block: usize,
    itinerary: Itinerary,
    arrive: Vec<Time>,
    footprint: Vec<OccupancyRecord>,
}

fn overlaps(a: &[OccupancyRecord], b: &[OccupancyRecord]) -> bool {
    a.iter()
        .any(|x| b.iter().any(|y| x.location == y.location && x.interval.intersects(&y.interval)))
}

/// Grid with edges deleted at random, then re-added in random order
/// wherever one joins two components, until connected.
fn thinned_grid(spec: &GenSpec, rng: &mut ChaCha8Rng) -> Result<RoadNetwork, GenError> {
    let full = build_grid(spec.rows, spec.cols, spec.edge_length, spec.edge_speed)?.to_file();
    let mut keep = Vec::new();
    let mut dropped = Vec::new();
    for i in 0..full.edges.len() {
        if rng.gen_bool(spec.density) {
            dropped.push(i);
        } else {
            keep.push(i);
        }
    }
    let index = |name: &str| full.vertices.iter().position(|v| v == name).unwrap();
    let mut parent: Vec<usize> = (0..full.vertices.len()).collect();
    fn root(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let join = |parent: &mut Vec<usize>, e: &EdgeRecord| {
        let (a, b) = (root(parent, index(&e.a)), root(parent, index(&e.b)));
        parent[a] = b;
        a != b
    };
    for &i in &keep {
        join(&mut parent, &full.edges[i]);
    }
    dropped.shuffle(rng);
    for i in dropped {
        if join(&mut parent, &full.edges[i]) {
            keep.push(i);
        }
    }
    keep.sort();
    let file = NetworkFile {
        vertices: full.vertices.clone(),
        edges: keep.into_iter().map(|i| full.edges[i].clone()).collect(),
    };
    Ok(RoadNetwork::from_file(&file)?)
}

fn hops_from(net: &RoadNetwork, from: VertexId) -> Vec<usize> {
    let mut d = vec![usize::MAX; net.vertex_count()];
    d[from.index()] = 0;
    let mut queue = VecDeque::from([from]);
    while let Some(v) = queue.pop_front() {
        for &(_, w) in net.neighbours(v) {
            if d[w.index()] == usize::MAX {
                d[w.index()] = d[v.index()] + 1;
                queue.push_back(w);
            }
        }
    }
    d
}

struct Attempt<'a> {
    spec: &'a GenSpec,
    net: RoadNetwork,
    hops: Vec<Vec<usize>>,
    placed: Vec<Placed>,
}

impl Attempt<'_> {
    fn used(&self, v: VertexId) -> bool {
        self.placed.iter().any(|p| p.agent.initial == v || p.agent.destination == v)
    }

    fn candidate(&self, id: u32, from: VertexId, to: VertexId, body: Distance, block: usize) -> Option<Placed> {
        if from == to || self.used(from) || self.used(to) {
            return None;
        }
        let agent = SEAgent {
            id: AgentId(id),
            length: body,
            initial: from,
            destination: to,
            speed: self.spec.agent_speed,
        };
        let plan = unconstrained_plan(&agent, &self.net).ok()??;
        let (lo, hi) = self.spec.path_band;
        if plan.cost < lo || plan.cost > hi {
            return None;
        }
        let itinerary = Itinerary::from_plan(&plan, &agent, &self.net).ok()?;
        let arrive = itinerary.timeline(&agent, &self.net).arrive;
        let footprint = occupancy(&plan, &agent, &self.net).ok()?;
        Some(Placed {
            agent,
            block,
            itinerary,
            arrive,
            footprint,
        })
    }

    /// Whether `c` touches exactly the agents it should.
    fn fits(&self, c: &Placed, first_of_block: bool) -> bool {
        let mut hits_own = false;
        for p in &self.placed {
            if overlaps(&p.footprint, &c.footprint) {
                if p.block != c.block {
                    return false;
                }
                hits_own = true;
            }
        }
        first_of_block || hits_own
    }

    fn draw(&self, rng: &mut ChaCha8Rng, id: u32, block: usize, first: bool) -> Option<Placed> {
        let n = self.net.vertex_count() as u32;
        let body = *self.spec.body_lengths.choose(rng).unwrap();
        if first {
            let (a, b) = (VertexId(rng.gen_range(0..n)), VertexId(rng.gen_range(0..n)));
            return self.candidate(id, a, b, body, block);
        }
        // aim at an interior vertex of a block mate's route
        let mates: Vec<&Placed> = self.placed.iter().filter(|p| p.block == block).collect();
        let mate = mates.choose(rng).unwrap();
        let interior = mate.itinerary.vertices.len().checked_sub(2).filter(|k| *k > 0)?;
        let k = rng.gen_range(1..=interior);
        let m = mate.itinerary.vertices[k];
        let edge_time = mate.arrive[k] - mate.arrive[k - 1];
        let want = (mate.arrive[k].millis() / edge_time.millis().max(1)) as usize;
        let from_m = &self.hops[m.index()];
        let starts: Vec<u32> = (0..n)
            .filter(|v| from_m[*v as usize].abs_diff(want) <= 1 && from_m[*v as usize] > 0)
            .collect();
        let from = VertexId(*starts.choose(rng)?);
        let through: Vec<u32> = (0..n)
            .filter(|v| {
                let (sm, mt) = (self.hops[from.index()][m.index()], from_m[*v as usize]);
                mt > 0 && self.hops[from.index()][*v as usize] == sm + mt
            })
            .collect();
        let to = VertexId(*through.choose(rng)?);
        self.candidate(id, from, to, body, block)
    }
}

fn attempt(spec: &GenSpec, rng: &mut ChaCha8Rng) -> Result<Option<Scenario>, GenError> {
    let net = thinned_grid(spec, rng)?;
    let hops = net.vertices().map(|v| hops_from(&net, v)).collect();
    let mut at = Attempt {
        spec,
        net,
        hops,
        placed: Vec::new(),
    };
    let mut groups = Vec::new();
    let mut id = 1u32;
    for (block, &size) in spec.block_spec.iter().enumerate() {
        let mut group = Vec::new();
        for j in 0..size {
            let found = (0..TRIES_PER_AGENT).find_map(|_| {
                at.draw(rng, id, block, j == 0)
                    .filter(|c| at.fits(c, j == 0))
            });
            let Some(p) = found else {
                return Ok(None);
            };
            group.push(p.agent.id);
            at.placed.push(p);
            id += 1;
        }
        groups.push(group);
    }
    // independent check of the structure on the full root solution
    let agents: Vec<SEAgent> = at.placed.iter().map(|p| p.agent.clone()).collect();
    let root: Vec<Plan> = agents
        .iter()
        .map(|a| unconstrained_plan(a, &at.net).map(|p| p.expect("placed agents have routes")))
        .collect::<Result<_, _>>()?;
    let v = validate(&root, &agents, &at.net).expect("unconstrained plans are well formed");
    if v.partition != Partition::from_groups(groups) {
        return Ok(None);
    }
    Ok(Some(Scenario {
        seed: spec.seed,
        meta: ScenarioMeta {
            rows: spec.rows,
            cols: spec.cols,
            density: spec.density,
            block_spec: spec.block_spec.clone(),
            path_band: spec.path_band,
        },
        network: at.net.to_file(),
        agents: agents.iter().map(|a| AgentRecord::from_agent(a, &at.net)).collect(),
    }))
}

/// Deterministic in `spec`: the same spec always yields the same scenario.
pub fn generate_scenario(spec: &GenSpec) -> Result<Scenario, GenError> {
    if spec.block_spec.is_empty() || spec.block_spec.contains(&0) {
        return Err(GenError::BadBlocks);
    }
    if spec.rows * spec.cols < 2 * spec.agent_count() {
        return Err(GenError::GridTooSmall {
            rows: spec.rows,
            cols: spec.cols,
            agents: spec.agent_count(),
        });
    }
    if spec.path_band.0 > spec.path_band.1 {
        return Err(GenError::BadBand(spec.path_band.0, spec.path_band.1));
    }
    if !(0.0..1.0).contains(&spec.density) {
        return Err(GenError::BadDensity(spec.density));
    }
    for n in 0..MAX_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(n);
        if let Some(s) = attempt(spec, &mut rng)? {
            return Ok(s);
        }
    }
    Err(GenError::Exhausted {
        attempts: MAX_ATTEMPTS,
        rows: spec.rows,
        cols: spec.cols,
    })
}
