//! Temporal occupancy graphs and the partition of agents into blocks of
//! mutually conflicting agents.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use crate::agents::{AgentId, OccupancyRecord, Plan, PlanError, SEAgent, Timeline};
use crate::roadnet::{Location, RoadNetwork};
use crate::units::Interval;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AgentDetail {
    pub agent: AgentId,
    pub intervals: Vec<Interval>,
}

/// Who uses one location during one covering window.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TONode {
    pub location: Location,
    pub tau: Interval,
    /// Sorted by agent id.
    pub agent_details: Vec<AgentDetail>,
}

impl TONode {
    pub fn agents(&self) -> impl Iterator<Item = AgentId> + '_ {
        self.agent_details.iter().map(|d| d.agent)
    }

    fn add(&mut self, agent: AgentId, interval: Interval) {
        self.tau = self.tau.covering(&interval);
        match self.agent_details.binary_search_by_key(&agent, |d| d.agent) {
            Ok(i) => self.agent_details[i].intervals.push(interval),
            Err(i) => self.agent_details.insert(
                i,
                AgentDetail {
                    agent,
                    intervals: vec![interval],
                },
            ),
        }
    }

    fn absorb(&mut self, other: TONode) {
        for d in other.agent_details {
            for iv in d.intervals {
                self.add(d.agent, iv);
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct TOEdge {
    pub from: usize,
    pub to: usize,
    pub agent: AgentId,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TOGraph {
    pub nodes: Vec<TONode>,
    pub edges: Vec<TOEdge>,
}

impl TOGraph {
    pub fn degree(&self, node: usize) -> usize {
        self.edges.iter().filter(|e| e.from == node || e.to == node).count()
    }

    pub fn nodes_at(&self, location: Location) -> impl Iterator<Item = (usize, &TONode)> {
        self.nodes.iter().enumerate().filter(move |(_, n)| n.location == location)
    }

    /// Line-oriented dump: one `node` line per t.o. node, then one `edge`
    /// line per link.
    pub fn export(&self, net: &RoadNetwork) -> String {
        let mut out = String::new();
        for (i, n) in self.nodes.iter().enumerate() {
            let _ = write!(out, "node {i} {} {}", net.location_name(n.location), n.tau);
            for d in &n.agent_details {
                let ivs: Vec<String> = d.intervals.iter().map(|iv| iv.to_string()).collect();
                let _ = write!(out, " {}:{}", d.agent.0, ivs.join(""));
            }
            out.push('\n');
        }
        for e in &self.edges {
            let _ = writeln!(out, "edge {} {} {}", e.from, e.to, e.agent.0);
        }
        out
    }
}

/// Footprints of a whole solution, in agent-id order.
pub fn solution_footprints(
    solution: &[Plan],
    agents: &[SEAgent],
    net: &RoadNetwork,
) -> Result<Vec<Vec<OccupancyRecord>>, PlanError> {
    let by_id: HashMap<AgentId, &SEAgent> = agents.iter().map(|a| (a.id, a)).collect();
    let mut plans: Vec<&Plan> = solution.iter().collect();
    plans.sort_by_key(|p| p.agent);
    plans
        .into_iter()
        .map(|p| {
            let agent = by_id.get(&p.agent).ok_or(PlanError::WrongAgent {
                expected: p.agent,
                found: p.agent,
            })?;
            Ok(Timeline::from_plan(p, agent, net)?.occupancy(agent))
        })
        .collect()
}

pub fn build_to_graph(solution: &[Plan], agents: &[SEAgent], net: &RoadNetwork) -> Result<TOGraph, PlanError> {
    Ok(to_graph_from_footprints(&solution_footprints(solution, agents, net)?))
}

/// Builds the graph from per-agent footprints already in plan order.
pub fn to_graph_from_footprints(footprints: &[Vec<OccupancyRecord>]) -> TOGraph {
    let mut slots: Vec<Option<TONode>> = Vec::new();
    let mut redirect: Vec<usize> = Vec::new();
    let mut live: HashMap<Location, Vec<usize>> = HashMap::new();
    let mut raw_edges = Vec::new();

    fn resolve(redirect: &mut [usize], mut i: usize) -> usize {
        while redirect[i] != i {
            redirect[i] = redirect[redirect[i]];
            i = redirect[i];
        }
        i
    }

    for records in footprints {
        let mut prev: Option<usize> = None;
        for r in records {
            let here = live.entry(r.location).or_default();
            let target = here
                .iter()
                .copied()
                .find(|&i| slots[i].as_ref().unwrap().tau.intersects(&r.interval));
            let idx = match target {
                Some(i) => {
                    slots[i].as_mut().unwrap().add(r.agent, r.interval);
                    // Widening tau can reach further nodes for this location.
                    loop {
                        let tau = slots[i].as_ref().unwrap().tau;
                        let Some(pos) = here
                            .iter()
                            .position(|&j| j != i && slots[j].as_ref().unwrap().tau.intersects(&tau))
                        else {
                            break;
                        };
                        let j = here.remove(pos);
                        let other = slots[j].take().unwrap();
                        slots[i].as_mut().unwrap().absorb(other);
                        redirect[j] = i;
                    }
                    i
                }
                None => {
                    let i = slots.len();
                    slots.push(Some(TONode {
                        location: r.location,
                        tau: r.interval,
                        agent_details: vec![AgentDetail {
                            agent: r.agent,
                            intervals: vec![r.interval],
                        }],
                    }));
                    redirect.push(i);
                    here.push(i);
                    i
                }
            };
            if let Some(p) = prev {
                raw_edges.push((p, idx, r.agent));
            }
            prev = Some(idx);
        }
    }

    let mut compact = vec![usize::MAX; slots.len()];
    let mut nodes = Vec::new();
    for (i, slot) in slots.into_iter().enumerate() {
        if let Some(n) = slot {
            compact[i] = nodes.len();
            nodes.push(n);
        }
    }
    let edges = raw_edges
        .into_iter()
        .map(|(a, b, agent)| TOEdge {
            from: compact[resolve(&mut redirect, a)],
            to: compact[resolve(&mut redirect, b)],
            agent,
        })
        .collect();
    TOGraph { nodes, edges }
}

/// Agents grouped into blocks; blocks and members sorted by agent id.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Partition {
    pub blocks: Vec<Vec<AgentId>>,
}

impl Partition {
    pub fn non_singleton(&self) -> impl Iterator<Item = &Vec<AgentId>> {
        self.blocks.iter().filter(|b| b.len() > 1)
    }

    pub fn non_singleton_count(&self) -> usize {
        self.non_singleton().count()
    }

    pub fn singleton_count(&self) -> usize {
        self.blocks.iter().filter(|b| b.len() == 1).count()
    }

    pub fn largest_block(&self) -> usize {
        self.blocks.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Mean size of the non-singleton blocks, as (sum, count).
    pub fn non_singleton_mean(&self) -> (usize, usize) {
        self.non_singleton().fold((0, 0), |(s, c), b| (s + b.len(), c + 1))
    }

    pub fn block_of(&self, agent: AgentId) -> Option<&Vec<AgentId>> {
        self.blocks.iter().find(|b| b.contains(&agent))
    }

    /// Groups arbitrary agent sets into a normalized partition.
    pub fn from_groups(mut blocks: Vec<Vec<AgentId>>) -> Self {
        for b in &mut blocks {
            b.sort();
        }
        blocks.sort();
        Partition { blocks }
    }
}

struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}

/// Partition plus the bookkeeping used to check the detector's cost bound.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartitionStats {
    pub partition: Partition,
    /// Nodes holding two or more agents.
    pub multi_agent_nodes: usize,
    /// Pairwise interval tests performed.
    pub relates_tests: usize,
}

pub fn partition_agents(g: &TOGraph, all_agents: &[AgentId]) -> PartitionStats {
    let mut ids: Vec<AgentId> = all_agents.to_vec();
    ids.sort();
    ids.dedup();
    let index: HashMap<AgentId, usize> = ids.iter().enumerate().map(|(i, a)| (*a, i)).collect();
    let mut sets = DisjointSet::new(ids.len());
    let mut multi_agent_nodes = 0;
    let mut relates_tests = 0;
    for node in &g.nodes {
        if node.agent_details.len() < 2 {
            continue;
        }
        multi_agent_nodes += 1;
        for (i, a) in node.agent_details.iter().enumerate() {
            for b in &node.agent_details[i + 1..] {
                relates_tests += 1;
                let relates = a
                    .intervals
                    .iter()
                    .any(|x| b.intervals.iter().any(|y| x.intersects(y)));
                if relates {
                    sets.union(index[&a.agent], index[&b.agent]);
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<AgentId>> = BTreeMap::new();
    for (i, a) in ids.iter().enumerate() {
        groups.entry(sets.find(i)).or_default().push(*a);
    }
    PartitionStats {
        partition: Partition::from_groups(groups.into_values().collect()),
        multi_agent_nodes,
        relates_tests,
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Validation {
    pub partition: Partition,
    pub has_conflict: bool,
}

pub fn validate(solution: &[Plan], agents: &[SEAgent], net: &RoadNetwork) -> Result<Validation, PlanError> {
    let g = build_to_graph(solution, agents, net)?;
    let ids: Vec<AgentId> = agents.iter().map(|a| a.id).collect();
    Ok(validation_of(&g, &ids))
}

pub fn validation_of(g: &TOGraph, ids: &[AgentId]) -> Validation {
    let partition = partition_agents(g, ids).partition;
    let has_conflict = partition.non_singleton_count() >= 1;
    Validation { partition, has_conflict }
}
