//! Constraint-tree searches over joint solutions.
//!
//! All searches keep one plan per agent, indexed like the agent list sorted
//! by id. Costs are sums of arrival times.

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;
use std::time::{Duration, Instant};

use crate::agents::{unconstrained_plan, AgentId, Plan, PlanError, SEAgent};
use crate::conflict::{validation_of, to_graph_from_footprints, solution_footprints, Partition, Validation};
use crate::planner::PlannerError;
use crate::roadnet::{NetworkError, RoadNetwork};
use crate::units::Time;

mod greedy;
mod la;
mod xcbs;
mod xcbsa;

pub use greedy::solve_greedy;
pub use la::{merge_committed_blocks, solve_xcbsla};
pub use xcbs::{block_level_search, solve_xcbs, BLOCK_NODE_LIMIT};
pub use xcbsa::{resolve_conflict_xcbsa, solve_xcbsa, solve_xcbsa_eff, PotentialEntry};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum Heuristic {
    #[default]
    DeeperFirst,
    LargestBlockFirst,
    MostSingletonsFirst,
}

impl Heuristic {
    pub const ALL: [Heuristic; 3] = [
        Heuristic::DeeperFirst,
        Heuristic::LargestBlockFirst,
        Heuristic::MostSingletonsFirst,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Heuristic::DeeperFirst => "deeper",
            Heuristic::LargestBlockFirst => "largest-block",
            Heuristic::MostSingletonsFirst => "most-singletons",
        }
    }
}

impl FromStr for Heuristic {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Heuristic::ALL
            .into_iter()
            .find(|h| h.name() == s)
            .ok_or_else(|| format!("unknown heuristic `{s}`"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Greedy,
    Xcbs,
    XcbsA,
    XcbsAEff(Heuristic),
    XcbsLa,
}

impl Algorithm {
    pub const NAMES: [&'static str; 5] = ["greedy", "xcbs", "xcbs-a", "xcbs-a-eff", "xcbs-la"];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Greedy => "greedy",
            Algorithm::Xcbs => "xcbs",
            Algorithm::XcbsA => "xcbs-a",
            Algorithm::XcbsAEff(_) => "xcbs-a-eff",
            Algorithm::XcbsLa => "xcbs-la",
        }
    }

    pub fn parse(name: &str, heuristic: Heuristic) -> Result<Self, String> {
        Ok(match name {
            "greedy" => Algorithm::Greedy,
            "xcbs" => Algorithm::Xcbs,
            "xcbs-a" => Algorithm::XcbsA,
            "xcbs-a-eff" => Algorithm::XcbsAEff(heuristic),
            "xcbs-la" => Algorithm::XcbsLa,
            _ => return Err(format!("unknown algorithm `{name}`")),
        })
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, Default)]
pub struct SolveOptions {
    /// Record the explored tree for property checks.
    pub trace: bool,
    pub node_limit: Option<usize>,
    pub time_limit: Option<Duration>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SolveError {
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("destination of {0} is unreachable")]
    Unreachable(AgentId),
    #[error("duplicate agent id {0}")]
    DuplicateAgent(AgentId),
    #[error("search generated more than {0} nodes")]
    NodeLimit(usize),
    #[error("search exceeded {0:?}")]
    TimeLimit(Duration),
    #[error("search space exhausted without a valid solution")]
    Exhausted,
    #[error("regenerated child of node {parent} has cost {found}, expected {expected}")]
    Regeneration { parent: usize, expected: Time, found: Time },
}

/// Ordered pair (a, b): a's plan respects b's.
pub type Commitment = (AgentId, AgentId);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CTNode {
    pub id: usize,
    pub solution: Vec<Plan>,
    pub cost: Time,
    pub parent: Option<usize>,
    pub depth: usize,
    pub partition: Option<Partition>,
    pub commitments: BTreeSet<Commitment>,
}

impl CTNode {
    fn root(solution: Vec<Plan>) -> Self {
        let cost = solution.iter().map(|p| p.cost).sum();
        CTNode {
            id: 1,
            solution,
            cost,
            parent: None,
            depth: 0,
            partition: None,
            commitments: BTreeSet::new(),
        }
    }

    fn key(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.solution.hash(&mut h);
        self.commitments.hash(&mut h);
        h.finish()
    }
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub algorithm: String,
    /// Sorted by agent id.
    pub solution: Vec<Plan>,
    pub cost: Time,
    pub nodes_generated: usize,
    pub nodes_evaluated: usize,
    pub elapsed: Duration,
    /// Non-singleton blocks in the root partition.
    pub root_blocks: usize,
    /// Low-level and block searches handed to the planner.
    pub plan_requests: usize,
    pub trace: Option<SearchTrace>,
}

impl SolveReport {
    pub const CSV_HEADER: [&'static str; 8] = [
        "algorithm",
        "seed",
        "agents",
        "blocks",
        "cost",
        "nodes_generated",
        "nodes_evaluated",
        "elapsed_ms",
    ];

    pub fn csv_record(&self, seed: u64) -> [String; 8] {
        [
            self.algorithm.clone(),
            seed.to_string(),
            self.solution.len().to_string(),
            self.root_blocks.to_string(),
            self.cost.to_string(),
            self.nodes_generated.to_string(),
            self.nodes_evaluated.to_string(),
            self.elapsed.as_millis().to_string(),
        ]
    }

    /// Everything but wall time, for comparing runs.
    pub fn outcome(&self) -> (Vec<Plan>, Time, usize, usize) {
        (self.solution.clone(), self.cost, self.nodes_generated, self.nodes_evaluated)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceNode {
    pub id: usize,
    pub parent: Option<usize>,
    pub depth: usize,
    pub cost: Time,
    /// Set once the node is evaluated.
    pub partition: Option<Partition>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExpansionKind {
    /// One revised agent per block.
    Product,
    /// Two conflicting agents; whether each re-route child survived.
    Pair { repath_a: bool, repath_b: bool },
    /// One agent against an outside constraint.
    Outside { repath: bool },
    /// Nonempty subsets of blocks adopting joint solutions.
    Subsets,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExpansionRecord {
    pub node: usize,
    pub kind: ExpansionKind,
    pub block_sizes: Vec<usize>,
    pub children: usize,
    /// Costs of every child, deferred ones included.
    pub child_costs: Vec<Time>,
    pub parent_cost: Time,
}

impl ExpansionRecord {
    /// Child count matches the kind: the product of block sizes, two plus
    /// one per feasible repath, or one per nonempty subset of blocks.
    pub fn obeys_child_law(&self) -> bool {
        let expected = match self.kind {
            ExpansionKind::Product => self.block_sizes.iter().product::<usize>(),
            ExpansionKind::Pair { repath_a, repath_b } => 2 + repath_a as usize + repath_b as usize,
            ExpansionKind::Outside { repath } => 1 + repath as usize,
            ExpansionKind::Subsets => (1usize << self.block_sizes.len()) - 1,
        };
        self.children == expected && self.child_costs.len() == self.children
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SearchTrace {
    /// Indexed by node id - 1.
    pub nodes: Vec<TraceNode>,
    pub expansions: Vec<ExpansionRecord>,
    /// Committed pairs found in conflict on an evaluated node.
    pub commitment_violations: usize,
    /// Children parked in the Potential Set, and how many came back.
    pub deferred: usize,
    pub materialized: usize,
}

impl SearchTrace {
    fn node(&self, id: usize) -> &TraceNode {
        &self.nodes[id - 1]
    }

    /// Explored parent/child pairs: both ends evaluated.
    pub fn explored_edges(&self) -> impl Iterator<Item = (&TraceNode, &TraceNode)> {
        self.nodes.iter().filter_map(move |c| {
            let p = self.node(c.parent?);
            (p.partition.is_some() && c.partition.is_some()).then_some((p, c))
        })
    }

    /// Children cheaper than their parent.
    pub fn cost_decreases(&self) -> usize {
        self.expansions
            .iter()
            .map(|e| e.child_costs.iter().filter(|c| **c < e.parent_cost).count())
            .sum()
    }

    /// Explored edges along which the singleton count drops.
    pub fn singleton_decreases(&self) -> usize {
        self.explored_edges()
            .filter(|(p, c)| {
                let (p, c) = (p.partition.as_ref().unwrap(), c.partition.as_ref().unwrap());
                c.singleton_count() < p.singleton_count()
            })
            .count()
    }

    /// Explored edges along which the mean non-singleton block size grows.
    /// A partition without non-singleton blocks counts as mean zero.
    pub fn block_mean_increases(&self) -> usize {
        self.explored_edges()
            .filter(|(p, c)| {
                let (ps, pc) = p.partition.as_ref().unwrap().non_singleton_mean();
                let (cs, cc) = c.partition.as_ref().unwrap().non_singleton_mean();
                // cs/cc > ps/pc
                cc > 0 && (pc == 0 || cs * pc > ps * cc)
            })
            .count()
    }

    /// Expansions whose child count breaks the law for their kind.
    pub fn child_count_violations(&self) -> usize {
        self.expansions.iter().filter(|e| !e.obeys_child_law()).count()
    }
}

/// Shared bookkeeping for one high-level run.
struct Run<'a> {
    agents: Vec<SEAgent>,
    net: &'a RoadNetwork,
    options: SolveOptions,
    start: Instant,
    generated: usize,
    evaluated: usize,
    plan_requests: usize,
    next_id: usize,
    seen: HashSet<u64>,
    trace: Option<SearchTrace>,
}

impl<'a> Run<'a> {
    fn new(agents: &[SEAgent], net: &'a RoadNetwork, options: SolveOptions) -> Result<Self, SolveError> {
        let mut agents = agents.to_vec();
        agents.sort_by_key(|a| a.id);
        if let Some(w) = agents.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(SolveError::DuplicateAgent(w[0].id));
        }
        let trace = options.trace.then(SearchTrace::default);
        Ok(Run {
            agents,
            net,
            options,
            start: Instant::now(),
            generated: 0,
            evaluated: 0,
            plan_requests: 0,
            next_id: 1,
            seen: HashSet::new(),
            trace,
        })
    }

    fn ids(&self) -> Vec<AgentId> {
        self.agents.iter().map(|a| a.id).collect()
    }

    fn index_of(&self, id: AgentId) -> usize {
        self.agents.binary_search_by_key(&id, |a| a.id).expect("known agent")
    }

    fn root(&mut self) -> Result<CTNode, SolveError> {
        let solution = unconstrained_solution(&self.agents, self.net)?;
        let node = CTNode::root(solution);
        self.register(&node);
        self.seen.insert(node.key());
        Ok(node)
    }

    /// Counts a generated node and gives it the next id.
    fn register(&mut self, node: &CTNode) -> usize {
        let id = self.next_id;
        self.next_id += 1;
        self.generated += 1;
        if let Some(t) = &mut self.trace {
            t.nodes.push(TraceNode {
                id,
                parent: node.parent,
                depth: node.depth,
                cost: node.cost,
                partition: None,
            });
        }
        id
    }

    fn check_limits(&self) -> Result<(), SolveError> {
        if let Some(limit) = self.options.node_limit {
            if self.generated > limit {
                return Err(SolveError::NodeLimit(limit));
            }
        }
        if let Some(limit) = self.options.time_limit {
            if self.start.elapsed() > limit {
                return Err(SolveError::TimeLimit(limit));
            }
        }
        Ok(())
    }

    fn evaluate(&mut self, node: &mut CTNode) -> Result<Validation, SolveError> {
        self.evaluated += 1;
        let v = validate_solution(&node.solution, &self.agents, self.net)?;
        node.partition = Some(v.partition.clone());
        if let Some(t) = &mut self.trace {
            t.nodes[node.id - 1].partition = Some(v.partition.clone());
        }
        Ok(v)
    }

    fn record_expansion(&mut self, record: ExpansionRecord) {
        debug_assert!(record.obeys_child_law(), "{record:?}");
        if let Some(t) = &mut self.trace {
            t.expansions.push(record);
        }
    }

    fn report(self, algorithm: &str, node: CTNode, root_blocks: usize) -> SolveReport {
        SolveReport {
            algorithm: algorithm.to_string(),
            cost: node.cost,
            solution: node.solution,
            nodes_generated: self.generated,
            nodes_evaluated: self.evaluated,
            elapsed: self.start.elapsed(),
            root_blocks,
            plan_requests: self.plan_requests,
            trace: self.trace,
        }
    }
}

fn unconstrained_solution(agents: &[SEAgent], net: &RoadNetwork) -> Result<Vec<Plan>, SolveError> {
    agents
        .iter()
        .map(|a| unconstrained_plan(a, net)?.ok_or(SolveError::Unreachable(a.id)))
        .collect()
}

fn validate_solution(solution: &[Plan], agents: &[SEAgent], net: &RoadNetwork) -> Result<Validation, PlanError> {
    let footprints = solution_footprints(solution, agents, net)?;
    let ids: Vec<AgentId> = agents.iter().map(|a| a.id).collect();
    Ok(validation_of(&to_graph_from_footprints(&footprints), &ids))
}

/// Runs the named algorithm.
pub fn solve(
    algorithm: Algorithm,
    agents: &[SEAgent],
    net: &RoadNetwork,
    planner: &dyn crate::planner::Planner,
    options: SolveOptions,
) -> Result<SolveReport, SolveError> {
    match algorithm {
        Algorithm::Greedy => solve_greedy(agents, net, planner, options),
        Algorithm::Xcbs => solve_xcbs(agents, net, options),
        Algorithm::XcbsA => solve_xcbsa(agents, net, planner, options),
        Algorithm::XcbsAEff(h) => solve_xcbsa_eff(agents, net, planner, h, options),
        Algorithm::XcbsLa => solve_xcbsla(agents, net, planner, options),
    }
}

/// Min-cost open set; equal costs pop in insertion order.
#[derive(Default)]
struct OpenSet {
    heap: std::collections::BinaryHeap<std::cmp::Reverse<(Time, u64)>>,
    nodes: std::collections::HashMap<u64, CTNode>,
    seq: u64,
}

impl OpenSet {
    fn push(&mut self, node: CTNode) {
        self.seq += 1;
        self.heap.push(std::cmp::Reverse((node.cost, self.seq)));
        self.nodes.insert(self.seq, node);
    }

    fn pop(&mut self) -> Option<CTNode> {
        let std::cmp::Reverse((_, seq)) = self.heap.pop()?;
        self.nodes.remove(&seq)
    }

    fn peek_cost(&self) -> Option<Time> {
        self.heap.peek().map(|r| r.0 .0)
    }
}
