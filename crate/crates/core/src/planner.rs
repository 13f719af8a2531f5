//! Where low-level and block searches execute. The high-level searches
//! hand batches of queries to a [`Planner`]; the in-process one runs them on
//! a thread pool, a remote one ships them to worker processes.

use crate::agents::{AgentId, Plan, SEAgent};
use crate::highlevel::{block_level_search, SolveError};
use crate::lowlevel::{low_level_search, ConstraintSet, LowLevelError};
use crate::roadnet::RoadNetwork;

/// One low-level search to run on behalf of the high-level loop.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlanQuery {
    pub agent: AgentId,
    pub constraints: ConstraintSet,
    pub seed: Option<Plan>,
    /// Agents this one is committed to; their footprints are already part
    /// of `constraints`.
    pub committed_to: Vec<AgentId>,
}

/// A joint solve of one block, each member additionally bound by its own
/// outside constraints.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockQuery {
    pub members: Vec<AgentId>,
    pub seeds: Vec<Plan>,
    pub outside: Vec<ConstraintSet>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PlannerError {
    #[error(transparent)]
    Search(#[from] LowLevelError),
    #[error("block search for {0:?} failed: {1}")]
    Block(Vec<AgentId>, String),
    #[error("no planner hosts {0}")]
    UnknownAgent(AgentId),
    #[error("worker for {agent} failed: {reason}")]
    Worker { agent: AgentId, reason: String },
    #[error("malformed query: {0}")]
    Malformed(String),
}

/// Executes batches of searches. Results come back in query order.
pub trait Planner: Sync {
    fn plan_batch(&self, queries: &[PlanQuery]) -> Result<Vec<Plan>, PlannerError>;

    fn solve_blocks(&self, queries: &[BlockQuery]) -> Result<Vec<Vec<Plan>>, PlannerError>;
}

/// Runs searches in this process, in parallel across queries.
pub struct LocalPlanner<'a> {
    net: &'a RoadNetwork,
    agents: &'a [SEAgent],
}

impl<'a> LocalPlanner<'a> {
    pub fn new(net: &'a RoadNetwork, agents: &'a [SEAgent]) -> Self {
        LocalPlanner { net, agents }
    }
}

fn find_agent(agents: &[SEAgent], id: AgentId) -> Result<&SEAgent, PlannerError> {
    agents
        .iter()
        .find(|a| a.id == id)
        .ok_or(PlannerError::UnknownAgent(id))
}

/// Answers one query; shared by in-process and remote planners.
pub fn answer_query(query: &PlanQuery, agents: &[SEAgent], net: &RoadNetwork) -> Result<Plan, PlannerError> {
    let agent = find_agent(agents, query.agent)?;
    Ok(low_level_search(agent, net, &query.constraints, query.seed.as_ref())?)
}

pub fn answer_block(query: &BlockQuery, agents: &[SEAgent], net: &RoadNetwork) -> Result<Vec<Plan>, PlannerError> {
    if query.seeds.len() != query.members.len() || query.outside.len() != query.members.len() {
        return Err(PlannerError::Malformed("block query lengths differ".into()));
    }
    let members = query
        .members
        .iter()
        .map(|id| find_agent(agents, *id).cloned())
        .collect::<Result<Vec<_>, _>>()?;
    block_level_search(&members, &query.seeds, &query.outside, net).map_err(|e| match e {
        SolveError::Planner(p) => p,
        other => PlannerError::Block(query.members.clone(), other.to_string()),
    })
}

impl Planner for LocalPlanner<'_> {
    fn plan_batch(&self, queries: &[PlanQuery]) -> Result<Vec<Plan>, PlannerError> {
        use rayon::prelude::*;
        queries
            .par_iter()
            .map(|q| answer_query(q, self.agents, self.net))
            .collect()
    }

    fn solve_blocks(&self, queries: &[BlockQuery]) -> Result<Vec<Vec<Plan>>, PlannerError> {
        use rayon::prelude::*;
        queries
            .par_iter()
            .map(|q| answer_block(q, self.agents, self.net))
            .collect()
    }
}
