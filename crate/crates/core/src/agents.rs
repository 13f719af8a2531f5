//! Spatially extended agents, their plans and the footprint those plans
//! leave on the network.
//!
//! The body is modelled as a rigid segment of the agent's length trailing
//! the head along the route. The head crosses each edge at the effective
//! speed `min(agent speed, edge speed)` and only ever waits at vertices;
//! while it waits the whole body is frozen. Past the destination the body
//! keeps draining into the final vertex at the last edge's effective speed.
//!
//! A location is occupied while the open body segment `(head - length,
//! head]` touches it. For an edge this runs from the moment the head leaves
//! its start vertex until the tail reaches the far vertex; for an
//! intermediate vertex it runs from head arrival until the tail has passed.
//! The agent's own start and destination vertices never produce records.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::roadnet::{traversal_time, EdgeId, Location, NetworkError, RoadNetwork, VertexId};
use crate::units::{partial_time, Distance, Interval, Speed, Time};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub u32);

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "A{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SEAgent {
    pub id: AgentId,
    pub length: Distance,
    pub initial: VertexId,
    pub destination: VertexId,
    pub speed: Speed,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AgentError {
    #[error("agent {0} must have positive length and speed")]
    NonPositive(AgentId),
    #[error("agent {0} starts at its destination")]
    TrivialTrip(AgentId),
    #[error("agent {0} references a vertex outside the network")]
    UnknownVertex(AgentId),
}

impl SEAgent {
    pub fn validate(&self, net: &RoadNetwork) -> Result<(), AgentError> {
        if !self.length.is_positive() || !self.speed.is_positive() {
            return Err(AgentError::NonPositive(self.id));
        }
        if !net.contains_vertex(self.initial) || !net.contains_vertex(self.destination) {
            return Err(AgentError::UnknownVertex(self.id));
        }
        if self.initial == self.destination {
            return Err(AgentError::TrivialTrip(self.id));
        }
        Ok(())
    }
}

/// `Move` records the head entering an edge at `t`; `Wait` holds the head at
/// the vertex it reached, starting at `t`, for `d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Action {
    Move { location: Location, t: Time },
    Wait { t: Time, d: Time },
}

impl Action {
    pub fn time(&self) -> Time {
        match self {
            Action::Move { t, .. } | Action::Wait { t, .. } => *t,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Plan {
    pub agent: AgentId,
    pub actions: Vec<Action>,
    pub cost: Time,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PlanError {
    #[error("plan of {agent} is not connected at action {index}")]
    Disconnected { agent: AgentId, index: usize },
    #[error("wait at action {index} of {agent} does not start with the head at a vertex")]
    WaitNotAtVertex { agent: AgentId, index: usize },
    #[error("wait at action {index} of {agent} has non-positive duration")]
    EmptyWait { agent: AgentId, index: usize },
    #[error("move at action {index} of {agent} has the wrong time")]
    TimeMismatch { agent: AgentId, index: usize },
    #[error("plan of {agent} repeats a vertex")]
    NotSimple { agent: AgentId },
    #[error("plan of {agent} ends away from its destination")]
    WrongDestination { agent: AgentId },
    #[error("plan of {agent} waits at its destination")]
    WaitAtDestination { agent: AgentId },
    #[error("plan of {agent} declares cost {declared} but arrives at {actual}")]
    CostMismatch { agent: AgentId, declared: Time, actual: Time },
    #[error("plan belongs to {found}, expected {expected}")]
    WrongAgent { expected: AgentId, found: AgentId },
}

/// Editable form of a plan: the route plus how long the head waits at each
/// vertex before taking the next edge.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Itinerary {
    pub vertices: Vec<VertexId>,
    pub edges: Vec<EdgeId>,
    /// `waits[k]` is spent at `vertices[k]` before entering `edges[k]`.
    pub waits: Vec<Time>,
}

impl Itinerary {
    pub fn new(vertices: Vec<VertexId>, edges: Vec<EdgeId>) -> Self {
        let waits = vec![Time::ZERO; edges.len()];
        Itinerary { vertices, edges, waits }
    }

    pub fn from_plan(plan: &Plan, agent: &SEAgent, net: &RoadNetwork) -> Result<Self, PlanError> {
        Ok(Timeline::from_plan(plan, agent, net)?.itinerary)
    }

    pub fn timeline(&self, agent: &SEAgent, net: &RoadNetwork) -> Timeline {
        Timeline::build(self.clone(), agent, net)
    }

    pub fn to_plan(&self, agent: &SEAgent, net: &RoadNetwork) -> Plan {
        self.timeline(agent, net).to_plan(agent.id)
    }

    pub fn total_wait(&self) -> Time {
        self.waits.iter().copied().sum()
    }
}

/// Itinerary with every head event time resolved.
#[derive(Clone, Debug)]
pub struct Timeline {
    pub itinerary: Itinerary,
    /// Head arrival at `vertices[k]`; `arrive[0]` is zero.
    pub arrive: Vec<Time>,
    /// Head departure from `vertices[k]` into `edges[k]`.
    pub depart: Vec<Time>,
    /// Traversal time of `edges[k]`.
    pub traverse: Vec<Time>,
    /// Arc position of `vertices[k]` along the route.
    pub arc: Vec<Distance>,
    pub edge_lengths: Vec<Distance>,
    pub body_length: Distance,
}

impl Timeline {
    fn build(itinerary: Itinerary, agent: &SEAgent, net: &RoadNetwork) -> Self {
        let m = itinerary.edges.len();
        let mut arrive = Vec::with_capacity(m + 1);
        let mut depart = Vec::with_capacity(m);
        let mut traverse = Vec::with_capacity(m);
        let mut arc = Vec::with_capacity(m + 1);
        let mut edge_lengths = Vec::with_capacity(m);
        arrive.push(Time::ZERO);
        arc.push(Distance::ZERO);
        for (k, &e) in itinerary.edges.iter().enumerate() {
            let edge = net.edge(e);
            let tau = traversal_time(edge, agent.speed);
            let dep = arrive[k] + itinerary.waits[k];
            depart.push(dep);
            traverse.push(tau);
            arrive.push(dep + tau);
            arc.push(arc[k] + edge.length);
            edge_lengths.push(edge.length);
        }
        Timeline {
            itinerary,
            arrive,
            depart,
            traverse,
            arc,
            edge_lengths,
            body_length: agent.length,
        }
    }

    pub fn from_plan(plan: &Plan, agent: &SEAgent, net: &RoadNetwork) -> Result<Self, PlanError> {
        let id = agent.id;
        if plan.agent != id {
            return Err(PlanError::WrongAgent { expected: id, found: plan.agent });
        }
        let mut vertices = vec![agent.initial];
        let mut edges = Vec::new();
        let mut waits = Vec::new();
        let mut pending_wait = Time::ZERO;
        let mut cursor = Time::ZERO;
        for (index, action) in plan.actions.iter().enumerate() {
            let here = *vertices.last().unwrap();
            match *action {
                Action::Wait { t, d } => {
                    if t != cursor {
                        return Err(PlanError::WaitNotAtVertex { agent: id, index });
                    }
                    if !d.is_positive() {
                        return Err(PlanError::EmptyWait { agent: id, index });
                    }
                    if here == agent.destination && !edges.is_empty() {
                        return Err(PlanError::WaitAtDestination { agent: id });
                    }
                    pending_wait += d;
                    cursor = t + d;
                }
                Action::Move { location: Location::Edge(e), t } => {
                    if e.index() >= net.edge_count() || !net.edge(e).touches(here) {
                        return Err(PlanError::Disconnected { agent: id, index });
                    }
                    if t != cursor {
                        return Err(PlanError::TimeMismatch { agent: id, index });
                    }
                    let edge = net.edge(e);
                    waits.push(pending_wait);
                    pending_wait = Time::ZERO;
                    edges.push(e);
                    vertices.push(edge.other(here));
                    cursor = t + traversal_time(edge, agent.speed);
                }
                // Explicit vertex entries are accepted when they agree with
                // the head's position and time.
                Action::Move { location: Location::Vertex(v), t } => {
                    if v != here || edges.is_empty() {
                        return Err(PlanError::Disconnected { agent: id, index });
                    }
                    if t != cursor {
                        return Err(PlanError::TimeMismatch { agent: id, index });
                    }
                }
            }
        }
        if pending_wait.is_positive() {
            return Err(PlanError::WaitAtDestination { agent: id });
        }
        if *vertices.last().unwrap() != agent.destination {
            return Err(PlanError::WrongDestination { agent: id });
        }
        let mut seen = std::collections::HashSet::new();
        if !vertices.iter().all(|v| seen.insert(*v)) {
            return Err(PlanError::NotSimple { agent: id });
        }
        if cursor != plan.cost {
            return Err(PlanError::CostMismatch { agent: id, declared: plan.cost, actual: cursor });
        }
        Ok(Timeline::build(Itinerary { vertices, edges, waits }, agent, net))
    }

    pub fn to_plan(&self, agent: AgentId) -> Plan {
        let mut actions = Vec::with_capacity(self.itinerary.edges.len() * 2);
        for (k, &e) in self.itinerary.edges.iter().enumerate() {
            let w = self.itinerary.waits[k];
            if w.is_positive() {
                actions.push(Action::Wait { t: self.arrive[k], d: w });
            }
            actions.push(Action::Move { location: Location::Edge(e), t: self.depart[k] });
        }
        Plan {
            agent,
            actions,
            cost: self.cost(),
        }
    }

    pub fn cost(&self) -> Time {
        *self.arrive.last().unwrap()
    }

    /// Earliest time the head reaches arc position `p`.
    pub fn first_reach(&self, p: Distance) -> Time {
        let m = self.itinerary.edges.len();
        if m == 0 {
            return Time::ZERO;
        }
        let last = self.arc[m];
        if p >= last {
            return self.arrive[m] + partial_time(p - last, self.edge_lengths[m - 1], self.traverse[m - 1]);
        }
        // arc is strictly increasing
        let k = match self.arc.binary_search(&p) {
            Ok(k) => return self.arrive[k],
            Err(k) => k - 1,
        };
        self.depart[k] + partial_time(p - self.arc[k], self.edge_lengths[k], self.traverse[k])
    }

    /// Footprint in plan order, one record per location.
    pub fn occupancy(&self, agent: &SEAgent) -> Vec<OccupancyRecord> {
        let m = self.itinerary.edges.len();
        let mut out = Vec::with_capacity(2 * m);
        for k in 0..m {
            if k > 0 {
                let v = self.itinerary.vertices[k];
                if v != agent.initial && v != agent.destination {
                    out.push(OccupancyRecord {
                        location: Location::Vertex(v),
                        interval: Interval::new(self.arrive[k], self.first_reach(self.arc[k] + self.body_length)),
                        agent: agent.id,
                    });
                }
            }
            out.push(OccupancyRecord {
                location: Location::Edge(self.itinerary.edges[k]),
                interval: Interval::new(self.depart[k], self.first_reach(self.arc[k + 1] + self.body_length)),
                agent: agent.id,
            });
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OccupancyRecord {
    pub location: Location,
    pub interval: Interval,
    pub agent: AgentId,
}

/// Forbids the constrained agent from `location` during `interval`;
/// `owner` is the agent whose footprint produced it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Constraint {
    pub location: Location,
    pub interval: Interval,
    pub owner: AgentId,
}

impl From<OccupancyRecord> for Constraint {
    fn from(r: OccupancyRecord) -> Self {
        Constraint {
            location: r.location,
            interval: r.interval,
            owner: r.agent,
        }
    }
}

pub fn occupancy(plan: &Plan, agent: &SEAgent, net: &RoadNetwork) -> Result<Vec<OccupancyRecord>, PlanError> {
    Ok(Timeline::from_plan(plan, agent, net)?.occupancy(agent))
}

pub fn plan_cost(plan: &Plan) -> Time {
    plan.cost
}

/// Constraint whose overlap with the footprint begins earliest (ties: the
/// smaller location, then the constraint's own order), or `None`.
pub fn first_violation<'a>(
    records: &[OccupancyRecord],
    constraints: impl IntoIterator<Item = &'a Constraint>,
) -> Option<Constraint> {
    let mut by_location: BTreeMap<Location, Vec<Interval>> = BTreeMap::new();
    for r in records {
        by_location.entry(r.location).or_default().push(r.interval);
    }
    constraints
        .into_iter()
        .filter_map(|c| {
            by_location.get(&c.location).and_then(|ivs| {
                ivs.iter()
                    .filter(|iv| iv.intersects(&c.interval))
                    .map(|iv| iv.start.max(c.interval.start))
                    .min()
                    .map(|start| ((start, c.location, *c), *c))
            })
        })
        .min_by_key(|(key, _)| *key)
        .map(|(_, c)| c)
}

pub fn is_consistent(
    plan: &Plan,
    agent: &SEAgent,
    net: &RoadNetwork,
    constraints: &[Constraint],
) -> Result<Option<Constraint>, PlanError> {
    let records = occupancy(plan, agent, net)?;
    Ok(first_violation(&records, constraints))
}

/// Unconstrained fastest plan for `agent`, or `None` if its destination is
/// unreachable.
pub fn unconstrained_plan(agent: &SEAgent, net: &RoadNetwork) -> Result<Option<Plan>, NetworkError> {
    let path = crate::roadnet::shortest_path(
        net,
        agent.initial,
        agent.destination,
        agent.speed,
        &Default::default(),
    )?;
    Ok(path.map(|p| Itinerary::new(p.vertices, p.edges).to_plan(agent, net)))
}

// ---- text forms --------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum ActionRecord {
    Move { loc: String, t: Time },
    Wait { t: Time, d: Time },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanRecord {
    pub agent: AgentId,
    pub cost: Time,
    pub actions: Vec<ActionRecord>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintRecord {
    pub loc: String,
    pub start: Time,
    pub end: Time,
    pub owner: AgentId,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentRecord {
    pub id: AgentId,
    pub length: Distance,
    pub initial: String,
    #[serde(rename = "final")]
    pub destination: String,
    pub speed: Speed,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RecordError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("interval [{0}, {1}) is empty")]
    EmptyInterval(Time, Time),
}

impl PlanRecord {
    pub fn from_plan(plan: &Plan, net: &RoadNetwork) -> Self {
        PlanRecord {
            agent: plan.agent,
            cost: plan.cost,
            actions: plan
                .actions
                .iter()
                .map(|a| match *a {
                    Action::Move { location, t } => ActionRecord::Move {
                        loc: net.location_name(location).to_string(),
                        t,
                    },
                    Action::Wait { t, d } => ActionRecord::Wait { t, d },
                })
                .collect(),
        }
    }

    pub fn to_plan(&self, net: &RoadNetwork) -> Result<Plan, RecordError> {
        let actions = self
            .actions
            .iter()
            .map(|a| {
                Ok(match a {
                    ActionRecord::Move { loc, t } => Action::Move {
                        location: net.location_by_name(loc)?,
                        t: *t,
                    },
                    ActionRecord::Wait { t, d } => Action::Wait { t: *t, d: *d },
                })
            })
            .collect::<Result<_, RecordError>>()?;
        Ok(Plan {
            agent: self.agent,
            actions,
            cost: self.cost,
        })
    }
}

impl ConstraintRecord {
    pub fn from_constraint(c: &Constraint, net: &RoadNetwork) -> Self {
        ConstraintRecord {
            loc: net.location_name(c.location).to_string(),
            start: c.interval.start,
            end: c.interval.end,
            owner: c.owner,
        }
    }

    pub fn to_constraint(&self, net: &RoadNetwork) -> Result<Constraint, RecordError> {
        if self.start >= self.end {
            return Err(RecordError::EmptyInterval(self.start, self.end));
        }
        Ok(Constraint {
            location: net.location_by_name(&self.loc)?,
            interval: Interval::new(self.start, self.end),
            owner: self.owner,
        })
    }
}

impl AgentRecord {
    pub fn from_agent(a: &SEAgent, net: &RoadNetwork) -> Self {
        AgentRecord {
            id: a.id,
            length: a.length,
            initial: net.vertex_name(a.initial).to_string(),
            destination: net.vertex_name(a.destination).to_string(),
            speed: a.speed,
        }
    }

    pub fn to_agent(&self, net: &RoadNetwork) -> Result<SEAgent, RecordError> {
        let v = |name: &str| {
            net.vertex_by_name(name)
                .ok_or_else(|| RecordError::Network(NetworkError::UnknownLocation(name.to_string())))
        };
        Ok(SEAgent {
            id: self.id,
            length: self.length,
            initial: v(&self.initial)?,
            destination: v(&self.destination)?,
            speed: self.speed,
        })
    }
}
