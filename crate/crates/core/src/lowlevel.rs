//! Single-agent replanning against the footprints of other agents.
//!
//! The replanner runs a best-first search over a replan tree. Each node
//! holds a complete plan; expanding a node finds the earliest constraint it
//! violates and branches into an alternate-route child and a waiting child.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashSet};

use crate::agents::{
    first_violation, AgentId, Constraint, Itinerary, Plan, PlanError, SEAgent, Timeline,
};
use crate::roadnet::{shortest_path, Location, NetworkError, RoadNetwork};
use crate::units::Time;

/// Default bound on replan-tree expansions per search.
pub const DEFAULT_EXPANSION_LIMIT: usize = 200_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LowLevelError {
    #[error("destination of {0} is unreachable")]
    Unreachable(AgentId),
    #[error("replanning {0} exceeded {1} expansions")]
    Exhausted(AgentId, usize),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

/// Constraints sorted by (start, location, end, owner).
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct ConstraintSet {
    constraints: Vec<Constraint>,
}

impl ConstraintSet {
    pub fn new(mut constraints: Vec<Constraint>) -> Self {
        constraints.sort_by_key(|c| (c.interval.start, c.location, c.interval.end, c.owner));
        ConstraintSet { constraints }
    }

    pub fn as_slice(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Constraint> {
        self.constraints.iter()
    }

    pub fn extend(&mut self, other: &ConstraintSet) {
        let mut all = std::mem::take(&mut self.constraints);
        all.extend_from_slice(&other.constraints);
        *self = ConstraintSet::new(all);
    }
}

/// Footprints of `others`, as constraints on `agent`.
pub fn derive_constraints(
    agent: &SEAgent,
    others: &[(&SEAgent, &Plan)],
    net: &RoadNetwork,
) -> Result<ConstraintSet, PlanError> {
    let mut out = Vec::new();
    for (other, plan) in others {
        debug_assert_ne!(other.id, agent.id);
        let tl = Timeline::from_plan(plan, other, net)?;
        out.extend(tl.occupancy(other).into_iter().map(Constraint::from));
    }
    Ok(ConstraintSet::new(out))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReplanKind {
    Root,
    AltPath,
    Wait,
}

#[derive(Clone, Debug)]
pub struct ReplanNode {
    pub id: usize,
    pub itinerary: Itinerary,
    pub cost: Time,
    pub parent: Option<usize>,
    pub kind: ReplanKind,
    /// Constraints resolved on the way down to this node.
    pub resolved: Vec<Constraint>,
    /// Locations rerouted around along this branch.
    pub blocked: BTreeSet<Location>,
}

impl ReplanNode {
    fn root(itinerary: Itinerary, agent: &SEAgent, net: &RoadNetwork) -> Self {
        let cost = itinerary.timeline(agent, net).cost();
        ReplanNode {
            id: 1,
            itinerary,
            cost,
            parent: None,
            kind: ReplanKind::Root,
            resolved: Vec::new(),
            blocked: BTreeSet::new(),
        }
    }

    pub fn plan(&self, agent: &SEAgent, net: &RoadNetwork) -> Plan {
        self.itinerary.to_plan(agent, net)
    }
}

/// Index of the route vertex the head occupies last before entering
/// `location`, or `None` if the route does not use it.
pub fn reroute_index(it: &Itinerary, location: Location) -> Option<usize> {
    match location {
        Location::Edge(e) => it.edges.iter().position(|x| *x == e),
        Location::Vertex(v) => it.vertices.iter().position(|x| *x == v).filter(|&k| k > 0).map(|k| k - 1),
    }
}

/// Reroutes from the last vertex before `violated.location`, keeping the
/// prefix and avoiding every location blocked on this branch.
pub fn create_alt_path(
    node: &ReplanNode,
    violated: &Constraint,
    agent: &SEAgent,
    net: &RoadNetwork,
) -> Result<Option<(Itinerary, BTreeSet<Location>)>, NetworkError> {
    alt_path_itinerary(&node.itinerary, &node.blocked, violated, agent, net)
}

/// [`create_alt_path`] on a bare itinerary; also returns the grown blocked set.
pub fn alt_path_itinerary(
    it: &Itinerary,
    blocked: &BTreeSet<Location>,
    violated: &Constraint,
    agent: &SEAgent,
    net: &RoadNetwork,
) -> Result<Option<(Itinerary, BTreeSet<Location>)>, NetworkError> {
    let Some(r) = reroute_index(it, violated.location) else {
        return Ok(None);
    };
    let mut blocked = blocked.clone();
    blocked.insert(violated.location);
    Ok(reroute_from(it, r, &blocked, agent, net)?.map(|alt| (alt, blocked)))
}

/// Keeps the route and waits up to `vertices[r]`, then takes the fastest way
/// to the destination that avoids `blocked` and the earlier route vertices.
pub fn reroute_from(
    it: &Itinerary,
    r: usize,
    blocked: &BTreeSet<Location>,
    agent: &SEAgent,
    net: &RoadNetwork,
) -> Result<Option<Itinerary>, NetworkError> {
    let mut avoid = blocked.clone();
    avoid.extend(it.vertices[..r].iter().map(|v| Location::Vertex(*v)));
    let Some(suffix) = shortest_path(net, it.vertices[r], agent.destination, agent.speed, &avoid)? else {
        return Ok(None);
    };
    let mut vertices = it.vertices[..=r].to_vec();
    vertices.extend_from_slice(&suffix.vertices[1..]);
    let mut edges = it.edges[..r].to_vec();
    edges.extend_from_slice(&suffix.edges);
    let mut waits = it.waits[..r].to_vec();
    waits.resize(edges.len(), Time::ZERO);
    Ok(Some(Itinerary { vertices, edges, waits }))
}

/// Delays the head at the last vertex before `violated.location` just long
/// enough that its occupancy there starts when the constraint ends.
pub fn create_wait(
    node: &ReplanNode,
    violated: &Constraint,
    agent: &SEAgent,
    net: &RoadNetwork,
) -> Option<Itinerary> {
    wait_itinerary(&node.itinerary, violated, agent, net)
}

pub fn wait_itinerary(
    it: &Itinerary,
    violated: &Constraint,
    agent: &SEAgent,
    net: &RoadNetwork,
) -> Option<Itinerary> {
    let tl = it.timeline(agent, net);
    let (r, start) = match violated.location {
        Location::Edge(e) => {
            let k = it.edges.iter().position(|x| *x == e)?;
            (k, tl.depart[k])
        }
        Location::Vertex(v) => {
            let k = it.vertices.iter().position(|x| *x == v).filter(|&k| k > 0)?;
            (k - 1, tl.arrive[k])
        }
    };
    let d = violated.interval.end - start;
    // Only overlapping constraints are ever reported as violated.
    debug_assert!(d.is_positive());
    if !d.is_positive() {
        return None;
    }
    let mut out = it.clone();
    out.waits[r] += d;
    Some(out)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReplanTraceEntry {
    pub id: usize,
    pub parent: Option<usize>,
    pub kind: ReplanKind,
    pub cost: Time,
    /// Filled when the node is evaluated.
    pub violated: Option<Option<Constraint>>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ReplanTrace {
    pub nodes: Vec<ReplanTraceEntry>,
    pub expansion_order: Vec<usize>,
    pub result: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct LowLevelOptions {
    pub expansion_limit: usize,
}

impl Default for LowLevelOptions {
    fn default() -> Self {
        LowLevelOptions {
            expansion_limit: DEFAULT_EXPANSION_LIMIT,
        }
    }
}

/// Replans `agent` so that it honours every constraint. The search starts
/// from `seed` when given, otherwise from the unconstrained fastest plan.
pub fn low_level_search(
    agent: &SEAgent,
    net: &RoadNetwork,
    constraints: &ConstraintSet,
    seed: Option<&Plan>,
) -> Result<Plan, LowLevelError> {
    search(agent, net, constraints, seed, LowLevelOptions::default(), None)
}

pub fn low_level_search_traced(
    agent: &SEAgent,
    net: &RoadNetwork,
    constraints: &ConstraintSet,
    seed: Option<&Plan>,
) -> Result<(Plan, ReplanTrace), LowLevelError> {
    let mut trace = ReplanTrace::default();
    let plan = search(agent, net, constraints, seed, LowLevelOptions::default(), Some(&mut trace))?;
    Ok((plan, trace))
}

pub fn low_level_search_with(
    agent: &SEAgent,
    net: &RoadNetwork,
    constraints: &ConstraintSet,
    seed: Option<&Plan>,
    options: LowLevelOptions,
) -> Result<Plan, LowLevelError> {
    search(agent, net, constraints, seed, options, None)
}

/// Shortens each wait, first to last, by as much as keeps the plan
/// consistent, never taking the cost below `floor`. Waits found one
/// violation at a time can overshoot once a later wait earlier on the route
/// covers the same conflict.
pub fn compact_waits(
    it: &Itinerary,
    constraints: &ConstraintSet,
    agent: &SEAgent,
    net: &RoadNetwork,
    floor: Time,
) -> Itinerary {
    let mut it = it.clone();
    for k in 0..it.waits.len() {
        if !it.waits[k].is_positive() {
            continue;
        }
        let tl = it.timeline(agent, net);
        let mut cut = it.waits[k].min(tl.cost() - floor);
        // every record starting from the departure on moves with the wait
        for r in tl.occupancy(agent).iter().filter(|r| r.interval.start >= tl.depart[k]) {
            for c in constraints
                .iter()
                .filter(|c| c.location == r.location && c.interval.end <= r.interval.start)
            {
                cut = cut.min(r.interval.start - c.interval.end);
            }
        }
        if cut.is_positive() {
            it.waits[k] = it.waits[k] - cut;
        }
    }
    it
}

fn search(
    agent: &SEAgent,
    net: &RoadNetwork,
    constraints: &ConstraintSet,
    seed: Option<&Plan>,
    options: LowLevelOptions,
    mut trace: Option<&mut ReplanTrace>,
) -> Result<Plan, LowLevelError> {
    let root_itinerary = match seed {
        Some(plan) => Itinerary::from_plan(plan, agent, net)?,
        None => {
            let path = shortest_path(net, agent.initial, agent.destination, agent.speed, &BTreeSet::new())?
                .ok_or(LowLevelError::Unreachable(agent.id))?;
            Itinerary::new(path.vertices, path.edges)
        }
    };
    let root = ReplanNode::root(root_itinerary, agent, net);
    if let Some(t) = trace.as_deref_mut() {
        t.nodes.push(ReplanTraceEntry {
            id: 1,
            parent: None,
            kind: ReplanKind::Root,
            cost: root.cost,
            violated: None,
        });
    }

    let mut seen: HashSet<Itinerary> = HashSet::new();
    seen.insert(root.itinerary.clone());
    let mut nodes: Vec<ReplanNode> = vec![root];
    let mut open = BinaryHeap::new();
    open.push(Reverse((nodes[0].cost, 1usize)));
    let mut expansions = 0;

    while let Some(Reverse((_, id))) = open.pop() {
        let node = &nodes[id - 1];
        let tl = node.itinerary.timeline(agent, net);
        let violated = first_violation(&tl.occupancy(agent), constraints.iter());
        if let Some(t) = trace.as_deref_mut() {
            t.expansion_order.push(id);
            t.nodes[id - 1].violated = Some(violated);
        }
        let Some(violated) = violated else {
            if let Some(t) = trace.as_deref_mut() {
                t.result = id;
            }
            let compact = compact_waits(&node.itinerary, constraints, agent, net, nodes[0].cost);
            return Ok(compact.to_plan(agent, net));
        };
        expansions += 1;
        if expansions > options.expansion_limit {
            return Err(LowLevelError::Exhausted(agent.id, options.expansion_limit));
        }

        let mut children = Vec::with_capacity(2);
        if let Some((it, blocked)) = create_alt_path(node, &violated, agent, net)? {
            children.push((ReplanKind::AltPath, it, blocked));
        }
        if let Some(it) = create_wait(node, &violated, agent, net) {
            children.push((ReplanKind::Wait, it, node.blocked.clone()));
        }
        let parent_cost = node.cost;
        let mut resolved = node.resolved.clone();
        resolved.push(violated);
        for (kind, it, blocked) in children {
            let cost = it.timeline(agent, net).cost();
            // Replan-tree costs never decrease down a branch.
            if cost < parent_cost || !seen.insert(it.clone()) {
                continue;
            }
            let child_id = nodes.len() + 1;
            if let Some(t) = trace.as_deref_mut() {
                t.nodes.push(ReplanTraceEntry {
                    id: child_id,
                    parent: Some(id),
                    kind,
                    cost,
                    violated: None,
                });
            }
            nodes.push(ReplanNode {
                id: child_id,
                itinerary: it,
                cost,
                parent: Some(id),
                kind,
                resolved: resolved.clone(),
                blocked,
            });
            open.push(Reverse((cost, child_id)));
        }
    }
    // Waiting always yields a child, so the open set only drains when
    // every wait child was a duplicate.
    Err(LowLevelError::Exhausted(agent.id, expansions))
}
