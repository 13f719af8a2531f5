use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap};

use super::{CTNode, ExpansionKind, ExpansionRecord, OpenSet, Run, SolveError, SolveOptions, SolveReport};
use crate::agents::{Constraint, Itinerary, OccupancyRecord, Plan, SEAgent, Timeline, first_violation};
use crate::conflict::{to_graph_from_footprints, validation_of};
use crate::lowlevel::{reroute_index, wait_itinerary, ConstraintSet};
use crate::roadnet::{traversal_time, EdgeId, Location, RoadNetwork, VertexId};
use crate::units::{Interval, Time};

/// Node budget of one block-level search.
pub const BLOCK_NODE_LIMIT: usize = 200_000;

#[derive(Clone, Debug, PartialEq, Eq)]
enum Conflict {
    /// Agents at indices `a` and `b` overlap on one location.
    Pair {
        a: usize,
        b: usize,
        ra: OccupancyRecord,
        rb: OccupancyRecord,
    },
    /// Agent `a` violates one of its outside constraints.
    Outside { a: usize, c: Constraint },
}

fn footprints(agents: &[SEAgent], solution: &[Plan], net: &RoadNetwork) -> Result<Vec<Vec<OccupancyRecord>>, SolveError> {
    agents
        .iter()
        .zip(solution)
        .map(|(a, p)| Ok(Timeline::from_plan(p, a, net)?.occupancy(a)))
        .collect()
}

/// The conflict that starts earliest; ties go to the smaller agent ids,
/// outside constraints ranking after any partner.
fn earliest_conflict(
    agents: &[SEAgent],
    fps: &[Vec<OccupancyRecord>],
    outside: &[ConstraintSet],
) -> Option<Conflict> {
    let mut best: Option<((Time, u32, u32, Location), Conflict)> = None;
    let mut offer = |key: (Time, u32, u32, Location), c: Conflict| {
        if best.as_ref().is_none_or(|(k, _)| key < *k) {
            best = Some((key, c));
        }
    };

    let mut by_location: BTreeMap<Location, Vec<(usize, OccupancyRecord)>> = BTreeMap::new();
    for (i, fp) in fps.iter().enumerate() {
        for r in fp {
            by_location.entry(r.location).or_default().push((i, *r));
        }
    }
    for (loc, recs) in &by_location {
        for (x, (i, ri)) in recs.iter().enumerate() {
            for (j, rj) in &recs[x + 1..] {
                if i == j || !ri.interval.intersects(&rj.interval) {
                    continue;
                }
                let (a, b, ra, rb) = if agents[*i].id < agents[*j].id {
                    (*i, *j, *ri, *rj)
                } else {
                    (*j, *i, *rj, *ri)
                };
                let start = ra.interval.start.max(rb.interval.start);
                offer((start, agents[a].id.0, agents[b].id.0, *loc), Conflict::Pair { a, b, ra, rb });
            }
        }
    }
    for (a, fp) in fps.iter().enumerate() {
        if let Some(c) = first_violation(fp, outside[a].iter()) {
            let start = fp
                .iter()
                .filter(|r| r.location == c.location && r.interval.intersects(&c.interval))
                .map(|r| r.interval.start.max(c.interval.start))
                .min()
                .expect("violation overlaps a record");
            offer((start, agents[a].id.0, u32::MAX, c.location), Conflict::Outside { a, c });
        }
    }
    best.map(|(_, c)| c)
}

/// Partial routes a timed reroute may expand before giving up.
const REROUTE_LIMIT: usize = 20_000;

/// Cheapest itinerary that keeps the route and waits up to some vertex no
/// later than `last`, then runs without waiting along a simple path, costs
/// at least `floor` and violates none of `avoid`. The new suffix may cross
/// an avoided location at another time.
fn timed_reroute(
    it: &Itinerary,
    last: usize,
    avoid: &[Constraint],
    floor: Time,
    agent: &SEAgent,
    net: &RoadNetwork,
) -> Result<Option<Itinerary>, SolveError> {
    let to_goal = distances_to(net, agent.destination, agent);
    let tl = it.timeline(agent, net);
    // (cost bound, later branch first, suffix edges, branch, suffix vertices, head time)
    type Entry = (Time, Reverse<usize>, Vec<EdgeId>, usize, Vec<VertexId>, Time);
    let mut open: BinaryHeap<Reverse<Entry>> = BinaryHeap::new();
    for r in 0..=last.min(it.edges.len().saturating_sub(1)) {
        let at = it.vertices[r];
        if let Some(h) = to_goal[at.index()] {
            let g = tl.arrive[r];
            open.push(Reverse((g + h, Reverse(r), Vec::new(), r, vec![at], g)));
        }
    }
    let mut popped = 0;
    while let Some(Reverse((_, _, edges, r, verts, g))) = open.pop() {
        popped += 1;
        if popped > REROUTE_LIMIT {
            return Ok(None);
        }
        let head = *verts.last().unwrap();
        if head == agent.destination {
            if g < floor {
                continue;
            }
            let mut vertices = it.vertices[..r].to_vec();
            vertices.extend_from_slice(&verts);
            let mut all_edges = it.edges[..r].to_vec();
            all_edges.extend_from_slice(&edges);
            let mut waits = it.waits[..r].to_vec();
            waits.resize(all_edges.len(), Time::ZERO);
            let cand = Itinerary {
                vertices,
                edges: all_edges,
                waits,
            };
            if cand == *it {
                continue;
            }
            if first_violation(&cand.timeline(agent, net).occupancy(agent), avoid).is_none() {
                return Ok(Some(cand));
            }
            continue;
        }
        for &(e, w) in net.neighbours(head) {
            if verts.contains(&w) || it.vertices[..r].contains(&w) {
                continue;
            }
            let Some(h) = to_goal[w.index()] else { continue };
            let ng = g + traversal_time(net.edge(e), agent.speed);
            // the head alone already breaks a constraint
            let crossing = Interval::new(g, ng);
            if avoid.iter().any(|c| {
                (c.location == Location::Edge(e) && c.interval.intersects(&crossing))
                    || (w != agent.destination && c.location == Location::Vertex(w) && c.interval.start <= ng && ng < c.interval.end)
            }) {
                continue;
            }
            let mut ne = edges.clone();
            ne.push(e);
            let mut nv = verts.clone();
            nv.push(w);
            open.push(Reverse((ng + h, Reverse(r), ne, r, nv, ng)));
        }
    }
    Ok(None)
}

/// Unblocked travel time from every vertex to `goal`.
fn distances_to(net: &RoadNetwork, goal: VertexId, agent: &SEAgent) -> Vec<Option<Time>> {
    let mut dist: Vec<Option<Time>> = vec![None; net.vertex_count()];
    let mut heap = BinaryHeap::new();
    dist[goal.index()] = Some(Time::ZERO);
    heap.push(Reverse((Time::ZERO, goal)));
    while let Some(Reverse((d, u))) = heap.pop() {
        if dist[u.index()].is_some_and(|best| best < d) {
            continue;
        }
        for &(e, w) in net.neighbours(u) {
            let nd = d + traversal_time(net.edge(e), agent.speed);
            if dist[w.index()].is_none_or(|cur| nd < cur) {
                dist[w.index()] = Some(nd);
                heap.push(Reverse((nd, w)));
            }
        }
    }
    dist
}

/// The single-step revisions of one plan around `violated`: the cheapest
/// re-route, branching off at any route vertex up to the one before the
/// location, that clears `violated` and every constraint this agent was
/// re-routed for earlier on the branch, never cheaper than the plan; and a
/// wait.
fn steps(
    agent: &SEAgent,
    plan: &Plan,
    violated: &Constraint,
    rerouted_for: &[Constraint],
    net: &RoadNetwork,
) -> Result<(Option<Plan>, Plan), SolveError> {
    let it = Itinerary::from_plan(plan, agent, net)?;
    let mut repath = None;
    if let Some(last) = reroute_index(&it, violated.location) {
        let mut avoid = rerouted_for.to_vec();
        avoid.push(*violated);
        repath = timed_reroute(&it, last, &avoid, plan.cost, agent, net)?.map(|alt| alt.to_plan(agent, net));
    }
    let wait = wait_itinerary(&it, violated, agent, net)
        .expect("violations overlap")
        .to_plan(agent, net);
    Ok((repath, wait))
}

fn revised(node: &CTNode, i: usize, plan: Plan) -> CTNode {
    let mut solution = node.solution.clone();
    let cost = node.cost - solution[i].cost + plan.cost;
    solution[i] = plan;
    CTNode {
        id: 0,
        solution,
        cost,
        parent: Some(node.id),
        depth: node.depth + 1,
        partition: None,
        commitments: node.commitments.clone(),
    }
}

/// Best-first search over single-step revisions, starting from `seeds`.
/// `outside[i]` binds `run.agents[i]` in addition to the other agents.
fn search(run: &mut Run, seeds: Vec<Plan>, outside: &[ConstraintSet]) -> Result<(CTNode, usize), SolveError> {
    let root = CTNode::root(seeds);
    run.register(&root);
    run.seen.insert(root.key());
    let mut open = OpenSet::default();
    open.push(root);
    let mut root_blocks = None;
    // per node, the constraints each agent has been re-routed for on its branch
    let mut detours: HashMap<usize, Vec<Vec<Constraint>>> = HashMap::new();

    loop {
        run.check_limits()?;
        let mut node = open.pop().ok_or(SolveError::Exhausted)?;
        run.evaluated += 1;
        let fps = footprints(&run.agents, &node.solution, run.net)?;
        if root_blocks.is_none() || run.trace.is_some() {
            let partition = validation_of(&to_graph_from_footprints(&fps), &run.ids()).partition;
            root_blocks.get_or_insert(partition.non_singleton_count());
            if let Some(t) = &mut run.trace {
                t.nodes[node.id - 1].partition = Some(partition.clone());
            }
            node.partition = Some(partition);
        }
        let Some(conflict) = earliest_conflict(&run.agents, &fps, outside) else {
            return Ok((node, root_blocks.unwrap_or(0)));
        };

        let detoured = detours.remove(&node.id).unwrap_or_else(|| vec![Vec::new(); node.solution.len()]);
        // (child, agent re-routed around a location)
        let mut children: Vec<(CTNode, Option<(usize, Constraint)>)> = Vec::with_capacity(4);
        let kind = match conflict {
            Conflict::Pair { a, b, ra, rb } => {
                let (ca, cb) = (Constraint::from(rb), Constraint::from(ra));
                let (ra_step, wa) = steps(&run.agents[a], &node.solution[a], &ca, &detoured[a], run.net)?;
                let (rb_step, wb) = steps(&run.agents[b], &node.solution[b], &cb, &detoured[b], run.net)?;
                let kind = ExpansionKind::Pair {
                    repath_a: ra_step.is_some(),
                    repath_b: rb_step.is_some(),
                };
                if let Some(p) = ra_step {
                    children.push((revised(&node, a, p), Some((a, ca))));
                }
                children.push((revised(&node, a, wa), None));
                if let Some(p) = rb_step {
                    children.push((revised(&node, b, p), Some((b, cb))));
                }
                children.push((revised(&node, b, wb), None));
                kind
            }
            Conflict::Outside { a, c } => {
                let (r, w) = steps(&run.agents[a], &node.solution[a], &c, &detoured[a], run.net)?;
                let kind = ExpansionKind::Outside { repath: r.is_some() };
                if let Some(p) = r {
                    children.push((revised(&node, a, p), Some((a, c))));
                }
                children.push((revised(&node, a, w), None));
                kind
            }
        };
        run.record_expansion(ExpansionRecord {
            node: node.id,
            kind,
            block_sizes: Vec::new(),
            children: children.len(),
            child_costs: children.iter().map(|(c, _)| c.cost).collect(),
            parent_cost: node.cost,
        });
        for (mut child, detour) in children {
            child.id = run.register(&child);
            if run.seen.insert(child.key()) {
                let mut d = detoured.clone();
                if let Some((i, c)) = detour {
                    d[i].push(c);
                }
                detours.insert(child.id, d);
                open.push(child);
            }
        }
    }
}

pub fn solve_xcbs(agents: &[SEAgent], net: &RoadNetwork, options: SolveOptions) -> Result<SolveReport, SolveError> {
    let mut run = Run::new(agents, net, options)?;
    let seeds = super::unconstrained_solution(&run.agents, net)?;
    let outside = vec![ConstraintSet::default(); seeds.len()];
    let (node, root_blocks) = search(&mut run, seeds, &outside)?;
    Ok(run.report("xcbs", node, root_blocks))
}

/// Jointly resolves one block, ignoring everyone else except what `outside`
/// imposes per member. Seeds that are already conflict-free come back
/// unchanged; otherwise the search starts from the members' unconstrained
/// plans, so the result does not depend on waits accumulated in the seeds.
/// Output follows the order of `members`.
pub fn block_level_search(
    members: &[SEAgent],
    seeds: &[Plan],
    outside: &[ConstraintSet],
    net: &RoadNetwork,
) -> Result<Vec<Plan>, SolveError> {
    let mut order: Vec<usize> = (0..members.len()).collect();
    order.sort_by_key(|&i| members[i].id);
    let options = SolveOptions {
        node_limit: Some(BLOCK_NODE_LIMIT),
        ..SolveOptions::default()
    };
    let mut run = Run::new(members, net, options)?;
    let sorted_seeds: Vec<Plan> = order.iter().map(|&i| seeds[i].clone()).collect();
    let sorted_outside: Vec<ConstraintSet> = order.iter().map(|&i| outside[i].clone()).collect();
    let fps = footprints(&run.agents, &sorted_seeds, net)?;
    if earliest_conflict(&run.agents, &fps, &sorted_outside).is_none() {
        return Ok(seeds.to_vec());
    }
    let root = super::unconstrained_solution(&run.agents, net)?;
    let (node, _) = search(&mut run, root, &sorted_outside)?;
    let mut out = vec![None; members.len()];
    for (plan, &i) in node.solution.into_iter().zip(&order) {
        out[i] = Some(plan);
    }
    Ok(out.into_iter().map(|p| p.expect("every member solved")).collect())
}
