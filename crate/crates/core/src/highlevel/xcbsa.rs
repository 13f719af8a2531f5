use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashMap};
use std::rc::Rc;

use super::{CTNode, ExpansionKind, ExpansionRecord, Heuristic, OpenSet, Run, SolveError, SolveOptions, SolveReport};
use crate::agents::{AgentId, Plan, SEAgent};
use crate::conflict::Partition;
use crate::lowlevel::derive_constraints;
use crate::planner::{PlanQuery, Planner};
use crate::roadnet::RoadNetwork;
use crate::units::Time;

/// A deferred child: enough to rebuild it from its parent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PotentialEntry {
    pub parent: usize,
    /// The revised agent of each non-singleton block, in block order.
    pub choice: Vec<AgentId>,
    pub cost: Time,
    pub depth: usize,
    pub largest_block: usize,
    pub singletons: usize,
}

struct Deferred {
    entry: PotentialEntry,
    score: usize,
    seq: u64,
}

impl PartialEq for Deferred {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Deferred {}

impl PartialOrd for Deferred {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Deferred {
    /// Greatest is best: cheapest, then highest score, then oldest.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .entry
            .cost
            .cmp(&self.entry.cost)
            .then(self.score.cmp(&other.score))
            .then(other.seq.cmp(&self.seq))
    }
}

fn score(h: Heuristic, e: &PotentialEntry) -> usize {
    match h {
        Heuristic::DeeperFirst => e.depth,
        Heuristic::LargestBlockFirst => e.largest_block,
        Heuristic::MostSingletonsFirst => e.singletons,
    }
}

fn query_for(agent: &SEAgent, node: &CTNode, agents: &[SEAgent], net: &RoadNetwork) -> Result<PlanQuery, SolveError> {
    let others: Vec<(&SEAgent, &Plan)> = agents
        .iter()
        .zip(&node.solution)
        .filter(|(a, _)| a.id != agent.id)
        .collect();
    let idx = agents.iter().position(|a| a.id == agent.id).expect("known agent");
    Ok(PlanQuery {
        agent: agent.id,
        constraints: derive_constraints(agent, &others, net)?,
        seed: Some(node.solution[idx].clone()),
        committed_to: Vec::new(),
    })
}

/// Replans every listed agent against all other agents' plans in `node`.
fn revise(
    run: &mut Run,
    node: &CTNode,
    members: &[AgentId],
    planner: &dyn Planner,
) -> Result<BTreeMap<AgentId, Plan>, SolveError> {
    let queries = members
        .iter()
        .map(|id| query_for(&run.agents[run.index_of(*id)], node, &run.agents, run.net))
        .collect::<Result<Vec<_>, _>>()?;
    run.plan_requests += queries.len();
    let plans = planner.plan_batch(&queries)?;
    Ok(members.iter().copied().zip(plans).collect())
}

fn child_of(run: &Run, node: &CTNode, revised: &[(AgentId, &Plan)]) -> CTNode {
    let mut solution = node.solution.clone();
    let mut cost = node.cost;
    for (id, plan) in revised {
        let i = run.index_of(*id);
        cost = cost - solution[i].cost + plan.cost;
        solution[i] = (*plan).clone();
    }
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

/// Every way of picking one agent per block, first block varying slowest.
fn selections(blocks: &[&Vec<AgentId>]) -> Vec<Vec<AgentId>> {
    let mut out = vec![Vec::new()];
    for block in blocks {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                block.iter().map(move |a| {
                    let mut s = prefix.clone();
                    s.push(*a);
                    s
                })
            })
            .collect();
    }
    out
}

fn expand(
    run: &mut Run,
    node: &CTNode,
    partition: &Partition,
    planner: &dyn Planner,
) -> Result<Vec<(Vec<AgentId>, CTNode)>, SolveError> {
    let blocks: Vec<&Vec<AgentId>> = partition.non_singleton().collect();
    let members: Vec<AgentId> = blocks.iter().flat_map(|b| b.iter().copied()).collect();
    let revised = revise(run, node, &members, planner)?;
    Ok(selections(&blocks)
        .into_iter()
        .map(|sel| {
            let picked: Vec<(AgentId, &Plan)> = sel.iter().map(|a| (*a, &revised[a])).collect();
            let child = child_of(run, node, &picked);
            (sel, child)
        })
        .collect())
}

/// Children of a conflicting node: one revised agent per non-singleton
/// block, all combinations. Child ids are left at zero.
pub fn resolve_conflict_xcbsa(
    node: &CTNode,
    partition: &Partition,
    agents: &[SEAgent],
    net: &RoadNetwork,
    planner: &dyn Planner,
) -> Result<Vec<CTNode>, SolveError> {
    let mut run = Run::new(agents, net, SolveOptions::default())?;
    Ok(expand(&mut run, node, partition, planner)?
        .into_iter()
        .map(|(_, c)| c)
        .collect())
}

pub fn solve_xcbsa(
    agents: &[SEAgent],
    net: &RoadNetwork,
    planner: &dyn Planner,
    options: SolveOptions,
) -> Result<SolveReport, SolveError> {
    search(agents, net, planner, None, options)
}

pub fn solve_xcbsa_eff(
    agents: &[SEAgent],
    net: &RoadNetwork,
    planner: &dyn Planner,
    heuristic: Heuristic,
    options: SolveOptions,
) -> Result<SolveReport, SolveError> {
    search(agents, net, planner, Some(heuristic), options)
}

fn regenerate(run: &mut Run, parent: &CTNode, entry: &PotentialEntry, planner: &dyn Planner) -> Result<CTNode, SolveError> {
    let revised = revise(run, parent, &entry.choice, planner)?;
    let picked: Vec<(AgentId, &Plan)> = revised.iter().map(|(a, p)| (*a, p)).collect();
    let child = child_of(run, parent, &picked);
    if child.cost != entry.cost {
        return Err(SolveError::Regeneration {
            parent: parent.id,
            expected: entry.cost,
            found: child.cost,
        });
    }
    Ok(child)
}

fn search(
    agents: &[SEAgent],
    net: &RoadNetwork,
    planner: &dyn Planner,
    eff: Option<Heuristic>,
    options: SolveOptions,
) -> Result<SolveReport, SolveError> {
    let name = if eff.is_some() { "xcbs-a-eff" } else { "xcbs-a" };
    let mut run = Run::new(agents, net, options)?;
    let mut open = OpenSet::default();
    open.push(run.root()?);
    let mut potential: BinaryHeap<Deferred> = BinaryHeap::new();
    let mut parents: HashMap<usize, Rc<CTNode>> = HashMap::new();
    let mut deferred_seq = 0u64;
    let mut root_blocks = None;

    loop {
        run.check_limits()?;
        let from_potential = match (potential.peek(), open.peek_cost()) {
            (Some(p), Some(o)) => p.entry.cost < o,
            (Some(_), None) => true,
            _ => false,
        };
        let mut node = if from_potential {
            let d = potential.pop().expect("peeked");
            let parent = Rc::clone(&parents[&d.entry.parent]);
            let mut child = regenerate(&mut run, &parent, &d.entry, planner)?;
            if let Some(t) = &mut run.trace {
                t.materialized += 1;
            }
            child.id = run.register(&child);
            if !run.seen.insert(child.key()) {
                continue;
            }
            child
        } else {
            open.pop().ok_or(SolveError::Exhausted)?
        };

        let validation = run.evaluate(&mut node)?;
        let root_blocks = *root_blocks.get_or_insert(validation.partition.non_singleton_count());
        if !validation.has_conflict {
            return Ok(run.report(name, node, root_blocks));
        }

        let partition = validation.partition;
        let children = expand(&mut run, &node, &partition, planner)?;
        run.record_expansion(ExpansionRecord {
            node: node.id,
            kind: ExpansionKind::Product,
            block_sizes: partition.non_singleton().map(Vec::len).collect(),
            children: children.len(),
            child_costs: children.iter().map(|(_, c)| c.cost).collect(),
            parent_cost: node.cost,
        });

        let Some(h) = eff else {
            for (_, mut child) in children {
                child.id = run.register(&child);
                if run.seen.insert(child.key()) {
                    open.push(child);
                }
            }
            continue;
        };

        let best = children
            .iter()
            .enumerate()
            .min_by_key(|(i, (_, c))| (c.cost, *i))
            .map(|(i, _)| i)
            .expect("a conflicting node has children");
        let largest_block = partition.largest_block();
        let singletons = partition.singleton_count();
        let mut kept_parent = false;
        for (i, (choice, mut child)) in children.into_iter().enumerate() {
            if i == best {
                child.id = run.register(&child);
                if run.seen.insert(child.key()) {
                    open.push(child);
                }
                continue;
            }
            kept_parent = true;
            deferred_seq += 1;
            if let Some(t) = &mut run.trace {
                t.deferred += 1;
            }
            let entry = PotentialEntry {
                parent: node.id,
                choice,
                cost: child.cost,
                depth: child.depth,
                largest_block,
                singletons,
            };
            potential.push(Deferred {
                score: score(h, &entry),
                entry,
                seq: deferred_seq,
            });
        }
        if kept_parent {
            parents.insert(node.id, Rc::new(node));
        }
    }
}
