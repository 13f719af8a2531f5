use std::collections::BTreeSet;

use super::{Commitment, CTNode, ExpansionKind, ExpansionRecord, OpenSet, Run, SolveError, SolveOptions, SolveReport};
use crate::agents::{AgentId, Plan, SEAgent};
use crate::conflict::{solution_footprints, Partition};
use crate::lowlevel::derive_constraints;
use crate::planner::{BlockQuery, Planner};
use crate::roadnet::RoadNetwork;

/// Non-singleton blocks, each grown by the commitment partners of its
/// members, with overlapping groups joined.
pub fn merge_committed_blocks(partition: &Partition, commitments: &BTreeSet<Commitment>) -> Vec<Vec<AgentId>> {
    let mut groups: Vec<BTreeSet<AgentId>> = Vec::new();
    for block in partition.non_singleton() {
        let mut g: BTreeSet<AgentId> = block.iter().copied().collect();
        for a in block {
            g.extend(partners(*a, commitments));
        }
        // fold in every earlier group that shares an agent
        let (joined, rest): (Vec<_>, Vec<_>) = groups.into_iter().partition(|h| !h.is_disjoint(&g));
        for h in joined {
            g.extend(h);
        }
        groups = rest;
        groups.push(g);
    }
    Partition::from_groups(groups.into_iter().map(|g| g.into_iter().collect()).collect()).blocks
}

/// Everyone reachable from `a` along commitments.
fn partners(a: AgentId, commitments: &BTreeSet<Commitment>) -> BTreeSet<AgentId> {
    let mut seen = BTreeSet::new();
    let mut stack = vec![a];
    while let Some(x) = stack.pop() {
        for (_, y) in commitments.range((x, AgentId(0))..=(x, AgentId(u32::MAX))) {
            if *y != a && seen.insert(*y) {
                stack.push(*y);
            }
        }
    }
    seen
}

fn block_query(run: &Run, node: &CTNode, block: &[AgentId]) -> Result<BlockQuery, SolveError> {
    let mut seeds = Vec::with_capacity(block.len());
    let mut outside = Vec::with_capacity(block.len());
    for id in block {
        let agent = &run.agents[run.index_of(*id)];
        seeds.push(node.solution[run.index_of(*id)].clone());
        let others: Vec<(&SEAgent, &Plan)> = partners(*id, &node.commitments)
            .into_iter()
            .filter(|p| !block.contains(p))
            .map(|p| {
                let i = run.index_of(p);
                (&run.agents[i], &node.solution[i])
            })
            .collect();
        outside.push(derive_constraints(agent, &others, run.net)?);
    }
    Ok(BlockQuery {
        members: block.to_vec(),
        seeds,
        outside,
    })
}

/// Committed pairs that conflict in `node`.
fn broken_commitments(run: &Run, node: &CTNode) -> Result<usize, SolveError> {
    let fps = solution_footprints(&node.solution, &run.agents, run.net)?;
    Ok(node
        .commitments
        .iter()
        .filter(|(a, b)| a < b)
        .filter(|(a, b)| {
            let (fa, fb) = (&fps[run.index_of(*a)], &fps[run.index_of(*b)]);
            fa.iter().any(|x| {
                fb.iter()
                    .any(|y| x.location == y.location && x.interval.intersects(&y.interval))
            })
        })
        .count())
}

pub fn solve_xcbsla(
    agents: &[SEAgent],
    net: &RoadNetwork,
    planner: &dyn Planner,
    options: SolveOptions,
) -> Result<SolveReport, SolveError> {
    let mut run = Run::new(agents, net, options)?;
    let mut open = OpenSet::default();
    open.push(run.root()?);
    let mut root_blocks = None;

    loop {
        run.check_limits()?;
        let mut node = open.pop().ok_or(SolveError::Exhausted)?;
        let validation = run.evaluate(&mut node)?;
        if run.trace.is_some() {
            let broken = broken_commitments(&run, &node)?;
            if let Some(t) = &mut run.trace {
                t.commitment_violations += broken;
            }
        }
        let root_blocks = *root_blocks.get_or_insert(validation.partition.non_singleton_count());
        if !validation.has_conflict {
            return Ok(run.report("xcbs-la", node, root_blocks));
        }

        let blocks = merge_committed_blocks(&validation.partition, &node.commitments);
        let queries = blocks
            .iter()
            .map(|b| block_query(&run, &node, b))
            .collect::<Result<Vec<_>, _>>()?;
        run.plan_requests += queries.len();
        let joint = planner.solve_blocks(&queries)?;

        let mut children = Vec::new();
        for mask in 1usize..(1 << blocks.len()) {
            let mut child = CTNode {
                id: 0,
                solution: node.solution.clone(),
                cost: node.cost,
                parent: Some(node.id),
                depth: node.depth + 1,
                partition: None,
                commitments: node.commitments.clone(),
            };
            for (bi, block) in blocks.iter().enumerate() {
                if mask & (1 << bi) == 0 {
                    continue;
                }
                for (id, plan) in block.iter().zip(&joint[bi]) {
                    let i = run.index_of(*id);
                    child.cost = child.cost - child.solution[i].cost + plan.cost;
                    child.solution[i] = plan.clone();
                }
                for a in block {
                    for b in block {
                        if a != b {
                            child.commitments.insert((*a, *b));
                        }
                    }
                }
            }
            children.push(child);
        }
        run.record_expansion(ExpansionRecord {
            node: node.id,
            kind: ExpansionKind::Subsets,
            block_sizes: blocks.iter().map(Vec::len).collect(),
            children: children.len(),
            child_costs: children.iter().map(|c| c.cost).collect(),
            parent_cost: node.cost,
        });
        for mut child in children {
            child.id = run.register(&child);
            if run.seen.insert(child.key()) {
                open.push(child);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(v: &[u32]) -> Vec<AgentId> {
        v.iter().map(|i| AgentId(*i)).collect()
    }

    #[test]
    fn committed_blocks_merge() {
        let p = Partition::from_groups(vec![ids(&[1, 2]), ids(&[3, 4]), ids(&[5, 6]), ids(&[7])]);
        let mut c = BTreeSet::new();
        assert_eq!(merge_committed_blocks(&p, &c).len(), 3);
        c.insert((AgentId(2), AgentId(3)));
        c.insert((AgentId(3), AgentId(2)));
        c.insert((AgentId(6), AgentId(7)));
        c.insert((AgentId(7), AgentId(6)));
        c.insert((AgentId(8), AgentId(9)));
        let m = merge_committed_blocks(&p, &c);
        assert_eq!(m, vec![ids(&[1, 2, 3, 4]), ids(&[5, 6, 7])]);
    }

    #[test]
    fn partner_closure_is_transitive() {
        let c: BTreeSet<Commitment> = [(1, 2), (2, 1), (2, 3), (3, 2)]
            .into_iter()
            .map(|(a, b)| (AgentId(a), AgentId(b)))
            .collect();
        assert_eq!(partners(AgentId(1), &c), ids(&[2, 3]).into_iter().collect());
        assert!(partners(AgentId(9), &c).is_empty());
    }
}
