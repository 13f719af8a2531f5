//! Pairwise conflict oracle: every pair of agents, every shared location,
//! interval intersection over the occupancy records.

#![allow(dead_code)]

use std::collections::BTreeMap;

use seapath_core::agents::occupancy;
use seapath_core::*;

pub fn conflicting_pairs(solution: &[Plan], agents: &[SEAgent], net: &RoadNetwork) -> Vec<(AgentId, AgentId)> {
    let fps: Vec<Vec<OccupancyRecord>> = agents
        .iter()
        .zip(solution)
        .map(|(a, p)| occupancy(p, a, net).expect("valid plan"))
        .collect();
    let mut out = Vec::new();
    for i in 0..agents.len() {
        for j in i + 1..agents.len() {
            let hit = fps[i].iter().any(|x| {
                fps[j].iter().any(|y| {
                    x.location == y.location
                        && x.interval.start < y.interval.end
                        && y.interval.start < x.interval.end
                })
            });
            if hit {
                out.push((agents[i].id, agents[j].id));
            }
        }
    }
    out
}

/// Connected components of the conflict graph, each sorted, in sorted order.
pub fn components(ids: &[AgentId], pairs: &[(AgentId, AgentId)]) -> Vec<Vec<AgentId>> {
    let mut label: BTreeMap<AgentId, usize> = ids.iter().enumerate().map(|(i, a)| (*a, i)).collect();
    // relabel until stable; the inputs are tiny
    loop {
        let mut changed = false;
        for (a, b) in pairs {
            let (la, lb) = (label[a], label[b]);
            if la != lb {
                let m = la.min(lb);
                for l in label.values_mut() {
                    if *l == la || *l == lb {
                        *l = m;
                    }
                }
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let mut groups: BTreeMap<usize, Vec<AgentId>> = BTreeMap::new();
    for (a, l) in label {
        groups.entry(l).or_default().push(a);
    }
    let mut out: Vec<Vec<AgentId>> = groups.into_values().collect();
    out.sort();
    out
}
