//! Reference semantics for integral instances: every edge 10 long with speed
//! 5, agents at speed 5 with body length 5 or 10. All event times are then
//! whole units, so each unit step can be judged at its midpoint.
//!
//! Positions are in quarter edges: vertex `i` of a route sits at `4 * i`
//! and the head advances 2 per step. Midpoints are handled doubled, as the
//! sum of the head positions at both ends of the step.

#![allow(dead_code)]

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap};

use seapath_core::agents::{Itinerary, Plan, SEAgent};
use seapath_core::roadnet::{Location, RoadNetwork, VertexId};
use seapath_core::units::{Distance, Speed, Time};

pub fn is_integral(net: &RoadNetwork, agents: &[SEAgent]) -> bool {
    net.edges()
        .iter()
        .all(|e| e.length == Distance::from_units(10) && e.speed == Speed::from_units(5))
        && agents.iter().all(|a| {
            a.speed == Speed::from_units(5)
                && (a.length == Distance::from_units(5) || a.length == Distance::from_units(10))
        })
}

/// Body length in quarter edges.
fn body(agent: &SEAgent) -> i64 {
    agent.length.millis() / 2500
}

/// Locations under the body at the midpoint of a step. `verts[i]` sits at
/// `4 * (first + i)`; `sum` is the sum of head positions at both ends.
fn covered(agent: &SEAgent, net: &RoadNetwork, verts: &[VertexId], first: i64, sum: i64) -> Vec<Location> {
    let l2 = 2 * body(agent);
    let mut out = Vec::new();
    for (i, v) in verts.iter().enumerate() {
        let x2 = 8 * (first + i as i64);
        if *v != agent.initial && *v != agent.destination && sum >= x2 && sum - l2 < x2 {
            out.push(Location::Vertex(*v));
        }
        if let Some(w) = verts.get(i + 1) {
            if sum > x2 && sum - l2 < x2 + 8 {
                out.push(Location::Edge(net.edge_between(*v, *w).expect("adjacent")));
            }
        }
    }
    out
}

/// `(step, location)` for every unit step in which the body covers the
/// location, found by stepping the head along the plan.
pub fn simulate(plan: &Plan, agent: &SEAgent, net: &RoadNetwork) -> BTreeSet<(i64, Location)> {
    let it = Itinerary::from_plan(plan, agent, net).expect("valid plan");
    let mut heads = vec![0i64];
    for (k, w) in it.waits.iter().enumerate() {
        assert_eq!(w.millis() % 1000, 0, "integral waits only");
        for _ in 0..w.millis() / 1000 {
            heads.push(4 * k as i64);
        }
        heads.push(4 * k as i64 + 2);
        heads.push(4 * k as i64 + 4);
    }
    // keep moving past the destination until the tail is clear
    while heads.last().unwrap() - body(agent) < 4 * it.edges.len() as i64 {
        let h = *heads.last().unwrap();
        heads.push(h + 2);
    }
    let mut out = BTreeSet::new();
    for s in 0..heads.len() - 1 {
        for loc in covered(agent, net, &it.vertices, 0, heads[s] + heads[s + 1]) {
            out.insert((s as i64, loc));
        }
    }
    out
}

/// Canonical per-agent state between steps.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Ag {
    /// Last (up to) three route vertices, oldest first.
    tail: Vec<VertexId>,
    visited: u64,
    /// Head relative to the last tail vertex.
    rel: i64,
    arrived: bool,
    gone: bool,
}

struct Step {
    next: Ag,
    occ: Vec<Location>,
}

fn steps(agent: &SEAgent, net: &RoadNetwork, s: &Ag) -> Vec<Step> {
    if s.gone {
        return vec![Step { next: s.clone(), occ: vec![] }];
    }
    let first = -(s.tail.len() as i64 - 1);
    if s.arrived || s.rel < 0 {
        let rel = s.rel + 2;
        let occ = covered(agent, net, &s.tail, first, s.rel + rel);
        let next = if s.arrived {
            Ag { rel, gone: rel - body(agent) >= 0, ..s.clone() }
        } else {
            let arrived = rel == 0 && *s.tail.last().unwrap() == agent.destination;
            let gone = arrived && rel - body(agent) >= 0;
            Ag { rel, arrived, gone, ..s.clone() }
        };
        return vec![Step { next, occ }];
    }
    // head at a vertex: wait, or enter an unvisited neighbour
    let mut out = vec![Step {
        next: s.clone(),
        occ: covered(agent, net, &s.tail, first, 0),
    }];
    for (_, w) in net.neighbours(*s.tail.last().unwrap()) {
        if s.visited & (1u64 << w.0) != 0 {
            continue;
        }
        let mut verts = s.tail.clone();
        verts.push(*w);
        // relative to the new vertex the head moves from -4 to -2
        let occ = covered(agent, net, &verts, first - 1, -6);
        if verts.len() > 3 {
            verts.remove(0);
        }
        out.push(Step {
            next: Ag {
                tail: verts,
                visited: s.visited | (1u64 << w.0),
                rel: -2,
                arrived: false,
                gone: false,
            },
            occ,
        });
    }
    out
}

/// Minimum sum of arrival times over all joint plans made of simple routes
/// and whole-unit waits, or `None` if more than `state_limit` joint states
/// would have to be expanded.
pub fn joint_optimum(agents: &[SEAgent], net: &RoadNetwork, state_limit: usize) -> Option<Time> {
    assert!(is_integral(net, agents));
    assert!(net.vertex_count() <= 64);
    let start: Vec<Ag> = agents
        .iter()
        .map(|a| Ag {
            tail: vec![a.initial],
            visited: 1u64 << a.initial.0,
            rel: 0,
            arrived: false,
            gone: false,
        })
        .collect();
    let mut dist: HashMap<Vec<Ag>, i64> = HashMap::new();
    let mut heap = BinaryHeap::new();
    dist.insert(start.clone(), 0);
    heap.push(Reverse((0i64, start)));
    let mut expanded = 0;
    while let Some(Reverse((d, state))) = heap.pop() {
        if dist.get(&state).is_some_and(|best| *best < d) {
            continue;
        }
        if state.iter().all(|s| s.gone) {
            return Some(Time::from_units(d));
        }
        expanded += 1;
        if expanded > state_limit {
            return None;
        }
        let step_cost = state.iter().filter(|s| !s.arrived).count() as i64;
        let options: Vec<Vec<Step>> = agents.iter().zip(&state).map(|(a, s)| steps(a, net, s)).collect();
        let mut choice = vec![0usize; agents.len()];
        'product: loop {
            let clash = (0..agents.len()).any(|i| {
                (i + 1..agents.len()).any(|j| {
                    let (oi, oj) = (&options[i][choice[i]].occ, &options[j][choice[j]].occ);
                    oi.iter().any(|l| oj.contains(l))
                })
            });
            if !clash {
                let next: Vec<Ag> = (0..agents.len()).map(|i| options[i][choice[i]].next.clone()).collect();
                let nd = d + step_cost;
                if next != state && dist.get(&next).is_none_or(|best| nd < *best) {
                    dist.insert(next.clone(), nd);
                    heap.push(Reverse((nd, next)));
                }
            }
            for i in 0..agents.len() {
                choice[i] += 1;
                if choice[i] < options[i].len() {
                    continue 'product;
                }
                choice[i] = 0;
            }
            break;
        }
    }
    None
}
