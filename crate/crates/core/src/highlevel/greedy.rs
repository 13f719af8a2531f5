use super::{CTNode, Run, SolveError, SolveOptions, SolveReport};
use crate::agents::{Plan, SEAgent};
use crate::lowlevel::derive_constraints;
use crate::planner::{PlanQuery, Planner};
use crate::roadnet::RoadNetwork;

/// Plans agents one at a time in id order, each yielding to all earlier ones.
pub fn solve_greedy(
    agents: &[SEAgent],
    net: &RoadNetwork,
    planner: &dyn Planner,
    options: SolveOptions,
) -> Result<SolveReport, SolveError> {
    let mut run = Run::new(agents, net, options)?;
    let root_blocks = super::validate_solution(&super::unconstrained_solution(&run.agents, net)?, &run.agents, net)?
        .partition
        .non_singleton_count();
    let mut solution: Vec<Plan> = Vec::with_capacity(run.agents.len());
    for (k, agent) in run.agents.iter().enumerate() {
        let earlier: Vec<(&SEAgent, &Plan)> = run.agents[..k].iter().zip(&solution).collect();
        let query = PlanQuery {
            agent: agent.id,
            constraints: derive_constraints(agent, &earlier, net)?,
            seed: None,
            committed_to: Vec::new(),
        };
        let plan = planner.plan_batch(std::slice::from_ref(&query))?.remove(0);
        solution.push(plan);
    }
    run.plan_requests = run.agents.len();
    let mut node = CTNode::root(solution);
    node.id = run.register(&node);
    let validation = run.evaluate(&mut node)?;
    if validation.has_conflict {
        return Err(SolveError::Exhausted);
    }
    Ok(run.report("greedy", node, root_blocks))
}
