//! Exhaustive exact solver for desk-scale instances.
//!
//! For every vehicle and every subset of the requests it may serve, the
//! cheapest feasible visiting order is found by depth-first enumeration of
//! pickup-before-drop sequences. Assignments of requests to vehicles are then
//! enumerated over that table and filtered by the mode's rules.

use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::model::{BalanceSpec, Cost, Instance, NodeId, Time};
use crate::schedule::{Evaluator, Route};
use crate::solution::{Balance, BalanceRule, Solution};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EnumerationBudget {
    pub max_requests: usize,
    pub max_vehicles: usize,
    /// Search nodes expanded over the whole route table.
    pub node_cap: u64,
    pub time_limit: Option<Duration>,
}

impl Default for EnumerationBudget {
    fn default() -> Self {
        EnumerationBudget { max_requests: 5, max_vehicles: 2, node_cap: 20_000_000, time_limit: None }
    }
}

impl EnumerationBudget {
    /// Room for two companies with up to five requests each.
    pub fn benchmark() -> Self {
        EnumerationBudget { max_requests: 10, max_vehicles: 2, node_cap: 200_000_000, time_limit: None }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExactSolution {
    pub solution: Solution,
    pub cost: Cost,
}

#[derive(Clone, Debug)]
struct Entry {
    cost: Cost,
    visits: Vec<NodeId>,
}

/// Route table for one instance, reusable across modes and thresholds.
#[derive(Debug)]
pub struct ExactSolver<'a> {
    inst: &'a Instance,
    metric: bool,
    /// `table[k][mask]`, `None` when the subset cannot be served by `k`.
    table: Vec<Vec<Option<Entry>>>,
    expanded: u64,
}

struct Search<'b> {
    inst: &'b Instance,
    vehicle: usize,
    metric: bool,
    budget: &'b EnumerationBudget,
    deadline: Option<Instant>,
    expanded: &'b mut u64,
    eval: Evaluator,
    seq: Vec<NodeId>,
    /// Per request: chain length and window close at its pickup.
    pick_chain: Vec<Time>,
    pick_latest: Vec<Time>,
    best: Option<Entry>,
    bound: Cost,
}

impl<'a> ExactSolver<'a> {
    pub fn new(inst: &'a Instance, budget: EnumerationBudget) -> Result<Self> {
        let (c, v) = (inst.n_requests(), inst.n_vehicles());
        if c > budget.max_requests || v > budget.max_vehicles || c >= 63 {
            return Err(Error::BudgetExceeded(format!(
                "{c} requests and {v} vehicles exceed the limit of {} and {}",
                budget.max_requests, budget.max_vehicles
            )));
        }
        let metric = inst.is_metric();
        let deadline = budget.time_limit.map(|d| Instant::now() + d);
        let mut expanded = 0;
        let mut table = Vec::with_capacity(v);
        for k in 0..v {
            let allowed: u64 = (0..c).filter(|&r| inst.lock_allows(r, k)).fold(0, |m, r| m | 1 << r);
            let mut rows: Vec<Option<Entry>> = vec![None; 1 << c];
            rows[0] = Some(Entry { cost: inst.c(inst.start_depot(k), inst.end_depot(k)), visits: Vec::new() });
            let mut search = Search {
                inst,
                vehicle: k,
                metric,
                budget: &budget,
                deadline,
                expanded: &mut expanded,
                eval: Evaluator::new(),
                seq: Vec::with_capacity(2 * c),
                pick_chain: vec![0; c],
                pick_latest: vec![0; c],
                best: None,
                bound: Cost::MAX,
            };
            for mask in 1u64..(1 << c) {
                if mask & !allowed != 0 {
                    continue;
                }
                if metric && (0..c).any(|r| mask >> r & 1 == 1 && rows[(mask & !(1 << r)) as usize].is_none()) {
                    continue;
                }
                rows[mask as usize] = search.best_order(mask)?;
            }
            table.push(rows);
        }
        Ok(ExactSolver { inst, metric, table, expanded })
    }

    /// Search nodes expanded while building the route table.
    pub fn expanded(&self) -> u64 {
        self.expanded
    }

    /// Cheapest visiting order for serving exactly `requests` with vehicle `k`.
    pub fn best_route(&self, k: usize, requests: &[usize]) -> Option<(Cost, Route)> {
        let mask = requests.iter().fold(0usize, |m, &r| m | 1 << r);
        self.table[k][mask]
            .as_ref()
            .map(|e| (e.cost, Route { vehicle: k, visits: e.visits.clone() }))
    }

    pub fn solve(&self, spec: &BalanceSpec) -> Result<ExactSolution> {
        let rule = BalanceRule::new(self.inst, spec)?;
        let inst = self.inst;
        let (c, v) = (inst.n_requests(), inst.n_vehicles());
        let options: Vec<Vec<usize>> =
            (0..c).map(|r| (0..v).filter(|&k| rule.may_serve(inst, r, k)).collect()).collect();
        if let Some(r) = options.iter().position(|o| o.is_empty()) {
            return Err(Error::Infeasible(format!("no vehicle may serve request {}", inst.requests[r].id)));
        }
        let mut state = Assign {
            solver: self,
            rule: &rule,
            options: &options,
            masks: vec![0; v],
            balances: vec![Balance::default(); inst.n_companies()],
            best: None,
        };
        state.recurse(0);
        match state.best {
            Some((cost, masks)) => {
                let routes = masks
                    .iter()
                    .enumerate()
                    .map(|(k, &m)| Route {
                        vehicle: k,
                        visits: self.table[k][m as usize].as_ref().expect("feasible").visits.clone(),
                    })
                    .collect();
                Ok(ExactSolution { solution: Solution { routes }, cost })
            }
            None => Err(Error::Infeasible(format!("no solution satisfies mode {}", spec.mode))),
        }
    }

    fn cost_of(&self, k: usize, mask: u64) -> Option<Cost> {
        self.table[k][mask as usize].as_ref().map(|e| e.cost)
    }
}

struct Assign<'s, 'a> {
    solver: &'s ExactSolver<'a>,
    rule: &'s BalanceRule,
    options: &'s [Vec<usize>],
    masks: Vec<u64>,
    balances: Vec<Balance>,
    best: Option<(Cost, Vec<u64>)>,
}

impl Assign<'_, '_> {
    fn partial_cost(&self) -> Option<Cost> {
        let mut total = 0;
        for (k, &m) in self.masks.iter().enumerate() {
            total += self.solver.cost_of(k, m)?;
        }
        Some(total)
    }

    fn recurse(&mut self, r: usize) {
        let inst = self.solver.inst;
        if self.solver.metric {
            // with the triangle inequality, costs and infeasibility only grow with the subset
            match self.partial_cost() {
                None => return,
                Some(cost) if self.best.as_ref().is_some_and(|b| cost >= b.0) => return,
                _ => {}
            }
        }
        if r == inst.n_requests() {
            let Some(cost) = self.partial_cost() else { return };
            if self.best.as_ref().is_some_and(|b| cost >= b.0) {
                return;
            }
            if self.rule.admits(inst, &self.balances) {
                self.best = Some((cost, self.masks.clone()));
            }
            return;
        }
        let owner = inst.request_owner(r);
        let req = &inst.requests[r];
        for &k in &self.options[r] {
            let server = inst.vehicle_owner(k);
            if server != owner {
                self.balances[server].time += req.direct_time;
                self.balances[server].customers += req.passengers as i64;
                self.balances[owner].time -= req.direct_time;
                self.balances[owner].customers -= req.passengers as i64;
            }
            self.masks[k] |= 1 << r;
            self.recurse(r + 1);
            self.masks[k] &= !(1 << r);
            if server != owner {
                self.balances[server].time -= req.direct_time;
                self.balances[server].customers -= req.passengers as i64;
                self.balances[owner].time += req.direct_time;
                self.balances[owner].customers += req.passengers as i64;
            }
        }
    }
}

impl Search<'_> {
    fn best_order(&mut self, mask: u64) -> Result<Option<Entry>> {
        self.best = None;
        self.bound = Cost::MAX;
        self.seq.clear();
        let start = self.inst.start_depot(self.vehicle);
        let begin = self.inst.nodes[start].window.earliest;
        self.dfs(mask, 0, start, begin, 0, 0, 0)?;
        Ok(self.best.take())
    }

    /// `time` is the earliest service start at `cur`, `chain` the least
    /// elapsed service and travel since leaving the depot.
    #[allow(clippy::too_many_arguments)]
    fn dfs(
        &mut self,
        pending: u64,
        onboard: u64,
        cur: NodeId,
        time: Time,
        chain: Time,
        cost: Cost,
        load: i64,
    ) -> Result<()> {
        let inst = self.inst;
        *self.expanded += 1;
        if *self.expanded > self.budget.node_cap {
            return Err(Error::BudgetExceeded(format!("more than {} search nodes", self.budget.node_cap)));
        }
        if *self.expanded % 4096 == 0 && self.deadline.is_some_and(|d| Instant::now() > d) {
            return Err(Error::BudgetExceeded("time limit reached".into()));
        }
        let end = inst.end_depot(self.vehicle);
        let leave = time + inst.nodes[cur].service;
        let lower = if self.metric { cost + inst.c(cur, end) } else { cost };
        if lower >= self.bound {
            return Ok(());
        }
        if pending == 0 && onboard == 0 {
            if self.eval.is_feasible(inst, self.vehicle, &self.seq) {
                let total = cost + inst.c(cur, end);
                self.bound = total;
                self.best = Some(Entry { cost: total, visits: self.seq.clone() });
            }
            return Ok(());
        }
        let vehicle = &inst.vehicles[self.vehicle];
        if chain + inst.nodes[cur].service + inst.t(cur, end) > vehicle.max_duration {
            return Ok(());
        }
        if self.metric {
            // every remaining stop must still be reachable in its window
            for r in bits(pending) {
                if leave + inst.t(cur, inst.pickup(r)) > inst.nodes[inst.pickup(r)].window.latest {
                    return Ok(());
                }
            }
            for r in bits(pending | onboard) {
                let d = inst.drop_node(r);
                if leave + inst.t(cur, d) > inst.nodes[d].window.latest {
                    return Ok(());
                }
            }
        }

        // pickups precede drops in node numbering, so this is lexicographic
        let mut next: Vec<(NodeId, usize, bool)> = bits(pending)
            .map(|r| (inst.pickup(r), r, true))
            .chain(bits(onboard).map(|r| (inst.drop_node(r), r, false)))
            .collect();
        next.sort_unstable();
        for (node, r, is_pickup) in next {
            let n = &inst.nodes[node];
            let arrival = leave + inst.t(cur, node);
            if arrival > n.window.latest {
                continue;
            }
            let start = arrival.max(n.window.earliest);
            let reach = chain + inst.nodes[cur].service + inst.t(cur, node);
            let step_cost = cost + inst.c(cur, node);
            self.seq.push(node);
            if is_pickup {
                if load + n.flow <= vehicle.capacity as i64 {
                    self.pick_chain[r] = reach;
                    self.pick_latest[r] = n.window.latest;
                    self.dfs(pending & !(1 << r), onboard | 1 << r, node, start, reach, step_cost, load + n.flow)?;
                }
            } else {
                let s_o = inst.nodes[inst.pickup(r)].service;
                let ride_floor = (reach - self.pick_chain[r] - s_o).max(start - self.pick_latest[r] - s_o);
                if ride_floor <= inst.requests[r].max_ride {
                    self.dfs(pending, onboard & !(1 << r), node, start, reach, step_cost, load + n.flow)?;
                }
            }
            self.seq.pop();
        }
        Ok(())
    }
}

fn bits(mask: u64) -> impl Iterator<Item = usize> {
    (0..64).filter(move |&i| mask >> i & 1 == 1)
}

/// One-shot exact solve.
pub fn solve_exact(inst: &Instance, spec: &BalanceSpec, budget: EnumerationBudget) -> Result<ExactSolution> {
    ExactSolver::new(inst, budget)?.solve(spec)
}
