//! Whole-coalition solutions: coverage, lock and mode rules, cost and balances.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{
    compute_thresholds, BalanceOffset, BalanceSpec, Cost, Instance, Mode, Threshold, Time, Violation,
    THRESHOLD_EPS,
};
use crate::schedule::{check_structure, Evaluator, Route};

/// One route per vehicle, indexed like `instance.vehicles`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Solution {
    pub routes: Vec<Route>,
}

impl Solution {
    pub fn empty(instance: &Instance) -> Self {
        Solution { routes: (0..instance.n_vehicles()).map(Route::empty).collect() }
    }

    /// Vehicle index serving each request, `None` when unserved.
    pub fn assignment(&self, instance: &Instance) -> Vec<Option<usize>> {
        let mut out = vec![None; instance.n_requests()];
        for route in &self.routes {
            for r in route.requests(instance) {
                out[r] = Some(route.vehicle);
            }
        }
        out
    }

    pub fn served_count(&self, instance: &Instance) -> usize {
        self.routes.iter().map(|r| r.requests(instance).count()).sum()
    }

    pub fn remove_request(&mut self, instance: &Instance, r: usize) {
        for route in &mut self.routes {
            route.remove_request(instance, r);
        }
    }
}

/// Per-company time balance `S_m` and customer balance `U_m`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Balance {
    pub time: Time,
    pub customers: i64,
}

/// Sum of arc costs over all routes, depot legs included.
pub fn solution_cost(instance: &Instance, solution: &Solution) -> Cost {
    solution.routes.iter().map(|r| r.cost(instance)).sum()
}

/// Acquired minus conceded direct times and passengers, per company index.
pub fn balances(instance: &Instance, solution: &Solution) -> Vec<Balance> {
    let mut out = vec![Balance::default(); instance.n_companies()];
    for route in &solution.routes {
        let server = instance.vehicle_owner(route.vehicle);
        for r in route.requests(instance) {
            let owner = instance.request_owner(r);
            if owner == server {
                continue;
            }
            let req = &instance.requests[r];
            out[server].time += req.direct_time;
            out[server].customers += req.passengers as i64;
            out[owner].time -= req.direct_time;
            out[owner].customers -= req.passengers as i64;
        }
    }
    out
}

/// Mode, thresholds and offsets resolved against one instance.
#[derive(Clone, Debug, PartialEq)]
pub struct BalanceRule {
    pub mode: Mode,
    pub thresholds: Vec<Threshold>,
    pub offsets: Vec<BalanceOffset>,
}

impl BalanceRule {
    pub fn new(instance: &Instance, spec: &BalanceSpec) -> Result<Self> {
        Ok(BalanceRule {
            mode: spec.mode,
            thresholds: compute_thresholds(instance, spec)?,
            offsets: instance.companies.iter().map(|c| spec.offset(c.id)).collect(),
        })
    }

    /// A rule with the same thresholds but a different mode.
    pub fn with_mode(&self, mode: Mode) -> Self {
        BalanceRule { mode, ..self.clone() }
    }

    /// Whether vehicle `k` may serve request `r` under locks and the mode.
    pub fn may_serve(&self, instance: &Instance, r: usize, k: usize) -> bool {
        instance.lock_allows(r, k)
            && (self.mode != Mode::Nc || instance.vehicle_owner(k) == instance.request_owner(r))
    }

    pub fn balance_violations(&self, instance: &Instance, balances: &[Balance]) -> Vec<Violation> {
        let mut out = Vec::new();
        for (m, b) in balances.iter().enumerate() {
            let id = instance.companies[m].id;
            let th = self.thresholds[m];
            let off = self.offsets[m];
            if self.mode.bounds_time() {
                let shifted = (b.time + off.time).abs();
                if shifted as f64 > th.time + THRESHOLD_EPS {
                    out.push(Violation {
                        subject: format!("time balance company {id}"),
                        message: format!("{shifted} > {}", th.time),
                    });
                }
            }
            if self.mode.bounds_customers() {
                let shifted = (b.customers + off.customers).abs();
                if shifted > th.customers {
                    out.push(Violation {
                        subject: format!("customer balance company {id}"),
                        message: format!("{shifted} > {}", th.customers),
                    });
                }
            }
        }
        out
    }

    pub fn admits(&self, instance: &Instance, balances: &[Balance]) -> bool {
        if !self.mode.is_balanced() {
            return true;
        }
        balances.iter().enumerate().all(|(m, b)| {
            let th = self.thresholds[m];
            let off = self.offsets[m];
            (!self.mode.bounds_time() || ((b.time + off.time).abs() as f64) <= th.time + THRESHOLD_EPS)
                && (!self.mode.bounds_customers() || (b.customers + off.customers).abs() <= th.customers)
        }) && balances.len() == instance.n_companies()
    }

    /// Total amount by which balances exceed their bounds.
    pub fn excess(&self, balances: &[Balance]) -> f64 {
        let mut total = 0.0;
        for (m, b) in balances.iter().enumerate() {
            let th = self.thresholds[m];
            let off = self.offsets[m];
            if self.mode.bounds_time() {
                total += (((b.time + off.time).abs() as f64) - th.time).max(0.0);
            }
            if self.mode.bounds_customers() {
                total += ((b.customers + off.customers).abs() - th.customers).max(0) as f64;
            }
        }
        total
    }
}

/// Lists every violated routing, coverage, lock, mode and balance rule.
pub fn check_solution(instance: &Instance, solution: &Solution, spec: &BalanceSpec) -> Vec<Violation> {
    match BalanceRule::new(instance, spec) {
        Ok(rule) => check_solution_with(instance, solution, &rule, &mut Evaluator::new()),
        Err(e) => vec![Violation { subject: "balance spec".into(), message: e.to_string() }],
    }
}

pub fn check_solution_with(
    instance: &Instance,
    solution: &Solution,
    rule: &BalanceRule,
    evaluator: &mut Evaluator,
) -> Vec<Violation> {
    let mut out = Vec::new();
    if solution.routes.len() != instance.n_vehicles() {
        out.push(Violation {
            subject: "solution".into(),
            message: format!(
                "{} routes for {} vehicles",
                solution.routes.len(),
                instance.n_vehicles()
            ),
        });
        return out;
    }

    let mut served = vec![0usize; instance.n_requests()];
    let mut structurally_sound = true;
    for (k, route) in solution.routes.iter().enumerate() {
        let vid = instance.vehicles[k].id;
        if route.vehicle != k {
            out.push(Violation {
                subject: format!("route {k}"),
                message: format!("belongs to vehicle index {}", route.vehicle),
            });
            structurally_sound = false;
            continue;
        }
        if let Err(e) = check_structure(instance, &route.visits) {
            out.push(Violation { subject: format!("vehicle {vid}"), message: e.to_string() });
            structurally_sound = false;
            continue;
        }
        if let Err(e) = evaluator.schedule(instance, route) {
            out.push(Violation { subject: format!("vehicle {vid}"), message: e.to_string() });
        }
        for r in route.requests(instance) {
            served[r] += 1;
            let rid = instance.requests[r].id;
            if !instance.lock_allows(r, k) {
                out.push(Violation {
                    subject: format!("request {rid}"),
                    message: format!("lock forbids vehicle {vid}"),
                });
            }
            if rule.mode == Mode::Nc && instance.vehicle_owner(k) != instance.request_owner(r) {
                out.push(Violation {
                    subject: format!("request {rid}"),
                    message: format!("served by foreign vehicle {vid} in NC mode"),
                });
            }
        }
    }
    for (r, &count) in served.iter().enumerate() {
        if count != 1 {
            out.push(Violation {
                subject: format!("request {}", instance.requests[r].id),
                message: format!("served {count} times"),
            });
        }
    }
    if structurally_sound {
        out.extend(rule.balance_violations(instance, &balances(instance, solution)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::*;
    use crate::model::{ExplicitThreshold, Lock};

    fn served(inst: &Instance, assignment: &[(usize, Vec<usize>)]) -> Solution {
        let mut sol = Solution::empty(inst);
        for (k, reqs) in assignment {
            for &r in reqs {
                sol.routes[*k].visits.push(inst.pickup(r));
                sol.routes[*k].visits.push(inst.drop_node(r));
            }
        }
        sol
    }

    #[test]
    fn idle_fleet_costs_depot_legs() {
        let inst = line_instance(&[0, 50], &[]);
        let sol = Solution::empty(&inst);
        let expected: Cost = (0..2).map(|k| inst.c(inst.start_depot(k), inst.end_depot(k))).sum();
        assert_eq!(solution_cost(&inst, &sol), expected);
        assert_eq!(expected, 0);
    }

    #[test]
    fn cost_is_arc_sum() {
        // depot 0, o at 10, d at 30: arcs 10, 20, 30
        let inst = line_instance(&[0], &[(0, 10, 30)]);
        let sol = served(&inst, &[(0, vec![0])]);
        assert_eq!(solution_cost(&inst, &sol), 60);
    }

    #[test]
    fn nc_solution_has_zero_balances_and_passes_uc() {
        let inst = line_instance(&[0, 100], &[(0, 10, 30), (1, 90, 70)]);
        let sol = served(&inst, &[(0, vec![0]), (1, vec![1])]);
        assert!(balances(&inst, &sol).iter().all(|b| *b == Balance::default()));
        assert!(check_solution(&inst, &sol, &BalanceSpec::new(Mode::Nc)).is_empty());
        assert!(check_solution(&inst, &sol, &BalanceSpec::new(Mode::Uc)).is_empty());
    }

    #[test]
    fn exchange_balances() {
        // company 0 acquires request 2 (t=500) and concedes request 0 (t=200)
        let inst = line_instance(&[0, 0], &[(0, 0, 200), (0, 0, 50), (1, 0, 500)]);
        let sol = served(&inst, &[(0, vec![1, 2]), (1, vec![0])]);
        let b = balances(&inst, &sol);
        assert_eq!(b[0], Balance { time: 300, customers: 0 });
        assert_eq!(b[1], Balance { time: -300, customers: 0 });
    }

    #[test]
    fn time_balance_violation_message() {
        let mut inst = line_instance(&[0, 0], &[(0, 0, 100), (1, 0, 400)]);
        inst.companies[0].id = 1;
        inst.companies[1].id = 2;
        let sol = served(&inst, &[(0, vec![0, 1])]);
        let mut spec = BalanceSpec::new(Mode::T);
        spec.explicit.insert(1, ExplicitThreshold { time: Some(300.0), customers: None });
        spec.explicit.insert(2, ExplicitThreshold { time: Some(1000.0), customers: None });
        let report = check_solution(&inst, &sol, &spec);
        assert_eq!(report.len(), 1);
        assert_eq!(report[0].to_string(), "time balance company 1: 400 > 300");
    }

    #[test]
    fn offsets_shift_the_balance() {
        let inst = line_instance(&[0, 0], &[(0, 0, 100), (1, 0, 400)]);
        let sol = served(&inst, &[(0, vec![0, 1])]);
        let mut spec = BalanceSpec::new(Mode::Tc);
        for id in [0, 1] {
            spec.explicit.insert(id, ExplicitThreshold { time: Some(400.0), customers: Some(1) });
        }
        assert!(check_solution(&inst, &sol, &spec).is_empty());
        spec.offsets.insert(0, BalanceOffset { time: 1, customers: 0 });
        let report = check_solution(&inst, &sol, &spec);
        assert_eq!(report.len(), 1, "{report:?}");
        assert_eq!(report[0].to_string(), "time balance company 0: 401 > 400");
    }

    #[test]
    fn coverage_and_mode_rules() {
        let mut inst = line_instance(&[0, 100], &[(0, 10, 30), (1, 90, 70)]);
        let missing = served(&inst, &[(0, vec![0])]);
        assert_eq!(check_solution(&inst, &missing, &BalanceSpec::new(Mode::Uc)).len(), 1);
        let foreign = served(&inst, &[(0, vec![0, 1])]);
        assert!(check_solution(&inst, &foreign, &BalanceSpec::new(Mode::Uc)).is_empty());
        assert_eq!(check_solution(&inst, &foreign, &BalanceSpec::new(Mode::Nc)).len(), 1);
        inst.requests[1].lock = Lock::MustStayWithOwner;
        assert_eq!(check_solution(&inst, &foreign, &BalanceSpec::new(Mode::Uc)).len(), 1);
    }
}
