use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::select::pick_weighted;
use crate::measures::MeasureTable;
use crate::model::{Cost, Instance};
use crate::schedule::{Evaluator, Insertion};
use crate::solution::{balances, solution_cost, Balance, BalanceRule, Solution};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Repair {
    Best,
    Regret2,
    Regret3,
    Regret4,
    Closeness,
}

impl Repair {
    pub const ALL: [Repair; 5] = [Repair::Best, Repair::Regret2, Repair::Regret3, Repair::Regret4, Repair::Closeness];

    pub fn name(self) -> &'static str {
        match self {
            Repair::Best => "best",
            Repair::Regret2 => "regret-2",
            Repair::Regret3 => "regret-3",
            Repair::Regret4 => "regret-4",
            Repair::Closeness => "closeness",
        }
    }

    fn regret_depth(self) -> Option<usize> {
        match self {
            Repair::Regret2 => Some(2),
            Repair::Regret3 => Some(3),
            Repair::Regret4 => Some(4),
            _ => None,
        }
    }
}

impl fmt::Display for Repair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `sum_{h=2..k} (c^h - c^1)` over ascending per-route deltas; missing
/// options cost `penalty`.
pub fn regret_value(sorted_deltas: &[Cost], k: usize, penalty: Cost) -> f64 {
    let Some(&first) = sorted_deltas.first() else { return 0.0 };
    (1..k).map(|h| (sorted_deltas.get(h).copied().unwrap_or(penalty) - first) as f64).sum()
}

#[derive(Clone, Copy, Debug)]
struct Cached {
    stamp: u64,
    insertion: Option<Insertion>,
}

/// Reusable insertion state; one per search thread.
#[derive(Debug, Default)]
pub struct Repairer {
    pub(crate) eval: Evaluator,
    cache: Vec<Option<Cached>>,
    stamps: Vec<u64>,
    next_stamp: u64,
}

impl Repairer {
    pub fn new() -> Self {
        Self::default()
    }

    fn refresh(&mut self, k: usize) {
        self.next_stamp += 1;
        self.stamps[k] = self.next_stamp;
    }

    fn insertion(&mut self, instance: &Instance, solution: &Solution, r: usize, k: usize) -> Option<Insertion> {
        let idx = r * instance.n_vehicles() + k;
        if let Some(c) = self.cache[idx] {
            if c.stamp == self.stamps[k] {
                return c.insertion;
            }
        }
        let insertion = self.eval.best_insertion(instance, &solution.routes[k], r);
        self.cache[idx] = Some(Cached { stamp: self.stamps[k], insertion });
        insertion
    }

    /// Reinserts every removed request. With `check_balance`, an unbalanced
    /// result gets rebalanced. Returns `false` when some
    /// request has no feasible position or the bounds stay violated; the
    /// solution is then left partially repaired.
    #[allow(clippy::too_many_arguments)]
    pub fn repair<R: Rng + ?Sized>(
        &mut self,
        op: Repair,
        instance: &Instance,
        table: &MeasureTable,
        rule: &BalanceRule,
        solution: &mut Solution,
        removed: &[usize],
        check_balance: bool,
        rng: &mut R,
    ) -> bool {
        let v = instance.n_vehicles();
        self.cache.clear();
        self.cache.resize(instance.n_requests() * v, None);
        self.stamps.resize(v, 0);
        for k in 0..v {
            self.refresh(k);
        }

        let mut pending: Vec<usize> = removed.to_vec();
        let mut in_solution = vec![true; instance.n_requests()];
        for &r in removed {
            in_solution[r] = false;
        }
        let mut options: Vec<Vec<(Cost, usize)>> = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        while !pending.is_empty() {
            options.clear();
            for &r in &pending {
                let mut opts = Vec::with_capacity(v);
                for k in 0..v {
                    if !rule.may_serve(instance, r, k) {
                        continue;
                    }
                    if let Some(ins) = self.insertion(instance, solution, r, k) {
                        opts.push((ins.delta, k));
                    }
                }
                if opts.is_empty() {
                    return false;
                }
                opts.sort_unstable();
                options.push(opts);
            }

            weights.clear();
            match op {
                Repair::Best => weights.resize(pending.len(), 1.0),
                Repair::Closeness => {
                    for &a in &pending {
                        let min_close = (0..instance.n_requests())
                            .filter(|&c| in_solution[c])
                            .map(|c| table.close_score(a, c))
                            .reduce(f64::min);
                        weights.push(min_close.map_or(1.0, |m| 1.0 / m.max(1.0)));
                    }
                }
                regret => {
                    let k = regret.regret_depth().expect("regret operator");
                    let penalty = 2 * (solution_cost(instance, solution) + instance.horizon);
                    let mut deltas = Vec::new();
                    for opts in &options {
                        deltas.clear();
                        deltas.extend(opts.iter().map(|o| o.0));
                        weights.push(regret_value(&deltas, k, penalty));
                    }
                }
            }
            let i = pick_weighted(&weights, rng).expect("pending is non-empty");
            let r = pending.swap_remove(i);
            let (_, k) = options[i][0];
            let ins = self.insertion(instance, solution, r, k).expect("cached option");
            solution.routes[k].insert(instance, r, ins.pickup_pos, ins.drop_pos);
            in_solution[r] = true;
            self.refresh(k);
        }
        !check_balance || self.rebalance(instance, rule, solution, removed)
    }

    /// Moves requests of `movable` to other vehicles while that strictly
    /// lowers the balance excess, each time taking the cheapest such move.
    /// Returns whether the bounds hold at the end.
    fn rebalance(&mut self, instance: &Instance, rule: &BalanceRule, solution: &mut Solution, movable: &[usize]) -> bool {
        let mut current = balances(instance, solution);
        let mut excess = rule.excess(&current);
        loop {
            if rule.admits(instance, &current) {
                return true;
            }
            let assignment = solution.assignment(instance);
            let mut best: Option<(Cost, f64, usize, usize)> = None;
            for &r in movable {
                let Some(from) = assignment[r] else { continue };
                let mut shorter = solution.routes[from].clone();
                shorter.remove_request(instance, r);
                if !self.eval.is_feasible(instance, from, &shorter.visits) {
                    continue;
                }
                let saving = solution.routes[from].cost(instance) - shorter.cost(instance);
                for k in 0..instance.n_vehicles() {
                    if k == from || !rule.may_serve(instance, r, k) {
                        continue;
                    }
                    let moved = shift_balance(instance, &current, r, from, k);
                    let e = rule.excess(&moved);
                    if e >= excess {
                        continue;
                    }
                    let Some(ins) = self.insertion(instance, solution, r, k) else { continue };
                    let delta = ins.delta - saving;
                    if best.map_or(true, |b| (delta, e) < (b.0, b.1)) {
                        best = Some((delta, e, r, k));
                    }
                }
            }
            let Some((_, e, r, k)) = best else { return false };
            let from = assignment[r].expect("movable requests are served");
            current = shift_balance(instance, &current, r, from, k);
            excess = e;
            solution.routes[from].remove_request(instance, r);
            let ins = self.insertion(instance, solution, r, k).expect("cached option");
            solution.routes[k].insert(instance, r, ins.pickup_pos, ins.drop_pos);
            self.refresh(from);
            self.refresh(k);
        }
    }

    /// Inserts `order` one request at a time at its cheapest position over all
    /// allowed vehicles, ties to the lowest vehicle index.
    pub fn insert_in_order(
        &mut self,
        instance: &Instance,
        rule: &BalanceRule,
        solution: &mut Solution,
        order: &[usize],
    ) -> bool {
        for &r in order {
            let mut best: Option<(Cost, usize, Insertion)> = None;
            for k in 0..instance.n_vehicles() {
                if !rule.may_serve(instance, r, k) {
                    continue;
                }
                if let Some(ins) = self.eval.best_insertion(instance, &solution.routes[k], r) {
                    if best.map_or(true, |b| ins.delta < b.0) {
                        best = Some((ins.delta, k, ins));
                    }
                }
            }
            let Some((_, k, ins)) = best else { return false };
            solution.routes[k].insert(instance, r, ins.pickup_pos, ins.drop_pos);
        }
        true
    }
}

/// Balances after request `r` moves from vehicle `from` to vehicle `to`.
fn shift_balance(instance: &Instance, balances: &[Balance], r: usize, from: usize, to: usize) -> Vec<Balance> {
    let mut out = balances.to_vec();
    let owner = instance.request_owner(r);
    let req = &instance.requests[r];
    for (vehicle, sign) in [(from, -1), (to, 1)] {
        let server = instance.vehicle_owner(vehicle);
        if server != owner {
            out[server].time += sign * req.direct_time;
            out[server].customers += sign * req.passengers as i64;
            out[owner].time -= sign * req.direct_time;
            out[owner].customers -= sign * req.passengers as i64;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alns::destroy::{destroy, Destroy};
    use crate::model::fixtures::*;
    use crate::model::{BalanceSpec, Mode};
    use crate::solution::check_solution;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn regret_arithmetic() {
        assert_eq!(regret_value(&[10, 100], 2, 1_000), 90.0);
        assert_eq!(regret_value(&[10, 12], 2, 1_000), 2.0);
        assert_eq!(regret_value(&[10, 12], 3, 1_000), 2.0 + 990.0);
        assert_eq!(regret_value(&[5], 4, 100), 3.0 * 95.0);
        let weights = [regret_value(&[10, 100], 2, 0), regret_value(&[10, 12], 2, 0)];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 46_000;
        let a = (0..n).filter(|_| pick_weighted(&weights, &mut rng) == Some(0)).count();
        assert!((a as f64 / n as f64 - 90.0 / 92.0).abs() < 0.005);
    }

    #[test]
    fn single_removed_request_goes_to_the_cheapest_slot() {
        let inst = line_instance(&[0, 50], &[(0, 3, 17), (1, 48, 30), (0, 46, 52)]);
        let table = MeasureTable::build(&inst);
        let rule = BalanceRule::new(&inst, &BalanceSpec::new(Mode::Uc)).unwrap();
        let mut base = Solution::empty(&inst);
        base.routes[0].visits = vec![inst.pickup(0), inst.drop_node(0)];
        base.routes[1].visits = vec![inst.pickup(1), inst.drop_node(1)];
        let deltas: Vec<Cost> =
            (0..2).map(|k| crate::schedule::try_insert(&inst, &base.routes[k], 2).unwrap().delta).collect();
        assert!(deltas[1] < deltas[0]);
        for op in Repair::ALL {
            let mut sol = base.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            assert!(Repairer::new().repair(op, &inst, &table, &rule, &mut sol, &[2], true, &mut rng));
            assert_eq!(sol.assignment(&inst)[2], Some(1), "{op}");
            assert_eq!(solution_cost(&inst, &sol), solution_cost(&inst, &base) + deltas[1]);
        }
    }

    #[test]
    fn nc_rule_keeps_requests_home() {
        let inst = line_instance(&[0, 50], &[(0, 48, 49), (1, 1, 2)]);
        let table = MeasureTable::build(&inst);
        let rule = BalanceRule::new(&inst, &BalanceSpec::new(Mode::Nc)).unwrap();
        let mut sol = Solution::empty(&inst);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(Repairer::new().repair(Repair::Best, &inst, &table, &rule, &mut sol, &[0, 1], true, &mut rng));
        assert_eq!(sol.assignment(&inst), vec![Some(0), Some(1)]);
    }

    #[test]
    fn unbalanced_result_is_moved_back_within_bounds() {
        let inst = line_instance(&[0, 50], &[(0, 48, 49), (1, 1, 2)]);
        let table = MeasureTable::build(&inst);
        let rule = BalanceRule::new(&inst, &BalanceSpec::with_alpha(Mode::T, 0.0)).unwrap();
        let mut sol = Solution::empty(&inst);
        sol.routes[1].visits = vec![inst.pickup(1), inst.drop_node(1)];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        // the cheap move hands request 0 to company 1 and breaks a zero threshold
        assert!(Repairer::new().repair(Repair::Best, &inst, &table, &rule, &mut sol, &[0], true, &mut rng));
        assert_eq!(sol.assignment(&inst), vec![Some(0), Some(1)]);
    }

    #[test]
    fn locked_imbalance_is_rejected() {
        let inst = line_instance(&[0, 50], &[(0, 48, 49), (1, 1, 2)]);
        let table = MeasureTable::build(&inst);
        let rule = BalanceRule::new(&inst, &BalanceSpec::with_alpha(Mode::T, 0.0)).unwrap();
        let mut locked = inst.clone();
        locked.requests[0].lock = crate::model::Lock::Denylist { companies: vec![locked.companies[0].id] };
        let mut sol = Solution::empty(&locked);
        sol.routes[1].visits = vec![locked.pickup(1), locked.drop_node(1)];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(!Repairer::new().repair(Repair::Best, &locked, &table, &rule, &mut sol, &[0], true, &mut rng));
    }

    #[test]
    fn round_trips_preserve_the_request_multiset() {
        let inst = line_instance(
            &[0, 50],
            &[(0, 3, 17), (1, 40, 30), (0, 8, 12), (1, 55, 20), (0, 1, 9), (1, 33, 44)],
        );
        let table = MeasureTable::build(&inst);
        let spec = BalanceSpec::new(Mode::Uc);
        let rule = BalanceRule::new(&inst, &spec).unwrap();
        let mut sol = Solution::empty(&inst);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut repairer = Repairer::new();
        assert!(repairer.repair(Repair::Regret2, &inst, &table, &rule, &mut sol, &[0, 1, 2, 3, 4, 5], true, &mut rng));
        for round in 0..300 {
            let d = Destroy::ALL[round % 6];
            let rp = Repair::ALL[round % 5];
            let before = sol.clone();
            let removed = destroy(d, &inst, &table, &mut sol, 1 + round % 4, &mut rng);
            if !repairer.repair(rp, &inst, &table, &rule, &mut sol, &removed, true, &mut rng) {
                sol = before;
            }
            assert!(check_solution(&inst, &sol, &spec).is_empty(), "round {round}");
            assert_eq!(sol.served_count(&inst), 6);
        }
    }
}
