//! Adaptive large neighbourhood search with simulated-annealing acceptance.

pub mod destroy;
pub mod repair;
pub mod select;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use destroy::{destroy, Destroy};
pub use repair::{Repair, Repairer};
pub use select::{resize_neighborhood, select_operator, OperatorState};

use crate::error::{Error, Result};
use crate::measures::MeasureTable;
use crate::model::{BalanceSpec, Cost, Instance, Mode};
use crate::solution::{balances, check_solution_with, solution_cost, BalanceRule, Solution};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlnsParams {
    pub t_max: f64,
    pub gamma: f64,
    /// Improvements between score refreshes.
    pub refresh: u32,
    pub q_min: usize,
    /// Defaults to `max(4, ceil(0.4 |C|))`.
    pub q_max: Option<usize>,
    /// Probability of shrinking the destruction degree each iteration.
    pub p_reduce: f64,
    /// Non-improving iterations before the destruction degree grows.
    pub enlarge_after: u32,
    pub score_init: f64,
    pub score_increment: f64,
    pub seed: u64,
    /// Compare candidates with the current solution instead of the incumbent.
    pub accept_vs_current: bool,
    /// Record the incumbent cost every this many iterations; 0 disables.
    pub trace_every: u64,
    pub destroy_ops: Vec<Destroy>,
    pub repair_ops: Vec<Repair>,
}

impl Default for AlnsParams {
    fn default() -> Self {
        AlnsParams {
            t_max: 1e4,
            gamma: 0.999,
            refresh: 50,
            q_min: 2,
            q_max: None,
            p_reduce: 0.05,
            enlarge_after: 20,
            score_init: 1.0,
            score_increment: 1.0,
            seed: 0,
            accept_vs_current: false,
            trace_every: 0,
            destroy_ops: Destroy::ALL.to_vec(),
            repair_ops: Repair::ALL.to_vec(),
        }
    }
}

impl AlnsParams {
    pub fn with_seed(seed: u64) -> Self {
        AlnsParams { seed, ..Self::default() }
    }

    /// Destruction bounds clamped to the number of requests.
    pub fn q_bounds(&self, n_requests: usize) -> (usize, usize) {
        let n = n_requests.max(1);
        let q_max = self.q_max.unwrap_or_else(|| 4.max((0.4 * n_requests as f64).ceil() as usize));
        let q_min = self.q_min.min(n);
        (q_min, q_max.clamp(q_min, n))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad(format!("gamma {} outside (0, 1)", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.p_reduce) {
            return bad(format!("p_reduce {} outside [0, 1]", self.p_reduce));
        }
        if self.q_min == 0 || self.q_max.is_some_and(|m| m < self.q_min) {
            return bad("need 1 <= q_min <= q_max".into());
        }
        if !(self.score_init > 0.0) || self.score_increment < 0.0 {
            return bad("scores must stay positive".into());
        }
        if self.destroy_ops.is_empty() || self.repair_ops.is_empty() {
            return bad("operator pools must be non-empty".into());
        }
        if !self.t_max.is_finite() {
            return bad("t_max must be finite".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub iterations: u64,
    pub improvements: u64,
    pub repair_failures: u64,
    pub destroy_hits: Vec<u64>,
    pub repair_hits: Vec<u64>,
    /// `(iteration, incumbent cost)` samples.
    pub trace: Vec<(u64, Cost)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlnsOutcome {
    pub best: Solution,
    pub cost: Cost,
    pub stats: RunStats,
}

/// Objective being minimized; the penalized form drives the search for a
/// balance-feasible start.
#[derive(Clone, Copy, Debug, PartialEq)]
enum Objective {
    Cost,
    Excess { weight: f64 },
}

struct Search<'a> {
    instance: &'a Instance,
    table: &'a MeasureTable,
    rule: &'a BalanceRule,
    params: &'a AlnsParams,
    objective: Objective,
}

impl Search<'_> {
    fn value(&self, solution: &Solution) -> f64 {
        let cost = solution_cost(self.instance, solution) as f64;
        match self.objective {
            Objective::Cost => cost,
            Objective::Excess { weight } => cost + weight * self.rule.excess(&balances(self.instance, solution)),
        }
    }

    fn run(&self, initial: Solution, stop_when_admitted: bool) -> (Solution, RunStats) {
        let inst = self.instance;
        let p = self.params;
        let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
        let mut repairer = Repairer::new();
        let check_balance = self.objective == Objective::Cost;
        let (q_min, q_max) = p.q_bounds(inst.n_requests());

        let mut x = initial;
        let mut fx = self.value(&x);
        let mut best = x.clone();
        let mut f_best = fx;
        let mut destroy_state = OperatorState::new(p.destroy_ops.len(), p.score_init);
        let mut repair_state = OperatorState::new(p.repair_ops.len(), p.score_init);
        let mut stats = RunStats::default();
        let (mut q, mut w, mut r) = (q_min, 0u32, 0u32);
        let mut temperature = p.t_max;

        if inst.n_requests() == 0 {
            return (best, finish(stats, destroy_state, repair_state));
        }
        if stop_when_admitted && self.rule.admits(inst, &balances(inst, &best)) {
            return (best, finish(stats, destroy_state, repair_state));
        }
        while temperature > 1.0 {
            stats.iterations += 1;
            (q, w) = resize_neighborhood(p.enlarge_after, w, q, q_min, q_max, p.p_reduce, &mut rng);
            let d = select_operator(&destroy_state, &mut rng);
            let rp = select_operator(&repair_state, &mut rng);

            let mut candidate = x.clone();
            let removed = destroy(p.destroy_ops[d], inst, self.table, &mut candidate, q, &mut rng);
            let repaired = repairer.repair(
                p.repair_ops[rp],
                inst,
                self.table,
                self.rule,
                &mut candidate,
                &removed,
                check_balance,
                &mut rng,
            );
            let (candidate, f_candidate) = if repaired {
                let f = self.value(&candidate);
                (candidate, f)
            } else {
                stats.repair_failures += 1;
                (x.clone(), fx)
            };

            if f_candidate >= f_best {
                w += 1;
            }
            let reference = if p.accept_vs_current { fx } else { f_best };
            let u: f64 = rng.gen();
            if u < ((reference - f_candidate) / temperature).exp() {
                let improved = f_candidate < f_best;
                x = candidate;
                fx = f_candidate;
                if improved {
                    best = x.clone();
                    f_best = fx;
                    stats.improvements += 1;
                    destroy_state.hits[d] += 1;
                    repair_state.hits[rp] += 1;
                    if r > p.refresh {
                        r = 0;
                        destroy_state.reset_scores();
                        repair_state.reset_scores();
                    } else {
                        destroy_state.reward(d, p.score_increment);
                        repair_state.reward(rp, p.score_increment);
                    }
                    r += 1;
                    if stop_when_admitted && self.rule.admits(inst, &balances(inst, &best)) {
                        break;
                    }
                }
            }
            temperature *= p.gamma;
            if p.trace_every > 0 && stats.iterations % p.trace_every == 0 {
                stats.trace.push((stats.iterations, solution_cost(inst, &best)));
            }
        }
        (best, finish(stats, destroy_state, repair_state))
    }
}

fn finish(mut stats: RunStats, destroy_state: OperatorState, repair_state: OperatorState) -> RunStats {
    stats.destroy_hits = destroy_state.hits;
    stats.repair_hits = repair_state.hits;
    stats
}

/// Improves a feasible solution; the initial solution must satisfy every rule
/// of the mode.
pub fn run_alns(
    instance: &Instance,
    table: &MeasureTable,
    spec: &BalanceSpec,
    params: &AlnsParams,
    initial: &Solution,
) -> Result<AlnsOutcome> {
    params.validate()?;
    let rule = BalanceRule::new(instance, spec)?;
    let violations = check_solution_with(instance, initial, &rule, &mut Repairer::new().eval);
    if let Some(v) = violations.first() {
        return Err(Error::InfeasibleStart { mode: spec.mode.to_string(), reason: v.to_string() });
    }
    let search = Search { instance, table, rule: &rule, params, objective: Objective::Cost };
    let (best, stats) = search.run(initial.clone(), false);
    Ok(AlnsOutcome { cost: solution_cost(instance, &best), best, stats })
}

/// Builds a complete solution obeying locks and the mode's routing rule,
/// ignoring balance bounds. Sequential cheapest insertion in request order is
/// tried first, then randomized repairs, then shuffled orders.
pub fn construct(
    instance: &Instance,
    table: &MeasureTable,
    spec: &BalanceSpec,
    seed: u64,
) -> Result<Solution> {
    let rule = BalanceRule::new(instance, spec)?;
    let all: Vec<usize> = (0..instance.n_requests()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut repairer = Repairer::new();
    let mut sol = Solution::empty(instance);
    if repairer.insert_in_order(instance, &rule, &mut sol, &all) {
        return Ok(sol);
    }
    const ATTEMPTS: usize = 50;
    for attempt in 0..ATTEMPTS {
        let op = Repair::ALL[attempt % Repair::ALL.len()];
        let mut sol = Solution::empty(instance);
        if repairer.repair(op, instance, table, &rule, &mut sol, &all, false, &mut rng) {
            return Ok(sol);
        }
    }
    let mut order = all;
    for _ in 0..ATTEMPTS {
        order.shuffle(&mut rng);
        let mut sol = Solution::empty(instance);
        if repairer.insert_in_order(instance, &rule, &mut sol, &order) {
            return Ok(sol);
        }
    }
    // every plan without collaboration is routing-feasible in the other modes
    if spec.mode != Mode::Nc {
        let home = rule.with_mode(Mode::Nc);
        let mut sol = Solution::empty(instance);
        if repairer.insert_in_order(instance, &home, &mut sol, &(0..instance.n_requests()).collect::<Vec<_>>()) {
            return Ok(sol);
        }
    }
    Err(Error::InfeasibleStart {
        mode: spec.mode.to_string(),
        reason: format!("insertion heuristics found no complete solution in {} attempts", 2 * ATTEMPTS + 1),
    })
}

/// Turns a routing-feasible solution into one that also meets the balance
/// bounds by searching on cost plus weighted bound excess.
pub fn restore_balance(
    instance: &Instance,
    table: &MeasureTable,
    spec: &BalanceSpec,
    params: &AlnsParams,
    start: Solution,
) -> Result<Solution> {
    let rule = BalanceRule::new(instance, spec)?;
    if rule.admits(instance, &balances(instance, &start)) {
        return Ok(start);
    }
    let weight = 10.0 * (instance.horizon as f64 + instance.max_travel() as f64) * instance.n_requests() as f64;
    let search = Search { instance, table, rule: &rule, params, objective: Objective::Excess { weight } };
    for round in 0..3u64 {
        let seeded = AlnsParams { seed: params.seed.wrapping_add(round), ..params.clone() };
        let search = Search { params: &seeded, ..search };
        let (best, _) = search.run(start.clone(), true);
        if rule.admits(instance, &balances(instance, &best)) {
            return Ok(best);
        }
    }
    Err(Error::InfeasibleStart {
        mode: spec.mode.to_string(),
        reason: "no balance-feasible solution found".into(),
    })
}

/// Feasible start for `spec`: `hint` when it qualifies, otherwise a fresh
/// construction repaired towards the balance bounds.
pub fn feasible_start(
    instance: &Instance,
    table: &MeasureTable,
    spec: &BalanceSpec,
    params: &AlnsParams,
    hint: Option<&Solution>,
) -> Result<Solution> {
    let rule = BalanceRule::new(instance, spec)?;
    let mut eval = Repairer::new().eval;
    if let Some(h) = hint {
        if check_solution_with(instance, h, &rule, &mut eval).is_empty() {
            return Ok(h.clone());
        }
    }
    let routed = match hint {
        Some(h) if check_solution_with(instance, h, &rule.with_mode(Mode::Uc), &mut eval).is_empty()
            && (spec.mode != Mode::Nc || check_solution_with(instance, h, &rule, &mut eval).is_empty()) =>
        {
            h.clone()
        }
        _ => construct(instance, table, spec, params.seed)?,
    };
    if rule.admits(instance, &balances(instance, &routed)) {
        return Ok(routed);
    }
    // without offsets a plan without collaboration has zero balances
    if spec.mode != Mode::Nc {
        let nc = BalanceSpec { mode: Mode::Nc, ..spec.clone() };
        if let Ok(home) = construct(instance, table, &nc, params.seed) {
            if rule.admits(instance, &balances(instance, &home)) {
                return Ok(home);
            }
        }
    }
    restore_balance(instance, table, spec, params, routed)
}

/// Construction followed by a full run.
pub fn solve_alns(
    instance: &Instance,
    table: &MeasureTable,
    spec: &BalanceSpec,
    params: &AlnsParams,
    hint: Option<&Solution>,
) -> Result<AlnsOutcome> {
    params.validate()?;
    let start = feasible_start(instance, table, spec, params, hint)?;
    run_alns(instance, table, spec, params, &start)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{generate_with, GeneratorParams};
    use crate::model::{BalanceOffset, CompanyId};
    use crate::oracle::{EnumerationBudget, ExactSolver};
    use crate::solution::check_solution;

    fn small(seed: u64) -> Instance {
        generate_with(&GeneratorParams { requests_per_company: vec![3], ..GeneratorParams::default() }, seed).unwrap()
    }

    #[test]
    fn q_bounds_defaults() {
        let p = AlnsParams::default();
        assert_eq!(p.q_bounds(8), (2, 4));
        assert_eq!(p.q_bounds(20), (2, 8));
        assert_eq!(p.q_bounds(3), (2, 3));
        assert_eq!(p.q_bounds(1), (1, 1));
    }

    #[test]
    fn cold_start_runs_zero_iterations() {
        let inst = small(1);
        let table = MeasureTable::build(&inst);
        let spec = BalanceSpec::new(Mode::Uc);
        let start = construct(&inst, &table, &spec, 0).unwrap();
        let params = AlnsParams { t_max: 0.5, ..AlnsParams::default() };
        let out = run_alns(&inst, &table, &spec, &params, &start).unwrap();
        assert_eq!(out.stats.iterations, 0);
        assert_eq!(out.best, start);
    }

    #[test]
    fn infeasible_start_is_rejected() {
        let inst = small(2);
        let table = MeasureTable::build(&inst);
        let empty = Solution::empty(&inst);
        let err = run_alns(&inst, &table, &BalanceSpec::new(Mode::Uc), &AlnsParams::default(), &empty);
        assert!(matches!(err, Err(Error::InfeasibleStart { .. })));
    }

    #[test]
    fn deterministic_per_seed() {
        let inst = small(3);
        let table = MeasureTable::build(&inst);
        let spec = BalanceSpec::with_alpha(Mode::T, 0.2);
        let params = AlnsParams { t_max: 200.0, gamma: 0.99, trace_every: 10, ..AlnsParams::with_seed(7) };
        let a = solve_alns(&inst, &table, &spec, &params, None).unwrap();
        let b = solve_alns(&inst, &table, &spec, &params, None).unwrap();
        assert_eq!(a, b);
        assert!(a.stats.trace.windows(2).all(|w| w[1].1 <= w[0].1));
        assert_eq!(a.stats.destroy_hits.iter().sum::<u64>(), a.stats.improvements);
        assert_eq!(a.stats.repair_hits.iter().sum::<u64>(), a.stats.improvements);
    }

    #[test]
    fn reaches_the_exact_optimum_on_small_instances() {
        let mut matched = 0;
        for seed in 0..6 {
            let inst = small(seed);
            let table = MeasureTable::build(&inst);
            let spec = BalanceSpec::new(Mode::Uc);
            let exact = ExactSolver::new(&inst, EnumerationBudget::benchmark()).unwrap().solve(&spec).unwrap();
            let out = solve_alns(&inst, &table, &spec, &AlnsParams::with_seed(seed), None).unwrap();
            assert!(check_solution(&inst, &out.best, &spec).is_empty());
            assert!(out.cost >= exact.cost);
            if out.cost == exact.cost {
                matched += 1;
            }
        }
        assert!(matched >= 5, "{matched}/6");
    }

    #[test]
    fn table_is_untouched_by_a_run() {
        let inst = small(4);
        let table = MeasureTable::build(&inst);
        let before = table.clone();
        let params = AlnsParams { t_max: 100.0, gamma: 0.98, ..AlnsParams::default() };
        solve_alns(&inst, &table, &BalanceSpec::new(Mode::Uc), &params, None).unwrap();
        assert_eq!(table, before);
        assert_eq!(MeasureTable::build(&inst), before);
    }

    #[test]
    fn offsets_force_a_balancing_start() {
        let inst = small(5);
        let table = MeasureTable::build(&inst);
        let mut spec = BalanceSpec::with_alpha(Mode::T, 0.3);
        // a credit on company 0 makes the no-exchange plan unbalanced
        let total: i64 = inst.requests_of(0).iter().map(|&r| inst.requests[r].direct_time).sum();
        let credit = (0.3 * total as f64) as i64 + 1;
        spec.offsets.insert(0 as CompanyId, BalanceOffset { time: credit, customers: 0 });
        spec.offsets.insert(1 as CompanyId, BalanceOffset { time: -credit, customers: 0 });
        let exact = ExactSolver::new(&inst, EnumerationBudget::benchmark()).unwrap().solve(&spec);
        let heuristic = solve_alns(&inst, &table, &spec, &AlnsParams::with_seed(1), None);
        match (exact, heuristic) {
            (Ok(e), Ok(h)) => {
                assert!(check_solution(&inst, &h.best, &spec).is_empty());
                assert!(h.cost >= e.cost);
            }
            (Err(_), Err(_)) => {}
            (e, h) => panic!("oracle {e:?} vs heuristic {h:?}"),
        }
    }
}
