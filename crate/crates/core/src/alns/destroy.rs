use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::select::pick_weighted;
use crate::measures::MeasureTable;
use crate::model::Instance;
use crate::solution::Solution;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Destroy {
    Random,
    Worst,
    Related,
    Proximity,
    Closeness,
    Interchangeability,
}

impl Destroy {
    pub const ALL: [Destroy; 6] = [
        Destroy::Random,
        Destroy::Worst,
        Destroy::Related,
        Destroy::Proximity,
        Destroy::Closeness,
        Destroy::Interchangeability,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Destroy::Random => "random",
            Destroy::Worst => "worst",
            Destroy::Related => "related",
            Destroy::Proximity => "proximity",
            Destroy::Closeness => "closeness",
            Destroy::Interchangeability => "interchangeability",
        }
    }
}

impl fmt::Display for Destroy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn served(instance: &Instance, solution: &Solution) -> Vec<usize> {
    let mut out: Vec<usize> = solution.routes.iter().flat_map(|r| r.requests(instance)).collect();
    out.sort_unstable();
    out
}

/// Removes `q` distinct served requests and returns them in removal order.
pub fn destroy<R: Rng + ?Sized>(
    op: Destroy,
    instance: &Instance,
    table: &MeasureTable,
    solution: &mut Solution,
    q: usize,
    rng: &mut R,
) -> Vec<usize> {
    let candidates = served(instance, solution);
    let q = q.min(candidates.len());
    if q == 0 {
        return Vec::new();
    }
    let removed = match op {
        Destroy::Random => {
            let weights = vec![1.0; candidates.len()];
            draw_distinct(&candidates, weights, q, rng)
        }
        Destroy::Worst => return worst(instance, solution, candidates, q, rng),
        Destroy::Related | Destroy::Closeness => {
            let seed = candidates[rng.gen_range(0..candidates.len())];
            let rest: Vec<usize> = candidates.iter().copied().filter(|&a| a != seed).collect();
            let weights = rest
                .iter()
                .map(|&a| {
                    let score = if op == Destroy::Related { table.rel(a, seed) } else { table.close_score(a, seed) };
                    score * score
                })
                .collect();
            let mut out = vec![seed];
            out.extend(draw_distinct(&rest, weights, q - 1, rng));
            out
        }
        Destroy::Proximity | Destroy::Interchangeability => {
            let weights = candidates
                .iter()
                .map(|&a| {
                    let score = if op == Destroy::Proximity {
                        table.proximity(instance, solution, a)
                    } else {
                        table.interchangeability(instance, solution, a)
                    };
                    score * score
                })
                .collect();
            draw_distinct(&candidates, weights, q, rng)
        }
    };
    for &r in &removed {
        solution.remove_request(instance, r);
    }
    removed
}

/// Weighted sampling without replacement.
fn draw_distinct<R: Rng + ?Sized>(items: &[usize], mut weights: Vec<f64>, q: usize, rng: &mut R) -> Vec<usize> {
    let mut items = items.to_vec();
    let mut out = Vec::with_capacity(q);
    while out.len() < q && !items.is_empty() {
        let i = pick_weighted(&weights, rng).expect("non-empty");
        out.push(items.swap_remove(i));
        weights.swap_remove(i);
    }
    out
}

/// Cost saved by splicing request `r` out of its route.
pub fn marginal_cost(instance: &Instance, solution: &Solution, r: usize) -> i64 {
    let (o, d) = (instance.pickup(r), instance.drop_node(r));
    for route in &solution.routes {
        if !route.visits.contains(&o) {
            continue;
        }
        let mut without = route.clone();
        without.visits.retain(|&n| n != o && n != d);
        return route.cost(instance) - without.cost(instance);
    }
    0
}

fn worst<R: Rng + ?Sized>(
    instance: &Instance,
    solution: &mut Solution,
    mut candidates: Vec<usize>,
    q: usize,
    rng: &mut R,
) -> Vec<usize> {
    let mut out = Vec::with_capacity(q);
    while out.len() < q {
        let weights: Vec<f64> = candidates
            .iter()
            .map(|&r| {
                let mc = marginal_cost(instance, solution, r).max(0) as f64;
                mc * mc
            })
            .collect();
        let i = pick_weighted(&weights, rng).expect("non-empty");
        let r = candidates.swap_remove(i);
        solution.remove_request(instance, r);
        out.push(r);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::*;
    use crate::model::TimeWindow;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn full_solution(inst: &Instance, routes: &[&[usize]]) -> Solution {
        let mut sol = Solution::empty(inst);
        for (k, reqs) in routes.iter().enumerate() {
            for &r in reqs.iter() {
                sol.routes[k].visits.push(inst.pickup(r));
                sol.routes[k].visits.push(inst.drop_node(r));
            }
        }
        sol
    }

    #[test]
    fn total_destruction_empties_every_route() {
        let inst = line_instance(&[0, 50], &[(0, 3, 17), (1, 40, 30), (0, 8, 12), (1, 55, 20)]);
        let table = MeasureTable::build(&inst);
        for op in Destroy::ALL {
            let mut sol = full_solution(&inst, &[&[0, 2], &[1, 3]]);
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let mut removed = destroy(op, &inst, &table, &mut sol, 4, &mut rng);
            removed.sort();
            assert_eq!(removed, vec![0, 1, 2, 3], "{op}");
            assert!(sol.routes.iter().all(|r| r.is_empty()));
        }
    }

    #[test]
    fn removes_exactly_q_distinct() {
        let inst = line_instance(&[0, 50], &[(0, 3, 17), (1, 40, 30), (0, 8, 12), (1, 55, 20), (0, 1, 9)]);
        let table = MeasureTable::build(&inst);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for op in Destroy::ALL {
            for q in 1..=5 {
                let mut sol = full_solution(&inst, &[&[0, 2, 4], &[1, 3]]);
                let removed = destroy(op, &inst, &table, &mut sol, q, &mut rng);
                let mut uniq = removed.clone();
                uniq.sort();
                uniq.dedup();
                assert_eq!(uniq.len(), q);
                assert_eq!(sol.served_count(&inst), 5 - q);
            }
        }
    }

    #[test]
    fn worst_removal_targets_the_huge_detour() {
        // request 3 sits far out on the line, the rest ride along the depot
        let inst = line_instance(&[0], &[(0, 0, 0), (0, 0, 0), (0, 0, 0), (0, 0, 1000)]);
        let table = MeasureTable::build(&inst);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut hits = 0;
        for _ in 0..200 {
            let mut sol = full_solution(&inst, &[&[0, 1, 2, 3]]);
            if destroy(Destroy::Worst, &inst, &table, &mut sol, 1, &mut rng) == vec![3] {
                hits += 1;
            }
        }
        assert_eq!(hits, 200);
    }

    #[test]
    fn related_twin_is_most_likely_next() {
        let mut inst =
            line_instance(&[0], &[(0, 10, 20), (0, 10, 20), (0, 40, 5), (0, 60, 90), (0, 33, 70), (0, 80, 15)]);
        for r in 0..6 {
            let o = inst.pickup(r);
            let w = TimeWindow::new(100 * r as i64, 100 * r as i64 + 500);
            inst.nodes[o].window = w;
            inst.requests[r].pickup_window = w;
        }
        let o1 = inst.pickup(1);
        inst.nodes[o1].window = inst.nodes[inst.pickup(0)].window;
        inst.requests[1].pickup_window = inst.requests[0].pickup_window;
        let table = MeasureTable::build(&inst);
        let weights: Vec<f64> = (1..6).map(|a| table.rel(a, 0).powi(2)).collect();
        let total: f64 = weights.iter().sum();
        let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
        assert!(probs[0] > probs[1..].iter().cloned().fold(0.0, f64::max));

        // empirical check of the exact single-step probability
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (mut first_zero, mut twin_next) = (0, 0);
        for _ in 0..30_000 {
            let mut sol = full_solution(&inst, &[&[0, 1, 2, 3, 4, 5]]);
            let removed = destroy(Destroy::Related, &inst, &table, &mut sol, 2, &mut rng);
            if removed[0] == 0 {
                first_zero += 1;
                if removed[1] == 1 {
                    twin_next += 1;
                }
            }
        }
        let freq = twin_next as f64 / first_zero as f64;
        assert!((freq - probs[0]).abs() < 0.02, "{freq} vs {}", probs[0]);
    }
}
