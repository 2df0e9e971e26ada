//! Request-pair similarity tables used by the removal and insertion operators.
//!
//! Relatedness mixes spatial distance with time-window half-widths; closeness
//! is the smallest extra makespan of serving request `a` in a tour built around
//! request `r`, over the six ways of interleaving their four stops. Neither
//! depends on a solution, so both are tabulated once per instance.

use std::fmt::Write as _;

use crate::model::{Instance, NodeId, Time};
use crate::solution::Solution;

/// The six visiting orders of two requests, as `(is_a, is_drop)` stops.
pub const ORDERS: [[(bool, bool); 4]; 6] = [
    // Or Dr Oa Da
    [(false, false), (false, true), (true, false), (true, true)],
    // Oa Da Or Dr
    [(true, false), (true, true), (false, false), (false, true)],
    // Or Oa Dr Da
    [(false, false), (true, false), (false, true), (true, true)],
    // Oa Or Da Dr
    [(true, false), (false, false), (true, true), (false, true)],
    // Or Oa Da Dr
    [(false, false), (true, false), (true, true), (false, true)],
    // Oa Or Dr Da
    [(true, false), (false, false), (false, true), (true, true)],
];

pub const ORDER_NAMES: [&str; 6] = ["OrDrOaDa", "OaDaOrDr", "OrOaDrDa", "OaOrDaDr", "OrOaDaDr", "OaOrDrDa"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ClosenessConfig {
    /// Enforce the ride-time cap of `a` as well as that of `r`.
    pub both_ride_caps: bool,
}

impl Default for ClosenessConfig {
    fn default() -> Self {
        ClosenessConfig { both_ride_caps: true }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeasureTable {
    n: usize,
    rel: Vec<Option<f64>>,
    close: Vec<Option<Time>>,
    close_order: Vec<Option<u8>>,
    rel_cap: f64,
    close_cap: f64,
}

impl MeasureTable {
    pub fn build(instance: &Instance) -> Self {
        Self::build_with(instance, ClosenessConfig::default())
    }

    pub fn build_with(instance: &Instance, config: ClosenessConfig) -> Self {
        let n = instance.n_requests();
        let mut rel = vec![None; n * n];
        let mut close = vec![None; n * n];
        let mut close_order = vec![None; n * n];
        let scales = RelatednessScales::of(instance);
        for a in 0..n {
            for r in 0..n {
                if a == r {
                    continue;
                }
                rel[a * n + r] = relatedness_with(instance, &scales, a, r);
                if let Some((value, order)) = closeness_with(instance, a, r, config) {
                    close[a * n + r] = Some(value);
                    close_order[a * n + r] = Some(order as u8);
                }
            }
        }
        let rel_max = rel.iter().flatten().copied().fold(0.0, f64::max);
        let close_max = close.iter().flatten().copied().max().unwrap_or(0) as f64;
        MeasureTable {
            n,
            rel,
            close,
            close_order,
            rel_cap: 10.0 * rel_max.max(1.0),
            close_cap: 10.0 * close_max.max(1.0),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Relatedness of `a` to `r`, capped for degenerate (identical) pairs.
    pub fn rel(&self, a: usize, r: usize) -> f64 {
        self.rel[a * self.n + r].unwrap_or(self.rel_cap)
    }

    /// Closeness in seconds, `None` when no interleaving is feasible.
    pub fn close(&self, a: usize, r: usize) -> Option<Time> {
        self.close[a * self.n + r]
    }

    /// Closeness as a sampling score, infinite values replaced by the cap.
    pub fn close_score(&self, a: usize, r: usize) -> f64 {
        self.close(a, r).map_or(self.close_cap, |c| c as f64)
    }

    /// Index into [`ORDERS`] of the minimizing interleaving.
    pub fn close_order(&self, a: usize, r: usize) -> Option<usize> {
        self.close_order[a * self.n + r].map(usize::from)
    }

    pub fn rel_cap(&self) -> f64 {
        self.rel_cap
    }

    pub fn close_cap(&self) -> f64 {
        self.close_cap
    }

    /// Smallest relatedness between `a` and a request served on another route.
    pub fn proximity(&self, instance: &Instance, solution: &Solution, a: usize) -> f64 {
        self.min_over_other_routes(instance, solution, a, |c| self.rel(a, c))
            .unwrap_or(self.rel_cap)
    }

    /// Smallest closeness between `a` and a request served on another route.
    pub fn interchangeability(&self, instance: &Instance, solution: &Solution, a: usize) -> f64 {
        self.min_over_other_routes(instance, solution, a, |c| self.close_score(a, c))
            .unwrap_or(self.close_cap)
    }

    fn min_over_other_routes(
        &self,
        instance: &Instance,
        solution: &Solution,
        a: usize,
        score: impl Fn(usize) -> f64,
    ) -> Option<f64> {
        let assignment = solution.assignment(instance);
        let home = assignment[a];
        assignment
            .iter()
            .enumerate()
            .filter(|&(c, k)| c != a && k.is_some() && *k != home)
            .map(|(c, _)| score(c))
            .reduce(f64::min)
    }

    /// Debug dump: one row per ordered pair.
    pub fn to_csv(&self, instance: &Instance) -> String {
        let mut out = String::from("a,r,rel,close,order\n");
        for a in 0..self.n {
            for r in 0..self.n {
                if a == r {
                    continue;
                }
                let close = self.close(a, r).map_or("inf".to_string(), |c| c.to_string());
                let order = self.close_order(a, r).map_or("", |o| ORDER_NAMES[o]);
                let _ = writeln!(
                    out,
                    "{},{},{:.6},{},{}",
                    instance.requests[a].id,
                    instance.requests[r].id,
                    self.rel(a, r),
                    close,
                    order
                );
            }
        }
        out
    }
}

struct RelatednessScales {
    max_travel: f64,
    window_span: f64,
}

impl RelatednessScales {
    fn of(instance: &Instance) -> Self {
        let latest = instance
            .nodes
            .iter()
            .map(|n| n.window.latest.min(instance.horizon))
            .max()
            .unwrap_or(0);
        let earliest = instance.nodes.iter().map(|n| n.window.earliest).min().unwrap_or(0);
        RelatednessScales {
            max_travel: instance.max_travel() as f64,
            window_span: (latest - earliest) as f64,
        }
    }
}

fn half_width(instance: &Instance, node: NodeId) -> f64 {
    let w = instance.nodes[node].window;
    (w.latest.min(instance.horizon) - w.earliest) as f64 / 2.0
}

fn relatedness_with(instance: &Instance, scales: &RelatednessScales, a: usize, r: usize) -> Option<f64> {
    let (oa, da) = (instance.pickup(a), instance.drop_node(a));
    let (or, dr) = (instance.pickup(r), instance.drop_node(r));
    let spatial = if scales.max_travel > 0.0 {
        (instance.t(oa, or) + instance.t(da, dr)) as f64 / scales.max_travel
    } else {
        0.0
    };
    let temporal = if scales.window_span > 0.0 {
        ((half_width(instance, oa) - half_width(instance, or)).abs()
            + (half_width(instance, da) - half_width(instance, dr)).abs())
            / scales.window_span
    } else {
        0.0
    };
    let bracket = spatial + temporal;
    (bracket > 0.0).then(|| 1.0 / bracket)
}

/// Relatedness of `a` to `r`; `None` for identical requests.
pub fn relatedness(instance: &Instance, a: usize, r: usize) -> Option<f64> {
    relatedness_with(instance, &RelatednessScales::of(instance), a, r)
}

/// Closeness of `a` to `r` and the minimizing order index; `None` when all six
/// interleavings are infeasible.
pub fn closeness(instance: &Instance, a: usize, r: usize) -> Option<(Time, usize)> {
    closeness_with(instance, a, r, ClosenessConfig::default())
}

pub fn closeness_with(
    instance: &Instance,
    a: usize,
    r: usize,
    config: ClosenessConfig,
) -> Option<(Time, usize)> {
    let direct_r = instance.requests[r].direct_time;
    let mut best: Option<(Time, usize)> = None;
    for (idx, order) in ORDERS.iter().enumerate() {
        if let Some(span) = order_makespan(instance, a, r, order, config) {
            let value = span - direct_r;
            if best.map_or(true, |(b, _)| value < b) {
                best = Some((value, idx));
            }
        }
    }
    best
}

/// Minimum time from leaving the first stop to starting service at the last
/// stop, with a free start time; `None` when the order is infeasible.
pub fn order_makespan(
    instance: &Instance,
    a: usize,
    r: usize,
    order: &[(bool, bool); 4],
    config: ClosenessConfig,
) -> Option<Time> {
    let node_of = |(is_a, is_drop): (bool, bool)| {
        let req = if is_a { a } else { r };
        if is_drop {
            instance.drop_node(req)
        } else {
            instance.pickup(req)
        }
    };
    let seq: [NodeId; 4] = [node_of(order[0]), node_of(order[1]), node_of(order[2]), node_of(order[3])];

    let min_capacity = instance.vehicles.iter().map(|v| v.capacity as i64).min().unwrap_or(0);
    let mut load = 0;
    for &node in &seq {
        load += instance.nodes[node].flow;
        if load > min_capacity {
            return None;
        }
    }

    // x_to - x_from <= w, node 4 is the zero reference
    let z = 4;
    let mut edges: Vec<(usize, usize, Time)> = Vec::with_capacity(16);
    for (i, &node) in seq.iter().enumerate() {
        let n = &instance.nodes[node];
        edges.push((z, i, n.window.latest));
        edges.push((i, z, -n.window.earliest));
        if i + 1 < 4 {
            edges.push((i + 1, i, -(n.service + instance.t(node, seq[i + 1]))));
        }
    }
    for (req, capped) in [(r, true), (a, config.both_ride_caps)] {
        let p = seq.iter().position(|&x| x == instance.pickup(req)).unwrap();
        let d = seq.iter().position(|&x| x == instance.drop_node(req)).unwrap();
        let s = instance.nodes[seq[p]].service;
        edges.push((d, p, -(instance.t(seq[p], seq[d]) + s)));
        if capped {
            edges.push((p, d, instance.requests[req].max_ride + s));
        }
    }

    let dist_from = |source: usize| -> Option<[Time; 5]> {
        let mut dist = [Time::MAX / 4; 5];
        dist[source] = 0;
        for round in 0..=5 {
            let mut changed = false;
            for &(from, to, w) in &edges {
                if dist[from] < Time::MAX / 4 && dist[from] + w < dist[to] {
                    dist[to] = dist[from] + w;
                    changed = true;
                }
            }
            if !changed {
                return Some(dist);
            }
            if round == 5 {
                return None;
            }
        }
        Some(dist)
    };
    // every node is reachable from z, so a negative cycle shows up here
    dist_from(z)?;
    let from_last = dist_from(3)?;
    let span = -from_last[0];
    Some(span - instance.nodes[seq[0]].service)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::*;
    use crate::model::{Request, TimeWindow, Vehicle};
    use crate::schedule::Route;

    fn set_window(inst: &mut Instance, node: NodeId, w: TimeWindow) {
        inst.nodes[node].window = w;
        let r = inst.request_at(node).unwrap();
        if inst.is_pickup(node) {
            inst.requests[r].pickup_window = w;
        } else {
            inst.requests[r].drop_window = w;
        }
    }

    fn with_services(inst: &mut Instance, s1: Time, s2: Time) {
        for r in 0..inst.n_requests() {
            inst.requests[r].service_pickup = s1;
            inst.requests[r].service_drop = s2;
            let (o, d) = (inst.pickup(r), inst.drop_node(r));
            inst.nodes[o].service = s1;
            inst.nodes[d].service = s2;
        }
    }

    /// Exhaustive integer scheduling of one order.
    fn brute_force_span(inst: &Instance, a: usize, r: usize, order: &[(bool, bool); 4]) -> Option<Time> {
        let nodes: Vec<NodeId> = order
            .iter()
            .map(|&(is_a, is_drop)| {
                let q = if is_a { a } else { r };
                if is_drop {
                    inst.drop_node(q)
                } else {
                    inst.pickup(q)
                }
            })
            .collect();
        let mut load = 0;
        for &n in &nodes {
            load += inst.nodes[n].flow;
            if load > inst.vehicles.iter().map(|v| v.capacity as i64).min().unwrap() {
                return None;
            }
        }
        let mut best = None;
        let w = |i: usize| inst.nodes[nodes[i]].window;
        let s = |i: usize| inst.nodes[nodes[i]].service;
        for u0 in w(0).earliest..=w(0).latest {
            for u1 in (u0 + s(0) + inst.t(nodes[0], nodes[1])).max(w(1).earliest)..=w(1).latest {
                for u2 in (u1 + s(1) + inst.t(nodes[1], nodes[2])).max(w(2).earliest)..=w(2).latest {
                    for u3 in (u2 + s(2) + inst.t(nodes[2], nodes[3])).max(w(3).earliest)..=w(3).latest {
                        let u = [u0, u1, u2, u3];
                        let ok = [a, r].iter().all(|&q| {
                            let p = nodes.iter().position(|&x| x == inst.pickup(q)).unwrap();
                            let d = nodes.iter().position(|&x| x == inst.drop_node(q)).unwrap();
                            let ride = u[d] - u[p] - s(p);
                            ride <= inst.requests[q].max_ride && ride >= inst.t(nodes[p], nodes[d])
                        });
                        if ok {
                            let span = u3 - u0 - s(0);
                            if best.map_or(true, |b| span < b) {
                                best = Some(span);
                            }
                        }
                    }
                }
            }
        }
        best
    }

    #[test]
    fn identical_requests_get_capped_relatedness() {
        let inst = line_instance(&[0], &[(0, 3, 9), (0, 3, 9), (0, 1, 20)]);
        assert_eq!(relatedness(&inst, 0, 1), None);
        let table = MeasureTable::build(&inst);
        let finite_max = (0..3)
            .flat_map(|a| (0..3).map(move |r| (a, r)))
            .filter(|&(a, r)| a != r)
            .filter_map(|(a, r)| relatedness(&inst, a, r))
            .fold(0.0, f64::max);
        assert_eq!(table.rel(0, 1), 10.0 * finite_max);
    }

    #[test]
    fn half_max_distances_give_unit_relatedness() {
        // max travel on this line is 20; both endpoint pairs are 10 apart
        let inst = line_instance(&[0], &[(0, 0, 10), (0, 10, 20)]);
        assert_eq!(inst.max_travel(), 20);
        assert_eq!(relatedness(&inst, 0, 1), Some(1.0));
    }

    #[test]
    fn table_matches_independent_recomputation() {
        let mut inst =
            line_instance(&[0, 40], &[(0, 3, 17), (0, 5, 30), (0, 12, 2), (1, 33, 8), (1, 21, 39), (1, 9, 26)]);
        let windows = [(0, 500), (100, 300), (250, 1000), (40, 90), (0, 86_400), (7, 7_000)];
        for r in 0..6 {
            let o = inst.pickup(r);
            let d = inst.drop_node(r);
            set_window(&mut inst, if r % 2 == 0 { o } else { d }, TimeWindow::new(windows[r].0, windows[r].1));
        }
        let table = MeasureTable::build(&inst);
        let max_t = (0..inst.n_nodes())
            .flat_map(|i| (0..inst.n_nodes()).map(move |j| (i, j)))
            .map(|(i, j)| inst.t(i, j))
            .max()
            .unwrap() as f64;
        let span = {
            let hi = inst.nodes.iter().map(|n| n.window.latest.min(inst.horizon)).max().unwrap();
            let lo = inst.nodes.iter().map(|n| n.window.earliest).min().unwrap();
            (hi - lo) as f64
        };
        for a in 0..6 {
            for r in 0..6 {
                if a == r {
                    continue;
                }
                let ra = &inst.requests[a];
                let rr = &inst.requests[r];
                let hw = |w: TimeWindow| 0.5 * (w.latest.min(inst.horizon) - w.earliest) as f64;
                let term1 = (inst.t(ra.origin, rr.origin) + inst.t(ra.destination, rr.destination)) as f64 / max_t;
                let term2 = ((hw(ra.pickup_window) - hw(rr.pickup_window)).abs()
                    + (hw(ra.drop_window) - hw(rr.drop_window)).abs())
                    / span;
                let expected = 1.0 / (term1 + term2);
                assert!((table.rel(a, r) - expected).abs() < 1e-12, "({a},{r})");
            }
        }
    }

    #[test]
    fn clone_closeness_is_extra_service() {
        let mut inst = line_instance(&[0], &[(0, 5, 25), (0, 5, 25)]);
        with_services(&mut inst, 3, 4);
        let (value, _) = closeness(&inst, 0, 1).unwrap();
        assert_eq!(value, 7);
        for order in &ORDERS {
            let ours = order_makespan(&inst, 0, 1, order, ClosenessConfig::default());
            assert_eq!(ours, brute_force_span_small(&inst, order));
        }
    }

    fn brute_force_span_small(inst: &Instance, order: &[(bool, bool); 4]) -> Option<Time> {
        let mut small = inst.clone();
        small.horizon = 120;
        for n in &mut small.nodes {
            n.window.latest = n.window.latest.min(120);
        }
        brute_force_span(&small, 0, 1, order)
    }

    #[test]
    fn distant_simultaneous_requests_are_infinitely_far() {
        let mut inst = line_instance(&[0], &[(0, 5, 10), (0, 500, 505)]);
        let (o0, d0, o1, d1) = (inst.pickup(0), inst.drop_node(0), inst.pickup(1), inst.drop_node(1));
        set_window(&mut inst, o0, TimeWindow::new(0, 10));
        set_window(&mut inst, d0, TimeWindow::new(0, 20));
        set_window(&mut inst, o1, TimeWindow::new(0, 10));
        set_window(&mut inst, d1, TimeWindow::new(0, 20));
        for r in 0..2 {
            inst.requests[r].max_ride = 10;
        }
        assert_eq!(closeness(&inst, 0, 1).map(|c| c.0), None);
        assert_eq!(closeness(&inst, 1, 0).map(|c| c.0), None);
        let table = MeasureTable::build(&inst);
        assert_eq!(table.close(0, 1), None);
        assert_eq!(table.close_score(0, 1), table.close_cap());
    }

    #[test]
    fn single_feasible_order() {
        // a must be picked up and dropped before r opens
        let mut inst = line_instance(&[0], &[(0, 2, 6), (0, 8, 12)]);
        let (o0, d0, o1) = (inst.pickup(0), inst.drop_node(0), inst.pickup(1));
        set_window(&mut inst, o0, TimeWindow::new(0, 4));
        set_window(&mut inst, d0, TimeWindow::new(0, 12));
        set_window(&mut inst, o1, TimeWindow::new(20, 24));
        for r in 0..2 {
            inst.requests[r].max_ride = 6;
        }
        let feasible: Vec<usize> = (0..6)
            .filter(|&i| brute_force_span_small(&inst, &ORDERS[i]).is_some())
            .collect();
        assert_eq!(feasible, vec![1]);
        let span = brute_force_span_small(&inst, &ORDERS[1]).unwrap();
        assert_eq!(closeness(&inst, 0, 1), Some((span - inst.requests[1].direct_time, 1)));
    }

    #[test]
    fn closeness_is_asymmetric_and_scales() {
        let mut inst = line_instance(&[0], &[(0, 2, 30), (0, 10, 14)]);
        with_services(&mut inst, 2, 1);
        let ab = closeness(&inst, 0, 1).unwrap().0;
        let ba = closeness(&inst, 1, 0).unwrap().0;
        assert_ne!(ab, ba);

        let lambda = 3;
        let scaled = scale(&inst, lambda);
        assert_eq!(closeness(&scaled, 0, 1).unwrap().0, lambda * ab);
        assert_eq!(closeness(&scaled, 1, 0).unwrap().0, lambda * ba);
    }

    fn scale(inst: &Instance, lambda: Time) -> Instance {
        let travel: Vec<Vec<Time>> =
            inst.travel_rows().iter().map(|row| row.iter().map(|t| t * lambda).collect()).collect();
        let requests: Vec<Request> = inst
            .requests
            .iter()
            .map(|r| Request {
                direct_time: r.direct_time * lambda,
                service_pickup: r.service_pickup * lambda,
                service_drop: r.service_drop * lambda,
                max_ride: r.max_ride * lambda,
                pickup_window: TimeWindow::new(r.pickup_window.earliest * lambda, r.pickup_window.latest * lambda),
                drop_window: TimeWindow::new(r.drop_window.earliest * lambda, r.drop_window.latest * lambda),
                ..r.clone()
            })
            .collect();
        let vehicles: Vec<Vehicle> = inst
            .vehicles
            .iter()
            .map(|v| Vehicle { max_duration: v.max_duration * lambda, ..v.clone() })
            .collect();
        Instance::new(inst.companies.clone(), vehicles, requests, travel, inst.horizon * lambda, None).unwrap()
    }

    #[test]
    fn proximity_and_interchangeability() {
        let inst = line_instance(&[0, 50], &[(0, 3, 17), (1, 40, 30), (0, 8, 12)]);
        let table = MeasureTable::build(&inst);
        let mut sol = Solution::empty(&inst);
        sol.routes[0] = Route { vehicle: 0, visits: vec![inst.pickup(0), inst.drop_node(0)] };
        sol.routes[1] = Route { vehicle: 1, visits: vec![inst.pickup(1), inst.drop_node(1)] };
        assert_eq!(table.proximity(&inst, &sol, 0), table.rel(0, 1));
        assert_eq!(table.interchangeability(&inst, &sol, 1), table.close_score(1, 0));

        let mut single = Solution::empty(&inst);
        single.routes[0].visits =
            vec![inst.pickup(0), inst.drop_node(0), inst.pickup(1), inst.drop_node(1)];
        assert_eq!(table.proximity(&inst, &single, 0), table.rel_cap());
        assert_eq!(table.interchangeability(&inst, &single, 0), table.close_cap());
    }

    #[test]
    fn three_route_minimum_is_a_table_scan() {
        let inst = line_instance(
            &[0, 50, 90],
            &[(0, 3, 17), (1, 40, 30), (0, 8, 12), (2, 70, 95), (1, 55, 20), (2, 11, 66)],
        );
        let table = MeasureTable::build(&inst);
        let mut sol = Solution::empty(&inst);
        for (r, k) in [(0, 0), (2, 0), (1, 1), (4, 1), (3, 2), (5, 2)] {
            sol.routes[k].visits.push(inst.pickup(r));
            sol.routes[k].visits.push(inst.drop_node(r));
        }
        let route_of = [0, 1, 0, 2, 1, 2];
        for a in 0..6 {
            let mut prox = f64::INFINITY;
            let mut int = f64::INFINITY;
            for c in 0..6 {
                if route_of[c] != route_of[a] {
                    prox = prox.min(table.rel(a, c));
                    int = int.min(table.close_score(a, c));
                }
            }
            assert_eq!(table.proximity(&inst, &sol, a), prox);
            assert_eq!(table.interchangeability(&inst, &sol, a), int);
        }
    }

    #[test]
    fn csv_dump_lists_ordered_pairs() {
        let inst = line_instance(&[0], &[(0, 3, 17), (0, 5, 30)]);
        let csv = MeasureTable::build(&inst).to_csv(&inst);
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.starts_with("a,r,rel,close,order"));
    }
}
