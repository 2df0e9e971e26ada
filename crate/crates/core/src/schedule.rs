//! Route timing: service-start times, loads and ride times for a fixed visit order.
//!
//! A route is first timed with a forward-slack procedure: earliest forward pass,
//! depot departure delayed by the forward time slack, then pickups of
//! ride-violating requests delayed by their own slack. That procedure is a
//! heuristic for ride-time constraints, so when it leaves a violation the route
//! is re-timed exactly as a system of difference constraints; only a negative
//! cycle there proves the visit order infeasible.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{Cost, Instance, NodeId, Time};

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Route {
    /// Vehicle index.
    pub vehicle: usize,
    /// Pickup and drop nodes in visiting order; depots are implicit.
    pub visits: Vec<NodeId>,
}

impl Route {
    pub fn empty(vehicle: usize) -> Self {
        Route { vehicle, visits: Vec::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.visits.is_empty()
    }

    /// Requests served, in pickup order.
    pub fn requests<'a>(&'a self, instance: &'a Instance) -> impl Iterator<Item = usize> + 'a {
        self.visits
            .iter()
            .filter(|&&n| instance.is_pickup(n))
            .filter_map(|&n| instance.request_at(n))
    }

    pub fn cost(&self, instance: &Instance) -> Cost {
        let start = instance.start_depot(self.vehicle);
        let end = instance.end_depot(self.vehicle);
        let mut prev = start;
        let mut total = 0;
        for &node in self.visits.iter().chain(std::iter::once(&end)) {
            total += instance.c(prev, node);
            prev = node;
        }
        total
    }

    /// Removes both nodes of request `r`.
    pub fn remove_request(&mut self, instance: &Instance, r: usize) {
        let (o, d) = (instance.pickup(r), instance.drop_node(r));
        self.visits.retain(|&n| n != o && n != d);
    }

    pub fn insert(&mut self, instance: &Instance, r: usize, pickup_pos: usize, drop_pos: usize) {
        self.visits.insert(pickup_pos, instance.pickup(r));
        self.visits.insert(drop_pos, instance.drop_node(r));
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Visit {
    pub node: NodeId,
    pub arrival: Time,
    /// Service start `u_i`; waiting is `start - arrival`.
    pub start: Time,
    /// Passengers on board when leaving the node.
    pub load: i64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ride {
    pub request: usize,
    pub time: Time,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    /// Departure from the start depot.
    pub depart: Time,
    /// Arrival at the end depot.
    pub end: Time,
    pub visits: Vec<Visit>,
    pub rides: Vec<Ride>,
    pub duration: Time,
}

/// First violated constraint class for a visit order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Infeasibility {
    Structure(String),
    Window { node: NodeId, arrival: Time, latest: Time },
    RideTime { request: usize, ride: Time, limit: Time },
    Capacity { node: NodeId, load: i64, capacity: i64 },
    Duration { vehicle: usize, duration: Time, limit: Time },
}

impl fmt::Display for Infeasibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Infeasibility::Structure(msg) => write!(f, "structure: {msg}"),
            Infeasibility::Window { node, arrival, latest } => {
                write!(f, "window at node {node}: earliest service {arrival} > {latest}")
            }
            Infeasibility::RideTime { request, ride, limit } => {
                write!(f, "ride time of request index {request}: {ride} outside limit {limit}")
            }
            Infeasibility::Capacity { node, load, capacity } => {
                write!(f, "capacity at node {node}: load {load} outside [0, {capacity}]")
            }
            Infeasibility::Duration { vehicle, duration, limit } => {
                write!(f, "duration of vehicle index {vehicle}: {duration} > {limit}")
            }
        }
    }
}

/// Best insertion of one request into one route.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Insertion {
    /// Pickup index in the new visit list.
    pub pickup_pos: usize,
    /// Drop index in the new visit list (always after the pickup).
    pub drop_pos: usize,
    pub delta: Cost,
}

/// Checks that a visit list only holds complete, correctly ordered request pairs.
pub fn check_structure(instance: &Instance, visits: &[NodeId]) -> Result<(), Infeasibility> {
    let c = instance.n_requests();
    let mut state = vec![0u8; c];
    for &node in visits {
        let Some(r) = instance.request_at(node).filter(|_| node < instance.n_nodes()) else {
            return Err(Infeasibility::Structure(format!("node {node} is not a pickup or drop")));
        };
        if instance.is_pickup(node) {
            if state[r] != 0 {
                return Err(Infeasibility::Structure(format!("node {node} appears twice")));
            }
            state[r] = 1;
        } else {
            match state[r] {
                0 => {
                    return Err(Infeasibility::Structure(format!(
                        "drop node {node} precedes its pickup"
                    )))
                }
                2 => return Err(Infeasibility::Structure(format!("node {node} appears twice"))),
                _ => state[r] = 2,
            }
        }
    }
    if let Some(r) = state.iter().position(|&s| s == 1) {
        return Err(Infeasibility::Structure(format!(
            "request index {r} is picked up but never dropped"
        )));
    }
    Ok(())
}

const UNREACHED: Time = Time::MAX / 4;
const NONE: usize = usize::MAX;

/// Reusable buffers for timing routes; one per thread.
#[derive(Debug, Default)]
pub struct Evaluator {
    seq: Vec<NodeId>,
    arrival: Vec<Time>,
    start: Vec<Time>,
    partner: Vec<usize>,
    slot: Vec<usize>,
    dist: Vec<Time>,
    edges: Vec<(usize, usize, Time)>,
    eb: Vec<Time>,
    load: Vec<i64>,
    candidates: Vec<(Cost, usize, usize)>,
}

impl Evaluator {
    pub fn new() -> Self {
        Self::default()
    }

    fn load_sequence(&mut self, instance: &Instance, vehicle: usize, visits: &[NodeId]) {
        self.seq.clear();
        self.seq.push(instance.start_depot(vehicle));
        self.seq.extend_from_slice(visits);
        self.seq.push(instance.end_depot(vehicle));
    }

    fn link_partners(&mut self, instance: &Instance) {
        let len = self.seq.len();
        if self.slot.len() < instance.n_requests() {
            self.slot.resize(instance.n_requests(), NONE);
        }
        self.partner.clear();
        self.partner.resize(len, NONE);
        for i in 1..len - 1 {
            let node = self.seq[i];
            let r = instance.request_at(node).expect("visit is a request node");
            if instance.is_pickup(node) {
                self.slot[r] = i;
            } else {
                let p = self.slot[r];
                self.partner[i] = p;
                self.partner[p] = i;
                self.slot[r] = NONE;
            }
        }
    }

    fn check_capacity(&self, instance: &Instance, vehicle: usize) -> Result<(), Infeasibility> {
        let cap = instance.vehicles[vehicle].capacity as i64;
        let mut load = 0;
        for &node in &self.seq[1..self.seq.len() - 1] {
            load += instance.nodes[node].flow;
            if load < 0 || load > cap {
                return Err(Infeasibility::Capacity { node, load, capacity: cap });
            }
        }
        Ok(())
    }

    /// Propagates earliest arrivals and starts after position `from`, whose start is fixed.
    fn propagate(&mut self, instance: &Instance, from: usize) {
        for i in from + 1..self.seq.len() {
            let (prev, node) = (self.seq[i - 1], self.seq[i]);
            let a = self.start[i - 1] + instance.nodes[prev].service + instance.t(prev, node);
            self.arrival[i] = a;
            self.start[i] = a.max(instance.nodes[node].window.earliest);
        }
    }

    fn ride(&self, instance: &Instance, pickup_pos: usize, drop_pos: usize) -> Time {
        self.start[drop_pos] - self.start[pickup_pos] - instance.nodes[self.seq[pickup_pos]].service
    }

    /// Forward time slack at position `i`, counting ride-time slack of
    /// passengers picked up before `i`.
    fn forward_slack(&self, instance: &Instance, i: usize) -> Time {
        let mut waited = 0;
        let mut best = UNREACHED;
        for j in i..self.seq.len() {
            if j > i {
                waited += self.start[j] - self.arrival[j];
            }
            let node = self.seq[j];
            let mut slack = instance.nodes[node].window.latest - self.start[j];
            let p = self.partner[j];
            if p != NONE && p < i && instance.is_drop(node) {
                let r = instance.nodes[node].owner;
                slack = slack.min(instance.requests[r].max_ride - self.ride(instance, p, j));
            }
            best = best.min(waited + slack.max(0));
        }
        best
    }

    fn waiting_after(&self, i: usize) -> Time {
        (i + 1..self.seq.len()).map(|p| self.start[p] - self.arrival[p]).sum()
    }

    fn first_violation(&self, instance: &Instance, vehicle: usize) -> Option<Infeasibility> {
        let last = self.seq.len() - 1;
        for i in 0..=last {
            let w = instance.nodes[self.seq[i]].window;
            if self.start[i] > w.latest || self.start[i] < w.earliest {
                return Some(Infeasibility::Window {
                    node: self.seq[i],
                    arrival: self.start[i],
                    latest: w.latest,
                });
            }
        }
        for j in 1..last {
            let p = self.partner[j];
            if p != NONE && p < j {
                let r = instance.nodes[self.seq[j]].owner;
                let req = &instance.requests[r];
                let ride = self.ride(instance, p, j);
                let direct = instance.t(self.seq[p], self.seq[j]);
                if ride > req.max_ride || ride < direct {
                    return Some(Infeasibility::RideTime { request: r, ride, limit: req.max_ride });
                }
            }
        }
        let duration = self.start[last] - self.start[0];
        let limit = instance.vehicles[vehicle].max_duration;
        if duration > limit {
            return Some(Infeasibility::Duration { vehicle, duration, limit });
        }
        None
    }

    /// Exact re-timing: earliest solution of the difference-constraint system,
    /// or `false` when the system has a negative cycle.
    fn solve_exact(&mut self, instance: &Instance, vehicle: usize) -> bool {
        let len = self.seq.len();
        let z = len;
        self.edges.clear();
        for i in 0..len {
            let node = &instance.nodes[self.seq[i]];
            self.edges.push((z, i, node.window.latest));
            self.edges.push((i, z, -node.window.earliest));
            if i + 1 < len {
                let gap = node.service + instance.t(self.seq[i], self.seq[i + 1]);
                self.edges.push((i + 1, i, -gap));
            }
            let q = self.partner[i];
            if q != NONE && q > i {
                let r = node.owner;
                let s = node.service;
                let direct = instance.t(self.seq[i], self.seq[q]);
                self.edges.push((i, q, instance.requests[r].max_ride + s));
                self.edges.push((q, i, -(direct + s)));
            }
        }
        self.edges.push((0, len - 1, instance.vehicles[vehicle].max_duration));

        // shortest distance from every position to z
        self.dist.clear();
        self.dist.resize(len + 1, UNREACHED);
        self.dist[z] = 0;
        for round in 0..=len + 1 {
            let mut changed = false;
            for &(from, to, w) in &self.edges {
                if self.dist[to] < UNREACHED && self.dist[to] + w < self.dist[from] {
                    self.dist[from] = self.dist[to] + w;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
            if round == len + 1 {
                return false;
            }
        }
        for i in 0..len {
            self.start[i] = -self.dist[i];
        }
        for i in 1..len {
            let prev = self.seq[i - 1];
            self.arrival[i] =
                self.start[i - 1] + instance.nodes[prev].service + instance.t(prev, self.seq[i]);
        }
        self.arrival[0] = self.start[0];
        true
    }

    /// Times the loaded sequence; on success `start` holds a feasible schedule.
    fn time_sequence(&mut self, instance: &Instance, vehicle: usize) -> Result<(), Infeasibility> {
        self.check_capacity(instance, vehicle)?;
        self.link_partners(instance);
        let len = self.seq.len();
        self.arrival.clear();
        self.arrival.resize(len, 0);
        self.start.clear();
        self.start.resize(len, 0);

        // (1) earliest forward pass
        let depot_open = instance.nodes[self.seq[0]].window.earliest;
        self.start[0] = depot_open;
        self.arrival[0] = depot_open;
        self.propagate(instance, 0);
        for i in 1..len {
            let w = instance.nodes[self.seq[i]].window;
            if self.start[i] > w.latest {
                return Err(Infeasibility::Window {
                    node: self.seq[i],
                    arrival: self.start[i],
                    latest: w.latest,
                });
            }
        }

        // (2)-(4) delay the depot departure
        let shift = self.forward_slack(instance, 0).min(self.waiting_after(0));
        if shift > 0 {
            self.start[0] += shift;
            self.arrival[0] = self.start[0];
            self.propagate(instance, 0);
        }
        if self.first_violation(instance, vehicle).is_none() {
            return Ok(());
        }

        // (5)-(6) delay pickups of ride-violating requests
        for j in 1..len - 1 {
            let q = self.partner[j];
            if q == NONE || q < j {
                continue;
            }
            let r = instance.nodes[self.seq[j]].owner;
            if self.ride(instance, j, q) <= instance.requests[r].max_ride {
                continue;
            }
            let shift = self.forward_slack(instance, j).min(self.waiting_after(j));
            if shift > 0 {
                self.start[j] += shift;
                self.propagate(instance, j);
            }
        }
        let Some(reason) = self.first_violation(instance, vehicle) else {
            return Ok(());
        };
        if self.solve_exact(instance, vehicle) {
            debug_assert!(self.first_violation(instance, vehicle).is_none());
            Ok(())
        } else {
            Err(reason)
        }
    }

    /// Whether the visit order admits a feasible schedule. Visits must be structurally valid.
    pub fn is_feasible(&mut self, instance: &Instance, vehicle: usize, visits: &[NodeId]) -> bool {
        self.load_sequence(instance, vehicle, visits);
        self.time_sequence(instance, vehicle).is_ok()
    }

    pub fn schedule(&mut self, instance: &Instance, route: &Route) -> Result<Schedule, Infeasibility> {
        check_structure(instance, &route.visits)?;
        self.load_sequence(instance, route.vehicle, &route.visits);
        self.time_sequence(instance, route.vehicle)?;
        let last = self.seq.len() - 1;
        let mut load = 0;
        let mut visits = Vec::with_capacity(route.visits.len());
        let mut rides = Vec::new();
        for i in 1..last {
            let node = self.seq[i];
            load += instance.nodes[node].flow;
            visits.push(Visit { node, arrival: self.arrival[i], start: self.start[i], load });
            let p = self.partner[i];
            if p != NONE && p < i {
                rides.push(Ride { request: instance.nodes[node].owner, time: self.ride(instance, p, i) });
            }
        }
        rides.sort_by_key(|r| r.request);
        Ok(Schedule {
            depart: self.start[0],
            end: self.start[last],
            visits,
            rides,
            duration: self.start[last] - self.start[0],
        })
    }

    /// Cheapest feasible insertion of request `r` into `route`; ties go to the
    /// earliest pickup position, then the earliest drop position.
    pub fn best_insertion(&mut self, instance: &Instance, route: &Route, r: usize) -> Option<Insertion> {
        let k = route.vehicle;
        let (o, d) = (instance.pickup(r), instance.drop_node(r));
        let pax = instance.requests[r].passengers as i64;
        let cap = instance.vehicles[k].capacity as i64;
        let n = route.visits.len();
        let (o_node, d_node) = (&instance.nodes[o], &instance.nodes[d]);
        if pax > cap {
            return None;
        }

        // lower bounds from the earliest pass of the current route
        self.load_sequence(instance, k, &route.visits);
        let len = n + 2;
        self.eb.clear();
        self.load.clear();
        self.eb.push(instance.nodes[self.seq[0]].window.earliest);
        self.load.push(0);
        for i in 1..len {
            let (prev, node) = (self.seq[i - 1], self.seq[i]);
            let a = self.eb[i - 1] + instance.nodes[prev].service + instance.t(prev, node);
            self.eb.push(a.max(instance.nodes[node].window.earliest));
            self.load.push(self.load[i - 1] + instance.nodes[node].flow);
        }

        self.candidates.clear();
        for a in 0..=n {
            let before = self.seq[a];
            let after_o = self.seq[a + 1];
            let reach_o = (self.eb[a] + instance.nodes[before].service + instance.t(before, o))
                .max(o_node.window.earliest);
            if reach_o > o_node.window.latest || self.load[a] + pax > cap {
                continue;
            }
            for b in a..=n {
                if b > a && self.load[b] + pax > cap {
                    break;
                }
                let prev_d = self.seq[b];
                let next_d = self.seq[b + 1];
                let reach_d = if b == a {
                    reach_o + o_node.service + instance.t(o, d)
                } else {
                    self.eb[b] + instance.nodes[prev_d].service + instance.t(prev_d, d)
                };
                if reach_d > d_node.window.latest {
                    continue;
                }
                let delta = if b == a {
                    instance.c(before, o) + instance.c(o, d) + instance.c(d, after_o)
                        - instance.c(before, after_o)
                } else {
                    instance.c(before, o) + instance.c(o, after_o) - instance.c(before, after_o)
                        + instance.c(prev_d, d)
                        + instance.c(d, next_d)
                        - instance.c(prev_d, next_d)
                };
                self.candidates.push((delta, a, b));
            }
        }
        self.candidates.sort_unstable();

        let base: Vec<NodeId> = self.seq.clone();
        for idx in 0..self.candidates.len() {
            let (delta, a, b) = self.candidates[idx];
            self.seq.clear();
            self.seq.extend_from_slice(&base[..=a]);
            self.seq.push(o);
            self.seq.extend_from_slice(&base[a + 1..=b]);
            self.seq.push(d);
            self.seq.extend_from_slice(&base[b + 1..]);
            if self.time_sequence(instance, k).is_ok() {
                return Some(Insertion { pickup_pos: a, drop_pos: b + 1, delta });
            }
        }
        None
    }
}

/// Schedule for a route, or the first violated constraint class.
pub fn earliest_schedule(instance: &Instance, route: &Route) -> Result<Schedule, Infeasibility> {
    Evaluator::new().schedule(instance, route)
}

/// Cheapest feasible insertion of request `r` into `route`, if any.
pub fn try_insert(instance: &Instance, route: &Route, r: usize) -> Option<Insertion> {
    Evaluator::new().best_insertion(instance, route, r)
}
