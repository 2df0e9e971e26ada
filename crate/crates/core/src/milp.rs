//! Mixed-integer model in CPLEX LP text format, and the way back from an
//! external solver's variable listing to a [`Solution`].
//!
//! Names: `x_i_j_k` (arc `i -> j` by vehicle index `k`, canonical node ids),
//! `y_c_k`, `u_i_k` (arrival), `w_i_k` (load after the node), `r_c_k` (ride
//! time), `S_m`, `U_m` (balances by company index).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::{Instance, Mode, NodeKind};
use crate::schedule::Route;
use crate::solution::{BalanceRule, Solution};
use crate::BalanceSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExportOptions {
    /// Largest number of variables that will be written.
    pub variable_cap: usize,
}

impl Default for ExportOptions {
    fn default() -> Self {
        ExportOptions { variable_cap: 250_000 }
    }
}

/// Variable and row counts of an exported model.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ModelSize {
    pub variables: usize,
    pub constraints: usize,
}

pub fn variable_count(instance: &Instance, mode: Mode) -> usize {
    let (v, n, k, m) = (instance.n_nodes(), instance.n_requests(), instance.n_vehicles(), instance.n_companies());
    let balance = usize::from(mode.bounds_time()) + usize::from(mode.bounds_customers());
    k * (v * v + 2 * v + 2 * n) + balance * m
}

pub fn export_lp(instance: &Instance, spec: &BalanceSpec) -> Result<String> {
    export_lp_with(instance, spec, ExportOptions::default()).map(|(text, _)| text)
}

pub fn export_lp_with(instance: &Instance, spec: &BalanceSpec, options: ExportOptions) -> Result<(String, ModelSize)> {
    let variables = variable_count(instance, spec.mode);
    if variables > options.variable_cap {
        return Err(Error::ModelTooLarge { variables, cap: options.variable_cap });
    }
    let rule = BalanceRule::new(instance, spec)?;
    let mut lp = Lp::default();
    let nodes = 0..instance.n_nodes();
    let vehicles = 0..instance.n_vehicles();

    let mut objective = Vec::new();
    for k in vehicles.clone() {
        for i in nodes.clone() {
            for j in nodes.clone() {
                objective.push((instance.c(i, j) as f64, x(i, j, k)));
            }
        }
    }

    // each vehicle leaves its start depot once and enters its end depot once
    for k in vehicles.clone() {
        let (h1, h2) = (instance.start_depot(k), instance.end_depot(k));
        lp.row("leave", nodes.clone().map(|j| (1.0, x(h1, j, k))).collect(), "=", 1.0);
        lp.row("enter", nodes.clone().map(|i| (1.0, x(i, h2, k))).collect(), "=", 1.0);
    }
    for k in vehicles.clone() {
        for l in nodes.clone().filter(|&l| is_request_node(instance, l)) {
            let mut terms: Vec<_> = nodes.clone().map(|i| (1.0, x(i, l, k))).collect();
            terms.extend(nodes.clone().map(|j| (-1.0, x(l, j, k))));
            lp.row("flow", terms, "=", 0.0);
        }
    }
    for c in 0..instance.n_requests() {
        lp.row("assign", vehicles.clone().map(|k| (1.0, y(c, k))).collect(), "=", 1.0);
    }
    for c in 0..instance.n_requests() {
        let (o, d) = (instance.pickup(c), instance.drop_node(c));
        for k in vehicles.clone() {
            let mut terms: Vec<_> = nodes.clone().map(|j| (1.0, x(o, j, k))).collect();
            terms.push((-1.0, y(c, k)));
            lp.row("serve", terms, "=", 0.0);
            let mut terms: Vec<_> = nodes.clone().map(|j| (1.0, x(o, j, k))).collect();
            terms.extend(nodes.clone().map(|i| (-1.0, x(i, d, k))));
            lp.row("pair", terms, "=", 0.0);
        }
    }

    // timing
    for k in vehicles.clone() {
        for i in nodes.clone() {
            for j in nodes.clone().filter(|&j| j != i) {
                let (s, t) = (instance.nodes[i].service as f64, instance.t(i, j) as f64);
                let big = big_u(instance, i, j) as f64;
                lp.row("time", vec![(1.0, u(j, k)), (-1.0, u(i, k)), (-big, x(i, j, k))], ">=", s + t - big);
            }
        }
    }
    for c in 0..instance.n_requests() {
        let req = &instance.requests[c];
        let (o, d) = (instance.pickup(c), instance.drop_node(c));
        for k in vehicles.clone() {
            lp.row("ride", vec![(1.0, r(c, k)), (-1.0, u(d, k)), (1.0, u(o, k))], "=", -(req.service_pickup as f64));
            lp.bound(r(c, k), req.direct_time as f64, req.max_ride as f64);
        }
    }
    for k in vehicles.clone() {
        let (h1, h2) = (instance.start_depot(k), instance.end_depot(k));
        lp.row("duration", vec![(1.0, u(h2, k)), (-1.0, u(h1, k))], "<=", instance.vehicles[k].max_duration as f64);
        for i in nodes.clone() {
            let w = instance.nodes[i].window;
            lp.bound(u(i, k), w.earliest as f64, w.latest.min(instance.horizon) as f64);
        }
    }

    // load
    for k in vehicles.clone() {
        let cap = instance.vehicles[k].capacity as i64;
        for i in nodes.clone() {
            for j in nodes.clone().filter(|&j| j != i) {
                let qj = instance.nodes[j].flow as f64;
                let big = cap.min(cap + instance.nodes[i].flow) as f64;
                lp.row("load", vec![(1.0, w(j, k)), (-1.0, w(i, k)), (-big, x(i, j, k))], ">=", qj - big);
            }
        }
        for i in nodes.clone() {
            let q = instance.nodes[i].flow;
            lp.bound(w(i, k), q.max(0) as f64, cap.min(cap + q) as f64);
        }
        lp.bound(w(instance.start_depot(k), k), 0.0, 0.0);
    }

    // arcs that cannot appear on a route
    for k in vehicles.clone() {
        let (h1, h2) = (instance.start_depot(k), instance.end_depot(k));
        for i in nodes.clone() {
            for j in nodes.clone() {
                let foreign = |n: usize| !is_request_node(instance, n) && n != h1 && n != h2;
                if i == j || j == h1 || i == h2 || foreign(i) || foreign(j) {
                    lp.bound(x(i, j, k), 0.0, 0.0);
                }
            }
        }
    }

    // locks and the no-collaboration rule
    for c in 0..instance.n_requests() {
        for k in vehicles.clone() {
            if !instance.lock_allows(c, k) {
                lp.bound(y(c, k), 0.0, 0.0);
            }
            if spec.mode == Mode::Nc && instance.vehicle_owner(k) != instance.request_owner(c) {
                lp.row("home", vec![(1.0, y(c, k))], "=", 0.0);
            }
        }
    }

    // balances
    let mut balance_vars = Vec::new();
    for (flag, name, weight) in [
        (spec.mode.bounds_time(), "S", Weight::Time),
        (spec.mode.bounds_customers(), "U", Weight::Customers),
    ] {
        if !flag {
            continue;
        }
        for m in 0..instance.n_companies() {
            let var = format!("{name}_{m}");
            let mut terms = vec![(1.0, var.clone())];
            for c in 0..instance.n_requests() {
                let amount = weight.of(instance, c);
                for k in vehicles.clone() {
                    let (owner, server) = (instance.request_owner(c), instance.vehicle_owner(k));
                    if server == m && owner != m {
                        terms.push((-amount, y(c, k)));
                    } else if owner == m && server != m {
                        terms.push((amount, y(c, k)));
                    }
                }
            }
            lp.row(if name == "S" { "time_balance" } else { "customer_balance" }, terms, "=", 0.0);
            let (bound, offset) = match weight {
                Weight::Time => (rule.thresholds[m].time, rule.offsets[m].time as f64),
                Weight::Customers => (rule.thresholds[m].customers as f64, rule.offsets[m].customers as f64),
            };
            lp.bound(var.clone(), -bound - offset, bound - offset);
            balance_vars.push(var);
        }
    }

    let mut binaries = Vec::new();
    for k in vehicles.clone() {
        for c in 0..instance.n_requests() {
            binaries.push(y(c, k));
        }
        for i in nodes.clone() {
            for j in nodes.clone() {
                binaries.push(x(i, j, k));
            }
        }
    }
    let generals: Vec<String> = vehicles.clone().flat_map(|k| nodes.clone().map(move |i| w(i, k))).collect();

    let size = ModelSize { variables, constraints: lp.rows.len() };
    Ok((lp.render(&objective, &balance_vars, &generals, &binaries), size))
}

#[derive(Clone, Copy)]
enum Weight {
    Time,
    Customers,
}

impl Weight {
    fn of(self, instance: &Instance, c: usize) -> f64 {
        match self {
            Weight::Time => instance.requests[c].direct_time as f64,
            Weight::Customers => instance.requests[c].passengers as f64,
        }
    }
}

fn is_request_node(instance: &Instance, n: usize) -> bool {
    matches!(instance.nodes[n].kind, NodeKind::Pickup | NodeKind::Drop)
}

/// Smallest constant that relaxes the timing row when the arc is unused.
pub fn big_u(instance: &Instance, i: usize, j: usize) -> i64 {
    let latest = instance.nodes[i].window.latest.min(instance.horizon);
    (latest + instance.nodes[i].service + instance.t(i, j) - instance.nodes[j].window.earliest).max(0)
}

fn x(i: usize, j: usize, k: usize) -> String {
    format!("x_{i}_{j}_{k}")
}
fn y(c: usize, k: usize) -> String {
    format!("y_{c}_{k}")
}
fn u(i: usize, k: usize) -> String {
    format!("u_{i}_{k}")
}
fn w(i: usize, k: usize) -> String {
    format!("w_{i}_{k}")
}
fn r(c: usize, k: usize) -> String {
    format!("r_{c}_{k}")
}

#[derive(Default)]
struct Lp {
    rows: Vec<(String, Vec<(f64, String)>, &'static str, f64)>,
    bounds: BTreeMap<String, (f64, f64)>,
    order: Vec<String>,
}

impl Lp {
    fn row(&mut self, kind: &str, terms: Vec<(f64, String)>, sense: &'static str, rhs: f64) {
        let name = format!("{kind}_{}", self.rows.len());
        self.rows.push((name, terms, sense, rhs));
    }

    fn bound(&mut self, var: String, lo: f64, hi: f64) {
        if !self.bounds.contains_key(&var) {
            self.order.push(var.clone());
        }
        self.bounds.insert(var, (lo, hi));
    }

    fn render(&self, objective: &[(f64, String)], free: &[String], generals: &[String], binaries: &[String]) -> String {
        let mut out = String::from("Minimize\n obj:");
        write_terms(&mut out, objective);
        out.push_str("\nSubject To\n");
        for (name, terms, sense, rhs) in &self.rows {
            let _ = write!(out, " {name}:");
            write_terms(&mut out, terms);
            let _ = writeln!(out, " {sense} {}", num(*rhs));
        }
        out.push_str("Bounds\n");
        for var in free {
            if !self.bounds.contains_key(var) {
                let _ = writeln!(out, " {var} free");
            }
        }
        for var in &self.order {
            let (lo, hi) = self.bounds[var];
            if lo == hi {
                let _ = writeln!(out, " {var} = {}", num(lo));
            } else {
                let _ = writeln!(out, " {} <= {var} <= {}", num(lo), num(hi));
            }
        }
        for (title, vars) in [("General", generals), ("Binary", binaries)] {
            let _ = write!(out, "{title}\n");
            for chunk in vars.chunks(8) {
                let _ = writeln!(out, " {}", chunk.join(" "));
            }
        }
        out.push_str("End\n");
        out
    }
}

fn num(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

fn write_terms(out: &mut String, terms: &[(f64, String)]) {
    let mut written = 0;
    for (coef, var) in terms {
        if *coef == 0.0 {
            continue;
        }
        if written > 0 && written % 8 == 0 {
            out.push_str("\n  ");
        }
        let sign = if *coef < 0.0 { '-' } else { '+' };
        let mag = coef.abs();
        if mag == 1.0 {
            let _ = write!(out, " {sign} {var}");
        } else {
            let _ = write!(out, " {sign} {} {var}", num(mag));
        }
        written += 1;
    }
    if written == 0 {
        out.push_str(" 0 x_0_0_0");
    }
}

/// Rebuilds routes from the `x` values of a `name value` listing. Other
/// variables and unparsable lines are ignored.
pub fn import_solution(text: &str, instance: &Instance) -> Result<Solution> {
    let v = instance.n_nodes();
    let mut succ: Vec<BTreeMap<usize, usize>> = vec![BTreeMap::new(); instance.n_vehicles()];
    for (lineno, line) in text.lines().enumerate() {
        let mut parts = line.split_whitespace();
        let (Some(name), Some(value)) = (parts.next(), parts.next()) else { continue };
        let Some(rest) = name.strip_prefix("x_") else { continue };
        let idx: Vec<usize> = match rest.split('_').map(str::parse).collect::<std::result::Result<_, _>>() {
            Ok(idx) => idx,
            Err(_) => continue,
        };
        let value: f64 = value
            .parse()
            .map_err(|_| Error::Import(format!("line {}: value `{value}` of {name} is not a number", lineno + 1)))?;
        let [i, j, k] = idx[..] else {
            return Err(Error::Import(format!("line {}: malformed arc variable {name}", lineno + 1)));
        };
        if i >= v || j >= v || k >= instance.n_vehicles() {
            return Err(Error::Import(format!("line {}: {name} is outside the instance", lineno + 1)));
        }
        if (value - value.round()).abs() > 1e-6 || !(-1e-6..=1.0 + 1e-6).contains(&value) {
            return Err(Error::Import(format!("{name} = {value} is not integral")));
        }
        if value.round() == 1.0 {
            if let Some(prev) = succ[k].insert(i, j) {
                return Err(Error::Import(format!("vehicle {k} leaves node {i} twice (to {prev} and {j})")));
            }
        }
    }

    let mut solution = Solution::empty(instance);
    for (k, arcs) in succ.iter_mut().enumerate() {
        let (start, end) = (instance.start_depot(k), instance.end_depot(k));
        let mut node = start;
        let mut visits = Vec::new();
        while node != end {
            let Some(next) = arcs.remove(&node) else {
                return Err(Error::Import(format!("route of vehicle {k} breaks off at node {node}")));
            };
            if next != end {
                if !is_request_node(instance, next) || visits.len() > v {
                    return Err(Error::Import(format!("route of vehicle {k} runs through node {next}")));
                }
                visits.push(next);
            }
            node = next;
        }
        if let Some((i, j)) = arcs.iter().next() {
            return Err(Error::Import(format!("arc {i} -> {j} of vehicle {k} is disconnected from its route")));
        }
        solution.routes[k] = Route { vehicle: k, visits };
    }
    Ok(solution)
}
