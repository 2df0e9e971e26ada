//! Instance, coalition and balance-configuration types.
//!
//! Node ids are canonical indices: start depots (one per company, in company id
//! order), then end depots, then pickups and drops (both in request id order).
//! Every per-entity vector on [`Instance`] is sorted by id, so positions double
//! as dense indices.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Time = i64;
pub type Cost = i64;
pub type NodeId = usize;
pub type CompanyId = u32;
pub type RequestId = u32;
pub type VehicleId = u32;

/// Planning horizon used when an instance does not name one.
pub const DEFAULT_HORIZON: Time = 86_400;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[Time; 2]", into = "[Time; 2]")]
pub struct TimeWindow {
    pub earliest: Time,
    pub latest: Time,
}

impl TimeWindow {
    pub fn new(earliest: Time, latest: Time) -> Self {
        TimeWindow { earliest, latest }
    }

    pub fn contains(&self, t: Time) -> bool {
        self.earliest <= t && t <= self.latest
    }
}

impl From<[Time; 2]> for TimeWindow {
    fn from(w: [Time; 2]) -> Self {
        TimeWindow::new(w[0], w[1])
    }
}

impl From<TimeWindow> for [Time; 2] {
    fn from(w: TimeWindow) -> Self {
        [w.earliest, w.latest]
    }
}

/// Assignment restriction on a request.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Lock {
    #[default]
    Free,
    /// The owner serves the request itself.
    MustStayWithOwner,
    /// The listed companies refuse the request.
    Denylist { companies: Vec<CompanyId> },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Request {
    pub id: RequestId,
    pub owner: CompanyId,
    pub origin: NodeId,
    pub destination: NodeId,
    pub passengers: u32,
    pub direct_time: Time,
    pub service_pickup: Time,
    pub service_drop: Time,
    pub pickup_window: TimeWindow,
    pub drop_window: TimeWindow,
    pub max_ride: Time,
    #[serde(default, skip_serializing_if = "is_free")]
    pub lock: Lock,
}

fn is_free(lock: &Lock) -> bool {
    *lock == Lock::Free
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vehicle {
    pub id: VehicleId,
    pub owner: CompanyId,
    pub capacity: u32,
    pub max_duration: Time,
    pub start_depot: NodeId,
    pub end_depot: NodeId,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Company {
    pub id: CompanyId,
    pub start_depot: NodeId,
    pub end_depot: NodeId,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeKind {
    DepotStart,
    DepotEnd,
    Pickup,
    Drop,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Node {
    pub kind: NodeKind,
    pub window: TimeWindow,
    pub service: Time,
    pub flow: i64,
    /// Company index for depots, request index for pickups and drops.
    pub owner: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub companies: Vec<Company>,
    pub vehicles: Vec<Vehicle>,
    pub requests: Vec<Request>,
    pub nodes: Vec<Node>,
    pub horizon: Time,
    pub seed: Option<u64>,
    travel: Vec<Time>,
    cost: Option<Vec<Cost>>,
    request_company: Vec<usize>,
    vehicle_company: Vec<usize>,
    company_vehicles: Vec<Vec<usize>>,
    company_requests: Vec<Vec<usize>>,
}

impl Instance {
    /// Builds an instance from its parts. Records are sorted by id and their
    /// node-id fields are overwritten with the canonical numbering; the travel
    /// matrix must already be in canonical order. Costs equal travel times.
    pub fn new(
        mut companies: Vec<Company>,
        mut vehicles: Vec<Vehicle>,
        mut requests: Vec<Request>,
        travel: Vec<Vec<Time>>,
        horizon: Time,
        seed: Option<u64>,
    ) -> Result<Self> {
        companies.sort_by_key(|c| c.id);
        vehicles.sort_by_key(|v| v.id);
        requests.sort_by_key(|r| r.id);
        ensure_unique("company", companies.iter().map(|c| c.id))?;
        ensure_unique("vehicle", vehicles.iter().map(|v| v.id))?;
        ensure_unique("request", requests.iter().map(|r| r.id))?;

        let m = companies.len();
        let c = requests.len();
        let n = 2 * m + 2 * c;
        if travel.len() != n || travel.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidInstance(format!(
                "travel matrix must be {n}x{n} for {m} companies and {c} requests"
            )));
        }

        let company_pos: BTreeMap<CompanyId, usize> =
            companies.iter().enumerate().map(|(i, co)| (co.id, i)).collect();
        let lookup = |owner: CompanyId, what: &str, id: u32| {
            company_pos.get(&owner).copied().ok_or_else(|| {
                Error::InvalidInstance(format!("{what} {id} has unknown owner company {owner}"))
            })
        };

        for (i, co) in companies.iter_mut().enumerate() {
            co.start_depot = i;
            co.end_depot = m + i;
        }
        let mut vehicle_company = Vec::with_capacity(vehicles.len());
        let mut company_vehicles = vec![Vec::new(); m];
        for (k, v) in vehicles.iter_mut().enumerate() {
            let ci = lookup(v.owner, "vehicle", v.id)?;
            v.start_depot = ci;
            v.end_depot = m + ci;
            vehicle_company.push(ci);
            company_vehicles[ci].push(k);
        }
        let mut request_company = Vec::with_capacity(c);
        let mut company_requests = vec![Vec::new(); m];
        for (r, req) in requests.iter_mut().enumerate() {
            let ci = lookup(req.owner, "request", req.id)?;
            req.origin = 2 * m + r;
            req.destination = 2 * m + c + r;
            request_company.push(ci);
            company_requests[ci].push(r);
        }

        let mut nodes = Vec::with_capacity(n);
        for kind in [NodeKind::DepotStart, NodeKind::DepotEnd] {
            for ci in 0..m {
                nodes.push(Node {
                    kind,
                    window: TimeWindow::new(0, horizon),
                    service: 0,
                    flow: 0,
                    owner: ci,
                });
            }
        }
        for (r, req) in requests.iter().enumerate() {
            nodes.push(Node {
                kind: NodeKind::Pickup,
                window: req.pickup_window,
                service: req.service_pickup,
                flow: req.passengers as i64,
                owner: r,
            });
        }
        for (r, req) in requests.iter().enumerate() {
            nodes.push(Node {
                kind: NodeKind::Drop,
                window: req.drop_window,
                service: req.service_drop,
                flow: -(req.passengers as i64),
                owner: r,
            });
        }

        Ok(Instance {
            companies,
            vehicles,
            requests,
            nodes,
            horizon,
            seed,
            travel: travel.into_iter().flatten().collect(),
            cost: None,
            request_company,
            vehicle_company,
            company_vehicles,
            company_requests,
        })
    }

    /// Replaces the default `c_ij = t_ij` costs.
    pub fn with_cost_matrix(mut self, cost: Vec<Vec<Cost>>) -> Result<Self> {
        let n = self.n_nodes();
        if cost.len() != n || cost.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidInstance(format!("cost matrix must be {n}x{n}")));
        }
        self.cost = Some(cost.into_iter().flatten().collect());
        Ok(self)
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_companies(&self) -> usize {
        self.companies.len()
    }

    pub fn n_requests(&self) -> usize {
        self.requests.len()
    }

    pub fn n_vehicles(&self) -> usize {
        self.vehicles.len()
    }

    #[inline]
    pub fn t(&self, i: NodeId, j: NodeId) -> Time {
        self.travel[i * self.nodes.len() + j]
    }

    #[inline]
    pub fn c(&self, i: NodeId, j: NodeId) -> Cost {
        match &self.cost {
            Some(cost) => cost[i * self.nodes.len() + j],
            None => self.t(i, j),
        }
    }

    pub fn has_custom_costs(&self) -> bool {
        self.cost.is_some()
    }

    pub fn travel_rows(&self) -> Vec<Vec<Time>> {
        self.travel.chunks(self.nodes.len()).map(<[Time]>::to_vec).collect()
    }

    pub fn cost_rows(&self) -> Option<Vec<Vec<Cost>>> {
        self.cost
            .as_ref()
            .map(|c| c.chunks(self.nodes.len()).map(<[Cost]>::to_vec).collect())
    }

    /// Mutable travel time, for building test fixtures and perturbations.
    pub fn set_travel(&mut self, i: NodeId, j: NodeId, value: Time) {
        let n = self.nodes.len();
        self.travel[i * n + j] = value;
    }

    #[inline]
    pub fn pickup(&self, r: usize) -> NodeId {
        2 * self.companies.len() + r
    }

    #[inline]
    pub fn drop_node(&self, r: usize) -> NodeId {
        2 * self.companies.len() + self.requests.len() + r
    }

    /// Request index served at a pickup or drop node.
    #[inline]
    pub fn request_at(&self, node: NodeId) -> Option<usize> {
        let base = 2 * self.companies.len();
        if node < base {
            None
        } else {
            Some((node - base) % self.requests.len().max(1))
        }
    }

    #[inline]
    pub fn is_pickup(&self, node: NodeId) -> bool {
        let base = 2 * self.companies.len();
        node >= base && node < base + self.requests.len()
    }

    #[inline]
    pub fn is_drop(&self, node: NodeId) -> bool {
        node >= 2 * self.companies.len() + self.requests.len() && node < self.nodes.len()
    }

    pub fn company_index(&self, id: CompanyId) -> Option<usize> {
        self.companies.binary_search_by_key(&id, |c| c.id).ok()
    }

    pub fn request_index(&self, id: RequestId) -> Option<usize> {
        self.requests.binary_search_by_key(&id, |r| r.id).ok()
    }

    pub fn vehicle_index(&self, id: VehicleId) -> Option<usize> {
        self.vehicles.binary_search_by_key(&id, |v| v.id).ok()
    }

    /// Company index owning request `r`.
    #[inline]
    pub fn request_owner(&self, r: usize) -> usize {
        self.request_company[r]
    }

    /// Company index owning vehicle `k`.
    #[inline]
    pub fn vehicle_owner(&self, k: usize) -> usize {
        self.vehicle_company[k]
    }

    pub fn vehicles_of(&self, company: usize) -> &[usize] {
        &self.company_vehicles[company]
    }

    pub fn requests_of(&self, company: usize) -> &[usize] {
        &self.company_requests[company]
    }

    pub fn start_depot(&self, k: usize) -> NodeId {
        self.vehicle_company[k]
    }

    pub fn end_depot(&self, k: usize) -> NodeId {
        self.companies.len() + self.vehicle_company[k]
    }

    /// Whether the lock on request `r` lets vehicle `k` serve it.
    pub fn lock_allows(&self, r: usize, k: usize) -> bool {
        match &self.requests[r].lock {
            Lock::Free => true,
            Lock::MustStayWithOwner => self.vehicle_owner(k) == self.request_owner(r),
            Lock::Denylist { companies } => {
                let server = self.companies[self.vehicle_owner(k)].id;
                !companies.contains(&server)
            }
        }
    }

    pub fn max_travel(&self) -> Time {
        self.travel.iter().copied().max().unwrap_or(0)
    }

    /// Whether travel times and costs both satisfy the triangle inequality.
    pub fn is_metric(&self) -> bool {
        let n = self.nodes.len();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if self.t(i, k) > self.t(i, j) + self.t(j, k)
                        || self.c(i, k) > self.c(i, j) + self.c(j, k)
                    {
                        return false;
                    }
                }
            }
        }
        true
    }
}

fn ensure_unique(what: &str, ids: impl Iterator<Item = u32>) -> Result<()> {
    let mut seen = BTreeSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(Error::InvalidInstance(format!("duplicate {what} id {id}")));
        }
    }
    Ok(())
}

/// One failed invariant found by [`validate_instance`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub subject: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.subject, self.message)
    }
}

fn violation(subject: String, message: String) -> Violation {
    Violation { subject, message }
}

/// Lists every broken instance invariant. An empty list means the instance is valid.
pub fn validate_instance(instance: &Instance) -> Vec<Violation> {
    let mut out = Vec::new();
    let m = instance.n_companies();
    let c = instance.n_requests();
    let n = instance.n_nodes();

    if n != 2 * m + 2 * c {
        out.push(violation(
            "instance".into(),
            format!("node count {n} differs from 2*{m} + 2*{c}"),
        ));
        return out;
    }

    for (r, req) in instance.requests.iter().enumerate() {
        let subject = format!("request {}", req.id);
        if req.max_ride < req.direct_time {
            out.push(violation(
                subject.clone(),
                format!("max ride {} < direct time {}", req.max_ride, req.direct_time),
            ));
        }
        for (name, w) in [("pickup", req.pickup_window), ("drop", req.drop_window)] {
            if w.earliest > w.latest {
                out.push(violation(
                    subject.clone(),
                    format!("{name} window [{}, {}] is empty", w.earliest, w.latest),
                ));
            }
        }
        if req.passengers < 1 {
            out.push(violation(subject.clone(), "no passengers".into()));
        }
        let (o, d) = (instance.pickup(r), instance.drop_node(r));
        if req.origin != o || req.destination != d {
            out.push(violation(subject.clone(), "node ids are not canonical".into()));
        }
        if req.direct_time != instance.t(o, d) {
            out.push(violation(
                subject.clone(),
                format!(
                    "direct time {} differs from travel time {}",
                    req.direct_time,
                    instance.t(o, d)
                ),
            ));
        }
        if let Lock::Denylist { companies } = &req.lock {
            for id in companies {
                if instance.company_index(*id).is_none() {
                    out.push(violation(subject.clone(), format!("denylist names unknown company {id}")));
                }
            }
        }
    }

    for (k, v) in instance.vehicles.iter().enumerate() {
        let subject = format!("vehicle {}", v.id);
        if v.capacity < 1 {
            out.push(violation(subject.clone(), "capacity must be at least 1".into()));
        }
        if v.max_duration <= 0 {
            out.push(violation(subject.clone(), "max duration must be positive".into()));
        }
        let owner = &instance.companies[instance.vehicle_owner(k)];
        if v.start_depot != owner.start_depot || v.end_depot != owner.end_depot {
            out.push(violation(subject, format!("depots do not belong to company {}", owner.id)));
        }
    }

    for (i, node) in instance.nodes.iter().enumerate() {
        let subject = format!("node {i}");
        match node.kind {
            NodeKind::DepotStart | NodeKind::DepotEnd => {
                if node.flow != 0 {
                    out.push(violation(subject.clone(), format!("depot flow {} != 0", node.flow)));
                }
                if node.window != TimeWindow::new(0, instance.horizon) {
                    out.push(violation(
                        subject,
                        format!("depot window differs from [0, {}]", instance.horizon),
                    ));
                }
            }
            NodeKind::Pickup | NodeKind::Drop => {
                let Some(req) = instance.requests.get(node.owner) else {
                    out.push(violation(subject, "refers to no request".into()));
                    continue;
                };
                let p = req.passengers as i64;
                let (flow, window, service) = if node.kind == NodeKind::Pickup {
                    (p, req.pickup_window, req.service_pickup)
                } else {
                    (-p, req.drop_window, req.service_drop)
                };
                if node.flow != flow {
                    out.push(violation(subject.clone(), format!("flow {} != {flow}", node.flow)));
                }
                if node.window != window || node.service != service {
                    out.push(violation(subject, format!("attributes differ from request {}", req.id)));
                }
            }
        }
    }

    for i in 0..n {
        if instance.t(i, i) != 0 {
            out.push(violation(format!("arc ({i},{i})"), "travel time of self loop is not 0".into()));
        }
        for j in 0..n {
            if instance.t(i, j) < 0 {
                out.push(violation(format!("arc ({i},{j})"), "negative travel time".into()));
            }
            if instance.c(i, j) < 0 {
                out.push(violation(format!("arc ({i},{j})"), "negative cost".into()));
            }
        }
    }
    out
}

/// Which balance constraints are active.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// No collaboration: every company serves its own requests.
    Nc,
    /// Unconstrained pooling.
    Uc,
    /// Time-balanced collaboration.
    T,
    /// Customer-balanced collaboration.
    C,
    /// Time- and customer-balanced collaboration.
    Tc,
}

impl Mode {
    pub const ALL: [Mode; 5] = [Mode::Nc, Mode::Uc, Mode::T, Mode::C, Mode::Tc];

    pub fn bounds_time(self) -> bool {
        matches!(self, Mode::T | Mode::Tc)
    }

    pub fn bounds_customers(self) -> bool {
        matches!(self, Mode::C | Mode::Tc)
    }

    /// Whether the thresholds (and so α) change the feasible set.
    pub fn is_balanced(self) -> bool {
        self.bounds_time() || self.bounds_customers()
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Nc => "NC",
            Mode::Uc => "UC",
            Mode::T => "T",
            Mode::C => "C",
            Mode::Tc => "TC",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nc" => Ok(Mode::Nc),
            "uc" => Ok(Mode::Uc),
            "t" => Ok(Mode::T),
            "c" => Ok(Mode::C),
            "tc" => Ok(Mode::Tc),
            _ => Err(Error::InvalidParams(format!("unknown mode `{s}`"))),
        }
    }
}

/// How a fractional customer threshold becomes an integer.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CustomerRounding {
    #[default]
    Floor,
    HalfUp,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExplicitThreshold {
    #[serde(default)]
    pub time: Option<f64>,
    #[serde(default)]
    pub customers: Option<i64>,
}

/// Prior-period balance carried into today's constraint.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BalanceOffset {
    pub time: Time,
    pub customers: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BalanceSpec {
    pub mode: Mode,
    #[serde(default)]
    pub alpha_time: f64,
    #[serde(default)]
    pub alpha_customers: f64,
    #[serde(default)]
    pub rounding: CustomerRounding,
    #[serde(default)]
    pub explicit: BTreeMap<CompanyId, ExplicitThreshold>,
    #[serde(default)]
    pub offsets: BTreeMap<CompanyId, BalanceOffset>,
}

impl BalanceSpec {
    pub fn new(mode: Mode) -> Self {
        BalanceSpec {
            mode,
            alpha_time: 0.0,
            alpha_customers: 0.0,
            rounding: CustomerRounding::Floor,
            explicit: BTreeMap::new(),
            offsets: BTreeMap::new(),
        }
    }

    /// Same percentage for time and customer thresholds.
    pub fn with_alpha(mode: Mode, alpha: f64) -> Self {
        BalanceSpec {
            alpha_time: alpha,
            alpha_customers: alpha,
            ..BalanceSpec::new(mode)
        }
    }

    pub fn offset(&self, company: CompanyId) -> BalanceOffset {
        self.offsets.get(&company).copied().unwrap_or_default()
    }
}

/// Per-company balance bounds: `|S_m + S'_m| <= time`, `|U_m + U'_m| <= customers`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub time: f64,
    pub customers: i64,
}

// Absorbs representation error such as 0.29 * 100 = 28.999999999999996.
const ROUNDING_SLACK: f64 = 1e-9;

/// Derives per-company thresholds (indexed like `instance.companies`).
pub fn compute_thresholds(instance: &Instance, spec: &BalanceSpec) -> Result<Vec<Threshold>> {
    for alpha in [spec.alpha_time, spec.alpha_customers] {
        if alpha < 0.0 || alpha.is_nan() {
            return Err(Error::NegativeAlpha(alpha));
        }
    }
    let mut out = Vec::with_capacity(instance.n_companies());
    for (m, company) in instance.companies.iter().enumerate() {
        let owned = instance.requests_of(m);
        let total_time: Time = owned.iter().map(|&r| instance.requests[r].direct_time).sum();
        let total_pax: i64 = owned.iter().map(|&r| instance.requests[r].passengers as i64).sum();

        let explicit = spec.explicit.get(&company.id).copied().unwrap_or_default();
        let time = explicit.time.unwrap_or(spec.alpha_time * total_time as f64);
        let customers = explicit.customers.unwrap_or_else(|| {
            let raw = spec.alpha_customers * total_pax as f64;
            match spec.rounding {
                CustomerRounding::Floor => (raw + ROUNDING_SLACK).floor() as i64,
                CustomerRounding::HalfUp => (raw + 0.5 + ROUNDING_SLACK).floor() as i64,
            }
        });
        if time < 0.0 || customers < 0 {
            return Err(Error::InvalidParams(format!(
                "negative threshold for company {}",
                company.id
            )));
        }
        out.push(Threshold { time, customers });
    }
    Ok(out)
}

/// Tolerance when comparing an integral balance with a fractional threshold.
pub const THRESHOLD_EPS: f64 = 1e-6;


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    fn two_company_instance() -> Instance {
        line_instance(&[0, 100], &[(0, 10, 40), (0, 20, 90), (1, 60, 30), (1, 80, 120)])
    }

    #[test]
    fn well_formed_instance_validates() {
        let inst = two_company_instance();
        assert_eq!(inst.n_nodes(), 12);
        assert!(validate_instance(&inst).is_empty());
        let flow: i64 = inst.nodes.iter().map(|n| n.flow).sum();
        assert_eq!(flow, 0);
    }

    #[test]
    fn short_max_ride_is_reported() {
        let mut inst = two_company_instance();
        inst.requests[2].max_ride = inst.requests[2].direct_time - 1;
        let report = validate_instance(&inst);
        assert_eq!(report.len(), 1);
        assert_eq!(report[0].subject, "request 2");
    }

    #[test]
    fn zero_pickup_flow_is_reported() {
        let mut inst = two_company_instance();
        let node = inst.pickup(1);
        inst.nodes[node].flow = 0;
        let report = validate_instance(&inst);
        assert_eq!(report.len(), 1);
        assert_eq!(report[0].subject, format!("node {node}"));
    }

    #[test]
    fn canonical_numbering() {
        let inst = two_company_instance();
        assert_eq!(inst.companies[1].start_depot, 1);
        assert_eq!(inst.companies[1].end_depot, 3);
        assert_eq!(inst.requests[0].origin, 4);
        assert_eq!(inst.requests[0].destination, 8);
        assert_eq!(inst.request_at(9), Some(1));
        assert!(inst.is_pickup(7) && !inst.is_pickup(8) && inst.is_drop(8));
    }

    #[test]
    fn zero_alpha_gives_zero_time_threshold() {
        let inst = two_company_instance();
        let th = compute_thresholds(&inst, &BalanceSpec::with_alpha(Mode::T, 0.0)).unwrap();
        assert!(th.iter().all(|t| t.time == 0.0 && t.customers == 0));
    }

    #[test]
    fn time_threshold_is_share_of_direct_times() {
        let inst = line_instance(&[0, 0], &[(0, 0, 300), (0, 0, 700), (1, 0, 5)]);
        let th = compute_thresholds(&inst, &BalanceSpec::with_alpha(Mode::T, 0.1)).unwrap();
        assert!((th[0].time - 100.0).abs() < 1e-9);
    }

    #[test]
    fn customer_threshold_floors() {
        let reqs: Vec<_> = (0..10).map(|i| (0, i, i + 1)).collect();
        let inst = line_instance(&[0], &reqs);
        let mut spec = BalanceSpec::with_alpha(Mode::C, 0.25);
        assert_eq!(compute_thresholds(&inst, &spec).unwrap()[0].customers, 2);
        spec.rounding = CustomerRounding::HalfUp;
        assert_eq!(compute_thresholds(&inst, &spec).unwrap()[0].customers, 3);
        // 0.29 * 100 must not floor to 28
        let reqs: Vec<_> = (0..100).map(|i| (0, i, i + 1)).collect();
        let inst = line_instance(&[0], &reqs);
        let spec = BalanceSpec::with_alpha(Mode::C, 0.29);
        assert_eq!(compute_thresholds(&inst, &spec).unwrap()[0].customers, 29);
    }

    #[test]
    fn explicit_thresholds_override() {
        let inst = two_company_instance();
        let mut spec = BalanceSpec::with_alpha(Mode::Tc, 0.5);
        spec.explicit.insert(1, ExplicitThreshold { time: Some(7.0), customers: Some(4) });
        let th = compute_thresholds(&inst, &spec).unwrap();
        assert_eq!(th[1], Threshold { time: 7.0, customers: 4 });
        assert!((th[0].time - 50.0).abs() < 1e-9);
    }

    #[test]
    fn negative_alpha_is_rejected() {
        let inst = two_company_instance();
        let spec = BalanceSpec::with_alpha(Mode::T, -0.1);
        assert!(matches!(compute_thresholds(&inst, &spec), Err(Error::NegativeAlpha(_))));
    }

    #[test]
    fn lock_rules() {
        let mut inst = two_company_instance();
        inst.requests[0].lock = Lock::MustStayWithOwner;
        inst.requests[2].lock = Lock::Denylist { companies: vec![0] };
        assert!(inst.lock_allows(0, 0) && !inst.lock_allows(0, 1));
        assert!(!inst.lock_allows(2, 0) && inst.lock_allows(2, 1));
        assert!(inst.lock_allows(1, 1));
    }

    #[test]
    fn mode_parsing() {
        for mode in Mode::ALL {
            assert_eq!(mode.to_string().parse::<Mode>().unwrap(), mode);
        }
        assert!("xx".parse::<Mode>().is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn random_instance(times: Vec<(u8, i64)>) -> Instance {
            let reqs: Vec<_> = times.iter().map(|&(o, t)| ((o % 3) as u32, 0, t)).collect();
            line_instance(&[0, 5, 9], &reqs)
        }

        proptest! {
            #[test]
            fn thresholds_scale_with_travel_times(
                times in prop::collection::vec((0u8..3, 1i64..5000), 1..12),
                lambda in 1i64..50,
                eighths in 0u32..16,
            ) {
                // alpha is a multiple of 1/8 so products are exact in binary
                let alpha = eighths as f64 / 8.0;
                let base = random_instance(times.clone());
                let scaled = random_instance(times.iter().map(|&(o, t)| (o, t * lambda)).collect());
                let spec = BalanceSpec::with_alpha(Mode::T, alpha);
                let a = compute_thresholds(&base, &spec).unwrap();
                let b = compute_thresholds(&scaled, &spec).unwrap();
                for (x, y) in a.iter().zip(&b) {
                    prop_assert_eq!(x.time * lambda as f64, y.time);
                }
            }

            #[test]
            fn thresholds_are_monotone_in_alpha(
                times in prop::collection::vec((0u8..3, 1i64..5000), 1..12),
                lo in 0.0f64..1.0,
                step in 0.0f64..1.0,
            ) {
                let inst = random_instance(times);
                let a = compute_thresholds(&inst, &BalanceSpec::with_alpha(Mode::Tc, lo)).unwrap();
                let b = compute_thresholds(&inst, &BalanceSpec::with_alpha(Mode::Tc, lo + step)).unwrap();
                for (x, y) in a.iter().zip(&b) {
                    prop_assert!(y.time >= x.time);
                    prop_assert!(y.customers >= x.customers);
                }
            }
        }
    }
}
