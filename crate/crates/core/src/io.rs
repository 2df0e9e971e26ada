//! JSON files: instances, solutions, balance offsets.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    compute_thresholds, BalanceOffset, BalanceSpec, Company, CompanyId, Cost, Instance, Mode, NodeId, Request,
    Time, Vehicle, VehicleId, DEFAULT_HORIZON,
};
use crate::schedule::{Evaluator, Route, Schedule};
use crate::solution::{balances, solution_cost, Solution};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub companies: Vec<Company>,
    pub vehicles: Vec<Vehicle>,
    pub requests: Vec<Request>,
    pub matrix: Vec<Vec<Time>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost_matrix: Option<Vec<Vec<Cost>>>,
    #[serde(default = "default_horizon")]
    pub horizon: Time,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_horizon() -> Time {
    DEFAULT_HORIZON
}

impl From<&Instance> for InstanceFile {
    fn from(inst: &Instance) -> Self {
        InstanceFile {
            companies: inst.companies.clone(),
            vehicles: inst.vehicles.clone(),
            requests: inst.requests.clone(),
            matrix: inst.travel_rows(),
            cost_matrix: inst.cost_rows(),
            horizon: inst.horizon,
            seed: inst.seed,
        }
    }
}

impl InstanceFile {
    /// Builds the instance, rejecting node ids that differ from the canonical
    /// numbering the matrix is indexed by.
    pub fn into_instance(self) -> Result<Instance> {
        let declared: BTreeMap<String, NodeId> = node_refs(&self.companies, &self.vehicles, &self.requests);
        let cost = self.cost_matrix;
        let mut inst =
            Instance::new(self.companies, self.vehicles, self.requests, self.matrix, self.horizon, self.seed)?;
        let canonical = node_refs(&inst.companies, &inst.vehicles, &inst.requests);
        for (field, id) in &declared {
            if canonical[field] != *id {
                return Err(Error::InvalidInstance(format!(
                    "{field} is node {id}, canonical numbering requires {}",
                    canonical[field]
                )));
            }
        }
        if let Some(cost) = cost {
            inst = inst.with_cost_matrix(cost)?;
        }
        Ok(inst)
    }
}

fn node_refs(companies: &[Company], vehicles: &[Vehicle], requests: &[Request]) -> BTreeMap<String, NodeId> {
    let mut out = BTreeMap::new();
    for c in companies {
        out.insert(format!("company {} start_depot", c.id), c.start_depot);
        out.insert(format!("company {} end_depot", c.id), c.end_depot);
    }
    for v in vehicles {
        out.insert(format!("vehicle {} start_depot", v.id), v.start_depot);
        out.insert(format!("vehicle {} end_depot", v.id), v.end_depot);
    }
    for r in requests {
        out.insert(format!("request {} origin", r.id), r.origin);
        out.insert(format!("request {} destination", r.id), r.destination);
    }
    out
}

pub fn instance_to_string(inst: &Instance) -> String {
    let mut s = serde_json::to_string_pretty(&InstanceFile::from(inst)).expect("instance serializes");
    s.push('\n');
    s
}

pub fn instance_from_str(text: &str, origin: &Path) -> Result<Instance> {
    let file: InstanceFile = serde_json::from_str(text).map_err(|e| Error::parse(origin, e))?;
    file.into_instance().map_err(|e| match e {
        Error::InvalidInstance(msg) => Error::parse(origin, msg),
        other => other,
    })
}

pub fn read_instance(path: impl AsRef<Path>) -> Result<Instance> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    instance_from_str(&text, path)
}

pub fn write_instance(inst: &Instance, path: impl AsRef<Path>) -> Result<()> {
    write_text(path, &instance_to_string(inst))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompanyReport {
    pub company: CompanyId,
    pub time_balance: Time,
    pub customer_balance: i64,
    pub offset_time: Time,
    pub offset_customers: i64,
    pub threshold_time: f64,
    pub threshold_customers: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RouteReport {
    pub vehicle: VehicleId,
    pub visits: Vec<NodeId>,
    pub cost: Cost,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Schedule>,
}

/// A solution with everything needed to audit it against its instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub mode: Mode,
    pub alpha_time: f64,
    pub alpha_customers: f64,
    pub cost: Cost,
    pub companies: Vec<CompanyReport>,
    pub routes: Vec<RouteReport>,
}

impl SolutionFile {
    pub fn new(inst: &Instance, solution: &Solution, spec: &BalanceSpec) -> Result<Self> {
        let thresholds = compute_thresholds(inst, spec)?;
        let bal = balances(inst, solution);
        let companies = inst
            .companies
            .iter()
            .enumerate()
            .map(|(m, c)| {
                let off = spec.offset(c.id);
                CompanyReport {
                    company: c.id,
                    time_balance: bal[m].time,
                    customer_balance: bal[m].customers,
                    offset_time: off.time,
                    offset_customers: off.customers,
                    threshold_time: thresholds[m].time,
                    threshold_customers: thresholds[m].customers,
                }
            })
            .collect();
        let mut eval = Evaluator::new();
        let routes = solution
            .routes
            .iter()
            .map(|r| RouteReport {
                vehicle: inst.vehicles[r.vehicle].id,
                visits: r.visits.clone(),
                cost: r.cost(inst),
                schedule: eval.schedule(inst, r).ok(),
            })
            .collect();
        Ok(SolutionFile {
            mode: spec.mode,
            alpha_time: spec.alpha_time,
            alpha_customers: spec.alpha_customers,
            cost: solution_cost(inst, solution),
            companies,
            routes,
        })
    }

    /// Routes only; reported balances and costs are not trusted.
    pub fn to_solution(&self, inst: &Instance) -> Result<Solution> {
        let mut sol = Solution::empty(inst);
        let mut seen = vec![false; inst.n_vehicles()];
        for r in &self.routes {
            let k = inst
                .vehicle_index(r.vehicle)
                .ok_or_else(|| Error::InvalidInstance(format!("solution names unknown vehicle {}", r.vehicle)))?;
            if std::mem::replace(&mut seen[k], true) {
                return Err(Error::InvalidInstance(format!("vehicle {} listed twice", r.vehicle)));
            }
            if let Some(&bad) = r.visits.iter().find(|&&n| n >= inst.n_nodes()) {
                return Err(Error::InvalidInstance(format!("vehicle {} visits unknown node {bad}", r.vehicle)));
            }
            sol.routes[k] = Route { vehicle: k, visits: r.visits.clone() };
        }
        Ok(sol)
    }

    /// The balance spec this file was produced under.
    pub fn spec(&self) -> BalanceSpec {
        BalanceSpec {
            alpha_time: self.alpha_time,
            alpha_customers: self.alpha_customers,
            offsets: self
                .companies
                .iter()
                .map(|c| (c.company, BalanceOffset { time: c.offset_time, customers: c.offset_customers }))
                .collect(),
            ..BalanceSpec::new(self.mode)
        }
    }
}

pub fn solution_to_string(file: &SolutionFile) -> String {
    to_json(file)
}

pub fn write_solution(file: &SolutionFile, path: impl AsRef<Path>) -> Result<()> {
    write_text(path, &solution_to_string(file))
}

pub fn read_solution(path: impl AsRef<Path>) -> Result<SolutionFile> {
    read_json(path)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OffsetEntry {
    pub company: CompanyId,
    #[serde(default)]
    pub time: Time,
    #[serde(default)]
    pub customers: i64,
}

pub fn read_offsets(path: impl AsRef<Path>) -> Result<BTreeMap<CompanyId, BalanceOffset>> {
    let entries: Vec<OffsetEntry> = read_json(path)?;
    Ok(entries
        .into_iter()
        .map(|e| (e.company, BalanceOffset { time: e.time, customers: e.customers }))
        .collect())
}

pub fn offsets_to_string(offsets: &BTreeMap<CompanyId, BalanceOffset>) -> String {
    let entries: Vec<OffsetEntry> = offsets
        .iter()
        .map(|(&company, o)| OffsetEntry { company, time: o.time, customers: o.customers })
        .collect();
    to_json(&entries)
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("value serializes");
    s.push('\n');
    s
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
