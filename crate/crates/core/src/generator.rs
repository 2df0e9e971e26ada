//! Synthetic planar instances in the size groups of the benchmark.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Company, Instance, Lock, Request, Time, TimeWindow, Vehicle};
use crate::schedule::{Evaluator, Insertion, Route};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Group {
    A,
    B,
    C,
    D,
    Custom,
}

impl Group {
    /// Companies and requests per company.
    pub fn size(self) -> Option<(usize, usize)> {
        match self {
            Group::A => Some((2, 4)),
            Group::B => Some((2, 5)),
            Group::C => Some((4, 12)),
            Group::D => Some((10, 10)),
            Group::Custom => None,
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Group::A => "A",
            Group::B => "B",
            Group::C => "C",
            Group::D => "D",
            Group::Custom => "custom",
        };
        f.write_str(s)
    }
}

impl FromStr for Group {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "a" => Ok(Group::A),
            "b" => Ok(Group::B),
            "c" => Ok(Group::C),
            "d" => Ok(Group::D),
            "custom" => Ok(Group::Custom),
            _ => Err(Error::InvalidParams(format!("unknown group '{s}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorParams {
    pub companies: usize,
    /// Requests owned by each company; a single entry applies to all.
    pub requests_per_company: Vec<usize>,
    pub vehicles_per_company: usize,
    /// Travel time along the diagonal of the square region.
    pub max_trip: f64,
    pub capacity: u32,
    pub max_duration: Time,
    pub horizon: Time,
    pub max_ride: Time,
    pub service: Time,
    pub passengers: u32,
    pub window_width: Time,
    /// Only keep a request if it fits into its owner's routes built so far,
    /// which makes the no-collaboration plan feasible by construction.
    pub owner_feasible: bool,
    /// Redraws per request before giving up on a serviceable one.
    pub max_attempts: usize,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        GeneratorParams {
            companies: 2,
            requests_per_company: vec![4],
            vehicles_per_company: 1,
            max_trip: 2400.0,
            capacity: 3,
            max_duration: 20_000,
            horizon: 20_000,
            max_ride: 3000,
            service: 120,
            passengers: 1,
            window_width: 2000,
            owner_feasible: true,
            max_attempts: 10_000,
        }
    }
}

impl GeneratorParams {
    pub fn for_group(group: Group) -> Self {
        let mut p = GeneratorParams::default();
        if let Some((m, c)) = group.size() {
            p.companies = m;
            p.requests_per_company = vec![c];
        }
        p
    }

    fn requests_of(&self, company: usize) -> usize {
        match self.requests_per_company.as_slice() {
            [] => 0,
            [one] => *one,
            many => many[company % many.len()],
        }
    }

    fn check(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParams(msg.to_string()));
        if self.companies == 0 || self.vehicles_per_company == 0 {
            return bad("at least one company and one vehicle per company");
        }
        if !(self.max_trip > 0.0) {
            return bad("max_trip must be positive");
        }
        if self.window_width < 0 || self.window_width > self.horizon {
            return bad("window_width must lie in [0, horizon]");
        }
        if self.capacity == 0 || self.passengers == 0 || self.passengers > self.capacity {
            return bad("need 1 <= passengers <= capacity");
        }
        if self.max_duration <= 0 || self.horizon <= 0 || self.service < 0 {
            return bad("durations must be positive");
        }
        if (self.max_ride as f64) < self.max_trip.ceil() {
            return bad("max_ride below the longest possible trip");
        }
        Ok(())
    }
}

/// Generates a group instance with the default protocol.
pub fn generate(group: Group, seed: u64) -> Result<Instance> {
    generate_with(&GeneratorParams::for_group(group), seed)
}

pub fn generate_with(params: &GeneratorParams, seed: u64) -> Result<Instance> {
    params.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = params.max_trip / std::f64::consts::SQRT_2;
    let point = |rng: &mut ChaCha8Rng| (rng.gen_range(0.0..=side), rng.gen_range(0.0..=side));

    let m = params.companies;
    let depots: Vec<(f64, f64)> = (0..m).map(|_| point(&mut rng)).collect();
    let companies: Vec<Company> =
        (0..m).map(|i| Company { id: i as u32, start_depot: i, end_depot: m + i }).collect();
    let vehicles: Vec<Vehicle> = (0..m * params.vehicles_per_company)
        .map(|k| {
            let owner = k / params.vehicles_per_company;
            Vehicle {
                id: k as u32,
                owner: owner as u32,
                capacity: params.capacity,
                max_duration: params.max_duration,
                start_depot: owner,
                end_depot: m + owner,
            }
        })
        .collect();

    let owners: Vec<usize> = (0..m).flat_map(|i| std::iter::repeat(i).take(params.requests_of(i))).collect();
    let c = owners.len();
    let open = TimeWindow::new(0, params.horizon);

    // endpoints and windows are redrawn until the request fits its owner's fleet
    let mut ends: Vec<((f64, f64), (f64, f64))> = Vec::with_capacity(c);
    let mut windows: Vec<(TimeWindow, TimeWindow)> = Vec::with_capacity(c);
    let mut fleets: Vec<Fleet> = (0..m).map(|i| Fleet::new(depots[i], params.vehicles_per_company)).collect();
    let mut eval = Evaluator::new();
    for (r, &owner) in owners.iter().enumerate() {
        let mut attempt = 0;
        loop {
            attempt += 1;
            if attempt > params.max_attempts {
                return Err(Error::InvalidParams(format!(
                    "no serviceable request {r} after {} draws",
                    params.max_attempts
                )));
            }
            let (o, d) = (point(&mut rng), point(&mut rng));
            let start = rng.gen_range(0..=params.horizon - params.window_width);
            let tight = TimeWindow::new(start, start + params.window_width);
            let (pw, dw) = if rng.gen_bool(0.5) { (tight, open) } else { (open, tight) };
            let accepted = if params.owner_feasible {
                fleets[owner].try_add(params, &mut eval, (o, d, pw, dw))?
            } else {
                Fleet::new(depots[owner], 1).try_add(params, &mut eval, (o, d, pw, dw))?
            };
            if accepted {
                ends.push((o, d));
                windows.push((pw, dw));
                break;
            }
        }
    }

    let mut coords = Vec::with_capacity(2 * m + 2 * c);
    coords.extend(depots.iter().copied());
    coords.extend(depots.iter().copied());
    coords.extend(ends.iter().map(|e| e.0));
    coords.extend(ends.iter().map(|e| e.1));
    let travel = matrix(&coords);

    let requests: Vec<Request> = owners
        .iter()
        .enumerate()
        .map(|(r, &owner)| Request {
            id: r as u32,
            owner: owner as u32,
            origin: 2 * m + r,
            destination: 2 * m + c + r,
            passengers: params.passengers,
            direct_time: travel[2 * m + r][2 * m + c + r],
            service_pickup: params.service,
            service_drop: params.service,
            pickup_window: windows[r].0,
            drop_window: windows[r].1,
            max_ride: params.max_ride,
            lock: Lock::Free,
        })
        .collect();

    Instance::new(companies, vehicles, requests, travel, params.horizon, Some(seed))
}

fn travel_time(a: (f64, f64), b: (f64, f64)) -> Time {
    (a.0 - b.0).hypot(a.1 - b.1).ceil() as Time
}

fn matrix(coords: &[(f64, f64)]) -> Vec<Vec<Time>> {
    coords.iter().map(|&a| coords.iter().map(|&b| travel_time(a, b)).collect()).collect()
}

type Draw = ((f64, f64), (f64, f64), TimeWindow, TimeWindow);

/// One company's depot, accepted requests and a witness route per vehicle.
struct Fleet {
    depot: (f64, f64),
    requests: Vec<Draw>,
    /// Stops as `(request, is_drop)`.
    routes: Vec<Vec<(usize, bool)>>,
}

impl Fleet {
    fn new(depot: (f64, f64), vehicles: usize) -> Self {
        Fleet { depot, requests: Vec::new(), routes: vec![Vec::new(); vehicles] }
    }

    fn instance(&self, params: &GeneratorParams, extra: Draw) -> Result<Instance> {
        let all: Vec<Draw> = self.requests.iter().copied().chain(std::iter::once(extra)).collect();
        let n = all.len();
        let mut coords = vec![self.depot, self.depot];
        coords.extend(all.iter().map(|x| x.0));
        coords.extend(all.iter().map(|x| x.1));
        let travel = matrix(&coords);
        let requests = all
            .iter()
            .enumerate()
            .map(|(i, &(_, _, pw, dw))| Request {
                id: i as u32,
                owner: 0,
                origin: 2 + i,
                destination: 2 + n + i,
                passengers: params.passengers,
                direct_time: travel[2 + i][2 + n + i],
                service_pickup: params.service,
                service_drop: params.service,
                pickup_window: pw,
                drop_window: dw,
                max_ride: params.max_ride,
                lock: Lock::Free,
            })
            .collect();
        let vehicles = (0..self.routes.len())
            .map(|k| Vehicle {
                id: k as u32,
                owner: 0,
                capacity: params.capacity,
                max_duration: params.max_duration,
                start_depot: 0,
                end_depot: 1,
            })
            .collect();
        Instance::new(vec![Company { id: 0, start_depot: 0, end_depot: 1 }], vehicles, requests, travel, params.horizon, None)
    }

    /// Keeps the draw when some vehicle can take it on top of its route.
    fn try_add(&mut self, params: &GeneratorParams, eval: &mut Evaluator, draw: Draw) -> Result<bool> {
        let inst = self.instance(params, draw)?;
        let new = self.requests.len();
        let mut best: Option<(i64, usize, Insertion)> = None;
        for (k, stops) in self.routes.iter().enumerate() {
            let visits = stops
                .iter()
                .map(|&(r, is_drop)| if is_drop { inst.drop_node(r) } else { inst.pickup(r) })
                .collect();
            let route = Route { vehicle: k, visits };
            if let Some(ins) = eval.best_insertion(&inst, &route, new) {
                if best.map_or(true, |b| ins.delta < b.0) {
                    best = Some((ins.delta, k, ins));
                }
            }
        }
        let Some((_, k, ins)) = best else { return Ok(false) };
        let stops = &mut self.routes[k];
        stops.insert(ins.pickup_pos, (new, false));
        stops.insert(ins.drop_pos, (new, true));
        self.requests.push(draw);
        Ok(true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::instance_to_string;
    use crate::model::validate_instance;

    #[test]
    fn group_sizes() {
        for (group, m, c) in [(Group::A, 2, 8), (Group::B, 2, 10), (Group::C, 4, 48), (Group::D, 10, 100)] {
            let inst = generate(group, 7).unwrap();
            assert_eq!(inst.n_companies(), m);
            assert_eq!(inst.n_requests(), c);
            assert_eq!(inst.n_vehicles(), m);
            assert_eq!(inst.n_nodes(), 2 * m + 2 * c);
        }
        assert_eq!(generate(Group::A, 1).unwrap().n_nodes(), 20);
    }

    #[test]
    fn same_seed_same_bytes() {
        let a = instance_to_string(&generate(Group::B, 42).unwrap());
        let b = instance_to_string(&generate(Group::B, 42).unwrap());
        assert_eq!(a, b);
        assert_ne!(a, instance_to_string(&generate(Group::B, 43).unwrap()));
    }

    #[test]
    fn protocol_constants() {
        let inst = generate(Group::C, 3).unwrap();
        assert!(validate_instance(&inst).is_empty());
        assert!(inst.is_metric());
        assert!(inst.max_travel() <= 2400);
        for v in &inst.vehicles {
            assert_eq!((v.capacity, v.max_duration), (3, 20_000));
        }
        for r in &inst.requests {
            assert_eq!((r.passengers, r.max_ride, r.service_pickup, r.service_drop), (1, 3000, 120, 120));
            let widths = [r.pickup_window, r.drop_window].map(|w| w.latest - w.earliest);
            let mut sorted = widths;
            sorted.sort();
            assert_eq!(sorted, [2000, 20_000]);
        }
    }

    #[test]
    fn every_request_is_individually_serviceable() {
        let mut eval = Evaluator::new();
        for seed in 0..50 {
            let inst = generate(Group::B, seed).unwrap();
            for r in 0..inst.n_requests() {
                let k = inst.vehicles_of(inst.request_owner(r))[0];
                assert!(eval.is_feasible(&inst, k, &[inst.pickup(r), inst.drop_node(r)]), "seed {seed} req {r}");
            }
        }
    }

    #[test]
    fn no_collaboration_plan_exists_by_construction() {
        use crate::alns::construct;
        use crate::measures::MeasureTable;
        use crate::model::{BalanceSpec, Mode};
        use crate::oracle::{EnumerationBudget, ExactSolver};
        for seed in 0..40 {
            let inst = generate(Group::B, seed).unwrap();
            let exact = ExactSolver::new(&inst, EnumerationBudget::benchmark()).unwrap();
            assert!(exact.solve(&BalanceSpec::new(Mode::Nc)).is_ok(), "seed {seed}");
        }
        let inst = generate(Group::C, 1).unwrap();
        let table = MeasureTable::build(&inst);
        assert!(construct(&inst, &table, &BalanceSpec::new(Mode::Nc), 0).is_ok());
    }

    #[test]
    fn uneven_company_sizes() {
        let params = GeneratorParams { requests_per_company: vec![2, 4], ..GeneratorParams::default() };
        let inst = generate_with(&params, 5).unwrap();
        assert_eq!(inst.requests_of(0).len(), 2);
        assert_eq!(inst.requests_of(1).len(), 4);
    }

    #[test]
    fn params_file_overrides_fields() {
        let p: GeneratorParams = serde_json::from_str(r#"{"companies": 3, "window_width": 600}"#).unwrap();
        assert_eq!(p.companies, 3);
        assert_eq!(p.window_width, 600);
        assert_eq!(p.capacity, 3);
        assert!(serde_json::from_str::<GeneratorParams>(r#"{"colour": 1}"#).is_err());
    }
}
