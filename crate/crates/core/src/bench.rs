//! Experiment harness: single solves, benchmark matrices and chained
//! multi-day runs.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::alns::{solve_alns, AlnsParams, Destroy, Repair, RunStats};
use crate::error::{Error, Result};
use crate::io::{write_solution, write_text, SolutionFile};
use crate::measures::MeasureTable;
use crate::model::{BalanceOffset, BalanceSpec, CompanyId, Cost, Instance, Mode};
use crate::oracle::{EnumerationBudget, ExactSolver};
use crate::solution::{balances, Balance, Solution};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    #[default]
    Alns,
    Oracle,
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::Alns => "alns",
            Backend::Oracle => "oracle",
        })
    }
}

impl FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "alns" => Ok(Backend::Alns),
            "oracle" => Ok(Backend::Oracle),
            _ => Err(Error::InvalidParams(format!("unknown backend `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub backend: Backend,
    pub params: AlnsParams,
    pub budget: EnumerationBudget,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { backend: Backend::Alns, params: AlnsParams::default(), budget: EnumerationBudget::benchmark() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solved {
    pub solution: Solution,
    pub cost: Cost,
    /// Search statistics; `None` for the oracle.
    pub stats: Option<RunStats>,
}

/// Solves one instance; `table` is only consulted by the search backend and
/// built on demand when missing.
pub fn solve_with(
    instance: &Instance,
    table: Option<&MeasureTable>,
    spec: &BalanceSpec,
    config: &SolverConfig,
    seed: u64,
) -> Result<Solved> {
    match config.backend {
        Backend::Alns => {
            let params = AlnsParams { seed, ..config.params.clone() };
            let built;
            let table = match table {
                Some(t) => t,
                None => {
                    built = MeasureTable::build(instance);
                    &built
                }
            };
            let out = solve_alns(instance, table, spec, &params, None)?;
            Ok(Solved { solution: out.best, cost: out.cost, stats: Some(out.stats) })
        }
        Backend::Oracle => {
            let exact = ExactSolver::new(instance, config.budget)?.solve(spec)?;
            Ok(Solved { solution: exact.solution, cost: exact.cost, stats: None })
        }
    }
}

pub fn solve(instance: &Instance, spec: &BalanceSpec, config: &SolverConfig, seed: u64) -> Result<Solved> {
    solve_with(instance, None, spec, config, seed)
}

fn table_for(instance: &Instance, backend: Backend) -> Option<MeasureTable> {
    (backend == Backend::Alns).then(|| MeasureTable::build(instance))
}

/// Percentage saving of `cost` against the no-collaboration cost.
pub fn saving(nc_cost: Cost, cost: Cost) -> Option<f64> {
    (nc_cost > 0).then(|| 100.0 * (nc_cost - cost) as f64 / nc_cost as f64)
}

/// Percentage gap of `cost` above `optimum`.
pub fn gap(optimum: Cost, cost: Cost) -> Option<f64> {
    (optimum > 0).then(|| 100.0 * (cost - optimum) as f64 / optimum as f64)
}

/// Mean and maximum absolute balances over the companies of one plan.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BalanceStats {
    pub s_bar: f64,
    pub u_bar: f64,
    pub s_hat: i64,
    pub u_hat: i64,
}

impl BalanceStats {
    pub fn of(balances: &[Balance]) -> Self {
        let n = balances.len().max(1) as f64;
        BalanceStats {
            s_bar: balances.iter().map(|b| b.time.abs() as f64).sum::<f64>() / n,
            u_bar: balances.iter().map(|b| b.customers.abs() as f64).sum::<f64>() / n,
            s_hat: balances.iter().map(|b| b.time.abs()).max().unwrap_or(0),
            u_hat: balances.iter().map(|b| b.customers.abs()).max().unwrap_or(0),
        }
    }
}

/// Applies `f` to every item on up to `workers` threads; results keep the
/// input order.
pub fn par_map<T: Sync, R: Send>(items: &[T], workers: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = workers.clamp(1, items.len().max(1));
    if workers == 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(item) = items.get(i) else { break };
                let out = f(item);
                slots.lock().expect("worker panicked")[i] = Some(out);
            });
        }
    });
    slots.into_inner().expect("worker panicked").into_iter().map(|r| r.expect("every slot filled")).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkPlan {
    pub modes: Vec<Mode>,
    /// Used for both thresholds; ignored by NC and UC.
    pub alphas: Vec<f64>,
    pub seeds: Vec<u64>,
    pub config: SolverConfig,
    pub workers: usize,
}

impl Default for BenchmarkPlan {
    fn default() -> Self {
        BenchmarkPlan {
            modes: vec![Mode::Nc, Mode::Uc, Mode::T, Mode::C, Mode::Tc],
            alphas: vec![0.1, 0.2, 0.3],
            seeds: vec![0],
            config: SolverConfig::default(),
            workers: 1,
        }
    }
}

impl BenchmarkPlan {
    /// `(mode, alpha)` pairs in output order.
    pub fn settings(&self) -> Vec<(Mode, Option<f64>)> {
        let mut out = Vec::new();
        for &mode in &self.modes {
            if mode.is_balanced() {
                out.extend(self.alphas.iter().map(|&a| (mode, Some(a))));
            } else {
                out.push((mode, None));
            }
        }
        out
    }
}

fn spec_for(mode: Mode, alpha: Option<f64>) -> BalanceSpec {
    BalanceSpec::with_alpha(mode, alpha.unwrap_or(0.0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub instance: String,
    pub mode: Mode,
    pub alpha: Option<f64>,
    pub seed: u64,
    /// `ok`, `infeasible` or `error: ...`.
    pub status: String,
    pub cost: Option<Cost>,
    pub nc_cost: Option<Cost>,
    pub sav: Option<f64>,
    pub optimum: Option<Cost>,
    pub gap: Option<f64>,
    pub balance: Option<BalanceStats>,
    pub iterations: Option<u64>,
    pub destroy_hits: BTreeMap<Destroy, u64>,
    pub repair_hits: BTreeMap<Repair, u64>,
    pub runtime: Duration,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

fn status_of(err: &Error) -> String {
    match err {
        Error::Infeasible(_) | Error::InfeasibleStart { .. } => "infeasible".into(),
        other => format!("error: {other}"),
    }
}

struct Prepared {
    table: Option<MeasureTable>,
    /// Exact results per setting index plus NC at the end; empty when the
    /// instance is beyond the oracle budget.
    exact: Vec<Result<(Cost, Solution)>>,
}

/// Runs every `(instance, mode, alpha, seed)` combination. Failures become
/// rows with a status; they never abort the run.
pub fn run_benchmark(instances: &[(String, Instance)], plan: &BenchmarkPlan) -> BenchReport {
    let settings = plan.settings();
    let mut with_nc = settings.clone();
    with_nc.push((Mode::Nc, None));
    let nc_index = with_nc.len() - 1;

    let prepared: Vec<Prepared> = par_map(instances, plan.workers, |(_, inst)| {
        let table = table_for(inst, plan.config.backend);
        let exact = match ExactSolver::new(inst, plan.config.budget) {
            Ok(solver) => with_nc
                .iter()
                .map(|&(mode, alpha)| solver.solve(&spec_for(mode, alpha)).map(|e| (e.cost, e.solution)))
                .collect(),
            Err(e) if plan.config.backend == Backend::Oracle => {
                with_nc.iter().map(|_| Err(Error::BudgetExceeded(e.to_string()))).collect()
            }
            Err(_) => Vec::new(),
        };
        Prepared { table, exact }
    });

    let mut jobs = Vec::new();
    for i in 0..instances.len() {
        for s in 0..with_nc.len() {
            for &seed in &plan.seeds {
                jobs.push((i, s, seed));
            }
        }
    }
    let results: Vec<(Result<Solved>, Duration)> = par_map(&jobs, plan.workers, |&(i, s, seed)| {
        let start = Instant::now();
        let (mode, alpha) = with_nc[s];
        let out = match plan.config.backend {
            Backend::Alns => {
                solve_with(&instances[i].1, prepared[i].table.as_ref(), &spec_for(mode, alpha), &plan.config, seed)
            }
            Backend::Oracle => match &prepared[i].exact[s] {
                Ok((cost, solution)) => Ok(Solved { solution: solution.clone(), cost: *cost, stats: None }),
                Err(e) => Err(clone_error(e)),
            },
        };
        (out, start.elapsed())
    });
    let result_of = |i: usize, s: usize, seed_pos: usize| &results[(i * with_nc.len() + s) * plan.seeds.len() + seed_pos];

    let mut rows = Vec::new();
    for (i, (name, inst)) in instances.iter().enumerate() {
        for (s, &(mode, alpha)) in settings.iter().enumerate() {
            for (p, &seed) in plan.seeds.iter().enumerate() {
                let (out, runtime) = result_of(i, s, p);
                let nc_cost = result_of(i, nc_index, p).0.as_ref().ok().map(|r| r.cost);
                let optimum = prepared[i].exact.get(s).and_then(|e| e.as_ref().ok()).map(|e| e.0);
                let mut row = BenchRow {
                    instance: name.clone(),
                    mode,
                    alpha,
                    seed,
                    status: "ok".into(),
                    cost: None,
                    nc_cost,
                    sav: None,
                    optimum,
                    gap: None,
                    balance: None,
                    iterations: None,
                    destroy_hits: BTreeMap::new(),
                    repair_hits: BTreeMap::new(),
                    runtime: *runtime,
                };
                match out {
                    Ok(solved) => {
                        row.cost = Some(solved.cost);
                        row.sav = nc_cost.and_then(|nc| saving(nc, solved.cost));
                        row.gap = optimum.and_then(|o| gap(o, solved.cost));
                        row.balance = Some(BalanceStats::of(&balances(inst, &solved.solution)));
                        if let Some(stats) = &solved.stats {
                            row.iterations = Some(stats.iterations);
                            for (op, hits) in plan.config.params.destroy_ops.iter().zip(&stats.destroy_hits) {
                                *row.destroy_hits.entry(*op).or_default() += hits;
                            }
                            for (op, hits) in plan.config.params.repair_ops.iter().zip(&stats.repair_hits) {
                                *row.repair_hits.entry(*op).or_default() += hits;
                            }
                        }
                    }
                    Err(e) => row.status = status_of(e),
                }
                rows.push(row);
            }
        }
    }
    BenchReport { rows }
}

fn clone_error(e: &Error) -> Error {
    match e {
        Error::Infeasible(m) => Error::Infeasible(m.clone()),
        Error::BudgetExceeded(m) => Error::BudgetExceeded(m.clone()),
        other => Error::Infeasible(other.to_string()),
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn fixed(v: Option<f64>, digits: usize) -> String {
    v.map(|v| format!("{v:.digits$}")).unwrap_or_default()
}

fn alpha_label(alpha: Option<f64>) -> String {
    fixed(alpha, 2)
}

pub const RESULT_COLUMNS: [&str; 15] = [
    "instance", "mode", "alpha", "seed", "status", "cost", "nc_cost", "sav", "optimum", "gap", "s_bar", "u_bar",
    "s_hat", "u_hat", "iterations",
];

/// Numeral of a 1-based rank.
pub fn roman(rank: usize) -> String {
    const NUMERALS: [&str; 10] = ["I", "II", "III", "IV", "V", "VI", "VII", "VIII", "IX", "X"];
    NUMERALS.get(rank.wrapping_sub(1)).map_or_else(|| rank.to_string(), |s| s.to_string())
}

/// Aggregate over all rows of one `(mode, alpha)` setting.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub mode: Mode,
    pub alpha: Option<f64>,
    pub runs: usize,
    pub failures: usize,
    pub mean_cost: Option<f64>,
    pub mean_sav: Option<f64>,
    pub mean_gap: Option<f64>,
    /// Share of runs that hit the known optimum.
    pub optimal: Option<f64>,
    pub s_bar: Option<f64>,
    pub u_bar: Option<f64>,
    pub s_hat: Option<i64>,
    pub u_hat: Option<i64>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

impl BenchReport {
    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut order: Vec<(Mode, Option<f64>)> = Vec::new();
        for row in &self.rows {
            if !order.iter().any(|&(m, a)| m == row.mode && a == row.alpha) {
                order.push((row.mode, row.alpha));
            }
        }
        order
            .into_iter()
            .map(|(mode, alpha)| {
                let rows: Vec<&BenchRow> = self.rows.iter().filter(|r| r.mode == mode && r.alpha == alpha).collect();
                let ok: Vec<&BenchRow> = rows.iter().copied().filter(|r| r.cost.is_some()).collect();
                let known: Vec<&BenchRow> = ok.iter().copied().filter(|r| r.optimum.is_some()).collect();
                SummaryRow {
                    mode,
                    alpha,
                    runs: rows.len(),
                    failures: rows.len() - ok.len(),
                    mean_cost: mean(ok.iter().filter_map(|r| r.cost).map(|c| c as f64)),
                    mean_sav: mean(ok.iter().filter_map(|r| r.sav)),
                    mean_gap: mean(ok.iter().filter_map(|r| r.gap)),
                    optimal: (!known.is_empty()).then(|| {
                        known.iter().filter(|r| r.cost == r.optimum).count() as f64 / known.len() as f64
                    }),
                    s_bar: mean(ok.iter().filter_map(|r| r.balance).map(|b| b.s_bar)),
                    u_bar: mean(ok.iter().filter_map(|r| r.balance).map(|b| b.u_bar)),
                    s_hat: ok.iter().filter_map(|r| r.balance).map(|b| b.s_hat).max(),
                    u_hat: ok.iter().filter_map(|r| r.balance).map(|b| b.u_hat).max(),
                }
            })
            .collect()
    }

    /// Success counts per operator and mode with ranks, most successful first.
    pub fn operator_ranks(&self) -> Vec<(Mode, &'static str, &'static str, u64, usize)> {
        let mut modes: Vec<Mode> = Vec::new();
        for row in &self.rows {
            if !modes.contains(&row.mode) {
                modes.push(row.mode);
            }
        }
        let mut out = Vec::new();
        for mode in modes {
            let rows = self.rows.iter().filter(|r| r.mode == mode);
            let mut destroy: Vec<(&'static str, u64)> = Destroy::ALL
                .iter()
                .map(|op| (op.name(), rows.clone().map(|r| r.destroy_hits.get(op).copied().unwrap_or(0)).sum()))
                .collect();
            let mut repair: Vec<(&'static str, u64)> = Repair::ALL
                .iter()
                .map(|op| (op.name(), rows.clone().map(|r| r.repair_hits.get(op).copied().unwrap_or(0)).sum()))
                .collect();
            for (family, list) in [("destroy", &mut destroy), ("repair", &mut repair)] {
                list.sort_by(|a, b| b.1.cmp(&a.1));
                for (rank, (name, hits)) in list.iter().enumerate() {
                    out.push((mode, family, *name, *hits, rank + 1));
                }
            }
        }
        out
    }

    pub fn results_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = RESULT_COLUMNS.iter().map(|s| s.to_string()).collect();
        header.extend(Destroy::ALL.iter().map(|op| format!("hits_destroy_{}", op.name())));
        header.extend(Repair::ALL.iter().map(|op| format!("hits_repair_{}", op.name())));
        w.write_record(&header).expect("in-memory write");
        for r in &self.rows {
            let b = r.balance;
            let mut rec = vec![
                r.instance.clone(),
                r.mode.to_string(),
                alpha_label(r.alpha),
                r.seed.to_string(),
                r.status.clone(),
                opt(r.cost),
                opt(r.nc_cost),
                fixed(r.sav, 4),
                opt(r.optimum),
                fixed(r.gap, 4),
                fixed(b.map(|b| b.s_bar), 2),
                fixed(b.map(|b| b.u_bar), 2),
                opt(b.map(|b| b.s_hat)),
                opt(b.map(|b| b.u_hat)),
                opt(r.iterations),
            ];
            let has_hits = r.iterations.is_some();
            rec.extend(Destroy::ALL.iter().map(|op| {
                if has_hits { r.destroy_hits.get(op).copied().unwrap_or(0).to_string() } else { String::new() }
            }));
            rec.extend(Repair::ALL.iter().map(|op| {
                if has_hits { r.repair_hits.get(op).copied().unwrap_or(0).to_string() } else { String::new() }
            }));
            w.write_record(&rec).expect("in-memory write");
        }
        into_string(w)
    }

    pub fn summary_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "mode", "alpha", "runs", "failures", "mean_cost", "mean_sav", "mean_gap", "optimal_share", "s_bar", "u_bar",
            "s_hat", "u_hat",
        ])
        .expect("in-memory write");
        for s in self.summary() {
            w.write_record([
                s.mode.to_string(),
                alpha_label(s.alpha),
                s.runs.to_string(),
                s.failures.to_string(),
                fixed(s.mean_cost, 2),
                fixed(s.mean_sav, 4),
                fixed(s.mean_gap, 4),
                fixed(s.optimal, 4),
                fixed(s.s_bar, 2),
                fixed(s.u_bar, 2),
                opt(s.s_hat),
                opt(s.u_hat),
            ])
            .expect("in-memory write");
        }
        into_string(w)
    }

    pub fn ranks_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["mode", "family", "operator", "hits", "rank"]).expect("in-memory write");
        for (mode, family, name, hits, rank) in self.operator_ranks() {
            w.write_record([mode.to_string(), family.into(), name.into(), hits.to_string(), roman(rank)])
                .expect("in-memory write");
        }
        into_string(w)
    }

    /// Wall-clock runtimes, kept apart so the other files stay reproducible.
    pub fn timings_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["instance", "mode", "alpha", "seed", "seconds"]).expect("in-memory write");
        for r in &self.rows {
            w.write_record([
                r.instance.clone(),
                r.mode.to_string(),
                alpha_label(r.alpha),
                r.seed.to_string(),
                format!("{:.3}", r.runtime.as_secs_f64()),
            ])
            .expect("in-memory write");
        }
        into_string(w)
    }

    /// Writes `results.csv`, `summary.csv`, `operator_ranks.csv` and
    /// `timings.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_text(dir.join("results.csv"), &self.results_csv())?;
        write_text(dir.join("summary.csv"), &self.summary_csv())?;
        write_text(dir.join("operator_ranks.csv"), &self.ranks_csv())?;
        write_text(dir.join("timings.csv"), &self.timings_csv())
    }
}

fn into_string(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}

#[derive(Clone, Debug, PartialEq)]
pub struct DayCompany {
    pub company: CompanyId,
    pub time_balance: i64,
    pub customer_balance: i64,
    pub offset: BalanceOffset,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DayReport {
    pub day: usize,
    pub instance: String,
    pub cost: Cost,
    pub nc_cost: Option<Cost>,
    pub sav: Option<f64>,
    pub companies: Vec<DayCompany>,
    pub solution: SolutionFile,
}

#[derive(Debug)]
pub struct MultidayRun {
    pub days: Vec<DayReport>,
    /// The failure that ended the chain early, with its 1-based day.
    pub failure: Option<(usize, Error)>,
}

/// Offsets carried into the day after `report`.
pub fn next_offsets(report: &DayReport, accumulate: bool) -> BTreeMap<CompanyId, BalanceOffset> {
    report
        .companies
        .iter()
        .map(|c| {
            let (mut time, mut customers) = (c.time_balance, c.customer_balance);
            if accumulate {
                time += c.offset.time;
                customers += c.offset.customers;
            }
            (c.company, BalanceOffset { time, customers })
        })
        .collect()
}

/// Solves the days in order, each one constrained by the balances of the
/// day before. Stops at the first day without a solution.
pub fn run_multiday(
    days: &[(String, Instance)],
    spec: &BalanceSpec,
    config: &SolverConfig,
    seed: u64,
    accumulate: bool,
) -> Result<MultidayRun> {
    if let Some((first, rest)) = days.split_first() {
        let ids: Vec<CompanyId> = first.1.companies.iter().map(|c| c.id).collect();
        for (name, inst) in rest {
            if inst.companies.iter().map(|c| c.id).collect::<Vec<_>>() != ids {
                return Err(Error::InvalidParams(format!("{name} has a different company set than {}", first.0)));
            }
        }
    }
    let mut reports: Vec<DayReport> = Vec::new();
    let mut offsets: BTreeMap<CompanyId, BalanceOffset> = BTreeMap::new();
    for (d, (name, inst)) in days.iter().enumerate() {
        let day_spec = BalanceSpec { offsets: offsets.clone(), ..spec.clone() };
        let table = table_for(inst, config.backend);
        let solved = match solve_with(inst, table.as_ref(), &day_spec, config, seed) {
            Ok(s) => s,
            Err(e) => return Ok(MultidayRun { days: reports, failure: Some((d + 1, e)) }),
        };
        let nc_cost = if spec.mode == Mode::Nc {
            Some(solved.cost)
        } else {
            solve_with(inst, table.as_ref(), &BalanceSpec::new(Mode::Nc), config, seed).ok().map(|s| s.cost)
        };
        let bal = balances(inst, &solved.solution);
        let companies = inst
            .companies
            .iter()
            .zip(&bal)
            .map(|(c, b)| DayCompany {
                company: c.id,
                time_balance: b.time,
                customer_balance: b.customers,
                offset: day_spec.offset(c.id),
            })
            .collect();
        let report = DayReport {
            day: d + 1,
            instance: name.clone(),
            cost: solved.cost,
            nc_cost,
            sav: nc_cost.and_then(|nc| saving(nc, solved.cost)),
            companies,
            solution: SolutionFile::new(inst, &solved.solution, &day_spec)?,
        };
        offsets = next_offsets(&report, accumulate);
        reports.push(report);
    }
    Ok(MultidayRun { days: reports, failure: None })
}

impl MultidayRun {
    pub fn csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "day", "instance", "company", "cost", "nc_cost", "sav", "s", "u", "s_offset", "u_offset", "s_total",
            "u_total",
        ])
        .expect("in-memory write");
        for day in &self.days {
            for c in &day.companies {
                w.write_record([
                    day.day.to_string(),
                    day.instance.clone(),
                    c.company.to_string(),
                    day.cost.to_string(),
                    opt(day.nc_cost),
                    fixed(day.sav, 4),
                    c.time_balance.to_string(),
                    c.customer_balance.to_string(),
                    c.offset.time.to_string(),
                    c.offset.customers.to_string(),
                    (c.time_balance + c.offset.time).to_string(),
                    (c.customer_balance + c.offset.customers).to_string(),
                ])
                .expect("in-memory write");
            }
        }
        into_string(w)
    }

    /// Writes `multiday.csv` and one `day_<d>.json` solution per day.
    pub fn write(&self, dir: &Path) -> Result<()> {
        for day in &self.days {
            write_solution(&day.solution, dir.join(format!("day_{}.json", day.day)))?;
        }
        write_text(dir.join("multiday.csv"), &self.csv())
    }
}
