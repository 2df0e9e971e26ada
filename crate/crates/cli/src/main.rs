use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use cdarp::alns::AlnsParams;
use cdarp::bench::{run_benchmark, run_multiday, saving, solve, Backend, BenchmarkPlan, SolverConfig};
use cdarp::generator::{generate_with, GeneratorParams, Group};
use cdarp::io::{
    read_instance, read_json, read_offsets, read_solution, write_instance, write_solution, write_text, SolutionFile,
};
use cdarp::measures::MeasureTable;
use cdarp::milp::{export_lp_with, import_solution, ExportOptions};
use cdarp::model::validate_instance;
use cdarp::solution::{balances, check_solution, solution_cost};
use cdarp::{BalanceSpec, Error, Instance, Mode, Result};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "cdarp", version, about = "Collaborative dial-a-ride solvers with workload-balance constraints")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance and write its solution file
    Solve(SolveArgs),
    /// Run every combination of instances, modes, alphas and seeds
    Benchmark(BenchmarkArgs),
    /// Solve consecutive days, carrying balances forward as offsets
    Multiday(MultidayArgs),
    /// Generate synthetic instances
    Generate(GenerateArgs),
    /// Write the mixed-integer model in LP format
    ExportLp(ExportArgs),
    /// Turn an external solver's variable listing into a solution file
    ImportSolution(ImportArgs),
    /// Audit a solution file against its instance
    Check(CheckArgs),
    /// Write the relatedness and closeness table as CSV
    Measures(MeasuresArgs),
}

#[derive(Args)]
struct BalanceArgs {
    #[arg(long, default_value = "uc")]
    mode: Mode,
    /// Time-balance threshold as a share of each company's direct time
    #[arg(long)]
    alpha_t: Option<f64>,
    /// Customer-balance threshold as a share of each company's passengers
    #[arg(long)]
    alpha_c: Option<f64>,
    /// JSON list of `{company, time, customers}` offsets
    #[arg(long)]
    offsets: Option<PathBuf>,
}

impl BalanceArgs {
    fn spec(&self) -> Result<BalanceSpec> {
        let need = |flag: &str, value: Option<f64>, used: bool| match (used, value) {
            (true, None) => Err(Error::InvalidParams(format!("mode {} needs --{flag}", self.mode))),
            (_, v) => Ok(v.unwrap_or(0.0)),
        };
        let mut spec = BalanceSpec::new(self.mode);
        spec.alpha_time = need("alpha-t", self.alpha_t, self.mode.bounds_time())?;
        spec.alpha_customers = need("alpha-c", self.alpha_c, self.mode.bounds_customers())?;
        if let Some(path) = &self.offsets {
            spec.offsets = read_offsets(path)?;
        }
        Ok(spec)
    }
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, default_value = "alns")]
    backend: Backend,
    /// JSON file overriding search parameters
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SolverArgs {
    fn config(&self) -> Result<SolverConfig> {
        let params: AlnsParams = match &self.params {
            Some(path) => read_json(path)?,
            None => AlnsParams::default(),
        };
        params.validate()?;
        Ok(SolverConfig { backend: self.backend, params, ..SolverConfig::default() })
    }
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    instance: PathBuf,
    #[command(flatten)]
    balance: BalanceArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Output directory for `solution.json`
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Skip the no-collaboration reference solve
    #[arg(long)]
    no_reference: bool,
}

#[derive(Args)]
struct BenchmarkArgs {
    /// Instance files or directories of `.json` instances
    #[arg(long, required = true, num_args = 1..)]
    instance: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "nc,uc,t,c,tc")]
    modes: Vec<Mode>,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3")]
    alphas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    seeds: Vec<u64>,
    #[arg(long, default_value = "alns")]
    backend: Backend,
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct MultidayArgs {
    /// One instance per day, in order
    #[arg(long, required = true, num_args = 1..)]
    instance: Vec<PathBuf>,
    #[command(flatten)]
    balance: BalanceArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Carry the running total of balances instead of the previous day only
    #[arg(long)]
    accumulate: bool,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value = "A")]
    group: Group,
    /// First seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of consecutive seeds
    #[arg(long, default_value_t = 1)]
    count: u64,
    /// JSON file overriding generator parameters
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    instance: PathBuf,
    #[command(flatten)]
    balance: BalanceArgs,
    #[arg(long, default_value_t = ExportOptions::default().variable_cap)]
    variable_cap: usize,
    /// LP file to write; standard output when absent
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ImportArgs {
    #[arg(long)]
    instance: PathBuf,
    /// `name value` listing from the external solver
    #[arg(long)]
    values: PathBuf,
    #[command(flatten)]
    balance: BalanceArgs,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    solution: PathBuf,
}

#[derive(Args)]
struct MeasuresArgs {
    #[arg(long)]
    instance: PathBuf,
    /// CSV file to write; standard output when absent
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Infeasible(_) | Error::InfeasibleStart { .. } => 2,
        Error::Io { .. } | Error::Parse { .. } => 3,
        _ => 1,
    }
}

fn run(command: Command) -> Result<u8> {
    match command {
        Command::Solve(a) => cmd_solve(a),
        Command::Benchmark(a) => cmd_benchmark(a),
        Command::Multiday(a) => cmd_multiday(a),
        Command::Generate(a) => cmd_generate(a),
        Command::ExportLp(a) => cmd_export(a),
        Command::ImportSolution(a) => cmd_import(a),
        Command::Check(a) => cmd_check(a),
        Command::Measures(a) => cmd_measures(a),
    }
}

fn load(path: &Path) -> Result<Instance> {
    let inst = read_instance(path)?;
    if let Some(v) = validate_instance(&inst).first() {
        return Err(Error::InvalidInstance(format!("{}: {v}", path.display())));
    }
    Ok(inst)
}

fn name_of(path: &Path) -> String {
    path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => write_text(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn print_balances(file: &SolutionFile) {
    for c in &file.companies {
        println!(
            "company {}: S={} U={} S+offset={} U+offset={}",
            c.company,
            c.time_balance,
            c.customer_balance,
            c.time_balance + c.offset_time,
            c.customer_balance + c.offset_customers
        );
    }
}

fn cmd_solve(a: SolveArgs) -> Result<u8> {
    let inst = load(&a.instance)?;
    let spec = a.balance.spec()?;
    let config = a.solver.config()?;
    let started = Instant::now();
    let solved = solve(&inst, &spec, &config, a.solver.seed)?;
    let runtime = started.elapsed();
    let nc_cost = if a.no_reference {
        None
    } else if spec.mode == Mode::Nc {
        Some(solved.cost)
    } else {
        solve(&inst, &BalanceSpec::new(Mode::Nc), &config, a.solver.seed).ok().map(|s| s.cost)
    };
    let file = SolutionFile::new(&inst, &solved.solution, &spec)?;
    write_solution(&file, a.out.join("solution.json"))?;
    let sav = nc_cost.and_then(|nc| saving(nc, solved.cost)).map_or_else(|| "-".into(), |s| format!("{s:.2}%"));
    let nc = nc_cost.map_or_else(|| "-".into(), |c| c.to_string());
    println!(
        "mode={} cost={} nc_cost={nc} sav={sav} runtime={:.3}s",
        spec.mode,
        solved.cost,
        runtime.as_secs_f64()
    );
    print_balances(&file);
    Ok(0)
}

fn collect_instances(paths: &[PathBuf]) -> Result<Vec<(String, Instance)>> {
    let mut files = Vec::new();
    for path in paths {
        if path.is_dir() {
            let entries = std::fs::read_dir(path).map_err(|e| Error::io(path, e))?;
            let mut found: Vec<PathBuf> = entries
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "json"))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(path.clone());
        }
    }
    files.iter().map(|p| Ok((name_of(p), load(p)?))).collect()
}

fn cmd_benchmark(a: BenchmarkArgs) -> Result<u8> {
    let instances = collect_instances(&a.instance)?;
    let solver = SolverArgs { backend: a.backend, params: a.params, seed: 0 };
    let plan = BenchmarkPlan {
        modes: a.modes,
        alphas: a.alphas,
        seeds: a.seeds,
        config: solver.config()?,
        workers: a.workers,
    };
    let report = run_benchmark(&instances, &plan);
    report.write(&a.out)?;
    let failures = report.rows.iter().filter(|r| r.status != "ok").count();
    println!("{} rows, {failures} failed, written to {}", report.rows.len(), a.out.display());
    Ok(0)
}

fn cmd_multiday(a: MultidayArgs) -> Result<u8> {
    let days: Vec<(String, Instance)> =
        a.instance.iter().map(|p| Ok((name_of(p), load(p)?))).collect::<Result<_>>()?;
    let spec = a.balance.spec()?;
    let run = run_multiday(&days, &spec, &a.solver.config()?, a.solver.seed, a.accumulate)?;
    run.write(&a.out)?;
    for day in &run.days {
        let sav = day.sav.map_or_else(|| "-".into(), |s| format!("{s:.2}%"));
        println!("day {} ({}): cost={} sav={sav}", day.day, day.instance, day.cost);
        print_balances(&day.solution);
    }
    match run.failure {
        Some((day, e)) => {
            eprintln!("day {day} failed, chain stopped");
            Err(e)
        }
        None => Ok(0),
    }
}

fn cmd_generate(a: GenerateArgs) -> Result<u8> {
    let params = match &a.params {
        Some(path) => {
            let mut p: GeneratorParams = read_json(path)?;
            if let Some((m, c)) = a.group.size() {
                p.companies = m;
                p.requests_per_company = vec![c];
            }
            p
        }
        None => GeneratorParams::for_group(a.group),
    };
    for seed in a.seed..a.seed + a.count {
        let inst = generate_with(&params, seed)?;
        let path = a.out.join(format!("{}-{seed}.json", a.group));
        write_instance(&inst, &path)?;
        println!("{}", path.display());
    }
    Ok(0)
}

fn cmd_export(a: ExportArgs) -> Result<u8> {
    let inst = load(&a.instance)?;
    let spec = a.balance.spec()?;
    let (text, size) = export_lp_with(&inst, &spec, ExportOptions { variable_cap: a.variable_cap })?;
    emit(a.out.as_deref(), &text)?;
    if a.out.is_some() {
        println!("{} variables, {} constraints", size.variables, size.constraints);
    }
    Ok(0)
}

fn cmd_import(a: ImportArgs) -> Result<u8> {
    let inst = load(&a.instance)?;
    let spec = a.balance.spec()?;
    let text = std::fs::read_to_string(&a.values).map_err(|e| Error::io(&a.values, e))?;
    let solution = import_solution(&text, &inst)?;
    let violations = check_solution(&inst, &solution, &spec);
    for v in &violations {
        eprintln!("violation: {v}");
    }
    let file = SolutionFile::new(&inst, &solution, &spec)?;
    write_solution(&file, a.out.join("solution.json"))?;
    println!("cost={}", solution_cost(&inst, &solution));
    Ok(if violations.is_empty() { 0 } else { 2 })
}

fn cmd_check(a: CheckArgs) -> Result<u8> {
    let inst = load(&a.instance)?;
    let file = read_solution(&a.solution)?;
    let solution = file.to_solution(&inst)?;
    let spec = file.spec();
    let mut problems: Vec<String> = check_solution(&inst, &solution, &spec).iter().map(|v| v.to_string()).collect();
    let cost = solution_cost(&inst, &solution);
    if cost != file.cost {
        problems.push(format!("recorded cost {} differs from recomputed {cost}", file.cost));
    }
    for (c, b) in file.companies.iter().zip(balances(&inst, &solution)) {
        if (c.time_balance, c.customer_balance) != (b.time, b.customers) {
            problems.push(format!(
                "company {}: recorded balances ({}, {}) differ from recomputed ({}, {})",
                c.company, c.time_balance, c.customer_balance, b.time, b.customers
            ));
        }
    }
    for p in &problems {
        println!("{p}");
    }
    if problems.is_empty() {
        println!("ok: cost={cost}");
        Ok(0)
    } else {
        Ok(2)
    }
}

fn cmd_measures(a: MeasuresArgs) -> Result<u8> {
    let inst = load(&a.instance)?;
    emit(a.out.as_deref(), &MeasureTable::build(&inst).to_csv(&inst))?;
    Ok(0)
}
