//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 instance or I/O error,
//! 3 a verification check failed.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use crate::dist::{approx_iid_sum, ApproxParams, TailArray};
use crate::error::{Result, SumkError};
use crate::estimator::estimate_t;
use crate::exact::{exact_solve_with_cap, DEFAULT_EXACT_CAP};
use crate::generate::{generate_instance, GenSpec};
use crate::instance::{parse_instance, CdfOracle, Instance, QueryCounter};
use crate::pipeline::solve_full;
use crate::simulate::{simulate, SimResult};

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_INSTANCE: u8 = 2;
pub const EXIT_VERIFY: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "sumk", version, about = "Stochastic unbounded min-knapsack solver")]
pub struct Cli {
    /// Print human-readable tables instead of JSON.
    #[arg(long, global = true)]
    pub human: bool,

    /// Largest capacity handed to the exact solver.
    #[arg(long, global = true, env = "SUMK_EXACT_CAP", default_value_t = DEFAULT_EXACT_CAP)]
    pub exact_cap: u64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Approximate the optimal expected cost within a factor 1 +/- epsilon.
    Solve {
        #[arg(long)]
        epsilon: f64,
        /// Include wall time in the report.
        #[arg(long)]
        timing: bool,
        instance: PathBuf,
    },
    /// Exact optimum by the pseudo-polynomial DP.
    Exact {
        /// Also print the full value table and policy.
        #[arg(long)]
        table: bool,
        instance: PathBuf,
    },
    /// Constant-factor estimate T of the optimum.
    Estimate { instance: PathBuf },
    /// Monte Carlo cost of the exact or approximate policy.
    Simulate {
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = PolicyKind::Exact)]
        policy: PolicyKind,
        #[arg(long)]
        epsilon: Option<f64>,
        instance: PathBuf,
    },
    /// Compare the approximation against the exact optimum.
    Verify {
        #[arg(long)]
        epsilon: f64,
        /// Instance file or directory of `.json` instances.
        path: Option<PathBuf>,
        /// Verify this many generated instances instead.
        #[arg(long, conflicts_with = "path")]
        generate: Option<u64>,
        #[command(flatten)]
        gen: GenArgs,
    },
    /// Write a random instance.
    Gen {
        #[command(flatten)]
        gen: GenArgs,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Dump the tail array of one type, optionally as an approximate block.
    Dist {
        #[arg(long = "type", default_value_t = 0)]
        type_index: usize,
        #[arg(long, default_value_t = 1)]
        multiplicity: u64,
        #[arg(long)]
        epsilon: Option<f64>,
        instance: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PolicyKind {
    Exact,
    Fptas,
}

#[derive(Clone, Debug, Args)]
pub struct GenArgs {
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    #[arg(long, default_value_t = 50)]
    pub capacity: u64,
    #[arg(long, default_value_t = 8)]
    pub max_support: usize,
    #[arg(long, default_value_t = 0.1)]
    pub cost_min: f64,
    #[arg(long, default_value_t = 10.0)]
    pub cost_max: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl GenArgs {
    fn spec(&self) -> GenSpec {
        GenSpec {
            n: self.n,
            capacity: self.capacity,
            max_support: self.max_support,
            cost_min: self.cost_min,
            cost_max: self.cost_max,
        }
    }
}

enum Failure {
    Usage(String),
    Instance(SumkError),
    Verify(Value),
}

impl From<SumkError> for Failure {
    fn from(e: SumkError) -> Self {
        Failure::Instance(e)
    }
}

fn load(path: &Path) -> Result<Instance> {
    parse_instance(&fs::read_to_string(path)?)
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyOutcome {
    pub name: String,
    pub capacity: u64,
    pub n: usize,
    pub opt: f64,
    pub vhat: f64,
    pub ratio: f64,
    pub bracket_ok: bool,
    pub t: f64,
    pub t_ok: bool,
    /// `b w <= OPT_w <= b (w + W)` with `b = min c / E[X]`.
    pub sandwich_ok: bool,
    pub pass: bool,
}

/// Runs the exact solver and the approximation on `inst` and checks the
/// `1 +/- epsilon` bracket, `T in [OPT/4, OPT]` and the linear sandwich.
pub fn verify_instance(name: &str, inst: &Instance, epsilon: f64, exact_cap: u64) -> Result<VerifyOutcome> {
    let sol = solve_full(inst, epsilon)?;
    let norm = &sol.instance;
    let exact = exact_solve_with_cap(norm, exact_cap)?;
    let opt = exact.value();
    let vhat = sol.report.value;
    let tol = 1e-9 * opt.max(1e-300);
    let bracket_ok = vhat >= (1.0 - epsilon) * opt - tol && vhat <= (1.0 + epsilon) * opt + tol;
    let t = sol.report.params.t;
    let t_ok = if opt == 0.0 { t == 0.0 } else { t >= opt / 4.0 - tol && t <= opt + tol };
    let b = norm
        .types()
        .iter()
        .map(|ty| ty.cost / ty.dist.mean())
        .fold(f64::INFINITY, f64::min);
    let cap = norm.capacity() as i64;
    let sandwich_ok = (1..=cap).all(|w| {
        let o = exact.opt(w);
        let slack = 1e-9 * o.max(1.0);
        b * w as f64 <= o + slack && o <= b * (w + cap) as f64 + slack
    });
    Ok(VerifyOutcome {
        name: name.to_string(),
        capacity: norm.capacity(),
        n: norm.num_types(),
        opt,
        vhat,
        ratio: if opt > 0.0 { vhat / opt } else { 1.0 },
        bracket_ok,
        t,
        t_ok,
        sandwich_ok,
        pass: bracket_ok && t_ok && sandwich_ok,
    })
}

#[derive(Serialize)]
struct BatchReport {
    epsilon: f64,
    total: usize,
    passed: usize,
    instances: Vec<VerifyOutcome>,
}

fn instance_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    files.retain(|p| p.extension().is_some_and(|x| x == "json"));
    files.sort();
    Ok(files)
}

fn cmd_verify(
    epsilon: f64,
    path: Option<&Path>,
    generate: Option<u64>,
    gen: &GenArgs,
    exact_cap: u64,
) -> std::result::Result<Value, Failure> {
    let batch: Vec<(String, Instance)> = match (path, generate) {
        (Some(p), None) if p.is_dir() => instance_files(p)?
            .into_iter()
            .map(|f| Ok((f.display().to_string(), load(&f)?)))
            .collect::<Result<_>>()?,
        (Some(p), None) => {
            let out = verify_instance(&p.display().to_string(), &load(p)?, epsilon, exact_cap)?;
            let v = serde_json::to_value(&out).map_err(SumkError::from)?;
            return if out.pass { Ok(v) } else { Err(Failure::Verify(v)) };
        }
        (None, Some(count)) => {
            let spec = gen.spec();
            (0..count)
                .map(|k| {
                    let seed = gen.seed.wrapping_add(k);
                    Ok((format!("seed-{seed}"), generate_instance(&spec, seed)?))
                })
                .collect::<Result<_>>()?
        }
        _ => return Err(Failure::Usage("verify needs an instance path or --generate".into())),
    };
    let instances: Vec<VerifyOutcome> = batch
        .par_iter()
        .map(|(name, inst)| verify_instance(name, inst, epsilon, exact_cap))
        .collect::<Result<_>>()?;
    let passed = instances.iter().filter(|o| o.pass).count();
    let report = BatchReport {
        epsilon,
        total: instances.len(),
        passed,
        instances,
    };
    let v = serde_json::to_value(&report).map_err(SumkError::from)?;
    if report.passed == report.total {
        Ok(v)
    } else {
        Err(Failure::Verify(v))
    }
}

#[derive(Serialize)]
struct ExactReport {
    capacity: u64,
    opt: f64,
    best_type: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    table: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    policy: Option<Vec<usize>>,
}

#[derive(Serialize)]
struct SimReport {
    policy: &'static str,
    #[serde(flatten)]
    result: SimResult,
}

fn to_value<T: Serialize>(v: &T) -> std::result::Result<Value, Failure> {
    serde_json::to_value(v).map_err(|e| Failure::Instance(e.into()))
}

fn execute(cli: &Cli) -> std::result::Result<Value, Failure> {
    match &cli.command {
        Command::Solve {
            epsilon,
            timing,
            instance,
        } => {
            let mut report = solve_full(&load(instance)?, *epsilon)?.report;
            if !timing {
                report.wall_time_ms = None;
            }
            to_value(&report)
        }
        Command::Exact { table, instance } => {
            let inst = load(instance)?;
            let kept = inst.surviving_types();
            let norm = inst.normalize_positive_support()?;
            let sol = exact_solve_with_cap(&norm, cli.exact_cap)?;
            let cap = norm.capacity();
            let report = ExactReport {
                capacity: cap,
                opt: sol.value(),
                best_type: kept[sol.policy(cap)?],
                table: table.then(|| sol.table().to_vec()),
                policy: table.then(|| (1..=cap).map(|w| kept[sol.policy(w).unwrap()]).collect()),
            };
            to_value(&report)
        }
        Command::Estimate { instance } => {
            let norm = load(instance)?.normalize_positive_support()?;
            let counter = QueryCounter::new();
            let est = estimate_t(&CdfOracle::new(&norm, &counter));
            let mut v = to_value(&est)?;
            v["query_count"] = counter.get().into();
            Ok(v)
        }
        Command::Simulate {
            trials,
            seed,
            policy,
            epsilon,
            instance,
        } => {
            let inst = load(instance)?;
            let result = match policy {
                PolicyKind::Exact => {
                    let norm = inst.normalize_positive_support()?;
                    let sol = exact_solve_with_cap(&norm, cli.exact_cap)?;
                    simulate(&norm, &sol, *trials, *seed)?
                }
                PolicyKind::Fptas => {
                    let eps = epsilon
                        .ok_or_else(|| Failure::Usage("--policy fptas needs --epsilon".into()))?;
                    let sol = solve_full(&inst, eps)?;
                    simulate(&sol.instance, &sol.policy, *trials, *seed)?
                }
            };
            let name = match policy {
                PolicyKind::Exact => "exact",
                PolicyKind::Fptas => "fptas",
            };
            to_value(&SimReport { policy: name, result })
        }
        Command::Verify {
            epsilon,
            path,
            generate,
            gen,
        } => cmd_verify(*epsilon, path.as_deref(), *generate, gen, cli.exact_cap),
        Command::Gen { gen, output } => {
            let inst = generate_instance(&gen.spec(), gen.seed)?;
            let text = inst.to_json();
            if let Some(path) = output {
                fs::write(path, format!("{text}\n")).map_err(SumkError::from)?;
                Ok(serde_json::json!({ "written": path.display().to_string() }))
            } else {
                Ok(serde_json::from_str(&text).map_err(SumkError::from)?)
            }
        }
        Command::Dist {
            type_index,
            multiplicity,
            epsilon,
            instance,
        } => {
            let norm = load(instance)?.normalize_positive_support()?;
            let ty = norm.types().get(*type_index).ok_or_else(|| {
                Failure::Usage(format!("type {type_index} out of range (n = {})", norm.num_types()))
            })?;
            let exact = TailArray::from_distribution(&ty.dist, norm.capacity());
            let tail = if *multiplicity == 1 && epsilon.is_none() {
                exact
            } else {
                let eps = epsilon
                    .ok_or_else(|| Failure::Usage("--multiplicity needs --epsilon".into()))?;
                let params = ApproxParams::from_epsilon(eps, norm.capacity());
                approx_iid_sum(&exact, *multiplicity, &params)?
            };
            to_value(&tail)
        }
    }
}

fn scalar(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => "-".into(),
        other => other.to_string(),
    }
}

/// Key/value lines, with arrays of objects laid out as tables.
fn render_human(v: &Value) -> String {
    let mut out = String::new();
    let Value::Object(map) = v else {
        return format!("{v}\n");
    };
    let mut tables = Vec::new();
    for (key, val) in map {
        match val {
            Value::Object(inner) => {
                for (k, x) in inner {
                    out.push_str(&format!("{:<16} {}\n", format!("{key}.{k}"), scalar(x)));
                }
            }
            Value::Array(rows) if rows.first().is_some_and(Value::is_object) => {
                tables.push((key, rows));
            }
            Value::Array(rows) if rows.len() > 16 => {
                out.push_str(&format!("{key:<16} [{} entries]\n", rows.len()));
            }
            other => out.push_str(&format!("{key:<16} {}\n", scalar(other))),
        }
    }
    for (key, rows) in tables {
        out.push_str(&format!("\n{key}:\n"));
        let Value::Object(first) = &rows[0] else { continue };
        let cols: Vec<&String> = first.keys().collect();
        let cells: Vec<Vec<String>> = rows
            .iter()
            .map(|r| cols.iter().map(|c| scalar(&r[c.as_str()])).collect())
            .collect();
        let widths: Vec<usize> = cols
            .iter()
            .enumerate()
            .map(|(k, c)| cells.iter().map(|r| r[k].len()).chain([c.len()]).max().unwrap())
            .collect();
        let line = |items: Vec<&str>| {
            items
                .iter()
                .zip(&widths)
                .map(|(s, w)| format!("{s:>w$}"))
                .collect::<Vec<_>>()
                .join("  ")
        };
        out.push_str(&line(cols.iter().map(|c| c.as_str()).collect()));
        out.push('\n');
        for r in &cells {
            out.push_str(&line(r.iter().map(String::as_str).collect()));
            out.push('\n');
        }
    }
    out
}

fn emit(v: &Value, human: bool) {
    if human {
        print!("{}", render_human(v));
    } else {
        println!("{}", serde_json::to_string_pretty(v).expect("values always serialize"));
    }
}

/// Parses the process arguments, runs the command and maps the outcome to
/// an exit code.
pub fn run() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(&cli) {
        Ok(v) => {
            emit(&v, cli.human);
            ExitCode::SUCCESS
        }
        Err(Failure::Verify(v)) => {
            emit(&v, cli.human);
            ExitCode::from(EXIT_VERIFY)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Instance(e)) => {
            if cli.human {
                eprintln!("error: {e}");
            } else {
                println!("{}", serde_json::json!({ "error": e.to_string() }));
            }
            ExitCode::from(EXIT_INSTANCE)
        }
    }
}
