use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{Map, Value};

use qrep_core::engine::{self, Budget, RepairConfig, RepairReport, Status};
use qrep_core::localizer::{localize, SweepOutcome};
use qrep_core::optimizer::OptBudget;
use qrep_core::patcher::{inject_faults, write_corpus};
use qrep_core::testkit::{generate_suite, Evaluator, Oracle, ShotsMode, TestSuite};
use qrep_core::{parse_qasm, Circuit, Error, GateId};

#[derive(Parser, Debug)]
#[command(name = "qrep", version, about = "Locate and repair faulty gates in quantum circuits")]
struct Cli {
    /// Worker threads for suite evaluation (default: all cores).
    #[arg(long, global = true, env = "QREP_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Localise and repair a faulty circuit.
    Repair(RepairArgs),
    /// Run only the gate-removal sweep and print the suspiciousness ranking.
    Localize(LocalizeArgs),
    /// Generate a corpus of seeded mutants from a reference circuit.
    Mutate(MutateArgs),
    /// Unguided random-search baseline with the same inputs as `repair`.
    BaselineRs(RepairArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
struct ProblemArgs {
    /// Faulty circuit (OpenQASM 2).
    #[arg(long)]
    circuit: PathBuf,
    /// Correct circuit used to derive expected distributions.
    #[arg(long, conflicts_with = "expected", required_unless_present = "expected")]
    reference: Option<PathBuf>,
    /// Expected distributions as JSON: {"<input>-<basis>": {"<bits>": p}}.
    #[arg(long)]
    expected: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
struct RepairArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Wall-clock budget (default 7200 s when no budget is given).
    #[arg(long, conflicts_with = "budget_evals")]
    budget_seconds: Option<f64>,
    /// Budget in fitness evaluations (deterministic).
    #[arg(long)]
    budget_evals: Option<usize>,
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(1..))]
    iterations: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = ShotsArg::Exact)]
    shots_mode: ShotsArg,
    /// Hellinger threshold above which a case fails.
    #[arg(long)]
    tau_fail: Option<f64>,
    /// Evaluations per parametric patch.
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
    opt_evals: u64,
    #[arg(long, default_value_t = 10)]
    top_k: usize,
    /// Known faulty gate (`position:kind[qubits]`), used to report its rank percentile.
    #[arg(long)]
    fault: Option<String>,
    /// Report path; the repaired circuit is written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
struct LocalizeArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
struct MutateArgs {
    /// Reference circuit to mutate.
    #[arg(long)]
    circuit: PathBuf,
    #[arg(long, default_value_t = 1)]
    per_group: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "lowercase")]
enum ShotsArg {
    Exact,
    Sampled,
}

#[derive(Serialize)]
struct RunManifest<'a, A: Serialize> {
    subcommand: &'a str,
    args: &'a A,
    tool_version: &'static str,
    timestamp: String,
    wall_seconds: f64,
}

fn manifest<A: Serialize>(subcommand: &str, args: &A, started: Instant) -> anyhow::Result<Value> {
    Ok(serde_json::to_value(RunManifest {
        subcommand,
        args,
        tool_version: env!("CARGO_PKG_VERSION"),
        timestamp: chrono::Utc::now().to_rfc3339(),
        wall_seconds: started.elapsed().as_secs_f64(),
    })?)
}

fn read_circuit(path: &Path) -> anyhow::Result<Circuit> {
    let src = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse_qasm(&src).with_context(|| format!("cannot parse {}", path.display()))
}

fn load_problem(problem: &ProblemArgs) -> anyhow::Result<(Circuit, TestSuite)> {
    let circuit = read_circuit(&problem.circuit)?;
    let suite = match (&problem.reference, &problem.expected) {
        (Some(r), _) => {
            let reference = read_circuit(r)?;
            if reference.num_qubits() != circuit.num_qubits() {
                bail!(Error::WidthMismatch { expected: reference.num_qubits(), found: circuit.num_qubits() });
            }
            generate_suite(&reference)?
        }
        (None, Some(e)) => {
            let json = fs::read_to_string(e).with_context(|| format!("cannot read {}", e.display()))?;
            TestSuite::from_expected_json(circuit.num_qubits(), &json)?
        }
        (None, None) => bail!("one of --reference or --expected is required"),
    };
    Ok((circuit, suite))
}

fn write_json(out: Option<&Path>, value: &Value) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// `report.json` -> `report.repaired.qasm`
fn repaired_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "report".into());
    out.with_file_name(format!("{stem}.repaired.qasm"))
}

/// Report JSON with `wall_seconds` moved into the manifest block, so that
/// everything outside the manifest is reproducible.
fn report_json(report: &RepairReport, manifest: Value) -> anyhow::Result<Value> {
    let Value::Object(mut fields) = serde_json::to_value(report)? else { unreachable!() };
    let wall = fields.shift_remove("wall_seconds").unwrap_or(Value::Null);
    let Value::Object(mut manifest) = manifest else { unreachable!() };
    manifest.insert("wall_seconds".into(), wall);
    fields.insert("manifest".into(), Value::Object(manifest));
    Ok(Value::Object(fields))
}

fn config_from(args: &RepairArgs) -> anyhow::Result<RepairConfig> {
    let budget = match (args.budget_evals, args.budget_seconds) {
        (Some(n), _) => Budget::Evals(n),
        (None, Some(s)) => Budget::Seconds(s),
        (None, None) => RepairConfig::default().budget,
    };
    let defaults = RepairConfig::default();
    let cfg = RepairConfig {
        budget,
        iterations: args.iterations as usize,
        optimizer: OptBudget { max_evals: args.opt_evals as usize, ..OptBudget::default() },
        tau_fail: args.tau_fail.unwrap_or(defaults.tau_fail),
        shots_mode: match args.shots_mode {
            ShotsArg::Exact => ShotsMode::Exact,
            ShotsArg::Sampled => ShotsMode::Sampled,
        },
        seed: args.seed,
        top_k: args.top_k,
        ..defaults
    };
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_repair(name: &str, args: &RepairArgs, random: bool) -> anyhow::Result<ExitCode> {
    let started = Instant::now();
    let (circuit, suite) = load_problem(&args.problem)?;
    let cfg = config_from(args)?;
    let fault: Option<GateId> = args.fault.as_deref().map(str::parse).transpose()?;
    let run =
        if random { engine::random_search(&circuit, &suite, &cfg) } else { engine::repair(&circuit, &suite, &cfg) };
    let (mut report, budget_error) = match run {
        Ok(r) => (r, false),
        Err(Error::BudgetTooSmall(partial)) => (*partial, true),
        Err(e) => return Err(e.into()),
    };
    if let Some(f) = &fault {
        report.locate_fault(f)?;
    }
    let json = report_json(&report, manifest(name, args, started)?)?;
    write_json(args.out.as_deref(), &json)?;
    if let (Some(out), Some(qasm)) = (&args.out, &report.repaired_qasm) {
        fs::write(repaired_path(out), qasm)?;
    }
    if budget_error {
        eprintln!("error: budget exhausted during localisation; partial report written");
        return Ok(ExitCode::from(1));
    }
    Ok(match report.status {
        Status::Repaired => ExitCode::SUCCESS,
        Status::NotFixed => ExitCode::from(2),
    })
}

fn cmd_localize(args: &LocalizeArgs) -> anyhow::Result<ExitCode> {
    let started = Instant::now();
    let (circuit, suite) = load_problem(&args.problem)?;
    let eval = Evaluator::new(&suite).oracle(Oracle::default());
    let baseline = eval.fitness(&circuit)?;
    if baseline.all_passed() {
        return Err(Error::NoFailingTest.into());
    }
    let loc = localize(&circuit, &eval, &baseline)?;
    let ranked = loc.table.ranking();
    let n = ranked.len();
    let ranking: Vec<Value> = ranked
        .into_iter()
        .enumerate()
        .map(|(i, (gate, score))| {
            let percentile = if n <= 1 { 0.0 } else { i as f64 / (n - 1) as f64 * 100.0 };
            serde_json::json!({ "gate_id": gate, "score": score, "percentile": percentile })
        })
        .collect();
    let removals: Vec<Value> = loc
        .removals
        .iter()
        .map(|(pos, fit)| {
            serde_json::json!({
                "gate_id": GateId::of(&circuit, *pos),
                "fitness": fit.value,
                "failed": fit.failed_count,
            })
        })
        .collect();
    let repaired = match &loc.outcome {
        SweepOutcome::Repaired { circuit, .. } => Some(qrep_core::emit_qasm(circuit)),
        _ => None,
    };
    let mut fields = Map::new();
    fields.insert("status".into(), Value::from(if repaired.is_some() { "Repaired" } else { "Localized" }));
    fields.insert("short_circuit".into(), Value::from(repaired.is_some()));
    fields.insert("repaired_qasm".into(), repaired.clone().map(Value::from).unwrap_or(Value::Null));
    fields.insert("baseline_fitness".into(), Value::from(baseline.value));
    fields.insert("ranking".into(), Value::from(ranking));
    fields.insert("removals".into(), Value::from(removals));
    fields.insert("evals_used".into(), Value::from(loc.evals + 1));
    let mut manifest = manifest("localize", args, started)?;
    manifest["wall_seconds"] = Value::from(started.elapsed().as_secs_f64());
    fields.insert("manifest".into(), manifest);
    write_json(args.out.as_deref(), &Value::Object(fields))?;
    if let (Some(out), Some(qasm)) = (&args.out, &repaired) {
        fs::write(repaired_path(out), qasm)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_mutate(args: &MutateArgs) -> anyhow::Result<ExitCode> {
    let started = Instant::now();
    let reference = read_circuit(&args.circuit)?;
    let mutants = inject_faults(&reference, args.seed, args.per_group)?;
    let corpus = write_corpus(&args.out_dir, &mutants, args.seed, args.per_group)?;
    let Value::Object(mut fields) = serde_json::to_value(&corpus)? else { unreachable!() };
    fields.insert("manifest".into(), manifest("mutate", args, started)?);
    write_json(Some(&args.out_dir.join("manifest.json")), &Value::Object(fields))?;
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match &cli.command {
        Command::Repair(a) => cmd_repair("repair", a, false),
        Command::BaselineRs(a) => cmd_repair("baseline-rs", a, true),
        Command::Localize(a) => cmd_localize(a),
        Command::Mutate(a) => cmd_mutate(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
