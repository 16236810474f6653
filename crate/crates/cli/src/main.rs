//! `tracehook`: run scenarios, check traces offline, and parse property files.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use tracehook_core::detectors::resolve_builtin;
use tracehook_core::pltl::{check_each, eval, Env, ProviderSet};
use tracehook_core::scenario::TxRun;
use tracehook_core::{
    import_trace, load_scenario, parse_properties, pretty, PropertySet, Registry, Scenario, Trace, TxStatus, World,
};

const EXIT_OK: u8 = 0;
const EXIT_FAILED: u8 = 1;
const EXIT_VIOLATION: u8 = 2;
const EXIT_USAGE: u8 = 64;
const EXIT_DATA: u8 = 65;

#[derive(Parser)]
#[command(name = "tracehook", version, about = "Trace-property checking for a small stack VM")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute every transaction of a scenario.
    Run {
        scenario: PathBuf,
        /// Write the trace of the last transaction here.
        #[arg(long)]
        trace_out: Option<PathBuf>,
        /// Print only the receipt lines.
        #[arg(long)]
        quiet: bool,
    },
    /// Evaluate properties over an exported trace.
    Check {
        #[arg(long)]
        trace: PathBuf,
        /// Check every property in this file.
        #[arg(long)]
        properties: Option<PathBuf>,
        /// Also check a built-in, e.g. `reentrancy` or `tvl(1,2)`. Repeatable.
        #[arg(long = "builtin")]
        builtins: Vec<String>,
        /// Take flash-loan providers from this scenario. Without properties or
        /// built-ins, check its bindings at the hooks they name.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// `hooks` for every hook step, or a single position.
        #[arg(long)]
        at: At,
    },
    /// Parse a property file and print it in canonical form.
    Parse { file: PathBuf },
}

#[derive(Clone, Copy, Debug)]
enum At {
    Hooks,
    Step(usize),
}

impl std::str::FromStr for At {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "hooks" {
            return Ok(At::Hooks);
        }
        s.parse().map(At::Step).map_err(|_| format!("expected `hooks` or a step index, got `{s}`"))
    }
}

struct Failure {
    code: u8,
    message: String,
}

fn fail(code: u8, message: impl Display) -> Failure {
    Failure { code, message: message.to_string() }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Run { scenario, trace_out, quiet } => run(&scenario, trace_out.as_deref(), quiet),
        Command::Check { trace, properties, builtins, scenario, at } => {
            check(&trace, properties.as_deref(), &builtins, scenario.as_deref(), at)
        }
        Command::Parse { file } => parse(&file),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn debug_enabled() -> bool {
    std::env::var("TRACEHOOK_DEBUG").is_ok_and(|v| v == "1")
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| fail(EXIT_USAGE, format!("{}: {e}", path.display())))
}

fn load(path: &Path) -> Result<Scenario, Failure> {
    load_scenario(path).map_err(|e| fail(if e.is_property_parse() { EXIT_DATA } else { EXIT_USAGE }, e))
}

fn run(path: &Path, trace_out: Option<&Path>, quiet: bool) -> Result<u8, Failure> {
    let scenario = load(path)?;
    let (runs, _) = scenario.run(debug_enabled());
    let mut code = EXIT_OK;
    for (n, tx) in runs.iter().enumerate() {
        println!("tx#{} {} gas={}", n + 1, tx.receipt.status, tx.receipt.gas_used);
        if !quiet {
            for record in tx.tracer.verdict_log() {
                println!("  {} @ {}: {}", record.property, record.position, verdict_word(record.verdict.is_pass()));
            }
            print_deltas(tx);
        }
        code = code.max(match tx.receipt.status {
            TxStatus::Success => EXIT_OK,
            TxStatus::PropertyViolation { .. } => EXIT_VIOLATION,
            TxStatus::Reverted { .. } | TxStatus::OutOfGas => EXIT_FAILED,
        });
    }
    if let Some(out) = trace_out {
        let Some(last) = runs.last() else {
            return Err(fail(EXIT_USAGE, "scenario has no transactions to trace"));
        };
        std::fs::write(out, last.tracer.export() + "\n")
            .map_err(|e| fail(EXIT_USAGE, format!("{}: {e}", out.display())))?;
    }
    Ok(code)
}

fn print_deltas(tx: &TxRun) {
    let balance = |w: &World, a| w.balance(a);
    for (address, _) in tx.post.accounts() {
        let (before, after) = (balance(&tx.pre, address), balance(&tx.post, address));
        if before != after {
            let delta = i128::from(after) - i128::from(before);
            println!("  balance {address}: {before} -> {after} ({delta:+})");
        }
    }
}

fn verdict_word(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "VIOLATION"
    }
}

fn check(
    trace_path: &Path,
    properties: Option<&Path>,
    builtins: &[String],
    scenario: Option<&Path>,
    at: At,
) -> Result<u8, Failure> {
    let trace = import_trace(&read(trace_path)?).map_err(|e| fail(EXIT_DATA, format!("{}: {e}", trace_path.display())))?;
    let scenario = scenario.map(load).transpose()?;
    let registry = scenario.as_ref().map(|s| s.registry.clone()).unwrap_or_default();

    let mut props = PropertySet::new();
    if let Some(path) = properties {
        props = parse_properties(&read(path)?).map_err(|e| fail(EXIT_DATA, format!("{}:{e}", path.display())))?;
    }
    for name in builtins {
        let reference = if name.starts_with("builtin.") { name.clone() } else { format!("builtin.{name}") };
        let (canonical, formula) = resolve_builtin(&reference)
            .expect("namespaced above")
            .map_err(|e| fail(EXIT_USAGE, e))?;
        if !props.insert(canonical.clone(), formula) {
            return Err(fail(EXIT_USAGE, format!("property `{canonical}` given twice")));
        }
    }

    let positions: Vec<usize> = match at {
        At::Hooks => trace.hook_positions().collect(),
        At::Step(i) if i < trace.len() => vec![i],
        At::Step(i) => {
            return Err(fail(EXIT_USAGE, format!("position {i} is out of range for a trace of {} steps", trace.len())))
        }
    };

    let results = match (&scenario, props.is_empty()) {
        (Some(sc), true) => check_bindings(&trace, sc, &positions)?,
        (_, false) => check_all(&trace, &props, &registry.flashloan_providers, &positions)?,
        (None, true) => return Err(fail(EXIT_USAGE, "nothing to check: give --properties, --builtin or --scenario")),
    };
    let mut code = EXIT_OK;
    for (property, position, pass) in results {
        println!("{property} @ {position}: {}", verdict_word(pass));
        if !pass {
            code = EXIT_VIOLATION;
        }
    }
    Ok(code)
}

type Row = (String, usize, bool);

/// Every property at every position.
fn check_all(trace: &Trace, props: &PropertySet, providers: &Arc<ProviderSet>, positions: &[usize]) -> Result<Vec<Row>, Failure> {
    let mut rows = Vec::new();
    for &i in positions {
        let env = Env::at_step(trace, i, providers.clone()).map_err(|e| fail(EXIT_DATA, e))?;
        for (name, formula) in props.iter() {
            let pass = eval(formula, trace, i, &env)
                .map_err(|e| fail(EXIT_DATA, format!("{name} @ {i}: {e} in `{}`", pretty(formula))))?;
            rows.push((name.to_string(), i, pass));
        }
    }
    Ok(rows)
}

/// The scenario's bound properties at each hook, checked the way a live run does.
fn check_bindings(trace: &Trace, scenario: &Scenario, positions: &[usize]) -> Result<Vec<Row>, Failure> {
    let Registry { flashloan_providers, .. } = &scenario.registry;
    let mut rows = Vec::new();
    for &i in positions {
        let step = trace.steps()[i];
        let Some((hook_id, _)) = step.hook() else {
            return Err(fail(EXIT_USAGE, format!("step {i} is not a hook; bindings only apply at hooks")));
        };
        let bound = scenario.registry.bound(step.contract, hook_id);
        let verdicts = check_each(&scenario.props, &bound, trace, i, flashloan_providers)
            .map_err(|e| fail(EXIT_DATA, format!("step {i}: {e}")))?;
        rows.extend(verdicts.into_iter().map(|(name, v)| (name, i, v.is_pass())));
    }
    Ok(rows)
}

fn parse(path: &Path) -> Result<u8, Failure> {
    let props = parse_properties(&read(path)?).map_err(|e| fail(EXIT_DATA, format!("{}:{e}", path.display())))?;
    for (name, formula) in props.iter() {
        println!("property {name} {{ {} }}", pretty(formula));
    }
    Ok(EXIT_OK)
}
