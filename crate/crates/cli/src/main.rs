//! `fairdiv` command-line front end.
//!
//! Exit codes: 0 success, 2 malformed input or failed precondition,
//! 3 capacity exceeded, 4 guarantee violation.

mod run;
mod sweep;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fairdiv::instance::{check_valuations, InstanceFile};
use fairdiv::instances::generate_with_caps;
use fairdiv::oracle::{certify_impossibility, exact_mnw, ImpossibilityFamily};
use fairdiv::verify::{
    is_alpha_efx, is_alpha_gmms, is_alpha_mms, is_alpha_pmms, is_beta_mnw, is_ef1, is_gamma_separated,
};
use fairdiv::{Allocation, Caps, Error, GeneratorSpec, GuaranteeReport, Instance, Ratio};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::run::{run, Algorithm};
use crate::sweep::{sweep, SweepRow, SweepSpec};

const MALFORMED: u8 = 2;
const CAPACITY: u8 = 3;
const VIOLATION: u8 = 4;

#[derive(Parser)]
#[command(name = "fairdiv", version, about = "Exact fair division of indivisible goods")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an instance from a named family.
    Gen(GenArgs),
    /// Validate an instance file and report class violations.
    CheckInstance { instance: PathBuf },
    /// Exact maximum Nash welfare allocation.
    Mnw { instance: PathBuf },
    /// Run an allocation algorithm.
    Solve(SolveArgs),
    /// Check one guarantee for a given allocation.
    Verify(VerifyArgs),
    /// Run algorithms over generated instances and an alpha grid, emitting CSV.
    Sweep {
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Fill the wall_ms column (output is then no longer deterministic).
        #[arg(long)]
        timing: bool,
    },
    /// Brute-force certificate that no allocation is both alpha-EFX and near-MNW.
    CertifyImpossibility(CertifyArgs),
}

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
enum Family {
    Example1,
    Theorem4,
    Theorem5,
    RandomAdditive,
    Xos,
    BudgetAdditive,
}

#[derive(clap::Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    family: Family,
    #[arg(long, value_parser = parse_ratio)]
    alpha: Option<Ratio>,
    #[arg(long, value_parser = parse_ratio)]
    epsilon: Option<Ratio>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    /// N for theorem5.
    #[arg(long = "big-n")]
    big_n: Option<u64>,
    #[arg(long)]
    max_value: Option<u64>,
    #[arg(long)]
    clauses: Option<usize>,
    #[arg(long)]
    cap: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct SolveArgs {
    instance: PathBuf,
    #[arg(long, value_enum)]
    alg: Algorithm,
    #[arg(long, value_parser = parse_ratio)]
    alpha: Ratio,
    /// Complete the partial allocation with envy cycles.
    #[arg(long)]
    complete: bool,
    /// Include the per-iteration trace.
    #[arg(long)]
    trace: bool,
    /// Attach every guarantee report; exit 4 if an applicable one fails.
    #[arg(long)]
    verify_all: bool,
    /// Initial allocation for `--alg poly` (defaults to the MNW allocation).
    #[arg(long)]
    start: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
enum PropertyArg {
    AlphaEfx,
    Ef1,
    BetaMnw,
    GammaSeparation,
    AlphaMms,
    AlphaPmms,
    AlphaGmms,
}

#[derive(clap::Args)]
struct VerifyArgs {
    instance: PathBuf,
    allocation: PathBuf,
    #[arg(long, value_enum)]
    property: PropertyArg,
    /// Factor for the alpha-* properties.
    #[arg(long, value_parser = parse_ratio)]
    alpha: Option<Ratio>,
    #[arg(long, value_parser = parse_ratio)]
    beta: Option<Ratio>,
    #[arg(long, value_parser = parse_ratio)]
    gamma: Option<Ratio>,
    /// Reference Nash product for beta-mnw (defaults to the exact MNW product).
    #[arg(long, value_parser = parse_ratio)]
    reference: Option<Ratio>,
}

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
enum CertifyFamily {
    Theorem4,
    Theorem5,
}

#[derive(clap::Args)]
struct CertifyArgs {
    #[arg(long, value_enum)]
    family: CertifyFamily,
    #[arg(long, value_parser = parse_ratio)]
    alpha: Option<Ratio>,
    #[arg(long, value_parser = parse_ratio)]
    epsilon: Option<Ratio>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long = "big-n")]
    big_n: Option<u64>,
}

fn parse_ratio(text: &str) -> Result<Ratio, String> {
    text.parse().map_err(|e: Error| e.to_string())
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Capacity { .. } => CAPACITY,
            Error::Internal(_) => VIOLATION,
            _ => MALFORMED,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Error::from(e).into()
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Error::from(e).into()
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure {
            code: MALFORMED,
            message: e.to_string(),
        }
    }
}

fn failure(code: u8, message: impl Into<String>) -> Failure {
    Failure {
        code,
        message: message.into(),
    }
}

type Outcome = Result<u8, Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| failure(MALFORMED, format!("{}: {e}", path.display())))
}

fn read_instance(path: &Path, caps: &Caps) -> Result<Instance, Failure> {
    let file: InstanceFile = serde_json::from_str(&read(path)?)?;
    Ok(file.into_instance(caps)?)
}

fn read_allocation(path: &Path) -> Result<Allocation, Failure> {
    Ok(Allocation::from_json_str(&read(path)?)?)
}

fn emit(value: &impl Serialize, out: Option<&Path>) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match out {
        Some(path) => fs::write(path, text)?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn gen(args: &GenArgs, caps: &Caps) -> Outcome {
    let family = match args.family {
        Family::Example1 => "example1",
        Family::Theorem4 => "theorem4",
        Family::Theorem5 => "theorem5",
        Family::RandomAdditive => "random_additive",
        Family::Xos => "xos",
        Family::BudgetAdditive => "budget_additive",
    };
    let mut fields = Map::new();
    fields.insert("family".into(), json!(family));
    let mut put = |key: &str, value: Option<Value>| {
        if let Some(v) = value {
            fields.insert(key.into(), v);
        }
    };
    put("alpha", args.alpha.as_ref().map(|r| json!(r)));
    put("epsilon", args.epsilon.as_ref().map(|r| json!(r)));
    put("n", args.n.map(|v| json!(v)));
    put("m", args.m.map(|v| json!(v)));
    put("N", args.big_n.map(|v| json!(v)));
    put("max_value", args.max_value.map(|v| json!(v)));
    put("clauses", args.clauses.map(|v| json!(v)));
    put("cap", args.cap.map(|v| json!(v)));
    put("seed", args.seed.map(|v| json!(v)));
    let spec: GeneratorSpec = serde_json::from_value(Value::Object(fields))
        .map_err(|e| failure(MALFORMED, format!("{family}: {e}")))?;
    let instance = generate_with_caps(&spec, caps)?;
    emit(&InstanceFile::from(&instance), args.out.as_deref())?;
    Ok(0)
}

fn check_instance(path: &Path, caps: &Caps) -> Outcome {
    let file: InstanceFile = serde_json::from_str(&read(path)?)?;
    let valuations = file.to_valuations()?;
    let report = check_valuations(file.m, &valuations, file.class, caps);
    emit(&report, None)?;
    Ok(if report.passes() { 0 } else { MALFORMED })
}

#[derive(Serialize)]
struct SolveOutput<'a> {
    algorithm: &'static str,
    alpha: &'a Ratio,
    complete: bool,
    mnw: &'a fairdiv::oracle::MnwResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    start: Option<&'a Allocation>,
    partial: &'a Allocation,
    allocation: &'a Allocation,
    guarantees_apply: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    reports: Option<&'a [GuaranteeReport]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    trace: Option<&'a Value>,
}

fn solve(args: &SolveArgs, caps: &Caps) -> Outcome {
    let instance = read_instance(&args.instance, caps)?;
    let start = args.start.as_deref().map(read_allocation).transpose()?;
    if start.is_some() && args.alg != Algorithm::Poly {
        return Err(failure(MALFORMED, "--start only applies to --alg poly"));
    }
    let out = run(&instance, args.alg, &args.alpha, args.complete, start, caps)?;
    emit(
        &SolveOutput {
            algorithm: args.alg.name(),
            alpha: &args.alpha,
            complete: args.complete,
            mnw: &out.mnw,
            start: out.start.as_ref(),
            partial: &out.partial,
            allocation: &out.allocation,
            guarantees_apply: out.guarantees_apply,
            reports: args.verify_all.then_some(out.reports.as_slice()),
            trace: args.trace.then_some(&out.trace),
        },
        None,
    )?;
    let violated = args.verify_all && out.guarantees_apply && !out.reports.iter().all(GuaranteeReport::passed);
    Ok(if violated { VIOLATION } else { 0 })
}

fn required<'a>(value: &'a Option<Ratio>, flag: &str) -> Result<&'a Ratio, Failure> {
    value
        .as_ref()
        .ok_or_else(|| failure(MALFORMED, format!("this property needs --{flag}")))
}

fn verify(args: &VerifyArgs, caps: &Caps) -> Outcome {
    let instance = read_instance(&args.instance, caps)?;
    let allocation = read_allocation(&args.allocation)?;
    allocation.check_fits(&instance)?;
    let report = match args.property {
        PropertyArg::AlphaEfx => is_alpha_efx(&instance, &allocation, required(&args.alpha, "alpha")?),
        PropertyArg::Ef1 => is_ef1(&instance, &allocation),
        PropertyArg::BetaMnw => {
            let reference = match &args.reference {
                Some(r) => r.clone(),
                None => exact_mnw(&instance, caps)?.product,
            };
            is_beta_mnw(&instance, &allocation, required(&args.beta, "beta")?, &reference)?
        }
        PropertyArg::GammaSeparation => is_gamma_separated(&instance, &allocation, required(&args.gamma, "gamma")?),
        PropertyArg::AlphaMms => is_alpha_mms(&instance, &allocation, required(&args.alpha, "alpha")?, caps)?,
        PropertyArg::AlphaPmms => is_alpha_pmms(&instance, &allocation, required(&args.alpha, "alpha")?, caps)?,
        PropertyArg::AlphaGmms => is_alpha_gmms(&instance, &allocation, required(&args.alpha, "alpha")?, caps)?,
    };
    emit(&report, None)?;
    Ok(if report.passed() { 0 } else { VIOLATION })
}

fn run_sweep(spec: &Path, out: Option<&Path>, timing: bool, caps: &Caps) -> Outcome {
    let spec: SweepSpec = serde_json::from_str(&read(spec)?)?;
    let rows = sweep(&spec, caps, timing)?;
    let sink: Box<dyn Write> = match out {
        Some(path) => Box::new(fs::File::create(path)?),
        None => Box::new(io::stdout()),
    };
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(sink);
    writer.write_record(sweep::COLUMNS)?;
    for row in &rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(if rows.iter().any(SweepRow::violates) { VIOLATION } else { 0 })
}

fn certify(args: &CertifyArgs, caps: &Caps) -> Outcome {
    let family = match args.family {
        CertifyFamily::Theorem4 => ImpossibilityFamily::Theorem4 {
            alpha: required(&args.alpha, "alpha")?.clone(),
            epsilon: required(&args.epsilon, "epsilon")?.clone(),
            n: args.n.ok_or_else(|| failure(MALFORMED, "theorem4 needs --n"))?,
        },
        CertifyFamily::Theorem5 => ImpossibilityFamily::Theorem5 {
            big_n: args.big_n.ok_or_else(|| failure(MALFORMED, "theorem5 needs --big-n"))?,
        },
    };
    let certificate = certify_impossibility(&family, caps)?;
    emit(&certificate, None)?;
    Ok(if certificate.matches_prediction { 0 } else { VIOLATION })
}

fn dispatch(cli: &Cli) -> Outcome {
    let caps = Caps::from_env()?;
    match &cli.command {
        Command::Gen(args) => gen(args, &caps),
        Command::CheckInstance { instance } => check_instance(instance, &caps),
        Command::Mnw { instance } => {
            let instance = read_instance(instance, &caps)?;
            emit(&exact_mnw(&instance, &caps)?, None)?;
            Ok(0)
        }
        Command::Solve(args) => solve(args, &caps),
        Command::Verify(args) => verify(args, &caps),
        Command::Sweep { spec, out, timing } => run_sweep(spec, out.as_deref(), *timing, &caps),
        Command::CertifyImpossibility(args) => certify(args, &caps),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("fairdiv: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
