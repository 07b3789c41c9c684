//! `cpr-split`: split matrices, generate instances, build orbit documents
//! and run the property suites.
//!
//! Exit codes: 0 success, 1 input or usage error, 2 solver stall,
//! 3 a verified property failed.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cpr_core::curvature::curvature_certificate;
use cpr_core::docs::{orbit_document, parse_matrix, to_pretty, MatrixDoc, OrbitKind, SplitDoc};
use cpr_core::expectations::{BlockPartition, ExpectationChain};
use cpr_core::linalg::{random_instance, Invertible, NormKind, Role};
use cpr_core::splitting::{extended_split, SolverConfig};
use cpr_core::verify::{self, Suite, VerifyConfig};
use cpr_core::CprError;

const THREADS_ENV: &str = "CPR_SPLIT_THREADS";

#[derive(Parser, Debug)]
#[command(
    name = "cpr-split",
    version,
    about = "Unitary-positive splittings relative to block subalgebras"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Split an invertible matrix as g = u e^{X_n} ... e^{X_2} e^{Y_1}.
    Decompose(DecomposeArgs),
    /// Run property suites and print a JSON report.
    Verify(VerifyArgs),
    /// Write a seeded random matrix document.
    Generate(GenerateArgs),
    /// Build an orbit point and its coset, bundle and tangent images.
    Orbit(OrbitArgs),
    /// Sample the curvature criteria for one dimension and norm.
    Curvature(CurvatureArgs),
}

#[derive(Args, Debug, Clone)]
struct Common {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    dim: Option<usize>,
    /// Write the document here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct SolverArgs {
    /// Solver residual tolerance, relative to 1 + ||log g*g||.
    #[arg(long, default_value_t = SolverConfig::default().residual_tol)]
    tol: f64,
    #[arg(long, default_value_t = SolverConfig::default().max_iterations)]
    max_iterations: usize,
}

impl SolverArgs {
    fn config(&self) -> Result<SolverConfig, CprError> {
        let cfg = SolverConfig {
            residual_tol: self.tol,
            max_iterations: self.max_iterations,
            ..SolverConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
struct DecomposeArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    solver: SolverArgs,
    /// Matrix document {"dim": n, "entries": [[re, im], ...]}.
    #[arg(long)]
    input: PathBuf,
    /// Block sizes "b1,b2,..."; a trailing "+" leaves a corner remainder.
    #[arg(long, conflicts_with = "chain")]
    partition: Option<String>,
    /// Nested partitions "p1;p2;..." finest first.
    #[arg(long)]
    chain: Option<String>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, default_value = "all")]
    suite: String,
    #[arg(long, default_value_t = 20)]
    samples: usize,
    #[arg(long)]
    partition: Option<String>,
    #[arg(long)]
    chain: Option<String>,
    /// op, fro, s1, s2 or s4; restricts the curvature suite.
    #[arg(long)]
    norm: Option<String>,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[command(flatten)]
    common: Common,
    /// unitary, hermitian, invertible or positive.
    #[arg(long, default_value = "invertible")]
    role: String,
}

#[derive(Args, Debug)]
struct OrbitArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    solver: SolverArgs,
    /// flag, stiefel or coadjoint.
    #[arg(long = "type")]
    kind: String,
    #[arg(long)]
    partition: Option<String>,
    /// Matrix document for the representative g; random when absent.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Role of the random representative.
    #[arg(long, default_value = "invertible")]
    role: String,
    /// Eigenvalues lambda_i of X0 = i diag(lambda), comma separated.
    #[arg(long, allow_hyphen_values = true)]
    levels: Option<String>,
    #[arg(long, default_value = "s2")]
    norm: String,
}

#[derive(Args, Debug)]
struct CurvatureArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 100)]
    samples: usize,
    #[arg(long, default_value = "fro")]
    norm: String,
}

/// Failure classes, mapped to exit codes.
enum Failure {
    Input(String),
    Stall(String),
    Property(String),
}

impl From<CprError> for Failure {
    fn from(e: CprError) -> Self {
        match e {
            CprError::SolverStall { .. } => Failure::Stall(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

fn input(msg: impl Into<String>) -> Failure {
    Failure::Input(msg.into())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(f) = apply_thread_limit() {
        return report(f);
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => report(f),
    }
}

fn report(f: Failure) -> ExitCode {
    match f {
        Failure::Input(m) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Failure::Stall(m) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Failure::Property(m) => {
            eprintln!("failed: {m}");
            ExitCode::from(3)
        }
    }
}

fn apply_thread_limit() -> Result<(), Failure> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| input(format!("{THREADS_ENV} must be a positive integer, got '{v}'")))?;
        if n == 0 {
            return Err(input(format!("{THREADS_ENV} must be at least 1")));
        }
        cpr_core::set_thread_limit(n);
    }
    Ok(())
}

fn run(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Decompose(a) => decompose(a),
        Command::Verify(a) => verify_cmd(a),
        Command::Generate(a) => generate(a),
        Command::Orbit(a) => orbit(a),
        Command::Curvature(a) => curvature(a),
    }
}

fn emit(common: &Common, text: &str) -> Result<(), Failure> {
    match &common.out {
        Some(path) => fs::write(path, text).map_err(|e| input(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read_matrix(path: &PathBuf) -> Result<Invertible, Failure> {
    let text = fs::read_to_string(path).map_err(|e| input(format!("cannot read {}: {e}", path.display())))?;
    let m = parse_matrix(&text).map_err(|e| input(format!("{}: {e}", path.display())))?;
    Invertible::new(m).map_err(|e| input(format!("{}: input must be invertible: {e}", path.display())))
}

fn parse_norm(s: &str) -> Result<NormKind, Failure> {
    s.parse::<NormKind>().map_err(|e| input(format!("--norm: {e}")))
}

fn parse_partition(s: &str, dim: usize) -> Result<BlockPartition, Failure> {
    BlockPartition::parse(s, dim).map_err(|e| input(format!("--partition '{s}': {e}")))
}

fn parse_chain(s: &str, dim: usize) -> Result<ExpectationChain, Failure> {
    ExpectationChain::parse(s, dim).map_err(|e| input(format!("--chain '{s}': {e}")))
}

fn check_dim(flag: Option<usize>, actual: usize) -> Result<(), Failure> {
    match flag {
        Some(d) if d != actual => Err(input(format!("--dim {d} does not match the input dimension {actual}"))),
        _ => Ok(()),
    }
}

fn decompose(a: DecomposeArgs) -> Result<(), Failure> {
    let cfg = a.solver.config()?;
    let g = read_matrix(&a.input)?;
    let n = g.dim();
    check_dim(a.common.dim, n)?;
    let chain = match (&a.partition, &a.chain) {
        (_, Some(c)) => parse_chain(c, n)?,
        (Some(p), None) => ExpectationChain::single(parse_partition(p, n)?),
        (None, None) => ExpectationChain::single(BlockPartition::diagonal(n)),
    };
    let f = extended_split(&g, &chain, &cfg)?;
    emit(&a.common, &to_pretty(&SplitDoc::from_factors(&f)))
}

fn verify_cmd(a: VerifyArgs) -> Result<(), Failure> {
    let suite: Suite = a.suite.parse()?;
    if a.samples == 0 {
        return Err(input("--samples must be at least 1"));
    }
    let dim = a.common.dim.unwrap_or(4);
    let mut cfg = VerifyConfig::new(dim, a.samples, a.common.seed);
    cfg.solver = a.solver.config()?;
    cfg.partition = a.partition.as_deref().map(|p| parse_partition(p, dim)).transpose()?;
    cfg.chain = a.chain.as_deref().map(|c| parse_chain(c, dim)).transpose()?;
    cfg.norm = a.norm.as_deref().map(parse_norm).transpose()?;
    let report = verify::run(suite, &cfg)?;
    emit(&a.common, &to_pretty(&report))?;
    if report.pass {
        Ok(())
    } else {
        let failed: Vec<String> = report
            .suites
            .iter()
            .flat_map(|s| s.failures().into_iter().map(move |c| format!("{}:{}", s.suite, c.name)))
            .collect();
        Err(Failure::Property(failed.join(", ")))
    }
}

fn parse_role(s: &str) -> Result<Role, Failure> {
    s.parse::<Role>().map_err(|e| input(format!("--role: {e}")))
}

fn generate(a: GenerateArgs) -> Result<(), Failure> {
    let role = parse_role(&a.role)?;
    let dim = a.common.dim.ok_or_else(|| input("--dim is required"))?;
    let m = random_instance(dim, a.common.seed, role)?;
    emit(&a.common, &to_pretty(&MatrixDoc::from_matrix(&m)))
}

fn orbit(a: OrbitArgs) -> Result<(), Failure> {
    let kind: OrbitKind = a.kind.parse()?;
    let cfg = a.solver.config()?;
    let norm = parse_norm(&a.norm)?;
    let g = match &a.input {
        Some(path) => {
            let g = read_matrix(path)?;
            check_dim(a.common.dim, g.dim())?;
            g
        }
        None => {
            let dim = a.common.dim.ok_or_else(|| input("--dim or --input is required"))?;
            let role = parse_role(&a.role)?;
            if matches!(role, Role::Hermitian) {
                return Err(input(
                    "--role must describe an invertible matrix (unitary, invertible or positive)",
                ));
            }
            Invertible::new(random_instance(dim, a.common.seed, role)?)?
        }
    };
    let n = g.dim();
    let partition = a.partition.as_deref().map(|p| parse_partition(p, n)).transpose()?;
    let levels = a
        .levels
        .as_deref()
        .map(|s| {
            s.split(',')
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|_| input(format!("--levels: '{t}' is not a number")))
                })
                .collect::<Result<Vec<f64>, Failure>>()
        })
        .transpose()?;
    let doc = orbit_document(kind, &g, partition.as_ref(), levels.as_deref(), norm, &cfg)?;
    emit(&a.common, &to_pretty(&doc))
}

fn curvature(a: CurvatureArgs) -> Result<(), Failure> {
    if a.samples == 0 {
        return Err(input("--samples must be at least 1"));
    }
    let dim = a.common.dim.unwrap_or(4);
    let report = curvature_certificate(dim, parse_norm(&a.norm)?, a.samples, a.common.seed)?;
    emit(&a.common, &to_pretty(&report))?;
    if report.pass {
        Ok(())
    } else {
        Err(Failure::Property("curvature criteria".into()))
    }
}
