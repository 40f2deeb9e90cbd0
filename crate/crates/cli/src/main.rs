//! `odecert`: train, certify and verify candidate ODE solutions.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use odecert::bounds::relative_bound_curve;
use odecert::candidate::{Candidate, NetworkCandidate};
use odecert::config::{LoadedProblem, ProblemConfig};
use odecert::harness::{
    certify, run_suite, summary_csv, thread_count, CertifyOptions, TrainingSummary, Verdict, DEFAULT_EVAL_POINTS,
    DEFAULT_SEED, FULL_EPOCHS, QUICK_EPOCHS,
};
use odecert::linalg::NormP;
use odecert::model::{find_case, manufactured_suite};
use odecert::residual::DEFAULT_GRID_PER_CELL;
use odecert::train::{train_default, TrainConfig};
use odecert::CertifyError;

const EXIT_OK: u8 = 0;
const EXIT_VIOLATION: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

#[derive(Parser)]
#[command(name = "odecert", version, about = "Residual-based error certificates for linear ODE solutions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the default network on a suite case or TOML problem and save a snapshot.
    Train {
        /// Suite case name or path to a `.toml` problem file.
        target: String,
        #[arg(long, default_value_t = FULL_EPOCHS)]
        epochs: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Snapshot path; defaults to `<name>.ckpt`. A `<out>.report.json` is written alongside.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute bound curves for a candidate and write CSVs plus a JSON certificate.
    Certify {
        target: String,
        #[command(flatten)]
        cert: CertArgs,
        #[arg(long, default_value = "certify-out")]
        out: PathBuf,
        /// Also write the relative bound (first-order problems with a negative decay rate).
        #[arg(long)]
        relative: bool,
    },
    /// Certify against the exact solution; exit 0 only when every bound holds.
    Verify {
        target: String,
        #[command(flatten)]
        cert: CertArgs,
    },
    /// Train and certify every manufactured case.
    Suite {
        /// 100 training epochs instead of 1000.
        #[arg(long)]
        quick: bool,
        /// Override the epoch count.
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value = "suite-out")]
        out: PathBuf,
        /// Comma-separated subset of case names.
        #[arg(long, value_delimiter = ',')]
        cases: Vec<String>,
    },
    /// Print the manufactured case catalog.
    List,
}

#[derive(Args)]
struct CertArgs {
    /// Snapshot path, or `exact` to certify the exact solution itself.
    #[arg(long)]
    candidate: String,
    #[arg(long, value_delimiter = ',', default_values_t = [1usize, 10, 100])]
    cells: Vec<usize>,
    #[arg(long, default_value_t = DEFAULT_GRID_PER_CELL)]
    grid: usize,
    /// Vector norm for systems: 1, 2 or inf.
    #[arg(long, value_parser = parse_norm)]
    p: Option<NormP>,
    #[arg(long, default_value_t = DEFAULT_EVAL_POINTS)]
    eval_points: usize,
}

impl CertArgs {
    fn options(&self) -> CertifyOptions {
        CertifyOptions { levels: self.cells.clone(), grid_per_cell: self.grid, eval_points: self.eval_points, norm: self.p }
    }
}

fn parse_norm(s: &str) -> Result<NormP, String> {
    NormP::parse(s).ok_or_else(|| format!("unknown norm `{s}` (expected 1, 2 or inf)"))
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: message.into() }
    }
}

impl From<CertifyError> for Failure {
    fn from(e: CertifyError) -> Self {
        let code = match e {
            CertifyError::UnknownCase(_)
            | CertifyError::UnknownCatalogEntry(_)
            | CertifyError::Config(_)
            | CertifyError::Snapshot(_)
            | CertifyError::Io(_)
            | CertifyError::DimensionMismatch { .. } => EXIT_USAGE,
            _ => EXIT_NUMERIC,
        };
        Self { code, message: e.to_string() }
    }
}

type CliResult = Result<u8, Failure>;

fn load_target(target: &str) -> Result<LoadedProblem, Failure> {
    let path = Path::new(target);
    if target.ends_with(".toml") || path.is_file() {
        return Ok(ProblemConfig::load(path)?.build()?);
    }
    find_case(target).map(LoadedProblem::Manufactured).ok_or_else(|| Failure::from(CertifyError::UnknownCase(target.into())))
}

fn load_candidate(spec: &str, loaded: &LoadedProblem) -> Result<Candidate, Failure> {
    if spec == "exact" {
        return match loaded {
            LoadedProblem::Manufactured(case) => Ok(Candidate::exact(case)),
            LoadedProblem::ForcingOnly { name, .. } => {
                Err(Failure::usage(format!("`{name}` has no exact solution to use as a candidate")))
            }
        };
    }
    Ok(Candidate::Network(NetworkCandidate::load(Path::new(spec))?))
}

fn verdict_code(v: Verdict) -> u8 {
    if v == Verdict::Violation { EXIT_VIOLATION } else { EXIT_OK }
}

fn cmd_train(target: &str, epochs: usize, seed: u64, out: Option<PathBuf>) -> CliResult {
    let loaded = load_target(target)?;
    let problem = loaded.problem();
    let config = TrainConfig::for_problem(problem, epochs, seed);
    let (net, report) = train_default(problem, &config)?;
    let out = out.unwrap_or_else(|| PathBuf::from(format!("{}.ckpt", loaded.name())));
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(CertifyError::from)?;
    }
    net.save(&out)?;
    let mut report_path = out.clone().into_os_string();
    report_path.push(".report.json");
    let json = serde_json::json!({
        "case_name": loaded.name(),
        "config": config,
        "summary": TrainingSummary::of(&config, &report),
        "report": report,
    });
    let text = serde_json::to_string_pretty(&json).map_err(CertifyError::from)? + "\n";
    std::fs::write(&report_path, text).map_err(CertifyError::from)?;
    println!(
        "{}: {} epochs, best validation loss {}, saved {}",
        loaded.name(),
        report.loss_history.len(),
        report.best_validation_loss.map_or("n/a".into(), |v| format!("{v:.6e}")),
        out.display()
    );
    if report.diverged {
        eprintln!("warning: training diverged; the best finite snapshot was saved");
    }
    Ok(EXIT_OK)
}

fn cmd_certify(target: &str, cert: &CertArgs, out: &Path, relative: bool) -> CliResult {
    let loaded = load_target(target)?;
    let candidate = load_candidate(&cert.candidate, &loaded)?;
    let exact = match &loaded {
        LoadedProblem::Manufactured(case) => Some(&case.exact),
        LoadedProblem::ForcingOnly { .. } => None,
    };
    let certificate = certify(loaded.name(), loaded.problem(), &candidate, exact, &cert.options())?;
    certificate.write_to(out)?;
    if relative {
        let eps = certificate.profiles[0].global_epsilon();
        let curve = relative_bound_curve(loaded.problem(), eps, certificate.times())?;
        std::fs::write(out.join(format!("{}.relative.csv", loaded.name())), curve.to_csv())
            .map_err(CertifyError::from)?;
    }
    print_certificate_line(&certificate);
    Ok(verdict_code(certificate.verdict))
}

fn cmd_verify(target: &str, cert: &CertArgs) -> CliResult {
    let loaded = load_target(target)?;
    let LoadedProblem::Manufactured(case) = &loaded else {
        return Err(Failure::usage(format!("`{}` has no exact solution; use certify", loaded.name())));
    };
    let candidate = load_candidate(&cert.candidate, &loaded)?;
    let certificate = certify(&case.name, &case.problem, &candidate, Some(&case.exact), &cert.options())?;
    print_certificate_line(&certificate);
    Ok(if certificate.verdict == Verdict::CertifiedAndVerified { EXIT_OK } else { EXIT_VIOLATION })
}

fn print_certificate_line(c: &odecert::harness::Certificate) {
    let eps: Vec<String> = c.profiles.iter().map(|p| format!("{}:{:.3e}", p.n_cells(), p.global_epsilon())).collect();
    print!("{:<16} {:<24} eps[{}]", c.case_name, c.verdict.as_str(), eps.join(" "));
    if let (Some(e), Some(m)) = (c.max_error, c.min_margin) {
        print!(" max_err {e:.3e} min_margin {m:.3e}");
    }
    if !c.notes.is_empty() {
        print!(" ({})", c.notes.join("; "));
    }
    println!();
}

fn cmd_suite(quick: bool, epochs: Option<usize>, seed: u64, out: &Path, names: &[String]) -> CliResult {
    let mut cases = manufactured_suite();
    if !names.is_empty() {
        for n in names {
            if !cases.iter().any(|c| &c.name == n) {
                return Err(CertifyError::UnknownCase(n.clone()).into());
            }
        }
        cases.retain(|c| names.contains(&c.name));
    }
    let epochs = epochs.unwrap_or(if quick { QUICK_EPOCHS } else { FULL_EPOCHS });
    eprintln!("running {} cases, {epochs} epochs, seed {seed}, {} threads", cases.len(), thread_count());
    let results = run_suite(&cases, epochs, seed, &CertifyOptions::default());
    std::fs::create_dir_all(out).map_err(CertifyError::from)?;
    let mut code = EXIT_OK;
    for (name, r) in &results {
        match r {
            Ok(c) => {
                c.write_to(out)?;
                print_certificate_line(c);
                code = code.max(verdict_code(c.verdict));
            }
            Err(e) => {
                println!("{name:<16} ERROR {e}");
                code = EXIT_NUMERIC;
            }
        }
    }
    std::fs::write(out.join("summary.csv"), summary_csv(&results)).map_err(CertifyError::from)?;
    Ok(code)
}

fn cmd_list() -> CliResult {
    for case in manufactured_suite() {
        let p = &case.problem;
        println!("{:<16} {:<14} dim {} order {}  {}", case.name, p.kind_name(), p.dim(), p.order(), case.notes);
    }
    Ok(EXIT_OK)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train { target, epochs, seed, out } => cmd_train(&target, epochs, seed, out),
        Command::Certify { target, cert, out, relative } => cmd_certify(&target, &cert, &out, relative),
        Command::Verify { target, cert } => cmd_verify(&target, &cert),
        Command::Suite { quick, epochs, seed, out, cases } => cmd_suite(quick, epochs, seed, &out, &cases),
        Command::List => cmd_list(),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
