//! `qbattery`: ergotropy, passive states, work curves and property checks for
//! bipartite quantum batteries.
//!
//! Exit codes: 0 success, 1 failed verification, 2 bad input, 3 infeasible
//! curve point. Errors are a single `error: ...` line on stderr.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use qbattery::battery::{energy, energy_full, LocalHamiltonian, TwoQubitZZ};
use qbattery::io::{load_hamiltonian, load_state, write_text, StateFile};
use qbattery::optimizer::{sweep, uniform_grid, OptimizerConfig};
use qbattery::passivity::{ergotropy, local_ergotropy, locally_passive_state, passive_state};
use qbattery::qmat::{ComplexMatrix, DensityOperator};
use qbattery::twoqubit::CurveId;
use qbattery::verify::{self, Suite, VerifyOptions};
use qbattery::{fmt_fixed, BatteryError};

const DECIMALS: usize = 6;

#[derive(Parser, Debug)]
#[command(
    name = "qbattery",
    version,
    about = "Work extraction from bipartite quantum batteries"
)]
struct Cli {
    /// ε_A of the default two-qubit Hamiltonian ε_A σz⊗I + ε_B I⊗σz.
    #[arg(long, global = true, default_value_t = 2.0)]
    eps_a: f64,
    /// ε_B of the default two-qubit Hamiltonian.
    #[arg(long, global = true, default_value_t = 1.0)]
    eps_b: f64,
    /// Seed for every random choice (optimizer restarts, sampled states).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Optimizer restarts per grid point.
    #[arg(long, global = true, default_value_t = OptimizerConfig::default().restarts)]
    restarts: usize,
    /// Output file (CSV for `curve`, state JSON for `passive`/`local-passive`,
    /// failing samples for `verify`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Energy before and after optimal (global or local) work extraction.
    Ergotropy {
        #[arg(long)]
        state: PathBuf,
        /// Hamiltonian JSON; defaults to the two-qubit Hamiltonian from --eps-a/--eps-b.
        #[arg(long)]
        hamiltonian: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Mode::Global)]
        mode: Mode,
    },
    /// The passive state of the input.
    Passive {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        hamiltonian: Option<PathBuf>,
    },
    /// The locally passive state of the input.
    LocalPassive {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        hamiltonian: Option<PathBuf>,
    },
    /// Work-versus-entanglement curve as CSV.
    Curve {
        #[arg(long, value_parser = parse_curve)]
        which: CurveId,
        #[arg(long, default_value_t = 0.0)]
        emin: f64,
        #[arg(long, default_value_t = 1.0)]
        emax: f64,
        #[arg(long, default_value_t = 11)]
        steps: usize,
    },
    /// Randomized property suites; exits 1 if any check fails.
    Verify {
        #[arg(long, value_parser = parse_suite, default_value = "all")]
        suite: Suite,
        /// Trials per randomized suite (defaults: passivity 200, uniqueness 500, oracle 100).
        #[arg(long)]
        trials: Option<usize>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Mode {
    Global,
    Local,
}

fn parse_curve(s: &str) -> Result<CurveId, String> {
    s.parse().map_err(|e: BatteryError| e.to_string())
}

fn parse_suite(s: &str) -> Result<Suite, String> {
    s.parse().map_err(|e: BatteryError| e.to_string())
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<BatteryError> for Failure {
    fn from(e: BatteryError) -> Self {
        Failure::input(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            // Clap spreads the reason over several lines before the usage block.
            let rendered = e.to_string();
            let reason: Vec<&str> = rendered
                .lines()
                .take_while(|l| !l.starts_with("Usage:") && !l.starts_with("For more information"))
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .collect();
            let reason = reason.join(" ");
            eprintln!("error: {}", reason.trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message.replace('\n', " "));
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Ergotropy {
            state,
            hamiltonian,
            mode,
        } => cmd_ergotropy(cli, state, hamiltonian.as_deref(), *mode),
        Command::Passive { state, hamiltonian } => {
            cmd_passive(cli, state, hamiltonian.as_deref(), false)
        }
        Command::LocalPassive { state, hamiltonian } => {
            cmd_passive(cli, state, hamiltonian.as_deref(), true)
        }
        Command::Curve {
            which,
            emin,
            emax,
            steps,
        } => cmd_curve(cli, *which, *emin, *emax, *steps),
        Command::Verify { suite, trials } => cmd_verify(cli, *suite, *trials),
    }
}

fn two_qubit(cli: &Cli) -> Result<TwoQubitZZ, Failure> {
    Ok(TwoQubitZZ::new(cli.eps_a, cli.eps_b)?)
}

fn optimizer_config(cli: &Cli) -> Result<OptimizerConfig, Failure> {
    let cfg = OptimizerConfig {
        restarts: cli.restarts,
        seed: cli.seed,
        ..OptimizerConfig::default()
    };
    cfg.validate()?;
    Ok(cfg)
}

fn load_inputs(
    cli: &Cli,
    state: &Path,
    hamiltonian: Option<&Path>,
) -> Result<(DensityOperator, LocalHamiltonian), Failure> {
    let rho = load_state(state)?;
    let h = match hamiltonian {
        Some(p) => load_hamiltonian(p)?,
        None => two_qubit(cli)?.local(),
    };
    if (rho.dim_a(), rho.dim_b()) != (h.dim_a(), h.dim_b()) {
        return Err(BatteryError::DimensionMismatch {
            expected: format!("{}x{} state for the Hamiltonian", h.dim_a(), h.dim_b()),
            found: format!("{}x{} state", rho.dim_a(), rho.dim_b()),
        }
        .into());
    }
    Ok((rho, h))
}

fn fmt_entry(z: qbattery::qmat::C64) -> String {
    let im = fmt_fixed(z.im, DECIMALS);
    let sign = if im.starts_with('-') { "" } else { "+" };
    format!("{}{sign}{im}i", fmt_fixed(z.re, DECIMALS))
}

fn fmt_matrix(m: &ComplexMatrix) -> String {
    let mut s = String::new();
    for row in m.to_rows() {
        let cells: Vec<String> = row.into_iter().map(fmt_entry).collect();
        let _ = writeln!(s, "  [{}]", cells.join(", "));
    }
    s
}

fn cmd_ergotropy(
    cli: &Cli,
    state: &Path,
    hamiltonian: Option<&Path>,
    mode: Mode,
) -> Result<(), Failure> {
    let (rho, h) = load_inputs(cli, state, hamiltonian)?;
    let hf = h.full_hamiltonian();
    let result = match mode {
        Mode::Global => ergotropy(&rho, &hf)?,
        Mode::Local => local_ergotropy(&rho, &h)?,
    };
    let initial = energy(&rho, &h)?;
    let fin = energy_full(&result.final_state, &hf)?;
    let label = match mode {
        Mode::Global => "passive",
        Mode::Local => "locally passive",
    };
    println!(
        "mode = {}",
        if mode == Mode::Global {
            "global"
        } else {
            "local"
        }
    );
    println!("initial energy = {} ε", fmt_fixed(initial, DECIMALS));
    println!("final energy = {} ε", fmt_fixed(fin, DECIMALS));
    println!("work = {} ε", fmt_fixed(result.work, DECIMALS));
    println!("final state ({label}):");
    print!("{}", fmt_matrix(result.final_state.matrix()));
    Ok(())
}

fn cmd_passive(
    cli: &Cli,
    state: &Path,
    hamiltonian: Option<&Path>,
    local: bool,
) -> Result<(), Failure> {
    let (rho, h) = load_inputs(cli, state, hamiltonian)?;
    let out = if local {
        locally_passive_state(&rho, &h)?.final_state
    } else {
        passive_state(&rho, &h.full_hamiltonian())?
    };
    println!("energy = {} ε", fmt_fixed(energy(&out, &h)?, DECIMALS));
    println!(
        "{} state:",
        if local { "locally passive" } else { "passive" }
    );
    print!("{}", fmt_matrix(out.matrix()));
    if let Some(path) = &cli.out {
        write_text(path, &StateFile::from_density(&out).to_json())?;
    }
    Ok(())
}

fn cmd_curve(cli: &Cli, which: CurveId, emin: f64, emax: f64, steps: usize) -> Result<(), Failure> {
    if !(emin.is_finite() && emax.is_finite() && 0.0 <= emin && emin <= emax && emax <= 1.0) {
        return Err(Failure::input(format!(
            "grid must satisfy 0 <= emin <= emax <= 1, got emin = {emin}, emax = {emax}"
        )));
    }
    if steps < 2 {
        return Err(Failure::input(format!("steps must be >= 2, got {steps}")));
    }
    let h = two_qubit(cli)?;
    let cfg = optimizer_config(cli)?;
    let grid = uniform_grid(emin, emax, steps);
    let result = sweep(which, &grid, &h, &cfg)?;

    let mut csv = String::from("E,work_over_eps,curve,eps_a,eps_b,residual\n");
    for (p, d) in result.points.iter().zip(&result.diagnostics) {
        let work = if p.value.is_finite() {
            fmt_fixed(p.value, DECIMALS)
        } else {
            "NaN".to_string()
        };
        let _ = writeln!(
            csv,
            "{},{work},{},{},{},{:.6e}",
            fmt_fixed(p.entanglement, DECIMALS),
            which.as_str(),
            fmt_fixed(h.eps_a, DECIMALS),
            fmt_fixed(h.eps_b, DECIMALS),
            d.residual
        );
    }
    match &cli.out {
        Some(path) => write_text(path, &csv)?,
        None => print!("{csv}"),
    }

    let infeasible: Vec<String> = result
        .points
        .iter()
        .zip(&result.diagnostics)
        .filter(|(_, d)| !d.feasible)
        .map(|(p, _)| fmt_fixed(p.entanglement, DECIMALS))
        .collect();
    if infeasible.is_empty() {
        Ok(())
    } else {
        Err(Failure {
            code: 3,
            message: format!("no feasible state found at E = {}", infeasible.join(", ")),
        })
    }
}

const DEFAULT_FAILURES_FILE: &str = "verify-failures.json";

fn cmd_verify(cli: &Cli, suite: Suite, trials: Option<usize>) -> Result<(), Failure> {
    if trials == Some(0) {
        return Err(Failure::input("trials must be >= 1"));
    }
    let opts = VerifyOptions {
        trials,
        seed: cli.seed,
        hamiltonian: two_qubit(cli)?,
        optimizer: optimizer_config(cli)?,
    };
    let report = verify::run(suite, &opts)?;
    for c in &report.checks {
        println!(
            "{}  {:<10}  {:<56}  worst={:.3e}  tol={:.1e}  n={}",
            if c.passed() { "PASS" } else { "FAIL" },
            c.suite.as_str(),
            c.name,
            c.worst,
            c.tolerance,
            c.samples
        );
    }
    if report.passed() {
        println!("all {} checks passed", report.checks.len());
        return Ok(());
    }
    let failed = report.checks.iter().filter(|c| !c.passed()).count();
    let path = cli
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(DEFAULT_FAILURES_FILE));
    write_text(&path, &report.failing_samples_json())?;
    Err(Failure {
        code: 1,
        message: format!(
            "{failed} check(s) failed; failing samples written to {}",
            path.display()
        ),
    })
}
