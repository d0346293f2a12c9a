//! End-to-end acceptance run: one PASS/FAIL line per criterion, exit status
//! nonzero if any criterion fails. The optimizer criteria (4–6) take minutes.

use std::process::{Command, ExitCode};
use std::time::Instant;

use qbattery::battery::TwoQubitZZ;
use qbattery::optimizer::{
    maximize_work, sweep, uniform_grid, Constraint, OptimizerConfig, StateKind, SweepResult,
    WorkKind,
};
use qbattery::passivity::{ergotropy_value, local_ergotropy_value};
use qbattery::qmat::{random_pure_state, DensityOperator};
use qbattery::twoqubit::{
    deficit, density_from_coeffs, g, g_p, lbar, logneg_general, logneg_pure, rho_max_coeffs,
    CurveId, PureCoefficients,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn max_abs<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    it.into_iter().fold(
        0.0,
        |m, x| if x.is_nan() { f64::NAN } else { m.max(x.abs()) },
    )
}

fn endpoints(h: &TwoQubitZZ) -> Outcome {
    let dev = max_abs([
        g_p(0.0, h).unwrap() - 0.0,
        g_p(1.0, h).unwrap() - 3.0,
        g(0.0, h).unwrap() - 6.0,
        g(1.0, h).unwrap() - 3.0,
        lbar(1.0, h).unwrap() - 0.0,
    ]);
    outcome(dev <= 1e-12, format!("max deviation {dev:.2e} (tol 1e-12)"))
}

fn deficit_identity(h: &TwoQubitZZ) -> Outcome {
    let dev = max_abs(
        uniform_grid(0.0, 1.0, 1001)
            .into_iter()
            .map(|e| deficit(e, h).unwrap() - g_p(e, h).unwrap()),
    );
    outcome(
        dev < 1e-12,
        format!("max |deficit - g_p| = {dev:.2e} over 1001 points (tol 1e-12)"),
    )
}

fn analytic_vs_engine(h: &TwoQubitZZ) -> Outcome {
    let hl = h.local();
    let hf = hl.full_hamiltonian();
    let (mut dg, mut dl) = (0.0_f64, 0.0_f64);
    for e in uniform_grid(0.0, 1.0, 101) {
        let rho = density_from_coeffs(&rho_max_coeffs(e).unwrap());
        dg = dg.max((ergotropy_value(&rho, &hf).unwrap() - g(e, h).unwrap()).abs());
        dl = dl.max((local_ergotropy_value(&rho, &hl).unwrap() - lbar(e, h).unwrap()).abs());
    }
    outcome(
        dg <= 1e-9 && dl <= 1e-9,
        format!(
            "ergotropy vs g {dg:.2e}, local ergotropy vs lbar {dl:.2e} over 101 points (tol 1e-9)"
        ),
    )
}

fn pure_closed_forms(h: &TwoQubitZZ, cfg: &OptimizerConfig) -> Outcome {
    let (mut dg, mut dgp) = (0.0_f64, 0.0_f64);
    let mut feasible = true;
    for e in uniform_grid(0.0, 1.0, 11) {
        let free = maximize_work(
            e,
            h,
            StateKind::Pure,
            WorkKind::Global,
            Constraint::None,
            cfg,
        )
        .unwrap();
        let lp = maximize_work(
            e,
            h,
            StateKind::Pure,
            WorkKind::Global,
            Constraint::LocallyPassive,
            cfg,
        )
        .unwrap();
        feasible &= free.diagnostics.feasible && lp.diagnostics.feasible;
        dg = max_abs([dg, free.work - g(e, h).unwrap()]);
        dgp = max_abs([dgp, lp.work - g_p(e, h).unwrap()]);
    }
    outcome(
        feasible && dg <= 1e-3 && dgp <= 1e-3,
        format!("max |opt - g| = {dg:.2e}, max |opt_lp - g_p| = {dgp:.2e} at 11 points (tol 1e-3)"),
    )
}

fn local_work_line(h: &TwoQubitZZ, cfg: &OptimizerConfig) -> Outcome {
    let r = sweep(CurveId::LPure, &uniform_grid(0.0, 1.0, 11), h, cfg).unwrap();
    let dev = max_abs(
        r.points
            .iter()
            .map(|p| p.value - lbar(p.entanglement, h).unwrap()),
    );
    outcome(
        r.all_feasible() && dev <= 2e-3,
        format!("max |opt local work - lbar| = {dev:.2e} at 11 points (tol 2e-3)"),
    )
}

fn mixed_curves(h: &TwoQubitZZ, cfg: &OptimizerConfig) -> Outcome {
    let grid = uniform_grid(0.0, 1.0, 11);
    let bound = 2.0 * h.sum() + 1e-6;
    let check = |r: &SweepResult,
                 reference: &dyn Fn(f64) -> f64,
                 strict_upto: Option<f64>,
                 delta_tol: f64| {
        let mut worst_dominance = f64::INFINITY;
        let mut worst_strict = f64::INFINITY;
        let mut max_value = f64::NEG_INFINITY;
        for p in &r.points {
            let gap = p.value - reference(p.entanglement);
            worst_dominance = worst_dominance.min(gap);
            if strict_upto.is_some_and(|lim| p.entanglement <= lim + 1e-12) {
                worst_strict = worst_strict.min(gap);
            }
            max_value = max_value.max(p.value);
        }
        let delta = r.max_restart_delta().unwrap_or(f64::NAN);
        let pass = r.all_feasible()
            && worst_dominance >= -1e-3
            && (strict_upto.is_none() || worst_strict > 0.05)
            && max_value <= bound
            && delta < delta_tol;
        let strict = if strict_upto.is_some() {
            format!(", min gap for E<=0.3 {worst_strict:.4}")
        } else {
            String::new()
        };
        (
            pass,
            format!(
                "{}: min gap {worst_dominance:+.2e}{strict}, max {max_value:.6} (bound {:.1}), doubling delta {delta:.2e} (tol {delta_tol:.0e})",
                r.curve.as_str(),
                2.0 * h.sum()
            ),
        )
    };
    let gp_mixed = sweep(CurveId::GpMixed, &grid, h, cfg).unwrap();
    let (p1, d1) = check(&gp_mixed, &|e| g_p(e, h).unwrap(), Some(0.3), 1e-3);
    let g_mixed = sweep(CurveId::GMixed, &grid, h, cfg).unwrap();
    let (p2, d2) = check(&g_mixed, &|e| g(e, h).unwrap(), None, 0.1);
    outcome(p1 && p2, format!("{d1}; {d2}"))
}

fn property_suites() -> Outcome {
    let out = Command::new(env!("CARGO_BIN_EXE_qbattery"))
        .args(["verify", "--suite", "all"])
        .current_dir(std::env::temp_dir())
        .output()
        .expect("binary runs");
    let text = String::from_utf8_lossy(&out.stdout);
    let passed = text.lines().filter(|l| l.starts_with("PASS")).count();
    let failed: Vec<&str> = text.lines().filter(|l| l.starts_with("FAIL")).collect();
    outcome(
        out.status.success() && failed.is_empty(),
        format!(
            "verify --suite all: {passed} checks passed, {} failed {failed:?}",
            failed.len()
        ),
    )
}

fn logneg_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut dev = 0.0_f64;
    for _ in 0..1000 {
        let rho: DensityOperator = random_pure_state(2, 2, &mut rng);
        // Amplitudes from the rank-1 matrix: column of the largest diagonal entry.
        let m = rho.matrix();
        let k = (0..4)
            .max_by(|&a, &b| m[(a, a)].re.total_cmp(&m[(b, b)].re))
            .unwrap();
        let scale = m[(k, k)].re.sqrt();
        let c = [0, 1, 2, 3].map(|i| m[(i, k)] / scale);
        let coeffs = PureCoefficients::normalized(c).unwrap();
        dev = dev.max((logneg_general(&rho) - logneg_pure(&coeffs)).abs());
    }
    outcome(
        dev <= 1e-10,
        format!("max deviation {dev:.2e} over 1000 random pure states (tol 1e-10)"),
    )
}

type Criterion = (&'static str, Box<dyn Fn() -> Outcome>);

fn main() -> ExitCode {
    let h = TwoQubitZZ::default();
    let cfg = OptimizerConfig::default();
    let criteria: Vec<Criterion> = vec![
        ("curve endpoints", Box::new(move || endpoints(&h))),
        ("deficit identity", Box::new(move || deficit_identity(&h))),
        (
            "analytic vs engine",
            Box::new(move || analytic_vs_engine(&h)),
        ),
        (
            "pure optimizer reproduces closed forms",
            Box::new({
                let cfg = cfg.clone();
                move || pure_closed_forms(&h, &cfg)
            }),
        ),
        (
            "local-work optimizer on lbar",
            Box::new({
                let cfg = cfg.clone();
                move || local_work_line(&h, &cfg)
            }),
        ),
        (
            "mixed-state curves",
            Box::new({
                let cfg = cfg.clone();
                move || mixed_curves(&h, &cfg)
            }),
        ),
        ("property suites", Box::new(property_suites)),
        ("log-negativity equivalence", Box::new(logneg_equivalence)),
    ];
    let mut all = true;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = run();
        all &= o.pass;
        println!(
            "criterion {}: {} — {name}: {} [{:.1}s]",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            t.elapsed().as_secs_f64()
        );
    }
    if all {
        println!("acceptance: all {} criteria passed", criteria.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: FAILED");
        ExitCode::FAILURE
    }
}
