//! Property suites behind `verify`: randomized checks of the passivity
//! constructions, the uniqueness of the locally passive state, the closed-form
//! two-qubit identities, the local-work optimizer, and the brute-force local
//! ergotropy oracle.
//!
//! Every trial draws from its own ChaCha stream (`seed`, stream = suite
//! offset + trial index), so reports are identical however the trials are
//! scheduled. The first failing sample of each check is kept for reproduction.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::battery::{energy, HamiltonianSpec, LocalHamiltonian, TwoQubitZZ};
use crate::error::{BatteryError, Result};
use crate::io::StateFile;
use crate::optimizer::{uniform_grid, verify_proposition4, OptimizerConfig, PROP4_TOL};
use crate::passivity::{
    ergotropy_value, is_locally_passive, is_passive, local_ergotropy_oracle, local_ergotropy_value,
    locally_passive_state, passive_state,
};
use crate::qmat::{
    random_density, random_hermitian_matrix, random_local_unitary, random_pure_state,
    DensityOperator, HermitianOperator, Subsystem,
};
use crate::twoqubit::{
    deficit, density_from_coeffs, g, g_p, lbar, logneg_pure, rho_max_coeffs, sigma_lmax_coeffs,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    All,
    Passivity,
    Uniqueness,
    Theorem3,
    Prop4,
    Oracle,
}

impl Suite {
    pub const INDIVIDUAL: [Suite; 5] = [
        Suite::Passivity,
        Suite::Uniqueness,
        Suite::Theorem3,
        Suite::Prop4,
        Suite::Oracle,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Suite::All => "all",
            Suite::Passivity => "passivity",
            Suite::Uniqueness => "uniqueness",
            Suite::Theorem3 => "theorem3",
            Suite::Prop4 => "prop4",
            Suite::Oracle => "oracle",
        }
    }

    /// Trials used when none are requested.
    pub fn default_trials(&self) -> usize {
        match self {
            Suite::Passivity => 200,
            Suite::Uniqueness => 500,
            Suite::Oracle => 100,
            Suite::All | Suite::Theorem3 | Suite::Prop4 => 1,
        }
    }

    fn stream_offset(&self) -> u64 {
        match self {
            Suite::Passivity => 1 << 32,
            Suite::Uniqueness => 2 << 32,
            Suite::Oracle => 3 << 32,
            _ => 0,
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Suite {
    type Err = BatteryError;

    fn from_str(s: &str) -> Result<Self> {
        std::iter::once(Suite::All)
            .chain(Suite::INDIVIDUAL)
            .find(|x| x.as_str() == s)
            .ok_or_else(|| {
                BatteryError::InvalidInput(format!(
                    "unknown suite '{s}' (expected all, passivity, uniqueness, theorem3, prop4 or oracle)"
                ))
            })
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct VerifyOptions {
    /// Overrides every suite's default trial count.
    pub trials: Option<usize>,
    pub seed: u64,
    pub hamiltonian: TwoQubitZZ,
    /// Used by the optimizer-backed suite; its seed is replaced by `seed`.
    pub optimizer: OptimizerConfig,
}

/// Everything needed to rerun one failing trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailingSample {
    pub suite: Suite,
    pub check: String,
    pub seed: u64,
    pub trial: usize,
    #[serde(with = "nan_as_null")]
    pub deviation: f64,
    pub tolerance: f64,
    pub detail: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub state: Option<StateFile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hamiltonian: Option<HamiltonianSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub suite: Suite,
    pub name: String,
    pub samples: usize,
    pub failures: usize,
    /// Largest deviation seen; NaN counts as a failure.
    #[serde(with = "nan_as_null")]
    pub worst: f64,
    pub tolerance: f64,
    pub first_failure: Option<FailingSample>,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checks: Vec<CheckOutcome>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckOutcome::passed)
    }

    pub fn failing_samples(&self) -> Vec<&FailingSample> {
        self.checks
            .iter()
            .filter_map(|c| c.first_failure.as_ref())
            .collect()
    }

    /// Failing samples as a JSON array, for reproduction.
    pub fn failing_samples_json(&self) -> String {
        serde_json::to_string_pretty(&self.failing_samples()).expect("samples always serialize")
    }
}

/// JSON has no NaN: write it as `null` and read `null` back as NaN.
mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if x.is_nan() {
            s.serialize_none()
        } else {
            s.serialize_f64(*x)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

/// One measured deviation; `detail` is kept only if it fails.
struct Observation {
    deviation: f64,
    detail: String,
}

impl Observation {
    fn new(deviation: f64, detail: impl Into<String>) -> Self {
        Self {
            deviation,
            detail: detail.into(),
        }
    }

    fn flag(ok: bool, detail: impl Into<String>) -> Self {
        Self::new(if ok { 0.0 } else { 1.0 }, detail)
    }
}

/// Per-trial observations, one per check in a fixed order, with the inputs.
struct TrialRecord {
    observations: Vec<Observation>,
    state: Option<DensityOperator>,
    hamiltonian: Option<HamiltonianSpec>,
}

struct Tally {
    suite: Suite,
    name: &'static str,
    tolerance: f64,
    samples: usize,
    failures: usize,
    worst: f64,
    first_failure: Option<FailingSample>,
}

impl Tally {
    fn new(suite: Suite, name: &'static str, tolerance: f64) -> Self {
        Self {
            suite,
            name,
            tolerance,
            samples: 0,
            failures: 0,
            worst: 0.0,
            first_failure: None,
        }
    }

    fn record(&mut self, seed: u64, trial: usize, obs: &Observation, record: &TrialRecord) {
        self.samples += 1;
        let d = obs.deviation;
        if d.is_nan() || d > self.worst {
            self.worst = if d.is_nan() { f64::NAN } else { d };
        }
        if d.is_nan() || d > self.tolerance {
            self.failures += 1;
            if self.first_failure.is_none() {
                self.first_failure = Some(FailingSample {
                    suite: self.suite,
                    check: self.name.to_string(),
                    seed,
                    trial,
                    deviation: d,
                    tolerance: self.tolerance,
                    detail: obs.detail.clone(),
                    state: record.state.as_ref().map(StateFile::from_density),
                    hamiltonian: record.hamiltonian.clone(),
                });
            }
        }
    }

    fn finish(self) -> CheckOutcome {
        CheckOutcome {
            suite: self.suite,
            name: self.name.to_string(),
            samples: self.samples,
            failures: self.failures,
            worst: self.worst,
            tolerance: self.tolerance,
            first_failure: self.first_failure,
        }
    }
}

/// Runs `trial` for each index in parallel and folds the records in order.
fn run_trials<F>(
    suite: Suite,
    checks: &[(&'static str, f64)],
    trials: usize,
    seed: u64,
    trial: F,
) -> Result<Vec<CheckOutcome>>
where
    F: Fn(&mut ChaCha8Rng) -> Result<TrialRecord> + Sync,
{
    let records = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(suite.stream_offset() + t as u64);
            trial(&mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut tallies: Vec<Tally> = checks
        .iter()
        .map(|&(n, tol)| Tally::new(suite, n, tol))
        .collect();
    for (t, record) in records.iter().enumerate() {
        debug_assert_eq!(record.observations.len(), tallies.len());
        for (tally, obs) in tallies.iter_mut().zip(&record.observations) {
            tally.record(seed, t, obs, record);
        }
    }
    Ok(tallies.into_iter().map(Tally::finish).collect())
}

pub fn run(suite: Suite, opts: &VerifyOptions) -> Result<VerifyReport> {
    if opts.trials == Some(0) {
        return Err(BatteryError::InvalidInput("trials must be >= 1".into()));
    }
    let suites: Vec<Suite> = match suite {
        Suite::All => Suite::INDIVIDUAL.to_vec(),
        s => vec![s],
    };
    let mut report = VerifyReport::default();
    for s in suites {
        let trials = opts.trials.unwrap_or_else(|| s.default_trials());
        let checks = match s {
            Suite::Passivity => passivity_suite(trials, opts)?,
            Suite::Uniqueness => uniqueness_suite(trials, opts)?,
            Suite::Theorem3 => closed_form_suite(opts)?,
            Suite::Prop4 => prop4_suite(opts)?,
            Suite::Oracle => oracle_suite(trials, opts)?,
            Suite::All => unreachable!(),
        };
        report.checks.extend(checks);
    }
    Ok(report)
}

const SPECTRUM_TOL: f64 = 1e-9;
const MONOTONE_TOL: f64 = 1e-9;
const MONOTONE_UNITARIES: usize = 1000;
const UNIQUENESS_TOL: f64 = 1e-8;
/// Reduced-spectrum gap below which a sample counts as degenerate.
const NONDEGENERATE_GAP: f64 = 1e-3;
const ORACLE_GRID: usize = 24;
/// The oracle may fall short of the analytic value by this much (units of ε).
const ORACLE_GAP_TOL: f64 = 0.01;

fn spectrum_deviation(a: &DensityOperator, b: &DensityOperator) -> f64 {
    a.eigenvalues()
        .iter()
        .zip(&b.eigenvalues())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Random qubit Hamiltonian with level spacing at least 0.5.
fn random_qubit_hamiltonian(rng: &mut ChaCha8Rng) -> HermitianOperator {
    loop {
        let h = HermitianOperator::new(random_hermitian_matrix(2, rng))
            .expect("Hermitian by construction");
        let ev = h.spectrum(crate::qmat::EigenOrder::Ascending).values;
        if ev[1] - ev[0] >= 0.5 {
            return h;
        }
    }
}

fn local_spec(h: &LocalHamiltonian) -> HamiltonianSpec {
    HamiltonianSpec::Local {
        h_a: crate::battery::matrix_to_pairs(h.h_a().matrix()),
        h_b: crate::battery::matrix_to_pairs(h.h_b().matrix()),
    }
}

fn passivity_suite(trials: usize, opts: &VerifyOptions) -> Result<Vec<CheckOutcome>> {
    let zz = opts.hamiltonian;
    let checks = [
        ("passive state keeps the spectrum", SPECTRUM_TOL),
        ("locally passive state keeps the spectrum", SPECTRUM_TOL),
        ("passivity predicates hold on constructed states", 0.0),
        ("0 <= local ergotropy <= ergotropy", 0.0),
        ("locally passive iff zero local work", 0.0),
        ("local ergotropy equals the sigma^l energy drop", 1e-10),
        (
            "no local unitary lowers the energy of sigma^l",
            MONOTONE_TOL,
        ),
    ];
    run_trials(Suite::Passivity, &checks, trials, opts.seed, |rng| {
        // Alternate mixed/pure states and the two-qubit/random local Hamiltonians.
        let pure = rng_bit(rng);
        let rho = if pure {
            random_pure_state(2, 2, rng)
        } else {
            random_density(2, 2, rng)
        };
        let hl = if rng_bit(rng) {
            zz.local()
        } else {
            LocalHamiltonian::new(random_qubit_hamiltonian(rng), random_qubit_hamiltonian(rng))
        };
        let hf = hl.full_hamiltonian();
        let norm = hl.norm_max();
        let passive = passive_state(&rho, &hf)?;
        let sigma = locally_passive_state(&rho, &hl)?.final_state;
        let w = ergotropy_value(&rho, &hf)?;
        let wl = local_ergotropy_value(&rho, &hl)?;
        let tol = 1e-9 * norm.max(1.0);
        let hierarchy = (-wl - tol).max(wl - w - tol).max(0.0);
        let iff = [&rho, &sigma].iter().all(|x| {
            let zero = local_ergotropy_value(x, &hl)
                .map(|v| v < 1e-9 * norm)
                .unwrap_or(false);
            is_locally_passive(x, &hl) == zero
        });
        let drop = energy(&rho, &hl)? - energy(&sigma, &hl)?;
        let e_sigma = energy(&sigma, &hl)?;
        let mut lowest = f64::INFINITY;
        for _ in 0..MONOTONE_UNITARIES {
            let u = random_local_unitary(2, 2, rng);
            lowest = lowest.min(energy(&sigma.evolve(&u)?, &hl)? - e_sigma);
        }
        Ok(TrialRecord {
            observations: vec![
                Observation::new(spectrum_deviation(&rho, &passive), "eigenvalues of the passive state"),
                Observation::new(spectrum_deviation(&rho, &sigma), "eigenvalues of sigma^l"),
                Observation::flag(
                    is_passive(&passive, &hf) && is_locally_passive(&passive, &hl) && is_locally_passive(&sigma, &hl),
                    format!(
                        "is_passive(passive)={}, is_locally_passive(passive)={}, is_locally_passive(sigma^l)={}",
                        is_passive(&passive, &hf),
                        is_locally_passive(&passive, &hl),
                        is_locally_passive(&sigma, &hl)
                    ),
                ),
                Observation::new(hierarchy, format!("local ergotropy {wl}, ergotropy {w}")),
                Observation::flag(iff, "predicate and local work disagree on rho or sigma^l"),
                Observation::new((wl - drop).abs() / (1.0 + norm), format!("local ergotropy {wl}, energy drop {drop}")),
                Observation::new((-lowest).max(0.0), format!("lowest energy change {lowest}")),
            ],
            state: Some(rho),
            hamiltonian: Some(local_spec(&hl)),
        })
    })
}

fn rng_bit(rng: &mut ChaCha8Rng) -> bool {
    rand::Rng::gen_bool(rng, 0.5)
}

fn reduced_gap(rho: &DensityOperator, w: Subsystem) -> f64 {
    let ev = rho.reduced(w).eigenvalues();
    (ev[ev.len() - 1] - ev[0]).abs()
}

fn uniqueness_suite(trials: usize, opts: &VerifyOptions) -> Result<Vec<CheckOutcome>> {
    let hl = opts.hamiltonian.local();
    let checks = [
        (
            "sigma^l is invariant under local unitaries (entrywise)",
            UNIQUENESS_TOL,
        ),
        ("sigma^l energy is invariant under local unitaries", 1e-10),
    ];
    run_trials(Suite::Uniqueness, &checks, trials, opts.seed, |rng| {
        let rho = loop {
            let candidate = if rng_bit(rng) {
                random_pure_state(2, 2, rng)
            } else {
                random_density(2, 2, rng)
            };
            if reduced_gap(&candidate, Subsystem::A) >= NONDEGENERATE_GAP
                && reduced_gap(&candidate, Subsystem::B) >= NONDEGENERATE_GAP
            {
                break candidate;
            }
        };
        let v = random_local_unitary(2, 2, rng);
        let rotated = rho.evolve(&v)?;
        let s1 = locally_passive_state(&rho, &hl)?.final_state;
        let s2 = locally_passive_state(&rotated, &hl)?.final_state;
        let de = (energy(&s1, &hl)? - energy(&s2, &hl)?).abs();
        Ok(TrialRecord {
            observations: vec![
                Observation::new(
                    s1.matrix().max_abs_diff(s2.matrix()),
                    "max entrywise difference of the two sigma^l",
                ),
                Observation::new(de, "energy difference of the two sigma^l"),
            ],
            state: Some(rho),
            hamiltonian: Some(opts.hamiltonian.into()),
        })
    })
}

/// Closed-form two-qubit identities: endpoints, the deficit identity,
/// constraint satisfaction, engine agreement and monotonicity.
fn closed_form_suite(opts: &VerifyOptions) -> Result<Vec<CheckOutcome>> {
    let h = &opts.hamiltonian;
    let s = h.sum();
    let hl = h.local();
    let hf = hl.full_hamiltonian();
    let fine = uniform_grid(0.0, 1.0, 1001);
    let coarse = uniform_grid(0.0, 1.0, 101);
    let suite = Suite::Theorem3;
    let mut out = Vec::new();

    let mut single = |name: &'static str,
                      tol: f64,
                      points: &[f64],
                      dev: &dyn Fn(f64) -> Result<f64>|
     -> Result<()> {
        let mut tally = Tally::new(suite, name, tol);
        let empty = TrialRecord {
            observations: vec![],
            state: None,
            hamiltonian: Some((*h).into()),
        };
        for (i, &e) in points.iter().enumerate() {
            let d = dev(e)?;
            tally.record(
                opts.seed,
                i,
                &Observation::new(d, format!("E = {e}")),
                &empty,
            );
        }
        out.push(tally.finish());
        Ok(())
    };

    single("curve endpoints", 1e-12, &[0.0, 1.0], &|e| {
        let expected = if e == 0.0 { [0.0, 2.0 * s] } else { [s, s] };
        let lbar_expected = if e == 0.0 { 2.0 * s } else { 0.0 };
        Ok((g_p(e, h)? - expected[0])
            .abs()
            .max((g(e, h)? - expected[1]).abs())
            .max((lbar(e, h)? - lbar_expected).abs()))
    })?;
    single("deficit g - lbar equals g_p", 1e-12, &fine, &|e| {
        Ok((deficit(e, h)? - g_p(e, h)?).abs())
    })?;
    single(
        "constructed states have log-negativity E",
        1e-10,
        &fine,
        &|e| {
            Ok((logneg_pure(&sigma_lmax_coeffs(e)?) - e)
                .abs()
                .max((logneg_pure(&rho_max_coeffs(e)?) - e).abs()))
        },
    )?;
    single("ergotropy of rho_max equals g", 1e-10, &coarse, &|e| {
        Ok((ergotropy_value(&density_from_coeffs(&rho_max_coeffs(e)?), &hf)? - g(e, h)?).abs())
    })?;
    single(
        "local ergotropy of rho_max equals lbar",
        1e-9,
        &coarse,
        &|e| {
            Ok(
                (local_ergotropy_value(&density_from_coeffs(&rho_max_coeffs(e)?), &hl)?
                    - lbar(e, h)?)
                .abs(),
            )
        },
    )?;
    single("ergotropy of sigma_lmax equals g_p", 1e-10, &coarse, &|e| {
        Ok(
            (ergotropy_value(&density_from_coeffs(&sigma_lmax_coeffs(e)?), &hf)? - g_p(e, h)?)
                .abs(),
        )
    })?;
    let step = fine[1] - fine[0];
    single("g_p strictly increasing", 0.0, &fine[1..], &|e| {
        Ok(if g_p(e, h)? > g_p(e - step, h)? {
            0.0
        } else {
            1.0
        })
    })?;
    single("g strictly decreasing", 0.0, &fine[1..], &|e| {
        Ok(if g(e, h)? < g(e - step, h)? { 0.0 } else { 1.0 })
    })?;
    Ok(out)
}

fn prop4_suite(opts: &VerifyOptions) -> Result<Vec<CheckOutcome>> {
    let cfg = OptimizerConfig {
        seed: opts.seed,
        ..opts.optimizer.clone()
    };
    let grid = uniform_grid(0.0, 1.0, 11);
    let report = verify_proposition4(&grid, &opts.hamiltonian, &cfg)?;
    let mut local = Tally::new(Suite::Prop4, "optimized local work equals lbar", PROP4_TOL);
    let mut global = Tally::new(
        Suite::Prop4,
        "local-work maximizer has global work g",
        PROP4_TOL,
    );
    let record = TrialRecord {
        observations: vec![],
        state: None,
        hamiltonian: Some(opts.hamiltonian.into()),
    };
    for (i, row) in report.rows.iter().enumerate() {
        let e = row.entanglement;
        local.record(
            opts.seed,
            i,
            &Observation::new(
                (row.local_work - row.lbar).abs(),
                format!("E = {e}: {} vs {}", row.local_work, row.lbar),
            ),
            &record,
        );
        global.record(
            opts.seed,
            i,
            &Observation::new(
                (row.maximizer_global_work - row.g).abs(),
                format!("E = {e}: {} vs {}", row.maximizer_global_work, row.g),
            ),
            &record,
        );
    }
    Ok(vec![local.finish(), global.finish()])
}

fn oracle_suite(trials: usize, opts: &VerifyOptions) -> Result<Vec<CheckOutcome>> {
    let hl = opts.hamiltonian.local();
    let checks = [
        ("oracle never exceeds the analytic local ergotropy", 1e-9),
        (
            "oracle within 0.01 eps below the analytic value",
            ORACLE_GAP_TOL,
        ),
    ];
    run_trials(Suite::Oracle, &checks, trials, opts.seed, |rng| {
        let rho = random_pure_state(2, 2, rng);
        let exact = local_ergotropy_value(&rho, &hl)?;
        let oracle = local_ergotropy_oracle(&rho, &hl, ORACLE_GRID, rng, 0)?;
        let detail = format!("analytic {exact}, oracle {oracle}");
        Ok(TrialRecord {
            observations: vec![
                Observation::new((oracle - exact).max(0.0), detail.clone()),
                Observation::new((exact - oracle).max(0.0), detail),
            ],
            state: Some(rho),
            hamiltonian: Some(opts.hamiltonian.into()),
        })
    })
}
