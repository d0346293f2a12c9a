//! Entanglement-constrained work maximization over two-qubit states.
//!
//! Each restart runs a derivative-free Nelder–Mead search over a real
//! parametrization of pure (8 reals) or mixed (16 reals) states. The objective
//! is the work value minus quadratic penalties on the log-negativity residual
//! and, when required, on the local ergotropy of the state.
//!
//! With [`OptimizerConfig::feasibility_projection`] enabled (the default) each
//! decoded state is first mapped onto the constraint set: pure states get
//! their Schmidt coefficients replaced, mixed states take Newton steps along
//! the log-negativity gradient in parameter space (falling back to mixing with
//! `I/4` or `|Φ+⟩` where that is unavailable), and the locally passive
//! constraint is met by the local-unitary map to σ^l. Both maps fix feasible
//! states, so the search space is unchanged while the penalties only see
//! round-off. Feasibility is verified again on every returned state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::battery::{LocalHamiltonian, TwoQubitZZ};
use crate::error::{BatteryError, Result};
use crate::passivity::{ergotropy_value, local_ergotropy_value, locally_passive_state};
use crate::qmat::{
    eigenvalues_hermitian, partial_transpose, ComplexMatrix, DensityOperator, HermitianOperator,
    Subsystem, C64,
};
use crate::twoqubit::{analytic_value, g, lbar, logneg_general, radical, CurveId, WorkCurvePoint};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateKind {
    Pure,
    Mixed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkKind {
    /// Ergotropy under arbitrary unitaries.
    Global,
    /// Sum of subsystem ergotropies.
    Local,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    LocallyPassive,
    None,
}

/// Real coordinates of a two-qubit state.
#[derive(Clone, Debug, PartialEq)]
pub struct StateParametrization {
    pub kind: StateKind,
    pub params: Vec<f64>,
}

impl StateParametrization {
    pub fn dimension(kind: StateKind) -> usize {
        match kind {
            StateKind::Pure => 8,
            StateKind::Mixed => 16,
        }
    }

    pub fn new(kind: StateKind, params: Vec<f64>) -> Result<Self> {
        let expected = Self::dimension(kind);
        if params.len() != expected {
            return Err(BatteryError::DimensionMismatch {
                expected: format!("{expected} parameters"),
                found: format!("{}", params.len()),
            });
        }
        Ok(Self { kind, params })
    }

    /// Standard normal coordinates: Haar-distributed pure states, and the
    /// Hilbert–Schmidt ensemble for mixed states.
    pub fn random<R: rand::Rng + ?Sized>(kind: StateKind, rng: &mut R) -> Self {
        let params = (0..Self::dimension(kind))
            .map(|_| StandardNormal.sample(rng))
            .collect();
        Self { kind, params }
    }

    pub fn decode(&self) -> DensityOperator {
        decode(self.kind, &self.params)
    }
}

fn decode(kind: StateKind, p: &[f64]) -> DensityOperator {
    match kind {
        StateKind::Pure => {
            let amps = decode_pure(p);
            DensityOperator::from_trusted(2, 2, ComplexMatrix::projector(&amps))
        }
        StateKind::Mixed => DensityOperator::from_trusted(2, 2, decode_mixed(p)),
    }
}

/// `(re, im)` pairs → normalized amplitudes; the zero vector decodes to |00⟩.
fn decode_pure(p: &[f64]) -> [C64; 4] {
    let amps = [0, 1, 2, 3].map(|k| C64::new(p[2 * k], p[2 * k + 1]));
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if norm > 0.0 && norm.is_finite() {
        amps.map(|a| a / norm)
    } else {
        [
            C64::new(1.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
        ]
    }
}

/// Lower-triangular factor T: real diagonal `p[0..4]`, then the six
/// strictly-lower entries as `(re, im)` pairs in row order.
fn triangular_factor(p: &[f64]) -> ComplexMatrix {
    let mut t = ComplexMatrix::zeros(4, 4);
    for k in 0..4 {
        t[(k, k)] = C64::new(p[k], 0.0);
    }
    for (idx, (i, j)) in LOWER_ENTRIES.iter().enumerate() {
        t[(*i, *j)] = C64::new(p[4 + 2 * idx], p[5 + 2 * idx]);
    }
    t
}

const LOWER_ENTRIES: [(usize, usize); 6] = [(1, 0), (2, 0), (2, 1), (3, 0), (3, 1), (3, 2)];

/// `T T† / Tr(T T†)`, see [`triangular_factor`]; T = 0 decodes to `I/4`.
fn decode_mixed(p: &[f64]) -> ComplexMatrix {
    let t = triangular_factor(p);
    let w = &t * &t.adjoint();
    let tr = w.trace().re;
    if !(tr > 0.0 && tr.is_finite()) {
        return ComplexMatrix::identity(4).scale_real(0.25);
    }
    let mut m = w.scale_real(1.0 / tr);
    for i in 0..4 {
        m[(i, i)] = C64::new(m[(i, i)].re, 0.0);
        for j in (i + 1)..4 {
            m[(j, i)] = m[(i, j)].conj();
        }
    }
    m
}

/// Log-negativity of the decoded mixed state and its gradient with respect
/// to the 16 parameters, valid where the partial transpose has a simple
/// negative eigenvalue λ (always the case for entangled two-qubit states).
///
/// With `L = log2(1 − 2λ)` and `v` the eigenvector, `∂λ = tr(∂ρ Q)` where
/// `Q = (v v†)^{T_B}`, and `∂ρ = (∂(T T†) − ρ ∂τ)/τ` for `τ = Tr(T T†)`.
fn logneg_with_gradient(p: &[f64]) -> Option<(f64, Vec<f64>)> {
    let t = triangular_factor(p);
    let w = &t * &t.adjoint();
    let tau = w.trace().re;
    if !(tau > 0.0 && tau.is_finite()) {
        return None;
    }
    let rho = w.scale_real(1.0 / tau);
    let pt = crate::qmat::partial_transpose_matrix(&rho, 2, 2, Subsystem::B).ok()?;
    let spectrum = crate::qmat::eigh(&pt, crate::qmat::EigenOrder::Ascending).ok()?;
    let lambda = spectrum.values[0];
    if lambda >= -1e-12 || spectrum.values[1] < 1e-12 {
        return None;
    }
    let v = spectrum.vector(0);
    let q =
        crate::qmat::partial_transpose_matrix(&ComplexMatrix::projector(&v), 2, 2, Subsystem::B)
            .ok()?;
    let rho_q = rho.trace_product_re(&q);
    let m = &t.adjoint() * &q;
    let scale = -2.0 / ((1.0 - 2.0 * lambda) * std::f64::consts::LN_2) / tau;
    // d tr(T T† Q) / dT_ij = 2 (T† Q)_ji in the real and imaginary directions.
    let grad_entry = |i: usize, j: usize, imaginary: bool| {
        let mji = m[(j, i)];
        let tij = t[(i, j)];
        let (d_w, d_tau) = if imaginary {
            (-2.0 * mji.im, 2.0 * tij.im)
        } else {
            (2.0 * mji.re, 2.0 * tij.re)
        };
        scale * (d_w - rho_q * d_tau)
    };
    let mut grad = vec![0.0; 16];
    for (k, slot) in grad.iter_mut().take(4).enumerate() {
        *slot = grad_entry(k, k, false);
    }
    for (idx, &(i, j)) in LOWER_ENTRIES.iter().enumerate() {
        grad[4 + 2 * idx] = grad_entry(i, j, false);
        grad[5 + 2 * idx] = grad_entry(i, j, true);
    }
    Some(((1.0 - 2.0 * lambda).log2(), grad))
}

/// Newton steps along the log-negativity gradient onto `L = e`. Smooth in
/// `p` wherever it succeeds, unlike mixing toward a fixed anchor.
fn newton_to_level(p: &[f64], e: f64) -> Option<Vec<f64>> {
    let mut x = p.to_vec();
    for _ in 0..NEWTON_MAX_STEPS {
        let (l, grad) = logneg_with_gradient(&x)?;
        let r = l - e;
        if r.abs() <= NEWTON_TOL {
            return Some(x);
        }
        let g2: f64 = grad.iter().map(|g| g * g).sum();
        if !(g2 > 0.0 && g2.is_finite()) {
            return None;
        }
        for (xi, gi) in x.iter_mut().zip(&grad) {
            *xi -= r * gi / g2;
        }
    }
    None
}

const NEWTON_MAX_STEPS: usize = 30;
const NEWTON_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub restarts: usize,
    /// Nelder–Mead iterations per restart.
    pub max_iters: usize,
    /// Relative spread of objective values at which a simplex has converged;
    /// its square root bounds the simplex diameter.
    pub simplex_tol: f64,
    /// Defaults to `10³ (ε_A + ε_B)` when unset.
    pub penalty_weight: Option<f64>,
    /// Largest accepted `|logneg − E|`, in ebits.
    pub entanglement_tol: f64,
    pub seed: u64,
    pub feasibility_projection: bool,
    /// Also run twice the restarts and record how far the best value moves.
    pub doubling_check: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            restarts: 64,
            max_iters: 2000,
            simplex_tol: 1e-9,
            penalty_weight: None,
            entanglement_tol: 1e-4,
            seed: 0,
            feasibility_projection: true,
            doubling_check: true,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(BatteryError::OutOfRange {
                    name,
                    value: v,
                    min: f64::MIN_POSITIVE,
                    max: f64::INFINITY,
                })
            }
        };
        positive("restarts", self.restarts as f64)?;
        positive("max_iters", self.max_iters as f64)?;
        positive("simplex_tol", self.simplex_tol)?;
        positive("entanglement_tol", self.entanglement_tol)?;
        if let Some(w) = self.penalty_weight {
            positive("penalty_weight", w)?;
        }
        Ok(())
    }

    pub fn penalty_weight_for(&self, h: &TwoQubitZZ) -> f64 {
        self.penalty_weight.unwrap_or(1e3 * h.sum())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NelderMeadOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimizes `f` from an axis-aligned initial simplex of edge `step` around
/// `x0`, with dimension-adaptive coefficients. NaN values count as +∞.
///
/// Stops after `max_iters` iterations, or once the spread of simplex values is
/// at most `tol·(1 + |f_best|)` and every vertex lies within `√tol` of the best
/// one in the max norm.
pub fn nelder_mead<F>(f: F, x0: &[f64], step: f64, max_iters: usize, tol: f64) -> NelderMeadOutcome
where
    F: FnMut(&[f64]) -> f64,
{
    let mut vertices = vec![x0.to_vec()];
    for i in 0..x0.len() {
        let mut x = x0.to_vec();
        x[i] += step;
        vertices.push(x);
    }
    nelder_mead_from(f, vertices, max_iters, tol)
}

/// [`nelder_mead`] from an explicit initial simplex of `n + 1` vertices.
pub fn nelder_mead_from<F>(
    mut f: F,
    vertices: Vec<Vec<f64>>,
    max_iters: usize,
    tol: f64,
) -> NelderMeadOutcome
where
    F: FnMut(&[f64]) -> f64,
{
    let n = vertices.len() - 1;
    let nf = n.max(2) as f64;
    let (alpha, gamma, rho, sigma) = (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf);
    let xtol = tol.sqrt();
    let mut eval = |x: &[f64]| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = vertices
        .into_iter()
        .map(|x| {
            let v = eval(&x);
            (x, v)
        })
        .collect();

    let along = |c: &[f64], x: &[f64], t: f64| -> Vec<f64> {
        c.iter().zip(x).map(|(ci, xi)| ci + t * (xi - ci)).collect()
    };

    let mut iterations = 0;
    let mut converged = false;
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let spread = simplex[n].1 - best;
        let diameter = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if spread <= tol * (1.0 + best.abs()) && diameter <= xtol {
            converged = true;
            break;
        }
        if iterations >= max_iters {
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / n as f64;
            }
        }
        let worst = simplex[n].0.clone();
        let f_worst = simplex[n].1;
        let f_second = simplex[n - 1].1;

        let xr = along(&centroid, &worst, -alpha);
        let fr = eval(&xr);
        if fr < best {
            let xe = along(&centroid, &worst, -alpha * gamma);
            let fe = eval(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < f_second {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, fc, accept) = if fr < f_worst {
            let xc = along(&centroid, &worst, -alpha * rho);
            let fc = eval(&xc);
            (xc, fc, fc <= fr)
        } else {
            let xc = along(&centroid, &worst, rho);
            let fc = eval(&xc);
            (xc, fc, fc < f_worst)
        };
        if accept {
            simplex[n] = (xc, fc);
            continue;
        }
        let x_best = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let x = along(&x_best, &vertex.0, sigma);
            let v = eval(&x);
            *vertex = (x, v);
        }
    }
    let (x, value) = simplex.swap_remove(0);
    NelderMeadOutcome {
        x,
        value,
        iterations,
        converged,
    }
}

/// Bisection on `t` with regula-falsi steps (Illinois variant) for the root of
/// `f(t)` on `[0, 1]`, given `f(0) < 0 ≤ f(1)`. Returns the end of the final
/// bracket with the smaller `|f|`.
fn illinois(mut f: impl FnMut(f64) -> f64, f0: f64, f1: f64) -> f64 {
    let (mut a, mut b, mut fa, mut fb): (f64, f64, f64, f64) = (0.0, 1.0, f0, f1);
    let mut side = 0i8;
    for _ in 0..100 {
        if fb.abs() <= 1e-13 || (b - a).abs() <= 1e-15 {
            break;
        }
        let mut t = (a * fb - b * fa) / (fb - fa);
        if !(t > a.min(b) && t < a.max(b)) {
            t = 0.5 * (a + b);
        }
        let ft = f(t);
        if ft >= 0.0 {
            // New point joins b's side; a is retained.
            b = t;
            fb = ft;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        } else {
            a = t;
            fa = ft;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        }
    }
    if fa.abs() < fb.abs() {
        a
    } else {
        b
    }
}

fn bell_state() -> DensityOperator {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let z = C64::new(0.0, 0.0);
    let v = [C64::new(r, 0.0), z, z, C64::new(r, 0.0)];
    DensityOperator::from_trusted(2, 2, ComplexMatrix::projector(&v))
}

/// Keeps the Schmidt vectors of `amps` and sets the Schmidt coefficients to
/// the pair with log-negativity `e`.
fn schmidt_project(amps: [C64; 4], e: f64) -> [C64; 4] {
    let m = ComplexMatrix::from_vec(2, 2, amps.to_vec()).expect("2x2");
    let mm = &m * &m.adjoint();
    let spectrum =
        crate::qmat::eigh(&mm, crate::qmat::EigenOrder::Descending).expect("M M† is Hermitian");
    let u0 = spectrum.vector(0);
    let u1 = spectrum.vector(1);
    let row = |u: &[C64]| -> [C64; 2] {
        [0, 1].map(|j| u[0].conj() * m[(0, j)] + u[1].conj() * m[(1, j)])
    };
    // v1 is the exact orthogonal complement of v0 carrying the phase of the
    // data; dividing by a tiny computed s1 would lose normalization.
    let w0 = row(&u0);
    let n0 = w0.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    let v0 = w0.map(|x| x / n0);
    let comp = [-v0[1].conj(), v0[0].conj()];
    let w1 = row(&u1);
    let overlap = comp[0].conj() * w1[0] + comp[1].conj() * w1[1];
    let phase = if overlap.norm() > 0.0 {
        overlap / overlap.norm()
    } else {
        C64::new(1.0, 0.0)
    };
    let v1 = comp.map(|x| x * phase);
    let r = radical(e);
    let t0 = (0.5 * (1.0 + r)).sqrt();
    let t1 = (0.5 * (1.0 - r)).max(0.0).sqrt();
    let mut out = [C64::new(0.0, 0.0); 4];
    for i in 0..2 {
        for j in 0..2 {
            out[2 * i + j] = u0[i] * v0[j] * t0 + u1[i] * v1[j] * t1;
        }
    }
    let norm = out.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    out.map(|a| a / norm)
}

#[derive(Clone)]
struct Problem {
    e: f64,
    kind: StateKind,
    work: WorkKind,
    constraint: Constraint,
    penalty: f64,
    /// Map every trial state onto the constraint set (pure states).
    project_in_loop: bool,
    /// Restore exact feasibility of the returned state.
    project_final: bool,
    hl: LocalHamiltonian,
    hf: HermitianOperator,
    h_norm: f64,
    bell: DensityOperator,
    mixed: DensityOperator,
}

struct Candidate {
    work: f64,
    state: DensityOperator,
    residual: f64,
    lp_residual: f64,
}

impl Problem {
    fn new(
        e: f64,
        h: &TwoQubitZZ,
        kind: StateKind,
        work: WorkKind,
        constraint: Constraint,
        cfg: &OptimizerConfig,
    ) -> Self {
        let hl = h.local();
        let hf = hl.full_hamiltonian();
        let h_norm = hf.norm_max();
        Self {
            e,
            kind,
            work,
            constraint,
            penalty: cfg.penalty_weight_for(h),
            project_in_loop: cfg.feasibility_projection,
            project_final: cfg.feasibility_projection,
            hl,
            hf,
            h_norm,
            bell: bell_state(),
            mixed: DensityOperator::maximally_mixed(2, 2),
        }
    }

    /// Decoded state, optionally mapped onto the entanglement level set.
    fn state(&self, x: &[f64], project: bool) -> DensityOperator {
        if !project {
            return decode(self.kind, x);
        }
        match self.kind {
            StateKind::Pure => {
                let amps = schmidt_project(decode_pure(x), self.e);
                DensityOperator::from_trusted(2, 2, ComplexMatrix::projector(&amps))
            }
            StateKind::Mixed => {
                // The level sets at 0 and 1 are not smooth manifolds.
                if self.e > 0.0 && self.e < 1.0 {
                    if let Some(y) = newton_to_level(x, self.e) {
                        return DensityOperator::from_trusted(2, 2, decode_mixed(&y));
                    }
                }
                self.mix_to_target(DensityOperator::from_trusted(2, 2, decode_mixed(x)))
            }
        }
    }

    /// Mixes with `I/4` (log-negativity 0) when above the target and with
    /// `|Φ+⟩` (log-negativity 1) when below it, using the smallest weight that
    /// reaches the target.
    fn mix_to_target(&self, rho: DensityOperator) -> DensityOperator {
        let pt = partial_transpose(&rho, Subsystem::B);
        let lambdas = eigenvalues_hermitian(&pt);
        let l0 = logneg_from_pt_spectrum(&lambdas);
        if l0 == self.e {
            return rho;
        }
        if l0 > self.e {
            let t = white_noise_weight(&lambdas, self.e);
            return rho.mix(&self.mixed, t);
        }
        let f = |t: f64| logneg_general(&rho.mix(&self.bell, t)) - self.e;
        let t = illinois(f, l0 - self.e, 1.0 - self.e);
        rho.mix(&self.bell, t)
    }

    /// Work value seen by the search. For the locally passive constraint this
    /// is the global ergotropy of σ^l, which equals `W(ρ) − W_loc(ρ)` because
    /// σ^l has the spectrum of ρ and the energy of ρ minus its local ergotropy.
    fn work_value(&self, rho: &DensityOperator) -> f64 {
        let global = || ergotropy_value(rho, &self.hf).expect("two-qubit state");
        let local = || local_ergotropy_value(rho, &self.hl).expect("two-qubit state");
        match (self.work, self.constraint, self.project_in_loop) {
            (WorkKind::Global, Constraint::LocallyPassive, true) => global() - local(),
            (WorkKind::Local, Constraint::LocallyPassive, true) => 0.0,
            (WorkKind::Global, _, _) => global(),
            (WorkKind::Local, _, _) => local(),
        }
    }

    fn objective(&self, x: &[f64]) -> f64 {
        let rho = self.state(x, self.project_in_loop);
        let residual = logneg_general(&rho) - self.e;
        let mut value = self.work_value(&rho) - self.penalty * residual * residual;
        if self.constraint == Constraint::LocallyPassive && !self.project_in_loop {
            let lp = local_ergotropy_value(&rho, &self.hl).expect("two-qubit state") / self.h_norm;
            value -= self.penalty * lp * lp;
        }
        value
    }

    fn finalize(&self, x: &[f64]) -> Candidate {
        let mut state = self.state(x, self.project_final);
        if self.constraint == Constraint::LocallyPassive && self.project_final {
            state = locally_passive_state(&state, &self.hl)
                .expect("two-qubit state")
                .final_state;
        }
        let work = match self.work {
            WorkKind::Global => ergotropy_value(&state, &self.hf),
            WorkKind::Local => local_ergotropy_value(&state, &self.hl),
        }
        .expect("two-qubit state");
        let lp_residual = match self.constraint {
            Constraint::LocallyPassive => {
                local_ergotropy_value(&state, &self.hl).expect("two-qubit state") / self.h_norm
            }
            Constraint::None => 0.0,
        };
        Candidate {
            work,
            residual: (logneg_general(&state) - self.e).abs(),
            lp_residual,
            state,
        }
    }
}

fn logneg_from_pt_spectrum(lambdas: &[f64]) -> f64 {
    let n = negativity_after_noise(lambdas, 0.0);
    if n == 0.0 {
        0.0
    } else {
        (1.0 + 2.0 * n).log2()
    }
}

/// Negativity of `(1 − t)ρ + t I/4`: the partial transpose of `I/4` is `I/4`,
/// so every eigenvalue moves linearly, `λ ↦ λ + t(1/4 − λ)`.
fn negativity_after_noise(lambdas: &[f64], t: f64) -> f64 {
    lambdas
        .iter()
        .map(|&l| l + t * (0.25 - l))
        .filter(|&m| m < 0.0)
        .map(|m| -m)
        .sum()
}

/// Smallest `t` with `logneg((1 − t)ρ + t I/4) ≤ e`. The negativity is
/// non-increasing and piecewise linear in `t`, so plain bisection converges
/// to the first crossing, including the plateau at `e = 0`.
fn white_noise_weight(lambdas: &[f64], e: f64) -> f64 {
    let target = 0.5 * (2f64.powf(e) - 1.0);
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if negativity_after_noise(lambdas, mid) <= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    // Prefer the end closer to the target; at e = 0 only `hi` is separable.
    let n_lo = negativity_after_noise(lambdas, lo);
    if e > 0.0 && (n_lo - target).abs() < (negativity_after_noise(lambdas, hi) - target).abs() {
        lo
    } else {
        hi
    }
}

const INITIAL_STEP: f64 = 0.5;
const POLISH_STEP: f64 = 0.05;

struct RestartOutcome {
    x: Vec<f64>,
    objective: f64,
    candidate: Candidate,
    iterations: usize,
}

const REFINE_STEPS: [f64; 3] = [0.05, 0.01, 0.002];
/// Re-runs the search around a winning restart with shrinking, randomly
/// oriented simplices, each with a fresh `max_iters` budget. The refined point
/// is kept only if it improves the objective and is still feasible.
fn refine(
    problem: &Problem,
    cfg: &OptimizerConfig,
    start: &RestartOutcome,
    rng: &mut ChaCha8Rng,
) -> RestartOutcome {
    let f = |x: &[f64]| -problem.objective(x);
    let mut x = start.x.clone();
    let mut value = -start.objective;
    let mut iterations = start.iterations;
    for step in REFINE_STEPS {
        let out = nelder_mead_from(
            &f,
            rotated_simplex(&x, step, rng),
            cfg.max_iters,
            cfg.simplex_tol,
        );
        iterations += out.iterations;
        if out.value < value {
            x = out.x;
            value = out.value;
        }
    }
    let candidate = problem.finalize(&x);
    let tol = cfg.entanglement_tol;
    if value < -start.objective && candidate.residual <= tol && candidate.lp_residual <= tol {
        RestartOutcome {
            x,
            objective: -value,
            candidate,
            iterations,
        }
    } else {
        RestartOutcome {
            x: start.x.clone(),
            objective: start.objective,
            candidate: problem.finalize(&start.x),
            iterations,
        }
    }
}

/// Simplex `x0, x0 + step·q_1, …, x0 + step·q_n` along the columns of a
/// random orthogonal matrix, so re-seeds do not keep the axis orientation.
fn rotated_simplex<R: rand::Rng + ?Sized>(x0: &[f64], step: f64, rng: &mut R) -> Vec<Vec<f64>> {
    let n = x0.len();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
    while basis.len() < n {
        let mut v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        for q in &basis {
            let d: f64 = q.iter().zip(&v).map(|(a, b)| a * b).sum();
            for (vi, qi) in v.iter_mut().zip(q) {
                *vi -= d * qi;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            basis.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    let mut vertices = vec![x0.to_vec()];
    for q in basis {
        vertices.push(x0.iter().zip(&q).map(|(a, b)| a + step * b).collect());
    }
    vertices
}

/// Nelder–Mead from `x0`, then re-seeded around the incumbent while the
/// budget lasts and the re-seeds keep improving; this escapes the collapsed
/// simplices Nelder–Mead is prone to in 16 dimensions.
fn search<F: Fn(&[f64]) -> f64 + Copy>(
    f: F,
    x0: &[f64],
    step: f64,
    budget: usize,
    tol: f64,
) -> (NelderMeadOutcome, usize) {
    let mut out = nelder_mead(f, x0, step, budget, tol);
    let mut iterations = out.iterations;
    while iterations < budget {
        let next = nelder_mead(f, &out.x, POLISH_STEP, budget - iterations, tol);
        iterations += next.iterations.max(1);
        let improved = next.value < out.value - tol * (1.0 + out.value.abs());
        if next.value < out.value {
            out = next;
        }
        if !improved {
            break;
        }
    }
    (out, iterations)
}

/// Triangular-factor coordinates of a pure state: its amplitudes, rephased so
/// the first is real, fill the first column.
fn embed_pure(amps: [C64; 4]) -> Vec<f64> {
    let phase = if amps[0].norm() > 0.0 {
        amps[0].conj() / amps[0].norm()
    } else {
        C64::new(1.0, 0.0)
    };
    let c = amps.map(|a| a * phase);
    let mut x = vec![0.0; 16];
    x[0] = c[0].re;
    // Column 0 below the diagonal: entries (1,0), (2,0), (3,0) in row order.
    for (k, idx) in [(1, 4), (2, 6), (3, 10)] {
        x[idx] = c[k].re;
        x[idx + 1] = c[k].im;
    }
    x
}

fn run_restart(
    problem: &Problem,
    cfg: &OptimizerConfig,
    point_index: usize,
    restart: usize,
) -> RestartOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ point_index as u64);
    rng.set_stream(restart as u64);

    // Odd mixed restarts first solve the pure-state problem, which is smooth
    // under the Schmidt projection, and continue from it in the full space.
    // Pure states are part of the mixed search space, so this only adds
    // starting points.
    let pure_seeded = problem.kind == StateKind::Mixed && problem.project_final && restart % 2 == 1;
    let mut iterations = 0;
    let (mut x, step) = if pure_seeded {
        let pure = Problem {
            kind: StateKind::Pure,
            ..problem.clone()
        };
        let g = |x: &[f64]| -pure.objective(x);
        let x0 = StateParametrization::random(StateKind::Pure, &mut rng).params;
        let (out, used) = search(g, &x0, INITIAL_STEP, cfg.max_iters / 2, cfg.simplex_tol);
        iterations += used;
        (
            embed_pure(schmidt_project(decode_pure(&out.x), problem.e)),
            POLISH_STEP,
        )
    } else {
        (
            StateParametrization::random(problem.kind, &mut rng).params,
            INITIAL_STEP,
        )
    };

    let f = |x: &[f64]| -problem.objective(x);
    let (out, used) = search(f, &x, step, cfg.max_iters - iterations, cfg.simplex_tol);
    iterations += used;
    x = out.x;
    let value = out.value;
    RestartOutcome {
        objective: -value,
        candidate: problem.finalize(&x),
        x,
        iterations,
    }
}

/// Per-point record of how a numeric value was obtained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointDiagnostics {
    pub feasible: bool,
    /// Index of the winning restart (of the best-residual one if infeasible).
    pub best_restart: usize,
    /// `|logneg − E|` of the reported state.
    pub residual: f64,
    /// Local ergotropy of the reported state over ‖H‖ (locally passive runs).
    pub lp_residual: f64,
    pub iterations: usize,
    pub feasible_restarts: usize,
    /// `|best of 2R − best of R|`, when the doubling check ran.
    pub restart_delta: Option<f64>,
}

impl PointDiagnostics {
    fn exact() -> Self {
        Self {
            feasible: true,
            best_restart: 0,
            residual: 0.0,
            lp_residual: 0.0,
            iterations: 0,
            feasible_restarts: 0,
            restart_delta: None,
        }
    }
}

/// Result of [`maximize_work`].
#[derive(Clone, Debug)]
pub struct Maximum {
    pub work: f64,
    pub state: DensityOperator,
    pub diagnostics: PointDiagnostics,
}

fn check_target(e: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&e) {
        return Err(BatteryError::OutOfRange {
            name: "E",
            value: e,
            min: 0.0,
            max: 1.0,
        });
    }
    Ok(())
}

/// Best feasible restart among `outcomes`, ranked by penalized objective with
/// ties going to the lower index.
fn best_feasible(outcomes: &[RestartOutcome], tol: f64) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, o) in outcomes.iter().enumerate() {
        let c = &o.candidate;
        if c.residual > tol || c.lp_residual > tol || !c.work.is_finite() {
            continue;
        }
        if best.is_none_or(|b| o.objective > outcomes[b].objective) {
            best = Some(i);
        }
    }
    best
}

fn maximize_at(
    e: f64,
    h: &TwoQubitZZ,
    kind: StateKind,
    work: WorkKind,
    constraint: Constraint,
    cfg: &OptimizerConfig,
    point_index: usize,
) -> Result<Maximum> {
    check_target(e)?;
    cfg.validate()?;
    let problem = Problem::new(e, h, kind, work, constraint, cfg);
    let total = if cfg.doubling_check {
        2 * cfg.restarts
    } else {
        cfg.restarts
    };
    let outcomes: Vec<RestartOutcome> = (0..total)
        .into_par_iter()
        .map(|r| run_restart(&problem, cfg, point_index, r))
        .collect();
    let (primary, _) = outcomes.split_at(cfg.restarts);
    let tol = cfg.entanglement_tol;

    let Some(best) = best_feasible(primary, tol) else {
        let best_residual = primary
            .iter()
            .map(|o| o.candidate.residual.max(o.candidate.lp_residual))
            .fold(f64::INFINITY, f64::min);
        return Err(BatteryError::Infeasible {
            target: e,
            tol,
            best_residual,
        });
    };
    let refine_rng = |r: usize| {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ point_index as u64);
        rng.set_stream((total + r) as u64);
        rng
    };
    let winner = refine(&problem, cfg, &primary[best], &mut refine_rng(best));
    let restart_delta = if cfg.doubling_check {
        best_feasible(&outcomes, tol).map(|b| {
            let doubled = if b == best {
                winner.candidate.work
            } else {
                refine(&problem, cfg, &outcomes[b], &mut refine_rng(b))
                    .candidate
                    .work
            };
            (doubled - winner.candidate.work).abs()
        })
    } else {
        None
    };
    let feasible_restarts = primary
        .iter()
        .filter(|o| o.candidate.residual <= tol && o.candidate.lp_residual <= tol)
        .count();
    Ok(Maximum {
        work: winner.candidate.work,
        state: winner.candidate.state,
        diagnostics: PointDiagnostics {
            feasible: true,
            best_restart: best,
            residual: winner.candidate.residual,
            lp_residual: winner.candidate.lp_residual,
            iterations: winner.iterations,
            feasible_restarts,
            restart_delta,
        },
    })
}

/// Maximum work over `kind` states with log-negativity `e`, optionally
/// restricted to locally passive states.
///
/// Returns [`BatteryError::Infeasible`] when no restart ends within
/// `entanglement_tol` of the target.
pub fn maximize_work(
    e: f64,
    h: &TwoQubitZZ,
    kind: StateKind,
    work: WorkKind,
    constraint: Constraint,
    cfg: &OptimizerConfig,
) -> Result<Maximum> {
    maximize_at(e, h, kind, work, constraint, cfg, 0)
}

/// The penalized objective maximized by [`maximize_work`], at raw
/// parameters `x` (see [`StateParametrization`]).
pub fn penalized_objective(
    e: f64,
    h: &TwoQubitZZ,
    kind: StateKind,
    work: WorkKind,
    constraint: Constraint,
    cfg: &OptimizerConfig,
    x: &[f64],
) -> Result<f64> {
    check_target(e)?;
    let expected = StateParametrization::dimension(kind);
    if x.len() != expected {
        return Err(BatteryError::DimensionMismatch {
            expected: format!("{expected} parameters"),
            found: format!("{}", x.len()),
        });
    }
    Ok(Problem::new(e, h, kind, work, constraint, cfg).objective(x))
}

/// Optimization problem behind a numeric curve.
pub fn curve_problem(curve: CurveId) -> Option<(StateKind, WorkKind, Constraint)> {
    match curve {
        CurveId::GpMixed => Some((
            StateKind::Mixed,
            WorkKind::Global,
            Constraint::LocallyPassive,
        )),
        CurveId::GMixed => Some((StateKind::Mixed, WorkKind::Global, Constraint::None)),
        CurveId::LPure => Some((StateKind::Pure, WorkKind::Local, Constraint::None)),
        _ => None,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub curve: CurveId,
    /// One point per grid entry, in grid order; infeasible points carry NaN.
    pub points: Vec<WorkCurvePoint>,
    pub diagnostics: Vec<PointDiagnostics>,
}

impl SweepResult {
    pub fn all_feasible(&self) -> bool {
        self.diagnostics.iter().all(|d| d.feasible)
    }

    /// Largest recorded doubling-restart movement.
    pub fn max_restart_delta(&self) -> Option<f64> {
        self.diagnostics
            .iter()
            .filter_map(|d| d.restart_delta)
            .reduce(f64::max)
    }
}

/// Evaluates a curve on a grid: closed forms for the analytic curves, one
/// [`maximize_work`] per point for the numeric ones. Point `i` seeds its
/// restarts from `cfg.seed ^ i`, so results do not depend on scheduling.
pub fn sweep(
    curve: CurveId,
    grid: &[f64],
    h: &TwoQubitZZ,
    cfg: &OptimizerConfig,
) -> Result<SweepResult> {
    for &e in grid {
        check_target(e)?;
    }
    let Some((kind, work, constraint)) = curve_problem(curve) else {
        let points = grid
            .iter()
            .map(|&e| {
                Ok(WorkCurvePoint {
                    entanglement: e,
                    value: analytic_value(curve, e, h)?,
                    curve,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let diagnostics = vec![PointDiagnostics::exact(); grid.len()];
        return Ok(SweepResult {
            curve,
            points,
            diagnostics,
        });
    };
    cfg.validate()?;
    let results: Vec<Result<Maximum>> = grid
        .par_iter()
        .enumerate()
        .map(|(i, &e)| maximize_at(e, h, kind, work, constraint, cfg, i))
        .collect();
    let mut points = Vec::with_capacity(grid.len());
    let mut diagnostics = Vec::with_capacity(grid.len());
    for (&e, r) in grid.iter().zip(results) {
        match r {
            Ok(m) => {
                points.push(WorkCurvePoint {
                    entanglement: e,
                    value: m.work,
                    curve,
                });
                diagnostics.push(m.diagnostics);
            }
            Err(BatteryError::Infeasible { best_residual, .. }) => {
                points.push(WorkCurvePoint {
                    entanglement: e,
                    value: f64::NAN,
                    curve,
                });
                diagnostics.push(PointDiagnostics {
                    feasible: false,
                    residual: best_residual,
                    ..PointDiagnostics::exact()
                });
            }
            Err(other) => return Err(other),
        }
    }
    Ok(SweepResult {
        curve,
        points,
        diagnostics,
    })
}

/// One row of [`verify_proposition4`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prop4Row {
    pub entanglement: f64,
    /// Optimized local work.
    pub local_work: f64,
    pub lbar: f64,
    /// Global ergotropy of the local-work maximizer.
    pub maximizer_global_work: f64,
    pub g: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prop4Report {
    pub rows: Vec<Prop4Row>,
    pub tolerance: f64,
}

impl Prop4Report {
    pub fn pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

pub const PROP4_TOL: f64 = 2e-3;

/// Checks that maximizing local work over pure states at fixed entanglement
/// lands on the state that also maximizes global work: the optimized local
/// work matches [`lbar`] and its maximizer's global ergotropy matches [`g`].
/// Failures are recorded in the report rather than returned as errors.
pub fn verify_proposition4(
    grid: &[f64],
    h: &TwoQubitZZ,
    cfg: &OptimizerConfig,
) -> Result<Prop4Report> {
    for &e in grid {
        check_target(e)?;
    }
    cfg.validate()?;
    let hf = h.local().full_hamiltonian();
    let rows = grid
        .par_iter()
        .enumerate()
        .map(|(i, &e)| {
            let lb = lbar(e, h)?;
            let gv = g(e, h)?;
            let row = match maximize_at(
                e,
                h,
                StateKind::Pure,
                WorkKind::Local,
                Constraint::None,
                cfg,
                i,
            ) {
                Ok(m) => {
                    let global = ergotropy_value(&m.state, &hf)?;
                    Prop4Row {
                        entanglement: e,
                        local_work: m.work,
                        lbar: lb,
                        maximizer_global_work: global,
                        g: gv,
                        pass: (m.work - lb).abs() <= PROP4_TOL && (global - gv).abs() <= PROP4_TOL,
                    }
                }
                Err(BatteryError::Infeasible { .. }) => Prop4Row {
                    entanglement: e,
                    local_work: f64::NAN,
                    lbar: lb,
                    maximizer_global_work: f64::NAN,
                    g: gv,
                    pass: false,
                },
                Err(other) => return Err(other),
            };
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Prop4Report {
        rows,
        tolerance: PROP4_TOL,
    })
}

/// Uniform grid of `steps` points on `[emin, emax]`.
pub fn uniform_grid(emin: f64, emax: f64, steps: usize) -> Vec<f64> {
    if steps == 1 {
        return vec![emin];
    }
    (0..steps)
        .map(|i| {
            if i == steps - 1 {
                emax
            } else {
                emin + (emax - emin) * i as f64 / (steps - 1) as f64
            }
        })
        .collect()
}
