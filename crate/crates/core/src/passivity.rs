//! Passive and locally passive states, global and local ergotropy.
//!
//! A passive state carries the input spectrum, sorted in non-increasing order,
//! on the energy eigenbasis sorted in increasing order. The locally passive
//! state does the same for each reduced state separately, using only a product
//! unitary `U_A ⊗ U_B`, so its work content equals the sum of the two subsystem
//! ergotropies.

use rand::Rng;

use crate::battery::{energy, energy_full, LocalHamiltonian};
use crate::error::{BatteryError, Result};
use crate::qmat::{
    eigh, random_unitary, ComplexMatrix, DensityOperator, EigenOrder, HermitianOperator, Spectrum,
    Subsystem, UnitaryOperator, C64, DEGENERACY_TOL, PSD_TOL,
};

/// Relative tolerance of the passivity predicates, scaled by `‖H‖_max`.
pub const PASSIVITY_TOL: f64 = 1e-9;

/// Entries below this modulus do not take part in phase gauge fixing.
const GAUGE_ENTRY_TOL: f64 = 1e-9;

/// The unitary that realizes an ergotropy value.
#[derive(Clone, Debug)]
pub enum Witness {
    /// Maps the descending eigenbasis of ρ onto the ascending energy basis.
    Global(UnitaryOperator),
    /// Product of subsystem diagonalizers.
    Local {
        u_a: UnitaryOperator,
        u_b: UnitaryOperator,
    },
}

impl Witness {
    pub fn unitary(&self) -> UnitaryOperator {
        match self {
            Witness::Global(u) => u.clone(),
            Witness::Local { u_a, u_b } => u_a.kron(u_b),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ErgotropyResult {
    pub work: f64,
    pub final_state: DensityOperator,
    pub witness: Witness,
}

fn check_dims(rho: &DensityOperator, h: &HermitianOperator) -> Result<()> {
    if rho.dim() != h.dim() {
        return Err(BatteryError::DimensionMismatch {
            expected: format!("{}-dimensional state", h.dim()),
            found: format!("{}-dimensional state", rho.dim()),
        });
    }
    Ok(())
}

fn spectrum_of(m: &ComplexMatrix, order: EigenOrder) -> Spectrum {
    eigh(m, order).expect("density matrices are Hermitian")
}

/// Σ_k p↓_k ε↑_k: the energy left after optimal unitary extraction.
pub fn passive_energy(populations_desc: &[f64], energies_asc: &[f64]) -> f64 {
    populations_desc
        .iter()
        .zip(energies_asc)
        .map(|(p, e)| p * e)
        .sum()
}

pub fn passive_state(rho: &DensityOperator, h: &HermitianOperator) -> Result<DensityOperator> {
    check_dims(rho, h)?;
    let pops = rho.eigenvalues();
    let levels = h.spectrum(EigenOrder::Ascending);
    let n = rho.dim();
    let mut m = ComplexMatrix::zeros(n, n);
    for (k, &p) in pops.iter().enumerate() {
        let v = levels.vector(k);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] += v[i] * v[j].conj() * p;
            }
        }
    }
    Ok(DensityOperator::from_trusted(rho.dim_a(), rho.dim_b(), m))
}

/// Maximum work extractable by any unitary.
pub fn ergotropy(rho: &DensityOperator, h: &HermitianOperator) -> Result<ErgotropyResult> {
    check_dims(rho, h)?;
    let state = rho.spectrum(EigenOrder::Descending);
    let levels = h.spectrum(EigenOrder::Ascending);
    let u = &levels.vectors * &state.vectors.adjoint();
    let final_state = passive_state(rho, h)?;
    let work = energy_full(rho, h)? - passive_energy(&state.values, &levels.values);
    Ok(ErgotropyResult {
        work,
        final_state,
        witness: Witness::Global(UnitaryOperator::from_trusted(u)),
    })
}

/// Scalar ergotropy, without building the passive state.
pub fn ergotropy_value(rho: &DensityOperator, h: &HermitianOperator) -> Result<f64> {
    check_dims(rho, h)?;
    let levels = crate::qmat::eigenvalues_hermitian(h.matrix());
    Ok(energy_full(rho, h)? - passive_energy(&rho.eigenvalues(), &levels))
}

/// Checks `[ρ, H] = 0` and `(α_j − α_k)(ε_j − ε_k) ≤ tol` for every pair of
/// levels. Populations of a degenerate energy level are the eigenvalues of ρ
/// restricted to that level; pairs inside one level are unconstrained.
fn anti_ordered(rho: &ComplexMatrix, h: &HermitianOperator, tol: f64) -> bool {
    if rho.commutator(h.matrix()).max_abs() > tol {
        return false;
    }
    let levels = h.spectrum(EigenOrder::Ascending);
    let n = levels.dim();
    let level_tol = DEGENERACY_TOL * h.norm_max().max(1.0);

    let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(n);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && levels.values[end] - levels.values[end - 1] <= level_tol {
            end += 1;
        }
        let block = end - start;
        let mut restricted = ComplexMatrix::zeros(block, block);
        for a in 0..block {
            let va = levels.vector(start + a);
            for b in 0..block {
                let vb = levels.vector(start + b);
                let mut acc = C64::new(0.0, 0.0);
                for i in 0..n {
                    for j in 0..n {
                        acc += va[i].conj() * rho[(i, j)] * vb[j];
                    }
                }
                restricted[(a, b)] = acc;
            }
        }
        let eps = levels.values[start];
        for alpha in crate::qmat::eigenvalues_hermitian(&restricted) {
            pairs.push((eps, alpha));
        }
        start = end;
    }
    for (j, &(ej, aj)) in pairs.iter().enumerate() {
        for &(ek, ak) in &pairs[j + 1..] {
            if (ek - ej).abs() > level_tol && (aj - ak) * (ej - ek) > tol {
                return false;
            }
        }
    }
    true
}

fn predicate_tol(h: &HermitianOperator) -> f64 {
    PASSIVITY_TOL * h.norm_max()
}

/// No unitary can lower the energy of ρ.
pub fn is_passive(rho: &DensityOperator, h: &HermitianOperator) -> bool {
    rho.dim() == h.dim() && anti_ordered(rho.matrix(), h, predicate_tol(h))
}

/// Both reduced states commute with their local Hamiltonian and are
/// anti-ordered against its levels.
pub fn is_locally_passive(rho: &DensityOperator, h: &LocalHamiltonian) -> bool {
    if h.check_state(rho).is_err() {
        return false;
    }
    let tol = PASSIVITY_TOL * h.norm_max();
    [Subsystem::A, Subsystem::B]
        .into_iter()
        .all(|w| anti_ordered(rho.reduced(w).matrix(), h.part(w), tol))
}

/// Unitary taking the descending eigenbasis of `rho_w` to the ascending
/// energy basis of `h_w`.
fn subsystem_diagonalizer(rho_w: &ComplexMatrix, h_w: &HermitianOperator) -> ComplexMatrix {
    let state = spectrum_of(rho_w, EigenOrder::Descending);
    let levels = h_w.spectrum(EigenOrder::Ascending);
    &levels.vectors * &state.vectors.adjoint()
}

/// `U_A ⊗ U_B ρ U_A† ⊗ U_B†` with each `U_w` diagonalizing ρ_w so that its
/// populations are non-increasing along increasing energy.
///
/// The result is unique up to phases diagonal in the local energy bases; those
/// are fixed by [`canonical_phases`] so equal inputs modulo local unitaries map
/// to the same matrix.
pub fn locally_passive_state(
    rho: &DensityOperator,
    h: &LocalHamiltonian,
) -> Result<ErgotropyResult> {
    h.check_state(rho)?;
    let mut u_a = subsystem_diagonalizer(rho.reduced(Subsystem::A).matrix(), h.h_a());
    let mut u_b = subsystem_diagonalizer(rho.reduced(Subsystem::B).matrix(), h.h_b());

    let w_a = h.h_a().spectrum(EigenOrder::Ascending).vectors;
    let w_b = h.h_b().spectrum(EigenOrder::Ascending).vectors;
    let u = u_a.kron(&u_b);
    let sigma = rho.matrix().conjugate_by(&u);

    // Phase gauge in energy coordinates.
    let w = w_a.kron(&w_b);
    let tau = &(&w.adjoint() * &sigma) * &w;
    let (theta, phi) = canonical_phases(&tau, h.dim_a(), h.dim_b());
    let d_a = phase_matrix(&w_a, &theta);
    let d_b = phase_matrix(&w_b, &phi);
    u_a = &d_a * &u_a;
    u_b = &d_b * &u_b;

    let u_a = UnitaryOperator::from_trusted(u_a);
    let u_b = UnitaryOperator::from_trusted(u_b);
    let final_state = rho.evolve(&u_a.kron(&u_b))?;
    let work = energy(rho, h)? - energy(&final_state, h)?;
    Ok(ErgotropyResult {
        work,
        final_state,
        witness: Witness::Local { u_a, u_b },
    })
}

/// W diag(e^{iθ}) W†.
fn phase_matrix(w: &ComplexMatrix, theta: &[f64]) -> ComplexMatrix {
    let phases: Vec<C64> = theta.iter().map(|&t| C64::from_polar(1.0, t)).collect();
    let mut d = ComplexMatrix::zeros(theta.len(), theta.len());
    for (k, &p) in phases.iter().enumerate() {
        d[(k, k)] = p;
    }
    &(w * &d) * &w.adjoint()
}

/// Local phases `θ` (A) and `φ` (B) that make a spanning set of entries of
/// `tau` real positive, where entry `(ij, kl)` picks up `e^{i(θ_i − θ_k + φ_j − φ_l)}`.
///
/// Levels are attached one at a time through the largest available entry
/// (first coherences within one subsystem, then joint coherences), so the
/// choice depends only on entry moduli and positions.
pub fn canonical_phases(tau: &ComplexMatrix, dim_a: usize, dim_b: usize) -> (Vec<f64>, Vec<f64>) {
    let mut theta = vec![0.0; dim_a];
    let mut phi = vec![0.0; dim_b];
    let mut fixed_a = vec![false; dim_a];
    let mut fixed_b = vec![false; dim_b];
    fixed_a[0] = true;
    fixed_b[0] = true;
    let idx = |i: usize, j: usize| i * dim_b + j;

    loop {
        // Coherences of A at equal B index: τ[(i,j),(k,j)] ~ e^{i(θ_i − θ_k)}.
        let mut cands = Vec::new();
        for i in (0..dim_a).filter(|&i| fixed_a[i]) {
            for k in (0..dim_a).filter(|&k| !fixed_a[k]) {
                for j in 0..dim_b {
                    let x = tau[(idx(i, j), idx(k, j))];
                    cands.push((x.norm(), (k, theta[i] + x.arg())));
                }
            }
        }
        if let Some((k, t)) = strongest(&cands) {
            theta[k] = t;
            fixed_a[k] = true;
            continue;
        }

        // Coherences of B at equal A index: τ[(i,j),(i,l)] ~ e^{i(φ_j − φ_l)}.
        let mut cands = Vec::new();
        for j in (0..dim_b).filter(|&j| fixed_b[j]) {
            for l in (0..dim_b).filter(|&l| !fixed_b[l]) {
                for i in 0..dim_a {
                    let x = tau[(idx(i, j), idx(i, l))];
                    cands.push((x.norm(), (l, phi[j] + x.arg())));
                }
            }
        }
        if let Some((l, p)) = strongest(&cands) {
            phi[l] = p;
            fixed_b[l] = true;
            continue;
        }

        // Joint coherences involving at least one free phase.
        let n = dim_a * dim_b;
        let mut cands = Vec::new();
        for r in 0..n {
            for c in (r + 1)..n {
                let (i, j, k, l) = (r / dim_b, r % dim_b, c / dim_b, c % dim_b);
                if !fixed_a[i] || !fixed_a[k] || !fixed_b[j] || !fixed_b[l] {
                    cands.push((tau[(r, c)].norm(), (r, c)));
                }
            }
        }
        let Some((r, c)) = strongest(&cands) else {
            break;
        };
        let (i, j, k, l) = (r / dim_b, r % dim_b, c / dim_b, c % dim_b);
        // Solve for the first free variable; other free ones are pinned at zero.
        let arg = tau[(r, c)].arg();
        if !fixed_a[i] {
            if !fixed_a[k] {
                theta[k] = 0.0;
                fixed_a[k] = true;
            }
            pin_b(&mut phi, &mut fixed_b, j, l);
            theta[i] = theta[k] - phi[j] + phi[l] - arg;
            fixed_a[i] = true;
        } else if !fixed_a[k] {
            pin_b(&mut phi, &mut fixed_b, j, l);
            theta[k] = theta[i] + phi[j] - phi[l] + arg;
            fixed_a[k] = true;
        } else if !fixed_b[j] {
            if !fixed_b[l] {
                phi[l] = 0.0;
                fixed_b[l] = true;
            }
            phi[j] = phi[l] - theta[i] + theta[k] - arg;
            fixed_b[j] = true;
        } else {
            phi[l] = theta[i] - theta[k] + phi[j] + arg;
            fixed_b[l] = true;
        }
    }
    (theta, phi)
}

/// First candidate (in enumeration order) whose modulus is within a relative
/// 1e-6 of the largest one. Structural ties, such as the paired coherences of a
/// state with diagonal marginals, then resolve by position rather than round-off.
fn strongest<T: Copy>(cands: &[(f64, T)]) -> Option<T> {
    let max = cands.iter().map(|c| c.0).fold(0.0, f64::max);
    if max <= GAUGE_ENTRY_TOL {
        return None;
    }
    cands
        .iter()
        .find(|c| c.0 >= max * (1.0 - 1e-6))
        .map(|c| c.1)
}

fn pin_b(phi: &mut [f64], fixed_b: &mut [bool], j: usize, l: usize) {
    for v in [j, l] {
        if !fixed_b[v] {
            phi[v] = 0.0;
            fixed_b[v] = true;
        }
    }
}

/// Maximum work extractable with product unitaries: the sum of the subsystem
/// ergotropies. The returned state is the locally passive state.
pub fn local_ergotropy(rho: &DensityOperator, h: &LocalHamiltonian) -> Result<ErgotropyResult> {
    let lp = locally_passive_state(rho, h)?;
    let work = local_ergotropy_value(rho, h)?;
    Ok(ErgotropyResult { work, ..lp })
}

pub fn local_ergotropy_value(rho: &DensityOperator, h: &LocalHamiltonian) -> Result<f64> {
    h.check_state(rho)?;
    let wa = ergotropy_value(&rho.reduced(Subsystem::A), h.h_a())?;
    let wb = ergotropy_value(&rho.reduced(Subsystem::B), h.h_b())?;
    Ok(wa + wb)
}

/// Energy of the locally passive state, from reduced spectra only.
pub fn locally_passive_energy(rho: &DensityOperator, h: &LocalHamiltonian) -> Result<f64> {
    h.check_state(rho)?;
    let mut total = 0.0;
    for w in [Subsystem::A, Subsystem::B] {
        let levels = crate::qmat::eigenvalues_hermitian(h.part(w).matrix());
        total += passive_energy(&rho.reduced(w).eigenvalues(), &levels);
    }
    Ok(total)
}

/// Euler-angle qubit unitary `R_z(α) R_y(β) R_z(γ)`.
pub fn euler_unitary(alpha: f64, beta: f64, gamma: f64) -> ComplexMatrix {
    let rz = |a: f64| {
        ComplexMatrix::from_rows(&[
            vec![C64::from_polar(1.0, -a / 2.0), C64::new(0.0, 0.0)],
            vec![C64::new(0.0, 0.0), C64::from_polar(1.0, a / 2.0)],
        ])
        .unwrap()
    };
    let (s, c) = (beta / 2.0).sin_cos();
    let ry = ComplexMatrix::from_rows(&[
        vec![C64::new(c, 0.0), C64::new(-s, 0.0)],
        vec![C64::new(s, 0.0), C64::new(c, 0.0)],
    ])
    .unwrap();
    &(&rz(alpha) * &ry) * &rz(gamma)
}

/// Brute-force lower bound on the local ergotropy of a two-qubit state.
///
/// Each factor ranges over a uniform Euler-angle grid with `grid_density`
/// points per angle (searched for `U_A` with `U_B = I`, then for `U_B` with
/// the best `U_A`), followed by a few rounds of local grid refinement around
/// the best angles. `samples` independent Haar pairs are also tried. Every
/// candidate is scored with the full bipartite energy.
pub fn local_ergotropy_oracle<R: Rng + ?Sized>(
    rho: &DensityOperator,
    h: &LocalHamiltonian,
    grid_density: usize,
    rng: &mut R,
    samples: usize,
) -> Result<f64> {
    if rho.dim_a() != 2 || rho.dim_b() != 2 || h.dim_a() != 2 || h.dim_b() != 2 {
        return Err(BatteryError::InvalidInput(
            "the grid oracle handles two-qubit states only".into(),
        ));
    }
    if grid_density < 2 {
        return Err(BatteryError::InvalidInput(
            "grid_density must be >= 2".into(),
        ));
    }
    let hf = h.full_hamiltonian();
    let e0 = energy_full(rho, &hf)?;
    let id = ComplexMatrix::identity(2);
    let work_of = |ua: &ComplexMatrix, ub: &ComplexMatrix| {
        let u = ua.kron(ub);
        e0 - rho.matrix().conjugate_by(&u).trace_product_re(hf.matrix())
    };

    let two_pi = 2.0 * std::f64::consts::PI;
    let n = grid_density;
    let search = |score: &dyn Fn(&ComplexMatrix) -> f64| -> (f64, ComplexMatrix) {
        let mut best = (f64::NEG_INFINITY, [0.0; 3]);
        for a in 0..n {
            for b in 0..n {
                for g in 0..n {
                    let angles = [
                        two_pi * a as f64 / n as f64,
                        std::f64::consts::PI * b as f64 / (n - 1) as f64,
                        two_pi * g as f64 / n as f64,
                    ];
                    let w = score(&euler_unitary(angles[0], angles[1], angles[2]));
                    if w > best.0 {
                        best = (w, angles);
                    }
                }
            }
        }
        let mut half = [
            two_pi / n as f64,
            std::f64::consts::PI / (n - 1) as f64,
            two_pi / n as f64,
        ];
        for _ in 0..ORACLE_REFINE_ROUNDS {
            let center = best.1;
            for a in -2i32..=2 {
                for b in -2i32..=2 {
                    for g in -2i32..=2 {
                        let angles = [
                            center[0] + half[0] * a as f64 / 2.0,
                            center[1] + half[1] * b as f64 / 2.0,
                            center[2] + half[2] * g as f64 / 2.0,
                        ];
                        let w = score(&euler_unitary(angles[0], angles[1], angles[2]));
                        if w > best.0 {
                            best = (w, angles);
                        }
                    }
                }
            }
            for x in &mut half {
                *x /= 2.0;
            }
        }
        (best.0, euler_unitary(best.1[0], best.1[1], best.1[2]))
    };

    let (_, best_a) = search(&|u: &ComplexMatrix| work_of(u, &id));
    let (grid_best, _) = search(&|u: &ComplexMatrix| work_of(&best_a, u));

    let mut best = grid_best.max(0.0);
    for _ in 0..samples {
        let ua = random_unitary(2, rng);
        let ub = random_unitary(2, rng);
        best = best.max(work_of(ua.matrix(), ub.matrix()));
    }
    Ok(best)
}

/// Refinement rounds of the oracle's local grid search.
pub const ORACLE_REFINE_ROUNDS: usize = 4;

/// Eigenvalue multisets agree to `tol` after sorting.
pub fn same_spectrum(a: &DensityOperator, b: &DensityOperator, tol: f64) -> bool {
    let (ea, eb) = (a.eigenvalues(), b.eigenvalues());
    ea.len() == eb.len() && ea.iter().zip(&eb).all(|(x, y)| (x - y).abs() <= tol)
}

/// Lower bound demanded of any ergotropy value.
pub fn work_floor(h_norm: f64) -> f64 {
    -PSD_TOL * h_norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::battery::TwoQubitZZ;
    use crate::qmat::{random_density, random_local_unitary, random_pure_state, ONE, ZERO};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn zz() -> LocalHamiltonian {
        TwoQubitZZ::default().local()
    }

    fn ket(amps: [f64; 4]) -> DensityOperator {
        let v: Vec<C64> = amps.iter().map(|&x| C64::new(x, 0.0)).collect();
        DensityOperator::pure(2, 2, &v).unwrap()
    }

    fn bell() -> DensityOperator {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        ket([r, 0.0, 0.0, r])
    }

    #[test]
    fn passive_state_examples() {
        let h = zz().full_hamiltonian();
        let top = ket([1.0, 0.0, 0.0, 0.0]);
        let sigma = passive_state(&top, &h).unwrap();
        assert!(
            sigma
                .matrix()
                .max_abs_diff(ket([0.0, 0.0, 0.0, 1.0]).matrix())
                < 1e-14
        );

        let mixed = DensityOperator::maximally_mixed(2, 2);
        assert!(
            passive_state(&mixed, &h)
                .unwrap()
                .matrix()
                .max_abs_diff(mixed.matrix())
                < 1e-15
        );

        // Spectrum (0.5, 0.3, 0.2, 0) in some rotated basis.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = crate::qmat::random_unitary(4, &mut rng);
        let diag = DensityOperator::new(2, 2, ComplexMatrix::from_real_diag(&[0.5, 0.3, 0.2, 0.0]))
            .unwrap();
        let rho = diag.evolve(&u).unwrap();
        let sigma = passive_state(&rho, &h).unwrap();
        let expected = ComplexMatrix::from_real_diag(&[0.0, 0.2, 0.3, 0.5]);
        assert!(sigma.matrix().max_abs_diff(&expected) < 1e-12);
    }

    #[test]
    fn ergotropy_examples() {
        let h = zz().full_hamiltonian();
        let top = ket([1.0, 0.0, 0.0, 0.0]);
        let res = ergotropy(&top, &h).unwrap();
        assert!((res.work - 6.0).abs() < 1e-12);
        let moved = top.evolve(&res.witness.unitary()).unwrap();
        assert!(moved.matrix().max_abs_diff(res.final_state.matrix()) < 1e-12);

        assert!(ergotropy(&bell(), &h).unwrap().work - 3.0 < 1e-12);
        assert!((ergotropy(&bell(), &h).unwrap().work - 3.0).abs() < 1e-12);

        let passive = passive_state(&bell(), &h).unwrap();
        assert!(ergotropy(&passive, &h).unwrap().work.abs() < 1e-12);
    }

    #[test]
    fn ergotropy_dimension_mismatch() {
        let h = zz().full_hamiltonian();
        let rho = DensityOperator::maximally_mixed(3, 2);
        assert!(matches!(
            ergotropy(&rho, &h),
            Err(BatteryError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            locally_passive_state(&rho, &zz()),
            Err(BatteryError::DimensionMismatch { .. })
        ));
        assert!(!is_passive(&rho, &h));
    }

    #[test]
    fn passivity_predicate_examples() {
        let h = zz().full_hamiltonian();
        assert!(is_passive(&DensityOperator::maximally_mixed(2, 2), &h));
        assert!(!is_passive(&ket([1.0, 0.0, 0.0, 0.0]), &h));
        assert!(is_passive(&ket([0.0, 0.0, 0.0, 1.0]), &h));
    }

    #[test]
    fn locally_passive_examples() {
        let h = zz();
        let top = ket([1.0, 0.0, 0.0, 0.0]);
        let res = locally_passive_state(&top, &h).unwrap();
        assert!(
            res.final_state
                .matrix()
                .max_abs_diff(ket([0.0, 0.0, 0.0, 1.0]).matrix())
                < 1e-14
        );
        assert!((res.work - 6.0).abs() < 1e-12);

        let res = locally_passive_state(&bell(), &h).unwrap();
        assert!(res.final_state.matrix().max_abs_diff(bell().matrix()) < 1e-14);
        assert!(res.work.abs() < 1e-14);
        assert!(local_ergotropy(&bell(), &h).unwrap().work.abs() < 1e-14);
    }

    #[test]
    fn locally_passive_state_of_max_work_family() {
        let (c0, c3) = (0.9_f64.sqrt(), 0.1_f64.sqrt());
        let rho = ket([c0, 0.0, 0.0, c3]);
        let res = locally_passive_state(&rho, &zz()).unwrap();
        let m = res.final_state.matrix();
        assert!((m[(0, 0)].re - 0.1).abs() < 1e-14);
        assert!((m[(3, 3)].re - 0.9).abs() < 1e-14);
        assert!((m[(0, 3)] - C64::new(c0 * c3, 0.0)).norm() < 1e-14);
        assert!(is_locally_passive(&res.final_state, &zz()));
        // Both qubits flip: 4·0.8 + 2·0.8.
        assert!((res.work - 6.0 * 0.8).abs() < 1e-12);
    }

    #[test]
    fn local_predicate_examples() {
        let h = zz();
        assert!(is_locally_passive(
            &ket([0.3, 0.0, 0.0, 0.91_f64.sqrt()]),
            &h
        ));
        assert!(!is_locally_passive(&ket([1.0, 0.0, 0.0, 0.0]), &h));
        assert!(is_locally_passive(
            &DensityOperator::maximally_mixed(2, 2),
            &h
        ));
    }

    #[test]
    fn local_ergotropy_of_product_is_additive() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = zz();
        let a = random_density(2, 1, &mut rng);
        let b = random_density(2, 1, &mut rng);
        let prod = DensityOperator::product(&a, &b);
        let expected = ergotropy(&a, h.h_a()).unwrap().work + ergotropy(&b, h.h_b()).unwrap().work;
        assert!((local_ergotropy(&prod, &h).unwrap().work - expected).abs() < 1e-12);
    }

    #[test]
    fn degenerate_hamiltonian_levels() {
        // Equal local levels make the ordering condition vacuous.
        let h = LocalHamiltonian::new(HermitianOperator::zero(2), HermitianOperator::zero(2));
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rho = random_density(2, 2, &mut rng);
        assert!(is_locally_passive(&rho, &h));
        assert_eq!(local_ergotropy(&rho, &h).unwrap().work, 0.0);
    }

    #[test]
    fn oracle_rejects_qutrits() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rho = DensityOperator::maximally_mixed(3, 2);
        let h = LocalHamiltonian::new(
            HermitianOperator::from_real_diag(&[1.0, 0.0, -1.0]),
            HermitianOperator::from_real_diag(&[1.0, -1.0]),
        );
        assert!(local_ergotropy_oracle(&rho, &h, 8, &mut rng, 0).is_err());
    }

    #[test]
    fn oracle_on_bell_state_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = local_ergotropy_oracle(&bell(), &zz(), 12, &mut rng, 50).unwrap();
        assert!(w.abs() < 1e-9);
    }

    #[test]
    fn oracle_grid_convergence() {
        // Grid-only gap against the analytic value, per grid density.
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let h = zz();
        let states: Vec<_> = (0..20).map(|_| random_pure_state(2, 2, &mut rng)).collect();
        let mut prev_gap = f64::INFINITY;
        for density in [8, 16, 24] {
            let mut gap = 0.0_f64;
            for rho in &states {
                let exact = local_ergotropy_value(rho, &h).unwrap();
                let oracle = local_ergotropy_oracle(rho, &h, density, &mut rng, 0).unwrap();
                assert!(oracle <= exact + 1e-9);
                gap = gap.max(exact - oracle);
            }
            assert!(gap <= prev_gap + 1e-12);
            prev_gap = gap;
        }
        assert!(prev_gap < 0.01, "grid gap at density 24: {prev_gap}");
    }

    #[test]
    fn canonical_phases_remove_local_phase_freedom() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let h = zz();
        for _ in 0..20 {
            let rho = random_density(2, 2, &mut rng);
            let lp = locally_passive_state(&rho, &h).unwrap().final_state;
            let d = ComplexMatrix::from_rows(&[
                vec![ONE, ZERO],
                vec![ZERO, C64::from_polar(1.0, 1.234)],
            ])
            .unwrap();
            let e = ComplexMatrix::from_rows(&[
                vec![ONE, ZERO],
                vec![ZERO, C64::from_polar(1.0, -0.4)],
            ])
            .unwrap();
            let rotated = lp
                .evolve(&UnitaryOperator::new(d.kron(&e)).unwrap())
                .unwrap();
            let again = locally_passive_state(&rotated, &h).unwrap().final_state;
            assert!(again.matrix().max_abs_diff(lp.matrix()) < 1e-12);
        }
    }

    fn random_local_hamiltonian(rng: &mut ChaCha8Rng, da: usize, db: usize) -> LocalHamiltonian {
        LocalHamiltonian::new(
            HermitianOperator::new(crate::qmat::random_hermitian_matrix(da, rng)).unwrap(),
            HermitianOperator::new(crate::qmat::random_hermitian_matrix(db, rng)).unwrap(),
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn passive_outputs_keep_spectrum(seed in any::<u64>(), da in 2usize..4, db in 2usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = random_local_hamiltonian(&mut rng, da, db);
            let rho = random_density(da, db, &mut rng);
            let sigma = passive_state(&rho, &h.full_hamiltonian()).unwrap();
            prop_assert!(same_spectrum(&rho, &sigma, 1e-9));
            prop_assert!(is_passive(&sigma, &h.full_hamiltonian()));
            let lp = locally_passive_state(&rho, &h).unwrap();
            prop_assert!(same_spectrum(&rho, &lp.final_state, 1e-9));
            prop_assert!(is_locally_passive(&lp.final_state, &h));
        }

        #[test]
        fn local_work_is_bounded_by_global(seed in any::<u64>(), pure in any::<bool>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = zz();
            let rho = if pure { random_pure_state(2, 2, &mut rng) } else { random_density(2, 2, &mut rng) };
            let local = local_ergotropy(&rho, &h).unwrap();
            let global = ergotropy(&rho, &h.full_hamiltonian()).unwrap().work;
            prop_assert!(local.work >= -1e-12);
            prop_assert!(local.work <= global + 1e-12);
            let lp = locally_passive_state(&rho, &h).unwrap();
            prop_assert!((lp.work - local.work).abs() < 1e-9);
            let via_energy = energy(&rho, &h).unwrap() - locally_passive_energy(&rho, &h).unwrap();
            prop_assert!((via_energy - local.work).abs() < 1e-9);
        }

        #[test]
        fn local_unitaries_cannot_lower_passive_energy(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = zz();
            let rho = random_density(2, 2, &mut rng);
            let sigma = locally_passive_state(&rho, &h).unwrap().final_state;
            let e = energy(&sigma, &h).unwrap();
            for _ in 0..50 {
                let u = random_local_unitary(2, 2, &mut rng);
                prop_assert!(energy(&sigma.evolve(&u).unwrap(), &h).unwrap() >= e - 1e-9);
            }
        }

        #[test]
        fn locally_passive_state_is_unique(seed in any::<u64>(), da in 2usize..4, db in 2usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = random_local_hamiltonian(&mut rng, da, db);
            let rho = random_density(da, db, &mut rng);
            let v = random_local_unitary(da, db, &mut rng);
            let a = locally_passive_state(&rho, &h).unwrap().final_state;
            let b = locally_passive_state(&rho.evolve(&v).unwrap(), &h).unwrap().final_state;
            prop_assert!(a.matrix().max_abs_diff(b.matrix()) < 1e-8);
        }
    }
}
