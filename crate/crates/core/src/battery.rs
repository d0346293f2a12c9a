//! Local Hamiltonians `H_AB = H_A ⊗ I + I ⊗ H_B` and energy evaluation.
//!
//! Energies are expressed in multiples of a reference energy ε.

use serde::{Deserialize, Serialize};

use crate::error::{BatteryError, Result};
use crate::qmat::{
    partial_trace, ComplexMatrix, DensityOperator, HermitianOperator, Subsystem, C64,
};

/// Pair of subsystem Hamiltonians with no interaction term.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalHamiltonian {
    h_a: HermitianOperator,
    h_b: HermitianOperator,
}

impl LocalHamiltonian {
    pub fn new(h_a: HermitianOperator, h_b: HermitianOperator) -> Self {
        Self { h_a, h_b }
    }

    pub fn h_a(&self) -> &HermitianOperator {
        &self.h_a
    }

    pub fn h_b(&self) -> &HermitianOperator {
        &self.h_b
    }

    pub fn part(&self, w: Subsystem) -> &HermitianOperator {
        match w {
            Subsystem::A => &self.h_a,
            Subsystem::B => &self.h_b,
        }
    }

    pub fn dim_a(&self) -> usize {
        self.h_a.dim()
    }

    pub fn dim_b(&self) -> usize {
        self.h_b.dim()
    }

    pub fn full_hamiltonian(&self) -> HermitianOperator {
        full_hamiltonian(self)
    }

    /// Largest entry modulus of the full Hamiltonian.
    pub fn norm_max(&self) -> f64 {
        self.full_hamiltonian().norm_max()
    }

    pub(crate) fn check_state(&self, rho: &DensityOperator) -> Result<()> {
        if rho.dim_a() != self.dim_a() || rho.dim_b() != self.dim_b() {
            return Err(BatteryError::DimensionMismatch {
                expected: format!("{}x{} bipartite state", self.dim_a(), self.dim_b()),
                found: format!("{}x{} bipartite state", rho.dim_a(), rho.dim_b()),
            });
        }
        Ok(())
    }
}

pub fn full_hamiltonian(h: &LocalHamiltonian) -> HermitianOperator {
    let ia = ComplexMatrix::identity(h.dim_a());
    let ib = ComplexMatrix::identity(h.dim_b());
    let m = &h.h_a.matrix().kron(&ib) + &ia.kron(h.h_b.matrix());
    HermitianOperator::new(m).expect("sum of Hermitian extensions is Hermitian")
}

/// `ε_A σ_z ⊗ I + ε_B I ⊗ σ_z` with `ε_A > ε_B ≥ 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoQubitZZ {
    pub eps_a: f64,
    pub eps_b: f64,
}

impl TwoQubitZZ {
    pub fn new(eps_a: f64, eps_b: f64) -> Result<Self> {
        if !(eps_a.is_finite() && eps_b.is_finite()) || eps_b < 0.0 || eps_a <= eps_b {
            return Err(BatteryError::InvalidInput(format!(
                "two-qubit Hamiltonian requires eps_a > eps_b >= 0, got eps_a = {eps_a}, eps_b = {eps_b}"
            )));
        }
        Ok(Self { eps_a, eps_b })
    }

    pub fn sum(&self) -> f64 {
        self.eps_a + self.eps_b
    }

    pub fn local(&self) -> LocalHamiltonian {
        LocalHamiltonian::new(
            HermitianOperator::from_real_diag(&[self.eps_a, -self.eps_a]),
            HermitianOperator::from_real_diag(&[self.eps_b, -self.eps_b]),
        )
    }
}

impl Default for TwoQubitZZ {
    fn default() -> Self {
        Self {
            eps_a: 2.0,
            eps_b: 1.0,
        }
    }
}

/// Tr(ρ H) for a full operator of matching dimension.
pub fn energy_full(rho: &DensityOperator, h: &HermitianOperator) -> Result<f64> {
    if rho.dim() != h.dim() {
        return Err(BatteryError::DimensionMismatch {
            expected: format!("{}-dimensional state", h.dim()),
            found: format!("{}-dimensional state", rho.dim()),
        });
    }
    Ok(real_trace_product(rho.matrix(), h.matrix()))
}

/// Tr(ρ H_AB).
pub fn energy(rho: &DensityOperator, h: &LocalHamiltonian) -> Result<f64> {
    h.check_state(rho)?;
    Ok(real_trace_product(
        rho.matrix(),
        h.full_hamiltonian().matrix(),
    ))
}

/// Tr(ρ_A H_A) + Tr(ρ_B H_B), the same value through the reduced states.
pub fn energy_from_marginals(rho: &DensityOperator, h: &LocalHamiltonian) -> Result<f64> {
    h.check_state(rho)?;
    let ea = real_trace_product(&partial_trace(rho, Subsystem::A), h.h_a.matrix());
    let eb = real_trace_product(&partial_trace(rho, Subsystem::B), h.h_b.matrix());
    Ok(ea + eb)
}

fn real_trace_product(rho: &ComplexMatrix, h: &ComplexMatrix) -> f64 {
    let n = rho.rows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            acc += rho[(i, k)] * h[(k, i)];
        }
    }
    debug_assert!(acc.im.abs() < 1e-10 * (1.0 + h.max_abs()));
    acc.re
}

/// JSON description of a Hamiltonian; complex entries are `[re, im]` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum HamiltonianSpec {
    TwoQubitZz {
        eps_a: f64,
        eps_b: f64,
    },
    Local {
        h_a: Vec<Vec<[f64; 2]>>,
        h_b: Vec<Vec<[f64; 2]>>,
    },
}

impl HamiltonianSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| BatteryError::InvalidInput(format!("Hamiltonian JSON: {e}")))
    }

    pub fn to_local(&self) -> Result<LocalHamiltonian> {
        match self {
            HamiltonianSpec::TwoQubitZz { eps_a, eps_b } => {
                Ok(TwoQubitZZ::new(*eps_a, *eps_b)?.local())
            }
            HamiltonianSpec::Local { h_a, h_b } => Ok(LocalHamiltonian::new(
                HermitianOperator::new(pairs_to_matrix(h_a)?)?,
                HermitianOperator::new(pairs_to_matrix(h_b)?)?,
            )),
        }
    }

    pub fn two_qubit(&self) -> Option<TwoQubitZZ> {
        match self {
            HamiltonianSpec::TwoQubitZz { eps_a, eps_b } => TwoQubitZZ::new(*eps_a, *eps_b).ok(),
            HamiltonianSpec::Local { .. } => None,
        }
    }
}

impl From<TwoQubitZZ> for HamiltonianSpec {
    fn from(h: TwoQubitZZ) -> Self {
        HamiltonianSpec::TwoQubitZz {
            eps_a: h.eps_a,
            eps_b: h.eps_b,
        }
    }
}

pub fn pairs_to_matrix(rows: &[Vec<[f64; 2]>]) -> Result<ComplexMatrix> {
    let rows: Vec<Vec<C64>> = rows
        .iter()
        .map(|r| r.iter().map(|&[re, im]| C64::new(re, im)).collect())
        .collect();
    ComplexMatrix::from_rows(&rows)
}

pub fn matrix_to_pairs(m: &ComplexMatrix) -> Vec<Vec<[f64; 2]>> {
    m.to_rows()
        .into_iter()
        .map(|r| r.into_iter().map(|x| [x.re, x.im]).collect())
        .collect()
}
