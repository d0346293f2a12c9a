//! Closed-form two-qubit results for `H = ε_A σ_z ⊗ I + ε_B I ⊗ σ_z`.
//!
//! Pure states are written `c0|00> + c1|01> + c2|10> + c3|11>` in the product
//! energy basis. Entanglement is measured by the logarithmic negativity, in
//! ebits. All work values are in the same units as `ε_A, ε_B`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::battery::TwoQubitZZ;
use crate::error::{BatteryError, Result};
use crate::qmat::{
    eigenvalues_hermitian, partial_transpose, ComplexMatrix, DensityOperator, Subsystem, C64,
};

const NORM_TOL: f64 = 1e-12;
const CONDITION_TOL: f64 = 1e-10;

/// Amplitudes `(c0, c1, c2, c3)` of a normalized two-qubit pure state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PureCoefficients {
    c: [C64; 4],
}

impl PureCoefficients {
    pub fn new(c: [C64; 4]) -> Result<Self> {
        let norm_sq: f64 = c.iter().map(|x| x.norm_sqr()).sum();
        if (norm_sq - 1.0).abs() > NORM_TOL || c.iter().any(|x| x.norm() > 1.0 + NORM_TOL) {
            return Err(BatteryError::NotNormalized { norm_sq });
        }
        Ok(Self { c })
    }

    pub fn real(c: [f64; 4]) -> Result<Self> {
        Self::new(c.map(|x| C64::new(x, 0.0)))
    }

    /// Rescales any nonzero vector to unit norm.
    pub fn normalized(c: [C64; 4]) -> Result<Self> {
        let norm = c.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(BatteryError::NotNormalized {
                norm_sq: norm * norm,
            });
        }
        Ok(Self {
            c: c.map(|x| x / norm),
        })
    }

    pub fn amplitudes(&self) -> [C64; 4] {
        self.c
    }

    pub fn probabilities(&self) -> [f64; 4] {
        self.c.map(|x| x.norm_sqr())
    }
}

/// Locally passive classes of pure states.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpClass {
    /// `c3 = 0, c2 ≠ 0` (forces `c0 = 0`).
    CaseA,
    /// `c2 = 0, c3 ≠ 0` (forces `c1 = 0`), with `|c0| < |c3|`.
    CaseB,
    /// `|c1| = |c2|` and `|c0| = |c3|`; work `ε_A + ε_B` regardless of the amplitudes.
    CaseC,
    NotLp,
}

pub fn density_from_coeffs(c: &PureCoefficients) -> DensityOperator {
    DensityOperator::from_trusted(2, 2, ComplexMatrix::projector(&c.c))
}

/// `log2(2|c1 c2 − c0 c3| + 1)`.
pub fn logneg_pure(c: &PureCoefficients) -> f64 {
    let [c0, c1, c2, c3] = c.c;
    (2.0 * (c1 * c2 - c0 * c3).norm() + 1.0).log2()
}

/// `log2 ‖ρ^{T_B}‖_1 = log2(1 + 2N)`, N the magnitude sum of negative
/// eigenvalues of the partial transpose; exactly zero for PPT states.
pub fn logneg_general(rho: &DensityOperator) -> f64 {
    let pt = partial_transpose(rho, Subsystem::B);
    let negativity: f64 = eigenvalues_hermitian(&pt)
        .into_iter()
        .filter(|&x| x < 0.0)
        .map(|x| -x)
        .sum();
    if negativity == 0.0 {
        0.0
    } else {
        (1.0 + 2.0 * negativity).log2()
    }
}

pub fn check_lp_conditions(c: &PureCoefficients) -> LpClass {
    let [c0, c1, c2, c3] = c.c;
    let [p0, p1, p2, p3] = c.probabilities();
    // Vanishing coherences of the two marginals.
    let coherence_a = (c0 * c2.conj() + c1 * c3.conj()).norm();
    let coherence_b = (c0 * c1.conj() + c2 * c3.conj()).norm();
    let holds = coherence_a <= CONDITION_TOL
        && coherence_b <= CONDITION_TOL
        && p0 + p1 <= p2 + p3 + CONDITION_TOL
        && p0 + p2 <= p1 + p3 + CONDITION_TOL;
    if !holds {
        return LpClass::NotLp;
    }
    let c2_zero = c2.norm() <= CONDITION_TOL;
    let c3_zero = c3.norm() <= CONDITION_TOL;
    match (c2_zero, c3_zero) {
        (false, true) => LpClass::CaseA,
        (true, false) if (p0 - p3).abs() > CONDITION_TOL => LpClass::CaseB,
        (true, false) | (false, false) => LpClass::CaseC,
        (true, true) => LpClass::NotLp,
    }
}

/// Global ergotropy of a pure locally passive state:
/// `(ε_A+ε_B)(|c0|² − |c3|² + 1) + (ε_A−ε_B)(|c1|² − |c2|²)`.
pub fn w_max_pure_lp(c: &PureCoefficients, h: &TwoQubitZZ) -> Result<f64> {
    if check_lp_conditions(c) == LpClass::NotLp {
        return Err(BatteryError::NotLocallyPassive);
    }
    Ok(w_max_pure(c, h))
}

/// The same expression without the local passivity requirement.
pub fn w_max_pure(c: &PureCoefficients, h: &TwoQubitZZ) -> f64 {
    let [p0, p1, p2, p3] = c.probabilities();
    (h.eps_a + h.eps_b) * (p0 - p3 + 1.0) + (h.eps_a - h.eps_b) * (p1 - p2)
}

fn check_ebits(e: f64) -> Result<()> {
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

/// `√(2^{E+1} − 2^{2E}) = √(1 − (2^E − 1)²)`, clamped at the endpoints.
pub fn radical(e: f64) -> f64 {
    let r = 2f64.powf(e + 1.0) - 2f64.powf(2.0 * e);
    r.max(0.0).sqrt()
}

/// Optimal global work from pure locally passive states with entanglement E.
pub fn g_p(e: f64, h: &TwoQubitZZ) -> Result<f64> {
    check_ebits(e)?;
    Ok(h.sum() * (1.0 - radical(e)))
}

/// Optimal global work from arbitrary pure states with entanglement E.
pub fn g(e: f64, h: &TwoQubitZZ) -> Result<f64> {
    check_ebits(e)?;
    Ok(h.sum() * (1.0 + radical(e)))
}

/// Local work from the state attaining [`g`].
pub fn lbar(e: f64, h: &TwoQubitZZ) -> Result<f64> {
    check_ebits(e)?;
    Ok(2.0 * h.sum() * radical(e))
}

/// Work lost by restricting [`rho_max_coeffs`] to local unitaries.
pub fn deficit(e: f64, h: &TwoQubitZZ) -> Result<f64> {
    Ok(g(e, h)? - lbar(e, h)?)
}

fn c0_c3_family(c0_sq: f64) -> PureCoefficients {
    let c0_sq = c0_sq.clamp(0.0, 1.0);
    let zero = C64::new(0.0, 0.0);
    PureCoefficients {
        c: [
            C64::new(c0_sq.sqrt(), 0.0),
            zero,
            zero,
            C64::new((1.0 - c0_sq).sqrt(), 0.0),
        ],
    }
}

/// Pure locally passive state with the most global work at entanglement E:
/// `c1 = c2 = 0`, `|c0|² = (1 − √(1 − (2^E − 1)²))/2`.
pub fn sigma_lmax_coeffs(e: f64) -> Result<PureCoefficients> {
    check_ebits(e)?;
    Ok(c0_c3_family(0.5 * (1.0 - radical(e))))
}

/// Pure state with the most global work at entanglement E:
/// `c1 = c2 = 0`, `|c0|² = (1 + √(1 − (2^E − 1)²))/2`.
pub fn rho_max_coeffs(e: f64) -> Result<PureCoefficients> {
    check_ebits(e)?;
    Ok(c0_c3_family(0.5 * (1.0 + radical(e))))
}

/// Figure curves, by their CSV identifiers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveId {
    Gp,
    G,
    Lbar,
    Deficit,
    GpMixed,
    GMixed,
    LPure,
}

impl CurveId {
    pub const ALL: [CurveId; 7] = [
        CurveId::Gp,
        CurveId::G,
        CurveId::Lbar,
        CurveId::Deficit,
        CurveId::GpMixed,
        CurveId::GMixed,
        CurveId::LPure,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            CurveId::Gp => "gp",
            CurveId::G => "g",
            CurveId::Lbar => "lbar",
            CurveId::Deficit => "deficit",
            CurveId::GpMixed => "gp_mixed",
            CurveId::GMixed => "g_mixed",
            CurveId::LPure => "l_pure",
        }
    }

    pub fn is_analytic(&self) -> bool {
        matches!(
            self,
            CurveId::Gp | CurveId::G | CurveId::Lbar | CurveId::Deficit
        )
    }
}

impl fmt::Display for CurveId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CurveId {
    type Err = BatteryError;
    fn from_str(s: &str) -> Result<Self> {
        CurveId::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| BatteryError::InvalidInput(format!("unknown curve '{s}'")))
    }
}

/// Closed-form value of an analytic curve.
pub fn analytic_value(curve: CurveId, e: f64, h: &TwoQubitZZ) -> Result<f64> {
    match curve {
        CurveId::Gp => g_p(e, h),
        CurveId::G => g(e, h),
        CurveId::Lbar => lbar(e, h),
        CurveId::Deficit => deficit(e, h),
        other => Err(BatteryError::InvalidInput(format!(
            "curve '{other}' has no closed form"
        ))),
    }
}

/// One point of a work-versus-entanglement curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkCurvePoint {
    pub entanglement: f64,
    pub value: f64,
    pub curve: CurveId,
}
