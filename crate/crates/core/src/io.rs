//! JSON state and Hamiltonian files.
//!
//! A state file is either a full density matrix,
//!
//! ```json
//! {"dim_a": 2, "dim_b": 2, "matrix": [[[1,0],[0,0],[0,0],[0,0]], ...]}
//! ```
//!
//! with complex entries as `[re, im]` pairs (nested rows, or one flat
//! row-major list), or two-qubit amplitudes `{"pure": [[re, im], ×4]}`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::battery::{matrix_to_pairs, pairs_to_matrix, HamiltonianSpec, LocalHamiltonian};
use crate::error::{BatteryError, Result};
use crate::qmat::{ComplexMatrix, DensityOperator, C64};

/// Pure amplitudes are accepted this far from unit norm and then rescaled,
/// since hand-written files rarely carry twelve exact digits.
pub const PURE_NORM_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixEntries {
    Rows(Vec<Vec<[f64; 2]>>),
    Flat(Vec<[f64; 2]>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum StateFile {
    Pure {
        pure: Vec<[f64; 2]>,
    },
    Matrix {
        dim_a: usize,
        dim_b: usize,
        matrix: MatrixEntries,
    },
}

impl StateFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            BatteryError::InvalidInput(format!(
                "state JSON must be {{\"dim_a\", \"dim_b\", \"matrix\"}} or {{\"pure\"}}: {e}"
            ))
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("state files always serialize")
    }

    /// Full-matrix record of a state (always reloadable).
    pub fn from_density(rho: &DensityOperator) -> Self {
        StateFile::Matrix {
            dim_a: rho.dim_a(),
            dim_b: rho.dim_b(),
            matrix: MatrixEntries::Rows(matrix_to_pairs(rho.matrix())),
        }
    }

    /// Decodes and validates the state.
    pub fn to_density(&self) -> Result<DensityOperator> {
        match self {
            StateFile::Pure { pure } => {
                if pure.len() != 4 {
                    return Err(BatteryError::DimensionMismatch {
                        expected: "4 two-qubit amplitudes".into(),
                        found: format!("{} amplitudes", pure.len()),
                    });
                }
                let amps: Vec<C64> = pure.iter().map(|&[re, im]| C64::new(re, im)).collect();
                let norm_sq: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
                if !norm_sq.is_finite() || (norm_sq - 1.0).abs() > PURE_NORM_TOL {
                    return Err(BatteryError::NotNormalized { norm_sq });
                }
                let norm = norm_sq.sqrt();
                let amps: Vec<C64> = amps.into_iter().map(|a| a / norm).collect();
                DensityOperator::pure(2, 2, &amps)
            }
            StateFile::Matrix {
                dim_a,
                dim_b,
                matrix,
            } => {
                let m = match matrix {
                    MatrixEntries::Rows(rows) => pairs_to_matrix(rows)?,
                    MatrixEntries::Flat(flat) => {
                        let n = dim_a * dim_b;
                        if flat.len() != n * n {
                            return Err(BatteryError::DimensionMismatch {
                                expected: format!("{} entries", n * n),
                                found: format!("{} entries", flat.len()),
                            });
                        }
                        let data = flat.iter().map(|&[re, im]| C64::new(re, im)).collect();
                        ComplexMatrix::from_vec(n, n, data)?
                    }
                };
                if m.as_slice()
                    .iter()
                    .any(|z| !(z.re.is_finite() && z.im.is_finite()))
                {
                    return Err(BatteryError::InvalidInput(
                        "matrix entries must be finite".into(),
                    ));
                }
                DensityOperator::new(*dim_a, *dim_b, m)
            }
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| BatteryError::Io(format!("{}: {e}", path.display())))
}

pub fn load_state(path: &Path) -> Result<DensityOperator> {
    StateFile::from_json(&read(path)?)?.to_density()
}

pub fn load_hamiltonian(path: &Path) -> Result<LocalHamiltonian> {
    HamiltonianSpec::from_json(&read(path)?)?.to_local()
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| BatteryError::Io(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pure_file_decodes_and_renormalizes() {
        let f =
            StateFile::from_json(r#"{"pure": [[0.7071068,0],[0,0],[0,0],[0.7071068,0]]}"#).unwrap();
        let rho = f.to_density().unwrap();
        assert!((rho.matrix().trace().re - 1.0).abs() < 1e-15);
        assert!((rho.matrix()[(0, 3)].re - 0.5).abs() < 1e-12);
    }

    #[test]
    fn unnormalized_pure_file_is_rejected() {
        let f = StateFile::from_json(r#"{"pure": [[1,0],[1,0],[0,0],[0,0]]}"#).unwrap();
        assert!(matches!(
            f.to_density(),
            Err(BatteryError::NotNormalized { .. })
        ));
        let f = StateFile::from_json(r#"{"pure": [[1,0],[0,0]]}"#).unwrap();
        assert!(matches!(
            f.to_density(),
            Err(BatteryError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn matrix_file_round_trips() {
        let rho = DensityOperator::maximally_mixed(2, 2);
        let text = StateFile::from_density(&rho).to_json();
        let back = StateFile::from_json(&text).unwrap().to_density().unwrap();
        assert_eq!(back.matrix(), rho.matrix());
        assert_eq!((back.dim_a(), back.dim_b()), (2, 2));
    }

    #[test]
    fn flat_matrix_is_row_major() {
        let text = r#"{"dim_a":2,"dim_b":1,"matrix":[[0.5,0],[0.5,0],[0.5,0],[0.5,0]]}"#;
        let rho = StateFile::from_json(text).unwrap().to_density().unwrap();
        assert_eq!(rho.matrix()[(0, 1)], C64::new(0.5, 0.0));
    }

    #[test]
    fn invalid_matrices_name_the_violated_invariant() {
        let not_psd = r#"{"dim_a":2,"dim_b":1,"matrix":[[[1.5,0],[0,0]],[[0,0],[-0.5,0]]]}"#;
        assert!(matches!(
            StateFile::from_json(not_psd).unwrap().to_density(),
            Err(BatteryError::NotPositive { .. })
        ));
        let bad_trace = r#"{"dim_a":2,"dim_b":1,"matrix":[[[1,0],[0,0]],[[0,0],[1,0]]]}"#;
        assert!(matches!(
            StateFile::from_json(bad_trace).unwrap().to_density(),
            Err(BatteryError::TraceNotOne { .. })
        ));
        let wrong_dim = r#"{"dim_a":2,"dim_b":2,"matrix":[[[1,0],[0,0]],[[0,0],[0,0]]]}"#;
        assert!(matches!(
            StateFile::from_json(wrong_dim).unwrap().to_density(),
            Err(BatteryError::DimensionMismatch { .. })
        ));
        assert!(StateFile::from_json(r#"{"matrix": 3}"#).is_err());
    }
}
