//! Cyclic Jacobi eigensolver for small Hermitian matrices.

use std::cmp::Ordering;

use super::matrix::{ComplexMatrix, C64, ZERO};
use super::{HermitianOperator, HERMITIAN_TOL};
use crate::error::{BatteryError, Result};

const MAX_SWEEPS: usize = 64;

/// Eigenvalues closer than this are treated as one degenerate level when ordering.
pub const DEGENERACY_TOL: f64 = 1e-12;

/// Components below this modulus count as zero for the phase convention.
const PHASE_ZERO_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EigenOrder {
    Ascending,
    Descending,
}

/// Sorted eigenvalues with the matching orthonormal eigenvectors as columns.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
    pub order: EigenOrder,
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn vector(&self, k: usize) -> Vec<C64> {
        self.vectors.column(k)
    }

    /// V diag(values) V†.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let n = self.dim();
        let mut out = ComplexMatrix::zeros(n, n);
        for k in 0..n {
            let v = self.vectors.column(k);
            let lambda = self.values[k];
            for i in 0..n {
                let vi = v[i] * lambda;
                for j in 0..n {
                    out[(i, j)] += vi * v[j].conj();
                }
            }
        }
        out
    }

    pub fn reordered(&self, order: EigenOrder) -> Spectrum {
        if order == self.order {
            return self.clone();
        }
        sorted_spectrum(self.values.clone(), self.vectors.clone(), order)
    }
}

pub fn eig_hermitian(h: &HermitianOperator, order: EigenOrder) -> Spectrum {
    let (values, vectors) = jacobi(h.matrix());
    sorted_spectrum(values, vectors, order)
}

/// Eigendecomposition of a raw matrix, checking Hermiticity first.
pub fn eigh(m: &ComplexMatrix, order: EigenOrder) -> Result<Spectrum> {
    let dev = m.hermitian_deviation();
    if dev > HERMITIAN_TOL * m.max_abs().max(1.0) {
        return Err(BatteryError::NotHermitian { deviation: dev });
    }
    let (values, vectors) = jacobi(m);
    Ok(sorted_spectrum(values, vectors, order))
}

/// Eigenvalues only, ascending.
pub fn eigenvalues_hermitian(m: &ComplexMatrix) -> Vec<f64> {
    let (mut values, _) = jacobi(m);
    values.sort_by(f64::total_cmp);
    values
}

fn jacobi(m: &ComplexMatrix) -> (Vec<f64>, ComplexMatrix) {
    let n = m.rows();
    let mut a = m.clone();
    // Work on the Hermitian part so round-off asymmetry cannot accumulate.
    for i in 0..n {
        a[(i, i)] = C64::new(a[(i, i)].re, 0.0);
        for j in (i + 1)..n {
            let avg = (a[(i, j)] + a[(j, i)].conj()) * 0.5;
            a[(i, j)] = avg;
            a[(j, i)] = avg.conj();
        }
    }
    let mut v = ComplexMatrix::identity(n);
    let total: f64 = a.as_slice().iter().map(|x| x.norm_sqr()).sum();

    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)].norm_sqr();
            }
        }
        if off <= 1e-34 * total || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let mag = apq.norm();
                if mag == 0.0 {
                    continue;
                }
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                // Skip pivots already negligible against both diagonal entries.
                if mag < 1e-300 || (app.abs() + mag == app.abs() && aqq.abs() + mag == aqq.abs()) {
                    a[(p, q)] = ZERO;
                    a[(q, p)] = ZERO;
                    continue;
                }
                let phase = apq / mag;
                let theta = (aqq - app) / (2.0 * mag);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // G = diag(1, conj(phase)) * [[c, s], [-s, c]] on the (p, q) plane.
                let g_pp = C64::new(c, 0.0);
                let g_pq = C64::new(s, 0.0);
                let g_qp = phase.conj() * (-s);
                let g_qq = phase.conj() * c;

                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * g_pp + akq * g_qp;
                    a[(k, q)] = akp * g_pq + akq * g_qq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = g_pp.conj() * apk + g_qp.conj() * aqk;
                    a[(q, k)] = g_pq.conj() * apk + g_qq.conj() * aqk;
                }
                a[(p, q)] = ZERO;
                a[(q, p)] = ZERO;
                a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
                a[(q, q)] = C64::new(a[(q, q)].re, 0.0);
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * g_pp + vkq * g_qp;
                    v[(k, q)] = vkp * g_pq + vkq * g_qq;
                }
            }
        }
    }
    let values = (0..n).map(|i| a[(i, i)].re).collect();
    (values, v)
}

fn leading_component(v: &[C64]) -> Option<C64> {
    v.iter().copied().find(|x| x.norm() > PHASE_ZERO_TOL)
}

/// Sorts by eigenvalue; within a degenerate level, vectors with larger leading
/// component come first. Every vector is rotated so its leading component is
/// real positive.
fn sorted_spectrum(values: Vec<f64>, vectors: ComplexMatrix, order: EigenOrder) -> Spectrum {
    let n = values.len();
    let mut cols: Vec<Vec<C64>> = (0..n).map(|k| vectors.column(k)).collect();
    for col in &mut cols {
        if let Some(lead) = leading_component(col) {
            let fix = lead.conj() / lead.norm();
            for x in col.iter_mut() {
                *x *= fix;
            }
        }
    }

    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| {
        let ord = values[i].total_cmp(&values[j]);
        match order {
            EigenOrder::Ascending => ord,
            EigenOrder::Descending => ord.reverse(),
        }
    });

    // Reorder inside each run of (numerically) equal eigenvalues.
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (values[idx[end]] - values[idx[end - 1]]).abs() <= DEGENERACY_TOL {
            end += 1;
        }
        if end - start > 1 {
            idx[start..end].sort_by(|&i, &j| {
                let mi = leading_component(&cols[i]).map_or(0.0, |c| c.norm());
                let mj = leading_component(&cols[j]).map_or(0.0, |c| c.norm());
                mj.partial_cmp(&mi)
                    .unwrap_or(Ordering::Equal)
                    .then(i.cmp(&j))
            });
        }
        start = end;
    }

    let mut out = ComplexMatrix::zeros(n, n);
    let mut sorted_values = Vec::with_capacity(n);
    for (k, &i) in idx.iter().enumerate() {
        out.set_column(k, &cols[i]);
        sorted_values.push(values[i]);
    }
    Spectrum {
        values: sorted_values,
        vectors: out,
        order,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmat::random_hermitian_matrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn diagonal_input_sorts() {
        let h =
            HermitianOperator::new(ComplexMatrix::from_real_diag(&[3.0, 1.0, -1.0, -3.0])).unwrap();
        let asc = eig_hermitian(&h, EigenOrder::Ascending);
        assert_eq!(asc.values, vec![-3.0, -1.0, 1.0, 3.0]);
        let desc = eig_hermitian(&h, EigenOrder::Descending);
        assert_eq!(desc.values, vec![3.0, 1.0, -1.0, -3.0]);
        // Lowest level of diag(3,1,-1,-3) is |11>.
        assert!((asc.vector(0)[3] - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn pauli_x_vectors() {
        let sx =
            ComplexMatrix::from_rows(&[vec![c(0., 0.), c(1., 0.)], vec![c(1., 0.), c(0., 0.)]])
                .unwrap();
        let s = eigh(&sx, EigenOrder::Ascending).unwrap();
        assert!((s.values[0] + 1.0).abs() < 1e-14);
        assert!((s.values[1] - 1.0).abs() < 1e-14);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let minus = s.vector(0);
        let plus = s.vector(1);
        assert!((minus[0] - c(r, 0.)).norm() < 1e-14 && (minus[1] - c(-r, 0.)).norm() < 1e-14);
        assert!((plus[0] - c(r, 0.)).norm() < 1e-14 && (plus[1] - c(r, 0.)).norm() < 1e-14);
    }

    #[test]
    fn rank_one_projector_on_11() {
        let p = ComplexMatrix::projector(&[c(0., 0.), c(0., 0.), c(0., 0.), c(1., 0.)]);
        let s = eigh(&p, EigenOrder::Descending).unwrap();
        assert!((s.values[0] - 1.0).abs() < 1e-15);
        assert!(s.values[1..].iter().all(|v| v.abs() < 1e-15));
        assert!((s.vector(0)[3] - c(1., 0.)).norm() < 1e-15);
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = ComplexMatrix::from_rows(&[vec![c(0., 0.), c(1., 0.)], vec![c(0., 0.), c(0., 0.)]])
            .unwrap();
        assert!(matches!(
            eigh(&m, EigenOrder::Ascending),
            Err(BatteryError::NotHermitian { .. })
        ));
    }

    #[test]
    fn degenerate_levels_are_deterministic() {
        let h = ComplexMatrix::from_real_diag(&[1.0, 0.0, 1.0]);
        let s = eigh(&h, EigenOrder::Descending).unwrap();
        assert_eq!(s.values, vec![1.0, 1.0, 0.0]);
        // Both unit vectors have leading modulus 1; the tie falls back to Jacobi order.
        let again = eigh(&h, EigenOrder::Descending).unwrap();
        assert_eq!(s.vectors, again.vectors);
    }

    #[test]
    fn reconstruction_on_random_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [2, 3, 4, 6, 9, 16] {
            for _ in 0..20 {
                let m = random_hermitian_matrix(n, &mut rng);
                let s = eigh(&m, EigenOrder::Ascending).unwrap();
                assert!(s.reconstruct().max_abs_diff(&m) < 1e-10, "n = {n}");
                let vtv = &s.vectors.adjoint() * &s.vectors;
                assert!(vtv.max_abs_diff(&ComplexMatrix::identity(n)) < 1e-12);
                assert!(s.values.windows(2).all(|w| w[0] <= w[1]));
            }
        }
    }
}
