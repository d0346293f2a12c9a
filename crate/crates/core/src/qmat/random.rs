//! Sampling of Haar-random states and unitaries.

use rand::Rng;
use rand_distr::StandardNormal;

use super::matrix::{ComplexMatrix, C64};
use super::{DensityOperator, UnitaryOperator};

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn ginibre<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix {
    let data = (0..n * n).map(|_| gaussian(rng)).collect();
    ComplexMatrix::from_vec(n, n, data).expect("n > 0")
}

/// Haar-distributed unit vector.
pub fn random_state_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<C64> {
    loop {
        let v: Vec<C64> = (0..dim).map(|_| gaussian(rng)).collect();
        let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

pub fn random_pure_state<R: Rng + ?Sized>(
    dim_a: usize,
    dim_b: usize,
    rng: &mut R,
) -> DensityOperator {
    let v = random_state_vector(dim_a * dim_b, rng);
    DensityOperator::from_trusted(dim_a, dim_b, ComplexMatrix::projector(&v))
}

/// Hilbert-Schmidt ensemble: G G† / Tr(G G†).
pub fn random_density<R: Rng + ?Sized>(dim_a: usize, dim_b: usize, rng: &mut R) -> DensityOperator {
    let g = ginibre(dim_a * dim_b, rng);
    let w = &g * &g.adjoint();
    let tr = w.trace().re;
    let mut m = w.scale_real(1.0 / tr);
    // Exact Hermiticity after scaling.
    let n = m.rows();
    for i in 0..n {
        m[(i, i)] = C64::new(m[(i, i)].re, 0.0);
        for j in (i + 1)..n {
            m[(j, i)] = m[(i, j)].conj();
        }
    }
    DensityOperator::from_trusted(dim_a, dim_b, m)
}

/// Haar unitary: modified Gram-Schmidt on a Ginibre matrix, which leaves the
/// implied triangular factor with a positive real diagonal.
pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> UnitaryOperator {
    loop {
        let g = ginibre(dim, rng);
        let mut cols: Vec<Vec<C64>> = (0..dim).map(|k| g.column(k)).collect();
        let mut ok = true;
        for k in 0..dim {
            for j in 0..k {
                let (head, tail) = cols.split_at_mut(k);
                let qj = &head[j];
                let proj: C64 = qj
                    .iter()
                    .zip(tail[0].iter())
                    .map(|(a, b)| a.conj() * b)
                    .sum();
                for (x, q) in tail[0].iter_mut().zip(qj) {
                    *x -= proj * q;
                }
            }
            let norm = cols[k].iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            if norm < 1e-10 {
                ok = false;
                break;
            }
            for x in cols[k].iter_mut() {
                *x /= norm;
            }
        }
        if ok {
            let mut u = ComplexMatrix::zeros(dim, dim);
            for (k, col) in cols.iter().enumerate() {
                u.set_column(k, col);
            }
            return UnitaryOperator::from_trusted(u);
        }
    }
}

/// U_A ⊗ U_B with independent Haar factors.
pub fn random_local_unitary<R: Rng + ?Sized>(
    dim_a: usize,
    dim_b: usize,
    rng: &mut R,
) -> UnitaryOperator {
    let ua = random_unitary(dim_a, rng);
    let ub = random_unitary(dim_b, rng);
    ua.kron(&ub)
}

/// Gaussian Hermitian matrix, for solver tests.
pub fn random_hermitian_matrix<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix {
    let g = ginibre(n, rng);
    (&g + &g.adjoint()).scale_real(0.5)
}
