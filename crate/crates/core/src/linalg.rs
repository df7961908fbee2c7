//! Small dense complex helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Eigendecomposition of a Hermitian matrix with eigenvalues sorted in
/// descending order. Column `i` of the returned matrix pairs with value `i`.
pub fn hermitian_eigh(a: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = a.nrows();
    let eig = SymmetricEigen::new(hermitian_part(a));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Eigenvalues of a Hermitian matrix, descending.
pub fn hermitian_eigenvalues(a: &CMatrix) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(hermitian_part(a))
        .eigenvalues
        .iter()
        .copied()
        .collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// `(A + A^H) / 2`
pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()).scale(0.5)
}

pub fn max_hermitian_asymmetry(a: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn trace_re(a: &CMatrix) -> f64 {
    a.diagonal().iter().map(|z| z.re).sum()
}

pub fn frobenius(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Real trace inner product `Re tr(A^H B)`.
pub fn real_inner(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

pub fn is_finite(a: &CMatrix) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn diag_matrix(values: &[f64]) -> CMatrix {
    let n = values.len();
    CMatrix::from_fn(n, n, |i, j| {
        if i == j {
            C64::new(values[i], 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}
