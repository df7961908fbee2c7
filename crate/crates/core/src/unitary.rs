//! The unitary group: nearest-unitary projection, random draws and
//! diagnostics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{frobenius, hermitian_eigh, hermitian_part, is_finite, CMatrix, C64};
use crate::rng::{complex_normal_matrix, rng_from_seed};

/// Tolerance on `||U^H U - I||_F` accepted at construction.
pub const UNITARY_TOL: f64 = 1e-10;

/// A square complex matrix with orthonormal columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "crate::io::MatrixRepr", into = "crate::io::MatrixRepr")]
pub struct UnitaryMatrix(CMatrix);

impl UnitaryMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        if !is_finite(&m) {
            return Err(Error::NonFinite);
        }
        let defect = unitarity_defect(&m);
        if defect > UNITARY_TOL {
            return Err(Error::NotUnitary(defect));
        }
        Ok(Self(m))
    }

    pub fn identity(dim: usize) -> Self {
        Self(CMatrix::identity(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn column(&self, m: usize) -> crate::linalg::CVector {
        self.0.column(m).into_owned()
    }

    pub fn defect(&self) -> f64 {
        unitarity_defect(&self.0)
    }

    /// Right-multiplies by a permutation and per-column phases:
    /// column `j` of the result is `exp(i phases[j]) * u_{perm[j]}`.
    pub fn permute_and_rephase(&self, perm: &[usize], phases: &[f64]) -> Self {
        let n = self.dim();
        let m = CMatrix::from_fn(n, n, |r, c| self.0[(r, perm[c])] * C64::from_polar(1.0, phases[c]));
        Self(m)
    }
}

impl AsRef<CMatrix> for UnitaryMatrix {
    fn as_ref(&self) -> &CMatrix {
        &self.0
    }
}

/// `||U^H U - I||_F`
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    let n = u.ncols();
    frobenius(&(u.adjoint() * u - CMatrix::identity(n, n)))
}

/// Frobenius-nearest unitary matrix: with `V = S D T^H`, returns `S T^H`.
///
/// For singular `V` the nearest unitary is not unique; the SVD-induced
/// choice is returned.
pub fn project(v: &CMatrix) -> Result<UnitaryMatrix> {
    if v.nrows() != v.ncols() {
        return Err(Error::DimensionMismatch {
            expected: v.nrows(),
            found: v.ncols(),
        });
    }
    if !is_finite(v) {
        return Err(Error::NonFinite);
    }
    let svd = v.clone().svd(true, true);
    let s = svd.u.expect("left singular vectors requested");
    let t_h = svd.v_t.expect("right singular vectors requested");
    Ok(UnitaryMatrix(s * t_h))
}

/// Eigenvectors of the Hermitian part of an i.i.d. complex Gaussian matrix.
pub fn random_unitary(dim: usize, seed: u64) -> UnitaryMatrix {
    let mut rng = rng_from_seed(seed);
    let g = complex_normal_matrix(&mut rng, dim, dim);
    let (_, vectors) = hermitian_eigh(&hermitian_part(&g));
    // SymmetricEigen output is orthonormal to working precision; one projection
    // pass removes any residual drift for larger sizes.
    if unitarity_defect(&vectors) <= 1e-13 {
        UnitaryMatrix(vectors)
    } else {
        project(&vectors).expect("eigenvectors are finite")
    }
}

/// Greedily matches columns of `u` to those of `reference` by largest
/// `|<r_j, u_i>|` and rotates each matched column's phase onto its partner.
/// Diagnostics only: the objective never depends on this alignment.
pub fn align_to(u: &UnitaryMatrix, reference: &UnitaryMatrix) -> UnitaryMatrix {
    let n = u.dim();
    let overlap = reference.matrix().adjoint() * u.matrix();
    let mut pairs = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            pairs.push((j, i, overlap[(j, i)].norm()));
        }
    }
    pairs.sort_by(|a, b| b.2.total_cmp(&a.2));
    let mut perm = vec![0; n];
    let mut phases = vec![0.0; n];
    let mut ref_taken = vec![false; n];
    let mut col_taken = vec![false; n];
    for (j, i, _) in pairs {
        if ref_taken[j] || col_taken[i] {
            continue;
        }
        ref_taken[j] = true;
        col_taken[i] = true;
        perm[j] = i;
        phases[j] = -overlap[(j, i)].arg();
    }
    u.permute_and_rephase(&perm, &phases)
}
