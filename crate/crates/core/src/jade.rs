//! Jacobi-rotation joint approximate diagonalization (the JADE engine),
//! applied directly to a set of Hermitian matrices.
//!
//! Each sweep visits the pairs `(p, q)`, `p < q`, in lexicographic order.
//! For a pair, every matrix contributes the real 3-vector
//! `(a_pp - a_qq, 2 Re a_pq, 2 Im a_pq)`; the leading eigenvector of the sum of
//! their outer products fixes the complex Givens rotation that maximizes the
//! diagonal energy of the `(p, q)` sub-blocks.

use nalgebra::{Matrix3, SymmetricEigen};

use crate::covariance::HermitianCovariance;
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};
use crate::unitary::{project, UnitaryMatrix, UNITARY_TOL};

#[derive(Debug, Clone, PartialEq)]
pub struct JacobiConfig {
    pub max_sweeps: usize,
    /// Rotations with `|s|` below this are skipped.
    pub rot_threshold: f64,
    /// Stop when a sweep lowers the off-diagonal energy by less than this
    /// fraction.
    pub off_tol: f64,
}

impl Default for JacobiConfig {
    fn default() -> Self {
        Self {
            max_sweeps: 100,
            rot_threshold: 1e-12,
            off_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone)]
pub struct JadeResult {
    pub basis: UnitaryMatrix,
    /// `sum_k ||off(V^H S_k V)||_F^2` before the first sweep and after each one.
    pub off_energy: Vec<f64>,
    pub sweeps: usize,
}

/// Sum of squared moduli of off-diagonal entries over all matrices.
pub fn off_diagonal_energy(mats: &[CMatrix]) -> f64 {
    mats.iter()
        .map(|a| {
            let n = a.nrows();
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        s += a[(i, j)].norm_sqr();
                    }
                }
            }
            s
        })
        .sum()
}

pub fn jade_diagonalize(covariances: &[HermitianCovariance], config: &JacobiConfig) -> Result<UnitaryMatrix> {
    Ok(jade_diagonalize_traced(covariances, config)?.basis)
}

pub fn jade_diagonalize_traced(covariances: &[HermitianCovariance], config: &JacobiConfig) -> Result<JadeResult> {
    if config.max_sweeps < 1 {
        return Err(Error::InvalidArgument("max_sweeps must be at least 1".into()));
    }
    let dim = covariances
        .first()
        .map(HermitianCovariance::dim)
        .ok_or_else(|| Error::InvalidArgument("no covariances to diagonalize".into()))?;
    if let Some(bad) = covariances.iter().find(|c| c.dim() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: bad.dim(),
        });
    }
    let mut mats: Vec<CMatrix> = covariances.iter().map(|c| c.matrix().clone()).collect();
    let mut v = CMatrix::identity(dim, dim);
    let mut off_energy = vec![off_diagonal_energy(&mats)];
    let mut sweeps = 0;

    for _ in 0..config.max_sweeps {
        sweeps += 1;
        let mut rotated = false;
        for p in 0..dim {
            for q in p + 1..dim {
                let (c, s) = pair_rotation(&mats, p, q);
                if s.norm() <= config.rot_threshold {
                    continue;
                }
                rotated = true;
                apply_rotation(&mut mats, &mut v, p, q, c, s);
            }
        }
        let before = *off_energy.last().unwrap();
        let after = off_diagonal_energy(&mats);
        off_energy.push(after);
        if !rotated || before - after <= config.off_tol * before {
            break;
        }
    }

    let basis = match UnitaryMatrix::new(v.clone()) {
        Ok(u) => u,
        // rounding accumulated over many sweeps; re-orthonormalize
        Err(Error::NotUnitary(d)) if d < 1e3 * UNITARY_TOL => project(&v)?,
        Err(e) => return Err(e),
    };
    Ok(JadeResult {
        basis,
        off_energy,
        sweeps,
    })
}

/// Rotation `G = [[c, -conj(s)], [s, c]]` for the pair `(p, q)`.
fn pair_rotation(mats: &[CMatrix], p: usize, q: usize) -> (f64, C64) {
    let mut g = Matrix3::<f64>::zeros();
    for a in mats {
        let h = [
            a[(p, p)].re - a[(q, q)].re,
            a[(p, q)].re + a[(q, p)].re,
            a[(p, q)].im - a[(q, p)].im,
        ];
        for i in 0..3 {
            for j in 0..3 {
                g[(i, j)] += h[i] * h[j];
            }
        }
    }
    // pair already diagonal in every matrix: the leading eigenvector is
    // arbitrary, so do not rotate
    if g[(1, 1)] + g[(2, 2)] <= f64::MIN_POSITIVE {
        return (1.0, C64::new(0.0, 0.0));
    }
    let eig = SymmetricEigen::new(g);
    let lead = (0..3)
        .max_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]))
        .unwrap();
    let mut x = eig.eigenvectors.column(lead).into_owned();
    if x[0] < 0.0 {
        x = -x;
    }
    let c = (0.5 + 0.5 * x[0]).sqrt();
    let s = C64::new(x[1], -x[2]) / (2.0 * c);
    (c, s)
}

fn apply_rotation(mats: &mut [CMatrix], v: &mut CMatrix, p: usize, q: usize, c: f64, s: C64) {
    let n = v.nrows();
    let c = C64::new(c, 0.0);
    // X <- X G on columns p, q
    let rotate_cols = |x: &mut CMatrix| {
        for r in 0..n {
            let (xp, xq) = (x[(r, p)], x[(r, q)]);
            x[(r, p)] = c * xp + s * xq;
            x[(r, q)] = -s.conj() * xp + c * xq;
        }
    };
    rotate_cols(v);
    for a in mats.iter_mut() {
        rotate_cols(a);
        // A <- G^H A on rows p, q
        for col in 0..n {
            let (ap, aq) = (a[(p, col)], a[(q, col)]);
            a[(p, col)] = c * ap + s.conj() * aq;
            a[(q, col)] = -s * ap + c * aq;
        }
    }
}
