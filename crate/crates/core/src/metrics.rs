//! Joint-diagonalization quality and related diagnostics.

use serde::{Deserialize, Serialize};

use crate::covariance::HermitianCovariance;
use crate::error::{Error, Result};
use crate::linalg::{frobenius, CMatrix, C64};
use crate::objective::ObjectiveContext;
use crate::pgd::SolveResult;
use crate::unitary::UnitaryMatrix;

/// Slack on majorization partial sums.
pub const MAJORIZATION_TOL: f64 = 1e-10;
/// Allowed mismatch between the totals of two vectors compared by
/// [`majorization_check`].
pub const MAJORIZATION_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub eta: f64,
    /// `||diag(U^H S_k U)||_2 / ||S_k||_F` per covariance.
    pub per_k_terms: Vec<f64>,
    pub cost_gap: Option<f64>,
}

/// `eta(U) = 1 - mean_k ||diag(U^H S_k U)||_2 / ||S_k||_F`; zero iff `U`
/// diagonalizes every `S_k`.
pub fn diag_metric(u: &UnitaryMatrix, covariances: &[HermitianCovariance]) -> Result<MetricReport> {
    if covariances.is_empty() {
        return Err(Error::InvalidArgument("no covariances to evaluate".into()));
    }
    let um = u.matrix();
    let mut per_k_terms = Vec::with_capacity(covariances.len());
    for (k, sigma) in covariances.iter().enumerate() {
        if sigma.dim() != u.dim() {
            return Err(Error::DimensionMismatch {
                expected: u.dim(),
                found: sigma.dim(),
            });
        }
        let denom = frobenius(sigma.matrix());
        if denom == 0.0 {
            return Err(Error::ZeroCovariance(k));
        }
        let w = sigma.matrix() * um;
        let diag_norm = (0..u.dim())
            .map(|m| um.column(m).dotc(&w.column(m)).norm_sqr())
            .sum::<f64>()
            .sqrt();
        per_k_terms.push((diag_norm / denom).min(1.0));
    }
    let mean = per_k_terms.iter().sum::<f64>() / per_k_terms.len() as f64;
    Ok(MetricReport {
        eta: 1.0 - mean,
        per_k_terms,
        cost_gap: None,
    })
}

pub fn eta(u: &UnitaryMatrix, covariances: &[HermitianCovariance]) -> Result<f64> {
    Ok(diag_metric(u, covariances)?.eta)
}

/// Whether `x` majorizes `y`: equal totals and every descending partial sum
/// of `x` at least that of `y`.
pub fn majorization_check(x: &[f64], y: &[f64]) -> Result<bool> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    let (sx, sy): (f64, f64) = (x.iter().sum(), y.iter().sum());
    if (sx - sy).abs() > MAJORIZATION_SUM_TOL {
        return Err(Error::MajorizationUndefined(sx, sy));
    }
    let descending = |v: &[f64]| {
        let mut v = v.to_vec();
        v.sort_by(|a, b| b.total_cmp(a));
        v
    };
    let (xs, ys) = (descending(x), descending(y));
    let (mut px, mut py) = (0.0, 0.0);
    for (a, b) in xs.iter().zip(&ys) {
        px += a;
        py += b;
        if px < py - MAJORIZATION_TOL {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Unitary DFT matrix `F[m][n] = exp(j 2 pi m n / M) / sqrt(M)`.
pub fn fourier_basis(dim: usize) -> UnitaryMatrix {
    let scale = 1.0 / (dim as f64).sqrt();
    let m = CMatrix::from_fn(dim, dim, |r, c| {
        // reduce the exponent mod M before scaling so large indices stay exact
        let e = (r * c) % dim;
        C64::from_polar(scale, 2.0 * std::f64::consts::PI * e as f64 / dim as f64)
    });
    UnitaryMatrix::new(m).expect("DFT matrix is unitary")
}

/// `cost(result.basis) - cost(reference)` on `ctx`.
pub fn cost_gap(result: &SolveResult, reference: &UnitaryMatrix, ctx: &ObjectiveContext) -> Result<f64> {
    Ok(ctx.cost(result.basis.matrix())? - ctx.cost(reference.matrix())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::{gen_independent_ensemble, gen_joint_ensemble};
    use crate::linalg::hermitian_eigh;
    use crate::unitary::random_unitary;

    #[test]
    fn eta_zero_at_common_basis() {
        for seed in 0..5 {
            let e = gen_joint_ensemble(8, 4, seed).unwrap();
            let r = diag_metric(e.common_basis.as_ref().unwrap(), &e.covariances).unwrap();
            assert!(r.eta.abs() <= 1e-12, "{}", r.eta);
            let mean: f64 = r.per_k_terms.iter().sum::<f64>() / 4.0;
            assert!((r.eta - (1.0 - mean)).abs() <= 1e-12);
        }
    }

    #[test]
    fn eta_zero_at_single_eigenbasis() {
        let e = gen_independent_ensemble(7, 1, 3).unwrap();
        let (_, v) = hermitian_eigh(e.covariances[0].matrix());
        let u = UnitaryMatrix::new(v).unwrap();
        assert!(eta(&u, &e.covariances).unwrap().abs() <= 1e-10);
    }

    #[test]
    fn eta_rank_one_closed_form() {
        let half = C64::new(0.5, 0.0);
        let sigma = HermitianCovariance::new(CMatrix::from_element(2, 2, half)).unwrap();
        let got = eta(&UnitaryMatrix::identity(2), &[sigma]).unwrap();
        assert!((got - (1.0 - 0.5f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn eta_rejects_zero_covariance() {
        let z = HermitianCovariance::new(CMatrix::zeros(2, 2)).unwrap();
        assert!(matches!(
            eta(&UnitaryMatrix::identity(2), &[z]),
            Err(Error::ZeroCovariance(0))
        ));
    }

    #[test]
    fn eta_invariant_under_permutation_and_phase() {
        let e = gen_independent_ensemble(6, 3, 2).unwrap();
        let u = random_unitary(6, 4);
        let v = u.permute_and_rephase(&[5, 3, 1, 0, 2, 4], &[1.0, 2.0, 3.0, -1.0, 0.0, 0.7]);
        let (a, b) = (eta(&u, &e.covariances).unwrap(), eta(&v, &e.covariances).unwrap());
        assert!((a - b).abs() <= 1e-12);
        assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn majorization_textbook() {
        assert!(majorization_check(&[3.0, 1.0], &[2.0, 2.0]).unwrap());
        assert!(!majorization_check(&[2.0, 2.0], &[3.0, 1.0]).unwrap());
        assert!(majorization_check(&[0.2, 0.5, 0.3], &[0.2, 0.5, 0.3]).unwrap());
        assert!(majorization_check(&[1.0, 0.0, 0.0], &[0.2, 0.5, 0.3]).unwrap());
        assert!(matches!(
            majorization_check(&[1.0, 1.0], &[1.0, 2.0]),
            Err(Error::MajorizationUndefined(..))
        ));
    }

    #[test]
    fn fourier_basis_entries() {
        assert_eq!(fourier_basis(1).matrix()[(0, 0)], C64::new(1.0, 0.0));
        for m in 1..=64 {
            assert!(fourier_basis(m).defect() <= 1e-12, "M={m}");
        }
        let f = fourier_basis(4);
        assert!((f.matrix()[(1, 1)] - C64::new(0.0, 0.5)).norm() < 1e-15);
    }
}
