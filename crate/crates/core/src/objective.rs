//! The reduced maximum-likelihood cost `f(U) = sum_{m,k} log(u_m^H S_k u_m)`
//! with its Wirtinger gradient, per-column Hessian blocks and curvature
//! bound.
//!
//! Every routine accepts an arbitrary square matrix, not just a unitary one,
//! so that finite-difference checks can step off the manifold.

use crate::covariance::{EigenvalueVector, HermitianCovariance};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector, C64};
use nalgebra::DMatrix;

/// Default floor on quadratic forms, relative to each covariance's trace.
pub const DEFAULT_EPS_REL: f64 = 1e-14;

/// The sample covariances `S_k` entering the cost.
#[derive(Debug, Clone)]
pub struct ObjectiveContext {
    covariances: Vec<CMatrix>,
    // All S_k stacked vertically, split into real and imaginary parts, so the
    // products S_k U run as real matrix multiplications.
    stacked_re: DMatrix<f64>,
    stacked_im: DMatrix<f64>,
    op_norms: Vec<f64>,
    floors: Vec<f64>,
    dim: usize,
}

/// Everything derived from the products `S_k U` at one point: the cost and
/// the quadratic forms `q[k][m] = Re(u_m^H S_k u_m)`.
#[derive(Debug, Clone)]
pub(crate) struct Evaluation {
    pub(crate) cost: f64,
    w_re: DMatrix<f64>,
    w_im: DMatrix<f64>,
    q: Vec<Vec<f64>>,
}

impl ObjectiveContext {
    pub fn new(covariances: &[HermitianCovariance]) -> Result<Self> {
        Self::with_eps(covariances, DEFAULT_EPS_REL)
    }

    pub fn with_eps(covariances: &[HermitianCovariance], eps_rel: f64) -> Result<Self> {
        let dim = covariances
            .first()
            .map(HermitianCovariance::dim)
            .ok_or_else(|| Error::InvalidArgument("objective needs at least one covariance".into()))?;
        if let Some(bad) = covariances.iter().find(|c| c.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad.dim(),
            });
        }
        let k = covariances.len();
        let stacked = |part: fn(&C64) -> f64| {
            DMatrix::from_fn(k * dim, dim, |r, c| part(&covariances[r / dim].matrix()[(r % dim, c)]))
        };
        Ok(Self {
            covariances: covariances.iter().map(|c| c.matrix().clone()).collect(),
            stacked_re: stacked(|z| z.re),
            stacked_im: stacked(|z| z.im),
            op_norms: covariances
                .iter()
                .map(|c| c.eigenvalues().first().copied().unwrap_or(0.0).max(0.0))
                .collect(),
            floors: covariances.iter().map(|c| eps_rel * c.trace().abs()).collect(),
            dim,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.covariances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.covariances.is_empty()
    }

    pub fn covariance(&self, k: usize) -> &CMatrix {
        &self.covariances[k]
    }

    fn check_dim(&self, u: &CMatrix) -> Result<()> {
        if u.nrows() != self.dim || u.ncols() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: if u.nrows() != self.dim { u.nrows() } else { u.ncols() },
            });
        }
        Ok(())
    }

    pub(crate) fn evaluate(&self, u: &CMatrix) -> Result<Evaluation> {
        self.check_dim(u)?;
        let n = self.dim;
        let u_re = u.map(|z| z.re);
        let u_im = u.map(|z| z.im);
        let w_re = &self.stacked_re * &u_re - &self.stacked_im * &u_im;
        let w_im = &self.stacked_re * &u_im + &self.stacked_im * &u_re;
        let mut q = Vec::with_capacity(self.len());
        let mut cost = 0.0;
        for k in 0..self.len() {
            let mut row = Vec::with_capacity(n);
            for m in 0..n {
                let (mut re, mut im) = (0.0, 0.0);
                for i in 0..n {
                    let (wr, wi) = (w_re[(k * n + i, m)], w_im[(k * n + i, m)]);
                    re += u_re[(i, m)] * wr + u_im[(i, m)] * wi;
                    im += u_re[(i, m)] * wi - u_im[(i, m)] * wr;
                }
                debug_assert!(
                    im.abs() <= 1e-10 * re.abs().max(1.0),
                    "quadratic form has imaginary part {im}"
                );
                if !(re > self.floors[k]) {
                    return Err(Error::SingularDirection {
                        index: k,
                        column: m,
                        value: re,
                        floor: self.floors[k],
                    });
                }
                cost += re.ln();
                row.push(re);
            }
            q.push(row);
        }
        Ok(Evaluation { cost, w_re, w_im, q })
    }

    pub(crate) fn gradient_at(&self, e: &Evaluation) -> CMatrix {
        let n = self.dim;
        CMatrix::from_fn(n, n, |i, m| {
            let (mut re, mut im) = (0.0, 0.0);
            for (k, q) in e.q.iter().enumerate() {
                re += e.w_re[(k * n + i, m)] / q[m];
                im += e.w_im[(k * n + i, m)] / q[m];
            }
            C64::new(re, im)
        })
    }

    pub(crate) fn lipschitz_at(&self, e: &Evaluation) -> f64 {
        let n = self.dim;
        let mut worst = 0.0_f64;
        for m in 0..n {
            let mut spectral = 0.0;
            let mut rank_one = 0.0;
            for (k, q) in e.q.iter().enumerate() {
                let rows = k * n..(k + 1) * n;
                let w2: f64 = rows.map(|r| e.w_re[(r, m)].powi(2) + e.w_im[(r, m)].powi(2)).sum();
                spectral += self.op_norms[k] / q[m];
                rank_one += w2 / (q[m] * q[m]);
            }
            worst = worst.max(spectral.max(rank_one));
        }
        worst
    }

    /// `sum_{m,k} log(u_m^H S_k u_m)`, summed k-major then m.
    pub fn cost(&self, u: &CMatrix) -> Result<f64> {
        Ok(self.evaluate(u)?.cost)
    }

    /// `df/dU^*`: column `m` is `sum_k S_k u_m / (u_m^H S_k u_m)`.
    ///
    /// The real gradient with respect to `Re U` and `Im U` is twice this.
    pub fn gradient(&self, u: &CMatrix) -> Result<CMatrix> {
        Ok(self.cost_and_gradient(u)?.1)
    }

    pub fn cost_and_gradient(&self, u: &CMatrix) -> Result<(f64, CMatrix)> {
        let e = self.evaluate(u)?;
        Ok((e.cost, self.gradient_at(&e)))
    }

    /// The two PSD terms of Hessian block `m`:
    /// `(sum_k S_k^T / q_k, sum_k (S_k u u^H S_k)^T / q_k^2)`.
    pub fn hessian_terms(&self, u: &CMatrix, m: usize) -> Result<(CMatrix, CMatrix)> {
        self.check_dim(u)?;
        if m >= self.dim {
            return Err(Error::InvalidArgument(format!(
                "column index {m} out of range for dimension {}",
                self.dim
            )));
        }
        let col = u.column(m).into_owned();
        let mut curvature = CMatrix::zeros(self.dim, self.dim);
        let mut correction = CMatrix::zeros(self.dim, self.dim);
        for (k, sigma) in self.covariances.iter().enumerate() {
            let w: CVector = sigma * &col;
            let q = col.dotc(&w).re;
            if !(q > self.floors[k]) {
                return Err(Error::SingularDirection {
                    index: k,
                    column: m,
                    value: q,
                    floor: self.floors[k],
                });
            }
            curvature += sigma.transpose().unscale(q);
            // (w w^H)^T = conj(w) w^T
            correction += (w.conjugate() * w.transpose()).unscale(q * q);
        }
        Ok((curvature, correction))
    }

    /// Hessian block `m`, i.e. `d^2 f / du_m du_m^*` (rows indexed by `u`,
    /// columns by `u^*`).
    pub fn hessian_block(&self, u: &CMatrix, m: usize) -> Result<CMatrix> {
        let (a, b) = self.hessian_terms(u, m)?;
        Ok(a - b)
    }

    /// `max_m max{ sum_k ||S_k||_op / q_km, sum_k ||S_k u_m||^2 / q_km^2 }`:
    /// an upper bound on every Hessian block's operator norm at `u`.
    pub fn lipschitz_estimate(&self, u: &CMatrix) -> Result<f64> {
        Ok(self.lipschitz_at(&self.evaluate(u)?))
    }

    /// Closed-form eigenvalue estimates `lambda_{k,m} = u_m^H S_k u_m`.
    pub fn optimal_lambdas(&self, u: &CMatrix) -> Result<Vec<EigenvalueVector>> {
        let forms = self.evaluate(u)?;
        forms.q.into_iter().map(EigenvalueVector::new).collect()
    }

    /// Per-covariance vectors of quadratic forms at `u`.
    pub fn quadratic_forms(&self, u: &CMatrix) -> Result<Vec<Vec<f64>>> {
        Ok(self.evaluate(u)?.q)
    }

    /// The cost before eigenvalue elimination:
    /// `sum_{m,k} log(lambda_km) + q_km / lambda_km`.
    pub fn full_cost(&self, u: &CMatrix, lambdas: &[EigenvalueVector]) -> Result<f64> {
        let forms = self.evaluate(u)?;
        if lambdas.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: lambdas.len(),
            });
        }
        let mut total = 0.0;
        for (q, l) in forms.q.iter().zip(lambdas) {
            for (qm, lm) in q.iter().zip(l.values()) {
                total += lm.ln() + qm / lm;
            }
        }
        Ok(total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::{gen_independent_ensemble, gen_joint_ensemble};
    use crate::linalg::{diag_matrix, frobenius, hermitian_eigenvalues, C64};
    use crate::unitary::random_unitary;

    fn scalar(v: f64) -> Vec<HermitianCovariance> {
        vec![HermitianCovariance::new(diag_matrix(&[v])).unwrap()]
    }

    #[test]
    fn scalar_case() {
        let ctx = ObjectiveContext::new(&scalar(2.0)).unwrap();
        let u = CMatrix::identity(1, 1);
        assert!((ctx.cost(&u).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!((ctx.gradient(&u).unwrap()[(0, 0)] - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(ctx.hessian_block(&u, 0).unwrap()[(0, 0)].norm() < 1e-15);
        assert!((ctx.lipschitz_estimate(&u).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn identity_covariances() {
        let k = 3;
        let covs: Vec<_> = (0..k)
            .map(|_| HermitianCovariance::new(CMatrix::identity(5, 5)).unwrap())
            .collect();
        let ctx = ObjectiveContext::new(&covs).unwrap();
        let u = random_unitary(5, 1);
        let g = ctx.gradient(u.matrix()).unwrap();
        assert!(frobenius(&(g - u.matrix().scale(k as f64))) < 1e-12);
        assert!((ctx.lipschitz_estimate(u.matrix()).unwrap() - k as f64).abs() < 1e-12);
        for l in ctx.optimal_lambdas(u.matrix()).unwrap() {
            assert!(l.values().iter().all(|v| (v - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn cost_at_common_basis_is_log_eigenvalues() {
        let e = gen_joint_ensemble(6, 3, 2).unwrap();
        let ctx = ObjectiveContext::new(&e.covariances).unwrap();
        let uc = e.common_basis.as_ref().unwrap().matrix();
        let expected: f64 = e
            .eigenvalues
            .as_ref()
            .unwrap()
            .iter()
            .flat_map(|l| l.values())
            .map(|v| v.ln())
            .sum();
        assert!((ctx.cost(uc).unwrap() - expected).abs() < 1e-10);
        for (got, want) in ctx
            .optimal_lambdas(uc)
            .unwrap()
            .iter()
            .zip(e.eigenvalues.as_ref().unwrap())
        {
            for (a, b) in got.values().iter().zip(want.values()) {
                assert!((a - b).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn cost_invariant_under_permutation_and_phase() {
        let e = gen_independent_ensemble(5, 3, 8).unwrap();
        let ctx = ObjectiveContext::new(&e.covariances).unwrap();
        for seed in 0..5 {
            let u = random_unitary(5, seed);
            let v = u.permute_and_rephase(&[4, 2, 0, 1, 3], &[0.5, 1.0, -2.0, 3.0, 0.0]);
            assert!((ctx.cost(u.matrix()).unwrap() - ctx.cost(v.matrix()).unwrap()).abs() <= 1e-10);
        }
    }

    #[test]
    fn full_cost_at_optimal_lambdas() {
        let e = gen_independent_ensemble(6, 4, 5).unwrap();
        let ctx = ObjectiveContext::new(&e.covariances).unwrap();
        let u = random_unitary(6, 3);
        let lambdas = ctx.optimal_lambdas(u.matrix()).unwrap();
        let full = ctx.full_cost(u.matrix(), &lambdas).unwrap();
        assert!((full - ctx.cost(u.matrix()).unwrap() - 24.0).abs() < 1e-10);
    }

    #[test]
    fn hessian_terms_are_psd() {
        let e = gen_independent_ensemble(5, 3, 4).unwrap();
        let ctx = ObjectiveContext::new(&e.covariances).unwrap();
        let u = random_unitary(5, 9);
        for m in 0..5 {
            let (a, b) = ctx.hessian_terms(u.matrix(), m).unwrap();
            assert!(*hermitian_eigenvalues(&a).last().unwrap() >= -1e-10);
            assert!(*hermitian_eigenvalues(&b).last().unwrap() >= -1e-10);
        }
    }

    #[test]
    fn singular_direction_is_an_error() {
        let covs = vec![HermitianCovariance::new(diag_matrix(&[1.0, 0.0])).unwrap()];
        let ctx = ObjectiveContext::new(&covs).unwrap();
        assert!(matches!(
            ctx.cost(&CMatrix::identity(2, 2)),
            Err(Error::SingularDirection { column: 1, .. })
        ));
    }

    #[test]
    fn scaling_covariances_shifts_cost_and_keeps_gradient() {
        let e = gen_independent_ensemble(4, 3, 1).unwrap();
        let c = 7.5;
        let scaled: Vec<_> = e.covariances.iter().map(|s| s.scaled(c)).collect();
        let a = ObjectiveContext::new(&e.covariances).unwrap();
        let b = ObjectiveContext::new(&scaled).unwrap();
        let u = random_unitary(4, 2);
        let shift = b.cost(u.matrix()).unwrap() - a.cost(u.matrix()).unwrap();
        assert!((shift - 12.0 * c.ln()).abs() < 1e-12);
        let dg = frobenius(&(a.gradient(u.matrix()).unwrap() - b.gradient(u.matrix()).unwrap()));
        assert!(dg <= 1e-12, "{dg}");
    }

    #[test]
    fn dimension_mismatch() {
        let ctx = ObjectiveContext::new(&scalar(1.0)).unwrap();
        assert!(matches!(
            ctx.cost(&CMatrix::identity(2, 2)),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
