//! Covariance ensembles: synthetic generators, Gaussian realizations and
//! sample covariances.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    diag_matrix, hermitian_eigenvalues, hermitian_eigh, hermitian_part, is_finite, max_hermitian_asymmetry, trace_re,
    CMatrix, C64,
};
use crate::rng::{complex_normal_matrix, derive_seed, rng_from_seed};
use crate::unitary::{random_unitary, UnitaryMatrix};

/// Asymmetry accepted by [`HermitianCovariance::new`], relative to the
/// largest entry magnitude (or absolute below unit scale).
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Negative eigenvalues down to `-PSD_TOL * trace` are accepted.
pub const PSD_TOL: f64 = 1e-10;
/// Energy fraction defining the effective rank.
pub const EFFECTIVE_RANK_ENERGY: f64 = 0.95;

/// Hermitian positive semidefinite matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "crate::io::MatrixRepr", into = "crate::io::MatrixRepr")]
pub struct HermitianCovariance(CMatrix);

impl HermitianCovariance {
    /// Validates Hermitian symmetry and positive semidefiniteness, then stores
    /// the exactly symmetrized matrix.
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
        let scale = m.iter().map(|z| z.norm()).fold(1.0_f64, f64::max);
        let asym = max_hermitian_asymmetry(&m);
        if asym > HERMITIAN_TOL * scale {
            return Err(Error::NotHermitian(asym));
        }
        let h = hermitian_part(&m);
        let smallest = hermitian_eigenvalues(&h).last().copied().unwrap_or(0.0);
        if smallest < -PSD_TOL * trace_re(&h).abs().max(f64::MIN_POSITIVE) {
            return Err(Error::NotPsd(smallest));
        }
        Ok(Self(h))
    }

    /// Symmetrizes without the eigenvalue check; for matrices that are PSD by
    /// construction.
    pub(crate) fn from_psd_unchecked(m: CMatrix) -> Self {
        Self(hermitian_part(&m))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn trace(&self) -> f64 {
        trace_re(&self.0)
    }

    /// Eigenvalues in descending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.0)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self(self.0.scale(c))
    }

    fn trace_normalized(self) -> Self {
        let t = self.trace();
        Self(self.0.unscale(t))
    }
}

/// `M x N` batch of realizations; column `j` is one draw.
#[derive(Debug, Clone, PartialEq)]
pub struct RealizationBatch(CMatrix);

impl RealizationBatch {
    pub fn new(data: CMatrix) -> Result<Self> {
        if data.ncols() == 0 || data.nrows() == 0 {
            return Err(Error::EmptyBatch);
        }
        if !is_finite(&data) {
            return Err(Error::NonFinite);
        }
        Ok(Self(data))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn count(&self) -> usize {
        self.0.ncols()
    }

    pub fn data(&self) -> &CMatrix {
        &self.0
    }
}

/// Strictly positive eigenvalue vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenvalueVector(Vec<f64>);

impl EigenvalueVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "eigenvalues must be positive and finite, got {bad}"
            )));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnsembleKind {
    Joint,
    Independent,
    Ula,
}

impl std::str::FromStr for EnsembleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "joint" => Ok(Self::Joint),
            "independent" => Ok(Self::Independent),
            "ula" => Ok(Self::Ula),
            other => Err(Error::InvalidArgument(format!("unknown ensemble kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub kind: EnsembleKind,
    pub covariances: Vec<HermitianCovariance>,
    /// Shared eigenbasis; only for [`EnsembleKind::Joint`].
    pub common_basis: Option<UnitaryMatrix>,
    /// Generating eigenvalues (joint and independent kinds), matching the
    /// trace-normalized covariances.
    pub eigenvalues: Option<Vec<EigenvalueVector>>,
    pub seed: u64,
}

impl Ensemble {
    pub fn dim(&self) -> usize {
        self.covariances.first().map_or(0, HermitianCovariance::dim)
    }

    pub fn len(&self) -> usize {
        self.covariances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.covariances.is_empty()
    }
}

/// Uniform linear array settings for [`gen_ula_ensemble`].
#[derive(Debug, Clone, PartialEq)]
pub struct UlaParams {
    /// Element spacing in wavelengths.
    pub spacing_ratio: f64,
    /// Number of points on the uniform `sin(angle)` grid over `[-1, 1)`;
    /// `None` means `32 * M`.
    pub grid_size: Option<usize>,
    pub effective_rank_target: usize,
    /// Angular power density outside the occupied interval, relative to the
    /// density inside it. Keeps the covariance non-singular.
    pub background: f64,
}

impl UlaParams {
    pub fn with_rank(effective_rank_target: usize) -> Self {
        Self {
            spacing_ratio: 0.5,
            grid_size: None,
            effective_rank_target,
            background: 1e-3,
        }
    }
}

/// `(1/N) H H^H`, not trace-normalized.
pub fn sample_covariance(h: &RealizationBatch) -> Result<HermitianCovariance> {
    let n = h.count();
    if n == 0 {
        return Err(Error::EmptyBatch);
    }
    let data = h.data();
    Ok(HermitianCovariance::from_psd_unchecked(
        (data * data.adjoint()).unscale(n as f64),
    ))
}

/// `N` i.i.d. circular complex Gaussian draws with covariance `sigma`,
/// generated as `sigma^{1/2} g`.
pub fn sample_realizations(sigma: &HermitianCovariance, n: usize, seed: u64) -> Result<RealizationBatch> {
    if n < 1 {
        return Err(Error::EmptyBatch);
    }
    let root = psd_sqrt(sigma.matrix());
    let mut rng = rng_from_seed(seed);
    let g = complex_normal_matrix(&mut rng, sigma.dim(), n);
    RealizationBatch::new(root * g)
}

fn psd_sqrt(a: &CMatrix) -> CMatrix {
    let (values, vectors) = hermitian_eigh(a);
    let roots: Vec<f64> = values.iter().map(|v| v.max(0.0).sqrt()).collect();
    let scaled = &vectors * diag_matrix(&roots);
    scaled * vectors.adjoint()
}

/// Smallest `r` whose top-`r` eigenvalues hold at least 95% of the trace.
pub fn effective_rank(sigma: &HermitianCovariance) -> usize {
    let values = sigma.eigenvalues();
    let total: f64 = values.iter().map(|v| v.max(0.0)).sum();
    let mut acc = 0.0;
    for (i, v) in values.iter().enumerate() {
        acc += v.max(0.0);
        if acc >= EFFECTIVE_RANK_ENERGY * total {
            return i + 1;
        }
    }
    values.len()
}

fn check_sizes(m: usize, k: usize) -> Result<()> {
    if m < 1 || k < 1 {
        return Err(Error::InvalidArgument(format!(
            "ensemble needs M >= 1 and K >= 1, got M={m}, K={k}"
        )));
    }
    Ok(())
}

/// `lambda_m = |rho_m|` with `rho_m ~ N(0, 1)`, scaled to unit sum.
fn draw_eigenvalues(m: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    let raw: Vec<f64> = (0..m)
        .map(|_| {
            let rho: f64 = rng.sample(StandardNormal);
            rho.abs().max(f64::MIN_POSITIVE)
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

fn rotated(basis: &UnitaryMatrix, lambdas: Vec<f64>) -> (HermitianCovariance, EigenvalueVector) {
    let u = basis.matrix();
    let sigma = HermitianCovariance::from_psd_unchecked(u * diag_matrix(&lambdas) * u.adjoint());
    // Absorb the rounding in the trace into both the matrix and the
    // eigenvalues so the reconstruction stays exact.
    let t = sigma.trace();
    let lambdas = lambdas.into_iter().map(|v| v / t).collect();
    (
        sigma.trace_normalized(),
        EigenvalueVector::new(lambdas).expect("absolute normal draws are positive"),
    )
}

/// `K` trace-normalized covariances sharing one random eigenbasis.
pub fn gen_joint_ensemble(m: usize, k: usize, seed: u64) -> Result<Ensemble> {
    check_sizes(m, k)?;
    let basis = random_unitary(m, derive_seed(seed, &[0]));
    let (covariances, eigenvalues) = (0..k)
        .map(|i| rotated(&basis, draw_eigenvalues(m, derive_seed(seed, &[1, i as u64]))))
        .unzip();
    Ok(Ensemble {
        kind: EnsembleKind::Joint,
        covariances,
        common_basis: Some(basis),
        eigenvalues: Some(eigenvalues),
        seed,
    })
}

/// `K` trace-normalized covariances, each with its own random eigenbasis.
pub fn gen_independent_ensemble(m: usize, k: usize, seed: u64) -> Result<Ensemble> {
    check_sizes(m, k)?;
    let (covariances, eigenvalues) = (0..k)
        .map(|i| {
            let basis = random_unitary(m, derive_seed(seed, &[2, i as u64]));
            rotated(&basis, draw_eigenvalues(m, derive_seed(seed, &[1, i as u64])))
        })
        .unzip();
    Ok(Ensemble {
        kind: EnsembleKind::Independent,
        covariances,
        common_basis: None,
        eigenvalues: Some(eigenvalues),
        seed,
    })
}

/// Angular occupancy of one ULA user: an interval `[lo, hi)` in `sin(angle)`.
#[derive(Debug, Clone, Copy)]
struct Occupancy {
    center: f64,
}

impl Occupancy {
    /// Interval of width `width` around the center, shifted inward so that
    /// it stays inside `[-1, 1]`.
    fn interval(&self, width: f64) -> (f64, f64) {
        let width = width.min(2.0);
        let mut lo = self.center - width / 2.0;
        let mut hi = self.center + width / 2.0;
        if lo < -1.0 {
            hi += -1.0 - lo;
            lo = -1.0;
        }
        if hi > 1.0 {
            lo -= hi - 1.0;
            hi = 1.0;
        }
        (lo, hi)
    }
}

/// Hermitian Toeplitz covariance of a ULA with power density 1 on
/// `[lo, hi)` and `background` elsewhere, trace-normalized.
fn ula_covariance(m: usize, params: &UlaParams, lo: f64, hi: f64) -> HermitianCovariance {
    let grid = params.grid_size.unwrap_or(32 * m);
    let step = 2.0 / grid as f64;
    let phase_per_lag = 2.0 * std::f64::consts::PI * params.spacing_ratio;
    // r[c] = sum_g gamma_g exp(j 2 pi d c s_g): first column of the Toeplitz matrix
    let mut lags = vec![C64::new(0.0, 0.0); m];
    for g in 0..grid {
        let s = -1.0 + g as f64 * step;
        let gamma = if s >= lo && s < hi { 1.0 } else { params.background };
        if gamma == 0.0 {
            continue;
        }
        for (c, lag) in lags.iter_mut().enumerate() {
            *lag += C64::from_polar(gamma * step, phase_per_lag * c as f64 * s);
        }
    }
    let norm = lags[0].re * m as f64;
    let lags: Vec<C64> = lags.into_iter().map(|z| z / norm).collect();
    let mut sigma = CMatrix::from_fn(m, m, |i, j| if i >= j { lags[i - j] } else { lags[j - i].conj() });
    for i in 0..m {
        sigma[(i, i)] = C64::new(lags[0].re, 0.0);
    }
    HermitianCovariance::from_psd_unchecked(sigma)
}

/// Smallest occupied width (bisection on the measured effective rank) that
/// reaches the target rank, starting from the `r / M` fraction.
fn calibrate_width(m: usize, params: &UlaParams, occ: Occupancy) -> f64 {
    let target = params.effective_rank_target;
    let rank_at = |w: f64| {
        let (lo, hi) = occ.interval(w);
        effective_rank(&ula_covariance(m, params, lo, hi))
    };
    let guess = 2.0 * target as f64 / m as f64;
    let (mut lo, mut hi) = if rank_at(guess) >= target {
        (0.0, guess)
    } else {
        (guess, 2.0)
    };
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if rank_at(mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// `K` ULA covariances, each occupying one random contiguous angular
/// interval whose width is calibrated to the requested effective rank.
pub fn gen_ula_ensemble(m: usize, k: usize, params: &UlaParams, seed: u64) -> Result<Ensemble> {
    if m < 2 || k < 1 {
        return Err(Error::InvalidArgument(format!(
            "ULA ensemble needs M >= 2 and K >= 1, got M={m}, K={k}"
        )));
    }
    let r = params.effective_rank_target;
    if r < 1 || r > m {
        return Err(Error::InvalidArgument(format!(
            "effective rank target {r} outside [1, {m}]"
        )));
    }
    if !(params.spacing_ratio > 0.0) || !(params.background >= 0.0) || params.grid_size == Some(0) {
        return Err(Error::InvalidArgument("invalid ULA parameters".into()));
    }
    let covariances = (0..k)
        .map(|i| {
            let mut rng = rng_from_seed(derive_seed(seed, &[3, i as u64]));
            let angle: f64 = rng.random_range(-std::f64::consts::FRAC_PI_2..std::f64::consts::FRAC_PI_2);
            let occ = Occupancy { center: angle.sin() };
            let width = calibrate_width(m, params, occ);
            let (lo, hi) = occ.interval(width);
            ula_covariance(m, params, lo, hi)
        })
        .collect();
    Ok(Ensemble {
        kind: EnsembleKind::Ula,
        covariances,
        common_basis: None,
        eigenvalues: None,
        seed,
    })
}

/// `max |S[i][j] - S[i+1][j+1]|`
pub fn toeplitz_defect(a: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n.saturating_sub(1) {
        for j in 0..n - 1 {
            worst = worst.max((a[(i, j)] - a[(i + 1, j + 1)]).norm());
        }
    }
    worst
}
