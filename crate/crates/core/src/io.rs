//! JSON layouts. Complex numbers are `[re, im]` pairs and matrices are
//! row-major arrays of rows.

use serde::{Deserialize, Serialize};

use crate::covariance::{Ensemble, EnsembleKind, HermitianCovariance, RealizationBatch};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};
use crate::pgd::SolveResult;
use crate::unitary::UnitaryMatrix;

/// Row-major `[[ [re, im], ... ], ...]` matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MatrixRepr(pub Vec<Vec<[f64; 2]>>);

impl From<&CMatrix> for MatrixRepr {
    fn from(m: &CMatrix) -> Self {
        MatrixRepr(
            (0..m.nrows())
                .map(|r| (0..m.ncols()).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect())
                .collect(),
        )
    }
}

impl TryFrom<MatrixRepr> for CMatrix {
    type Error = Error;

    fn try_from(repr: MatrixRepr) -> Result<Self> {
        let rows = repr.0.len();
        let cols = repr.0.first().map_or(0, Vec::len);
        if let Some(bad) = repr.0.iter().find(|row| row.len() != cols) {
            return Err(Error::DimensionMismatch {
                expected: cols,
                found: bad.len(),
            });
        }
        Ok(CMatrix::from_fn(rows, cols, |r, c| {
            let [re, im] = repr.0[r][c];
            C64::new(re, im)
        }))
    }
}

impl From<UnitaryMatrix> for MatrixRepr {
    fn from(u: UnitaryMatrix) -> Self {
        MatrixRepr::from(u.matrix())
    }
}

impl TryFrom<MatrixRepr> for UnitaryMatrix {
    type Error = Error;

    fn try_from(repr: MatrixRepr) -> Result<Self> {
        UnitaryMatrix::new(CMatrix::try_from(repr)?)
    }
}

impl From<HermitianCovariance> for MatrixRepr {
    fn from(c: HermitianCovariance) -> Self {
        MatrixRepr::from(c.matrix())
    }
}

impl TryFrom<MatrixRepr> for HermitianCovariance {
    type Error = Error;

    fn try_from(repr: MatrixRepr) -> Result<Self> {
        HermitianCovariance::new(CMatrix::try_from(repr)?)
    }
}

/// On-disk ensemble: `{ "kind", "M", "K", "seed", "covariances",
/// "common_basis"?, "eigenvalues"? }`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleFile {
    pub kind: EnsembleKind,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub seed: u64,
    pub covariances: Vec<HermitianCovariance>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub common_basis: Option<UnitaryMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigenvalues: Option<Vec<Vec<f64>>>,
}

impl From<&Ensemble> for EnsembleFile {
    fn from(e: &Ensemble) -> Self {
        EnsembleFile {
            kind: e.kind,
            m: e.dim(),
            k: e.covariances.len(),
            seed: e.seed,
            covariances: e.covariances.clone(),
            common_basis: e.common_basis.clone(),
            eigenvalues: e
                .eigenvalues
                .as_ref()
                .map(|ls| ls.iter().map(|l| l.values().to_vec()).collect()),
        }
    }
}

impl TryFrom<EnsembleFile> for Ensemble {
    type Error = Error;

    fn try_from(f: EnsembleFile) -> Result<Self> {
        if f.covariances.len() != f.k {
            return Err(Error::DimensionMismatch {
                expected: f.k,
                found: f.covariances.len(),
            });
        }
        if let Some(bad) = f.covariances.iter().find(|c| c.dim() != f.m) {
            return Err(Error::DimensionMismatch {
                expected: f.m,
                found: bad.dim(),
            });
        }
        let eigenvalues = f
            .eigenvalues
            .map(|ls| {
                ls.into_iter()
                    .map(crate::covariance::EigenvalueVector::new)
                    .collect::<Result<Vec<_>>>()
            })
            .transpose()?;
        Ok(Ensemble {
            kind: f.kind,
            covariances: f.covariances,
            common_basis: f.common_basis,
            eigenvalues,
            seed: f.seed,
        })
    }
}

pub fn ensemble_to_json(e: &Ensemble) -> Result<String> {
    Ok(serde_json::to_string_pretty(&EnsembleFile::from(e))?)
}

pub fn ensemble_from_json(s: &str) -> Result<Ensemble> {
    let f: EnsembleFile = serde_json::from_str(s)?;
    Ensemble::try_from(f)
}

/// Solver output: `{ "method", "basis", "lambdas", "final_cost", "status",
/// "iterations", "final_step"? }`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveResultFile {
    pub method: String,
    pub basis: UnitaryMatrix,
    pub lambdas: Vec<Vec<f64>>,
    pub final_cost: f64,
    pub status: String,
    pub iterations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_step: Option<f64>,
}

impl From<&SolveResult> for SolveResultFile {
    fn from(r: &SolveResult) -> Self {
        SolveResultFile {
            method: "pgd".into(),
            basis: r.basis.clone(),
            lambdas: r.lambdas.iter().map(|l| l.values().to_vec()).collect(),
            final_cost: r.final_cost,
            status: r.trace.status.to_string(),
            iterations: r.trace.iterations(),
            final_step: Some(r.final_step),
        }
    }
}

/// Per-process realizations `H_k` (`M x N` each): `{ "realizations": [...] }`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RealizationsFile {
    pub realizations: Vec<MatrixRepr>,
}

impl RealizationsFile {
    pub fn from_batches(batches: &[RealizationBatch]) -> Self {
        RealizationsFile {
            realizations: batches.iter().map(|b| MatrixRepr::from(b.data())).collect(),
        }
    }

    pub fn into_batches(self) -> Result<Vec<RealizationBatch>> {
        self.realizations
            .into_iter()
            .map(|m| RealizationBatch::new(CMatrix::try_from(m)?))
            .collect()
    }
}
