//! Maximum-likelihood estimation of a common eigenvector set for an ensemble
//! of covariance matrices.
//!
//! The estimator minimizes `f(U) = sum_{m,k} log(u_m^H S_k u_m)` over unitary
//! `U` by projected gradient descent ([`pgd`]). [`jade`] provides the Jacobi
//! joint-diagonalization baseline, [`covariance`] the synthetic ensembles and
//! [`experiment`] the Monte Carlo studies.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod covariance;
pub mod error;
pub mod experiment;
pub mod io;
pub mod jade;
pub mod linalg;
pub mod metrics;
pub mod objective;
pub mod pgd;
pub mod rng;
pub mod unitary;

pub use covariance::{
    effective_rank, gen_independent_ensemble, gen_joint_ensemble, gen_ula_ensemble, sample_covariance,
    sample_realizations, EigenvalueVector, Ensemble, EnsembleKind, HermitianCovariance, RealizationBatch, UlaParams,
};
pub use error::{Error, Result};
pub use experiment::{
    run_fig1, run_fig2, run_fig3, run_study, summarize, write_csv, ExperimentConfig, Method, ResultRecord, Study,
};
pub use jade::{jade_diagonalize, JacobiConfig};
pub use linalg::{CMatrix, C64};
pub use metrics::{cost_gap, diag_metric, eta, fourier_basis, majorization_check, MetricReport};
pub use objective::ObjectiveContext;
pub use pgd::{
    pgd_solve, proxy_value, stationarity_residual, Init, PgdConfig, SolveResult, SolveStatus, SolveTrace, StepRule,
    TrialStep,
};
pub use unitary::{project, random_unitary, unitarity_defect, UnitaryMatrix};
