//! Finite-difference and sampling oracles shared by the integration tests and
//! the acceptance runner.

#![allow(dead_code)]

use cesolve_core::linalg::frobenius;
use cesolve_core::rng::{complex_normal_matrix, rng_from_seed};
use cesolve_core::{CMatrix, ObjectiveContext, C64};

pub fn gaussian_matrix(dim: usize, seed: u64) -> CMatrix {
    complex_normal_matrix(&mut rng_from_seed(seed), dim, dim)
}

/// Relative Frobenius error between the analytic gradient and central
/// differences of the cost, perturbing the real and imaginary part of every
/// entry by `h`.
pub fn gradient_fd_error(ctx: &ObjectiveContext, u: &CMatrix, h: f64) -> f64 {
    let g = ctx.gradient(u).unwrap();
    let mut fd = CMatrix::zeros(u.nrows(), u.ncols());
    for j in 0..u.ncols() {
        for i in 0..u.nrows() {
            let partial = |dir: C64| {
                let mut plus = u.clone();
                let mut minus = u.clone();
                plus[(i, j)] += dir * h;
                minus[(i, j)] -= dir * h;
                (ctx.cost(&plus).unwrap() - ctx.cost(&minus).unwrap()) / (2.0 * h)
            };
            // df/dx = 2 Re G and df/dy = 2 Im G for G = df/dU^*.
            fd[(i, j)] = C64::new(partial(C64::new(1.0, 0.0)), partial(C64::new(0.0, 1.0))) / 2.0;
        }
    }
    frobenius(&(fd - &g)) / frobenius(&g)
}

/// Finite-difference Hessian block: entry `(i, j)` is `d g_j / d u_i` with
/// `g` column `m` of the conjugate gradient and `d/du = (d/dx - i d/dy) / 2`.
/// Column `source` of `U` is perturbed, so `source != m` gives a cross
/// block.
pub fn hessian_fd(ctx: &ObjectiveContext, u: &CMatrix, m: usize, source: usize, h: f64) -> CMatrix {
    let n = u.nrows();
    let mut out = CMatrix::zeros(n, n);
    for i in 0..n {
        let column_change = |dir: C64| {
            let mut plus = u.clone();
            let mut minus = u.clone();
            plus[(i, source)] += dir * h;
            minus[(i, source)] -= dir * h;
            (ctx.gradient(&plus).unwrap().column(m) - ctx.gradient(&minus).unwrap().column(m)) / C64::new(2.0 * h, 0.0)
        };
        let dx = column_change(C64::new(1.0, 0.0));
        let dy = column_change(C64::new(0.0, 1.0));
        for j in 0..n {
            out[(i, j)] = (dx[j] - C64::new(0.0, 1.0) * dy[j]) / 2.0;
        }
    }
    out
}

/// Hermitian PSD circulant matrix from a random first column, made
/// diagonally dominant.
pub fn random_circulant(dim: usize, seed: u64) -> CMatrix {
    let mut rng = rng_from_seed(seed);
    let raw = complex_normal_matrix(&mut rng, dim, 1);
    let mut c: Vec<C64> = (0..dim).map(|j| raw[(j, 0)]).collect();
    for j in 1..dim {
        if j > dim - j {
            c[j] = c[dim - j].conj();
        } else if j == dim - j {
            c[j] = C64::new(c[j].re, 0.0);
        }
    }
    let radius: f64 = c.iter().skip(1).map(|z| z.norm()).sum();
    c[0] = C64::new(radius + 1.0, 0.0);
    CMatrix::from_fn(dim, dim, |i, j| c[(i + dim - j) % dim])
}
