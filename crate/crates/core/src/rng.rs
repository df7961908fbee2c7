//! Seeded randomness. Every stochastic routine takes a `u64` seed and builds
//! its own ChaCha stream; nested work derives child seeds with [`derive_seed`]
//! so results never depend on scheduling order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{CMatrix, C64};

pub type SeededRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a master seed with a path of indices, e.g. `(trial, k)`.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(master), |acc, &p| {
        splitmix64(acc ^ splitmix64(p.wrapping_add(0x632b_e59b_d9b4_e019)))
    })
}

pub fn rng_from_seed(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Circularly-symmetric complex normal with `E|z|^2 = 1`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn complex_normal_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    // column-major fill order keeps the stream layout independent of nalgebra internals
    let mut m = CMatrix::zeros(rows, cols);
    for c in 0..cols {
        for r in 0..rows {
            m[(r, c)] = complex_normal(rng);
        }
    }
    m
}
