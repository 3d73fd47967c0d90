use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::tensor::linalg::{c, CMatrix};
use crate::tensor::{CVector, HermitianMatrix, StateVector, SystemLayout};

/// Name of the pseudorandom generator, recorded in every report.
pub const RNG_ALGORITHM: &str = "ChaCha20";

/// Seedable, platform-independent generator used throughout the toolkit.
pub type DetRng = ChaCha20Rng;

pub fn rng_from_seed(seed: u64) -> DetRng {
    ChaCha20Rng::seed_from_u64(seed)
}

fn complex_gaussian(rng: &mut DetRng) -> num_complex::Complex64 {
    c(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Haar-random pure state over `layout`,
/// drawn from `rng` as a normalized complex Gaussian vector.
pub fn haar_state_with(rng: &mut DetRng, layout: SystemLayout) -> Result<StateVector> {
    let dim = layout.total_dim();
    let v = CVector::from_fn(dim, |_, _| complex_gaussian(rng));
    StateVector::normalizing(layout, v)
}

/// Haar-random state over a single subsystem labeled `a`; deterministic in `seed`.
pub fn sample_haar_state(dim: usize, seed: u64) -> Result<StateVector> {
    let mut rng = rng_from_seed(seed);
    haar_state_with(&mut rng, SystemLayout::single("a", dim)?)
}

/// `count` independent Haar states over `layout`, all drawn from one stream.
pub fn sample_haar_states(layout: &SystemLayout, count: usize, seed: u64) -> Result<Vec<StateVector>> {
    let mut rng = rng_from_seed(seed);
    (0..count).map(|_| haar_state_with(&mut rng, layout.clone())).collect()
}

/// Random full-rank density operator `G G† / Tr(G G†)` with Ginibre `G`.
pub fn random_density_with(rng: &mut DetRng, layout: SystemLayout) -> HermitianMatrix {
    let d = layout.total_dim();
    let g = CMatrix::from_fn(d, d, |_, _| complex_gaussian(rng));
    let mut rho = &g * g.adjoint();
    let tr = crate::tensor::linalg::trace(&rho).re;
    rho /= c(tr, 0.0);
    HermitianMatrix::new(layout, rho).expect("G G† is Hermitian")
}

/// Random Hermitian matrix with standard Gaussian entries.
pub fn random_hermitian_with(rng: &mut DetRng, layout: SystemLayout) -> HermitianMatrix {
    let d = layout.total_dim();
    let g = CMatrix::from_fn(d, d, |_, _| complex_gaussian(rng));
    HermitianMatrix::new(layout, crate::tensor::linalg::hermitize(&g)).expect("hermitized")
}

/// Haar-random unitary via QR of a Ginibre matrix with phase correction.
pub fn random_unitary_with(rng: &mut DetRng, dim: usize) -> CMatrix {
    let g = CMatrix::from_fn(dim, dim, |_, _| complex_gaussian(rng));
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let mut u = q.clone();
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { c(1.0, 0.0) };
        for i in 0..dim {
            u[(i, j)] *= phase;
        }
    }
    u
}
