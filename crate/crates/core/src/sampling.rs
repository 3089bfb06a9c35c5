//! Random pure states with an exactly prescribed tangle.
//!
//! Schmidt weights are drawn as `λ = centroid + r·u`, with `u` an isotropic
//! unit direction inside the zero-sum hyperplane and `r` fixed by
//! `Σλ² = 1 − τ₀/2`; draws leaving the simplex are rejected. The resulting
//! ensemble is not uniform on the constraint manifold, it is simply fixed
//! and reproducible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{haar_unitary, pure_from_schmidt, Dim, PureState};
use crate::{Error, Result};

/// Draws allowed before a [`Error::SamplingFailure`]. The cap is only reached
/// when the sphere slice barely touches the simplex (tangle close to 0 on a
/// face of size ≥ 3).
pub const MAX_TRIES: usize = 10_000;

/// Deterministic random stream `base_seed + index`.
pub fn stream(base_seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(base_seed.wrapping_add(index))
}

pub(crate) fn check_tangle(tau0: f64, k: usize, dim_for_error: usize) -> Result<()> {
    let max = 2.0 * (k as f64 - 1.0) / k as f64;
    if !(tau0 >= 0.0) || tau0 > max + 1e-12 {
        return Err(Error::InfeasibleTangle { tau0, dim: dim_for_error, max });
    }
    Ok(())
}

/// Schmidt weights on the full simplex with tangle `τ₀`.
pub fn schmidt_with_tangle<R: Rng + ?Sized>(tau0: f64, dim: Dim, rng: &mut R) -> Result<Vec<f64>> {
    let support: Vec<usize> = (0..dim.get()).collect();
    schmidt_with_tangle_on(tau0, &support, dim, rng)
}

/// Like [`schmidt_with_tangle`] but restricted to the face of the simplex
/// spanned by `support`; all other weights are zero.
pub fn schmidt_with_tangle_on<R: Rng + ?Sized>(
    tau0: f64,
    support: &[usize],
    dim: Dim,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let d = dim.get();
    let k = support.len();
    if k == 0 || support.iter().any(|&i| i >= d) {
        return Err(Error::invalid("support must be a nonempty set of level indices"));
    }
    check_tangle(tau0, k, d)?;

    let mut lambdas = vec![0.0; d];
    if k == 1 || tau0 <= 0.0 {
        // Only the vertices reach zero tangle.
        let pick = support[rng.random_range(0..k)];
        lambdas[pick] = 1.0;
        return Ok(lambdas);
    }
    let centroid = 1.0 / k as f64;
    let radius_sq = (1.0 - tau0 / 2.0) - centroid;
    if radius_sq <= 1e-15 {
        for &i in support {
            lambdas[i] = centroid;
        }
        return Ok(lambdas);
    }
    let radius = radius_sq.sqrt();

    let mut u = vec![0.0; k];
    for _ in 0..MAX_TRIES {
        for x in u.iter_mut() {
            *x = rng.sample(StandardNormal);
        }
        let mean = u.iter().sum::<f64>() / k as f64;
        u.iter_mut().for_each(|x| *x -= mean);
        let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-12 {
            continue;
        }
        // Σu = 0 makes Σ(c + t·u)² = 1/k + t²|u|², so t = r/|u|.
        if u.iter().all(|x| centroid + radius * x / norm >= 0.0) {
            for (slot, x) in support.iter().zip(&u) {
                lambdas[*slot] = centroid + radius * x / norm;
            }
            return Ok(lambdas);
        }
    }
    Err(Error::SamplingFailure { tries: MAX_TRIES })
}

/// Random pure state with tangle `τ₀` and Haar-random local Schmidt bases.
pub fn state_with_tangle<R: Rng + ?Sized>(tau0: f64, dim: Dim, rng: &mut R) -> Result<PureState> {
    let lambdas = schmidt_with_tangle(tau0, dim, rng)?;
    let u_a = haar_unitary(dim, rng);
    let u_b = haar_unitary(dim, rng);
    pure_from_schmidt(&lambdas, &u_a, &u_b)
}
