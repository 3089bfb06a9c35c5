//! Tangle bound `Tr[(ρ⊗ρ)V]` and tangle rate `2Tr[(ρ̇⊗ρ)V]`.
//!
//! The operator `V` lives on two copies of the bipartite space. Its storage
//! index is `((a·d + b)·d + a')·d + b'` for `|a b⟩ ⊗ |a' b'⟩`, so the first
//! copy occupies the leading `d²` block exactly like a Kronecker product
//! `X ⊗ Y` of two bipartite operators.
//!
//! `V` is normalized as `4[P₋⊗P₋ − ½(P₋⊗P₊ + P₊⊗P₋)]`, which expands to
//! `2·S_A S_B − S_A − S_B` with `S_A`, `S_B` the copy swaps of one subsystem.
//! With this normalization the bound equals `2(1 − Tr ρ_A²)` on pure states.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::linalg::{self, check_simplex, hermiticity_error, DensityMatrix, Dim, Side};
use crate::{CMat, Error, Result, C64};

/// Swap of the two tensor factors of `C^d ⊗ C^d`, index `x·d + x'`.
fn single_swap(d: usize) -> CMat {
    let n = d * d;
    let mut s = CMat::zeros(n, n);
    for x in 0..d {
        for y in 0..d {
            s[(y * d + x, x * d + y)] = C64::new(1.0, 0.0);
        }
    }
    s
}

/// Projectors `(P₋, P₊) = ((1 − S)/2, (1 + S)/2)` onto the antisymmetric and
/// symmetric subspaces of two copies of one subsystem.
pub fn build_projectors(dim: Dim) -> (CMat, CMat) {
    let d = dim.get();
    let n = d * d;
    let s = single_swap(d);
    let id = CMat::identity(n, n);
    let half = C64::new(0.5, 0.0);
    ((&id - &s) * half, (&id + &s) * half)
}

/// Reorders an operator written in the grouping `(A,A')(B,B')`, index
/// `((a·d + a')·d + b)·d + b'`, into the storage grouping `(A,B)(A',B')`.
///
/// This is the only place the copy/subsystem permutation is spelled out.
pub fn regroup_to_storage(grouped: &CMat, dim: Dim) -> CMat {
    let d = dim.get();
    let n = d.pow(4);
    assert_eq!(grouped.nrows(), n, "operator must act on two copies of the bipartite space");
    let mut perm = vec![0usize; n];
    for a in 0..d {
        for a2 in 0..d {
            for b in 0..d {
                for b2 in 0..d {
                    let g = ((a * d + a2) * d + b) * d + b2;
                    perm[g] = ((a * d + b) * d + a2) * d + b2;
                }
            }
        }
    }
    let mut out = CMat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out[(perm[i], perm[j])] = grouped[(i, j)];
        }
    }
    out
}

#[inline]
fn storage_index(d: usize, a: usize, b: usize, a2: usize, b2: usize) -> usize {
    ((a * d + b) * d + a2) * d + b2
}

/// Copy swaps `S_A` (exchanges `a ↔ a'`) and `S_B` (exchanges `b ↔ b'`).
#[derive(Clone, Debug)]
pub struct SwapOps {
    pub s_a: CMat,
    pub s_b: CMat,
    dim: Dim,
}

impl SwapOps {
    pub fn new(dim: Dim) -> Self {
        let d = dim.get();
        let n = d.pow(4);
        let one = C64::new(1.0, 0.0);
        let mut s_a = CMat::zeros(n, n);
        let mut s_b = CMat::zeros(n, n);
        for a in 0..d {
            for b in 0..d {
                for a2 in 0..d {
                    for b2 in 0..d {
                        let src = storage_index(d, a, b, a2, b2);
                        s_a[(storage_index(d, a2, b, a, b2), src)] = one;
                        s_b[(storage_index(d, a, b2, a2, b), src)] = one;
                    }
                }
            }
        }
        SwapOps { s_a, s_b, dim }
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    /// `2·S_A S_B − S_A − S_B`.
    pub fn witness(&self) -> CMat {
        (&self.s_a * &self.s_b) * C64::new(2.0, 0.0) - &self.s_a - &self.s_b
    }
}

/// The duplicated-space operator `V`, stored densely.
#[derive(Clone, Debug)]
pub struct WitnessV {
    mat: CMat,
    dim: Dim,
}

impl WitnessV {
    /// Dense construction from the single-subsystem projectors.
    pub fn build(dim: Dim) -> Self {
        let (pm, pp) = build_projectors(dim);
        let grouped = (pm.kronecker(&pm)
            - (pm.kronecker(&pp) + pp.kronecker(&pm)) * C64::new(0.5, 0.0))
            * C64::new(4.0, 0.0);
        WitnessV { mat: regroup_to_storage(&grouped, dim), dim }
    }

    /// Shared instance per local dimension.
    pub fn cached(dim: Dim) -> Arc<WitnessV> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<WitnessV>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("witness cache poisoned");
        guard.entry(dim.get()).or_insert_with(|| Arc::new(WitnessV::build(dim))).clone()
    }

    pub fn mat(&self) -> &CMat {
        &self.mat
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    /// `Tr[(X⊗Y)V]` by dense contraction against the stored operator.
    pub fn expectation(&self, x: &CMat, y: &CMat) -> C64 {
        let n = self.dim.full();
        let mut acc = C64::new(0.0, 0.0);
        // (X⊗Y)_{(i,j),(k,l)} = X_ik Y_jl, composite index i·n + j
        for i in 0..n {
            for k in 0..n {
                let xik = x[(i, k)];
                if xik == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    let row = i * n + j;
                    for l in 0..n {
                        acc += xik * y[(j, l)] * self.mat[(k * n + l, row)];
                    }
                }
            }
        }
        acc
    }
}

/// `2(1 − Σλ²)`, the tangle of a pure state with Schmidt weights `λ`.
pub fn tangle_pure(lambdas: &[f64]) -> Result<f64> {
    check_simplex(lambdas)?;
    Ok(tangle_pure_unchecked(lambdas))
}

#[inline]
pub(crate) fn tangle_pure_unchecked(lambdas: &[f64]) -> f64 {
    2.0 * (1.0 - lambdas.iter().map(|l| l * l).sum::<f64>())
}

/// `Tr[(ρ⊗ρ)V]` through the dense operator. Negative values are possible
/// for mixed states.
pub fn tangle_bound(rho: &DensityMatrix) -> f64 {
    WitnessV::cached(rho.dim()).expectation(rho.mat(), rho.mat()).re
}

/// Real part of `Tr[(X⊗Y)V] = 2Tr(XY) − Tr(X_A Y_A) − Tr(X_B Y_B)`,
/// contracted without forming `X⊗Y`.
pub fn tangle_form(x: &CMat, y: &CMat, dim: Dim) -> f64 {
    let full = trace_of_product(x, y);
    let xa = linalg::reduce(x, dim, Side::A);
    let ya = linalg::reduce(y, dim, Side::A);
    let xb = linalg::reduce(x, dim, Side::B);
    let yb = linalg::reduce(y, dim, Side::B);
    2.0 * full - trace_of_product(&xa, &ya) - trace_of_product(&xb, &yb)
}

#[inline]
fn trace_of_product(x: &CMat, y: &CMat) -> f64 {
    let n = x.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += (x[(i, j)] * y[(j, i)]).re;
        }
    }
    acc
}

/// `2Tr ρ² − Tr ρ_A² − Tr ρ_B²`, equal to [`tangle_bound`].
pub fn tangle_bound_fast(rho: &DensityMatrix) -> f64 {
    tangle_form(rho.mat(), rho.mat(), rho.dim())
}

/// Clamped mixed-state tangle estimate `max(bound, 0)`.
pub fn tangle_estimate(rho: &DensityMatrix) -> f64 {
    tangle_bound_fast(rho).max(0.0)
}

const RATE_TOL: f64 = 1e-10;

fn check_derivative(rho_dot: &CMat, dim: Dim) -> Result<()> {
    let n = dim.full();
    if rho_dot.nrows() != n || rho_dot.ncols() != n {
        return Err(Error::invalid("state derivative has the wrong shape"));
    }
    let tr = rho_dot.trace();
    if tr.norm() > RATE_TOL {
        return Err(Error::invalid(format!("state derivative has trace {tr}, expected 0")));
    }
    let herm = hermiticity_error(rho_dot);
    if herm > RATE_TOL {
        return Err(Error::invalid(format!("state derivative is not Hermitian (error {herm:e})")));
    }
    Ok(())
}

/// `τ̇ ≈ 2Tr[(ρ̇⊗ρ)V]`, by contraction.
pub fn tangle_rate(rho_dot: &CMat, rho: &DensityMatrix) -> Result<f64> {
    check_derivative(rho_dot, rho.dim())?;
    Ok(2.0 * tangle_form(rho_dot, rho.mat(), rho.dim()))
}

/// Same quantity as [`tangle_rate`], contracted against the dense `V`.
pub fn tangle_rate_dense(rho_dot: &CMat, rho: &DensityMatrix) -> Result<f64> {
    check_derivative(rho_dot, rho.dim())?;
    Ok(2.0 * WitnessV::cached(rho.dim()).expectation(rho_dot, rho.mat()).re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{density_of, pointer_state, random_unit_vector, PureState};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dim(d: usize) -> Dim {
        Dim::new(d).unwrap()
    }

    fn rank(p: &CMat) -> usize {
        // projector rank = trace
        p.trace().re.round() as usize
    }

    fn random_mixed(d: Dim, rng: &mut ChaCha8Rng) -> DensityMatrix {
        let n = d.full();
        let mut m = CMat::zeros(n, n);
        let mut w_total = 0.0;
        for k in 0..3 {
            let v = random_unit_vector(n, rng);
            let w = 1.0 + k as f64;
            m += (&v * v.adjoint()) * C64::from(w);
            w_total += w;
        }
        DensityMatrix::new(m / C64::from(w_total), d).unwrap()
    }

    #[test]
    fn projector_algebra() {
        for d in 2..=4 {
            let (pm, pp) = build_projectors(dim(d));
            assert_eq!(rank(&pm), d * (d - 1) / 2);
            assert_eq!(rank(&pp), d * (d + 1) / 2);
            assert!((&pm * &pm - &pm).camax() < 1e-14);
            assert!((&pm * &pp).camax() < 1e-14);
            let n = d * d;
            assert!((&pm + &pp - CMat::identity(n, n)).camax() < 1e-14);
        }
    }

    #[test]
    fn dense_witness_equals_swap_expression() {
        for d in 2..=3 {
            let v = WitnessV::build(dim(d));
            let swaps = SwapOps::new(dim(d));
            assert!((v.mat() - swaps.witness()).camax() < 1e-12);
            assert!(hermiticity_error(v.mat()) < 1e-12);
            // copy exchange S_A S_B leaves V invariant
            let full = &swaps.s_a * &swaps.s_b;
            assert!((&full * v.mat() * &full - v.mat()).camax() < 1e-12);
        }
    }

    #[test]
    fn swaps_are_commuting_involutions() {
        let s = SwapOps::new(dim(2));
        let id = CMat::identity(16, 16);
        assert!((&s.s_a * &s.s_a - &id).camax() == 0.0);
        assert!((&s.s_b * &s.s_b - &id).camax() == 0.0);
        assert!((&s.s_a * &s.s_b - &s.s_b * &s.s_a).camax() == 0.0);
    }

    #[test]
    fn threshold_values_from_v() {
        let bell = density_of(&pointer_state(&[0.5, 0.5]).unwrap());
        assert_abs_diff_eq!(tangle_bound(&bell), 1.0, epsilon = 1e-12);
        let t = 1.0 / 3.0;
        let q = density_of(&pointer_state(&[t, t, t]).unwrap());
        assert_abs_diff_eq!(tangle_bound(&q), 4.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn tangle_pure_examples() {
        assert_abs_diff_eq!(tangle_pure(&[1.0, 0.0, 0.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(tangle_pure(&[0.5, 0.5]).unwrap(), 1.0);
        assert_abs_diff_eq!(tangle_pure(&[0.25; 4]).unwrap(), 1.5);
        assert!(tangle_pure(&[0.5, 0.6]).is_err());
    }

    #[test]
    fn classically_correlated_state_has_zero_bound() {
        let mut m = CMat::zeros(4, 4);
        m[(0, 0)] = C64::from(0.5);
        m[(3, 3)] = C64::from(0.5);
        let rho = DensityMatrix::new(m, dim(2)).unwrap();
        assert_abs_diff_eq!(tangle_bound(&rho), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(tangle_bound_fast(&rho), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn x_state_bound_is_four_gamma_squared() {
        for gamma in [0.0, 0.1, 0.25, 0.5] {
            let mut m = CMat::zeros(4, 4);
            m[(0, 0)] = C64::from(0.5);
            m[(3, 3)] = C64::from(0.5);
            m[(0, 3)] = C64::from(gamma);
            m[(3, 0)] = C64::from(gamma);
            let rho = DensityMatrix::new(m, dim(2)).unwrap();
            assert_abs_diff_eq!(tangle_bound(&rho), 4.0 * gamma * gamma, epsilon = 1e-14);
            assert_abs_diff_eq!(tangle_bound_fast(&rho), 4.0 * gamma * gamma, epsilon = 1e-14);
        }
    }

    #[test]
    fn maximally_mixed_bound_is_minus_half() {
        let rho = DensityMatrix::maximally_mixed(dim(2));
        assert_abs_diff_eq!(tangle_bound_fast(&rho), -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(tangle_bound(&rho), -0.5, epsilon = 1e-14);
        assert_eq!(tangle_estimate(&rho), 0.0);
    }

    #[test]
    fn fast_and_dense_bound_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for d in 2..=3 {
            for _ in 0..10 {
                let rho = random_mixed(dim(d), &mut rng);
                assert_abs_diff_eq!(tangle_bound(&rho), tangle_bound_fast(&rho), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn pure_bound_uses_reduced_purities() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let psi = PureState::new(random_unit_vector(9, &mut rng), dim(3)).unwrap();
        let rho = density_of(&psi);
        let ra = linalg::partial_trace(&rho, Side::A);
        let rb = linalg::partial_trace(&rho, Side::B);
        let expect = 2.0 - (&ra * &ra).trace().re - (&rb * &rb).trace().re;
        assert_abs_diff_eq!(tangle_bound_fast(&rho), expect, epsilon = 1e-12);
    }

    #[test]
    fn rate_rejects_traced_derivative() {
        let rho = DensityMatrix::maximally_mixed(dim(2));
        assert!(tangle_rate(&CMat::identity(4, 4), &rho).is_err());
        assert_eq!(tangle_rate(&CMat::zeros(4, 4), &rho).unwrap(), 0.0);
    }

    #[test]
    fn rate_is_symmetric_in_copies() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let d = dim(2);
        let rho = random_mixed(d, &mut rng);
        let other = random_mixed(d, &mut rng);
        let xdot = other.mat() - rho.mat();
        let w = WitnessV::cached(d);
        let lhs = tangle_rate(&xdot, &rho).unwrap();
        let rhs = w.expectation(&xdot, rho.mat()).re + w.expectation(rho.mat(), &xdot).re;
        assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12);
        assert_abs_diff_eq!(lhs, tangle_rate_dense(&xdot, &rho).unwrap(), epsilon = 1e-12);
    }
}
