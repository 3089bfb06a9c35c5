//! Maximization of the tangle rate τ̇ at fixed tangle τ₀.
//!
//! For pointer-basis states `Σ√λ_i |ii⟩` every local generator couples the
//! weights only pairwise, so τ̇ is a quadratic form `λᵀMλ`. The Schmidt
//! problem is solved by enumerating faces of the simplex and running damped
//! Newton on the Lagrange system `∇τ̇ = μ∇τ + ν·1` of each face from many
//! starting points. [`optimize_general`] searches all pure states instead and
//! [`oracle_random_search`] is a brute-force check; neither uses `M`.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;

use crate::channels::{ChannelSpec, Generator};
use crate::linalg::{
    check_simplex, density_of, pointer_state, pure_from_schmidt, reduce, schmidt_of, Dim, PureState, Side,
};
use crate::sampling::{schmidt_with_tangle_on, state_with_tangle, stream};
use crate::tangle::{tangle_form, tangle_pure_unchecked, tangle_rate};
use crate::{CMat, CVec, Error, Result, C64};

/// Weights above this count as occupied levels.
pub const SUPPORT_EPS: f64 = 1e-7;
/// Newton starting points per face.
pub const MULTISTARTS: usize = 32;

const NEWTON_ACCEPT: f64 = 1e-10;
const NEWTON_ITERS: usize = 100;
const DUPLICATE_TOL: f64 = 1e-9;
const TIE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Feasibility {
    pub feasible: bool,
    /// Smallest number of levels able to carry the tangle; exceeds `d` when
    /// infeasible and is `usize::MAX` for τ₀ ≥ 2.
    pub min_support: usize,
}

/// Whether a pure state of local dimension `d` can carry tangle `τ₀`.
pub fn feasible_tau(tau0: f64, dim: Dim) -> Result<Feasibility> {
    if !(tau0 >= 0.0) || !tau0.is_finite() {
        return Err(Error::invalid(format!("tangle must be finite and >= 0, got {tau0}")));
    }
    let feasible = tau0 <= dim.max_tangle() + 1e-12;
    // τ₀ ≤ 2(k−1)/k  ⇔  k ≥ 2/(2−τ₀)
    let min_support = if tau0 >= 2.0 {
        usize::MAX
    } else {
        ((2.0 / (2.0 - tau0) - 1e-9).ceil() as usize).max(1)
    };
    Ok(Feasibility { feasible, min_support })
}

fn require_feasible(tau0: f64, dim: Dim) -> Result<usize> {
    let f = feasible_tau(tau0, dim)?;
    if !f.feasible {
        return Err(Error::InfeasibleTangle { tau0, dim: dim.get(), max: dim.max_tangle() });
    }
    Ok(f.min_support)
}

/// `|Ψ⟩⟨Ψ|` for the unnormalized `Ψ = Σ √w_i |ii⟩`.
fn pointer_density(w: &[f64], d: usize) -> CMat {
    let n = d * d;
    let mut rho = CMat::zeros(n, n);
    for (i, wi) in w.iter().enumerate() {
        for (j, wj) in w.iter().enumerate() {
            rho[(i * d + i, j * d + j)] = C64::from((wi * wj).sqrt());
        }
    }
    rho
}

/// Partial derivatives of τ̇ with respect to the Schmidt weights.
#[derive(Clone, Debug, PartialEq)]
pub struct RateGradient {
    pub values: Vec<f64>,
    /// Entries evaluated at `λ_i = 0`, where only the one-sided derivative
    /// exists.
    pub at_boundary: Vec<bool>,
}

/// τ̇ of pointer-basis Schmidt states for one channel, with the generator
/// built once.
#[derive(Clone, Debug)]
pub struct SchmidtRate {
    gen: Generator,
    dim: Dim,
}

impl SchmidtRate {
    pub fn new(spec: &ChannelSpec, dim: Dim) -> Result<Self> {
        Ok(SchmidtRate { gen: Generator::new(spec, dim)?, dim })
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim.get() {
            return Err(Error::invalid(format!("expected {} weights, got {}", self.dim, v.len())));
        }
        Ok(())
    }

    /// τ̇ of `Σ√λ_i |ii⟩`.
    pub fn rate(&self, lambdas: &[f64]) -> Result<f64> {
        self.check_len(lambdas)?;
        let rho = density_of(&pointer_state(lambdas)?);
        tangle_rate(&self.gen.apply(rho.mat()), &rho)
    }

    /// τ̇ evaluated on the unnormalized vector `Σ√w_i |ii⟩`; homogeneous of
    /// degree 2 in `w` and equal to [`SchmidtRate::rate`] on the simplex.
    pub fn rate_of_weights(&self, w: &[f64]) -> Result<f64> {
        self.check_len(w)?;
        if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::invalid("weights must be finite and nonnegative"));
        }
        Ok(self.weights_rate(w))
    }

    fn weights_rate(&self, w: &[f64]) -> f64 {
        let rho = pointer_density(w, self.dim.get());
        2.0 * tangle_form(&self.gen.apply(&rho), &rho, self.dim)
    }

    /// Analytic gradient of [`SchmidtRate::rate_of_weights`].
    pub fn gradient(&self, w: &[f64]) -> Result<RateGradient> {
        self.check_len(w)?;
        if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::invalid("weights must be finite and nonnegative"));
        }
        let d = self.dim.get();
        let n = self.dim.full();
        let form = |x: &CMat, y: &CMat| tangle_form(x, y, self.dim);
        let rho = pointer_density(w, d);
        let l_rho = self.gen.apply(&rho);

        let mut values = Vec::with_capacity(d);
        let mut at_boundary = Vec::with_capacity(d);
        for i in 0..d {
            // ρ′ = ∂ρ/∂x_i with x_i = √w_i: |ii⟩⟨Ψ| + |Ψ⟩⟨ii|
            let ii = i * d + i;
            let mut dp = CMat::zeros(n, n);
            for (j, wj) in w.iter().enumerate() {
                let s = C64::from(wj.sqrt());
                dp[(ii, j * d + j)] += s;
                dp[(j * d + j, ii)] += s;
            }
            let l_dp = self.gen.apply(&dp);
            if w[i] > 0.0 {
                // ∂/∂w = (1/2x)·∂/∂x, with ∂f/∂x = 2[B(Lρ′,ρ) + B(Lρ,ρ′)]
                values.push((form(&l_dp, &rho) + form(&l_rho, &dp)) / w[i].sqrt());
                at_boundary.push(false);
            } else {
                // f is even in x_i, so the one-sided ∂/∂w at 0 is ½·∂²f/∂x².
                let mut dpp = CMat::zeros(n, n);
                dpp[(ii, ii)] = C64::from(2.0);
                let l_dpp = self.gen.apply(&dpp);
                values.push(form(&l_dpp, &rho) + 2.0 * form(&l_dp, &dp) + form(&l_rho, &dpp));
                at_boundary.push(true);
            }
        }
        Ok(RateGradient { values, at_boundary })
    }

    /// Symmetric `M` with `rate(λ) = λᵀMλ`, by polarization on vertices and
    /// edge midpoints.
    pub fn quadratic_form(&self) -> DMatrix<f64> {
        let d = self.dim.get();
        let mut w = vec![0.0; d];
        let mut diag = vec![0.0; d];
        for i in 0..d {
            w[i] = 1.0;
            diag[i] = self.weights_rate(&w);
            w[i] = 0.0;
        }
        let mut m = DMatrix::from_diagonal(&DVector::from_vec(diag.clone()));
        for i in 0..d {
            for j in i + 1..d {
                w[i] = 1.0;
                w[j] = 1.0;
                let v = 0.5 * (self.weights_rate(&w) - diag[i] - diag[j]);
                w[i] = 0.0;
                w[j] = 0.0;
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }
}

/// τ̇ of the pointer-basis state `Σ√λ_i |ii⟩` under `spec`.
pub fn rate_of_schmidt(lambdas: &[f64], spec: &ChannelSpec) -> Result<f64> {
    let rho = density_of(&pointer_state(lambdas)?);
    tangle_rate(&crate::channels::rho_dot(&rho, spec)?, &rho)
}

/// Gradient of [`rate_of_schmidt`] with respect to each weight, holding the
/// others fixed (the state is not renormalized).
pub fn rate_grad(lambdas: &[f64], spec: &ChannelSpec) -> Result<RateGradient> {
    check_simplex(lambdas)?;
    let clamped: Vec<f64> = lambdas.iter().map(|l| l.max(0.0)).collect();
    SchmidtRate::new(spec, Dim::new(lambdas.len())?)?.gradient(&clamped)
}

/// Multipliers of `∇τ̇ = μ∇τ + ν·1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Multipliers {
    /// Tangle constraint.
    pub mu: f64,
    /// Normalization.
    pub nu: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StationaryPoint {
    pub lambdas: Vec<f64>,
    pub rate_value: f64,
    pub support: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizationResult {
    pub tau0: f64,
    pub lambdas: Vec<f64>,
    pub rate_value: f64,
    pub support: Vec<usize>,
    pub multipliers: Multipliers,
    pub kkt_residual: f64,
    pub n_restarts_used: usize,
    /// Every distinct converged stationary point, best first.
    pub stationary_points: Vec<StationaryPoint>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SchmidtOptions {
    pub multistarts: usize,
    pub seed: u64,
}

impl Default for SchmidtOptions {
    fn default() -> Self {
        SchmidtOptions { multistarts: MULTISTARTS, seed: 0 }
    }
}

fn support_of(lambdas: &[f64]) -> Vec<usize> {
    (0..lambdas.len()).filter(|&i| lambdas[i] > SUPPORT_EPS).collect()
}

fn sorted_desc(l: &[f64]) -> Vec<f64> {
    let mut v = l.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Maximum-rate ordering; near-equal rates fall back to the lexicographically
/// largest descending-sorted weights.
fn compare_candidates(a_rate: f64, a: &[f64], b_rate: f64, b: &[f64]) -> Ordering {
    let tol = TIE_TOL * a_rate.abs().max(b_rate.abs()).max(1.0);
    if (a_rate - b_rate).abs() > tol {
        return a_rate.total_cmp(&b_rate);
    }
    let (sa, sb) = (sorted_desc(a), sorted_desc(b));
    for (x, y) in sa.iter().zip(&sb) {
        if (x - y).abs() > DUPLICATE_TOL {
            return x.total_cmp(y);
        }
    }
    // Same multiset: prefer weight on lower levels for determinism.
    for (x, y) in a.iter().zip(b) {
        if (x - y).abs() > DUPLICATE_TOL {
            return x.total_cmp(y);
        }
    }
    Ordering::Equal
}

fn faces(d: usize, min_size: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = (1u32..(1 << d))
        .map(|mask| (0..d).filter(|i| mask & (1 << i) != 0).collect::<Vec<_>>())
        .filter(|f| f.len() >= min_size.max(1))
        .collect();
    out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    out
}

fn face_capacity(k: usize) -> f64 {
    2.0 * (k as f64 - 1.0) / k as f64
}

/// Orthonormal (Helmert) basis of the zero-sum subspace of ℝᵏ, as columns.
fn zero_sum_basis(k: usize) -> DMatrix<f64> {
    DMatrix::from_fn(k, k - 1, |i, j| {
        let n = (j + 1) as f64;
        let norm = (n * (n + 1.0)).sqrt();
        match i.cmp(&(j + 1)) {
            Ordering::Less => 1.0 / norm,
            Ordering::Equal => -n / norm,
            Ordering::Greater => 0.0,
        }
    })
}

/// One face written as `λ_S = c·1 + r·Qv` with `|v| = 1`; `c = 1/k` and the
/// radius `r` is fixed by τ₀. The rate becomes `const + 2r·bᵀv + r²·vᵀAv`,
/// which stays well conditioned as τ₀ approaches the face capacity.
struct FaceProblem {
    q: DMatrix<f64>,
    a: DMatrix<f64>,
    b: DVector<f64>,
    c: f64,
    r: f64,
}

impl FaceProblem {
    fn new(m_face: &DMatrix<f64>, tau0: f64) -> Self {
        let k = m_face.nrows();
        let c = 1.0 / k as f64;
        let r = ((1.0 - tau0 / 2.0) - c).max(0.0).sqrt();
        let q = zero_sum_basis(k);
        let a = q.transpose() * m_face * &q;
        let b = q.transpose() * (m_face * DVector::from_element(k, c));
        FaceProblem { q, a, b, c, r }
    }

    fn direction_of(&self, lam_face: &[f64]) -> Option<DVector<f64>> {
        let centered = DVector::from_iterator(lam_face.len(), lam_face.iter().map(|x| x - self.c));
        let v = self.q.transpose() * centered;
        let n = v.norm();
        (n > 1e-300).then(|| v / n)
    }

    fn weights(&self, v: &DVector<f64>) -> Vec<f64> {
        (&self.q * v * self.r).iter().map(|x| self.c + x).collect()
    }

    /// Lagrange system on the sphere: `b + rAv − θv = 0`, `(|v|² − 1)/2 = 0`.
    fn system(&self, v: &DVector<f64>, theta: f64) -> DVector<f64> {
        let m = v.len();
        let top = &self.b + &self.a * v * self.r - v * theta;
        DVector::from_iterator(m + 1, top.iter().copied().chain([0.5 * (v.norm_squared() - 1.0)]))
    }

    fn jacobian(&self, v: &DVector<f64>, theta: f64) -> DMatrix<f64> {
        let m = v.len();
        let mut j = DMatrix::zeros(m + 1, m + 1);
        j.view_mut((0, 0), (m, m)).copy_from(&(&self.a * self.r));
        for i in 0..m {
            j[(i, i)] -= theta;
            j[(i, m)] = -v[i];
            j[(m, i)] = v[i];
        }
        j
    }

    /// Damped Newton from the unit vector `v`.
    fn newton(&self, mut v: DVector<f64>) -> Option<DVector<f64>> {
        let m = v.len();
        let mut theta = v.dot(&(&self.b + &self.a * &v * self.r));
        let mut f = self.system(&v, theta);
        for _ in 0..NEWTON_ITERS {
            if f.amax() < 1e-15 {
                break;
            }
            let jac = self.jacobian(&v, theta);
            let rhs = -&f;
            let step = match jac.clone().lu().solve(&rhs) {
                Some(s) if s.iter().all(|x| x.is_finite()) => s,
                _ => jac.svd(true, true).solve(&rhs, 1e-14).ok()?,
            };
            let f0 = f.norm_squared();
            let mut alpha = 1.0;
            loop {
                let tv = &v + step.rows(0, m) * alpha;
                let tt = theta + step[m] * alpha;
                let ft = self.system(&tv, tt);
                if ft.norm_squared() <= (1.0 - 1e-4 * alpha) * f0 {
                    v = tv;
                    theta = tt;
                    f = ft;
                    break;
                }
                alpha *= 0.5;
                if alpha < 1e-10 {
                    return (f.amax() < NEWTON_ACCEPT).then(|| v.normalize());
                }
            }
        }
        (f.amax() < NEWTON_ACCEPT && v.iter().all(|x| x.is_finite())).then(|| v.normalize())
    }
}

/// Stationary points of one face; the second value counts starts used.
fn solve_face(
    m: &DMatrix<f64>,
    face: &[usize],
    face_index: usize,
    tau0: f64,
    d: usize,
    opts: &SchmidtOptions,
    warm: &[Vec<f64>],
) -> (Vec<Vec<f64>>, usize) {
    let k = face.len();
    let embed = |local: &[f64]| {
        let mut full = vec![0.0; d];
        for (&i, &x) in face.iter().zip(local) {
            full[i] = x;
        }
        full
    };
    let capacity = face_capacity(k);
    if (tau0 - capacity).abs() <= 1e-12 {
        // The constraint set on this face is the centroid alone.
        return (vec![embed(&vec![1.0 / k as f64; k])], 1);
    }
    if tau0 > capacity {
        return (Vec::new(), 0);
    }
    let m_face = DMatrix::from_fn(k, k, |r, c| m[(face[r], face[c])]);
    let problem = FaceProblem::new(&m_face, tau0);
    let dim = Dim::new(d).expect("d >= 2");

    let mut starts: Vec<DVector<f64>> = warm
        .iter()
        .filter(|l| support_of(l) == face)
        .filter_map(|l| problem.direction_of(&face.iter().map(|&i| l[i]).collect::<Vec<_>>()))
        .collect();
    for s in 0..opts.multistarts {
        let mut rng = stream(opts.seed, (face_index * 10_000 + s) as u64);
        let sampled = schmidt_with_tangle_on(tau0, face, dim, &mut rng)
            .ok()
            .and_then(|l| problem.direction_of(&face.iter().map(|&i| l[i]).collect::<Vec<_>>()));
        // Newton needs no positivity along the way, so a free direction
        // stands in when the face barely meets the level set.
        let v = sampled.unwrap_or_else(|| {
            DVector::from_fn(k - 1, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal)).normalize()
        });
        starts.push(v);
    }
    let used = starts.len();
    let points = starts
        .into_iter()
        .filter_map(|v| problem.newton(v))
        .map(|v| problem.weights(&v))
        .filter(|l| l.iter().all(|&x| x >= -1e-12))
        .map(|l| embed(&l.iter().map(|x| x.max(0.0)).collect::<Vec<_>>()))
        .collect();
    (points, used)
}

/// First-order optimality measure and multipliers at `lambdas` on the
/// simplex slice `{Σλ = 1, τ = τ₀}`: the norm of the gradient projected on
/// the tangent space of the support, and the largest ascent obtainable by
/// moving weight onto an empty level.
fn certify(grad: &RateGradient, lambdas: &[f64]) -> (f64, Multipliers) {
    let d = lambdas.len();
    let support = support_of(lambdas);
    let g = &grad.values;
    let k = support.len();
    let gs: Vec<f64> = support.iter().map(|&i| g[i]).collect();
    let ls: Vec<f64> = support.iter().map(|&i| lambdas[i]).collect();
    let g_mean = gs.iter().sum::<f64>() / k as f64;
    let l_mean = ls.iter().sum::<f64>() / k as f64;
    let u: Vec<f64> = ls.iter().map(|x| x - l_mean).collect();
    let r = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    if r < 1e-9 {
        // Uniform weights sit at the face capacity: moving weight off the
        // face is second order, zero-sum moves inside it are first order.
        let residual = if k == d { 0.0 } else { gs.iter().map(|x| (x - g_mean).abs()).fold(0.0, f64::max) };
        return (residual, Multipliers { mu: 0.0, nu: g_mean });
    }
    // g_S = g_mean·1 + g_u·û + t with t tangent; g_mean·1 + g_u·û = aλ + ν·1.
    let g_u: f64 = gs.iter().zip(&u).map(|(x, y)| (x - g_mean) * y / r).sum();
    let tangent = gs
        .iter()
        .zip(&u)
        .map(|(x, y)| x - g_mean - g_u * y / r)
        .map(|t| t * t)
        .sum::<f64>()
        .sqrt();
    let a = g_u / r;
    let nu = g_mean - a * l_mean;
    let outward = (0..d)
        .filter(|i| !support.contains(i))
        .map(|j| (g[j] - nu).max(0.0))
        .fold(0.0, f64::max);
    (tangent.max(outward), Multipliers { mu: -a / 4.0, nu })
}

/// Maximal τ̇ over pointer-basis states with tangle `τ₀`.
pub fn optimize_schmidt(tau0: f64, spec: &ChannelSpec, dim: Dim) -> Result<OptimizationResult> {
    optimize_schmidt_with(tau0, spec, dim, &SchmidtOptions::default(), &[])
}

/// [`optimize_schmidt`] with explicit options and extra warm-start points,
/// each moved onto the τ₀ level set of its own face.
pub fn optimize_schmidt_with(
    tau0: f64,
    spec: &ChannelSpec,
    dim: Dim,
    opts: &SchmidtOptions,
    warm: &[Vec<f64>],
) -> Result<OptimizationResult> {
    let min_support = require_feasible(tau0, dim)?;
    let d = dim.get();
    let eval = SchmidtRate::new(spec, dim)?;
    let m = eval.quadratic_form();

    let all_faces = faces(d, min_support);
    let per_face: Vec<(Vec<Vec<f64>>, usize)> = all_faces
        .par_iter()
        .enumerate()
        .map(|(fi, face)| solve_face(&m, face, fi, tau0, d, opts, warm))
        .collect();
    let n_restarts_used = per_face.iter().map(|(_, n)| n).sum();

    let mut distinct: Vec<Vec<f64>> = Vec::new();
    for p in per_face.into_iter().flat_map(|(pts, _)| pts) {
        let dup = distinct
            .iter()
            .any(|q| q.iter().zip(&p).all(|(a, b)| (a - b).abs() < DUPLICATE_TOL));
        if !dup {
            distinct.push(p);
        }
    }
    if distinct.is_empty() {
        return Err(Error::NoStationaryPoint(format!(
            "no Newton start converged for tau0 = {tau0}, d = {d}, {spec:?} ({n_restarts_used} starts)"
        )));
    }

    let mut points = distinct
        .into_iter()
        .map(|l| {
            let rate_value = eval.rate(&l)?;
            Ok(StationaryPoint { support: support_of(&l), lambdas: l, rate_value })
        })
        .collect::<Result<Vec<_>>>()?;
    points.sort_by(|a, b| compare_candidates(b.rate_value, &b.lambdas, a.rate_value, &a.lambdas));

    let best = points[0].clone();
    let grad = eval.gradient(&best.lambdas)?;
    let (kkt_residual, multipliers) = certify(&grad, &best.lambdas);
    Ok(OptimizationResult {
        tau0,
        lambdas: best.lambdas,
        rate_value: best.rate_value,
        support: best.support,
        multipliers,
        kkt_residual,
        n_restarts_used,
        stationary_points: points,
    })
}

/// [`optimize_schmidt`] along a τ grid, warm-starting each point from all
/// stationary points of the previous one.
pub fn sweep_tau(tau_grid: &[f64], spec: &ChannelSpec, dim: Dim) -> Result<Vec<OptimizationResult>> {
    sweep_tau_with(tau_grid, spec, dim, &SchmidtOptions::default())
}

pub fn sweep_tau_with(
    tau_grid: &[f64],
    spec: &ChannelSpec,
    dim: Dim,
    opts: &SchmidtOptions,
) -> Result<Vec<OptimizationResult>> {
    let mut out: Vec<OptimizationResult> = Vec::with_capacity(tau_grid.len());
    for &tau0 in tau_grid {
        let warm: Vec<Vec<f64>> = out
            .last()
            .map(|r| r.stationary_points.iter().map(|p| p.lambdas.clone()).collect())
            .unwrap_or_default();
        out.push(optimize_schmidt_with(tau0, spec, dim, opts, &warm)?);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult {
    pub lambdas: Vec<f64>,
    pub rate_value: f64,
    pub evaluated: usize,
}

const ORACLE_CHUNK: usize = 1024;

/// Best τ̇ among `n` random weights on the full simplex, `n/4` more spread
/// over the proper faces with at least three levels, and the two exact
/// solutions on every two-level face. Rates are evaluated state by state.
pub fn oracle_random_search<R: Rng + ?Sized>(
    tau0: f64,
    spec: &ChannelSpec,
    dim: Dim,
    n: usize,
    rng: &mut R,
) -> Result<OracleResult> {
    let min_support = require_feasible(tau0, dim)?;
    let d = dim.get();
    let base = rng.next_u64();
    let eval = SchmidtRate::new(spec, dim)?;

    let mut fixed: Vec<Vec<f64>> = Vec::new();
    if min_support <= 2 {
        // λ_a + λ_b = 1, λ_a·λ_b = τ₀/4
        let disc = (1.0 - tau0).max(0.0).sqrt();
        for face in faces(d, 2).into_iter().filter(|f| f.len() == 2) {
            for (x, y) in [((1.0 + disc) / 2.0, (1.0 - disc) / 2.0), ((1.0 - disc) / 2.0, (1.0 + disc) / 2.0)] {
                let mut l = vec![0.0; d];
                l[face[0]] = x;
                l[face[1]] = y;
                fixed.push(l);
            }
        }
    }

    let full: Vec<usize> = (0..d).collect();
    let proper: Vec<Vec<usize>> = faces(d, min_support.max(3)).into_iter().filter(|f| f.len() < d).collect();
    let mut jobs: Vec<(Vec<usize>, usize)> = Vec::new();
    let mut push_jobs = |face: &Vec<usize>, count: usize| {
        let mut left = count;
        while left > 0 {
            let c = left.min(ORACLE_CHUNK);
            jobs.push((face.clone(), c));
            left -= c;
        }
    };
    push_jobs(&full, n);
    if !proper.is_empty() {
        let each = (n / 4).div_ceil(proper.len());
        for face in &proper {
            push_jobs(face, each);
        }
    }

    let chunk_best = |(t, (face, count)): (usize, &(Vec<usize>, usize))| -> Result<Option<(f64, Vec<f64>, usize)>> {
        let mut rng = stream(base, t as u64);
        let mut best: Option<(f64, Vec<f64>)> = None;
        let mut done = 0;
        for _ in 0..*count {
            let Ok(l) = schmidt_with_tangle_on(tau0, face, dim, &mut rng) else { break };
            let r = eval.rate(&l)?;
            done += 1;
            if best.as_ref().is_none_or(|(br, bl)| compare_candidates(r, &l, *br, bl) == Ordering::Greater) {
                best = Some((r, l));
            }
        }
        Ok(best.map(|(r, l)| (r, l, done)))
    };
    let sampled = jobs.par_iter().enumerate().map(chunk_best).collect::<Result<Vec<_>>>()?;

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut evaluated = 0;
    let candidates = fixed
        .into_iter()
        .map(|l| Ok((eval.rate(&l)?, l, 1)))
        .chain(sampled.into_iter().flatten().map(Ok))
        .collect::<Result<Vec<_>>>()?;
    for (r, l, count) in candidates {
        evaluated += count;
        if best.as_ref().is_none_or(|(br, bl)| compare_candidates(r, &l, *br, bl) == Ordering::Greater) {
            best = Some((r, l));
        }
    }
    let (rate_value, lambdas) =
        best.ok_or(Error::SamplingFailure { tries: crate::sampling::MAX_TRIES })?;
    Ok(OracleResult { lambdas, rate_value, evaluated })
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneralOptimum {
    pub psi: PureState,
    pub rate_value: f64,
    /// `max(|‖ψ‖ − 1|, |τ(ψ) − τ₀|)`.
    pub constraint_residual: f64,
    /// Final τ̇ of every restart, in restart order.
    pub restart_rates: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeneralOptions {
    pub restarts: usize,
    pub max_iterations: usize,
    /// Stop once the projected gradient norm falls below this.
    pub gradient_tol: f64,
}

impl Default for GeneralOptions {
    fn default() -> Self {
        GeneralOptions { restarts: 64, max_iterations: 3000, gradient_tol: 1e-10 }
    }
}

/// `W(Y) = 2Y − Y_A⊗1 − 1⊗Y_B`, so that the tangle form is `Re Tr[X·W(Y)]`.
fn form_kernel(y: &CMat, dim: Dim) -> CMat {
    let d = dim.get();
    let ya = reduce(y, dim, Side::A);
    let yb = reduce(y, dim, Side::B);
    let mut out = y * C64::from(2.0);
    for a in 0..d {
        for b in 0..d {
            for k in 0..d {
                out[(a * d + b, k * d + b)] -= ya[(a, k)];
                out[(a * d + b, a * d + k)] -= yb[(b, k)];
            }
        }
    }
    out
}

fn re_inner(u: &CVec, v: &CVec) -> f64 {
    u.iter().zip(v.iter()).map(|(a, b)| (a.conj() * b).re).sum()
}

/// Σλ² adjusted to `1 − τ₀/2`: radially from the centroid when that stays
/// in the simplex, otherwise by sharpening `λ^p`, which keeps zero weights
/// at zero.
fn fix_tangle(lambdas: &[f64], tau0: f64) -> Vec<f64> {
    let d = lambdas.len();
    let target = 1.0 - tau0 / 2.0;
    let current: f64 = lambdas.iter().map(|x| x * x).sum();
    if (current - target).abs() <= 1e-16 {
        return lambdas.to_vec();
    }
    let c = 1.0 / d as f64;
    let vv: f64 = lambdas.iter().map(|x| (x - c) * (x - c)).sum();
    if target <= c || vv < 1e-300 {
        return vec![c; d];
    }
    let t = ((target - c) / vv).sqrt();
    let radial: Vec<f64> = lambdas.iter().map(|x| c + t * (x - c)).collect();
    if radial.iter().all(|&x| x >= 0.0) {
        return radial;
    }
    let sharpen = |p: f64| -> Vec<f64> {
        let v: Vec<f64> = lambdas.iter().map(|x| x.max(0.0).powf(p)).collect();
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect()
    };
    let purity = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
    let (mut lo, mut hi) = (1.0, 2.0);
    while purity(&sharpen(hi)) < target && hi < 1e4 {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if purity(&sharpen(mid)) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 * hi {
            break;
        }
    }
    sharpen(0.5 * (lo + hi))
}

struct Ascent<'a> {
    gen: &'a Generator,
    dim: Dim,
    tau0: f64,
}

impl Ascent<'_> {
    fn value(&self, x: &CVec) -> f64 {
        let rho = x * x.adjoint();
        2.0 * tangle_form(&self.gen.apply(&rho), &rho, self.dim)
    }

    /// Riemannian gradient projected onto the tangent space of
    /// `{‖ψ‖ = 1, τ(ψ) = τ₀}` under the real inner product `Re⟨u, v⟩`.
    fn projected_gradient(&self, x: &CVec) -> CVec {
        let rho = x * x.adjoint();
        let l_rho = self.gen.apply(&rho);
        let h = (self.gen.apply_adjoint(&form_kernel(&rho, self.dim)) + form_kernel(&l_rho, self.dim))
            * C64::from(4.0);
        let mut g = h * x;

        let rho_a = reduce(&rho, self.dim, Side::A);
        let n2 = rho_a.kronecker(&CMat::identity(self.dim.get(), self.dim.get())) * x;
        let e1 = x / C64::from(x.norm());
        let mut e2 = &n2 - &e1 * C64::from(re_inner(&e1, &n2));
        let e2n = e2.norm();
        for e in [&e1] {
            g -= e * C64::from(re_inner(e, &g));
        }
        if e2n > 1e-12 {
            e2 /= C64::from(e2n);
            g -= &e2 * C64::from(re_inner(&e2, &g));
        }
        g
    }

    fn retract(&self, x: &CVec) -> Result<CVec> {
        let psi = PureState::normalized(x.clone(), self.dim)?;
        let s = schmidt_of(&psi)?;
        let lambdas = fix_tangle(&s.lambdas, self.tau0);
        Ok(pure_from_schmidt(&lambdas, &s.u_a, &s.u_b)?.amps().clone())
    }

    /// Armijo backtracking with Barzilai–Borwein trial steps.
    fn run(&self, start: CVec, opts: &GeneralOptions) -> Result<CVec> {
        let mut x = self.retract(&start)?;
        let mut f = self.value(&x);
        let mut g = self.projected_gradient(&x);
        let mut alpha = 0.1 / g.norm().max(1.0);
        for _ in 0..opts.max_iterations {
            let gg = g.norm_squared();
            if gg.sqrt() < opts.gradient_tol {
                break;
            }
            let mut accepted = None;
            let mut a = alpha;
            while a > 1e-14 {
                let trial = self.retract(&(&x + &g * C64::from(a)))?;
                let ft = self.value(&trial);
                if ft >= f + 1e-4 * a * gg {
                    accepted = Some((trial, ft));
                    break;
                }
                a *= 0.5;
            }
            let Some((next, fnext)) = accepted else { break };
            let gnext = self.projected_gradient(&next);
            let s = &next - &x;
            let y = &gnext - &g;
            let sy = re_inner(&s, &y);
            alpha = if sy < 0.0 { (s.norm_squared() / -sy).clamp(1e-8, 1e2) } else { (2.0 * a).min(1e2) };
            let stalled = (fnext - f).abs() <= 1e-16 * f.abs().max(1.0);
            x = next;
            f = fnext;
            g = gnext;
            if stalled && g.norm() < 1e3 * opts.gradient_tol {
                break;
            }
        }
        Ok(x)
    }
}

const HOP_ROUNDS: usize = 8;

/// Pairs of level permutations `(π_A, π_B)`: every pair for small `d`,
/// otherwise single transpositions on either side.
fn level_relabelings(d: usize) -> Vec<(Vec<usize>, Vec<usize>)> {
    let id: Vec<usize> = (0..d).collect();
    if d <= 4 {
        let perms = permutations(d);
        return perms.iter().flat_map(|a| perms.iter().map(move |b| (a.clone(), b.clone()))).collect();
    }
    let mut out = vec![(id.clone(), id.clone())];
    for i in 0..d {
        for j in i + 1..d {
            let mut t = id.clone();
            t.swap(i, j);
            out.push((t.clone(), id.clone()));
            out.push((id.clone(), t.clone()));
            out.push((t.clone(), t));
        }
    }
    out
}

fn permutations(d: usize) -> Vec<Vec<usize>> {
    if d == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(d - 1) {
        for pos in 0..d {
            let mut q = p.clone();
            q.insert(pos, d - 1);
            out.push(q);
        }
    }
    out
}

/// `(P_A ⊗ P_B) x` with `P|a⟩ = |π(a)⟩`.
fn relabel(x: &CVec, pa: &[usize], pb: &[usize]) -> CVec {
    let d = pa.len();
    let mut y = CVec::zeros(x.len());
    for a in 0..d {
        for b in 0..d {
            y[pa[a] * d + pb[b]] = x[a * d + b];
        }
    }
    y
}

/// Best τ̇ found by projected gradient ascent over all pure states with
/// tangle `τ₀`, from `restarts` random starts.
pub fn optimize_general<R: Rng + ?Sized>(
    tau0: f64,
    spec: &ChannelSpec,
    dim: Dim,
    restarts: usize,
    rng: &mut R,
) -> Result<GeneralOptimum> {
    optimize_general_with(tau0, spec, dim, &GeneralOptions { restarts, ..GeneralOptions::default() }, rng)
}

pub fn optimize_general_with<R: Rng + ?Sized>(
    tau0: f64,
    spec: &ChannelSpec,
    dim: Dim,
    opts: &GeneralOptions,
    rng: &mut R,
) -> Result<GeneralOptimum> {
    require_feasible(tau0, dim)?;
    if opts.restarts == 0 {
        return Err(Error::invalid("at least one restart is required"));
    }
    let base = rng.next_u64();
    let gen = Generator::new(spec, dim)?;
    let ascent = Ascent { gen: &gen, dim, tau0 };
    let finals = (0..opts.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(base, r as u64);
            let start = state_with_tangle(tau0, dim, &mut rng)?;
            let x = ascent.run(start.amps().clone(), opts)?;
            let psi = PureState::normalized(x, dim)?;
            let rho = density_of(&psi);
            let rate = tangle_rate(&gen.apply(rho.mat()), &rho)?;
            Ok((psi, rate))
        })
        .collect::<Result<Vec<_>>>()?;

    let restart_rates: Vec<f64> = finals.iter().map(|(_, r)| *r).collect();
    let (mut psi, mut rate_value) = finals
        .into_iter()
        .reduce(|best, cand| if cand.1 > best.1 { cand } else { best })
        .expect("at least one restart");

    // Local maxima related by relabeling levels on either side are common
    // and their basins can be small, so hop across relabelings of the best
    // point until none of them ascends higher.
    let moves = level_relabelings(dim.get());
    for _ in 0..HOP_ROUNDS {
        let x = psi.amps();
        let hop = moves
            .par_iter()
            .map(|(pa, pb)| {
                let y = relabel(x, pa, pb);
                (ascent.value(&y), y)
            })
            .reduce_with(|a, b| if b.0 > a.0 { b } else { a })
            .expect("identity relabeling");
        if hop.0 <= rate_value + 1e-12 * rate_value.abs().max(1.0) {
            break;
        }
        let cand = PureState::normalized(ascent.run(hop.1, opts)?, dim)?;
        let rho = density_of(&cand);
        let rate = tangle_rate(&gen.apply(rho.mat()), &rho)?;
        if rate <= rate_value {
            break;
        }
        (psi, rate_value) = (cand, rate);
    }
    let lambdas = schmidt_of(&psi)?.lambdas;
    let constraint_residual =
        (psi.amps().norm() - 1.0).abs().max((tangle_pure_unchecked(&lambdas) - tau0).abs());
    Ok(GeneralOptimum { psi, rate_value, constraint_residual, restart_rates })
}

/// Largest `1 − max_j |u[j,i]|` over the Schmidt vectors of both sides whose
/// weight exceeds `threshold`; zero when every occupied Schmidt vector is a
/// computational basis vector up to phase.
pub fn pointer_basis_deviation(psi: &PureState, threshold: f64) -> Result<f64> {
    let s = schmidt_of(psi)?;
    let d = psi.dim().get();
    let mut worst: f64 = 0.0;
    for (i, &l) in s.lambdas.iter().enumerate() {
        if l <= threshold {
            continue;
        }
        for u in [&s.u_a, &s.u_b] {
            let peak = (0..d).map(|j| u[(j, i)].norm()).fold(0.0, f64::max);
            worst = worst.max(1.0 - peak);
        }
    }
    Ok(worst)
}
