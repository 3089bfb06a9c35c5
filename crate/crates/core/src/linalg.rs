//! Bipartite states on `C^d ⊗ C^d`, Schmidt machinery and random unitaries.

use std::fmt;
use std::str::FromStr;

use nalgebra::{SymmetricEigen, QR, SVD};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::{CMat, CVec, Error, Result, C64};

const NORM_TOL: f64 = 1e-12;
const SIMPLEX_TOL: f64 = 1e-10;
const UNITARY_TOL: f64 = 1e-10;

/// Local dimension of each subsystem.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Dim(usize);

impl Dim {
    pub fn new(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::invalid(format!("local dimension must be >= 2, got {d}")));
        }
        Ok(Dim(d))
    }

    #[inline]
    pub fn get(self) -> usize {
        self.0
    }

    /// Dimension of the bipartite space, `d²`.
    #[inline]
    pub fn full(self) -> usize {
        self.0 * self.0
    }

    /// Largest pure-state tangle, `2(d-1)/d`.
    pub fn max_tangle(self) -> f64 {
        2.0 * (self.0 as f64 - 1.0) / self.0 as f64
    }
}

impl fmt::Display for Dim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One of the two subsystems.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    A,
    B,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::A => Side::B,
            Side::B => Side::A,
        }
    }
}

impl FromStr for Side {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(Side::A),
            "B" | "b" => Ok(Side::B),
            other => Err(Error::invalid(format!("unknown subsystem tag {other:?}"))),
        }
    }
}

/// Normalized pure state, amplitude `k = a·d + b` belongs to `|a⟩⊗|b⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    amps: CVec,
    dim: Dim,
}

impl PureState {
    /// Wraps an amplitude vector that is already normalized.
    pub fn new(amps: CVec, dim: Dim) -> Result<Self> {
        check_len(amps.len(), dim)?;
        let norm = amps.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::invalid(format!("state norm {norm} differs from 1")));
        }
        Ok(PureState { amps, dim })
    }

    /// Normalizes an arbitrary nonzero amplitude vector.
    pub fn normalized(amps: CVec, dim: Dim) -> Result<Self> {
        check_len(amps.len(), dim)?;
        let norm = amps.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::invalid("cannot normalize a zero or non-finite vector"));
        }
        Ok(PureState { amps: amps / C64::from(norm), dim })
    }

    /// Product basis state `|a⟩⊗|b⟩`.
    pub fn basis(dim: Dim, a: usize, b: usize) -> Result<Self> {
        let d = dim.get();
        if a >= d || b >= d {
            return Err(Error::invalid(format!("basis label ({a},{b}) out of range for d={d}")));
        }
        let mut amps = CVec::zeros(dim.full());
        amps[a * d + b] = C64::new(1.0, 0.0);
        Ok(PureState { amps, dim })
    }

    /// Product state `|α⟩⊗|β⟩` of two local vectors (normalized on the way).
    pub fn product(alpha: &CVec, beta: &CVec) -> Result<Self> {
        if alpha.len() != beta.len() {
            return Err(Error::invalid("local factors have different dimensions"));
        }
        let dim = Dim::new(alpha.len())?;
        PureState::normalized(alpha.kronecker(beta), dim)
    }

    pub fn amps(&self) -> &CVec {
        &self.amps
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    /// Amplitudes reshaped to the `d×d` matrix `ψ_{ab}`.
    pub fn amplitude_matrix(&self) -> CMat {
        let d = self.dim.get();
        CMat::from_fn(d, d, |a, b| self.amps[a * d + b])
    }

    /// `|⟨self|other⟩|`, the phase-insensitive overlap.
    pub fn overlap(&self, other: &PureState) -> f64 {
        self.amps.dotc(&other.amps).norm()
    }
}

fn check_len(len: usize, dim: Dim) -> Result<()> {
    if len != dim.full() {
        return Err(Error::invalid(format!(
            "amplitude vector has length {len}, expected {}",
            dim.full()
        )));
    }
    Ok(())
}

/// Density operator on the bipartite space.
///
/// [`DensityMatrix::new`] validates hermiticity, unit trace and positivity.
/// States produced by time integration are wrapped unchecked and carry
/// their own monitors instead (see [`crate::evolution`]).
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    mat: CMat,
    dim: Dim,
}

impl DensityMatrix {
    pub fn new(mat: CMat, dim: Dim) -> Result<Self> {
        let n = dim.full();
        if mat.nrows() != n || mat.ncols() != n {
            return Err(Error::invalid(format!(
                "density matrix is {}x{}, expected {n}x{n}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        let herm = hermiticity_error(&mat);
        if herm > 1e-12 {
            return Err(Error::invalid(format!("matrix is not Hermitian (error {herm:e})")));
        }
        let tr = mat.trace();
        if (tr.re - 1.0).abs() > 1e-10 || tr.im.abs() > 1e-10 {
            return Err(Error::invalid(format!("trace {tr} differs from 1")));
        }
        let min_eig = min_eigenvalue(&mat);
        if min_eig < -1e-8 {
            return Err(Error::invalid(format!("matrix has negative eigenvalue {min_eig:e}")));
        }
        Ok(DensityMatrix { mat, dim })
    }

    pub(crate) fn from_unchecked(mat: CMat, dim: Dim) -> Self {
        DensityMatrix { mat, dim }
    }

    pub fn maximally_mixed(dim: Dim) -> Self {
        let n = dim.full();
        DensityMatrix { mat: CMat::identity(n, n) / C64::from(n as f64), dim }
    }

    /// `ρ_A ⊗ ρ_B`; both factors must be valid `d×d` density matrices.
    pub fn product(rho_a: &CMat, rho_b: &CMat) -> Result<Self> {
        if rho_a.shape() != rho_b.shape() || rho_a.nrows() != rho_a.ncols() {
            return Err(Error::invalid("local factors must be square with equal shapes"));
        }
        let dim = Dim::new(rho_a.nrows())?;
        DensityMatrix::new(rho_a.kronecker(rho_b), dim)
    }

    pub fn mat(&self) -> &CMat {
        &self.mat
    }

    pub fn into_mat(self) -> CMat {
        self.mat
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }
}

/// Schmidt coefficients (descending) and the local bases as unitary columns.
#[derive(Clone, Debug)]
pub struct SchmidtDecomposition {
    pub lambdas: Vec<f64>,
    pub u_a: CMat,
    pub u_b: CMat,
}

impl SchmidtDecomposition {
    /// `Σ_i √λ_i (u_A|i⟩)⊗(u_B|i⟩)`.
    pub fn reconstruct(&self) -> Result<PureState> {
        pure_from_schmidt(&self.lambdas, &self.u_a, &self.u_b)
    }
}

pub(crate) fn check_simplex(lambdas: &[f64]) -> Result<()> {
    if lambdas.iter().any(|l| !l.is_finite() || *l < -SIMPLEX_TOL) {
        return Err(Error::invalid("Schmidt weights must be finite and nonnegative"));
    }
    let sum: f64 = lambdas.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::invalid(format!("Schmidt weights sum to {sum}, expected 1")));
    }
    Ok(())
}

/// Builds `Σ_i √λ_i (u_A|i⟩)⊗(u_B|i⟩)`.
pub fn pure_from_schmidt(lambdas: &[f64], u_a: &CMat, u_b: &CMat) -> Result<PureState> {
    check_simplex(lambdas)?;
    let d = lambdas.len();
    let dim = Dim::new(d)?;
    for (name, u) in [("u_A", u_a), ("u_B", u_b)] {
        if u.nrows() != d || u.ncols() != d {
            return Err(Error::invalid(format!("{name} must be {d}x{d}")));
        }
        if unitarity_error(u) > UNITARY_TOL {
            return Err(Error::invalid(format!("{name} is not unitary")));
        }
    }
    let mut amps = CVec::zeros(dim.full());
    for (i, &l) in lambdas.iter().enumerate() {
        let w = C64::from(l.max(0.0).sqrt());
        if w.re == 0.0 {
            continue;
        }
        for a in 0..d {
            let ca = u_a[(a, i)] * w;
            for b in 0..d {
                amps[a * d + b] += ca * u_b[(b, i)];
            }
        }
    }
    PureState::normalized(amps, dim)
}

/// `Σ_i √λ_i |ii⟩`, Schmidt form in the computational basis.
pub fn pointer_state(lambdas: &[f64]) -> Result<PureState> {
    let d = lambdas.len();
    let id = CMat::identity(d, d);
    pure_from_schmidt(lambdas, &id, &id)
}

/// Schmidt decomposition from the SVD of the amplitude matrix.
pub fn schmidt_of(psi: &PureState) -> Result<SchmidtDecomposition> {
    let d = psi.dim().get();
    let m = psi.amplitude_matrix();
    let norm = m.norm();
    if !(norm > 0.0) {
        return Err(Error::invalid("zero state has no Schmidt decomposition"));
    }
    let svd = SVD::new(m, true, true);
    let u = svd.u.expect("requested left singular vectors");
    let v_t = svd.v_t.expect("requested right singular vectors");
    let s = svd.singular_values;

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| s[j].total_cmp(&s[i]));

    // ψ = U Σ V†  ⇒  ψ_ab = Σ_i s_i U_ai (V†)_ib, so the B-side vectors are rows of V†.
    let total: f64 = s.iter().map(|x| x * x).sum();
    let lambdas = order.iter().map(|&i| s[i] * s[i] / total).collect();
    let u_a = CMat::from_fn(d, d, |a, col| u[(a, order[col])]);
    let u_b = CMat::from_fn(d, d, |b, col| v_t[(order[col], b)]);
    Ok(SchmidtDecomposition { lambdas, u_a, u_b })
}

/// `|ψ⟩⟨ψ|`.
pub fn density_of(psi: &PureState) -> DensityMatrix {
    DensityMatrix { mat: psi.amps() * psi.amps().adjoint(), dim: psi.dim() }
}

/// Reduced matrix of an arbitrary operator on the bipartite space;
/// `keep` names the subsystem that survives.
pub fn reduce(mat: &CMat, dim: Dim, keep: Side) -> CMat {
    let d = dim.get();
    match keep {
        Side::A => CMat::from_fn(d, d, |a, a2| (0..d).map(|b| mat[(a * d + b, a2 * d + b)]).sum()),
        Side::B => CMat::from_fn(d, d, |b, b2| (0..d).map(|a| mat[(a * d + b, a * d + b2)]).sum()),
    }
}

/// Reduced density matrix of subsystem `side`.
pub fn partial_trace(rho: &DensityMatrix, side: Side) -> CMat {
    reduce(rho.mat(), rho.dim(), side)
}

/// `Tr ρ²`.
pub fn purity(rho: &DensityMatrix) -> f64 {
    rho.mat().iter().map(|z| z.norm_sqr()).sum()
}

/// Haar-distributed unitary via QR of a complex Ginibre matrix, with the
/// phases of `R`'s diagonal absorbed into `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(d: Dim, rng: &mut R) -> CMat {
    let n = d.get();
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let z = CMat::from_fn(n, n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re * scale, im * scale)
    });
    let qr = QR::new(z);
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 { rjj / rjj.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Random unit vector in `C^n` (uniform on the sphere).
pub fn random_unit_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CVec {
    loop {
        let v = CVec::from_fn(n, |_, _| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            C64::new(re, im)
        });
        let norm = v.norm();
        if norm > 1e-300 {
            return v / C64::from(norm);
        }
    }
}

/// Largest entrywise deviation from hermiticity.
pub fn hermiticity_error(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut err: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            err = err.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    err
}

/// Largest entrywise deviation of `U U†` from the identity.
pub fn unitarity_error(u: &CMat) -> f64 {
    let n = u.nrows();
    let p = u * u.adjoint();
    let mut err: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            err = err.max((p[(i, j)] - C64::from(target)).norm());
        }
    }
    err
}

/// Sorted (ascending) eigenvalues of the Hermitian part of `m`.
pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    let h = (m + m.adjoint()) * C64::from(0.5);
    let mut ev: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn min_eigenvalue(m: &CMat) -> f64 {
    hermitian_eigenvalues(m).first().copied().unwrap_or(0.0)
}

/// `(M + M†)/2`.
pub fn hermitize(m: &CMat) -> CMat {
    (m + m.adjoint()) * C64::from(0.5)
}
