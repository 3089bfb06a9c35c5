//! Local dissipation: dephasing and decay coupling operators and the
//! Lindblad generator `L_σ ρ = 2σρσ† − σ†σρ − ρσ†σ`.

use std::fmt;
use std::str::FromStr;

use crate::linalg::{DensityMatrix, Dim, Side};
use crate::{CMat, Error, Result, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ChannelKind {
    Dephasing,
    Decay,
}

impl FromStr for ChannelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dephasing" => Ok(ChannelKind::Dephasing),
            "decay" => Ok(ChannelKind::Decay),
            other => Err(Error::invalid(format!("unknown channel {other:?}"))),
        }
    }
}

impl fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChannelKind::Dephasing => "dephasing",
            ChannelKind::Decay => "decay",
        })
    }
}

/// How the excited levels of the decay family couple to the environment.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum DecayMode {
    /// One jump operator `(i+1)^q |0⟩⟨i+1|` per excited level.
    #[default]
    Independent,
    /// A single jump operator, the sum of all level terms ([`sigma_decay`]).
    /// Superpositions orthogonal to `Σ(i+1)^q |i+1⟩` are then dark.
    Collective,
}

impl FromStr for DecayMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "independent" => Ok(DecayMode::Independent),
            "collective" => Ok(DecayMode::Collective),
            other => Err(Error::invalid(format!("unknown decay mode {other:?}"))),
        }
    }
}

/// Which subsystems couple to their own environment.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Sides {
    A,
    B,
    #[default]
    Both,
}

impl Sides {
    pub fn sides(self) -> &'static [Side] {
        match self {
            Sides::A => &[Side::A],
            Sides::B => &[Side::B],
            Sides::Both => &[Side::A, Side::B],
        }
    }
}

impl FromStr for Sides {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" => Ok(Sides::A),
            "B" => Ok(Sides::B),
            "AB" | "BA" => Ok(Sides::Both),
            other => Err(Error::invalid(format!("unknown side set {other:?}, expected A, B or AB"))),
        }
    }
}

/// Dissipation family, exponent `q`, overall rate and coupled subsystems.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelSpec {
    pub kind: ChannelKind,
    pub q: f64,
    pub rate: f64,
    pub sides: Sides,
    pub decay_mode: DecayMode,
}

impl ChannelSpec {
    pub fn new(kind: ChannelKind, q: f64, rate: f64, sides: Sides) -> Result<Self> {
        if !q.is_finite() {
            return Err(Error::invalid(format!("exponent q must be finite, got {q}")));
        }
        if !(rate >= 0.0) || !rate.is_finite() {
            return Err(Error::invalid(format!("rate must be finite and >= 0, got {rate}")));
        }
        Ok(ChannelSpec { kind, q, rate, sides, decay_mode: DecayMode::default() })
    }

    /// Dephasing on both sides at unit rate.
    pub fn dephasing(q: f64) -> Self {
        ChannelSpec::new(ChannelKind::Dephasing, q, 1.0, Sides::Both).expect("finite q")
    }

    /// Decay on both sides at unit rate.
    pub fn decay(q: f64) -> Self {
        ChannelSpec::new(ChannelKind::Decay, q, 1.0, Sides::Both).expect("finite q")
    }

    pub fn with_rate(self, rate: f64) -> Result<Self> {
        ChannelSpec::new(self.kind, self.q, rate, self.sides)
            .map(|s| s.with_decay_mode(self.decay_mode))
    }

    pub fn with_sides(mut self, sides: Sides) -> Self {
        self.sides = sides;
        self
    }

    pub fn with_decay_mode(mut self, mode: DecayMode) -> Self {
        self.decay_mode = mode;
        self
    }

    /// Single-subsystem jump operators of this family.
    pub fn local_operators(&self, dim: Dim) -> Vec<CMat> {
        match (self.kind, self.decay_mode) {
            (ChannelKind::Dephasing, _) => vec![sigma_dephasing(dim, self.q)],
            (ChannelKind::Decay, DecayMode::Collective) => vec![sigma_decay(dim, self.q)],
            (ChannelKind::Decay, DecayMode::Independent) => decay_terms(dim, self.q),
        }
    }
}

/// `Σ_i (i+1)^q |i⟩⟨i|`.
pub fn sigma_dephasing(dim: Dim, q: f64) -> CMat {
    let d = dim.get();
    CMat::from_fn(d, d, |i, j| if i == j { C64::from(((i + 1) as f64).powf(q)) } else { C64::from(0.0) })
}

/// `Σ_{i=0}^{d-2} (i+1)^q |0⟩⟨i+1|`.
pub fn sigma_decay(dim: Dim, q: f64) -> CMat {
    decay_terms(dim, q).into_iter().fold(CMat::zeros(dim.get(), dim.get()), |acc, t| acc + t)
}

/// The individual terms `(i+1)^q |0⟩⟨i+1|` of [`sigma_decay`].
pub fn decay_terms(dim: Dim, q: f64) -> Vec<CMat> {
    let d = dim.get();
    (0..d - 1)
        .map(|i| {
            let mut m = CMat::zeros(d, d);
            m[(0, i + 1)] = C64::from(((i + 1) as f64).powf(q));
            m
        })
        .collect()
}

/// `σ⊗1` for side A, `1⊗σ` for side B.
pub fn embed_local(sigma: &CMat, side: Side, dim: Dim) -> Result<CMat> {
    let d = dim.get();
    if sigma.nrows() != d || sigma.ncols() != d {
        return Err(Error::invalid(format!(
            "local operator is {}x{}, expected {d}x{d}",
            sigma.nrows(),
            sigma.ncols()
        )));
    }
    let id = CMat::identity(d, d);
    Ok(match side {
        Side::A => sigma.kronecker(&id),
        Side::B => id.kronecker(sigma),
    })
}

/// `rate · Σ_i (2σ_iρσ_i† − σ_i†σ_iρ − ρσ_i†σ_i)`.
pub fn lindblad_apply(rho: &DensityMatrix, sigmas: &[CMat], rate: f64) -> Result<CMat> {
    let n = rho.dim().full();
    for s in sigmas {
        if s.nrows() != n || s.ncols() != n {
            return Err(Error::invalid(format!("coupling operator must be {n}x{n}")));
        }
    }
    Ok(Generator::from_operators(sigmas.to_vec(), rate, rho.dim()).apply(rho.mat()))
}

/// `ρ̇` for the channel described by `spec`.
pub fn rho_dot(rho: &DensityMatrix, spec: &ChannelSpec) -> Result<CMat> {
    Ok(Generator::new(spec, rho.dim())?.apply(rho.mat()))
}

/// Nonzero entries `(x, x′, σ[x,x′])` of a local operator acting on one side.
#[derive(Clone, Debug)]
struct LocalOp {
    side: Side,
    entries: Vec<(usize, usize, C64)>,
}

impl LocalOp {
    fn new(sigma: &CMat, side: Side) -> Self {
        let mut entries = Vec::new();
        for x in 0..sigma.nrows() {
            for x2 in 0..sigma.ncols() {
                let v = sigma[(x, x2)];
                if v != C64::new(0.0, 0.0) {
                    entries.push((x, x2, v));
                }
            }
        }
        LocalOp { side, entries }
    }

    fn adjoint(&self) -> Self {
        let entries = self.entries.iter().map(|&(x, x2, v)| (x2, x, v.conj())).collect();
        LocalOp { side: self.side, entries }
    }

    #[inline]
    fn embed(&self, x: usize, other: usize, d: usize) -> usize {
        match self.side {
            Side::A => x * d + other,
            Side::B => other * d + x,
        }
    }

    /// `out += c · (σ_side) X`.
    fn left_into(&self, x: &CMat, c: C64, d: usize, out: &mut CMat) {
        let n = x.ncols();
        for &(r, r2, v) in &self.entries {
            let w = v * c;
            for o in 0..d {
                let (to, from) = (self.embed(r, o, d), self.embed(r2, o, d));
                for col in 0..n {
                    out[(to, col)] += w * x[(from, col)];
                }
            }
        }
    }

    /// `out += c · X (σ_side)`.
    fn right_into(&self, x: &CMat, c: C64, d: usize, out: &mut CMat) {
        let n = x.nrows();
        for &(k, k2, v) in &self.entries {
            let w = v * c;
            for o in 0..d {
                let (to, from) = (self.embed(k2, o, d), self.embed(k, o, d));
                for row in 0..n {
                    out[(row, to)] += w * x[(row, from)];
                }
            }
        }
    }
}

#[derive(Clone, Debug)]
enum Action {
    Dense { jumps_adj: Vec<CMat>, decay_sum: CMat },
    /// Every jump operator acts on a single subsystem; products are
    /// evaluated entry-wise without forming `σ⊗1`.
    Local { jumps: Vec<(LocalOp, LocalOp)>, decay: Vec<LocalOp> },
}

/// Lindblad generator `rate · Σ_σ L_σ`, applied matrix-functionally.
#[derive(Clone, Debug)]
pub struct Generator {
    jumps: Vec<CMat>,
    action: Action,
    rate: f64,
    dim: Dim,
}

impl Generator {
    pub fn new(spec: &ChannelSpec, dim: Dim) -> Result<Self> {
        let mut jumps = Vec::new();
        let mut local = Vec::new();
        let mut decay = Vec::new();
        for &side in spec.sides.sides() {
            let mut k_side = CMat::zeros(dim.get(), dim.get());
            for sigma in spec.local_operators(dim) {
                jumps.push(embed_local(&sigma, side, dim)?);
                k_side += sigma.adjoint() * &sigma;
                let op = LocalOp::new(&sigma, side);
                let adj = op.adjoint();
                local.push((op, adj));
            }
            decay.push(LocalOp::new(&k_side, side));
        }
        Ok(Generator { jumps, action: Action::Local { jumps: local, decay }, rate: spec.rate, dim })
    }

    fn from_operators(jumps: Vec<CMat>, rate: f64, dim: Dim) -> Self {
        let n = dim.full();
        let jumps_adj: Vec<CMat> = jumps.iter().map(|s| s.adjoint()).collect();
        let decay_sum = jumps
            .iter()
            .zip(&jumps_adj)
            .fold(CMat::zeros(n, n), |acc, (s, sd)| acc + sd * s);
        Generator { jumps, action: Action::Dense { jumps_adj, decay_sum }, rate, dim }
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    /// Jump operators embedded in the bipartite space.
    pub fn jump_operators(&self) -> &[CMat] {
        &self.jumps
    }

    /// Schrödinger-picture action on an arbitrary operator.
    pub fn apply(&self, rho: &CMat) -> CMat {
        self.act(rho, false)
    }

    /// Adjoint (Heisenberg-picture) action, `Tr[X·apply(Y)] = Tr[apply_adjoint(X)·Y]`.
    pub fn apply_adjoint(&self, x: &CMat) -> CMat {
        self.act(x, true)
    }

    fn act(&self, x: &CMat, adjoint: bool) -> CMat {
        let n = x.nrows();
        let rate = C64::from(self.rate);
        match &self.action {
            Action::Dense { jumps_adj, decay_sum } => {
                let mut out = -(decay_sum * x + x * decay_sum);
                for (s, sd) in self.jumps.iter().zip(jumps_adj) {
                    let term = if adjoint { sd * x * s } else { s * x * sd };
                    out += term * C64::from(2.0);
                }
                out * rate
            }
            Action::Local { jumps, decay } => {
                let d = self.dim.get();
                let mut out = CMat::zeros(n, n);
                let mut tmp = CMat::zeros(n, n);
                for (s, sd) in jumps {
                    let (first, second) = if adjoint { (sd, s) } else { (s, sd) };
                    tmp.fill(C64::new(0.0, 0.0));
                    first.left_into(x, C64::from(1.0), d, &mut tmp);
                    second.right_into(&tmp, rate * 2.0, d, &mut out);
                }
                for k in decay {
                    k.left_into(x, -rate, d, &mut out);
                    k.right_into(x, -rate, d, &mut out);
                }
                out
            }
        }
    }
}
