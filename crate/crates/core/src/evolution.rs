//! Fixed-step RK4 integration of `ρ̇ = Σ L_σ ρ` and tangle trajectories.
//!
//! Each step is re-Hermitized; eigenvalues are never clipped. Instead every
//! grid point carries a [`Monitor`] and integration aborts once the trace
//! drifts by more than [`TRACE_LIMIT`] or an eigenvalue drops below
//! [`MIN_EIGENVALUE_LIMIT`].

use crate::channels::{ChannelSpec, Generator};
use crate::linalg::{hermiticity_error, hermitize, min_eigenvalue, DensityMatrix, Dim};
use crate::tangle::tangle_form;
use crate::{CMat, Error, Result, C64};

pub const TRACE_LIMIT: f64 = 1e-6;
pub const MIN_EIGENVALUE_LIMIT: f64 = -1e-5;

/// Default grid density, steps per unit time.
pub const STEPS_PER_UNIT_TIME: usize = 512;

/// Sanity measurements of one integrated state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Monitor {
    pub trace_error: f64,
    pub hermiticity_error: f64,
    pub min_eigenvalue: f64,
}

impl Monitor {
    fn of(m: &CMat) -> Self {
        Monitor {
            trace_error: (m.trace() - C64::from(1.0)).norm(),
            hermiticity_error: hermiticity_error(m),
            min_eigenvalue: min_eigenvalue(m),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    /// Clamped bound `max(Tr[(ρ⊗ρ)V], 0)`.
    pub tangle: Vec<f64>,
    pub monitors: Vec<Monitor>,
}

/// A trajectory without the stored states.
#[derive(Clone, Debug, PartialEq)]
pub struct TangleSeries {
    pub times: Vec<f64>,
    pub tangle: Vec<f64>,
    pub monitors: Vec<Monitor>,
}

impl TangleSeries {
    pub fn max_trace_error(&self) -> f64 {
        self.monitors.iter().map(|m| m.trace_error).fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.monitors.iter().map(|m| m.min_eigenvalue).fold(f64::INFINITY, f64::min)
    }
}

fn rk4(gen: &Generator, m: &CMat, h: f64) -> CMat {
    let half = C64::from(0.5 * h);
    let k1 = gen.apply(m);
    let k2 = gen.apply(&(m + &k1 * half));
    let k3 = gen.apply(&(m + &k2 * half));
    let k4 = gen.apply(&(m + &k3 * C64::from(h)));
    let next = m + (k1 + (k2 + k3) * C64::from(2.0) + k4) * C64::from(h / 6.0);
    hermitize(&next)
}

/// One classical RK4 step of length `h`.
pub fn rk4_step(rho: &DensityMatrix, spec: &ChannelSpec, h: f64) -> Result<DensityMatrix> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::invalid(format!("step size must be positive, got {h}")));
    }
    let gen = Generator::new(spec, rho.dim())?;
    Ok(DensityMatrix::from_unchecked(rk4(&gen, rho.mat(), h), rho.dim()))
}

fn integrate(
    rho0: &DensityMatrix,
    spec: &ChannelSpec,
    t_max: f64,
    steps: usize,
    mut visit: impl FnMut(f64, &CMat, Monitor),
) -> Result<()> {
    if steps == 0 {
        return Err(Error::invalid("at least one step is required"));
    }
    if !(t_max > 0.0) || !t_max.is_finite() {
        return Err(Error::invalid(format!("t_max must be positive, got {t_max}")));
    }
    let gen = Generator::new(spec, rho0.dim())?;
    let h = t_max / steps as f64;
    let mut m = rho0.mat().clone();
    for k in 0..=steps {
        if k > 0 {
            m = rk4(&gen, &m, h);
        }
        let t = t_max * k as f64 / steps as f64;
        let mon = Monitor::of(&m);
        if mon.trace_error > TRACE_LIMIT || !mon.trace_error.is_finite() {
            return Err(Error::IntegrationFailure {
                time: t,
                reason: format!("trace error {:e} exceeds {TRACE_LIMIT:e}", mon.trace_error),
            });
        }
        if mon.min_eigenvalue < MIN_EIGENVALUE_LIMIT {
            return Err(Error::IntegrationFailure {
                time: t,
                reason: format!("eigenvalue {:e} below {MIN_EIGENVALUE_LIMIT:e}", mon.min_eigenvalue),
            });
        }
        visit(t, &m, mon);
    }
    Ok(())
}

fn clamped_tangle(m: &CMat, dim: Dim) -> f64 {
    tangle_form(m, m, dim).max(0.0)
}

/// Integrates on a uniform grid of `steps + 1` points from 0 to `t_max`.
pub fn evolve(rho0: &DensityMatrix, spec: &ChannelSpec, t_max: f64, steps: usize) -> Result<Trajectory> {
    let dim = rho0.dim();
    let mut traj = Trajectory {
        times: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity(steps + 1),
        tangle: Vec::with_capacity(steps + 1),
        monitors: Vec::with_capacity(steps + 1),
    };
    integrate(rho0, spec, t_max, steps, |t, m, mon| {
        traj.times.push(t);
        traj.tangle.push(clamped_tangle(m, dim));
        traj.states.push(DensityMatrix::from_unchecked(m.clone(), dim));
        traj.monitors.push(mon);
    })?;
    Ok(traj)
}

/// Like [`evolve`] but keeps only times, tangles and monitors.
pub fn evolve_tangle(rho0: &DensityMatrix, spec: &ChannelSpec, t_max: f64, steps: usize) -> Result<TangleSeries> {
    let dim = rho0.dim();
    let mut out = TangleSeries {
        times: Vec::with_capacity(steps + 1),
        tangle: Vec::with_capacity(steps + 1),
        monitors: Vec::with_capacity(steps + 1),
    };
    integrate(rho0, spec, t_max, steps, |t, m, mon| {
        out.times.push(t);
        out.tangle.push(clamped_tangle(m, dim));
        out.monitors.push(mon);
    })?;
    Ok(out)
}

/// `(t, tangle)` pairs of a trajectory.
pub fn tangle_trajectory(traj: &Trajectory) -> Vec<(f64, f64)> {
    traj.times.iter().copied().zip(traj.tangle.iter().copied()).collect()
}
