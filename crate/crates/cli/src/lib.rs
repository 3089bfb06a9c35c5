//! Command implementations behind the `robust-tangle` binary. Every command
//! renders its full output to a string so runs can be compared byte for
//! byte.

use std::fmt::Write as _;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use robust_tangle::channels::{ChannelKind, ChannelSpec, DecayMode, Sides};
use robust_tangle::evolution::{evolve_tangle, TangleSeries, STEPS_PER_UNIT_TIME};
use robust_tangle::linalg::{density_of, pointer_state, Dim};
use robust_tangle::optimizer::{
    optimize_general, optimize_schmidt_with, oracle_random_search, sweep_tau_with, SchmidtOptions,
};
use robust_tangle::sampling::{state_with_tangle, stream};
use robust_tangle::Error;

pub mod svg;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_INTEGRATION: i32 = 4;
pub const EXIT_OTHER: i32 = 1;

/// Exit code for a library error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidArgument(_) => EXIT_USAGE,
        Error::InfeasibleTangle { .. } => EXIT_INFEASIBLE,
        Error::IntegrationFailure { .. } => EXIT_INTEGRATION,
        Error::SamplingFailure { .. } | Error::NoStationaryPoint(_) => EXIT_OTHER,
    }
}

#[derive(Debug, Parser)]
#[command(name = "robust-tangle", version, about = "Most robust entangled qudit pairs under local dissipation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimal Schmidt weights along a tangle grid.
    Sweep(SweepArgs),
    /// Schmidt-restricted optimum against unrestricted search, per exponent q.
    Compare(CompareArgs),
    /// Tangle trajectories of the optimal state and random baselines.
    Evolve(EvolveArgs),
    /// One Schmidt-restricted optimization.
    Optimize(OptimizeArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ChannelArg {
    Dephasing,
    Decay,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SidesArg {
    #[value(name = "A")]
    A,
    #[value(name = "B")]
    B,
    #[value(name = "AB")]
    Ab,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DecayModeArg {
    Independent,
    Collective,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Svg,
}

#[derive(Clone, Debug, Args)]
pub struct ChannelArgs {
    #[arg(long, value_enum, default_value = "dephasing")]
    pub channel: ChannelArg,
    /// Level exponent of the coupling operator.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub q: f64,
    /// Local dimension d.
    #[arg(long, default_value_t = 4)]
    pub dim: usize,
    #[arg(long, default_value_t = 1.0)]
    pub rate: f64,
    #[arg(long, value_enum, default_value = "AB")]
    pub sides: SidesArg,
    /// Decay family only: one jump operator per excited level, or their sum.
    #[arg(long, value_enum, default_value = "independent")]
    pub decay_mode: DecayModeArg,
}

impl ChannelArgs {
    fn spec_with_q(&self, q: f64) -> Result<ChannelSpec, Error> {
        let kind = match self.channel {
            ChannelArg::Dephasing => ChannelKind::Dephasing,
            ChannelArg::Decay => ChannelKind::Decay,
        };
        let sides = match self.sides {
            SidesArg::A => Sides::A,
            SidesArg::B => Sides::B,
            SidesArg::Ab => Sides::Both,
        };
        let mode = match self.decay_mode {
            DecayModeArg::Independent => DecayMode::Independent,
            DecayModeArg::Collective => DecayMode::Collective,
        };
        Ok(ChannelSpec::new(kind, q, self.rate, sides)?.with_decay_mode(mode))
    }

    pub fn spec(&self) -> Result<ChannelSpec, Error> {
        self.spec_with_q(self.q)
    }

    pub fn dim(&self) -> Result<Dim, Error> {
        Dim::new(self.dim)
    }
}

#[derive(Clone, Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub channel: ChannelArgs,
    #[arg(long, default_value_t = 0.05)]
    pub tau_min: f64,
    /// Defaults to the largest pure-state tangle 2(d−1)/d.
    #[arg(long)]
    pub tau_max: Option<f64>,
    #[arg(long, default_value_t = 60)]
    pub tau_steps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    #[arg(long)]
    pub out: Option<std::path::PathBuf>,
}

#[derive(Clone, Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub channel: ChannelArgs,
    /// Comma-separated initial tangles.
    #[arg(long, value_delimiter = ',', default_value = "0.8")]
    pub tau0: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,0.75,1,1.25,1.5")]
    pub q_grid: Vec<f64>,
    /// Random starts of the unrestricted search.
    #[arg(long, default_value_t = 64)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    #[arg(long)]
    pub out: Option<std::path::PathBuf>,
}

#[derive(Clone, Debug, Args)]
pub struct EvolveArgs {
    #[command(flatten)]
    pub channel: ChannelArgs,
    #[arg(long, default_value_t = 0.8)]
    pub tau0: f64,
    #[arg(long, default_value_t = 1.0)]
    pub tmax: f64,
    /// Integration steps per unit time.
    #[arg(long, default_value_t = STEPS_PER_UNIT_TIME)]
    pub steps: usize,
    /// Number of random states with the same initial tangle.
    #[arg(long, default_value_t = 0)]
    pub baseline: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    #[arg(long)]
    pub out: Option<std::path::PathBuf>,
}

#[derive(Clone, Debug, Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub channel: ChannelArgs,
    #[arg(long, default_value_t = 0.8)]
    pub tau0: f64,
    /// Random samples for a brute-force cross-check; 0 disables it.
    #[arg(long, default_value_t = 0)]
    pub oracle_samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<std::path::PathBuf>,
}

/// Rendered output of one command.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Output {
    pub body: String,
    /// Human-readable report for stderr.
    pub summary: Option<String>,
}

impl Command {
    pub fn out_path(&self) -> Option<&std::path::Path> {
        match self {
            Command::Sweep(a) => a.out.as_deref(),
            Command::Compare(a) => a.out.as_deref(),
            Command::Evolve(a) => a.out.as_deref(),
            Command::Optimize(a) => a.out.as_deref(),
        }
    }
}

pub fn run(command: &Command) -> Result<Output, Error> {
    match command {
        Command::Sweep(a) => cmd_sweep(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Evolve(a) => cmd_evolve(a),
        Command::Optimize(a) => cmd_optimize(a),
    }
}

fn lambda_header(d: usize) -> String {
    (0..d).map(|i| format!("lambda_{i}")).collect::<Vec<_>>().join(",")
}

/// Shortest round-trip decimal, switching to exponent form outside
/// `[1e-4, 1e15)` so tiny residuals stay readable.
pub fn num(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || !v.is_finite() || (1e-4..1e15).contains(&a) {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

fn join(values: &[f64]) -> String {
    values.iter().map(|&v| num(v)).collect::<Vec<_>>().join(",")
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Uniform grid with both endpoints; a single point is `tau_min`.
pub fn tau_grid(tau_min: f64, tau_max: f64, steps: usize) -> Result<Vec<f64>, Error> {
    if steps == 0 {
        return Err(Error::InvalidArgument("--tau-steps must be at least 1".into()));
    }
    if !(tau_min.is_finite() && tau_max.is_finite()) || tau_max < tau_min {
        return Err(Error::InvalidArgument(format!("empty tangle range [{tau_min}, {tau_max}]")));
    }
    if steps == 1 {
        return Ok(vec![tau_min]);
    }
    let h = (tau_max - tau_min) / (steps - 1) as f64;
    Ok((0..steps).map(|i| if i + 1 == steps { tau_max } else { tau_min + h * i as f64 }).collect())
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<Output, Error> {
    let spec = args.channel.spec()?;
    let dim = args.channel.dim()?;
    let grid = tau_grid(args.tau_min, args.tau_max.unwrap_or_else(|| dim.max_tangle()), args.tau_steps)?;
    let opts = SchmidtOptions { seed: args.seed, ..SchmidtOptions::default() };
    let rows = sweep_tau_with(&grid, &spec, dim, &opts)?;

    let body = match args.format {
        Format::Csv => {
            let mut out = format!("tau,{},rate,support_size,kkt_residual\n", lambda_header(dim.get()));
            for r in &rows {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    num(r.tau0),
                    join(&r.lambdas),
                    num(r.rate_value),
                    r.support.len(),
                    num(r.kkt_residual)
                );
            }
            out
        }
        Format::Svg => {
            let xs: Vec<f64> = rows.iter().map(|r| r.tau0).collect();
            let series: Vec<(String, Vec<Option<f64>>)> = (0..dim.get())
                .map(|i| (format!("lambda_{i}"), rows.iter().map(|r| Some(r.lambdas[i])).collect()))
                .collect();
            svg::line_plot("tau", &xs, &series)
        }
    };
    Ok(Output { body, summary: None })
}

/// `ln(−τ̇)`, undefined for τ̇ ≥ 0.
fn log_neg(rate: f64) -> Option<f64> {
    (rate < 0.0).then(|| (-rate).ln())
}

pub fn cmd_compare(args: &CompareArgs) -> Result<Output, Error> {
    let dim = args.channel.dim()?;
    if args.restarts == 0 {
        return Err(Error::InvalidArgument("--restarts must be at least 1".into()));
    }
    let opts = SchmidtOptions { seed: args.seed, ..SchmidtOptions::default() };
    let cases: Vec<(f64, f64)> =
        args.tau0.iter().flat_map(|&t| args.q_grid.iter().map(move |&q| (q, t))).collect();
    let rows = cases
        .iter()
        .enumerate()
        .map(|(i, &(q, tau0))| {
            let spec = args.channel.spec_with_q(q)?;
            let schmidt = optimize_schmidt_with(tau0, &spec, dim, &opts, &[])?;
            let general = optimize_general(tau0, &spec, dim, args.restarts, &mut stream(args.seed, i as u64))?;
            Ok((q, tau0, schmidt.rate_value, general.rate_value))
        })
        .collect::<Result<Vec<_>, Error>>()?;

    let body = match args.format {
        Format::Csv => {
            let mut out = String::from(
                "q,tau0,rate_schmidt,rate_general,log_neg_rate_schmidt,log_neg_rate_general,gap\n",
            );
            for &(q, tau0, rs, rg) in &rows {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    num(q),
                    num(tau0),
                    num(rs),
                    num(rg),
                    opt_cell(log_neg(rs)),
                    opt_cell(log_neg(rg)),
                    num(rs - rg)
                );
            }
            out
        }
        Format::Svg => {
            let xs: Vec<f64> = rows.iter().map(|r| r.0).collect();
            let series = vec![
                ("log_neg_rate_schmidt".to_string(), rows.iter().map(|r| log_neg(r.2)).collect()),
                ("log_neg_rate_general".to_string(), rows.iter().map(|r| log_neg(r.3)).collect()),
            ];
            svg::line_plot("q", &xs, &series)
        }
    };
    Ok(Output { body, summary: None })
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Table behind `evolve`: one row per grid time.
#[derive(Clone, Debug, PartialEq)]
pub struct EvolveRow {
    pub t: f64,
    pub tangle_opt: f64,
    /// `(min, max, median)` over the baselines; `None` without baselines.
    pub baseline: Option<(f64, f64, f64)>,
    pub trace_err_max: f64,
    pub min_eig_min: f64,
}

pub fn evolve_table(args: &EvolveArgs) -> Result<Vec<EvolveRow>, Error> {
    let spec = args.channel.spec()?;
    let dim = args.channel.dim()?;
    if args.steps == 0 {
        return Err(Error::InvalidArgument("--steps must be at least 1".into()));
    }
    if !(args.tmax > 0.0 && args.tmax.is_finite()) {
        return Err(Error::InvalidArgument(format!("--tmax must be positive, got {}", args.tmax)));
    }
    let steps = (args.steps as f64 * args.tmax).ceil() as usize;
    let opts = SchmidtOptions { seed: args.seed, ..SchmidtOptions::default() };
    let best = optimize_schmidt_with(args.tau0, &spec, dim, &opts, &[])?;
    let opt = evolve_tangle(&density_of(&pointer_state(&best.lambdas)?), &spec, args.tmax, steps)?;

    let baselines = (0..args.baseline)
        .into_par_iter()
        .map(|i| {
            let psi = state_with_tangle(args.tau0, dim, &mut stream(args.seed, i as u64))?;
            evolve_tangle(&density_of(&psi), &spec, args.tmax, steps)
        })
        .collect::<Result<Vec<TangleSeries>, Error>>()?;

    let rows = (0..opt.times.len())
        .map(|k| {
            let mut trace_err = opt.monitors[k].trace_error;
            let mut min_eig = opt.monitors[k].min_eigenvalue;
            let mut values: Vec<f64> = Vec::with_capacity(baselines.len());
            for b in &baselines {
                values.push(b.tangle[k]);
                trace_err = trace_err.max(b.monitors[k].trace_error);
                min_eig = min_eig.min(b.monitors[k].min_eigenvalue);
            }
            values.sort_by(f64::total_cmp);
            let baseline = (!values.is_empty()).then(|| (values[0], values[values.len() - 1], median(&values)));
            EvolveRow { t: opt.times[k], tangle_opt: opt.tangle[k], baseline, trace_err_max: trace_err, min_eig_min: min_eig }
        })
        .collect();
    Ok(rows)
}

pub fn cmd_evolve(args: &EvolveArgs) -> Result<Output, Error> {
    let rows = evolve_table(args)?;
    let body = match args.format {
        Format::Csv => {
            let mut out = String::from(
                "t,tangle_opt,tangle_rand_min,tangle_rand_max,tangle_rand_median,trace_err_max,min_eig_min\n",
            );
            for r in &rows {
                let (lo, hi, med) = match r.baseline {
                    Some((a, b, c)) => (Some(a), Some(b), Some(c)),
                    None => (None, None, None),
                };
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    num(r.t),
                    num(r.tangle_opt),
                    opt_cell(lo),
                    opt_cell(hi),
                    opt_cell(med),
                    num(r.trace_err_max),
                    num(r.min_eig_min)
                );
            }
            out
        }
        Format::Svg => {
            let xs: Vec<f64> = rows.iter().map(|r| r.t).collect();
            let pick = |f: fn(&(f64, f64, f64)) -> f64| rows.iter().map(|r| r.baseline.as_ref().map(f)).collect();
            let series = vec![
                ("tangle_opt".to_string(), rows.iter().map(|r| Some(r.tangle_opt)).collect()),
                ("tangle_rand_min".to_string(), pick(|b| b.0)),
                ("tangle_rand_max".to_string(), pick(|b| b.1)),
                ("tangle_rand_median".to_string(), pick(|b| b.2)),
            ];
            svg::line_plot("t", &xs, &series)
        }
    };
    Ok(Output { body, summary: None })
}

pub fn cmd_optimize(args: &OptimizeArgs) -> Result<Output, Error> {
    let spec = args.channel.spec()?;
    let dim = args.channel.dim()?;
    let opts = SchmidtOptions { seed: args.seed, ..SchmidtOptions::default() };
    let r = optimize_schmidt_with(args.tau0, &spec, dim, &opts, &[])?;
    let oracle = if args.oracle_samples > 0 {
        Some(oracle_random_search(args.tau0, &spec, dim, args.oracle_samples, &mut stream(args.seed, 0))?)
    } else {
        None
    };

    let support = r.support.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(";");
    let mut body = format!(
        "tau0,{},rate,support,support_size,mu,nu,kkt_residual,n_restarts_used,oracle_rate\n",
        lambda_header(dim.get())
    );
    let _ = writeln!(
        body,
        "{},{},{},{},{},{},{},{},{},{}",
        num(r.tau0),
        join(&r.lambdas),
        num(r.rate_value),
        support,
        r.support.len(),
        num(r.multipliers.mu),
        num(r.multipliers.nu),
        num(r.kkt_residual),
        r.n_restarts_used,
        opt_cell(oracle.as_ref().map(|o| o.rate_value))
    );

    let mut summary = format!(
        "{} q={} d={} tau0={}\n  lambda   = [{}]\n  rate     = {}\n  support  = {{{}}}\n  kkt      = {:e}\n  branches = {}\n",
        spec.kind,
        spec.q,
        dim,
        r.tau0,
        r.lambdas.iter().map(|l| format!("{l:.6}")).collect::<Vec<_>>().join(", "),
        r.rate_value,
        support.replace(';', ", "),
        r.kkt_residual,
        r.stationary_points.len()
    );
    if let Some(o) = &oracle {
        let _ = writeln!(summary, "  oracle   = {} ({} samples, margin {:e})", o.rate_value, o.evaluated, r.rate_value - o.rate_value);
    }
    Ok(Output { body, summary: Some(summary) })
}
