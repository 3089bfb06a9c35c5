//! End-to-end acceptance run: one PASS/FAIL line per criterion, nonzero exit
//! if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::Instant;

use robust_tangle::channels::{rho_dot, ChannelSpec};
use robust_tangle::evolution::evolve_tangle;
use robust_tangle::linalg::{density_of, pointer_state, random_unit_vector, schmidt_of, DensityMatrix, Dim, PureState};
use robust_tangle::optimizer::{
    optimize_general, optimize_schmidt, oracle_random_search, pointer_basis_deviation, rate_grad, sweep_tau,
    SchmidtRate,
};
use robust_tangle::sampling::stream;
use robust_tangle::tangle::{tangle_bound, tangle_bound_fast, tangle_pure, tangle_rate, SwapOps, WitnessV};
use robust_tangle::{CMat, C64};
use robust_tangle_cli::{evolve_table, ChannelArg, ChannelArgs, DecayModeArg, EvolveArgs, Format, SidesArg};

type Verdict = Result<String, String>;

fn dim(d: usize) -> Dim {
    Dim::new(d).unwrap()
}

fn haar_pure(d: Dim, seed: u64, i: u64) -> PureState {
    PureState::new(random_unit_vector(d.full(), &mut stream(seed, i)), d).unwrap()
}

fn mixed_state(d: Dim, seed: u64, i: u64) -> DensityMatrix {
    let mut rng = stream(seed, i);
    let n = d.full();
    let mut m = CMat::zeros(n, n);
    for k in 0..3 {
        let v = random_unit_vector(n, &mut rng);
        m += (&v * v.adjoint()) * C64::from((k + 1) as f64);
    }
    let tr = m.trace();
    DensityMatrix::new(m / tr, d).unwrap()
}

fn rate_of(rho: &DensityMatrix, spec: &ChannelSpec) -> f64 {
    tangle_rate(&rho_dot(rho, spec).unwrap(), rho).unwrap()
}

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn pure_state_exactness() -> Verdict {
    let mut worst = 0.0f64;
    for d in 2..=4 {
        for i in 0..200 {
            let psi = haar_pure(dim(d), 1_000 * d as u64, i);
            let lambdas = schmidt_of(&psi).unwrap().lambdas;
            let exact = 2.0 * (1.0 - lambdas.iter().map(|l| l * l).sum::<f64>());
            worst = worst.max((tangle_bound(&density_of(&psi)) - exact).abs());
        }
    }
    check(worst < 1e-10, format!("max |Tr(ΨΨV) − 2(1−Σλ²)| = {worst:e} over 600 states"))
}

fn operator_identity() -> Verdict {
    let mut op = 0.0f64;
    for d in 2..=4 {
        let dense = WitnessV::build(dim(d));
        op = op.max((dense.mat() - SwapOps::new(dim(d)).witness()).camax());
    }
    let mut fast = 0.0f64;
    for i in 0..100 {
        let rho = mixed_state(dim(2 + (i % 3) as usize), 2, i);
        fast = fast.max((tangle_bound(&rho) - tangle_bound_fast(&rho)).abs());
    }
    check(
        op < 1e-12 && fast < 1e-12,
        format!("max entry error {op:e}; max |bound − fast| {fast:e} on 100 mixed states"),
    )
}

fn separable_zero_rate() -> Verdict {
    let mut worst = 0.0f64;
    for i in 0..50 {
        let d = dim(2 + (i % 3) as usize);
        let mut rng = stream(3, i);
        let psi = PureState::product(&random_unit_vector(d.get(), &mut rng), &random_unit_vector(d.get(), &mut rng))
            .unwrap();
        let rho = density_of(&psi);
        for q in [0.25, 1.0, 1.5] {
            for spec in [ChannelSpec::dephasing(q), ChannelSpec::decay(q)] {
                worst = worst.max(rate_of(&rho, &spec).abs());
            }
        }
    }
    check(worst < 1e-10, format!("max |τ̇| on product states = {worst:e}"))
}

fn bell_closed_form_rate() -> Verdict {
    let rho = density_of(&pointer_state(&[0.5, 0.5]).unwrap());
    let mut worst = 0.0f64;
    for q in [0.5, 1.0, 2.0] {
        let expected = -4.0 * (2f64.powf(q) - 1.0).powi(2);
        worst = worst.max((rate_of(&rho, &ChannelSpec::dephasing(q)) - expected).abs());
    }
    check(worst < 1e-9, format!("max |τ̇ + 4(2^q−1)²| = {worst:e}"))
}

fn bell_closed_form_trajectory() -> Verdict {
    let rho = density_of(&pointer_state(&[0.5, 0.5]).unwrap());
    let s = evolve_tangle(&rho, &ChannelSpec::dephasing(1.0), 1.0, 512).map_err(|e| e.to_string())?;
    let err = s.times.iter().zip(&s.tangle).map(|(t, tau)| (tau - (-4.0 * t).exp()).abs()).fold(0.0, f64::max);
    let (trace, eig) = (s.max_trace_error(), s.min_eigenvalue());
    check(
        err < 1e-6 && trace < 1e-8 && eig > -1e-8,
        format!("max |τ − e^(−4t)| = {err:e}, trace error {trace:e}, min eigenvalue {eig:e}"),
    )
}

fn threshold_structure() -> Verdict {
    let h = 1.5 / 60.0;
    let grid: Vec<f64> = (1..=60).map(|i| 1.5 * i as f64 / 60.0).collect();
    let first_with = |rows: &[robust_tangle::optimizer::OptimizationResult], k: usize| {
        rows.iter().find(|r| r.support.len() >= k).map(|r| r.tau0).unwrap_or(f64::INFINITY)
    };
    let mut notes = Vec::new();
    let mut ok = true;
    let cases = [
        ("dephasing q=1/4", ChannelSpec::dephasing(0.25)),
        ("dephasing q=1", ChannelSpec::dephasing(1.0)),
        ("dephasing q=3/2", ChannelSpec::dephasing(1.5)),
        ("decay q=3/2", ChannelSpec::decay(1.5)),
    ];
    for (name, spec) in cases {
        let rows = sweep_tau(&grid, &spec, dim(4)).map_err(|e| e.to_string())?;
        let (t3, t4) = (first_with(&rows, 3), first_with(&rows, 4));
        let good = t3 > 1.0 - h && t3 <= 1.0 + h && t4 > 4.0 / 3.0 - h && t4 <= 4.0 / 3.0 + h;
        ok &= good;
        notes.push(format!("{name}: 3@{t3} 4@{t4}"));
    }
    let rows = sweep_tau(&grid, &ChannelSpec::decay(0.1), dim(4)).map_err(|e| e.to_string())?;
    let t3 = first_with(&rows, 3);
    ok &= t3 < 1.0 - h;
    notes.push(format!("decay q=1/10: 3@{t3}"));
    check(ok, notes.join("; "))
}

fn dephasing_regime_switch() -> Verdict {
    let low = optimize_schmidt(0.5, &ChannelSpec::dephasing(0.96), dim(4)).map_err(|e| e.to_string())?;
    let high = optimize_schmidt(0.5, &ChannelSpec::dephasing(1.04), dim(4)).map_err(|e| e.to_string())?;
    check(
        low.support == [2, 3] && high.support == [0, 1],
        format!("q=24/25 → {:?}, q=26/25 → {:?}", low.support, high.support),
    )
}

fn optimizer_certification() -> Verdict {
    let specs = [ChannelSpec::dephasing(0.25), ChannelSpec::dephasing(1.5), ChannelSpec::decay(0.1), ChannelSpec::decay(1.5)];
    let mut kkt = 0.0f64;
    let mut constraint = 0.0f64;
    let mut beaten = f64::NEG_INFINITY;
    let mut n = 0u64;
    for tau0 in [0.4, 0.9, 1.2] {
        for spec in &specs {
            let r = optimize_schmidt(tau0, spec, dim(4)).map_err(|e| e.to_string())?;
            let o = oracle_random_search(tau0, spec, dim(4), 100_000, &mut stream(8, n)).map_err(|e| e.to_string())?;
            n += 1;
            kkt = kkt.max(r.kkt_residual);
            let sum = (r.lambdas.iter().sum::<f64>() - 1.0).abs();
            let neg = r.lambdas.iter().fold(0.0f64, |m, &l| m.max(-l));
            let tau = (tangle_pure(&r.lambdas).unwrap() - tau0).abs();
            constraint = constraint.max(sum).max(neg).max(tau);
            beaten = beaten.max(o.rate_value - r.rate_value);
        }
    }
    check(
        kkt < 1e-8 && constraint < 1e-8 && beaten <= 1e-6,
        format!("{n} configs: max KKT {kkt:e}, max constraint error {constraint:e}, max oracle excess {beaten:e}"),
    )
}

fn restriction_soundness() -> Verdict {
    let mut excess = f64::NEG_INFINITY;
    let mut deviation = 0.0f64;
    let mut n = 0u64;
    for q in [0.25, 0.5, 0.75, 1.0, 1.25, 1.5] {
        for spec in [ChannelSpec::dephasing(q), ChannelSpec::decay(q)] {
            let s = optimize_schmidt(0.8, &spec, dim(4)).map_err(|e| e.to_string())?;
            let g = optimize_general(0.8, &spec, dim(4), 64, &mut stream(9, n)).map_err(|e| e.to_string())?;
            n += 1;
            excess = excess.max(g.rate_value - s.rate_value);
            deviation = deviation.max(pointer_basis_deviation(&g.psi, 1e-6).unwrap());
        }
    }
    check(
        excess <= 1e-6 && deviation < 1e-4,
        format!("{n} configs: max general − Schmidt {excess:e}, max pointer-basis deviation {deviation:e}"),
    )
}

fn evolve_args(channel: ChannelArg, q: f64, tmax: f64) -> EvolveArgs {
    EvolveArgs {
        channel: ChannelArgs {
            channel,
            q,
            dim: 4,
            rate: 1.0,
            sides: SidesArg::Ab,
            decay_mode: DecayModeArg::Independent,
        },
        tau0: 1.4,
        tmax,
        steps: 512,
        baseline: 200,
        seed: 10,
        format: Format::Csv,
        out: None,
    }
}

fn trajectory_dominance() -> Verdict {
    let deph = evolve_table(&evolve_args(ChannelArg::Dephasing, 1.0, 1.0)).map_err(|e| e.to_string())?;
    let decay = evolve_table(&evolve_args(ChannelArg::Decay, 0.1, 1.0)).map_err(|e| e.to_string())?;
    let lead = |rows: &[robust_tangle_cli::EvolveRow], t_max: f64| {
        rows.iter()
            .filter(|r| r.t <= t_max + 1e-12)
            .map(|r| r.baseline.unwrap().1 - r.tangle_opt)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let (a, b) = (lead(&deph, 1.0), lead(&decay, 0.05));
    let trace = deph.iter().chain(&decay).map(|r| r.trace_err_max).fold(0.0, f64::max);
    let eig = deph.iter().chain(&decay).map(|r| r.min_eig_min).fold(f64::INFINITY, f64::min);
    check(
        a <= 1e-6 && b <= 1e-3 && trace < 1e-8 && eig > -1e-8,
        format!(
            "max baseline − optimized: dephasing {a:e} (t ≤ 1), decay {b:e} (t ≤ 0.05); trace error {trace:e}, min eigenvalue {eig:e}"
        ),
    )
}

fn gradient_check() -> Verdict {
    let h = 1e-6;
    let mut worst = 0.0f64;
    for (c, make) in [ChannelSpec::dephasing as fn(f64) -> ChannelSpec, ChannelSpec::decay].into_iter().enumerate() {
        for i in 0..50u64 {
            let d = 2 + (i % 3) as usize;
            let q = 0.1 + 1.4 * (i as f64 / 49.0);
            let spec = make(q);
            let mut rng = stream(11 + c as u64, i);
            let lambdas: Vec<f64> = loop {
                let v = random_unit_vector(d, &mut rng);
                let l: Vec<f64> = v.iter().map(|z| z.norm_sqr()).collect();
                if l.iter().all(|&x| x > 1e-3) {
                    break l;
                }
            };
            let g = rate_grad(&lambdas, &spec).map_err(|e| e.to_string())?;
            let eval = SchmidtRate::new(&spec, dim(d)).unwrap();
            let scale = g.values.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
            for k in 0..d {
                let (mut up, mut dn) = (lambdas.clone(), lambdas.clone());
                up[k] += h;
                dn[k] -= h;
                let fd = (eval.rate_of_weights(&up).unwrap() - eval.rate_of_weights(&dn).unwrap()) / (2.0 * h);
                worst = worst.max((fd - g.values[k]).abs() / scale);
            }
        }
    }
    check(worst < 1e-5, format!("max relative error {worst:e} over 100 interior points"))
}

fn determinism() -> Verdict {
    let runs: [&[&str]; 4] = [
        &["sweep", "--tau-steps", "12", "--seed", "3"],
        &["compare", "--dim", "3", "--restarts", "8", "--q-grid", "0.5,1.25", "--seed", "3"],
        &["evolve", "--baseline", "16", "--steps", "64", "--seed", "3"],
        &["optimize", "--channel", "decay", "--q", "0.1", "--tau0", "1.1", "--oracle-samples", "5000", "--seed", "3"],
    ];
    let bin = env!("CARGO_BIN_EXE_robust-tangle");
    for args in runs {
        let mut outputs = Vec::new();
        for threads in ["1", "3"] {
            let o = Command::new(bin).args(args).env("RAYON_NUM_THREADS", threads).output().map_err(|e| e.to_string())?;
            if !o.status.success() {
                return Err(format!("{} failed: {}", args[0], String::from_utf8_lossy(&o.stderr)));
            }
            outputs.push(o.stdout);
        }
        if outputs[0] != outputs[1] || outputs[0].is_empty() {
            return Err(format!("{} output differs between runs", args[0]));
        }
    }
    Ok("sweep, compare, evolve and optimize are byte-identical across runs and thread counts".into())
}

fn main() {
    let criteria: [(u32, fn() -> Verdict); 12] = [
        (1, pure_state_exactness),
        (2, operator_identity),
        (3, separable_zero_rate),
        (4, bell_closed_form_rate),
        (5, bell_closed_form_trajectory),
        (6, threshold_structure),
        (7, dephasing_regime_switch),
        (8, optimizer_certification),
        (9, restriction_soundness),
        (10, trajectory_dominance),
        (11, gradient_check),
        (12, determinism),
    ];
    let mut failed = Vec::new();
    for (n, run) in criteria {
        let start = Instant::now();
        let verdict = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match verdict {
            Ok(detail) => println!("criterion {n}: PASS ({secs:.1}s) {detail}"),
            Err(detail) => {
                println!("criterion {n}: FAIL ({secs:.1}s) {detail}");
                failed.push(n);
            }
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
