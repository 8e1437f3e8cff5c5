//! One function per subcommand. Each writes its files and returns whether the
//! checked property held.

use anyhow::{bail, Result};
use pmaflow_core::admissibility::{default_threshold, find_witness, zero_set_mass};
use pmaflow_core::analysis::{holder_modulus, removability_test, Direction, ModulusReport, SeamReport};
use pmaflow_core::barriers::{linfty_bounds, subbarrier, superbarrier, BarrierConstants, BarrierPair, PairReport};
use pmaflow_core::elliptic::{long_time_convergence, perron_envelope, solve_dirichlet_ma, solve_stationary};
use pmaflow_core::regularization::{
    inf_convolution, sup_convolution, time_lipschitz_bound, LipschitzReport, TimeProfile,
};
use pmaflow_core::solver::{solve_on, SolveReport};
use pmaflow_core::{tol, Error, SpaceTimeField, Trajectory};
use serde::Serialize;

use crate::config::{Config, EllipticMethod};
use crate::output::OutDir;

pub struct Ctx<'a> {
    pub cfg: &'a Config,
    pub out: &'a OutDir,
    pub seed: u64,
}

fn stride(ctx: &Ctx) -> usize {
    ctx.cfg.solver.stride.max(1)
}

fn run(ctx: &Ctx) -> Result<Trajectory> {
    let disc = ctx.cfg.discretization()?;
    let data = ctx.cfg.problem()?;
    Ok(solve_on(&data, &disc, &ctx.cfg.solver())?)
}

#[derive(Serialize)]
struct SnapshotEntry {
    t: f64,
    file: String,
    sup_error: Option<f64>,
}

#[derive(Serialize)]
struct SolveSummary<'a> {
    problem: &'a str,
    h: f64,
    seed: u64,
    steps: usize,
    final_time: f64,
    reached_steady: bool,
    total_clamps: usize,
    last_clamp_step: Option<usize>,
    dt_min: f64,
    dt_max: f64,
    passed: bool,
    snapshots: Vec<SnapshotEntry>,
    report: &'a SolveReport,
}

#[derive(Serialize)]
struct PlotRow {
    t: f64,
    sup_change: Option<f64>,
    sup_error: Option<f64>,
}

pub fn solve(ctx: &Ctx) -> Result<bool> {
    let data = ctx.cfg.problem()?;
    let traj = run(ctx)?;
    let disc = &traj.disc;
    let reference = ctx.cfg.reference()?;
    let mut errors = Vec::with_capacity(traj.snapshots.len());
    for s in &traj.snapshots {
        errors.push(match &reference {
            Some(r) => Some(r.sample(disc, s.t)?.sup_distance(&s.u)),
            None => None,
        });
    }
    let mut snaps = Vec::new();
    for (k, s) in traj.snapshots.iter().enumerate().step_by(stride(ctx)) {
        let file = format!("u_{k:04}.csv");
        ctx.out.nodes(&file, &s.u)?;
        snaps.push(SnapshotEntry { t: s.t, file, sup_error: errors[k] });
    }

    let rep = &traj.report;
    let mut rows = vec![PlotRow { t: traj.snapshots[0].t, sup_change: None, sup_error: errors[0] }];
    let mut next = 1;
    for (&t, &c) in rep.step_times.iter().zip(&rep.sup_change) {
        let mut e = None;
        if next < traj.snapshots.len() && (traj.snapshots[next].t - t).abs() <= 1e-12 * (1.0 + t.abs()) {
            e = errors[next];
            next += 1;
        }
        rows.push(PlotRow { t, sup_change: Some(c), sup_error: e });
    }
    ctx.out.table("plot.csv", rows)?;

    let passed = rep.bound_flags.is_empty();
    let summary = SolveSummary {
        problem: &data.label,
        h: disc.h(),
        seed: ctx.seed,
        steps: rep.steps,
        final_time: rep.final_time,
        reached_steady: rep.reached_steady,
        total_clamps: rep.clamp_counts.iter().sum(),
        last_clamp_step: rep.last_clamp_step(),
        dt_min: rep.dt_history.iter().cloned().fold(f64::INFINITY, f64::min),
        dt_max: rep.dt_history.iter().cloned().fold(0.0, f64::max),
        passed,
        snapshots: snaps,
        report: rep,
    };
    ctx.out.json("report.json", &summary)?;
    println!(
        "solve: {} steps to t = {:.4}, {} clamps, {} bound flags",
        rep.steps,
        rep.final_time,
        summary.total_clamps,
        rep.bound_flags.len()
    );
    if let Some(e) = errors.last().copied().flatten() {
        println!("solve: final sup error {e:.3e}");
    }
    Ok(passed)
}

#[derive(Serialize)]
struct EllipticSummary {
    method: EllipticMethod,
    iterations: usize,
    residual: f64,
    sup_norm: f64,
    history: Vec<f64>,
}

pub fn elliptic(ctx: &Ctx) -> Result<bool> {
    let disc = ctx.cfg.discretization()?;
    let data = ctx.cfg.problem()?;
    let prob = ctx.cfg.limit(&data)?;
    let ecfg = ctx.cfg.elliptic();
    let method = ctx.cfg.elliptic.method;
    let sol = match method {
        EllipticMethod::Auto => solve_stationary(&prob, &disc, &ecfg)?,
        EllipticMethod::Damped => solve_dirichlet_ma(&prob, &disc, &ecfg)?,
        EllipticMethod::Perron => perron_envelope(&prob, &disc, &ecfg)?,
    };
    ctx.out.nodes("u_inf.csv", &sol.u)?;
    let summary = EllipticSummary {
        method,
        iterations: sol.iterations,
        residual: sol.residual,
        sup_norm: sol.u.sup_norm(),
        history: sol.history,
    };
    ctx.out.json("elliptic.json", &summary)?;
    println!("elliptic: {} iterations, residual {:.3e}", summary.iterations, summary.residual);
    Ok(true)
}

#[derive(Serialize)]
struct ConvergeRow {
    t: f64,
    error: f64,
}

#[derive(Serialize)]
struct ConvergeSummary {
    burn_in: f64,
    target: f64,
    final_error: f64,
    monotone_after_burn_in: bool,
    passed: bool,
}

pub fn converge(ctx: &Ctx) -> Result<bool> {
    let disc = ctx.cfg.discretization()?;
    let data = ctx.cfg.problem()?;
    let limit = ctx.cfg.limit(&data)?;
    let scfg = ctx.cfg.solver();
    let burn_in = ctx.cfg.converge.burn_in;
    let rep = long_time_convergence(&data, &limit, &disc, &scfg, &ctx.cfg.elliptic(), burn_in)?;
    let horizon = scfg.horizon.unwrap_or(data.horizon);
    let target = ctx.cfg.converge.target.unwrap_or((-horizon).exp() + 10.0 * disc.h());
    ctx.out.table("convergence.csv", rep.times.iter().zip(&rep.errors).map(|(&t, &error)| ConvergeRow { t, error }))?;
    ctx.out.nodes("u_inf.csv", &rep.limit)?;
    let passed = rep.check(target).is_ok();
    let summary = ConvergeSummary {
        burn_in,
        target,
        final_error: rep.final_error,
        monotone_after_burn_in: rep.monotone_after_burn_in,
        passed,
    };
    ctx.out.json("converge.json", &summary)?;
    println!(
        "converge: final error {:.3e} (target {:.3e}), monotone after burn-in: {}",
        rep.final_error, target, rep.monotone_after_burn_in
    );
    Ok(passed)
}

#[derive(Serialize)]
struct BarrierSummary {
    eps: f64,
    times: Vec<f64>,
    witness_c: Option<f64>,
    sub: BarrierConstants,
    sup: BarrierConstants,
    lower_bound_min: f64,
    upper_bound: f64,
    verification: PairReport,
    tol: f64,
    passed: bool,
}

pub fn barriers(ctx: &Ctx) -> Result<bool> {
    let disc = ctx.cfg.discretization()?;
    let data = ctx.cfg.problem()?;
    let b = &ctx.cfg.barriers;
    let u0 = disc.sample(|x| data.u0(x));
    let witness = find_witness(&u0, |x| data.f(0.0, x), b.eps / 4.0, &disc).ok();
    let sub = subbarrier(&data, &disc, b.eps)?;
    let sup = superbarrier(&data, &disc, b.eps, witness.as_ref())?;
    let bounds = linfty_bounds(&data, &disc)?;
    for (k, &t) in b.times.iter().enumerate() {
        ctx.out.nodes(&format!("sub_{k:02}.csv"), &sub.sample(&disc, t)?)?;
        ctx.out.nodes(&format!("super_{k:02}.csv"), &sup.sample(&disc, t)?)?;
    }
    let pair = BarrierPair { sub, sup, eps: b.eps };
    let rep = pair.verify(&data, &disc, &b.times)?;
    let tol = tol::visc(disc.h());
    let passed = rep.passed(tol);
    let summary = BarrierSummary {
        eps: b.eps,
        times: b.times.clone(),
        witness_c: witness.map(|w| w.c),
        sub: pair.sub.constants.clone(),
        sup: pair.sup.constants.clone(),
        lower_bound_min: bounds.lower.min(),
        upper_bound: bounds.upper,
        verification: rep.clone(),
        tol,
        passed,
    };
    ctx.out.json("barriers.json", &summary)?;
    println!(
        "barriers: gap excess {:.3e}, initial excess {:.3e}, boundary excess {:.3e}",
        rep.gap_excess, rep.initial_excess, rep.boundary_excess
    );
    Ok(passed)
}

#[derive(Serialize)]
struct RegularizeSummary {
    k: f64,
    times: Vec<f64>,
    lipschitz: LipschitzReport,
    passed: bool,
}

pub fn regularize(ctx: &Ctx) -> Result<bool> {
    let data = ctx.cfg.problem()?;
    let traj = run(ctx)?;
    let k = ctx.cfg.regularize.k;
    let profile = TimeProfile::from_trajectory(&traj);
    let sup = sup_convolution(&profile, k)?;
    let inf = inf_convolution(&profile, k)?;
    for idx in (0..profile.len()).step_by(stride(ctx)) {
        ctx.out.nodes(&format!("sup_{idx:04}.csv"), &sup.values[idx])?;
        ctx.out.nodes(&format!("inf_{idx:04}.csv"), &inf.values[idx])?;
    }
    let lip = time_lipschitz_bound(&traj, &data, ctx.cfg.regularize.tol_h * traj.disc.h())?;
    let passed = lip.passed();
    println!(
        "regularize: {} snapshot pairs, {} Lipschitz violations, quotients [{:.3}, {:.3}]",
        lip.pairs, lip.violations, lip.min_quotient, lip.max_quotient
    );
    ctx.out.json("regularize.json", &RegularizeSummary { k, times: profile.times.clone(), lipschitz: lip, passed })?;
    Ok(passed)
}

#[derive(Serialize)]
struct AdmissibleSummary {
    verdict: &'static str,
    eps: f64,
    threshold: f64,
    zero_set_mass: f64,
    c: Option<f64>,
    c_tried: Option<f64>,
    witness_file: Option<String>,
}

pub fn admissible(ctx: &Ctx) -> Result<bool> {
    let disc = ctx.cfg.discretization()?;
    let data = ctx.cfg.problem()?;
    let eps = ctx.cfg.admissible.eps;
    let u0 = disc.sample(|x| data.u0(x));
    let f0 = |x: &_| data.f(0.0, x);
    let tau = ctx.cfg.admissible.threshold.unwrap_or_else(|| default_threshold(f0, &disc));
    let mass = zero_set_mass(&u0, f0, tau, &disc)?;
    let mut summary = AdmissibleSummary {
        verdict: "witness",
        eps,
        threshold: tau,
        zero_set_mass: mass,
        c: None,
        c_tried: None,
        witness_file: None,
    };
    let passed = match find_witness(&u0, f0, eps, &disc) {
        Ok(w) => {
            if !w.is_valid(&u0, f0, &disc) {
                bail!("witness failed its own verification");
            }
            ctx.out.nodes("witness.csv", &w.u)?;
            summary.c = Some(w.c);
            summary.witness_file = Some("witness.csv".into());
            true
        }
        Err(Error::NoWitnessFound { c_tried, .. }) => {
            summary.verdict = "no witness found (inconclusive)";
            summary.c_tried = Some(c_tried);
            false
        }
        Err(e) => return Err(e.into()),
    };
    ctx.out.json("admissible.json", &summary)?;
    match summary.c {
        Some(c) => println!("admissible: witness with C = {c:.4}, zero-set mass {mass:.3e}"),
        None => println!("admissible: {}, zero-set mass {mass:.3e}", summary.verdict),
    }
    Ok(passed)
}

#[derive(Serialize)]
struct ModulusRow {
    separation: f64,
    difference: f64,
}

#[derive(Serialize)]
struct AnalyzeSummary {
    time: ModulusReport,
    space: ModulusReport,
    seam: Option<SeamReport>,
    passed: bool,
}

pub fn analyze(ctx: &Ctx) -> Result<bool> {
    let traj = run(ctx)?;
    let a = &ctx.cfg.analyze;
    let time = holder_modulus(&traj, Direction::Time, a.time_target, ctx.seed)?;
    let space = holder_modulus(&traj, Direction::Space, a.space_target, ctx.seed)?;
    for (name, m) in [("modulus_time.csv", &time), ("modulus_space.csv", &space)] {
        ctx.out.table(name, m.samples.iter().map(|&(s, d)| ModulusRow { separation: s, difference: d }))?;
    }
    let seam = match a.seam {
        Some(s) => {
            let data = ctx.cfg.problem()?;
            Some(removability_test(&data, &traj.disc, &ctx.cfg.solver(), s)?)
        }
        None => None,
    };
    let passed = time.passed && space.passed && seam.as_ref().map_or(true, |s| s.passed);
    println!(
        "analyze: time exponent {:.3} (target {}), space exponent {:.3} (target {})",
        time.exponent, time.target, space.exponent, space.target
    );
    if let Some(s) = &seam {
        println!("analyze: seam at {} differs by {:.3e}", s.seam, s.difference);
    }
    ctx.out.json("analyze.json", &AnalyzeSummary { time, space, seam, passed })?;
    Ok(passed)
}
