//! Explicit monotone time stepping of `∂_t u = log(MA_h u / f) − F(t, z, u)`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::barriers::{linfty_bounds, LinftyBounds};
use crate::domain::{validate_domain, DomainSpec, Point};
use crate::error::{Error, Result};
use crate::field::SpaceTimeField;
use crate::frames::FrameSet;
use crate::grid::{Discretization, GridFunction, SpaceGrid};
use crate::math::{abs, ln};
use crate::problem::ProblemData;
use crate::tol;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum TimeStep {
    Fixed(f64),
    /// `dt = λ·h² / (1 + max|log MA_h| + max|F|)`.
    Cfl(f64),
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SolverConfig {
    pub h: f64,
    pub time_step: TimeStep,
    /// Overrides the data horizon when set.
    pub horizon: Option<f64>,
    /// `ε_MA`: floor under `MA_h` before the logarithm.
    pub ma_floor: f64,
    /// `ε_f`: shift added to the density.
    pub density_shift: f64,
    /// Number of frames `K` (ignored for `n = 1`).
    pub frames: usize,
    pub penalty: f64,
    pub max_steps: usize,
    /// Steady state is declared when `sup|Δu|/dt` drops below this.
    pub residual_target: f64,
    /// Time between stored snapshots; `0` keeps only the first and last.
    pub snapshot_every: f64,
    pub stop_at_steady: bool,
    /// Check the a priori bounds at every snapshot.
    pub check_bounds: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            h: 0.05,
            time_step: TimeStep::Cfl(tol::CFL_FACTOR),
            horizon: None,
            ma_floor: tol::MA_FLOOR,
            density_shift: 0.0,
            frames: tol::DEFAULT_FRAMES,
            penalty: tol::PENALTY,
            max_steps: 5_000_000,
            residual_target: 1e-6,
            snapshot_every: 0.1,
            stop_at_steady: false,
            check_bounds: true,
        }
    }
}

impl SolverConfig {
    pub fn check(&self) -> Result<()> {
        let dt_ok = match self.time_step {
            TimeStep::Fixed(dt) => dt > 0.0,
            TimeStep::Cfl(l) => l > 0.0,
        };
        if !(self.h > 0.0) || !dt_ok || !(self.ma_floor > 0.0) || !(self.density_shift >= 0.0) {
            return Err(Error::invalid("solver config needs h > 0, dt > 0, ε_MA > 0, ε_f ≥ 0"));
        }
        if !(self.snapshot_every >= 0.0) || !(self.residual_target > 0.0) {
            return Err(Error::invalid("snapshot interval and residual target must be nonnegative"));
        }
        Ok(())
    }

    pub fn discretize(&self, dom: DomainSpec) -> Result<Discretization> {
        let frames = FrameSet::lattice(dom.dim(), self.frames)?;
        Discretization::new(dom, self.h, frames, self.penalty)
    }
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    pub u: GridFunction,
    /// The update rate `(u⁺ − u)/dt` computed from this state, at interior nodes.
    pub rate: Option<GridFunction>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoundFlag {
    pub t: f64,
    pub below_lower: f64,
    pub above_upper: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SolveReport {
    pub steps: usize,
    pub final_time: f64,
    pub reached_steady: bool,
    pub step_times: Vec<f64>,
    pub sup_change: Vec<f64>,
    pub clamp_counts: Vec<usize>,
    pub dt_history: Vec<f64>,
    pub bound_flags: Vec<BoundFlag>,
    pub warnings: Vec<String>,
}

impl SolveReport {
    /// Last step index with a nonzero clamp count, if any.
    pub fn last_clamp_step(&self) -> Option<usize> {
        self.clamp_counts.iter().rposition(|&c| c > 0)
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub disc: Discretization,
    pub snapshots: Vec<Snapshot>,
    pub report: SolveReport,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }

    pub fn last(&self) -> &Snapshot {
        self.snapshots.last().expect("trajectory is never empty")
    }

    fn bracket(&self, t: f64) -> Result<(usize, f64)> {
        let s = &self.snapshots;
        let eps = 1e-12 * (1.0 + abs(t));
        if t < s[0].t - eps || t > s[s.len() - 1].t + eps {
            return Err(Error::invalid(format!("time {t} outside the trajectory")));
        }
        if s.len() == 1 {
            return Ok((0, 0.0));
        }
        let k = s.partition_point(|q| q.t <= t).clamp(1, s.len() - 1) - 1;
        let w = ((t - s[k].t) / (s[k + 1].t - s[k].t)).clamp(0.0, 1.0);
        Ok((k, w))
    }

    /// Linear interpolation between neighbouring snapshots.
    pub fn value_at(&self, t: f64) -> Result<GridFunction> {
        let (k, w) = self.bracket(t)?;
        let a = &self.snapshots[k].u;
        if w == 0.0 {
            return Ok(a.clone().with_time(t));
        }
        let b = &self.snapshots[k + 1].u;
        if w == 1.0 {
            return Ok(b.clone().with_time(t));
        }
        Ok(a.zip(b, |x, y| (1.0 - w) * x + w * y).with_time(t))
    }

    /// Stored update rate at a snapshot time, else the slope between snapshots.
    pub fn rate_at(&self, t: f64) -> Result<GridFunction> {
        let (k, w) = self.bracket(t)?;
        let s = &self.snapshots;
        let exact = if w == 0.0 {
            Some(k)
        } else if w == 1.0 {
            Some(k + 1)
        } else {
            None
        };
        if let Some(j) = exact {
            if let Some(r) = &s[j].rate {
                return Ok(r.clone());
            }
        }
        if s.len() == 1 {
            return Ok(s[0].u.map(|_, _| 0.0));
        }
        let dt = s[k + 1].t - s[k].t;
        Ok(s[k + 1].u.zip(&s[k].u, |a, b| (a - b) / dt))
    }
}

impl SpaceTimeField for Trajectory {
    fn sample(&self, _disc: &Discretization, t: f64) -> Result<GridFunction> {
        self.value_at(t)
    }

    fn rate(&self, _disc: &Discretization, t: f64) -> Result<GridFunction> {
        self.rate_at(t)
    }
}

/// Statistics of one rate evaluation.
#[derive(Debug, Clone, Copy, Default)]
pub struct RateStats {
    pub max_abs_log_ma: f64,
    pub max_abs_f: f64,
    pub max_abs_rate: f64,
    pub clamps: usize,
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub u: GridFunction,
    pub clamps: usize,
    pub sup_change: f64,
}

/// Precomputed state for stepping one problem on one discretization.
pub struct Stepper<'a> {
    pub disc: &'a Discretization,
    pub data: &'a ProblemData,
    pub cfg: &'a SolverConfig,
    coords: Vec<Point>,
}

impl<'a> Stepper<'a> {
    pub fn new(disc: &'a Discretization, data: &'a ProblemData, cfg: &'a SolverConfig) -> Result<Self> {
        cfg.check()?;
        let coords = disc.grid.interior().iter().map(|&i| disc.grid.coords(i)).collect();
        Ok(Self { disc, data, cfg, coords })
    }

    /// Rates `log max(MA_h, ε_MA) − log(f + ε_f) − F` at interior nodes, in
    /// `grid.interior()` order.
    pub fn rates(&self, u: &[f64], t: f64, out: &mut Vec<f64>) -> Result<RateStats> {
        let g = &self.disc.grid;
        let op = &self.disc.op;
        out.clear();
        out.reserve(self.coords.len());
        let mut st = RateStats::default();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for (k, &idx) in g.interior().iter().enumerate() {
            let x = &self.coords[k];
            let mut ma = op.apply_at(u, idx);
            if !(ma > self.cfg.ma_floor) {
                st.clamps += 1;
                ma = self.cfg.ma_floor;
            }
            lo = lo.min(ma);
            hi = hi.max(ma);
            let dens = self.data.f(t, x) + self.cfg.density_shift;
            if !(dens > 0.0) {
                return Err(Error::DegenerateDensity { node: idx });
            }
            let ff = self.data.big_f(t, x, u[idx]);
            let r = ln(ma / dens) - ff;
            st.max_abs_f = st.max_abs_f.max(abs(ff));
            st.max_abs_rate = st.max_abs_rate.max(abs(r));
            out.push(r);
        }
        if hi > 0.0 {
            st.max_abs_log_ma = abs(ln(lo)).max(abs(ln(hi)));
        }
        Ok(st)
    }

    pub fn cfl_dt(&self, st: &RateStats) -> f64 {
        let h = self.disc.h();
        match self.cfg.time_step {
            TimeStep::Fixed(dt) => dt,
            TimeStep::Cfl(l) => l * h * h / (1.0 + st.max_abs_log_ma + st.max_abs_f),
        }
    }

    /// Applies precomputed rates over `dt` and imposes `φ(t_new, ·)` on the band.
    pub fn advance(&self, u: &GridFunction, rates: &[f64], dt: f64, t_new: f64) -> Result<GridFunction> {
        let mut next = u.clone();
        self.advance_into(u, rates, dt, t_new, &mut next)?;
        Ok(next)
    }

    /// [`Self::advance`] into a buffer that agrees with `u` off the active
    /// nodes; returns `sup|next − u|`.
    pub fn advance_into(
        &self,
        u: &GridFunction,
        rates: &[f64],
        dt: f64,
        t_new: f64,
        next: &mut GridFunction,
    ) -> Result<f64> {
        let g = &self.disc.grid;
        let mut change: f64 = 0.0;
        {
            let (uv, nv) = (u.values(), next.values_mut());
            for (k, &idx) in g.interior().iter().enumerate() {
                let v = uv[idx] + dt * rates[k];
                if !v.is_finite() {
                    return Err(Error::NonFiniteUpdate { node: idx, t: t_new });
                }
                change = change.max(abs(v - uv[idx]));
                nv[idx] = v;
            }
        }
        for b in g.band() {
            let v = SpaceGrid::band_value(
                b,
                next.get(b.anchor),
                self.data.phi(t_new, &b.foot),
                self.data.phi(t_new, &b.anchor_foot),
            );
            if !v.is_finite() {
                return Err(Error::NonFiniteUpdate { node: b.node, t: t_new });
            }
            change = change.max(abs(v - u.get(b.node)));
            next.set(b.node, v);
        }
        next.set_time(Some(t_new));
        Ok(change)
    }

    /// One explicit step from `(t, u)`.
    pub fn step(&self, u: &GridFunction, t: f64, dt: f64) -> Result<StepOutcome> {
        let mut rates = Vec::new();
        let st = self.rates(u.values(), t, &mut rates)?;
        let next = self.advance(u, &rates, dt, t + dt)?;
        let sup_change = next.sup_distance(u);
        Ok(StepOutcome { u: next, clamps: st.clamps, sup_change })
    }

    fn rate_field(&self, u: &GridFunction, rates: &[f64]) -> GridFunction {
        let mut r = u.map(|_, _| 0.0);
        for (k, &idx) in self.disc.grid.interior().iter().enumerate() {
            r.set(idx, rates[k]);
        }
        r
    }
}

/// One explicit step; see [`Stepper::step`].
pub fn step(
    disc: &Discretization,
    data: &ProblemData,
    cfg: &SolverConfig,
    u: &GridFunction,
    t: f64,
    dt: f64,
) -> Result<StepOutcome> {
    Stepper::new(disc, data, cfg)?.step(u, t, dt)
}

/// Validates the domain, builds the grid and marches from `u₀`.
pub fn solve(data: &ProblemData, dom: &DomainSpec, cfg: &SolverConfig) -> Result<Trajectory> {
    validate_domain(dom, 16)?;
    let disc = cfg.discretize(dom.clone())?;
    solve_on(data, &disc, cfg)
}

/// Marches from `u₀` sampled on an existing discretization.
pub fn solve_on(data: &ProblemData, disc: &Discretization, cfg: &SolverConfig) -> Result<Trajectory> {
    let u0 = disc.sample(|x| data.u0(x)).with_time(0.0);
    solve_from(data, disc, cfg, u0, 0.0)
}

/// Marches from an arbitrary state `u` at time `t0` up to the horizon.
pub fn solve_from(
    data: &ProblemData,
    disc: &Discretization,
    cfg: &SolverConfig,
    u: GridFunction,
    t0: f64,
) -> Result<Trajectory> {
    let stepper = Stepper::new(disc, data, cfg)?;
    let horizon = cfg.horizon.unwrap_or(data.horizon);
    if !horizon.is_finite() && !cfg.stop_at_steady {
        return Err(Error::invalid("infinite horizon needs stop_at_steady"));
    }
    if !(horizon > t0) {
        return Err(Error::invalid("horizon must exceed the start time"));
    }
    if !u.is_finite() {
        return Err(Error::UnboundedData("initial state".into()));
    }
    let h = disc.h();
    let mut report = SolveReport::default();
    let psh = disc.op.is_discretely_psh(&u, tol::PSH_TOL);
    let bad = psh.iter().filter(|f| !**f).count();
    if bad > 0 {
        report.warnings.push(format!("initial state not discretely psh at {bad} interior nodes"));
    }
    let bounds: Option<LinftyBounds> = if cfg.check_bounds { Some(linfty_bounds(data, disc)?) } else { None };
    let check = |u: &GridFunction, t: f64, rep: &mut SolveReport| {
        if let Some(b) = &bounds {
            let (lo, hi) = b.excess(u);
            if lo > tol::visc(h) || hi > tol::visc(h) {
                rep.bound_flags.push(BoundFlag { t, below_lower: lo, above_upper: hi });
            }
        }
    };

    let mut snapshots: Vec<Snapshot> = Vec::new();
    let every = cfg.snapshot_every;
    let mut next_snap = if every > 0.0 { (libm::floor(t0 / every + 1e-9) + 1.0) * every } else { f64::INFINITY };
    let mut spare = u.clone();
    let mut u = u;
    let mut t = t0;
    let mut rates = Vec::new();
    let mut pending = true;
    let end_eps = 1e-12 * (1.0 + abs(horizon));
    loop {
        let st = stepper.rates(u.values(), t, &mut rates)?;
        if pending {
            check(&u, t, &mut report);
            snapshots.push(Snapshot { t, u: u.clone().with_time(t), rate: Some(stepper.rate_field(&u, &rates)) });
            pending = false;
        }
        if t >= horizon - end_eps {
            break;
        }
        if report.steps >= cfg.max_steps {
            return Err(Error::MaxStepsExceeded { steps: report.steps, t });
        }
        let mut dt = stepper.cfl_dt(&st);
        let mut target = horizon.min(next_snap);
        if t + dt >= target - 1e-12 * (1.0 + abs(target)) {
            dt = target - t;
        } else {
            target = f64::NAN;
        }
        let change = stepper.advance_into(&u, &rates, dt, t + dt, &mut spare)?;
        core::mem::swap(&mut u, &mut spare);
        t = if target.is_nan() { t + dt } else { target };
        report.steps += 1;
        report.step_times.push(t);
        report.sup_change.push(change);
        report.clamp_counts.push(st.clamps);
        report.dt_history.push(dt);
        if t >= next_snap - 1e-12 * (1.0 + abs(next_snap)) {
            pending = true;
            while next_snap <= t + 1e-12 * (1.0 + abs(t)) {
                next_snap += every;
            }
        }
        if t >= horizon - end_eps {
            pending = true;
        }
        if cfg.stop_at_steady && change / dt < cfg.residual_target {
            report.reached_steady = true;
            let st = stepper.rates(u.values(), t, &mut rates)?;
            let _ = st;
            check(&u, t, &mut report);
            snapshots.push(Snapshot { t, u: u.clone().with_time(t), rate: Some(stepper.rate_field(&u, &rates)) });
            break;
        }
    }
    report.final_time = t;
    Ok(Trajectory { disc: disc.clone(), snapshots, report })
}

/// `(1/A)·u(A t, z)` on the snapshot times `t` with `A t` inside the run.
pub fn rescale_time(traj: &Trajectory, a: f64) -> Result<Trajectory> {
    if !(a > 0.0) {
        return Err(Error::invalid("rescaling factor must be positive"));
    }
    let t_end = traj.last().t;
    let mut snapshots = Vec::new();
    for s in &traj.snapshots {
        let at = a * s.t;
        if at > t_end + 1e-12 * (1.0 + t_end) {
            break;
        }
        let at = at.min(t_end);
        let u = traj.value_at(at)?.map(|_, v| v / a).with_time(s.t);
        let rate = Some(traj.rate_at(at)?);
        snapshots.push(Snapshot { t: s.t, u, rate });
    }
    Ok(Trajectory { disc: traj.disc.clone(), snapshots, report: traj.report.clone() })
}

/// Result of [`regularized_family_solve`].
#[derive(Debug, Clone)]
pub struct Family {
    pub members: Vec<(f64, Trajectory)>,
    /// `sup|u_i(T) − u_j(T)|` for every pair of members.
    pub final_distance: Vec<Vec<f64>>,
}

/// Solves with `f + ε_j` for each shift of a decreasing sequence.
pub fn regularized_family_solve(
    data: &ProblemData,
    disc: &Discretization,
    cfg: &SolverConfig,
    shifts: &[f64],
) -> Result<Family> {
    if shifts.windows(2).any(|w| !(w[1] < w[0])) || shifts.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::invalid("shifts must be positive and strictly decreasing"));
    }
    let mut members = Vec::new();
    for &e in shifts {
        let mut c = cfg.clone();
        c.density_shift = e;
        members.push((e, solve_on(data, disc, &c)?));
    }
    let k = members.len();
    let mut final_distance = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in 0..k {
            final_distance[i][j] = members[i].1.last().u.sup_distance(&members[j].1.last().u);
        }
    }
    Ok(Family { members, final_distance })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;

    fn disc(n: usize, h: f64) -> Discretization {
        Discretization::with_defaults(DomainSpec::ball(n, 1.0).unwrap(), h).unwrap()
    }

    #[test]
    fn manufactured_step_is_exact() {
        let d = disc(1, 0.1);
        let data = corpus::linear_flow();
        let cfg = SolverConfig::default();
        let t = 0.3;
        let u = d.sample(|x| corpus::sq(x) + t);
        let out = step(&d, &data, &cfg, &u, t, 1e-3).unwrap();
        for &i in d.grid.interior() {
            assert!((out.u.get(i) - (u.get(i) + 1e-3)).abs() < 1e-10);
        }
        assert_eq!(out.clamps, 0);
    }

    #[test]
    fn stationary_state_is_fixed() {
        let d = disc(2, 0.15);
        let data = ProblemData::new("st", corpus::sq, |_, _| 1.0, |_, _| 1.0, |_, _, _| 0.0, 1.0);
        let cfg = SolverConfig::default();
        let u = d.sample(corpus::sq);
        let out = step(&d, &data, &cfg, &u, 0.0, 1e-3).unwrap();
        for &i in d.grid.interior() {
            assert!((out.u.get(i) - u.get(i)).abs() < 1e-15);
        }
    }

    #[test]
    fn dent_clamps_neighbours_and_rises() {
        let d = disc(1, 0.1);
        let data = ProblemData::new("dent", corpus::sq, |_, _| 1.0, |_, _| 1.0, |_, _, _| 0.0, 1.0);
        let cfg = SolverConfig::default();
        let mut u = d.sample(corpus::sq);
        let p = d.grid.nearest_node(&[0.0; 4]).unwrap();
        u.set(p, u.get(p) - 0.5);
        let out = step(&d, &data, &cfg, &u, 0.0, 1e-4).unwrap();
        assert!(out.clamps > 0);
        assert!(out.u.get(p) > u.get(p));
    }

    #[test]
    fn zero_density_is_degenerate() {
        let d = disc(1, 0.1);
        let data = ProblemData::new("zero", |_| 0.0, |_, _| 0.0, |_, _| 0.0, |_, _, _| 0.0, 1.0);
        let cfg = SolverConfig { check_bounds: false, ..Default::default() };
        assert!(matches!(solve_on(&data, &d, &cfg), Err(Error::DegenerateDensity { .. })));
    }

    #[test]
    fn rescale_identity_and_linear() {
        let d = disc(1, 0.1);
        let data = corpus::linear_flow();
        let cfg = SolverConfig { h: 0.1, snapshot_every: 0.25, ..Default::default() };
        let tr = solve_on(&data, &d, &cfg).unwrap();
        let same = rescale_time(&tr, 1.0).unwrap();
        assert_eq!(same.snapshots.len(), tr.snapshots.len());
        for (a, b) in same.snapshots.iter().zip(&tr.snapshots) {
            assert_eq!(a.u.sup_distance(&b.u), 0.0);
        }
        let half = rescale_time(&tr, 2.0).unwrap();
        for s in &half.snapshots {
            let want = tr.value_at(2.0 * s.t).unwrap();
            assert!(s.u.sup_distance(&want.map(|_, v| v / 2.0)) < 1e-14);
        }
        assert!(rescale_time(&tr, 0.0).is_err());
    }

    #[test]
    fn snapshots_strictly_increase() {
        let d = disc(1, 0.1);
        let data = corpus::linear_flow();
        let cfg = SolverConfig { h: 0.1, snapshot_every: 0.1, ..Default::default() };
        let tr = solve_on(&data, &d, &cfg).unwrap();
        let ts = tr.times();
        assert_eq!(ts[0], 0.0);
        assert!(ts.windows(2).all(|w| w[1] > w[0]));
        assert!((ts.last().unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(ts.len(), 11);
    }
}
