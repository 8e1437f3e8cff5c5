//! The stationary Dirichlet problem `MA_h u = e^{F(z,u)} f(z)`, solved by a
//! damped per-node Newton-Jacobi iteration or by a Perron envelope sweep.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::barriers::scaled_defining_function;
use crate::domain::Point;
use crate::error::{Error, Result};
use crate::grid::{Discretization, GridFunction};
use crate::math::{abs, exp, ln, powf, sqrt};
use crate::problem::{ProblemData, SpaceFn};
use crate::solver::{solve_on, SolverConfig};
use crate::tol;

pub type StationaryNonlinearity = Arc<dyn Fn(&Point, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct EllipticProblem {
    pub label: String,
    pub nonlinearity: StationaryNonlinearity,
    pub density: SpaceFn,
    pub boundary: SpaceFn,
}

impl core::fmt::Debug for EllipticProblem {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("EllipticProblem").field("label", &self.label).finish()
    }
}

impl EllipticProblem {
    pub fn new(
        label: &str,
        boundary: impl Fn(&Point) -> f64 + Send + Sync + 'static,
        density: impl Fn(&Point) -> f64 + Send + Sync + 'static,
        nonlinearity: impl Fn(&Point, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            nonlinearity: Arc::new(nonlinearity),
            density: Arc::new(density),
            boundary: Arc::new(boundary),
        }
    }

    /// Freezes time-dependent data at `t`.
    pub fn frozen(data: &ProblemData, t: f64) -> Self {
        let (a, b, c) = (data.clone(), data.clone(), data.clone());
        Self::new(
            &format!("{}@{t}", data.label),
            move |x| a.phi(t, x),
            move |x| b.f(t, x),
            move |x, r| c.big_f(t, x, r),
        )
    }

    /// The time-independent flow with this data and initial state `u0`.
    pub fn as_flow(&self, u0: impl Fn(&Point) -> f64 + Send + Sync + 'static, horizon: f64) -> ProblemData {
        let (a, b, c) = (self.boundary.clone(), self.density.clone(), self.nonlinearity.clone());
        ProblemData::new(&self.label, u0, move |_, x| a(x), move |_, x| b(x), move |_, x, r| c(x, r), horizon)
    }

    #[inline]
    pub fn phi(&self, x: &Point) -> f64 {
        (self.boundary)(x)
    }

    #[inline]
    pub fn f(&self, x: &Point) -> f64 {
        (self.density)(x)
    }

    #[inline]
    pub fn big_f(&self, x: &Point, r: f64) -> f64 {
        (self.nonlinearity)(x, r)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EllipticConfig {
    pub ma_floor: f64,
    pub density_shift: f64,
    /// Relaxation factor `ω` of the Newton-Jacobi update.
    pub damping: f64,
    /// Sup of the log residual (damped) or of `change/h²` per sweep (Perron).
    pub residual_target: f64,
    pub max_iterations: usize,
    /// Perron sweeps visit even lattice parity first, then odd.
    pub red_black: bool,
}

impl Default for EllipticConfig {
    fn default() -> Self {
        Self {
            ma_floor: tol::MA_FLOOR,
            density_shift: 0.0,
            damping: 0.3,
            residual_target: 1e-6,
            max_iterations: 500_000,
            red_black: false,
        }
    }
}

impl EllipticConfig {
    fn check(&self) -> Result<()> {
        if !(self.ma_floor > 0.0) || !(self.density_shift >= 0.0) || !(self.residual_target > 0.0) {
            return Err(Error::invalid("elliptic config needs ε_MA > 0, ε_f ≥ 0, target > 0"));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::invalid("damping must lie in (0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct EllipticSolution {
    pub u: GridFunction,
    pub iterations: usize,
    /// Final residual in the units of `residual_target`.
    pub residual: f64,
    pub history: Vec<f64>,
}

/// `min φ + a·ρ` with `MA_h(a ρ) ≥ sup e^{F(·, max φ)} f`, band values imposed.
pub fn elliptic_lower_bound(prob: &EllipticProblem, disc: &Discretization) -> Result<GridFunction> {
    let g = &disc.grid;
    let (lo, hi) = boundary_range(prob, disc)?;
    let mut top: f64 = 0.0;
    for &i in g.active() {
        let x = g.coords(i);
        let v = prob.f(&x) * exp(prob.big_f(&x, hi));
        if !v.is_finite() {
            return Err(Error::UnboundedData("elliptic density".into()));
        }
        top = top.max(v);
    }
    let (rho, _) = scaled_defining_function(disc, top)?;
    let mut u = rho.map(|_, r| lo + r);
    disc.impose_boundary(&mut u, |x| prob.phi(x));
    Ok(u)
}

/// `(min φ, max φ)` over all boundary feet of the band.
pub fn boundary_range(prob: &EllipticProblem, disc: &Discretization) -> Result<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for b in disc.grid.band() {
        for p in [&b.foot, &b.anchor_foot] {
            let v = prob.phi(p);
            if !v.is_finite() {
                return Err(Error::UnboundedData("boundary data".into()));
            }
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    Ok((lo, hi))
}

/// Damped Newton-Jacobi: `u_p += ω·r_p / (Σ_j w_j / max(D_j, d_ref) + ∂_r F)`,
/// with `r_p` the log residual and `D_j` the active frame.
pub fn solve_dirichlet_ma(
    prob: &EllipticProblem,
    disc: &Discretization,
    cfg: &EllipticConfig,
) -> Result<EllipticSolution> {
    cfg.check()?;
    let g = &disc.grid;
    let op = &disc.op;
    let n = disc.dim() as f64;
    let coords: Vec<Point> = g.interior().iter().map(|&i| g.coords(i)).collect();
    let mut log_dens = Vec::with_capacity(coords.len());
    for (k, x) in coords.iter().enumerate() {
        let d = prob.f(x) + cfg.density_shift;
        if !(d > 0.0) {
            return Err(Error::DegenerateDensity { node: g.interior()[k] });
        }
        log_dens.push(ln(d));
    }
    let mut u = elliptic_lower_bound(prob, disc)?;
    let floor_dir = sqrt(cfg.ma_floor);
    let mut delta = vec![0.0; coords.len()];
    let mut history = Vec::new();
    for it in 0..cfg.max_iterations {
        let vals = u.values();
        let mut res: f64 = 0.0;
        for (k, &idx) in g.interior().iter().enumerate() {
            let x = &coords[k];
            let (ma, frame, d) = op.apply_detail(vals, idx);
            let ur = vals[idx];
            let big_f = prob.big_f(x, ur);
            let r = ln(ma.max(cfg.ma_floor)) - log_dens[k] - big_f;
            let slope = ((prob.big_f(x, ur + 1e-6) - big_f) / 1e-6).max(0.0);
            let d_ref = exp((log_dens[k] + big_f) / n).max(floor_dir);
            let mut jac = slope;
            for j in 0..disc.dim() {
                jac += op.centre_weight(frame, j) / d[j].max(d_ref);
            }
            delta[k] = cfg.damping * r / jac;
            res = res.max(abs(r));
        }
        history.push(res);
        if res <= cfg.residual_target {
            return Ok(EllipticSolution { u, iterations: it, residual: res, history });
        }
        let vals = u.values_mut();
        for (k, &idx) in g.interior().iter().enumerate() {
            let v = vals[idx] + delta[k];
            if !v.is_finite() {
                return Err(Error::NonFiniteUpdate { node: idx, t: it as f64 });
            }
            vals[idx] = v;
        }
        disc.impose_boundary(&mut u, |x| prob.phi(x));
    }
    Err(Error::NotConverged { iterations: cfg.max_iterations, residual: *history.last().unwrap_or(&f64::NAN) })
}

/// Upper envelope of discrete subsolutions by Gauss-Seidel sweeps: each
/// interior value is raised by bisection to the largest value keeping
/// `MA_h ≥ e^F f` at that node, then band values are refreshed.
pub fn perron_envelope(
    prob: &EllipticProblem,
    disc: &Discretization,
    cfg: &EllipticConfig,
) -> Result<EllipticSolution> {
    let start = elliptic_lower_bound(prob, disc)?;
    perron_from(prob, disc, cfg, start)
}

/// [`perron_envelope`] started from a given subsolution.
pub fn perron_from(
    prob: &EllipticProblem,
    disc: &Discretization,
    cfg: &EllipticConfig,
    start: GridFunction,
) -> Result<EllipticSolution> {
    perron_core(prob, disc, cfg, start, true)
}

/// Perron sweeps that keep the band values of `start` instead of imposing
/// the boundary data of `prob`.
pub fn perron_fixed_band(
    prob: &EllipticProblem,
    disc: &Discretization,
    cfg: &EllipticConfig,
    start: GridFunction,
) -> Result<EllipticSolution> {
    perron_core(prob, disc, cfg, start, false)
}

fn perron_core(
    prob: &EllipticProblem,
    disc: &Discretization,
    cfg: &EllipticConfig,
    start: GridFunction,
    refresh_band: bool,
) -> Result<EllipticSolution> {
    cfg.check()?;
    let g = &disc.grid;
    let op = &disc.op;
    let h = disc.h();
    let hi = if refresh_band {
        boundary_range(prob, disc)?.1
    } else {
        g.band().iter().map(|b| start.get(b.node)).fold(f64::NEG_INFINITY, f64::max)
    };
    let mut order: Vec<usize> = g.interior().to_vec();
    if cfg.red_black {
        let parity = |i: usize| g.lattice(i).iter().sum::<i64>().rem_euclid(2);
        order.sort_by_key(|&i| (parity(i), i));
    }
    let coords: Vec<Point> = order.iter().map(|&i| g.coords(i)).collect();
    let dens: Vec<f64> = coords.iter().map(|x| prob.f(x) + cfg.density_shift).collect();
    if dens.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
        return Err(Error::UnboundedData("density".into()));
    }
    let mut u = start;
    let mut sums = Vec::new();
    let mut history = Vec::new();
    let stop = cfg.residual_target * h * h;
    for it in 0..cfg.max_iterations {
        let mut change: f64 = 0.0;
        for (k, &idx) in order.iter().enumerate() {
            let x = &coords[k];
            op.neighbour_sums(u.values(), idx, &mut sums);
            let ok = |v: f64| op.apply_with_sums(&sums, v) >= dens[k] * exp(prob.big_f(x, v));
            let old = u.get(idx);
            let top = hi.max(old);
            if !ok(old) {
                continue;
            }
            let new = if ok(top) {
                top
            } else {
                let (mut a, mut b) = (old, top);
                for _ in 0..tol::BISECTION_STEPS {
                    let m = 0.5 * (a + b);
                    if ok(m) {
                        a = m;
                    } else {
                        b = m;
                    }
                }
                a
            };
            change = change.max(new - old);
            u.set(idx, new);
        }
        if refresh_band {
            disc.impose_boundary(&mut u, |x| prob.phi(x));
        }
        history.push(change);
        if change <= stop {
            return Ok(EllipticSolution { u, iterations: it, residual: change / (h * h), history });
        }
    }
    Err(Error::NotConverged {
        iterations: cfg.max_iterations,
        residual: history.last().copied().unwrap_or(f64::NAN) / (h * h),
    })
}

/// Damped iteration when the density is bounded below, Perron otherwise.
pub fn solve_stationary(
    prob: &EllipticProblem,
    disc: &Discretization,
    cfg: &EllipticConfig,
) -> Result<EllipticSolution> {
    let g = &disc.grid;
    let positive = g.interior().iter().all(|&i| prob.f(&g.coords(i)) + cfg.density_shift > 0.0);
    if positive {
        solve_dirichlet_ma(prob, disc, cfg)
    } else {
        perron_envelope(prob, disc, cfg)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StabilityReport {
    pub scales: Vec<f64>,
    /// Discrete `L²` norm of each scaled density.
    pub density_norms: Vec<f64>,
    pub sup_u: Vec<f64>,
    /// `sup|u|` is non-increasing as the scale decreases.
    pub monotone: bool,
}

/// Solves `MA_h u = s·g` with zero boundary data for each scale `s`.
pub fn gkz_stability_probe(
    disc: &Discretization,
    density: impl Fn(&Point) -> f64 + Send + Sync + Clone + 'static,
    scales: &[f64],
    cfg: &EllipticConfig,
) -> Result<StabilityReport> {
    let g = &disc.grid;
    let mut rep = StabilityReport { scales: scales.to_vec(), density_norms: vec![], sup_u: vec![], monotone: true };
    for &s in scales {
        if !(s >= 0.0) {
            return Err(Error::invalid("density scales must be nonnegative"));
        }
        let d = density.clone();
        let prob = EllipticProblem::new("gkz", |_| 0.0, move |x| s * d(x), |_, _| 0.0);
        let l2: f64 = g.interior().iter().map(|&i| powf(prob.f(&g.coords(i)), 2.0)).sum::<f64>() * g.cell_volume();
        rep.density_norms.push(sqrt(l2));
        let sol = solve_stationary(&prob, disc, cfg)?;
        rep.sup_u.push(sol.u.sup_norm());
    }
    let mut idx: Vec<usize> = (0..scales.len()).collect();
    idx.sort_by(|&a, &b| scales[b].partial_cmp(&scales[a]).unwrap());
    rep.monotone = idx.windows(2).all(|w| rep.sup_u[w[1]] <= rep.sup_u[w[0]] + 1e-12);
    Ok(rep)
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub times: Vec<f64>,
    /// `sup|u(t) − u_∞|` at each snapshot.
    pub errors: Vec<f64>,
    pub limit: GridFunction,
    pub burn_in: f64,
    pub monotone_after_burn_in: bool,
    pub final_error: f64,
}

impl ConvergenceReport {
    /// Fails with `ConvergenceStalled` unless the error decreases after the
    /// burn-in and ends below `target`.
    pub fn check(&self, target: f64) -> Result<()> {
        if self.monotone_after_burn_in && self.final_error <= target {
            Ok(())
        } else {
            Err(Error::ConvergenceStalled { error: self.final_error, target })
        }
    }
}

/// Runs the flow to the horizon and measures the sup distance to the
/// stationary solution of the limit data.
pub fn long_time_convergence(
    data: &ProblemData,
    limit: &EllipticProblem,
    disc: &Discretization,
    cfg: &SolverConfig,
    ecfg: &EllipticConfig,
    burn_in: f64,
) -> Result<ConvergenceReport> {
    let u_inf = solve_stationary(limit, disc, ecfg)?.u;
    let traj = solve_on(data, disc, cfg)?;
    let times = traj.times();
    let errors: Vec<f64> = traj.snapshots.iter().map(|s| s.u.sup_distance(&u_inf)).collect();
    let slack = 1e-9;
    let monotone_after_burn_in = times
        .iter()
        .zip(errors.iter())
        .filter(|(t, _)| **t >= burn_in)
        .map(|(_, e)| *e)
        .collect::<Vec<_>>()
        .windows(2)
        .all(|w| w[1] <= w[0] + slack);
    let final_error = *errors.last().unwrap_or(&f64::NAN);
    Ok(ConvergenceReport { times, errors, limit: u_inf, burn_in, monotone_after_burn_in, final_error })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::sq;
    use crate::domain::DomainSpec;

    fn disc(n: usize, h: f64) -> Discretization {
        Discretization::with_defaults(DomainSpec::ball(n, 1.0).unwrap(), h).unwrap()
    }

    fn radial() -> EllipticProblem {
        EllipticProblem::new("radial", |_| 1.0, |_| 1.0, |_, _| 0.0)
    }

    #[test]
    fn radial_solution_both_solvers() {
        let d = disc(1, 0.1);
        let cfg = EllipticConfig::default();
        let exact = d.sample(sq);
        let a = solve_dirichlet_ma(&radial(), &d, &cfg).unwrap();
        let b = perron_envelope(&radial(), &d, &cfg).unwrap();
        assert!(a.u.sup_distance(&exact) < 5.0 * 0.1, "{}", a.u.sup_distance(&exact));
        assert!(b.u.sup_distance(&exact) < 5.0 * 0.1);
        assert!(a.u.sup_distance(&b.u) < 2.0 * cfg.residual_target + 1e-6);
    }

    #[test]
    fn maximal_pluriharmonic_data() {
        let d = disc(1, 0.1);
        let prob = EllipticProblem::new("re", |x| x[0], |_| 0.0, |_, _| 0.0);
        let sol = perron_envelope(&prob, &d, &EllipticConfig::default()).unwrap();
        for &i in d.grid.interior() {
            assert!((sol.u.get(i) - d.grid.coords(i)[0]).abs() < 0.05);
        }
    }

    #[test]
    fn constant_data_is_fixed_point() {
        let d = disc(2, 0.15);
        let prob = EllipticProblem::new("c", |_| 0.7, |_| 0.0, |_, _| 0.0);
        let sol = perron_envelope(&prob, &d, &EllipticConfig::default()).unwrap();
        assert_eq!(sol.iterations, 0);
        assert!(sol.u.sup_distance(&d.sample(|_| 0.7)) < 1e-15);
    }

    #[test]
    fn perron_sweeps_are_monotone() {
        let d = disc(1, 0.1);
        let sol = perron_envelope(&radial(), &d, &EllipticConfig::default()).unwrap();
        assert!(sol.history.iter().all(|c| *c >= 0.0));
    }

    #[test]
    fn degenerate_density_rejected_by_damped() {
        let d = disc(1, 0.1);
        let prob = EllipticProblem::new("z", |_| 0.0, |_| 0.0, |_, _| 0.0);
        assert!(matches!(
            solve_dirichlet_ma(&prob, &d, &EllipticConfig::default()),
            Err(Error::DegenerateDensity { .. })
        ));
    }

    #[test]
    fn stability_ladder_monotone() {
        let d = disc(1, 0.1);
        let rep = gkz_stability_probe(&d, |_| 1.0, &[1.0, 0.1, 0.0], &EllipticConfig::default()).unwrap();
        assert!(rep.monotone);
        assert_eq!(rep.sup_u[2], 0.0);
    }
}
