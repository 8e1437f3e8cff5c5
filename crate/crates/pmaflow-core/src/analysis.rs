//! Measurements on solver output: comparison ordering, time-shifted weak
//! comparison, Hölder moduli and the seam (removability) test.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::admissibility::find_witness;
use crate::error::{Error, Result, Role};
use crate::field::{sweep, SpaceTimeField};
use crate::grid::{Discretization, GridFunction};
use crate::math::{abs, exp, linear_fit, ln, sqrt};
use crate::problem::ProblemData;
use crate::solver::{solve_from, solve_on, SolverConfig, Trajectory};
use crate::tol;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ComparisonReport {
    /// `max (u − v)` over all nodes and times.
    pub max_gap: f64,
    /// `max (u − v)₊` over `t = 0` and the band.
    pub boundary_gap: f64,
    pub samples: usize,
    pub passed: bool,
}

fn require_role(
    field: &dyn SpaceTimeField,
    role: Role,
    data: &ProblemData,
    disc: &Discretization,
    times: &[f64],
    tol: f64,
) -> Result<()> {
    let rep = sweep(field, role, data, disc, times, tol)?;
    if rep.passed() {
        Ok(())
    } else {
        Err(Error::InputsNotSubSuper { role, violations: rep.violations, worst: rep.worst })
    }
}

/// Checks the inputs' roles by sweeps at the positive `times`, then asserts
/// that the interior gap never exceeds the parabolic-boundary gap.
pub fn comparison_test(
    sub: &dyn SpaceTimeField,
    sup: &dyn SpaceTimeField,
    data: &ProblemData,
    disc: &Discretization,
    times: &[f64],
    tol: f64,
) -> Result<ComparisonReport> {
    if times.is_empty() {
        return Err(Error::invalid("comparison needs sample times"));
    }
    let positive: Vec<f64> = times.iter().copied().filter(|&t| t > 0.0).collect();
    require_role(sub, Role::Sub, data, disc, &positive, tol)?;
    require_role(sup, Role::Super, data, disc, &positive, tol)?;
    let g = &disc.grid;
    let mut rep = ComparisonReport { max_gap: f64::NEG_INFINITY, boundary_gap: 0.0, samples: 0, passed: false };
    let start = sub.sample(disc, 0.0)?.zip(&sup.sample(disc, 0.0)?, |a, b| a - b);
    for &i in g.active() {
        rep.boundary_gap = rep.boundary_gap.max(start.get(i));
        rep.max_gap = rep.max_gap.max(start.get(i));
    }
    for &t in &positive {
        let d = sub.sample(disc, t)?.zip(&sup.sample(disc, t)?, |a, b| a - b);
        for b in g.band() {
            rep.boundary_gap = rep.boundary_gap.max(d.get(b.node));
        }
        for &i in g.active() {
            rep.max_gap = rep.max_gap.max(d.get(i));
            rep.samples += 1;
        }
    }
    rep.passed = rep.max_gap <= rep.boundary_gap + tol;
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ShiftReport {
    pub delta: f64,
    /// `max (u(t+s) − v(t) − ε)` over the accepted samples.
    pub worst: f64,
    /// `(1+ε) f(t+s) ≥ f(t)` held at every sample.
    pub density_hypothesis: bool,
}

/// Halves `δ` from `(S − R)/2` until `u(t+s) < v(t) + ε` for all sampled
/// `t ∈ window`, `0 ≤ s ≤ δ`.
pub fn weak_comparison_shift_test(
    sub: &dyn SpaceTimeField,
    sup: &dyn SpaceTimeField,
    data: &ProblemData,
    disc: &Discretization,
    eps: f64,
    window: (f64, f64),
    samples: usize,
) -> Result<ShiftReport> {
    if !(eps > 0.0) {
        return Err(Error::invalid("weak comparison needs ε > 0"));
    }
    let (r, s) = window;
    if !(s > r) || r < 0.0 || samples == 0 {
        return Err(Error::invalid("window must satisfy 0 ≤ R < S with samples"));
    }
    let g = &disc.grid;
    let ts: Vec<f64> = (0..=samples).map(|k| r + (s - r) * k as f64 / samples as f64).collect();
    let horizon = data.time_window();
    let mut delta = (s - r) / 2.0;
    for _ in 0..tol::HALVING_CAP {
        let mut worst = f64::NEG_INFINITY;
        let mut hyp = true;
        for &t in &ts {
            let v = sup.sample(disc, t)?;
            for j in 0..=4 {
                let shift = delta * j as f64 / 4.0;
                if t + shift > horizon {
                    continue;
                }
                let u = sub.sample(disc, t + shift)?;
                for &i in g.active() {
                    worst = worst.max(u.get(i) - v.get(i) - eps);
                }
                for &i in g.interior() {
                    let x = g.coords(i);
                    if (1.0 + eps) * data.f(t + shift, &x) < data.f(t, &x) {
                        hyp = false;
                    }
                }
            }
        }
        if worst < 0.0 {
            return Ok(ShiftReport { delta, worst, density_hypothesis: hyp });
        }
        delta /= 2.0;
    }
    Err(Error::NoDeltaFound { smallest: delta * 2.0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Direction {
    Time,
    Space,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModulusReport {
    pub direction: Direction,
    pub exponent: f64,
    pub constant: f64,
    pub pairs: usize,
    /// RMS residual of the log-log fit.
    pub residual: f64,
    pub target: f64,
    pub passed: bool,
    pub seed: u64,
    /// `(separation, largest difference)` per scale bin.
    pub samples: Vec<(f64, f64)>,
}

const SPACE_BINS: usize = 8;
const PAIRS_PER_BIN: usize = 400;

/// Fits `log ω(s) ≈ log C + a log s`, where `ω(s)` is the largest difference
/// at separation `s`. Time separations run up to a quarter of the
/// trajectory; space separations over `[4h, diam/4]`.
pub fn holder_modulus(traj: &Trajectory, direction: Direction, target: f64, seed: u64) -> Result<ModulusReport> {
    let samples = match direction {
        Direction::Time => time_samples(traj)?,
        Direction::Space => space_samples(traj, seed)?,
    };
    let pairs = samples.iter().map(|s| s.2).sum::<usize>();
    let pts: Vec<(f64, f64)> = samples.iter().filter(|s| s.1 > 0.0).map(|s| (s.0, s.1)).collect();
    if pts.len() < 2 || pairs < tol::MIN_PAIRS {
        return Err(Error::InsufficientData { needed: tol::MIN_PAIRS, got: pairs.min(pts.len()) });
    }
    let lx: Vec<f64> = pts.iter().map(|p| ln(p.0)).collect();
    let ly: Vec<f64> = pts.iter().map(|p| ln(p.1)).collect();
    let (exponent, icpt, residual) = linear_fit(&lx, &ly);
    Ok(ModulusReport {
        direction,
        exponent,
        constant: exp(icpt),
        pairs,
        residual,
        target,
        passed: exponent >= target * (1.0 - tol::HOLDER_SLACK),
        seed,
        samples: pts,
    })
}

fn time_samples(traj: &Trajectory) -> Result<Vec<(f64, f64, usize)>> {
    let s = &traj.snapshots;
    if s.len() < tol::MIN_PAIRS {
        return Err(Error::InsufficientData { needed: tol::MIN_PAIRS, got: s.len() });
    }
    let span = s[s.len() - 1].t - s[0].t;
    let gap = s.windows(2).map(|w| w[1].t - w[0].t).fold(f64::INFINITY, f64::min);
    let mut bins: Vec<(f64, f64, usize)> = Vec::new();
    for (j, a) in s.iter().enumerate() {
        for b in &s[j + 1..] {
            let d = b.t - a.t;
            if d > span / 4.0 * (1.0 + 1e-9) {
                break;
            }
            let diff = a.u.sup_distance(&b.u);
            let key = libm::round(d / gap);
            match bins.iter_mut().find(|q| libm::round(q.0 / gap) == key) {
                Some(q) => {
                    q.1 = q.1.max(diff);
                    q.2 += 1;
                }
                None => bins.push((d, diff, 1)),
            }
        }
    }
    bins.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(bins)
}

fn space_samples(traj: &Trajectory, seed: u64) -> Result<Vec<(f64, f64, usize)>> {
    let disc = &traj.disc;
    let g = &disc.grid;
    if g.interior().len() < 100 {
        return Err(Error::InsufficientData { needed: 100, got: g.interior().len() });
    }
    let lo = 4.0 * disc.h();
    let hi = disc.diameter() / 4.0;
    if !(hi > lo) {
        return Err(Error::InsufficientData { needed: 2, got: 0 });
    }
    let rd = g.dim() * 2;
    let ratio = hi / lo;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nodes = g.active();
    let snaps: Vec<&GridFunction> = traj.snapshots.iter().map(|s| &s.u).collect();
    let mut bins = vec![(0.0, 0.0, 0usize); SPACE_BINS];
    for (k, bin) in bins.iter_mut().enumerate() {
        let s = lo * libm::pow(ratio, k as f64 / (SPACE_BINS - 1) as f64);
        bin.0 = s;
        for _ in 0..PAIRS_PER_BIN {
            let i = nodes[rng.gen_range(0..nodes.len())];
            let mut dir = [0.0; 4];
            for c in dir.iter_mut().take(rd) {
                *c = rng.gen_range(-1.0..1.0);
            }
            let len = sqrt(dir.iter().map(|c| c * c).sum());
            if len < 1e-3 {
                continue;
            }
            let x = g.coords(i);
            let mut y = x;
            for c in 0..rd {
                y[c] += s * dir[c] / len;
            }
            let Some(j) = g.nearest_node(&y) else { continue };
            if g.class(j) == crate::grid::NodeClass::Exterior {
                continue;
            }
            let sep = crate::math::dist(&x, &g.coords(j));
            if abs(sep - s) > disc.h() {
                continue;
            }
            let diff = snaps.iter().map(|u| abs(u.get(i) - u.get(j))).fold(0.0, f64::max);
            bin.1 = if bin.1 > diff { bin.1 } else { diff };
            bin.2 += 1;
        }
    }
    bins.retain(|b| b.2 > 0);
    Ok(bins)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SeamReport {
    pub seam: f64,
    /// `sup|u_split(T) − u_full(T)|`.
    pub difference: f64,
    pub tol: f64,
    pub passed: bool,
    /// Constant of the witness found for `(u(S), f(S))`, if any.
    pub witness_c: Option<f64>,
}

/// Solves on `(0, S]`, restarts from `u(S)` up to `T`, and compares with a
/// single run on `(0, T)`.
pub fn removability_test(
    data: &ProblemData,
    disc: &Discretization,
    cfg: &SolverConfig,
    seam: f64,
) -> Result<SeamReport> {
    let horizon = cfg.horizon.unwrap_or(data.horizon);
    if !(seam > 0.0 && seam < horizon) {
        return Err(Error::invalid("seam time must lie strictly inside (0, T)"));
    }
    let full = solve_on(data, disc, cfg)?;
    let first = solve_on(data, disc, &SolverConfig { horizon: Some(seam), ..cfg.clone() })?;
    let u_s = first.last().u.clone();
    let second = solve_from(data, disc, &SolverConfig { horizon: Some(horizon), ..cfg.clone() }, u_s.clone(), seam)?;
    let difference = second.last().u.sup_distance(&full.last().u);
    let tol = tol::seam(disc.h());
    let witness_c = match find_witness(&u_s, |x| data.f(seam, x), tol, disc) {
        Ok(w) => Some(w.c),
        Err(Error::NoWitnessFound { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(SeamReport { seam, difference, tol, passed: difference <= tol, witness_c })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{linear_flow, linear_flow_exact, sq};
    use crate::domain::DomainSpec;
    use crate::field::{interior_times, FnField};

    fn disc(h: f64) -> Discretization {
        Discretization::with_defaults(DomainSpec::ball(1, 1.0).unwrap(), h).unwrap()
    }

    #[test]
    fn exact_flow_against_itself() {
        let d = disc(0.1);
        let data = linear_flow();
        let u = linear_flow_exact();
        let times = interior_times(1.0, 4);
        let rep = comparison_test(&u, &u, &data, &d, &times, tol::visc(0.1)).unwrap();
        assert!(rep.passed);
        assert!(rep.max_gap.abs() < 1e-12);
    }

    #[test]
    fn swapped_roles_are_rejected() {
        let d = disc(0.1);
        let data = linear_flow();
        let lower = FnField::with_rate(|t, x| sq(x) + t - 1.0 - 2.0 * t, |_, _| -1.0);
        let upper = FnField::with_rate(|t, x| sq(x) + 3.0 * t + 1.0, |_, _| 3.0);
        let times = interior_times(1.0, 3);
        assert!(comparison_test(&lower, &upper, &data, &d, &times, 1e-9).unwrap().passed);
        assert!(matches!(
            comparison_test(&upper, &lower, &data, &d, &times, 1e-9),
            Err(Error::InputsNotSubSuper { .. })
        ));
    }

    #[test]
    fn shift_test_on_identical_fields() {
        let d = disc(0.1);
        let data = linear_flow();
        let u = linear_flow_exact();
        let rep = weak_comparison_shift_test(&u, &u, &data, &d, 0.1, (0.2, 0.8), 6).unwrap();
        assert!(rep.delta <= 0.1 && rep.delta > 0.0);
        assert!(weak_comparison_shift_test(&u, &u, &data, &d, 0.0, (0.2, 0.8), 6).is_err());
    }

    #[test]
    fn moduli_of_linear_flow() {
        let d = disc(0.05);
        let cfg = SolverConfig { h: 0.05, snapshot_every: 0.05, ..Default::default() };
        let tr = solve_on(&linear_flow(), &d, &cfg).unwrap();
        let t = holder_modulus(&tr, Direction::Time, 1.0, 7).unwrap();
        assert!((t.exponent - 1.0).abs() < 0.05, "{t:?}");
        let s = holder_modulus(&tr, Direction::Space, 1.0, 7).unwrap();
        let lx: Vec<f64> = s.samples.iter().map(|p| ln(p.0)).collect();
        let ly: Vec<f64> = s.samples.iter().map(|p| ln(2.0 * p.0 - p.0 * p.0)).collect();
        let oracle = linear_fit(&lx, &ly).0;
        assert!((s.exponent - oracle).abs() < 0.08, "{s:?} vs {oracle}");
        assert_eq!(s, holder_modulus(&tr, Direction::Space, 1.0, 7).unwrap());
    }

    #[test]
    fn seam_before_start_is_rejected() {
        let d = disc(0.1);
        let cfg = SolverConfig { h: 0.1, ..Default::default() };
        assert!(removability_test(&linear_flow(), &d, &cfg, 1.0).is_err());
        let rep = removability_test(&linear_flow(), &d, &cfg, 0.5).unwrap();
        assert!(rep.passed, "{rep:?}");
    }
}
