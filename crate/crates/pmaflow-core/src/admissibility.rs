//! Admissibility witnesses: functions squeezed between `u₀` and `u₀ + ε`
//! whose Monge-Ampère mass is dominated by `e^C f₀`.

use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::barriers::{maximal_extension, unit_defining_function};
use crate::domain::Point;
use crate::elliptic::{perron_fixed_band, EllipticConfig, EllipticProblem};
use crate::error::{Error, Result};
use crate::grid::{Discretization, GridFunction};
use crate::math::{exp, ln};
use crate::problem::SpaceFn;
use crate::tol;

#[derive(Debug, Clone)]
pub struct AdmissibilityWitness {
    pub eps: f64,
    pub u: GridFunction,
    /// Log of the density domination constant.
    pub c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WitnessCheck {
    /// `max (u₀ − u)`.
    pub below: f64,
    /// `max (u − u₀ − ε)`.
    pub above: f64,
    /// `max (MA_h u − e^C f₀)` over interior nodes.
    pub density_excess: f64,
}

impl WitnessCheck {
    pub fn passed(&self, bracket_tol: f64, density_tol: f64) -> bool {
        self.below <= bracket_tol && self.above <= bracket_tol && self.density_excess <= density_tol
    }
}

impl AdmissibilityWitness {
    /// Re-evaluates both invariants from scratch.
    pub fn verify(&self, u0: &GridFunction, f0: impl Fn(&Point) -> f64, disc: &Discretization) -> WitnessCheck {
        let g = &disc.grid;
        let mut chk =
            WitnessCheck { below: f64::NEG_INFINITY, above: f64::NEG_INFINITY, density_excess: f64::NEG_INFINITY };
        for &i in g.active() {
            let (a, w) = (u0.get(i), self.u.get(i));
            chk.below = chk.below.max(a - w);
            chk.above = chk.above.max(w - a - self.eps);
        }
        let cap = exp(self.c);
        for &i in g.interior() {
            let ma = disc.op.apply_at(self.u.values(), i);
            chk.density_excess = chk.density_excess.max(ma - cap * f0(&g.coords(i)));
        }
        chk
    }

    pub fn is_valid(&self, u0: &GridFunction, f0: impl Fn(&Point) -> f64, disc: &Discretization) -> bool {
        self.verify(u0, f0, disc).passed(1e-9, tol::adm(disc.h()))
    }
}

/// `Σ max(MA_h u₀, 0)·h^{2n}` over interior nodes with `g ≤ τ`.
pub fn zero_set_mass(u0: &GridFunction, g: impl Fn(&Point) -> f64, tau: f64, disc: &Discretization) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::invalid("zero-set threshold must be positive"));
    }
    let grid = &disc.grid;
    let vol = grid.cell_volume();
    let mut mass = 0.0;
    for &i in grid.interior() {
        if g(&grid.coords(i)) <= tau {
            mass += disc.op.apply_at(u0.values(), i).max(0.0) * vol;
        }
    }
    Ok(mass)
}

/// `max g · 10⁻⁶` plus a machine-scale floor.
pub fn default_threshold(g: impl Fn(&Point) -> f64, disc: &Discretization) -> f64 {
    let grid = &disc.grid;
    let top = grid.interior().iter().map(|&i| g(&grid.coords(i))).fold(0.0, f64::max);
    top * 1e-6 + 1e-14
}

/// Returns `u₀` itself when its mass is dominated by some finite `e^C f₀`.
/// Otherwise solves the Dirichlet problem with the masked density
/// `min(MA_h u₀, e^C f₀)` for doubling `C` and accepts the first solution
/// below `u₀ + ε`.
pub fn find_witness(
    u0: &GridFunction,
    f0: impl Fn(&Point) -> f64,
    eps: f64,
    disc: &Discretization,
) -> Result<AdmissibilityWitness> {
    if !(eps > 0.0) {
        return Err(Error::invalid("witness tolerance ε must be positive"));
    }
    let grid = &disc.grid;
    let tol_adm = tol::adm(disc.h());
    let ma: Vec<f64> = grid.interior().iter().map(|&i| disc.op.apply_at(u0.values(), i)).collect();
    let dens: Vec<f64> = grid.interior().iter().map(|&i| f0(&grid.coords(i))).collect();
    if ma.iter().any(|m| !m.is_finite()) || dens.iter().any(|d| !d.is_finite()) {
        return Err(Error::UnboundedData("witness search input".into()));
    }
    let mut c0: f64 = 0.0;
    for (&m, &d) in ma.iter().zip(&dens) {
        if m > tol_adm {
            c0 = if d > 0.0 { c0.max(ln(m / d)) } else { f64::INFINITY };
        }
    }
    if c0.is_finite() {
        return Ok(AdmissibilityWitness { eps, u: u0.clone(), c: c0 });
    }

    let mut mass_grid = u0.map(|_, _| 0.0);
    for (k, &i) in grid.interior().iter().enumerate() {
        mass_grid.set(i, ma[k].max(0.0));
    }
    let ecfg = EllipticConfig::default();
    let mut c = 1.0;
    let mut last_mass = 0.0;
    while c <= tol::WITNESS_C_CAP {
        let cap = exp(c);
        let mut masked = mass_grid.clone();
        for (k, &i) in grid.interior().iter().enumerate() {
            masked.set(i, ma[k].max(0.0).min(cap * dens[k].max(0.0)));
        }
        let lookup = Arc::new(masked);
        let g2 = grid.clone();
        let l2 = lookup.clone();
        let prob = EllipticProblem::new(
            "masked",
            |_| 0.0,
            move |x| g2.nearest_node(x).map(|i| l2.get(i)).unwrap_or(0.0),
            |_, _| 0.0,
        );
        let sol = perron_fixed_band(&prob, disc, &ecfg, u0.clone())?;
        let w = AdmissibilityWitness { eps, u: sol.u, c };
        let chk = w.verify(u0, &f0, disc);
        if chk.passed(1e-9, tol_adm) {
            return Ok(w);
        }
        last_mass = grid
            .interior()
            .iter()
            .enumerate()
            .map(|(k, _)| (ma[k].max(0.0) - lookup.get(grid.interior()[k])) * grid.cell_volume())
            .sum();
        c *= 2.0;
    }
    Err(Error::NoWitnessFound { residual_mass: last_mass, c_tried: c / 2.0 })
}

/// Tries each candidate `φ_m` with `u₀ ≤ φ_m ≤ u₀ + ε/2` and returns the
/// first whose own witness at `ε/2` exists, with its index.
pub fn find_witness_from_family(
    u0: &GridFunction,
    candidates: &[GridFunction],
    f0: impl Fn(&Point) -> f64,
    eps: f64,
    disc: &Discretization,
) -> Result<(usize, AdmissibilityWitness)> {
    if !(eps > 0.0) {
        return Err(Error::invalid("witness tolerance ε must be positive"));
    }
    let mut last = Error::NoWitnessFound { residual_mass: 0.0, c_tried: 0.0 };
    for (k, cand) in candidates.iter().enumerate() {
        let lo = u0.max_excess_on(cand, disc.grid.active().iter().copied());
        let hi = cand.max_excess_on(&u0.map(|_, v| v + eps / 2.0), disc.grid.active().iter().copied());
        if lo > 1e-12 || hi > 1e-12 {
            continue;
        }
        match find_witness(cand, &f0, eps / 2.0, disc) {
            Ok(w) => return Ok((k, AdmissibilityWitness { eps, u: w.u, c: w.c })),
            Err(e @ Error::NoWitnessFound { .. }) => last = e,
            Err(e) => return Err(e),
        }
    }
    Err(last)
}

/// A witness valid on the ball `B(centre, 2·radius)`.
#[derive(Debug, Clone)]
pub struct LocalWitness {
    pub centre: Point,
    pub radius: f64,
    pub u: GridFunction,
    pub c: f64,
}

/// Boundary-collar completion: the maximal extension of `boundary` minus
/// `ε ρ / radius`.
#[derive(Clone)]
pub struct Collar {
    pub boundary: SpaceFn,
    pub radius: f64,
}

#[derive(Debug, Clone)]
pub struct GluedWitness {
    /// `min_k (u_k + ε|z − p_k|²/r_k²) − ε|z|²/min r_k²` before any shift.
    pub raw: GridFunction,
    /// `ε (1 + max|z|²/min r_k²)`.
    pub eps_prime: f64,
    /// `raw` lifted by `ε max|z|²/min r_k²` so that it lies above `u₀`.
    pub witness: AdmissibilityWitness,
}

pub fn glue_local_witnesses(
    locals: &[LocalWitness],
    u0: &GridFunction,
    eps: f64,
    disc: &Discretization,
    collar: Option<&Collar>,
) -> Result<GluedWitness> {
    if !(eps > 0.0) {
        return Err(Error::invalid("witness tolerance ε must be positive"));
    }
    let grid = &disc.grid;
    if locals.is_empty() {
        return Err(Error::CoverIncomplete { uncovered: grid.interior().len() });
    }
    if locals.iter().any(|l| !(l.radius > 0.0)) {
        return Err(Error::invalid("local witness radii must be positive"));
    }
    let r_min = locals.iter().map(|l| l.radius).fold(f64::INFINITY, f64::min);
    let r2_min = r_min * r_min;
    let reach = grid.active().iter().map(|&i| dist2(&grid.coords(i), &[0.0; 4])).fold(0.0, f64::max) / r2_min;
    let collar_vals = match collar {
        Some(c) => {
            if !(c.radius > 0.0) {
                return Err(Error::invalid("collar radius must be positive"));
            }
            let b = c.boundary.clone();
            let tilde = maximal_extension(move |x| b(x), disc)?;
            let rho = unit_defining_function(disc)?;
            Some(tilde.zip(&rho, |m, r| m - eps * r / c.radius))
        }
        None => None,
    };
    let mut raw = u0.clone();
    let mut uncovered = 0;
    for &i in grid.active() {
        let z = grid.coords(i);
        let mut best = f64::INFINITY;
        for l in locals {
            let d2 = dist2(&z, &l.centre);
            if d2 < 4.0 * l.radius * l.radius {
                best = best.min(l.u.get(i) + eps * d2 / (l.radius * l.radius));
            }
        }
        if best.is_finite() {
            best -= eps * dist2(&z, &[0.0; 4]) / r2_min;
        }
        if let Some(cv) = &collar_vals {
            best = best.min(cv.get(i) - eps * reach);
        }
        if best.is_finite() {
            raw.set(i, best);
        } else if grid.class(i) == crate::grid::NodeClass::Interior {
            uncovered += 1;
        }
    }
    if uncovered > 0 {
        return Err(Error::CoverIncomplete { uncovered });
    }
    let c = locals.iter().map(|l| l.c).fold(0.0, f64::max);
    let lift = eps * reach;
    let witness = AdmissibilityWitness { eps: eps * (2.0 + reach), u: raw.map(|_, v| v + lift), c };
    Ok(GluedWitness { raw, eps_prime: eps * (1.0 + reach), witness })
}

fn dist2(a: &Point, b: &Point) -> f64 {
    (0..4).map(|k| (a[k] - b[k]) * (a[k] - b[k])).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{log_capped, log_capped_member, sq};
    use crate::domain::DomainSpec;

    fn disc(n: usize, h: f64) -> Discretization {
        Discretization::with_defaults(DomainSpec::ball(n, 1.0).unwrap(), h).unwrap()
    }

    #[test]
    fn zero_set_mass_of_square_is_disc_area() {
        let d = disc(1, 0.025);
        let u0 = d.sample(sq);
        let tau = 1e-3;
        let m = zero_set_mass(&u0, |x| (sq(x) - 0.5).max(0.0), tau, &d).unwrap();
        let area = core::f64::consts::PI * (0.5 + tau);
        assert!((m - area).abs() < 0.05 * area, "{m} vs {area}");
        assert_eq!(zero_set_mass(&u0, |_| 1.0, tau, &d).unwrap(), 0.0);
        let harmonic = d.sample(|x| x[0] - 2.0 * x[1]);
        assert!(zero_set_mass(&harmonic, |_| 0.0, tau, &d).unwrap() < 1e-9);
    }

    #[test]
    fn positive_density_gives_initial_data() {
        let d = disc(1, 0.1);
        let u0 = d.sample(|x| 2.0 * sq(x));
        let w = find_witness(&u0, |_| 0.5, 0.1, &d).unwrap();
        assert!((w.c - ln(2.0 / 0.5)).abs() < 1e-9);
        assert_eq!(w.u.sup_distance(&u0), 0.0);
        assert!(w.is_valid(&u0, |_| 0.5, &d));
    }

    #[test]
    fn maximal_data_has_zero_constant() {
        let d = disc(1, 0.1);
        let u0 = d.sample(|x| x[0]);
        let w = find_witness(&u0, |_| 0.0, 0.1, &d).unwrap();
        assert_eq!(w.c, 0.0);
    }

    #[test]
    fn shifted_family_admits_log_capped_data() {
        let (dom, data) = log_capped();
        let d = Discretization::with_defaults(dom, 0.05).unwrap();
        let u0 = d.sample(|x| data.u0(x));
        let fam: Vec<GridFunction> = [4.0, 10.0, 40.0].iter().map(|&m| d.sample(log_capped_member(m))).collect();
        let (k, w) = find_witness_from_family(&u0, &fam, |x| data.f(0.0, x), 0.5, &d).unwrap();
        assert!(k >= 1);
        assert!(w.is_valid(&u0, |x| data.f(0.0, x), &d));
    }

    #[test]
    fn gluing_identical_witnesses() {
        let d = disc(1, 0.05);
        let u0 = d.sample(|x| sq(x) - 1.0);
        let locals: Vec<LocalWitness> = [-0.5, 0.5]
            .iter()
            .map(|&c| LocalWitness { centre: [c, 0.0, 0.0, 0.0], radius: 0.6, u: u0.clone(), c: 0.0 })
            .collect();
        let eps = 0.01;
        let out = glue_local_witnesses(&locals, &u0, eps, &d, None).unwrap();
        let low = u0.max_excess_on(&out.raw.map(|_, v| v + out.eps_prime), d.grid.active().iter().copied());
        let high = out.raw.max_excess_on(&u0.map(|_, v| v + out.eps_prime), d.grid.active().iter().copied());
        assert!(low <= 1e-12 && high <= 1e-12);
        assert!(out.witness.is_valid(&u0, |_| 1.0, &d));
        assert!(matches!(glue_local_witnesses(&[], &u0, eps, &d, None), Err(Error::CoverIncomplete { .. })));
    }

    #[test]
    fn single_ball_glue_matches_formula() {
        let d = disc(1, 0.1);
        let u0 = d.sample(sq);
        let l = LocalWitness { centre: [0.0; 4], radius: 1.0, u: u0.clone(), c: 0.0 };
        let out = glue_local_witnesses(&[l], &u0, 0.2, &d, None).unwrap();
        assert!(out.raw.sup_distance(&u0) < 1e-12);
    }
}
