//! Test problems with known behaviour, shared by the tests, the CLI and the
//! acceptance run.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::domain::{DomainSpec, Point};
use crate::elliptic::EllipticProblem;
use crate::field::FnField;
use crate::math::{exp, ln, sqrt};
use crate::problem::ProblemData;

/// `|z|²`.
#[inline]
pub fn sq(x: &Point) -> f64 {
    x[0] * x[0] + x[1] * x[1] + x[2] * x[2] + x[3] * x[3]
}

/// A named domain with data on it.
#[derive(Clone, Debug)]
pub struct Case {
    pub name: String,
    pub domain: DomainSpec,
    pub data: ProblemData,
}

impl Case {
    fn new(name: &str, domain: DomainSpec, data: ProblemData) -> Self {
        Self { name: name.into(), domain, data }
    }
}

/// `u = |z|² + t`: `f = e^{−1}`, `F = 0`, `φ = 1 + t`, `T = 1`.
pub fn linear_flow() -> ProblemData {
    let f = exp(-1.0);
    ProblemData::new("linear", sq, |t, _| 1.0 + t, move |_, _| f, |_, _, _| 0.0, 1.0)
}

pub fn linear_flow_exact() -> FnField {
    FnField::with_rate(|t, x| sq(x) + t, |_, _| 1.0)
}

/// `u = |z|²` for all time: `f = 1`, `φ = 1`.
pub fn stationary() -> ProblemData {
    ProblemData::new("stationary", sq, |_, _| 1.0, |_, _| 1.0, |_, _, _| 0.0, 1.0)
}

/// `u = (1 + e^{−t})(|z|² − 1) + 1` on the unit ball, converging to `|z|²`.
pub fn decaying(n: usize, horizon: f64) -> ProblemData {
    let nf = n as f64;
    ProblemData::new(
        "decaying",
        |x| 2.0 * (sq(x) - 1.0) + 1.0,
        |_, _| 1.0,
        move |t, x| {
            let e = exp(-t);
            exp(nf * ln(1.0 + e)) * exp(e * (sq(x) - 1.0))
        },
        |_, _, _| 0.0,
        horizon,
    )
}

pub fn decaying_exact() -> FnField {
    FnField::with_rate(|t, x| (1.0 + exp(-t)) * (sq(x) - 1.0) + 1.0, |t, x| -exp(-t) * (sq(x) - 1.0))
}

/// Limit data of [`decaying`]: `f = 1`, `φ = 1`.
pub fn radial_limit() -> EllipticProblem {
    EllipticProblem::new("radial", |_| 1.0, |_| 1.0, |_, _| 0.0)
}

/// Degenerate density `f = t`, `u₀ = |z|² − 1`, `φ = 0`.
pub fn vanishing_density(horizon: f64) -> ProblemData {
    ProblemData::new("vanishing", |x| sq(x) - 1.0, |_, _| 0.0, |t, _| t, |_, _, _| 0.0, horizon)
}

/// `min{0, u₀ − t log t + e^T t}` with its exact rate.
pub fn vanishing_density_super(horizon: f64) -> FnField {
    let et = exp(horizon);
    let w = move |t: f64, x: &Point| sq(x) - 1.0 - xlogx(t) + et * t;
    FnField::with_rate(move |t, x| w(t, x).min(0.0), move |t, x| if w(t, x) < 0.0 { et - 1.0 - ln(t) } else { 0.0 })
}

fn xlogx(t: f64) -> f64 {
    if t > 0.0 {
        t * ln(t)
    } else {
        0.0
    }
}

/// Hölder data on the unit disc: `u₀ = |z|^{1/2}` and a boundary ramp
/// `φ = 1 + ((1/2 − t)₊)^{1/2} − (1/2)^{1/2}` that freezes at `t = 1/2`.
pub fn holder_ramp() -> ProblemData {
    let c = sqrt(0.5);
    ProblemData::new(
        "holder",
        |x| sqrt(sqrt(sq(x))),
        move |t, _| 1.0 + sqrt((0.5 - t).max(0.0)) - c,
        |_, _| 1.0,
        |_, _, _| 0.0,
        1.0,
    )
}

/// Time-independent problems used by the Lipschitz, seam and necessity checks.
pub fn time_independent(horizon: f64) -> Vec<Case> {
    let ball = DomainSpec::ball(1, 1.0).expect("unit disc");
    let ellipse = DomainSpec::ellipsoid(&[1.0, 2.0]).expect("ellipsoid");
    let e2 = ellipse.clone();
    vec![
        Case::new(
            "relaxation",
            ball.clone(),
            ProblemData::new("relaxation", |x| sq(x) - 1.0, |_, _| 0.0, |_, _| 2.0, |_, _, _| 0.0, horizon),
        ),
        Case::new(
            "reaction",
            ball,
            ProblemData::new("reaction", |x| 2.0 * sq(x) - 1.0, |_, _| 1.0, |_, x| exp(-sq(x)), |_, _, r| r, horizon),
        ),
        Case::new(
            "ellipsoid",
            ellipse,
            ProblemData::new("ellipsoid", move |x| e2.rho(x), |_, _| 0.0, |_, _| 1.0, |_, _, _| 0.0, horizon),
        ),
    ]
}

/// Initial data and `t = 0` densities with no Monge-Ampère mass on `{g = 0}`.
pub fn zero_mass_pairs() -> Vec<(String, DomainSpec, ProblemData)> {
    let d1 = DomainSpec::ball(1, 1.0).expect("unit disc");
    let d2 = DomainSpec::ball(2, 1.0).expect("unit ball");
    let mk = |name: &str, u0: fn(&Point) -> f64, g: fn(f64, &Point) -> f64| {
        ProblemData::new(name, u0, move |_, x| u0(x), g, |_, _, _| 0.0, 1.0)
    };
    vec![
        ("square-positive".into(), d1.clone(), mk("square-positive", sq, |_, _| 1.0)),
        ("shifted-growing".into(), d1.clone(), mk("shifted-growing", |x| sq(x) - 1.0, |_, x| 1.0 + sq(x))),
        ("harmonic-annulus".into(), d1, mk("harmonic-annulus", |x| x[0], |_, x| (sq(x) - 0.5).max(0.0))),
        (
            "partial-square".into(),
            d2,
            mk("partial-square", |x| x[0] * x[0] + x[1] * x[1], |_, x| (sq(x) - 0.5).max(0.0)),
        ),
    ]
}

/// `log max{|z|², 1/2}` and `g = max{|z|² − 1/2, 0}`, admissible only
/// through a shifted family.
pub fn log_capped() -> (DomainSpec, ProblemData) {
    let dom = DomainSpec::ball(1, 1.0).expect("unit disc");
    let u0 = |x: &Point| ln(sq(x).max(0.5));
    let data = ProblemData::new("log-capped", u0, move |_, x| u0(x), |_, x| (sq(x) - 0.5).max(0.0), |_, _, _| 0.0, 1.0);
    (dom, data)
}

/// `log max{|z|², 1/2 + 1/m}`.
pub fn log_capped_member(m: f64) -> impl Fn(&Point) -> f64 + Clone + Send + Sync + 'static {
    move |x: &Point| ln(sq(x).max(0.5 + 1.0 / m))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decaying_family_solves_the_flow() {
        let data = decaying(2, 8.0);
        let exact = decaying_exact();
        let x = [0.3, -0.2, 0.1, 0.4];
        for t in [0.0, 0.5, 3.0] {
            let u = exact.eval(t, &x);
            let a = 1.0 + exp(-t);
            let ma = a * a;
            let rate = (exact.eval(t + 1e-7, &x) - exact.eval(t - 1e-7, &x)) / 2e-7;
            assert!((ln(ma / data.f(t, &x)) - rate).abs() < 1e-6);
            assert!((u - ((1.0 + exp(-t)) * (sq(&x) - 1.0) + 1.0)).abs() < 1e-15);
        }
        assert_eq!(data.u0(&x), exact.eval(0.0, &x));
    }

    #[test]
    fn ramp_is_compatible() {
        let d = holder_ramp();
        let x = [1.0, 0.0, 0.0, 0.0];
        assert!((d.u0(&x) - d.phi(0.0, &x)).abs() < 1e-15);
        assert_eq!(d.phi(0.7, &x), d.phi(0.5, &x));
    }
}
