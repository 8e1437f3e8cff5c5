//! A priori bounds, ε-sub/superbarriers and their time extensions.
//!
//! Barriers are grid-bound space-time fields. Every field reports its exact
//! time derivative, so the sub/supersolution sweeps never difference across
//! the kink of a `max` or `min`.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::admissibility::AdmissibilityWitness;
use crate::domain::Point;
use crate::elliptic::{perron_envelope, solve_stationary, EllipticConfig, EllipticProblem};
use crate::error::{Error, Result, Role};
use crate::field::{sweep, SpaceTimeField};
use crate::grid::{BandNode, Discretization, GridFunction, SpaceGrid};
use crate::math::{abs, exp, powf};
use crate::problem::{sample_times, ProblemData};
use crate::tol;

/// `a·ρ` with `MA_h(a·ρ) ≥ target` at every interior node, and `a`.
pub fn scaled_defining_function(disc: &Discretization, target: f64) -> Result<(GridFunction, f64)> {
    let rho = disc.sample(|x| disc.domain.rho(x));
    if !(target > 0.0) {
        return Ok((rho.map(|_, _| 0.0), 0.0));
    }
    let min_ma = disc.grid.interior().iter().map(|&i| disc.op.apply_at(rho.values(), i)).fold(f64::INFINITY, f64::min);
    if !(min_ma > 0.0) {
        return Err(Error::NotStronglyPseudoconvex { point: [0.0; 4], eigenvalue: min_ma });
    }
    let a = powf(target / min_ma, 1.0 / disc.dim() as f64);
    Ok((rho.map(|_, r| a * r), a))
}

/// `ρ / λ` with `λ` the smallest discrete directional Hessian of `ρ`.
pub fn unit_defining_function(disc: &Discretization) -> Result<GridFunction> {
    let rho = disc.sample(|x| disc.domain.rho(x));
    let lam =
        disc.grid.interior().iter().map(|&i| disc.op.min_directional(rho.values(), i)).fold(f64::INFINITY, f64::min);
    if !(lam > 0.0) {
        return Err(Error::NotStronglyPseudoconvex { point: [0.0; 4], eigenvalue: lam });
    }
    Ok(rho.map(|_, r| r / lam))
}

fn check_finite(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::UnboundedData(what.into()))
    }
}

/// Time samples `k·T/count`, `k < count`, over the window of `data`.
fn check_times(data: &ProblemData, count: usize) -> Vec<f64> {
    let w = data.time_window();
    (0..count).map(|k| w * k as f64 / count as f64).collect()
}

#[derive(Debug, Clone)]
pub struct LinftyBounds {
    /// `m + M·ρ_s`.
    pub lower: GridFunction,
    /// `sup φ`.
    pub upper: f64,
    pub m: f64,
    pub big_m: f64,
    /// Factor `a` with `ρ_s = a·ρ`.
    pub scale: f64,
}

impl LinftyBounds {
    /// `(max(lower − u), max(u − upper))` over non-exterior nodes.
    pub fn excess(&self, u: &GridFunction) -> (f64, f64) {
        let g = u.grid();
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &i in g.active() {
            lo = lo.max(self.lower.get(i) - u.get(i));
            hi = hi.max(u.get(i) - self.upper);
        }
        (lo, hi)
    }
}

/// `m + M·ρ_s ≤ u ≤ sup φ` with `m = min{−sup|φ|, min u₀}` and
/// `M = exp(sup F(t, z, max φ)/n)`.
pub fn linfty_bounds(data: &ProblemData, disc: &Discretization) -> Result<LinftyBounds> {
    let g = &disc.grid;
    let times = sample_times(data.time_window(), 16);
    let mut sup_abs_phi: f64 = 0.0;
    let mut max_phi = f64::NEG_INFINITY;
    for b in g.band() {
        for &t in &times {
            for p in [&b.foot, &b.anchor_foot] {
                let v = check_finite(data.phi(t, p), "boundary data")?;
                sup_abs_phi = sup_abs_phi.max(abs(v));
                max_phi = max_phi.max(v);
            }
        }
    }
    let mut min_u0 = f64::INFINITY;
    let mut sup_f: f64 = 0.0;
    let mut sup_big_f = f64::NEG_INFINITY;
    for &i in g.active() {
        let x = g.coords(i);
        min_u0 = min_u0.min(check_finite(data.u0(&x), "initial data")?);
        for &t in &times {
            sup_f = sup_f.max(check_finite(data.f(t, &x), "density")?);
            sup_big_f = sup_big_f.max(check_finite(data.big_f(t, &x, max_phi), "nonlinearity")?);
        }
    }
    let m = (-sup_abs_phi).min(min_u0);
    let big_m = exp(sup_big_f / disc.dim() as f64);
    let (rho_s, scale) = scaled_defining_function(disc, sup_f)?;
    let lower = rho_s.map(|_, r| m + big_m * r);
    Ok(LinftyBounds { lower, upper: max_phi, m, big_m, scale })
}

/// `base + slope·t`.
#[derive(Clone)]
pub struct AffineField {
    pub base: GridFunction,
    pub slope: f64,
}

impl SpaceTimeField for AffineField {
    fn sample(&self, _disc: &Discretization, t: f64) -> Result<GridFunction> {
        Ok(self.base.map(|_, v| v + self.slope * t).with_time(t))
    }

    fn rate(&self, _disc: &Discretization, _t: f64) -> Result<GridFunction> {
        Ok(self.base.map(|_, _| self.slope))
    }
}

/// Piecewise-linear interpolation of grid functions in time, constant past
/// the last node.
#[derive(Clone)]
pub struct InterpField {
    pub times: Vec<f64>,
    pub values: Vec<GridFunction>,
}

impl InterpField {
    fn locate(&self, t: f64) -> (usize, f64) {
        let ts = &self.times;
        if ts.len() == 1 || t <= ts[0] {
            return (0, 0.0);
        }
        if t >= ts[ts.len() - 1] {
            return (ts.len() - 1, 0.0);
        }
        let k = ts.partition_point(|s| *s <= t) - 1;
        (k, (t - ts[k]) / (ts[k + 1] - ts[k]))
    }
}

impl SpaceTimeField for InterpField {
    fn sample(&self, _disc: &Discretization, t: f64) -> Result<GridFunction> {
        let (k, w) = self.locate(t);
        if w == 0.0 {
            return Ok(self.values[k].clone().with_time(t));
        }
        Ok(self.values[k].zip(&self.values[k + 1], |a, b| (1.0 - w) * a + w * b).with_time(t))
    }

    fn rate(&self, _disc: &Discretization, t: f64) -> Result<GridFunction> {
        let (k, _) = self.locate(t);
        if k + 1 >= self.times.len() {
            return Ok(self.values[k].map(|_, _| 0.0));
        }
        let dt = self.times[k + 1] - self.times[k];
        Ok(self.values[k + 1].zip(&self.values[k], |a, b| (a - b) / dt))
    }
}

/// Pointwise `max` (sub) or `min` (super) of two fields; the rate is that of
/// the active branch.
#[derive(Clone)]
pub struct Envelope {
    pub role: Role,
    pub a: Arc<dyn SpaceTimeField>,
    pub b: Arc<dyn SpaceTimeField>,
}

impl Envelope {
    fn both(&self, disc: &Discretization, t: f64) -> Result<(GridFunction, GridFunction)> {
        let va = self.a.sample(disc, t)?;
        let vb = self.b.sample(disc, t)?;
        let ra = self.a.rate(disc, t)?;
        let rb = self.b.rate(disc, t)?;
        let mut v = va.clone();
        let mut r = ra.clone();
        for &i in va.grid().active() {
            let take_b = match self.role {
                Role::Sub => vb.get(i) > va.get(i),
                Role::Super => vb.get(i) < va.get(i),
            };
            if take_b {
                v.set(i, vb.get(i));
                r.set(i, rb.get(i));
            }
        }
        Ok((v.with_time(t), r))
    }
}

impl SpaceTimeField for Envelope {
    fn sample(&self, disc: &Discretization, t: f64) -> Result<GridFunction> {
        Ok(self.both(disc, t)?.0)
    }

    fn rate(&self, disc: &Discretization, t: f64) -> Result<GridFunction> {
        Ok(self.both(disc, t)?.1)
    }
}

/// `h(t) = C·(t − ε)₊`.
fn ramp(c: f64, eps: f64, t: f64) -> (f64, f64) {
    if t < eps {
        (0.0, 0.0)
    } else {
        (c * (t - eps), c)
    }
}

/// Subsolution on `[0, ε₀)` continued to all times: `max{u − h(t), m + ρ}`
/// before `ε₀`, `m + ρ` after.
#[derive(Clone)]
pub struct ExtendedSub {
    pub inner: Arc<dyn SpaceTimeField>,
    pub eps0: f64,
    pub eps: f64,
    pub c: f64,
    pub m: f64,
    pub rho: GridFunction,
}

impl ExtendedSub {
    fn eval(&self, disc: &Discretization, t: f64) -> Result<(GridFunction, GridFunction)> {
        let floor = self.rho.map(|_, r| self.m + r);
        if t >= self.eps0 {
            return Ok((floor.with_time(t), self.rho.map(|_, _| 0.0)));
        }
        let (hv, hr) = ramp(self.c, self.eps, t);
        let v = self.inner.sample(disc, t)?;
        let r = self.inner.rate(disc, t)?;
        let mut out = v.clone();
        let mut rate = r.clone();
        for &i in v.grid().active() {
            let a = v.get(i) - hv;
            if a >= floor.get(i) {
                out.set(i, a);
                rate.set(i, r.get(i) - hr);
            } else {
                out.set(i, floor.get(i));
                rate.set(i, 0.0);
            }
        }
        Ok((out.with_time(t), rate))
    }
}

impl SpaceTimeField for ExtendedSub {
    fn sample(&self, disc: &Discretization, t: f64) -> Result<GridFunction> {
        Ok(self.eval(disc, t)?.0)
    }

    fn rate(&self, disc: &Discretization, t: f64) -> Result<GridFunction> {
        Ok(self.eval(disc, t)?.1)
    }
}

/// Supersolution on `[0, ε₀)` continued to all times: `min{v + h(t), M}`
/// before `ε₀`, `M` after.
#[derive(Clone)]
pub struct ExtendedSuper {
    pub inner: Arc<dyn SpaceTimeField>,
    pub eps0: f64,
    pub eps: f64,
    pub c: f64,
    pub big_m: f64,
}

impl ExtendedSuper {
    fn eval(&self, disc: &Discretization, t: f64) -> Result<(GridFunction, GridFunction)> {
        if t >= self.eps0 {
            let top = disc.sample(|_| self.big_m).with_time(t);
            let zero = top.map(|_, _| 0.0);
            return Ok((top, zero));
        }
        let (hv, hr) = ramp(self.c, self.eps, t);
        let v = self.inner.sample(disc, t)?;
        let r = self.inner.rate(disc, t)?;
        let mut out = v.clone();
        let mut rate = r.clone();
        for &i in v.grid().active() {
            let a = v.get(i) + hv;
            if a <= self.big_m {
                out.set(i, a);
                rate.set(i, r.get(i) + hr);
            } else {
                out.set(i, self.big_m);
                rate.set(i, 0.0);
            }
        }
        Ok((out.with_time(t), rate))
    }
}

impl SpaceTimeField for ExtendedSuper {
    fn sample(&self, disc: &Discretization, t: f64) -> Result<GridFunction> {
        Ok(self.eval(disc, t)?.0)
    }

    fn rate(&self, disc: &Discretization, t: f64) -> Result<GridFunction> {
        Ok(self.eval(disc, t)?.1)
    }
}

/// `(inf, sup)` of a field over `[0, ε₀)` at 16 sample times.
fn field_range(field: &dyn SpaceTimeField, disc: &Discretization, eps0: f64) -> Result<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for k in 0..=16 {
        let t = eps0 * k as f64 / 16.0 * (1.0 - 1e-9);
        let v = field.sample(disc, t)?;
        lo = lo.min(v.min());
        hi = hi.max(v.max());
    }
    Ok((lo, hi))
}

fn boundary_extremes(data: &ProblemData, disc: &Discretization) -> Result<(f64, f64)> {
    let times = sample_times(data.time_window(), 16);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for b in disc.grid.band() {
        for &t in &times {
            let v = check_finite(data.phi(t, &b.foot), "boundary data")?;
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    Ok((lo, hi))
}

/// Continues a subsolution given on `[0, ε₀)` to the whole horizon; it is
/// unchanged on `[0, ε)`.
pub fn extend_sub(
    inner: Arc<dyn SpaceTimeField>,
    data: &ProblemData,
    disc: &Discretization,
    eps0: f64,
    eps: f64,
) -> Result<Arc<dyn SpaceTimeField>> {
    if !(eps > 0.0 && eps < eps0) {
        return Err(Error::invalid("extension needs 0 < ε < ε₀"));
    }
    if eps0 >= data.horizon {
        return Ok(inner);
    }
    let (lo, hi) = field_range(inner.as_ref(), disc, eps0)?;
    let (phi_lo, _) = boundary_extremes(data, disc)?;
    let m = lo.min(phi_lo);
    let g = &disc.grid;
    let times = sample_times(data.time_window(), 16);
    let mut m_big_f = f64::NEG_INFINITY;
    let mut m_f: f64 = 0.0;
    for &i in g.active() {
        let x = g.coords(i);
        for &t in &times {
            m_big_f = m_big_f.max(data.big_f(t, &x, m));
            m_f = m_f.max(data.f(t, &x));
        }
    }
    let (rho, _) = scaled_defining_function(disc, exp(m_big_f) * m_f)?;
    let c = 1.0 + (hi - m + (-rho.min()).max(0.0)) / (eps0 - eps);
    Ok(Arc::new(ExtendedSub { inner, eps0, eps, c, m, rho }))
}

/// Continues a supersolution given on `[0, ε₀)` to the whole horizon; it is
/// unchanged on `[0, ε)`.
pub fn extend_super(
    inner: Arc<dyn SpaceTimeField>,
    data: &ProblemData,
    disc: &Discretization,
    eps0: f64,
    eps: f64,
) -> Result<Arc<dyn SpaceTimeField>> {
    if !(eps > 0.0 && eps < eps0) {
        return Err(Error::invalid("extension needs 0 < ε < ε₀"));
    }
    if eps0 >= data.horizon {
        return Ok(inner);
    }
    let (lo, hi) = field_range(inner.as_ref(), disc, eps0)?;
    let (_, phi_hi) = boundary_extremes(data, disc)?;
    let big_m = hi.max(phi_hi);
    let c = 1.0 + (big_m - lo) / (eps0 - eps);
    Ok(Arc::new(ExtendedSuper { inner, eps0, eps, c, big_m }))
}

/// Maximal discrete psh function with boundary data `ψ` (Perron with `f = 0`).
pub fn maximal_extension(
    psi: impl Fn(&Point) -> f64 + Send + Sync + 'static,
    disc: &Discretization,
) -> Result<GridFunction> {
    let prob = EllipticProblem::new("maximal", psi, |_| 0.0, |_, _| 0.0);
    Ok(perron_envelope(&prob, disc, &EllipticConfig::default())?.u)
}

/// Symmetric time mollification of `φ` at a boundary point.
#[derive(Debug, Clone, Copy)]
struct Mollifier {
    bandwidth: f64,
}

const KERNEL: usize = 9;

impl Mollifier {
    fn apply(&self, data: &ProblemData, t: f64, p: &Point) -> f64 {
        if self.bandwidth == 0.0 {
            return data.phi(t, p);
        }
        let mut num = 0.0;
        let mut den = 0.0;
        for k in 0..KERNEL {
            let s = -1.0 + 2.0 * k as f64 / (KERNEL - 1) as f64;
            let w = 1.0 - s * s + 1e-3;
            num += w * data.phi((t + s * self.bandwidth).max(0.0), p);
            den += w;
        }
        num / den
    }

    fn rate(&self, data: &ProblemData, t: f64, p: &Point) -> f64 {
        let d = tol::TIME_PROBE;
        if t >= d {
            (self.apply(data, t + d, p) - self.apply(data, t - d, p)) / (2.0 * d)
        } else {
            (self.apply(data, t + d, p) - self.apply(data, t, p)) / d
        }
    }
}

/// Bandwidth with `sup|φ_moll − φ| ≤ tol` on the band feet, and
/// `(sup(φ_moll − φ), sup(φ − φ_moll))`.
fn fit_mollifier(data: &ProblemData, disc: &Discretization, tol_bracket: f64) -> Result<(Mollifier, f64, f64)> {
    let band = disc.grid.band();
    let stride = (band.len() / 2000).max(1);
    let feet: Vec<Point> = band.iter().step_by(stride).map(|b| b.foot).collect();
    let times = sample_times(data.time_window(), 64);
    let mut bw = data.time_window() / 4.0;
    for _ in 0..tol::HALVING_CAP {
        let m = Mollifier { bandwidth: bw };
        let mut above: f64 = 0.0;
        let mut below: f64 = 0.0;
        for p in &feet {
            for &t in &times {
                let d = m.apply(data, t, p) - data.phi(t, p);
                above = above.max(d);
                below = below.max(-d);
            }
        }
        if above <= tol_bracket && below <= tol_bracket {
            return Ok((m, above, below));
        }
        bw *= 0.5;
    }
    Err(Error::BarrierSearchFailed("no mollifier bandwidth meets the bracket".into()))
}

/// `φ_ε(t, π(x)) − ε/2 + M₂·ρ_b(x)` near the boundary, `−∞` elsewhere.
#[derive(Clone)]
struct BoundaryBranch {
    data: ProblemData,
    rho_b: GridFunction,
    near: Vec<(usize, Point)>,
    moll: Mollifier,
    shift: f64,
    eps: f64,
    m2: f64,
}

impl BoundaryBranch {
    fn eval(&self, t: f64) -> (GridFunction, GridFunction) {
        let mut v = self.rho_b.map(|_, _| f64::NEG_INFINITY);
        let mut r = self.rho_b.map(|_, _| 0.0);
        for (i, p) in &self.near {
            v.set(*i, self.moll.apply(&self.data, t, p) - self.shift - 0.5 * self.eps + self.m2 * self.rho_b.get(*i));
            r.set(*i, self.moll.rate(&self.data, t, p));
        }
        (v.with_time(t), r)
    }
}

impl SpaceTimeField for BoundaryBranch {
    fn sample(&self, _disc: &Discretization, t: f64) -> Result<GridFunction> {
        Ok(self.eval(t).0)
    }

    fn rate(&self, _disc: &Discretization, t: f64) -> Result<GridFunction> {
        Ok(self.eval(t).1)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BarrierConstants {
    pub m1: f64,
    pub m2: f64,
    /// `sup(−ρ_b)` for subbarriers.
    pub c: f64,
    /// Admissibility constant of the witness (superbarriers).
    pub c_eps: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub bandwidth: f64,
}

#[derive(Clone)]
pub struct Barrier {
    pub role: Role,
    pub eps: f64,
    pub constants: BarrierConstants,
    pub field: Arc<dyn SpaceTimeField>,
}

impl core::fmt::Debug for Barrier {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Barrier")
            .field("role", &self.role)
            .field("eps", &self.eps)
            .field("constants", &self.constants)
            .finish()
    }
}

impl SpaceTimeField for Barrier {
    fn sample(&self, disc: &Discretization, t: f64) -> Result<GridFunction> {
        self.field.sample(disc, t)
    }

    fn rate(&self, disc: &Discretization, t: f64) -> Result<GridFunction> {
        self.field.rate(disc, t)
    }
}

/// `max{u₀ + ε(ρ_b − c)/(2c) − M₁t, φ_ε − ε/2 + M₂ρ_b}` with `M₁`, `M₂`
/// doubled until the discrete subsolution test passes.
pub fn subbarrier(data: &ProblemData, disc: &Discretization, eps: f64) -> Result<Barrier> {
    if !(eps > 0.0) {
        return Err(Error::invalid("barrier gap ε must be positive"));
    }
    let g = &disc.grid;
    let rho_b = unit_defining_function(disc)?;
    let c = -rho_b.min();
    let u0 = disc.sample(|x| data.u0(x));
    let base = u0.zip(&rho_b, |u, r| u + eps * (r - c) / (2.0 * c));
    let times = check_times(data, 16);

    let mut m1 = 1.0;
    let mut found = false;
    for _ in 0..tol::DOUBLING_CAP {
        let b1 = AffineField { base: base.clone(), slope: -m1 };
        let below_phi = g
            .band()
            .iter()
            .all(|b| times.iter().all(|&t| data.u0(&b.foot) - 0.5 * eps - m1 * t <= data.phi(t, &b.foot) + 1e-12));
        if below_phi && sweep(&b1, Role::Sub, data, disc, &times, 0.0)?.passed() {
            found = true;
            break;
        }
        m1 *= 2.0;
    }
    if !found {
        return Err(Error::BarrierSearchFailed(format!("M₁ exceeded 2^{}", tol::DOUBLING_CAP)));
    }

    let (moll, above, _) = fit_mollifier(data, disc, 0.25 * eps)?;
    let depth = 0.5 * c;
    let mut near = Vec::new();
    for &i in g.active() {
        if rho_b.get(i) >= -depth {
            let x = g.coords(i);
            near.push((i, disc.domain.project_to_boundary(&x)?));
        }
    }
    let b1: Arc<dyn SpaceTimeField> = Arc::new(AffineField { base: base.clone(), slope: -m1 });
    let mut m2 = 1.0;
    for _ in 0..tol::DOUBLING_CAP {
        let b2 = BoundaryBranch {
            data: data.clone(),
            rho_b: rho_b.clone(),
            near: near.clone(),
            moll,
            shift: above,
            eps,
            m2,
        };
        let at_zero = b2.eval(0.0).0;
        let below_u0 = near.iter().all(|(i, _)| at_zero.get(*i) <= u0.get(*i) + 1e-12);
        let env = Envelope { role: Role::Sub, a: b1.clone(), b: Arc::new(b2) };
        if below_u0 && sweep(&env, Role::Sub, data, disc, &times, 0.0)?.passed() {
            return Ok(Barrier {
                role: Role::Sub,
                eps,
                constants: BarrierConstants { m1, m2, c, bandwidth: moll.bandwidth, ..Default::default() },
                field: Arc::new(env),
            });
        }
        m2 *= 2.0;
    }
    Err(Error::BarrierSearchFailed(format!("M₂ exceeded 2^{}", tol::DOUBLING_CAP)))
}

/// `f_δ(z) = max_{0 ≤ s ≤ δ} |f(s, z) − f(0, z)|` sampled at step `δ/8`.
fn density_deviation(data: &ProblemData, disc: &Discretization, delta: f64) -> GridFunction {
    disc.sample(|x| {
        let f0 = data.f(0.0, x);
        (1..=8).map(|k| abs(data.f(delta * k as f64 / 8.0, x) - f0)).fold(0.0, f64::max)
    })
}

/// `min{ū₁, ū₂}` where `ū₁` extends `u_ε + (C_ε + M₁)t − ρ_corr` from its
/// short-time window and `ū₂` is the maximal extension of `φ^ε`.
pub fn superbarrier(
    data: &ProblemData,
    disc: &Discretization,
    eps: f64,
    witness: Option<&AdmissibilityWitness>,
) -> Result<Barrier> {
    if !(eps > 0.0) {
        return Err(Error::invalid("barrier gap ε must be positive"));
    }
    let w = match witness {
        Some(w) if w.eps <= 0.25 * eps * (1.0 + 1e-12) => w,
        _ => return Err(Error::NoWitness),
    };
    let g = &disc.grid;
    let times = sample_times(data.time_window(), 16);
    let u_eps = w.u.map(|_, v| v + 0.25 * eps);
    let mut m1: f64 = 0.0;
    let mut m2 = f64::NEG_INFINITY;
    let (_, phi_hi) = boundary_extremes(data, disc)?;
    for &i in g.active() {
        let x = g.coords(i);
        let u0 = data.u0(&x);
        for &t in &times {
            m1 = m1.max(abs(check_finite(data.big_f(t, &x, u0), "nonlinearity")?));
            m2 = m2.max(data.big_f(t, &x, phi_hi));
        }
    }
    let slope = w.c + m1;
    let gain = exp(w.c + m1 + m2.max(0.0));

    let window = data.time_window();
    let mut delta1 = window;
    let mut rho_corr = u_eps.map(|_, _| 0.0);
    let mut ok = false;
    for _ in 0..tol::HALVING_CAP {
        let f_delta = density_deviation(data, disc, delta1);
        if f_delta.max() <= 0.0 {
            ok = true;
            break;
        }
        let fd = f_delta.clone();
        let grid = g.clone();
        let prob = EllipticProblem::new(
            "correction",
            |_| 0.0,
            move |x| grid.nearest_node(x).map_or(0.0, |i| gain * fd.get(i)),
            |_, _| 0.0,
        );
        let sol = solve_stationary(&prob, disc, &EllipticConfig::default())?;
        if sol.u.sup_norm() <= 0.5 * eps {
            rho_corr = sol.u;
            ok = true;
            break;
        }
        delta1 *= 0.5;
    }
    if !ok {
        return Err(Error::BarrierSearchFailed("no δ₁ makes the correction small".into()));
    }
    let base = u_eps.zip(&rho_corr, |u, r| u - r);

    // The band formula is only consistent up to O(band²) even for u₀, so
    // the barrier may not fall below the defect u₀ already has.
    let u0 = disc.sample(|x| data.u0(x));
    let floor: Vec<f64> = g.band().iter().map(|b| band_defect(&u0, b, data, 0.0).min(0.0) - 1e-12).collect();
    let mut delta2 = delta1;
    let mut ok = false;
    for _ in 0..tol::HALVING_CAP {
        let pass = g.band().iter().zip(&floor).all(|(b, &lo)| {
            (0..=8).all(|k| {
                let t = delta2 * k as f64 / 8.0;
                let w = base.get(b.node) + slope * t;
                let a = base.get(b.anchor) + slope * t;
                w - SpaceGrid::band_value(b, a, data.phi(t, &b.foot), data.phi(t, &b.anchor_foot)) >= lo
            })
        });
        if pass {
            ok = true;
            break;
        }
        delta2 *= 0.5;
    }
    if !ok {
        return Err(Error::BarrierSearchFailed("no δ₂ keeps the barrier above φ".into()));
    }
    let short: Arc<dyn SpaceTimeField> = Arc::new(AffineField { base, slope });
    let u1 = if delta2 >= data.horizon { short } else { extend_super(short, data, disc, delta2, 0.5 * delta2)? };

    let (moll, _, below) = fit_mollifier(data, disc, 0.25 * eps)?;
    let cap = cap_field(data, disc, moll, below)?;
    Ok(Barrier {
        role: Role::Super,
        eps,
        constants: BarrierConstants {
            m1,
            m2,
            c_eps: w.c,
            delta1,
            delta2,
            bandwidth: moll.bandwidth,
            ..Default::default()
        },
        field: Arc::new(Envelope { role: Role::Super, a: u1, b: cap }),
    })
}

/// Maximal extensions of `φ^ε = φ_moll + shift` at 17 time nodes (one when
/// the data is stationary, none when it is constant in space).
fn cap_field(
    data: &ProblemData,
    disc: &Discretization,
    moll: Mollifier,
    shift: f64,
) -> Result<Arc<dyn SpaceTimeField>> {
    let band = disc.grid.band();
    let window = data.time_window();
    let nodes = sample_times(window, 16);
    let mut values = Vec::new();
    let mut stationary = true;
    let mut flat_all = true;
    let first: Vec<f64> = band.iter().map(|b| moll.apply(data, 0.0, &b.foot)).collect();
    for &t in &nodes {
        let vals: Vec<f64> = band.iter().map(|b| moll.apply(data, t, &b.foot)).collect();
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        flat_all &= hi - lo <= 1e-12 * (1.0 + abs(hi));
        stationary &= vals.iter().zip(&first).all(|(a, b)| abs(a - b) <= 1e-12 * (1.0 + abs(*a)));
    }
    if flat_all {
        for &t in &nodes {
            let v = moll.apply(data, t, &band[0].foot) + shift;
            values.push(disc.sample(|_| v));
        }
        return Ok(Arc::new(InterpField { times: nodes, values }));
    }
    let solve_at = |t: f64| {
        let d = data.clone();
        maximal_extension(move |x| moll.apply(&d, t, x) + shift, disc)
    };
    if stationary {
        return Ok(Arc::new(InterpField { times: vec![0.0], values: vec![solve_at(0.0)?] }));
    }
    for &t in &nodes {
        values.push(solve_at(t)?);
    }
    Ok(Arc::new(InterpField { times: nodes, values }))
}

/// `w(node) − φ(foot) − θ (w(anchor) − φ(anchor_foot))`: nonpositive for a
/// subsolution's boundary, nonnegative for a supersolution's.
pub fn band_defect(w: &GridFunction, b: &BandNode, data: &ProblemData, t: f64) -> f64 {
    w.get(b.node) - SpaceGrid::band_value(b, w.get(b.anchor), data.phi(t, &b.foot), data.phi(t, &b.anchor_foot))
}

#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PairReport {
    /// `max(sub − super − 2ε)`.
    pub gap_excess: f64,
    /// Largest violation of the initial brackets.
    pub initial_excess: f64,
    /// Largest violation of the boundary brackets.
    pub boundary_excess: f64,
}

impl PairReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.gap_excess <= tol && self.initial_excess <= tol && self.boundary_excess <= tol
    }
}

#[derive(Clone, Debug)]
pub struct BarrierPair {
    pub sub: Barrier,
    pub sup: Barrier,
    pub eps: f64,
}

impl BarrierPair {
    /// Checks the ordering and the parabolic-boundary brackets at `times`;
    /// band nodes are compared against the band value each field induces.
    pub fn verify(&self, data: &ProblemData, disc: &Discretization, times: &[f64]) -> Result<PairReport> {
        let g = &disc.grid;
        let e = self.eps;
        let mut rep = PairReport {
            gap_excess: f64::NEG_INFINITY,
            initial_excess: f64::NEG_INFINITY,
            boundary_excess: f64::NEG_INFINITY,
        };
        let s0 = self.sub.sample(disc, 0.0)?;
        let p0 = self.sup.sample(disc, 0.0)?;
        for &i in g.interior() {
            let u0 = data.u0(&g.coords(i));
            let ex = (u0 - e - s0.get(i)).max(s0.get(i) - u0).max(u0 - p0.get(i)).max(p0.get(i) - u0 - e);
            rep.initial_excess = rep.initial_excess.max(ex);
        }
        for &t in times {
            let s = self.sub.sample(disc, t)?;
            let p = self.sup.sample(disc, t)?;
            for &i in g.active() {
                rep.gap_excess = rep.gap_excess.max(s.get(i) - p.get(i) - 2.0 * e);
            }
            for b in g.band() {
                let (sd, pd) = (band_defect(&s, b, data, t), band_defect(&p, b, data, t));
                let ex = (-e - sd).max(sd).max(-pd).max(pd - e);
                rep.boundary_excess = rep.boundary_excess.max(ex);
            }
        }
        Ok(rep)
    }
}
