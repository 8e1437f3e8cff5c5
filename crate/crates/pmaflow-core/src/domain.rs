//! Domains `Ω = {ρ < 0}` given by a defining function.
//!
//! Points of ℂⁿ are stored as real coordinates `(x₁, y₁, x₂, y₂)` with
//! `z_j = x_j + i·y_j`; for `n = 1` the last two slots are zero and every
//! sampler receives the slice of length `2n`.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::math::{abs, norm, powf, sqrt};
use crate::tol;

pub type Point = [f64; 4];

pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type GradientFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

#[derive(Clone)]
pub struct DomainSpec {
    n: usize,
    label: String,
    rho: ScalarFn,
    grad: GradientFn,
    lo: Point,
    hi: Point,
    grad_bound: f64,
}

impl core::fmt::Debug for DomainSpec {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("DomainSpec")
            .field("n", &self.n)
            .field("label", &self.label)
            .field("lo", &self.lo)
            .field("hi", &self.hi)
            .finish()
    }
}

fn check_dim(n: usize) -> Result<()> {
    if n == 1 || n == 2 {
        Ok(())
    } else {
        Err(Error::invalid(format!("dimension {n} not supported (1 or 2)")))
    }
}

fn symmetric_box(n: usize, half: &[f64]) -> (Point, Point) {
    let mut lo = [0.0; 4];
    let mut hi = [0.0; 4];
    for k in 0..2 * n {
        let r = half[k / 2] * (1.0 + 1e-9) + 1e-12;
        lo[k] = -r;
        hi[k] = r;
    }
    (lo, hi)
}

impl DomainSpec {
    /// Ball of the given radius centred at the origin, `ρ = |z|² − r²`.
    pub fn ball(n: usize, radius: f64) -> Result<Self> {
        check_dim(n)?;
        if !(radius > 0.0) {
            return Err(Error::invalid("ball radius must be positive"));
        }
        let r2 = radius * radius;
        let (lo, hi) = symmetric_box(n, &[radius, radius]);
        Ok(Self {
            n,
            label: format!("ball(r={radius})"),
            rho: Arc::new(move |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>() - r2),
            grad: Arc::new(|x: &[f64], g: &mut [f64]| {
                for (gi, xi) in g.iter_mut().zip(x) {
                    *gi = 2.0 * xi;
                }
            }),
            lo,
            hi,
            grad_bound: 2.0 * radius,
        })
    }

    /// `ρ = Σ a_j |z_j|² − 1` with one positive weight per complex coordinate.
    pub fn ellipsoid(weights: &[f64]) -> Result<Self> {
        let n = weights.len();
        check_dim(n)?;
        if weights.iter().any(|a| !(*a > 0.0)) {
            return Err(Error::invalid("ellipsoid weights must be positive"));
        }
        let w: Vec<f64> = weights.to_vec();
        let half: Vec<f64> = w.iter().map(|a| 1.0 / sqrt(*a)).collect();
        let (lo, hi) = symmetric_box(n, &half);
        let amax = w.iter().cloned().fold(0.0, f64::max);
        let w2 = w.clone();
        Ok(Self {
            n,
            label: format!("ellipsoid({w:?})"),
            rho: Arc::new(move |x: &[f64]| {
                let mut s = -1.0;
                for (k, xi) in x.iter().enumerate() {
                    s += w[k / 2] * xi * xi;
                }
                s
            }),
            grad: Arc::new(move |x: &[f64], g: &mut [f64]| {
                for (k, xi) in x.iter().enumerate() {
                    g[k] = 2.0 * w2[k / 2] * xi;
                }
            }),
            lo,
            hi,
            grad_bound: 2.0 * sqrt(amax),
        })
    }

    /// Polydisc with rounded edges:
    /// `ρ = (1−b)(|z₁|^{2p} + |z₂|^{2p}) + b|z|² − 1`.
    /// The `b|z|²` term keeps the complex Hessian positive definite.
    pub fn smoothed_polydisc(n: usize, exponent: f64, blend: f64) -> Result<Self> {
        check_dim(n)?;
        if !(exponent >= 1.0) || !(blend > 0.0 && blend <= 1.0) {
            return Err(Error::invalid("polydisc needs exponent ≥ 1 and blend in (0, 1]"));
        }
        let p = exponent;
        let b = blend;
        let (lo, hi) = symmetric_box(n, &[1.0, 1.0]);
        let rho = move |x: &[f64]| {
            let mut s = -1.0;
            for j in 0..x.len() / 2 {
                let m = x[2 * j] * x[2 * j] + x[2 * j + 1] * x[2 * j + 1];
                s += (1.0 - b) * powf(m, p) + b * m;
            }
            s
        };
        let grad = move |x: &[f64], g: &mut [f64]| {
            for j in 0..x.len() / 2 {
                let m = x[2 * j] * x[2 * j] + x[2 * j + 1] * x[2 * j + 1];
                let c = (1.0 - b) * p * powf(m, p - 1.0) * 2.0 + 2.0 * b;
                g[2 * j] = c * x[2 * j];
                g[2 * j + 1] = c * x[2 * j + 1];
            }
        };
        // |∇ρ| ≤ 2(1−b)p + 2b on the closed domain, where every |z_j| ≤ 1.
        let bound = (2.0 * (1.0 - b) * p + 2.0 * b) * sqrt(n as f64);
        Ok(Self {
            n,
            label: format!("polydisc(p={p}, b={b})"),
            rho: Arc::new(rho),
            grad: Arc::new(grad),
            lo,
            hi,
            grad_bound: bound,
        })
    }

    /// A domain from an arbitrary defining function; the gradient is taken
    /// by centred differences and its bound is estimated on a sample lattice.
    pub fn from_fn(
        n: usize,
        label: &str,
        rho: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        lo: Point,
        hi: Point,
    ) -> Result<Self> {
        check_dim(n)?;
        let rho: ScalarFn = Arc::new(rho);
        let r2 = rho.clone();
        let grad: GradientFn = Arc::new(move |x: &[f64], g: &mut [f64]| {
            let d = 1e-6;
            let mut y = [0.0; 4];
            y[..x.len()].copy_from_slice(x);
            for k in 0..x.len() {
                let keep = y[k];
                y[k] = keep + d;
                let a = r2(&y[..x.len()]);
                y[k] = keep - d;
                let b = r2(&y[..x.len()]);
                y[k] = keep;
                g[k] = (a - b) / (2.0 * d);
            }
        });
        let mut dom = Self { n, label: label.into(), rho, grad, lo, hi, grad_bound: 0.0 };
        dom.grad_bound = dom.estimate_grad_bound();
        Ok(dom)
    }

    fn estimate_grad_bound(&self) -> f64 {
        let m = 2 * self.n;
        let per: usize = if m == 2 { 101 } else { 21 };
        let mut best = 0.0f64;
        let mut idx = [0usize; 4];
        let mut x = [0.0; 4];
        let mut g = [0.0; 4];
        let total = per.pow(m as u32);
        for lin in 0..total {
            let mut r = lin;
            for k in 0..m {
                idx[k] = r % per;
                r /= per;
                x[k] = self.lo[k] + (self.hi[k] - self.lo[k]) * idx[k] as f64 / (per - 1) as f64;
            }
            if self.rho(&x) <= 0.0 {
                self.gradient(&x, &mut g);
                best = best.max(norm(&g[..m]));
            }
        }
        best * 1.1
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn real_dim(&self) -> usize {
        2 * self.n
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn bounding_box(&self) -> (Point, Point) {
        (self.lo, self.hi)
    }

    /// Upper bound for `|∇ρ|` on the closed domain.
    pub fn gradient_bound(&self) -> f64 {
        self.grad_bound
    }

    #[inline]
    pub fn rho(&self, x: &Point) -> f64 {
        (self.rho)(&x[..2 * self.n])
    }

    pub fn gradient(&self, x: &Point, g: &mut Point) {
        *g = [0.0; 4];
        (self.grad)(&x[..2 * self.n], &mut g[..2 * self.n]);
    }

    /// Damped Newton iteration along `∇ρ` onto `{ρ = 0}`.
    pub fn project_to_boundary(&self, z: &Point) -> Result<Point> {
        let m = 2 * self.n;
        let mut x = *z;
        let mut r = self.rho(&x);
        let mut g = [0.0; 4];
        for _ in 0..tol::PROJECTION_MAX_ITER {
            if abs(r) <= tol::PROJECTION_TOL {
                return Ok(x);
            }
            self.gradient(&x, &mut g);
            let g2: f64 = g[..m].iter().map(|v| v * v).sum();
            if !g2.is_finite() {
                break;
            }
            if g2 < 1e-20 {
                x[0] += 1e-3 * (self.hi[0] - self.lo[0]);
                r = self.rho(&x);
                continue;
            }
            let mut lam = 1.0;
            let mut accepted = false;
            for _ in 0..40 {
                let mut y = x;
                for k in 0..m {
                    y[k] -= lam * r * g[k] / g2;
                }
                let ry = self.rho(&y);
                if ry.is_finite() && abs(ry) < abs(r) {
                    x = y;
                    r = ry;
                    accepted = true;
                    break;
                }
                lam *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        if abs(r) <= tol::PROJECTION_TOL {
            Ok(x)
        } else {
            Err(Error::ProjectionDiverged { point: *z })
        }
    }

    /// Complex Hessian `∂²ρ/∂z_j∂z̄_k` by centred differences, returned as
    /// `(re, im)` entries of an `n × n` Hermitian matrix (row-major).
    pub fn complex_hessian(&self, x: &Point, step: f64) -> [[f64; 2]; 4] {
        let m = 2 * self.n;
        let mut d2 = [[0.0; 4]; 4];
        let f = |y: &Point| self.rho(y);
        let f0 = f(x);
        for a in 0..m {
            for b in a..m {
                let v = if a == b {
                    let mut p = *x;
                    p[a] += step;
                    let fp = f(&p);
                    p[a] = x[a] - step;
                    let fm = f(&p);
                    (fp - 2.0 * f0 + fm) / (step * step)
                } else {
                    let mut s = 0.0;
                    for (sa, sb, w) in [(1.0, 1.0, 1.0), (1.0, -1.0, -1.0), (-1.0, 1.0, -1.0), (-1.0, -1.0, 1.0)] {
                        let mut p = *x;
                        p[a] += sa * step;
                        p[b] += sb * step;
                        s += w * f(&p);
                    }
                    s / (4.0 * step * step)
                };
                d2[a][b] = v;
                d2[b][a] = v;
            }
        }
        let mut h = [[0.0; 2]; 4];
        for j in 0..self.n {
            for k in 0..self.n {
                let (xj, yj, xk, yk) = (2 * j, 2 * j + 1, 2 * k, 2 * k + 1);
                h[j * 2 + k] = [0.25 * (d2[xj][xk] + d2[yj][yk]), 0.25 * (d2[xj][yk] - d2[yj][xk])];
            }
        }
        h
    }

    /// Smallest eigenvalue of the complex Hessian at `x`.
    pub fn hessian_min_eigenvalue(&self, x: &Point) -> f64 {
        let h = self.complex_hessian(x, 1e-4);
        if self.n == 1 {
            h[0][0]
        } else {
            let a = h[0][0];
            let d = h[3][0];
            let b2 = h[1][0] * h[1][0] + h[1][1] * h[1][1];
            0.5 * (a + d) - sqrt(0.25 * (a - d) * (a - d) + b2)
        }
    }
}

/// Outcome of [`validate_domain`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DomainReport {
    pub samples: usize,
    pub min_gradient: f64,
    pub min_hessian_eigenvalue: f64,
}

/// Checks a nondegenerate gradient and a positive complex Hessian at
/// boundary points reached by rays from the deepest sampled point.
pub fn validate_domain(dom: &DomainSpec, samples: usize) -> Result<DomainReport> {
    if samples == 0 {
        return Err(Error::invalid("validate_domain needs at least one sample"));
    }
    let m = dom.real_dim();
    let (lo, hi) = dom.bounding_box();
    // Deepest point of a coarse lattice serves as the ray origin.
    let per: usize = if m == 2 { 41 } else { 11 };
    let mut centre = [0.0; 4];
    let mut best = f64::INFINITY;
    let total = per.pow(m as u32);
    for lin in 0..total {
        let mut r = lin;
        let mut x = [0.0; 4];
        for k in 0..m {
            x[k] = lo[k] + (hi[k] - lo[k]) * (r % per) as f64 / (per - 1) as f64;
            r /= per;
        }
        let v = dom.rho(&x);
        if v < best {
            best = v;
            centre = x;
        }
    }
    if !(best < 0.0) {
        return Err(Error::DegenerateDomain);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_d04a1);
    let mut min_grad = f64::INFINITY;
    let mut min_eig = f64::INFINITY;
    let mut done = 0;
    let mut attempts = 0;
    let mut g = [0.0; 4];
    while done < samples && attempts < 50 * samples {
        attempts += 1;
        let mut d = [0.0; 4];
        for k in 0..m {
            d[k] = rng.gen_range(-1.0..1.0);
        }
        let dn = norm(&d[..m]);
        if !(0.1..=1.0).contains(&dn) {
            continue;
        }
        for v in d.iter_mut().take(m) {
            *v /= dn;
        }
        // Largest step that keeps the ray inside the box.
        let mut smax = f64::INFINITY;
        for k in 0..m {
            if d[k] > 1e-14 {
                smax = smax.min((hi[k] - centre[k]) / d[k]);
            } else if d[k] < -1e-14 {
                smax = smax.min((lo[k] - centre[k]) / d[k]);
            }
        }
        let at = |s: f64| {
            let mut x = centre;
            for k in 0..m {
                x[k] += s * d[k];
            }
            x
        };
        if dom.rho(&at(smax)) < 0.0 {
            continue;
        }
        let (mut a, mut b) = (0.0, smax);
        for _ in 0..80 {
            let c = 0.5 * (a + b);
            if dom.rho(&at(c)) < 0.0 {
                a = c;
            } else {
                b = c;
            }
        }
        let foot = at(0.5 * (a + b));
        dom.gradient(&foot, &mut g);
        let gn = norm(&g[..m]);
        min_grad = min_grad.min(gn);
        if !(gn > 1e-8) {
            return Err(Error::NotStronglyPseudoconvex { point: foot, eigenvalue: 0.0 });
        }
        let inner = at(0.97 * a);
        for x in [foot, inner] {
            let e = dom.hessian_min_eigenvalue(&x);
            min_eig = min_eig.min(e);
            if !(e > 1e-6) {
                return Err(Error::NotStronglyPseudoconvex { point: x, eigenvalue: e });
            }
        }
        done += 1;
    }
    if done == 0 {
        return Err(Error::DegenerateDomain);
    }
    Ok(DomainReport { samples: done, min_gradient: min_grad, min_hessian_eigenvalue: min_eig })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_projection_is_radial() {
        let d = DomainSpec::ball(1, 1.0).unwrap();
        let p = d.project_to_boundary(&[0.97, 0.0, 0.0, 0.0]).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-10 && p[1].abs() < 1e-12);
    }

    #[test]
    fn boundary_point_is_fixed() {
        let d = DomainSpec::ball(2, 1.0).unwrap();
        let s = 0.5f64.sqrt();
        let z = [s, 0.0, 0.0, s];
        let p = d.project_to_boundary(&z).unwrap();
        assert!(dist(&p, &z) < 1e-12);
    }

    #[test]
    fn ellipsoid_axis_projection() {
        let d = DomainSpec::ellipsoid(&[1.0, 2.0]).unwrap();
        let p = d.project_to_boundary(&[0.69, 0.0, 0.0, 0.0]).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-10, "{p:?}");
        assert!(p[1].abs() + p[2].abs() + p[3].abs() < 1e-12);
    }

    fn dist(a: &Point, b: &Point) -> f64 {
        crate::math::dist(a, b)
    }

    #[test]
    fn validation_of_builtins() {
        let r = validate_domain(&DomainSpec::ball(2, 1.0).unwrap(), 20).unwrap();
        assert!((r.min_hessian_eigenvalue - 1.0).abs() < 1e-4);
        let r = validate_domain(&DomainSpec::ellipsoid(&[1.0, 2.0]).unwrap(), 20).unwrap();
        assert!((r.min_hessian_eigenvalue - 1.0).abs() < 1e-4);
        let r = validate_domain(&DomainSpec::smoothed_polydisc(2, 4.0, 0.1).unwrap(), 20).unwrap();
        assert!(r.min_hessian_eigenvalue >= 0.1 - 1e-4);
    }

    #[test]
    fn half_space_is_rejected() {
        let d = DomainSpec::from_fn(2, "half-space", |x| x[0], [-1.0, -1.0, -1.0, -1.0], [1.0, 1.0, 1.0, 1.0]).unwrap();
        assert!(matches!(validate_domain(&d, 5), Err(Error::NotStronglyPseudoconvex { .. })));
    }

    #[test]
    fn zero_samples_rejected() {
        let d = DomainSpec::ball(1, 1.0).unwrap();
        assert!(validate_domain(&d, 0).is_err());
    }
}
