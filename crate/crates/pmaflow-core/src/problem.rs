//! Cauchy-Dirichlet data `(F, f, φ, u₀, T)`.
//!
//! Problem samplers receive the full 4-slot point; for `n = 1` the last two
//! coordinates are zero, so formulas like `Σ x_k²` serve both dimensions.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::domain::Point;
use crate::error::{Error, Result};
use crate::grid::Discretization;
use crate::math::abs;
use crate::tol;

pub type SpaceFn = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;
pub type TimeFn = Arc<dyn Fn(f64, &Point) -> f64 + Send + Sync>;
pub type NonlinearFn = Arc<dyn Fn(f64, &Point, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct ProblemData {
    pub label: String,
    /// `F(t, z, r)`, non-decreasing in `r`.
    pub nonlinearity: NonlinearFn,
    /// `f(t, z) ≥ 0`.
    pub density: TimeFn,
    /// `φ(t, z)` on the boundary.
    pub boundary: TimeFn,
    /// `u₀(z)`.
    pub initial: SpaceFn,
    /// Final time; `f64::INFINITY` for open-ended convergence runs.
    pub horizon: f64,
}

impl core::fmt::Debug for ProblemData {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("ProblemData").field("label", &self.label).field("horizon", &self.horizon).finish()
    }
}

impl ProblemData {
    pub fn new(
        label: &str,
        initial: impl Fn(&Point) -> f64 + Send + Sync + 'static,
        boundary: impl Fn(f64, &Point) -> f64 + Send + Sync + 'static,
        density: impl Fn(f64, &Point) -> f64 + Send + Sync + 'static,
        nonlinearity: impl Fn(f64, &Point, f64) -> f64 + Send + Sync + 'static,
        horizon: f64,
    ) -> Self {
        Self {
            label: label.into(),
            nonlinearity: Arc::new(nonlinearity),
            density: Arc::new(density),
            boundary: Arc::new(boundary),
            initial: Arc::new(initial),
            horizon,
        }
    }

    #[inline]
    pub fn u0(&self, x: &Point) -> f64 {
        (self.initial)(x)
    }

    #[inline]
    pub fn phi(&self, t: f64, x: &Point) -> f64 {
        (self.boundary)(t, x)
    }

    #[inline]
    pub fn f(&self, t: f64, x: &Point) -> f64 {
        (self.density)(t, x)
    }

    #[inline]
    pub fn big_f(&self, t: f64, x: &Point, r: f64) -> f64 {
        (self.nonlinearity)(t, x, r)
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }

    /// The horizon, or a fixed window when it is infinite.
    pub fn time_window(&self) -> f64 {
        if self.horizon.is_finite() {
            self.horizon
        } else {
            tol::OPEN_HORIZON_WINDOW
        }
    }

    /// Whether `f`, `φ` and `F` are unchanged over the time window at the
    /// grid samples (up to `1e-12`).
    pub fn is_time_independent(&self, disc: &Discretization) -> bool {
        let times = sample_times(self.time_window(), 8);
        let g = &disc.grid;
        let stride = (g.active().len() / 200).max(1);
        for &i in g.active().iter().step_by(stride) {
            let x = g.coords(i);
            let f0 = self.f(0.0, &x);
            let u = self.u0(&x);
            let fz = self.big_f(0.0, &x, u);
            for &t in &times {
                if abs(self.f(t, &x) - f0) > 1e-12 || abs(self.big_f(t, &x, u) - fz) > 1e-12 {
                    return false;
                }
            }
        }
        for b in g.band() {
            let p0 = self.phi(0.0, &b.foot);
            for &t in &times {
                if abs(self.phi(t, &b.foot) - p0) > 1e-12 {
                    return false;
                }
            }
        }
        true
    }

    /// Checks the data invariants on the grid samples. Violations are
    /// reported, never repaired.
    pub fn validate(&self, disc: &Discretization, seed: u64) -> Result<DataReport> {
        let g = &disc.grid;
        let h = g.h();
        let mut rep = DataReport::default();
        for b in g.band() {
            let gap = abs(self.u0(&b.foot) - self.phi(0.0, &b.foot));
            if !gap.is_finite() {
                return Err(Error::UnboundedData("u₀ or φ at the boundary".into()));
            }
            rep.max_compat_gap = rep.max_compat_gap.max(gap);
            if gap > tol::compat(h) {
                rep.compat_violations += 1;
            }
        }
        let times = sample_times(self.time_window(), 8);
        for &i in g.active() {
            let x = g.coords(i);
            for &t in &times {
                let v = self.f(t, &x);
                if !v.is_finite() {
                    return Err(Error::UnboundedData("density".into()));
                }
                if v < 0.0 {
                    rep.negative_density += 1;
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let active = g.active();
        for _ in 0..500 {
            let i = active[rng.gen_range(0..active.len())];
            let x = g.coords(i);
            let t = rng.gen_range(0.0..=self.time_window());
            let r1: f64 = rng.gen_range(-10.0..10.0);
            let r2 = r1 + rng.gen_range(0.0..5.0);
            let (a, b) = (self.big_f(t, &x, r1), self.big_f(t, &x, r2));
            if !a.is_finite() || !b.is_finite() {
                return Err(Error::UnboundedData("nonlinearity".into()));
            }
            if b < a - 1e-9 {
                rep.monotonicity_violations += 1;
            }
        }
        Ok(rep)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DataReport {
    pub max_compat_gap: f64,
    pub compat_violations: usize,
    pub negative_density: usize,
    pub monotonicity_violations: usize,
}

impl DataReport {
    pub fn is_clean(&self) -> bool {
        self.compat_violations == 0 && self.negative_density == 0 && self.monotonicity_violations == 0
    }
}

/// `count + 1` equispaced times on `[0, window]`.
pub fn sample_times(window: f64, count: usize) -> Vec<f64> {
    (0..=count).map(|k| window * k as f64 / count as f64).collect()
}
