//! Space-time fields on a grid and the discrete sub/supersolution sweeps.

use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::domain::Point;
use crate::error::{Result, Role};
use crate::grid::{Discretization, GridFunction};
use crate::math::exp;
use crate::problem::ProblemData;
use crate::tol;

/// Anything that can be sampled on a grid at a time `t`.
pub trait SpaceTimeField: Send + Sync {
    fn sample(&self, disc: &Discretization, t: f64) -> Result<GridFunction>;

    /// `∂_t` of the field, by a forward difference unless overridden.
    fn rate(&self, disc: &Discretization, t: f64) -> Result<GridFunction> {
        let a = self.sample(disc, t)?;
        let b = self.sample(disc, t + tol::TIME_PROBE)?;
        Ok(b.zip(&a, |x, y| (x - y) / tol::TIME_PROBE))
    }
}

pub type FieldFn = Arc<dyn Fn(f64, &Point) -> f64 + Send + Sync>;

/// A closed-form field `(t, z) ↦ w`, optionally with its exact time derivative.
#[derive(Clone)]
pub struct FnField {
    pub value: FieldFn,
    pub rate: Option<FieldFn>,
}

impl FnField {
    pub fn new(f: impl Fn(f64, &Point) -> f64 + Send + Sync + 'static) -> Self {
        Self { value: Arc::new(f), rate: None }
    }

    pub fn with_rate(
        f: impl Fn(f64, &Point) -> f64 + Send + Sync + 'static,
        rate: impl Fn(f64, &Point) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { value: Arc::new(f), rate: Some(Arc::new(rate)) }
    }

    pub fn eval(&self, t: f64, x: &Point) -> f64 {
        (self.value)(t, x)
    }
}

impl SpaceTimeField for FnField {
    fn sample(&self, disc: &Discretization, t: f64) -> Result<GridFunction> {
        Ok(disc.sample(|x| (self.value)(t, x)).with_time(t))
    }

    fn rate(&self, disc: &Discretization, t: f64) -> Result<GridFunction> {
        match &self.rate {
            Some(r) => Ok(disc.sample(|x| r(t, x)).with_time(t)),
            None => {
                let a = self.sample(disc, t)?;
                let b = self.sample(disc, t + tol::TIME_PROBE)?;
                Ok(b.zip(&a, |x, y| (x - y) / tol::TIME_PROBE))
            }
        }
    }
}

/// A time-independent grid function.
#[derive(Clone)]
pub struct StaticField(pub GridFunction);

impl SpaceTimeField for StaticField {
    fn sample(&self, _disc: &Discretization, t: f64) -> Result<GridFunction> {
        Ok(self.0.clone().with_time(t))
    }

    fn rate(&self, _disc: &Discretization, _t: f64) -> Result<GridFunction> {
        Ok(self.0.map(|_, _| 0.0))
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepReport {
    pub role: Role,
    pub checked: usize,
    pub violations: usize,
    /// Largest defect (positive means violated by that much).
    pub worst: f64,
    pub worst_time: f64,
    pub worst_node: usize,
}

impl SweepReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Checks `MA_h(w) ≥ e^{∂_t w + F} f − tol` (sub) or `MA_h(w) ≤ e^{∂_t w + F} f + tol`
/// (super) at every interior node and every given time.
pub fn sweep(
    field: &dyn SpaceTimeField,
    role: Role,
    data: &ProblemData,
    disc: &Discretization,
    times: &[f64],
    tol: f64,
) -> Result<SweepReport> {
    let mut rep =
        SweepReport { role, checked: 0, violations: 0, worst: f64::NEG_INFINITY, worst_time: 0.0, worst_node: 0 };
    let g = &disc.grid;
    for &t in times {
        let w = field.sample(disc, t)?;
        let r = field.rate(disc, t)?;
        for &i in g.interior() {
            let x = g.coords(i);
            let lhs = disc.op.apply_at(w.values(), i);
            let rhs = exp(r.get(i) + data.big_f(t, &x, w.get(i))) * data.f(t, &x);
            let defect = match role {
                Role::Sub => rhs - lhs,
                Role::Super => lhs - rhs,
            };
            let defect = if defect.is_nan() { f64::INFINITY } else { defect };
            rep.checked += 1;
            if defect > tol {
                rep.violations += 1;
            }
            if defect > rep.worst {
                rep.worst = defect;
                rep.worst_time = t;
                rep.worst_node = i;
            }
        }
    }
    Ok(rep)
}

/// Interior times `T·k/(count+1)` for `k = 1..=count`.
pub fn interior_times(window: f64, count: usize) -> Vec<f64> {
    (1..=count).map(|k| window * k as f64 / (count + 1) as f64).collect()
}
