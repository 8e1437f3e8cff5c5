//! Sup/inf-convolution in time over a discrete time axis, the shifted data
//! they solve against, and the measured time-Lipschitz bound.

use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::math::abs;
use crate::problem::{sample_times, ProblemData};
use crate::solver::Trajectory;

/// Grid functions on a strictly increasing time axis.
#[derive(Debug, Clone)]
pub struct TimeProfile {
    pub times: Vec<f64>,
    pub values: Vec<GridFunction>,
}

impl TimeProfile {
    pub fn new(times: Vec<f64>, values: Vec<GridFunction>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::invalid("time profile needs one value per time"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("time axis must be strictly increasing"));
        }
        Ok(Self { times, values })
    }

    pub fn from_trajectory(traj: &Trajectory) -> Self {
        Self { times: traj.times(), values: traj.snapshots.iter().map(|s| s.u.clone()).collect() }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Values of one node across time.
    pub fn series(&self, node: usize) -> Vec<f64> {
        self.values.iter().map(|v| v.get(node)).collect()
    }

    /// `sup − inf` over all nodes and times.
    pub fn oscillation(&self) -> f64 {
        let hi = self.values.iter().map(|v| v.max()).fold(f64::NEG_INFINITY, f64::max);
        let lo = self.values.iter().map(|v| v.min()).fold(f64::INFINITY, f64::min);
        hi - lo
    }

    /// `2·osc + 1`.
    pub fn default_reach(&self) -> f64 {
        2.0 * self.oscillation() + 1.0
    }

    fn map_series(&self, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> Self {
        let mut values = self.values.clone();
        let grid = self.values[0].grid().clone();
        for &i in grid.active() {
            let out = f(&self.series(i));
            for (v, o) in values.iter_mut().zip(out) {
                v.set(i, o);
            }
        }
        for (v, &t) in values.iter_mut().zip(&self.times) {
            v.set_time(Some(t));
        }
        Self { times: self.times.clone(), values }
    }
}

/// `max_j (u_j − k|t_j − t_i|)` for every `i`.
pub fn sup_convolve_series(times: &[f64], u: &[f64], k: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let mut best = f64::NEG_INFINITY;
        for (&s, &v) in times.iter().zip(u) {
            let c = v - k * abs(s - t);
            if c > best {
                best = c;
            }
        }
        out.push(best);
    }
    out
}

/// `min_j (v_j + k|t_j − t_i|)` for every `i`.
pub fn inf_convolve_series(times: &[f64], v: &[f64], k: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let mut best = f64::INFINITY;
        for (&s, &w) in times.iter().zip(v) {
            let c = w + k * abs(s - t);
            if c < best {
                best = c;
            }
        }
        out.push(best);
    }
    out
}

pub fn sup_convolution(u: &TimeProfile, k: f64) -> Result<TimeProfile> {
    if !(k > 0.0) {
        return Err(Error::invalid("convolution slope k must be positive"));
    }
    Ok(u.map_series(|s| sup_convolve_series(&u.times, s, k)))
}

pub fn inf_convolution(v: &TimeProfile, k: f64) -> Result<TimeProfile> {
    if !(k > 0.0) {
        return Err(Error::invalid("convolution slope k must be positive"));
    }
    Ok(v.map_series(|s| inf_convolve_series(&v.times, s, k)))
}

/// Data with `F_k(t,z,r) = min_{|s−t| ≤ A/k} F(s,z,r) + k|s−t|` and
/// `f_k(t,z) = min_{|s−t| ≤ A/k} f(s,z)`, the minima taken over `times`.
pub fn shifted_data(data: &ProblemData, k: f64, reach: f64, times: &[f64]) -> Result<ProblemData> {
    if !(k > 0.0) || !(reach > 0.0) || times.is_empty() {
        return Err(Error::invalid("shifted data needs k > 0, A > 0 and a time axis"));
    }
    let radius = reach / k;
    let axis: Arc<Vec<f64>> = Arc::new(times.to_vec());
    let near = move |axis: &[f64], t: f64| -> Vec<f64> {
        axis.iter().copied().filter(|s| abs(s - t) <= radius * (1.0 + 1e-12) + 1e-12).collect()
    };
    let (d1, d2) = (data.clone(), data.clone());
    let (a1, a2) = (axis.clone(), axis);
    let near2 = near;
    let mut out = data.clone();
    out.label = alloc::format!("{}-shifted", data.label);
    out.nonlinearity = Arc::new(move |t, x, r| {
        near(&a1, t).into_iter().map(|s| d1.big_f(s, x, r) + k * abs(s - t)).fold(f64::INFINITY, f64::min)
    });
    out.density = Arc::new(move |t, x| near2(&a2, t).into_iter().map(|s| d2.f(s, x)).fold(f64::INFINITY, f64::min));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LipschitzReport {
    /// Time-Lipschitz constant of `φ`.
    pub c0: f64,
    /// Time-Lipschitz constant of `F` on `[−M, M]`.
    pub c_m: f64,
    /// `sup|u|`.
    pub sup_u: f64,
    pub pairs: usize,
    pub violations: usize,
    /// Largest `measured − predicted`.
    pub worst_excess: f64,
    pub max_quotient: f64,
    pub min_quotient: f64,
}

impl LipschitzReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// For every snapshot pair `B < A` compares `sup|u(A) − u(B)|/(A − B)` with
/// `2M/A + max{C₀, B·C_M} + n + M·B`.
pub fn time_lipschitz_bound(traj: &Trajectory, data: &ProblemData, tol: f64) -> Result<LipschitzReport> {
    let snaps = &traj.snapshots;
    let disc = &traj.disc;
    let g = &disc.grid;
    let n = disc.dim() as f64;
    let sup_u = snaps.iter().map(|s| s.u.sup_norm()).fold(0.0, f64::max);
    let window = traj.last().t;
    let times = sample_times(window, 64);
    let mut c0: f64 = 0.0;
    for b in g.band() {
        for w in times.windows(2) {
            c0 = c0.max(abs(data.phi(w[1], &b.foot) - data.phi(w[0], &b.foot)) / (w[1] - w[0]));
        }
    }
    let mut c_m: f64 = 0.0;
    let stride = (g.active().len() / 400).max(1);
    for &i in g.active().iter().step_by(stride) {
        let x = g.coords(i);
        for r in [-sup_u, 0.0, sup_u] {
            for w in times.windows(2) {
                c_m = c_m.max(abs(data.big_f(w[1], &x, r) - data.big_f(w[0], &x, r)) / (w[1] - w[0]));
            }
        }
    }
    let mut rep = LipschitzReport {
        c0,
        c_m,
        sup_u,
        pairs: 0,
        violations: 0,
        worst_excess: f64::NEG_INFINITY,
        max_quotient: 0.0,
        min_quotient: f64::INFINITY,
    };
    for (j, a) in snaps.iter().enumerate() {
        if a.t <= 0.0 {
            continue;
        }
        for b in snaps[..j].iter().filter(|b| b.t > 0.0) {
            let q = a.u.sup_distance(&b.u) / (a.t - b.t);
            let predicted = 2.0 * sup_u / a.t + c0.max(b.t * c_m) + n + sup_u * b.t;
            rep.pairs += 1;
            rep.max_quotient = rep.max_quotient.max(q);
            rep.min_quotient = rep.min_quotient.min(q);
            rep.worst_excess = rep.worst_excess.max(q - predicted);
            if q > predicted + tol {
                rep.violations += 1;
            }
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_and_dominated_slopes() {
        let t: Vec<f64> = (0..20).map(|i| i as f64 * 0.05).collect();
        let c = alloc::vec![0.4; 20];
        assert_eq!(sup_convolve_series(&t, &c, 3.0), c);
        assert_eq!(inf_convolve_series(&t, &c, 3.0), c);
        let down: Vec<f64> = t.iter().map(|s| -2.0 * s).collect();
        assert_eq!(sup_convolve_series(&t, &down, 2.5), down);
        let up: Vec<f64> = t.iter().map(|s| 2.0 * s).collect();
        assert_eq!(inf_convolve_series(&t, &up, 2.5), up);
    }

    #[test]
    fn shifted_density_of_linear_ramp() {
        let data = ProblemData::new("ramp", |_| 0.0, |_, _| 0.0, |t, _| t, |_, _, r| r, 1.0);
        let times: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        let s = shifted_data(&data, 10.0, 1.0, &times).unwrap();
        let x = [0.0; 4];
        for &t in &times {
            assert!((s.f(t, &x) - (t - 0.1).max(0.0)).abs() < 1e-9);
            assert_eq!(s.big_f(t, &x, 0.7), 0.7);
        }
        assert!(shifted_data(&data, 0.0, 1.0, &times).is_err());
    }
}
