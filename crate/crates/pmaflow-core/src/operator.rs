//! Wide-stencil discrete Monge-Ampère operator.
//!
//! `D_v u = [u(z+hv) + u(z−hv) + u(z+ihv) + u(z−ihv) − 4u(z)] / (4h²)` and
//! `MA_h u = min over frames of Π max(D_j, 0) − penalty · Σ max(−D_j, 0)`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::frames::{ComplexDirection, FrameSet};
use crate::grid::{GridFunction, NodeClass, SpaceGrid};

#[derive(Debug, Clone)]
pub struct MongeAmpere {
    n: usize,
    penalty: f64,
    frames: FrameSet,
    /// Per direction (frames flattened): linear offsets of `+v, −v, +iv, −iv`.
    offsets: Vec<[isize; 4]>,
    /// Per direction: `1/(4 |g|² h²)`.
    scales: Vec<f64>,
    /// Largest `|offset|`.
    reach: usize,
    /// Length of the value arrays of the grid.
    len: usize,
}

impl MongeAmpere {
    pub fn new(grid: &SpaceGrid, frames: FrameSet, penalty: f64) -> Result<Self> {
        if !(penalty > 0.0) {
            return Err(Error::invalid("penalty must be positive"));
        }
        if frames.dim() != grid.dim() {
            return Err(Error::invalid("frame set and grid dimensions differ"));
        }
        let h = grid.h();
        let mut offsets = Vec::new();
        let mut scales = Vec::new();
        for d in frames.directions() {
            let a = grid.linear_offset(&d.offset);
            let b = grid.linear_offset(&d.offset_i);
            offsets.push([a, -a, b, -b]);
            scales.push(1.0 / (4.0 * d.length * d.length * h * h));
        }
        let reach = offsets.iter().flatten().map(|o| o.unsigned_abs()).max().unwrap_or(0);
        Ok(Self { n: grid.dim(), penalty, frames, offsets, scales, reach, len: grid.len() })
    }

    pub fn frames(&self) -> &FrameSet {
        &self.frames
    }

    pub fn penalty(&self) -> f64 {
        self.penalty
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn direction_count(&self) -> usize {
        self.offsets.len()
    }

    /// Sum of the four stencil neighbours along direction `d` and its scale.
    #[inline]
    pub fn neighbour_sum(&self, u: &[f64], idx: usize, d: usize) -> f64 {
        let o = &self.offsets[d];
        let i = idx as isize;
        u[(i + o[0]) as usize] + u[(i + o[1]) as usize] + u[(i + o[2]) as usize] + u[(i + o[3]) as usize]
    }

    /// [`Self::neighbour_sum`] without bounds checks.
    ///
    /// # Safety
    /// `idx` must be an interior node of the grid the operator was built for,
    /// whose stencil lies inside `u` by construction.
    #[inline(always)]
    unsafe fn sum_unchecked(u: &[f64], i: isize, o: &[isize; 4]) -> f64 {
        let p = u.as_ptr().offset(i);
        *p.offset(o[0]) + *p.offset(o[1]) + *p.offset(o[2]) + *p.offset(o[3])
    }

    #[inline]
    pub fn scale(&self, d: usize) -> f64 {
        self.scales[d]
    }

    #[inline]
    fn frame_value(&self, d1: f64, d2: f64) -> f64 {
        let pos = d1.max(0.0) * d2.max(0.0);
        let neg = (-d1).max(0.0) + (-d2).max(0.0);
        pos - self.penalty * neg
    }

    #[inline]
    fn single_value(&self, d: f64) -> f64 {
        if d >= 0.0 {
            d
        } else {
            self.penalty * d
        }
    }

    /// `MA_h` at an interior node of the dense value array; no checks.
    #[inline]
    pub fn apply_at(&self, u: &[f64], idx: usize) -> f64 {
        let c = 4.0 * u[idx];
        if self.n == 1 {
            return self.single_value((self.neighbour_sum(u, idx, 0) - c) * self.scales[0]);
        }
        assert!(u.len() == self.len && idx >= self.reach && idx + self.reach < u.len());
        let i = idx as isize;
        let mut best = f64::INFINITY;
        for (o, s) in self.offsets.chunks_exact(2).zip(self.scales.chunks_exact(2)) {
            // SAFETY: every offset is at most `reach` in magnitude, checked above.
            let (a, b) = unsafe { (Self::sum_unchecked(u, i, &o[0]), Self::sum_unchecked(u, i, &o[1])) };
            best = best.min(self.frame_value((a - c) * s[0], (b - c) * s[1]));
        }
        best
    }

    /// Fills `sums` with the neighbour sums of every direction at `idx`, so the
    /// operator can be re-evaluated for trial centre values.
    pub fn neighbour_sums(&self, u: &[f64], idx: usize, sums: &mut Vec<f64>) {
        sums.clear();
        for d in 0..self.offsets.len() {
            sums.push(self.neighbour_sum(u, idx, d));
        }
    }

    /// `MA_h` at a node with precomputed neighbour sums and centre value `v`.
    #[inline]
    pub fn apply_with_sums(&self, sums: &[f64], v: f64) -> f64 {
        let c = 4.0 * v;
        if self.n == 1 {
            return self.single_value((sums[0] - c) * self.scales[0]);
        }
        let mut best = f64::INFINITY;
        let mut d = 0;
        while d < sums.len() {
            let val = self.frame_value((sums[d] - c) * self.scales[d], (sums[d + 1] - c) * self.scales[d + 1]);
            if val < best {
                best = val;
            }
            d += 2;
        }
        best
    }

    /// `MA_h` at `idx` with the minimizing frame and its directional Hessians.
    pub fn apply_detail(&self, u: &[f64], idx: usize) -> (f64, usize, [f64; 2]) {
        let c = 4.0 * u[idx];
        if self.n == 1 {
            let d = (self.neighbour_sum(u, idx, 0) - c) * self.scales[0];
            return (self.single_value(d), 0, [d, 0.0]);
        }
        let mut best = (f64::INFINITY, 0, [0.0; 2]);
        let mut d = 0;
        while d < self.offsets.len() {
            let d1 = (self.neighbour_sum(u, idx, d) - c) * self.scales[d];
            let d2 = (self.neighbour_sum(u, idx, d + 1) - c) * self.scales[d + 1];
            let v = self.frame_value(d1, d2);
            if v < best.0 {
                best = (v, d / 2, [d1, d2]);
            }
            d += 2;
        }
        best
    }

    /// Directional Hessians of the minimizing frame at `idx`, with its index.
    pub fn active_frame(&self, u: &[f64], idx: usize) -> (usize, [f64; 2]) {
        let (_, f, d) = self.apply_detail(u, idx);
        (f, d)
    }

    /// `|∂D_j/∂u(centre)|` for direction `j` of frame `f`, i.e. `1/(|g|²h²)`.
    pub fn centre_weight(&self, frame: usize, j: usize) -> f64 {
        4.0 * self.scales[frame * self.n + j]
    }

    /// Directional Hessian along an arbitrary lattice direction, with checks.
    pub fn directional_hessian(&self, u: &GridFunction, node: usize, dir: &ComplexDirection) -> Result<f64> {
        let g = u.grid();
        let mut s = 0.0;
        for off in [dir.offset, dir.offset_i] {
            for sign in [1, -1] {
                match g.shift(node, &off, sign) {
                    Some(j) if g.class(j) != NodeClass::Exterior => s += u.get(j),
                    _ => return Err(Error::StencilOutOfDomain { node }),
                }
            }
        }
        if g.class(node) == NodeClass::Exterior {
            return Err(Error::StencilOutOfDomain { node });
        }
        let h = g.h();
        Ok((s - 4.0 * u.get(node)) / (4.0 * dir.length * dir.length * h * h))
    }

    /// `MA_h u` at an interior node.
    pub fn ma_apply(&self, u: &GridFunction, node: usize) -> Result<f64> {
        if node >= u.grid().len() || u.grid().class(node) != NodeClass::Interior {
            return Err(Error::StencilOutOfDomain { node });
        }
        Ok(self.apply_at(u.values(), node))
    }

    /// `MA_h u` at every interior node (zero elsewhere on the active set).
    pub fn apply_all(&self, u: &GridFunction) -> GridFunction {
        let g = u.grid().clone();
        let mut out = GridFunction::constant(&g, 0.0);
        for &i in g.interior() {
            out.set(i, self.apply_at(u.values(), i));
        }
        out
    }

    /// Smallest directional Hessian over all frame directions at `idx`.
    pub fn min_directional(&self, u: &[f64], idx: usize) -> f64 {
        let c = 4.0 * u[idx];
        (0..self.offsets.len())
            .map(|d| (self.neighbour_sum(u, idx, d) - c) * self.scales[d])
            .fold(f64::INFINITY, f64::min)
    }

    /// Per interior node (in `grid.interior()` order): all directional
    /// Hessians `≥ −tol`.
    pub fn is_discretely_psh(&self, u: &GridFunction, tol: f64) -> Vec<bool> {
        let g = u.grid();
        let mut out = vec![false; g.interior().len()];
        for (k, &i) in g.interior().iter().enumerate() {
            out[k] = self.min_directional(u.values(), i) >= -tol;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::DomainSpec;
    use crate::grid::Discretization;

    fn ball(n: usize, h: f64, k: usize) -> Discretization {
        Discretization::new(DomainSpec::ball(n, 1.0).unwrap(), h, FrameSet::lattice(n, k).unwrap(), 1.0).unwrap()
    }

    #[test]
    fn quadratic_values() {
        let d = ball(2, 0.2, 16);
        let u = d.sample(|x| x.iter().map(|v| v * v).sum());
        let w = d.sample(|x| 3.0 * x.iter().map(|v| v * v).sum::<f64>());
        for &i in d.grid.interior() {
            assert!((d.op.apply_at(u.values(), i) - 1.0).abs() < 1e-10);
            assert!((d.op.apply_at(w.values(), i) - 9.0).abs() < 1e-9);
        }
    }

    #[test]
    fn pluriharmonic_directional_zero() {
        let d = ball(1, 0.1, 1);
        let u = d.sample(|x| x[0] * x[0] - x[1] * x[1]);
        let e1 = &d.op.frames().frames()[0][0];
        for &i in d.grid.interior() {
            assert!(d.op.directional_hessian(&u, i, e1).unwrap().abs() < 1e-10);
        }
    }

    #[test]
    fn negative_quadratic_is_not_psh() {
        let d = ball(2, 0.25, 4);
        let u = d.sample(|x| -x.iter().map(|v| v * v).sum::<f64>());
        assert!(d.op.is_discretely_psh(&u, 1e-9).iter().all(|f| !f));
        let u = d.sample(|x| x.iter().map(|v| v * v).sum::<f64>());
        assert!(d.op.is_discretely_psh(&u, 1e-9).iter().all(|f| *f));
    }

    #[test]
    fn exterior_node_rejected() {
        let d = ball(1, 0.1, 1);
        let u = d.sample(|_| 0.0);
        let band = d.grid.band()[0].node;
        assert!(matches!(d.op.ma_apply(&u, band), Err(Error::StencilOutOfDomain { .. })));
    }
}
