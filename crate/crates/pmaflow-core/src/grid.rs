//! Lattice grids over the bounding box, node classes and grid functions.
//!
//! Nodes sit at integer multiples of `h`, so grids at `h` and `h/2` share
//! every coarse node. Values are stored densely over the whole box; exterior
//! slots hold NaN and are never read by the stencil.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::domain::{DomainSpec, Point};
use crate::error::{Error, Result};
use crate::frames::FrameSet;
use crate::math::{abs, ceil, dist, floor, norm, round};
use crate::operator::MongeAmpere;
use crate::tol;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum NodeClass {
    Interior,
    BoundaryBand,
    Exterior,
}

impl NodeClass {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeClass::Interior => "interior",
            NodeClass::BoundaryBand => "band",
            NodeClass::Exterior => "exterior",
        }
    }
}

/// Dirichlet bookkeeping for one band node.
#[derive(Debug, Clone)]
pub struct BandNode {
    pub node: usize,
    /// Projection onto `{ρ = 0}`.
    pub foot: Point,
    /// Interior node used for the first-order normal correction.
    pub anchor: usize,
    pub anchor_foot: Point,
    /// `|x − foot| / |x_anchor − anchor_foot|`, clamped to `[0, 1]`.
    pub weight: f64,
}

#[derive(Debug, Clone)]
pub struct SpaceGrid {
    n: usize,
    h: f64,
    lo_index: [i64; 4],
    shape: [usize; 4],
    strides: [usize; 4],
    class: Vec<NodeClass>,
    interior: Vec<usize>,
    band: Vec<BandNode>,
    active: Vec<usize>,
    band_constant: f64,
    stencil_radius: f64,
}

impl SpaceGrid {
    /// Classifies the lattice of `dom` at spacing `h` for the stencil of `frames`.
    ///
    /// A node is interior when `ρ < −c·h` with `c = radius · sup|∇ρ|` and every
    /// stencil point lies in `Ω`; the remaining nodes of `Ω` form the band.
    pub fn build(dom: &DomainSpec, h: f64, frames: &FrameSet) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::invalid("grid spacing must be positive"));
        }
        if frames.dim() != dom.dim() {
            return Err(Error::invalid("frame set and domain dimensions differ"));
        }
        let n = dom.dim();
        let m = 2 * n;
        let (lo, hi) = dom.bounding_box();
        let mut lo_index = [0i64; 4];
        let mut shape = [1usize; 4];
        for k in 0..m {
            let a = ceil(lo[k] / h - 1e-9) as i64;
            let b = floor(hi[k] / h + 1e-9) as i64;
            if b < a {
                return Err(Error::GridTooCoarse { h });
            }
            lo_index[k] = a;
            shape[k] = (b - a + 1) as usize;
        }
        let mut strides = [0usize; 4];
        let mut acc = 1;
        for k in 0..4 {
            strides[k] = acc;
            acc *= shape[k];
        }
        let total = acc;
        let mut grid = Self {
            n,
            h,
            lo_index,
            shape,
            strides,
            class: vec![NodeClass::Exterior; total],
            interior: Vec::new(),
            band: Vec::new(),
            active: Vec::new(),
            band_constant: frames.radius() * dom.gradient_bound(),
            stencil_radius: frames.radius(),
        };
        let mut rho = vec![f64::INFINITY; total];
        let mut any = false;
        for (idx, r) in rho.iter_mut().enumerate() {
            let x = grid.coords(idx);
            *r = dom.rho(&x);
            any |= *r < 0.0;
        }
        if !any {
            return Err(Error::DegenerateDomain);
        }
        let offsets: Vec<[i32; 4]> = frames.directions().flat_map(|d| [d.offset, d.offset_i]).collect();
        let depth = grid.band_constant * h;
        for idx in 0..total {
            if !(rho[idx] < 0.0) {
                continue;
            }
            let mut cls = NodeClass::BoundaryBand;
            if rho[idx] < -depth {
                let closed = offsets.iter().all(|off| {
                    [1i32, -1].iter().all(|&s| match grid.shift(idx, off, s) {
                        Some(j) => rho[j] < 0.0,
                        None => false,
                    })
                });
                if closed {
                    cls = NodeClass::Interior;
                }
            }
            grid.class[idx] = cls;
            grid.active.push(idx);
            if cls == NodeClass::Interior {
                grid.interior.push(idx);
            }
        }
        if grid.interior.is_empty() {
            return Err(Error::GridTooCoarse { h });
        }
        let mut band = Vec::new();
        for &idx in &grid.active {
            if grid.class[idx] == NodeClass::BoundaryBand {
                band.push(grid.band_node(dom, idx)?);
            }
        }
        grid.band = band;
        Ok(grid)
    }

    fn band_node(&self, dom: &DomainSpec, idx: usize) -> Result<BandNode> {
        let x = self.coords(idx);
        let foot = dom.project_to_boundary(&x)?;
        let anchor = self.nearest_interior(dom, &x);
        let ax = self.coords(anchor);
        let anchor_foot = dom.project_to_boundary(&ax)?;
        let da = dist(&ax, &anchor_foot);
        let dx = dist(&x, &foot);
        let weight = if da > 0.0 { (dx / da).clamp(0.0, 1.0) } else { 0.0 };
        Ok(BandNode { node: idx, foot, anchor, anchor_foot, weight })
    }

    /// Interior node closest to `x` among those near the inward normal ray.
    fn nearest_interior(&self, dom: &DomainSpec, x: &Point) -> usize {
        let m = 2 * self.n;
        let mut g = [0.0; 4];
        dom.gradient(x, &mut g);
        let gn = norm(&g[..m]);
        if gn > 0.0 {
            let reach = (4.0 * self.stencil_radius + 8.0) as usize;
            for s in 1..=reach {
                let mut y = *x;
                for k in 0..m {
                    y[k] -= s as f64 * 0.5 * self.h * g[k] / gn;
                }
                let mut best: Option<(f64, usize)> = None;
                let mut centre = [0i64; 4];
                for k in 0..m {
                    centre[k] = round(y[k] / self.h) as i64;
                }
                for lin in 0..3usize.pow(m as u32) {
                    let mut r = lin;
                    let mut lat = [0i64; 4];
                    for k in 0..m {
                        lat[k] = centre[k] + (r % 3) as i64 - 1;
                        r /= 3;
                    }
                    if let Some(j) = self.index_of(&lat) {
                        if self.class[j] == NodeClass::Interior {
                            let d = dist(&self.coords(j), x);
                            if best.map_or(true, |b| d < b.0) {
                                best = Some((d, j));
                            }
                        }
                    }
                }
                if let Some((_, j)) = best {
                    return j;
                }
            }
        }
        let mut best = (f64::INFINITY, self.interior[0]);
        for &j in &self.interior {
            let d = dist(&self.coords(j), x);
            if d < best.0 {
                best = (d, j);
            }
        }
        best.1
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.class.len()
    }

    pub fn is_empty(&self) -> bool {
        self.class.is_empty()
    }

    pub fn shape(&self) -> [usize; 4] {
        self.shape
    }

    pub fn strides(&self) -> [usize; 4] {
        self.strides
    }

    pub fn band_constant(&self) -> f64 {
        self.band_constant
    }

    pub fn stencil_radius(&self) -> f64 {
        self.stencil_radius
    }

    pub fn class(&self, idx: usize) -> NodeClass {
        self.class[idx]
    }

    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    pub fn band(&self) -> &[BandNode] {
        &self.band
    }

    /// All non-exterior nodes in ascending index order.
    pub fn active(&self) -> &[usize] {
        &self.active
    }

    /// Integer lattice coordinates of a node.
    pub fn lattice(&self, idx: usize) -> [i64; 4] {
        let mut out = [0i64; 4];
        let mut r = idx;
        for k in 0..4 {
            out[k] = self.lo_index[k] + (r % self.shape[k]) as i64;
            r /= self.shape[k];
        }
        out
    }

    pub fn coords(&self, idx: usize) -> Point {
        let l = self.lattice(idx);
        let mut x = [0.0; 4];
        for k in 0..2 * self.n {
            x[k] = l[k] as f64 * self.h;
        }
        x
    }

    pub fn index_of(&self, lat: &[i64; 4]) -> Option<usize> {
        let mut idx = 0;
        for k in 0..4 {
            let r = lat[k] - self.lo_index[k];
            if r < 0 || r >= self.shape[k] as i64 {
                return None;
            }
            idx += r as usize * self.strides[k];
        }
        Some(idx)
    }

    /// Node at lattice point `x ± off`, if inside the box.
    pub fn shift(&self, idx: usize, off: &[i32; 4], sign: i32) -> Option<usize> {
        let mut lat = self.lattice(idx);
        for k in 0..4 {
            lat[k] += (sign * off[k]) as i64;
        }
        self.index_of(&lat)
    }

    /// Node nearest to a point, if that lattice point is in the box.
    pub fn nearest_node(&self, x: &Point) -> Option<usize> {
        let mut lat = [0i64; 4];
        for k in 0..2 * self.n {
            lat[k] = round(x[k] / self.h) as i64;
        }
        self.index_of(&lat)
    }

    /// Signed linear offset for a lattice displacement.
    pub fn linear_offset(&self, off: &[i32; 4]) -> isize {
        (0..4).map(|k| off[k] as isize * self.strides[k] as isize).sum()
    }

    /// Volume element `h^{2n}`.
    pub fn cell_volume(&self) -> f64 {
        let mut v = 1.0;
        for _ in 0..2 * self.n {
            v *= self.h;
        }
        v
    }

    /// Dirichlet value at a band node: `φ(foot) + θ·(u(anchor) − φ(anchor_foot))`.
    #[inline]
    pub fn band_value(b: &BandNode, u_anchor: f64, phi_foot: f64, phi_anchor_foot: f64) -> f64 {
        phi_foot + b.weight * (u_anchor - phi_anchor_foot)
    }
}

/// One scalar per non-exterior node, optionally stamped with a time.
#[derive(Debug, Clone)]
pub struct GridFunction {
    grid: Arc<SpaceGrid>,
    values: Vec<f64>,
    time: Option<f64>,
}

impl GridFunction {
    pub fn from_fn(grid: &Arc<SpaceGrid>, mut f: impl FnMut(&Point) -> f64) -> Self {
        let mut values = vec![f64::NAN; grid.len()];
        for &idx in grid.active() {
            values[idx] = f(&grid.coords(idx));
        }
        Self { grid: grid.clone(), values, time: None }
    }

    pub fn constant(grid: &Arc<SpaceGrid>, c: f64) -> Self {
        Self::from_fn(grid, |_| c)
    }

    /// Wraps a dense value vector (length = number of box nodes).
    pub fn from_values(grid: &Arc<SpaceGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid("value vector does not match the grid"));
        }
        Ok(Self { grid: grid.clone(), values, time: None })
    }

    pub fn with_time(mut self, t: f64) -> Self {
        self.time = Some(t);
        self
    }

    pub fn time(&self) -> Option<f64> {
        self.time
    }

    pub fn set_time(&mut self, t: Option<f64>) {
        self.time = t;
    }

    pub fn grid(&self) -> &Arc<SpaceGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn get(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    #[inline]
    pub fn set(&mut self, idx: usize, v: f64) {
        self.values[idx] = v;
    }

    pub fn is_finite(&self) -> bool {
        self.grid.active().iter().all(|&i| self.values[i].is_finite())
    }

    /// Applies `f` to every non-exterior value.
    pub fn map(&self, mut f: impl FnMut(usize, f64) -> f64) -> Self {
        let mut out = self.clone();
        for &i in self.grid.active() {
            out.values[i] = f(i, self.values[i]);
        }
        out
    }

    /// Pointwise combination with another function on the same grid.
    pub fn zip(&self, other: &Self, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut out = self.clone();
        for &i in self.grid.active() {
            out.values[i] = f(self.values[i], other.values[i]);
        }
        out
    }

    pub fn max(&self) -> f64 {
        self.grid.active().iter().map(|&i| self.values[i]).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.grid.active().iter().map(|&i| self.values[i]).fold(f64::INFINITY, f64::min)
    }

    pub fn sup_norm(&self) -> f64 {
        self.grid.active().iter().map(|&i| abs(self.values[i])).fold(0.0, f64::max)
    }

    /// `max |self − other|` over non-exterior nodes.
    pub fn sup_distance(&self, other: &Self) -> f64 {
        self.grid.active().iter().map(|&i| abs(self.values[i] - other.values[i])).fold(0.0, f64::max)
    }

    /// `max (self − other)` over the given nodes.
    pub fn max_excess_on(&self, other: &Self, nodes: impl Iterator<Item = usize>) -> f64 {
        nodes.map(|i| self.values[i] - other.values[i]).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// A domain, its grid and the operator built on it.
#[derive(Clone, Debug)]
pub struct Discretization {
    pub domain: DomainSpec,
    pub grid: Arc<SpaceGrid>,
    pub op: Arc<MongeAmpere>,
}

impl Discretization {
    pub fn new(domain: DomainSpec, h: f64, frames: FrameSet, penalty: f64) -> Result<Self> {
        let grid = Arc::new(SpaceGrid::build(&domain, h, &frames)?);
        let op = Arc::new(MongeAmpere::new(&grid, frames, penalty)?);
        Ok(Self { domain, grid, op })
    }

    /// Default frames (`K = 16` for `n = 2`) and penalty.
    pub fn with_defaults(domain: DomainSpec, h: f64) -> Result<Self> {
        let frames = FrameSet::lattice(domain.dim(), tol::DEFAULT_FRAMES)?;
        Self::new(domain, h, frames, tol::PENALTY)
    }

    pub fn h(&self) -> f64 {
        self.grid.h()
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn sample(&self, f: impl FnMut(&Point) -> f64) -> GridFunction {
        GridFunction::from_fn(&self.grid, f)
    }

    /// Samples `f` and then overwrites band nodes with the Dirichlet rule for
    /// boundary data `phi`.
    pub fn sample_with_boundary(&self, f: impl FnMut(&Point) -> f64, phi: impl Fn(&Point) -> f64) -> GridFunction {
        let mut u = self.sample(f);
        self.impose_boundary(&mut u, phi);
        u
    }

    /// Overwrites band nodes with the Dirichlet rule for boundary data `phi`.
    pub fn impose_boundary(&self, u: &mut GridFunction, phi: impl Fn(&Point) -> f64) {
        for b in self.grid.band() {
            let v = SpaceGrid::band_value(b, u.get(b.anchor), phi(&b.foot), phi(&b.anchor_foot));
            u.set(b.node, v);
        }
    }

    /// Diameter of the bounding box.
    /// Largest distance between boundary feet, by two farthest-point passes.
    pub fn diameter(&self) -> f64 {
        let band = self.grid.band();
        let Some(first) = band.first() else { return 0.0 };
        let far = |p: &Point| {
            band.iter().map(|b| (dist(p, &b.foot), b.foot)).fold((0.0, *p), |a, b| if b.0 > a.0 { b } else { a })
        };
        let (_, a) = far(&first.foot);
        far(&a).0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disc_count(h: f64, c: f64) -> usize {
        let k = (1.0 / h).ceil() as i64 + 1;
        let mut count = 0;
        for i in -k..=k {
            for j in -k..=k {
                let (x, y) = (i as f64 * h, j as f64 * h);
                if x * x + y * y - 1.0 < -c * h {
                    count += 1;
                }
            }
        }
        count
    }

    #[test]
    fn interior_count_matches_enumeration() {
        let dom = DomainSpec::ball(1, 1.0).unwrap();
        let g = SpaceGrid::build(&dom, 0.1, &FrameSet::axis(1).unwrap()).unwrap();
        // Quarter-Laplacian radius 1, |∇ρ| ≤ 2 on the unit disc.
        assert_eq!(g.band_constant(), 2.0);
        assert_eq!(g.interior().len(), disc_count(0.1, 2.0));
    }

    #[test]
    fn too_coarse_and_empty() {
        let dom = DomainSpec::ball(1, 1.0).unwrap();
        let fs = FrameSet::axis(1).unwrap();
        assert!(matches!(SpaceGrid::build(&dom, 3.0, &fs), Err(Error::GridTooCoarse { .. })));
        let empty = DomainSpec::from_fn(1, "empty", |x| x[0] * x[0] + x[1] * x[1] + 1.0, [-1.0; 4], [1.0; 4]).unwrap();
        assert!(matches!(SpaceGrid::build(&empty, 0.1, &fs), Err(Error::DegenerateDomain)));
    }

    #[test]
    fn interior_stencils_close() {
        let dom = DomainSpec::ball(2, 1.0).unwrap();
        let fs = FrameSet::lattice(2, 16).unwrap();
        let g = SpaceGrid::build(&dom, 0.2, &fs).unwrap();
        for &i in g.interior() {
            for d in fs.directions() {
                for off in [d.offset, d.offset_i] {
                    for s in [1, -1] {
                        let j = g.shift(i, &off, s).unwrap();
                        assert_ne!(g.class(j), NodeClass::Exterior);
                    }
                }
            }
        }
    }

    #[test]
    fn band_weights_and_feet() {
        let dom = DomainSpec::ball(1, 1.0).unwrap();
        let g = SpaceGrid::build(&dom, 0.05, &FrameSet::axis(1).unwrap()).unwrap();
        for b in g.band() {
            assert!((dom.rho(&b.foot)).abs() < 1e-10);
            assert!((0.0..=1.0).contains(&b.weight));
            assert_eq!(g.class(b.anchor), NodeClass::Interior);
            assert!(dist(&g.coords(b.anchor), &g.coords(b.node)) < 6.0 * 0.05);
        }
    }
}
