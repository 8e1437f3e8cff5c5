//! Complex directions and unitary frames for the wide stencil.
//!
//! Every direction is generated by an integer vector `g = (a, b, c, d)`,
//! i.e. `v = (a + ib, c + id)/|g|`. Both `v` and `i·v` then land on lattice
//! points at distance `|g|·h`, so no interpolation is needed and the
//! stencil stays exact on Hermitian quadratics.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::sqrt;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ComplexDirection {
    /// Unit vector in real coordinates `(Re v₁, Im v₁, Re v₂, Im v₂)`.
    pub v: [f64; 4],
    /// Lattice offset realizing `|g|·v`.
    pub offset: [i32; 4],
    /// Lattice offset realizing `|g|·i·v`.
    pub offset_i: [i32; 4],
    /// `|g|`: the step along `v` is `length · h`.
    pub length: f64,
}

fn times_i(g: [i32; 4]) -> [i32; 4] {
    [-g[1], g[0], -g[3], g[2]]
}

/// Generator of the orthogonal complement `(−q̄, p̄)` of `(p, q)`.
fn perp(g: [i32; 4]) -> [i32; 4] {
    [-g[2], g[3], g[0], -g[1]]
}

fn len2(g: [i32; 4]) -> i64 {
    g.iter().map(|&x| (x as i64) * (x as i64)).sum()
}

/// Whether two generators span the same complex line (`p₁q₂ = p₂q₁`).
fn same_line(u: [i32; 4], w: [i32; 4]) -> bool {
    let (a, b, c, d) = (u[0] as i64, u[1] as i64, u[2] as i64, u[3] as i64);
    let (e, f, g, h) = (w[0] as i64, w[1] as i64, w[2] as i64, w[3] as i64);
    // (a+ib)(g+ih) − (e+if)(c+id)
    let re = a * g - b * h - (e * c - f * d);
    let im = a * h + b * g - (e * d + f * c);
    re == 0 && im == 0
}

impl ComplexDirection {
    pub fn from_generator(g: [i32; 4]) -> Self {
        let l = sqrt(len2(g) as f64);
        let mut v = [0.0; 4];
        for k in 0..4 {
            v[k] = g[k] as f64 / l;
        }
        Self { v, offset: g, offset_i: times_i(g), length: l }
    }

    /// `v*·w` as `(re, im)`.
    pub fn inner(&self, other: &Self) -> (f64, f64) {
        let (a, b) = (&self.v, &other.v);
        let mut re = 0.0;
        let mut im = 0.0;
        for j in 0..2 {
            let (p, q) = (a[2 * j], a[2 * j + 1]);
            let (r, s) = (b[2 * j], b[2 * j + 1]);
            // conj(p + iq)·(r + is)
            re += p * r + q * s;
            im += p * s - q * r;
        }
        (re, im)
    }

    pub fn norm(&self) -> f64 {
        sqrt(self.v.iter().map(|x| x * x).sum())
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FrameSet {
    n: usize,
    frames: Vec<Vec<ComplexDirection>>,
}

impl FrameSet {
    /// The single axis frame `(e₁, …, eₙ)`.
    pub fn axis(n: usize) -> Result<Self> {
        match n {
            1 => Ok(Self { n, frames: vec![vec![ComplexDirection::from_generator([1, 0, 0, 0])]] }),
            2 => Ok(Self {
                n,
                frames: vec![vec![
                    ComplexDirection::from_generator([1, 0, 0, 0]),
                    ComplexDirection::from_generator([0, 0, 1, 0]),
                ]],
            }),
            _ => Err(Error::invalid("frames exist for n = 1, 2 only")),
        }
    }

    /// Up to `count` lattice-generated frames, shortest stencils first. For
    /// `n = 1` there is only the axis direction and `count` is ignored.
    pub fn lattice(n: usize, count: usize) -> Result<Self> {
        if n == 1 {
            return Self::axis(1);
        }
        if n != 2 {
            return Err(Error::invalid("frames exist for n = 1, 2 only"));
        }
        if count == 0 {
            return Err(Error::invalid("frame count must be positive"));
        }
        let frames = generator_pairs(3)
            .into_iter()
            .take(count)
            .map(|(a, b)| vec![ComplexDirection::from_generator(a), ComplexDirection::from_generator(b)])
            .collect();
        Ok(Self { n, frames })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frames(&self) -> &[Vec<ComplexDirection>] {
        &self.frames
    }

    pub fn directions(&self) -> impl Iterator<Item = &ComplexDirection> {
        self.frames.iter().flatten()
    }

    /// Widest stencil reach in grid units.
    pub fn radius(&self) -> f64 {
        self.directions().map(|d| d.length).fold(0.0, f64::max)
    }
}

/// All frames `{[g], [g]^⊥}` with generator entries in `[−r, r]`, sorted by
/// the longer generator, then the shorter one, then lexicographically.
/// Each complex line is represented by its shortest generator.
fn generator_pairs(r: i32) -> Vec<([i32; 4], [i32; 4])> {
    let mut all = Vec::new();
    for a in -r..=r {
        for b in -r..=r {
            for c in -r..=r {
                for d in -r..=r {
                    if (a, b, c, d) != (0, 0, 0, 0) {
                        all.push([a, b, c, d]);
                    }
                }
            }
        }
    }
    all.sort_by(|x, y| len2(*x).cmp(&len2(*y)).then(y.cmp(x)));
    let mut reps: Vec<[i32; 4]> = Vec::new();
    for g in all {
        if !reps.iter().any(|r| same_line(*r, g)) {
            reps.push(g);
        }
    }
    let mut used = vec![false; reps.len()];
    let mut pairs = Vec::new();
    for i in 0..reps.len() {
        if used[i] {
            continue;
        }
        let w = perp(reps[i]);
        if let Some(j) = reps.iter().position(|r| same_line(*r, w)) {
            if j != i && !used[j] {
                used[i] = true;
                used[j] = true;
                pairs.push((reps[i], reps[j]));
            }
        }
    }
    pairs.sort_by(|p, q| {
        let kp = (len2(p.0).max(len2(p.1)), len2(p.0).min(len2(p.1)));
        let kq = (len2(q.0).max(len2(q.1)), len2(q.0).min(len2(q.1)));
        kp.cmp(&kq).then(q.cmp(p))
    });
    pairs
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frames_are_unitary_and_contain_axis() {
        for k in [1, 4, 16, 40] {
            let fs = FrameSet::lattice(2, k).unwrap();
            assert_eq!(fs.len(), k);
            let axis = &fs.frames()[0];
            assert_eq!(axis[0].offset, [1, 0, 0, 0]);
            assert_eq!(axis[1].offset, [0, 0, 1, 0]);
            for f in fs.frames() {
                for (j, a) in f.iter().enumerate() {
                    assert!((a.norm() - 1.0).abs() < 1e-12);
                    let dot: i32 = (0..4).map(|q| a.offset[q] * a.offset_i[q]).sum();
                    assert_eq!(dot, 0);
                    for (k, b) in f.iter().enumerate() {
                        let (re, im) = a.inner(b);
                        let want = if j == k { 1.0 } else { 0.0 };
                        assert!((re - want).abs() < 1e-12 && im.abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn frames_are_distinct_lines() {
        let fs = FrameSet::lattice(2, 40).unwrap();
        let gens: Vec<[i32; 4]> = fs.directions().map(|d| d.offset).collect();
        for i in 0..gens.len() {
            for j in 0..i {
                assert!(!same_line(gens[i], gens[j]));
            }
        }
    }

    #[test]
    fn default_radius() {
        let fs = FrameSet::lattice(2, 16).unwrap();
        assert!((fs.radius() - 6f64.sqrt()).abs() < 1e-12);
        assert_eq!(FrameSet::lattice(1, 16).unwrap().radius(), 1.0);
    }
}
