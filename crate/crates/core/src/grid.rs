//! Rectangular lattices over a box or over a graph-bounded subdomain, with
//! membership masks, quadrature weights and boundary samples.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Subdomain;

pub const MAX_DIM: usize = 3;

/// Points are stored padded to three coordinates; only the first `dim` are used.
pub type Point = [f64; MAX_DIM];

pub fn point_from(s: &[f64]) -> Point {
    let mut p = [0.0; MAX_DIM];
    p[..s.len()].copy_from_slice(s);
    p
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Boundary sheet of a region: `Gamma1` lies on the observed boundary,
/// `Gamma2` is everything else.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sheet {
    Gamma1,
    Gamma2,
}

impl Sheet {
    pub fn name(self) -> &'static str {
        match self {
            Sheet::Gamma1 => "gamma1",
            Sheet::Gamma2 => "gamma2",
        }
    }
}

/// A boundary sample with outward unit normal and surface quadrature weight.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub x: Point,
    pub normal: Point,
    pub weight: f64,
    pub sheet: Sheet,
}

/// One face of a box, `x_axis = lo` (`upper = false`) or `x_axis = hi`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Face {
    pub axis: usize,
    pub upper: bool,
}

#[derive(Clone, Debug)]
pub enum Region {
    /// The whole box; faces listed in `observed` form `Gamma1`.
    Box {
        lo: Point,
        hi: Point,
        observed: Vec<Face>,
    },
    Graph(Arc<Subdomain>),
}

/// Up to `2^dim` interpolation nodes with weights.
#[derive(Clone, Copy, Debug)]
pub struct Stencil {
    pub idx: [usize; 8],
    pub w: [f64; 8],
    pub len: usize,
}

impl Stencil {
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.len).map(move |k| (self.idx[k], self.w[k]))
    }
}

#[derive(Clone, Debug)]
pub struct Grid {
    dim: usize,
    lo: Point,
    spacing: Point,
    shape: [usize; MAX_DIM],
    strides: [usize; MAX_DIM],
    mask: Vec<bool>,
    weights: Vec<f64>,
    region: Region,
    boundary: Vec<BoundaryPoint>,
}

fn trapezoid(n: usize, h: f64, i: usize) -> f64 {
    if n == 1 {
        1.0
    } else if i == 0 || i == n - 1 {
        0.5 * h
    } else {
        h
    }
}

impl Grid {
    /// Uniform lattice on the box `[lo, hi]` with `cells[k]` intervals per
    /// axis. The upper face of the last axis is the observed face.
    pub fn boxed(lo: &[f64], hi: &[f64], cells: &[usize]) -> Result<Self> {
        let dim = lo.len();
        let observed = vec![Face {
            axis: dim.saturating_sub(1),
            upper: true,
        }];
        Self::boxed_with_faces(lo, hi, cells, &observed)
    }

    pub fn boxed_with_faces(
        lo: &[f64],
        hi: &[f64],
        cells: &[usize],
        observed: &[Face],
    ) -> Result<Self> {
        let dim = lo.len();
        if !(1..=MAX_DIM).contains(&dim) || hi.len() != dim || cells.len() != dim {
            return Err(Error::Parameter(format!(
                "box needs matching lo/hi/cells of dimension 1..=3, got {}/{}/{}",
                lo.len(),
                hi.len(),
                cells.len()
            )));
        }
        for k in 0..dim {
            if !(hi[k] > lo[k]) || cells[k] < 2 {
                return Err(Error::Parameter(format!(
                    "axis {k}: need hi > lo and at least 2 cells"
                )));
            }
        }
        if let Some(f) = observed.iter().find(|f| f.axis >= dim) {
            return Err(Error::Parameter(format!("observed face on axis {}", f.axis)));
        }
        let mut grid = Self::lattice(lo, hi, cells);
        let n = grid.len();
        grid.mask = vec![true; n];
        grid.weights = (0..n)
            .map(|i| {
                let m = grid.multi_index(i);
                (0..dim)
                    .map(|k| trapezoid(grid.shape[k], grid.spacing[k], m[k]))
                    .product()
            })
            .collect();
        grid.region = Region::Box {
            lo: point_from(lo),
            hi: point_from(hi),
            observed: observed.to_vec(),
        };
        grid.boundary = grid.box_faces(observed);
        Ok(grid)
    }

    fn lattice(lo: &[f64], hi: &[f64], cells: &[usize]) -> Self {
        let dim = lo.len();
        let mut shape = [1; MAX_DIM];
        let mut spacing = [1.0; MAX_DIM];
        for k in 0..dim {
            shape[k] = cells[k] + 1;
            spacing[k] = (hi[k] - lo[k]) / cells[k] as f64;
        }
        let mut strides = [0; MAX_DIM];
        let mut s = 1;
        for k in (0..dim).rev() {
            strides[k] = s;
            s *= shape[k];
        }
        Self {
            dim,
            lo: point_from(lo),
            spacing,
            shape,
            strides,
            mask: Vec::new(),
            weights: Vec::new(),
            region: Region::Box {
                lo: point_from(lo),
                hi: point_from(hi),
                observed: Vec::new(),
            },
            boundary: Vec::new(),
        }
    }

    fn box_faces(&self, observed: &[Face]) -> Vec<BoundaryPoint> {
        let dim = self.dim;
        let mut out = Vec::new();
        for axis in 0..dim {
            for upper in [false, true] {
                let face = Face { axis, upper };
                let sheet = if observed.contains(&face) {
                    Sheet::Gamma1
                } else {
                    Sheet::Gamma2
                };
                let fixed = if upper { self.shape[axis] - 1 } else { 0 };
                let mut normal = [0.0; MAX_DIM];
                normal[axis] = if upper { 1.0 } else { -1.0 };
                for i in 0..self.len() {
                    let m = self.multi_index(i);
                    if m[axis] != fixed {
                        continue;
                    }
                    let weight = (0..dim)
                        .filter(|&k| k != axis)
                        .map(|k| trapezoid(self.shape[k], self.spacing[k], m[k]))
                        .product();
                    out.push(BoundaryPoint {
                        x: self.node(i),
                        normal,
                        weight,
                        sheet,
                    });
                }
            }
        }
        out
    }

    /// Lattice over the bounding box of a subdomain with `cells` intervals
    /// per axis; nodes outside the closure are masked out and the quadrature
    /// weights are column-wise clipped dual cells.
    pub fn for_subdomain(sub: Arc<Subdomain>, cells: usize) -> Result<Self> {
        let dim = sub.dim();
        if cells < 2 {
            return Err(Error::Parameter("need at least 2 cells per axis".into()));
        }
        let (lo, hi) = sub.bounding_box();
        let mut grid = Self::lattice(&lo, &hi, &vec![cells; dim]);
        let n = grid.len();
        let hz = grid.spacing[dim - 1];
        let slack = 1e-9 * hz;
        grid.mask = (0..n).map(|i| sub.contains(&grid.node(i), slack)).collect();
        grid.weights = vec![0.0; n];
        let nz = grid.shape[dim - 1];
        let columns = n / nz;
        for col in 0..columns {
            let base = col * nz;
            let x = grid.node(base);
            let xp = &x[..dim - 1];
            if dim > 1 && norm(xp) > sub.rho1 {
                continue;
            }
            let a = sub.inner_height(xp).min(sub.outer_height(xp));
            let b = sub.inner_height(xp).max(sub.outer_height(xp));
            let tangential: f64 = (0..dim - 1)
                .map(|k| {
                    let m = grid.multi_index(base);
                    trapezoid(grid.shape[k], grid.spacing[k], m[k])
                })
                .product();
            let active: Vec<usize> = (0..nz).filter(|&j| grid.mask[base + j]).collect();
            for (pos, &j) in active.iter().enumerate() {
                let z = grid.lo[dim - 1] + hz * j as f64;
                let lower = if pos == 0 { a } else { (z - 0.5 * hz).max(a) };
                let upper = if pos + 1 == active.len() {
                    b
                } else {
                    (z + 0.5 * hz).min(b)
                };
                grid.weights[base + j] = tangential * (upper - lower).max(0.0);
            }
        }
        if !grid.mask.iter().any(|&m| m) {
            return Err(Error::Resolution(
                "no lattice node falls inside the subdomain".into(),
            ));
        }
        grid.boundary = sub.boundary();
        grid.region = Region::Graph(sub);
        Ok(grid)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.shape[..self.dim].iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape[..self.dim]
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing[..self.dim]
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacing().iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo[..self.dim]
    }

    pub fn hi(&self) -> Point {
        let mut hi = self.lo;
        for k in 0..self.dim {
            hi[k] += self.spacing[k] * (self.shape[k] - 1) as f64;
        }
        hi
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides[..self.dim]
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn subdomain(&self) -> Option<&Arc<Subdomain>> {
        match &self.region {
            Region::Graph(s) => Some(s),
            Region::Box { .. } => None,
        }
    }

    pub fn index(&self, m: &[usize]) -> usize {
        m.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn multi_index(&self, mut idx: usize) -> [usize; MAX_DIM] {
        let mut m = [0; MAX_DIM];
        for k in 0..self.dim {
            m[k] = idx / self.strides[k];
            idx %= self.strides[k];
        }
        m
    }

    pub fn node(&self, idx: usize) -> Point {
        let m = self.multi_index(idx);
        let mut x = [0.0; MAX_DIM];
        for k in 0..self.dim {
            x[k] = self.lo[k] + self.spacing[k] * m[k] as f64;
        }
        x
    }

    pub fn active(&self, idx: usize) -> bool {
        self.mask[idx]
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn active_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&i| self.mask[i])
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Quadrature volume of the region.
    pub fn measure(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn boundary(&self) -> &[BoundaryPoint] {
        &self.boundary
    }

    /// Neighbor of `idx` shifted by `step` along `axis`, if it exists and is active.
    pub fn neighbor(&self, idx: usize, axis: usize, step: isize) -> Option<usize> {
        let m = self.multi_index(idx)[axis] as isize + step;
        if m < 0 || m >= self.shape[axis] as isize {
            return None;
        }
        let j = (idx as isize + step * self.strides[axis] as isize) as usize;
        self.mask[j].then_some(j)
    }

    /// Closure membership with absolute slack.
    pub fn contains(&self, x: &[f64], slack: f64) -> bool {
        match &self.region {
            Region::Box { lo, hi, .. } => {
                (0..self.dim).all(|k| x[k] >= lo[k] - slack && x[k] <= hi[k] + slack)
            }
            Region::Graph(s) => s.contains(x, slack),
        }
    }

    /// Sheet through which a point on (or just across) the boundary leaves.
    pub fn exit_sheet(&self, x: &[f64]) -> Sheet {
        match &self.region {
            Region::Box { lo, hi, observed } => {
                let mut best = (f64::INFINITY, Face { axis: 0, upper: false });
                for k in 0..self.dim {
                    let scale = hi[k] - lo[k];
                    for (upper, d) in [(false, lo[k] - x[k]), (true, x[k] - hi[k])] {
                        // most violated (or closest) face, relative to box size
                        let key = -d / scale;
                        if key < best.0 {
                            best = (key, Face { axis: k, upper });
                        }
                    }
                }
                if observed.contains(&best.1) {
                    Sheet::Gamma1
                } else {
                    Sheet::Gamma2
                }
            }
            Region::Graph(s) => s.sheet_of(x),
        }
    }

    pub fn diameter(&self) -> f64 {
        match &self.region {
            Region::Box { lo, hi, .. } => {
                (0..self.dim).map(|k| (hi[k] - lo[k]).powi(2)).sum::<f64>().sqrt()
            }
            Region::Graph(s) => s.diam,
        }
    }

    /// Multilinear interpolation stencil. Points up to half a cell outside
    /// the lattice are clamped; masked-out corners are dropped and the rest
    /// renormalized. `None` when no active corner remains.
    pub fn stencil(&self, x: &[f64]) -> Option<Stencil> {
        let dim = self.dim;
        let mut base = [0usize; MAX_DIM];
        let mut frac = [0.0; MAX_DIM];
        for k in 0..dim {
            let s = (x[k] - self.lo[k]) / self.spacing[k];
            let last = (self.shape[k] - 1) as f64;
            if !(s >= -0.5 && s <= last + 0.5) {
                return None;
            }
            let s = s.clamp(0.0, last);
            let i = (s.floor() as usize).min(self.shape[k] - 2);
            base[k] = i;
            frac[k] = s - i as f64;
        }
        let mut st = Stencil {
            idx: [0; 8],
            w: [0.0; 8],
            len: 0,
        };
        let mut total = 0.0;
        for corner in 0..(1usize << dim) {
            let mut idx = 0;
            let mut w = 1.0;
            for k in 0..dim {
                let bit = (corner >> k) & 1;
                idx += (base[k] + bit) * self.strides[k];
                w *= if bit == 1 { frac[k] } else { 1.0 - frac[k] };
            }
            if w == 0.0 || !self.mask[idx] {
                continue;
            }
            st.idx[st.len] = idx;
            st.w[st.len] = w;
            st.len += 1;
            total += w;
        }
        if st.len == 0 {
            // every weighted corner is masked; fall back to the nearest active corner
            let mut best: Option<(f64, usize)> = None;
            for corner in 0..(1usize << dim) {
                let mut idx = 0;
                let mut d = 0.0;
                for k in 0..dim {
                    let bit = (corner >> k) & 1;
                    idx += (base[k] + bit) * self.strides[k];
                    d += (frac[k] - bit as f64).powi(2);
                }
                if self.mask[idx] && best.is_none_or(|b| d < b.0) {
                    best = Some((d, idx));
                }
            }
            let (_, idx) = best?;
            st.idx[0] = idx;
            st.w[0] = 1.0;
            st.len = 1;
            return Some(st);
        }
        for w in &mut st.w[..st.len] {
            *w /= total;
        }
        Some(st)
    }

    /// Same lattice geometry at a refined resolution: each axis gets
    /// `factor` times as many cells.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        let cells: Vec<usize> = self.shape().iter().map(|s| (s - 1) * factor).collect();
        match &self.region {
            Region::Box { lo, hi, observed } => {
                Self::boxed_with_faces(&lo[..self.dim], &hi[..self.dim], &cells, observed)
            }
            Region::Graph(s) => Self::for_subdomain(s.clone(), cells[0]),
        }
    }
}
