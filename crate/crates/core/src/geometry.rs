//! Boundary patches, the graph-bounded subdomain next to the observed
//! boundary, and inflow/outflow classification of its boundary sheets.
//!
//! Coordinates are split as `x = (x', x_n)`; the observed boundary is the
//! graph `x_n = ell(x')` over the ball `|x'| <= rho0`, with the origin as the
//! anchor point `x0`. The subdomain is the layer between that graph and a
//! second graph pushed inward by a cubic bump that vanishes to second order
//! on the rim `|x'| = rho1`.

use std::f64::consts::PI;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::VectorField;
use crate::grid::{norm, point_from, BoundaryPoint, Point, Sheet, MAX_DIM};

/// Closed-form height functions `ell(x')` with `ell(0) = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Height {
    Flat,
    /// `ell(x') = slope . x'`
    Linear { slope: Vec<f64> },
    /// `ell(x') = sum_i curvature_i * x'_i^2`
    Quadratic { curvature: Vec<f64> },
    /// `ell(x') = amplitude * sin(frequency * x'_1)`
    Sine { amplitude: f64, frequency: f64 },
}

impl Height {
    pub fn value(&self, xp: &[f64]) -> f64 {
        match self {
            Height::Flat => 0.0,
            Height::Linear { slope } => xp.iter().zip(slope).map(|(x, s)| x * s).sum(),
            Height::Quadratic { curvature } => {
                xp.iter().zip(curvature).map(|(x, c)| c * x * x).sum()
            }
            Height::Sine {
                amplitude,
                frequency,
            } => xp.first().map_or(0.0, |x| amplitude * (frequency * x).sin()),
        }
    }

    pub fn gradient(&self, xp: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|g| *g = 0.0);
        match self {
            Height::Flat => {}
            Height::Linear { slope } => {
                for (g, s) in out.iter_mut().zip(slope) {
                    *g = *s;
                }
            }
            Height::Quadratic { curvature } => {
                for ((g, c), x) in out.iter_mut().zip(curvature).zip(xp) {
                    *g = 2.0 * c * x;
                }
            }
            Height::Sine {
                amplitude,
                frequency,
            } => {
                if let (Some(g), Some(x)) = (out.first_mut(), xp.first()) {
                    *g = amplitude * frequency * (frequency * x).cos();
                }
            }
        }
    }

    /// Row-major `(n-1) x (n-1)` Hessian.
    pub fn hessian(&self, xp: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|h| *h = 0.0);
        let m = xp.len();
        match self {
            Height::Flat | Height::Linear { .. } => {}
            Height::Quadratic { curvature } => {
                for (i, c) in curvature.iter().enumerate().take(m) {
                    out[i * m + i] = 2.0 * c;
                }
            }
            Height::Sine {
                amplitude,
                frequency,
            } => {
                if let Some(x) = xp.first() {
                    out[0] = -amplitude * frequency * frequency * (frequency * x).sin();
                }
            }
        }
    }
}

/// The observed boundary patch `gamma0 = {x_n = ell(x'), |x'| < rho0}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundaryGraph {
    pub dim: usize,
    pub rho0: f64,
    pub height: Height,
    /// `true` when the domain lies below the graph (outward normal has a
    /// positive `x_n` component).
    pub below: bool,
}

impl BoundaryGraph {
    pub fn new(dim: usize, rho0: f64, height: Height) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::Parameter(format!("dimension {dim} not in 1..=3")));
        }
        if !(rho0 > 0.0) {
            return Err(Error::Parameter(format!("rho0 = {rho0} must be positive")));
        }
        Ok(Self {
            dim,
            rho0,
            height,
            below: true,
        })
    }

    pub fn flat(dim: usize, rho0: f64) -> Result<Self> {
        Self::new(dim, rho0, Height::Flat)
    }

    fn side(&self) -> f64 {
        if self.below {
            1.0
        } else {
            -1.0
        }
    }

    /// Boundary point `(x', ell(x'))` and the outward unit normal there.
    pub fn eval_boundary(&self, xprime: &[f64]) -> Result<(Point, Point)> {
        if xprime.len() + 1 != self.dim {
            return Err(Error::Domain(format!(
                "x' has {} coordinates, expected {}",
                xprime.len(),
                self.dim - 1
            )));
        }
        let r = norm(xprime);
        if r > self.rho0 * (1.0 + 1e-12) {
            return Err(Error::Domain(format!(
                "|x'| = {r} lies outside the base ball of radius {}",
                self.rho0
            )));
        }
        let mut grad = [0.0; MAX_DIM];
        self.height.gradient(xprime, &mut grad[..self.dim - 1]);
        let mut x = [0.0; MAX_DIM];
        x[..self.dim - 1].copy_from_slice(xprime);
        x[self.dim - 1] = self.height.value(xprime);
        Ok((x, graph_normal(&grad[..self.dim - 1], false, self.side())))
    }
}

/// Unit normal of a graph sheet. The outer sheet has direction
/// `side * (-grad, 1)`, the inner one `side * (grad, -1)`.
fn graph_normal(grad: &[f64], inner: bool, side: f64) -> Point {
    let m = grad.len();
    let scale = side / (1.0 + grad.iter().map(|g| g * g).sum::<f64>()).sqrt();
    let mut nu = [0.0; MAX_DIM];
    let sign = if inner { 1.0 } else { -1.0 };
    for i in 0..m {
        nu[i] = sign * grad[i] * scale;
    }
    nu[m] = -sign * scale;
    nu
}

/// The inner height `c * (1 - |x'|^2 / rho^2)^3` on the closed ball.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Bump {
    pub rho: f64,
    pub coeff: f64,
}

impl Bump {
    pub fn value(&self, xp: &[f64]) -> f64 {
        if xp.is_empty() {
            return self.coeff;
        }
        let q = xp.iter().map(|x| x * x).sum::<f64>() / (self.rho * self.rho);
        if q >= 1.0 {
            0.0
        } else {
            self.coeff * (1.0 - q).powi(3)
        }
    }

    pub fn gradient(&self, xp: &[f64], out: &mut [f64]) {
        let rho2 = self.rho * self.rho;
        let q = xp.iter().map(|x| x * x).sum::<f64>() / rho2;
        for (g, x) in out.iter_mut().zip(xp) {
            *g = if q >= 1.0 {
                0.0
            } else {
                -3.0 * self.coeff * (1.0 - q).powi(2) * 2.0 * x / rho2
            };
        }
    }

    pub fn hessian(&self, xp: &[f64], out: &mut [f64]) {
        let m = xp.len();
        let rho2 = self.rho * self.rho;
        let q = xp.iter().map(|x| x * x).sum::<f64>() / rho2;
        for i in 0..m {
            for j in 0..m {
                out[i * m + j] = if q >= 1.0 {
                    0.0
                } else {
                    let diag = if i == j { 1.0 } else { 0.0 };
                    24.0 * self.coeff * (1.0 - q) * xp[i] * xp[j] / (rho2 * rho2)
                        - 6.0 * self.coeff * (1.0 - q).powi(2) * diag / rho2
                };
            }
        }
    }
}

/// Sup-norm `C^2` size of a function on the ball `|x'| <= rho` in `R^m`:
/// the largest of `|f|`, `|d_i f|`, `|d_i d_j f|` over a dense sample.
fn c2_norm_on_ball<F>(m: usize, rho: f64, samples: usize, mut f: F) -> f64
where
    F: FnMut(&[f64], &mut [f64], &mut [f64]) -> f64,
{
    let mut grad = [0.0; MAX_DIM];
    let mut hess = [0.0; MAX_DIM * MAX_DIM];
    let mut best = 0.0f64;
    let mut visit = |xp: &[f64]| {
        let v = f(xp, &mut grad[..m], &mut hess[..m * m]);
        best = best.max(v.abs());
        grad[..m].iter().for_each(|g| best = best.max(g.abs()));
        hess[..m * m].iter().for_each(|h| best = best.max(h.abs()));
    };
    match m {
        0 => visit(&[]),
        1 => {
            for i in 0..samples {
                let x = -rho + 2.0 * rho * i as f64 / (samples - 1) as f64;
                visit(&[x]);
            }
        }
        _ => {
            for i in 0..samples {
                for j in 0..samples {
                    let x = -rho + 2.0 * rho * i as f64 / (samples - 1) as f64;
                    let y = -rho + 2.0 * rho * j as f64 / (samples - 1) as f64;
                    if x * x + y * y <= rho * rho {
                        visit(&[x, y]);
                    }
                }
            }
        }
    }
    best
}

/// Build-time options for [`construct_subdomain`].
#[derive(Clone, Debug)]
pub struct SubdomainOptions {
    /// Boundary samples per tangential axis (per radius in 3-D).
    pub samples: usize,
    /// Smallest acceptable `rho1`.
    pub min_rho1: f64,
    /// `(T, beta)` when the subdomain is meant for a time horizon; enables
    /// the full eps condition.
    pub horizon: Option<(f64, f64)>,
}

impl Default for SubdomainOptions {
    fn default() -> Self {
        Self {
            samples: 201,
            min_rho1: 1e-9,
            horizon: None,
        }
    }
}

/// The layer `D = {ell - bump < x_n < ell, |x'| < rho1}` with its sampled
/// outer sheet `gamma1` (on the observed boundary) and inner sheet `gamma2`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Subdomain {
    pub base: BoundaryGraph,
    pub rho1: f64,
    pub bump: Bump,
    /// Largest admissible rho (before shrinking to reach the target diameter).
    pub rho_max: f64,
    /// Lemma radius: the diameter reached at `rho_max`.
    pub r: f64,
    pub diam: f64,
    pub delta0: f64,
    pub m: f64,
    /// Sup-norm `C^2` size of the bump on the closed ball.
    pub bump_c2: f64,
    /// Sup-norm `C^2` size of `ell - bump` on the closed ball.
    pub inner_c2: f64,
    pub gamma1: Vec<BoundaryPoint>,
    pub gamma2: Vec<BoundaryPoint>,
}

impl Subdomain {
    pub fn dim(&self) -> usize {
        self.base.dim
    }

    fn side(&self) -> f64 {
        self.base.side()
    }

    /// Height of the inner sheet `ell - side * bump`.
    pub fn inner_height(&self, xp: &[f64]) -> f64 {
        self.base.height.value(xp) - self.side() * self.bump.value(xp)
    }

    pub fn outer_height(&self, xp: &[f64]) -> f64 {
        self.base.height.value(xp)
    }

    /// Closure membership with an absolute slack.
    pub fn contains(&self, x: &[f64], slack: f64) -> bool {
        let n = self.dim();
        let xp = &x[..n - 1];
        if norm(xp) > self.rho1 + slack && n > 1 {
            return false;
        }
        let depth = self.side() * (self.base.height.value(xp) - x[n - 1]);
        depth >= -slack && depth <= self.bump.value(xp) + slack
    }

    /// Sheet nearest to a boundary point.
    pub fn sheet_of(&self, x: &[f64]) -> Sheet {
        let n = self.dim();
        let xp = &x[..n - 1];
        let d_outer = (x[n - 1] - self.outer_height(xp)).abs();
        let d_inner = (x[n - 1] - self.inner_height(xp)).abs();
        if d_outer <= d_inner {
            Sheet::Gamma1
        } else {
            Sheet::Gamma2
        }
    }

    /// Outward normal of the given sheet above `x'`.
    pub fn normal(&self, sheet: Sheet, xp: &[f64]) -> Point {
        let m = xp.len();
        let mut g = [0.0; MAX_DIM];
        self.base.height.gradient(xp, &mut g[..m]);
        match sheet {
            Sheet::Gamma1 => graph_normal(&g[..m], false, self.side()),
            Sheet::Gamma2 => {
                let mut b = [0.0; MAX_DIM];
                self.bump.gradient(xp, &mut b[..m]);
                for i in 0..m {
                    g[i] -= self.side() * b[i];
                }
                graph_normal(&g[..m], true, self.side())
            }
        }
    }

    /// Axis-aligned bounding box of the closure.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.dim();
        let mut lo = vec![-self.rho1; n];
        let mut hi = vec![self.rho1; n];
        let (mut zmin, mut zmax) = (f64::INFINITY, f64::NEG_INFINITY);
        for p in self.gamma1.iter().chain(&self.gamma2) {
            zmin = zmin.min(p.x[n - 1]);
            zmax = zmax.max(p.x[n - 1]);
        }
        lo[n - 1] = zmin;
        hi[n - 1] = zmax;
        (lo, hi)
    }

    /// All boundary samples, outer sheet first.
    pub fn boundary(&self) -> Vec<BoundaryPoint> {
        self.gamma1.iter().chain(&self.gamma2).cloned().collect()
    }

    /// Structured-text (JSON) document of the subdomain.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// CSV with columns `sheet, x1.., nu1.., flux`; flux is `H . nu` when a
    /// field is given and empty otherwise.
    pub fn write_csv(&self, path: &Path, h: Option<&VectorField>) -> Result<()> {
        let n = self.dim();
        let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
        let mut header = vec!["sheet".to_string()];
        header.extend((1..=n).map(|i| format!("x{i}")));
        header.extend((1..=n).map(|i| format!("nu{i}")));
        header.push("flux".into());
        w.write_record(&header)?;
        for p in self.gamma1.iter().chain(&self.gamma2) {
            let mut row = vec![p.sheet.name().to_string()];
            row.extend(p.x[..n].iter().map(|v| format!("{v:.17e}")));
            row.extend(p.normal[..n].iter().map(|v| format!("{v:.17e}")));
            row.push(match h {
                Some(h) => format!("{:.17e}", h.flux(&p.x, &p.normal)),
                None => String::new(),
            });
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Sup-norm C^2 size of the unit bump `(1 - |x'|^2/rho^2)^3` in `R^m`.
fn unit_bump_c2(m: usize, rho: f64, samples: usize) -> f64 {
    let unit = Bump { rho, coeff: 1.0 };
    c2_norm_on_ball(m, rho, samples, |xp, g, h| {
        unit.gradient(xp, g);
        unit.hessian(xp, h);
        unit.value(xp)
    })
}

/// Tangential sample points `x'` with quadrature weights on the closed ball.
fn ball_samples(m: usize, rho: f64, samples: usize) -> Vec<(Point, f64)> {
    match m {
        0 => vec![([0.0; MAX_DIM], 1.0)],
        1 => {
            let k = samples.max(3);
            let dx = 2.0 * rho / (k - 1) as f64;
            (0..k)
                .map(|i| {
                    let w = if i == 0 || i == k - 1 { 0.5 * dx } else { dx };
                    ([-rho + dx * i as f64, 0.0, 0.0], w)
                })
                .collect()
        }
        _ => {
            let nr = (samples / 2).max(3);
            let nt = (2 * samples).max(16);
            let dr = rho / (nr - 1) as f64;
            let dt = 2.0 * PI / nt as f64;
            let mut out = vec![([0.0; MAX_DIM], 0.0)];
            for i in 1..nr {
                let r = dr * i as f64;
                let wr = if i == nr - 1 { 0.5 * dr } else { dr };
                for j in 0..nt {
                    let th = dt * j as f64;
                    out.push(([r * th.cos(), r * th.sin(), 0.0], wr * r * dt));
                }
            }
            out
        }
    }
}

struct Candidate {
    bump: Bump,
    gamma1: Vec<BoundaryPoint>,
    gamma2: Vec<BoundaryPoint>,
    diam: f64,
}

fn build_candidate(patch: &BoundaryGraph, rho: f64, coeff: f64, samples: usize) -> Candidate {
    let n = patch.dim;
    let m = n - 1;
    let bump = Bump { rho, coeff };
    let side = patch.side();
    let mut gamma1 = Vec::new();
    let mut gamma2 = Vec::new();
    for (xp, w) in ball_samples(m, rho, samples) {
        let xp = &xp[..m];
        let mut g = [0.0; MAX_DIM];
        patch.height.gradient(xp, &mut g[..m]);
        let area = (1.0 + g[..m].iter().map(|v| v * v).sum::<f64>()).sqrt();
        let mut x = [0.0; MAX_DIM];
        x[..m].copy_from_slice(xp);
        x[m] = patch.height.value(xp);
        gamma1.push(BoundaryPoint {
            x,
            normal: graph_normal(&g[..m], false, side),
            weight: w * area,
            sheet: Sheet::Gamma1,
        });
        let mut b = [0.0; MAX_DIM];
        bump.gradient(xp, &mut b[..m]);
        for i in 0..m {
            g[i] -= side * b[i];
        }
        let area = (1.0 + g[..m].iter().map(|v| v * v).sum::<f64>()).sqrt();
        let mut y = x;
        y[m] -= side * bump.value(xp);
        gamma2.push(BoundaryPoint {
            x: y,
            normal: graph_normal(&g[..m], true, side),
            weight: w * area,
            sheet: Sheet::Gamma2,
        });
    }
    let diam = sampled_diameter(n, gamma1.iter().chain(&gamma2).map(|p| &p.x));
    Candidate {
        bump,
        gamma1,
        gamma2,
        diam,
    }
}

fn sampled_diameter<'a, I: Iterator<Item = &'a Point>>(n: usize, pts: I) -> f64 {
    let pts: Vec<&Point> = pts.collect();
    let mut best = 0.0f64;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let d: f64 = (0..n).map(|k| (pts[i][k] - pts[j][k]).powi(2)).sum();
            best = best.max(d);
        }
    }
    best.sqrt()
}

fn dist(n: usize, a: &Point, b: &Point) -> f64 {
    (0..n).map(|k| (a[k] - b[k]).powi(2)).sum::<f64>().sqrt()
}

/// Worst-case flux bounds over all fields with `|H| <= M`, Lipschitz
/// constant `M` and `H(0) . nu(0) > delta0`:
/// returns `(max over gamma1 of M|x| + M|nu(x) - nu(0)|,
///           max over gamma2 of min over rim y of M|nu(x) - nu(y)| + M|x - y|)`.
fn certified_losses(n: usize, m_bound: f64, c: &Candidate) -> (f64, f64) {
    let origin = c
        .gamma1
        .iter()
        .min_by(|a, b| norm(&a.x[..n]).total_cmp(&norm(&b.x[..n])))
        .expect("nonempty sheet");
    let nu0 = origin.normal;
    let loss1 = c
        .gamma1
        .iter()
        .map(|p| m_bound * norm(&p.x[..n]) + m_bound * dist(n, &p.normal, &nu0))
        .fold(0.0, f64::max);
    if n == 1 {
        // gamma2 is the single point -c*side; the rim is the anchor itself.
        let loss2 = m_bound * dist(n, &c.gamma2[0].x, &origin.x);
        return (loss1, loss2);
    }
    let rho = c.bump.rho;
    let rim: Vec<&BoundaryPoint> = c
        .gamma1
        .iter()
        .filter(|p| (norm(&p.x[..n - 1]) - rho).abs() <= 1e-12 * rho.max(1.0))
        .collect();
    let loss2 = c
        .gamma2
        .iter()
        .map(|p| {
            rim.iter()
                .map(|y| {
                    // nu_gamma2(y) = -nu_gamma1(y) on the rim
                    let mut ny = y.normal;
                    ny.iter_mut().for_each(|v| *v = -*v);
                    m_bound * dist(n, &p.normal, &ny) + m_bound * dist(n, &p.x, &y.x)
                })
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max);
    (loss1, loss2)
}

/// Construct the subdomain with diameter below `eps` on which every
/// admissible field has flux `> delta0/2` through `gamma1` and
/// `<= -delta0/4` through `gamma2`.
pub fn construct_subdomain(
    patch: &BoundaryGraph,
    delta0: f64,
    m_bound: f64,
    eps: f64,
    opts: &SubdomainOptions,
) -> Result<Subdomain> {
    if !(delta0 > 0.0 && m_bound > 0.0 && eps > 0.0) {
        return Err(Error::Parameter(
            "delta0, M and eps must all be positive".into(),
        ));
    }
    if delta0 >= m_bound {
        return Err(Error::Parameter(format!(
            "delta0 = {delta0} must be below M = {m_bound} for the admissible set to be nonempty"
        )));
    }
    let n = patch.dim;
    let samples = opts.samples.max(11);
    let target = 0.99 * eps;

    if n == 1 {
        // D = (-c, 0): flux margins need c <= 3 delta0 / (4M), C^2 needs c <= delta0/M.
        let r = 0.75 * delta0 / m_bound;
        check_eps(eps, r, delta0, m_bound, opts)?;
        let coeff = target.min(r);
        let c = build_candidate(patch, patch.rho0, coeff, samples);
        return Ok(finish(patch, c, r, patch.rho0, delta0, m_bound, 1.0, samples));
    }

    let m = n - 1;
    let coeff_for = |rho: f64| delta0 / (m_bound * unit_bump_c2(m, rho, 101));
    let certify = |rho: f64| -> (bool, Candidate) {
        let c = build_candidate(patch, rho, coeff_for(rho), samples);
        let (l1, l2) = certified_losses(n, m_bound, &c);
        (l1 < 0.5 * delta0 && l2 <= 0.25 * delta0, c)
    };

    let start = 0.999 * patch.rho0.min(1.0);
    let rho_max = if certify(start).0 {
        start
    } else {
        let (mut lo, mut hi) = (0.0, start);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if certify(mid).0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    if rho_max < opts.min_rho1 {
        return Err(Error::Resolution(format!(
            "rho1 collapsed to {rho_max:e} before the flux margins held"
        )));
    }
    let r = certify(rho_max).1.diam;
    check_eps(eps, r, delta0, m_bound, opts)?;

    // Largest rho below rho_max with diam < target.
    let (mut lo, mut hi) = (0.0, rho_max);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let c = build_candidate(patch, mid, coeff_for(mid), samples);
        if c.diam < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut rho1 = lo;
    loop {
        if rho1 < opts.min_rho1 {
            return Err(Error::Resolution(format!(
                "rho1 = {rho1:e} fell below the minimum {:e}",
                opts.min_rho1
            )));
        }
        let (ok, c) = certify(rho1);
        if ok && c.diam < eps {
            let k = unit_bump_c2(m, rho1, 101);
            return Ok(finish(patch, c, r, rho_max, delta0, m_bound, k, samples));
        }
        rho1 *= 0.9;
    }
}

fn check_eps(eps: f64, r: f64, delta0: f64, m_bound: f64, opts: &SubdomainOptions) -> Result<()> {
    if eps >= r {
        return Err(Error::InfeasibleGeometry { eps, r });
    }
    if let Some((t_final, beta)) = opts.horizon {
        let branches = eps_condition(eps, delta0, m_bound, beta, t_final, Some(r));
        if let Some(b) = branches.first_failure() {
            return Err(Error::Parameter(format!("eps = {eps} violates {b}")));
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn finish(
    patch: &BoundaryGraph,
    c: Candidate,
    r: f64,
    rho_max: f64,
    delta0: f64,
    m_bound: f64,
    k_bump: f64,
    samples: usize,
) -> Subdomain {
    let n = patch.dim;
    let m = n - 1;
    let bump = c.bump;
    let side = patch.side();
    let inner_c2 = c2_norm_on_ball(m, bump.rho, samples.min(201), |xp, g, h| {
        let mut bg = [0.0; MAX_DIM];
        let mut bh = [0.0; MAX_DIM * MAX_DIM];
        patch.height.gradient(xp, g);
        patch.height.hessian(xp, h);
        bump.gradient(xp, &mut bg[..m]);
        bump.hessian(xp, &mut bh[..m * m]);
        for i in 0..m {
            g[i] -= side * bg[i];
        }
        for i in 0..m * m {
            h[i] -= side * bh[i];
        }
        patch.height.value(xp) - side * bump.value(xp)
    });
    Subdomain {
        base: patch.clone(),
        rho1: bump.rho,
        bump,
        rho_max,
        r,
        diam: c.diam,
        delta0,
        m: m_bound,
        bump_c2: bump.coeff * k_bump,
        inner_c2,
        gamma1: c.gamma1,
        gamma2: c.gamma2,
    }
}

/// One flag per branch of `0 < eps < min{delta0^2/(2M^2), 1, beta T/(4M), r}`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct EpsCondition {
    pub lemma1_diameter: bool,
    pub unit: bool,
    pub oscillation: bool,
    /// `None` when no Lemma radius is known for the region.
    pub radius: Option<bool>,
}

impl EpsCondition {
    pub fn all(&self) -> bool {
        self.lemma1_diameter && self.unit && self.oscillation && self.radius.unwrap_or(true)
    }

    pub fn first_failure(&self) -> Option<&'static str> {
        if !self.lemma1_diameter {
            Some("eps < delta0^2/(2 M^2)")
        } else if !self.unit {
            Some("eps < 1")
        } else if !self.oscillation {
            Some("eps < beta T/(4 M)")
        } else if self.radius == Some(false) {
            Some("eps < r")
        } else {
            None
        }
    }
}

pub fn eps_condition(
    eps: f64,
    delta0: f64,
    m_bound: f64,
    beta: f64,
    t_final: f64,
    r: Option<f64>,
) -> EpsCondition {
    EpsCondition {
        lemma1_diameter: eps > 0.0 && eps < delta0 * delta0 / (2.0 * m_bound * m_bound),
        unit: eps < 1.0,
        oscillation: eps < beta * t_final / (4.0 * m_bound),
        radius: r.map(|r| eps < r),
    }
}

/// A boundary sample with its flux `H . nu`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClassifiedPoint {
    pub point: BoundaryPoint,
    pub flux: f64,
}

/// Split of boundary samples into outflow (`H . nu > 0`) and inflow
/// (`H . nu <= 0`) parts, with per-sheet flux margins.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundaryClassification {
    pub gamma_plus: Vec<ClassifiedPoint>,
    pub gamma_minus: Vec<ClassifiedPoint>,
    /// Minimum flux over `gamma1` samples (`+inf` if none).
    pub margin_plus: f64,
    /// Maximum flux over `gamma2` samples (`-inf` if none).
    pub margin_minus: f64,
}

/// Classify arbitrary boundary samples against a field.
pub fn classify_points(points: &[BoundaryPoint], h: &VectorField) -> Result<BoundaryClassification> {
    let mut out = BoundaryClassification {
        gamma_plus: Vec::new(),
        gamma_minus: Vec::new(),
        margin_plus: f64::INFINITY,
        margin_minus: f64::NEG_INFINITY,
    };
    for p in points {
        let flux = h.flux(&p.x, &p.normal);
        if !flux.is_finite() {
            return Err(Error::Domain(format!(
                "field not evaluable at boundary sample {:?}",
                &p.x[..h.dim()]
            )));
        }
        match p.sheet {
            Sheet::Gamma1 => out.margin_plus = out.margin_plus.min(flux),
            Sheet::Gamma2 => out.margin_minus = out.margin_minus.max(flux),
        }
        let cp = ClassifiedPoint {
            point: p.clone(),
            flux,
        };
        if flux > 0.0 {
            out.gamma_plus.push(cp);
        } else {
            out.gamma_minus.push(cp);
        }
    }
    Ok(out)
}

/// Classify the subdomain's sheets, resampled with `samples` points per
/// tangential axis.
pub fn classify_boundary(
    d: &Subdomain,
    h: &VectorField,
    samples: usize,
) -> Result<BoundaryClassification> {
    if samples < 10 {
        return Err(Error::Parameter(format!(
            "{samples} samples per sheet; at least 10 are required"
        )));
    }
    let c = build_candidate(&d.base, d.rho1, d.bump.coeff, samples);
    let pts: Vec<BoundaryPoint> = c.gamma1.into_iter().chain(c.gamma2).collect();
    classify_points(&pts, h)
}

/// Convenience constructor for a boundary-sample point.
pub fn boundary_point(x: &[f64], normal: &[f64], weight: f64, sheet: Sheet) -> BoundaryPoint {
    BoundaryPoint {
        x: point_from(x),
        normal: point_from(normal),
        weight,
        sheet,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn flat_normal_is_vertical() {
        let g = BoundaryGraph::flat(3, 1.0).unwrap();
        let (x, nu) = g.eval_boundary(&[0.0, 0.0]).unwrap();
        assert!(close(&x, &[0.0, 0.0, 0.0], 0.0));
        assert!(close(&nu, &[0.0, 0.0, 1.0], 1e-15));
    }

    #[test]
    fn linear_graph_normal() {
        let g = BoundaryGraph::new(2, 1.0, Height::Linear { slope: vec![1.0] }).unwrap();
        let s = 1.0 / 2f64.sqrt();
        for xp in [-0.7, 0.0, 0.3] {
            let (_, nu) = g.eval_boundary(&[xp]).unwrap();
            assert!(close(&nu[..2], &[-s, s], 1e-15));
        }
    }

    #[test]
    fn quadratic_normal_matches_tangent() {
        let g = BoundaryGraph::new(
            2,
            1.0,
            Height::Quadratic {
                curvature: vec![1.0],
            },
        )
        .unwrap();
        let (x, nu) = g.eval_boundary(&[0.5]).unwrap();
        let s = 1.0 / 2f64.sqrt();
        assert!(close(&nu[..2], &[-s, s], 1e-15));
        // finite-difference tangent is orthogonal to the normal
        let hstep = 1e-6;
        let (a, _) = g.eval_boundary(&[0.5 + hstep]).unwrap();
        let (b, _) = g.eval_boundary(&[0.5 - hstep]).unwrap();
        let tangent = [(a[0] - b[0]) / (2.0 * hstep), (a[1] - b[1]) / (2.0 * hstep)];
        assert!((tangent[0] * nu[0] + tangent[1] * nu[1]).abs() < 1e-9);
        assert!((x[1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn outside_base_ball_is_domain_error() {
        let g = BoundaryGraph::flat(2, 0.5).unwrap();
        assert!(matches!(g.eval_boundary(&[0.6]), Err(Error::Domain(_))));
    }

    #[test]
    fn height_derivatives_match_finite_differences() {
        let hts = [
            Height::Sine {
                amplitude: 0.1,
                frequency: 3.0,
            },
            Height::Quadratic {
                curvature: vec![0.7, -0.2],
            },
        ];
        for ht in hts {
            let x = [0.13, -0.21];
            let m = match ht {
                Height::Sine { .. } => 1,
                _ => 2,
            };
            let mut g = [0.0; 2];
            let mut hs = [0.0; 4];
            ht.gradient(&x[..m], &mut g[..m]);
            ht.hessian(&x[..m], &mut hs[..m * m]);
            let hstep = 1e-4;
            for i in 0..m {
                let mut xp = x;
                let mut xm = x;
                xp[i] += hstep;
                xm[i] -= hstep;
                let fd = (ht.value(&xp[..m]) - ht.value(&xm[..m])) / (2.0 * hstep);
                assert!((fd - g[i]).abs() < 1e-7);
                let mut gp = [0.0; 2];
                let mut gm = [0.0; 2];
                ht.gradient(&xp[..m], &mut gp[..m]);
                ht.gradient(&xm[..m], &mut gm[..m]);
                for j in 0..m {
                    let fd2 = (gp[j] - gm[j]) / (2.0 * hstep);
                    assert!((fd2 - hs[j * m + i]).abs() < 1e-7);
                }
            }
        }
    }

    #[test]
    fn bump_vanishes_to_second_order_on_rim() {
        let b = Bump {
            rho: 0.3,
            coeff: 2.0,
        };
        let rim = [0.3 / 2f64.sqrt(), 0.3 / 2f64.sqrt()];
        let mut g = [0.0; 2];
        let mut h = [0.0; 4];
        b.gradient(&rim, &mut g);
        b.hessian(&rim, &mut h);
        assert!(b.value(&rim).abs() < 1e-14);
        assert!(g.iter().chain(&h).all(|v| v.abs() < 1e-10));
        assert!((b.value(&[0.0, 0.0]) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn flat_subdomain_has_small_diameter_and_bump_bound() {
        let g = BoundaryGraph::flat(2, 1.0).unwrap();
        let d = construct_subdomain(&g, 1.0, 2.0, 0.1, &SubdomainOptions::default()).unwrap();
        assert!(d.diam < 0.1);
        assert!(d.bump_c2 <= 1.0 / 2.0 * (1.0 + 1e-9));
        let k = unit_bump_c2(1, d.rho1, 101);
        assert!(d.bump.coeff <= 1.0 / (2.0 * k) * (1.0 + 1e-12));
        assert!(d.gamma1.iter().all(|p| close(&p.normal[..2], &[0.0, 1.0], 1e-15)));
        assert!(d.contains(&[0.0, 0.0], 1e-12));
        assert!(d.rho1 <= d.rho_max);
    }

    #[test]
    fn oversized_eps_is_infeasible() {
        let g = BoundaryGraph::flat(2, 1.0).unwrap();
        let d = construct_subdomain(&g, 1.0, 2.0, 0.1, &SubdomainOptions::default()).unwrap();
        let err = construct_subdomain(&g, 1.0, 2.0, 10.0 * d.r, &SubdomainOptions::default())
            .unwrap_err();
        match err {
            Error::InfeasibleGeometry { r, .. } => assert!((r - d.r).abs() < 1e-12),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn sheets_meet_with_opposite_normals() {
        let g = BoundaryGraph::new(
            2,
            1.0,
            Height::Sine {
                amplitude: 0.1,
                frequency: 1.0,
            },
        )
        .unwrap();
        let d = construct_subdomain(&g, 1.0, 2.0, 0.05, &SubdomainOptions::default()).unwrap();
        for xp in [d.rho1, -d.rho1] {
            let a = d.normal(Sheet::Gamma1, &[xp]);
            let b = d.normal(Sheet::Gamma2, &[xp]);
            assert!((a[0] + b[0]).abs() < 1e-10 && (a[1] + b[1]).abs() < 1e-10);
        }
        for p in d.gamma1.iter().chain(&d.gamma2) {
            assert!((norm(&p.normal[..2]) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn one_dimensional_subdomain_is_an_interval() {
        let g = BoundaryGraph::flat(1, 1.0).unwrap();
        let d = construct_subdomain(&g, 1.0, 2.0, 0.2, &SubdomainOptions::default()).unwrap();
        assert_eq!(d.gamma1.len(), 1);
        assert!((d.gamma2[0].x[0] + 0.99 * 0.2).abs() < 1e-12);
        assert_eq!(d.gamma2[0].normal[0], -1.0);
        assert!(d.contains(&[-0.1], 0.0));
        assert!(!d.contains(&[0.01], 0.0));
    }

    #[test]
    fn three_dimensional_construction() {
        let g = BoundaryGraph::new(
            3,
            1.0,
            Height::Quadratic {
                curvature: vec![0.2, 0.1],
            },
        )
        .unwrap();
        let opts = SubdomainOptions {
            samples: 41,
            ..Default::default()
        };
        let d = construct_subdomain(&g, 1.0, 2.0, 0.08, &opts).unwrap();
        assert!(d.diam < 0.08);
        assert!(d.contains(&[0.0, 0.0, -0.5 * d.bump.coeff], 0.0));
    }

    #[test]
    fn horizon_enforces_eps_condition() {
        let g = BoundaryGraph::flat(2, 1.0).unwrap();
        let opts = SubdomainOptions {
            horizon: Some((0.1, 0.25)),
            ..Default::default()
        };
        // beta T / (4M) = 0.003125 < eps
        let err = construct_subdomain(&g, 1.0, 2.0, 0.05, &opts).unwrap_err();
        assert!(matches!(err, Error::Parameter(ref s) if s.contains("beta T")));
    }
}
