//! Forward solution of `du/dt + H . grad u + p u = R f` with initial datum
//! `a` by the method of characteristics, plus an upwind oracle and
//! boundary-trace extraction.

mod characteristics;
mod fd;
mod trace;

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fields::{ScalarField, VectorField};
use crate::grid::{Grid, Point, Sheet};

pub use characteristics::{trace_characteristic, CharacteristicPath, Exit, PathSample, TraceConfig};
pub use fd::solve_forward_fd;
pub use trace::{boundary_trace, initial_rate, pde_residual, BoundaryTrace, Residual};

pub(crate) use characteristics::node_path;

/// A scalar function of `(x, t)`.
pub trait SpaceTimeFn: Send + Sync {
    fn eval(&self, x: &[f64], t: f64) -> f64;
}

impl<F> SpaceTimeFn for F
where
    F: Fn(&[f64], f64) -> f64 + Send + Sync,
{
    fn eval(&self, x: &[f64], t: f64) -> f64 {
        self(x, t)
    }
}

/// Data on the part of the boundary where characteristics enter.
#[derive(Clone, Default)]
pub enum Inflow {
    /// No datum: values reached only from the boundary are undetermined.
    #[default]
    Absent,
    Zero,
    Function(Arc<dyn SpaceTimeFn>),
    Trace(Arc<BoundaryTrace>),
}

impl std::fmt::Debug for Inflow {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Inflow::Absent => "Absent",
            Inflow::Zero => "Zero",
            Inflow::Function(_) => "Function",
            Inflow::Trace(_) => "Trace",
        })
    }
}

impl Inflow {
    pub fn function<F>(f: F) -> Self
    where
        F: Fn(&[f64], f64) -> f64 + Send + Sync + 'static,
    {
        Inflow::Function(Arc::new(f))
    }

    pub fn is_known(&self) -> bool {
        !matches!(self, Inflow::Absent)
    }

    /// Evaluator bound to one boundary point (the nearest trace sample is
    /// located once).
    fn at_point(&self, x: &[f64]) -> impl Fn(f64) -> f64 + '_ {
        let x = x.to_vec();
        let nearest = match self {
            Inflow::Trace(tr) => tr.nearest(&x),
            _ => 0,
        };
        move |t| match self {
            Inflow::Absent | Inflow::Zero => 0.0,
            Inflow::Function(f) => f.eval(&x, t),
            Inflow::Trace(tr) => tr.value_at(nearest, t),
        }
    }
}

/// Samples of a solution on the lattice at uniform times, with the mask of
/// `(node, time)` pairs whose backward characteristic reaches known data.
#[derive(Clone)]
pub struct SpaceTimeField {
    grid: Arc<Grid>,
    times: Vec<f64>,
    values: Vec<f64>,
    determined: Vec<bool>,
    from_initial: Vec<bool>,
    exact: Option<Arc<dyn SpaceTimeFn>>,
}

impl std::fmt::Debug for SpaceTimeField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpaceTimeField")
            .field("nodes", &self.grid.len())
            .field("times", &self.times.len())
            .finish()
    }
}

pub fn uniform_times(t_final: f64, dt: f64) -> Result<Vec<f64>> {
    if !(t_final > 0.0 && dt > 0.0) {
        return Err(Error::Parameter(format!(
            "need T > 0 and dt > 0, got T = {t_final}, dt = {dt}"
        )));
    }
    let k = ((t_final / dt) - 1e-9).ceil().max(1.0) as usize;
    Ok((0..=k).map(|i| t_final * i as f64 / k as f64).collect())
}

impl SpaceTimeField {
    /// Samples of a closed form on every node (all determined).
    pub fn from_fn<F>(grid: Arc<Grid>, times: Vec<f64>, f: F) -> Self
    where
        F: Fn(&[f64], f64) -> f64 + Send + Sync + 'static,
    {
        let n = grid.len();
        let dim = grid.dim();
        let mut values = vec![0.0; n * times.len()];
        for (k, t) in times.iter().enumerate() {
            for i in 0..n {
                values[k * n + i] = f(&grid.node(i)[..dim], *t);
            }
        }
        let mask: Vec<bool> = (0..times.len())
            .flat_map(|_| grid.mask().iter().copied())
            .collect();
        Self {
            grid,
            times,
            values,
            determined: mask.clone(),
            from_initial: mask,
            exact: Some(Arc::new(f)),
        }
    }

    /// Time-major values (`k * nodes + i`) with their determinacy mask.
    pub fn from_values(
        grid: Arc<Grid>,
        times: Vec<f64>,
        values: Vec<f64>,
        determined: Vec<bool>,
    ) -> Result<Self> {
        let len = grid.len() * times.len();
        if values.len() != len || determined.len() != len {
            return Err(Error::Data(format!(
                "space-time data of length {}/{} for {len} samples",
                values.len(),
                determined.len()
            )));
        }
        if let Some(j) = (0..len).find(|&j| determined[j] && !values[j].is_finite()) {
            return Err(Error::Data(format!("non-finite determined sample {j}")));
        }
        Ok(Self {
            grid,
            times,
            values,
            from_initial: determined.clone(),
            determined,
            exact: None,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    pub fn dt(&self) -> f64 {
        self.times[1] - self.times[0]
    }

    pub fn t_final(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_analytic(&self) -> bool {
        self.exact.is_some()
    }

    pub fn value(&self, i: usize, k: usize) -> f64 {
        self.values[k * self.grid.len() + i]
    }

    pub fn determined(&self, i: usize, k: usize) -> bool {
        self.determined[k * self.grid.len() + i]
    }

    /// Determined through the initial plane rather than the inflow boundary.
    pub fn from_initial(&self, i: usize, k: usize) -> bool {
        self.from_initial[k * self.grid.len() + i]
    }

    pub fn determined_mask(&self) -> &[bool] {
        &self.determined
    }

    pub fn all_determined(&self) -> bool {
        let n = self.grid.len();
        (0..self.times.len()).all(|k| self.grid.active_nodes().all(|i| self.determined[k * n + i]))
    }

    pub fn slice(&self, k: usize) -> ScalarField {
        let n = self.grid.len();
        let v: Vec<f64> = self.values[k * n..(k + 1) * n]
            .iter()
            .map(|v| if v.is_finite() { *v } else { 0.0 })
            .collect();
        ScalarField::from_values(self.grid.clone(), v).expect("finite by construction")
    }

    /// Closed form if present, else multilinear in space and linear in time.
    pub fn eval(&self, x: &[f64], t: f64) -> f64 {
        if let Some(f) = &self.exact {
            return f.eval(&x[..self.grid.dim()], t);
        }
        let Some(st) = self.grid.stencil(x) else {
            return f64::NAN;
        };
        let (k0, w) = self.time_bracket(t);
        let n = self.grid.len();
        let at = |k: usize| -> f64 { st.iter().map(|(i, c)| c * self.values[k * n + i]).sum() };
        if w == 0.0 {
            at(k0)
        } else {
            (1.0 - w) * at(k0) + w * at(k0 + 1)
        }
    }

    /// Whether every interpolation node used by [`eval`] is determined.
    pub fn eval_determined(&self, x: &[f64], t: f64) -> bool {
        if self.exact.is_some() {
            return true;
        }
        let Some(st) = self.grid.stencil(x) else {
            return false;
        };
        let (k0, w) = self.time_bracket(t);
        let ks: &[usize] = if w == 0.0 { &[k0] } else { &[k0, k0 + 1] };
        ks.iter().all(|&k| st.iter().all(|(i, _)| self.determined(i, k)))
    }

    fn time_bracket(&self, t: f64) -> (usize, f64) {
        let kmax = self.times.len() - 1;
        let s = ((t - self.times[0]) / self.dt()).clamp(0.0, kmax as f64);
        let k0 = (s.floor() as usize).min(kmax.saturating_sub(1));
        let w = s - k0 as f64;
        if kmax == 0 || w == 0.0 {
            (k0, 0.0)
        } else {
            (k0, w)
        }
    }

    /// `self - other` on the common lattice; determined where both are.
    pub fn difference(&self, other: &SpaceTimeField) -> Result<SpaceTimeField> {
        if self.values.len() != other.values.len() {
            return Err(Error::Data("space-time fields on different lattices".into()));
        }
        Ok(SpaceTimeField {
            grid: self.grid.clone(),
            times: self.times.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
            determined: self
                .determined
                .iter()
                .zip(&other.determined)
                .map(|(a, b)| *a && *b)
                .collect(),
            from_initial: self
                .from_initial
                .iter()
                .zip(&other.from_initial)
                .map(|(a, b)| *a && *b)
                .collect(),
            exact: None,
        })
    }

    /// Nodal time derivative: centered inside, second-order one-sided at
    /// the first and last levels.
    pub fn time_derivative(&self) -> SpaceTimeField {
        let n = self.grid.len();
        let kk = self.times.len();
        let dt = self.dt();
        let mut values = vec![0.0; self.values.len()];
        let mut det = vec![false; self.values.len()];
        for k in 0..kk {
            let (ks, cs): (Vec<usize>, Vec<f64>) = if kk < 3 {
                (vec![0, 1], vec![-1.0 / dt, 1.0 / dt])
            } else if k == 0 {
                (vec![0, 1, 2], vec![-1.5 / dt, 2.0 / dt, -0.5 / dt])
            } else if k == kk - 1 {
                (vec![k - 2, k - 1, k], vec![0.5 / dt, -2.0 / dt, 1.5 / dt])
            } else {
                (vec![k - 1, k + 1], vec![-0.5 / dt, 0.5 / dt])
            };
            for i in 0..n {
                values[k * n + i] = ks.iter().zip(&cs).map(|(&m, c)| c * self.values[m * n + i]).sum();
                det[k * n + i] = ks.iter().all(|&m| self.determined[m * n + i]);
            }
        }
        SpaceTimeField {
            grid: self.grid.clone(),
            times: self.times.clone(),
            values,
            from_initial: det.clone(),
            determined: det,
            exact: None,
        }
    }

    /// Discrete `L2(D)` norm at time level `k`.
    pub fn l2_at(&self, k: usize) -> f64 {
        let n = self.grid.len();
        let w = self.grid.weights();
        self.grid
            .active_nodes()
            .map(|i| w[i] * self.values[k * n + i].powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Compact binary block with a time axis.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        crate::io::write_block(
            &mut w,
            &self.grid,
            1,
            Some((self.times.len(), self.dt())),
            &self.values,
        )
    }
}

impl SpaceTimeFn for SpaceTimeField {
    fn eval(&self, x: &[f64], t: f64) -> f64 {
        SpaceTimeField::eval(self, x, t)
    }
}

/// Right-hand side `R(x, t) f(x)` of the inhomogeneous equation.
#[derive(Clone, Copy)]
pub struct Source<'a> {
    pub r: &'a dyn SpaceTimeFn,
    pub f: &'a ScalarField,
}

/// Composite Simpson on uniform samples; an odd number of intervals ends
/// with the three-eighths rule, fewer than two intervals use trapezoids.
pub(crate) fn simpson(v: &[f64], h: f64) -> f64 {
    let m = v.len().saturating_sub(1);
    match m {
        0 => 0.0,
        1 => 0.5 * h * (v[0] + v[1]),
        _ => {
            let even = if m % 2 == 0 { m } else { m - 3 };
            let mut s = 0.0;
            let mut j = 0;
            while j < even {
                s += h / 3.0 * (v[j] + 4.0 * v[j + 1] + v[j + 2]);
                j += 2;
            }
            if m % 2 == 1 {
                s += 3.0 * h / 8.0 * (v[j] + 3.0 * v[j + 1] + 3.0 * v[j + 2] + v[j + 3]);
            }
            s
        }
    }
}

fn check_coefficients(h: &VectorField, p: &ScalarField, a: Option<&ScalarField>) -> Result<()> {
    let g = h.grid();
    for i in g.active_nodes() {
        let x = g.node(i);
        let bad = h.node_value(i).iter().any(|v| !v.is_finite())
            || !p.eval(&x).is_finite()
            || a.is_some_and(|a| !a.eval(&x).is_finite());
        if bad {
            return Err(Error::Data(format!(
                "non-finite coefficient at node {i} ({:?})",
                &x[..g.dim()]
            )));
        }
    }
    Ok(())
}

fn check_cfl(h: &VectorField, dt: f64) -> Result<()> {
    let speed = h.max_speed();
    let hmin = h.grid().min_spacing();
    if dt * speed > hmin * (1.0 + 1e-12) {
        return Err(Error::Configuration(format!(
            "dt * max|H| = {:.3e} exceeds the grid spacing {hmin:.3e}",
            dt * speed
        )));
    }
    Ok(())
}

/// Per-node result columns before scattering to time-major storage.
struct Column {
    values: Vec<f64>,
    determined: Vec<bool>,
    from_initial: Vec<bool>,
}

#[allow(clippy::too_many_arguments)]
fn solve_node(
    h: &VectorField,
    p: &ScalarField,
    a: Option<&ScalarField>,
    source: Option<Source<'_>>,
    inflow: &Inflow,
    grid: &Grid,
    x: &Point,
    times: &[f64],
) -> Column {
    let kk = times.len();
    let dt = times[1] - times[0];
    let sigma = dt / 4.0;
    let path = node_path(h, &|y: &[f64]| p.eval(y), grid, x, sigma, 4 * (kk - 1));
    let mut col = Column {
        values: vec![0.0; kk],
        determined: vec![false; kk],
        from_initial: vec![false; kk],
    };
    let exit = path.exit.as_ref();
    let boundary = exit.map(|(_, y, _, _)| inflow.at_point(&y[..grid.dim()]));
    // f(X_j) e^{-P_j} along the path, reused for every time level
    let fe: Option<Vec<f64>> = source.map(|s| {
        path.pos
            .iter()
            .zip(&path.damp)
            .map(|(y, d)| s.f.eval(y) * (-d).exp())
            .collect()
    });
    let mut integrand = Vec::with_capacity(path.pos.len());
    for k in 0..kk {
        let t = times[k];
        let j = 4 * k;
        let reached = j < path.pos.len();
        let (mut v, det) = if reached {
            let a0 = a.map_or(0.0, |a| a.eval(&path.pos[j]));
            col.from_initial[k] = true;
            (a0 * (-path.damp[j]).exp(), true)
        } else {
            let (tau, _, damp, _) = exit.expect("unreached levels imply an exit");
            let g = boundary.as_ref().unwrap()(t - tau);
            (g * (-damp).exp(), inflow.is_known())
        };
        if let (Some(s), Some(fe)) = (source, fe.as_ref()) {
            let m = if reached { j } else { path.pos.len() - 1 };
            integrand.clear();
            for q in 0..=m {
                integrand.push(s.r.eval(&path.pos[q], t - sigma * q as f64) * fe[q]);
            }
            v += simpson(&integrand, sigma);
            if !reached {
                let (tau, y, damp, _) = exit.unwrap();
                let rest = tau - sigma * m as f64;
                let fy = s.r.eval(y, t - tau) * s.f.eval(y) * (-damp).exp();
                v += 0.5 * rest * (integrand[m] + fy);
            }
        }
        col.values[k] = v;
        col.determined[k] = det;
    }
    col
}

fn solve_general(
    h: &VectorField,
    p: &ScalarField,
    a: Option<&ScalarField>,
    source: Option<Source<'_>>,
    inflow: &Inflow,
    t_final: f64,
    dt: f64,
) -> Result<SpaceTimeField> {
    let times = uniform_times(t_final, dt)?;
    check_cfl(h, times[1] - times[0])?;
    check_coefficients(h, p, a)?;
    if let Some(s) = source {
        check_coefficients(h, s.f, None)?;
    }
    let grid = h.grid().clone();
    let n = grid.len();
    let kk = times.len();
    let active: Vec<usize> = grid.active_nodes().collect();
    let columns: Vec<Column> = active
        .par_iter()
        .map(|&i| solve_node(h, p, a, source, inflow, &grid, &grid.node(i), &times))
        .collect();
    let mut values = vec![0.0; n * kk];
    let mut determined = vec![false; n * kk];
    let mut from_initial = vec![false; n * kk];
    for (&i, col) in active.iter().zip(&columns) {
        for k in 0..kk {
            values[k * n + i] = col.values[k];
            determined[k * n + i] = col.determined[k];
            from_initial[k * n + i] = col.from_initial[k];
        }
    }
    Ok(SpaceTimeField {
        grid,
        times,
        values,
        determined,
        from_initial,
        exact: None,
    })
}

/// Solve `du/dt + H . grad u + p u = 0`, `u(., 0) = a`, on the lattice of
/// `H` at times `0, dt, ..., T`.
pub fn solve_forward(
    h: &VectorField,
    p: &ScalarField,
    a: &ScalarField,
    inflow: &Inflow,
    t_final: f64,
    dt: f64,
) -> Result<SpaceTimeField> {
    solve_general(h, p, Some(a), None, inflow, t_final, dt)
}

/// As [`solve_forward`] with the source `R(x, t) f(x)` integrated along
/// characteristics (Duhamel).
#[allow(clippy::too_many_arguments)]
pub fn solve_with_source(
    h: &VectorField,
    p: &ScalarField,
    a: Option<&ScalarField>,
    source: Source<'_>,
    inflow: &Inflow,
    t_final: f64,
    dt: f64,
) -> Result<SpaceTimeField> {
    solve_general(h, p, a, Some(source), inflow, t_final, dt)
}

/// `dy/dt + H . grad y + p1 y = R f`, `y(., 0) = 0`.
pub fn solve_linearized(
    h: &VectorField,
    p1: &ScalarField,
    r: &dyn SpaceTimeFn,
    f: &ScalarField,
    inflow: &Inflow,
    t_final: f64,
    dt: f64,
) -> Result<SpaceTimeField> {
    solve_general(h, p1, None, Some(Source { r, f }), inflow, t_final, dt)
}

/// Determinacy of each `(node, time)` under a given inflow: `(determined,
/// from_initial)`, time-major.
pub(crate) fn determinacy(
    h: &VectorField,
    inflow: &Inflow,
    times: &[f64],
) -> (Vec<bool>, Vec<bool>) {
    let grid = h.grid();
    let n = grid.len();
    let kk = times.len();
    let sigma = (times[1] - times[0]) / 4.0;
    let active: Vec<usize> = grid.active_nodes().collect();
    let reach: Vec<usize> = active
        .par_iter()
        .map(|&i| node_path(h, &|_: &[f64]| 0.0, grid, &grid.node(i), sigma, 4 * (kk - 1)).pos.len())
        .collect();
    let mut det = vec![false; n * kk];
    let mut init = vec![false; n * kk];
    for (&i, &len) in active.iter().zip(&reach) {
        for k in 0..kk {
            let from_init = 4 * k < len;
            init[k * n + i] = from_init;
            det[k * n + i] = from_init || inflow.is_known();
        }
    }
    (det, init)
}

impl SpaceTimeField {
    pub(crate) fn with_masks(mut self, determined: Vec<bool>, from_initial: Vec<bool>) -> Self {
        self.determined = determined;
        self.from_initial = from_initial;
        self
    }
}

/// Sheet-filter helper for traces.
pub fn on_sheet(sheet: Sheet) -> impl Fn(&crate::grid::BoundaryPoint) -> bool {
    move |p| p.sheet == sheet
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strip(n: usize) -> Arc<Grid> {
        Arc::new(Grid::boxed(&[0.0, 0.0], &[1.0, 0.25], &[n, n / 4]).unwrap())
    }

    #[test]
    fn linear_transport_on_determined_cells() {
        let g = strip(32);
        let h = VectorField::constant(g.clone(), &[1.0, 0.0]);
        let p = ScalarField::constant(g.clone(), 0.0);
        let a = ScalarField::from_fn(g.clone(), |x| x[0]);
        let u = solve_forward(&h, &p, &a, &Inflow::Zero, 0.5, 1.0 / 32.0).unwrap();
        let n = g.len();
        let mut seen = 0;
        for k in 0..u.n_times() {
            for i in 0..n {
                assert!(u.determined(i, k));
                let x = g.node(i);
                if u.from_initial(i, k) {
                    seen += 1;
                    assert!((u.value(i, k) - (x[0] - u.times()[k])).abs() < 1e-13);
                } else {
                    assert_eq!(u.value(i, k), 0.0);
                }
            }
        }
        assert!(seen > n);
    }

    #[test]
    fn constant_damping() {
        let g = strip(32);
        let h = VectorField::constant(g.clone(), &[1.0, 0.0]);
        let p = ScalarField::constant(g.clone(), 0.7);
        let a = ScalarField::from_fn(g.clone(), |x| x[0]);
        let u = solve_forward(&h, &p, &a, &Inflow::Absent, 0.5, 1.0 / 32.0).unwrap();
        for k in 0..u.n_times() {
            let t = u.times()[k];
            for i in 0..g.len() {
                if u.determined(i, k) {
                    let x = g.node(i);
                    assert!((u.value(i, k) - (x[0] - t) * (-0.7 * t).exp()).abs() < 1e-12);
                } else {
                    assert!(g.node(i)[0] < t + 1e-12);
                }
            }
        }
    }

    #[test]
    fn exponential_flow_solution() {
        let g = Arc::new(Grid::boxed(&[0.0, 0.0], &[1.0, 0.25], &[32, 8]).unwrap());
        let h = VectorField::from_fn(g.clone(), |x, o| {
            o[0] = x[0] + 0.5;
            o[1] = 0.0;
        });
        let p = ScalarField::constant(g.clone(), 0.0);
        let a = ScalarField::from_fn(g.clone(), |x| x[0]);
        let u = solve_forward(&h, &p, &a, &Inflow::Absent, 0.25, 1.0 / 64.0).unwrap();
        let k = u.n_times() - 1;
        let t = u.times()[k];
        for i in 0..g.len() {
            if u.determined(i, k) {
                let x = g.node(i);
                assert!((u.value(i, k) - ((x[0] + 0.5) * (-t).exp() - 0.5)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn cfl_violation_is_configuration_error() {
        let g = strip(32);
        let h = VectorField::constant(g.clone(), &[1.0, 0.0]);
        let p = ScalarField::constant(g.clone(), 0.0);
        let a = ScalarField::constant(g.clone(), 1.0);
        let err = solve_forward(&h, &p, &a, &Inflow::Zero, 0.5, 0.1).unwrap_err();
        assert!(matches!(err, Error::Configuration(_)));
    }

    #[test]
    fn nan_coefficient_is_data_error() {
        let g = strip(8);
        let h = VectorField::constant(g.clone(), &[1.0, 0.0]);
        let p = ScalarField::from_fn(g.clone(), |x| if x[0] > 0.5 { f64::NAN } else { 0.0 });
        let a = ScalarField::constant(g.clone(), 1.0);
        let err = solve_forward(&h, &p, &a, &Inflow::Zero, 0.1, 0.05).unwrap_err();
        assert!(matches!(err, Error::Data(_)));
    }

    #[test]
    fn constant_source_integral() {
        let g = Arc::new(Grid::boxed(&[0.0], &[1.0], &[64]).unwrap());
        let h = VectorField::constant(g.clone(), &[1.0]);
        let p = ScalarField::constant(g.clone(), 0.0);
        let f = ScalarField::constant(g.clone(), 1.0);
        let r = |_: &[f64], _: f64| 1.0;
        let y = solve_linearized(&h, &p, &r, &f, &Inflow::Zero, 0.5, 1.0 / 64.0).unwrap();
        for k in 0..y.n_times() {
            for i in 0..g.len() {
                let expect = y.times()[k].min(g.node(i)[0]);
                // exit located to the boundary slack
                assert!((y.value(i, k) - expect).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn zero_source_is_zero() {
        let g = Arc::new(Grid::boxed(&[0.0], &[1.0], &[16]).unwrap());
        let h = VectorField::constant(g.clone(), &[1.0]);
        let p = ScalarField::constant(g.clone(), 0.3);
        let f = ScalarField::constant(g.clone(), 0.0);
        let r = |x: &[f64], t: f64| 1.0 + x[0] * t;
        let y = solve_linearized(&h, &p, &r, &f, &Inflow::Zero, 0.5, 1.0 / 16.0).unwrap();
        assert!(y.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn simpson_is_exact_on_cubics() {
        for m in 2..9 {
            let h = 1.0 / m as f64;
            let v: Vec<f64> = (0..=m).map(|j| (j as f64 * h).powi(3)).collect();
            assert!((simpson(&v, h) - 0.25).abs() < 1e-14);
        }
    }
}
