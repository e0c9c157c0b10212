//! Grid-sampled scalar and vector fields, nodal differentiation, quadrature
//! and the admissibility checks on coefficients.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{dot, Grid, Point, MAX_DIM};

pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// Nodal samples of a scalar function. Fields built from a closed form keep
/// it and evaluate it exactly off the lattice; others interpolate.
#[derive(Clone)]
pub struct ScalarField {
    grid: Arc<Grid>,
    values: Vec<f64>,
    exact: Option<ScalarFn>,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("nodes", &self.values.len())
            .field("analytic", &self.exact.is_some())
            .finish()
    }
}

fn check_finite(grid: &Grid, values: &[f64], stride: usize) -> Result<()> {
    for i in grid.active_nodes() {
        if values[i * stride..(i + 1) * stride].iter().any(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "non-finite sample at node {i} ({:?})",
                &grid.node(i)[..grid.dim()]
            )));
        }
    }
    Ok(())
}

impl ScalarField {
    pub fn from_fn<F>(grid: Arc<Grid>, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        let dim = grid.dim();
        let values = (0..grid.len()).map(|i| f(&grid.node(i)[..dim])).collect();
        Self {
            grid,
            values,
            exact: Some(Arc::new(f)),
        }
    }

    pub fn from_values(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Data(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        check_finite(&grid, &values, 1)?;
        Ok(Self {
            grid,
            values,
            exact: None,
        })
    }

    pub fn constant(grid: Arc<Grid>, c: f64) -> Self {
        Self::from_fn(grid, move |_| c)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_analytic(&self) -> bool {
        self.exact.is_some()
    }

    pub fn exact(&self) -> Option<&ScalarFn> {
        self.exact.as_ref()
    }

    /// Value at an arbitrary point; `NaN` if the point cannot be interpolated.
    pub fn eval(&self, x: &[f64]) -> f64 {
        if let Some(f) = &self.exact {
            return f(&x[..self.grid.dim()]);
        }
        self.interpolate(x)
    }

    /// Multilinear interpolation of the nodal samples.
    pub fn interpolate(&self, x: &[f64]) -> f64 {
        match self.grid.stencil(x) {
            Some(st) => st.iter().map(|(i, w)| w * self.values[i]).sum(),
            None => f64::NAN,
        }
    }

    /// `alpha * self + beta * other`, nodewise; closed forms are combined
    /// when both fields carry one.
    pub fn lincomb(alpha: f64, a: &ScalarField, beta: f64, b: &ScalarField) -> ScalarField {
        let values = a
            .values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| alpha * x + beta * y)
            .collect();
        let exact: Option<ScalarFn> = match (&a.exact, &b.exact) {
            (Some(f), Some(g)) => {
                let (f, g) = (f.clone(), g.clone());
                Some(Arc::new(move |x: &[f64]| alpha * f(x) + beta * g(x)))
            }
            _ => None,
        };
        ScalarField {
            grid: a.grid.clone(),
            values,
            exact,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.grid
            .active_nodes()
            .map(|i| self.values[i].abs())
            .fold(0.0, f64::max)
    }

    /// `(min, max)` over active nodes.
    pub fn range(&self) -> (f64, f64) {
        self.grid.active_nodes().fold(
            (f64::INFINITY, f64::NEG_INFINITY),
            |(lo, hi), i| (lo.min(self.values[i]), hi.max(self.values[i])),
        )
    }
}

/// Nodal samples of an `n`-component field, node-major.
#[derive(Clone)]
pub struct VectorField {
    grid: Arc<Grid>,
    values: Vec<f64>,
    exact: Option<VectorFn>,
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorField")
            .field("nodes", &self.grid.len())
            .field("dim", &self.grid.dim())
            .field("analytic", &self.exact.is_some())
            .finish()
    }
}

impl VectorField {
    pub fn from_fn<F>(grid: Arc<Grid>, f: F) -> Self
    where
        F: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        let dim = grid.dim();
        let mut values = vec![0.0; grid.len() * dim];
        for i in 0..grid.len() {
            f(&grid.node(i)[..dim], &mut values[i * dim..(i + 1) * dim]);
        }
        Self {
            grid,
            values,
            exact: Some(Arc::new(f)),
        }
    }

    pub fn from_values(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        let dim = grid.dim();
        if values.len() != grid.len() * dim {
            return Err(Error::Data(format!(
                "{} values for {} nodes with {dim} components",
                values.len(),
                grid.len()
            )));
        }
        check_finite(&grid, &values, dim)?;
        Ok(Self {
            grid,
            values,
            exact: None,
        })
    }

    pub fn constant(grid: Arc<Grid>, c: &[f64]) -> Self {
        let c = c.to_vec();
        Self::from_fn(grid, move |_, out| out.copy_from_slice(&c[..out.len()]))
    }

    /// Stack scalar components into a vector field.
    pub fn from_components(components: &[ScalarField]) -> Result<Self> {
        let grid = components
            .first()
            .ok_or(Error::Arity {
                expected: 1,
                got: 0,
            })?
            .grid
            .clone();
        let dim = grid.dim();
        if components.len() != dim {
            return Err(Error::Arity {
                expected: dim,
                got: components.len(),
            });
        }
        let mut values = vec![0.0; grid.len() * dim];
        for (k, c) in components.iter().enumerate() {
            for i in 0..grid.len() {
                values[i * dim + k] = c.values[i];
            }
        }
        let exact: Option<VectorFn> = if components.iter().all(|c| c.exact.is_some()) {
            let fs: Vec<ScalarFn> = components.iter().map(|c| c.exact.clone().unwrap()).collect();
            Some(Arc::new(move |x: &[f64], out: &mut [f64]| {
                for (o, f) in out.iter_mut().zip(&fs) {
                    *o = f(x);
                }
            }))
        } else {
            None
        };
        Ok(Self {
            grid,
            values,
            exact,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_analytic(&self) -> bool {
        self.exact.is_some()
    }

    pub fn exact(&self) -> Option<&VectorFn> {
        self.exact.as_ref()
    }

    pub fn node_value(&self, idx: usize) -> &[f64] {
        let dim = self.dim();
        &self.values[idx * dim..(idx + 1) * dim]
    }

    /// Value at a point, written to `out`; `NaN` entries if not evaluable.
    pub fn eval(&self, x: &[f64], out: &mut [f64]) {
        let dim = self.dim();
        if let Some(f) = &self.exact {
            f(&x[..dim], &mut out[..dim]);
            return;
        }
        match self.grid.stencil(x) {
            Some(st) => {
                out[..dim].iter_mut().for_each(|o| *o = 0.0);
                for (i, w) in st.iter() {
                    for k in 0..dim {
                        out[k] += w * self.values[i * dim + k];
                    }
                }
            }
            None => out[..dim].iter_mut().for_each(|o| *o = f64::NAN),
        }
    }

    pub fn at(&self, x: &[f64]) -> Point {
        let mut out = [0.0; MAX_DIM];
        self.eval(x, &mut out);
        out
    }

    /// `H(x) . nu`.
    pub fn flux(&self, x: &[f64], nu: &[f64]) -> f64 {
        let dim = self.dim();
        dot(&self.at(x)[..dim], &nu[..dim])
    }

    pub fn component(&self, k: usize) -> ScalarField {
        let dim = self.dim();
        let values = (0..self.grid.len()).map(|i| self.values[i * dim + k]).collect();
        let exact: Option<ScalarFn> = self.exact.clone().map(|f| {
            Arc::new(move |x: &[f64]| {
                let mut out = [0.0; MAX_DIM];
                f(x, &mut out[..x.len()]);
                out[k]
            }) as ScalarFn
        });
        ScalarField {
            grid: self.grid.clone(),
            values,
            exact,
        }
    }

    /// Jacobian `J[k][j] = d_j h_k` at a point by centered differences of
    /// the closed form (step 1e-6) or of the interpolant (half a cell).
    pub fn jacobian_at(&self, x: &[f64]) -> [[f64; MAX_DIM]; MAX_DIM] {
        let dim = self.dim();
        let mut jac = [[0.0; MAX_DIM]; MAX_DIM];
        for j in 0..dim {
            let step = if self.exact.is_some() {
                1e-6
            } else {
                0.5 * self.grid.spacing()[j]
            };
            let mut xp = [0.0; MAX_DIM];
            xp[..dim].copy_from_slice(&x[..dim]);
            let mut xm = xp;
            xp[j] += step;
            xm[j] -= step;
            let (a, b) = (self.at(&xp), self.at(&xm));
            for k in 0..dim {
                jac[k][j] = (a[k] - b[k]) / (2.0 * step);
            }
        }
        jac
    }

    /// Largest and smallest `|H|` over active nodes.
    pub fn modulus_range(&self) -> (f64, f64) {
        self.grid.active_nodes().fold((f64::INFINITY, 0.0f64), |(lo, hi), i| {
            let m = dot(self.node_value(i), self.node_value(i)).sqrt();
            (lo.min(m), hi.max(m))
        })
    }

    /// Largest component magnitude over active nodes (an upper bound on the
    /// per-axis propagation speed).
    pub fn max_speed(&self) -> f64 {
        self.modulus_range().1
    }

    /// Nodal divergence from [`grad`] of each component.
    pub fn divergence(&self) -> Result<ScalarField> {
        let dim = self.dim();
        let mut div = vec![0.0; self.grid.len()];
        for k in 0..dim {
            let g = grad(&self.component(k))?;
            for (i, d) in div.iter_mut().enumerate() {
                *d += g.values[i * dim + k];
            }
        }
        ScalarField::from_values(self.grid.clone(), div)
    }
}

/// Nodal gradient: centered differences where both neighbors are active,
/// second-order one-sided differences at mask edges, first order where only
/// one neighbor exists.
pub fn grad(a: &ScalarField) -> Result<VectorField> {
    let g = &a.grid;
    let dim = g.dim();
    let v = &a.values;
    let mut out = vec![0.0; g.len() * dim];
    for i in g.active_nodes() {
        for k in 0..dim {
            let h = g.spacing()[k];
            let d = match (g.neighbor(i, k, -1), g.neighbor(i, k, 1)) {
                (Some(m), Some(p)) => (v[p] - v[m]) / (2.0 * h),
                (None, Some(p)) => match g.neighbor(p, k, 1) {
                    Some(pp) => (-3.0 * v[i] + 4.0 * v[p] - v[pp]) / (2.0 * h),
                    None => (v[p] - v[i]) / h,
                },
                (Some(m), None) => match g.neighbor(m, k, -1) {
                    Some(mm) => (3.0 * v[i] - 4.0 * v[m] + v[mm]) / (2.0 * h),
                    None => (v[i] - v[m]) / h,
                },
                (None, None) => {
                    return Err(Error::Resolution(format!(
                        "node {i} has no active neighbor along axis {k}"
                    )))
                }
            };
            out[i * dim + k] = d;
        }
    }
    VectorField::from_values(g.clone(), out)
}

/// Gradient of a closed form at a point, fourth-order centered differences.
pub fn point_gradient(f: &dyn Fn(&[f64]) -> f64, x: &[f64], out: &mut [f64]) {
    const STEP: f64 = 2e-4;
    let dim = out.len();
    let mut y = [0.0; MAX_DIM];
    y[..dim].copy_from_slice(&x[..dim]);
    for k in 0..dim {
        let at = |d: f64| {
            let mut z = y;
            z[k] += d;
            f(&z[..dim])
        };
        let (p1, m1, p2, m2) = (at(STEP), at(-STEP), at(2.0 * STEP), at(-2.0 * STEP));
        out[k] = (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * STEP);
    }
}

/// Gradient from the closed form when there is one, else [`grad`].
pub fn gradient_field(a: &ScalarField) -> Result<VectorField> {
    match &a.exact {
        Some(f) => {
            let f = f.clone();
            Ok(VectorField::from_fn(a.grid.clone(), move |x, o| {
                point_gradient(&*f, x, o)
            }))
        }
        None => grad(a),
    }
}

/// Weighted discrete L2 norm over the active region, with an optional
/// pointwise weight applied to `|f|^2` before summation.
pub fn l2_norm(f: &ScalarField, weight: Option<&dyn Fn(&[f64]) -> f64>) -> Result<f64> {
    l2_norm_values(&f.grid, &f.values, weight)
}

pub fn l2_norm_values(
    grid: &Grid,
    values: &[f64],
    weight: Option<&dyn Fn(&[f64]) -> f64>,
) -> Result<f64> {
    if grid.measure() <= 0.0 {
        return Err(Error::Domain("quadrature region is empty".into()));
    }
    let dim = grid.dim();
    let mut s = 0.0;
    for i in grid.active_nodes() {
        let w = grid.weights()[i];
        if w == 0.0 {
            continue;
        }
        let extra = weight.map_or(1.0, |wf| wf(&grid.node(i)[..dim]));
        s += w * extra * values[i] * values[i];
    }
    Ok(s.sqrt())
}

/// Result of the admissibility test for a coefficient field.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    /// `max(sup |H|, sup ||DH||_F)`.
    pub c1_norm: f64,
    pub sup_modulus: f64,
    pub sup_jacobian: f64,
    pub flux_at_x0: f64,
    pub min_modulus: f64,
    pub admissible: bool,
}

pub fn check_admissible(
    h: &VectorField,
    delta0: f64,
    m_bound: f64,
    x0: &[f64],
    nu0: &[f64],
) -> AdmissibilityReport {
    let g = h.grid();
    let dim = g.dim();
    let (min_modulus, sup_modulus) = h.modulus_range();
    let sup_jacobian = if h.is_analytic() {
        g.active_nodes()
            .map(|i| {
                let j = h.jacobian_at(&g.node(i));
                frobenius(&j, dim)
            })
            .fold(0.0, f64::max)
    } else {
        let grads: Vec<_> = (0..dim).map(|k| grad(&h.component(k))).collect();
        match grads.into_iter().collect::<Result<Vec<_>>>() {
            Ok(grads) => g
                .active_nodes()
                .map(|i| {
                    grads
                        .iter()
                        .map(|gk| dot(gk.node_value(i), gk.node_value(i)))
                        .sum::<f64>()
                        .sqrt()
                })
                .fold(0.0, f64::max),
            Err(_) => f64::INFINITY,
        }
    };
    let flux_at_x0 = h.flux(x0, nu0);
    let c1_norm = sup_modulus.max(sup_jacobian);
    AdmissibilityReport {
        c1_norm,
        sup_modulus,
        sup_jacobian,
        flux_at_x0,
        min_modulus,
        admissible: c1_norm <= m_bound && flux_at_x0 > delta0 && min_modulus > delta0,
    }
}

fn frobenius(j: &[[f64; MAX_DIM]; MAX_DIM], dim: usize) -> f64 {
    (0..dim)
        .flat_map(|k| (0..dim).map(move |l| (k, l)))
        .map(|(k, l)| j[k][l] * j[k][l])
        .sum::<f64>()
        .sqrt()
}

/// Minimum of `|det(grad a_1, ..., grad a_n)|` over the region.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FamilyReport {
    pub min_abs_det: f64,
    pub node: usize,
    pub location: Vec<f64>,
    /// Smallest singular value of the gradient matrix over the region.
    pub c0: f64,
}

/// Gradient matrix rows `grad a_k` at every node, from [`grad`].
pub(crate) fn family_gradients(a: &[ScalarField]) -> Result<Vec<VectorField>> {
    let dim = a.first().map_or(0, |f| f.grid.dim());
    if a.len() != dim || dim == 0 {
        return Err(Error::Arity {
            expected: dim.max(1),
            got: a.len(),
        });
    }
    a.iter().map(gradient_field).collect()
}

pub(crate) fn gradient_matrix(grads: &[VectorField], i: usize) -> DMatrix<f64> {
    let n = grads.len();
    DMatrix::from_fn(n, n, |k, j| grads[k].node_value(i)[j])
}

pub fn check_initial_family(a: &[ScalarField]) -> Result<FamilyReport> {
    let grads = family_gradients(a)?;
    let g = a[0].grid.clone();
    let mut best = FamilyReport {
        min_abs_det: f64::INFINITY,
        node: 0,
        location: vec![],
        c0: f64::INFINITY,
    };
    for i in g.active_nodes() {
        let m = gradient_matrix(&grads, i);
        let det = m.determinant().abs();
        if det < best.min_abs_det {
            best.min_abs_det = det;
            best.node = i;
            best.location = g.node(i)[..g.dim()].to_vec();
        }
        let smin = m.singular_values().min();
        best.c0 = best.c0.min(smin);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square(n: usize) -> Arc<Grid> {
        Arc::new(Grid::boxed(&[0.0, 0.0], &[1.0, 1.0], &[n, n]).unwrap())
    }

    #[test]
    fn constant_field_is_admissible() {
        let h = VectorField::constant(unit_square(8), &[1.0, 0.0]);
        let r = check_admissible(&h, 0.5, 2.0, &[1.0, 0.5], &[1.0, 0.0]);
        assert!(r.admissible);
        assert_eq!(r.flux_at_x0, 1.0);
        assert_eq!(r.min_modulus, 1.0);
        assert!((r.c1_norm - 1.0).abs() < 1e-9);
    }

    #[test]
    fn small_modulus_is_rejected() {
        let h = VectorField::constant(unit_square(8), &[0.3, 0.0]);
        let r = check_admissible(&h, 0.5, 2.0, &[1.0, 0.5], &[1.0, 0.0]);
        assert!(!r.admissible);
        assert!((r.min_modulus - 0.3).abs() < 1e-15);
    }

    #[test]
    fn oscillating_field_exceeds_c1_bound() {
        let g = Arc::new(Grid::boxed(&[0.0, 0.0], &[1.3, 0.2], &[520, 4]).unwrap());
        let h = VectorField::from_fn(g.clone(), |x, o| {
            o[0] = 1.0 + 0.4 * (5.0 * x[0]).sin();
            o[1] = 0.0;
        });
        let r = check_admissible(&h, 0.5, 1.0, &[1.3, 0.1], &[1.0, 0.0]);
        assert!(!r.admissible);
        assert!((r.c1_norm - 2.0).abs() < 1e-4, "{}", r.c1_norm);
        // same through nodal differences
        let hv = VectorField::from_values(g, h.values().to_vec()).unwrap();
        let r2 = check_admissible(&hv, 0.5, 1.0, &[1.3, 0.1], &[1.0, 0.0]);
        assert!((r2.c1_norm - 2.0).abs() < 1e-3, "{}", r2.c1_norm);
    }

    #[test]
    fn grad_of_quadratic_and_sine() {
        let n = 64;
        let g = Arc::new(Grid::boxed(&[0.0], &[1.0], &[n]).unwrap());
        let a = ScalarField::from_fn(g.clone(), |x| x[0] * x[0]);
        let d = grad(&a).unwrap();
        assert!((d.node_value(n / 2)[0] - 1.0).abs() < 1e-12);
        assert!((d.node_value(0)[0]).abs() < 1e-12);
        assert!((d.node_value(n)[0] - 2.0).abs() < 1e-12);

        let g = Arc::new(Grid::boxed(&[-1.0], &[1.0], &[n]).unwrap());
        let h = 2.0 / n as f64;
        let s = grad(&ScalarField::from_fn(g, |x| x[0].sin())).unwrap();
        // sin(h)/h = 1 - h^2/6 + ...
        let oracle = h.sin() / h;
        assert!((s.node_value(n / 2)[0] - oracle).abs() < 1e-14);
        assert!((s.node_value(n / 2)[0] - (1.0 - h * h / 6.0)).abs() < h.powi(4));
    }

    #[test]
    fn grad_of_constant_is_zero() {
        let d = grad(&ScalarField::constant(unit_square(5), 3.0)).unwrap();
        assert!(d.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn l2_norm_examples() {
        let g = Arc::new(Grid::boxed(&[0.0, 0.0], &[0.1, 0.1], &[4, 4]).unwrap());
        let one = ScalarField::constant(g.clone(), 1.0);
        assert!((l2_norm(&one, None).unwrap() - 0.1).abs() < 1e-14);
        assert_eq!(l2_norm(&ScalarField::constant(g, 0.0), None).unwrap(), 0.0);
        for n in [64, 128] {
            let g = Arc::new(Grid::boxed(&[0.0], &[1.0], &[n]).unwrap());
            let x = ScalarField::from_fn(g, |x| x[0]);
            let h = 1.0 / n as f64;
            // trapezoid error on x^2 over [0,1] is h^2/6
            let expect = (1.0 / 3.0 + h * h / 6.0f64).sqrt();
            assert!((l2_norm(&x, None).unwrap() - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn initial_family_examples() {
        let g = unit_square(16);
        let x1 = ScalarField::from_fn(g.clone(), |x| x[0]);
        let x2 = ScalarField::from_fn(g.clone(), |x| x[1]);
        let r = check_initial_family(&[x1.clone(), x2.clone()]).unwrap();
        assert!((r.min_abs_det - 1.0).abs() < 1e-12 && (r.c0 - 1.0).abs() < 1e-12);
        let r = check_initial_family(&[x1.clone(), x1.clone()]).unwrap();
        assert!(r.min_abs_det < 1e-12);
        let bent = ScalarField::from_fn(g.clone(), |x| x[0] + 0.1 * x[1] * x[1]);
        let r = check_initial_family(&[bent, x2]).unwrap();
        assert!((r.min_abs_det - 1.0).abs() < 1e-12);
        assert!(matches!(
            check_initial_family(&[x1]),
            Err(Error::Arity {
                expected: 2,
                got: 1
            })
        ));
    }

    #[test]
    fn nonfinite_values_are_data_errors() {
        let g = unit_square(2);
        let mut v = vec![0.0; g.len()];
        v[3] = f64::NAN;
        assert!(matches!(ScalarField::from_values(g, v), Err(Error::Data(_))));
    }
}
