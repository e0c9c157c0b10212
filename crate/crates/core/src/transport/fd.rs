//! First-order upwind finite differences with explicit Euler steps.

use crate::error::Result;
use crate::fields::{ScalarField, VectorField};

use super::{check_cfl, check_coefficients, determinacy, uniform_times, Inflow, SpaceTimeField};

enum Stencil {
    /// `(neighbor, axis coefficient h_k / dx_k, sign)` terms of `H . grad u`.
    Interior(Vec<(usize, f64)>, f64),
    /// Some upwind neighbor is missing: the node takes the inflow datum.
    Inflow,
}

/// Upwind oracle for [`super::solve_forward`]. Internal substeps keep the
/// Courant number at most one; nodes without an upwind neighbor carry the
/// inflow datum (zero when absent).
pub fn solve_forward_fd(
    h: &VectorField,
    p: &ScalarField,
    a: &ScalarField,
    inflow: &Inflow,
    t_final: f64,
    dt: f64,
) -> Result<SpaceTimeField> {
    let times = uniform_times(t_final, dt)?;
    let dt = times[1] - times[0];
    check_cfl(h, dt)?;
    check_coefficients(h, p, Some(a))?;
    let g = h.grid().clone();
    let n = g.len();
    let dim = g.dim();

    let mut rate = 0.0f64;
    let stencils: Vec<Option<Stencil>> = (0..n)
        .map(|i| {
            if !g.active(i) {
                return None;
            }
            let hv = h.node_value(i);
            let mut terms = Vec::with_capacity(dim);
            let mut diag = 0.0;
            let mut local = 0.0;
            for k in 0..dim {
                let c = hv[k] / g.spacing()[k];
                if c == 0.0 {
                    continue;
                }
                let step = if c > 0.0 { -1 } else { 1 };
                match g.neighbor(i, k, step) {
                    // c (u_i - u_up) for c > 0, -c (u_up - u_i) for c < 0
                    Some(up) => {
                        terms.push((up, -c.abs()));
                        diag += c.abs();
                        local += c.abs();
                    }
                    None => return Some(Stencil::Inflow),
                }
            }
            rate = rate.max(local);
            Some(Stencil::Interior(terms, diag))
        })
        .collect();
    let sub = ((dt * rate) - 1e-12).ceil().max(1.0) as usize;
    let delta = dt / sub as f64;

    let inflow_value = |i: usize, t: f64| -> f64 {
        let x = g.node(i);
        match inflow {
            Inflow::Absent | Inflow::Zero => 0.0,
            Inflow::Function(f) => f.eval(&x[..dim], t),
            Inflow::Trace(tr) => tr.value_at(tr.nearest(&x[..dim]), t),
        }
    };

    let kk = times.len();
    let mut values = vec![0.0; n * kk];
    let mut u: Vec<f64> = (0..n).map(|i| if g.active(i) { a.values()[i] } else { 0.0 }).collect();
    values[..n].copy_from_slice(&u);
    let pv = p.values();
    let mut next = u.clone();
    for k in 1..kk {
        for s in 0..sub {
            let t = times[k - 1] + delta * (s + 1) as f64;
            for i in 0..n {
                next[i] = match &stencils[i] {
                    None => 0.0,
                    Some(Stencil::Inflow) => inflow_value(i, t),
                    Some(Stencil::Interior(terms, diag)) => {
                        let adv = diag * u[i] + terms.iter().map(|(j, c)| c * u[*j]).sum::<f64>();
                        u[i] - delta * (adv + pv[i] * u[i])
                    }
                };
            }
            std::mem::swap(&mut u, &mut next);
        }
        values[k * n..(k + 1) * n].copy_from_slice(&u);
    }
    let (det, init) = determinacy(h, inflow, &times);
    let out = SpaceTimeField::from_values(g, times, values, vec![true; n * kk])?;
    Ok(out.with_masks(det, init))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::transport::solve_forward;
    use std::sync::Arc;

    fn bump(x: &[f64]) -> f64 {
        (-40.0 * ((x[0] - 0.35).powi(2) + (x[1] - 0.5).powi(2))).exp()
    }

    fn max_diff(a: &SpaceTimeField, b: &SpaceTimeField) -> f64 {
        let n = a.grid().len();
        let mut m = 0.0f64;
        for k in 0..a.n_times() {
            for i in 0..n {
                if a.determined(i, k) {
                    m = m.max((a.value(i, k) - b.value(i, k)).abs());
                }
            }
        }
        m
    }

    #[test]
    fn upwind_converges_at_first_order() {
        let mut errs = vec![];
        for n in [32, 64, 128] {
            let g = Arc::new(Grid::boxed(&[0.0, 0.0], &[1.0, 1.0], &[n, n]).unwrap());
            let h = VectorField::constant(g.clone(), &[1.0, 0.0]);
            let p = ScalarField::constant(g.clone(), 0.0);
            let a = ScalarField::from_fn(g.clone(), bump);
            let dt = 0.5 / n as f64;
            let mc = solve_forward(&h, &p, &a, &Inflow::Zero, 0.25, dt).unwrap();
            let fd = solve_forward_fd(&h, &p, &a, &Inflow::Zero, 0.25, dt).unwrap();
            errs.push(max_diff(&mc, &fd));
        }
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order > 0.8, "{errs:?}");
        }
    }

    #[test]
    fn zero_data_gives_zero() {
        let g = Arc::new(Grid::boxed(&[0.0, 0.0], &[1.0, 1.0], &[16, 16]).unwrap());
        let h = VectorField::from_fn(g.clone(), |x, o| {
            o[0] = 1.0 + 0.2 * x[1];
            o[1] = -0.5;
        });
        let p = ScalarField::constant(g.clone(), 0.4);
        let a = ScalarField::constant(g.clone(), 0.0);
        let u = solve_forward_fd(&h, &p, &a, &Inflow::Zero, 0.5, 1.0 / 32.0).unwrap();
        assert!(u.values().iter().all(|v| *v == 0.0));
    }
}
