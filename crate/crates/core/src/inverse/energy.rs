//! Energy of the time-differentiated linearized solution against its
//! Gronwall bound.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{l2_norm, ScalarField, VectorField};
use crate::transport::{pde_residual, solve_with_source, BoundaryTrace, Inflow, Source, SpaceTimeField, SpaceTimeFn};

/// `dR/dt` of a closed form by fourth-order centered differences.
pub(crate) struct TimeDerivative(pub Arc<dyn SpaceTimeFn>);

impl SpaceTimeFn for TimeDerivative {
    fn eval(&self, x: &[f64], t: f64) -> f64 {
        let e = 1e-3;
        let r = &self.0;
        (8.0 * (r.eval(x, t + e) - r.eval(x, t - e)) - (r.eval(x, t + 2.0 * e) - r.eval(x, t - 2.0 * e)))
            / (12.0 * e)
    }
}

/// Solve `dy1/dt + H . grad y1 + p1 y1 = (dR/dt) f`, `y1(., 0) = R(., 0) f`.
pub fn solve_rate_system(
    h: &VectorField,
    p1: &ScalarField,
    r: Arc<dyn SpaceTimeFn>,
    f: &ScalarField,
    inflow: &Inflow,
    t_final: f64,
    dt: f64,
) -> Result<SpaceTimeField> {
    let (r0, ff) = (r.clone(), f.clone());
    let a = ScalarField::from_fn(f.grid().clone(), move |x| r0.eval(x, 0.0) * ff.eval(x));
    let drdt = TimeDerivative(r);
    solve_with_source(h, p1, Some(&a), Source { r: &drdt, f }, inflow, t_final, dt)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EnergyConfig {
    /// Allowed median residual relative to the solution scale. The median
    /// ignores the weak discontinuities that inflow corners and sign changes
    /// of `H . nu` carry into the domain.
    pub residual_tol: f64,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        Self { residual_tol: 0.05 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnergyReport {
    pub times: Vec<f64>,
    /// `E(t) = int_D |y1(x, t)|^2 dx`
    pub energy: Vec<f64>,
    pub rhs_bound: f64,
    /// Gronwall constant multiplying `||f||^2 + ||y1||^2_{L2(G- x (0,T))}`.
    pub constant: f64,
    /// Exponential rate `K = sup (div H - 2 p1)_+ + 1`.
    pub rate: f64,
    pub f_norm2: f64,
    pub inflow_norm2: f64,
    pub residual_median: f64,
    pub holds: bool,
}

impl EnergyReport {
    pub fn is_nonincreasing(&self, rel_tol: f64) -> bool {
        let scale = self.energy.iter().fold(0.0, |m: f64, e| m.max(*e));
        self.energy.windows(2).all(|w| w[1] <= w[0] + rel_tol * scale)
    }
}

fn div_at(h: &VectorField, x: &[f64]) -> f64 {
    let j = h.jacobian_at(x);
    (0..h.dim()).map(|k| j[k][k]).sum()
}

/// `y1` must solve the rate system; `gamma_minus` holds its boundary values
/// (samples with `H . nu <= 0` are used).
pub fn energy_check(
    y1: &SpaceTimeField,
    h: &VectorField,
    p1: &ScalarField,
    r: Arc<dyn SpaceTimeFn>,
    f: &ScalarField,
    gamma_minus: &BoundaryTrace,
    cfg: &EnergyConfig,
) -> Result<EnergyReport> {
    let g = y1.grid();
    let dim = g.dim();
    let kk = y1.n_times();
    let n = g.len();
    let drdt = TimeDerivative(r.clone());

    let res = pde_residual(y1, h, p1, Some(Source { r: &drdt, f }));
    let mut abs: Vec<f64> = res
        .values
        .iter()
        .zip(&res.valid)
        .filter(|(_, v)| **v)
        .map(|(r, _)| r.abs())
        .collect();
    abs.sort_by(f64::total_cmp);
    let residual_median = if abs.is_empty() {
        0.0
    } else {
        abs[(abs.len() - 1) / 2]
    };
    let mut s_sup = 0.0f64;
    let mut r0_sup = 0.0f64;
    for i in g.active_nodes() {
        let x = &g.node(i)[..dim];
        r0_sup = r0_sup.max(r.eval(x, 0.0).abs());
        for &t in y1.times() {
            s_sup = s_sup.max(drdt.eval(x, t).abs());
        }
    }
    let y_sup = y1.values().iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    let scale = y_sup.max(s_sup * f.max_abs());
    if residual_median > cfg.residual_tol * scale {
        return Err(Error::InvalidInput(format!(
            "y1 does not solve the rate system: residual {residual_median:.3e} above {:.3e}",
            cfg.residual_tol * scale
        )));
    }

    let energy: Vec<f64> = (0..kk)
        .map(|k| {
            g.active_nodes()
                .map(|i| g.weights()[i] * y1.values()[k * n + i].powi(2))
                .sum()
        })
        .collect();
    let growth = g
        .active_nodes()
        .map(|i| {
            let x = g.node(i);
            div_at(h, &x) - 2.0 * p1.values()[i]
        })
        .fold(0.0f64, f64::max);
    let rate = growth.max(0.0) + 1.0;
    let t = y1.t_final();
    let h_sup = h.max_speed();
    let constant = (rate * t).exp() * (r0_sup * r0_sup + t * s_sup * s_sup).max(h_sup);
    let f_norm2 = l2_norm(f, None)?.powi(2);
    let inflow_norm2 = gamma_minus
        .l2_u(|bp| h.flux(&bp.x, &bp.normal) <= 0.0)
        .powi(2);
    let rhs_bound = constant * (f_norm2 + inflow_norm2);
    let emax = energy.iter().fold(0.0, |m: f64, e| m.max(*e));
    Ok(EnergyReport {
        times: y1.times().to_vec(),
        holds: emax <= rhs_bound,
        energy,
        rhs_bound,
        constant,
        rate,
        f_norm2,
        inflow_norm2,
        residual_median,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::transport::boundary_trace;

    #[test]
    fn unit_source_in_one_dimension() {
        let g = Arc::new(Grid::boxed(&[0.0], &[1.0], &[64]).unwrap());
        let h = VectorField::constant(g.clone(), &[1.0]);
        let p1 = ScalarField::constant(g.clone(), 0.0);
        let f = ScalarField::constant(g.clone(), 1.0);
        let r: Arc<dyn SpaceTimeFn> = Arc::new(|_: &[f64], _: f64| 1.0);
        let y1 = solve_rate_system(&h, &p1, r.clone(), &f, &Inflow::Zero, 0.5, 1.0 / 64.0).unwrap();
        let tr = boundary_trace(&y1, None);
        let rep = energy_check(&y1, &h, &p1, r, &f, &tr, &EnergyConfig::default()).unwrap();
        assert!(rep.holds);
        // y1 is the indicator of x > t, so E(t) = 1 - t up to a cell
        for (t, e) in rep.times.iter().zip(&rep.energy) {
            assert!((e - (1.0 - t)).abs() < 1.5 / 64.0, "{t} {e}");
        }
        assert!(rep.is_nonincreasing(1e-12));
    }

    #[test]
    fn zero_source_gives_zero_energy() {
        let g = Arc::new(Grid::boxed(&[0.0, 0.0], &[1.0, 1.0], &[16, 16]).unwrap());
        let h = VectorField::constant(g.clone(), &[1.0, 0.5]);
        let p1 = ScalarField::constant(g.clone(), 0.2);
        let f = ScalarField::constant(g.clone(), 0.0);
        let r: Arc<dyn SpaceTimeFn> = Arc::new(|x: &[f64], t: f64| 1.0 + x[0] * t);
        let y1 = solve_rate_system(&h, &p1, r.clone(), &f, &Inflow::Zero, 0.5, 1.0 / 32.0).unwrap();
        let tr = boundary_trace(&y1, None);
        let rep = energy_check(&y1, &h, &p1, r, &f, &tr, &EnergyConfig::default()).unwrap();
        assert!(rep.energy.iter().all(|e| *e == 0.0));
        assert!(rep.holds);
    }

    #[test]
    fn non_solution_is_rejected() {
        let g = Arc::new(Grid::boxed(&[0.0], &[1.0], &[32]).unwrap());
        let h = VectorField::constant(g.clone(), &[1.0]);
        let p1 = ScalarField::constant(g.clone(), 0.0);
        let f = ScalarField::constant(g.clone(), 1.0);
        let r: Arc<dyn SpaceTimeFn> = Arc::new(|_: &[f64], _: f64| 1.0);
        let times: Vec<f64> = (0..=16).map(|k| k as f64 / 32.0).collect();
        let y1 = SpaceTimeField::from_fn(g, times, |x, t| (5.0 * x[0] + 3.0 * t).sin());
        let tr = boundary_trace(&y1, None);
        assert!(matches!(
            energy_check(&y1, &h, &p1, r, &f, &tr, &EnergyConfig::default()),
            Err(Error::InvalidInput(_))
        ));
    }
}
