//! `u(x, t) = g(x + t)` on `(0, 1)` solves `du/dt - du/dx = 0`; with `g`
//! vanishing up to 1 the data at `t = 0` and at `x = 0` are zero while
//! `u(., 1)` is not.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{ScalarField, VectorField};
use crate::grid::Grid;
use crate::transport::{solve_forward, solve_forward_fd, Inflow};

/// A profile `g` of one variable.
#[derive(Clone)]
pub struct Profile {
    pub name: String,
    pub g: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl Profile {
    pub fn new<F: Fn(f64) -> f64 + Send + Sync + 'static>(name: &str, g: F) -> Self {
        Self {
            name: name.into(),
            g: Arc::new(g),
        }
    }

    /// `g(eta) = ((eta - 1)_+)^2`
    pub fn squared_ramp() -> Self {
        Self::new("squared-ramp", |e| (e - 1.0).max(0.0).powi(2))
    }
}

impl std::fmt::Debug for Profile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Profile({})", self.name)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DemoReport {
    pub profile: String,
    pub cells: usize,
    pub initial_norm: f64,
    pub boundary_norm: f64,
    pub final_norm: f64,
    /// `max |du/dt - du/dx|` by centered differences of the closed form.
    pub residual: f64,
    /// `max |u_fd - u|` of the upwind solution driven by the inflow at `x = 1`.
    pub fd_deviation: f64,
    /// Largest `|u|` over cells determined by the initial datum alone.
    pub determined_max: f64,
    pub determined_fraction: f64,
}

pub fn nonuniqueness_demo(profile: &Profile, cells: usize) -> Result<DemoReport> {
    let g = profile.g.clone();
    let probe = 401;
    let mut peak = 0.0f64;
    for j in 0..probe {
        let eta = -1.0 + 3.0 * j as f64 / (probe - 1) as f64;
        let v = g(eta);
        if !v.is_finite() {
            return Err(Error::InvalidProfile(format!("g({eta}) is not finite")));
        }
        if eta <= 1.0 && v != 0.0 {
            return Err(Error::InvalidProfile(format!(
                "g({eta}) = {v} but g must vanish for eta <= 1"
            )));
        }
        peak = peak.max(v.abs());
    }
    if peak == 0.0 {
        return Err(Error::InvalidProfile("g vanishes identically".into()));
    }
    if cells < 4 {
        return Err(Error::Resolution("at least four cells are needed".into()));
    }
    let h = 1.0 / cells as f64;
    let grid = Arc::new(Grid::boxed(&[0.0], &[1.0], &[cells])?);
    let n = grid.len();
    let x = |i: usize| i as f64 * h;
    let dt = h;
    let kk = cells + 1;
    let t = |k: usize| k as f64 * dt;

    let trap = |f: &dyn Fn(usize) -> f64| -> f64 {
        let s: f64 = (0..n)
            .map(|i| {
                let w = if i == 0 || i == n - 1 { 0.5 * h } else { h };
                w * f(i).powi(2)
            })
            .sum();
        s.sqrt()
    };
    let initial_norm = trap(&|i| g(x(i)));
    let boundary_norm = trap(&|k| g(t(k)));
    let final_norm = trap(&|i| g(x(i) + 1.0));

    let mut residual = 0.0f64;
    for k in 1..kk - 1 {
        for i in 1..n - 1 {
            let dudt = (g(x(i) + t(k + 1)) - g(x(i) + t(k - 1))) / (2.0 * dt);
            let dudx = (g(x(i + 1) + t(k)) - g(x(i - 1) + t(k))) / (2.0 * h);
            residual = residual.max((dudt - dudx).abs());
        }
    }

    let hf = VectorField::constant(grid.clone(), &[-1.0]);
    let p = ScalarField::constant(grid.clone(), 0.0);
    let gi = g.clone();
    let a = ScalarField::from_fn(grid.clone(), move |y| gi(y[0]));
    let gb = g.clone();
    let inflow = Inflow::function(move |y: &[f64], s: f64| gb(y[0] + s));
    let fd = solve_forward_fd(&hf, &p, &a, &inflow, 1.0, dt)?;
    let mut fd_deviation = 0.0f64;
    for k in 0..fd.n_times() {
        let tk = fd.times()[k];
        for i in 0..n {
            fd_deviation = fd_deviation.max((fd.value(i, k) - g(x(i) + tk)).abs());
        }
    }

    let mc = solve_forward(&hf, &p, &a, &Inflow::Absent, 1.0, dt)?;
    let (mut dmax, mut count) = (0.0f64, 0usize);
    for k in 0..mc.n_times() {
        for i in 0..n {
            if mc.from_initial(i, k) {
                dmax = dmax.max(mc.value(i, k).abs());
                count += 1;
            }
        }
    }
    Ok(DemoReport {
        profile: profile.name.clone(),
        cells,
        initial_norm,
        boundary_norm,
        final_norm,
        residual,
        fd_deviation,
        determined_max: dmax,
        determined_fraction: count as f64 / (n * mc.n_times()) as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn squared_ramp_example() {
        let p = Profile::squared_ramp();
        assert!(((p.g)(0.5 + 0.8) - 0.09).abs() < 1e-15);
        let r = nonuniqueness_demo(&p, 64).unwrap();
        assert_eq!(r.initial_norm, 0.0);
        assert_eq!(r.boundary_norm, 0.0);
        assert!((r.final_norm - (0.2f64).sqrt()).abs() < 1e-3);
        assert_eq!(r.determined_max, 0.0);
        let r2 = nonuniqueness_demo(&p, 128).unwrap();
        assert!(r2.residual <= r.residual);
        assert!(r.residual < 2.0 / 64.0);
    }

    #[test]
    fn bad_profiles() {
        assert!(matches!(
            nonuniqueness_demo(&Profile::new("zero", |_| 0.0), 16),
            Err(Error::InvalidProfile(_))
        ));
        assert!(matches!(
            nonuniqueness_demo(&Profile::new("early", |e| (e - 0.5).max(0.0)), 16),
            Err(Error::InvalidProfile(_))
        ));
    }
}
