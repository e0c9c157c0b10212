//! Boundary traces, discrete residuals and initial rates of solutions.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{ScalarField, VectorField};
use crate::grid::{BoundaryPoint, Sheet};

use super::{Source, SpaceTimeField};

/// Values of `u` and `du/dt` on boundary samples at the solution's times.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundaryTrace {
    pub dim: usize,
    pub points: Vec<BoundaryPoint>,
    pub times: Vec<f64>,
    /// Time-major: `k * points + j`.
    pub u: Vec<f64>,
    pub dtu: Vec<f64>,
    /// Some sample used an undetermined interpolation node.
    pub partial: bool,
    pub undetermined: usize,
}

impl BoundaryTrace {
    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    pub fn u_at(&self, j: usize, k: usize) -> f64 {
        self.u[k * self.points.len() + j]
    }

    pub fn dtu_at(&self, j: usize, k: usize) -> f64 {
        self.dtu[k * self.points.len() + j]
    }

    /// Index of the sample closest to `x`.
    pub fn nearest(&self, x: &[f64]) -> usize {
        let d = |p: &BoundaryPoint| -> f64 {
            x.iter().zip(&p.x).map(|(a, b)| (a - b).powi(2)).sum()
        };
        (0..self.points.len())
            .min_by(|&a, &b| d(&self.points[a]).total_cmp(&d(&self.points[b])))
            .unwrap_or(0)
    }

    /// `u` at sample `j`, linear in time (clamped to the time range).
    pub fn value_at(&self, j: usize, t: f64) -> f64 {
        let kk = self.times.len();
        if kk == 1 {
            return self.u_at(j, 0);
        }
        let dt = self.times[1] - self.times[0];
        let s = ((t - self.times[0]) / dt).clamp(0.0, (kk - 1) as f64);
        let k0 = (s.floor() as usize).min(kk - 2);
        let w = s - k0 as f64;
        (1.0 - w) * self.u_at(j, k0) + w * self.u_at(j, k0 + 1)
    }

    /// `L2(S x (0, T))` norm of `du/dt` over the samples selected by `keep`,
    /// with surface weights and the trapezoid rule in time.
    pub fn l2_dtu<F: Fn(&BoundaryPoint) -> bool>(&self, keep: F) -> f64 {
        self.l2_of(&self.dtu, keep)
    }

    pub fn l2_u<F: Fn(&BoundaryPoint) -> bool>(&self, keep: F) -> f64 {
        self.l2_of(&self.u, keep)
    }

    fn l2_of<F: Fn(&BoundaryPoint) -> bool>(&self, v: &[f64], keep: F) -> f64 {
        let np = self.points.len();
        let kk = self.times.len();
        let dt = if kk > 1 {
            self.times[1] - self.times[0]
        } else {
            1.0
        };
        let mut s = 0.0;
        for k in 0..kk {
            let wt = if kk == 1 {
                1.0
            } else if k == 0 || k == kk - 1 {
                0.5 * dt
            } else {
                dt
            };
            for (j, p) in self.points.iter().enumerate() {
                if keep(p) {
                    s += wt * p.weight * v[k * np + j].powi(2);
                }
            }
        }
        s.sqrt()
    }

    /// Sample-wise difference `self - other` (same samples and times).
    pub fn difference(&self, other: &BoundaryTrace) -> Result<BoundaryTrace> {
        if self.u.len() != other.u.len() {
            return Err(Error::Data("traces on different samples".into()));
        }
        Ok(BoundaryTrace {
            dim: self.dim,
            points: self.points.clone(),
            times: self.times.clone(),
            u: self.u.iter().zip(&other.u).map(|(a, b)| a - b).collect(),
            dtu: self.dtu.iter().zip(&other.dtu).map(|(a, b)| a - b).collect(),
            partial: self.partial || other.partial,
            undetermined: self.undetermined.max(other.undetermined),
        })
    }

    /// CSV with columns `time, x1.., u, dtu, sheet`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let dim = self.dim;
        let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
        let mut header = vec!["time".to_string()];
        header.extend((1..=dim).map(|i| format!("x{i}")));
        header.extend(["u".into(), "dtu".into(), "sheet".into()]);
        w.write_record(&header)?;
        for (k, t) in self.times.iter().enumerate() {
            for (j, p) in self.points.iter().enumerate() {
                let mut row = vec![format!("{t:.17e}")];
                row.extend(p.x[..dim].iter().map(|v| format!("{v:.17e}")));
                row.push(format!("{:.17e}", self.u_at(j, k)));
                row.push(format!("{:.17e}", self.dtu_at(j, k)));
                row.push(p.sheet.name().into());
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Interpolate `u` onto the boundary samples of its lattice (optionally a
/// single sheet); `du/dt` by centered time differences, second-order
/// one-sided at `t = 0` and `t = T`.
pub fn boundary_trace(u: &SpaceTimeField, sheet: Option<Sheet>) -> BoundaryTrace {
    let points: Vec<BoundaryPoint> = u
        .grid()
        .boundary()
        .iter()
        .filter(|p| sheet.is_none_or(|s| p.sheet == s))
        .cloned()
        .collect();
    trace_at_points(u, points)
}

pub fn trace_at_points(u: &SpaceTimeField, points: Vec<BoundaryPoint>) -> BoundaryTrace {
    let np = points.len();
    let kk = u.n_times();
    let dt = u.dt();
    let mut vals = vec![0.0; np * kk];
    let mut undetermined = 0;
    for k in 0..kk {
        let t = u.times()[k];
        for (j, p) in points.iter().enumerate() {
            vals[k * np + j] = u.eval(&p.x, t);
            if !u.eval_determined(&p.x, t) {
                undetermined += 1;
            }
        }
    }
    let mut dtu = vec![0.0; np * kk];
    for k in 0..kk {
        for j in 0..np {
            let v = |m: usize| vals[m * np + j];
            dtu[k * np + j] = if kk < 3 {
                (v(1) - v(0)) / dt
            } else if k == 0 {
                (-3.0 * v(0) + 4.0 * v(1) - v(2)) / (2.0 * dt)
            } else if k == kk - 1 {
                (3.0 * v(k) - 4.0 * v(k - 1) + v(k - 2)) / (2.0 * dt)
            } else {
                (v(k + 1) - v(k - 1)) / (2.0 * dt)
            };
        }
    }
    BoundaryTrace {
        dim: u.grid().dim(),
        points,
        times: u.times().to_vec(),
        u: vals,
        dtu,
        partial: undetermined > 0,
        undetermined,
    }
}

/// `du/dt(., 0)` from the first three time levels.
pub fn initial_rate(u: &SpaceTimeField) -> Result<ScalarField> {
    if u.n_times() < 3 {
        return Err(Error::Data(
            "initial rate needs at least three time levels".into(),
        ));
    }
    let g = u.grid();
    let dt = u.dt();
    let mut out = vec![0.0; g.len()];
    for i in g.active_nodes() {
        if !(0..3).all(|k| u.determined(i, k)) {
            return Err(Error::Data(format!(
                "node {i} is undetermined near t = 0; interior initial data missing"
            )));
        }
        out[i] = (-3.0 * u.value(i, 0) + 4.0 * u.value(i, 1) - u.value(i, 2)) / (2.0 * dt);
    }
    ScalarField::from_values(g.clone(), out)
}

/// `Pu - Rf` by centered space-time differences on interior nodes and
/// interior time levels where every stencil value is determined.
#[derive(Clone, Debug)]
pub struct Residual {
    /// Time-major, zero where not valid.
    pub values: Vec<f64>,
    pub valid: Vec<bool>,
}

impl Residual {
    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.valid)
            .filter(|(_, v)| **v)
            .map(|(r, _)| r.abs())
            .fold(0.0, f64::max)
    }

    pub fn count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }
}

pub fn pde_residual(
    u: &SpaceTimeField,
    h: &VectorField,
    p: &ScalarField,
    source: Option<Source<'_>>,
) -> Residual {
    let g = u.grid();
    let n = g.len();
    let dim = g.dim();
    let kk = u.n_times();
    let dt = u.dt();
    let mut values = vec![0.0; n * kk];
    let mut valid = vec![false; n * kk];
    let interior: Vec<(usize, Vec<(usize, usize)>)> = g
        .active_nodes()
        .filter_map(|i| {
            let nb: Option<Vec<(usize, usize)>> = (0..dim)
                .map(|k| Some((g.neighbor(i, k, -1)?, g.neighbor(i, k, 1)?)))
                .collect();
            nb.map(|nb| (i, nb))
        })
        .collect();
    for k in 1..kk.saturating_sub(1) {
        let t = u.times()[k];
        for (i, nb) in &interior {
            let i = *i;
            let ok = u.determined(i, k - 1)
                && u.determined(i, k + 1)
                && u.determined(i, k)
                && nb.iter().all(|(m, q)| u.determined(*m, k) && u.determined(*q, k));
            if !ok {
                continue;
            }
            let x = g.node(i);
            let hv = h.node_value(i);
            let mut r = (u.value(i, k + 1) - u.value(i, k - 1)) / (2.0 * dt);
            for (axis, (m, q)) in nb.iter().enumerate() {
                r += hv[axis] * (u.value(*q, k) - u.value(*m, k)) / (2.0 * g.spacing()[axis]);
            }
            r += p.values()[i] * u.value(i, k);
            if let Some(s) = source {
                r -= s.r.eval(&x[..dim], t) * s.f.values()[i];
            }
            values[k * n + i] = r;
            valid[k * n + i] = true;
        }
    }
    Residual { values, valid }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::transport::{solve_forward, Inflow};
    use std::sync::Arc;

    #[test]
    fn linear_trace_rate_is_minus_one() {
        let g = Arc::new(Grid::boxed(&[0.0, 0.0], &[1.0, 1.0], &[8, 8]).unwrap());
        let times: Vec<f64> = (0..=10).map(|k| 0.05 * k as f64).collect();
        let u = SpaceTimeField::from_fn(g.clone(), times.clone(), |x, t| x[0] - t);
        let tr = boundary_trace(&u, None);
        assert!(tr.dtu.iter().all(|v| (v + 1.0).abs() < 1e-12));
        let c = SpaceTimeField::from_fn(g, times, |_, _| 4.0);
        assert!(boundary_trace(&c, Some(Sheet::Gamma1)).dtu.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn exponential_trace_rate() {
        // gamma1 is the face x1 = 1
        let g = Arc::new(
            Grid::boxed_with_faces(
                &[0.0, 0.0],
                &[1.0, 0.5],
                &[64, 8],
                &[crate::grid::Face {
                    axis: 0,
                    upper: true,
                }],
            )
            .unwrap(),
        );
        let h = VectorField::from_fn(g.clone(), |x, o| {
            o[0] = x[0] + 0.5;
            o[1] = 0.0;
        });
        let p = ScalarField::constant(g.clone(), 0.0);
        let a = ScalarField::from_fn(g.clone(), |x| x[0]);
        let u = solve_forward(&h, &p, &a, &Inflow::Absent, 0.5, 1.0 / 128.0).unwrap();
        let tr = boundary_trace(&u, Some(Sheet::Gamma1));
        assert!(!tr.partial);
        for (k, t) in tr.times.iter().enumerate() {
            for j in 0..tr.n_points() {
                assert!((tr.dtu_at(j, k) + 1.5 * (-t).exp()).abs() < 1e-4);
            }
        }
        let r = pde_residual(&u, &h, &p, None);
        assert!(r.count() > 0 && r.max_abs() < 1e-3);
    }

    #[test]
    fn undetermined_samples_flag_partial_traces() {
        let g = Arc::new(Grid::boxed(&[0.0], &[1.0], &[32]).unwrap());
        let h = VectorField::constant(g.clone(), &[1.0]);
        let p = ScalarField::constant(g.clone(), 0.0);
        let a = ScalarField::constant(g.clone(), 1.0);
        let u = solve_forward(&h, &p, &a, &Inflow::Absent, 0.25, 1.0 / 32.0).unwrap();
        let tr = boundary_trace(&u, None);
        assert!(tr.partial);
        let up = boundary_trace(&u, Some(Sheet::Gamma1));
        assert!(!up.partial);
    }
}
