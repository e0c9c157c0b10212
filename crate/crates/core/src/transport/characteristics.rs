//! Characteristic curves `dX/ds = H(X)` integrated with classical RK4.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::VectorField;
use crate::grid::{Grid, Point, Sheet, MAX_DIM};

/// How a characteristic path ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Exit {
    InitialPlane,
    Gamma1,
    Gamma2,
    TimeHorizon,
}

impl From<Sheet> for Exit {
    fn from(s: Sheet) -> Self {
        match s {
            Sheet::Gamma1 => Exit::Gamma1,
            Sheet::Gamma2 => Exit::Gamma2,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct TraceConfig {
    /// Fixed RK4 step in time units.
    pub step: f64,
    pub max_steps: usize,
}

impl TraceConfig {
    pub fn new(step: f64) -> Self {
        Self {
            step,
            max_steps: 1_000_000,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PathSample {
    pub t: f64,
    pub x: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CharacteristicPath {
    pub anchor: Vec<f64>,
    pub t_anchor: f64,
    pub samples: Vec<PathSample>,
    pub exit: Exit,
}

impl CharacteristicPath {
    pub fn end(&self) -> &PathSample {
        self.samples.last().expect("paths hold at least the anchor")
    }
}

/// One RK4 step of `dX/ds = dir * H(X)`.
pub(crate) fn rk4_step(h: &VectorField, x: &Point, step: f64, dir: f64) -> (Point, Point) {
    let dim = h.dim();
    let mut k = [[0.0; MAX_DIM]; 4];
    let mut stage = *x;
    let mut mid = *x;
    for s in 0..4 {
        k[s] = h.at(&stage);
        let c = if s < 2 { 0.5 } else { 1.0 };
        if s < 3 {
            for i in 0..dim {
                stage[i] = x[i] + c * step * dir * k[s][i];
            }
            if s == 1 {
                mid = stage;
            }
        }
    }
    let mut out = *x;
    for i in 0..dim {
        out[i] += step * dir * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]) / 6.0;
    }
    (out, mid)
}

/// Fraction of a step at which the path leaves the region, by bisection.
pub(crate) fn exit_fraction(
    h: &VectorField,
    grid: &Grid,
    x: &Point,
    step: f64,
    dir: f64,
    slack: f64,
) -> (f64, Point) {
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        let (y, _) = rk4_step(h, x, mid * step, dir);
        if grid.contains(&y, slack) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (y, _) = rk4_step(h, x, lo * step, dir);
    (lo, y)
}

pub(crate) fn boundary_slack(grid: &Grid) -> f64 {
    1e-12 * grid.diameter().max(1e-300)
}

/// Integrate the characteristic through `(x, t0)` to time `t1` (backward
/// when `t1 < t0`), stopping at the first exit from the region or at `t = 0`.
pub fn trace_characteristic(
    h: &VectorField,
    grid: &Grid,
    x: &[f64],
    t0: f64,
    t1: f64,
    cfg: &TraceConfig,
) -> Result<CharacteristicPath> {
    let dim = grid.dim();
    if x.len() != dim {
        return Err(Error::Domain(format!(
            "point has {} coordinates, grid dimension is {dim}",
            x.len()
        )));
    }
    let slack = boundary_slack(grid);
    if !grid.contains(x, slack) {
        return Err(Error::Domain(format!("anchor {x:?} lies outside the region")));
    }
    if !(cfg.step > 0.0) {
        return Err(Error::Parameter(format!("step = {} must be positive", cfg.step)));
    }
    let dir = if t1 < t0 { -1.0 } else { 1.0 };
    // a backward path cannot go below t = 0
    let target = if dir < 0.0 { t1.max(0.0) } else { t1 };
    let span = (target - t0).abs();
    let steps = (span / cfg.step).ceil() as usize;
    if steps > cfg.max_steps {
        return Err(Error::Runaway { cap: cfg.max_steps });
    }
    let step = if steps > 0 { span / steps as f64 } else { 0.0 };
    let mut pos = [0.0; MAX_DIM];
    pos[..dim].copy_from_slice(x);
    let mut samples = vec![PathSample {
        t: t0,
        x: x.to_vec(),
    }];
    for j in 0..steps {
        let t = t0 + dir * step * j as f64;
        let (next, _) = rk4_step(h, &pos, step, dir);
        if !grid.contains(&next, slack) || next[..dim].iter().any(|v| !v.is_finite()) {
            let (frac, y) = exit_fraction(h, grid, &pos, step, dir, slack);
            samples.push(PathSample {
                t: t + dir * frac * step,
                x: y[..dim].to_vec(),
            });
            return Ok(CharacteristicPath {
                anchor: x.to_vec(),
                t_anchor: t0,
                samples,
                exit: grid.exit_sheet(&y).into(),
            });
        }
        pos = next;
        samples.push(PathSample {
            t: if j + 1 == steps {
                target
            } else {
                t + dir * step
            },
            x: pos[..dim].to_vec(),
        });
    }
    let exit = if dir < 0.0 && target <= 0.0 {
        Exit::InitialPlane
    } else {
        Exit::TimeHorizon
    };
    Ok(CharacteristicPath {
        anchor: x.to_vec(),
        t_anchor: t0,
        samples,
        exit,
    })
}

/// Backward path from a node over `[0, span]` on substeps of length `sigma`,
/// with the running integral of `p`.
#[derive(Clone, Debug)]
pub(crate) struct NodePath {
    /// Positions `X(-j sigma)` for `j = 0..=steps` (truncated at exit).
    pub pos: Vec<Point>,
    /// `int_0^{j sigma} p(X(-r)) dr`.
    pub damp: Vec<f64>,
    /// Exit time, point, damping and sheet, if the path left the region.
    pub exit: Option<(f64, Point, f64, Sheet)>,
}

pub(crate) fn node_path<P: Fn(&[f64]) -> f64>(
    h: &VectorField,
    p: &P,
    grid: &Grid,
    x: &Point,
    sigma: f64,
    steps: usize,
) -> NodePath {
    let slack = boundary_slack(grid);
    let mut pos = Vec::with_capacity(steps + 1);
    let mut damp = Vec::with_capacity(steps + 1);
    pos.push(*x);
    damp.push(0.0);
    let mut cur = *x;
    let mut acc = 0.0;
    for _ in 0..steps {
        let (next, mid) = rk4_step(h, &cur, sigma, -1.0);
        if !grid.contains(&next, slack) {
            let (frac, y) = exit_fraction(h, grid, &cur, sigma, -1.0, slack);
            let (_, m) = rk4_step(h, &cur, 0.5 * frac * sigma, -1.0);
            let exit_damp = acc + frac * sigma * p(&m);
            let tau = sigma * (pos.len() - 1) as f64 + frac * sigma;
            return NodePath {
                pos,
                damp,
                exit: Some((tau, y, exit_damp, grid.exit_sheet(&y))),
            };
        }
        acc += sigma * p(&mid);
        cur = next;
        pos.push(cur);
        damp.push(acc);
    }
    NodePath {
        pos,
        damp,
        exit: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn square() -> Arc<Grid> {
        Arc::new(Grid::boxed(&[0.0, 0.0], &[1.0, 1.0], &[16, 16]).unwrap())
    }

    #[test]
    fn constant_advection_backward() {
        let g = square();
        let h = VectorField::constant(g.clone(), &[1.0, 0.0]);
        let p = trace_characteristic(&h, &g, &[0.5, 0.5], 0.3, 0.0, &TraceConfig::new(0.01)).unwrap();
        assert_eq!(p.exit, Exit::InitialPlane);
        let e = p.end();
        assert!((e.x[0] - 0.2).abs() < 1e-14 && (e.x[1] - 0.5).abs() < 1e-14);
        assert_eq!(e.t, 0.0);
    }

    #[test]
    fn exit_through_inflow_face() {
        let g = square();
        let h = VectorField::constant(g.clone(), &[1.0, 0.0]);
        let p = trace_characteristic(&h, &g, &[0.05, 0.5], 0.3, 0.0, &TraceConfig::new(0.01)).unwrap();
        assert_eq!(p.exit, Exit::Gamma2);
        let e = p.end();
        assert!((0.3 - e.t - 0.05).abs() < 1e-10);
        assert!(e.x[0].abs() < 1e-10);
    }

    #[test]
    fn exponential_flow_matches_closed_form() {
        let g = Arc::new(Grid::boxed(&[-1.0, 0.0], &[1.0, 1.0], &[8, 8]).unwrap());
        let h = VectorField::from_fn(g.clone(), |x, o| {
            o[0] = x[0] + 0.5;
            o[1] = 0.0;
        });
        let t = 2f64.ln();
        let p = trace_characteristic(&h, &g, &[0.5, 0.5], t, 0.0, &TraceConfig::new(1e-3)).unwrap();
        assert!(p.end().x[0].abs() < 1e-8);
        // dX/ds = H(X) along the samples, checked by centered differences
        for w in p.samples.windows(3) {
            let dt = w[2].t - w[0].t;
            let v = (w[2].x[0] - w[0].x[0]) / dt;
            assert!((v - (w[1].x[0] + 0.5)).abs() < 1e-6);
        }
    }

    #[test]
    fn forward_then_backward_returns() {
        let g = Arc::new(Grid::boxed(&[-2.0, -2.0], &[2.0, 2.0], &[8, 8]).unwrap());
        let h = VectorField::from_fn(g.clone(), |x, o| {
            o[0] = 1.0 + 0.3 * x[1].sin();
            o[1] = 0.5 + 0.2 * x[0] * x[0];
        });
        let cfg = TraceConfig::new(1e-3);
        let f = trace_characteristic(&h, &g, &[0.1, -0.2], 0.0, 0.7, &cfg).unwrap();
        assert_eq!(f.exit, Exit::TimeHorizon);
        let b = trace_characteristic(&h, &g, &f.end().x, 0.7, 0.0, &cfg).unwrap();
        assert!((b.end().x[0] - 0.1).abs() < 1e-11 && (b.end().x[1] + 0.2).abs() < 1e-11);
    }

    #[test]
    fn step_cap_is_runaway() {
        let g = square();
        let h = VectorField::constant(g.clone(), &[1.0, 0.0]);
        let cfg = TraceConfig {
            step: 1e-3,
            max_steps: 10,
        };
        assert!(matches!(
            trace_characteristic(&h, &g, &[0.5, 0.5], 0.3, 0.0, &cfg),
            Err(Error::Runaway { cap: 10 })
        ));
    }
}
