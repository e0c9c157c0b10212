//! Coefficient reconstruction from initial rates, stability sweeps, the
//! linearized source problem and its case studies.

mod cases;
mod demo;
mod energy;
mod stability;

pub use cases::{case_experiment, lipschitz_terms, time_reversed, CaseInstance, CaseKind, CaseReport, LipschitzTerms};
pub use demo::{nonuniqueness_demo, DemoReport, Profile};
pub use energy::{energy_check, solve_rate_system, EnergyConfig, EnergyReport};
pub use stability::{
    s_balance, scaling_family, stability_sweep, sweep_pairs, BalanceResult, Branch, Coefficient, Perturbation,
    Problem, SweepConfig, SweepPair, StabilitySweep,
};

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{family_gradients, gradient_field, gradient_matrix, l2_norm_values, point_gradient, ScalarField, VectorField};
use crate::grid::{dot, MAX_DIM};
use crate::random::rng;
use crate::transport::{boundary_trace, initial_rate, solve_forward, BoundaryTrace, Inflow, SpaceTimeFn};

pub const DET_THRESHOLD: f64 = 1e-3;
pub const A_THRESHOLD: f64 = 1e-3;

/// Scalar closure `x -> value`, from a field's closed form or interpolant.
fn scalar_fn(f: &ScalarField) -> Arc<dyn Fn(&[f64]) -> f64 + Send + Sync> {
    let f = f.clone();
    Arc::new(move |x: &[f64]| f.eval(x))
}

type PointFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Inflow datum matching the solution's Taylor expansion at `t = 0` to
/// second order: `g = a + t w1 + t^2/2 w2`, where `w1 = -(H . grad a + p a)
/// + R(., 0) f` and `w2 = -(H . grad w1 + p w1) + dR/dt(., 0) f`.
pub fn compatible_inflow(
    h: &VectorField,
    p: &ScalarField,
    a: Option<&ScalarField>,
    source: Option<(Arc<dyn SpaceTimeFn>, ScalarField)>,
) -> Inflow {
    let sampled = a.is_some_and(|a| !a.is_analytic()) || source.as_ref().is_some_and(|(_, f)| !f.is_analytic());
    if sampled {
        if let Some(inflow) = lattice_inflow(h, p, a, source.clone()) {
            return inflow;
        }
    }
    let dim = h.dim();
    let a: Option<PointFn> = a.map(scalar_fn);
    let src: Option<(Arc<dyn SpaceTimeFn>, PointFn)> = source.map(|(r, f)| (r, scalar_fn(&f)));
    let w1: PointFn = {
        let (h, p, a, src) = (h.clone(), p.clone(), a.clone(), src.clone());
        Arc::new(move |x: &[f64]| {
            let mut v = 0.0;
            if let Some(a) = &a {
                let mut g = [0.0; MAX_DIM];
                point_gradient(&**a, x, &mut g[..dim]);
                v -= dot(&h.at(x)[..dim], &g[..dim]) + p.eval(x) * a(x);
            }
            if let Some((r, f)) = &src {
                v += r.eval(x, 0.0) * f(x);
            }
            v
        })
    };
    let w2: PointFn = {
        let (h, p, w1) = (h.clone(), p.clone(), w1.clone());
        Arc::new(move |x: &[f64]| {
            let mut g = [0.0; MAX_DIM];
            point_gradient(&*w1, x, &mut g[..dim]);
            let mut v = -(dot(&h.at(x)[..dim], &g[..dim]) + p.eval(x) * w1(x));
            if let Some((r, f)) = &src {
                let e = 1e-3;
                let drdt = (8.0 * (r.eval(x, e) - r.eval(x, -e))
                    - (r.eval(x, 2.0 * e) - r.eval(x, -2.0 * e)))
                    / (12.0 * e);
                v += drdt * f(x);
            }
            v
        })
    };
    Inflow::function(move |x: &[f64], t: f64| {
        a.as_ref().map_or(0.0, |a| a(x)) + t * w1(x) + 0.5 * t * t * w2(x)
    })
}

/// Initial data, boundary traces and (when granted) interior initial rates
/// of one or several solutions sharing the coefficients.
/// Lattice version of [`compatible_inflow`] for nodal data: derivatives
/// come from [`crate::fields::grad`] (one-sided at the boundary), since
/// differencing the interpolant across the lattice edge sees a flat
/// extension. `None` when the lattice is too coarse for gradients.
fn lattice_inflow(
    h: &VectorField,
    p: &ScalarField,
    a: Option<&ScalarField>,
    source: Option<(Arc<dyn SpaceTimeFn>, ScalarField)>,
) -> Option<Inflow> {
    let g = h.grid().clone();
    let dim = g.dim();
    let n = g.len();
    let transport = |v: &ScalarField| -> Option<Vec<f64>> {
        let gv = crate::fields::grad(v).ok()?;
        Some(
            (0..n)
                .map(|i| -(dot(&h.node_value(i)[..dim], gv.node_value(i)) + p.values()[i] * v.values()[i]))
                .collect(),
        )
    };
    let nodes: Vec<_> = (0..n).map(|i| g.node(i)).collect();
    let mut w1 = match a {
        Some(a) => transport(a)?,
        None => vec![0.0; n],
    };
    if let Some((r, f)) = &source {
        for i in 0..n {
            w1[i] += r.eval(&nodes[i][..dim], 0.0) * f.values()[i];
        }
    }
    let w1 = ScalarField::from_values(g.clone(), w1).ok()?;
    let mut w2 = transport(&w1)?;
    if let Some((r, f)) = &source {
        let e = 1e-3;
        for i in 0..n {
            let x = &nodes[i][..dim];
            let drdt = (8.0 * (r.eval(x, e) - r.eval(x, -e)) - (r.eval(x, 2.0 * e) - r.eval(x, -2.0 * e))) / (12.0 * e);
            w2[i] += drdt * f.values()[i];
        }
    }
    let w2 = ScalarField::from_values(g, w2).ok()?;
    let a = a.cloned();
    Some(Inflow::function(move |x: &[f64], t: f64| {
        a.as_ref().map_or(0.0, |a| a.eval(x)) + t * w1.interpolate(x) + 0.5 * t * t * w2.interpolate(x)
    }))
}

#[derive(Clone, Debug)]
pub struct MeasurementSet {
    pub initial: Vec<ScalarField>,
    pub traces: Vec<BoundaryTrace>,
    pub initial_rates: Option<Vec<ScalarField>>,
    /// Largest additive perturbation applied so far.
    pub noise: f64,
}

impl MeasurementSet {
    pub fn new(
        initial: Vec<ScalarField>,
        traces: Vec<BoundaryTrace>,
        initial_rates: Option<Vec<ScalarField>>,
    ) -> Result<Self> {
        if traces.len() != initial.len() {
            return Err(Error::Arity {
                expected: initial.len(),
                got: traces.len(),
            });
        }
        if let Some(r) = &initial_rates {
            if r.len() != initial.len() {
                return Err(Error::Arity {
                    expected: initial.len(),
                    got: r.len(),
                });
            }
        }
        Ok(Self {
            initial,
            traces,
            initial_rates,
            noise: 0.0,
        })
    }

    /// Solve forward for each initial datum (with a compatible inflow) and
    /// record traces on the whole boundary and initial rates.
    pub fn synthesize(
        h: &VectorField,
        p: &ScalarField,
        family: &[ScalarField],
        t_final: f64,
        dt: f64,
    ) -> Result<Self> {
        let mut traces = Vec::with_capacity(family.len());
        let mut rates = Vec::with_capacity(family.len());
        for a in family {
            let inflow = compatible_inflow(h, p, Some(a), None);
            let u = solve_forward(h, p, a, &inflow, t_final, dt)?;
            traces.push(boundary_trace(&u, None));
            rates.push(initial_rate(&u)?);
        }
        Self::new(family.to_vec(), traces, Some(rates))
    }

    /// Additive uniform noise in `[-level, level]` on the traces.
    pub fn perturb_traces(&self, level: f64, seed: u64) -> Self {
        let mut r = rng(seed);
        let mut out = self.clone();
        for tr in &mut out.traces {
            for v in tr.u.iter_mut().chain(tr.dtu.iter_mut()) {
                *v += r.random_range(-1.0..=1.0) * level;
            }
        }
        out.noise = out.noise.max(level);
        out
    }

    /// Additive uniform noise in `[-level, level]` on the initial rates.
    pub fn perturb_rates(&self, level: f64, seed: u64) -> Result<Self> {
        let mut r = rng(seed);
        let mut out = self.clone();
        if let Some(rates) = &mut out.initial_rates {
            for f in rates.iter_mut() {
                let v: Vec<f64> = f
                    .values()
                    .iter()
                    .map(|v| v + r.random_range(-1.0..=1.0) * level)
                    .collect();
                *f = ScalarField::from_values(f.grid().clone(), v)?;
            }
        }
        out.noise = out.noise.max(level);
        Ok(out)
    }
}

#[derive(Clone, Debug)]
pub enum Estimate {
    Vector(VectorField),
    Scalar(ScalarField),
}

#[derive(Clone, Debug)]
pub struct ReconstructionResult {
    pub estimate: Estimate,
    /// Per-node residual of the nodal linear relation (zero off the mask).
    pub residual: Vec<f64>,
    pub error_l2: Option<f64>,
    pub relative_error: Option<f64>,
    /// Smallest singular value of the gradient matrix (or smallest `|a|`).
    pub conditioning: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReconstructionSummary {
    pub max_residual: f64,
    pub error_l2: Option<f64>,
    pub relative_error: Option<f64>,
    pub conditioning: f64,
}

impl ReconstructionResult {
    pub fn max_residual(&self) -> f64 {
        self.residual.iter().fold(0.0, |m, r| m.max(r.abs()))
    }

    pub fn summary(&self) -> ReconstructionSummary {
        ReconstructionSummary {
            max_residual: self.max_residual(),
            error_l2: self.error_l2,
            relative_error: self.relative_error,
            conditioning: self.conditioning,
        }
    }

    pub fn vector(&self) -> Option<&VectorField> {
        match &self.estimate {
            Estimate::Vector(v) => Some(v),
            Estimate::Scalar(_) => None,
        }
    }

    pub fn scalar(&self) -> Option<&ScalarField> {
        match &self.estimate {
            Estimate::Scalar(s) => Some(s),
            Estimate::Vector(_) => None,
        }
    }
}

fn rates(meas: &MeasurementSet) -> Result<&[ScalarField]> {
    meas.initial_rates
        .as_deref()
        .ok_or_else(|| Error::Data("interior initial rates were not supplied".into()))
}

/// `(|| est - truth ||, || est - truth || / || truth ||)` of vector samples.
fn vector_error(est: &VectorField, truth: &VectorField) -> Result<(f64, f64)> {
    let g = est.grid();
    let dim = g.dim();
    let mut diff = vec![0.0; g.len()];
    let mut size = vec![0.0; g.len()];
    for i in g.active_nodes() {
        let t = truth.at(&g.node(i));
        let e = est.node_value(i);
        diff[i] = (0..dim).map(|k| (e[k] - t[k]).powi(2)).sum::<f64>().sqrt();
        size[i] = dot(&t[..dim], &t[..dim]).sqrt();
    }
    let err = l2_norm_values(g, &diff, None)?;
    let norm = l2_norm_values(g, &size, None)?;
    Ok((err, if norm > 0.0 { err / norm } else { err }))
}

fn scalar_error(est: &ScalarField, truth: &ScalarField) -> Result<(f64, f64)> {
    let g = est.grid();
    let mut diff = vec![0.0; g.len()];
    let mut size = vec![0.0; g.len()];
    for i in g.active_nodes() {
        let t = truth.eval(&g.node(i)[..g.dim()]);
        diff[i] = est.values()[i] - t;
        size[i] = t;
    }
    let err = l2_norm_values(g, &diff, None)?;
    let norm = l2_norm_values(g, &size, None)?;
    Ok((err, if norm > 0.0 { err / norm } else { err }))
}

/// Solve `(grad a_1, ..., grad a_n)^T H = -(du_k/dt(., 0) + p a_k)_k` at
/// every node.
pub fn reconstruct_h(
    meas: &MeasurementSet,
    p: &ScalarField,
    det_threshold: f64,
    truth: Option<&VectorField>,
) -> Result<ReconstructionResult> {
    let rates = rates(meas)?;
    let grads = family_gradients(&meas.initial)?;
    let g = meas.initial[0].grid().clone();
    let dim = g.dim();
    let mut values = vec![0.0; g.len() * dim];
    let mut residual = vec![0.0; g.len()];
    let mut conditioning = f64::INFINITY;
    for i in g.active_nodes() {
        let m = gradient_matrix(&grads, i);
        let det = m.determinant();
        if !(det.abs() >= det_threshold) {
            return Err(Error::IllPosedFamily {
                node: i,
                det: det.abs(),
                threshold: det_threshold,
            });
        }
        conditioning = conditioning.min(m.singular_values().min());
        let b = nalgebra::DVector::from_fn(dim, |k, _| {
            -(rates[k].values()[i] + p.values()[i] * meas.initial[k].values()[i])
        });
        let sol = m
            .clone()
            .lu()
            .solve(&b)
            .ok_or_else(|| Error::IllPosedFamily {
                node: i,
                det: det.abs(),
                threshold: det_threshold,
            })?;
        residual[i] = (&m * &sol - &b).amax();
        values[i * dim..(i + 1) * dim].copy_from_slice(sol.as_slice());
    }
    let est = VectorField::from_values(g, values)?;
    let (error_l2, relative_error) = match truth {
        Some(t) => {
            let (e, r) = vector_error(&est, t)?;
            (Some(e), Some(r))
        }
        None => (None, None),
    };
    Ok(ReconstructionResult {
        estimate: Estimate::Vector(est),
        residual,
        error_l2,
        relative_error,
        conditioning,
    })
}

/// `p = -(du/dt(., 0) + H . grad a) / a` at every node.
pub fn reconstruct_p(
    meas: &MeasurementSet,
    h: &VectorField,
    a_threshold: f64,
    truth: Option<&ScalarField>,
) -> Result<ReconstructionResult> {
    if meas.initial.len() != 1 {
        return Err(Error::Arity {
            expected: 1,
            got: meas.initial.len(),
        });
    }
    let rate = &rates(meas)?[0];
    let a = &meas.initial[0];
    let g = a.grid().clone();
    let dim = g.dim();
    let ga = gradient_field(a)?;
    let mut values = vec![0.0; g.len()];
    let mut residual = vec![0.0; g.len()];
    let mut conditioning = f64::INFINITY;
    for i in g.active_nodes() {
        let av = a.values()[i];
        if !(av.abs() >= a_threshold) {
            return Err(Error::DegenerateInitialDatum {
                node: i,
                value: av.abs(),
                threshold: a_threshold,
            });
        }
        conditioning = conditioning.min(av.abs());
        let adv = dot(&h.node_value(i)[..dim], &ga.node_value(i)[..dim]);
        let pv = -(rate.values()[i] + adv) / av;
        residual[i] = av * pv + rate.values()[i] + adv;
        values[i] = pv;
    }
    let est = ScalarField::from_values(g, values)?;
    let (error_l2, relative_error) = match truth {
        Some(t) => {
            let (e, r) = scalar_error(&est, t)?;
            (Some(e), Some(r))
        }
        None => (None, None),
    };
    Ok(ReconstructionResult {
        estimate: Estimate::Scalar(est),
        residual,
        error_l2,
        relative_error,
        conditioning,
    })
}
