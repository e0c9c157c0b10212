//! Empirical Hölder stability sweeps and the balancing of the Carleman
//! parameter.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{grad, l2_norm_values, ScalarField, VectorField};
use crate::random::AdmissibleSpec;
use crate::transport::{boundary_trace, solve_forward, BoundaryTrace, SpaceTimeField};

use super::compatible_inflow;

#[derive(Clone, Debug)]
pub enum Coefficient {
    H(VectorField),
    P(ScalarField),
}

impl Coefficient {
    /// `self + tau * delta`, kept analytic when both are.
    pub fn shifted(&self, delta: &Coefficient, tau: f64) -> Result<Coefficient> {
        match (self, delta) {
            (Coefficient::H(a), Coefficient::H(b)) => {
                if let (Some(fa), Some(fb)) = (a.exact().cloned(), b.exact().cloned()) {
                    return Ok(Coefficient::H(VectorField::from_fn(a.grid().clone(), move |x, o| {
                        let mut d = [0.0; 3];
                        fa(x, o);
                        fb(x, &mut d[..o.len()]);
                        o.iter_mut().zip(&d).for_each(|(v, dv)| *v += tau * dv);
                    })));
                }
                let v = a.values().iter().zip(b.values()).map(|(x, y)| x + tau * y).collect();
                Ok(Coefficient::H(VectorField::from_values(a.grid().clone(), v)?))
            }
            (Coefficient::P(a), Coefficient::P(b)) => Ok(Coefficient::P(ScalarField::lincomb(1.0, a, tau, b))),
            _ => Err(Error::Parameter("truth and direction are different coefficient kinds".into())),
        }
    }

    fn distance(&self, other: &Coefficient) -> Result<f64> {
        match (self, other) {
            (Coefficient::H(a), Coefficient::H(b)) => {
                let g = a.grid();
                let dim = g.dim();
                let d: Vec<f64> = (0..g.len())
                    .map(|i| {
                        let (x, y) = (a.node_value(i), b.node_value(i));
                        (0..dim).map(|k| (x[k] - y[k]).powi(2)).sum::<f64>().sqrt()
                    })
                    .collect();
                l2_norm_values(g, &d, None)
            }
            (Coefficient::P(a), Coefficient::P(b)) => {
                let d: Vec<f64> = a.values().iter().zip(b.values()).map(|(x, y)| x - y).collect();
                l2_norm_values(a.grid(), &d, None)
            }
            _ => Err(Error::Parameter("mixed coefficient kinds".into())),
        }
    }
}

/// Fixed data of the sweep: the p-coefficient and initial family for the
/// H-problem, the field and single datum for the p-problem.
#[derive(Clone, Debug)]
pub enum Problem {
    H { p: ScalarField, family: Vec<ScalarField> },
    P { h: VectorField, a: ScalarField },
}

#[derive(Clone, Debug)]
pub struct Perturbation {
    pub id: usize,
    pub tau: f64,
    pub coefficient: Coefficient,
}

/// `truth + tau * delta` for each `tau`, numbered from zero.
pub fn scaling_family(truth: &Coefficient, delta: &Coefficient, taus: &[f64]) -> Result<Vec<Perturbation>> {
    taus.iter()
        .enumerate()
        .map(|(id, &tau)| {
            Ok(Perturbation {
                id,
                tau,
                coefficient: truth.shifted(delta, tau)?,
            })
        })
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepConfig {
    pub t_final: f64,
    pub dt: f64,
    /// Admissible set for H-problem perturbations.
    pub admissible: Option<AdmissibleSpec>,
    /// Sup bound for p-problem perturbations.
    pub p_bound: Option<f64>,
    /// A-priori bound on the solutions' time derivatives, checked when set.
    pub m0_bound: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepPair {
    pub id: usize,
    pub tau: f64,
    pub d: f64,
    pub error: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StabilitySweep {
    pub pairs: Vec<SweepPair>,
    /// Fitted exponent clamped to (0, 1].
    pub theta_hat: f64,
    pub theta_raw: f64,
    pub fit_quality: f64,
    pub bound_c: f64,
    pub fit_count: usize,
    /// Largest numerical a-priori norm over the synthesized solutions.
    pub m0: f64,
}

impl StabilitySweep {
    pub fn bound(&self, d: f64) -> f64 {
        self.bound_c * (d.powf(self.theta_hat) + d)
    }

    pub fn holds(&self, pair: &SweepPair) -> bool {
        pair.error <= self.bound(pair.d) * (1.0 + 1e-12)
    }

    /// CSV with columns `perturbation_id, tau, d, error, bound`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
        w.write_record(["perturbation_id", "tau", "d", "error", "bound"])?;
        for p in &self.pairs {
            w.write_record([
                p.id.to_string(),
                format!("{:.17e}", p.tau),
                format!("{:.17e}", p.d),
                format!("{:.17e}", p.error),
                format!("{:.17e}", p.bound),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn time_weights(u: &SpaceTimeField) -> Vec<f64> {
    let kk = u.n_times();
    let dt = u.dt();
    (0..kk)
        .map(|k| if k == 0 || k == kk - 1 { 0.5 * dt } else { dt })
        .collect()
}

/// `|| du/dt ||_{L2(0,T; Linf)}`, or of its gradient when `gradient` is set.
fn a_priori_norm(u: &SpaceTimeField, gradient: bool) -> Result<f64> {
    let du = u.time_derivative();
    let g = u.grid();
    let dim = g.dim();
    let mut s = 0.0;
    for (k, w) in time_weights(u).iter().enumerate() {
        let slice = du.slice(k);
        let sup = if gradient {
            let gr = grad(&slice)?;
            g.active_nodes()
                .map(|i| gr.node_value(i)[..dim].iter().map(|v| v * v).sum::<f64>().sqrt())
                .fold(0.0, f64::max)
        } else {
            g.active_nodes().map(|i| slice.values()[i].abs()).fold(0.0, f64::max)
        };
        s += w * sup * sup;
    }
    Ok(s.sqrt())
}

struct Solved {
    traces: Vec<BoundaryTrace>,
    m0: f64,
}

fn synthesize(problem: &Problem, coeff: &Coefficient, cfg: &SweepConfig) -> Result<Solved> {
    let mut traces = vec![];
    let mut m0 = 0.0f64;
    let mut run = |h: &VectorField, p: &ScalarField, a: &ScalarField, gradient: bool| -> Result<()> {
        let inflow = compatible_inflow(h, p, Some(a), None);
        let u = solve_forward(h, p, a, &inflow, cfg.t_final, cfg.dt)?;
        m0 = m0.max(a_priori_norm(&u, gradient)?);
        traces.push(boundary_trace(&u, None));
        Ok(())
    };
    match (problem, coeff) {
        (Problem::H { p, family }, Coefficient::H(h)) => {
            for a in family {
                run(h, p, a, true)?;
            }
        }
        (Problem::P { h, a }, Coefficient::P(p)) => run(h, p, a, false)?,
        _ => return Err(Error::Parameter("coefficient does not match the problem".into())),
    }
    Ok(Solved { traces, m0 })
}

fn check_member(coeff: &Coefficient, cfg: &SweepConfig, id: Option<usize>) -> Result<()> {
    let who = id.map_or("the truth".to_string(), |i| format!("perturbation {i}"));
    match coeff {
        Coefficient::H(h) => {
            if let Some(spec) = &cfg.admissible {
                if !spec.admits(h) {
                    return Err(Error::Admissibility(format!("{who} leaves the admissible set")));
                }
            }
        }
        Coefficient::P(p) => {
            if let Some(m) = cfg.p_bound {
                if p.max_abs() > m {
                    return Err(Error::Admissibility(format!(
                        "{who} has sup |p| = {} above {m}",
                        p.max_abs()
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Least squares `y = c + theta x`, returning `(theta, r^2)`.
fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let theta = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    (theta, r2)
}

/// `(d, error)` for each perturbation against the truth, with the largest
/// a-priori norm seen. `d` is the distance of boundary rates on the part of
/// the boundary where the truth field points outward.
pub fn sweep_pairs(
    problem: &Problem,
    truth: &Coefficient,
    perturbations: &[Perturbation],
    cfg: &SweepConfig,
) -> Result<(Vec<SweepPair>, f64)> {
    check_member(truth, cfg, None)?;
    for p in perturbations {
        check_member(&p.coefficient, cfg, Some(p.id))?;
    }
    let field = match (problem, truth) {
        (Problem::H { .. }, Coefficient::H(h)) => h.clone(),
        (Problem::P { h, .. }, Coefficient::P(_)) => h.clone(),
        _ => return Err(Error::Parameter("truth does not match the problem".into())),
    };
    let base = synthesize(problem, truth, cfg)?;
    let outward = |bp: &crate::grid::BoundaryPoint| field.flux(&bp.x, &bp.normal) > 0.0;
    let mut computed: Vec<(SweepPair, f64)> = perturbations
        .par_iter()
        .map(|pert| -> Result<(SweepPair, f64)> {
            let other = synthesize(problem, &pert.coefficient, cfg)?;
            let mut d = 0.0;
            for (a, b) in base.traces.iter().zip(&other.traces) {
                d += a.difference(b)?.l2_dtu(outward);
            }
            let error = truth.distance(&pert.coefficient)?;
            Ok((
                SweepPair {
                    id: pert.id,
                    tau: pert.tau,
                    d,
                    error,
                    bound: 0.0,
                },
                other.m0,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    computed.sort_by_key(|(p, _)| p.id);
    let m0 = computed.iter().map(|c| c.1).fold(base.m0, f64::max);
    if let Some(bound) = cfg.m0_bound {
        if m0 > bound {
            return Err(Error::Admissibility(format!(
                "a-priori norm {m0:.4e} exceeds the bound {bound}"
            )));
        }
    }
    Ok((computed.into_iter().map(|c| c.0).collect(), m0))
}

/// Pairs from [`sweep_pairs`], then the Hölder fit below the median `d`.
pub fn stability_sweep(
    problem: &Problem,
    truth: &Coefficient,
    perturbations: &[Perturbation],
    cfg: &SweepConfig,
) -> Result<StabilitySweep> {
    let (mut pairs, m0) = sweep_pairs(problem, truth, perturbations, cfg)?;

    let nonzero: Vec<&SweepPair> = pairs.iter().filter(|p| p.d > 0.0 && p.error > 0.0).collect();
    if nonzero.len() < 2 {
        return Err(Error::InsufficientRange { decades: 0.0 });
    }
    let (dmin, dmax) = nonzero
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), p| (a.min(p.d), b.max(p.d)));
    let decades = (dmax / dmin).log10();
    if decades < 1.0 {
        return Err(Error::InsufficientRange { decades });
    }
    let mut ds: Vec<f64> = nonzero.iter().map(|p| p.d).collect();
    ds.sort_by(f64::total_cmp);
    let median = if ds.len() % 2 == 1 {
        ds[ds.len() / 2]
    } else {
        0.5 * (ds[ds.len() / 2 - 1] + ds[ds.len() / 2])
    };
    let mut fit: Vec<&&SweepPair> = nonzero.iter().filter(|p| p.d < median).collect();
    if fit.len() < 2 {
        fit = nonzero.iter().collect();
    }
    let xs: Vec<f64> = fit.iter().map(|p| p.d.ln()).collect();
    let ys: Vec<f64> = fit.iter().map(|p| p.error.ln()).collect();
    let (theta_raw, fit_quality) = linear_fit(&xs, &ys);
    let theta_hat = theta_raw.clamp(1e-6, 1.0);
    let fit_count = fit.len();
    let bound_c = pairs
        .iter()
        .filter(|p| p.error > 0.0)
        .map(|p| p.error / (p.d.powf(theta_hat) + p.d))
        .fold(0.0, f64::max);
    let mut sweep = StabilitySweep {
        pairs: vec![],
        theta_hat,
        theta_raw,
        fit_quality,
        bound_c,
        fit_count,
        m0,
    };
    for p in &mut pairs {
        p.bound = sweep.bound(p.d);
    }
    sweep.pairs = pairs;
    Ok(sweep)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    /// `M0 > d`
    Case1,
    Case2,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BalanceResult {
    pub s_star: f64,
    pub bound: f64,
    pub branch: Branch,
    pub theta: f64,
    /// `e^{-beta T s / 2} M0^2` and `e^{C s} d^2` at `s_star`.
    pub decaying: f64,
    pub growing: f64,
}

/// Balance `e^{-beta T s / 2} M0^2 = e^{C s} d^2`.
pub fn s_balance(m0: f64, d: f64, c: f64, beta: f64, t_final: f64) -> Result<BalanceResult> {
    for (name, v) in [("M0", m0), ("d", d), ("C", c), ("beta", beta), ("T", t_final)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Parameter(format!("{name} = {v} must be positive")));
        }
    }
    let bt = beta * t_final;
    let theta = bt / (2.0 * c + bt);
    let (s_star, bound, branch) = if m0 > d {
        let s = 2.0 / (c + 0.5 * bt) * (m0 / d).ln();
        let bound = 2.0 * c * m0.powf(4.0 * c / (2.0 * c + bt)) * d.powf(2.0 * bt / (2.0 * c + bt));
        (s, bound, Branch::Case1)
    } else {
        (0.0, 2.0 * c * d * d, Branch::Case2)
    };
    Ok(BalanceResult {
        s_star,
        bound,
        branch,
        theta,
        decaying: (-0.5 * bt * s_star).exp() * m0 * m0,
        growing: (c * s_star).exp() * d * d,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balance_examples() {
        let e = std::f64::consts::E;
        let r = s_balance(e, 1.0, 1.0, 1.0, 2.0).unwrap();
        assert!((r.s_star - 1.0).abs() < 1e-15);
        assert_eq!(r.theta, 0.5);
        assert_eq!(r.branch, Branch::Case1);
        let r = s_balance(2.0, 2.0, 1.5, 1.0, 1.0).unwrap();
        assert_eq!(r.branch, Branch::Case2);
        assert_eq!(r.bound, 2.0 * 1.5 * 4.0);
        let r = s_balance(10.0, 1.0, 0.5, 0.5, 2.0).unwrap();
        assert!((r.s_star - 2.0 * 10f64.ln()).abs() < 1e-14);
        assert!(((r.decaying - r.growing) / r.growing).abs() < 1e-12);
        assert!(s_balance(1.0, 0.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn fit_recovers_power_law() {
        let xs: Vec<f64> = (1..6).map(|k| (k as f64).ln()).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 0.3 + 0.7 * x).collect();
        let (t, r2) = linear_fit(&xs, &ys);
        assert!((t - 0.7).abs() < 1e-12);
        assert!((r2 - 1.0).abs() < 1e-12);
    }
}
