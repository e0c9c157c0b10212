//! Carleman weight `phi(x, t) = psi(x) - beta t` with `psi(x) = x . H(x)`,
//! the separation of its values near `t = 0` and `t = T`, the time cut-off,
//! and numerical bookkeeping of the weighted estimate
//!
//! ```text
//! s |u(0) e^{s phi(0)}|^2 + s^2 |u e^{s phi}|^2_Q + C e^{-Cs} int_{G-} |H.nu| |u|^2
//!   <= C |Pu e^{s phi}|^2_Q + C e^{Cs} int_{G+} |u|^2 + C s |u(T) e^{s phi(T)}|^2
//! ```

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{ScalarField, VectorField};
use crate::geometry::{eps_condition, EpsCondition};
use crate::grid::{dot, Point, MAX_DIM};
use crate::transport::{pde_residual, SpaceTimeField};

/// `H(x) . grad psi(x)` with `psi = x . H`, i.e.
/// `|H|^2 + sum_k h_k sum_j x_j d_k h_j`.
pub fn h_dot_grad_psi(h: &VectorField, x: &[f64]) -> f64 {
    let dim = h.dim();
    let hv = h.at(x);
    let jac = h.jacobian_at(x);
    let mut s = dot(&hv[..dim], &hv[..dim]);
    for k in 0..dim {
        let mut inner = 0.0;
        for j in 0..dim {
            inner += x[j] * jac[j][k];
        }
        s += hv[k] * inner;
    }
    s
}

pub fn psi_at(h: &VectorField, x: &[f64]) -> f64 {
    let dim = h.dim();
    dot(&x[..dim], &h.at(x)[..dim])
}

/// Points of the closed region used for sup/inf sampling: active nodes and
/// boundary samples.
fn closure_points(h: &VectorField) -> Vec<Point> {
    let g = h.grid();
    g.active_nodes()
        .map(|i| g.node(i))
        .chain(g.boundary().iter().map(|p| p.x))
        .collect()
}

#[derive(Clone, Debug)]
pub struct CarlemanWeight {
    pub beta: f64,
    pub psi: ScalarField,
    pub b: ScalarField,
    /// `min (H . grad psi)` over the closure.
    pub mu: f64,
    pub mu_location: Vec<f64>,
    pub min_b: f64,
    /// Set when `beta >= mu`, so positivity of `B` is not guaranteed.
    pub warning: Option<String>,
    h: VectorField,
}

impl CarlemanWeight {
    pub fn field(&self) -> &VectorField {
        &self.h
    }

    pub fn psi_at(&self, x: &[f64]) -> f64 {
        psi_at(&self.h, x)
    }

    pub fn phi(&self, x: &[f64], t: f64) -> f64 {
        self.psi_at(x) - self.beta * t
    }

    /// `(min psi, max psi)` over the closure.
    pub fn psi_range(&self) -> (f64, f64) {
        closure_points(&self.h)
            .iter()
            .map(|x| self.psi_at(x))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            })
    }
}

pub fn build_weight(h: &VectorField, beta: f64) -> Result<CarlemanWeight> {
    if !(beta > 0.0) {
        return Err(Error::Parameter(format!("beta = {beta} must be positive")));
    }
    let g = h.grid().clone();
    let psi = if h.is_analytic() {
        let hc = h.clone();
        ScalarField::from_fn(g.clone(), move |x| psi_at(&hc, x))
    } else {
        let v = (0..g.len()).map(|i| psi_at(h, &g.node(i))).collect();
        ScalarField::from_values(g.clone(), v)?
    };
    let bvals: Vec<f64> = (0..g.len())
        .map(|i| {
            if g.active(i) {
                h_dot_grad_psi(h, &g.node(i)) - beta
            } else {
                0.0
            }
        })
        .collect();
    let b = ScalarField::from_values(g.clone(), bvals)?;
    let mut mu = f64::INFINITY;
    let mut loc = [0.0; MAX_DIM];
    for x in closure_points(h) {
        let v = h_dot_grad_psi(h, &x);
        if v < mu {
            mu = v;
            loc = x;
        }
    }
    let warning = (beta >= mu).then(|| {
        format!("beta = {beta} is not below mu = {mu}; the weight positivity B > 0 may fail")
    });
    Ok(CarlemanWeight {
        beta,
        psi,
        min_b: mu - beta,
        b,
        mu,
        mu_location: loc[..g.dim()].to_vec(),
        warning,
        h: h.clone(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Lemma1Status {
    Verified,
    Violated,
    /// The diameter precondition fails, so the bound is not claimed.
    Unverifiable,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Lemma1Report {
    pub status: Lemma1Status,
    pub mu_inf: f64,
    pub bound: f64,
    pub diam: f64,
    pub members: usize,
    pub violations: usize,
}

/// Infimum of `mu_H` over an ensemble sharing one region, against the
/// bound `delta0^2 / 2` that holds when `diam D < delta0^2 / (2 M^2)`.
pub fn check_lemma1(ensemble: &[VectorField], delta0: f64, m_bound: f64) -> Result<Lemma1Report> {
    let first = ensemble
        .first()
        .ok_or_else(|| Error::Parameter("empty ensemble".into()))?;
    let diam = first.grid().diameter();
    let bound = 0.5 * delta0 * delta0;
    let mut mu_inf = f64::INFINITY;
    let mut violations = 0;
    for h in ensemble {
        let mu = closure_points(h)
            .iter()
            .map(|x| h_dot_grad_psi(h, x))
            .fold(f64::INFINITY, f64::min);
        if mu < bound {
            violations += 1;
        }
        mu_inf = mu_inf.min(mu);
    }
    let status = if diam >= delta0 * delta0 / (2.0 * m_bound * m_bound) {
        Lemma1Status::Unverifiable
    } else if violations > 0 {
        Lemma1Status::Violated
    } else {
        Lemma1Status::Verified
    };
    Ok(Lemma1Report {
        status,
        mu_inf,
        bound,
        diam,
        members: ensemble.len(),
        violations,
    })
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SeparationInput {
    pub t_final: f64,
    pub eps0: f64,
    /// Diameter bound `eps` of the region.
    pub eps: f64,
    pub delta0: f64,
    pub m: f64,
    /// Lemma radius of the region, when it is a constructed subdomain.
    pub r: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeparationReport {
    pub eps0: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub gap: f64,
    pub eps_condition: EpsCondition,
    pub oscillation: f64,
    pub quarter_beta_t: f64,
    /// `Some(gap > beta T / 4)` when every eps flag passes.
    pub gap_holds: Option<bool>,
}

/// `sigma1 = min phi` over `D x [0, 2 eps0]`, `sigma2 = max phi` over
/// `D x [T - 2 eps0, T]`, sampled on the closure and 33 times per window.
pub fn separation(w: &CarlemanWeight, input: &SeparationInput) -> Result<SeparationReport> {
    let (t, eps0) = (input.t_final, input.eps0);
    if !(t > 0.0 && eps0 > 0.0) || eps0 >= t / 16.0 {
        return Err(Error::Parameter(format!(
            "eps0 = {eps0} must satisfy 0 < eps0 < T/16 = {}",
            t / 16.0
        )));
    }
    let psis: Vec<f64> = closure_points(w.field()).iter().map(|x| w.psi_at(x)).collect();
    let window = |a: f64, b: f64| (0..33).map(move |j| a + (b - a) * j as f64 / 32.0);
    let mut sigma1 = f64::INFINITY;
    for tt in window(0.0, 2.0 * eps0) {
        for p in &psis {
            sigma1 = sigma1.min(p - w.beta * tt);
        }
    }
    let mut sigma2 = f64::NEG_INFINITY;
    for tt in window(t - 2.0 * eps0, t) {
        for p in &psis {
            sigma2 = sigma2.max(p - w.beta * tt);
        }
    }
    let (lo, hi) = psis
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    let flags = eps_condition(input.eps, input.delta0, input.m, w.beta, t, input.r);
    let gap = sigma1 - sigma2;
    let quarter = 0.25 * w.beta * t;
    Ok(SeparationReport {
        eps0,
        sigma1,
        sigma2,
        gap,
        eps_condition: flags,
        oscillation: hi - lo,
        quarter_beta_t: quarter,
        gap_holds: flags.all().then_some(gap > quarter),
    })
}

/// Time cut-off: 1 up to `T - 2 eps0`, 0 from `T - eps0`, quintic
/// smoothstep in between.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CutoffFn {
    pub eps0: f64,
    pub t_final: f64,
}

pub fn make_cutoff(eps0: f64, t_final: f64) -> Result<CutoffFn> {
    if !(eps0 > 0.0 && eps0 < 0.5 * t_final) {
        return Err(Error::Parameter(format!(
            "cut-off needs 0 < eps0 < T/2, got eps0 = {eps0}, T = {t_final}"
        )));
    }
    Ok(CutoffFn { eps0, t_final })
}

impl CutoffFn {
    fn s(&self, t: f64) -> f64 {
        ((t - (self.t_final - 2.0 * self.eps0)) / self.eps0).clamp(0.0, 1.0)
    }

    pub fn chi(&self, t: f64) -> f64 {
        let s = self.s(t);
        1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
    }

    pub fn dchi(&self, t: f64) -> f64 {
        let s = self.s(t);
        if s <= 0.0 || s >= 1.0 {
            return 0.0;
        }
        -30.0 * s * s * (1.0 - s) * (1.0 - s) / self.eps0
    }
}

/// Values of the six terms at one `s`; the boundary integrals and the
/// residual integral are stored without their constants.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CarlemanLedger {
    pub s: f64,
    /// `s int_D |u(x,0)|^2 e^{2 s phi(x,0)}`
    pub lhs_initial: f64,
    /// `s^2 int_Q |u|^2 e^{2 s phi}`
    pub lhs_bulk: f64,
    /// `int_{G- x (0,T)} |H . nu| |u|^2`
    pub lhs_minus: f64,
    /// `int_Q |Pu|^2 e^{2 s phi}`
    pub rhs_residual: f64,
    /// `int_{G+ x (0,T)} |u|^2`
    pub rhs_plus: f64,
    /// `s int_D |u(x,T)|^2 e^{2 s phi(x,T)}`
    pub rhs_final: f64,
    pub fitted_c: Option<f64>,
    pub fitted_s0: Option<f64>,
}

impl CarlemanLedger {
    /// The six terms with the constant applied, in display order.
    pub fn terms(&self, c: f64) -> [f64; 6] {
        [
            self.lhs_initial,
            self.lhs_bulk,
            c * (-c * self.s).exp() * self.lhs_minus,
            c * self.rhs_residual,
            c * (c * self.s).exp() * self.rhs_plus,
            c * self.rhs_final,
        ]
    }

    pub fn lhs_sum(&self, c: f64) -> f64 {
        let t = self.terms(c);
        t[0] + t[1] + t[2]
    }

    pub fn rhs_sum(&self, c: f64) -> f64 {
        let t = self.terms(c);
        t[3] + t[4] + t[5]
    }

    pub fn slack(&self, c: f64) -> f64 {
        self.rhs_sum(c) - self.lhs_sum(c)
    }
}

/// Precomputed, `s`-independent pieces of the ledger for one field.
#[derive(Clone, Debug)]
pub struct LedgerSeries {
    beta: f64,
    psi: Vec<f64>,
    weights: Vec<f64>,
    times: Vec<f64>,
    time_weights: Vec<f64>,
    /// Node-major `|u|^2` and quadrature-renormalized `|Pu|^2`.
    u2: Vec<f64>,
    pu2: Vec<f64>,
    kk: usize,
    minus: f64,
    plus: f64,
}

impl LedgerSeries {
    pub fn new(u: &SpaceTimeField, h: &VectorField, p: &ScalarField, beta: f64) -> Result<Self> {
        if !(beta > 0.0) {
            return Err(Error::Parameter(format!("beta = {beta} must be positive")));
        }
        if !u.all_determined() {
            return Err(Error::Data(
                "the field is undetermined somewhere in Q; the ledger needs it everywhere".into(),
            ));
        }
        if u.n_times() < 3 {
            return Err(Error::Data("the ledger needs at least three time levels".into()));
        }
        let g = u.grid();
        let kk = u.n_times();
        let dt = u.dt();
        let time_weights: Vec<f64> = (0..kk)
            .map(|k| if k == 0 || k == kk - 1 { 0.5 * dt } else { dt })
            .collect();
        let active: Vec<usize> = g.active_nodes().collect();
        let psi: Vec<f64> = active.iter().map(|&i| psi_at(h, &g.node(i))).collect();
        let weights: Vec<f64> = active.iter().map(|&i| g.weights()[i]).collect();
        let mut u2 = vec![0.0; active.len() * kk];
        for (a, &i) in active.iter().enumerate() {
            for k in 0..kk {
                u2[a * kk + k] = u.value(i, k).powi(2);
            }
        }
        // residual where the centered stencil fits, extended to the other
        // levels of a node by the nearest valid level and to stencil-free
        // nodes from the nearest filled neighbor
        let res = pde_residual(u, h, p, None);
        let n = g.len();
        let mut rows: Vec<Option<Vec<f64>>> = vec![None; n];
        for &i in &active {
            let valid: Vec<usize> = (0..kk).filter(|&k| res.valid[k * n + i]).collect();
            if valid.is_empty() {
                continue;
            }
            let row = (0..kk)
                .map(|k| {
                    let near = valid
                        .iter()
                        .min_by_key(|&&v| v.abs_diff(k))
                        .copied()
                        .unwrap_or(k);
                    res.values[near * n + i].powi(2)
                })
                .collect();
            rows[i] = Some(row);
        }
        for _ in 0..g.dim() {
            for &i in &active {
                if rows[i].is_some() {
                    continue;
                }
                rows[i] = (1..=2isize)
                    .flat_map(|step| (0..g.dim()).flat_map(move |axis| [(axis, step), (axis, -step)]))
                    .find_map(|(axis, step)| g.neighbor(i, axis, step).and_then(|j| rows[j].clone()));
            }
        }
        let mut pu2 = vec![0.0; active.len() * kk];
        let (mut full, mut covered) = (0.0, 0.0);
        for (a, &i) in active.iter().enumerate() {
            let w = weights[a];
            full += w;
            if let Some(row) = &rows[i] {
                covered += w;
                pu2[a * kk..(a + 1) * kk].copy_from_slice(row);
            }
        }
        if covered > 0.0 {
            let scale = full / covered;
            pu2.iter_mut().for_each(|v| *v *= scale);
        }
        let (mut minus, mut plus) = (0.0, 0.0);
        for bp in g.boundary() {
            let flux = h.flux(&bp.x, &bp.normal);
            let mut s = 0.0;
            for k in 0..kk {
                s += time_weights[k] * u.eval(&bp.x, u.times()[k]).powi(2);
            }
            if flux > 0.0 {
                plus += bp.weight * s;
            } else {
                minus += bp.weight * flux.abs() * s;
            }
        }
        Ok(Self {
            beta,
            psi,
            weights,
            times: u.times().to_vec(),
            time_weights,
            u2,
            pu2,
            kk,
            minus,
            plus,
        })
    }

    pub fn at(&self, s: f64) -> CarlemanLedger {
        let kk = self.kk;
        let decay: Vec<f64> = self
            .times
            .iter()
            .map(|t| (-2.0 * s * self.beta * t).exp())
            .collect();
        let (mut init, mut bulk, mut res, mut fin) = (0.0, 0.0, 0.0, 0.0);
        for (a, (psi, w)) in self.psi.iter().zip(&self.weights).enumerate() {
            let e = w * (2.0 * s * psi).exp();
            let row = &self.u2[a * kk..(a + 1) * kk];
            let prow = &self.pu2[a * kk..(a + 1) * kk];
            init += e * row[0];
            fin += e * decay[kk - 1] * row[kk - 1];
            let mut b = 0.0;
            let mut r = 0.0;
            for k in 0..kk {
                let tw = self.time_weights[k] * decay[k];
                b += tw * row[k];
                r += tw * prow[k];
            }
            bulk += e * b;
            res += e * r;
        }
        CarlemanLedger {
            s,
            lhs_initial: s * init,
            lhs_bulk: s * s * bulk,
            lhs_minus: self.minus,
            rhs_residual: res,
            rhs_plus: self.plus,
            rhs_final: s * fin,
            fitted_c: None,
            fitted_s0: None,
        }
    }

    pub fn over(&self, s_grid: &[f64]) -> Vec<CarlemanLedger> {
        s_grid.iter().map(|&s| self.at(s)).collect()
    }
}

pub fn carleman_ledger(
    u: &SpaceTimeField,
    h: &VectorField,
    p: &ScalarField,
    beta: f64,
    s: f64,
) -> Result<CarlemanLedger> {
    Ok(LedgerSeries::new(u, h, p, beta)?.at(s))
}

/// Logarithmic grid of `count` points from `lo` to `hi`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count < 2 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    let mut g: Vec<f64> = (0..count)
        .map(|j| (a + (b - a) * j as f64 / (count - 1) as f64).exp())
        .collect();
    g[0] = lo;
    g[count - 1] = hi;
    g
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub c_min: f64,
    pub c_max: f64,
    pub per_decade: usize,
    /// Required span (in decades) of the tabulated s above `s0`.
    pub min_decades: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            c_min: 1e-3,
            c_max: 1e3,
            per_decade: 100,
            min_decades: 1.0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitResult {
    pub c: f64,
    pub s0: f64,
    pub binding_member: usize,
    pub binding_s: f64,
    /// Smallest `slack / rhs` over tabulated `s > s0` and all members.
    pub min_relative_slack: f64,
}

/// Smallest `C` on a log grid (and smallest tabulated `s0`) such that every
/// member's ledger satisfies the inequality at every tabulated `s > s0`.
/// All members must share the same s-grid.
pub fn fit_constants(family: &[Vec<CarlemanLedger>], cfg: &FitConfig) -> Result<FitResult> {
    let s_grid: Vec<f64> = family
        .first()
        .ok_or_else(|| Error::Parameter("empty family".into()))?
        .iter()
        .map(|l| l.s)
        .collect();
    if s_grid.len() < 2 || family.iter().any(|m| m.len() != s_grid.len()) {
        return Err(Error::Parameter(
            "members need a common s-grid with at least two points".into(),
        ));
    }
    let (smin, smax) = (s_grid[0], *s_grid.last().unwrap());
    if smax / smin < 10.0 * (1.0 - 1e-12) {
        return Err(Error::Parameter("the s-grid must span at least one decade".into()));
    }
    let decades = (cfg.c_max / cfg.c_min).log10();
    let count = (decades * cfg.per_decade as f64).round() as usize + 1;
    for c in log_grid(cfg.c_min, cfg.c_max, count) {
        // largest failing s decides s0
        let mut s0 = smin;
        for member in family {
            for l in member {
                if l.slack(c) < 0.0 {
                    s0 = s0.max(l.s);
                }
            }
        }
        if smax / s0 < 10f64.powf(cfg.min_decades) * (1.0 - 1e-12) {
            continue;
        }
        let mut best = (f64::INFINITY, 0, s0);
        for (m, member) in family.iter().enumerate() {
            for l in member.iter().filter(|l| l.s > s0) {
                let rhs = l.rhs_sum(c);
                let rel = if rhs > 0.0 { l.slack(c) / rhs } else { 0.0 };
                if rel < best.0 {
                    best = (rel, m, l.s);
                }
            }
        }
        return Ok(FitResult {
            c,
            s0,
            binding_member: best.1,
            binding_s: best.2,
            min_relative_slack: best.0,
        });
    }
    Err(Error::VerificationFailure(format!(
        "no C in [{}, {}] satisfies the estimate over the tabulated s",
        cfg.c_min, cfg.c_max
    )))
}

/// Smooth space-time fields on a small box next to the observed face, with
/// the coefficients used to tabulate their ledgers.
#[derive(Clone, Debug)]
pub struct RegressionFamily {
    pub h: VectorField,
    pub p: ScalarField,
    pub beta: f64,
    pub t_final: f64,
    pub members: Vec<SpaceTimeField>,
}

/// Box `[-0.03, 0.03] x [-0.08, 0]` (diameter 0.1) with `cells` intervals
/// per axis, admissible `H` for `delta0 = 1`, `M = 2` at the origin with
/// normal `e2`, `T = 1`, `beta = 1/4`, and `count` members of the form
/// `c0 + c1 cos(k . x - w t + phase) + c2 e^{-l t} (1 + v . x)`.
pub fn regression_family(seed: u64, count: usize, cells: usize, steps: usize) -> Result<RegressionFamily> {
    use crate::grid::Grid;
    use crate::random::{random_admissible, rng, AdmissibleSpec};
    use rand::Rng;
    use std::sync::Arc;

    let grid = Arc::new(Grid::boxed(&[-0.03, -0.08], &[0.03, 0.0], &[cells, cells])?);
    let spec = AdmissibleSpec::new(1.0, 2.0, &[0.0, 0.0], &[0.0, 1.0])?;
    let mut r = rng(seed);
    let h = random_admissible(&spec, grid.clone(), &mut r)?;
    let p = ScalarField::from_fn(grid.clone(), |x| 0.1 + 0.5 * x[0]);
    let t_final = 1.0;
    let times: Vec<f64> = (0..=steps).map(|k| t_final * k as f64 / steps as f64).collect();
    let members = (0..count)
        .map(|_| {
            let c0 = r.random_range(-1.0..1.0);
            let c1 = r.random_range(0.2..1.0);
            let k = [r.random_range(-20.0..20.0), r.random_range(-20.0..20.0)];
            let w = r.random_range(0.0..3.0);
            let ph = r.random_range(0.0..std::f64::consts::TAU);
            let c2 = r.random_range(-1.0..1.0);
            let l = r.random_range(0.0..2.0);
            let v = [r.random_range(-10.0..10.0), r.random_range(-10.0..10.0)];
            SpaceTimeField::from_fn(grid.clone(), times.clone(), move |x, t| {
                c0 + c1 * (k[0] * x[0] + k[1] * x[1] - w * t + ph).cos()
                    + c2 * (-l * t).exp() * (1.0 + v[0] * x[0] + v[1] * x[1])
            })
        })
        .collect();
    Ok(RegressionFamily {
        h,
        p,
        beta: 0.25,
        t_final,
        members,
    })
}

impl RegressionFamily {
    pub fn ledgers(&self, s_grid: &[f64]) -> Result<Vec<Vec<CarlemanLedger>>> {
        use rayon::prelude::*;
        self.members
            .par_iter()
            .map(|u| Ok(LedgerSeries::new(u, &self.h, &self.p, self.beta)?.over(s_grid)))
            .collect()
    }
}

/// CSV with columns `s, six terms, lhs_sum, rhs_sum, slack`.
pub fn write_ledger_csv(path: &Path, ledgers: &[CarlemanLedger], c: f64) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record([
        "s",
        "lhs_initial",
        "lhs_bulk",
        "lhs_minus",
        "rhs_residual",
        "rhs_plus",
        "rhs_final",
        "lhs_sum",
        "rhs_sum",
        "slack",
    ])?;
    for l in ledgers {
        let t = l.terms(c);
        let mut row = vec![format!("{:.17e}", l.s)];
        row.extend(t.iter().map(|v| format!("{v:.17e}")));
        row.push(format!("{:.17e}", l.lhs_sum(c)));
        row.push(format!("{:.17e}", l.rhs_sum(c)));
        row.push(format!("{:.17e}", l.slack(c)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
