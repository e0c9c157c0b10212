//! Seeded generators of admissible coefficient fields and smooth test data.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{check_admissible, ScalarField, VectorField};
use crate::grid::{norm, Grid, MAX_DIM};

pub use rand::SeedableRng;

pub type Rng64 = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng64 {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Bounds defining the admissible set: C1 norm at most `m`, modulus above
/// `delta0`, and flux above `delta0` at the anchor `x0` with normal `nu0`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AdmissibleSpec {
    pub delta0: f64,
    pub m: f64,
    pub x0: Vec<f64>,
    pub nu0: Vec<f64>,
}

impl AdmissibleSpec {
    pub fn new(delta0: f64, m: f64, x0: &[f64], nu0: &[f64]) -> Result<Self> {
        if !(delta0 > 0.0 && m > delta0) {
            return Err(Error::Parameter(format!(
                "need 0 < delta0 < M, got delta0 = {delta0}, M = {m}"
            )));
        }
        if x0.len() != nu0.len() || (norm(nu0) - 1.0).abs() > 1e-9 {
            return Err(Error::Parameter("nu0 must be a unit vector of the dimension of x0".into()));
        }
        Ok(Self {
            delta0,
            m,
            x0: x0.to_vec(),
            nu0: nu0.to_vec(),
        })
    }

    pub fn admits(&self, h: &VectorField) -> bool {
        check_admissible(h, self.delta0, self.m, &self.x0, &self.nu0).admissible
    }
}

/// Parameters of `H(x) = b + A x + alpha sin(omega . x) v`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AffineSine {
    pub b: Vec<f64>,
    pub a: Vec<Vec<f64>>,
    pub alpha: f64,
    pub omega: Vec<f64>,
    pub v: Vec<f64>,
}

impl AffineSine {
    pub fn field(&self, grid: Arc<Grid>) -> VectorField {
        let p = self.clone();
        VectorField::from_fn(grid, move |x, o| {
            let ph: f64 = p.omega.iter().zip(x).map(|(w, y)| w * y).sum();
            let s = p.alpha * ph.sin();
            for k in 0..o.len() {
                o[k] = p.b[k] + p.a[k].iter().zip(x).map(|(c, y)| c * y).sum::<f64>() + s * p.v[k];
            }
        })
    }
}

fn unit(rng: &mut Rng64, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = norm(&v);
        if n > 0.1 && n <= 1.0 {
            return v.iter().map(|c| c / n).collect();
        }
    }
}

/// Draw one candidate, not yet checked.
pub fn draw_affine_sine(spec: &AdmissibleSpec, rng: &mut Rng64) -> AffineSine {
    let dim = spec.nu0.len();
    let (d0, m) = (spec.delta0, spec.m);
    let c = rng.random_range(1.1 * d0..0.85 * m);
    let tang_max = ((0.85 * m).powi(2) - c * c).max(0.0).sqrt();
    let mut b: Vec<f64> = spec.nu0.iter().map(|n| c * n).collect();
    if dim > 1 {
        // tangential part orthogonal to nu0
        let mut w = unit(rng, dim);
        let proj: f64 = w.iter().zip(&spec.nu0).map(|(a, n)| a * n).sum();
        w.iter_mut().zip(&spec.nu0).for_each(|(a, n)| *a -= proj * n);
        let wn = norm(&w).max(1e-12);
        let t = rng.random_range(0.0..1.0) * tang_max;
        b.iter_mut().zip(&w).for_each(|(bk, wk)| *bk += t * wk / wn);
    }
    let scale = rng.random_range(0.0..0.8) * m;
    let raw: Vec<Vec<f64>> = (0..dim)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let fro = raw.iter().flatten().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
    let a: Vec<Vec<f64>> = raw
        .iter()
        .map(|row| row.iter().map(|v| v * scale / fro).collect())
        .collect();
    let freq = rng.random_range(1.0..5.0);
    let omega: Vec<f64> = unit(rng, dim).iter().map(|w| w * freq).collect();
    let alpha = rng.random_range(0.0..0.02);
    AffineSine {
        b,
        a,
        alpha,
        omega,
        v: unit(rng, dim),
    }
}

/// Rejection sampling of an admissible field on `grid` (with the anchor
/// affine part shifted so that `b` is the value at `x0`).
pub fn random_admissible(spec: &AdmissibleSpec, grid: Arc<Grid>, rng: &mut Rng64) -> Result<VectorField> {
    for _ in 0..1000 {
        let mut p = draw_affine_sine(spec, rng);
        // re-anchor the affine part at x0
        for k in 0..p.b.len() {
            let shift: f64 = p.a[k].iter().zip(&spec.x0).map(|(c, y)| c * y).sum();
            p.b[k] -= shift;
        }
        let h = p.field(grid.clone());
        if spec.admits(&h) {
            return Ok(h);
        }
    }
    Err(Error::Admissibility(
        "no admissible field found in 1000 draws".into(),
    ))
}

/// Smooth scalar `c0 + sum_j c_j sin(w_j . x + phase_j)` with `terms` modes.
pub fn random_smooth_scalar(
    grid: Arc<Grid>,
    rng: &mut Rng64,
    offset: f64,
    amplitude: f64,
    terms: usize,
) -> ScalarField {
    let dim = grid.dim();
    let modes: Vec<(f64, [f64; MAX_DIM], f64)> = (0..terms)
        .map(|_| {
            let mut w = [0.0; MAX_DIM];
            for wk in w.iter_mut().take(dim) {
                *wk = rng.random_range(-4.0..4.0);
            }
            (
                rng.random_range(-1.0..1.0) * amplitude / terms.max(1) as f64,
                w,
                rng.random_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();
    ScalarField::from_fn(grid, move |x| {
        offset
            + modes
                .iter()
                .map(|(c, w, ph)| c * (x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + ph).sin())
                .sum::<f64>()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_fields_are_admissible_and_reproducible() {
        let spec = AdmissibleSpec::new(1.0, 2.0, &[0.0, 0.0], &[0.0, 1.0]).unwrap();
        let g = Arc::new(Grid::boxed(&[-0.05, -0.08], &[0.05, 0.0], &[8, 8]).unwrap());
        let mut r1 = rng(7);
        let mut r2 = rng(7);
        for _ in 0..10 {
            let a = random_admissible(&spec, g.clone(), &mut r1).unwrap();
            let b = random_admissible(&spec, g.clone(), &mut r2).unwrap();
            assert!(spec.admits(&a));
            assert_eq!(a.values(), b.values());
        }
        assert!(AdmissibleSpec::new(1.0, 0.5, &[0.0], &[1.0]).is_err());
    }
}
