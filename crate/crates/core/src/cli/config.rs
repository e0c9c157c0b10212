//! Experiment configuration: TOML with named analytic presets for every
//! field, plus the up-front validation pass.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::carleman::FitConfig;
use crate::error::{Error, Result};
use crate::fields::{ScalarField, VectorField};
use crate::geometry::{construct_subdomain, eps_condition, BoundaryGraph, Height, Subdomain, SubdomainOptions};
use crate::grid::Grid;
use crate::inverse::CaseKind;
use crate::io::load_block;
use crate::random::{random_admissible, random_smooth_scalar, rng, AdmissibleSpec, Rng64};
use crate::transport::SpaceTimeFn;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Forward,
    Subdomain,
    CarlemanVerify,
    ReconstructH,
    ReconstructP,
    StabilitySweep,
    EnergyCheck,
    CaseExperiment,
    DemoNonuniqueness,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Forward => "forward",
            Kind::Subdomain => "subdomain",
            Kind::CarlemanVerify => "carleman-verify",
            Kind::ReconstructH => "reconstruct-h",
            Kind::ReconstructP => "reconstruct-p",
            Kind::StabilitySweep => "stability-sweep",
            Kind::EnergyCheck => "energy-check",
            Kind::CaseExperiment => "case-experiment",
            Kind::DemoNonuniqueness => "demo-nonuniqueness",
        }
    }
}

/// Scalar presets `x -> value`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScalarSpec {
    Constant { value: f64 },
    /// `c + g . x`
    Affine { c: f64, g: Vec<f64> },
    /// `c + amplitude sin(omega . x + phase)`
    Sinusoidal {
        c: f64,
        amplitude: f64,
        omega: Vec<f64>,
        #[serde(default)]
        phase: f64,
    },
    /// `height (1 - |x - center|^2 / radius^2)_+^3`
    Bump {
        center: Vec<f64>,
        radius: f64,
        #[serde(default = "one")]
        height: f64,
    },
    /// Seeded sum of `terms` sine modes around `offset`.
    RandomSmooth { offset: f64, amplitude: f64, terms: usize },
    /// Binary field block on the same lattice.
    File { path: PathBuf },
}

/// Vector presets `x -> H(x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case", deny_unknown_fields)]
pub enum VectorSpec {
    Constant { value: Vec<f64> },
    /// `b + A x`, `a` given by rows.
    Affine { b: Vec<f64>, a: Vec<Vec<f64>> },
    /// `b + amplitude sin(omega . x) direction`
    Sinusoidal {
        b: Vec<f64>,
        amplitude: f64,
        omega: Vec<f64>,
        direction: Vec<f64>,
    },
    /// Seeded draw from the admissible set of `[bounds]`.
    RandomAdmissible,
    File { path: PathBuf },
}

/// Space-time presets for the source factor `R(x, t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TimeSpec {
    /// `c + g . x + rate t`
    Affine { c: f64, g: Vec<f64>, rate: f64 },
    /// `c + amplitude sin(omega . x + frequency t)`
    Sinusoidal {
        c: f64,
        amplitude: f64,
        omega: Vec<f64>,
        frequency: f64,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GeometrySpec {
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
        cells: usize,
    },
    /// The layer next to the graph `x_n = ell(x')`; `delta0` and `M` come
    /// from `[bounds]`.
    Subdomain {
        dim: usize,
        rho0: f64,
        height: Height,
        eps: f64,
        cells: usize,
        #[serde(default = "default_samples")]
        samples: usize,
    },
}

fn default_samples() -> usize {
    101
}

/// Admissible set: `|H| > delta0`, C1 norm at most `m`, flux above `delta0`
/// at `x0` with outward normal `nu0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bounds {
    pub delta0: f64,
    pub m: f64,
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(default)]
    pub nu0: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Coefficients {
    pub h: VectorSpec,
    pub p: ScalarSpec,
    pub family: Vec<ScalarSpec>,
    pub r: TimeSpec,
    pub f: ScalarSpec,
}

impl Default for Coefficients {
    fn default() -> Self {
        Self {
            h: VectorSpec::Affine {
                b: vec![0.3, 1.0],
                a: vec![vec![0.0, 0.1], vec![0.1, 0.0]],
            },
            p: ScalarSpec::Affine {
                c: 0.3,
                g: vec![0.1, 0.0],
            },
            family: vec![
                ScalarSpec::Affine {
                    c: 1.0,
                    g: vec![1.0, 0.0],
                },
                ScalarSpec::Sinusoidal {
                    c: 1.0,
                    amplitude: 0.5,
                    omega: vec![0.5, 1.0],
                    phase: 0.0,
                },
            ],
            r: TimeSpec::Affine {
                c: 1.0,
                g: vec![0.3, 0.0],
                rate: 0.2,
            },
            f: ScalarSpec::Sinusoidal {
                c: 1.0,
                amplitude: 0.5,
                omega: vec![2.0, 1.0],
                phase: 0.0,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Discretization {
    pub dt: f64,
    pub t_final: f64,
    /// Defaults to `T/32`.
    pub eps0: Option<f64>,
    pub beta: f64,
}

impl Default for Discretization {
    fn default() -> Self {
        Self {
            dt: 1.0 / 64.0,
            t_final: 0.5,
            eps0: None,
            beta: 0.25,
        }
    }
}

impl Discretization {
    pub fn eps0(&self) -> f64 {
        self.eps0.unwrap_or(self.t_final / 32.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InflowKind {
    /// Second-order compatible with the initial datum.
    Compatible,
    Zero,
    Absent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForwardSpec {
    pub inflow: InflowKind,
    /// Also run the upwind scheme and report its deviation.
    pub finite_difference: bool,
    /// Largest accepted relative L2 deviation of the upwind solution at `T`.
    pub fd_tolerance: f64,
}

impl Default for ForwardSpec {
    fn default() -> Self {
        Self {
            inflow: InflowKind::Compatible,
            finite_difference: false,
            fd_tolerance: 0.25,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilySource {
    /// Smooth manufactured fields on a small box next to the observed face.
    Regression,
    /// Solutions of the configured problem, one per initial datum.
    Forward,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CarlemanSpec {
    pub family: FamilySource,
    pub members: usize,
    pub cells: usize,
    pub steps: usize,
    pub s_min: f64,
    pub s_max: f64,
    pub s_count: usize,
    pub fit: FitConfig,
}

impl Default for CarlemanSpec {
    fn default() -> Self {
        Self {
            family: FamilySource::Regression,
            members: 20,
            cells: 48,
            steps: 256,
            s_min: 1.0,
            s_max: 100.0,
            s_count: 41,
            fit: FitConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReconstructionSpec {
    /// Uniform noise level added to the interior initial rates.
    pub noise: f64,
    /// Largest accepted relative L2 error.
    pub tolerance: f64,
    pub det_threshold: f64,
    pub a_threshold: f64,
}

impl Default for ReconstructionSpec {
    fn default() -> Self {
        Self {
            noise: 0.0,
            tolerance: 1e-2,
            det_threshold: crate::inverse::DET_THRESHOLD,
            a_threshold: crate::inverse::A_THRESHOLD,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepProblem {
    H,
    P,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSpec {
    pub problem: SweepProblem,
    pub direction_h: VectorSpec,
    pub direction_p: ScalarSpec,
    pub taus: Vec<f64>,
    /// Seeded extra perturbations checked against the fitted bound.
    pub held_out: usize,
    pub min_fit_quality: f64,
    pub p_bound: Option<f64>,
    pub m0_bound: Option<f64>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            problem: SweepProblem::P,
            direction_h: VectorSpec::Sinusoidal {
                b: vec![0.0, 0.5],
                amplitude: 0.5,
                omega: vec![3.0, 0.0],
                direction: vec![1.0, 0.0],
            },
            direction_p: ScalarSpec::Sinusoidal {
                c: 0.2,
                amplitude: 0.5,
                omega: vec![3.0, 2.0],
                phase: 0.0,
            },
            taus: (1..=8).map(|k| 0.5f64.powi(k)).collect(),
            held_out: 5,
            min_fit_quality: 0.9,
            p_bound: None,
            m0_bound: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CaseSpec {
    pub case: CaseKind,
}

impl Default for CaseSpec {
    fn default() -> Self {
        Self {
            case: CaseKind::PropIv,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProfileSpec {
    /// `((eta - 1)_+)^2`
    SquaredRamp,
    /// `((eta - 1)_+)^exponent`
    Power { exponent: f64 },
    /// `exp(-1 / (eta - 1))` for `eta > 1`
    Smooth,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DemoSpec {
    pub profile: ProfileSpec,
    pub cells: usize,
}

impl Default for DemoSpec {
    fn default() -> Self {
        Self {
            profile: ProfileSpec::SquaredRamp,
            cells: 128,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub kind: Option<Kind>,
    pub seed: u64,
    pub geometry: GeometrySpec,
    pub bounds: Option<Bounds>,
    pub coefficients: Coefficients,
    pub discretization: Discretization,
    pub forward: ForwardSpec,
    pub carleman: CarlemanSpec,
    pub reconstruction: ReconstructionSpec,
    pub sweep: SweepSpec,
    pub case: CaseSpec,
    pub demo: DemoSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kind: None,
            seed: 0,
            geometry: GeometrySpec::Box {
                lo: vec![0.0, 0.0],
                hi: vec![1.0, 1.0],
                cells: 32,
            },
            bounds: Some(Bounds {
                delta0: 0.5,
                m: 3.0,
                x0: Some(vec![0.5, 1.0]),
                nu0: Some(vec![0.0, 1.0]),
            }),
            coefficients: Coefficients::default(),
            discretization: Discretization::default(),
            forward: ForwardSpec::default(),
            carleman: CarlemanSpec::default(),
            reconstruction: ReconstructionSpec::default(),
            sweep: SweepSpec::default(),
            case: CaseSpec::default(),
            demo: DemoSpec::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Configuration(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Configuration(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| Error::Configuration(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Configuration(e.to_string()))
    }

    /// Divide cell counts and multiply time steps by `scale`.
    pub fn rescaled(&self, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Configuration(format!("resolution scale {scale} must be positive")));
        }
        let mut c = self.clone();
        let cells = |n: usize| ((n as f64 / scale).round() as usize).max(2);
        match &mut c.geometry {
            GeometrySpec::Box { cells: n, .. } | GeometrySpec::Subdomain { cells: n, .. } => *n = cells(*n),
        }
        c.discretization.dt *= scale;
        c.carleman.cells = cells(c.carleman.cells);
        c.carleman.steps = cells(c.carleman.steps);
        c.demo.cells = cells(c.demo.cells).max(4);
        Ok(c)
    }

    pub fn rng(&self, stream: u64) -> Rng64 {
        rng(self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(stream))
    }
}

/// The lattice of the configured geometry, and the subdomain when there is one.
pub struct Domain {
    pub grid: Arc<Grid>,
    pub subdomain: Option<Arc<Subdomain>>,
    /// Anchor and outward normal for admissibility.
    pub x0: Vec<f64>,
    pub nu0: Vec<f64>,
    /// Diameter bound used by the eps conditions.
    pub eps: f64,
    pub r: Option<f64>,
}

pub fn build_domain(cfg: &ExperimentConfig) -> Result<Domain> {
    match &cfg.geometry {
        GeometrySpec::Box { lo, hi, cells } => {
            let grid = Arc::new(Grid::boxed(lo, hi, &vec![*cells; lo.len()])?);
            let dim = grid.dim();
            let b = cfg.bounds.as_ref();
            let x0 = b.and_then(|b| b.x0.clone()).unwrap_or_else(|| {
                let mut x = lo.clone();
                x[dim - 1] = hi[dim - 1];
                x
            });
            let nu0 = b.and_then(|b| b.nu0.clone()).unwrap_or_else(|| {
                let mut n = vec![0.0; dim];
                n[dim - 1] = 1.0;
                n
            });
            let eps = grid.diameter();
            Ok(Domain {
                grid,
                subdomain: None,
                x0,
                nu0,
                eps,
                r: None,
            })
        }
        GeometrySpec::Subdomain {
            dim,
            rho0,
            height,
            eps,
            cells,
            samples,
        } => {
            let b = bounds(cfg)?;
            let patch = BoundaryGraph::new(*dim, *rho0, height.clone())?;
            let d = &cfg.discretization;
            let opts = SubdomainOptions {
                samples: *samples,
                horizon: Some((d.t_final, d.beta)),
                ..Default::default()
            };
            let sub = Arc::new(construct_subdomain(&patch, b.delta0, b.m, *eps, &opts)?);
            let grid = Arc::new(Grid::for_subdomain(sub.clone(), *cells)?);
            let (x, nu) = patch.eval_boundary(&vec![0.0; dim - 1])?;
            Ok(Domain {
                grid,
                x0: b.x0.clone().unwrap_or_else(|| x[..*dim].to_vec()),
                nu0: b.nu0.clone().unwrap_or_else(|| nu[..*dim].to_vec()),
                eps: *eps,
                r: Some(sub.r),
                subdomain: Some(sub),
            })
        }
    }
}

pub fn bounds(cfg: &ExperimentConfig) -> Result<&Bounds> {
    cfg.bounds
        .as_ref()
        .ok_or_else(|| Error::Configuration("bounds: section required (delta0, m)".into()))
}

pub fn admissible_spec(cfg: &ExperimentConfig, dom: &Domain) -> Result<AdmissibleSpec> {
    let b = bounds(cfg)?;
    AdmissibleSpec::new(b.delta0, b.m, &dom.x0, &dom.nu0)
}

fn expect_len(path: &str, v: &[f64], dim: usize) -> Result<()> {
    if v.len() != dim {
        return Err(Error::Configuration(format!(
            "{path}: expected {dim} components, got {}",
            v.len()
        )));
    }
    Ok(())
}

fn dot(a: &[f64], x: &[f64]) -> f64 {
    a.iter().zip(x).map(|(a, b)| a * b).sum()
}

impl ScalarSpec {
    pub fn build(&self, path: &str, grid: &Arc<Grid>, rng: &mut Rng64) -> Result<ScalarField> {
        let dim = grid.dim();
        let g = grid.clone();
        Ok(match self.clone() {
            ScalarSpec::Constant { value } => ScalarField::from_fn(g, move |_| value),
            ScalarSpec::Affine { c, g: grad } => {
                expect_len(&format!("{path}.g"), &grad, dim)?;
                ScalarField::from_fn(g, move |x| c + dot(&grad, x))
            }
            ScalarSpec::Sinusoidal {
                c,
                amplitude,
                omega,
                phase,
            } => {
                expect_len(&format!("{path}.omega"), &omega, dim)?;
                ScalarField::from_fn(g, move |x| c + amplitude * (dot(&omega, x) + phase).sin())
            }
            ScalarSpec::Bump {
                center,
                radius,
                height,
            } => {
                expect_len(&format!("{path}.center"), &center, dim)?;
                if !(radius > 0.0) {
                    return Err(Error::Configuration(format!("{path}.radius must be positive")));
                }
                ScalarField::from_fn(g, move |x| {
                    let q: f64 = x.iter().zip(&center).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / (radius * radius);
                    height * (1.0 - q).max(0.0).powi(3)
                })
            }
            ScalarSpec::RandomSmooth {
                offset,
                amplitude,
                terms,
            } => random_smooth_scalar(g, rng, offset, amplitude, terms),
            ScalarSpec::File { path: file } => {
                let block = load_block(&file)?;
                if block.components != 1 || block.values.len() != grid.len() {
                    return Err(Error::Configuration(format!(
                        "{path}: {} does not hold a scalar field on the configured lattice",
                        file.display()
                    )));
                }
                ScalarField::from_values(g, block.values)?
            }
        })
    }
}

impl VectorSpec {
    pub fn build(
        &self,
        path: &str,
        grid: &Arc<Grid>,
        spec: Option<&AdmissibleSpec>,
        rng: &mut Rng64,
    ) -> Result<VectorField> {
        let dim = grid.dim();
        let g = grid.clone();
        Ok(match self.clone() {
            VectorSpec::Constant { value } => {
                expect_len(&format!("{path}.value"), &value, dim)?;
                VectorField::constant(g, &value)
            }
            VectorSpec::Affine { b, a } => {
                expect_len(&format!("{path}.b"), &b, dim)?;
                if a.len() != dim {
                    return Err(Error::Configuration(format!("{path}.a: expected {dim} rows")));
                }
                for (k, row) in a.iter().enumerate() {
                    expect_len(&format!("{path}.a[{k}]"), row, dim)?;
                }
                VectorField::from_fn(g, move |x, o| {
                    for k in 0..o.len() {
                        o[k] = b[k] + dot(&a[k], x);
                    }
                })
            }
            VectorSpec::Sinusoidal {
                b,
                amplitude,
                omega,
                direction,
            } => {
                expect_len(&format!("{path}.b"), &b, dim)?;
                expect_len(&format!("{path}.omega"), &omega, dim)?;
                expect_len(&format!("{path}.direction"), &direction, dim)?;
                VectorField::from_fn(g, move |x, o| {
                    let s = amplitude * dot(&omega, x).sin();
                    for k in 0..o.len() {
                        o[k] = b[k] + s * direction[k];
                    }
                })
            }
            VectorSpec::RandomAdmissible => {
                let spec = spec.ok_or_else(|| {
                    Error::Configuration(format!("{path}: random-admissible needs the bounds section"))
                })?;
                random_admissible(spec, g, rng)?
            }
            VectorSpec::File { path: file } => {
                let block = load_block(&file)?;
                if block.components != dim || block.values.len() != grid.len() * dim {
                    return Err(Error::Configuration(format!(
                        "{path}: {} does not hold a vector field on the configured lattice",
                        file.display()
                    )));
                }
                VectorField::from_values(g, block.values)?
            }
        })
    }
}

impl TimeSpec {
    pub fn build(&self, path: &str, dim: usize) -> Result<Arc<dyn SpaceTimeFn>> {
        Ok(match self.clone() {
            TimeSpec::Affine { c, g, rate } => {
                expect_len(&format!("{path}.g"), &g, dim)?;
                Arc::new(move |x: &[f64], t: f64| c + dot(&g, x) + rate * t)
            }
            TimeSpec::Sinusoidal {
                c,
                amplitude,
                omega,
                frequency,
            } => {
                expect_len(&format!("{path}.omega"), &omega, dim)?;
                Arc::new(move |x: &[f64], t: f64| c + amplitude * (dot(&omega, x) + frequency * t).sin())
            }
        })
    }
}

impl TimeSpec {
    /// Closed-form `dR/dt`.
    pub fn derivative(&self, path: &str, dim: usize) -> Result<Arc<dyn SpaceTimeFn>> {
        self.build(path, dim)?;
        Ok(match self.clone() {
            TimeSpec::Affine { rate, .. } => Arc::new(move |_: &[f64], _: f64| rate),
            TimeSpec::Sinusoidal {
                amplitude,
                omega,
                frequency,
                ..
            } => Arc::new(move |x: &[f64], t: f64| amplitude * frequency * (dot(&omega, x) + frequency * t).cos()),
        })
    }
}

/// Every violated constraint of `cfg` for an experiment of `kind`.
pub fn validate(cfg: &ExperimentConfig, kind: Kind) -> Vec<String> {
    let mut v = Vec::new();
    let d = &cfg.discretization;
    let (t, dt, beta) = (d.t_final, d.dt, d.beta);
    if !(t > 0.0 && t.is_finite()) {
        v.push(format!("discretization.t_final = {t} must be positive"));
    }
    if !(dt > 0.0 && dt <= t) {
        v.push(format!("discretization.dt = {dt} must lie in (0, T]"));
    }
    if !(beta > 0.0) {
        v.push(format!("discretization.beta = {beta} must be positive"));
    }
    let time_bad = !v.is_empty();
    let eps0 = d.eps0();
    if !(eps0 > 0.0 && eps0 < t / 16.0) {
        v.push(format!("ε₀ < T/16: eps0 = {eps0}, T/16 = {}", t / 16.0));
    }
    let before_geometry = v.len();
    let dim = match &cfg.geometry {
        GeometrySpec::Box { lo, hi, cells } => {
            if lo.is_empty() || lo.len() > 3 || lo.len() != hi.len() || lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
                v.push("geometry: need 1 to 3 axes with lo < hi".into());
            }
            if *cells < 2 {
                v.push(format!("geometry.cells = {cells} must be at least 2"));
            }
            lo.len()
        }
        GeometrySpec::Subdomain { dim, .. } => *dim,
    };
    if let Some(b) = &cfg.bounds {
        if !(b.delta0 > 0.0 && b.m > b.delta0) {
            v.push(format!("bounds: need 0 < delta0 < m, got delta0 = {}, m = {}", b.delta0, b.m));
        }
        for (name, x) in [("x0", &b.x0), ("nu0", &b.nu0)] {
            if let Some(x) = x {
                if x.len() != dim {
                    v.push(format!("bounds.{name}: expected {dim} components, got {}", x.len()));
                }
            }
        }
        if let Some(nu) = &b.nu0 {
            if (nu.iter().map(|a| a * a).sum::<f64>().sqrt() - 1.0).abs() > 1e-9 {
                v.push("bounds.nu0 must be a unit vector".into());
            }
        }
    }
    let mut geometry_bad = v.len() > before_geometry;
    if kind == Kind::Subdomain && !matches!(cfg.geometry, GeometrySpec::Subdomain { .. }) {
        v.push("geometry.kind: the subdomain experiment needs kind = \"subdomain\"".into());
    }

    if kind == Kind::DemoNonuniqueness {
        if cfg.demo.cells < 4 {
            v.push(format!("demo.cells = {} must be at least 4", cfg.demo.cells));
        }
        if let ProfileSpec::Power { exponent } = cfg.demo.profile {
            if !(exponent > 0.0) {
                v.push(format!("demo.profile.exponent = {exponent} must be positive"));
            }
        }
        return v;
    }
    if kind == Kind::CarlemanVerify {
        let c = &cfg.carleman;
        if !(c.s_min > 0.0 && c.s_max > c.s_min && c.s_count >= 2) {
            v.push("carleman: need 0 < s_min < s_max and s_count >= 2".into());
        }
        if !(c.fit.c_min > 0.0 && c.fit.c_max > c.fit.c_min && c.fit.per_decade >= 1) {
            v.push("carleman.fit: need 0 < c_min < c_max and per_decade >= 1".into());
        }
        if c.members == 0 || c.cells < 2 || c.steps < 2 {
            v.push("carleman: need members >= 1, cells >= 2 and steps >= 2".into());
        }
        if c.family == FamilySource::Regression {
            return v;
        }
    }
    if kind == Kind::CaseExperiment && cfg.case.case == CaseKind::CaseIi {
        v.push("case.case: initial data with inflow-boundary data (case II) is unsupported".into());
    }

    let before_subdomain = v.len();
    if let GeometrySpec::Subdomain { dim, rho0, eps, samples, .. } = &cfg.geometry {
        if !(1..=3).contains(dim) {
            v.push(format!("geometry.dim = {dim} must lie in 1..=3"));
        }
        if !(*rho0 > 0.0) {
            v.push(format!("geometry.rho0 = {rho0} must be positive"));
        }
        if !(*eps > 0.0) {
            v.push(format!("geometry.eps = {eps} must be positive"));
        }
        if *samples < 10 {
            v.push(format!("geometry.samples = {samples} must be at least 10"));
        }
        if cfg.bounds.is_none() {
            v.push("bounds: required by the subdomain geometry".into());
        }
    }
    geometry_bad |= v.len() > before_subdomain;
    if geometry_bad {
        return v;
    }

    // eps branches need the diameter (and for subdomains the radius r)
    let needs_eps = matches!(kind, Kind::Subdomain | Kind::CarlemanVerify);
    let before_eps = v.len();
    if let (Some(b), true) = (&cfg.bounds, needs_eps && !time_bad) {
        let eps = match &cfg.geometry {
            GeometrySpec::Subdomain { eps, .. } => *eps,
            GeometrySpec::Box { lo, hi, .. } => lo.iter().zip(hi).map(|(a, b)| (b - a).powi(2)).sum::<f64>().sqrt(),
        };
        let r = match &cfg.geometry {
            GeometrySpec::Subdomain { dim, rho0, height, .. } => {
                BoundaryGraph::new(*dim, *rho0, height.clone())
                    .and_then(|p| construct_subdomain(&p, b.delta0, b.m, 1e-6, &SubdomainOptions::default()))
                    .map(|s| s.r)
                    .ok()
            }
            GeometrySpec::Box { .. } => None,
        };
        let c = eps_condition(eps, b.delta0, b.m, beta, t, r);
        let branches = [
            (c.lemma1_diameter, "eps < delta0^2/(2 M^2)"),
            (c.unit, "eps < 1"),
            (c.oscillation, "eps < beta T/(4 M)"),
            (c.radius != Some(false), "eps < r"),
        ];
        for (ok, name) in branches {
            if !ok {
                v.push(format!("eps condition branch {name} violated (eps = {eps})"));
            }
        }
    }
    if v.len() > before_eps && matches!(cfg.geometry, GeometrySpec::Subdomain { .. }) {
        // construction would only repeat the failed branch
        return v;
    }

    let dom = match build_domain(cfg) {
        Ok(d) => d,
        Err(e) => {
            v.push(format!("geometry: {e}"));
            return v;
        }
    };
    let spec = cfg.bounds.as_ref().and_then(|b| AdmissibleSpec::new(b.delta0, b.m, &dom.x0, &dom.nu0).ok());
    let mut r = cfg.rng(0);
    let co = &cfg.coefficients;
    match co.h.build("coefficients.h", &dom.grid, spec.as_ref(), &mut r) {
        Ok(h) => {
            let speed = h.max_speed();
            let hmin = dom.grid.min_spacing();
            let needs_time = !matches!(kind, Kind::Subdomain);
            if needs_time && !time_bad && dt * speed > hmin * (1.0 + 1e-12) {
                v.push(format!(
                    "dt * max|H| <= h: dt * max|H| = {:.4e}, h = {hmin:.4e}",
                    dt * speed
                ));
            }
        }
        Err(e) => v.push(e.to_string()),
    }
    if let Err(e) = co.p.build("coefficients.p", &dom.grid, &mut r) {
        v.push(e.to_string());
    }
    for (k, a) in co.family.iter().enumerate() {
        if let Err(e) = a.build(&format!("coefficients.family[{k}]"), &dom.grid, &mut r) {
            v.push(e.to_string());
        }
    }
    if matches!(kind, Kind::EnergyCheck | Kind::CaseExperiment) {
        if let Err(e) = co.r.build("coefficients.r", dim) {
            v.push(e.to_string());
        }
        if let Err(e) = co.f.build("coefficients.f", &dom.grid, &mut r) {
            v.push(e.to_string());
        }
    }
    let need_family = match kind {
        Kind::ReconstructH => dim,
        Kind::Forward | Kind::ReconstructP => 1,
        Kind::StabilitySweep if cfg.sweep.problem == SweepProblem::H => dim,
        Kind::StabilitySweep => 1,
        Kind::CarlemanVerify => 1,
        _ => 0,
    };
    if co.family.len() < need_family {
        v.push(format!(
            "coefficients.family: {} needs {need_family} initial data, got {}",
            kind.name(),
            co.family.len()
        ));
    }
    if kind == Kind::ReconstructH && co.family.len() != dim {
        v.push(format!(
            "coefficients.family: reconstruct-h needs exactly {dim} initial data, got {}",
            co.family.len()
        ));
    }
    if kind == Kind::StabilitySweep {
        let s = &cfg.sweep;
        if s.taus.len() < 3 || s.taus.iter().any(|t| !(*t > 0.0)) {
            v.push("sweep.taus: need at least 3 positive values".into());
        }
        if s.problem == SweepProblem::H && spec.is_none() {
            v.push("bounds: required by the H-problem sweep".into());
        }
        let built = match s.problem {
            SweepProblem::H => s.direction_h.build("sweep.direction_h", &dom.grid, spec.as_ref(), &mut r).err(),
            SweepProblem::P => s.direction_p.build("sweep.direction_p", &dom.grid, &mut r).err(),
        };
        if let Some(e) = built {
            v.push(e.to_string());
        }
    }
    if matches!(kind, Kind::ReconstructH | Kind::ReconstructP) {
        let rc = &cfg.reconstruction;
        if !(rc.noise >= 0.0 && rc.tolerance > 0.0 && rc.det_threshold > 0.0 && rc.a_threshold > 0.0) {
            v.push("reconstruction: need noise >= 0 and positive tolerance and thresholds".into());
        }
    }
    v
}
