//! Generators for the underlying processes.
//!
//! Everything here is a pure function of `(grid, parameters, seed)`:
//! the same inputs reproduce the same path bit for bit, and ensembles
//! derive per-path seeds as `seed_base + path_index` (see [`path_seed`]),
//! so Monte Carlo runs are reproducible and parallelizable.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::grid::{SampledPath, TimeGrid};
use crate::ode::DriftField;

/// Documented seed-splitting rule for ensembles: path `i` of an ensemble
/// with base seed `s` uses seed `s + i` (wrapping).
pub fn path_seed(seed_base: u64, path_index: u64) -> u64 {
    seed_base.wrapping_add(path_index)
}

/// Standard Wiener path: `w(0) = 0`, independent Gaussian increments with
/// variance `T/n_fine`.
pub fn gen_wiener(grid: TimeGrid, seed: u64) -> SampledPath {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dt = grid.dt();
    let sqrt_dt = dt.sqrt();
    let n = grid.n_fine();
    let mut values = Vec::with_capacity(n + 1);
    let mut w = 0.0f64;
    values.push(w);
    for _ in 0..n {
        let z: f64 = rng.sample(StandardNormal);
        w += sqrt_dt * z;
        values.push(w);
    }
    SampledPath::new(grid, values).expect("gaussian increments are finite")
}

/// Euler–Maruyama reference path for
/// `dx = f(x,t) dt + b(x,t) dw`, sharing the Wiener increment stream of
/// [`gen_wiener`] for the same seed (so `f ≡ 0, b ≡ 1` reproduces it
/// exactly). The caller asserts that `f` and `b` are bounded with bounded
/// `x`-derivatives.
pub fn gen_ito(
    grid: TimeGrid,
    f: impl Fn(f64, f64) -> f64,
    b: impl Fn(f64, f64) -> f64,
    x0: f64,
    seed: u64,
) -> Result<SampledPath> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dt = grid.dt();
    let sqrt_dt = dt.sqrt();
    let n = grid.n_fine();
    let mut values = Vec::with_capacity(n + 1);
    let mut x = x0;
    values.push(x);
    for j in 0..n {
        let t = grid.t(j);
        let z: f64 = rng.sample(StandardNormal);
        x = x + f(x, t) * dt + b(x, t) * (sqrt_dt * z);
        if !x.is_finite() {
            return Err(Error::NumericOverflow(format!(
                "Euler-Maruyama state became non-finite at step {j}"
            )));
        }
        values.push(x);
    }
    SampledPath::new(grid, values)
}

/// Built-in deterministic fixtures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExampleKind {
    /// `x ≡ 0`.
    Zero,
    /// `x(t) = 0` for `t < T/2`, `x(t) = 1` for `t ≥ T/2`.
    Step,
}

pub fn gen_example(grid: TimeGrid, which: ExampleKind) -> SampledPath {
    let half = grid.horizon() / 2.0;
    match which {
        ExampleKind::Zero => SampledPath::constant(grid, 0.0),
        ExampleKind::Step => SampledPath::from_fn(grid, |t| if t < half { 0.0 } else { 1.0 }),
    }
    .expect("fixture values are finite")
}

/// Config-expressible drift selector; materializes to a [`DriftField`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DriftSpec {
    Zero,
    Constant {
        rate: f64,
    },
    /// `f(x) = slope·cap·tanh(x/cap)`, certified by `|slope|·(cap + 1)`.
    CappedLinear {
        slope: f64,
        cap: f64,
    },
}

impl DriftSpec {
    pub fn to_field(self) -> Result<DriftField> {
        match self {
            DriftSpec::Zero => Ok(DriftField::zero()),
            DriftSpec::Constant { rate } => Ok(DriftField::constant(rate)),
            DriftSpec::CappedLinear { slope, cap } => DriftField::capped_linear(slope, cap),
        }
    }

    /// Parses `"zero"`, `"const:<c>"` or `"capped_linear:<slope>:<cap>"`.
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.split(':').collect();
        let bad = |msg: &str| Error::InvalidArgument(format!("drift selector `{text}`: {msg}"));
        match parts[0] {
            "zero" => Ok(DriftSpec::Zero),
            "const" => {
                let rate = parts
                    .get(1)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| bad("want const:<rate>"))?;
                Ok(DriftSpec::Constant { rate })
            }
            "capped_linear" => {
                if parts.len() != 3 {
                    return Err(bad("want capped_linear:<slope>:<cap>"));
                }
                let slope = parts[1].parse().map_err(|_| bad("bad slope"))?;
                let cap = parts[2].parse().map_err(|_| bad("bad cap"))?;
                Ok(DriftSpec::CappedLinear { slope, cap })
            }
            _ => Err(bad("unknown kind")),
        }
    }
}

/// Config-expressible diffusion selector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DiffusionSpec {
    Zero,
    Constant { sigma: f64 },
}

impl DiffusionSpec {
    pub fn eval(self, _x: f64, _t: f64) -> f64 {
        match self {
            DiffusionSpec::Zero => 0.0,
            DiffusionSpec::Constant { sigma } => sigma,
        }
    }

    /// Parses `"zero"` or `"const:<sigma>"`.
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.split(':').collect();
        match parts[0] {
            "zero" => Ok(DiffusionSpec::Zero),
            "const" => {
                let sigma = parts.get(1).and_then(|s| s.parse().ok()).ok_or_else(|| {
                    Error::InvalidArgument(format!(
                        "diffusion selector `{text}`: want const:<sigma>"
                    ))
                })?;
                Ok(DiffusionSpec::Constant { sigma })
            }
            _ => Err(Error::InvalidArgument(format!(
                "diffusion selector `{text}`: unknown kind"
            ))),
        }
    }
}

/// A generator a config file can name: which process to sample and its
/// parameters. `generate` is deterministic in `(grid, self, seed)`.
#[derive(Debug, Clone, PartialEq)]
pub enum ProcessSpec {
    Wiener,
    Constant {
        level: f64,
    },
    StepJump {
        level: f64,
        jump_time: f64,
    },
    CustomTable {
        values: Vec<f64>,
    },
    Ito {
        x0: f64,
        drift: DriftSpec,
        diffusion: DiffusionSpec,
    },
}

impl ProcessSpec {
    pub fn generate(&self, grid: TimeGrid, seed: u64) -> Result<SampledPath> {
        match self {
            ProcessSpec::Wiener => Ok(gen_wiener(grid, seed)),
            ProcessSpec::Constant { level } => SampledPath::constant(grid, *level),
            ProcessSpec::StepJump { level, jump_time } => {
                let (level, jump) = (*level, *jump_time);
                SampledPath::from_fn(grid, |t| if t < jump { 0.0 } else { level })
            }
            ProcessSpec::CustomTable { values } => SampledPath::new(grid, values.clone()),
            ProcessSpec::Ito {
                x0,
                drift,
                diffusion,
            } => {
                let field = drift.to_field()?;
                let b = *diffusion;
                gen_ito(
                    grid,
                    |x, t| field.eval(x, t),
                    |x, t| b.eval(x, t),
                    *x0,
                    seed,
                )
            }
        }
    }

    /// The drift field of an Itô spec (used to drive the ODE solver with
    /// the same coefficient).
    pub fn drift_field(&self) -> Result<Option<DriftField>> {
        match self {
            ProcessSpec::Ito { drift, .. } => Ok(Some(drift.to_field()?)),
            _ => Ok(None),
        }
    }
}
