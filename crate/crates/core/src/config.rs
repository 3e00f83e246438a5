//! Flat key/value experiment configuration.
//!
//! Configs are TOML files restricted to top-level `key = value` pairs.
//! Unknown keys are rejected outright so a misspelled sweep fails loudly
//! instead of running with defaults. Validation errors always name the
//! offending key. The full key reference lives in `FORMATS.md`.

use serde::Deserialize;

use crate::adaptive::HoelderParams;
use crate::error::{Error, Result};
use crate::grid::{SampledPath, TimeGrid};
use crate::process::{DiffusionSpec, DriftSpec, ProcessSpec};

/// Raw deserialized config; everything optional, validated per use.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    // process
    pub kind: Option<String>,
    #[serde(rename = "T")]
    pub t_horizon: Option<f64>,
    pub n_fine: Option<u64>,
    pub x0: Option<f64>,
    pub drift: Option<String>,
    pub diffusion: Option<String>,
    pub level: Option<f64>,
    pub jump_time: Option<f64>,
    pub values: Option<Vec<f64>>,
    pub seed: Option<u64>,

    // experiment
    pub pipeline: Option<String>,
    pub q: Option<f64>,
    pub m_list: Option<Vec<f64>>,
    pub p_list: Option<Vec<f64>>,
    pub n_list: Option<Vec<u64>>,
    pub paths: Option<u64>,
    pub epsilon: Option<f64>,
    pub svg: Option<bool>,

    // Hoelder / adaptive
    pub hoelder_q: Option<f64>,
    pub theta: Option<f64>,
    pub eps0: Option<f64>,
    pub sigma: Option<String>,

    // market / pricing
    pub s0: Option<f64>,
    pub strike: Option<f64>,
    pub vol: Option<f64>,
    pub rate: Option<f64>,
    pub periods: Option<u64>,
    pub payoff: Option<String>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config {
            key: "<toml>".into(),
            message: e.to_string(),
        })
    }
}

fn require<T: Copy>(field: Option<T>, key: &str) -> Result<T> {
    field.ok_or_else(|| Error::config(key, "missing required key"))
}

/// Which approximation pipeline an experiment runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pipeline {
    Thm1Affine,
    Thm3Step,
    Thm2Ode,
    Thm4OdeStep,
    Thm5Log,
    Adaptive,
}

impl Pipeline {
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "thm1_affine" => Ok(Pipeline::Thm1Affine),
            "thm3_step" => Ok(Pipeline::Thm3Step),
            "thm2_ode" => Ok(Pipeline::Thm2Ode),
            "thm4_ode_step" => Ok(Pipeline::Thm4OdeStep),
            "thm5_log" => Ok(Pipeline::Thm5Log),
            "adaptive" => Ok(Pipeline::Adaptive),
            other => Err(Error::config(
                "pipeline",
                format!(
                    "unknown pipeline `{other}` (want thm1_affine, thm3_step, thm2_ode, \
                     thm4_ode_step, thm5_log or adaptive)"
                ),
            )),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Pipeline::Thm1Affine => "thm1_affine",
            Pipeline::Thm3Step => "thm3_step",
            Pipeline::Thm2Ode => "thm2_ode",
            Pipeline::Thm4OdeStep => "thm4_ode_step",
            Pipeline::Thm5Log => "thm5_log",
            Pipeline::Adaptive => "adaptive",
        }
    }
}

/// Modulus selector for the adaptive pipeline: `const:<c>` or
/// `step:<v0>:<t_split>:<v1>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaSpec {
    Const { value: f64 },
    Step { before: f64, split: f64, after: f64 },
}

impl SigmaSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.split(':').collect();
        let bad = |msg: &str| Error::config("sigma", format!("`{text}`: {msg}"));
        match parts[0] {
            "const" => {
                let value = parts
                    .get(1)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| bad("want const:<value>"))?;
                Ok(SigmaSpec::Const { value })
            }
            "step" => {
                if parts.len() != 4 {
                    return Err(bad("want step:<v0>:<t_split>:<v1>"));
                }
                let before = parts[1].parse().map_err(|_| bad("bad v0"))?;
                let split = parts[2].parse().map_err(|_| bad("bad t_split"))?;
                let after = parts[3].parse().map_err(|_| bad("bad v1"))?;
                Ok(SigmaSpec::Step {
                    before,
                    split,
                    after,
                })
            }
            _ => Err(bad("unknown kind")),
        }
    }

    pub fn materialize(&self, grid: TimeGrid) -> Result<SampledPath> {
        match *self {
            SigmaSpec::Const { value } => SampledPath::constant(grid, value),
            SigmaSpec::Step {
                before,
                split,
                after,
            } => SampledPath::from_fn(grid, |t| if t < split { before } else { after }),
        }
    }

    pub fn max_value(&self) -> f64 {
        match *self {
            SigmaSpec::Const { value } => value,
            SigmaSpec::Step { before, after, .. } => before.max(after),
        }
    }
}

/// Hoelder settings for the adaptive pipeline.
#[derive(Debug, Clone, Copy)]
pub struct HoelderSettings {
    pub q: f64,
    pub theta: f64,
    pub eps0: f64,
    pub sigma: SigmaSpec,
}

impl HoelderSettings {
    pub fn materialize(&self, grid: TimeGrid) -> Result<HoelderParams> {
        HoelderParams::new(
            self.q,
            self.theta,
            self.eps0,
            self.sigma.max_value(),
            self.sigma.materialize(grid)?,
        )
    }
}

/// A validated experiment: process, grid, pipeline and sweeps.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub process: ProcessSpec,
    pub grid: TimeGrid,
    pub pipeline: Pipeline,
    pub q: f64,
    pub m_list: Vec<f64>,
    pub p_list: Vec<f64>,
    pub n_list: Vec<usize>,
    pub paths: usize,
    pub seed: u64,
    pub epsilon: Option<f64>,
    pub svg: bool,
    pub hoelder: Option<HoelderSettings>,
    /// Drift used by the ODE pipelines (for `kind = "ito"` it is the same
    /// coefficient that generated the path).
    pub solver_drift: DriftSpec,
}

/// Builds the process spec alone (used by `simulate` and the single-path
/// subcommands).
pub fn process_from_raw(raw: &RawConfig) -> Result<(ProcessSpec, TimeGrid, u64)> {
    let kind = raw
        .kind
        .as_deref()
        .ok_or_else(|| Error::config("kind", "missing required key"))?;
    let t_horizon = require(raw.t_horizon, "T")?;
    let n_fine = require(raw.n_fine, "n_fine")? as usize;
    let grid =
        TimeGrid::new(t_horizon, n_fine).map_err(|e| Error::config("T/n_fine", e.to_string()))?;
    let seed = raw.seed.unwrap_or(0);

    let spec = match kind {
        "wiener" => ProcessSpec::Wiener,
        "constant" => ProcessSpec::Constant {
            level: require(raw.level, "level")?,
        },
        "step_jump" => ProcessSpec::StepJump {
            level: require(raw.level, "level")?,
            jump_time: require(raw.jump_time, "jump_time")?,
        },
        "custom_table" => ProcessSpec::CustomTable {
            values: raw
                .values
                .clone()
                .ok_or_else(|| Error::config("values", "missing required key"))?,
        },
        "ito" => {
            let drift = raw
                .drift
                .as_deref()
                .ok_or_else(|| Error::config("drift", "missing required key"))?;
            let diffusion = raw
                .diffusion
                .as_deref()
                .ok_or_else(|| Error::config("diffusion", "missing required key"))?;
            ProcessSpec::Ito {
                x0: raw.x0.unwrap_or(0.0),
                drift: DriftSpec::parse(drift)
                    .map_err(|e| Error::config("drift", e.to_string()))?,
                diffusion: DiffusionSpec::parse(diffusion)
                    .map_err(|e| Error::config("diffusion", e.to_string()))?,
            }
        }
        other => {
            return Err(Error::config(
                "kind",
                format!(
                    "unknown process kind `{other}` (want wiener, constant, step_jump, \
                     custom_table or ito)"
                ),
            ))
        }
    };
    // structural checks happen now; numeric behaviour stays a runtime concern
    if let ProcessSpec::CustomTable { values } = &spec {
        if values.len() != grid.n_fine() + 1 {
            return Err(Error::config(
                "values",
                format!(
                    "need n_fine + 1 = {} samples, got {}",
                    grid.n_fine() + 1,
                    values.len()
                ),
            ));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::config("values", format!("non-finite sample {v}")));
        }
    }
    Ok((spec, grid, seed))
}

impl ExperimentConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self> {
        let (process, grid, seed) = process_from_raw(raw)?;
        let pipeline = Pipeline::parse(
            raw.pipeline
                .as_deref()
                .ok_or_else(|| Error::config("pipeline", "missing required key"))?,
        )?;
        let q = require(raw.q, "q")?;
        if q < 1.0 {
            return Err(Error::config("q", format!("q must be ≥ 1, got {q}")));
        }

        let adaptive = pipeline == Pipeline::Adaptive;
        // the adaptive pipeline has no (m, p) sweep; placeholders keep the
        // report schema uniform
        let m_list = match (&raw.m_list, adaptive) {
            (Some(v), _) if !v.is_empty() => v.clone(),
            (None, true) => vec![1.0],
            _ => return Err(Error::config("m_list", "need a nonempty list")),
        };
        let p_list = match (&raw.p_list, adaptive) {
            (Some(v), _) if !v.is_empty() => v.clone(),
            (None, true) => vec![1.0],
            _ => return Err(Error::config("p_list", "need a nonempty list")),
        };
        for &m in &m_list {
            if !(m.is_finite() && m > 0.0) {
                return Err(Error::config(
                    "m_list",
                    format!("m must be positive, got {m}"),
                ));
            }
        }
        for &p in &p_list {
            if !(p.is_finite() && p > 0.0) {
                return Err(Error::config(
                    "p_list",
                    format!("p must be positive, got {p}"),
                ));
            }
        }
        let n_list: Vec<usize> = raw
            .n_list
            .as_ref()
            .filter(|v| !v.is_empty())
            .ok_or_else(|| Error::config("n_list", "need a nonempty list"))?
            .iter()
            .map(|&n| n as usize)
            .collect();
        for &n in &n_list {
            if n == 0 || grid.n_fine() % n != 0 {
                return Err(Error::config(
                    "n_list",
                    format!(
                        "n = {n} must be a positive divisor of n_fine = {}",
                        grid.n_fine()
                    ),
                ));
            }
        }
        let paths = raw.paths.unwrap_or(100) as usize;
        if paths == 0 {
            return Err(Error::config("paths", "need at least one path"));
        }

        let hoelder = if adaptive {
            Some(HoelderSettings {
                q: require(raw.hoelder_q, "hoelder_q")?,
                theta: require(raw.theta, "theta")?,
                eps0: require(raw.eps0, "eps0")?,
                sigma: SigmaSpec::parse(
                    raw.sigma
                        .as_deref()
                        .ok_or_else(|| Error::config("sigma", "missing required key"))?,
                )?,
            })
        } else {
            None
        };

        let solver_drift = match &process {
            ProcessSpec::Ito { drift, .. } => *drift,
            _ => match raw.drift.as_deref() {
                Some(text) => {
                    DriftSpec::parse(text).map_err(|e| Error::config("drift", e.to_string()))?
                }
                None => DriftSpec::Zero,
            },
        };

        Ok(ExperimentConfig {
            process,
            grid,
            pipeline,
            q,
            m_list,
            p_list,
            n_list,
            paths,
            seed,
            epsilon: raw.epsilon,
            svg: raw.svg.unwrap_or(false),
            hoelder,
            solver_drift,
        })
    }
}

/// Parameters of the CRR pricing demo.
#[derive(Debug, Clone, Copy)]
pub struct MarketConfig {
    pub s0: f64,
    pub strike: f64,
    pub vol: f64,
    pub rate: f64,
    pub periods: usize,
    pub horizon: f64,
    pub call: bool,
}

impl MarketConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self> {
        let s0 = require(raw.s0, "s0")?;
        let strike = require(raw.strike, "strike")?;
        let vol = require(raw.vol, "vol")?;
        let rate = raw.rate.unwrap_or(0.0);
        let periods = require(raw.periods, "periods")? as usize;
        let horizon = require(raw.t_horizon, "T")?;
        let call = match raw.payoff.as_deref().unwrap_or("call") {
            "call" => true,
            "put" => false,
            other => {
                return Err(Error::config(
                    "payoff",
                    format!("unknown payoff `{other}` (want call or put)"),
                ))
            }
        };
        if vol <= 0.0 {
            return Err(Error::config(
                "vol",
                format!("vol must be positive, got {vol}"),
            ));
        }
        if rate < 0.0 {
            return Err(Error::config(
                "rate",
                format!("rate must be ≥ 0, got {rate}"),
            ));
        }
        if periods == 0 {
            return Err(Error::config("periods", "need at least one period"));
        }
        Ok(MarketConfig {
            s0,
            strike,
            vol,
            rate,
            periods,
            horizon,
            call,
        })
    }

    /// Per-period bond growth `ρ = e^{r·δ}`.
    pub fn rho(&self) -> f64 {
        (self.rate * self.horizon / self.periods as f64).exp()
    }
}
