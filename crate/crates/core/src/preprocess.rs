//! Clipping and causal trailing-window mollification.
//!
//! The approximation pipeline never tracks a raw path directly. It first
//! clamps the path to `[-m, m]` and then replaces it by its trailing-window
//! average over `[t - ε, t]` with `ε = 1/p`, extending the path by
//! `x(t) = x(0)` for `t < 0`. The mollified path is grid-Lipschitz with
//! constant at most `2·sup|x̄|·p`, which is what entitles a fixed-slope
//! tracker to its `2Mδ` guarantee.
//!
//! Both operations are causal: the output at `t_j` depends only on input
//! samples at `t ≤ t_j`, bit-exactly (the window integral is accumulated as
//! a prefix sum).

use crate::error::{Error, Result};
use crate::grid::SampledPath;

/// Clip level `m` and window parameter `p` (window `ε = 1/p`).
///
/// Any positive reals are accepted; integrality is not required.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreprocessParams {
    m: f64,
    p: f64,
}

impl PreprocessParams {
    pub fn new(m: f64, p: f64) -> Result<Self> {
        if !(m.is_finite() && m > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "clip level m must be positive, got {m}"
            )));
        }
        if !(p.is_finite() && p > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "window parameter p must be positive, got {p}"
            )));
        }
        Ok(PreprocessParams { m, p })
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Nominal window length `ε = 1/p`.
    pub fn window(&self) -> f64 {
        1.0 / self.p
    }
}

/// Componentwise clamp to `[-m, m]`.
///
/// Identity wherever `|x| ≤ m`; `m` must be positive.
pub fn clip(x: &SampledPath, m: f64) -> SampledPath {
    assert!(m > 0.0, "clip level must be positive");
    x.map(|v| v.clamp(-m, m))
        .expect("clamp keeps values finite")
}

/// The whole pipeline stage: clip at `params.m()`, then mollify with
/// window `1/params.p()`.
pub fn preprocess(x: &SampledPath, params: &PreprocessParams) -> Result<Mollified> {
    mollify(&clip(x, params.m()), params.p())
}

/// Output of [`mollify`], carrying the window actually used.
///
/// Windows are rounded *down* to a whole number of fine steps, so
/// `eps_effective ≤ 1/p` and `p_effective ≥ p`. Consumers deriving a slope
/// budget `M = 2·m·p` should use `p_effective`.
#[derive(Debug, Clone)]
pub struct Mollified {
    pub path: SampledPath,
    pub window_steps: usize,
    pub eps_effective: f64,
    pub p_effective: f64,
}

/// Window geometry for spacing `dt` and parameter `p`:
/// `(steps, ε_eff = steps·dt, p_eff = 1/ε_eff)`. Errors if `1/p` is
/// shorter than one step.
pub fn effective_window(dt: f64, p: f64) -> Result<(usize, f64, f64)> {
    if !(p.is_finite() && p > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "window parameter p must be positive, got {p}"
        )));
    }
    let eps = 1.0 / p;
    // Nudge before flooring so exact multiples survive rounding.
    let ratio = eps / dt;
    let window_steps = (ratio * (1.0 + 1e-12) + 1e-12).floor() as usize;
    if window_steps == 0 {
        return Err(Error::InvalidArgument(format!(
            "mollifier window 1/p = {eps} is shorter than one fine step {dt}"
        )));
    }
    let eps_effective = window_steps as f64 * dt;
    Ok((window_steps, eps_effective, 1.0 / eps_effective))
}

/// Trailing-window average `(1/ε)·∫_{t-ε}^t x(s) ds` with `ε = 1/p`,
/// computed by trapezoidal quadrature on the fine grid, with `x(s) = x(0)`
/// for `s < 0`.
///
/// Errors if the window is shorter than one fine step.
pub fn mollify(x: &SampledPath, p: f64) -> Result<Mollified> {
    let grid = x.grid();
    let dt = grid.dt();
    let (window_steps, eps_effective, p_effective) = effective_window(dt, p)?;

    let vals = x.values();
    let n = grid.n_fine();
    let mut prefix = vec![0.0; n + 1];
    for j in 0..n {
        prefix[j + 1] = prefix[j] + 0.5 * (vals[j] + vals[j + 1]) * dt;
    }
    let x0 = vals[0];
    let w = window_steps;
    let mut out = Vec::with_capacity(n + 1);
    for j in 0..=n {
        let integral = if j >= w {
            prefix[j] - prefix[j - w]
        } else {
            // the part of the window below t = 0 sees the constant x(0)
            x0 * ((w - j) as f64) * dt + prefix[j]
        };
        out.push(integral / eps_effective);
    }
    Ok(Mollified {
        path: SampledPath::new(grid, out)?,
        window_steps,
        eps_effective,
        p_effective,
    })
}
