//! Multiplicative (CRR-style) tracking of positive processes.
//!
//! A positive path `x` is tracked through its logarithm: the step tracker
//! runs on the clipped, mollified `log x` with rate `M = 2mp`, producing
//! increments `ξ_i = ±M`. Each log increment maps to a multiplicative
//! factor via `log(1 − d₁δ) = −Mδ` and `log(1 + d₂δ) = +Mδ`, so the price
//! path `y(t_k) = y₀·∏(1 + ζ_i δ)` with `ζ_i ∈ {−d₁, d₂}` satisfies
//! `log y(t_k) = η(t_k)` exactly, stays positive, and inherits the step
//! tracker's coarse-point bound `|η(t_k) − (log x)_{m,p}(t_k)| ≤ 2Mδ`.

use std::io::Write;

use crate::error::{Error, Result};
use crate::grid::{SampledPath, TimeGrid};
use crate::preprocess::{clip, mollify};
use crate::tracker::{track_step, TrackerParams};

/// Per-step down/up rates solving `log(1 − d₁δ) = −Mδ` and
/// `log(1 + d₂δ) = +Mδ`: `d₁ = (1 − e^{−Mδ})/δ`, `d₂ = (e^{Mδ} − 1)/δ`.
///
/// `1 − d₁δ = e^{−Mδ} ∈ (0, 1)` holds automatically, so factors are always
/// positive. As `Mδ → 0` both rates tend to `M`.
pub fn rates_from_logslope(m_rate: f64, delta: f64) -> Result<(f64, f64)> {
    if !(m_rate.is_finite() && m_rate > 0.0) || !(delta.is_finite() && delta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "rates_from_logslope wants positive rate and interval, got M={m_rate}, δ={delta}"
        )));
    }
    let x = m_rate * delta;
    let d1 = -(-x).exp_m1() / delta;
    let d2 = x.exp_m1() / delta;
    Ok((d1, d2))
}

/// A positive binomial path `y(t_k) = y₀·∏_{i≤k}(1 + ζ_i δ)` with
/// `ζ_i ∈ {−d₁, +d₂}`, plus its additive log form
/// `η(t_k) = log y₀ + Σ_{i≤k} ξ_i δ`, `ξ_i = ±M`.
///
/// `y₀` is the clipped-and-mollified log start mapped back to price scale;
/// it equals `x(t_0)` (to one ulp of `exp∘log`) whenever `|log x(0)| ≤ m`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplicativePath {
    horizon: f64,
    n: usize,
    y0: f64,
    log_rate: f64,
    d1: f64,
    d2: f64,
    directions: Vec<i8>,
}

impl MultiplicativePath {
    pub fn new(
        horizon: f64,
        n: usize,
        y0: f64,
        log_rate: f64,
        directions: Vec<i8>,
    ) -> Result<Self> {
        if !(y0.is_finite() && y0 > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "multiplicative path start must be positive, got {y0}"
            )));
        }
        if directions.len() != n || directions.iter().any(|d| *d != 1 && *d != -1) {
            return Err(Error::InvalidArgument(format!(
                "need {n} directions of ±1, got {}",
                directions.len()
            )));
        }
        let delta = horizon / n as f64;
        let (d1, d2) = rates_from_logslope(log_rate, delta)?;
        Ok(MultiplicativePath {
            horizon,
            n,
            y0,
            log_rate,
            d1,
            d2,
            directions,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn y0(&self) -> f64 {
        self.y0
    }

    /// The log-scale tracking rate `M`.
    pub fn log_rate(&self) -> f64 {
        self.log_rate
    }

    pub fn delta(&self) -> f64 {
        self.horizon / self.n as f64
    }

    pub fn d1(&self) -> f64 {
        self.d1
    }

    pub fn d2(&self) -> f64 {
        self.d2
    }

    /// Whether the constructed `d₁` sits at or above `δ`. The factors stay
    /// positive either way (`1 − d₁δ = e^{−Mδ} > 0`); this only flags that
    /// the nominal `d₁ < δ` range of the class definition is exceeded.
    pub fn d1_exceeds_delta(&self) -> bool {
        self.d1 >= self.delta()
    }

    pub fn directions(&self) -> &[i8] {
        &self.directions
    }

    /// Down factor `1 − d₁δ` and up factor `1 + d₂δ`.
    pub fn factors(&self) -> (f64, f64) {
        let delta = self.delta();
        (1.0 - self.d1 * delta, 1.0 + self.d2 * delta)
    }

    /// `ζ_i` per step: `+d₂` for up, `−d₁` for down.
    pub fn zetas(&self) -> Vec<f64> {
        self.directions
            .iter()
            .map(|&d| if d > 0 { self.d2 } else { -self.d1 })
            .collect()
    }

    /// Price-scale nodes via the product form (each step multiplies by
    /// exactly one of the two factors).
    pub fn nodes(&self) -> Vec<f64> {
        let (down, up) = self.factors();
        let mut out = Vec::with_capacity(self.n + 1);
        let mut y = self.y0;
        out.push(y);
        for &d in &self.directions {
            y *= if d > 0 { up } else { down };
            out.push(y);
        }
        out
    }

    /// Log-scale nodes via the additive form `η(t_k) = η₀ + Σ ξ_i δ`.
    pub fn etas(&self) -> Vec<f64> {
        let step = self.log_rate * self.delta();
        let mut out = Vec::with_capacity(self.n + 1);
        let mut eta = self.y0.ln();
        out.push(eta);
        for &d in &self.directions {
            eta += f64::from(d) * step;
            out.push(eta);
        }
        out
    }

    pub fn coarse_time(&self, k: usize) -> f64 {
        self.horizon * (k as f64 / self.n as f64)
    }

    fn eval_nodes(&self, nodes: &[f64], grid: TimeGrid) -> Result<SampledPath> {
        if grid.horizon() != self.horizon {
            return Err(Error::GridMismatch(format!(
                "grid horizon {} differs from path horizon {}",
                grid.horizon(),
                self.horizon
            )));
        }
        let stride = grid.stride_for(self.n)?;
        let values = (0..=grid.n_fine()).map(|j| nodes[j / stride]).collect();
        SampledPath::new(grid, values)
    }

    /// Right-continuous step evaluation on a refining grid (price scale).
    /// Interpolation is presentation only; the nodes are the contract.
    pub fn eval(&self, grid: TimeGrid) -> Result<SampledPath> {
        self.eval_nodes(&self.nodes(), grid)
    }

    /// Right-continuous step evaluation of `η` (log scale).
    pub fn eval_log(&self, grid: TimeGrid) -> Result<SampledPath> {
        self.eval_nodes(&self.etas(), grid)
    }

    /// CSV rows `k,t_k,y,zeta,eta` (`zeta` is 0 on the first row).
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "k,t_k,y,zeta,eta")?;
        let nodes = self.nodes();
        let etas = self.etas();
        let zetas = self.zetas();
        for k in 0..=self.n {
            let zeta = if k == 0 { 0.0 } else { zetas[k - 1] };
            writeln!(
                w,
                "{},{},{},{},{}",
                k,
                self.coarse_time(k),
                nodes[k],
                zeta,
                etas[k]
            )?;
        }
        Ok(())
    }
}

/// Tracks a strictly positive path multiplicatively: clips and mollifies
/// `log x` with `(m, p)` from `params`, runs the step tracker on the result
/// (rate `M = 2·m·p_eff + K`; use `K = 0` for the plain pipeline), and maps
/// the `±M` log steps to factors `1 − d₁δ` / `1 + d₂δ`.
pub fn track_log(x: &SampledPath, params: &TrackerParams) -> Result<MultiplicativePath> {
    if let Some(v) = x.values().iter().find(|v| **v <= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "track_log wants a strictly positive path, found {v}"
        )));
    }
    let log_path = x.map(|v| v.ln())?;
    let clipped = clip(&log_path, params.m());
    let mo = mollify(&clipped, params.p())?;
    let eff = params.with_p(mo.p_effective)?;
    let bp = track_step(&mo.path, &eff)?;
    MultiplicativePath::new(
        x.grid().horizon(),
        eff.n(),
        bp.y0().exp(),
        eff.rate(),
        bp.directions().to_vec(),
    )
}
