//! Hoelder-certificate checking and tracking with dynamically adjusted
//! increment sizes.
//!
//! For paths satisfying the predictable Hoelder condition
//! `|x(t) − x(t−ε)| / ε^q ≤ σ(t−θ)` for all `ε ∈ (0, ε₀]`, the tracker may
//! scale its slope per interval as `δ^{q−1}·σ(t_k)` instead of using one
//! global rate, which lets the increments replicate changes in the target's
//! local modulus. The certificate is checked exhaustively on the fine grid;
//! it is deliberately strict and fails for rough paths (a Wiener path fails
//! at `q = 1` with overwhelming probability on any reasonably fine grid).

use std::io::Write;

use crate::error::{Error, Result};
use crate::grid::{common_grid, SampledPath};
use crate::preprocess::mollify;
use crate::tracker::ROUNDOFF_TOL;

/// Hoelder-class parameters: exponent `q ∈ (0, 1]`, prediction horizon
/// `θ > 0`, max increment scale `ε₀ > 0`, uniform bound `C ≥ sup σ`, and
/// the modulus path `σ` itself.
#[derive(Debug, Clone)]
pub struct HoelderParams {
    q: f64,
    theta: f64,
    eps0: f64,
    c_bound: f64,
    sigma: SampledPath,
}

impl HoelderParams {
    pub fn new(q: f64, theta: f64, eps0: f64, c_bound: f64, sigma: SampledPath) -> Result<Self> {
        if !(q > 0.0 && q <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "Hoelder exponent q must lie in (0, 1], got {q}"
            )));
        }
        if !(theta.is_finite() && theta > 0.0) || !(eps0.is_finite() && eps0 > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "theta and eps0 must be positive, got {theta}, {eps0}"
            )));
        }
        if !(c_bound.is_finite() && c_bound >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "modulus bound C must be nonnegative, got {c_bound}"
            )));
        }
        if let Some(v) = sigma.values().iter().find(|v| **v < 0.0 || **v > c_bound) {
            return Err(Error::InvalidArgument(format!(
                "modulus value {v} outside [0, C = {c_bound}]"
            )));
        }
        Ok(HoelderParams {
            q,
            theta,
            eps0,
            c_bound,
            sigma,
        })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn eps0(&self) -> f64 {
        self.eps0
    }

    pub fn c_bound(&self) -> f64 {
        self.c_bound
    }

    pub fn sigma(&self) -> &SampledPath {
        &self.sigma
    }
}

/// One per-time row of the certificate report: the worst ratio found at
/// `t` over all probed `ε`.
#[derive(Debug, Clone, Copy)]
pub struct CertificateRow {
    pub t: f64,
    pub eps: f64,
    pub ratio: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Exhaustive grid check of the Hoelder condition.
#[derive(Debug, Clone)]
pub struct HoelderCertificate {
    pub holds: bool,
    pub worst_ratio: f64,
    pub worst_bound: f64,
    /// `(t, ε)` of the worst margin `ratio − bound`.
    pub worst_location: (f64, f64),
    /// θ and ε₀ rounded to whole fine steps.
    pub theta_steps: usize,
    pub eps0_steps: usize,
    rows: Vec<CertificateRow>,
}

impl HoelderCertificate {
    pub fn rows(&self) -> &[CertificateRow] {
        &self.rows
    }

    /// CSV rows `t,eps,ratio,bound,pass` (worst probe per grid time).
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,eps,ratio,bound,pass")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{}",
                r.t,
                r.eps,
                r.ratio,
                r.bound,
                if r.pass { 1 } else { 0 }
            )?;
        }
        Ok(())
    }
}

fn round_to_steps(value: f64, dt: f64, name: &str) -> Result<usize> {
    let steps = (value / dt * (1.0 + 1e-12) + 1e-12).floor() as usize;
    if steps == 0 {
        return Err(Error::InvalidArgument(format!(
            "{name} = {value} is below the fine spacing {dt}"
        )));
    }
    Ok(steps)
}

/// Probes `|x(t) − x(t−ε)| / ε^q ≤ σ(t−θ)` for every fine-grid time `t`
/// and every `ε` that is a whole number of fine steps in `(0, ε₀]`, with
/// the pre-zero convention `x(s) = x(0)`, `σ(s) = σ(0)` for `s < 0`.
pub fn check_hoelder(x: &SampledPath, hp: &HoelderParams) -> Result<HoelderCertificate> {
    let grid = common_grid(x, hp.sigma())?;
    let dt = grid.dt();
    let theta_steps = round_to_steps(hp.theta(), dt, "theta")?;
    let eps0_steps = round_to_steps(hp.eps0(), dt, "eps0")?;

    let vals = x.values();
    let sig = hp.sigma().values();
    let n = grid.n_fine();
    let q = hp.q();

    let mut rows = Vec::with_capacity(n + 1);
    let mut holds = true;
    let mut worst_margin = f64::NEG_INFINITY;
    let mut worst = (0.0, dt, 0.0, 0.0);
    for j in 0..=n {
        let bound = sig[j.saturating_sub(theta_steps)];
        let mut row_ratio = 0.0f64;
        let mut row_eps = dt;
        for i in 1..=eps0_steps {
            let prev = vals[j.saturating_sub(i)];
            let eps = i as f64 * dt;
            let ratio = (vals[j] - prev).abs() / eps.powf(q);
            if ratio > row_ratio {
                row_ratio = ratio;
                row_eps = eps;
            }
        }
        let pass = row_ratio <= bound;
        holds &= pass;
        let margin = row_ratio - bound;
        if margin > worst_margin {
            worst_margin = margin;
            worst = (grid.t(j), row_eps, row_ratio, bound);
        }
        rows.push(CertificateRow {
            t: grid.t(j),
            eps: row_eps,
            ratio: row_ratio,
            bound,
            pass,
        });
    }

    Ok(HoelderCertificate {
        holds,
        worst_ratio: worst.2,
        worst_bound: worst.3,
        worst_location: (worst.0, worst.1),
        theta_steps,
        eps0_steps,
        rows,
    })
}

/// Output of [`track_adaptive`].
#[derive(Debug, Clone)]
pub struct AdaptiveTrack {
    /// The piecewise affine tracker path on the fine grid.
    pub path: SampledPath,
    /// The mollified target the tracker followed (window = δ, no clipping).
    pub target: SampledPath,
    /// Per-interval slope magnitudes `δ^{q−1}·σ(t_k)`.
    pub slopes: Vec<f64>,
    pub directions: Vec<i8>,
    /// Guaranteed sup bound `2·δ^q·max_k σ(t_k)`.
    pub bound: f64,
    /// Whether the mollified target stayed within every interval's slope
    /// budget (the bound is only guaranteed when it did).
    pub slope_ok: bool,
    pub certificate: HoelderCertificate,
}

/// Adaptive tracker for certified Hoelder paths: mollifies `x` directly
/// (window = δ, no clipping) and tracks it with per-interval slope
/// `δ^{q−1}·σ(t_k)`, up when `y(t_k) ≤ target(t_k)`.
///
/// Requires δ = T/n ≤ min(ε₀, θ) and a passing certificate.
pub fn track_adaptive(x: &SampledPath, hp: &HoelderParams, n: usize) -> Result<AdaptiveTrack> {
    let grid = x.grid();
    let stride = grid.stride_for(n)?;
    let delta = grid.horizon() / n as f64;
    if delta > hp.eps0().min(hp.theta()) {
        return Err(Error::InvalidArgument(format!(
            "δ = {delta} exceeds min(ε₀, θ) = {}",
            hp.eps0().min(hp.theta())
        )));
    }
    let certificate = check_hoelder(x, hp)?;
    if !certificate.holds {
        return Err(Error::PreconditionFailed(format!(
            "Hoelder certificate fails: ratio {} > bound {} at (t, ε) = {:?}",
            certificate.worst_ratio, certificate.worst_bound, certificate.worst_location
        )));
    }

    // Window = δ keeps the mollified slope within each interval's budget.
    let mo = mollify(x, 1.0 / delta)?;
    let target = mo.path;
    let tvals = target.values();
    let sig = hp.sigma().values();
    let dt = grid.dt();
    let q = hp.q();
    let scale = delta.powf(q - 1.0);

    let n_fine = grid.n_fine();
    let mut out = vec![0.0; n_fine + 1];
    let mut slopes = Vec::with_capacity(n);
    let mut directions = Vec::with_capacity(n);
    let mut slope_ok = true;
    let mut y = tvals[0];
    out[0] = y;
    for k in 0..n {
        let base = k * stride;
        let slope = scale * sig[base];
        slopes.push(slope);
        let d: i8 = if y <= tvals[base] { 1 } else { -1 };
        directions.push(d);
        let sgn = f64::from(d);

        // eager per-interval slope check (warning, not an error)
        let mut target_slope = 0.0f64;
        for off in 0..stride {
            let j = base + off;
            target_slope = target_slope.max((tvals[j + 1] - tvals[j]).abs() / dt);
            out[j + 1] = if off + 1 == stride {
                y + sgn * slope * delta
            } else {
                y + sgn * slope * ((off + 1) as f64 * dt)
            };
        }
        if target_slope > slope + ROUNDOFF_TOL {
            slope_ok = false;
            log::warn!(
                "interval {k}: target slope {target_slope:.6} exceeds δ^(q-1)σ(t_k) = {slope:.6}; \
                 the adaptive bound is not guaranteed here"
            );
        }
        y += sgn * slope * delta;
    }

    let max_sigma = (0..n).map(|k| sig[k * stride]).fold(0.0, f64::max);
    let bound = 2.0 * delta.powf(q) * max_sigma;
    Ok(AdaptiveTrack {
        path: SampledPath::new(grid, out)?,
        target,
        slopes,
        directions,
        bound,
        slope_ok,
        certificate,
    })
}
