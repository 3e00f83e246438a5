//! Monte Carlo estimation of path norms and pathwise error functionals.
//!
//! The X-norm of a process is `(E ∫₀ᵀ |x(t)|^q dt)^{1/q}` with `q ∈ [1, ∞)`;
//! the X_c-norm adds the terminal term `(E |x(T)|^q)^{1/q}`. Estimates
//! average per-path trapezoidal integrals over an ensemble and propagate a
//! delta-method standard error, which is a diagnostic (acceptance checks use
//! generous confidence intervals). The X_c-norm is meaningful for processes
//! that are L_q-continuous near the horizon; that is a caller obligation and
//! is not checked here.

use crate::error::{Error, Result};
use crate::grid::{common_grid, SampledPath};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    X,
    Xc,
    Sup,
}

/// A Monte Carlo norm estimate with its sample size and standard error.
#[derive(Debug, Clone, Copy)]
pub struct NormEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub q: f64,
    pub kind: NormKind,
}

fn check_q(q: f64) -> Result<()> {
    if !(q.is_finite() && q >= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "norm exponent q must lie in [1, ∞), got {q}"
        )));
    }
    Ok(())
}

/// Trapezoidal `∫₀ᵀ |x(t)|^q dt` for one path.
pub fn path_lq_integral(path: &SampledPath, q: f64) -> f64 {
    let dt = path.grid().dt();
    let vals = path.values();
    let mut sum = 0.5 * (vals[0].abs().powf(q) + vals[vals.len() - 1].abs().powf(q));
    for v in &vals[1..vals.len() - 1] {
        sum += v.abs().powf(q);
    }
    sum * dt
}

/// Streaming accumulator for X / X_c estimates over an ensemble.
///
/// Push per-path statistics in a fixed order to keep results deterministic;
/// means, variances and the cross moment use Welford updates.
#[derive(Debug, Clone)]
pub struct LqAccumulator {
    q: f64,
    count: usize,
    mean_int: f64,
    m2_int: f64,
    mean_term: f64,
    m2_term: f64,
    co_moment: f64,
}

impl LqAccumulator {
    pub fn new(q: f64) -> Result<Self> {
        check_q(q)?;
        Ok(LqAccumulator {
            q,
            count: 0,
            mean_int: 0.0,
            m2_int: 0.0,
            mean_term: 0.0,
            m2_term: 0.0,
            co_moment: 0.0,
        })
    }

    pub fn push_path(&mut self, path: &SampledPath) {
        let integral = path_lq_integral(path, self.q);
        let terminal = path.last().abs().powf(self.q);
        self.push_raw(integral, terminal);
    }

    /// Push a precomputed `(∫|x|^q dt, |x(T)|^q)` pair.
    pub fn push_raw(&mut self, integral: f64, terminal: f64) {
        self.count += 1;
        let n = self.count as f64;
        let d_int = integral - self.mean_int;
        let d_term = terminal - self.mean_term;
        self.mean_int += d_int / n;
        self.mean_term += d_term / n;
        let d_int2 = integral - self.mean_int;
        let d_term2 = terminal - self.mean_term;
        self.m2_int += d_int * d_int2;
        self.m2_term += d_term * d_term2;
        self.co_moment += d_int * d_term2;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    fn variances(&self) -> (f64, f64, f64) {
        if self.count < 2 {
            return (0.0, 0.0, 0.0);
        }
        let denom = (self.count - 1) as f64;
        (
            self.m2_int / denom,
            self.m2_term / denom,
            self.co_moment / denom,
        )
    }

    /// `(E ∫ |x|^q)^{1/q}` with a delta-method standard error.
    pub fn x_norm(&self) -> Result<NormEstimate> {
        if self.count == 0 {
            return Err(Error::InvalidArgument("empty ensemble".into()));
        }
        let a = self.mean_int;
        let value = a.powf(1.0 / self.q);
        let (var_a, _, _) = self.variances();
        let se_a = (var_a / self.count as f64).sqrt();
        let std_error = if a > 0.0 {
            (1.0 / self.q) * a.powf(1.0 / self.q - 1.0) * se_a
        } else {
            0.0
        };
        Ok(NormEstimate {
            value,
            std_error,
            n_paths: self.count,
            q: self.q,
            kind: NormKind::X,
        })
    }

    /// X-norm plus the terminal term, errors combined by the joint delta
    /// method (covariance included).
    pub fn xc_norm(&self) -> Result<NormEstimate> {
        if self.count == 0 {
            return Err(Error::InvalidArgument("empty ensemble".into()));
        }
        let a = self.mean_int;
        let b = self.mean_term;
        let value = a.powf(1.0 / self.q) + b.powf(1.0 / self.q);
        let (var_a, var_b, cov) = self.variances();
        let ga = if a > 0.0 {
            (1.0 / self.q) * a.powf(1.0 / self.q - 1.0)
        } else {
            0.0
        };
        let gb = if b > 0.0 {
            (1.0 / self.q) * b.powf(1.0 / self.q - 1.0)
        } else {
            0.0
        };
        let var = (ga * ga * var_a + gb * gb * var_b + 2.0 * ga * gb * cov) / self.count as f64;
        Ok(NormEstimate {
            value,
            std_error: var.max(0.0).sqrt(),
            n_paths: self.count,
            q: self.q,
            kind: NormKind::Xc,
        })
    }
}

fn accumulate(paths: &[SampledPath], q: f64) -> Result<LqAccumulator> {
    if paths.is_empty() {
        return Err(Error::InvalidArgument("empty ensemble".into()));
    }
    let grid = paths[0].grid();
    let mut acc = LqAccumulator::new(q)?;
    for p in paths {
        if p.grid() != grid {
            return Err(Error::GridMismatch(
                "ensemble paths live on different grids".into(),
            ));
        }
        acc.push_path(p);
    }
    Ok(acc)
}

/// X-norm estimate of an ensemble.
pub fn lq_norm(paths: &[SampledPath], q: f64) -> Result<NormEstimate> {
    accumulate(paths, q)?.x_norm()
}

/// X_c-norm estimate of an ensemble.
pub fn xc_norm(paths: &[SampledPath], q: f64) -> Result<NormEstimate> {
    accumulate(paths, q)?.xc_norm()
}

/// `max_j |a(t_j) − b(t_j)|` over a common grid.
pub fn sup_error(a: &SampledPath, b: &SampledPath) -> Result<f64> {
    common_grid(a, b)?;
    Ok(a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max))
}

/// Pointwise difference `a − b` as a path.
pub fn diff(a: &SampledPath, b: &SampledPath) -> Result<SampledPath> {
    let grid = common_grid(a, b)?;
    SampledPath::new(
        grid,
        a.values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| x - y)
            .collect(),
    )
}
