//! Uniform time grids and sampled paths.
//!
//! Every module in this crate exchanges paths as [`SampledPath`] values: one
//! realization of a process sampled on a fine uniform grid over `[0, T]`.
//! Coarse tracker grids are always sub-grids of the fine grid (the fine count
//! must be an integer multiple of the coarse count), so tracker sampling
//! points land exactly on stored samples.

use crate::error::{Error, Result};

/// Uniform grid `t_j = j·T/n_fine`, `j = 0..=n_fine`, over the horizon `T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    n_fine: usize,
}

impl TimeGrid {
    /// Builds a grid with `n_fine` intervals of spacing `T/n_fine`.
    pub fn new(horizon: f64, n_fine: usize) -> Result<Self> {
        if !horizon.is_finite() || horizon <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "grid horizon must be positive and finite, got {horizon}"
            )));
        }
        if n_fine == 0 {
            return Err(Error::InvalidArgument(
                "grid must have at least one interval".into(),
            ));
        }
        Ok(TimeGrid { horizon, n_fine })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_fine(&self) -> usize {
        self.n_fine
    }

    /// Grid spacing `T/n_fine`.
    pub fn dt(&self) -> f64 {
        self.horizon / self.n_fine as f64
    }

    /// `t_j`, computed as `T·(j/n_fine)` so that `t(0) == 0` and
    /// `t(n_fine) == T` exactly.
    pub fn t(&self, j: usize) -> f64 {
        self.horizon * (j as f64 / self.n_fine as f64)
    }

    /// All grid times in order.
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n_fine).map(move |j| self.t(j))
    }

    /// Errors unless `n_coarse` divides `n_fine`; returns the stride.
    pub fn stride_for(&self, n_coarse: usize) -> Result<usize> {
        if n_coarse == 0 || !self.n_fine.is_multiple_of(n_coarse) {
            return Err(Error::GridMismatch(format!(
                "coarse count {n_coarse} does not divide fine count {}",
                self.n_fine
            )));
        }
        Ok(self.n_fine / n_coarse)
    }
}

/// One realization `x(t_j)` on a [`TimeGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPath {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl SampledPath {
    /// Wraps `values` after checking length (`n_fine + 1`) and finiteness.
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_fine() + 1 {
            return Err(Error::GridMismatch(format!(
                "path has {} samples, grid wants {}",
                values.len(),
                grid.n_fine() + 1
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NumericOverflow(format!(
                "path contains non-finite sample {v}"
            )));
        }
        Ok(SampledPath { grid, values })
    }

    /// Samples `f` at every grid time.
    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.times().map(&f).collect();
        SampledPath::new(grid, values)
    }

    pub fn constant(grid: TimeGrid, level: f64) -> Result<Self> {
        SampledPath::new(grid, vec![level; grid.n_fine() + 1])
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, j: usize) -> f64 {
        self.values[j]
    }

    pub fn first(&self) -> f64 {
        self.values[0]
    }

    pub fn last(&self) -> f64 {
        *self.values.last().unwrap()
    }

    /// Applies `f` sample-wise; the result must stay finite.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        SampledPath::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Largest `|Δvalue| / Δt` over adjacent fine samples.
    pub fn max_grid_slope(&self) -> f64 {
        let dt = self.grid.dt();
        self.values
            .windows(2)
            .map(|w| (w[1] - w[0]).abs() / dt)
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }
}

/// Checks two paths share one grid; returns it.
pub fn common_grid(a: &SampledPath, b: &SampledPath) -> Result<TimeGrid> {
    if a.grid() != b.grid() {
        return Err(Error::GridMismatch(format!(
            "paths live on different grids ({:?} vs {:?})",
            a.grid(),
            b.grid()
        )));
    }
    Ok(a.grid())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_times_are_exact_at_the_ends() {
        let g = TimeGrid::new(1.0, 4).unwrap();
        let times: Vec<f64> = g.times().collect();
        assert_eq!(times, vec![0.0, 0.25, 0.5, 0.75, 1.0]);

        let g = TimeGrid::new(2.0, 1).unwrap();
        assert_eq!(g.times().collect::<Vec<_>>(), vec![0.0, 2.0]);

        // t(n_fine) must equal the horizon bit-exactly even when T/n is inexact
        let g = TimeGrid::new(0.7, 3).unwrap();
        assert_eq!(g.t(3), 0.7);
        assert_eq!(g.t(0), 0.0);
    }

    #[test]
    fn grid_rejects_bad_arguments() {
        assert!(TimeGrid::new(1.0, 0).is_err());
        assert!(TimeGrid::new(0.0, 4).is_err());
        assert!(TimeGrid::new(-1.0, 4).is_err());
        assert!(TimeGrid::new(f64::INFINITY, 4).is_err());
    }

    #[test]
    fn stride_requires_divisibility() {
        let g = TimeGrid::new(1.0, 12).unwrap();
        assert_eq!(g.stride_for(4).unwrap(), 3);
        assert!(g.stride_for(5).is_err());
        assert!(g.stride_for(0).is_err());
    }

    #[test]
    fn path_checks_length_and_finiteness() {
        let g = TimeGrid::new(1.0, 2).unwrap();
        assert!(SampledPath::new(g, vec![0.0, 1.0]).is_err());
        assert!(SampledPath::new(g, vec![0.0, f64::NAN, 1.0]).is_err());
        let p = SampledPath::new(g, vec![0.0, 1.0, 2.0]).unwrap();
        assert_eq!(p.value(2), 2.0);
        assert_eq!(p.max_grid_slope(), 2.0);
    }
}
