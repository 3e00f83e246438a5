//! Config-driven experiment harness: parameter sweeps, convergence reports
//! and the three-ε parameter recipe.
//!
//! For every `(m, p, n)` cell the harness generates the same seeded
//! ensemble (path `i` uses `seed + i`), runs the configured pipeline, and
//! reports the Monte Carlo `‖x − y‖_X` estimate, the tracker-leg estimate
//! `‖x_mp − y‖_X`, the worst pathwise sup error, and the theoretical bound
//! for that pipeline. Paths run in parallel but are reduced in index order,
//! so a report is a pure function of its config.

use rayon::prelude::*;
use std::io::Write;

use crate::config::{ExperimentConfig, Pipeline};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::log_tracker::track_log;
use crate::metrics::{self, path_lq_integral, LqAccumulator, NormEstimate};
use crate::ode::{solve_binary_ode, DriftField};
use crate::preprocess::{clip, effective_window, mollify, preprocess, PreprocessParams};
use crate::process::{path_seed, ProcessSpec};
use crate::tracker::{
    eval_binomial, track_affine, track_step, TrackMode, TrackerParams, ROUNDOFF_TOL,
};

/// Per-path statistics produced by one pipeline run.
struct PathOutcome {
    /// `∫ |x − y|^q dt` against the raw path.
    int_raw: f64,
    /// `∫ |target − y|^q dt` against the tracked (mollified) target.
    int_target: f64,
    /// `sup |target − y|` on the fine grid.
    sup: f64,
    /// Whether the slope precondition held, so the bound is guaranteed.
    precond_ok: bool,
}

/// One sweep cell of a [`ConvergenceReport`].
#[derive(Debug, Clone)]
pub struct ReportRow {
    pub m: f64,
    pub p: f64,
    pub n: usize,
    pub paths_ok: usize,
    pub failures: usize,
    pub err_raw: NormEstimate,
    pub err_target: NormEstimate,
    pub max_sup: f64,
    pub bound: f64,
    pub precond_ok: bool,
    pub bound_ok: bool,
}

/// Sweep results plus bookkeeping for CI gating.
#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub pipeline: Pipeline,
    pub q: f64,
    pub rows: Vec<ReportRow>,
    pub failures: usize,
    /// Filled when the ε recipe ran: the auto-selected parameters.
    pub tuned: Option<TuneResult>,
}

impl ConvergenceReport {
    pub fn any_bound_violation(&self) -> bool {
        self.rows.iter().any(|r| r.precond_ok && !r.bound_ok)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "m,p,n,paths_ok,failures,err_x,err_x_se,err_target,err_target_se,max_sup,bound,precond_ok,bound_ok"
        )?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.m,
                r.p,
                r.n,
                r.paths_ok,
                r.failures,
                r.err_raw.value,
                r.err_raw.std_error,
                r.err_target.value,
                r.err_target.std_error,
                r.max_sup,
                r.bound,
                u8::from(r.precond_ok),
                u8::from(r.bound_ok)
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    /// Plot data: one `n` column plus one `‖x − y‖_X` column per `(m, p)`
    /// series, in sweep order.
    pub fn write_plot_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let series = self.series();
        write!(w, "n")?;
        for (label, _) in &series {
            write!(w, ",{label}")?;
        }
        writeln!(w)?;
        let ns: Vec<usize> = {
            let mut v: Vec<usize> = self.rows.iter().map(|r| r.n).collect();
            v.sort_unstable();
            v.dedup();
            v
        };
        for n in ns {
            write!(w, "{n}")?;
            for (_, points) in &series {
                match points.iter().find(|(pn, _)| *pn == n) {
                    Some((_, e)) => write!(w, ",{e}")?,
                    None => write!(w, ",")?,
                }
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// `(label, [(n, err_x)])` per `(m, p)` pair.
    pub fn series(&self) -> Vec<(String, Vec<(usize, f64)>)> {
        let mut out: Vec<(String, Vec<(usize, f64)>)> = Vec::new();
        for r in &self.rows {
            let label = format!("m{}_p{}", r.m, r.p);
            match out.iter_mut().find(|(l, _)| *l == label) {
                Some((_, pts)) => pts.push((r.n, r.err_raw.value)),
                None => out.push((label, vec![(r.n, r.err_raw.value)])),
            }
        }
        out
    }
}

fn tracker_bound_factor(mode: TrackMode) -> f64 {
    match mode {
        TrackMode::Affine => 2.0,
        TrackMode::Step => 4.0,
    }
}

fn run_path(
    cfg: &ExperimentConfig,
    m: f64,
    p: f64,
    n: usize,
    drift: Option<&DriftField>,
    index: u64,
) -> Result<PathOutcome> {
    let grid = cfg.grid;
    let q = cfg.q;
    let x = cfg.process.generate(grid, path_seed(cfg.seed, index))?;

    match cfg.pipeline {
        Pipeline::Thm1Affine | Pipeline::Thm3Step => {
            let mo = preprocess(&x, &PreprocessParams::new(m, p)?)?;
            let params = TrackerParams::new(n, m, mo.p_effective, 0.0)?;
            let mode = if cfg.pipeline == Pipeline::Thm1Affine {
                TrackMode::Affine
            } else {
                TrackMode::Step
            };
            let y = match mode {
                TrackMode::Affine => track_affine(&mo.path, &params)?,
                TrackMode::Step => track_step(&mo.path, &params)?,
            };
            let y_fine = eval_binomial(&y, grid)?;
            Ok(PathOutcome {
                int_raw: path_lq_integral(&metrics::diff(&x, &y_fine)?, q),
                int_target: path_lq_integral(&metrics::diff(&mo.path, &y_fine)?, q),
                sup: metrics::sup_error(&mo.path, &y_fine)?,
                precond_ok: mo.path.max_grid_slope() <= params.rate() + ROUNDOFF_TOL,
            })
        }
        Pipeline::Thm2Ode | Pipeline::Thm4OdeStep => {
            let field = drift.expect("ode pipelines carry a drift field");
            let mo = preprocess(&x, &PreprocessParams::new(m, p)?)?;
            let params = TrackerParams::new(n, m, mo.p_effective, field.bound())?;
            let mode = if cfg.pipeline == Pipeline::Thm2Ode {
                TrackMode::Affine
            } else {
                TrackMode::Step
            };
            let sol = solve_binary_ode(&mo.path, x.value(0), field, &params, mode)?;
            Ok(PathOutcome {
                int_raw: path_lq_integral(&metrics::diff(&x, &sol.u)?, q),
                int_target: path_lq_integral(&metrics::diff(&mo.path, &sol.u)?, q),
                sup: metrics::sup_error(&mo.path, &sol.u)?,
                precond_ok: mo.path.max_grid_slope()
                    <= params.rate() - params.drift_budget() + ROUNDOFF_TOL,
            })
        }
        Pipeline::Thm5Log => {
            // the configured process is the log dynamics; prices are its exp
            let price = x.map(f64::exp)?;
            let params = TrackerParams::new(n, m, p, 0.0)?;
            let y = track_log(&price, &params)?;
            let y_fine = y.eval(grid)?;
            let eta_fine = y.eval_log(grid)?;
            let mo = mollify(&clip(&x, m), p)?;
            Ok(PathOutcome {
                int_raw: path_lq_integral(&metrics::diff(&price, &y_fine)?, q),
                int_target: path_lq_integral(&metrics::diff(&mo.path, &eta_fine)?, q),
                sup: metrics::sup_error(&mo.path, &eta_fine)?,
                precond_ok: mo.path.max_grid_slope() <= 2.0 * m * mo.p_effective + ROUNDOFF_TOL,
            })
        }
        Pipeline::Adaptive => {
            let hp = cfg
                .hoelder
                .as_ref()
                .expect("validated adaptive config carries hoelder settings")
                .materialize(grid)?;
            let tr = crate::adaptive::track_adaptive(&x, &hp, n)?;
            Ok(PathOutcome {
                int_raw: path_lq_integral(&metrics::diff(&x, &tr.path)?, q),
                int_target: path_lq_integral(&metrics::diff(&tr.target, &tr.path)?, q),
                sup: metrics::sup_error(&tr.target, &tr.path)?,
                precond_ok: tr.slope_ok,
            })
        }
    }
}

/// Theoretical bound for one cell, in the quantity `max_sup` measures.
fn cell_bound(cfg: &ExperimentConfig, m: f64, p_eff: f64, n: usize, c_f: f64) -> f64 {
    let horizon = cfg.grid.horizon();
    let delta = horizon / n as f64;
    match cfg.pipeline {
        Pipeline::Thm1Affine => 2.0 * (2.0 * m * p_eff) * delta,
        Pipeline::Thm3Step | Pipeline::Thm5Log => 4.0 * (2.0 * m * p_eff) * delta,
        Pipeline::Thm2Ode | Pipeline::Thm4OdeStep => {
            let m_rate = 2.0 * m * p_eff + c_f;
            let factor = tracker_bound_factor(if cfg.pipeline == Pipeline::Thm2Ode {
                TrackMode::Affine
            } else {
                TrackMode::Step
            });
            factor * m_rate * delta + horizon.max(1.0) * c_f * (c_f + m_rate) * horizon / n as f64
        }
        Pipeline::Adaptive => {
            let hp = cfg.hoelder.as_ref().expect("validated");
            let delta_q = delta.powf(hp.q);
            2.0 * delta_q * hp.sigma.max_value()
        }
    }
}

/// Runs the full `(m, p, n)` sweep of `cfg` and, when `cfg.epsilon` is set,
/// appends the three-ε recipe cell.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ConvergenceReport> {
    let drift = match cfg.pipeline {
        Pipeline::Thm2Ode | Pipeline::Thm4OdeStep => Some(cfg.solver_drift.to_field()?),
        _ => None,
    };

    let mut cells: Vec<(f64, f64, usize)> = Vec::new();
    for &m in &cfg.m_list {
        for &p in &cfg.p_list {
            for &n in &cfg.n_list {
                cells.push((m, p, n));
            }
        }
    }

    let mut tuned = None;
    if let Some(eps) = cfg.epsilon {
        let t = tune_three_epsilon(
            &cfg.process,
            cfg.grid,
            cfg.q,
            eps,
            cfg.paths,
            &cfg.m_list,
            &cfg.p_list,
            cfg.seed,
        )?;
        // align the recipe n to the fine grid: smallest divisor of n_fine
        // at or above the closed-form value
        let n_fine = cfg.grid.n_fine();
        let aligned = (t.n..=n_fine)
            .find(|n| n_fine.is_multiple_of(*n))
            .ok_or_else(|| {
                Error::config(
                    "n_fine",
                    format!(
                        "no divisor of n_fine = {n_fine} reaches the recipe n = {}",
                        t.n
                    ),
                )
            })?;
        cells.push((t.m, t.p, aligned));
        tuned = Some(TuneResult { n: aligned, ..t });
    }

    let mut rows = Vec::with_capacity(cells.len());
    let mut total_failures = 0usize;
    for (m, p, n) in cells {
        let outcomes: Vec<Result<PathOutcome>> = (0..cfg.paths as u64)
            .into_par_iter()
            .map(|i| run_path(cfg, m, p, n, drift.as_ref(), i))
            .collect();

        let mut acc_raw = LqAccumulator::new(cfg.q)?;
        let mut acc_target = LqAccumulator::new(cfg.q)?;
        let mut max_sup = 0.0f64;
        let mut precond_ok = true;
        let mut failures = 0usize;
        for o in &outcomes {
            match o {
                Ok(o) => {
                    acc_raw.push_raw(o.int_raw, 0.0);
                    acc_target.push_raw(o.int_target, 0.0);
                    max_sup = max_sup.max(o.sup);
                    precond_ok &= o.precond_ok;
                }
                Err(Error::NumericOverflow(msg)) => {
                    log::warn!("path failed numerically in cell (m={m}, p={p}, n={n}): {msg}");
                    failures += 1;
                }
                Err(e) => return Err(clone_error(e)),
            }
        }
        total_failures += failures;
        let (err_raw, err_target) = if acc_raw.count() > 0 {
            (acc_raw.x_norm()?, acc_target.x_norm()?)
        } else {
            let nan = NormEstimate {
                value: f64::NAN,
                std_error: f64::NAN,
                n_paths: 0,
                q: cfg.q,
                kind: metrics::NormKind::X,
            };
            (nan, nan)
        };
        let p_eff = effective_window(cfg.grid.dt(), p)
            .map(|(_, _, pe)| pe)
            .unwrap_or(p);
        let c_f = drift.as_ref().map(|f| f.bound()).unwrap_or(0.0);
        let bound = cell_bound(cfg, m, p_eff, n, c_f);
        let bound_ok = acc_raw.count() > 0 && max_sup <= bound + ROUNDOFF_TOL;
        rows.push(ReportRow {
            m,
            p,
            n,
            paths_ok: acc_raw.count(),
            failures,
            err_raw,
            err_target,
            max_sup,
            bound,
            precond_ok: precond_ok && acc_raw.count() > 0,
            bound_ok,
        });
    }

    Ok(ConvergenceReport {
        pipeline: cfg.pipeline,
        q: cfg.q,
        rows,
        failures: total_failures,
        tuned,
    })
}

// Error doesn't implement Clone (io::Error inside); rebuild the variants we
// forward out of parallel sections.
fn clone_error(e: &Error) -> Error {
    match e {
        Error::InvalidArgument(m) => Error::InvalidArgument(m.clone()),
        Error::GridMismatch(m) => Error::GridMismatch(m.clone()),
        Error::NumericOverflow(m) => Error::NumericOverflow(m.clone()),
        Error::PreconditionFailed(m) => Error::PreconditionFailed(m.clone()),
        Error::BudgetExceeded(m) => Error::BudgetExceeded(m.clone()),
        Error::Config { key, message } => Error::Config {
            key: key.clone(),
            message: message.clone(),
        },
        Error::Io(err) => Error::InvalidArgument(format!("io error: {err}")),
    }
}

/// Result of the three-ε recipe.
#[derive(Debug, Clone, Copy)]
pub struct TuneResult {
    pub m: f64,
    pub p: f64,
    pub n: usize,
    /// Tracking rate `M = 2mp` the recipe budgeted for.
    pub rate: f64,
    /// Measured `‖x − x̄_m‖_X` at the chosen `m`.
    pub clip_err: f64,
    /// Measured `‖x̄_m − x_mp‖_X` at the chosen `p`.
    pub moll_err: f64,
}

/// Three-ε parameter selection: the smallest sweep `m` with
/// `‖x − x̄_m‖_X ≤ ε/3`, then the smallest sweep `p` with
/// `‖x̄_m − x_mp‖_X ≤ ε/3`, then the closed-form
/// `n = ⌈6·T^{1+1/q}·M/ε⌉` (rounded up to a multiple of integral `p`) so
/// that `2·T^{1/q}·M·δ ≤ ε/3`.
///
/// Estimates use `ensemble` seeded paths; exhausting a sweep returns
/// [`Error::BudgetExceeded`] carrying the best value reached.
#[allow(clippy::too_many_arguments)]
pub fn tune_three_epsilon(
    process: &ProcessSpec,
    grid: TimeGrid,
    q: f64,
    epsilon: f64,
    ensemble: usize,
    m_sweep: &[f64],
    p_sweep: &[f64],
    seed: u64,
) -> Result<TuneResult> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    if ensemble == 0 || m_sweep.is_empty() || p_sweep.is_empty() {
        return Err(Error::InvalidArgument(
            "tuning needs a nonempty ensemble and nonempty sweeps".into(),
        ));
    }
    let target = epsilon / 3.0;

    // Stage 1: clip level. One generation pass scores every candidate m.
    let per_path: Vec<Vec<f64>> = (0..ensemble as u64)
        .into_par_iter()
        .map(|i| -> Result<Vec<f64>> {
            let x = process.generate(grid, path_seed(seed, i))?;
            m_sweep
                .iter()
                .map(|&m| Ok(path_lq_integral(&metrics::diff(&x, &clip(&x, m))?, q)))
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut chosen_m = None;
    let mut best_clip = f64::INFINITY;
    for (mi, &m) in m_sweep.iter().enumerate() {
        let mut acc = LqAccumulator::new(q)?;
        for row in &per_path {
            acc.push_raw(row[mi], 0.0);
        }
        let est = acc.x_norm()?;
        best_clip = best_clip.min(est.value);
        if est.value <= target {
            chosen_m = Some((m, est.value));
            break;
        }
    }
    let (m, clip_err) = chosen_m.ok_or_else(|| {
        Error::BudgetExceeded(format!(
            "no sweep m reaches ‖x − x̄_m‖ ≤ {target}; best achieved {best_clip}"
        ))
    })?;

    // Stage 2: mollifier window against the clipped path.
    let usable: Vec<f64> = p_sweep
        .iter()
        .copied()
        .filter(|&p| effective_window(grid.dt(), p).is_ok())
        .collect();
    if usable.is_empty() {
        return Err(Error::BudgetExceeded(
            "every sweep p has a window below the fine spacing".into(),
        ));
    }
    let per_path: Vec<Vec<f64>> = (0..ensemble as u64)
        .into_par_iter()
        .map(|i| -> Result<Vec<f64>> {
            let x = process.generate(grid, path_seed(seed, i))?;
            let xb = clip(&x, m);
            usable
                .iter()
                .map(|&p| {
                    let mo = mollify(&xb, p)?;
                    Ok(path_lq_integral(&metrics::diff(&xb, &mo.path)?, q))
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut chosen_p = None;
    let mut best_moll = f64::INFINITY;
    for (pi, &p) in usable.iter().enumerate() {
        let mut acc = LqAccumulator::new(q)?;
        for row in &per_path {
            acc.push_raw(row[pi], 0.0);
        }
        let est = acc.x_norm()?;
        best_moll = best_moll.min(est.value);
        if est.value <= target {
            chosen_p = Some((p, est.value));
            break;
        }
    }
    let (p, moll_err) = chosen_p.ok_or_else(|| {
        Error::BudgetExceeded(format!(
            "no sweep p reaches ‖x̄_m − x_mp‖ ≤ {target}; best achieved {best_moll}"
        ))
    })?;

    // Stage 3: closed-form n with 2·T^{1/q}·M·δ ≤ ε/3.
    let horizon = grid.horizon();
    let rate = 2.0 * m * p;
    let mut n = (6.0 * horizon.powf(1.0 + 1.0 / q) * rate / epsilon).ceil() as usize;
    n = n.max(1);
    // keep the validation window exact: round up to a multiple of integral p
    let p_int = p.round();
    if (p - p_int).abs() < 1e-9 && p_int >= 1.0 {
        let p_int = p_int as usize;
        n = n.div_ceil(p_int) * p_int;
    }
    Ok(TuneResult {
        m,
        p,
        n,
        rate,
        clip_err,
        moll_err,
    })
}
