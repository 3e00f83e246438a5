//! Experiment harness for causal binomial path approximation.
//!
//! Every subcommand reads one flat TOML config (see `FORMATS.md` for the
//! key reference and CSV schemas) and writes its outputs under `--out`.
//!
//! Exit codes: 0 success, 1 usage/config error, 2 numeric failure,
//! 3 bound violation detected (for CI gating).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use binapprox::config::{process_from_raw, ExperimentConfig, MarketConfig, RawConfig};
use binapprox::crr::{price_european, risk_neutral_prob, tree_from_tracker, CrrTree};
use binapprox::error::{Error, Result};
use binapprox::experiment::{run_experiment, tune_three_epsilon};
use binapprox::log_tracker::{rates_from_logslope, track_log};
use binapprox::metrics::sup_error;
use binapprox::ode::solve_binary_ode;
use binapprox::plot::write_svg;
use binapprox::preprocess::{clip, mollify};
use binapprox::tracker::{eval_binomial, track_affine, track_step, TrackMode, TrackerParams};

#[derive(Parser)]
#[command(
    name = "binapprox",
    about = "Causal binomial approximation of stochastic processes",
    after_help = "CSV columns (full schemas and config keys in FORMATS.md):\n  \
        paths.csv        t,path0,path1,...\n  \
        tracker.csv      k,t_k,y,direction\n  \
        target.csv       t,x,x_clip,x_moll\n  \
        solution.csv     t,x,x_moll,r,y,u\n  \
        logtrack.csv     k,t_k,y,zeta,eta\n  \
        certificate.csv  t,eps,ratio,bound,pass\n  \
        adaptive.csv     t,x,x_moll,y\n  \
        tree.csv         level,i,s_discounted\n  \
        price.csv        s0,strike,vol,rate,periods,T,payoff,rho,d1,d2,p_star,price,parity_gap\n  \
        price_demo.csv   k,t_k,s_discounted,y,node_index\n  \
        report.csv       m,p,n,paths_ok,failures,err_x,err_x_se,err_target,err_target_se,\
max_sup,bound,precond_ok,bound_ok\n  \
        plot.csv         n plus one error column per (m,p) series\n  \
        tune.csv         epsilon,q,m,p,n,rate,clip_err,moll_err\n\n\
        Exit codes: 0 ok, 1 usage/config error, 2 numeric failure, 3 bound violation."
)]
struct Cli {
    /// Flat TOML config file (unknown keys are errors)
    #[arg(long)]
    config: PathBuf,

    /// Output directory for CSV/SVG artifacts
    #[arg(long, default_value = "out")]
    out: PathBuf,

    /// Override the config's seed
    #[arg(long)]
    seed: Option<u64>,

    /// Override the config's ensemble size
    #[arg(long)]
    paths: Option<u64>,

    /// Suppress progress output (errors still print)
    #[arg(long)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample an ensemble of paths and write them as columns
    Simulate,
    /// Run one path through clip -> mollify -> binomial tracker
    Track,
    /// Approximate one path by an ODE with binary noise
    Ode,
    /// Track a positive path multiplicatively (constant log-rate)
    LogTrack,
    /// Hoelder certificate plus increment-adaptive tracking of one path
    Adaptive,
    /// Build a CRR tree and price a European claim
    Price,
    /// Full (m, p, n) convergence sweep with report and plot data
    Converge,
    /// Three-epsilon parameter recipe for a target accuracy
    Tune,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(if cli.quiet {
            log::LevelFilter::Off
        } else {
            log::LevelFilter::Warn
        })
        .init();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::NumericOverflow(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn say(cli: &Cli, message: String) {
    if !cli.quiet {
        println!("{message}");
    }
}

fn load_raw(cli: &Cli) -> Result<RawConfig> {
    let text = fs::read_to_string(&cli.config)?;
    let mut raw = RawConfig::parse(&text)?;
    if let Some(seed) = cli.seed {
        raw.seed = Some(seed);
    }
    if let Some(paths) = cli.paths {
        raw.paths = Some(paths);
    }
    Ok(raw)
}

fn out_file(dir: &Path, name: &str) -> Result<fs::File> {
    fs::create_dir_all(dir)?;
    Ok(fs::File::create(dir.join(name))?)
}

fn run(cli: &Cli) -> Result<u8> {
    let raw = load_raw(cli)?;
    match cli.command {
        Command::Simulate => simulate(cli, &raw),
        Command::Track => track(cli, &raw),
        Command::Ode => ode(cli, &raw),
        Command::LogTrack => log_track(cli, &raw),
        Command::Adaptive => adaptive(cli, &raw),
        Command::Price => price(cli, &raw),
        Command::Converge => converge(cli, &raw),
        Command::Tune => tune(cli, &raw),
    }
}

/// First sweep entries double as single-run parameters.
fn first_mpn(raw: &RawConfig) -> Result<(f64, f64, usize)> {
    let m = raw
        .m_list
        .as_ref()
        .and_then(|v| v.first().copied())
        .ok_or_else(|| Error::config("m_list", "need at least one m"))?;
    let p = raw
        .p_list
        .as_ref()
        .and_then(|v| v.first().copied())
        .ok_or_else(|| Error::config("p_list", "need at least one p"))?;
    let n = raw
        .n_list
        .as_ref()
        .and_then(|v| v.first().copied())
        .ok_or_else(|| Error::config("n_list", "need at least one n"))? as usize;
    Ok((m, p, n))
}

fn simulate(cli: &Cli, raw: &RawConfig) -> Result<u8> {
    use std::io::Write;
    let (spec, grid, seed) = process_from_raw(raw)?;
    let count = raw.paths.unwrap_or(1);
    let paths: Vec<_> = (0..count)
        .map(|i| spec.generate(grid, binapprox::process::path_seed(seed, i)))
        .collect::<Result<_>>()?;
    let mut f = out_file(&cli.out, "paths.csv")?;
    write!(f, "t")?;
    for i in 0..count {
        write!(f, ",path{i}")?;
    }
    writeln!(f)?;
    for (j, t) in grid.times().enumerate() {
        write!(f, "{t}")?;
        for p in &paths {
            write!(f, ",{}", p.value(j))?;
        }
        writeln!(f)?;
    }
    say(
        cli,
        format!(
            "wrote {count} paths to {}",
            cli.out.join("paths.csv").display()
        ),
    );
    Ok(0)
}

fn write_target_csv(
    dir: &Path,
    x: &binapprox::SampledPath,
    xc: &binapprox::SampledPath,
    xm: &binapprox::SampledPath,
) -> Result<()> {
    use std::io::Write;
    let mut f = out_file(dir, "target.csv")?;
    writeln!(f, "t,x,x_clip,x_moll")?;
    for (j, t) in x.grid().times().enumerate() {
        writeln!(f, "{t},{},{},{}", x.value(j), xc.value(j), xm.value(j))?;
    }
    Ok(())
}

fn track(cli: &Cli, raw: &RawConfig) -> Result<u8> {
    let (spec, grid, seed) = process_from_raw(raw)?;
    let (m, p, n) = first_mpn(raw)?;
    let step_mode = matches!(raw.pipeline.as_deref(), Some("thm3_step"));
    let x = spec.generate(grid, seed)?;
    let xc = clip(&x, m);
    let mo = mollify(&xc, p)?;
    let params = TrackerParams::new(n, m, mo.p_effective, 0.0)?;
    let y = if step_mode {
        track_step(&mo.path, &params)?
    } else {
        track_affine(&mo.path, &params)?
    };
    y.write_csv(out_file(&cli.out, "tracker.csv")?)?;
    write_target_csv(&cli.out, &x, &xc, &mo.path)?;

    let fine = eval_binomial(&y, grid)?;
    let sup = sup_error(&fine, &mo.path)?;
    let factor = if step_mode { 4.0 } else { 2.0 };
    let bound = factor * params.rate() * params.delta(grid.horizon());
    let precond_ok = mo.path.max_grid_slope() <= params.rate() + 1e-9;
    say(
        cli,
        format!(
            "sup|y - x_mp| = {sup:.6e}, bound {}Mδ = {bound:.6e}, slope precondition {}",
            factor as u32,
            if precond_ok {
                "ok"
            } else {
                "VIOLATED (bound not guaranteed)"
            }
        ),
    );
    if precond_ok && sup > bound + 1e-9 {
        eprintln!("bound violation: {sup} > {bound}");
        return Ok(3);
    }
    Ok(0)
}

fn ode(cli: &Cli, raw: &RawConfig) -> Result<u8> {
    let (spec, grid, seed) = process_from_raw(raw)?;
    let (m, p, n) = first_mpn(raw)?;
    let step_mode = matches!(raw.pipeline.as_deref(), Some("thm4_ode_step"));
    let drift = match spec.drift_field()? {
        Some(f) => f,
        None => match raw.drift.as_deref() {
            Some(text) => binapprox::process::DriftSpec::parse(text)?.to_field()?,
            None => binapprox::ode::DriftField::zero(),
        },
    };
    let x = spec.generate(grid, seed)?;
    let xc = clip(&x, m);
    let mo = mollify(&xc, p)?;
    let params = TrackerParams::new(n, m, mo.p_effective, drift.bound())?;
    let mode = if step_mode {
        TrackMode::Step
    } else {
        TrackMode::Affine
    };
    let sol = solve_binary_ode(&mo.path, x.value(0), &drift, &params, mode)?;
    sol.write_csv(out_file(&cli.out, "solution.csv")?, &x, &mo.path)?;

    let sup = sup_error(&mo.path, &sol.u)?;
    let bound = sol.composite_bound(drift.bound());
    let precond_ok = mo.path.max_grid_slope() <= params.rate() - params.drift_budget() + 1e-9;
    say(
        cli,
        format!(
            "sup|x_mp - u| = {sup:.6e}, composite bound = {bound:.6e}, slope precondition {}",
            if precond_ok {
                "ok"
            } else {
                "VIOLATED (bound not guaranteed)"
            }
        ),
    );
    if precond_ok && sup > bound + 1e-9 {
        eprintln!("bound violation: {sup} > {bound}");
        return Ok(3);
    }
    Ok(0)
}

fn log_track(cli: &Cli, raw: &RawConfig) -> Result<u8> {
    let (spec, grid, seed) = process_from_raw(raw)?;
    let (m, p, n) = first_mpn(raw)?;
    // the configured process is the log dynamics; prices are its exp
    let log_path = spec.generate(grid, seed)?;
    let x = log_path.map(f64::exp)?;
    let params = TrackerParams::new(n, m, p, 0.0)?;
    let y = track_log(&x, &params)?;
    y.write_csv(out_file(&cli.out, "logtrack.csv")?)?;

    let mo = mollify(&clip(&log_path, m), p)?;
    let stride = grid.n_fine() / n;
    let etas = y.etas();
    let mut worst = 0.0f64;
    for (k, &eta) in etas.iter().enumerate() {
        worst = worst.max((eta - mo.path.value(k * stride)).abs());
    }
    let bound = 2.0 * y.log_rate() * y.delta();
    say(
        cli,
        format!(
            "coarse log gap = {worst:.6e}, bound 2Mδ = {bound:.6e}, d1 = {:.6}, d2 = {:.6}{}",
            y.d1(),
            y.d2(),
            if y.d1_exceeds_delta() {
                " (d1 ≥ δ)"
            } else {
                ""
            }
        ),
    );
    if worst > bound + 1e-9 {
        eprintln!("bound violation: {worst} > {bound}");
        return Ok(3);
    }
    Ok(0)
}

fn adaptive(cli: &Cli, raw: &RawConfig) -> Result<u8> {
    use std::io::Write;
    let (spec, grid, seed) = process_from_raw(raw)?;
    // adaptive runs have no (m, p); only n matters
    let n = raw
        .n_list
        .as_ref()
        .and_then(|v| v.first().copied())
        .ok_or_else(|| Error::config("n_list", "need at least one n"))? as usize;
    let settings = binapprox::config::HoelderSettings {
        q: raw
            .hoelder_q
            .ok_or_else(|| Error::config("hoelder_q", "missing required key"))?,
        theta: raw
            .theta
            .ok_or_else(|| Error::config("theta", "missing required key"))?,
        eps0: raw
            .eps0
            .ok_or_else(|| Error::config("eps0", "missing required key"))?,
        sigma: binapprox::config::SigmaSpec::parse(
            raw.sigma
                .as_deref()
                .ok_or_else(|| Error::config("sigma", "missing required key"))?,
        )?,
    };
    let hp = settings.materialize(grid)?;
    let x = spec.generate(grid, seed)?;
    let tr = binapprox::adaptive::track_adaptive(&x, &hp, n)?;
    tr.certificate
        .write_csv(out_file(&cli.out, "certificate.csv")?)?;
    let mut f = out_file(&cli.out, "adaptive.csv")?;
    writeln!(f, "t,x,x_moll,y")?;
    for (j, t) in grid.times().enumerate() {
        writeln!(
            f,
            "{t},{},{},{}",
            x.value(j),
            tr.target.value(j),
            tr.path.value(j)
        )?;
    }
    let sup = sup_error(&tr.path, &tr.target)?;
    say(
        cli,
        format!(
            "certificate holds; sup|y - x_moll| = {sup:.6e}, bound 2δ^q·maxσ = {:.6e}",
            tr.bound
        ),
    );
    if tr.slope_ok && sup > tr.bound + 1e-9 {
        eprintln!("bound violation: {sup} > {}", tr.bound);
        return Ok(3);
    }
    Ok(0)
}

fn price(cli: &Cli, raw: &RawConfig) -> Result<u8> {
    use std::io::Write;
    let market = MarketConfig::from_raw(raw)?;
    let delta = market.horizon / market.periods as f64;
    // per-period log move vol·sqrt(δ)
    let m_rate = market.vol / delta.sqrt();
    let (d1, d2) = rates_from_logslope(m_rate, delta)?;
    let rho = market.rho();
    let tree = CrrTree::new(market.s0, d1 * delta, d2 * delta, rho, market.periods)?;
    let payoff = |s: f64| {
        if market.call {
            (s - market.strike).max(0.0)
        } else {
            (market.strike - s).max(0.0)
        }
    };
    let value = price_european(&tree, payoff)?;
    let call = price_european(&tree, |s| (s - market.strike).max(0.0))?;
    let put = price_european(&tree, |s| (market.strike - s).max(0.0))?;
    let parity_gap = (call - put) - (market.s0 - market.strike / rho.powi(market.periods as i32));
    let p_star = risk_neutral_prob(tree.down(), tree.up())?;

    tree.write_csv(out_file(&cli.out, "tree.csv")?)?;
    let mut f = out_file(&cli.out, "price.csv")?;
    writeln!(
        f,
        "s0,strike,vol,rate,periods,T,payoff,rho,d1,d2,p_star,price,parity_gap"
    )?;
    writeln!(
        f,
        "{},{},{},{},{},{},{},{},{},{},{},{},{}",
        market.s0,
        market.strike,
        market.vol,
        market.rate,
        market.periods,
        market.horizon,
        if market.call { "call" } else { "put" },
        rho,
        tree.down(),
        tree.up(),
        p_star,
        value,
        parity_gap
    )?;
    say(
        cli,
        format!(
            "{} price = {value:.6} (p* = {p_star:.6}, parity gap {parity_gap:.2e})",
            if market.call { "call" } else { "put" }
        ),
    );

    // with a process configured, also embed a tracker path into its
    // complete-market tree and price the same claim there
    if raw.kind.is_some() {
        let (spec, grid, seed) = process_from_raw(raw)?;
        let (m, p, n) = first_mpn(raw)?;
        let log_path = spec.generate(grid, seed)?;
        let x = log_path.map(f64::exp)?;
        let y = track_log(&x, &TrackerParams::new(n, m, p, 0.0)?)?;
        let (ytree, realized) = tree_from_tracker(&y, (market.rate * y.delta()).exp())?;
        let demo_price = price_european(&ytree, payoff)?;
        let nodes = y.nodes();
        let stride = grid.n_fine() / n;
        let mut f = out_file(&cli.out, "price_demo.csv")?;
        writeln!(f, "k,t_k,s_discounted,y,node_index")?;
        let mut sup_gap = 0.0f64;
        for (k, &node) in nodes.iter().enumerate() {
            let observed = x.value(k * stride);
            sup_gap = sup_gap.max((observed - node).abs());
            writeln!(
                f,
                "{k},{},{observed},{node},{}",
                y.coarse_time(k),
                realized[k]
            )?;
        }
        say(
            cli,
            format!(
                "tracker demo: sup|S̃(t_k) - y(t_k)| = {sup_gap:.6e}, complete-market price = {demo_price:.6}"
            ),
        );
    }
    Ok(0)
}

fn converge(cli: &Cli, raw: &RawConfig) -> Result<u8> {
    let cfg = ExperimentConfig::from_raw(raw)?;
    let report = run_experiment(&cfg)?;
    report.write_csv(out_file(&cli.out, "report.csv")?)?;
    report.write_plot_csv(out_file(&cli.out, "plot.csv")?)?;
    if cfg.svg {
        write_svg(
            out_file(&cli.out, "plot.svg")?,
            &format!("{} convergence (q = {})", cfg.pipeline.name(), cfg.q),
            &report.series(),
        )?;
    }
    if let Some(t) = report.tuned {
        say(
            cli,
            format!(
                "ε recipe: m = {}, p = {}, n = {} (clip {:.4}, moll {:.4})",
                t.m, t.p, t.n, t.clip_err, t.moll_err
            ),
        );
    }
    say(
        cli,
        format!(
            "wrote {} rows to {} ({} path failures)",
            report.rows.len(),
            cli.out.join("report.csv").display(),
            report.failures
        ),
    );
    if report.failures > 0 {
        eprintln!("{} paths failed numerically", report.failures);
        return Ok(2);
    }
    if report.any_bound_violation() {
        eprintln!("bound violation detected (see report.csv)");
        return Ok(3);
    }
    Ok(0)
}

fn tune(cli: &Cli, raw: &RawConfig) -> Result<u8> {
    use std::io::Write;
    let cfg = ExperimentConfig::from_raw(raw)?;
    let epsilon = cfg
        .epsilon
        .ok_or_else(|| Error::config("epsilon", "the tune command needs a target epsilon"))?;
    let t = tune_three_epsilon(
        &cfg.process,
        cfg.grid,
        cfg.q,
        epsilon,
        cfg.paths,
        &cfg.m_list,
        &cfg.p_list,
        cfg.seed,
    )?;
    let mut f = out_file(&cli.out, "tune.csv")?;
    writeln!(f, "epsilon,q,m,p,n,rate,clip_err,moll_err")?;
    writeln!(
        f,
        "{},{},{},{},{},{},{},{}",
        epsilon, cfg.q, t.m, t.p, t.n, t.rate, t.clip_err, t.moll_err
    )?;
    say(
        cli,
        format!(
            "ε = {epsilon}: m = {}, p = {}, n = {} (M = {}, clip {:.4} ≤ ε/3, moll {:.4} ≤ ε/3)",
            t.m, t.p, t.n, t.rate, t.clip_err, t.moll_err
        ),
    );
    Ok(0)
}
