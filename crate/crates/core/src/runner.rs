//! Experiment runs driven by an [`ExperimentConfig`]: each subcommand writes
//! `<subcommand>-<seed>.csv` files and a `<subcommand>-manifest.txt` into the
//! output directory.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use crate::asclt::{asclt_run, maxima_run, rate_diagnostic, rate_normalizer, RateVerdict};
use crate::config::{parse_config, ConfigError, ExperimentConfig, Sigma2Choice};
use crate::entropy::{ow_run, smb_run, EntropyParams};
use crate::erdos_renyi::{
    decoupling_check, er_law_check_capped, ld_probability_mc, rate_estimator, trajectory_values, LdLevel, LdMethod,
};
use crate::error::Error;
use crate::maps::{make_map, PiecewiseMap};
use crate::observable::Observable;
use crate::transfer::{
    center_observable, green_kubo_sigma2, invariant_density, legendre, pressure_curve, symmetric_grid, PressureCurve,
    Sigma2Method,
};

pub const THREADS_ENV: &str = "ERGOSTAT_THREADS";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Subcommand {
    Density,
    Pressure,
    Sigma2,
    Asclt,
    Maxima,
    ErdosRenyi,
    RateCurve,
    LdCheck,
    EntropySmb,
    EntropyOw,
}

impl Subcommand {
    pub const ALL: [Subcommand; 10] = [
        Subcommand::Density,
        Subcommand::Pressure,
        Subcommand::Sigma2,
        Subcommand::Asclt,
        Subcommand::Maxima,
        Subcommand::ErdosRenyi,
        Subcommand::RateCurve,
        Subcommand::LdCheck,
        Subcommand::EntropySmb,
        Subcommand::EntropyOw,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Density => "density",
            Subcommand::Pressure => "pressure",
            Subcommand::Sigma2 => "sigma2",
            Subcommand::Asclt => "asclt",
            Subcommand::Maxima => "maxima",
            Subcommand::ErdosRenyi => "erdos-renyi",
            Subcommand::RateCurve => "rate-curve",
            Subcommand::LdCheck => "ld-check",
            Subcommand::EntropySmb => "entropy-smb",
            Subcommand::EntropyOw => "entropy-ow",
        }
    }

    /// Whether the subcommand produces one output per configured seed.
    pub fn per_seed(self) -> bool {
        !matches!(self, Subcommand::Density | Subcommand::Pressure | Subcommand::Sigma2)
    }
}

impl fmt::Display for Subcommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Subcommand {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Subcommand::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown subcommand `{s}`"))
    }
}

#[derive(Debug)]
pub enum RunError {
    Config(Vec<ConfigError>),
    Numeric(Error),
    Io(std::io::Error),
}

impl RunError {
    /// 2 for configuration problems, 4 for exceeded budgets, 3 for numerical
    /// failures, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Numeric(e) => match e {
                Error::BudgetExceeded { .. } | Error::Censored(_) => 4,
                Error::InvalidMap(_) | Error::InvalidArgument(_) | Error::NotDyadic | Error::AlphaOutOfRange { .. } => 2,
                _ => 3,
            },
            RunError::Io(_) => 1,
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(errs) => {
                for (i, e) in errs.iter().enumerate() {
                    if i > 0 {
                        writeln!(f)?;
                    }
                    write!(f, "config error: {e}")?;
                }
                Ok(())
            }
            RunError::Numeric(e) => write!(f, "{e}"),
            RunError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        RunError::Numeric(e)
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

impl From<csv::Error> for RunError {
    fn from(e: csv::Error) -> Self {
        RunError::Io(e.into())
    }
}

/// Files written by a run and headline values also recorded in the manifest.
#[derive(Clone, Debug)]
pub struct RunReport {
    pub subcommand: Subcommand,
    pub outputs: Vec<PathBuf>,
    pub manifest: PathBuf,
    pub summary: Vec<(String, String)>,
}

/// Formats a float with 17 significant digits; non-finite values become an
/// empty field.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        String::new()
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or(String::new(), fmt_f64)
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), RunError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Worker count: `ERGOSTAT_THREADS`, then the config, then rayon's default.
pub fn thread_count(config: &ExperimentConfig) -> Result<Option<usize>, RunError> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(RunError::Config(vec![ConfigError {
                line: 0,
                message: format!("{THREADS_ENV} must be a positive integer, got `{v}`"),
            }])),
        },
        Err(_) => Ok(config.threads),
    }
}

/// Reads, parses and runs a config file.
pub fn run_file(sub: Subcommand, path: &Path, seed_offset: u64) -> Result<RunReport, RunError> {
    let text = fs::read_to_string(path).map_err(|e| {
        RunError::Config(vec![ConfigError {
            line: 0,
            message: format!("cannot read {}: {e}", path.display()),
        }])
    })?;
    let config = parse_config(&text).map_err(RunError::Config)?.with_seed_offset(seed_offset);
    run(sub, &config)
}

/// Runs `sub` on a worker pool sized by [`thread_count`].
pub fn run(sub: Subcommand, config: &ExperimentConfig) -> Result<RunReport, RunError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_count(config)? {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| RunError::Io(std::io::Error::other(e.to_string())))?;
    pool.install(|| run_in_pool(sub, config))
}

struct Ctx<'a> {
    config: &'a ExperimentConfig,
    map: PiecewiseMap,
    u: Observable,
    dir: PathBuf,
    outputs: Vec<PathBuf>,
    summary: Vec<(String, String)>,
}

impl Ctx<'_> {
    fn path(&self, sub: Subcommand, seed: u64, suffix: &str) -> PathBuf {
        self.dir.join(format!("{}-{seed}{suffix}.csv", sub.name()))
    }

    fn emit(&mut self, path: PathBuf, header: &[&str], rows: &[Vec<String>]) -> Result<(), RunError> {
        write_csv(&path, header, rows)?;
        self.outputs.push(path);
        Ok(())
    }

    fn note(&mut self, key: impl Into<String>, value: impl ToString) {
        self.summary.push((key.into(), value.to_string()));
    }

    fn curve(&self) -> Result<PressureCurve, RunError> {
        let t = &self.config.transfer;
        Ok(pressure_curve(&self.map, &self.u, &symmetric_grid(t.beta_max, t.beta_step), t.resolution)?)
    }

    fn level(&mut self, alpha: f64) -> Result<LdLevel, RunError> {
        let curve = self.curve()?;
        for w in curve.warnings() {
            self.note("warning", w);
        }
        let rate = legendre(&curve, &[alpha])?;
        let level = LdLevel::from_rate(&rate, alpha)?;
        self.note("alpha", fmt_f64(level.alpha));
        self.note("phi", fmt_f64(level.phi));
        self.note("beta", fmt_f64(level.beta));
        Ok(level)
    }

    fn sigma2(&self, seed: u64) -> Result<f64, RunError> {
        let t = &self.config.transfer;
        let method = match t.sigma2_method {
            Sigma2Choice::Quadrature => Sigma2Method::Quadrature { resolution: t.resolution },
            Sigma2Choice::Orbit => Sigma2Method::Orbit {
                length: t.orbit_length,
                max_lag: t.max_lag,
                seed,
            },
        };
        Ok(green_kubo_sigma2(&self.map, &self.u, method)?.value)
    }
}

fn run_in_pool(sub: Subcommand, config: &ExperimentConfig) -> Result<RunReport, RunError> {
    let start = Instant::now();
    let map = make_map(&config.map)?;
    let raw = config.observable.build(&map)?;
    let u = if config.center {
        center_observable(&map, &raw, config.transfer.resolution)?
    } else {
        raw
    };
    let dir = PathBuf::from(&config.output_dir);
    fs::create_dir_all(&dir)?;
    let mut ctx = Ctx {
        config,
        map,
        u,
        dir,
        outputs: Vec::new(),
        summary: Vec::new(),
    };
    match sub {
        Subcommand::Density => density(&mut ctx)?,
        Subcommand::Pressure => pressure(&mut ctx)?,
        Subcommand::Sigma2 => sigma2(&mut ctx)?,
        Subcommand::Asclt | Subcommand::Maxima => asclt_like(&mut ctx, sub)?,
        Subcommand::ErdosRenyi => erdos_renyi(&mut ctx)?,
        Subcommand::RateCurve => rate_curve(&mut ctx)?,
        Subcommand::LdCheck => ld_check(&mut ctx)?,
        Subcommand::EntropySmb | Subcommand::EntropyOw => entropy(&mut ctx, sub)?,
    }
    let manifest = ctx.dir.join(format!("{}-manifest.txt", sub.name()));
    let mut text = String::new();
    text.push_str(&format!("subcommand = {}\n", sub.name()));
    text.push_str(&format!("config_hash = {}\n", config.hash()));
    text.push_str(&format!("ergostat_version = {}\n", env!("CARGO_PKG_VERSION")));
    text.push_str(&format!("csv_format = 1\n"));
    text.push_str(&format!("map = {}\n", config.map.name()));
    text.push_str(&format!("observable = {}\n", ctx.u.name()));
    text.push_str(&format!("seeds = {}\n", seeds_text(&config.seeds)));
    text.push_str(&format!("threads = {}\n", rayon::current_num_threads()));
    for (k, v) in &ctx.summary {
        text.push_str(&format!("{k} = {v}\n"));
    }
    for p in &ctx.outputs {
        text.push_str(&format!("output = {}\n", p.file_name().unwrap_or_default().to_string_lossy()));
    }
    text.push_str(&format!("wall_time_s = {:.3}\n", start.elapsed().as_secs_f64()));
    fs::write(&manifest, text)?;
    Ok(RunReport {
        subcommand: sub,
        outputs: ctx.outputs,
        manifest,
        summary: ctx.summary,
    })
}

fn seeds_text(seeds: &[u64]) -> String {
    seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(", ")
}

fn density(ctx: &mut Ctx) -> Result<(), RunError> {
    let h = invariant_density(&ctx.map, ctx.config.transfer.resolution)?;
    let w = h.cell_width();
    let rows: Vec<Vec<String>> = h
        .values()
        .iter()
        .enumerate()
        .map(|(i, &v)| vec![i.to_string(), fmt_f64(i as f64 * w), fmt_f64(v)])
        .collect();
    ctx.note("total_mass", fmt_f64(h.total_mass()));
    ctx.note("sup_deviation_from_one", fmt_f64(h.sup_deviation_from(1.0)));
    let path = ctx.path(Subcommand::Density, ctx.config.seeds[0], "");
    ctx.emit(path, &["cell", "x_left", "h"], &rows)
}

fn pressure(ctx: &mut Ctx) -> Result<(), RunError> {
    let curve = ctx.curve()?;
    for w in curve.warnings() {
        ctx.note("warning", w);
    }
    let rows: Vec<Vec<String>> = curve
        .beta_grid()
        .iter()
        .zip(curve.f_values())
        .map(|(&b, &f)| vec![fmt_f64(b), fmt_f64(f)])
        .collect();
    let seed = ctx.config.seeds[0];
    ctx.emit(ctx.path(Subcommand::Pressure, seed, ""), &["beta", "F"], &rows)?;

    let (lo, hi) = curve.derivative_range();
    let alphas = if !ctx.config.transfer.alpha_grid.is_empty() {
        ctx.config.transfer.alpha_grid.clone()
    } else if hi - lo > 1e-12 {
        let (mid, half) = (0.5 * (lo + hi), 0.45 * (hi - lo));
        (0..21).map(|i| mid - half + half * i as f64 / 10.0).collect()
    } else {
        vec![0.5 * (lo + hi)]
    };
    let rate = legendre(&curve, &alphas)?;
    let rows: Vec<Vec<String>> = (0..alphas.len())
        .map(|i| {
            vec![
                fmt_f64(rate.alpha_grid[i]),
                fmt_f64(rate.phi_values[i]),
                fmt_f64(rate.beta_of_alpha[i]),
                fmt_f64(rate.sigma2_of_alpha[i]),
            ]
        })
        .collect();
    ctx.emit(
        ctx.path(Subcommand::Pressure, seed, "-legendre"),
        &["alpha", "phi", "beta", "sigma2"],
        &rows,
    )?;
    ctx.note("beta_max_kept", fmt_f64(*curve.beta_grid().last().unwrap()));
    ctx.note("second_derivative_at_0", fmt_f64(curve.second_derivative(0.0)?));
    ctx.note("derivative_range", format!("{}, {}", fmt_f64(lo), fmt_f64(hi)));
    Ok(())
}

fn sigma2(ctx: &mut Ctx) -> Result<(), RunError> {
    let t = &ctx.config.transfer;
    let seed = ctx.config.seeds[0];
    let method = match t.sigma2_method {
        Sigma2Choice::Quadrature => Sigma2Method::Quadrature { resolution: t.resolution },
        Sigma2Choice::Orbit => Sigma2Method::Orbit {
            length: t.orbit_length,
            max_lag: t.max_lag,
            seed,
        },
    };
    let est = green_kubo_sigma2(&ctx.map, &ctx.u, method)?;
    let mut partial = 0.0;
    let rows: Vec<Vec<String>> = est
        .correlations
        .iter()
        .enumerate()
        .map(|(j, &c)| {
            partial += if j == 0 { c } else { 2.0 * c };
            vec![j.to_string(), fmt_f64(c), fmt_f64(partial)]
        })
        .collect();
    ctx.note("sigma2", fmt_f64(est.value));
    ctx.note("degenerate", est.degenerate);
    ctx.note("terms", est.correlations.len());
    ctx.emit(
        ctx.path(Subcommand::Sigma2, seed, ""),
        &["lag", "correlation", "partial_sigma2"],
        &rows,
    )
}

fn asclt_like(ctx: &mut Ctx, sub: Subcommand) -> Result<(), RunError> {
    let c = ctx.config;
    let sigma2 = match c.asclt_sigma2 {
        Some(s) => s,
        None => ctx.sigma2(c.seeds[0])?,
    };
    ctx.note("sigma2", fmt_f64(sigma2));
    for &seed in &c.seeds {
        let diag = if sub == Subcommand::Asclt {
            asclt_run(&ctx.map, &ctx.u, sigma2, c.horizon, seed, &c.checkpoints)?
        } else {
            maxima_run(&ctx.map, &ctx.u, sigma2, c.horizon, seed, &c.checkpoints)?
        };
        let rows: Vec<Vec<String>> = diag
            .checkpoints
            .iter()
            .zip(&diag.kappa_values)
            .zip(&diag.normalized_rates)
            .map(|((n, k), r)| vec![seed.to_string(), n.to_string(), fmt_f64(*k), fmt_f64(*r)])
            .collect();
        if let Ok(report) = rate_diagnostic(&diag) {
            let v = match report.verdict {
                RateVerdict::Bounded => "bounded",
                RateVerdict::Unbounded => "unbounded",
            };
            ctx.note(format!("rate_verdict[{seed}]"), v);
        }
        ctx.emit(ctx.path(sub, seed, ""), &["seed", "n", "kappa", "normalized_rate"], &rows)?;
    }
    Ok(())
}

fn erdos_renyi(ctx: &mut Ctx) -> Result<(), RunError> {
    let e = &ctx.config.erdos_renyi;
    let level = ctx.level(e.alpha)?;
    for &seed in &ctx.config.seeds {
        let s = er_law_check_capped(&ctx.map, &ctx.u, level, &e.k_grid, seed, e.cap)?;
        let inside = s.inside_band(e.band_eps);
        let w = (1.0 + e.band_eps) * s.band.abs();
        let rows: Vec<Vec<String>> = (0..s.k_values.len())
            .map(|i| {
                vec![
                    s.k_values[i].to_string(),
                    s.window_counts[i].to_string(),
                    fmt_f64(s.m_values[i]),
                    fmt_f64(s.averages[i]),
                    fmt_f64(s.fluctuations[i]),
                    fmt_f64(-w),
                    fmt_f64(w),
                    u8::from(inside[i]).to_string(),
                ]
            })
            .collect();
        ctx.emit(
            ctx.path(Subcommand::ErdosRenyi, seed, ""),
            &["k", "windows", "M_k", "average", "fluctuation", "band_lo", "band_hi", "inside_band"],
            &rows,
        )?;
    }
    Ok(())
}

fn rate_curve(ctx: &mut Ctx) -> Result<(), RunError> {
    let e = &ctx.config.erdos_renyi;
    let curve = ctx.curve()?;
    let (lo, hi) = curve.derivative_range();
    for &seed in &ctx.config.seeds {
        let values = trajectory_values(&ctx.map, &ctx.u, e.rate_length, seed)?;
        let est = rate_estimator(&values, &e.rate_k_grid)?;
        let inside: Vec<f64> = est.points.iter().map(|p| p.0).filter(|a| *a >= lo && *a <= hi).collect();
        let rate = if inside.is_empty() {
            None
        } else {
            Some(legendre(&curve, &inside)?)
        };
        let rows: Vec<Vec<String>> = est
            .k_values
            .iter()
            .zip(&est.points)
            .map(|(k, &(m, r))| {
                let phi = rate.as_ref().and_then(|rf| rf.phi_at(m));
                vec![k.to_string(), fmt_f64(m), fmt_f64(r), fmt_opt(phi)]
            })
            .collect();
        ctx.note(format!("level_slope[{seed}]"), fmt_f64(est.level_slope()));
        ctx.emit(
            ctx.path(Subcommand::RateCurve, seed, ""),
            &["k", "m_k", "log_n_over_k", "phi_ulam"],
            &rows,
        )?;
    }
    Ok(())
}

fn ld_check(ctx: &mut Ctx) -> Result<(), RunError> {
    let l = &ctx.config.ld;
    let level = ctx.level(l.alpha)?;
    for &seed in &ctx.config.seeds {
        let mut rows = Vec::new();
        for &k in &l.k_grid {
            let est = ld_probability_mc(&ctx.map, &ctx.u, level, k, l.trials, seed, l.method)?;
            let method = match est.method {
                LdMethod::Direct => "direct",
                LdMethod::Tilted => "tilted",
                LdMethod::Auto => "auto",
            };
            rows.push(vec![
                k.to_string(),
                method.to_string(),
                est.trials.to_string(),
                fmt_f64(est.p_hat),
                fmt_f64(est.ci_lo),
                fmt_f64(est.ci_hi),
                fmt_f64(est.normalized_ratio),
                u8::from(est.one_sided).to_string(),
            ]);
        }
        ctx.emit(
            ctx.path(Subcommand::LdCheck, seed, ""),
            &["k", "method", "trials", "p_hat", "ci_lo", "ci_hi", "normalized_ratio", "one_sided"],
            &rows,
        )?;
        if let Some(k) = l.decoupling_k {
            let table = decoupling_check(&ctx.map, &ctx.u, level, k, &l.r_grid, l.trials, seed)?;
            let rows: Vec<Vec<String>> = table
                .iter()
                .map(|r| {
                    vec![
                        r.r.to_string(),
                        fmt_f64(r.p_hat),
                        fmt_f64(r.ci_lo),
                        fmt_f64(r.ci_hi),
                        fmt_f64(r.log_p),
                    ]
                })
                .collect();
            ctx.emit(
                ctx.path(Subcommand::LdCheck, seed, "-decoupling"),
                &["r", "p_hat", "ci_lo", "ci_hi", "log_p"],
                &rows,
            )?;
        }
    }
    Ok(())
}

fn entropy(ctx: &mut Ctx, sub: Subcommand) -> Result<(), RunError> {
    let e = &ctx.config.entropy;
    let params = EntropyParams {
        resolution: ctx.config.transfer.resolution,
        cap: e.cap,
        eps: e.eps,
        sigma2: e.sigma2,
    };
    let mut stats = None;
    for &seed in &ctx.config.seeds {
        let d = if sub == Subcommand::EntropySmb {
            smb_run(&ctx.map, e.horizon, seed, &e.checkpoints, &params)?
        } else {
            ow_run(&ctx.map, e.horizon, seed, &e.checkpoints, &params)?
        };
        let h = d.h_rokhlin;
        let rows: Vec<Vec<String>> = (1..=e.horizon)
            .map(|k| {
                let root = (k as f64).sqrt();
                let mlm = d.trace.minus_log_mu[k - 1];
                let lr = d.trace.log_return[k - 1];
                vec![
                    k.to_string(),
                    fmt_f64(mlm),
                    fmt_opt(lr),
                    fmt_f64((mlm - k as f64 * h) / root),
                    fmt_opt(lr.map(|v| (v - k as f64 * h) / root)),
                    d.sandwich[k - 1].map_or(String::new(), |b| u8::from(b).to_string()),
                ]
            })
            .collect();
        ctx.emit(
            ctx.path(sub, seed, ""),
            &["k", "minus_log_mu", "log_rk", "smb_atom", "ow_atom", "sandwich_ok"],
            &rows,
        )?;
        let rows: Vec<Vec<String>> = d
            .checkpoints
            .iter()
            .zip(&d.kappa_values)
            .map(|(&n, &k)| vec![seed.to_string(), n.to_string(), fmt_f64(k), fmt_f64(k * rate_normalizer(n))])
            .collect();
        ctx.emit(ctx.path(sub, seed, "-kappa"), &["seed", "n", "kappa", "normalized_rate"], &rows)?;
        if d.censored > 0 {
            ctx.note(format!("censored[{seed}]"), d.censored);
        }
        stats = Some((h, d.sigma_used));
    }
    if let Some((h, sigma)) = stats {
        ctx.note("h_rokhlin", fmt_f64(h));
        ctx.note("sigma", fmt_f64(sigma));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subcommand_names_round_trip() {
        for s in Subcommand::ALL {
            assert_eq!(s.name().parse::<Subcommand>().unwrap(), s);
        }
        assert!("bogus".parse::<Subcommand>().is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(RunError::Config(vec![]).exit_code(), 2);
        assert_eq!(RunError::Numeric(Error::DegenerateVariance(0.0)).exit_code(), 3);
        assert_eq!(RunError::Numeric(Error::BudgetExceeded { required: 2, cap: 1 }).exit_code(), 4);
    }

    #[test]
    fn float_format_has_17_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(f64::NAN), "");
    }
}
