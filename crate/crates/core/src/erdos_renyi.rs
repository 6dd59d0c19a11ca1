//! Maxima of moving sums `M_k = max_j S_k∘f^j` over `⌊e^{kφ(α)}⌋ - k + 1`
//! windows, the fluctuation band `(M_k - kα)/log k ≤ 1/(2β)`, the inverse
//! rate estimator `φ(m(k)) ≈ log N / k`, and Monte Carlo estimates of
//! `P(S_k > kα)` and of the joint tail of two shifted windows.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::maps::PiecewiseMap;
use crate::observable::Observable;
use crate::orbit::{rng_for, trajectory_seed, Orbit, OrbitMode};
use crate::transfer::RateFunction;

/// Longest trajectory `er_law_check` will stream.
pub const LENGTH_CAP: u64 = 1 << 32;
/// Direct Monte Carlo refuses levels with `kφ(α)` above this.
pub const DIRECT_MC_GUARD: f64 = 12.0;
pub const MIN_TRIALS: usize = 10_000;
pub const DEFAULT_BAND_EPS: f64 = 0.5;
const Z95: f64 = 1.959_963_984_540_054;
const RESUM_EVERY: usize = 4096;

/// Streaming maximum of sums over windows of fixed length `k`. The first
/// window attaining the maximum wins.
#[derive(Clone, Debug)]
pub struct MovingMax {
    k: usize,
    buf: Vec<f64>,
    seen: usize,
    sum: f64,
    best: f64,
    best_start: usize,
}

impl MovingMax {
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("window length must be positive".into()));
        }
        Ok(MovingMax {
            k,
            buf: vec![0.0; k],
            seen: 0,
            sum: 0.0,
            best: f64::NEG_INFINITY,
            best_start: 0,
        })
    }

    pub fn push(&mut self, v: f64) {
        let slot = self.seen % self.k;
        if self.seen >= self.k {
            self.sum -= self.buf[slot];
        }
        self.buf[slot] = v;
        self.sum += v;
        self.seen += 1;
        if self.seen % RESUM_EVERY == 0 {
            // bound rounding drift of the running sum
            self.sum = self.buf.iter().sum();
        }
        if self.seen >= self.k && self.sum > self.best {
            self.best = self.sum;
            self.best_start = self.seen - self.k;
        }
    }

    pub fn windows(&self) -> usize {
        (self.seen + 1).saturating_sub(self.k)
    }

    /// `(M, j)`, or `None` before the first full window.
    pub fn result(&self) -> Option<(f64, usize)> {
        (self.seen >= self.k).then_some((self.best, self.best_start))
    }
}

/// Largest window sum of length `k` and the first start index attaining it.
pub fn moving_max(values: &[f64], k: usize) -> Result<(f64, usize)> {
    if values.len() < k || k == 0 {
        return Err(Error::InvalidArgument(format!(
            "need at least k = {k} values, got {}",
            values.len()
        )));
    }
    let mut m = MovingMax::new(k)?;
    values.iter().for_each(|&v| m.push(v));
    Ok(m.result().expect("at least one window"))
}

/// Level `α` together with `φ(α)` and `β = φ'(α)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LdLevel {
    pub alpha: f64,
    pub phi: f64,
    pub beta: f64,
}

impl LdLevel {
    /// Reads `φ(α)` and the maximizer `β(α)` from a tabulated rate function.
    pub fn from_rate(rate: &RateFunction, alpha: f64) -> Result<Self> {
        let lo = rate.alpha_grid.first().copied().unwrap_or(f64::NAN);
        let hi = rate.alpha_grid.last().copied().unwrap_or(f64::NAN);
        match (rate.phi_at(alpha), rate.beta_at(alpha)) {
            (Some(phi), Some(beta)) => Ok(LdLevel { alpha, phi, beta }),
            _ => Err(Error::AlphaOutOfRange { alpha, lo, hi }),
        }
    }

    /// `⌊e^{kφ(α)}⌋`: the samples spanned by the windows `j = 0..=⌊e^{kφ}⌋ - k`.
    pub fn required_length(&self, k: usize) -> f64 {
        (k as f64 * self.phi).exp().floor()
    }
}

/// `M_k` per window length with the `(M_k - kα)/log k` fluctuations.
#[derive(Clone, Debug, PartialEq)]
pub struct ErdosRenyiSeries {
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
    pub k_values: Vec<usize>,
    pub window_counts: Vec<u64>,
    pub m_values: Vec<f64>,
    /// `M_k / k`.
    pub averages: Vec<f64>,
    /// `(M_k - kα) / log k`.
    pub fluctuations: Vec<f64>,
    /// `1/(2β)`.
    pub band: f64,
}

impl ErdosRenyiSeries {
    /// Whether each fluctuation lies in `±(1 + eps)/(2β)`.
    pub fn inside_band(&self, eps: f64) -> Vec<bool> {
        let w = (1.0 + eps) * self.band.abs();
        self.fluctuations.iter().map(|f| f.abs() <= w).collect()
    }
}

/// Streams one orbit long enough for the largest `k` and computes `M_k` for
/// every `k` over its own prefix of `⌊e^{kφ(α)}⌋` samples.
pub fn er_law_check(
    map: &PiecewiseMap,
    u: &Observable,
    level: LdLevel,
    k_grid: &[usize],
    seed: u64,
) -> Result<ErdosRenyiSeries> {
    er_law_check_capped(map, u, level, k_grid, seed, LENGTH_CAP)
}

/// `er_law_check` with a custom orbit-length budget (at most `LENGTH_CAP`).
pub fn er_law_check_capped(
    map: &PiecewiseMap,
    u: &Observable,
    level: LdLevel,
    k_grid: &[usize],
    seed: u64,
    cap: u64,
) -> Result<ErdosRenyiSeries> {
    let cap = cap.min(LENGTH_CAP);
    if level.alpha == 0.0 {
        return Err(Error::InvalidArgument("alpha must be nonzero".into()));
    }
    if k_grid.iter().any(|&k| k < 2) {
        return Err(Error::InvalidArgument("window lengths must be at least 2".into()));
    }
    let mut lengths = Vec::with_capacity(k_grid.len());
    for &k in k_grid {
        let need = level.required_length(k);
        if !(need <= cap as f64) {
            return Err(Error::BudgetExceeded {
                required: if need.is_finite() { need as u128 } else { u128::MAX },
                cap: cap as u128,
            });
        }
        if (need as usize) < k {
            return Err(Error::Infeasible(format!(
                "e^(k phi) = {need} leaves no window of length {k}"
            )));
        }
        lengths.push(need as usize);
    }
    let total = *lengths.iter().max().expect("nonempty k grid");
    let mut trackers: Vec<MovingMax> = k_grid.iter().map(|&k| MovingMax::new(k)).collect::<Result<_>>()?;
    let orbit = Orbit::new(map, seed, total, OrbitMode::default_for(map))?;
    for (i, v) in orbit.values(u).enumerate() {
        for (t, &len) in trackers.iter_mut().zip(&lengths) {
            if i < len {
                t.push(v);
            }
        }
    }
    let m_values: Vec<f64> = trackers.iter().map(|t| t.result().expect("full window").0).collect();
    Ok(ErdosRenyiSeries {
        alpha: level.alpha,
        beta: level.beta,
        seed,
        window_counts: trackers.iter().map(|t| t.windows() as u64).collect(),
        averages: m_values.iter().zip(k_grid).map(|(m, &k)| m / k as f64).collect(),
        fluctuations: m_values
            .iter()
            .zip(k_grid)
            .map(|(m, &k)| (m - k as f64 * level.alpha) / (k as f64).ln())
            .collect(),
        k_values: k_grid.to_vec(),
        m_values,
        band: 1.0 / (2.0 * level.beta),
    })
}

/// `er_law_check` over seeds `base, base + 1, ...` in parallel.
pub fn er_law_seeds(
    map: &PiecewiseMap,
    u: &Observable,
    level: LdLevel,
    k_grid: &[usize],
    base_seed: u64,
    seeds: usize,
) -> Result<Vec<ErdosRenyiSeries>> {
    (0..seeds)
        .into_par_iter()
        .map(|i| er_law_check(map, u, level, k_grid, trajectory_seed(base_seed, i)))
        .collect()
}

/// Points `(m(k), log N / k)` of the inverse rate estimator.
#[derive(Clone, Debug, PartialEq)]
pub struct RateCurveEstimate {
    pub n: usize,
    pub k_values: Vec<usize>,
    pub points: Vec<(f64, f64)>,
}

impl RateCurveEstimate {
    /// Least-squares slope of `m(k)` against `k`.
    pub fn level_slope(&self) -> f64 {
        let n = self.k_values.len() as f64;
        let xs: Vec<f64> = self.k_values.iter().map(|&k| k as f64).collect();
        let mx = xs.iter().sum::<f64>() / n;
        let my = self.points.iter().map(|p| p.0).sum::<f64>() / n;
        let sxy: f64 = xs.iter().zip(&self.points).map(|(x, p)| (x - mx) * (p.0 - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        sxy / sxx
    }
}

/// For each `k`, `m(k) = M_k / k` over the whole trajectory and the rate
/// estimate `log N / k`.
pub fn rate_estimator(values: &[f64], k_grid: &[usize]) -> Result<RateCurveEstimate> {
    let n = values.len();
    let kmax = k_grid.iter().copied().max().unwrap_or(0);
    if k_grid.is_empty() || k_grid.contains(&0) || n < 10 * kmax {
        return Err(Error::InvalidArgument(format!(
            "need a positive k grid and N >= 10 max k, got N = {n}, max k = {kmax}"
        )));
    }
    let points = k_grid
        .par_iter()
        .map(|&k| {
            let (m, _) = moving_max(values, k)?;
            Ok((m / k as f64, (n as f64).ln() / k as f64))
        })
        .collect::<Result<_>>()?;
    Ok(RateCurveEstimate {
        n,
        k_values: k_grid.to_vec(),
        points,
    })
}

/// Materializes `u(f^i x)` for `i < n` along the orbit of `seed`.
pub fn trajectory_values(map: &PiecewiseMap, u: &Observable, n: usize, seed: u64) -> Result<Vec<f64>> {
    Ok(Orbit::new(map, seed, n, OrbitMode::default_for(map))?.values(u).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LdMethod {
    /// Counting over independent Lebesgue starts; guarded by `kφ ≤ 12`.
    Direct,
    /// Exponentially tilted symbol sampling with likelihood-ratio weights.
    /// Needs i.i.d. symbols (full affine branches) and branch-constant `u`.
    Tilted,
    /// Direct when the guard allows it, tilted otherwise.
    Auto,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LdEstimate {
    pub k: usize,
    pub alpha: f64,
    pub p_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// `P̂ β √k e^{kφ(α)}`.
    pub normalized_ratio: f64,
    pub method: LdMethod,
    pub trials: usize,
    /// Zero successes under direct sampling: only `ci_hi` is informative.
    pub one_sided: bool,
}

/// Wilson score interval at 95%.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if successes == trials { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

fn check_trials(trials: usize) -> Result<()> {
    if trials < MIN_TRIALS {
        return Err(Error::InvalidArgument(format!("need at least {MIN_TRIALS} trials, got {trials}")));
    }
    Ok(())
}

fn direct_guard(level: &LdLevel, k: usize) -> Result<()> {
    let kphi = k as f64 * level.phi;
    if kphi > DIRECT_MC_GUARD {
        return Err(Error::Infeasible(format!(
            "k phi(alpha) = {kphi:.3} exceeds the direct Monte Carlo guard {DIRECT_MC_GUARD}"
        )));
    }
    Ok(())
}

/// Counts trials (in parallel, deterministic per-trial seeds) for which
/// `hit` holds on the first `len` values of the orbit.
fn count_hits(
    map: &PiecewiseMap,
    u: &Observable,
    len: usize,
    trials: usize,
    seed: u64,
    hit: impl Fn(&[f64]) -> bool + Sync,
) -> Result<u64> {
    let mode = OrbitMode::default_for(map);
    (0..trials)
        .into_par_iter()
        .map_init(
            || Vec::with_capacity(len),
            |buf, t| -> Result<u64> {
                buf.clear();
                buf.extend(Orbit::new(map, trajectory_seed(seed, t), len, mode)?.values(u));
                Ok(hit(buf) as u64)
            },
        )
        .try_reduce(|| 0, |a, b| Ok(a + b))
}

/// Monte Carlo estimate of `P(S_k > kα)` under Lebesgue starts.
pub fn ld_probability_mc(
    map: &PiecewiseMap,
    u: &Observable,
    level: LdLevel,
    k: usize,
    trials: usize,
    seed: u64,
    method: LdMethod,
) -> Result<LdEstimate> {
    check_trials(trials)?;
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    let method = match method {
        LdMethod::Auto if k as f64 * level.phi <= DIRECT_MC_GUARD => LdMethod::Direct,
        LdMethod::Auto => LdMethod::Tilted,
        m => m,
    };
    let threshold = k as f64 * level.alpha;
    let (p_hat, ci_lo, ci_hi, one_sided) = match method {
        LdMethod::Direct => {
            direct_guard(&level, k)?;
            let hits = count_hits(map, u, k, trials, seed, |v| v.iter().sum::<f64>() > threshold)?;
            let (lo, hi) = wilson_interval(hits, trials as u64);
            (hits as f64 / trials as f64, lo, hi, hits == 0)
        }
        _ => {
            let (p, se) = tilted_tail(map, u, level.alpha, k, trials, seed)?;
            (p, (p - Z95 * se).max(0.0), p + Z95 * se, false)
        }
    };
    Ok(LdEstimate {
        k,
        alpha: level.alpha,
        p_hat,
        ci_lo,
        ci_hi,
        normalized_ratio: p_hat * level.beta * (k as f64).sqrt() * (k as f64 * level.phi).exp(),
        method,
        trials,
        one_sided,
    })
}

/// Symbol law and branch values of an i.i.d.-symbol system.
fn iid_model(map: &PiecewiseMap, u: &Observable) -> Result<(Vec<f64>, Vec<f64>)> {
    if !map.dyadic_exact() {
        return Err(Error::Infeasible(
            "tilted sampling needs full affine branches (i.i.d. symbols)".into(),
        ));
    }
    let values = u.branch_values(map).ok_or_else(|| {
        Error::Infeasible("tilted sampling needs an observable constant on each branch".into())
    })?;
    Ok((map.branch_widths(), values))
}

/// Exact cumulant `Λ(β) = log Σ p_i e^{β v_i}` of one i.i.d. step.
fn iid_cumulant(p: &[f64], v: &[f64], beta: f64) -> f64 {
    let top = v.iter().map(|x| beta * x).fold(f64::NEG_INFINITY, f64::max);
    top + p.iter().zip(v).map(|(pi, vi)| pi * (beta * vi - top).exp()).sum::<f64>().ln()
}

fn tilted_mean(p: &[f64], v: &[f64], beta: f64) -> f64 {
    let lam = iid_cumulant(p, v, beta);
    p.iter().zip(v).map(|(pi, vi)| pi * (beta * vi - lam).exp() * vi).sum()
}

/// Importance-sampling estimate `(P̂, standard error)` of `P(S_k > kα)`:
/// symbols drawn from the tilt `q_i ∝ p_i e^{β* v_i}` with mean `α`, each
/// hit weighted by `e^{-β* S_k + k Λ(β*)}`.
fn tilted_tail(map: &PiecewiseMap, u: &Observable, alpha: f64, k: usize, trials: usize, seed: u64) -> Result<(f64, f64)> {
    let (p, v) = iid_model(map, u)?;
    let (vmin, vmax) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, &x| (a.0.min(x), a.1.max(x)));
    if !(alpha > vmin && alpha < vmax) {
        return Err(Error::Infeasible(format!("level {alpha} outside the range ({vmin}, {vmax}) of u")));
    }
    let (mut lo, mut hi) = (-1.0f64, 1.0f64);
    while tilted_mean(&p, &v, lo) > alpha {
        lo *= 2.0;
    }
    while tilted_mean(&p, &v, hi) < alpha {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if tilted_mean(&p, &v, mid) < alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let beta = 0.5 * (lo + hi);
    let lam = iid_cumulant(&p, &v, beta);
    let q: Vec<f64> = p.iter().zip(&v).map(|(pi, vi)| pi * (beta * vi - lam).exp()).collect();
    let dist = WeightedIndex::new(&q).map_err(|e| Error::Infeasible(format!("tilted law: {e}")))?;
    let threshold = k as f64 * alpha;
    const CHUNK: usize = 1024;
    let chunks = trials.div_ceil(CHUNK);
    let partial: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = rng_for(trajectory_seed(seed, c));
            let count = CHUNK.min(trials - c * CHUNK);
            let (mut s1, mut s2) = (0.0, 0.0);
            for _ in 0..count {
                let s: f64 = (0..k).map(|_| v[dist.sample(&mut rng)]).sum();
                if s > threshold {
                    let w = (-beta * s + k as f64 * lam).exp();
                    s1 += w;
                    s2 += w * w;
                }
            }
            (s1, s2)
        })
        .collect();
    let (s1, s2) = partial.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = trials as f64;
    let mean = s1 / n;
    let var = (s2 / n - mean * mean).max(0.0);
    Ok((mean, (var / n).sqrt()))
}

/// Joint tail `P(S_k > kα, S_k∘f^r > kα)` at one shift.
#[derive(Clone, Debug, PartialEq)]
pub struct DecouplingRow {
    pub r: usize,
    pub p_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub log_p: f64,
}

/// Direct Monte Carlo of the joint tail for each shift in `r_grid`; all
/// shifts share the same trials.
pub fn decoupling_check(
    map: &PiecewiseMap,
    u: &Observable,
    level: LdLevel,
    k: usize,
    r_grid: &[usize],
    trials: usize,
    seed: u64,
) -> Result<Vec<DecouplingRow>> {
    check_trials(trials)?;
    direct_guard(&level, k)?;
    if k == 0 || r_grid.is_empty() {
        return Err(Error::InvalidArgument("need k > 0 and a nonempty r grid".into()));
    }
    let rmax = *r_grid.iter().max().unwrap();
    let threshold = k as f64 * level.alpha;
    let len = k + rmax;
    let mode = OrbitMode::default_for(map);
    let counts: Vec<u64> = (0..trials)
        .into_par_iter()
        .map_init(
            || Vec::with_capacity(len),
            |buf, t| -> Result<Vec<u64>> {
                buf.clear();
                buf.extend(Orbit::new(map, trajectory_seed(seed, t), len, mode)?.values(u));
                let first = buf[..k].iter().sum::<f64>() > threshold;
                Ok(r_grid
                    .iter()
                    .map(|&r| (first && buf[r..r + k].iter().sum::<f64>() > threshold) as u64)
                    .collect())
            },
        )
        .try_reduce(
            || vec![0; r_grid.len()],
            |a, b| Ok(a.iter().zip(&b).map(|(x, y)| x + y).collect()),
        )?;
    Ok(r_grid
        .iter()
        .zip(counts)
        .map(|(&r, c)| {
            let (ci_lo, ci_hi) = wilson_interval(c, trials as u64);
            let p_hat = c as f64 / trials as f64;
            DecouplingRow {
                r,
                p_hat,
                ci_lo,
                ci_hi,
                log_p: p_hat.ln(),
            }
        })
        .collect())
}
