//! Cylinders, return times and entropy. The statistics are
//! `(-log μ(𝓟_k(x)) - k h)/√k` (Shannon–McMillan–Breiman) and
//! `(log R_k(x) - k h)/√k` (Ornstein–Weiss), log-averaged over `k` and
//! compared with `𝓝(0, σ²)` for `u = log|f'|`.

use rayon::prelude::*;

use crate::asclt::MIN_SIGMA2;
use crate::error::{Error, Result};
use crate::maps::PiecewiseMap;
use crate::measures::{kantorovich, GaussianLaw, WeightedEmpiricalMeasure};
use crate::observable::Observable;
use crate::orbit::{trajectory_seed, Orbit, OrbitMode};
use crate::transfer::{green_kubo_sigma2, invariant_density, DensityTable, Sigma2Method};

/// Iterates closer than this to an interior breakpoint are rejected.
pub const COLLISION_TOL: f64 = 1e-14;
/// Return-time scans give up after this many symbols.
pub const RETURN_CAP: u64 = 1_000_000_000;
pub const DEFAULT_SANDWICH_EPS: f64 = 1.0;
/// Trailing symbols pulled back exactly before linearizing along the orbit.
const EXACT_DEPTH: usize = 20;

#[derive(Clone, Debug, PartialEq)]
pub struct Itinerary {
    pub symbols: Vec<usize>,
    pub origin: f64,
}

/// Branch indices of `x, f(x), ..., f^{n-1}(x)`.
pub fn itinerary(map: &PiecewiseMap, x: f64, n: usize) -> Result<Itinerary> {
    if !(0.0..1.0).contains(&x) {
        return Err(Error::OutOfDomain(x));
    }
    let bp = map.breakpoints();
    let inner = &bp[1..bp.len() - 1];
    let mut symbols = Vec::with_capacity(n);
    let mut y = x;
    for step in 0..n {
        if inner.iter().any(|a| (y - a).abs() < COLLISION_TOL) {
            return Err(Error::BreakpointCollision { step, x: y });
        }
        let e = map.evaluate(y.min(1.0 - f64::EPSILON / 2.0))?;
        symbols.push(e.branch);
        y = e.image;
    }
    Ok(Itinerary { symbols, origin: x })
}

/// `[lo, hi)` of the points whose first `depth` symbols are `symbols`.
#[derive(Clone, Debug, PartialEq)]
pub struct CylinderInterval {
    pub lo: f64,
    pub hi: f64,
    pub depth: usize,
    pub symbols: Vec<usize>,
}

impl CylinderInterval {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x < self.hi
    }
}

/// Pulls `[lo, hi]` back through branch `i`.
fn pull_back(map: &PiecewiseMap, i: usize, lo: f64, hi: f64) -> Option<(f64, f64)> {
    let (ilo, ihi) = map.branch_image(i);
    let (lo, hi) = (lo.max(ilo), hi.min(ihi));
    if hi <= lo {
        return None;
    }
    let a = map.branch_inverse(i, lo)?;
    let b = map.branch_inverse(i, hi)?;
    Some((a.min(b), a.max(b)))
}

fn pull_word(map: &PiecewiseMap, symbols: &[usize]) -> Option<(f64, f64)> {
    let Some((&last, rest)) = symbols.split_last() else {
        return Some((0.0, 1.0));
    };
    let (mut lo, mut hi) = map.branch_interval(last);
    for &s in rest.iter().rev() {
        (lo, hi) = pull_back(map, s, lo, hi)?;
    }
    Some((lo, hi))
}

/// `A_{i_1} ∩ f^{-1} A_{i_2} ∩ ... ∩ f^{-n+1} A_{i_n}` by backward iteration
/// of branch inverses.
pub fn cylinder_interval(map: &PiecewiseMap, symbols: &[usize]) -> Result<CylinderInterval> {
    if symbols.iter().any(|&s| s >= map.branch_count()) {
        return Err(Error::Inadmissible(symbols.to_vec()));
    }
    let (lo, hi) = pull_word(map, symbols).ok_or_else(|| Error::Inadmissible(symbols.to_vec()))?;
    Ok(CylinderInterval {
        lo,
        hi,
        depth: symbols.len(),
        symbols: symbols.to_vec(),
    })
}

/// `μ(𝓟_n)` with a flag for cylinders narrower than a tenth of a density cell,
/// where the cell-constant density is the only information used.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CylinderMeasure {
    pub value: f64,
    pub under_resolved: bool,
}

pub fn cylinder_measure(h: &DensityTable, cyl: &CylinderInterval) -> CylinderMeasure {
    CylinderMeasure {
        value: h.integrate(cyl.lo, cyl.hi),
        under_resolved: cyl.width() < 0.1 * h.cell_width(),
    }
}

/// `h_μ = ∫ log|f'| dμ`.
pub fn rokhlin_entropy(map: &PiecewiseMap, h: &DensityTable) -> f64 {
    h.mean(&Observable::log_derivative(map))
}

/// Log-measures `log μ(𝓟_k(x))` for `k = 1..=n` along one orbit.
///
/// Full affine branches preserve Lebesgue measure, so there the value is
/// `-Σ log|slope|` exactly. Otherwise the last `EXACT_DEPTH` symbols are
/// pulled back exactly and the remaining contraction is read off `log|f'|`
/// along the orbit, which is accurate to about `2^{-EXACT_DEPTH}`.
fn log_cylinder_measures(map: &PiecewiseMap, h: &DensityTable, symbols: &[usize], points: &[f64]) -> Result<Vec<f64>> {
    let n = symbols.len();
    if map.dyadic_exact() {
        let logs: Vec<f64> = (0..map.branch_count())
            .map(|i| map.branch_derivative(i, 0.0).abs().ln())
            .collect();
        let mut acc = 0.0;
        return Ok(symbols
            .iter()
            .map(|&s| {
                acc -= logs[s];
                acc
            })
            .collect());
    }
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for (&x, &s) in points.iter().zip(symbols) {
        let d = map.branch_derivative(s, x).abs().ln();
        prefix.push(prefix.last().unwrap() + d);
    }
    let hx = {
        let nn = h.resolution();
        let cell = ((points[0] * nn as f64) as usize).min(nn - 1);
        h.values()[cell]
    };
    (1..=n)
        .into_par_iter()
        .map(|k| {
            let start = k.saturating_sub(EXACT_DEPTH);
            let (lo, hi) = pull_word(map, &symbols[start..k]).ok_or_else(|| Error::Inadmissible(symbols[..k].to_vec()))?;
            if start == 0 {
                let m = h.integrate(lo, hi);
                if m > 0.0 {
                    return Ok(m.ln());
                }
            }
            Ok(hx.ln() + (hi - lo).ln() - prefix[start])
        })
        .collect()
}

/// Return times `R_k` for `k = 1..=n` from one stream whose first `n`
/// symbols are the reference word. A prefix-function automaton scans the
/// stream once; `R_k` is fixed the first time the matched length reaches `k`.
/// Entries left `None` were censored at `cap` symbols.
pub fn return_times(stream: impl IntoIterator<Item = usize>, n: usize, cap: u64) -> Result<Vec<Option<u64>>> {
    if n == 0 {
        return Err(Error::InvalidArgument("word length must be positive".into()));
    }
    let mut it = stream.into_iter();
    let pattern: Vec<usize> = it.by_ref().take(n).collect();
    if pattern.len() < n {
        return Err(Error::InvalidArgument("stream shorter than the word".into()));
    }
    let mut fail = vec![0usize; n];
    let mut q = 0;
    for i in 1..n {
        while q > 0 && pattern[i] != pattern[q] {
            q = fail[q - 1];
        }
        if pattern[i] == pattern[q] {
            q += 1;
        }
        fail[i] = q;
    }
    let mut out = vec![None; n];
    let mut found = 0;
    let mut q = 0;
    // the text starts at shift 1: pattern[1..] followed by the rest of the stream
    let text = pattern[1..].iter().copied().chain(it);
    for (pos, c) in (1u64..).zip(text) {
        if pos > cap {
            break;
        }
        while q > 0 && (q == n || pattern[q] != c) {
            q = fail[q - 1];
        }
        if pattern[q] == c {
            q += 1;
        }
        if q > found {
            // q grows by at most one per symbol
            out[q - 1] = Some(pos + 1 - q as u64);
            found = q;
            if found == n {
                break;
            }
        }
    }
    Ok(out)
}

/// `R_n` alone; censoring is an error.
pub fn return_time(stream: impl IntoIterator<Item = usize>, n: usize, cap: u64) -> Result<u64> {
    return_times(stream, n, cap)?[n - 1].ok_or(Error::Censored(cap))
}

/// Symbol stream of the orbit of `seed` (unbounded up to `cap + n`).
fn symbol_stream(map: &PiecewiseMap, seed: u64, n: usize, cap: u64) -> Result<impl Iterator<Item = usize> + '_> {
    let len = (cap as usize).saturating_add(n);
    Ok(Orbit::new(map, seed, len, OrbitMode::default_for(map))?.symbols())
}

/// First `n` symbols and (for float orbits) points of the orbit of `seed`.
fn orbit_prefix(map: &PiecewiseMap, seed: u64, n: usize) -> Result<(Vec<usize>, Vec<f64>)> {
    let orbit = Orbit::new(map, seed, n, OrbitMode::default_for(map))?;
    if map.dyadic_exact() {
        return Ok((orbit.symbols().collect(), Vec::new()));
    }
    Ok(orbit.map(|p| (p.symbol, p.x)).unzip())
}

/// Per-`k` entropy statistics of one orbit.
#[derive(Clone, Debug, PartialEq)]
pub struct EntropyTrace {
    pub seed: u64,
    /// `-log μ(𝓟_k(x))` for `k = 1..=n`.
    pub minus_log_mu: Vec<f64>,
    /// `log R_k(x)`, `None` when censored or not requested.
    pub log_return: Vec<Option<f64>>,
}

impl EntropyTrace {
    /// `log[R_k μ(𝓟_k)]` at depth `k`.
    pub fn log_r_mu(&self, k: usize) -> Option<f64> {
        self.log_return[k - 1].map(|lr| lr - self.minus_log_mu[k - 1])
    }

    /// Whether `-(1+ε) log k ≤ log[R_k μ(𝓟_k)] ≤ log log(k^{1+ε})`; `None`
    /// for censored `k` and for `k = 1`, where the upper bound is undefined.
    pub fn sandwich_ok(&self, k: usize, eps: f64) -> Option<bool> {
        let v = self.log_r_mu(k)?;
        let lk = (k as f64).ln();
        let upper = ((1.0 + eps) * lk).ln();
        if !upper.is_finite() {
            return None;
        }
        Some(-(1.0 + eps) * lk <= v && v <= upper)
    }
}

/// Cylinder measures (and optionally return times) for `k ≤ n`.
pub fn entropy_trace(
    map: &PiecewiseMap,
    h: &DensityTable,
    n: usize,
    seed: u64,
    with_returns: bool,
    cap: u64,
) -> Result<EntropyTrace> {
    if n == 0 {
        return Err(Error::InvalidArgument("depth must be positive".into()));
    }
    let (symbols, points) = orbit_prefix(map, seed, n)?;
    let minus_log_mu = log_cylinder_measures(map, h, &symbols, &points)?
        .into_iter()
        .map(|v| -v)
        .collect();
    let log_return = if with_returns {
        return_times(symbol_stream(map, seed, n, cap)?, n, cap)?
            .into_iter()
            .map(|r| r.map(|r| (r as f64).ln()))
            .collect()
    } else {
        vec![None; n]
    };
    Ok(EntropyTrace {
        seed,
        minus_log_mu,
        log_return,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EntropyStatistic {
    /// `(-log μ(𝓟_k) - k h)/√k`.
    Smb,
    /// `(log R_k - k h)/√k`.
    Ow,
}

#[derive(Clone, Debug)]
pub struct EntropyParams {
    pub resolution: usize,
    pub cap: u64,
    pub eps: f64,
    pub sigma2: Option<f64>,
}

impl Default for EntropyParams {
    fn default() -> Self {
        EntropyParams {
            resolution: 4096,
            cap: RETURN_CAP,
            eps: DEFAULT_SANDWICH_EPS,
            sigma2: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EntropyDiagnostics {
    pub statistic: EntropyStatistic,
    pub h_rokhlin: f64,
    pub sigma_used: f64,
    pub seed: u64,
    pub checkpoints: Vec<usize>,
    pub kappa_values: Vec<f64>,
    /// Atoms in order of `k`; censored `k` are skipped.
    pub atoms: Vec<(usize, f64)>,
    pub censored: usize,
    /// Sandwich flags per `k` (only with return times).
    pub sandwich: Vec<Option<bool>>,
    pub trace: EntropyTrace,
}

/// Entropy and Green–Kubo variance of `log|f'| - h`.
pub fn entropy_and_variance(map: &PiecewiseMap, params: &EntropyParams) -> Result<(DensityTable, f64, f64)> {
    let h = invariant_density(map, params.resolution)?;
    let entropy = rokhlin_entropy(map, &h);
    let sigma2 = match params.sigma2 {
        Some(s) => s,
        None => {
            let u = Observable::log_derivative(map).centered(entropy);
            green_kubo_sigma2(map, &u, Sigma2Method::Quadrature { resolution: params.resolution })?.value
        }
    };
    Ok((h, entropy, sigma2))
}

fn entropy_run(
    map: &PiecewiseMap,
    n: usize,
    seed: u64,
    checkpoints: &[usize],
    params: &EntropyParams,
    statistic: EntropyStatistic,
) -> Result<EntropyDiagnostics> {
    if checkpoints.is_empty() || checkpoints.windows(2).any(|w| w[0] >= w[1]) || checkpoints[0] == 0 {
        return Err(Error::InvalidArgument("checkpoints must be positive and strictly increasing".into()));
    }
    if *checkpoints.last().unwrap() > n {
        return Err(Error::InvalidArgument("horizon below the last checkpoint".into()));
    }
    let (h, entropy, sigma2) = entropy_and_variance(map, params)?;
    if !(sigma2 > MIN_SIGMA2) {
        return Err(Error::DegenerateVariance(sigma2));
    }
    let sigma = sigma2.sqrt();
    let law = GaussianLaw::new(sigma)?;
    let with_returns = statistic == EntropyStatistic::Ow;
    let trace = entropy_trace(map, &h, n, seed, with_returns, params.cap)?;
    let mut measure = WeightedEmpiricalMeasure::with_capacity(n);
    let mut atoms = Vec::with_capacity(n);
    let mut kappa_values = Vec::with_capacity(checkpoints.len());
    let mut censored = 0;
    let mut next = checkpoints.iter().peekable();
    for k in 1..=n {
        let raw = match statistic {
            EntropyStatistic::Smb => Some(trace.minus_log_mu[k - 1]),
            EntropyStatistic::Ow => trace.log_return[k - 1],
        };
        match raw {
            Some(v) => {
                let a = (v - k as f64 * entropy) / (k as f64).sqrt();
                // weight 1/k regardless of skipped (censored) k
                atoms.push((k, a));
            }
            None => censored += 1,
        }
        if next.peek() == Some(&&k) {
            next.next();
            let weighted: Vec<(f64, f64)> = atoms.iter().map(|&(j, a)| (a, 1.0 / j as f64)).collect();
            if weighted.is_empty() {
                return Err(Error::Censored(params.cap));
            }
            measure = WeightedEmpiricalMeasure::from_atoms(weighted)?;
            kappa_values.push(kantorovich(&measure, &law)?);
        }
    }
    drop(measure);
    let sandwich = (1..=n).map(|k| trace.sandwich_ok(k, params.eps)).collect();
    Ok(EntropyDiagnostics {
        statistic,
        h_rokhlin: entropy,
        sigma_used: sigma,
        seed,
        checkpoints: checkpoints.to_vec(),
        kappa_values,
        atoms,
        censored,
        sandwich,
        trace,
    })
}

/// `κ(𝓢𝓜𝓑_n, 𝓝(0, σ²))` at each checkpoint.
pub fn smb_run(map: &PiecewiseMap, n: usize, seed: u64, checkpoints: &[usize], params: &EntropyParams) -> Result<EntropyDiagnostics> {
    entropy_run(map, n, seed, checkpoints, params, EntropyStatistic::Smb)
}

/// `κ(𝓞𝓦_n, 𝓝(0, σ²))` at each checkpoint, with the sandwich flags.
pub fn ow_run(map: &PiecewiseMap, n: usize, seed: u64, checkpoints: &[usize], params: &EntropyParams) -> Result<EntropyDiagnostics> {
    entropy_run(map, n, seed, checkpoints, params, EntropyStatistic::Ow)
}

/// `log[R_n μ(𝓟_n)]` and sandwich flags at depth `n` over many seeds.
#[derive(Clone, Debug, PartialEq)]
pub struct SandwichSummary {
    pub n: usize,
    pub eps: f64,
    pub samples: Vec<Option<f64>>,
    pub violations: usize,
    pub censored: usize,
    /// Mean of `R_n μ(𝓟_n)` over uncensored seeds.
    pub mean_r_mu: f64,
    /// Mean of `(1/n) log R_n` over uncensored seeds.
    pub mean_log_return_rate: f64,
}

impl SandwichSummary {
    pub fn violation_frequency(&self) -> f64 {
        self.violations as f64 / (self.samples.len() - self.censored) as f64
    }
}

pub fn sandwich_check(
    map: &PiecewiseMap,
    n: usize,
    base_seed: u64,
    seeds: usize,
    eps: f64,
    params: &EntropyParams,
) -> Result<SandwichSummary> {
    let h = invariant_density(map, params.resolution)?;
    let traces: Vec<EntropyTrace> = (0..seeds)
        .into_par_iter()
        .map(|i| entropy_trace(map, &h, n, trajectory_seed(base_seed, i), true, params.cap))
        .collect::<Result<_>>()?;
    let samples: Vec<Option<f64>> = traces.iter().map(|t| t.log_r_mu(n)).collect();
    let ok: Vec<Option<bool>> = traces.iter().map(|t| t.sandwich_ok(n, eps)).collect();
    let kept: Vec<f64> = samples.iter().flatten().copied().collect();
    let m = kept.len().max(1) as f64;
    let mean_rate = traces.iter().filter_map(|t| t.log_return[n - 1]).sum::<f64>() / (m * n as f64);
    Ok(SandwichSummary {
        n,
        eps,
        violations: ok.iter().filter(|o| **o == Some(false)).count(),
        censored: samples.iter().filter(|s| s.is_none()).count(),
        mean_r_mu: kept.iter().map(|v| v.exp()).sum::<f64>() / m,
        mean_log_return_rate: mean_rate,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn itineraries() {
        let d = PiecewiseMap::doubling();
        assert_eq!(itinerary(&d, 0.3, 4).unwrap().symbols, vec![0, 1, 0, 0]);
        assert_eq!(itinerary(&d, 1.0 / 3.0, 6).unwrap().symbols, vec![0, 1, 0, 1, 0, 1]);
        let t = PiecewiseMap::tent();
        assert_eq!(itinerary(&t, 0.2, 2).unwrap().symbols, vec![0, 0]);
        assert!(matches!(itinerary(&t, 0.25, 2), Err(Error::BreakpointCollision { step: 1, .. })));
    }

    #[test]
    fn cylinders() {
        let d = PiecewiseMap::doubling();
        let c = cylinder_interval(&d, &[1, 0, 1]).unwrap();
        assert_eq!((c.lo, c.hi), (0.625, 0.75));
        let three = PiecewiseMap::full_linear(&[3.0, 3.0, 3.0]).unwrap();
        let c = cylinder_interval(&three, &[2, 0]).unwrap();
        assert!((c.lo - 6.0 / 9.0).abs() < 1e-15 && (c.hi - 7.0 / 9.0).abs() < 1e-15);
        let c = cylinder_interval(&d, &[]).unwrap();
        assert_eq!((c.lo, c.hi), (0.0, 1.0));
        assert!(cylinder_interval(&d, &[2]).is_err());
    }

    #[test]
    fn inadmissible_word() {
        // the last branch maps onto [0, 1/2) and never reaches itself
        let m = PiecewiseMap::linear(&[0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0], &[3.0, 3.0, 1.5], None).unwrap();
        assert!(matches!(cylinder_interval(&m, &[2, 2]), Err(Error::Inadmissible(_))));
        assert!(cylinder_interval(&m, &[2, 0]).is_ok());
    }

    #[test]
    fn measures_of_cylinders() {
        let d = PiecewiseMap::doubling();
        let h = DensityTable::uniform(1024);
        let c = cylinder_interval(&d, &[0, 1, 1, 0]).unwrap();
        assert_eq!(cylinder_measure(&h, &c).value, 1.0 / 16.0);
        let whole = cylinder_interval(&d, &[]).unwrap();
        assert!((cylinder_measure(&h, &whole).value - 1.0).abs() < 1e-15);
        let t = PiecewiseMap::tent();
        let ht = invariant_density(&t, 1024).unwrap();
        let c = CylinderInterval { lo: 0.25, hi: 0.5, depth: 2, symbols: vec![0, 1] };
        assert!((cylinder_measure(&ht, &c).value - 0.25).abs() < 1e-3);
    }

    #[test]
    fn entropies() {
        for (map, want) in [
            (PiecewiseMap::doubling(), 2f64.ln()),
            (PiecewiseMap::tent(), 2f64.ln()),
            (PiecewiseMap::full_linear(&[3.0, 3.0, 3.0]).unwrap(), 3f64.ln()),
        ] {
            let h = invariant_density(&map, 729).unwrap();
            assert!((rokhlin_entropy(&map, &h) - want).abs() < 1e-6);
        }
    }

    #[test]
    fn return_time_examples() {
        let alt = (0..).map(|i| i % 2);
        assert_eq!(return_time(alt, 2, 100).unwrap(), 2);
        assert_eq!(return_time([0, 0, 0, 1].into_iter(), 1, 100).unwrap(), 1);
        assert_eq!(return_times([0, 1, 1, 0, 1, 0, 1, 1].into_iter(), 3, 100).unwrap(), vec![Some(3), Some(3), Some(5)]);
        assert!(matches!(return_time([0, 1, 1, 1].into_iter(), 2, 100), Err(Error::Censored(_))));
    }

    #[test]
    fn doubling_smb_is_exact() {
        let d = PiecewiseMap::doubling();
        let t = entropy_trace(&d, &DensityTable::uniform(16), 50, 3, false, RETURN_CAP).unwrap();
        for (k, v) in t.minus_log_mu.iter().enumerate() {
            assert!((v / (k + 1) as f64 - 2f64.ln()).abs() < 1e-14);
        }
    }

    #[test]
    fn refuses_constant_slope() {
        let d = PiecewiseMap::doubling();
        let p = EntropyParams { resolution: 256, ..Default::default() };
        assert!(matches!(smb_run(&d, 100, 0, &[100], &p), Err(Error::DegenerateVariance(_))));
    }

    #[test]
    fn smooth_map_deep_cylinders_match_exact_pullback() {
        let m = PiecewiseMap::perturbed_doubling(0.2).unwrap();
        let h = invariant_density(&m, 2048).unwrap();
        let (symbols, points) = orbit_prefix(&m, 8, 30).unwrap();
        let approx = log_cylinder_measures(&m, &h, &symbols, &points).unwrap();
        let exact = cylinder_interval(&m, &symbols).unwrap();
        let direct = cylinder_measure(&h, &exact).value.ln();
        assert!((approx[29] - direct).abs() < 1e-4, "{} vs {direct}", approx[29]);
    }
}
