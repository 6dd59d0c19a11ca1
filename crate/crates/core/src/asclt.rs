//! Almost-sure central limit experiments: log-averaged empirical measures of
//! `S_k/√k` and of the running maxima `S*_k/√k` along single orbits, compared
//! with `𝓝(0, σ²)` and `𝓖(σ)` in Kantorovich distance.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::maps::PiecewiseMap;
use crate::measures::{kantorovich, GaussianLaw, HalfGaussianLaw, Law, WeightedEmpiricalMeasure};
use crate::observable::Observable;
use crate::orbit::{trajectory_seed, Orbit, OrbitMode};

/// Variances at or below this are treated as degenerate.
pub const MIN_SIGMA2: f64 = 1e-6;

/// Distances at the checkpoints of one orbit.
#[derive(Clone, Debug, PartialEq)]
pub struct AscltDiagnostics {
    pub checkpoints: Vec<usize>,
    pub kappa_values: Vec<f64>,
    /// `κ (log n)^{1/3} / √(log log n)`; NaN where `log log n ≤ 0` (`n < 3`).
    pub normalized_rates: Vec<f64>,
    pub sigma_used: f64,
    pub seed: u64,
}

/// Same layout, with distances from the maxima measure to `𝓖(σ)`.
pub type MaximaDiagnostics = AscltDiagnostics;

/// `(log n)^{1/3} / √(log log n)`.
pub fn rate_normalizer(n: usize) -> f64 {
    let ll = (n as f64).ln().ln();
    if ll > 0.0 {
        (n as f64).ln().cbrt() / ll.sqrt()
    } else {
        f64::NAN
    }
}

/// `10^3, 10^3.5, ..., ≤ max` (rounded).
pub fn default_checkpoints(max: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut e = 3.0f64;
    loop {
        let n = 10f64.powf(e).round() as usize;
        if n > max {
            break;
        }
        out.push(n);
        e += 0.5;
    }
    out
}

fn check_checkpoints(n: usize, checkpoints: &[usize]) -> Result<()> {
    if checkpoints.is_empty() || checkpoints[0] == 0 || checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("checkpoints must be positive and strictly increasing".into()));
    }
    if n < *checkpoints.last().unwrap() {
        return Err(Error::InvalidArgument(format!(
            "horizon {n} is below the last checkpoint {}",
            checkpoints.last().unwrap()
        )));
    }
    Ok(())
}

fn check_sigma2(sigma2: f64) -> Result<f64> {
    if !(sigma2 > MIN_SIGMA2) {
        return Err(Error::DegenerateVariance(sigma2));
    }
    Ok(sigma2.sqrt())
}

#[derive(Clone, Copy, PartialEq)]
enum Statistic {
    Sums,
    Maxima,
}

fn run(
    map: &PiecewiseMap,
    u: &Observable,
    n: usize,
    seed: u64,
    checkpoints: &[usize],
    stat: Statistic,
    law: &dyn Law,
) -> Result<Vec<f64>> {
    check_checkpoints(n, checkpoints)?;
    let last = *checkpoints.last().unwrap();
    let orbit = Orbit::new(map, seed, last, OrbitMode::default_for(map))?;
    let mut measure = WeightedEmpiricalMeasure::with_capacity(last);
    let mut kappas = Vec::with_capacity(checkpoints.len());
    let mut next = checkpoints.iter().peekable();
    let mut s = 0.0;
    let mut s_max = f64::NEG_INFINITY;
    for (i, v) in orbit.values(u).enumerate() {
        let k = i + 1;
        s += v;
        s_max = s_max.max(s);
        let stat_k = match stat {
            Statistic::Sums => s,
            Statistic::Maxima => s_max,
        };
        measure.push(stat_k / (k as f64).sqrt());
        if next.peek() == Some(&&k) {
            next.next();
            kappas.push(kantorovich(&measure, law)?);
        }
    }
    Ok(kappas)
}

fn diagnostics(checkpoints: &[usize], kappa_values: Vec<f64>, sigma: f64, seed: u64) -> AscltDiagnostics {
    AscltDiagnostics {
        normalized_rates: checkpoints
            .iter()
            .zip(&kappa_values)
            .map(|(&n, k)| k * rate_normalizer(n))
            .collect(),
        checkpoints: checkpoints.to_vec(),
        kappa_values,
        sigma_used: sigma,
        seed,
    }
}

/// `κ(𝓔_n, 𝓝(0, σ²))` at each checkpoint along the orbit of `seed`.
/// `u` should be centered and `sigma2` its Green–Kubo variance.
pub fn asclt_run(
    map: &PiecewiseMap,
    u: &Observable,
    sigma2: f64,
    n: usize,
    seed: u64,
    checkpoints: &[usize],
) -> Result<AscltDiagnostics> {
    let sigma = check_sigma2(sigma2)?;
    let law = GaussianLaw::new(sigma)?;
    let k = run(map, u, n, seed, checkpoints, Statistic::Sums, &law)?;
    Ok(diagnostics(checkpoints, k, sigma, seed))
}

/// `κ(𝓜_n, 𝓖(σ))` with `𝓜_n` built from `S*_k = max_{j≤k} S_j`. Minima
/// are covered by running this on `-u`.
pub fn maxima_run(
    map: &PiecewiseMap,
    u: &Observable,
    sigma2: f64,
    n: usize,
    seed: u64,
    checkpoints: &[usize],
) -> Result<MaximaDiagnostics> {
    let sigma = check_sigma2(sigma2)?;
    let law = HalfGaussianLaw::new(sigma)?;
    let k = run(map, u, n, seed, checkpoints, Statistic::Maxima, &law)?;
    Ok(diagnostics(checkpoints, k, sigma, seed))
}

/// `(𝓔_n, 𝓜_n)` for one orbit.
pub fn empirical_measures(
    map: &PiecewiseMap,
    u: &Observable,
    n: usize,
    seed: u64,
) -> Result<(WeightedEmpiricalMeasure, WeightedEmpiricalMeasure)> {
    let orbit = Orbit::new(map, seed, n, OrbitMode::default_for(map))?;
    let mut sums = WeightedEmpiricalMeasure::with_capacity(n);
    let mut maxima = WeightedEmpiricalMeasure::with_capacity(n);
    let (mut s, mut s_max) = (0.0, f64::NEG_INFINITY);
    for (i, v) in orbit.values(u).enumerate() {
        let root = ((i + 1) as f64).sqrt();
        s += v;
        s_max = s_max.max(s);
        sums.push(s / root);
        maxima.push(s_max / root);
    }
    Ok((sums, maxima))
}

/// Runs `seeds` orbits with seeds `base, base + 1, ...` in parallel.
pub fn asclt_seeds(
    map: &PiecewiseMap,
    u: &Observable,
    sigma2: f64,
    n: usize,
    base_seed: u64,
    seeds: usize,
    checkpoints: &[usize],
) -> Result<Vec<AscltDiagnostics>> {
    (0..seeds)
        .into_par_iter()
        .map(|i| asclt_run(map, u, sigma2, n, trajectory_seed(base_seed, i), checkpoints))
        .collect()
}

pub fn maxima_seeds(
    map: &PiecewiseMap,
    u: &Observable,
    sigma2: f64,
    n: usize,
    base_seed: u64,
    seeds: usize,
    checkpoints: &[usize],
) -> Result<Vec<MaximaDiagnostics>> {
    (0..seeds)
        .into_par_iter()
        .map(|i| maxima_run(map, u, sigma2, n, trajectory_seed(base_seed, i), checkpoints))
        .collect()
}

/// Median of `κ` across runs at checkpoint index `j`.
pub fn median_kappa(runs: &[AscltDiagnostics], j: usize) -> f64 {
    let mut v: Vec<f64> = runs.iter().map(|r| r.kappa_values[j]).collect();
    median(&mut v)
}

pub fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RateVerdict {
    Bounded,
    Unbounded,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RateReport {
    pub normalized: Vec<f64>,
    pub verdict: RateVerdict,
}

/// Descriptive check of the rate `κ_n = O(√(log log n) / (log n)^{1/3})`:
/// bounded when the last normalized value is at most 1.5 times the median
/// and the sequence is not strictly increasing throughout.
pub fn rate_diagnostic(diag: &AscltDiagnostics) -> Result<RateReport> {
    if diag.checkpoints.len() < 2 {
        return Err(Error::InvalidArgument("rate diagnostic needs at least 2 checkpoints".into()));
    }
    let normalized: Vec<f64> = diag
        .checkpoints
        .iter()
        .zip(&diag.kappa_values)
        .map(|(&n, k)| k * rate_normalizer(n))
        .filter(|x| x.is_finite())
        .collect();
    if normalized.len() < 2 {
        return Err(Error::InvalidArgument("rate diagnostic needs at least 2 checkpoints with n >= 3".into()));
    }
    let last = *normalized.last().unwrap();
    let med = median(&mut normalized.clone());
    let increasing = normalized.windows(2).all(|w| w[1] > w[0] * (1.0 + 1e-9));
    let verdict = if last <= 1.5 * med && !increasing {
        RateVerdict::Bounded
    } else {
        RateVerdict::Unbounded
    };
    Ok(RateReport { normalized, verdict })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::build_empirical;
    use crate::orbit::orbit_sums;

    fn synthetic(kappa: impl Fn(usize) -> f64) -> AscltDiagnostics {
        let cps = default_checkpoints(1_000_000);
        let k: Vec<f64> = cps.iter().map(|&n| kappa(n)).collect();
        diagnostics(&cps, k, 1.0, 0)
    }

    #[test]
    fn constant_kappa_is_unbounded() {
        let d = synthetic(|_| 0.1);
        let r = rate_diagnostic(&d).unwrap();
        assert_eq!(r.verdict, RateVerdict::Unbounded);
        for (x, &n) in r.normalized.iter().zip(&d.checkpoints) {
            assert!((x - 0.1 * rate_normalizer(n)).abs() < 1e-15);
        }
    }

    #[test]
    fn matched_rate_is_bounded() {
        let r = rate_diagnostic(&synthetic(|n| 1.0 / rate_normalizer(n))).unwrap();
        assert!(r.normalized.iter().all(|x| (x - 1.0).abs() < 1e-12));
        assert_eq!(r.verdict, RateVerdict::Bounded);
    }

    #[test]
    fn checkpoints_default() {
        assert_eq!(default_checkpoints(100_000), vec![1000, 3162, 10000, 31623, 100000]);
    }

    #[test]
    fn four_steps_match_direct_construction() {
        let d = PiecewiseMap::doubling();
        let u = Observable::sawtooth();
        let diag = asclt_run(&d, &u, 0.25, 4, 9, &[4]).unwrap();
        let orbit = Orbit::new(&d, 9, 4, OrbitMode::SymbolicExact).unwrap();
        let sums: Vec<f64> = orbit_sums(orbit, &u).collect();
        let m = build_empirical(sums.iter().enumerate().map(|(i, s)| s / ((i + 1) as f64).sqrt()));
        let direct = kantorovich(&m, &GaussianLaw::new(0.5).unwrap()).unwrap();
        assert_eq!(diag.kappa_values[0], direct);
    }

    #[test]
    fn single_step_maxima() {
        let d = PiecewiseMap::doubling();
        let u = Observable::coin();
        let diag = maxima_run(&d, &u, 0.25, 1, 2, &[1]).unwrap();
        let s1: f64 = Orbit::new(&d, 2, 1, OrbitMode::SymbolicExact).unwrap().values(&u).next().unwrap();
        let direct = kantorovich(&build_empirical([s1]), &HalfGaussianLaw::new(0.5).unwrap()).unwrap();
        assert_eq!(diag.kappa_values[0], direct);
        assert!(diag.normalized_rates[0].is_nan());
    }

    #[test]
    fn refuses_degenerate_variance() {
        let d = PiecewiseMap::doubling();
        let u = Observable::coboundary_named(&d, "identity").unwrap();
        assert!(matches!(asclt_run(&d, &u, 1e-9, 100, 0, &[100]), Err(Error::DegenerateVariance(_))));
    }

    #[test]
    fn nonnegative_observable_maxima_equal_sums() {
        let d = PiecewiseMap::doubling();
        let u = Observable::step("nonneg", vec![0.0, 0.5, 1.0], vec![0.0, 1.0]).unwrap();
        let (e, m) = empirical_measures(&d, &u, 5000, 4).unwrap();
        assert_eq!(e, m);
    }

    #[test]
    fn deterministic() {
        let d = PiecewiseMap::tent();
        let u = Observable::sawtooth();
        let a = asclt_run(&d, &u, 0.1, 3000, 5, &[1000, 3000]).unwrap();
        let b = asclt_run(&d, &u, 0.1, 3000, 5, &[1000, 3000]).unwrap();
        assert_eq!(a, b);
    }
}
