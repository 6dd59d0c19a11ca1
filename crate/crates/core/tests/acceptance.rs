//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use ergostat::asclt::{asclt_seeds, empirical_measures, maxima_seeds, median_kappa};
use ergostat::config::parse_config;
use ergostat::entropy::{entropy_trace, rokhlin_entropy, sandwich_check, EntropyParams};
use ergostat::erdos_renyi::{
    er_law_seeds, ld_probability_mc, rate_estimator, trajectory_values, LdLevel, LdMethod,
};
use ergostat::maps::PiecewiseMap;
use ergostat::measures::{kantorovich, kantorovich_bruteforce, GaussianLaw, HalfGaussianLaw, Law, WeightedEmpiricalMeasure};
use ergostat::observable::Observable;
use ergostat::orbit::trajectory_seed;
use ergostat::quad::gauss_legendre5;
use ergostat::runner::{run, Subcommand};
use ergostat::transfer::{
    green_kubo_sigma2, invariant_density, legendre, pressure_curve, symmetric_grid, PressureSource, Sigma2Method,
    UlamPressure,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BASE_SEED: u64 = 1;

type Outcome = Result<(bool, String), String>;

fn coin_level(alpha: f64) -> Result<LdLevel, String> {
    let d = PiecewiseMap::doubling();
    let curve = pressure_curve(&d, &Observable::coin(), &symmetric_grid(3.0, 0.25), 1024).map_err(|e| e.to_string())?;
    let rate = legendre(&curve, &[alpha]).map_err(|e| e.to_string())?;
    LdLevel::from_rate(&rate, alpha).map_err(|e| e.to_string())
}

/// Cramér function of the ±1/2 fair coin.
fn bernoulli_phi(alpha: f64) -> f64 {
    let p = 0.5 + alpha;
    let q = 1.0 - p;
    p * (2.0 * p).ln() + if q > 0.0 { q * (2.0 * q).ln() } else { 0.0 }
}

fn log_binomial_tail(k: u64, above: u64) -> f64 {
    // log P(Bin(k, 1/2) > above)
    let terms: Vec<f64> = (above + 1..=k)
        .map(|j| {
            libm::lgamma(k as f64 + 1.0) - libm::lgamma(j as f64 + 1.0) - libm::lgamma((k - j) as f64 + 1.0)
                - k as f64 * std::f64::consts::LN_2
        })
        .collect();
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

fn c1_density() -> Outcome {
    let start = Instant::now();
    let mut detail = Vec::new();
    let mut ok = true;
    for (name, map) in [("doubling", PiecewiseMap::doubling()), ("tent", PiecewiseMap::tent())] {
        let h = invariant_density(&map, 4096).map_err(|e| e.to_string())?;
        let dev = h.sup_deviation_from(1.0);
        ok &= dev < 1e-3;
        detail.push(format!("{name} sup|h-1| = {dev:.3e}"));
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= secs < 10.0;
    detail.push(format!("{secs:.2} s"));
    Ok((ok, detail.join(", ")))
}

fn c2_pressure() -> Outcome {
    let mut worst_linear: f64 = 0.0;
    let mut worst_zero: f64 = 0.0;
    let c = 0.7;
    for map in [PiecewiseMap::doubling(), PiecewiseMap::tent(), PiecewiseMap::perturbed_doubling(0.2).unwrap()] {
        let src = UlamPressure::new(&map, &Observable::constant(c), 1024).map_err(|e| e.to_string())?;
        for beta in [-1.0, 0.0, 1.0] {
            let f = src.pressure(beta).map_err(|e| e.to_string())?;
            worst_linear = worst_linear.max((f - beta * c).abs());
        }
        for u in [Observable::sawtooth(), Observable::coin(), Observable::constant(c)] {
            let src = UlamPressure::new(&map, &u, 1024).map_err(|e| e.to_string())?;
            worst_zero = worst_zero.max(src.pressure(0.0).map_err(|e| e.to_string())?.abs());
        }
    }
    Ok((
        worst_linear < 1e-8 && worst_zero < 1e-10,
        format!("max |F(b) - bc| = {worst_linear:.2e}, max |F(0)| = {worst_zero:.2e}"),
    ))
}

fn c3_green_kubo() -> Outcome {
    let d = PiecewiseMap::doubling();
    // oracle: C_j = ∫ (x - 1/2)(f^j x - 1/2) dx, a quadratic on each of the
    // 2^j dyadic cells, so five-point Gauss-Legendre per cell is exact;
    // the tail beyond j = 20 is below 1e-6
    let mut oracle = 0.0;
    for j in 0..=20u32 {
        let cells = 1usize << j;
        let width = 1.0 / cells as f64;
        let cj: f64 = (0..cells)
            .map(|c| {
                let a = c as f64 * width;
                gauss_legendre5(|x| (x - 0.5) * ((x - a) * cells as f64 - 0.5), a, a + width)
            })
            .sum();
        oracle += if j == 0 { cj } else { 2.0 * cj };
    }
    let est = green_kubo_sigma2(&d, &Observable::sawtooth(), Sigma2Method::Quadrature { resolution: 4096 })
        .map_err(|e| e.to_string())?
        .value;
    let cob = Observable::coboundary_named(&d, "identity").map_err(|e| e.to_string())?;
    let cob_s2 = green_kubo_sigma2(&d, &cob, Sigma2Method::Quadrature { resolution: 4096 })
        .map_err(|e| e.to_string())?
        .value;
    let rel = (est - 0.25).abs() / 0.25;
    let oracle_rel = (oracle - 0.25).abs() / 0.25;
    Ok((
        rel < 0.02 && oracle_rel < 0.02 && (est - oracle).abs() / oracle < 0.02 && cob_s2 < 1e-6,
        format!("sigma2 = {est:.6} (oracle {oracle:.6}), coboundary sigma2 = {cob_s2:.2e}"),
    ))
}

fn c4_kantorovich() -> Outcome {
    let mut worst: f64 = 0.0;
    for s in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(trajectory_seed(BASE_SEED, s as usize));
        let m = rng.random_range(1..=40);
        let atoms: Vec<(f64, f64)> = (0..m)
            .map(|_| (rng.random_range(-3.0..3.0), rng.random_range(0.1..1.0)))
            .collect();
        let emp = WeightedEmpiricalMeasure::from_atoms(atoms).map_err(|e| e.to_string())?;
        let sigma = rng.random_range(0.3..2.0);
        let law: Box<dyn Law> = if s % 2 == 0 {
            Box::new(GaussianLaw::new(sigma).map_err(|e| e.to_string())?)
        } else {
            Box::new(HalfGaussianLaw::new(sigma).map_err(|e| e.to_string())?)
        };
        let closed = kantorovich(&emp, law.as_ref()).map_err(|e| e.to_string())?;
        let brute = kantorovich_bruteforce(&emp, law.as_ref(), 10.0 * (sigma + 3.0), 1e-12).map_err(|e| e.to_string())?;
        worst = worst.max((closed - brute).abs());
    }
    let n01 = GaussianLaw::new(1.0).map_err(|e| e.to_string())?;
    let dirac = WeightedEmpiricalMeasure::from_atoms(vec![(0.0, 1.0)]).map_err(|e| e.to_string())?;
    let k0 = kantorovich(&dirac, &n01).map_err(|e| e.to_string())?;
    let two = WeightedEmpiricalMeasure::from_atoms(vec![(-1.0, 1.0), (1.0, 1.0)]).map_err(|e| e.to_string())?;
    let k2 = kantorovich(&two, &n01).map_err(|e| e.to_string())?;
    let ok = worst < 1e-8 && (k0 - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-9 && (k2 - 0.535359).abs() < 1e-6;
    Ok((
        ok,
        format!("max |closed - quadrature| = {worst:.2e}, k(delta0) = {k0:.12} (sqrt(2/pi) = 0.797885), two-atom = {k2:.12} (target 0.535359)"),
    ))
}

fn c5_asclt() -> Outcome {
    let start = Instant::now();
    let d = PiecewiseMap::doubling();
    let runs = asclt_seeds(&d, &Observable::sawtooth(), 0.25, 100_000, BASE_SEED, 10, &[1000, 100_000])
        .map_err(|e| e.to_string())?;
    let (m0, m1) = (median_kappa(&runs, 0), median_kappa(&runs, 1));
    let below = runs.iter().filter(|r| r.kappa_values[1] < 0.1).count();
    let secs = start.elapsed().as_secs_f64();
    Ok((
        m1 < m0 && below >= 9 && secs < 120.0,
        format!("median kappa {m0:.4} -> {m1:.4}, kappa(1e5) < 0.1 for {below}/10 seeds, {secs:.1} s"),
    ))
}

fn c6_maxima() -> Outcome {
    let d = PiecewiseMap::doubling();
    let runs = maxima_seeds(&d, &Observable::coin(), 0.25, 100_000, BASE_SEED, 10, &[100_000])
        .map_err(|e| e.to_string())?;
    let below = runs.iter().filter(|r| r.kappa_values[0] < 0.15).count();
    let shifted = Observable::coin().centered(-0.5);
    let (e, m) = empirical_measures(&d, &shifted, 10_000, BASE_SEED).map_err(|e| e.to_string())?;
    let same = e.normalized().map_err(|e| e.to_string())? == m.normalized().map_err(|e| e.to_string())?;
    let kappas: Vec<String> = runs.iter().map(|r| format!("{:.3}", r.kappa_values[0])).collect();
    Ok((
        below >= 9 && same,
        format!("kappa < 0.15 for {below}/10 seeds [{}], M_n = E_n for u >= 0: {same}", kappas.join(" ")),
    ))
}

fn c7_erdos_renyi() -> Outcome {
    let d = PiecewiseMap::doubling();
    let level = coin_level(0.2)?;
    let ks = [50, 100, 200];
    let runs = er_law_seeds(&d, &Observable::coin(), level, &ks, BASE_SEED, 20).map_err(|e| e.to_string())?;
    let envelope: Vec<f64> = (0..ks.len())
        .map(|i| runs.iter().map(|r| (r.averages[i] - 0.2).abs()).fold(0.0, f64::max))
        .collect();
    let shrinking = envelope.windows(2).all(|w| w[1] < w[0]);
    let inside: usize = runs.iter().map(|r| r.inside_band(0.5).iter().filter(|b| **b).count()).sum();
    let total = runs.len() * ks.len();
    let mean_fluct: Vec<String> = (0..ks.len())
        .map(|i| format!("{:.3}", runs.iter().map(|r| r.fluctuations[i]).sum::<f64>() / runs.len() as f64))
        .collect();
    Ok((
        shrinking && inside as f64 >= 0.9 * total as f64,
        format!(
            "max|M_k/k - a| = {:?}, inside band {inside}/{total}, band = ±{:.3}, mean fluctuation [{}]",
            envelope.iter().map(|e| format!("{e:.4}")).collect::<Vec<_>>(),
            1.5 * runs[0].band,
            mean_fluct.join(" ")
        ),
    ))
}

fn c8_rate_curve() -> Outcome {
    let d = PiecewiseMap::doubling();
    let values = trajectory_values(&d, &Observable::coin(), 1 << 20, BASE_SEED).map_err(|e| e.to_string())?;
    let ks: Vec<usize> = (1..=40).map(|i| 25 * i).collect();
    let est = rate_estimator(&values, &ks).map_err(|e| e.to_string())?;
    let mut worst = (0.0, 0, 0.0);
    let mut used = 0;
    for (&k, &(m, r)) in est.k_values.iter().zip(&est.points) {
        if (0.1..=0.35).contains(&m) {
            let rel = (r - bernoulli_phi(m)) / bernoulli_phi(m);
            if rel.abs() > f64::abs(worst.0) {
                worst = (rel, k, m);
            }
            used += 1;
        }
    }
    Ok((
        used > 0 && worst.0.abs() <= 0.15,
        format!(
            "{used} levels in [0.1, 0.35], worst relative error in phi {:+.1}% at k = {} (m = {:.4})",
            100.0 * worst.0,
            worst.1,
            worst.2
        ),
    ))
}

fn c9_ld_estimate() -> Outcome {
    let d = PiecewiseMap::doubling();
    let level = coin_level(0.2)?;
    let mut ratios = Vec::new();
    let mut k100 = None;
    let mut desc = Vec::new();
    for k in [50usize, 100, 200, 400] {
        let est = ld_probability_mc(&d, &Observable::coin(), level, k, 1_000_000, BASE_SEED, LdMethod::Auto)
            .map_err(|e| e.to_string())?;
        desc.push(format!("k={k}: {:.3} ({:?})", est.normalized_ratio, est.method));
        ratios.push(est.normalized_ratio);
        if k == 100 {
            k100 = Some(est);
        }
    }
    let spread = ratios.iter().copied().fold(0.0, f64::max) / ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let est = k100.expect("k = 100 run");
    let exact = log_binomial_tail(100, 70).exp();
    let covered = est.ci_lo <= exact && exact <= est.ci_hi;
    Ok((
        spread < 10.0 && covered,
        format!(
            "ratios [{}], max/min = {spread:.3}; k=100 P = {:.4e} CI [{:.4e}, {:.4e}] vs exact {exact:.4e}",
            desc.join(", "),
            est.p_hat,
            est.ci_lo,
            est.ci_hi
        ),
    ))
}

fn c10_entropy() -> Outcome {
    let d = PiecewiseMap::doubling();
    let h = invariant_density(&d, 1024).map_err(|e| e.to_string())?;
    let ln2 = std::f64::consts::LN_2;
    let mut smb_dev: f64 = 0.0;
    for s in 0..10 {
        let t = entropy_trace(&d, &h, 50, trajectory_seed(BASE_SEED, s), false, 1 << 30).map_err(|e| e.to_string())?;
        for (k, v) in t.minus_log_mu.iter().enumerate() {
            smb_dev = smb_dev.max((v / (k + 1) as f64 - ln2).abs());
        }
    }
    let mut total = 0.0;
    let mut count = 0;
    for s in 0..100 {
        let t = entropy_trace(&d, &h, 20, trajectory_seed(BASE_SEED, s), true, 1 << 30).map_err(|e| e.to_string())?;
        if let Some(lr) = t.log_return[19] {
            total += lr / 20.0;
            count += 1;
        }
    }
    let ow = total / count as f64;
    let three = PiecewiseMap::full_linear(&[3.0, 3.0, 3.0]).map_err(|e| e.to_string())?;
    let h3 = invariant_density(&three, 729).map_err(|e| e.to_string())?;
    let rok = rokhlin_entropy(&three, &h3);
    let ok = smb_dev < 1e-12 && count == 100 && (ow - ln2).abs() / ln2 < 0.1 && (rok - 3f64.ln()).abs() < 1e-6;
    Ok((
        ok,
        format!(
            "max |SMB - log 2| = {smb_dev:.1e}, OW mean = {ow:.4} ({:+.1}%), Rokhlin(slope 3) - log 3 = {:.1e}",
            100.0 * (ow / ln2 - 1.0),
            rok - 3f64.ln()
        ),
    ))
}

fn c11_sandwich() -> Outcome {
    let d = PiecewiseMap::doubling();
    let params = EntropyParams {
        resolution: 1024,
        ..EntropyParams::default()
    };
    let s = sandwich_check(&d, 20, BASE_SEED, 1000, 1.0, &params).map_err(|e| e.to_string())?;
    let freq = s.violation_frequency();
    Ok((
        freq <= 0.05 && (s.mean_r_mu - 1.0).abs() < 0.1,
        format!(
            "violations {:.2}%, mean R_n mu = {:.4}, censored {}",
            100.0 * freq,
            s.mean_r_mu,
            s.censored
        ),
    ))
}

const MAIN_CONFIG: &str = "\
[map]
name = doubling
[observable]
name = coin
[run]
seeds = 3, 4
horizon = 5000
checkpoints = 1000, 5000
[transfer]
resolution = 256
beta_max = 2.0
beta_step = 0.25
sigma2_method = orbit
orbit_length = 20000
max_lag = 16
[erdos_renyi]
alpha = 0.35
k_grid = 10, 20, 30
rate_length = 16384
rate_k_grid = 10, 20, 40, 80
[ld]
alpha = 0.2
k_grid = 10, 20
trials = 20000
decoupling_k = 10
r_grid = 0, 5, 10
";

const ENTROPY_CONFIG: &str = "\
[map]
name = full-linear
slopes = 2, 4, 4
[observable]
name = sawtooth
[run]
seeds = 5, 6
[transfer]
resolution = 256
[entropy]
horizon = 400
checkpoints = 100, 400
";

fn csv_files(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(|e| e.to_string())? {
        let p = entry.map_err(|e| e.to_string())?.path();
        if p.extension().is_some_and(|e| e == "csv") {
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            out.insert(name, fs::read(&p).map_err(|e| e.to_string())?);
        }
    }
    Ok(out)
}

fn c12_determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut compared = 0;
    let mut mismatches = Vec::new();
    for sub in Subcommand::ALL {
        let text = if matches!(sub, Subcommand::EntropySmb | Subcommand::EntropyOw) {
            ENTROPY_CONFIG
        } else {
            MAIN_CONFIG
        };
        let mut outputs = Vec::new();
        for (rep, threads) in [(0, 1), (1, 3)] {
            let mut cfg = parse_config(text).map_err(|e| format!("{e:?}"))?;
            let dir = tmp.path().join(format!("{}-{rep}", sub.name()));
            cfg.output_dir = dir.to_string_lossy().into_owned();
            cfg.threads = Some(threads);
            run(sub, &cfg).map_err(|e| format!("{sub}: {e}"))?;
            outputs.push(csv_files(&dir)?);
        }
        if outputs[0].is_empty() || outputs[0] != outputs[1] {
            mismatches.push(sub.name());
        }
        compared += outputs[0].len();
    }
    Ok((
        mismatches.is_empty(),
        format!("{compared} CSV files compared across 10 subcommands (1 vs 3 threads), mismatches: {mismatches:?}"),
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("invariant density", c1_density),
        ("pressure exactness", c2_pressure),
        ("Green-Kubo oracle", c3_green_kubo),
        ("Kantorovich oracle equivalence", c4_kantorovich),
        ("ASCLT at desk scale", c5_asclt),
        ("maxima ASCLT at desk scale", c6_maxima),
        ("Erdos-Renyi law", c7_erdos_renyi),
        ("rate estimator", c8_rate_curve),
        ("large-deviation estimate", c9_ld_estimate),
        ("entropy", c10_entropy),
        ("sandwich", c11_sandwich),
        ("determinism", c12_determinism),
    ];
    let mut passed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (ok, detail) = match check() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        passed += usize::from(ok);
        println!(
            "{} criterion {:>2} ({name}): {detail} [{:.1} s]",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {passed}/{} criteria passed", criteria.len());
    if passed != criteria.len() {
        std::process::exit(1);
    }
}
