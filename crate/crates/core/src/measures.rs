//! Log-weighted empirical measures, their limit laws, and the Kantorovich
//! (Wasserstein-1) distance `κ(P, Q) = ∫ |F_P(x) - F_Q(x)| dx`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::io::Write;

use libm::erfc;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quad::adaptive_gk15;

/// Atoms `(position, weight)` with weight `1/k` for the `k`-th pushed value,
/// normalized by `D_n = Σ_{k≤n} 1/k`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WeightedEmpiricalMeasure {
    atoms: Vec<(f64, f64)>,
    normalizer: f64,
}

impl WeightedEmpiricalMeasure {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        WeightedEmpiricalMeasure {
            atoms: Vec::with_capacity(n),
            normalizer: 0.0,
        }
    }

    /// Appends the next statistic with weight `1/k`.
    pub fn push(&mut self, value: f64) {
        let w = 1.0 / (self.atoms.len() + 1) as f64;
        self.atoms.push((value, w));
        self.normalizer += w;
    }

    /// Arbitrary positive weights; the normalizer is their sum.
    pub fn from_atoms(atoms: Vec<(f64, f64)>) -> Result<Self> {
        if let Some(&(_, w)) = atoms.iter().find(|a| !(a.1 > 0.0) || !a.1.is_finite()) {
            return Err(Error::InvalidArgument(format!("atom weight must be positive, got {w}")));
        }
        let normalizer = atoms.iter().map(|a| a.1).sum();
        Ok(WeightedEmpiricalMeasure { atoms, normalizer })
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `D_n`.
    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    /// Sorted atoms, coincident positions merged, weights summing to 1.
    pub fn normalized(&self) -> Result<Vec<(f64, f64)>> {
        if self.atoms.is_empty() {
            return Err(Error::InvalidArgument("empty measure".into()));
        }
        if let Some(&(x, _)) = self.atoms.iter().find(|a| !a.0.is_finite()) {
            return Err(Error::NonFinite(x));
        }
        let mut sorted = self.atoms.clone();
        sorted.par_sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(sorted.len());
        for (x, w) in sorted {
            match merged.last_mut() {
                Some(last) if last.0 == x => last.1 += w,
                _ => merged.push((x, w)),
            }
        }
        let total: f64 = merged.iter().map(|a| a.1).sum();
        merged.iter_mut().for_each(|a| a.1 /= total);
        Ok(merged)
    }

    /// Writes `position,weight` rows (normalized weights, merged atoms).
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::InvalidArgument(format!("csv: {e}"));
        w.write_record(["position", "weight"]).map_err(io)?;
        for (x, p) in self.normalized()? {
            w.write_record([format!("{x:.16e}"), format!("{p:.16e}")]).map_err(io)?;
        }
        w.flush().map_err(|e| Error::InvalidArgument(format!("csv: {e}")))
    }
}

/// `𝓔_n = (1/D_n) Σ_{k≤n} (1/k) δ_{v_k}` from a stream of statistics.
pub fn build_empirical(values: impl IntoIterator<Item = f64>) -> WeightedEmpiricalMeasure {
    let mut m = WeightedEmpiricalMeasure::new();
    values.into_iter().for_each(|v| m.push(v));
    m
}

/// A probability law on the line with enough structure for the closed-form
/// Kantorovich distance.
pub trait Law: Sync {
    fn cdf(&self, x: f64) -> f64;

    /// `∫_a^b F(x) dx`.
    fn cdf_integral(&self, a: f64, b: f64) -> f64;

    /// `∫_a^b (1 - F(x)) dx`.
    fn survival_integral(&self, a: f64, b: f64) -> f64 {
        (b - a) - self.cdf_integral(a, b)
    }

    /// `∫_{-∞}^a F(x) dx`.
    fn lower_tail(&self, a: f64) -> f64;

    /// `∫_b^∞ (1 - F(x)) dx`.
    fn upper_tail(&self, b: f64) -> f64;

    /// Length scale used to size brute-force integration windows.
    fn scale(&self) -> f64;

    /// Points where the CDF is not smooth; brute-force quadrature splits there.
    fn kinks(&self) -> Vec<f64> {
        Vec::new()
    }
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z * FRAC_1_SQRT_2)
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// `Ψ(x) = ∫_{-∞}^x Φ(t/σ) dt = x Φ(x/σ) + σ φ(x/σ)`.
fn gauss_antiderivative(x: f64, sigma: f64) -> f64 {
    let z = x / sigma;
    x * std_normal_cdf(z) + sigma * std_normal_pdf(z)
}

/// Centered normal law `𝓝(0, σ²)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianLaw {
    pub sigma: f64,
}

impl GaussianLaw {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
        }
        Ok(GaussianLaw { sigma })
    }
}

impl Law for GaussianLaw {
    fn cdf(&self, x: f64) -> f64 {
        std_normal_cdf(x / self.sigma)
    }

    fn cdf_integral(&self, a: f64, b: f64) -> f64 {
        gauss_antiderivative(b, self.sigma) - gauss_antiderivative(a, self.sigma)
    }

    fn survival_integral(&self, a: f64, b: f64) -> f64 {
        gauss_antiderivative(-a, self.sigma) - gauss_antiderivative(-b, self.sigma)
    }

    fn lower_tail(&self, a: f64) -> f64 {
        gauss_antiderivative(a, self.sigma)
    }

    fn upper_tail(&self, b: f64) -> f64 {
        gauss_antiderivative(-b, self.sigma)
    }

    fn scale(&self) -> f64 {
        self.sigma
    }
}

/// `𝓖(σ)`: law of `σ · sup_{t≤1} B_t`, density `√(2/π)/σ · e^{-x²/(2σ²)}` on `x > 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HalfGaussianLaw {
    pub sigma: f64,
}

impl HalfGaussianLaw {
    pub fn new(sigma: f64) -> Result<Self> {
        GaussianLaw::new(sigma).map(|g| HalfGaussianLaw { sigma: g.sigma })
    }

    pub fn density(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            2.0 * std_normal_pdf(x / self.sigma) / self.sigma
        }
    }

    // ∫_0^x F for x ≥ 0
    fn from_zero(&self, x: f64) -> f64 {
        2.0 * (gauss_antiderivative(x, self.sigma) - gauss_antiderivative(0.0, self.sigma)) - x
    }
}

impl Law for HalfGaussianLaw {
    fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            1.0 - erfc(x / self.sigma * FRAC_1_SQRT_2)
        }
    }

    fn cdf_integral(&self, a: f64, b: f64) -> f64 {
        self.from_zero(b.max(0.0)) - self.from_zero(a.max(0.0))
    }

    fn survival_integral(&self, a: f64, b: f64) -> f64 {
        self.upper_tail(a) - self.upper_tail(b)
    }

    fn lower_tail(&self, a: f64) -> f64 {
        self.from_zero(a.max(0.0))
    }

    fn upper_tail(&self, b: f64) -> f64 {
        if b >= 0.0 {
            2.0 * gauss_antiderivative(-b, self.sigma)
        } else {
            -b + 2.0 * gauss_antiderivative(0.0, self.sigma)
        }
    }

    fn scale(&self) -> f64 {
        self.sigma
    }

    fn kinks(&self) -> Vec<f64> {
        vec![0.0]
    }
}

/// Point mass `δ_b`, used as a comparison law in tests.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiracLaw {
    pub at: f64,
}

impl Law for DiracLaw {
    fn cdf(&self, x: f64) -> f64 {
        if x >= self.at {
            1.0
        } else {
            0.0
        }
    }

    fn cdf_integral(&self, a: f64, b: f64) -> f64 {
        (b - a.max(self.at)).max(0.0)
    }

    fn survival_integral(&self, a: f64, b: f64) -> f64 {
        (b.min(self.at) - a).max(0.0)
    }

    fn lower_tail(&self, a: f64) -> f64 {
        (a - self.at).max(0.0)
    }

    fn upper_tail(&self, b: f64) -> f64 {
        (self.at - b).max(0.0)
    }

    fn scale(&self) -> f64 {
        self.at.abs().max(1.0)
    }

    fn kinks(&self) -> Vec<f64> {
        vec![self.at]
    }
}

/// Law with a piecewise-linear CDF through `(x_i, F_i)`, `F_0 = 0`, `F_last = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct InterpolatedLaw {
    knots: Vec<(f64, f64)>,
}

impl InterpolatedLaw {
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        let ok = knots.len() >= 2
            && knots.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 <= w[1].1)
            && knots[0].1 == 0.0
            && knots[knots.len() - 1].1 == 1.0;
        if !ok {
            return Err(Error::InvalidArgument(
                "knots must have increasing positions and a CDF rising from 0 to 1".into(),
            ));
        }
        Ok(InterpolatedLaw { knots })
    }

    /// Linear interpolation of an empirical CDF through the midpoints of its
    /// jumps, pinned to 0 at the first atom and 1 at the last.
    pub fn from_measure(m: &WeightedEmpiricalMeasure) -> Result<Self> {
        let atoms = m.normalized()?;
        let last = atoms.len() - 1;
        let mut cum = 0.0;
        let knots = atoms
            .iter()
            .enumerate()
            .map(|(i, &(x, w))| {
                let v = match i {
                    0 => 0.0,
                    i if i == last => 1.0,
                    _ => cum + 0.5 * w,
                };
                cum += w;
                (x, v)
            })
            .collect();
        Self::new(knots)
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }
}

impl Law for InterpolatedLaw {
    fn cdf(&self, x: f64) -> f64 {
        let k = &self.knots;
        let i = k.partition_point(|p| p.0 <= x);
        if i == 0 {
            return 0.0;
        }
        if i == k.len() {
            return 1.0;
        }
        let (x0, f0) = k[i - 1];
        let (x1, f1) = k[i];
        f0 + (f1 - f0) * (x - x0) / (x1 - x0)
    }

    fn cdf_integral(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let k = &self.knots;
        let (first, last) = (k[0].0, k[k.len() - 1].0);
        let mut acc = (b - a.max(last)).max(0.0);
        let (lo, hi) = (a.max(first), b.min(last));
        if hi > lo {
            let mut x = lo;
            let start = k.partition_point(|p| p.0 <= lo);
            for j in start..k.len() {
                let y = k[j].0.min(hi);
                acc += 0.5 * (self.cdf(x) + self.cdf(y)) * (y - x);
                x = y;
                if y >= hi {
                    break;
                }
            }
        }
        acc
    }

    fn lower_tail(&self, a: f64) -> f64 {
        self.cdf_integral(self.knots[0].0, a)
    }

    fn upper_tail(&self, b: f64) -> f64 {
        let last = self.knots[self.knots.len() - 1].0;
        if b >= last {
            0.0
        } else {
            self.survival_integral(b, last)
        }
    }

    fn scale(&self) -> f64 {
        let k = &self.knots;
        k[0].0.abs().max(k[k.len() - 1].0.abs()).max(1.0)
    }

    fn kinks(&self) -> Vec<f64> {
        self.knots.iter().map(|k| k.0).collect()
    }
}

const CROSSING_TOL: f64 = 1e-13;

/// `∫_a^b |c - F|` when `c - F` has constant sign on `[a, b]`.
fn one_sided(law: &dyn Law, c: f64, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let fm = law.cdf(0.5 * (a + b));
    // pick the representation that avoids cancellation where F is near 1
    let v = if fm < 0.5 {
        c * (b - a) - law.cdf_integral(a, b)
    } else {
        law.survival_integral(a, b) - (1.0 - c) * (b - a)
    };
    if fm <= c {
        v.max(0.0)
    } else {
        (-v).max(0.0)
    }
}

fn segment(law: &dyn Law, c: f64, a: f64, b: f64) -> f64 {
    let (fa, fb) = (law.cdf(a), law.cdf(b));
    if !(fa < c && c < fb) {
        return one_sided(law, c, a, b);
    }
    let (mut lo, mut hi) = (a, b);
    while hi - lo > CROSSING_TOL * (1.0 + lo.abs().max(hi.abs())) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if law.cdf(mid) < c {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x = 0.5 * (lo + hi);
    one_sided(law, c, a, x) + one_sided(law, c, x, b)
}

/// Closed-form `κ(emp, law)`: on each inter-atom segment the empirical CDF is
/// a constant `c` and `∫|c - F|` is evaluated from antiderivatives of `F`,
/// split at the crossing `F = c`.
pub fn kantorovich(emp: &WeightedEmpiricalMeasure, law: &dyn Law) -> Result<f64> {
    let atoms = emp.normalized()?;
    let m = atoms.len();
    let mut levels = Vec::with_capacity(m);
    let mut cum = 0.0;
    for a in &atoms {
        cum += a.1;
        levels.push(cum);
    }
    let parts: Vec<f64> = (0..m - 1)
        .into_par_iter()
        .map(|i| segment(law, levels[i], atoms[i].0, atoms[i + 1].0))
        .collect();
    let mut total = law.lower_tail(atoms[0].0);
    for p in parts {
        total += p;
    }
    total += law.upper_tail(atoms[m - 1].0);
    Ok(total)
}

pub const BRUTEFORCE_BUDGET: usize = 2_000;

/// Independent route: adaptive Gauss–Kronrod on `|F_emp - F|` over
/// `[-R, R]`, one integral per inter-atom gap, plus the analytic law tails
/// outside the window.
pub fn kantorovich_bruteforce(emp: &WeightedEmpiricalMeasure, law: &dyn Law, cutoff: f64, tol: f64) -> Result<f64> {
    let atoms = emp.normalized()?;
    let reach = atoms.iter().map(|a| a.0.abs()).fold(0.0, f64::max);
    if cutoff < 10.0 * (law.scale() + reach) {
        return Err(Error::InvalidArgument(format!(
            "cutoff {cutoff} below 10 (scale + max|atom|) = {}",
            10.0 * (law.scale() + reach)
        )));
    }
    // segment boundaries: atoms and law kinks; the empirical CDF level on
    // each segment is the mass of atoms at or left of its start
    let mut points: Vec<(f64, f64)> = atoms.clone();
    points.extend(law.kinks().into_iter().filter(|k| k.abs() < cutoff).map(|k| (k, 0.0)));
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut cuts = vec![-cutoff];
    let mut levels = vec![0.0];
    let mut cum = 0.0;
    for &(x, w) in &points {
        cum += w;
        cuts.push(x);
        levels.push(cum);
    }
    cuts.push(cutoff);
    *levels.last_mut().unwrap() = 1.0;
    let per = tol / cuts.len() as f64;
    let parts: Vec<Result<f64>> = (0..cuts.len() - 1)
        .into_par_iter()
        .map(|i| {
            let c = levels[i];
            let (a, b) = (cuts[i], cuts[i + 1]);
            let f = |x: f64| (c - law.cdf(x)).abs();
            // the integrand kinks where F crosses c; a kink near an end of the
            // interval can hide between the outermost nodes, so break there
            match crossing(law, c, a, b) {
                Some(x) => Ok(adaptive_gk15(f, a, x, 0.5 * per, BRUTEFORCE_BUDGET)?
                    + adaptive_gk15(f, x, b, 0.5 * per, BRUTEFORCE_BUDGET)?),
                None => adaptive_gk15(f, a, b, per, BRUTEFORCE_BUDGET),
            }
        })
        .collect();
    let mut total = law.lower_tail(-cutoff);
    for p in parts {
        total += p?;
    }
    Ok(total + law.upper_tail(cutoff))
}

/// Point in `(a, b)` where the monotone `F` passes level `c`, by plain bisection.
fn crossing(law: &dyn Law, c: f64, a: f64, b: f64) -> Option<f64> {
    if !(law.cdf(a) < c && law.cdf(b) > c) {
        return None;
    }
    let (mut lo, mut hi) = (a, b);
    loop {
        let mid = 0.5 * (lo + hi);
        if !(lo < mid && mid < hi) {
            return Some(mid);
        }
        if law.cdf(mid) < c {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_normalizer() {
        let m = build_empirical([0.0, 0.0, 0.0]);
        assert!((m.normalizer() - 11.0 / 6.0).abs() < 1e-15);
        assert_eq!(m.normalized().unwrap(), vec![(0.0, 1.0)]);
        let one = build_empirical([2.0]);
        assert_eq!(one.normalizer(), 1.0);
        assert_eq!(one.atoms(), &[(2.0, 1.0)]);
    }

    #[test]
    fn harmonic_million() {
        let m = build_empirical((0..1_000_000).map(|_| 0.0));
        let gamma = 0.577_215_664_901_532_9;
        assert!((m.normalizer() - (1e6f64.ln() + gamma)).abs() < 1e-6);
        assert!((m.normalizer() - 14.392726).abs() < 1e-6);
    }

    #[test]
    fn cdf_values() {
        let g = GaussianLaw::new(1.0).unwrap();
        assert_eq!(g.cdf(0.0), 0.5);
        let h = HalfGaussianLaw::new(1.0).unwrap();
        assert_eq!(h.cdf(0.0), 0.0);
        let g2 = GaussianLaw::new(2.0).unwrap();
        assert!((g2.cdf(2.0) - 0.841_344_746_068_543).abs() < 1e-15);
        assert!((h.cdf(1.0) - (2.0 * 0.841_344_746_068_543 - 1.0)).abs() < 1e-15);
        assert!(GaussianLaw::new(0.0).is_err());
    }

    #[test]
    fn half_gaussian_density_normalized() {
        let h = HalfGaussianLaw::new(0.7).unwrap();
        let mass = adaptive_gk15(|x| h.density(x), 0.0, 40.0, 1e-14, 1000).unwrap();
        assert!((mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dirac_atom_at_zero() {
        let m = build_empirical([0.0]);
        let k = kantorovich(&m, &GaussianLaw::new(1.0).unwrap()).unwrap();
        assert!((k - (2.0 / PI).sqrt()).abs() < 1e-12);
        let k = kantorovich(&build_empirical([1.5]), &DiracLaw { at: -0.25 }).unwrap();
        assert!((k - 1.75).abs() < 1e-15);
    }

    #[test]
    fn two_atoms_match_quadrature() {
        let m = WeightedEmpiricalMeasure::from_atoms(vec![(-1.0, 1.0), (1.0, 1.0)]).unwrap();
        let g = GaussianLaw::new(1.0).unwrap();
        let a = kantorovich(&m, &g).unwrap();
        let b = kantorovich_bruteforce(&m, &g, 40.0, 1e-12).unwrap();
        assert!((a - b).abs() < 1e-10);
        assert!((a - 0.535_377_321_547_88).abs() < 1e-12, "{a}");
    }

    #[test]
    fn far_atom() {
        let m = build_empirical([1e6]);
        let g = GaussianLaw::new(1.0).unwrap();
        let k = kantorovich(&m, &g).unwrap();
        assert!((k - 1e6).abs() < 1.0);
        let b = kantorovich_bruteforce(&m, &g, 1.1e7, 1e-6).unwrap();
        assert!((k - b).abs() < 1e-3);
    }

    #[test]
    fn merges_coincident_atoms() {
        let m = WeightedEmpiricalMeasure::from_atoms(vec![(1.0, 1.0), (0.0, 2.0), (1.0, 1.0)]).unwrap();
        assert_eq!(m.normalized().unwrap(), vec![(0.0, 0.5), (1.0, 0.5)]);
    }

    #[test]
    fn rejects_nonfinite() {
        let m = build_empirical([f64::NAN]);
        assert!(matches!(kantorovich(&m, &DiracLaw { at: 0.0 }), Err(Error::NonFinite(_))));
        assert!(kantorovich(&WeightedEmpiricalMeasure::new(), &DiracLaw { at: 0.0 }).is_err());
    }

    #[test]
    fn interpolated_law_cdf() {
        let l = InterpolatedLaw::new(vec![(0.0, 0.0), (1.0, 0.5), (3.0, 1.0)]).unwrap();
        assert_eq!(l.cdf(0.5), 0.25);
        assert_eq!(l.cdf(2.0), 0.75);
        assert!((l.cdf_integral(-1.0, 4.0) - (0.25 + 1.5 + 1.0)).abs() < 1e-15);
        assert!((l.upper_tail(0.0) - (0.75 + 0.5)).abs() < 1e-15);
    }

    #[test]
    fn csv_export() {
        let mut buf = Vec::new();
        build_empirical([0.5, -0.5]).write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("position,weight\n-5.0000000000000000e-1,"));
    }
}
