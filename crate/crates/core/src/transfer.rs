//! Ulam discretization of the weighted transfer operator
//! `(L_β v)(y) = Σ_{f(x)=y} v(x) e^{β u(x)} / |f'(x)|`
//! and the quantities derived from it: the invariant density, the pressure
//! `F(β) = log λ(β)`, its Legendre transform (the rate function) and the
//! Green–Kubo variance.
//!
//! The phase space is cut into `N` uniform cells. Entry `(i, j)` of the
//! matrix is `N ∫_{B_j ∩ f^{-1} B_i} e^{β u} dx`, so at `β = 0` the matrix is
//! column stochastic and its Perron vector is a density in cell averages.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::maps::{Branch, PiecewiseMap};
use crate::observable::Observable;
use crate::orbit::{Orbit, OrbitMode};
use crate::quad::gauss_legendre5;

pub const MIN_RESOLUTION: usize = 16;
pub const POWER_TOL: f64 = 1e-12;
pub const POWER_MAX_ITER: usize = 100_000;
/// Midpoint samples per cell for smooth branches.
pub const SMOOTH_SAMPLES: usize = 64;
/// Step of the central second difference used for `F''`.
pub const SECOND_DIFF_STEP: f64 = 1e-3;
const GOLDEN_TOL: f64 = 1e-10;

/// Nonnegative sparse matrix in compressed-column form.
#[derive(Clone, Debug)]
pub struct SparseMatrix {
    n: usize,
    col_ptr: Vec<usize>,
    rows: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    fn from_columns(n: usize, columns: Vec<Vec<(usize, f64)>>) -> Self {
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut rows = Vec::new();
        let mut values = Vec::new();
        col_ptr.push(0);
        for col in columns {
            for (r, v) in col {
                rows.push(r);
                values.push(v);
            }
            col_ptr.push(rows.len());
        }
        SparseMatrix {
            n,
            col_ptr,
            rows,
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let span = self.col_ptr[j]..self.col_ptr[j + 1];
        self.rows[span.clone()]
            .iter()
            .zip(&self.values[span])
            .find(|(&r, _)| r == i)
            .map_or(0.0, |(_, &v)| v)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for j in 0..self.n {
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                d[self.rows[k]][j] += self.values[k];
            }
        }
        d
    }

    pub fn column_sums(&self) -> Vec<f64> {
        (0..self.n)
            .map(|j| self.values[self.col_ptr[j]..self.col_ptr[j + 1]].iter().sum())
            .collect()
    }

    /// `out = A x`.
    pub fn mul(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for j in 0..self.n {
            let xj = x[j];
            if xj == 0.0 {
                continue;
            }
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                out[self.rows[k]] += self.values[k] * xj;
            }
        }
    }

    /// `out = Aᵀ x`.
    pub fn mul_transpose(&self, x: &[f64], out: &mut [f64]) {
        for j in 0..self.n {
            out[j] = (self.col_ptr[j]..self.col_ptr[j + 1])
                .map(|k| self.values[k] * x[self.rows[k]])
                .sum();
        }
    }
}

/// `∫_a^b e^{β u(x)} dx`, exact for step observables.
fn weight_integral(u: &Observable, beta: f64, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    if beta == 0.0 {
        return b - a;
    }
    if let Some(steps) = u.step_function() {
        let mut acc = 0.0;
        for (j, &v) in steps.values.iter().enumerate() {
            let lo = steps.cuts[j].max(a);
            let hi = steps.cuts[j + 1].min(b);
            if hi > lo {
                acc += (hi - lo) * (beta * (v - u.offset())).exp();
            }
        }
        return acc;
    }
    gauss_legendre5(|x| (beta * u.eval(x)).exp(), a, b)
}

/// `∫_a^b g(u(x)) dx` for a polynomial-like `g`, exact for step observables.
fn observable_integral(u: &Observable, a: f64, b: f64, g: impl Fn(f64) -> f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    if let Some(steps) = u.step_function() {
        let mut acc = 0.0;
        for (j, &v) in steps.values.iter().enumerate() {
            let lo = steps.cuts[j].max(a);
            let hi = steps.cuts[j + 1].min(b);
            if hi > lo {
                acc += (hi - lo) * g(v - u.offset());
            }
        }
        return acc;
    }
    gauss_legendre5(|x| g(u.eval(x)), a, b)
}

fn assemble_column(map: &PiecewiseMap, u: &Observable, beta: f64, n: usize, j: usize) -> Vec<(usize, f64)> {
    let nf = n as f64;
    let (l, r) = (j as f64 / nf, (j + 1) as f64 / nf);
    let mut entries: Vec<(usize, f64)> = Vec::new();
    let bp = map.breakpoints();
    for k in 0..map.branch_count() {
        let p = l.max(bp[k]);
        let q = r.min(bp[k + 1]);
        if q <= p {
            continue;
        }
        match &map.branches()[k] {
            Branch::Linear { .. } => {
                let (yp, yq) = (map.branch_value(k, p), map.branch_value(k, q));
                let (ylo, yhi) = (yp.min(yq).clamp(0.0, 1.0), yp.max(yq).clamp(0.0, 1.0));
                let first = ((ylo * nf).floor() as usize).min(n - 1);
                let last = ((yhi * nf).ceil() as usize).clamp(first + 1, n);
                for i in first..last {
                    let s0 = ylo.max(i as f64 / nf);
                    let s1 = yhi.min((i + 1) as f64 / nf);
                    if s1 <= s0 {
                        continue;
                    }
                    let x0 = map.branch_inverse(k, s0).expect("inside branch image");
                    let x1 = map.branch_inverse(k, s1).expect("inside branch image");
                    let (a, b) = (x0.min(x1).max(p), x0.max(x1).min(q));
                    let w = nf * weight_integral(u, beta, a, b);
                    if w > 0.0 {
                        entries.push((i, w));
                    }
                }
            }
            Branch::Smooth(_) => {
                let h = (r - l) / SMOOTH_SAMPLES as f64;
                for s in 0..SMOOTH_SAMPLES {
                    let x = l + (s as f64 + 0.5) * h;
                    if x < p || x >= q {
                        continue;
                    }
                    let y = map.branch_value(k, x).clamp(0.0, 1.0);
                    let i = ((y * nf) as usize).min(n - 1);
                    entries.push((i, (beta * u.eval(x)).exp() / SMOOTH_SAMPLES as f64));
                }
            }
        }
    }
    entries.sort_by_key(|e| e.0);
    let mut merged: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
    for (i, w) in entries {
        match merged.last_mut() {
            Some(last) if last.0 == i => last.1 += w,
            _ => merged.push((i, w)),
        }
    }
    merged
}

/// Outcome of a power iteration.
#[derive(Clone, Debug)]
struct PowerResult {
    eigenvalue: f64,
    vector: Vec<f64>,
    iterations: usize,
    residual: f64,
}

fn power_iterate(n: usize, apply: impl Fn(&[f64], &mut [f64])) -> Result<PowerResult> {
    let nf = n as f64;
    let mut v = vec![1.0; n];
    let mut w = vec![0.0; n];
    let mut lambda = 0.0f64;
    let mut residual = f64::INFINITY;
    for it in 1..=POWER_MAX_ITER {
        apply(&v, &mut w);
        let sum: f64 = w.iter().sum();
        if !(sum > 0.0) || !sum.is_finite() {
            return Err(Error::NoConvergence {
                iterations: it,
                residual,
            });
        }
        let new_lambda = sum / nf;
        // ||A v - λ v||_1 relative to ||λ v||_1, with v normalized to sum n
        residual = v
            .iter()
            .zip(&w)
            .map(|(a, b)| (b - new_lambda * a).abs())
            .sum::<f64>()
            / (new_lambda * nf);
        let scale = nf / sum;
        w.iter_mut().for_each(|x| *x *= scale);
        let change = (new_lambda - lambda).abs() / new_lambda;
        std::mem::swap(&mut v, &mut w);
        lambda = new_lambda;
        if residual < POWER_TOL && change < POWER_TOL {
            return Ok(PowerResult {
                eigenvalue: lambda,
                vector: v,
                iterations: it,
                residual,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: POWER_MAX_ITER,
        residual,
    })
}

/// Discretized weighted transfer operator with its leading eigendata.
#[derive(Clone, Debug)]
pub struct UlamOperator {
    resolution: usize,
    beta: f64,
    matrix: SparseMatrix,
    leading_eigenvalue: f64,
    right_vector: Vec<f64>,
    left_vector: Vec<f64>,
    iterations: usize,
    residual: f64,
}

impl UlamOperator {
    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn leading_eigenvalue(&self) -> f64 {
        self.leading_eigenvalue
    }

    /// Perron vector as cell values of a density (`Σ v_i / N = 1`).
    pub fn right_vector(&self) -> &[f64] {
        &self.right_vector
    }

    /// Left Perron vector, normalized to `Σ w_i / N = 1`.
    pub fn left_vector(&self) -> &[f64] {
        &self.left_vector
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }
}

/// Assembles the Ulam matrix of `L_β` on `n` cells and computes its leading
/// eigenvalue with right and left Perron vectors by power iteration.
pub fn ulam_matrix(map: &PiecewiseMap, u: &Observable, beta: f64, n: usize) -> Result<UlamOperator> {
    check_resolution(n)?;
    build_operator(map, u, beta, n)
}

fn check_resolution(n: usize) -> Result<()> {
    if n < MIN_RESOLUTION {
        return Err(Error::InvalidArgument(format!(
            "Ulam resolution must be at least {MIN_RESOLUTION}, got {n}"
        )));
    }
    Ok(())
}

fn build_operator(map: &PiecewiseMap, u: &Observable, beta: f64, n: usize) -> Result<UlamOperator> {
    let matrix = assemble(map, u, beta, n)?;
    let right = power_iterate(n, |x, out| matrix.mul(x, out))?;
    let left = power_iterate(n, |x, out| matrix.mul_transpose(x, out))?;
    Ok(UlamOperator {
        resolution: n,
        beta,
        leading_eigenvalue: right.eigenvalue,
        right_vector: right.vector,
        left_vector: left.vector,
        iterations: right.iterations,
        residual: right.residual,
        matrix,
    })
}

fn assemble(map: &PiecewiseMap, u: &Observable, beta: f64, n: usize) -> Result<SparseMatrix> {
    if !beta.is_finite() {
        return Err(Error::InvalidArgument(format!("beta must be finite, got {beta}")));
    }
    let columns: Vec<Vec<(usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|j| assemble_column(map, u, beta, n, j))
        .collect();
    Ok(SparseMatrix::from_columns(n, columns))
}

/// Leading eigenvalue only (skips the left vector).
fn leading_eigenvalue(map: &PiecewiseMap, u: &Observable, beta: f64, n: usize) -> Result<f64> {
    check_resolution(n)?;
    let matrix = assemble(map, u, beta, n)?;
    Ok(power_iterate(n, |x, out| matrix.mul(x, out))?.eigenvalue)
}

/// Invariant density as cell values on a uniform grid.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityTable {
    values: Vec<f64>,
}

impl DensityTable {
    pub fn from_values(values: Vec<f64>) -> Self {
        DensityTable { values }
    }

    /// Lebesgue density on `n` cells.
    pub fn uniform(n: usize) -> Self {
        DensityTable { values: vec![1.0; n] }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn resolution(&self) -> usize {
        self.values.len()
    }

    pub fn cell_width(&self) -> f64 {
        1.0 / self.values.len() as f64
    }

    /// `∫_lo^hi h dx` by exact cell-overlap summation.
    pub fn integrate(&self, lo: f64, hi: f64) -> f64 {
        let n = self.values.len();
        let nf = n as f64;
        let (lo, hi) = (lo.clamp(0.0, 1.0), hi.clamp(0.0, 1.0));
        if hi <= lo {
            return 0.0;
        }
        let first = ((lo * nf) as usize).min(n - 1);
        let last = ((hi * nf).ceil() as usize).clamp(first + 1, n);
        (first..last)
            .map(|i| {
                let a = lo.max(i as f64 / nf);
                let b = hi.min((i + 1) as f64 / nf);
                (b - a).max(0.0) * self.values[i]
            })
            .sum()
    }

    pub fn total_mass(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// `∫ u h dx`, with per-cell quadrature of `u`.
    pub fn mean(&self, u: &Observable) -> f64 {
        self.expect(u, |v| v)
    }

    /// `∫ g(u) h dx`.
    pub fn expect(&self, u: &Observable, g: impl Fn(f64) -> f64 + Copy) -> f64 {
        let nf = self.values.len() as f64;
        self.values
            .iter()
            .enumerate()
            .map(|(i, &h)| h * observable_integral(u, i as f64 / nf, (i + 1) as f64 / nf, g))
            .sum()
    }

    pub fn sup_deviation_from(&self, c: f64) -> f64 {
        self.values.iter().map(|h| (h - c).abs()).fold(0.0, f64::max)
    }
}

/// Invariant density `h` as the Perron vector of the `β = 0` Ulam matrix.
pub fn invariant_density(map: &PiecewiseMap, n: usize) -> Result<DensityTable> {
    let op = ulam_matrix(map, &Observable::constant(0.0), 0.0, n)?;
    Ok(DensityTable {
        values: op.right_vector,
    })
}

/// Subtracts the μ-mean of `u` computed with the Ulam density at resolution `n`.
pub fn center_observable(map: &PiecewiseMap, u: &Observable, n: usize) -> Result<Observable> {
    let h = invariant_density(map, n)?;
    Ok(u.centered(h.mean(u)))
}

/// Anything that can evaluate the pressure at an arbitrary `β`.
pub trait PressureSource: Send + Sync {
    fn pressure(&self, beta: f64) -> Result<f64>;
}

/// `F(β) = log λ(β) - log λ(0)` from the Ulam operator.
#[derive(Clone, Debug)]
pub struct UlamPressure {
    map: PiecewiseMap,
    u: Observable,
    resolution: usize,
    log_lambda0: f64,
}

impl UlamPressure {
    pub fn new(map: &PiecewiseMap, u: &Observable, resolution: usize) -> Result<Self> {
        let lambda0 = leading_eigenvalue(map, u, 0.0, resolution)?;
        Ok(UlamPressure {
            map: map.clone(),
            u: u.clone(),
            resolution,
            log_lambda0: lambda0.ln(),
        })
    }
}

impl PressureSource for UlamPressure {
    fn pressure(&self, beta: f64) -> Result<f64> {
        if beta == 0.0 {
            return Ok(0.0);
        }
        Ok(leading_eigenvalue(&self.map, &self.u, beta, self.resolution)?.ln() - self.log_lambda0)
    }
}

/// Closed-form pressure, mostly for tests and synthetic studies.
pub struct FnPressure<F>(pub F);

impl<F: Fn(f64) -> f64 + Send + Sync> PressureSource for FnPressure<F> {
    fn pressure(&self, beta: f64) -> Result<f64> {
        Ok((self.0)(beta))
    }
}

/// Pressure tabulated on a symmetric β grid, with access to its source for
/// off-grid refinement.
#[derive(Clone)]
pub struct PressureCurve {
    beta_grid: Vec<f64>,
    f_values: Vec<f64>,
    source: Arc<dyn PressureSource>,
    warnings: Vec<String>,
}

impl fmt::Debug for PressureCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PressureCurve")
            .field("beta_grid", &self.beta_grid)
            .field("f_values", &self.f_values)
            .field("warnings", &self.warnings)
            .finish()
    }
}

/// Symmetric grid `-max, -max+step, ..., max`.
pub fn symmetric_grid(max: f64, step: f64) -> Vec<f64> {
    let m = (max / step).round() as i64;
    (-m..=m).map(|i| i as f64 * step).collect()
}

fn check_symmetric(grid: &[f64]) -> Result<usize> {
    if grid.len() < 3 || grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidArgument("grid must be increasing with at least 3 points".into()));
    }
    let m = grid.len();
    if m % 2 == 0 || grid.iter().zip(grid.iter().rev()).any(|(a, b)| (a + b).abs() > 1e-12) {
        return Err(Error::InvalidArgument("grid must be symmetric about 0".into()));
    }
    Ok(m / 2)
}

impl PressureCurve {
    /// Tabulates `source` on `beta_grid`, keeping the largest symmetric range
    /// around 0 on which evaluation succeeds and the table stays convex.
    pub fn from_source(beta_grid: &[f64], source: Arc<dyn PressureSource>) -> Result<Self> {
        let center = check_symmetric(beta_grid)?;
        let results: Vec<Result<f64>> = beta_grid.par_iter().map(|&b| source.pressure(b)).collect();
        let mut warnings = Vec::new();
        let mut half = 0;
        while half < center {
            let (lo, hi) = (center - half - 1, center + half + 1);
            let (Ok(flo), Ok(fhi)) = (&results[lo], &results[hi]) else {
                let bad = if results[lo].is_err() { lo } else { hi };
                warnings.push(format!(
                    "pressure evaluation failed at beta = {}: {}; curve truncated to |beta| <= {}",
                    beta_grid[bad],
                    results[bad].as_ref().unwrap_err(),
                    beta_grid[center + half]
                ));
                break;
            };
            let convex = |i: usize, fl: f64, fr: f64| {
                let fm = *results[i].as_ref().unwrap();
                fl - 2.0 * fm + fr >= -1e-8
            };
            let inner_lo = *results[lo + 1].as_ref().unwrap();
            let inner_hi = *results[hi - 1].as_ref().unwrap();
            let ok_lo = convex(lo + 1, *flo, if lo + 2 <= center + half { *results[lo + 2].as_ref().unwrap() } else { inner_hi });
            let ok_hi = convex(hi - 1, if hi >= 2 + center - half { *results[hi - 2].as_ref().unwrap() } else { inner_lo }, *fhi);
            if !(ok_lo && ok_hi) {
                warnings.push(format!(
                    "discrete convexity lost at |beta| = {}; curve truncated",
                    beta_grid[hi]
                ));
                break;
            }
            half += 1;
        }
        if half == 0 {
            return Err(Error::InvalidArgument(
                "pressure could not be evaluated on any nontrivial symmetric range".into(),
            ));
        }
        let range = center - half..=center + half;
        Ok(PressureCurve {
            beta_grid: beta_grid[range.clone()].to_vec(),
            f_values: range.map(|i| *results[i].as_ref().unwrap()).collect(),
            source,
            warnings,
        })
    }

    pub fn from_fn(beta_grid: &[f64], f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Result<Self> {
        Self::from_source(beta_grid, Arc::new(FnPressure(f)))
    }

    pub fn beta_grid(&self) -> &[f64] {
        &self.beta_grid
    }

    pub fn f_values(&self) -> &[f64] {
        &self.f_values
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn source(&self) -> &Arc<dyn PressureSource> {
        &self.source
    }

    pub fn eval(&self, beta: f64) -> Result<f64> {
        self.source.pressure(beta)
    }

    /// Central second difference with step `1e-3`.
    pub fn second_derivative(&self, beta: f64) -> Result<f64> {
        let h = SECOND_DIFF_STEP;
        let (fm, f0, fp) = (self.eval(beta - h)?, self.eval(beta)?, self.eval(beta + h)?);
        Ok((fm - 2.0 * f0 + fp) / (h * h))
    }

    /// Smallest discrete second difference of the table.
    pub fn min_second_difference(&self) -> f64 {
        self.f_values
            .windows(3)
            .map(|w| w[0] - 2.0 * w[1] + w[2])
            .fold(f64::INFINITY, f64::min)
    }

    /// Range of `F'` on the grid, from one-sided end differences.
    pub fn derivative_range(&self) -> (f64, f64) {
        let b = &self.beta_grid;
        let f = &self.f_values;
        let m = b.len();
        (
            (f[1] - f[0]) / (b[1] - b[0]),
            (f[m - 1] - f[m - 2]) / (b[m - 1] - b[m - 2]),
        )
    }
}

/// `F(β)` on a symmetric grid, from the Ulam operator at resolution `n`.
pub fn pressure_curve(map: &PiecewiseMap, u: &Observable, beta_grid: &[f64], n: usize) -> Result<PressureCurve> {
    let source = UlamPressure::new(map, u, n)?;
    PressureCurve::from_source(beta_grid, Arc::new(source))
}

/// Tabulated Legendre pair `(α, φ(α), β(α) = φ'(α), σ²(α) = F''(β(α)))`.
#[derive(Clone, Debug, PartialEq)]
pub struct RateFunction {
    pub alpha_grid: Vec<f64>,
    pub phi_values: Vec<f64>,
    pub beta_of_alpha: Vec<f64>,
    pub sigma2_of_alpha: Vec<f64>,
}

impl RateFunction {
    fn index_of(&self, alpha: f64) -> Option<usize> {
        self.alpha_grid.iter().position(|&a| (a - alpha).abs() < 1e-12)
    }

    /// `φ(α)` at a grid point.
    pub fn phi_at(&self, alpha: f64) -> Option<f64> {
        self.index_of(alpha).map(|i| self.phi_values[i])
    }

    /// `β = φ'(α)` at a grid point, read from the maximizer.
    pub fn beta_at(&self, alpha: f64) -> Option<f64> {
        self.index_of(alpha).map(|i| self.beta_of_alpha[i])
    }

    pub fn sigma2_at(&self, alpha: f64) -> Option<f64> {
        self.index_of(alpha).map(|i| self.sigma2_of_alpha[i])
    }

    /// Legendre transform back to the pressure, `max_α (αβ - φ(α))`. Between
    /// grid points `φ` is the cubic Hermite interpolant with slopes `β(α)`.
    pub fn conjugate(&self, beta: f64) -> f64 {
        let a = &self.alpha_grid;
        let p = &self.phi_values;
        let s = &self.beta_of_alpha;
        let mut best = a
            .iter()
            .zip(p)
            .map(|(x, y)| x * beta - y)
            .fold(f64::NEG_INFINITY, f64::max);
        for i in 0..a.len().saturating_sub(1) {
            if !(s[i] <= beta && beta <= s[i + 1]) {
                continue;
            }
            let h = a[i + 1] - a[i];
            let hermite = |x: f64| {
                let t = (x - a[i]) / h;
                let (t2, t3) = (t * t, t * t * t);
                (2.0 * t3 - 3.0 * t2 + 1.0) * p[i]
                    + (t3 - 2.0 * t2 + t) * h * s[i]
                    + (-2.0 * t3 + 3.0 * t2) * p[i + 1]
                    + (t3 - t2) * h * s[i + 1]
            };
            if let Ok((_, v)) = golden_max(|x| Ok(x * beta - hermite(x)), a[i], a[i + 1]) {
                best = best.max(v);
            }
        }
        best
    }
}

fn golden_max(f: impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64) -> Result<(f64, f64)> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while b - a > GOLDEN_TOL {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    let x = 0.5 * (a + b);
    Ok((x, f(x)?))
}

/// Legendre transform `φ(α) = sup_β (αβ - F(β))` of a pressure curve: grid
/// maximum followed by golden-section refinement on the source.
pub fn legendre(curve: &PressureCurve, alpha_grid: &[f64]) -> Result<RateFunction> {
    let (lo, hi) = curve.derivative_range();
    if let Some(&alpha) = alpha_grid.iter().find(|&&a| !(a >= lo && a <= hi)) {
        return Err(Error::AlphaOutOfRange { alpha, lo, hi });
    }
    let betas = curve.beta_grid();
    let fs = curve.f_values();
    let points: Vec<(f64, f64, f64)> = alpha_grid
        .par_iter()
        .map(|&alpha| -> Result<(f64, f64, f64)> {
            let (i, _) = betas
                .iter()
                .zip(fs)
                .map(|(b, f)| alpha * b - f)
                .enumerate()
                .max_by(|x, y| x.1.total_cmp(&y.1))
                .expect("nonempty grid");
            let a = betas[i.saturating_sub(1)];
            let b = betas[(i + 1).min(betas.len() - 1)];
            let (beta, value) = golden_max(|bt| Ok(alpha * bt - curve.eval(bt)?), a, b)?;
            let sigma2 = curve.second_derivative(beta)?;
            Ok((value.max(0.0), beta, sigma2))
        })
        .collect::<Result<_>>()?;
    Ok(RateFunction {
        alpha_grid: alpha_grid.to_vec(),
        phi_values: points.iter().map(|p| p.0).collect(),
        beta_of_alpha: points.iter().map(|p| p.1).collect(),
        sigma2_of_alpha: points.iter().map(|p| p.2).collect(),
    })
}

/// How to compute the autocorrelations in the Green–Kubo series.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Sigma2Method {
    /// Iterate the `β = 0` Ulam operator on `u h`.
    Quadrature { resolution: usize },
    /// Empirical autocovariances of one long orbit, summed to `max_lag`.
    Orbit { length: usize, max_lag: usize, seed: u64 },
}

/// Green–Kubo variance with the correlation terms used.
#[derive(Clone, Debug, PartialEq)]
pub struct Sigma2Estimate {
    pub value: f64,
    /// `C_0, C_1, ...` as summed.
    pub correlations: Vec<f64>,
    /// True when `|σ²| <= 1e-8`: the CLT hypothesis `σ² ≠ 0` fails.
    pub degenerate: bool,
}

pub const DEGENERATE_SIGMA2: f64 = 1e-8;
const TRUNCATION_REL: f64 = 1e-9;
const MIN_TERMS: usize = 10;
const MAX_TERMS: usize = 10_000;

/// `σ² = C_0 + 2 Σ_{j≥1} C_j` with `C_j = ∫ u·(u∘f^j) dμ`.
pub fn green_kubo_sigma2(map: &PiecewiseMap, u: &Observable, method: Sigma2Method) -> Result<Sigma2Estimate> {
    let correlations = match method {
        Sigma2Method::Quadrature { resolution } => quadrature_correlations(map, u, resolution)?,
        Sigma2Method::Orbit { length, max_lag, seed } => orbit_correlations(map, u, length, max_lag, seed)?,
    };
    let value = correlations[0] + 2.0 * correlations[1..].iter().sum::<f64>();
    if value < -DEGENERATE_SIGMA2 {
        return Err(Error::Truncation(format!("negative variance {value:e}")));
    }
    Ok(Sigma2Estimate {
        value: value.max(0.0),
        degenerate: value.abs() <= DEGENERATE_SIGMA2,
        correlations,
    })
}

fn quadrature_correlations(map: &PiecewiseMap, u: &Observable, n: usize) -> Result<Vec<f64>> {
    let op = ulam_matrix(map, &Observable::constant(0.0), 0.0, n)?;
    let h = op.right_vector();
    let nf = n as f64;
    // cell averages of u, recentered so that Σ h_i ū_i = 0 exactly at this resolution
    let mut ubar: Vec<f64> = (0..n)
        .map(|i| nf * observable_integral(u, i as f64 / nf, (i + 1) as f64 / nf, |v| v))
        .collect();
    let mean = ubar.iter().zip(h).map(|(a, b)| a * b).sum::<f64>() / nf;
    ubar.iter_mut().for_each(|v| *v -= mean);

    let c0 = (0..n)
        .map(|i| h[i] * observable_integral(u, i as f64 / nf, (i + 1) as f64 / nf, |v| (v - mean) * (v - mean)))
        .sum::<f64>();
    let mut terms = vec![c0];
    if c0.abs() < 1e-15 {
        // u is μ-a.e. constant
        return Ok(terms);
    }
    let tol = TRUNCATION_REL * c0.abs();
    let mut w: Vec<f64> = ubar.iter().zip(h).map(|(a, b)| a * b).collect();
    let mut next = vec![0.0; n];
    let dot = |w: &[f64]| w.iter().zip(&ubar).map(|(a, b)| a * b).sum::<f64>() / nf;
    for j in 1..=MAX_TERMS {
        op.matrix().mul(&w, &mut next);
        std::mem::swap(&mut w, &mut next);
        let cj = dot(&w);
        terms.push(cj);
        if j >= MIN_TERMS && cj.abs() < tol {
            // certify the tail with one more term
            op.matrix().mul(&w, &mut next);
            let c_next = dot(&next);
            if c_next.abs() <= tol.max(cj.abs()) {
                return Ok(terms);
            }
        }
    }
    Err(Error::Truncation(format!(
        "correlations still above {tol:e} after {MAX_TERMS} terms"
    )))
}

fn orbit_correlations(map: &PiecewiseMap, u: &Observable, length: usize, max_lag: usize, seed: u64) -> Result<Vec<f64>> {
    if length <= 2 * max_lag + 1 {
        return Err(Error::InvalidArgument("orbit too short for the requested lags".into()));
    }
    let orbit = Orbit::new(map, seed, length, OrbitMode::default_for(map))?;
    let values: Vec<f64> = orbit.values(u).collect();
    let mean = values.iter().sum::<f64>() / length as f64;
    let centered: Vec<f64> = values.iter().map(|v| v - mean).collect();
    Ok((0..=max_lag)
        .into_par_iter()
        .map(|j| {
            let m = length - j;
            centered[..m].iter().zip(&centered[j..]).map(|(a, b)| a * b).sum::<f64>() / m as f64
        })
        .collect())
}
