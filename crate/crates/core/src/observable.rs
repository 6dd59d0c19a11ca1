//! Real observables on `[0, 1]` and their regularity data.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::maps::PiecewiseMap;

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Piecewise-constant representation: value `values[i]` on `[cuts[i], cuts[i+1])`.
#[derive(Clone, Debug, PartialEq)]
pub struct StepFunction {
    pub cuts: Vec<f64>,
    pub values: Vec<f64>,
}

impl StepFunction {
    fn eval(&self, x: f64) -> f64 {
        let inner = &self.cuts[1..self.cuts.len() - 1];
        self.values[inner.partition_point(|&c| c <= x)]
    }
}

/// A real function `u` on `[0, 1]` with a Lipschitz constant and/or a
/// total-variation bound. `eval` returns `u(x) - offset`, where `offset` is
/// set by [`Observable::centered`].
#[derive(Clone)]
pub struct Observable {
    name: String,
    func: RealFn,
    lipschitz_constant: Option<f64>,
    variation_bound: Option<f64>,
    offset: f64,
    steps: Option<StepFunction>,
}

impl fmt::Debug for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Observable")
            .field("name", &self.name)
            .field("lipschitz_constant", &self.lipschitz_constant)
            .field("variation_bound", &self.variation_bound)
            .field("offset", &self.offset)
            .finish()
    }
}

impl Observable {
    /// Wraps an arbitrary function. At least one regularity bound is required.
    pub fn custom(
        name: impl Into<String>,
        func: impl Fn(f64) -> f64 + Send + Sync + 'static,
        lipschitz_constant: Option<f64>,
        variation_bound: Option<f64>,
    ) -> Result<Self> {
        if lipschitz_constant.is_none() && variation_bound.is_none() {
            return Err(Error::InvalidArgument(
                "an observable needs a Lipschitz constant or a variation bound".into(),
            ));
        }
        if lipschitz_constant.is_some_and(|l| l < 0.0) || variation_bound.is_some_and(|v| v < 0.0) {
            return Err(Error::InvalidArgument("regularity bounds must be nonnegative".into()));
        }
        Ok(Observable {
            name: name.into(),
            func: Arc::new(func),
            lipschitz_constant,
            variation_bound,
            offset: 0.0,
            steps: None,
        })
    }

    /// Piecewise-constant observable with value `values[i]` on `[cuts[i], cuts[i+1])`.
    pub fn step(name: impl Into<String>, cuts: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if cuts.len() != values.len() + 1
            || cuts.first() != Some(&0.0)
            || cuts.last() != Some(&1.0)
            || cuts.windows(2).any(|w| !(w[0] < w[1]))
        {
            return Err(Error::InvalidArgument("step cuts must increase from 0 to 1, one more than values".into()));
        }
        let variation = values.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
        let lip = if values.windows(2).all(|w| w[0] == w[1]) {
            Some(0.0)
        } else {
            None
        };
        let steps = StepFunction { cuts, values };
        let s = steps.clone();
        Ok(Observable {
            name: name.into(),
            func: Arc::new(move |x| s.eval(x)),
            lipschitz_constant: lip,
            variation_bound: Some(variation),
            offset: 0.0,
            steps: Some(steps),
        })
    }

    pub fn constant(c: f64) -> Self {
        Self::step("constant", vec![0.0, 1.0], vec![c]).expect("constant observable is valid")
    }

    /// `u(x) = x - 1/2`.
    pub fn sawtooth() -> Self {
        Self::custom("sawtooth", |x| x - 0.5, Some(1.0), Some(1.0)).expect("valid")
    }

    /// `u = 1_{[1/2,1)} - 1/2`; a fair coin along doubling orbits.
    pub fn coin() -> Self {
        Self::step("coin", vec![0.0, 0.5, 1.0], vec![-0.5, 0.5]).expect("valid")
    }

    /// Uniform-cell table observable.
    pub fn table(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("empty table".into()));
        }
        let n = values.len();
        let mut cuts: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
        cuts.push(1.0);
        Self::step("table", cuts, values)
    }

    /// `u = log|f'|`. Piecewise constant for affine maps; otherwise the
    /// regularity bounds are measured on the check grid.
    pub fn log_derivative(map: &PiecewiseMap) -> Self {
        if map.is_piecewise_linear() {
            let values = (0..map.branch_count())
                .map(|i| map.branch_derivative(i, 0.0).abs().ln())
                .collect();
            let mut o = Self::step("log-deriv", map.breakpoints().to_vec(), values).expect("map breakpoints are valid cuts");
            o.name = "log-deriv".into();
            return o;
        }
        let m = map.clone();
        let f = move |x: f64| m.eval_unchecked(x).derivative.abs().ln();
        let (lip, var) = measure_regularity(&f, map.breakpoints());
        Observable {
            name: "log-deriv".into(),
            func: Arc::new(f),
            lipschitz_constant: Some(lip),
            variation_bound: Some(var),
            offset: 0.0,
            steps: None,
        }
    }

    /// Coboundary `v - v∘f` built from a Lipschitz function `v` with constant `v_lip`.
    pub fn coboundary(
        map: &PiecewiseMap,
        name: impl Into<String>,
        v: impl Fn(f64) -> f64 + Send + Sync + 'static,
        v_lip: f64,
    ) -> Self {
        let m = map.clone();
        let v = Arc::new(v);
        let f = move |x: f64| v(x) - v(m.apply(x));
        let (_, var) = measure_regularity(&f, map.breakpoints());
        Observable {
            name: name.into(),
            func: Arc::new(f),
            lipschitz_constant: None,
            variation_bound: Some(var.max(v_lip * (1.0 + map.expansion_constant()))),
            offset: 0.0,
            steps: None,
        }
    }

    /// Built-in coboundary generators by name: `identity`, `square`, `cos`.
    pub fn coboundary_named(map: &PiecewiseMap, v: &str) -> Result<Self> {
        let o = match v {
            "identity" => Self::coboundary(map, "coboundary(identity)", |x| x, 1.0),
            "square" => Self::coboundary(map, "coboundary(square)", |x| x * x, 2.0),
            "cos" => Self::coboundary(map, "coboundary(cos)", |x| (2.0 * PI * x).cos(), 2.0 * PI),
            other => return Err(Error::InvalidArgument(format!("unknown coboundary generator `{other}`"))),
        };
        Ok(o)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.func)(x) - self.offset
    }

    pub fn lipschitz_constant(&self) -> Option<f64> {
        self.lipschitz_constant
    }

    pub fn variation_bound(&self) -> Option<f64> {
        self.variation_bound
    }

    /// Amount subtracted from the raw function (its μ-mean once centered).
    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Returns `u - mean`.
    pub fn centered(&self, mean: f64) -> Self {
        let mut o = self.clone();
        o.offset += mean;
        o
    }

    /// Sup norm measured on a fine grid.
    pub fn sup_norm(&self) -> f64 {
        (0..=crate::maps::CHECK_GRID)
            .map(|g| self.eval((g as f64 / crate::maps::CHECK_GRID as f64).min(1.0 - f64::EPSILON)).abs())
            .fold(0.0, f64::max)
    }

    pub fn step_function(&self) -> Option<&StepFunction> {
        self.steps.as_ref()
    }

    /// Values of the observable on each branch interval of `map`, when it is
    /// constant there. Lets symbolic orbits skip point reconstruction.
    pub fn branch_values(&self, map: &PiecewiseMap) -> Option<Vec<f64>> {
        let steps = self.steps.as_ref()?;
        let bp = map.breakpoints();
        let mut out = Vec::with_capacity(map.branch_count());
        for i in 0..map.branch_count() {
            let (lo, hi) = (bp[i], bp[i + 1]);
            let mut value: Option<f64> = None;
            for (j, &v) in steps.values.iter().enumerate() {
                let (c0, c1) = (steps.cuts[j], steps.cuts[j + 1]);
                if c1 <= lo || c0 >= hi {
                    continue;
                }
                match value {
                    None => value = Some(v),
                    Some(w) if w == v => {}
                    Some(_) => return None,
                }
            }
            out.push(value? - self.offset);
        }
        Some(out)
    }
}

fn measure_regularity(f: &impl Fn(f64) -> f64, breakpoints: &[f64]) -> (f64, f64) {
    const PER: usize = 2_000;
    let mut lip = 0.0f64;
    let mut var = 0.0;
    for w in breakpoints.windows(2) {
        let (a, b) = (w[0], w[1]);
        let h = (b - a) / PER as f64;
        let mut prev = f(a);
        for s in 1..PER {
            let y = f(a + h * s as f64);
            lip = lip.max((y - prev).abs() / h);
            var += (y - prev).abs();
            prev = y;
        }
    }
    (lip, var)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_values() {
        let s = Observable::sawtooth();
        assert_eq!(s.eval(0.25), -0.25);
        let c = Observable::coin();
        assert_eq!(c.eval(0.3), -0.5);
        assert_eq!(c.eval(0.5), 0.5);
        assert_eq!(Observable::constant(2.5).eval(0.9), 2.5);
    }

    #[test]
    fn needs_regularity() {
        assert!(Observable::custom("u", |x| x, None, None).is_err());
        assert!(Observable::custom("u", |x| x, Some(-1.0), None).is_err());
    }

    #[test]
    fn centering_subtracts() {
        let u = Observable::sawtooth().centered(0.1);
        assert!((u.eval(0.5) + 0.1).abs() < 1e-15);
        assert!((u.offset() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn branch_values_on_doubling() {
        let d = PiecewiseMap::doubling();
        assert_eq!(Observable::coin().branch_values(&d), Some(vec![-0.5, 0.5]));
        assert_eq!(Observable::sawtooth().branch_values(&d), None);
        let three = PiecewiseMap::full_linear(&[3.0, 3.0, 3.0]).unwrap();
        assert_eq!(Observable::coin().branch_values(&three), None);
        let ld = Observable::log_derivative(&three);
        let v = ld.branch_values(&three).unwrap();
        assert!(v.iter().all(|&x| (x - 3f64.ln()).abs() < 1e-15));
    }

    #[test]
    fn coboundary_is_difference() {
        let d = PiecewiseMap::doubling();
        let u = Observable::coboundary_named(&d, "identity").unwrap();
        assert!((u.eval(0.3) - (0.3 - 0.6)).abs() < 1e-15);
        assert!(Observable::coboundary_named(&d, "nope").is_err());
    }

    #[test]
    fn log_derivative_smooth_map() {
        let m = PiecewiseMap::perturbed_doubling(0.2).unwrap();
        let u = Observable::log_derivative(&m);
        assert!((u.eval(0.0) - 2.4f64.ln()).abs() < 1e-12);
        assert!(u.lipschitz_constant().unwrap() > 0.0);
    }
}
