//! Piecewise expanding maps of the unit interval.
//!
//! A [`PiecewiseMap`] is a partition `0 = a_0 < a_1 < ... < a_b = 1` together
//! with one monotone branch per interval `[a_i, a_{i+1})`. Branches are either
//! affine or smooth (given as a closure pair `f`, `f'`). Maps are immutable
//! once built and cheap to clone.
//!
//! The built-in zoo only contains maps known to be topologically mixing. For
//! user-supplied maps mixing is assumed, not checked.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Grid size used by the expansion and monotonicity checks.
pub const CHECK_GRID: usize = 10_000;

const BISECTION_TOL: f64 = 1e-14;
const IMAGE_SLACK: f64 = 1e-12;

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A smooth monotone branch given by its formula and derivative.
#[derive(Clone)]
pub struct SmoothBranch {
    pub label: String,
    value: RealFn,
    derivative: RealFn,
}

impl SmoothBranch {
    pub fn new(
        label: impl Into<String>,
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        derivative: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        SmoothBranch {
            label: label.into(),
            value: Arc::new(value),
            derivative: Arc::new(derivative),
        }
    }
}

impl fmt::Debug for SmoothBranch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothBranch").field("label", &self.label).finish()
    }
}

/// One branch of a piecewise map, defined on `[left, right]`.
#[derive(Clone, Debug)]
pub enum Branch {
    /// `f(x) = intercept + slope * (x - left)`.
    Linear { slope: f64, intercept: f64 },
    Smooth(SmoothBranch),
}

/// Serializable description of a map, used by configs and CLI runs.
#[derive(Clone, Debug, PartialEq)]
pub enum MapDescriptor {
    Doubling,
    Tent,
    /// Full-branch affine map; branch widths are `1/|slope|` and must sum to one.
    FullLinear { slopes: Vec<f64> },
    /// Affine branches on explicit breakpoints. Missing intercepts default to
    /// 0 for increasing and 1 for decreasing branches.
    Linear {
        breakpoints: Vec<f64>,
        slopes: Vec<f64>,
        intercepts: Option<Vec<f64>>,
    },
    /// `x -> 2x + (eps/pi) sin(2 pi x) mod 1`, two full smooth branches.
    PerturbedDoubling { eps: f64 },
}

impl MapDescriptor {
    pub fn name(&self) -> &'static str {
        match self {
            MapDescriptor::Doubling => "doubling",
            MapDescriptor::Tent => "tent",
            MapDescriptor::FullLinear { .. } => "full-linear",
            MapDescriptor::Linear { .. } => "linear",
            MapDescriptor::PerturbedDoubling { .. } => "perturbed-doubling",
        }
    }

    /// Parses a key-value block (`key = value` per line, `#` comments).
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidMap(format!("expected `key = value`, got `{line}`")))?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        Self::from_pairs(&pairs)
    }

    pub fn from_pairs(pairs: &[(String, String)]) -> Result<Self> {
        let get = |key: &str| pairs.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str());
        let list = |key: &str| -> Result<Option<Vec<f64>>> {
            get(key).map(|v| parse_real_list(v).map_err(Error::InvalidMap)).transpose()
        };
        let name = get("name").ok_or_else(|| Error::InvalidMap("missing `name`".into()))?;
        let desc = match name {
            "doubling" => MapDescriptor::Doubling,
            "tent" => MapDescriptor::Tent,
            "full-linear" => MapDescriptor::FullLinear {
                slopes: list("slopes")?.ok_or_else(|| Error::InvalidMap("full-linear needs `slopes`".into()))?,
            },
            "linear" => MapDescriptor::Linear {
                breakpoints: list("breakpoints")?
                    .ok_or_else(|| Error::InvalidMap("linear needs `breakpoints`".into()))?,
                slopes: list("slopes")?.ok_or_else(|| Error::InvalidMap("linear needs `slopes`".into()))?,
                intercepts: list("intercepts")?,
            },
            "perturbed-doubling" => MapDescriptor::PerturbedDoubling {
                eps: match get("eps") {
                    Some(v) => v
                        .parse()
                        .map_err(|_| Error::InvalidMap(format!("`eps` is not a real: {v}")))?,
                    None => 0.2,
                },
            },
            other => return Err(Error::InvalidMap(format!("unknown map `{other}`"))),
        };
        Ok(desc)
    }

    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let mut out = vec![("name".to_string(), self.name().to_string())];
        match self {
            MapDescriptor::Doubling | MapDescriptor::Tent => {}
            MapDescriptor::FullLinear { slopes } => out.push(("slopes".into(), format_real_list(slopes))),
            MapDescriptor::Linear {
                breakpoints,
                slopes,
                intercepts,
            } => {
                out.push(("breakpoints".into(), format_real_list(breakpoints)));
                out.push(("slopes".into(), format_real_list(slopes)));
                if let Some(c) = intercepts {
                    out.push(("intercepts".into(), format_real_list(c)));
                }
            }
            MapDescriptor::PerturbedDoubling { eps } => out.push(("eps".into(), format!("{eps:?}"))),
        }
        out
    }

    pub fn to_text(&self) -> String {
        self.to_pairs()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

pub(crate) fn parse_real_list(v: &str) -> std::result::Result<Vec<f64>, String> {
    let v = v.trim().trim_start_matches('[').trim_end_matches(']');
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',')
        .map(|s| {
            let s = s.trim();
            s.parse::<f64>().map_err(|_| format!("`{s}` is not a real number"))
        })
        .collect()
}

pub(crate) fn format_real_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ")
}

/// Result of evaluating a map at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub image: f64,
    pub branch: usize,
    pub derivative: f64,
}

/// A piecewise monotone, expanding map of `[0, 1)`.
#[derive(Clone, Debug)]
pub struct PiecewiseMap {
    descriptor: Option<MapDescriptor>,
    breakpoints: Vec<f64>,
    branches: Vec<Branch>,
    expansion_exponent: usize,
    expansion_constant: f64,
    dyadic_exact: bool,
}

/// Builds a map from its descriptor and validates it.
pub fn make_map(desc: &MapDescriptor) -> Result<PiecewiseMap> {
    let mut map = match desc {
        MapDescriptor::Doubling => PiecewiseMap::full_linear(&[2.0, 2.0])?,
        MapDescriptor::Tent => PiecewiseMap::linear(&[0.0, 0.5, 1.0], &[2.0, -2.0], None)?,
        MapDescriptor::FullLinear { slopes } => PiecewiseMap::full_linear(slopes)?,
        MapDescriptor::Linear {
            breakpoints,
            slopes,
            intercepts,
        } => PiecewiseMap::linear(breakpoints, slopes, intercepts.as_deref())?,
        MapDescriptor::PerturbedDoubling { eps } => PiecewiseMap::perturbed_doubling(*eps)?,
    };
    map.descriptor = Some(desc.clone());
    Ok(map)
}

impl PiecewiseMap {
    pub fn doubling() -> Self {
        make_map(&MapDescriptor::Doubling).expect("doubling map is valid")
    }

    pub fn tent() -> Self {
        make_map(&MapDescriptor::Tent).expect("tent map is valid")
    }

    /// Full-branch affine map with the given signed slopes. Branch `i` has
    /// width `1/|s_i|` and maps onto `[0, 1]`.
    pub fn full_linear(slopes: &[f64]) -> Result<Self> {
        if slopes.is_empty() {
            return Err(Error::InvalidMap("no slopes given".into()));
        }
        let total: f64 = slopes.iter().map(|s| 1.0 / s.abs()).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidMap(format!(
                "full-branch widths 1/|slope| sum to {total}, not 1"
            )));
        }
        let mut breakpoints = vec![0.0];
        let mut acc = 0.0;
        for s in &slopes[..slopes.len() - 1] {
            acc += 1.0 / s.abs();
            breakpoints.push(acc);
        }
        breakpoints.push(1.0);
        let mut map = Self::linear(&breakpoints, slopes, None)?;
        map.descriptor = Some(MapDescriptor::FullLinear {
            slopes: slopes.to_vec(),
        });
        Ok(map)
    }

    pub fn linear(breakpoints: &[f64], slopes: &[f64], intercepts: Option<&[f64]>) -> Result<Self> {
        if slopes.len() + 1 != breakpoints.len() {
            return Err(Error::InvalidMap(format!(
                "{} breakpoints need {} slopes, got {}",
                breakpoints.len(),
                breakpoints.len().saturating_sub(1),
                slopes.len()
            )));
        }
        if let Some(c) = intercepts {
            if c.len() != slopes.len() {
                return Err(Error::InvalidMap("one intercept per branch required".into()));
            }
        }
        let branches = slopes
            .iter()
            .enumerate()
            .map(|(i, &slope)| {
                let intercept = match intercepts {
                    Some(c) => c[i],
                    None if slope >= 0.0 => 0.0,
                    None => 1.0,
                };
                Branch::Linear { slope, intercept }
            })
            .collect();
        let map = Self::from_branches(breakpoints.to_vec(), branches)?;
        Ok(map.with_descriptor(MapDescriptor::Linear {
            breakpoints: breakpoints.to_vec(),
            slopes: slopes.to_vec(),
            intercepts: intercepts.map(|c| c.to_vec()),
        }))
    }

    /// Smooth two-branch perturbation of the doubling map with nonconstant
    /// slope `2 + 2 eps cos(2 pi x)`; requires `|eps| < 1/2`.
    pub fn perturbed_doubling(eps: f64) -> Result<Self> {
        if !(eps.abs() < 0.5) {
            return Err(Error::InvalidMap(format!("perturbed-doubling needs |eps| < 1/2, got {eps}")));
        }
        let g = move |x: f64| 2.0 * x + eps / PI * (2.0 * PI * x).sin();
        let dg = move |x: f64| 2.0 + 2.0 * eps * (2.0 * PI * x).cos();
        let branches = vec![
            Branch::Smooth(SmoothBranch::new("pd0", g, dg)),
            Branch::Smooth(SmoothBranch::new("pd1", move |x| g(x) - 1.0, dg)),
        ];
        let map = Self::from_branches(vec![0.0, 0.5, 1.0], branches)?;
        Ok(map.with_descriptor(MapDescriptor::PerturbedDoubling { eps }))
    }

    /// Builds and validates a map from explicit breakpoints and branches.
    pub fn from_branches(breakpoints: Vec<f64>, branches: Vec<Branch>) -> Result<Self> {
        if breakpoints.len() < 2 || branches.len() + 1 != breakpoints.len() {
            return Err(Error::InvalidMap("need b branches and b+1 breakpoints".into()));
        }
        if breakpoints[0] != 0.0 || *breakpoints.last().unwrap() != 1.0 {
            return Err(Error::InvalidMap("breakpoints must start at 0 and end at 1".into()));
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidMap("breakpoints unsorted".into()));
        }
        let mut map = PiecewiseMap {
            descriptor: None,
            breakpoints,
            branches,
            expansion_exponent: 1,
            expansion_constant: 1.0,
            dyadic_exact: false,
        };
        map.check_branches()?;
        let (m, eta) = map.find_expansion()?;
        map.expansion_exponent = m;
        map.expansion_constant = eta;
        map.dyadic_exact = map.detect_dyadic();
        Ok(map)
    }

    fn with_descriptor(mut self, desc: MapDescriptor) -> Self {
        self.descriptor = Some(desc);
        self
    }

    fn check_branches(&self) -> Result<()> {
        const SAMPLES: usize = 256;
        for i in 0..self.branch_count() {
            let (lo, hi) = (self.breakpoints[i], self.breakpoints[i + 1]);
            let mut prev: Option<f64> = None;
            let mut sign = 0.0f64;
            for s in 0..=SAMPLES {
                let x = lo + (hi - lo) * s as f64 / SAMPLES as f64;
                let y = self.branch_value(i, x);
                if !y.is_finite() || y < -IMAGE_SLACK || y > 1.0 + IMAGE_SLACK {
                    return Err(Error::InvalidMap(format!(
                        "branch {i} maps {x} to {y}, outside [0, 1]"
                    )));
                }
                if let Some(p) = prev {
                    let d = y - p;
                    if d == 0.0 || (sign != 0.0 && d.signum() != sign) {
                        return Err(Error::InvalidMap(format!("branch {i} is not strictly monotone")));
                    }
                    sign = d.signum();
                }
                prev = Some(y);
            }
        }
        Ok(())
    }

    fn find_expansion(&self) -> Result<(usize, f64)> {
        let mut best = 0.0;
        for m in 1..=4 {
            let mut min = f64::INFINITY;
            for g in 0..CHECK_GRID {
                let x = (g as f64 + 0.5) / CHECK_GRID as f64;
                min = min.min(self.iterate_derivative(x, m).abs());
            }
            if min > 1.0 {
                return Ok((m, min));
            }
            best = min;
        }
        Err(Error::InvalidMap(format!(
            "expansion check failed: min |(f^4)'| on the grid is {best}"
        )))
    }

    fn detect_dyadic(&self) -> bool {
        self.branches.iter().enumerate().all(|(i, b)| match b {
            Branch::Linear { slope, .. } => {
                let (lo, hi) = self.branch_image(i);
                slope.abs() >= 2.0
                    && slope.fract() == 0.0
                    && lo.abs() < IMAGE_SLACK
                    && (hi - 1.0).abs() < IMAGE_SLACK
            }
            Branch::Smooth(_) => false,
        })
    }

    pub fn descriptor(&self) -> Option<&MapDescriptor> {
        self.descriptor.as_ref()
    }

    pub fn name(&self) -> &str {
        self.descriptor.as_ref().map_or("custom", |d| d.name())
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn branch_count(&self) -> usize {
        self.branches.len()
    }

    pub fn expansion_exponent(&self) -> usize {
        self.expansion_exponent
    }

    pub fn expansion_constant(&self) -> f64 {
        self.expansion_constant
    }

    /// True for full-branch affine maps with integer slopes, whose float
    /// iteration degenerates onto dyadic (or b-adic) rationals.
    pub fn dyadic_exact(&self) -> bool {
        self.dyadic_exact
    }

    pub fn is_piecewise_linear(&self) -> bool {
        self.branches.iter().all(|b| matches!(b, Branch::Linear { .. }))
    }

    /// Interval `[a_i, a_{i+1}]` of branch `i`.
    pub fn branch_interval(&self, i: usize) -> (f64, f64) {
        (self.breakpoints[i], self.breakpoints[i + 1])
    }

    /// Index `i` with `a_i <= x < a_{i+1}`; `x` is assumed in `[0, 1)`.
    pub fn branch_index(&self, x: f64) -> usize {
        let inner = &self.breakpoints[1..self.breakpoints.len() - 1];
        inner.partition_point(|&a| a <= x)
    }

    /// Branch formula, valid on the closed interval of the branch.
    pub fn branch_value(&self, i: usize, x: f64) -> f64 {
        match &self.branches[i] {
            Branch::Linear { slope, intercept } => intercept + slope * (x - self.breakpoints[i]),
            Branch::Smooth(s) => (s.value)(x),
        }
    }

    pub fn branch_derivative(&self, i: usize, x: f64) -> f64 {
        match &self.branches[i] {
            Branch::Linear { slope, .. } => *slope,
            Branch::Smooth(s) => (s.derivative)(x),
        }
    }

    /// Image of the closed branch interval, as `(lo, hi)`.
    pub fn branch_image(&self, i: usize) -> (f64, f64) {
        let (a, b) = self.branch_interval(i);
        let (ya, yb) = (self.branch_value(i, a), self.branch_value(i, b));
        (ya.min(yb), ya.max(yb))
    }

    pub fn is_increasing(&self, i: usize) -> bool {
        let (a, b) = self.branch_interval(i);
        self.branch_value(i, b) > self.branch_value(i, a)
    }

    /// Evaluates `f` at `x` in `[0, 1)`.
    pub fn evaluate(&self, x: f64) -> Result<Evaluation> {
        if !(0.0..1.0).contains(&x) {
            return Err(Error::OutOfDomain(x));
        }
        Ok(self.eval_unchecked(x))
    }

    /// Evaluation on the closed interval: `x >= 1` uses the last branch's
    /// left limit. Used by orbit iteration, where images may land on 1.
    pub(crate) fn eval_unchecked(&self, x: f64) -> Evaluation {
        let branch = if x >= 1.0 {
            self.branch_count() - 1
        } else {
            self.branch_index(x)
        };
        Evaluation {
            image: self.branch_value(branch, x).clamp(0.0, 1.0),
            branch,
            derivative: self.branch_derivative(branch, x),
        }
    }

    /// `f(x)` without the domain check.
    pub fn apply(&self, x: f64) -> f64 {
        self.eval_unchecked(x).image
    }

    /// `(f^m)'(x)` by the chain rule along the orbit.
    pub fn iterate_derivative(&self, x: f64, m: usize) -> f64 {
        let mut d = 1.0;
        let mut y = x;
        for _ in 0..m {
            let e = self.eval_unchecked(y);
            d *= e.derivative;
            y = e.image;
        }
        d
    }

    /// Preimage of `y` under branch `i`, or `None` when `y` is outside the
    /// branch image. Affine branches invert exactly, smooth ones by bisection.
    pub fn branch_inverse(&self, i: usize, y: f64) -> Option<f64> {
        let (lo, hi) = self.branch_image(i);
        if y < lo - IMAGE_SLACK || y > hi + IMAGE_SLACK {
            return None;
        }
        let (a, b) = self.branch_interval(i);
        match &self.branches[i] {
            Branch::Linear { slope, intercept } => Some((a + (y - intercept) / slope).clamp(a, b)),
            Branch::Smooth(_) => {
                let increasing = self.is_increasing(i);
                let (mut l, mut r) = (a, b);
                while r - l > BISECTION_TOL {
                    let mid = 0.5 * (l + r);
                    let below = self.branch_value(i, mid) < y;
                    if below == increasing {
                        l = mid;
                    } else {
                        r = mid;
                    }
                }
                Some(0.5 * (l + r))
            }
        }
    }

    /// All preimages `f^{-1}(y)` as `(branch, x)` pairs.
    pub fn preimages(&self, y: f64) -> Vec<(usize, f64)> {
        (0..self.branch_count())
            .filter_map(|i| self.branch_inverse(i, y).map(|x| (i, x)))
            .collect()
    }

    /// Lebesgue measure of each branch interval (symbol probabilities for
    /// full-branch affine maps).
    pub fn branch_widths(&self) -> Vec<f64> {
        self.breakpoints.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn doubling_and_tent_shapes() {
        let d = PiecewiseMap::doubling();
        assert_eq!(d.breakpoints(), &[0.0, 0.5, 1.0]);
        assert!(d.dyadic_exact());
        assert_eq!(d.expansion_exponent(), 1);
        assert!((d.expansion_constant() - 2.0).abs() < 1e-15);

        let t = PiecewiseMap::tent();
        assert_eq!(t.breakpoints(), &[0.0, 0.5, 1.0]);
        assert_eq!(t.branch_derivative(0, 0.1), 2.0);
        assert_eq!(t.branch_derivative(1, 0.9), -2.0);
    }

    #[test]
    fn three_branch_linear() {
        let m = PiecewiseMap::full_linear(&[3.0, 3.0, 3.0]).unwrap();
        assert_eq!(m.branch_count(), 3);
        assert!((m.expansion_constant() - 3.0).abs() < 1e-12);
        assert_eq!(m.expansion_exponent(), 1);
        assert!(m.dyadic_exact());
    }

    #[test]
    fn evaluate_examples() {
        let d = PiecewiseMap::doubling();
        let e = d.evaluate(0.3).unwrap();
        assert!((e.image - 0.6).abs() < 1e-15);
        assert_eq!((e.branch, e.derivative), (0, 2.0));
        let e = d.evaluate(0.75).unwrap();
        assert_eq!((e.image, e.branch, e.derivative), (0.5, 1, 2.0));

        let t = PiecewiseMap::tent();
        let e = t.evaluate(0.25).unwrap();
        assert_eq!((e.image, e.branch, e.derivative), (0.5, 0, 2.0));
    }

    #[test]
    fn evaluate_rejects_outside() {
        let d = PiecewiseMap::doubling();
        assert_eq!(d.evaluate(1.0), Err(Error::OutOfDomain(1.0)));
        assert!(d.evaluate(-0.1).is_err());
        assert!(d.evaluate(f64::NAN).is_err());
    }

    #[test]
    fn construction_errors() {
        assert!(matches!(
            PiecewiseMap::linear(&[0.0, 0.6, 0.5, 1.0], &[2.0, 2.0, 2.0], None),
            Err(Error::InvalidMap(_))
        ));
        // contracting branch
        assert!(PiecewiseMap::linear(&[0.0, 1.0], &[0.5], None).is_err());
        // image leaves [0,1]
        assert!(PiecewiseMap::linear(&[0.0, 0.5, 1.0], &[3.0, 2.0], None).is_err());
        // non-monotone smooth branch
        let bump = Branch::Smooth(SmoothBranch::new("bump", |x| 4.0 * x * (1.0 - x), |x| 4.0 - 8.0 * x));
        assert!(PiecewiseMap::from_branches(vec![0.0, 1.0], vec![bump]).is_err());
    }

    #[test]
    fn perturbed_doubling_is_expanding_and_smooth() {
        let m = PiecewiseMap::perturbed_doubling(0.2).unwrap();
        assert!(!m.dyadic_exact());
        assert!(!m.is_piecewise_linear());
        assert!(m.expansion_constant() > 1.5);
        for i in 0..2 {
            let (lo, hi) = m.branch_image(i);
            assert!(lo.abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn expansion_holds_on_grid_for_builtins() {
        for m in [
            PiecewiseMap::doubling(),
            PiecewiseMap::tent(),
            PiecewiseMap::full_linear(&[3.0, 3.0, 3.0]).unwrap(),
            PiecewiseMap::perturbed_doubling(0.2).unwrap(),
        ] {
            let eta = m.expansion_constant();
            assert!(eta > 1.0);
            for g in 0..CHECK_GRID {
                let x = (g as f64 + 0.5) / CHECK_GRID as f64;
                assert!(m.iterate_derivative(x, m.expansion_exponent()).abs() >= eta);
            }
        }
    }

    #[test]
    fn branch_inverse_round_trip() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for m in [
            PiecewiseMap::doubling(),
            PiecewiseMap::tent(),
            PiecewiseMap::perturbed_doubling(0.3).unwrap(),
        ] {
            for _ in 0..1000 {
                let x: f64 = rng.random();
                let e = m.eval_unchecked(x);
                let back = m.branch_inverse(e.branch, e.image).unwrap();
                assert!((back - x).abs() < 1e-10, "{} x={x} back={back}", m.name());
                let fwd = m.branch_value(e.branch, back);
                assert!((fwd - e.image).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn descriptor_text_round_trip() {
        for d in [
            MapDescriptor::Doubling,
            MapDescriptor::Tent,
            MapDescriptor::FullLinear {
                slopes: vec![3.0, 3.0, 3.0],
            },
            MapDescriptor::Linear {
                breakpoints: vec![0.0, 0.25, 1.0],
                slopes: vec![4.0, -4.0 / 3.0],
                intercepts: Some(vec![0.0, 1.0]),
            },
            MapDescriptor::PerturbedDoubling { eps: 0.15 },
        ] {
            assert_eq!(MapDescriptor::parse(&d.to_text()).unwrap(), d);
        }
        assert!(MapDescriptor::parse("name = logistic").is_err());
    }
}
