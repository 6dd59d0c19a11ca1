//! Orbit generation and Birkhoff sums.
//!
//! Two modes are available. `FloatIterate` applies `f` in double precision.
//! `SymbolicExact` is reserved for full-branch affine maps with integer
//! slopes: symbols are drawn i.i.d. with the Lebesgue weight of their branch
//! and points are rebuilt from the upcoming symbols by composing inverse
//! branches. Float iteration of such maps collapses onto a fixed point within
//! a few dozen steps (`2x mod 1` loses one mantissa bit per step).

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::maps::PiecewiseMap;
use crate::observable::Observable;

/// Seeded generator used throughout the crate.
pub fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seed of trajectory `index` in a multi-seed run.
pub fn trajectory_seed(base: u64, index: usize) -> u64 {
    base.wrapping_add(index as u64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OrbitMode {
    FloatIterate,
    SymbolicExact,
}

impl OrbitMode {
    /// Symbolic for dyadic-exact maps, float iteration otherwise.
    pub fn default_for(map: &PiecewiseMap) -> Self {
        if map.dyadic_exact() {
            OrbitMode::SymbolicExact
        } else {
            OrbitMode::FloatIterate
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrbitPoint {
    pub step: usize,
    pub x: f64,
    pub symbol: usize,
}

/// I.i.d. branch symbols with probabilities equal to branch widths.
#[derive(Clone, Debug)]
pub(crate) struct SymbolSource {
    rng: ChaCha8Rng,
    kind: SymbolKind,
    bits: u64,
    bits_left: u32,
}

#[derive(Clone, Debug)]
enum SymbolKind {
    /// `b = 2^width` equal branches: consume `width` random bits per symbol.
    Bits { width: u32 },
    Uniform { b: usize },
    Weighted { cumulative: Vec<f64> },
}

impl SymbolSource {
    pub(crate) fn new(map: &PiecewiseMap, seed: u64) -> Self {
        let widths = map.branch_widths();
        let b = widths.len();
        let equal = widths.iter().all(|&w| (w * b as f64 - 1.0).abs() < 1e-12);
        let kind = if equal && b.is_power_of_two() && b > 1 {
            SymbolKind::Bits {
                width: b.trailing_zeros(),
            }
        } else if equal {
            SymbolKind::Uniform { b }
        } else {
            SymbolKind::Weighted {
                cumulative: map.breakpoints()[1..b].to_vec(),
            }
        };
        SymbolSource {
            rng: rng_for(seed),
            kind,
            bits: 0,
            bits_left: 0,
        }
    }

    #[inline]
    pub(crate) fn next_symbol(&mut self) -> usize {
        match &self.kind {
            SymbolKind::Bits { width } => {
                let width = *width;
                if self.bits_left < width {
                    self.bits = self.rng.random();
                    self.bits_left = 64;
                }
                let s = (self.bits & ((1u64 << width) - 1)) as usize;
                self.bits >>= width;
                self.bits_left -= width;
                s
            }
            SymbolKind::Uniform { b } => self.rng.random_range(0..*b),
            SymbolKind::Weighted { cumulative } => {
                let u: f64 = self.rng.random();
                cumulative.partition_point(|&c| c <= u)
            }
        }
    }
}

enum State {
    Float { x: f64 },
    Symbolic { source: SymbolSource, window: VecDeque<usize> },
}

/// A finite orbit `x, f(x), ..., f^{n-1}(x)` streamed point by point.
pub struct Orbit<'a> {
    map: &'a PiecewiseMap,
    seed: u64,
    mode: OrbitMode,
    len: usize,
    step: usize,
    state: State,
}

fn reconstruct(map: &PiecewiseMap, window: &VecDeque<usize>) -> f64 {
    let mut y = 0.5;
    for &s in window.iter().rev() {
        y = map
            .branch_inverse(s, y)
            .expect("full branches invert every point of [0, 1]");
    }
    y
}

/// Number of upcoming symbols used to rebuild a point in symbolic mode.
fn reconstruction_depth(map: &PiecewiseMap) -> usize {
    let contraction = map.expansion_constant().log2();
    (64.0 / contraction).ceil() as usize + 1
}

impl<'a> Orbit<'a> {
    /// Orbit of length `n` from a Lebesgue-random start drawn from `seed`.
    pub fn new(map: &'a PiecewiseMap, seed: u64, n: usize, mode: OrbitMode) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("orbit length must be at least 1".into()));
        }
        let state = match mode {
            OrbitMode::FloatIterate => State::Float {
                x: rng_for(seed).random::<f64>(),
            },
            OrbitMode::SymbolicExact => {
                if !map.dyadic_exact() {
                    return Err(Error::NotDyadic);
                }
                let mut source = SymbolSource::new(map, seed);
                let depth = reconstruction_depth(map);
                let window = (0..depth).map(|_| source.next_symbol()).collect();
                State::Symbolic { source, window }
            }
        };
        Ok(Orbit {
            map,
            seed,
            mode,
            len: n,
            step: 0,
            state,
        })
    }

    /// Float orbit from an explicit starting point.
    pub fn from_point(map: &'a PiecewiseMap, x0: f64, n: usize) -> Result<Self> {
        if !(0.0..1.0).contains(&x0) {
            return Err(Error::OutOfDomain(x0));
        }
        if n == 0 {
            return Err(Error::InvalidArgument("orbit length must be at least 1".into()));
        }
        Ok(Orbit {
            map,
            seed: 0,
            mode: OrbitMode::FloatIterate,
            len: n,
            step: 0,
            state: State::Float { x: x0 },
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn mode(&self) -> OrbitMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Advances one step and returns the current symbol only. In symbolic
    /// mode this skips point reconstruction.
    pub fn next_symbol(&mut self) -> Option<usize> {
        if self.step >= self.len {
            return None;
        }
        self.step += 1;
        match &mut self.state {
            State::Float { x } => {
                let e = self.map.eval_unchecked(*x);
                *x = e.image;
                Some(e.branch)
            }
            State::Symbolic { source, window } => {
                let s = window.pop_front().expect("window is never empty");
                window.push_back(source.next_symbol());
                Some(s)
            }
        }
    }

    /// Stream of branch indices.
    pub fn symbols(self) -> impl Iterator<Item = usize> + 'a {
        let mut orbit = self;
        std::iter::from_fn(move || orbit.next_symbol())
    }

    /// Stream of `u(f^j x)`. Observables constant on branches are read off
    /// the symbols directly.
    pub fn values(self, u: &'a Observable) -> Box<dyn Iterator<Item = f64> + 'a> {
        match (self.mode, u.branch_values(self.map)) {
            (OrbitMode::SymbolicExact, Some(table)) => Box::new(self.symbols().map(move |s| table[s])),
            _ => Box::new(self.map(move |p| u.eval(p.x))),
        }
    }
}

impl Iterator for Orbit<'_> {
    type Item = OrbitPoint;

    fn next(&mut self) -> Option<OrbitPoint> {
        if self.step >= self.len {
            return None;
        }
        let step = self.step;
        self.step += 1;
        let map = self.map;
        let point = match &mut self.state {
            State::Float { x } => {
                let e = map.eval_unchecked(*x);
                let p = OrbitPoint {
                    step,
                    x: *x,
                    symbol: e.branch,
                };
                *x = e.image;
                p
            }
            State::Symbolic { source, window } => {
                let x = reconstruct(map, window);
                let symbol = window.pop_front().expect("window is never empty");
                window.push_back(source.next_symbol());
                OrbitPoint { step, x, symbol }
            }
        };
        Some(point)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let rest = self.len - self.step;
        (rest, Some(rest))
    }
}

/// Running sums `S_k = u_0 + ... + u_{k-1}` for `k = 1, 2, ...`.
#[derive(Clone, Debug)]
pub struct BirkhoffSums<I> {
    values: I,
    sum: f64,
}

impl<I: Iterator<Item = f64>> Iterator for BirkhoffSums<I> {
    type Item = f64;

    #[inline]
    fn next(&mut self) -> Option<f64> {
        let v = self.values.next()?;
        self.sum += v;
        Some(self.sum)
    }
}

pub fn birkhoff_sums<I: IntoIterator<Item = f64>>(values: I) -> BirkhoffSums<I::IntoIter> {
    BirkhoffSums {
        values: values.into_iter(),
        sum: 0.0,
    }
}

/// Birkhoff sums of `u` along an orbit.
pub fn orbit_sums<'a>(orbit: Orbit<'a>, u: &'a Observable) -> BirkhoffSums<Box<dyn Iterator<Item = f64> + 'a>> {
    birkhoff_sums(orbit.values(u))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_doubling_degenerates_from_dyadic_start() {
        let d = PiecewiseMap::doubling();
        let xs: Vec<f64> = Orbit::from_point(&d, 0.25, 4).unwrap().map(|p| p.x).collect();
        assert_eq!(xs, vec![0.25, 0.5, 0.0, 0.0]);
    }

    #[test]
    fn symbolic_doubling_never_hits_zero() {
        let d = PiecewiseMap::doubling();
        let orbit = Orbit::new(&d, 11, 1_000_000, OrbitMode::SymbolicExact).unwrap();
        assert!(orbit.skip(53).all(|p| p.x != 0.0));
    }

    #[test]
    fn symbolic_requires_dyadic() {
        let m = PiecewiseMap::perturbed_doubling(0.2).unwrap();
        assert_eq!(
            Orbit::new(&m, 1, 10, OrbitMode::SymbolicExact).err(),
            Some(Error::NotDyadic)
        );
        assert!(Orbit::new(&m, 1, 0, OrbitMode::FloatIterate).is_err());
    }

    #[test]
    fn symbolic_points_follow_the_map() {
        for map in [
            PiecewiseMap::doubling(),
            PiecewiseMap::tent(),
            PiecewiseMap::full_linear(&[3.0, 3.0, 3.0]).unwrap(),
        ] {
            let pts: Vec<OrbitPoint> = Orbit::new(&map, 5, 2000, OrbitMode::SymbolicExact).unwrap().collect();
            for w in pts.windows(2) {
                assert!((map.apply(w[0].x) - w[1].x).abs() < 1e-12);
                assert_eq!(map.branch_index(w[0].x), w[0].symbol);
            }
        }
    }

    #[test]
    fn symbolic_monobit_frequency() {
        let d = PiecewiseMap::doubling();
        let n = 1_000_000;
        let ones: usize = Orbit::new(&d, 3, n, OrbitMode::SymbolicExact).unwrap().symbols().sum();
        let sd = (n as f64 * 0.25).sqrt();
        assert!((ones as f64 - n as f64 / 2.0).abs() < 3.0 * sd);
    }

    #[test]
    fn tent_orbit_mean_is_one_half() {
        let t = PiecewiseMap::tent();
        let mode = OrbitMode::default_for(&t);
        assert_eq!(mode, OrbitMode::SymbolicExact);
        let n = 100_000;
        let mean = Orbit::new(&t, 9, n, mode).unwrap().map(|p| p.x).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.01, "{mean}");
    }

    #[test]
    fn birkhoff_examples() {
        let s: Vec<f64> = birkhoff_sums(std::iter::repeat(1.0).take(5)).collect();
        assert_eq!(s, vec![1.0, 2.0, 3.0, 4.0, 5.0]);

        let u = Observable::sawtooth();
        let d = PiecewiseMap::doubling();
        let s: Vec<f64> = orbit_sums(Orbit::from_point(&d, 0.25, 3).unwrap(), &u).collect();
        assert_eq!(s, vec![-0.25, -0.25, -0.75]);
    }

    #[test]
    fn coboundary_sums_telescope() {
        let d = PiecewiseMap::doubling();
        let u = Observable::coboundary_named(&d, "identity").unwrap();
        let orbit = Orbit::new(&d, 2, 10_000, OrbitMode::SymbolicExact).unwrap();
        for s in orbit_sums(orbit, &u) {
            assert!(s.abs() <= 2.0 + 1e-9);
        }
    }

    #[test]
    fn fast_path_matches_point_path() {
        let d = PiecewiseMap::doubling();
        let u = Observable::coin();
        let fast: Vec<f64> = Orbit::new(&d, 4, 500, OrbitMode::SymbolicExact).unwrap().values(&u).collect();
        let slow: Vec<f64> = Orbit::new(&d, 4, 500, OrbitMode::SymbolicExact)
            .unwrap()
            .map(|p| u.eval(p.x))
            .collect();
        assert_eq!(fast, slow);
    }
}
