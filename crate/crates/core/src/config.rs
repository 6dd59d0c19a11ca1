//! Experiment configuration: `[section]` headers, `key = value` lines, `#`
//! comments. Values are integers, reals, strings or comma-separated lists
//! (optionally bracketed).
//!
//! ```text
//! [map]
//! name = doubling
//!
//! [observable]
//! name = sawtooth
//!
//! [run]
//! seeds = 1, 2, 3
//! horizon = 100000
//! ```

use std::collections::BTreeMap;
use std::fmt;

use sha2::{Digest, Sha256};

use crate::asclt::default_checkpoints;
use crate::erdos_renyi::{LdMethod, DEFAULT_BAND_EPS, LENGTH_CAP};
use crate::error::Result;
use crate::maps::{format_real_list, parse_real_list, MapDescriptor};
use crate::observable::Observable;
use crate::maps::PiecewiseMap;
use crate::entropy::{DEFAULT_SANDWICH_EPS, RETURN_CAP};

pub const SECTIONS: [&str; 9] = [
    "map",
    "observable",
    "run",
    "transfer",
    "asclt",
    "erdos_renyi",
    "ld",
    "entropy",
    "output",
];
const REQUIRED: [&str; 3] = ["map", "observable", "run"];

fn keys_of(section: &str) -> &'static [&'static str] {
    match section {
        "map" => &["name", "eps", "slopes", "breakpoints", "intercepts"],
        "observable" => &["name", "v", "values", "value", "center"],
        "run" => &["seeds", "horizon", "checkpoints", "threads"],
        "transfer" => &[
            "resolution",
            "beta_max",
            "beta_step",
            "alpha_grid",
            "sigma2_method",
            "orbit_length",
            "max_lag",
        ],
        "asclt" => &["sigma2"],
        "erdos_renyi" => &["alpha", "k_grid", "band_eps", "rate_length", "rate_k_grid", "cap"],
        "ld" => &["alpha", "k_grid", "trials", "method", "decoupling_k", "r_grid"],
        "entropy" => &["horizon", "checkpoints", "eps", "cap", "sigma2"],
        "output" => &["dir"],
        _ => &[],
    }
}

/// A problem at a given 1-based line (0 when not tied to a line).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line > 0 {
            write!(f, "line {}: {}", self.line, self.message)
        } else {
            write!(f, "{}", self.message)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ObservableSpec {
    Sawtooth,
    Coin,
    LogDeriv,
    Coboundary { v: String },
    Table { values: Vec<f64> },
    Constant { value: f64 },
}

impl ObservableSpec {
    pub fn build(&self, map: &PiecewiseMap) -> Result<Observable> {
        Ok(match self {
            ObservableSpec::Sawtooth => Observable::sawtooth(),
            ObservableSpec::Coin => Observable::coin(),
            ObservableSpec::LogDeriv => Observable::log_derivative(map),
            ObservableSpec::Coboundary { v } => Observable::coboundary_named(map, v)?,
            ObservableSpec::Table { values } => Observable::table(values.clone())?,
            ObservableSpec::Constant { value } => Observable::constant(*value),
        })
    }

    fn name(&self) -> &'static str {
        match self {
            ObservableSpec::Sawtooth => "sawtooth",
            ObservableSpec::Coin => "coin",
            ObservableSpec::LogDeriv => "log-deriv",
            ObservableSpec::Coboundary { .. } => "coboundary",
            ObservableSpec::Table { .. } => "table",
            ObservableSpec::Constant { .. } => "constant",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sigma2Choice {
    Quadrature,
    Orbit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransferConfig {
    pub resolution: usize,
    pub beta_max: f64,
    pub beta_step: f64,
    /// Explicit α grid; when empty, 21 points spanning 90% of the F' range.
    pub alpha_grid: Vec<f64>,
    pub sigma2_method: Sigma2Choice,
    pub orbit_length: usize,
    pub max_lag: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErConfig {
    pub alpha: f64,
    pub k_grid: Vec<usize>,
    pub band_eps: f64,
    pub rate_length: usize,
    pub rate_k_grid: Vec<usize>,
    pub cap: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LdConfig {
    pub alpha: f64,
    pub k_grid: Vec<usize>,
    pub trials: usize,
    pub method: LdMethod,
    pub decoupling_k: Option<usize>,
    pub r_grid: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EntropyConfig {
    pub horizon: usize,
    pub checkpoints: Vec<usize>,
    pub eps: f64,
    pub cap: u64,
    pub sigma2: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub map: MapDescriptor,
    pub observable: ObservableSpec,
    /// Subtract the μ-mean of the observable before use.
    pub center: bool,
    pub seeds: Vec<u64>,
    pub horizon: usize,
    pub checkpoints: Vec<usize>,
    pub threads: Option<usize>,
    pub transfer: TransferConfig,
    pub asclt_sigma2: Option<f64>,
    pub erdos_renyi: ErConfig,
    pub ld: LdConfig,
    pub entropy: EntropyConfig,
    pub output_dir: String,
}

struct Entry {
    value: String,
    line: usize,
}

struct Reader {
    entries: BTreeMap<(String, String), Entry>,
    errors: Vec<ConfigError>,
}

impl Reader {
    fn raw(&self, sec: &str, key: &str) -> Option<(&str, usize)> {
        self.entries
            .get(&(sec.to_string(), key.to_string()))
            .map(|e| (e.value.as_str(), e.line))
    }

    fn fail(&mut self, line: usize, message: String) {
        self.errors.push(ConfigError { line, message });
    }

    fn parsed<T>(&mut self, sec: &str, key: &str, what: &str, parse: impl Fn(&str) -> Option<T>) -> Option<(T, usize)> {
        let (v, line) = self.raw(sec, key)?;
        let v = v.to_string();
        match parse(&v) {
            Some(x) => Some((x, line)),
            None => {
                self.fail(line, format!("`{key}` must be {what}, got `{v}`"));
                None
            }
        }
    }

    fn real(&mut self, sec: &str, key: &str, default: f64, ok: impl Fn(f64) -> bool, constraint: &str) -> f64 {
        match self.parsed(sec, key, "a real number", |v| v.parse::<f64>().ok().filter(|x| x.is_finite())) {
            Some((x, _)) if ok(x) => x,
            Some((x, line)) => {
                self.fail(line, format!("`{key}` = {x} violates: {constraint}"));
                default
            }
            None => default,
        }
    }

    fn opt_real(&mut self, sec: &str, key: &str, ok: impl Fn(f64) -> bool, constraint: &str) -> Option<f64> {
        self.raw(sec, key)?;
        Some(self.real(sec, key, f64::NAN, ok, constraint))
    }

    fn int(&mut self, sec: &str, key: &str, default: i128, ok: impl Fn(i128) -> bool, constraint: &str) -> i128 {
        let parse = |v: &str| -> Option<i128> {
            let v = v.replace('_', "");
            v.parse::<i128>().ok().or_else(|| {
                // allow 1e6-style integers
                let f = v.parse::<f64>().ok()?;
                (f.fract() == 0.0 && f.abs() < 1e30).then_some(f as i128)
            })
        };
        match self.parsed(sec, key, "an integer", parse) {
            Some((x, _)) if ok(x) => x,
            Some((x, line)) => {
                self.fail(line, format!("`{key}` = {x} violates: {constraint}"));
                default
            }
            None => default,
        }
    }

    fn int_list(&mut self, sec: &str, key: &str, ok: impl Fn(i128) -> bool, constraint: &str) -> Option<Vec<i128>> {
        let (v, line) = self.raw(sec, key)?;
        let v = v.to_string();
        let body = v.trim().trim_start_matches('[').trim_end_matches(']');
        let mut out = Vec::new();
        for part in body.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match part.replace('_', "").parse::<i128>() {
                Ok(x) if ok(x) => out.push(x),
                Ok(x) => {
                    self.fail(line, format!("`{key}` entry {x} violates: {constraint}"));
                    return None;
                }
                Err(_) => {
                    self.fail(line, format!("`{key}` must be a list of integers, got `{part}`"));
                    return None;
                }
            }
        }
        Some(out)
    }

    fn real_list(&mut self, sec: &str, key: &str) -> Option<Vec<f64>> {
        let (v, line) = self.raw(sec, key)?;
        match parse_real_list(v) {
            Ok(x) => Some(x),
            Err(e) => {
                self.fail(line, format!("`{key}`: {e}"));
                None
            }
        }
    }

    fn string(&self, sec: &str, key: &str) -> Option<(String, usize)> {
        self.raw(sec, key).map(|(v, l)| (v.trim_matches('"').to_string(), l))
    }
}

fn sorted_positive(v: &[i128]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

/// Parses and validates a configuration, reporting every problem found.
pub fn parse_config(text: &str) -> std::result::Result<ExperimentConfig, Vec<ConfigError>> {
    let mut r = Reader {
        entries: BTreeMap::new(),
        errors: Vec::new(),
    };
    let mut section: Option<String> = None;
    let mut seen_sections: BTreeMap<String, usize> = BTreeMap::new();
    for (i, raw_line) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw_line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            let name = name.trim().to_string();
            if !SECTIONS.contains(&name.as_str()) {
                r.fail(line, format!("unknown section [{name}]; valid sections: {}", SECTIONS.join(", ")));
                section = None;
                continue;
            }
            seen_sections.entry(name.clone()).or_insert(line);
            section = Some(name);
            continue;
        }
        let Some((k, v)) = content.split_once('=') else {
            r.fail(line, format!("expected `key = value` or `[section]`, got `{content}`"));
            continue;
        };
        let (k, v) = (k.trim().to_string(), v.trim().to_string());
        let Some(sec) = section.clone() else {
            if seen_sections.is_empty() || !r.errors.iter().any(|e| e.message.starts_with("unknown section")) {
                r.fail(line, format!("`{k}` appears outside any section"));
            }
            continue;
        };
        if !keys_of(&sec).contains(&k.as_str()) {
            r.fail(line, format!("unknown key `{k}` in [{sec}]; valid keys: {}", keys_of(&sec).join(", ")));
            continue;
        }
        if r.entries.insert((sec.clone(), k.clone()), Entry { value: v, line }).is_some() {
            r.fail(line, format!("duplicate key `{k}` in [{sec}]"));
        }
    }
    for req in REQUIRED {
        if !seen_sections.contains_key(req) {
            r.fail(0, format!("missing required section [{req}]"));
        }
    }

    // [map]
    let map_pairs: Vec<(String, String)> = r
        .entries
        .iter()
        .filter(|((s, _), _)| s == "map")
        .map(|((_, k), e)| (k.clone(), e.value.clone()))
        .collect();
    let map_line = seen_sections.get("map").copied().unwrap_or(0);
    let map = match MapDescriptor::from_pairs(&map_pairs) {
        Ok(m) => match crate::maps::make_map(&m) {
            Ok(_) => Some(m),
            Err(e) => {
                r.fail(map_line, format!("[map]: {e}"));
                None
            }
        },
        Err(e) => {
            if seen_sections.contains_key("map") {
                r.fail(map_line, format!("[map]: {e}"));
            }
            None
        }
    };

    // [observable]
    let observable = match r.string("observable", "name") {
        None => {
            if seen_sections.contains_key("observable") {
                r.fail(seen_sections["observable"], "[observable] needs `name`".into());
            }
            None
        }
        Some((name, line)) => match name.as_str() {
            "sawtooth" => Some(ObservableSpec::Sawtooth),
            "coin" => Some(ObservableSpec::Coin),
            "log-deriv" => Some(ObservableSpec::LogDeriv),
            "coboundary" => {
                let v = r.string("observable", "v").map(|s| s.0).unwrap_or_else(|| "identity".into());
                if ["identity", "square", "cos"].contains(&v.as_str()) {
                    Some(ObservableSpec::Coboundary { v })
                } else {
                    r.fail(line, format!("unknown coboundary generator `{v}`; valid: identity, square, cos"));
                    None
                }
            }
            "table" => match r.real_list("observable", "values") {
                Some(values) if !values.is_empty() => Some(ObservableSpec::Table { values }),
                _ => {
                    r.fail(line, "table observable needs a nonempty `values` list".into());
                    None
                }
            },
            "constant" => Some(ObservableSpec::Constant {
                value: r.real("observable", "value", 0.0, |_| true, ""),
            }),
            other => {
                r.fail(
                    line,
                    format!("unknown observable `{other}`; valid: sawtooth, coin, log-deriv, coboundary, table, constant"),
                );
                None
            }
        },
    };
    let center = match r.string("observable", "center") {
        None => true,
        Some((v, line)) => match v.as_str() {
            "true" => true,
            "false" => false,
            _ => {
                r.fail(line, format!("`center` must be true or false, got `{v}`"));
                true
            }
        },
    };

    // [run]
    let seeds: Vec<u64> = match r.int_list("run", "seeds", |x| x >= 0 && x <= u64::MAX as i128, "a 64-bit unsigned integer") {
        Some(s) if !s.is_empty() => s.into_iter().map(|x| x as u64).collect(),
        Some(_) => {
            let line = r.raw("run", "seeds").map_or(0, |e| e.1);
            r.fail(line, "`seeds` must be nonempty".into());
            vec![]
        }
        None => {
            if r.raw("run", "seeds").is_none() && seen_sections.contains_key("run") {
                r.fail(seen_sections["run"], "[run] needs `seeds`".into());
            }
            vec![]
        }
    };
    let horizon = r.int("run", "horizon", 100_000, |x| x >= 1 && x <= 1 << 40, "must be a positive integer") as usize;
    let checkpoints = checkpoint_list(&mut r, "run", horizon);
    let has_threads = r.raw("run", "threads").is_some();
    let threads = has_threads
        .then(|| r.int("run", "threads", 1, |x| (1..=4096).contains(&x), "must be between 1 and 4096") as usize);

    // [transfer]
    let transfer = TransferConfig {
        resolution: r.int("transfer", "resolution", 1024, |x| (16..=1 << 24).contains(&x), "must be an integer >= 16") as usize,
        beta_max: r.real("transfer", "beta_max", 3.0, |x| x > 0.0, "must be positive"),
        beta_step: r.real("transfer", "beta_step", 0.25, |x| x > 0.0, "must be positive"),
        alpha_grid: r.real_list("transfer", "alpha_grid").unwrap_or_default(),
        sigma2_method: match r.string("transfer", "sigma2_method") {
            None => Sigma2Choice::Quadrature,
            Some((v, line)) => match v.as_str() {
                "quadrature" => Sigma2Choice::Quadrature,
                "orbit" => Sigma2Choice::Orbit,
                _ => {
                    r.fail(line, format!("`sigma2_method` must be quadrature or orbit, got `{v}`"));
                    Sigma2Choice::Quadrature
                }
            },
        },
        orbit_length: r.int("transfer", "orbit_length", 10_000_000, |x| x >= 1000, "must be at least 1000") as usize,
        max_lag: r.int("transfer", "max_lag", 64, |x| x >= 1, "must be positive") as usize,
    };
    if transfer.beta_step > transfer.beta_max {
        let line = r.raw("transfer", "beta_step").map_or(0, |e| e.1);
        r.fail(line, "`beta_step` must not exceed `beta_max`".into());
    }

    let asclt_sigma2 = r.opt_real("asclt", "sigma2", |x| x >= 0.0, "must be nonnegative");

    // [erdos_renyi]
    let positive = |x: i128| x >= 1 && x <= 1 << 32;
    let er_alpha = r.real("erdos_renyi", "alpha", 0.2, |x| x != 0.0, "must be nonzero");
    let erdos_renyi = ErConfig {
        alpha: er_alpha,
        k_grid: usize_list(&mut r, "erdos_renyi", "k_grid", &[50, 100, 200], positive),
        band_eps: r.real("erdos_renyi", "band_eps", DEFAULT_BAND_EPS, |x| x >= 0.0, "must be nonnegative"),
        rate_length: r.int("erdos_renyi", "rate_length", 1 << 20, |x| (1..=1 << 34).contains(&x), "must be positive") as usize,
        rate_k_grid: usize_list(&mut r, "erdos_renyi", "rate_k_grid", &(1..=10).map(|i| 20 * i).collect::<Vec<_>>(), positive),
        cap: r.int("erdos_renyi", "cap", LENGTH_CAP as i128, |x| x >= 1 && x <= LENGTH_CAP as i128, "must be between 1 and 2^32") as u64,
    };

    // [ld]
    let ld = LdConfig {
        alpha: r.real("ld", "alpha", 0.2, |_| true, ""),
        k_grid: usize_list(&mut r, "ld", "k_grid", &[50, 100, 200, 400], positive),
        trials: r.int("ld", "trials", 1_000_000, |x| (10_000..=1 << 40).contains(&x), "must be at least 10000") as usize,
        method: match r.string("ld", "method") {
            None => LdMethod::Auto,
            Some((v, line)) => match v.as_str() {
                "auto" => LdMethod::Auto,
                "direct" => LdMethod::Direct,
                "tilted" => LdMethod::Tilted,
                _ => {
                    r.fail(line, format!("`method` must be auto, direct or tilted, got `{v}`"));
                    LdMethod::Auto
                }
            },
        },
        decoupling_k: r
            .raw("ld", "decoupling_k")
            .is_some()
            .then(|| r.int("ld", "decoupling_k", 1, |x| x >= 1, "must be positive") as usize),
        r_grid: r
            .int_list("ld", "r_grid", |x| x >= 0, "must be nonnegative")
            .map(|v| v.into_iter().map(|x| x as usize).collect())
            .unwrap_or_default(),
    };
    if ld.decoupling_k.is_some() != !ld.r_grid.is_empty() {
        r.fail(0, "[ld] `decoupling_k` and `r_grid` must be given together".into());
    }

    // [entropy]
    let e_horizon = r.int("entropy", "horizon", 10_000, |x| (1..=1 << 32).contains(&x), "must be positive") as usize;
    let entropy = EntropyConfig {
        horizon: e_horizon,
        checkpoints: checkpoint_list(&mut r, "entropy", e_horizon),
        eps: r.real("entropy", "eps", DEFAULT_SANDWICH_EPS, |x| x > 0.0, "must be positive"),
        cap: r.int("entropy", "cap", RETURN_CAP as i128, |x| x >= 1 && x <= 1 << 40, "must be positive") as u64,
        sigma2: r.opt_real("entropy", "sigma2", |x| x >= 0.0, "must be nonnegative"),
    };

    let output_dir = r.string("output", "dir").map(|s| s.0).unwrap_or_else(|| "out".into());

    if !r.errors.is_empty() {
        r.errors.sort_by_key(|e| e.line);
        return Err(r.errors);
    }
    Ok(ExperimentConfig {
        map: map.expect("validated"),
        observable: observable.expect("validated"),
        center,
        seeds,
        horizon,
        checkpoints,
        threads,
        transfer,
        asclt_sigma2,
        erdos_renyi,
        ld,
        entropy,
        output_dir,
    })
}

fn usize_list(r: &mut Reader, sec: &str, key: &str, default: &[usize], ok: impl Fn(i128) -> bool) -> Vec<usize> {
    match r.int_list(sec, key, ok, "must be a positive integer") {
        Some(v) if !v.is_empty() && sorted_positive(&v) => v.into_iter().map(|x| x as usize).collect(),
        Some(_) => {
            let line = r.raw(sec, key).map_or(0, |e| e.1);
            r.fail(line, format!("`{key}` must be nonempty and strictly increasing"));
            default.to_vec()
        }
        None => default.to_vec(),
    }
}

fn checkpoint_list(r: &mut Reader, sec: &str, horizon: usize) -> Vec<usize> {
    let fallback = || {
        let d = default_checkpoints(horizon);
        if d.last() == Some(&horizon) {
            d
        } else {
            let mut d = d;
            d.push(horizon);
            d
        }
    };
    match r.int_list(sec, "checkpoints", |x| x >= 1, "must be positive") {
        Some(v) if !v.is_empty() && sorted_positive(&v) => {
            if *v.last().unwrap() as usize > horizon {
                let line = r.raw(sec, "checkpoints").map_or(0, |e| e.1);
                r.fail(line, format!("last checkpoint {} exceeds horizon {horizon}", v.last().unwrap()));
            }
            v.into_iter().map(|x| x as usize).collect()
        }
        Some(_) => {
            let line = r.raw(sec, "checkpoints").map_or(0, |e| e.1);
            r.fail(line, "`checkpoints` must be nonempty and strictly increasing".into());
            fallback()
        }
        None => fallback(),
    }
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(", ")
}

impl ExperimentConfig {
    /// Canonical text with every field spelled out; reparses to `self`.
    pub fn to_text(&self) -> String {
        self.render(true)
    }

    fn render(&self, with_plumbing: bool) -> String {
        let mut s = String::new();
        s.push_str("[map]\n");
        s.push_str(&self.map.to_text());
        s.push_str("\n[observable]\n");
        s.push_str(&format!("name = {}\n", self.observable.name()));
        match &self.observable {
            ObservableSpec::Coboundary { v } => s.push_str(&format!("v = {v}\n")),
            ObservableSpec::Table { values } => s.push_str(&format!("values = {}\n", format_real_list(values))),
            ObservableSpec::Constant { value } => s.push_str(&format!("value = {value:?}\n")),
            _ => {}
        }
        s.push_str(&format!("center = {}\n", self.center));
        s.push_str("\n[run]\n");
        s.push_str(&format!("seeds = {}\n", join(&self.seeds)));
        s.push_str(&format!("horizon = {}\n", self.horizon));
        s.push_str(&format!("checkpoints = {}\n", join(&self.checkpoints)));
        if with_plumbing {
            if let Some(t) = self.threads {
                s.push_str(&format!("threads = {t}\n"));
            }
        }
        let t = &self.transfer;
        s.push_str("\n[transfer]\n");
        s.push_str(&format!("resolution = {}\n", t.resolution));
        s.push_str(&format!("beta_max = {:?}\n", t.beta_max));
        s.push_str(&format!("beta_step = {:?}\n", t.beta_step));
        if !t.alpha_grid.is_empty() {
            s.push_str(&format!("alpha_grid = {}\n", format_real_list(&t.alpha_grid)));
        }
        let m = match t.sigma2_method {
            Sigma2Choice::Quadrature => "quadrature",
            Sigma2Choice::Orbit => "orbit",
        };
        s.push_str(&format!("sigma2_method = {m}\n"));
        s.push_str(&format!("orbit_length = {}\n", t.orbit_length));
        s.push_str(&format!("max_lag = {}\n", t.max_lag));
        if let Some(v) = self.asclt_sigma2 {
            s.push_str(&format!("\n[asclt]\nsigma2 = {v:?}\n"));
        }
        let e = &self.erdos_renyi;
        s.push_str("\n[erdos_renyi]\n");
        s.push_str(&format!("alpha = {:?}\n", e.alpha));
        s.push_str(&format!("k_grid = {}\n", join(&e.k_grid)));
        s.push_str(&format!("band_eps = {:?}\n", e.band_eps));
        s.push_str(&format!("rate_length = {}\n", e.rate_length));
        s.push_str(&format!("rate_k_grid = {}\n", join(&e.rate_k_grid)));
        s.push_str(&format!("cap = {}\n", e.cap));
        let l = &self.ld;
        s.push_str("\n[ld]\n");
        s.push_str(&format!("alpha = {:?}\n", l.alpha));
        s.push_str(&format!("k_grid = {}\n", join(&l.k_grid)));
        s.push_str(&format!("trials = {}\n", l.trials));
        let m = match l.method {
            LdMethod::Auto => "auto",
            LdMethod::Direct => "direct",
            LdMethod::Tilted => "tilted",
        };
        s.push_str(&format!("method = {m}\n"));
        if let Some(k) = l.decoupling_k {
            s.push_str(&format!("decoupling_k = {k}\n"));
            s.push_str(&format!("r_grid = {}\n", join(&l.r_grid)));
        }
        let n = &self.entropy;
        s.push_str("\n[entropy]\n");
        s.push_str(&format!("horizon = {}\n", n.horizon));
        s.push_str(&format!("checkpoints = {}\n", join(&n.checkpoints)));
        s.push_str(&format!("eps = {:?}\n", n.eps));
        s.push_str(&format!("cap = {}\n", n.cap));
        if let Some(v) = n.sigma2 {
            s.push_str(&format!("sigma2 = {v:?}\n"));
        }
        if with_plumbing {
            s.push_str(&format!("\n[output]\ndir = {}\n", self.output_dir));
        }
        s
    }

    /// SHA-256 of the canonical text without the output directory and thread
    /// count, which do not affect results.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.render(false).as_bytes()))
    }

    /// Adds `offset` to every seed.
    pub fn with_seed_offset(mut self, offset: u64) -> Self {
        self.seeds.iter_mut().for_each(|s| *s = s.wrapping_add(offset));
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[map]\nname = doubling\n[observable]\nname = sawtooth\n[run]\nseeds = [1]\n";

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.map, MapDescriptor::Doubling);
        assert_eq!(c.observable, ObservableSpec::Sawtooth);
        assert_eq!(c.seeds, vec![1]);
        assert_eq!(c.transfer.resolution, 1024);
        assert_eq!(c.checkpoints.last(), Some(&100_000));
        assert_eq!(c.output_dir, "out");
    }

    #[test]
    fn bad_value_reports_line_and_key() {
        let text = format!("{MINIMAL}[transfer]\nresolution = -4\n");
        let errs = parse_config(&text).unwrap_err();
        assert_eq!(errs.len(), 1);
        assert_eq!(errs[0].line, 8);
        assert!(errs[0].message.contains("resolution"));
        assert!(errs[0].message.contains(">= 16"));
    }

    #[test]
    fn unknown_section_lists_valid_ones() {
        let errs = parse_config(&format!("{MINIMAL}[foo]\nx = 1\n")).unwrap_err();
        assert!(errs[0].message.contains("[foo]"));
        assert!(errs[0].message.contains("erdos_renyi"));
    }

    #[test]
    fn unknown_key_and_missing_section() {
        let errs = parse_config("[map]\nname = doubling\ncolour = red\n").unwrap_err();
        assert!(errs.iter().any(|e| e.line == 3 && e.message.contains("colour")));
        assert!(errs.iter().any(|e| e.message.contains("[observable]")));
        assert!(errs.iter().any(|e| e.message.contains("[run]")));
    }

    #[test]
    fn type_mismatch() {
        let errs = parse_config(&format!("{MINIMAL}[ld]\ntrials = many\n")).unwrap_err();
        assert!(errs[0].message.contains("integer"));
    }

    #[test]
    fn round_trip() {
        let text = "[map]\nname = perturbed-doubling\neps = 0.1\n[observable]\nname = table\nvalues = 0.5, -0.5, 1.0\n\
                    [run]\nseeds = 4, 5\nhorizon = 5000\nthreads = 2\n[ld]\ndecoupling_k = 20\nr_grid = 0, 10\n\
                    [entropy]\nsigma2 = 0.3\n[output]\ndir = results\n";
        let c = parse_config(text).unwrap();
        let again = parse_config(&c.to_text()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn hash_tracks_semantics_only() {
        let a = parse_config(MINIMAL).unwrap();
        let mut b = a.clone();
        b.output_dir = "elsewhere".into();
        b.threads = Some(3);
        assert_eq!(a.hash(), b.hash());
        b.transfer.resolution = 2048;
        assert_ne!(a.hash(), b.hash());
        assert_ne!(a.hash(), a.clone().with_seed_offset(1).hash());
    }
}
