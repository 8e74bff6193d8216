//! Experiment configuration: a flat `key = value` file or a JSON object with
//! the same keys. Unknown keys and malformed values are reported with their
//! line number.
//!
//! ```text
//! # phase retrieval, constant steps
//! bench = phase-retrieval
//! n = 10
//! m = 30
//! geometry = euclidean
//! schedule = constant
//! c = auto
//! n_grid = 100, 1000, 10000
//! trials = 50
//! seed = 2024
//! ```

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::{BenchKind, BenchmarkSpec, GeometryKind, OracleMode};
use crate::smd::{OutputRule, Storage};
use crate::stationarity::InnerOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleFamily {
    Constant,
    InvSqrt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub bench: String,
    pub n: usize,
    pub m: usize,
    /// l1 weight for the regression benchmark, oracle noise for the quadratic.
    pub lambda: f64,
    pub bench_seed: u64,
    pub geometry: GeometryKind,
    pub oracle_mode: OracleMode,
    pub schedule: ScheduleFamily,
    /// `None` selects the stepsize constant that minimises the constant-step bound.
    pub c: Option<f64>,
    pub n_grid: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    /// `rho_hat = rho_hat_factor * rho`.
    pub rho_hat_factor: f64,
    pub inner_tol: f64,
    pub inner_max_iters: usize,
    pub storage: Storage,
    pub output_rule: OutputRule,
    /// `None`: every iterate for the argmin rule, first and last otherwise.
    pub record_every: Option<usize>,
    pub slope_min: f64,
    pub slope_max: f64,
    pub check_slope: bool,
    pub max_failure_rate: f64,
    pub out_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            bench: "phase-retrieval".into(),
            n: 10,
            m: 30,
            lambda: 0.05,
            bench_seed: 1,
            geometry: GeometryKind::Euclidean,
            oracle_mode: OracleMode::BoundedMoment,
            schedule: ScheduleFamily::Constant,
            c: None,
            n_grid: vec![100, 1000, 10000],
            trials: 50,
            seed: 0,
            rho_hat_factor: 2.0,
            inner_tol: 1e-10,
            inner_max_iters: 20_000,
            storage: Storage::StoreAll,
            output_rule: OutputRule::WeightedRandom,
            record_every: None,
            slope_min: -0.75,
            slope_max: -0.25,
            check_slope: true,
            max_failure_rate: 0.05,
            out_dir: None,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> std::result::Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("cannot parse `{value}` for `{key}`"))
}

fn parse_bool(key: &str, value: &str) -> std::result::Result<bool, String> {
    match value {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(format!("cannot parse `{value}` for `{key}` as a boolean")),
    }
}

fn parse_kebab<T: for<'de> Deserialize<'de>>(key: &str, value: &str) -> std::result::Result<T, String> {
    serde_json::from_value(serde_json::Value::String(value.into())).map_err(|_| format!("unknown value `{value}` for `{key}`"))
}

impl ExperimentConfig {
    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let value = value.trim();
        match key {
            "bench" => {
                BenchKind::from_name(value, 1, 1, 0.0, 0).map_err(|e| e.to_string())?;
                self.bench = value.into();
            }
            "n" => self.n = parse(key, value)?,
            "m" => self.m = parse(key, value)?,
            "lambda" => self.lambda = parse(key, value)?,
            "bench_seed" => self.bench_seed = parse(key, value)?,
            "geometry" => self.geometry = value.parse().map_err(|e: Error| e.to_string())?,
            "oracle_mode" => self.oracle_mode = parse_kebab(key, value)?,
            "schedule" => self.schedule = parse_kebab(key, value)?,
            "c" => {
                self.c = match value {
                    "auto" => None,
                    v => Some(parse(key, v)?),
                }
            }
            "n_grid" => {
                let grid = value
                    .trim_matches(|c| c == '[' || c == ']')
                    .split(|c: char| c == ',' || c.is_whitespace())
                    .filter(|s| !s.is_empty())
                    .map(|s| parse::<f64>(key, s).and_then(|v| positive_int(key, v)))
                    .collect::<std::result::Result<Vec<_>, _>>()?;
                self.n_grid = grid;
            }
            "trials" => self.trials = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "rho_hat_factor" => self.rho_hat_factor = parse(key, value)?,
            "inner_tol" => self.inner_tol = parse(key, value)?,
            "inner_max_iters" => self.inner_max_iters = parse(key, value)?,
            "storage" => self.storage = parse_kebab(key, value)?,
            "output_rule" => self.output_rule = parse_kebab(key, value)?,
            "record_every" => {
                self.record_every = match value {
                    "auto" => None,
                    v => Some(parse(key, v)?),
                }
            }
            "slope_min" => self.slope_min = parse(key, value)?,
            "slope_max" => self.slope_max = parse(key, value)?,
            "check_slope" => self.check_slope = parse_bool(key, value)?,
            "max_failure_rate" => self.max_failure_rate = parse(key, value)?,
            "out_dir" => self.out_dir = Some(PathBuf::from(value)),
            other => return Err(format!("unknown key `{other}`")),
        }
        Ok(())
    }

    /// Parses either format; JSON is recognised by a leading `{`.
    pub fn parse(text: &str) -> Result<Self> {
        if text.trim_start().starts_with('{') {
            Self::parse_json(text)
        } else {
            Self::parse_kv(text)
        }
    }

    fn parse_kv(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Config {
                    line: i + 1,
                    message: format!("expected `key = value`, found `{line}`"),
                });
            };
            cfg.set(k.trim(), v).map_err(|message| Error::Config { line: i + 1, message })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn parse_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Config {
            line: e.line(),
            message: e.to_string(),
        })?;
        let serde_json::Value::Object(map) = value else {
            return Err(Error::Config {
                line: 1,
                message: "expected a JSON object".into(),
            });
        };
        let mut cfg = Self::default();
        for (k, v) in &map {
            let s = match v {
                serde_json::Value::String(s) => s.clone(),
                serde_json::Value::Array(items) => items.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","),
                serde_json::Value::Null => "auto".into(),
                other => other.to_string(),
            };
            let line = text
                .lines()
                .position(|l| l.contains(&format!("\"{k}\"")))
                .map_or(1, |p| p + 1);
            cfg.set(k, &s).map_err(|message| Error::Config { line, message })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies `key=value` overrides (from the command line) on top of `self`.
    pub fn apply_overrides<'a>(&mut self, pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<()> {
        for (k, v) in pairs {
            self.set(k, v).map_err(|message| Error::Config { line: 0, message })?;
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config { line: 0, message: m.into() });
        if self.n_grid.is_empty() {
            return bad("n_grid is empty");
        }
        if self.trials == 0 {
            return bad("trials must be positive");
        }
        if !(self.rho_hat_factor > 1.0) {
            return bad("rho_hat_factor must exceed 1");
        }
        if matches!(self.c, Some(c) if !(c > 0.0 && c.is_finite())) {
            return bad("c must be positive");
        }
        if self.record_every == Some(0) {
            return bad("record_every must be positive");
        }
        if !(self.inner_tol > 0.0) {
            return bad("inner_tol must be positive");
        }
        Ok(())
    }

    pub fn bench_spec(&self) -> Result<BenchmarkSpec> {
        let kind = BenchKind::from_name(&self.bench, self.n, self.m, self.lambda, self.bench_seed)?;
        Ok(BenchmarkSpec::new(kind, self.geometry).with_mode(self.oracle_mode))
    }

    pub fn inner_options(&self) -> InnerOptions {
        InnerOptions {
            max_iters: self.inner_max_iters,
            tol: self.inner_tol,
            ..InnerOptions::default()
        }
    }
}

fn positive_int(key: &str, v: f64) -> std::result::Result<usize, String> {
    if v >= 1.0 && v.fract() == 0.0 && v < 1e12 {
        Ok(v as usize)
    } else {
        Err(format!("`{key}` entries must be positive integers, got {v}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_value_with_comments() {
        let cfg = ExperimentConfig::parse("# x\nbench = entropy-toy\n\ngeometry=entropy # y\nn_grid = 1e2, 1e3\nc = 0.5\n").unwrap();
        assert_eq!(cfg.bench, "entropy-toy");
        assert_eq!(cfg.geometry, GeometryKind::Entropy);
        assert_eq!(cfg.n_grid, vec![100, 1000]);
        assert_eq!(cfg.c, Some(0.5));
    }

    #[test]
    fn errors_carry_line_numbers() {
        match ExperimentConfig::parse("n = 3\n\ntrails = 5\n") {
            Err(Error::Config { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        match ExperimentConfig::parse("n = 3\nno equals sign\n") {
            Err(Error::Config { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn json_matches_key_value() {
        let a = ExperimentConfig::parse("{\n  \"schedule\": \"inv-sqrt\",\n  \"n_grid\": [10, 20],\n  \"c\": null\n}").unwrap();
        let b = ExperimentConfig::parse("schedule = inv-sqrt\nn_grid = 10,20\nc = auto").unwrap();
        assert_eq!(a, b);
        match ExperimentConfig::parse("{\n  \"trials\": 5,\n  \"storage\": \"tape\"\n}") {
            Err(Error::Config { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn overrides_win() {
        let mut cfg = ExperimentConfig::parse("trials = 5").unwrap();
        cfg.apply_overrides([("trials", "7")]).unwrap();
        assert_eq!(cfg.trials, 7);
    }
}
