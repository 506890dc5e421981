//! Effective run configuration: defaults, then a `key = value` file, then flags.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use sixstate::rate::{DEFAULT_EPS_EC, DEFAULT_EPS_TOTAL, DEFAULT_F_EC};
use sixstate::spdc::DEFAULT_ALPHA_DB_PER_KM;
use sixstate::{EvalOptions, KeyConfig, PeSharing, SearchSpace, SetupParams, SiftingProbabilities};

use crate::error::CliError;

/// A parameter that is either pinned or left to the optimizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Choice {
    Opt,
    Fixed(f64),
}

impl FromStr for Choice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("opt") {
            Ok(Choice::Opt)
        } else {
            parse_f64(s).map(Choice::Fixed)
        }
    }
}

impl fmt::Display for Choice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Choice::Opt => f.write_str("opt"),
            Choice::Fixed(v) => write!(f, "{v:e}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub length_km: f64,
    pub alpha: f64,
    pub eta_d: f64,
    /// Falls back to `eta_d`.
    pub eta_d_bob: Option<f64>,
    pub eta_m: f64,
    pub lambda: Choice,
    pub n_source: u64,
    pub eps: f64,
    pub eps_ec: f64,
    pub f_ec: f64,
    pub p_x: Choice,
    pub strict_pe: bool,
    /// 0 lets rayon decide.
    pub jobs: usize,
    pub format: Format,
    pub seed: u64,
    pub pulses: u64,
    pub target_bits: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            length_km: 20.0,
            alpha: DEFAULT_ALPHA_DB_PER_KM,
            eta_d: 1.0,
            eta_d_bob: None,
            eta_m: 0.0,
            lambda: Choice::Opt,
            n_source: 10_000_000_000,
            eps: DEFAULT_EPS_TOTAL,
            eps_ec: DEFAULT_EPS_EC,
            f_ec: DEFAULT_F_EC,
            p_x: Choice::Opt,
            strict_pe: false,
            jobs: 0,
            format: Format::Csv,
            seed: 0,
            pulses: 1_000_000,
            target_bits: 1.0,
        }
    }
}

/// Accepts plain and scientific notation, rejects NaN.
pub fn parse_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v.is_nan() {
        return Err(format!("`{s}` is not a number"));
    }
    Ok(v)
}

/// Pulse counts may be written as `1e10`; they must be whole and at least 1.
pub fn parse_count(s: &str) -> Result<u64, String> {
    let s = s.trim();
    if let Ok(n) = s.parse::<u64>() {
        return if n >= 1 { Ok(n) } else { Err(format!("count `{s}` must be >= 1")) };
    }
    let v = parse_f64(s)?;
    if !(v >= 1.0 && v.fract() == 0.0 && v < 2f64.powi(63)) {
        return Err(format!("count `{s}` must be a whole number in [1, 2^63)"));
    }
    Ok(v as u64)
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(format!("`{other}` is not a boolean")),
    }
}

impl Settings {
    /// Sets one key. Keys are the long flag names; `_` and `-` are interchangeable.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        let bad = |msg: String| CliError::Usage(format!("{key}: {msg}"));
        match key.as_str() {
            "L" => self.length_km = parse_f64(value).map_err(bad)?,
            "alpha" => self.alpha = parse_f64(value).map_err(bad)?,
            "eta-d" => self.eta_d = parse_f64(value).map_err(bad)?,
            "eta-d-bob" => self.eta_d_bob = Some(parse_f64(value).map_err(bad)?),
            "eta-m" => self.eta_m = parse_f64(value).map_err(bad)?,
            "lambda" => self.lambda = value.parse().map_err(bad)?,
            "N" => self.n_source = parse_count(value).map_err(bad)?,
            "eps" => self.eps = parse_f64(value).map_err(bad)?,
            "eps-ec" => self.eps_ec = parse_f64(value).map_err(bad)?,
            "fec" => self.f_ec = parse_f64(value).map_err(bad)?,
            "px" => self.p_x = value.parse().map_err(bad)?,
            "strict-pe" => self.strict_pe = parse_bool(value).map_err(bad)?,
            "jobs" => self.jobs = value.parse().map_err(|_| bad(format!("`{value}` is not a thread count")))?,
            "format" => {
                self.format = match value {
                    "csv" => Format::Csv,
                    "json" => Format::Json,
                    _ => return Err(bad(format!("`{value}` is not csv or json"))),
                }
            }
            "seed" => self.seed = value.parse().map_err(|_| bad(format!("`{value}` is not a u64 seed")))?,
            "pulses" => self.pulses = parse_count(value).map_err(bad)?,
            "target" => self.target_bits = parse_f64(value).map_err(bad)?,
            _ => return Err(CliError::Usage(format!("unknown configuration key `{key}`"))),
        }
        Ok(())
    }

    /// Applies a config file: one `key = value` per line, `#` starts a comment.
    pub fn apply_config_str(&mut self, text: &str) -> Result<(), CliError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {}: expected `key = value`", i + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn apply_config_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        self.apply_config_str(&text)
    }

    /// Every key with its effective value, in a form `set` reads back.
    pub fn pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("L", format!("{:e}", self.length_km)),
            ("alpha", format!("{:e}", self.alpha)),
            ("eta-d", format!("{:e}", self.eta_d)),
            ("eta-d-bob", format!("{:e}", self.eta_d_bob())),
            ("eta-m", format!("{:e}", self.eta_m)),
            ("lambda", self.lambda.to_string()),
            ("N", self.n_source.to_string()),
            ("eps", format!("{:e}", self.eps)),
            ("eps-ec", format!("{:e}", self.eps_ec)),
            ("fec", format!("{:e}", self.f_ec)),
            ("px", self.p_x.to_string()),
            ("strict-pe", self.strict_pe.to_string()),
            ("seed", self.seed.to_string()),
            ("pulses", self.pulses.to_string()),
            ("target", format!("{:e}", self.target_bits)),
        ]
    }

    pub fn eta_d_bob(&self) -> f64 {
        self.eta_d_bob.unwrap_or(self.eta_d)
    }

    /// Physical setup; `lambda` is a placeholder when it is optimized.
    pub fn setup(&self) -> Result<SetupParams, CliError> {
        let lambda = match self.lambda {
            Choice::Fixed(l) => l,
            Choice::Opt => 0.1,
        };
        Ok(SetupParams::new(lambda, self.alpha, self.length_km, self.eta_d, self.eta_d_bob(), self.eta_m)?)
    }

    pub fn key_config(&self) -> Result<KeyConfig, CliError> {
        let pe_sharing = if self.strict_pe { PeSharing::Strict } else { PeSharing::PerBasis };
        let config = KeyConfig {
            eps_total: self.eps,
            eps_ec: self.eps_ec,
            f_ec: self.f_ec,
            options: EvalOptions { pe_sharing, ..EvalOptions::default() },
        };
        config.validate()?;
        Ok(config)
    }

    pub fn search_space(&self) -> Result<SearchSpace, CliError> {
        let mut space = SearchSpace::default();
        if let Choice::Fixed(l) = self.lambda {
            space = space.with_fixed_lambda(l);
        }
        if let Choice::Fixed(p) = self.p_x {
            SiftingProbabilities::new(p)?;
            space = space.with_fixed_p_x(p);
        }
        space.validate()?;
        Ok(space)
    }

    /// Sifting for the simulator; an optimized `p_X` means balanced bases.
    pub fn sifting(&self) -> Result<SiftingProbabilities, CliError> {
        Ok(match self.p_x {
            Choice::Fixed(p) => SiftingProbabilities::new(p)?,
            Choice::Opt => SiftingProbabilities::balanced(),
        })
    }
}
