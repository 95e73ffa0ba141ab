//! Flat `section.key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Lists are
//! comma-separated. Keys that are absent keep the value of the standard test
//! configuration.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use fastslow_core::expansion::ResidualSettings;
use fastslow_core::model::{make_frequency, FrequencyModel, Preset, SystemParams};
use fastslow_core::Setup;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: expected `section.key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` given twice")]
    Duplicate { line: usize, key: String },
    #[error("`{key}`: cannot parse `{value}`")]
    Value { key: String, value: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Documented keys, in the order they are written.
pub const KEYS: [&str; 16] = [
    "frequency.preset",
    "frequency.coefficients",
    "initial.y",
    "initial.p",
    "initial.u",
    "run.horizon",
    "run.epsilons",
    "integrator.step_factor",
    "integrator.rtol",
    "integrator.atol",
    "integrator.reference_cap",
    "output.grid_points",
    "output.directory",
    "averaging.window_periods",
    "twoscale.r_points",
    "twoscale.s_points",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub preset: Preset,
    pub coefficients: Vec<f64>,
    pub y_star: f64,
    pub p_star: f64,
    pub u_star: f64,
    pub horizon: f64,
    pub epsilons: Vec<f64>,
    pub step_factor: f64,
    pub rtol: f64,
    pub atol: f64,
    pub reference_cap: f64,
    pub grid_points: usize,
    pub out_dir: PathBuf,
    pub window_periods: usize,
    pub twoscale_r: usize,
    pub twoscale_s: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let s = ResidualSettings::default();
        RunConfig {
            preset: Preset::Sine,
            coefficients: vec![2.0, 1.0],
            y_star: 0.0,
            p_star: 1.0,
            u_star: 1.0,
            horizon: 1.0,
            epsilons: vec![0.04, 0.02, 0.01, 0.005],
            step_factor: s.step_factor,
            rtol: s.rtol,
            atol: s.atol,
            reference_cap: s.reference_cap,
            grid_points: s.grid_points,
            out_dir: PathBuf::from("out"),
            window_periods: 8,
            twoscale_r: 512,
            twoscale_s: 256,
        }
    }
}

/// Default coefficients used when `--preset` switches the frequency family.
pub fn preset_defaults(preset: Preset) -> Vec<f64> {
    match preset {
        Preset::Constant => vec![2.0],
        Preset::Sine => vec![2.0, 1.0],
        Preset::Custom => vec![2.0, 0.0, 1.0],
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::Value {
        key: key.to_string(),
        value: value.to_string(),
    })
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>, ConfigError> {
    value
        .split(',')
        .map(|v| parse_value(key, v.trim()))
        .collect()
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format!("{v:?}"))
        .collect::<Vec<_>>()
        .join(", ")
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        let mut seen = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let Some((key, value)) = trimmed.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line,
                    text: trimmed.to_string(),
                });
            };
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                });
            }
            if seen.contains(&key) {
                return Err(ConfigError::Duplicate {
                    line,
                    key: key.to_string(),
                });
            }
            seen.push(key);
            cfg.set(key, value)?;
        }
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "frequency.preset" => {
                self.preset = value.parse().map_err(|_| ConfigError::Value {
                    key: key.into(),
                    value: value.into(),
                })?
            }
            "frequency.coefficients" => self.coefficients = parse_list(key, value)?,
            "initial.y" => self.y_star = parse_value(key, value)?,
            "initial.p" => self.p_star = parse_value(key, value)?,
            "initial.u" => self.u_star = parse_value(key, value)?,
            "run.horizon" => self.horizon = parse_value(key, value)?,
            "run.epsilons" => self.epsilons = parse_list(key, value)?,
            "integrator.step_factor" => self.step_factor = parse_value(key, value)?,
            "integrator.rtol" => self.rtol = parse_value(key, value)?,
            "integrator.atol" => self.atol = parse_value(key, value)?,
            "integrator.reference_cap" => self.reference_cap = parse_value(key, value)?,
            "output.grid_points" => self.grid_points = parse_value(key, value)?,
            "output.directory" => self.out_dir = PathBuf::from(value),
            "averaging.window_periods" => self.window_periods = parse_value(key, value)?,
            "twoscale.r_points" => self.twoscale_r = parse_value(key, value)?,
            "twoscale.s_points" => self.twoscale_s = parse_value(key, value)?,
            _ => unreachable!("key checked against KEYS"),
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Serialize every key; floats use the shortest representation that
    /// parses back to the same bits.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("frequency.preset", self.preset.name().to_string());
        put("frequency.coefficients", join(&self.coefficients));
        put("initial.y", format!("{:?}", self.y_star));
        put("initial.p", format!("{:?}", self.p_star));
        put("initial.u", format!("{:?}", self.u_star));
        put("run.horizon", format!("{:?}", self.horizon));
        put("run.epsilons", join(&self.epsilons));
        put("integrator.step_factor", format!("{:?}", self.step_factor));
        put("integrator.rtol", format!("{:?}", self.rtol));
        put("integrator.atol", format!("{:?}", self.atol));
        put(
            "integrator.reference_cap",
            format!("{:?}", self.reference_cap),
        );
        put("output.grid_points", self.grid_points.to_string());
        put("output.directory", self.out_dir.display().to_string());
        put("averaging.window_periods", self.window_periods.to_string());
        put("twoscale.r_points", self.twoscale_r.to_string());
        put("twoscale.s_points", self.twoscale_s.to_string());
        s
    }

    pub fn frequency(&self) -> Result<FrequencyModel, ConfigError> {
        make_frequency(self.preset, &self.coefficients)
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn params(&self) -> SystemParams {
        SystemParams {
            y_star: self.y_star,
            p_star: self.p_star,
            u_star: self.u_star,
            horizon: self.horizon,
        }
    }

    pub fn settings(&self) -> ResidualSettings {
        ResidualSettings {
            rtol: self.rtol,
            atol: self.atol,
            step_factor: self.step_factor,
            grid_points: self.grid_points,
            reference_cap: self.reference_cap,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.epsilons.is_empty() {
            return bad("run.epsilons is empty".into());
        }
        if self.epsilons.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return bad(format!(
                "run.epsilons must be positive, got {:?}",
                self.epsilons
            ));
        }
        if self.epsilons.windows(2).any(|w| w[1] >= w[0]) {
            return bad(format!(
                "run.epsilons must be strictly decreasing, got {:?}",
                self.epsilons
            ));
        }
        for (name, v) in [
            ("integrator.step_factor", self.step_factor),
            ("integrator.rtol", self.rtol),
            ("integrator.atol", self.atol),
            ("integrator.reference_cap", self.reference_cap),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if self.grid_points < 5 {
            return bad(format!(
                "output.grid_points must be at least 5, got {}",
                self.grid_points
            ));
        }
        if self.window_periods == 0 {
            return bad("averaging.window_periods must be at least 1".into());
        }
        if self.twoscale_r < 2 || self.twoscale_s == 0 {
            return bad("two-scale grid needs r_points >= 2 and s_points >= 1".into());
        }
        self.frequency()?;
        self.params()
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn setup(&self) -> Result<Setup, ConfigError> {
        self.validate()?;
        Setup::new(
            self.params(),
            self.frequency()?,
            self.settings(),
            self.window_periods,
        )
        .map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use fastslow_core::derived_constants;

    #[test]
    fn default_round_trips() {
        let c = RunConfig::default();
        let back = RunConfig::parse(&c.to_text()).unwrap();
        assert_eq!(c, back);
    }

    #[test]
    fn derived_constants_survive_round_trip_bit_for_bit() {
        let c = RunConfig {
            y_star: 0.1 + 0.2,
            p_star: 1.0 / 3.0,
            u_star: std::f64::consts::E,
            coefficients: vec![2.000000000000001, 0.7],
            ..RunConfig::default()
        };
        let back = RunConfig::parse(&c.to_text()).unwrap();
        let a = derived_constants(&c.params(), &c.frequency().unwrap());
        let b = derived_constants(&back.params(), &back.frequency().unwrap());
        assert_eq!(a.theta_star.to_bits(), b.theta_star.to_bits());
        assert_eq!(a.e_star.to_bits(), b.e_star.to_bits());
        assert_eq!(a.entropy_constant.to_bits(), b.entropy_constant.to_bits());
        assert_eq!(a.c_sbarbar2.to_bits(), b.c_sbarbar2.to_bits());
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let c = RunConfig::parse("# comment\n\nrun.epsilons = 0.1, 0.05\nfrequency.preset = constant\nfrequency.coefficients = 3\n").unwrap();
        assert_eq!(c.epsilons, vec![0.1, 0.05]);
        assert_eq!(c.preset, Preset::Constant);
        assert_eq!(c.horizon, 1.0);
        c.validate().unwrap();
    }

    #[test]
    fn errors() {
        assert!(matches!(
            RunConfig::parse("nonsense"),
            Err(ConfigError::Syntax { line: 1, .. })
        ));
        assert!(matches!(
            RunConfig::parse("run.foo = 1"),
            Err(ConfigError::UnknownKey { .. })
        ));
        assert!(matches!(
            RunConfig::parse("run.horizon = 1\nrun.horizon = 2"),
            Err(ConfigError::Duplicate { line: 2, .. })
        ));
        assert!(matches!(
            RunConfig::parse("run.horizon = x"),
            Err(ConfigError::Value { .. })
        ));
        let c = RunConfig::parse("run.epsilons = 0.01, 0.02").unwrap();
        assert!(c.validate().is_err());
        let c = RunConfig::parse("integrator.rtol = 0").unwrap();
        assert!(c.validate().is_err());
        let c = RunConfig::parse("frequency.coefficients = 1, 2").unwrap();
        assert!(c.validate().is_err());
    }
}
