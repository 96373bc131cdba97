//! Experiment configuration: parsing, defaults and validation.

use std::path::PathBuf;

use eqlab::density::{Interval, DEFAULT_WINDOW};
use eqlab::equidist::Case;
use eqlab::orbits::{AffineMap, DEFAULT_CUTOFF, DEFAULT_GRID};
use eqlab::MeasureExpr;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::schema::{AffineSchema, CaseSchema, IntervalSchema, MeasureSchema};

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_DEPTH: u32 = 2;
pub const DEFAULT_ENSEMBLE: usize = 20;
pub const DEFAULT_MODES: i64 = 8;
pub const DEFAULT_STATIONARITY_WINDOW: usize = 500;
pub const DEFAULT_DENSITY_HORIZON: u64 = 200;
pub const DEFAULT_DIMENSION_LEVEL: u64 = 64;
pub const DEFAULT_Q_MAX: u32 = 4;
pub const DEFAULT_LEVELS: [u32; 2] = [6, 8];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Equidist,
    Fourier,
    Dimension,
    Scenery,
    Density,
    Convdim,
}

/// One experiment. Unset optional knobs take the documented defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    /// Master seed; member `i` uses stream `i` of ChaCha8 seeded with it.
    pub seed: u64,
    #[serde(default)]
    #[schemars(with = "Option<MeasureSchema>")]
    pub measure: Option<MeasureExpr>,
    #[serde(default)]
    pub m: Option<u32>,
    #[serde(default)]
    pub n: Option<u32>,
    /// Digit base of the sampled measure; checked against `measure` when given.
    #[serde(default)]
    pub p: Option<u32>,
    #[serde(default)]
    #[schemars(with = "AffineSchema")]
    pub f: AffineMap,
    #[serde(default)]
    #[schemars(with = "AffineSchema")]
    pub g: AffineMap,
    #[serde(default)]
    #[schemars(with = "Option<CaseSchema>")]
    pub case: Option<Case>,
    #[serde(default)]
    pub schedule: Vec<u64>,
    #[serde(default = "default_ensemble")]
    pub ensemble: usize,
    /// Fourier cutoff `F`.
    #[serde(default = "default_cutoff")]
    pub cutoff: usize,
    /// Histogram side `G`.
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Scenery descriptor depth.
    #[serde(default = "default_depth")]
    pub r: u32,
    /// Horizon: density max index, dimension level, or scenery length.
    #[serde(default)]
    pub k: Option<u64>,
    /// Density window width.
    #[serde(default = "default_window")]
    pub window: usize,
    /// Scenery stationarity window `W`.
    #[serde(default = "default_stationarity")]
    pub w: usize,
    /// Largest `|k|` in a Fourier table.
    #[serde(default = "default_modes")]
    pub modes: i64,
    #[serde(default = "default_levels")]
    pub levels: Vec<u32>,
    #[serde(default = "default_q_max")]
    pub q_max: u32,
    #[serde(default)]
    #[schemars(with = "Option<IntervalSchema>")]
    pub interval: Option<Interval>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_ensemble() -> usize {
    DEFAULT_ENSEMBLE
}
fn default_cutoff() -> usize {
    DEFAULT_CUTOFF
}
fn default_grid() -> usize {
    DEFAULT_GRID
}
fn default_tol() -> f64 {
    DEFAULT_TOL
}
fn default_depth() -> u32 {
    DEFAULT_DEPTH
}
fn default_window() -> usize {
    DEFAULT_WINDOW
}
fn default_stationarity() -> usize {
    DEFAULT_STATIONARITY_WINDOW
}
fn default_modes() -> i64 {
    DEFAULT_MODES
}
fn default_levels() -> Vec<u32> {
    DEFAULT_LEVELS.to_vec()
}
fn default_q_max() -> u32 {
    DEFAULT_Q_MAX
}

impl ExperimentConfig {
    /// Minimal config of the given kind; every other knob at its default.
    pub fn new(kind: Kind, seed: u64) -> Self {
        Self {
            kind,
            seed,
            measure: None,
            m: None,
            n: None,
            p: None,
            f: AffineMap::identity(),
            g: AffineMap::identity(),
            case: None,
            schedule: Vec::new(),
            ensemble: DEFAULT_ENSEMBLE,
            cutoff: DEFAULT_CUTOFF,
            grid: DEFAULT_GRID,
            tol: DEFAULT_TOL,
            r: DEFAULT_DEPTH,
            k: None,
            window: DEFAULT_WINDOW,
            w: DEFAULT_STATIONARITY_WINDOW,
            modes: DEFAULT_MODES,
            levels: default_levels(),
            q_max: DEFAULT_Q_MAX,
            interval: None,
            output: None,
        }
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let config: Self = serde_json::from_str(text).map_err(ConfigError::from_json)?;
        config.validate()?;
        Ok(config)
    }

    pub fn measure(&self) -> Result<&MeasureExpr, ConfigError> {
        self.measure.as_ref().ok_or(ConfigError::missing("measure"))
    }

    pub fn factor(&self, field: &'static str) -> Result<u32, ConfigError> {
        let v = match field {
            "m" => self.m,
            _ => self.n,
        };
        match v {
            Some(v) if v >= 2 => Ok(v),
            Some(v) => Err(ConfigError::new(field, format!("must be at least 2, got {v}"))),
            None => Err(ConfigError::missing(field)),
        }
    }

    pub fn horizon(&self, default: u64) -> u64 {
        self.k.unwrap_or(default)
    }

    fn require_digit(&self) -> Result<(), ConfigError> {
        match self.measure()? {
            MeasureExpr::Digit { .. } => Ok(()),
            other => Err(ConfigError::new("measure", format!("expected a digit measure, got {}", other.describe()))),
        }
    }

    fn require_one_dim(&self) -> Result<&MeasureExpr, ConfigError> {
        let mu = self.measure()?;
        if mu.dim() != 1 {
            return Err(ConfigError::new("measure", "expected a measure on the circle"));
        }
        Ok(mu)
    }

    fn check_m_above_n(&self) -> Result<(u32, u32), ConfigError> {
        let (m, n) = (self.factor("m")?, self.factor("n")?);
        if m <= n {
            return Err(ConfigError::new("m", format!("need m > n > 1, got m={m}, n={n}")));
        }
        Ok((m, n))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(ConfigError::new("tol", format!("must be positive, got {}", self.tol)));
        }
        if let (Some(p), Some(mu)) = (self.p, self.measure.as_ref()) {
            if mu.sample_base() != p {
                return Err(ConfigError::new(
                    "p",
                    format!("measure samples base-{} digits, not base {p}", mu.sample_base()),
                ));
            }
        }
        match self.kind {
            Kind::Equidist => {
                self.require_one_dim()?;
                self.factor("m")?;
                self.factor("n")?;
                if self.case.is_none() {
                    return Err(ConfigError::missing("case"));
                }
                if self.schedule.is_empty() || self.schedule[0] == 0 || self.schedule.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(ConfigError::new("schedule", "must be non-empty, positive and strictly increasing"));
                }
                if self.ensemble == 0 {
                    return Err(ConfigError::new("ensemble", "must be at least 1"));
                }
                if self.grid == 0 {
                    return Err(ConfigError::new("grid", "must be at least 1"));
                }
            }
            Kind::Fourier => {
                self.measure()?;
                if self.modes < 0 {
                    return Err(ConfigError::new("modes", "must be non-negative"));
                }
            }
            Kind::Dimension => {
                self.require_digit()?;
                if self.ensemble == 0 {
                    return Err(ConfigError::new("ensemble", "must be at least 1"));
                }
                if self.horizon(DEFAULT_DIMENSION_LEVEL) == 0 {
                    return Err(ConfigError::new("k", "must be at least 1"));
                }
            }
            Kind::Scenery => {
                self.require_one_dim()?;
                if self.r == 0 || self.r > 16 {
                    return Err(ConfigError::new("r", "descriptor depth must be in 1..=16"));
                }
                if self.m.is_some() {
                    self.factor("m")?;
                }
                if self.w == 0 {
                    return Err(ConfigError::new("w", "must be at least 1"));
                }
            }
            Kind::Density => {
                self.require_one_dim()?;
                self.check_m_above_n()?;
                if self.window == 0 {
                    return Err(ConfigError::new("window", "must be at least 1"));
                }
            }
            Kind::Convdim => {
                self.require_digit()?;
                if self.q_max == 0 {
                    return Err(ConfigError::new("q_max", "must be at least 1"));
                }
                if self.levels.is_empty() || self.levels.contains(&0) {
                    return Err(ConfigError::new("levels", "must be a non-empty list of positive levels"));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_in() {
        let c = ExperimentConfig::parse(
            r#"{"kind":"convdim","seed":1,"measure":{"type":"digit","base":2,"probs":["1/3","2/3"]}}"#,
        )
        .unwrap();
        assert_eq!(c.cutoff, 8);
        assert_eq!(c.grid, 64);
        assert_eq!(c.tol, 1e-12);
        assert_eq!(c.r, 2);
        assert_eq!(c.window, 50);
        assert_eq!(c.levels, vec![6, 8]);
    }

    #[test]
    fn seed_is_required() {
        let err = ExperimentConfig::parse(r#"{"kind":"fourier","measure":{"type":"lebesgue"}}"#).unwrap_err();
        assert!(err.to_string().contains("seed"));
    }

    #[test]
    fn bad_probs_name_the_field() {
        let err = ExperimentConfig::parse(
            r#"{"kind":"fourier","seed":1,"measure":{"type":"digit","base":2,"probs":["1/3","1/3"]}}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("probs"), "{err}");
    }

    #[test]
    fn density_needs_m_above_n() {
        let err = ExperimentConfig::parse(r#"{"kind":"density","seed":1,"m":2,"n":3,"measure":{"type":"lebesgue"}}"#)
            .unwrap_err();
        assert_eq!(err.field(), "m");
    }

    #[test]
    fn schedule_must_increase() {
        let err = ExperimentConfig::parse(
            r#"{"kind":"equidist","seed":1,"m":3,"n":2,"case":"part1","schedule":[10,10],"measure":{"type":"lebesgue"}}"#,
        )
        .unwrap_err();
        assert_eq!(err.field(), "schedule");
    }

    #[test]
    fn p_must_match_the_measure() {
        let err = ExperimentConfig::parse(
            r#"{"kind":"fourier","seed":1,"p":3,"measure":{"type":"digit","base":2,"probs":["1/3","2/3"]}}"#,
        )
        .unwrap_err();
        assert_eq!(err.field(), "p");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(
            ExperimentConfig::parse(r#"{"kind":"fourier","seed":1,"measure":{"type":"lebesgue"},"oops":1}"#).is_err()
        );
    }
}
