//! Experiment configuration: a TOML file with dotted section keys.
//!
//! ```toml
//! grid.L = 50.26548245743669
//! grid.N = 256
//! params.mu = 1.0
//! params.xi = 1.0
//! recipe.kind = "piecewise_constant_disks"
//! recipe.amplitude = 0.05
//! recipe.delta_h = 2.0
//! stepper.dt = 0.01
//! stepper.t_end = 40.0
//! study.kind = "single_run"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cole_hopf::ChemistryParams;
use crate::evolve::{DtMode, Mode, Scheme, StepperConfig};
use crate::field::Grid;
use crate::init_data::InitialDataRecipe;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid {field}: {reason}")]
    Invalid { field: String, reason: String },
}

fn invalid(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(rename = "L")]
    pub side: f64,
    #[serde(rename = "N")]
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    /// Defaults to `mu · xi`; if given it must agree.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi: Option<f64>,
    #[serde(default = "one")]
    pub mu: f64,
    #[serde(default = "one")]
    pub xi: f64,
}

impl Default for ParamsSection {
    fn default() -> Self {
        Self {
            chi: None,
            mu: 1.0,
            xi: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeName {
    ImexBe,
    ImexCn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DtModeName {
    Fixed,
    Cfl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    Transformed,
    Original,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepperSection {
    pub dt: f64,
    #[serde(default = "default_dt_mode")]
    pub dt_mode: DtModeName,
    #[serde(default = "default_cfl")]
    pub cfl_number: f64,
    #[serde(default = "default_scheme")]
    pub scheme: SchemeName,
    pub t_end: f64,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    #[serde(default = "default_mode")]
    pub mode: ModeName,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyKind {
    SingleRun,
    DeltaSweep,
    Refinement,
    CrossValidate,
    ThetaScan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySection {
    #[serde(default = "default_study")]
    pub kind: StudyKind,
    /// Mollifier widths in units of `h`, strictly decreasing.
    #[serde(default)]
    pub deltas_h: Vec<f64>,
    #[serde(default)]
    pub resolutions: Vec<usize>,
    #[serde(default)]
    pub dts: Vec<f64>,
    #[serde(default)]
    pub amplitudes: Vec<f64>,
    #[serde(default = "default_window")]
    pub decay_window: [f64; 2],
}

impl Default for StudySection {
    fn default() -> Self {
        Self {
            kind: StudyKind::SingleRun,
            deltas_h: Vec::new(),
            resolutions: Vec::new(),
            dts: Vec::new(),
            amplitudes: Vec::new(),
            decay_window: default_window(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            snapshot_times: Vec::new(),
        }
    }
}

fn one() -> f64 {
    1.0
}
fn default_dt_mode() -> DtModeName {
    DtModeName::Fixed
}
fn default_cfl() -> f64 {
    0.5
}
fn default_scheme() -> SchemeName {
    SchemeName::ImexCn
}
fn default_record_every() -> usize {
    1
}
fn default_mode() -> ModeName {
    ModeName::Transformed
}
fn default_study() -> StudyKind {
    StudyKind::SingleRun
}
fn default_window() -> [f64; 2] {
    [2.0, 20.0]
}
fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    grid: GridSection,
    #[serde(default)]
    params: ParamsSection,
    recipe: toml::Table,
    stepper: StepperSection,
    #[serde(default)]
    study: StudySection,
    #[serde(default)]
    output: OutputSection,
}

/// A validated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub grid: GridSection,
    pub params: ParamsSection,
    /// `recipe.delta` already resolved from `recipe.delta_h` if that was set.
    pub recipe: InitialDataRecipe,
    /// Mollifier width in units of `h`, as given.
    pub delta_h: Option<f64>,
    pub stepper: StepperSection,
    pub study: StudySection,
    pub output: OutputSection,
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let mut table = raw.recipe;
        let delta_h = match table.remove("delta_h") {
            None => None,
            Some(v) => Some(
                v.as_float()
                    .or_else(|| v.as_integer().map(|i| i as f64))
                    .ok_or_else(|| invalid("recipe.delta_h", "must be a number"))?,
            ),
        };
        let recipe: InitialDataRecipe = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Parse(format!("in [recipe]: {e}")))?;
        let mut cfg = Self {
            grid: raw.grid,
            params: raw.params,
            recipe,
            delta_h,
            stepper: raw.stepper,
            study: raw.study,
            output: raw.output,
        };
        if let Some(dh) = delta_h {
            if recipe_has_explicit_delta(text) {
                return Err(invalid("recipe.delta", "give either recipe.delta or recipe.delta_h"));
            }
            cfg.recipe.delta = dh * cfg.spacing();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn spacing(&self) -> f64 {
        self.grid.side / self.grid.n as f64
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.grid.side > 0.0 && self.grid.side.is_finite()) {
            return Err(invalid("grid.L", format!("must be positive, got {}", self.grid.side)));
        }
        if self.grid.n < 8 || self.grid.n % 2 != 0 {
            return Err(invalid("grid.N", format!("must be even and >= 8, got {}", self.grid.n)));
        }
        self.chemistry()?;
        if let Some(dh) = self.delta_h {
            if !(dh >= 0.0 && dh.is_finite()) {
                return Err(invalid("recipe.delta_h", format!("must be >= 0, got {dh}")));
            }
        }
        if self.recipe.delta > self.grid.side / 4.0 {
            return Err(invalid(
                "recipe.delta",
                format!("{} exceeds L/4 = {}", self.recipe.delta, self.grid.side / 4.0),
            ));
        }
        self.recipe
            .validate()
            .map_err(|e| invalid("recipe", e.to_string()))?;
        self.stepper_config()?;
        for &t in &self.output.snapshot_times {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(invalid("output.snapshot_times", format!("bad time {t}")));
            }
        }
        self.validate_study()
    }

    fn validate_study(&self) -> Result<(), ConfigError> {
        let s = &self.study;
        let [lo, hi] = s.decay_window;
        if !(lo >= 1.0 && hi > lo) {
            return Err(invalid("study.decay_window", format!("need 1 <= lo < hi, got [{lo}, {hi}]")));
        }
        match s.kind {
            StudyKind::SingleRun => {}
            StudyKind::DeltaSweep => {
                if s.deltas_h.len() < 3 {
                    return Err(invalid("study.deltas_h", "need at least 3 widths"));
                }
                if s.deltas_h.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
                    return Err(invalid("study.deltas_h", "widths must be positive"));
                }
                if s.deltas_h.windows(2).any(|w| !(w[1] < w[0])) {
                    return Err(invalid("study.deltas_h", "widths must be strictly decreasing"));
                }
            }
            StudyKind::Refinement => {
                if s.resolutions.is_empty() && s.dts.is_empty() {
                    return Err(invalid("study.resolutions", "need resolutions and/or dts"));
                }
                if !s.resolutions.is_empty() {
                    check_levels_usize("study.resolutions", &s.resolutions, 3)?;
                }
                if !s.dts.is_empty() {
                    if s.dts.len() < 3 {
                        return Err(invalid("study.dts", "need at least 3 levels"));
                    }
                    if s.dts.iter().any(|&d| !(d > 0.0)) || s.dts.windows(2).any(|w| !(w[1] < w[0])) {
                        return Err(invalid("study.dts", "must be positive and strictly decreasing"));
                    }
                }
            }
            StudyKind::CrossValidate => {
                if !s.resolutions.is_empty() {
                    check_levels_usize("study.resolutions", &s.resolutions, 2)?;
                }
            }
            StudyKind::ThetaScan => {
                if s.amplitudes.is_empty() {
                    return Err(invalid("study.amplitudes", "need at least one amplitude"));
                }
                if s.amplitudes.iter().any(|a| !a.is_finite())
                    || s.amplitudes.windows(2).any(|w| !(w[1] > w[0]))
                {
                    return Err(invalid("study.amplitudes", "must be strictly increasing"));
                }
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid<f64>, ConfigError> {
        Grid::new(self.grid.side, self.grid.n).map_err(|e| invalid("grid", e.to_string()))
    }

    pub fn chemistry(&self) -> Result<ChemistryParams<f64>, ConfigError> {
        let p = ChemistryParams::new(self.params.mu, self.params.xi)
            .map_err(|e| invalid("params", e.to_string()))?;
        if let Some(chi) = self.params.chi {
            if (chi - p.chi).abs() > 1e-14 * p.chi.abs().max(1.0) {
                return Err(invalid(
                    "params.chi",
                    format!("{chi} differs from mu*xi = {}", p.chi),
                ));
            }
        }
        Ok(p)
    }

    pub fn mode(&self) -> Mode {
        match self.stepper.mode {
            ModeName::Transformed => Mode::Transformed,
            ModeName::Original => Mode::Original,
        }
    }

    pub fn stepper_config(&self) -> Result<StepperConfig<f64>, ConfigError> {
        let s = &self.stepper;
        let cfg = StepperConfig {
            dt: s.dt,
            dt_mode: match s.dt_mode {
                DtModeName::Fixed => DtMode::Fixed,
                DtModeName::Cfl => DtMode::Cfl,
            },
            cfl_number: s.cfl_number,
            scheme: match s.scheme {
                SchemeName::ImexBe => Scheme::ImexBe,
                SchemeName::ImexCn => Scheme::ImexCn,
            },
            t_end: s.t_end,
            record_every: s.record_every,
        };
        cfg.validate().map_err(|e| {
            let msg = e.to_string();
            let field = ["dt", "t_end", "cfl_number", "record_every"]
                .iter()
                .find(|f| msg.contains(&format!("stepper.{f}")))
                .map(|f| format!("stepper.{f}"))
                .unwrap_or_else(|| "stepper".into());
            invalid(&field, msg)
        })?;
        Ok(cfg)
    }

    /// Same experiment at another resolution. The mollifier width stays
    /// fixed in absolute units so every level approximates the same datum.
    pub fn at_resolution(&self, n: usize) -> Self {
        let mut c = self.clone();
        c.grid.n = n;
        c.delta_h = None;
        c
    }

    /// Echo as TOML (resolved values).
    pub fn to_toml(&self) -> String {
        let mut recipe = toml::Table::try_from(&self.recipe).unwrap_or_default();
        if let Some(dh) = self.delta_h {
            recipe.remove("delta");
            recipe.insert("delta_h".into(), toml::Value::Float(dh));
        }
        let raw = RawConfig {
            grid: self.grid,
            params: self.params,
            recipe,
            stepper: self.stepper,
            study: self.study.clone(),
            output: self.output.clone(),
        };
        toml::to_string(&raw).unwrap_or_default()
    }
}

fn check_levels_usize(field: &str, levels: &[usize], min: usize) -> Result<(), ConfigError> {
    if levels.len() < min {
        return Err(invalid(field, format!("need at least {min} levels")));
    }
    if levels.iter().any(|&n| n < 8 || n % 2 != 0) || levels.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid(field, "must be even, >= 8 and strictly increasing"));
    }
    Ok(())
}

fn recipe_has_explicit_delta(text: &str) -> bool {
    text.parse::<toml::Table>()
        .ok()
        .and_then(|t| t.get("recipe").and_then(|r| r.as_table()).map(|r| r.contains_key("delta")))
        .unwrap_or(false)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
grid.L = 50.26548245743669
grid.N = 64
recipe.kind = "smooth_bump"
recipe.amplitude = 0.1
stepper.dt = 0.01
stepper.t_end = 1.0
"#;

    #[test]
    fn defaults_fill_in() {
        let c = ExperimentConfig::parse(BASE).unwrap();
        assert_eq!(c.grid.n, 64);
        assert_eq!(c.params.mu, 1.0);
        assert_eq!(c.stepper.scheme, SchemeName::ImexCn);
        assert_eq!(c.study.kind, StudyKind::SingleRun);
        assert_eq!(c.study.decay_window, [2.0, 20.0]);
        assert_eq!(c.chemistry().unwrap().chi, 1.0);
    }

    #[test]
    fn delta_h_resolves_against_spacing() {
        let c = ExperimentConfig::parse(&format!("{BASE}recipe.delta_h = 2\n")).unwrap();
        assert!((c.recipe.delta - 2.0 * c.spacing()).abs() < 1e-15);
        let c2 = c.at_resolution(128);
        assert_eq!(c2.recipe.delta, c.recipe.delta);
        let both = format!("{BASE}recipe.delta_h = 2\nrecipe.delta = 0.1\n");
        assert!(ExperimentConfig::parse(&both).is_err());
    }

    fn field_of(text: &str) -> String {
        match ExperimentConfig::parse(text) {
            Err(ConfigError::Invalid { field, .. }) => field,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn errors_name_the_field() {
        assert_eq!(field_of(&BASE.replace("grid.N = 64", "grid.N = 63")), "grid.N");
        assert_eq!(field_of(&BASE.replace("stepper.dt = 0.01", "stepper.dt = -1")), "stepper.dt");
        assert_eq!(field_of(&format!("{BASE}params.chi = 3.0\n")), "params.chi");
        assert_eq!(
            field_of(&format!("{BASE}study.kind = \"delta_sweep\"\nstudy.deltas_h = [4, 4, 2]\n")),
            "study.deltas_h"
        );
        assert_eq!(
            field_of(&format!("{BASE}study.kind = \"refinement\"\nstudy.resolutions = [32, 64]\n")),
            "study.resolutions"
        );
        match ExperimentConfig::parse(&format!("{BASE}stepper.bogus = 1\n")) {
            Err(ConfigError::Parse(m)) => assert!(m.contains("bogus"), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn echo_round_trips() {
        let c = ExperimentConfig::parse(&format!("{BASE}recipe.delta_h = 2\n")).unwrap();
        let back = ExperimentConfig::parse(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }
}
