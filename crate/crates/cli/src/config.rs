//! The TOML run configuration. Times are in model time units throughout.

use std::path::{Path, PathBuf};

use econ_attractors::basin::PointConfig;
use econ_attractors::fode::FOConfig;
use econ_attractors::lyapunov::MleConfig;
use econ_attractors::sweep::SweepSpec;
use econ_attractors::{State3, SystemParams};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub out_dir: PathBuf,
    pub seed: u64,
    /// 1 is the integer-order system.
    pub order_q: f64,
    pub ics: Vec<State3>,
    pub system: SystemParams,
    pub equilibria: EquilibriaSection,
    pub run: RunSection,
    pub fo: FOConfig,
    pub mle: MleConfig,
    pub sweep: SweepSpec,
    pub basin: BasinSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            out_dir: PathBuf::from("out"),
            seed: 2024,
            order_q: 1.0,
            ics: vec![State3::new(1.0, 1.0, 1.0), State3::new(1.0, 1.0, -1.0)],
            system: SystemParams::default(),
            equilibria: EquilibriaSection::default(),
            run: RunSection::default(),
            fo: FOConfig::default(),
            mle: MleConfig::default(),
            sweep: SweepSpec::default(),
            basin: BasinSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EquilibriaSection {
    pub a_range: [f64; 2],
    /// Grid values including both ends; 1 analyzes `system.a` only.
    pub steps: usize,
}

impl Default for EquilibriaSection {
    fn default() -> Self {
        Self {
            a_range: [0.0, 0.2],
            steps: 201,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    /// Name each run against the reference registry for the same `a` and
    /// order, when there is one.
    pub label: bool,
    pub point: PointConfig,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            label: true,
            point: PointConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BasinSection {
    /// Reference case name; by default the case with `system.a`.
    pub case: Option<String>,
    /// Registry TOML to use instead of building one from the case seeds.
    pub registry: Option<PathBuf>,
    pub sphere_radius: f64,
    pub sphere_count: usize,
    pub lattice_n: usize,
    /// Half-width of square zooms around `X0` and `X1`; none when absent.
    pub zoom_half_width: Option<f64>,
    /// Overrides the case's run settings.
    pub point: Option<PointConfig>,
}

impl Default for BasinSection {
    fn default() -> Self {
        Self {
            case: None,
            registry: None,
            sphere_radius: 0.1,
            sphere_count: 50,
            lattice_n: 100,
            zoom_half_width: None,
            point: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn emit(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if !(self.order_q > 0.0 && self.order_q <= 1.0) {
            return bad(format!("order_q = {} outside (0, 1]", self.order_q));
        }
        if self.ics.iter().any(|x| !x.is_finite()) {
            return bad("non-finite initial condition".into());
        }
        if self.equilibria.steps == 0 || !(self.equilibria.a_range[0] <= self.equilibria.a_range[1]) {
            return bad("equilibria grid is empty".into());
        }
        if !(self.basin.sphere_radius > 0.0) || self.basin.sphere_count == 0 {
            return bad("sphere radius and count must be positive".into());
        }
        self.system.validate()?;
        Ok(())
    }

    /// The fractional configuration at `order_q`.
    pub fn fo_at_order(&self) -> FOConfig {
        FOConfig {
            q: self.order_q,
            ..self.fo
        }
    }
}
