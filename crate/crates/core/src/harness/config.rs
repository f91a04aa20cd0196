//! Scenario configuration files (TOML).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Result, WaveError};
use crate::evolve::{default_stride, EvolveConfig, Stepper};
use crate::model::{AbcdParams, BottomKind, BottomSpec};
use crate::solitary::{Branch, SolitonProfile};
use crate::spectral::{read_binary, Field, Grid};
use crate::tracker::{Pairing, TrackMode};
use crate::Grid64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    SolitonValidate,
    LinearValidate,
    IdentityCheck,
    ApproxSweep,
    Interaction,
    ExitStability,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::SolitonValidate => "soliton-validate",
            Self::LinearValidate => "linear-validate",
            Self::IdentityCheck => "identity-check",
            Self::ApproxSweep => "approx-sweep",
            Self::Interaction => "interaction",
            Self::ExitStability => "exit-stability",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamsSection {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub a1: f64,
    pub c1: f64,
}

impl Default for ParamsSection {
    fn default() -> Self {
        let p = AbcdParams::<f64>::chen();
        Self { a: p.a, b: p.b, c: p.c, d: p.d, a1: p.a1, c1: p.c1 }
    }
}

impl ParamsSection {
    pub fn params(&self) -> AbcdParams<f64> {
        AbcdParams { a: self.a, b: self.b, c: self.c, d: self.d, a1: self.a1, c1: self.c1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BottomSection {
    pub kind: String,
    pub amplitude: f64,
    pub k0: f64,
    pub l0: f64,
    pub s0: f64,
    pub y0: f64,
}

impl Default for BottomSection {
    fn default() -> Self {
        Self { kind: "gaussian".into(), amplitude: 1.0, k0: 1.0, l0: 1.0, s0: 0.0, y0: 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub n: usize,
    pub half_length: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { n: 1024, half_length: 60.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolveSection {
    /// Explicit step; otherwise `dt_factor · dx`.
    pub dt: Option<f64>,
    pub dt_factor: f64,
    pub t_end: f64,
    pub output_stride: Option<usize>,
    pub dealias: bool,
    pub stepper: String,
}

impl Default for EvolveSection {
    fn default() -> Self {
        Self { dt: None, dt_factor: 0.25, t_end: 50.0, output_stride: None, dealias: true, stepper: "rk4".into() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub kind: ScenarioKind,
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
    #[serde(default = "default_omega0")]
    pub omega0: f64,
    #[serde(default = "default_branch")]
    pub branch: String,
    /// Binary dumps of the `R` and `Q` components of a seed profile.
    #[serde(default)]
    pub seed_paths: Vec<PathBuf>,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default = "default_track_mode")]
    pub track_mode: String,
    #[serde(default = "default_pairing")]
    pub pairing: String,
    #[serde(default = "default_delta0")]
    pub delta0: f64,
    #[serde(default = "default_t_cap")]
    pub t_cap: f64,
    /// Amplitude of the seeded perturbation of the exit-stability run.
    #[serde(default = "default_perturbation")]
    pub perturbation: f64,
    #[serde(default = "default_rng_seed")]
    pub rng_seed: u64,
}

fn default_epsilons() -> Vec<f64> {
    vec![0.2, 0.1, 0.05]
}
fn default_omega0() -> f64 {
    0.5
}
fn default_branch() -> String {
    "plus".into()
}
fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_track_mode() -> String {
    "shift-speed".into()
}
fn default_pairing() -> String {
    "plain".into()
}
fn default_delta0() -> f64 {
    0.1
}
fn default_t_cap() -> f64 {
    2000.0
}
fn default_perturbation() -> f64 {
    1e-2
}
fn default_rng_seed() -> u64 {
    7
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub params: ParamsSection,
    #[serde(default)]
    pub bottom: BottomSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub evolve: EvolveSection,
    pub scenario: ScenarioSection,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| WaveError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| WaveError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| WaveError::Config(e.to_string()))
    }

    /// Minimal configuration of a given kind with all defaults.
    pub fn with_kind(kind: ScenarioKind) -> Self {
        Self {
            params: ParamsSection::default(),
            bottom: BottomSection::default(),
            grid: GridSection::default(),
            evolve: EvolveSection::default(),
            scenario: ScenarioSection {
                kind,
                epsilons: default_epsilons(),
                omega0: default_omega0(),
                branch: default_branch(),
                seed_paths: vec![],
                out_dir: default_out_dir(),
                track_mode: default_track_mode(),
                pairing: default_pairing(),
                delta0: default_delta0(),
                t_cap: default_t_cap(),
                perturbation: default_perturbation(),
                rng_seed: default_rng_seed(),
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.scenario;
        let e = &s.epsilons;
        if e.is_empty() {
            return Err(WaveError::Config("scenario.epsilons must list at least one value".into()));
        }
        if let Some(bad) = e.iter().find(|v| !(**v >= 1e-3 && **v <= 0.5)) {
            return Err(WaveError::Config(format!("scenario.epsilons: {bad} outside [1e-3, 0.5]")));
        }
        if e.windows(2).any(|w| w[1] >= w[0]) {
            return Err(WaveError::Config(format!(
                "scenario.epsilons must be sorted in strictly descending order, got {e:?}"
            )));
        }
        for p in &s.seed_paths {
            if !p.exists() {
                return Err(WaveError::Config(format!("seed file {} does not exist", p.display())));
            }
        }
        if !s.seed_paths.is_empty() && s.seed_paths.len() != 2 {
            return Err(WaveError::Config("scenario.seed_paths needs exactly two files (R then Q)".into()));
        }
        self.grid_spec_check()?;
        self.bottom_kind()?;
        self.branch()?;
        self.stepper()?;
        self.track_mode()?;
        self.pairing()?;
        if !(self.evolve.dt_factor > 0.0) || self.evolve.dt.is_some_and(|d| !(d > 0.0)) {
            return Err(WaveError::Config("evolve.dt and evolve.dt_factor must be positive".into()));
        }
        if !(s.t_cap > 0.0) || !(s.delta0 >= 0.0) {
            return Err(WaveError::Config("scenario.t_cap must be positive and scenario.delta0 non-negative".into()));
        }
        let sonic = self.params.params().sonic_speed().map_err(|e| WaveError::Config(e.to_string()))?;
        if !(s.omega0 > 0.0 && s.omega0 < sonic) {
            return Err(WaveError::Config(format!("scenario.omega0 = {} outside (0, {sonic})", s.omega0)));
        }
        Ok(())
    }

    fn grid_spec_check(&self) -> Result<()> {
        crate::spectral::GridSpec::new(self.grid.n, self.grid.half_length)
            .map(|_| ())
            .map_err(|e| WaveError::Config(format!("grid: {e}")))
    }

    pub fn grid(&self) -> Result<Grid64> {
        Grid::new(self.grid.n, self.grid.half_length)
    }

    pub fn bottom_kind(&self) -> Result<BottomKind> {
        self.bottom.kind.parse()
    }

    /// Bottom at a given ε.
    pub fn bottom(&self, epsilon: f64) -> Result<BottomSpec<f64>> {
        let b = BottomSpec {
            epsilon,
            amplitude: self.bottom.amplitude,
            kind: self.bottom_kind()?,
            k0: self.bottom.k0,
            l0: self.bottom.l0,
            ..BottomSpec::gaussian(epsilon)
        }
        .with_centers(self.bottom.s0, self.bottom.y0);
        b.validate()?;
        Ok(b)
    }

    pub fn branch(&self) -> Result<Branch> {
        match self.scenario.branch.as_str() {
            "plus" => Ok(Branch::Plus),
            "minus" => Ok(Branch::Minus),
            "numeric" => Ok(Branch::Numeric),
            other => Err(WaveError::Config(format!("unknown branch '{other}' (plus | minus | numeric)"))),
        }
    }

    pub fn stepper(&self) -> Result<Stepper> {
        match self.evolve.stepper.as_str() {
            "rk4" => Ok(Stepper::Rk4),
            "split-step" | "split" => Ok(Stepper::SplitStep),
            other => Err(WaveError::Config(format!("unknown stepper '{other}' (rk4 | split-step)"))),
        }
    }

    pub fn track_mode(&self) -> Result<TrackMode> {
        self.scenario.track_mode.parse()
    }

    pub fn pairing(&self) -> Result<Pairing> {
        match self.scenario.pairing.as_str() {
            "plain" => Ok(Pairing::Plain),
            "helmholtz" => Ok(Pairing::Helmholtz),
            other => Err(WaveError::Config(format!("unknown pairing '{other}' (plain | helmholtz)"))),
        }
    }

    pub fn evolve_config(&self, grid: &Grid64, t_start: f64, t_end: f64) -> Result<EvolveConfig<f64>> {
        let dt = self.evolve.dt.unwrap_or(self.evolve.dt_factor * grid.dx());
        let cfg = EvolveConfig {
            dt,
            t_start,
            t_end,
            dealias: self.evolve.dealias,
            output_stride: self.evolve.output_stride.unwrap_or_else(|| default_stride(dt)),
            stepper: self.stepper()?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Seed profile read from `seed_paths`, when given.
    pub fn seed(&self, grid: &Grid64) -> Result<Option<SolitonProfile<f64>>> {
        if self.scenario.seed_paths.is_empty() {
            return Ok(None);
        }
        let r = read_binary(&self.scenario.seed_paths[0])?;
        let q = read_binary(&self.scenario.seed_paths[1])?;
        if r.grid().spec() != grid.spec() || q.grid().spec() != grid.spec() {
            return Err(WaveError::Config("seed profile grid differs from [grid]".into()));
        }
        let params = self.params.params();
        Ok(Some(SolitonProfile {
            omega: self.scenario.omega0,
            branch: Branch::Numeric,
            alpha: None,
            r: Field::new(grid, r.into_values())?,
            q: Field::new(grid, q.into_values())?,
            params,
            residual: f64::NAN,
            iterations: 0,
        }))
    }
}
