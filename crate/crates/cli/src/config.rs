//! TOML run configuration. Units are part of every key name.

use ramsey_core::constants::{ATOMIC_MASS_UNIT, BOHR_RADIUS};
use ramsey_core::grid::{Grid, LossRates, PhysicalParams};
use ramsey_core::twa::InitialMode;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::PathBuf;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaError {
    pub field: String,
    pub reason: String,
}

impl std::fmt::Display for SchemaError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "`{}`: {}", self.field, self.reason)
    }
}

impl std::error::Error for SchemaError {}

fn schema(field: &str, reason: impl Into<String>) -> SchemaError {
    SchemaError {
        field: field.into(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    #[serde(default)]
    pub physics: PhysicsConfig,
    pub thermal: ThermalConfig,
    pub sequence: SequenceConfig,
    pub sampling: SamplingConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Points per axis, axis `j` along trap axis `j`.
    pub points: Vec<usize>,
    pub extents_um: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicsConfig {
    pub mass_amu: f64,
    pub trap_freqs_hz: [f64; 3],
    pub a11_a0: f64,
    pub a12_a0: f64,
    pub a22_a0: f64,
    pub loss: LossConfig,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        let p = PhysicalParams::rb87_clock();
        Self {
            mass_amu: p.mass / ATOMIC_MASS_UNIT,
            trap_freqs_hz: p.trap_freqs.map(|w| w / (2.0 * PI)),
            a11_a0: p.scattering_lengths[0] / BOHR_RADIUS,
            a12_a0: p.scattering_lengths[1] / BOHR_RADIUS,
            a22_a0: p.scattering_lengths[2] / BOHR_RADIUS,
            loss: LossConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossConfig {
    pub enabled: bool,
    /// Stochastic noise accompanying the loss damping.
    pub noise: bool,
    pub one_body_per_s: [f64; 2],
    pub gamma22_m3_per_s: f64,
    pub gamma12_m3_per_s: f64,
    pub gamma111_m6_per_s: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        let l = LossRates::rb87_clock();
        Self {
            enabled: true,
            noise: true,
            one_body_per_s: l.one_body,
            gamma22_m3_per_s: l.two_body_22,
            gamma12_m3_per_s: l.two_body_12,
            gamma111_m6_per_s: l.three_body_111,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalConfig {
    pub n_total: f64,
    /// Temperature relative to the ideal-gas transition; exclusive with
    /// `temperature_nk`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature_tc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature_nk: Option<f64>,
    /// Grids up to this many points diagonalize the thermal Hamiltonian in
    /// full; larger grids use an oscillator basis of `mode_basis_size`.
    #[serde(default = "default_full_grid_limit")]
    pub full_grid_limit: usize,
    #[serde(default = "default_mode_basis")]
    pub mode_basis_size: usize,
}

fn default_full_grid_limit() -> usize {
    1024
}

fn default_mode_basis() -> usize {
    150
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceConfig {
    /// Observation times after pulse 1.
    pub hold_times_ms: Vec<f64>,
    /// Pulse-2 phases for the fringe scan.
    pub phases_deg: Vec<f64>,
    #[serde(default)]
    pub pulse1_phase_deg: f64,
    #[serde(default = "default_theta")]
    pub pulse_area_deg: f64,
    /// Time step; by default derived from the grid and peak density.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_us: Option<f64>,
}

fn default_theta() -> f64 {
    90.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    pub n_traj: usize,
    pub master_seed: u64,
    #[serde(default = "default_initial")]
    pub initial_state: InitialMode,
    /// Worker threads; `RAMSEY_WORKERS` overrides.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

fn default_initial() -> InitialMode {
    InitialMode::GrandCanonical
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    /// Oscillator modes in the density-matrix basis.
    pub basis_size: usize,
    pub significance_k: f64,
    /// Trajectories rerun at half the step for the step-doubling check;
    /// 0 disables it.
    pub step_doubling_trajectories: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            basis_size: 20,
            significance_k: 5.0,
            step_doubling_trajectories: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SnapshotPolicy {
    None,
    Moments,
    Fields,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub snapshots: SnapshotPolicy,
    pub plots: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("ramsey-out"),
            snapshots: SnapshotPolicy::None,
            plots: true,
        }
    }
}

/// Command-line overrides applied after parsing.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trajectories: Option<usize>,
    pub dim: Option<usize>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, SchemaError> {
        let de = toml::Deserializer::parse(text).map_err(|e| schema("<toml>", e.message().to_string()))?;
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            schema(&path, e.into_inner().message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), SchemaError> {
        if let Some(s) = o.seed {
            self.sampling.master_seed = s;
        }
        if let Some(n) = o.trajectories {
            self.sampling.n_traj = n;
        }
        if let Some(d) = o.dim {
            if !(1..=3).contains(&d) || d > self.grid.points.len() {
                return Err(schema(
                    "grid.points",
                    format!("--dim {d} needs at least {d} configured axes"),
                ));
            }
            self.grid.points.truncate(d);
            self.grid.extents_um.truncate(d);
        }
        if let Some(out) = &o.out {
            self.output.directory = out.clone();
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<(), SchemaError> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if self.grid.points.is_empty() || self.grid.points.len() > 3 {
            return Err(schema("grid.points", "1 to 3 axes"));
        }
        if self.grid.extents_um.len() != self.grid.points.len() {
            return Err(schema("grid.extents_um", "one extent per axis"));
        }
        if !self.grid.extents_um.iter().all(|&l| positive(l)) {
            return Err(schema("grid.extents_um", "extents must be positive"));
        }
        let p = &self.physics;
        if !positive(p.mass_amu) {
            return Err(schema("physics.mass_amu", "must be positive"));
        }
        if !p.trap_freqs_hz.iter().all(|&w| positive(w)) {
            return Err(schema("physics.trap_freqs_hz", "must be positive"));
        }
        for (name, a) in [
            ("physics.a11_a0", p.a11_a0),
            ("physics.a12_a0", p.a12_a0),
            ("physics.a22_a0", p.a22_a0),
        ] {
            if !a.is_finite() {
                return Err(schema(name, "must be finite"));
            }
        }
        let l = &p.loss;
        for (name, r) in [
            ("physics.loss.one_body_per_s", l.one_body_per_s[0]),
            ("physics.loss.one_body_per_s", l.one_body_per_s[1]),
            ("physics.loss.gamma22_m3_per_s", l.gamma22_m3_per_s),
            ("physics.loss.gamma12_m3_per_s", l.gamma12_m3_per_s),
            ("physics.loss.gamma111_m6_per_s", l.gamma111_m6_per_s),
        ] {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(schema(name, "must be non-negative"));
            }
        }
        let t = &self.thermal;
        if !positive(t.n_total) {
            return Err(schema("thermal.n_total", "must be positive"));
        }
        match (t.temperature_tc, t.temperature_nk) {
            (Some(_), Some(_)) => {
                return Err(schema(
                    "thermal.temperature_tc",
                    "give temperature_tc or temperature_nk, not both",
                ))
            }
            (None, None) => return Err(schema("thermal.temperature_tc", "missing temperature")),
            (Some(v), None) if !positive(v) => {
                return Err(schema("thermal.temperature_tc", format!("{v} must be positive")))
            }
            (None, Some(v)) if !positive(v) => {
                return Err(schema("thermal.temperature_nk", format!("{v} must be positive")))
            }
            _ => {}
        }
        if t.mode_basis_size == 0 {
            return Err(schema("thermal.mode_basis_size", "must be at least 1"));
        }
        let s = &self.sequence;
        if s.hold_times_ms.is_empty() {
            return Err(schema("sequence.hold_times_ms", "at least one time"));
        }
        if !s.hold_times_ms.iter().all(|t| *t >= 0.0 && t.is_finite()) {
            return Err(schema("sequence.hold_times_ms", "times must be non-negative"));
        }
        if s.hold_times_ms.windows(2).any(|w| w[1] <= w[0]) {
            return Err(schema("sequence.hold_times_ms", "times must be strictly increasing"));
        }
        if !s.phases_deg.is_empty() && s.phases_deg.len() < 4 {
            return Err(schema("sequence.phases_deg", "a fringe scan needs at least 4 phases"));
        }
        if !s
            .phases_deg
            .iter()
            .chain([&s.pulse1_phase_deg, &s.pulse_area_deg])
            .all(|v| v.is_finite())
        {
            return Err(schema("sequence.phases_deg", "must be finite"));
        }
        if let Some(dt) = s.dt_us {
            if !positive(dt) {
                return Err(schema("sequence.dt_us", "must be positive"));
            }
        }
        if self.sampling.n_traj < 2 {
            return Err(schema("sampling.n_traj", "need at least 2 trajectories"));
        }
        if self.sampling.workers == Some(0) {
            return Err(schema("sampling.workers", "must be at least 1"));
        }
        let a = &self.analysis;
        if a.basis_size == 0 {
            return Err(schema("analysis.basis_size", "must be at least 1"));
        }
        if !(a.significance_k > 0.0 && a.significance_k.is_finite()) {
            return Err(schema("analysis.significance_k", "must be positive"));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid, SchemaError> {
        let extents: Vec<f64> = self.grid.extents_um.iter().map(|l| l * 1e-6).collect();
        Grid::new(&self.grid.points, &extents).map_err(to_schema)
    }

    pub fn params(&self) -> PhysicalParams {
        let p = &self.physics;
        let l = &p.loss;
        let losses = if l.enabled {
            LossRates {
                one_body: l.one_body_per_s,
                two_body_22: l.gamma22_m3_per_s,
                two_body_12: l.gamma12_m3_per_s,
                three_body_111: l.gamma111_m6_per_s,
            }
        } else {
            LossRates::default()
        };
        PhysicalParams {
            mass: p.mass_amu * ATOMIC_MASS_UNIT,
            scattering_lengths: [p.a11_a0, p.a12_a0, p.a22_a0].map(|a| a * BOHR_RADIUS),
            trap_freqs: p.trap_freqs_hz.map(|f| 2.0 * PI * f),
            losses,
            loss_noise: l.enabled && l.noise,
        }
    }
}

/// Core configuration errors already carry a field path.
pub fn to_schema(e: ramsey_core::Error) -> SchemaError {
    match e {
        ramsey_core::Error::Config { field, reason } => SchemaError { field, reason },
        other => schema("<config>", other.to_string()),
    }
}
