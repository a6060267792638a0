//! Config to artifacts: thermal state, sampling, Ramsey evolution, analysis.

use crate::config::{to_schema, RunConfig, SchemaError, SnapshotPolicy};
use crate::output;
use ramsey_core::grid::{twa_guard, Couplings};
use ramsey_core::observables::{
    fringe_scan, fringe_scan_full_field, steering_certificate, visibility_point, CondensateModes, FringeFit, ModeBasis,
    ProjectedSnapshot, VisibilityPoint,
};
use ramsey_core::snapshot;
use ramsey_core::thermal::{critical_temperature, shf_self_consistent, ModeOptions, ThermalModes};
use ramsey_core::twa::{
    default_dt, run_ramsey_with, sample_initial, step_doubling_check, SequenceSchedule, StepDoubling,
};
use ramsey_core::two_mode::SteeringReport;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::time::Instant;

#[derive(Debug)]
pub enum RunError {
    Schema(SchemaError),
    Numerical {
        stage: &'static str,
        source: ramsey_core::Error,
    },
    Io(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Schema(_) => 2,
            RunError::Numerical { .. } => 3,
            RunError::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Schema(e) => write!(f, "invalid configuration: {e}"),
            RunError::Numerical { stage, source } => write!(f, "stage `{stage}` failed: {source}"),
            RunError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<SchemaError> for RunError {
    fn from(e: SchemaError) -> Self {
        RunError::Schema(e)
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e.to_string())
    }
}

impl From<csv::Error> for RunError {
    fn from(e: csv::Error) -> Self {
        RunError::Io(e.to_string())
    }
}

fn stage(name: &'static str) -> impl Fn(ramsey_core::Error) -> RunError {
    move |e| match e {
        ramsey_core::Error::Config { .. } => RunError::Schema(to_schema(e)),
        ramsey_core::Error::Io(io) => RunError::Io(io.to_string()),
        source => RunError::Numerical { stage: name, source },
    }
}

/// Analysis of one observation time. `point` and `report` are absent when
/// the condensate mode could not be identified.
#[derive(Debug, Clone, Serialize)]
pub struct TimeAnalysis {
    pub time: f64,
    pub n1: f64,
    pub n2: f64,
    pub point: Option<VisibilityPoint>,
    pub report: Option<SteeringReport>,
    pub fringe: Option<FringeFit>,
    pub fringe_full_field: Option<FringeFit>,
    pub note: Option<String>,
}

impl TimeAnalysis {
    /// Fringe amplitude and moment-derived visibility agree within three
    /// combined standard errors.
    pub fn estimators_agree(&self) -> Option<bool> {
        let (p, f) = (self.point.as_ref()?, self.fringe.as_ref()?);
        let sigma = p.visibility_stderr.hypot(f.amplitude_stderr);
        Some((p.visibility - f.amplitude).abs() <= 3.0 * sigma)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ThermalSummary {
    pub temperature_nk: f64,
    pub critical_temperature_nk: f64,
    pub t_over_tc: f64,
    pub n_condensate: f64,
    pub n_thermal: f64,
    pub condensed: bool,
    pub mu_j: f64,
    pub iterations: usize,
    pub thermal_modes: usize,
    pub mode_captured_fraction: f64,
    pub mode_semiclassical_ratio: f64,
    pub mode_mu_shift_j: f64,
    pub modes_full_grid: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub code_version: &'static str,
    pub config: RunConfig,
    pub workers: Option<usize>,
    pub grid_modes: usize,
    pub twa_guard_ok: bool,
    pub couplings: Couplings,
    pub thermal: ThermalSummary,
    pub dt_s: f64,
    pub steps: usize,
    pub step_doubling: Option<StepDoubling>,
    pub flagged_per_time: Vec<usize>,
    pub loss_model: Vec<String>,
    pub timings_s: BTreeMap<&'static str, f64>,
    pub files: Vec<String>,
}

pub struct RunOutput {
    pub manifest: Manifest,
    pub analysis: Vec<TimeAnalysis>,
    pub directory: PathBuf,
}

/// Worker count: `RAMSEY_WORKERS`, then the config, then rayon's default.
pub fn resolve_workers(cfg: &RunConfig) -> Result<Option<usize>, SchemaError> {
    match std::env::var("RAMSEY_WORKERS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(SchemaError {
                field: "RAMSEY_WORKERS".into(),
                reason: format!("`{v}` is not a positive integer"),
            }),
        },
        Err(_) => Ok(cfg.sampling.workers),
    }
}

fn loss_model(cfg: &RunConfig, c: &Couplings) -> Vec<String> {
    let l = &cfg.physics.loss;
    if !l.enabled {
        return vec!["losses disabled".into()];
    }
    vec![
        format!("one-body rates {:?} 1/s", l.one_body_per_s),
        format!(
            "two-body 22 and 12 rates {:e}, {:e} m^3/s, three-body 111 {:e} m^6/s",
            l.gamma22_m3_per_s, l.gamma12_m3_per_s, l.gamma111_m6_per_s
        ),
        format!(
            "reduced to the grid dimension by transverse ground-state overlaps {:e} (two-body), {:e} (three-body)",
            c.two_body_reduction, c.three_body_reduction
        ),
        format!(
            "loss noise {}; Ito Euler-Maruyama with exponential damping per step",
            if l.noise { "on" } else { "off" }
        ),
    ]
}

pub fn run(cfg: &RunConfig, workers: Option<usize>) -> Result<RunOutput, RunError> {
    cfg.validate()?;
    let mut timings = BTreeMap::new();
    let grid = cfg.grid()?;
    let params = cfg.params();
    params.validate().map_err(to_schema)?;
    let couplings = params.couplings(grid.dims());
    let n_total = cfg.thermal.n_total;
    let tc = critical_temperature(n_total, &params.trap_freqs);
    let temperature = match (cfg.thermal.temperature_tc, cfg.thermal.temperature_nk) {
        (Some(r), _) => r * tc,
        (_, Some(nk)) => nk * 1e-9,
        _ => unreachable!("validated"),
    };
    let guard = twa_guard(&grid, n_total);

    let clock = Instant::now();
    let spec = shf_self_consistent(&grid, &params, n_total, temperature).map_err(stage("thermal-init"))?;
    let mode_opts = ModeOptions {
        full_grid_limit: cfg.thermal.full_grid_limit,
        basis_size: cfg.thermal.mode_basis_size,
    };
    let modes = ThermalModes::compute(&spec, &grid, &params, &mode_opts).map_err(stage("thermal-modes"))?;
    timings.insert("thermal", clock.elapsed().as_secs_f64());
    log::info!(
        "T = {:.2} nK ({:.3} T_c), N_c = {:.1}, {} thermal modes",
        temperature * 1e9,
        temperature / tc,
        spec.n_condensate,
        modes.occupations.len()
    );

    let clock = Instant::now();
    let s = &cfg.sampling;
    let ensemble = sample_initial(&spec, &modes, &grid, s.n_traj, s.master_seed, s.initial_state, workers)
        .map_err(stage("sampling"))?;
    timings.insert("sampling", clock.elapsed().as_secs_f64());

    let peak = spec
        .condensate
        .iter()
        .zip(&spec.thermal_density)
        .map(|(p, t)| p.norm_sqr() + t)
        .fold(0.0, f64::max);
    let dt = cfg
        .sequence
        .dt_us
        .map_or_else(|| default_dt(&grid, &params, peak), |d| d * 1e-6);
    let seq = &cfg.sequence;
    let mut schedule = SequenceSchedule::ramsey(
        seq.hold_times_ms.iter().map(|t| t * 1e-3).collect(),
        seq.phases_deg.iter().map(|p| p.to_radians()).collect(),
    );
    schedule.pulse1.phase = seq.pulse1_phase_deg.to_radians();
    schedule.pulse1.theta = seq.pulse_area_deg.to_radians();
    schedule.pulse2_theta = seq.pulse_area_deg.to_radians();

    let basis =
        ModeBasis::harmonic(&grid, &params, cfg.analysis.basis_size.min(grid.size())).map_err(stage("analysis"))?;
    let dir = cfg.output.directory.clone();
    fs::create_dir_all(&dir)?;
    let snap_dir = dir.join("snapshots");
    if cfg.output.snapshots != SnapshotPolicy::None {
        fs::create_dir_all(&snap_dir)?;
    }
    let mut files = Vec::new();

    let step_doubling = if cfg.analysis.step_doubling_trajectories > 0 {
        let clock = Instant::now();
        let r = step_doubling_check(
            &ensemble,
            &schedule,
            &params,
            dt,
            cfg.analysis.step_doubling_trajectories,
            workers,
        )
        .map_err(stage("step-doubling"))?;
        timings.insert("step_doubling", clock.elapsed().as_secs_f64());
        if r.population_change.max(r.coherence_change) > 1e-3 {
            log::warn!(
                "halving dt changes the observables by {:.2e}; the step is too coarse",
                r.population_change.max(r.coherence_change)
            );
        }
        Some(r)
    } else {
        None
    };

    let clock = Instant::now();
    let policy = cfg.output.snapshots;
    let seed = s.master_seed;
    let mut index = 0usize;
    let mut snap_files = Vec::new();
    let (snaps, stats) = run_ramsey_with(ensemble, &schedule, &params, dt, workers, |ens| {
        let projected = ProjectedSnapshot::project(ens, &basis);
        let name = format!("snapshots/t{index:04}.rsnp");
        index += 1;
        match policy {
            SnapshotPolicy::None => {}
            SnapshotPolicy::Moments => {
                let mut w = std::io::BufWriter::new(fs::File::create(dir.join(&name))?);
                snapshot::write_moments(&mut w, &projected, ens.grid(), seed)?;
                snap_files.push(name);
            }
            SnapshotPolicy::Fields => {
                let mut w = std::io::BufWriter::new(fs::File::create(dir.join(&name))?);
                snapshot::write_fields(&mut w, ens)?;
                snap_files.push(name);
            }
        }
        Ok(projected)
    })
    .map_err(stage("twa"))?;
    timings.insert("evolution", clock.elapsed().as_secs_f64());
    files.extend(snap_files);

    let clock = Instant::now();
    let analysis = snaps
        .iter()
        .map(|snap| analyse(snap, &schedule, cfg.analysis.significance_k))
        .collect::<Result<Vec<_>, _>>()?;
    timings.insert("analysis", clock.elapsed().as_secs_f64());

    let manifest = Manifest {
        code_version: env!("CARGO_PKG_VERSION"),
        config: cfg.clone(),
        workers,
        grid_modes: grid.size(),
        twa_guard_ok: guard,
        couplings,
        thermal: ThermalSummary {
            temperature_nk: temperature * 1e9,
            critical_temperature_nk: tc * 1e9,
            t_over_tc: temperature / tc,
            n_condensate: spec.n_condensate,
            n_thermal: spec.n_thermal,
            condensed: spec.condensed,
            mu_j: spec.mu,
            iterations: spec.iterations,
            thermal_modes: modes.occupations.len(),
            mode_captured_fraction: modes.captured_fraction,
            mode_semiclassical_ratio: modes.semiclassical_ratio,
            mode_mu_shift_j: modes.mu_shift,
            modes_full_grid: modes.full_grid,
        },
        dt_s: stats.dt,
        steps: stats.steps,
        step_doubling,
        flagged_per_time: snaps.iter().map(|s| s.flagged).collect(),
        loss_model: loss_model(cfg, &couplings),
        timings_s: timings,
        files,
    };
    let mut out = RunOutput {
        manifest,
        analysis,
        directory: dir,
    };
    output::write_all(&mut out, cfg.output.plots)?;
    Ok(out)
}

fn analyse(snap: &ProjectedSnapshot, schedule: &SequenceSchedule, k: f64) -> Result<TimeAnalysis, RunError> {
    let pops = ramsey_core::observables::populations(snap).map_err(stage("analysis"))?;
    let mut out = TimeAnalysis {
        time: snap.time,
        n1: pops.n1,
        n2: pops.n2,
        point: None,
        report: None,
        fringe: None,
        fringe_full_field: None,
        note: None,
    };
    let phases = &schedule.pulse2_phases;
    if phases.len() >= 4 {
        out.fringe_full_field =
            Some(fringe_scan_full_field(snap, phases, schedule.pulse2_theta).map_err(stage("analysis"))?);
    }
    match CondensateModes::extract(snap) {
        Ok(modes) => {
            let point = visibility_point(snap, &modes).map_err(stage("analysis"))?;
            out.report = Some(steering_certificate(&point, k));
            out.point = Some(point);
            if phases.len() >= 4 {
                out.fringe = Some(fringe_scan(snap, &modes, phases, schedule.pulse2_theta).map_err(stage("analysis"))?);
            }
        }
        Err(e @ ramsey_core::Error::AmbiguousMode { .. }) => {
            log::warn!("t = {} s: {e}", snap.time);
            out.note = Some(e.to_string());
        }
        Err(e) => return Err(stage("analysis")(e)),
    }
    Ok(out)
}
