//! Truncated-Wigner ensembles of the two-component field and their
//! evolution through the Ramsey sequence.
//!
//! Every trajectory owns a ChaCha8 stream seeded from `(master_seed, index)`
//! and is advanced independently, so an ensemble is a pure function of its
//! seeds. Parallelism only changes which worker runs a trajectory.

use crate::constants::HBAR;
use crate::error::{Error, Result};
use crate::grid::{kinetic_phase, trap_potential, Couplings, Grid, PhysicalParams, Spectral};
use crate::thermal::{ThermalEnsembleSpec, ThermalModes};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialMode {
    /// Poissonian condensate number with a uniformly random phase.
    GrandCanonical,
    /// Coherent condensate amplitude of fixed phase.
    Coherent,
}

impl std::fmt::Display for InitialMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            InitialMode::GrandCanonical => "grand-canonical",
            InitialMode::Coherent => "coherent",
        })
    }
}

/// splitmix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn trajectory_seed(master_seed: u64, index: u64) -> u64 {
    mix(mix(master_seed).wrapping_add(index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15)))
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub seed: u64,
    pub psi: [Vec<Complex64>; 2],
    /// Set when the fields overflowed; flagged trajectories are frozen and
    /// excluded from every statistic.
    pub flagged: bool,
    rng: ChaCha8Rng,
}

impl Trajectory {
    pub fn new(seed: u64, psi: [Vec<Complex64>; 2]) -> Self {
        Self {
            seed,
            psi,
            flagged: false,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Raw Wigner norms `∫|ψ_j|² dV`.
    pub fn norms(&self, dv: f64) -> [f64; 2] {
        self.psi
            .each_ref()
            .map(|p| p.iter().map(|z| z.norm_sqr()).sum::<f64>() * dv)
    }
}

#[derive(Debug, Clone)]
pub struct TrajectoryEnsemble {
    grid: Grid,
    pub time: f64,
    pub master_seed: u64,
    pub trajectories: Vec<Trajectory>,
}

impl TrajectoryEnsemble {
    pub fn new(grid: Grid, master_seed: u64, trajectories: Vec<Trajectory>) -> Self {
        Self {
            grid,
            time: 0.0,
            master_seed,
            trajectories,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn n_traj(&self) -> usize {
        self.trajectories.len()
    }

    pub fn flagged(&self) -> usize {
        self.trajectories.iter().filter(|t| t.flagged).count()
    }

    pub fn active(&self) -> impl Iterator<Item = &Trajectory> {
        self.trajectories.iter().filter(|t| !t.flagged)
    }
}

/// Thread pool honouring an explicit worker count; `None` uses rayon's
/// default.
pub fn worker_pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        if n == 0 {
            return Err(Error::config("workers", "must be at least 1"));
        }
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| Error::Numerical {
        stage: "worker-pool",
        reason: e.to_string(),
    })
}

fn gaussian(rng: &mut ChaCha8Rng, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// Draw `n_traj` Wigner fields for the initial state: half a quantum of
/// white noise per mode in both components, Bose-distributed thermal modes
/// and the condensate in component 1.
pub fn sample_initial(
    spec: &ThermalEnsembleSpec,
    modes: &ThermalModes,
    grid: &Grid,
    n_traj: usize,
    master_seed: u64,
    mode: InitialMode,
    workers: Option<usize>,
) -> Result<TrajectoryEnsemble> {
    if n_traj < 2 {
        return Err(Error::config(
            "sampling.n_traj",
            format!("{n_traj} trajectories, need at least 2"),
        ));
    }
    let m = grid.size();
    if spec.condensate.len() != m || spec.thermal_density.len() != m {
        return Err(Error::config("thermal", "initial state does not match the grid"));
    }
    let dv = grid.cell_volume();
    let phi_hat: Option<Vec<Complex64>> = (spec.condensed && spec.n_condensate > 0.0).then(|| {
        let s = 1.0 / spec.n_condensate.sqrt();
        spec.condensate.iter().map(|z| z * s).collect()
    });
    let poisson = match (&phi_hat, mode) {
        (Some(_), InitialMode::GrandCanonical) => {
            Some(Poisson::new(spec.n_condensate).map_err(|e| Error::Numerical {
                stage: "sampling",
                reason: e.to_string(),
            })?)
        }
        _ => None,
    };
    let sample = |index: usize| -> Trajectory {
        let seed = trajectory_seed(master_seed, index as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vacuum = 1.0 / (2.0 * dv);
        let mut psi: [Vec<Complex64>; 2] =
            std::array::from_fn(|_| (0..m).map(|_| gaussian(&mut rng, vacuum)).collect());
        for (occ, u) in modes.occupations.iter().zip(&modes.vectors) {
            let beta = gaussian(&mut rng, *occ);
            psi[0].iter_mut().zip(u).for_each(|(z, x)| *z += beta * x);
        }
        if let Some(phi) = &phi_hat {
            let amplitude = match &poisson {
                Some(p) => {
                    let overlap: Complex64 = phi.iter().zip(&psi[0]).map(|(f, z)| f.conj() * z).sum::<Complex64>() * dv;
                    psi[0].iter_mut().zip(phi).for_each(|(z, f)| *z -= overlap * f);
                    let n: f64 = p.sample(&mut rng);
                    let theta = 2.0 * PI * rng.random::<f64>();
                    Complex64::from_polar((n + 0.5).sqrt(), theta)
                }
                None => Complex64::new(spec.n_condensate.sqrt(), 0.0),
            };
            psi[0].iter_mut().zip(phi).for_each(|(z, f)| *z += amplitude * f);
        }
        Trajectory {
            seed,
            psi,
            flagged: false,
            rng,
        }
    };
    let pool = worker_pool(workers)?;
    let trajectories = pool.install(|| (0..n_traj).into_par_iter().map(sample).collect());
    Ok(TrajectoryEnsemble::new(grid.clone(), master_seed, trajectories))
}

/// Instantaneous pulse of area `theta` and phase `phase`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    pub theta: f64,
    pub phase: f64,
}

impl Pulse {
    pub fn half_pi(phase: f64) -> Self {
        Self { theta: PI / 2.0, phase }
    }

    /// Matrix acting on the amplitude pair `(ψ₁, ψ₂)`; the same map the
    /// two-mode oracle's beam splitter applies to Fock states.
    pub fn matrix(&self) -> [[Complex64; 2]; 2] {
        let (s, c) = (self.theta / 2.0).sin_cos();
        let e = Complex64::from_polar(1.0, self.phase);
        [[Complex64::new(c, 0.0), -e * s], [e.conj() * s, Complex64::new(c, 0.0)]]
    }

    pub fn apply(&self, a: Complex64, b: Complex64) -> (Complex64, Complex64) {
        let u = self.matrix();
        (u[0][0] * a + u[0][1] * b, u[1][0] * a + u[1][1] * b)
    }
}

pub fn apply_pulse(ensemble: &mut TrajectoryEnsemble, theta: f64, phase: f64) {
    let pulse = Pulse { theta, phase };
    for t in ensemble.trajectories.iter_mut().filter(|t| !t.flagged) {
        let [p1, p2] = &mut t.psi;
        for (a, b) in p1.iter_mut().zip(p2.iter_mut()) {
            (*a, *b) = pulse.apply(*a, *b);
        }
    }
}

/// Ramsey timing: pulse 1 at `t = 0`, free evolution, snapshots at the
/// observation times, and pulse-2 phases for the fringe analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceSchedule {
    pub pulse1: Pulse,
    pub observation_times: Vec<f64>,
    pub pulse2_theta: f64,
    pub pulse2_phases: Vec<f64>,
}

impl SequenceSchedule {
    pub fn ramsey(observation_times: Vec<f64>, pulse2_phases: Vec<f64>) -> Self {
        Self {
            pulse1: Pulse::half_pi(0.0),
            observation_times,
            pulse2_theta: PI / 2.0,
            pulse2_phases,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.observation_times.is_empty() {
            return Err(Error::config("sequence.hold_times_ms", "at least one observation time"));
        }
        if self.observation_times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
            return Err(Error::config("sequence.hold_times_ms", "times must be non-negative"));
        }
        if self.observation_times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::config(
                "sequence.hold_times_ms",
                "times must be in increasing order",
            ));
        }
        Ok(())
    }
}

/// `min(0.1ħ/max|V + g n_peak|, 0.1·2m/(ħk_max²))`.
pub fn default_dt(grid: &Grid, params: &PhysicalParams, peak_density: f64) -> f64 {
    let g = params.couplings(grid.dims()).g;
    let g_max = g.iter().flatten().fold(0.0f64, |a, b| a.max(b.abs()));
    let v_max = trap_potential(grid, params).into_iter().fold(0.0, f64::max);
    let potential = 0.1 * HBAR / (v_max + g_max * peak_density).max(f64::MIN_POSITIVE);
    let k2 = grid.k_max_squared();
    let kinetic = if k2 > 0.0 {
        0.1 * 2.0 * params.mass / (HBAR * k2)
    } else {
        f64::INFINITY
    };
    potential.min(kinetic)
}

/// Precomputed split-step operators for one grid, parameter set and step.
#[derive(Debug, Clone)]
pub struct Propagator {
    spectral: Spectral,
    potential: Vec<f64>,
    couplings: Couplings,
    half_kinetic: Vec<Complex64>,
    full_kinetic: Vec<Complex64>,
    dv: f64,
    dt: f64,
    loss_noise: bool,
    lossless: bool,
}

impl Propagator {
    pub fn new(grid: &Grid, params: &PhysicalParams, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::config("sequence.dt_us", format!("{dt} must be positive")));
        }
        params.validate()?;
        let couplings = params.couplings(grid.dims());
        let lossless = params.losses.is_lossless();
        Ok(Self {
            spectral: Spectral::new(grid),
            potential: trap_potential(grid, params),
            couplings,
            half_kinetic: kinetic_phase(grid, params, dt / 2.0),
            full_kinetic: kinetic_phase(grid, params, dt),
            dv: grid.cell_volume(),
            dt,
            loss_noise: params.loss_noise,
            lossless,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Strang-split steps with the inner kinetic half-steps merged.
    pub fn advance(&self, traj: &mut Trajectory, steps: usize) {
        if steps == 0 || traj.flagged {
            return;
        }
        let mut scratch = self.spectral.scratch();
        self.kinetic(traj, &self.half_kinetic, &mut scratch);
        for step in 0..steps {
            self.interact(traj);
            if !self.lossless {
                self.lose(traj);
            }
            let last = step + 1 == steps;
            self.kinetic(
                traj,
                if last { &self.half_kinetic } else { &self.full_kinetic },
                &mut scratch,
            );
            if (step % 256 == 255 || last) && !self.healthy(traj) {
                traj.flagged = true;
                return;
            }
        }
    }

    fn healthy(&self, traj: &Trajectory) -> bool {
        traj.psi.iter().flatten().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    fn kinetic(&self, traj: &mut Trajectory, phase: &[Complex64], scratch: &mut [Complex64]) {
        for p in traj.psi.iter_mut() {
            self.spectral.forward(p, scratch);
            p.iter_mut().zip(phase).for_each(|(z, k)| *z *= k);
            self.spectral.inverse(p, scratch);
        }
    }

    fn interact(&self, traj: &mut Trajectory) {
        let g = self.couplings.g;
        let h = 1.0 / self.dv;
        let rate = self.dt / HBAR;
        let [p1, p2] = &mut traj.psi;
        for ((a, b), v) in p1.iter_mut().zip(p2.iter_mut()).zip(&self.potential) {
            let (n1, n2) = (a.norm_sqr(), b.norm_sqr());
            let e1 = v + g[0][0] * (n1 - h) + g[0][1] * n2;
            let e2 = v + g[1][1] * (n2 - h) + g[1][0] * n1;
            *a *= Complex64::from_polar(1.0, -e1 * rate);
            *b *= Complex64::from_polar(1.0, -e2 * rate);
        }
    }

    /// Euler–Maruyama step of the loss terms. Drifts carry the Wigner
    /// ordering corrections; noise variances are `|∂L/∂ψ|²` in the same
    /// ordering, clipped at zero, so that mean populations follow the exact
    /// rate equations.
    fn lose(&self, traj: &mut Trajectory) {
        let c = &self.couplings;
        let h = 1.0 / self.dv;
        let dt = self.dt;
        let noise = self.loss_noise;
        let rng = &mut traj.rng;
        let [p1, p2] = &mut traj.psi;
        for (a, b) in p1.iter_mut().zip(p2.iter_mut()) {
            let (n1, n2) = (a.norm_sqr(), b.norm_sqr());
            let r1 = 0.5 * c.one_body[0]
                + 0.5 * c.two_body_12 * (n2 - 0.5 * h)
                + 0.5 * c.three_body_111 * (n1 * n1 - 3.0 * h * n1 + 1.5 * h * h);
            let r2 = 0.5 * c.one_body[1] + 0.5 * c.two_body_22 * (n2 - h) + 0.5 * c.two_body_12 * (n1 - 0.5 * h);
            let (mut na, mut nb) = (*a * (-r1 * dt).exp(), *b * (-r2 * dt).exp());
            if noise {
                // ⟨|ξ|²⟩ = dt/2 per channel.
                let var = 0.5 * dt * h;
                if c.one_body[0] > 0.0 {
                    na += gaussian(rng, var * c.one_body[0]);
                }
                if c.one_body[1] > 0.0 {
                    nb += gaussian(rng, var * c.one_body[1]);
                }
                if c.two_body_12 > 0.0 {
                    na += gaussian(rng, var * c.two_body_12 * (n2 - 0.5 * h).max(0.0));
                    nb += gaussian(rng, var * c.two_body_12 * (n1 - 0.5 * h).max(0.0));
                }
                if c.two_body_22 > 0.0 {
                    nb += gaussian(rng, var * 0.5 * c.two_body_22 * 4.0 * (n2 - 0.5 * h).max(0.0));
                }
                if c.three_body_111 > 0.0 {
                    let w = (n1 * n1 - 2.0 * h * n1 + 0.5 * h * h).max(0.0);
                    na += gaussian(rng, var * c.three_body_111 / 3.0 * 9.0 * w);
                }
            }
            *a = na;
            *b = nb;
        }
    }
}

/// Advance every active trajectory by `duration` with steps no longer than
/// `dt`. More than 1% flagged trajectories is an error.
pub fn evolve(
    ensemble: &mut TrajectoryEnsemble,
    params: &PhysicalParams,
    duration: f64,
    dt: f64,
    workers: Option<usize>,
) -> Result<usize> {
    if !(duration >= 0.0) {
        return Err(Error::config("sequence.hold_times_ms", "negative duration"));
    }
    if duration == 0.0 {
        return Ok(0);
    }
    let steps = (duration / dt - 1e-9).ceil().max(1.0) as usize;
    let prop = Propagator::new(&ensemble.grid, params, duration / steps as f64)?;
    let pool = worker_pool(workers)?;
    advance_all(ensemble, &prop, steps, &pool)?;
    Ok(steps)
}

fn advance_all(
    ensemble: &mut TrajectoryEnsemble,
    prop: &Propagator,
    steps: usize,
    pool: &rayon::ThreadPool,
) -> Result<()> {
    pool.install(|| {
        ensemble
            .trajectories
            .par_iter_mut()
            .for_each(|t| prop.advance(t, steps))
    });
    ensemble.time += prop.dt * steps as f64;
    check_flagged(ensemble)
}

fn check_flagged(ensemble: &TrajectoryEnsemble) -> Result<()> {
    let flagged = ensemble.flagged();
    if flagged > 0 {
        log::warn!(
            "{flagged} of {} trajectories diverged and are excluded",
            ensemble.n_traj()
        );
    }
    if flagged * 100 > ensemble.n_traj() {
        return Err(Error::Diverged {
            flagged,
            total: ensemble.n_traj(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct RunStats {
    pub dt: f64,
    pub steps: usize,
    pub flagged: usize,
}

/// Pulse 1, then free evolution with `capture` called at each observation
/// time. Pulse 2 is left to the analysis, which applies it to copies.
pub fn run_ramsey_with<S, F>(
    mut ensemble: TrajectoryEnsemble,
    schedule: &SequenceSchedule,
    params: &PhysicalParams,
    dt: f64,
    workers: Option<usize>,
    mut capture: F,
) -> Result<(Vec<S>, RunStats)>
where
    F: FnMut(&TrajectoryEnsemble) -> Result<S>,
{
    schedule.validate()?;
    let pulse = schedule.pulse1;
    apply_pulse(&mut ensemble, pulse.theta, pulse.phase);
    let pool = worker_pool(workers)?;
    let prop = Propagator::new(&ensemble.grid, params, dt)?;
    let mut out = Vec::with_capacity(schedule.observation_times.len());
    let mut steps_done = 0usize;
    for &t in &schedule.observation_times {
        // Snap to the fixed step lattice so that times never drift.
        let target = (t / dt - 1e-9).ceil().max(0.0) as usize;
        if target > steps_done {
            advance_all(&mut ensemble, &prop, target - steps_done, &pool)?;
            steps_done = target;
        }
        ensemble.time = t;
        out.push(capture(&ensemble)?);
    }
    let flagged = ensemble.flagged();
    Ok((
        out,
        RunStats {
            dt,
            steps: steps_done,
            flagged,
        },
    ))
}

/// Snapshots are full clones of the ensemble.
pub fn run_ramsey(
    ensemble: TrajectoryEnsemble,
    schedule: &SequenceSchedule,
    params: &PhysicalParams,
    dt: f64,
    workers: Option<usize>,
) -> Result<Vec<TrajectoryEnsemble>> {
    run_ramsey_with(ensemble, schedule, params, dt, workers, |e| Ok(e.clone())).map(|(s, _)| s)
}

#[derive(Debug, Clone, Serialize)]
pub struct StepDoubling {
    pub trajectories: usize,
    /// Largest relative change of the mean populations.
    pub population_change: f64,
    /// Change of `|∫ψ₁*ψ₂|` relative to the mean total population.
    pub coherence_change: f64,
}

/// Run the first few trajectories at `dt` and `dt/2` without loss noise and
/// compare the final observables.
pub fn step_doubling_check(
    ensemble: &TrajectoryEnsemble,
    schedule: &SequenceSchedule,
    params: &PhysicalParams,
    dt: f64,
    subset: usize,
    workers: Option<usize>,
) -> Result<StepDoubling> {
    let n = subset.clamp(1, ensemble.n_traj());
    let mut quiet = params.clone();
    quiet.loss_noise = false;
    let small = TrajectoryEnsemble::new(
        ensemble.grid.clone(),
        ensemble.master_seed,
        ensemble.trajectories[..n].to_vec(),
    );
    let last = *schedule.observation_times.last().unwrap_or(&0.0);
    let short = SequenceSchedule {
        observation_times: vec![last],
        ..schedule.clone()
    };
    let dv = ensemble.grid.cell_volume();
    let summary = |e: &TrajectoryEnsemble| -> Result<[f64; 3]> {
        let mut acc = [0.0; 3];
        for t in e.active() {
            let [n1, n2] = t.norms(dv);
            let o: Complex64 = t.psi[0]
                .iter()
                .zip(&t.psi[1])
                .map(|(a, b)| a.conj() * b)
                .sum::<Complex64>()
                * dv;
            acc[0] += n1;
            acc[1] += n2;
            acc[2] += o.norm();
        }
        Ok(acc.map(|x| x / n as f64))
    };
    let (coarse, _) = run_ramsey_with(small.clone(), &short, &quiet, dt, workers, summary)?;
    let (fine, _) = run_ramsey_with(small, &short, &quiet, dt / 2.0, workers, summary)?;
    let (c, f) = (coarse[0], fine[0]);
    let total = f[0] + f[1];
    Ok(StepDoubling {
        trajectories: n,
        population_change: ((c[0] - f[0]).abs().max((c[1] - f[1]).abs())) / total,
        coherence_change: (c[2] - f[2]).abs() / total,
    })
}
