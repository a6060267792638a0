//! Uniform Cartesian grids, the spectral transform, and the physical
//! parameters of the two-level ⁸⁷Rb gas.
//!
//! Grid axis `j` is aligned with trap axis `j`. A grid with fewer than three
//! axes describes a gas frozen in the transverse harmonic ground state of the
//! remaining trap axes; [`PhysicalParams::couplings`] folds the transverse
//! overlap integrals into the interaction and loss constants.

use crate::constants::{ATOMIC_MASS_UNIT, BOHR_RADIUS, HBAR, RB87_MASS_AMU};
use crate::error::{Error, Result};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;
use std::f64::consts::PI;
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid {
    points: Vec<usize>,
    extents: Vec<f64>,
    spacing: Vec<f64>,
    /// Coordinates along each axis, centred so that index `n/2` is the origin.
    coords: Vec<Vec<f64>>,
    /// Wavenumbers along each axis in standard DFT order.
    momenta: Vec<Vec<f64>>,
}

pub fn make_grid(points: &[usize], extents: &[f64]) -> Result<Grid> {
    Grid::new(points, extents)
}

impl Grid {
    pub fn new(points: &[usize], extents: &[f64]) -> Result<Self> {
        if points.is_empty() || points.len() > 3 {
            return Err(Error::config(
                "grid.dims",
                format!("{} axes, expected 1 to 3", points.len()),
            ));
        }
        if points.len() != extents.len() {
            return Err(Error::config(
                "grid.extents_um",
                format!("{} extents for {} axes", extents.len(), points.len()),
            ));
        }
        if let Some(p) = points.iter().find(|p| !p.is_power_of_two()) {
            return Err(Error::config("grid.points", format!("{p} is not a power of two")));
        }
        if let Some(e) = extents.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
            return Err(Error::config("grid.extents_um", format!("extent {e} must be positive")));
        }
        let spacing: Vec<f64> = points.iter().zip(extents).map(|(&n, &l)| l / n as f64).collect();
        let coords = points
            .iter()
            .zip(&spacing)
            .map(|(&n, &dx)| (0..n).map(|i| (i as f64 - (n / 2) as f64) * dx).collect())
            .collect();
        let momenta = points
            .iter()
            .zip(extents)
            .map(|(&n, &l)| {
                (0..n)
                    .map(|i| {
                        let m = if i < n.div_ceil(2) {
                            i as f64
                        } else {
                            i as f64 - n as f64
                        };
                        2.0 * PI * m / l
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            points: points.to_vec(),
            extents: extents.to_vec(),
            spacing,
            coords,
            momenta,
        })
    }

    pub fn dims(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[usize] {
        &self.points
    }

    pub fn extents(&self) -> &[f64] {
        &self.extents
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn coords(&self, axis: usize) -> &[f64] {
        &self.coords[axis]
    }

    pub fn momenta(&self, axis: usize) -> &[f64] {
        &self.momenta[axis]
    }

    /// Total number of modes `M`.
    pub fn size(&self) -> usize {
        self.points.iter().product()
    }

    /// Volume element `dV` (m^dims).
    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    /// Multi-index of flat index `i` (row-major, last axis fastest).
    pub fn unravel(&self, mut i: usize) -> [usize; 3] {
        let mut idx = [0; 3];
        for axis in (0..self.dims()).rev() {
            idx[axis] = i % self.points[axis];
            i /= self.points[axis];
        }
        idx
    }

    /// Position of flat index `i`; unused axes are zero.
    pub fn position(&self, i: usize) -> [f64; 3] {
        let idx = self.unravel(i);
        std::array::from_fn(|a| if a < self.dims() { self.coords[a][idx[a]] } else { 0.0 })
    }

    /// Wavevector of flat index `i`; unused axes are zero.
    pub fn wavevector(&self, i: usize) -> [f64; 3] {
        let idx = self.unravel(i);
        std::array::from_fn(|a| if a < self.dims() { self.momenta[a][idx[a]] } else { 0.0 })
    }

    pub fn k_squared(&self) -> Vec<f64> {
        (0..self.size())
            .map(|i| self.wavevector(i).iter().map(|k| k * k).sum())
            .collect()
    }

    pub fn k_max_squared(&self) -> f64 {
        self.k_squared().into_iter().fold(0.0, f64::max)
    }

    /// Flat index of the grid origin.
    pub fn center_index(&self) -> usize {
        self.points.iter().fold(0, |acc, &n| acc * n + n / 2)
    }

    /// `∫|ψ|² dV`.
    pub fn norm_sqr(&self, field: &[Complex64]) -> f64 {
        field.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.cell_volume()
    }

    /// `∫ conj(a) b dV`.
    pub fn inner(&self, a: &[Complex64], b: &[Complex64]) -> Complex64 {
        a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<Complex64>() * self.cell_volume()
    }

    /// Same grid restricted to its first `dims` axes.
    pub fn truncated(&self, dims: usize) -> Result<Self> {
        if dims == 0 || dims > self.dims() {
            return Err(Error::config(
                "grid.dims",
                format!("cannot reduce {}-D grid to {dims}-D", self.dims()),
            ));
        }
        Self::new(&self.points[..dims], &self.extents[..dims])
    }
}

/// Whether the mode count respects the truncated-Wigner validity guard
/// `M < N`. A violation is logged, not rejected.
pub fn twa_guard(grid: &Grid, n_atoms: f64) -> bool {
    let ok = (grid.size() as f64) < n_atoms;
    if !ok {
        log::warn!(
            "{} grid modes for {n_atoms} atoms: truncated-Wigner sampling noise dominates",
            grid.size()
        );
    }
    ok
}

/// Forward and inverse discrete Fourier transforms over a [`Grid`].
///
/// Forward is unnormalized, inverse carries the `1/M`. Plans are shared and
/// thread-safe; callers supply their own scratch buffers.
#[derive(Clone)]
pub struct Spectral {
    points: Vec<usize>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("points", &self.points).finish()
    }
}

impl Spectral {
    pub fn new(grid: &Grid) -> Self {
        let mut planner = FftPlanner::new();
        let forward = grid.points().iter().map(|&n| planner.plan_fft_forward(n)).collect();
        let inverse = grid.points().iter().map(|&n| planner.plan_fft_inverse(n)).collect();
        Self {
            points: grid.points().to_vec(),
            forward,
            inverse,
        }
    }

    pub fn scratch(&self) -> Vec<Complex64> {
        let fft_scratch = self
            .forward
            .iter()
            .chain(&self.inverse)
            .map(|p| p.get_inplace_scratch_len())
            .max()
            .unwrap_or(0);
        let line = self.points.iter().copied().max().unwrap_or(1);
        vec![Complex64::default(); fft_scratch + line]
    }

    pub fn forward(&self, data: &mut [Complex64], scratch: &mut [Complex64]) {
        self.transform(&self.forward, data, scratch);
    }

    pub fn inverse(&self, data: &mut [Complex64], scratch: &mut [Complex64]) {
        self.transform(&self.inverse, data, scratch);
        let inv = 1.0 / data.len() as f64;
        data.iter_mut().for_each(|z| *z *= inv);
    }

    fn transform(&self, plans: &[Arc<dyn Fft<f64>>], data: &mut [Complex64], scratch: &mut [Complex64]) {
        let dims = self.points.len();
        let total: usize = self.points.iter().product();
        debug_assert_eq!(data.len(), total);
        let (line, fft_scratch) = scratch.split_at_mut(self.points.iter().copied().max().unwrap_or(1));
        for (axis, plan) in plans.iter().enumerate().take(dims) {
            let n = self.points[axis];
            if n == 1 {
                continue;
            }
            let stride: usize = self.points[axis + 1..].iter().product();
            if stride == 1 {
                for chunk in data.chunks_exact_mut(n) {
                    plan.process_with_scratch(chunk, fft_scratch);
                }
                continue;
            }
            let block = n * stride;
            for outer in 0..total / block {
                for inner in 0..stride {
                    let base = outer * block + inner;
                    for (k, slot) in line[..n].iter_mut().enumerate() {
                        *slot = data[base + k * stride];
                    }
                    plan.process_with_scratch(&mut line[..n], fft_scratch);
                    for (k, slot) in line[..n].iter().enumerate() {
                        data[base + k * stride] = *slot;
                    }
                }
            }
        }
    }
}

/// Two-body and three-body channels; rates refer to densities in 3-D.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Default)]
pub struct LossRates {
    /// One-body rate per component (1/s).
    pub one_body: [f64; 2],
    /// `dn₂/dt = −γ₂₂ n₂²` (m³/s).
    pub two_body_22: f64,
    /// `dn₁/dt = dn₂/dt = −γ₁₂ n₁n₂` (m³/s).
    pub two_body_12: f64,
    /// `dn₁/dt = −γ₁₁₁ n₁³` (m⁶/s).
    pub three_body_111: f64,
}

impl LossRates {
    pub fn is_lossless(&self) -> bool {
        self.one_body == [0.0, 0.0] && self.two_body_22 == 0.0 && self.two_body_12 == 0.0 && self.three_body_111 == 0.0
    }

    /// Literature values for the |F=1,m=−1⟩, |F=2,m=+1⟩ clock pair of ⁸⁷Rb.
    pub fn rb87_clock() -> Self {
        Self {
            one_body: [0.0, 0.0],
            two_body_22: 8.1e-20,
            two_body_12: 1.51e-20,
            three_body_111: 5.4e-42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhysicalParams {
    /// Atomic mass (kg).
    pub mass: f64,
    /// S-wave scattering lengths `a₁₁, a₁₂, a₂₂` (m).
    pub scattering_lengths: [f64; 3],
    /// Trap angular frequencies (rad/s), axis `j` aligned with grid axis `j`.
    pub trap_freqs: [f64; 3],
    pub losses: LossRates,
    /// Include the Gaussian noise that accompanies loss damping.
    pub loss_noise: bool,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self::rb87_clock()
    }
}

impl PhysicalParams {
    /// ⁸⁷Rb clock states in a cigar trap with `ω/2π = (11.69, 97.6, 97.6)` Hz.
    pub fn rb87_clock() -> Self {
        Self {
            mass: RB87_MASS_AMU * ATOMIC_MASS_UNIT,
            scattering_lengths: [100.40 * BOHR_RADIUS, 98.006 * BOHR_RADIUS, 95.44 * BOHR_RADIUS],
            trap_freqs: [2.0 * PI * 11.69, 2.0 * PI * 97.6, 2.0 * PI * 97.6],
            losses: LossRates::rb87_clock(),
            loss_noise: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0) {
            return Err(Error::config("physics.mass_amu", "must be positive"));
        }
        if self.trap_freqs.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::config(
                "physics.trap_freqs_hz",
                "all frequencies must be positive",
            ));
        }
        if self.scattering_lengths.iter().any(|a| !a.is_finite()) {
            return Err(Error::config("physics.a11_a0", "scattering lengths must be finite"));
        }
        let l = &self.losses;
        let rates = [
            l.one_body[0],
            l.one_body[1],
            l.two_body_22,
            l.two_body_12,
            l.three_body_111,
        ];
        if rates.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
            return Err(Error::config("physics.loss", "loss rates must be non-negative"));
        }
        Ok(())
    }

    /// `4πħ²a/m`.
    pub fn coupling_3d(&self, scattering_length: f64) -> f64 {
        4.0 * PI * HBAR * HBAR * scattering_length / self.mass
    }

    /// Harmonic-oscillator length `√(ħ/mω)` along `axis`.
    pub fn oscillator_length(&self, axis: usize) -> f64 {
        (HBAR / (self.mass * self.trap_freqs[axis])).sqrt()
    }

    /// Geometric mean trap frequency.
    pub fn mean_trap_freq(&self) -> f64 {
        self.trap_freqs.iter().product::<f64>().cbrt()
    }

    /// `∫|φ⊥|^{2k}` over the axes not resolved by a `dims`-D grid, where
    /// `φ⊥` is the transverse harmonic ground state.
    pub fn transverse_overlap(&self, dims: usize, k: u32) -> f64 {
        let k = k as f64;
        (dims..3)
            .map(|axis| {
                let l = self.oscillator_length(axis);
                1.0 / (k.sqrt() * (PI.sqrt() * l).powf(k - 1.0))
            })
            .product()
    }

    /// Interaction and loss constants for a `dims`-D grid.
    pub fn couplings(&self, dims: usize) -> Couplings {
        let two = self.transverse_overlap(dims, 2);
        let three = self.transverse_overlap(dims, 3);
        let [a11, a12, a22] = self.scattering_lengths;
        let g11 = self.coupling_3d(a11) * two;
        let g12 = self.coupling_3d(a12) * two;
        let g22 = self.coupling_3d(a22) * two;
        Couplings {
            g: [[g11, g12], [g12, g22]],
            one_body: self.losses.one_body,
            two_body_22: self.losses.two_body_22 * two,
            two_body_12: self.losses.two_body_12 * two,
            three_body_111: self.losses.three_body_111 * three,
            two_body_reduction: two,
            three_body_reduction: three,
        }
    }
}

/// Grid-dimension interaction (J·m^dims) and loss constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Couplings {
    pub g: [[f64; 2]; 2],
    pub one_body: [f64; 2],
    pub two_body_22: f64,
    pub two_body_12: f64,
    pub three_body_111: f64,
    /// Factor applied to two-body constants (1 in 3-D).
    pub two_body_reduction: f64,
    /// Factor applied to three-body constants (1 in 3-D).
    pub three_body_reduction: f64,
}

/// `V(x) = (m/2) Σ_j ω_j² x_j²` over the grid axes (J).
pub fn trap_potential(grid: &Grid, params: &PhysicalParams) -> Vec<f64> {
    (0..grid.size())
        .map(|i| {
            let x = grid.position(i);
            0.5 * params.mass
                * (0..grid.dims())
                    .map(|a| params.trap_freqs[a].powi(2) * x[a] * x[a])
                    .sum::<f64>()
        })
        .collect()
}

/// Free-particle energy `ħ²k²/2m` on the momentum grid (J).
pub fn kinetic_energy(grid: &Grid, params: &PhysicalParams) -> Vec<f64> {
    let scale = HBAR * HBAR / (2.0 * params.mass);
    grid.k_squared().into_iter().map(|k2| scale * k2).collect()
}

/// Split-step multiplier `exp(−i ħk²/(2m) dt)` on the momentum grid.
pub fn kinetic_phase(grid: &Grid, params: &PhysicalParams, dt: f64) -> Vec<Complex64> {
    let rate = HBAR / (2.0 * params.mass) * dt;
    grid.k_squared()
        .into_iter()
        .map(|k2| Complex64::from_polar(1.0, -rate * k2))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn grid_spacing_and_mode_count() {
        let g = make_grid(&[256], &[100e-6]).unwrap();
        assert_eq!(g.spacing()[0], 0.390625e-6);
        let g = make_grid(&[64, 64, 256], &[1e-5, 1e-5, 1e-4]).unwrap();
        assert_eq!(g.size(), 1 << 20);
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(matches!(make_grid(&[256], &[0.0]), Err(Error::Config { .. })));
        assert!(matches!(make_grid(&[100], &[1e-6]), Err(Error::Config { .. })));
        assert!(make_grid(&[], &[]).is_err());
        assert!(make_grid(&[2, 2, 2, 2], &[1.0; 4]).is_err());
    }

    #[test]
    fn momentum_grid_is_dft_ordered() {
        let g = make_grid(&[8], &[8.0]).unwrap();
        let dk = 2.0 * PI / 8.0;
        let want = [0.0, 1.0, 2.0, 3.0, -4.0, -3.0, -2.0, -1.0].map(|m| m * dk);
        assert_eq!(g.momenta(0), &want);
        assert_eq!(g.coords(0)[4], 0.0);
    }

    #[test]
    fn trap_potential_examples() {
        let params = PhysicalParams::rb87_clock();
        let g = make_grid(&[64], &[64e-6]).unwrap();
        let v = trap_potential(&g, &params);
        assert_eq!(v[g.center_index()], 0.0);
        // x = 1 µm sits one cell right of centre.
        let x1 = g.coords(0)[33];
        assert!((x1 - 1e-6).abs() < 1e-18);
        let want = params.mass * params.trap_freqs[0].powi(2) * 1e-12 / 2.0;
        assert!((v[33] - want).abs() < 1e-12 * want);
        for i in 1..32 {
            assert_eq!(v[32 + i], v[32 - i]);
        }
    }

    #[test]
    fn kinetic_phase_examples() {
        let params = PhysicalParams::rb87_clock();
        let g = make_grid(&[32, 16], &[40e-6, 20e-6]).unwrap();
        let ph = kinetic_phase(&g, &params, 1e-4);
        assert_eq!(ph[0], Complex64::new(1.0, 0.0));
        assert!(ph.iter().all(|z| (z.norm() - 1.0).abs() < 1e-15));
        assert!(kinetic_phase(&g, &params, 0.0)
            .iter()
            .all(|z| *z == Complex64::new(1.0, 0.0)));
    }

    #[test]
    fn spectral_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for points in [vec![64], vec![16, 8], vec![8, 4, 16], vec![1]] {
            let extents = vec![1.0; points.len()];
            let g = make_grid(&points, &extents).unwrap();
            let sp = Spectral::new(&g);
            let mut scratch = sp.scratch();
            let orig: Vec<Complex64> = (0..g.size())
                .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
                .collect();
            let mut data = orig.clone();
            sp.forward(&mut data, &mut scratch);
            sp.inverse(&mut data, &mut scratch);
            let err = orig.iter().zip(&data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            let scale = orig.iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!(err < 1e-12 * scale, "{points:?}: {err}");
        }
    }

    #[test]
    fn spectral_transform_of_plane_wave_is_single_peak() {
        let g = make_grid(&[8, 16], &[1.0, 1.0]).unwrap();
        let sp = Spectral::new(&g);
        let mut scratch = sp.scratch();
        // e^{i(2·2π x + 3·2π y)} peaks at k-index (2, 3).
        let mut data: Vec<Complex64> = (0..g.size())
            .map(|i| {
                let x = g.position(i);
                Complex64::from_polar(1.0, 2.0 * PI * (2.0 * x[0] + 3.0 * x[1]))
            })
            .collect();
        sp.forward(&mut data, &mut scratch);
        let peak = 2 * 16 + 3;
        assert!((data[peak].norm() - g.size() as f64).abs() < 1e-9);
        let rest: f64 = data
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != peak)
            .map(|(_, z)| z.norm())
            .sum();
        assert!(rest < 1e-8);
    }

    #[test]
    fn free_gaussian_spreads_at_analytic_rate() {
        let params = PhysicalParams::rb87_clock();
        let g = make_grid(&[1024], &[120e-6]).unwrap();
        let sp = Spectral::new(&g);
        let mut scratch = sp.scratch();
        let sigma0 = 2e-6;
        let mut psi: Vec<Complex64> = g
            .coords(0)
            .iter()
            .map(|x| Complex64::new((-x * x / (4.0 * sigma0 * sigma0)).exp(), 0.0))
            .collect();
        let t = 10e-3;
        sp.forward(&mut psi, &mut scratch);
        for (z, m) in psi.iter_mut().zip(kinetic_phase(&g, &params, t)) {
            *z *= m;
        }
        sp.inverse(&mut psi, &mut scratch);
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        let var: f64 = psi
            .iter()
            .zip(g.coords(0))
            .map(|(z, x)| z.norm_sqr() * x * x)
            .sum::<f64>()
            / norm;
        let tau = HBAR * t / (2.0 * params.mass * sigma0 * sigma0);
        let want = sigma0 * (1.0 + tau * tau).sqrt();
        assert!((var.sqrt() / want - 1.0).abs() < 1e-6, "{} vs {want}", var.sqrt());
    }

    #[test]
    fn couplings_reduce_with_transverse_ground_state() {
        let p = PhysicalParams::rb87_clock();
        let c3 = p.couplings(3);
        assert_eq!(c3.two_body_reduction, 1.0);
        let c1 = p.couplings(1);
        let l1 = p.oscillator_length(1);
        let l2 = p.oscillator_length(2);
        let want = 1.0 / (2.0 * PI * l1 * l2);
        assert!((c1.two_body_reduction - want).abs() < 1e-12 * want);
        let want3 = 1.0 / (3.0 * PI * PI * l1 * l1 * l2 * l2);
        assert!((c1.three_body_reduction - want3).abs() < 1e-12 * want3);
        let c2 = p.couplings(2);
        let want2 = 1.0 / ((2.0 * PI).sqrt() * l2);
        assert!((c2.two_body_reduction - want2).abs() < 1e-12 * want2);
    }
}
