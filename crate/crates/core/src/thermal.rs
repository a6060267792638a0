//! Finite-temperature initial state: Gross–Pitaevskii condensate in a
//! self-consistent semiclassical Hartree–Fock thermal cloud.
//!
//! Only component 1 is populated. On reduced grids the thermal cloud is the
//! semiclassical 3-D density integrated over the unresolved trap axes, which
//! raises the Bose-function order by one half per integrated axis.

use crate::basis::HoBasis;
use crate::constants::{HBAR, K_B, ZETA_3};
use crate::error::{Error, Result};
use crate::grid::{kinetic_energy, trap_potential, Grid, PhysicalParams, Spectral};
use crate::special::BoseFunction;
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

/// Ideal-gas transition temperature `(ħω̄/k_B)(N/ζ(3))^{1/3}` (K).
pub fn critical_temperature(n: f64, trap_freqs: &[f64; 3]) -> f64 {
    let wbar = trap_freqs.iter().product::<f64>().cbrt();
    HBAR * wbar / K_B * (n / ZETA_3).cbrt()
}

#[derive(Debug, Clone, Serialize)]
pub struct GpeOptions {
    /// Imaginary-time step (s); by default `0.05ħ/E` with `E` the larger of
    /// the stiffest trap quantum and the Thomas–Fermi chemical potential.
    pub dt: Option<f64>,
    /// Relative energy change per step at which the descent stops.
    pub tolerance: f64,
    pub max_steps: usize,
}

impl Default for GpeOptions {
    fn default() -> Self {
        Self {
            dt: None,
            tolerance: 1e-10,
            max_steps: 400_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GroundState {
    pub field: Vec<Complex64>,
    /// `⟨φ|H_GP|φ⟩/n_c` (J).
    pub mu: f64,
    /// Gross–Pitaevskii energy functional (J).
    pub energy: f64,
    pub steps: usize,
    pub dt: f64,
}

pub fn gpe_ground_state(
    grid: &Grid,
    params: &PhysicalParams,
    n_c: f64,
    extra_potential: Option<&[f64]>,
) -> Result<GroundState> {
    gpe_ground_state_with(grid, params, n_c, extra_potential, &GpeOptions::default(), None)
}

/// Imaginary-time split-step descent for component 1, renormalized to `n_c`
/// after every step. `initial` warm-starts the descent.
pub fn gpe_ground_state_with(
    grid: &Grid,
    params: &PhysicalParams,
    n_c: f64,
    extra_potential: Option<&[f64]>,
    opts: &GpeOptions,
    initial: Option<&[Complex64]>,
) -> Result<GroundState> {
    if !(n_c > 0.0 && n_c.is_finite()) {
        return Err(Error::config("thermal.n_condensate", format!("{n_c} must be positive")));
    }
    let m = grid.size();
    let g = params.couplings(grid.dims()).g[0][0];
    let mut v = trap_potential(grid, params);
    if let Some(extra) = extra_potential {
        if extra.len() != m {
            return Err(Error::config(
                "thermal.extra_potential",
                "length differs from grid size",
            ));
        }
        v.iter_mut().zip(extra).for_each(|(v, e)| *v += e);
    }
    let ek = kinetic_energy(grid, params);
    let dv = grid.cell_volume();
    let mut psi = match initial {
        Some(f) if f.len() == m && f.iter().any(|z| z.norm_sqr() > 0.0) => f.to_vec(),
        _ => initial_guess(grid, params, n_c, &v, g),
    };
    normalize(&mut psi, n_c, dv);

    let dt = opts.dt.unwrap_or_else(|| {
        let w_max = params.trap_freqs[..grid.dims()].iter().copied().fold(0.0, f64::max);
        let mu_tf = if g > 0.0 { thomas_fermi_mu(&v, g, n_c, dv) } else { 0.0 };
        0.05 * HBAR / (HBAR * w_max).max(mu_tf)
    });
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::config("thermal.gpe_dt", format!("{dt} must be positive")));
    }
    let half_kinetic: Vec<f64> = ek.iter().map(|e| (-e * dt / (2.0 * HBAR)).exp()).collect();
    let spectral = Spectral::new(grid);
    let mut scratch = spectral.scratch();
    let mut work = vec![Complex64::default(); m];

    const CHECK_EVERY: usize = 10;
    let (mut energy, _) = energy_and_mu(&psi, &v, &ek, g, dv, &spectral, &mut work, &mut scratch);
    for step in 1..=opts.max_steps {
        kinetic_step(&mut psi, &half_kinetic, &spectral, &mut scratch);
        for (z, vi) in psi.iter_mut().zip(&v) {
            *z *= (-(vi + g * z.norm_sqr()) * dt / HBAR).exp();
        }
        kinetic_step(&mut psi, &half_kinetic, &spectral, &mut scratch);
        normalize(&mut psi, n_c, dv);
        if step % CHECK_EVERY == 0 {
            let (e, mu) = energy_and_mu(&psi, &v, &ek, g, dv, &spectral, &mut work, &mut scratch);
            if !e.is_finite() {
                return Err(Error::Numerical {
                    stage: "gpe",
                    reason: "energy became non-finite".into(),
                });
            }
            let change = (e - energy).abs() / CHECK_EVERY as f64;
            energy = e;
            if change <= opts.tolerance * e.abs() {
                return Ok(GroundState {
                    field: psi,
                    mu,
                    energy,
                    steps: step,
                    dt,
                });
            }
        }
    }
    let (e, _) = energy_and_mu(&psi, &v, &ek, g, dv, &spectral, &mut work, &mut scratch);
    Err(Error::Convergence {
        stage: "gpe",
        iterations: opts.max_steps,
        residual: (e - energy).abs() / e.abs(),
    })
}

fn kinetic_step(psi: &mut [Complex64], factor: &[f64], spectral: &Spectral, scratch: &mut [Complex64]) {
    spectral.forward(psi, scratch);
    psi.iter_mut().zip(factor).for_each(|(z, f)| *z *= f);
    spectral.inverse(psi, scratch);
}

fn normalize(psi: &mut [Complex64], n: f64, dv: f64) {
    let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * dv;
    let s = (n / norm).sqrt();
    psi.iter_mut().for_each(|z| *z *= s);
}

#[allow(clippy::too_many_arguments)]
fn energy_and_mu(
    psi: &[Complex64],
    v: &[f64],
    ek: &[f64],
    g: f64,
    dv: f64,
    spectral: &Spectral,
    work: &mut [Complex64],
    scratch: &mut [Complex64],
) -> (f64, f64) {
    work.copy_from_slice(psi);
    spectral.forward(work, scratch);
    let kinetic: f64 = work.iter().zip(ek).map(|(z, e)| z.norm_sqr() * e).sum::<f64>() * dv / psi.len() as f64;
    let mut potential = 0.0;
    let mut interaction = 0.0;
    let mut n = 0.0;
    for (z, vi) in psi.iter().zip(v) {
        let d = z.norm_sqr();
        n += d;
        potential += vi * d;
        interaction += g * d * d;
    }
    let (n, potential, interaction) = (n * dv, potential * dv, interaction * dv);
    let energy = kinetic + potential + 0.5 * interaction;
    (energy, (kinetic + potential + interaction) / n)
}

fn thomas_fermi_mu(v: &[f64], g: f64, n: f64, dv: f64) -> f64 {
    let count = |mu: f64| v.iter().map(|vi| (mu - vi).max(0.0)).sum::<f64>() * dv / g;
    let mut lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = lo + 1e-35;
    while count(hi) < n {
        hi = lo + 2.0 * (hi - lo);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if count(mid) < n {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Pointwise maximum of the Thomas–Fermi and oscillator-ground-state
/// densities, so the guess is sensible at weak and strong coupling.
fn initial_guess(grid: &Grid, params: &PhysicalParams, n: f64, v: &[f64], g: f64) -> Vec<Complex64> {
    let dv = grid.cell_volume();
    let mu_tf = if g > 0.0 {
        Some(thomas_fermi_mu(v, g, n, dv))
    } else {
        None
    };
    let lengths: Vec<f64> = (0..grid.dims()).map(|a| params.oscillator_length(a)).collect();
    (0..grid.size())
        .map(|i| {
            let x = grid.position(i);
            let gauss = n * lengths
                .iter()
                .enumerate()
                .map(|(a, l)| (-x[a] * x[a] / (l * l)).exp() / (PI.sqrt() * l))
                .product::<f64>();
            let tf = mu_tf.map_or(0.0, |mu| ((mu - v[i]) / g).max(0.0));
            Complex64::new(gauss.max(tf).sqrt(), 0.0)
        })
        .collect()
}

/// Semiclassical thermal density of a gas at temperature `T`, integrated over
/// the trap axes the grid does not resolve.
#[derive(Debug, Clone)]
pub struct SemiclassicalCloud {
    beta: f64,
    prefactor: f64,
    bose: BoseFunction,
}

impl SemiclassicalCloud {
    pub fn new(grid: &Grid, params: &PhysicalParams, temperature: f64) -> Self {
        let kt = K_B * temperature;
        let lambda = (2.0 * PI * HBAR * HBAR / (params.mass * kt)).sqrt();
        let dims = grid.dims();
        let transverse: f64 = (dims..3)
            .map(|a| (2.0 * PI * kt / (params.mass * params.trap_freqs[a].powi(2))).sqrt())
            .product();
        Self {
            beta: 1.0 / kt,
            prefactor: transverse / lambda.powi(3),
            bose: BoseFunction::new(1.5 + 0.5 * (3 - dims) as f64),
        }
    }

    /// `n_T(x)` for effective potential `v_eff` and thermal chemical potential
    /// `mu` measured from the classical trap minimum.
    pub fn density(&self, v_eff: &[f64], mu: f64) -> Vec<f64> {
        v_eff
            .iter()
            .map(|v| self.prefactor * self.bose.eval(self.beta * (v - mu)))
            .collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ShfOptions {
    pub max_iterations: usize,
    /// Relative change of the thermal atom number at which iteration stops.
    pub tolerance: f64,
    /// Mixing weight of each new thermal density.
    pub damping: f64,
    pub gpe: GpeOptions,
}

impl Default for ShfOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            tolerance: 1e-3,
            damping: 0.5,
            gpe: GpeOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ThermalEnsembleSpec {
    #[serde(skip)]
    pub condensate: Vec<Complex64>,
    #[serde(skip)]
    pub thermal_density: Vec<f64>,
    /// Condensate chemical potential in grid-energy convention (J).
    pub mu: f64,
    /// Chemical potential of the semiclassical cloud, zero at the trap
    /// minimum (J).
    pub mu_thermal: f64,
    pub temperature: f64,
    pub critical_temperature: f64,
    pub n_total: f64,
    pub n_condensate: f64,
    pub n_thermal: f64,
    /// False above the transition, where `condensate` is identically zero.
    pub condensed: bool,
    pub iterations: usize,
}

impl ThermalEnsembleSpec {
    pub fn condensate_fraction(&self) -> f64 {
        self.n_condensate / self.n_total
    }
}

pub fn shf_self_consistent(
    grid: &Grid,
    params: &PhysicalParams,
    n_total: f64,
    temperature: f64,
) -> Result<ThermalEnsembleSpec> {
    shf_self_consistent_with(grid, params, n_total, temperature, &ShfOptions::default())
}

/// Damped fixed point on the thermal density. Each pass solves the GPE for
/// `N_c = N − N_T` in the potential `V + 2g n_T`, sets the cloud's chemical
/// potential from the condensate's, and recomputes `n_T` in
/// `V + 2g(n_c + n_T)`. Above the transition `N_c` is dropped and the cloud's
/// chemical potential is bisected to hold the atom number.
pub fn shf_self_consistent_with(
    grid: &Grid,
    params: &PhysicalParams,
    n_total: f64,
    temperature: f64,
    opts: &ShfOptions,
) -> Result<ThermalEnsembleSpec> {
    if !(n_total > 0.0 && n_total.is_finite()) {
        return Err(Error::config("thermal.n_total", format!("{n_total} must be positive")));
    }
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::config(
            "thermal.temperature_nk",
            format!("{temperature} must be positive"),
        ));
    }
    params.validate()?;
    let m = grid.size();
    let dv = grid.cell_volume();
    let g = params.couplings(grid.dims()).g[0][0];
    let v = trap_potential(grid, params);
    let v_min = v.iter().copied().fold(f64::INFINITY, f64::min);
    let zero_point: f64 = 0.5 * HBAR * params.trap_freqs[..grid.dims()].iter().sum::<f64>();
    let cloud = SemiclassicalCloud::new(grid, params, temperature);
    let tc = critical_temperature(n_total, &params.trap_freqs);
    let integral = |f: &[f64]| f.iter().sum::<f64>() * dv;

    let mut n_thermal_field = vec![0.0; m];
    let mut n_thermal = 0.0;
    let mut n_c = (n_total * (1.0 - (temperature / tc).powi(3))).max(0.05 * n_total);
    let mut field: Option<Vec<Complex64>> = None;
    for iteration in 1..=opts.max_iterations {
        let extra: Vec<f64> = n_thermal_field.iter().map(|n| 2.0 * g * n).collect();
        let gs = gpe_ground_state_with(grid, params, n_c, Some(&extra), &opts.gpe, field.as_deref())?;
        let v_eff: Vec<f64> = v
            .iter()
            .zip(&gs.field)
            .zip(&n_thermal_field)
            .map(|((v, p), t)| v + 2.0 * g * (p.norm_sqr() + t))
            .collect();
        let floor = v_eff.iter().copied().fold(f64::INFINITY, f64::min);
        let mu_thermal = (gs.mu - zero_point).min(floor);
        let fresh = cloud.density(&v_eff, mu_thermal);
        let fresh_total = integral(&fresh);
        let change = (fresh_total - n_thermal).abs() / fresh_total.max(1e-9 * n_total);
        log::debug!("shf pass {iteration}: N_c {n_c:.6e}, N_T {fresh_total:.6e}, change {change:.3e}");
        if change < opts.tolerance && iteration > 1 {
            let n_c = n_total - fresh_total;
            if n_c <= 0.0 {
                break;
            }
            let mut condensate = gs.field;
            normalize(&mut condensate, n_c, dv);
            return Ok(ThermalEnsembleSpec {
                condensate,
                thermal_density: fresh,
                mu: gs.mu,
                mu_thermal,
                temperature,
                critical_temperature: tc,
                n_total,
                n_condensate: n_c,
                n_thermal: fresh_total,
                condensed: true,
                iterations: iteration,
            });
        }
        n_thermal_field
            .iter_mut()
            .zip(&fresh)
            .for_each(|(t, f)| *t += opts.damping * (f - *t));
        n_thermal = integral(&n_thermal_field);
        if n_total - n_thermal <= 1e-6 * n_total {
            break;
        }
        n_c = n_total - n_thermal;
        field = Some(gs.field);
    }
    if n_total - n_thermal > 1e-6 * n_total {
        return Err(Error::Convergence {
            stage: "shf",
            iterations: opts.max_iterations,
            residual: (n_total - n_thermal) / n_total,
        });
    }
    uncondensed(
        grid,
        params,
        n_total,
        temperature,
        &cloud,
        &v,
        v_min,
        zero_point,
        g,
        opts,
        tc,
    )
}

#[allow(clippy::too_many_arguments)]
fn uncondensed(
    grid: &Grid,
    _params: &PhysicalParams,
    n_total: f64,
    temperature: f64,
    cloud: &SemiclassicalCloud,
    v: &[f64],
    v_min: f64,
    zero_point: f64,
    g: f64,
    opts: &ShfOptions,
    tc: f64,
) -> Result<ThermalEnsembleSpec> {
    let dv = grid.cell_volume();
    let kt = K_B * temperature;
    let mut n_t = vec![0.0; v.len()];
    let mut previous = f64::INFINITY;
    for iteration in 1..=opts.max_iterations {
        let v_eff: Vec<f64> = v.iter().zip(&n_t).map(|(v, t)| v + 2.0 * g * t).collect();
        let floor = v_eff.iter().copied().fold(f64::INFINITY, f64::min);
        let count = |mu: f64| cloud.density(&v_eff, mu).iter().sum::<f64>() * dv;
        if count(floor) < n_total {
            return Err(Error::Convergence {
                stage: "shf",
                iterations: iteration,
                residual: 1.0 - count(floor) / n_total,
            });
        }
        let (mut lo, mut hi) = (floor.min(v_min) - 60.0 * kt, floor);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if count(mid) < n_total {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mu = 0.5 * (lo + hi);
        let fresh = cloud.density(&v_eff, mu);
        let total = fresh.iter().sum::<f64>() * dv;
        let change = (total - previous).abs() / total;
        let field_change = fresh.iter().zip(&n_t).map(|(a, b)| (a - b).abs()).sum::<f64>() * dv / total;
        if change < opts.tolerance && field_change < opts.tolerance {
            return Ok(ThermalEnsembleSpec {
                condensate: vec![Complex64::default(); v.len()],
                thermal_density: fresh,
                mu: mu + zero_point,
                mu_thermal: mu,
                temperature,
                critical_temperature: tc,
                n_total,
                n_condensate: 0.0,
                n_thermal: total,
                condensed: false,
                iterations: iteration,
            });
        }
        previous = total;
        n_t.iter_mut()
            .zip(&fresh)
            .for_each(|(t, f)| *t += opts.damping * (f - *t));
    }
    Err(Error::Convergence {
        stage: "shf",
        iterations: opts.max_iterations,
        residual: f64::NAN,
    })
}

/// Eigenmodes of the Hartree–Fock Hamiltonian `T + V + 2g(n_c + n_T)` in the
/// subspace orthogonal to the condensate, with Bose occupations that include
/// the unresolved transverse excitations.
#[derive(Debug, Clone)]
pub struct ThermalModes {
    /// Mode energies in grid-energy convention (J).
    pub energies: Vec<f64>,
    pub occupations: Vec<f64>,
    /// Real mode functions normalized to `∫u² dV = 1`.
    pub vectors: Vec<Vec<f64>>,
    /// Σ n̄ over the modes divided by the cloud's atom number.
    pub captured_fraction: f64,
    /// Σ n̄ at the condensate chemical potential over the cloud's atom number.
    pub semiclassical_ratio: f64,
    /// Amount by which the modes' chemical potential sits below the
    /// condensate's (J).
    pub mu_shift: f64,
    pub full_grid: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModeOptions {
    /// Grids up to this many points are diagonalized in full.
    pub full_grid_limit: usize,
    /// Oscillator basis size on larger grids.
    pub basis_size: usize,
}

impl Default for ModeOptions {
    fn default() -> Self {
        Self {
            full_grid_limit: 1024,
            basis_size: 150,
        }
    }
}

impl ThermalModes {
    pub fn compute(
        spec: &ThermalEnsembleSpec,
        grid: &Grid,
        params: &PhysicalParams,
        opts: &ModeOptions,
    ) -> Result<Self> {
        let m = grid.size();
        let dv = grid.cell_volume();
        let g = params.couplings(grid.dims()).g[0][0];
        let w: Vec<f64> = trap_potential(grid, params)
            .iter()
            .zip(&spec.condensate)
            .zip(&spec.thermal_density)
            .map(|((v, p), t)| v + 2.0 * g * (p.norm_sqr() + t))
            .collect();
        let ek = kinetic_energy(grid, params);
        let spectral = Spectral::new(grid);
        let mut scratch = spectral.scratch();
        let apply_h = |u: &[f64], scratch: &mut [Complex64]| -> Vec<f64> {
            let mut z: Vec<Complex64> = u.iter().map(|x| Complex64::new(*x, 0.0)).collect();
            spectral.forward(&mut z, scratch);
            z.iter_mut().zip(&ek).for_each(|(z, e)| *z *= e);
            spectral.inverse(&mut z, scratch);
            z.iter().zip(u).zip(&w).map(|((z, x), wi)| z.re + wi * x).collect()
        };
        // Unit-norm condensate direction under the plain Euclidean product.
        let phi_hat: Option<Vec<f64>> = spec.condensed.then(|| {
            let norm = spec.condensate.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            spec.condensate.iter().map(|z| z.re / norm).collect()
        });

        let full_grid = m <= opts.full_grid_limit;
        // Orthonormal (Euclidean) vectors spanning the thermal subspace.
        let (basis, h) = if full_grid {
            let mut h = DMatrix::<f64>::zeros(m, m);
            let mut e = vec![0.0; m];
            for j in 0..m {
                e[j] = 1.0;
                let col = apply_h(&e, &mut scratch);
                e[j] = 0.0;
                h.set_column(j, &nalgebra::DVector::from_vec(col));
            }
            h = (&h + h.transpose()) * 0.5;
            if let Some(p) = &phi_hat {
                let p = nalgebra::DVector::from_column_slice(p);
                let hp = &h * &p;
                let php = p.dot(&hp);
                // P H P with P = 1 − p pᵀ.
                h -= &hp * p.transpose() + &p * hp.transpose();
                h += &p * p.transpose() * php;
            }
            (None, h)
        } else {
            let size = opts.basis_size.min(m - 1);
            let ho = HoBasis::lowest(grid, params, size)?;
            let sq = dv.sqrt();
            let mut vecs: Vec<Vec<f64>> = Vec::with_capacity(size);
            for u in ho.vectors {
                let mut u: Vec<f64> = u.into_iter().map(|x| x * sq).collect();
                for _ in 0..2 {
                    for b in phi_hat.iter().chain(vecs.iter()) {
                        let o: f64 = b.iter().zip(&u).map(|(x, y)| x * y).sum();
                        u.iter_mut().zip(b).for_each(|(y, x)| *y -= o * x);
                    }
                }
                let n = u.iter().map(|x| x * x).sum::<f64>().sqrt();
                if n > 1e-3 {
                    u.iter_mut().for_each(|x| *x /= n);
                    vecs.push(u);
                }
            }
            let k = vecs.len();
            let mut h = DMatrix::<f64>::zeros(k, k);
            for b in 0..k {
                let hb = apply_h(&vecs[b], &mut scratch);
                for a in 0..k {
                    h[(a, b)] = vecs[a].iter().zip(&hb).map(|(x, y)| x * y).sum();
                }
            }
            h = (&h + h.transpose()) * 0.5;
            (Some(vecs), h)
        };

        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        if let (true, Some(p)) = (full_grid, &phi_hat) {
            // Drop the null direction left by the projection.
            let p = nalgebra::DVector::from_column_slice(p);
            let null = (0..order.len())
                .max_by(|&a, &b| {
                    let oa = eig.eigenvectors.column(order[a]).dot(&p).abs();
                    let ob = eig.eigenvectors.column(order[b]).dot(&p).abs();
                    oa.total_cmp(&ob)
                })
                .unwrap();
            order.remove(null);
        }

        let mu = spec.mu;
        let beta = 1.0 / (K_B * spec.temperature);
        let transverse: Vec<f64> = params.trap_freqs[grid.dims()..]
            .iter()
            .map(|w| beta * HBAR * w)
            .collect();
        let inv_sq = 1.0 / dv.sqrt();
        let mut gaps = Vec::with_capacity(order.len());
        let mut energies = Vec::with_capacity(order.len());
        let mut vectors = Vec::with_capacity(order.len());
        for &i in &order {
            let eps = eig.eigenvalues[i];
            let gap = beta * (eps - mu);
            if !(gap > 0.0) {
                return Err(Error::Numerical {
                    stage: "thermal-modes",
                    reason: format!("mode energy {eps:e} J not above chemical potential {mu:e} J"),
                });
            }
            gaps.push(gap);
            let col = eig.eigenvectors.column(i);
            let v: Vec<f64> = match &basis {
                None => col.iter().map(|x| x * inv_sq).collect(),
                Some(b) => {
                    let mut v = vec![0.0; m];
                    for (c, u) in col.iter().zip(b) {
                        v.iter_mut().zip(u).for_each(|(y, x)| *y += c * x);
                    }
                    v.iter_mut().for_each(|x| *x *= inv_sq);
                    v
                }
            };
            energies.push(eps);
            vectors.push(v);
        }
        let total = |shift: f64| {
            gaps.iter()
                .map(|g| bose_occupation(g + shift, &transverse))
                .sum::<f64>()
        };
        let quantum_count = total(0.0);
        let semiclassical_ratio = if spec.n_thermal > 0.0 {
            quantum_count / spec.n_thermal
        } else {
            1.0
        };
        // The quantum ladder holds more atoms than the semiclassical cloud it
        // replaces; lower the modes' chemical potential to keep the budget.
        let mut shift = 0.0;
        if quantum_count > spec.n_thermal {
            let (mut lo, mut hi) = (0.0, 1.0);
            while total(hi) > spec.n_thermal {
                hi *= 2.0;
            }
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if total(mid) > spec.n_thermal {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            shift = 0.5 * (lo + hi);
        }
        let occupations: Vec<f64> = gaps.iter().map(|g| bose_occupation(g + shift, &transverse)).collect();
        let captured = occupations.iter().sum::<f64>();
        let captured_fraction = if spec.n_thermal > 0.0 {
            captured / spec.n_thermal
        } else {
            1.0
        };
        Ok(Self {
            energies,
            occupations,
            vectors,
            captured_fraction,
            semiclassical_ratio,
            mu_shift: shift / beta,
            full_grid,
        })
    }
}

/// `Σ_l e^{−l·gap} Π_j 1/(1 − e^{−l·βħω_j})`: a grid mode's occupation
/// summed over the transverse oscillator ladder.
fn bose_occupation(gap: f64, transverse: &[f64]) -> f64 {
    let mut sum = 0.0;
    for l in 1..100_000 {
        let lf = l as f64;
        let term = (-lf * gap).exp()
            * transverse
                .iter()
                .map(|x| 1.0 / (1.0 - (-lf * x).exp()))
                .product::<f64>();
        sum += term;
        if term < 1e-15 * sum {
            break;
        }
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    fn ideal(params: &PhysicalParams) -> PhysicalParams {
        let mut p = params.clone();
        p.scattering_lengths = [0.0; 3];
        p
    }

    #[test]
    fn critical_temperature_examples() {
        let w = 2.0 * PI * 100.0;
        let tc = critical_temperature(1e5, &[w, w, w]);
        // ħω/k_B · (10⁵/ζ(3))^{1/3} by hand: 4.799243e-9 K × 43.652.
        assert!((tc - 209.507e-9).abs() < 0.01e-9, "{tc}");
        assert!((critical_temperature(8e5, &[w, w, w]) / tc - 2.0).abs() < 1e-12);
        let paper = PhysicalParams::rb87_clock();
        let tc = critical_temperature(55_000.0, &paper.trap_freqs);
        assert!((tc / 83e-9 - 1.0).abs() < 0.02, "{tc}");
    }

    #[test]
    fn ideal_ground_state_is_oscillator_gaussian() {
        let params = ideal(&PhysicalParams::rb87_clock());
        let l = params.oscillator_length(0);
        let grid = make_grid(&[256], &[24.0 * l]).unwrap();
        let gs = gpe_ground_state(&grid, &params, 1000.0, None).unwrap();
        let exact: Vec<f64> = grid
            .coords(0)
            .iter()
            .map(|x| (-x * x / (2.0 * l * l)).exp() / (PI.sqrt() * l).sqrt())
            .collect();
        let dv = grid.cell_volume();
        let overlap: f64 = gs.field.iter().zip(&exact).map(|(z, e)| z.re * e).sum::<f64>() * dv / 1000f64.sqrt();
        assert!(overlap > 0.9999, "{overlap}");
        let want = 0.5 * HBAR * params.trap_freqs[0];
        assert!((gs.mu / want - 1.0).abs() < 1e-4, "{} vs {want}", gs.mu);
    }

    #[test]
    fn strong_coupling_approaches_thomas_fermi() {
        let params = PhysicalParams::rb87_clock();
        let l = params.oscillator_length(0);
        let grid = make_grid(&[512], &[160.0 * l]).unwrap();
        let n = 2e5;
        let gs = gpe_ground_state(&grid, &params, n, None).unwrap();
        let g = params.couplings(1).g[0][0];
        let v = trap_potential(&grid, &params);
        let mu_tf = thomas_fermi_mu(&v, g, n, grid.cell_volume());
        let peak = gs.field.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max);
        let mut checked = 0;
        for (z, vi) in gs.field.iter().zip(&v) {
            let tf = ((mu_tf - vi) / g).max(0.0);
            if tf > 0.2 * peak {
                assert!((z.norm_sqr() / tf - 1.0).abs() < 0.02, "{} vs {tf}", z.norm_sqr());
                checked += 1;
            }
        }
        assert!(checked > 50);
    }

    #[test]
    fn zero_condensate_is_rejected() {
        let params = PhysicalParams::rb87_clock();
        let grid = make_grid(&[64], &[1e-4]).unwrap();
        assert!(matches!(
            gpe_ground_state(&grid, &params, 0.0, None),
            Err(Error::Config { .. })
        ));
        assert!(matches!(
            shf_self_consistent(&grid, &params, 1e4, -1.0),
            Err(Error::Config { .. })
        ));
    }

    #[test]
    fn ideal_gas_fraction_follows_cubic_law() {
        let params = ideal(&PhysicalParams::rb87_clock());
        let l = params.oscillator_length(0);
        let n = 1e5;
        let tc = critical_temperature(n, &params.trap_freqs);
        let grid = make_grid(&[512], &[200.0 * l]).unwrap();
        let spec = shf_self_consistent(&grid, &params, n, 0.5 * tc).unwrap();
        let f = spec.condensate_fraction();
        assert!((f / 0.875 - 1.0).abs() < 0.05, "{f}");
    }

    #[test]
    fn budget_and_positivity_hold_with_interactions() {
        let params = PhysicalParams::rb87_clock();
        let l = params.oscillator_length(0);
        let n = 1e4;
        let tc = critical_temperature(n, &params.trap_freqs);
        let grid = make_grid(&[256], &[80.0 * l]).unwrap();
        let mut fractions = Vec::new();
        for t in [0.2, 0.35, 0.5, 0.65, 0.8] {
            let spec = shf_self_consistent(&grid, &params, n, t * tc).unwrap();
            assert!(spec.thermal_density.iter().all(|x| *x >= 0.0));
            let dv = grid.cell_volume();
            let nc: f64 = spec.condensate.iter().map(|z| z.norm_sqr()).sum::<f64>() * dv;
            let nt: f64 = spec.thermal_density.iter().sum::<f64>() * dv;
            assert!((nc / spec.n_condensate - 1.0).abs() < 1e-3);
            assert!((nt / spec.n_thermal - 1.0).abs() < 1e-3);
            assert!(((nc + nt) / n - 1.0).abs() < 1e-3);
            fractions.push(spec.condensate_fraction());
        }
        assert!(fractions.windows(2).all(|w| w[1] <= w[0]), "{fractions:?}");
    }

    #[test]
    fn cold_limit_has_negligible_cloud() {
        let params = PhysicalParams::rb87_clock();
        let l = params.oscillator_length(0);
        let grid = make_grid(&[256], &[80.0 * l]).unwrap();
        let tc = critical_temperature(1e4, &params.trap_freqs);
        let spec = shf_self_consistent(&grid, &params, 1e4, 0.01 * tc).unwrap();
        assert!(spec.n_thermal / spec.n_total < 1e-3, "{}", spec.n_thermal);
    }

    #[test]
    fn hot_gas_has_no_condensate() {
        let params = PhysicalParams::rb87_clock();
        let l = params.oscillator_length(0);
        let grid = make_grid(&[256], &[200.0 * l]).unwrap();
        let tc = critical_temperature(1e4, &params.trap_freqs);
        let spec = shf_self_consistent(&grid, &params, 1e4, 1.5 * tc).unwrap();
        assert!(!spec.condensed);
        assert_eq!(spec.n_condensate, 0.0);
        assert!((spec.n_thermal / 1e4 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn thermal_modes_recover_most_of_the_cloud() {
        let params = PhysicalParams::rb87_clock();
        let l = params.oscillator_length(0);
        let grid = make_grid(&[256], &[60.0 * l]).unwrap();
        let tc = critical_temperature(1e4, &params.trap_freqs);
        let spec = shf_self_consistent(&grid, &params, 1e4, 0.45 * tc).unwrap();
        let modes = ThermalModes::compute(&spec, &grid, &params, &ModeOptions::default()).unwrap();
        assert!(modes.full_grid);
        assert_eq!(modes.vectors.len(), 255);
        assert!(modes.occupations.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9)));
        assert!(
            (modes.captured_fraction - 1.0).abs() < 1e-6,
            "{}",
            modes.captured_fraction
        );
        assert!(modes.semiclassical_ratio > 1.0 && modes.semiclassical_ratio < 1.5);
        let dv = grid.cell_volume();
        for u in modes.vectors.iter().take(5) {
            let overlap: f64 = u.iter().zip(&spec.condensate).map(|(x, z)| x * z.re).sum::<f64>() * dv;
            assert!(overlap.abs() < 1e-8 * spec.n_condensate.sqrt());
        }
    }
}
