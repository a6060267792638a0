//! Populations, condensate modes, the two-mode moment ⟨a†b⟩, fringes and the
//! steering certificate, estimated from trajectory ensembles.
//!
//! Snapshots are first reduced to per-trajectory moments: raw norms, the
//! full-field overlap `∫ψ₁*ψ₂`, and coefficients on a reduced orthonormal
//! basis. Everything downstream works on those moments, so the same analysis
//! applies to stored fields and to stored moments.

use crate::basis::HoBasis;
use crate::error::{Error, Result};
use crate::grid::{Grid, PhysicalParams};
use crate::reduce::{jackknife, mean, pairwise_sum, Estimate};
use crate::twa::{Pulse, TrajectoryEnsemble};
use crate::two_mode::{steering_depth_with, SteeringReport};
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;

/// Real orthonormal mode functions, `Σ u_a u_b dV = δ_ab`.
#[derive(Debug, Clone)]
pub struct ModeBasis {
    pub vectors: Vec<Vec<f64>>,
    pub cell_volume: f64,
}

impl ModeBasis {
    /// Lowest `size` oscillator modes of the bare trap.
    pub fn harmonic(grid: &Grid, params: &PhysicalParams, size: usize) -> Result<Self> {
        let ho = HoBasis::lowest(grid, params, size)?;
        Ok(Self {
            vectors: ho.vectors,
            cell_volume: grid.cell_volume(),
        })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn project(&self, field: &[Complex64]) -> Vec<Complex64> {
        self.vectors
            .iter()
            .map(|u| u.iter().zip(field).map(|(x, z)| z * x).sum::<Complex64>() * self.cell_volume)
            .collect()
    }

    /// Field `Σ_k c_k u_k`.
    pub fn synthesize(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        let m = self.vectors.first().map_or(0, Vec::len);
        let mut out = vec![Complex64::default(); m];
        for (c, u) in coeffs.iter().zip(&self.vectors) {
            out.iter_mut().zip(u).for_each(|(o, x)| *o += c * x);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryMoments {
    pub seed: u64,
    /// `∫|ψ_j|² dV`, without ordering correction.
    pub norms: [f64; 2],
    /// `∫ψ₁*ψ₂ dV`.
    pub overlap: Complex64,
    pub coeffs: [Vec<Complex64>; 2],
}

/// Per-trajectory moments of one observation time. Flagged trajectories are
/// dropped and only counted.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedSnapshot {
    pub time: f64,
    /// Number of grid modes `M`.
    pub modes: usize,
    pub flagged: usize,
    pub trajectories: Vec<TrajectoryMoments>,
}

impl ProjectedSnapshot {
    pub fn project(ensemble: &TrajectoryEnsemble, basis: &ModeBasis) -> Self {
        let dv = ensemble.grid().cell_volume();
        let trajectories = ensemble
            .active()
            .map(|t| TrajectoryMoments {
                seed: t.seed,
                norms: t.norms(dv),
                overlap: t.psi[0]
                    .iter()
                    .zip(&t.psi[1])
                    .map(|(a, b)| a.conj() * b)
                    .sum::<Complex64>()
                    * dv,
                coeffs: [basis.project(&t.psi[0]), basis.project(&t.psi[1])],
            })
            .collect();
        Self {
            time: ensemble.time,
            modes: ensemble.grid().size(),
            flagged: ensemble.flagged(),
            trajectories,
        }
    }

    pub fn n_traj(&self) -> usize {
        self.trajectories.len()
    }

    pub fn basis_size(&self) -> usize {
        self.trajectories.first().map_or(0, |t| t.coeffs[0].len())
    }

    fn column<F: Fn(&TrajectoryMoments) -> Complex64>(&self, f: F) -> Vec<Complex64> {
        self.trajectories.iter().map(f).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Populations {
    pub n1: f64,
    pub n1_stderr: f64,
    pub n2: f64,
    pub n2_stderr: f64,
}

impl Populations {
    pub fn total(&self) -> f64 {
        self.n1 + self.n2
    }
}

/// Mean `∫|ψ_j|² dV − M/2` per component.
pub fn populations(snap: &ProjectedSnapshot) -> Result<Populations> {
    if snap.n_traj() < 2 {
        return Err(Error::config("sampling.n_traj", "need at least 2 trajectories"));
    }
    let half = snap.modes as f64 / 2.0;
    let est = |j: usize| {
        let v: Vec<f64> = snap.trajectories.iter().map(|t| t.norms[j] - half).collect();
        (mean(&v), crate::reduce::stderr(&v))
    };
    let (n1, n1_stderr) = est(0);
    let (n2, n2_stderr) = est(1);
    Ok(Populations {
        n1,
        n1_stderr,
        n2,
        n2_stderr,
    })
}

#[derive(Debug, Clone)]
pub struct ObdmSummary {
    pub component: usize,
    /// `G_kl = ⟨c_k* c_l⟩ − δ_kl/2` on the reduced basis.
    pub matrix: DMatrix<Complex64>,
    /// Descending.
    pub eigenvalues: Vec<f64>,
    pub leading_eigenvalue: f64,
    /// Basis coefficients `x` of the condensate orbital `χ = Σ x_k u_k`.
    pub leading_mode: Vec<Complex64>,
    /// Trace of `G` over the component population.
    pub captured_fraction: f64,
    /// Leading and next eigenvalues within five combined sampling errors.
    /// Also true for an empty (vacuum) component.
    pub degenerate: bool,
}

impl ObdmSummary {
    pub fn gap(&self) -> f64 {
        self.eigenvalues[0] - self.eigenvalues.get(1).copied().unwrap_or(0.0)
    }

    /// Condensate amplitude `⟨χ|ψ⟩` from a trajectory's basis coefficients.
    pub fn amplitude(&self, coeffs: &[Complex64]) -> Complex64 {
        self.leading_mode.iter().zip(coeffs).map(|(x, c)| x.conj() * c).sum()
    }

    pub fn leading_field(&self, basis: &ModeBasis) -> Vec<Complex64> {
        basis.synthesize(&self.leading_mode)
    }
}

/// Penrose–Onsager decomposition of one component on the reduced basis.
pub fn obdm(snap: &ProjectedSnapshot, component: usize) -> Result<ObdmSummary> {
    let k = snap.basis_size();
    let n = snap.n_traj();
    if component > 1 || k == 0 || n < 2 {
        return Err(Error::config("analysis.basis_size", "empty basis or ensemble"));
    }
    if n < k {
        log::warn!("{n} trajectories for a {k}-mode density matrix: poorly conditioned");
    }
    let mut g = DMatrix::<Complex64>::zeros(k, k);
    let mut col = vec![Complex64::default(); n];
    for a in 0..k {
        for b in a..k {
            for (c, t) in col.iter_mut().zip(&snap.trajectories) {
                *c = t.coeffs[component][a].conj() * t.coeffs[component][b];
            }
            let mut v = pairwise_sum(&col) / n as f64;
            if a == b {
                v -= 0.5;
            }
            g[(a, b)] = v;
            g[(b, a)] = v.conj();
        }
    }
    let scale = g.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    let asym = (&g - g.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if asym > 1e-10 * scale {
        return Err(Error::Numerical {
            stage: "obdm",
            reason: format!("density matrix not Hermitian ({asym:e})"),
        });
    }
    let eig = SymmetricEigen::new(g.clone());
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let w = eig.eigenvectors.column(order[0]);
    // G w = λ w for G ∝ x* xᵀ gives w ∝ x*, so the orbital is conj(w).
    let leading_mode: Vec<Complex64> = w.iter().map(|z| z.conj()).collect();
    let half = snap.modes as f64 / 2.0;
    let population = mean(
        &snap
            .trajectories
            .iter()
            .map(|t| t.norms[component] - half)
            .collect::<Vec<_>>(),
    );
    let trace: f64 = (0..k).map(|i| g[(i, i)].re).sum();
    let leading = eigenvalues[0];
    let next = eigenvalues.get(1).copied().unwrap_or(0.0);
    // Sampling error of each eigenvalue from the spread of the per-trajectory
    // occupations |Σ w_k c_k|² of its eigenvector.
    let occupation_error = |i: usize| -> f64 {
        let Some(&col) = order.get(i) else { return 0.0 };
        let w = eig.eigenvectors.column(col);
        let occ: Vec<f64> = snap
            .trajectories
            .iter()
            .map(|t| {
                w.iter()
                    .zip(&t.coeffs[component])
                    .map(|(a, c)| a * c)
                    .sum::<Complex64>()
                    .norm_sqr()
            })
            .collect();
        crate::reduce::stderr(&occ)
    };
    let degenerate = leading - next < 5.0 * occupation_error(0).hypot(occupation_error(1));
    Ok(ObdmSummary {
        component,
        matrix: g,
        eigenvalues,
        leading_eigenvalue: leading,
        leading_mode,
        captured_fraction: if population > 0.0 { trace / population } else { f64::NAN },
        degenerate,
    })
}

/// Condensate orbitals of both components in a fixed gauge.
///
/// Orbital 1 is real and positive at the basis point where it is largest
/// in magnitude; orbital 2 is phased so that `⟨χ₁|χ₂⟩` is real and
/// positive. A component without a resolved condensate (vacuum, or a flat
/// spectrum) borrows the other component's orbital. The gauge moves only the
/// phase of ⟨a†b⟩.
#[derive(Debug, Clone)]
pub struct CondensateModes {
    pub obdm: [ObdmSummary; 2],
    pub orbitals: [Vec<Complex64>; 2],
    /// Which component's orbital each component is projected on.
    pub source: [usize; 2],
}

impl CondensateModes {
    pub fn extract(snap: &ProjectedSnapshot) -> Result<Self> {
        let obdm = [obdm(snap, 0)?, obdm(snap, 1)?];
        let source = match (obdm[0].degenerate, obdm[1].degenerate) {
            (false, false) => [0, 1],
            (false, true) => [0, 0],
            (true, false) => [1, 1],
            (true, true) => {
                let worst = if obdm[0].gap() < obdm[1].gap() {
                    &obdm[0]
                } else {
                    &obdm[1]
                };
                return Err(Error::AmbiguousMode {
                    gap: worst.gap(),
                    leading: worst.leading_eigenvalue,
                });
            }
        };
        let mut first = obdm[source[0]].leading_mode.clone();
        let peak = first
            .iter()
            .copied()
            .max_by(|a, b| a.norm().total_cmp(&b.norm()))
            .unwrap_or_default();
        if peak.norm() > 0.0 {
            let rot = peak.conj() / peak.norm();
            first.iter_mut().for_each(|z| *z *= rot);
        }
        let mut second = obdm[source[1]].leading_mode.clone();
        if source[1] == source[0] {
            second = first.clone();
        } else {
            let o: Complex64 = first.iter().zip(&second).map(|(a, b)| a.conj() * b).sum();
            if o.norm() > 0.0 {
                let rot = o.conj() / o.norm();
                second.iter_mut().for_each(|z| *z *= rot);
            }
        }
        Ok(Self {
            obdm,
            orbitals: [first, second],
            source,
        })
    }

    fn amplitudes(&self, t: &TrajectoryMoments) -> (Complex64, Complex64) {
        let amp = |j: usize| {
            self.orbitals[j]
                .iter()
                .zip(&t.coeffs[j])
                .map(|(x, c)| x.conj() * c)
                .sum()
        };
        (amp(0), amp(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossMoment {
    pub value: Complex64,
    /// Jackknife standard error of `|value|`.
    pub stderr: f64,
}

/// `⟨α_a* α_b⟩` with `α_j` the projection onto component `j`'s condensate
/// orbital. Distinct modes need no ordering correction.
pub fn condensate_cross_moment(snap: &ProjectedSnapshot, modes: &CondensateModes) -> CrossMoment {
    let z: Vec<Complex64> = snap
        .trajectories
        .iter()
        .map(|t| {
            let (a, b) = modes.amplitudes(t);
            a.conj() * b
        })
        .collect();
    let est = jackknife(&[&z], |m| m[0].norm());
    CrossMoment {
        value: pairwise_sum(&z) / z.len() as f64,
        stderr: est.stderr,
    }
}

/// Full-field `∫⟨ψ₁*ψ₂⟩ dV`.
pub fn raw_cross_moment(snap: &ProjectedSnapshot) -> CrossMoment {
    let z = snap.column(|t| t.overlap);
    let est = jackknife(&[&z], |m| m[0].norm());
    CrossMoment {
        value: pairwise_sum(&z) / z.len() as f64,
        stderr: est.stderr,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FringeFit {
    /// Fitted `A` of `P_z(φ) = A cos(φ + δ)`, with jackknife error.
    pub amplitude: f64,
    pub amplitude_stderr: f64,
    pub phase_offset: f64,
    /// `(φ, P_z)` per scanned phase.
    pub points: Vec<(f64, f64)>,
    /// All phases coincide, so no fringe can be fitted.
    pub flat: bool,
}

fn fit_fringe(phis: &[f64], pz: &[f64]) -> Option<(f64, f64)> {
    let (mut scc, mut sss, mut scs, mut syc, mut sys) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (phi, y) in phis.iter().zip(pz) {
        let (s, c) = phi.sin_cos();
        scc += c * c;
        sss += s * s;
        scs += c * s;
        syc += y * c;
        sys += y * s;
    }
    let det = scc * sss - scs * scs;
    if det.abs() <= 1e-12 * (scc * sss).max(1e-300) {
        return None;
    }
    let p = (syc * sss - sys * scs) / det;
    let q = (sys * scc - syc * scs) / det;
    // p cos φ + q sin φ = A cos(φ + δ)
    Some((p.hypot(q), (-q).atan2(p)))
}

/// Per-trajectory `N_d − N_c` after pulse 2 at each phase, plus the raw
/// norms used for `N₊`.
fn fringe_columns<F>(snap: &ProjectedSnapshot, phis: &[f64], theta: f64, pair: F) -> Vec<Vec<Complex64>>
where
    F: Fn(&TrajectoryMoments, &Pulse) -> f64,
{
    let mut columns: Vec<Vec<Complex64>> = phis
        .iter()
        .map(|&phase| {
            let pulse = Pulse { theta, phase };
            snap.column(|t| Complex64::new(pair(t, &pulse), 0.0))
        })
        .collect();
    columns.push(snap.column(|t| Complex64::new(t.norms[0] + t.norms[1], 0.0)));
    columns
}

fn fringe_from_columns(phis: &[f64], columns: Vec<Vec<Complex64>>, modes: usize) -> Result<FringeFit> {
    let np = phis.len();
    let statistic = |m: &[Complex64]| -> f64 {
        let n_plus = m[np].re - modes as f64;
        let pz: Vec<f64> = m[..np].iter().map(|d| d.re / n_plus).collect();
        fit_fringe(phis, &pz).map_or(0.0, |f| f.0)
    };
    let refs: Vec<&[Complex64]> = columns.iter().map(Vec::as_slice).collect();
    let est: Estimate = jackknife(&refs, statistic);
    let means: Vec<f64> = columns.iter().map(|c| (pairwise_sum(c) / c.len() as f64).re).collect();
    let n_plus = means[np] - modes as f64;
    let points: Vec<(f64, f64)> = phis.iter().zip(&means).map(|(p, d)| (*p, d / n_plus)).collect();
    let pz: Vec<f64> = points.iter().map(|p| p.1).collect();
    Ok(match fit_fringe(phis, &pz) {
        Some((a, d)) => FringeFit {
            amplitude: a,
            amplitude_stderr: est.stderr,
            phase_offset: d,
            points,
            flat: false,
        },
        None => FringeFit {
            amplitude: 0.0,
            amplitude_stderr: 0.0,
            phase_offset: 0.0,
            points,
            flat: true,
        },
    })
}

fn check_phases(phis: &[f64]) -> Result<()> {
    if phis.len() < 4 {
        return Err(Error::config(
            "sequence.phases_deg",
            format!("{} phases, need at least 4", phis.len()),
        ));
    }
    Ok(())
}

/// Pulse 2 applied to copies of each trajectory's condensate amplitudes;
/// `P_z(φ) = ⟨N_d − N_c⟩/N₊` with `N₊` the full-field population.
pub fn fringe_scan(snap: &ProjectedSnapshot, modes: &CondensateModes, phis: &[f64], theta: f64) -> Result<FringeFit> {
    check_phases(phis)?;
    let columns = fringe_columns(snap, phis, theta, |t, pulse| {
        let (a, b) = modes.amplitudes(t);
        let (c, d) = pulse.apply(a, b);
        d.norm_sqr() - c.norm_sqr()
    });
    fringe_from_columns(phis, columns, snap.modes)
}

/// Pulse 2 applied pointwise to copies of the full fields.
pub fn fringe_scan_full_field(snap: &ProjectedSnapshot, phis: &[f64], theta: f64) -> Result<FringeFit> {
    check_phases(phis)?;
    let columns = fringe_columns(snap, phis, theta, |t, pulse| {
        let u = pulse.matrix();
        let [n1, n2] = t.norms;
        let out = |r: usize| {
            u[r][0].norm_sqr() * n1 + u[r][1].norm_sqr() * n2 + 2.0 * (u[r][0].conj() * u[r][1] * t.overlap).re
        };
        out(1) - out(0)
    });
    fringe_from_columns(phis, columns, snap.modes)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VisibilityPoint {
    pub time: f64,
    pub populations: Populations,
    pub n_plus: f64,
    pub cross_moment: Complex64,
    pub cross_moment_stderr: f64,
    /// `2|⟨a†b⟩|/N₊`.
    pub visibility: f64,
    pub visibility_stderr: f64,
    pub raw_cross_moment: Complex64,
    pub raw_cross_moment_stderr: f64,
    pub leading_eigenvalues: [f64; 2],
    pub captured_fraction: [f64; 2],
    pub borrowed_orbital: bool,
    pub flagged: usize,
}

pub fn visibility_point(snap: &ProjectedSnapshot, modes: &CondensateModes) -> Result<VisibilityPoint> {
    let populations = populations(snap)?;
    let cm = condensate_cross_moment(snap, modes);
    let raw = raw_cross_moment(snap);
    let z: Vec<Complex64> = snap
        .trajectories
        .iter()
        .map(|t| {
            let (a, b) = modes.amplitudes(t);
            a.conj() * b
        })
        .collect();
    let norms = snap.column(|t| Complex64::new(t.norms[0] + t.norms[1], 0.0));
    let m = snap.modes as f64;
    let vis = jackknife(&[&z, &norms], |c| 2.0 * c[0].norm() / (c[1].re - m));
    let n_plus = populations.total();
    Ok(VisibilityPoint {
        time: snap.time,
        populations,
        n_plus,
        cross_moment: cm.value,
        cross_moment_stderr: cm.stderr,
        visibility: 2.0 * cm.value.norm() / n_plus,
        visibility_stderr: vis.stderr,
        raw_cross_moment: raw.value,
        raw_cross_moment_stderr: raw.stderr,
        leading_eigenvalues: [modes.obdm[0].leading_eigenvalue, modes.obdm[1].leading_eigenvalue],
        captured_fraction: [modes.obdm[0].captured_fraction, modes.obdm[1].captured_fraction],
        borrowed_orbital: modes.source != [0, 1],
        flagged: snap.flagged,
    })
}

/// Depth bound `2|⟨a†b⟩| = ν·N₊` and verdict at `k` standard errors.
pub fn steering_certificate(point: &VisibilityPoint, k: f64) -> SteeringReport {
    steering_depth_with(point.cross_moment, point.cross_moment_stderr, k).with_population(point.n_plus)
}
