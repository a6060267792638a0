//! Exact two-mode Fock-space model at fixed total atom number.
//!
//! A pure state of `N` bosons shared between modes `a` and `b` is stored as
//! the amplitude vector over `|n⟩_a |N−n⟩_b`, `n = 0..=N`. This is the
//! reference against which the field-theoretic engine is validated: every
//! quantity here is computed exactly, with no sampling.

use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::Serialize;
use std::collections::BTreeMap;

/// Largest atom number the oracle accepts; memory is linear in `N`.
pub const MAX_ATOMS: usize = 1_000_000;

/// Default significance threshold, in standard errors, for a nonzero ⟨a†b⟩.
pub const DEFAULT_SIGNIFICANCE: f64 = 5.0;

const NORM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct TwoModeState {
    total_n: usize,
    amps: Vec<Complex64>,
}

/// `√((n+1)(N−n))`: the matrix element of `a†b` between `n` and `n+1`.
#[inline]
fn hop(total_n: usize, n: usize) -> f64 {
    (((n + 1) * (total_n - n)) as f64).sqrt()
}

fn log_binomials(total_n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(total_n + 1);
    let mut acc = 0.0;
    out.push(acc);
    for n in 0..total_n {
        acc += ((total_n - n) as f64).ln() - ((n + 1) as f64).ln();
        out.push(acc);
    }
    out
}

impl TwoModeState {
    /// Builds `Σ d_n √binom(N,n) |n⟩|N−n⟩`, normalized.
    pub fn new(total_n: usize, d: &[Complex64]) -> Result<Self> {
        if total_n > MAX_ATOMS {
            return Err(Error::InvalidState(format!(
                "N = {total_n} exceeds the oracle cap of {MAX_ATOMS}"
            )));
        }
        if d.len() != total_n + 1 {
            return Err(Error::InvalidState(format!(
                "expected {} coefficients, got {}",
                total_n + 1,
                d.len()
            )));
        }
        if d.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidState("non-finite coefficient".into()));
        }
        // Work in log space: binom(N, n) overflows f64 long before N = 10⁶.
        let half_log_binom: Vec<f64> = log_binomials(total_n).iter().map(|l| 0.5 * l).collect();
        let shift = d
            .iter()
            .zip(&half_log_binom)
            .filter(|(c, _)| c.norm() > 0.0)
            .map(|(c, l)| c.norm().ln() + l)
            .fold(f64::NEG_INFINITY, f64::max);
        if shift == f64::NEG_INFINITY {
            return Err(Error::InvalidState("all coefficients are zero".into()));
        }
        let amps = d
            .iter()
            .zip(&half_log_binom)
            .map(|(c, l)| {
                if c.norm() > 0.0 {
                    c * (l - shift).exp()
                } else {
                    Complex64::default()
                }
            })
            .collect();
        Self::from_amplitudes(amps)
    }

    /// Wraps raw amplitudes, renormalizing them.
    pub fn from_amplitudes(mut amps: Vec<Complex64>) -> Result<Self> {
        if amps.is_empty() {
            return Err(Error::InvalidState("empty amplitude vector".into()));
        }
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::InvalidState("zero or non-finite norm".into()));
        }
        for a in amps.iter_mut() {
            *a /= norm;
        }
        Ok(Self {
            total_n: amps.len() - 1,
            amps,
        })
    }

    /// The number state `|n_a⟩_a |N−n_a⟩_b`.
    pub fn fock(total_n: usize, n_a: usize) -> Result<Self> {
        if n_a > total_n {
            return Err(Error::InvalidState(format!("n_a = {n_a} > N = {total_n}")));
        }
        let mut amps = vec![Complex64::default(); total_n + 1];
        amps[n_a] = Complex64::new(1.0, 0.0);
        Ok(Self { total_n, amps })
    }

    /// `|N⟩_a|0⟩_b` through a 50/50 beam splitter: all `d_n = 1`.
    pub fn binomial(total_n: usize) -> Result<Self> {
        Ok(Self::fock(total_n, total_n)?.beam_splitter(std::f64::consts::FRAC_PI_2, 0.0))
    }

    pub fn total_n(&self) -> usize {
        self.total_n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Mean occupation of mode `a`.
    pub fn mean_na(&self) -> f64 {
        self.amps.iter().enumerate().map(|(n, a)| n as f64 * a.norm_sqr()).sum()
    }

    /// Applies the mode map
    /// `a → cos(θ/2) a − e^{iφ} sin(θ/2) b`, `b → e^{−iφ} sin(θ/2) a + cos(θ/2) b`
    /// to the state. Coherent amplitudes `(α, β)` transform by the same matrix.
    ///
    /// The unitary is `exp(θ/2 · G)` with the tridiagonal generator
    /// `G = e^{−iφ} b†a − e^{iφ} a†b`; it is applied by Taylor series over
    /// substeps short enough that `‖hG‖ ≤ 1/2`.
    pub fn beam_splitter(&self, theta: f64, phi: f64) -> Self {
        let n_tot = self.total_n;
        let half = 0.5 * theta;
        if n_tot == 0 || half == 0.0 {
            return self.clone();
        }
        let bound = (n_tot + 1) as f64;
        let substeps = ((half.abs() * bound) / 0.5).ceil().max(1.0) as usize;
        let h = half / substeps as f64;
        let down = Complex64::from_polar(h, -phi); // coefficient of b†a
        let up = -Complex64::from_polar(h, phi); // coefficient of a†b
        let hops: Vec<f64> = (0..n_tot).map(|n| hop(n_tot, n)).collect();

        let apply = |src: &[Complex64], dst: &mut [Complex64]| {
            for m in 0..=n_tot {
                let mut acc = Complex64::default();
                if m < n_tot {
                    acc += down * hops[m] * src[m + 1];
                }
                if m > 0 {
                    acc += up * hops[m - 1] * src[m - 1];
                }
                dst[m] = acc;
            }
        };

        let mut state = self.amps.clone();
        let mut term = vec![Complex64::default(); n_tot + 1];
        let mut next = vec![Complex64::default(); n_tot + 1];
        for _ in 0..substeps {
            term.copy_from_slice(&state);
            for k in 1..=20 {
                apply(&term, &mut next);
                let inv = 1.0 / k as f64;
                let mut largest = 0.0f64;
                for (t, nx) in term.iter_mut().zip(&next) {
                    *t = nx * inv;
                    largest = largest.max(t.norm_sqr());
                }
                for (s, t) in state.iter_mut().zip(&term) {
                    *s += t;
                }
                if largest < 1e-40 {
                    break;
                }
            }
        }
        Self {
            total_n: n_tot,
            amps: state,
        }
    }

    /// One-axis twisting: `amps[n] ← amps[n] · exp(−i χ t f(n))` with the
    /// per-mode self-interaction phase `f(n) = n(n−1)/2 + (N−n)(N−n−1)/2`.
    pub fn kerr_evolve(&self, chi: f64, t: f64) -> Self {
        let n_tot = self.total_n as f64;
        let chit = chi * t;
        let amps = self
            .amps
            .iter()
            .enumerate()
            .map(|(n, a)| {
                let n = n as f64;
                let f = 0.5 * n * (n - 1.0) + 0.5 * (n_tot - n) * (n_tot - n - 1.0);
                a * Complex64::from_polar(1.0, -chit * f)
            })
            .collect();
        Self {
            total_n: self.total_n,
            amps,
        }
    }

    /// ⟨a†b⟩.
    pub fn cross_moment(&self) -> Complex64 {
        let n_tot = self.total_n;
        (0..n_tot)
            .map(|n| self.amps[n + 1].conj() * self.amps[n] * hop(n_tot, n))
            .sum()
    }

    /// Normalized output population difference for a second pulse of phase φ.
    pub fn fringe_pz(&self, phi: f64) -> Result<f64> {
        if self.total_n == 0 {
            return Err(Error::UndefinedFringe("fringe_pz"));
        }
        let ab = self.cross_moment();
        Ok(2.0 * (ab.re * phi.cos() - ab.im * phi.sin()) / self.total_n as f64)
    }

    /// Fringe visibility `2|⟨a†b⟩|/N`.
    pub fn visibility(&self) -> Result<f64> {
        if self.total_n == 0 {
            return Err(Error::UndefinedFringe("visibility"));
        }
        Ok(self.fringe_amplitude_atoms() / self.total_n as f64)
    }

    /// Unnormalized fringe amplitude `2|⟨a†b⟩|`, in atoms.
    pub fn fringe_amplitude_atoms(&self) -> f64 {
        2.0 * self.cross_moment().norm()
    }

    /// Von Neumann entropy of mode `a`, in bits.
    pub fn entanglement_entropy(&self) -> f64 {
        -self
            .amps
            .iter()
            .map(|a| a.norm_sqr())
            .filter(|&p| p > 0.0)
            .map(|p| p * p.log2())
            .sum::<f64>()
    }

    /// Wineland squeezing parameter `ξ² = N·min Var(J_⊥) / |⟨J⟩|²`, with
    /// Schwinger operators `J_x = (a†b + b†a)/2`, `J_y = (a†b − b†a)/2i`,
    /// `J_z = (a†a − b†b)/2`.
    ///
    /// States with no transverse mean spin (`⟨a†b⟩ = 0`) are rejected.
    pub fn spin_squeezing(&self) -> Result<f64> {
        let n_tot = self.total_n;
        if n_tot < 2 {
            return Err(Error::InvalidState("spin squeezing needs N ≥ 2".into()));
        }
        let ab = self.cross_moment();
        if ab.norm() <= 1e-12 * n_tot as f64 {
            return Err(Error::DegenerateDirection);
        }
        let spins = self.spin_vectors();
        let mean: [f64; 3] = std::array::from_fn(|i| inner(&self.amps, &spins[i]).re);
        let cov: [[f64; 3]; 3] =
            std::array::from_fn(|i| std::array::from_fn(|j| inner(&spins[i], &spins[j]).re - mean[i] * mean[j]));
        let len = mean.iter().map(|m| m * m).sum::<f64>().sqrt();
        let axis = mean.map(|m| m / len);
        let (e1, e2) = normal_plane(axis);
        let quad = |u: [f64; 3], v: [f64; 3]| {
            (0..3)
                .flat_map(|i| (0..3).map(move |j| (i, j)))
                .map(|(i, j)| u[i] * cov[i][j] * v[j])
                .sum::<f64>()
        };
        let (p, q, r) = (quad(e1, e1), quad(e2, e2), quad(e1, e2));
        let min_var = 0.5 * (p + q) - (0.25 * (p - q) * (p - q) + r * r).sqrt();
        Ok(n_tot as f64 * min_var / (len * len))
    }

    /// `(J_x ψ, J_y ψ, J_z ψ)`.
    fn spin_vectors(&self) -> [Vec<Complex64>; 3] {
        let n_tot = self.total_n;
        let half_n = 0.5 * n_tot as f64;
        let mut jx = vec![Complex64::default(); n_tot + 1];
        let mut jy = vec![Complex64::default(); n_tot + 1];
        let jz: Vec<Complex64> = self
            .amps
            .iter()
            .enumerate()
            .map(|(n, a)| a * (n as f64 - half_n))
            .collect();
        let i = Complex64::i();
        for m in 0..=n_tot {
            // (J_+ψ)_m = hop(m−1) ψ_{m−1}, (J_−ψ)_m = hop(m) ψ_{m+1}.
            let plus = if m > 0 {
                self.amps[m - 1] * hop(n_tot, m - 1)
            } else {
                Complex64::default()
            };
            let minus = if m < n_tot {
                self.amps[m + 1] * hop(n_tot, m)
            } else {
                Complex64::default()
            };
            jx[m] = 0.5 * (plus + minus);
            jy[m] = -0.5 * i * (plus - minus);
        }
        [jx, jy, jz]
    }

    /// Quadrature correlators `⟨X_aX_b⟩, ⟨P_aP_b⟩, ⟨P_aX_b⟩, ⟨X_aP_b⟩` with
    /// `X = c + c†`, `P = (c − c†)/i`, evaluated by applying ladder operators
    /// in the unrestricted two-mode Fock space.
    pub fn quadrature_correlators(&self) -> Quadratures {
        let n_tot = self.total_n;
        let ket: SparseKet = self
            .amps
            .iter()
            .enumerate()
            .filter(|(_, a)| a.norm_sqr() > 0.0)
            .map(|(n, a)| ((n, n_tot - n), *a))
            .collect();
        let corr = |first: Quadrature, second: Quadrature| {
            let applied = apply_quadrature(first, Mode::A, &apply_quadrature(second, Mode::B, &ket));
            sparse_inner(&ket, &applied).re
        };
        Quadratures {
            xx: corr(Quadrature::X, Quadrature::X),
            pp: corr(Quadrature::P, Quadrature::P),
            px: corr(Quadrature::P, Quadrature::X),
            xp: corr(Quadrature::X, Quadrature::P),
        }
    }
}

fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn normal_plane(axis: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    // Pick the coordinate axis least aligned with `axis` as a seed.
    let seed = if axis[0].abs() < 0.9 {
        [1.0, 0.0, 0.0]
    } else {
        [0.0, 1.0, 0.0]
    };
    let dot: f64 = (0..3).map(|i| seed[i] * axis[i]).sum();
    let mut e1: [f64; 3] = std::array::from_fn(|i| seed[i] - dot * axis[i]);
    let len = e1.iter().map(|x| x * x).sum::<f64>().sqrt();
    e1.iter_mut().for_each(|x| *x /= len);
    let e2 = [
        axis[1] * e1[2] - axis[2] * e1[1],
        axis[2] * e1[0] - axis[0] * e1[2],
        axis[0] * e1[1] - axis[1] * e1[0],
    ];
    (e1, e2)
}

type SparseKet = BTreeMap<(usize, usize), Complex64>;

#[derive(Clone, Copy)]
enum Quadrature {
    X,
    P,
}

#[derive(Clone, Copy)]
enum Mode {
    A,
    B,
}

fn apply_quadrature(q: Quadrature, mode: Mode, ket: &SparseKet) -> SparseKet {
    // X = c + c†, P = −i c + i c†.
    let (lower, raise) = match q {
        Quadrature::X => (Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)),
        Quadrature::P => (Complex64::new(0.0, -1.0), Complex64::new(0.0, 1.0)),
    };
    let mut out = SparseKet::new();
    for (&(na, nb), &amp) in ket {
        let n = match mode {
            Mode::A => na,
            Mode::B => nb,
        };
        let shift = |delta: isize| match mode {
            Mode::A => ((na as isize + delta) as usize, nb),
            Mode::B => (na, (nb as isize + delta) as usize),
        };
        if n > 0 {
            *out.entry(shift(-1)).or_default() += lower * amp * (n as f64).sqrt();
        }
        *out.entry(shift(1)).or_default() += raise * amp * ((n + 1) as f64).sqrt();
    }
    out
}

fn sparse_inner(bra: &SparseKet, ket: &SparseKet) -> Complex64 {
    bra.iter().filter_map(|(k, b)| ket.get(k).map(|v| b.conj() * v)).sum()
}

/// The four quadrature correlators of two modes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quadratures {
    pub xx: f64,
    pub pp: f64,
    pub px: f64,
    pub xp: f64,
}

/// `⟨a†b⟩ = (⟨X_aX_b⟩ + ⟨P_aP_b⟩ − i⟨P_aX_b⟩ + i⟨X_aP_b⟩)/4`.
pub fn quadrature_reconstruct(xx: f64, pp: f64, px: f64, xp: f64) -> Complex64 {
    Complex64::new(xx + pp, xp - px) / 4.0
}

/// Statistical mixture `Σ_R P_R |ψ_R⟩⟨ψ_R|`; components may differ in `N`.
#[derive(Debug, Clone)]
pub struct MixedTwoModeState {
    components: Vec<(f64, TwoModeState)>,
}

impl MixedTwoModeState {
    pub fn new(components: Vec<(f64, TwoModeState)>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidState("empty mixture".into()));
        }
        if let Some((p, _)) = components.iter().find(|(p, _)| !(*p > 0.0)) {
            return Err(Error::InvalidState(format!("non-positive weight {p}")));
        }
        let total: f64 = components.iter().map(|(p, _)| p).sum();
        if (total - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidState(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { components })
    }

    pub fn components(&self) -> &[(f64, TwoModeState)] {
        &self.components
    }

    pub fn cross_moment(&self) -> Complex64 {
        self.components.iter().map(|(p, s)| s.cross_moment() * *p).sum()
    }

    /// Mean total atom number `Σ_R P_R n_R`.
    pub fn mean_total(&self) -> f64 {
        self.components.iter().map(|(p, s)| p * s.total_n() as f64).sum()
    }

    pub fn visibility(&self) -> Result<f64> {
        let n = self.mean_total();
        if n == 0.0 {
            return Err(Error::UndefinedFringe("visibility"));
        }
        Ok(2.0 * self.cross_moment().norm() / n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    NotSignificant,
    EntangledAndTwoWaySteerable,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::NotSignificant => "not-significant",
            Verdict::EntangledAndTwoWaySteerable => "entangled-and-two-way-steerable",
        })
    }
}

/// Entanglement and steering certificate derived from ⟨a†b⟩.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SteeringReport {
    pub cross_moment_re: f64,
    pub cross_moment_im: f64,
    pub cross_moment_abs: f64,
    pub cross_moment_stderr: f64,
    /// `2|⟨a†b⟩|/N₊`, when the population is known.
    pub visibility: Option<f64>,
    /// Lower bound on the mode-steering depth, `2|⟨a†b⟩|` atoms.
    pub depth_bound: f64,
    pub significance_k: f64,
    pub verdict: Verdict,
    /// The criterion is symmetric in the modes: when it fires, `a` steers `b`
    /// and `b` steers `a`.
    pub two_way: bool,
}

impl SteeringReport {
    pub fn cross_moment(&self) -> Complex64 {
        Complex64::new(self.cross_moment_re, self.cross_moment_im)
    }

    pub fn with_population(mut self, n_plus: f64) -> Self {
        self.visibility = (n_plus > 0.0).then(|| self.depth_bound / n_plus);
        self
    }
}

/// Certificate at the default five-standard-error threshold.
pub fn steering_depth(cross_moment: Complex64, stderr: f64) -> SteeringReport {
    steering_depth_with(cross_moment, stderr, DEFAULT_SIGNIFICANCE)
}

pub fn steering_depth_with(cross_moment: Complex64, stderr: f64, k: f64) -> SteeringReport {
    let abs = cross_moment.norm();
    let significant = abs > k * stderr;
    SteeringReport {
        cross_moment_re: cross_moment.re,
        cross_moment_im: cross_moment.im,
        cross_moment_abs: abs,
        cross_moment_stderr: stderr,
        visibility: None,
        depth_bound: 2.0 * abs,
        significance_k: k,
        verdict: if significant {
            Verdict::EntangledAndTwoWaySteerable
        } else {
            Verdict::NotSignificant
        },
        two_way: significant,
    }
}
