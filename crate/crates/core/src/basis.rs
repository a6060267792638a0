//! Harmonic-oscillator eigenmodes of the bare trap, sampled on a grid.

use crate::constants::HBAR;
use crate::error::{Error, Result};
use crate::grid::{Grid, PhysicalParams};
use std::f64::consts::PI;

#[derive(Debug, Clone)]
pub struct HoBasis {
    /// Oscillator quantum numbers per grid axis; unused axes are zero.
    pub quantum_numbers: Vec<[usize; 3]>,
    /// Bare-trap energies `Σ ħω_j(n_j + 1/2)` over the grid axes (J).
    pub energies: Vec<f64>,
    /// Real mode functions, orthonormal under `Σ u_a u_b dV`.
    pub vectors: Vec<Vec<f64>>,
}

impl HoBasis {
    /// Lowest `count` modes by energy, Gram–Schmidt-orthonormalized on the
    /// grid so that truncation at the grid edge does not spoil orthogonality.
    pub fn lowest(grid: &Grid, params: &PhysicalParams, count: usize) -> Result<Self> {
        if count == 0 || count > grid.size() {
            return Err(Error::config(
                "analysis.basis_size",
                format!("{count} modes requested on a {}-point grid", grid.size()),
            ));
        }
        let dims = grid.dims();
        let omega = &params.trap_freqs[..dims];
        let quantum_numbers = lowest_quantum_numbers(omega, count);
        let max_n: Vec<usize> = (0..dims)
            .map(|a| quantum_numbers.iter().map(|q| q[a]).max().unwrap_or(0))
            .collect();
        let tables: Vec<Vec<Vec<f64>>> = (0..dims)
            .map(|a| hermite_functions(grid.coords(a), params.oscillator_length(a), max_n[a]))
            .collect();
        let dv = grid.cell_volume();
        let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(count);
        for q in &quantum_numbers {
            let mut v: Vec<f64> = (0..grid.size())
                .map(|i| {
                    let idx = grid.unravel(i);
                    (0..dims).map(|a| tables[a][q[a]][idx[a]]).product()
                })
                .collect();
            // Two passes of modified Gram–Schmidt.
            for _ in 0..2 {
                for u in &vectors {
                    let overlap: f64 = u.iter().zip(&v).map(|(x, y)| x * y).sum::<f64>() * dv;
                    v.iter_mut().zip(u).for_each(|(y, x)| *y -= overlap * x);
                }
            }
            let norm = (v.iter().map(|x| x * x).sum::<f64>() * dv).sqrt();
            if !(norm > 1e-6) {
                return Err(Error::Numerical {
                    stage: "basis",
                    reason: format!("oscillator mode {q:?} is not resolved by the grid"),
                });
            }
            v.iter_mut().for_each(|x| *x /= norm);
            vectors.push(v);
        }
        let energies = quantum_numbers
            .iter()
            .map(|q| (0..dims).map(|a| HBAR * omega[a] * (q[a] as f64 + 0.5)).sum())
            .collect();
        Ok(Self {
            quantum_numbers,
            energies,
            vectors,
        })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

fn lowest_quantum_numbers(omega: &[f64], count: usize) -> Vec<[usize; 3]> {
    let w_min = omega.iter().copied().fold(f64::INFINITY, f64::min);
    let mut cut = w_min * count as f64;
    loop {
        let mut found = Vec::new();
        let lim = |a: usize| {
            if a < omega.len() {
                (cut / omega[a]).floor() as usize
            } else {
                0
            }
        };
        for nx in 0..=lim(0) {
            for ny in 0..=lim(1) {
                for nz in 0..=lim(2) {
                    let q = [nx, ny, nz];
                    let e: f64 = omega.iter().zip(q).map(|(w, n)| w * n as f64).sum();
                    if e <= cut {
                        found.push((e, q));
                    }
                }
            }
        }
        if found.len() >= count {
            found.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            return found.into_iter().take(count).map(|(_, q)| q).collect();
        }
        cut *= 2.0;
    }
}

/// Normalized Hermite functions `h_0 .. h_max` of length scale `l`.
fn hermite_functions(x: &[f64], l: f64, max: usize) -> Vec<Vec<f64>> {
    let xi: Vec<f64> = x.iter().map(|x| x / l).collect();
    let h0: Vec<f64> = xi
        .iter()
        .map(|s| (-s * s / 2.0).exp() / (PI.sqrt() * l).sqrt())
        .collect();
    let mut out = vec![h0];
    for n in 0..max {
        let prev = &out[n];
        let next: Vec<f64> = (0..x.len())
            .map(|i| {
                let back = if n > 0 { out[n - 1][i] } else { 0.0 };
                (2.0 / (n as f64 + 1.0)).sqrt() * xi[i] * prev[i] - (n as f64 / (n as f64 + 1.0)).sqrt() * back
            })
            .collect();
        out.push(next);
    }
    out
}
