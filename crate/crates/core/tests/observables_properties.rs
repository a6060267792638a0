use num_complex::Complex64;
use proptest::prelude::*;
use ramsey_core::grid::{make_grid, LossRates, PhysicalParams};
use ramsey_core::observables::*;
use ramsey_core::thermal::{gpe_ground_state, ThermalEnsembleSpec, ThermalModes};
use ramsey_core::twa::{run_ramsey_with, sample_initial, InitialMode, SequenceSchedule};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::PI;

fn vacuum(rng: &mut ChaCha8Rng) -> Complex64 {
    let a: f64 = StandardNormal.sample(rng);
    let b: f64 = StandardNormal.sample(rng);
    Complex64::new(a, b) * 0.5
}

/// Moments of a split condensate of `n` atoms with a random global phase,
/// on a `k`-mode basis that spans the whole (k-point) grid.
fn split_snapshot(n_traj: usize, n: f64, k: usize, seed: u64) -> ProjectedSnapshot {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let trajectories = (0..n_traj as u64)
        .map(|s| {
            let phase = 2.0 * PI * rng.random::<f64>();
            let amp = Complex64::from_polar((n / 2.0).sqrt(), phase);
            let coeffs: [Vec<Complex64>; 2] = std::array::from_fn(|_| {
                (0..k)
                    .map(|i| vacuum(&mut rng) + if i == 0 { amp } else { Complex64::default() })
                    .collect()
            });
            let norms = coeffs.each_ref().map(|c| c.iter().map(|z| z.norm_sqr()).sum());
            let overlap = coeffs[0].iter().zip(&coeffs[1]).map(|(a, b)| a.conj() * b).sum();
            TrajectoryMoments {
                seed: s,
                norms,
                overlap,
                coeffs,
            }
        })
        .collect();
    ProjectedSnapshot {
        time: 0.0,
        modes: k,
        flagged: 0,
        trajectories,
    }
}

#[test]
fn jackknife_error_scales_as_inverse_root_n() {
    let phis: Vec<f64> = (0..8).map(|i| PI * i as f64 / 4.0).collect();
    let mut rows = Vec::new();
    for (i, n_traj) in [100usize, 1000, 10_000].into_iter().enumerate() {
        let snap = split_snapshot(n_traj, 400.0, 4, 11 + i as u64);
        let modes = CondensateModes::extract(&snap).unwrap();
        let cm = condensate_cross_moment(&snap, &modes);
        let fit = fringe_scan(&snap, &modes, &phis, PI / 2.0).unwrap();
        rows.push(((n_traj as f64).log10(), cm.stderr.log10(), fit.amplitude_stderr.log10()));
    }
    let slope = |f: fn(&(f64, f64, f64)) -> f64| {
        let xm = rows.iter().map(|r| r.0).sum::<f64>() / 3.0;
        let ym = rows.iter().map(f).sum::<f64>() / 3.0;
        let num: f64 = rows.iter().map(|r| (r.0 - xm) * (f(r) - ym)).sum();
        let den: f64 = rows.iter().map(|r| (r.0 - xm).powi(2)).sum();
        num / den
    };
    let s_cm = slope(|r| r.1);
    let s_fit = slope(|r| r.2);
    assert!((s_cm + 0.5).abs() < 0.1, "moment slope {s_cm}");
    assert!((s_fit + 0.5).abs() < 0.1, "fringe slope {s_fit}");
}

#[test]
fn eigenvalue_sum_matches_population_for_complete_basis() {
    let snap = split_snapshot(2000, 400.0, 4, 3);
    let p = populations(&snap).unwrap();
    let o = obdm(&snap, 0).unwrap();
    let sum: f64 = o.eigenvalues.iter().sum();
    assert!((sum - p.n1).abs() < 5.0 * p.n1_stderr.max(1e-9), "{sum} vs {}", p.n1);
    assert!((o.captured_fraction - 1.0).abs() < 1e-9);
    assert!(o.leading_eigenvalue <= p.n1 + 5.0 * p.n1_stderr);
}

#[test]
fn zero_temperature_run_splits_and_conserves_atoms() {
    let mut params = PhysicalParams::rb87_clock();
    params.losses = LossRates::default();
    let l = params.oscillator_length(0);
    let grid = make_grid(&[64], &[24.0 * l]).unwrap();
    let n = 2000.0;
    let gs = gpe_ground_state(&grid, &params, n, None).unwrap();
    let spec = ThermalEnsembleSpec {
        condensate: gs.field,
        thermal_density: vec![0.0; grid.size()],
        mu: gs.mu,
        mu_thermal: 0.0,
        temperature: 1e-12,
        critical_temperature: 1.0,
        n_total: n,
        n_condensate: n,
        n_thermal: 0.0,
        condensed: true,
        iterations: 0,
    };
    let modes = ThermalModes {
        energies: vec![],
        occupations: vec![],
        vectors: vec![],
        captured_fraction: 1.0,
        semiclassical_ratio: 1.0,
        mu_shift: 0.0,
        full_grid: true,
    };
    let ens = sample_initial(&spec, &modes, &grid, 300, 21, InitialMode::Coherent, None).unwrap();
    let basis = ModeBasis::harmonic(&grid, &params, 12).unwrap();
    let schedule = SequenceSchedule::ramsey(vec![0.0, 0.01, 0.02], vec![]);
    let (snaps, _) = run_ramsey_with(ens, &schedule, &params, 2e-5, None, |e| {
        Ok(ProjectedSnapshot::project(e, &basis))
    })
    .unwrap();
    let phis: Vec<f64> = (0..8).map(|i| PI * i as f64 / 4.0).collect();
    let first = populations(&snaps[0]).unwrap();
    assert!((first.n1 - n / 2.0).abs() < 5.0 * first.n1_stderr);
    assert!((first.n2 - n / 2.0).abs() < 5.0 * first.n2_stderr);
    let modes0 = CondensateModes::extract(&snaps[0]).unwrap();
    let fit = fringe_scan(&snaps[0], &modes0, &phis, PI / 2.0).unwrap();
    assert!(fit.amplitude > 0.95, "{fit:?}");
    for s in &snaps {
        let p = populations(s).unwrap();
        // Lossless evolution conserves every trajectory's norm.
        assert!(
            (p.total() - first.total()).abs() < 1e-6 * n,
            "{} vs {}",
            p.total(),
            first.total()
        );
        let modes = CondensateModes::extract(s).unwrap();
        let point = visibility_point(s, &modes).unwrap();
        let fit = fringe_scan(s, &modes, &phis, PI / 2.0).unwrap();
        let combined = (fit.amplitude_stderr.powi(2) + point.visibility_stderr.powi(2)).sqrt();
        assert!(
            (fit.amplitude - point.visibility).abs() < 3.0 * combined.max(1e-9),
            "{} vs {}",
            fit.amplitude,
            point.visibility
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn depth_bound_never_exceeds_population(
        seed in any::<u64>(),
        n_traj in 20usize..200,
        amps in prop::collection::vec((0.0f64..30.0, 0.0f64..30.0, 0.0f64..6.3), 1..4),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = 4;
        let trajectories = (0..n_traj as u64).map(|s| {
            let global = 2.0 * PI * rng.random::<f64>();
            let mut coeffs: [Vec<Complex64>; 2] =
                std::array::from_fn(|_| (0..k).map(|_| vacuum(&mut rng)).collect());
            for (i, (a, b, rel)) in amps.iter().enumerate() {
                coeffs[0][i] += Complex64::from_polar(*a, global);
                coeffs[1][i] += Complex64::from_polar(*b, global + rel);
            }
            let norms = coeffs.each_ref().map(|c| c.iter().map(|z| z.norm_sqr()).sum());
            let overlap = coeffs[0].iter().zip(&coeffs[1]).map(|(a, b)| a.conj() * b).sum();
            TrajectoryMoments { seed: s, norms, overlap, coeffs }
        }).collect();
        let snap = ProjectedSnapshot { time: 0.0, modes: k, flagged: 0, trajectories };
        if let Ok(modes) = CondensateModes::extract(&snap) {
            let point = visibility_point(&snap, &modes).unwrap();
            prop_assert!(point.visibility >= 0.0 || point.n_plus <= 0.0);
            let report = steering_certificate(&point, 5.0);
            let sigma = (point.populations.n1_stderr.powi(2) + point.populations.n2_stderr.powi(2)
                + 4.0 * point.cross_moment_stderr.powi(2)).sqrt();
            prop_assert!(report.depth_bound <= point.n_plus + 3.0 * sigma,
                "{} > {} + 3·{}", report.depth_bound, point.n_plus, sigma);
        }
    }
}
