//! Results tables, plot data and the run manifest.
//!
//! Plot files only select columns of `results.csv` and `fringes.csv`; no
//! number is computed here.

use crate::pipeline::{RunError, RunOutput, TimeAnalysis};
use crate::plot;
use std::fs;
use std::path::Path;

pub const RESULTS_HEADER: [&str; 10] = [
    "time_s",
    "n1",
    "n2",
    "re_ab",
    "im_ab",
    "abs_ab",
    "stderr",
    "visibility",
    "depth_bound",
    "verdict",
];

/// Shortest representation that parses back to the same `f64`.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e15).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn results_rows(analysis: &[TimeAnalysis]) -> Vec<Vec<String>> {
    analysis
        .iter()
        .map(|a| match (&a.point, &a.report) {
            (Some(p), Some(r)) => vec![
                num(a.time),
                num(a.n1),
                num(a.n2),
                num(p.cross_moment.re),
                num(p.cross_moment.im),
                num(p.cross_moment.norm()),
                num(p.cross_moment_stderr),
                num(p.visibility),
                num(r.depth_bound),
                r.verdict.to_string(),
            ],
            _ => {
                let nan = num(f64::NAN);
                vec![
                    num(a.time),
                    num(a.n1),
                    num(a.n2),
                    nan.clone(),
                    nan.clone(),
                    nan.clone(),
                    nan.clone(),
                    nan.clone(),
                    nan,
                    "ambiguous-mode".into(),
                ]
            }
        })
        .collect()
}

fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), RunError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

fn opt(x: Option<f64>) -> String {
    num(x.unwrap_or(f64::NAN))
}

pub fn write_all(out: &mut RunOutput, plots: bool) -> Result<(), RunError> {
    let dir = out.directory.clone();
    let a = &out.analysis;
    let files = &mut out.manifest.files;

    let results = results_rows(a);
    write_table(&dir.join("results.csv"), &RESULTS_HEADER, &results)?;
    files.push("results.csv".into());

    let diag_header = [
        "time_s",
        "visibility_stderr",
        "fringe_amplitude",
        "fringe_amplitude_stderr",
        "fringe_phase_rad",
        "full_field_fringe_amplitude",
        "raw_re_ab",
        "raw_im_ab",
        "raw_stderr",
        "leading_eigenvalue_1",
        "leading_eigenvalue_2",
        "captured_fraction_1",
        "captured_fraction_2",
        "borrowed_orbital",
        "estimators_agree",
        "flagged",
    ];
    let diag: Vec<Vec<String>> = a
        .iter()
        .zip(&out.manifest.flagged_per_time)
        .map(|(t, flagged)| {
            let p = t.point.as_ref();
            let f = t.fringe.as_ref();
            vec![
                num(t.time),
                opt(p.map(|p| p.visibility_stderr)),
                opt(f.map(|f| f.amplitude)),
                opt(f.map(|f| f.amplitude_stderr)),
                opt(f.map(|f| f.phase_offset)),
                opt(t.fringe_full_field.as_ref().map(|f| f.amplitude)),
                opt(p.map(|p| p.raw_cross_moment.re)),
                opt(p.map(|p| p.raw_cross_moment.im)),
                opt(p.map(|p| p.raw_cross_moment_stderr)),
                opt(p.map(|p| p.leading_eigenvalues[0])),
                opt(p.map(|p| p.leading_eigenvalues[1])),
                opt(p.map(|p| p.captured_fraction[0])),
                opt(p.map(|p| p.captured_fraction[1])),
                p.map_or("", |p| if p.borrowed_orbital { "true" } else { "false" })
                    .into(),
                t.estimators_agree()
                    .map_or("", |b| if b { "true" } else { "false" })
                    .into(),
                flagged.to_string(),
            ]
        })
        .collect();
    write_table(&dir.join("diagnostics.csv"), &diag_header, &diag)?;
    files.push("diagnostics.csv".into());

    let mut fringes = Vec::new();
    for t in a {
        let full = t.fringe_full_field.as_ref();
        for (i, (phi, pz)) in t.fringe.as_ref().map_or(&[][..], |f| &f.points[..]).iter().enumerate() {
            let pz_full = full.map(|f| f.points[i].1);
            fringes.push(vec![num(t.time), num(*phi), num(*pz), opt(pz_full)]);
        }
    }
    write_table(
        &dir.join("fringes.csv"),
        &["time_s", "phase_rad", "pz", "pz_full_field"],
        &fringes,
    )?;
    files.push("fringes.csv".into());

    if plots {
        let pdir = dir.join("plots");
        fs::create_dir_all(&pdir)?;
        let col = |r: &[String], i: usize| r[i].clone();
        let vis: Vec<Vec<String>> = results
            .iter()
            .zip(&diag)
            .map(|(r, d)| vec![col(r, 0), col(r, 7), col(d, 1)])
            .collect();
        write_table(
            &pdir.join("visibility.csv"),
            &["time_s", "visibility", "visibility_stderr"],
            &vis,
        )?;
        let pops: Vec<Vec<String>> = results
            .iter()
            .map(|r| vec![col(r, 0), col(r, 1), col(r, 2), col(r, 5)])
            .collect();
        write_table(&pdir.join("populations.csv"), &["time_s", "n1", "n2", "abs_ab"], &pops)?;
        write_table(
            &pdir.join("fringes.csv"),
            &["time_s", "phase_rad", "pz"],
            &fringes.iter().map(|r| r[..3].to_vec()).collect::<Vec<_>>(),
        )?;
        plot::visibility_svg(&pdir.join("visibility.svg"), &vis)?;
        plot::populations_svg(&pdir.join("populations.svg"), &pops)?;
        plot::fringes_svg(&pdir.join("fringes.svg"), &fringes)?;
        for f in ["visibility", "populations", "fringes"] {
            files.push(format!("plots/{f}.csv"));
            files.push(format!("plots/{f}.svg"));
        }
    }

    files.push("manifest.json".into());
    let json = serde_json::to_string_pretty(&out.manifest).map_err(|e| RunError::Io(e.to_string()))?;
    fs::write(dir.join("manifest.json"), json)?;
    Ok(())
}
