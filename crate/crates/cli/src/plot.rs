//! Static SVG renderings of the plot tables.

use crate::pipeline::RunError;
use plotters::prelude::*;
use std::path::Path;

const SIZE: (u32, u32) = (720, 480);
const COLORS: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(214, 39, 40),
    RGBColor(44, 160, 44),
    RGBColor(148, 103, 189),
    RGBColor(255, 127, 14),
    RGBColor(23, 190, 207),
];

fn draw_err<E: std::fmt::Debug>(e: E) -> RunError {
    RunError::Io(format!("plot: {e:?}"))
}

fn parse(rows: &[Vec<String>], x: usize, y: usize) -> Vec<(f64, f64)> {
    rows.iter()
        .filter_map(|r| Some((r[x].parse::<f64>().ok()?, r[y].parse::<f64>().ok()?)))
        .filter(|(a, b)| a.is_finite() && b.is_finite())
        .collect()
}

fn range(values: impl Iterator<Item = f64>, floor: Option<f64>) -> (f64, f64) {
    let (mut lo, mut hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
    if let Some(f) = floor {
        lo = lo.min(f);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let pad = ((hi - lo) * 0.05).max(1e-9 * hi.abs().max(1.0));
    lo -= pad;
    hi += pad;
    (lo, hi)
}

fn chart(
    path: &Path,
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[(String, Vec<(f64, f64)>)],
    y_floor: Option<f64>,
) -> Result<(), RunError> {
    let root = SVGBackend::new(path, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(draw_err)?;
    let xs = range(series.iter().flat_map(|s| s.1.iter().map(|p| p.0)), None);
    let ys = range(series.iter().flat_map(|s| s.1.iter().map(|p| p.1)), y_floor);
    let mut c = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(64)
        .build_cartesian_2d(xs.0..xs.1, ys.0..ys.1)
        .map_err(draw_err)?;
    c.configure_mesh()
        .x_desc(x_label)
        .y_desc(y_label)
        .draw()
        .map_err(draw_err)?;
    for (i, (label, pts)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        c.draw_series(LineSeries::new(pts.iter().copied(), color.stroke_width(2)))
            .map_err(draw_err)?
            .label(label.as_str())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], color.stroke_width(2)));
        c.draw_series(pts.iter().map(|&p| Circle::new(p, 3, color.filled())))
            .map_err(draw_err)?;
    }
    if series.len() > 1 {
        c.configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .draw()
            .map_err(draw_err)?;
    }
    root.present().map_err(draw_err)?;
    Ok(())
}

fn ms(points: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    points.into_iter().map(|(t, y)| (t * 1e3, y)).collect()
}

/// Rows of `time_s, visibility, visibility_stderr`.
pub fn visibility_svg(path: &Path, rows: &[Vec<String>]) -> Result<(), RunError> {
    let series = vec![("visibility".to_string(), ms(parse(rows, 0, 1)))];
    chart(
        path,
        "Fringe visibility",
        "hold time (ms)",
        "visibility",
        &series,
        Some(0.0),
    )
}

/// Rows of `time_s, n1, n2, abs_ab`.
pub fn populations_svg(path: &Path, rows: &[Vec<String>]) -> Result<(), RunError> {
    let series = vec![
        ("n1".to_string(), ms(parse(rows, 0, 1))),
        ("n2".to_string(), ms(parse(rows, 0, 2))),
        ("|<a+b>|".to_string(), ms(parse(rows, 0, 3))),
    ];
    chart(
        path,
        "Populations and two-mode moment",
        "hold time (ms)",
        "atoms",
        &series,
        Some(0.0),
    )
}

/// Rows of `time_s, phase_rad, pz, ...`, one curve per time.
pub fn fringes_svg(path: &Path, rows: &[Vec<String>]) -> Result<(), RunError> {
    let mut series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for r in rows {
        let (Ok(phi), Ok(pz)) = (r[1].parse::<f64>(), r[2].parse::<f64>()) else {
            continue;
        };
        let label = format!(
            "{} ms",
            r[0].parse::<f64>().map_or(r[0].clone(), |t| format!("{:.1}", t * 1e3))
        );
        match series.last_mut() {
            Some((l, pts)) if *l == label => pts.push((phi, pz)),
            _ => series.push((label, vec![(phi, pz)])),
        }
    }
    chart(path, "Ramsey fringes", "pulse-2 phase (rad)", "P_z", &series, None)
}
