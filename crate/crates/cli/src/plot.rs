use std::path::Path;

use gprn_core::error::{Error, Result};
use gprn_core::game::{SweepAxis, SweepPoint};
use plotters::prelude::*;

/// Line plot of the equilibrium level against the swept parameter.
pub fn sweep_svg(path: &Path, axis: SweepAxis, points: &[SweepPoint]) -> Result<()> {
    let err = |e: String| Error::data(format!("plot {}: {e}", path.display()));
    let lo = points.iter().map(|p| p.value).fold(f64::INFINITY, f64::min);
    let mut hi = points
        .iter()
        .map(|p| p.value)
        .fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        hi = lo + 1.0;
    }
    let root = SVGBackend::new(path, (720, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| err(e.to_string()))?;
    let mut chart = ChartBuilder::on(&root)
        .margin(20)
        .caption(format!("c* vs {axis}"), ("sans-serif", 20))
        .x_label_area_size(40)
        .y_label_area_size(50)
        .build_cartesian_2d(lo..hi, 0.0..1.05f64)
        .map_err(|e| err(e.to_string()))?;
    chart
        .configure_mesh()
        .x_desc(axis.to_string())
        .y_desc("c*")
        .draw()
        .map_err(|e| err(e.to_string()))?;
    let series: Vec<(f64, f64)> = points
        .iter()
        .map(|p| (p.value, p.equilibrium.c_star))
        .collect();
    chart
        .draw_series(LineSeries::new(series.clone(), &BLUE))
        .map_err(|e| err(e.to_string()))?;
    chart
        .draw_series(
            series
                .into_iter()
                .map(|(x, y)| Circle::new((x, y), 3, BLUE.filled())),
        )
        .map_err(|e| err(e.to_string()))?;
    root.present().map_err(|e| err(e.to_string()))?;
    Ok(())
}
