//! Line charts of relative RMSE against stream length.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::simulate::SimulationReport;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 56.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// One chart per group of labels; each group shares axes.
pub fn render_svg(report: &SimulationReport, groups: &[Vec<String>]) -> String {
    let height = HEIGHT * groups.len().max(1) as f64;
    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    for (g, labels) in groups.iter().enumerate() {
        render_panel(&mut out, report, labels, g as f64 * HEIGHT);
    }
    out.push_str("</svg>\n");
    out
}

/// Groups labels by whether they are martingale estimators.
pub fn default_groups(report: &SimulationReport) -> Vec<Vec<String>> {
    let mut groups: BTreeMap<bool, Vec<String>> = BTreeMap::new();
    for r in &report.rows {
        let g = groups.entry(r.martingale).or_default();
        if !g.contains(&r.sketch) {
            g.push(r.sketch.clone());
        }
    }
    groups.into_values().collect()
}

fn render_panel(out: &mut String, report: &SimulationReport, labels: &[String], y0: f64) {
    let series: Vec<(&String, Vec<(f64, f64)>)> = labels
        .iter()
        .map(|l| {
            let pts = report
                .rows
                .iter()
                .filter(|r| &r.sketch == l)
                .map(|r| (r.n as f64, r.rel_rmse))
                .collect();
            (l, pts)
        })
        .collect();
    let pts = series.iter().flat_map(|s| s.1.iter());
    let x_max = pts.clone().map(|p| p.0).fold(1.0, f64::max);
    let y_max = pts.map(|p| p.1).fold(0.0, f64::max).max(1e-12) * 1.1;
    let (plot_w, plot_h) = (WIDTH - 2.0 * MARGIN, HEIGHT - 2.0 * MARGIN);
    let sx = |x: f64| MARGIN + x / x_max * plot_w;
    let sy = |y: f64| y0 + HEIGHT - MARGIN - y / y_max * plot_h;

    writeln!(
        out,
        r##"<rect x="{MARGIN}" y="{}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#444"/>"##,
        y0 + MARGIN
    )
    .unwrap();
    for i in 0..=4 {
        let yv = y_max * i as f64 / 4.0;
        writeln!(
            out,
            r#"<text x="{}" y="{:.1}" text-anchor="end">{:.4}</text>"#,
            MARGIN - 4.0,
            sy(yv) + 4.0,
            yv
        )
        .unwrap();
        let xv = x_max * i as f64 / 4.0;
        writeln!(
            out,
            r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#,
            sx(xv),
            y0 + HEIGHT - MARGIN + 16.0,
            xv.round()
        )
        .unwrap();
    }
    writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">n (relative RMSE)</text>"#,
        WIDTH / 2.0,
        y0 + HEIGHT - 12.0
    )
    .unwrap();
    for (i, (label, pts)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y)))
            .collect();
        writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            path.join(" ")
        )
        .unwrap();
        writeln!(
            out,
            r#"<text x="{}" y="{}" fill="{color}">{label}</text>"#,
            WIDTH - MARGIN - 80.0,
            y0 + MARGIN + 16.0 * (i + 1) as f64
        )
        .unwrap();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::simulate::{run_simulation, EstimatorSpec, SimulationConfig};
    use crate::sketches::SketchKind;

    #[test]
    fn renders_one_polyline_per_series() {
        let specs = vec![
            EstimatorSpec::new(SketchKind::Ehll, 16, false),
            EstimatorSpec::new(SketchKind::Hll, 16, false),
            EstimatorSpec::new(SketchKind::Ehll, 16, true),
        ];
        let report = run_simulation(&SimulationConfig::new(specs, 200, 4, 4, 1)).unwrap();
        let groups = default_groups(&report);
        assert_eq!(groups.len(), 2);
        let svg = render_svg(&report, &groups);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 3);
    }
}
