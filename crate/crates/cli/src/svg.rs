//! Minimal SVG line charts for MCMC traces.

use std::fmt::Write;

const WIDTH: f64 = 800.0;
const PANEL: f64 = 160.0;
const MARGIN: f64 = 50.0;
const MAX_POINTS: usize = 2000;

/// One stacked panel per series, x = stored draw index.
pub fn trace_chart(series: &[(&str, &[f64])]) -> String {
    let height = MARGIN + series.len() as f64 * (PANEL + MARGIN);
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    for (p, (name, values)) in series.iter().enumerate() {
        let top = MARGIN + p as f64 * (PANEL + MARGIN);
        let (lo, hi) = values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let span = if hi > lo { hi - lo } else { 1.0 };
        let plot_w = WIDTH - 2.0 * MARGIN;
        let step = values.len().div_ceil(MAX_POINTS).max(1);
        let denom = (values.len().max(2) - 1) as f64;
        let points: Vec<String> = values
            .iter()
            .enumerate()
            .step_by(step)
            .map(|(i, &v)| {
                let x = MARGIN + plot_w * i as f64 / denom;
                let y = top + PANEL * (1.0 - (v - lo) / span);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        writeln!(
            s,
            r##"<rect x="{MARGIN}" y="{top}" width="{plot_w}" height="{PANEL}" fill="none" stroke="#999"/>"##
        )
        .unwrap();
        writeln!(s, r#"<text x="{MARGIN}" y="{:.2}">{name}</text>"#, top - 8.0).unwrap();
        writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{hi:.4}</text>"#,
            MARGIN - 4.0,
            top + 10.0
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{lo:.4}</text>"#,
            MARGIN - 4.0,
            top + PANEL
        )
        .unwrap();
        writeln!(
            s,
            r#"<polyline fill="none" stroke="steelblue" stroke-width="0.8" points="{}"/>"#,
            points.join(" ")
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_has_one_polyline_per_series() {
        let a: Vec<f64> = (0..5000).map(|i| (i as f64).sin()).collect();
        let b = vec![1.0; 10];
        let svg = trace_chart(&[("rho", &a), ("sigma2", &b)]);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
    }
}
