use std::fmt::Write as _;

use super::ReportError;
use crate::protocol::{Strategy, SummaryTable, TestSet};

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 200.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;

fn color(s: Option<Strategy>) -> &'static str {
    match s {
        None => "#000000",
        Some(Strategy::Random) => "#808080",
        Some(Strategy::Genie) => "#d62728",
        Some(Strategy::Practical) => "#1f77b4",
        Some(Strategy::Rand60) => "#2ca02c",
        Some(Strategy::Rand100) => "#9467bd",
    }
}

struct Series {
    label: String,
    color: &'static str,
    dashed: bool,
    points: Vec<(f64, f64)>,
}

/// Y range covering `[lo, hi]` with at least 10% of the span (or of the
/// value, for a flat series) on each side.
fn y_range(lo: f64, hi: f64) -> (f64, f64) {
    let span = hi - lo;
    let pad = if span > 0.0 { 0.1 * span } else { 0.1 * hi.abs().max(1.0) };
    (lo - pad, hi + pad)
}

fn tick_step(span: f64) -> f64 {
    let raw = span / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    [1.0, 2.0, 5.0, 10.0].into_iter().map(|m| m * mag).find(|&s| s >= raw).unwrap_or(10.0 * mag)
}

/// Q(0.9) against the number of BS: one polyline per (strategy, test set)
/// after fine-tuning, plus the D1-only reference per test set.
pub fn emit_plot(summary: &SummaryTable) -> Result<String, ReportError> {
    let mut series = Vec::new();
    for t in TestSet::BOTH {
        let dashed = t == TestSet::Test2;
        let rows = || summary.rows.iter().filter(move |r| r.test_set == t && r.mean_q90_after_m.is_finite());
        let mut reference: Vec<(f64, f64)> = Vec::new();
        for bs in summary.bs_counts() {
            if let Some(r) = rows().find(|r| r.bs_count == bs && r.mean_q90_initial_m.is_finite()) {
                reference.push((bs as f64, r.mean_q90_initial_m));
            }
        }
        if !reference.is_empty() {
            series.push(Series { label: format!("D1 only, {t}"), color: color(None), dashed, points: reference });
        }
        let mut strategies: Vec<Strategy> = rows().map(|r| r.strategy).collect();
        strategies.sort_unstable();
        strategies.dedup();
        for s in strategies {
            let points = rows().filter(|r| r.strategy == s).map(|r| (r.bs_count as f64, r.mean_q90_after_m)).collect();
            series.push(Series { label: format!("{s}, {t}"), color: color(Some(s)), dashed, points });
        }
    }
    let all = || series.iter().flat_map(|s| s.points.iter());
    if all().next().is_none() {
        return Err(ReportError::EmptySummary);
    }
    let (x_lo, x_hi) = all().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let (d_lo, d_hi) = all().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.1), b.max(p.1)));
    let (y_lo, y_hi) = y_range(d_lo, d_hi);
    let (x_lo, x_hi) = if x_hi > x_lo { (x_lo, x_hi) } else { (x_lo - 1.0, x_hi + 1.0) };

    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let px = |x: f64| LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w;
    let py = |y: f64| TOP + (y_hi - y) / (y_hi - y_lo) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r##"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#333"/>"##
    );
    for bs in summary.bs_counts() {
        let x = px(bs as f64);
        let _ = writeln!(
            svg,
            r##"<line x1="{x:.2}" y1="{0:.2}" x2="{x:.2}" y2="{1:.2}" stroke="#333"/><text x="{x:.2}" y="{2:.2}" text-anchor="middle">{bs}</text>"##,
            TOP + plot_h,
            TOP + plot_h + 5.0,
            TOP + plot_h + 20.0
        );
    }
    let step = tick_step(y_hi - y_lo);
    let mut tick = (y_lo / step).ceil() * step;
    while tick <= y_hi {
        let y = py(tick);
        let _ = writeln!(
            svg,
            r##"<line x1="{0:.2}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="#333"/><text x="{1:.2}" y="{2:.2}" text-anchor="end">{tick}</text>"##,
            LEFT - 5.0,
            LEFT - 8.0,
            y + 4.0,
            tick = (tick / step).round() * step
        );
        tick += step;
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">Number of BS</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        svg,
        r#"<text transform="translate(18,{:.2}) rotate(-90)" text-anchor="middle">Q(0.9) positioning error (m)</text>"#,
        TOP + plot_h / 2.0
    );
    for (i, s) in series.iter().enumerate() {
        let dash = if s.dashed { r#" stroke-dasharray="6,4""# } else { "" };
        let pts: Vec<String> = s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="2"{dash}/>"#,
            pts.join(" "),
            s.color
        );
        for &(x, y) in &s.points {
            let _ = writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{}"/>"#, px(x), py(y), s.color);
        }
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let lx = WIDTH - RIGHT + 15.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx}" y1="{ly}" x2="{0}" y2="{ly}" stroke="{1}" stroke-width="2"{dash}/><text x="{2}" y="{3}">{4}</text>"#,
            lx + 25.0,
            s.color,
            lx + 30.0,
            ly + 4.0,
            s.label
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::SummaryRow;

    fn row(bs: usize, strategy: Strategy, t: TestSet, initial: f64, after: f64) -> SummaryRow {
        SummaryRow {
            bs_count: bs,
            strategy,
            test_set: t,
            mean_gain: 1.0 - after / initial,
            mean_q90_initial_m: initial,
            mean_q90_after_m: after,
            n_valid: 1,
            n_invalid: 0,
        }
    }

    #[test]
    fn margins_cover_the_data() {
        let (lo, hi) = y_range(2.0, 15.0);
        assert!(lo <= 2.0 - 1.3 + 1e-12 && hi >= 15.0 + 1.3 - 1e-12);
        let (lo, hi) = y_range(5.0, 5.0);
        assert!(lo < 4.5 + 1e-12 && hi > 5.5 - 1e-12);
    }

    #[test]
    fn one_polyline_per_series() {
        let mut rows = Vec::new();
        for bs in [4, 8, 12, 18] {
            for s in [Strategy::Random, Strategy::Genie] {
                for t in TestSet::BOTH {
                    rows.push(row(bs, s, t, 15.0 - bs as f64 * 0.5, 2.0 + 10.0 / bs as f64));
                }
            }
        }
        let svg = emit_plot(&SummaryTable { rows }).unwrap();
        // Two strategies and one reference per test set.
        assert_eq!(svg.matches("<polyline").count(), 6);
        assert!(svg.contains("genie, test1") && svg.contains("D1 only, test2"));
        assert!(svg.contains("Number of BS") && svg.contains("Q(0.9)"));
    }

    #[test]
    fn single_point_still_renders() {
        let svg = emit_plot(&SummaryTable { rows: vec![row(18, Strategy::Random, TestSet::Test1, 7.0, 6.0)] }).unwrap();
        assert!(svg.contains("<circle"));
        assert!(matches!(emit_plot(&SummaryTable::default()), Err(ReportError::EmptySummary)));
    }
}
