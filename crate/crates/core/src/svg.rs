//! Self-contained SVG rendering of sweep results: measured |time shift|
//! against tilt offset on log-log axes, one series per technique, with the
//! first-order prediction drawn as a line under the markers.
//!
//! The output is a plain string with no external references, and is
//! byte-for-byte deterministic for a given row set.

use crate::harness::SweepRow;
use crate::signal::Technique;
use std::fmt::Write;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 520.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 28.0;
const MARGIN_BOTTOM: f64 = 56.0;

fn series_color(mode: Technique) -> &'static str {
    match mode {
        Technique::Abwv => "#1f77b4",
        Technique::Wva => "#d62728",
    }
}

struct LogAxis {
    min: f64,
    max: f64,
    span_px: f64,
    origin_px: f64,
    invert: bool,
}

impl LogAxis {
    fn new(values: impl Iterator<Item = f64>, span_px: f64, origin_px: f64, invert: bool) -> Self {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in values.filter(|v| v.is_finite() && *v > 0.0) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() || !hi.is_finite() {
            lo = 1e-9;
            hi = 1.0;
        }
        if lo == hi {
            lo /= 2.0;
            hi *= 2.0;
        }
        // Pad 5 % in log space.
        let pad = 0.05 * (hi / lo).ln();
        LogAxis {
            min: lo * (-pad).exp(),
            max: hi * pad.exp(),
            span_px,
            origin_px,
            invert,
        }
    }

    fn project(&self, v: f64) -> f64 {
        let u = (v / self.min).ln() / (self.max / self.min).ln();
        let u = if self.invert { 1.0 - u } else { u };
        self.origin_px + u * self.span_px
    }

    /// Decade tick positions inside the axis range.
    fn decades(&self) -> Vec<f64> {
        let lo = self.min.log10().ceil() as i32;
        let hi = self.max.log10().floor() as i32;
        (lo..=hi).map(|e| 10f64.powi(e)).collect()
    }
}

fn fmt_px(v: f64) -> String {
    format!("{v:.2}")
}

fn tick_label(v: f64) -> String {
    format!("1e{}", v.log10().round() as i32)
}

/// Render the sweep as a log-log SVG plot.
///
/// Rows with error tags or non-positive values are skipped.  An input with
/// no plottable row yields a titled frame with a "no data" notice.
pub fn sweep_plot_svg(rows: &[SweepRow]) -> String {
    let plottable: Vec<&SweepRow> = rows
        .iter()
        .filter(|r| {
            r.error.is_none()
                && r.phi_set.is_finite()
                && r.phi_set > 0.0
                && r.delta_t.is_finite()
                && r.delta_t.abs() > 0.0
        })
        .collect();

    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"13\">\n"
    );
    let _ = write!(
        svg,
        "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    );
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let _ = write!(
        svg,
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#333\"/>\n",
        fmt_px(MARGIN_LEFT),
        fmt_px(MARGIN_TOP),
        fmt_px(plot_w),
        fmt_px(plot_h)
    );
    let _ = write!(
        svg,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">tilt offset phi (rad)</text>\n",
        fmt_px(MARGIN_LEFT + plot_w / 2.0),
        fmt_px(HEIGHT - 12.0)
    );
    let _ = write!(
        svg,
        "<text x=\"18\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {})\">|time shift| (s)</text>\n",
        fmt_px(MARGIN_TOP + plot_h / 2.0),
        fmt_px(MARGIN_TOP + plot_h / 2.0)
    );

    if plottable.is_empty() {
        let _ = write!(
            svg,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" fill=\"#777\">no data</text>\n",
            fmt_px(MARGIN_LEFT + plot_w / 2.0),
            fmt_px(MARGIN_TOP + plot_h / 2.0)
        );
        svg.push_str("</svg>\n");
        return svg;
    }

    let x_axis = LogAxis::new(
        plottable.iter().map(|r| r.phi_set),
        plot_w,
        MARGIN_LEFT,
        false,
    );
    let y_axis = LogAxis::new(
        plottable
            .iter()
            .flat_map(|r| [r.delta_t.abs(), r.delta_t_theory.abs()]),
        plot_h,
        MARGIN_TOP,
        true,
    );

    for tick in x_axis.decades() {
        let x = x_axis.project(tick);
        let _ = write!(
            svg,
            "<line x1=\"{x}\" y1=\"{y1}\" x2=\"{x}\" y2=\"{y2}\" stroke=\"#ddd\"/>\n",
            x = fmt_px(x),
            y1 = fmt_px(MARGIN_TOP),
            y2 = fmt_px(MARGIN_TOP + plot_h)
        );
        let _ = write!(
            svg,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
            fmt_px(x),
            fmt_px(MARGIN_TOP + plot_h + 18.0),
            tick_label(tick)
        );
    }
    for tick in y_axis.decades() {
        let y = y_axis.project(tick);
        let _ = write!(
            svg,
            "<line x1=\"{x1}\" y1=\"{y}\" x2=\"{x2}\" y2=\"{y}\" stroke=\"#ddd\"/>\n",
            x1 = fmt_px(MARGIN_LEFT),
            x2 = fmt_px(MARGIN_LEFT + plot_w),
            y = fmt_px(y)
        );
        let _ = write!(
            svg,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n",
            fmt_px(MARGIN_LEFT - 6.0),
            fmt_px(y + 4.0),
            tick_label(tick)
        );
    }

    // One series per technique, in fixed order for determinism.
    for mode in [Technique::Abwv, Technique::Wva] {
        let mut pts: Vec<&&SweepRow> = plottable.iter().filter(|r| r.mode == mode).collect();
        if pts.is_empty() {
            continue;
        }
        pts.sort_by(|a, b| a.phi_set.total_cmp(&b.phi_set));
        let color = series_color(mode);
        let theory: Vec<String> = pts
            .iter()
            .filter(|r| r.delta_t_theory.is_finite() && r.delta_t_theory.abs() > 0.0)
            .map(|r| {
                format!(
                    "{},{}",
                    fmt_px(x_axis.project(r.phi_set)),
                    fmt_px(y_axis.project(r.delta_t_theory.abs()))
                )
            })
            .collect();
        if theory.len() >= 2 {
            let _ = write!(
                svg,
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-dasharray=\"5 3\"/>\n",
                theory.join(" ")
            );
        }
        for r in &pts {
            let _ = write!(
                svg,
                "<circle cx=\"{}\" cy=\"{}\" r=\"4\" fill=\"{color}\"/>\n",
                fmt_px(x_axis.project(r.phi_set)),
                fmt_px(y_axis.project(r.delta_t.abs()))
            );
        }
    }

    // Legend.
    let lx = MARGIN_LEFT + 14.0;
    let mut ly = MARGIN_TOP + 20.0;
    for mode in [Technique::Abwv, Technique::Wva] {
        if !plottable.iter().any(|r| r.mode == mode) {
            continue;
        }
        let _ = write!(
            svg,
            "<circle cx=\"{}\" cy=\"{}\" r=\"4\" fill=\"{}\"/>\n",
            fmt_px(lx),
            fmt_px(ly - 4.0),
            series_color(mode)
        );
        let _ = write!(
            svg,
            "<text x=\"{}\" y=\"{}\">{} (dashed: first-order prediction)</text>\n",
            fmt_px(lx + 10.0),
            fmt_px(ly),
            mode.name()
        );
        ly += 18.0;
    }

    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(mode: Technique, phi: f64, dt: f64) -> SweepRow {
        SweepRow {
            mode,
            phi_set: phi,
            phi_hat: phi,
            phi_sem: None,
            delta_t: dt,
            delta_t_sem: None,
            omega0_hat: 156e-9,
            omega0_sem: None,
            omega0_true: 156e-9,
            delta_t_theory: dt * 1.02,
            amplification: 1.0 / phi,
            postselection: 1.0,
            weak1: 0.1,
            weak2: 0.01,
            n_pulses_used: 1,
            n_excluded: 0,
            error: None,
        }
    }

    #[test]
    fn renders_markers_and_theory_lines_per_mode() {
        let rows = vec![
            row(Technique::Abwv, 83e-9, 1.88e-2),
            row(Technique::Abwv, 1e-6, 1.56e-3),
            row(Technique::Abwv, 2.5e-6, 6.2e-4),
            row(Technique::Wva, 4e-6, 7.8e-4),
            row(Technique::Wva, 9e-6, 3.5e-4),
        ];
        let svg = sweep_plot_svg(&rows);
        assert!(svg.starts_with("<svg "));
        assert!(svg.trim_end().ends_with("</svg>"));
        // 5 data markers + 2 legend markers.
        assert_eq!(svg.matches("<circle").count(), 7);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("#1f77b4"));
        assert!(svg.contains("#d62728"));
        assert!(svg.contains("abwv"));
        assert!(svg.contains("wva"));
        // No external references; the file must be self-contained.
        assert!(!svg.contains("href"));
        assert!(!svg.contains("url("));
    }

    #[test]
    fn output_is_deterministic() {
        let rows = vec![
            row(Technique::Abwv, 83e-9, 1.88e-2),
            row(Technique::Wva, 4e-6, 7.8e-4),
        ];
        assert_eq!(sweep_plot_svg(&rows), sweep_plot_svg(&rows));
    }

    #[test]
    fn x_positions_follow_phi_ordering() {
        let rows = vec![
            row(Technique::Abwv, 1e-7, 1e-2),
            row(Technique::Abwv, 1e-6, 1e-3),
        ];
        let svg = sweep_plot_svg(&rows);
        let cx: Vec<f64> = svg
            .lines()
            .filter(|l| l.starts_with("<circle"))
            .take(2)
            .map(|l| {
                let s = l.split("cx=\"").nth(1).unwrap();
                s.split('"').next().unwrap().parse().unwrap()
            })
            .collect();
        assert!(cx[0] < cx[1], "log axis must preserve ordering: {cx:?}");
    }

    #[test]
    fn error_rows_and_empty_input_are_handled() {
        let mut bad = row(Technique::Abwv, 1e-6, 1e-3);
        bad.error = Some("failed".into());
        let svg = sweep_plot_svg(&[bad]);
        assert!(svg.contains("no data"));
        assert_eq!(svg.matches("<circle").count(), 0);

        let svg = sweep_plot_svg(&[]);
        assert!(svg.contains("no data"));
    }
}
