//! Minimal self-contained SVG line charts: polylines, linear ticks, shaded
//! vertical bands for infeasible axis ranges. No external assets.

const WIDTH: f64 = 860.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 170.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 60.0;

const PALETTE: [&str; 6] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
];

pub(crate) struct Series {
    pub label: String,
    /// Points in axis order; `None` marks a gap (no value at that axis spot).
    pub points: Vec<(f64, Option<f64>)>,
}

pub(crate) struct Chart {
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    /// Axis intervals to shade as infeasible.
    pub shaded: Vec<(f64, f64)>,
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let magnitude = v.abs();
    if !(1e-3..1e4).contains(&magnitude) {
        format!("{v:.3e}")
    } else {
        let s = format!("{v:.3}");
        let trimmed = s.trim_end_matches('0').trim_end_matches('.');
        trimmed.to_string()
    }
}

impl Chart {
    pub fn render(&self) -> String {
        let xs: Vec<f64> = self
            .series
            .iter()
            .flat_map(|s| s.points.iter().map(|p| p.0))
            .collect();
        let ys: Vec<f64> = self
            .series
            .iter()
            .flat_map(|s| s.points.iter().filter_map(|p| p.1))
            .collect();
        let (x_min, x_max) = span(&xs);
        let (mut y_min, mut y_max) = span(&ys);
        let pad = 0.05 * (y_max - y_min).max(y_max.abs().max(1.0) * 1e-3);
        y_min -= pad;
        y_max += pad;

        let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
        let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
        let sx = move |x: f64| MARGIN_LEFT + (x - x_min) / (x_max - x_min) * plot_w;
        let sy = move |y: f64| MARGIN_TOP + (1.0 - (y - y_min) / (y_max - y_min)) * plot_h;

        let mut svg = String::new();
        svg.push_str(&format!(
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#,
        ));
        svg.push('\n');
        svg.push_str(r#"<rect width="100%" height="100%" fill="white"/>"#);
        svg.push('\n');

        for &(a, b) in &self.shaded {
            let x0 = sx(a.max(x_min));
            let x1 = sx(b.min(x_max));
            if x1 > x0 {
                svg.push_str(&format!(
                    r##"<rect x="{:.2}" y="{MARGIN_TOP}" width="{:.2}" height="{plot_h}" fill="#d62728" fill-opacity="0.12"/>"##,
                    x0,
                    x1 - x0
                ));
                svg.push('\n');
            }
        }

        // frame and ticks
        svg.push_str(&format!(
            r#"<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
        ));
        svg.push('\n');
        for i in 0..5 {
            let f = i as f64 / 4.0;
            let xv = x_min + f * (x_max - x_min);
            let yv = y_min + f * (y_max - y_min);
            let xp = sx(xv);
            let yp = sy(yv);
            svg.push_str(&format!(
                r#"<line x1="{xp:.2}" y1="{:.2}" x2="{xp:.2}" y2="{:.2}" stroke="black"/>"#,
                MARGIN_TOP + plot_h,
                MARGIN_TOP + plot_h + 6.0
            ));
            svg.push_str(&format!(
                r#"<text x="{xp:.2}" y="{:.2}" font-size="12" text-anchor="middle">{}</text>"#,
                MARGIN_TOP + plot_h + 22.0,
                tick_label(xv)
            ));
            svg.push_str(&format!(
                r#"<line x1="{:.2}" y1="{yp:.2}" x2="{MARGIN_LEFT}" y2="{yp:.2}" stroke="black"/>"#,
                MARGIN_LEFT - 6.0
            ));
            svg.push_str(&format!(
                r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="end">{}</text>"#,
                MARGIN_LEFT - 10.0,
                yp + 4.0,
                tick_label(yv)
            ));
            svg.push('\n');
        }

        svg.push_str(&format!(
            r#"<text x="{:.2}" y="{:.2}" font-size="14" text-anchor="middle">{}</text>"#,
            MARGIN_LEFT + plot_w / 2.0,
            HEIGHT - 14.0,
            escape(&self.x_label)
        ));
        svg.push('\n');
        svg.push_str(&format!(
            r#"<text x="18" y="{:.2}" font-size="14" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
            MARGIN_TOP + plot_h / 2.0,
            MARGIN_TOP + plot_h / 2.0,
            escape(&self.y_label)
        ));
        svg.push('\n');

        for (s, series) in self.series.iter().enumerate() {
            let color = PALETTE[s % PALETTE.len()];
            // split the polyline at gaps
            let mut run: Vec<String> = Vec::new();
            let flush = |run: &mut Vec<String>, svg: &mut String| {
                if run.len() >= 2 {
                    svg.push_str(&format!(
                        r#"<polyline fill="none" stroke="{color}" stroke-width="1.8" points="{}"/>"#,
                        run.join(" ")
                    ));
                    svg.push('\n');
                } else if run.len() == 1 {
                    svg.push_str(&format!(
                        r#"<circle cx="{}" r="2.4" fill="{color}"/>"#,
                        run[0].replace(',', "\" cy=\"")
                    ));
                    svg.push('\n');
                }
                run.clear();
            };
            for &(x, y) in &series.points {
                match y {
                    Some(y) => run.push(format!("{:.2},{:.2}", sx(x), sy(y))),
                    None => flush(&mut run, &mut svg),
                }
            }
            flush(&mut run, &mut svg);

            let ly = MARGIN_TOP + 16.0 + 18.0 * s as f64;
            svg.push_str(&format!(
                r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="1.8"/>"#,
                WIDTH - MARGIN_RIGHT + 12.0,
                WIDTH - MARGIN_RIGHT + 40.0
            ));
            svg.push_str(&format!(
                r#"<text x="{:.2}" y="{:.2}" font-size="12">{}</text>"#,
                WIDTH - MARGIN_RIGHT + 46.0,
                ly + 4.0,
                escape(&series.label)
            ));
            svg.push('\n');
        }

        svg.push_str("</svg>\n");
        svg
    }
}

fn span(values: &[f64]) -> (f64, f64) {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &v in values {
        min = min.min(v);
        max = max.max(v);
    }
    if !min.is_finite() || !max.is_finite() {
        return (0.0, 1.0);
    }
    if min == max {
        (min - 0.5, max + 0.5)
    } else {
        (min, max)
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
