//! Minimal deterministic log-log line plots.

use std::fmt::Write;

use super::RateFit;

const W: f64 = 640.0;
const H: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub fit: Option<RateFit>,
}

pub struct LogLogPlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

fn usable(p: &(f64, f64)) -> bool {
    p.0 > 0.0 && p.1 > 0.0 && p.0.is_finite() && p.1.is_finite()
}

/// Decade-aligned log10 range covering `[lo, hi]`, widened if degenerate.
fn range(lo: f64, hi: f64) -> (f64, f64) {
    let (a, b) = (lo.log10(), hi.log10());
    if b - a < 1e-9 {
        (a.floor() - 0.5, a.floor() + 1.0)
    } else {
        let pad = 0.05 * (b - a);
        (a - pad, b + pad)
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl LogLogPlot {
    pub fn render(&self) -> String {
        let pts: Vec<(f64, f64)> = self.series.iter().flat_map(|s| s.points.iter().copied()).filter(usable).collect();
        let (xr, yr) = if pts.is_empty() {
            ((0.0, 1.0), (0.0, 1.0))
        } else {
            let fold = |f: fn(&(f64, f64)) -> f64| {
                pts.iter().map(f).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
            };
            let (x0, x1) = fold(|p| p.0);
            let (y0, y1) = fold(|p| p.1);
            (range(x0, x1), range(y0, y1))
        };
        let pw = W - LEFT - RIGHT;
        let ph = H - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (x.log10() - xr.0) / (xr.1 - xr.0) * pw;
        let sy = |y: f64| TOP + ph - (y.log10() - yr.0) / (yr.1 - yr.0) * ph;

        let mut s = String::new();
        let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#);
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(s, r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#, LEFT + pw / 2.0, esc(&self.title));
        let _ = writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
        for d in (xr.0.ceil() as i32)..=(xr.1.floor() as i32) {
            let x = LEFT + (d as f64 - xr.0) / (xr.1 - xr.0) * pw;
            let _ = writeln!(s, r##"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{:.2}" stroke="#ddd"/>"##, TOP + ph);
            let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">1e{d}</text>"#, TOP + ph + 16.0);
        }
        for d in (yr.0.ceil() as i32)..=(yr.1.floor() as i32) {
            let y = TOP + ph - (d as f64 - yr.0) / (yr.1 - yr.0) * ph;
            let _ = writeln!(s, r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/>"##, LEFT + pw);
            let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">1e{d}</text>"#, LEFT - 6.0, y + 4.0);
        }
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, H - 16.0, esc(&self.x_label));
        let _ = writeln!(
            s,
            r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            esc(&self.y_label)
        );

        for (i, series) in self.series.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            let good: Vec<(f64, f64)> = series.points.iter().copied().filter(usable).collect();
            if good.len() > 1 {
                let path: Vec<String> = good.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
                let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, path.join(" "));
            }
            for &(x, y) in &good {
                let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, sx(x), sy(y));
            }
            if let (Some(fit), Some(first), Some(last)) = (series.fit, good.first(), good.last()) {
                let fy = |x: f64| (fit.intercept + fit.slope * x.ln()).exp();
                let _ = writeln!(
                    s,
                    r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-dasharray="4 3"/>"#,
                    sx(first.0),
                    sy(fy(first.0)),
                    sx(last.0),
                    sy(fy(last.0))
                );
            }
            let ly = TOP + 14.0 + 18.0 * i as f64;
            let lx = LEFT + pw + 12.0;
            let label = match series.fit {
                Some(f) => format!("{} (slope {:.2})", series.name, f.slope),
                None => series.name.clone(),
            };
            let _ = writeln!(s, r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/>"#, lx + 16.0);
            let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, lx + 20.0, ly + 4.0, esc(&label));
        }
        s.push_str("</svg>\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_points_fits_and_escapes() {
        let plot = LogLogPlot {
            title: "a < b".into(),
            x_label: "k".into(),
            y_label: "err".into(),
            series: vec![
                Series {
                    name: "K".into(),
                    points: vec![(10.0, 1.0), (20.0, 0.25), (40.0, f64::NAN)],
                    fit: Some(RateFit { slope: -2.0, intercept: 100f64.ln(), r2: 1.0 }),
                },
                Series { name: "empty".into(), points: vec![], fit: None },
            ],
        };
        let svg = plot.render();
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert_eq!(svg.matches("<circle").count(), 2);
        assert!(svg.contains("slope -2.00") && svg.contains("a &lt; b"));
        assert!(!svg.contains("NaN"));
        assert_eq!(svg, plot.render());
    }
}
