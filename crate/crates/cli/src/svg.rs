//! Log-log plots as standalone SVG.

use std::fmt::Write as _;

use sfg_core::experiment::SweepCurve;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 56.0;

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

struct Axis {
    lo: f64,
    hi: f64,
}

impl Axis {
    /// Decade-aligned range covering the positive values.
    fn covering(values: impl Iterator<Item = f64>) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| *v > 0.0 && v.is_finite()) {
            lo = lo.min(v.log10());
            hi = hi.max(v.log10());
        }
        if !lo.is_finite() {
            return Self { lo: 0.0, hi: 1.0 };
        }
        let (lo, hi) = (lo.floor(), hi.ceil());
        Self {
            lo,
            hi: if hi > lo { hi } else { lo + 1.0 },
        }
    }

    fn frac(&self, v: f64) -> f64 {
        (v.log10() - self.lo) / (self.hi - self.lo)
    }

    fn decades(&self) -> impl Iterator<Item = i32> {
        (self.lo as i32)..=(self.hi as i32)
    }
}

/// Counts against drive on log-log axes, with the fitted power law.
pub fn loglog_plot(curve: &SweepCurve, title: &str, x_label: &str, y_label: &str) -> String {
    let pts: Vec<(f64, f64, f64)> = curve
        .points
        .iter()
        .filter(|p| p.drive > 0.0 && p.mean > 0.0)
        .map(|p| (p.drive, p.mean, p.std))
        .collect();
    let xa = Axis::covering(pts.iter().map(|p| p.0));
    let ya = Axis::covering(pts.iter().flat_map(|p| [p.1, p.1 + p.2]));
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let px = |x: f64| LEFT + xa.frac(x) * pw;
    let py = |y: f64| TOP + (1.0 - ya.frac(y)) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );

    for d in xa.decades() {
        let x = px(10f64.powi(d));
        let _ = writeln!(
            s,
            r##"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="#ccc"/><text x="{x:.1}" y="{:.1}" text-anchor="middle">1e{d}</text>"##,
            TOP,
            TOP + ph,
            TOP + ph + 18.0
        );
    }
    for d in ya.decades() {
        let y = py(10f64.powi(d));
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ccc"/><text x="{:.1}" y="{:.1}" text-anchor="end">1e{d}</text>"##,
            LEFT + pw,
            LEFT - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(y_label)
    );

    // Fitted power law through the log-space centroid.
    if let (Some(slope), false) = (curve.fitted_slope, pts.is_empty()) {
        let k = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0.ln()).sum::<f64>() / k;
        let my = pts.iter().map(|p| p.1.ln()).sum::<f64>() / k;
        let (x0, x1) = (pts[0].0, pts[pts.len() - 1].0);
        let y = |x: f64| (my + slope * (x.ln() - mx)).exp();
        let _ = writeln!(
            s,
            r##"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#c33" stroke-width="1.5"/>"##,
            px(x0),
            py(y(x0)),
            px(x1),
            py(y(x1))
        );
        let _ = writeln!(
            s,
            r##"<text x="{:.1}" y="{:.1}" fill="#c33">slope {slope:.3}</text>"##,
            LEFT + 10.0,
            TOP + 18.0
        );
    }

    for &(x, y, e) in &pts {
        if e > 0.0 && y - e > 0.0 {
            let _ = writeln!(
                s,
                r##"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#36c"/>"##,
                px(x),
                py(y - e),
                px(x),
                py(y + e)
            );
        }
        let _ = writeln!(
            s,
            r##"<circle cx="{:.1}" cy="{:.1}" r="3" fill="#36c"/>"##,
            px(x),
            py(y)
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use sfg_core::experiment::{SweepMode, SweepPoint};

    #[test]
    fn escapes_markup() {
        assert_eq!(escape("a<b & \"c\">"), "a&lt;b &amp; &quot;c&quot;&gt;");
    }

    #[test]
    fn decade_axis() {
        let a = Axis::covering([2e-3, 0.15].into_iter());
        assert_eq!((a.lo, a.hi), (-3.0, 0.0));
        let flat = Axis::covering([5.0, 5.0].into_iter());
        assert!(flat.hi > flat.lo);
    }

    #[test]
    fn skips_non_positive_points() {
        let c = SweepCurve::from_points(
            SweepMode::PumpScaling,
            vec![
                SweepPoint {
                    drive: 0.1,
                    mean: -3.0,
                    std: 1.0,
                },
                SweepPoint {
                    drive: 0.2,
                    mean: 4.0,
                    std: 1.0,
                },
            ],
        );
        let svg = loglog_plot(&c, "t", "x", "y");
        assert_eq!(svg.matches("<circle").count(), 1);
    }
}
