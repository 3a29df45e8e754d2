use std::fmt::Write;

use crate::eval::metrics::ConditionSummary;

const SIZE: f64 = 400.0;
const PAD: f64 = 50.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Predicted (x) against observed (y) accuracy per condition on the unit
/// square, with the identity line.
pub fn scatter_svg(title: &str, conditions: &[ConditionSummary]) -> String {
    let total = SIZE + 2.0 * PAD;
    let px = |v: f64| PAD + v.clamp(0.0, 1.0) * SIZE;
    let py = |v: f64| PAD + (1.0 - v.clamp(0.0, 1.0)) * SIZE;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total}" height="{total}" viewBox="0 0 {total} {total}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="25" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>"#,
        total / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r##"<rect x="{PAD}" y="{PAD}" width="{SIZE}" height="{SIZE}" fill="none" stroke="#333"/>"##
    );
    let _ = writeln!(
        s,
        r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#999" stroke-dasharray="4 4"/>"##,
        px(0.0),
        py(0.0),
        px(1.0),
        py(1.0)
    );
    for tick in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="10">{tick:.2}</text>"#,
            px(tick),
            PAD + SIZE + 15.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end" font-family="sans-serif" font-size="10">{tick:.2}</text>"#,
            PAD - 5.0,
            py(tick) + 3.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12">predicted accuracy</text>"#,
        total / 2.0,
        total - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12" transform="rotate(-90 14 {})">observed accuracy</text>"#,
        total / 2.0,
        total / 2.0
    );
    for c in conditions {
        let _ = writeln!(
            s,
            r##"<circle cx="{:.2}" cy="{:.2}" r="5" fill="#1f77b4"><title>{}: predicted {:.3}, observed {:.3}</title></circle>"##,
            px(c.predicted_accuracy),
            py(c.observed_accuracy),
            escape(&c.condition_id),
            c.predicted_accuracy,
            c.observed_accuracy
        );
    }
    s.push_str("</svg>\n");
    s
}
