//! Minimal SVG rendering of a bootstrapped ROC curve.

use std::fmt::Write as _;

use super::bootstrap::BootstrapRoc;

const SIZE: f64 = 400.0;
const MARGIN: f64 = 50.0;

fn xy(fpr: f64, tpr: f64) -> (f64, f64) {
    (MARGIN + fpr * SIZE, MARGIN + (1.0 - tpr) * SIZE)
}

/// Mean ROC curve with a ±1 sd band over the resamples.
pub fn roc_svg(b: &BootstrapRoc, title: &str) -> String {
    let band = b.band(101);
    let total = SIZE + 2.0 * MARGIN;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total}" height="{total}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let poly: Vec<String> = band
        .fpr
        .iter()
        .zip(&band.upper)
        .chain(band.fpr.iter().zip(&band.lower).rev())
        .map(|(&x, &y)| {
            let (px, py) = xy(x, y);
            format!("{px:.2},{py:.2}")
        })
        .collect();
    let _ = writeln!(s, r##"<polygon points="{}" fill="#9ecae1" fill-opacity="0.5"/>"##, poly.join(" "));
    let line: Vec<String> = band
        .fpr
        .iter()
        .zip(&band.mean_tpr)
        .map(|(&x, &y)| {
            let (px, py) = xy(x, y);
            format!("{px:.2},{py:.2}")
        })
        .collect();
    let _ = writeln!(s, r##"<polyline points="{}" fill="none" stroke="#08519c" stroke-width="2"/>"##, line.join(" "));
    let (x0, y0) = xy(0.0, 0.0);
    let (x1, y1) = xy(1.0, 1.0);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y1}" stroke="grey" stroke-dasharray="4"/>"#);
    let _ = writeln!(s, r#"<rect x="{MARGIN}" y="{MARGIN}" width="{SIZE}" height="{SIZE}" fill="none" stroke="black"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">False positive rate</text>"#, MARGIN + SIZE / 2.0, total - 15.0);
    let _ = writeln!(
        s,
        r#"<text x="15" y="{}" text-anchor="middle" transform="rotate(-90 15 {})">True positive rate</text>"#,
        MARGIN + SIZE / 2.0,
        MARGIN + SIZE / 2.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="30" text-anchor="middle">{} (AUROC {:.2} ± {:.2})</text>"#,
        MARGIN + SIZE / 2.0,
        escape(title),
        b.mean,
        b.sd
    );
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::bootstrap_roc;

    #[test]
    fn renders_well_formed_svg() {
        let b = bootstrap_roc(&[0.1, 0.6, 0.4, 0.9], &[false, false, true, true], 5, 1).unwrap();
        let svg = roc_svg(&b, "a <b>");
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert!(svg.contains("a &lt;b&gt;"));
    }
}
