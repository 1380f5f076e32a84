//! Self-contained SVG figures: ROC curve, confusion matrix, importance bars.

use std::fmt::Write;

use crate::metrics::{Confusion, FeatureImportance, RocPoint};

const W: f64 = 480.0;
const H: f64 = 480.0;
const PAD: f64 = 60.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn open(out: &mut String, w: f64, h: f64) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
}

pub fn roc_svg(points: &[RocPoint], auroc: f64) -> String {
    let side = W - 2.0 * PAD;
    let x = |f: f64| PAD + f * side;
    let y = |t: f64| H - PAD - t * side;
    let mut s = String::new();
    open(&mut s, W, H);
    let _ = writeln!(
        s,
        r#"<rect x="{PAD}" y="{PAD}" width="{side}" height="{side}" fill="none" stroke="black"/>"#
    );
    for i in 0..=5 {
        let v = i as f64 / 5.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{v:.1}</text>"#,
            x(v),
            H - PAD + 18.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{v:.1}</text>"#,
            PAD - 6.0,
            y(v) + 4.0
        );
    }
    let _ = writeln!(
        s,
        r##"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#999" stroke-dasharray="4 4"/>"##,
        x(0.0),
        y(0.0),
        x(1.0),
        y(1.0)
    );
    let path: Vec<String> = points
        .iter()
        .map(|p| format!("{:.2},{:.2}", x(p.fpr), y(p.tpr)))
        .collect();
    let _ = writeln!(
        s,
        r##"<polyline points="{}" fill="none" stroke="#1f77b4" stroke-width="2"/>"##,
        path.join(" ")
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">False positive rate</text>"#,
        W / 2.0,
        H - 20.0
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">True positive rate</text>"#,
        H / 2.0,
        H / 2.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="30" text-anchor="middle" font-size="14">ROC curve (AUC = {auroc:.4})</text>"#,
        W / 2.0
    );
    s.push_str("</svg>\n");
    s
}

pub fn confusion_svg(c: &Confusion) -> String {
    let cell = 150.0;
    let x0 = 120.0;
    let y0 = 80.0;
    let max = [c.tn, c.fp, c.fn_, c.tp].into_iter().max().unwrap_or(0).max(1) as f64;
    let mut s = String::new();
    open(&mut s, x0 + 2.0 * cell + 40.0, y0 + 2.0 * cell + 60.0);
    let cells = [(0, 0, c.tn), (0, 1, c.fp), (1, 0, c.fn_), (1, 1, c.tp)];
    for (r, col, v) in cells {
        let shade = 255.0 - 200.0 * v as f64 / max;
        let (cx, cy) = (x0 + col as f64 * cell, y0 + r as f64 * cell);
        let _ = writeln!(
            s,
            r#"<rect x="{cx}" y="{cy}" width="{cell}" height="{cell}" fill="rgb({0:.0},{0:.0},255)" stroke="black"/>"#,
            shade
        );
        let colour = if shade < 128.0 { "white" } else { "black" };
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="20" fill="{colour}">{v}</text>"#,
            cx + cell / 2.0,
            cy + cell / 2.0 + 7.0
        );
    }
    for (i, label) in ["0", "1"].iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{label}</text>"#,
            x0 + (i as f64 + 0.5) * cell,
            y0 - 8.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{label}</text>"#,
            x0 - 8.0,
            y0 + (i as f64 + 0.5) * cell + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">Predicted</text>"#,
        x0 + cell,
        y0 - 30.0
    );
    let _ = writeln!(
        s,
        r#"<text x="40" y="{:.1}" text-anchor="middle" transform="rotate(-90 40 {:.1})">Actual</text>"#,
        y0 + cell,
        y0 + cell
    );
    s.push_str("</svg>\n");
    s
}

pub fn importance_svg(features: &[FeatureImportance]) -> String {
    let bar_h = 18.0;
    let left = 190.0;
    let width = 320.0;
    let h = 60.0 + bar_h * features.len() as f64;
    let max = features
        .iter()
        .map(|f| f.mean_drop.abs())
        .fold(0.0f64, f64::max)
        .max(1e-12);
    let zero = left
        + if features.iter().any(|f| f.mean_drop < 0.0) {
            width / 4.0
        } else {
            0.0
        };
    let scale = (left + width - zero) / max;
    let mut s = String::new();
    open(&mut s, left + width + 80.0, h);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="14">Permutation importance (mean AUROC drop)</text>"#,
        (left + width) / 2.0 + 40.0
    );
    for (i, f) in features.iter().enumerate() {
        let y = 40.0 + i as f64 * bar_h;
        let len = f.mean_drop * scale;
        let (bx, bw) = if len >= 0.0 { (zero, len) } else { (zero + len, -len) };
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            left - 6.0,
            y + bar_h * 0.7,
            escape(&f.name)
        );
        let _ = writeln!(
            s,
            r##"<rect x="{bx:.2}" y="{:.1}" width="{bw:.2}" height="{:.1}" fill="#2ca02c"/>"##,
            y + 2.0,
            bar_h - 4.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}">{:.4}</text>"#,
            bx + bw + 4.0,
            y + bar_h * 0.7,
            f.mean_drop
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn figures_are_well_formed() {
        let roc = roc_svg(
            &[
                RocPoint {
                    threshold: 2.0,
                    fpr: 0.0,
                    tpr: 0.0,
                },
                RocPoint {
                    threshold: 1.0,
                    fpr: 1.0,
                    tpr: 1.0,
                },
            ],
            0.5,
        );
        assert!(roc.starts_with("<svg") && roc.trim_end().ends_with("</svg>"));
        let c = confusion_svg(&Confusion {
            tn: 5,
            fp: 1,
            fn_: 2,
            tp: 3,
        });
        assert!(c.contains(">5<") && c.contains(">3<"));
        let imp = importance_svg(&[FeatureImportance {
            name: "a<b".into(),
            baseline_auroc: 0.9,
            mean_drop: -0.01,
            std_drop: 0.0,
            repeats: 1,
        }]);
        assert!(imp.contains("a&lt;b"));
    }
}
