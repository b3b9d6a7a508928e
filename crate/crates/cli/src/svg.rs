//! Site-resolved heatmaps.

use std::fmt::Write;

/// White to dark blue over `[lo, hi]`.
fn color(v: f64, lo: f64, hi: f64) -> String {
    let x = if hi > lo { ((v - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 0.0 };
    let ch = |a: f64, b: f64| (a + (b - a) * x).round() as u8;
    format!("#{:02x}{:02x}{:02x}", ch(255.0, 8.0), ch(255.0, 48.0), ch(255.0, 107.0))
}

/// `values[t][site]` drawn with time along x and site 1 at the top.
pub fn heatmap(title: &str, times: &[f64], values: &[Vec<f64>], range: (f64, f64)) -> String {
    let sites = values.first().map_or(0, Vec::len);
    let (cw, ch) = (6.0, 14.0);
    let (left, top) = (40.0, 28.0);
    let w = left + cw * times.len() as f64 + 70.0;
    let h = top + ch * sites as f64 + 36.0;
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\" font-size=\"10\">\n<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"
    );
    let _ = writeln!(out, "<text x=\"{left}\" y=\"16\" font-size=\"12\">{}</text>", escape(title));
    for (t, row) in values.iter().enumerate() {
        for (i, &v) in row.iter().enumerate() {
            let _ = writeln!(
                out,
                "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{cw}\" height=\"{ch}\" fill=\"{}\"/>",
                left + cw * t as f64,
                top + ch * i as f64,
                color(v, range.0, range.1)
            );
        }
    }
    for i in 0..sites {
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>",
            left - 4.0,
            top + ch * (i as f64 + 0.75),
            i + 1
        );
    }
    let base = top + ch * sites as f64 + 14.0;
    if let (Some(first), Some(last)) = (times.first(), times.last()) {
        let _ = writeln!(out, "<text x=\"{left}\" y=\"{base}\">{first:.2}</text>");
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{base}\" text-anchor=\"end\">{last:.2} us</text>",
            left + cw * times.len() as f64
        );
    }
    let lx = left + cw * times.len() as f64 + 12.0;
    for k in 0..=10 {
        let v = range.0 + (range.1 - range.0) * (10 - k) as f64 / 10.0;
        let _ = writeln!(
            out,
            "<rect x=\"{lx}\" y=\"{:.1}\" width=\"12\" height=\"{:.1}\" fill=\"{}\"/>",
            top + k as f64 * ch * sites as f64 / 11.0,
            ch * sites as f64 / 11.0 + 0.5,
            color(v, range.0, range.1)
        );
    }
    let _ = writeln!(out, "<text x=\"{:.1}\" y=\"{:.1}\">{:.2}</text>", lx + 16.0, top + 8.0, range.1);
    let _ = writeln!(out, "<text x=\"{:.1}\" y=\"{:.1}\">{:.2}</text>", lx + 16.0, top + ch * sites as f64, range.0);
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
