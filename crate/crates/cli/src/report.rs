//! Minimal SVG line plots and heatmaps.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

pub struct Series<'a> {
    pub name: &'a str,
    pub x: &'a [f64],
    pub y: &'a [f64],
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn range(v: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = v
        .filter(|x| x.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-300 {
        return (lo - 0.5, hi + 0.5);
    }
    (lo, hi)
}

fn header(out: &mut String, title: &str, xlabel: &str, ylabel: &str) {
    let _ = write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">
<rect width="100%" height="100%" fill="white"/>
<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>
<text x="{}" y="{}" text-anchor="middle">{}</text>
<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>
"#,
        W / 2.0,
        esc(title),
        LEFT + (W - LEFT - RIGHT) / 2.0,
        H - 14.0,
        esc(xlabel),
        TOP + (H - TOP - BOTTOM) / 2.0,
        TOP + (H - TOP - BOTTOM) / 2.0,
        esc(ylabel)
    );
}

fn ticks(out: &mut String, xr: (f64, f64), yr: (f64, f64), log_y: bool) {
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let _ = writeln!(
        out,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let x = LEFT + f * pw;
        let xv = xr.0 + f * (xr.1 - xr.0);
        let _ = writeln!(
            out,
            r#"<line x1="{x:.1}" y1="{}" x2="{x:.1}" y2="{}" stroke="black"/><text x="{x:.1}" y="{}" text-anchor="middle">{}</text>"#,
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 18.0,
            fmt_num(xv)
        );
        let y = TOP + ph - f * ph;
        let yv = yr.0 + f * (yr.1 - yr.0);
        let label = if log_y { fmt_num(10f64.powf(yv)) } else { fmt_num(yv) };
        let _ = writeln!(
            out,
            r#"<line x1="{}" y1="{y:.1}" x2="{LEFT}" y2="{y:.1}" stroke="black"/><text x="{}" y="{:.1}" text-anchor="end">{label}</text>"#,
            LEFT - 5.0,
            LEFT - 8.0,
            y + 4.0
        );
    }
}

fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-2 {
        format!("{v:.1e}")
    } else {
        format!("{v:.3}")
    }
}

/// Line plot of several series; `log_y` plots `log₁₀ y` (non-positive values skipped).
pub fn line_plot(title: &str, xlabel: &str, ylabel: &str, series: &[Series<'_>], log_y: bool) -> String {
    let ty = |y: f64| if log_y { if y > 0.0 { y.log10() } else { f64::NAN } } else { y };
    let xr = range(series.iter().flat_map(|s| s.x.iter().copied()));
    let yr = range(series.iter().flat_map(|s| s.y.iter().map(|&y| ty(y))));
    let mut out = String::new();
    header(&mut out, title, xlabel, ylabel);
    ticks(&mut out, xr, yr, log_y);
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    for (k, s) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<String> = s
            .x
            .iter()
            .zip(s.y)
            .filter_map(|(&x, &y)| {
                let y = ty(y);
                y.is_finite().then(|| {
                    let px = LEFT + (x - xr.0) / (xr.1 - xr.0) * pw;
                    let py = TOP + ph - (y - yr.0) / (yr.1 - yr.0) * ph;
                    format!("{px:.2},{py:.2}")
                })
            })
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            pts.join(" ")
        );
        let ly = TOP + 16.0 + 16.0 * k as f64;
        let _ = writeln!(
            out,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            W - RIGHT - 150.0,
            W - RIGHT - 125.0,
            W - RIGHT - 120.0,
            ly + 4.0,
            esc(s.name)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn colormap(f: f64) -> String {
    // dark blue → teal → yellow
    let stops = [(0.0, [68.0, 1.0, 84.0]), (0.5, [33.0, 145.0, 140.0]), (1.0, [253.0, 231.0, 37.0])];
    let f = if f.is_finite() { f.clamp(0.0, 1.0) } else { 0.0 };
    let (a, b) = if f <= 0.5 { (stops[0], stops[1]) } else { (stops[1], stops[2]) };
    let t = (f - a.0) / (b.0 - a.0);
    let c: Vec<u8> = (0..3).map(|i| (a.1[i] + t * (b.1[i] - a.1[i])).round() as u8).collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

/// Heatmap of `z[i][j]` at `(x[i], y[j])`; cells with non-finite values are grey.
pub fn heatmap(title: &str, xlabel: &str, ylabel: &str, x: &[f64], y: &[f64], z: &[Vec<f64>]) -> String {
    let xr = range(x.iter().copied());
    let yr = range(y.iter().copied());
    let zr = range(z.iter().flatten().copied());
    let mut out = String::new();
    header(&mut out, title, xlabel, ylabel);
    let pw = W - LEFT - RIGHT - 60.0;
    let ph = H - TOP - BOTTOM;
    let cw = pw / x.len().max(1) as f64;
    let ch = ph / y.len().max(1) as f64;
    for (i, row) in z.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let fill = if v.is_finite() { colormap((v - zr.0) / (zr.1 - zr.0)) } else { "#bbbbbb".into() };
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{fill}"/>"#,
                LEFT + i as f64 * cw,
                TOP + ph - (j + 1) as f64 * ch,
                cw + 0.3,
                ch + 0.3
            );
        }
    }
    let _ = writeln!(
        out,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text><text x="{}" y="{:.1}" text-anchor="end">{}</text>"#,
            LEFT + f * pw,
            TOP + ph + 18.0,
            fmt_num(xr.0 + f * (xr.1 - xr.0)),
            LEFT - 8.0,
            TOP + ph - f * ph + 4.0,
            fmt_num(yr.0 + f * (yr.1 - yr.0))
        );
    }
    // colour bar
    let bx = LEFT + pw + 20.0;
    for k in 0..50 {
        let f = k as f64 / 49.0;
        let _ = writeln!(
            out,
            r#"<rect x="{bx}" y="{:.2}" width="14" height="{:.2}" fill="{}"/>"#,
            TOP + ph - (k + 1) as f64 * ph / 50.0,
            ph / 50.0 + 0.3,
            colormap(f)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-size="10">{}</text><text x="{}" y="{}" font-size="10">{}</text>"#,
        bx - 6.0,
        TOP - 4.0,
        fmt_num(zr.1),
        bx - 6.0,
        TOP + ph + 14.0,
        fmt_num(zr.0)
    );
    out.push_str("</svg>\n");
    out
}
