//! Tiny dependency-free SVG writers for the report artifacts: line charts of
//! training/trajectory series and a fixed-scale bar chart of robustness pass
//! rates.

const W: f64 = 800.0;
const H: f64 = 480.0;
const ML: f64 = 70.0; // margins
const MR: f64 = 20.0;
const MT: f64 = 40.0;
const MB: f64 = 55.0;

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {W} {H}\" \
         font-family=\"sans-serif\" font-size=\"13\">\n\
         <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <text x=\"{:.1}\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">{}</text>\n",
        W / 2.0,
        esc(title)
    )
}

fn axes(x_label: &str, y_label: &str) -> String {
    format!(
        "<line x1=\"{ML}\" y1=\"{MT}\" x2=\"{ML}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <line x1=\"{ML}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <text x=\"{cx:.1}\" y=\"{by:.1}\" text-anchor=\"middle\">{xl}</text>\n\
         <text x=\"16\" y=\"{cy:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {cy:.1})\">{yl}</text>\n",
        b = H - MB,
        r = W - MR,
        cx = ML + (W - ML - MR) / 2.0,
        by = H - 12.0,
        cy = MT + (H - MT - MB) / 2.0,
        xl = esc(x_label),
        yl = esc(y_label),
    )
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1000.0 || v.abs() < 0.01 {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// Line chart of one or more named `(x, y)` series on shared axes. Ranges
/// are fitted to the data; non-finite points are dropped.
pub fn line_chart(series: &[(String, Vec<(f64, f64)>)], title: &str, x_label: &str, y_label: &str) -> String {
    let mut pts: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|(_, s)| s.iter().copied())
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .collect();
    let mut out = header(title);
    out.push_str(&axes(x_label, y_label));
    if pts.is_empty() {
        out.push_str("</svg>\n");
        return out;
    }
    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x1 - x0 < 1e-12 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if y1 - y0 < 1e-12 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let sx = |x: f64| ML + (x - x0) / (x1 - x0) * (W - ML - MR);
    let sy = |y: f64| (H - MB) - (y - y0) / (y1 - y0) * (H - MT - MB);
    for i in 0..=4 {
        let yv = y0 + (y1 - y0) * i as f64 / 4.0;
        let y = sy(yv);
        out.push_str(&format!(
            "<line x1=\"{ML}\" y1=\"{y:.1}\" x2=\"{r}\" y2=\"{y:.1}\" stroke=\"#ddd\"/>\n\
             <text x=\"{tx:.1}\" y=\"{ty:.1}\" text-anchor=\"end\">{v}</text>\n",
            r = W - MR,
            tx = ML - 6.0,
            ty = y + 4.0,
            v = fmt_tick(yv)
        ));
        let xv = x0 + (x1 - x0) * i as f64 / 4.0;
        out.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n",
            sx(xv),
            H - MB + 18.0,
            fmt_tick(xv)
        ));
    }
    for (k, (name, s)) in series.iter().enumerate() {
        pts = s
            .iter()
            .copied()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .collect();
        if pts.is_empty() {
            continue;
        }
        let color = PALETTE[k % PALETTE.len()];
        let coords: Vec<String> =
            pts.iter().map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y))).collect();
        out.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
            coords.join(" ")
        ));
        if series.len() > 1 {
            let ly = MT + 16.0 * k as f64;
            out.push_str(&format!(
                "<line x1=\"{x}\" y1=\"{ly:.1}\" x2=\"{x2}\" y2=\"{ly:.1}\" stroke=\"{color}\" stroke-width=\"2\"/>\n\
                 <text x=\"{tx}\" y=\"{ty:.1}\">{n}</text>\n",
                x = W - MR - 130.0,
                x2 = W - MR - 110.0,
                tx = W - MR - 104.0,
                ty = ly + 4.0,
                n = esc(name)
            ));
        }
    }
    out.push_str("</svg>\n");
    out
}

/// Bar chart of `(label, fraction)` pairs on a fixed 0–100 % axis, so charts
/// from different runs are visually comparable. Fractions are clamped to
/// [0, 1].
pub fn bar_chart_percent(categories: &[(String, f64)], title: &str) -> String {
    let mut out = header(title);
    out.push_str(&axes("", "pass rate (%)"));
    for i in 0..=4 {
        let pct = 25.0 * i as f64;
        let y = (H - MB) - pct / 100.0 * (H - MT - MB);
        out.push_str(&format!(
            "<line x1=\"{ML}\" y1=\"{y:.1}\" x2=\"{r}\" y2=\"{y:.1}\" stroke=\"#ddd\"/>\n\
             <text x=\"{tx:.1}\" y=\"{ty:.1}\" text-anchor=\"end\">{pct}</text>\n",
            r = W - MR,
            tx = ML - 6.0,
            ty = y + 4.0,
        ));
    }
    if categories.is_empty() {
        out.push_str("</svg>\n");
        return out;
    }
    let span = W - ML - MR;
    let slot = span / categories.len() as f64;
    let bar_w = slot * 0.6;
    for (i, (name, frac)) in categories.iter().enumerate() {
        let f = frac.clamp(0.0, 1.0);
        let x = ML + slot * i as f64 + (slot - bar_w) / 2.0;
        let h = f * (H - MT - MB);
        let y = (H - MB) - h;
        let color = PALETTE[i % PALETTE.len()];
        out.push_str(&format!(
            "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{bar_w:.1}\" height=\"{h:.1}\" fill=\"{color}\"/>\n\
             <text x=\"{cx:.1}\" y=\"{ly:.1}\" text-anchor=\"middle\">{n}</text>\n\
             <text x=\"{cx:.1}\" y=\"{vy:.1}\" text-anchor=\"middle\">{pct:.0}%</text>\n",
            cx = x + bar_w / 2.0,
            ly = H - MB + 18.0,
            vy = (y - 6.0).max(MT + 10.0),
            n = esc(name),
            pct = f * 100.0,
        ));
    }
    out.push_str("</svg>\n");
    out
}
