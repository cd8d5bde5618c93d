//! Self-contained SVG charts on a fixed 800x500 canvas. No external fonts or
//! scripts; plots are derived artifacts and never feed back into CSV output.

use offsim::HardwareProfile;

const W: f64 = 800.0;
const H: f64 = 500.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;

const COLORS: [&str; 6] = [
    "#4878d0", "#ee854a", "#6acc64", "#d65f5f", "#956cb4", "#8c613c",
];

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn from_points(points: impl Iterator<Item = (f64, f64)>) -> Frame {
        let mut f = Frame {
            x_min: f64::INFINITY,
            x_max: f64::NEG_INFINITY,
            y_min: 0.0,
            y_max: f64::NEG_INFINITY,
        };
        for (x, y) in points {
            f.x_min = f.x_min.min(x);
            f.x_max = f.x_max.max(x);
            f.y_max = f.y_max.max(y);
        }
        if !f.x_min.is_finite() {
            f.x_min = 0.0;
            f.x_max = 1.0;
        }
        if f.x_max == f.x_min {
            f.x_max = f.x_min + 1.0;
        }
        if !f.y_max.is_finite() || f.y_max <= 0.0 {
            f.y_max = 1.0;
        }
        f.y_max *= 1.08;
        f
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN_L + (x - self.x_min) / (self.x_max - self.x_min) * (W - MARGIN_L - MARGIN_R)
    }

    fn py(&self, y: f64) -> f64 {
        H - MARGIN_B - (y - self.y_min) / (self.y_max - self.y_min) * (H - MARGIN_T - MARGIN_B)
    }
}

fn open_svg(title: &str) -> String {
    format!(
        concat!(
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="800" height="500" viewBox="0 0 800 500">"#,
            "\n",
            r##"<rect width="800" height="500" fill="#ffffff"/>"##,
            "\n",
            r##"<text x="400" y="24" text-anchor="middle" font-family="sans-serif" font-size="16" fill="#222">{}</text>"##,
            "\n"
        ),
        escape(title)
    )
}

fn axes(frame: &Frame, x_label: &str, y_label: &str) -> String {
    let mut s = String::new();
    let (x0, y0) = (MARGIN_L, H - MARGIN_B);
    s.push_str(&format!(
        r##"<line x1="{x0}" y1="{y0}" x2="{}" y2="{y0}" stroke="#333"/>"##,
        W - MARGIN_R
    ));
    s.push_str(&format!(
        r##"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{MARGIN_T}" stroke="#333"/>"##
    ));
    for i in 0..=5 {
        let xv = frame.x_min + (frame.x_max - frame.x_min) * i as f64 / 5.0;
        let yv = frame.y_min + (frame.y_max - frame.y_min) * i as f64 / 5.0;
        let px = frame.px(xv);
        let py = frame.py(yv);
        s.push_str(&format!(
            r##"<line x1="{px:.1}" y1="{y0}" x2="{px:.1}" y2="{}" stroke="#333"/>"##,
            y0 + 4.0
        ));
        s.push_str(&format!(
            r##"<text x="{px:.1}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="11" fill="#333">{}</text>"##,
            y0 + 18.0,
            trim_num(xv)
        ));
        s.push_str(&format!(
            r##"<line x1="{}" y1="{py:.1}" x2="{x0}" y2="{py:.1}" stroke="#333"/>"##,
            x0 - 4.0
        ));
        s.push_str(&format!(
            r##"<text x="{}" y="{}" text-anchor="end" font-family="sans-serif" font-size="11" fill="#333">{}</text>"##,
            x0 - 8.0,
            py + 4.0,
            trim_num(yv)
        ));
        s.push('\n');
    }
    s.push_str(&format!(
        r##"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="13" fill="#222">{}</text>"##,
        (MARGIN_L + W - MARGIN_R) / 2.0,
        H - 12.0,
        escape(x_label)
    ));
    s.push_str(&format!(
        r##"<text x="16" y="{}" text-anchor="middle" font-family="sans-serif" font-size="13" fill="#222" transform="rotate(-90 16 {})">{}</text>"##,
        (MARGIN_T + H - MARGIN_B) / 2.0,
        (MARGIN_T + H - MARGIN_B) / 2.0,
        escape(y_label)
    ));
    s.push('\n');
    s
}

/// Multi-series line chart.
pub fn line_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[(String, Vec<(f64, f64)>)],
) -> String {
    let frame = Frame::from_points(series.iter().flat_map(|(_, pts)| pts.iter().copied()));
    let mut s = open_svg(title);
    s.push_str(&axes(&frame, x_label, y_label));
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.1},{:.1}", frame.px(x), frame.py(y)))
            .collect();
        s.push_str(&format!(
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            path.join(" ")
        ));
        s.push('\n');
        for &(x, y) in pts {
            s.push_str(&format!(
                r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{color}"/>"#,
                frame.px(x),
                frame.py(y)
            ));
        }
        s.push('\n');
        let ly = MARGIN_T + 16.0 * i as f64;
        s.push_str(&format!(
            r#"<rect x="{}" y="{}" width="12" height="12" fill="{color}"/>"#,
            W - MARGIN_R - 150.0,
            ly
        ));
        s.push_str(&format!(
            r##"<text x="{}" y="{}" font-family="sans-serif" font-size="12" fill="#222">{}</text>"##,
            W - MARGIN_R - 132.0,
            ly + 10.0,
            escape(name)
        ));
        s.push('\n');
    }
    s.push_str("</svg>\n");
    s
}

/// Single stacked bar of per-category seconds.
pub fn stacked_bar(title: &str, categories: &[(String, f64)]) -> String {
    let total: f64 = categories.iter().map(|(_, v)| v).sum();
    let frame = Frame {
        x_min: 0.0,
        x_max: 1.0,
        y_min: 0.0,
        y_max: (total * 1.08).max(1e-12),
    };
    let mut s = open_svg(title);
    s.push_str(&axes(&frame, "", "seconds"));
    let mut acc = 0.0;
    for (i, (name, v)) in categories.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let y0 = frame.py(acc);
        let y1 = frame.py(acc + v);
        s.push_str(&format!(
            r#"<rect x="{:.1}" y="{y1:.1}" width="160" height="{:.2}" fill="{color}"/>"#,
            frame.px(0.35),
            (y0 - y1).max(0.0)
        ));
        let ly = MARGIN_T + 16.0 * i as f64;
        s.push_str(&format!(
            r#"<rect x="{}" y="{}" width="12" height="12" fill="{color}"/>"#,
            W - MARGIN_R - 210.0,
            ly
        ));
        s.push_str(&format!(
            r##"<text x="{}" y="{}" font-family="sans-serif" font-size="12" fill="#222">{} ({:.4}s)</text>"##,
            W - MARGIN_R - 192.0,
            ly + 10.0,
            escape(name),
            v
        ));
        s.push('\n');
        acc += v;
    }
    s.push_str("</svg>\n");
    s
}

/// Roofline on log-log axes with per-configuration intensity markers.
pub fn roofline_chart(
    title: &str,
    hw: &HardwareProfile,
    i_star: f64,
    markers: &[(String, f64, bool)],
) -> String {
    let roof = hw.eta_comp * hw.p_peak;
    let lx = |i: f64| i.log10();
    let i_lo = i_star / 100.0;
    let i_hi =
        (i_star * 100.0).max(markers.iter().map(|&(_, i, _)| i).fold(i_star, f64::max) * 2.0);
    let frame = Frame {
        x_min: lx(i_lo),
        x_max: lx(i_hi),
        y_min: (roof / 1000.0).log10(),
        y_max: (roof * 2.0).log10(),
    };
    let attain = |i: f64| roof.min(i * hw.eta_pref * hw.bw_h2d);
    let mut s = open_svg(title);
    s.push_str(&axes(
        &frame,
        "operational intensity, log10(FLOP/byte)",
        "attainable, log10(FLOP/s)",
    ));
    let mut pts = Vec::new();
    let mut i = i_lo;
    while i <= i_hi * (1.0 + 1e-12) {
        pts.push(format!(
            "{:.1},{:.1}",
            frame.px(lx(i)),
            frame.py(attain(i).log10().max(frame.y_min))
        ));
        i *= 10f64.powf(0.0625);
    }
    s.push_str(&format!(
        r##"<polyline points="{}" fill="none" stroke="#4878d0" stroke-width="2"/>"##,
        pts.join(" ")
    ));
    s.push('\n');
    // Turning point.
    s.push_str(&format!(
        r##"<line x1="{x:.1}" y1="{}" x2="{x:.1}" y2="{}" stroke="#999" stroke-dasharray="4 3"/>"##,
        H - MARGIN_B,
        MARGIN_T,
        x = frame.px(lx(i_star))
    ));
    s.push_str(&format!(
        r##"<text x="{:.1}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12" fill="#555">I*</text>"##,
        frame.px(lx(i_star)),
        MARGIN_T - 6.0
    ));
    s.push('\n');
    for (label, intensity, hidden) in markers {
        let color = if *hidden { "#6acc64" } else { "#d65f5f" };
        let x = frame.px(lx(*intensity));
        let y = frame.py(attain(*intensity).log10().max(frame.y_min));
        s.push_str(&format!(
            r#"<circle cx="{x:.1}" cy="{y:.1}" r="5" fill="{color}"/>"#
        ));
        s.push_str(&format!(
            r##"<text x="{x:.1}" y="{:.1}" text-anchor="middle" font-family="sans-serif" font-size="11" fill="#333">{}</text>"##,
            y - 10.0,
            escape(label)
        ));
        s.push('\n');
    }
    s.push_str("</svg>\n");
    s
}

fn trim_num(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let a = v.abs();
    if !(0.01..1000.0).contains(&a) {
        format!("{v:.2e}")
    } else if a >= 10.0 {
        format!("{v:.1}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
