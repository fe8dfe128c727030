//! Static SVG plots drawn only from a [`RunArtifact`].

use std::fmt::Write as _;

use parking_scvx::scvx::IterationRecord;
use parking_scvx::CarState;

use crate::artifact::RunArtifact;

const SEGMENT_COLORS: [&str; 3] = ["#1f77b4", "#d62728", "#2ca02c"];
const WIDTH: f64 = 800.0;
const PAD: f64 = 40.0;
const TICK: f64 = 0.3;

struct Frame {
    x0: f64,
    y1: f64,
    scale: f64,
}

impl Frame {
    fn px(&self, x: f64, y: f64) -> (f64, f64) {
        (PAD + (x - self.x0) * self.scale, PAD + (self.y1 - y) * self.scale)
    }

    fn points(&self, pts: impl Iterator<Item = (f64, f64)>) -> String {
        let mut s = String::new();
        for (x, y) in pts {
            let (u, v) = self.px(x, y);
            write!(s, "{u:.2},{v:.2} ").unwrap();
        }
        s.trim_end().to_string()
    }
}

fn bbox(a: &RunArtifact) -> (f64, f64, f64, f64) {
    let mut b = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut add = |x: f64, y: f64| {
        if x.is_finite() && y.is_finite() {
            b = (b.0.min(x), b.1.min(y), b.2.max(x), b.3.max(y));
        }
    };
    for p in a.dense.iter().map(|d| &d.state).chain(&a.rs_baseline.samples) {
        add(p.x_w, p.y_w);
    }
    for r in &a.scenario.obstacles {
        add(r.x.0, r.y.0);
        add(r.x.1, r.y.1);
    }
    add(a.scenario.start.x_w, a.scenario.start.y_w);
    add(a.goal.x_w, a.goal.y_w);
    (b.0 - 1.0, b.1 - 1.0, b.2 + 1.0, b.3 + 1.0)
}

fn pose_marker(s: &mut String, f: &Frame, p: &CarState, color: &str) {
    let (u, v) = f.px(p.x_w, p.y_w);
    let (hu, hv) = f.px(p.x_w + 2.0 * TICK * p.theta.cos(), p.y_w + 2.0 * TICK * p.theta.sin());
    writeln!(s, r##"<circle cx="{u:.2}" cy="{v:.2}" r="5" fill="{color}"/>"##).unwrap();
    writeln!(s, r##"<line x1="{u:.2}" y1="{v:.2}" x2="{hu:.2}" y2="{hv:.2}" stroke="{color}" stroke-width="2.5"/>"##).unwrap();
}

/// Trajectory plot: curve sections color coded, obstacles hatched, the
/// Reeds-Shepp path dashed, heading ticks at the knots.
pub fn trajectory_svg(a: &RunArtifact) -> String {
    let (xmin, ymin, xmax, ymax) = bbox(a);
    let scale = (WIDTH - 2.0 * PAD) / (xmax - xmin);
    let height = (ymax - ymin) * scale + 2.0 * PAD;
    let f = Frame { x0: xmin, y1: ymax, scale };
    let mut s = String::new();
    writeln!(s, r##"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH:.0}" height="{height:.0}" viewBox="0 0 {WIDTH:.0} {height:.0}">"##).unwrap();
    s.push_str(concat!(
        r##"<defs><pattern id="hatch" width="8" height="8" patternUnits="userSpaceOnUse" patternTransform="rotate(45)">"##,
        r##"<line x1="0" y1="0" x2="0" y2="8" stroke="#555" stroke-width="2"/></pattern></defs>"##,
        "\n",
        r##"<rect width="100%" height="100%" fill="white"/>"##,
        "\n"
    ));
    for r in &a.scenario.obstacles {
        let (u, v) = f.px(r.x.0, r.y.1);
        let (w, h) = ((r.x.1 - r.x.0) * scale, (r.y.1 - r.y.0) * scale);
        writeln!(s, r##"<rect x="{u:.2}" y="{v:.2}" width="{w:.2}" height="{h:.2}" fill="url(#hatch)" stroke="#333"/>"##).unwrap();
    }
    let rs = f.points(a.rs_baseline.samples.iter().map(|p| (p.x_w, p.y_w)));
    writeln!(s, r##"<polyline points="{rs}" fill="none" stroke="#777" stroke-width="1.5" stroke-dasharray="6 4"/>"##).unwrap();
    for (i, seg) in a.segments.iter().enumerate() {
        let color = SEGMENT_COLORS[i % SEGMENT_COLORS.len()];
        let pts = f.points(a.dense.iter().filter(|d| d.segment == i).map(|d| (d.state.x_w, d.state.y_w)));
        writeln!(s, r##"<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2.5"/>"##).unwrap();
        for p in &seg.states {
            let (u, v) = f.px(p.x_w, p.y_w);
            let (hu, hv) = f.px(p.x_w + TICK * p.theta.cos(), p.y_w + TICK * p.theta.sin());
            writeln!(s, r##"<line x1="{u:.2}" y1="{v:.2}" x2="{hu:.2}" y2="{hv:.2}" stroke="{color}" stroke-width="1"/>"##).unwrap();
        }
    }
    pose_marker(&mut s, &f, &a.scenario.start, "#000");
    pose_marker(&mut s, &f, &a.goal, "#ff7f0e");
    let r = &a.report;
    writeln!(
        s,
        r##"<text x="{PAD}" y="20" font-family="monospace" font-size="13">{}: T {:.2} s, length {:.2} m, cusps {}, RS {} {:.2} m</text>"##,
        a.scenario.name, r.duration, r.path_length, r.cusps, a.rs_baseline.word, a.rs_baseline.length
    )
    .unwrap();
    s.push_str("</svg>\n");
    s
}

struct Series<'a> {
    label: &'a str,
    color: &'a str,
    values: Vec<f64>,
}

const PANEL_H: f64 = 180.0;
const FLOOR: f64 = 1e-16;

fn panel(s: &mut String, top: f64, title: &str, series: &[Series]) {
    let logs: Vec<Vec<f64>> =
        series.iter().map(|se| se.values.iter().map(|v| v.abs().max(FLOOR).log10()).collect()).collect();
    let all = logs.iter().flatten().copied();
    let lo = all.clone().fold(f64::INFINITY, f64::min).floor();
    let hi = all.fold(f64::NEG_INFINITY, f64::max).ceil().max(lo + 1.0);
    let n = series.iter().map(|se| se.values.len()).max().unwrap_or(1).max(2);
    let xs = |i: usize| PAD + i as f64 * (WIDTH - 2.0 * PAD) / (n - 1) as f64;
    let ys = |l: f64| top + PANEL_H * (hi - l) / (hi - lo);
    writeln!(s, r##"<rect x="{PAD}" y="{top}" width="{:.0}" height="{PANEL_H}" fill="none" stroke="#999"/>"##, WIDTH - 2.0 * PAD).unwrap();
    writeln!(s, r##"<text x="{PAD}" y="{:.0}" font-family="monospace" font-size="12">{title} (log10, {lo:.0} to {hi:.0})</text>"##, top - 6.0).unwrap();
    for (k, (se, l)) in series.iter().zip(&logs).enumerate() {
        let pts: Vec<String> = l.iter().enumerate().map(|(i, &v)| format!("{:.2},{:.2}", xs(i), ys(v))).collect();
        writeln!(s, r##"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"/>"##, pts.join(" "), se.color).unwrap();
        writeln!(
            s,
            r##"<text x="{:.0}" y="{:.0}" font-family="monospace" font-size="11" fill="{}">{}</text>"##,
            WIDTH - PAD - 150.0,
            top + 14.0 * (k + 1) as f64,
            se.color,
            se.label
        )
        .unwrap();
    }
}

/// Convergence plot: cost terms, virtual control norm and trust radius
/// against the iteration count.
pub fn history_svg(history: &[IterationRecord]) -> String {
    let col = |f: fn(&IterationRecord) -> f64| history.iter().map(f).collect::<Vec<_>>();
    let height = 3.0 * (PANEL_H + PAD) + PAD;
    let mut s = String::new();
    writeln!(s, r##"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH:.0}" height="{height:.0}" viewBox="0 0 {WIDTH:.0} {height:.0}">"##).unwrap();
    s.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    panel(
        &mut s,
        PAD,
        "cost",
        &[
            Series { label: "reference", color: "#000", values: col(|h| h.reference_cost) },
            Series { label: "time", color: "#1f77b4", values: col(|h| h.candidate_cost.sigma) },
            Series { label: "defect", color: "#d62728", values: col(|h| h.candidate_cost.nu) },
            Series { label: "jerk", color: "#2ca02c", values: col(|h| h.candidate_cost.jerk) },
        ],
    );
    panel(
        &mut s,
        2.0 * PAD + PANEL_H,
        "virtual control l1 norm",
        &[Series { label: "|nu|_1", color: "#d62728", values: col(|h| h.nu_norm) }],
    );
    panel(
        &mut s,
        3.0 * PAD + 2.0 * PANEL_H,
        "trust radius",
        &[Series { label: "radius", color: "#9467bd", values: col(|h| h.trust_radius) }],
    );
    s.push_str("</svg>\n");
    s
}
