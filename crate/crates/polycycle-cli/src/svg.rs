use std::fmt::Write;

use polycycle::polyalg::Point2;

#[derive(Debug, Default)]
pub struct Scene {
    pub polygon: Option<Vec<Point2>>,
    pub separatrices: Vec<Vec<Point2>>,
    pub trajectories: Vec<Vec<Point2>>,
    pub cycles: Vec<Vec<Point2>>,
    pub boundaries: Vec<Vec<Point2>>,
}

struct View {
    x0: f64,
    y1: f64,
    scale: f64,
}

impl View {
    fn map(&self, p: Point2) -> (f64, f64) {
        ((p[0] - self.x0) * self.scale, (self.y1 - p[1]) * self.scale)
    }
}

fn bounds(scene: &Scene) -> [f64; 4] {
    // the polygon frames the picture; stray trajectories are clipped
    let frame: Vec<&Point2> = match &scene.polygon {
        Some(p) => p.iter().collect(),
        None => scene.trajectories.iter().flatten().collect(),
    };
    let mut b = [
        f64::INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::NEG_INFINITY,
    ];
    for p in frame
        .iter()
        .filter(|p| p[0].is_finite() && p[1].is_finite())
    {
        b = [
            b[0].min(p[0]),
            b[1].min(p[1]),
            b[2].max(p[0]),
            b[3].max(p[1]),
        ];
    }
    if !b[0].is_finite() {
        return [-1.0, -1.0, 1.0, 1.0];
    }
    let pad = 0.12 * (b[2] - b[0]).max(b[3] - b[1]).max(1e-9);
    [b[0] - pad, b[1] - pad, b[2] + pad, b[3] + pad]
}

fn path(view: &View, pts: &[Point2], closed: bool) -> String {
    let mut d = String::new();
    for (k, p) in pts
        .iter()
        .filter(|p| p[0].is_finite() && p[1].is_finite())
        .enumerate()
    {
        let (x, y) = view.map(*p);
        let _ = write!(d, "{}{x:.3},{y:.3}", if k == 0 { "M" } else { " L" });
    }
    if closed {
        d.push_str(" Z");
    }
    d
}

/// Static SVG of the scene; identical scenes give identical bytes.
pub fn render(scene: &Scene, size: u32) -> String {
    let [x0, y0, x1, y1] = bounds(scene);
    let span = (x1 - x0).max(y1 - y0);
    let scale = size as f64 / span;
    let view = View { x0, y1, scale };
    let (w, h) = ((x1 - x0) * scale, (y1 - y0) * scale);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.3} {h:.3}">"#
    );
    let _ = writeln!(s, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    for b in &scene.boundaries {
        let _ = writeln!(
            s,
            r##"<path class="boundary" d="{}" fill="none" stroke="#2b8a3e" stroke-width="1.2" stroke-dasharray="5,3"/>"##,
            path(&view, b, true)
        );
    }
    for t in &scene.trajectories {
        let _ = writeln!(
            s,
            r##"<path class="trajectory" d="{}" fill="none" stroke="#868e96" stroke-width="0.8"/>"##,
            path(&view, t, false)
        );
    }
    for t in &scene.separatrices {
        let _ = writeln!(
            s,
            r##"<path class="separatrix" d="{}" fill="none" stroke="#1c7ed6" stroke-width="1"/>"##,
            path(&view, t, false)
        );
    }
    if let Some(p) = &scene.polygon {
        let _ = writeln!(
            s,
            r##"<path class="polycycle" d="{}" fill="none" stroke="#212529" stroke-width="1.5"/>"##,
            path(&view, p, true)
        );
        for (k, v) in p.iter().enumerate() {
            let (x, y) = view.map(*v);
            let _ = writeln!(
                s,
                r##"<circle cx="{x:.3}" cy="{y:.3}" r="3.5" fill="#212529"/>"##
            );
            // label pushed away from the centroid
            let c = centroid(p);
            let (dx, dy) = (v[0] - c[0], v[1] - c[1]);
            let l = dx.hypot(dy).max(1e-12);
            let (lx, ly) = (x + 14.0 * dx / l - 8.0, y - 14.0 * dy / l + 5.0);
            let _ = writeln!(
                s,
                r#"<text x="{lx:.3}" y="{ly:.3}" font-family="sans-serif" font-size="13">p{}</text>"#,
                k + 1
            );
        }
    }
    for c in &scene.cycles {
        let _ = writeln!(
            s,
            r##"<path class="cycle" d="{}" fill="none" stroke="#e03131" stroke-width="1.8"/>"##,
            path(&view, c, true)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn centroid(p: &[Point2]) -> Point2 {
    let n = p.len().max(1) as f64;
    [
        p.iter().map(|v| v[0]).sum::<f64>() / n,
        p.iter().map(|v| v[1]).sum::<f64>() / n,
    ]
}
