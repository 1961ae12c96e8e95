use serde::{Deserialize, Serialize};

use crate::builder::BuiltPolycycle;
use crate::error::{Error, Result};
use crate::par::Exec;
use crate::polyalg::{dot, norm, sub, PlanarField, Point2};

fn seg_dist(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = sub(b, a);
    let l2 = dot(ab, ab);
    let t = if l2 == 0.0 {
        0.0
    } else {
        (dot(sub(p, a), ab) / l2).clamp(0.0, 1.0)
    };
    norm(sub(p, [a[0] + t * ab[0], a[1] + t * ab[1]]))
}

/// Distance from `p` to the polyline through `pts`.
pub fn point_to_polyline(p: Point2, pts: &[Point2]) -> f64 {
    match pts.len() {
        0 => f64::INFINITY,
        1 => norm(sub(p, pts[0])),
        _ => pts
            .windows(2)
            .map(|w| seg_dist(p, w[0], w[1]))
            .fold(f64::INFINITY, f64::min),
    }
}

/// Distances from `p` to each segment of `pts` (or to its single point).
fn piece_distances(p: Point2, pts: &[Point2], out: &mut Vec<f64>) {
    out.clear();
    if pts.len() == 1 {
        out.push(norm(sub(p, pts[0])));
    } else {
        out.extend(pts.windows(2).map(|w| seg_dist(p, w[0], w[1])));
    }
}

/// Largest distance from a point of segment [a, b] to the polyline `pts`.
/// Each per-piece distance is convex along the segment, so on a cell it is
/// bounded by its larger end value; the minimum of those bounds caps the
/// distance on the cell. Cells whose cap cannot beat the best value found
/// so far are discarded, the rest are halved.
fn segment_sup(a: Point2, b: Point2, pts: &[Point2], cells: usize) -> f64 {
    let point = |t: f64| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
    let eval = |t: f64| {
        let mut d = Vec::with_capacity(pts.len());
        piece_distances(point(t), pts, &mut d);
        d
    };
    let lower = |d: &[f64]| d.iter().cloned().fold(f64::INFINITY, f64::min);
    let cap = |d0: &[f64], d1: &[f64]| {
        d0.iter()
            .zip(d1)
            .map(|(x, y)| x.max(*y))
            .fold(f64::INFINITY, f64::min)
    };
    let k = cells.max(1);
    let samples: Vec<(f64, Vec<f64>)> = (0..=k)
        .map(|i| {
            let t = i as f64 / k as f64;
            (t, eval(t))
        })
        .collect();
    let mut best = samples.iter().map(|(_, d)| lower(d)).fold(0.0, f64::max);
    let tol = 1e-13 * (1.0 + best);
    let mut stack: Vec<(f64, Vec<f64>, f64, Vec<f64>)> = samples
        .windows(2)
        .map(|w| (w[0].0, w[0].1.clone(), w[1].0, w[1].1.clone()))
        .collect();
    while let Some((t0, d0, t1, d1)) = stack.pop() {
        if cap(&d0, &d1) <= best + tol || t1 - t0 < 1e-15 {
            continue;
        }
        let tm = 0.5 * (t0 + t1);
        let dm = eval(tm);
        best = best.max(lower(&dm));
        stack.push((t0, d0, tm, dm.clone()));
        stack.push((tm, dm, t1, d1));
    }
    best
}

fn directed(a: &[Point2], b: &[Point2], exec: Exec) -> f64 {
    if a.len() == 1 {
        return point_to_polyline(a[0], b);
    }
    exec.map_range(a.len() - 1, |i| segment_sup(a[i], a[i + 1], b, 8))
        .into_iter()
        .fold(0.0, f64::max)
}

/// Hausdorff distance between two sampled curves, each read as the polyline
/// through its samples.
pub fn hausdorff_distance(a: &[Point2], b: &[Point2]) -> Result<f64> {
    hausdorff_distance_with(a, b, Exec::default())
}

pub fn hausdorff_distance_with(a: &[Point2], b: &[Point2], exec: Exec) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Invalid(
            "Hausdorff distance needs nonempty samples".into(),
        ));
    }
    Ok(directed(a, b, exec).max(directed(b, a, exec)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContactDirection {
    Inward,
    Outward,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactVerdict {
    pub without_contact: bool,
    /// Majority direction of the flow across the curve.
    pub direction: ContactDirection,
    /// Smallest |⟨X, outward normal⟩| / ‖X‖ over the samples.
    pub min_margin: f64,
}

/// Samples a closed, counterclockwise polyline at `samples` points evenly
/// spaced in arclength and tests whether the field crosses it one way only.
pub fn check_without_contact<F: PlanarField>(
    f: &F,
    curve: &[Point2],
    samples: usize,
) -> Result<ContactVerdict> {
    let mut pts = curve.to_vec();
    if pts.len() < 3 {
        return Err(Error::Invalid(
            "closed curve needs at least three points".into(),
        ));
    }
    if pts.first() != pts.last() {
        pts.push(pts[0]);
    }
    let seg: Vec<f64> = pts.windows(2).map(|w| norm(sub(w[1], w[0]))).collect();
    let total: f64 = seg.iter().sum();
    if total == 0.0 || samples == 0 {
        return Err(Error::Invalid("degenerate curve".into()));
    }
    let mut pos = 0usize;
    let mut before = 0.0;
    let mut pos_count = 0usize;
    let mut neg_count = 0usize;
    let mut min_margin = f64::INFINITY;
    for k in 0..samples {
        let s = (k as f64 + 0.5) / samples as f64 * total;
        while pos + 1 < seg.len() && before + seg[pos] < s {
            before += seg[pos];
            pos += 1;
        }
        let (a, b) = (pts[pos], pts[pos + 1]);
        let t = if seg[pos] > 0.0 {
            (s - before) / seg[pos]
        } else {
            0.0
        };
        let x = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
        let d = sub(b, a);
        let normal = [d[1] / seg[pos], -d[0] / seg[pos]];
        let v = f.eval(x);
        let speed = norm(v);
        if speed == 0.0 {
            return Err(Error::Numerical(format!(
                "field vanishes on the curve at ({}, {})",
                x[0], x[1]
            )));
        }
        let m = dot(v, normal) / speed;
        if m > 0.0 {
            pos_count += 1;
        } else if m < 0.0 {
            neg_count += 1;
        }
        min_margin = min_margin.min(m.abs());
    }
    Ok(ContactVerdict {
        without_contact: pos_count == samples || neg_count == samples,
        direction: if pos_count >= neg_count {
            ContactDirection::Outward
        } else {
            ContactDirection::Inward
        },
        min_margin,
    })
}

/// Even-odd point-in-polygon test.
pub fn polygon_contains(poly: &[Point2], p: Point2) -> bool {
    let n = poly.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a[1] > p[1]) != (b[1] > p[1])
            && p[0] < (b[0] - a[0]) * (p[1] - a[1]) / (b[1] - a[1]) + a[0]
        {
            inside = !inside;
        }
        j = i;
    }
    inside
}

/// The builder polygon pulled inward by `gap`, closed.
pub fn inward_offset(b: &BuiltPolycycle, gap: f64) -> Vec<Point2> {
    let apothem = (std::f64::consts::PI / b.n() as f64).cos();
    let k = (apothem - gap) / apothem;
    let mut v: Vec<Point2> = b.vertices.iter().map(|p| [k * p[0], k * p[1]]).collect();
    v.push(v[0]);
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrappingMethod {
    PolygonOffset {
        gap: f64,
    },
    /// Level set Π l_j^{w_j} · exp(Σ c_k m_k) = e^level with monomials m_k.
    LevelSet {
        weights: Vec<f64>,
        monomials: Vec<(u32, u32)>,
        coefficients: Vec<f64>,
        level: f64,
        gap: f64,
        lp_margin: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrappingCurve {
    pub curve: Vec<Point2>,
    pub method: TrappingMethod,
    pub verdict: ContactVerdict,
    pub attempts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrappingOptions {
    pub offsets: Vec<f64>,
    pub level_gaps: Vec<f64>,
    pub monomial_degree: u32,
    pub samples: usize,
    pub rays: usize,
    pub lp_samples_per_edge: usize,
}

impl Default for TrappingOptions {
    fn default() -> Self {
        TrappingOptions {
            offsets: vec![0.05, 0.025, 0.0125, 0.00625, 0.005],
            level_gaps: vec![0.05, 0.02, 0.01, 0.005, 0.002],
            monomial_degree: 2,
            samples: 2000,
            rays: 720,
            lp_samples_per_edge: 300,
        }
    }
}

fn monomials(deg: u32) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    for d in 1..=deg {
        for i in (0..=d).rev() {
            out.push((i, d - i));
        }
    }
    out
}

fn mono_grad(m: (u32, u32), x: Point2) -> [f64; 2] {
    let (i, j) = m;
    let gx = if i > 0 {
        i as f64 * x[0].powi(i as i32 - 1) * x[1].powi(j as i32)
    } else {
        0.0
    };
    let gy = if j > 0 {
        j as f64 * x[0].powi(i as i32) * x[1].powi(j as i32 - 1)
    } else {
        0.0
    };
    [gx, gy]
}

struct LevelFunction {
    weights: Vec<f64>,
    monos: Vec<(u32, u32)>,
    coeffs: Vec<f64>,
}

impl LevelFunction {
    fn ln_v(&self, b: &BuiltPolycycle, x: Point2) -> f64 {
        let mut s = 0.0;
        for (w, l) in self.weights.iter().zip(&b.lines) {
            let v = l.eval(x);
            if v <= 0.0 {
                return f64::NEG_INFINITY;
            }
            s += w * v.ln();
        }
        for (c, &(i, j)) in self.coeffs.iter().zip(&self.monos) {
            s += c * x[0].powi(i as i32) * x[1].powi(j as i32);
        }
        s
    }
}

/// Chooses weights and monomial coefficients by linear programming so that
/// d(ln V)/dt / ‖X‖ is as negative as possible in the limit along the sides
/// of the unperturbed polycycle. With `outward` false the sign is reversed.
fn fit_level_function(
    b: &BuiltPolycycle,
    deg: u32,
    per_edge: usize,
    outward: bool,
) -> Result<(LevelFunction, f64)> {
    use microlp::{ComparisonOp, OptimizationDirection, Problem};
    let n = b.n();
    let f = &b.factored;
    let monos = monomials(deg);
    let sign = if outward { 1.0 } else { -1.0 };
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for s in 0..n {
        let a = b.vertices[(s + 1) % n];
        let e = b.vertices[s];
        let ns = b.lines[s].normal();
        for k in 1..=per_edge {
            let t = k as f64 / (per_edge + 1) as f64;
            let x = [a[0] + t * (e[0] - a[0]), a[1] + t * (e[1] - a[1])];
            let v = f.eval(x);
            let sp = norm(v);
            let mut row = Vec::with_capacity(n + monos.len());
            for j in 0..n {
                if j == s {
                    let jac = f.jacobian(x);
                    let jn = [
                        jac[0][0] * ns[0] + jac[0][1] * ns[1],
                        jac[1][0] * ns[0] + jac[1][1] * ns[1],
                    ];
                    row.push(sign * dot(ns, jn) / sp);
                } else {
                    row.push(sign * dot(b.lines[j].normal(), v) / b.lines[j].eval(x) / sp);
                }
            }
            for &m in &monos {
                row.push(sign * dot(mono_grad(m, x), v) / sp);
            }
            rows.push(row);
        }
    }
    let mut p = Problem::new(OptimizationDirection::Minimize);
    let w: Vec<_> = (0..n)
        .map(|_| p.add_var(0.0, (0.02, f64::INFINITY)))
        .collect();
    let c: Vec<_> = monos.iter().map(|_| p.add_var(0.0, (-5.0, 5.0))).collect();
    let z = p.add_var(1.0, (f64::NEG_INFINITY, f64::INFINITY));
    for row in &rows {
        let mut expr: Vec<(microlp::Variable, f64)> = Vec::with_capacity(row.len() + 1);
        for (k, &v) in row.iter().enumerate() {
            expr.push((if k < n { w[k] } else { c[k - n] }, v));
        }
        expr.push((z, -1.0));
        p.add_constraint(expr.as_slice(), ComparisonOp::Le, 0.0);
    }
    let ones: Vec<(microlp::Variable, f64)> = w.iter().map(|&v| (v, 1.0)).collect();
    p.add_constraint(ones.as_slice(), ComparisonOp::Eq, 1.0);
    let sol = p
        .solve()
        .map_err(|e| Error::Numerical(format!("trapping LP failed: {e:?}")))?
        .into_solution()
        .map_err(|_| Error::Numerical("trapping LP interrupted".into()))?;
    Ok((
        LevelFunction {
            weights: w.iter().map(|&v| sol.var_value(v)).collect(),
            monos,
            coeffs: c.iter().map(|&v| sol.var_value(v)).collect(),
        },
        sol.var_value(z),
    ))
}

fn ray_profile(b: &BuiltPolycycle, u: Point2) -> Vec<f64> {
    let rho_max = b
        .lines
        .iter()
        .filter_map(|l| {
            let du = dot(l.normal(), u);
            (du < 0.0).then(|| l.offset / du)
        })
        .fold(f64::INFINITY, f64::min);
    // dense near the boundary, where the level set lives
    let mut cand: Vec<f64> = (0..30)
        .map(|i| rho_max * (1.0 - 10f64.powf(-9.0 + 7.0 * i as f64 / 29.0)))
        .collect();
    cand.extend((1..300).map(|i| rho_max * (1.0 - i as f64 / 300.0)));
    cand
}

fn ray_dir(th: f64) -> Point2 {
    [th.cos(), th.sin()]
}

fn ray_angle(k: usize, rays: usize) -> f64 {
    2.0 * std::f64::consts::PI * k as f64 / rays as f64
}

/// Largest level reached on every ray from the centre.
fn reachable_level(b: &BuiltPolycycle, lf: &LevelFunction, rays: usize) -> f64 {
    (0..rays)
        .map(|k| {
            let u = ray_dir(ray_angle(k, rays));
            ray_profile(b, u)
                .into_iter()
                .map(|r| lf.ln_v(b, [r * u[0], r * u[1]]))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Outermost point on the ray at angle `th` where ln V reaches `level`.
fn level_on_ray(b: &BuiltPolycycle, lf: &LevelFunction, level: f64, th: f64) -> Result<Point2> {
    let u = ray_dir(th);
    let at = |rho: f64| lf.ln_v(b, [rho * u[0], rho * u[1]]);
    let cand = ray_profile(b, u);
    let mut prev = cand[0] / (1.0 - 1e-9);
    let mut found = None;
    for &r in &cand {
        if at(r) >= level {
            found = Some((r, prev));
            break;
        }
        prev = r;
    }
    let (mut inside, mut outside) = found
        .ok_or_else(|| Error::Numerical(format!("level {level} not reached at angle {th:.6}")))?;
    for _ in 0..200 {
        let m = 0.5 * (inside + outside);
        if at(m) >= level {
            inside = m;
        } else {
            outside = m;
        }
        if outside - inside <= 1e-15 * outside {
            break;
        }
    }
    Ok([inside * u[0], inside * u[1]])
}

/// Traces the level curve on `rays` uniform rays, then splits any angular
/// cell whose chord is long or misses the curve's midpoint.
fn trace_level(
    b: &BuiltPolycycle,
    lf: &LevelFunction,
    level: f64,
    rays: usize,
) -> Result<Vec<Point2>> {
    const MAX_CHORD: f64 = 2e-3;
    const MAX_DEPTH: u32 = 24;
    fn refine(
        b: &BuiltPolycycle,
        lf: &LevelFunction,
        level: f64,
        (t0, p0): (f64, Point2),
        (t1, p1): (f64, Point2),
        depth: u32,
        out: &mut Vec<Point2>,
    ) -> Result<()> {
        let tm = 0.5 * (t0 + t1);
        let pm = level_on_ray(b, lf, level, tm)?;
        let chord = norm(sub(p1, p0));
        let sag = seg_dist(pm, p0, p1);
        if depth < MAX_DEPTH && (chord > MAX_CHORD || sag > 1e-3 * chord.max(1e-12)) {
            refine(b, lf, level, (t0, p0), (tm, pm), depth + 1, out)?;
            refine(b, lf, level, (tm, pm), (t1, p1), depth + 1, out)
        } else {
            out.push(pm);
            out.push(p1);
            Ok(())
        }
    }
    let coarse = (0..=rays)
        .map(|k| {
            let th = ray_angle(k, rays);
            level_on_ray(b, lf, level, th).map(|p| (th, p))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut pts = vec![coarse[0].1];
    for w in coarse.windows(2) {
        refine(b, lf, level, w[0], w[1], 0, &mut pts)?;
    }
    Ok(pts)
}

/// A closed curve inside the polygon that `check` crosses strictly in the
/// `want` direction: first by polygon offsets, then by a fitted level set.
pub fn trapping_curve<F: PlanarField>(
    b: &BuiltPolycycle,
    check: &F,
    want: ContactDirection,
    opts: &TrappingOptions,
) -> Result<TrappingCurve> {
    let mut attempts = Vec::new();
    for &gap in &opts.offsets {
        let curve = inward_offset(b, gap);
        match check_without_contact(check, &curve, opts.samples) {
            Ok(v) if v.without_contact && v.direction == want => {
                return Ok(TrappingCurve {
                    curve,
                    method: TrappingMethod::PolygonOffset { gap },
                    verdict: v,
                    attempts,
                })
            }
            Ok(v) => attempts.push(format!(
                "offset {gap}: without_contact={} direction={:?} margin={:.3e}",
                v.without_contact, v.direction, v.min_margin
            )),
            Err(e) => attempts.push(format!("offset {gap}: {e}")),
        }
    }
    let (lf, margin) = fit_level_function(
        b,
        opts.monomial_degree,
        opts.lp_samples_per_edge,
        want == ContactDirection::Outward,
    )?;
    attempts.push(format!("level-set fit margin {margin:.4e}"));
    let ceiling = reachable_level(b, &lf, opts.rays);
    for &gap in &opts.level_gaps {
        let level = b
            .section_bases
            .iter()
            .zip(&b.lines)
            .map(|(x, l)| lf.ln_v(b, [x[0] + gap * l.alpha, x[1] + gap * l.beta]))
            .fold(f64::INFINITY, f64::min)
            .min(ceiling - 1e-9);
        let curve = match trace_level(b, &lf, level, opts.rays) {
            Ok(c) => c,
            Err(e) => {
                attempts.push(format!("level gap {gap}: {e}"));
                continue;
            }
        };
        match check_without_contact(check, &curve, opts.samples) {
            Ok(v) if v.without_contact && v.direction == want => {
                return Ok(TrappingCurve {
                    curve,
                    method: TrappingMethod::LevelSet {
                        weights: lf.weights.clone(),
                        monomials: lf.monos.clone(),
                        coefficients: lf.coeffs.clone(),
                        level,
                        gap,
                        lp_margin: margin,
                    },
                    verdict: v,
                    attempts,
                })
            }
            Ok(v) => attempts.push(format!(
                "level gap {gap}: without_contact={} direction={:?} margin={:.3e}",
                v.without_contact, v.direction, v.min_margin
            )),
            Err(e) => attempts.push(format!("level gap {gap}: {e}")),
        }
    }
    Err(Error::Numerical(format!(
        "no without-contact curve found: {}",
        attempts.join("; ")
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyalg::{Poly2, VectorField2};

    fn circle(r: f64, k: usize) -> Vec<Point2> {
        (0..=k)
            .map(|i| {
                let t = 2.0 * std::f64::consts::PI * i as f64 / k as f64;
                [r * t.cos(), r * t.sin()]
            })
            .collect()
    }

    #[test]
    fn closed_form_distances() {
        let c = circle(1.0, 256);
        assert!(hausdorff_distance(&c, &c).unwrap() < 1e-12);
        assert!((hausdorff_distance(&c, &[[0.0, 0.0]]).unwrap() - 1.0).abs() < 1e-3);
        assert!((hausdorff_distance(&c, &circle(1.1, 256)).unwrap() - 0.1).abs() < 1e-3);
        assert!(hausdorff_distance(&c, &[]).is_err());
    }

    #[test]
    fn interior_kink_is_found() {
        // the segment's midpoint is farther from the polyline than its ends
        let a = [[-1.0, 0.0], [1.0, 0.0]];
        let b = [[-1.0, 0.0], [-1.0, 5.0], [1.0, 5.0], [1.0, 0.0]];
        let d = directed(&a, &b, Exec::Sequential);
        assert!((d - 1.0).abs() < 1e-9, "{d}");
    }

    #[test]
    fn radial_and_rotation_fields() {
        let c = circle(1.0, 400);
        let radial = VectorField2::new(Poly2::x1(), Poly2::x2());
        let v = check_without_contact(&radial, &c, 1000).unwrap();
        assert!(v.without_contact && v.direction == ContactDirection::Outward);
        assert!((v.min_margin - 1.0).abs() < 1e-4);
        let rot = VectorField2::new(Poly2::x2().scale(-1.0), Poly2::x1());
        assert!(
            !check_without_contact(&rot, &c, 1000)
                .unwrap()
                .without_contact
        );
    }

    #[test]
    fn containment() {
        let sq = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        assert!(polygon_contains(&sq, [0.5, 0.5]));
        assert!(!polygon_contains(&sq, [1.5, 0.5]));
    }
}
