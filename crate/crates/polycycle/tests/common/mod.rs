//! Independent re-computations used as test oracles. Nothing here calls the
//! library routine it checks.

#![allow(dead_code)]

use polycycle::builder::BuiltPolycycle;
use polycycle::polyalg::{PlanarField, Point2};
use rand::Rng;

/// Eigen-ratio −λ−/λ+ from trace and determinant.
pub fn ratio_from_jacobian(j: [[f64; 2]; 2]) -> f64 {
    let tr = j[0][0] + j[1][1];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    assert!(det < 0.0, "not a saddle, det = {det}");
    let disc = (tr * tr - 4.0 * det).sqrt();
    let lp = 0.5 * (tr + disc);
    let lm = 0.5 * (tr - disc);
    -lm / lp
}

/// Central-difference Jacobian with Richardson extrapolation.
pub fn jacobian_fd<F: PlanarField>(f: &F, x: Point2) -> [[f64; 2]; 2] {
    let d = |h: f64, k: usize| {
        let mut a = x;
        let mut b = x;
        a[k] += h;
        b[k] -= h;
        let fa = f.eval(a);
        let fb = f.eval(b);
        [(fa[0] - fb[0]) / (2.0 * h), (fa[1] - fb[1]) / (2.0 * h)]
    };
    let mut j = [[0.0; 2]; 2];
    for k in 0..2 {
        let c1 = d(1e-3, k);
        let c2 = d(5e-4, k);
        for r in 0..2 {
            j[r][k] = (4.0 * c2[r] - c1[r]) / 3.0;
        }
    }
    j
}

/// Largest |⟨X, unit normal⟩| / max‖X‖ over samples of every edge.
pub fn line_residual(b: &BuiltPolycycle) -> f64 {
    let n = b.n();
    let mut worst: f64 = 0.0;
    for s in 1..=n {
        let l = b.line(s);
        let nl = l.alpha.hypot(l.beta);
        let (a, e) = (b.vertex(s), b.vertex(s + 1));
        let mut top: f64 = 0.0;
        let mut normal: f64 = 0.0;
        for k in 0..=64 {
            let t = k as f64 / 64.0;
            let x = [a[0] + t * (e[0] - a[0]), a[1] + t * (e[1] - a[1])];
            let v = b.field.eval(x);
            top = top.max(v[0].hypot(v[1]));
            normal = normal.max(((v[0] * l.alpha + v[1] * l.beta) / nl).abs());
        }
        worst = worst.max(normal / top);
    }
    worst
}

/// Log-uniform sample in [lo, hi].
pub fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

fn heap_permutations(n: usize, mut visit: impl FnMut(&[usize])) {
    let mut a: Vec<usize> = (0..n).collect();
    let mut c = vec![0usize; n];
    visit(&a);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                a.swap(0, i);
            } else {
                a.swap(c[i], i);
            }
            visit(&a);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

/// Maximum number of sign changes of (R_i − 1)(R_{i−1} − 1) over all
/// orderings, with R_0 = 1/R_1; partial products tracked in log space.
pub fn delta_oracle(r: &[f64]) -> usize {
    let tol = (1.0f64 + 1e-9).ln();
    let sgn = |l: f64| {
        if l > tol {
            1i32
        } else if l < -tol {
            -1
        } else {
            0
        }
    };
    let mut best = 0;
    heap_permutations(r.len(), |p| {
        let logs: Vec<f64> = p
            .iter()
            .scan(0.0, |acc, &k| {
                *acc += r[k].ln();
                Some(*acc)
            })
            .collect();
        let mut seq = vec![-logs[0]];
        seq.extend(logs);
        let c = seq.windows(2).filter(|w| sgn(w[0]) * sgn(w[1]) < 0).count();
        best = best.max(c);
    });
    best
}

/// True when no nonempty subset has product within 1e−9 of one.
pub fn ch_oracle(r: &[f64]) -> bool {
    let n = r.len();
    (1u32..(1 << n)).all(|mask| {
        let p: f64 = (0..n)
            .filter(|k| mask >> k & 1 == 1)
            .map(|k| r[k])
            .product();
        (p - 1.0).abs() > 1e-9
    })
}

/// Bernstein value by the textbook double sum with exact binomials.
pub fn bernstein_naive(f: &dyn Fn(Point2) -> f64, m: usize, x: Point2) -> f64 {
    let binom = |n: usize, k: usize| -> f64 {
        let mut c = 1.0;
        for i in 0..k {
            c = c * (n - i) as f64 / (i + 1) as f64;
        }
        c
    };
    let mut s = 0.0;
    for r in 0..=m {
        let wr = binom(m, r) * x[0].powi(r as i32) * (1.0 - x[0]).powi((m - r) as i32);
        for q in 0..=m {
            let wq = binom(m, q) * x[1].powi(q as i32) * (1.0 - x[1]).powi((m - q) as i32);
            s += f([r as f64 / m as f64, q as f64 / m as f64]) * wr * wq;
        }
    }
    s
}

/// Brute-force directed Hausdorff distance between densely resampled polylines.
pub fn hausdorff_dense(a: &[Point2], b: &[Point2], per_segment: usize) -> f64 {
    let resample = |c: &[Point2]| -> Vec<Point2> {
        if c.len() == 1 {
            return c.to_vec();
        }
        let mut out = Vec::new();
        for w in c.windows(2) {
            for k in 0..per_segment {
                let t = k as f64 / per_segment as f64;
                out.push([
                    w[0][0] + t * (w[1][0] - w[0][0]),
                    w[0][1] + t * (w[1][1] - w[0][1]),
                ]);
            }
        }
        out.push(*c.last().unwrap());
        out
    };
    let (ra, rb) = (resample(a), resample(b));
    let directed = |p: &[Point2], q: &[Point2]| {
        p.iter()
            .map(|x| {
                q.iter()
                    .map(|y| (x[0] - y[0]).hypot(x[1] - y[1]))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    };
    directed(&ra, &rb).max(directed(&rb, &ra))
}

/// Fixed-step RK4 for x' = X, w' = −div X · w; returns (x, w) at time t.
pub fn weighted_orbit<F: PlanarField>(f: &F, x0: Point2, t: f64, steps: usize) -> (Point2, f64) {
    let rhs = |y: [f64; 3]| {
        let v = f.eval([y[0], y[1]]);
        let d = f.divergence([y[0], y[1]]);
        [v[0], v[1], -d * y[2]]
    };
    let h = t / steps as f64;
    let mut y = [x0[0], x0[1], 1.0];
    for _ in 0..steps {
        let k1 = rhs(y);
        let k2 = rhs([
            y[0] + 0.5 * h * k1[0],
            y[1] + 0.5 * h * k1[1],
            y[2] + 0.5 * h * k1[2],
        ]);
        let k3 = rhs([
            y[0] + 0.5 * h * k2[0],
            y[1] + 0.5 * h * k2[1],
            y[2] + 0.5 * h * k2[2],
        ]);
        let k4 = rhs([y[0] + h * k3[0], y[1] + h * k3[1], y[2] + h * k3[2]]);
        for i in 0..3 {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    ([y[0], y[1]], y[2])
}

/// Roots of t^r + b = t on (0, hi) in closed form for r = 2.
pub fn quadratic_model_root(b: f64) -> f64 {
    0.5 * (1.0 - (1.0 - 4.0 * b).sqrt())
}

/// ∂d_i/∂μ_i for the line-product family by quadrature along edge `i`
/// (1-based). The orbit is parameterised by arclength on the invariant line,
/// so it cannot leave it; returns the value along the section direction.
pub fn melnikov_on_line(b: &BuiltPolycycle, i: usize, anchor: Point2, direction: Point2) -> f64 {
    let l = *b.line(i);
    let nn = l.alpha.hypot(l.beta);
    let tau = [-l.beta / nn, l.alpha / nn];
    let at = |s: f64| [anchor[0] + s * tau[0], anchor[1] + s * tau[1]];
    let integrand = |x: Point2, w: f64| {
        let v = b.field.eval(x);
        let h: f64 = (1..=b.n())
            .filter(|&j| j != i)
            .map(|j| b.line(j).eval(x))
            .product();
        let k = [-h * l.alpha, -h * l.beta];
        w * (v[0] * k[1] - v[1] * k[0])
    };
    // y = [s, w, I]
    let rhs = |y: [f64; 3]| {
        let x = at(y[0]);
        let v = b.field.eval(x);
        [
            v[0] * tau[0] + v[1] * tau[1],
            -b.field.divergence(x) * y[1],
            integrand(x, y[1]),
        ]
    };
    let half = |h: f64| {
        let mut y = [0.0, 1.0, 0.0];
        let mut peak: f64 = 0.0;
        let mut t = 0.0;
        loop {
            let k1 = rhs(y);
            let k2 = rhs([
                y[0] + 0.5 * h * k1[0],
                y[1] + 0.5 * h * k1[1],
                y[2] + 0.5 * h * k1[2],
            ]);
            let k3 = rhs([
                y[0] + 0.5 * h * k2[0],
                y[1] + 0.5 * h * k2[1],
                y[2] + 0.5 * h * k2[2],
            ]);
            let k4 = rhs([y[0] + h * k3[0], y[1] + h * k3[1], y[2] + h * k3[2]]);
            for c in 0..3 {
                y[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
            }
            t += h.abs();
            let g = integrand(at(y[0]), y[1]).abs();
            peak = peak.max(g);
            assert!(g.is_finite() && t < 1e4, "quadrature did not settle");
            if t > 1.0 && g < 1e-15 * peak {
                return y[2];
            }
        }
    };
    let total = half(1e-3) - half(-1e-3);
    let v = b.field.eval(anchor);
    let orient = if -v[1] * direction[0] + v[0] * direction[1] >= 0.0 {
        1.0
    } else {
        -1.0
    };
    orient * total / v[0].hypot(v[1])
}
