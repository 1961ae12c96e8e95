//! Smooth bump functions and their Bernstein-polynomial approximations,
//! including strictly positive shifted approximants.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::Exec;
use crate::polyalg::{Point2, Poly2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpSpec {
    pub delta1: f64,
    pub delta2: f64,
    pub center: Point2,
}

impl BumpSpec {
    pub fn new(delta1: f64, delta2: f64, center: Point2) -> Result<Self> {
        if !(delta1 > 0.0 && delta2 > delta1 && delta2.is_finite()) {
            return Err(Error::Invalid(format!(
                "bump radii must satisfy 0 < delta1 < delta2, got {delta1}, {delta2}"
            )));
        }
        Ok(BumpSpec {
            delta1,
            delta2,
            center,
        })
    }

    /// Radial profile value and its derivative with respect to the radius.
    fn profile(&self, r: f64) -> (f64, f64) {
        let w = self.delta2 - self.delta1;
        let u = (r - self.delta1) / w;
        if u <= 0.0 {
            return (1.0, 0.0);
        }
        if u >= 1.0 {
            return (0.0, 0.0);
        }
        let a = glue(1.0 - u);
        let b = glue(u);
        let da = -glue_d(1.0 - u);
        let db = glue_d(u);
        let s = a + b;
        let v = a / s;
        let dv = (da * s - a * (da + db)) / (s * s);
        (v, dv / w)
    }

    /// Gradient of the bump at `x`.
    pub fn gradient(&self, x: Point2) -> [f64; 2] {
        let d = [x[0] - self.center[0], x[1] - self.center[1]];
        let r = d[0].hypot(d[1]);
        if r == 0.0 {
            return [0.0, 0.0];
        }
        let (_, dv) = self.profile(r);
        [dv * d[0] / r, dv * d[1] / r]
    }
}

#[inline]
fn glue(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

#[inline]
fn glue_d(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp() / (t * t)
    }
}

/// 1 on the inner disc, 0 outside the outer disc, smooth monotone step between.
pub fn eval_bump(spec: &BumpSpec, x: Point2) -> f64 {
    let r = (x[0] - spec.center[0]).hypot(x[1] - spec.center[1]);
    spec.profile(r).0
}

/// Tensor Bernstein polynomial on [0,1]² from (m+1)×(n+1) samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BernsteinPoly {
    pub degrees: (usize, usize),
    /// Row-major: `samples[r * (n + 1) + s] = F(r/m, s/n)`.
    pub samples: Vec<f64>,
}

fn ln_binomials(m: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(m + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..=m {
        acc += ((m - k + 1) as f64).ln() - (k as f64).ln();
        out.push(acc);
    }
    out
}

/// Basis values C(m,r) x^r (1−x)^{m−r}, r = 0..m, accumulated in logarithms.
fn basis(m: usize, lnb: &[f64], x: f64) -> Vec<f64> {
    let x = x.clamp(0.0, 1.0);
    if x == 0.0 {
        let mut v = vec![0.0; m + 1];
        v[0] = 1.0;
        return v;
    }
    if x == 1.0 {
        let mut v = vec![0.0; m + 1];
        v[m] = 1.0;
        return v;
    }
    let lx = x.ln();
    let l1 = (-x).ln_1p();
    (0..=m)
        .map(|r| (lnb[r] + r as f64 * lx + (m - r) as f64 * l1).exp())
        .collect()
}

impl BernsteinPoly {
    pub fn m(&self) -> usize {
        self.degrees.0
    }

    pub fn n(&self) -> usize {
        self.degrees.1
    }

    pub fn eval(&self, x: Point2) -> f64 {
        let (m, n) = self.degrees;
        let bx = basis(m, &ln_binomials(m), x[0]);
        let by = basis(n, &ln_binomials(n), x[1]);
        self.contract(&bx, &by)
    }

    fn contract(&self, bx: &[f64], by: &[f64]) -> f64 {
        let n1 = self.n() + 1;
        let mut total = 0.0;
        for (r, &wx) in bx.iter().enumerate() {
            if wx == 0.0 {
                continue;
            }
            let row = &self.samples[r * n1..(r + 1) * n1];
            let inner: f64 = row.iter().zip(by).map(|(f, w)| f * w).sum();
            total += wx * inner;
        }
        total
    }

    /// Values on the tensor grid `xs × ys`, indexed `[i][k]` for (xs[i], ys[k]).
    pub fn eval_grid(&self, xs: &[f64], ys: &[f64]) -> Vec<Vec<f64>> {
        self.eval_grid_with(xs, ys, Exec::default())
    }

    pub fn eval_grid_with(&self, xs: &[f64], ys: &[f64], exec: Exec) -> Vec<Vec<f64>> {
        let (m, n) = self.degrees;
        let lbm = ln_binomials(m);
        let lbn = ln_binomials(n);
        let by: Vec<Vec<f64>> = ys.iter().map(|&y| basis(n, &lbn, y)).collect();
        exec.map(xs, |&x| {
            let bx = basis(m, &lbm, x);
            // partial contraction over r, then one dot product per y
            let n1 = n + 1;
            let mut col = vec![0.0; n1];
            for (r, &wx) in bx.iter().enumerate() {
                if wx == 0.0 {
                    continue;
                }
                let row = &self.samples[r * n1..(r + 1) * n1];
                for (c, f) in col.iter_mut().zip(row) {
                    *c += wx * f;
                }
            }
            by.iter()
                .map(|w| col.iter().zip(w).map(|(c, b)| c * b).sum())
                .collect()
        })
    }

    /// Monomial expansion; only sensible for small degrees.
    pub fn to_poly(&self) -> Poly2 {
        let (m, n) = self.degrees;
        // Bernstein basis in one variable as monomial coefficients
        let mono = |deg: usize, r: usize| -> Vec<f64> {
            let mut c = vec![0.0; deg + 1];
            let choose = |a: usize, b: usize| -> f64 {
                (0..b).fold(1.0, |acc, i| acc * (a - i) as f64 / (i + 1) as f64)
            };
            for k in 0..=(deg - r) {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                c[r + k] += choose(deg, r) * choose(deg - r, k) * sign;
            }
            c
        };
        let mut terms = Vec::new();
        for r in 0..=m {
            let cx = mono(m, r);
            for s in 0..=n {
                let f = self.samples[r * (n + 1) + s];
                if f == 0.0 {
                    continue;
                }
                let cy = mono(n, s);
                for (i, a) in cx.iter().enumerate() {
                    for (j, b) in cy.iter().enumerate() {
                        terms.push((i as u32, j as u32, f * a * b));
                    }
                }
            }
        }
        Poly2::new(terms).expect("finite Bernstein samples")
    }
}

/// Samples `f` on the (m+1)×(n+1) grid of [0,1]².
pub fn bernstein_of<F: Fn(Point2) -> f64>(f: F, m: usize, n: usize) -> Result<BernsteinPoly> {
    if m == 0 || n == 0 {
        return Err(Error::Invalid(
            "Bernstein degrees must be at least 1".into(),
        ));
    }
    let mut samples = Vec::with_capacity((m + 1) * (n + 1));
    for r in 0..=m {
        for s in 0..=n {
            samples.push(f([r as f64 / m as f64, s as f64 / n as f64]));
        }
    }
    Ok(BernsteinPoly {
        degrees: (m, n),
        samples,
    })
}

/// Axis-aligned box [lo0, hi0] × [lo1, hi1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub lo: Point2,
    pub hi: Point2,
}

impl BoxDomain {
    pub fn new(lo: Point2, hi: Point2) -> Result<Self> {
        if !(hi[0] > lo[0] && hi[1] > lo[1]) {
            return Err(Error::Invalid("box must have positive extent".into()));
        }
        Ok(BoxDomain { lo, hi })
    }

    pub fn to_unit(&self, x: Point2) -> Point2 {
        [
            (x[0] - self.lo[0]) / (self.hi[0] - self.lo[0]),
            (x[1] - self.lo[1]) / (self.hi[1] - self.lo[1]),
        ]
    }

    pub fn from_unit(&self, u: Point2) -> Point2 {
        [
            self.lo[0] + u[0] * (self.hi[0] - self.lo[0]),
            self.lo[1] + u[1] * (self.hi[1] - self.lo[1]),
        ]
    }

    pub fn contains(&self, x: Point2) -> bool {
        x[0] >= self.lo[0] && x[0] <= self.hi[0] && x[1] >= self.lo[1] && x[1] <= self.hi[1]
    }

    /// Smallest square box holding the bump's support.
    pub fn around(spec: &BumpSpec) -> Self {
        let c = spec.center;
        let d = spec.delta2;
        BoxDomain {
            lo: [c[0] - d, c[1] - d],
            hi: [c[0] + d, c[1] + d],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftOptions {
    pub start_degree: usize,
    pub degree_cap: usize,
    /// Points per side of the certification grid.
    pub check_grid: usize,
}

impl Default for ShiftOptions {
    fn default() -> Self {
        ShiftOptions {
            start_degree: 16,
            degree_cap: 512,
            check_grid: 201,
        }
    }
}

/// q = B + ε/2 on a box, with B the Bernstein approximant of the bump pulled
/// back to the unit square. Outside the box q equals ε/2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftedBump {
    pub bump: BumpSpec,
    pub domain: BoxDomain,
    pub eps: f64,
    pub order: usize,
    pub bernstein: BernsteinPoly,
    pub shift: f64,
    /// Certified grid errors by derivative order (0 = values).
    pub grid_errors: Vec<f64>,
    /// Monomial form in box-local coordinates, present for small degrees.
    pub local_poly: Option<Poly2>,
}

impl ShiftedBump {
    pub fn eval(&self, x: Point2) -> f64 {
        if !self.domain.contains(x) {
            return self.shift;
        }
        self.bernstein.eval(self.domain.to_unit(x)) + self.shift
    }

    pub fn gradient(&self, x: Point2) -> [f64; 2] {
        let h = 1e-6;
        let f = |p: Point2| self.eval(p);
        [
            (f([x[0] + h, x[1]]) - f([x[0] - h, x[1]])) / (2.0 * h),
            (f([x[0], x[1] + h]) - f([x[0], x[1] - h])) / (2.0 * h),
        ]
    }

    pub fn degree(&self) -> usize {
        self.bernstein.m()
    }
}

/// Grid errors of `b` against `phi` on a k×k grid of the unit square: value
/// error first, then finite-difference derivative errors up to `order`.
fn grid_errors(b: &BernsteinPoly, phi: &dyn Fn(Point2) -> f64, k: usize, order: usize) -> Vec<f64> {
    let xs: Vec<f64> = (0..k).map(|i| i as f64 / (k - 1) as f64).collect();
    let vals = b.eval_grid(&xs, &xs);
    let truth: Vec<Vec<f64>> = xs
        .iter()
        .map(|&x| xs.iter().map(|&y| phi([x, y])).collect())
        .collect();
    let mut errs = Vec::with_capacity(order + 1);
    let mut e0: f64 = 0.0;
    for i in 0..k {
        for j in 0..k {
            e0 = e0.max((vals[i][j] - truth[i][j]).abs());
        }
    }
    errs.push(e0);
    let h = 1.0 / (k - 1) as f64;
    // repeated forward differences along each axis
    let mut dv = vals;
    let mut dt = truth;
    for _ in 1..=order {
        let rows = dv.len();
        let cols = dv[0].len();
        if rows < 2 || cols < 2 {
            errs.push(0.0);
            continue;
        }
        let mut e: f64 = 0.0;
        let mut nv = vec![vec![0.0; cols - 1]; rows - 1];
        let mut nt = vec![vec![0.0; cols - 1]; rows - 1];
        for i in 0..rows - 1 {
            for j in 0..cols - 1 {
                let gx_v = (dv[i + 1][j] - dv[i][j]) / h;
                let gy_v = (dv[i][j + 1] - dv[i][j]) / h;
                let gx_t = (dt[i + 1][j] - dt[i][j]) / h;
                let gy_t = (dt[i][j + 1] - dt[i][j]) / h;
                e = e.max((gx_v - gx_t).abs()).max((gy_v - gy_t).abs());
                nv[i][j] = gx_v;
                nt[i][j] = gx_t;
            }
        }
        errs.push(e);
        dv = nv;
        dt = nt;
    }
    errs
}

/// Doubles the Bernstein degree from `start_degree` until all grid errors up
/// to derivative order `order` drop below ε/4, then shifts by ε/2.
pub fn shifted_bump_polynomial(
    spec: &BumpSpec,
    domain: &BoxDomain,
    eps: f64,
    order: usize,
    opts: &ShiftOptions,
) -> Result<ShiftedBump> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Invalid(format!("eps must be positive, got {eps}")));
    }
    if opts.start_degree == 0 || opts.check_grid < 3 {
        return Err(Error::Invalid("degenerate escalation options".into()));
    }
    let phi = |u: Point2| eval_bump(spec, domain.from_unit(u));
    let mut m = opts.start_degree;
    let mut last = Vec::new();
    while m <= opts.degree_cap {
        let b = bernstein_of(phi, m, m)?;
        let errs = grid_errors(&b, &phi, opts.check_grid, order);
        if errs.iter().all(|&e| e < 0.25 * eps) {
            let local_poly = if m <= 16 { Some(b.to_poly()) } else { None };
            return Ok(ShiftedBump {
                bump: *spec,
                domain: *domain,
                eps,
                order,
                bernstein: b,
                shift: 0.5 * eps,
                grid_errors: errs,
                local_poly,
            });
        }
        last = errs;
        m *= 2;
    }
    Err(Error::DegreeCap {
        cap: opts.degree_cap,
        error: last.iter().cloned().fold(0.0, f64::max),
        bound: 0.25 * eps,
    })
}

/// Sup error of the degree-(m,m) Bernstein approximant of `phi` on a k×k grid.
pub fn sup_grid_error<F: Fn(Point2) -> f64>(phi: F, m: usize, k: usize) -> Result<f64> {
    let b = bernstein_of(&phi, m, m)?;
    Ok(grid_errors(&b, &phi, k, 0)[0])
}
