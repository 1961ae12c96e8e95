//! Multi-parameter perturbation families and first-order (Melnikov)
//! derivatives of the connection displacements.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::approx::{
    eval_bump, shifted_bump_polynomial, BoxDomain, BumpSpec, ShiftOptions, ShiftedBump,
};
use crate::builder::BuiltPolycycle;
use crate::error::{Error, Result};
use crate::flow::{drive, find_saddle, Flow, IntegratorOptions, Saddle, Section};
use crate::par::Exec;
use crate::polyalg::{
    dot, norm, perp, AffineForm, AnyField, LineForm, PlanarField, Point2, Poly2, ProductField,
    ProductTerm, Vec2, VectorField2,
};
use crate::real::{Precision, Real, TwoFloat};

/// Scalar factor of a deformation.
#[derive(Debug, Clone)]
pub enum Envelope {
    Poly { poly: Poly2, dx: Poly2, dy: Poly2 },
    LineProduct(Vec<LineForm>),
    Bump(BumpSpec),
    Shifted(Arc<ShiftedBump>),
}

impl Envelope {
    pub fn poly(p: Poly2) -> Self {
        Envelope::Poly {
            dx: p.d_x1(),
            dy: p.d_x2(),
            poly: p,
        }
    }

    pub fn line_product(lines: Vec<LineForm>) -> Self {
        Envelope::LineProduct(lines)
    }

    pub fn eval(&self, x: Point2) -> f64 {
        self.eval_t::<f64>(x)
    }

    pub fn eval_t<T: Real>(&self, x: [T; 2]) -> T {
        match self {
            Envelope::Poly { poly, .. } => poly.eval_t(x),
            Envelope::LineProduct(ls) => ls.iter().fold(T::one(), |acc, l| acc * l.eval_t(x)),
            Envelope::Bump(b) => T::from_f64(eval_bump(b, [x[0].to_f64(), x[1].to_f64()])),
            Envelope::Shifted(q) => T::from_f64(q.eval([x[0].to_f64(), x[1].to_f64()])),
        }
    }

    pub fn gradient_t<T: Real>(&self, x: [T; 2]) -> [T; 2] {
        match self {
            Envelope::Poly { dx, dy, .. } => [dx.eval_t(x), dy.eval_t(x)],
            Envelope::LineProduct(ls) => {
                let mut val = T::one();
                let mut g = [T::zero(), T::zero()];
                for l in ls {
                    let v = l.eval_t(x);
                    g = [
                        g[0] * v + val * T::from_f64(l.alpha),
                        g[1] * v + val * T::from_f64(l.beta),
                    ];
                    val *= v;
                }
                g
            }
            Envelope::Bump(b) => {
                let g = b.gradient([x[0].to_f64(), x[1].to_f64()]);
                [T::from_f64(g[0]), T::from_f64(g[1])]
            }
            Envelope::Shifted(q) => {
                let g = q.gradient([x[0].to_f64(), x[1].to_f64()]);
                [T::from_f64(g[0]), T::from_f64(g[1])]
            }
        }
    }

    /// Monomial form when the envelope is polynomial.
    pub fn to_poly(&self) -> Option<Poly2> {
        match self {
            Envelope::Poly { poly, .. } => Some(poly.clone()),
            Envelope::LineProduct(ls) => Some(
                ls.iter()
                    .fold(Poly2::constant(1.0), |acc, l| acc.mul(&l.to_poly())),
            ),
            _ => None,
        }
    }
}

/// Vector factor of a deformation.
#[derive(Debug, Clone)]
pub enum Direction {
    Constant(Vec2),
    Field(VectorField2),
    /// The rotated base field X⊥ = (−Q, P).
    BasePerp,
}

#[derive(Debug, Clone)]
pub struct Deformation {
    pub envelope: Envelope,
    pub direction: Direction,
}

/// X_μ = X + Σ_j μ_j · envelope_j · direction_j.
#[derive(Debug, Clone)]
pub struct PerturbationFamily {
    pub base: AnyField,
    pub deformations: Vec<Deformation>,
}

impl PerturbationFamily {
    pub fn new(base: AnyField, deformations: Vec<Deformation>) -> Result<Self> {
        if deformations.is_empty() {
            return Err(Error::Invalid(
                "a family needs at least one parameter".into(),
            ));
        }
        Ok(PerturbationFamily { base, deformations })
    }

    pub fn n_params(&self) -> usize {
        self.deformations.len()
    }

    pub fn at<'a>(&'a self, mu: &[f64]) -> FamilyField<'a> {
        assert_eq!(mu.len(), self.n_params(), "parameter vector length");
        FamilyField {
            fam: self,
            mu: mu.to_vec(),
        }
    }

    fn direction_t<T: Real>(&self, d: &Direction, x: [T; 2]) -> [T; 2] {
        match d {
            Direction::Constant(v) => [T::from_f64(v[0]), T::from_f64(v[1])],
            Direction::Field(f) => f.eval_t(x),
            Direction::BasePerp => {
                let v = self.base.eval_t(x);
                [-v[1], v[0]]
            }
        }
    }

    fn direction_jacobian_t<T: Real>(&self, d: &Direction, x: [T; 2]) -> [[T; 2]; 2] {
        match d {
            Direction::Constant(_) => [[T::zero(); 2]; 2],
            Direction::Field(f) => f.jacobian_t(x),
            Direction::BasePerp => {
                let j = self.base.jacobian_t(x);
                [[-j[1][0], -j[1][1]], [j[0][0], j[0][1]]]
            }
        }
    }

    /// ∂X_μ/∂μ_j at x.
    pub fn derivative_t<T: Real>(&self, j: usize, x: [T; 2]) -> [T; 2] {
        let d = &self.deformations[j];
        let e = d.envelope.eval_t(x);
        let v = self.direction_t(&d.direction, x);
        [e * v[0], e * v[1]]
    }

    pub fn derivative(&self, j: usize, x: Point2) -> Vec2 {
        self.derivative_t::<f64>(j, x)
    }

    /// Exact field at μ when every piece is polynomial. Factored bases with
    /// line-product envelopes along constant directions stay factored.
    pub fn field_at(&self, mu: &[f64]) -> Option<AnyField> {
        if let AnyField::Factored(base) = &self.base {
            let mut lines = base.lines.clone();
            let mut terms = base.terms.clone();
            let mut ok = true;
            for (d, &m) in self.deformations.iter().zip(mu) {
                if m == 0.0 {
                    continue;
                }
                match (&d.envelope, &d.direction) {
                    (Envelope::LineProduct(ls), Direction::Constant(v)) => {
                        let idx = ls
                            .iter()
                            .map(|l| match lines.iter().position(|k| k == l) {
                                Some(i) => i,
                                None => {
                                    lines.push(*l);
                                    lines.len() - 1
                                }
                            })
                            .collect();
                        terms.push(ProductTerm {
                            lines: idx,
                            scalar: AffineForm::constant(m),
                            vector: *v,
                        });
                    }
                    _ => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                return ProductField::new(lines, terms).ok().map(AnyField::Factored);
            }
        }
        let base = self.base.to_monomial();
        let mut out = base.clone();
        for (d, &m) in self.deformations.iter().zip(mu) {
            if m == 0.0 {
                continue;
            }
            let e = d.envelope.to_poly()?.scale(m);
            let v = match &d.direction {
                Direction::Constant(v) => VectorField2::from_scalar_times(&e, *v),
                Direction::Field(f) => VectorField2::new(e.mul(&f.p), e.mul(&f.q)),
                Direction::BasePerp => {
                    let b = base.perp();
                    VectorField2::new(e.mul(&b.p), e.mul(&b.q))
                }
            };
            out = out.add(&v);
        }
        Some(AnyField::Monomial(out))
    }
}

/// The family frozen at one parameter value.
#[derive(Debug, Clone)]
pub struct FamilyField<'a> {
    fam: &'a PerturbationFamily,
    mu: Vec<f64>,
}

impl FamilyField<'_> {
    pub fn mu(&self) -> &[f64] {
        &self.mu
    }
}

impl PlanarField for FamilyField<'_> {
    fn eval_t<T: Real>(&self, x: [T; 2]) -> [T; 2] {
        let mut v = self.fam.base.eval_t(x);
        for (j, &m) in self.mu.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            let d = self.fam.derivative_t(j, x);
            let m = T::from_f64(m);
            v[0] += m * d[0];
            v[1] += m * d[1];
        }
        v
    }

    fn jacobian_t<T: Real>(&self, x: [T; 2]) -> [[T; 2]; 2] {
        let mut jac = self.fam.base.jacobian_t(x);
        for (k, &m) in self.mu.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            let d = &self.fam.deformations[k];
            let e = d.envelope.eval_t(x);
            let g = d.envelope.gradient_t(x);
            let v = self.fam.direction_t(&d.direction, x);
            let dv = self.fam.direction_jacobian_t(&d.direction, x);
            let m = T::from_f64(m);
            for r in 0..2 {
                for c in 0..2 {
                    jac[r][c] += m * (g[c] * v[r] + e * dv[r][c]);
                }
            }
        }
        jac
    }
}

/// Bumps of radii (δ1, δ2) centred on each section base, pushing along X⊥.
/// Each parameter moves one connection and leaves the others untouched when
/// the outer radius stays clear of the other sides.
pub fn bump_family(b: &BuiltPolycycle, delta1: f64, delta2: f64) -> Result<PerturbationFamily> {
    let deformations = b
        .section_bases
        .iter()
        .map(|&c| {
            Ok(Deformation {
                envelope: Envelope::Bump(BumpSpec::new(delta1, delta2, c)?),
                direction: Direction::BasePerp,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    PerturbationFamily::new(b.any_field(), deformations)
}

/// Like [`bump_family`] with each bump replaced by its strictly positive
/// polynomial approximant.
pub fn shifted_family(
    b: &BuiltPolycycle,
    delta1: f64,
    delta2: f64,
    eps: f64,
    opts: &ShiftOptions,
) -> Result<PerturbationFamily> {
    let deformations = b
        .section_bases
        .iter()
        .map(|&c| {
            let spec = BumpSpec::new(delta1, delta2, c)?;
            let q = shifted_bump_polynomial(&spec, &BoxDomain::around(&spec), eps, 0, opts)?;
            Ok(Deformation {
                envelope: Envelope::Shifted(Arc::new(q)),
                direction: Direction::BasePerp,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    PerturbationFamily::new(b.any_field(), deformations)
}

/// A connection from one saddle to another, crossing `section` at its base.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConnectionGeometry {
    pub from: Saddle,
    pub to: Saddle,
    pub section: Section,
    /// Invariant line carrying the connection, when known; the anchor is
    /// projected onto it in the working precision.
    #[serde(default)]
    pub carrier: Option<LineForm>,
}

impl ConnectionGeometry {
    /// Connection `i` (1-based) of a built polycycle.
    pub fn of_builder(b: &BuiltPolycycle, i: usize) -> Result<Self> {
        let c = b.connection(i);
        let f = b.any_field();
        Ok(ConnectionGeometry {
            from: find_saddle(&f, b.vertex(c.from))?,
            to: find_saddle(&f, b.vertex(c.to))?,
            section: b.section(i),
            carrier: Some(*b.line(i)),
        })
    }

    pub fn all_of_builder(b: &BuiltPolycycle) -> Result<Vec<Self>> {
        (1..=b.n()).map(|i| Self::of_builder(b, i)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MelnikovOptions {
    pub integrator: IntegratorOptions,
    /// Truncate once the orbit is this close to the end saddle...
    pub saddle_radius: f64,
    /// ...and the integrand has dropped below this.
    pub integrand_floor: f64,
    pub max_time: f64,
    pub exec: Exec,
}

impl Default for MelnikovOptions {
    fn default() -> Self {
        MelnikovOptions {
            integrator: IntegratorOptions::default().with_precision(Precision::DoubleDouble),
            saddle_radius: 1e-4,
            integrand_floor: 1e-13,
            max_time: 1e3,
            exec: Exec::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MelnikovEntry {
    pub value: f64,
    pub tail_bound: f64,
    pub t_backward: f64,
    pub t_forward: f64,
}

struct HalfIntegral {
    integral: f64,
    last_integrand: f64,
    time: f64,
}

/// ∫ e^{−∫div} X∧∂K_j along the orbit from `anchor` until it settles at `end`.
fn half_integral<T: Real>(
    fam: &PerturbationFamily,
    j: usize,
    anchor: Point2,
    carrier: Option<&LineForm>,
    end: Point2,
    backward: bool,
    opts: &MelnikovOptions,
) -> Result<HalfIntegral> {
    let base = &fam.base;
    let integrand = |y: &[T; 4]| -> T {
        let x = [y[0], y[1]];
        let v = base.eval_t(x);
        let k = fam.derivative_t(j, x);
        y[2] * (v[0] * k[1] - v[1] * k[0])
    };
    let rhs = |y: &[T; 4]| -> [T; 4] {
        let x = [y[0], y[1]];
        let v = base.eval_t(x);
        let div = base.divergence_t(x);
        [v[0], v[1], -div * y[2], integrand(y)]
    };
    let mut x0 = [T::from_f64(anchor[0]), T::from_f64(anchor[1])];
    if let Some(l) = carrier {
        // an f64 anchor sits ~1e−16 off the line, which the end saddle
        // amplifies by e^{λu t}
        let a = T::from_f64(l.alpha);
        let b = T::from_f64(l.beta);
        let k = l.eval_t(x0) / (a * a + b * b);
        x0 = [x0[0] - k * a, x0[1] - k * b];
    }
    let y0 = [x0[0], x0[1], T::one(), T::zero()];
    let mut last = integrand(&y0).to_f64();
    let t1 = if backward {
        -opts.max_time
    } else {
        opts.max_time
    };
    let out = drive(
        &rhs,
        y0,
        0.0,
        t1,
        &opts.integrator,
        &[],
        |_, y| {
            let f = integrand(y).to_f64();
            last = f;
            let d = (y[0].to_f64() - end[0]).hypot(y[1].to_f64() - end[1]);
            Ok(
                if d < opts.saddle_radius && f.abs() < opts.integrand_floor {
                    Flow::Stop
                } else {
                    Flow::Continue
                },
            )
        },
        |_| Ok(Flow::Continue),
    )?;
    if !out.stopped {
        return Err(Error::NoConvergence {
            what: "Melnikov integral truncation",
            iterations: out.accepted,
            residual: last.abs(),
        });
    }
    let sign = if backward { -1.0 } else { 1.0 };
    Ok(HalfIntegral {
        integral: sign * out.y[3].to_f64(),
        last_integrand: last,
        time: out.t,
    })
}

/// ∂d_i/∂μ_j at μ = 0 in the coordinate of the connection's section.
pub fn melnikov_derivative(
    fam: &PerturbationFamily,
    conn: &ConnectionGeometry,
    j: usize,
    opts: &MelnikovOptions,
) -> Result<MelnikovEntry> {
    if j >= fam.n_params() {
        return Err(Error::Invalid(format!("parameter {j} out of range")));
    }
    let anchor = conn.section.base;
    let (fwd, bwd) = match opts.integrator.precision {
        Precision::Double => (
            half_integral::<f64>(
                fam,
                j,
                anchor,
                conn.carrier.as_ref(),
                conn.to.location,
                false,
                opts,
            )?,
            half_integral::<f64>(
                fam,
                j,
                anchor,
                conn.carrier.as_ref(),
                conn.from.location,
                true,
                opts,
            )?,
        ),
        Precision::DoubleDouble => (
            half_integral::<TwoFloat>(
                fam,
                j,
                anchor,
                conn.carrier.as_ref(),
                conn.to.location,
                false,
                opts,
            )?,
            half_integral::<TwoFloat>(
                fam,
                j,
                anchor,
                conn.carrier.as_ref(),
                conn.from.location,
                true,
                opts,
            )?,
        ),
    };
    let x = fam.base.eval(anchor);
    let speed = norm(x);
    if speed == 0.0 {
        return Err(Error::Invalid("section base is a singular point".into()));
    }
    // the integral measures displacement along X⊥; express it along the section
    let orient = if dot(perp(x), conn.section.direction) >= 0.0 {
        1.0
    } else {
        -1.0
    };
    let rate_fwd = conn.to.lambda_u.abs();
    let rate_bwd = conn.from.lambda_s.abs();
    let tail = fwd.last_integrand.abs() / rate_fwd + bwd.last_integrand.abs() / rate_bwd;
    Ok(MelnikovEntry {
        value: orient * (fwd.integral + bwd.integral) / speed,
        tail_bound: tail / speed,
        t_backward: bwd.time,
        t_forward: fwd.time,
    })
}

/// Integrand e^{−∫₀ᵗ div} X∧∂K_j at time `t` along the orbit through `anchor`.
pub fn melnikov_integrand(
    fam: &PerturbationFamily,
    anchor: Point2,
    j: usize,
    t: f64,
    opts: &IntegratorOptions,
) -> Result<f64> {
    let base = &fam.base;
    let rhs = |y: &[f64; 3]| -> [f64; 3] {
        let x = [y[0], y[1]];
        let v = base.eval(x);
        [v[0], v[1], -base.divergence(x) * y[2]]
    };
    let out = drive(
        &rhs,
        [anchor[0], anchor[1], 1.0],
        0.0,
        t,
        opts,
        &[],
        |_, _| Ok(Flow::Continue),
        |_| Ok(Flow::Continue),
    )?;
    let x = [out.y[0], out.y[1]];
    let v = base.eval(x);
    let k = fam.derivative(j, x);
    Ok(out.y[2] * (v[0] * k[1] - v[1] * k[0]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MelnikovReport {
    /// `matrix[i][j]` = ∂d_i/∂μ_j.
    pub matrix: Vec<Vec<f64>>,
    pub tail_bounds: Vec<Vec<f64>>,
    pub truncation_times: Vec<(f64, f64)>,
    pub min_abs_diagonal: f64,
    pub max_abs_off_diagonal: f64,
}

impl MelnikovReport {
    pub fn is_diagonally_dominant(&self) -> bool {
        self.matrix.iter().enumerate().all(|(i, row)| {
            let off: f64 = row
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, v)| v.abs())
                .sum();
            row.get(i).is_some_and(|d| d.abs() > off)
        })
    }
}

pub fn melnikov_matrix(
    fam: &PerturbationFamily,
    conns: &[ConnectionGeometry],
    opts: &MelnikovOptions,
) -> Result<MelnikovReport> {
    let n = conns.len();
    let np = fam.n_params();
    let cells = opts.exec.map_range(n * np, |k| {
        melnikov_derivative(fam, &conns[k / np], k % np, opts)
    });
    let mut matrix = vec![vec![0.0; np]; n];
    let mut tails = vec![vec![0.0; np]; n];
    let mut times = vec![(0.0f64, 0.0f64); n];
    for (k, c) in cells.into_iter().enumerate() {
        let e = c?;
        let (i, j) = (k / np, k % np);
        matrix[i][j] = e.value;
        tails[i][j] = e.tail_bound;
        times[i].0 = times[i].0.min(e.t_backward);
        times[i].1 = times[i].1.max(e.t_forward);
    }
    let mut dmin = f64::INFINITY;
    let mut omax: f64 = 0.0;
    for (i, row) in matrix.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if i == j {
                dmin = dmin.min(v.abs());
            } else {
                omax = omax.max(v.abs());
            }
        }
    }
    Ok(MelnikovReport {
        matrix,
        tail_bounds: tails,
        truncation_times: times,
        min_abs_diagonal: dmin,
        max_abs_off_diagonal: omax,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builder::{build_main3_family, build_polycycle, Orientation, PolycycleSpec};
    use crate::polyalg::fd_jacobian;

    #[test]
    fn family_jacobian_matches_differences() {
        let b = build_polycycle(&PolycycleSpec::new(
            vec![2.0, 3.0, 0.5],
            Orientation::Clockwise,
        ))
        .unwrap();
        let fam = bump_family(&b, 0.05, 0.2).unwrap();
        let f = fam.at(&[0.3, -0.2, 0.1]);
        let x = b.section_bases[0];
        let x = [x[0] + 0.03, x[1] - 0.05];
        let ja = f.jacobian(x);
        let jn = fd_jacobian(&f, x, 1e-6);
        for r in 0..2 {
            for c in 0..2 {
                assert!((ja[r][c] - jn[r][c]).abs() < 1e-6, "{ja:?} {jn:?}");
            }
        }
    }

    #[test]
    fn factored_field_at_parameter() {
        let b = build_polycycle(&PolycycleSpec::new(
            vec![2.0, 3.0, 0.5],
            Orientation::Clockwise,
        ))
        .unwrap();
        let fam = build_main3_family(&b);
        let mu = [0.01, -0.02, 0.03];
        let g = fam.field_at(&mu).unwrap();
        assert!(matches!(g, AnyField::Factored(_)));
        let f = fam.at(&mu);
        for x in [[0.1, 0.2], [-0.4, 0.3]] {
            let a = g.eval(x);
            let c = f.eval(x);
            assert!((a[0] - c[0]).abs() < 1e-14 && (a[1] - c[1]).abs() < 1e-14);
        }
        let m = g.to_monomial();
        let a = m.eval([0.3, -0.1]);
        let c = f.eval([0.3, -0.1]);
        assert!((a[0] - c[0]).abs() < 1e-13);
    }

    #[test]
    fn main3_matrix_is_diagonal_and_positive() {
        let b = build_polycycle(&PolycycleSpec::new(
            vec![2.0, 3.0, 0.5],
            Orientation::Clockwise,
        ))
        .unwrap();
        let fam = build_main3_family(&b);
        let conns = ConnectionGeometry::all_of_builder(&b).unwrap();
        let r = melnikov_matrix(&fam, &conns, &MelnikovOptions::default()).unwrap();
        for i in 0..3 {
            assert!(r.matrix[i][i] > 0.0, "{:?}", r.matrix);
        }
        assert!(
            r.max_abs_off_diagonal < 1e-10 * r.min_abs_diagonal,
            "{:?}",
            r.matrix
        );
        for (i, row) in r.tail_bounds.iter().enumerate() {
            assert!(row[i] < 1e-10 * r.matrix[i][i].abs());
        }
    }
}
