//! Polynomial fields whose regular n-gon is a hyperbolic polycycle with
//! prescribed hyperbolicity ratios, and the line-product perturbation family
//! that breaks its connections independently.
//!
//! Indices passed to public functions are 1-based and cyclic (`l_0 = l_n`,
//! `p_{n+1} = p_1`); storage is 0-based, so `vertices[s - 1]` is `p_s`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::Section;
use crate::melnikov::{Deformation, Direction, Envelope, PerturbationFamily};
use crate::polyalg::{
    add, norm, perp, scale, sub, AffineForm, AnyField, LineForm, PlanarField, Point2, ProductField,
    ProductTerm, Vec2, VectorField2,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    #[default]
    Clockwise,
    Counterclockwise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolycycleSpec {
    pub n: usize,
    pub ratios: Vec<f64>,
    #[serde(default)]
    pub orientation: Orientation,
}

impl PolycycleSpec {
    pub fn new(ratios: Vec<f64>, orientation: Orientation) -> Self {
        PolycycleSpec {
            n: ratios.len(),
            ratios,
            orientation,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(Error::Invalid(format!(
                "polycycle needs n >= 3, got {}",
                self.n
            )));
        }
        if self.ratios.len() != self.n {
            return Err(Error::Invalid(format!(
                "expected {} ratios, got {}",
                self.n,
                self.ratios.len()
            )));
        }
        if let Some(r) = self.ratios.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
            return Err(Error::Invalid(format!(
                "ratios must be positive and finite, got {r}"
            )));
        }
        Ok(())
    }
}

/// A directed side of the polycycle: the orbit on edge `edge` runs from
/// saddle `from` to saddle `to` (all 1-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Connection {
    pub edge: usize,
    pub from: usize,
    pub to: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuiltPolycycle {
    pub spec: PolycycleSpec,
    pub field: VectorField2,
    pub factored: ProductField,
    pub vertices: Vec<Point2>,
    pub lines: Vec<LineForm>,
    pub affine_factors: Vec<AffineForm>,
    pub section_bases: Vec<Point2>,
    pub section_dirs: Vec<Vec2>,
    pub section_half_width: f64,
    pub sin_theta: f64,
    pub m_const: f64,
}

#[inline]
fn cyc(s: usize, n: usize) -> usize {
    // 1-based cyclic index to 0-based storage
    (s + n - 1) % n
}

pub fn build_polycycle(spec: &PolycycleSpec) -> Result<BuiltPolycycle> {
    spec.validate()?;
    let n = spec.n;
    let vertices: Vec<Point2> = (1..=n)
        .map(|i| {
            let a = 2.0 * PI * i as f64 / n as f64;
            [a.cos(), a.sin()]
        })
        .collect();
    let centre = [0.0, 0.0];
    // edge i joins p_i and p_{i+1}
    let lines: Vec<LineForm> = (0..n)
        .map(|i| LineForm::through(vertices[i], vertices[(i + 1) % n], centre))
        .collect::<Result<_>>()?;

    let affine_factors: Vec<AffineForm> = (0..n)
        .map(|i| {
            let start = vertices[(i + 1) % n];
            let end = vertices[i];
            let (at_start, at_end) = match spec.orientation {
                Orientation::Clockwise => (1.0, spec.ratios[i]),
                Orientation::Counterclockwise => (-spec.ratios[(i + 1) % n], -1.0),
            };
            along_edge_interpolant(start, end, at_start, at_end)
        })
        .collect();

    let terms: Vec<ProductTerm> = (0..n)
        .map(|i| ProductTerm {
            lines: (0..n).filter(|&j| j != i).collect(),
            scalar: affine_factors[i],
            vector: lines[i].tangent(),
        })
        .collect();
    let factored = ProductField::new(lines.clone(), terms)?;
    let field = factored.expand();

    let m_const: f64 = (0..n)
        .filter(|&j| j != 0 && j != n - 1)
        .map(|j| lines[j].eval(vertices[0]))
        .product();
    let sin_theta = (2.0 * PI / n as f64).sin();

    let section_bases: Vec<Point2> = (0..n)
        .map(|i| scale(0.5, add(vertices[i], vertices[(i + 1) % n])))
        .collect();
    let section_dirs: Vec<Vec2> = section_bases
        .iter()
        .map(|&x| {
            let v = perp(factored.eval(x));
            scale(1.0 / norm(v), v)
        })
        .collect();
    let section_half_width = 0.9 * (PI / n as f64).cos();

    Ok(BuiltPolycycle {
        spec: spec.clone(),
        field,
        factored,
        vertices,
        lines,
        affine_factors,
        section_bases,
        section_dirs,
        section_half_width,
        sin_theta,
        m_const,
    })
}

/// Affine form equal to `at_start` at `start` and `at_end` at `end`, with
/// gradient along `end - start`.
fn along_edge_interpolant(start: Point2, end: Point2, at_start: f64, at_end: f64) -> AffineForm {
    let e = sub(end, start);
    let e2 = e[0] * e[0] + e[1] * e[1];
    let k = (at_end - at_start) / e2;
    AffineForm {
        a: k * e[0],
        b: k * e[1],
        c: at_start - k * (e[0] * start[0] + e[1] * start[1]),
    }
}

/// Closed-form eigenvalues at `p_s` and the hyperbolicity ratio |λs|/λu.
pub fn saddle_data(b: &BuiltPolycycle, s: usize) -> Result<(f64, f64, f64)> {
    let n = b.n();
    if s == 0 || s > n {
        return Err(Error::Invalid(format!("saddle index {s} outside 1..={n}")));
    }
    let p = b.vertex(s);
    let k = b.sin_theta * b.m_const;
    let along_own = -k * b.affine_factor(s).eval(p);
    let along_prev = k * b.affine_factor(s + n - 1).eval(p);
    let (neg, pos) = if along_own < along_prev {
        (along_own, along_prev)
    } else {
        (along_prev, along_own)
    };
    Ok((neg, pos, -neg / pos))
}

impl BuiltPolycycle {
    pub fn n(&self) -> usize {
        self.spec.n
    }

    pub fn vertex(&self, s: usize) -> Point2 {
        self.vertices[cyc(s, self.n())]
    }

    pub fn line(&self, s: usize) -> &LineForm {
        &self.lines[cyc(s, self.n())]
    }

    pub fn affine_factor(&self, s: usize) -> &AffineForm {
        &self.affine_factors[cyc(s, self.n())]
    }

    /// Factored form for precise evaluation.
    pub fn any_field(&self) -> AnyField {
        AnyField::Factored(self.factored.clone())
    }

    /// Transversal section across edge `i` at its midpoint.
    pub fn section(&self, i: usize) -> Section {
        let k = cyc(i, self.n());
        Section {
            base: self.section_bases[k],
            direction: self.section_dirs[k],
            half_width: self.section_half_width,
        }
    }

    pub fn sections(&self) -> Vec<Section> {
        (1..=self.n()).map(|i| self.section(i)).collect()
    }

    /// The directed side on edge `i`.
    pub fn connection(&self, i: usize) -> Connection {
        let n = self.n();
        let i = cyc(i, n) + 1;
        let next = i % n + 1;
        match self.spec.orientation {
            Orientation::Clockwise => Connection {
                edge: i,
                from: next,
                to: i,
            },
            Orientation::Counterclockwise => Connection {
                edge: i,
                from: i,
                to: next,
            },
        }
    }

    pub fn connections(&self) -> Vec<Connection> {
        (1..=self.n()).map(|i| self.connection(i)).collect()
    }

    /// Connection arriving at saddle `s`.
    pub fn incoming(&self, s: usize) -> Connection {
        let n = self.n();
        *self
            .connections()
            .iter()
            .find(|c| c.to == cyc(s, n) + 1)
            .expect("every saddle has an incoming side")
    }

    /// Connection leaving saddle `s`.
    pub fn outgoing(&self, s: usize) -> Connection {
        let n = self.n();
        *self
            .connections()
            .iter()
            .find(|c| c.from == cyc(s, n) + 1)
            .expect("every saddle has an outgoing side")
    }

    /// Edges in the order a returning orbit meets them, starting after `i`.
    pub fn circuit_after(&self, i: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.n());
        let mut e = cyc(i, self.n()) + 1;
        for _ in 0..self.n() {
            let to = self.connection(e).to;
            e = self.outgoing(to).edge;
            out.push(e);
        }
        out
    }

    /// Closed polygon through the vertices.
    pub fn polygon(&self) -> Vec<Point2> {
        let mut v = self.vertices.clone();
        v.push(self.vertices[0]);
        v
    }

    /// Checks the structural invariants against this record's own data.
    pub fn verify(&self) -> InvariantReport {
        verify_invariants(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    pub ok: bool,
    pub max_vertex_residual: f64,
    pub max_line_residual: f64,
    pub max_ratio_error: f64,
    pub min_edge_speed: f64,
    pub all_saddles: bool,
    pub degree: u32,
}

/// Vertex, invariant-line, eigen-ratio and edge-speed checks on the expanded field.
pub fn verify_invariants(b: &BuiltPolycycle) -> InvariantReport {
    let n = b.n();
    let f = &b.field;
    let mut vres: f64 = 0.0;
    let mut lres: f64 = 0.0;
    let mut rerr: f64 = 0.0;
    let mut min_speed = f64::INFINITY;
    let mut saddles = true;
    for s in 1..=n {
        let p = b.vertex(s);
        vres = vres
            .max(b.line(s).eval(p).abs())
            .max(b.line(s + n - 1).eval(p).abs());
        let x = f.eval(p);
        vres = vres.max(norm(x));
        let j = f.jacobian(p);
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det >= 0.0 {
            saddles = false;
        } else {
            let (ls, lu) = eigenvalues_2x2(j);
            rerr = rerr.max((-ls / lu - b.spec.ratios[s - 1]).abs());
        }
        let a = b.vertex(s + 1);
        let mut scale_max: f64 = 0.0;
        let mut normal_max: f64 = 0.0;
        let l = b.line(s);
        for k in 0..=100 {
            let t = k as f64 / 100.0;
            let w = add(a, scale(t, sub(p, a)));
            let xv = f.eval(w);
            scale_max = scale_max.max(norm(xv));
            normal_max = normal_max.max((xv[0] * l.alpha + xv[1] * l.beta).abs());
            if k > 0 && k < 100 && k % 2 == 0 {
                min_speed = min_speed.min(norm(xv));
            }
        }
        lres = lres.max(normal_max / scale_max.max(f64::MIN_POSITIVE));
    }
    let degree = f.degree();
    InvariantReport {
        ok: vres < 1e-10
            && lres < 1e-10
            && rerr < 1e-8
            && saddles
            && min_speed > 1e-8
            && degree as usize <= n,
        max_vertex_residual: vres,
        max_line_residual: lres,
        max_ratio_error: rerr,
        min_edge_speed: min_speed,
        all_saddles: saddles,
        degree,
    }
}

/// Real eigenvalues (negative, positive) of a 2x2 matrix with negative determinant.
pub fn eigenvalues_2x2(j: [[f64; 2]; 2]) -> (f64, f64) {
    let tr = j[0][0] + j[1][1];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
    // avoid cancellation in the smaller root
    let big = if tr >= 0.0 {
        0.5 * tr + disc
    } else {
        0.5 * tr - disc
    };
    let small = if big != 0.0 { det / big } else { 0.0 };
    if big < small {
        (big, small)
    } else {
        (small, big)
    }
}

/// X_μ = X + Σ μ_s H_s Y_s with H_s = Π_{j≠s} l_j and Y_s the outward normal of l_s.
pub fn build_main3_family(b: &BuiltPolycycle) -> PerturbationFamily {
    let n = b.n();
    let deformations = (0..n)
        .map(|s| Deformation {
            envelope: Envelope::line_product(
                (0..n).filter(|&j| j != s).map(|j| b.lines[j]).collect(),
            ),
            direction: Direction::Constant([-b.lines[s].alpha, -b.lines[s].beta]),
        })
        .collect();
    PerturbationFamily::new(b.any_field(), deformations).expect("line-product family is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyalg::fd_jacobian;

    fn cw(r: &[f64]) -> BuiltPolycycle {
        build_polycycle(&PolycycleSpec::new(r.to_vec(), Orientation::Clockwise)).unwrap()
    }

    #[test]
    fn triangle_vertices_and_constants() {
        let b = cw(&[2.0, 3.0, 0.5]);
        let want = [
            [-0.5, 0.8660254037844386],
            [-0.5, -0.8660254037844386],
            [1.0, 0.0],
        ];
        for (v, w) in b.vertices.iter().zip(want) {
            assert!((v[0] - w[0]).abs() < 1e-12 && (v[1] - w[1]).abs() < 1e-12);
        }
        assert!((b.sin_theta - 0.8660254).abs() < 1e-7);
        // distance from p_1 to the opposite side, read off the lines directly
        assert!((b.line(2).eval(b.vertex(1)) - 1.5).abs() < 1e-12);
        assert!((b.m_const - 1.5).abs() < 1e-12);
        assert!(norm(b.field.eval([1.0, 0.0])) < 1e-10);
    }

    #[test]
    fn affine_factor_conditions() {
        let b = cw(&[2.0, 3.0, 0.5]);
        for s in 1..=3 {
            let p = b.vertex(s);
            assert!((b.affine_factor(s).eval(p) - b.spec.ratios[s - 1]).abs() < 1e-12);
            assert!((b.affine_factor(s + 2).eval(p) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn eigenvalues_at_first_vertex() {
        let b = cw(&[2.0, 3.0, 0.5]);
        let (neg, pos, r) = saddle_data(&b, 1).unwrap();
        assert!((neg + 2.5980762).abs() < 1e-6 && (pos - 1.2990381).abs() < 1e-6);
        assert!((r - 2.0).abs() < 1e-12);
        let (a, c) = eigenvalues_2x2(fd_jacobian(&b.field, b.vertex(1), 1e-6));
        assert!((a - neg).abs() < 1e-8 && (c - pos).abs() < 1e-8);
    }

    #[test]
    fn square_ratio_three() {
        let b = cw(&[2.0, 0.5, 3.0, 1.0 / 3.0]);
        let (a, c) = eigenvalues_2x2(fd_jacobian(&b.field, b.vertex(3), 1e-6));
        assert!((-a / c - 3.0).abs() < 1e-8);
        assert!((saddle_data(&b, 3).unwrap().2 - 3.0).abs() < 1e-10);
        assert!((b.m_const - 2.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_saddles() {
        let b = cw(&[1.0, 1.0, 1.0]);
        for s in 1..=3 {
            let (neg, pos, _) = saddle_data(&b, s).unwrap();
            assert!((neg + pos).abs() < 1e-12);
        }
    }

    #[test]
    fn counterclockwise_variant() {
        let b = build_polycycle(&PolycycleSpec::new(
            vec![2.0, 3.0, 0.5],
            Orientation::Counterclockwise,
        ))
        .unwrap();
        let rep = b.verify();
        assert!(rep.ok, "{rep:?}");
        for s in 1..=3 {
            let p = b.vertex(s);
            assert!((b.affine_factor(s).eval(p) + 1.0).abs() < 1e-12);
            assert!((b.affine_factor(s + 2).eval(p) + b.spec.ratios[s - 1]).abs() < 1e-12);
        }
        assert_eq!(
            b.connection(1),
            Connection {
                edge: 1,
                from: 1,
                to: 2
            }
        );
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(
            build_polycycle(&PolycycleSpec::new(vec![1.0, 2.0], Orientation::Clockwise)).is_err()
        );
        assert!(build_polycycle(&PolycycleSpec::new(
            vec![1.0, -2.0, 1.0],
            Orientation::Clockwise
        ))
        .is_err());
        assert!(build_polycycle(&PolycycleSpec::new(
            vec![1.0, 0.0, 1.0],
            Orientation::Clockwise
        ))
        .is_err());
    }

    #[test]
    fn connections_and_circuit() {
        let b = cw(&[2.0, 1.0 / 3.0, 4.0]);
        assert_eq!(
            b.connection(1),
            Connection {
                edge: 1,
                from: 2,
                to: 1
            }
        );
        assert_eq!(b.incoming(3).edge, 3);
        assert_eq!(b.outgoing(3).edge, 2);
        assert_eq!(b.circuit_after(1), vec![3, 2, 1]);
        // sections point out of the polygon in the clockwise case
        for i in 1..=3 {
            let s = b.section(i);
            assert!(b.line(i).eval(add(s.base, scale(0.1, s.direction))) < 0.0);
        }
    }

    #[test]
    fn main3_family_structure() {
        let b = cw(&[2.0, 3.0, 0.5]);
        let fam = build_main3_family(&b);
        let x0 = fam.at(&[0.0, 0.0, 0.0]);
        for x in [[0.1, 0.2], [-0.3, 0.4], [0.9, -0.7]] {
            assert_eq!(x0.eval(x), b.factored.eval(x));
        }
        // H_1 vanishes on l_2 and l_3
        for t in [0.1, 0.5, 0.9] {
            for s in [2, 3] {
                let a = b.vertex(s);
                let c = b.vertex(s + 1);
                let w = add(a, scale(t, sub(c, a)));
                assert!(fam.deformations[0].envelope.eval(w).abs() < 1e-12);
            }
        }
    }
}
