//! Sparse bivariate polynomials, affine and line forms, planar vector fields.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::real::{lift, lower, Real};

pub type Point2 = [f64; 2];
pub type Vec2 = [f64; 2];

#[inline]
pub fn wedge(u: Vec2, v: Vec2) -> f64 {
    u[0] * v[1] - u[1] * v[0]
}

#[inline]
pub fn wedge_t<T: Real>(u: [T; 2], v: [T; 2]) -> T {
    u[0] * v[1] - u[1] * v[0]
}

#[inline]
pub fn dot(u: Vec2, v: Vec2) -> f64 {
    u[0] * v[0] + u[1] * v[1]
}

#[inline]
pub fn norm(u: Vec2) -> f64 {
    u[0].hypot(u[1])
}

#[inline]
pub fn sub(u: Vec2, v: Vec2) -> Vec2 {
    [u[0] - v[0], u[1] - v[1]]
}

#[inline]
pub fn add(u: Vec2, v: Vec2) -> Vec2 {
    [u[0] + v[0], u[1] + v[1]]
}

#[inline]
pub fn scale(a: f64, u: Vec2) -> Vec2 {
    [a * u[0], a * u[1]]
}

/// Rotation by +90 degrees.
#[inline]
pub fn perp(u: Vec2) -> Vec2 {
    [-u[1], u[0]]
}

/// Sparse polynomial in (x1, x2) with terms sorted by degree pair.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Poly2 {
    terms: Vec<(u32, u32, f64)>,
}

impl Poly2 {
    /// Builds a polynomial, merging repeated degree pairs and dropping zeros.
    pub fn new(terms: impl IntoIterator<Item = (u32, u32, f64)>) -> Result<Self> {
        let mut acc: BTreeMap<(u32, u32), f64> = BTreeMap::new();
        for (i, j, c) in terms {
            if !c.is_finite() {
                return Err(Error::Invalid(format!(
                    "non-finite coefficient {c} for x1^{i} x2^{j}"
                )));
            }
            *acc.entry((i, j)).or_insert(0.0) += c;
        }
        Ok(Self::from_map(acc))
    }

    fn from_map(acc: BTreeMap<(u32, u32), f64>) -> Self {
        let terms = acc
            .into_iter()
            .filter(|&(_, c)| c != 0.0)
            .map(|((i, j), c)| (i, j, c))
            .collect();
        Poly2 { terms }
    }

    pub fn zero() -> Self {
        Poly2 { terms: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        Self::monomial(0, 0, c)
    }

    pub fn monomial(i: u32, j: u32, c: f64) -> Self {
        if c == 0.0 {
            Self::zero()
        } else {
            Poly2 {
                terms: vec![(i, j, c)],
            }
        }
    }

    pub fn x1() -> Self {
        Self::monomial(1, 0, 1.0)
    }

    pub fn x2() -> Self {
        Self::monomial(0, 1, 1.0)
    }

    pub fn terms(&self) -> &[(u32, u32, f64)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree; 0 for the zero polynomial.
    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|&(i, j, _)| i + j).max().unwrap_or(0)
    }

    pub fn coeff(&self, i: u32, j: u32) -> f64 {
        self.terms
            .binary_search_by(|&(a, b, _)| (a, b).cmp(&(i, j)))
            .map(|k| self.terms[k].2)
            .unwrap_or(0.0)
    }

    pub fn add(&self, other: &Poly2) -> Poly2 {
        let mut acc: BTreeMap<(u32, u32), f64> = BTreeMap::new();
        for &(i, j, c) in self.terms.iter().chain(other.terms.iter()) {
            *acc.entry((i, j)).or_insert(0.0) += c;
        }
        Self::from_map(acc)
    }

    pub fn sub(&self, other: &Poly2) -> Poly2 {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, a: f64) -> Poly2 {
        if a == 0.0 {
            return Self::zero();
        }
        Poly2 {
            terms: self
                .terms
                .iter()
                .map(|&(i, j, c)| (i, j, a * c))
                .filter(|t| t.2 != 0.0)
                .collect(),
        }
    }

    pub fn mul(&self, other: &Poly2) -> Poly2 {
        let mut acc: BTreeMap<(u32, u32), f64> = BTreeMap::new();
        for &(i, j, c) in &self.terms {
            for &(k, l, d) in &other.terms {
                *acc.entry((i + k, j + l)).or_insert(0.0) += c * d;
            }
        }
        Self::from_map(acc)
    }

    pub fn d_x1(&self) -> Poly2 {
        Poly2 {
            terms: self
                .terms
                .iter()
                .filter(|t| t.0 > 0)
                .map(|&(i, j, c)| (i - 1, j, c * i as f64))
                .collect(),
        }
    }

    pub fn d_x2(&self) -> Poly2 {
        let mut terms: Vec<_> = self
            .terms
            .iter()
            .filter(|t| t.1 > 0)
            .map(|&(i, j, c)| (i, j - 1, c * j as f64))
            .collect();
        terms.sort_by_key(|t| (t.0, t.1));
        Poly2 { terms }
    }

    pub fn eval(&self, x: Point2) -> f64 {
        self.eval_t::<f64>(x)
    }

    /// Horner evaluation: outer scheme in x1 over inner schemes in x2.
    pub fn eval_t<T: Real>(&self, x: [T; 2]) -> T {
        let terms = &self.terms;
        if terms.is_empty() {
            return T::zero();
        }
        let mut outer = T::zero();
        let mut prev_i: Option<u32> = None;
        let mut end = terms.len();
        while end > 0 {
            let i = terms[end - 1].0;
            let mut start = end - 1;
            while start > 0 && terms[start - 1].0 == i {
                start -= 1;
            }
            // inner Horner over terms[start..end], descending j
            let mut inner = T::zero();
            let mut prev_j: Option<u32> = None;
            for k in (start..end).rev() {
                let (_, j, c) = terms[k];
                if let Some(pj) = prev_j {
                    inner *= x[1].ipow(pj - j);
                }
                inner += T::from_f64(c);
                prev_j = Some(j);
            }
            inner *= x[1].ipow(prev_j.unwrap_or(0));
            if let Some(pi) = prev_i {
                outer *= x[0].ipow(pi - i);
            }
            outer += inner;
            prev_i = Some(i);
            end = start;
        }
        outer * x[0].ipow(prev_i.unwrap_or(0))
    }
}

impl Serialize for Poly2 {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeSeq;
        let mut seq = s.serialize_seq(Some(self.terms.len()))?;
        for &(i, j, c) in &self.terms {
            seq.serialize_element(&(i, j, c))?;
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for Poly2 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw: Vec<(u32, u32, f64)> = Vec::deserialize(d)?;
        let mut seen = std::collections::BTreeSet::new();
        for &(i, j, _) in &raw {
            if !seen.insert((i, j)) {
                return Err(D::Error::custom(format!("repeated degree pair ({i}, {j})")));
            }
        }
        Poly2::new(raw).map_err(D::Error::custom)
    }
}

/// a·x1 + b·x2 + c
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineForm {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl AffineForm {
    pub fn constant(c: f64) -> Self {
        AffineForm { a: 0.0, b: 0.0, c }
    }

    #[inline]
    pub fn eval(&self, x: Point2) -> f64 {
        self.a * x[0] + self.b * x[1] + self.c
    }

    #[inline]
    pub fn eval_t<T: Real>(&self, x: [T; 2]) -> T {
        T::from_f64(self.a) * x[0] + T::from_f64(self.b) * x[1] + T::from_f64(self.c)
    }

    pub fn gradient(&self) -> Vec2 {
        [self.a, self.b]
    }

    pub fn to_poly(&self) -> Poly2 {
        Poly2::new([(1, 0, self.a), (0, 1, self.b), (0, 0, self.c)]).expect("finite affine form")
    }
}

/// l(x) = alpha·x1 + beta·x2 − offset with (alpha, beta) a unit normal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineForm {
    pub alpha: f64,
    pub beta: f64,
    pub offset: f64,
}

impl LineForm {
    pub fn new(alpha: f64, beta: f64, offset: f64) -> Result<Self> {
        if !(alpha.is_finite() && beta.is_finite() && offset.is_finite()) {
            return Err(Error::Invalid("non-finite line coefficients".into()));
        }
        let nrm = alpha.hypot(beta);
        if (nrm - 1.0).abs() > 1e-12 {
            return Err(Error::Invalid(format!(
                "line normal has length {nrm}, expected 1"
            )));
        }
        Ok(LineForm {
            alpha,
            beta,
            offset,
        })
    }

    /// Line through `a` and `b`, normal oriented so that `inside` is positive.
    pub fn through(a: Point2, b: Point2, inside: Point2) -> Result<Self> {
        let d = sub(b, a);
        let len = norm(d);
        if len == 0.0 {
            return Err(Error::Invalid("coincident points define no line".into()));
        }
        let mut n = [-d[1] / len, d[0] / len];
        let mut off = dot(n, a);
        if dot(n, inside) - off < 0.0 {
            n = [-n[0], -n[1]];
            off = -off;
        }
        Ok(LineForm {
            alpha: n[0],
            beta: n[1],
            offset: off,
        })
    }

    #[inline]
    pub fn eval(&self, x: Point2) -> f64 {
        self.alpha * x[0] + self.beta * x[1] - self.offset
    }

    #[inline]
    pub fn eval_t<T: Real>(&self, x: [T; 2]) -> T {
        T::from_f64(self.alpha) * x[0] + T::from_f64(self.beta) * x[1] - T::from_f64(self.offset)
    }

    pub fn normal(&self) -> Vec2 {
        [self.alpha, self.beta]
    }

    /// Unit vector along the line, normal rotated by +90 degrees.
    pub fn tangent(&self) -> Vec2 {
        perp(self.normal())
    }

    pub fn to_poly(&self) -> Poly2 {
        Poly2::new([(1, 0, self.alpha), (0, 1, self.beta), (0, 0, -self.offset)])
            .expect("finite line form")
    }
}

/// Anything that can be evaluated as a planar vector field in any working precision.
pub trait PlanarField: Send + Sync {
    fn eval_t<T: Real>(&self, x: [T; 2]) -> [T; 2];
    /// Row-major Jacobian `[[dP/dx1, dP/dx2], [dQ/dx1, dQ/dx2]]`.
    fn jacobian_t<T: Real>(&self, x: [T; 2]) -> [[T; 2]; 2];

    fn eval(&self, x: Point2) -> Vec2 {
        self.eval_t::<f64>(x)
    }
    fn jacobian(&self, x: Point2) -> [[f64; 2]; 2] {
        self.jacobian_t::<f64>(x)
    }
    fn divergence_t<T: Real>(&self, x: [T; 2]) -> T {
        let j = self.jacobian_t(x);
        j[0][0] + j[1][1]
    }
    fn divergence(&self, x: Point2) -> f64 {
        self.divergence_t::<f64>(x)
    }
}

impl<F: PlanarField> PlanarField for &F {
    fn eval_t<T: Real>(&self, x: [T; 2]) -> [T; 2] {
        (**self).eval_t(x)
    }
    fn jacobian_t<T: Real>(&self, x: [T; 2]) -> [[T; 2]; 2] {
        (**self).jacobian_t(x)
    }
}

#[derive(Debug, Clone)]
struct Partials {
    p1: Poly2,
    p2: Poly2,
    q1: Poly2,
    q2: Poly2,
}

/// X = (P, Q) with symbolically differentiated partials cached on first use.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct VectorField2 {
    pub p: Poly2,
    pub q: Poly2,
    #[serde(skip)]
    partials: OnceLock<Partials>,
}

impl PartialEq for VectorField2 {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p && self.q == other.q
    }
}

impl VectorField2 {
    pub fn new(p: Poly2, q: Poly2) -> Self {
        VectorField2 {
            p,
            q,
            partials: OnceLock::new(),
        }
    }

    fn partials(&self) -> &Partials {
        self.partials.get_or_init(|| Partials {
            p1: self.p.d_x1(),
            p2: self.p.d_x2(),
            q1: self.q.d_x1(),
            q2: self.q.d_x2(),
        })
    }

    pub fn degree(&self) -> u32 {
        self.p.degree().max(self.q.degree())
    }

    /// X⊥ = (−Q, P).
    pub fn perp(&self) -> VectorField2 {
        VectorField2::new(self.q.scale(-1.0), self.p.clone())
    }

    pub fn add(&self, other: &VectorField2) -> VectorField2 {
        VectorField2::new(self.p.add(&other.p), self.q.add(&other.q))
    }

    pub fn scale(&self, a: f64) -> VectorField2 {
        VectorField2::new(self.p.scale(a), self.q.scale(a))
    }

    /// Scalar polynomial times a constant vector.
    pub fn from_scalar_times(s: &Poly2, v: Vec2) -> VectorField2 {
        VectorField2::new(s.scale(v[0]), s.scale(v[1]))
    }
}

impl PlanarField for VectorField2 {
    fn eval_t<T: Real>(&self, x: [T; 2]) -> [T; 2] {
        [self.p.eval_t(x), self.q.eval_t(x)]
    }

    fn jacobian_t<T: Real>(&self, x: [T; 2]) -> [[T; 2]; 2] {
        let d = self.partials();
        [
            [d.p1.eval_t(x), d.p2.eval_t(x)],
            [d.q1.eval_t(x), d.q2.eval_t(x)],
        ]
    }
}

pub fn eval_field(f: &VectorField2, x: Point2) -> Vec2 {
    f.eval(x)
}

pub fn divergence(f: &VectorField2, x: Point2) -> f64 {
    PlanarField::divergence(f, x)
}

/// One summand of a factored field: (Π_{k∈lines} l_k(x)) · scalar(x) · vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductTerm {
    pub lines: Vec<usize>,
    pub scalar: AffineForm,
    pub vector: Vec2,
}

/// A field kept as a sum of products of line forms. Evaluating it in factored
/// form keeps each line l_i exactly invariant up to the arithmetic precision,
/// which the expanded monomial form cannot guarantee.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductField {
    pub lines: Vec<LineForm>,
    pub terms: Vec<ProductTerm>,
}

impl ProductField {
    pub fn new(lines: Vec<LineForm>, terms: Vec<ProductTerm>) -> Result<Self> {
        for t in &terms {
            if let Some(&k) = t.lines.iter().find(|&&k| k >= lines.len()) {
                return Err(Error::Invalid(format!("term references missing line {k}")));
            }
        }
        Ok(ProductField { lines, terms })
    }

    /// Expands into monomial form.
    pub fn expand(&self) -> VectorField2 {
        let line_polys: Vec<Poly2> = self.lines.iter().map(|l| l.to_poly()).collect();
        let mut p = Poly2::zero();
        let mut q = Poly2::zero();
        for t in &self.terms {
            let mut s = t.scalar.to_poly();
            for &k in &t.lines {
                s = s.mul(&line_polys[k]);
            }
            p = p.add(&s.scale(t.vector[0]));
            q = q.add(&s.scale(t.vector[1]));
        }
        VectorField2::new(p, q)
    }

    pub fn degree(&self) -> u32 {
        self.terms
            .iter()
            .map(|t| t.lines.len() as u32 + u32::from(t.scalar.a != 0.0 || t.scalar.b != 0.0))
            .max()
            .unwrap_or(0)
    }

    fn line_values<T: Real>(&self, x: [T; 2]) -> Vec<T> {
        self.lines.iter().map(|l| l.eval_t(x)).collect()
    }

    /// Value and gradient of one term's scalar factor Π l_k · A.
    fn term_scalar<T: Real>(&self, t: &ProductTerm, lv: &[T], x: [T; 2]) -> (T, [T; 2]) {
        let mut val = t.scalar.eval_t(x);
        let mut grad = [T::from_f64(t.scalar.a), T::from_f64(t.scalar.b)];
        for &k in &t.lines {
            let l = &self.lines[k];
            let lk = lv[k];
            grad = [
                grad[0] * lk + val * T::from_f64(l.alpha),
                grad[1] * lk + val * T::from_f64(l.beta),
            ];
            val *= lk;
        }
        (val, grad)
    }
}

impl PlanarField for ProductField {
    fn eval_t<T: Real>(&self, x: [T; 2]) -> [T; 2] {
        let lv = self.line_values(x);
        let mut out = [T::zero(), T::zero()];
        for t in &self.terms {
            let mut s = t.scalar.eval_t(x);
            for &k in &t.lines {
                s *= lv[k];
            }
            out[0] += s * T::from_f64(t.vector[0]);
            out[1] += s * T::from_f64(t.vector[1]);
        }
        out
    }

    fn jacobian_t<T: Real>(&self, x: [T; 2]) -> [[T; 2]; 2] {
        let lv = self.line_values(x);
        let mut j = [[T::zero(); 2]; 2];
        for t in &self.terms {
            let (_, g) = self.term_scalar(t, &lv, x);
            for r in 0..2 {
                let v = T::from_f64(t.vector[r]);
                j[r][0] += g[0] * v;
                j[r][1] += g[1] * v;
            }
        }
        j
    }
}

/// Either representation of a field, as stored in reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum AnyField {
    Monomial(VectorField2),
    Factored(ProductField),
}

impl AnyField {
    pub fn to_monomial(&self) -> VectorField2 {
        match self {
            AnyField::Monomial(f) => f.clone(),
            AnyField::Factored(f) => f.expand(),
        }
    }
}

impl PlanarField for AnyField {
    fn eval_t<T: Real>(&self, x: [T; 2]) -> [T; 2] {
        match self {
            AnyField::Monomial(f) => f.eval_t(x),
            AnyField::Factored(f) => f.eval_t(x),
        }
    }
    fn jacobian_t<T: Real>(&self, x: [T; 2]) -> [[T; 2]; 2] {
        match self {
            AnyField::Monomial(f) => f.jacobian_t(x),
            AnyField::Factored(f) => f.jacobian_t(x),
        }
    }
}

/// Central finite-difference Jacobian, used as an independent check.
pub fn fd_jacobian<F: PlanarField>(f: &F, x: Point2, h: f64) -> [[f64; 2]; 2] {
    let mut j = [[0.0; 2]; 2];
    for c in 0..2 {
        let mut xp = x;
        let mut xm = x;
        xp[c] += h;
        xm[c] -= h;
        let fp = f.eval(xp);
        let fm = f.eval(xm);
        for r in 0..2 {
            j[r][c] = (fp[r] - fm[r]) / (2.0 * h);
        }
    }
    j
}

/// Evaluates in double-double and rounds back.
pub fn eval_precise<F: PlanarField>(f: &F, x: Point2) -> Vec2 {
    lower(f.eval_t::<crate::real::TwoFloat>(lift(x)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(terms: &[(u32, u32, f64)]) -> Poly2 {
        Poly2::new(terms.iter().copied()).unwrap()
    }

    #[test]
    fn eval_examples() {
        let f = VectorField2::new(Poly2::x1(), Poly2::x2());
        assert_eq!(f.eval([0.0, 0.0]), [0.0, 0.0]);
        let g = VectorField2::new(p(&[(2, 0, 1.0)]), p(&[(1, 1, 1.0)]));
        assert_eq!(g.eval([2.0, 3.0]), [4.0, 6.0]);
    }

    #[test]
    fn horner_matches_naive_sum() {
        let q = p(&[
            (0, 0, 1.5),
            (3, 1, -2.0),
            (0, 4, 0.25),
            (2, 2, 3.0),
            (5, 0, -1.0),
            (1, 3, 0.5),
        ]);
        let x: [f64; 2] = [0.7, -1.3];
        let naive: f64 = q
            .terms()
            .iter()
            .map(|&(i, j, c)| c * x[0].powi(i as i32) * x[1].powi(j as i32))
            .sum();
        assert!((q.eval(x) - naive).abs() < 1e-13);
    }

    #[test]
    fn divergence_of_linear_and_rotation() {
        let f = VectorField2::new(Poly2::x1(), Poly2::x2());
        assert_eq!(divergence(&f, [3.0, -1.0]), 2.0);
        let r = VectorField2::new(Poly2::x2().scale(-1.0), Poly2::x1());
        assert_eq!(divergence(&r, [0.4, 2.0]), 0.0);
    }

    #[test]
    fn wedge_examples() {
        assert_eq!(wedge([1.0, 0.0], [0.0, 1.0]), 1.0);
        assert_eq!(wedge([3.7, -2.1], [3.7, -2.1]), 0.0);
        assert_eq!(wedge([2.0, 3.0], [4.0, 5.0]), -2.0);
    }

    #[test]
    fn new_merges_and_drops_zeros() {
        let q = p(&[(1, 0, 2.0), (1, 0, -2.0), (0, 1, 1.0), (0, 0, 0.0)]);
        assert_eq!(q.terms(), &[(0, 1, 1.0)]);
        assert!(Poly2::new([(0, 0, f64::NAN)]).is_err());
    }

    #[test]
    fn json_round_trip_and_duplicate_rejection() {
        let f = VectorField2::new(p(&[(2, 0, 1.0), (0, 1, -3.5)]), p(&[(1, 1, 2.0)]));
        let s = serde_json::to_string(&f).unwrap();
        assert_eq!(s, r#"{"p":[[0,1,-3.5],[2,0,1.0]],"q":[[1,1,2.0]]}"#);
        let g: VectorField2 = serde_json::from_str(&s).unwrap();
        assert_eq!(f, g);
        assert!(serde_json::from_str::<Poly2>("[[1,0,1.0],[1,0,2.0]]").is_err());
    }

    #[test]
    fn line_through_orients_inward() {
        let l = LineForm::through([1.0, 0.0], [0.0, 1.0], [0.0, 0.0]).unwrap();
        assert!(l.eval([0.0, 0.0]) > 0.0);
        assert!(l.eval([1.0, 0.0]).abs() < 1e-15);
        assert!(LineForm::new(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn product_field_matches_expansion() {
        let l1 = LineForm::through([1.0, 0.0], [0.0, 1.0], [0.0, 0.0]).unwrap();
        let l2 = LineForm::through([-1.0, 0.0], [0.0, 1.0], [0.0, 0.0]).unwrap();
        let pf = ProductField::new(
            vec![l1, l2],
            vec![
                ProductTerm {
                    lines: vec![0, 1],
                    scalar: AffineForm {
                        a: 0.3,
                        b: -1.0,
                        c: 2.0,
                    },
                    vector: [1.0, -0.5],
                },
                ProductTerm {
                    lines: vec![1],
                    scalar: AffineForm::constant(1.5),
                    vector: [0.2, 0.7],
                },
            ],
        )
        .unwrap();
        let e = pf.expand();
        assert_eq!(pf.degree(), 3);
        for x in [[0.1, 0.2], [-0.7, 0.4], [1.3, -2.0]] {
            let a = pf.eval(x);
            let b = e.eval(x);
            assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
            let ja = pf.jacobian(x);
            let jb = e.jacobian(x);
            for r in 0..2 {
                for c in 0..2 {
                    assert!((ja[r][c] - jb[r][c]).abs() < 1e-12);
                }
            }
        }
    }
}
