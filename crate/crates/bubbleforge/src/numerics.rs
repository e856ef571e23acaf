//! Quadrature on closed contours, polyline intersection geometry and
//! Richardson extrapolation.

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

/// A closed curve parametrized over `t ∈ [0, 1)`.
///
/// `eval` returns the point and the derivative with respect to `t`. Curves on
/// the cylinder wind once: `z(t + 1) = z(t) + 1`.
pub trait ClosedCurve {
    fn eval(&self, t: f64) -> (Complex64, Complex64);
}

impl<F: Fn(f64) -> (Complex64, Complex64)> ClosedCurve for F {
    fn eval(&self, t: f64) -> (Complex64, Complex64) {
        self(t)
    }
}

/// Circle `center + radius·e^{2πit}` in the plane.
#[derive(Debug, Clone, Copy)]
pub struct Circle {
    pub center: Complex64,
    pub radius: f64,
}

impl ClosedCurve for Circle {
    fn eval(&self, t: f64) -> (Complex64, Complex64) {
        let e = Complex64::from_polar(1.0, 2.0 * PI * t);
        (
            self.center + self.radius * e,
            Complex64::new(0.0, 2.0 * PI) * self.radius * e,
        )
    }
}

/// Horizontal loop `t + i·height` on the cylinder.
#[derive(Debug, Clone, Copy)]
pub struct HorizontalLoop {
    pub height: f64,
}

impl ClosedCurve for HorizontalLoop {
    fn eval(&self, t: f64) -> (Complex64, Complex64) {
        (Complex64::new(t, self.height), Complex64::new(1.0, 0.0))
    }
}

/// A discretized contour.
#[derive(Debug, Clone, PartialEq)]
pub struct Contour {
    pub samples: Vec<Complex64>,
    pub closed: bool,
}

impl Contour {
    /// Samples `curve` at `n` uniform parameters.
    pub fn sample<C: ClosedCurve + ?Sized>(curve: &C, n: usize) -> Self {
        let samples = (0..n).map(|j| curve.eval(j as f64 / n as f64).0).collect();
        Contour {
            samples,
            closed: true,
        }
    }

    /// Number of turns around the cylinder: the sum of the steps of the real
    /// part, each reduced to `[-1/2, 1/2)`, including the closing step.
    pub fn winding_on_cylinder(&self) -> f64 {
        let n = self.samples.len();
        if n < 2 {
            return 0.0;
        }
        (0..n)
            .map(|j| wrap_half(self.samples[(j + 1) % n].re - self.samples[j].re))
            .sum()
    }
}

/// Reduces `x` modulo 1 into `[-1/2, 1/2)`.
pub fn wrap_half(x: f64) -> f64 {
    x - (x + 0.5).floor()
}

/// Trapezoid rule for `∮ integrand dz` along `curve` with `n` nodes.
///
/// For integrands analytic in an annulus around the curve the error decays
/// geometrically in `n`.
pub fn integrate_closed_contour<F, C>(integrand: F, curve: &C, n: usize) -> Result<Complex64>
where
    F: Fn(Complex64) -> Complex64,
    C: ClosedCurve + ?Sized,
{
    if n < 16 {
        return Err(Error::Contract(format!("need at least 16 nodes, got {n}")));
    }
    let mut sum = Complex64::new(0.0, 0.0);
    for j in 0..n {
        let (z, dz) = curve.eval(j as f64 / n as f64);
        let v = integrand(z);
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::Evaluation { index: j, z });
        }
        sum += v * dz;
    }
    Ok(sum / n as f64)
}

/// Trapezoid integration with node doubling until two consecutive values agree
/// to `tol` (absolute) or `n_max` is reached. Returns `(value, nodes used)`.
pub fn integrate_closed_contour_adaptive<F, C>(
    integrand: F,
    curve: &C,
    n_start: usize,
    n_max: usize,
    tol: f64,
) -> Result<(Complex64, usize)>
where
    F: Fn(Complex64) -> Complex64,
    C: ClosedCurve + ?Sized,
{
    let mut n = n_start.max(16);
    let mut prev = integrate_closed_contour(&integrand, curve, n)?;
    while n < n_max {
        n *= 2;
        let next = integrate_closed_contour(&integrand, curve, n)?;
        if (next - prev).norm() <= tol * (1.0 + next.norm()) {
            return Ok((next, n));
        }
        prev = next;
    }
    Err(Error::Convergence(format!(
        "contour quadrature not stable at {n} nodes"
    )))
}

/// A planar polyline.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline2D {
    pub vertices: Vec<[f64; 2]>,
}

impl Polyline2D {
    pub fn new(vertices: Vec<[f64; 2]>) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(Error::Contract("polyline needs at least 2 vertices".into()));
        }
        if vertices
            .iter()
            .any(|v| !(v[0].is_finite() && v[1].is_finite()))
        {
            return Err(Error::Contract("polyline vertices must be finite".into()));
        }
        Ok(Polyline2D { vertices })
    }

    pub fn from_complex(points: &[Complex64]) -> Result<Self> {
        Self::new(points.iter().map(|z| [z.re, z.im]).collect())
    }

    fn segment(&self, i: usize) -> ([f64; 2], [f64; 2]) {
        (self.vertices[i], self.vertices[i + 1])
    }

    fn segments(&self) -> usize {
        self.vertices.len() - 1
    }

    fn extent(&self) -> f64 {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for v in &self.vertices {
            for k in 0..2 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        (hi[0] - lo[0]).max(hi[1] - lo[1])
    }
}

/// How two segments meet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ContactKind {
    /// Proper transversal crossing in the interior of both segments.
    Crossing,
    /// The contact point is within the vertex tolerance of a segment end.
    VertexTouch,
    /// Collinear segments sharing a stretch of positive length.
    Overlap,
}

/// A contact between segment `seg_a` of the first polyline and `seg_b` of the
/// second, at parameters `t_a`, `t_b` along those segments.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Intersection {
    pub point: [f64; 2],
    pub seg_a: usize,
    pub seg_b: usize,
    pub t_a: f64,
    pub t_b: f64,
    pub kind: ContactKind,
    /// |sin| of the angle between the segments.
    pub sin_angle: f64,
}

/// Contacts grouped by kind.
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize)]
pub struct IntersectionSet {
    pub crossings: Vec<Intersection>,
    pub vertex_touches: Vec<Intersection>,
    pub overlaps: Vec<Intersection>,
}

impl IntersectionSet {
    fn push(&mut self, x: Intersection) {
        match x.kind {
            ContactKind::Crossing => self.crossings.push(x),
            ContactKind::VertexTouch => self.vertex_touches.push(x),
            ContactKind::Overlap => self.overlaps.push(x),
        }
    }
}

/// Parameter distance to a segment end below which a contact counts as a
/// vertex touch.
pub const VERTEX_TOL: f64 = 1e-12;
/// Relative tolerance for treating two segments as collinear.
const COLLINEAR_TOL: f64 = 1e-9;

fn contact(
    p: ([f64; 2], [f64; 2]),
    q: ([f64; 2], [f64; 2]),
    scale: f64,
) -> Option<(f64, f64, [f64; 2], ContactKind, f64)> {
    let r = [p.1[0] - p.0[0], p.1[1] - p.0[1]];
    let s = [q.1[0] - q.0[0], q.1[1] - q.0[1]];
    let rl = r[0].hypot(r[1]);
    let sl = s[0].hypot(s[1]);
    if rl == 0.0 || sl == 0.0 {
        return None;
    }
    let cross = r[0] * s[1] - r[1] * s[0];
    let qp = [q.0[0] - p.0[0], q.0[1] - p.0[1]];
    let sin_angle = (cross / (rl * sl)).abs();
    let dist_tol = COLLINEAR_TOL * scale.max(rl).max(sl);
    // distance of q's endpoints from p's supporting line
    let d0 = (r[0] * qp[1] - r[1] * qp[0]) / rl;
    let qp1 = [q.1[0] - p.0[0], q.1[1] - p.0[1]];
    let d1 = (r[0] * qp1[1] - r[1] * qp1[0]) / rl;
    if d0.abs() <= dist_tol && d1.abs() <= dist_tol {
        // collinear: overlap iff projections share positive length
        let t0 = (qp[0] * r[0] + qp[1] * r[1]) / (rl * rl);
        let t1 = (qp1[0] * r[0] + qp1[1] * r[1]) / (rl * rl);
        let (lo, hi) = (t0.min(t1).max(0.0), t0.max(t1).min(1.0));
        if hi - lo > VERTEX_TOL {
            let tm = 0.5 * (lo + hi);
            let pt = [p.0[0] + tm * r[0], p.0[1] + tm * r[1]];
            let tb = ((pt[0] - q.0[0]) * s[0] + (pt[1] - q.0[1]) * s[1]) / (sl * sl);
            return Some((tm, tb, pt, ContactKind::Overlap, 0.0));
        }
        return None;
    }
    if cross == 0.0 {
        return None;
    }
    let t = (qp[0] * s[1] - qp[1] * s[0]) / cross;
    let u = (qp[0] * r[1] - qp[1] * r[0]) / cross;
    let lo = -VERTEX_TOL;
    let hi = 1.0 + VERTEX_TOL;
    if t < lo || t > hi || u < lo || u > hi {
        return None;
    }
    let pt = [p.0[0] + t * r[0], p.0[1] + t * r[1]];
    let interior = |x: f64| x > VERTEX_TOL && x < 1.0 - VERTEX_TOL;
    let kind = if interior(t) && interior(u) {
        ContactKind::Crossing
    } else {
        ContactKind::VertexTouch
    };
    Some((t, u, pt, kind, sin_angle))
}

fn bbox_disjoint(p: ([f64; 2], [f64; 2]), q: ([f64; 2], [f64; 2]), pad: f64) -> bool {
    let (pmin0, pmax0) = (p.0[0].min(p.1[0]), p.0[0].max(p.1[0]));
    let (pmin1, pmax1) = (p.0[1].min(p.1[1]), p.0[1].max(p.1[1]));
    let (qmin0, qmax0) = (q.0[0].min(q.1[0]), q.0[0].max(q.1[0]));
    let (qmin1, qmax1) = (q.0[1].min(q.1[1]), q.0[1].max(q.1[1]));
    pmax0 + pad < qmin0 || qmax0 + pad < pmin0 || pmax1 + pad < qmin1 || qmax1 + pad < pmin1
}

/// All contacts between segments of `a` and `b`.
///
/// When `a` and `b` are the same object this runs in self-intersection mode:
/// each unordered segment pair is tested once and adjacent segments (which
/// share an endpoint) are skipped.
pub fn polyline_intersections(a: &Polyline2D, b: &Polyline2D) -> IntersectionSet {
    if std::ptr::eq(a, b) {
        return polyline_self_intersections(a);
    }
    let scale = a.extent().max(b.extent()).max(f64::MIN_POSITIVE);
    let pad = COLLINEAR_TOL * scale;
    let mut out = IntersectionSet::default();
    for i in 0..a.segments() {
        let p = a.segment(i);
        for j in 0..b.segments() {
            let q = b.segment(j);
            if bbox_disjoint(p, q, pad) {
                continue;
            }
            if let Some((t, u, pt, kind, sin_angle)) = contact(p, q, scale) {
                out.push(Intersection {
                    point: pt,
                    seg_a: i,
                    seg_b: j,
                    t_a: t,
                    t_b: u,
                    kind,
                    sin_angle,
                });
            }
        }
    }
    out
}

/// Self-intersections of `a`, excluding adjacent segments and shared endpoints.
pub fn polyline_self_intersections(a: &Polyline2D) -> IntersectionSet {
    let scale = a.extent().max(f64::MIN_POSITIVE);
    let pad = COLLINEAR_TOL * scale;
    let n = a.segments();
    let (first, last) = (a.vertices[0], a.vertices[n]);
    let closed = n > 2 && (first[0] - last[0]).hypot(first[1] - last[1]) <= VERTEX_TOL * scale;
    let mut out = IntersectionSet::default();
    for i in 0..n {
        let p = a.segment(i);
        for j in (i + 2)..n {
            if closed && i == 0 && j == n - 1 {
                continue;
            }
            let q = a.segment(j);
            if bbox_disjoint(p, q, pad) {
                continue;
            }
            if let Some((t, u, pt, kind, sin_angle)) = contact(p, q, scale) {
                out.push(Intersection {
                    point: pt,
                    seg_a: i,
                    seg_b: j,
                    t_a: t,
                    t_b: u,
                    kind,
                    sin_angle,
                });
            }
        }
    }
    out
}

/// Result of Richardson extrapolation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extrapolation {
    pub value: Complex64,
    /// Difference of the last two extrapolants.
    pub error_estimate: f64,
    pub order: f64,
}

/// Extrapolates `value(h)` to `h = 0` assuming
/// `value(h) = v0 + c₁·h^order + c₂·h^(order+1) + …`.
///
/// The `h` values must form a decreasing geometric schedule. With `m` samples
/// the first `m − 1` powers are eliminated.
pub fn richardson_extrapolate(samples: &[(f64, Complex64)], order: f64) -> Result<Extrapolation> {
    if samples.len() < 2 {
        return Err(Error::Contract(
            "richardson extrapolation needs at least 2 samples".into(),
        ));
    }
    if !(order > 0.0) {
        return Err(Error::Contract(
            "extrapolation order must be positive".into(),
        ));
    }
    let ratio = samples[0].0 / samples[1].0;
    if !(ratio > 1.0) || samples.iter().any(|s| !(s.0 > 0.0)) {
        return Err(Error::Contract(
            "step sizes must be positive and decreasing".into(),
        ));
    }
    for w in samples.windows(2) {
        let r = w[0].0 / w[1].0;
        if (r - ratio).abs() > 1e-9 * ratio {
            return Err(Error::Contract(
                "step sizes must form a geometric schedule".into(),
            ));
        }
    }
    let mut row: Vec<Complex64> = samples.iter().map(|s| s.1).collect();
    let mut diagonal = vec![row[row.len() - 1]];
    let mut p = order;
    while row.len() > 1 {
        let factor = ratio.powf(p) - 1.0;
        row = row
            .windows(2)
            .map(|w| w[1] + (w[1] - w[0]) / factor)
            .collect();
        diagonal.push(row[row.len() - 1]);
        p += 1.0;
    }
    let n = diagonal.len();
    Ok(Extrapolation {
        value: diagonal[n - 1],
        error_estimate: (diagonal[n - 1] - diagonal[n - 2]).norm(),
        order,
    })
}

/// Gauss–Legendre integration of a real function on `[a, b]` with adaptive
/// bisection until the value is stable to `tol` (absolute).
pub fn integrate_interval<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let rule = gauss_quad::GaussLegendre::new(20).expect("degree 20 is valid");
    fn rec<F: Fn(f64) -> f64>(
        rule: &gauss_quad::GaussLegendre,
        f: &F,
        a: f64,
        b: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let left = rule.integrate(a, m, f);
        let right = rule.integrate(m, b, f);
        if depth == 0 || (left + right - whole).abs() <= tol {
            return left + right;
        }
        rec(rule, f, a, m, left, 0.5 * tol, depth - 1)
            + rec(rule, f, m, b, right, 0.5 * tol, depth - 1)
    }
    let whole = rule.integrate(a, b, f);
    rec(&rule, f, a, b, whole, tol, 30)
}
