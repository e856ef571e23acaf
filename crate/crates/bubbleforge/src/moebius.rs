//! Möbius transforms, their fixed points, and the closed-form complex rotation
//! number of Möbius-induced circle maps.

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

const TAU: f64 = 2.0 * PI;
const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// `w ↦ (a w + b)/(c w + d)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoebiusTransform {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub d: Complex64,
}

/// A fixed point on the Riemann sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FixedPoint {
    Finite(Complex64),
    Infinity,
}

impl FixedPoint {
    pub fn finite(self) -> Option<Complex64> {
        match self {
            FixedPoint::Finite(p) => Some(p),
            FixedPoint::Infinity => None,
        }
    }

    fn modulus(self) -> f64 {
        match self {
            FixedPoint::Finite(p) => p.norm(),
            FixedPoint::Infinity => f64::INFINITY,
        }
    }
}

/// The two fixed points (equal in the parabolic case) and their multipliers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointData {
    pub points: [FixedPoint; 2],
    pub multipliers: [Complex64; 2],
    pub parabolic: bool,
}

impl MoebiusTransform {
    pub fn new(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Result<Self> {
        let m = MoebiusTransform { a, b, c, d };
        if m.determinant().norm() <= 1e-300 {
            return Err(Error::Contract("ad − bc must be nonzero".into()));
        }
        Ok(m)
    }

    pub fn identity() -> Self {
        MoebiusTransform {
            a: c(1.0, 0.0),
            b: c(0.0, 0.0),
            c: c(0.0, 0.0),
            d: c(1.0, 0.0),
        }
    }

    pub fn determinant(&self) -> Complex64 {
        self.a * self.d - self.b * self.c
    }

    pub fn apply(&self, w: Complex64) -> Complex64 {
        (self.a * w + self.b) / (self.c * w + self.d)
    }

    pub fn derivative(&self, w: Complex64) -> Complex64 {
        let q = self.c * w + self.d;
        self.determinant() / (q * q)
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &MoebiusTransform) -> MoebiusTransform {
        MoebiusTransform {
            a: self.a * other.a + self.b * other.c,
            b: self.a * other.b + self.b * other.d,
            c: self.c * other.a + self.d * other.c,
            d: self.c * other.b + self.d * other.d,
        }
    }

    /// `s·F`.
    pub fn scaled(&self, s: Complex64) -> MoebiusTransform {
        MoebiusTransform {
            a: s * self.a,
            b: s * self.b,
            c: self.c,
            d: self.d,
        }
    }

    fn scale(&self) -> f64 {
        self.a
            .norm()
            .max(self.b.norm())
            .max(self.c.norm())
            .max(self.d.norm())
    }

    pub fn is_identity(&self) -> bool {
        let s = self.scale();
        self.b.norm() <= 1e-14 * s
            && self.c.norm() <= 1e-14 * s
            && (self.a - self.d).norm() <= 1e-14 * s
    }

    /// Checks `|F(e^{iθ})| = 1` at 16 points.
    pub fn preserves_unit_circle(&self) -> bool {
        (0..16).all(|k| {
            let w = Complex64::from_polar(1.0, TAU * (k as f64 + 0.25) / 16.0);
            (self.apply(w).norm() - 1.0).abs() <= 1e-12
        })
    }
}

/// Relative size of the discriminant below which the two fixed points are
/// treated as one parabolic point.
const PARABOLIC_DISC_TOL: f64 = 1e-13;

/// Fixed points of `M` with multipliers `F'(p)`.
pub fn fixed_points(m: &MoebiusTransform) -> Result<FixedPointData> {
    if m.is_identity() {
        return Err(Error::NoIsolatedFixedPoints);
    }
    let s = m.scale();
    let (a, b, cc, d) = (m.a / s, m.b / s, m.c / s, m.d / s);
    let det = a * d - b * cc;
    if cc.norm() <= 1e-15 {
        // affine: w ↦ (a w + b)/d fixes ∞
        if (d - a).norm() <= 1e-15 {
            return Ok(FixedPointData {
                points: [FixedPoint::Infinity, FixedPoint::Infinity],
                multipliers: [c(1.0, 0.0), c(1.0, 0.0)],
                parabolic: true,
            });
        }
        let p = b / (d - a);
        return Ok(FixedPointData {
            points: [FixedPoint::Finite(p), FixedPoint::Infinity],
            multipliers: [a / d, d / a],
            parabolic: false,
        });
    }
    // c w² + (d − a) w − b = 0
    let beta = d - a;
    let disc = beta * beta + 4.0 * b * cc;
    let mult = |p: Complex64| {
        let q = cc * p + d;
        det / (q * q)
    };
    if disc.norm() <= PARABOLIC_DISC_TOL * (beta.norm_sqr() + (4.0 * b * cc).norm()).max(1e-300) {
        let p = -beta / (2.0 * cc);
        return Ok(FixedPointData {
            points: [FixedPoint::Finite(p), FixedPoint::Finite(p)],
            multipliers: [c(1.0, 0.0), c(1.0, 0.0)],
            parabolic: true,
        });
    }
    let mut root = disc.sqrt();
    if (beta.conj() * root).re < 0.0 {
        root = -root;
    }
    let q = -0.5 * (beta + root);
    let p1 = q / cc;
    let p2 = if q.norm() > 0.0 { -b / q } else { -beta / cc };
    Ok(FixedPointData {
        points: [FixedPoint::Finite(p1), FixedPoint::Finite(p2)],
        multipliers: [mult(p1), mult(p2)],
        parabolic: false,
    })
}

/// Unit-circle automorphism `w ↦ e^{2πiθ}(w + a)/(1 + ā w)`, `|a| < 1`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct DiscAutomorphism {
    pub theta: f64,
    pub a: Complex64,
}

impl DiscAutomorphism {
    pub fn new(theta: f64, a: Complex64) -> Result<Self> {
        if !(a.norm() < 1.0) || !theta.is_finite() {
            return Err(Error::Contract(format!(
                "need |a| < 1, got |a| = {}",
                a.norm()
            )));
        }
        Ok(DiscAutomorphism { theta, a })
    }

    /// Post-composition with the rotation by `ω`.
    pub fn rotate(&self, omega: f64) -> DiscAutomorphism {
        DiscAutomorphism {
            theta: self.theta + omega,
            a: self.a,
        }
    }

    pub fn to_transform(&self) -> MoebiusTransform {
        let e = Complex64::from_polar(1.0, TAU * self.theta);
        MoebiusTransform {
            a: e,
            b: e * self.a,
            c: self.a.conj(),
            d: c(1.0, 0.0),
        }
    }

    /// `F_ω = e^{2πiω} F` for complex `ω`.
    pub fn f_omega(&self, omega: Complex64) -> MoebiusTransform {
        self.to_transform().scaled((TAU * I * omega).exp())
    }

    /// Half-width of the band around the real axis where the lift is analytic.
    pub fn band(&self) -> f64 {
        let r = self.a.norm();
        if r == 0.0 {
            f64::INFINITY
        } else {
            (1.0 / r).ln() / TAU
        }
    }

    /// Lift `f(z) = z + θ + (1/2πi)[Log(1 + a e^{−2πiz}) − Log(1 + ā e^{2πiz})]`
    /// with its first two derivatives. Inside the band both Log arguments have
    /// positive real part, so the principal branch is continuous.
    pub fn lift(&self, z: Complex64) -> (Complex64, Complex64, Complex64) {
        let w = (TAU * I * z).exp();
        let a = self.a;
        let ab = a.conj();
        let f = z + self.theta + ((1.0 + a / w).ln() - (1.0 + ab * w).ln()) / (TAU * I);
        let k = 1.0 - a.norm_sqr();
        let den = (w + a) * (1.0 + ab * w);
        let d1 = w * k / den;
        let g1 = k * (a - ab * w * w) / (den * den);
        let d2 = TAU * I * w * g1;
        (f, d1, d2)
    }
}

/// Position of a unit-circle-preserving map's fixed points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CircleClass {
    HyperbolicOnCircle,
    Parabolic,
    NoCircleFixedPoints,
}

const ON_CIRCLE_TOL: f64 = 1e-9;

/// Classifies a unit-circle-preserving transform by where its fixed points lie.
pub fn classify_on_circle(m: &MoebiusTransform) -> Result<CircleClass> {
    if !m.preserves_unit_circle() {
        return Err(Error::Contract(
            "transform does not preserve the unit circle".into(),
        ));
    }
    let fp = fixed_points(m)?;
    let on = |p: FixedPoint| (p.modulus() - 1.0).abs() <= ON_CIRCLE_TOL;
    if fp.parabolic {
        return Ok(if on(fp.points[0]) {
            CircleClass::Parabolic
        } else {
            CircleClass::NoCircleFixedPoints
        });
    }
    Ok(if on(fp.points[0]) && on(fp.points[1]) {
        CircleClass::HyperbolicOnCircle
    } else {
        CircleClass::NoCircleFixedPoints
    })
}

/// Attracting fixed point of `F_ω` and its multiplier, for `Im ω ≥ 0`.
///
/// For real `ω` this is the limit from the upper half-plane: the fixed point
/// of smaller multiplier modulus, or the one in the closed disc when both
/// multipliers are unimodular.
pub fn attractor(f: &DiscAutomorphism, omega: Complex64) -> Result<(FixedPoint, Complex64)> {
    if omega.im < 0.0 {
        return Err(Error::Contract("need Im ω ≥ 0".into()));
    }
    let fp = fixed_points(&f.f_omega(omega))?;
    if fp.parabolic {
        return Ok((fp.points[0], fp.multipliers[0]));
    }
    let (m0, m1) = (fp.multipliers[0].norm(), fp.multipliers[1].norm());
    if (m0 - m1).abs() > 1e-12 {
        let k = if m0 < m1 { 0 } else { 1 };
        return Ok((fp.points[k], fp.multipliers[k]));
    }
    if omega.im > 0.0 {
        return Err(Error::Consistency(
            "both multipliers unimodular for Im ω > 0".into(),
        ));
    }
    let k = if fp.points[0].modulus() <= fp.points[1].modulus() {
        0
    } else {
        1
    };
    Ok((fp.points[k], fp.multipliers[k]))
}

/// Closed-form `τ(f + ω) = (1/2πi) ln μ(ω)` for the lift of `F`, with the
/// continuous branch `ω + θ + (1/2πi)[ln(1 − |a|²) − 2 Log(1 + ā A)]`.
pub fn moebius_tau(f: &DiscAutomorphism, omega: Complex64) -> Result<Complex64> {
    let (p, _) = attractor(f, omega)?;
    let tail = match p {
        FixedPoint::Finite(a_pt) => {
            ((1.0 - f.a.norm_sqr()).ln() - 2.0 * (1.0 + f.a.conj() * a_pt).ln()) / (TAU * I)
        }
        FixedPoint::Infinity => {
            return Err(Error::Consistency("attractor at infinity".into()));
        }
    };
    Ok(omega + f.theta + tail)
}

/// Attractor and repellor of `F_ω` on the unit circle for real `ω` in the
/// interior of the rotation-zero interval.
pub fn circle_attractor_repellor(
    f: &DiscAutomorphism,
    omega: f64,
) -> Result<(Complex64, Complex64, f64)> {
    let m = f.f_omega(c(omega, 0.0));
    if classify_on_circle(&m)? != CircleClass::HyperbolicOnCircle {
        return Err(Error::NotHyperbolic(format!(
            "F_ω has no hyperbolic fixed points on the circle at ω = {omega}"
        )));
    }
    let fp = fixed_points(&m)?;
    let (p0, p1) = (
        fp.points[0].finite().unwrap(),
        fp.points[1].finite().unwrap(),
    );
    let (m0, m1) = (fp.multipliers[0].re, fp.multipliers[1].re);
    Ok(if m0 < m1 { (p0, p1, m0) } else { (p1, p0, m1) })
}

/// `H'_ω(z) = w(A − R)/((w − A)(w − R))`, `w = e^{2πiz}`: the derivative of
/// `(1/2πi) ln((w − A)/(w − R))`, signed so that the base circle has degree +1.
pub fn uniformizing_derivative(
    f: &DiscAutomorphism,
    omega: f64,
    z: Complex64,
) -> Result<Complex64> {
    let (a_pt, r_pt, _) = circle_attractor_repellor(f, omega)?;
    uniformizing_derivative_at(a_pt, r_pt, z)
}

/// `H'` for given attractor `A` and repellor `R`.
pub fn uniformizing_derivative_at(
    a_pt: Complex64,
    r_pt: Complex64,
    z: Complex64,
) -> Result<Complex64> {
    let w = (TAU * I * z).exp();
    let (da, dr) = (w - a_pt, w - r_pt);
    if da.norm() <= 1e-14 || dr.norm() <= 1e-14 {
        return Err(Error::Pole(format!("z = {z} is a fixed point")));
    }
    Ok(w * (a_pt - r_pt) / (da * dr))
}
