//! Analytic circle diffeomorphisms in the cylinder coordinate `z`, with
//! `π(z) = e^{2πiz}` projecting to the punctured plane.

use crate::error::{Error, Result};
use crate::moebius::DiscAutomorphism;
use num_complex::Complex64;
use std::f64::consts::PI;
use std::fmt;

const TAU: f64 = 2.0 * PI;
const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Band half-width used for trigonometric kinds unless configured otherwise.
pub const DEFAULT_TRIG_BAND: f64 = 0.05;
/// Number of grid points of the diffeomorphism check.
pub const VALIDATION_GRID: usize = 1024;

/// Trigonometric polynomial `c + Σ_k a_k cos 2πkx + b_k sin 2πkx`,
/// `k = 1..=N` (`a[k-1]`, `b[k-1]`).
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct TrigPoly {
    pub c: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl TrigPoly {
    pub fn new(c: f64, a: Vec<f64>, b: Vec<f64>) -> Self {
        let n = a.len().max(b.len());
        let mut a = a;
        let mut b = b;
        a.resize(n, 0.0);
        b.resize(n, 0.0);
        TrigPoly { c, a, b }
    }

    pub fn zero() -> Self {
        TrigPoly::new(0.0, vec![], vec![])
    }

    /// `amplitude · sin 2πnx`.
    pub fn sin(n: usize, amplitude: f64) -> Self {
        let mut b = vec![0.0; n];
        if n > 0 {
            b[n - 1] = amplitude;
        }
        TrigPoly::new(0.0, vec![0.0; n], b)
    }

    /// `amplitude · cos 2πnx`.
    pub fn cos(n: usize, amplitude: f64) -> Self {
        let mut a = vec![0.0; n];
        if n > 0 {
            a[n - 1] = amplitude;
        }
        TrigPoly::new(0.0, a, vec![0.0; n])
    }

    pub fn degree(&self) -> usize {
        self.a.len()
    }

    pub fn is_zero(&self) -> bool {
        self.c == 0.0 && self.a.iter().chain(&self.b).all(|&v| v == 0.0)
    }

    /// Value and first two derivatives at a complex point.
    pub fn eval(&self, z: Complex64) -> (Complex64, Complex64, Complex64) {
        let mut v = Complex64::new(self.c, 0.0);
        let mut d1 = Complex64::new(0.0, 0.0);
        let mut d2 = Complex64::new(0.0, 0.0);
        for (k, (&ak, &bk)) in self.a.iter().zip(&self.b).enumerate() {
            let w = TAU * (k + 1) as f64;
            let (s, c) = ((w * z).sin(), (w * z).cos());
            v += ak * c + bk * s;
            d1 += w * (bk * c - ak * s);
            d2 -= w * w * (ak * c + bk * s);
        }
        (v, d1, d2)
    }

    pub fn eval_real(&self, x: f64) -> f64 {
        self.eval(Complex64::new(x, 0.0)).0.re
    }

    pub fn add(&self, other: &TrigPoly) -> TrigPoly {
        let n = self.degree().max(other.degree());
        let get = |v: &Vec<f64>, k: usize| v.get(k).copied().unwrap_or(0.0);
        TrigPoly::new(
            self.c + other.c,
            (0..n).map(|k| get(&self.a, k) + get(&other.a, k)).collect(),
            (0..n).map(|k| get(&self.b, k) + get(&other.b, k)).collect(),
        )
    }

    pub fn scale(&self, s: f64) -> TrigPoly {
        TrigPoly::new(
            s * self.c,
            self.a.iter().map(|v| s * v).collect(),
            self.b.iter().map(|v| s * v).collect(),
        )
    }
}

/// The families of maps supported by the library.
#[derive(Debug, Clone, PartialEq)]
pub enum MapKind {
    /// `x ↦ x + c`.
    Rotation { c: f64 },
    /// `x ↦ x + d(x)` with a trigonometric displacement.
    Trig { displacement: TrigPoly },
    /// Lift of a unit-circle automorphism.
    Moebius { transform: DiscAutomorphism },
    /// `base + ε·g`.
    Perturbed {
        base: Box<CircleMap>,
        g: TrigPoly,
        eps: f64,
    },
    /// `h ∘ base ∘ h⁻¹` with `h(x) = x + displacement(x)`.
    Conjugated { base: Box<CircleMap>, h: TrigPoly },
}

/// An analytic orientation-preserving circle diffeomorphism, possibly shifted
/// by a complex constant.
#[derive(Debug, Clone, PartialEq)]
pub struct CircleMap {
    kind: MapKind,
    shift: Complex64,
    band: f64,
}

impl CircleMap {
    fn validated(kind: MapKind, band: f64) -> Result<Self> {
        let map = CircleMap {
            kind,
            shift: Complex64::new(0.0, 0.0),
            band,
        };
        map.check_diffeomorphism()?;
        Ok(map)
    }

    pub fn rotation(c: f64) -> Self {
        CircleMap {
            kind: MapKind::Rotation { c },
            shift: Complex64::new(0.0, 0.0),
            band: f64::INFINITY,
        }
    }

    /// `x ↦ x + displacement(x)` with the default band.
    pub fn trig(displacement: TrigPoly) -> Result<Self> {
        Self::trig_with_band(displacement, DEFAULT_TRIG_BAND)
    }

    pub fn trig_with_band(displacement: TrigPoly, band: f64) -> Result<Self> {
        if !(band > 0.0) {
            return Err(Error::Contract("band must be positive".into()));
        }
        Self::validated(MapKind::Trig { displacement }, band)
    }

    /// The lift of `w ↦ (w + a)/(1 + a w)` for real `a ∈ (−1, 1)`.
    pub fn moebius(a: f64) -> Result<Self> {
        Self::from_automorphism(DiscAutomorphism::new(0.0, Complex64::new(a, 0.0))?)
    }

    pub fn from_automorphism(transform: DiscAutomorphism) -> Result<Self> {
        let band = transform.band();
        Self::validated(MapKind::Moebius { transform }, band)
    }

    /// `base + ε·g`. The band is inherited from the base.
    pub fn perturbed(base: CircleMap, g: TrigPoly, eps: f64) -> Result<Self> {
        let band = base.band;
        Self::validated(
            MapKind::Perturbed {
                base: Box::new(base),
                g,
                eps,
            },
            band,
        )
    }

    /// `h ∘ base ∘ h⁻¹` for `h = id + h_displacement`, on half the smaller of
    /// the two bands.
    pub fn conjugated(base: CircleMap, h_displacement: TrigPoly, h_band: f64) -> Result<Self> {
        let h = CircleMap::trig_with_band(h_displacement.clone(), h_band)?;
        let band = 0.5 * base.band.min(h.band);
        Self::validated(
            MapKind::Conjugated {
                base: Box::new(base),
                h: h_displacement,
            },
            band,
        )
    }

    pub fn kind(&self) -> &MapKind {
        &self.kind
    }

    pub fn shift_value(&self) -> Complex64 {
        self.shift
    }

    /// Overrides the analyticity band.
    pub fn with_band(mut self, band: f64) -> Self {
        self.band = band;
        self
    }

    /// `f + ω`.
    pub fn shift(&self, omega: Complex64) -> CircleMap {
        let mut out = self.clone();
        out.shift += omega;
        out
    }

    pub fn shift_real(&self, omega: f64) -> CircleMap {
        self.shift(Complex64::new(omega, 0.0))
    }

    /// Maximal `h` such that the map is analytic on `|Im z| < h`.
    pub fn analyticity_band(&self) -> f64 {
        self.band
    }

    /// True when the map has no singularities in the finite cylinder.
    pub fn is_entire(&self) -> bool {
        match &self.kind {
            MapKind::Rotation { .. } | MapKind::Trig { .. } => true,
            MapKind::Moebius { transform } => transform.a.norm() == 0.0,
            MapKind::Perturbed { base, .. } => base.is_entire(),
            MapKind::Conjugated { base, .. } => base.is_entire(),
        }
    }

    /// The underlying automorphism (with the shift folded in) for pure
    /// Möbius-induced maps.
    pub fn as_moebius(&self) -> Option<DiscAutomorphism> {
        match &self.kind {
            MapKind::Moebius { transform } if self.shift.im == 0.0 => {
                Some(transform.rotate(self.shift.re))
            }
            _ => None,
        }
    }

    fn raw(&self, z: Complex64) -> (Complex64, Complex64, Complex64) {
        match &self.kind {
            MapKind::Rotation { c } => (z + c, Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)),
            MapKind::Trig { displacement } => {
                let (v, d1, d2) = displacement.eval(z);
                (z + v, 1.0 + d1, d2)
            }
            MapKind::Moebius { transform } => transform.lift(z),
            MapKind::Perturbed { base, g, eps } => {
                let (f, f1, f2) = base.eval2(z);
                let (v, d1, d2) = g.eval(z);
                (f + eps * v, f1 + eps * d1, f2 + eps * d2)
            }
            MapKind::Conjugated { base, h } => {
                let u = invert_displacement(h, z);
                let (_, hu1, hu2) = h.eval(u);
                let hu1 = 1.0 + hu1;
                let u1 = 1.0 / hu1;
                let u2 = -hu2 * u1 * u1 * u1;
                let (f, f1, f2) = base.eval2(u);
                let (hv, hf1, hf2) = h.eval(f);
                let hf1 = 1.0 + hf1;
                let value = f + hv;
                let d1 = hf1 * f1 * u1;
                let d2 = hf2 * (f1 * u1) * (f1 * u1) + hf1 * (f2 * u1 * u1 + f1 * u2);
                (value, d1, d2)
            }
        }
    }

    /// `(f(z), f'(z), f''(z))` without the band check.
    pub fn eval2(&self, z: Complex64) -> (Complex64, Complex64, Complex64) {
        let (f, d1, d2) = self.raw(z);
        (f + self.shift, d1, d2)
    }

    /// `(f(z), f'(z))` for `|Im z| < band`.
    pub fn eval_complex(&self, z: Complex64) -> Result<(Complex64, Complex64)> {
        if !(z.im.abs() < self.band) {
            return Err(Error::Domain { z, band: self.band });
        }
        let (f, d1, _) = self.eval2(z);
        Ok((f, d1))
    }

    /// The real lift `F(x)`. Only the real part of a complex shift enters.
    pub fn eval_lift(&self, x: f64) -> f64 {
        self.raw(Complex64::new(x, 0.0)).0.re + self.shift.re
    }

    /// `(F(x), F'(x), F''(x))` on the real line.
    pub fn eval_lift2(&self, x: f64) -> (f64, f64, f64) {
        let (f, d1, d2) = self.raw(Complex64::new(x, 0.0));
        (f.re + self.shift.re, d1.re, d2.re)
    }

    /// Solves `F(x) = y` on the real line.
    pub fn inverse_lift(&self, y: f64) -> f64 {
        let g = |x: f64| self.eval_lift(x) - y;
        let mut lo = y - (self.eval_lift(y) - y) - 0.5;
        let mut hi = lo + 1.0;
        while g(lo) > 0.0 {
            lo -= 1.0;
        }
        while g(hi) < 0.0 {
            hi += 1.0;
        }
        let mut x = 0.5 * (lo + hi);
        for _ in 0..200 {
            let (fx, d1, _) = self.eval_lift2(x);
            let gx = fx - y;
            if gx == 0.0 {
                return x;
            }
            if gx < 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            let mut next = x - gx / d1;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - x).abs() <= 1e-16 * (1.0 + x.abs()) || hi - lo <= 1e-16 * (1.0 + x.abs()) {
                return next;
            }
            x = next;
        }
        x
    }

    /// Solves `f(u) = z` near the real axis by Newton's method.
    pub fn inverse_complex(&self, z: Complex64) -> Result<Complex64> {
        let x0 = self.inverse_lift(z.re);
        let (_, d1, _) = self.eval2(Complex64::new(x0, 0.0));
        let mut u = Complex64::new(x0, 0.0) + Complex64::new(0.0, z.im - self.shift.im) / d1;
        for _ in 0..100 {
            let (f, d1, _) = self.eval2(u);
            let step = (f - z) / d1;
            u -= step;
            if step.norm() <= 1e-15 * (1.0 + u.norm()) {
                return Ok(u);
            }
        }
        Err(Error::Convergence(format!(
            "inverse of f at {z} did not converge"
        )))
    }

    /// Grid minimum and maximum of `F(x) − x`.
    pub fn displacement_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for j in 0..VALIDATION_GRID {
            let x = j as f64 / VALIDATION_GRID as f64;
            let d = self.eval_lift(x) - x;
            lo = lo.min(d);
            hi = hi.max(d);
        }
        (lo, hi)
    }

    fn check_diffeomorphism(&self) -> Result<()> {
        let n = VALIDATION_GRID;
        let h = 1.0 / n as f64;
        let mut grid = Vec::with_capacity(n + 1);
        for j in 0..=n {
            let x = j as f64 * h;
            let (f, d1, d2) = self.eval_lift2(x);
            if !(f.is_finite() && d1.is_finite() && d2.is_finite()) {
                return Err(Error::NotDiffeomorphism {
                    min_derivative: f64::NAN,
                    at: x,
                });
            }
            grid.push((d1, d2.abs()));
        }
        // per cell, F' cannot dip below the smaller end value by more than
        // the local slope times half the spacing
        let mut worst = f64::INFINITY;
        let mut at = 0.0;
        for j in 0..n {
            let (d0, s0) = grid[j];
            let (d1, s1) = grid[j + 1];
            let bound = d0.min(d1) - s0.max(s1) * h / 2.0;
            if bound < worst {
                worst = bound;
                at = j as f64 * h;
            }
        }
        if worst > 0.0 {
            Ok(())
        } else {
            Err(Error::NotDiffeomorphism {
                min_derivative: worst,
                at,
            })
        }
    }

    /// Map specification in the mini-language, when expressible.
    pub fn to_spec(&self) -> Option<String> {
        let base = match &self.kind {
            MapKind::Rotation { c } => {
                return (self.shift.im == 0.0).then(|| format!("rot:c={}", c + self.shift.re))
            }
            MapKind::Trig { displacement } => {
                let mut s = format!("trig:c={}", displacement.c);
                for (k, (a, b)) in displacement.a.iter().zip(&displacement.b).enumerate() {
                    s.push_str(&format!(",a{}={},b{}={}", k + 1, a, k + 1, b));
                }
                if self.band != DEFAULT_TRIG_BAND {
                    s.push_str(&format!(",band={}", self.band));
                }
                s
            }
            MapKind::Moebius { transform } => {
                if transform.a.im != 0.0 {
                    return None;
                }
                let mut s = format!("moebius:a={}", transform.a.re);
                if transform.theta != 0.0 {
                    s.push_str(&format!(",theta={}", transform.theta));
                }
                s
            }
            MapKind::Perturbed { base, g, eps } => {
                let nz: Vec<usize> = (0..g.degree())
                    .filter(|&k| g.a[k] != 0.0 || g.b[k] != 0.0)
                    .collect();
                if g.c != 0.0 || nz.len() != 1 || g.a[nz[0]] != 0.0 || g.b[nz[0]] != 1.0 {
                    return None;
                }
                let inner = base.to_spec()?;
                format!("{inner}+sin:n={},eps={}", nz[0] + 1, eps)
            }
            MapKind::Conjugated { .. } => return None,
        };
        if self.shift != Complex64::new(0.0, 0.0) {
            return None;
        }
        Some(base)
    }
}

impl fmt::Display for CircleMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.to_spec() {
            Some(s) => write!(f, "{s}"),
            None => write!(f, "{:?}", self.kind),
        }
    }
}

/// Solves `u + d(u) = z` for `u`.
fn invert_displacement(d: &TrigPoly, z: Complex64) -> Complex64 {
    let mut u = z - d.eval(z).0;
    for _ in 0..100 {
        let (v, d1, _) = d.eval(u);
        let step = (u + v - z) / (1.0 + d1);
        u -= step;
        if step.norm() <= 1e-16 * (1.0 + u.norm()) {
            break;
        }
    }
    u
}

/// `e^{2πiz}`.
pub fn circle_point(z: Complex64) -> Complex64 {
    (TAU * I * z).exp()
}
