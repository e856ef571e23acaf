//! First-order variation of the complex rotation number: contour-integral
//! formulas for `dτ/dε` and `dτ/dω`, and infinitesimal bubbles.

use crate::circle_maps::{CircleMap, TrigPoly};
use crate::complex_rot::ConjugacySolution;
use crate::error::{Error, Result};
use crate::moebius::{
    circle_attractor_repellor, moebius_tau, uniformizing_derivative_at, DiscAutomorphism,
};
use crate::numerics::{integrate_closed_contour_adaptive, ClosedCurve, HorizontalLoop};
use crate::rotation::{rational_interval, RationalRotation};
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::{PI, TAU};

const QUAD_START: usize = 256;
const QUAD_MAX: usize = 1 << 17;
const QUAD_TOL: f64 = 1e-13;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// A loop on the cylinder dipping to `−height` at `Re z = dip` and rising to
/// `+height` at `Re z = hump`:
///
/// `Im z(t) = height·[cos 2π(t − hump) − cos 2π(t − dip)] / (1 − cos 2π(hump − dip))`.
///
/// With the dip at the attractor and the hump at the repellor it passes below
/// the attractor and above the repellor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeparatingContour {
    pub dip: f64,
    pub hump: f64,
    pub height: f64,
}

impl SeparatingContour {
    pub fn new(dip: f64, hump: f64, height: f64) -> Result<Self> {
        let norm = 1.0 - (TAU * (hump - dip)).cos();
        if !(height > 0.0) || !(norm > 1e-12) {
            return Err(Error::Contour(format!(
                "degenerate separating contour: dip {dip}, hump {hump}, height {height}"
            )));
        }
        Ok(SeparatingContour { dip, hump, height })
    }

    /// The default contour for `f + ω`: dip at the attractor, hump at the
    /// repellor, with the largest excursion at 40% of the band.
    pub fn for_moebius(f: &DiscAutomorphism, omega: f64) -> Result<Self> {
        let (a_pt, r_pt, _) = circle_attractor_repellor(f, omega)?;
        let (za, zr) = (a_pt.arg() / TAU, r_pt.arg() / TAU);
        let s = (PI * (zr - za)).sin().abs();
        Self::new(za, zr, 0.4 * f.band() * s)
    }

    /// Same curve with the height scaled by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        SeparatingContour {
            height: self.height * s,
            ..*self
        }
    }

    fn norm(&self) -> f64 {
        1.0 - (TAU * (self.hump - self.dip)).cos()
    }

    pub fn height_at(&self, t: f64) -> f64 {
        self.height * ((TAU * (t - self.hump)).cos() - (TAU * (t - self.dip)).cos()) / self.norm()
    }

    /// Largest `|Im z|` along the curve: `height / |sin π(hump − dip)|`.
    pub fn max_excursion(&self) -> f64 {
        self.height / (PI * (self.hump - self.dip)).sin().abs()
    }

    /// Checks that the curve lies in `|Im z| < band` and separates the
    /// attractor `za` (curve below) from the repellor `zr` (curve above).
    pub fn check(&self, za: f64, zr: f64, band: f64) -> Result<()> {
        if !(self.max_excursion() < band) {
            return Err(Error::Contour(format!(
                "contour reaches height {} outside the band {band}",
                self.max_excursion()
            )));
        }
        if !(self.height_at(za) < 0.0 && self.height_at(zr) > 0.0) {
            return Err(Error::Contour(
                "contour must pass below the attractor and above the repellor".into(),
            ));
        }
        Ok(())
    }
}

impl ClosedCurve for SeparatingContour {
    fn eval(&self, t: f64) -> (Complex64, Complex64) {
        let n = self.norm();
        let d = TAU * ((TAU * (t - self.dip)).sin() - (TAU * (t - self.hump)).sin());
        (c(t, self.height_at(t)), c(1.0, self.height * d / n))
    }
}

fn moebius_base(f: &CircleMap) -> Result<DiscAutomorphism> {
    f.as_moebius()
        .ok_or_else(|| Error::Contract(format!("expected a Möbius-induced map, got {f}")))
}

/// `dτ̄(f + εg + ω)/dε` at `ε = 0` for a Möbius-induced `f` and real `ω`
/// interior to the rotation-zero interval:
/// `∮ (g/f')·H'² dz` along a contour separating attractor and repellor.
pub fn dtau_depsilon(
    f: &CircleMap,
    g: &TrigPoly,
    omega: f64,
    contour: Option<&SeparatingContour>,
) -> Result<Complex64> {
    let base = moebius_base(f)?;
    if g.is_zero() {
        return Ok(c(0.0, 0.0));
    }
    let (a_pt, r_pt, _) = circle_attractor_repellor(&base, omega)?;
    let gamma = match contour {
        Some(k) => *k,
        None => SeparatingContour::for_moebius(&base, omega)?,
    };
    gamma.check(a_pt.arg() / TAU, r_pt.arg() / TAU, f.analyticity_band())?;
    let fw = f.shift_real(omega);
    let integrand = |z: Complex64| {
        let h = uniformizing_derivative_at(a_pt, r_pt, z).unwrap_or(c(f64::NAN, f64::NAN));
        let (_, d1, _) = fw.eval2(z);
        g.eval(z).0 / d1 * h * h
    };
    Ok(integrate_closed_contour_adaptive(integrand, &gamma, QUAD_START, QUAD_MAX, QUAD_TOL)?.0)
}

/// `dτ(f + ω)/dω = ∮ Φ'²/f' dz` from an interior solution at `ω`.
///
/// Without a contour the horizontal loop at half the height of `ω` (at most
/// half the band) is used;
/// a given contour must stay between the base circle and height `Im ω`.
pub fn dtau_domega(
    f: &CircleMap,
    solution: &ConjugacySolution,
    contour: Option<&dyn ClosedCurve>,
) -> Result<Complex64> {
    let top = solution.omega.im;
    if !(top > 0.0) {
        return Err(Error::Contract("interior solution required".into()));
    }
    let default = HorizontalLoop {
        height: 0.5 * top.min(f.analyticity_band()),
    };
    let gamma: &dyn ClosedCurve = contour.unwrap_or(&default);
    for j in 0..64 {
        let y = gamma.eval(j as f64 / 64.0).0.im;
        if !(-1e-12..=top + 1e-12).contains(&y) || y.abs() >= f.analyticity_band() {
            return Err(Error::Contour(format!(
                "contour leaves the fundamental strip [0, {top}] at height {y}"
            )));
        }
    }
    let integrand = |z: Complex64| {
        let p = solution.phi_prime(z);
        p * p / f.eval2(z).1
    };
    Ok(integrate_closed_contour_adaptive(integrand, gamma, QUAD_START, QUAD_MAX, QUAD_TOL)?.0)
}

/// One sample of an infinitesimal bubble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearSample {
    pub omega: f64,
    /// `τ̄(f + ω)`.
    pub tau: Complex64,
    pub derivative: Complex64,
    /// `τ̄ + ε·dτ/dε`.
    pub tau_lin: Complex64,
}

/// The linear approximation to the 0-bubble of `f + εg`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfinitesimalBubble {
    #[serde(skip)]
    pub base: CircleMap,
    pub g: TrigPoly,
    pub eps: f64,
    pub interval: (f64, f64),
    pub cutoff_ratio: f64,
    pub samples: Vec<LinearSample>,
    /// Samples dropped because `ε|dτ/dε| > cutoff_ratio·Im τ̄`.
    pub dropped: usize,
}

impl InfinitesimalBubble {
    pub fn curve(&self) -> Vec<Complex64> {
        self.samples.iter().map(|s| s.tau_lin).collect()
    }
}

/// Samples `ω_k = left + k·|I₀|/(n + 1)`, `k = 1..n`, and keeps the points
/// where the linear term is small compared to `Im τ̄`.
pub fn infinitesimal_bubble(
    f: &CircleMap,
    g: &TrigPoly,
    eps: f64,
    n_samples: usize,
    cutoff_ratio: f64,
) -> Result<InfinitesimalBubble> {
    let base = moebius_base(f)?;
    if !(eps > 0.0) {
        return Err(Error::Contract(format!("ε must be positive, got {eps}")));
    }
    let interval = rational_interval(f, RationalRotation::zero(), 1e-12)?;
    if interval.degenerate {
        return Err(Error::NotFound(
            "the rotation-zero interval is degenerate".into(),
        ));
    }
    let (left, right) = (interval.left_lift, interval.right_lift);
    let mut samples = Vec::with_capacity(n_samples);
    let mut dropped = 0;
    for omega in interval.interior_samples(n_samples) {
        let tau = moebius_tau(&base, c(omega, 0.0))?;
        let derivative = dtau_depsilon(f, g, omega, None)?;
        if eps * derivative.norm() > cutoff_ratio * tau.im {
            dropped += 1;
            continue;
        }
        samples.push(LinearSample {
            omega,
            tau,
            derivative,
            tau_lin: tau + eps * derivative,
        });
    }
    Ok(InfinitesimalBubble {
        base: f.clone(),
        g: g.clone(),
        eps,
        interval: (left, right),
        cutoff_ratio,
        samples,
        dropped,
    })
}

/// Default ε for the panel with perturbation `sin 2πnx`.
pub fn figure_epsilon(n: usize) -> f64 {
    match n {
        0..=3 => 5e-3,
        4 | 5 => 5e-4,
        _ => 1e-5,
    }
}

pub const DEFAULT_CUTOFF: f64 = 0.5;
/// Samples per infinitesimal bubble in the `figure1` panels.
pub const FIGURE_SAMPLES: usize = 1001;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex_rot::{tau_interior, InteriorConfig};
    use crate::numerics::{integrate_closed_contour, polyline_self_intersections, Polyline2D};
    use proptest::prelude::*;

    fn mob() -> CircleMap {
        CircleMap::moebius(0.5).unwrap()
    }

    fn near(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn zero_perturbation_gives_zero() {
        let v = dtau_depsilon(&mob(), &TrigPoly::zero(), 0.0, None).unwrap();
        assert_eq!(v, c(0.0, 0.0));
    }

    #[test]
    fn contour_independence() {
        let base = mob().as_moebius().unwrap();
        let g = TrigPoly::sin(1, 1.0);
        for &omega in &[0.0, 0.04, -0.06] {
            let k = SeparatingContour::for_moebius(&base, omega).unwrap();
            let v = dtau_depsilon(&mob(), &g, omega, Some(&k)).unwrap();
            for s in [0.8, 1.2] {
                let w = dtau_depsilon(&mob(), &g, omega, Some(&k.scaled(s))).unwrap();
                assert!(near(v, w, 1e-10), "{omega} {s}: {v} vs {w}");
            }
        }
    }

    #[test]
    fn wrong_side_is_rejected() {
        let base = mob().as_moebius().unwrap();
        let k = SeparatingContour::for_moebius(&base, 0.0).unwrap();
        let flipped = SeparatingContour::new(k.hump, k.dip, k.height).unwrap();
        let e = dtau_depsilon(&mob(), &TrigPoly::sin(1, 1.0), 0.0, Some(&flipped)).unwrap_err();
        assert!(matches!(e, Error::Contour(_)));
        let tall = k.scaled(10.0);
        assert!(matches!(
            dtau_depsilon(&mob(), &TrigPoly::sin(1, 1.0), 0.0, Some(&tall)),
            Err(Error::Contour(_))
        ));
    }

    #[test]
    fn constant_perturbation_is_omega_derivative() {
        let base = mob().as_moebius().unwrap();
        let one = TrigPoly::new(1.0, vec![], vec![]);
        for &omega in &[0.0, 0.03, -0.05] {
            let v = dtau_depsilon(&mob(), &one, omega, None).unwrap();
            let h = 1e-5;
            let fd = (moebius_tau(&base, c(omega + h, 0.0)).unwrap()
                - moebius_tau(&base, c(omega - h, 0.0)).unwrap())
                / (2.0 * h);
            assert!(near(v, fd, 1e-7), "{omega}: {v} vs {fd}");
        }
    }

    #[test]
    fn rotated_moebius_matches_shift() {
        // for g = 1 the perturbed map is again Möbius, so the derivative is
        // available in closed form at complex ε
        let base = mob().as_moebius().unwrap();
        let one = TrigPoly::new(1.0, vec![], vec![]);
        let v = dtau_depsilon(&mob(), &one, 0.0, None).unwrap();
        let h = 1e-5;
        let fd = (moebius_tau(&base, c(0.0, h)).unwrap()
            - moebius_tau(&base, c(0.0, 0.0)).unwrap())
            / c(0.0, h);
        assert!(near(v, fd, 1e-4), "{v} vs {fd}");
    }

    #[test]
    fn log_derivative_of_uniformizer_integrates_to_zero() {
        let base = mob().as_moebius().unwrap();
        let (a_pt, r_pt, _) = circle_attractor_repellor(&base, 0.02).unwrap();
        let k = SeparatingContour::for_moebius(&base, 0.02).unwrap();
        let v = integrate_closed_contour(
            |z| {
                let w = (c(0.0, TAU) * z).exp();
                c(0.0, TAU) * (1.0 - w / (w - a_pt) - w / (w - r_pt))
            },
            &k,
            1024,
        )
        .unwrap();
        assert!(v.norm() < 1e-12, "{v}");
    }

    #[test]
    fn omega_derivative_of_identity_is_one() {
        let f = CircleMap::rotation(0.0);
        let sol = tau_interior(&f, c(0.2, 0.3), &InteriorConfig::default()).unwrap();
        let v = dtau_domega(&f, &sol, None).unwrap();
        assert!(near(v, c(1.0, 0.0), 1e-12), "{v}");
    }

    #[test]
    fn omega_derivative_matches_moebius_closed_form() {
        let base = mob().as_moebius().unwrap();
        let cfg = InteriorConfig::fixed(64, 1e-10);
        for &w in &[c(0.1, 0.1), c(0.45, 0.25)] {
            let sol = tau_interior(&mob(), w, &cfg).unwrap();
            let v = dtau_domega(&mob(), &sol, None).unwrap();
            let h = 1e-5;
            let fd = (moebius_tau(&base, w + h).unwrap() - moebius_tau(&base, w - h).unwrap())
                / (2.0 * h);
            assert!(near(v, fd, 1e-6), "{w}: {v} vs {fd}");
        }
    }

    #[test]
    fn omega_derivative_matches_differences_for_trig_map() {
        let f = CircleMap::trig(TrigPoly::new(0.0, vec![0.02, 0.01], vec![0.03])).unwrap();
        let cfg = InteriorConfig::default();
        let w = c(0.2, 0.25);
        let sol = tau_interior(&f, w, &cfg).unwrap();
        let v = dtau_domega(&f, &sol, None).unwrap();
        let h = 1e-4;
        let fd = (tau_interior(&f, w + h, &cfg).unwrap().tau
            - tau_interior(&f, w - h, &cfg).unwrap().tau)
            / (2.0 * h);
        assert!(near(v, fd, 1e-6), "{v} vs {fd}");
    }

    #[test]
    fn dtau_domega_rejects_escaping_contour() {
        let f = CircleMap::rotation(0.0);
        let sol = tau_interior(&f, c(0.2, 0.3), &InteriorConfig::default()).unwrap();
        let high = HorizontalLoop { height: 0.5 };
        assert!(matches!(
            dtau_domega(&f, &sol, Some(&high)),
            Err(Error::Contour(_))
        ));
    }

    #[test]
    fn unperturbed_bubble_is_vertical_segment() {
        let b = infinitesimal_bubble(&mob(), &TrigPoly::zero(), 0.01, 41, 0.5).unwrap();
        assert_eq!(b.dropped, 0);
        assert_eq!(b.samples.len(), 41);
        for s in &b.samples {
            assert!(s.tau_lin.re.abs() < 1e-12 && s.tau_lin.im > 0.0);
        }
        let mid = b.samples[20];
        assert!(mid.omega.abs() < 1e-10);
        assert!((mid.tau.im - 3f64.ln() / TAU).abs() < 1e-10);
    }

    #[test]
    fn figure_panels_one_and_three() {
        let cross = |n: usize| {
            let b = infinitesimal_bubble(
                &mob(),
                &TrigPoly::sin(n, 1.0),
                figure_epsilon(n),
                801,
                DEFAULT_CUTOFF,
            )
            .unwrap();
            let p = Polyline2D::from_complex(&b.curve()).unwrap();
            polyline_self_intersections(&p).crossings.len()
        };
        assert_eq!(cross(1), 0);
        assert!(cross(3) >= 1);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn linear_in_perturbation(a1 in -1.0f64..1.0, b1 in -1.0f64..1.0, b3 in -1.0f64..1.0,
                                  omega in -0.06f64..0.06) {
            let g1 = TrigPoly::new(0.0, vec![a1], vec![b1]);
            let g2 = TrigPoly::new(0.3, vec![0.0, 0.0], vec![0.0, 0.0, b3]);
            let v1 = dtau_depsilon(&mob(), &g1, omega, None).unwrap();
            let v2 = dtau_depsilon(&mob(), &g2, omega, None).unwrap();
            let v12 = dtau_depsilon(&mob(), &g1.add(&g2), omega, None).unwrap();
            prop_assert!(near(v12, v1 + v2, 1e-10));
        }
    }
}
