//! Bubbles: boundary values `τ̄` over `I_{p/q}`, the disc bound and
//! intersection detection.

use crate::circle_maps::CircleMap;
use crate::complex_rot::{tau_boundary_hyperbolic, tau_boundary_limit, GlueConfig, LimitConfig};
use crate::error::{Error, Result};
use crate::linearization::ascending_curve;
use crate::numerics::{
    polyline_intersections, polyline_self_intersections, wrap_half, ContactKind, Intersection,
    Polyline2D,
};
use crate::rotation::{distortion, rational_interval, RationalRotation, RotationInterval};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

/// Which solver produces the interior samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    /// Extrapolated limit of interior solves.
    Limit,
    /// Glued Koenigs charts (rotation zero, hyperbolic maps only).
    Glued,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BubbleConfig {
    /// Samples including both endpoints.
    pub n_samples: usize,
    /// Forces a route; `None` picks one from the map.
    pub route: Option<Route>,
    /// Also run the other route where both apply and record the difference.
    pub cross_check: bool,
    pub limit: LimitConfig,
    pub glue: GlueConfig,
    /// Sagitta of the ascending-curve arcs in chart coordinates.
    pub amplitude: f64,
    pub interval_tol: f64,
}

impl Default for BubbleConfig {
    fn default() -> Self {
        BubbleConfig {
            n_samples: 101,
            route: None,
            cross_check: false,
            limit: LimitConfig::default(),
            glue: GlueConfig::default(),
            amplitude: 0.02,
            interval_tol: 1e-12,
        }
    }
}

/// One sample of a bubble. `tau` is `None` for a gap (solver failure).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BubbleSample {
    pub omega: f64,
    pub tau: Option<Complex64>,
    pub route: Option<Route>,
    /// Solver residual or extrapolation error estimate, whichever is larger.
    pub residual: f64,
    /// Endpoint sample: `τ̄ = p/q` by the parabolic law.
    pub parabolic: bool,
    /// `|τ̄_limit − τ̄_glued|` when cross-checked.
    pub route_difference: Option<f64>,
    pub error: Option<String>,
}

/// The `p/q`-bubble of a map: `τ̄(f + ω)` over `ω ∈ I_{p/q}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BubbleCurve {
    pub rational: RationalRotation,
    pub interval: RotationInterval,
    pub samples: Vec<BubbleSample>,
}

impl BubbleCurve {
    /// Maximal runs of consecutive non-gap samples, as `(ω, τ̄)` lists.
    pub fn runs(&self) -> Vec<Vec<(f64, Complex64)>> {
        let mut out = Vec::new();
        let mut cur = Vec::new();
        for s in &self.samples {
            match s.tau {
                Some(t) => cur.push((s.omega, t)),
                None => {
                    if !cur.is_empty() {
                        out.push(std::mem::take(&mut cur));
                    }
                }
            }
        }
        if !cur.is_empty() {
            out.push(cur);
        }
        out
    }

    pub fn points(&self) -> Vec<Complex64> {
        self.samples.iter().filter_map(|s| s.tau).collect()
    }

    pub fn gaps(&self) -> usize {
        self.samples.iter().filter(|s| s.tau.is_none()).count()
    }

    /// Largest `|Re τ̄ − p/q|`.
    pub fn max_real_deviation(&self) -> f64 {
        let pq = self.rational.value();
        self.points()
            .iter()
            .map(|t| (t.re - pq).abs())
            .fold(0.0, f64::max)
    }

    /// Sample with the largest `Im τ̄`.
    pub fn peak(&self) -> Option<(f64, Complex64)> {
        self.samples
            .iter()
            .filter_map(|s| s.tau.map(|t| (s.omega, t)))
            .max_by(|a, b| a.1.im.total_cmp(&b.1.im))
    }
}

/// The route [`compute_bubble`] uses for `f` when none is forced.
///
/// Pure Möbius and entire maps go through the limit route. Other maps with
/// rotation number zero use glued charts, because their uniformizers have
/// singularities accumulating on the fixed points and the interior solves
/// need too many modes near the axis.
pub fn default_route(f: &CircleMap, r: RationalRotation) -> Route {
    if r.q() == 1 && f.as_moebius().is_none() && !f.is_entire() {
        Route::Glued
    } else {
        Route::Limit
    }
}

fn normalize(tau: Complex64, pq: f64) -> Complex64 {
    Complex64::new(pq + wrap_half(tau.re - pq), tau.im)
}

/// `τ̄(f + ω)` at one real parameter by the given route, with its residual.
pub fn boundary_tau(
    f: &CircleMap,
    omega: f64,
    route: Route,
    cfg: &BubbleConfig,
) -> Result<(Complex64, f64)> {
    match route {
        Route::Limit => {
            let v = tau_boundary_limit(f, omega, &cfg.limit)?;
            Ok((v.tau, v.residual.max(v.error_estimate)))
        }
        Route::Glued => {
            let g = f.shift_real(omega);
            // near the interval ends the charts shrink; lower the arcs until
            // they fit
            let mut amplitude = cfg.amplitude;
            let curve = loop {
                match ascending_curve(&g, amplitude) {
                    Err(Error::Geometry(_)) if amplitude > cfg.amplitude / 64.0 => amplitude /= 2.0,
                    other => break other?,
                }
            };
            let v = tau_boundary_hyperbolic(&g, &curve, &cfg.glue)?;
            Ok((v.tau, v.residual))
        }
    }
}

/// Samples the `p/q`-bubble of `f` at `n_samples` uniformly spaced parameters
/// of `I_{p/q}`, endpoints included. Interior samples run in parallel; a
/// failing sample becomes a gap carrying its error.
pub fn compute_bubble(
    f: &CircleMap,
    r: RationalRotation,
    cfg: &BubbleConfig,
) -> Result<BubbleCurve> {
    if cfg.n_samples < 3 {
        return Err(Error::Contract("a bubble needs at least 3 samples".into()));
    }
    let interval = rational_interval(f, r, cfg.interval_tol)?;
    if interval.degenerate {
        return Err(Error::NotFound(format!("I_{r} is degenerate")));
    }
    let route = cfg.route.unwrap_or_else(|| default_route(f, r));
    if route == Route::Glued && r.q() != 1 {
        return Err(Error::Contract(
            "the glued route needs rotation number 0".into(),
        ));
    }
    let pq = r.value();
    let (lo, hi) = (interval.left_lift, interval.right_lift);
    let n = cfg.n_samples;
    let samples: Vec<BubbleSample> = (0..n)
        .into_par_iter()
        .map(|k| {
            let omega = lo + (hi - lo) * k as f64 / (n - 1) as f64;
            if k == 0 || k == n - 1 {
                return BubbleSample {
                    omega,
                    tau: Some(Complex64::new(pq, 0.0)),
                    route: None,
                    residual: 0.0,
                    parabolic: true,
                    route_difference: None,
                    error: None,
                };
            }
            match boundary_tau(f, omega, route, cfg) {
                Ok((tau, residual)) => {
                    let tau = normalize(tau, pq);
                    let route_difference = if cfg.cross_check && r.q() == 1 {
                        let other = match route {
                            Route::Limit => Route::Glued,
                            Route::Glued => Route::Limit,
                        };
                        boundary_tau(f, omega, other, cfg)
                            .ok()
                            .map(|(t, _)| (normalize(t, pq) - tau).norm())
                    } else {
                        None
                    };
                    BubbleSample {
                        omega,
                        tau: Some(tau),
                        route: Some(route),
                        residual,
                        parabolic: false,
                        route_difference,
                        error: None,
                    }
                }
                Err(e) => BubbleSample {
                    omega,
                    tau: None,
                    route: Some(route),
                    residual: f64::INFINITY,
                    parabolic: false,
                    route_difference: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(BubbleCurve {
        rational: r,
        interval,
        samples,
    })
}

/// Outcome of checking a bubble against the disc of radius `D_f/(4πq²)`
/// tangent to the real axis at `p/q`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub distortion: f64,
    pub radius: f64,
    /// `min (R − |τ̄ − (p/q + iR)|)` over samples; negative on violation.
    pub min_slack: f64,
    pub violations: Vec<f64>,
    pub checked: usize,
}

impl BoundReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks every sample against the disc bound with distortion `d_f`.
pub fn bound_check(bubble: &BubbleCurve, d_f: f64) -> BoundReport {
    let q = bubble.rational.q() as f64;
    let radius = d_f / (4.0 * PI * q * q);
    let center = Complex64::new(bubble.rational.value(), radius);
    let mut min_slack = f64::INFINITY;
    let mut violations = Vec::new();
    let mut checked = 0;
    for s in &bubble.samples {
        if let Some(t) = s.tau {
            checked += 1;
            let slack = radius - (t - center).norm();
            min_slack = min_slack.min(slack);
            // endpoints sit on the circle itself
            if slack < -1e-12 {
                violations.push(s.omega);
            }
        }
    }
    BoundReport {
        distortion: d_f,
        radius,
        min_slack,
        violations,
        checked,
    }
}

/// [`bound_check`] with `D_f` computed from the map.
pub fn bound_check_map(bubble: &BubbleCurve, f: &CircleMap) -> BoundReport {
    bound_check(bubble, distortion(f))
}

/// Crossings below this `|sin|` of the angle are flagged as near-tangential.
pub const TANGENCY_SIN: f64 = 1e-3;

/// A contact between two branches, located by their parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BubbleContact {
    pub bubble_a: usize,
    pub bubble_b: usize,
    pub omega_a: f64,
    pub omega_b: f64,
    pub point: [f64; 2],
    pub kind: ContactKind,
    pub sin_angle: f64,
    pub near_tangent: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IntersectionReport {
    pub self_contacts: Vec<BubbleContact>,
    pub pairwise_contacts: Vec<BubbleContact>,
}

impl IntersectionReport {
    fn count(list: &[BubbleContact], kind: ContactKind) -> usize {
        list.iter().filter(|c| c.kind == kind).count()
    }

    pub fn self_crossings(&self) -> usize {
        Self::count(&self.self_contacts, ContactKind::Crossing)
    }

    pub fn self_overlaps(&self) -> usize {
        Self::count(&self.self_contacts, ContactKind::Overlap)
    }

    pub fn pairwise_crossings(&self) -> usize {
        Self::count(&self.pairwise_contacts, ContactKind::Crossing)
    }

    /// Transversal self-crossings of bubble `k`.
    pub fn self_crossings_of(&self, k: usize) -> usize {
        self.self_contacts
            .iter()
            .filter(|c| c.bubble_a == k && c.kind == ContactKind::Crossing)
            .count()
    }
}

struct Branch {
    bubble: usize,
    omegas: Vec<f64>,
    line: Polyline2D,
}

fn branches(k: usize, b: &BubbleCurve) -> Vec<Branch> {
    b.runs()
        .into_iter()
        .filter(|r| r.len() >= 2)
        .filter_map(|r| {
            let pts: Vec<Complex64> = r.iter().map(|p| p.1).collect();
            Polyline2D::from_complex(&pts).ok().map(|line| Branch {
                bubble: k,
                omegas: r.iter().map(|p| p.0).collect(),
                line,
            })
        })
        .collect()
}

fn omega_at(omegas: &[f64], seg: usize, t: f64) -> f64 {
    omegas[seg] + t * (omegas[seg + 1] - omegas[seg])
}

fn contacts(a: &Branch, b: &Branch, hits: &[Intersection], out: &mut Vec<BubbleContact>) {
    for x in hits {
        out.push(BubbleContact {
            bubble_a: a.bubble,
            bubble_b: b.bubble,
            omega_a: omega_at(&a.omegas, x.seg_a, x.t_a),
            omega_b: omega_at(&b.omegas, x.seg_b, x.t_b),
            point: x.point,
            kind: x.kind,
            sin_angle: x.sin_angle,
            near_tangent: x.kind == ContactKind::Crossing && x.sin_angle < TANGENCY_SIN,
        });
    }
}

fn all(set: crate::numerics::IntersectionSet) -> Vec<Intersection> {
    let mut v = set.crossings;
    v.extend(set.vertex_touches);
    v.extend(set.overlaps);
    v
}

/// Self-contacts of each bubble and contacts between every pair. Gaps split
/// a bubble into branches, which are tested against each other as part of
/// the self test.
pub fn intersection_report(bubbles: &[BubbleCurve]) -> IntersectionReport {
    let per: Vec<Vec<Branch>> = bubbles
        .iter()
        .enumerate()
        .map(|(k, b)| branches(k, b))
        .collect();
    let mut report = IntersectionReport::default();
    for list in &per {
        for (i, a) in list.iter().enumerate() {
            contacts(
                a,
                a,
                &all(polyline_self_intersections(&a.line)),
                &mut report.self_contacts,
            );
            for b in &list[i + 1..] {
                contacts(
                    a,
                    b,
                    &all(polyline_intersections(&a.line, &b.line)),
                    &mut report.self_contacts,
                );
            }
        }
    }
    for (i, la) in per.iter().enumerate() {
        for lb in &per[i + 1..] {
            for a in la {
                for b in lb {
                    contacts(
                        a,
                        b,
                        &all(polyline_intersections(&a.line, &b.line)),
                        &mut report.pairwise_contacts,
                    );
                }
            }
        }
    }
    report
}

/// Wraps a plain curve (e.g. an infinitesimal bubble) as a bubble so that it
/// can go through [`intersection_report`].
pub fn bubble_from_curve(
    rational: RationalRotation,
    interval: RotationInterval,
    samples: &[(f64, Complex64)],
) -> BubbleCurve {
    BubbleCurve {
        rational,
        interval,
        samples: samples
            .iter()
            .map(|&(omega, t)| BubbleSample {
                omega,
                tau: Some(t),
                route: None,
                residual: 0.0,
                parabolic: false,
                route_difference: None,
                error: None,
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circle_maps::TrigPoly;
    use crate::perturbation::{figure_epsilon, infinitesimal_bubble, DEFAULT_CUTOFF};
    use std::f64::consts::TAU;

    fn mob() -> CircleMap {
        CircleMap::moebius(0.5).unwrap()
    }

    fn synthetic(offset: f64) -> BubbleCurve {
        let pts: Vec<(f64, Complex64)> = (0..=20)
            .map(|k| {
                let s = k as f64 / 20.0;
                (s, Complex64::new(offset + 0.1 * s, 0.1 * (PI * s).sin()))
            })
            .collect();
        let interval = rational_interval(&mob(), RationalRotation::zero(), 1e-12).unwrap();
        bubble_from_curve(RationalRotation::zero(), interval, &pts)
    }

    #[test]
    fn moebius_zero_bubble_is_vertical_segment() {
        let cfg = BubbleConfig {
            n_samples: 21,
            ..BubbleConfig::default()
        };
        let b = compute_bubble(&mob(), RationalRotation::zero(), &cfg).unwrap();
        assert_eq!(b.gaps(), 0);
        assert!(b.max_real_deviation() < 1e-6);
        let (omega, peak) = b.peak().unwrap();
        assert!(omega.abs() < 1e-12);
        assert!((peak.im - 3f64.ln() / TAU).abs() < 1e-6, "{peak}");
        assert!(b.samples[0].parabolic && b.samples[20].parabolic);
        assert!(b.points().iter().all(|t| t.im >= -1e-9));
    }

    #[test]
    fn rotation_family_has_no_bubbles() {
        let e = compute_bubble(
            &CircleMap::rotation(0.0),
            RationalRotation::zero(),
            &BubbleConfig::default(),
        );
        assert!(matches!(e, Err(Error::NotFound(_))));
    }

    #[test]
    fn moebius_bubble_within_disc() {
        let cfg = BubbleConfig {
            n_samples: 21,
            ..BubbleConfig::default()
        };
        let b = compute_bubble(&mob(), RationalRotation::zero(), &cfg).unwrap();
        let rep = bound_check_map(&b, &mob());
        assert!(rep.passed(), "{rep:?}");
        assert_eq!(rep.checked, 21);
        assert!(rep.radius > 3f64.ln() / TAU / 2.0);
    }

    #[test]
    fn bound_check_flags_outside_points() {
        let b = synthetic(0.0);
        let rep = bound_check(&b, 1e-3);
        assert!(!rep.passed());
        assert!(rep.min_slack < 0.0);
    }

    #[test]
    fn empty_bubble_passes_vacuously() {
        let mut b = synthetic(0.0);
        b.samples.clear();
        let rep = bound_check(&b, 1.0);
        assert!(rep.passed());
        assert_eq!(rep.checked, 0);
    }

    #[test]
    fn moebius_bubble_overlaps_itself_without_crossing() {
        let cfg = BubbleConfig {
            n_samples: 21,
            ..BubbleConfig::default()
        };
        let b = compute_bubble(&mob(), RationalRotation::zero(), &cfg).unwrap();
        let rep = intersection_report(std::slice::from_ref(&b));
        assert_eq!(rep.self_crossings(), 0, "{:?}", rep.self_contacts);
    }

    #[test]
    fn disjoint_bubbles_do_not_meet() {
        let rep = intersection_report(&[synthetic(0.0), synthetic(0.5)]);
        assert_eq!(rep.pairwise_crossings(), 0);
        assert_eq!(rep.self_crossings(), 0);
    }

    #[test]
    fn shifted_copies_cross_with_parameters() {
        let rep = intersection_report(&[synthetic(0.0), synthetic(0.053)]);
        assert_eq!(rep.pairwise_crossings(), 1);
        let x = rep
            .pairwise_contacts
            .iter()
            .find(|c| c.kind == ContactKind::Crossing)
            .unwrap();
        // the crossing sits where the second curve's parameter lags by 1/2
        assert!((x.omega_a - x.omega_b - 0.5).abs() < 0.05, "{x:?}");
        assert!(!x.near_tangent);
    }

    #[test]
    fn infinitesimal_bubble_three_self_intersects() {
        let f = mob();
        let ib = infinitesimal_bubble(
            &f,
            &TrigPoly::sin(3, 1.0),
            figure_epsilon(3),
            401,
            DEFAULT_CUTOFF,
        )
        .unwrap();
        let interval = rational_interval(&f, RationalRotation::zero(), 1e-12).unwrap();
        let pts: Vec<(f64, Complex64)> = ib.samples.iter().map(|s| (s.omega, s.tau_lin)).collect();
        let b = bubble_from_curve(RationalRotation::zero(), interval, &pts);
        assert!(intersection_report(&[b]).self_crossings() >= 1);
    }

    #[test]
    fn perturbed_moebius_takes_glued_route() {
        let f = CircleMap::perturbed(mob(), TrigPoly::sin(3, 1.0), 1e-3).unwrap();
        assert_eq!(default_route(&f, RationalRotation::zero()), Route::Glued);
        assert_eq!(
            default_route(&mob(), RationalRotation::zero()),
            Route::Limit
        );
    }

    #[test]
    fn perturbed_moebius_bubble_is_near_segment() {
        let eps = 1e-3;
        let f = CircleMap::perturbed(mob(), TrigPoly::sin(3, 1.0), eps).unwrap();
        let cfg = BubbleConfig {
            n_samples: 11,
            ..BubbleConfig::default()
        };
        let b = compute_bubble(&f, RationalRotation::zero(), &cfg).unwrap();
        assert!(b.gaps() <= 1, "{:?}", b.samples);
        assert!(b.max_real_deviation() < 50.0 * eps);
        assert!(bound_check_map(&b, &f).passed());
    }
}
