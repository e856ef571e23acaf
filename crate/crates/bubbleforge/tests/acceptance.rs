//! Acceptance run: one PASS/FAIL line per criterion. Exits non-zero if any
//! criterion fails.

use bubbleforge::bubbles::{
    bound_check_map, boundary_tau, bubble_from_curve, compute_bubble, intersection_report,
    BubbleConfig, BubbleCurve, Route,
};
use bubbleforge::circle_maps::{CircleMap, TrigPoly};
use bubbleforge::complex_rot::{tau_interior, InteriorConfig};
use bubbleforge::linearization::{all_charts, hyperbolic_data, transition_maps};
use bubbleforge::numerics::ContactKind;
use bubbleforge::perturbation::{
    dtau_depsilon, dtau_domega, figure_epsilon, infinitesimal_bubble, DEFAULT_CUTOFF,
    FIGURE_SAMPLES,
};
use bubbleforge::rotation::{rational_interval, RationalRotation};
use num_complex::Complex64;
use rand::{rngs::StdRng, Rng, SeedableRng};
use std::f64::consts::{LN_2, TAU};
use std::time::{Duration, Instant};

const A: f64 = 0.5;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn mod1(z: Complex64) -> Complex64 {
    c(z.re - z.re.round(), z.im)
}

fn mobius() -> CircleMap {
    CircleMap::moebius(A).unwrap()
}

fn trig_map() -> CircleMap {
    CircleMap::trig_with_band(TrigPoly::sin(1, 0.6 / TAU), 0.1).unwrap()
}

fn perturbed(n: usize, eps: f64) -> CircleMap {
    CircleMap::perturbed(mobius(), TrigPoly::sin(n, 1.0), eps).unwrap()
}

/// Roots of `a w² + b w + c`.
fn quadratic(a: Complex64, b: Complex64, cc: Complex64) -> [Complex64; 2] {
    let s = (b * b - 4.0 * a * cc).sqrt();
    [(-b + s) / (2.0 * a), (-b - s) / (2.0 * a)]
}

/// τ from the attracting fixed point of `w ↦ e^{2πiω}(w + a)/(1 + aw)`:
/// `a w² + (1 − e) w − e a = 0`, multiplier `e(1 − a²)/(1 + aw)²`.
fn fixed_point_oracle(omega: Complex64) -> Complex64 {
    let e = (Complex64::i() * TAU * omega).exp();
    let mu = quadratic(c(A, 0.0), 1.0 - e, -e * A)
        .iter()
        .map(|w| e * (1.0 - A * A) / ((1.0 + A * w) * (1.0 + A * w)))
        .min_by(|x, y| x.norm().total_cmp(&y.norm()))
        .unwrap();
    mu.ln() / (Complex64::i() * TAU)
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(id: usize, name: &str, budget: Duration, run: impl FnOnce() -> Outcome) -> bool {
    let t = Instant::now();
    let out = run();
    let elapsed = t.elapsed();
    let in_time = elapsed <= budget;
    let pass = out.pass && in_time;
    println!(
        "criterion {id} {:<4} {name}: {} [{:.1}s of {}s]",
        if pass { "PASS" } else { "FAIL" },
        out.detail,
        elapsed.as_secs_f64(),
        budget.as_secs()
    );
    pass
}

fn criterion_1() -> Outcome {
    let f = mobius();
    let (mut worst, mut residual): (f64, f64) = (0.0, 0.0);
    let mut failures = 0;
    // the criterion bounds τ at K = 64; near the axis inside I₀ the
    // collocation residual at that K is ~1e-6 while τ is still ~1e-9
    let cfg = InteriorConfig::fixed(64, 1e-5);
    for i in 0..5 {
        for j in 0..5 {
            let omega = c(0.1 + 0.2 * i as f64, 0.05 + 0.0875 * j as f64);
            match tau_interior(&f, omega, &cfg) {
                Ok(s) => {
                    worst = worst.max(mod1(s.tau - fixed_point_oracle(omega)).norm());
                    residual = residual.max(s.residual);
                }
                Err(_) => failures += 1,
            }
        }
    }
    Outcome {
        pass: failures == 0 && worst < 1e-8,
        detail: format!(
            "max |τ − ln μ/2πi| = {worst:.2e} over 25 points at K = 64 (tol 1e-8), \
             max residual {residual:.1e}, {failures} solver failures"
        ),
    }
}

fn criterion_2() -> Outcome {
    let mut rng = StdRng::seed_from_u64(2);
    let id = CircleMap::rotation(0.0);
    let (mut err, mut coef): (f64, f64) = (0.0, 0.0);
    for _ in 0..10 {
        let omega = c(rng.gen_range(-1.0..1.0), rng.gen_range(0.01..1.0));
        let s = tau_interior(&id, omega, &InteriorConfig::default()).unwrap();
        err = err.max((s.tau - omega).norm());
        coef = coef.max(s.coefficients.iter().map(|v| v.norm()).fold(0.0, f64::max));
    }
    Outcome {
        pass: err < 1e-12 && coef < 1e-12,
        detail: format!("max |τ − ω| = {err:.1e}, max |c_k| = {coef:.1e} over 10 ω (tol 1e-12)"),
    }
}

fn criterion_3() -> Outcome {
    // parabolic parameters: discriminant (1 − e)² + 4a²e = e² − e + 1 = 0
    let ends: Vec<f64> = quadratic(c(1.0, 0.0), c(-1.0, 0.0), c(1.0, 0.0))
        .iter()
        .map(|e| e.arg() / TAU)
        .collect();
    let (lo, hi) = (ends[0].min(ends[1]), ends[0].max(ends[1]));
    let iv = rational_interval(&mobius(), RationalRotation::zero(), 1e-10).unwrap();
    let err = (iv.left_lift - lo).abs().max((iv.right_lift - hi).abs());
    let literal = (iv.left_lift + 1.0 / 12.0)
        .abs()
        .max((iv.right_lift - 1.0 / 12.0).abs());
    Outcome {
        pass: err < 1e-10,
        detail: format!(
            "I₀ = [{:.12}, {:.12}], discriminant oracle [{lo:.12}, {hi:.12}], error {err:.1e} (tol 1e-10); \
             distance to ±1/12 is {literal:.4}",
            iv.left_lift, iv.right_lift
        ),
    }
}

fn criterion_4(mob: &BubbleCurve) -> Outcome {
    let re = mob.max_real_deviation();
    let peak = mob.peak().map_or(f64::NAN, |p| p.1.im);
    let target = 3f64.ln() / TAU;
    Outcome {
        pass: mob.gaps() == 0 && re < 1e-6 && (peak - target).abs() < 1e-6,
        detail: format!(
            "{} samples, {} gaps, max |Re τ̄| = {re:.1e}, peak Im τ̄ = {peak:.12} vs ln3/2π {target:.12}",
            mob.samples.len(),
            mob.gaps()
        ),
    }
}

fn criterion_5() -> Outcome {
    let mut counts = Vec::new();
    let mut ok = true;
    for n in [1, 2, 3, 4, 5, 10] {
        let b = infinitesimal_bubble(
            &mobius(),
            &TrigPoly::sin(n, 1.0),
            figure_epsilon(n),
            FIGURE_SAMPLES,
            DEFAULT_CUTOFF,
        )
        .unwrap();
        let interval = rational_interval(&mobius(), RationalRotation::zero(), 1e-12).unwrap();
        let pts: Vec<(f64, Complex64)> = b.samples.iter().map(|s| (s.omega, s.tau_lin)).collect();
        let rep =
            intersection_report(&[bubble_from_curve(RationalRotation::zero(), interval, &pts)]);
        let transversal = rep
            .self_contacts
            .iter()
            .filter(|x| x.kind == ContactKind::Crossing && !x.near_tangent)
            .count();
        ok &= if n <= 2 {
            rep.self_crossings() == 0
        } else {
            transversal >= 1
        };
        counts.push(format!("n={n}:{transversal}"));
    }
    Outcome {
        pass: ok,
        detail: format!(
            "transversal self-crossings {} (need 0 for n≤2, ≥1 otherwise)",
            counts.join(" ")
        ),
    }
}

fn list(v: &[f64], fmt: impl Fn(f64) -> String) -> String {
    v.iter().map(|&x| fmt(x)).collect::<Vec<_>>().join("/")
}

/// Errors of the central differences against `exact`, the observed orders
/// and the error of the Richardson combination of the last two.
fn fd_study(
    exact: Complex64,
    steps: &[f64],
    value: impl Fn(f64) -> Complex64,
) -> (Vec<f64>, Vec<f64>, f64) {
    let fd: Vec<Complex64> = steps
        .iter()
        .map(|&h| (value(h) - value(-h)) / (2.0 * h))
        .collect();
    let errs: Vec<f64> = fd.iter().map(|d| (d - exact).norm()).collect();
    let orders = errs.windows(2).map(|w| (w[0] / w[1]).ln() / LN_2).collect();
    let n = fd.len();
    let rich = (4.0 * fd[n - 1] - fd[n - 2]) / 3.0;
    (errs, orders, (rich - exact).norm())
}

fn criterion_6() -> Outcome {
    let steps = [1e-3, 5e-4, 2.5e-4];
    let cfg = BubbleConfig::default();
    let mut lines = Vec::new();
    let mut ok = true;
    // ε-derivative at real ω, τ̄ of f + εg from the glued charts
    for (n, omega) in [(1, 0.05), (2, -0.03)] {
        let g = TrigPoly::sin(n, 1.0);
        let exact = dtau_depsilon(&mobius(), &g, omega, None).unwrap();
        let (errs, orders, rich) = fd_study(exact, &steps, |e| {
            let f = CircleMap::perturbed(mobius(), g.clone(), e).unwrap();
            boundary_tau(&f, omega, Route::Glued, &cfg).unwrap().0
        });
        ok &= orders.iter().all(|p| (p - 2.0).abs() < 0.3) && rich < 1e-6;
        lines.push(format!(
            "dτ/dε n={n}: errors {}, orders {}, Richardson {rich:.1e}",
            list(&errs, |v| format!("{v:.1e}")),
            list(&orders, |v| format!("{v:.2}"))
        ));
    }
    // ω-derivative in the interior, τ holomorphic so real steps suffice
    let f = perturbed(1, 1e-3);
    let omega = c(0.1, 0.2);
    let icfg = InteriorConfig::fixed(64, 1e-12);
    let sol = tau_interior(&f, omega, &icfg).unwrap();
    let exact = dtau_domega(&f, &sol, None).unwrap();
    let (errs, orders, rich) = fd_study(exact, &steps, |h| {
        tau_interior(&f, omega + h, &icfg).unwrap().tau
    });
    ok &= orders.iter().all(|p| (p - 2.0).abs() < 0.3) && rich < 1e-6;
    lines.push(format!(
        "dτ/dω: errors {}, orders {}, Richardson {rich:.1e}",
        list(&errs, |v| format!("{v:.1e}")),
        list(&orders, |v| format!("{v:.2}"))
    ));
    Outcome {
        pass: ok,
        detail: lines.join("; "),
    }
}

fn criterion_7(mob: &BubbleCurve) -> Outcome {
    let cfg = BubbleConfig::default();
    let mut ok = true;
    let mut parts = Vec::new();
    let maps = [
        ("möbius", mobius(), Some(mob)),
        ("sin1 1e-3", perturbed(1, 1e-3), None),
        ("sin2 2e-3", perturbed(2, 2e-3), None),
        ("sin3 5e-3", perturbed(3, 5e-3), None),
    ];
    for (name, f, given) in maps {
        let owned;
        let b = match given {
            Some(b) => b,
            None => {
                owned = compute_bubble(&f, RationalRotation::zero(), &cfg).unwrap();
                &owned
            }
        };
        let rep = bound_check_map(b, &f);
        ok &= rep.passed() && b.gaps() == 0;
        parts.push(format!(
            "{name}: {} checked, {} gaps, {} violations, R = {:.4}, min slack {:.1e}",
            rep.checked,
            b.gaps(),
            rep.violations.len(),
            rep.radius,
            rep.min_slack
        ));
    }
    Outcome {
        pass: ok,
        detail: parts.join("; "),
    }
}

fn criterion_8() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, f) in [("möbius", mobius()), ("trig", trig_map())] {
        let cfg = BubbleConfig {
            route: Some(Route::Limit),
            cross_check: true,
            ..BubbleConfig::default()
        };
        let b = compute_bubble(&f, RationalRotation::zero(), &cfg).unwrap();
        let interior = b.samples.iter().filter(|s| !s.parabolic).count();
        let agree = b
            .samples
            .iter()
            .filter(|s| s.route_difference.is_some_and(|d| d < 1e-6))
            .count();
        let worst = b
            .samples
            .iter()
            .filter_map(|s| s.route_difference)
            .fold(0.0, f64::max);
        ok &= 10 * agree >= 9 * interior;
        parts.push(format!(
            "{name}: {agree}/{interior} within 1e-6, worst {worst:.1e}"
        ));
    }
    Outcome {
        pass: ok,
        detail: parts.join("; "),
    }
}

fn criterion_9() -> Outcome {
    let mut koenigs: f64 = 0.0;
    let mut transition: f64 = 0.0;
    for f in [mobius(), trig_map(), perturbed(3, 5e-3).shift_real(0.05)] {
        let data = hyperbolic_data(&f).unwrap();
        for ch in all_charts(&f, &data).unwrap() {
            koenigs = koenigs.max(ch.residual().unwrap());
        }
        for t in transition_maps(&f).unwrap() {
            transition = transition.max(t.equivariance_residual().unwrap());
        }
    }
    // h(x) = x + 0.02 sin 2πx + 0.01 cos 4πx
    let h = TrigPoly::new(0.0, vec![0.0, 0.01], vec![0.02]);
    let cfg = BubbleConfig::default();
    let mut invariance: f64 = 0.0;
    for f in [trig_map(), perturbed(1, 1e-3)] {
        let conj = CircleMap::conjugated(f.clone(), h.clone(), 0.1).unwrap();
        let a = boundary_tau(&f, 0.0, Route::Glued, &cfg).unwrap().0;
        let b = boundary_tau(&conj, 0.0, Route::Glued, &cfg).unwrap().0;
        invariance = invariance.max(mod1(a - b).norm());
    }
    Outcome {
        pass: koenigs < 1e-9 && transition < 1e-9 && invariance < 1e-6,
        detail: format!(
            "Koenigs residual {koenigs:.1e}, equivariance {transition:.1e} (tol 1e-9), \
             |τ̄(h∘f∘h⁻¹) − τ̄(f)| = {invariance:.1e} (tol 1e-6)"
        ),
    }
}

fn main() {
    let secs = Duration::from_secs;
    let mut results = Vec::new();
    results.push(report(
        1,
        "Möbius closed form vs solver",
        secs(10),
        criterion_1,
    ));
    results.push(report(2, "rigid rotation", secs(1), criterion_2));
    results.push(report(3, "I₀ endpoints", secs(5), criterion_3));
    let t = Instant::now();
    let mob = compute_bubble(
        &mobius(),
        RationalRotation::zero(),
        &BubbleConfig::default(),
    )
    .unwrap();
    let mob_time = t.elapsed();
    results.push(report(
        4,
        "vertical-segment bubble",
        secs(60).saturating_sub(mob_time),
        || criterion_4(&mob),
    ));
    results.push(report(
        5,
        "infinitesimal-bubble self-intersections",
        secs(120),
        criterion_5,
    ));
    results.push(report(6, "derivative formulas", secs(30), criterion_6));
    results.push(report(
        7,
        "size bound",
        secs(60).saturating_sub(mob_time),
        || criterion_7(&mob),
    ));
    results.push(report(8, "two-route agreement", secs(120), criterion_8));
    results.push(report(9, "classification data", secs(60), criterion_9));
    let passed = results.iter().filter(|&&p| p).count();
    println!("{passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
