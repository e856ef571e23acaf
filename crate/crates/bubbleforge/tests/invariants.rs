use bubbleforge::bubbles::{bound_check_map, boundary_tau, compute_bubble, BubbleConfig, Route};
use bubbleforge::circle_maps::{CircleMap, TrigPoly};
use bubbleforge::complex_rot::{tau_interior, InteriorConfig};
use bubbleforge::moebius::{moebius_tau, DiscAutomorphism};
use bubbleforge::rotation::RationalRotation;
use num_complex::Complex64;
use proptest::prelude::*;

fn mod1(z: Complex64) -> Complex64 {
    Complex64::new(z.re - z.re.round(), z.im)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn interior_solver_matches_closed_form(a in 0.1f64..0.5, theta in 0.0f64..1.0, re in 0.0f64..1.0, im in 0.15f64..0.4) {
        let m = DiscAutomorphism::new(theta, Complex64::new(a, 0.0)).unwrap();
        let f = CircleMap::from_automorphism(m).unwrap();
        let omega = Complex64::new(re, im);
        let s = tau_interior(&f, omega, &InteriorConfig::default()).unwrap();
        prop_assert!(mod1(s.tau - moebius_tau(&m, omega).unwrap()).norm() < 1e-8);
    }

    #[test]
    fn tau_is_periodic_and_in_upper_half_plane(b in -0.04f64..0.04, re in 0.0f64..1.0, im in 0.02f64..0.3) {
        let f = CircleMap::trig(TrigPoly::new(0.0, vec![0.02], vec![b])).unwrap();
        let omega = Complex64::new(re, im);
        let t0 = tau_interior(&f, omega, &InteriorConfig::default()).unwrap().tau;
        let t1 = tau_interior(&f, omega + 1.0, &InteriorConfig::default()).unwrap().tau;
        prop_assert!(t0.im > 0.0);
        prop_assert!(mod1(t1 - t0 - 1.0).norm() < 1e-9);
    }

    #[test]
    fn perturbed_bubbles_respect_the_size_bound(n in 1usize..=3, eps in 0.0f64..3e-3) {
        let f = CircleMap::perturbed(CircleMap::moebius(0.5).unwrap(), TrigPoly::sin(n, 1.0), eps).unwrap();
        let cfg = BubbleConfig { n_samples: 15, ..BubbleConfig::default() };
        let b = compute_bubble(&f, RationalRotation::zero(), &cfg).unwrap();
        prop_assert_eq!(b.gaps(), 0);
        prop_assert!(b.samples.iter().all(|s| s.tau.unwrap().im >= -1e-9));
        prop_assert!(bound_check_map(&b, &f).passed());
    }

    #[test]
    fn boundary_value_is_conjugacy_invariant(h1 in -0.03f64..0.03, h2 in -0.01f64..0.01) {
        let f = CircleMap::perturbed(CircleMap::moebius(0.5).unwrap(), TrigPoly::cos(2, 1.0), 2e-3).unwrap();
        let h = TrigPoly::new(0.0, vec![h1], vec![0.0, h2]);
        let g = CircleMap::conjugated(f.clone(), h, 0.1).unwrap();
        let cfg = BubbleConfig::default();
        let a = boundary_tau(&f, 0.0, Route::Glued, &cfg).unwrap().0;
        let b = boundary_tau(&g, 0.0, Route::Glued, &cfg).unwrap().0;
        prop_assert!(mod1(a - b).norm() < 1e-6, "{} vs {}", a, b);
    }
}

#[test]
fn routes_agree_inside_the_interval() {
    let f = CircleMap::trig_with_band(TrigPoly::new(0.0, vec![0.03], vec![0.05]), 0.1).unwrap();
    let cfg = BubbleConfig::default();
    for omega in [-0.02, 0.0, 0.03] {
        let a = boundary_tau(&f, omega, Route::Limit, &cfg).unwrap().0;
        let b = boundary_tau(&f, omega, Route::Glued, &cfg).unwrap().0;
        assert!(mod1(a - b).norm() < 1e-6, "ω = {omega}: {a} vs {b}");
    }
}
