use ckn_degenerate::multibubble::{interaction, moduli, BubbleConfig, Modulus, DEFAULT_ZETA};
use ckn_degenerate::params::{critical_exponent, felli_schneider_b};
use ckn_degenerate::stability::{nearest_bubble, project_y};
use ckn_degenerate::{CknParams, Cylinder, ZonalField};
use proptest::prelude::*;
use std::sync::{Arc, OnceLock};

fn admissible() -> impl Strategy<Value = CknParams> {
    (2usize..=6, 0.01f64..0.99).prop_map(|(n, u)| {
        let top = critical_exponent(n).min(8.0);
        CknParams::from_pn(2.0 + u * (top - 2.0), n).unwrap()
    })
}

fn cyl() -> Arc<Cylinder> {
    static C: OnceLock<Arc<Cylinder>> = OnceLock::new();
    C.get_or_init(|| Cylinder::default_for(CknParams::from_pn(4.0, 3).unwrap()).unwrap())
        .clone()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parameters_lie_on_the_curve(c in admissible()) {
        let b = felli_schneider_b(c.a, c.n).unwrap();
        prop_assert!((b - c.b).abs() <= 1e-10 * (1.0 + b.abs()));
        prop_assert!(c.a < 0.0 || c.n > 2);
    }

    #[test]
    fn bubble_solves_the_profile_equation(c in admissible(), x in -3.0f64..3.0) {
        let h = 1e-3;
        let v = |y| c.bubble(y);
        let d2 = (v(x + h) - 2.0 * v(x) + v(x - h)) / (h * h);
        let lhs = -d2 + c.lambda * v(x);
        let rhs = c.bubble_pow(x, c.p - 1.0);
        prop_assert!((lhs - rhs).abs() <= 1e-4 * rhs.max(v(x)), "{lhs} vs {rhs}");
    }

    #[test]
    fn interaction_is_symmetric_and_translation_invariant(
        c in admissible(), t1 in -3.0f64..3.0, gap in 0.5f64..4.0, u in 0.0f64..1.0, shift in -2.0f64..2.0,
    ) {
        let t2 = t1 + gap;
        let (q1, q2) = (u * c.p, c.p - u * c.p);
        let a = interaction(&c, t1, t2, q1, q2).unwrap();
        let b = interaction(&c, t2, t1, q2, q1).unwrap();
        let d = interaction(&c, t1 + shift, t2 + shift, q1, q2).unwrap();
        prop_assert!(a > 0.0);
        prop_assert!((a - b).abs() <= 1e-10 * a);
        prop_assert!((a - d).abs() <= 1e-6 * a, "{a} vs {d}");
    }

    #[test]
    fn moduli_are_ordered(c in admissible(), x in 1e-6f64..0.9, nu in 1usize..4) {
        let f1 = moduli(Modulus::F1 { nu }, c.p, x).unwrap();
        let f2 = moduli(Modulus::F2, c.p, x).unwrap();
        let f3 = moduli(Modulus::F3, c.p, x).unwrap();
        prop_assert!(f1 >= x * (1.0 - 1e-12));
        prop_assert!(f2 <= f1 * (1.0 + 1e-12));
        prop_assert!(f3 > 0.0);
    }

    #[test]
    fn neighbour_interactions_are_bounded_by_q(
        c in admissible(), gaps in prop::collection::vec(0.5f64..5.0, 1..4),
    ) {
        let mut centers = vec![-5.0];
        for g in &gaps {
            centers.push(centers.last().unwrap() + g);
        }
        let cfg = BubbleConfig::new(c, centers, DEFAULT_ZETA).unwrap();
        for i in 0..cfg.nu() - 1 {
            prop_assert!(cfg.q_pair(i, i + 1) <= cfg.q * (1.0 + 1e-12));
        }
    }

    #[test]
    fn bubbles_superadd(c in admissible(), gap in 0.3f64..6.0, s in -6.0f64..6.0) {
        let cfg = BubbleConfig::new(c, vec![-gap / 2.0, gap / 2.0], DEFAULT_ZETA).unwrap();
        let excess = cfg.nonlinear_excess(s);
        prop_assert!(excess >= -1e-14 * c.bubble_pow(0.0, c.p - 1.0));
    }

    #[test]
    fn weighted_norms_are_monotone_and_homogeneous(
        c in admissible(), gap in 1.0f64..5.0, which in 1usize..=3, scale in 0.1f64..10.0,
    ) {
        let cfg = BubbleConfig::new(c, vec![0.0, gap], DEFAULT_ZETA).unwrap();
        let small = |s: f64| 0.5 * c.bubble(s);
        let big = |s: f64| c.bubble(s) + c.bubble(s - gap);
        let ns = cfg.weighted_norm(which, small).unwrap();
        let nb = cfg.weighted_norm(which, big).unwrap();
        let nk = cfg.weighted_norm(which, |s| scale * big(s)).unwrap();
        prop_assert!(ns <= nb * (1.0 + 1e-12));
        prop_assert!((nk - scale * nb).abs() <= 1e-10 * nk.max(1e-300));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn projection_removes_the_kernel_direction(t in -2.0f64..2.0, a in -0.5f64..0.5, b in -0.5f64..0.5) {
        let c = cyl();
        let v = ZonalField::linear_combination(&[
            (1.0, &ZonalField::bubble(&c, t)),
            (a, &ZonalField::kernel_mode(&c, t)),
            (b, &ZonalField::bubble_ds(&c, t)),
        ]).unwrap();
        let (coef, rem) = project_y(&v, t).unwrap();
        let k = ZonalField::kernel_mode(&c, t);
        prop_assert!((coef - a).abs() <= 1e-10);
        prop_assert!(rem.h1_inner(&k).unwrap().abs() <= 1e-10 * v.h1_norm() * k.h1_norm());
    }

    #[test]
    fn fitting_is_translation_equivariant(k in -20isize..20, a in -0.03f64..0.03) {
        let c = cyl();
        let v = ZonalField::linear_combination(&[
            (1.0, &ZonalField::bubble(&c, 0.3)),
            (a, &ZonalField::kernel_mode(&c, 0.3)),
            (a * a, &ZonalField::theta_mode(&c, &c.bubble(0.0))),
        ]).unwrap();
        let base = nearest_bubble(&v, false).unwrap();
        let moved = nearest_bubble(&v.translated_cells(k), false).unwrap();
        let h = c.grid().spacing();
        prop_assert!((moved.t_star - base.t_star - k as f64 * h).abs() <= 1e-8);
        prop_assert!((moved.distance - base.distance).abs() <= 1e-8 * (1.0 + base.distance));
    }
}
