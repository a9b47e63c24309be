use proptest::prelude::*;

use nscascade::heat::{ball_mass, bilinear_w2, erf, erfc, gamma_kernel, heat_kernel, Mat3};
use nscascade::samplers::{tau0_cdf, tau1_cdf};
use nscascade::vecgeom::{b1, b2, proj_perp, reflect, unit};
use nscascade::Vec3;

fn scaled() -> impl Strategy<Value = f64> {
    (-1.0f64..1.0, -3.0f64..3.0).prop_map(|(m, e)| m * 10f64.powf(e))
}

fn vec3() -> impl Strategy<Value = Vec3> {
    (scaled(), scaled(), scaled()).prop_map(|(a, b, c)| Vec3::new(a, b, c))
}

fn nonzero() -> impl Strategy<Value = Vec3> {
    vec3().prop_filter("nonzero", |v| v.norm() > 1e-6)
}

fn rotation() -> impl Strategy<Value = Mat3> {
    (nonzero(), 0.0f64..6.283).prop_map(|(a, t)| Mat3::rotation(a, t))
}

proptest! {
    #[test]
    fn projection_is_idempotent_and_orthogonal(y in nonzero(), u in vec3()) {
        let p = proj_perp(y, u).unwrap();
        let e = unit(y).unwrap();
        let s = u.norm().max(1e-300);
        prop_assert!(p.dot(e).abs() <= 1e-12 * s);
        prop_assert!((proj_perp(y, p).unwrap() - p).norm() <= 1e-12 * s);
        prop_assert!(p.norm() <= s * (1.0 + 1e-12));
    }

    #[test]
    fn reflection_preserves_tangent_and_triples_normal(y in nonzero(), u in vec3()) {
        // reflect(u) = u − 3(e·u)e
        let e = unit(y).unwrap();
        let r = reflect(y, u).unwrap();
        let s = u.norm().max(1e-300);
        prop_assert!((r.dot(e) + 2.0 * u.dot(e)).abs() <= 1e-12 * s);
        prop_assert!((proj_perp(y, r).unwrap() - proj_perp(y, u).unwrap()).norm() <= 1e-12 * s);
    }

    #[test]
    fn bilinear_bounds(y in nonzero(), u in vec3(), v in vec3()) {
        let uv = u.norm() * v.norm();
        prop_assert!(b1(y, u, v).unwrap().norm() <= uv * (1.0 + 1e-12));
        prop_assert!(b2(y, u, v).unwrap().norm() <= 2.0 * uv * (1.0 + 1e-12));
        prop_assert!(reflect(y, u).unwrap().norm() <= 2.0 * u.norm() * (1.0 + 1e-12));
    }

    #[test]
    fn bilinear_forms_are_bilinear_and_scale_free_in_y(y in nonzero(), u in vec3(), v in vec3(), w in vec3(), c in 0.01f64..100.0) {
        let s = (u.norm() + w.norm()) * v.norm() + 1e-300;
        let lhs = b1(y, u + w, v).unwrap();
        let rhs = b1(y, u, v).unwrap() + b1(y, w, v).unwrap();
        prop_assert!((lhs - rhs).norm() <= 1e-12 * s);
        prop_assert!((b2(y * c, u, v).unwrap() - b2(y, u, v).unwrap()).norm() <= 1e-12 * s);
    }

    #[test]
    fn geometry_is_rotation_covariant(q in rotation(), y in nonzero(), u in vec3(), v in vec3()) {
        let s = u.norm() * v.norm() + 1e-300;
        let a = q.mul_vec(b1(y, u, v).unwrap());
        let b = b1(q.mul_vec(y), q.mul_vec(u), q.mul_vec(v)).unwrap();
        prop_assert!((a - b).norm() <= 1e-11 * s);
    }

    #[test]
    fn gamma_is_symmetric_with_trace_2k(x in nonzero(), s in 0.05f64..5.0) {
        let x = x * (1.0 / x.norm().max(1.0));
        let g = gamma_kernel(x, s, 1.0).unwrap();
        let k = heat_kernel(x, 2.0 * s).unwrap();
        let scale = (2.0 * k).max(g.max_abs());
        prop_assert!(g.asymmetry() <= 1e-15 * scale);
        prop_assert!((g.trace() - 2.0 * k).abs() <= 1e-12 * scale);
    }

    #[test]
    fn gamma_is_rotation_covariant(q in rotation(), x in nonzero(), s in 0.05f64..5.0) {
        let a = q.matmul(&gamma_kernel(x, s, 1.0).unwrap()).matmul(&q.transpose());
        let b = gamma_kernel(q.mul_vec(x), s, 1.0).unwrap();
        let d = (a - b).max_abs();
        prop_assert!(d <= 1e-11 * b.max_abs());
    }

    #[test]
    fn heat_kernel_is_positive_and_decreasing(r in 0.0f64..10.0, dr in 0.0f64..1.0, t in 0.01f64..10.0) {
        let a = heat_kernel(Vec3::new(r, 0.0, 0.0), t).unwrap();
        let b = heat_kernel(Vec3::new(0.0, r + dr, 0.0), t).unwrap();
        prop_assert!(a >= b && b >= 0.0);
        prop_assert!(a <= heat_kernel(Vec3::ZERO, t).unwrap());
    }

    #[test]
    fn ball_mass_is_a_cdf(r in 0.0f64..20.0, dr in 0.0f64..1.0, ns in 0.01f64..10.0) {
        let a = ball_mass(r, ns).unwrap();
        let b = ball_mass(r + dr, ns).unwrap();
        prop_assert!((0.0..=1.0).contains(&a) && a <= b + 1e-15);
    }

    #[test]
    fn erf_is_odd_with_complement(x in -6.0f64..6.0) {
        prop_assert!((erf(x) + erf(-x)).abs() <= 1e-15);
        prop_assert!((erf(x) + erfc(x) - 1.0).abs() <= 1e-15);
    }

    #[test]
    fn w2_is_continuous_at_the_series_switch(s in 0.05f64..5.0, da in -1e-9f64..1e-9) {
        let r = 2.0 * s.sqrt();
        let lo = bilinear_w2(r * (1.0 - 1e-9 + da), s, 1.0);
        let hi = bilinear_w2(r * (1.0 + 1e-9 + da), s, 1.0);
        prop_assert!((lo - hi).abs() <= 1e-6 * hi.abs());
    }

    #[test]
    fn waiting_time_cdfs_are_monotone(s in 0.0f64..10.0, ds in 0.0f64..1.0, a in 0.05f64..3.0) {
        for f in [tau1_cdf, tau0_cdf] {
            let x = f(s, a, 1.0);
            let y = f(s + ds, a, 1.0);
            prop_assert!((0.0..=1.0).contains(&x) && x <= y + 1e-15);
        }
    }
}
