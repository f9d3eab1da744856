use std::f64::consts::PI;
use std::sync::Arc;

use proptest::prelude::*;

use super::catalog::{circle, circle_parametric, flat, sphere, torus};
use super::*;

fn v(x: &[f64]) -> Vector {
    Vector::from_column_slice(x)
}

fn assert_close(a: &Vector, b: &Vector, tol: f64) {
    assert!((a - b).amax() <= tol, "{a:?} vs {b:?}");
}

fn torus_foot(q: &Vector, major: f64, minor: f64) -> Vector {
    let rho = (q[0] * q[0] + q[1] * q[1]).sqrt();
    let ring = v(&[major * q[0] / rho, major * q[1] / rho, 0.0]);
    let off = q - &ring;
    &ring + off * (minor / (q - &ring).norm())
}

#[test]
fn circle_projector_example() {
    for m in [circle(1.0).unwrap(), circle_parametric(1.0).unwrap()] {
        let p = m.projector_matrix(&v(&[1.0, 0.0])).unwrap();
        assert!((p - Matrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0])).amax() <= 1e-12);
    }
}

#[test]
fn circle_second_fundamental_form_example() {
    for m in [circle(1.0).unwrap(), circle_parametric(1.0).unwrap()] {
        let h = m.second_fundamental_form(&v(&[1.0, 0.0]), &v(&[0.0, 1.0]), &v(&[0.0, 1.0])).unwrap();
        assert_close(&h, &v(&[-1.0, 0.0]), 1e-6);
    }
}

#[test]
fn circle_closest_point_and_v_inverse_example() {
    let m = circle(1.0).unwrap();
    let q = v(&[1.5, 0.0]);
    assert_close(&m.closest_point(&q).unwrap(), &v(&[1.0, 0.0]), 1e-12);
    let w = m.v_inverse_apply(&q, &v(&[0.0, 1.0])).unwrap();
    assert_close(&w, &v(&[0.0, 1.5]), 1e-6);
    let back = m.v_apply(&q, &v(&[0.0, 1.5])).unwrap();
    assert_close(&back, &v(&[0.0, 1.0]), 1e-6);
}

#[test]
fn origin_has_no_unique_nearest_point_on_circle() {
    let m = circle(1.0).unwrap();
    let err = m.closest_point(&v(&[0.0, 0.0])).unwrap_err();
    assert!(matches!(err, Error::NonUnique { .. } | Error::OutsideTube { .. }), "{err:?}");
    // the reach of the unit circle is 1
    let far = m.closest_point(&v(&[0.0, 2.5]));
    assert!(matches!(far, Err(Error::OutsideTube { .. })), "{far:?}");
}

#[test]
fn flat_manifold_has_no_curvature() {
    let m = flat(1, 2).unwrap();
    let q = v(&[0.7, 0.0]);
    assert_close(&m.second_fundamental_form(&q, &v(&[1.0, 0.0]), &v(&[2.0, 0.0])).unwrap(), &v(&[0.0, 0.0]), 0.0);
    let far = v(&[-3.0, 17.5]);
    assert_close(&m.closest_point(&far).unwrap(), &v(&[-3.0, 0.0]), 1e-12);
    assert_close(&m.v_inverse_apply(&far, &v(&[1.0, 0.0])).unwrap(), &v(&[1.0, 0.0]), 1e-12);
}

#[test]
fn off_manifold_and_non_tangent_inputs_are_rejected() {
    let m = circle(1.0).unwrap();
    assert!(matches!(m.projector_matrix(&v(&[1.1, 0.0])), Err(Error::NotOnManifold { .. })));
    let q = v(&[1.0, 0.0]);
    assert!(matches!(m.second_fundamental_form(&q, &v(&[1.0, 0.0]), &v(&[0.0, 1.0])), Err(Error::NotTangent { .. })));
    assert!(matches!(m.weingarten_adjoint(&q, &v(&[0.0, 1.0]), &v(&[0.0, 1.0])), Err(Error::NotNormal { .. })));
    assert!(matches!(m.projector_matrix(&v(&[1.0, 0.0, 0.0])), Err(Error::DimensionMismatch { .. })));
}

#[test]
fn sphere_operators_match_closed_forms() {
    let r = 2.0;
    let m = sphere(r, 3).unwrap();
    for q in m.sample_points(40, 5).unwrap() {
        let p = m.projector_matrix(&q).unwrap();
        let expected = Matrix::identity(3, 3) - &q * q.transpose() / (r * r);
        assert!((&p - expected).amax() <= 1e-12);
        let frame = m.tangent_frame(&q).unwrap();
        assert!(frame.orthonormality_defect() <= 1e-12);
        let (a, b) = (&frame.tangent[0] * 0.8 - &frame.tangent[1] * 0.3, &frame.tangent[1] * 1.7);
        let h = m.second_fundamental_form(&q, &a, &b).unwrap();
        assert_close(&h, &(-&q * a.dot(&b) / (r * r)), 1e-10);
        let n = &frame.normal[0] * 0.6;
        let hs = m.weingarten_adjoint(&q, &a, &n).unwrap();
        assert_close(&hs, &(-&a * q.dot(&n) / (r * r)), 1e-10);
        // adjointness ⟨h(a, b), n⟩ = ⟨b, h*(a, n)⟩
        assert!((h.dot(&n) - b.dot(&hs)).abs() <= 1e-10);
        // v⁻¹(q) multiplies by ‖q‖ / r on the sphere
        let outside = &q * 1.3;
        assert_close(&m.v_inverse_apply(&outside, &a).unwrap(), &(&a * 1.3), 1e-9);
        assert_close(&m.v_apply(&outside, &a).unwrap(), &(&a / 1.3), 1e-9);
    }
}

#[test]
fn torus_closest_point_matches_geometry() {
    let (major, minor) = (2.0, 0.5);
    let m = torus(major, minor).unwrap();
    assert_eq!(m.theta(), 0.5);
    for (i, base) in m.sample_points(30, 2).unwrap().into_iter().enumerate() {
        let frame = m.tangent_frame(&base).unwrap();
        let step = 0.4 * ((i % 5) as f64 / 4.0 - 0.5);
        let q = &base + &frame.normal[0] * step;
        let foot = m.closest_point(&q).unwrap();
        assert_close(&foot, &torus_foot(&q, major, minor), 1e-9);
        assert!((m.distance(&q).unwrap() - step.abs()).abs() <= 1e-9);
    }
}

#[test]
fn torus_projector_derivative_matches_differences() {
    let m = torus(2.0, 0.5).unwrap();
    for q in m.sample_points(10, 7).unwrap() {
        let frame = m.tangent_frame(&q).unwrap();
        let a = &frame.tangent[0] + &frame.tangent[1] * 0.5;
        let analytic = m.projector_derivative(&q, &a).unwrap();
        let fd = m.projector_derivative_fd(&q, &a).unwrap();
        assert!((analytic - fd).amax() <= 1e-6);
    }
}

#[test]
fn parametric_and_implicit_circles_agree() {
    let imp = circle(1.5).unwrap();
    let par = circle_parametric(1.5).unwrap();
    for k in 0..12 {
        let a = 2.0 * PI * k as f64 / 12.0 + 0.1;
        let q = v(&[1.9 * a.cos(), 1.9 * a.sin()]);
        assert_close(&imp.closest_point(&q).unwrap(), &par.closest_point(&q).unwrap(), 1e-10);
        let foot = imp.closest_point(&q).unwrap();
        let t = v(&[-a.sin(), a.cos()]);
        assert_close(&imp.v_inverse_apply(&q, &t).unwrap(), &par.v_inverse_apply(&q, &t).unwrap(), 1e-6);
        assert_close(
            &imp.projector_matrix(&foot).unwrap().column(0).into(),
            &par.projector_matrix(&foot).unwrap().column(0).into(),
            1e-10,
        );
    }
}

#[test]
fn tangent_frame_is_deterministic() {
    let m = torus(2.0, 0.5).unwrap();
    let q = m.sample_points(1, 0).unwrap().remove(0);
    assert_eq!(m.tangent_frame(&q).unwrap(), m.tangent_frame(&q).unwrap());
    let f = flat(2, 3).unwrap().tangent_frame(&v(&[0.3, 0.1, 0.0])).unwrap();
    assert_close(&f.tangent[0], &v(&[1.0, 0.0, 0.0]), 0.0);
    assert_close(&f.tangent[1], &v(&[0.0, 1.0, 0.0]), 0.0);
    assert_close(&f.normal[0], &v(&[0.0, 0.0, 1.0]), 0.0);
}

#[test]
fn custom_implicit_manifold_with_sample_box() {
    // the parabola y = x² is handled with finite-difference curvature
    #[derive(Debug)]
    struct Parabola;
    impl Constraint for Parabola {
        fn ambient_dim(&self) -> usize {
            2
        }
        fn codim(&self) -> usize {
            1
        }
        fn value(&self, q: &Vector) -> Vector {
            v(&[q[1] - q[0] * q[0]])
        }
        fn jacobian(&self, q: &Vector) -> Matrix {
            Matrix::from_row_slice(1, 2, &[-2.0 * q[0], 1.0])
        }
    }
    let m = Submanifold::implicit("parabola", Arc::new(Parabola), 0.4)
        .unwrap()
        .with_sample_box(vec![(-1.0, 1.0), (0.0, 1.0)])
        .unwrap();
    let q = v(&[0.0, 0.0]);
    // curvature 2 at the vertex, normal (0, 1)
    let h = m.second_fundamental_form(&q, &v(&[1.0, 0.0]), &v(&[1.0, 0.0])).unwrap();
    assert_close(&h, &v(&[0.0, 2.0]), 1e-6);
    assert_close(&m.closest_point(&v(&[0.0, -0.2])).unwrap(), &q, 1e-10);
}

fn sphere_point(r: f64) -> impl Strategy<Value = Vector> {
    (0.0..2.0 * PI, -1.0f64..1.0).prop_map(move |(phi, z)| {
        let rho = (1.0 - z * z).sqrt();
        v(&[r * rho * phi.cos(), r * rho * phi.sin(), r * z])
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projector_is_symmetric_idempotent_rank_m(q in sphere_point(1.3)) {
        let m = sphere(1.3, 3).unwrap();
        let p = m.projector_matrix(&q).unwrap();
        prop_assert!((&p - p.transpose()).amax() <= 1e-12);
        prop_assert!((&p * &p - &p).amax() <= 1e-12);
        prop_assert!((p.trace() - 2.0).abs() <= 1e-12);
    }

    #[test]
    fn second_fundamental_form_is_symmetric_and_normal(
        angle in 0.0..2.0 * PI,
        a in -2.0..2.0f64,
        b in -2.0..2.0f64,
        c in -2.0..2.0f64,
        d in -2.0..2.0f64,
    ) {
        let m = torus(2.0, 0.5).unwrap();
        let q = m.sample_points(8, 3).unwrap()[(angle * 1.2) as usize % 8].clone();
        let f = m.tangent_frame(&q).unwrap();
        let x = &f.tangent[0] * a + &f.tangent[1] * b;
        let y = &f.tangent[0] * c + &f.tangent[1] * d;
        let hxy = m.second_fundamental_form(&q, &x, &y).unwrap();
        let hyx = m.second_fundamental_form(&q, &y, &x).unwrap();
        prop_assert!((&hxy - &hyx).amax() <= 1e-8 * (1.0 + hxy.norm()));
        let p = m.projector_matrix(&q).unwrap();
        prop_assert!((&p * &hxy).norm() <= 1e-8 * (1.0 + hxy.norm()));
    }

    #[test]
    fn closest_point_is_orthogonal_and_idempotent(q in sphere_point(1.0), s in 0.3..1.7f64) {
        let m = sphere(1.0, 3).unwrap();
        let x = &q * s;
        let foot = m.closest_point(&x).unwrap();
        prop_assert!((&foot - &q).amax() <= 1e-10);
        prop_assert!((m.projector_matrix(&foot).unwrap() * (&x - &foot)).norm() <= 1e-10);
        prop_assert!((m.closest_point(&foot).unwrap() - &foot).amax() <= 1e-12);
    }

    #[test]
    fn v_and_v_inverse_are_mutually_inverse(angle in 0.0..2.0 * PI, r in 0.3..1.7f64, t in -3.0..3.0f64) {
        let m = circle(1.0).unwrap();
        let q = v(&[r * angle.cos(), r * angle.sin()]);
        let p = v(&[-angle.sin(), angle.cos()]) * t;
        let w = m.v_inverse_apply(&q, &p).unwrap();
        prop_assert!((&w - &p * r).amax() <= 1e-6 * (1.0 + t.abs()));
        let back = m.v_apply(&q, &w).unwrap();
        prop_assert!((back - &p).amax() <= 1e-9 * (1.0 + t.abs()));
    }
}

/// `dπ_M(q) e` by central differences of the closest-point map.
fn closest_point_derivative(m: &Submanifold, q: &Vector, e: &Vector) -> Vector {
    let h = 1e-6;
    (m.closest_point(&(q + e * h)).unwrap() - m.closest_point(&(q - e * h)).unwrap()) / (2.0 * h)
}

#[test]
fn v_is_self_adjoint_and_matches_closest_point_derivative() {
    let cases = [torus(2.0, 0.5).unwrap(), sphere(1.0, 3).unwrap(), circle(1.0).unwrap(), flat(2, 3).unwrap()];
    for m in &cases {
        for (i, base) in m.sample_points(12, 6).unwrap().into_iter().enumerate() {
            let frame = m.tangent_frame(&base).unwrap();
            let q = &base + &frame.normal[0] * (0.3 * m.theta().min(1.0) * if i % 2 == 0 { 1.0 } else { -1.0 });
            let (f, vinv) = m.v_inverse_matrix(&q).unwrap();
            assert!((&vinv - vinv.transpose()).amax() <= 1e-7, "{}: {vinv}", m.name());
            for e in &f.tangent {
                let fd = closest_point_derivative(m, &q, e);
                let v = m.v_apply(&q, e).unwrap();
                assert!((&fd - &v).amax() <= 1e-6, "{}: {fd:?} vs {v:?}", m.name());
            }
            // normal directions are annihilated by dπ_M
            for n in &f.normal {
                assert!(closest_point_derivative(m, &q, n).amax() <= 1e-6);
            }
        }
    }
}
