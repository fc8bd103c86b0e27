use nalgebra::{Matrix3, Vector3};
use polyfuse_core::geometry::{
    axis_angle, rotation_from_axis_angle, RigidTransform, ROTATION_CLEANUP_LIMIT,
};
use polyfuse_core::{backproject, project, rotation_sqrt, transform_point, CameraIntrinsics, Pixel, Point3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_axis(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

fn max_abs(m: Matrix3<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

#[test]
fn project_backproject_round_trip_1000() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let k = CameraIntrinsics::new(523.7, 519.2, 318.4, 241.9, 640, 480).unwrap();
    for _ in 0..1000 {
        let u = Pixel::new(rng.random_range(0.0..639.0), rng.random_range(0.0..479.0));
        let z = rng.random_range(0.15..12.0);
        let back = project(&k, &backproject(&k, &u, z).unwrap()).unwrap();
        assert!(back.distance(&u) < 1e-9, "{u:?} -> {back:?}");
    }
}

#[test]
fn rotation_sqrt_self_consistency_1000() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..1000 {
        let angle = rng.random_range(1e-6..std::f64::consts::PI - 1e-6);
        let r = rotation_from_axis_angle(&random_axis(&mut rng), angle);
        let q = rotation_sqrt(&r).unwrap();
        assert!(max_abs(q * q - r) < 1e-9, "angle {angle}");
        let (_, half) = axis_angle(&q);
        assert!((half - angle / 2.0).abs() < 1e-7);
    }
}

#[test]
fn rotation_sqrt_rejects_half_turn() {
    let r = rotation_from_axis_angle(&Vector3::new(1.0, 2.0, 3.0), std::f64::consts::PI);
    assert!(rotation_sqrt(&r).is_err());
}

#[test]
fn rounded_rotation_cleanup() {
    let r = rotation_from_axis_angle(&Vector3::new(0.3, -0.2, 0.9), 0.4);
    let rounded = r.map(|v| (v * 1e7).round() / 1e7);
    let t = RigidTransform::from_rounded(rounded, Vector3::zeros()).unwrap();
    assert!(max_abs(t.rotation().transpose() * t.rotation() - Matrix3::identity()) < 1e-12);
    assert!(max_abs(t.rotation() - r) < 1e-6);

    let mut skewed = r;
    skewed[(0, 1)] += 10.0 * ROTATION_CLEANUP_LIMIT;
    assert!(RigidTransform::from_rounded(skewed, Vector3::zeros()).is_err());
}

fn transform_strategy() -> impl Strategy<Value = RigidTransform> {
    (
        prop::array::uniform3(-1.0f64..1.0),
        0.0f64..3.1,
        prop::array::uniform3(-5.0f64..5.0),
    )
        .prop_filter("axis needs length", |(a, _, _)| Vector3::from(*a).norm() > 0.1)
        .prop_map(|(a, angle, t)| {
            RigidTransform::new(rotation_from_axis_angle(&Vector3::from(a), angle), Vector3::from(t))
                .unwrap()
        })
}

fn point_strategy() -> impl Strategy<Value = Point3> {
    prop::array::uniform3(-10.0f64..10.0).prop_map(|p| Point3::new(p[0], p[1], p[2]))
}

proptest! {
    #[test]
    fn compose_matches_sequential_application(
        t1 in transform_strategy(),
        t2 in transform_strategy(),
        p in point_strategy(),
    ) {
        let seq = transform_point(&t2, &transform_point(&t1, &p));
        let composed = transform_point(&t2.compose(&t1), &p);
        prop_assert!((seq - composed).norm() < 1e-9);
    }

    #[test]
    fn inverse_composes_to_identity(t in transform_strategy()) {
        let id = t.inverse().compose(&t);
        prop_assert!(max_abs(id.rotation() - Matrix3::identity()) < 1e-9);
        prop_assert!(id.translation().norm() < 1e-9);
    }

    #[test]
    fn projection_round_trip(
        u in 0.0f64..640.0,
        v in 0.0f64..480.0,
        z in 1e-3f64..1e3,
        fx in 50.0f64..2000.0,
        fy in 50.0f64..2000.0,
    ) {
        let k = CameraIntrinsics::new(fx, fy, 320.0, 240.0, 640, 480).unwrap();
        let px = Pixel::new(u, v);
        let back = project(&k, &backproject(&k, &px, z).unwrap()).unwrap();
        prop_assert!(back.distance(&px) < 1e-9);
    }
}
