mod common;

use common::oracles::{self, oracle_partition, random_cloud};
use lta::geometry::{
    cluster, component_indices, deproject, project, CameraIntrinsics, CameraPose, PointCloud, Vec3,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pose_strategy() -> impl Strategy<Value = CameraPose> {
    (-1.0..1.0f64, -1.0..1.0f64, 0.3..1.5f64, -0.3..0.3f64, -0.3..0.3f64).prop_map(|(x, y, z, tx, ty)| {
        CameraPose::look_at(Vec3::new(x, y, z), Vec3::new(tx, ty, 0.0), Vec3::new(0.0, 1.0, 0.0)).unwrap()
    })
}

proptest! {
    #[test]
    fn deproject_then_project_is_identity(
        u in 0.0..319.0f64,
        v in 0.0..239.0f64,
        depth in 0.1..3.0f64,
        pose in pose_strategy(),
    ) {
        let intr = CameraIntrinsics::default();
        let p = deproject((u, v), depth, &intr, &pose).unwrap();
        let (pu, pv) = project(&p, &intr, &pose).unwrap();
        prop_assert!((pu - u).abs() < 1e-6 && (pv - v).abs() < 1e-6, "({u},{v}) -> ({pu},{pv})");
    }

    #[test]
    fn deprojection_commutes_with_pose(
        u in 0.0..319.0f64,
        v in 0.0..239.0f64,
        depth in 0.1..3.0f64,
        pose in pose_strategy(),
    ) {
        let intr = CameraIntrinsics::default();
        let direct = deproject((u, v), depth, &intr, &pose).unwrap();
        let local = deproject((u, v), depth, &intr, &CameraPose::identity()).unwrap();
        prop_assert!((direct - pose.to_base(&local)).norm() < 1e-9);
    }
}

#[test]
fn clustering_matches_union_find_oracle_on_100_clouds() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for k in 0..100 {
        let pts = random_cloud(&mut rng);
        let link = rng.random_range(0.005..0.04);
        let got = component_indices(&PointCloud::new(pts.clone()), link);
        let want = oracle_partition(&pts, link);
        assert_eq!(got, want, "cloud {k}: {} points, link {link}", pts.len());

        // Size filtering keeps exactly the big components, and nothing is
        // shared between clusters.
        let min = 10;
        let kept = cluster(&PointCloud::new(pts.clone()), link, min);
        let big: usize = want.iter().filter(|g| g.len() >= min).map(Vec::len).sum();
        assert_eq!(kept.len(), want.iter().filter(|g| g.len() >= min).count());
        assert_eq!(kept.iter().map(PointCloud::len).sum::<usize>(), big);
    }
}

#[test]
fn scan_accuracy_over_100_random_scenes() {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for seed in 0..100u64 {
        for (n, err) in oracles::scan_errors(seed) {
            assert!(err < 0.005, "scene {seed} {n}: error {:.2} mm", err * 1e3);
            worst = worst.max(err);
            count += 1;
        }
    }
    assert!(count >= 200);
    eprintln!("{count} objects, worst centroid error {:.2} mm", worst * 1e3);
}
