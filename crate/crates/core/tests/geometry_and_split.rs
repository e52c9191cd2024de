mod common;

use hipmetrics::geometry::{alpha_angle, anatomical_angles, lce_angle};
use hipmetrics::model::{Frame, ImageGeometry, LandmarkSet, Point2, Thresholds};
use hipmetrics::split::{balanced_split, partition_sizes, random_split, Partition, PatientAlphas, SplitError};
use proptest::prelude::*;

fn hip(lce_deg: f64, alpha_deg: f64) -> LandmarkSet {
    let c = Point2::new(300.0, 300.0);
    let at = |deg: f64, len: f64| {
        let t = deg.to_radians();
        Point2::new(c.x + len * t.sin(), c.y - len * t.cos())
    };
    // NA lies 100° from vertical, LCP α beyond it
    LandmarkSet::new(
        [c, at(100.0, 80.0), at(lce_deg, 60.0), at(100.0 - alpha_deg, 70.0)],
        Frame::Native,
    )
}

fn rotate(lm: &LandmarkSet, theta_deg: f64) -> LandmarkSet {
    let (s, c) = theta_deg.to_radians().sin_cos();
    let o = lm[hipmetrics::LandmarkId::Fhc];
    lm.map(lm.frame(), |p| {
        let (dx, dy) = (p.x - o.x, p.y - o.y);
        Point2::new(o.x + c * dx - s * dy, o.y + s * dx + c * dy)
    })
}

proptest! {
    #[test]
    fn lce_tracks_rotation(lce in 5.0f64..80.0, alpha in 30.0f64..90.0, theta in -4.0f64..90.0) {
        let lm = hip(lce, alpha);
        let moved = rotate(&lm, theta);
        let before = lce_angle(&lm).unwrap();
        let after = lce_angle(&moved).unwrap();
        prop_assert!((before - lce).abs() < 1e-9);
        prop_assert!(((after - before).abs() - theta.abs()).abs() < 1e-9);
        prop_assert!((alpha_angle(&moved).unwrap() - alpha).abs() < 1e-9);
    }

    #[test]
    fn network_frame_gives_same_angles(lce in 5.0f64..80.0, alpha in 30.0f64..90.0, w in 700u32..2500, h in 700u32..2500) {
        let g = ImageGeometry::fit_to_network(w, h, Some((0.3, 0.3)));
        let lm = hip(lce, alpha);
        let net = lm.to_frame(Frame::Network512, &g).unwrap();
        let a = anatomical_angles(&lm, &g, Thresholds::default()).unwrap();
        let b = anatomical_angles(&net, &g, Thresholds::default()).unwrap();
        prop_assert!((a.alpha_deg - b.alpha_deg).abs() < 1e-7);
        prop_assert!((a.lce_deg - b.lce_deg).abs() < 1e-7);
    }
}

#[test]
fn threshold_values_are_negative() {
    let t = Thresholds::default();
    let a = anatomical_angles(&hip(40.0, 65.0), &ImageGeometry::fit_to_network(600, 600, None), t).unwrap();
    assert!((a.lce_deg - 40.0).abs() < 1e-9 && (a.alpha_deg - 65.0).abs() < 1e-9);
    let flags = hipmetrics::geometry::classify(65.0, 40.0, t);
    assert!(!flags.cam_positive && !flags.pincer_positive);
    let flags = hipmetrics::geometry::classify(65.000001, 40.000001, t);
    assert!(flags.cam_positive && flags.pincer_positive);
}

#[test]
fn balanced_split_beats_random_partitions() {
    for seed in 0..5 {
        let patients = common::bimodal_patients(89, 40 + seed);
        let sizes = partition_sizes(89, [0.65, 0.10, 0.25]).unwrap();
        let best = balanced_split(&patients, [0.65, 0.10, 0.25], seed, 300).unwrap();
        let random: Vec<f64> = (0..100)
            .map(|i| common::random_partition_max_ks(&patients, sizes, 5000 + i))
            .collect();
        assert!(best.ks.max() <= common::median(random), "seed {seed}");
    }
}

#[test]
fn balanced_is_best_of_its_restarts() {
    let patients = common::bimodal_patients(40, 3);
    let best = balanced_split(&patients, [0.6, 0.2, 0.2], 9, 50).unwrap();
    for r in 0..50 {
        let s = random_split(&patients, [0.6, 0.2, 0.2], 9, r).unwrap();
        assert!(best.ks.max() <= s.ks.max());
    }
    let at = random_split(&patients, [0.6, 0.2, 0.2], 9, best.restart).unwrap();
    assert_eq!(at.assignment, best.assignment);
}

#[test]
fn split_counts_and_determinism() {
    let patients = common::bimodal_patients(89, 8);
    let a = balanced_split(&patients, [0.65, 0.10, 0.25], 1, 100).unwrap();
    assert_eq!(a.patient_counts, [57, 8, 24]);
    assert_eq!(
        a.image_counts.iter().sum::<usize>(),
        patients.iter().map(|p| p.alphas.len()).sum::<usize>()
    );
    let b = balanced_split(&patients, [0.65, 0.10, 0.25], 1, 100).unwrap();
    assert_eq!(a, b);
    for p in &patients {
        assert!(Partition::ALL.contains(&a.partition_of(&p.id).unwrap()));
    }
}

#[test]
fn split_rejects_bad_input() {
    let p = |id: &str| PatientAlphas {
        id: id.into(),
        alphas: vec![60.0],
    };
    assert!(matches!(
        balanced_split(&[p("a"), p("b")], [0.65, 0.10, 0.25], 0, 1),
        Err(SplitError::TooFewPatients(2))
    ));
    assert!(matches!(
        balanced_split(&[p("a"), p("b"), p("a")], [0.4, 0.3, 0.3], 0, 1),
        Err(SplitError::DuplicatePatient(_))
    ));
    assert!(matches!(
        balanced_split(&[p("a"), p("b"), p("c")], [0.65, 0.10, 0.25], 0, 1),
        Err(SplitError::EmptyPartition { .. })
    ));
}
