use voyagekit_core::ingest::resample_voyage;
use voyagekit_core::path_id::*;
use voyagekit_core::speed_opt::split_train_test;
use voyagekit_core::synth::{generate_fleet, SyntheticFleet, SyntheticFleetSpec};

fn fleet() -> (SyntheticFleet, Vec<Path>, DistanceMatrix) {
    let spec = SyntheticFleetSpec {
        voyages_per_branch: 34,
        ..Default::default()
    };
    let fleet = generate_fleet(&spec).unwrap();
    let paths: Vec<Path> = fleet
        .voyages
        .iter()
        .map(|v| Path::from_voyage(&resample_voyage(v, 300.0).unwrap()))
        .collect();
    let matrix = build_distance_matrix(&paths, Metric::EuclideanDegrees).unwrap();
    (fleet, paths, matrix)
}

fn assert_perfect(truth: &PathLabeling, pred: &PathLabeling) {
    let aligned = align_labels(pred, truth).unwrap();
    let ev = confusion_and_metrics(truth, &aligned.labeling).unwrap();
    assert!(ev.confusion.is_diagonal(), "{:?}", ev.confusion);
    for m in ev.per_class {
        assert_eq!(m.f1, 1.0, "{}", m.class);
    }
}

#[test]
fn distance_backends_recover_branches() {
    let (fleet, _, matrix) = fleet();
    assert_eq!(matrix.len(), 102);
    assert_perfect(&fleet.labels, &hierarchical_cluster(&matrix, 0.1).unwrap());
    assert_perfect(&fleet.labels, &kmeans_rows(&matrix, 3, 1).unwrap());
    assert_perfect(&fleet.labels, &gmm_rows(&matrix, 3, 1).unwrap());
}

#[test]
fn within_branch_distances_are_far_below_between_branch() {
    let (fleet, _, matrix) = fleet();
    let labels = fleet.labels.as_map();
    let (mut within, mut between) = (0.0f64, f64::INFINITY);
    for i in 0..matrix.len() {
        for j in 0..i {
            let same = labels[matrix.ids()[i].as_str()] == labels[matrix.ids()[j].as_str()];
            if same {
                within = within.max(matrix.get(i, j));
            } else {
                between = between.min(matrix.get(i, j));
            }
        }
    }
    assert!(
        within < 0.1 && between > 0.1,
        "within {within} between {between}"
    );
}

#[test]
fn cluster_count_non_increasing_in_cutoff() {
    let (_, _, matrix) = fleet();
    let mut last = usize::MAX;
    for step in 0..=50 {
        let n = hierarchical_cluster(&matrix, step as f64 * 0.01)
            .unwrap()
            .label_set()
            .len();
        assert!(n <= last);
        last = n;
    }
    assert_eq!(last, 1);
}

#[test]
fn segment_classifier_on_held_out_voyages() {
    let (fleet, paths, _) = fleet();
    let ids: Vec<String> = paths.iter().map(|p| p.voyage_id.clone()).collect();
    let (train_ids, test_ids) = split_train_test(&ids, 0.7, 3).unwrap();
    let pick = |keep: &[String]| -> Vec<Path> {
        paths
            .iter()
            .filter(|p| keep.contains(&p.voyage_id))
            .cloned()
            .collect()
    };
    let (train, test) = (pick(&train_ids), pick(&test_ids));
    let labels = fleet.labels.as_map();
    let train_labels = PathLabeling::from_pairs(train.iter().map(|p| {
        (
            p.voyage_id.clone(),
            labels[p.voyage_id.as_str()].to_string(),
        )
    }))
    .unwrap();
    let models = fit_segment_gmms(
        &train,
        &train_labels,
        &fleet.segments,
        &SegmentConfig::default(),
    )
    .unwrap();
    assert!(models.discriminative_names().contains(&"middle"));

    let (pred, failed) = models.classify_all(&test).unwrap();
    assert!(failed.is_empty());
    let truth = PathLabeling::from_pairs(test.iter().map(|p| {
        (
            p.voyage_id.clone(),
            labels[p.voyage_id.as_str()].to_string(),
        )
    }))
    .unwrap();
    let ev = confusion_and_metrics(&truth, &pred).unwrap();
    for m in ev.per_class {
        assert_eq!(m.f1, 1.0, "{}", m.class);
    }
}
