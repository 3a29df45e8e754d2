use peckfit::data::{
    load_catalog, load_features, read_trials, write_catalog, write_features, write_trials, FeatureFormat,
    FeatureStore, StimulusCatalog, StimulusRecord, TrialRecord, TrialTable,
};
use peckfit::Error;
use proptest::prelude::*;

fn catalog(objects: usize, animations: usize, frames: u32) -> StimulusCatalog {
    let mut records = Vec::new();
    for o in 0..objects {
        for a in 0..animations {
            for f in 0..frames {
                records.push(StimulusRecord {
                    stimulus_id: format!("o{o}a{a}f{f}"),
                    object_id: format!("o{o}"),
                    animation_id: format!("o{o}a{a}"),
                    frame_index: f,
                    viewpoint_start_deg: (f % 2 == 0).then_some(f as f64 * 2.5),
                });
            }
        }
    }
    StimulusCatalog::new(frames, records).unwrap()
}

fn finite_f32() -> impl Strategy<Value = f32> {
    any::<u32>().prop_map(f32::from_bits).prop_filter("finite", |v| v.is_finite())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn catalog_frames_sum_to_stimulus_count(objects in 1usize..4, animations in 1usize..5, frames in 1u32..6) {
        let c = catalog(objects, animations, frames);
        let total: usize = c.animations().values().map(|a| a.frames.len()).sum();
        prop_assert_eq!(total, c.len());

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("catalog.json");
        write_catalog(&c, &path).unwrap();
        prop_assert_eq!(load_catalog(&path).unwrap(), c);
    }

    #[test]
    fn features_round_trip(dim in 1usize..6, values in prop::collection::vec(finite_f32(), 60)) {
        let c = catalog(2, 2, 3);
        let mut store = FeatureStore::new(dim);
        for (i, r) in c.records().iter().enumerate() {
            let row: Vec<f32> = (0..dim).map(|j| values[(i * dim + j) % values.len()]).collect();
            store.insert(r.stimulus_id.clone(), &row).unwrap();
        }
        let dir = tempfile::tempdir().unwrap();

        let bin = dir.path().join("f.bin");
        write_features(&store, &bin, FeatureFormat::Binary).unwrap();
        let back = load_features(&bin, &c).unwrap();
        for (id, v) in store.iter() {
            let w = back.get(id).unwrap();
            prop_assert!(v.iter().zip(w).all(|(a, b)| a.to_bits() == b.to_bits()));
        }

        let csv = dir.path().join("f.csv");
        write_features(&store, &csv, FeatureFormat::Csv).unwrap();
        let back = load_features(&csv, &c).unwrap();
        for (id, v) in store.iter() {
            // Equal values; -0.0 and 0.0 compare equal.
            prop_assert_eq!(back.get(id).unwrap(), v);
        }
    }

    #[test]
    fn trials_round_trip(outcomes in prop::collection::vec(any::<bool>(), 1..40)) {
        let rows: Vec<TrialRecord> = outcomes
            .iter()
            .enumerate()
            .map(|(i, &correct)| TrialRecord {
                subject_id: format!("s{}", i % 3),
                imprint_animation_id: "o0a0".into(),
                condition_id: format!("c{}", i % 4),
                familiar_animation_id: "o0a1".into(),
                novel_animation_id: "o1a1".into(),
                correct,
            })
            .collect();
        let table = TrialTable::new(rows);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_trials(&table, &path).unwrap();
        let back = read_trials(&path).unwrap();
        back.validate(&catalog(2, 2, 3)).unwrap();
        prop_assert_eq!(back.digest(), table.digest());
        prop_assert_eq!(back, table);
    }
}

#[test]
fn missing_file_error_names_path() {
    let err = load_catalog("/nonexistent/catalog.json").unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
    assert!(err.to_string().contains("/nonexistent/catalog.json"), "{err}");
}

#[test]
fn features_for_another_catalog_rejected() {
    let small = catalog(2, 2, 3);
    let mut store = FeatureStore::new(2);
    for r in small.records() {
        store.insert(r.stimulus_id.clone(), &[1.0, 2.0]).unwrap();
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.bin");
    write_features(&store, &path, FeatureFormat::Binary).unwrap();
    let err = load_features(&path, &catalog(2, 3, 3)).unwrap_err();
    assert!(matches!(err, Error::MissingFeatures(_)), "{err}");
}

#[test]
fn trial_with_unknown_animation_rejected_on_load() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    std::fs::write(
        &path,
        "subject_id,imprint_animation_id,condition_id,familiar_animation_id,novel_animation_id,correct\n\
         s1,o0a0,c1,o0a1,o9a1,1\n",
    )
    .unwrap();
    let err = peckfit::data::load_trials(&path, &catalog(2, 2, 3)).unwrap_err();
    assert!(err.to_string().contains("o9a1"), "{err}");
}
