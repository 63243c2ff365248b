use std::fs;

use grouprec::io::{
    load_dataset, shaped_bundle, DatasetBundle, DatasetStats, ItemHistogram, ShapeTarget, MOOCCUBE_SHAPE,
    MOVIELENS_SHAPE,
};
use grouprec::Error;

fn counts(stats: &DatasetStats) -> ShapeTarget {
    ShapeTarget {
        users: stats.users,
        items: stats.items,
        groups: stats.groups,
        vv: stats.vv_dependencies,
        uv: stats.uv_interactions,
        uvv: stats.uvv_interactions,
        gv: stats.gv_interactions,
        gvv: stats.gvv_interactions,
    }
}

#[test]
fn movielens_shape_reproduces_count_rows() {
    let bundle = shaped_bundle(&MOVIELENS_SHAPE).unwrap();
    let stats = DatasetStats::of(&bundle.build_store(1).unwrap());
    assert_eq!(counts(&stats), MOVIELENS_SHAPE);
    assert!((stats.avg_items_per_group - 318.17).abs() < 0.005);
    assert!((stats.avg_items_per_user - 107.78).abs() < 0.005);
    assert!((stats.avg_group_size - 5.97).abs() < 0.005);
    assert!((stats.avg_item_items_per_group - 54.61).abs() < 0.005);
}

#[test]
fn mooccube_shape_reproduces_count_rows() {
    let bundle = shaped_bundle(&MOOCCUBE_SHAPE).unwrap();
    let store = bundle.build_store(1).unwrap();
    let stats = DatasetStats::of(&store);
    assert_eq!(counts(&stats), MOOCCUBE_SHAPE);
    assert!((stats.avg_items_per_user - 34.44).abs() < 0.005);
    assert!((stats.avg_item_items_per_user - 110.70).abs() < 0.005);
    assert!((stats.avg_items_per_group - 38.38).abs() < 0.005);
    assert!((stats.avg_item_items_per_group - 41.01).abs() < 0.005);
    assert!((stats.avg_group_size - 7.32).abs() < 0.005);
    let hist = ItemHistogram::of(&store);
    assert_eq!(hist.explicit.iter().sum::<usize>(), 93910);
    assert_eq!(hist.implicit.iter().sum::<usize>(), 100360);
}

#[test]
fn shaped_counts_stable_under_deeper_closure() {
    let bundle = shaped_bundle(&MOVIELENS_SHAPE).unwrap();
    let s1 = DatasetStats::of(&bundle.build_store(1).unwrap());
    let s3 = DatasetStats::of(&bundle.build_store(3).unwrap());
    assert_eq!(counts(&s1), counts(&s3));
}

#[test]
fn impossible_shape_is_infeasible() {
    let mut t = MOVIELENS_SHAPE;
    t.uvv = t.gvv - 1;
    assert!(matches!(shaped_bundle(&t), Err(Error::Infeasible(_))));
    t = MOVIELENS_SHAPE;
    t.groups = t.users + 1;
    assert!(matches!(shaped_bundle(&t), Err(Error::Infeasible(_))));
}

fn write(dir: &std::path::Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

#[test]
fn toy_directory_counts() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "user_item.tsv", "# user\titem\nu1\tv1\nu2\tv2\nu2\tv1\n");
    write(dir.path(), "item_item.tsv", "v1\tv2\n");
    write(dir.path(), "groups.tsv", "g1\tu1\ng1\tu2\n");
    let bundle = load_dataset(dir.path()).unwrap();
    let stats = DatasetStats::of(&bundle.build_store(1).unwrap());
    assert_eq!((stats.users, stats.items, stats.groups), (2, 2, 1));
    assert_eq!(stats.gvv_interactions, 1);
}

#[test]
fn malformed_line_is_located() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "user_item.tsv", "u1\tv1\n# fine\nu2 v2\n");
    write(dir.path(), "item_item.tsv", "");
    write(dir.path(), "groups.tsv", "");
    match load_dataset(dir.path()) {
        Err(Error::Parse { file, line, .. }) => assert_eq!((file.as_str(), line), ("user_item.tsv", 3)),
        other => panic!("{other:?}"),
    }
}

#[test]
fn dangling_references_are_located() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "user_item.tsv", "u1\tv1\nu2\tv2\n");
    write(dir.path(), "item_item.tsv", "v1\tv2\nv2\tv9\n");
    write(dir.path(), "groups.tsv", "g1\tu1\n");
    match load_dataset(dir.path()) {
        Err(Error::Parse { file, line, message }) => {
            assert_eq!((file.as_str(), line), ("item_item.tsv", 2));
            assert!(message.contains("v9"));
        }
        other => panic!("{other:?}"),
    }
    write(dir.path(), "item_item.tsv", "v1\tv2\n");
    write(dir.path(), "groups.tsv", "g1\tu1\n\ng1\tu7\n");
    match load_dataset(dir.path()) {
        Err(Error::Parse { file, line, .. }) => assert_eq!((file.as_str(), line), ("groups.tsv", 3)),
        other => panic!("{other:?}"),
    }
    write(dir.path(), "groups.tsv", "g1\tu1\n");
    write(dir.path(), "aux_user_video.tsv", "u1\tw1\nu3\tw1\n");
    match load_dataset(dir.path()) {
        Err(Error::Parse { file, line, .. }) => assert_eq!((file.as_str(), line), ("aux_user_video.tsv", 2)),
        other => panic!("{other:?}"),
    }
}

#[test]
fn missing_file_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "user_item.tsv", "u1\tv1\n");
    assert!(matches!(load_dataset(dir.path()), Err(Error::Parse { .. })));
}

#[test]
fn save_then_load_gives_identical_matrices() {
    let bundle = DatasetBundle {
        user_item: vec![("u1".into(), "v1".into()), ("u2".into(), "v2".into()), ("u10".into(), "v1".into())],
        item_item: vec![("v1".into(), "v2".into())],
        group_user: vec![("g1".into(), "u1".into()), ("g1".into(), "u10".into())],
        aux: vec![grouprec::hin::AuxRecords {
            from: "user".into(),
            to: "video".into(),
            pairs: vec![("u1".into(), "w1".into())],
        }],
    };
    let dir = tempfile::tempdir().unwrap();
    bundle.save(dir.path()).unwrap();
    let loaded = load_dataset(dir.path()).unwrap();
    assert_eq!(loaded, bundle);
    assert_eq!(loaded.build_store(2).unwrap(), bundle.build_store(2).unwrap());
    assert_eq!(loaded.id_tables(), bundle.id_tables());
}
