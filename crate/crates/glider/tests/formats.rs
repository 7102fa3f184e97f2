use glider::formats::{field_value, read_csv, read_dataset, read_instance, read_interactions, table_from_csv, write_csv, write_dataset, CsvData};
use glider_core::crossing::{ColumnKind, Value as Cell};
use glider_core::perturb::{Mode, PerturbationDataset, SplitSizes};
use glider_core::{FeatureSchema, FieldSpec, Matrix};
use proptest::prelude::*;
use serde_json::json;
use tempfile::TempDir;

fn schema() -> FeatureSchema {
    FeatureSchema::new(vec![FieldSpec::dense("age"), FieldSpec::sparse("city", vec!["oslo".into(), "lima".into()])]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_round_trips_arbitrary_cells(cells in prop::collection::vec(prop::collection::vec(".{0,12}", 3), 1..20)) {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("t.csv");
        let data = CsvData { headers: vec!["a".into(), "b,c".into(), "\"d\"".into()], records: cells };
        write_csv(&path, &data).unwrap();
        prop_assert_eq!(read_csv(&path).unwrap(), data);
    }

    #[test]
    fn dataset_floats_survive_exactly(
        values in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO, 36),
        weighted in any::<bool>(),
    ) {
        let dir = TempDir::new().unwrap();
        let inputs = Matrix::from_vec(12, 2, values[..24].to_vec());
        let labels = values[24..].to_vec();
        let weights = weighted.then(|| vec![0.5; 12]);
        let splits = SplitSizes { train: 8, val: 2, test: 2 };
        let ds = PerturbationDataset::new(Mode::Continuous, inputs, labels, weights, splits, 42).unwrap();
        write_dataset(&dir.path().join("d"), &ds, json!({"sigma": 0.6}), None).unwrap();
        let (back, manifest) = read_dataset(&dir.path().join("d")).unwrap();
        prop_assert_eq!(back, ds);
        prop_assert_eq!(manifest.boundaries, [[0, 8], [8, 10], [10, 12]]);
    }
}

#[test]
fn sparse_values_map_to_one_based_ids() {
    let s = schema();
    assert_eq!(field_value(&s, 0, " 3.5 ").unwrap(), 3.5);
    assert_eq!(field_value(&s, 1, "oslo").unwrap(), 1.0);
    assert_eq!(field_value(&s, 1, "lima").unwrap(), 2.0);
    assert!(field_value(&s, 1, "rome").is_err());
    assert!(field_value(&s, 0, "inf").is_err());
}

#[test]
fn instances_accept_bare_arrays_and_objects() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("x.json");
    std::fs::write(&p, r#"{"id": 12, "values": [40, "lima"]}"#).unwrap();
    let (id, x) = read_instance(&p, &schema()).unwrap();
    assert_eq!(id, json!(12));
    assert_eq!(x.values, vec![40.0, 2.0]);
    std::fs::write(&p, "[1, 1]").unwrap();
    assert_eq!(read_instance(&p, &schema()).unwrap().1.values, vec![1.0, 1.0]);
    std::fs::write(&p, "[1]").unwrap();
    assert!(read_instance(&p, &schema()).is_err());
}

#[test]
fn table_kinds_follow_the_schema() {
    let data = CsvData {
        headers: vec!["age".into(), "city".into(), "extra".into()],
        records: vec![vec!["3".into(), "oslo".into(), "".into()]],
    };
    let t = table_from_csv(&data, &schema()).unwrap();
    assert_eq!(t.kinds, vec![ColumnKind::Dense, ColumnKind::Sparse, ColumnKind::Sparse]);
    assert_eq!(t.rows[0], vec![Cell::Number(3.0), Cell::Category("oslo".into()), Cell::Missing]);
    let bad = CsvData { headers: vec!["age".into()], records: vec![vec!["old".into()]] };
    assert!(table_from_csv(&bad, &schema()).is_err());
}

#[test]
fn interactions_from_summaries_names_or_indices() {
    let s = schema();
    let summary = json!({"entries": [{"names": ["age", "city"], "features": [1, 2]}]});
    assert_eq!(read_interactions(&summary, &s).unwrap(), vec![vec!["age".to_string(), "city".to_string()]]);
    assert_eq!(read_interactions(&json!([[2, 1]]), &s).unwrap(), vec![vec!["city".to_string(), "age".to_string()]]);
    assert!(read_interactions(&json!([[3, 1]]), &s).is_err());
    assert!(read_interactions(&json!("x"), &s).is_err());
}
