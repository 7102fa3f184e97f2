use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use proptest::prelude::*;

use super::*;

fn names(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn cat(s: &str) -> Value {
    Value::Category(s.to_string())
}

fn sparse_table(rows: &[(&str, &str)]) -> Table {
    let mut t = Table::new(names(&["a", "b"]), vec![ColumnKind::Sparse, ColumnKind::Sparse]);
    for (a, b) in rows {
        t.push_row(vec![cat(a), cat(b)]).unwrap();
    }
    t
}

#[test]
fn ids_follow_descending_count_with_lexicographic_ties() {
    let mut rows = Vec::new();
    rows.extend(core::iter::repeat_n(("x", "1"), 5));
    rows.extend(core::iter::repeat_n(("y", "2"), 3));
    rows.extend(core::iter::repeat_n(("a", "9"), 3));
    rows.push(("z", "z"));
    let t = sparse_table(&rows);
    let spec = build_cross_vocab(&t, &names(&["a", "b"]), 1, &BTreeMap::new()).unwrap();
    let got: Vec<(Vec<Token>, u32, u64)> =
        spec.vocabulary.iter().map(|e| (e.combination.clone(), e.id, e.count)).collect();
    let tok = |s: &str| Token::Category(s.to_string());
    assert_eq!(
        got,
        vec![(vec![tok("x"), tok("1")], 1, 5), (vec![tok("a"), tok("9")], 2, 3), (vec![tok("y"), tok("2")], 3, 3)]
    );
    assert_eq!(spec.lookup(&[tok("z"), tok("z")]), DEFAULT_ID);
    assert_eq!(spec.column_name(), "cross__a__b");
    assert_eq!(spec.cardinality(), 4);
}

#[test]
fn threshold_is_strict() {
    let t = sparse_table(&[("p", "q"), ("p", "q")]);
    let fields = names(&["a", "b"]);
    assert_eq!(build_cross_vocab(&t, &fields, 2, &BTreeMap::new()).unwrap().vocabulary.len(), 0);
    assert_eq!(build_cross_vocab(&t, &fields, 1, &BTreeMap::new()).unwrap().vocabulary.len(), 1);
}

#[test]
fn missing_fields_map_to_default_and_are_counted() {
    let mut t = sparse_table(&[("p", "q"), ("p", "q")]);
    t.push_row(vec![Value::Missing, cat("q")]).unwrap();
    let spec = build_cross_vocab(&t, &names(&["a", "b"]), 0, &BTreeMap::new()).unwrap();
    assert_eq!(spec.missing_rows, 1);
    let (ids, missing) = cross_ids(&t, &spec).unwrap();
    assert_eq!(ids, vec![1, 1, DEFAULT_ID]);
    assert_eq!(missing, 1);
}

#[test]
fn dense_fields_need_buckets() {
    let mut t = Table::new(names(&["d", "s"]), vec![ColumnKind::Dense, ColumnKind::Sparse]);
    for i in 0..20 {
        t.push_row(vec![Value::Number(f64::from(i)), cat(if i % 2 == 0 { "e" } else { "o" })]).unwrap();
    }
    let fields = names(&["d", "s"]);
    assert_eq!(build_cross_vocab(&t, &fields, 0, &BTreeMap::new()), Err(CrossError::MissingBuckets("d".into())));
    let (spec, _) = bucketize_dense("d", &t.numeric_column(0), 2);
    let buckets: BTreeMap<String, BucketSpec> = [("d".to_string(), spec)].into_iter().collect();
    let cross = build_cross_vocab(&t, &fields, 0, &buckets).unwrap();
    // Two halves × parity.
    assert_eq!(cross.vocabulary.len(), 4);
    assert!(cross.vocabulary.iter().all(|e| e.count == 5));
}

#[test]
fn crosses_need_two_distinct_known_fields() {
    let t = sparse_table(&[("p", "q")]);
    assert_eq!(build_cross_vocab(&t, &names(&["a"]), 0, &BTreeMap::new()), Err(CrossError::TooFewFields));
    assert_eq!(build_cross_vocab(&t, &names(&["a", "a"]), 0, &BTreeMap::new()), Err(CrossError::TooFewFields));
    assert_eq!(
        build_cross_vocab(&t, &names(&["a", "c"]), 0, &BTreeMap::new()),
        Err(CrossError::UnknownField("c".into()))
    );
}

#[test]
fn apply_appends_sparse_columns_and_reports() {
    let t = sparse_table(&[("p", "q"), ("p", "q"), ("r", "s")]);
    let spec = build_cross_vocab(&t, &names(&["a", "b"]), 1, &BTreeMap::new()).unwrap();
    let (out, report) = apply_crosses(&t, &[spec]).unwrap();
    assert_eq!(out.names.last().unwrap(), "cross__a__b");
    assert_eq!(out.kinds.last(), Some(&ColumnKind::Sparse));
    let col: Vec<&Value> = out.rows.iter().map(|r| r.last().unwrap()).collect();
    assert_eq!(col, vec![&cat("1"), &cat("1"), &cat("0")]);
    assert_eq!(report[0].cardinality, 2);
    assert_eq!(&out.rows[0][..2], &t.rows[0][..]);
}

#[test]
fn cardinality_report_saturates() {
    let t = sparse_table(&[("p", "q"), ("p", "r"), ("s", "q")]);
    let mut spec = build_cross_vocab(&t, &names(&["a", "b"]), 0, &BTreeMap::new()).unwrap();
    let r = &cardinality_report(core::slice::from_ref(&spec))[0];
    assert_eq!((r.theoretical, r.truncated), (4, 3));
    assert!((r.ratio - 0.75).abs() < 1e-12);
    spec.field_cardinalities = vec![u64::MAX; 3];
    assert_eq!(cardinality_report(&[spec])[0].theoretical, u128::MAX);
}

#[test]
fn partial_counts_merge_to_full_count() {
    let rows: Vec<(&str, &str)> = (0..50).map(|i| if i % 3 == 0 { ("a", "b") } else { ("c", "d") }).collect();
    let t = sparse_table(&rows);
    let fields = names(&["a", "b"]);
    let none = BTreeMap::new();
    let full = count_combinations(&t, &fields, &none, 0..50).unwrap();
    let merged = merge_counts(
        count_combinations(&t, &fields, &none, 0..17).unwrap(),
        count_combinations(&t, &fields, &none, 17..50).unwrap(),
    );
    assert_eq!(full, merged);
}

proptest! {
    #[test]
    fn vocab_ids_are_dense_and_ordered(cells in prop::collection::vec((0u8..4, 0u8..4), 1..200), t in 0u64..20) {
        let owned: Vec<(String, String)> = cells.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
        let rows: Vec<(&str, &str)> = owned.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
        let table = sparse_table(&rows);
        let spec = build_cross_vocab(&table, &names(&["a", "b"]), t, &BTreeMap::new()).unwrap();
        for (i, e) in spec.vocabulary.iter().enumerate() {
            prop_assert_eq!(e.id as usize, i + 1);
            prop_assert!(e.count > t);
        }
        prop_assert!(spec.vocabulary.windows(2).all(|w| w[0].count >= w[1].count));
        let (ids, _) = cross_ids(&table, &spec).unwrap();
        for e in &spec.vocabulary {
            prop_assert_eq!(ids.iter().filter(|&&id| id == e.id).count() as u64, e.count);
        }
    }
}
