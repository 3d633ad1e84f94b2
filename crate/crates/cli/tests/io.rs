use std::path::Path;

use blocksig::io::{load_labels, load_matrix, parse_csv, save_binary, save_csv, LoadOptions, NanPolicy};
use blocksig::CliError;
use blocksig_core::{DataMatrix, GridShape};

fn parse(text: &str, opts: &LoadOptions) -> blocksig::Result<DataMatrix> {
    parse_csv(text.as_bytes(), Path::new("mem.csv"), opts)
}

#[test]
fn small_csv() {
    let x = parse("1,2,3\n4,5,6", &LoadOptions::default()).unwrap();
    assert_eq!((x.n(), x.p()), (2, 3));
    assert_eq!(x.as_slice(), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
}

#[test]
fn missing_cell_location() {
    let err = parse("1,NA,3\n4,5,6\n", &LoadOptions::default()).unwrap_err();
    match &err {
        CliError::Parse { row, col, .. } => assert_eq!((*row, *col), (1, 2)),
        other => panic!("{other:?}"),
    }
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn header_shifts_rows() {
    let opts = LoadOptions { header: true, ..Default::default() };
    let err = parse("a,b\n1,2\n3,x\n", &opts).unwrap_err();
    assert!(matches!(err, CliError::Parse { row: 3, col: 2, .. }), "{err:?}");
}

#[test]
fn ragged_and_garbage_rejected() {
    let err = parse("1,2\n3\n", &LoadOptions::default()).unwrap_err();
    assert!(matches!(err, CliError::Parse { row: 2, .. }));
    let err = parse("1,2\n3,4e\n", &LoadOptions::default()).unwrap_err();
    assert!(matches!(err, CliError::Parse { row: 2, col: 2, .. }));
    assert!(parse("", &LoadOptions::default()).is_err());
}

#[test]
fn missing_value_policies() {
    let text = "1,NA\n3,4\nNaN,8\n";
    let zero = LoadOptions { nan: NanPolicy::Zero, ..Default::default() };
    assert_eq!(parse(text, &zero).unwrap().as_slice(), &[1.0, 0.0, 3.0, 4.0, 0.0, 8.0]);
    let mean = LoadOptions { nan: NanPolicy::ColumnMean, ..Default::default() };
    assert_eq!(parse(text, &mean).unwrap().as_slice(), &[1.0, 6.0, 3.0, 4.0, 2.0, 8.0]);
}

fn awkward() -> DataMatrix {
    let v = vec![0.1, -1e-300, 1.0 / 3.0, 6.02e23, -0.0, f64::MIN_POSITIVE, 12345.678, 2.0f64.sqrt()];
    DataMatrix::new(2, 4, v).unwrap().with_grid(GridShape::new(2, 2)).unwrap()
}

fn same_bits(a: &DataMatrix, b: &DataMatrix) -> bool {
    a.as_slice().iter().zip(b.as_slice()).all(|(x, y)| x.to_bits() == y.to_bits())
}

#[test]
fn csv_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.csv");
    let x = awkward();
    save_csv(&x, &path).unwrap();
    let opts = LoadOptions { grid: x.grid(), ..Default::default() };
    let y = load_matrix(&path, &opts).unwrap();
    assert!(same_bits(&x, &y));
    assert_eq!(y.grid(), x.grid());
}

#[test]
fn binary_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.bin");
    let x = awkward();
    save_binary(&x, &path).unwrap();
    let y = load_matrix(&path, &LoadOptions::default()).unwrap();
    assert!(same_bits(&x, &y));
    assert_eq!(y.grid(), Some(GridShape::new(2, 2)));

    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
    assert!(load_matrix(&path, &LoadOptions::default()).is_err());
}

#[test]
fn grid_must_match() {
    let opts = LoadOptions { grid: Some(GridShape::new(2, 2)), ..Default::default() };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.csv");
    std::fs::write(&path, "1,2,3\n").unwrap();
    assert_eq!(load_matrix(&path, &opts).unwrap_err().exit_code(), 2);
}

#[test]
fn missing_file_is_io() {
    let err = load_matrix(Path::new("/nonexistent/x.csv"), &LoadOptions::default()).unwrap_err();
    assert_eq!(err.exit_code(), 5);
}

#[test]
fn label_files() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    std::fs::write(&a, r#"{"schema_version": 1, "labels": [1, -1, 1]}"#).unwrap();
    assert_eq!(load_labels(&a).unwrap().as_slice(), &[1, -1, 1]);
    let b = dir.path().join("b.txt");
    std::fs::write(&b, "1\n-1\n-1\n").unwrap();
    assert_eq!(load_labels(&b).unwrap().as_slice(), &[1, -1, -1]);
    std::fs::write(&b, "1\n0\n").unwrap();
    assert!(load_labels(&b).is_err());
}
