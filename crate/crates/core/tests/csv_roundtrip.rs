use std::io::Write;

use mcox_core::data::{load_csv, write_csv, CovariatePathSpec, CsvSchema};

#[test]
fn file_roundtrip_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("in.csv");
    let mut f = std::fs::File::create(&path).unwrap();
    writeln!(f, "id,time,status,a,b").unwrap();
    writeln!(f, "1,0.5,1,0.25,-3").unwrap();
    writeln!(f, "2,1.5,0,,2").unwrap();
    writeln!(f, "3,0.1,1,1e-3,4.5").unwrap();
    drop(f);
    let mut schema = CsvSchema::new("time", "status", vec!["a".into(), "b".into()]);
    schema.path = "poly:1,2t,4t^2-2".parse::<CovariatePathSpec>().unwrap();
    let first = load_csv(&path, &schema).unwrap();
    assert_eq!(first.dropped_rows, 1);
    assert_eq!(first.dataset.p(), 6);

    let out = dir.path().join("out.csv");
    write_csv(&first.dataset, std::fs::File::create(&out).unwrap(), b',').unwrap();
    let second = load_csv(&out, &schema).unwrap();
    assert_eq!(second.dropped_rows, 0);
    assert_eq!(first.dataset, second.dataset);
}
