use nalgebra::DMatrix;
use proptest::prelude::*;
use tls_cond::io::{load_problem, parse_csv, parse_matrix_market, save_problem, write_csv, write_matrix_market, ProblemFormat};
use tls_cond::report::{ReportDocument, ReportRow};
use tls_cond::TlsError;

fn arb_matrix() -> impl Strategy<Value = DMatrix<f64>> {
    (2usize..7, 2usize..5).prop_flat_map(|(m, c)| {
        let c = c.min(m);
        prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO, m * c)
            .prop_map(move |v| DMatrix::from_vec(m, c, v))
    })
}

fn bits(m: &DMatrix<f64>) -> Vec<u64> {
    m.iter().map(|v| v.to_bits()).collect()
}

proptest! {
    #[test]
    fn matrix_market_round_trip_is_bitwise(m in arb_matrix()) {
        let back = parse_matrix_market(&write_matrix_market(&m)).unwrap();
        prop_assert_eq!(back.shape(), m.shape());
        prop_assert_eq!(bits(&back), bits(&m));
    }

    #[test]
    fn csv_round_trip_is_bitwise(m in arb_matrix()) {
        let back = parse_csv(&write_csv(&m)).unwrap();
        prop_assert_eq!(bits(&back), bits(&m));
    }

    #[test]
    fn report_json_round_trip(values in prop::collection::vec(prop::option::of(-1e300f64..1e300), 1..6)) {
        let mut doc = ReportDocument::new();
        doc.set_meta("seed", 3);
        let mut row = ReportRow::new("r");
        for (i, v) in values.iter().enumerate() {
            row.push(&format!("c{i}"), *v);
        }
        doc.rows.push(row);
        prop_assert_eq!(ReportDocument::from_json(&doc.to_json().unwrap()).unwrap(), doc);
    }
}

#[test]
fn files_round_trip_in_both_formats() {
    let dir = tempfile::tempdir().unwrap();
    let p = tls_cond::generators::generate_ab_alpha(9, 3, 0.1, 4).unwrap();
    for (name, fmt) in [("p.mtx", ProblemFormat::MatrixMarket), ("p.csv", ProblemFormat::Csv)] {
        let path = dir.path().join(name);
        save_problem(&p, &path, fmt).unwrap();
        let back = load_problem(&path, fmt).unwrap();
        assert_eq!(bits(&back.augmented()), bits(&p.augmented()));
        assert_eq!(ProblemFormat::from_path(&path), fmt);
    }
}

#[test]
fn malformed_inputs_are_parse_errors() {
    assert!(matches!(parse_csv("1,2\n3\n"), Err(TlsError::Parse(_))));
    assert!(matches!(parse_csv("1,2\n3,nan\n"), Err(TlsError::Parse(_))));
    assert!(matches!(
        parse_matrix_market("%%MatrixMarket matrix array real general\n2 2\n1\n2\n3\n"),
        Err(TlsError::Parse(_))
    ));
}
