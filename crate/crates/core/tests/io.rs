mod common;

use einflow_core::flow::{flow_run, FlowConfig, FlowKind, Monitors};
use einflow_core::io::*;
use einflow_core::{FdOrder, GridChart, MetricField, OneFormField, ScalarField, SymTensorField};

#[test]
fn container_round_trips_bit_exactly() {
    let chart = GridChart::new(vec![8, 9, 10], vec![1.0 / 3.0, std::f64::consts::PI, 7.25], FdOrder::Sixth).unwrap();
    let mut r = common::rng(11);
    let g = common::metric(&chart, &mut r, 2, 0.2);
    let mut s = ScalarField::from_fn(&chart, |x| (x[0] * 1e-300).exp() * x[1].sin() / 3.0);
    s.values[3] = f64::NAN;
    s.values[4] = -0.0;
    s.values[5] = f64::MIN_POSITIVE / 8.0;
    let w = OneFormField::from_fn(&chart, |i, x| x[i].cos() + 0.1);
    let h = SymTensorField::from_fn(&chart, |i, j, x| (i + j) as f64 * x[2]);
    let dir = tempfile::tempdir().unwrap();
    for field in [FieldData::Metric(g), FieldData::Scalar(s), FieldData::OneForm(w), FieldData::SymTensor(h)] {
        let path = dir.path().join("f.bin");
        write_field(&path, &field).unwrap();
        let back = read_field(&path).unwrap();
        assert_eq!(encode(&back).unwrap(), encode(&field).unwrap());
        assert_eq!(back.chart(), field.chart());
        assert_eq!(back.kind(), field.kind());
    }
}

#[test]
fn container_rejects_damage() {
    let chart = GridChart::cube(2, 8, 1.0).unwrap();
    let bytes = encode(&FieldData::Metric(MetricField::flat(&chart))).unwrap();
    assert!(decode(&bytes[..bytes.len() - 1]).is_err());
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(decode(&bad).is_err());
    // A non-positive metric payload is refused on read.
    let mut zero = bytes.clone();
    let n = zero.len();
    for b in &mut zero[n - 8 * 64 * 3..] {
        *b = 0;
    }
    assert!(decode(&zero).is_err());
}

#[test]
fn csv_exports() {
    let chart = GridChart::cube(2, 8, 4.0).unwrap();
    let s = ScalarField::from_fn(&chart, |x| x[0] + 10.0 * x[1]);
    let mut buf = Vec::new();
    write_scalar_csv(&mut buf, &s).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x0,x1,value");
    assert_eq!(lines.len(), 65);
    assert_eq!(lines[2], "0,0.5,5");

    let mut cfg = FlowConfig::new(FlowKind::NegativeNormalized, 0.05);
    cfg.monitors = Monitors { every: 2, mu_plus: true, lambda: false };
    let tr = flow_run(&MetricField::flat(&chart), &cfg).unwrap();
    let mut buf = Vec::new();
    write_diagnostics_csv(&mut buf, &tr.diagnostics).unwrap();
    let back = read_diagnostics_csv(buf.as_slice()).unwrap();
    assert_eq!(back, tr.diagnostics);
    assert!(String::from_utf8(buf).unwrap().starts_with("step,time,dt,mu_plus,"));
}
