use std::fs;
use std::path::Path;

use microagg_bench::{emit_report, run_sweep, ReportFormat, SweepSpec};
use microagg_core::dataset::{save_table, synthesize, SynthSpec};
use microagg_core::Method;

const SCHEMA: &str = r#"{"attributes":[
    {"name":"id","role":"identifier"},
    {"name":"q1","role":"quasi_identifier"},
    {"name":"q2","role":"quasi_identifier"},
    {"name":"s","role":"confidential"}]}"#;

fn write_inputs(dir: &Path, n: usize) -> SweepSpec {
    let syn = synthesize(&SynthSpec {
        n,
        qid_blob_centers: vec![vec![0.0, 0.0], vec![30.0, 30.0]],
        conf_class_centers: vec![vec![0.0], vec![50.0]],
        noise_scale: 3.0,
        seed: 17,
    })
    .unwrap();
    let data = dir.join("people.csv");
    let mut text = String::from("id,q1,q2,s\n");
    let tmp = dir.join("raw.csv");
    save_table(&syn.data, &tmp).unwrap();
    for (i, line) in fs::read_to_string(&tmp)
        .unwrap()
        .lines()
        .skip(1)
        .enumerate()
    {
        text.push_str(&format!("{i},{line}\n"));
    }
    fs::write(&data, text).unwrap();
    let schema = dir.join("schema.json");
    fs::write(&schema, SCHEMA).unwrap();
    SweepSpec::from_json_str(&format!(
        r#"{{"dataset":{:?},"schema":{:?},"methods":["mdav"],"k_values":[2],"output_dir":{:?}}}"#,
        data,
        schema,
        dir.join("out")
    ))
    .unwrap()
}

#[test]
fn mdav_trend_over_k() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = write_inputs(dir.path(), 300);
    spec.k_values = vec![2, 5, 10, 20];
    let rows = run_sweep(&spec).unwrap();
    assert_eq!(rows.len(), 4);
    for w in rows.windows(2) {
        assert!(w[0].il.unwrap() <= w[1].il.unwrap());
        assert!(w[0].linked.unwrap() >= w[1].linked.unwrap());
    }
    for r in &rows {
        assert!(r.k_max.unwrap() >= r.k);
    }
}

#[test]
fn hybrid_rows_carry_structure() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = write_inputs(dir.path(), 120);
    spec.methods = vec![Method::HmPfsom, Method::Mdav];
    spec.k_values = vec![3];
    let rows = run_sweep(&spec).unwrap();
    let sub = rows[0].sub_structure.as_ref().expect("hybrid structure");
    assert_eq!(sub.cs.len(), sub.c);
    assert!(rows[1].sub_structure.is_none());
}

#[test]
fn reports_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = write_inputs(dir.path(), 150);
    spec.methods = vec![Method::Mdav, Method::HmPfsom, Method::SingleAxisPca];
    spec.k_values = vec![2, 4];
    spec.seed = 7;
    let strip = |mut rows: Vec<microagg_bench::ResultRow>| {
        rows.iter_mut().for_each(|r| r.wall_time_ms = 0.0);
        rows
    };
    let a = strip(run_sweep(&spec).unwrap());
    let b = strip(run_sweep(&spec).unwrap());
    let pa = emit_report(&a, "a", &spec.output_dir, ReportFormat::Json, false).unwrap();
    let pb = emit_report(&b, "b", &spec.output_dir, ReportFormat::Json, false).unwrap();
    assert_eq!(fs::read(pa).unwrap(), fs::read(pb).unwrap());
}

#[test]
fn missing_dataset_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = write_inputs(dir.path(), 20);
    spec.dataset = dir.path().join("absent.csv");
    assert!(run_sweep(&spec).is_err());
}
