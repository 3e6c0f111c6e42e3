use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use qmoo_core::campaign::{read_records, InstanceFile, OracleFile};

fn qmoo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qmoo"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = qmoo(args);
    assert!(
        out.status.success(),
        "qmoo {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn jsonl_files(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "jsonl"))
        .collect();
    v.sort();
    v
}

#[test]
fn gen_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    ok(&["gen", "--class", "II", "--d", "5", "--n", "6", "--seed", "0", "--out", s(&a)]);
    ok(&["gen", "--class", "II", "--d", "5", "--n", "6", "--seed", "0", "--out", s(&b)]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn gen_rejects_short_class_five_chain() {
    let dir = tempfile::tempdir().unwrap();
    let out = qmoo(&["gen", "--class", "V", "--d", "3", "--n", "3", "--out", s(&dir.path().join("x.json"))]);
    assert!(!out.status.success());
    assert!(!dir.path().join("x.json").exists());
}

#[test]
fn gen_and_oracle_class_one() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst.json");
    let orc = dir.path().join("oracle.json");
    ok(&["gen", "--class", "I", "--d", "2", "--n", "13", "--seed", "3", "--out", s(&inst)]);
    let file = InstanceFile::read(&inst).unwrap();
    assert_eq!(file.k, 2);
    let text = fs::read_to_string(&inst).unwrap();
    assert!(text.contains("\"k\": 2"));
    ok(&["oracle", s(&inst), "--out", s(&orc), "--scatter"]);
    let oracle = OracleFile::read(&orc).unwrap();
    assert!(oracle.front_hv > 0.0);
    assert_eq!(oracle.scatter.unwrap().len(), 1 << 13);
}

#[test]
fn run_writes_one_record_per_run_and_reproduces() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &str| {
        vec![
            "run", "--class", "III", "--d", "3", "--n", "3", "--seeds", "4", "--runs", "2", "--shots", "64",
            "--iterations", "3", "--out", out,
        ]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>()
    };
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let run = |out: &Path| {
        let v = args(s(out));
        ok(&v.iter().map(String::as_str).collect::<Vec<_>>());
    };
    run(&a);
    run(&b);
    let fa = jsonl_files(&a);
    let fb = jsonl_files(&b);
    assert_eq!(fa.len(), 2);
    for (x, y) in fa.iter().zip(&fb) {
        assert_eq!(x.file_name(), y.file_name());
        assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap());
    }
    assert!(a.join("campaign.json").exists());
}

#[test]
fn baseline_defaults_and_trace_length() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("base");
    ok(&["baseline", "--class", "II", "--d", "2", "--n", "5", "--seeds", "0", "--runs", "2", "--out", s(&out)]);
    let records = read_records(&format!("{}/*.jsonl", s(&out))).unwrap();
    assert_eq!(records.len(), 2);
    for r in &records {
        let moea = r.header.moea.as_ref().unwrap();
        assert_eq!((moea.population, moea.iterations), (20, 200));
        assert_eq!(r.rows.len(), 200);
    }
}

#[test]
fn report_tables_from_glob() {
    let dir = tempfile::tempdir().unwrap();
    let runs = dir.path().join("runs");
    let rep = dir.path().join("report");
    ok(&[
        "run", "--class", "I", "--d", "2", "--n", "4", "--seeds", "0", "--runs", "1", "--shots", "exact",
        "--iterations", "2", "--out", s(&runs),
    ]);
    let out = ok(&["report", &format!("{}/*.jsonl", s(&runs)), "--out", s(&rep)]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("median"));
    let record = &read_records(&format!("{}/*.jsonl", s(&runs))).unwrap()[0];
    let table = fs::read_to_string(rep.join("trace_quantiles.csv")).unwrap();
    let rows: Vec<&str> = table.lines().skip(1).collect();
    assert_eq!(rows.len(), record.rows.len());
    for (line, row) in rows.iter().zip(&record.rows) {
        let cols: Vec<&str> = line.split(',').collect();
        let q: Vec<f64> = cols[8..11].iter().map(|c| c.parse().unwrap()).collect();
        assert_eq!(q, vec![row.normalized_hv; 3]);
    }
    assert!(rep.join("final_values.csv").exists());
    assert!(rep.join("final_summary.csv").exists());

    let missing = qmoo(&["report", &format!("{}/*.jsonl", s(&rep)), "--out", s(&rep)]);
    assert!(!missing.status.success());
}
