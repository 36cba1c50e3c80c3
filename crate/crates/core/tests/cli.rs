use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use parityscope::cli::RunManifest;
use parityscope::sim::ParityTrace;
use parityscope::spectral::toggle_transform;
use serde_json::{json, Value};

fn parityscope(args: &[&str], config: Option<&Value>, dir: &Path) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_parityscope"));
    if let Some(doc) = config {
        let path = dir.join("config.json");
        fs::write(&path, serde_json::to_vec_pretty(doc).unwrap()).unwrap();
        cmd.arg("--config").arg(path);
    }
    cmd.args(args).env("PARITYSCOPE_THREADS", "2").output().unwrap()
}

fn manifest(dir: &Path) -> RunManifest {
    serde_json::from_slice(&fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

fn simulate_doc(gamma0: f64) -> Value {
    json!({
        "command": "simulate",
        "parameters": { "sim": { "gamma0": gamma0, "n_shots": 2000 }, "n_traces": 2 },
    })
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let out = out.to_str().unwrap();

    let ok = parityscope(&["report", "--out", out], None, tmp.path());
    assert_eq!(
        ok.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&ok.stderr)
    );

    assert_eq!(
        parityscope(&["transmogrify", "--out", out], None, tmp.path())
            .status
            .code(),
        Some(2)
    );
    // A simulation without a seed is a configuration error.
    let unseeded = parityscope(&["--out", out], Some(&simulate_doc(100.0)), tmp.path());
    assert_eq!(unseeded.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&unseeded.stderr).contains("seed"));

    let bad = json!({ "command": "simulate", "parameters": { "sim": { "gamma0": "fast", "n_shots": 10 } } });
    let r = parityscope(&["--out", out, "--seed", "1"], Some(&bad), tmp.path());
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("parameters.sim.gamma0"));

    let threads = Command::new(env!("CARGO_BIN_EXE_parityscope"))
        .args(["report", "--out", out])
        .env("PARITYSCOPE_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(threads.status.code(), Some(2));

    let missing = json!({ "command": "report", "parameters": { "input": tmp.path().join("nope.csv") } });
    assert_eq!(
        parityscope(&["--out", out], Some(&missing), tmp.path())
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn seeded_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let doc = json!({
        "command": "analyze",
        "parameters": {
            "sim": { "gamma0": 2000.0, "readout_error": 0.02, "t1": 2e-5, "t2": 1e-5, "n_shots": 65536 },
            "n_traces": 3,
        },
    });
    let runs: Vec<_> = ["a", "b"]
        .iter()
        .map(|name| {
            let dir = tmp.path().join(name);
            let r = parityscope(
                &["--out", dir.to_str().unwrap(), "--seed", "11"],
                Some(&doc),
                tmp.path(),
            );
            assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
            dir
        })
        .collect();
    let (a, b) = (manifest(&runs[0]), manifest(&runs[1]));
    assert_eq!(a.results_hash, b.results_hash);
    assert_eq!(a.config_hash, b.config_hash);
    for entry in a.files.iter().filter(|e| !e.plot) {
        let x = fs::read(runs[0].join(&entry.path)).unwrap();
        let y = fs::read(runs[1].join(&entry.path)).unwrap();
        assert!(x == y, "{} differs", entry.path);
    }

    let other = tmp.path().join("c");
    parityscope(
        &["--out", other.to_str().unwrap(), "--seed", "12"],
        Some(&doc),
        tmp.path(),
    );
    assert_ne!(manifest(&other).results_hash, a.results_hash);
}

#[test]
fn quiet_trace_toggles_every_shot() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("sim");
    let r = parityscope(
        &["--out", dir.to_str().unwrap(), "--seed", "3"],
        Some(&simulate_doc(0.0)),
        tmp.path(),
    );
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    for i in 0..2 {
        let file = fs::File::open(dir.join(format!("trace_{i:03}.ptrc"))).unwrap();
        let trace = ParityTrace::read_binary(file).unwrap();
        assert_eq!(trace.len(), 2000);
        let d = toggle_transform(&trace).unwrap();
        assert!(d.d.iter().all(|&v| v == 1));
    }
    let m = manifest(&dir);
    assert!(m.files.iter().any(|e| e.plot && e.path.ends_with(".svg")));
}

#[test]
fn csv_format_writes_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("csv");
    let r = parityscope(
        &[
            "simulate",
            "--out",
            dir.to_str().unwrap(),
            "--seed",
            "3",
            "--format",
            "csv",
            "--no-plots",
        ],
        Some(&simulate_doc(500.0)),
        tmp.path(),
    );
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(dir.join("trace_000.csv").exists());
    assert!(manifest(&dir).files.iter().all(|e| !e.plot));
}

#[test]
fn report_reproduces_configuration_table() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("report");
    let r = parityscope(&["report", "--out", dir.to_str().unwrap()], None, tmp.path());
    assert_eq!(r.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&r.stdout);
    assert!(stdout.contains("Foam + filter"), "{stdout}");

    let report: Value = serde_json::from_slice(&fs::read(dir.join("report.json")).unwrap()).unwrap();
    let find = |key: &str, material: &str, conf: &str| -> Value {
        report[key]
            .as_array()
            .unwrap()
            .iter()
            .find(|x| x["material"] == material && x["configuration"] == conf)
            .cloned()
            .unwrap()
    };
    let mean = |m, c| find("summaries", m, c)["mean_rate"].as_f64().unwrap();
    assert!((mean("Ta", "No filter") / 1e4 - 1.60).abs() < 0.006);
    assert!((mean("Nb", "Foam") / 1e2 - 0.98).abs() < 0.006);
    assert!((mean("Ta", "Inside shield") / 1e2 - 6.91).abs() < 0.006);
    let factor = |m, c| find("reductions", m, c)["factor"].as_f64().unwrap();
    assert!((factor("Ta", "Inside shield") - 23.2).abs() < 0.1);
    assert!((factor("Nb", "Foam") - 6.8).abs() < 0.1);
}

#[test]
fn ingest_and_physics_commands() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("ingest");
    let r = parityscope(
        &["ingest", "--out", dir.to_str().unwrap(), "--format", "csv"],
        None,
        tmp.path(),
    );
    assert_eq!(r.status.code(), Some(0));
    let csv = fs::read_to_string(dir.join("records.csv")).unwrap();
    assert!(csv.lines().count() > 30);

    // Round trip: the written records ingest again.
    let again = json!({ "command": "ingest", "parameters": { "input": dir.join("records.csv") } });
    let dir2 = tmp.path().join("again");
    let r = parityscope(&["--out", dir2.to_str().unwrap()], Some(&again), tmp.path());
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let summary: Value = serde_json::from_slice(&fs::read(dir2.join("ingest.json")).unwrap()).unwrap();
    assert_eq!(
        summary["n_records"].as_u64().unwrap() as usize,
        csv.lines().count() - 1
    );

    let physics = json!({
        "command": "physics",
        "parameters": {
            "qp": { "s": 1.0, "r": 0.0, "eps": 1.0, "area": 1e-6, "gtilde": 2e-10 },
            "k_tunnel": 1e10,
            "base_rate": 500.0,
            "powers_w": [1e-9, 2e-9, 4e-9],
        },
    });
    let dir3 = tmp.path().join("physics");
    let r = parityscope(&["--out", dir3.to_str().unwrap()], Some(&physics), tmp.path());
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(dir3.join("physics_summary.json").exists());
}
