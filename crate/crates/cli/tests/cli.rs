use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn mpsqd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mpsqd")).args(args).output().unwrap()
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn sample_sqd_extsqd_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let fcidump = data("hubbard4_u4.fcidump");
    let fcidump = fcidump.to_str().unwrap();
    let fci: serde_json::Value = serde_json::from_str(&stdout(&mpsqd(&["fci", fcidump]))).unwrap();
    let exact = fci["energy"].as_f64().unwrap();

    let samples = dir.path().join("samples.json");
    let trace = dir.path().join("trace.json");
    stdout(&mpsqd(&["sample", fcidump, "--shots", "5000", "--seed", "3", "--out", samples.to_str().unwrap()]));
    stdout(&mpsqd(&[
        "sqd",
        "--samples",
        samples.to_str().unwrap(),
        "--fcidump",
        fcidump,
        "--batch-size",
        "30",
        "--out",
        trace.to_str().unwrap(),
    ]));
    let saved: serde_json::Value = serde_json::from_str(&fs::read_to_string(&trace).unwrap()).unwrap();
    assert!(saved["e_last"].as_f64().unwrap() >= exact - 1e-10);

    let ext: serde_json::Value =
        serde_json::from_str(&stdout(&mpsqd(&["extsqd", "--trace", trace.to_str().unwrap(), "--fcidump", fcidump])))
            .unwrap();
    assert_eq!(ext["energy"].as_f64().unwrap(), saved["e_ext"].as_f64().unwrap());
}

#[test]
fn exit_codes_distinguish_input_and_plan_errors() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.fcidump");
    fs::write(&bad, "&FCI NORB=2,NELEC=2,MS2=0,\n&END\nnope 1 1 1 1\n").unwrap();
    let out = mpsqd(&["parse", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    assert_eq!(mpsqd(&["fci", "does-not-exist.fcidump"]).status.code(), Some(2));

    let plan = dir.path().join("plan.json");
    stdout(&mpsqd(&["plan", "--buffer", "2", "--out", plan.to_str().unwrap()]));
    assert_eq!(mpsqd(&["plan", "--validate", plan.to_str().unwrap(), "--buffer", "2"]).status.code(), Some(0));

    let mut doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&plan).unwrap()).unwrap();
    doc["min_buffer"] = serde_json::json!(5);
    fs::write(&plan, doc.to_string()).unwrap();
    assert_eq!(mpsqd(&["plan", "--validate", plan.to_str().unwrap()]).status.code(), Some(4));
}

#[test]
fn rbd_output_does_not_depend_on_threads() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("rbd.toml");
    let text = format!(
        "replicates = 2\nseed = 31\nshots = 3000\n\n[sqd]\nn_batches = 4\nbatch_size = 15\nmax_iterations = 3\n\n\
         [[molecules]]\nlabel = \"a\"\nfcidump = {:?}\n\n[[molecules]]\nlabel = \"b\"\nfcidump = {:?}\n\n\
         [[plans]]\nid = \"b1\"\nbundled = 1\n\n[[plans]]\nid = \"b3\"\nbundled = 3\n",
        data("hubbard4_u4.fcidump"),
        data("hubbard4_u6.fcidump"),
    );
    fs::write(&spec, text).unwrap();
    let mut outputs = Vec::new();
    for threads in ["1", "2"] {
        let out = dir.path().join(threads);
        stdout(&mpsqd(&["--threads", threads, "rbd", spec.to_str().unwrap(), "--out", out.to_str().unwrap()]));
        let records = fs::read_to_string(out.join("records.csv")).unwrap();
        assert_eq!(records.lines().count(), 1 + 2 * 2 * 2 * 2);
        assert!(out.join("summary.json").exists());
        outputs.push((records, fs::read_to_string(out.join("summary.csv")).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
}
