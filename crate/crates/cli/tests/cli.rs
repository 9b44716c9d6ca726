use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use slr_bench::commands::{CellRecord, CHECKPOINT_FILE, RESULT_FILE, TEST_MANIFEST_FILE};

fn slr_bench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slr-bench")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = slr_bench(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn fails_with(args: &[&str], category: &str) -> String {
    let out = slr_bench(args);
    assert!(!out.status.success(), "{args:?} unexpectedly succeeded");
    let stderr = String::from_utf8_lossy(&out.stderr).into_owned();
    assert!(stderr.starts_with(&format!("error[{category}]")), "{stderr}");
    stderr
}

fn synth(dir: &Path, signers: usize) -> String {
    let data = dir.join(format!("synth{signers}"));
    let d = data.to_str().unwrap();
    ok(&["synth", "--classes", "3", "--signers", &signers.to_string(), "--per-class", "8", "--seed", "7", "--out", d]);
    data.to_str().unwrap().to_owned()
}

fn small_config(dir: &Path, data: &str) -> String {
    let path = dir.join("small.toml");
    let out = dir.join("runs");
    fs::write(
        &path,
        format!(
            "[data]\nroot = {data:?}\nname = \"synth\"\n\n\
             [model]\nconv_filters = 2\nlstm_units = 8\nlayers = 1\nheads = 2\nmodel_dim = 8\nffn_dim = 16\n\n\
             [train]\nepochs = 3\nbatch_size = 8\ncurriculum_epochs = [1, 2]\ncurriculum_lengths = [32, 48, 64]\nruns = 1\n\n\
             [run]\noutput = {:?}\n",
            out.to_str().unwrap()
        ),
    )
    .unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn synth_refuses_non_empty_directory_without_force() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), 5);
    let args = ["synth", "--classes", "3", "--signers", "5", "--per-class", "8", "--out", &data];
    fails_with(&args, "refused");
    let mut forced = args.to_vec();
    forced.push("--force");
    ok(&forced);
}

#[test]
fn crossval_with_too_few_signers_is_a_protocol_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), 4);
    let cfg = small_config(dir.path(), &data);
    fails_with(&["crossval", "--config", &cfg], "protocol");
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, "[train]\nepochz = 3\n").unwrap();
    fails_with(&["crossval", "--config", path.to_str().unwrap()], "config");
}

#[test]
fn eval_reproduces_the_logged_cell_and_refuses_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), 5);
    let cfg = small_config(dir.path(), &data);
    ok(&["train", "--config", &cfg, "--model", "convlstm", "--fold", "2"]);

    let cell = dir.path().join("runs/convlstm/2/42");
    let record: CellRecord = serde_json::from_str(&fs::read_to_string(cell.join(RESULT_FILE)).unwrap()).unwrap();
    let ck = cell.join(CHECKPOINT_FILE);
    let manifest = cell.join(TEST_MANIFEST_FILE);
    let csv = dir.path().join("eval.csv");
    let (ck, manifest, csv) = (ck.to_str().unwrap(), manifest.to_str().unwrap(), csv.to_str().unwrap());

    ok(&["eval", "--checkpoint", ck, "--manifest", manifest, "--k", "1", "--out", csv]);
    ok(&["eval", "--checkpoint", ck, "--manifest", manifest, "--k", "3", "--out", csv]);
    let text = fs::read_to_string(csv).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2);
    let top1: f64 = rows[0][5].parse().unwrap();
    let (k1, k3): (f64, f64) = (rows[0][7].parse().unwrap(), rows[1][7].parse().unwrap());
    assert_eq!(top1, record.result.top1);
    assert_eq!(k1, top1);
    assert!(k3 >= k1);
    assert_eq!(k3, 1.0);

    let mut bytes = fs::read(ck).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x40;
    fs::write(ck, bytes).unwrap();
    fails_with(&["eval", "--checkpoint", ck, "--manifest", manifest], "format");
}

#[test]
fn missing_dataset_names_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), dir.path().join("nowhere").to_str().unwrap());
    let err = fails_with(&["train", "--config", &cfg, "--model", "transformer", "--fold", "0"], "data");
    assert!(err.contains("manifest.json"), "{err}");
}
