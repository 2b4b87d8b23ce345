use std::path::Path;
use std::process::{Command, Output};

fn lwejscc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lwejscc"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn lwejscc")
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

const SMALL: &str = "\
[codec]
height = 8
width = 8
[dataset]
count = 4
[modem]
snr_db = [0, 20]
[game]
trials = 100
samples_per_hypothesis = 8
classifier_epochs = 5
[attack]
models = [\"mean_predictor\", \"linear\"]
train_pairs = 200
test_pairs = 50
";

#[test]
fn keygen_files_feed_sweep() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.toml", SMALL);
    let out = lwejscc(dir.path(), &["keygen", "--params", "c.toml", "--out", "pub.toml", "sec.toml"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let public = std::fs::read_to_string(dir.path().join("pub.toml")).unwrap();
    assert!(!public.contains("key_seed"));

    let a = lwejscc(dir.path(), &["sweep", "--config", "c.toml", "--keys", "pub.toml", "sec.toml", "--out", "a.csv"]);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    // Files hold the same keys the seeds generate.
    let b = lwejscc(dir.path(), &["sweep", "--config", "c.toml", "--out", "b.csv"]);
    assert!(b.status.success());
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("b.csv")).unwrap());
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("#schema=lwejscc-sweep/1\n"));
    assert_eq!(text.lines().filter(|l| l.starts_with("record,")).count(), 8);
    assert_eq!(text.lines().filter(|l| l.starts_with("aggregate,")).count(), 2);
}

#[test]
fn mismatched_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.toml", SMALL);
    write(dir.path(), "other.toml", "[lwe]\nk = 32\n");
    assert!(lwejscc(dir.path(), &["keygen", "--params", "other.toml", "--out", "p.toml", "s.toml"])
        .status
        .success());
    let out = lwejscc(dir.path(), &["sweep", "--config", "c.toml", "--keys", "p.toml", "s.toml"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("do not match"));
}

#[test]
fn empty_dataset_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.toml", &SMALL.replace("count = 4", "count = 0"));
    let out = lwejscc(dir.path(), &["sweep", "--config", "c.toml", "--out", "e.csv"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("e.csv")).unwrap();
    assert_eq!(text.lines().count(), 2, "{text}");
}

#[test]
fn transmit_saves_reconstructions() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.toml", SMALL);
    let out = lwejscc(dir.path(), &["transmit", "--config", "c.toml", "--in", "synthetic", "--out", "t.csv", "--save", "rec"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_dir(dir.path().join("rec")).unwrap().count(), 8);
}

#[test]
fn security_commands_detect_their_sabotage_controls() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.toml", &format!("{SMALL}[lwe]\nn1 = 32\nn2 = 32\nk = 64\n"));
    let game = lwejscc(dir.path(), &["indcpa", "--config", "c.toml", "--out", "g.csv"]);
    assert!(game.status.success(), "{}", String::from_utf8_lossy(&game.stderr));
    assert!(String::from_utf8_lossy(&game.stdout).contains("sabotage control detected"));
    let attack = lwejscc(dir.path(), &["attack", "--config", "c.toml", "--out", "a.csv"]);
    assert!(attack.status.success(), "{}", String::from_utf8_lossy(&attack.stderr));
    let csv = std::fs::read_to_string(dir.path().join("a.csv")).unwrap();
    assert!(csv.contains("reused"));
}

#[test]
fn train_then_sweep_with_saved_codec() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "\
[lwe]
k = 16
[codec]
kind = \"linear\"
height = 8
width = 8
k = 16
[dataset]
count = 12
[train]
validation = 4
max_steps = 20
[modem]
snr_db = [10]
";
    write(dir.path(), "t.toml", cfg);
    let out = lwejscc(dir.path(), &["train", "--config", "t.toml", "--out", "codec.toml", "--log", "log.csv"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(std::fs::read_to_string(dir.path().join("log.csv")).unwrap().starts_with("#schema=lwejscc-train/1"));
    write(dir.path(), "s.toml", &cfg.replace("[codec]\n", "[codec]\nparams = \"codec.toml\"\n"));
    let out = lwejscc(dir.path(), &["sweep", "--config", "s.toml", "--out", "s.csv"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn bad_inputs_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "bad.toml", "[lwe]\nbogus = 1\n");
    let out = lwejscc(dir.path(), &["sweep", "--config", "bad.toml"]);
    assert_eq!(out.status.code(), Some(1));
    let out = lwejscc(dir.path(), &["sweep", "--config", "missing.toml"]);
    assert_eq!(out.status.code(), Some(1));
    write(dir.path(), "id.toml", "[codec]\nheight = 8\nwidth = 8\n");
    let out = lwejscc(dir.path(), &["train", "--config", "id.toml", "--out", "x.toml"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("no parameters to train"));
}
