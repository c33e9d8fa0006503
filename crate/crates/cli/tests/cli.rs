use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn dvfs(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dvfs"))
        .current_dir(dir)
        .args(args)
        .env_remove("DVFS_L")
        .output()
        .expect("spawn dvfs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn setup_ingest_search_verify() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    assert!(dvfs(dir, &["setup", "--dir", "data", "--height", "6"]).status.success());
    assert!(!dvfs(dir, &["setup", "--dir", "data"]).status.success(), "refuses to overwrite");

    fs::create_dir(dir.join("docs")).unwrap();
    fs::write(dir.join("docs/a.txt"), "Routers forward network packets").unwrap();
    fs::write(dir.join("docs/b.txt"), "Network storage in the cloud").unwrap();
    fs::write(dir.join("docs/c.txt"), "Gardening with tomatoes").unwrap();
    let out = dvfs(dir, &["ingest", "docs"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("indexed 3 documents"));

    let out = dvfs(dir, &["search", "networks", "--save", "saved"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("results (2)"), "{text}");
    assert!(text.contains("verdict=1"));

    let out = dvfs(dir, &["verify", "--transcript", "saved/transcript.txt", "--docs", "saved"]);
    assert!(out.status.success(), "{}", stdout(&out));

    // A tampered ciphertext is rejected with a non-zero exit.
    let ct = dir.join("saved/0.ct");
    let mut body = fs::read(&ct).unwrap();
    body[0] ^= 1;
    fs::write(&ct, body).unwrap();
    let out = dvfs(dir, &["verify", "--transcript", "saved/transcript.txt", "--docs", "saved"]);
    assert!(!out.status.success());
    assert!(stdout(&out).contains("failure=digest-mismatch"));

    assert!(dvfs(dir, &["del", "0", "network"]).status.success());
    let text = stdout(&dvfs(dir, &["search", "network"]));
    assert!(text.contains("results (1)"), "{text}");

    let out = dvfs(dir, &["ledger", "validate"]);
    assert!(out.status.success());
    let text = stdout(&dvfs(dir, &["index", "stats"]));
    assert!(text.contains("n (documents)     3"), "{text}");
    assert!(stdout(&dvfs(dir, &["repo", "show", "network"])).contains("queried  true"));
}

#[test]
fn corrupted_ledger_fails_validation() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    assert!(dvfs(dir, &["setup", "--dir", "data", "--height", "4"]).status.success());
    fs::write(dir.join("doc.txt"), "encrypted search").unwrap();
    assert!(dvfs(dir, &["add", "doc.txt", "--id", "3"]).status.success());
    let ledger = dir.join("data/ledger.log");
    let mut bytes = fs::read(&ledger).unwrap();
    let i = bytes.len() / 2;
    bytes[i] ^= 0x20;
    fs::write(&ledger, bytes).unwrap();
    let out = dvfs(dir, &["ledger", "validate"]);
    assert!(!out.status.success());
    assert!(stdout(&out).contains("INVALID"));
}

#[test]
fn adversary_modes_and_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    for mode in ["none", "tamper-doc", "drop-result", "stale-doc"] {
        let out = dvfs(dir, &["adversary", mode, "--docs", "12", "--seed", "3"]);
        assert!(out.status.success(), "{mode}: {}", stdout(&out));
    }
    let out = dvfs(dir, &["adversary", "replay"]);
    assert_eq!(out.status.code(), Some(2));
    let out = dvfs(dir, &["search", "x"]);
    assert_eq!(out.status.code(), Some(2), "no configuration yet");
}
