//! CLI acceptance: every bundled config, run twice with the same seed, must
//! produce byte-identical `report.json`.

use std::path::{Path, PathBuf};
use std::process::Command;

fn configs() -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut out: Vec<PathBuf> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    out.sort();
    out
}

fn run(config: &Path, out: &Path) -> (i32, Vec<u8>) {
    let status = Command::new(env!("CARGO_BIN_EXE_envmm"))
        .args(["run", "--quiet", "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .status()
        .unwrap();
    (status.code().unwrap(), std::fs::read(out.join("report.json")).unwrap())
}

#[test]
fn ac12_cli_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let configs = configs();
    let mut mismatches = Vec::new();
    for cfg in &configs {
        let name = cfg.file_stem().unwrap().to_string_lossy().to_string();
        let (c1, r1) = run(cfg, &tmp.path().join(format!("{name}-1")));
        let (c2, r2) = run(cfg, &tmp.path().join(format!("{name}-2")));
        if c1 != c2 || r1 != r2 {
            mismatches.push(name);
        }
    }
    let passed = configs.len() == 6 && mismatches.is_empty();
    let tag = if passed { "PASS" } else { "FAIL" };
    println!(
        "[{tag}] AC12 CLI determinism: {} configs, mismatches {mismatches:?}",
        configs.len()
    );
    assert!(passed);
}
