//! Subprocess-level CLI contract: exit codes, the machine-parsable error
//! line, and a small perturb/eval/report walkthrough.

use std::path::Path;
use std::process::Command;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use synthmotion::{synth_texture, TextureParams};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_alignpipe"))
}

fn write_sources(dir: &Path, n: usize) {
    std::fs::create_dir_all(dir).unwrap();
    for i in 0..n {
        let img = synth_texture(
            64,
            64,
            3,
            &TextureParams::default(),
            &mut ChaCha8Rng::seed_from_u64(100 + i as u64),
        );
        img.save(dir.join(format!("img{i:02}.png"))).unwrap();
    }
}

#[test]
fn missing_config_file_fails_with_error_line() {
    let out = bin()
        .args(["--config", "/nonexistent/p.toml", "report"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.lines().any(|l| l.starts_with("error: ")),
        "stderr was: {stderr}"
    );
}

#[test]
fn report_before_eval_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .current_dir(dir.path())
        .args(["report"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: "));
}

#[test]
fn perturb_then_eval_then_report_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("src");
    write_sources(&src, 10);
    let config = dir.path().join("cfg.toml");
    std::fs::write(
        &config,
        format!(
            "dataset_root = {:?}\nwork_dir = {:?}\nseed = 3\nk = 2\nflow_source = \"analytic_gt\"\n",
            src,
            dir.path().join("work")
        ),
    )
    .unwrap();

    for args in [
        vec!["perturb"],
        vec!["eval", "--split", "test"],
        vec!["report"],
    ] {
        let out = bin()
            .arg("--config")
            .arg(&config)
            .args(&args)
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "{args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }

    // Report prints an aggregate table with the variants.
    let out = bin()
        .arg("--config")
        .arg(&config)
        .arg("report")
        .output()
        .unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("unaligned"));
    assert!(stdout.contains("direct"));

    // Env var override redirects the dataset root and is reported.
    let out = bin()
        .arg("--config")
        .arg(&config)
        .arg("perturb")
        .env("ALIGNPIPE_DATA_ROOT", "/definitely/missing")
        .output()
        .unwrap();
    assert!(!out.status.success());
}
