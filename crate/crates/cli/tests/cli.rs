use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn smoke() -> String {
    concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/smoke.toml").to_string()
}

fn cli(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_distill-lab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("DISTILL_LAB_OUT")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], out: &Path) -> Output {
    let o = cli(args, out);
    assert!(
        o.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    o
}

/// The single run directory for `sub` under `out`.
fn run_dir(out: &Path, sub: &str) -> PathBuf {
    let dirs: Vec<PathBuf> = std::fs::read_dir(out)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| {
            p.file_name()
                .unwrap()
                .to_string_lossy()
                .starts_with(&format!("{sub}-"))
        })
        .collect();
    assert_eq!(dirs.len(), 1, "{dirs:?}");
    dirs.into_iter().next().unwrap()
}

#[test]
fn distill_is_bit_reproducible() {
    let c = smoke();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    ok(&["distill", "--config", &c], a.path());
    ok(&["distill", "--config", &c], b.path());
    let (da, db) = (run_dir(a.path(), "distill"), run_dir(b.path(), "distill"));
    assert_eq!(da.file_name(), db.file_name());
    for f in [
        "generator.ckpt",
        "distill_log.csv",
        "pretrained.ckpt",
        "config.toml",
    ] {
        let x = std::fs::read(da.join(f)).unwrap();
        assert!(!x.is_empty(), "{f}");
        assert_eq!(x, std::fs::read(db.join(f)).unwrap(), "{f}");
    }
    // checkpoint_every = 5 over 10 steps
    let mut ckpts: Vec<String> = std::fs::read_dir(da.join("checkpoints"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    ckpts.sort();
    assert_eq!(ckpts, ["step-000005.ckpt", "step-000010.ckpt"]);
    let run: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(da.join("run.json")).unwrap()).unwrap();
    assert_eq!(run["subcommand"], "distill");
}

#[test]
fn generate_writes_dpc_lines_per_class() {
    let c = smoke();
    let out = tempfile::tempdir().unwrap();
    ok(&["distill", "--config", &c], out.path());
    let ckpt = run_dir(out.path(), "distill").join("generator.ckpt");
    ok(
        &[
            "generate",
            "--config",
            &c,
            "--dpc",
            "5",
            "--checkpoint",
            ckpt.to_str().unwrap(),
        ],
        out.path(),
    );
    let dir = run_dir(out.path(), "generate");
    let text = std::fs::read_to_string(dir.join("distilled.jsonl")).unwrap();
    let lines: Vec<serde_json::Value> = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    // provenance header, then 5 samples for each of the 2 classes
    assert_eq!(lines.len(), 1 + 5 * 2);
    assert_eq!(lines[0]["provenance"]["dpc"], 5);
    for l in &lines[1..] {
        assert!(l["text"].is_string(), "{l}");
        assert_eq!(l["synthetic"], true);
    }
    assert!(dir.join("samples.md").exists());
}

#[test]
fn evaluate_and_report_render_tables() {
    let c = smoke();
    let out = tempfile::tempdir().unwrap();
    ok(
        &[
            "evaluate",
            "--config",
            &c,
            "--methods",
            "random,kcenters,dilm",
        ],
        out.path(),
    );
    let dir = run_dir(out.path(), "evaluate");
    let md = std::fs::read_to_string(dir.join("report.md")).unwrap();
    assert!(md.contains('±'));
    assert!(md.contains("`*`"));
    for m in ["random", "kcenters", "dilm"] {
        assert!(md.contains(&format!("| {m} |")), "{m}");
    }
    assert!(dir.join("report.csv").exists());
    assert!(dir.join("reports.json").exists());

    std::fs::remove_file(dir.join("report.md")).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_distill-lab"))
        .args(["report", "--run"])
        .arg(&dir)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read_to_string(dir.join("report.md")).unwrap(), md);
}

#[test]
fn baseline_writes_selected_sets() {
    let c = smoke();
    let out = tempfile::tempdir().unwrap();
    ok(
        &[
            "baseline",
            "--config",
            &c,
            "--methods",
            "herding",
            "--dpc",
            "3",
        ],
        out.path(),
    );
    let dir = run_dir(out.path(), "baseline");
    let text = std::fs::read_to_string(dir.join("herding/dataset-00.jsonl")).unwrap();
    // provenance header, then dpc lines per class
    assert_eq!(text.lines().count(), 1 + 3 * 2);
    assert!(text
        .lines()
        .next()
        .unwrap()
        .contains("\"method\":\"herding\""));
    assert!(dir.join("selections.json").exists());
}

#[test]
fn different_flags_get_different_run_dirs() {
    let c = smoke();
    let out = tempfile::tempdir().unwrap();
    ok(
        &[
            "baseline",
            "--config",
            &c,
            "--methods",
            "random",
            "--dpc",
            "1",
        ],
        out.path(),
    );
    ok(
        &[
            "baseline",
            "--config",
            &c,
            "--methods",
            "random",
            "--dpc",
            "2",
        ],
        out.path(),
    );
    let n = std::fs::read_dir(out.path()).unwrap().count();
    assert_eq!(n, 2);
}

#[test]
fn usage_errors_exit_2() {
    let out = tempfile::tempdir().unwrap();
    let o = cli(&["frobnicate"], out.path());
    assert_eq!(o.status.code(), Some(2));
    let o = cli(
        &["pretrain", "--config", &smoke(), "--set", "bogus.key=1"],
        out.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    let err: serde_json::Value =
        serde_json::from_str(String::from_utf8_lossy(&o.stderr).trim()).unwrap();
    assert_eq!(err["kind"], "usage");
    let o = cli(&["pretrain", "--config", "/no/such/file.toml"], out.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_1_and_leave_a_record() {
    let out = tempfile::tempdir().unwrap();
    let o = cli(
        &[
            "generate",
            "--config",
            &smoke(),
            "--checkpoint",
            "/no/such/generator.ckpt",
        ],
        out.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    let err: serde_json::Value =
        serde_json::from_str(String::from_utf8_lossy(&o.stderr).trim()).unwrap();
    assert_eq!(err["kind"], "runtime");
    assert_eq!(err["subcommand"], "generate");
    let dir = run_dir(out.path(), "generate");
    assert!(dir.join("error.json").exists());
}
