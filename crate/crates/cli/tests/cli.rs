use std::path::Path;
use std::process::{Command, Output};

fn ck(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ck"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("ck runs")
}

fn write_config(dir: &Path, extra: &str) -> String {
    let cfg = format!(
        r#"{{
            "problem": {{"kind": "checkerboard", "N": 2, "M": 2, "divisions": 8, "a": 20}},
            "method": "ck2", "order": 4, "delta": 1e-7,
            "sample_count": 10, "rng_seed": 3, "output_dir": "out"{extra}
        }}"#
    );
    let path = dir.join("cfg.json");
    std::fs::write(&path, cfg).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn offline_then_online_writes_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "");
    let off = ck(&["offline", "--config", &cfg]);
    assert_eq!(off.status.code(), Some(0), "{}", String::from_utf8_lossy(&off.stderr));
    let out = tmp.path().join("out");
    for f in ["build_report.csv", "singular_values.csv", "basis/basis.meta.json", "basis/Q.mtx"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let report = std::fs::read_to_string(out.join("build_report.csv")).unwrap();
    assert!(report.starts_with("step,k_rank,sv_max,sv_min_retained,sv_first_discarded\n"));
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("basis/basis.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["method"], "ck2");
    assert_eq!(meta["j"], 4);

    let basis = out.join("basis");
    let on = ck(&["online", "--config", &cfg, "--basis", basis.to_str().unwrap()]);
    assert_eq!(on.status.code(), Some(0), "{}", String::from_utf8_lossy(&on.stderr));
    let errors = std::fs::read_to_string(out.join("errors.csv")).unwrap();
    assert_eq!(errors.lines().count(), 11);
}

#[test]
fn failed_points_give_exit_code_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "");
    let sigmas = tmp.path().join("s.csv");
    std::fs::write(&sigmas, "sigma_1,sigma_2,sigma_3,sigma_4\n1,2,3,4\n-1,-1,-1,-1\n").unwrap();
    let out = ck(&["eval", "--config", &cfg, "--sigmas", sigmas.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let errors = std::fs::read_to_string(tmp.path().join("out/errors.csv")).unwrap();
    assert!(errors.lines().nth(2).unwrap().contains("failed"));
}

#[test]
fn fatal_errors_give_exit_code_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#", "schedule": [1e-7]"#);
    assert_eq!(ck(&["offline", "--config", &cfg]).status.code(), Some(1));
    assert_eq!(ck(&["offline", "--config", "/nonexistent/cfg.json"]).status.code(), Some(1));
    let mesh = tmp.path().join("bad.mesh");
    std::fs::write(&mesh, "nodes 3\n0 0 1\n1 0 1\n0 1 1\ntriangles 1\n0 2 1 1\n").unwrap();
    assert_eq!(ck(&["mesh", "validate", mesh.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn mesh_gen_and_validate() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("board.mesh");
    let p = path.to_str().unwrap();
    let gen = ck(&["mesh", "gen", "--kind", "checkerboard", "--divisions", "8", "--rows", "2", "--cols", "4", "--out", p]);
    assert_eq!(gen.status.code(), Some(0), "{}", String::from_utf8_lossy(&gen.stderr));
    assert!(std::fs::read_to_string(&path).unwrap().starts_with("nodes 81\n"));
    assert_eq!(ck(&["mesh", "validate", p, "--max-tag", "8"]).status.code(), Some(0));
    assert_eq!(ck(&["mesh", "validate", p, "--max-tag", "4"]).status.code(), Some(1));
    let hole = tmp.path().join("hole.mesh");
    let gen = ck(&["mesh", "gen", "--kind", "hole", "--divisions", "12", "--out", hole.to_str().unwrap()]);
    assert_eq!(gen.status.code(), Some(0));
    assert_eq!(ck(&["mesh", "validate", hole.to_str().unwrap(), "--max-tag", "3"]).status.code(), Some(0));
}

#[test]
fn exported_family_runs_as_external_problem() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "");
    let fam = tmp.path().join("family");
    let out = ck(&["export", "--config", &cfg, "--out", fam.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["meta.json", "A_1.mtx", "A_4.mtx", "b.mtx"] {
        assert!(fam.join(f).exists(), "{f}");
    }
    let ext = tmp.path().join("ext.json");
    std::fs::write(
        &ext,
        r#"{"problem": {"kind": "external", "dir": "family"}, "method": "exact", "order": 3,
            "sample_count": 5, "rng_seed": 1, "output_dir": "ext-out"}"#,
    )
    .unwrap();
    let run = ck(&["eval", "--config", ext.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
}
