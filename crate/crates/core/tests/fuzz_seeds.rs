//! The checked-in fuzz seeds are meant to be valid inputs; keep them that way.

use ck_core::fem::Mesh;
use ck_core::harness::ExperimentConfig;
use ck_core::io::{parse_mtx, parse_sigma_csv, BasisMeta};
use std::path::PathBuf;

fn seeds(target: &str) -> Vec<(PathBuf, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fuzz/corpus").join(target);
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            let text = std::fs::read_to_string(&p).unwrap();
            (p, text)
        })
        .collect();
    assert!(!out.is_empty(), "no seeds in {}", dir.display());
    out.sort();
    out
}

#[test]
fn mtx_seeds_parse() {
    for (p, t) in seeds("parse_mtx") {
        parse_mtx(&t, "seed").unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
}

#[test]
fn mesh_seeds_parse_and_validate() {
    for (p, t) in seeds("parse_mesh") {
        let mesh = Mesh::parse(&t).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        mesh.validate(None).unwrap();
    }
}

#[test]
fn config_seeds_parse_and_validate() {
    for (p, t) in seeds("parse_config") {
        let cfg = ExperimentConfig::from_json(&t).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        cfg.validate().unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
}

#[test]
fn basis_meta_seeds_parse() {
    for (p, t) in seeds("parse_basis_meta") {
        BasisMeta::parse(&t).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
}

#[test]
fn sigma_seeds_parse() {
    for (p, t) in seeds("parse_sigma_csv") {
        let rows = parse_sigma_csv(&t, "seed").unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        assert!(!rows.is_empty());
    }
}
