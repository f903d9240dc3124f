use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bohmlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bohmlab"))
        .args(args)
        .output()
        .expect("spawn bohmlab")
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn same_seed_gives_identical_csvs() {
    let tmp = tempfile::tempdir().unwrap();
    for scenario in ["fig5_orbit", "fig6_pf_relax", "entropy_trace"] {
        let a = tmp.path().join(format!("{scenario}_a"));
        let b = tmp.path().join(format!("{scenario}_b"));
        for (dir, threads) in [(&a, "1"), (&b, "3")] {
            let out = bohmlab(&["run", scenario, "--out", dir.to_str().unwrap(), "--threads", threads]);
            assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        }
        let (fa, fb) = (csv_files(&a), csv_files(&b));
        assert!(!fa.is_empty());
        assert_eq!(fa, fb, "{scenario}");
    }
}

#[test]
fn manifest_lists_hashes_and_config() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("orbit");
    let out = bohmlab(&["run", "fig5_orbit", "--out", dir.to_str().unwrap(), "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["seed"], 7);
    let outputs = manifest["outputs"].as_array().unwrap();
    assert!(outputs.iter().any(|o| o["path"] == "lyapunov.json"));
    assert!(outputs.iter().any(|o| o["path"] == "metadata.json"));
    for o in outputs {
        let bytes = fs::read(dir.join(o["path"].as_str().unwrap())).unwrap();
        assert_eq!(o["sha256"].as_str().unwrap(), bohmlab::io::sha256_hex(&bytes));
    }
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("metadata.json")).unwrap()).unwrap();
    assert_eq!(meta["seed"], 7);
}

#[test]
fn unknown_scenario_is_a_config_error() {
    assert_eq!(bohmlab(&["run", "no_such_scenario"]).status.code(), Some(2));
}

#[test]
fn misspelled_key_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.toml");
    fs::write(&path, "kind = \"pf_relax\"\n[pf_relax]\nstpes = 3\n").unwrap();
    let out = bohmlab(&["run", path.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("stpes"));
}

#[test]
fn failed_check_exits_with_3() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("strict.toml");
    fs::write(&path, "kind = \"pf_relax\"\n[pf_relax]\nsup_threshold = 1e-12\n").unwrap();
    let out = bohmlab(&["run", path.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn list_scenarios_names_every_built_in() {
    let out = bohmlab(&["list-scenarios"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for b in &bohmlab::scenario::BUILT_IN {
        assert!(text.contains(b.name), "{}", b.name);
    }
}
