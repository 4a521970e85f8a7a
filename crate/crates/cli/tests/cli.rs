use std::process::{Command, Output};

use serde_json::Value;

fn interlace(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_interlace"))
        .args(args)
        .env_remove("INTERLACE_OUT_DIR")
        .output()
        .unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stderr)))
}

#[test]
fn capacity_of_the_small_box() {
    let out = interlace(&["capacity", "--box", "2,2,2"]);
    assert!(out.status.success());
    let v = json(&out);
    let cap = v["results"]["cap"].as_f64().unwrap();
    let pot = interlace::PotentialTable::new(3).unwrap();
    let set = interlace::LatticeSet::cube(&[2, 2, 2]).unwrap();
    let expected = interlace::capacity::equilibrium_measure(&set, &pot).unwrap().cap();
    assert_eq!(cap, expected);
    assert_eq!(v["set"]["boundary"], 8);
    assert_eq!(v["results"]["boundary"].as_array().unwrap().len(), 8);
}

#[test]
fn tv_lemma_at_one() {
    let out = interlace(&["tv-lemma", "--theta", "1"]);
    assert!(out.status.success());
    let r = &json(&out)["results"][0];
    assert!((r["tv"].as_f64().unwrap() - 0.735759).abs() < 1e-6);
    assert_eq!(r["bound"], 1.0);
    assert_eq!(r["holds"], true);
}

#[test]
fn verify_russo_is_reproducible_across_worker_counts() {
    let base = ["verify-russo", "--box", "2,2,2", "--event", "nonempty", "--theta", "1", "--n", "20000", "--seed", "7"];
    let runs: Vec<Output> = ["1", "4", "4"]
        .iter()
        .map(|w| {
            let mut args = base.to_vec();
            args.extend(["--workers", w]);
            interlace(&args)
        })
        .collect();
    for r in &runs {
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
        assert_eq!(r.stdout, runs[0].stdout);
    }
    let v = json(&runs[0]);
    let b = &v["results"][0];
    for key in ["e1", "e2", "e3", "fd"] {
        assert!(b[key]["mean"].is_f64() && b[key]["stderr"].is_f64());
    }
    assert!(b["closed_form"]["derivative"].is_f64());
    assert_eq!(v["passed"], true);
    assert_eq!(v["config"]["seed"], 7);
}

#[test]
fn failed_checks_set_the_exit_status() {
    let out = interlace(&["verify-russo", "--box", "2,2,2", "--theta", "1", "--n", "2000", "--sigma", "0"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["passed"], false);
}

#[test]
fn invalid_config_names_the_field() {
    for (args, field) in [
        (vec!["estimate", "--box", "2,0,2"], "box"),
        (vec!["estimate", "--box", "2,2"], "box"),
        (vec!["estimate", "--n", "0"], "n"),
        (vec!["estimate", "--event", "site x=(9,9,9)"], "event"),
        (vec!["verify-russo", "--u", "0"], "u"),
        (vec!["scan-pivotal", "--alpha", "0.5"], "alpha"),
        (vec!["estimate", "--mode", "teleport"], "mode"),
    ] {
        let out = interlace(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains(&format!("`{field}`")), "{args:?}: {err}");
    }
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    std::fs::write(&path, "box = [2, 2, 1]\nn = 1000\nseed = 5\nevent = \"site x=(0,0,0)\"\ntheta = [0.5, 1.0]\n").unwrap();
    let out = interlace(&["estimate", "--config", path.to_str().unwrap(), "--seed", "9"]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["config"]["seed"], 9);
    assert_eq!(v["config"]["n"], 1000);
    assert_eq!(v["config"]["set"]["sides"], serde_json::json!([2, 2, 1]));
    assert_eq!(v["results"].as_array().unwrap().len(), 2);

    std::fs::write(&path, "boxx = [2, 2, 2]\n").unwrap();
    let out = interlace(&["estimate", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn output_directory_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_interlace"))
        .args(["scan-pivotal", "--box", "2,2,2", "--n", "500", "--grid", "4"])
        .env("INTERLACE_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    let report: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("scan-pivotal.json")).unwrap()).unwrap();
    assert_eq!(report["results"]["points"].as_array().unwrap().len(), 4);
    assert_eq!(report["results"]["closed_form_fraction"], 1.0);
    let csv = std::fs::read_to_string(dir.path().join("scan-pivotal.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("u,estimator,mean,stderr"));
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn sample_reports_a_coupled_realization() {
    let out = interlace(&["sample", "--sites", "(0,0,0);(1,0,0);(0,1,0)", "--theta", "0.5,3", "--seed", "3"]);
    assert!(out.status.success());
    let v = json(&out);
    let levels = v["results"]["levels"].as_array().unwrap();
    let small = levels[0]["interlacement"].as_array().unwrap().len();
    let large = levels[1]["interlacement"].as_array().unwrap().len();
    assert!(small <= large);
    assert_eq!(v["results"]["points"].as_array().unwrap().len(), levels[1]["traces"].as_u64().unwrap() as usize);
}

#[test]
fn bounds_and_conditioned_walk_mode() {
    let out = interlace(&[
        "verify-bounds", "--box", "3,3,3", "--event", "two_point v=(0,0,0) z=(2,2,2)", "--theta", "0.5,1,2", "--n", "3000",
        "--mode", "conditioned-walk",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["checks"].as_array().unwrap().len(), 6);
    assert_eq!(v["discarded_traces"], 0);
    assert_eq!(v["config"]["mode"]["kind"], "conditioned_walk");
}
