use std::path::Path;
use std::process::{Command, Output};

fn shield(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shield"))
        .args(args)
        .current_dir(cwd)
        .env_remove("SHIELD_LOG")
        .output()
        .expect("spawn shield")
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

#[test]
fn no_arguments_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = shield(&[], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn unknown_command_and_flag_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(shield(&["explode"], dir.path()).status.code(), Some(1));
    assert_eq!(
        shield(&["rank", "--crime", "c.csv", "--bogus"], dir.path())
            .status
            .code(),
        Some(1)
    );
    assert_eq!(shield(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn missing_or_malformed_input_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = shield(&["rank", "--crime", "absent.csv"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    write(
        dir.path(),
        "bad.csv",
        "timestamp,location,crime_type,severity\n10,1,THEFT,300\n",
    );
    let out = shield(&["rank", "--crime", "bad.csv"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.csv"));
}

#[test]
fn analyze_proportional_fixture_gives_unit_correlation() {
    let dir = tempfile::tempdir().unwrap();
    let mut crime = String::from("timestamp,location,crime_type,severity\n");
    let mut density = String::from("hour,count\n");
    for h in 0..24u64 {
        let n = 1 + (h * 7) % 5;
        for k in 0..n {
            crime.push_str(&format!("{},0,THEFT,10\n", h * 3600 + k));
        }
        density.push_str(&format!("{h},{}\n", 3 * n));
    }
    write(dir.path(), "crime.csv", &crime);
    write(dir.path(), "density.csv", &density);
    let out = shield(
        &[
            "analyze",
            "--crime",
            "crime.csv",
            "--density",
            "density.csv",
            "--out",
            "r.json",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert!((report["pearson_r"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(report["n_bins"], 24);
    for key in [
        "peak_crime_hour",
        "peak_density_hour",
        "crime_histogram",
        "density_histogram",
    ] {
        assert!(report.get(key).is_some(), "missing {key}");
    }
    assert!(report.get("spearman_r").is_none());
}

#[test]
fn trust_prints_table_for_node() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "enc.csv",
        "node_a,node_b,start,duration,location\n1,2,0,100,0\n1,2,200,100,0\n1,3,400,50,0\n",
    );
    write(dir.path(), "svc.csv", "node,tag\n3,medical\n");
    let out = shield(
        &[
            "trust",
            "--encounters",
            "enc.csv",
            "--node",
            "1",
            "--services",
            "svc.csv",
            "--matrix-out",
            "m.csv",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        "peer,score,class,service_tag\n2,1.000000,Friend,None\n3,0.375000,Acquaintance,Medical\n"
    );
    let matrix = std::fs::read_to_string(dir.path().join("m.csv")).unwrap();
    assert_eq!(
        matrix,
        "node_a,node_b,count,duration_s\n1,2,2,200\n1,3,1,50\n"
    );
    let out = shield(
        &["trust", "--encounters", "enc.csv", "--node", "9"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn rank_orders_by_risk() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "c.csv",
        "timestamp,location,crime_type,severity\n0,4,THEFT,0\n3600,7,THEFT,0\n3700,7,ASSAULT,255\n",
    );
    let out = shield(
        &["rank", "--crime", "c.csv", "--profile-out", "p.json"],
        dir.path(),
    );
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "location,aggregate_risk");
    assert!(
        rows[1].starts_with("7,") && rows[2].starts_with("4,"),
        "{text}"
    );
    let profile: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("p.json")).unwrap()).unwrap();
    assert_eq!(profile["7"].as_array().unwrap().len(), 24);
    assert_eq!(profile["7"][1], 1.0);
}

#[test]
fn simulate_is_reproducible_and_seed_sensitive() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "sim.json",
        r#"{"seed":3,"duration_s":7200,
            "world":{"synthetic":{"n_nodes":12,"n_communities":3,"n_locations":6,"sim_duration_s":86400,"p_home":0.8,"rng_seed":1}},
            "incidents":[{"time_s":600,"node":1}]}"#,
    );
    let run = |out: &str, seed: &str| {
        let o = shield(
            &[
                "simulate", "--config", "sim.json", "--seed", seed, "--out", out,
            ],
            dir.path(),
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(o.stdout.is_empty());
        std::fs::read(dir.path().join(out)).unwrap()
    };
    let (a, b, c) = (run("a.json", "4"), run("b.json", "4"), run("c.json", "5"));
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn logging_goes_to_stderr_only() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "c.csv",
        "timestamp,location,crime_type,severity\n0,4,THEFT,0\n",
    );
    let quiet = shield(&["rank", "--crime", "c.csv"], dir.path());
    let loud = Command::new(env!("CARGO_BIN_EXE_shield"))
        .args(["rank", "--crime", "c.csv"])
        .current_dir(dir.path())
        .env("SHIELD_LOG", "debug")
        .output()
        .unwrap();
    assert!(quiet.stderr.is_empty());
    assert_eq!(quiet.stdout, loud.stdout);
}
