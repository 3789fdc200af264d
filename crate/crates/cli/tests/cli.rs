use std::fs;
use std::process::{Command, Output};

fn jordan(args: &[&str], out_dir: Option<&std::path::Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_jordan"));
    cmd.args(args).env_remove("JORDAN_OUTPUT_DIR");
    if let Some(d) = out_dir {
        cmd.env("JORDAN_OUTPUT_DIR", d);
    }
    cmd.output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn gamma_prints_constants() {
    let o = jordan(&["gamma", "-d", "4", "-p", "0.4"], None);
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(s.contains("gamma = 0.1018"), "{s}");
    assert!(s.contains("extinction q = 0.2285"), "{s}");
}

#[test]
fn preset_prints_parseable_config() {
    let o = jordan(&["preset", "ic_irregular_fig", "--print-config", "--trials", "7"], None);
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(s.contains("trials = 7"));
    assert!(s.contains("degree_choices = [3, 4]"), "{s}");
}

#[test]
fn config_file_with_flag_overrides_and_env_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    fs::write(
        &cfg,
        "name = \"small\"\nmodel = \"dsi\"\np = 0.5\ntrials = 4\ntail_window = 3\n[tree]\nkind = \"regular\"\nd = 3\n[stop]\nmax_nodes = 60\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = jordan(
        &["run", "--config", cfg.to_str().unwrap(), "--trials", "3", "--verify", "--kinds", "jordan,balancedness"],
        Some(&out),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("small_trace_jordan.csv")).unwrap();
    let body: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(
        body[0],
        "trial,obs_index,model_time,center_canonical,center_count,psi,dist_to_root,deepest_depth,second_deepest_depth,n_nodes,changed_flag"
    );
    let trials: std::collections::BTreeSet<&str> = body[1..].iter().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(trials.len(), 3);
    assert!(out.join("small_trace_balancedness.csv").exists());
    let summary = fs::read_to_string(out.join("small_summary.json")).unwrap();
    assert!(summary.contains("\"version\""));
    assert!(summary.contains("\"master_seed\""));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let bodies: Vec<String> = ["a", "b"]
        .iter()
        .map(|sub| {
            let out = dir.path().join(sub);
            let o = jordan(&["preset", "pa_fig", "--trials", "5"], Some(&out));
            assert!(o.status.success());
            fs::read_to_string(out.join("pa_fig_trace_jordan.csv"))
                .unwrap()
                .lines()
                .filter(|l| !l.starts_with('#'))
                .collect::<Vec<_>>()
                .join("\n")
        })
        .collect();
    assert_eq!(bodies[0], bodies[1]);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    // config error
    let o = jordan(&["run", "--model", "ic", "-p", "0.4"], Some(dir.path()));
    assert_eq!(o.status.code(), Some(2));
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "model = \"ic\"\nbogus = 1\n[stop]\nmax_steps = 3\n").unwrap();
    let o = jordan(&["run", "--config", bad.to_str().unwrap()], Some(dir.path()));
    assert_eq!(o.status.code(), Some(2));
    let o = jordan(&["preset", "ic_fig", "-p", "1.5"], Some(dir.path()));
    assert_eq!(o.status.code(), Some(2));

    // invariant failure, with a manifest naming the clause
    let manifest = dir.path().join("m.json");
    let o = jordan(
        &["verify", "--seeds", "3", "--nodes", "80", "--models", "csi", "--inject-fault", "--manifest", manifest.to_str().unwrap()],
        None,
    );
    assert_eq!(o.status.code(), Some(1));
    let m = fs::read_to_string(&manifest).unwrap();
    assert!(m.contains("\"passed\": false") && m.contains("movement_iff"), "{m}");

    let o = jordan(&["verify", "--seeds", "3", "--nodes", "80"], Some(dir.path()));
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(dir.path().join("verify_manifest.json").exists());
}

#[test]
fn front_speed_runs() {
    let o = jordan(&["front-speed", "--n-lo", "4", "--n-hi", "12", "--trials", "5"], None);
    assert!(o.status.success());
    assert!(stdout(&o).contains("slope"));
}
