use std::process::{Command, Output};

fn twistlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twistlab"))
        .args(args)
        .env_remove("TWISTLAB_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines().map(|l| l.split(',').map(str::to_string).collect()).collect()
}

fn column(csv: &str, name: &str) -> Vec<String> {
    let r = rows(csv);
    let i = r[0].iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    r[1..].iter().map(|row| row[i].clone()).collect()
}

#[test]
fn integrable_greene_scan_is_consistent() {
    let o = twistlab(&["greene", "--map", "standard", "--k", "0", "--omega", "golden", "--levels", "8"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    for key in ["map", "k", "omega_cf", "sigma", "margin", "tail_window", "records", "failed", "verdict", "verdict_basis"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["verdict"], "ConsistentWithCurve");
    let records = v["records"].as_array().unwrap();
    assert_eq!(records.len(), 8);
    for r in records {
        assert_eq!(r["residue"].as_f64(), Some(0.0));
        assert_eq!(r["mean_residue"].as_f64(), Some(0.0));
    }
}

#[test]
fn fixed_point_minimize() {
    let dir = tempfile::tempdir().unwrap();
    let res = dir.path().join("res.csv");
    let o = twistlab(&["minimize", "--map", "standard", "--k", "1", "--p", "0", "--q", "1", "--csv", res.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let theta: f64 = column(&stdout(&o), "theta")[0].parse().unwrap();
    assert!(theta.abs() < 1e-9);
    let res = std::fs::read_to_string(res).unwrap();
    assert!(res.starts_with("p,q,trace,residue,mean_residue,lambda_max\n"));
    let residue: f64 = column(&res, "residue")[0].parse().unwrap();
    assert!((residue + 0.25).abs() < 1e-12);
}

#[test]
fn non_coprime_rotation_is_a_usage_error() {
    let o = twistlab(&["minimize", "--map", "standard", "--k", "1", "--p", "2", "--q", "4"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("p,q not coprime"), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1);
}

#[test]
fn usage_errors_name_the_field() {
    for (args, field) in [
        (&["minimize", "--k", "1", "--p", "0"][..], "--q"),
        (&["minimize", "--p", "0", "--q", "1"][..], "k"),
        (&["minimize", "--map", "henon", "--k", "1", "--p", "0", "--q", "1"][..], "map"),
        (&["greene", "--k", "1", "--omega", "[0;2]", "--levels", "4"][..], "rational"),
        (&["lyapunov", "--k", "1", "--x", "0", "--r", "0", "--n", "10"][..], "n >= 100"),
        (&["frobnicate"][..], "frobnicate"),
    ] {
        let o = twistlab(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        let err = stderr(&o);
        assert!(err.contains(field), "{args:?}: {err}");
        assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    }
}

#[test]
fn numerical_failure_exits_one() {
    // the integrable 0/1 minimizer is the exact fixed point (0, 0), so the
    // distance series is identically zero
    let o = twistlab(&["rate", "--map", "integrable", "--orbits", "0/1", "--x", "0", "--r", "0", "--n", "64"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("rate classification failed"), "{}", stderr(&o));
}

#[test]
fn sweep_rows_and_empty_grid() {
    let o = twistlab(&["sweep", "--map", "standard", "--ks", "1,0", "--p", "0", "--q", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let ks: Vec<f64> = column(&out, "k").iter().map(|s| s.parse().unwrap()).collect();
    let residues: Vec<f64> = column(&out, "residue").iter().map(|s| s.parse().unwrap()).collect();
    assert_eq!(ks, vec![0.0, 1.0]);
    assert!(residues[0].abs() < 1e-15 && (residues[1] + 0.25).abs() < 1e-12);
    assert_eq!(column(&out, "status"), vec!["ok", "ok"]);

    let o = twistlab(&["sweep", "--map", "standard", "--ks", ""]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "k,p,q,trace,residue,mean_residue,lambda_max,status\n");
}

#[test]
fn sweep_is_sorted_by_k_then_q() {
    let o = twistlab(&["sweep", "--ks", "1.5,0.25,1", "--levels", "5", "--threads", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let keys: Vec<(f64, usize)> = column(&out, "k")
        .iter()
        .zip(column(&out, "q"))
        .map(|(k, q)| (k.parse().unwrap(), q.parse().unwrap()))
        .collect();
    assert_eq!(keys.len(), 15);
    assert!(keys.windows(2).all(|w| w[0].0 < w[1].0 || (w[0].0 == w[1].0 && w[0].1 <= w[1].1)));
}

#[test]
fn csv_numbers_round_trip() {
    let o = twistlab(&["orbit", "--k", "0.971635", "--x", "0.1", "--r", "0.2", "--n", "50"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(!out.contains('\r'));
    for cell in column(&out, "x").iter().chain(column(&out, "r").iter()) {
        let x: f64 = cell.parse().unwrap();
        assert_eq!(&twistlab_cli::num(x), cell);
    }
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let toml = dir.path().join("run.toml");
    std::fs::write(&toml, "command = \"minimize\"\nmap = \"standard\"\nk = 1.0\np = 0\nq = 1\n").unwrap();
    let res = dir.path().join("res.csv");
    let o = twistlab(&["--config", toml.to_str().unwrap(), "--csv", res.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let trace: f64 = column(&std::fs::read_to_string(&res).unwrap(), "trace")[0].parse().unwrap();
    assert!((trace - 3.0).abs() < 1e-12);

    // explicit --k wins over the file
    let o = twistlab(&["minimize", "--config", toml.to_str().unwrap(), "--k", "2", "--csv", res.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let trace: f64 = column(&std::fs::read_to_string(&res).unwrap(), "trace")[0].parse().unwrap();
    assert!((trace - 4.0).abs() < 1e-12);

    let json = dir.path().join("run.json");
    std::fs::write(&json, r#"{"map": "standard", "k": 0, "levels": 6, "tail_window": 2}"#).unwrap();
    let o = twistlab(&["greene", "--config", json.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["tail_window"], 2);
    assert_eq!(v["records"].as_array().unwrap().len(), 6);
}

#[test]
fn thread_cap_from_environment_keeps_output() {
    let args = ["greene", "--k", "0.9", "--levels", "8", "--seed", "3"];
    let a = twistlab(&args);
    let b = Command::new(env!("CARGO_BIN_EXE_twistlab")).args(args).env("TWISTLAB_THREADS", "1").output().unwrap();
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn green_bundles_and_lyapunov_at_the_fixed_point() {
    let o = twistlab(&["green-bundles", "--k", "1", "--x", "0", "--r", "0", "--depth", "30"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let hi: f64 = column(&out, "s_plus")[0].parse().unwrap();
    let lo: f64 = column(&out, "s_minus")[0].parse().unwrap();
    assert!((hi - (5f64.sqrt() - 1.0) / 2.0).abs() < 1e-6);
    assert!((lo + (5f64.sqrt() + 1.0) / 2.0).abs() < 1e-6);

    let o = twistlab(&["green-bundles", "--k", "1.5", "--p", "2", "--q", "5", "--depth", "20"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(rows(&stdout(&o)).len(), 6);

    let o = twistlab(&["lyapunov", "--k", "1", "--x", "0", "--r", "0", "--n", "1000"]);
    let l: f64 = column(&stdout(&o), "lyapunov")[0].parse().unwrap();
    assert!((l - ((3.0 + 5f64.sqrt()) / 2.0).ln()).abs() < 1e-6);
}

#[test]
fn regularity_and_rate_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let gaps = dir.path().join("gaps.csv");
    let o = twistlab(&["regularity", "--k", "2", "--orbits", "8/13,13/21", "--depth", "30", "--csv", gaps.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stderr(&o).contains("not a graph"), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.starts_with("base_theta,base_r,delta,slope_min,slope_max,pair_count\n"));
    let gaps = std::fs::read_to_string(gaps).unwrap();
    assert!(gaps.starts_with("theta,r,green_gap\n"));
    assert_eq!(rows(&gaps).len(), 1 + 34);

    let series = dir.path().join("d.csv");
    let o = twistlab(&[
        "rate", "--k", "1", "--orbits", "0/1", "--x", "0.05", "--r", "0.02", "--n", "200", "--csv", series.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    for key in ["kind", "rate", "slope", "epsilon_table", "windows"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(rows(&std::fs::read_to_string(series).unwrap()).len(), 1 + 201);
}
