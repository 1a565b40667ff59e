use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_aviopt"))
}

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn write_config(dir: &Path, name: &str, json: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, json).unwrap();
    p
}

/// Run a subcommand and return its exit code.
fn run(cmd: &str, config: &Path, out: &Path) -> i32 {
    let o = bin().args([cmd, "--config"]).arg(config).arg("--out").arg(out).output().unwrap();
    if !o.status.success() {
        eprintln!("{}", String::from_utf8_lossy(&o.stderr));
    }
    o.status.code().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn series(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let head = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(|v| v.parse().unwrap()).collect()).collect();
    (head, rows)
}

fn column(head: &[String], rows: &[Vec<f64>], name: &str) -> Vec<f64> {
    let j = head.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    rows.iter().map(|r| r[j]).collect()
}

#[test]
fn baseline_writes_consistent_series() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", r#"{"backgrounds": ["ssp1_19", "ssp5_45"]}"#);
    assert_eq!(run("baseline", &cfg, &tmp.path().join("out")), 0);
    let mut peaks = Vec::new();
    for label in ["ssp1_19", "ssp5_45"] {
        let dir = tmp.path().join("out").join(label);
        let (head, rows) = series(&dir.join("series.csv"));
        assert_eq!(rows.len(), 51);
        let co2 = column(&head, &rows, "co2_gt");
        let cum = column(&head, &rows, "cumulative_co2_gt");
        let mut acc = 0.0;
        for (c, s) in co2.iter().zip(&cum) {
            acc += c;
            assert!((acc - s).abs() <= 1e-9 * acc.max(1.0), "{acc} vs {s}");
        }
        let summary = json(&dir.join("summary.json"));
        assert_eq!(summary["feasible"], true);
        for (use_, cap) in [("biomass_use_mj", "biomass_cap_mj"), ("electricity_use_mj", "electricity_cap_mj")] {
            for (u, c) in column(&head, &rows, use_).iter().zip(column(&head, &rows, cap)) {
                assert!(*u <= c * (1.0 + 1e-6));
            }
        }
        assert!(column(&head, &rows, "price_ratio").iter().all(|v| *v == 1.0));
        peaks.push(summary["scenarios"][0]["peak_co2_gt"].as_f64().unwrap());
    }
    assert!(peaks[1] > peaks[0], "SSP5 peak {} should exceed SSP1 peak {}", peaks[1], peaks[0]);
}

#[test]
fn runs_are_reproducible() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", r#"{"energy": "fossil", "optimizer": {"fd_check": true}}"#);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(run("optimize", &cfg, &a), 0);
    assert_eq!(run("optimize", &cfg, &b), 0);
    for f in ["series.csv", "variables.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    let (mut sa, mut sb) = (json(&a.join("summary.json")), json(&b.join("summary.json")));
    assert_eq!(sa["fd_check"]["passed"], true);
    sa.as_object_mut().unwrap().remove("wall_time_s");
    sb.as_object_mut().unwrap().remove("wall_time_s");
    assert_eq!(sa, sb);
}

#[test]
fn warm_start_from_previous_variables() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", r#"{"energy": "fossil"}"#);
    assert_eq!(run("optimize", &cfg, &tmp.path().join("first")), 0);
    let warm = write_config(
        tmp.path(),
        "w.json",
        r#"{"energy": "fossil", "warm_start": "first/variables.json", "optimizer": {"max_iter": 1}}"#,
    );
    // One iteration from the previous optimum: the warm start carries the result.
    let code = run("optimize", &warm, &tmp.path().join("second"));
    assert!(code == 0 || code == 2);
    let (f1, f2) = (
        json(&tmp.path().join("first/summary.json"))["objective"].as_f64().unwrap(),
        json(&tmp.path().join("second/summary.json"))["objective"].as_f64().unwrap(),
    );
    assert!(f2 <= f1 + 1e-9, "{f2} vs {f1}");
}

#[test]
fn zero_population_gives_zero_emissions() {
    let tmp = TempDir::new().unwrap();
    let src = fs::read_to_string(data_dir().join("backgrounds/ssp2_26.csv")).unwrap();
    let mut lines = src.lines();
    let mut out = vec![lines.next().unwrap().to_string()];
    for l in lines {
        let mut f: Vec<&str> = l.split(',').collect();
        f[1] = "0";
        out.push(f.join(","));
    }
    fs::write(tmp.path().join("empty.csv"), out.join("\n") + "\n").unwrap();
    let cfg = write_config(tmp.path(), "c.json", r#"{"backgrounds": ["empty.csv"]}"#);
    assert_eq!(run("baseline", &cfg, &tmp.path().join("out")), 0);
    let (head, rows) = series(&tmp.path().join("out/empty/series.csv"));
    assert!(column(&head, &rows, "co2_gt").iter().all(|v| *v == 0.0));
    assert!(column(&head, &rows, "rpk").iter().all(|v| *v == 0.0));
}

#[test]
fn robust_objective_is_mean_of_scenarios() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", r#"{"energy": "fossil", "backgrounds": ["ssp2_19", "ssp2_34"]}"#);
    let out = tmp.path().join("out");
    assert_eq!(run("robust", &cfg, &out), 0);
    let s = json(&out.join("summary.json"));
    let per: Vec<f64> = s["scenarios"].as_array().unwrap().iter().map(|v| v["cumulative_co2_gt"].as_f64().unwrap()).collect();
    let mean = per.iter().sum::<f64>() / per.len() as f64;
    assert!((s["objective"].as_f64().unwrap() - mean).abs() <= 1e-12 * mean);
    assert!(out.join("ssp2_19/series.csv").is_file() && out.join("ssp2_34/series.csv").is_file());
}

#[test]
fn not_converged_exits_two() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", r#"{"energy": "fossil", "optimizer": {"max_iter": 1}}"#);
    assert_eq!(run("optimize", &cfg, &tmp.path().join("out")), 2);
    assert_eq!(json(&tmp.path().join("out/summary.json"))["converged"], false);
}

#[test]
fn invalid_configs_exit_three() {
    let tmp = TempDir::new().unwrap();
    for (name, body) in [
        ("unknown_field.json", r#"{"formulaton": "trend"}"#),
        ("unknown_background.json", r#"{"backgrounds": ["ssp9_99"]}"#),
        ("bad_tolerance.json", r#"{"optimizer": {"kkt_tol": -1.0}}"#),
        ("no_budget.json", r#"{"formulation": "low_demand", "settings": {"budget": null}}"#),
        ("zero_reps.json", r#"{"bench": {"repetitions": 0}}"#),
        ("two_backgrounds.json", r#"{"backgrounds": ["ssp2_19", "ssp2_26"]}"#),
        ("missing_warm.json", r#"{"warm_start": "nowhere.json"}"#),
    ] {
        let cfg = write_config(tmp.path(), name, body);
        let cmd = if name == "zero_reps.json" { "bench" } else { "optimize" };
        assert_eq!(run(cmd, &cfg, &tmp.path().join("out")), 3, "{name}");
    }
    assert_eq!(run("optimize", &tmp.path().join("absent.json"), &tmp.path().join("out")), 3);
}

#[test]
fn bad_data_exits_four() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", r#"{"data": {"market_split": "missing.csv"}}"#);
    assert_eq!(run("baseline", &cfg, &tmp.path().join("out")), 4);

    fs::write(tmp.path().join("short.csv"), "year,income_pc,rpk_pc\n2000,9000,700\n2001,9100,710\n").unwrap();
    let cfg = write_config(tmp.path(), "h.json", r#"{"data": {"demand_history": "short.csv"}}"#);
    assert_eq!(run("calibrate", &cfg, &tmp.path().join("out")), 4);
}

#[test]
fn calibration_applies_covid_shift() {
    let tmp = TempDir::new().unwrap();
    let plain = write_config(tmp.path(), "a.json", "{}");
    let shifted = write_config(tmp.path(), "b.json", r#"{"calibration": {"covid_shift": true}}"#);
    assert_eq!(run("calibrate", &plain, &tmp.path().join("a")), 0);
    assert_eq!(run("calibrate", &shifted, &tmp.path().join("b")), 0);
    let (a, b) = (json(&tmp.path().join("a/calibration.json")), json(&tmp.path().join("b/calibration.json")));
    assert_eq!(a["converged"], true);
    assert_eq!(a["rows"], 40);
    let gap = b["covid_income_gap"].as_f64().unwrap();
    assert!(gap > 0.0);
    let (ia, ib) = (a["demand"]["inflection_income"].as_f64().unwrap(), b["demand"]["inflection_income"].as_f64().unwrap());
    assert!((ib - ia - gap).abs() < 1e-9, "{ib} - {ia} vs {gap}");
    assert_eq!(a["demand"]["right"], b["demand"]["right"]);
    let (ra, rb) = (a["sum_squared_residuals"].as_f64().unwrap(), b["sum_squared_residuals"].as_f64().unwrap());
    assert!((ra - rb).abs() <= 1e-9 * ra);
}

#[test]
fn bench_honors_repetitions() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", r#"{"bench": {"repetitions": 3}, "optimizer": {"batch_width": 8}}"#);
    assert_eq!(run("bench", &cfg, &tmp.path().join("out")), 0);
    let mut r = csv::Reader::from_path(tmp.path().join("out/bench.csv")).unwrap();
    let head: Vec<String> = r.headers().unwrap().iter().map(String::from).collect();
    let rows: Vec<Vec<String>> = r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect();
    let get = |row: &[String], name: &str| row[head.iter().position(|h| h == name).unwrap()].clone();
    let tasks: Vec<String> = rows.iter().map(|r| get(r, "task")).collect();
    assert_eq!(tasks, ["evaluate", "dual_pass", "linearize"]);
    for row in &rows {
        assert_eq!(get(row, "repetitions"), "3");
        assert!(get(row, "min_s").parse::<f64>().unwrap() > 0.0);
    }
    // 125 variables in batches of 8.
    assert_eq!(get(&rows[2], "passes"), "16");
}

#[test]
fn help_lists_subcommands() {
    let o = bin().arg("--help").output().unwrap();
    let text = String::from_utf8_lossy(&o.stdout);
    for cmd in ["baseline", "optimize", "robust", "calibrate", "bench"] {
        assert!(text.contains(cmd), "{cmd} missing from help");
    }
}
