use std::process::{Command, Output};

use onegrab::cli::{curve_rows, format_sig, parse_confidence_grid, CurveConfig, CURVE_HEADER};
use onegrab::{BoundVariant, PopulationSpec};

fn onegrab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_onegrab")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn minsize_methods() {
    let base = ["minsize", "--population", "10", "--structure-sizes", "3,3", "--dof", "1", "--confidence", "0.8"];
    let out = onegrab(&[&base[..], &["--method", "exact"]].concat());
    assert!(out.status.success());
    assert_eq!(json(&out)["r"], 5);

    let out = onegrab(&base);
    let v = json(&out);
    assert_eq!(v["method"], "bound");
    assert_eq!(v["variant"]["p0_form"], "safe");
    assert_eq!(v["variant"]["delta_binomial"], "strict");
    assert!(v["r"].as_u64().unwrap() >= 5);

    let out = onegrab(&[&base[..], &["--method", "mc", "--trials", "2000", "--seed", "3"]].concat());
    let r = json(&out)["r"].as_u64().unwrap();
    assert!((4..=6).contains(&r));
}

#[test]
fn error_streams_and_codes() {
    let out = onegrab(&["minsize", "--nope"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    let err = String::from_utf8(out.stderr).unwrap();
    let first: serde_json::Value = serde_json::from_str(err.lines().next().unwrap()).unwrap();
    assert_eq!(first["error"], "usage");

    let out = onegrab(&[
        "minsize", "--population", "10", "--structure-sizes", "1,1", "--dof", "2", "--confidence", "0.9",
    ]);
    assert_eq!(out.status.code(), Some(3));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "infeasible");

    let out = onegrab(&[
        "minsize", "--population", "10", "--structure-sizes", "3,3", "--dof", "1", "--confidence", "1.5",
    ]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn prob_reports_all_three_views() {
    let out = onegrab(&[
        "prob", "--population", "100", "--structure-size", "10", "--structures", "3", "--dof", "2", "--r", "20",
        "--p0", "paper", "--delta", "grab", "--trials", "1000", "--seed", "1",
    ]);
    assert!(out.status.success());
    let v = json(&out);
    let bound = v["bound"]["joint_lower_bound"].as_f64().unwrap();
    assert!((bound - 0.999_806_081_318_475_3).abs() < 1e-12);
    let exact = v["exact"]["linear"].as_f64().unwrap();
    assert!(exact > 0.0 && exact < 1.0);
    assert_eq!(v["mc"]["trials"], 1000);

    let out = onegrab(&["prob", "--population", "5000", "--structure-size", "500", "--structures", "3", "--dof", "2", "--r", "20"]);
    let v = json(&out);
    assert!(v["exact"].is_null());
    assert!(v["mc"].is_null());
}

#[test]
fn curve_csv_round_trips() {
    let args = [
        "curve", "--population", "200", "--structure-sizes", "30,20,40", "--dof", "2", "--confidence-grid",
        "0.5:0.95:0.05", "--trials", "150", "--repeats", "7", "--seed", "11",
    ];
    let first = onegrab(&args);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let second = onegrab(&args);
    assert_eq!(first.stdout, second.stdout);

    let text = String::from_utf8(first.stdout).unwrap();
    assert!(text.ends_with('\n') && !text.contains('\r'));
    assert_eq!(text.lines().next().unwrap(), CURVE_HEADER);

    let spec = PopulationSpec::new(200, vec![30, 20, 40]).unwrap();
    let targets = parse_confidence_grid("0.5:0.95:0.05").unwrap();
    let config = CurveConfig { variant: BoundVariant::STRICT_SAFE, trials: 150, repeats: 7, seed: 11 };
    let rows = curve_rows(&spec, 2, &targets, &config).unwrap();

    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let parsed: Vec<csv::StringRecord> = reader.records().collect::<Result<_, _>>().unwrap();
    assert_eq!(parsed.len(), rows.len());
    let sig = |x: f64| format_sig(x, 6).parse::<f64>().unwrap();
    for (rec, row) in parsed.iter().zip(&rows) {
        assert_eq!(rec[0].parse::<f64>().unwrap(), row.p_target);
        assert_eq!(rec[1].parse::<usize>().ok(), row.r_bound);
        assert_eq!(rec[2].parse::<usize>().ok(), row.r_exact);
        assert_eq!(rec[3].parse::<f64>().unwrap(), sig(row.r_mc_mean));
        assert_eq!(rec[4].parse::<f64>().unwrap(), sig(row.r_mc_std));
    }
}

#[test]
fn curve_omits_exact_for_large_populations() {
    let out = onegrab(&[
        "curve", "--population", "3000", "--structure-size", "300", "--structures", "5", "--confidence-grid",
        "0.9:0.92:0.01", "--trials", "50", "--repeats", "3", "--seed", "2",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for line in text.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 5);
        assert!(!fields[1].is_empty());
        assert!(fields[2].is_empty());
    }
}

#[test]
fn curve_json_and_seed_requirement() {
    let out = onegrab(&[
        "curve", "--population", "100", "--structure-size", "10", "--structures", "5", "--confidence-grid",
        "0.9:0.91:0.01", "--format", "json", "--trials", "50", "--repeats", "2", "--seed", "2",
    ]);
    let v = json(&out);
    assert_eq!(v.as_array().unwrap().len(), 2);
    assert_eq!(v[0]["p_target"], 0.9);

    let out = onegrab(&["curve", "--population", "100", "--structure-size", "10", "--structures", "5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn compare_csv() {
    let out = onegrab(&[
        "compare", "--population", "100", "--structure-sizes", "30,30", "--dof", "2", "--confidence", "0.99",
    ]);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "method,hypotheses,points_touched");
    let methods: Vec<&str> = lines[1..].iter().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(methods, vec!["one_grab_bound", "one_grab_exact", "independent", "sequential"]);
    assert_eq!(lines[4], "sequential,72,144");
}

#[test]
fn demo_is_reproducible_and_exports() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scene.txt");
    let args = [
        "demo", "--population", "200", "--structure-sizes", "50,50", "--geometry", "plane3d", "--noise", "0.01",
        "--trials", "20", "--seed", "4", "--export", path.to_str().unwrap(),
    ];
    let first = onegrab(&args);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    assert_eq!(first.stdout, onegrab(&args).stdout);
    let v = json(&first);
    assert!(v["r_used"].as_u64().unwrap() >= 6);
    assert!(v["coverage_rate"].as_f64().unwrap() <= 1.0);

    let scene = std::fs::read_to_string(&path).unwrap();
    assert_eq!(scene.lines().count(), 200);
    assert!(scene.lines().all(|l| l.split(' ').count() == 4));
    assert_eq!(scene.lines().filter(|l| l.ends_with(" -1")).count(), 100);

    let out = onegrab(&["demo", "--population", "200", "--structure-sizes", "50,50", "--geometry", "line2d"]);
    assert_eq!(out.status.code(), Some(2));
}
