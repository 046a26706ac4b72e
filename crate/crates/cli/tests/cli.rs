use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use funq::data_io::{load_panel, read_results, OutputFormat, PanelSchema, ResultBundle};
use funq::depth::maximal_depth_set;
use funq::{Curve, Grid, KernelSpec};

fn fq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fq"))
        .args(args)
        .output()
        .expect("fq runs")
}

fn ok(args: &[&str]) {
    let out = fq(args);
    assert!(
        out.status.success(),
        "fq {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

fn simulate(dir: &Path, n: usize, seed: u64) -> String {
    let out = p(dir, &format!("sim_{n}_{seed}.csv"));
    ok(&[
        "simulate", "--model", "hetero", "--n", &n.to_string(), "--grid-count", "21", "--seed",
        &seed.to_string(), "--out", &out,
    ]);
    out
}

fn read(path: &str) -> ResultBundle {
    let format = if path.ends_with(".json") {
        OutputFormat::Json
    } else {
        OutputFormat::Csv
    };
    read_results(path, format).unwrap()
}

#[test]
fn simulate_writes_units_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let a = p(dir.path(), "a.csv");
    let b = p(dir.path(), "b.csv");
    for out in [&a, &b] {
        ok(&["simulate", "--model", "hetero", "--n", "100", "--seed", "7", "--out", out]);
    }
    let panel = load_panel(&a, &PanelSchema::default()).unwrap();
    assert_eq!(panel.sample.len(), 100);
    assert_eq!(panel.sample.covariate_grid().count(), 101);
    assert_eq!(panel.metadata.get("seed").map(String::as_str), Some("7"));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = p(dir.path(), "x.csv");
    assert_eq!(fq(&["simulate", "--n", "0", "--out", &out]).status.code(), Some(2));
    assert_eq!(fq(&["simulate", "--model", "nope", "--out", &out]).status.code(), Some(2));
    let input = simulate(dir.path(), 20, 1);
    let res = p(dir.path(), "r.csv");
    assert_eq!(
        fq(&["depth-set", "--input", &input, "--out", &res, "--p", "1.5"]).status.code(),
        Some(2)
    );
    assert_eq!(
        fq(&["fit-quantiles", "--input", &input, "--out", &res, "--x", "nobody", "--h", "1"])
            .status
            .code(),
        Some(2)
    );
    let threads = Command::new(env!("CARGO_BIN_EXE_fq"))
        .env("FQ_THREADS", "many")
        .args(["cv", "--input", &input, "--out", &res])
        .output()
        .unwrap();
    assert_eq!(threads.status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let res = p(dir.path(), "r.csv");
    let missing = p(dir.path(), "missing.csv");
    let out = fq(&["cv", "--input", &missing, "--out", &res]);
    assert_eq!(out.status.code(), Some(1));

    let input = simulate(dir.path(), 20, 2);
    let out = fq(&["cv", "--input", &input, "--out", &res, "--grid", "1e-9"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("infeasible"));

    let out = fq(&["fit-quantiles", "--input", &input, "--out", &res, "--h", "1e-9", "--x", "u003"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("u003"));
}

fn write_panel_text(path: &Path, text: &str) -> String {
    std::fs::write(path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn median_of_symmetric_data_is_the_center() {
    let dir = tempfile::tempdir().unwrap();
    let grid = Grid::unit(5).unwrap();
    let center = Curve::from_fn(grid, |t| 1.0 + t * t);
    let bumps = [
        Curve::from_fn(grid, |t| t),
        Curve::from_fn(grid, |t| (3.0 * t).sin()),
        Curve::from_fn(grid, |_| 0.5),
    ];
    let mut text = String::from("unit,time,x,y\n");
    let mut unit = 0;
    for b in &bumps {
        for sign in [1.0, -1.0] {
            for (k, t) in grid.points().iter().enumerate() {
                let y = center.values()[k] + sign * b.values()[k];
                text.push_str(&format!("{unit},{t},{},{y}\n", unit as f64 * 0.1));
            }
            unit += 1;
        }
    }
    let input = write_panel_text(&dir.path().join("sym.csv"), &text);
    let out = p(dir.path(), "q.json");
    ok(&[
        "fit-quantiles", "--input", &input, "--out", &out, "--format", "json", "--tau", "0", "--h",
        "100", "--x", "0",
    ]);
    let b = read(&out);
    let q = b.series("0/Q(0)").unwrap();
    for (v, c) in q.v.iter().zip(center.values()) {
        assert!((v - c).abs() < 1e-8, "{v} vs {c}");
    }
}

#[test]
fn cv_bandwidth_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let input = simulate(dir.path(), 40, 3);
    let out = p(dir.path(), "q.csv");
    ok(&["fit-quantiles", "--input", &input, "--out", &out, "--h", "cv"]);
    let b = read(&out);
    assert_eq!(b.get("h_rule"), Some("cv"));
    let h: f64 = b.get("h").unwrap().parse().unwrap();
    assert!(h > 0.0);
    // six default evaluation points, three curves each
    assert_eq!(b.series.len(), 18);

    let cv_out = p(dir.path(), "cv.csv");
    ok(&["cv", "--input", &input, "--out", &cv_out]);
    let cv = read(&cv_out);
    assert_eq!(cv.get("h_opt").unwrap().parse::<f64>().unwrap(), h);
}

/// Weighted quantile of level (1 + tau) / 2, equal weights.
fn scalar_quantile(values: &[f64], tau: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let level = 0.5 * (1.0 + tau) * v.len() as f64;
    *v.iter()
        .enumerate()
        .find(|(k, _)| (k + 1) as f64 >= level)
        .unwrap()
        .1
}

#[test]
fn scalar_panel_matches_sorted_quantiles() {
    let dir = tempfile::tempdir().unwrap();
    let ys = [3.0, -1.0, 4.0, 1.5, 9.0, 2.5, -6.0];
    let mut text = String::from("unit,time,x,y\n");
    for (i, y) in ys.iter().enumerate() {
        text.push_str(&format!("u{i},2000,{},{y}\n", i as f64));
    }
    let input = write_panel_text(&dir.path().join("scalar.csv"), &text);
    let out = p(dir.path(), "q.csv");
    ok(&[
        "fit-quantiles", "--input", &input, "--out", &out, "--tau", "0.5u1", "--h", "100", "--x",
        "u0",
    ]);
    let b = read(&out);
    for (label, tau) in [("Q(tau)", 0.5), ("Q(0)", 0.0), ("Q(-tau)", -0.5)] {
        let got = b.series(&format!("u0/{label}")).unwrap().v[0];
        let want = scalar_quantile(&ys, tau);
        assert!((got - want).abs() < 1e-12, "{label}: {got} vs {want}");
    }
}

fn members(b: &ResultBundle, unit: &str) -> Vec<String> {
    b.get(&format!("{unit}.members"))
        .unwrap()
        .split(',')
        .map(String::from)
        .collect()
}

#[test]
fn depth_sets_nest_and_match_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let input = simulate(dir.path(), 50, 4);
    let run = |pv: &str| {
        let out = p(dir.path(), &format!("d{pv}.json"));
        ok(&[
            "depth-set", "--input", &input, "--out", &out, "--format", "json", "--p", pv, "--h",
            "0.8", "--x", "u010",
        ]);
        read(&out)
    };
    let small = run("0.3");
    let large = run("0.6");
    let a = members(&small, "u010");
    let b = members(&large, "u010");
    assert!(a.iter().all(|u| b.contains(u)));
    let d1 = |x: &ResultBundle| x.get("u010.d1").unwrap().parse::<f64>().unwrap();
    assert!(d1(&small) <= d1(&large));

    let panel = load_panel(&input, &PanelSchema::default()).unwrap();
    let x0 = &panel.sample.covariates()[9];
    let lib = maximal_depth_set(&panel.sample, x0, 0.3, 0.8, KernelSpec::Indicator).unwrap();
    assert_eq!(small.get("u010.cutoff").unwrap(), lib.cutoff.to_string());

    let tiny = run("0.0001");
    assert_eq!(members(&tiny, "u010").len(), 1);
    assert_eq!(d1(&tiny), 0.0);
}

#[test]
fn spread_profile_rows_and_missing_points() {
    let dir = tempfile::tempdir().unwrap();
    // the last unit's covariate is far from the rest, so it has no neighbors
    let xs = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 10.0];
    let mut text = String::from("unit,time,x,y\n");
    for (i, x) in xs.iter().enumerate() {
        for t in 0..3 {
            let y = (i * 7 + t * 3) % 5;
            text.push_str(&format!("c{i},{t},{x},{y}\n"));
        }
    }
    let input = write_panel_text(&dir.path().join("p.csv"), &text);
    let out = p(dir.path(), "s.csv");
    ok(&["spread-profile", "--input", &input, "--out", &out, "--h", "1"]);
    let b = read(&out);
    assert_eq!(b.get("missing_count"), Some("1"));
    assert!(b.get("missing").unwrap().starts_with("c6@7"));
    let d2 = b.series("d2").unwrap();
    assert_eq!(d2.t.len(), xs.len() - 1);
    assert!(d2.t.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn cv_trace_contract() {
    let dir = tempfile::tempdir().unwrap();
    let input = simulate(dir.path(), 30, 6);
    let out = p(dir.path(), "cv.json");
    ok(&["cv", "--input", &input, "--out", &out, "--format", "json", "--grid", "1e-9,5"]);
    let b = read(&out);
    assert_eq!(b.get("h_opt"), Some("5"));
    let trace = b.series("score").unwrap();
    assert_eq!(trace.t, vec![1e-9, 5.0]);
    assert!(trace.v[0].is_nan());

    let out = p(dir.path(), "cv_auto.csv");
    ok(&["cv", "--input", &input, "--out", &out]);
    let b = read(&out);
    let trace = b.series("score").unwrap();
    assert_eq!(trace.t.len(), 10);
    let h_opt: f64 = b.get("h_opt").unwrap().parse().unwrap();
    let best = trace
        .t
        .iter()
        .zip(&trace.v)
        .filter(|(_, v)| v.is_finite())
        .min_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    assert_eq!(*best.0, h_opt);
}

#[test]
fn metadata_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let input = simulate(dir.path(), 30, 8);
    let first = p(dir.path(), "first.csv");
    ok(&["spread-profile", "--input", &input, "--out", &first, "--p", "0.4", "--h", "cv"]);
    let b = read(&first);
    let second: PathBuf = dir.path().join("second.csv");
    let h = b.get("h").unwrap().to_string();
    let out = Command::new(env!("CARGO_BIN_EXE_fq"))
        .env("FQ_THREADS", "1")
        .args([
            "spread-profile", "--input", b.get("input").unwrap(), "--out",
            second.to_str().unwrap(), "--p", b.get("p").unwrap(), "--h", &h,
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let again = read(second.to_str().unwrap());
    assert_eq!(again.series, b.series);
}
