use std::path::PathBuf;

use sixstate_cli::run;

fn exec(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("sixstate").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn tmp_file(name: &str, contents: &str) -> PathBuf {
    let path = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

struct Table {
    header: Vec<String>,
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn parse_csv(text: &str) -> Table {
    let header = text.lines().filter_map(|l| l.strip_prefix("# ")).map(str::to_string).collect();
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let columns = reader.headers().unwrap().iter().map(str::to_string).collect();
    let rows = reader.records().map(|r| r.unwrap().iter().map(str::to_string).collect()).collect();
    Table { header, columns, rows }
}

impl Table {
    fn col(&self, row: usize, name: &str) -> &str {
        let i = self.columns.iter().position(|c| c == name).unwrap();
        &self.rows[row][i]
    }

    fn num(&self, row: usize, name: &str) -> Option<f64> {
        let s = self.col(row, name);
        (!s.is_empty()).then(|| s.parse().unwrap())
    }

    /// Header lines that are settings, ready to be used as a config file.
    fn as_config(&self) -> String {
        self.header
            .iter()
            .filter(|l| l.contains(" = "))
            .filter(|l| !["sweep", "values", "asymptotic"].iter().any(|k| l.starts_with(&format!("{k} ="))))
            .map(|l| format!("{l}\n"))
            .collect()
    }
}

#[test]
fn rate_feasible_point() {
    let (code, out, _) = exec(&[
        "rate", "--L", "20", "--N", "1e10", "--eta-d", "1", "--eta-m", "0", "--eps", "1e-9", "--eps-ec", "1e-10",
        "--fec", "1.2",
    ]);
    assert_eq!(code, 0);
    let t = parse_csv(&out);
    let rate = t.num(0, "rate").unwrap();
    assert!(rate > 0.05 && rate < 0.15, "{rate}");
    assert_eq!(t.col(0, "N_source"), "10000000000");
    assert!(t.header.iter().any(|l| l.starts_with("breakdown.leak_ec_bits = ")));
}

#[test]
fn budget_violation_exits_1() {
    let (code, out, err) = exec(&["rate", "--eps", "1e-9", "--eps-ec", "2e-9"]);
    assert_eq!(code, 1);
    assert!(out.is_empty());
    assert!(err.contains("budget"), "{err}");
}

#[test]
fn high_misalignment_exits_2() {
    let (code, out, _) = exec(&["rate", "--eta-m", "0.45", "--N", "1e9"]);
    assert_eq!(code, 2);
    let t = parse_csv(&out);
    assert_eq!(t.col(0, "rate"), "");
    assert_eq!(t.col(0, "key_bits"), "");
}

#[test]
fn invalid_inputs_exit_1() {
    for args in [
        &["rate", "--eta-d", "1.5"][..],
        &["rate", "--N", "1.5"],
        &["rate", "--lambda", "abc"],
        &["rate", "--px", "0.5"],
        &["rate", "--bogus"],
        &["sweep", "--var", "L", "--values", "30,20,40"],
        &["simulate", "--pulses", "1e5"],
        &["frobnicate"],
    ] {
        let (code, _, err) = exec(args);
        assert_eq!(code, 1, "{args:?}");
        assert!(!err.is_empty(), "{args:?}");
    }
}

#[test]
fn help_exits_0() {
    let (code, out, _) = exec(&["--help"]);
    assert_eq!(code, 0);
    for cmd in ["rate", "asymptotic", "sweep", "min-pulses", "simulate", "threshold"] {
        assert!(out.contains(cmd), "{cmd}");
    }
}

#[test]
fn flags_override_config() {
    let cfg = tmp_file("override.conf", "# test setup\nL = 30\neta-d = 0.5\neta_m = 0.02 # inline\n");
    let (code, out, _) = exec(&["asymptotic", "--config", cfg.to_str().unwrap(), "--L", "40"]);
    assert_eq!(code, 0);
    let t = parse_csv(&out);
    assert!(t.header.contains(&"L = 4e1".to_string()));
    assert!(t.header.contains(&"eta-d = 5e-1".to_string()));
    assert!(t.header.contains(&"eta-m = 2e-2".to_string()));
    assert_eq!(t.num(0, "L_km"), Some(40.0));

    let bad = tmp_file("bad.conf", "wavelength = 1550\n");
    assert_eq!(exec(&["rate", "--config", bad.to_str().unwrap()]).0, 1);
}

#[test]
fn sweep_rows_reproduce_through_rate() {
    let (code, out, _) = exec(&[
        "sweep",
        "--var",
        "L",
        "--values",
        "5,25,60,200",
        "--N",
        "1e9",
        "--eta-d",
        "0.4",
        "--eta-m",
        "0.01",
        "--jobs",
        "3",
    ]);
    assert_eq!(code, 0);
    let t = parse_csv(&out);
    assert_eq!(t.rows.len(), 4);
    // far end has no key
    assert_eq!(t.col(3, "rate"), "");
    let cfg = tmp_file("roundtrip.conf", &t.as_config());
    for i in 0..t.rows.len() {
        let (_, again, _) = exec(&["rate", "--config", cfg.to_str().unwrap(), "--L", t.col(i, "L_km")]);
        let r = parse_csv(&again);
        assert_eq!(r.columns, t.columns);
        assert_eq!(r.rows[0], t.rows[i], "row {i}");
    }
}

#[test]
fn lambda_sweep_round_trips_with_fixed_lambda() {
    let (_, out, _) = exec(&["sweep", "--var", "lambda", "--range", "0.01,1,4,log", "--N", "1e10", "--L", "30"]);
    let t = parse_csv(&out);
    let cfg = tmp_file("lambda.conf", &t.as_config());
    for i in 0..t.rows.len() {
        let lambda = t.col(i, "lambda_opt");
        let (_, again, _) = exec(&["rate", "--config", cfg.to_str().unwrap(), "--lambda", lambda]);
        assert_eq!(parse_csv(&again).rows[0], t.rows[i]);
    }
}

#[test]
fn sweep_output_independent_of_jobs() {
    let args = |jobs: &'static str| {
        ["sweep", "--var", "N", "--range", "1e7,1e11,5,log", "--L", "50", "--eta-d", "0.3", "--jobs", jobs]
    };
    let (_, one, _) = exec(&args("1"));
    let (_, four, _) = exec(&args("4"));
    let strip = |s: &str| s.lines().filter(|l| !l.starts_with("# jobs")).collect::<Vec<_>>().join("\n");
    assert_eq!(strip(&one), strip(&four));
}

#[test]
fn simulate_is_deterministic() {
    let args = ["simulate", "--pulses", "1e6", "--seed", "42", "--lambda", "0.1", "--eta-d", "0.5", "--eta-m", "0.03"];
    let (c1, a, _) = exec(&args);
    let (c2, b, _) = exec(&args);
    assert_eq!((c1, c2), (0, 0));
    assert_eq!(a, b);
    let (_, c, _) = exec(&["simulate", "--pulses", "1e6", "--seed", "43", "--lambda", "0.1", "--eta-d", "0.5"]);
    assert_ne!(a, c);
}

#[test]
fn perfect_simulation_has_no_qber_z_scores() {
    let (code, out, _) = exec(&["simulate", "--pulses", "2e5", "--seed", "1", "--lambda", "0.2", "--L", "0"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let cmp = &v["comparison"];
    assert_eq!(cmp["qber_pooled"], 0.0);
    assert!(cmp["qber_pooled_z"].is_null());
    assert!(cmp["qber_by_basis_z"].as_array().unwrap().iter().all(|z| z.is_null()));
    assert!(cmp["p11_z"].is_number());
}

#[test]
fn json_mirrors_csv() {
    let (_, csv_out, _) = exec(&["rate", "--N", "1e9", "--L", "10"]);
    let (_, json_out, _) = exec(&["rate", "--N", "1e9", "--L", "10", "--format", "json"]);
    let t = parse_csv(&csv_out);
    let v: serde_json::Value = serde_json::from_str(&json_out).unwrap();
    let row = &v["rows"][0];
    for c in &t.columns {
        let cell = t.col(0, c);
        match &row[c.as_str()] {
            serde_json::Value::Null => assert_eq!(cell, ""),
            serde_json::Value::Number(n) => assert_eq!(n.as_f64().unwrap(), cell.parse::<f64>().unwrap(), "{c}"),
            other => panic!("{c}: {other}"),
        }
    }
    assert!(v["details"]["breakdown"]["entropy_bits"].is_number());
}

#[test]
fn asymptotic_rate_falls_with_distance() {
    let (_, out, _) = exec(&["sweep", "--var", "L", "--range", "20,140,7", "--asymptotic"]);
    let t = parse_csv(&out);
    let rates: Vec<f64> = (0..7).map(|i| t.num(i, "rate").unwrap()).collect();
    assert!(rates.windows(2).all(|w| w[1] < w[0]), "{rates:?}");
}

#[test]
fn qber_crosses_threshold_in_lambda() {
    let (_, th, _) = exec(&["threshold"]);
    let e_star: f64 = th.lines().nth(1).unwrap().parse().unwrap();
    let (_, out, _) = exec(&[
        "sweep",
        "--var",
        "lambda",
        "--range",
        "0.001,10,30,log",
        "--asymptotic",
        "--L",
        "20",
        "--eta-m",
        "0.03",
    ]);
    let t = parse_csv(&out);
    let e: Vec<f64> = (0..30).map(|i| t.num(i, "e_pdc").unwrap()).collect();
    assert!(e.windows(2).all(|w| w[1] >= w[0]));
    assert!(e[0] < e_star && e[29] > e_star);
    for (i, &ei) in e.iter().enumerate() {
        // no key above the threshold
        if ei > e_star {
            assert_eq!(t.col(i, "rate"), "");
        }
    }
}

#[test]
fn finite_rate_approaches_asymptote() {
    for l in ["20", "100"] {
        let (_, asym, _) = exec(&["asymptotic", "--L", l]);
        let limit = parse_csv(&asym).num(0, "rate").unwrap();
        // the asymptotic rate assumes Shannon-limit error correction
        let (_, out, _) = exec(&["sweep", "--var", "N", "--range", "1e8,1e16,5,log", "--L", l, "--fec", "1"]);
        let t = parse_csv(&out);
        let rates: Vec<f64> = (0..5).map(|i| t.num(i, "rate").unwrap_or(0.0)).collect();
        assert!(rates.windows(2).all(|w| w[1] >= w[0]), "{rates:?}");
        assert!(rates.iter().all(|&r| r < limit));
        assert!((limit - rates[4]) / limit < 0.02, "{rates:?} vs {limit}");
    }
}

#[test]
fn min_pulses_row_is_feasible() {
    let (code, out, _) = exec(&["min-pulses", "--L", "20", "--target", "1000"]);
    assert_eq!(code, 0);
    let t = parse_csv(&out);
    assert!(t.num(0, "key_bits").unwrap() >= 1000.0);
    let n: u64 = t.col(0, "N_source").parse().unwrap();
    let (_, below, _) = exec(&["rate", "--L", "20", "--N", &(n - 1).to_string()]);
    let key = parse_csv(&below).num(0, "key_bits").unwrap_or(0.0);
    assert!(key < 1000.0);
}

#[test]
fn min_pulses_infeasible_exits_2() {
    let (code, _, err) = exec(&["min-pulses", "--eta-m", "0.2"]);
    assert_eq!(code, 2);
    assert!(err.contains("infeasible"));
}
