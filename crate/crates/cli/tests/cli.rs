//! End-to-end runs of the `memsim` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_memsim");

const SERIES: &str = r#"
[series]
capacitance = 1e-6
resistances = [1e5, 1e4]
tau_up = 3e5
v_up = 0.02
tau_down = 3e5
v_down = 0.02
voltage = 0.35
"#;

const SERIES_NETLIST: &str = "\
V1 in 0 DC 0.35
M1 in mid STATES=2 R=100k,10k TAUUP=3e5 VUP=20m TAUDOWN=3e5 VDOWN=20m
C1 mid 0 1u
";

fn memsim(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

struct Csv {
    meta: Vec<(String, String)>,
    columns: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Csv {
    fn parse(text: &str) -> Self {
        let mut lines = text.lines();
        let meta = lines
            .next()
            .unwrap()
            .strip_prefix("# meta: ")
            .expect("meta line")
            .split(';')
            .map(|kv| {
                let (k, v) = kv.split_once('=').unwrap();
                (k.to_string(), v.to_string())
            })
            .collect();
        let columns = lines.next().unwrap().split(',').map(String::from).collect();
        let rows = lines
            .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
            .collect();
        Self {
            meta,
            columns,
            rows,
        }
    }

    fn meta(&self, key: &str) -> &str {
        &self
            .meta
            .iter()
            .find(|(k, _)| k == key)
            .unwrap_or_else(|| panic!("{key}"))
            .1
    }

    fn col(&self, name: &str) -> usize {
        self.columns
            .iter()
            .position(|c| c == name)
            .unwrap_or_else(|| panic!("{name}"))
    }

    /// Checks every declared probability group against the declared tolerance.
    fn assert_probability_sums(&self) {
        let tol: f64 = self.meta("prob_sum_tol").parse().unwrap();
        for group in self.meta("prob_groups").split(',') {
            let cols: Vec<usize> = group.split('+').map(|c| self.col(c)).collect();
            for row in &self.rows {
                let sum: f64 = cols.iter().map(|&c| row[c]).sum();
                assert!((sum - 1.0).abs() <= tol, "{group}: {sum} at t = {}", row[0]);
            }
        }
    }
}

fn simulate(dir: &Path, config: &str, extra: &[&str]) -> (Output, String) {
    let cfg = write(dir, "run.toml", config);
    let out = dir.join("out.csv");
    let mut args = vec![
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    let o = memsim(&args);
    let text = std::fs::read_to_string(&out).unwrap_or_default();
    (o, text)
}

#[test]
fn analytic_engine_reports_plateau_at_one_second() {
    let dir = tempfile::tempdir().unwrap();
    let config = format!("engine = \"analytic\"\nt_end = 1.0\noutput_interval = 0.25\n{SERIES}");
    let (o, text) = simulate(dir.path(), &config, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = Csv::parse(&text);
    assert_eq!(csv.columns, ["time", "p0", "p1"]);
    let last = csv.rows.last().unwrap();
    assert_eq!(last[0], 1.0);
    assert!((last[1] - 0.446).abs() < 1e-3, "p0(1 s) = {}", last[1]);
    csv.assert_probability_sums();
}

#[test]
fn compare_engine_aligns_three_columns_with_summary() {
    let dir = tempfile::tempdir().unwrap();
    let config = format!(
        "engine = \"compare\"\nt_end = 0.02\noutput_interval = 2e-3\n{SERIES}\n[mc]\nseed = 3\n"
    );
    let (o, text) = simulate(dir.path(), &config, &["--trajectories", "4000"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = Csv::parse(&text);
    for c in ["p0_analytic", "p0_pde", "p0_mc", "stderr_mc"] {
        csv.col(c);
    }
    assert_eq!(csv.rows.len(), 11);
    assert_eq!(csv.meta("trajectories"), "4000");
    let dev: f64 = csv.meta("max_abs_dev_pde").parse().unwrap();
    let z: f64 = csv.meta("max_z_mc").parse().unwrap();
    assert!(dev < 5e-3, "{dev}");
    assert!(z.is_finite() && z < 5.0, "{z}");
    let printed = stdout(&o);
    assert!(printed.contains("max_abs_dev_pde=") && printed.contains("max_z_mc="));
    let (a, p) = (csv.col("p0_analytic"), csv.col("p0_pde"));
    let observed = csv
        .rows
        .iter()
        .map(|r| (r[a] - r[p]).abs())
        .fold(0.0, f64::max);
    assert_eq!(observed, dev);
    csv.assert_probability_sums();
}

#[test]
fn pde_engine_handles_a_three_state_device() {
    let dir = tempfile::tempdir().unwrap();
    let config = format!("engine = \"pde\"\nt_end = 0.01\noutput_interval = 5e-3\n{SERIES}")
        .replace("[1e5, 1e4]", "[1e5, 3e4, 1e4]");
    let (o, text) = simulate(dir.path(), &config, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = Csv::parse(&text);
    assert_eq!(
        &csv.columns[..4],
        ["time", "p0", "p1", "p2"].map(String::from).as_slice()
    );
    csv.assert_probability_sums();
}

#[test]
fn mc_output_is_bit_identical_for_a_seed_and_changes_with_it() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "loop.net", SERIES_NETLIST);
    let config = "engine = \"mc\"\nt_end = 0.02\noutput_interval = 5e-3\nnetlist = \"loop.net\"\n\
                  [mc]\ntrajectories = 2000\nseed = 11\n";
    let (o1, first) = simulate(dir.path(), config, &[]);
    let (o2, second) = simulate(dir.path(), config, &[]);
    assert!(
        o1.status.success() && o2.status.success(),
        "{}",
        stderr(&o1)
    );
    assert_eq!(first, second);
    let csv = Csv::parse(&first);
    assert_eq!(csv.meta("seed"), "11");
    csv.assert_probability_sums();
    let (o3, third) = simulate(dir.path(), config, &["--seed", "12"]);
    assert!(o3.status.success());
    assert_eq!(Csv::parse(&third).meta("seed"), "12");
    assert_ne!(first, third);
}

#[test]
fn csv_goes_to_stdout_without_an_output_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "run.toml",
        &format!("engine = \"analytic\"\nt_end = 0.01\noutput_times = [0.0, 0.01]\n{SERIES}"),
    );
    let o = memsim(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success());
    let csv = Csv::parse(&stdout(&o));
    assert_eq!(csv.rows.len(), 2);
}

#[test]
fn malformed_config_exits_2_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (format!("engine = \"analytic\"\nt_end = -1.0\noutput_interval = 0.1\n{SERIES}"), "t_end"),
        (format!("engine = \"analytic\"\nt_end = 1.0\n{SERIES}"), "output_interval"),
        (format!("engine = \"analytic\"\nt_end = 1.0\noutput_interval = 0.1\ncolour = 1\n{SERIES}"), "colour"),
        (
            format!("engine = \"mc\"\nt_end = 1.0\noutput_interval = 0.1\n{SERIES}\n[mc]\ntrajectories = 0\n"),
            "mc.trajectories",
        ),
        ("engine = \"mc\"\nt_end = 1.0\noutput_interval = 0.1\nnetlist = \"missing.net\"\n".into(), "netlist"),
    ];
    for (config, field) in cases {
        let (o, _) = simulate(dir.path(), &config, &[]);
        assert_eq!(o.status.code(), Some(2), "{field}: {}", stderr(&o));
        assert!(stderr(&o).contains(field), "{field}: {}", stderr(&o));
    }
    let o = memsim(&["simulate", "--config", "/nonexistent/run.toml"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_netlist_in_config_exits_2_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "bad.net", "V1 a 0 DC 1\nR1 a 0 banana\n");
    let config = "engine = \"mc\"\nt_end = 1.0\noutput_interval = 0.1\nnetlist = \"bad.net\"\n";
    let (o, _) = simulate(dir.path(), config, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn engine_failure_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    // the charge grid ends below the capacitor's final charge
    let config = format!(
        "engine = \"pde\"\nt_end = 0.01\noutput_interval = 5e-3\n{SERIES}\n[pde]\nq_min = 0.0\nq_max = 1e-7\n"
    );
    let (o, _) = simulate(dir.path(), &config, &[]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).contains("pde"));
}

#[test]
fn reproduce_relaxation_rows_sum_to_one_and_flatten() {
    let dir = tempfile::tempdir().unwrap();
    let o = memsim(&["reproduce", "fig2", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = Csv::parse(&std::fs::read_to_string(dir.path().join("fig2.csv")).unwrap());
    assert_eq!(csv.rows.first().unwrap()[0], 0.0);
    assert_eq!(csv.rows.last().unwrap()[0], 0.03);
    for row in &csv.rows {
        assert!((row[1] + row[2] - 1.0).abs() <= 1e-12);
    }
    let n = csv.rows.len();
    let (early, late) = (csv.rows[n / 10][1], csv.rows[n - 1][1]);
    let tail_drop = csv.rows[n - 11][1] - csv.rows[n - 1][1];
    assert!(late > 0.44 && late < 0.46, "{late}");
    assert!(tail_drop < 0.01 * (1.0 - early));
    let dat = std::fs::read_to_string(dir.path().join("fig2.dat")).unwrap();
    assert_eq!(dat.lines().filter(|l| !l.starts_with('#')).count(), n);
}

#[test]
fn reproduce_decay_table_carries_mean_switching_time() {
    let dir = tempfile::tempdir().unwrap();
    let o = memsim(&["reproduce", "fig3", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = Csv::parse(&std::fs::read_to_string(dir.path().join("fig3.csv")).unwrap());
    let mean: f64 = csv.meta("mean_switching_time").parse().unwrap();
    assert!((mean - 5.3e-3).abs() <= 0.1e-3, "{mean}");
    let (t, e) = (csv.col("time"), csv.col("exp_decay"));
    for row in &csv.rows {
        assert_eq!(row[e], (-row[t] / mean).exp());
    }
    assert!(dir.path().join("fig3.dat").exists());
}

#[test]
fn netlist_check_accepts_a_series_loop() {
    let dir = tempfile::tempdir().unwrap();
    let net = write(dir.path(), "loop.net", SERIES_NETLIST);
    let o = memsim(&["netlist-check", net.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.starts_with("OK\n"));
    assert!(out.contains("nodes: 2"));
}

#[test]
fn netlist_check_rejects_inductors_and_floating_nodes() {
    let dir = tempfile::tempdir().unwrap();
    let inductor = write(dir.path(), "l.net", "V1 a 0 DC 1\nL1 a 0 1m\n");
    let o = memsim(&["netlist-check", inductor.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(
        stderr(&o).contains("inductors not supported"),
        "{}",
        stderr(&o)
    );

    let floating = write(
        dir.path(),
        "f.net",
        &format!("{SERIES_NETLIST}R9 island1 island2 1k\n"),
    );
    let o = memsim(&["netlist-check", floating.to_str().unwrap()]);
    assert_ne!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("island1"), "{}", stderr(&o));
}

#[test]
fn netlist_check_reports_unsolvable_operating_point() {
    let dir = tempfile::tempdir().unwrap();
    let net = write(dir.path(), "v.net", "V1 a 0 DC 1\nV2 a 0 DC 2\nR1 a 0 1k\n");
    let o = memsim(&["netlist-check", net.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).contains("operating point"));
}
