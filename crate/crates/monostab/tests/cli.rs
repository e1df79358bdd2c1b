//! End-to-end runs of the `monostab` binary: exit codes, report contents,
//! CSV layouts and determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_monostab"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn run_in(args: &[&str], paths: &[&Path]) -> Output {
    let mut cmd = bin();
    cmd.args(args);
    for p in paths {
        cmd.arg(p);
    }
    cmd.output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn field(report: &str, key: &str) -> Option<String> {
    report.lines().find_map(|l| {
        let (k, v) = l.split_once(char::is_whitespace)?;
        (k == key).then(|| v.trim().to_string())
    })
}

fn write(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn check_monotone_exit_codes() {
    let ok = run(&["check-monotone", p(&config("planar.toml"))]);
    assert_eq!(code(&ok), 0, "{}", stderr(&ok));
    assert_eq!(field(&stdout(&ok), "status").as_deref(), Some("PASS"));

    let bad = run(&["check-monotone", p(&config("competitive.toml"))]);
    assert_eq!(code(&bad), 1);
    assert_eq!(field(&stdout(&bad), "witness_entry").as_deref(), Some("d f1/d x2"));

    let delayed = run(&["check-monotone", "--grid", "9", p(&config("planar_delayed.toml"))]);
    assert_eq!(code(&delayed), 0);
    assert_eq!(field(&stdout(&delayed), "condition").as_deref(), Some("assumption2"));

    let linear = run(&["check-monotone", p(&config("linear.toml"))]);
    assert_eq!(code(&linear), 0);

    let missing = run(&["check-monotone", "/definitely/not/here.toml"]);
    assert_eq!(code(&missing), 2);
}

#[test]
fn psi_transform_is_checked() {
    let ok = run(&["check-monotone", p(&config("planar.toml"))]);
    let out = stdout(&ok);
    assert_eq!(field(&out, "psi_status").as_deref(), Some("PASS"), "{out}");
    assert_eq!(out.lines().filter(|l| l.starts_with("status ")).count(), 1, "{out}");

    let dir = TempDir::new().unwrap();
    let delayed = write(
        &dir,
        "psi.toml",
        "dimension = 1\ng = [\"-y1\"]\nbox = [1.0]\npsi = [\"y1\"]\n",
    );
    let bad = run(&["check-monotone", p(&delayed)]);
    assert_eq!(code(&bad), 2);
    assert!(stderr(&bad).contains("psi.toml:4:"), "{}", stderr(&bad));
}

#[test]
fn config_errors_report_file_and_line() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "broken.toml", "dimension = 2\nf = [\"-x1\", \"-x2 +\"]\nbox = [1.0, 1.0]\n");
    let out = run_in(&["check-monotone"], &[&cfg]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("broken.toml:2:"), "{}", stderr(&out));

    let cfg = write(&dir, "typo.toml", "dimension = 1\nf = [\"-x1\"]\nbax = [1.0]\n");
    let out = run_in(&["check-monotone"], &[&cfg]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("typo.toml:3:"), "{}", stderr(&out));
}

#[test]
fn certify_path_reports_box_and_table() {
    let dir = TempDir::new().unwrap();
    let table = dir.path().join("v.csv");
    let out = run(&[
        "certify",
        p(&config("planar.toml")),
        "--method",
        "path",
        "--emit-lyap",
        p(&table),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rep = stdout(&out);
    assert_eq!(field(&rep, "status").as_deref(), Some("CERTIFIED"));
    assert_eq!(field(&rep, "roa_box").as_deref(), Some("4 2"));
    assert_eq!(field(&rep, "decrease_violations").as_deref(), Some("0"));

    let csv = std::fs::read_to_string(&table).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("i,x_i,V_i,dV_i"));
    // V_2(x_2) = x_2^2 at the box edge.
    let last: Vec<f64> = lines.last().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(last[0], 2.0);
    assert!((last[1] - 2.0).abs() < 1e-12 && (last[2] - 4.0).abs() < 1e-9, "{last:?}");
}

#[test]
fn certify_w_stalled_is_inconclusive() {
    let out = run(&["certify", p(&config("stalled.toml")), "--method", "w"]);
    assert_eq!(code(&out), 1);
    let rep = stdout(&out);
    assert_eq!(field(&rep, "status").as_deref(), Some("INCONCLUSIVE"));
    let terminal: f64 = field(&rep, "terminal").unwrap().parse().unwrap();
    assert!((terminal - 1.0).abs() < 1e-4);
}

#[test]
fn certify_linear_returns_feasible_w() {
    let out = run(&["certify", p(&config("linear.toml")), "--method", "linear", "--format", "csv"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rep = stdout(&out);
    let w_line = rep.lines().find(|l| l.starts_with("w,")).expect("w row");
    let w: Vec<f64> = w_line[2..].split(' ').map(|v| v.parse().unwrap()).collect();
    let a = [
        [-3.0, 1.0, 0.5, 0.0],
        [0.2, -2.0, 0.3, 0.1],
        [0.0, 1.0, -4.0, 2.0],
        [0.5, 0.0, 0.7, -1.5],
    ];
    assert_eq!(w.len(), 4);
    assert!(w.iter().all(|v| *v > 0.0));
    for row in a {
        let aw: f64 = row.iter().zip(&w).map(|(x, y)| x * y).sum();
        assert!(aw < 0.0, "Aw = {aw}");
    }

    let dir = TempDir::new().unwrap();
    let unstable = write(&dir, "u.toml", "dimension = 2\n[linear]\nA = [[-1.0, 2.0], [2.0, -1.0]]\n");
    let out = run_in(&["certify", "--method", "linear"], &[&unstable]);
    assert_eq!(code(&out), 1);
    assert_eq!(field(&stdout(&out), "status").as_deref(), Some("REJECTED"));

    let out = run(&["certify", p(&config("planar.toml")), "--method", "linear"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn certify_delayed_config_reports_delay_box() {
    for method in ["path", "w"] {
        let out = run(&["certify", p(&config("planar_delayed.toml")), "--method", method]);
        assert_eq!(code(&out), 0, "{method}: {}", stderr(&out));
        assert_eq!(field(&stdout(&out), "delay_roa_box").as_deref(), Some("4 2"), "{method}");
    }
}

// Reference: fixed-step RK4 (h = 5e-4) with Hermite interpolation of the
// retarded argument x(t/2), cross-checked against h = 1e-3.
const PROP_HALF_REFERENCE: [(f64, [f64; 2]); 3] = [
    (1.0, [0.29285787027037113, 0.9808020377892167]),
    (2.0, [0.007065277160319968, 0.5517118167223847]),
    (5.0, [8.58365105695439e-09, 0.14901306345004403]),
];

#[test]
fn simulate_writes_trajectory_matching_reference() {
    let dir = TempDir::new().unwrap();
    for (t_end, x) in PROP_HALF_REFERENCE {
        let traj = dir.path().join(format!("t{t_end}.csv"));
        let out = run(&[
            "simulate",
            p(&config("planar_delayed.toml")),
            "--law",
            "prop:0.5",
            "--tend",
            &t_end.to_string(),
            "--rtol",
            "1e-10",
            "--atol",
            "1e-12",
            "--out",
            p(&traj),
        ]);
        assert!(code(&out) <= 1, "{}", stderr(&out));
        let csv = std::fs::read_to_string(&traj).unwrap();
        assert!(csv.starts_with("t,x1,x2\n"));
        let last: Vec<f64> = csv.lines().last().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(last[0], t_end);
        for i in 0..2 {
            assert!((last[i + 1] - x[i]).abs() < 1e-6, "t={t_end}: {last:?} vs {x:?}");
        }
    }

    let out = run(&["simulate", p(&config("planar_delayed.toml")), "--law", "prop:0.5"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

#[test]
fn simulate_guards() {
    let out = run(&["simulate", p(&config("planar_delayed.toml")), "--law", "prop:1.0"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("t - tau(t)"), "{}", stderr(&out));

    let out = run(&["simulate", p(&config("planar_delayed.toml")), "--tend", "0"]);
    assert_eq!(code(&out), 2);

    let out = run(&["simulate", p(&config("planar.toml")), "--law", "const:1"]);
    assert_eq!(code(&out), 2);

    let out = run(&["simulate", p(&config("stalled.toml")), "--tend", "50"]);
    assert_eq!(code(&out), 1);
    assert_eq!(field(&stdout(&out), "verdict").as_deref(), Some("not-converged"));
}

#[test]
fn sweep_exit_codes_and_csv() {
    let dir = TempDir::new().unwrap();
    let report = dir.path().join("sweep.csv");
    let out = run(&[
        "sweep",
        p(&config("planar_delayed.toml")),
        "--laws",
        p(&config("laws.txt")),
        "--out",
        p(&report),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = std::fs::read_to_string(&report).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("law_id,converged,t_converge,max_excursion,terminal_norm"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[0].starts_with("const:0,true,"));
    assert!(rows[3].starts_with("prop:0.5,true,"));

    let empty = write(&dir, "empty.txt", "# nothing here\n\n");
    let out = run_in(&["sweep", p(&config("planar_delayed.toml")), "--laws"], &[&empty]);
    assert_eq!(code(&out), 0);
    assert_eq!(field(&stdout(&out), "laws").as_deref(), Some("0"));

    let bad = write(&dir, "bad.txt", "const:1\nprop:abc\n");
    let out = run_in(&["sweep", p(&config("planar_delayed.toml")), "--laws"], &[&bad]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("bad.txt:2:"), "{}", stderr(&out));

    // Trajectories settle at x = 1, not the origin.
    let stuck = write(&dir, "stuck.toml", "dimension = 1\ng = [\"-x1*(y1 - 1)\"]\nbox = [2.0]\n");
    let laws = write(&dir, "laws.txt", "const:0\nconst:0.5\n");
    let out = run_in(&["sweep", "--tend", "50"], &[&stuck, Path::new("--laws"), &laws]);
    assert_eq!(code(&out), 1, "{}", stderr(&out));
    assert_eq!(field(&stdout(&out), "status").as_deref(), Some("FAIL"));
}

#[test]
fn compare_writes_bound_table() {
    let dir = TempDir::new().unwrap();
    let table = dir.path().join("gbar.csv");
    let out = run(&[
        "compare",
        p(&config("comparison.toml")),
        "--laws",
        p(&config("laws.txt")),
        "--tend",
        "60",
        "--table",
        p(&table),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(field(&stdout(&out), "status").as_deref(), Some("PASS"));
    let csv = std::fs::read_to_string(&table).unwrap();
    assert!(csv.starts_with("i,x1,x2,H,D\n"));
    assert_eq!(csv.lines().count(), 1 + 2 * 32 * 32);
}

#[test]
fn fixed_seed_output_is_byte_identical() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "search.toml", "dimension = 2\nf = [\"-5*x1 + x1*x2^2\", \"x1 - 2*x2^2\"]\nbox = [4.0, 2.0]\n");
    let certify = |seed: &str| {
        let out = run_in(&["certify", "--method", "w", "--seed", seed, "--trials", "300", "--format", "csv"], &[&cfg]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        out.stdout
    };
    assert_eq!(certify("7"), certify("7"));

    let report = dir.path().join("sweep.csv");
    let sweep = |threads: &str| {
        let out = run(&[
            "sweep",
            p(&config("planar_delayed.toml")),
            "--laws",
            p(&config("laws.txt")),
            "--threads",
            threads,
            "--format",
            "csv",
            "--out",
            p(&report),
        ]);
        assert_eq!(code(&out), 0);
        (out.stdout, std::fs::read(&report).unwrap())
    };
    let one = sweep("1");
    assert_eq!(one, sweep("4"));
    assert_eq!(one, sweep("4"));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(code(&run(&[])), 2);
    assert_eq!(code(&run(&["certify", p(&config("planar.toml"))])), 2);
    assert_eq!(code(&run(&["--format", "xml", "check-monotone", p(&config("planar.toml"))])), 2);
    assert_eq!(code(&run(&["--help"])), 0);
}
