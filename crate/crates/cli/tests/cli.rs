use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn smeared(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_smeared"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn field(json: &str, key: &str) -> f64 {
    let v: serde_json::Value = serde_json::from_str(json).unwrap();
    v[key].as_f64().unwrap()
}

#[test]
fn convert_reproduces_worked_numbers() {
    let o = smeared(&["convert", "g", "0.7"]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(s.ends_with('\n'));
    assert_eq!(field(&s, "g"), 0.7);
    assert!((field(&s, "tr_cl") - 0.3).abs() < 1e-15);
    assert!((field(&s, "tau") - 1.2040).abs() < 5e-5);
    assert!((field(&s, "abs") - 0.5229).abs() < 5e-5);

    let o = smeared(&["convert", "abs", "1"]);
    assert!(o.status.success());
    assert!((field(&stdout(&o), "g") - 0.9).abs() < 1e-15);
}

#[test]
fn convert_rejects_out_of_range_with_status_2() {
    for args in [
        ["convert", "tau", "0"],
        ["convert", "g", "1.5"],
        ["convert", "what", "0.5"],
    ] {
        let o = smeared(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(o.stdout.is_empty());
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn single_rows() {
    let o = smeared(&[
        "single",
        "--stdev",
        "1",
        "--g",
        "0.7",
        "--offset-min",
        "-3",
        "--offset-max",
        "3",
        "--points",
        "7",
    ]);
    assert!(o.status.success());
    let s = stdout(&o);
    let lines: Vec<&str> = s.lines().collect();
    assert_eq!(lines[0], "offset,p_v,tr");
    assert_eq!(lines.len(), 8);
    assert_eq!(lines[4], "0,0.682689492137,0.522117355504");
    let trs: Vec<f64> = lines[1..]
        .iter()
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    let min = trs.iter().cloned().fold(f64::INFINITY, f64::min);
    assert_eq!(min, trs[3]);

    let o = smeared(&[
        "single",
        "--stdev",
        "1e-8",
        "--g",
        "0.7",
        "--offset-min",
        "-1",
        "--offset-max",
        "1",
        "--points",
        "3",
    ]);
    assert!(stdout(&o).lines().any(|l| l == "0,1,0.3"));
}

#[test]
fn single_reads_density_tables() {
    let dir = tempfile::tempdir().unwrap();
    // triangular density on [-1, 1]
    let mut table = String::from("x,density\n");
    for i in 0..=200 {
        let x = -1.0 + i as f64 * 0.01;
        table.push_str(&format!("{x},{}\n", 1.0 - f64::abs(x)));
    }
    let path = write_config(dir.path(), "tri.csv", &table);
    let o = smeared(&[
        "single",
        "--table",
        path.to_str().unwrap(),
        "--g",
        "1",
        "--r",
        "0.5",
        "--points",
        "2",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = stdout(&o);
    assert_eq!(s.lines().count(), 3);
}

#[test]
fn single_usage_errors() {
    let cases: [&[&str]; 4] = [
        &["single", "--stdev", "1", "--g", "0.7", "--points", "1"],
        &[
            "single",
            "--stdev",
            "1",
            "--g",
            "0.7",
            "--offset-min",
            "2",
            "--offset-max",
            "1",
        ],
        &["single", "--g", "0.7"],
        &["single", "--stdev", "1", "--g", "0"],
    ];
    for args in cases {
        assert_eq!(smeared(args).status.code(), Some(2), "{args:?}");
    }
}

const LINE_CLOUD: &str = r#"
models = ["nonlocal", "pilotwave", "classic", "closed_limit"]

[opacity]
kind = "g"
value = 0.7

[cloud]
n_particles = 61

[spread]
min = 1e-3
max = 1e6
points = 91
"#;

#[test]
fn curve_is_deterministic_and_well_formed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "line.conf", LINE_CLOUD);
    let out1 = dir.path().join("a.csv");
    let out2 = dir.path().join("b.csv");
    for out in [&out1, &out2] {
        let o = smeared(&[
            "curve",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(o.stdout.is_empty());
    }
    let a = std::fs::read(&out1).unwrap();
    assert_eq!(a, std::fs::read(&out2).unwrap());
    assert!(!a.contains(&b'\r'));

    let text = String::from_utf8(a).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("stdev,nonlocal,pilotwave,classic,closed_limit,mass_sum")
    );
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 91);
    assert!((rows[0][1] - 0.3).abs() < 1e-9);
    let near_limit = rows
        .iter()
        .filter(|r| r[5] > 0.99)
        .map(|r| r[1])
        .fold(0.0, f64::max);
    assert!((near_limit - 0.4966).abs() < 0.01, "{near_limit}");
    let last = rows.last().unwrap();
    assert!(last[1] > 0.999 && last[5] < 1e-3);
    for r in &rows {
        assert_eq!(r[3], 0.3);
        assert!((r[4] - 0.496585303791).abs() < 1e-12);
    }
}

#[test]
fn curve_omits_unrequested_models() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.conf",
        "models = [\"closed_limit\", \"nonlocal\"]\n[opacity]\nkind = \"tau\"\nvalue = 1.0\n[cloud]\nn_particles = 5\n[spread]\nstdev = 2.0\n",
    );
    let o = smeared(&["curve", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert_eq!(
        s.lines().next(),
        Some("stdev,nonlocal,closed_limit,mass_sum")
    );
    assert_eq!(s.lines().count(), 2);
}

#[test]
fn curve_handles_segmented_and_projected_clouds() {
    let dir = tempfile::tempdir().unwrap();
    let seg = "[[cloud.segment]]\nnumber_density = 1.0\ncross_section = 1e-3\nthickness = 1386.2943611198906\ntransverse_extent = 121.0\n";
    let cfg = write_config(
        dir.path(),
        "seg.conf",
        &format!("[cloud]\nlayers = 2\n{seg}[spread]\nstdev = 20.0\n"),
    );
    let o = smeared(&["curve", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = stdout(&o);
    let row: Vec<f64> = s
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    // two layers of g = 1/2 plateau at e^-1
    assert!((row[1] / (-1.0f64).exp() - 1.0).abs() < 0.01, "{s}");
    assert!((row[3] - 0.25).abs() < 1e-12);
    assert!((row[4] - (-1.0f64).exp()).abs() < 1e-12);

    let cfg = write_config(
        dir.path(),
        "sq.conf",
        &format!(
            "[detector]\nshape = \"square_2d\"\n[cloud]\ndimensionality = \"d2_projected\"\nlayers = 1\n{}[spread]\nmin = 1e-3\nmax = 1e3\npoints = 7\n",
            seg.replace("121.0", "21.0").replace("1386.2943611198906", "700.0")
        ),
    );
    let o = smeared(&["curve", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = stdout(&o);
    let first: Vec<f64> = s
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    assert!((first[1] - (-0.7f64).exp()).abs() < 1e-9, "{s}");
}

#[test]
fn config_errors_exit_2_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.conf",
        "[opacity]\nkind = \"g\"\nvalue = 0.7\n[spread]\nmin = 1.0\nmax = 10.0\nwidth = 3\n",
    );
    let o = smeared(&["curve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 7") && err.contains("width"), "{err}");

    let missing = dir.path().join("nope.conf");
    assert_eq!(
        smeared(&["curve", "--config", missing.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(smeared(&["curve"]).status.code(), Some(2));
    assert_eq!(smeared(&["frobnicate"]).status.code(), Some(2));

    let no_mc = write_config(dir.path(), "nomc.conf", "[verify]\nn = [1]\n");
    assert_eq!(
        smeared(&["verify", "--config", no_mc.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
}

const SMALL_VERIFY: &str = "[mc]\nsamples = 10000\nseed = 7\nbatches = 4\n[verify]\nn = [1, 3]\nstdev = [1e-8, 1.0]\ng = [0.7]\n";

#[test]
fn verify_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "v.conf", SMALL_VERIFY);
    let a = smeared(&["verify", "--config", cfg.to_str().unwrap()]);
    let b = smeared(&["verify", "--config", cfg.to_str().unwrap()]);
    assert_eq!(
        a.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&a.stderr)
    );
    assert_eq!(a.stdout, b.stdout);
    let s = stdout(&a);
    assert_eq!(s.matches("\"estimate\"").count(), 8);
    assert_eq!(s.matches("\"seed\": 7").count(), 8);
    let err = String::from_utf8_lossy(&a.stderr);
    assert!(
        err.contains("nonlocal n=3 stdev=1 g=0.7") && err.contains("coverage n=1"),
        "{err}"
    );

    let other = write_config(
        dir.path(),
        "w.conf",
        &SMALL_VERIFY.replace("seed = 7", "seed = 8"),
    );
    let c = smeared(&["verify", "--config", other.to_str().unwrap()]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn verify_fails_with_status_3_when_estimates_disagree() {
    // ten photons against TR = 0.52: this seed lets only one through, a 4.45 sigma miss
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "v.conf",
        "[mc]\nsamples = 10\nseed = 15\nbatches = 1\n[verify]\nn = [1]\nstdev = [1.0]\ng = [0.7]\n",
    );
    let o = smeared(&["verify", "--config", cfg.to_str().unwrap()]);
    assert_eq!(
        o.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(stdout(&o).starts_with('['));
}

#[test]
fn shipped_curve_configs_run() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in [
        "single_particle.conf",
        "line_on_axis.conf",
        "line_off_axis.conf",
        "nonlocal_vs_pilotwave.conf",
        "chamber.conf",
    ] {
        let o = smeared(&["curve", "--config", dir.join(name).to_str().unwrap()]);
        assert!(
            o.status.success(),
            "{name}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        let s = stdout(&o);
        let first: Vec<f64> = s
            .lines()
            .nth(1)
            .unwrap()
            .split(',')
            .map(|v| v.parse().unwrap())
            .collect();
        if name != "chamber.conf" {
            assert!((first[1] - 0.3).abs() < 1e-9, "{name}: {s}");
        } else {
            // stdev = 0.56 r inside a closed chamber
            assert!(
                (first[0] - 0.56).abs() < 1e-12 && first[1] > 0.3 && first[1] < 0.4966,
                "{s}"
            );
        }
    }
}
