use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fse_conceal::io::{encode_pgm, GrayImage};
use tempfile::TempDir;

const SMALL: [&str; 10] = [
    "--block",
    "8",
    "--support",
    "8",
    "--fft-size",
    "32",
    "--spacing",
    "32",
    "--iterations",
    "20",
];

fn fse(args: &[&str], env_out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_fse"));
    cmd.args(args).env_remove("FSE_OUT_DIR");
    if let Some(dir) = env_out {
        cmd.env("FSE_OUT_DIR", dir);
    }
    cmd.output().expect("binary runs")
}

fn image(dir: &Path) -> PathBuf {
    let (w, h) = (96, 80);
    let pixels = (0..w * h)
        .map(|i| {
            let (m, n) = ((i / w) as f64, (i % w) as f64);
            (128.0 + 60.0 * (m * 0.21).sin() * (n * 0.13).cos() + ((i * 31) % 7) as f64) as u8
        })
        .collect();
    let path = dir.join("synthetic.pgm");
    fs::write(&path, encode_pgm(&GrayImage::new(w, h, pixels).unwrap())).unwrap();
    path
}

fn args<'a>(head: &[&'a str], tail: &[&'a str]) -> Vec<&'a str> {
    head.iter().chain(SMALL.iter()).chain(tail).copied().collect()
}

// CSV body without the fingerprint line.
fn rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn missing_input_fails_without_outputs() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let missing = tmp.path().join("nope.pgm");
    let o = fse(
        &args(&["conceal", missing.to_str().unwrap()], &["--out-dir", out.to_str().unwrap()]),
        None,
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn one_bad_image_aborts_the_whole_run() {
    let tmp = TempDir::new().unwrap();
    let good = image(tmp.path());
    let bad = tmp.path().join("bad.pgm");
    fs::write(&bad, b"P2\n1 1\n255\n0\n").unwrap();
    let out = tmp.path().join("out");
    let o = fse(
        &args(
            &["conceal", good.to_str().unwrap(), bad.to_str().unwrap()],
            &["--out-dir", out.to_str().unwrap()],
        ),
        None,
    );
    assert_ne!(o.status.code(), Some(0));
    assert!(!out.exists());
}

#[test]
fn usage_errors_exit_with_one() {
    let tmp = TempDir::new().unwrap();
    let img = image(tmp.path());
    let img = img.to_str().unwrap();
    let out = tmp.path().join("out");
    let out = out.to_str().unwrap();
    for extra in [
        vec!["sweep-gamma", img, "--gammas", ",", "--out-dir", out],
        vec!["sweep-gamma", img, "--gammas", "0.2,abc", "--out-dir", out],
        vec!["sweep-gamma", img, "--gammas", "1.5", "--out-dir", out],
        vec!["bench", img, "--repetitions", "0", "--out-dir", out],
        vec!["bench", img, "--engines", "bogus", "--out-dir", out],
        vec!["conceal", img, "--gamma", "0", "--out-dir", out],
        vec!["conceal", img, "--rho-hat", "1", "--out-dir", out],
        vec!["conceal", img, "--no-such-flag"],
    ] {
        let o = fse(&extra, None);
        assert_eq!(o.status.code(), Some(1), "{extra:?}");
    }
    assert!(!Path::new(out).exists());
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    let img = image(tmp.path());
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, "iterations = 5\nitertions = 6\n").unwrap();
    let o = fse(&["--config", cfg.to_str().unwrap(), "conceal", img.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn conceal_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let img = image(tmp.path());
    let run = |dir: &str| {
        let out = tmp.path().join(dir);
        let o = fse(
            &args(
                &["conceal", img.to_str().unwrap()],
                &["--traces", "--out-dir", out.to_str().unwrap()],
            ),
            None,
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let (a, b) = (run("a"), run("b"));
    for name in ["synthetic_restored.pgm", "synthetic_trace.csv", "synthetic_pattern.txt"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let strip_time = |p: PathBuf| rows(&p).into_iter().map(|mut r| {
        r.pop();
        r
    });
    assert!(strip_time(a.join("report.csv")).eq(strip_time(b.join("report.csv"))));
    let ra = fs::read_to_string(a.join("report.csv")).unwrap();
    let rb = fs::read_to_string(b.join("report.csv")).unwrap();
    assert_eq!(ra.lines().next(), rb.lines().next());
    assert!(ra.starts_with("# config-fingerprint: "));
}

#[test]
fn random_pattern_follows_the_seed() {
    let tmp = TempDir::new().unwrap();
    let img = image(tmp.path());
    let pattern = |seed: &str, dir: &str| {
        let out = tmp.path().join(dir);
        let o = fse(
            &args(
                &["conceal", img.to_str().unwrap()],
                &["--random-blocks", "2", "--seed", seed, "--out-dir", out.to_str().unwrap()],
            ),
            None,
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        fs::read_to_string(out.join("synthetic_pattern.txt")).unwrap()
    };
    assert_eq!(pattern("7", "a"), pattern("7", "b"));
    let other: Vec<String> = (8..16).map(|s| pattern(&s.to_string(), &format!("s{s}"))).collect();
    assert!(other.iter().any(|p| *p != pattern("7", "c")));
}

#[test]
fn unit_gamma_sweep_coincides_with_fse() {
    let tmp = TempDir::new().unwrap();
    let img = image(tmp.path());
    let out = tmp.path().join("out");
    let o = fse(
        &args(
            &["sweep-gamma", img.to_str().unwrap()],
            &["--gammas", "1.0", "--stride", "5", "--out-dir", out.to_str().unwrap()],
        ),
        None,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let body = rows(&out.join("curve.csv"));
    let series = |name: &str| -> Vec<(String, String)> {
        body.iter()
            .filter(|r| r[1] == name)
            .map(|r| (r[2].clone(), r[3].clone()))
            .collect()
    };
    let unit = series("fofse(1)");
    assert_eq!(unit.len(), 4);
    assert_eq!(unit, series("fse"));
    assert_eq!(rows(&out.join("curve_summary.csv")).len(), 1 + 3);
}

#[test]
fn flags_override_config_file_which_overrides_defaults() {
    let tmp = TempDir::new().unwrap();
    let img = image(tmp.path());
    let file_out = tmp.path().join("from_file");
    let cfg = tmp.path().join("run.toml");
    fs::write(
        &cfg,
        format!(
            "iterations = 5\nalgorithm = \"fse\"\nblock = 8\nsupport = 8\nfft_size = 32\nspacing = 32\nout_dir = {:?}\n",
            file_out.to_str().unwrap()
        ),
    )
    .unwrap();
    let env_out = tmp.path().join("from_env");

    let o = fse(
        &["--config", cfg.to_str().unwrap(), "conceal", img.to_str().unwrap()],
        Some(&env_out),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = rows(&file_out.join("report.csv"));
    assert_eq!((r[1][1].as_str(), r[1][3].as_str()), ("fse", "5"));
    assert!(!env_out.exists());

    let flag_out = tmp.path().join("from_flag");
    let o = fse(
        &[
            "--config",
            cfg.to_str().unwrap(),
            "conceal",
            img.to_str().unwrap(),
            "--iterations",
            "7",
            "--out-dir",
            flag_out.to_str().unwrap(),
        ],
        Some(&env_out),
    );
    assert!(o.status.success());
    let r = rows(&flag_out.join("report.csv"));
    assert_eq!((r[1][1].as_str(), r[1][3].as_str()), ("fse", "7"));

    let o = fse(&args(&["conceal", img.to_str().unwrap()], &[]), Some(&env_out));
    assert!(o.status.success());
    let r = rows(&env_out.join("report.csv"));
    assert_eq!((r[1][1].as_str(), r[1][2].as_str(), r[1][3].as_str()), ("fofse", "0.2", "20"));
}

#[test]
fn cost_model_csv_matches_closed_form() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let o = fse(
        &["cost-model", "--iteration-points", "200", "--out-dir", out.to_str().unwrap()],
        None,
    );
    assert!(o.status.success());
    let body = rows(&out.join("cost.csv"));
    assert_eq!(body[0], ["iterations", "algorithm", "category", "ops"]);
    let get = |alg: &str, cat: &str| {
        body.iter()
            .find(|r| r[1] == alg && r[2] == cat)
            .map(|r| r[3].parse::<u128>().unwrap())
            .unwrap()
    };
    assert_eq!(get("ofse", "MUL"), 20_067_456);
    assert_eq!(get("fofse", "MUL"), 7_370_656);
    assert_eq!(get("fofse", "FFT"), 128);
    assert_eq!(body.len(), 1 + 2 * 6);
}

#[test]
fn bench_with_one_engine_writes_one_row() {
    let tmp = TempDir::new().unwrap();
    let img = image(tmp.path());
    let out = tmp.path().join("out");
    let o = fse(
        &args(
            &["bench", img.to_str().unwrap()],
            &[
                "--engines",
                "ofse",
                "--repetitions",
                "2",
                "--warmup",
                "0",
                "--max-blocks",
                "1",
                "--out-dir",
                out.to_str().unwrap(),
            ],
        ),
        None,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let body = rows(&out.join("bench.csv"));
    assert_eq!(body.len(), 2);
    assert_eq!(&body[1][..4], ["ofse", "20", "1", "2"]);
}

#[test]
fn pattern_file_and_extrapolate() {
    let tmp = TempDir::new().unwrap();
    let img = image(tmp.path());
    let pat = tmp.path().join("p.txt");
    fs::write(&pat, "# row col height width\n10 12 8 8\n50 60 8 8\n").unwrap();
    let out = tmp.path().join("out");
    let o = fse(
        &args(
            &["conceal", img.to_str().unwrap()],
            &["--pattern", pat.to_str().unwrap(), "--out-dir", out.to_str().unwrap()],
        ),
        None,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let written = fs::read_to_string(out.join("synthetic_pattern.txt")).unwrap();
    assert!(written.contains("10 12 8 8") && written.contains("50 60 8 8"));

    let o = fse(
        &args(
            &["extrapolate", img.to_str().unwrap()],
            &["--row", "30", "--col", "40", "--out-dir", out.to_str().unwrap()],
        ),
        None,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(rows(&out.join("synthetic_trace.csv")).len(), 1 + 20);
    assert!(fs::read(out.join("synthetic_window.pgm")).unwrap().starts_with(b"P5\n24 24\n"));
}
