use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn cpocma(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cpocma"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn small<'a>(extra: &[&'a str]) -> Vec<&'a str> {
    let fs = if extra.contains(&"--sample-rate") {
        vec![]
    } else {
        vec!["--sample-rate", "32"]
    };
    let mut v = fs;
    v.extend_from_slice(&[
        "--f",
        "1",
        "--min-bits",
        "10000",
        "--max-bits",
        "10000",
        "--frame-symbols",
        "64",
    ]);
    v.extend_from_slice(extra);
    v
}

fn data_lines(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

#[test]
fn theory_csv_has_header_and_grid() {
    let out = cpocma(&["theory", "--eb-n0", "0:14:2"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("# cpocma "));
    let lines = data_lines(&text);
    assert_eq!(lines[0], "eb_n0_db,sigma,p_cpomf,p_cpocf,p_e");
    assert_eq!(lines.len(), 9);
}

#[test]
fn ber_files_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let csv = dir.path().join(format!("{name}.csv"));
        let json = dir.path().join(format!("{name}.json"));
        let out = cpocma(
            &[
                &["ber"][..],
                &small(&["--eb-n0", "0,4", "--seed", "9"]),
                &[
                    "--out",
                    csv.to_str().unwrap(),
                    "--summary",
                    json.to_str().unwrap(),
                ],
            ]
            .concat(),
        );
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        (fs::read(csv).unwrap(), fs::read(json).unwrap())
    };
    let a = run("a");
    let b = run("b");
    assert_eq!(a, b);
    let text = String::from_utf8(a.0).unwrap();
    let lines = data_lines(&text);
    assert_eq!(
        lines[0],
        "system,N,eb_n0_db,total_bits,bit_errors,ber,low_confidence,seed"
    );
    assert!(lines[1].starts_with("cpocma,2,0,"));
    let summary: serde_json::Value = serde_json::from_slice(&a.1).unwrap();
    assert_eq!(summary["command"], "ber");
    assert_eq!(summary["results"].as_array().unwrap().len(), 2);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "system = \"fdma\"\n[carrier]\nf = 1.0\nnum_subcarriers = 3\nsample_rate = 32.0\n[channel]\neb_n0_db = [2.0]\n",
    )
    .unwrap();
    let out = cpocma(&[
        "ber",
        "--config",
        cfg.to_str().unwrap(),
        "--system",
        "cdma",
        "--sample-rate",
        "128",
        "--eb-n0",
        "inf",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    let row = data_lines(&text)[1].to_string();
    assert!(row.starts_with("cdma,3,inf,"), "{row}");
    assert!(row.contains(",0,0,"), "{row}");
}

#[test]
fn config_errors_exit_one() {
    for args in [
        vec!["ber", "--sample-rate", "40.1e6"],
        vec!["ber", "--preset", "nope"],
        vec!["ber", "--system", "ofdm"],
        vec!["ber", "--eb-n0", "x"],
        vec!["ber", "--unknown-flag"],
        vec!["theory", "-n", "3"],
        vec!["ber", "--config", "/does/not/exist.toml"],
    ] {
        let out = cpocma(&args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
    let bad = cpocma(&["ber", "--sample-rate", "40.1e6"]);
    assert!(String::from_utf8_lossy(&bad.stderr).contains("sample_rate"));
}

#[test]
fn numeric_failure_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("dead.toml");
    fs::write(
        &cfg,
        "[carrier]\nf = 1.0\nnum_subcarriers = 2\nsample_rate = 32.0\n\
         [channel]\neb_n0_db = [inf]\nmodel = { custom = [{ power_gain = 0.0, delay = 0.0 }] }\n",
    )
    .unwrap();
    let out = cpocma(&["ber", "--config", cfg.to_str().unwrap()]);
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn compare_covers_three_systems() {
    let out = cpocma(
        &[
            &["compare"][..],
            &small(&["--sample-rate", "128", "--eb-n0", "inf"]),
        ]
        .concat(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    let systems: Vec<&str> = data_lines(&text)[1..]
        .iter()
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(systems, vec!["cpocma", "fdma", "cdma"]);
}

#[test]
fn image_round_trip_noiseless() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("in.pgm");
    let mut pgm = b"P5\n8 8\n255\n".to_vec();
    pgm.extend((0..64u8).map(|v| v * 4));
    fs::write(&src, &pgm).unwrap();
    let dst = dir.path().join("out.pgm");
    let out = cpocma(
        &[
            &["image"][..],
            &small(&[
                "--eb-n0",
                "inf",
                "--input",
                src.to_str().unwrap(),
                "--decoded",
                dst.to_str().unwrap(),
            ]),
        ]
        .concat(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(data_lines(&text)[1].contains(",inf,"));
    assert!(Path::new(&dst).exists());
    let written = fs::read(&dst).unwrap();
    assert!(written.starts_with(b"P5"));
    assert_eq!(&written[written.len() - 64..], &pgm[pgm.len() - 64..]);
}

#[test]
fn spectrum_reports_bandwidth() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("s.json");
    let out = cpocma(&["spectrum", "-n", "4", "--summary", json.to_str().unwrap()]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: serde_json::Value = serde_json::from_slice(&fs::read(json).unwrap()).unwrap();
    let b = v["results"]["occupied_bandwidth_over_f"].as_f64().unwrap();
    assert!(b > 8.0 && b < 12.0, "{b}");
}
