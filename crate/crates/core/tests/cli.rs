use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use parabolib::io::RunConfig;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_parabolib"))
        .args(args)
        .output()
        .expect("spawn parabolib")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn demo_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("run.toml");
    let out = bin(&["demo-config", "--out", s(&path)]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    path
}

#[test]
fn demo_config_parses() {
    let dir = tempfile::tempdir().unwrap();
    let path = demo_config(dir.path());
    assert_eq!(RunConfig::load(&path).unwrap(), RunConfig::demo());
}

#[test]
fn qpc_prints_effective_cpd() {
    let out = bin(&["qpc", "--voltage-mv", "50", "--residual-ohm", "400"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "1.503 mV");
}

#[test]
fn stepwise_commands_match_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = demo_config(dir.path());
    let pipe = dir.path().join("pipe");
    let out = bin(&["pipeline", "--config", s(&cfg), "--output-dir", s(&pipe)]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    for mode in ["static", "gradient"] {
        let step = dir.path().join("step").join(mode);
        let grid = step.join("grid.csv");
        assert!(bin(&[
            "simulate",
            "--config",
            s(&cfg),
            "--mode",
            mode,
            "--out",
            s(&grid)
        ])
        .status
        .success());
        assert!(bin(&["fit", "--grid", s(&grid), "--out-dir", s(&step)])
            .status
            .success());
        let bias = step.join("bias.csv");
        assert!(bin(&[
            "bias",
            "--profiles",
            s(&step.join("profiles.csv")),
            "--fit",
            s(&step.join("powerlaw.json")),
            "--out",
            s(&bias),
        ])
        .status
        .success());
        for file in ["grid.csv", "profiles.csv", "powerlaw.json", "bias.csv"] {
            assert_eq!(
                fs::read(step.join(file)).unwrap(),
                fs::read(pipe.join(mode).join(file)).unwrap(),
                "{mode}/{file}"
            );
        }
    }

    let report = dir.path().join("consistency.json");
    let out = bin(&[
        "consistency",
        "--input",
        s(&dir.path().join("step/static")),
        "--input",
        s(&dir.path().join("step/gradient")),
        "--out",
        s(&report),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(
        fs::read(&report).unwrap(),
        fs::read(pipe.join("consistency.json")).unwrap()
    );
}

#[test]
fn rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = demo_config(dir.path());
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        assert!(bin(&[
            "simulate",
            "--config",
            s(&cfg),
            "--mode",
            "gradient",
            "--out",
            s(p)
        ])
        .status
        .success());
    }
    assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
}

#[test]
fn bad_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(
        &path,
        "format_version = \"parabolib-config v1\"\nbogus = 1\n",
    )
    .unwrap();
    let out = bin(&["pipeline", "--config", s(&path)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn two_voltage_schedule_fails_in_fit_with_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::demo();
    cfg.scenario.voltage_schedule = vec![0.0, 0.5];
    cfg.output_dir = dir.path().join("out");
    let path = dir.path().join("two.toml");
    fs::write(&path, cfg.to_toml_string().unwrap()).unwrap();
    let out = bin(&["pipeline", "--config", s(&path)]);
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("fit_parabola"), "{stderr}");
}

#[test]
fn malformed_grid_exits_4_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = demo_config(dir.path());
    let grid = dir.path().join("grid.csv");
    assert!(bin(&[
        "simulate",
        "--config",
        s(&cfg),
        "--mode",
        "static",
        "--out",
        s(&grid)
    ])
    .status
    .success());
    let text = fs::read_to_string(&grid).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let last = lines.len() - 1;
    let mut cells: Vec<&str> = lines[last].split(',').collect();
    cells[3] = "-1";
    lines[last] = cells.join(",");
    fs::write(&grid, lines.join("\n") + "\n").unwrap();

    let out = bin(&["fit", "--grid", s(&grid), "--out-dir", s(dir.path())]);
    assert_eq!(out.status.code(), Some(4));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains(&format!("line {}", last + 1)), "{stderr}");
    assert!(stderr.contains("sigma"), "{stderr}");
}

#[test]
fn missing_input_exits_4() {
    let out = bin(&[
        "fit",
        "--grid",
        "/nonexistent/grid.csv",
        "--out-dir",
        "/tmp",
    ]);
    assert_eq!(out.status.code(), Some(4));
}
