use std::process::Command;

fn fhbvm(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_fhbvm"))
        .args(args)
        .output()
        .unwrap()
}

const SMALL: [&str; 10] = [
    "--problem",
    "example3",
    "--k",
    "8",
    "--s",
    "6",
    "--N",
    "5",
    "--M",
    "2",
];

#[test]
fn run_writes_header_and_one_row() {
    let out = fhbvm(&[&["run"], &SMALL[..], &["--no-timing"]].concat());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "problem,alpha,N,M,m,v,k,s,e_inf,e_2,seconds,fixed_point_steps,blended_steps"
    );
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("example3,0.5,5,2,1,1,8,6,"));
}

#[test]
fn repeated_runs_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for path in [&a, &b] {
        let p = path.to_str().unwrap();
        let out = fhbvm(&[&["run"], &SMALL[..], &["--no-timing", "--out", p]].concat());
        assert!(out.status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("case.cfg");
    std::fs::write(
        &cfg,
        "problem = example3\nalpha = 0.3\nN = 5\nM = 2\nk = 8\ns = 6\n",
    )
    .unwrap();
    let out = fhbvm(&["run", "--config", cfg.to_str().unwrap(), "--alpha", "0.7"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("example3,0.7,5,2,"));
}

#[test]
fn sweeps_emit_one_row_per_value() {
    let out = fhbvm(&[
        "sweep-time",
        "--problem",
        "example3",
        "--k",
        "8",
        "--s",
        "6",
        "--N",
        "5",
        "--M",
        "2,3,4",
    ]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 4);
    let out = fhbvm(&[
        "sweep-space",
        "--problem",
        "example3",
        "--k",
        "8",
        "--s",
        "6",
        "--M",
        "2",
        "--N",
        "3,5",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let ns: Vec<&str> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap())
        .collect();
    assert_eq!(ns, ["3", "5"]);
}

#[test]
fn grid_and_tables_files() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("surface.txt");
    let out = fhbvm(&[&["run"], &SMALL[..], &["--grid", grid.to_str().unwrap()]].concat());
    assert!(out.status.success());
    let text = std::fs::read_to_string(&grid).unwrap();
    assert!(text.starts_with("# x t u_num u_exact abs_err"));
    assert!(text
        .lines()
        .skip(1)
        .all(|l| l.split_whitespace().count() == 5));

    let out = fhbvm(&[
        "tables", "--alpha", "0.4", "--k", "6", "--s", "4", "--M", "3",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("# fhbvm-tables v1 alpha="));
    assert!(robin_fhbvm::weighted_jacobi::FhbvmTables::load(&text).is_ok());
}

#[test]
fn bad_input_is_reported() {
    let out = fhbvm(&["run", "--problem", "example9", "--N", "4", "--M", "2"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("example9"));
    let out = fhbvm(&["run", "--alpha", "1.5", "--N", "4", "--M", "2"]);
    assert!(!out.status.success());
}
