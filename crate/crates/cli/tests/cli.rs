use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spillover"))
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin().args(args).current_dir(dir).output().expect("spawn")
}

fn simulate(dir: &Path, nodes: &str, length: &str) -> PathBuf {
    let out = run(
        &["simulate", "--nodes", nodes, "--length", length, "--edge", "1:2:0.3:0.3", "--seed", "7", "--out", "data/panel.csv"],
        dir,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    dir.join("data/panel.csv")
}

fn write_config(dir: &Path, extra: &str) -> PathBuf {
    let path = dir.join("run.cfg");
    std::fs::write(
        &path,
        format!(
            "# test run\ninput = data/panel.csv\noutput = out\n\
             period.lockdown = 2019-01-01..2019-03-31\n\
             period.recovery = 2019-04-01..2019-06-30\n\
             period.normal-lockdown = 2019-07-01..2019-09-30\n\
             period.normal-recovery = 2019-10-01..2019-12-31\n{extra}"
        ),
    )
    .unwrap();
    path
}

#[test]
fn simulate_writes_a_dated_panel() {
    let dir = tempfile::tempdir().unwrap();
    let path = simulate(dir.path(), "3", "50");
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("date,N01,N02,N03"));
    assert!(lines.next().unwrap().starts_with("2019-01-01,"));
    assert_eq!(text.lines().count(), 51);
}

#[test]
fn pipeline_writes_every_period_and_the_comparison() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "4", "365");
    write_config(dir.path(), "jobs = 2\n");
    let out = run(&["pipeline", "--config", "run.cfg"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("lockdown: 90 observations, 4 nodes, 6 fits, 12 tests"), "{stdout}");
    for period in ["lockdown", "recovery", "normal-lockdown", "normal-recovery"] {
        for f in ["describe.csv", "estimates.csv", "adjacency.csv", "diffusion.csv", "blocks.csv"] {
            assert!(dir.path().join("out").join(period).join(f).exists(), "{period}/{f}");
        }
    }
    assert!(dir.path().join("out/comparison.json").exists());
}

#[test]
fn flags_override_the_config() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "3", "365");
    write_config(dir.path(), "");
    let out = run(&["estimate", "--config", "run.cfg", "--out", "elsewhere", "--jobs", "1"], dir.path());
    assert!(out.status.success());
    let est = std::fs::read_to_string(dir.path().join("elsewhere/lockdown/estimates.csv")).unwrap();
    assert!(est.starts_with("from,to,a_off,b_off,weight,wald_stat,p_value,converged"));
    assert_eq!(est.lines().count(), 7);
    assert!(!dir.path().join("elsewhere/lockdown/adjacency.csv").exists());
    assert!(!dir.path().join("out").exists());
}

#[test]
fn describe_with_ttest() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "3", "365");
    write_config(dir.path(), "");
    let out = run(&["describe", "--config", "run.cfg", "--ttest", "lockdown:normal-lockdown"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let t = std::fs::read_to_string(dir.path().join("out/ttest_lockdown_normal-lockdown.csv")).unwrap();
    assert_eq!(t.lines().count(), 4);
    let d = std::fs::read_to_string(dir.path().join("out/lockdown/describe.csv")).unwrap();
    assert!(d.starts_with("node,n,mean,std_dev,skewness,kurtosis,jb_stat"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["pipeline", "--config", "missing.cfg"], dir.path()).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"], dir.path()).status.code(), Some(1));
    assert_eq!(run(&["--help"], dir.path()).status.code(), Some(0));

    write_config(dir.path(), "");
    assert_eq!(run(&["pipeline", "--config", "run.cfg", "--alpha", "1.5"], dir.path()).status.code(), Some(1));
    // config is fine but the input does not exist
    assert_eq!(run(&["pipeline", "--config", "run.cfg"], dir.path()).status.code(), Some(2));

    // a flat column cannot be fitted
    std::fs::create_dir_all(dir.path().join("data")).unwrap();
    let mut csv = String::from("date,A,B\n");
    let start = chrono::NaiveDate::from_ymd_opt(2019, 1, 1).unwrap();
    for k in 0..365u64 {
        let _ = std::fmt::Write::write_fmt(&mut csv, format_args!("{},{},3\n", start + chrono::Days::new(k), (k * 7919 % 101) as f64));
    }
    std::fs::write(dir.path().join("data/panel.csv"), csv).unwrap();
    let out = run(&["estimate", "--config", "run.cfg"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("estimate") && err.contains("[A, B]"), "{err}");

    assert_eq!(
        run(&["simulate", "--nodes", "3", "--length", "50", "--edge", "1:4:0.3:0.3", "--out", "x.csv"], dir.path())
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn parallelism_does_not_change_outputs() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "5", "365");
    write_config(dir.path(), "");
    for (jobs, out) in [("1", "a"), ("4", "b")] {
        let o = run(&["pipeline", "--config", "run.cfg", "--jobs", jobs, "--out", out], dir.path());
        assert!(o.status.success());
    }
    let files = |root: &Path| {
        let mut v = Vec::new();
        let mut stack = vec![root.to_path_buf()];
        while let Some(d) = stack.pop() {
            for e in std::fs::read_dir(d).unwrap() {
                let p = e.unwrap().path();
                if p.is_dir() {
                    stack.push(p);
                } else {
                    v.push((p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
                }
            }
        }
        v.sort();
        v
    };
    assert_eq!(files(&dir.path().join("a")), files(&dir.path().join("b")));
}
