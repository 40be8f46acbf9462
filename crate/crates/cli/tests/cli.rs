use std::path::PathBuf;
use std::process::Command;

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn arbsim() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_arbsim"));
    cmd.env_remove("ARBSIM_SCENARIO_DIR");
    cmd
}

fn out_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("arbsim-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn validate_accepts_bundled_scenario() {
    let out = arbsim().arg("validate").arg(scenario("point_e.scn")).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("ok"));
}

#[test]
fn run_writes_requested_outputs() {
    let dir = out_dir("run");
    let (csv, nd, plot, corr) = (
        dir.join("t.csv"),
        dir.join("s.ndjson"),
        dir.join("timeline.svg"),
        dir.join("corridors.svg"),
    );
    let out = arbsim()
        .arg("run")
        .arg(scenario("point_e.scn"))
        .args(["--trace", csv.to_str().unwrap()])
        .args(["--snapshots", nd.to_str().unwrap()])
        .args(["--plot", plot.to_str().unwrap()])
        .args(["--corridors", corr.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("LaneChangeStart"));
    assert!(stdout.contains("outcome: GoalReached"));
    assert!(std::fs::read_to_string(&csv).unwrap().starts_with("time_s,active_leaf"));
    assert!(std::fs::read_to_string(&nd).unwrap().lines().count() > 10);
    assert!(std::fs::read_to_string(&plot).unwrap().starts_with("<svg"));
    assert!(std::fs::read_to_string(&corr).unwrap().contains("<path"));
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn unknown_key_exits_with_one() {
    let out = arbsim().arg("run").arg(scenario("broken.scn")).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("E_UNKNOWN_KEY"), "{stderr}");
    assert!(stderr.contains("ttcMinAhed"));
}

#[test]
fn missing_file_exits_with_one() {
    let out = arbsim().arg("validate").arg("no/such/file.scn").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("E_IO"));
}

#[test]
fn scenario_dir_variable_resolves_relative_names() {
    let out = arbsim()
        .env("ARBSIM_SCENARIO_DIR", scenario(""))
        .args(["validate", "intersection.scn"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn graph_print_shows_tree() {
    let out = arbsim()
        .arg("graph")
        .arg(scenario("end_of_route.scn"))
        .arg("--print")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let tree = String::from_utf8_lossy(&out.stdout);
    for name in ["AutomatedDriving", "UrbanDriving", "ParkNearGoal", "SafeStop"] {
        assert!(tree.contains(name), "{name} missing from\n{tree}");
    }
}

#[test]
fn parallel_flag_gives_same_output() {
    let dir = out_dir("par");
    let (a, b) = (dir.join("a.csv"), dir.join("b.csv"));
    for (flag, path) in [(None, &a), (Some("--parallel"), &b)] {
        let mut cmd = arbsim();
        cmd.arg("run").arg(scenario("double_lane_change.scn")).args(["--trace", path.to_str().unwrap()]);
        if let Some(f) = flag {
            cmd.arg(f);
        }
        assert_eq!(cmd.output().unwrap().status.code(), Some(0));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    std::fs::remove_dir_all(dir).ok();
}
