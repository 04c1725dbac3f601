use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_trajeval"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("spawn trajeval")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn fixture(dir: &Path, n: &str) -> PathBuf {
    ok(dir, &["fixture", "--out", "fx", "--n", n]);
    dir.join("fx/manifest.json")
}

fn read(p: impl AsRef<Path>) -> Vec<u8> {
    fs::read(p.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", p.as_ref().display()))
}

#[test]
fn kinematics_table_has_one_row_per_episode() {
    let t = tempfile::tempdir().unwrap();
    fixture(t.path(), "9");
    ok(t.path(), &["kinematics", "--manifest", "fx/manifest.json", "--out", "k1"]);
    ok(t.path(), &["kinematics", "--manifest", "fx/manifest.json", "--out", "k2"]);
    let a = read(t.path().join("k1/kinematics.csv"));
    assert_eq!(a, read(t.path().join("k2/kinematics.csv")));
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 10);
}

#[test]
fn constant_trajectory_row_is_zero() {
    let t = tempfile::tempdir().unwrap();
    let m = fixture(t.path(), "3");
    let traj = t.path().join("fx/trajectories/ep0000.csv");
    let mut text = String::from("t,j0,j1,j2,j3,j4,j5,j6\n");
    for i in 0..5 {
        text.push_str(&format!("{i},0.5,0.5,0.5,0.5,0.5,0.5,0.5\n"));
    }
    fs::write(&traj, text).unwrap();
    ok(t.path(), &["kinematics", "--manifest", m.to_str().unwrap(), "--out", "k"]);
    let csv = String::from_utf8(read(t.path().join("k/kinematics.csv"))).unwrap();
    let row = csv.lines().nth(1).unwrap();
    assert!(row.starts_with("ep0000,5,7,0.0,0.0,0.0,"), "{row}");
    assert!(row.ends_with("KINEMATICS u_v=<0.000000> u_a=<0.000000> mu_v=<0.000000>"), "{row}");
}

#[test]
fn calibrate_recovers_planted_ranking() {
    let t = tempfile::tempdir().unwrap();
    fixture(t.path(), "20");
    ok(t.path(), &["calibrate", "--manifest", "fx/manifest.json", "--out", "c1", "--generations", "40"]);
    ok(t.path(), &["calibrate", "--manifest", "fx/manifest.json", "--out", "c2", "--generations", "40"]);
    let theta = read(t.path().join("c1/theta.json"));
    assert_eq!(theta, read(t.path().join("c2/theta.json")));
    let doc: serde_json::Value = serde_json::from_slice(&theta).unwrap();
    assert!(doc["loss"].as_f64().unwrap() <= 0.5);
    let hist = String::from_utf8(read(t.path().join("c1/loss_history.csv"))).unwrap();
    let losses: Vec<f64> = hist.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(losses.len(), 41);
    assert!(losses.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn calibrate_without_ranks_is_a_validation_error() {
    let t = tempfile::tempdir().unwrap();
    let m = fixture(t.path(), "6");
    let text = fs::read_to_string(&m).unwrap();
    let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    for ep in doc["episodes"].as_array_mut().unwrap() {
        let labels = ep["labels"].as_object_mut().unwrap();
        labels.remove("expert_rank");
        labels.remove("rank_batch");
    }
    fs::write(&m, serde_json::to_string(&doc).unwrap()).unwrap();
    let out = run(t.path(), &["calibrate", "--manifest", "fx/manifest.json", "--out", "c"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("rank-guided"));
}

#[test]
fn missing_manifest_is_an_io_error() {
    let t = tempfile::tempdir().unwrap();
    let out = run(t.path(), &["kinematics", "--manifest", "absent.json", "--out", "k"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn invalid_config_is_a_validation_error() {
    let t = tempfile::tempdir().unwrap();
    assert_eq!(run(t.path(), &["grpo-sim", "--out", "g", "--gamma", "1.5"]).status.code(), Some(2));
    assert_eq!(run(t.path(), &["grpo-sim", "--out", "g", "--group-size", "1"]).status.code(), Some(2));
    assert_eq!(run(t.path(), &["aggregate", "--frames", ".", "--out", "a", "--grid", "0x2"]).status.code(), Some(2));
}

fn calibrated(t: &Path, n: &str) {
    fixture(t, n);
    ok(t, &["calibrate", "--manifest", "fx/manifest.json", "--out", "cal", "--generations", "30"]);
}

#[test]
fn score_self_consistency_and_determinism() {
    let t = tempfile::tempdir().unwrap();
    calibrated(t.path(), "50");
    let common = ["--theta", "cal/theta.json", "--keyframes", "4", "--out-size", "32"];
    let mut a = vec!["score", "--manifest", "fx/manifest.json", "--out", "s1", "--write-labels"];
    a.extend(common);
    ok(t.path(), &a);
    let noisy: serde_json::Value = serde_json::from_slice(&read(t.path().join("s1/metrics.json"))).unwrap();
    let srcc = noisy["srcc"].as_f64().unwrap();
    assert!(srcc > -1.0 && srcc < 1.0, "{srcc}");

    let mut b = vec!["score", "--manifest", "s1/labeled_manifest.json", "--out", "s2"];
    b.extend(common);
    ok(t.path(), &b);
    let mut c = vec!["score", "--manifest", "s1/labeled_manifest.json", "--out", "s3"];
    c.extend(common);
    ok(t.path(), &c);
    let m: serde_json::Value = serde_json::from_slice(&read(t.path().join("s2/metrics.json"))).unwrap();
    assert_eq!(m["srcc"].as_f64(), Some(1.0));
    assert_eq!(m["source"]["acc"].as_f64(), Some(100.0));
    assert_eq!(read(t.path().join("s2/predictions.csv")), read(t.path().join("s3/predictions.csv")));

    ok(t.path(), &["metrics", "--manifest", "s1/labeled_manifest.json", "--predictions", "s2/predictions.csv", "--out", "m"]);
    assert_eq!(read(t.path().join("m/metrics.md")), read(t.path().join("s2/metrics.md")));
}

#[test]
fn score_rejects_missing_labels() {
    let t = tempfile::tempdir().unwrap();
    calibrated(t.path(), "6");
    let m = t.path().join("fx/manifest.json");
    let mut doc: serde_json::Value = serde_json::from_slice(&read(&m)).unwrap();
    doc["episodes"][2]["labels"].as_object_mut().unwrap().remove("eg_score");
    fs::write(&m, serde_json::to_string(&doc).unwrap()).unwrap();
    let out = run(
        t.path(),
        &["score", "--manifest", "fx/manifest.json", "--theta", "cal/theta.json", "--out", "s", "--protocol", "eg", "--keyframes", "2", "--out-size", "16"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ep0002"));
}

#[test]
fn subprocess_evaluator_receives_request() {
    let t = tempfile::tempdir().unwrap();
    calibrated(t.path(), "3");
    let script = t.path().join("eval.sh");
    fs::write(
        &script,
        "#!/bin/sh\ncat > /dev/null\nprintf '<think>looks fine</think>\\nscore: 7\\nsuccess: success\\nsource: policy\\n'\n",
    )
    .unwrap();
    ok(
        t.path(),
        &["score", "--manifest", "fx/manifest.json", "--theta", "cal/theta.json", "--out", "s", "--keyframes", "2", "--out-size", "16", "--require-cot", "--evaluator-cmd", "/bin/sh", "--evaluator-arg", script.to_str().unwrap()],
    );
    let preds = String::from_utf8(read(t.path().join("s/predictions.csv"))).unwrap();
    assert_eq!(preds.lines().count(), 4);
    assert!(preds.lines().skip(1).all(|l| l.contains(",7.0,true,policy,looks fine")), "{preds}");
    assert!(t.path().join("s/scratch/ep0000/composite_00001.png").exists());
    let m: serde_json::Value = serde_json::from_slice(&read(t.path().join("s/metrics.json"))).unwrap();
    assert!(m["srcc"].is_null());
}

#[test]
fn aggregate_identity_and_ablation() {
    let t = tempfile::tempdir().unwrap();
    fixture(t.path(), "1");
    let frames = "fx/frames/ep0000/third_person";
    ok(t.path(), &["aggregate", "--frames", frames, "--out", "a1", "--grid", "1x1", "--keyframes", "3", "--out-size", "16"]);
    let first = image::open(t.path().join("a1/1x1/composite_00000.png")).unwrap().to_rgb8();
    let frame = image::open(t.path().join(frames).join("frame_00000.png")).unwrap().to_rgb8();
    assert_eq!(first, frame);

    ok(t.path(), &["aggregate", "--frames", frames, "--out", "b1", "--ablation", "--out-size", "64"]);
    ok(t.path(), &["aggregate", "--frames", frames, "--out", "b2", "--ablation", "--out-size", "64"]);
    for g in ["2x2", "3x3", "4x4"] {
        for i in 0..8 {
            let name = format!("{g}/composite_{i:05}.png");
            assert_eq!(read(t.path().join("b1").join(&name)), read(t.path().join("b2").join(&name)));
        }
    }
}

#[test]
fn grpo_sim_flat_under_constant_reward() {
    let t = tempfile::tempdir().unwrap();
    ok(t.path(), &["grpo-sim", "--out", "g", "--constant-reward", "0.5", "--beta", "0", "--iterations", "50"]);
    let trace = String::from_utf8(read(t.path().join("g/trace.csv"))).unwrap();
    assert_eq!(trace.lines().next().unwrap(), "iteration,mean_reward,r_score_mean,r_succ_mean,r_src_mean,r_fmt_mean");
    assert!(trace.lines().skip(1).all(|l| l.split(',').nth(1) == Some("0.5")));
}

#[test]
fn replay_reproduces_outputs() {
    let t = tempfile::tempdir().unwrap();
    ok(t.path(), &["grpo-sim", "--out", "g1", "--iterations", "80", "--seed", "3"]);
    ok(t.path(), &["replay", "--config", "g1/config.json", "--out", "g2"]);
    for f in ["trace.csv", "policy.json", "summary.json", "artifacts.json"] {
        assert_eq!(read(t.path().join("g1").join(f)), read(t.path().join("g2").join(f)), "{f}");
    }
    let index: serde_json::Value = serde_json::from_slice(&read(t.path().join("g1/artifacts.json"))).unwrap();
    assert_eq!(index["command"], "grpo-sim");
}
