use std::path::Path;
use std::process::{Command, Output};

fn alearn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_alearn")).args(args).output().expect("alearn binary runs")
}

fn code(out: &Output) -> Option<i32> {
    out.status.code()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

const SMALL: [&str; 10] =
    ["--blob-per-class", "40", "--seed-size", "8", "--test-size", "40", "--k", "5", "--rounds", "3"];

#[test]
fn help_lists_subcommands() {
    let out = alearn(&["--help"]);
    assert_eq!(code(&out), Some(0));
    let text = stdout(&out);
    for sub in ["run", "compare", "gradcheck", "inspect", "serve"] {
        assert!(text.contains(sub), "{sub} missing from --help");
    }
    assert!(stdout(&alearn(&["run", "--help"])).contains("--preset"));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&alearn(&[])), Some(2));
    assert_eq!(code(&alearn(&["bogus"])), Some(2));
    assert_eq!(code(&alearn(&["run", "--metric", "bogus"])), Some(2));
    assert_eq!(code(&alearn(&["run", "--k", "0"])), Some(2));
    assert_eq!(code(&alearn(&["run", "--seed-size", "1"])), Some(2));
    assert_eq!(code(&alearn(&["run", "--epsilon", "1.5"])), Some(2));
    assert_eq!(code(&alearn(&["run", "--lr", "0"])), Some(2));
    assert_eq!(code(&alearn(&["run", "--classes", "0,1"])), Some(2));
    assert_eq!(code(&alearn(&["compare", "--metrics", "lmu"])), Some(2));
    assert_eq!(code(&alearn(&["compare", "--replicates", "0"])), Some(2));
    assert_eq!(code(&alearn(&["gradcheck", "--arch", "mlp", "--hidden", "0"])), Some(2));
}

#[test]
fn data_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope");
    let out = alearn(&["run", "--data", "mnist", "--mnist-dir", missing.to_str().unwrap()]);
    assert_eq!(code(&out), Some(3));

    let images = dir.path().join("images");
    let labels = dir.path().join("labels");
    // valid image magic, header claims one 28x28 image, no pixels
    let mut header = vec![0, 0, 8, 3, 0, 0, 0, 1, 0, 0, 0, 28, 0, 0, 0, 28];
    std::fs::write(&images, &header).unwrap();
    header.truncate(8);
    header[3] = 1;
    std::fs::write(&labels, &header).unwrap();
    let out = alearn(&["inspect", "--images", images.to_str().unwrap(), "--labels", labels.to_str().unwrap()]);
    assert_eq!(code(&out), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("truncated"));

    // more examples requested than the dataset has
    let out = alearn(&["run", "--blob-per-class", "5", "--test-size", "100"]);
    assert_eq!(code(&out), Some(3));
}

#[test]
fn divergence_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let mut args = vec!["run", "--arch", "mlp", "--lr", "1e300", "--out", out_dir];
    args.extend(SMALL);
    assert_eq!(code(&alearn(&args)), Some(4));
}

#[test]
fn gradcheck_breach_exits_5() {
    let out = alearn(&["gradcheck", "--draws", "3", "--threshold", "1e-30"]);
    assert_eq!(code(&out), Some(5));
    let out = alearn(&["gradcheck", "--draws", "3"]);
    assert_eq!(code(&out), Some(0));
    assert!(stdout(&out).contains("worst relative error"));
}

fn assert_files(dir: &Path, names: &[&str]) {
    for name in names {
        let path = dir.join(name);
        let meta = std::fs::metadata(&path).unwrap_or_else(|_| panic!("{} missing", path.display()));
        assert!(meta.len() > 0, "{name} is empty");
    }
}

#[test]
fn run_writes_traces_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let mut args = vec!["run", "--metric", "smu", "--seed", "3", "--out", out_dir];
    args.extend(SMALL);
    let out = alearn(&args);
    assert_eq!(code(&out), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("round limit reached"));
    assert_files(dir.path(), &["trace.csv", "trace.json", "accuracy.svg", "loss.svg", "per_class.svg"]);

    let csv = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("run_id,metric,seed,round,labeled_count,train_loss,test_accuracy,class_acc_0"));
    assert!(lines[1].starts_with("smu-s3,smu,3,1,8,"));

    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("trace.json")).unwrap()).unwrap();
    assert_eq!(json[0]["config"]["per_round_k"], 5);
    assert_eq!(json[0]["records"].as_array().unwrap().len(), 3);
}

#[test]
fn preset_fraction_sets_k_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    // pool = 4 * 500 - 20 - 1000 = 980, 4.2% of 980 rounds to 41
    let out = alearn(&["run", "--preset", "blobs-softmax", "--rounds", "1", "--out", out_dir]);
    assert_eq!(code(&out), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("trace.json")).unwrap()).unwrap();
    assert_eq!(json[0]["config"]["per_round_k"], 41);
    assert_eq!(json[0]["config"]["hyper"]["learning_rate"], 0.5);

    let out = alearn(&["run", "--preset", "blobs-softmax", "--k", "7", "--lr", "0.2", "--rounds", "1", "--out", out_dir]);
    assert_eq!(code(&out), Some(0));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("trace.json")).unwrap()).unwrap();
    assert_eq!(json[0]["config"]["per_round_k"], 7);
    assert_eq!(json[0]["config"]["hyper"]["learning_rate"], 0.2);
}

#[test]
fn compare_writes_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let mut args =
        vec!["compare", "--metrics", "entropy,random", "--replicates", "2", "--threshold", "0.5", "--out", out_dir];
    args.extend(SMALL);
    let out = alearn(&args);
    assert_eq!(code(&out), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("rounds_to_0.5"));
    assert_files(
        dir.path(),
        &["compare.csv", "compare.json", "accuracy.svg", "loss.svg", "summary.txt", "summary.json"],
    );

    let csv = std::fs::read_to_string(dir.path().join("compare.csv")).unwrap();
    // 2 metrics x 2 seeds x 3 rounds
    assert_eq!(csv.lines().count(), 1 + 12);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    let metrics: Vec<&str> = summary.as_array().unwrap().iter().map(|r| r["metric"].as_str().unwrap()).collect();
    assert_eq!(metrics, ["entropy", "random"]);
    assert_eq!(summary[0]["replicates"], 2);
}

#[test]
fn run_output_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let mut args = vec!["run", "--metric", "random", "--out", dir.path().to_str().unwrap()];
        args.extend(SMALL);
        assert_eq!(code(&alearn(&args)), Some(0));
    }
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("trace.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn serve_answers_http() {
    use std::io::{BufRead, BufReader, Read, Write};

    let mut child = Command::new(env!("CARGO_BIN_EXE_alearn"))
        .args(["serve", "--port", "0"])
        .stdout(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening on http://").expect("listen line").to_string();

    let mut stream = std::net::TcpStream::connect(&addr).unwrap();
    write!(stream, "GET /v1/sessions HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n").unwrap();
    let mut response = String::new();
    stream.read_to_string(&mut response).unwrap();
    child.kill().unwrap();
    child.wait().unwrap();
    assert!(response.starts_with("HTTP/1.1 200"), "{response}");
    assert!(response.ends_with("[]"), "{response}");
}
