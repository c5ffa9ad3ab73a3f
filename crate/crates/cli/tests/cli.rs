use std::fs;
use std::process::{Command, Output};

fn hyqnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hyqnet"))
        .args(args)
        .env_remove("HYQNET_SEED")
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn qsim_run_prints_sorted_counts() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bell.txt");
    fs::write(&path, "# bell pair\nH 0\nCNOT 0,1\nMEASURE 0 1\n").unwrap();
    let o = hyqnet(&[
        "qsim",
        "run",
        path.to_str().unwrap(),
        "--shots",
        "1000",
        "--seed",
        "3",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("00 ") && lines[1].starts_with("11 "));
    let total: u64 = lines
        .iter()
        .map(|l| l.split(' ').nth(1).unwrap().parse::<u64>().unwrap())
        .sum();
    assert_eq!(total, 1000);

    let again = hyqnet(&[
        "qsim",
        "run",
        path.to_str().unwrap(),
        "--shots",
        "1000",
        "--seed",
        "3",
    ]);
    assert_eq!(stdout(&again), out);
}

#[test]
fn seed_env_var_is_honoured() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("h.txt");
    fs::write(&path, "H 0\n").unwrap();
    let run = |env: &str| {
        let o = Command::new(env!("CARGO_BIN_EXE_hyqnet"))
            .args(["qsim", "run", path.to_str().unwrap(), "--shots", "5000"])
            .env("HYQNET_SEED", env)
            .output()
            .unwrap();
        stdout(&o)
    };
    let explicit = stdout(&hyqnet(&[
        "qsim",
        "run",
        path.to_str().unwrap(),
        "--shots",
        "5000",
        "--seed",
        "11",
    ]));
    assert_eq!(run("11"), explicit);
    assert_ne!(run("12"), explicit);
}

#[test]
fn zero_noise_file_matches_noiseless() {
    let dir = tempfile::tempdir().unwrap();
    let prog = dir.path().join("c.txt");
    fs::write(&prog, "H 0\nRY 1 0.7\nCNOT 0,1\n").unwrap();
    let noise = dir.path().join("n.txt");
    fs::write(&noise, "* depolarizing 0\n").unwrap();
    let p = prog.to_str().unwrap();
    let a = hyqnet(&["qsim", "run", p, "--shots", "500", "--seed", "1"]);
    let b = hyqnet(&[
        "qsim",
        "run",
        p,
        "--shots",
        "500",
        "--seed",
        "1",
        "--noise",
        noise.to_str().unwrap(),
    ]);
    assert!(b.status.success(), "{}", String::from_utf8_lossy(&b.stderr));
    assert_eq!(stdout(&a), stdout(&b));
}

#[test]
fn exit_codes() {
    let bad_model = hyqnet(&["train", "--model", "resnet"]);
    assert_eq!(bad_model.status.code(), Some(2));
    let missing = hyqnet(&[
        "train",
        "--model",
        "cnn",
        "--data-dir",
        "/nonexistent/dir",
        "--epochs",
        "1",
    ]);
    assert_eq!(missing.status.code(), Some(3));
    let bad_circuit = tempfile::NamedTempFile::new().unwrap();
    fs::write(bad_circuit.path(), "FOO 0\n").unwrap();
    let parse = hyqnet(&["qsim", "run", bad_circuit.path().to_str().unwrap()]);
    assert_eq!(parse.status.code(), Some(3));
    assert_eq!(hyqnet(&["bench", "--runs", "2"]).status.code(), Some(2));
}

#[test]
fn gen_synthetic_then_train_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let out = dir.path().join("run");
    let o = hyqnet(&[
        "gen-synthetic",
        "--out",
        data.to_str().unwrap(),
        "--train",
        "24",
        "--test",
        "8",
        "--digits",
        "0,1",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(data.join("train-images.idx3-ubyte").exists());
    assert!(data.join("t10k-labels.idx1-ubyte").exists());

    let o = hyqnet(&[
        "train",
        "--model",
        "hqcnn",
        "--epochs",
        "2",
        "--data-dir",
        data.to_str().unwrap(),
        "--output-dir",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let metrics = fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 3);
    assert!(out.join("checkpoint").is_dir());

    let long = dir.path().join("long.csv");
    let o = hyqnet(&[
        "plot",
        out.join("metrics.csv").to_str().unwrap(),
        "-o",
        long.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let text = fs::read_to_string(long).unwrap();
    assert!(text.starts_with("epoch,series,value\n"));
    assert_eq!(text.lines().count(), 1 + 4 * 2);
}

#[test]
fn bench_report_has_seven_rows() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bench.csv");
    let o = hyqnet(&[
        "bench",
        "--runs",
        "3",
        "--warmup",
        "0",
        "--train-samples",
        "2",
        "--test-samples",
        "2",
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("threads 1"));
    assert!(text.contains("Quantum node BP duration"));
    let table = fs::read_to_string(csv).unwrap();
    assert_eq!(table.lines().count(), 8);
    assert!(table.starts_with("category,mean_s,stddev_s,runs,threads\n"));
}
