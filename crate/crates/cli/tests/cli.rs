//! End-to-end runs of the `shapeloss` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use shapeloss::data::StarShape;
use shapeloss::io;
use shapeloss::mask::BinaryMask;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shapeloss"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn write_disk(dir: &Path) -> String {
    let path = dir.join("disk.pbm");
    io::write_pbm(
        &path,
        &StarShape::disk((31.5, 31.5), 25.0).rasterize(64, 64),
    )
    .unwrap();
    path.to_str().unwrap().to_string()
}

const SMALL_DATA: [&str; 10] = [
    "--train-count",
    "6",
    "--val-count",
    "3",
    "--test-count",
    "3",
    "--width",
    "64",
    "--height",
    "64",
];

#[test]
fn describe_disk_writes_near_zero_amplitudes() {
    let dir = tempfile::tempdir().unwrap();
    let mask = write_disk(dir.path());
    let csv = dir.path().join("d.csv");
    let out = run(&[
        "describe",
        &mask,
        "--order",
        "4",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    let a0: f64 = lines[0].split(',').nth(1).unwrap().parse().unwrap();
    assert_eq!(lines[1], "n,a_n,b_n,Z_n");
    let rows = &lines[2..];
    assert_eq!(rows.len(), 4);
    for row in rows {
        let z: f64 = row.split(',').nth(3).unwrap().parse().unwrap();
        assert!(z / a0 < 0.02, "{row}");
    }
    // Printed amplitudes agree with the file.
    let printed = stdout(&out);
    for (n, row) in rows.iter().enumerate() {
        let z = row.split(',').nth(3).unwrap();
        assert!(printed.contains(&format!("Z_{} = {z}", n + 1)), "{printed}");
    }
}

#[test]
fn describe_reports_bad_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("none.pbm");
    assert_eq!(code(&run(&["describe", missing.to_str().unwrap()])), 2);
    let mask = write_disk(dir.path());
    assert_eq!(code(&run(&["describe", &mask, "--order", "0"])), 1);

    let empty = dir.path().join("empty.pbm");
    io::write_pbm(&empty, &BinaryMask::zeros(16, 16)).unwrap();
    assert_eq!(code(&run(&["describe", empty.to_str().unwrap()])), 3);
}

#[test]
fn reconstruction_improves_with_order() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("square.pbm");
    let square = BinaryMask::from_fn(64, 64, |r, c| {
        (12..52).contains(&r) && (12..52).contains(&c)
    });
    io::write_pbm(&path, &square).unwrap();
    let outdir = dir.path().join("rec");
    let out = run(&[
        "reconstruct",
        path.to_str().unwrap(),
        "--orders",
        "1,2,8",
        "--out",
        outdir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let iou = |n: usize| {
        let rec = io::read_mask(outdir.join(format!("reconstruction_order_{n}.pbm"))).unwrap();
        square.iou(&rec).unwrap()
    };
    let (i1, i2, i8) = (iou(1), iou(2), iou(8));
    assert!(i8 > i1, "order 8 {i8} vs order 1 {i1}");
    assert!(i2 > 0.0);
}

#[test]
fn reconstruct_needs_orders() {
    let dir = tempfile::tempdir().unwrap();
    let mask = write_disk(dir.path());
    let out = dir.path().join("rec");
    assert_eq!(
        code(&run(&[
            "reconstruct",
            &mask,
            "--out",
            out.to_str().unwrap()
        ])),
        1
    );
    assert_eq!(
        code(&run(&[
            "reconstruct",
            &mask,
            "--orders",
            "",
            "--out",
            out.to_str().unwrap()
        ])),
        1
    );
}

#[test]
fn oracle_predictions_evaluate_perfectly() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let mut args = vec!["generate", "--out", data.to_str().unwrap()];
    args.extend(SMALL_DATA);
    assert_eq!(code(&run(&args)), 0);

    // Copy every test mask as its own prediction.
    let preds = dir.path().join("preds");
    fs::create_dir_all(&preds).unwrap();
    let manifest: Vec<_> = fs::read_dir(&data)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.to_str().unwrap().ends_with("_mask.pbm"))
        .collect();
    for p in &manifest {
        let name = p
            .file_name()
            .unwrap()
            .to_str()
            .unwrap()
            .replace("_mask.pbm", "_pred.pbm");
        fs::copy(p, preds.join(name)).unwrap();
    }
    let csv = dir.path().join("eval.csv");
    let out = run(&[
        "eval",
        "--data",
        data.to_str().unwrap(),
        "--pred-dir",
        preds.to_str().unwrap(),
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    let mean = text.lines().find(|l| l.starts_with("mean,")).unwrap();
    assert_eq!(mean, "mean,1,1,1,1,0");
}

#[test]
fn train_then_eval_model() {
    let dir = tempfile::tempdir().unwrap();
    let run_dir = dir.path().join("run");
    let mut args = vec![
        "train",
        "--out",
        run_dir.to_str().unwrap(),
        "--max-epochs",
        "2",
        "--warmup-epochs",
        "1",
    ];
    args.extend(SMALL_DATA);
    let out = run(&args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["model.bin", "runlog.jsonl", "metrics.csv"] {
        assert!(run_dir.join(f).exists(), "{f}");
    }
    let csv = dir.path().join("again.csv");
    let model = run_dir.join("model.bin");
    let mut eval = vec![
        "eval",
        "--model",
        model.to_str().unwrap(),
        "--out",
        csv.to_str().unwrap(),
    ];
    eval.extend(SMALL_DATA);
    assert_eq!(code(&run(&eval)), 0);
    assert_eq!(
        fs::read_to_string(&csv).unwrap(),
        fs::read_to_string(run_dir.join("metrics.csv")).unwrap()
    );
}

#[test]
fn compare_writes_one_run_per_loss_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    let outdir = dir.path().join("cmp");
    let mut args = vec![
        "compare",
        "--losses",
        "cross-entropy,fourier-fixed",
        "--seeds",
        "0,1",
        "--max-epochs",
        "2",
        "--warmup-epochs",
        "1",
        "--out",
        outdir.to_str().unwrap(),
    ];
    args.extend(SMALL_DATA);
    let out = run(&args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let runs = fs::read_to_string(outdir.join("runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 1 + 4);
    let summary = fs::read_to_string(outdir.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 2);
    assert!(summary.contains(" ± "));
    assert_eq!(fs::read_dir(outdir.join("logs")).unwrap().count(), 4);
}

#[test]
fn config_file_supplies_options_and_bad_config_fails() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.conf");
    fs::write(
        &good,
        "# tiny run\ntrain_count = 6\nval_count = 3\ntest_count = 3\nwidth = 64\nheight = 64\nmax_epochs = 1\nwarmup_epochs = 0\n",
    )
    .unwrap();
    let run_dir = dir.path().join("run");
    let out = run(&[
        "--config",
        good.to_str().unwrap(),
        "train",
        "--out",
        run_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let log = fs::read_to_string(run_dir.join("runlog.jsonl")).unwrap();
    assert_eq!(
        log.lines().count(),
        1 + 2 + 1,
        "config, epochs 0 and 1, stop"
    );

    let bad = dir.path().join("bad.conf");
    fs::write(&bad, "max_epochs = many\n").unwrap();
    let out = run(&[
        "--config",
        bad.to_str().unwrap(),
        "train",
        "--out",
        run_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
}
