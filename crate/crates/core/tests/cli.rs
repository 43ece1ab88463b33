use std::path::Path;
use std::process::{Command, Output};

use peripinn::eval::{parse_table, FIELD_PLOT_HEADER, KERNEL_PLOT_HEADER};
use peripinn::nn::{Checkpoint, IPinnModel};

const SMALL: &[&str] = &[
    "--set",
    "dataset.n_x=21",
    "--set",
    "dataset.n_t=6",
    "--set",
    "dataset.v_delta=2",
    "--set",
    "model.c_depth=2",
    "--set",
    "model.theta_depth=2",
];

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_peripinn"))
        .args(args)
        .args(SMALL)
        .arg("--out-dir")
        .arg(dir)
        .env("PERIPINN_THREADS", "1")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn full_pipeline_writes_expected_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&run(d, &["gen-data"])), 0);
    let o = run(d, &["train", "--set", "training.epochs=3"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = std::fs::read_to_string(d.join("report.txt")).unwrap();
    assert_eq!(report.lines().filter(|l| !l.starts_with('#')).count(), 1 + 3);
    let o = run(d, &["eval"]);
    assert_eq!(code(&o), 0);
    let metrics = String::from_utf8(o.stdout).unwrap();
    for key in ["symmetry_defect = 0", "positivity = true", "correlation", "theta_relative_l2"] {
        assert!(metrics.contains(key), "{key} missing in {metrics}");
    }
    assert_eq!(std::fs::read_to_string(d.join("metrics.txt")).unwrap(), metrics);
    let kernel = parse_table(&std::fs::read_to_string(d.join("kernel_plot.txt")).unwrap(), KERNEL_PLOT_HEADER).unwrap();
    assert_eq!(kernel.len(), 21);
    assert!(kernel.iter().all(|r| r[2] >= 0.0));
    let field = parse_table(&std::fs::read_to_string(d.join("field_plot.txt")).unwrap(), FIELD_PLOT_HEADER).unwrap();
    assert_eq!(field.len(), 21 * 6);
    let echo = std::fs::read_to_string(d.join("train.config.txt")).unwrap();
    assert!(echo.contains("model.kernel_support = 2.0"));
    assert!(echo.contains("training.alpha0 = 0.0001"));
}

#[test]
fn zero_epochs_checkpoint_is_the_initial_model() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&run(d, &["gen-data"])), 0);
    assert_eq!(code(&run(d, &["train", "--seed", "4", "--set", "training.epochs=0"])), 0);
    let ck = Checkpoint::load(&d.join("checkpoint.json")).unwrap();
    let init = IPinnModel::new(ck.config.clone(), 4).unwrap();
    assert_eq!(ck.to_model().unwrap().params(), init.params());
}

#[test]
fn parametric_training_prints_the_kernel_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&run(d, &["gen-data", "--set", "dataset.kernel=gaussian"])), 0);
    let o = run(d, &["train-parametric", "--set", "dataset.kernel=gaussian", "--set", "training.epochs=2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = String::from_utf8(o.stdout).unwrap();
    assert!(out.contains("gamma_star = ") && out.contains("sigma_star = "));
    let echo = std::fs::read_to_string(d.join("train-parametric.config.txt")).unwrap();
    assert!(echo.contains("training.alpha0 = 0.001"));
    assert!(echo.contains("model.kernel_head = parametric"));
}

#[test]
fn configuration_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&run(d, &["gen-data", "--set", "model.no_such_key=1"])), 2);
    assert_eq!(code(&run(d, &["gen-data", "--set", "dataset.kernel=gaussian", "--set", "dataset.gauss_sigma=-1"])), 2);
    assert_eq!(code(&run(d, &["gen-data", "--set", "training.w_pde"])), 2);
    let cfg = d.join("bad.txt");
    std::fs::write(&cfg, "dataset.n_x = 31\nbogus line\n").unwrap();
    let o = run(d, &["gen-data", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));

    assert_eq!(code(&run(d, &["gen-data"])), 0);
    let o = run(d, &["train", "--set", "dataset.x_max=12"]);
    assert_eq!(code(&o), 2, "grid mismatch: {}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn config_file_and_overrides_compose() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = d.join("run.txt");
    std::fs::write(&cfg, "# comment\ndataset.kernel = gaussian\ndataset.n_t = 9\n").unwrap();
    let o = run(d, &["gen-data", "--config", cfg.to_str().unwrap(), "--seed", "12"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let echo = std::fs::read_to_string(d.join("gen-data.config.txt")).unwrap();
    // Command-line overrides come after the file.
    assert!(echo.contains("dataset.n_t = 6"));
    assert!(echo.contains("dataset.kernel = gaussian"));
    assert!(echo.contains("dataset.seed = 12") && echo.contains("model.seed = 12") && echo.contains("training.seed = 12"));

    let again = d.join("again");
    let o = Command::new(env!("CARGO_BIN_EXE_peripinn"))
        .args(["gen-data", "--config", d.join("gen-data.config.txt").to_str().unwrap(), "--out-dir"])
        .arg(&again)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read(again.join("dataset.txt")).unwrap(), std::fs::read(d.join("dataset.txt")).unwrap());
}

#[test]
fn io_and_corruption_errors_exit_with_4() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&run(d, &["train"])), 4);
    assert_eq!(code(&run(d, &["gen-data"])), 0);
    assert_eq!(code(&run(d, &["eval"])), 4, "missing checkpoint");

    let path = d.join("dataset.txt");
    let text = std::fs::read_to_string(&path).unwrap();
    let tampered = text.replacen(" 1.0000000000000000e0", " 1.0000000000000002e0", 1);
    assert_ne!(tampered, text);
    std::fs::write(&path, tampered).unwrap();
    let o = run(d, &["train", "--set", "training.epochs=1"]);
    assert_eq!(code(&o), 4);
    assert!(String::from_utf8_lossy(&o.stderr).contains("sha256") || String::from_utf8_lossy(&o.stderr).contains("checksum"));

    std::fs::write(&path, &text[..text.len() / 2]).unwrap();
    assert_eq!(code(&run(d, &["train", "--set", "training.epochs=1"])), 4);

    std::fs::write(&path, &text).unwrap();
    std::fs::write(d.join("checkpoint.json"), "{\"format\": 1}").unwrap();
    assert_eq!(code(&run(d, &["eval"])), 4);
}

#[test]
fn divergence_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&run(d, &["gen-data", "--set", "dataset.sign=growing", "--set", "dataset.t_max=2"])), 0);
    let o = run(d, &["gen-data", "--set", "dataset.sign=growing", "--set", "dataset.t_max=1000"]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn bad_thread_setting_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_peripinn"))
        .args(["gen-data", "--out-dir"])
        .arg(dir.path())
        .env("PERIPINN_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}
