use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn chks(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chks"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    fs::write(dir.join(name), body).unwrap();
    name.to_string()
}

const TINY: &str = "preset = small\ngrid.nx = 8\ngrid.ny = 8\nmodel.nt = 5\n";

#[test]
fn simulate_writes_trajectory_and_report_reads_it() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "run.cfg", &format!("{TINY}output.stride = 2\n"));
    let out = chks(tmp.path(), &["--config", &cfg, "--out", "o", "simulate"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let traj = tmp.path().join("o/traj/run");
    for f in [
        "meta.txt",
        "monitors.csv",
        "phi_0.chks1",
        "phi_2.chks1",
        "phi_4.chks1",
        "phi_5.chks1",
        "sigma_5.chks1",
    ] {
        assert!(traj.join(f).exists(), "{f} missing");
    }
    assert!(!traj.join("phi_1.chks1").exists());

    let out = chks(tmp.path(), &["report", "o/traj/run"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(traj.join("report.csv")).unwrap();
    assert!(csv.starts_with("step,time,phi_min,phi_max,sigma_min,sigma_max,mass_phi,mass_sigma,"));
    assert_eq!(csv.lines().count(), 1 + 4);
}

#[test]
fn zero_nutrient_run_has_no_chemotactic_energy() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "z.cfg",
        &format!("{TINY}init.preset = uniform\ninit.phi = 0.3\ninit.sigma = 0.0\ngamma.a = 0.0\n"),
    );
    assert_eq!(
        code(&chks(tmp.path(), &["--config", &cfg, "--out", "o", "simulate"])),
        0
    );
    assert_eq!(code(&chks(tmp.path(), &["report", "o/traj/run"])), 0);
    let csv = fs::read_to_string(tmp.path().join("o/traj/run/report.csv")).unwrap();
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    for row in csv.lines().skip(1) {
        let v: Vec<f64> = row.split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(v[col("energy_M")], 0.0);
        assert_eq!(v[col("sigma_max")], 0.0);
        assert!(v[col("phi_max")] < 1.0);
    }
}

#[test]
fn zero_steps_is_a_valid_run() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "n0.cfg", "preset = small\nmodel.nt = 0\n");
    let out = chks(tmp.path(), &["--config", &cfg, "--out", "o", "simulate"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(tmp.path().join("o/traj/run/phi_0.chks1").exists());
}

#[test]
fn optimize_with_no_iterations_logs_only_the_start() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "opt.cfg",
        &format!("{TINY}opt.max_iters = 0\noutput.adjoint = true\n"),
    );
    let out = chks(tmp.path(), &["--config", &cfg, "--out", "o", "optimize"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let log = fs::read_to_string(tmp.path().join("o/opt/run/optimization.csv")).unwrap();
    assert_eq!(log.lines().count(), 2);
    assert!(log.lines().nth(1).unwrap().starts_with("0,"));
    assert!(tmp.path().join("o/ctrl/run/u_0.chks1").exists());
    assert!(tmp.path().join("o/ctrl/run/u_4.chks1").exists());
    assert!(tmp.path().join("o/adj/run").is_dir());
}

#[test]
fn optimize_decreases_cost() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "opt.cfg", &format!("{TINY}opt.max_iters = 5\n"));
    let out = chks(tmp.path(), &["--config", &cfg, "--out", "o", "optimize"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let log = fs::read_to_string(tmp.path().join("o/opt/run/optimization.csv")).unwrap();
    let costs: Vec<f64> = log
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(costs.len() > 1);
    assert!(costs.windows(2).all(|w| w[1] <= w[0]));
    assert!(costs.last().unwrap() < &costs[0]);
}

#[test]
fn configuration_errors_exit_with_2() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&chks(tmp.path(), &["--config", "missing.cfg", "simulate"])), 2);
    let zero = write_config(
        tmp.path(),
        "zero.cfg",
        "cost.alpha1 = 0\ncost.alpha2 = 0\ncost.alpha3 = 0\ncost.alpha4 = 0\ncost.alpha5 = 0\n",
    );
    assert_eq!(code(&chks(tmp.path(), &["--config", &zero, "optimize"])), 2);
    let unknown = write_config(tmp.path(), "unknown.cfg", "model.taux = 1\n");
    assert_eq!(code(&chks(tmp.path(), &["--config", &unknown, "simulate"])), 2);
    let bounds = write_config(tmp.path(), "bounds.cfg", "cost.u_min = 1\ncost.u_max = -1\n");
    assert_eq!(code(&chks(tmp.path(), &["--config", &bounds, "optimize"])), 2);
    assert_eq!(code(&chks(tmp.path(), &["report", "no/such/dir"])), 2);
    assert_eq!(code(&chks(tmp.path(), &["frobnicate"])), 2);
}

#[test]
fn corrupt_trajectory_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "run.cfg", TINY);
    assert_eq!(
        code(&chks(tmp.path(), &["--config", &cfg, "--out", "o", "simulate"])),
        0
    );
    fs::write(tmp.path().join("o/traj/run/phi_3.chks1"), b"CHKS1 garbage").unwrap();
    assert_eq!(code(&chks(tmp.path(), &["report", "o/traj/run"])), 2);
}

#[test]
fn negative_nutrient_under_strict_positivity_exits_with_3() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "neg.cfg",
        &format!("{TINY}control.source = constant\ncontrol.value = -2\n"),
    );
    let out = chks(
        tmp.path(),
        &["--config", &cfg, "--out", "o", "--strict-positivity", "simulate"],
    );
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    let out = chks(tmp.path(), &["--config", &cfg, "--out", "o", "simulate"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let cfg = write_config(
        tmp.path(),
        "neg2.cfg",
        &format!("{TINY}control.source = constant\ncontrol.value = -50\n"),
    );
    assert_eq!(
        code(&chks(tmp.path(), &["--config", &cfg, "--out", "o", "simulate"])),
        3
    );
}

#[test]
fn checks_pass_on_the_small_problem() {
    let tmp = TempDir::new().unwrap();
    for which in ["gradient", "duality", "transpose", "mass", "convergence"] {
        let out = chks(tmp.path(), &["check", which]);
        assert_eq!(code(&out), 0, "{which}: {}", String::from_utf8_lossy(&out.stdout));
        assert!(String::from_utf8_lossy(&out.stdout).contains("PASS"));
    }
}

#[test]
fn check_refuses_large_problems() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "big.cfg", "grid.nx = 128\ngrid.ny = 128\nmodel.nt = 20\n");
    assert_eq!(code(&chks(tmp.path(), &["--config", &cfg, "check", "mass"])), 2);
}

#[test]
fn seed_changes_noise_initial_data() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "n.cfg", &format!("{TINY}init.preset = seeded-noise\n"));
    let run = |seed: &str, out: &str| {
        let o = chks(
            tmp.path(),
            &["--config", &cfg, "--seed", seed, "--out", out, "simulate"],
        );
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        fs::read(tmp.path().join(out).join("traj/run/phi_0.chks1")).unwrap()
    };
    let a = run("1", "a");
    assert_eq!(a, run("1", "b"));
    assert_ne!(a, run("2", "c"));
}
