use chks::cli::config::{RawConfig, RunConfig};
use chks::io::{read_control, read_trajectory, trajectory_report, write_control, write_trajectory};
use chks::state::solve_state;
use chks::verify::{self, CheckSetup};
use proptest::prelude::*;
use tempfile::TempDir;

fn config(pairs: &[(&str, String)]) -> RunConfig {
    let mut raw = RawConfig::preset("small").unwrap();
    for (k, v) in pairs {
        raw.set(k, v).unwrap();
    }
    raw.build().unwrap()
}

fn setup(cfg: &RunConfig) -> CheckSetup {
    let init = cfg.initial_data().unwrap();
    CheckSetup {
        model: cfg.model,
        problem: cfg.problem(&init).unwrap(),
        control: cfg.initial_control().unwrap(),
        init,
        options: cfg.options,
    }
}

#[test]
fn trajectory_files_round_trip() {
    let cfg = config(&[
        ("grid.nx", "9".into()),
        ("grid.ny", "7".into()),
        ("model.nt", "6".into()),
    ]);
    let s = setup(&cfg);
    let traj = solve_state(&s.init, &s.control, &s.model, s.options).unwrap();
    let tmp = TempDir::new().unwrap();
    write_trajectory(tmp.path(), &traj, 4).unwrap();
    let stored = read_trajectory(tmp.path()).unwrap();
    assert_eq!(stored.meta.steps, vec![0, 4, 6]);
    assert_eq!(stored.meta.grid, *traj.grid());
    for (n, phi, sigma) in &stored.snapshots {
        assert_eq!(phi, &traj.step(*n).phi);
        assert_eq!(sigma, &traj.step(*n).sigma);
    }
    let rep = trajectory_report(&stored);
    assert_eq!(rep.separation_margin, traj.separation_margin());
    assert_eq!(rep.csv.lines().count(), 1 + 3);
}

#[test]
fn control_files_round_trip() {
    let cfg = config(&[("control.source", "constant".into()), ("control.value", "0.125".into())]);
    let u = cfg.initial_control().unwrap();
    let tmp = TempDir::new().unwrap();
    write_control(tmp.path(), &u).unwrap();
    assert_eq!(read_control(tmp.path(), &cfg.grid, cfg.model.params.nt).unwrap(), u);
    assert!(read_control(tmp.path(), &cfg.grid, cfg.model.params.nt + 1).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn discrete_identities_hold_on_random_problems(
        n in 5usize..11,
        nt in 2usize..8,
        tau in 0.05f64..1.0,
        c0 in 1.1f64..2.5,
        a in 0.0f64..1.0,
        u in -0.5f64..0.5,
        seed in 0u64..1000,
    ) {
        let cfg = config(&[
            ("grid.nx", n.to_string()),
            ("grid.ny", (n + 2).to_string()),
            ("model.nt", nt.to_string()),
            ("model.tau", tau.to_string()),
            ("model.c0", c0.to_string()),
            ("gamma.a", a.to_string()),
            ("init.preset", "seeded-noise".into()),
            ("init.noise_amplitude", "0.6".into()),
            ("control.source", "constant".into()),
            ("control.value", u.to_string()),
            ("seed", seed.to_string()),
        ]);
        let s = setup(&cfg);
        let traj = solve_state(&s.init, &s.control, &s.model, s.options).unwrap();
        prop_assert!(traj.separation_margin() > 0.0);
        let mass = verify::check_mass(&s).unwrap();
        prop_assert!(mass.pass(), "{}", mass);
        let duality = verify::check_duality(&s, 2, seed).unwrap();
        prop_assert!(duality.pass(), "{}", duality);
        let transpose = verify::check_transpose(&s, seed).unwrap();
        prop_assert!(transpose.pass(), "{}", transpose);
    }
}
