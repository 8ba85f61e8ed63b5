//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::time::{Duration, Instant};

use chks::cli::config::{RawConfig, RunConfig};
use chks::control::{is_feasible, optimize, projection_gap, OptimizationReport};
use chks::state::{mass_balance_report, solve_state, StateTrajectory};
use chks::verify::{self, CheckOutcome, CheckSetup};

const SEED: u64 = 20240611;

struct Line {
    id: usize,
    text: String,
    pass: bool,
}

fn config(preset: &str, overrides: &[(&str, &str)]) -> RunConfig {
    let mut raw = RawConfig::preset(preset).expect("preset");
    for (k, v) in overrides {
        raw.set(k, v).expect("known key");
    }
    raw.build().expect("valid configuration")
}

fn setup(cfg: &RunConfig) -> CheckSetup {
    let init = cfg.initial_data().expect("initial data");
    CheckSetup {
        model: cfg.model,
        problem: cfg.problem(&init).expect("problem"),
        control: cfg.initial_control().expect("control"),
        init,
        options: cfg.options,
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

fn line(id: usize, checks: &[CheckOutcome], elapsed: Duration, limit: Option<Duration>, extra: &str) -> Line {
    let in_time = limit.is_none_or(|l| elapsed < l);
    let pass = checks.iter().all(CheckOutcome::pass) && in_time;
    let parts: Vec<String> = checks
        .iter()
        .map(|c| {
            format!(
                "{} = {:.3e} ({} {:.1e})",
                c.name,
                c.measured,
                if c.upper { "<=" } else { ">=" },
                c.threshold
            )
        })
        .collect();
    let time = match limit {
        Some(l) => format!("{:.1} s (< {} s)", elapsed.as_secs_f64(), l.as_secs()),
        None => format!("{:.1} s", elapsed.as_secs_f64()),
    };
    let text = format!(
        "[{}] {}; {}{}",
        if pass { "PASS" } else { "FAIL" },
        parts.join("; "),
        time,
        extra
    );
    println!("criterion {id:>2} {text}");
    Line { id, text, pass }
}

fn failed(id: usize, what: &str, err: impl std::fmt::Display) -> Line {
    let text = format!("[FAIL] {what}: {err}");
    println!("criterion {id:>2} {text}");
    Line { id, text, pass: false }
}

fn secs(s: u64) -> Option<Duration> {
    Some(Duration::from_secs(s))
}

fn monotone(rep: &OptimizationReport) -> bool {
    rep.records.windows(2).all(|w| w[1].cost.total <= w[0].cost.total)
}

fn main() {
    let mut lines = Vec::new();
    // (run, separation margin, min sigma)
    let mut runs: Vec<(&str, f64, f64)> = Vec::new();
    let mut record = |name: &'static str, t: &StateTrajectory| {
        runs.push((name, t.separation_margin(), t.min_sigma()));
    };

    // 1. logistic oracle
    let (res, el) = timed(|| verify::check_logistic(16, 1000));
    lines.push(match res {
        Ok((e, r)) => line(1, &[e, r], el, secs(5), ""),
        Err(e) => failed(1, "logistic run", e),
    });

    // 2. mass balance on the default benchmark
    let bench = config("default", &[]);
    let s2 = setup(&bench);
    let (res, el) = timed(|| {
        let t = solve_state(&s2.init, &s2.control, &s2.model, s2.options)?;
        let worst = mass_balance_report(&t, &s2.control)?
            .iter()
            .map(|r| r.worst_relative())
            .fold(0.0, f64::max);
        Ok::<_, chks::Error>((t, worst))
    });
    lines.push(match res {
        Ok((t, worst)) => {
            record("default 64x64", &t);
            let c = CheckOutcome {
                name: "mass balance residual".into(),
                measured: worst,
                threshold: 1e-10,
                upper: true,
            };
            line(2, &[c], el, secs(60), "")
        }
        Err(e) => failed(2, "default benchmark", e),
    });

    // 4. tangent vs finite differences
    let s4 = setup(&config(
        "default",
        &[("grid.nx", "32"), ("grid.ny", "32"), ("model.nt", "50")],
    ));
    let (res, el) = timed(|| {
        let t = solve_state(&s4.init, &s4.control, &s4.model, s4.options)?;
        Ok::<_, chks::Error>((t, verify::check_tangent(&s4, 1e-5, SEED)?))
    });
    let c4 = match res {
        Ok((t, c)) => {
            record("32x32, nt = 50", &t);
            line(4, &[c], el, secs(60), "")
        }
        Err(e) => failed(4, "tangent check", e),
    };

    // 5. duality and 6. gradient on 16x16, nt = 20
    let small = config("small", &[]);
    let s5 = setup(&small);
    if let Ok(t) = solve_state(&s5.init, &s5.control, &s5.model, s5.options) {
        record("16x16, nt = 20", &t);
    }
    let (res, el) = timed(|| verify::check_duality(&s5, 5, SEED));
    let c5 = match res {
        Ok(c) => line(5, &[c], el, secs(30), ""),
        Err(e) => failed(5, "duality check", e),
    };
    let (res, el) = timed(|| verify::check_gradient(&s5, &[1e-3, 1e-4, 1e-5], SEED));
    let c6 = match res {
        Ok(c) => line(6, &[c], el, secs(60), ""),
        Err(e) => failed(6, "gradient check", e),
    };

    // 7. inverse problem
    let inv = config("inverse-problem", &[]);
    let s7 = setup(&inv);
    let (res, el) = timed(|| {
        optimize(
            &s7.problem,
            &s7.init,
            &s7.control,
            &s7.model,
            s7.options,
            &inv.optimizer,
        )
    });
    let mut gap_small_weight = None;
    let c7 = match res {
        Ok(rep) => {
            record("inverse-problem optimum", &rep.trajectory);
            let ratio = rep.final_cost() / rep.initial_cost();
            let iters = rep.records.len() - 1;
            let feasible = is_feasible(&rep.control, &s7.problem);
            let dt = inv.model.params.dt();
            gap_small_weight = projection_gap(&rep.control, &rep.adjoint, &s7.problem, dt).ok();
            let checks = [
                CheckOutcome {
                    name: "J_final / J(0)".into(),
                    measured: ratio,
                    threshold: 1e-2,
                    upper: true,
                },
                CheckOutcome {
                    name: "stationarity".into(),
                    measured: rep.final_stationarity(),
                    threshold: 1e-4,
                    upper: true,
                },
                CheckOutcome {
                    name: "iterations".into(),
                    measured: iters as f64,
                    threshold: 200.0,
                    upper: true,
                },
                CheckOutcome {
                    name: "monotone".into(),
                    measured: monotone(&rep) as u8 as f64,
                    threshold: 1.0,
                    upper: false,
                },
                CheckOutcome {
                    name: "feasible".into(),
                    measured: feasible as u8 as f64,
                    threshold: 1.0,
                    upper: false,
                },
            ];
            line(7, &checks, el, secs(600), &format!("; stop = {:?}", rep.stop))
        }
        Err(e) => failed(7, "inverse problem", e),
    };

    // 8. projected characterization of the optimum, on the same inverse
    // problem with a control weight the optimizer can resolve to the gap
    // tolerance
    let inv8 = config(
        "inverse-problem",
        &[
            ("cost.alpha5", "1e-2"),
            ("opt.stationarity_tol", "1e-9"),
            ("output.name", "alpha5-1e-2"),
        ],
    );
    let s8 = setup(&inv8);
    let (res, el) = timed(|| {
        let rep = optimize(
            &s8.problem,
            &s8.init,
            &s8.control,
            &s8.model,
            s8.options,
            &inv8.optimizer,
        )?;
        let gap = projection_gap(&rep.control, &rep.adjoint, &s8.problem, inv8.model.params.dt())?;
        Ok::<_, chks::Error>((rep, gap))
    });
    let c8 = match res {
        Ok((rep, gap)) => {
            record("inverse-problem optimum, alpha5 = 1e-2", &rep.trajectory);
            let c = CheckOutcome {
                name: "|u - clamp(-r/alpha5)|_Q at alpha5 = 1e-2".into(),
                measured: gap,
                threshold: 1e-4,
                upper: true,
            };
            let info = match gap_small_weight {
                Some(g) => format!("; at the alpha5 = 1e-6 optimum the gap is {g:.3e}"),
                None => String::new(),
            };
            line(8, &[c], el, None, &info)
        }
        Err(e) => failed(8, "projection characterization", e),
    };

    // 9. continuous dependence
    let (res, el) = timed(|| verify::continuous_dependence(&s5, 10, 0.5, SEED));
    let c9 = match res {
        Ok(rep) => line(
            9,
            &[rep.outcome()],
            el,
            None,
            &format!("; max ratio {:.3e}, min ratio {:.3e}", rep.max(), rep.min()),
        ),
        Err(e) => failed(9, "continuous dependence", e),
    };

    // 10. Laplacian order across h, h/2, h/4
    let (res, el) = timed(|| verify::check_laplacian_order(&[17, 33, 65]));
    let c10 = match res {
        Ok(c) => line(10, &[c], el, None, ""),
        Err(e) => failed(10, "Laplacian order", e),
    };

    // 3. separation and positivity over every benchmark run above
    let margin = runs.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let min_sigma = runs.iter().map(|r| r.2).fold(f64::INFINITY, f64::min);
    let c3 = line(
        3,
        &[
            CheckOutcome {
                name: "1 - max |phi|".into(),
                measured: margin,
                threshold: 1e-9,
                upper: false,
            },
            CheckOutcome {
                name: "min sigma".into(),
                measured: min_sigma,
                threshold: -1e-8,
                upper: false,
            },
        ],
        Duration::ZERO,
        None,
        &format!("; over {} runs", runs.len()),
    );

    lines.extend([c3, c4, c5, c6, c7, c8, c9, c10]);
    lines.sort_by_key(|l| l.id);
    println!();
    println!("acceptance summary");
    for l in &lines {
        println!("  {:>2} {}", l.id, l.text);
    }
    let failures = lines.iter().filter(|l| !l.pass).count();
    println!("{} of {} criteria pass", lines.len() - failures, lines.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
