use super::*;
use crate::field_seq::FieldSeq;
use crate::gamma::GammaSource;
use crate::grid::{Field, Grid2D};
use crate::params::{Model, ModelParams};
use crate::sensitivity::solve_adjoint;
use crate::state::{solve_state, InitialData, SolverOptions, StateTrajectory};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn setup(n: usize, nt: usize, t_final: f64) -> (Model, InitialData) {
    let g = Grid2D::unit_square(n).unwrap();
    let params = ModelParams {
        nt,
        t_final,
        ..ModelParams::default()
    };
    let model = Model::new(params, GammaSource::tanh_default(0.5).unwrap()).unwrap();
    let phi = Field::from_fn(&g, |x, y| 0.5 * (PI * x).cos() * (PI * y).cos());
    let sigma = Field::from_fn(&g, |x, _| 0.5 + 0.25 * (PI * x).cos());
    (model, InitialData::new(phi, sigma, 1e-3).unwrap())
}

fn run(model: &Model, init: &InitialData, u: &FieldSeq) -> StateTrajectory {
    solve_state(init, u, model, SolverOptions::default()).unwrap()
}

#[test]
fn perfect_tracking_costs_nothing() {
    let (model, init) = setup(8, 5, 0.1);
    let g = *init.grid();
    let u = FieldSeq::zeros(&g, 5);
    let traj = run(&model, &init, &u);
    let prob = ControlProblem::from_trajectory(&traj, [1.0, 1.0, 1.0, 1.0, 1.0], (-1.0, 1.0)).unwrap();
    assert_eq!(cost_eval(&traj, &u, &prob).unwrap().total, 0.0);
}

#[test]
fn control_cost_of_a_constant() {
    let (model, init) = setup(8, 10, 1.0);
    let g = *init.grid();
    let u = FieldSeq::constant(&g, 10, 0.3);
    let traj = run(&model, &init, &u);
    let prob = ControlProblem::from_trajectory(&traj, [0.0, 0.0, 0.0, 0.0, 2.0], (-1.0, 1.0)).unwrap();
    let c = cost_eval(&traj, &u, &prob).unwrap();
    assert!((c.total - 0.09).abs() < 1e-14);
    assert!((c.control - c.total).abs() < 1e-16);
}

#[test]
fn cost_is_linear_in_the_weights() {
    let (model, init) = setup(8, 5, 0.1);
    let g = *init.grid();
    let u = FieldSeq::constant(&g, 5, 0.2);
    let traj = run(&model, &init, &u);
    let prob = ControlProblem::uniform(&g, 5, [1.0, 0.5, 2.0, 0.25, 0.1], 0.1, 0.3, (-1.0, 1.0)).unwrap();
    let double = prob.with_alphas([2.0, 1.0, 4.0, 0.5, 0.2]).unwrap();
    let a = cost_eval(&traj, &u, &prob).unwrap().total;
    let b = cost_eval(&traj, &u, &double).unwrap().total;
    assert!((b - 2.0 * a).abs() <= 1e-14 * b);
}

#[test]
fn problem_validation() {
    let g = Grid2D::unit_square(5).unwrap();
    assert!(ControlProblem::uniform(&g, 3, [0.0; 5], 0.0, 0.0, (-1.0, 1.0)).is_err());
    assert!(ControlProblem::uniform(&g, 3, [1.0, -1.0, 0.0, 0.0, 0.0], 0.0, 0.0, (-1.0, 1.0)).is_err());
    assert!(ControlProblem::uniform(&g, 3, [1.0, 0.0, 0.0, 0.0, 0.0], 0.0, 0.0, (1.0, -1.0)).is_err());
}

#[test]
fn projection_examples() {
    let g = Grid2D::unit_square(6).unwrap();
    let prob = ControlProblem::uniform(&g, 4, [1.0, 0.0, 0.0, 0.0, 0.0], 0.0, 0.0, (-0.5, 0.5)).unwrap();
    let inside = FieldSeq::from_fn(&g, 4, |_, x, y| 0.4 * (x - y));
    assert_eq!(project_admissible(&inside, &prob).unwrap(), inside);
    let big = FieldSeq::constant(&g, 4, 1e300);
    assert_eq!(project_admissible(&big, &prob).unwrap(), FieldSeq::constant(&g, 4, 0.5));
    let wild = FieldSeq::from_fn(&g, 4, |n, x, y| 3.0 * (x - y) + n as f64);
    let once = project_admissible(&wild, &prob).unwrap();
    assert_eq!(project_admissible(&once, &prob).unwrap(), once);
    assert!(is_feasible(&once, &prob) && !is_feasible(&wild, &prob));
}

#[test]
fn stationarity_examples() {
    let g = Grid2D::unit_square(6).unwrap();
    let prob = ControlProblem::uniform(&g, 4, [1.0, 0.0, 0.0, 0.0, 0.0], 0.0, 0.0, (-0.5, 0.5)).unwrap();
    let inside = FieldSeq::constant(&g, 4, 0.1);
    let zero = FieldSeq::zeros(&g, 4);
    assert_eq!(stationarity_residual(&inside, &zero, &prob, 0.25).unwrap(), 0.0);
    // at the upper bound with the descent direction pointing outward
    let top = FieldSeq::constant(&g, 4, 0.5);
    let outward = FieldSeq::constant(&g, 4, -2.0);
    assert_eq!(stationarity_residual(&top, &outward, &prob, 0.25).unwrap(), 0.0);
    assert!(stationarity_residual(&top, &outward.scaled(-1.0), &prob, 0.25).unwrap() > 0.0);
}

#[test]
fn projection_fixed_point_is_stationary() {
    let (model, init) = setup(8, 6, 0.2);
    let g = *init.grid();
    let u = FieldSeq::zeros(&g, 6);
    let traj = run(&model, &init, &u);
    let prob = ControlProblem::uniform(&g, 6, [1.0, 1.0, 1.0, 1.0, 0.5], 0.3, 0.1, (-0.2, 0.2)).unwrap();
    let adj = solve_adjoint(&traj, &prob).unwrap();
    // u = clamp(-r / a5) with r frozen from the trajectory above
    let u_star = project_admissible(&adj.r_seq().map(|r| -r / 0.5), &prob).unwrap();
    let g_star = adj.r_seq().zip_map(&u_star, |r, v| r + 0.5 * v).unwrap();
    assert!(stationarity_residual(&u_star, &g_star, &prob, traj.dt()).unwrap() <= 1e-12);
}

#[test]
fn gradient_matches_finite_differences() {
    let (model, init) = setup(10, 8, 0.2);
    let g = *init.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let u = FieldSeq::from_fn(&g, 8, |n, x, y| 0.1 * (x + y) - 0.02 * n as f64);
    let traj = run(&model, &init, &u);
    let prob = ControlProblem::uniform(&g, 8, [1.0, 1.0, 1.0, 1.0, 0.1], 0.2, 0.8, (-1.0, 1.0)).unwrap();
    let adj = solve_adjoint(&traj, &prob).unwrap();
    let grad = reduced_gradient(&u, &adj, &prob).unwrap();
    let h = FieldSeq::new(
        &g,
        (0..8)
            .map(|_| Field::from_values(&g, (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap())
            .collect(),
    )
    .unwrap();
    let exact = grad.q_inner(&h, traj.dt()).unwrap();
    let j = |s: f64| {
        let mut v = u.clone();
        v.axpy(s, &h).unwrap();
        cost_eval(&run(&model, &init, &v), &v, &prob).unwrap().total
    };
    let best = [1e-3, 1e-4, 1e-5]
        .iter()
        .map(|&e| ((j(e) - j(-e)) / (2.0 * e) - exact).abs() / exact.abs())
        .fold(f64::INFINITY, f64::min);
    assert!(best <= 1e-8, "relative error {best}");
}

#[test]
fn control_weight_only_gradient() {
    let (model, init) = setup(6, 4, 0.1);
    let g = *init.grid();
    let u = FieldSeq::from_fn(&g, 4, |_, x, _| x);
    let traj = run(&model, &init, &u);
    let prob = ControlProblem::uniform(&g, 4, [0.0, 0.0, 0.0, 0.0, 0.7], 0.0, 0.0, (-1.0, 1.0)).unwrap();
    let adj = solve_adjoint(&traj, &prob).unwrap();
    assert_eq!(reduced_gradient(&u, &adj, &prob).unwrap(), u.scaled(0.7));
    assert!(projection_gap(&u, &adj, &prob, traj.dt()).unwrap() > 0.0);
}

#[test]
fn control_weight_only_optimum_is_zero() {
    let (model, init) = setup(8, 5, 0.1);
    let g = *init.grid();
    let prob = ControlProblem::uniform(&g, 5, [0.0, 0.0, 0.0, 0.0, 1.0], 0.0, 0.0, (-1.0, 1.0)).unwrap();
    let u0 = FieldSeq::from_fn(&g, 5, |_, x, y| 2.0 * x - y);
    let rep = optimize(
        &prob,
        &init,
        &u0,
        &model,
        SolverOptions::default(),
        &OptimizerConfig::default(),
    )
    .unwrap();
    assert!(rep.control.norm_inf() <= 1e-6, "{}", rep.control.norm_inf());
    assert_eq!(rep.stop, StopReason::Stationary);
}

#[test]
fn zero_budget_echoes_initial_cost() {
    let (model, init) = setup(8, 4, 0.1);
    let g = *init.grid();
    let prob = ControlProblem::uniform(&g, 4, [1.0, 1.0, 1.0, 1.0, 1e-3], 0.2, 0.4, (-0.5, 0.5)).unwrap();
    let u0 = FieldSeq::zeros(&g, 4);
    let cfg = OptimizerConfig {
        max_outer_iters: 0,
        ..OptimizerConfig::default()
    };
    let rep = optimize(&prob, &init, &u0, &model, SolverOptions::default(), &cfg).unwrap();
    assert_eq!(rep.records.len(), 1);
    let j0 = cost_eval(&run(&model, &init, &u0), &u0, &prob).unwrap().total;
    assert_eq!(rep.initial_cost(), j0);
}

#[test]
fn iterates_are_monotone_and_feasible() {
    let (model, init) = setup(10, 8, 0.2);
    let g = *init.grid();
    let prob = ControlProblem::uniform(&g, 8, [1.0, 1.0, 1.0, 1.0, 1e-3], -0.2, 0.9, (-0.3, 0.3)).unwrap();
    let cfg = OptimizerConfig {
        max_outer_iters: 15,
        ..OptimizerConfig::default()
    };
    let rep = optimize(
        &prob,
        &init,
        &FieldSeq::zeros(&g, 8),
        &model,
        SolverOptions::default(),
        &cfg,
    )
    .unwrap();
    for w in rep.records.windows(2) {
        assert!(w[1].cost.total <= w[0].cost.total);
    }
    assert!(rep.final_cost() < rep.initial_cost());
    assert!(is_feasible(&rep.control, &prob));
}
