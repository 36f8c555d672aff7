use flhsions::baselines::{
    best_tuned_ogd, flh_constant_experts_run, linsmooth, linsmooth_environment, ogd_run,
    ogd_step, ogd_step_grid, OgdState,
};
use flhsions::flh::{adaptive_overhead_bound, flh_run, FlhConfig};
use flhsions::losses::{make_scaled_squared_loss, LossOracle};
use flhsions::oracle::tv_variation_scalar;
use flhsions::sions::{sions_static_regret_bound, SionsConfig};

#[test]
fn half_step_toward_unit_target() {
    let loss = LossOracle::quadratic(vec![1.0], 1.0, 1.0, 1.0).unwrap();
    let mut s = OgdState::new(1, 0.5, 1.0).unwrap();
    assert!(!ogd_step(&mut s, &loss).unwrap());
    assert_eq!(s.w, vec![0.5]);
    let mut at = OgdState::new(1, 0.5, 1.0).unwrap();
    at.w = vec![1.0];
    ogd_step(&mut at, &loss).unwrap();
    assert_eq!(at.w, vec![1.0]);
}

#[test]
fn steps_outside_the_unit_interval_are_rejected() {
    assert!(OgdState::new(1, 1.0, 1.0).is_err());
    assert!(OgdState::new(1, 1.5, 1.0).is_err());
    assert!(OgdState::new(1, 0.0, 1.0).is_err());
    let alternating: Vec<_> = (0..10)
        .map(|t| make_scaled_squared_loss(&[if t % 2 == 0 { 1.0 } else { -1.0 }]).unwrap())
        .collect();
    assert!(ogd_run(&alternating, 1.0, 1.0).is_err());
}

#[test]
fn step_grid_and_tuning() {
    let grid = ogd_step_grid(100, &[0.5, 2.0], &[0.0, 0.5]);
    assert_eq!(grid, vec![0.05, 0.2, 0.5]);
    let f: Vec<_> = (0..200).map(|_| make_scaled_squared_loss(&[0.8]).unwrap()).collect();
    let (eta, run) = best_tuned_ogd(&f, &grid, 1.0).unwrap();
    assert_eq!(eta, 0.5);
    for other in &grid {
        let total: f64 = ogd_run(&f, *other, 1.0).unwrap().losses.iter().sum();
        assert!(run.losses.iter().sum::<f64>() <= total);
    }
    assert!(best_tuned_ogd(&f, &[], 1.0).is_err());
}

#[test]
fn zero_stream_matches_full_flh() {
    // Every expert of both ensembles stays at 0, so the runs coincide.
    let f: Vec<_> = (0..60).map(|_| make_scaled_squared_loss(&[0.0]).unwrap()).collect();
    let sigma = f[0].constants().sigma;
    let a = flh_constant_experts_run(sigma, &f).unwrap();
    let b = flh_run(FlhConfig::new(1, sigma), &f).unwrap();
    for (p, q) in a.predictions.iter().zip(&b.predictions) {
        assert!((p[0] - q[0]).abs() <= 1e-9);
    }
}

#[test]
fn single_round_constant_expert_predicts_zero() {
    let run = flh_constant_experts_run(0.1, &[make_scaled_squared_loss(&[0.3]).unwrap()]).unwrap();
    assert_eq!(run.predictions, vec![vec![0.0]]);
}

#[test]
fn one_jump_costs_at_most_two_segments() {
    let n = 300;
    let jump = 137;
    let target = |t: usize| if t < jump { 0.6 } else { -0.5 };
    let f: Vec<_> = (0..n).map(|t| make_scaled_squared_loss(&[target(t)]).unwrap()).collect();
    let sigma = f[0].constants().sigma;
    let run = flh_constant_experts_run(sigma, &f).unwrap();
    let total: f64 = run.losses.iter().sum();
    assert!(total.is_finite());
    // Per segment: a constant expert's static bound (gradient norm <= 1 with
    // covariate [1, 0]) plus the FLH overhead against that expert.
    let cfg = SionsConfig::new(1, sigma);
    let segment = |len: usize, mu: f64| {
        sions_static_regret_bound(&cfg, len, mu * mu, 1.0).unwrap()
            + adaptive_overhead_bound(sigma, n).unwrap()
    };
    let bound = segment(jump, 0.6) + segment(n - jump, 0.5);
    assert!(total <= bound, "{total} > {bound}");
}

#[test]
fn linsmooth_environment_properties() {
    for seed in 0..5 {
        let n = 1000;
        let env = linsmooth_environment(n, seed).unwrap();
        assert_eq!(env.theta.len(), n);
        assert!(tv_variation_scalar(&env.theta, 1).unwrap() <= 1.0 + 1e-9);
        assert!(env.theta.iter().all(|x| x.abs() <= linsmooth::theta_bound()));
        assert!(env.labels.iter().all(|y| y.abs() <= linsmooth::label_bound() + 1e-15));
        let r = linsmooth::box_radius();
        for (loss, y) in env.losses.iter().zip(&env.labels) {
            for x in [-r, r] {
                let g = loss.gradient(&[x]).unwrap()[0];
                assert!((g - linsmooth::weight() * (x - y)).abs() < 1e-14);
                assert!(g.abs() <= 1.0);
            }
        }
        let again = linsmooth_environment(n, seed).unwrap();
        assert_eq!(env.labels, again.labels);
    }
}

#[test]
fn ogd_never_clips_on_the_smooth_environment() {
    let env = linsmooth_environment(2000, 3).unwrap();
    for eta in [0.1, 0.5, 0.9] {
        let run = ogd_run(&env.losses, eta, linsmooth::box_radius()).unwrap();
        assert_eq!(run.clipped_rounds, 0);
        assert!(run.max_abs_iterate <= linsmooth::label_bound() + 1e-12);
        let again = ogd_run(&env.losses, eta, linsmooth::box_radius()).unwrap();
        assert_eq!(run.predictions, again.predictions);
    }
}
