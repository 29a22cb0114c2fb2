use cvxseg::phantom::{gen_phantom, PhantomSpec, Shape};
use cvxseg::solver::{narrow_band_mask, CostEvaluator};
use cvxseg::{convexity_score, hull_mask, jaccard, run, BinaryField, Solver, SolverConfig, StopReason};

#[test]
fn clean_disc_is_recovered() {
    let p = gen_phantom::<f64>(&PhantomSpec::disc(64, 15.0)).unwrap();
    let (u, report) = run(&p.image, &p.fg, &p.bg, &SolverConfig::default()).unwrap();
    assert!(jaccard(&u, &p.truth) >= 0.95);
    assert!(convexity_score(&u).unwrap() <= 0.01);
    assert_eq!(report.stop_reason, StopReason::Tolerance);
    assert!(report.convexity_score <= 0.01);
}

#[test]
fn constraint_alone_keeps_clean_disc_convex() {
    let p = gen_phantom::<f64>(&PhantomSpec::disc(64, 15.0)).unwrap();
    let cfg = SolverConfig {
        lambda: 0.0,
        ..SolverConfig::default()
    };
    let (u, report) = run(&p.image, &p.fg, &p.bg, &cfg).unwrap();
    assert_eq!(report.stop_reason, StopReason::Tolerance);
    assert!(convexity_score(&u).unwrap() <= 0.01);
}

#[test]
fn single_precision_run_agrees() {
    let p64 = gen_phantom::<f64>(&PhantomSpec::disc(48, 11.0).with_noise(10.0, 4)).unwrap();
    let p32 = gen_phantom::<f32>(&PhantomSpec::disc(48, 11.0).with_noise(10.0, 4)).unwrap();
    let cfg = SolverConfig::default();
    let (u64_, _) = run(&p64.image, &p64.fg, &p64.bg, &cfg).unwrap();
    let (u32_, _) = run(&p32.image, &p32.fg, &p32.bg, &cfg).unwrap();
    assert!(jaccard(&u64_, &u32_) > 0.98);
}

#[test]
fn without_constraints_or_length_the_step_is_pointwise_thresholding() {
    let spec = PhantomSpec::new(48, 48, Shape::LShape { x0: 8, y0: 8, arm: 14 }).with_noise(40.0, 2);
    let p = gen_phantom::<f64>(&spec).unwrap();
    let cfg = SolverConfig {
        radii: vec![],
        lambda: 0.0,
        max_iterations: 120,
        ..SolverConfig::default()
    };
    let mut solver = Solver::new(&p.image, &p.fg, &p.bg, &cfg).unwrap();
    while !solver.is_done() {
        let before = solver.state().clone();
        let band = narrow_band_mask(&before.u, cfg.band_radius, cfg.band_threshold);
        let rec = solver.step().unwrap();
        if rec.force_refreshed {
            continue;
        }
        let after = &solver.state().u;
        let labels = solver.labels();
        for (i, &in_band) in band.iter().enumerate() {
            let expected = if !in_band {
                before.u.values()[i]
            } else if labels.object_mask()[i] {
                0
            } else if labels.background_mask()[i] {
                1
            } else {
                let shifted = before.force.f.values()[i] + cfg.theta * (0.5 - before.u.values()[i] as f64);
                (shifted <= 0.0) as u8
            };
            assert_eq!(after.values()[i], expected, "t = {}, pixel {i}", rec.t);
        }
    }
}

#[test]
fn evaluator_constraints_match_multiplier_input() {
    let p = gen_phantom::<f64>(&PhantomSpec::disc(40, 9.0).with_noise(20.0, 5)).unwrap();
    let cfg = SolverConfig::default();
    let mut solver = Solver::new(&p.image, &p.fg, &p.bg, &cfg).unwrap();
    let ev = CostEvaluator::<f64>::new(40, 40, &cfg).unwrap();
    for _ in 0..20 {
        let st = solver.state().clone();
        let terms = ev.evaluate(&st.u, &st.multipliers, &st.force.f).unwrap();
        let rec = solver.step().unwrap();
        for (i, c) in terms.constraints.iter().enumerate() {
            assert_eq!(rec.min_violation[i], c.min());
            let expected = st.multipliers[i].zip_map(c, |g, cv| (g - cv).max(0.0));
            assert_eq!(&expected, &solver.state().multipliers[i]);
        }
    }
}

#[test]
fn initial_iterate_is_the_seed_hull() {
    let p = gen_phantom::<f64>(&PhantomSpec::disc(64, 15.0).with_noise(20.0, 1)).unwrap();
    let solver = Solver::new(&p.image, &p.fg, &p.bg, &SolverConfig::default()).unwrap();
    let mask = BinaryField::from_object_pixels(&p.fg);
    assert_eq!(solver.state().u, hull_mask(&mask).unwrap());
    assert!(solver.state().multipliers.iter().all(|g| g.max() == 0.0));
    assert_eq!(solver.state().iteration, 0);
}

#[test]
fn zero_iteration_budget_returns_initial_hull() {
    let p = gen_phantom::<f64>(&PhantomSpec::disc(48, 11.0)).unwrap();
    let cfg = SolverConfig {
        max_iterations: 0,
        ..SolverConfig::default()
    };
    let (u, report) = run(&p.image, &p.fg, &p.bg, &cfg).unwrap();
    assert_eq!(report.iterations, 0);
    assert_eq!(report.stop_reason, StopReason::MaxIterations);
    assert_eq!(u, hull_mask(&BinaryField::from_object_pixels(&p.fg)).unwrap());
}

#[test]
fn max_iterations_is_reported_not_raised() {
    let p = gen_phantom::<f64>(&PhantomSpec::disc(48, 11.0).with_noise(20.0, 3)).unwrap();
    let cfg = SolverConfig {
        max_iterations: 70,
        ..SolverConfig::default()
    };
    let (_, report) = run(&p.image, &p.fg, &p.bg, &cfg).unwrap();
    assert_eq!(report.iterations, 70);
    assert_eq!(report.stop_reason, StopReason::MaxIterations);
    assert!(report.final_rv.is_none());
}
