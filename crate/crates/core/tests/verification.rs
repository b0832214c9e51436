use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scov_core::interval::IBox;
use scov_core::stl::{monitor_trace, parse, PredicateRegistry, Signal, StlFormula};
use scov_core::traffic_sim::*;
use scov_core::verification::*;

fn wall(v: f64, a: f64, d: f64) -> EpisodeConfig {
    EpisodeConfig {
        duration: 5.0,
        step: 0.01,
        seed: 0,
        ego: EgoConfig {
            model: EgoModel::Longitudinal,
            x: 0.0,
            y: 0.0,
            heading: 0.0,
            v,
            footprint: Footprint::default(),
            accel: (-a, 2.0),
            steer: None,
        },
        agents: vec![AgentConfig {
            x: 4.5 + d,
            y: 0.0,
            v: 0.0,
            footprint: Footprint::default(),
            behavior: Behavior::ConstantVelocity,
        }],
        lane: Lane::default(),
        domain: SimDomain::default(),
    }
}

fn reg() -> PredicateRegistry {
    PredicateRegistry::with_builtins()
}

fn spec() -> StlFormula {
    parse("G[0,5] collision_free", &reg()).unwrap()
}

fn acc() -> ControlLaw {
    ControlLaw::Acc {
        v_ref: 14.0,
        time_gap: 1.2,
        standstill: 2.0,
        gain_gap: 0.4,
        gain_speed: 0.8,
        gain_cruise: 0.5,
        brake_decel: 5.0,
    }
}

#[test]
fn a_posteriori_matches_the_monitor_on_random_traces() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let reg = reg();
    let formulas = ["G[0,1] collision_free", "F[0,0.5] collision_free", "collision_free U[0,2] in_lane", "G collision_free & F in_lane"];
    for _ in 0..200 {
        let n = rng.gen_range(1..40);
        let times: Vec<f64> = (0..n).map(|k| k as f64 * 0.1).collect();
        let states: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.gen_range(-1.0..3.0), rng.gen_range(-1.0..1.0)]).collect();
        let sig = Signal::new(vec!["clearance".into(), "lane_margin".into()], times, states).unwrap();
        for f in formulas {
            let phi = parse(f, &reg).unwrap();
            let v = verify_a_posteriori(&sig, &phi, &reg).unwrap();
            let m = monitor_trace(&sig, &phi, &reg).unwrap();
            assert_eq!(v.outcome() == Outcome::SafeVerified, m.verdicts[0]);
            v.check().unwrap();
            if let Some(viol) = v.evidence().violation {
                assert!(viol.sample < n);
            }
        }
    }
}

#[test]
fn brake_policy_in_avoidable_zone_verifies() {
    let brake = Policy::white_box("brake", ControlLaw::Brake { decel: 5.0 });
    for d in [10.5, 12.0, 15.0, 19.5] {
        let (v, ep) = verify_a_priori(&wall(10.0, 5.0, d), &brake, &spec(), &reg(), &AprioriOptions::default()).unwrap();
        assert_eq!(v.outcome(), Outcome::SafeVerified, "d {d}: {:?}", v.evidence().note);
        assert!(v.evidence().tube.as_ref().unwrap().min_gap_lower >= 0.0);
        assert!(!ep.collided());
    }
}

/// Tubes enclose every simulated relative state of the episode when the
/// lead's acceleration is drawn at random from its box.
#[test]
fn tube_contains_monte_carlo_rollouts() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for trial in 0..40 {
        let mut cfg = wall(rng.gen_range(5.0..15.0), 6.0, rng.gen_range(10.0..40.0));
        cfg.agents[0].v = rng.gen_range(0.0..12.0);
        cfg.agents[0].behavior = Behavior::BoundedAccel { lo: -3.0, hi: 1.0, profile: AccelProfile::Random { hold: 0.3 } };
        cfg.seed = trial;
        cfg.duration = 3.0;
        let policy = if trial % 2 == 0 {
            Policy::white_box("acc", acc())
        } else {
            Policy::grey_box("acc+", acc(), IBox::from_bounds(&[-0.5], &[0.5]), TermRealization::Random)
        };
        let setup = RelativeSetup::from_config(&cfg).unwrap().unwrap();
        let ep = roll_out(&cfg, &policy).unwrap();
        let steps = ep.signal.len() - 1;
        let tube = closed_loop_tube(&setup, &policy, &IBox::point(&setup.initial_state(&cfg)), steps, cfg.step).unwrap();
        for (k, b) in tube.iter().enumerate() {
            let s = setup.state_at(&ep.signal, k).unwrap();
            if ep.collision_index.is_some_and(|c| k > c) {
                break;
            }
            assert!(b.contains_point(&s), "trial {trial} step {k}: {s:?} escapes {b}");
        }
    }
}

#[test]
fn inevitable_starts_never_verify() {
    let policies = [
        Policy::white_box("brake", ControlLaw::Brake { decel: 5.0 }),
        Policy::white_box("zero", ControlLaw::Zero),
        Policy::white_box("acc", acc()),
        Policy::white_box("cruise", ControlLaw::Cruise { v_ref: 10.0, gain: 1.0 }),
    ];
    for d in [1.0, 4.0, 8.0, 9.5] {
        let cfg = wall(10.0, 5.0, d);
        assert_eq!(classify_feasibility(&cfg, &spec()).unwrap().class, Feasibility::SafetyInfeasible);
        for p in &policies {
            let (v, _) = verify_a_priori(&cfg, p, &spec(), &reg(), &AprioriOptions::default()).unwrap();
            assert_ne!(v.outcome(), Outcome::SafeVerified, "{} at d {d}", p.name);
        }
    }
}

fn rank(o: Outcome) -> u8 {
    match o {
        Outcome::SafeVerified => 1,
        _ => 0,
    }
}

#[test]
fn widening_the_grey_term_is_never_more_permissive() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut white_safe = 0;
    let mut wide_safe = 0;
    for _ in 0..30 {
        let mut cfg = wall(rng.gen_range(4.0..14.0), 6.0, rng.gen_range(5.0..25.0));
        cfg.agents[0].v = rng.gen_range(0.0..10.0);
        cfg.agents[0].behavior =
            Behavior::BoundedAccel { lo: -2.0, hi: 1.0, profile: AccelProfile::Constant { accel: rng.gen_range(-2.0..1.0) } };
        let u = cfg.ego.u_box();
        let white = Policy::white_box("acc", acc());
        let narrow = Policy::grey_box("narrow", acc(), IBox::from_bounds(&[-0.1], &[0.1]), TermRealization::Center);
        let wide = Policy::grey_box("wide", acc(), u.clone(), TermRealization::Center);
        let o = |p: &Policy| verify_a_priori(&cfg, p, &spec(), &reg(), &AprioriOptions::default()).unwrap().0.outcome();
        let (ow, on, owide) = (o(&white), o(&narrow), o(&wide));
        assert!(rank(owide) <= rank(on) && rank(on) <= rank(ow), "{ow:?} {on:?} {owide:?}");
        white_safe += rank(ow) as usize;
        wide_safe += rank(owide) as usize;
    }
    assert!(wide_safe < white_safe && white_safe < 30);
}

#[test]
fn feasibility_follows_braking_distance() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut undecided = 0;
    for _ in 0..300 {
        let (v, a, d) = (rng.gen_range(0.0..20.0), rng.gen_range(2.0..8.0), rng.gen_range(0.0..40.0));
        let stop = v * v / (2.0 * a);
        let class = classify_feasibility(&wall(v, a, d), &spec()).unwrap().class;
        match class {
            Feasibility::SafetyInfeasible => assert!(d < stop + 1e-6, "v {v} a {a} d {d}"),
            Feasibility::Feasible => assert!(d >= stop - 1e-6, "v {v} a {a} d {d}"),
            Feasibility::Unknown => {
                assert!((d - stop).abs() < 0.05, "v {v} a {a} d {d} undecided");
                undecided += 1;
            }
        }
    }
    assert!(undecided <= 3);
}

#[test]
fn feasibility_ignores_the_policy() {
    // the configuration alone fixes the class; policies only change the trace
    let cfg = wall(12.0, 4.0, 16.0);
    let before = classify_feasibility(&cfg, &spec()).unwrap();
    for p in [Policy::white_box("z", ControlLaw::Zero), Policy::white_box("b", ControlLaw::Brake { decel: 4.0 })] {
        roll_out(&cfg, &p).unwrap();
        assert_eq!(classify_feasibility(&cfg, &spec()).unwrap(), before);
    }
}

#[test]
fn liability_examples() {
    let reg = reg();
    let phi = spec();
    let zero = Policy::white_box("zero", ControlLaw::Zero);
    let brake = Policy::white_box("brake", ControlLaw::Brake { decel: 5.0 });
    let finding = |cfg: &EpisodeConfig, p: &Policy| {
        let ep = roll_out(cfg, p).unwrap();
        assess_liability(cfg, &ep, &phi, &reg).unwrap()
    };

    let clean = finding(&wall(10.0, 5.0, 12.0), &brake);
    let f = clean.decision.finding().unwrap();
    assert_eq!((f.rationale(), f.at_fault()), (Rationale::NoViolation, false));

    let avoidable = finding(&wall(10.0, 5.0, 12.0), &zero);
    let f = avoidable.decision.finding().unwrap();
    assert_eq!((f.rationale(), f.at_fault()), (Rationale::SpecViolatedAvoidable, true));

    let braced = finding(&wall(10.0, 5.0, 8.0), &brake);
    assert!(braced.fallback_engaged);
    let f = braced.decision.finding().unwrap();
    assert_eq!((f.rationale(), f.at_fault()), (Rationale::UnavoidableWithFallback, false));
    assert!(braced.onset.unwrap().ics.is_some());

    let passive = finding(&wall(10.0, 5.0, 8.0), &zero);
    let f = passive.decision.finding().unwrap();
    assert_eq!((f.rationale(), f.at_fault()), (Rationale::UnavoidableNoFallback, true));

    let ep = roll_out(&wall(10.0, 5.0, 8.0), &zero).unwrap();
    let d = determine_liability(&ep.signal, &phi, &reg, Feasibility::Unknown, false).unwrap();
    assert!(d.finding().is_none());
}
