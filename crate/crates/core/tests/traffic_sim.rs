use std::sync::Arc;

use proptest::prelude::*;
use scov_core::interval::IBox;
use scov_core::reachability::{ics_check, DynamicalSystem, GridGeometry, IcsVerdict, StateSet};
use scov_core::reachability::models::DoubleIntegrator;
use scov_core::traffic_sim::*;

fn ego(v: f64) -> EgoConfig {
    EgoConfig {
        model: EgoModel::Longitudinal,
        x: 0.0,
        y: 0.0,
        heading: 0.0,
        v,
        footprint: Footprint::default(),
        accel: (-6.0, 2.0),
        steer: None,
    }
}

fn episode(duration: f64, step: f64, ego: EgoConfig, agents: Vec<AgentConfig>) -> EpisodeConfig {
    EpisodeConfig { duration, step, seed: 11, ego, agents, lane: Lane::default(), domain: SimDomain::default() }
}

fn stopped_lead(x: f64) -> AgentConfig {
    AgentConfig { x, y: 0.0, v: 0.0, footprint: Footprint::default(), behavior: Behavior::ConstantVelocity }
}

#[test]
fn identical_inputs_give_identical_signals() {
    let lead = AgentConfig {
        x: 40.0,
        y: 0.0,
        v: 12.0,
        footprint: Footprint::default(),
        behavior: Behavior::BoundedAccel { lo: -4.0, hi: 1.0, profile: AccelProfile::Random { hold: 0.4 } },
    };
    let cfg = episode(10.0, 0.02, ego(15.0), vec![lead]);
    let law = ControlLaw::Cruise { v_ref: 15.0, gain: 0.8 };
    let policy = Policy::black_box("noisy", BlackBox::noisy(law, 0.5));
    let a = roll_out(&cfg, &policy).unwrap();
    let b = roll_out(&cfg, &policy).unwrap();
    let bits = |e: &Episode| e.signal.states().iter().flatten().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&b));
    assert_eq!(a.controls, b.controls);
    assert_eq!(a.seed, 11);

    let mut other = cfg.clone();
    other.seed = 12;
    assert_ne!(bits(&a), bits(&roll_out(&other, &policy).unwrap()));
}

fn terminal(cfg: &EpisodeConfig, policy: &Policy) -> Vec<f64> {
    let e = roll_out(cfg, policy).unwrap();
    e.signal.states().last().unwrap()[..4].to_vec()
}

fn halving_ratios(mut cfg: EpisodeConfig, policy: &Policy) -> Vec<f64> {
    let steps = [0.04, 0.02, 0.01, 0.005];
    let ends: Vec<Vec<f64>> = steps
        .iter()
        .map(|&h| {
            cfg.step = h;
            terminal(&cfg, policy)
        })
        .collect();
    let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let d: Vec<f64> = ends.windows(2).map(|w| diff(&w[0], &w[1])).collect();
    d.windows(2).map(|w| w[0] / w[1]).collect()
}

#[test]
fn step_halving_is_first_order_longitudinal() {
    let cfg = episode(8.0, 0.04, ego(5.0), vec![]);
    let policy = Policy::white_box("cruise", ControlLaw::Cruise { v_ref: 15.0, gain: 0.6 });
    for r in halving_ratios(cfg, &policy) {
        assert!((r - 2.0).abs() <= 0.6, "ratio {r}");
    }
}

#[test]
fn step_halving_is_first_order_bicycle() {
    let mut e = ego(8.0);
    e.model = EgoModel::KinematicBicycle { wheelbase: 2.7 };
    e.steer = Some((-0.5, 0.5));
    e.y = 1.0;
    e.heading = 0.1;
    let mut cfg = episode(8.0, 0.04, e, vec![]);
    cfg.lane.width = 8.0;
    let law = ControlLaw::LaneKeep { v_ref: 12.0, gain_speed: 0.5, k_lat: 0.2, k_head: 0.8 };
    for r in halving_ratios(cfg, &Policy::white_box("keep", law)) {
        assert!((r - 2.0).abs() <= 0.6, "ratio {r}");
    }
}

/// Full-brake collisions against a stopped lead agree with the ICS verdict
/// of the double integrator at the episode's initial state, except within
/// one grid cell of the boundary.
#[test]
fn braking_episodes_match_ics_verdicts() {
    let a = 6.0;
    let sys = DynamicalSystem::new(
        Arc::new(DoubleIntegrator),
        IBox::from_bounds(&[-150.0, -40.0], &[150.0, 50.0]),
        IBox::from_bounds(&[-a], &[2.0]),
        IBox::empty_dims(),
    )
    .unwrap();
    let (wp, wv) = (0.2, 0.1);
    let grid = GridGeometry::with_widths(&sys.x_box, &[wp, wv]).unwrap();
    let unsafe_set = StateSet::from_predicate(grid, |b| b.0[0].lo >= -1e-9);
    let brake = Policy::white_box("brake", ControlLaw::Brake { decel: a });

    let mut checked = 0;
    let mut boundary = 0;
    for i in 0..25 {
        for j in 0..20 {
            let g = 2.0 + 1.37 * i as f64;
            let v = 3.0 + 0.83 * j as f64;
            let verdict = ics_check(&sys, &[-g, v], &unsafe_set, 5.0, 0.01).unwrap();
            let ep = roll_out(&episode(6.0, 0.005, ego(v), vec![stopped_lead(4.5 + g)]), &brake).unwrap();
            let near = (g - v * v / (2.0 * a)).abs() <= wp + (v + wv) * wv / a;
            match verdict {
                IcsVerdict::Inevitable => assert!(ep.collided() || near, "g {g} v {v}"),
                IcsVerdict::Avoidable => assert!(!ep.collided() || near, "g {g} v {v}"),
                IcsVerdict::BoundaryUnknown => {
                    assert!(near, "g {g} v {v} undecided away from the boundary");
                    boundary += 1;
                }
            }
            checked += 1;
        }
    }
    assert_eq!(checked, 500);
    assert!(boundary < 25);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn recorded_controls_stay_in_the_box(
        v in 0.0f64..30.0,
        gap in 0.0f64..60.0,
        v_ref in 0.0f64..40.0,
        gain in 0.1f64..20.0,
        noise in 0.0f64..10.0,
    ) {
        let cfg = episode(3.0, 0.05, ego(v), vec![stopped_lead(4.5 + gap)]);
        let law = ControlLaw::Acc {
            v_ref, time_gap: 1.5, standstill: 2.0, gain_gap: gain, gain_speed: gain, gain_cruise: gain, brake_decel: 6.0,
        };
        let u = cfg.ego.u_box();
        for p in [Policy::white_box("acc", law.clone()), Policy::black_box("n", BlackBox::noisy(law, noise))] {
            let ep = roll_out(&cfg, &p).unwrap();
            prop_assert!(ep.controls.iter().all(|c| u.contains_point(c)));
        }
    }
}
