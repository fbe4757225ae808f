use graspforge::dynamics::{BodyRef, LinkId, Segment};
use graspforge::transmission::Finger;
use graspforge::scenario::*;
use graspforge::{DesignParams, GraspMode};
use proptest::prelude::*;

fn box_50x10() -> ObjectSpec {
    ObjectSpec::by_name("box_50x10").unwrap()
}

#[test]
fn floor_score_when_nothing_lifts() {
    assert_eq!(aggregate_score(&[0.0; 7]), 1.0);
    assert_eq!(aggregate_score(&[]), 1.0);
}

#[test]
fn aggregate_examples() {
    assert_eq!(aggregate_score(&[1.0, 0.5]), 3.0);
    assert_eq!(aggregate_score(&[mean(&[0.2, 0.4, 0.6, 0.8])]), 1.5);
}

proptest! {
    #[test]
    fn score_never_below_one(hs in prop::collection::vec(0.0f64..2.0, 0..10)) {
        let s = aggregate_score(&hs);
        prop_assert!(s >= 1.0);
        prop_assert!(s.is_finite());
    }

    #[test]
    fn raising_one_height_never_lowers_score(hs in prop::collection::vec(0.0f64..2.0, 1..8), i in 0usize..8, d in 0.0f64..1.0) {
        let i = i % hs.len();
        let mut up = hs.clone();
        up[i] += d;
        prop_assert!(aggregate_score(&up) >= aggregate_score(&hs));
    }
}

#[test]
fn no_tension_means_no_grasp() {
    let mut cfg = SimConfig::default();
    cfg.protocol.tendon_max = 0.0;
    let r = run_grasp_trial(&DesignParams::table_optimum(), &box_50x10(), 3, &cfg).unwrap();
    assert_eq!(r.h, 0.0);
    assert_eq!(r.termination, Termination::Dropped);
}

#[test]
fn table_optimum_grasps_small_box_with_transition() {
    let cfg = SimConfig::default();
    let p = DesignParams::table_optimum();
    let a = run_grasp_trial(&p, &box_50x10(), 0, &cfg).unwrap();
    assert!(a.has_full_transition(), "{:?}", a.mode_trace);
    assert!(a.h > 0.0);
    assert!(a.h <= cfg.protocol.max_lift);
    assert!(a.mode_trace.windows(2).all(|w| w[0].time < w[1].time));
    assert_eq!(a.mode_trace.first().unwrap().mode, GraspMode::Parallel);
    let b = run_grasp_trial(&p, &box_50x10(), 0, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn trace_rows_cover_every_step() {
    let cfg = SimConfig::default();
    let mut rows = vec![];
    let r = run_grasp_trial_observed(&DesignParams::table_optimum(), &box_50x10(), 2, &cfg, &mut |v| {
        rows.push(v.trace_row())
    })
    .unwrap();
    assert!(rows.windows(2).all(|w| w[0].time < w[1].time));
    assert!((rows.last().unwrap().time - r.duration).abs() < 1e-9);
    assert!(rows.iter().all(|row| row.slider_tension >= 0.0));
    let line = rows[0].csv();
    assert_eq!(line.split(',').count(), TraceRow::CSV_HEADER.split(',').count());
}

#[test]
fn belt_friction_drives_the_pull_in() {
    // Travel of the object along the crawler distal link while pulling in.
    let travel = |belt: f64| {
        let mut cfg = SimConfig::default();
        cfg.world.friction.belt = belt;
        let link = LinkId {
            finger: Finger::Crawler,
            segment: Segment::Distal,
        };
        let mut along = vec![];
        let _ = run_grasp_trial_observed(&DesignParams::table_optimum(), &box_50x10(), 0, &cfg, &mut |v| {
            if v.phase != Phase::Lifting && v.world.slider().unwrap().mode == GraspMode::PullIn {
                let f = v.world.hand.as_ref().unwrap().frame(link);
                along.push((v.world.bodies[0].position - f.origin).dot(f.axis));
            }
        });
        along.first().zip(along.last()).map_or(0.0, |(a, b)| (b - a).abs())
    };
    let with_belt = travel(1.0);
    let without = travel(0.0);
    assert!(with_belt > 0.005, "{with_belt}");
    assert!(without < 0.2 * with_belt, "{without} vs {with_belt}");
}

#[test]
fn grasp_force_at_medium_width() {
    let cfg = SimConfig::default();
    let f = measure_grasp_force(&DesignParams::table_optimum(), 0.03, &cfg).unwrap();
    assert!(f > 20.0, "{f}");
}

#[test]
fn grasp_force_vanishes_without_tension() {
    let mut cfg = SimConfig::default();
    cfg.protocol.tendon_max = 0.0;
    let f = measure_grasp_force(&DesignParams::table_optimum(), 0.03, &cfg).unwrap();
    assert!(f < 1.0, "{f}");
}

#[test]
fn evaluation_is_deterministic_and_floored() {
    let cfg = SimConfig::default();
    let catalog = vec![box_50x10(), ObjectSpec::by_name("cyl_8").unwrap()];
    let p = DesignParams::table_optimum();
    let a = evaluate(&p, &catalog, 1, 9, &cfg);
    let b = evaluate(&p, &catalog, 1, 9, &cfg);
    assert_eq!(a, b);
    assert_eq!(a.per_object_h.len(), 2);
    assert!(a.score >= 1.0);
    assert_eq!(a.score, aggregate_score(&a.per_object_h));
}

#[test]
fn unknown_object_is_none_and_specs_validate() {
    assert!(ObjectSpec::by_name("teapot").is_none());
    for o in ObjectSpec::catalog() {
        o.validate().unwrap();
    }
    let bad = ObjectSpec::new(ObjectKind::Cylinder { diameter: -0.01 });
    assert!(bad.validate().is_err());
}

#[test]
fn squeezed_spacer_sees_opposing_normals() {
    let cfg = SimConfig::default();
    let mut world = graspforge::dynamics::build_world(
        &DesignParams::table_optimum(),
        &box_50x10(),
        &cfg.world,
        &cfg.transmission,
    )
    .unwrap();
    for k in 0..3000 {
        world.step(100.0 * (k as f64 / 2000.0).min(1.0), 0.0).unwrap();
    }
    let on_object: Vec<_> = world
        .contacts()
        .iter()
        .filter(|c| c.involves(BodyRef::Free(0)) && c.normal_impulse > 0.0)
        .map(|c| c.impulse_on(BodyRef::Free(0)))
        .collect();
    assert!(on_object.iter().any(|j| j.x > 0.0));
    assert!(on_object.iter().any(|j| j.x < 0.0));
}
