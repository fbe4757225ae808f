//! Reference scenes shared by the dynamics tests and the acceptance run.
#![allow(dead_code)]

use graspforge::dynamics::{ContactPoint, RigidBody, Shape, StaticBody, Vec2, World, WorldConfig, WorldShape};

pub const BOX_W: f64 = 0.05;
pub const BOX_H: f64 = 0.02;
pub const BOX_M: f64 = 0.1;

pub fn test_box(position: Vec2) -> RigidBody {
    let inertia = BOX_M * (BOX_W * BOX_W + BOX_H * BOX_H) / 12.0;
    RigidBody::new(Shape::rectangle(BOX_W, BOX_H), BOX_M, inertia, position)
}

pub fn cone_violation(c: &ContactPoint) -> f64 {
    (c.tangent_impulse.abs() - c.friction * c.normal_impulse).max(0.0)
}

/// Vertical velocity of a box after falling freely for `seconds`.
pub fn ballistic_velocity(seconds: f64) -> f64 {
    let mut w = World::new(WorldConfig::default());
    let b = w.add_body(test_box(Vec2::new(0.0, 100.0)));
    let steps = (seconds / w.cfg.timestep).round() as usize;
    for _ in 0..steps {
        w.step(0.0, 0.0).unwrap();
        assert!(w.contacts().is_empty());
    }
    w.bodies[b].velocity.y
}

pub struct Rest {
    pub displacement: f64,
    pub normal_force: f64,
    pub weight: f64,
    pub worst_cone_violation: f64,
    pub worst_penetration: f64,
}

/// A box placed on the ground and left alone for `seconds`.
pub fn resting_box(seconds: f64) -> Rest {
    let mut w = World::new(WorldConfig::default());
    let start = Vec2::new(0.0, BOX_H / 2.0);
    let b = w.add_body(test_box(start));
    let dt = w.cfg.timestep;
    let mut worst_cone_violation: f64 = 0.0;
    let mut worst_penetration: f64 = 0.0;
    for _ in 0..(seconds / dt).round() as usize {
        w.step(0.0, 0.0).unwrap();
        for c in w.contacts() {
            worst_cone_violation = worst_cone_violation.max(cone_violation(c));
            worst_penetration = worst_penetration.max(c.penetration);
        }
    }
    Rest {
        displacement: (w.bodies[b].position - start).length(),
        normal_force: w.contact_report().iter().map(|c| c.normal_impulse).sum::<f64>() / dt,
        weight: BOX_M * w.cfg.gravity,
        worst_cone_violation,
        worst_penetration,
    }
}

pub const BELT_SPEED: f64 = 0.1;
pub const BELT_MU: f64 = 0.5;

/// Box dropped at rest onto a conveyor; returns (time, x) samples and the
/// worst friction cone violation.
pub fn conveyor_run(seconds: f64) -> (Vec<(f64, f64)>, f64) {
    let mut cfg = WorldConfig::default();
    cfg.friction.belt = BELT_MU;
    let mut w = World::new(cfg);
    let top = 0.05;
    w.add_static(StaticBody {
        shape: Shape::rectangle(1.0, 0.02).placed(Vec2::new(0.0, top - 0.01), 0.0),
        belt_speed: BELT_SPEED,
        is_ground: false,
    });
    let b = w.add_body(test_box(Vec2::new(0.0, top + BOX_H / 2.0)));
    let mut out = vec![];
    let mut worst: f64 = 0.0;
    for _ in 0..(seconds / w.cfg.timestep).round() as usize {
        w.step(0.0, 0.0).unwrap();
        out.push((w.time(), w.bodies[b].position.x));
        for c in w.contacts() {
            worst = worst.max(cone_violation(c));
        }
    }
    (out, worst)
}

/// Position of a body starting at rest on a belt: constant acceleration
/// until it matches the belt, then carried along.
pub fn conveyor_closed_form(t: f64, gravity: f64) -> f64 {
    let a = BELT_MU * gravity;
    let t_match = BELT_SPEED / a;
    if t < t_match {
        0.5 * a * t * t
    } else {
        0.5 * a * t_match * t_match + BELT_SPEED * (t - t_match)
    }
}

/// Largest deviation of the simulated conveyor run from the closed form,
/// relative to the closed-form travel at the end of the run.
pub fn conveyor_error(seconds: f64) -> f64 {
    let (run, _) = conveyor_run(seconds);
    let g = WorldConfig::default().gravity;
    let end = conveyor_closed_form(seconds, g);
    run.iter()
        .map(|&(t, x)| (x - conveyor_closed_form(t, g)).abs())
        .fold(0.0, f64::max)
        / end
}

pub fn ground_shape() -> WorldShape {
    WorldShape::HalfPlane {
        point: Vec2::ZERO,
        normal: Vec2::UP,
    }
}
