//! Fixed-timestep planar rigid-body dynamics.
//!
//! The hand is simulated in reduced coordinates (joint angles and the
//! crawler belt displacement) on a kinematically driven palm. Free bodies
//! such as the grasped object use maximal coordinates. Each step is one
//! semi-implicit Euler step: the stiff tendon and spring terms of the hand
//! are integrated linearly-implicitly, then contacts and joint limits are
//! resolved by sequential impulses with Coulomb friction. Belt contacts
//! measure the tangential slip against the moving belt surface and push
//! back on the crawler coordinate.

pub mod geometry;
pub mod hand;
pub mod math;
pub mod render;

pub use geometry::{Feature, Shape, WorldShape};
pub use hand::{Hand, LinkGeometry, LinkId, Segment};
pub use math::Vec2;
pub use render::render_svg;

use crate::scenario::ObjectSpec;
use crate::transmission::{
    dof, drive_torques, slider_gradient, slider_law, slider_law_slope, slider_state,
    supposed_slider_position, ConfigError, DesignParams, Finger, ParamsError, SliderState,
    TransmissionConfig, HAND_DOF,
};
use geometry::{collide, RawContact};
use hand::LinkOutline;
use math::invert;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::PI;

/// Friction coefficients by surface pairing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrictionConfig {
    /// Belt against anything.
    pub belt: f64,
    /// Links and palm against objects, fixtures and each other.
    pub hand: f64,
    /// Anything against the ground.
    pub ground: f64,
}

impl Default for FrictionConfig {
    fn default() -> Self {
        Self {
            belt: 1.0,
            hand: 0.5,
            ground: 0.4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorldConfig {
    /// Step length (s).
    #[serde(rename = "timestep_s")]
    pub timestep: f64,
    pub iterations: usize,
    /// Fraction of the penetration beyond the slop removed per step.
    pub baumgarte: f64,
    /// Magnitude of gravity, acting downward (m/s²).
    #[serde(rename = "gravity_m_per_s2")]
    pub gravity: f64,
    /// Penetration left uncorrected (m).
    #[serde(rename = "slop_m")]
    pub slop: f64,
    /// Contacts are generated this far ahead of touching (m).
    #[serde(rename = "speculative_margin_m")]
    pub speculative_margin: f64,
    /// Cap on the position-correction velocity (m/s).
    #[serde(rename = "max_correction_speed_m_per_s")]
    pub max_correction_speed: f64,
    pub friction: FrictionConfig,
    pub links: LinkGeometry,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            timestep: 0.001,
            iterations: 16,
            baumgarte: 0.2,
            gravity: 9.81,
            slop: 1e-4,
            speculative_margin: 2e-3,
            max_correction_speed: 0.5,
            friction: FrictionConfig::default(),
            links: LinkGeometry::default(),
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.timestep > 0.0 && self.timestep.is_finite()) {
            return Err(ConfigError(format!("timestep must be positive, got {}", self.timestep)));
        }
        if self.iterations < 4 {
            return Err(ConfigError(format!(
                "at least 4 solver iterations required, got {}",
                self.iterations
            )));
        }
        let f = &self.friction;
        if [f.belt, f.hand, f.ground].iter().any(|m| !(*m >= 0.0)) {
            return Err(ConfigError("friction coefficients must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WorldError {
    #[error("geometry: {0}")]
    Geometry(String),
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("simulation diverged at t = {time:.4} s: {what} reached {speed:.1} m/s")]
pub struct DivergenceError {
    pub time: f64,
    pub what: String,
    pub speed: f64,
}

/// Speed above which a step is reported as diverged (m/s).
pub const DIVERGENCE_SPEED: f64 = 100.0;

/// Body in maximal coordinates. Restitution is always zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigidBody {
    pub position: Vec2,
    pub angle: f64,
    pub velocity: Vec2,
    pub angular_velocity: f64,
    pub mass: f64,
    pub inertia: f64,
    pub shape: Shape,
    /// External force held constant until changed (N).
    pub force: Vec2,
    /// External torque held constant until changed (N·m).
    pub torque: f64,
}

impl RigidBody {
    pub fn new(shape: Shape, mass: f64, inertia: f64, position: Vec2) -> Self {
        Self {
            position,
            angle: 0.0,
            velocity: Vec2::ZERO,
            angular_velocity: 0.0,
            mass,
            inertia,
            shape,
            force: Vec2::ZERO,
            torque: 0.0,
        }
    }

    pub fn world_shape(&self) -> WorldShape {
        self.shape.placed(self.position, self.angle)
    }

    pub fn kinetic_energy(&self) -> f64 {
        0.5 * self.mass * self.velocity.dot(self.velocity)
            + 0.5 * self.inertia * self.angular_velocity * self.angular_velocity
    }
}

/// Immovable body. A non-zero `belt_speed` makes its whole surface a
/// conveyor moving clockwise around the body (left to right on top).
#[derive(Debug, Clone, PartialEq)]
pub struct StaticBody {
    pub shape: WorldShape,
    pub belt_speed: f64,
    pub is_ground: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BodyRef {
    Link(LinkId),
    Palm,
    Free(usize),
    Static(usize),
}

impl BodyRef {
    pub fn is_hand(self) -> bool {
        matches!(self, BodyRef::Link(_) | BodyRef::Palm)
    }
}

/// Solved contact, reported after each step. The normal points from
/// `bodies.1` toward `bodies.0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactPoint {
    pub bodies: (BodyRef, BodyRef),
    pub position: Vec2,
    pub normal: Vec2,
    /// Penetration depth at detection (m, zero when separated).
    pub penetration: f64,
    /// Normal impulse of the last step (N·s).
    pub normal_impulse: f64,
    /// Tangential impulse along `normal.perp()` (N·s).
    pub tangent_impulse: f64,
    pub friction: f64,
    pub belt: bool,
    /// Belt surface speed along its direction of travel (m/s).
    pub belt_speed: f64,
    /// Tangential impulse component along the belt direction (N·s).
    pub belt_impulse: f64,
}

impl ContactPoint {
    pub fn involves(&self, body: BodyRef) -> bool {
        self.bodies.0 == body || self.bodies.1 == body
    }

    /// Normal impulse pushing on `body` (zero if it is not involved).
    pub fn impulse_on(&self, body: BodyRef) -> Vec2 {
        let j = self.normal * self.normal_impulse + self.normal.perp() * self.tangent_impulse;
        if self.bodies.0 == body {
            j
        } else if self.bodies.1 == body {
            -j
        } else {
            Vec2::ZERO
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum RowKey {
    Contact(BodyRef, BodyRef, Feature),
    Limit(usize),
}

#[derive(Debug, Clone, Copy)]
enum RowKind {
    Limit,
    Normal,
    /// Friction paired with the normal row just after it.
    Friction { mu: f64 },
}

#[derive(Debug, Clone)]
struct Row {
    kind: RowKind,
    j: Vec<f64>,
    wj: Vec<f64>,
    inv_eff: f64,
    /// Velocity contribution of kinematic motion (palm, fixed belts).
    kin: f64,
    target: f64,
    lambda: f64,
}

impl Row {
    fn velocity(&self, v: &[f64]) -> f64 {
        self.j.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() + self.kin
    }
}

/// Metadata kept alongside a contact's row pair.
#[derive(Debug, Clone, Copy)]
struct ContactMeta {
    key: RowKey,
    bodies: (BodyRef, BodyRef),
    raw: RawContact,
    friction: f64,
    belt_dir: Option<Vec2>,
    belt_speed_kin: f64,
}

#[derive(Debug, Clone)]
pub struct World {
    pub cfg: WorldConfig,
    pub hand: Option<Hand>,
    pub bodies: Vec<RigidBody>,
    pub statics: Vec<StaticBody>,
    time: f64,
    steps: u64,
    contacts: Vec<ContactPoint>,
    warm: HashMap<RowKey, (f64, f64)>,
    slider: Option<SliderState>,
    tendon: f64,
    crawler_belt_impulse: f64,
}

impl World {
    /// Empty world with a ground plane at y = 0.
    pub fn new(cfg: WorldConfig) -> Self {
        Self {
            cfg,
            hand: None,
            bodies: Vec::new(),
            statics: vec![StaticBody {
                shape: WorldShape::HalfPlane {
                    point: Vec2::ZERO,
                    normal: Vec2::UP,
                },
                belt_speed: 0.0,
                is_ground: true,
            }],
            time: 0.0,
            steps: 0,
            contacts: Vec::new(),
            warm: HashMap::new(),
            slider: None,
            tendon: 0.0,
            crawler_belt_impulse: 0.0,
        }
    }

    pub fn add_body(&mut self, body: RigidBody) -> usize {
        self.bodies.push(body);
        self.bodies.len() - 1
    }

    pub fn add_static(&mut self, body: StaticBody) -> usize {
        self.statics.push(body);
        self.statics.len() - 1
    }

    pub fn ground_mut(&mut self) -> &mut StaticBody {
        &mut self.statics[0]
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Last commanded motor tension (N).
    pub fn tendon(&self) -> f64 {
        self.tendon
    }

    /// Slider state after the last step, if the world has a hand.
    pub fn slider(&self) -> Option<SliderState> {
        self.slider.or_else(|| {
            self.hand
                .as_ref()
                .map(|h| slider_state(&h.state, &h.params, &h.transmission))
        })
    }

    /// Total generalized impulse the belt contacts applied to the crawler
    /// coordinate since the world was built (N·s).
    pub fn crawler_belt_impulse(&self) -> f64 {
        self.crawler_belt_impulse
    }

    pub fn set_external_wrench(&mut self, body: usize, force: Vec2, torque: f64) {
        self.bodies[body].force = force;
        self.bodies[body].torque = torque;
    }

    /// Kinetic plus gravitational energy of the free bodies (J).
    pub fn free_body_energy(&self) -> f64 {
        self.bodies
            .iter()
            .map(|b| b.kinetic_energy() + b.mass * self.cfg.gravity * b.position.y)
            .sum()
    }

    /// Contacts solved in the last step.
    pub fn contact_report(&self) -> Vec<ContactPoint> {
        self.contacts.clone()
    }

    pub fn contacts(&self) -> &[ContactPoint] {
        &self.contacts
    }

    fn hand_dofs(&self) -> usize {
        if self.hand.is_some() {
            HAND_DOF
        } else {
            0
        }
    }

    fn body_offset(&self, i: usize) -> usize {
        self.hand_dofs() + 3 * i
    }

    fn world_shape(&self, body: BodyRef, outlines: &[LinkOutline]) -> WorldShape {
        match body {
            BodyRef::Link(l) => WorldShape::Polygon(outlines[link_index(l)].polygon.clone()),
            BodyRef::Palm => WorldShape::Polygon(self.hand.as_ref().unwrap().palm_outline()),
            BodyRef::Free(i) => self.bodies[i].world_shape(),
            BodyRef::Static(i) => self.statics[i].shape.clone(),
        }
    }

    fn candidate_pairs(&self) -> Vec<(BodyRef, BodyRef)> {
        let mut pairs = Vec::new();
        let links = if self.hand.is_some() { &LinkId::ALL[..] } else { &[][..] };
        for i in 0..self.bodies.len() {
            for link in links {
                pairs.push((BodyRef::Free(i), BodyRef::Link(*link)));
            }
            if self.hand.is_some() {
                pairs.push((BodyRef::Free(i), BodyRef::Palm));
            }
            for j in (i + 1)..self.bodies.len() {
                pairs.push((BodyRef::Free(i), BodyRef::Free(j)));
            }
            for s in 0..self.statics.len() {
                pairs.push((BodyRef::Free(i), BodyRef::Static(s)));
            }
        }
        for link in links {
            for s in 0..self.statics.len() {
                pairs.push((BodyRef::Link(*link), BodyRef::Static(s)));
            }
        }
        if self.hand.is_some() {
            for a in &LinkId::ALL[..2] {
                for b in &LinkId::ALL[2..] {
                    pairs.push((BodyRef::Link(*a), BodyRef::Link(*b)));
                }
            }
        }
        pairs
    }

    /// Adds the velocity of `body` at `p` along `d`, times `sign`, to a
    /// constraint row.
    fn add_point(&self, j: &mut [f64], kin: &mut f64, body: BodyRef, p: Vec2, d: Vec2, sign: f64) {
        match body {
            BodyRef::Link(link) => {
                let hand = self.hand.as_ref().unwrap();
                let jac = hand.point_jacobian(link, p);
                for k in 0..HAND_DOF {
                    j[k] += sign * jac[k].dot(d);
                }
                *kin += sign * hand.palm_velocity * d.y;
            }
            BodyRef::Palm => {
                *kin += sign * self.hand.as_ref().unwrap().palm_velocity * d.y;
            }
            BodyRef::Free(i) => {
                let b = &self.bodies[i];
                let o = self.body_offset(i);
                j[o] += sign * d.x;
                j[o + 1] += sign * d.y;
                j[o + 2] += sign * (p - b.position).cross(d);
            }
            BodyRef::Static(_) => {}
        }
    }

    /// Belt direction of travel at a contact on `body`, if that surface is
    /// a belt. `outward` is the body's outward normal there.
    fn belt_direction(
        &self,
        body: BodyRef,
        raw: &RawContact,
        first: bool,
        outward: Vec2,
        outlines: &[LinkOutline],
    ) -> Option<(Vec2, f64)> {
        match body {
            BodyRef::Link(link) if link.carries_belt() => {
                let outline = &outlines[link_index(link)];
                let dir = match (raw.feature, first) {
                    (Feature::VertexOfFirst { vertex }, true)
                    | (Feature::VertexOfSecond { vertex }, false) => outline.vertex_belt(vertex),
                    (Feature::Edges { first: edge, .. }, true)
                    | (Feature::Edges { second: edge, .. }, false)
                    | (Feature::RoundOnFirst { edge }, true)
                    | (Feature::RoundOnSecond { edge }, false) => outline.edge_belt[edge],
                    _ => None,
                }?;
                Some((dir, 0.0))
            }
            BodyRef::Static(s) if self.statics[s].belt_speed != 0.0 => {
                let dir = Vec2::new(outward.y, -outward.x);
                Some((dir, self.statics[s].belt_speed))
            }
            _ => None,
        }
    }

    fn friction_for(&self, a: BodyRef, b: BodyRef, belt: bool) -> f64 {
        let f = &self.cfg.friction;
        let ground = |r: BodyRef| matches!(r, BodyRef::Static(s) if self.statics[s].is_ground);
        if belt {
            f.belt
        } else if ground(a) || ground(b) {
            f.ground
        } else {
            f.hand
        }
    }

    fn new_row(&self, kind: RowKind, j: Vec<f64>, kin: f64, w: &Mass) -> Row {
        let wj = w.apply(&j);
        let eff: f64 = j.iter().zip(&wj).map(|(a, b)| a * b).sum();
        Row {
            kind,
            j,
            wj,
            inv_eff: if eff > 1e-300 { 1.0 / eff } else { 0.0 },
            kin,
            target: 0.0,
            lambda: 0.0,
        }
    }

    fn correction_target(&self, separation: f64, slop: f64) -> f64 {
        let dt = self.cfg.timestep;
        if separation > 0.0 {
            -separation / dt
        } else {
            (self.cfg.baumgarte * (-separation - slop).max(0.0) / dt)
                .min(self.cfg.max_correction_speed)
        }
    }

    /// Advances the world by one timestep with motor tension `tendon` (N)
    /// and commanded palm velocity `palm_velocity` (m/s, up positive).
    pub fn step(&mut self, tendon: f64, palm_velocity: f64) -> Result<(), DivergenceError> {
        let dt = self.cfg.timestep;
        let g = self.cfg.gravity;
        let n = self.hand_dofs() + 3 * self.bodies.len();
        let mut v = vec![0.0; n];
        let mut hand_inv = [[0.0; HAND_DOF]; HAND_DOF];
        self.tendon = tendon;

        if let Some(hand) = self.hand.as_mut() {
            let palm_accel = (palm_velocity - hand.palm_velocity) / dt;
            hand.palm_velocity = palm_velocity;
            let (free, inv) = hand_free_velocity(hand, tendon, -g - palm_accel, dt);
            hand_inv = inv;
            v[..HAND_DOF].copy_from_slice(&free);
        }
        for (i, b) in self.bodies.iter().enumerate() {
            let o = self.body_offset(i);
            v[o] = b.velocity.x + dt * b.force.x / b.mass;
            v[o + 1] = b.velocity.y + dt * (b.force.y / b.mass - g);
            v[o + 2] = b.angular_velocity + dt * b.torque / b.inertia;
        }

        let mass = Mass {
            hand_inv,
            hand_dofs: self.hand_dofs(),
            bodies: self.bodies.iter().map(|b| (1.0 / b.mass, 1.0 / b.inertia)).collect(),
        };

        let (mut rows, metas) = self.build_rows(n, &mass);
        self.solve(&mut rows, &mut v);
        self.store_contacts(&rows, &metas, dt);

        // Integrate positions with the constrained velocities.
        if let Some(hand) = self.hand.as_mut() {
            for i in 0..HAND_DOF {
                hand.state.velocity[i] = v[i];
                hand.state.position[i] += dt * v[i];
            }
            for i in 0..4 {
                let q = &mut hand.state.position[i];
                if *q < 0.0 || *q > PI {
                    *q = q.clamp(0.0, PI);
                }
            }
            hand.palm_y += dt * hand.palm_velocity;
            self.slider = Some(slider_state(&hand.state, &hand.params, &hand.transmission));
        }
        let hd = self.hand_dofs();
        for (i, b) in self.bodies.iter_mut().enumerate() {
            let o = hd + 3 * i;
            b.velocity = Vec2::new(v[o], v[o + 1]);
            b.angular_velocity = v[o + 2];
            b.position += b.velocity * dt;
            b.angle += b.angular_velocity * dt;
        }
        self.time += dt;
        self.steps += 1;
        self.check_divergence()
    }

    fn build_rows(&self, n: usize, mass: &Mass) -> (Vec<Row>, Vec<ContactMeta>) {
        let mut rows = Vec::new();
        let mut metas = Vec::new();
        let outlines: Vec<LinkOutline> = match &self.hand {
            Some(h) => LinkId::ALL.iter().map(|l| h.outline(*l)).collect(),
            None => Vec::new(),
        };

        if let Some(hand) = &self.hand {
            let margin = 0.05;
            let attach = hand.transmission.attach_angle;
            for (fi, finger) in Finger::BOTH.iter().enumerate() {
                let (m, i) = (finger.mp_index(), finger.ip_index());
                let q = &hand.state.position;
                let limits: [(&[(usize, f64)], f64); 5] = [
                    (&[(m, 1.0)], q[m]),
                    (&[(m, -1.0)], PI - q[m]),
                    (&[(i, 1.0)], q[i]),
                    (&[(i, -1.0)], PI - q[i]),
                    (&[(m, 1.0), (i, 1.0)], q[m] + q[i] - attach),
                ];
                for (li, (coeffs, gap)) in limits.iter().enumerate() {
                    if *gap >= margin {
                        continue;
                    }
                    let mut j = vec![0.0; n];
                    for (k, c) in coeffs.iter() {
                        j[*k] = *c;
                    }
                    let mut row = self.new_row(RowKind::Limit, j, 0.0, mass);
                    row.target = self.correction_target(*gap, 0.0);
                    let key = RowKey::Limit(fi * 5 + li);
                    row.lambda = self.warm.get(&key).map_or(0.0, |w| w.0);
                    rows.push(row);
                    metas.push(ContactMeta {
                        key,
                        bodies: (BodyRef::Palm, BodyRef::Palm),
                        raw: RawContact {
                            point: Vec2::ZERO,
                            normal: Vec2::ZERO,
                            separation: *gap,
                            feature: Feature::Round,
                        },
                        friction: 0.0,
                        belt_dir: None,
                        belt_speed_kin: 0.0,
                    });
                }
            }
        }

        let margin = self.cfg.speculative_margin;
        let mut raw = Vec::new();
        for (a, b) in self.candidate_pairs() {
            let sa = self.world_shape(a, &outlines);
            let sb = self.world_shape(b, &outlines);
            if !sa.bounds().overlaps(&sb.bounds(), margin) {
                continue;
            }
            raw.clear();
            collide(&sa, &sb, margin, &mut raw);
            for c in &raw {
                let belt = self
                    .belt_direction(a, c, true, -c.normal, &outlines)
                    .map(|(d, s)| (d, s, 1.0))
                    .or_else(|| {
                        self.belt_direction(b, c, false, c.normal, &outlines)
                            .map(|(d, s)| (d, s, -1.0))
                    });
                let mu = self.friction_for(a, b, belt.is_some());
                let t = c.normal.perp();

                let mut jt = vec![0.0; n];
                let mut kin_t = 0.0;
                self.add_point(&mut jt, &mut kin_t, a, c.point, t, 1.0);
                self.add_point(&mut jt, &mut kin_t, b, c.point, t, -1.0);
                let mut belt_dir = None;
                let mut belt_speed_kin = 0.0;
                if let Some((dir, speed, sign)) = belt {
                    // Surface velocity of the belt side adds to its material velocity.
                    let along = dir.dot(t);
                    if speed != 0.0 {
                        kin_t += sign * speed * along;
                        belt_speed_kin = speed;
                    } else {
                        jt[dof::CRAWLER] += sign * along;
                    }
                    belt_dir = Some(dir * sign);
                }
                let mut jn = vec![0.0; n];
                let mut kin_n = 0.0;
                self.add_point(&mut jn, &mut kin_n, a, c.point, c.normal, 1.0);
                self.add_point(&mut jn, &mut kin_n, b, c.point, c.normal, -1.0);

                let key = RowKey::Contact(a, b, c.feature);
                let warm = self.warm.get(&key).copied().unwrap_or((0.0, 0.0));
                let mut normal = self.new_row(RowKind::Normal, jn, kin_n, mass);
                normal.target = self.correction_target(c.separation, self.cfg.slop);
                normal.lambda = warm.0;
                let mut friction = self.new_row(RowKind::Friction { mu }, jt, kin_t, mass);
                friction.lambda = warm.1.clamp(-mu * warm.0, mu * warm.0);
                rows.push(friction);
                rows.push(normal);
                let meta = ContactMeta {
                    key,
                    bodies: (a, b),
                    raw: *c,
                    friction: mu,
                    belt_dir,
                    belt_speed_kin,
                };
                metas.push(meta);
                metas.push(meta);
            }
        }
        (rows, metas)
    }

    fn solve(&self, rows: &mut [Row], v: &mut [f64]) {
        // Warm start.
        for row in rows.iter() {
            if row.lambda != 0.0 {
                for (vi, w) in v.iter_mut().zip(&row.wj) {
                    *vi += w * row.lambda;
                }
            }
        }
        for _ in 0..self.cfg.iterations {
            for r in 0..rows.len() {
                let (lo, hi) = match rows[r].kind {
                    RowKind::Limit | RowKind::Normal => (0.0, f64::INFINITY),
                    RowKind::Friction { mu } => {
                        let limit = mu * rows[r + 1].lambda;
                        (-limit, limit)
                    }
                };
                let row = &mut rows[r];
                if row.inv_eff == 0.0 {
                    continue;
                }
                let vel = row.velocity(v);
                let delta = (row.target - vel) * row.inv_eff;
                let new = (row.lambda + delta).clamp(lo, hi);
                let applied = new - row.lambda;
                row.lambda = new;
                if applied != 0.0 {
                    for (vi, w) in v.iter_mut().zip(&row.wj) {
                        *vi += w * applied;
                    }
                }
            }
        }
        // A normal impulse that shrank after its friction row was visited
        // leaves the friction outside the cone; project it back.
        for r in 0..rows.len() {
            if let RowKind::Friction { mu } = rows[r].kind {
                let limit = mu * rows[r + 1].lambda;
                let row = &mut rows[r];
                let new = row.lambda.clamp(-limit, limit);
                let applied = new - row.lambda;
                row.lambda = new;
                if applied != 0.0 {
                    for (vi, w) in v.iter_mut().zip(&row.wj) {
                        *vi += w * applied;
                    }
                }
            }
        }
    }

    fn store_contacts(&mut self, rows: &[Row], metas: &[ContactMeta], _dt: f64) {
        self.contacts.clear();
        let mut warm = HashMap::with_capacity(rows.len());
        let mut r = 0;
        while r < rows.len() {
            match rows[r].kind {
                RowKind::Limit => {
                    warm.insert(metas[r].key, (rows[r].lambda, 0.0));
                    r += 1;
                }
                RowKind::Friction { .. } => {
                    let (friction, normal, meta) = (&rows[r], &rows[r + 1], &metas[r]);
                    warm.insert(meta.key, (normal.lambda, friction.lambda));
                    let belt_impulse = meta
                        .belt_dir
                        .map_or(0.0, |d| friction.lambda * d.dot(meta.raw.normal.perp()));
                    if meta.belt_dir.is_some() && meta.belt_speed_kin == 0.0 {
                        self.crawler_belt_impulse += friction.j[dof::CRAWLER] * friction.lambda;
                    }
                    let belt_speed = match (meta.belt_dir, &self.hand) {
                        (None, _) => 0.0,
                        (Some(_), _) if meta.belt_speed_kin != 0.0 => meta.belt_speed_kin,
                        (Some(_), Some(h)) => h.state.velocity[dof::CRAWLER],
                        (Some(_), None) => 0.0,
                    };
                    self.contacts.push(ContactPoint {
                        bodies: meta.bodies,
                        position: meta.raw.point,
                        normal: meta.raw.normal,
                        penetration: (-meta.raw.separation).max(0.0),
                        normal_impulse: normal.lambda,
                        tangent_impulse: friction.lambda,
                        friction: meta.friction,
                        belt: meta.belt_dir.is_some(),
                        belt_speed,
                        belt_impulse,
                    });
                    r += 2;
                }
                RowKind::Normal => unreachable!("normal rows follow their friction row"),
            }
        }
        self.warm = warm;
    }

    fn check_divergence(&self) -> Result<(), DivergenceError> {
        let mut worst = (0.0, String::new());
        for (i, b) in self.bodies.iter().enumerate() {
            let speed = b.velocity.length() + b.angular_velocity.abs() * bounding_radius(&b.shape);
            if !(speed <= worst.0) {
                worst = (speed, format!("body {i}"));
            }
        }
        if let Some(h) = &self.hand {
            let reach = h.params.pp_length + h.params.dp_length;
            for (i, rate) in h.state.velocity.iter().enumerate() {
                let speed = if i == dof::CRAWLER { rate.abs() } else { rate.abs() * reach };
                if !(speed <= worst.0) {
                    worst = (speed, format!("hand coordinate {i}"));
                }
            }
        }
        if worst.0 > DIVERGENCE_SPEED || worst.0.is_nan() {
            return Err(DivergenceError {
                time: self.time,
                what: worst.1,
                speed: worst.0,
            });
        }
        Ok(())
    }
}

fn bounding_radius(shape: &Shape) -> f64 {
    match shape {
        Shape::Polygon { vertices } => vertices.iter().map(|v| v.length()).fold(0.0, f64::max),
        Shape::Circle { radius } => *radius,
    }
}

fn link_index(link: LinkId) -> usize {
    LinkId::ALL.iter().position(|l| *l == link).unwrap()
}

/// Unconstrained hand velocity after one linearly implicit step, and the
/// inverse of the effective inertia used for it.
///
/// The slider law is piecewise linear with very stiff segments, so it is
/// linearized on the segment where the step ends: the step is solved on the
/// current segment and repeated on the segment it lands in until the two
/// agree.
fn hand_free_velocity(
    hand: &Hand,
    tendon: f64,
    gravity: f64,
    dt: f64,
) -> ([f64; HAND_DOF], [[f64; HAND_DOF]; HAND_DOF]) {
    let params = &hand.params;
    let cfg = &hand.transmission;
    let state = &hand.state;
    let grad = slider_gradient(params);
    let passive = hand.passive_forces(gravity);
    let springs = spring_stiffness(hand);
    let q_dot = state.velocity;
    let x = supposed_slider_position(state, params, cfg);
    let rate: f64 = grad.iter().zip(&q_dot).map(|(g, v)| g * v).sum();

    let mut anchor = x;
    let mut result = ([0.0; HAND_DOF], [[0.0; HAND_DOF]; HAND_DOF]);
    for _ in 0..4 {
        let slope = slider_law_slope(anchor, params, cfg);
        let tension = slider_law(anchor, params, cfg).tension + slope * (x - anchor);
        let tau = drive_torques(state, params, cfg, tendon, tension).0;
        let mut a = hand.mass_matrix();
        let mut rhs = [0.0; HAND_DOF];
        for i in 0..HAND_DOF {
            if i != dof::CRAWLER {
                a[i][i] += dt * cfg.joint_damping;
            }
            let mut kv = slope * grad[i] * rate;
            for k in 0..HAND_DOF {
                let stiff = springs[i][k] + slope * grad[i] * grad[k];
                a[i][k] += dt * dt * stiff;
                kv += springs[i][k] * q_dot[k];
            }
            rhs[i] = dt * (tau[i] + passive[i] - dt * kv);
        }
        let inv = invert(&a).expect("hand inertia matrix is positive definite");
        let mut v = [0.0; HAND_DOF];
        for i in 0..HAND_DOF {
            v[i] = q_dot[i] + (0..HAND_DOF).map(|k| inv[i][k] * rhs[k]).sum::<f64>();
        }
        result = (v, inv);
        let x_end = x + dt * grad.iter().zip(&v).map(|(g, v)| g * v).sum::<f64>();
        if slider_law_slope(x_end, params, cfg) == slope {
            break;
        }
        anchor = x_end;
    }
    result
}

/// Stiffness of the extension and coupling springs. The stopper branch of
/// the coupling is left to the joint-limit constraint.
fn spring_stiffness(hand: &Hand) -> [[f64; HAND_DOF]; HAND_DOF] {
    let mut k = [[0.0; HAND_DOF]; HAND_DOF];
    let cfg = &hand.transmission;
    for finger in Finger::BOTH {
        let (m, i) = (finger.mp_index(), finger.ip_index());
        let q = &hand.state.position;
        if q[i] >= cfg.attach_angle - q[m] {
            let ke = cfg.extension_stiffness;
            k[m][m] += ke;
            k[m][i] += ke;
            k[i][m] += ke;
            k[i][i] += ke;
        }
        k[m][m] += cfg.extension_stiffness;
    }
    k
}

/// Block-diagonal inverse effective mass of the whole system.
struct Mass {
    hand_inv: [[f64; HAND_DOF]; HAND_DOF],
    hand_dofs: usize,
    bodies: Vec<(f64, f64)>,
}

impl Mass {
    fn apply(&self, j: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; j.len()];
        for r in 0..self.hand_dofs {
            out[r] = (0..self.hand_dofs).map(|c| self.hand_inv[r][c] * j[c]).sum();
        }
        for (i, (inv_m, inv_i)) in self.bodies.iter().enumerate() {
            let o = self.hand_dofs + 3 * i;
            out[o] = inv_m * j[o];
            out[o + 1] = inv_m * j[o + 1];
            out[o + 2] = inv_i * j[o + 2];
        }
        out
    }
}

/// Builds the grasp scene: the extended hand straddling `object`, which
/// rests on the ground at the origin.
///
/// The hand is lowered until the fingertips are 1 mm above the ground, or
/// until the palm is 1 mm above the object if that comes first.
pub fn build_world(
    params: &DesignParams,
    object: &ObjectSpec,
    cfg: &WorldConfig,
    tcfg: &TransmissionConfig,
) -> Result<World, WorldError> {
    params.validate()?;
    tcfg.validate(params)?;
    cfg.validate()?;
    object.validate().map_err(WorldError::Geometry)?;

    let straddle_error = || {
        WorldError::Geometry(format!(
            "the extended hand (spacing {:.1} mm) cannot straddle a {:.1} mm wide object",
            params.mp_spacing * 1e3,
            object.width() * 1e3
        ))
    };
    if object.width() >= params.mp_spacing + 2.0 * (params.pp_length + params.dp_length) {
        return Err(straddle_error());
    }

    // Approach from above until the fingertips are 1 mm over the ground or
    // some part of the hand is 1 mm over the object.
    let clearance = 0.001;
    let mut hand = Hand::new(*params, *tcfg, cfg.links, 0.0);
    hand.palm_y = clearance - hand.fingertip_height();
    let object_shape = object.body().world_shape();
    let touches = |hand: &Hand| {
        let mut raw = Vec::new();
        let palm = std::iter::once(hand.palm_outline());
        for polygon in LinkId::ALL.iter().map(|l| hand.outline(*l).polygon).chain(palm) {
            collide(&object_shape, &WorldShape::Polygon(polygon), clearance, &mut raw);
        }
        !raw.is_empty()
    };
    while touches(&hand) {
        hand.palm_y += 0.0005;
        if hand.fingertip_height() >= object.height() {
            return Err(straddle_error());
        }
    }
    hand.transmission = tcfg.zeroed_at(&hand.state, params);

    let mut world = World::new(*cfg);
    world.add_body(object.body());
    world.hand = Some(hand);
    world.slider = world.slider();
    Ok(world)
}
