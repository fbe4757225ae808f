//! Grasp trial protocol, scoring, and the grasp-force measurement.
//!
//! A trial closes the extended hand on an object lying on the ground while
//! the palm follows the fingertips to keep them at a constant height, then
//! lifts the palm under a random disturbance that grows with the lift
//! height. The score of a trial is the palm lift reached before the object
//! is lost.

use crate::dynamics::{
    build_world, BodyRef, DivergenceError, RigidBody, Shape, StaticBody, Vec2, World, WorldConfig,
    WorldError,
};
use crate::transmission::{ConfigError, DesignParams, Finger, GraspMode, TransmissionConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "shape")]
pub enum ObjectKind {
    /// Box lying flat: `width` horizontal, `thickness` vertical (m).
    Box { width: f64, thickness: f64 },
    Cylinder { diameter: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub name: String,
    pub kind: ObjectKind,
    /// Extent perpendicular to the plane of motion (m).
    pub depth: f64,
    /// kg/m³.
    pub density: f64,
}

/// Names of the standard objects, in catalog order.
pub const CATALOG_NAMES: [&str; 7] = [
    "box_50x10",
    "box_50x30",
    "box_150x10",
    "box_150x30",
    "cyl_8",
    "cyl_20",
    "cyl_80",
];

impl ObjectSpec {
    pub const DEFAULT_DEPTH: f64 = 0.1;
    pub const DEFAULT_DENSITY: f64 = 500.0;

    pub fn new(kind: ObjectKind) -> Self {
        let name = match kind {
            ObjectKind::Box { width, thickness } => {
                format!("box_{}x{}", fmt_mm(width), fmt_mm(thickness))
            }
            ObjectKind::Cylinder { diameter } => format!("cyl_{}", fmt_mm(diameter)),
        };
        Self {
            name,
            kind,
            depth: Self::DEFAULT_DEPTH,
            density: Self::DEFAULT_DENSITY,
        }
    }

    /// The seven standard test objects.
    pub fn catalog() -> Vec<ObjectSpec> {
        let b = |w: f64, t: f64| {
            ObjectSpec::new(ObjectKind::Box {
                width: w * 1e-3,
                thickness: t * 1e-3,
            })
        };
        let c = |d: f64| ObjectSpec::new(ObjectKind::Cylinder { diameter: d * 1e-3 });
        vec![
            b(50.0, 10.0),
            b(50.0, 30.0),
            b(150.0, 10.0),
            b(150.0, 30.0),
            c(8.0),
            c(20.0),
            c(80.0),
        ]
    }

    pub fn by_name(name: &str) -> Option<ObjectSpec> {
        Self::catalog().into_iter().find(|o| o.name == name)
    }

    pub fn validate(&self) -> Result<(), String> {
        let dims: &[f64] = match &self.kind {
            ObjectKind::Box { width, thickness } => &[*width, *thickness],
            ObjectKind::Cylinder { diameter } => &[*diameter],
        };
        if dims.iter().chain([&self.depth, &self.density]).any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(format!("object {} needs positive dimensions and density", self.name));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        match self.kind {
            ObjectKind::Box { width, .. } => width,
            ObjectKind::Cylinder { diameter } => diameter,
        }
    }

    pub fn height(&self) -> f64 {
        match self.kind {
            ObjectKind::Box { thickness, .. } => thickness,
            ObjectKind::Cylinder { diameter } => diameter,
        }
    }

    pub fn mass(&self) -> f64 {
        let area = match self.kind {
            ObjectKind::Box { width, thickness } => width * thickness,
            ObjectKind::Cylinder { diameter } => PI * diameter * diameter / 4.0,
        };
        area * self.depth * self.density
    }

    /// The object as a free body resting on the ground at the origin.
    pub fn body(&self) -> RigidBody {
        let m = self.mass();
        match self.kind {
            ObjectKind::Box { width, thickness } => RigidBody::new(
                Shape::rectangle(width, thickness),
                m,
                m * (width * width + thickness * thickness) / 12.0,
                Vec2::new(0.0, thickness / 2.0),
            ),
            ObjectKind::Cylinder { diameter } => {
                let r = diameter / 2.0;
                RigidBody::new(Shape::Circle { radius: r }, m, m * r * r / 2.0, Vec2::new(0.0, r))
            }
        }
    }
}

fn fmt_mm(m: f64) -> String {
    let mm = m * 1e3;
    if (mm - mm.round()).abs() < 1e-9 {
        format!("{}", mm.round() as i64)
    } else {
        format!("{mm}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolConfig {
    /// Final motor tension (N).
    #[serde(rename = "tendon_max_n")]
    pub tendon_max: f64,
    /// Time to ramp the tension from zero (s).
    #[serde(rename = "ramp_duration_s")]
    pub ramp_duration: f64,
    /// Palm speed while lifting (m/s).
    #[serde(rename = "lift_speed_m_per_s")]
    pub lift_speed: f64,
    /// Period at which the disturbance is resampled (s).
    #[serde(rename = "disturbance_period_s")]
    pub disturbance_period: f64,
    /// Disturbance force per metre of lift (N/m).
    #[serde(rename = "force_gain_n_per_m")]
    pub force_gain: f64,
    /// Disturbance torque per metre of lift (N·m/m).
    #[serde(rename = "torque_gain_nm_per_m")]
    pub torque_gain: f64,
    /// Lift at which a trial ends successfully (m).
    #[serde(rename = "max_lift_m")]
    pub max_lift: f64,
    /// Time without hand contact that counts as a drop (s).
    #[serde(rename = "drop_window_s")]
    pub drop_window: f64,
    #[serde(rename = "timeout_s")]
    pub timeout: f64,
    /// Joint speed under which the hand counts as settled (rad/s).
    #[serde(rename = "settle_speed_rad_per_s")]
    pub settle_speed: f64,
    /// How long the joints must stay below `settle_speed` (s).
    #[serde(rename = "settle_window_s")]
    pub settle_window: f64,
    /// Lifting starts anyway this long after the ramp ends (s).
    #[serde(rename = "settle_timeout_s")]
    pub settle_timeout: f64,
    /// Proportional gain of the fingertip-height servo (1/s).
    #[serde(rename = "palm_gain_per_s")]
    pub palm_gain: f64,
    /// Speed limit of the fingertip-height servo (m/s).
    #[serde(rename = "palm_speed_limit_m_per_s")]
    pub palm_speed_limit: f64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            tendon_max: 100.0,
            ramp_duration: 2.0,
            lift_speed: 0.1,
            disturbance_period: 0.1,
            force_gain: 50.0,
            torque_gain: 1.0,
            max_lift: 2.0,
            drop_window: 0.2,
            timeout: 30.0,
            settle_speed: 0.01,
            settle_window: 0.1,
            settle_timeout: 3.0,
            palm_gain: 20.0,
            palm_speed_limit: 0.5,
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("ramp_duration", self.ramp_duration),
            ("lift_speed", self.lift_speed),
            ("disturbance_period", self.disturbance_period),
            ("max_lift", self.max_lift),
            ("drop_window", self.drop_window),
            ("timeout", self.timeout),
            ("settle_speed", self.settle_speed),
            ("settle_window", self.settle_window),
            ("palm_gain", self.palm_gain),
            ("palm_speed_limit", self.palm_speed_limit),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ConfigError(format!("protocol.{name} must be positive, got {v}")));
            }
        }
        let non_negative = [
            ("tendon_max", self.tendon_max),
            ("force_gain", self.force_gain),
            ("torque_gain", self.torque_gain),
            ("settle_timeout", self.settle_timeout),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(ConfigError(format!("protocol.{name} must be non-negative, got {v}")));
            }
        }
        Ok(())
    }
}

/// Everything a trial needs besides the design and the object.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub protocol: ProtocolConfig,
    pub world: WorldConfig,
    pub transmission: TransmissionConfig,
}

impl SimConfig {
    pub fn validate(&self, params: &DesignParams) -> Result<(), ConfigError> {
        self.protocol.validate()?;
        self.world.validate()?;
        self.transmission.validate(params)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Dropped,
    MaxHeight,
    Timeout,
    Unstable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Closing,
    Settling,
    Lifting,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeEvent {
    pub time: f64,
    pub mode: GraspMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub object: String,
    pub seed: u64,
    /// Palm lift at the last hand contact before the trial ended (m).
    pub h: f64,
    /// Mode at the start followed by every change.
    pub mode_trace: Vec<ModeEvent>,
    pub termination: Termination,
    /// Hand-object contacts in the last step.
    pub final_contacts: usize,
    /// Simulated time (s).
    pub duration: f64,
    /// Set when the simulation diverged.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

impl TrialResult {
    /// True if the trace passes through parallel, pull-in and power grasp in
    /// that order.
    pub fn has_full_transition(&self) -> bool {
        let order = [GraspMode::Parallel, GraspMode::PullIn, GraspMode::PowerGrasp];
        let mut next = 0;
        for e in &self.mode_trace {
            if next < order.len() && e.mode == order[next] {
                next += 1;
            }
        }
        next == order.len()
    }
}

/// One row of the per-trial trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub time: f64,
    pub mode: GraspMode,
    pub slider_position: f64,
    pub slider_tension: f64,
    pub lift: f64,
}

impl TraceRow {
    pub const CSV_HEADER: &'static str = "time_s,mode,x_s_m,t_s_n,h_m";

    pub fn csv(&self) -> String {
        format!(
            "{:.4},{},{:.6},{:.4},{:.6}",
            self.time, self.mode, self.slider_position, self.slider_tension, self.lift
        )
    }
}

/// State handed to trial observers after every step.
pub struct TrialView<'a> {
    pub world: &'a World,
    pub phase: Phase,
    /// Palm travel since lifting started (m).
    pub lift: f64,
}

impl TrialView<'_> {
    pub fn trace_row(&self) -> TraceRow {
        let slider = self.world.slider().expect("trial worlds have a hand");
        TraceRow {
            time: self.world.time(),
            mode: slider.mode,
            slider_position: slider.position,
            slider_tension: slider.tension,
            lift: self.lift,
        }
    }
}

/// Error from a trial that could not be set up. Divergence during a trial
/// is not an error; it ends the trial with [`Termination::Unstable`].
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimulationError {
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Diverged(#[from] DivergenceError),
}

/// SplitMix64 finalizer; used to derive independent seeds.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hashes a sequence of integers into one seed.
pub fn mix_seed(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x5EED_u64, |acc, p| splitmix64(acc ^ splitmix64(*p)))
}

/// Palm velocity that keeps the lowest fingertip at `target`: cancels the
/// fingertip motion caused by the joints and corrects the remaining error.
fn servo(cfg: &ProtocolConfig, target: f64, world: &World) -> f64 {
    let hand = world.hand.as_ref().unwrap();
    let (link, tip) = hand.lowest_tip_point();
    let jac = hand.point_jacobian(link, tip);
    let tip_rate: f64 = jac.iter().zip(&hand.state.velocity).map(|(j, v)| j.y * v).sum();
    (cfg.palm_gain * (target - tip.y) - tip_rate).clamp(-cfg.palm_speed_limit, cfg.palm_speed_limit)
}

fn max_joint_speed(world: &World) -> f64 {
    let v = &world.hand.as_ref().unwrap().state.velocity;
    v[..4].iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn object_touches_hand(world: &World) -> usize {
    world
        .contacts()
        .iter()
        .filter(|c| c.involves(BodyRef::Free(0)) && (c.bodies.0.is_hand() || c.bodies.1.is_hand()))
        .filter(|c| c.normal_impulse > 0.0)
        .count()
}

/// Runs the closing phases shared by trials and force measurements: the
/// tension ramp with the fingertip servo, then holding until the joints
/// settle. Returns false if the settle timeout expired first.
fn close_hand(
    world: &mut World,
    cfg: &ProtocolConfig,
    target: f64,
    observer: &mut dyn FnMut(&TrialView),
    mut on_step: impl FnMut(&World),
) -> Result<bool, DivergenceError> {
    let dt = world.cfg.timestep;
    let ramp_steps = (cfg.ramp_duration / dt).round() as u64;
    for k in 1..=ramp_steps {
        let tendon = cfg.tendon_max * k as f64 / ramp_steps as f64;
        let v = servo(cfg, target, world);
        world.step(tendon, v)?;
        on_step(world);
        observer(&TrialView {
            world,
            phase: Phase::Closing,
            lift: 0.0,
        });
    }
    let window = (cfg.settle_window / dt).round() as u64;
    let limit = (cfg.settle_timeout / dt).round() as u64;
    let mut calm = 0;
    for _ in 0..limit {
        if calm >= window {
            return Ok(true);
        }
        let v = servo(cfg, target, world);
        world.step(cfg.tendon_max, v)?;
        on_step(world);
        observer(&TrialView {
            world,
            phase: Phase::Settling,
            lift: 0.0,
        });
        calm = if max_joint_speed(world) < cfg.settle_speed { calm + 1 } else { 0 };
    }
    Ok(calm >= window)
}

/// Runs one grasp trial.
pub fn run_grasp_trial(
    params: &DesignParams,
    object: &ObjectSpec,
    seed: u64,
    cfg: &SimConfig,
) -> Result<TrialResult, SimulationError> {
    run_grasp_trial_observed(params, object, seed, cfg, &mut |_| {})
}

/// [`run_grasp_trial`] with a callback after every step.
pub fn run_grasp_trial_observed(
    params: &DesignParams,
    object: &ObjectSpec,
    seed: u64,
    cfg: &SimConfig,
    observer: &mut dyn FnMut(&TrialView),
) -> Result<TrialResult, SimulationError> {
    cfg.validate(params).map_err(WorldError::from)?;
    let mut world = build_world(params, object, &cfg.world, &cfg.transmission)?;
    let mut result = TrialResult {
        object: object.name.clone(),
        seed,
        h: 0.0,
        mode_trace: vec![ModeEvent {
            time: 0.0,
            mode: world.slider().unwrap().mode,
        }],
        termination: Termination::Dropped,
        final_contacts: 0,
        duration: 0.0,
        error: None,
    };
    match trial_phases(&mut world, seed, &cfg.protocol, observer, &mut result) {
        Ok(()) => {}
        Err(e) => {
            result.termination = Termination::Unstable;
            result.h = 0.0;
            result.error = Some(e.to_string());
        }
    }
    result.duration = world.time();
    result.final_contacts = object_touches_hand(&world);
    Ok(result)
}

fn trial_phases(
    world: &mut World,
    seed: u64,
    cfg: &ProtocolConfig,
    observer: &mut dyn FnMut(&TrialView),
    result: &mut TrialResult,
) -> Result<(), DivergenceError> {
    let dt = world.cfg.timestep;
    let start_y = world.bodies[0].position.y;
    let track_mode = |world: &World, trace: &mut Vec<ModeEvent>| {
        let mode = world.slider().unwrap().mode;
        if trace.last().map(|e| e.mode) != Some(mode) {
            trace.push(ModeEvent {
                time: world.time(),
                mode,
            });
        }
    };
    let trace = &mut result.mode_trace;
    let target = world.hand.as_ref().unwrap().fingertip_height();
    close_hand(world, cfg, target, observer, |w| track_mode(w, trace))?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let palm_start = world.hand.as_ref().unwrap().palm_y;
    let period = (cfg.disturbance_period / dt).round().max(1.0) as u64;
    let drop_steps = (cfg.drop_window / dt).round() as u64;
    let mut lift = 0.0;
    let mut last_contact_lift = None;
    let mut since_contact = 0;
    let mut k = 0u64;
    let mut wrench = (Vec2::ZERO, 0.0);
    let mut held = object_touches_hand(world) > 0;
    loop {
        if k % period == 0 {
            let angle = rng.gen_range(0.0..2.0 * PI);
            let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            wrench = (
                Vec2::from_angle(angle) * (cfg.force_gain * lift),
                sign * cfg.torque_gain * lift,
            );
        }
        // The disturbance acts on the grasped object only; a dropped object
        // falls freely.
        if held {
            world.set_external_wrench(0, wrench.0, wrench.1);
        } else {
            world.set_external_wrench(0, Vec2::ZERO, 0.0);
        }
        world.step(cfg.tendon_max, cfg.lift_speed)?;
        k += 1;
        lift = world.hand.as_ref().unwrap().palm_y - palm_start;
        track_mode(world, &mut result.mode_trace);
        observer(&TrialView {
            world,
            phase: Phase::Lifting,
            lift,
        });

        held = object_touches_hand(world) > 0;
        if held {
            last_contact_lift = Some(lift);
            since_contact = 0;
        } else {
            since_contact += 1;
        }
        result.h = last_contact_lift.unwrap_or(0.0).clamp(0.0, cfg.max_lift);
        let sunk = lift > 0.02 && world.bodies[0].position.y < start_y - 5e-4;
        if since_contact >= drop_steps || sunk {
            result.termination = Termination::Dropped;
            if last_contact_lift.is_none() {
                result.h = 0.0;
            }
            return Ok(());
        }
        if lift >= cfg.max_lift {
            result.termination = Termination::MaxHeight;
            result.h = cfg.max_lift;
            return Ok(());
        }
        if world.time() >= cfg.timeout {
            result.termination = Termination::Timeout;
            return Ok(());
        }
    }
}

/// Mean lift per object and the aggregate score of one design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub per_object_h: Vec<f64>,
    pub score: f64,
}

/// Product over objects of one plus the mean lift height. Never below 1
/// for non-negative heights.
pub fn aggregate_score(mean_heights: &[f64]) -> f64 {
    mean_heights.iter().map(|h| 1.0 + h).product()
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Seed of repeat `repeat` on object `object` for a design evaluated with
/// `seed`.
pub fn trial_seed(seed: u64, object: usize, repeat: usize) -> u64 {
    mix_seed(&[seed, object as u64, repeat as u64])
}

/// Scores a design: `m` trials per object, failed trials count as zero.
pub fn evaluate(
    params: &DesignParams,
    catalog: &[ObjectSpec],
    m: usize,
    seed: u64,
    cfg: &SimConfig,
) -> Evaluation {
    let per_object_h: Vec<f64> = catalog
        .iter()
        .enumerate()
        .map(|(i, object)| {
            let hs: Vec<f64> = (0..m)
                .map(|j| {
                    run_grasp_trial(params, object, trial_seed(seed, i, j), cfg)
                        .map_or(0.0, |r| r.h)
                })
                .collect();
            mean(&hs)
        })
        .collect();
    Evaluation {
        score: aggregate_score(&per_object_h),
        per_object_h,
    }
}

/// Height of the fixed spacer used for force measurement (m).
pub const SPACER_HEIGHT: f64 = 0.02;

/// Closes the hand at full tension on a fixed spacer and returns the
/// steady normal force on the plain finger (N), averaged over the last
/// `settle_window` of the hold.
pub fn measure_grasp_force(
    params: &DesignParams,
    spacer_width: f64,
    cfg: &SimConfig,
) -> Result<f64, SimulationError> {
    cfg.validate(params).map_err(WorldError::from)?;
    let spacer = ObjectSpec::new(ObjectKind::Box {
        width: spacer_width,
        thickness: SPACER_HEIGHT,
    });
    let mut world = build_world(params, &spacer, &cfg.world, &cfg.transmission)?;
    let body = world.bodies.remove(0);
    let fixed = world.add_static(StaticBody {
        shape: body.world_shape(),
        belt_speed: 0.0,
        is_ground: false,
    });
    let fixed = BodyRef::Static(fixed);
    let dt = world.cfg.timestep;
    let protocol = cfg.protocol;
    let target = world.hand.as_ref().unwrap().fingertip_height();
    close_hand(&mut world, &protocol, target, &mut |_| {}, |_| {})?;
    let window = (protocol.settle_window / dt).round().max(1.0) as usize;
    let mut total = 0.0;
    for _ in 0..window {
        let v = servo(&protocol, target, &world);
        world.step(protocol.tendon_max, v)?;
        total += plain_finger_force(&world, fixed);
    }
    Ok(total / window as f64)
}

fn plain_finger_force(world: &World, spacer: BodyRef) -> f64 {
    let dt = world.cfg.timestep;
    world
        .contacts()
        .iter()
        .filter(|c| c.involves(spacer))
        .filter(|c| {
            let other = if c.bodies.0 == spacer { c.bodies.1 } else { c.bodies.0 };
            matches!(other, BodyRef::Link(l) if l.finger == Finger::Plain)
        })
        .map(|c| c.normal_impulse / dt)
        .sum()
}
