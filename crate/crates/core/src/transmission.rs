//! Tendon transmission of the gripper.
//!
//! A single motor tendon flexes both fingers. On the crawler finger the
//! tendon is exposed along the distal link, runs around the fingertip and
//! terminates in a spring-loaded slider. The slider position decides how the
//! motor tension splits between the finger joints and the crawler belt, which
//! gives the three grasp modes:
//!
//! * [`GraspMode::Parallel`]: the slider rests against its start stop, the
//!   tendon is effectively inextensible and the hand closes like a parallel
//!   gripper.
//! * [`GraspMode::PullIn`]: the tension exceeds the slider pretension, the
//!   slider travels and the crawler conveys the object into the hand.
//! * [`GraspMode::PowerGrasp`]: the slider sits on its end stop and the full
//!   motor tension goes to the joints again.
//!
//! Everything here is a pure function of its inputs and uses SI units.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;

/// Margin between a pulley and the tendon on the opposite side of a joint.
pub const TENDON_MARGIN: f64 = 0.001;

/// Number of generalized hand coordinates: two joints per finger plus the
/// crawler belt displacement.
pub const HAND_DOF: usize = 5;

/// Indices into the generalized hand coordinate vector.
pub mod dof {
    /// Base joint of the plain finger.
    pub const MP1: usize = 0;
    /// Middle joint of the plain finger.
    pub const IP1: usize = 1;
    /// Base joint of the crawler finger.
    pub const MP2: usize = 2;
    /// Middle joint of the crawler finger.
    pub const IP2: usize = 3;
    /// Crawler belt displacement (m).
    pub const CRAWLER: usize = 4;
}

/// The two fingers. Only [`Finger::Crawler`] carries the belt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Finger {
    Plain,
    Crawler,
}

impl Finger {
    pub const BOTH: [Finger; 2] = [Finger::Plain, Finger::Crawler];

    /// Generalized coordinate index of the base (MP) joint.
    pub fn mp_index(self) -> usize {
        match self {
            Finger::Plain => dof::MP1,
            Finger::Crawler => dof::MP2,
        }
    }

    /// Generalized coordinate index of the middle (IP) joint.
    pub fn ip_index(self) -> usize {
        self.mp_index() + 1
    }
}

/// Names of the optimized design variables, in vector order.
pub const PARAM_NAMES: [&str; 8] = [
    "dp_length",
    "pp_length",
    "mp_spacing",
    "ip_pulley_radius",
    "ip_moment_arm",
    "mp_moment_arm",
    "slider_stiffness",
    "slider_pretension",
];

/// Admissible range of every design variable in SI units, in vector order.
///
/// The upper bound of the IP pulley radius is additionally tied to the IP
/// moment arm, see [`DesignParams::validate`].
pub const PARAM_BOUNDS: [(f64, f64); 8] = [
    (0.040, 0.080),
    (0.060, 0.120),
    (0.040, 0.080),
    (0.004, 0.011),
    (0.008, 0.012),
    (0.010, 0.020),
    (20.0, 5000.0),
    (0.1, 50.0),
];

const BOUND_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParamsError {
    #[error("{name} = {value} is outside [{lower}, {upper}]")]
    OutOfBounds {
        name: &'static str,
        value: f64,
        lower: f64,
        upper: f64,
    },
    #[error("ip_pulley_radius {pulley} exceeds ip_moment_arm {arm} minus the {margin} m tendon margin")]
    PulleyTooLarge { pulley: f64, arm: f64, margin: f64 },
}

/// The eight optimized design variables, in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignParams {
    /// Distal link length.
    #[serde(rename = "dp_length_m")]
    pub dp_length: f64,
    /// Proximal link length.
    #[serde(rename = "pp_length_m")]
    pub pp_length: f64,
    /// Distance between the two base joints.
    #[serde(rename = "mp_spacing_m")]
    pub mp_spacing: f64,
    /// Pulley radius at the middle joint.
    #[serde(rename = "ip_pulley_radius_m")]
    pub ip_pulley_radius: f64,
    /// Moment arm of the middle joint with the finger extended.
    #[serde(rename = "ip_moment_arm_m")]
    pub ip_moment_arm: f64,
    /// Moment arm of the base joint with the finger extended.
    #[serde(rename = "mp_moment_arm_m")]
    pub mp_moment_arm: f64,
    /// Slider spring stiffness (N/m).
    #[serde(rename = "slider_stiffness_n_per_m")]
    pub slider_stiffness: f64,
    /// Slider spring pretension (N).
    #[serde(rename = "slider_pretension_n")]
    pub slider_pretension: f64,
}

impl DesignParams {
    /// The best design reported for the physical prototype.
    pub fn table_optimum() -> Self {
        Self {
            dp_length: 0.074,
            pp_length: 0.092,
            mp_spacing: 0.080,
            ip_pulley_radius: 0.007,
            ip_moment_arm: 0.008,
            mp_moment_arm: 0.020,
            slider_stiffness: 3100.0,
            slider_pretension: 24.0,
        }
    }

    /// Pulley radius at the base joint, tied to its moment arm.
    pub fn mp_pulley_radius(&self) -> f64 {
        self.mp_moment_arm - TENDON_MARGIN
    }

    pub fn to_array(&self) -> [f64; 8] {
        [
            self.dp_length,
            self.pp_length,
            self.mp_spacing,
            self.ip_pulley_radius,
            self.ip_moment_arm,
            self.mp_moment_arm,
            self.slider_stiffness,
            self.slider_pretension,
        ]
    }

    pub fn from_array(v: [f64; 8]) -> Self {
        Self {
            dp_length: v[0],
            pp_length: v[1],
            mp_spacing: v[2],
            ip_pulley_radius: v[3],
            ip_moment_arm: v[4],
            mp_moment_arm: v[5],
            slider_stiffness: v[6],
            slider_pretension: v[7],
        }
    }

    /// Checks every variable against [`PARAM_BOUNDS`] and the pulley margin.
    pub fn validate(&self) -> Result<(), ParamsError> {
        for ((name, (lower, upper)), value) in PARAM_NAMES
            .iter()
            .zip(PARAM_BOUNDS)
            .zip(self.to_array())
        {
            let tol = BOUND_TOLERANCE * upper.abs().max(1.0);
            if !(value >= lower - tol && value <= upper + tol) {
                return Err(ParamsError::OutOfBounds {
                    name,
                    value,
                    lower,
                    upper,
                });
            }
        }
        if self.ip_pulley_radius > self.ip_moment_arm - TENDON_MARGIN + BOUND_TOLERANCE {
            return Err(ParamsError::PulleyTooLarge {
                pulley: self.ip_pulley_radius,
                arm: self.ip_moment_arm,
                margin: TENDON_MARGIN,
            });
        }
        Ok(())
    }
}

/// [`DesignParams`] in the units used for configuration files
/// (mm, N/mm and N).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignParamsMm {
    pub dp_length_mm: f64,
    pub pp_length_mm: f64,
    pub mp_spacing_mm: f64,
    pub ip_pulley_radius_mm: f64,
    pub ip_moment_arm_mm: f64,
    pub mp_moment_arm_mm: f64,
    pub slider_stiffness_n_per_mm: f64,
    pub slider_pretension_n: f64,
}

impl From<DesignParamsMm> for DesignParams {
    fn from(p: DesignParamsMm) -> Self {
        Self {
            dp_length: p.dp_length_mm * 1e-3,
            pp_length: p.pp_length_mm * 1e-3,
            mp_spacing: p.mp_spacing_mm * 1e-3,
            ip_pulley_radius: p.ip_pulley_radius_mm * 1e-3,
            ip_moment_arm: p.ip_moment_arm_mm * 1e-3,
            mp_moment_arm: p.mp_moment_arm_mm * 1e-3,
            slider_stiffness: p.slider_stiffness_n_per_mm * 1e3,
            slider_pretension: p.slider_pretension_n,
        }
    }
}

impl From<DesignParams> for DesignParamsMm {
    fn from(p: DesignParams) -> Self {
        Self {
            dp_length_mm: p.dp_length * 1e3,
            pp_length_mm: p.pp_length * 1e3,
            mp_spacing_mm: p.mp_spacing * 1e3,
            ip_pulley_radius_mm: p.ip_pulley_radius * 1e3,
            ip_moment_arm_mm: p.ip_moment_arm * 1e3,
            mp_moment_arm_mm: p.mp_moment_arm * 1e3,
            slider_stiffness_n_per_mm: p.slider_stiffness * 1e-3,
            slider_pretension_n: p.slider_pretension,
        }
    }
}

/// Constants of the transmission model that are not optimized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransmissionConfig {
    /// Stiffness of the fictitious compliance between tendon and slider (N/m).
    #[serde(rename = "tendon_stiffness_n_per_m")]
    pub tendon_stiffness: f64,
    /// Gain of the parallel-link mechanical stopper (N·m/rad).
    #[serde(rename = "stopper_gain_nm_per_rad")]
    pub stopper_gain: f64,
    /// Joint damping (N·m·s/rad).
    #[serde(rename = "joint_damping_nms_per_rad")]
    pub joint_damping: f64,
    /// Extension spring stiffness (N·m/rad).
    #[serde(rename = "extension_stiffness_nm_per_rad")]
    pub extension_stiffness: f64,
    /// Extension spring preload angle (rad).
    #[serde(rename = "extension_preload_rad")]
    pub extension_preload: f64,
    /// Attach angle of the fingers (rad).
    #[serde(rename = "attach_angle_rad")]
    pub attach_angle: f64,
    /// Slider travel (m).
    #[serde(rename = "slider_travel_m")]
    pub slider_travel: f64,
    /// Offset that makes the supposed slider position zero in the initial
    /// posture (m). Recomputed by [`TransmissionConfig::zeroed_at`].
    #[serde(rename = "slider_offset_m")]
    pub slider_offset: f64,
    /// Effective inertia of the crawler belt (kg).
    #[serde(rename = "crawler_mass_kg")]
    pub crawler_mass: f64,
}

impl Default for TransmissionConfig {
    fn default() -> Self {
        Self {
            tendon_stiffness: 1e6,
            stopper_gain: 100.0,
            joint_damping: 0.05,
            extension_stiffness: 0.1,
            extension_preload: PI / 6.0,
            attach_angle: 2.0 * PI / 3.0,
            slider_travel: 0.015,
            slider_offset: 0.0,
            crawler_mass: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid transmission config: {0}")]
pub struct ConfigError(pub String);

impl TransmissionConfig {
    pub fn validate(&self, params: &DesignParams) -> Result<(), ConfigError> {
        let positive = [
            ("tendon_stiffness", self.tendon_stiffness),
            ("stopper_gain", self.stopper_gain),
            ("extension_stiffness", self.extension_stiffness),
            ("slider_travel", self.slider_travel),
            ("crawler_mass", self.crawler_mass),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ConfigError(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.joint_damping >= 0.0) || !(self.extension_preload >= 0.0) {
            return Err(ConfigError("damping and preload must be non-negative".into()));
        }
        if self.tendon_stiffness < 100.0 * params.slider_stiffness {
            return Err(ConfigError(format!(
                "tendon_stiffness {} must be at least 100x the slider stiffness {}",
                self.tendon_stiffness, params.slider_stiffness
            )));
        }
        Ok(())
    }

    /// Returns a copy whose slider offset puts the supposed slider position
    /// of `state` at zero.
    pub fn zeroed_at(&self, state: &HandState, params: &DesignParams) -> Self {
        let mut cfg = *self;
        cfg.slider_offset = 0.0;
        cfg.slider_offset = -supposed_slider_position(state, params, &cfg);
        cfg
    }
}

/// Generalized hand coordinates and their rates.
///
/// Joint angles are displacements from full extension with flexion
/// positive; the crawler coordinate is the belt displacement in metres,
/// positive when the belt surface on the inner face moves toward the palm.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct HandState {
    pub position: [f64; HAND_DOF],
    pub velocity: [f64; HAND_DOF],
}

impl HandState {
    /// Fully extended hand with both distal links held parallel.
    pub fn extended(cfg: &TransmissionConfig) -> Self {
        let mut position = [0.0; HAND_DOF];
        position[dof::IP1] = cfg.attach_angle;
        position[dof::IP2] = cfg.attach_angle;
        Self {
            position,
            velocity: [0.0; HAND_DOF],
        }
    }

    pub fn mp(&self, finger: Finger) -> f64 {
        self.position[finger.mp_index()]
    }

    pub fn ip(&self, finger: Finger) -> f64 {
        self.position[finger.ip_index()]
    }

    pub fn crawler(&self) -> f64 {
        self.position[dof::CRAWLER]
    }

    pub fn is_valid(&self) -> bool {
        self.position.iter().chain(&self.velocity).all(|v| v.is_finite())
            && self.position[..4]
                .iter()
                .all(|a| (-1e-6..=PI + 1e-6).contains(a))
    }
}

/// Which section of the slider law is active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraspMode {
    Parallel,
    PullIn,
    PowerGrasp,
}

impl GraspMode {
    pub fn as_str(self) -> &'static str {
        match self {
            GraspMode::Parallel => "parallel",
            GraspMode::PullIn => "pull_in",
            GraspMode::PowerGrasp => "power_grasp",
        }
    }
}

impl fmt::Display for GraspMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliderState {
    /// Slider position implied by the hand state (m).
    pub supposed_position: f64,
    /// Actual slider position after the travel limits (m).
    pub position: f64,
    /// Tendon tension in the sliding part (N).
    pub tension: f64,
    pub mode: GraspMode,
}

/// Generalized forces on the hand coordinates: joint torques (N·m) followed
/// by the crawler drive force (N).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct JointTorques(pub [f64; HAND_DOF]);

impl JointTorques {
    pub fn mp(&self, finger: Finger) -> f64 {
        self.0[finger.mp_index()]
    }

    pub fn ip(&self, finger: Finger) -> f64 {
        self.0[finger.ip_index()]
    }

    pub fn crawler(&self) -> f64 {
        self.0[dof::CRAWLER]
    }
}

/// Flexion moment arm of a tendon routed straight across a joint.
fn varying_arm(arm: f64, angle: f64) -> f64 {
    arm * (1.0 + angle.sin()).max(0.0).sqrt()
}

/// Raw actuation torques from the motor tension `tendon` and the sliding
/// part tension `slider`.
pub fn actuation_torques(
    state: &HandState,
    params: &DesignParams,
    tendon: f64,
    slider: f64,
) -> JointTorques {
    let r_m = params.mp_pulley_radius();
    let r_i = params.ip_pulley_radius;
    let q = &state.position;
    let mut tau = [0.0; HAND_DOF];
    tau[dof::MP1] = (varying_arm(params.mp_moment_arm, q[dof::MP1]) + r_m) * tendon;
    tau[dof::IP1] = (varying_arm(params.ip_moment_arm, q[dof::IP1]) - r_i) * tendon;
    tau[dof::MP2] = varying_arm(params.mp_moment_arm, q[dof::MP2]) * tendon + r_m * slider;
    tau[dof::IP2] = varying_arm(params.ip_moment_arm, q[dof::IP2]) * tendon - r_i * slider;
    tau[dof::CRAWLER] = tendon - slider;
    JointTorques(tau)
}

/// Slider position implied by the hand state if the tendon were rigid.
pub fn supposed_slider_position(
    state: &HandState,
    params: &DesignParams,
    cfg: &TransmissionConfig,
) -> f64 {
    state.crawler() + params.ip_pulley_radius * state.ip(Finger::Crawler)
        - params.mp_pulley_radius() * state.mp(Finger::Crawler)
        + cfg.slider_offset
}

/// Gradient of the supposed slider position with respect to the generalized
/// hand coordinates.
pub fn slider_gradient(params: &DesignParams) -> [f64; HAND_DOF] {
    let mut g = [0.0; HAND_DOF];
    g[dof::MP2] = -params.mp_pulley_radius();
    g[dof::IP2] = params.ip_pulley_radius;
    g[dof::CRAWLER] = 1.0;
    g
}

/// Slider law for a given supposed slider position.
pub fn slider_law(
    supposed: f64,
    params: &DesignParams,
    cfg: &TransmissionConfig,
) -> SliderState {
    let k = cfg.tendon_stiffness;
    let free = (k * supposed - params.slider_pretension) / (k + params.slider_stiffness);
    let (position, mode) = if free < 0.0 {
        (0.0, GraspMode::Parallel)
    } else if free > cfg.slider_travel {
        (cfg.slider_travel, GraspMode::PowerGrasp)
    } else {
        (free, GraspMode::PullIn)
    };
    let tension = (k * (supposed - position)).max(0.0);
    SliderState {
        supposed_position: supposed,
        position,
        tension,
        mode,
    }
}

/// Local slope dT_s/dx_t of [`slider_law`].
pub fn slider_law_slope(supposed: f64, params: &DesignParams, cfg: &TransmissionConfig) -> f64 {
    let s = slider_law(supposed, params, cfg);
    let k = cfg.tendon_stiffness;
    match s.mode {
        GraspMode::PullIn => k * params.slider_stiffness / (k + params.slider_stiffness),
        _ if s.tension > 0.0 => k,
        _ => 0.0,
    }
}

pub fn slider_state(
    state: &HandState,
    params: &DesignParams,
    cfg: &TransmissionConfig,
) -> SliderState {
    slider_law(supposed_slider_position(state, params, cfg), params, cfg)
}

/// IP angle at which the distal link is parallel to the hand axis.
pub fn parallel_ip_angle(mp: f64, cfg: &TransmissionConfig) -> f64 {
    cfg.attach_angle - mp
}

/// Coupling torque of the spring between the distal link and the parallel
/// link, with the stiff stopper below the parallel angle.
///
/// The torque acts on both joints of the finger. The boundary itself
/// belongs to the spring branch, so the preload shows up as a jump of
/// `extension_stiffness * extension_preload` there.
pub fn parallel_coupling_torque(ip: f64, mp: f64, cfg: &TransmissionConfig) -> f64 {
    let excess = ip - parallel_ip_angle(mp, cfg);
    if excess >= 0.0 {
        -cfg.extension_stiffness * (excess + cfg.extension_preload)
    } else {
        cfg.stopper_gain * excess
    }
}

/// Net generalized forces together with the slider state they came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HandDrive {
    pub torques: JointTorques,
    pub slider: SliderState,
}

pub fn hand_drive(
    state: &HandState,
    params: &DesignParams,
    cfg: &TransmissionConfig,
    tendon: f64,
) -> HandDrive {
    let slider = slider_state(state, params, cfg);
    HandDrive {
        torques: drive_torques(state, params, cfg, tendon, slider.tension),
        slider,
    }
}

/// Net generalized forces for a given slider tension instead of the one
/// implied by the state. The integrator uses this to evaluate the slider
/// law on a linearized segment.
pub fn drive_torques(
    state: &HandState,
    params: &DesignParams,
    cfg: &TransmissionConfig,
    tendon: f64,
    slider_tension: f64,
) -> JointTorques {
    let mut tau = actuation_torques(state, params, tendon, slider_tension).0;
    for finger in Finger::BOTH {
        let (m, i) = (finger.mp_index(), finger.ip_index());
        let coupling = parallel_coupling_torque(state.position[i], state.position[m], cfg);
        tau[i] += coupling - cfg.joint_damping * state.velocity[i];
        tau[m] += coupling
            - cfg.extension_stiffness * (state.position[m] + cfg.attach_angle)
            - cfg.joint_damping * state.velocity[m];
    }
    JointTorques(tau)
}

/// Net joint torques and crawler force sent to the dynamics.
pub fn net_joint_torques(
    state: &HandState,
    params: &DesignParams,
    cfg: &TransmissionConfig,
    tendon: f64,
) -> JointTorques {
    hand_drive(state, params, cfg, tendon).torques
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn optimum() -> DesignParams {
        DesignParams::table_optimum()
    }

    #[test]
    fn table_optimum_is_valid() {
        optimum().validate().unwrap();
        assert_relative_eq!(optimum().mp_pulley_radius(), 0.019, max_relative = 1e-12);
    }

    #[test]
    fn pulley_margin_is_enforced() {
        let mut p = optimum();
        p.ip_pulley_radius = 0.0075;
        assert!(matches!(p.validate(), Err(ParamsError::PulleyTooLarge { .. })));
        p.ip_pulley_radius = 0.003;
        assert!(matches!(
            p.validate(),
            Err(ParamsError::OutOfBounds {
                name: "ip_pulley_radius",
                ..
            })
        ));
    }

    #[test]
    fn mm_units_convert() {
        let mm = DesignParamsMm::from(optimum());
        assert_relative_eq!(mm.slider_stiffness_n_per_mm, 3.1, max_relative = 1e-12);
        assert_relative_eq!(mm.dp_length_mm, 74.0, max_relative = 1e-12);
        let back = DesignParams::from(mm);
        for (a, b) in back.to_array().iter().zip(optimum().to_array()) {
            assert_relative_eq!(*a, b, max_relative = 1e-12);
        }
    }

    #[test]
    fn zero_input_gives_zero_torque() {
        let t = actuation_torques(&HandState::default(), &optimum(), 0.0, 0.0);
        assert_eq!(t, JointTorques::default());
    }

    #[test]
    fn slider_offset_zeroes_initial_position() {
        let base = TransmissionConfig::default();
        let state = HandState::extended(&base);
        let cfg = base.zeroed_at(&state, &optimum());
        assert_eq!(supposed_slider_position(&state, &optimum(), &cfg), 0.0);
        let s = slider_state(&state, &optimum(), &cfg);
        assert_eq!(s.mode, GraspMode::Parallel);
        assert_eq!(s.tension, 0.0);
        assert_eq!(s.position, 0.0);
        assert!(cfg.validate(&optimum()).is_ok());
    }

    #[test]
    fn weak_tendon_stiffness_rejected() {
        let cfg = TransmissionConfig {
            tendon_stiffness: 1e4,
            ..Default::default()
        };
        assert!(cfg.validate(&optimum()).is_err());
    }

    #[test]
    fn damping_subtracts_exactly() {
        let params = optimum();
        let undamped = TransmissionConfig {
            joint_damping: 0.0,
            ..Default::default()
        };
        let damped = TransmissionConfig {
            joint_damping: 0.3,
            ..undamped
        };
        let mut state = HandState::extended(&undamped);
        state.position[dof::MP1] = 0.4;
        state.position[dof::IP2] = 1.9;
        state.velocity = [0.7, -1.1, 0.25, 2.0, 0.4];
        let a = net_joint_torques(&state, &params, &undamped, 60.0);
        let b = net_joint_torques(&state, &params, &damped, 60.0);
        for j in 0..4 {
            assert_relative_eq!(b.0[j] - a.0[j], -0.3 * state.velocity[j], max_relative = 1e-12);
        }
        assert_eq!(a.crawler(), b.crawler());
    }

    #[test]
    fn slopes_by_mode() {
        let params = optimum();
        let cfg = TransmissionConfig::default();
        assert_eq!(slider_law_slope(-1e-3, &params, &cfg), 0.0);
        assert_eq!(slider_law_slope(1e-5, &params, &cfg), cfg.tendon_stiffness);
        assert!(slider_law_slope(5e-3, &params, &cfg) < params.slider_stiffness);
        assert_eq!(slider_law_slope(0.2, &params, &cfg), cfg.tendon_stiffness);
    }
}
