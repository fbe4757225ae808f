//! Browser bindings for the static demo page in `www/`.
//!
//! Every call takes design parameters as JSON in table units (mm, N/mm, N)
//! and returns JSON text. Errors come back as a message string.

use graspforge::dynamics::render_svg;
use graspforge::scenario::{
    measure_grasp_force, run_grasp_trial_observed, ObjectSpec, SimConfig, TrialResult, CATALOG_NAMES,
};
use graspforge::study::GRASP_FORCE_WIDTHS_MM;
use graspforge::transmission::{slider_law, GraspMode};
use graspforge::{DesignParams, DesignParamsMm};
use serde::Serialize;
use wasm_bindgen::prelude::*;

fn parse_params(json: &str) -> Result<DesignParams, String> {
    let mm: DesignParamsMm = serde_json::from_str(json).map_err(|e| format!("bad parameters: {e}"))?;
    let p = DesignParams::from(mm);
    p.validate().map_err(|e| e.to_string())?;
    Ok(p)
}

fn to_json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

/// The published optimum, as a starting point for the form.
#[wasm_bindgen]
pub fn table_optimum() -> String {
    to_json(&DesignParamsMm::from(DesignParams::table_optimum())).expect("plain struct")
}

#[wasm_bindgen]
pub fn object_names() -> String {
    to_json(&CATALOG_NAMES).expect("plain list")
}

#[derive(Serialize)]
struct SliderPoint {
    supposed_mm: f64,
    position_mm: f64,
    tension_n: f64,
    mode: GraspMode,
}

/// Slider position and tendon tension against the unconstrained slider
/// travel, from 0 to `max_mm`.
#[wasm_bindgen]
pub fn slider_curve(params_json: &str, max_mm: f64, samples: usize) -> Result<String, String> {
    let p = parse_params(params_json)?;
    if !(max_mm > 0.0) || samples < 2 {
        return Err("need a positive range and at least two samples".into());
    }
    let cfg = SimConfig::default().transmission;
    let points: Vec<SliderPoint> = (0..samples)
        .map(|i| {
            let x = max_mm * 1e-3 * i as f64 / (samples - 1) as f64;
            let s = slider_law(x, &p, &cfg);
            SliderPoint {
                supposed_mm: x * 1e3,
                position_mm: s.position * 1e3,
                tension_n: s.tension,
                mode: s.mode,
            }
        })
        .collect();
    to_json(&points)
}

#[derive(Serialize)]
struct TrialFrames {
    result: TrialResult,
    frames: Vec<String>,
}

/// Runs one grasp trial and returns its result with an SVG frame every
/// `frame_every` steps.
#[wasm_bindgen]
pub fn grasp_trial(params_json: &str, object: &str, seed: u64, frame_every: usize) -> Result<String, String> {
    let p = parse_params(params_json)?;
    let spec = ObjectSpec::by_name(object)
        .ok_or_else(|| format!("unknown object {object:?}; known objects: {}", CATALOG_NAMES.join(", ")))?;
    let mut frames = vec![];
    let mut step = 0usize;
    let result = run_grasp_trial_observed(&p, &spec, seed, &SimConfig::default(), &mut |v| {
        if step % frame_every.max(1) == 0 {
            let row = v.trace_row();
            frames.push(render_svg(v.world, &format!("t = {:.2} s  {}", row.time, row.mode)));
        }
        step += 1;
    })
    .map_err(|e| e.to_string())?;
    to_json(&TrialFrames { result, frames })
}

#[derive(Serialize)]
struct ForcePoint {
    width_mm: f64,
    force_n: f64,
}

/// Squeeze force on fixed spacers of the standard widths.
#[wasm_bindgen]
pub fn grasp_force(params_json: &str) -> Result<String, String> {
    let p = parse_params(params_json)?;
    let cfg = SimConfig::default();
    let points = GRASP_FORCE_WIDTHS_MM
        .iter()
        .map(|&w| {
            measure_grasp_force(&p, w * 1e-3, &cfg)
                .map(|force_n| ForcePoint { width_mm: w, force_n })
                .map_err(|e| e.to_string())
        })
        .collect::<Result<Vec<_>, _>>()?;
    to_json(&points)
}
