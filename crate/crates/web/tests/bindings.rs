use graspforge_web::*;
use serde_json::Value;

fn parse(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

#[test]
fn optimum_round_trips_through_the_form() {
    let expected: graspforge::DesignParamsMm = graspforge::DesignParams::table_optimum().into();
    let p: graspforge::DesignParamsMm = serde_json::from_str(&table_optimum()).unwrap();
    assert_eq!(p, expected);
    assert_eq!(parse(&object_names()).as_array().unwrap().len(), 7);
}

#[test]
fn slider_curve_covers_all_modes() {
    let v = parse(&slider_curve(&table_optimum(), 20.0, 81).unwrap());
    let pts = v.as_array().unwrap();
    assert_eq!(pts.len(), 81);
    let modes: Vec<&str> = pts.iter().map(|p| p["mode"].as_str().unwrap()).collect();
    assert_eq!(modes[0], "parallel");
    assert!(modes.contains(&"pull_in"));
    assert!(modes.contains(&"power_grasp"));
    let tension: Vec<f64> = pts.iter().map(|p| p["tension_n"].as_f64().unwrap()).collect();
    assert!(tension.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn trial_returns_frames() {
    let v = parse(&grasp_trial(&table_optimum(), "box_50x10", 0, 500).unwrap());
    assert!(v["result"]["h"].as_f64().unwrap() > 0.0);
    let frames = v["frames"].as_array().unwrap();
    assert!(frames.len() > 2);
    assert!(frames[0].as_str().unwrap().starts_with("<svg"));
}

#[test]
fn force_curve_uses_standard_widths() {
    let v = parse(&grasp_force(&table_optimum()).unwrap());
    let widths: Vec<f64> = v.as_array().unwrap().iter().map(|p| p["width_mm"].as_f64().unwrap()).collect();
    assert_eq!(widths, [10.0, 20.0, 30.0, 50.0, 70.0]);
}

#[test]
fn bad_input_is_an_error_message() {
    assert!(slider_curve("{}", 20.0, 10).unwrap_err().contains("bad parameters"));
    let mut p = parse(&table_optimum());
    p["ip_pulley_radius_mm"] = p["ip_moment_arm_mm"].clone();
    assert!(grasp_force(&p.to_string()).is_err());
    assert!(grasp_trial(&table_optimum(), "teapot", 0, 10).unwrap_err().contains("cyl_80"));
}
