use blindsim_web::*;
use serde_json::Value;

#[test]
fn two_state_report_carries_the_exact_distribution() {
    let v: Value = serde_json::from_str(&two_state_report_json(8).unwrap()).unwrap();
    assert_eq!(v["distribution"], serde_json::json!([0.28125, 0.25, 0.21875, 0.25]));
    assert_eq!(v["record"]["N"], 8);
    assert!(two_state_report_json(7).is_err());
}

#[test]
fn overlap_chain_squares_back() {
    let v: Value = serde_json::from_str(&overlap_halving_json(std::f64::consts::FRAC_PI_2, 3).unwrap()).unwrap();
    let steps = v.as_array().unwrap();
    assert_eq!(steps.len(), 3);
    for s in steps {
        let (a, b) = (s["overlap_in"].as_f64().unwrap(), s["overlap_out"].as_f64().unwrap());
        assert!((b * b - a).abs() < 1e-12);
    }
    assert!(overlap_halving_json(4.0, 1).is_err());
}

#[test]
fn blindness_scan_tells_families_apart() {
    let cubed: Value = serde_json::from_str(&blindness_scan_json("cubed", 1, 0).unwrap()).unwrap();
    assert!(cubed["max_distance"].as_f64().unwrap() <= 1e-10);
    let leak: Value = serde_json::from_str(&blindness_scan_json("nonweak", 1, 0).unwrap()).unwrap();
    assert!((leak["max_distance"].as_f64().unwrap() - 0.25).abs() < 1e-12);
    assert!(blindness_scan_json("mystery", 1, 0).is_err());
}
