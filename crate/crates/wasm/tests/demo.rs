use assimlab_wasm::{interval_json, planted_json, validation_json};
use serde_json::Value;

fn parse(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

#[test]
fn exact_counts_recover_planted_ratios() {
    let res = parse(&planted_json(r#"{"interests": 24, "seed": 3}"#).unwrap());
    let rows = res["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 24);
    let mut kept = 0;
    for row in rows {
        if row["status"] == "kept" {
            kept += 1;
            let got = row["log_ar"].as_f64().unwrap();
            let want = row["planted_log_ar"].as_f64().unwrap();
            assert!((got - want).abs() < 1e-12);
        } else {
            assert!(row["log_ar"].is_null());
        }
    }
    assert!(kept > 0);
    let (lo, med, hi) = (res["ci"]["lower"].as_f64().unwrap(), res["median_log_ar"].as_f64().unwrap(), res["ci"]["upper"].as_f64().unwrap());
    assert!(lo <= med && med <= hi);
    assert!((med - res["planted_median"].as_f64().unwrap()).abs() < 1e-12);
}

#[test]
fn requests_are_deterministic() {
    let req = r#"{"interests": 40, "seed": 9, "rounding": 2, "percentile": 30}"#;
    assert_eq!(planted_json(req).unwrap(), planted_json(req).unwrap());
    let req = r#"{"sigma": 0.5, "trials": 300, "seed": 4}"#;
    assert_eq!(validation_json(req).unwrap(), validation_json(req).unwrap());
}

#[test]
fn undistorted_proxy_has_zero_divergence_and_passes() {
    let res = parse(&validation_json(r#"{"sigma": 0.0}"#).unwrap());
    assert!(res["observed_kl"].as_f64().unwrap().abs() < 1e-12);
    assert_eq!(res["verdict"], "pass");
    assert_eq!(res["axes"].as_array().unwrap().len(), 4);
}

#[test]
fn heavy_distortion_fails_validation() {
    let res = parse(&validation_json(r#"{"sigma": 3.0, "seed": 2}"#).unwrap());
    assert_eq!(res["verdict"], "fail");
}

#[test]
fn interval_brackets_median() {
    let ci = parse(&interval_json(r#"{"values": [3, 1, 2, 5, 4], "seed": 1}"#).unwrap());
    assert_eq!(ci["median"], 3.0);
    assert!(ci["lower"].as_f64().unwrap() <= 3.0 && ci["upper"].as_f64().unwrap() >= 3.0);
}

#[test]
fn bad_requests_are_errors() {
    assert!(planted_json("not json").unwrap_err().starts_with("bad request"));
    assert!(planted_json(r#"{"interests": 2}"#).is_err());
    assert!(validation_json(r#"{"sigma": -1}"#).is_err());
    assert!(interval_json(r#"{"values": []}"#).is_err());
}
