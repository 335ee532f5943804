use fecap_wasm::{invert_json, projection_json, sweep_json};
use serde_json::Value;

fn parse(s: Result<String, String>) -> Value {
    serde_json::from_str(&s.expect("export succeeded")).unwrap()
}

#[test]
fn embedded_model_tracks_the_oracle() {
    let v = parse(sweep_json(1.0, 8.0));
    let n = v["v"].as_array().unwrap().len();
    assert!(n > 0);
    assert_eq!(v["oracle"].as_array().unwrap().len(), n);
    assert_eq!(v["model"].as_array().unwrap().len(), n);
    assert!(v["r2"].as_f64().unwrap() > 0.95, "{}", v["r2"]);
}

#[test]
fn sweep_rejects_out_of_range_device() {
    assert!(sweep_json(5.0, 8.0).is_err());
    assert!(sweep_json(1.0, f64::NAN).is_err());
}

#[test]
fn both_inverters_run_and_are_seeded() {
    for method in ["grad", "bayes"] {
        let a = invert_json(1.2, 9.0, method, 4, 60).unwrap();
        let b = invert_json(1.2, 9.0, method, 4, 60).unwrap();
        assert_eq!(a, b);
        let v: Value = serde_json::from_str(&a).unwrap();
        let iters = v["iterations"].as_u64().unwrap() as usize;
        assert!((1..=60).contains(&iters));
        assert_eq!(v["progress"].as_array().unwrap().len(), iters);
        assert_eq!(v["fit"].as_array().unwrap().len(), v["target"].as_array().unwrap().len());
    }
}

#[test]
fn invert_rejects_bad_arguments() {
    assert!(invert_json(1.0, 8.0, "newton", 0, 10).is_err());
    assert!(invert_json(1.0, 8.0, "grad", 0, 0).is_err());
    assert!(invert_json(1.0, 8.0, "grad", 0, 100_000).is_err());
}

#[test]
fn projection_formats_duration() {
    let v = parse(projection_json(63_350.0, 1000));
    assert_eq!(v["human"], "733 days");
    assert!(projection_json(-1.0, 3).is_err());
}
