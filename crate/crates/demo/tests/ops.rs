use qpratio_demo::{boolfn_json, level_graph_json, sandwich_json};
use serde_json::Value;

fn parse(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

#[test]
fn sandwich_is_ordered() {
    for (family, size) in [("random", 8), ("star", 6), ("bipartite-gap", 9)] {
        let v = parse(&sandwich_json(family, size, 3).unwrap());
        let get = |k: &str| v[k].as_f64().unwrap();
        assert!(get("trivial") <= get("rounded"), "{family}: {v}");
        if let Some(opt) = v["exact"].as_f64() {
            assert!(get("rounded") <= opt);
            assert!(opt <= get("eig") + 1e-9);
        }
        assert!(get("sdp") <= get("eig") + 1e-6, "{family}: {v}");
        assert_eq!(
            v["assignment"].as_array().unwrap().len(),
            v["n"].as_u64().unwrap() as usize
        );
    }
}

#[test]
fn sandwich_rejects_large_and_unknown() {
    assert!(sandwich_json("random", 200, 0).is_err());
    assert!(sandwich_json("nope", 5, 0).is_err());
}

#[test]
fn level_graph_witness_is_positive() {
    let v = parse(&level_graph_json(4, &[], &[1.0, 0.5, 0.25, 0.125]).unwrap());
    assert_eq!(v["levels"], 8);
    assert!(v["ratio"].as_f64().unwrap() > 0.0, "{v}");
    assert_eq!(v["gain_check"]["holds"], true);
    assert!(level_graph_json(1, &[], &[]).is_err());
}

#[test]
fn boolfn_dictator_spectrum() {
    let v = parse(&boolfn_json(&[1.0, -1.0, 1.0, -1.0]).unwrap());
    assert_eq!(v["R"], 2);
    assert_eq!(v["linear"][0].as_f64().unwrap(), 1.0);
    assert_eq!(v["nonlinear_sq"].as_f64().unwrap(), 0.0);
    assert_eq!(v["linear_l1"]["holds"], true);
    assert!(boolfn_json(&[0.0, 0.0, 0.0]).is_err());
}
