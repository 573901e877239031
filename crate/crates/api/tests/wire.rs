use eliza_api::*;
use serde_json::json;

#[test]
fn create_session_defaults() {
    let req: CreateSession = serde_json::from_value(json!({})).unwrap();
    assert_eq!(req, CreateSession::default());
    assert_eq!(req.mechanism_config, MechanismConfig::faithful());

    let req: CreateSession = serde_json::from_value(json!({
        "script_id": "parity",
        "backend": "construction",
        "mechanism_config": {"copying": {"kind": "induction_head", "n": 3}, "cycling": "modular_prefix_sum"}
    }))
    .unwrap();
    assert_eq!(req.backend, Backend::Construction);
    assert_eq!(req.mechanism_config.copying.to_string(), "induction:3");
    assert_eq!(req.mechanism_config.memory, MechanismConfig::faithful().memory);
}

#[test]
fn tokens_are_plain_strings() {
    let msg: PostMessage = serde_json::from_value(json!({"tokens": ["a", "b"]})).unwrap();
    assert_eq!(serde_json::to_value(&msg).unwrap(), json!({"tokens": ["a", "b"]}));
    assert!(serde_json::from_value::<PostMessage>(json!({"tokens": "a b"})).is_err());
}

#[test]
fn backend_names() {
    for b in [Backend::Engine, Backend::Construction] {
        assert_eq!(b.to_string().parse::<Backend>().unwrap(), b);
        assert_eq!(serde_json::to_value(b).unwrap(), json!(b.to_string()));
    }
    assert!("model".parse::<Backend>().is_err());
}

#[test]
fn divergence_omits_missing_error() {
    let d = Divergence { engine_reply: vec![Word::new("a")], construction_reply: None, construction_error: None, equal: false };
    let v = serde_json::to_value(&d).unwrap();
    assert!(v.get("construction_error").is_none());
    assert_eq!(v["construction_reply"], json!(null));
}
