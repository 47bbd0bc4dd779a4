use mmsbm_wasm_demo::{synthesize_ratings, Session};

#[test]
fn synthesize_fit_predict() {
    let text = synthesize_ratings(40, 30, 2, 8, 3).unwrap();
    assert_eq!(text.lines().count(), 320);
    assert_eq!(text, synthesize_ratings(40, 30, 2, 8, 3).unwrap());

    let session = Session::fit(&text, 2, 3, 1, 30).unwrap();
    let summary: serde_json::Value = serde_json::from_str(&session.summary_json()).unwrap();
    assert_eq!(summary["n_ratings"], 320);
    assert_eq!(summary["runs"].as_array().unwrap().len(), 3);
    let trace = summary["runs"][0]["log_likelihood_trace"].as_array().unwrap();
    assert!(trace.last().unwrap().as_f64().unwrap() >= trace[0].as_f64().unwrap());

    let line = text.lines().next().unwrap();
    let mut f = line.split('\t');
    let (user, item) = (f.next().unwrap(), f.next().unwrap());
    let known = session.predict(user, item);
    assert!(!known.cold_user && !known.cold_item);
    assert!((known.probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    assert_eq!(known.labels, ["1", "2", "3", "4", "5"]);

    let cold = session.predict("stranger", item);
    assert!(cold.cold_user && !cold.cold_item);
    let membership = session.user_membership("stranger");
    assert!((membership.iter().sum::<f64>() - 1.0).abs() < 1e-9);
}

#[test]
fn bad_input_is_an_error() {
    assert!(Session::fit("", 2, 1, 0, 10).is_err());
    assert!(Session::fit("a b 7\n", 2, 1, 0, 10).is_err());
    assert!(Session::fit("a b 3\n", 0, 1, 0, 10).is_err());
    assert!(synthesize_ratings(10, 5, 2, 8, 0).is_err());
}
