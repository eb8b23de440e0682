use std::process::{Command, Output};

fn confsym(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_confsym"))
        .args(args)
        .current_dir(concat!(env!("CARGO_MANIFEST_DIR"), "/../.."))
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn curvature_of_flat_space_is_zero() {
    let o = confsym(&["curvature", "fixtures/flat3.geo", "--tensor", "riemann"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("all components zero"));
}

#[test]
fn weyl_vanishes_in_three_dimensions() {
    let o = confsym(&["curvature", "fixtures/stackel.geo", "--tensor", "weyl"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("all components zero"));
}

#[test]
fn cotton_components_are_listed() {
    let o = confsym(&["curvature", "fixtures/dipirro.geo", "--tensor", "cotton", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["schema"], "confsym-report/1");
    assert!(!v["components"].as_array().unwrap().is_empty());
}

#[test]
fn classify_dipirro_with_hatted_metric() {
    let o = confsym(&[
        "classify",
        "fixtures/dipirro.geo",
        "--symbol",
        "K",
        "--hat-metric",
        "1/(2*(gamma+c))",
        "--json",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["verdict"], "symmetry");
    assert_eq!(v["operator_residual"], "0");
    assert!(v["potential"].is_string());
    assert_eq!(v["lm_divergence_coeff"], "1/2");
}

#[test]
fn classify_stackel_is_obstructed() {
    let o = confsym(&["classify", "fixtures/stackel.geo", "--symbol", "K"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.contains("verdict: obstructed"));
    assert!(s.contains("d(Obs^flat)[2,3]"));
}

#[test]
fn classify_flat_constant_tensor() {
    let o = confsym(&["classify", "fixtures/flat3.geo", "--symbol", "K12"]);
    assert!(stdout(&o).contains("verdict: symmetry"));
}

#[test]
fn obs_command_prints_the_form() {
    let o = confsym(&["obs", "fixtures/minkowski_reduction.geo", "--symbol", "K"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("d(Obs^flat)[1,3]"));
}

#[test]
fn input_errors_exit_with_two() {
    assert_eq!(confsym(&["curvature", "no/such.geo", "--tensor", "ricci"]).status.code(), Some(2));
    assert_eq!(confsym(&["classify", "fixtures/flat3.geo", "--symbol", "Nope"]).status.code(), Some(2));
    assert_eq!(confsym(&["classify", "fixtures/flat3.geo", "--symbol", "Xrot"]).status.code(), Some(2));
    assert_eq!(confsym(&["paper-suite", "--filter", "("]).status.code(), Some(2));
    assert_eq!(confsym(&["curvature"]).status.code(), Some(2));
}

#[test]
fn parse_errors_carry_a_location() {
    let dir = std::env::temp_dir().join(format!("confsym-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let f = dir.join("bad.geo");
    std::fs::write(&f, "manifold { dim = 2; coords = [x, y]; }\nmetric g { g[1,1] = 1 +; }\n").unwrap();
    let o = confsym(&["curvature", f.to_str().unwrap(), "--tensor", "ricci"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad.geo:"));
}

#[test]
fn suite_filter_selects_checks() {
    let o = confsym(&["paper-suite", "--filter", "^stackel/", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let names: Vec<&str> = v["checks"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    assert!(!names.is_empty());
    assert!(names.iter().all(|n| n.starts_with("stackel/")));
    assert!(v["checks"][0].get("wall_ms").is_none());
}

#[test]
fn suite_json_is_reproducible() {
    let args = ["paper-suite", "--filter", "^(lemma|beta)/", "--json"];
    let a = confsym(&args);
    let b = confsym(&args);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn numeric_suite_agrees_with_symbolic() {
    let filter = "^(stackel|minkowski|lemma|transform)/";
    let sym = confsym(&["paper-suite", "--filter", filter, "--json"]);
    let num = confsym(&["paper-suite", "--filter", filter, "--json", "--numeric", "--tol", "1e-8", "--seed", "7"]);
    assert_eq!(num.status.code(), Some(0));
    let s: serde_json::Value = serde_json::from_slice(&sym.stdout).unwrap();
    let n: serde_json::Value = serde_json::from_slice(&num.stdout).unwrap();
    let statuses = |v: &serde_json::Value| -> Vec<(String, String)> {
        v["checks"]
            .as_array()
            .unwrap()
            .iter()
            .map(|c| (c["name"].as_str().unwrap().to_string(), c["status"].as_str().unwrap().to_string()))
            .collect()
    };
    assert_eq!(statuses(&s), statuses(&n));
}
