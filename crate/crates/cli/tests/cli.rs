use std::process::{Command, Output};

use plaquette::gibbs::{multispin, BoundaryCondition, GibbsSpec};
use plaquette::{Model, Region, Site};

fn plaq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_plaq")).args(args).output().expect("run plaq")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn multispin_of_one_plaquette() {
    let o = plaq(&["multispin", "--model", "spm", "--sites", "0,0 1,0 0,1 1,1", "--beta", "2", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["value"].as_f64().unwrap() - 1f64.tanh()).abs() < 1e-15);
    assert_eq!(v["n"], 1);
}

#[test]
fn plus_boundary_agrees_between_methods() {
    let run = |extra: &[&str]| {
        let mut args = vec!["multispin", "--model", "spm", "--sites", "0,0", "--beta", "1.5", "--plus", "1", "--json"];
        args.extend_from_slice(extra);
        let o = plaq(&args);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        serde_json::from_slice::<serde_json::Value>(&o.stdout).unwrap()["value"].as_f64().unwrap()
    };
    assert!((run(&[]) - run(&["--enumerate"])).abs() < 1e-12);
}

#[test]
fn decompose_triangle() {
    let o = plaq(&["decompose", "--model", "tpm", "--sites", "0,0;0,4;4,4"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("n = 9\n"));
    let o = plaq(&["decompose", "--model", "spm", "--sites", "[[0,0],[1,0]]", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["equivalent"], false);
}

#[test]
fn magnetization_scan_is_csv() {
    let o = plaq(&["magnetization", "--beta", "1", "--scan", "--ells", "1..=4"]);
    assert_eq!(o.status.code(), Some(0));
    let mut r = csv::Reader::from_reader(o.stdout.as_slice());
    assert_eq!(r.headers().unwrap(), vec!["beta", "ell", "value"]);
    let values: Vec<f64> = r.records().map(|x| x.unwrap()[2].parse().unwrap()).collect();
    assert_eq!(values.len(), 4);
    assert!(values.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn lengths_csv_and_plotdata() {
    let path = std::env::temp_dir().join(format!("plaq-plot-{}.json", std::process::id()));
    let o = plaq(&["lengths", "--model", "spm", "--from", "6", "--to", "20", "--emit-plotdata", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let mut r = csv::Reader::from_reader(o.stdout.as_slice());
    assert_eq!(r.headers().unwrap(), vec!["beta", "kind", "lo", "hi", "flag"]);
    assert_eq!(r.records().count(), 2 * 281);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    std::fs::remove_file(&path).ok();
    assert_eq!(v["series"].as_array().unwrap().len(), 2 * 281);
    for f in v["fits"].as_array().unwrap() {
        assert!((f["slope"].as_f64().unwrap() - 0.5).abs() < 0.02);
    }
}

#[test]
fn renorm_check_passes() {
    let o = plaq(&["renorm-check", "--model", "spm", "--ell", "2", "--betas", "0.7"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let o = plaq(&["renorm-check", "--model", "tpm", "--ell", "3"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn cycles_audit_json() {
    let o = plaq(&["cycles-audit", "--max-n", "3", "--max-economic", "2", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["passed"], true);
    // tpm ranks for n = 0..3 and spm ranks for n = 1..3
    assert_eq!(v["bases"].as_array().unwrap().len(), 7);
    assert_eq!(v["bound_checks"].as_array().unwrap().len(), 7 * 3);
    assert_eq!(v["economic"].as_array().unwrap().len(), 2);
}

#[test]
fn mcmc_validate_reports_failures() {
    let dir = std::env::temp_dir().join(format!("plaq-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let config = |target: f64| {
        format!(
            r#"{{"schema": 1,
                "chain": {{"model": "spm", "region": {{"kind": "square", "ell": 2}}, "bc": {{"kind": "all_plus"}},
                           "beta": 0.5, "seed": 3, "sweeps": 4000, "burn_in": 200}},
                "observables": [{{"kind": "multispin", "sites": [[1, 1], [2, 1], [1, 2], [2, 2]]}}],
                "targets": [{target}]}}"#
        )
    };
    let spec = GibbsSpec::meeting(Model::Spm, Region::square(2), 0.5, BoundaryCondition::AllPlus);
    let exact = multispin(&spec, &[Site::new(1, 1), Site::new(2, 1), Site::new(1, 2), Site::new(2, 2)]).unwrap();
    let good = dir.join("good.json");
    let bad = dir.join("bad.json");
    std::fs::write(&good, config(exact)).unwrap();
    std::fs::write(&bad, config(-0.5)).unwrap();
    let series = dir.join("series.csv");
    let o = plaq(&["mcmc-validate", good.to_str().unwrap(), "--series", series.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), String::from_utf8_lossy(&o.stderr));
    let rows = std::fs::read_to_string(&series).unwrap();
    assert_eq!(rows.lines().next(), Some("sweep,obs0"));
    assert_eq!(rows.lines().count(), 4001);
    let o = plaq(&["mcmc-validate", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    std::fs::write(&bad, config(0.0).replace("\"schema\": 1", "\"schema\": 1, \"bogus\": 0")).unwrap();
    let o = plaq(&["mcmc-validate", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn seeds_are_mandatory() {
    assert_eq!(plaq(&["verify-all", "--quick"]).status.code(), Some(2));
    let o = plaq(&["screening", "--model", "spm", "--n", "1", "--beta", "1", "--family", "declared:2"]);
    assert_eq!(o.status.code(), Some(2));
    let o = plaq(&["lengths", "--model", "spm", "--sampled", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_single_criterion() {
    let o = plaq(&["verify-all", "--quick", "--seed", "2024", "--criterion", "1"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("PASS [1]"));
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(plaq(&["multispin", "--model", "hex", "--sites", "0,0", "--beta", "1"]).status.code(), Some(2));
    assert_eq!(plaq(&["decompose", "--model", "spm", "--sites", "0;0"]).status.code(), Some(2));
}
