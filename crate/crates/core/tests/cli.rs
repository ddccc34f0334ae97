use std::process::{Command, Output};

fn qspec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qspec")).args(args).output().expect("binary runs")
}

fn code(args: &[&str]) -> i32 {
    qspec(args).status.code().expect("exit code")
}

fn stdout(args: &[&str]) -> String {
    let out = qspec(args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn exit_codes() {
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["bogus"]), 1);
    assert_eq!(code(&["bands", "--cf", "1*"]), 1);
    assert_eq!(code(&["holder", "--cf", "1*", "--lambda", "10", "--depth", "4"]), 1);
    assert_eq!(code(&["bands", "--cf", "1,x", "--lambda", "30", "--depth", "3"]), 1);
    assert_eq!(code(&["bands", "--cf", "1*", "--lambda", "3", "--depth", "3"]), 1);
    assert_eq!(code(&["bands", "--cf", "1,1", "--lambda", "30", "--depth", "6"]), 1);
    assert_eq!(code(&["dos", "--cf", "1*", "--lambda", "30", "--depth", "4", "--interval", "3:1"]), 1);
    assert_eq!(code(&["potential", "--cf", "1*", "--lambda", "30", "--n", "0"]), 1);
}

#[test]
fn computation_failure_exits_two() {
    // a finite expansion runs out of convergents to settle the floors
    let out = qspec(&["potential", "--cf", "2", "--lambda", "30", "--n", "5"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!out.stderr.is_empty());
}

#[test]
fn bands_output_is_deterministic() {
    let args = ["bands", "--cf", "1*", "--lambda", "30", "--depth", "6", "--format", "json"];
    let a = stdout(&args);
    assert_eq!(a, stdout(&args));
    let v: serde_json::Value = serde_json::from_str(&a).unwrap();
    assert_eq!(v["levels"].as_array().unwrap().len(), 7);
    assert_eq!(v["levels"][1].as_array().unwrap().len(), 2);
    assert!(v["lambda"].is_string());
    let lo = v["levels"][0][1]["lo"].as_str().unwrap();
    assert!(lo.starts_with("28.000000000000000000000000000000000000"), "{lo}");
}

#[test]
fn csv_headers() {
    let bands = stdout(&["bands", "--cf", "2*", "--lambda", "30", "--depth", "2", "--format", "csv"]);
    assert_eq!(bands.lines().next(), Some("level,ordinal,lo,hi,kind,parent,type_index"));
    assert_eq!(bands.lines().count(), 1 + 2 + 4 + 10);
    let cf = stdout(&["cf", "--cf", "1*", "--depth", "5", "--format", "csv"]);
    assert_eq!(cf, "k,a_k,p_k,q_k\n1,1,1,1\n2,1,1,2\n3,1,2,3\n4,1,3,5\n5,1,5,8\n");
    let dos = stdout(&["dos", "--cf", "1*", "--lambda", "30", "--depth", "3", "--format", "csv"]);
    assert_eq!(dos.lines().next(), Some("x,N"));
    assert_eq!(dos.lines().count(), 1 + 2 * 3);
}

#[test]
fn potential_values() {
    let out = stdout(&["potential", "--cf", "1*", "--lambda", "30", "--n", "8", "--format", "csv"]);
    let v: Vec<&str> = out.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(v, ["30", "0", "30", "30", "0", "30", "0", "30"]);
}

#[test]
fn dos_with_intervals_and_out_file() {
    let dir = std::env::temp_dir().join(format!("qspec-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("dos.json");
    let p = path.to_str().unwrap();
    let out = qspec(&["dos", "--cf", "1*", "--lambda", "30", "--depth", "5", "--interval", "-3:3", "--interval", "27:33", "--n", "89", "--out", p]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["q"], 8);
    assert_eq!(v["comparison"]["n"], 89);
    assert_eq!(v["comparison"]["intervals"].as_array().unwrap().len(), 2);
    let total: f64 = ["0", "1"].iter().map(|i| v["comparison"]["intervals"][i.parse::<usize>().unwrap()]["band_mass"].as_str().unwrap().parse::<f64>().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn holder_sweep_and_csv() {
    let out = stdout(&["holder", "--cf", "2*", "--lambdas", "30,100", "--depth", "4"]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["reports"].as_array().unwrap().len(), 2);
    assert_eq!(v["corollary"]["rows"].as_array().unwrap().len(), 2);
    let csv = stdout(&["holder", "--cf", "1*", "--lambda", "30", "--depth", "4", "--format", "csv"]);
    assert_eq!(csv.lines().next(), Some("lambda,level,index,kind,length,mass,exponent"));
}

#[test]
fn verify_passes_for_the_figure_configuration() {
    let out = qspec(&["verify", "--cf", "3*", "--lambda", "30", "--depth", "6", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("transition counts,true,true")));
}
