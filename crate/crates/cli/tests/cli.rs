use std::fs;
use std::process::{Command, Output};

fn solvorder(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_solvorder")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> serde_json::Value {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_str(&stdout(o)).unwrap()
}

#[test]
fn honest_two_message_campaign() {
    let r =
        json(&solvorder(&["run", "--group", "cyclic:12", "--protocol", "2msg", "--primes", "2,3", "--trials", "100"]));
    assert_eq!(r["counts"]["correct_order"], 100);
    assert_eq!(r["group_order"], "12");
    assert_eq!(r["prover"], "honest");
}

#[test]
fn honest_three_message_s4() {
    let r = json(&solvorder(&["run", "--group", "perm:4:(1 2),(1 2 3 4)", "--protocol", "3msg", "--trials", "50"]));
    assert_eq!(r["counts"]["correct_order"], 50);
    assert_eq!(r["group_order"], "24");
}

#[test]
fn guess_inflate_campaign_rates() {
    let r = json(&solvorder(&[
        "run",
        "--group",
        "cyclic:12",
        "--protocol",
        "2msg",
        "--adversary",
        "guess_inflate",
        "--primes",
        "2,3",
        "--trials",
        "2000",
        "--seed",
        "7",
    ]));
    let wrong = r["rates"]["wrong_order"]["rate"].as_f64().unwrap();
    assert!((0.42..=0.54).contains(&wrong), "{wrong}");
    let low = r["rates"]["wrong_order"]["low"].as_f64().unwrap();
    let high = r["rates"]["wrong_order"]["high"].as_f64().unwrap();
    assert!(low < wrong && wrong < high);
}

#[test]
fn reports_are_byte_identical_and_match_the_log() {
    let dir = tempfile::tempdir().unwrap();
    let out = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    let args = |report: &str, log: &str| {
        vec![
            "run".to_string(),
            "--group".into(),
            "perm:3:(1 2),(1 2 3)@seed=3".into(),
            "--protocol".into(),
            "3msg".into(),
            "--prover".into(),
            "random_bits".into(),
            "--trials".into(),
            "60".into(),
            "--repetitions".into(),
            "2".into(),
            "--seed".into(),
            "99".into(),
            "--out".into(),
            out(report),
            "--transcripts".into(),
            out(log),
        ]
    };
    for (report, log) in [("a.json", "a.ndjson"), ("b.json", "b.ndjson")] {
        let a: Vec<String> = args(report, log);
        let refs: Vec<&str> = a.iter().map(String::as_str).collect();
        assert!(solvorder(&refs).status.success());
    }
    let a = fs::read(out("a.json")).unwrap();
    assert_eq!(a, fs::read(out("b.json")).unwrap());
    assert_eq!(fs::read(out("a.ndjson")).unwrap(), fs::read(out("b.ndjson")).unwrap());

    let report: serde_json::Value = serde_json::from_slice(&a).unwrap();
    let log = fs::read_to_string(out("a.ndjson")).unwrap();
    let mut counts = [0u64; 3];
    for line in log.lines() {
        let rec: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(rec["transcripts"].as_array().unwrap().len(), 2);
        let i = ["correct_order", "wrong_order", "abort"].iter().position(|c| rec["class"] == *c).unwrap();
        counts[i] += 1;
    }
    assert_eq!(counts.iter().sum::<u64>(), 60);
    for (i, c) in ["correct_order", "wrong_order", "abort"].iter().enumerate() {
        assert_eq!(report["counts"][c], counts[i]);
        let rate = report["rates"][c]["rate"].as_f64().unwrap();
        assert!((rate - counts[i] as f64 / 60.0).abs() < 1e-12);
    }
}

#[test]
fn timing_is_opt_in() {
    let base = ["run", "--group", "cyclic:12", "--protocol", "3msg", "--trials", "5"];
    assert!(json(&solvorder(&base)).get("timing").is_none());
    let mut with = base.to_vec();
    with.push("--timing");
    assert!(json(&solvorder(&with))["timing"]["total_ms"].as_f64().is_some());
}

#[test]
fn fixtures_listing() {
    let o = solvorder(&["fixtures"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("cyclic:12"));
    assert!(text.contains("perm:4:(1 2),(1 2 3 4)"));
    let all = json(&solvorder(&["fixtures", "--json"]));
    let find = |spec: &str| all.as_array().unwrap().iter().find(|f| f["spec"] == spec).unwrap().clone();
    assert_eq!(find("cyclic:12")["order"], 12);
    assert_eq!(find("perm:4:(1 2),(1 2 3 4)")["order"], 24);
    assert_eq!(find("direct:cyclic:3,cyclic:9")["order"], 27);
    assert_eq!(find("perm:5:(1 2 3),(1 2 3 4 5)")["solvable"], false);
}

#[test]
fn list_adversaries() {
    let o = solvorder(&["--list-adversaries"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for name in ["guess_inflate", "deflate", "garbage_commitment", "random_bits", "order_forger"] {
        assert!(text.contains(name), "{name}");
    }
}

#[test]
fn sampler_test_report() {
    let r = json(&solvorder(&[
        "sampler-test",
        "--group",
        "perm:3:(1 2),(1 2 3)",
        "--mode",
        "subproduct",
        "--epsilon",
        "0.00390625",
        "--draws",
        "100000",
        "--seed",
        "1",
    ]));
    assert!(r["tv_distance"].as_f64().unwrap() <= 0.05);
    assert_eq!(r["draws"], 100000);
    assert!(r["queries"].as_u64().unwrap() > 0);
}

#[test]
fn pcgs_output() {
    let r = json(&solvorder(&["pcgs", "--group", "cyclic:12", "--primes", "2,3"]));
    assert_eq!(r["order"], 12);
    let refined = r["refined"].as_array().unwrap();
    assert_eq!(refined.len(), 8);
    let mut m: Vec<u64> = refined.iter().map(|e| e["quotient_order"].as_u64().unwrap()).filter(|&x| x > 1).collect();
    m.sort_unstable();
    assert_eq!(m, vec![2, 2, 3]);
    assert!(refined.iter().all(|e| e["prime"].as_u64().is_some()));
}

#[test]
fn usage_and_validation_errors_exit_nonzero() {
    let cases: &[&[&str]] = &[
        &[],
        &["run", "--group", "cyclic:12", "--protocol", "2msg"],
        &["run", "--group", "cyclic:12", "--protocol", "3msg", "--primes", "2,3"],
        &["run", "--group", "cyclic:0", "--protocol", "3msg"],
        &["run", "--group", "cyclic:12", "--protocol", "5msg"],
        &["run", "--group", "cyclic:12", "--protocol", "3msg", "--prover", "nobody"],
        &["run", "--group", "cyclic:12", "--protocol", "3msg", "--adversary", "honest"],
        &["run", "--group", "cyclic:12", "--protocol", "3msg", "--trials", "0"],
        &["run", "--group", "perm:3:(1 4)", "--protocol", "3msg"],
        &["sampler-test", "--group", "cyclic:12", "--epsilon", "2"],
        &["pcgs", "--group", "cyclic:12", "--primes", "2"],
        &["pcgs", "--group", "perm:5:(1 2 3),(1 2 3 4 5)"],
    ];
    for args in cases {
        let o = solvorder(args);
        assert!(!o.status.success(), "{args:?} succeeded");
        assert!(!o.stderr.is_empty(), "{args:?} printed no diagnostic");
    }
}

#[test]
fn non_solvable_honest_run_reports_aborts() {
    let r = json(&solvorder(&["run", "--group", "perm:5:(1 2 3),(1 2 3 4 5)", "--protocol", "3msg", "--trials", "4"]));
    assert_eq!(r["counts"]["abort"], 4);
}
