use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bibalance"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_str(stdout(o).trim()).unwrap_or_else(|e| panic!("{e}: {}", stdout(o)))
}

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli-tests");
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn play(stdin: &str, args: &[&str]) -> Output {
    let mut child = bin()
        .arg("play")
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(stdin.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

#[test]
fn simulate_optimal_greedy() {
    let o = run(&["simulate", "--house", "optimal", "--gambler", "greedy", "--T", "10"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    let want = 10.0 + 10f64.sqrt();
    assert!((v["loss"].as_f64().unwrap() - want).abs() < 1e-9 * want);
    assert_eq!(v["decisive_only"], true);
}

#[test]
fn simulate_kt_replay_gives_2t() {
    let path = scratch("zeros_then_one.json");
    std::fs::write(
        &path,
        r#"{"T":8,"gamma":1.0,"rounds":[[0.5,0],[0.5,0],[0.5,0],[0.5,0],[0.5,0],[0.5,0],[0.5,0],[0.5,1]],"loss":[14,2]}"#,
    )
    .unwrap();
    let g = format!("replay:{}", path.display());
    let o = run(&["simulate", "--house", "kt", "--gambler", &g, "--T", "8"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!((json(&o)["loss"].as_f64().unwrap() - 16.0).abs() < 1e-9);
}

#[test]
fn proportional_gambler() {
    let o = run(&[
        "simulate",
        "--house",
        "expected",
        "--gambler",
        "proportional",
        "--T",
        "10",
        "--gamma",
        "1.0",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert!(v["gain"].as_f64().unwrap().abs() < 1e-9);
    assert!((v["loss"].as_f64().unwrap() - 10.0).abs() < 1e-9);

    // the decisive-only house refuses the first continuous bet
    let o = run(&[
        "simulate",
        "--house",
        "optimal",
        "--gambler",
        "proportional",
        "--T",
        "10",
    ]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        &["simulate", "--house", "nope", "--gambler", "greedy", "--T", "3"][..],
        &["simulate", "--house", "optimal", "--gambler", "nope", "--T", "3"],
        &["simulate", "--house", "optimal", "--gambler", "greedy", "--T", "0"],
        &[
            "simulate",
            "--house",
            "optimal",
            "--gambler",
            "greedy",
            "--T",
            "3",
            "--gamma",
            "0.5",
        ],
        &["simulate", "--house", "blackwell", "--gambler", "greedy", "--T", "8"],
        &["verify", "no-such-check"],
        &["sweep"],
    ] {
        assert_eq!(run(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn transcript_outputs() {
    let csv = scratch("t.csv");
    let js = scratch("t.json");
    let c = csv.to_str().unwrap();
    let j = js.to_str().unwrap();
    let base = ["simulate", "--house", "optimal", "--gambler", "constant:1", "--T", "2"];
    assert!(run(&[&base[..], &["--out", c, "--format", "csv"]].concat())
        .status
        .success());
    assert!(run(&[&base[..], &["--out", j]].concat()).status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,r,q,l0_cum,l1_cum"));
    assert_eq!(lines.next(), Some("1,0.5,1,0,2"));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&js).unwrap()).unwrap();
    assert_eq!(v["T"], 2);
    assert!((v["loss"][1].as_f64().unwrap() - (2.0 + 2f64.sqrt())).abs() < 1e-12);
}

#[test]
fn blackwell_trace_header() {
    let p = scratch("trace.csv");
    let o = run(&[
        "simulate",
        "--house",
        "blackwell",
        "--gambler",
        "greedy",
        "--T",
        "64",
        "--bw-trace",
        p.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&p).unwrap();
    assert_eq!(text.lines().next(), Some("t,phi1,phi2,region,r,bound"));
    assert_eq!(text.lines().count(), 65);
}

#[test]
fn sweep_values_and_header() {
    let o = run(&["sweep", "--T", "4,16,64", "--house", "optimal,uniform"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("T,house,worst_loss,normalized_loss,bound"));
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    let norm = |t: &str, h: &str| -> f64 {
        rows.iter().find(|r| r[0] == t && r[1] == h).unwrap()[3]
            .parse()
            .unwrap()
    };
    for (t, want) in [("4", 1.5), ("16", 1.25), ("64", 1.125)] {
        assert!((norm(t, "optimal") - want).abs() < 1e-9);
        assert_eq!(norm(t, "uniform"), 2.0);
    }
}

#[test]
fn sweep_blackwell_within_bound() {
    let o = run(&["sweep", "--T", "64,512", "--house", "blackwell"]);
    assert!(o.status.success());
    for line in stdout(&o).lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let norm: f64 = f[3].parse().unwrap();
        let bound: f64 = f[4].parse().unwrap();
        assert!(norm <= bound, "{line}");
    }
    let o = run(&["sweep", "--T", "8", "--house", "blackwell"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("skipping"));
}

#[test]
fn sweep_is_independent_of_thread_count() {
    let args = [
        "sweep",
        "--T",
        "8,40",
        "--house",
        "optimal,mc,kt",
        "--mc-n",
        "64",
        "--seed",
        "3",
    ];
    let a = bin().args(args).env("BIBALANCE_THREADS", "1").output().unwrap();
    let b = bin().args(args).env("BIBALANCE_THREADS", "3").output().unwrap();
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn verify_checks() {
    let o = run(&["verify", "optimal-loss", "--T", "12"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["check"], "optimal-loss");
    assert_eq!(v["T"], 12);
    assert_eq!(v["pass"], true);
    assert!(v["max_abs_err"].is_number());

    let o = run(&["verify", "grid-minimax", "--T", "2", "--res", "0.001"]);
    assert_eq!(o.status.code(), Some(0));
    assert!((json(&o)["value"].as_f64().unwrap() - (2.0 + 2f64.sqrt())).abs() < 1e-2);

    for check in ["blackwell-partition", "equalizer", "subtree-balance"] {
        assert_eq!(run(&["verify", check]).status.code(), Some(0), "{check}");
    }
    // out-of-range horizon is a usage error, not a failed check
    assert_eq!(run(&["verify", "optimal-loss", "--T", "30"]).status.code(), Some(2));
}

#[test]
fn play_settlement() {
    let o = play("1\n1\n", &["--house", "optimal", "--T", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("if 1 wins: exposure 3.414213562"), "{out}");

    // q = r each round against the continuous house
    let o = play("0.5\n0.5\n0.5\n", &["--house", "expected", "--T", "3"]);
    assert!(stdout(&o).contains("house loss 3.000000000"), "{}", stdout(&o));
}

#[test]
fn play_reprompts_and_aborts() {
    let o = play("7\n", &["--house", "optimal", "--T", "2"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stdout(&o).contains("try again"));
}

#[test]
fn compare_header() {
    let o = run(&[
        "compare",
        "--house",
        "optimal,uniform",
        "--gambler",
        "greedy",
        "--T",
        "5",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().next(), Some("house,T,gamma,loss,normalized_loss,gain"));
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn fixed_seed_runs_are_byte_identical() {
    let args = [
        "simulate",
        "--house",
        "mc",
        "--gambler",
        "random:5",
        "--T",
        "12",
        "--mc-n",
        "200",
        "--seed",
        "9",
    ];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}
