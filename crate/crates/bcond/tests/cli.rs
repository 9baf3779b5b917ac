use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bcond::cli::exit;
use bcond::format::{parse_network, serialize_network};
use bcond_core::fixtures::{chain, diamond};
use bcond_core::generate::{generate_random, GeneratorParams};
use tempfile::TempDir;

fn bcond(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bcond"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

fn diamond_files(dir: &TempDir) -> (String, String) {
    let net = write(dir, "diamond.json", &serialize_network(&diamond()));
    let ev = write(
        dir,
        "ev.json",
        r#"{"observations":[{"at_step":0,"set":{"D":"t"}}]}"#,
    );
    (net, ev)
}

/// `name: s0 x s1 y` or `name: s0 [l, u] ...` into a list of numbers.
fn numbers(line: &str) -> Vec<f64> {
    line.split(|c: char| c.is_whitespace() || c == '[' || c == ']' || c == ',')
        .filter_map(|t| t.parse().ok())
        .collect()
}

fn line<'a>(text: &'a str, prefix: &str) -> &'a str {
    text.lines()
        .find(|l| l.starts_with(prefix))
        .unwrap_or_else(|| panic!("no `{prefix}` line in\n{text}"))
}

#[test]
fn validate_exit_codes() {
    let dir = TempDir::new().unwrap();
    let (net, _) = diamond_files(&dir);
    let ok = bcond(&["validate", &net]);
    assert_eq!(ok.status.code(), Some(exit::OK));
    assert!(stdout(&ok).contains("4 variables, 4 arcs, multiply connected"));

    let cyclic = write(
        &dir,
        "cyclic.json",
        r#"{"variables":[{"name":"P","states":["a","b"]},{"name":"Q","states":["a","b"]}],
            "tables":[{"child":"P","parents":["Q"],"rows":[[0.5,0.5],[0.5,0.5]]},
                      {"child":"Q","parents":["P"],"rows":[[0.5,0.5],[0.5,0.5]]}]}"#,
    );
    let bad = bcond(&["validate", &cyclic]);
    assert_eq!(bad.status.code(), Some(exit::INVALID));
    assert!(
        stdout(&bad).contains("cycle: P -> Q -> P"),
        "{}",
        stdout(&bad)
    );

    let missing = dir.path().join("missing.json").display().to_string();
    assert_eq!(bcond(&["validate", &missing]).status.code(), Some(exit::IO));

    let broken = write(&dir, "broken.json", "{\"variables\": [");
    let b = bcond(&["validate", &broken]);
    assert_eq!(b.status.code(), Some(exit::INVALID));
    assert!(String::from_utf8_lossy(&b.stderr).contains("line 1"));
}

#[test]
fn cutset_output() {
    let dir = TempDir::new().unwrap();
    let (net, _) = diamond_files(&dir);
    assert_eq!(
        stdout(&bcond(&["cutset", &net])),
        "cutset: [A] instances: 2\n"
    );
    let poly = write(&dir, "chain.json", &serialize_network(&chain()));
    assert_eq!(
        stdout(&bcond(&["cutset", &poly])),
        "cutset: [] instances: 1\n"
    );
    let sink = bcond(&["cutset", &net, "--members", "D"]);
    assert_eq!(sink.status.code(), Some(exit::INVALID));
    let both = bcond(&["cutset", &net, "--members", "A,B"]);
    assert_eq!(stdout(&both), "cutset: [A, B] instances: 4\n");
}

#[test]
fn icu_scale_cutset_regression() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("icu.json").display().to_string();
    let g = bcond(&[
        "generate",
        "--nodes",
        "37",
        "--max-parents",
        "4",
        "--max-states",
        "4",
        "--loops",
        "5",
        "--seed",
        "1",
        "-o",
        &path,
    ]);
    assert!(g.status.success());
    assert_eq!(
        stdout(&bcond(&["validate", &path])),
        "valid: 37 variables, 41 arcs, multiply connected\n"
    );
    assert_eq!(
        stdout(&bcond(&["cutset", &path])),
        "cutset: [X00, X01] instances: 4\n"
    );
}

#[test]
fn oracle_mode_prints_posterior_without_trace() {
    let dir = TempDir::new().unwrap();
    let (net, ev) = diamond_files(&dir);
    let trace = dir.path().join("t.csv");
    let o = bcond(&[
        "run",
        "--network",
        &net,
        "--evidence",
        &ev,
        "--mode",
        "oracle",
        "--targets",
        "A",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    // p(D=t | A=t) = 0.622 and p(D=t | A=f) = 0.4095
    let a = numbers(line(&text, "A:"));
    let expected = 0.3 * 0.622 / (0.3 * 0.622 + 0.7 * 0.4095);
    assert!((a[0] - expected).abs() < 1e-11, "{text}");
    assert!(!trace.exists());
}

fn posterior_lines(text: &str) -> Vec<Vec<f64>> {
    ["A:", "B:", "C:"]
        .iter()
        .map(|p| numbers(line(text, p)))
        .collect()
}

#[test]
fn bounded_to_convergence_equals_exact() {
    let dir = TempDir::new().unwrap();
    let net = generate_random(&GeneratorParams::new(12, 3, 3, 4), 21).unwrap();
    let path = write(&dir, "net.json", &serialize_network(&net));
    let ev = write(
        &dir,
        "ev.json",
        r#"{"observations":[{"at_step":0,"set":{"X03":"s1","X09":"s0"}}]}"#,
    );
    let mut outs = Vec::new();
    for mode in ["exact", "oracle", "bounded"] {
        let mut args = vec!["run", "--network", &path, "--evidence", &ev, "--mode", mode];
        if mode == "bounded" {
            args.extend(["--epsilon", "0"]);
        }
        let o = bcond(&args);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        outs.push(stdout(&o));
    }
    for v in ["X00:", "X05:", "X11:"] {
        let exact = numbers(line(&outs[0], v));
        let oracle = numbers(line(&outs[1], v));
        let bounds = numbers(line(&outs[2], v));
        for (k, p) in exact.iter().enumerate() {
            assert!((p - oracle[k]).abs() < 1e-9);
            assert!((bounds[2 * k] - p).abs() < 1e-9);
            assert!((bounds[2 * k + 1] - p).abs() < 1e-9);
        }
    }
    assert!(line(&outs[2], "X03:").contains("observed s1"));
}

#[test]
fn diamond_modes_agree() {
    let dir = TempDir::new().unwrap();
    let (net, ev) = diamond_files(&dir);
    let exact = stdout(&bcond(&[
        "run",
        "--network",
        &net,
        "--evidence",
        &ev,
        "--mode",
        "exact",
    ]));
    let bounded = stdout(&bcond(&["run", "--network", &net, "--evidence", &ev]));
    let conc = stdout(&bcond(&[
        "run",
        "--network",
        &net,
        "--evidence",
        &ev,
        "--mode",
        "concurrent",
    ]));
    let e = posterior_lines(&exact);
    for out in [&bounded, &conc] {
        for (p, b) in e.iter().zip(posterior_lines(out)) {
            for (k, x) in p.iter().enumerate() {
                assert!((b[2 * k] - x).abs() < 1e-9 && (b[2 * k + 1] - x).abs() < 1e-9);
            }
        }
    }
    assert!(
        conc.contains("analysis 0: cutset [A] instances: 2"),
        "{conc}"
    );
}

#[test]
fn impossible_evidence_exit_code() {
    let dir = TempDir::new().unwrap();
    let net = write(&dir, "chain.json", &serialize_network(&chain()));
    // B copies A, so A=t with B=f cannot happen
    let ev = write(
        &dir,
        "ev.json",
        r#"{"observations":[{"at_step":0,"set":{"A":"t","B":"f"}}]}"#,
    );
    for mode in ["exact", "oracle", "bounded"] {
        let o = bcond(&["run", "--network", &net, "--evidence", &ev, "--mode", mode]);
        assert_eq!(o.status.code(), Some(exit::IMPOSSIBLE), "{mode}");
        assert!(String::from_utf8_lossy(&o.stderr).contains("impossible evidence"));
    }
}

#[test]
fn bad_arguments() {
    let dir = TempDir::new().unwrap();
    let (net, ev) = diamond_files(&dir);
    let o = bcond(&["run", "--network", &net, "--epsilon", "1.5"]);
    assert_eq!(o.status.code(), Some(exit::USAGE));
    let o = bcond(&[
        "run",
        "--network",
        &net,
        "--evidence",
        &ev,
        "--targets",
        "Z",
    ]);
    assert_eq!(o.status.code(), Some(exit::INVALID));
    let o = bcond(&["run", "--network", &net, "--cutset", "D"]);
    assert_eq!(o.status.code(), Some(exit::INVALID));
    let o = bcond(&[
        "generate",
        "--nodes",
        "3",
        "--max-parents",
        "1",
        "--loops",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(exit::INVALID));
}

fn trace_header(path: &Path) -> String {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string()
}

#[test]
fn trace_files() {
    let dir = TempDir::new().unwrap();
    let (net, ev) = diamond_files(&dir);
    let t: PathBuf = dir.path().join("t.csv");
    let ts = t.display().to_string();
    let o = bcond(&[
        "run",
        "--network",
        &net,
        "--evidence",
        &ev,
        "--trace",
        &ts,
        "--targets",
        "B",
    ]);
    assert!(o.status.success());
    assert_eq!(
        trace_header(&t),
        "step,instance_index,instance_w_upper,evidence_epoch,variable,state,lower,upper,width,cumulative_work_units"
    );
    let text = std::fs::read_to_string(&t).unwrap();
    // two prior solves and two update solves, two states each
    assert_eq!(text.lines().count(), 1 + 4 * 2);
    assert!(text.lines().skip(1).all(|l| l.contains(",B,")));

    let o = bcond(&[
        "run",
        "--network",
        &net,
        "--evidence",
        &ev,
        "--trace",
        &ts,
        "--mode",
        "concurrent",
        "--steps",
        "3",
    ]);
    assert!(o.status.success());
    assert_eq!(
        trace_header(&t),
        "step,analysis_id,instance_index,instance_w_upper,evidence_epoch,variable,state,lower,upper,width,combined_lower,combined_upper,cumulative_work_units"
    );
    assert!(stdout(&o).contains("work units: 3"));

    let fit = bcond(&["fit", &ts]);
    assert!(
        fit.status.success(),
        "{}",
        String::from_utf8_lossy(&fit.stderr)
    );
    assert!(stdout(&fit).starts_with("k: "));
}

#[test]
fn generated_files_validate() {
    let dir = TempDir::new().unwrap();
    for seed in 0..20u64 {
        let path = dir
            .path()
            .join(format!("g{seed}.json"))
            .display()
            .to_string();
        let s = seed.to_string();
        let o = bcond(&[
            "generate",
            "--nodes",
            "15",
            "--max-states",
            "3",
            "--loops",
            "2",
            "--seed",
            &s,
            "-o",
            &path,
        ]);
        assert!(o.status.success());
        assert_eq!(bcond(&["validate", &path]).status.code(), Some(exit::OK));
    }
    let a = bcond(&[
        "generate",
        "--nodes",
        "1",
        "--max-parents",
        "0",
        "--seed",
        "7",
    ]);
    let net = parse_network(&stdout(&a)).unwrap();
    assert_eq!(net.len(), 1);
    assert_eq!(
        stdout(&a),
        stdout(&bcond(&[
            "generate",
            "--nodes",
            "1",
            "--max-parents",
            "0",
            "--seed",
            "7"
        ]))
    );
}
