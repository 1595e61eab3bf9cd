use std::io::Write;
use std::process::{Command, Output, Stdio};

fn sbitmap(args: &[&str], stdin: &[u8]) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_sbitmap"))
        .args(args)
        .env_remove("SBITMAP_SEED")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(stdin).unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn numbers(range: std::ops::Range<u64>) -> Vec<u8> {
    range.map(|i| format!("{i}\n")).collect::<String>().into_bytes()
}

const COUNT_8000: [&str; 5] = ["count", "--memory-bits", "8000", "--max-cardinality", "1e6"];

#[test]
fn dimension_by_memory() {
    let out = stdout(&sbitmap(&["dimension", "--memory-bits", "8000", "--max-cardinality", "1000000"], b""));
    let row: Vec<&str> = out.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "8000");
    assert_eq!(row[1], "1000000");
    assert!((row[2].parse::<f64>().unwrap() - 2026.436).abs() < 0.01);
    assert_eq!(row[5], "6986");
}

#[test]
fn dimension_by_precision_json() {
    let out = stdout(&sbitmap(&["dimension", "--epsilon", "0.01", "--max-cardinality", "1e6", "--json"], b""));
    let v: serde_json::Value = serde_json::from_str(out.trim()).unwrap();
    assert_eq!(v["m"], 31520);
}

#[test]
fn dimension_failures_have_distinct_exit_codes() {
    let none = sbitmap(&["dimension", "--memory-bits", "8", "--max-cardinality", "1e9"], b"");
    assert_eq!(none.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&none.stderr).contains("20"));
    let usage = sbitmap(&["dimension", "--max-cardinality", "1e6"], b"");
    assert_eq!(usage.status.code(), Some(1));
}

#[test]
fn count_empty_input() {
    let out = stdout(&sbitmap(&COUNT_8000, b""));
    assert_eq!(out, "n_hat,fill,saturated\n0.000,0,false\n");
}

#[test]
fn count_golden_and_duplicate_invariant() {
    let once = numbers(1..100_001);
    let mut twice = once.clone();
    twice.extend_from_slice(&numbers(1..100_001));
    let args = [&COUNT_8000[..], &["--seed", "1"]].concat();
    let a = stdout(&sbitmap(&args, &once));
    assert_eq!(a, "n_hat,fill,saturated\n101917.151,4682,false\n");
    assert_eq!(a, stdout(&sbitmap(&args, &twice)));
}

#[test]
fn seed_can_come_from_environment() {
    let input = numbers(0..5000);
    let flag = stdout(&sbitmap(&[&COUNT_8000[..], &["--seed", "77"]].concat(), &input));
    let mut child = Command::new(env!("CARGO_BIN_EXE_sbitmap"))
        .args(COUNT_8000)
        .env("SBITMAP_SEED", "77")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(&input).unwrap();
    let env = String::from_utf8(child.wait_with_output().unwrap().stdout).unwrap();
    assert_eq!(flag, env);
    assert_ne!(flag, stdout(&sbitmap(&COUNT_8000, &input)));
}

#[test]
fn keyed_counts_match_per_key_runs() {
    let mut keyed = String::new();
    let (mut a, mut b) = (String::new(), String::new());
    for i in 0..3000 {
        keyed.push_str(&format!("a\t{i}\n"));
        a.push_str(&format!("{i}\n"));
        if i % 3 == 0 {
            keyed.push_str(&format!("b\tx{i}\n"));
            b.push_str(&format!("x{i}\n"));
        }
    }
    keyed.push_str("no tab here\n");
    let args = [&COUNT_8000[..], &["--seed", "4", "--keyed"]].concat();
    let out = sbitmap(&args, keyed.as_bytes());
    assert!(String::from_utf8_lossy(&out.stderr).contains("skipped 1 malformed"));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "key,n_hat,fill,saturated");
    let flat = [&COUNT_8000[..], &["--seed", "4"]].concat();
    for (line, items) in lines[1..].iter().zip([a, b]) {
        let single = stdout(&sbitmap(&flat, items.as_bytes()));
        assert_eq!(line.split_once(',').unwrap().1, single.lines().nth(1).unwrap());
    }
}

#[test]
fn count_saves_envelope() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sketch.json");
    stdout(&sbitmap(&[&COUNT_8000[..], &["--save", path.to_str().unwrap()]].concat(), &numbers(0..1000)));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(v["kind"], "sbitmap");
    assert_eq!(v["m"], 8000);
}

#[test]
fn rates_csv() {
    let out = stdout(&sbitmap(&["rates", "--memory-bits", "64", "--max-cardinality", "500"], b""));
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "k,p,q,t");
    assert_eq!(lines.len(), 65);
}

#[test]
fn memory_table() {
    let out = stdout(&sbitmap(&["compare", "--table", "memory"], b""));
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "epsilon,N,sbitmap_bits,hll_bits,ratio");
    assert_eq!(lines.len(), 16);
}

#[test]
fn small_simulate_and_compare() {
    let sim = stdout(&sbitmap(
        &["simulate", "--memory-bits", "512", "--max-cardinality", "1e4", "--replicates", "20", "--n-grid", "10,100,1000"],
        b"",
    ));
    assert_eq!(sim.lines().count(), 4);

    let dir = tempfile::tempdir().unwrap();
    let args = [
        "compare", "--sketches", "sbitmap,hll", "--memory-bits", "1024", "--max-cardinality", "1e4",
        "--replicates", "10", "--n-grid", "100..10000", "--out", dir.path().to_str().unwrap(),
    ];
    stdout(&sbitmap(&args, b""));
    for name in ["sbitmap.csv", "hll.csv"] {
        let text = std::fs::read_to_string(dir.path().join(name)).unwrap();
        assert_eq!(text.lines().count(), 4, "{name}: {text}");
    }
}
