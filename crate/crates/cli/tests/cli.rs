use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_detwasm"))
}

fn suite() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../bench")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_wat(dir: &tempfile::TempDir, name: &str, wat: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, wat::parse_str(wat).unwrap()).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).env_remove("DETWASM_MEMORY_MODE").output().unwrap()
}

const DIV: &str = r#"(module (func (export "main") (param i32) (result i32) (i32.div_s (i32.const 7) (local.get 0))))"#;
const BOMB: &str = r#"(module (func $f (export "main") (param i32) (result i32) (call $f (i32.add (local.get 0) (i32.const 1)))))"#;

#[test]
fn suite_binaries_match_sources() {
    let regen = std::env::var_os("DETWASM_REGEN").is_some();
    for name in ["fib_rec", "fib_iter", "checked_swap", "mem_stream", "lazy50"] {
        let src = std::fs::read_to_string(suite().join("src").join(format!("{name}.wat"))).unwrap();
        let bytes = wat::parse_str(&src).unwrap();
        let path = suite().join(format!("{name}.wasm"));
        if regen {
            std::fs::write(&path, &bytes).unwrap();
        }
        assert_eq!(std::fs::read(&path).unwrap(), bytes, "{name}.wasm is stale; rerun with DETWASM_REGEN=1");
    }
}

#[test]
fn validate_reports_first_violation() {
    let dir = tempfile::tempdir().unwrap();
    let ok = write_wat(&dir, "ok.wasm", "(module)");
    let o = run(&["validate", ok.to_str().unwrap()]);
    assert_eq!((o.status.code(), stdout(&o).as_str()), (Some(0), "OK\n"));

    let params = vec!["i32"; 1025].join(" ");
    let wide = write_wat(&dir, "wide.wasm", &format!("(module (func (param {params})))"));
    let o = run(&["validate", wide.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).starts_with("EVALID ParamCountExceeded offset="), "{}", stdout(&o));
    let again = run(&["validate", wide.to_str().unwrap()]);
    assert_eq!(o.stdout, again.stdout);

    let bytes = std::fs::read(&ok).unwrap();
    let cut = dir.path().join("cut.wasm");
    std::fs::write(&cut, &bytes[..5]).unwrap();
    let o = run(&["validate", cut.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).starts_with("EVALID MalformedModule offset="));

    let o = run(&["validate", "/nonexistent/x.wasm"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn run_prints_trace_and_exit_code() {
    let fib = suite().join("fib_rec.wasm");
    let fib = fib.to_str().unwrap();
    let cmd = ["run", fib, "--mode", "flas", "--invoke", "fib", "--args", "i32:10", "--gas-limit", "1000000"];
    let o = run(&cmd);
    assert_eq!(o.status.code(), Some(0));
    let line = stdout(&o);
    assert!(line.starts_with("OK 55 gas="), "{line}");
    assert!(line.contains(" memhash="));
    assert_eq!(run(&cmd).stdout, o.stdout);

    let o = run(&["run", fib, "--mode", "lazy", "--invoke", "fib", "--args", "i32:30", "--gas-limit", "10"]);
    assert_eq!((o.status.code(), stdout(&o).as_str()), (Some(3), "TRAP GasExhausted gas=10\n"));
}

#[test]
fn run_rejects_misuse() {
    let fib = suite().join("fib_rec.wasm");
    let fib = fib.to_str().unwrap();
    for args in [
        vec!["run", fib, "--invoke", "nope"],
        vec!["run", fib, "--invoke", "fib", "--args", "i64:1"],
        vec!["run", fib, "--invoke", "fib"],
        vec!["run", fib, "--invoke", "fib", "--args", "i32:x"],
        vec!["run", fib, "--invoke", "fib", "--args", "i32:1", "--mode", "jit"],
    ] {
        assert_eq!(run(&args).status.code(), Some(4), "{args:?}");
    }
    let o = bin()
        .args(["run", fib, "--invoke", "fib", "--args", "i32:1"])
        .env("DETWASM_MEMORY_MODE", "bogus")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(4));
    let o = bin()
        .args(["run", fib, "--invoke", "fib", "--args", "i32:20", "--mode", "flat"])
        .env("DETWASM_MEMORY_MODE", "software")
        .output()
        .unwrap();
    assert!(stdout(&o).starts_with("OK 6765 "));
}

#[test]
fn run_writes_metrics_and_stats() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.jsonl");
    let fib = suite().join("fib_rec.wasm");
    let o = run(&[
        "run", fib.to_str().unwrap(), "--mode", "flat", "--invoke", "fib", "--args", "i32:5",
        "--metrics", m.to_str().unwrap(), "--stats",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&m).unwrap();
    let lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines[0]["tier"], "flat");
    assert!(lines[0]["code_size_bytes"].as_u64().unwrap() > 0);
    let entry = lines.last().unwrap();
    assert_eq!(entry["mode"], "flat");
    let stats: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert!(stats["latency_first_invoke_us"].is_u64());
    assert_eq!(stats["stubs_resolved"], 0);
}

#[test]
fn diff_checks_every_mode() {
    let dir = tempfile::tempdir().unwrap();
    let div = write_wat(&dir, "div.wasm", DIV);
    let o = run(&["diff", div.to_str().unwrap(), "--args", "i32:0"]);
    assert_eq!((o.status.code(), stdout(&o).as_str()), (Some(0), "DETERMINISTIC\n"));

    let bomb = write_wat(&dir, "bomb.wasm", BOMB);
    let o = run(&["diff", bomb.to_str().unwrap(), "--args", "i32:0"]);
    assert_eq!((o.status.code(), stdout(&o).as_str()), (Some(0), "DETERMINISTIC\n"));
    let o = run(&["run", bomb.to_str().unwrap(), "--args", "i32:0", "--mode", "flas"]);
    assert!(stdout(&o).starts_with("TRAP WasmCallStackExceed gas="));

    let o = run(&["diff", div.to_str().unwrap(), "--args", "i32:2", "--miscompile", "flat"]);
    assert_eq!(o.status.code(), Some(5));
    let out = stdout(&o);
    assert!(out.starts_with("NONDETERMINISTIC\n"));
    assert_eq!(out.lines().filter(|l| l.starts_with('!')).count(), 2, "{out}");
}

#[test]
fn bench_reports() {
    let empty = tempfile::tempdir().unwrap();
    let o = run(&["bench", empty.path().to_str().unwrap()]);
    assert_eq!((o.status.code(), o.stdout.len()), (Some(0), 0));

    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(suite().join("fib_iter.wasm"), dir.path().join("fib_iter.wasm")).unwrap();
    write_wat(&dir, "div.wasm", DIV);
    std::fs::write(
        dir.path().join("suite.json"),
        r#"[{"name": "fib", "file": "fib_iter.wasm", "invoke": "fib", "args": ["i32:20"]},
            {"name": "div", "file": "div.wasm", "args": ["i32:0"]}]"#,
    )
    .unwrap();
    let o = run(&["bench", dir.path().to_str().unwrap(), "--modes", "interp,lazy", "--repeat", "3"]);
    assert_eq!(o.status.code(), Some(1));
    let entries: Vec<serde_json::Value> = stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(entries.len(), 4);
    for e in &entries[..2] {
        assert!(e.get("error").is_none());
        let sum = e["latency_first_invoke_us"].as_u64().unwrap() + e["exec_latency_us"].as_u64().unwrap();
        assert_eq!(e["processing_time_us"].as_u64().unwrap(), sum);
    }
    assert_eq!(entries[0]["code_size_bytes"], 0);
    assert!(entries[1]["code_size_bytes"].as_u64().unwrap() > 0);
    assert!(entries[2]["error"].as_str().unwrap().contains("IntegerDivideByZero"));
}

#[test]
fn dump_dmir_is_stable() {
    let fib = suite().join("fib_iter.wasm");
    let a = run(&["dump-dmir", fib.to_str().unwrap()]);
    let b = run(&["dump-dmir", fib.to_str().unwrap()]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert!(stdout(&a).starts_with("func f0 (i32) -> (i32)"));
    let opt = run(&["dump-dmir", "--optimized", fib.to_str().unwrap()]);
    assert!(opt.stdout.len() <= a.stdout.len());
}
