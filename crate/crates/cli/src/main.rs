//! `detwasm` command-line driver.
//!
//! Exit codes: 0 ok, 1 I/O, 2 validation, 3 trap, 4 API misuse,
//! 5 nondeterminism found by `diff`. `bench` exits 1 if any case errored.

mod bench;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use detwasm::backend::CompileMetrics;
use detwasm::dmir::dump::dump_function;
use detwasm::dmir::Program;
use detwasm::engine::{Engine, EngineConfig, InvokeError, Mode};
use detwasm::frontend::DwasmLimits;
use detwasm::runtime::{trace_line, HostRegistry, InstanceConfig, MemoryMode, Trap, Value};

pub const EXIT_OK: u8 = 0;
pub const EXIT_IO: u8 = 1;
pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_TRAP: u8 = 3;
pub const EXIT_MISUSE: u8 = 4;
pub const EXIT_NONDETERMINISTIC: u8 = 5;

#[derive(Parser)]
#[command(name = "detwasm", version, about = "Deterministic WebAssembly engine")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check a module against the dWasm rules.
    Validate { path: PathBuf },
    /// Invoke an export and print its trace line.
    Run(RunArgs),
    /// Run a case in every mode and bounds strategy and compare traces.
    Diff(DiffArgs),
    /// Measure latency and code size over a suite directory.
    Bench(BenchArgs),
    /// Print the metered dMIR of every defined function.
    DumpDmir {
        path: PathBuf,
        /// Show the optimized form used by the FLAS tier.
        #[arg(long)]
        optimized: bool,
    },
}

#[derive(Args, Clone)]
struct CaseArgs {
    path: PathBuf,
    #[arg(long, default_value = "main")]
    invoke: String,
    /// Typed literals such as i32:10 or f64:1.5.
    #[arg(long, num_args = 0..)]
    args: Vec<String>,
    #[arg(long, default_value_t = InstanceConfig::default().gas_limit)]
    gas_limit: u64,
    #[arg(long, default_value_t = InstanceConfig::default().max_depth)]
    max_depth: u64,
    #[arg(long, default_value_t = InstanceConfig::default().weight_budget)]
    stack_budget: u64,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    case: CaseArgs,
    #[arg(long, default_value = "lazy")]
    mode: String,
    /// guard or software; DETWASM_MEMORY_MODE overrides.
    #[arg(long, default_value = "guard")]
    memory_mode: String,
    /// Background compile workers in lazy mode.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    no_trace: bool,
    /// Append compile metrics and a bench entry as JSON lines.
    #[arg(long)]
    metrics: Option<PathBuf>,
    /// Print engine stats as JSON on stderr.
    #[arg(long)]
    stats: bool,
}

#[derive(Args)]
struct DiffArgs {
    #[command(flatten)]
    case: CaseArgs,
    /// Test double: corrupt the results of one mode to exercise the report.
    #[arg(long, hide = true)]
    miscompile: Option<String>,
}

#[derive(Args)]
struct BenchArgs {
    suite: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "interp,flat,flas,lazy")]
    modes: Vec<String>,
    #[arg(long, default_value_t = 30)]
    repeat: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub struct Failure {
    pub code: u8,
    pub line: String,
}

pub fn fail(code: u8, line: impl Into<String>) -> Failure {
    Failure { code, line: line.into() }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = std::thread::Builder::new()
        .name("detwasm-main".into())
        .stack_size(1 << 30)
        .spawn(move || dispatch(cli))
        .expect("spawn main thread")
        .join()
        .unwrap_or(EXIT_IO);
    ExitCode::from(code)
}

fn dispatch(cli: Cli) -> u8 {
    let r = match cli.cmd {
        Cmd::Validate { path } => validate(&path),
        Cmd::Run(a) => run(&a),
        Cmd::Diff(a) => diff(&a),
        Cmd::Bench(a) => bench::bench(&a.suite, &a.modes, a.repeat, a.out.as_deref()),
        Cmd::DumpDmir { path, optimized } => dump(&path, optimized),
    };
    match r {
        Ok(code) => code,
        Err(f) => {
            if f.code == EXIT_VALIDATION && f.line.starts_with("EVALID") {
                println!("{}", f.line);
            } else {
                eprintln!("error: {}", f.line);
            }
            f.code
        }
    }
}

pub fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    std::fs::read(path).map_err(|e| fail(EXIT_IO, format!("{}: {e}", path.display())))
}

pub fn load(path: &Path) -> Result<Arc<Program>, Failure> {
    let bytes = read(path)?;
    Program::from_bytes(&bytes, &DwasmLimits::default())
        .map(Arc::new)
        .map_err(|e| fail(EXIT_VALIDATION, format!("EVALID {} offset={}", e.code, e.offset)))
}

fn validate(path: &Path) -> Result<u8, Failure> {
    let bytes = read(path)?;
    match detwasm::frontend::load(&bytes, &DwasmLimits::default()) {
        Ok(_) => {
            println!("OK");
            Ok(EXIT_OK)
        }
        Err(e) => {
            println!("EVALID {} offset={}", e.code, e.offset);
            Ok(EXIT_VALIDATION)
        }
    }
}

fn dump(path: &Path, optimized: bool) -> Result<u8, Failure> {
    let p = load(path)?;
    let m = p.module();
    let mut out = std::io::stdout().lock();
    for f in m.num_imported_funcs..m.total_funcs() {
        let text = if optimized { dump_function(&p.optimized(f)) } else { dump_function(p.func(f)) };
        let _ = out.write_all(text.as_bytes());
    }
    Ok(EXIT_OK)
}

pub fn parse_mode(s: &str) -> Result<Mode, Failure> {
    Mode::parse(s).ok_or_else(|| fail(EXIT_MISUSE, format!("unknown mode {s:?}; expected interp, flat, flas or lazy")))
}

fn memory_mode(flag: &str) -> Result<MemoryMode, Failure> {
    let s = std::env::var("DETWASM_MEMORY_MODE").unwrap_or_else(|_| flag.to_string());
    MemoryMode::parse(&s).ok_or_else(|| fail(EXIT_MISUSE, format!("unknown memory mode {s:?}; expected guard or software")))
}

pub fn parse_args(args: &[String]) -> Result<Vec<Value>, Failure> {
    args.iter().map(|a| Value::parse_literal(a).map_err(|e| fail(EXIT_MISUSE, e))).collect()
}

impl CaseArgs {
    fn instance_config(&self, mm: MemoryMode) -> InstanceConfig {
        InstanceConfig { memory_mode: mm, gas_limit: self.gas_limit, max_depth: self.max_depth, weight_budget: self.stack_budget }
    }
}

pub struct Outcome {
    pub result: Result<Vec<Value>, Trap>,
    pub gas: u64,
    pub memhash: u64,
}

impl Outcome {
    pub fn trace(&self) -> String {
        trace_line(&self.result, self.gas, self.memhash)
    }
}

/// Instantiate and invoke once on `engine`.
pub fn invoke_once(engine: &Engine, config: InstanceConfig, name: &str, args: &[Value]) -> Result<Outcome, Failure> {
    let mut inst = match engine.instantiate(Arc::new(HostRegistry::with_mocks()), config) {
        Ok(i) => i,
        Err(detwasm::runtime::InstantiationError::StartTrap(t)) => {
            return Ok(Outcome { gas: t.gas_consumed, result: Err(t), memhash: 0 });
        }
        Err(e) => return Err(fail(EXIT_MISUSE, e.to_string())),
    };
    let result = match engine.invoke(&mut inst, name, args) {
        Ok(v) => Ok(v),
        Err(InvokeError::Trap(t)) => Err(t),
        Err(InvokeError::ApiMisuse(m)) => return Err(fail(EXIT_MISUSE, m)),
        Err(InvokeError::Compile(e)) => return Err(fail(EXIT_VALIDATION, e.to_string())),
    };
    Ok(Outcome { result, gas: inst.gas().consumed(), memhash: inst.memory_hash() })
}

pub fn new_engine(p: &Arc<Program>, config: EngineConfig) -> Result<Engine, Failure> {
    Engine::new(p.clone(), config).map_err(|e| fail(EXIT_VALIDATION, e.to_string()))
}

fn run(a: &RunArgs) -> Result<u8, Failure> {
    let p = load(&a.case.path)?;
    let mode = parse_mode(&a.mode)?;
    let mm = memory_mode(&a.memory_mode)?;
    let args = parse_args(&a.case.args)?;
    let start = Instant::now();
    let engine = new_engine(&p, EngineConfig { workers: a.workers, ..EngineConfig::new(mode, mm) })?;
    let out = invoke_once(&engine, a.case.instance_config(mm), &a.case.invoke, &args)?;
    let first = start.elapsed().as_micros() as u64;
    if !a.no_trace {
        println!("{}", out.trace());
    }
    if a.stats {
        eprintln!("{}", serde_json::to_string(&engine.stats()).expect("stats json"));
    }
    engine.shutdown();
    if let Some(path) = &a.metrics {
        let metrics = engine.metrics();
        let entry = bench::Entry {
            name: a.case.path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
            mode: mode.name().into(),
            latency_first_invoke_us: first,
            exec_latency_us: 0,
            processing_time_us: first,
            code_size_bytes: bench::code_size(&metrics),
            error: None,
        };
        write_metrics(path, &metrics, &entry)?;
    }
    Ok(if out.result.is_ok() { EXIT_OK } else { EXIT_TRAP })
}

fn write_metrics(path: &Path, metrics: &[CompileMetrics], entry: &bench::Entry) -> Result<(), Failure> {
    let mut s = String::new();
    for m in metrics {
        s += &serde_json::to_string(m).expect("metrics json");
        s.push('\n');
    }
    s += &serde_json::to_string(entry).expect("entry json");
    s.push('\n');
    std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .and_then(|mut f| f.write_all(s.as_bytes()))
        .map_err(|e| fail(EXIT_IO, format!("{}: {e}", path.display())))
}

fn diff(a: &DiffArgs) -> Result<u8, Failure> {
    let p = load(&a.case.path)?;
    let args = parse_args(&a.case.args)?;
    let broken = a.miscompile.as_deref().map(parse_mode).transpose()?;
    let mut lines = Vec::new();
    for mode in Mode::ALL {
        for mm in [MemoryMode::GuardPage, MemoryMode::SoftwareCheck] {
            let engine = new_engine(&p, EngineConfig::new(mode, mm))?;
            let mut out = invoke_once(&engine, a.case.instance_config(mm), &a.case.invoke, &args)?;
            if broken == Some(mode) {
                corrupt(&mut out);
            }
            lines.push((format!("{}/{}", mode.name(), mm.name()), out.trace()));
        }
    }
    let reference = &lines[0].1;
    if lines.iter().all(|(_, t)| t == reference) {
        println!("DETERMINISTIC");
        return Ok(EXIT_OK);
    }
    println!("NONDETERMINISTIC");
    for (label, t) in &lines {
        let mark = if t == reference { ' ' } else { '!' };
        println!("{mark} {label:<14} {t}");
    }
    Ok(EXIT_NONDETERMINISTIC)
}

fn corrupt(out: &mut Outcome) {
    match &mut out.result {
        Ok(v) if !v.is_empty() => v[0] = Value::from_bits(v[0].ty(), v[0].to_bits() ^ 1),
        _ => out.gas += 1,
    }
}
