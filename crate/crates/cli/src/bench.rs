//! `bench`: latency and code size per case and mode.
//!
//! A suite directory holds `.wasm` files and an optional `suite.json`
//! listing `{name, file, invoke, args, gas_limit}` cases. Without a
//! manifest every `.wasm` file is a case invoking `main` with no arguments.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use detwasm::backend::CompileMetrics;
use detwasm::engine::{EngineConfig, Mode};
use detwasm::runtime::{InstanceConfig, MemoryMode};
use serde::{Deserialize, Serialize};

use crate::{fail, invoke_once, load, new_engine, parse_args, parse_mode, read, Failure, EXIT_IO, EXIT_OK};

#[derive(Debug, Clone, Deserialize)]
pub struct Case {
    pub name: String,
    pub file: String,
    #[serde(default = "default_invoke")]
    pub invoke: String,
    #[serde(default)]
    pub args: Vec<String>,
    pub gas_limit: Option<u64>,
}

fn default_invoke() -> String {
    "main".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Entry {
    pub name: String,
    pub mode: String,
    pub latency_first_invoke_us: u64,
    pub exec_latency_us: u64,
    pub processing_time_us: u64,
    pub code_size_bytes: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Total size of the newest artifact of each function.
pub fn code_size(metrics: &[CompileMetrics]) -> u64 {
    let mut last: BTreeMap<u32, CompileMetrics> = BTreeMap::new();
    for m in metrics {
        let keep = last.get(&m.func_index).is_none_or(|prev| m.tier >= prev.tier);
        if keep {
            last.insert(m.func_index, *m);
        }
    }
    last.values().map(|m| m.code_size_bytes).sum()
}

fn median(mut xs: Vec<u64>) -> u64 {
    xs.sort_unstable();
    xs.get(xs.len() / 2).copied().unwrap_or(0)
}

fn cases(suite: &Path) -> Result<Vec<Case>, Failure> {
    let manifest = suite.join("suite.json");
    if manifest.exists() {
        let bytes = read(&manifest)?;
        return serde_json::from_slice(&bytes).map_err(|e| fail(EXIT_IO, format!("{}: {e}", manifest.display())));
    }
    let dir = std::fs::read_dir(suite).map_err(|e| fail(EXIT_IO, format!("{}: {e}", suite.display())))?;
    let mut files: Vec<String> = dir
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".wasm"))
        .collect();
    files.sort();
    Ok(files
        .into_iter()
        .map(|f| Case { name: f.trim_end_matches(".wasm").into(), file: f, invoke: default_invoke(), args: vec![], gas_limit: None })
        .collect())
}

fn measure(suite: &Path, case: &Case, mode: Mode, repeat: usize) -> Result<Entry, Failure> {
    let p = load(&suite.join(&case.file))?;
    let args = parse_args(&case.args)?;
    let config = InstanceConfig { gas_limit: case.gas_limit.unwrap_or(InstanceConfig::default().gas_limit), ..Default::default() };
    let mut first = Vec::with_capacity(repeat);
    let mut exec = Vec::with_capacity(repeat);
    let mut size = 0;
    for _ in 0..repeat.max(1) {
        let t = Instant::now();
        let engine = new_engine(&p, EngineConfig::new(mode, MemoryMode::GuardPage))?;
        let out = invoke_once(&engine, config, &case.invoke, &args)?;
        first.push(t.elapsed().as_micros() as u64);
        if let Err(trap) = out.result {
            return Err(fail(crate::EXIT_TRAP, trap.to_string()));
        }
        let t = Instant::now();
        invoke_once(&engine, config, &case.invoke, &args)?;
        exec.push(t.elapsed().as_micros() as u64);
        engine.shutdown();
        size = code_size(&engine.metrics());
    }
    let (first, exec) = (median(first), median(exec));
    Ok(Entry {
        name: case.name.clone(),
        mode: mode.name().into(),
        latency_first_invoke_us: first,
        exec_latency_us: exec,
        processing_time_us: first + exec,
        code_size_bytes: size,
        error: None,
    })
}

pub fn bench(suite: &Path, modes: &[String], repeat: usize, out: Option<&Path>) -> Result<u8, Failure> {
    let modes: Vec<Mode> = modes.iter().map(|m| parse_mode(m)).collect::<Result<_, _>>()?;
    let mut sink: Box<dyn Write> = match out {
        Some(p) => Box::new(std::fs::File::create(p).map_err(|e| fail(EXIT_IO, format!("{}: {e}", p.display())))?),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut errored = false;
    for case in cases(suite)? {
        for &mode in &modes {
            let entry = measure(suite, &case, mode, repeat).unwrap_or_else(|f| {
                errored = true;
                Entry {
                    name: case.name.clone(),
                    mode: mode.name().into(),
                    latency_first_invoke_us: 0,
                    exec_latency_us: 0,
                    processing_time_us: 0,
                    code_size_bytes: 0,
                    error: Some(f.line),
                }
            });
            let line = serde_json::to_string(&entry).expect("entry json");
            writeln!(sink, "{line}").map_err(|e| fail(EXIT_IO, e.to_string()))?;
        }
    }
    Ok(if errored { EXIT_IO } else { EXIT_OK })
}
