//! Execution modes, function slots, lazy resolution and background
//! tier-up.
//!
//! Every function (imports first) has a slot holding the address callers
//! jump to. Imports point at host thunks. In lazy mode a defined function
//! starts at the stub for its signature; the first call compiles it at
//! FLAT and continues into the new code, and background workers later
//! publish FLAS code into the same slot.

use std::collections::{HashMap, VecDeque};
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicU8, AtomicUsize, Ordering};
use std::sync::{Arc, OnceLock};
use std::thread::JoinHandle;
use std::time::Instant;

use parking_lot::{Condvar, Mutex};
use serde::{Deserialize, Serialize};

use crate::backend::arena::CodeBlob;
use crate::backend::rt::{self, NO_DETAIL, TRAP_COMPILE};
use crate::backend::{self, Artifact, CompileError, CompileMetrics, Tier};
use crate::dmir::Program;
use crate::interp;
use crate::runtime::host::HostRegistry;
use crate::runtime::instance::{Instance, InstanceConfig, InstantiationError};
use crate::runtime::memory::MemoryMode;
use crate::runtime::trap::{Trap, TrapCode};
use crate::runtime::value::Value;
use crate::runtime::vmctx::VmCtx;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Interp,
    #[serde(rename = "flat")]
    EagerFlat,
    #[serde(rename = "flas")]
    EagerFlas,
    Lazy,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Interp, Mode::EagerFlat, Mode::EagerFlas, Mode::Lazy];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Interp => "interp",
            Mode::EagerFlat => "flat",
            Mode::EagerFlas => "flas",
            Mode::Lazy => "lazy",
        }
    }

    pub fn parse(s: &str) -> Option<Mode> {
        Mode::ALL.into_iter().find(|m| m.name() == s)
    }
}

/// Order in which background workers take functions.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum Priority {
    /// Ascending function index.
    #[default]
    Fifo,
    /// Larger functions (by instruction count) first.
    SizeDescending,
    Explicit(Vec<u32>),
}

impl Priority {
    pub fn order(&self, program: &Program) -> Vec<u32> {
        let m = program.module();
        let defined: Vec<u32> = (m.num_imported_funcs..m.total_funcs()).collect();
        match self {
            Priority::Fifo => defined,
            Priority::SizeDescending => {
                let mut v = defined;
                v.sort_by_key(|&f| std::cmp::Reverse(m.instruction_count(f)));
                v
            }
            Priority::Explicit(v) => v.iter().copied().filter(|f| defined.contains(f)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EngineConfig {
    pub mode: Mode,
    pub memory_mode: MemoryMode,
    /// Background workers in lazy mode; `None` picks CPUs − 1 (at least 1).
    /// Zero disables background compilation; see [`Engine::background_step`].
    pub workers: Option<usize>,
    pub priority: Priority,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig { mode: Mode::Lazy, memory_mode: MemoryMode::GuardPage, workers: None, priority: Priority::Fifo }
    }
}

impl EngineConfig {
    pub fn new(mode: Mode, memory_mode: MemoryMode) -> EngineConfig {
        EngineConfig { mode, memory_mode, ..Default::default() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stats {
    pub stubs_resolved: u64,
    pub background_compiled: u64,
    pub switches: u64,
    pub latency_first_invoke_us: Option<u64>,
    pub priority_order: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InvokeError {
    #[error("{0}")]
    Trap(Trap),
    #[error("api misuse: {0}")]
    ApiMisuse(String),
    #[error(transparent)]
    Compile(CompileError),
}

impl InvokeError {
    pub fn trap(&self) -> Option<&Trap> {
        match self {
            InvokeError::Trap(t) => Some(t),
            _ => None,
        }
    }
}

const STUB: u8 = 0;
const FLAT: u8 = 1;
const FLAS: u8 = 2;

fn tier_rank(t: Tier) -> u8 {
    match t {
        Tier::Flat => FLAT,
        Tier::Flas => FLAS,
    }
}

#[derive(Default)]
struct Queue {
    pending: VecDeque<u32>,
    shutdown: bool,
}

struct Shared {
    program: Arc<Program>,
    config: EngineConfig,
    slots: Box<[AtomicUsize]>,
    tiers: Box<[AtomicU8]>,
    /// Serializes publication; holds every artifact ever published.
    published: Mutex<Vec<Arc<Artifact>>>,
    glue: Mutex<Vec<CodeBlob>>,
    trampolines: Mutex<HashMap<u32, Arc<CodeBlob>>>,
    queue: Mutex<Queue>,
    wake: Condvar,
    closed: AtomicBool,
    stubs_resolved: AtomicU64,
    background_compiled: AtomicU64,
    switches: AtomicU64,
    created: Instant,
    first_invoke_us: OnceLock<u64>,
    priority_order: Vec<u32>,
    metrics: Mutex<Vec<CompileMetrics>>,
    last_error: Mutex<Option<CompileError>>,
}

pub struct Engine {
    shared: Arc<Shared>,
    workers: Mutex<Vec<JoinHandle<()>>>,
}

impl Engine {
    pub fn new(program: Arc<Program>, config: EngineConfig) -> Result<Engine, CompileError> {
        let created = Instant::now();
        let m = program.module();
        let n = m.total_funcs() as usize;
        let priority_order = if config.mode == Mode::Lazy { config.priority.order(&program) } else { Vec::new() };
        let shared = Arc::new(Shared {
            program: program.clone(),
            config: config.clone(),
            slots: (0..n).map(|_| AtomicUsize::new(0)).collect(),
            tiers: (0..n).map(|_| AtomicU8::new(STUB)).collect(),
            published: Mutex::new(Vec::new()),
            glue: Mutex::new(Vec::new()),
            trampolines: Mutex::new(HashMap::new()),
            queue: Mutex::new(Queue::default()),
            wake: Condvar::new(),
            closed: AtomicBool::new(false),
            stubs_resolved: AtomicU64::new(0),
            background_compiled: AtomicU64::new(0),
            switches: AtomicU64::new(0),
            created,
            first_invoke_us: OnceLock::new(),
            priority_order,
            metrics: Mutex::new(Vec::new()),
            last_error: Mutex::new(None),
        });
        let engine = Engine { shared, workers: Mutex::new(Vec::new()) };
        if config.mode == Mode::Interp {
            return Ok(engine);
        }
        let s = &engine.shared;
        {
            let mut glue = s.glue.lock();
            for f in 0..m.num_imported_funcs {
                let blob = backend::compile_import_thunk(f, m.func_type(f))?;
                s.slots[f as usize].store(blob.ptr() as usize, Ordering::Release);
                s.tiers[f as usize].store(FLAS, Ordering::Release);
                glue.push(blob);
            }
        }
        match config.mode {
            Mode::EagerFlat | Mode::EagerFlas => {
                let tier = if config.mode == Mode::EagerFlat { Tier::Flat } else { Tier::Flas };
                for f in m.num_imported_funcs..m.total_funcs() {
                    let a = backend::compile_function(&program, f, tier, config.memory_mode)?;
                    s.metrics.lock().push(a.metrics);
                    s.publish(f, a);
                }
            }
            Mode::Lazy => {
                let mut stubs: HashMap<u32, usize> = HashMap::new();
                let mut glue = s.glue.lock();
                for f in m.num_imported_funcs..m.total_funcs() {
                    let sig = m.sig_id_of_func(f);
                    let addr = match stubs.get(&sig) {
                        Some(a) => *a,
                        None => {
                            let blob = backend::compile_stub(m.func_type(f))?;
                            let a = blob.ptr() as usize;
                            glue.push(blob);
                            stubs.insert(sig, a);
                            a
                        }
                    };
                    s.slots[f as usize].store(addr, Ordering::Release);
                }
                drop(glue);
                s.queue.lock().pending = s.priority_order.iter().copied().collect();
                let workers = config.workers.unwrap_or_else(|| {
                    std::thread::available_parallelism().map_or(1, |n| n.get()).saturating_sub(1).max(1)
                });
                let mut handles = engine.workers.lock();
                for i in 0..workers {
                    let s = s.clone();
                    let h = std::thread::Builder::new()
                        .name(format!("detwasm-compile-{i}"))
                        .spawn(move || s.worker())
                        .expect("spawn worker");
                    handles.push(h);
                }
            }
            Mode::Interp => unreachable!(),
        }
        Ok(engine)
    }

    pub fn program(&self) -> &Arc<Program> {
        &self.shared.program
    }

    pub fn config(&self) -> &EngineConfig {
        &self.shared.config
    }

    /// Creates an instance whose memory mode matches the engine.
    pub fn instantiate(
        &self,
        registry: Arc<HostRegistry>,
        mut config: InstanceConfig,
    ) -> Result<Instance, InstantiationError> {
        config.memory_mode = self.shared.config.memory_mode;
        Instance::new(self.shared.program.clone(), registry, config)
    }

    pub fn stats(&self) -> Stats {
        let s = &self.shared;
        Stats {
            stubs_resolved: s.stubs_resolved.load(Ordering::Relaxed),
            background_compiled: s.background_compiled.load(Ordering::Relaxed),
            switches: s.switches.load(Ordering::Relaxed),
            latency_first_invoke_us: s.first_invoke_us.get().copied(),
            priority_order: s.priority_order.clone(),
        }
    }

    /// Every compilation performed so far, in completion order.
    pub fn metrics(&self) -> Vec<CompileMetrics> {
        self.shared.metrics.lock().clone()
    }

    /// Tier currently published for `func_index`; `None` while a stub.
    pub fn slot_tier(&self, func_index: u32) -> Option<Tier> {
        match self.shared.tiers[func_index as usize].load(Ordering::Acquire) {
            STUB => None,
            FLAT => Some(Tier::Flat),
            _ => Some(Tier::Flas),
        }
    }

    /// Compile a defined function without publishing it.
    pub fn compile(&self, func_index: u32, tier: Tier) -> Result<Artifact, CompileError> {
        let a = backend::compile_function(&self.shared.program, func_index, tier, self.shared.config.memory_mode)?;
        self.shared.metrics.lock().push(a.metrics);
        Ok(a)
    }

    /// Publish a FLAS artifact into its slot. Returns false if the slot
    /// already holds FLAS code or the engine is shut down.
    pub fn hot_switch(&self, func_index: u32, artifact: Artifact) -> bool {
        assert_eq!(artifact.tier(), Tier::Flas, "hot switch publishes FLAS code");
        self.shared.publish(func_index, artifact)
    }

    /// Take one queued background job and run it on the calling thread.
    /// Returns the function index handled, or `None` if the queue is empty.
    pub fn background_step(&self) -> Option<u32> {
        let f = {
            let mut q = self.shared.queue.lock();
            if q.shutdown {
                return None;
            }
            q.pending.pop_front()?
        };
        self.shared.tier_up(f);
        Some(f)
    }

    /// Cancel queued background work and wait for in-flight compilations.
    /// Idempotent; no publication happens after it returns.
    pub fn shutdown(&self) {
        {
            let mut q = self.shared.queue.lock();
            q.shutdown = true;
            q.pending.clear();
        }
        self.shared.wake.notify_all();
        for h in self.workers.lock().drain(..) {
            let _ = h.join();
        }
        // Taking the publication lock orders this after any publish in progress.
        let _guard = self.shared.published.lock();
        self.shared.closed.store(true, Ordering::Release);
    }

    pub fn invoke(&self, inst: &mut Instance, name: &str, args: &[Value]) -> Result<Vec<Value>, InvokeError> {
        let func = self
            .shared
            .program
            .export(name)
            .ok_or_else(|| InvokeError::ApiMisuse(format!("no exported function {name:?}")))?;
        self.invoke_index(inst, func, args)
    }

    pub fn invoke_index(&self, inst: &mut Instance, func: u32, args: &[Value]) -> Result<Vec<Value>, InvokeError> {
        let s = &self.shared;
        if !Arc::ptr_eq(inst.program(), &s.program) {
            return Err(InvokeError::ApiMisuse("instance belongs to a different program".into()));
        }
        if func >= s.program.module().total_funcs() {
            return Err(InvokeError::ApiMisuse(format!("no function {func}")));
        }
        let ty = s.program.module().func_type(func);
        if args.len() != ty.params.len() || args.iter().zip(&ty.params).any(|(a, t)| a.ty() != *t) {
            return Err(InvokeError::ApiMisuse(format!(
                "arguments ({}) do not match {ty}",
                args.iter().map(|a| a.ty().to_string()).collect::<Vec<_>>().join(", ")
            )));
        }
        if s.config.mode != Mode::Interp && inst.config().memory_mode != s.config.memory_mode {
            return Err(InvokeError::ApiMisuse("instance memory mode differs from the engine's".into()));
        }
        inst.reset_gas();
        let r = match s.config.mode {
            Mode::Interp => interp::invoke_index(inst, func, args, None).map_err(InvokeError::Trap),
            _ => self.invoke_native(inst, func, args),
        };
        s.first_invoke_us.get_or_init(|| s.created.elapsed().as_micros() as u64);
        r
    }

    fn trampoline(&self, func: u32) -> Result<Arc<CodeBlob>, CompileError> {
        let m = self.shared.program.module();
        let sig = m.sig_id_of_func(func);
        let mut t = self.shared.trampolines.lock();
        if let Some(b) = t.get(&sig) {
            return Ok(b.clone());
        }
        let b = Arc::new(backend::compile_trampoline(m.func_type(func))?);
        t.insert(sig, b.clone());
        Ok(b)
    }

    fn invoke_native(&self, inst: &mut Instance, func: u32, args: &[Value]) -> Result<Vec<Value>, InvokeError> {
        let s = &self.shared;
        let tramp = self.trampoline(func).map_err(InvokeError::Compile)?;
        let ty = s.program.module().func_type(func);
        let mut values: Vec<u64> = args.iter().map(|a| a.to_bits()).collect();
        values.resize(values.len().max(1), 0);

        let ip: *mut Instance = inst;
        let vm: *mut VmCtx = unsafe {
            let inst = &mut *ip;
            let (lo, hi) = match inst.memory.mode() {
                MemoryMode::GuardPage => inst.memory.reservation(),
                MemoryMode::SoftwareCheck => (0, 0),
            };
            let vm = &mut *inst.vmctx;
            vm.trap_code = 0;
            vm.trap_detail = 0;
            vm.trap_gas = 0;
            vm.guard_lo = lo;
            vm.guard_hi = hi;
            vm.mem_base = inst.memory.base();
            vm.mem_size = inst.memory.size();
            vm.gas = inst.gas.remaining;
            vm.depth = 0;
            vm.max_depth = inst.config.max_depth;
            vm.weight_used = 0;
            vm.weight_budget = inst.config.weight_budget;
            vm.globals = inst.globals.as_mut_ptr();
            vm.table = inst.table.as_ptr();
            vm.table_len = inst.table.len() as u64;
            vm.slots = s.slots.as_ptr();
            vm.callee_index = func as u64;
            vm.engine = Arc::as_ptr(s) as *const _;
            vm.instance = ip as *mut _;
            vm
        };
        let callee = s.slots[func as usize].load(Ordering::Acquire) as *const u8;
        let trapped = unsafe { rt::enter(vm, tramp.ptr(), callee, values.as_mut_ptr()) };
        let inst = unsafe { &mut *ip };
        let vm = &*inst.vmctx;
        if !trapped {
            inst.gas.remaining = vm.gas;
            return Ok(ty.results.iter().map(|t| Value::from_bits(*t, values[0])).collect());
        }
        inst.gas.remaining = vm.trap_gas;
        if vm.trap_code == TRAP_COMPILE {
            let e = s.last_error.lock().clone();
            return Err(InvokeError::Compile(e.unwrap_or(CompileError::Codegen("stub resolution failed".into()))));
        }
        let code = TrapCode::from_u32(vm.trap_code as u32).expect("trap code from generated code");
        let mut detail = (vm.trap_detail != NO_DETAIL).then_some(vm.trap_detail);
        if code == TrapCode::MemoryAccessOutOfBounds {
            detail = detail.map(|d| d.max(vm.mem_size));
        }
        Err(InvokeError::Trap(Trap { code, gas_consumed: inst.gas.consumed(), detail }))
    }
}

impl Drop for Engine {
    fn drop(&mut self) {
        self.shutdown();
    }
}

impl Shared {
    /// Publish `a` unless the slot already holds code of the same or a
    /// higher tier. Losing artifacts are dropped.
    fn publish(&self, func: u32, a: Artifact) -> bool {
        let rank = tier_rank(a.tier());
        let mut published = self.published.lock();
        if self.closed.load(Ordering::Acquire) {
            return false;
        }
        let cur = self.tiers[func as usize].load(Ordering::Acquire);
        if cur >= rank {
            return false;
        }
        self.slots[func as usize].store(a.code() as usize, Ordering::Release);
        self.tiers[func as usize].store(rank, Ordering::Release);
        if rank == FLAS {
            self.switches.fetch_add(1, Ordering::Relaxed);
        }
        published.push(Arc::new(a));
        true
    }

    fn resolve(&self, func: u32) -> usize {
        if self.tiers[func as usize].load(Ordering::Acquire) != STUB {
            return self.slots[func as usize].load(Ordering::Acquire);
        }
        match backend::compile_function(&self.program, func, Tier::Flat, self.config.memory_mode) {
            Ok(a) => {
                self.metrics.lock().push(a.metrics);
                if self.publish(func, a) {
                    self.stubs_resolved.fetch_add(1, Ordering::Relaxed);
                }
                if self.tiers[func as usize].load(Ordering::Acquire) == STUB {
                    // Shut down before publishing; nothing can run this function.
                    *self.last_error.lock() = Some(CompileError::Codegen("engine shut down".into()));
                    return 0;
                }
                self.slots[func as usize].load(Ordering::Acquire)
            }
            Err(e) => {
                *self.last_error.lock() = Some(e);
                0
            }
        }
    }

    fn tier_up(&self, func: u32) {
        if self.tiers[func as usize].load(Ordering::Acquire) == FLAS {
            return;
        }
        if let Ok(a) = backend::compile_function(&self.program, func, Tier::Flas, self.config.memory_mode) {
            self.metrics.lock().push(a.metrics);
            if self.publish(func, a) {
                self.background_compiled.fetch_add(1, Ordering::Relaxed);
            }
        }
    }

    fn worker(self: Arc<Self>) {
        lower_thread_priority();
        loop {
            let f = {
                let mut q = self.queue.lock();
                loop {
                    if q.shutdown {
                        return;
                    }
                    if let Some(f) = q.pending.pop_front() {
                        break f;
                    }
                    self.wake.wait(&mut q);
                    if q.pending.is_empty() && !q.shutdown {
                        continue;
                    }
                }
            };
            self.tier_up(f);
            if self.queue.lock().pending.is_empty() {
                return;
            }
        }
    }
}

/// Background compilation only uses otherwise idle CPU time.
fn lower_thread_priority() {
    unsafe {
        let param = libc::sched_param { sched_priority: 0 };
        if libc::sched_setscheduler(0, libc::SCHED_IDLE, &param) != 0 {
            libc::setpriority(libc::PRIO_PROCESS, 0, 19);
        }
    }
}

/// Called by generated stubs through the resolve libcall.
pub(crate) unsafe fn resolve_from_stub(vm: *mut VmCtx, index: u32) -> usize {
    let shared = &*((*vm).engine as *const Shared);
    shared.resolve(index)
}
