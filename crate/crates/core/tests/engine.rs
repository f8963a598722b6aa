mod common;

use common::gen::Gen;
use common::*;
use detwasm::engine::Mode;
use detwasm::runtime::{InstanceConfig, MemoryMode, Value};

#[test]
fn fib_every_mode() {
    let p = program(FIB);
    for (mode, mm) in MODES {
        let e = engine(&p, mode, mm);
        let mut inst = engine_instance(&e, InstanceConfig::default());
        for n in [0, 1, 2, 10, 20] {
            let r = e.invoke(&mut inst, "fib", &[Value::I32(n)]).unwrap();
            assert_eq!(r, vec![Value::I32(fib_oracle(n as u32))], "{mode:?} {mm:?} n={n}");
        }
    }
}

#[test]
fn generated_corpus_matches_interpreter() {
    for seed in 0..60u64 {
        let mut g = Gen::new(seed);
        let wat = g.module();
        let (a, b) = g.args();
        let p = program(&wat);
        let config = InstanceConfig { gas_limit: 200_000, ..Default::default() };
        let args = [Value::I64(a), Value::I32(b)];
        let want = trace(&p, Mode::Interp, MemoryMode::SoftwareCheck, config, "main", &args);
        for (mode, mm) in MODES {
            let got = trace(&p, mode, mm, config, "main", &args);
            assert_eq!(got, want, "seed {seed} {mode:?} {mm:?}\n{wat}");
        }
    }
}
