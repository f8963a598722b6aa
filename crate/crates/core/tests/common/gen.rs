//! Seeded generator of terminating random modules in WAT text form.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Gen {
    rng: ChaCha8Rng,
    /// Helpers this body may call directly (lower-numbered only, so no recursion).
    callable: usize,
    in_loop: bool,
    oob: bool,
}

const I32S: &[&str] = &[
    "i32.add", "i32.sub", "i32.mul", "i32.and", "i32.or", "i32.xor", "i32.shl", "i32.shr_s", "i32.shr_u",
    "i32.rotl", "i32.rotr", "i32.div_s", "i32.div_u", "i32.rem_s", "i32.rem_u",
];
const I64S: &[&str] = &[
    "i64.add", "i64.sub", "i64.mul", "i64.and", "i64.or", "i64.xor", "i64.shl", "i64.shr_s", "i64.shr_u",
    "i64.rotl", "i64.rotr", "i64.div_s", "i64.div_u", "i64.rem_s", "i64.rem_u",
];
const CMP64: &[&str] = &["i64.eq", "i64.ne", "i64.lt_s", "i64.lt_u", "i64.gt_s", "i64.ge_u"];
const CMPF: &[&str] = &["f64.eq", "f64.ne", "f64.lt", "f64.ge"];
const F64B: &[&str] = &["f64.add", "f64.sub", "f64.mul", "f64.div", "f64.min", "f64.max", "f64.copysign"];
const F64U: &[&str] = &["f64.sqrt", "f64.neg", "f64.abs", "f64.ceil", "f64.floor", "f64.trunc", "f64.nearest"];
const I32C: &[i64] = &[0, 1, -1, 2, 7, 31, 32, i32::MIN as i64, i32::MAX as i64, 0xFFF8, 65536];
const I64C: &[i64] = &[0, 1, -1, 3, 63, 64, i64::MIN, i64::MAX, 0x1_0000_0000];
const F64C: &[&str] = &["0", "-0", "1.5", "-2.25", "inf", "-inf", "nan", "nan:0x4", "1e300", "2147483647.5", "-0.5"];

impl Gen {
    pub fn new(seed: u64) -> Gen {
        Gen { rng: ChaCha8Rng::seed_from_u64(seed), callable: 0, in_loop: false, oob: true }
    }

    fn pick<'a, T>(&mut self, xs: &'a [T]) -> &'a T {
        &xs[self.rng.gen_range(0..xs.len())]
    }

    fn chance(&mut self, p: f64) -> bool {
        self.rng.gen_bool(p)
    }

    fn addr(&mut self, d: u32) -> String {
        let e = self.i32(d);
        if self.oob && self.chance(0.08) {
            e
        } else {
            format!("(i32.and {e} (i32.const 0xFFF0))")
        }
    }

    pub fn i32(&mut self, d: u32) -> String {
        if d == 0 {
            return match self.rng.gen_range(0..3) {
                0 => format!("(i32.const {})", self.pick(I32C)),
                1 => "(local.get 1)".into(),
                _ => "(local.get 3)".into(),
            };
        }
        let d = d - 1;
        match self.rng.gen_range(0..12) {
            0 | 1 | 2 => {
                let op = *self.pick(I32S);
                let (a, b) = (self.i32(d), self.i32(d));
                if (op.contains("div") || op.contains("rem")) && !self.chance(0.1) {
                    format!("({op} {a} (i32.or {b} (i32.const 1)))")
                } else {
                    format!("({op} {a} {b})")
                }
            }
            3 => {
                let op = *self.pick(CMP64);
                format!("({op} {} {})", self.i64(d), self.i64(d))
            }
            4 => {
                let op = *self.pick(CMPF);
                format!("({op} {} {})", self.f64(d), self.f64(d))
            }
            5 => format!("(i32.wrap_i64 {})", self.i64(d)),
            6 => {
                let op = *self.pick(&["i32.load", "i32.load8_s", "i32.load16_u"]);
                format!("({op} offset={} {})", self.rng.gen_range(0..16), self.addr(d))
            }
            7 if self.chance(0.3) => {
                let op = *self.pick(&["i32.trunc_f64_s", "i32.trunc_f64_u"]);
                format!("({op} {})", self.f64(d))
            }
            8 => format!("(select {} {} {})", self.i32(d), self.i32(d), self.i32(d)),
            9 => format!("(i32.eqz {})", self.i32(d)),
            10 => "(memory.size)".into(),
            _ => format!("(if (result i32) {} (then {}) (else {}))", self.i32(d), self.i32(d), self.i32(d)),
        }
    }

    pub fn i64(&mut self, d: u32) -> String {
        if d == 0 {
            return match self.rng.gen_range(0..4) {
                0 => format!("(i64.const {})", self.pick(I64C)),
                1 => "(local.get 0)".into(),
                2 => "(local.get 2)".into(),
                _ => "(global.get $g)".into(),
            };
        }
        let d = d - 1;
        match self.rng.gen_range(0..12) {
            0 | 1 | 2 => {
                let op = *self.pick(I64S);
                let (a, b) = (self.i64(d), self.i64(d));
                if (op.contains("div") || op.contains("rem")) && !self.chance(0.1) {
                    format!("({op} {a} (i64.or {b} (i64.const 1)))")
                } else {
                    format!("({op} {a} {b})")
                }
            }
            3 => {
                let op = *self.pick(&["i64.extend_i32_s", "i64.extend_i32_u"]);
                format!("({op} {})", self.i32(d))
            }
            4 => {
                let op = *self.pick(&["i64.load", "i64.load32_s", "i64.load8_u"]);
                format!("({op} offset={} {})", self.rng.gen_range(0..16), self.addr(d))
            }
            5 if self.callable > 0 => {
                let h = self.rng.gen_range(0..self.callable);
                format!("(call $h{h} {} {})", self.i64(d), self.i32(d))
            }
            6 if self.callable > 0 => format!(
                "(call_indirect (type $t) {} {} (i32.and {} (i32.const 3)))",
                self.i64(d),
                self.i32(d),
                self.i32(d)
            ),
            7 => format!("(call $echo {})", self.i64(d)),
            8 => format!("(i64.reinterpret_f64 {})", self.f64(d)),
            9 if self.chance(0.3) => {
                let op = *self.pick(&["i64.trunc_f64_s", "i64.trunc_f64_u"]);
                format!("({op} {})", self.f64(d))
            }
            10 => format!("(select {} {} {})", self.i64(d), self.i64(d), self.i32(d)),
            _ => format!("(i64.mul {} (i64.const 0x9E3779B97F4A7C15))", self.i64(d)),
        }
    }

    pub fn f64(&mut self, d: u32) -> String {
        if d == 0 {
            return if self.chance(0.5) {
                format!("(f64.const {})", self.pick(F64C))
            } else {
                "(local.get 4)".into()
            };
        }
        let d = d - 1;
        match self.rng.gen_range(0..7) {
            0 | 1 => {
                let op = *self.pick(F64B);
                format!("({op} {} {})", self.f64(d), self.f64(d))
            }
            2 => {
                let op = *self.pick(F64U);
                format!("({op} {})", self.f64(d))
            }
            3 => {
                let op = *self.pick(&["f64.convert_i64_s", "f64.convert_i64_u"]);
                format!("({op} {})", self.i64(d))
            }
            4 => format!("(f64.promote_f32 (f32.demote_f64 {}))", self.f64(d)),
            5 => format!("(f64.reinterpret_i64 {})", self.i64(d)),
            _ => format!("(f64.load offset={} {})", self.rng.gen_range(0..8), self.addr(d)),
        }
    }

    fn stmts(&mut self, n: usize, d: u32) -> String {
        (0..n).map(|_| self.stmt(d)).collect::<Vec<_>>().join(" ")
    }

    pub fn stmt(&mut self, d: u32) -> String {
        let e = d.min(3);
        match self.rng.gen_range(0..14) {
            0 | 1 => format!("(local.set 2 {})", self.i64(e)),
            2 => format!("(local.set 3 {})", self.i32(e)),
            3 => format!("(local.set 4 {})", self.f64(e)),
            4 | 5 => {
                let (op, v) = match self.rng.gen_range(0..3) {
                    0 => ("i64.store", self.i64(e)),
                    1 => ("i32.store8", self.i32(e)),
                    _ => ("f64.store", self.f64(e)),
                };
                format!("({op} offset={} {} {v})", self.rng.gen_range(0..16), self.addr(e))
            }
            6 if d > 0 => format!(
                "(if {} (then {}) (else {}))",
                self.i32(e),
                self.stmts(2, d - 1),
                self.stmts(1, d - 1)
            ),
            7 if d > 0 && !self.in_loop => {
                self.in_loop = true;
                let n = self.rng.gen_range(0..6);
                let body = self.stmts(2, d - 1);
                self.in_loop = false;
                format!(
                    "(local.set 5 (i32.const {n})) (block (loop (br_if 1 (i32.eqz (local.get 5))) {body} \
                     (local.set 5 (i32.sub (local.get 5) (i32.const 1))) (br 0)))"
                )
            }
            8 => format!("(global.set $g {})", self.i64(e)),
            9 => format!("(call $use_gas (i64.const {}))", self.rng.gen_range(0..20)),
            10 => format!("(drop (memory.grow (i32.const {})))", self.rng.gen_range(0..2)),
            11 if d > 0 && self.chance(0.2) => format!("(if {} (then unreachable))", self.i32(e)),
            12 if d > 0 => format!(
                "(block (block (block (br_table 0 1 2 (i32.and {} (i32.const 3)))) {}) {})",
                self.i32(e),
                self.stmts(1, d - 1),
                self.stmts(1, d - 1)
            ),
            _ => format!("(drop {})", self.i64(e)),
        }
    }

    fn body(&mut self, n: usize) -> String {
        let s = self.stmts(n, 2);
        let r = self.i64(3);
        format!("{s} (i64.xor {r} (i64.reinterpret_f64 (local.get 4)))")
    }

    /// A module exporting `main(i64, i32) -> i64`.
    pub fn module(&mut self) -> String {
        let locals = "(local i64 i32 f64 i32)";
        self.callable = 0;
        let h0 = self.body(2);
        self.callable = 1;
        let h1 = self.body(3);
        self.callable = 2;
        let main = self.body(6);
        format!(
            r#"(module
  (type $t (func (param i64 i32) (result i64)))
  (import "env" "use_gas" (func $use_gas (param i64)))
  (import "env" "echo_i64" (func $echo (param i64) (result i64)))
  (memory 1 3)
  (global $g (mut i64) (i64.const 5))
  (table 4 funcref)
  (elem (i32.const 0) $h0 $h1 $other)
  (data (i32.const 16) "\01\02\03\04\05\06\07\08\ff\fe")
  (func $other (result i32) (i32.const 9))
  (func $h0 (type $t) {locals} {h0})
  (func $h1 (type $t) {locals} {h1})
  (func (export "main") (type $t) {locals} {main}))"#
        )
    }

    pub fn args(&mut self) -> (i64, i32) {
        (*self.pick(I64C), *self.pick(I32C) as i32)
    }
}
