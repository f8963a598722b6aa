"""Writes lazy50.wat: 50 functions, of which main -> step -> leaf is the
only path the entry point runs. The other 47 are large and never called
on it, so a lazy engine only has to compile three small functions."""

import random

rng = random.Random(50)
OPS = ["i64.add", "i64.sub", "i64.mul", "i64.xor", "i64.or", "i64.and", "i64.rotl"]


def cold(i):
    body = ["    (local.set $x (i64.extend_i32_u (local.get $n)))"]
    for k in range(60):
        op = rng.choice(OPS)
        c = rng.randrange(1, 1 << 30)
        body.append(f"    (local.set $x ({op} (local.get $x) (i64.const {c})))")
        if k % 12 == 11:
            body.append(f"    (if (i64.eqz (local.get $x)) (then (local.set $x (i64.const {c}))))")
    body.append("    (local.get $x)")
    return f"  (func $cold{i} (param $n i32) (result i64) (local $x i64)\n" + "\n".join(body) + ")"


parts = ["(module"]
parts.append("""  (func $leaf (param $x i64) (result i64)
    (i64.add (i64.mul (local.get $x) (i64.const 31)) (i64.const 7)))
  (func $step (param $n i32) (result i64)
    (call $leaf (i64.extend_i32_u (local.get $n))))
  (func (export "main") (param $n i32) (result i64)
    (call $step (local.get $n)))""")
for i in range(47):
    parts.append(cold(i))
parts.append("  (table 47 funcref)")
parts.append("  (elem (i32.const 0) " + " ".join(f"$cold{i}" for i in range(47)) + ")")
parts.append(")")
open("lazy50.wat", "w").write("\n".join(parts) + "\n")
