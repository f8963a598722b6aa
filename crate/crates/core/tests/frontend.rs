use detwasm::frontend::{compute_frame_weight, decode_module, load, DwasmLimits, ValidationCode};

fn wasm(src: &str) -> Vec<u8> {
    wat::parse_str(src).unwrap()
}

fn code_of(src: &str) -> (ValidationCode, u32) {
    let e = load(&wasm(src), &DwasmLimits::default()).unwrap_err();
    (e.code, e.offset)
}

#[test]
fn answer_module_decodes() {
    let ast = decode_module(&wasm(r#"(module (func (export "answer") (result i32) i32.const 42))"#)).unwrap();
    assert_eq!(ast.types.len(), 1);
    assert_eq!(ast.functions.len(), 1);
    assert_eq!(ast.exports.len(), 1);
    assert_eq!(ast.code[0].instrs.len(), 2);
}

#[test]
fn frame_weight_examples() {
    let m = wasm(
        r#"(module
            (func (param i32 i32) (local i64)
              i32.const 1 i32.const 2 i32.const 3 drop drop drop)
            (func)
            (func (param i64 i64) (result i64) (local i64)
              local.get 0 local.get 1 i64.add local.set 2 local.get 2))"#,
    );
    let ast = decode_module(&m).unwrap();
    assert_eq!(compute_frame_weight(&ast, 0).unwrap(), 7);
    assert_eq!(compute_frame_weight(&ast, 1).unwrap(), 0);
    assert_eq!(compute_frame_weight(&ast, 2).unwrap(), 10);
    let v = load(&m, &DwasmLimits::default()).unwrap();
    assert_eq!(v.funcs[2].frame_weight, 10);
}

#[test]
fn adding_locals_changes_weight_by_type_weight() {
    let base = "(module (func (param i32) local.get 0 drop))";
    let w0 = compute_frame_weight(&decode_module(&wasm(base)).unwrap(), 0).unwrap();
    let with32 = "(module (func (param i32) (local i32) local.get 0 drop))";
    let with64 = "(module (func (param i32) (local i64) local.get 0 drop))";
    assert_eq!(compute_frame_weight(&decode_module(&wasm(with32)).unwrap(), 0).unwrap(), w0 + 1);
    assert_eq!(compute_frame_weight(&decode_module(&wasm(with64)).unwrap(), 0).unwrap(), w0 + 2);
}

#[test]
fn first_violation_wins() {
    let locals = "i32 ".repeat(10241);
    let params = "i32 ".repeat(1025);
    let src = format!("(module (func (local {locals})) (func (param {params})))");
    assert_eq!(code_of(&src).0, ValidationCode::LocalCountExceeded);
}

#[test]
fn typing_errors() {
    assert_eq!(code_of("(module (func (result i32) i64.const 1))").0, ValidationCode::TypeMismatch);
    assert_eq!(code_of("(module (func call 7))").0, ValidationCode::UnknownIndex);
    assert_eq!(
        code_of("(module (global i32 (i32.const 0)) (func i32.const 1 global.set 0))").0,
        ValidationCode::ImmutableGlobal
    );
    assert_eq!(
        code_of("(module (memory 1) (func i32.const 0 i32.load align=8 drop))").0,
        ValidationCode::InvalidAlignment
    );
    assert_eq!(
        code_of(r#"(module (func (export "a")) (func (export "a")))"#).0,
        ValidationCode::DuplicateExport
    );
    assert_eq!(
        code_of(r#"(module (import "env" "checked_i32_add" (func (param i64 i64) (result i64))))"#).0,
        ValidationCode::HookSignatureMismatch
    );
    assert_eq!(code_of("(module (func (param i32)) (start 0))").0, ValidationCode::InvalidStartFunction);
    assert_eq!(code_of("(module (memory 70000))").0, ValidationCode::MemoryLimitExceeded);
}

#[test]
fn invalid_utf8_export_name() {
    let mut m = wasm(r#"(module (func (export "ab")))"#);
    let pos = m.windows(2).position(|w| w == b"ab").unwrap();
    m[pos] = 0xFF;
    assert_eq!(load(&m, &DwasmLimits::default()).unwrap_err().code, ValidationCode::InvalidUtf8Identifier);
}

#[test]
fn floats_can_be_rejected() {
    let m = wasm("(module (func (result f32) f32.const 1))");
    assert!(load(&m, &DwasmLimits::default()).is_ok());
    let strict = DwasmLimits { reject_floats: true, ..DwasmLimits::default() };
    assert_eq!(load(&m, &strict).unwrap_err().code, ValidationCode::UnsupportedFeature);
}

#[test]
fn hooks_are_recorded() {
    let m = wasm(
        r#"(module
            (import "env" "log" (func (param i32)))
            (import "env" "checked_u64_mul" (func (param i64 i64) (result i64))))"#,
    );
    let v = load(&m, &DwasmLimits::default()).unwrap();
    assert_eq!(v.checked_hooks.len(), 1);
    assert!(v.checked_hooks.contains_key(&1));
}

#[test]
fn error_line_is_stable() {
    let e = load(b"\0wasm\x01\0\0\0", &DwasmLimits::default()).unwrap_err();
    assert_eq!(e.line(), "EVALID MalformedModule offset=0");
}
