fn main() {
    println!("cargo:rerun-if-changed=csrc/detwasm_rt.c");
    cc::Build::new().file("csrc/detwasm_rt.c").flag_if_supported("-fno-omit-frame-pointer").compile("detwasm_rt");
}
