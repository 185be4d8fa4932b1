use std::env;
use std::path::PathBuf;

fn main() {
    let crate_dir = PathBuf::from(env::var("CARGO_MANIFEST_DIR").unwrap());
    let config = cbindgen::Config::from_file(crate_dir.join("cbindgen.toml"))
        .expect("cbindgen.toml parses");
    match cbindgen::Builder::new()
        .with_crate(&crate_dir)
        .with_config(config)
        .generate()
    {
        Ok(bindings) => {
            let out = PathBuf::from(env::var("OUT_DIR").unwrap()).join("citygraph.h");
            bindings.write_to_file(&out);
            // Keep a copy in the repo so C users do not need a Rust build
            // to see the interface.
            bindings.write_to_file(crate_dir.join("include").join("citygraph.h"));
        }
        Err(e) => panic!("cbindgen failed: {e}"),
    }
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");
}
