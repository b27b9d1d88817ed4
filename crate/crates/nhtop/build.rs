// Link the system OpenBLAS (which bundles BLAS, CBLAS and LAPACK) instead of
// letting a -src backend crate build or download one. Override with
// NHTOP_LAPACK_LIB if the library is named differently on your system.
fn main() {
    let lib = std::env::var("NHTOP_LAPACK_LIB").unwrap_or_else(|_| "openblas".to_string());
    println!("cargo:rustc-link-lib=dylib={lib}");
    println!("cargo:rerun-if-env-changed=NHTOP_LAPACK_LIB");
}
