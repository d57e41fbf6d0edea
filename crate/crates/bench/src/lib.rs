//! Shared fixtures for the criterion benchmarks.

use copula_bounds::{
    build_dap, build_envelope, parse_integrand, DapInstance, EnvelopeGrid, EnvelopeKind, GridSpec,
    Sense,
};

/// Lower envelope of the product integrand on the `n^d` grid.
pub fn product_envelope(d: usize, n: usize) -> EnvelopeGrid {
    let src = (1..=d)
        .map(|k| format!("x{k}"))
        .collect::<Vec<_>>()
        .join("*");
    let f = parse_integrand(&src, d).expect("product parses");
    build_envelope(
        &f,
        GridSpec::new(d, n).expect("grid fits"),
        EnvelopeKind::Lower,
        2,
    )
    .expect("product is finite")
}

/// The copula-scaled minimisation instance for the product integrand.
pub fn product_instance(d: usize, n: usize) -> DapInstance {
    build_dap(&product_envelope(d, n), Sense::Minimize, 1.0 / n as f64).expect("valid instance")
}
