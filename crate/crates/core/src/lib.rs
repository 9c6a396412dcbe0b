//! Numerical engine for curvature objects of Riemannian metrics and affine
//! connections on coordinate charts: flatness PDE systems and tensor
//! identities, least-squares flatness-deviation functionals with explicit
//! Euler-Lagrange residuals, an independent first-variation oracle, and a
//! gradient-descent deviation minimizer.

pub mod curvature;
pub mod error;
pub mod field;
pub mod flatness;
pub mod scalar;
pub mod tensor;
pub mod variational;

pub use error::{Error, Result};

/// Cap the global worker pool (reads FLATLAB_THREADS when `limit` is None).
pub fn configure_threads(limit: Option<usize>) {
    let limit = limit.or_else(|| {
        std::env::var("FLATLAB_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = limit {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
}
