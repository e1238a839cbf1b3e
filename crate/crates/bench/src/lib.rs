//! Fixtures shared by the benchmarks.

use mdens_core::functional::center_and_absmean;
use mdens_core::{
    build_model, Functional, FunctionalSpec, GaussianModel, Kernel, ModelSpec, ProcessGrid,
};

/// fBm with the given Hurst index on a uniform grid over `[1, 2]`.
pub fn fbm_model(hurst: f64, points: usize) -> GaussianModel {
    let grid = ProcessGrid::uniform(1.0, 2.0, points).expect("valid grid");
    build_model(ModelSpec::Grid {
        grid,
        kernel: Kernel::Fbm { hurst },
    })
    .expect("fBm covariance factorizes")
}

/// Supremum functional centered with a small number of draws.
pub fn sup_spec(model: &GaussianModel) -> FunctionalSpec {
    center_and_absmean(Functional::ProcessSup, model, 2_000, 1).expect("centering succeeds")
}
