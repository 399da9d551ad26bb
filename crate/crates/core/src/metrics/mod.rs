//! Distances between populations and benchmark matrices.

mod benchmark;
mod matrix;
mod wasserstein;

pub use benchmark::{
    run_benchmark, Benchmark, BenchmarkInputs, ROW_MASTER, ROW_MIXTURE_REWARD, ROW_UNCONDITIONED, ROW_UNIFORM,
    SPECIALIZED_PREFIX,
};
pub use matrix::{performance_matrices, BenchmarkRow, MatrixKind, PerformanceMatrix, LOG_FLOOR};
pub use wasserstein::{
    flow_distance, wasserstein, wasserstein_closed_form_1d, wasserstein_min_cost_flow,
    GroundMetric, MetricScale, TransportSolution, MASS_SCALE,
};
