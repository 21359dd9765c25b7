//! Simulation designs, Monte Carlo replication and timing benchmarks for the
//! Cox subsampling estimators in `mcox-core`.

pub mod bench;
pub mod dgp;
pub mod replicate;
pub mod report;

pub use bench::{subsample_fit_scaling, timing_benchmark, BenchTable, PhaseScaling};
pub use dgp::{generate_dataset, generate_with_failure_times, CovariateKind, DgpConfig, Simulated};
pub use replicate::{run_replications, run_replications_with, EstimatorKind, ReplicationOptions, ReplicationOutput, ReplicationReport};
