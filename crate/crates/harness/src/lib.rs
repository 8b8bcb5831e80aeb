//! Closed-loop evaluation of reduced and full-order controllers on the
//! benchmark plants: configuration, simulation, Δ statistics, benchmark
//! matrices with short-horizon baselines, and report/plot output.

pub mod bench;
pub mod config;
pub mod demo;
pub mod metrics;
pub mod plot;
pub mod pool;
pub mod trace;

pub use bench::{run_benchmark, run_benchmark_with, BenchmarkReport};
pub use config::{BenchConfig, ConfigLayer, PlantId, RunConfig};
pub use metrics::{performance_delta, DeltaStats};
pub use trace::{run_closed_loop, run_closed_loop_from, ClosedLoopTrace};
