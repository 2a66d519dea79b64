//! Data generators, problem storage, benchmarks and reports.

pub mod bench;
pub mod generate;
pub mod io;
pub mod report;

pub use crate::path::{BenchRecord, MeanVar};
pub use bench::{bench, bench_one, prepare, BenchConfig, DataSpec, Prepared};
pub use generate::{gen_gaussian, gen_shape, GaussianSpec, Shape, ShapeSpec};
pub use io::{load_problem, save_problem, Manifest};
pub use report::{report, Format};
