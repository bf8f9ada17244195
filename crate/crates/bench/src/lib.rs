//! Shared inputs for the benchmarks.

use fdlimit::parabolic::AnnulusGrid;
use fdlimit::Params;

/// Subcritical lift parameters used by every benchmark.
pub fn bench_params() -> Params {
    Params::default().with_m(0.2)
}

pub fn bench_grid(nr: usize, nt: usize) -> AnnulusGrid {
    AnnulusGrid::new(0.1, 5.0, nr, 0.5, nt).expect("valid grid")
}
