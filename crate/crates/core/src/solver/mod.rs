//! Mild solution on a space-time grid.
//!
//! The grid spans the whole noise box; atoms are never snapped to it. The field at
//! an atom `(s, y)` is read from the latest level `t_k ≤ s` and interpolated
//! multilinearly in space, while the kernel is evaluated at the exact offset
//! `(t - s, x - y)`. Atoms are summed in `(s, y, z)` order with compensated
//! summation, so results do not depend on the number of worker threads.

mod convolution;
mod grid;
pub mod io;
mod picard;
mod problem;

pub use convolution::{initial_field, stochastic_convolution};
pub use grid::{FieldGrid, GridGeometry, Stencil};
pub use picard::{glue, picard_step, solve, Solution, SolveDiagnostics, SolveOptions, Solver};
pub use problem::{
    GridSpec, GrowthBound, InitialCondition, ProblemSpec, QuadratureSpec, SigmaFn, SigmaSpec,
};
