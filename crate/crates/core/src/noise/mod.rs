//! Heavy-tailed tempo-spatial Lévy noise: mark measures, Poisson atom clouds,
//! truncations and the stopping times `τ(N)`.

pub mod io;
mod marks;
mod realization;
mod shells;

pub use marks::{Compensation, JumpRegion, LevyMarkSpec, MarkFamily};
pub use realization::{
    sample_noise, Atom, NoiseRealization, SimulationBox, StoppingConfig, StoppingTime,
};
pub use shells::{exceedance_intensity, shell_bound, shell_radius};
