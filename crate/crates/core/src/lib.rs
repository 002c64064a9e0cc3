//! Semi-discrete solver for nonlocal unidirectional wave equations
//!
//! ```text
//! u_t + (beta * f(u))_x = 0
//! ```
//!
//! Space is discretized on a uniform grid with the discrete convolution,
//! the spatial derivative is moved onto the kernel, and the resulting
//! finite ODE system is integrated with an adaptive Dormand–Prince pair.
//! The [`experiments`] module reproduces the solitary-wave accuracy,
//! mesh-refinement and domain-truncation studies.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod discrete_ops;
pub mod error;
pub mod experiments;
pub mod integrator;
pub mod kernel;
pub mod par;
pub mod system;

pub use analytic::{
    check_decay, evaluate_solitary, initial_data, DecayEnvelope, DecayReport, SolitaryWave,
    WaveFamily,
};
pub use discrete_ops::{
    central_difference, discrete_convolution, lp_norm, quadrature_error_probe, restrict,
    ConvolutionPath, Grid, Norm, SampledSequence, StateVector,
};
pub use error::{Error, Result};
pub use experiments::{convergence_rate, linf_error, ErrorRecord, RateEstimate};
pub use integrator::{integrate, IntegratorConfig, Trajectory};
pub use kernel::{bbm_kernel, rosenau_kernel, tabulated_kernel, Kernel, SmoothnessClass};
pub use system::{
    apply_nonlinearity, build_system, discrete_mass, Nonlinearity, TruncatedSystem,
    DEFAULT_BLOW_UP_THRESHOLD,
};
