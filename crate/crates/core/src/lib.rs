//! Numerical experiments on Szegő-type trace asymptotics for compressions
//! `P A_λ P` of Fourier multipliers with discontinuous symbols: entanglement
//! entropy and particle-number variance of free fermions, their scaling in
//! `λ`, and Cantor-like momentum sets with a prescribed boundary
//! regularity.

pub mod error;
pub mod fourier;
pub mod kernels;
pub mod quad;
pub mod scaling;
pub mod setlib;
pub mod spectral;

pub use error::{Error, Result};
pub use fourier::{fit_tail_exponent, phi_for_symbol, psi_for_symbol, tail_integral, Indicator, TailProfile};
pub use kernels::{
    assemble, hs_cross_norm_direct, hs_cross_norm_integral, kernel_value, AssemblyOptions, DenseHermitian,
    OverlapOperator, StepSymbol,
};
pub use scaling::{
    check_entropy_variance, check_sandwich, fit_power_log, sweep, widom_coefficient, Experiment, ScalingFit,
    SweepResult, WidomCoefficient,
};
pub use setlib::{
    build_cantor_set, cantor_params_from_beta, modulus_sq, set_difference_measure, AngularUnit, CantorParams,
    CantorSet, IntervalUnion, Mode, RegionSpec, SetFactor,
};
pub use spectral::{entropy, eigenvalues, szego_remainder, trace_f, variance, weyl_term, Functional, SpectralResult, TraceReport};
