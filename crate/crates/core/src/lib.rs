//! Emulation of non-Markovian pure dephasing for a single qubit.
//!
//! The crate covers the full pipeline from an Ohmic-family spectral density to
//! optimized dynamical-decoupling sequences:
//!
//! - [`spectra`]: spectral density `J(ω)`, the harmonic comb that realizes it
//!   and the comb/continuum bookkeeping.
//! - [`noise`]: seeded realizations of the random-phase field `ξ(t)` and
//!   closed-form phase accumulation under a pulse sequence.
//! - [`sequences`]: π-pulse sequences (PDD, CPMG, UDD, arbitrary) and their
//!   filter functions.
//! - [`dynamics`]: decoherence traces `Γ(t)` by quadrature, closed form,
//!   exact comb summation and Monte Carlo ensembles.
//! - [`measures`]: BLP non-Markovianity, coherence protection and entropy.
//! - [`optimizer`]: genetic search over inter-pulse delays.
//! - [`postprocess`]: Fourier-domain smoothing of finite-ensemble traces.
//! - [`cli`]: configuration, batch modes and figure datasets behind the
//!   `dephasim` binary.
//!
//! Units: angular frequencies in rad/s, times in seconds, `ħ = 1`, and
//! temperature enters only as the energy `k_B·T`.

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod io;
pub mod measures;
pub mod noise;
pub mod optimizer;
pub mod postprocess;
pub mod quadrature;
pub mod sequences;
pub mod spectra;

pub use dynamics::{DecoherenceTrace, Method, Normalization};
pub use error::{Error, Result};
pub use measures::MeasureReport;
pub use noise::{EnsembleSpec, NoiseRealization};
pub use optimizer::{GaConfig, OptimizationResult};
pub use postprocess::SmoothingConfig;
pub use sequences::PulseSequence;
pub use spectra::{EnvironmentSpec, NoiseModel};

/// Base angular frequency of the comb used for reference-scale runs, `2π·4` rad/s.
pub const DEFAULT_OMEGA_B: f64 = 2.0 * std::f64::consts::PI * 4.0;
/// Cutoff angular frequency of the reference-scale environment, `2π·320` rad/s.
pub const DEFAULT_OMEGA_C: f64 = 2.0 * std::f64::consts::PI * 320.0;
/// Number of comb harmonics at reference scale.
pub const DEFAULT_HARMONICS: usize = 1000;
/// Decay window of reference-scale traces, in seconds.
pub const DEFAULT_WINDOW: f64 = 2.5e-3;
/// Default number of grid points over the decay window.
pub const DEFAULT_GRID_POINTS: usize = 500;
/// Minimum delay between π pulses (physical pulse width), in seconds.
pub const DEFAULT_MIN_DELAY: f64 = 50e-6;
