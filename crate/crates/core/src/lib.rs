//! Fock-state-selective composite pulses for trapped ions.
//!
//! A trapped ion's internal two-level system couples to its motional mode
//! through a laser whose Hamiltonian carries the full
//! `exp(-iη(a† + a))` dependence. Sequences of constant pulses are
//! optimized so that exactly one Fock state `|g,n⟩` is driven into the
//! excited manifold, which turns an electron-shelving readout into a
//! measurement of the phonon population `P_n`. Imperfect pulses are
//! corrected afterwards by solving the linear system that relates the true
//! populations to the measured excitations.
//!
//! Modules, bottom up:
//!
//! - [`fockspace`]: truncated operators, the Hamiltonian, exact propagators.
//! - [`pulses`]: composite pulse sequences and optimizer layouts.
//! - [`objective`]: target transitions, the modulus loss, excitation profiles.
//! - [`optimizer`]: particle swarm search followed by projected L-BFGS.
//! - [`thermometry`]: simulated measurements and the population correction.
//! - [`robustness`]: parameter sweeps around an optimized pulse.

pub mod error;
pub mod fockspace;
pub mod objective;
pub mod optimizer;
pub mod pulses;
pub mod robustness;
pub mod thermometry;

pub use error::{Error, Result};
pub use fockspace::{BasisIndex, Internal, Operator, SystemConfig};
pub use objective::{LossValue, TargetPreset, TargetSpec};
pub use pulses::{CompositePulse, ParamLayout, PulseParams, Regime};
