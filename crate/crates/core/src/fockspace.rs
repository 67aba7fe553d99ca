//! Truncated two-level ⊗ Fock space.
//!
//! Every operator on the joint space is a dense `2·cutoff × 2·cutoff`
//! complex matrix. The ground block comes first: flat index `i` is
//! `|g, offset + i⟩` and `cutoff + i` is `|e, offset + i⟩`. A nonzero
//! `fock_offset` shifts the retained window of Fock levels upward, which is
//! how pulses addressing high phonon numbers are designed without carrying
//! every level below them.
//!
//! All quantities are dimensionless with the trap frequency `ν = 1`; one
//! time unit is `1 / (2π · 1 MHz)`, see [`TIME_UNIT_MICROSECONDS`].

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pulses::PulseParams;

/// Dense complex operator on the joint (or Fock-only) space.
pub type Operator = DMatrix<Complex64>;

/// Length of one dimensionless time unit in microseconds when `ν = 2π · 1 MHz`.
pub const TIME_UNIT_MICROSECONDS: f64 = 1.0 / (2.0 * PI);

const HERMITICITY_TOLERANCE: f64 = 1e-10;

/// Trap and laser constants plus the Fock truncation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    /// Lamb-Dicke parameter.
    pub eta: f64,
    /// Trap frequency; the unit of energy.
    pub nu: f64,
    /// Action constant. Propagation uses `exp(-i H t / hbar)`.
    pub hbar: f64,
    /// Number of Fock levels retained.
    pub cutoff: usize,
    /// Absolute Fock number of the lowest retained level.
    pub fock_offset: usize,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            eta: 0.084,
            nu: 1.0,
            hbar: 1.0,
            cutoff: 4,
            fock_offset: 0,
        }
    }
}

impl SystemConfig {
    pub fn with_cutoff(cutoff: usize) -> Self {
        Self {
            cutoff,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(Error::Config(format!(
                "eta must be positive, got {}",
                self.eta
            )));
        }
        if !(self.nu.is_finite() && self.nu > 0.0) {
            return Err(Error::Config(format!(
                "nu must be positive, got {}",
                self.nu
            )));
        }
        if !(self.hbar.is_finite() && self.hbar > 0.0) {
            return Err(Error::Config(format!(
                "hbar must be positive, got {}",
                self.hbar
            )));
        }
        if self.cutoff < 2 {
            return Err(Error::Config(format!(
                "cutoff must be at least 2, got {}",
                self.cutoff
            )));
        }
        Ok(())
    }

    /// Dimension of the joint space.
    pub fn dim(&self) -> usize {
        2 * self.cutoff
    }

    /// Absolute Fock numbers of the retained levels, lowest first.
    pub fn fock_levels(&self) -> std::ops::Range<usize> {
        self.fock_offset..self.fock_offset + self.cutoff
    }

    /// Position of absolute Fock number `n` inside the retained window.
    pub fn local_level(&self, n: usize) -> Result<usize> {
        if self.fock_levels().contains(&n) {
            Ok(n - self.fock_offset)
        } else {
            Err(Error::Index {
                index: n,
                limit: self.fock_offset + self.cutoff,
            })
        }
    }

    /// Flat matrix index of a basis state.
    pub fn index(&self, state: BasisIndex) -> Result<usize> {
        let local = self.local_level(state.fock)?;
        Ok(match state.internal {
            Internal::Ground => local,
            Internal::Excited => self.cutoff + local,
        })
    }
}

/// Internal (electronic) state of the ion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Internal {
    Ground,
    Excited,
}

/// A product basis state `|internal, fock⟩` with an absolute Fock number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BasisIndex {
    pub internal: Internal,
    pub fock: usize,
}

impl BasisIndex {
    pub fn ground(fock: usize) -> Self {
        Self {
            internal: Internal::Ground,
            fock,
        }
    }

    pub fn excited(fock: usize) -> Self {
        Self {
            internal: Internal::Excited,
            fock,
        }
    }
}

/// Sign of the exponent in `exp(∓ i η (a† + a))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    /// `exp(-i η (a† + a))`, the factor multiplying `|e⟩⟨g|`.
    Plus,
    /// `exp(+i η (a† + a))`.
    Minus,
}

impl Sign {
    fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// Creation and annihilation operators on the retained Fock levels.
///
/// `⟨n-1|a|n⟩ = √n` with absolute `n`; the creation operator is the
/// conjugate transpose of the annihilation operator.
pub fn ladder_operators(cfg: &SystemConfig) -> Result<(Operator, Operator)> {
    cfg.validate()?;
    let c = cfg.cutoff;
    let mut annihilation = Operator::zeros(c, c);
    for i in 1..c {
        let n = (cfg.fock_offset + i) as f64;
        annihilation[(i - 1, i)] = Complex64::new(n.sqrt(), 0.0);
    }
    let creation = annihilation.adjoint();
    Ok((creation, annihilation))
}

/// Number operator `diag(n)` over the retained levels.
///
/// Built directly rather than as `a† a` so that a shifted window keeps the
/// correct energy on its lowest level.
pub fn number_operator(cfg: &SystemConfig) -> Result<Operator> {
    cfg.validate()?;
    let diag: Vec<Complex64> = cfg
        .fock_levels()
        .map(|n| Complex64::new(n as f64, 0.0))
        .collect();
    Ok(Operator::from_diagonal(&DVector::from_vec(diag)))
}

/// `exp(sign · (-i) · η · (a† + a))` on the truncated Fock space.
///
/// The exponent is diagonalized as a real symmetric matrix, so the result is
/// exactly unitary at the working cutoff. Elements within a few levels of
/// the truncation edge deviate from the untruncated operator.
pub fn displacement_exponential(cfg: &SystemConfig, sign: Sign) -> Result<Operator> {
    cfg.validate()?;
    let c = cfg.cutoff;
    let mut position = DMatrix::<f64>::zeros(c, c);
    for i in 1..c {
        let amp = ((cfg.fock_offset + i) as f64).sqrt();
        position[(i - 1, i)] = amp;
        position[(i, i - 1)] = amp;
    }
    let eig = SymmetricEigen::new(position);
    let scale = -sign.value() * cfg.eta;
    let phases: Vec<Complex64> = eig
        .eigenvalues
        .iter()
        .map(|&lambda| Complex64::from_polar(1.0, scale * lambda))
        .collect();
    let vectors = eig.eigenvectors.map(|v| Complex64::new(v, 0.0));
    let mut scaled = vectors.clone();
    for (mut column, phase) in scaled.column_iter_mut().zip(&phases) {
        column *= *phase;
    }
    Ok(scaled * vectors.transpose())
}

/// Interaction Hamiltonian for one constant pulse.
///
/// `H = -Δ |e⟩⟨e| + ν n̂ + (Ω/2) (e^{iφ} |e⟩⟨g| ⊗ D + h.c.)` with
/// `D = exp(-i η (a† + a))`.
pub fn build_hamiltonian(cfg: &SystemConfig, p: &PulseParams) -> Result<Operator> {
    cfg.validate()?;
    p.check_finite()?;
    let c = cfg.cutoff;
    let mut h = Operator::zeros(2 * c, 2 * c);
    for (i, n) in cfg.fock_levels().enumerate() {
        let osc = cfg.nu * n as f64;
        h[(i, i)] = Complex64::new(osc, 0.0);
        h[(c + i, c + i)] = Complex64::new(osc - p.delta, 0.0);
    }
    if p.omega != 0.0 {
        let d = displacement_exponential(cfg, Sign::Plus)?;
        let coupling = Complex64::from_polar(0.5 * p.omega, p.phi);
        let upper = d.map(|z| z * coupling);
        h.view_mut((c, 0), (c, c)).copy_from(&upper);
        h.view_mut((0, c), (c, c)).copy_from(&upper.adjoint());
    }
    Ok(h)
}

/// `exp(-i H t)` for Hermitian `H` and `t ≥ 0`.
pub fn propagate(h: &Operator, t: f64) -> Result<Operator> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::param(
            "t",
            format!("duration must be finite and >= 0, got {t}"),
        ));
    }
    Ok(HermitianSpectrum::decompose(h)?.propagator(t))
}

/// Blue-sideband rotation `exp(i (θ/2) (e^{iφ} σ⁺ a† + e^{-iφ} σ⁻ a))`.
///
/// Lamb-Dicke, resonant, first-order model; used as an analytic baseline.
pub fn ideal_bsb_propagator(cfg: &SystemConfig, theta: f64, phi: f64) -> Result<Operator> {
    cfg.validate()?;
    if !theta.is_finite() || !phi.is_finite() {
        return Err(Error::param(
            "theta",
            "rotation angle and phase must be finite",
        ));
    }
    let c = cfg.cutoff;
    let (creation, _) = ladder_operators(cfg)?;
    let mut generator = Operator::zeros(2 * c, 2 * c);
    let upper = creation.map(|z| z * Complex64::from_polar(1.0, phi));
    generator.view_mut((c, 0), (c, c)).copy_from(&upper);
    generator
        .view_mut((0, c), (c, c))
        .copy_from(&upper.adjoint());
    Ok(HermitianSpectrum::decompose(&generator)?.evolve(-0.5 * theta))
}

/// Largest elementwise `|H - H†|`.
pub fn hermiticity_error(h: &Operator) -> f64 {
    let n = h.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((h[(i, j)] - h[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Largest elementwise `|U† U - I|`.
pub fn unitarity_error(u: &Operator) -> f64 {
    let mut defect = u.adjoint() * u;
    for i in 0..defect.nrows() {
        defect[(i, i)] -= Complex64::new(1.0, 0.0);
    }
    defect.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Eigendecomposition `H = V Λ V†` of a Hermitian operator.
///
/// Cheap to evaluate at many durations once built.
#[derive(Debug, Clone)]
pub struct HermitianSpectrum {
    values: DVector<f64>,
    vectors: Operator,
    vectors_adjoint: Operator,
}

impl HermitianSpectrum {
    pub fn decompose(h: &Operator) -> Result<Self> {
        if !h.is_square() {
            return Err(Error::Shape {
                expected: (h.nrows(), h.nrows()),
                found: h.shape(),
            });
        }
        let deviation = hermiticity_error(h);
        let scale = h.iter().map(|z| z.norm()).fold(1.0_f64, f64::max);
        if !(deviation <= HERMITICITY_TOLERANCE * scale) {
            return Err(Error::NotHermitian { deviation });
        }
        let eig = SymmetricEigen::new(h.clone());
        let vectors_adjoint = eig.eigenvectors.adjoint();
        Ok(Self {
            values: eig.eigenvalues,
            vectors: eig.eigenvectors,
            vectors_adjoint,
        })
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `exp(-i H t)`.
    pub fn propagator(&self, t: f64) -> Operator {
        self.evolve(t)
    }

    /// `exp(-i H s)` for any real `s`, including negative.
    pub(crate) fn evolve(&self, s: f64) -> Operator {
        let mut scaled = self.vectors.clone();
        for (mut column, &lambda) in scaled.column_iter_mut().zip(self.values.iter()) {
            column *= Complex64::from_polar(1.0, -lambda * s);
        }
        scaled * &self.vectors_adjoint
    }

    /// `exp(-i H t) · state`, without forming the propagator.
    pub(crate) fn apply(&self, t: f64, state: &Operator) -> Operator {
        let mut projected = &self.vectors_adjoint * state;
        for (mut row, &lambda) in projected.row_iter_mut().zip(self.values.iter()) {
            row *= Complex64::from_polar(1.0, -lambda * t);
        }
        &self.vectors * projected
    }
}

/// Diagonal of the frame change `|g⟩⟨g| + e^{iφ} |e⟩⟨e|`.
///
/// `H(φ) = R H(0) R†`, so a whole family of pulses that differ only in phase
/// shares one eigendecomposition.
pub(crate) fn phase_frame(cutoff: usize, phi: f64) -> Vec<Complex64> {
    let excited = Complex64::from_polar(1.0, phi);
    (0..2 * cutoff)
        .map(|i| {
            if i < cutoff {
                Complex64::new(1.0, 0.0)
            } else {
                excited
            }
        })
        .collect()
}
