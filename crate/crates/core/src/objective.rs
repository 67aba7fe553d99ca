//! Target transitions, the modulus loss, and excitation metrics.
//!
//! The loss compares elementwise moduli, `‖ |U| − |U_target| ‖_F`, restricted
//! to a mask. Taking moduli removes the global phase and every per-element
//! phase, which a population readout cannot see anyway. A phase-sensitive
//! loss `‖U − e^{iφ_G} U'_target‖` would need an extra free phase and is not
//! provided.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fockspace::{Operator, SystemConfig};

/// Target modulus matrix and the entries the loss compares.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetSpec {
    target_modulus: DMatrix<f64>,
    mask: DMatrix<bool>,
}

impl TargetSpec {
    pub fn new(target_modulus: DMatrix<f64>, mask: DMatrix<bool>) -> Result<Self> {
        if target_modulus.shape() != mask.shape() || !target_modulus.is_square() {
            return Err(Error::Shape {
                expected: target_modulus.shape(),
                found: mask.shape(),
            });
        }
        if target_modulus.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::param("target_modulus", "entries must lie in [0, 1]"));
        }
        Ok(Self {
            target_modulus,
            mask,
        })
    }

    pub fn target_modulus(&self) -> &DMatrix<f64> {
        &self.target_modulus
    }

    pub fn mask(&self) -> &DMatrix<bool> {
        &self.mask
    }

    pub fn dim(&self) -> usize {
        self.target_modulus.nrows()
    }
}

/// Modulus permutation exchanging `|g,n⟩` and `|e,n+1⟩`; every entry compared.
///
/// `n` is the local level inside the retained window.
pub fn swap_target(cutoff: usize, n: usize) -> Result<TargetSpec> {
    if n + 1 >= cutoff {
        return Err(Error::Index {
            index: n + 1,
            limit: cutoff,
        });
    }
    let dim = 2 * cutoff;
    let (g, e) = (n, cutoff + n + 1);
    let mut target = DMatrix::<f64>::identity(dim, dim);
    target[(g, g)] = 0.0;
    target[(e, e)] = 0.0;
    target[(g, e)] = 1.0;
    target[(e, g)] = 1.0;
    TargetSpec::new(target, DMatrix::from_element(dim, dim, true))
}

/// Ground-to-ground quadrant equal to the identity except `(g n, g n) = 0`.
///
/// Only that quadrant is compared, so `|g,n⟩` must leave the ground manifold
/// while every other `|g,m⟩` stays put; the excited blocks are free.
pub fn shelving_target(cutoff: usize, n: usize) -> Result<TargetSpec> {
    if n >= cutoff {
        return Err(Error::Index {
            index: n,
            limit: cutoff,
        });
    }
    let dim = 2 * cutoff;
    let mut target = DMatrix::<f64>::zeros(dim, dim);
    for i in 0..cutoff {
        if i != n {
            target[(i, i)] = 1.0;
        }
    }
    let mask = DMatrix::from_fn(dim, dim, |i, j| i < cutoff && j < cutoff);
    TargetSpec::new(target, mask)
}

/// Named target presets with absolute Fock numbers, e.g. `swap(0)` or `shelve(30)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TargetPreset {
    Swap(usize),
    Shelve(usize),
}

impl TargetPreset {
    /// The absolute Fock number the preset addresses.
    pub fn fock(&self) -> usize {
        match *self {
            TargetPreset::Swap(n) | TargetPreset::Shelve(n) => n,
        }
    }

    pub fn build(&self, cfg: &SystemConfig) -> Result<TargetSpec> {
        cfg.validate()?;
        let local = cfg.local_level(self.fock())?;
        match self {
            TargetPreset::Swap(_) => swap_target(cfg.cutoff, local),
            TargetPreset::Shelve(_) => shelving_target(cfg.cutoff, local),
        }
    }
}

impl fmt::Display for TargetPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TargetPreset::Swap(n) => write!(f, "swap({n})"),
            TargetPreset::Shelve(n) => write!(f, "shelve({n})"),
        }
    }
}

impl FromStr for TargetPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::param(
                "target",
                format!("expected `swap(n)` or `shelve(n)`, got `{s}`"),
            )
        };
        let s = s.trim();
        let open = s.find('(').ok_or_else(bad)?;
        let inner = s[open + 1..].strip_suffix(')').ok_or_else(bad)?;
        let n: usize = inner.trim().parse().map_err(|_| bad())?;
        match s[..open].trim() {
            "swap" => Ok(TargetPreset::Swap(n)),
            "shelve" => Ok(TargetPreset::Shelve(n)),
            _ => Err(bad()),
        }
    }
}

impl Serialize for TargetPreset {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TargetPreset {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Frobenius distance between masked modulus matrices.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LossValue(pub f64);

impl LossValue {
    pub fn value(self) -> f64 {
        self.0
    }
}

impl fmt::Display for LossValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6e}", self.0)
    }
}

/// `‖ mask ∘ (|U| − target) ‖_F`.
pub fn modulus_loss(u: &Operator, spec: &TargetSpec) -> Result<LossValue> {
    if u.shape() != spec.target_modulus.shape() {
        return Err(Error::Shape {
            expected: spec.target_modulus.shape(),
            found: u.shape(),
        });
    }
    let sum: f64 = u
        .iter()
        .zip(spec.target_modulus.iter())
        .zip(spec.mask.iter())
        .map(|((z, &t), &m)| {
            let w = if m { 1.0 } else { 0.0 };
            let d = w * (z.norm() - t);
            d * d
        })
        .sum();
    Ok(LossValue(sum.sqrt()))
}

/// Elementwise modulus `|U_ij|`.
pub fn modulus_matrix(u: &Operator) -> DMatrix<f64> {
    u.map(|z| z.norm())
}

/// Probability that `|g,n⟩` ends in the excited manifold, for each local `n`.
pub fn excitation_profile(u: &Operator) -> Result<Vec<f64>> {
    let dim = u.nrows();
    if !u.is_square() || dim % 2 != 0 {
        return Err(Error::Shape {
            expected: (dim - dim % 2, dim - dim % 2),
            found: u.shape(),
        });
    }
    let c = dim / 2;
    Ok((0..c)
        .map(|n| (c..dim).map(|r| u[(r, n)].norm_sqr()).sum())
        .collect())
}

/// Renders a modulus matrix with three decimals, block rule between the
/// ground and excited halves.
pub struct ModulusTable<'a>(pub &'a DMatrix<f64>);

impl fmt::Display for ModulusTable<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = self.0;
        let half = m.ncols() / 2;
        for i in 0..m.nrows() {
            if i == half && half > 0 {
                let width = m.ncols() * 6 + 1;
                writeln!(f, "{}", "-".repeat(width))?;
            }
            for j in 0..m.ncols() {
                if j == half && half > 0 {
                    f.write_str(" |")?;
                }
                write!(f, "{:6.3}", m[(i, j)])?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}
