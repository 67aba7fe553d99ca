//! Sensitivity of an optimized pulse to timing and phase errors.
//!
//! A sweep shifts the durations (or phases) of the selected pulses by a
//! common offset, rebuilds the composite unitary and records a transition
//! probability. Duration offsets model a clock error shared by all pulses;
//! phase offsets leave the first pulse alone because its phase is the
//! reference for the others.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fockspace::{BasisIndex, Operator, SystemConfig, TIME_UNIT_MICROSECONDS};
use crate::objective::excitation_profile;
use crate::pulses::{composite_unitary, CompositePulse};

/// Dimensionless duration of `micros` microseconds at `ν = 2π · 1 MHz`.
pub fn microseconds_to_time(micros: f64) -> f64 {
    micros / TIME_UNIT_MICROSECONDS
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    DurationOffset,
    PhaseOffset,
}

/// Pulses perturbed by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseSelection {
    /// Every duration, or every phase except the first pulse's.
    All,
    /// Only the pulse with this index.
    Single(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub which: PulseSelection,
    /// Closed interval of offsets; must contain 0.
    pub range: (f64, f64),
    pub points: usize,
}

impl SweepSpec {
    pub fn new(axis: SweepAxis, range: (f64, f64), points: usize) -> Result<Self> {
        let spec = Self {
            axis,
            which: PulseSelection::All,
            range,
            points,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.range;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Config(format!(
                "sweep range [{lo}, {hi}] is empty or not finite"
            )));
        }
        if !(lo <= 0.0 && hi >= 0.0) {
            return Err(Error::Config(format!(
                "sweep range [{lo}, {hi}] must contain 0"
            )));
        }
        if self.points < 3 {
            return Err(Error::Config(format!(
                "a sweep needs at least 3 points, got {}",
                self.points
            )));
        }
        Ok(())
    }

    /// Evenly spaced offsets across the range. An exact zero replaces the
    /// sample nearest to it, so the unperturbed pulse is always included.
    pub fn offsets(&self) -> Vec<f64> {
        let (lo, hi) = self.range;
        let step = (hi - lo) / (self.points - 1) as f64;
        let mut offsets: Vec<f64> = (0..self.points)
            .map(|i| {
                if i + 1 == self.points {
                    hi
                } else {
                    lo + step * i as f64
                }
            })
            .collect();
        let nearest = (0..offsets.len())
            .min_by(|&a, &b| offsets[a].abs().total_cmp(&offsets[b].abs()))
            .expect("at least three offsets");
        offsets[nearest] = 0.0;
        offsets
    }
}

/// The probability recorded at each sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Probe {
    /// `|⟨to|U|from⟩|²`.
    Transfer { from: BasisIndex, to: BasisIndex },
    /// Probability that `|g, fock⟩` ends in the excited manifold.
    Excitation { fock: usize },
}

impl Probe {
    /// `|g,0⟩ → |e,1⟩`.
    pub fn w01() -> Self {
        Probe::Transfer {
            from: BasisIndex::ground(0),
            to: BasisIndex::excited(1),
        }
    }

    pub fn evaluate(&self, cfg: &SystemConfig, u: &Operator) -> Result<f64> {
        match *self {
            Probe::Transfer { from, to } => Ok(u[(cfg.index(to)?, cfg.index(from)?)].norm_sqr()),
            Probe::Excitation { fock } => {
                let local = cfg.local_level(fock)?;
                Ok(excitation_profile(u)?[local])
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub offset: f64,
    pub probability: f64,
    /// Set when a perturbed duration went negative and was clamped to 0.
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub spec: SweepSpec,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    pub fn clamped(&self) -> bool {
        self.points.iter().any(|p| p.clamped)
    }

    /// The point at offset 0.
    pub fn nominal(&self) -> Option<&SweepPoint> {
        self.points.iter().find(|p| p.offset == 0.0)
    }

    /// Widest run of consecutive points with probability at least
    /// `threshold`, as `(first offset, last offset)`.
    pub fn widest_window(&self, threshold: f64) -> Option<(f64, f64)> {
        let mut best: Option<(f64, f64)> = None;
        let mut start: Option<f64> = None;
        for (i, p) in self.points.iter().enumerate() {
            if p.probability >= threshold {
                let first = *start.get_or_insert(p.offset);
                let last_in_run = self
                    .points
                    .get(i + 1)
                    .is_none_or(|next| next.probability < threshold);
                if last_in_run {
                    if best.is_none_or(|(a, b)| p.offset - first > b - a) {
                        best = Some((first, p.offset));
                    }
                    start = None;
                }
            }
        }
        best
    }

    /// Smallest probability over points with `|offset| <= radius`.
    pub fn min_within(&self, radius: f64) -> f64 {
        self.points
            .iter()
            .filter(|p| p.offset.abs() <= radius)
            .map(|p| p.probability)
            .fold(f64::INFINITY, f64::min)
    }

    /// Interior local extrema whose rise and fall both exceed `tolerance`.
    pub fn turning_points(&self, tolerance: f64) -> usize {
        self.points
            .windows(3)
            .filter(|w| {
                let left = w[1].probability - w[0].probability;
                let right = w[2].probability - w[1].probability;
                left.abs() > tolerance && right.abs() > tolerance && left.signum() != right.signum()
            })
            .count()
    }

    /// Rows `offset,probability` with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "offset,probability")?;
        for p in &self.points {
            writeln!(out, "{:.16e},{:.16e}", p.offset, p.probability)?;
        }
        Ok(())
    }
}

/// Applies one offset to a copy of `cp`. Returns whether any duration had
/// to be clamped at 0.
pub fn perturb(
    cp: &CompositePulse,
    spec: &SweepSpec,
    offset: f64,
) -> Result<(CompositePulse, bool)> {
    let mut out = cp.clone();
    let count = out.len();
    if let PulseSelection::Single(k) = spec.which {
        if k >= count {
            return Err(Error::Index {
                index: k,
                limit: count,
            });
        }
    }
    let mut clamped = false;
    for (k, p) in out.pulses_mut().iter_mut().enumerate() {
        let selected = match (spec.which, spec.axis) {
            (PulseSelection::Single(i), _) => i == k,
            (PulseSelection::All, SweepAxis::DurationOffset) => true,
            (PulseSelection::All, SweepAxis::PhaseOffset) => k > 0,
        };
        if !selected {
            continue;
        }
        match spec.axis {
            SweepAxis::DurationOffset => {
                p.t += offset;
                if p.t < 0.0 {
                    p.t = 0.0;
                    clamped = true;
                }
            }
            SweepAxis::PhaseOffset => p.phi += offset,
        }
    }
    Ok((out, clamped))
}

/// Evaluates `probe` at every offset of `spec`, in offset order.
pub fn sweep(
    cfg: &SystemConfig,
    cp: &CompositePulse,
    spec: &SweepSpec,
    probe: &Probe,
) -> Result<SweepResult> {
    spec.validate()?;
    cfg.validate()?;
    let points = spec
        .offsets()
        .into_par_iter()
        .map(|offset| {
            let (perturbed, clamped) = perturb(cp, spec, offset)?;
            let u = composite_unitary(cfg, &perturbed)?;
            Ok(SweepPoint {
                offset,
                probability: probe.evaluate(cfg, &u)?,
                clamped,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        spec: *spec,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulses::{analytic_swap_parameters, PulseParams};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn swap_pulse() -> (SystemConfig, CompositePulse) {
        let cfg = SystemConfig::with_cutoff(3);
        let cp = analytic_swap_parameters(&cfg, 0.1).unwrap();
        (cfg, cp)
    }

    #[test]
    fn spec_validation() {
        assert!(SweepSpec::new(SweepAxis::PhaseOffset, (0.1, 1.0), 5).is_err());
        assert!(SweepSpec::new(SweepAxis::PhaseOffset, (-1.0, 1.0), 2).is_err());
        assert!(SweepSpec::new(SweepAxis::PhaseOffset, (1.0, -1.0), 5).is_err());
        assert!(SweepSpec::new(SweepAxis::PhaseOffset, (0.0, 1.0), 3).is_ok());
    }

    #[test]
    fn offsets_span_range_and_hit_zero() {
        let spec = SweepSpec::new(SweepAxis::DurationOffset, (-100.0, 100.0), 8).unwrap();
        let offsets = spec.offsets();
        assert_eq!(offsets.len(), 8);
        assert_eq!(offsets[0], -100.0);
        assert_eq!(offsets[7], 100.0);
        assert!(offsets.contains(&0.0));
        assert!(offsets.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn ten_microseconds() {
        assert_abs_diff_eq!(
            microseconds_to_time(10.0),
            62.83185307179586,
            epsilon = 1e-12
        );
    }

    #[test]
    fn nominal_point_matches_direct_evaluation() {
        let (cfg, cp) = swap_pulse();
        let spec = SweepSpec::new(SweepAxis::DurationOffset, (-50.0, 50.0), 7).unwrap();
        let result = sweep(&cfg, &cp, &spec, &Probe::w01()).unwrap();
        let direct = Probe::w01()
            .evaluate(&cfg, &composite_unitary(&cfg, &cp).unwrap())
            .unwrap();
        assert_eq!(
            result.nominal().unwrap().probability.to_bits(),
            direct.to_bits()
        );
        assert!(result
            .points
            .iter()
            .all(|p| (0.0..=1.0).contains(&p.probability)));
    }

    #[test]
    fn phase_offsets_skip_the_reference_pulse() {
        let (_, cp) = swap_pulse();
        let spec = SweepSpec::new(SweepAxis::PhaseOffset, (-1.0, 1.0), 3).unwrap();
        let (shifted, clamped) = perturb(&cp, &spec, 0.5).unwrap();
        assert!(!clamped);
        assert_eq!(shifted.pulses()[0].phi, cp.pulses()[0].phi);
        for k in 1..3 {
            assert_abs_diff_eq!(shifted.pulses()[k].phi, cp.pulses()[k].phi + 0.5);
        }
    }

    #[test]
    fn single_pulse_selection() {
        let (_, cp) = swap_pulse();
        let spec = SweepSpec {
            which: PulseSelection::Single(1),
            ..SweepSpec::new(SweepAxis::DurationOffset, (-1.0, 1.0), 3).unwrap()
        };
        let (shifted, _) = perturb(&cp, &spec, 2.0).unwrap();
        assert_eq!(shifted.pulses()[0].t, cp.pulses()[0].t);
        assert_eq!(shifted.pulses()[1].t, cp.pulses()[1].t + 2.0);
        let bad = SweepSpec {
            which: PulseSelection::Single(3),
            ..spec
        };
        assert!(matches!(perturb(&cp, &bad, 1.0), Err(Error::Index { .. })));
    }

    #[test]
    fn negative_durations_are_clamped_and_flagged() {
        let cfg = SystemConfig::with_cutoff(3);
        let cp = CompositePulse::new(vec![PulseParams::new(1.0, 0.1, 0.0, 5.0)]).unwrap();
        let spec = SweepSpec::new(SweepAxis::DurationOffset, (-10.0, 10.0), 5).unwrap();
        let result = sweep(&cfg, &cp, &spec, &Probe::w01()).unwrap();
        assert!(result.clamped());
        assert!(result.points[0].clamped);
        assert!(result.points[0].probability < 1e-24);
        assert!(!result.points[4].clamped);
    }

    #[test]
    fn excitation_probe_sums_the_excited_block() {
        let (cfg, cp) = swap_pulse();
        let u = composite_unitary(&cfg, &cp).unwrap();
        let direct = Probe::w01().evaluate(&cfg, &u).unwrap();
        let excited = Probe::Excitation { fock: 0 }.evaluate(&cfg, &u).unwrap();
        assert!(excited >= direct);
        assert!(excited <= 1.0 + 1e-12);
    }

    #[test]
    fn window_and_turning_points() {
        let probabilities = [0.5, 0.995, 0.999, 0.98, 0.992, 0.993, 0.994, 0.2];
        let result = SweepResult {
            spec: SweepSpec::new(SweepAxis::PhaseOffset, (-PI, PI), 8).unwrap(),
            points: probabilities
                .iter()
                .enumerate()
                .map(|(i, &p)| SweepPoint {
                    offset: i as f64,
                    probability: p,
                    clamped: false,
                })
                .collect(),
        };
        assert_eq!(result.widest_window(0.99), Some((4.0, 6.0)));
        assert_eq!(result.widest_window(0.9999), None);
        assert_eq!(result.turning_points(1e-4), 3);
        assert_abs_diff_eq!(result.min_within(2.0), 0.5);
    }

    #[test]
    fn csv_rows() {
        let (cfg, cp) = swap_pulse();
        let spec = SweepSpec::new(SweepAxis::PhaseOffset, (-0.5, 0.5), 3).unwrap();
        let result = sweep(&cfg, &cp, &spec, &Probe::w01()).unwrap();
        let mut buf = Vec::new();
        result.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("offset,probability\n-5.0000000000000000e-1,"));
    }
}
