//! Simulated phonon thermometry and the population correction.
//!
//! One composite pulse per Fock state of a window is designed to shelve
//! `|g,n⟩` into the excited manifold. Reading out the excited population
//! after pulse `m` gives `M_m = Σ_n a_mn P_n`, where `a_mn` is the
//! probability that pulse `m` excites `|g,n⟩`. Restricting the sum to the
//! window and solving `a R = M` corrects for imperfect selectivity.
//!
//! The states are assumed diagonal in the Fock basis (thermal or other
//! incoherent mixtures); coherences between Fock states are ignored.

use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fockspace::SystemConfig;
use crate::objective::{excitation_profile, TargetPreset};
use crate::optimizer::{design_pulse_with_progress, ProgressEvent, PsoConfig, RefineConfig};
use crate::pulses::{composite_unitary, CompositePulse, Regime};

const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// Largest coefficient-matrix condition number accepted by the correction.
pub const MAX_CONDITION: f64 = 1e8;

/// Populations `P_n` over Fock numbers `0..len`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PhononDistribution {
    populations: Vec<f64>,
}

impl PhononDistribution {
    pub fn new(populations: Vec<f64>) -> Result<Self> {
        if populations.len() < 2 {
            return Err(Error::param("populations", "need at least two Fock levels"));
        }
        if let Some((n, p)) = populations
            .iter()
            .enumerate()
            .find(|(_, p)| !(p.is_finite() && **p >= 0.0))
        {
            return Err(Error::param(
                "populations",
                format!("P_{n} = {p} is not a nonnegative number"),
            ));
        }
        let total: f64 = populations.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::param(
                "populations",
                format!("populations sum to {total}, expected 1 (normalize the input)"),
            ));
        }
        Ok(Self { populations })
    }

    /// A distribution on `0..len` that is zero outside the listed entries.
    pub fn from_entries(len: usize, entries: &[(usize, f64)]) -> Result<Self> {
        let mut populations = vec![0.0; len];
        for &(n, p) in entries {
            let slot = populations.get_mut(n).ok_or(Error::Index {
                index: n,
                limit: len,
            })?;
            *slot += p;
        }
        Self::new(populations)
    }

    pub fn populations(&self) -> &[f64] {
        &self.populations
    }

    pub fn len(&self) -> usize {
        self.populations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.populations.is_empty()
    }

    pub fn get(&self, n: usize) -> f64 {
        self.populations.get(n).copied().unwrap_or(0.0)
    }

    pub fn mean(&self) -> f64 {
        self.populations
            .iter()
            .enumerate()
            .map(|(n, p)| n as f64 * p)
            .sum()
    }
}

impl TryFrom<Vec<f64>> for PhononDistribution {
    type Error = Error;

    fn try_from(populations: Vec<f64>) -> Result<Self> {
        Self::new(populations)
    }
}

impl From<PhononDistribution> for Vec<f64> {
    fn from(d: PhononDistribution) -> Self {
        d.populations
    }
}

/// Thermal populations `n̄ⁿ / (1 + n̄)ⁿ⁺¹` on `0..big_cutoff`, renormalized.
pub fn thermal_distribution(nbar: f64, big_cutoff: usize) -> Result<PhononDistribution> {
    if !(nbar.is_finite() && nbar >= 0.0) {
        return Err(Error::param("nbar", format!("must be >= 0, got {nbar}")));
    }
    if big_cutoff < 2 {
        return Err(Error::param(
            "big_cutoff",
            format!("must be >= 2, got {big_cutoff}"),
        ));
    }
    let ratio = nbar / (1.0 + nbar);
    let mut populations: Vec<f64> = (0..big_cutoff)
        .map(|n| ratio.powi(n as i32) / (1.0 + nbar))
        .collect();
    let total: f64 = populations.iter().sum();
    for p in &mut populations {
        *p /= total;
    }
    PhononDistribution::new(populations)
}

/// `a[m][j]`: probability that `pulses[m]` excites `|g, window[j]⟩`.
pub fn coefficient_matrix(
    cfg: &SystemConfig,
    pulses: &[CompositePulse],
    window: &[usize],
) -> Result<DMatrix<f64>> {
    check_window(pulses, window)?;
    let columns = window
        .iter()
        .map(|&n| cfg.local_level(n))
        .collect::<Result<Vec<_>>>()?;
    let mut a = DMatrix::zeros(pulses.len(), window.len());
    for (m, cp) in pulses.iter().enumerate() {
        let profile = excitation_profile(&composite_unitary(cfg, cp)?)?;
        for (j, &c) in columns.iter().enumerate() {
            a[(m, j)] = profile[c];
        }
    }
    Ok(a)
}

/// Ideal shelving readout: `M_m = Σ_n excitation_m[n] · P_n`, with each
/// pulse re-evaluated on `cfg_big`.
pub fn simulate_measurements(
    cfg_big: &SystemConfig,
    pulses: &[CompositePulse],
    dist: &PhononDistribution,
) -> Result<Vec<f64>> {
    if cfg_big.fock_offset != 0 || cfg_big.cutoff != dist.len() {
        return Err(Error::Config(format!(
            "distribution covers Fock levels 0..{} but the simulation space covers {:?}",
            dist.len(),
            cfg_big.fock_levels()
        )));
    }
    pulses
        .iter()
        .map(|cp| {
            let profile = excitation_profile(&composite_unitary(cfg_big, cp)?)?;
            let m: f64 = profile
                .iter()
                .zip(dist.populations())
                .map(|(a, p)| a * p)
                .sum();
            Ok(m.clamp(0.0, 1.0))
        })
        .collect()
}

/// Replaces each ideal readout by the fraction of `shots` excited outcomes.
pub fn sample_measurements(ideal: &[f64], shots: u64, seed: u64) -> Result<Vec<f64>> {
    if shots == 0 {
        return Err(Error::param("shots", "must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ideal
        .iter()
        .map(|&p| {
            let binomial = Binomial::new(shots, p.clamp(0.0, 1.0))
                .map_err(|e| Error::param("measured", e.to_string()))?;
            Ok(binomial.sample(&mut rng) as f64 / shots as f64)
        })
        .collect()
}

/// The linear system `a R = M`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionProblem {
    pub coeff: DMatrix<f64>,
    pub measured: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correction {
    pub corrected: Vec<f64>,
    /// 2-norm condition number of the coefficient matrix.
    pub condition: f64,
}

/// Solves `a R = M` by LU factorization with partial pivoting.
pub fn correct_populations(problem: &CorrectionProblem) -> Result<Correction> {
    let a = &problem.coeff;
    if !a.is_square() {
        return Err(Error::Shape {
            expected: (a.nrows(), a.nrows()),
            found: a.shape(),
        });
    }
    if problem.measured.len() != a.nrows() {
        return Err(Error::Shape {
            expected: (a.nrows(), 1),
            found: (problem.measured.len(), 1),
        });
    }
    let condition = condition_number(a);
    if !(condition <= MAX_CONDITION) {
        return Err(Error::IllConditioned { condition });
    }
    let rhs = DVector::from_column_slice(&problem.measured);
    let solution = a.clone().lu().solve(&rhs).ok_or(Error::IllConditioned {
        condition: f64::INFINITY,
    })?;
    Ok(Correction {
        corrected: solution.iter().copied().collect(),
        condition,
    })
}

/// Ratio of extreme singular values; infinite for a singular matrix.
pub fn condition_number(a: &DMatrix<f64>) -> f64 {
    let sv = a.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

fn check_window(pulses: &[CompositePulse], window: &[usize]) -> Result<()> {
    if window.is_empty() || pulses.len() != window.len() {
        return Err(Error::Shape {
            expected: (window.len(), window.len()),
            found: (pulses.len(), window.len()),
        });
    }
    Ok(())
}

/// Everything needed to design pulses for a window and run the correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThermometrySetup {
    /// Space the pulses are designed and the coefficient matrix built in.
    pub design: SystemConfig,
    /// Space the measurements are simulated in.
    pub truth: SystemConfig,
    pub regime: Regime,
    pub pulse_count: usize,
    /// Absolute Fock numbers measured, one pulse each.
    pub window: Vec<usize>,
    pub pso: PsoConfig,
    pub refine: RefineConfig,
}

impl Default for ThermometrySetup {
    fn default() -> Self {
        Self {
            design: SystemConfig::with_cutoff(10),
            truth: SystemConfig::with_cutoff(100),
            regime: Regime::Weak,
            pulse_count: 6,
            window: vec![0, 1, 2, 3],
            pso: PsoConfig::default(),
            refine: RefineConfig::default(),
        }
    }
}

impl ThermometrySetup {
    /// A setup for a window far from the ground state.
    ///
    /// Pulses are designed on the levels `[lo - pad, hi + pad)` around the
    /// window `lo..=hi` and measured on `0..truth_cutoff`.
    pub fn shifted_window(window: Vec<usize>, pad: usize, truth_cutoff: usize) -> Result<Self> {
        let (&lo, &hi) = match (window.iter().min(), window.iter().max()) {
            (Some(lo), Some(hi)) => (lo, hi),
            _ => return Err(Error::Config("the window is empty".into())),
        };
        let offset = lo.saturating_sub(pad);
        let design = SystemConfig {
            fock_offset: offset,
            cutoff: hi + pad - offset,
            ..SystemConfig::default()
        };
        Ok(Self {
            design,
            truth: SystemConfig::with_cutoff(truth_cutoff),
            window,
            ..Self::default()
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.design.validate()?;
        self.truth.validate()?;
        if self.window.is_empty() {
            return Err(Error::Config("the window is empty".into()));
        }
        for &n in &self.window {
            self.design.local_level(n)?;
        }
        if self.truth.fock_offset != 0 {
            return Err(Error::Config(
                "the truth space must start at Fock level 0".into(),
            ));
        }
        if self.truth.fock_levels().end < self.design.fock_levels().end {
            return Err(Error::Config(format!(
                "truth space {:?} does not cover the design space {:?}",
                self.truth.fock_levels(),
                self.design.fock_levels()
            )));
        }
        if self.pulse_count == 0 {
            return Err(Error::Config("pulse_count must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseDiagnostics {
    pub fock: usize,
    pub pulse: CompositePulse,
    /// Modulus loss at design time; absent for pulses supplied by the caller.
    pub loss: Option<f64>,
    /// Excitation of every design-space level, lowest first.
    pub excitation: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermometryReport {
    pub window: Vec<usize>,
    /// True populations on the window.
    pub populations: Vec<f64>,
    pub measured: Vec<f64>,
    pub corrected: Vec<f64>,
    /// Row `m` belongs to the pulse for `window[m]`.
    pub coefficients: Vec<Vec<f64>>,
    pub condition: f64,
    pub pulses: Vec<PulseDiagnostics>,
}

impl ThermometryReport {
    /// `max_n |R_n - P_n|`.
    pub fn max_corrected_error(&self) -> f64 {
        max_deviation(&self.corrected, &self.populations)
    }

    /// `max_n |M_n - P_n|`.
    pub fn max_measured_error(&self) -> f64 {
        max_deviation(&self.measured, &self.populations)
    }

    /// Rows `n,P,M,R` with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "n,P,M,R")?;
        for (j, n) in self.window.iter().enumerate() {
            writeln!(
                out,
                "{n},{:.16e},{:.16e},{:.16e}",
                self.populations[j], self.measured[j], self.corrected[j]
            )?;
        }
        Ok(())
    }
}

fn max_deviation(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Designs one shelving pulse per window state.
pub fn design_window_pulses(
    setup: &ThermometrySetup,
    on_progress: &mut dyn FnMut(usize, &ProgressEvent),
) -> Result<Vec<(CompositePulse, f64)>> {
    setup.validate()?;
    let template = setup.regime.template(setup.pulse_count)?;
    let layout = setup.regime.layout(&setup.design, setup.pulse_count);
    setup
        .window
        .iter()
        .map(|&n| {
            let spec = TargetPreset::Shelve(n).build(&setup.design)?;
            let result = design_pulse_with_progress(
                &setup.design,
                &template,
                &layout,
                &spec,
                &setup.pso,
                &setup.refine,
                &mut |event| on_progress(n, event),
            )?;
            Ok((result.best, result.loss.value()))
        })
        .collect()
}

/// Runs the full workflow: pulse design, coefficient matrix, simulated
/// readout and correction.
pub fn run_thermometry(
    setup: &ThermometrySetup,
    dist: &PhononDistribution,
    on_progress: &mut dyn FnMut(usize, &ProgressEvent),
) -> Result<ThermometryReport> {
    let designed =
        design_window_pulses(setup, on_progress).map_err(|e| e.in_stage("pulse design"))?;
    let (pulses, losses): (Vec<_>, Vec<_>) = designed.into_iter().unzip();
    let losses: Vec<Option<f64>> = losses.into_iter().map(Some).collect();
    assemble_report(setup, &pulses, &losses, dist)
}

/// Runs the workflow with pulses designed earlier, one per window state.
pub fn evaluate_thermometry(
    setup: &ThermometrySetup,
    pulses: &[CompositePulse],
    dist: &PhononDistribution,
) -> Result<ThermometryReport> {
    setup.validate()?;
    assemble_report(setup, pulses, &vec![None; pulses.len()], dist)
}

fn assemble_report(
    setup: &ThermometrySetup,
    pulses: &[CompositePulse],
    losses: &[Option<f64>],
    dist: &PhononDistribution,
) -> Result<ThermometryReport> {
    let window = &setup.window;
    let coeff = coefficient_matrix(&setup.design, pulses, window)
        .map_err(|e| e.in_stage("coefficient matrix"))?;
    let measured = simulate_measurements(&setup.truth, pulses, dist)
        .map_err(|e| e.in_stage("measurement simulation"))?;
    let correction = correct_populations(&CorrectionProblem {
        coeff: coeff.clone(),
        measured: measured.clone(),
    })
    .map_err(|e| e.in_stage("population correction"))?;

    let mut diagnostics = Vec::with_capacity(pulses.len());
    for ((&n, cp), loss) in window.iter().zip(pulses).zip(losses) {
        let u = composite_unitary(&setup.design, cp).map_err(|e| e.in_stage("diagnostics"))?;
        diagnostics.push(PulseDiagnostics {
            fock: n,
            pulse: cp.clone(),
            loss: *loss,
            excitation: excitation_profile(&u)?,
        });
    }
    Ok(ThermometryReport {
        window: window.clone(),
        populations: window.iter().map(|&n| dist.get(n)).collect(),
        measured,
        corrected: correction.corrected,
        coefficients: coeff
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect(),
        condition: correction.condition,
        pulses: diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulses::PulseParams;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    #[test]
    fn thermal_ground_state() {
        let d = thermal_distribution(0.0, 10).unwrap();
        assert_eq!(d.get(0), 1.0);
        assert!(d.populations()[1..].iter().all(|&p| p == 0.0));
    }

    #[test]
    fn thermal_geometric_populations() {
        let d = thermal_distribution(1.0, 100).unwrap();
        for (n, expected) in [(0, 0.5), (1, 0.25), (2, 0.125)] {
            assert_abs_diff_eq!(d.get(n), expected, epsilon = 1e-12);
        }
        let total: f64 = d.populations().iter().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-9);
        // sum n / 2^(n+1) over n = 0..inf is 1
        assert_abs_diff_eq!(d.mean(), 1.0, epsilon = 1e-6);
    }

    #[test]
    fn thermal_rejects_negative_mean() {
        assert!(matches!(
            thermal_distribution(-0.1, 10),
            Err(Error::Parameter { name: "nbar", .. })
        ));
    }

    #[test]
    fn distribution_must_be_normalized() {
        let err = PhononDistribution::new(vec![0.5, 0.4]).unwrap_err();
        assert!(err.to_string().contains("normalize"));
        assert!(PhononDistribution::new(vec![0.5, -0.1, 0.6]).is_err());
        assert!(PhononDistribution::from_entries(5, &[(7, 1.0)]).is_err());
    }

    #[test]
    fn identity_coefficients_pass_measurements_through() {
        let problem = CorrectionProblem {
            coeff: DMatrix::identity(3, 3),
            measured: vec![0.2, 0.5, 0.3],
        };
        let c = correct_populations(&problem).unwrap();
        assert_eq!(c.corrected, problem.measured);
        assert_abs_diff_eq!(c.condition, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn solve_recovers_known_populations() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let k = 5;
        let a = DMatrix::from_fn(k, k, |i, j| {
            if i == j {
                0.9 + 0.1 * rng.random::<f64>()
            } else {
                0.1 * rng.random::<f64>()
            }
        });
        let truth: Vec<f64> = (0..k).map(|_| rng.random()).collect();
        let m = &a * DVector::from_column_slice(&truth);
        let c = correct_populations(&CorrectionProblem {
            coeff: a,
            measured: m.iter().copied().collect(),
        })
        .unwrap();
        for (r, p) in c.corrected.iter().zip(&truth) {
            assert_abs_diff_eq!(r, p, epsilon = 1e-10);
        }
    }

    #[test]
    fn singular_coefficients_are_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 0.5]);
        let err = correct_populations(&CorrectionProblem {
            coeff: a,
            measured: vec![0.1, 0.1],
        })
        .unwrap_err();
        assert!(matches!(err, Error::IllConditioned { .. }));
        let near = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0 + 1e-10]);
        match correct_populations(&CorrectionProblem {
            coeff: near,
            measured: vec![0.1, 0.1],
        }) {
            Err(Error::IllConditioned { condition }) => assert!(condition > 1e8),
            other => panic!("expected ill-conditioning, got {other:?}"),
        }
    }

    #[test]
    fn correction_checks_shapes() {
        let err = correct_populations(&CorrectionProblem {
            coeff: DMatrix::identity(2, 2),
            measured: vec![0.1],
        })
        .unwrap_err();
        assert!(matches!(err, Error::Shape { .. }));
    }

    #[test]
    fn idle_pulses_excite_nothing() {
        let cfg = SystemConfig::with_cutoff(4);
        let idle = CompositePulse::new(vec![PulseParams::new(1.0, 0.0, 0.0, 10.0)]).unwrap();
        let a = coefficient_matrix(&cfg, &[idle.clone(), idle], &[0, 1]).unwrap();
        assert!(a.iter().all(|&v| v.abs() < 1e-15));
    }

    #[test]
    fn coefficient_window_is_checked() {
        let cfg = SystemConfig::with_cutoff(4);
        let cp = CompositePulse::uniform(1, 1.0, 0.1).unwrap();
        assert!(matches!(
            coefficient_matrix(&cfg, std::slice::from_ref(&cp), &[4]),
            Err(Error::Index { index: 4, .. })
        ));
        assert!(matches!(
            coefficient_matrix(&cfg, &[cp], &[0, 1]),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn measurement_space_must_match_distribution() {
        let d = thermal_distribution(1.0, 20).unwrap();
        let cp = CompositePulse::uniform(1, 1.0, 0.1).unwrap();
        let err = simulate_measurements(&SystemConfig::with_cutoff(10), &[cp], &d).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn sampled_readout_is_deterministic_and_bounded() {
        let ideal = [0.0, 0.25, 1.0];
        let a = sample_measurements(&ideal, 1000, 9).unwrap();
        assert_eq!(a, sample_measurements(&ideal, 1000, 9).unwrap());
        assert_eq!(a[0], 0.0);
        assert_eq!(a[2], 1.0);
        assert!((a[1] - 0.25).abs() < 0.06);
    }

    #[test]
    fn shifted_window_spans_the_padding() {
        let s = ThermometrySetup::shifted_window(vec![29, 30, 31], 5, 60).unwrap();
        assert_eq!(s.design.fock_levels(), 24..36);
        s.validate().unwrap();
        let near_zero = ThermometrySetup::shifted_window(vec![1, 2], 5, 60).unwrap();
        assert_eq!(near_zero.design.fock_offset, 0);
    }

    #[test]
    fn csv_has_one_row_per_window_state() {
        let report = ThermometryReport {
            window: vec![0, 1],
            populations: vec![0.5, 0.25],
            measured: vec![0.51, 0.26],
            corrected: vec![0.5, 0.25],
            coefficients: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            condition: 1.0,
            pulses: vec![],
        };
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "n,P,M,R");
        assert_eq!(
            lines[1],
            "0,5.0000000000000000e-1,5.1000000000000001e-1,5.0000000000000000e-1"
        );
        assert_eq!(lines.len(), 3);
        assert_abs_diff_eq!(report.max_measured_error(), 0.01, epsilon = 1e-12);
    }
}
