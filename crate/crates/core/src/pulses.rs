//! Composite pulse sequences and their optimizer parameterization.

use std::f64::consts::{PI, SQRT_2, TAU};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fockspace::{
    build_hamiltonian, phase_frame, propagate, HermitianSpectrum, Operator, SystemConfig,
};

/// One constant-parameter laser pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseParams {
    /// Laser detuning.
    pub delta: f64,
    /// Coupling strength.
    pub omega: f64,
    /// Initial laser phase in radians.
    pub phi: f64,
    /// Duration in dimensionless time.
    pub t: f64,
}

impl PulseParams {
    pub fn new(delta: f64, omega: f64, phi: f64, t: f64) -> Self {
        Self {
            delta,
            omega,
            phi,
            t,
        }
    }

    pub(crate) fn check_finite(&self) -> Result<()> {
        for (name, value) in [
            ("delta", self.delta),
            ("omega", self.omega),
            ("phi", self.phi),
            ("t", self.t),
        ] {
            if !value.is_finite() {
                return Err(Error::param(name, format!("must be finite, got {value}")));
            }
        }
        Ok(())
    }

    /// Copy with the phase wrapped into `[0, 2π)`.
    pub fn canonicalized(&self) -> Self {
        Self {
            phi: self.phi.rem_euclid(TAU),
            ..*self
        }
    }

    pub fn get(&self, field: Field) -> f64 {
        match field {
            Field::Delta => self.delta,
            Field::Omega => self.omega,
            Field::Phi => self.phi,
            Field::Duration => self.t,
        }
    }

    pub fn set(&mut self, field: Field, value: f64) {
        match field {
            Field::Delta => self.delta = value,
            Field::Omega => self.omega = value,
            Field::Phi => self.phi = value,
            Field::Duration => self.t = value,
        }
    }
}

/// Ordered pulse sequence, applied first to last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<PulseParams>", into = "Vec<PulseParams>")]
pub struct CompositePulse {
    pulses: Vec<PulseParams>,
}

impl CompositePulse {
    pub fn new(pulses: Vec<PulseParams>) -> Result<Self> {
        if pulses.is_empty() {
            return Err(Error::param(
                "pulses",
                "a composite pulse needs at least one pulse",
            ));
        }
        Ok(Self { pulses })
    }

    /// `count` pulses with common detuning and coupling, zero phase and duration.
    pub fn uniform(count: usize, delta: f64, omega: f64) -> Result<Self> {
        Self::new(vec![PulseParams::new(delta, omega, 0.0, 0.0); count])
    }

    pub fn pulses(&self) -> &[PulseParams] {
        &self.pulses
    }

    pub fn pulses_mut(&mut self) -> &mut [PulseParams] {
        &mut self.pulses
    }

    pub fn len(&self) -> usize {
        self.pulses.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn total_duration(&self) -> f64 {
        self.pulses.iter().map(|p| p.t).sum()
    }

    /// Copy with every phase wrapped into `[0, 2π)`.
    pub fn canonicalized(&self) -> Self {
        Self {
            pulses: self.pulses.iter().map(PulseParams::canonicalized).collect(),
        }
    }
}

impl TryFrom<Vec<PulseParams>> for CompositePulse {
    type Error = Error;

    fn try_from(pulses: Vec<PulseParams>) -> Result<Self> {
        Self::new(pulses)
    }
}

impl From<CompositePulse> for Vec<PulseParams> {
    fn from(cp: CompositePulse) -> Self {
        cp.pulses
    }
}

/// Product `U_n ⋯ U_1` of the per-pulse propagators.
///
/// Each pulse is built and exponentiated on its own; see
/// [`CompositeEvaluator`] for the faster path used inside optimization.
pub fn composite_unitary(cfg: &SystemConfig, cp: &CompositePulse) -> Result<Operator> {
    cfg.validate()?;
    let mut total = Operator::identity(cfg.dim(), cfg.dim());
    for p in cp.pulses() {
        let h = build_hamiltonian(cfg, p)?;
        let u = propagate(&h, p.t / cfg.hbar)?;
        total = u * total;
    }
    Ok(total)
}

/// Three-pulse blue-sideband SWAP from the first-order Lamb-Dicke model.
///
/// `t₁ = t₃ = π/(√2 η Ω)`, `t₂ = √2 π/(η Ω)`, `φ₂ = arccos(cot²(π/√2))`,
/// `φ₁ = φ₃ = 0`, resonant detuning `Δ = 1`.
pub fn analytic_swap_parameters(cfg: &SystemConfig, omega: f64) -> Result<CompositePulse> {
    cfg.validate()?;
    if !(omega.is_finite() && omega > 0.0) {
        return Err(Error::param(
            "omega",
            format!("must be positive, got {omega}"),
        ));
    }
    let outer = PI / (SQRT_2 * cfg.eta * omega);
    let inner = SQRT_2 * PI / (cfg.eta * omega);
    let cot = 1.0 / (PI / SQRT_2).tan();
    let phi2 = (cot * cot).acos();
    CompositePulse::new(vec![
        PulseParams::new(1.0, omega, 0.0, outer),
        PulseParams::new(1.0, omega, phi2, inner),
        PulseParams::new(1.0, omega, 0.0, outer),
    ])
}

/// Evaluates composite unitaries while reusing eigendecompositions.
///
/// Pulses with equal `(Δ, Ω)` share a spectrum: the phase enters as the frame
/// change `R(φ) = |g⟩⟨g| + e^{iφ}|e⟩⟨e|`, so
/// `exp(-iH(φ)t) = R(φ) exp(-iH(0)t) R(φ)†`. Spectra for pairs registered
/// up front are cached; any other pair is decomposed on the fly.
#[derive(Debug, Clone)]
pub struct CompositeEvaluator {
    cfg: SystemConfig,
    cache: Vec<((u64, u64), Arc<HermitianSpectrum>)>,
}

impl CompositeEvaluator {
    pub fn new(cfg: SystemConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            cache: Vec::new(),
        })
    }

    /// Pre-computes the spectrum for a `(delta, omega)` pair.
    pub fn register(&mut self, delta: f64, omega: f64) -> Result<()> {
        let key = (delta.to_bits(), omega.to_bits());
        if self.cache.iter().all(|(k, _)| *k != key) {
            let spectrum = self.spectrum(delta, omega)?;
            self.cache.push((key, Arc::new(spectrum)));
        }
        Ok(())
    }

    pub fn config(&self) -> &SystemConfig {
        &self.cfg
    }

    fn spectrum(&self, delta: f64, omega: f64) -> Result<HermitianSpectrum> {
        let h = build_hamiltonian(&self.cfg, &PulseParams::new(delta, omega, 0.0, 0.0))?;
        HermitianSpectrum::decompose(&h)
    }

    fn lookup(&self, delta: f64, omega: f64) -> Result<Arc<HermitianSpectrum>> {
        let key = (delta.to_bits(), omega.to_bits());
        match self.cache.iter().find(|(k, _)| *k == key) {
            Some((_, s)) => Ok(Arc::clone(s)),
            None => Ok(Arc::new(self.spectrum(delta, omega)?)),
        }
    }

    pub fn unitary(&self, cp: &CompositePulse) -> Result<Operator> {
        let dim = self.cfg.dim();
        let mut total: Option<Operator> = None;
        let mut local: Vec<(u64, u64, Arc<HermitianSpectrum>)> = Vec::new();
        for p in cp.pulses() {
            p.check_finite()?;
            if p.t < 0.0 {
                return Err(Error::param(
                    "t",
                    format!("duration must be >= 0, got {}", p.t),
                ));
            }
            let key = (p.delta.to_bits(), p.omega.to_bits());
            let spectrum = match local.iter().find(|(d, o, _)| (*d, *o) == key) {
                Some((_, _, s)) => Arc::clone(s),
                None => {
                    let s = self.lookup(p.delta, p.omega)?;
                    local.push((key.0, key.1, Arc::clone(&s)));
                    s
                }
            };
            let frame = phase_frame(self.cfg.cutoff, p.phi);
            let time = p.t / self.cfg.hbar;
            let next = match total.take() {
                None => {
                    let mut u = spectrum.propagator(time);
                    scale_rows(&mut u, &frame, false);
                    for (mut column, r) in u.column_iter_mut().zip(&frame) {
                        column *= r.conj();
                    }
                    u
                }
                Some(mut acc) => {
                    // acc <- R exp(-iH(0)t) R^dagger acc
                    scale_rows(&mut acc, &frame, true);
                    let mut u = spectrum.apply(time, &acc);
                    scale_rows(&mut u, &frame, false);
                    u
                }
            };
            total = Some(next);
        }
        Ok(total.unwrap_or_else(|| Operator::identity(dim, dim)))
    }
}

fn scale_rows(u: &mut Operator, frame: &[Complex64], conjugate: bool) {
    for (mut row, r) in u.row_iter_mut().zip(frame) {
        row *= if conjugate { r.conj() } else { *r };
    }
}

/// A parameter of a single pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    Delta,
    Omega,
    Phi,
    Duration,
}

/// One `(pulse, field)` slot of a composite pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Slot {
    pub pulse: usize,
    pub field: Field,
}

/// One optimizer coordinate: a box-bounded value written to every slot in
/// `slots`. More than one slot makes a shared group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreeParam {
    pub slots: Vec<Slot>,
    pub lower: f64,
    pub upper: f64,
}

/// Maps composite pulses to optimizer parameter vectors and back.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ParamLayout {
    pub params: Vec<FreeParam>,
}

/// Default duration bound `4π/(ηΩ)`.
pub fn max_duration(eta: f64, omega: f64) -> f64 {
    4.0 * PI / (eta * omega)
}

impl ParamLayout {
    /// Adds a coordinate driving `slots`.
    pub fn with(mut self, slots: Vec<Slot>, lower: f64, upper: f64) -> Self {
        self.params.push(FreeParam {
            slots,
            lower,
            upper,
        });
        self
    }

    /// Free durations for all pulses and free phases for pulses after the
    /// first, with `t ∈ [0, 4π/(ηΩ)]` and `φ ∈ [0, 2π]`.
    pub fn durations_and_phases(pulse_count: usize, eta: f64, omega: f64) -> Self {
        let t_max = max_duration(eta, omega);
        let mut layout = Self::default();
        for k in 0..pulse_count {
            layout = layout.with(
                vec![Slot {
                    pulse: k,
                    field: Field::Duration,
                }],
                0.0,
                t_max,
            );
        }
        for k in 1..pulse_count {
            layout = layout.with(
                vec![Slot {
                    pulse: k,
                    field: Field::Phi,
                }],
                0.0,
                TAU,
            );
        }
        layout
    }

    /// Adds one detuning shared by all pulses.
    pub fn with_shared_delta(self, pulse_count: usize, lower: f64, upper: f64) -> Self {
        let slots = (0..pulse_count)
            .map(|pulse| Slot {
                pulse,
                field: Field::Delta,
            })
            .collect();
        self.with(slots, lower, upper)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn bounds(&self) -> Vec<(f64, f64)> {
        self.params.iter().map(|p| (p.lower, p.upper)).collect()
    }

    /// Checks bounds and that every slot exists and is driven at most once.
    pub fn validate(&self, pulse_count: usize) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for (i, p) in self.params.iter().enumerate() {
            if !(p.lower.is_finite() && p.upper.is_finite() && p.lower <= p.upper) {
                return Err(Error::Layout(format!(
                    "parameter {i} has invalid bounds [{}, {}]",
                    p.lower, p.upper
                )));
            }
            if p.slots.is_empty() {
                return Err(Error::Layout(format!("parameter {i} drives no slot")));
            }
            for slot in &p.slots {
                if slot.pulse >= pulse_count {
                    return Err(Error::Layout(format!(
                        "parameter {i} refers to pulse {} of {pulse_count}",
                        slot.pulse
                    )));
                }
                if !seen.insert(*slot) {
                    return Err(Error::Layout(format!(
                        "slot {:?} of pulse {} is driven twice",
                        slot.field, slot.pulse
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.len()
            && self
                .params
                .iter()
                .zip(x)
                .all(|(p, &v)| v >= p.lower && v <= p.upper)
    }

    /// Clamps a vector into the bounds.
    pub fn project(&self, x: &mut [f64]) {
        for (p, v) in self.params.iter().zip(x.iter_mut()) {
            *v = v.clamp(p.lower, p.upper);
        }
    }
}

/// Reads the free coordinates of `cp`. Shared groups report their first slot.
pub fn pack(cp: &CompositePulse, layout: &ParamLayout) -> Result<Vec<f64>> {
    layout.validate(cp.len())?;
    Ok(layout
        .params
        .iter()
        .map(|p| {
            let s = p.slots[0];
            cp.pulses()[s.pulse].get(s.field)
        })
        .collect())
}

/// Writes `x` into a copy of `template`.
pub fn unpack(
    x: &[f64],
    template: &CompositePulse,
    layout: &ParamLayout,
) -> Result<CompositePulse> {
    layout.validate(template.len())?;
    if x.len() != layout.len() {
        return Err(Error::Layout(format!(
            "vector has {} entries, layout expects {}",
            x.len(),
            layout.len()
        )));
    }
    let mut cp = template.clone();
    write_into(&mut cp, x, layout);
    Ok(cp)
}

/// Unchecked unpack for hot loops whose layout was validated once.
pub(crate) fn write_into(cp: &mut CompositePulse, x: &[f64], layout: &ParamLayout) {
    for (p, &v) in layout.params.iter().zip(x) {
        for s in &p.slots {
            cp.pulses[s.pulse].set(s.field, v);
        }
    }
}

/// Coupling regime presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// `Ω = 0.1`, `Δ = 1` fixed; durations and relative phases optimized.
    Weak,
    /// `Ω = 1`; one shared detuning optimized in `[0.25, 2.5]` as well.
    Strong,
}

impl Regime {
    pub const STRONG_DELTA_BOUNDS: (f64, f64) = (0.25, 2.5);

    pub fn omega(self) -> f64 {
        match self {
            Regime::Weak => 0.1,
            Regime::Strong => 1.0,
        }
    }

    /// Starting pulse sequence: resonant detuning, zero phases and durations.
    pub fn template(self, pulse_count: usize) -> Result<CompositePulse> {
        CompositePulse::uniform(pulse_count, 1.0, self.omega())
    }

    pub fn layout(self, cfg: &SystemConfig, pulse_count: usize) -> ParamLayout {
        let layout = ParamLayout::durations_and_phases(pulse_count, cfg.eta, self.omega());
        match self {
            Regime::Weak => layout,
            Regime::Strong => {
                let (lo, hi) = Self::STRONG_DELTA_BOUNDS;
                layout.with_shared_delta(pulse_count, lo, hi)
            }
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regime::Weak => "weak",
            Regime::Strong => "strong",
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fockspace::unitarity_error;
    use crate::objective::modulus_matrix;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn max_abs_diff(a: &Operator, b: &Operator) -> f64 {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    fn sample_pulse() -> CompositePulse {
        CompositePulse::new(vec![
            PulseParams::new(1.0, 0.3, 0.0, 40.0),
            PulseParams::new(0.8, 0.3, 1.3, 25.0),
            PulseParams::new(1.0, 0.3, 4.0, 33.0),
        ])
        .unwrap()
    }

    #[test]
    fn single_pulse_equals_propagator() {
        let cfg = SystemConfig::with_cutoff(4);
        let p = PulseParams::new(1.0, 0.1, 0.4, 123.0);
        let cp = CompositePulse::new(vec![p]).unwrap();
        let direct = propagate(&build_hamiltonian(&cfg, &p).unwrap(), p.t).unwrap();
        assert!(max_abs_diff(&composite_unitary(&cfg, &cp).unwrap(), &direct) < 1e-14);
    }

    #[test]
    fn composition_is_associative() {
        let cfg = SystemConfig::with_cutoff(5);
        let cp = sample_pulse();
        let head = CompositePulse::new(cp.pulses()[..2].to_vec()).unwrap();
        let tail = CompositePulse::new(cp.pulses()[2..].to_vec()).unwrap();
        let whole = composite_unitary(&cfg, &cp).unwrap();
        let split =
            composite_unitary(&cfg, &tail).unwrap() * composite_unitary(&cfg, &head).unwrap();
        assert!(max_abs_diff(&whole, &split) < 1e-12);
    }

    #[test]
    fn evaluator_matches_direct_product() {
        let cfg = SystemConfig::with_cutoff(6);
        let cp = sample_pulse();
        let mut eval = CompositeEvaluator::new(cfg).unwrap();
        let cold = eval.unitary(&cp).unwrap();
        eval.register(1.0, 0.3).unwrap();
        let warm = eval.unitary(&cp).unwrap();
        let direct = composite_unitary(&cfg, &cp).unwrap();
        assert!(max_abs_diff(&cold, &direct) < 1e-11);
        assert!(max_abs_diff(&warm, &direct) < 1e-11);
    }

    #[test]
    fn uncoupled_sequence_has_identity_moduli() {
        let cfg = SystemConfig::with_cutoff(3);
        let mut cp = analytic_swap_parameters(&cfg, 0.1).unwrap();
        for p in cp.pulses_mut() {
            p.omega = 0.0;
        }
        let m = modulus_matrix(&composite_unitary(&cfg, &cp).unwrap());
        for i in 0..6 {
            for j in 0..6 {
                assert_abs_diff_eq!(m[(i, j)], if i == j { 1.0 } else { 0.0 }, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn analytic_swap_values() {
        let cfg = SystemConfig::default();
        let cp = analytic_swap_parameters(&cfg, 0.1).unwrap();
        let p = cp.pulses();
        assert_abs_diff_eq!(p[0].t, 264.46, epsilon = 0.01);
        assert_abs_diff_eq!(p[1].t, 528.91, epsilon = 0.01);
        assert_abs_diff_eq!(p[2].t, 264.46, epsilon = 0.01);
        assert_abs_diff_eq!(p[1].phi, 0.95, epsilon = 0.01);
        assert_eq!((p[0].phi, p[2].phi), (0.0, 0.0));
        assert!(p.iter().all(|q| q.delta == 1.0 && q.omega == 0.1));

        let doubled = analytic_swap_parameters(&cfg, 0.2).unwrap();
        assert_abs_diff_eq!(doubled.pulses()[0].t, 132.23, epsilon = 0.01);
        let other = analytic_swap_parameters(&SystemConfig { eta: 0.2, ..cfg }, 0.7).unwrap();
        assert_eq!(other.pulses()[1].phi, p[1].phi);
    }

    #[test]
    fn analytic_swap_rejects_nonpositive_omega() {
        let cfg = SystemConfig::default();
        assert!(analytic_swap_parameters(&cfg, 0.0).is_err());
        assert!(analytic_swap_parameters(&cfg, -0.1).is_err());
    }

    #[test]
    fn analytic_swap_transfer_in_expected_band() {
        for cutoff in [6, 8] {
            let cfg = SystemConfig::with_cutoff(cutoff);
            let u = composite_unitary(&cfg, &analytic_swap_parameters(&cfg, 0.1).unwrap()).unwrap();
            let transfer = u[(cutoff + 1, 0)].norm();
            assert!(
                (0.79..=0.82).contains(&transfer),
                "cutoff {cutoff}: {transfer}"
            );
        }
    }

    #[test]
    fn global_phase_leaves_moduli() {
        let cfg = SystemConfig::with_cutoff(4);
        let u = composite_unitary(&cfg, &sample_pulse()).unwrap();
        let shifted = u.map(|z| z * Complex64::from_polar(1.0, 0.77));
        assert!(unitarity_error(&shifted) < 1e-10);
        let (a, b) = (modulus_matrix(&u), modulus_matrix(&shifted));
        assert!(a.iter().zip(b.iter()).all(|(x, y)| (x - y).abs() < 1e-14));
    }

    #[test]
    fn pack_unpack_layouts() {
        let cfg = SystemConfig::default();
        let layout = Regime::Weak.layout(&cfg, 3);
        assert_eq!(layout.len(), 5);
        let template = Regime::Weak.template(3).unwrap();
        assert_eq!(pack(&template, &layout).unwrap().len(), 5);

        let strong = Regime::Strong.layout(&cfg, 3);
        let mut x = pack(&Regime::Strong.template(3).unwrap(), &strong).unwrap();
        *x.last_mut().unwrap() = 0.93;
        let cp = unpack(&x, &Regime::Strong.template(3).unwrap(), &strong).unwrap();
        assert!(cp.pulses().iter().all(|p| p.delta == 0.93));
    }

    #[test]
    fn layout_errors() {
        let template = CompositePulse::uniform(2, 1.0, 0.1).unwrap();
        let bad_pulse = ParamLayout::default().with(
            vec![Slot {
                pulse: 2,
                field: Field::Phi,
            }],
            0.0,
            1.0,
        );
        assert!(matches!(pack(&template, &bad_pulse), Err(Error::Layout(_))));
        let twice = ParamLayout::default()
            .with(
                vec![Slot {
                    pulse: 0,
                    field: Field::Phi,
                }],
                0.0,
                1.0,
            )
            .with(
                vec![Slot {
                    pulse: 0,
                    field: Field::Phi,
                }],
                0.0,
                1.0,
            );
        assert!(twice.validate(2).is_err());
        let unbounded = ParamLayout::default().with(
            vec![Slot {
                pulse: 0,
                field: Field::Phi,
            }],
            0.0,
            f64::INFINITY,
        );
        assert!(unbounded.validate(2).is_err());
        let ok = ParamLayout::durations_and_phases(2, 0.084, 0.1);
        assert!(matches!(
            unpack(&[1.0], &template, &ok),
            Err(Error::Layout(_))
        ));
    }

    #[test]
    fn canonicalization_wraps_phases() {
        let cp = CompositePulse::new(vec![
            PulseParams::new(1.0, 0.1, 6.77, 1.0),
            PulseParams::new(1.0, 0.1, -0.5, 1.0),
        ])
        .unwrap()
        .canonicalized();
        assert_abs_diff_eq!(cp.pulses()[0].phi, 6.77 - TAU, epsilon = 1e-12);
        assert_abs_diff_eq!(cp.pulses()[1].phi, TAU - 0.5, epsilon = 1e-12);
    }

    #[test]
    fn empty_sequence_rejected() {
        assert!(CompositePulse::new(vec![]).is_err());
        assert!(serde_json::from_str::<CompositePulse>("[]").is_err());
    }

    proptest! {
        #[test]
        fn pack_unpack_round_trip(values in proptest::collection::vec(0.0f64..1.0, 6)) {
            let cfg = SystemConfig::default();
            let layout = Regime::Strong.layout(&cfg, 3);
            let template = Regime::Strong.template(3).unwrap();
            let x: Vec<f64> = layout
                .params
                .iter()
                .zip(&values)
                .map(|(p, u)| p.lower + u * (p.upper - p.lower))
                .collect();
            let cp = unpack(&x, &template, &layout).unwrap();
            prop_assert_eq!(pack(&cp, &layout).unwrap(), x);
            prop_assert_eq!(unpack(&pack(&cp, &layout).unwrap(), &template, &layout).unwrap(), cp);
        }
    }
}
