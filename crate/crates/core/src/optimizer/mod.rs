//! Hybrid global/local minimization of the composite-pulse loss.
//!
//! [`design_pulse`] runs several seeded particle swarms ([`pso_search`]),
//! hands the best few results to projected L-BFGS ([`refine`]) and keeps the
//! lowest loss. An optional screening round (see [`RefineConfig::screen`])
//! adds short refinements from random points before the final ones. Equal losses are broken in favour of the shorter total
//! duration.

mod lbfgs;
mod pso;

pub use lbfgs::RefineConfig;
pub use pso::PsoConfig;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fockspace::SystemConfig;
use crate::objective::{modulus_loss, LossValue, TargetSpec};
use crate::pulses::{
    pack, unpack, write_into, CompositeEvaluator, CompositePulse, Field, ParamLayout,
};

/// A box-constrained scalar objective.
pub trait Objective: Sync {
    fn bounds(&self) -> Vec<(f64, f64)>;

    /// Loss at `x`; non-finite values are treated as +∞ by the optimizers.
    fn loss(&self, x: &[f64]) -> f64;

    /// Secondary key for equal losses, smaller wins.
    fn tiebreak(&self, _x: &[f64]) -> f64 {
        0.0
    }

    fn score(&self, x: &[f64]) -> Score {
        let loss = self.loss(x);
        Score {
            loss: if loss.is_finite() {
                loss
            } else {
                f64::INFINITY
            },
            tiebreak: self.tiebreak(x),
        }
    }
}

/// Loss with its tie-breaking key.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    pub loss: f64,
    pub tiebreak: f64,
}

impl Score {
    pub fn better_than(&self, other: &Score) -> bool {
        self.loss < other.loss || (self.loss == other.loss && self.tiebreak < other.tiebreak)
    }
}

/// Affine map between a box and the unit cube.
#[derive(Debug, Clone)]
pub(crate) struct BoxMap {
    bounds: Vec<(f64, f64)>,
}

impl BoxMap {
    pub(crate) fn new(bounds: Vec<(f64, f64)>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::Config(
                "nothing to optimize: the layout is empty".into(),
            ));
        }
        for (i, &(lo, hi)) in bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::Config(format!(
                    "parameter {i} has invalid bounds [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self { bounds })
    }

    pub(crate) fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub(crate) fn width(&self, j: usize) -> f64 {
        self.bounds[j].1 - self.bounds[j].0
    }

    pub(crate) fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(&self.bounds)
            .all(|(&v, &(lo, hi))| v >= lo && v <= hi)
    }

    pub(crate) fn to_physical(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(&self.bounds)
            .map(|(&ui, &(lo, hi))| (lo + ui * (hi - lo)).clamp(lo, hi))
            .collect()
    }

    pub(crate) fn to_unit(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.bounds)
            .map(|(&xi, &(lo, hi))| {
                if hi > lo {
                    ((xi - lo) / (hi - lo)).clamp(0.0, 1.0)
                } else {
                    0.0
                }
            })
            .collect()
    }
}

/// Central-difference gradient in the objective's own coordinates.
///
/// Falls back to a one-sided difference where a central step would leave the
/// box, so no evaluation point is infeasible.
pub fn finite_difference_gradient<O: Objective + ?Sized>(
    objective: &O,
    x: &[f64],
    step: f64,
) -> Result<Vec<f64>> {
    let bounds = objective.bounds();
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for (j, &(lo, hi)) in bounds.iter().enumerate() {
        if hi <= lo {
            grad.push(0.0);
            continue;
        }
        let (minus, plus) = if x[j] - step < lo {
            (x[j], x[j] + step)
        } else if x[j] + step > hi {
            (x[j] - step, x[j])
        } else {
            (x[j] - step, x[j] + step)
        };
        probe[j] = plus;
        let f_plus = objective.loss(&probe);
        probe[j] = minus;
        let f_minus = objective.loss(&probe);
        probe[j] = x[j];
        let g = (f_plus - f_minus) / (plus - minus);
        if !g.is_finite() {
            return Err(Error::NonFiniteGradient { index: j });
        }
        grad.push(g);
    }
    Ok(grad)
}

/// Which optimizer stage produced a progress event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    Swarm { seed: u64 },
    Refine,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProgressEvent {
    pub stage: Stage,
    pub iteration: usize,
    pub best_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub best: CompositePulse,
    pub loss: LossValue,
    /// `(iteration, best-so-far loss)`, nonincreasing.
    pub history: Vec<(usize, f64)>,
    pub evaluations: usize,
}

/// The modulus loss of a composite pulse as a function of its free parameters.
pub struct PulseObjective {
    evaluator: CompositeEvaluator,
    template: CompositePulse,
    layout: ParamLayout,
    spec: TargetSpec,
    duration_slots: Vec<Option<usize>>,
}

impl PulseObjective {
    pub fn new(
        cfg: &SystemConfig,
        template: &CompositePulse,
        layout: &ParamLayout,
        spec: &TargetSpec,
    ) -> Result<Self> {
        cfg.validate()?;
        layout.validate(template.len())?;
        if layout.is_empty() {
            return Err(Error::Config(
                "nothing to optimize: the layout is empty".into(),
            ));
        }
        if spec.dim() != cfg.dim() {
            return Err(Error::Shape {
                expected: (cfg.dim(), cfg.dim()),
                found: (spec.dim(), spec.dim()),
            });
        }
        let mut evaluator = CompositeEvaluator::new(*cfg)?;
        let driven = |pulse: usize, field: Field| {
            layout
                .params
                .iter()
                .any(|p| p.slots.iter().any(|s| s.pulse == pulse && s.field == field))
        };
        for (k, p) in template.pulses().iter().enumerate() {
            if !driven(k, Field::Delta) && !driven(k, Field::Omega) {
                evaluator.register(p.delta, p.omega)?;
            }
        }
        let duration_slots = (0..template.len())
            .map(|k| {
                layout.params.iter().position(|p| {
                    p.slots
                        .iter()
                        .any(|s| s.pulse == k && s.field == Field::Duration)
                })
            })
            .collect();
        Ok(Self {
            evaluator,
            template: template.clone(),
            layout: layout.clone(),
            spec: spec.clone(),
            duration_slots,
        })
    }

    pub fn pulse(&self, x: &[f64]) -> Result<CompositePulse> {
        unpack(x, &self.template, &self.layout)
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    fn try_loss(&self, x: &[f64]) -> Result<f64> {
        let mut cp = self.template.clone();
        write_into(&mut cp, x, &self.layout);
        let u = self.evaluator.unitary(&cp)?;
        Ok(modulus_loss(&u, &self.spec)?.value())
    }
}

impl Objective for PulseObjective {
    fn bounds(&self) -> Vec<(f64, f64)> {
        self.layout.bounds()
    }

    fn loss(&self, x: &[f64]) -> f64 {
        self.try_loss(x).unwrap_or(f64::INFINITY)
    }

    fn tiebreak(&self, x: &[f64]) -> f64 {
        self.duration_slots
            .iter()
            .zip(self.template.pulses())
            .map(|(slot, p)| slot.map_or(p.t, |i| x[i]))
            .sum()
    }
}

fn no_progress(_: &ProgressEvent) {}

/// Mixed into the swarm seed for the screening points, so they differ from
/// every swarm's initial particles.
const SCREEN_STREAM: u64 = 0x5eed_5c4e_e7ed_0001;

/// One seeded particle swarm over the layout's box.
pub fn pso_search(
    cfg: &SystemConfig,
    template: &CompositePulse,
    layout: &ParamLayout,
    spec: &TargetSpec,
    pcfg: &PsoConfig,
) -> Result<OptimizationResult> {
    let objective = PulseObjective::new(cfg, template, layout, spec)?;
    let outcome = pso::run_swarm(&objective, pcfg, pcfg.seed, &mut no_progress)?;
    Ok(OptimizationResult {
        best: objective.pulse(&outcome.best)?,
        loss: LossValue(outcome.score.loss),
        history: outcome.history,
        evaluations: outcome.evaluations,
    })
}

/// Projected L-BFGS from `start`, which must lie inside the layout's box.
pub fn refine(
    cfg: &SystemConfig,
    start: &CompositePulse,
    layout: &ParamLayout,
    spec: &TargetSpec,
    rcfg: &RefineConfig,
) -> Result<OptimizationResult> {
    let objective = PulseObjective::new(cfg, start, layout, spec)?;
    let x0 = pack(start, layout)?;
    let outcome = lbfgs::run_refine(&objective, &x0, rcfg, &mut no_progress)?;
    Ok(OptimizationResult {
        best: objective.pulse(&outcome.best)?,
        loss: LossValue(outcome.loss),
        history: outcome.history,
        evaluations: outcome.evaluations,
    })
}

/// Minimizes any [`Objective`] with the swarm-then-refine pipeline.
///
/// Returns the best parameter vector, its loss, the running-best history
/// and the evaluation count.
pub fn minimize<O: Objective>(
    objective: &O,
    pcfg: &PsoConfig,
    rcfg: &RefineConfig,
    on_progress: &mut dyn FnMut(&ProgressEvent),
) -> Result<(Vec<f64>, f64, Vec<(usize, f64)>, usize)> {
    pcfg.validate()?;
    rcfg.validate()?;
    let mut history = Vec::new();
    let mut evaluations = 0;
    let mut offset = 0;
    let record = |history: &mut Vec<(usize, f64)>, offset: &mut usize, part: &[(usize, f64)]| {
        for &(it, loss) in part {
            let best = history
                .last()
                .map_or(loss, |&(_, b): &(usize, f64)| b.min(loss));
            history.push((*offset + it, best));
        }
        *offset += part.last().map_or(0, |&(it, _)| it + 1);
    };

    let mut candidates = Vec::with_capacity(pcfg.starts);
    for k in 0..pcfg.starts {
        let seed = pcfg.seed.wrapping_add(k as u64);
        let swarm = pso::run_swarm(objective, pcfg, seed, on_progress)?;
        evaluations += swarm.evaluations;
        record(&mut history, &mut offset, &swarm.history);
        candidates.push((swarm.best, swarm.score));
    }

    if rcfg.screen > 0 {
        let map = BoxMap::new(objective.bounds())?;
        let mut rng = ChaCha8Rng::seed_from_u64(pcfg.seed ^ SCREEN_STREAM);
        let mut starts: Vec<Vec<f64>> = candidates.drain(..).map(|(x, _)| x).collect();
        for _ in 0..rcfg.screen {
            let u: Vec<f64> = (0..map.dim()).map(|_| rng.random()).collect();
            starts.push(map.to_physical(&u));
        }
        let short = RefineConfig {
            max_iters: rcfg.screen_iters,
            ..rcfg.clone()
        };
        for start in starts {
            let screened = lbfgs::run_refine(objective, &start, &short, on_progress)?;
            evaluations += screened.evaluations;
            record(&mut history, &mut offset, &screened.history);
            let score = Score {
                loss: screened.loss,
                tiebreak: objective.tiebreak(&screened.best),
            };
            candidates.push((screened.best, score));
        }
    }
    sort_by_score(&mut candidates);

    let mut best: Option<(Vec<f64>, Score)> = None;
    for (start, _) in candidates.into_iter().take(rcfg.refine_best) {
        let refined = lbfgs::run_refine(objective, &start, rcfg, on_progress)?;
        evaluations += refined.evaluations;
        record(&mut history, &mut offset, &refined.history);
        let score = Score {
            loss: refined.loss,
            tiebreak: objective.tiebreak(&refined.best),
        };
        if best.as_ref().is_none_or(|(_, s)| score.better_than(s)) {
            best = Some((refined.best, score));
        }
    }
    let (x, score) = best.expect("refine_best is at least one");
    Ok((x, score.loss, history, evaluations))
}

fn sort_by_score(candidates: &mut [(Vec<f64>, Score)]) {
    candidates.sort_by(|a, b| {
        a.1.loss
            .total_cmp(&b.1.loss)
            .then(a.1.tiebreak.total_cmp(&b.1.tiebreak))
    });
}

/// Swarm search from `pcfg.starts` seeds, then refinement of the best
/// `rcfg.refine_best` of them.
pub fn design_pulse(
    cfg: &SystemConfig,
    template: &CompositePulse,
    layout: &ParamLayout,
    spec: &TargetSpec,
    pcfg: &PsoConfig,
    rcfg: &RefineConfig,
) -> Result<OptimizationResult> {
    design_pulse_with_progress(cfg, template, layout, spec, pcfg, rcfg, &mut no_progress)
}

pub fn design_pulse_with_progress(
    cfg: &SystemConfig,
    template: &CompositePulse,
    layout: &ParamLayout,
    spec: &TargetSpec,
    pcfg: &PsoConfig,
    rcfg: &RefineConfig,
    on_progress: &mut dyn FnMut(&ProgressEvent),
) -> Result<OptimizationResult> {
    let objective = PulseObjective::new(cfg, template, layout, spec)?;
    let (x, loss, history, evaluations) = minimize(&objective, pcfg, rcfg, on_progress)?;
    Ok(OptimizationResult {
        best: objective.pulse(&x)?,
        loss: LossValue(loss),
        history,
        evaluations,
    })
}
