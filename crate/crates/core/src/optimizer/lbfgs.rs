//! Projected limited-memory BFGS with finite-difference gradients.
//!
//! Iterates in unit-cube coordinates so that durations of hundreds and
//! phases of order one are equally scaled. Coordinates pinned at a bound
//! with the gradient pushing outward are held fixed for the step; trial
//! points are projected back into the box and accepted on an Armijo
//! decrease, so the loss never increases.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{finite_difference_gradient, BoxMap, Objective, ProgressEvent, Stage};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefineConfig {
    pub max_iters: usize,
    /// Central-difference step in the objective's own units.
    pub gradient_step: f64,
    /// Stop once three consecutive iterations improve the loss by less than this.
    pub tolerance: f64,
    /// Stored curvature pairs.
    pub memory: usize,
    /// Swarm results handed to refinement by [`design_pulse`](super::design_pulse).
    pub refine_best: usize,
    /// When nonzero, the swarm winners plus this many uniformly random points
    /// each get a short refinement of `screen_iters` iterations, and the
    /// `refine_best` winners of that round are refined in full. Helps on
    /// landscapes whose deep minima are too narrow for the swarm to settle in.
    pub screen: usize,
    pub screen_iters: usize,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            max_iters: 500,
            gradient_step: 1e-6,
            tolerance: 1e-10,
            memory: 10,
            refine_best: 2,
            screen: 0,
            screen_iters: 60,
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gradient_step > 0.0 && self.gradient_step <= 1e-3) {
            return Err(Error::Config(format!(
                "gradient_step must lie in (0, 1e-3], got {}",
                self.gradient_step
            )));
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(Error::Config(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.memory == 0 || self.refine_best == 0 {
            return Err(Error::Config(
                "memory and refine_best must be at least 1".into(),
            ));
        }
        if self.screen > 0 && self.screen_iters == 0 {
            return Err(Error::Config(
                "screen_iters must be at least 1 when screening".into(),
            ));
        }
        Ok(())
    }
}

pub(crate) struct RefineOutcome {
    pub best: Vec<f64>,
    pub loss: f64,
    pub history: Vec<(usize, f64)>,
    pub evaluations: usize,
}

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 40;
const STALL_LIMIT: usize = 3;

pub(crate) fn run_refine<O: Objective>(
    objective: &O,
    start: &[f64],
    cfg: &RefineConfig,
    on_progress: &mut dyn FnMut(&ProgressEvent),
) -> Result<RefineOutcome> {
    cfg.validate()?;
    let map = BoxMap::new(objective.bounds())?;
    if start.len() != map.dim() {
        return Err(Error::Layout(format!(
            "start has {} entries, objective expects {}",
            start.len(),
            map.dim()
        )));
    }
    if !map.contains(start) {
        return Err(Error::Layout(
            "refinement start lies outside the bounds".into(),
        ));
    }
    let dim = map.dim();
    let mut evaluations = 0;
    let mut u = map.to_unit(start);
    let mut x = map.to_physical(&u);
    let mut f = objective.loss(&x);
    evaluations += 1;
    let mut grad = unit_gradient(objective, &map, &x, cfg.gradient_step, &mut evaluations)?;
    let mut history = vec![(0, f)];
    let mut memory: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(cfg.memory);
    let mut stalled = 0;

    for iteration in 1..=cfg.max_iters {
        let free: Vec<bool> = (0..dim)
            .map(|j| {
                map.width(j) > 0.0
                    && !((u[j] <= 0.0 && grad[j] > 0.0) || (u[j] >= 1.0 && grad[j] < 0.0))
            })
            .collect();
        let pg: Vec<f64> = grad
            .iter()
            .zip(&free)
            .map(|(&g, &keep)| if keep { g } else { 0.0 })
            .collect();
        if inf_norm(&pg) < 1e-14 {
            break;
        }

        let mut direction = two_loop(&pg, &memory);
        for (d, &keep) in direction.iter_mut().zip(&free) {
            if !keep {
                *d = 0.0;
            }
        }
        if dot(&direction, &pg) >= 0.0 {
            memory.clear();
            direction = pg.iter().map(|g| -g).collect();
        }
        let mut alpha = if memory.is_empty() {
            0.05 / inf_norm(&direction)
        } else {
            1.0
        };

        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let trial: Vec<f64> = u
                .iter()
                .zip(&direction)
                .map(|(ui, di)| (ui + alpha * di).clamp(0.0, 1.0))
                .collect();
            let step: Vec<f64> = trial.iter().zip(&u).map(|(a, b)| a - b).collect();
            if inf_norm(&step) == 0.0 {
                break;
            }
            let trial_x = map.to_physical(&trial);
            let trial_f = objective.loss(&trial_x);
            evaluations += 1;
            if trial_f.is_finite() && trial_f <= f + ARMIJO * dot(&grad, &step) && trial_f <= f {
                accepted = Some((trial, trial_x, trial_f, step));
                break;
            }
            alpha *= 0.5;
        }

        let Some((trial, trial_x, trial_f, step)) = accepted else {
            if memory.is_empty() {
                break;
            }
            memory.clear();
            continue;
        };

        let trial_grad = unit_gradient(
            objective,
            &map,
            &trial_x,
            cfg.gradient_step,
            &mut evaluations,
        )?;
        let y: Vec<f64> = trial_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&step, &y);
        if sy > 1e-12 * norm(&step) * norm(&y) && sy > 0.0 {
            if memory.len() == cfg.memory {
                memory.pop_front();
            }
            memory.push_back((step, y, 1.0 / sy));
        }

        let improvement = f - trial_f;
        u = trial;
        x = trial_x;
        f = trial_f;
        grad = trial_grad;
        history.push((iteration, f));
        on_progress(&ProgressEvent {
            stage: Stage::Refine,
            iteration,
            best_loss: f,
        });

        if improvement < cfg.tolerance {
            stalled += 1;
            if stalled >= STALL_LIMIT {
                break;
            }
        } else {
            stalled = 0;
        }
    }

    Ok(RefineOutcome {
        best: x,
        loss: f,
        history,
        evaluations,
    })
}

fn unit_gradient<O: Objective>(
    objective: &O,
    map: &BoxMap,
    x: &[f64],
    step: f64,
    evaluations: &mut usize,
) -> Result<Vec<f64>> {
    let g = finite_difference_gradient(objective, x, step)?;
    *evaluations += 2 * x.len();
    Ok(g.iter()
        .enumerate()
        .map(|(j, gj)| gj * map.width(j))
        .collect())
}

fn two_loop(grad: &[f64], memory: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = grad.to_vec();
    let mut alphas = Vec::with_capacity(memory.len());
    for (s, y, rho) in memory.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = memory.back() {
        let gamma = dot(s, y) / dot(y, y);
        for qi in q.iter_mut() {
            *qi *= gamma;
        }
    }
    for ((s, y, rho), a) in memory.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter().map(|v| -v).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}
