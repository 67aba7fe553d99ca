//! Particle swarm search over a box.
//!
//! Particles live in the unit cube; [`Objective`] coordinates are recovered
//! by the affine map onto the bounds. Each iteration draws all random
//! numbers on the calling thread, then evaluates the swarm in parallel and
//! reduces in particle order, so the outcome depends only on the seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{BoxMap, Objective, ProgressEvent, Score, Stage};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PsoConfig {
    pub particles: usize,
    pub iterations: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    /// Velocity limit per iteration as a fraction of each bound's width.
    pub max_velocity: f64,
    pub seed: u64,
    /// Independent swarms run by [`design_pulse`](super::design_pulse).
    pub starts: usize,
}

impl Default for PsoConfig {
    fn default() -> Self {
        Self {
            particles: 64,
            iterations: 300,
            inertia: 0.729,
            cognitive: 1.49445,
            social: 1.49445,
            max_velocity: 0.2,
            seed: 0,
            starts: 4,
        }
    }
}

impl PsoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.particles < 8 {
            return Err(Error::Config(format!(
                "swarm needs at least 8 particles, got {}",
                self.particles
            )));
        }
        for (name, v) in [
            ("inertia", self.inertia),
            ("cognitive", self.cognitive),
            ("social", self.social),
            ("max_velocity", self.max_velocity),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.starts == 0 {
            return Err(Error::Config("at least one swarm start is required".into()));
        }
        Ok(())
    }
}

pub(crate) struct SwarmOutcome {
    pub best: Vec<f64>,
    pub score: Score,
    pub history: Vec<(usize, f64)>,
    pub evaluations: usize,
}

pub(crate) fn run_swarm<O: Objective>(
    objective: &O,
    cfg: &PsoConfig,
    seed: u64,
    on_progress: &mut dyn FnMut(&ProgressEvent),
) -> Result<SwarmOutcome> {
    cfg.validate()?;
    let map = BoxMap::new(objective.bounds())?;
    let dim = map.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vmax = cfg.max_velocity;

    let mut positions: Vec<Vec<f64>> = (0..cfg.particles)
        .map(|_| (0..dim).map(|_| rng.random::<f64>()).collect())
        .collect();
    let mut velocities: Vec<Vec<f64>> = (0..cfg.particles)
        .map(|_| {
            (0..dim)
                .map(|_| vmax * (2.0 * rng.random::<f64>() - 1.0))
                .collect()
        })
        .collect();

    let evaluate = |swarm: &[Vec<f64>]| -> Vec<Score> {
        swarm
            .par_iter()
            .map(|u| objective.score(&map.to_physical(u)))
            .collect()
    };

    let mut scores = evaluate(&positions);
    let mut evaluations = cfg.particles;
    let mut personal = positions.clone();
    let mut personal_scores = scores.clone();
    let mut leader = 0;
    for i in 1..cfg.particles {
        if scores[i].better_than(&scores[leader]) {
            leader = i;
        }
    }
    let mut global = positions[leader].clone();
    let mut global_score = scores[leader];
    let mut history = vec![(0, global_score.loss)];
    on_progress(&ProgressEvent {
        stage: Stage::Swarm { seed },
        iteration: 0,
        best_loss: global_score.loss,
    });

    for iteration in 1..=cfg.iterations {
        for ((x, v), p) in positions.iter_mut().zip(&mut velocities).zip(&personal) {
            for j in 0..dim {
                let r1: f64 = rng.random();
                let r2: f64 = rng.random();
                let mut vj = cfg.inertia * v[j]
                    + cfg.cognitive * r1 * (p[j] - x[j])
                    + cfg.social * r2 * (global[j] - x[j]);
                vj = vj.clamp(-vmax, vmax);
                let mut xj = x[j] + vj;
                if xj < 0.0 {
                    xj = 0.0;
                    vj = 0.0;
                } else if xj > 1.0 {
                    xj = 1.0;
                    vj = 0.0;
                }
                x[j] = xj;
                v[j] = vj;
            }
        }
        scores = evaluate(&positions);
        evaluations += cfg.particles;
        for i in 0..cfg.particles {
            if scores[i].better_than(&personal_scores[i]) {
                personal[i].clone_from(&positions[i]);
                personal_scores[i] = scores[i];
                if scores[i].better_than(&global_score) {
                    global.clone_from(&positions[i]);
                    global_score = scores[i];
                }
            }
        }
        history.push((iteration, global_score.loss));
        on_progress(&ProgressEvent {
            stage: Stage::Swarm { seed },
            iteration,
            best_loss: global_score.loss,
        });
    }

    Ok(SwarmOutcome {
        best: map.to_physical(&global),
        score: global_score,
        history,
        evaluations,
    })
}
