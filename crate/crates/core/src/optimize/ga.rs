//! Real-coded genetic algorithm: tournament selection, blend crossover,
//! Gaussian mutation, elitism, restarts.
//!
//! All random draws happen on the calling thread from a seeded stream; only
//! fitness evaluation is spread over the worker pool, so results do not depend
//! on the number of workers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub tournament: usize,
    pub crossover_rate: f64,
    /// BLX-alpha extension of the parent interval.
    pub blend: f64,
    pub mutation_rate: f64,
    /// Gaussian mutation std as a fraction of the box width.
    pub mutation_scale: f64,
    /// Mutation std on the last generation relative to the first (geometric decay).
    pub mutation_decay: f64,
    pub elites: usize,
    /// Penalty as a multiple of the problem's baseline objective.
    pub penalty: f64,
    pub seed: u64,
    pub restarts: usize,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population: 200,
            generations: 300,
            tournament: 4,
            crossover_rate: 0.9,
            blend: 0.5,
            mutation_rate: 0.1,
            mutation_scale: 0.05,
            mutation_decay: 0.01,
            elites: 2,
            penalty: 1e3,
            seed: 0,
            restarts: 4,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(format!("ga: {m}")));
        if self.population < 2 || self.generations == 0 || self.tournament == 0 || self.restarts == 0 {
            return bad("population >= 2 and generations, tournament, restarts >= 1 required");
        }
        if self.elites >= self.population {
            return bad("elites must be fewer than the population");
        }
        for (name, r) in [("crossover_rate", self.crossover_rate), ("mutation_rate", self.mutation_rate)] {
            if !(0.0..=1.0).contains(&r) {
                return bad(&format!("{name} outside [0, 1]"));
            }
        }
        if !(self.mutation_scale >= 0.0) || !(self.mutation_decay > 0.0 && self.mutation_decay <= 1.0) || !(self.blend >= 0.0) {
            return bad("mutation_scale, blend must be >= 0 and mutation_decay in (0, 1]");
        }
        if !(self.penalty > 0.0) {
            return bad("penalty must be positive");
        }
        Ok(())
    }

    /// Same settings with a derived seed.
    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..*self }
    }
}

/// One row of GA telemetry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GenerationStats {
    pub restart: usize,
    pub generation: usize,
    /// Best value found so far over all restarts.
    pub best: f64,
    /// Mean of the finite values in the current population.
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaResult {
    pub best: Vec<f64>,
    pub value: f64,
    /// Best value of each restart.
    pub restart_values: Vec<f64>,
    pub telemetry: Vec<GenerationStats>,
    pub evaluations: usize,
}

fn restart_seed(seed: u64, restart: usize) -> u64 {
    seed ^ (restart as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn clamp_into(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((v, lo), hi) in x.iter_mut().zip(lower).zip(upper) {
        *v = v.clamp(*lo, *hi);
    }
}

fn tournament(rng: &mut ChaCha8Rng, values: &[f64], size: usize) -> usize {
    let mut best = rng.random_range(0..values.len());
    for _ in 1..size {
        let c = rng.random_range(0..values.len());
        if values[c] < values[best] {
            best = c;
        }
    }
    best
}

/// Minimize `fitness` over the box `[lower, upper]`.
///
/// `seeds` are placed (clamped) at the head of every restart's initial population.
/// Non-finite fitness values rank last.
pub fn ga_minimize<F>(fitness: F, lower: &[f64], upper: &[f64], cfg: &GaConfig, seeds: &[Vec<f64>], workers: usize) -> Result<GaResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    cfg.validate()?;
    let dim = lower.len();
    if upper.len() != dim || lower.iter().zip(upper).any(|(l, u)| !(l <= u)) {
        return Err(Error::InvalidParameter("ga: inconsistent box bounds".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))?;
    let evaluate = |pop: &[Vec<f64>]| -> Vec<f64> {
        pool.install(|| {
            pop.par_iter()
                .map(|x| {
                    let v = fitness(x);
                    if v.is_nan() {
                        f64::INFINITY
                    } else {
                        v
                    }
                })
                .collect()
        })
    };
    let width: Vec<f64> = lower.iter().zip(upper).map(|(l, u)| u - l).collect();
    let unit = Normal::new(0.0, 1.0).expect("unit normal");

    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut restart_values = Vec::with_capacity(cfg.restarts);
    let mut telemetry = Vec::with_capacity(cfg.restarts * (cfg.generations + 1));
    let mut evaluations = 0;

    for restart in 0..cfg.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(restart_seed(cfg.seed, restart));
        let mut pop: Vec<Vec<f64>> = Vec::with_capacity(cfg.population);
        for s in seeds.iter().take(cfg.population) {
            let mut x = s.clone();
            x.resize(dim, 0.0);
            clamp_into(&mut x, lower, upper);
            pop.push(x);
        }
        while pop.len() < cfg.population {
            pop.push((0..dim).map(|i| lower[i] + rng.random::<f64>() * width[i]).collect());
        }
        let mut values = evaluate(&pop);
        evaluations += pop.len();
        let mut restart_best = f64::INFINITY;

        for generation in 0..=cfg.generations {
            let mut order: Vec<usize> = (0..pop.len()).collect();
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            let lead = order[0];
            restart_best = restart_best.min(values[lead]);
            if best.as_ref().is_none_or(|b| values[lead] < b.1) {
                best = Some((pop[lead].clone(), values[lead]));
            }
            let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
            telemetry.push(GenerationStats {
                restart,
                generation,
                best: best.as_ref().map_or(f64::INFINITY, |b| b.1),
                mean: if finite.is_empty() {
                    f64::INFINITY
                } else {
                    finite.iter().sum::<f64>() / finite.len() as f64
                },
            });
            if generation == cfg.generations {
                break;
            }

            let progress = generation as f64 / cfg.generations.max(1) as f64;
            let sigma = cfg.mutation_scale * cfg.mutation_decay.powf(progress);
            let mut next: Vec<Vec<f64>> = order.iter().take(cfg.elites).map(|&i| pop[i].clone()).collect();
            let mut children = Vec::with_capacity(cfg.population - cfg.elites);
            while next.len() + children.len() < cfg.population {
                let a = &pop[tournament(&mut rng, &values, cfg.tournament)];
                let b = &pop[tournament(&mut rng, &values, cfg.tournament)];
                let mut child: Vec<f64> = if rng.random::<f64>() < cfg.crossover_rate {
                    (0..dim)
                        .map(|i| {
                            let (lo, hi) = (a[i].min(b[i]), a[i].max(b[i]));
                            let ext = cfg.blend * (hi - lo);
                            lo - ext + rng.random::<f64>() * (hi - lo + 2.0 * ext)
                        })
                        .collect()
                } else {
                    a.clone()
                };
                for i in 0..dim {
                    if rng.random::<f64>() < cfg.mutation_rate {
                        child[i] += sigma * width[i] * unit.sample(&mut rng);
                    }
                }
                clamp_into(&mut child, lower, upper);
                children.push(child);
            }
            let child_values = evaluate(&children);
            evaluations += children.len();
            let elite_values: Vec<f64> = order.iter().take(cfg.elites).map(|&i| values[i]).collect();
            next.extend(children);
            pop = next;
            values = elite_values.into_iter().chain(child_values).collect();
        }
        restart_values.push(restart_best);
    }
    let (best, value) = best.expect("at least one restart");
    Ok(GaResult {
        best,
        value,
        restart_values,
        telemetry,
        evaluations,
    })
}
