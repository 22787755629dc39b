//! Genetic search over inter-pulse delays maximizing coherence protection.
//!
//! A genome is the `n + 1` delays `d₀ … d_n` with `Σd = T` and every
//! `d ≥ min_delay`. Offspring are repaired back onto that simplex by clipping
//! to `min_delay` and rescaling the slack.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    closed_form_trace, comb_trace, continuum_trace, uniform_grid, DecoherenceTrace,
    Normalization,
};
use crate::error::{Error, Result};
use crate::measures::{blp_measure, protection};
use crate::quadrature::QuadOptions;
use crate::sequences::{make_cpmg, make_udd, PulseSequence};
use crate::spectra::{EnvironmentSpec, NoiseModel};

/// How continuum traces are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContinuumMethod {
    /// Closed form at zero temperature, quadrature otherwise.
    #[default]
    Auto,
    ClosedForm,
    Quadrature,
}

/// The trace a fitness value is computed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FitnessModel {
    Continuum {
        environment: EnvironmentSpec,
        normalization: Normalization,
        #[serde(default)]
        method: ContinuumMethod,
    },
    Comb {
        model: NoiseModel,
    },
}

impl FitnessModel {
    pub fn continuum(environment: EnvironmentSpec, normalization: Normalization) -> Self {
        FitnessModel::Continuum {
            environment,
            normalization,
            method: ContinuumMethod::Auto,
        }
    }

    pub fn trace(&self, seq: &PulseSequence, grid: &[f64]) -> Result<DecoherenceTrace> {
        match self {
            FitnessModel::Continuum {
                environment,
                normalization,
                method,
            } => {
                let closed = match method {
                    ContinuumMethod::Auto => environment.is_zero_temperature(),
                    ContinuumMethod::ClosedForm => true,
                    ContinuumMethod::Quadrature => false,
                };
                if closed {
                    closed_form_trace(environment, *normalization, seq, grid)
                } else {
                    continuum_trace(environment, *normalization, seq, grid, &QuadOptions::default())
                }
            }
            FitnessModel::Comb { model } => comb_trace(model, seq, grid),
        }
    }
}

/// `𝒫` of `seq` at `horizon`, on a uniform grid of `grid_points` over
/// `[0, horizon]`.
pub fn fitness(
    model: &FitnessModel,
    seq: &PulseSequence,
    horizon: f64,
    grid_points: usize,
) -> Result<f64> {
    let grid = uniform_grid(horizon, grid_points)?;
    protection(&model.trace(seq, &grid)?, horizon)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaConfig {
    pub population_size: usize,
    pub max_generations: usize,
    /// Seconds.
    pub min_delay: f64,
    /// Initial mutation standard deviation as a fraction of `T`.
    pub mutation_scale: f64,
    /// Per-generation decay factor of the mutation scale.
    pub mutation_decay: f64,
    pub crossover_rate: f64,
    pub tournament_size: usize,
    pub elitism_count: usize,
    pub seed: u64,
    pub stall_generations: usize,
    /// Times a stalled population is re-seeded (elites kept) before stopping.
    pub restarts: usize,
    /// Grid points used to evaluate `𝒫`.
    pub grid_points: usize,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population_size: 64,
            max_generations: 500,
            min_delay: crate::DEFAULT_MIN_DELAY,
            mutation_scale: 0.02,
            mutation_decay: 0.995,
            crossover_rate: 0.9,
            tournament_size: 4,
            elitism_count: 2,
            seed: 0,
            stall_generations: 80,
            restarts: 3,
            grid_points: crate::DEFAULT_GRID_POINTS,
        }
    }
}

impl GaConfig {
    pub fn validate(&self, total_time: f64, pulses: usize) -> Result<()> {
        if self.population_size < 2 {
            return Err(Error::invalid("population_size", "need at least 2"));
        }
        if self.elitism_count >= self.population_size {
            return Err(Error::invalid("elitism_count", "must be below population_size"));
        }
        if self.tournament_size == 0 {
            return Err(Error::invalid("tournament_size", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) {
            return Err(Error::invalid("crossover_rate", "must lie in [0, 1]"));
        }
        if !(self.mutation_scale >= 0.0 && self.mutation_decay > 0.0 && self.mutation_decay <= 1.0) {
            return Err(Error::invalid("mutation_scale", "needs scale >= 0 and decay in (0, 1]"));
        }
        if !(self.min_delay >= 0.0) {
            return Err(Error::invalid("min_delay", "must be >= 0"));
        }
        if !(total_time.is_finite() && total_time > 0.0) {
            return Err(Error::invalid("total_time_s", format!("must be > 0, got {total_time}")));
        }
        let needed = self.min_delay * (pulses + 1) as f64;
        if needed > total_time {
            return Err(Error::Infeasible {
                pulses,
                needed,
                total: total_time,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub best_sequence: PulseSequence,
    pub best_fitness: f64,
    /// Best-ever fitness after each generation.
    pub fitness_history: Vec<f64>,
    /// Fitness of the exact CPMG sequence for the same `(T, n)`.
    pub baseline: f64,
    /// Whether exact CPMG satisfies the minimum delay; if not, a repaired
    /// CPMG seeded the population.
    pub baseline_feasible: bool,
    pub generations: usize,
}

/// Project delays onto `{d ≥ min_delay, Σd = total}`.
pub fn repair_delays(delays: &mut [f64], min_delay: f64, total: f64) {
    let k = delays.len() as f64;
    let target = total - min_delay * k;
    let mut slack = 0.0;
    for d in delays.iter_mut() {
        if !d.is_finite() || *d < min_delay {
            *d = min_delay;
        }
        slack += *d - min_delay;
    }
    if slack > 0.0 {
        let r = target / slack;
        for d in delays.iter_mut() {
            *d = min_delay + (*d - min_delay) * r;
        }
    } else {
        for d in delays.iter_mut() {
            *d = min_delay + target / k;
        }
    }
}

fn decode(delays: &[f64], total: f64) -> Result<PulseSequence> {
    let mut acc = 0.0;
    let times: Vec<f64> = delays[..delays.len() - 1]
        .iter()
        .map(|d| {
            acc += d;
            acc
        })
        .collect();
    PulseSequence::new(total, times, "ndd")
}

fn random_genome(rng: &mut ChaCha8Rng, k: usize, min_delay: f64, total: f64) -> Vec<f64> {
    let mut e: Vec<f64> = (0..k).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let sum: f64 = e.iter().sum();
    let slack = total - min_delay * k as f64;
    for x in &mut e {
        *x = min_delay + slack * *x / sum;
    }
    e
}

fn tournament(rng: &mut ChaCha8Rng, fit: &[f64], size: usize) -> usize {
    let mut best = rng.gen_range(0..fit.len());
    for _ in 1..size {
        let c = rng.gen_range(0..fit.len());
        if fit[c] > fit[best] {
            best = c;
        }
    }
    best
}

/// Genetic search for the `n`-pulse sequence maximizing `𝒫` at `total_time`.
pub fn optimize_ndd(
    model: &FitnessModel,
    total_time: f64,
    pulses: usize,
    cfg: &GaConfig,
) -> Result<OptimizationResult> {
    if pulses == 0 {
        return Err(Error::invalid("pulses", "need at least one pulse"));
    }
    cfg.validate(total_time, pulses)?;
    let k = pulses + 1;
    let eval = |g: &Vec<f64>| -> Result<f64> {
        fitness(model, &decode(g, total_time)?, total_time, cfg.grid_points)
    };

    let cpmg = make_cpmg(total_time, pulses)?;
    let baseline = fitness(model, &cpmg, total_time, cfg.grid_points)?;
    let baseline_feasible = cpmg.min_gap() >= cfg.min_delay;
    let mut seed_genome = cpmg.delays();
    repair_delays(&mut seed_genome, cfg.min_delay, total_time);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut pop = vec![seed_genome];
    while pop.len() < cfg.population_size {
        pop.push(random_genome(&mut rng, k, cfg.min_delay, total_time));
    }
    let mut fit: Vec<f64> = pop.par_iter().map(eval).collect::<Result<_>>()?;

    let argmax = |f: &[f64]| (0..f.len()).fold(0, |b, i| if f[i] > f[b] { i } else { b });
    let first = argmax(&fit);
    let mut best = (pop[first].clone(), fit[first]);
    let mut history = Vec::with_capacity(cfg.max_generations);
    let mut stall = 0;
    let mut generations = 0;
    let mut epoch = 0;
    let mut restarts_left = cfg.restarts;

    for gen in 0..cfg.max_generations {
        generations = gen + 1;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(gen as u64 + 1);
        let sigma = cfg.mutation_scale * total_time * cfg.mutation_decay.powi((gen - epoch) as i32);
        let normal = Normal::new(0.0, sigma.max(f64::MIN_POSITIVE))
            .map_err(|e| Error::invalid("mutation_scale", e.to_string()))?;

        let mut order: Vec<usize> = (0..pop.len()).collect();
        order.sort_by(|&a, &b| fit[b].total_cmp(&fit[a]).then(a.cmp(&b)));
        let mut next: Vec<Vec<f64>> = order[..cfg.elitism_count]
            .iter()
            .map(|&i| pop[i].clone())
            .collect();
        let mut next_fit: Vec<f64> = order[..cfg.elitism_count].iter().map(|&i| fit[i]).collect();

        let mut children = Vec::with_capacity(pop.len() - next.len());
        while next.len() + children.len() < cfg.population_size {
            let a = &pop[tournament(&mut rng, &fit, cfg.tournament_size)];
            let b = &pop[tournament(&mut rng, &fit, cfg.tournament_size)];
            let mut child: Vec<f64> = if rng.gen::<f64>() < cfg.crossover_rate {
                // BLX-0.5
                a.iter()
                    .zip(b)
                    .map(|(&x, &y)| {
                        let (lo, hi) = (x.min(y), x.max(y));
                        let ext = 0.5 * (hi - lo);
                        rng.gen::<f64>() * (hi - lo + 2.0 * ext) + lo - ext
                    })
                    .collect()
            } else {
                a.clone()
            };
            if sigma > 0.0 {
                for d in &mut child {
                    *d += normal.sample(&mut rng);
                }
            }
            repair_delays(&mut child, cfg.min_delay, total_time);
            children.push(child);
        }
        let child_fit: Vec<f64> = children.par_iter().map(eval).collect::<Result<_>>()?;
        next.extend(children);
        next_fit.extend(child_fit);
        pop = next;
        fit = next_fit;

        let i = argmax(&fit);
        if fit[i] > best.1 {
            if fit[i] > best.1 + 1e-12 {
                stall = 0;
            } else {
                stall += 1;
            }
            best = (pop[i].clone(), fit[i]);
        } else {
            stall += 1;
        }
        history.push(best.1);
        if stall >= cfg.stall_generations {
            if restarts_left == 0 {
                break;
            }
            restarts_left -= 1;
            stall = 0;
            epoch = gen + 1;
            let mut order: Vec<usize> = (0..pop.len()).collect();
            order.sort_by(|&a, &b| fit[b].total_cmp(&fit[a]).then(a.cmp(&b)));
            let keep = cfg.elitism_count.max(1);
            let fresh: Vec<Vec<f64>> = (keep..pop.len())
                .map(|_| random_genome(&mut rng, k, cfg.min_delay, total_time))
                .collect();
            let fresh_fit: Vec<f64> = fresh.par_iter().map(eval).collect::<Result<_>>()?;
            let mut kept: Vec<Vec<f64>> = order[..keep].iter().map(|&i| pop[i].clone()).collect();
            let mut kept_fit: Vec<f64> = order[..keep].iter().map(|&i| fit[i]).collect();
            kept.extend(fresh);
            kept_fit.extend(fresh_fit);
            pop = kept;
            fit = kept_fit;
        }
    }

    Ok(OptimizationResult {
        best_sequence: decode(&best.0, total_time)?,
        best_fitness: best.1,
        fitness_history: history,
        baseline,
        baseline_feasible,
        generations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub protection_cpmg: f64,
    pub protection_udd: f64,
    pub protection_ndd: Option<f64>,
    pub blp_cpmg: f64,
    pub blp_udd: f64,
    pub blp_ndd: Option<f64>,
}

/// `𝒫` and `𝒩` per pulse count under CPMG, UDD and (with `ga`) NDD.
pub fn sweep_pulse_count(
    model: &FitnessModel,
    total_time: f64,
    counts: &[usize],
    grid_points: usize,
    ga: Option<&GaConfig>,
) -> Result<Vec<SweepRow>> {
    let grid = uniform_grid(total_time, grid_points)?;
    let measure = |seq: &PulseSequence| -> Result<(f64, f64)> {
        let tr = model.trace(seq, &grid)?;
        Ok((protection(&tr, total_time)?, blp_measure(&tr)))
    };
    counts
        .iter()
        .map(|&n| {
            let (pc, nc) = measure(&make_cpmg(total_time, n)?)?;
            let (pu, nu) = measure(&make_udd(total_time, n)?)?;
            let ndd = match ga {
                Some(cfg) => {
                    let cfg = GaConfig { grid_points, ..*cfg };
                    let r = optimize_ndd(model, total_time, n, &cfg)?;
                    Some(measure(&r.best_sequence)?)
                }
                None => None,
            };
            Ok(SweepRow {
                n,
                protection_cpmg: pc,
                protection_udd: pu,
                protection_ndd: ndd.map(|x| x.0),
                blp_cpmg: nc,
                blp_udd: nu,
                blp_ndd: ndd.map(|x| x.1),
            })
        })
        .collect()
}
