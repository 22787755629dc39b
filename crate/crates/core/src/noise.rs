//! Seeded realizations of the random-phase field
//! `ξ(t) = γ Σ_k a(k) cos(kω_b t + φ_k)` and the dephasing phase it imprints.
//!
//! Realization `j` of an ensemble draws its phases from ChaCha8 stream `j`
//! keyed by the master seed, so any subset of realizations can be generated
//! independently and in any order with identical results.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequences::{filter_segments, PulseSequence};
use crate::spectra::NoiseModel;

/// Identifies one realization: stream `index` of generator `master_seed`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RealizationKey {
    pub master_seed: u64,
    pub index: u64,
}

#[derive(Debug, Clone)]
pub struct NoiseRealization<'a> {
    model: &'a NoiseModel,
    phases: Vec<f64>,
    key: RealizationKey,
}

/// Random phases for realization `index` of `master_seed`, uniform on [−π, π].
pub(crate) fn draw_phases(num_harmonics: usize, master_seed: u64, index: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    let dist = Uniform::new_inclusive(-PI, PI);
    (0..num_harmonics).map(|_| dist.sample(&mut rng)).collect()
}

/// Draw realization `index` of the ensemble keyed by `master_seed`.
pub fn sample_realization(model: &NoiseModel, master_seed: u64, index: u64) -> NoiseRealization<'_> {
    NoiseRealization {
        model,
        phases: draw_phases(model.num_harmonics(), master_seed, index),
        key: RealizationKey { master_seed, index },
    }
}

impl<'a> NoiseRealization<'a> {
    /// Realization with explicit phases, e.g. for reproducing a recorded run.
    pub fn with_phases(model: &'a NoiseModel, phases: Vec<f64>) -> Result<Self> {
        if phases.len() != model.num_harmonics() {
            return Err(Error::invalid(
                "phases",
                format!(
                    "expected {} phases, got {}",
                    model.num_harmonics(),
                    phases.len()
                ),
            ));
        }
        if let Some(p) = phases.iter().find(|p| !(p.abs() <= PI)) {
            return Err(Error::invalid("phases", format!("{p} outside [-pi, pi]")));
        }
        Ok(Self {
            model,
            phases,
            key: RealizationKey {
                master_seed: 0,
                index: 0,
            },
        })
    }

    pub fn model(&self) -> &NoiseModel {
        self.model
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn key(&self) -> RealizationKey {
        self.key
    }

    /// `ξ(t)` in rad/s.
    pub fn evaluate_xi(&self, t: f64) -> f64 {
        let wb = self.model.omega_b;
        let sum: f64 = self
            .model
            .amplitudes
            .iter()
            .zip(&self.phases)
            .enumerate()
            .map(|(i, (a, phi))| a * ((i + 1) as f64 * wb * t + phi).cos())
            .sum();
        self.model.gamma * sum
    }

    /// `φ(t_i) = ∫₀^{t_i} f(t′) ξ(t′) dt′` under `seq`, exact per harmonic.
    pub fn accumulate_phase(&self, seq: &PulseSequence, grid: &[f64]) -> Result<Vec<f64>> {
        check_grid(grid, seq.total_time())?;
        Ok(self.accumulate_flips(seq.pulse_times(), grid))
    }

    /// Phase accumulation for an arbitrary nondecreasing list of sign flips.
    /// Coincident flips cancel.
    pub fn accumulate_flips(&self, flips: &[f64], grid: &[f64]) -> Vec<f64> {
        let wb = self.model.omega_b;
        grid.iter()
            .map(|&t| {
                let sum: f64 = self
                    .model
                    .amplitudes
                    .iter()
                    .zip(&self.phases)
                    .enumerate()
                    .map(|(i, (a, phi))| {
                        // ∫ f cos(ωt′+φ) = Re[e^{iφ} conj(F(ω,t))]
                        let f = filter_segments(flips, (i + 1) as f64 * wb, t);
                        a * (Complex64::from_polar(1.0, *phi) * f.conj()).re
                    })
                    .sum();
                self.model.gamma * sum
            })
            .collect()
    }
}

pub(crate) fn check_grid(grid: &[f64], total_time: f64) -> Result<()> {
    let mut prev = f64::NEG_INFINITY;
    for &t in grid {
        if !(t >= 0.0 && t <= total_time) {
            return Err(Error::OutOfRange {
                t,
                total: total_time,
            });
        }
        if !(t >= prev) {
            return Err(Error::GridMismatch(format!(
                "grid must be ascending ({t:e} after {prev:e})"
            )));
        }
        prev = t;
    }
    Ok(())
}

/// Ensemble size, seed and optional binning for error bars.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub num_realizations: usize,
    pub master_seed: u64,
    /// `(num_bins, bin_size)`: bins are consecutive realization indices.
    #[serde(default)]
    pub binning: Option<(usize, usize)>,
}

impl EnsembleSpec {
    pub fn new(num_realizations: usize, master_seed: u64) -> Result<Self> {
        let spec = Self {
            num_realizations,
            master_seed,
            binning: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_binning(mut self, num_bins: usize, bin_size: usize) -> Result<Self> {
        self.binning = Some((num_bins, bin_size));
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_realizations == 0 {
            return Err(Error::invalid("num_realizations", "must be positive"));
        }
        if let Some((bins, size)) = self.binning {
            if bins == 0 || size == 0 {
                return Err(Error::invalid("binning", "bins and bin size must be positive"));
            }
            if bins.saturating_mul(size) > self.num_realizations {
                return Err(Error::invalid(
                    "binning",
                    format!(
                        "{bins} bins of {size} exceed {} realizations",
                        self.num_realizations
                    ),
                ));
            }
        }
        Ok(())
    }
}

/// Write per-realization phase traces as CSV (`realization_index,t,phi`).
pub fn dump_phase_traces<W: Write>(
    out: &mut W,
    model: &NoiseModel,
    seq: &PulseSequence,
    grid: &[f64],
    ensemble: &EnsembleSpec,
) -> Result<()> {
    check_grid(grid, seq.total_time())?;
    writeln!(out, "realization_index,t,phi")?;
    for j in 0..ensemble.num_realizations as u64 {
        let r = sample_realization(model, ensemble.master_seed, j);
        let phi = r.accumulate_phase(seq, grid)?;
        for (t, p) in grid.iter().zip(phi) {
            writeln!(out, "{j},{t:.9e},{p:.12e}")?;
        }
    }
    Ok(())
}
