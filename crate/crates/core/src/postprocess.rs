//! Fourier-domain smoothing of finite-ensemble traces and bin error bars.
//!
//! The trace is mirrored into an even periodic sequence, so the transform
//! sees no wrap-around jump. The passband ends where the spectrum stays below
//! `noise_floor_factor` times the median magnitude of its upper half for
//! eight consecutive bins. A raised-cosine taper of equal width follows, and
//! the dominant low-frequency bin is always kept at full magnitude.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dynamics::DecoherenceTrace;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Taper {
    RaisedCosine,
    Rectangular,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingConfig {
    /// Upper bound on the retained fraction of the one-sided spectrum.
    pub passband_fraction: f64,
    /// Passband ends where `|X_k|` falls below this multiple of the noise floor.
    pub noise_floor_factor: f64,
    pub taper: Taper,
    pub preserve_peak: bool,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        Self {
            passband_fraction: 1.0,
            noise_floor_factor: 10.0,
            taper: Taper::RaisedCosine,
            preserve_peak: true,
        }
    }
}

impl SmoothingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.passband_fraction > 0.0 && self.passband_fraction <= 1.0) {
            return Err(Error::invalid(
                "passband_fraction",
                format!("must lie in (0, 1], got {}", self.passband_fraction),
            ));
        }
        if !(self.noise_floor_factor.is_finite() && self.noise_floor_factor > 0.0) {
            return Err(Error::invalid(
                "noise_floor_factor",
                format!("must be > 0, got {}", self.noise_floor_factor),
            ));
        }
        Ok(())
    }
}

/// What the filter did.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingReport {
    /// First bin outside the flat passband.
    pub cutoff_bin: usize,
    /// Number of one-sided bins (`L/2 + 1` for the mirrored length `L`).
    pub spectrum_bins: usize,
    pub peak_bin: Option<usize>,
    pub noise_floor: f64,
    /// Largest imaginary part after the inverse transform, relative to the
    /// largest real part.
    pub imag_residual: f64,
}

/// Energies of the mirrored, detrended trace split at the cutoff bin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandEnergies {
    /// `Σ|x_i|²` in the time domain.
    pub total: f64,
    /// `(1/L) Σ|X_k|²` over the flat passband.
    pub passband: f64,
    /// `(1/L) Σ|X_k|²` over everything else.
    pub removed: f64,
}

pub(crate) fn check_uniform(grid: &[f64]) -> Result<f64> {
    if grid.len() < 3 {
        return Err(Error::GridMismatch("smoothing needs at least three points".into()));
    }
    let step = (grid[grid.len() - 1] - grid[0]) / (grid.len() - 1) as f64;
    for (i, w) in grid.windows(2).enumerate() {
        if ((w[1] - w[0]) - step).abs() > 1e-6 * step {
            return Err(Error::GridMismatch(format!(
                "grid is not uniform at index {i}: step {:e} vs {step:e}",
                w[1] - w[0]
            )));
        }
    }
    Ok(step)
}

/// Even extension `y₀ … y_{n−1} y_{n−2} … y₁`, detrended by the last value.
fn mirrored(values: &[f64]) -> (Vec<Complex64>, f64) {
    let n = values.len();
    let offset = values[n - 1];
    let mut ext = Vec::with_capacity(2 * n - 2);
    ext.extend(values.iter().map(|v| Complex64::new(v - offset, 0.0)));
    ext.extend(values[1..n - 1].iter().rev().map(|v| Complex64::new(v - offset, 0.0)));
    (ext, offset)
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let m = xs.len();
    if m % 2 == 1 {
        xs[m / 2]
    } else {
        0.5 * (xs[m / 2 - 1] + xs[m / 2])
    }
}

const QUIET_RUN: usize = 8;

struct Plan {
    weights: Vec<f64>,
    cutoff: usize,
    peak: Option<usize>,
    floor: f64,
}

/// One-sided filter weights for the spectrum `spec` (length `L`).
fn plan(spec: &[Complex64], cfg: &SmoothingConfig) -> Plan {
    let half = spec.len() / 2;
    let mag: Vec<f64> = spec[..=half].iter().map(|x| x.norm()).collect();
    let floor = median(mag[half / 2..].to_vec());
    let threshold = cfg.noise_floor_factor * floor;
    let cap = ((cfg.passband_fraction * (half + 1) as f64).ceil() as usize).clamp(1, half + 1);
    // start of the first run of QUIET_RUN bins below the threshold; shorter
    // dips are notches between harmonics, not the noise floor
    let mut cutoff = half + 1;
    let mut run = 0;
    for k in 1..=half {
        if mag[k] < threshold {
            run += 1;
            if run == QUIET_RUN {
                cutoff = k + 1 - QUIET_RUN;
                break;
            }
        } else {
            run = 0;
        }
    }
    let cutoff = cutoff.min(cap);

    let mut weights = vec![0.0; half + 1];
    for (k, w) in weights.iter_mut().enumerate() {
        *w = if k < cutoff {
            1.0
        } else {
            match cfg.taper {
                Taper::Rectangular => 0.0,
                Taper::RaisedCosine if k < 2 * cutoff => {
                    let x = (k - cutoff) as f64 / cutoff as f64;
                    0.5 * (1.0 + (std::f64::consts::PI * x).cos())
                }
                Taper::RaisedCosine => 0.0,
            }
        };
    }
    let peak = if cfg.preserve_peak && half >= 1 {
        let top = (2 * cutoff).min(half + 1).max(2);
        (1..top).max_by(|&a, &b| mag[a].total_cmp(&mag[b]))
    } else {
        None
    };
    if let Some(p) = peak {
        weights[p] = 1.0;
    }
    Plan {
        weights,
        cutoff,
        peak,
        floor,
    }
}

fn forward(values: &[f64]) -> (Vec<Complex64>, f64) {
    let (mut buf, offset) = mirrored(values);
    FftPlanner::<f64>::new()
        .plan_fft_forward(buf.len())
        .process(&mut buf);
    (buf, offset)
}

/// Smooth a trace on a uniform grid, also reporting the chosen passband.
pub fn smooth_detailed(
    trace: &DecoherenceTrace,
    cfg: &SmoothingConfig,
) -> Result<(DecoherenceTrace, SmoothingReport)> {
    cfg.validate()?;
    check_uniform(trace.grid())?;
    let n = trace.len();
    let (mut spec, offset) = forward(trace.values());
    let len = spec.len();
    let p = plan(&spec, cfg);
    for (k, x) in spec.iter_mut().enumerate() {
        let j = if k <= len / 2 { k } else { len - k };
        *x *= p.weights[j];
    }
    FftPlanner::<f64>::new()
        .plan_fft_inverse(len)
        .process(&mut spec);
    let scale = 1.0 / len as f64;
    let max_re = spec.iter().fold(0.0f64, |m, x| m.max(x.re.abs()));
    let max_im = spec.iter().fold(0.0f64, |m, x| m.max(x.im.abs()));

    let mut out: Vec<f64> = spec[..n].iter().map(|x| x.re * scale + offset).collect();
    if out[0] > 0.0 {
        let r = 1.0 / out[0];
        for v in &mut out {
            *v *= r;
        }
    }
    for v in &mut out {
        *v = v.clamp(0.0, 1.0);
    }
    out[0] = 1.0;
    let report = SmoothingReport {
        cutoff_bin: p.cutoff,
        spectrum_bins: len / 2 + 1,
        peak_bin: p.peak,
        noise_floor: p.floor,
        imag_residual: if max_re > 0.0 { max_im / max_re } else { 0.0 },
    };
    Ok((trace.with_values(out)?, report))
}

pub fn smooth(trace: &DecoherenceTrace, cfg: &SmoothingConfig) -> Result<DecoherenceTrace> {
    smooth_detailed(trace, cfg).map(|(t, _)| t)
}

/// Parseval bookkeeping for the passband chosen under `cfg`.
pub fn band_energies(trace: &DecoherenceTrace, cfg: &SmoothingConfig) -> Result<BandEnergies> {
    cfg.validate()?;
    check_uniform(trace.grid())?;
    let (time, _) = mirrored(trace.values());
    let total = time.iter().map(|x| x.norm_sqr()).sum();
    let (spec, _) = forward(trace.values());
    let len = spec.len();
    let p = plan(&spec, cfg);
    let (mut passband, mut removed) = (0.0, 0.0);
    for (k, x) in spec.iter().enumerate() {
        let j = if k <= len / 2 { k } else { len - k };
        if j < p.cutoff {
            passband += x.norm_sqr();
        } else {
            removed += x.norm_sqr();
        }
    }
    Ok(BandEnergies {
        total,
        passband: passband / len as f64,
        removed: removed / len as f64,
    })
}

/// Pointwise mean and sample standard deviation across bin traces.
pub fn binned_errorbars(per_bin: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>)> {
    if per_bin.len() < 2 {
        return Err(Error::invalid("bins", "need at least two bins"));
    }
    let n = per_bin[0].len();
    if let Some(b) = per_bin.iter().position(|b| b.len() != n) {
        return Err(Error::GridMismatch(format!(
            "bin {b} has {} points, bin 0 has {n}",
            per_bin[b].len()
        )));
    }
    let m = per_bin.len() as f64;
    let mut mean = vec![0.0; n];
    for b in per_bin {
        for (acc, v) in mean.iter_mut().zip(b) {
            *acc += v;
        }
    }
    for v in &mut mean {
        *v /= m;
    }
    let mut var = vec![0.0; n];
    for b in per_bin {
        for ((acc, v), mu) in var.iter_mut().zip(b).zip(&mean) {
            *acc += (v - mu) * (v - mu);
        }
    }
    let sd = var.into_iter().map(|v| (v / (m - 1.0)).sqrt()).collect();
    Ok((mean, sd))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{closed_form_trace, uniform_grid, Method, Normalization};
    use crate::sequences::{make_cpmg, PulseSequence};
    use crate::spectra::EnvironmentSpec;
    use proptest::prelude::*;

    fn clean(s: f64, seq: &PulseSequence) -> DecoherenceTrace {
        let env = EnvironmentSpec::standard(s, 10.0).unwrap();
        let grid = uniform_grid(seq.total_time(), 500).unwrap();
        closed_form_trace(&env, Normalization::standard(), seq, &grid).unwrap()
    }

    fn max_dev(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn noiseless_traces_pass_through() {
        let free = PulseSequence::free(2.5e-3).unwrap();
        let cpmg = make_cpmg(2.5e-3, 10).unwrap();
        for (s, seq) in [(1.0, &free), (2.5, &free), (4.0, &free), (5.5, &free), (1.0, &cpmg)] {
            let tr = clean(s, seq);
            let (out, rep) = smooth_detailed(&tr, &SmoothingConfig::default()).unwrap();
            let dev = max_dev(out.values(), tr.values());
            assert!(dev < 5e-3, "s={s} {}: {dev}", seq.label());
            assert!(rep.imag_residual < 1e-10);
            assert_eq!(out.values()[0], 1.0);
        }
    }

    #[test]
    fn removes_high_frequency_dither() {
        let tr = clean(4.0, &PulseSequence::free(2.5e-3).unwrap());
        let noisy: Vec<f64> = tr
            .values()
            .iter()
            .enumerate()
            .map(|(i, v)| v + 0.03 * (2.0 * std::f64::consts::PI * 0.37 * i as f64).sin())
            .collect();
        let noisy = tr.with_values(noisy).unwrap();
        let out = smooth(&noisy, &SmoothingConfig::default()).unwrap();
        let dev = max_dev(out.values(), tr.values());
        assert!(dev < 0.01, "{dev}");
    }

    #[test]
    fn idempotent() {
        let tr = clean(4.0, &make_cpmg(2.5e-3, 6).unwrap());
        let noisy: Vec<f64> = tr
            .values()
            .iter()
            .enumerate()
            .map(|(i, v)| (v + 0.02 * ((i * 7919 % 101) as f64 / 50.0 - 1.0)).clamp(0.0, 1.0))
            .collect();
        let cfg = SmoothingConfig::default();
        let once = smooth(&tr.with_values(noisy).unwrap(), &cfg).unwrap();
        let twice = smooth(&once, &cfg).unwrap();
        assert!(max_dev(once.values(), twice.values()) < 1e-3);
    }

    #[test]
    fn parseval_split() {
        let tr = clean(2.0, &make_cpmg(2.5e-3, 3).unwrap());
        for frac in [0.05, 0.3, 1.0] {
            let cfg = SmoothingConfig {
                passband_fraction: frac,
                ..Default::default()
            };
            let e = band_energies(&tr, &cfg).unwrap();
            assert!(((e.total - e.passband) - e.removed).abs() <= 1e-10 * e.total);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let tr = DecoherenceTrace::new(vec![0.0, 1.0, 3.0], vec![1.0, 0.5, 0.2], Method::Comb)
            .unwrap();
        assert!(matches!(
            smooth(&tr, &SmoothingConfig::default()),
            Err(Error::GridMismatch(_))
        ));
        let cfg = SmoothingConfig {
            passband_fraction: 0.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn errorbar_examples() {
        let a = vec![1.0, 0.5, 0.2];
        let (m, s) = binned_errorbars(&[a.clone(), a.clone(), a.clone()]).unwrap();
        for (x, y) in m.iter().zip(&a) {
            assert!((x - y).abs() < 1e-15);
        }
        assert!(s.iter().all(|v| *v < 1e-15));
        let b = vec![0.8, 0.9, 0.2];
        let (m, s) = binned_errorbars(&[a.clone(), b.clone()]).unwrap();
        for i in 0..3 {
            assert!((m[i] - (a[i] + b[i]) / 2.0).abs() < 1e-15);
            assert!((s[i] - (a[i] - b[i]).abs() / 2f64.sqrt()).abs() < 1e-15);
        }
        assert!(binned_errorbars(&[a.clone()]).is_err());
        assert!(binned_errorbars(&[a, vec![1.0]]).is_err());
    }

    proptest! {
        #[test]
        fn output_is_a_valid_trace(seed in 0u64..1000, amp in 0.0f64..0.2) {
            let grid = uniform_grid(1.0, 64).unwrap();
            let vals: Vec<f64> = grid
                .iter()
                .enumerate()
                .map(|(i, t)| {
                    let h = ((seed.wrapping_mul(6364136223846793005).wrapping_add(i as u64).wrapping_mul(1442695040888963407)) >> 11) as f64
                        / (1u64 << 53) as f64;
                    (-t * 2.0).exp() + amp * (h - 0.5)
                })
                .collect();
            let tr = DecoherenceTrace::new(grid, vals, Method::MonteCarlo).unwrap();
            let out = smooth(&tr, &SmoothingConfig::default()).unwrap();
            prop_assert_eq!(out.values()[0], 1.0);
            prop_assert!(out.values().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
