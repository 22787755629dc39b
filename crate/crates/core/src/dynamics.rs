//! Decoherence traces `Γ(t) = e^{−χ(t)}` under an arbitrary pulse sequence.
//!
//! Four routes are provided:
//!
//! - **continuum**: adaptive quadrature of `χ = ½∫ J(ω) coth(ω/2k_BT) |F(ω,t)|² dω`;
//! - **closed form**: the same integral done analytically for the Ohmic
//!   family at zero temperature, `χ = (λ/2) Σ_{jl} c_j c_l G(ω_c|τ_j − τ_l|)`
//!   over the switching points of the sequence;
//! - **comb**: the exact finite sum `χ = (γ²/4) Σ_k a²(k) |F(kω_b, t)|²`;
//! - **Monte Carlo**: `Γ̂(t) = (1/N) Σ_j cos φ_j(t)` over seeded realizations.
//!
//! The continuum routes take a [`Normalization`]: `Bath` is the bosonic bath
//! integral itself, `Comb { omega_b }` divides it by `ω_b`, which is the
//! continuum limit of the comb realized with `γ² = 2λ`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::noise::{check_grid, draw_phases, EnsembleSpec};
use crate::postprocess::binned_errorbars;
use crate::quadrature::{integrate, QuadOptions};
use crate::sequences::{parity_sign, PulseSequence};
use crate::spectra::{EnvironmentSpec, NoiseModel};

/// Scale of the continuum dephasing exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Normalization {
    /// Bath integral `2∫J coth sin²(ωt/2)/ω² dω`.
    Bath,
    /// Bath integral divided by `ω_b`: continuum limit of the emulating comb.
    Comb {
        #[serde(rename = "omega_b_rad_s")]
        omega_b: f64,
    },
}

impl Normalization {
    pub fn standard() -> Self {
        Normalization::Comb {
            omega_b: crate::DEFAULT_OMEGA_B,
        }
    }

    pub fn factor(&self) -> f64 {
        match self {
            Normalization::Bath => 1.0,
            Normalization::Comb { omega_b } => 1.0 / omega_b,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Normalization::Comb { omega_b } if !(omega_b.is_finite() && *omega_b > 0.0) => Err(
                Error::invalid("omega_b_rad_s", format!("must be > 0, got {omega_b}")),
            ),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Continuum,
    ClosedForm,
    Comb,
    MonteCarlo,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Continuum => "continuum",
            Method::ClosedForm => "closed_form",
            Method::Comb => "comb",
            Method::MonteCarlo => "monte_carlo",
        })
    }
}

/// Per-bin traces and their pointwise spread.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinStats {
    pub num_bins: usize,
    pub bin_size: usize,
    pub traces: Vec<Vec<f64>>,
    pub stddev: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleMeta {
    pub num_realizations: usize,
    pub master_seed: u64,
    /// Ensemble mean of `sin φ(t)`; zero in expectation.
    pub sine_residual: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bins: Option<BinStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoherenceTrace {
    grid: Vec<f64>,
    values: Vec<f64>,
    method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ensemble: Option<EnsembleMeta>,
}

impl DecoherenceTrace {
    pub fn new(grid: Vec<f64>, values: Vec<f64>, method: Method) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::GridMismatch(format!(
                "{} grid points but {} values",
                grid.len(),
                values.len()
            )));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::GridMismatch("grid must be strictly ascending".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("trace value {v} is not finite")));
        }
        Ok(Self {
            grid,
            values,
            method,
            ensemble: None,
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn ensemble(&self) -> Option<&EnsembleMeta> {
        self.ensemble.as_ref()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Same grid and metadata, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        let mut out = Self::new(self.grid.clone(), values, self.method)?;
        out.ensemble = self.ensemble.clone();
        Ok(out)
    }

    /// Values raised to at least `floor`, for taking logarithms of
    /// Monte Carlo traces.
    pub fn clipped(&self, floor: f64) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v = v.max(floor);
        }
        out
    }

    /// Per-point standard deviation across bins, when binning was requested.
    pub fn stderr(&self) -> Option<&[f64]> {
        self.ensemble
            .as_ref()
            .and_then(|e| e.bins.as_ref())
            .map(|b| b.stddev.as_slice())
    }
}

/// `n` uniformly spaced points on `[0, t_max]`.
pub fn uniform_grid(t_max: f64, n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::invalid("num_points", "need at least two grid points"));
    }
    if !(t_max.is_finite() && t_max > 0.0) {
        return Err(Error::invalid("t_max", format!("must be > 0, got {t_max}")));
    }
    let step = t_max / (n - 1) as f64;
    let mut g: Vec<f64> = (0..n).map(|i| i as f64 * step).collect();
    g[n - 1] = t_max;
    Ok(g)
}

// ---------------------------------------------------------------------------
// continuum quadrature

/// Upper integration limit: the larger of `max(20, 2(s+12))·ω_c` and `40π/t`.
fn omega_max(env: &EnvironmentSpec, t: f64) -> f64 {
    let cut = 20.0f64.max(2.0 * (env.s + 12.0)) * env.omega_c;
    cut.max(40.0 * std::f64::consts::PI / t)
}

/// Continuum dephasing exponent by adaptive quadrature.
pub fn chi_continuum(
    env: &EnvironmentSpec,
    norm: Normalization,
    seq: &PulseSequence,
    t: f64,
    opts: &QuadOptions,
) -> Result<f64> {
    env.validate()?;
    norm.validate()?;
    let (tau, coef) = seq.switching(t)?;
    if t == 0.0 || env.lambda == 0.0 {
        return Ok(0.0);
    }
    let upper = omega_max(env, t);
    let period = 2.0 * std::f64::consts::PI / t;
    let panels = ((upper / period).ceil() as usize).clamp(1, opts.max_panels / 4);
    let step = upper / panels as f64;
    let breaks: Vec<f64> = (1..panels).map(|j| j as f64 * step).collect();

    let integrand = |w: f64| {
        // |iωF|² = |Σ c_j e^{−iωτ_j}|², exact for ωt ≳ 1e-6, series below.
        let fsq = if w * t < 1e-6 {
            seq.filter_power(w, t).unwrap_or(0.0)
        } else {
            let mut acc = Complex64::new(0.0, 0.0);
            for (tj, cj) in tau.iter().zip(&coef) {
                acc += *cj * Complex64::from_polar(1.0, -w * tj);
            }
            acc.norm_sqr() / (w * w)
        };
        0.5 * env.density_unchecked(w) * env.thermal_unchecked(w) * fsq
    };
    let r = integrate(integrand, 0.0, upper, &breaks, opts)?;
    Ok((r.value * norm.factor()).max(0.0))
}

pub fn continuum_trace(
    env: &EnvironmentSpec,
    norm: Normalization,
    seq: &PulseSequence,
    grid: &[f64],
    opts: &QuadOptions,
) -> Result<DecoherenceTrace> {
    check_grid(grid, seq.total_time())?;
    let chi: Result<Vec<f64>> = grid
        .par_iter()
        .map(|&t| chi_continuum(env, norm, seq, t, opts))
        .collect();
    let values = chi?.into_iter().map(|c| (-c).exp()).collect();
    DecoherenceTrace::new(grid.to_vec(), values, Method::Continuum)
}

// ---------------------------------------------------------------------------
// closed form (Ohmic family, T = 0)

/// Pair kernel `K(Δ)` of the zero-temperature closed form, with `K(0) = 0`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct OhmicKernel {
    s: f64,
    omega_c: f64,
    /// `(λ/2)·Γ(s−1)·scale`, or `(λ/2)·scale` at `s = 1`.
    prefactor: f64,
}

impl OhmicKernel {
    pub(crate) fn new(env: &EnvironmentSpec, norm: Normalization) -> Result<Self> {
        env.validate()?;
        norm.validate()?;
        if !env.is_zero_temperature() {
            return Err(Error::Unsupported(
                "the closed form holds at zero temperature only".into(),
            ));
        }
        let half = 0.5 * env.lambda * norm.factor();
        let prefactor = if env.s == 1.0 {
            half
        } else {
            half * gamma(env.s - 1.0)
        };
        if !prefactor.is_finite() {
            return Err(Error::Unsupported(format!(
                "Gamma(s-1) is not finite for s = {}",
                env.s
            )));
        }
        Ok(Self {
            s: env.s,
            omega_c: env.omega_c,
            prefactor,
        })
    }

    /// `Γ(s−1)·Re[(1 + ix)^{−(s−1)} − 1]`, tending to `−½ ln(1+x²)` at `s = 1`.
    #[inline]
    pub(crate) fn eval(&self, delta: f64) -> f64 {
        let x = self.omega_c * delta.abs();
        if x == 0.0 {
            return 0.0;
        }
        let log_mod = 0.5 * x.mul_add(x, 1.0).ln();
        if self.s == 1.0 {
            return -self.prefactor * log_mod;
        }
        // Re expm1(z) for z = −(s−1)·ln(1 + ix)
        let e = self.s - 1.0;
        let a = -e * log_mod;
        let b = -e * x.atan();
        let half_sin = (0.5 * b).sin();
        let re = a.exp_m1() * b.cos() - 2.0 * half_sin * half_sin;
        self.prefactor * re
    }
}

/// Closed-form dephasing exponent at zero temperature.
pub fn chi_closed_form(
    env: &EnvironmentSpec,
    norm: Normalization,
    seq: &PulseSequence,
    t: f64,
) -> Result<f64> {
    let kernel = OhmicKernel::new(env, norm)?;
    let (tau, coef) = seq.switching(t)?;
    let mut chi = 0.0;
    for j in 0..tau.len() {
        for l in 0..j {
            chi += 2.0 * coef[j] * coef[l] * kernel.eval(tau[j] - tau[l]);
        }
    }
    Ok(chi.max(0.0))
}

/// Closed-form exponents along an ascending grid in `O(grid·n)`.
pub(crate) fn closed_form_chis(
    kernel: &OhmicKernel,
    seq: &PulseSequence,
    grid: &[f64],
) -> Vec<f64> {
    let pulses = seq.pulse_times();
    // fixed points: τ₀ = 0 then the pulses; coefficients 1, 2(−1)^j
    let mut fixed_tau = Vec::with_capacity(pulses.len() + 1);
    let mut fixed_c = Vec::with_capacity(pulses.len() + 1);
    fixed_tau.push(0.0);
    fixed_c.push(1.0);
    let mut inner = 0.0; // Σ over fixed pairs j ≠ l
    let mut next = 0;
    let mut out = Vec::with_capacity(grid.len());
    for &t in grid {
        while next < pulses.len() && pulses[next] < t {
            let p = pulses[next];
            let c = 2.0 * parity_sign(next + 1);
            let cross: f64 = fixed_tau
                .iter()
                .zip(&fixed_c)
                .map(|(tau, cj)| cj * kernel.eval(p - tau))
                .sum();
            inner += 2.0 * c * cross;
            fixed_tau.push(p);
            fixed_c.push(c);
            next += 1;
        }
        let c_end = -parity_sign(next);
        let cross: f64 = fixed_tau
            .iter()
            .zip(&fixed_c)
            .map(|(tau, cj)| cj * kernel.eval(t - tau))
            .sum();
        out.push((inner + 2.0 * c_end * cross).max(0.0));
    }
    out
}

pub fn closed_form_trace(
    env: &EnvironmentSpec,
    norm: Normalization,
    seq: &PulseSequence,
    grid: &[f64],
) -> Result<DecoherenceTrace> {
    check_grid(grid, seq.total_time())?;
    let kernel = OhmicKernel::new(env, norm)?;
    let values = closed_form_chis(&kernel, seq, grid)
        .into_iter()
        .map(|c| (-c).exp())
        .collect();
    DecoherenceTrace::new(grid.to_vec(), values, Method::ClosedForm)
}

// ---------------------------------------------------------------------------
// comb

/// Exact comb exponent `(γ²/4) Σ_k a²(k) |F(kω_b, t)|²`.
pub fn chi_comb(model: &NoiseModel, seq: &PulseSequence, t: f64) -> Result<f64> {
    model.validate()?;
    let weights = model.chi_weights();
    let mut chi = 0.0;
    for (i, w) in weights.iter().enumerate() {
        if *w != 0.0 {
            chi += w * seq.filter_power(model.frequency(i + 1), t)?;
        }
    }
    Ok(chi)
}

/// `iω_k F(ω_k, t_i)` for all harmonics along an ascending grid, by phase
/// recurrence over `k`. Calls `visit(i, row)` once per grid point.
fn comb_rows<V: FnMut(usize, &[Complex64])>(
    model: &NoiseModel,
    seq: &PulseSequence,
    grid: &[f64],
    mut visit: V,
) {
    const REANCHOR: usize = 64;
    let m = model.num_harmonics();
    let wb = model.omega_b;
    let pulses = seq.pulse_times();
    let mut prefix = vec![Complex64::new(1.0, 0.0); m];
    let mut row = vec![Complex64::new(0.0, 0.0); m];
    let mut next = 0;
    let rotate = |buf: &mut [Complex64], at: f64, scale: f64, add: bool, src: &[Complex64]| {
        let base = Complex64::from_polar(1.0, -wb * at);
        let mut z = base;
        for k in 0..buf.len() {
            if k % REANCHOR == 0 {
                z = Complex64::from_polar(1.0, -wb * at * (k + 1) as f64);
            }
            buf[k] = if add { src[k] + scale * z } else { scale * z };
            z *= base;
        }
    };
    for (i, &t) in grid.iter().enumerate() {
        while next < pulses.len() && pulses[next] < t {
            let snapshot = prefix.clone();
            rotate(&mut prefix, pulses[next], 2.0 * parity_sign(next + 1), true, &snapshot);
            next += 1;
        }
        rotate(&mut row, t, -parity_sign(next), true, &prefix);
        visit(i, &row);
    }
}

/// Comb trace along a grid, exact up to rounding.
pub fn comb_trace(
    model: &NoiseModel,
    seq: &PulseSequence,
    grid: &[f64],
) -> Result<DecoherenceTrace> {
    model.validate()?;
    check_grid(grid, seq.total_time())?;
    let weights: Vec<f64> = model
        .chi_weights()
        .iter()
        .enumerate()
        .map(|(i, w)| w / model.frequency(i + 1).powi(2))
        .collect();
    let mut values = vec![0.0; grid.len()];
    comb_rows(model, seq, grid, |i, row| {
        let chi: f64 = row
            .iter()
            .zip(&weights)
            .map(|(v, w)| w * v.norm_sqr())
            .sum();
        values[i] = (-chi).exp();
    });
    DecoherenceTrace::new(grid.to_vec(), values, Method::Comb)
}

// ---------------------------------------------------------------------------
// Monte Carlo

const LEAF: usize = 16;

/// `γa_k·Re F(ω_k, t_i)` and `γa_k·Im F(ω_k, t_i)`, row-major by grid point.
struct PhaseTable {
    m: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl PhaseTable {
    fn build(model: &NoiseModel, seq: &PulseSequence, grid: &[f64]) -> Self {
        let m = model.num_harmonics();
        let mut re = vec![0.0; m * grid.len()];
        let mut im = vec![0.0; m * grid.len()];
        let scale: Vec<f64> = model
            .amplitudes
            .iter()
            .enumerate()
            .map(|(k, a)| model.gamma * a / model.frequency(k + 1))
            .collect();
        comb_rows(model, seq, grid, |i, row| {
            for (k, v) in row.iter().enumerate() {
                // F = v/(iω) = (v.im, −v.re)/ω
                re[i * m + k] = scale[k] * v.im;
                im[i * m + k] = -scale[k] * v.re;
            }
        });
        Self { m, re, im }
    }

    fn points(&self) -> usize {
        self.re.len() / self.m
    }
}

#[inline]
fn dot2(a: &[f64], x: &[f64], b: &[f64], y: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        for l in 0..4 {
            let k = 4 * c + l;
            acc[l] += a[k] * x[k] + b[k] * y[k];
        }
    }
    let mut tail = 0.0;
    for k in 4 * chunks..a.len() {
        tail += a[k] * x[k] + b[k] * y[k];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

struct Sums {
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl Sums {
    fn zeros(n: usize) -> Self {
        Self {
            cos: vec![0.0; n],
            sin: vec![0.0; n],
        }
    }

    fn merge(mut self, other: Sums) -> Sums {
        for (a, b) in self.cos.iter_mut().zip(other.cos) {
            *a += b;
        }
        for (a, b) in self.sin.iter_mut().zip(other.sin) {
            *a += b;
        }
        self
    }
}

/// Pairwise sum over realizations `lo..hi`; split points depend only on the
/// index range, so the result is independent of the thread count.
fn tree_sum(table: &PhaseTable, seed: u64, lo: usize, hi: usize) -> Sums {
    if hi - lo <= LEAF {
        let n = table.points();
        let mut sums = Sums::zeros(n);
        let mut c = vec![0.0; table.m];
        let mut s = vec![0.0; table.m];
        for j in lo..hi {
            let phases = draw_phases(table.m, seed, j as u64);
            for (k, p) in phases.iter().enumerate() {
                let (sp, cp) = p.sin_cos();
                c[k] = cp;
                s[k] = sp;
            }
            for i in 0..n {
                let row = i * table.m..(i + 1) * table.m;
                let phi = dot2(&table.re[row.clone()], &c, &table.im[row], &s);
                let (sp, cp) = phi.sin_cos();
                sums.cos[i] += cp;
                sums.sin[i] += sp;
            }
        }
        return sums;
    }
    let mid = lo + (hi - lo) / 2;
    let (a, b) = rayon::join(
        || tree_sum(table, seed, lo, mid),
        || tree_sum(table, seed, mid, hi),
    );
    a.merge(b)
}

/// Finite-ensemble estimate `Γ̂(t) = (1/N) Σ_j cos φ_j(t)`.
pub fn monte_carlo_trace(
    model: &NoiseModel,
    seq: &PulseSequence,
    grid: &[f64],
    ensemble: &EnsembleSpec,
) -> Result<DecoherenceTrace> {
    model.validate()?;
    ensemble.validate()?;
    check_grid(grid, seq.total_time())?;
    let table = PhaseTable::build(model, seq, grid);
    let n = ensemble.num_realizations;
    let seed = ensemble.master_seed;

    let (total, bins) = match ensemble.binning {
        None => (tree_sum(&table, seed, 0, n), None),
        Some((num_bins, bin_size)) => {
            let parts: Vec<Sums> = (0..num_bins)
                .map(|b| tree_sum(&table, seed, b * bin_size, (b + 1) * bin_size))
                .collect();
            let traces: Vec<Vec<f64>> = parts
                .iter()
                .map(|p| p.cos.iter().map(|c| c / bin_size as f64).collect())
                .collect();
            let used = num_bins * bin_size;
            let mut total = Sums::zeros(grid.len());
            for p in parts {
                total = total.merge(p);
            }
            if used < n {
                total = total.merge(tree_sum(&table, seed, used, n));
            }
            let (_, stddev) = binned_errorbars(&traces)?;
            let stats = BinStats {
                num_bins,
                bin_size,
                traces,
                stddev,
            };
            (total, Some(stats))
        }
    };

    let values: Vec<f64> = total.cos.iter().map(|c| c / n as f64).collect();
    let sine_residual = total.sin.iter().map(|s| s / n as f64).collect();
    let mut trace = DecoherenceTrace::new(grid.to_vec(), values, Method::MonteCarlo)?;
    trace.ensemble = Some(EnsembleMeta {
        num_realizations: n,
        master_seed: seed,
        sine_residual,
        bins,
    });
    Ok(trace)
}

// ---------------------------------------------------------------------------

/// Decay rate `γ₀(t) = −d ln Γ/dt`: three-point differences inside, one-sided
/// at the ends.
pub fn decay_rate(trace: &DecoherenceTrace) -> Result<Vec<f64>> {
    if let Some((index, &value)) = trace.values.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::NonPositive { index, value });
    }
    let n = trace.len();
    if n < 2 {
        return Err(Error::GridMismatch("decay rate needs two points".into()));
    }
    let t = &trace.grid;
    let l: Vec<f64> = trace.values.iter().map(|v| v.ln()).collect();
    let mut rate = Vec::with_capacity(n);
    rate.push(-(l[1] - l[0]) / (t[1] - t[0]));
    for i in 1..n - 1 {
        let h0 = t[i] - t[i - 1];
        let h1 = t[i + 1] - t[i];
        let d = (-h1 / (h0 * (h0 + h1))) * l[i - 1]
            + ((h1 - h0) / (h0 * h1)) * l[i]
            + (h0 / (h1 * (h0 + h1))) * l[i + 1];
        rate.push(-d);
    }
    rate.push(-(l[n - 1] - l[n - 2]) / (t[n - 1] - t[n - 2]));
    Ok(rate)
}

/// Floor applied to Monte Carlo estimates before taking logarithms.
pub const MONTE_CARLO_FLOOR: f64 = 1e-6;
