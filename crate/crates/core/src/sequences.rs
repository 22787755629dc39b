//! π-pulse sequences and their filter functions.
//!
//! A sequence of instantaneous π pulses at `0 < t₁ < … < t_n < T` defines the
//! modulation `f(t) ∈ {−1, +1}`: `+1` before the first pulse, flipping at each
//! pulse, right-continuous at the flips. The filter function is
//! `F(ω, t) = ∫₀ᵗ f(t′) e^{−iωt′} dt′`, evaluated segment by segment in
//! closed form.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SequenceFile", into = "SequenceFile")]
pub struct PulseSequence {
    total_time: f64,
    pulse_times: Vec<f64>,
    label: String,
}

/// On-disk layout: `{total_time_s, pulse_times_s, label}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct SequenceFile {
    total_time_s: f64,
    pulse_times_s: Vec<f64>,
    #[serde(default)]
    label: String,
}

impl TryFrom<SequenceFile> for PulseSequence {
    type Error = Error;

    fn try_from(f: SequenceFile) -> Result<Self> {
        PulseSequence::new(f.total_time_s, f.pulse_times_s, f.label)
    }
}

impl From<PulseSequence> for SequenceFile {
    fn from(s: PulseSequence) -> Self {
        SequenceFile {
            total_time_s: s.total_time,
            pulse_times_s: s.pulse_times,
            label: s.label,
        }
    }
}

/// Standard sequence families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Free,
    Pdd,
    Cpmg,
    Udd,
}

impl Family {
    pub fn build(self, total_time: f64, n: usize) -> Result<PulseSequence> {
        match self {
            Family::Free => PulseSequence::free(total_time),
            Family::Pdd => make_pdd(total_time, n),
            Family::Cpmg => make_cpmg(total_time, n),
            Family::Udd => make_udd(total_time, n),
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "free" | "fid" => Ok(Family::Free),
            "pdd" => Ok(Family::Pdd),
            "cpmg" => Ok(Family::Cpmg),
            "udd" => Ok(Family::Udd),
            other => Err(Error::invalid("family", format!("unknown sequence family {other:?}"))),
        }
    }
}

impl PulseSequence {
    pub fn new(total_time: f64, pulse_times: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if !(total_time.is_finite() && total_time > 0.0) {
            return Err(Error::invalid(
                "total_time_s",
                format!("must be > 0, got {total_time}"),
            ));
        }
        let mut prev = 0.0;
        for (j, &t) in pulse_times.iter().enumerate() {
            if !(t.is_finite() && t > prev && t < total_time) {
                return Err(Error::invalid(
                    "pulse_times_s",
                    format!(
                        "pulse {} at {t:e} s breaks 0 < t_1 < ... < t_n < T = {total_time:e} s",
                        j + 1
                    ),
                ));
            }
            prev = t;
        }
        Ok(Self {
            total_time,
            pulse_times,
            label: label.into(),
        })
    }

    /// Free evolution (no pulses) over `[0, total_time]`.
    pub fn free(total_time: f64) -> Result<Self> {
        Self::new(total_time, Vec::new(), "free")
    }

    /// Decode `n + 1` consecutive delays into pulse instants by prefix sums.
    /// The total time is the sum of the delays.
    pub fn from_delays(delays: &[f64], label: impl Into<String>) -> Result<Self> {
        if delays.is_empty() {
            return Err(Error::invalid("delays", "need at least one delay"));
        }
        let total: f64 = delays.iter().sum();
        let mut acc = 0.0;
        let times = delays[..delays.len() - 1]
            .iter()
            .map(|d| {
                acc += d;
                acc
            })
            .collect();
        Self::new(total, times, label)
    }

    pub fn total_time(&self) -> f64 {
        self.total_time
    }

    pub fn pulse_times(&self) -> &[f64] {
        &self.pulse_times
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn num_pulses(&self) -> usize {
        self.pulse_times.len()
    }

    /// The `n + 1` free-evolution delays `t₁, t₂ − t₁, …, T − t_n`.
    pub fn delays(&self) -> Vec<f64> {
        let mut prev = 0.0;
        let mut out = Vec::with_capacity(self.pulse_times.len() + 1);
        for &t in &self.pulse_times {
            out.push(t - prev);
            prev = t;
        }
        out.push(self.total_time - prev);
        out
    }

    /// Smallest of `t₁`, `t_{j+1} − t_j` and `T − t_n`.
    pub fn min_gap(&self) -> f64 {
        self.delays().into_iter().fold(f64::INFINITY, f64::min)
    }

    /// Number of pulses at or before `t`.
    pub fn flips_until(&self, t: f64) -> usize {
        self.pulse_times.partition_point(|&p| p <= t)
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(t >= 0.0 && t <= self.total_time) {
            return Err(Error::OutOfRange {
                t,
                total: self.total_time,
            });
        }
        Ok(())
    }

    /// Modulation `f(t) ∈ {−1, +1}`; a pulse instant takes the post-flip sign.
    pub fn modulation_at(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        Ok(parity_sign(self.flips_until(t)))
    }

    /// `F(ω, t)` for `0 ≤ t ≤ T`. Pulses at or after `t` do not contribute.
    pub fn filter_function(&self, omega: f64, t: f64) -> Result<Complex64> {
        self.check_time(t)?;
        if !omega.is_finite() {
            return Err(Error::Domain(format!("omega must be finite, got {omega}")));
        }
        Ok(filter_segments(&self.pulse_times, omega, t))
    }

    /// `|F(ω, t)|²`.
    pub fn filter_power(&self, omega: f64, t: f64) -> Result<f64> {
        self.filter_function(omega, t).map(|f| f.norm_sqr())
    }

    /// Switching points `τ` and coefficients `c` with
    /// `iω·F(ω, t) = Σ_j c_j e^{−iωτ_j}` and `Σ_j c_j = 0`.
    ///
    /// `τ₀ = 0` carries `+1`, pulse `j` carries `2(−1)^j`, and the end point
    /// `t` carries `−(−1)^p` where `p` pulses precede it.
    pub fn switching(&self, t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_time(t)?;
        let active = self.pulse_times.partition_point(|&p| p < t);
        let mut tau = Vec::with_capacity(active + 2);
        let mut coef = Vec::with_capacity(active + 2);
        tau.push(0.0);
        coef.push(1.0);
        for (j, &p) in self.pulse_times[..active].iter().enumerate() {
            tau.push(p);
            coef.push(2.0 * parity_sign(j + 1));
        }
        tau.push(t);
        coef.push(-parity_sign(active));
        Ok((tau, coef))
    }

    /// One-line normalized form, stable for diffing.
    pub fn normalized(&self) -> String {
        let times: Vec<String> = self.pulse_times.iter().map(|t| format!("{t:.9e}")).collect();
        format!(
            "{} T={:.9e} n={} [{}]",
            if self.label.is_empty() { "-" } else { &self.label },
            self.total_time,
            self.pulse_times.len(),
            times.join(",")
        )
    }
}

impl fmt::Display for PulseSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.normalized())
    }
}

#[inline]
pub(crate) fn parity_sign(flips: usize) -> f64 {
    if flips % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `∫_a^b e^{−iωt′} dt′ = (b−a)·sinc(ω(b−a)/2)·e^{−iω(a+b)/2}`, free of
/// cancellation as `ω → 0`.
#[inline]
fn segment_integral(omega: f64, a: f64, b: f64) -> Complex64 {
    let half = 0.5 * omega * (b - a);
    let sinc = if half == 0.0 { 1.0 } else { half.sin() / half };
    Complex64::from_polar((b - a) * sinc, -0.5 * omega * (a + b))
}

/// Filter function for flips at `flips` (nondecreasing, any multiplicity)
/// truncated at `t`.
pub(crate) fn filter_segments(flips: &[f64], omega: f64, t: f64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    let mut start = 0.0;
    let mut sign = 1.0;
    for &p in flips {
        if p >= t {
            break;
        }
        if p > start {
            acc += sign * segment_integral(omega, start, p);
        }
        start = p.max(start);
        sign = -sign;
    }
    if t > start {
        acc += sign * segment_integral(omega, start, t);
    }
    acc
}

fn check_count(n: usize, total_time: f64) -> Result<()> {
    if n < 1 {
        return Err(Error::invalid("n", "sequence needs at least one pulse"));
    }
    if !(total_time.is_finite() && total_time > 0.0) {
        return Err(Error::invalid(
            "total_time_s",
            format!("must be > 0, got {total_time}"),
        ));
    }
    Ok(())
}

/// Periodic DD: `t_j = jT/(n+1)`.
pub fn make_pdd(total_time: f64, n: usize) -> Result<PulseSequence> {
    check_count(n, total_time)?;
    let times = (1..=n)
        .map(|j| j as f64 * total_time / (n + 1) as f64)
        .collect();
    PulseSequence::new(total_time, times, format!("pdd{n}"))
}

/// CPMG: `t_j = (2j−1)T/(2n)`.
pub fn make_cpmg(total_time: f64, n: usize) -> Result<PulseSequence> {
    check_count(n, total_time)?;
    let times = (1..=n)
        .map(|j| (2 * j - 1) as f64 * total_time / (2 * n) as f64)
        .collect();
    PulseSequence::new(total_time, times, format!("cpmg{n}"))
}

/// Uhrig DD: `t_j = T sin²(πj/(2(n+1)))`.
pub fn make_udd(total_time: f64, n: usize) -> Result<PulseSequence> {
    check_count(n, total_time)?;
    let times = (1..=n)
        .map(|j| {
            let s = (std::f64::consts::PI * j as f64 / (2 * (n + 1)) as f64).sin();
            total_time * s * s
        })
        .collect();
    PulseSequence::new(total_time, times, format!("udd{n}"))
}
