//! Non-Markovianity, coherence protection and entropy from a trace.

use serde::{Deserialize, Serialize};

use crate::dynamics::{DecoherenceTrace, Method};
use crate::error::{Error, Result};

/// Grid-level BLP measure: the sum of all positive sample increments.
pub fn blp_measure(trace: &DecoherenceTrace) -> f64 {
    blp_of(trace.values())
}

pub(crate) fn blp_of(values: &[f64]) -> f64 {
    values.windows(2).map(|w| (w[1] - w[0]).max(0.0)).sum()
}

/// Maximal rising runs `(t_start, t_end)`, disjoint and ascending.
pub fn backflow_intervals(trace: &DecoherenceTrace) -> Vec<(f64, f64)> {
    let (t, g) = (trace.grid(), trace.values());
    let mut out = Vec::new();
    let mut start = None;
    for i in 1..g.len() {
        let rising = g[i] > g[i - 1];
        match (rising, start) {
            (true, None) => start = Some(i - 1),
            (false, Some(s)) => {
                out.push((t[s], t[i - 1]));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((t[s], t[g.len() - 1]));
    }
    out
}

/// `𝒫 = (1/t)∫₀ᵗ Γ dt′` by the trapezoid rule, interpolating linearly at `t`.
pub fn protection(trace: &DecoherenceTrace, horizon: f64) -> Result<f64> {
    let (t, g) = (trace.grid(), trace.values());
    if t.is_empty() || t[0] != 0.0 {
        return Err(Error::GridMismatch("protection needs a grid starting at t = 0".into()));
    }
    let end = t[t.len() - 1];
    if !(horizon > 0.0 && horizon <= end) {
        return Err(Error::OutOfRange {
            t: horizon,
            total: end,
        });
    }
    let mut area = 0.0;
    for i in 1..t.len() {
        if t[i] <= horizon {
            area += 0.5 * (g[i] + g[i - 1]) * (t[i] - t[i - 1]);
        } else {
            let f = (horizon - t[i - 1]) / (t[i] - t[i - 1]);
            let gh = g[i - 1] + f * (g[i] - g[i - 1]);
            area += 0.5 * (gh + g[i - 1]) * (horizon - t[i - 1]);
            break;
        }
    }
    Ok(area / horizon)
}

/// Which entropy expression to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntropyForm {
    /// Binary entropy of the eigenvalues `(1 ± εΓ)/2`.
    Exact,
    /// `1 − ε²Γ²/2`, the small-polarization expression without the `1/ln 2`.
    LeadingOrder,
}

/// Von Neumann entropy (bits) of the dephasing qubit along the trace.
pub fn entropy_trace(trace: &DecoherenceTrace, epsilon: f64, form: EntropyForm) -> Result<Vec<f64>> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::invalid("epsilon", format!("must lie in (0, 1], got {epsilon}")));
    }
    trace
        .values()
        .iter()
        .map(|&g| {
            let r = epsilon * g;
            if r.abs() > 1.0 {
                return Err(Error::Domain(format!("|epsilon*Gamma| = {} exceeds 1", r.abs())));
            }
            Ok(match form {
                EntropyForm::Exact => binary_entropy(0.5 * (1.0 + r)),
                EntropyForm::LeadingOrder => 1.0 - 0.5 * r * r,
            })
        })
        .collect()
}

fn binary_entropy(p: f64) -> f64 {
    let term = |x: f64| if x > 0.0 { -x * x.log2() } else { 0.0 };
    term(p) + term(1.0 - p)
}

/// Trace distance of the antipodal `±x` pair, which equals `Γ(t)` under
/// pure dephasing.
pub fn trace_distance_pair(trace: &DecoherenceTrace) -> Vec<f64> {
    trace.values().iter().map(|g| g.abs()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureReport {
    pub blp: f64,
    pub protection: f64,
    pub horizon_s: f64,
    pub backflow_intervals: Vec<(f64, f64)>,
    /// Set for unsmoothed Monte Carlo traces, whose BLP is biased upward.
    pub blp_overestimated: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entropy_trace: Option<Vec<f64>>,
}

impl MeasureReport {
    /// Measures at `horizon` (default: end of the grid). `smoothed` records
    /// whether a Monte Carlo trace went through smoothing first.
    pub fn compute(
        trace: &DecoherenceTrace,
        horizon: Option<f64>,
        smoothed: bool,
        entropy_epsilon: Option<f64>,
    ) -> Result<Self> {
        let horizon = horizon.unwrap_or_else(|| trace.grid().last().copied().unwrap_or(0.0));
        let entropy = entropy_epsilon
            .map(|e| entropy_trace(trace, e, EntropyForm::Exact))
            .transpose()?;
        Ok(Self {
            blp: blp_measure(trace),
            protection: protection(trace, horizon)?,
            horizon_s: horizon,
            backflow_intervals: backflow_intervals(trace),
            blp_overestimated: trace.method() == Method::MonteCarlo && !smoothed,
            entropy_trace: entropy,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::uniform_grid;
    use proptest::prelude::*;

    fn tr(values: &[f64]) -> DecoherenceTrace {
        let grid = (0..values.len()).map(|i| i as f64).collect();
        DecoherenceTrace::new(grid, values.to_vec(), Method::Comb).unwrap()
    }

    #[test]
    fn blp_examples() {
        let t = tr(&[1.0, 0.5, 0.7, 0.3, 0.4]);
        assert!((blp_measure(&t) - 0.3).abs() < 1e-15);
        assert_eq!(backflow_intervals(&t), vec![(1.0, 2.0), (3.0, 4.0)]);
        assert_eq!(blp_measure(&tr(&[1.0, 0.9, 0.9, 0.1])), 0.0);
        assert!(backflow_intervals(&tr(&[1.0, 0.9, 0.9, 0.1])).is_empty());
        assert_eq!(blp_of(&[]), 0.0);
        let runs = backflow_intervals(&tr(&[0.2, 0.3, 0.5, 0.4, 0.6]));
        assert_eq!(runs, vec![(0.0, 2.0), (3.0, 4.0)]);
    }

    #[test]
    fn protection_examples() {
        let grid = uniform_grid(2.0, 101).unwrap();
        let ones = DecoherenceTrace::new(grid.clone(), vec![1.0; 101], Method::Comb).unwrap();
        assert!((protection(&ones, 2.0).unwrap() - 1.0).abs() < 1e-15);
        let lin = DecoherenceTrace::new(
            grid.clone(),
            grid.iter().map(|t| 1.0 - t / 2.0).collect(),
            Method::Comb,
        )
        .unwrap();
        assert!((protection(&lin, 2.0).unwrap() - 0.5).abs() < 1e-14);
        // horizon between grid points: exact for a linear trace
        let h = 1.2345;
        assert!((protection(&lin, h).unwrap() - (1.0 - h / 4.0)).abs() < 1e-14);
        assert!(protection(&lin, 2.5).is_err());
        assert!(protection(&lin, 0.0).is_err());
    }

    #[test]
    fn entropy_examples() {
        let t = tr(&[1.0, 0.0, 0.5]);
        let e = entropy_trace(&t, 1.0, EntropyForm::Exact).unwrap();
        assert_eq!(e[0], 0.0);
        assert_eq!(e[1], 1.0);
        let small = entropy_trace(&t, 1e-3, EntropyForm::Exact).unwrap();
        for (s, g) in small.iter().zip(t.values()) {
            let r: f64 = 1e-3 * g;
            let series = 1.0 - r * r / (2.0 * std::f64::consts::LN_2);
            assert!((s - series).abs() < 1e-12);
        }
        let approx = entropy_trace(&t, 1e-3, EntropyForm::LeadingOrder).unwrap();
        assert!((approx[0] - (1.0 - 0.5e-6)).abs() < 1e-15);
        assert!(entropy_trace(&t, 0.0, EntropyForm::Exact).is_err());
        assert!(entropy_trace(&tr(&[1.0, -1.5]), 1.0, EntropyForm::Exact).is_err());
    }

    #[test]
    fn trace_distance_is_gamma() {
        let t = tr(&[1.0, 0.6, 0.7]);
        assert_eq!(trace_distance_pair(&t), vec![1.0, 0.6, 0.7]);
    }

    #[test]
    fn report_flags_raw_monte_carlo() {
        let grid = uniform_grid(1.0, 5).unwrap();
        let mc = DecoherenceTrace::new(grid, vec![1.0, 0.5, 0.7, 0.3, 0.4], Method::MonteCarlo)
            .unwrap();
        let r = MeasureReport::compute(&mc, None, false, Some(1.0)).unwrap();
        assert!(r.blp_overestimated);
        assert_eq!(r.horizon_s, 1.0);
        assert_eq!(r.entropy_trace.as_ref().unwrap().len(), 5);
        assert!(!MeasureReport::compute(&mc, None, true, None).unwrap().blp_overestimated);
    }

    proptest! {
        #[test]
        fn protection_is_linear(vals in proptest::collection::vec(0.0f64..1.0, 3..40), alpha in 0.01f64..1.0) {
            let t = tr(&vals);
            let h = (vals.len() - 1) as f64;
            let scaled = tr(&vals.iter().map(|v| alpha * v).collect::<Vec<_>>());
            let a = protection(&scaled, h).unwrap();
            let b = alpha * protection(&t, h).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&a));
        }

        #[test]
        fn blp_zero_iff_nonincreasing(vals in proptest::collection::vec(0.0f64..1.0, 1..40)) {
            let t = tr(&vals);
            let nonincreasing = vals.windows(2).all(|w| w[1] <= w[0]);
            prop_assert_eq!(blp_measure(&t) == 0.0, nonincreasing);
            prop_assert!(blp_measure(&t) >= 0.0);
            let runs = backflow_intervals(&t);
            prop_assert!(runs.windows(2).all(|w| w[0].1 <= w[1].0));
        }
    }
}
