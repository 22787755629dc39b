//! Ohmic-family spectral densities and the harmonic comb that emulates them.
//!
//! The environment is `J(ω) = λ·e^{−ω/ω_c}·ω^s / ω_c^{s−1}`. A comb of `M`
//! harmonics of `ω_b` with amplitudes
//! `a²(k) = (kω_b)^s/ω_c^{s−1}·e^{−kω_b/ω_c}·coth(kω_b/2k_BT)` and strength
//! `γ² = 2λ` produces the delta-line power spectrum
//! `S(ω) = (πγ²/2) Σ a²(k) [δ(ω − kω_b) + δ(ω + kω_b)]`.
//!
//! The comb is the exact description of the emulated process. Compared with
//! the bath integral it lacks the `ω_b` measure of a Riemann sum, so the comb
//! dephasing exponent equals the bath exponent divided by `ω_b` in the
//! continuum limit. [`riemann_chi_free`] carries the explicit factor and is
//! used to check that correspondence.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ohmic-family environment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentSpec {
    /// Ohmicity exponent.
    pub s: f64,
    /// Dimensionless coupling constant.
    pub lambda: f64,
    /// Cutoff angular frequency (rad/s).
    #[serde(rename = "omega_c_rad_s")]
    pub omega_c: f64,
    /// `k_B·T` in units of `ħω`; zero selects the zero-temperature limit.
    #[serde(default)]
    pub temperature_energy: f64,
}

impl EnvironmentSpec {
    pub fn new(s: f64, lambda: f64, omega_c: f64, temperature_energy: f64) -> Result<Self> {
        let env = Self {
            s,
            lambda,
            omega_c,
            temperature_energy,
        };
        env.validate()?;
        Ok(env)
    }

    /// Zero-temperature environment with the reference-scale cutoff `2π·320` rad/s.
    pub fn standard(s: f64, lambda: f64) -> Result<Self> {
        Self::new(s, lambda, crate::DEFAULT_OMEGA_C, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s.is_finite() && self.s > 0.0) {
            return Err(Error::invalid("s", format!("must be > 0, got {}", self.s)));
        }
        // λ = 0 is accepted: it describes a decoupled qubit and keeps Γ ≡ 1.
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::invalid(
                "lambda",
                format!("must be >= 0, got {}", self.lambda),
            ));
        }
        if !(self.omega_c.is_finite() && self.omega_c > 0.0) {
            return Err(Error::invalid(
                "omega_c_rad_s",
                format!("must be > 0, got {}", self.omega_c),
            ));
        }
        if !(self.temperature_energy.is_finite() && self.temperature_energy >= 0.0) {
            return Err(Error::invalid(
                "temperature_energy",
                format!("must be >= 0, got {}", self.temperature_energy),
            ));
        }
        Ok(())
    }

    pub fn is_zero_temperature(&self) -> bool {
        self.temperature_energy == 0.0
    }

    /// `J(ω)` without the domain check; `omega` must be nonnegative.
    pub(crate) fn density_unchecked(&self, omega: f64) -> f64 {
        if omega == 0.0 {
            return 0.0;
        }
        let x = omega / self.omega_c;
        self.lambda * self.omega_c * x.powf(self.s) * (-x).exp()
    }

    /// `coth(ω/2k_BT)` without the domain check; `omega` must be positive.
    pub(crate) fn thermal_unchecked(&self, omega: f64) -> f64 {
        if self.temperature_energy == 0.0 {
            1.0
        } else {
            1.0 / (omega / (2.0 * self.temperature_energy)).tanh()
        }
    }
}

/// Spectral density `J(ω) = λ·e^{−ω/ω_c}·ω^s/ω_c^{s−1}`.
pub fn spectral_density(env: &EnvironmentSpec, omega: f64) -> Result<f64> {
    if !(omega >= 0.0) {
        return Err(Error::Domain(format!(
            "spectral density needs omega >= 0, got {omega}"
        )));
    }
    Ok(env.density_unchecked(omega))
}

/// Thermal occupation factor `coth(ω/2k_BT)`, exactly 1 at zero temperature.
pub fn thermal_factor(env: &EnvironmentSpec, omega: f64) -> Result<f64> {
    if !(omega > 0.0) {
        return Err(Error::Domain(format!(
            "thermal factor needs omega > 0, got {omega}"
        )));
    }
    Ok(env.thermal_unchecked(omega))
}

/// How well the comb `k·ω_b, k = 1..M` covers the spectral density.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coverage {
    /// `M·ω_b ≥ 5·ω_c`: truncated tail below `e^{-5}`.
    Full,
    /// `ω_c ≤ M·ω_b < 5·ω_c`.
    Partial,
    /// `M·ω_b < ω_c`.
    Insufficient,
}

pub fn coverage(env: &EnvironmentSpec, omega_b: f64, num_harmonics: usize) -> Coverage {
    let top = omega_b * num_harmonics as f64;
    if top >= 5.0 * env.omega_c {
        Coverage::Full
    } else if top >= env.omega_c {
        Coverage::Partial
    } else {
        Coverage::Insufficient
    }
}

/// Comb synthesis parameters: `ξ(t) = γ Σ_k a(k) cos(kω_b t + φ_k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub gamma: f64,
    #[serde(rename = "omega_b_rad_s")]
    pub omega_b: f64,
    pub amplitudes: Vec<f64>,
}

impl NoiseModel {
    pub fn new(gamma: f64, omega_b: f64, amplitudes: Vec<f64>) -> Result<Self> {
        let model = Self {
            gamma,
            omega_b,
            amplitudes,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.gamma.is_finite() {
            return Err(Error::invalid("gamma", "must be finite"));
        }
        if !(self.omega_b.is_finite() && self.omega_b > 0.0) {
            return Err(Error::invalid(
                "omega_b_rad_s",
                format!("must be > 0, got {}", self.omega_b),
            ));
        }
        if self.amplitudes.is_empty() {
            return Err(Error::invalid("M", "at least one harmonic is required"));
        }
        if let Some((k, a)) = self
            .amplitudes
            .iter()
            .enumerate()
            .find(|(_, a)| !(a.is_finite() && **a >= 0.0))
        {
            return Err(Error::invalid(
                "amplitudes",
                format!("a({}) = {a} must be finite and >= 0", k + 1),
            ));
        }
        Ok(())
    }

    /// Number of harmonics `M`.
    pub fn num_harmonics(&self) -> usize {
        self.amplitudes.len()
    }

    /// Angular frequency of harmonic `k` (1-based).
    pub fn frequency(&self, k: usize) -> f64 {
        k as f64 * self.omega_b
    }

    /// `(γ²/4)·a²(k)`, the weight of harmonic `k` (1-based index `k-1`) in
    /// the comb dephasing exponent `χ = Σ w_k |F(kω_b, t)|²`.
    pub(crate) fn chi_weights(&self) -> Vec<f64> {
        let g2 = self.gamma * self.gamma / 4.0;
        self.amplitudes.iter().map(|a| g2 * a * a).collect()
    }
}

/// Squared comb amplitude `a²(k)` for a harmonic at angular frequency `omega`.
fn amplitude_squared(env: &EnvironmentSpec, omega: f64) -> f64 {
    let x = omega / env.omega_c;
    env.omega_c * x.powf(env.s) * (-x).exp() * env.thermal_unchecked(omega)
}

/// Build the comb that emulates `env`: `γ = √(2λ)` and `a(k)` from the
/// spectral density at `kω_b` including the thermal factor.
///
/// With `strict` set, a comb whose top frequency `M·ω_b` lies below `ω_c` is
/// rejected; otherwise use [`coverage`] to report it.
pub fn build_noise_model(
    env: &EnvironmentSpec,
    omega_b: f64,
    num_harmonics: usize,
    strict: bool,
) -> Result<NoiseModel> {
    env.validate()?;
    if !(omega_b.is_finite() && omega_b > 0.0) {
        return Err(Error::invalid(
            "omega_b_rad_s",
            format!("must be > 0, got {omega_b}"),
        ));
    }
    if num_harmonics == 0 {
        return Err(Error::invalid("M", "at least one harmonic is required"));
    }
    if strict && coverage(env, omega_b, num_harmonics) == Coverage::Insufficient {
        return Err(Error::Coverage {
            covered: omega_b * num_harmonics as f64,
            omega_c: env.omega_c,
        });
    }
    let amplitudes = (1..=num_harmonics)
        .map(|k| amplitude_squared(env, k as f64 * omega_b).sqrt())
        .collect();
    NoiseModel::new((2.0 * env.lambda).sqrt(), omega_b, amplitudes)
}

/// Delta-line weights of the comb power spectrum on the positive axis:
/// `(kω_b, πγ²/2·a²(k))` for `k = 1..M`. The mirror lines at `−kω_b` carry
/// the same weights.
pub fn power_spectrum_weights(model: &NoiseModel) -> Vec<(f64, f64)> {
    let scale = std::f64::consts::PI * model.gamma * model.gamma / 2.0;
    model
        .amplitudes
        .iter()
        .enumerate()
        .map(|(i, a)| (model.frequency(i + 1), scale * a * a))
        .collect()
}

/// Riemann-sum approximation of the free-evolution bath exponent,
/// `ω_b Σ_k J(kω_b)·coth(kω_b/2k_BT)·2 sin²(kω_b t/2)/(kω_b)²`.
///
/// Converges to `2∫J coth sin²(ωt/2)/ω² dω` as `ω_b → 0` at fixed `M·ω_b`.
pub fn riemann_chi_free(env: &EnvironmentSpec, omega_b: f64, num_harmonics: usize, t: f64) -> f64 {
    let sum: f64 = (1..=num_harmonics)
        .map(|k| {
            let w = k as f64 * omega_b;
            let half = (w * t / 2.0).sin();
            env.density_unchecked(w) * env.thermal_unchecked(w) * 2.0 * half * half / (w * w)
        })
        .sum();
    omega_b * sum
}

/// Serialized form shared by environment and comb files.
///
/// Amplitudes (and `gamma`) may be omitted; [`NoiseDocument::resolve`]
/// regenerates them from the environment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseDocument {
    #[serde(flatten)]
    pub environment: EnvironmentSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(rename = "omega_b_rad_s", default, skip_serializing_if = "Option::is_none")]
    pub omega_b: Option<f64>,
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub num_harmonics: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitudes: Option<Vec<f64>>,
}

impl NoiseDocument {
    pub fn from_parts(env: &EnvironmentSpec, model: Option<&NoiseModel>) -> Self {
        Self {
            environment: *env,
            gamma: model.map(|m| m.gamma),
            omega_b: model.map(|m| m.omega_b),
            num_harmonics: model.map(|m| m.num_harmonics()),
            amplitudes: model.map(|m| m.amplitudes.clone()),
        }
    }

    /// Validate the environment and produce the comb, regenerating whatever
    /// the document leaves out. `omega_b` and `M` fall back to the given
    /// defaults.
    pub fn resolve(
        &self,
        default_omega_b: f64,
        default_harmonics: usize,
    ) -> Result<(EnvironmentSpec, NoiseModel)> {
        self.environment.validate()?;
        let omega_b = self.omega_b.unwrap_or(default_omega_b);
        let m = self
            .num_harmonics
            .or(self.amplitudes.as_ref().map(Vec::len))
            .unwrap_or(default_harmonics);
        let model = match &self.amplitudes {
            Some(a) => {
                if a.len() != m {
                    return Err(Error::invalid(
                        "amplitudes",
                        format!("expected M = {m} entries, got {}", a.len()),
                    ));
                }
                let gamma = self
                    .gamma
                    .unwrap_or_else(|| (2.0 * self.environment.lambda).sqrt());
                NoiseModel::new(gamma, omega_b, a.clone())?
            }
            None => {
                let mut model = build_noise_model(&self.environment, omega_b, m, false)?;
                if let Some(g) = self.gamma {
                    model.gamma = g;
                }
                model
            }
        };
        Ok((self.environment, model))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn reference(s: f64) -> EnvironmentSpec {
        EnvironmentSpec::standard(s, 10.0).unwrap()
    }

    #[test]
    fn density_vanishes_at_origin() {
        assert_eq!(spectral_density(&reference(1.0), 0.0).unwrap(), 0.0);
        assert_eq!(spectral_density(&reference(0.5), 0.0).unwrap(), 0.0);
    }

    #[test]
    fn density_at_cutoff() {
        let wc = 1234.5;
        let env = EnvironmentSpec::new(1.0, 1.0, wc, 0.0).unwrap();
        let j = spectral_density(&env, wc).unwrap();
        assert!((j - wc * (-1.0f64).exp()).abs() < 1e-12 * wc);

        // 40-digit evaluation of 10·e^{-1}·ω_c at ω_c = 2π·320.
        let j4 = spectral_density(&reference(4.0), DEFAULT_WC).unwrap();
        assert!((j4 / 7396.655038661898994624596 - 1.0).abs() < 1e-13);

        let env = EnvironmentSpec::new(2.5, 3.0, 1000.0, 0.0).unwrap();
        let j = spectral_density(&env, 1234.0).unwrap();
        assert!((j / 1477.371658219693442950414 - 1.0).abs() < 1e-13);
    }

    const DEFAULT_WC: f64 = crate::DEFAULT_OMEGA_C;

    #[test]
    fn density_rejects_negative_frequency() {
        assert!(matches!(
            spectral_density(&reference(4.0), -1.0),
            Err(Error::Domain(_))
        ));
        assert!(spectral_density(&reference(4.0), f64::NAN).is_err());
    }

    #[test]
    fn thermal_factor_values() {
        let env = reference(1.0);
        assert_eq!(thermal_factor(&env, 10.0).unwrap(), 1.0);
        let w = 300.0;
        let hot = EnvironmentSpec::new(1.0, 1.0, 100.0, w / 2.0).unwrap();
        assert!((thermal_factor(&hot, w).unwrap() - 1.313035285499331303636161).abs() < 1e-14);
        let very_hot = EnvironmentSpec::new(1.0, 1.0, 100.0, 1e6).unwrap();
        let ratio = thermal_factor(&very_hot, 1.0).unwrap() / (2.0 * 1e6);
        assert!((ratio - 1.0).abs() < 1e-9);
        assert!(thermal_factor(&env, 0.0).is_err());
        assert!(thermal_factor(&env, -3.0).is_err());
    }

    #[test]
    fn invalid_environments() {
        assert!(EnvironmentSpec::new(0.0, 1.0, 1.0, 0.0).is_err());
        assert!(EnvironmentSpec::new(1.0, -1.0, 1.0, 0.0).is_err());
        assert!(EnvironmentSpec::new(1.0, 1.0, 0.0, 0.0).is_err());
        assert!(EnvironmentSpec::new(1.0, 1.0, 1.0, -1e-3).is_err());
        match EnvironmentSpec::new(1.0, -10.0, 1.0, 0.0) {
            Err(Error::InvalidParameter { field, .. }) => assert_eq!(field, "lambda"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn amplitudes_zero_temperature() {
        let env = reference(4.0);
        let wb = 2.0 * PI * 4.0;
        let model = build_noise_model(&env, wb, 1000, false).unwrap();
        assert_eq!(model.num_harmonics(), 1000);
        assert!((model.gamma * model.gamma - 20.0).abs() < 1e-12);
        for k in [1usize, 17, 320, 999] {
            let w = k as f64 * wb;
            // (kω_b)^s e^{−kω_b/ω_c} / ω_c^{s−1}, evaluated the long way.
            let expect = w.powi(4) * (-w / DEFAULT_WC).exp() / DEFAULT_WC.powi(3);
            let got = model.amplitudes[k - 1].powi(2);
            assert!((got / expect - 1.0).abs() < 1e-12, "k={k}");
        }
    }

    #[test]
    fn amplitude_at_cutoff_harmonic() {
        let wc = 100.0;
        let env = EnvironmentSpec::new(1.0, 1.0, wc, 0.0).unwrap();
        let model = build_noise_model(&env, 10.0, 20, false).unwrap();
        let a2 = model.amplitudes[9].powi(2);
        assert!((a2 - wc * (-1.0f64).exp()).abs() < 1e-12 * wc);
    }

    #[test]
    fn strict_coverage() {
        let env = reference(4.0);
        assert!(matches!(
            build_noise_model(&env, 1.0, 10, true),
            Err(Error::Coverage { .. })
        ));
        assert!(build_noise_model(&env, 1.0, 10, false).is_ok());
        assert_eq!(coverage(&env, 2.0 * PI * 4.0, 1000), Coverage::Full);
        assert_eq!(coverage(&env, 2.0 * PI * 4.0, 200), Coverage::Partial);
        assert_eq!(coverage(&env, 1.0, 10), Coverage::Insufficient);
    }

    #[test]
    fn weights_examples() {
        let zero = NoiseModel::new(3.0, 1.0, vec![0.0; 5]).unwrap();
        assert!(power_spectrum_weights(&zero).iter().all(|(_, w)| *w == 0.0));
        let single = NoiseModel::new(2.0, 7.0, vec![1.0]).unwrap();
        let w = power_spectrum_weights(&single);
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].0, 7.0);
        assert!((w[0].1 - 2.0 * PI).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_models() {
        assert!(NoiseModel::new(1.0, 1.0, vec![]).is_err());
        assert!(NoiseModel::new(1.0, 0.0, vec![1.0]).is_err());
        assert!(NoiseModel::new(1.0, 1.0, vec![1.0, -0.1]).is_err());
        assert!(NoiseModel::new(1.0, 1.0, vec![f64::NAN]).is_err());
    }

    #[test]
    fn document_regenerates_amplitudes() {
        let json = r#"{"s": 4, "lambda": 10, "omega_c_rad_s": 2010.6192982974676,
                      "temperature_energy": 0, "omega_b_rad_s": 25.132741228718345, "M": 50}"#;
        let doc: NoiseDocument = serde_json::from_str(json).unwrap();
        let (env, model) = doc.resolve(1.0, 1).unwrap();
        assert_eq!(env.s, 4.0);
        assert_eq!(model.num_harmonics(), 50);
        let direct = build_noise_model(&env, model.omega_b, 50, false).unwrap();
        assert_eq!(model, direct);

        let round = serde_json::to_string(&NoiseDocument::from_parts(&env, Some(&model))).unwrap();
        let back: NoiseDocument = serde_json::from_str(&round).unwrap();
        assert_eq!(back.resolve(1.0, 1).unwrap().1, model);
    }

    #[test]
    fn document_rejects_negative_lambda() {
        let json = r#"{"s": 4, "lambda": -1, "omega_c_rad_s": 10}"#;
        let doc: NoiseDocument = serde_json::from_str(json).unwrap();
        assert!(matches!(
            doc.resolve(1.0, 10),
            Err(Error::InvalidParameter { field: "lambda", .. })
        ));
    }
}
