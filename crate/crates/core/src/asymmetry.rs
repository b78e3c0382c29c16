//! Two-pion production asymmetry A_pipi(t) under both models.
//!
//! A_pipi(t) = (P_{K0bar -> 2pi} - P_{K0 -> 2pi}) / (P_{K0 -> 2pi} + P_{K0bar -> 2pi}).
//!
//! The channel width Gamma_{K1->2pi} cancels in the ratio; asymmetries are
//! computed from width-stripped rate kernels so the cancellation is exact
//! at the bit level, not merely to rounding.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::RateLaw;
use crate::params::KaonPhysics;
use crate::twf::{self, TwfVariant};
use crate::wwa::{self, Channel, Flavor};

/// Which description produces a curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Model {
    Wwa,
    Twf(TwfVariant),
}

impl Model {
    pub fn label(&self) -> String {
        match self {
            Model::Wwa => "wwa".to_string(),
            Model::Twf(v) => format!("twf({})", v.as_str()),
        }
    }
}

// serde support for TwfVariant lives here to keep the enum itself plain.
impl Serialize for TwfVariant {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for TwfVariant {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        TwfVariant::parse(&text).map_err(serde::de::Error::custom)
    }
}

/// Width-stripped two-pion rate kernels for (K0, K0bar).
fn kernels(model: Model, physics: &KaonPhysics) -> Result<(RateLaw, RateLaw)> {
    match model {
        Model::Wwa => Ok((
            wwa::channel_law(Flavor::K0, Channel::TwoPion, physics).with_prefactor(1.0),
            wwa::channel_law(Flavor::K0Bar, Channel::TwoPion, physics).with_prefactor(1.0),
        )),
        Model::Twf(variant) => {
            let p = twf::constrain(physics, variant);
            Ok((
                twf::two_pion_kernel(Flavor::K0, physics, &p)?,
                twf::two_pion_kernel(Flavor::K0Bar, physics, &p)?,
            ))
        }
    }
}

/// A_pipi(t) for a model. t = 0 is evaluated in closed form like any other
/// point; no numerical limiting is involved.
pub fn asymmetry_at(model: Model, t: f64, physics: &KaonPhysics) -> Result<f64> {
    if t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    let (k0, k0bar) = kernels(model, physics)?;
    let p = k0.at(t);
    let pbar = k0bar.at(t);
    let denom = p + pbar;
    if !(denom > 0.0) || !denom.is_finite() {
        return Err(Error::DegenerateAsymmetry { t });
    }
    Ok((pbar - p) / denom)
}

/// Asymptotic t >> tau_S limit: 2 Re(eps) for the standard description,
/// 2 Re(eps_s_tilde) for the temporal-wave-function variants.
pub fn large_t_limit(model: Model, physics: &KaonPhysics) -> f64 {
    match model {
        Model::Wwa => 2.0 * physics.epsilon.re,
        Model::Twf(variant) => 2.0 * twf::constrain(physics, variant).eps_s_tilde.re,
    }
}

/// Sampled asymmetry, optionally with per-point uncertainties.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AsymmetryCurve {
    pub model: Model,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Vec<f64>>,
}

/// Uniform-grid sampling of `asymmetry_at`. The degenerate single-point
/// grid `t_min == t_max, n = 1` is allowed; otherwise `t_min < t_max` and
/// `n >= 2`.
pub fn curve(model: Model, t_min: f64, t_max: f64, n: usize, physics: &KaonPhysics) -> Result<AsymmetryCurve> {
    if t_min < 0.0 {
        return Err(Error::NegativeTime(t_min));
    }
    let times: Vec<f64> = if t_min == t_max && n == 1 {
        vec![t_min]
    } else if t_max > t_min && n >= 2 {
        let step = (t_max - t_min) / (n - 1) as f64;
        (0..n).map(|i| t_min + i as f64 * step).collect()
    } else {
        return Err(Error::Config(format!(
            "curve grid requires t_min < t_max and n >= 2 (or a single point with t_min == t_max), \
             got [{t_min}, {t_max}] with n = {n}"
        )));
    };
    let (k0, k0bar) = kernels(model, physics)?;
    let mut values = Vec::with_capacity(times.len());
    for &t in &times {
        let p = k0.at(t);
        let pbar = k0bar.at(t);
        let denom = p + pbar;
        if !(denom > 0.0) || !denom.is_finite() {
            return Err(Error::DegenerateAsymmetry { t });
        }
        values.push((pbar - p) / denom);
    }
    Ok(AsymmetryCurve { model, times, values, sigma: None })
}

/// Largest pointwise separation of two curves over a time window.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Discrepancy {
    pub max_abs_diff: f64,
    pub argmax_t: f64,
    /// max |a - b| / sigma_a over the window, when `a` carries uncertainties.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_sigma: Option<f64>,
}

pub fn discrepancy(a: &AsymmetryCurve, b: &AsymmetryCurve, window: (f64, f64)) -> Result<Discrepancy> {
    if a.times.len() != b.times.len() || a.times.iter().zip(&b.times).any(|(x, y)| x != y) {
        return Err(Error::GridMismatch("discrepancy requires identical time grids".into()));
    }
    let (lo, hi) = window;
    let mut best: Option<(f64, f64)> = None;
    let mut max_ratio: Option<f64> = None;
    for (i, &t) in a.times.iter().enumerate() {
        if t < lo || t > hi {
            continue;
        }
        let diff = (a.values[i] - b.values[i]).abs();
        if best.is_none_or(|(d, _)| diff > d) {
            best = Some((diff, t));
        }
        if let Some(sig) = &a.sigma {
            if sig[i] > 0.0 {
                let r = diff / sig[i];
                if max_ratio.is_none_or(|m| r > m) {
                    max_ratio = Some(r);
                }
            }
        }
    }
    let (max_abs_diff, argmax_t) = best.ok_or_else(|| {
        Error::Grid(format!("window [{lo}, {hi}] contains no grid points"))
    })?;
    Ok(Discrepancy { max_abs_diff, argmax_t, n_sigma: max_ratio })
}

impl AsymmetryCurve {
    /// CSV with header `t_over_tau_s,value[,sigma]`, 12 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        match &self.sigma {
            None => {
                writeln!(w, "t_over_tau_s,value")?;
                for (t, v) in self.times.iter().zip(&self.values) {
                    writeln!(w, "{t:.11e},{v:.11e}")?;
                }
            }
            Some(sig) => {
                writeln!(w, "t_over_tau_s,value,sigma")?;
                for ((t, v), s) in self.times.iter().zip(&self.values).zip(sig) {
                    writeln!(w, "{t:.11e},{v:.11e},{s:.11e}")?;
                }
            }
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV output is ASCII")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use num_complex::Complex64 as C64;

    fn defaults() -> KaonPhysics {
        KaonPhysics::default()
    }

    const LARGE_T: Model = Model::Twf(TwfVariant::MatchedLargeT);
    const THREE_PION: Model = Model::Twf(TwfVariant::MatchedThreePion);

    #[test]
    fn standard_asymmetry_vanishes_at_small_times() {
        let a = asymmetry_at(Model::Wwa, 1e-9, &defaults()).unwrap();
        assert!(a.abs() < 1e-6, "A(1e-9) = {a}");
    }

    #[test]
    fn tilded_asymmetry_is_finite_at_zero() {
        let p = defaults();
        // Exact ratio of the tilded rates at t = 0 (frozen independent value)
        let a = asymmetry_at(LARGE_T, 0.0, &p).unwrap();
        assert_relative_eq!(a, 7.438702945384805e-2, max_relative = 1e-10);
        // consistent with the ~8% first-order estimate 2 Re(eps_l_tilde (1 - sqrt(Gl/Gs)))
        let el = twf::constrain(&p, TwfVariant::MatchedLargeT).eps_l_tilde;
        let ratio = (p.tau_s / p.tau_l).sqrt();
        let first_order = 2.0 * (el * (1.0 - ratio)).re;
        assert_relative_eq!(first_order, 7.458397022518254e-2, max_relative = 1e-10);
        assert!((a - first_order).abs() < 5e-4);
        assert!((0.07..=0.085).contains(&a));
    }

    #[test]
    fn large_t_limits() {
        let p = defaults();
        let wwa_limit = large_t_limit(Model::Wwa, &p);
        assert_relative_eq!(wwa_limit, 3.232268197230754e-3, max_relative = 1e-12);
        // matched-large-t variant coincides with the standard limit exactly
        assert_eq!(large_t_limit(LARGE_T, &p), wwa_limit);
        assert_relative_eq!(large_t_limit(THREE_PION, &p), 1.3425935139805154e-4, max_relative = 1e-10);
    }

    #[test]
    fn curve_matches_pointwise_frozen_values() {
        let c = curve(Model::Wwa, 0.0, 20.0, 401, &defaults()).unwrap();
        let at = |t: f64| -> f64 {
            let i = c.times.iter().position(|&x| (x - t).abs() < 1e-12).unwrap();
            c.values[i]
        };
        // Independent scripted evaluation of the rate ratio.
        assert_relative_eq!(at(5.0), 4.851561011285594e-3, max_relative = 1e-10);
        assert_relative_eq!(at(12.0), -1.8678912431764721e-1, max_relative = 1e-10);
    }

    #[test]
    fn single_point_curve() {
        let p = defaults();
        let c = curve(LARGE_T, 0.0, 0.0, 1, &p).unwrap();
        assert_eq!(c.times, vec![0.0]);
        assert_eq!(c.values[0], asymmetry_at(LARGE_T, 0.0, &p).unwrap());
    }

    #[test]
    fn curve_rejects_bad_grids() {
        let p = defaults();
        assert!(curve(Model::Wwa, 3.0, 1.0, 10, &p).is_err());
        assert!(curve(Model::Wwa, 0.0, 1.0, 0, &p).is_err());
        assert!(matches!(curve(Model::Wwa, -1.0, 1.0, 10, &p), Err(Error::NegativeTime(_))));
    }

    #[test]
    fn channel_width_cancels_bit_exactly() {
        let base = defaults();
        let rescaled = KaonPhysics { gamma_k1_to_2pi: 0.37 * base.gamma_k1_to_2pi, ..base };
        for model in [Model::Wwa, LARGE_T, THREE_PION] {
            let a = curve(model, 0.0, 30.0, 121, &base).unwrap();
            let b = curve(model, 0.0, 30.0, 121, &rescaled).unwrap();
            assert_eq!(a.values, b.values, "channel rescaling leaked into {model:?}");
        }
    }

    #[test]
    fn asymmetry_is_bounded_by_one() {
        for model in [Model::Wwa, LARGE_T, THREE_PION] {
            let c = curve(model, 0.0, 40.0, 801, &defaults()).unwrap();
            assert!(c.values.iter().all(|v| v.abs() <= 1.0));
        }
    }

    #[test]
    fn models_coincide_without_cp_violation() {
        let p = KaonPhysics { epsilon: C64::new(0.0, 0.0), ..defaults() };
        let a = curve(Model::Wwa, 0.0, 20.0, 101, &p).unwrap();
        let b = curve(LARGE_T, 0.0, 20.0, 101, &p).unwrap();
        let d = discrepancy(&a, &b, (0.0, 20.0)).unwrap();
        assert_eq!(d.max_abs_diff, 0.0);
        assert!(a.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn discrepancy_on_identical_curves() {
        let c = curve(Model::Wwa, 1.0, 10.0, 50, &defaults()).unwrap();
        let d = discrepancy(&c, &c, (1.0, 10.0)).unwrap();
        assert_eq!(d.max_abs_diff, 0.0);
        assert_eq!(d.argmax_t, 1.0);
        assert_eq!(d.n_sigma, None);
    }

    #[test]
    fn models_separate_in_the_early_window() {
        let p = defaults();
        let a = curve(Model::Wwa, 1.0, 10.0, 500, &p).unwrap();
        let b = curve(LARGE_T, 1.0, 10.0, 500, &p).unwrap();
        let d = discrepancy(&a, &b, (1.0, 10.0)).unwrap();
        assert!(d.max_abs_diff > 0.01, "max diff = {}", d.max_abs_diff);
        assert!((0.07..0.08).contains(&d.max_abs_diff));
    }

    #[test]
    fn variants_agree_at_zero_to_first_order() {
        let p = defaults();
        let a1 = asymmetry_at(LARGE_T, 0.0, &p).unwrap();
        let a2 = asymmetry_at(THREE_PION, 0.0, &p).unwrap();
        let es1 = twf::constrain(&p, TwfVariant::MatchedLargeT).eps_s_tilde;
        let es2 = twf::constrain(&p, TwfVariant::MatchedThreePion).eps_s_tilde;
        assert!((a1 - a2).abs() < 2.0 * (es1 - es2).norm() + 1e-12);
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let p = defaults();
        let a = curve(Model::Wwa, 1.0, 10.0, 50, &p).unwrap();
        let b = curve(Model::Wwa, 1.0, 10.0, 51, &p).unwrap();
        assert!(matches!(discrepancy(&a, &b, (1.0, 10.0)), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn empty_window_is_an_error() {
        let p = defaults();
        let a = curve(Model::Wwa, 1.0, 10.0, 50, &p).unwrap();
        assert!(discrepancy(&a, &a, (100.0, 200.0)).is_err());
    }

    #[test]
    fn underflowed_denominator_is_degenerate() {
        assert!(matches!(
            asymmetry_at(Model::Wwa, 1e6, &defaults()),
            Err(Error::DegenerateAsymmetry { .. })
        ));
    }

    #[test]
    fn csv_format() {
        let c = AsymmetryCurve {
            model: Model::Wwa,
            times: vec![0.0, 1.0],
            values: vec![0.25, -0.5],
            sigma: None,
        };
        let text = c.to_csv_string();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t_over_tau_s,value"));
        assert_eq!(lines.next(), Some("0.00000000000e0,2.50000000000e-1"));
        assert_eq!(lines.next(), Some("1.00000000000e0,-5.00000000000e-1"));

        let with_sigma = AsymmetryCurve { sigma: Some(vec![0.125, 0.0625]), ..c };
        let text = with_sigma.to_csv_string();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t_over_tau_s,value,sigma"));
        assert_eq!(lines.next(), Some("0.00000000000e0,2.50000000000e-1,1.25000000000e-1"));
    }
}
