//! Binary temporal-wave-function model.
//!
//! The decay-time statistics of a kaon are described by a two-component
//! amplitude (Psi_+(t), Psi_-(t)) over the CP = +1 / -1 sectors whose
//! squared moduli are decay-time densities; a short-lived and a
//! long-lived component carry their own CP impurities eps_s_tilde and
//! eps_l_tilde. Matching the model to the standard description fixes
//! eps_l_tilde = eps sqrt(Gamma_S/Gamma_L) and leaves two natural
//! choices for eps_s_tilde, both first-class here as [`TwfVariant`].
//!
//! Exact expressions are evaluated throughout; no terms are dropped by
//! order counting. Times in tau_S, rates in 1/tau_S.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::evolution::RateLaw;
use crate::params::{ComplexEnergy, DerivedConstants, KaonPhysics, Scaled};
use crate::wwa::{Channel, Flavor, LeptonSign};

/// How eps_s_tilde is fixed from the constants. eps_l_tilde is always
/// eps sqrt(Gamma_S/Gamma_L).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TwfVariant {
    /// eps_s_tilde = eps: reproduces the standard large-time two-pion
    /// asymmetry limit 2 Re(eps).
    MatchedLargeT,
    /// eps_s_tilde = eps sqrt(Gamma_L/Gamma_S): reproduces the standard
    /// K_S -> 3pi prediction.
    MatchedThreePion,
}

impl TwfVariant {
    pub const ALL: [TwfVariant; 2] = [TwfVariant::MatchedLargeT, TwfVariant::MatchedThreePion];

    pub fn as_str(&self) -> &'static str {
        match self {
            TwfVariant::MatchedLargeT => "matched-large-t",
            TwfVariant::MatchedThreePion => "matched-three-pion",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "matched-large-t" | "large-t" => Ok(TwfVariant::MatchedLargeT),
            "matched-three-pion" | "three-pion" => Ok(TwfVariant::MatchedThreePion),
            other => Err(Error::Config(format!(
                "unknown twf variant `{other}` (expected matched-large-t or matched-three-pion)"
            ))),
        }
    }
}

/// CP-impurity parameters of the short- and long-lived components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwfParams {
    pub eps_s_tilde: C64,
    pub eps_l_tilde: C64,
}

impl TwfParams {
    pub fn new(eps_s_tilde: C64, eps_l_tilde: C64) -> Result<Self> {
        if !(eps_s_tilde.norm() < 1.0) {
            return Err(Error::Validation(format!(
                "|eps_s_tilde| = {} must be < 1",
                eps_s_tilde.norm()
            )));
        }
        if !((eps_s_tilde * eps_l_tilde).norm() < 1.0) {
            return Err(Error::Validation(
                "|eps_s_tilde * eps_l_tilde| must be < 1 (preparation denominator)".into(),
            ));
        }
        Ok(Self { eps_s_tilde, eps_l_tilde })
    }

    pub fn zero() -> Self {
        Self { eps_s_tilde: C64::new(0.0, 0.0), eps_l_tilde: C64::new(0.0, 0.0) }
    }

    pub fn is_zero(&self) -> bool {
        self.eps_s_tilde == C64::new(0.0, 0.0) && self.eps_l_tilde == C64::new(0.0, 0.0)
    }
}

/// Fixes (eps_s_tilde, eps_l_tilde) from the constants for a variant.
pub fn constrain(physics: &KaonPhysics, variant: TwfVariant) -> TwfParams {
    let s = physics.scaled();
    let ratio = (s.gamma_s / s.gamma_l).sqrt();
    let eps_l_tilde = s.epsilon * ratio;
    let eps_s_tilde = match variant {
        TwfVariant::MatchedLargeT => s.epsilon,
        TwfVariant::MatchedThreePion => s.epsilon / ratio,
    };
    TwfParams { eps_s_tilde, eps_l_tilde }
}

/// Coefficients (alpha, beta) on the (1, eps_s_tilde) and (eps_l_tilde, 1)
/// pseudo-spinors, fixed by the preparation at t = 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preparation {
    pub alpha: C64,
    pub beta: C64,
}

impl Preparation {
    /// Pure short-lived component: alpha = 1/sqrt(1 + |eps_s_tilde|^2).
    pub fn pure_short(p: &TwfParams) -> Self {
        Self {
            alpha: C64::new(1.0 / (1.0 + p.eps_s_tilde.norm_sqr()).sqrt(), 0.0),
            beta: C64::new(0.0, 0.0),
        }
    }

    /// Pure long-lived component: beta = 1/sqrt(1 + |eps_l_tilde|^2).
    pub fn pure_long(p: &TwfParams) -> Self {
        Self {
            alpha: C64::new(0.0, 0.0),
            beta: C64::new(1.0 / (1.0 + p.eps_l_tilde.norm_sqr()).sqrt(), 0.0),
        }
    }
}

/// Decomposes a flavor state onto the pseudo-spinors:
/// (1,1)  = [(1-e_L)(1,e_S) + (1-e_S)(e_L,1)] / (1 - e_S e_L),
/// (1,-1) = [(1+e_L)(1,e_S) - (1+e_S)(e_L,1)] / (1 - e_S e_L),
/// each scaled by 1/sqrt(2) for the flavor normalization.
pub fn prepare(initial: Flavor, p: &TwfParams) -> Result<Preparation> {
    let denom = C64::new(1.0, 0.0) - p.eps_s_tilde * p.eps_l_tilde;
    if denom.norm() < 1e-12 {
        return Err(Error::SingularPreparation);
    }
    let scale = 1.0 / (std::f64::consts::SQRT_2);
    let one = C64::new(1.0, 0.0);
    let (alpha, beta) = match initial {
        Flavor::K0 => ((one - p.eps_l_tilde) / denom * scale, (one - p.eps_s_tilde) / denom * scale),
        Flavor::K0Bar => ((one + p.eps_l_tilde) / denom * scale, -(one + p.eps_s_tilde) / denom * scale),
    };
    Ok(Preparation { alpha, beta })
}

/// Two-component amplitude (Psi_+(t), Psi_-(t)), units 1/sqrt(tau_S).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoComponentAmplitude {
    pub plus: C64,
    pub minus: C64,
}

/// Psi_+(t) = alpha sqrt(Gamma_S) e^{-i E_S t} + beta eps_l_tilde sqrt(Gamma_L) e^{-i E_L t},
/// Psi_-(t) = beta sqrt(Gamma_L) e^{-i E_L t} + alpha eps_s_tilde sqrt(Gamma_S) e^{-i E_S t}.
pub fn twf_amplitude(
    prep: &Preparation,
    p: &TwfParams,
    t: f64,
    d: &DerivedConstants,
) -> Result<TwoComponentAmplitude> {
    if t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    // tau_S units: sqrt(Gamma_S) = 1, sqrt(Gamma_L) = sqrt(Gamma_L/Gamma_S).
    let tau_s = 1.0 / d.gamma_s;
    let sqrt_gl = (d.gamma_l * tau_s).sqrt();
    let e_s = ComplexEnergy::new(d.e_s.mass * tau_s, d.e_s.half_width * tau_s);
    let e_l = ComplexEnergy::new(d.e_l.mass * tau_s, d.e_l.half_width * tau_s);
    let zs = e_s.evolution(t);
    let zl = e_l.evolution(t);
    Ok(TwoComponentAmplitude {
        plus: prep.alpha * zs + prep.beta * p.eps_l_tilde * sqrt_gl * zl,
        minus: prep.beta * sqrt_gl * zl + prep.alpha * p.eps_s_tilde * zs,
    })
}

/// Rate law of a channel for a given preparation. Channel widths enter as
/// amplitude weights sqrt(Gamma_channel / Gamma_S) (CP = +1) or
/// sqrt(Gamma_channel / Gamma_L) (CP = -1), stored as prefactor ratios.
pub fn prepared_law(prep: &Preparation, p: &TwfParams, channel: Channel, physics: &KaonPhysics) -> Result<RateLaw> {
    let s = physics.scaled();
    let sqrt_gl = s.gamma_l.sqrt();
    match channel {
        // (Gamma_2pi / Gamma_S) |Psi_+|^2, Gamma_S = 1.
        Channel::TwoPion => Ok(RateLaw::new(
            s.gamma_2pi / s.gamma_s,
            prep.alpha,
            prep.beta * p.eps_l_tilde * sqrt_gl,
            s.e_s(),
            s.e_l(),
        )),
        // (Gamma_3pi / Gamma_L) |Psi_-|^2.
        Channel::ThreePion => Ok(RateLaw::new(
            s.gamma_3pi / s.gamma_l,
            prep.alpha * p.eps_s_tilde,
            prep.beta * sqrt_gl,
            s.e_s(),
            s.e_l(),
        )),
        // Semileptonic states are CP-symmetric fifty-fifty superpositions;
        // the model defines them only in the CP-respecting limit.
        Channel::SemileptonicPlus | Channel::SemileptonicMinus => {
            if !p.is_zero() {
                return Err(Error::UnsupportedRegime(
                    "semileptonic temporal-wave-function rates are defined only for \
                     eps_s_tilde = eps_l_tilde = 0"
                        .into(),
                ));
            }
            let sign = if channel == Channel::SemileptonicPlus { 1.0 } else { -1.0 };
            // (Gamma_sl / 2) |Psi_+ / sqrt(Gamma_S) + sign * Psi_- / sqrt(Gamma_L)|^2
            Ok(RateLaw::new(s.gamma_sl / 2.0, prep.alpha, prep.beta * sign, s.e_s(), s.e_l()))
        }
    }
}

fn flavor_rate(initial: Flavor, channel: Channel, t: f64, physics: &KaonPhysics, p: &TwfParams) -> Result<f64> {
    if t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    let prep = prepare(initial, p)?;
    Ok(prepared_law(&prep, p, channel, physics)?.at(t))
}

/// Rate law for a flavor preparation (used by the event generator and fits).
pub fn channel_law(initial: Flavor, channel: Channel, physics: &KaonPhysics, p: &TwfParams) -> Result<RateLaw> {
    let prep = prepare(initial, p)?;
    prepared_law(&prep, p, channel, physics)
}

/// Two-pion production rate of a flavor state prepared at t = 0.
pub fn two_pion_rate(initial: Flavor, t: f64, physics: &KaonPhysics, p: &TwfParams) -> Result<f64> {
    flavor_rate(initial, Channel::TwoPion, t, physics, p)
}

/// Three-pion (CP = -1) production rate.
pub fn three_pion_rate(initial: Flavor, t: f64, physics: &KaonPhysics, p: &TwfParams) -> Result<f64> {
    flavor_rate(initial, Channel::ThreePion, t, physics, p)
}

/// Flavor-tagging semileptonic rate in the CP-respecting limit
/// (errors unless eps_s_tilde = eps_l_tilde = 0); reproduces strangeness
/// oscillations identically to the standard description at eps = 0.
pub fn semileptonic_rate(
    initial: Flavor,
    sign: LeptonSign,
    t: f64,
    physics: &KaonPhysics,
    p: &TwfParams,
) -> Result<f64> {
    let channel = match sign {
        LeptonSign::Plus => Channel::SemileptonicPlus,
        LeptonSign::Minus => Channel::SemileptonicMinus,
    };
    flavor_rate(initial, channel, t, physics, p)
}

/// Internal kernels with the channel width stripped, for asymmetries.
pub(crate) fn two_pion_kernel(initial: Flavor, physics: &KaonPhysics, p: &TwfParams) -> Result<RateLaw> {
    let s: Scaled = physics.scaled();
    let prep = prepare(initial, p)?;
    Ok(prepared_law(&prep, p, Channel::TwoPion, physics)?.with_prefactor(1.0 / s.gamma_s))
}
