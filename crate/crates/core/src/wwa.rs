//! Standard mass-decay-matrix description of the surviving kaon.
//!
//! The effective Hamiltonian is diagonal in the {K_S, K_L} basis with
//! eigenvalues E = m - (i/2) Gamma, so evolution is evaluated directly in
//! the eigenbasis: no matrix exponentiation is ever needed. Production
//! rates into a channel are the channel width times the squared overlap
//! of the evolved state with the decaying component, e.g.
//! Gamma_{K1->2pi} |<K1|psi(t)>|^2 for the two-pion channel.
//!
//! All times are in units of tau_S, all rates in 1/tau_S.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::evolution::RateLaw;
use crate::params::{ComplexEnergy, DerivedConstants, KaonPhysics, Scaled};

/// Strangeness eigenstate prepared at t = 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Flavor {
    K0,
    K0Bar,
}

impl Flavor {
    pub fn as_str(&self) -> &'static str {
        match self {
            Flavor::K0 => "K0",
            Flavor::K0Bar => "K0bar",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "K0" | "k0" => Ok(Flavor::K0),
            "K0bar" | "k0bar" => Ok(Flavor::K0Bar),
            other => Err(Error::Config(format!("unknown flavor `{other}` (expected K0 or K0bar)"))),
        }
    }
}

/// Lepton charge tag of a semileptonic final state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LeptonSign {
    Plus,
    Minus,
}

/// Decay channels tracked by the laboratory. The two-pion channel
/// aggregates pi+pi- and pi0pi0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    TwoPion,
    ThreePion,
    SemileptonicPlus,
    SemileptonicMinus,
}

impl Channel {
    pub const ALL: [Channel; 4] = [
        Channel::TwoPion,
        Channel::ThreePion,
        Channel::SemileptonicPlus,
        Channel::SemileptonicMinus,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Channel::TwoPion => "2pi",
            Channel::ThreePion => "3pi",
            Channel::SemileptonicPlus => "semileptonic+",
            Channel::SemileptonicMinus => "semileptonic-",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "2pi" => Ok(Channel::TwoPion),
            "3pi" => Ok(Channel::ThreePion),
            "semileptonic+" => Ok(Channel::SemileptonicPlus),
            "semileptonic-" => Ok(Channel::SemileptonicMinus),
            other => Err(Error::Config(format!("unknown channel `{other}`"))),
        }
    }
}

/// A kaon state expressed by its preparation amplitudes in the
/// {K_S, K_L} basis. Named states carry the normalization factors of the
/// inverted superpositions, which depend on epsilon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FlavorState {
    K0,
    K0Bar,
    K1,
    K2,
    KShort,
    KLong,
    Superposition { a_s: C64, a_l: C64 },
}

impl From<Flavor> for FlavorState {
    fn from(f: Flavor) -> Self {
        match f {
            Flavor::K0 => FlavorState::K0,
            Flavor::K0Bar => FlavorState::K0Bar,
        }
    }
}

impl FlavorState {
    /// Preparation amplitudes (a_S, a_L) at t = 0.
    pub fn amplitudes(&self, physics: &KaonPhysics) -> (C64, C64) {
        let eps = physics.epsilon;
        let norm = (1.0 + eps.norm_sqr()).sqrt();
        let sqrt2 = std::f64::consts::SQRT_2;
        match self {
            FlavorState::K0 => {
                let n = norm / (sqrt2 * (C64::new(1.0, 0.0) + eps));
                (n, n)
            }
            FlavorState::K0Bar => {
                let n = norm / (sqrt2 * (C64::new(1.0, 0.0) - eps));
                (n, -n)
            }
            FlavorState::K1 => {
                let n = norm / (C64::new(1.0, 0.0) - eps * eps);
                (n, -n * eps)
            }
            FlavorState::K2 => {
                let n = norm / (C64::new(1.0, 0.0) - eps * eps);
                (-n * eps, n)
            }
            FlavorState::KShort => (C64::new(1.0, 0.0), C64::new(0.0, 0.0)),
            FlavorState::KLong => (C64::new(0.0, 0.0), C64::new(1.0, 0.0)),
            FlavorState::Superposition { a_s, a_l } => (*a_s, *a_l),
        }
    }
}

/// Eigenvalues (E_S, E_L) of the mass-decay matrix in tau_S units:
/// E_S = (0, Gamma_S tau_S / 2 = 1/2), E_L = (Delta m tau_S, Gamma_L tau_S / 2).
pub fn complex_energies(d: &DerivedConstants) -> (ComplexEnergy, ComplexEnergy) {
    let tau_s = 1.0 / d.gamma_s;
    (
        ComplexEnergy::new(d.e_s.mass * tau_s, d.e_s.half_width * tau_s),
        ComplexEnergy::new(d.e_l.mass * tau_s, d.e_l.half_width * tau_s),
    )
}

/// Evolved amplitudes (c_S(t), c_L(t)) of a state prepared at t = 0.
pub fn evolve_flavor(initial: FlavorState, t: f64, physics: &KaonPhysics) -> Result<(C64, C64)> {
    if t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    let s = physics.scaled();
    let (a_s, a_l) = initial.amplitudes(physics);
    Ok((a_s * s.e_s().evolution(t), a_l * s.e_l().evolution(t)))
}

/// Projections of K_S and K_L onto the decaying component of each channel.
/// Returns (p_s, p_l) such that the channel amplitude at time t is
/// p_s c_S(t) + p_l c_L(t), together with the channel width in 1/tau_S.
fn projection(channel: Channel, s: &Scaled) -> (C64, C64, f64) {
    let eps = s.epsilon;
    let inv = 1.0 / (1.0 + eps.norm_sqr()).sqrt();
    let one = C64::new(1.0, 0.0);
    match channel {
        // <K1|K_S> = inv, <K1|K_L> = eps * inv
        Channel::TwoPion => (one * inv, eps * inv, s.gamma_2pi),
        // <K2|K_S> = eps * inv, <K2|K_L> = inv
        Channel::ThreePion => (eps * inv, one * inv, s.gamma_3pi),
        // <K0|K_S> = <K0|K_L> = (1 + eps) / sqrt(2 (1+|eps|^2))
        Channel::SemileptonicPlus => {
            let c = (one + eps) * (inv / std::f64::consts::SQRT_2);
            (c, c, s.gamma_sl)
        }
        // <K0bar|K_S> = (eps - 1) / sqrt(2(1+|eps|^2)), <K0bar|K_L> = (1 - eps) / ...
        Channel::SemileptonicMinus => {
            let c = (one - eps) * (inv / std::f64::consts::SQRT_2);
            (-c, c, s.gamma_sl)
        }
    }
}

/// Production-rate law for a channel and an initial flavor.
pub fn channel_law(initial: Flavor, channel: Channel, physics: &KaonPhysics) -> RateLaw {
    let s = physics.scaled();
    let (a_s, a_l) = FlavorState::from(initial).amplitudes(physics);
    let (p_s, p_l, width) = projection(channel, &s);
    RateLaw::new(width, a_s * p_s, a_l * p_l, s.e_s(), s.e_l())
}

fn rate(initial: Flavor, channel: Channel, t: f64, physics: &KaonPhysics) -> Result<f64> {
    if t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    Ok(channel_law(initial, channel, physics).at(t))
}

/// P_{K0(0) -> 2pi(t)} or P_{K0bar(0) -> 2pi(t)}.
pub fn two_pion_rate(initial: Flavor, t: f64, physics: &KaonPhysics) -> Result<f64> {
    rate(initial, Channel::TwoPion, t, physics)
}

/// CP = -1 channel, Gamma_{K2 -> 3pi0} prefactor, S and L roles exchanged.
pub fn three_pion_rate(initial: Flavor, t: f64, physics: &KaonPhysics) -> Result<f64> {
    rate(initial, Channel::ThreePion, t, physics)
}

/// Flavor-tagging semileptonic rate; the lepton sign selects the
/// K0 (+) or K0bar (-) projection and the result oscillates with Delta m.
pub fn semileptonic_rate(
    initial: Flavor,
    sign: LeptonSign,
    t: f64,
    physics: &KaonPhysics,
) -> Result<f64> {
    let channel = match sign {
        LeptonSign::Plus => Channel::SemileptonicPlus,
        LeptonSign::Minus => Channel::SemileptonicMinus,
    };
    rate(initial, channel, t, physics)
}

/// Sampled production rates of one channel on a uniform time grid.
#[derive(Debug, Clone)]
pub struct RateCurve {
    pub channel: Channel,
    pub times: Vec<f64>,
    pub rates: Vec<f64>,
}

impl RateCurve {
    pub fn new(channel: Channel, times: Vec<f64>, rates: Vec<f64>) -> Result<Self> {
        if times.len() != rates.len() {
            return Err(Error::Validation("times and rates lengths differ".into()));
        }
        if times.first().is_some_and(|&t| t < 0.0) || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Validation("times must be non-negative and strictly increasing".into()));
        }
        if rates.iter().any(|&r| r < 0.0 || !r.is_finite()) {
            return Err(Error::Validation("rates must be finite and non-negative".into()));
        }
        Ok(Self { channel, times, rates })
    }
}

/// Tabulates a channel rate on `n >= 2` uniformly spaced times.
pub fn rate_curve(
    initial: Flavor,
    channel: Channel,
    t_min: f64,
    t_max: f64,
    n: usize,
    physics: &KaonPhysics,
) -> Result<RateCurve> {
    if !(t_min >= 0.0 && t_max > t_min) || n < 2 {
        return Err(Error::Config(format!(
            "rate grid requires 0 <= t_min < t_max and n >= 2, got [{t_min}, {t_max}] with n = {n}"
        )));
    }
    let law = channel_law(initial, channel, physics);
    let step = (t_max - t_min) / (n - 1) as f64;
    let times: Vec<f64> = (0..n).map(|i| t_min + i as f64 * step).collect();
    let rates: Vec<f64> = times.iter().map(|&t| law.at(t)).collect();
    RateCurve::new(channel, times, rates)
}
