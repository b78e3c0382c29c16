//! Physical constants of the neutral-kaon system and derived quantities.
//!
//! Conventions used throughout the crate:
//!
//! * the internal time unit is the K_S lifetime tau_S; every public rate
//!   function takes `t` in units of tau_S and returns rates in 1/tau_S;
//! * energies are measured relative to m_S, so only the mass splitting
//!   Delta m = m_L - m_S appears anywhere;
//! * `KaonPhysics` stores SI inputs (seconds, 1/seconds); [`Scaled`] holds
//!   the dimensionless tau_S-unit values the model code consumes.
//!
//! Delta m is an external input (default `delta_m * tau_S = 0.472` from
//! standard compilations) and is configurable like every other constant.

use std::collections::BTreeMap;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::kv::KvDoc;

/// K_S lifetime, seconds.
pub const DEFAULT_TAU_S: f64 = 8.92e-11;
/// K_L lifetime, seconds.
pub const DEFAULT_TAU_L: f64 = 5.17e-8;
/// |epsilon|, dimensionless.
pub const DEFAULT_ABS_EPSILON: f64 = 2.228e-3;
/// arg(epsilon), degrees.
pub const DEFAULT_ARG_EPSILON_DEG: f64 = 43.5;
/// Delta m expressed as Delta m * tau_S.
pub const DEFAULT_DELTA_M_TAU_S: f64 = 0.472;
/// Gamma_{K1 -> 2pi} as a fraction of Gamma_S (2pi dominates K_S decay).
pub const DEFAULT_GAMMA_2PI_OVER_GAMMA_S: f64 = 1.0;
/// Gamma_{K2 -> 3pi0} as a fraction of Gamma_L.
pub const DEFAULT_GAMMA_3PI_OVER_GAMMA_L: f64 = 0.20;
/// Gamma_{K0 -> pi- l+ nu} (= Gamma_{K0bar -> pi+ l- nubar}) per flavor,
/// as a fraction of Gamma_L.
pub const DEFAULT_GAMMA_SL_OVER_GAMMA_L: f64 = 0.335;

/// Physical constants of the system, SI units.
///
/// All fields are public and the struct is plain data; [`load_physics`]
/// is the validating constructor used by configuration loading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KaonPhysics {
    /// K_S lifetime in seconds.
    pub tau_s: f64,
    /// K_L lifetime in seconds.
    pub tau_l: f64,
    /// Mass splitting m_L - m_S in 1/seconds (hbar = 1).
    pub delta_m: f64,
    /// CP-violation parameter epsilon.
    pub epsilon: C64,
    /// Gamma_{K1 -> pi pi} in 1/seconds (both 2pi final states aggregated).
    pub gamma_k1_to_2pi: f64,
    /// Gamma_{K2 -> 3pi0} in 1/seconds.
    pub gamma_k2_to_3pi: f64,
    /// Semileptonic width per flavor in 1/seconds.
    pub gamma_semileptonic: f64,
}

impl Default for KaonPhysics {
    fn default() -> Self {
        let gamma_s = 1.0 / DEFAULT_TAU_S;
        let gamma_l = 1.0 / DEFAULT_TAU_L;
        let arg = DEFAULT_ARG_EPSILON_DEG.to_radians();
        Self {
            tau_s: DEFAULT_TAU_S,
            tau_l: DEFAULT_TAU_L,
            delta_m: DEFAULT_DELTA_M_TAU_S / DEFAULT_TAU_S,
            epsilon: C64::from_polar(DEFAULT_ABS_EPSILON, arg),
            gamma_k1_to_2pi: DEFAULT_GAMMA_2PI_OVER_GAMMA_S * gamma_s,
            gamma_k2_to_3pi: DEFAULT_GAMMA_3PI_OVER_GAMMA_L * gamma_l,
            gamma_semileptonic: DEFAULT_GAMMA_SL_OVER_GAMMA_L * gamma_l,
        }
    }
}

impl KaonPhysics {
    /// Checks the type invariants. `load_physics` calls this; direct
    /// struct construction may bypass it (useful for degenerate test
    /// configurations such as tau_s = tau_l).
    pub fn validate(&self) -> Result<()> {
        let gamma_s = 1.0 / self.tau_s;
        let gamma_l = 1.0 / self.tau_l;
        if !(self.tau_s > 0.0 && self.tau_s.is_finite()) {
            return Err(Error::Validation(format!("tau_s must be positive, got {}", self.tau_s)));
        }
        if !(self.tau_l > self.tau_s) {
            return Err(Error::Validation(format!(
                "tau_l must exceed tau_s, got tau_l = {} <= tau_s = {}",
                self.tau_l, self.tau_s
            )));
        }
        if !(self.epsilon.norm() < 0.1) {
            return Err(Error::Validation(format!(
                "|epsilon| = {} is outside the small-CP-violation regime (< 0.1)",
                self.epsilon.norm()
            )));
        }
        if !self.delta_m.is_finite() || self.delta_m < 0.0 {
            return Err(Error::Validation(format!("delta_m must be finite and >= 0, got {}", self.delta_m)));
        }
        if !(self.gamma_k1_to_2pi > 0.0 && self.gamma_k1_to_2pi <= gamma_s * (1.0 + 1e-12)) {
            return Err(Error::Validation(format!(
                "gamma_k1_to_2pi must satisfy 0 < gamma <= Gamma_S = {gamma_s}, got {}",
                self.gamma_k1_to_2pi
            )));
        }
        if !(self.gamma_k2_to_3pi > 0.0 && self.gamma_k2_to_3pi <= gamma_l * (1.0 + 1e-12)) {
            return Err(Error::Validation(format!(
                "gamma_k2_to_3pi must satisfy 0 < gamma <= Gamma_L = {gamma_l}, got {}",
                self.gamma_k2_to_3pi
            )));
        }
        if !(self.gamma_semileptonic > 0.0 && self.gamma_semileptonic <= gamma_l * (1.0 + 1e-12)) {
            return Err(Error::Validation(format!(
                "gamma_semileptonic must satisfy 0 < gamma <= Gamma_L = {gamma_l}, got {}",
                self.gamma_semileptonic
            )));
        }
        Ok(())
    }

    /// Same constants with epsilon replaced; used by the epsilon fit.
    pub fn with_epsilon(&self, epsilon: C64) -> Self {
        Self { epsilon, ..*self }
    }

    /// Dimensionless tau_S-unit view of the constants.
    pub fn scaled(&self) -> Scaled {
        Scaled {
            gamma_s: 1.0,
            gamma_l: self.tau_s / self.tau_l,
            delta_m: self.delta_m * self.tau_s,
            gamma_2pi: self.gamma_k1_to_2pi * self.tau_s,
            gamma_3pi: self.gamma_k2_to_3pi * self.tau_s,
            gamma_sl: self.gamma_semileptonic * self.tau_s,
            epsilon: self.epsilon,
        }
    }

    /// The flat configuration keys, suitable for echoing into sidecar
    /// files and reports. `load_physics` on the echoed document
    /// reproduces the same constants.
    pub fn config_echo(&self) -> BTreeMap<&'static str, f64> {
        let gamma_s = 1.0 / self.tau_s;
        let gamma_l = 1.0 / self.tau_l;
        BTreeMap::from([
            ("tau_s_seconds", self.tau_s),
            ("tau_l_seconds", self.tau_l),
            ("abs_epsilon", self.epsilon.norm()),
            ("arg_epsilon_degrees", self.epsilon.arg().to_degrees()),
            ("delta_m_times_tau_s", self.delta_m * self.tau_s),
            ("gamma_k1_2pi_over_gamma_s", self.gamma_k1_to_2pi / gamma_s),
            ("gamma_k2_3pi_over_gamma_l", self.gamma_k2_to_3pi / gamma_l),
            ("gamma_semileptonic_over_gamma_l", self.gamma_semileptonic / gamma_l),
        ])
    }
}

/// Loads and validates constants from a key-value document.
///
/// The document must either provide every key
/// (`tau_s_seconds`, `tau_l_seconds`, `abs_epsilon`, `arg_epsilon_degrees`,
/// `delta_m_times_tau_s`, `gamma_k1_2pi_over_gamma_s`,
/// `gamma_k2_3pi_over_gamma_l`, `gamma_semileptonic_over_gamma_l`)
/// or set `defaults = true` and override selectively.
pub fn load_physics(doc: &KvDoc) -> Result<KaonPhysics> {
    let use_defaults = doc.get_bool("defaults")?.unwrap_or(false);
    let get = |key: &str, default: f64| -> Result<f64> {
        if use_defaults {
            Ok(doc.get_f64(key)?.unwrap_or(default))
        } else {
            doc.require_f64(key)
        }
    };
    let tau_s = get("tau_s_seconds", DEFAULT_TAU_S)?;
    let tau_l = get("tau_l_seconds", DEFAULT_TAU_L)?;
    let abs_eps = get("abs_epsilon", DEFAULT_ABS_EPSILON)?;
    let arg_eps = get("arg_epsilon_degrees", DEFAULT_ARG_EPSILON_DEG)?;
    let dm_tau = get("delta_m_times_tau_s", DEFAULT_DELTA_M_TAU_S)?;
    let f_2pi = get("gamma_k1_2pi_over_gamma_s", DEFAULT_GAMMA_2PI_OVER_GAMMA_S)?;
    let f_3pi = get("gamma_k2_3pi_over_gamma_l", DEFAULT_GAMMA_3PI_OVER_GAMMA_L)?;
    let f_sl = get("gamma_semileptonic_over_gamma_l", DEFAULT_GAMMA_SL_OVER_GAMMA_L)?;

    if !(tau_s > 0.0 && tau_s.is_finite()) {
        return Err(Error::InvalidValue {
            key: "tau_s_seconds".into(),
            reason: format!("must be positive, got {tau_s}"),
        });
    }
    let physics = KaonPhysics {
        tau_s,
        tau_l,
        delta_m: dm_tau / tau_s,
        epsilon: C64::from_polar(abs_eps, arg_eps.to_radians()),
        gamma_k1_to_2pi: f_2pi / tau_s,
        gamma_k2_to_3pi: f_3pi / tau_l,
        gamma_semileptonic: f_sl / tau_l,
    };
    physics.validate()?;
    Ok(physics)
}

/// Eigenvalue E = m - (i/2) Gamma of the effective Hamiltonian, stored as
/// the real mass (relative to m_S) and the half width Gamma/2. Units are
/// whatever the producer used (SI in [`DerivedConstants`], 1/tau_S in
/// [`Scaled`] and everywhere downstream).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexEnergy {
    pub mass: f64,
    pub half_width: f64,
}

impl ComplexEnergy {
    pub fn new(mass: f64, half_width: f64) -> Self {
        Self { mass, half_width }
    }

    /// E as a complex number, m - (i/2) Gamma.
    pub fn eigenvalue(&self) -> C64 {
        C64::new(self.mass, -self.half_width)
    }

    /// exp(-i E t) = exp(-Gamma t / 2) (cos mt - i sin mt).
    pub fn evolution(&self, t: f64) -> C64 {
        let damp = (-self.half_width * t).exp();
        let (sin, cos) = (self.mass * t).sin_cos();
        C64::new(damp * cos, -damp * sin)
    }
}

/// Quantities derived once from [`KaonPhysics`], SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedConstants {
    /// Gamma_S = 1/tau_S, 1/seconds.
    pub gamma_s: f64,
    /// Gamma_L = 1/tau_L, 1/seconds.
    pub gamma_l: f64,
    /// Gamma_S / Gamma_L = tau_L / tau_S.
    pub ratio_sl: f64,
    /// E_S = m_S - (i/2) Gamma_S with the m_S = 0 reference convention.
    pub e_s: ComplexEnergy,
    /// E_L = m_L - (i/2) Gamma_L; mass part is Delta m.
    pub e_l: ComplexEnergy,
}

/// Derives rates and complex energies from the constants. Deterministic
/// and idempotent; performs no validation of its own.
pub fn derive(physics: &KaonPhysics) -> DerivedConstants {
    let gamma_s = 1.0 / physics.tau_s;
    let gamma_l = 1.0 / physics.tau_l;
    DerivedConstants {
        gamma_s,
        gamma_l,
        ratio_sl: gamma_s / gamma_l,
        e_s: ComplexEnergy::new(0.0, gamma_s / 2.0),
        e_l: ComplexEnergy::new(physics.delta_m, gamma_l / 2.0),
    }
}

/// All constants in tau_S units: times in tau_S, rates in 1/tau_S.
/// By construction `gamma_s == 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaled {
    pub gamma_s: f64,
    pub gamma_l: f64,
    pub delta_m: f64,
    pub gamma_2pi: f64,
    pub gamma_3pi: f64,
    pub gamma_sl: f64,
    pub epsilon: C64,
}

impl Scaled {
    /// E_S in tau_S units: (0, Gamma_S/2 = 1/2).
    pub fn e_s(&self) -> ComplexEnergy {
        ComplexEnergy::new(0.0, self.gamma_s / 2.0)
    }

    /// E_L in tau_S units: (Delta m tau_S, Gamma_L tau_S / 2).
    pub fn e_l(&self) -> ComplexEnergy {
        ComplexEnergy::new(self.delta_m, self.gamma_l / 2.0)
    }
}
