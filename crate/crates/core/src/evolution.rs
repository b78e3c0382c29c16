//! Two-eigenmode intensity laws.
//!
//! Every production rate in both models has the shape
//! `prefactor * |c_s exp(-i E_S t) + c_l exp(-i E_L t)|^2`, so it can be
//! evaluated pointwise and integrated in closed form. The closed-form
//! integrals drive the event generator's window normalization and the
//! per-bin model predictions of the fit.

use num_complex::Complex64 as C64;

use crate::params::ComplexEnergy;

#[derive(Debug, Clone, Copy)]
pub struct RateLaw {
    pub prefactor: f64,
    pub coeff_s: C64,
    pub coeff_l: C64,
    pub e_s: ComplexEnergy,
    pub e_l: ComplexEnergy,
}

impl RateLaw {
    pub fn new(prefactor: f64, coeff_s: C64, coeff_l: C64, e_s: ComplexEnergy, e_l: ComplexEnergy) -> Self {
        Self { prefactor, coeff_s, coeff_l, e_s, e_l }
    }

    /// Rate at time `t >= 0`.
    pub fn at(&self, t: f64) -> f64 {
        let amp = self.coeff_s * self.e_s.evolution(t) + self.coeff_l * self.e_l.evolution(t);
        self.prefactor * amp.norm_sqr()
    }

    /// Exact integral of the rate over `[a, b]`; `b` may be `f64::INFINITY`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        debug_assert!(a >= 0.0 && b >= a);
        let gs = 2.0 * self.e_s.half_width;
        let gl = 2.0 * self.e_l.half_width;
        // |c_s|^2 e^{-Gs t} + |c_l|^2 e^{-Gl t} + 2 Re[c_s conj(c_l) e^{-i Omega t}]
        // with Omega = E_S - conj(E_L) = (m_S - m_L) - i (Gs + Gl)/2.
        let direct = self.coeff_s.norm_sqr() * exp_integral(gs, a, b)
            + self.coeff_l.norm_sqr() * exp_integral(gl, a, b);
        let omega = C64::new(self.e_s.mass - self.e_l.mass, -(self.e_s.half_width + self.e_l.half_width));
        let cross = 2.0 * (self.coeff_s * self.coeff_l.conj() * osc_integral(omega, a, b)).re;
        self.prefactor * (direct + cross)
    }

    /// Integral over `[0, infinity)`.
    pub fn total(&self) -> f64 {
        self.integral(0.0, f64::INFINITY)
    }

    /// Same law with the prefactor replaced (used to strip channel widths
    /// out of asymmetry ratios so that channel scaling cancels exactly).
    pub fn with_prefactor(&self, prefactor: f64) -> Self {
        Self { prefactor, ..*self }
    }
}

/// Integral of exp(-g t) over [a, b], b possibly infinite.
fn exp_integral(g: f64, a: f64, b: f64) -> f64 {
    if g == 0.0 {
        return b - a;
    }
    let upper = if b.is_finite() { (-g * b).exp() } else { 0.0 };
    ((-g * a).exp() - upper) / g
}

/// Integral of exp(-i omega t) over [a, b] for Im(omega) < 0, b possibly
/// infinite: (e^{-i omega a} - e^{-i omega b}) / (i omega).
fn osc_integral(omega: C64, a: f64, b: f64) -> C64 {
    debug_assert!(omega.im < 0.0);
    let eval = |t: f64| (-C64::i() * omega * t).exp();
    let upper = if b.is_finite() { eval(b) } else { C64::new(0.0, 0.0) };
    (eval(a) - upper) / (C64::i() * omega)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn law() -> RateLaw {
        RateLaw::new(
            0.37,
            C64::new(1.0, 0.0),
            C64::new(2.03e-3, 1.4e-3),
            ComplexEnergy::new(0.0, 0.5),
            ComplexEnergy::new(0.472, 8.6e-4),
        )
    }

    /// Composite Simpson quadrature as the independent route.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let n = if n.is_multiple_of(2) { n } else { n + 1 };
        let h = (b - a) / n as f64;
        let mut acc = f(a) + f(b);
        for k in 1..n {
            acc += f(a + k as f64 * h) * if k.is_multiple_of(2) { 2.0 } else { 4.0 };
        }
        acc * h / 3.0
    }

    #[test]
    fn closed_form_integral_matches_quadrature() {
        let law = law();
        let quad = simpson(|t| law.at(t), 0.3, 7.0, 20_000);
        assert_relative_eq!(law.integral(0.3, 7.0), quad, max_relative = 1e-10);
    }

    #[test]
    fn infinite_tail_matches_truncated_quadrature() {
        let law = law();
        // Everything has decayed by t = 80 at these widths except the
        // slow mode; extend far enough that the remainder is negligible.
        let quad = simpson(|t| law.at(t), 2.0, 40_000.0, 4_000_000);
        assert_relative_eq!(law.integral(2.0, f64::INFINITY), quad, max_relative = 1e-6);
    }

    #[test]
    fn pure_exponential_special_case() {
        let law = RateLaw::new(
            1.0,
            C64::new(1.0, 0.0),
            C64::new(0.0, 0.0),
            ComplexEnergy::new(0.0, 0.5),
            ComplexEnergy::new(0.472, 8.6e-4),
        );
        assert_relative_eq!(law.at(2.0), (-2.0f64).exp(), max_relative = 1e-14);
        assert_relative_eq!(law.total(), 1.0, max_relative = 1e-14);
    }
}
