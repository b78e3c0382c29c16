//! Breit-Wigner lineshapes and the spectral indistinguishability check.
//!
//! Fitting a Breit-Wigner to decay-product energies is consistent with two
//! readings of exponential decay: the survival probability as the squared
//! Fourier transform of the energy *density*, or a decay-time amplitude
//! whose energy transform has the Breit-Wigner as its squared modulus.
//! [`equivalence_report`] runs both pathways numerically and reports how
//! far either strays from exp(-Gamma t).
//!
//! The energy window stands in for an infinite band. Lorentzian tails are
//! heavy (mass ~ Gamma/(pi W) outside +-W), so the window must be much
//! wider than the +-50 Gamma that suffices for plotting; the default grid
//! uses +-1500 Gamma to keep truncation effects below 1e-3 in the
//! survival comparison.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lorentzian centroid and full width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BreitWignerParams {
    pub m: f64,
    pub gamma: f64,
}

impl BreitWignerParams {
    pub fn new(m: f64, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::Validation(format!("gamma must be positive, got {gamma}")));
        }
        Ok(Self { m, gamma })
    }
}

/// Unit-normalized Lorentzian (Gamma/2pi) / ((E-m)^2 + (Gamma/2)^2).
pub fn breit_wigner_density(e: f64, p: &BreitWignerParams) -> f64 {
    let half = p.gamma / 2.0;
    (p.gamma / (2.0 * std::f64::consts::PI)) / ((e - p.m).powi(2) + half * half)
}

/// Energy transform of the decay-time amplitude:
/// -i sqrt(Gamma/2pi) / (E - (m - i Gamma/2)).
/// Its squared modulus is exactly [`breit_wigner_density`].
pub fn twf_energy_amplitude(e: f64, p: &BreitWignerParams) -> C64 {
    let coeff = C64::new(0.0, -(p.gamma / (2.0 * std::f64::consts::PI)).sqrt());
    coeff / C64::new(e - p.m, p.gamma / 2.0)
}

/// Decay-time amplitude sqrt(Gamma) exp(-i (m - i Gamma/2) t) for t >= 0.
pub fn twf_time_amplitude(t: f64, p: &BreitWignerParams) -> C64 {
    let damp = (p.gamma.sqrt()) * (-p.gamma * t / 2.0).exp();
    let (sin, cos) = (p.m * t).sin_cos();
    C64::new(damp * cos, -damp * sin)
}

/// A tabulated energy density on a strictly increasing grid, normalized to
/// unit trapezoidal mass over the window.
#[derive(Debug, Clone)]
pub struct EnergyAmplitude {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
}

fn trapezoid_mass(grid: &[f64], values: &[f64]) -> f64 {
    grid.windows(2)
        .zip(values.windows(2))
        .map(|(e, v)| 0.5 * (e[1] - e[0]) * (v[0] + v[1]))
        .sum()
}

impl EnergyAmplitude {
    pub fn from_density(grid: Vec<f64>, density: Vec<f64>) -> Result<Self> {
        if grid.len() < 2 {
            return Err(Error::Grid(format!(
                "energy grid needs at least 2 points, got {}",
                grid.len()
            )));
        }
        if grid.len() != density.len() {
            return Err(Error::Grid("grid and density lengths differ".into()));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Grid("energy grid must be strictly increasing".into()));
        }
        if density.iter().any(|&d| d < 0.0 || !d.is_finite()) {
            return Err(Error::Grid("density values must be finite and non-negative".into()));
        }
        let mass = trapezoid_mass(&grid, &density);
        if (mass - 1.0).abs() > 1e-6 {
            return Err(Error::Grid(format!(
                "density must integrate to 1 over the window (got {mass}); renormalize first"
            )));
        }
        Ok(Self { grid, density })
    }

    /// Breit-Wigner sampled on `n` points over [m - W, m + W],
    /// W = `half_width_gammas * gamma`, renormalized over the window.
    pub fn sampled_breit_wigner(p: &BreitWignerParams, half_width_gammas: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Grid(format!("energy grid needs at least 2 points, got {n}")));
        }
        if !(half_width_gammas > 0.0) {
            return Err(Error::Grid("window half-width must be positive".into()));
        }
        let w = half_width_gammas * p.gamma;
        let step = 2.0 * w / (n - 1) as f64;
        let grid: Vec<f64> = (0..n).map(|i| p.m - w + i as f64 * step).collect();
        let mut density: Vec<f64> = grid.iter().map(|&e| breit_wigner_density(e, p)).collect();
        let mass = trapezoid_mass(&grid, &density);
        for d in &mut density {
            *d /= mass;
        }
        Self::from_density(grid, density)
    }

    pub fn max_spacing(&self) -> f64 {
        self.grid.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }
}

/// Survival probability |integral of e^{-iEt} rho(E) dE|^2 by trapezoidal
/// quadrature. Errors if the grid cannot resolve the e^{-iEt} oscillation
/// at this `t` (fewer than 4 samples per period).
pub fn survival_from_energy_density(psi: &EnergyAmplitude, t: f64) -> Result<f64> {
    if t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    let max_h = psi.max_spacing();
    if max_h * t > std::f64::consts::FRAC_PI_2 {
        return Err(Error::Grid(format!(
            "energy grid under-resolved for t = {t}: spacing {max_h} exceeds the Nyquist bound {}",
            std::f64::consts::FRAC_PI_2 / t
        )));
    }
    let mut acc = C64::new(0.0, 0.0);
    let phase = |e: f64| {
        let (sin, cos) = (e * t).sin_cos();
        C64::new(cos, -sin)
    };
    let mut prev = phase(psi.grid[0]) * psi.density[0];
    for i in 1..psi.grid.len() {
        let cur = phase(psi.grid[i]) * psi.density[i];
        acc += (psi.grid[i] - psi.grid[i - 1]) * 0.5 * (prev + cur);
        prev = cur;
    }
    Ok(acc.norm_sqr())
}

/// Survival probability through the decay-time amplitude:
/// integral of |Psi(t')|^2 over [t, infinity), by Simpson quadrature over
/// forty lifetimes past `t` (the remainder is below 1e-17).
pub fn twf_survival(p: &BreitWignerParams, t: f64) -> Result<f64> {
    if t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    let span = 40.0 / p.gamma;
    let n = 4000;
    let h = span / n as f64;
    let f = |tp: f64| twf_time_amplitude(tp, p).norm_sqr();
    let mut acc = f(t) + f(t + span);
    for k in 1..n {
        acc += f(t + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    Ok(acc * h / 3.0)
}

/// Grid specification for [`equivalence_report`], all in units of Gamma.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GridSpec {
    pub half_width_over_gamma: f64,
    pub energy_points: usize,
    pub t_max_over_gamma: f64,
    pub time_points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            half_width_over_gamma: 1500.0,
            energy_points: 30_001,
            t_max_over_gamma: 5.0,
            time_points: 251,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EquivalenceReport {
    /// max over the energy grid of |amplitude-route density - Breit-Wigner|,
    /// in units of 1/Gamma (dimensionless, scale covariant).
    pub max_density_deviation: f64,
    /// max over the time grid of the deviation of either survival pathway
    /// from exp(-Gamma t).
    pub max_survival_deviation: f64,
}

/// Compares (a) the squared energy amplitude against the Breit-Wigner
/// density pointwise and (b) both survival pathways against exp(-Gamma t).
pub fn equivalence_report(p: &BreitWignerParams, grid: &GridSpec) -> Result<EquivalenceReport> {
    let psi = EnergyAmplitude::sampled_breit_wigner(p, grid.half_width_over_gamma, grid.energy_points)?;

    let mut max_density_deviation: f64 = 0.0;
    for &e in &psi.grid {
        let lhs = twf_energy_amplitude(e, p).norm_sqr();
        let rhs = breit_wigner_density(e, p);
        max_density_deviation = max_density_deviation.max((lhs - rhs).abs() * p.gamma);
    }

    if grid.time_points < 2 || !(grid.t_max_over_gamma > 0.0) {
        return Err(Error::Grid("time grid needs at least 2 points and a positive span".into()));
    }
    let mut max_survival_deviation: f64 = 0.0;
    for j in 0..grid.time_points {
        let t = grid.t_max_over_gamma / p.gamma * j as f64 / (grid.time_points - 1) as f64;
        let reference = (-p.gamma * t).exp();
        let standard = survival_from_energy_density(&psi, t)?;
        let tilded = twf_survival(p, t)?;
        max_survival_deviation = max_survival_deviation
            .max((standard - reference).abs())
            .max((tilded - reference).abs());
    }
    Ok(EquivalenceReport { max_density_deviation, max_survival_deviation })
}

impl EnergyAmplitude {
    /// CSV rows `energy,value`, 12 significant digits.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "energy,value")?;
        for (e, d) in self.grid.iter().zip(&self.density) {
            writeln!(w, "{e:.11e},{d:.11e}")?;
        }
        Ok(())
    }
}

/// CSV rows `t,value` for a sampled survival curve.
pub fn write_survival_csv<W: std::io::Write>(
    times: &[f64],
    values: &[f64],
    mut w: W,
) -> std::io::Result<()> {
    writeln!(w, "t,value")?;
    for (t, v) in times.iter().zip(values) {
        writeln!(w, "{t:.11e},{v:.11e}")?;
    }
    Ok(())
}
