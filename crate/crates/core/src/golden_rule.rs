//! Multi-channel decay into discretized continua.
//!
//! An ingoing mode couples to a set of outgoing channels, each tagged by a
//! decay-product species and an energy. In the interaction picture the
//! amplitudes obey
//!
//! ```text
//! c_in'(t)  = -i sum_k conj(G_k) c_k(t) exp(-i (w_k - w_in) t)
//! c_k'(t)   = -i G_k c_in(t) exp(+i (w_k - w_in) t)
//! ```
//!
//! integrated here with a fixed-step classical fourth-order scheme. The
//! exact system is unitary, so the total norm is monitored at every step
//! and drift beyond 1e-6 aborts the run.
//!
//! Flat quasi-continua are built as uniform frequency combs of spacing
//! d_omega and full bandwidth W with per-mode |G|^2 = Gamma d_omega / 2pi,
//! so that the golden rule gives back the target Gamma. Defaults are
//! d_omega = Gamma/50 and W = 120 Gamma: the recurrence time 2 pi/d_omega
//! must exceed the simulated horizon, and the finite band shifts the
//! resonance pole by a relative ~2 Gamma/(pi W), which W = 120 Gamma keeps
//! near half a percent.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kv::KvDoc;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// One outgoing channel: decay-product species, mode energy, coupling.
#[derive(Debug, Clone, Copy)]
pub struct ModeChannel {
    pub species: usize,
    pub omega: f64,
    pub coupling: C64,
}

/// Ingoing mode plus its outgoing channels.
#[derive(Debug, Clone)]
pub struct ModeSystem {
    pub omega_in: f64,
    pub channels: Vec<ModeChannel>,
    pub n_species: usize,
}

impl ModeSystem {
    pub fn new(omega_in: f64, channels: Vec<ModeChannel>) -> Result<Self> {
        if channels.iter().any(|c| !c.coupling.is_finite() || !c.omega.is_finite()) {
            return Err(Error::Validation("channel energies and couplings must be finite".into()));
        }
        let n_species = channels.iter().map(|c| c.species + 1).max().unwrap_or(0);
        Ok(Self { omega_in, channels, n_species })
    }
}

/// Tabulated density of states and |G(omega)|^2 for one species.
#[derive(Debug, Clone)]
pub struct ContinuumTable {
    pub species: usize,
    pub omega: Vec<f64>,
    pub dos: Vec<f64>,
    pub g_sq: Vec<f64>,
}

impl ContinuumTable {
    fn interpolate(&self, omega: f64) -> Result<(f64, f64)> {
        let n = self.omega.len();
        if n < 2 || omega < self.omega[0] || omega > self.omega[n - 1] {
            return Err(Error::Config(format!(
                "continuum for species {} is not tabulated at omega = {omega}",
                self.species
            )));
        }
        let i = match self.omega.partition_point(|&w| w <= omega) {
            0 => 0,
            p => (p - 1).min(n - 2),
        };
        let f = (omega - self.omega[i]) / (self.omega[i + 1] - self.omega[i]);
        Ok((
            self.dos[i] + f * (self.dos[i + 1] - self.dos[i]),
            self.g_sq[i] + f * (self.g_sq[i + 1] - self.g_sq[i]),
        ))
    }
}

/// Per-species golden-rule widths and their sum.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GammaBudget {
    pub per_species: Vec<f64>,
    pub total: f64,
}

/// Gamma_i = 2 pi rho_i(omega_in) |G_i(omega_in)|^2 and Gamma = sum_i Gamma_i.
pub fn golden_rule_gamma(tables: &[ContinuumTable], omega_in: f64) -> Result<GammaBudget> {
    let n_species = tables.iter().map(|t| t.species + 1).max().unwrap_or(0);
    let mut per_species = vec![0.0; n_species];
    for table in tables {
        let (dos, g_sq) = table.interpolate(omega_in)?;
        per_species[table.species] += TWO_PI * dos * g_sq;
    }
    let total = per_species.iter().sum();
    Ok(GammaBudget { per_species, total })
}

/// Flat-comb discretization parameters for one species.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ContinuumSpec {
    /// Target golden-rule width.
    pub gamma: f64,
    /// Comb spacing d_omega as a fraction of gamma.
    pub spacing_over_gamma: f64,
    /// Full bandwidth W as a multiple of gamma.
    pub bandwidth_over_gamma: f64,
}

pub const DEFAULT_SPACING_OVER_GAMMA: f64 = 1.0 / 50.0;
pub const DEFAULT_BANDWIDTH_OVER_GAMMA: f64 = 120.0;

impl ContinuumSpec {
    pub fn flat(gamma: f64) -> Self {
        Self {
            gamma,
            spacing_over_gamma: DEFAULT_SPACING_OVER_GAMMA,
            bandwidth_over_gamma: DEFAULT_BANDWIDTH_OVER_GAMMA,
        }
    }
}

/// Builds symmetric uniform combs centred on `omega_in`, one per spec,
/// together with the matching continuum tables.
pub fn flat_comb(specs: &[ContinuumSpec], omega_in: f64) -> Result<(ModeSystem, Vec<ContinuumTable>)> {
    let mut channels = Vec::new();
    let mut tables = Vec::new();
    for (species, spec) in specs.iter().enumerate() {
        if !(spec.gamma > 0.0 && spec.spacing_over_gamma > 0.0 && spec.bandwidth_over_gamma > 0.0) {
            return Err(Error::Config(format!(
                "continuum spec for species {species} must have positive gamma, spacing and bandwidth"
            )));
        }
        let d_omega = spec.spacing_over_gamma * spec.gamma;
        let width = spec.bandwidth_over_gamma * spec.gamma;
        let mut half_modes = (width / (2.0 * d_omega)).round() as i64;
        half_modes = half_modes.max(1);
        let g = (spec.gamma * d_omega / TWO_PI).sqrt();
        for j in -half_modes..=half_modes {
            channels.push(ModeChannel {
                species,
                omega: omega_in + j as f64 * d_omega,
                coupling: C64::new(g, 0.0),
            });
        }
        let lo = omega_in - half_modes as f64 * d_omega;
        let hi = omega_in + half_modes as f64 * d_omega;
        tables.push(ContinuumTable {
            species,
            omega: vec![lo, omega_in, hi],
            dos: vec![1.0 / d_omega; 3],
            g_sq: vec![g * g; 3],
        });
    }
    Ok((ModeSystem::new(omega_in, channels)?, tables))
}

/// Integrated amplitude history: the ingoing mode at every step, the
/// outgoing norm per species at every step, and the full channel vector at
/// the final time.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub c_in: Vec<C64>,
    pub species_norm_out: Vec<Vec<f64>>,
    pub final_channels: Vec<C64>,
}

impl Trajectory {
    /// Total outgoing norm at a recorded step.
    pub fn norm_out(&self, step: usize) -> f64 {
        self.species_norm_out.iter().map(|s| s[step]).sum()
    }

    /// CSV rows `t,re_c_in,im_c_in,norm_out_species_1,...`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "t,re_c_in,im_c_in")?;
        for s in 1..=self.species_norm_out.len() {
            write!(w, ",norm_out_species_{s}")?;
        }
        writeln!(w)?;
        for (i, &t) in self.times.iter().enumerate() {
            write!(w, "{t:.11e},{:.11e},{:.11e}", self.c_in[i].re, self.c_in[i].im)?;
            for s in &self.species_norm_out {
                write!(w, ",{:.11e}", s[i])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Integrates from the standard initial condition c_in(0) = 1, c_k(0) = 0.
pub fn integrate(sys: &ModeSystem, t_max: f64, n_steps: usize) -> Result<Trajectory> {
    integrate_from(sys, C64::new(1.0, 0.0), None, t_max, n_steps)
}

/// Integrates from an arbitrary initial state. `channels0 = None` means
/// all outgoing amplitudes start at zero.
pub fn integrate_from(
    sys: &ModeSystem,
    c_in0: C64,
    channels0: Option<&[C64]>,
    t_max: f64,
    n_steps: usize,
) -> Result<Trajectory> {
    if !(t_max > 0.0) || n_steps < 10 {
        return Err(Error::Config(format!(
            "integration requires t_max > 0 and n_steps >= 10, got t_max = {t_max}, n_steps = {n_steps}"
        )));
    }
    let n_ch = sys.channels.len();
    if let Some(c0) = channels0 {
        if c0.len() != n_ch {
            return Err(Error::Config(format!(
                "initial channel vector has {} entries for {} channels",
                c0.len(),
                n_ch
            )));
        }
    }
    let h = t_max / n_steps as f64;
    let detuning: Vec<f64> = sys.channels.iter().map(|c| c.omega - sys.omega_in).collect();
    let coupling: Vec<C64> = sys.channels.iter().map(|c| c.coupling).collect();
    let coupling_conj: Vec<C64> = coupling.iter().map(|g| g.conj()).collect();
    // Phase factors exp(-i delta t) advanced by half-step rotors.
    let rot_half: Vec<C64> = detuning
        .iter()
        .map(|&d| {
            let (sin, cos) = (d * h / 2.0).sin_cos();
            C64::new(cos, -sin)
        })
        .collect();
    let mut phase: Vec<C64> = vec![C64::new(1.0, 0.0); n_ch];

    let mut c_in = c_in0;
    let mut c: Vec<C64> = channels0.map_or_else(|| vec![C64::new(0.0, 0.0); n_ch], <[C64]>::to_vec);
    let norm0 = c_in.norm_sqr() + c.iter().map(C64::norm_sqr).sum::<f64>();

    let n_species = sys.n_species.max(1);
    let mut traj = Trajectory {
        times: Vec::with_capacity(n_steps + 1),
        c_in: Vec::with_capacity(n_steps + 1),
        species_norm_out: vec![Vec::with_capacity(n_steps + 1); n_species],
        final_channels: Vec::new(),
    };
    let record = |traj: &mut Trajectory, t: f64, c_in: C64, c: &[C64]| {
        traj.times.push(t);
        traj.c_in.push(c_in);
        let mut norms = vec![0.0; n_species];
        for (ch, amp) in sys.channels.iter().zip(c) {
            norms[ch.species] += amp.norm_sqr();
        }
        for (s, &n) in norms.iter().enumerate() {
            traj.species_norm_out[s].push(n);
        }
    };
    record(&mut traj, 0.0, c_in, &c);

    // Channel derivatives at a stage; phases entered as a slice so all four
    // stages reuse the same buffers.
    let minus_i = C64::new(0.0, -1.0);
    let mut k1 = vec![C64::new(0.0, 0.0); n_ch];
    let mut k2 = k1.clone();
    let mut k3 = k1.clone();
    let mut k4 = k1.clone();
    let mut scratch = k1.clone();
    let mut phase_mid = vec![C64::new(1.0, 0.0); n_ch];
    let mut phase_end = vec![C64::new(1.0, 0.0); n_ch];

    fn rhs(
        c_in: C64,
        c: &[C64],
        phase: &[C64],
        coupling: &[C64],
        coupling_conj: &[C64],
        minus_i: C64,
        out: &mut [C64],
    ) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..c.len() {
            acc += coupling_conj[i] * c[i] * phase[i];
            out[i] = minus_i * coupling[i] * c_in * phase[i].conj();
        }
        minus_i * acc
    }

    for step in 0..n_steps {
        for i in 0..n_ch {
            phase_mid[i] = phase[i] * rot_half[i];
            phase_end[i] = phase_mid[i] * rot_half[i];
        }

        let d_in1 = rhs(c_in, &c, &phase, &coupling, &coupling_conj, minus_i, &mut k1);

        for i in 0..n_ch {
            scratch[i] = c[i] + k1[i] * (h / 2.0);
        }
        let d_in2 = rhs(c_in + d_in1 * (h / 2.0), &scratch, &phase_mid, &coupling, &coupling_conj, minus_i, &mut k2);

        for i in 0..n_ch {
            scratch[i] = c[i] + k2[i] * (h / 2.0);
        }
        let d_in3 = rhs(c_in + d_in2 * (h / 2.0), &scratch, &phase_mid, &coupling, &coupling_conj, minus_i, &mut k3);

        for i in 0..n_ch {
            scratch[i] = c[i] + k3[i] * h;
        }
        let d_in4 = rhs(c_in + d_in3 * h, &scratch, &phase_end, &coupling, &coupling_conj, minus_i, &mut k4);

        c_in += (d_in1 + (d_in2 + d_in3) * 2.0 + d_in4) * (h / 6.0);
        let mut norm = c_in.norm_sqr();
        for i in 0..n_ch {
            c[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0);
            norm += c[i].norm_sqr();
            phase[i] = phase_end[i];
        }

        if (norm - norm0).abs() > 1e-6 {
            return Err(Error::Integrator(format!(
                "norm drifted by {:e} at step {} (t = {}); reduce the step size",
                norm - norm0,
                step + 1,
                (step + 1) as f64 * h
            )));
        }
        // Keep the incremental rotors on the unit circle.
        if (step + 1).is_multiple_of(512) {
            for p in phase.iter_mut() {
                *p /= p.norm();
            }
        }
        record(&mut traj, (step + 1) as f64 * h, c_in, &c);
    }
    traj.final_channels = c;
    Ok(traj)
}

/// sinc(x) = sin(x)/x with the removable singularity handled.
///
/// ```
/// assert_eq!(kaonlab::golden_rule::sinc(0.0), 1.0);
/// assert!(kaonlab::golden_rule::sinc(std::f64::consts::PI).abs() < 1e-15);
/// ```
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-6 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// First-order channel occupation |G|^2 t^2 sinc^2(delta_omega t / 2).
pub fn perturbative_occupation(coupling_mag: f64, detuning: f64, t: f64) -> f64 {
    let s = coupling_mag * t * sinc(detuning * t / 2.0);
    s * s
}

/// t * integral of sinc^2(d t/2) over d in [-w, w]; converges to 2 pi as
/// w t grows. Errors when the estimated truncated tail exceeds 1%.
pub fn sinc_delta_check_windowed(t: f64, window_half_width: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Config(format!("sinc check requires t > 0, got {t}")));
    }
    let w = window_half_width;
    if !(w > 0.0) {
        return Err(Error::Config("window half-width must be positive".into()));
    }
    // Tail beyond the window: 2 * integral_w^inf sinc^2 ~ 4/(t^2 w), times t.
    let tail = 4.0 / (t * w);
    if tail > 0.01 * TWO_PI {
        return Err(Error::WindowTooSmall(format!(
            "window [-{w}, {w}] leaves an estimated tail of {tail:.3e} (> 1% of 2 pi) at t = {t}"
        )));
    }
    // Simpson, resolving the sinc oscillation (period 2 pi / t in d).
    let mut n = ((w * t * 12.7).ceil() as usize).max(2000);
    if n % 2 == 1 {
        n += 1;
    }
    let h = 2.0 * w / n as f64;
    let f = |d: f64| {
        let s = sinc(d * t / 2.0);
        s * s
    };
    let mut acc = f(-w) + f(w);
    for k in 1..n {
        acc += f(-w + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    Ok(t * acc * h / 3.0)
}

/// [`sinc_delta_check_windowed`] with the default window [-200, 200].
pub fn sinc_delta_check(t: f64) -> Result<f64> {
    sinc_delta_check_windowed(t, 200.0)
}

/// The single outgoing superposition actually coupled to the ingoing mode
/// in the energy sector `omega`.
#[derive(Debug, Clone)]
pub struct EffectiveMode {
    pub channel_indices: Vec<usize>,
    /// Unit-norm weights G_k / g_eff on the listed channels.
    pub weights: Vec<C64>,
    pub g_eff: f64,
}

pub fn effective_mode(sys: &ModeSystem, omega: f64) -> Result<EffectiveMode> {
    let tol = 1e-9 * omega.abs().max(1.0);
    let channel_indices: Vec<usize> = sys
        .channels
        .iter()
        .enumerate()
        .filter(|(_, c)| (c.omega - omega).abs() <= tol)
        .map(|(i, _)| i)
        .collect();
    if channel_indices.is_empty() {
        return Err(Error::EmptySector { omega });
    }
    let g_eff = channel_indices
        .iter()
        .map(|&i| sys.channels[i].coupling.norm_sqr())
        .sum::<f64>()
        .sqrt();
    let weights = channel_indices.iter().map(|&i| sys.channels[i].coupling / g_eff).collect();
    Ok(EffectiveMode { channel_indices, weights, g_eff })
}

/// Decay constant of |c_in(t)|^2 from a least-squares line through
/// log |c_in|^2 over a time window (skipping the quadratic onset).
pub fn fit_decay_constant(traj: &Trajectory, window: (f64, f64)) -> Result<f64> {
    let (lo, hi) = window;
    let mut n = 0.0;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for (&t, c) in traj.times.iter().zip(&traj.c_in) {
        if t < lo || t > hi {
            continue;
        }
        let p = c.norm_sqr();
        if p <= 0.0 {
            continue;
        }
        let y = p.ln();
        n += 1.0;
        sx += t;
        sy += y;
        sxx += t * t;
        sxy += t * y;
    }
    if n < 2.0 {
        return Err(Error::Grid(format!("fit window [{lo}, {hi}] holds fewer than 2 samples")));
    }
    let denom = n * sxx - sx * sx;
    if denom.abs() < f64::EPSILON {
        return Err(Error::Grid("degenerate fit window".into()));
    }
    Ok(-(n * sxy - sx * sy) / denom)
}

/// Golden-rule scenario: species targets plus discretization, parsed from
/// a key-value document (`species`, `gamma_1` .. `gamma_N`,
/// `spacing_over_gamma`, `bandwidth_over_gamma`, `t_max_gamma`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub specs: Vec<ContinuumSpec>,
    pub t_max_gamma: f64,
    pub omega_in: f64,
}

impl Scenario {
    pub fn from_kv(doc: &KvDoc) -> Result<Self> {
        let n = doc.get_u64("species")?.ok_or_else(|| Error::MissingKey("species".into()))? as usize;
        if n == 0 {
            return Err(Error::InvalidValue { key: "species".into(), reason: "must be >= 1".into() });
        }
        let spacing = doc.get_f64("spacing_over_gamma")?.unwrap_or(DEFAULT_SPACING_OVER_GAMMA);
        let bandwidth = doc.get_f64("bandwidth_over_gamma")?.unwrap_or(DEFAULT_BANDWIDTH_OVER_GAMMA);
        let mut specs = Vec::with_capacity(n);
        for i in 1..=n {
            let gamma = doc.require_f64(&format!("gamma_{i}"))?;
            specs.push(ContinuumSpec { gamma, spacing_over_gamma: spacing, bandwidth_over_gamma: bandwidth });
        }
        let t_max_gamma = doc.get_f64("t_max_gamma")?.unwrap_or(3.6);
        Ok(Self { specs, t_max_gamma, omega_in: 0.0 })
    }

    pub fn gamma_total(&self) -> f64 {
        self.specs.iter().map(|s| s.gamma).sum()
    }

    pub fn t_max(&self) -> f64 {
        self.t_max_gamma / self.gamma_total()
    }

    /// Step rule: h <= (1/40) min(2 pi / W_max, 1 / Gamma_total).
    pub fn recommended_steps(&self) -> usize {
        let w_max = self
            .specs
            .iter()
            .map(|s| s.bandwidth_over_gamma * s.gamma)
            .fold(0.0, f64::max);
        let h = (TWO_PI / w_max).min(1.0 / self.gamma_total()) / 40.0;
        ((self.t_max() / h).ceil() as usize).max(10)
    }

    pub fn build(&self) -> Result<(ModeSystem, Vec<ContinuumTable>)> {
        flat_comb(&self.specs, self.omega_in)
    }
}
