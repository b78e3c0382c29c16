//! Monte Carlo decay events (time, channel) under either model.
//!
//! Events are drawn from the window-normalized joint density over
//! (time, channel) by inverse-CDF sampling of the total rate on a dense
//! 10^4-knot grid with linear interpolation, then a categorical channel
//! draw at the sampled time. The knot layout is non-uniform: most knots
//! cover the first 60 tau_S where the short-lived component lives, the
//! rest stretch to `t_max`, which must be large enough that the truncated
//! tail mass stays below 1e-3 (several thousand tau_S with the default
//! channel mix, since the slow channels decay on the K_L lifetime).
//!
//! Sampling is split into fixed-size streams with sub-seeds derived from
//! the user seed, so results are reproducible and independent of any
//! parallel partitioning.

use std::io::{BufRead, Write};

use rand::{RngExt, SeedableRng};
use rand_pcg::Pcg64;
use serde::Serialize;

use crate::asymmetry::Model;
use crate::error::{Error, Result};
use crate::evolution::RateLaw;
use crate::params::KaonPhysics;
use crate::twf::{self, TwfParams};
use crate::wwa::{self, Channel, Flavor};

/// Knots in the inverse-CDF table.
const GRID_POINTS: usize = 10_000;
/// Knots devoted to the dense head of the grid.
const HEAD_POINTS: usize = 6_000;
/// Events per sub-seeded stream.
const STREAM_LEN: u64 = 1 << 16;
/// Largest admissible truncated tail mass.
const MAX_TAIL_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayEvent {
    /// Decay time in units of tau_S.
    pub time: f64,
    pub channel: Channel,
    pub initial: Flavor,
    pub model: Model,
}

/// The four channel rate laws for a model and initial flavor. Under the
/// temporal-wave-function model the semileptonic channels use the
/// CP-respecting limit law (the only regime where the model defines them);
/// the pion channels use the tilded laws of the requested variant.
pub fn channel_laws(model: Model, initial: Flavor, physics: &KaonPhysics) -> Result<[RateLaw; 4]> {
    let law = |channel: Channel| -> Result<RateLaw> {
        match model {
            Model::Wwa => Ok(wwa::channel_law(initial, channel, physics)),
            Model::Twf(variant) => match channel {
                Channel::TwoPion | Channel::ThreePion => {
                    twf::channel_law(initial, channel, physics, &twf::constrain(physics, variant))
                }
                Channel::SemileptonicPlus | Channel::SemileptonicMinus => {
                    twf::channel_law(initial, channel, physics, &TwfParams::zero())
                }
            },
        }
    };
    Ok([
        law(Channel::TwoPion)?,
        law(Channel::ThreePion)?,
        law(Channel::SemileptonicPlus)?,
        law(Channel::SemileptonicMinus)?,
    ])
}

/// Dense-head grid: HEAD_POINTS knots on [0, knee), the rest on
/// [knee, t_max], 10^4 knots in total.
fn sampling_grid(t_max: f64) -> Vec<f64> {
    let knee = (t_max / 2.0).min(60.0);
    let tail_points = GRID_POINTS - HEAD_POINTS;
    let mut grid = Vec::with_capacity(GRID_POINTS);
    for i in 0..HEAD_POINTS {
        grid.push(knee * i as f64 / HEAD_POINTS as f64);
    }
    for j in 0..tail_points {
        grid.push(knee + (t_max - knee) * j as f64 / (tail_points - 1) as f64);
    }
    grid
}

fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn stream_seed(seed: u64, stream: u64) -> u64 {
    splitmix64(seed.wrapping_add((stream + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}

/// Draws `n` decay events, deterministically in `seed`.
pub fn sample(
    model: Model,
    initial: Flavor,
    n: u64,
    seed: u64,
    t_max: f64,
    physics: &KaonPhysics,
) -> Result<Vec<DecayEvent>> {
    if n < 1 {
        return Err(Error::Config("event count must be >= 1".into()));
    }
    if !(t_max >= 40.0) {
        return Err(Error::Config(format!(
            "t_max = {t_max} tau_S is below the minimum window of 40 tau_S"
        )));
    }
    let laws = channel_laws(model, initial, physics)?;

    let total_mass: f64 = laws.iter().map(RateLaw::total).sum();
    let tail_mass: f64 = laws.iter().map(|l| l.integral(t_max, f64::INFINITY)).sum();
    if !(total_mass > 0.0) {
        return Err(Error::Config("total decay rate vanishes; nothing to sample".into()));
    }
    let tail_fraction = tail_mass / total_mass;
    if tail_fraction > MAX_TAIL_FRACTION {
        return Err(Error::Config(format!(
            "t_max = {t_max} tau_S truncates {tail_fraction:.3e} of the decay mass (> {MAX_TAIL_FRACTION:e}); \
             increase t_max"
        )));
    }

    let grid = sampling_grid(t_max);
    let total_at = |t: f64| laws.iter().map(|l| l.at(t)).sum::<f64>();
    // Cumulative trapezoid of the total rate over the knots.
    let mut cdf = Vec::with_capacity(GRID_POINTS);
    cdf.push(0.0);
    let mut prev_rate = total_at(grid[0]);
    for i in 1..grid.len() {
        let rate = total_at(grid[i]);
        let last = *cdf.last().expect("cdf is non-empty");
        cdf.push(last + 0.5 * (grid[i] - grid[i - 1]) * (prev_rate + rate));
        prev_rate = rate;
    }
    let norm = *cdf.last().expect("cdf is non-empty");

    let mut events = Vec::with_capacity(n as usize);
    let n_streams = n.div_ceil(STREAM_LEN);
    for stream in 0..n_streams {
        let count = STREAM_LEN.min(n - stream * STREAM_LEN);
        let mut rng = Pcg64::seed_from_u64(stream_seed(seed, stream));
        for _ in 0..count {
            let target = rng.random::<f64>() * norm;
            let idx = match cdf.partition_point(|&f| f <= target) {
                0 => 0,
                p => (p - 1).min(GRID_POINTS - 2),
            };
            let span = cdf[idx + 1] - cdf[idx];
            let frac = if span > 0.0 { (target - cdf[idx]) / span } else { 0.0 };
            let time = grid[idx] + frac * (grid[idx + 1] - grid[idx]);

            let weights = [laws[0].at(time), laws[1].at(time), laws[2].at(time), laws[3].at(time)];
            let total: f64 = weights.iter().sum();
            let mut pick = rng.random::<f64>() * total;
            let mut channel = Channel::ALL[3];
            for (w, ch) in weights.iter().zip(Channel::ALL) {
                if pick < *w {
                    channel = ch;
                    break;
                }
                pick -= w;
            }
            events.push(DecayEvent { time, channel, initial, model });
        }
    }
    Ok(events)
}

/// Binned two-flavor asymmetry with binomial uncertainties. Bins with no
/// counts at all are flagged by `None` entries.
#[derive(Debug, Clone, Serialize)]
pub struct BinnedAsymmetry {
    pub channel: &'static str,
    pub edges: Vec<f64>,
    pub values: Vec<Option<f64>>,
    pub sigma: Vec<Option<f64>>,
    pub counts_k0: Vec<u64>,
    pub counts_k0bar: Vec<u64>,
}

impl BinnedAsymmetry {
    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn n_bins(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn n_occupied(&self) -> usize {
        self.values.iter().flatten().count()
    }

    /// Occupied bins as (bin index, value, sigma).
    pub fn occupied(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        self.values
            .iter()
            .zip(&self.sigma)
            .enumerate()
            .filter_map(|(i, (v, s))| Some((i, (*v)?, (*s)?)))
    }
}

/// Uniform bin edges from `t_min` to `t_max` in steps of `width`.
pub fn uniform_edges(t_min: f64, t_max: f64, width: f64) -> Result<Vec<f64>> {
    if !(width > 0.0 && t_max > t_min && t_min >= 0.0) {
        return Err(Error::Config(format!(
            "bin layout requires 0 <= t_min < t_max and width > 0, got [{t_min}, {t_max}] step {width}"
        )));
    }
    let mut edges = vec![t_min];
    let mut t = t_min;
    while t + width <= t_max + 1e-9 {
        t += width;
        edges.push(t);
    }
    if edges.len() < 2 {
        return Err(Error::Config(format!(
            "bin width {width} does not fit inside [{t_min}, {t_max}]"
        )));
    }
    Ok(edges)
}

/// Per-bin (Nbar - N) / (Nbar + N) over events of one channel, with
/// binomial error propagation.
pub fn bin_asymmetry(
    events_k0: &[DecayEvent],
    events_k0bar: &[DecayEvent],
    edges: &[f64],
    channel: Channel,
) -> Result<BinnedAsymmetry> {
    if edges.len() < 2 {
        return Err(Error::Config("binning requires at least 2 edges".into()));
    }
    if edges[0] < 0.0 || edges.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("bin edges must be non-negative and strictly increasing".into()));
    }
    let n_bins = edges.len() - 1;
    let mut counts_k0 = vec![0u64; n_bins];
    let mut counts_k0bar = vec![0u64; n_bins];
    let fill = |events: &[DecayEvent], counts: &mut [u64]| {
        for e in events {
            if e.channel != channel || e.time < edges[0] || e.time >= edges[n_bins] {
                continue;
            }
            let idx = match edges.partition_point(|&b| b <= e.time) {
                0 => 0,
                p => (p - 1).min(n_bins - 1),
            };
            counts[idx] += 1;
        }
    };
    fill(events_k0, &mut counts_k0);
    fill(events_k0bar, &mut counts_k0bar);

    let mut values = Vec::with_capacity(n_bins);
    let mut sigma = Vec::with_capacity(n_bins);
    for i in 0..n_bins {
        let n = counts_k0[i] as f64;
        let nbar = counts_k0bar[i] as f64;
        let total = n + nbar;
        if total == 0.0 {
            values.push(None);
            sigma.push(None);
            continue;
        }
        let a = (nbar - n) / total;
        // Binomial: var(A) = 4 p (1-p) / total with the flavor proportion
        // estimated by the add-one shrinkage (nbar+1)/(total+2), which
        // keeps sigma positive and honest for one-sided bins.
        let p = (nbar + 1.0) / (total + 2.0);
        let var = 4.0 * p * (1.0 - p) / total;
        values.push(Some(a));
        sigma.push(Some(var.sqrt()));
    }
    Ok(BinnedAsymmetry {
        channel: channel.as_str(),
        edges: edges.to_vec(),
        values,
        sigma,
        counts_k0,
        counts_k0bar,
    })
}

/// CSV rows `time_over_tau_s,channel,initial_flavor`, 12 significant digits.
pub fn write_events_csv<W: Write>(events: &[DecayEvent], mut w: W) -> std::io::Result<()> {
    writeln!(w, "time_over_tau_s,channel,initial_flavor")?;
    for e in events {
        writeln!(w, "{:.11e},{},{}", e.time, e.channel.as_str(), e.initial.as_str())?;
    }
    Ok(())
}

/// Reads the CSV written by [`write_events_csv`]. The model tag is not
/// part of the on-disk format and is attached from the argument.
pub fn read_events_csv<R: BufRead>(reader: R, model: Model) -> Result<Vec<DecayEvent>> {
    let mut events = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if i == 0 {
            if line.trim() != "time_over_tau_s,channel,initial_flavor" {
                return Err(Error::Config(format!("unexpected event CSV header `{line}`")));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let (time, channel, flavor) = (
            parts.next().ok_or_else(|| Error::Config(format!("line {}: missing time", i + 1)))?,
            parts.next().ok_or_else(|| Error::Config(format!("line {}: missing channel", i + 1)))?,
            parts.next().ok_or_else(|| Error::Config(format!("line {}: missing flavor", i + 1)))?,
        );
        let time: f64 = time
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("line {}: bad time `{time}`", i + 1)))?;
        events.push(DecayEvent {
            time,
            channel: Channel::parse(channel.trim())?,
            initial: Flavor::parse(flavor.trim())?,
            model,
        });
    }
    Ok(events)
}

/// Reproducibility sidecar for an event file.
#[derive(Debug, Clone, Serialize)]
pub struct SampleMeta {
    pub model: String,
    pub initial: String,
    pub n: u64,
    pub seed: u64,
    pub t_max_over_tau_s: f64,
    pub grid_points: usize,
    pub physics: std::collections::BTreeMap<&'static str, f64>,
}

impl SampleMeta {
    pub fn new(model: Model, initial: Flavor, n: u64, seed: u64, t_max: f64, physics: &KaonPhysics) -> Self {
        Self {
            model: model.label(),
            initial: initial.as_str().to_string(),
            n,
            seed,
            t_max_over_tau_s: t_max,
            grid_points: GRID_POINTS,
            physics: physics.config_echo(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::twf::TwfVariant;

    const T_MAX: f64 = 4000.0;

    fn defaults() -> KaonPhysics {
        KaonPhysics::default()
    }

    fn eps0() -> KaonPhysics {
        KaonPhysics { epsilon: num_complex::Complex64::new(0.0, 0.0), ..KaonPhysics::default() }
    }

    #[test]
    fn sampling_is_deterministic_and_prefix_stable() {
        let p = defaults();
        let a = sample(Model::Wwa, Flavor::K0, 1000, 42, T_MAX, &p).unwrap();
        let b = sample(Model::Wwa, Flavor::K0, 1000, 42, T_MAX, &p).unwrap();
        assert_eq!(a, b);
        // Streams are sub-seeded, so a longer run extends a shorter one.
        let long = sample(Model::Wwa, Flavor::K0, 70_000, 42, T_MAX, &p).unwrap();
        assert_eq!(&long[..1000], &a[..]);
    }

    #[test]
    fn different_seeds_differ() {
        let p = defaults();
        let a = sample(Model::Wwa, Flavor::K0, 500, 1, T_MAX, &p).unwrap();
        let b = sample(Model::Wwa, Flavor::K0, 500, 2, T_MAX, &p).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn small_windows_are_rejected() {
        let p = defaults();
        assert!(matches!(sample(Model::Wwa, Flavor::K0, 10, 1, 30.0, &p), Err(Error::Config(_))));
        // 40 tau_S passes the hard floor but truncates far too much of the
        // slow channels.
        match sample(Model::Wwa, Flavor::K0, 10, 1, 40.0, &p) {
            Err(Error::Config(msg)) => assert!(msg.contains("truncates"), "{msg}"),
            other => panic!("expected tail-mass rejection, got {other:?}"),
        }
    }

    #[test]
    fn two_pion_times_are_exponential_without_cp_violation() {
        let p = eps0();
        let events = sample(Model::Wwa, Flavor::K0, 100_000, 7, T_MAX, &p).unwrap();
        let times: Vec<f64> = events
            .iter()
            .filter(|e| e.channel == Channel::TwoPion)
            .map(|e| e.time)
            .collect();
        let n = times.len() as f64;
        let mean = times.iter().sum::<f64>() / n;
        // Maximum-likelihood rate vs Gamma_S = 1, three statistical sigma.
        let rate = 1.0 / mean;
        assert!((rate - 1.0).abs() < 3.0 / n.sqrt(), "rate = {rate}, n = {n}");
    }

    #[test]
    fn channel_fractions_match_quadrature() {
        // Oracle: Simpson quadrature of the pointwise rates, dense on the
        // fast head and coarse on the slow tail.
        let p = defaults();
        let events = sample(Model::Wwa, Flavor::K0, 100_000, 11, T_MAX, &p).unwrap();
        let laws = channel_laws(Model::Wwa, Flavor::K0, &p).unwrap();
        let quad = |law: &RateLaw| -> f64 {
            let simpson = |a: f64, b: f64, n: usize| -> f64 {
                let h = (b - a) / n as f64;
                let mut acc = law.at(a) + law.at(b);
                for k in 1..n {
                    acc += law.at(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
                }
                acc * h / 3.0
            };
            simpson(0.0, 60.0, 60_000) + simpson(60.0, T_MAX, 80_000)
        };
        let masses: Vec<f64> = laws.iter().map(quad).collect();
        let total: f64 = masses.iter().sum();
        for (i, ch) in Channel::ALL.iter().enumerate() {
            let expected = masses[i] / total;
            let observed =
                events.iter().filter(|e| e.channel == *ch).count() as f64 / events.len() as f64;
            let sigma = (expected * (1.0 - expected) / events.len() as f64).sqrt();
            assert!(
                (observed - expected).abs() < 3.0 * sigma.max(1e-4),
                "{}: observed {observed}, expected {expected}",
                ch.as_str()
            );
        }
    }

    #[test]
    fn empirical_cdf_tracks_the_analytic_cdf() {
        // One-sample Kolmogorov-Smirnov against the window-normalized
        // time marginal, 99% critical value 1.63/sqrt(n).
        let p = defaults();
        for (model, flavor) in [
            (Model::Wwa, Flavor::K0),
            (Model::Wwa, Flavor::K0Bar),
            (Model::Twf(TwfVariant::MatchedLargeT), Flavor::K0),
            (Model::Twf(TwfVariant::MatchedLargeT), Flavor::K0Bar),
        ] {
            let laws = channel_laws(model, flavor, &p).unwrap();
            let norm: f64 = laws.iter().map(|l| l.integral(0.0, T_MAX)).sum();
            let cdf = |t: f64| laws.iter().map(|l| l.integral(0.0, t)).sum::<f64>() / norm;
            for n in [1_000u64, 10_000, 100_000] {
                let mut times: Vec<f64> = sample(model, flavor, n, 5, T_MAX, &p)
                    .unwrap()
                    .iter()
                    .map(|e| e.time)
                    .collect();
                times.sort_by(f64::total_cmp);
                let mut d: f64 = 0.0;
                for (i, &t) in times.iter().enumerate() {
                    let f = cdf(t);
                    d = d.max((f - i as f64 / n as f64).abs());
                    d = d.max(((i + 1) as f64 / n as f64 - f).abs());
                }
                let bound = 1.63 / (n as f64).sqrt();
                assert!(d < bound, "{model:?}/{flavor:?} n={n}: KS {d} >= {bound}");
            }
        }
    }

    #[test]
    fn swapped_datasets_negate_the_asymmetry() {
        let p = defaults();
        let k0 = sample(Model::Wwa, Flavor::K0, 20_000, 3, T_MAX, &p).unwrap();
        let k0bar = sample(Model::Wwa, Flavor::K0Bar, 20_000, 4, T_MAX, &p).unwrap();
        let edges: Vec<f64> = (0..=19).map(|i| 1.0 + i as f64).collect();
        let ab = bin_asymmetry(&k0, &k0bar, &edges, Channel::TwoPion).unwrap();
        let ba = bin_asymmetry(&k0bar, &k0, &edges, Channel::TwoPion).unwrap();
        for (x, y) in ab.values.iter().zip(&ba.values) {
            match (x, y) {
                (Some(x), Some(y)) => assert_eq!(*x, -*y),
                (None, None) => {}
                other => panic!("occupancy mismatch {other:?}"),
            }
        }
        for (x, y) in ab.sigma.iter().zip(&ba.sigma) {
            match (x, y) {
                (Some(x), Some(y)) => {
                    assert!((x - y).abs() <= 1e-14 * x.abs(), "sigma asymmetry: {x} vs {y}")
                }
                (None, None) => {}
                other => panic!("occupancy mismatch {other:?}"),
            }
        }
    }

    #[test]
    fn asymmetry_bins_are_flat_without_cp_violation() {
        let p = eps0();
        let k0 = sample(Model::Wwa, Flavor::K0, 100_000, 21, T_MAX, &p).unwrap();
        let k0bar = sample(Model::Wwa, Flavor::K0Bar, 100_000, 22, T_MAX, &p).unwrap();
        let edges: Vec<f64> = (0..=19).map(|i| 1.0 + i as f64).collect();
        let binned = bin_asymmetry(&k0, &k0bar, &edges, Channel::TwoPion).unwrap();
        for (_, value, sigma) in binned.occupied() {
            assert!(value.abs() < 3.0 * sigma, "bin value {value} vs sigma {sigma}");
        }
    }

    #[test]
    fn empty_bins_are_flagged() {
        let e = DecayEvent { time: 0.5, channel: Channel::TwoPion, initial: Flavor::K0, model: Model::Wwa };
        let binned = bin_asymmetry(&[e], &[], &[0.0, 1.0, 2.0], Channel::TwoPion).unwrap();
        assert_eq!(binned.values[0], Some(-1.0));
        assert!(binned.sigma[0].unwrap() > 0.0);
        assert_eq!(binned.values[1], None);
        assert_eq!(binned.sigma[1], None);
        assert_eq!(binned.n_occupied(), 1);
    }

    #[test]
    fn bin_edges_are_validated() {
        assert!(bin_asymmetry(&[], &[], &[1.0], Channel::TwoPion).is_err());
        assert!(bin_asymmetry(&[], &[], &[2.0, 1.0], Channel::TwoPion).is_err());
        assert!(bin_asymmetry(&[], &[], &[-1.0, 1.0], Channel::TwoPion).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let p = defaults();
        let events = sample(Model::Wwa, Flavor::K0Bar, 200, 9, T_MAX, &p).unwrap();
        let mut buf = Vec::new();
        write_events_csv(&events, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("time_over_tau_s,channel,initial_flavor\n"));
        let back = read_events_csv(std::io::BufReader::new(text.as_bytes()), Model::Wwa).unwrap();
        assert_eq!(back.len(), events.len());
        for (a, b) in events.iter().zip(&back) {
            assert!((a.time - b.time).abs() <= 1e-11 * a.time.abs().max(1.0));
            assert_eq!(a.channel, b.channel);
            assert_eq!(a.initial, b.initial);
        }
    }

    #[test]
    fn twf_sampling_uses_tilded_pion_laws() {
        let p = defaults();
        let model = Model::Twf(TwfVariant::MatchedLargeT);
        let laws = channel_laws(model, Flavor::K0, &p).unwrap();
        let tw = twf::constrain(&p, TwfVariant::MatchedLargeT);
        let direct = twf::two_pion_rate(Flavor::K0, 2.0, &p, &tw).unwrap();
        assert!((laws[0].at(2.0) - direct).abs() < 1e-15);
        // Semileptonic laws fall back to the CP-respecting limit.
        let zero = twf::channel_law(Flavor::K0, Channel::SemileptonicPlus, &p, &TwfParams::zero()).unwrap();
        assert_eq!(laws[2].at(1.5), zero.at(1.5));
    }
}
