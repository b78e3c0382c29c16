//! Cross-module invariants: property tests over randomized constants and
//! the statistical closed-loop checks that need large samples.

use kaonlab::asymmetry::{curve, Model};
use kaonlab::events::{bin_asymmetry, sample};
use kaonlab::fit::{binned_prediction, fit_epsilon};
use kaonlab::golden_rule::{integrate, ModeChannel, ModeSystem};
use kaonlab::params::KaonPhysics;
use kaonlab::twf::{self, TwfVariant};
use kaonlab::wwa::{self, Channel, Flavor, LeptonSign};
use num_complex::Complex64 as C64;
use proptest::prelude::*;

/// Constants drawn inside the validity region: lifetime ratio away from 1,
/// small |epsilon|, arbitrary phase and oscillation frequency.
fn physics_strategy() -> impl Strategy<Value = KaonPhysics> {
    (
        1e-3..0.9f64,      // Gamma_L / Gamma_S
        0.0..0.01f64,      // |epsilon|
        0.0..std::f64::consts::TAU, // arg epsilon
        0.0..3.0f64,       // Delta m tau_S
        0.1..1.0f64,       // channel fractions
        0.05..1.0f64,
        0.05..1.0f64,
    )
        .prop_map(|(gl, abs_eps, arg_eps, dm_tau, f_2pi, f_3pi, f_sl)| {
            let tau_s = 8.92e-11;
            let tau_l = tau_s / gl;
            KaonPhysics {
                tau_s,
                tau_l,
                delta_m: dm_tau / tau_s,
                epsilon: C64::from_polar(abs_eps, arg_eps),
                gamma_k1_to_2pi: f_2pi / tau_s,
                gamma_k2_to_3pi: f_3pi / tau_l,
                gamma_semileptonic: f_sl / tau_l,
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn rates_are_nonnegative_everywhere(physics in physics_strategy(), t in 0.0..50.0f64) {
        physics.validate().unwrap();
        for flavor in [Flavor::K0, Flavor::K0Bar] {
            prop_assert!(wwa::two_pion_rate(flavor, t, &physics).unwrap() >= 0.0);
            prop_assert!(wwa::three_pion_rate(flavor, t, &physics).unwrap() >= 0.0);
            for sign in [LeptonSign::Plus, LeptonSign::Minus] {
                prop_assert!(wwa::semileptonic_rate(flavor, sign, t, &physics).unwrap() >= 0.0);
            }
            for variant in TwfVariant::ALL {
                let p = twf::constrain(&physics, variant);
                prop_assert!(twf::two_pion_rate(flavor, t, &physics, &p).unwrap() >= 0.0);
                prop_assert!(twf::three_pion_rate(flavor, t, &physics, &p).unwrap() >= 0.0);
            }
        }
    }

    #[test]
    fn asymmetry_stays_within_unit_interval(physics in physics_strategy()) {
        for model in [Model::Wwa, Model::Twf(TwfVariant::MatchedLargeT), Model::Twf(TwfVariant::MatchedThreePion)] {
            let c = curve(model, 0.0, 30.0, 201, &physics).unwrap();
            prop_assert!(c.values.iter().all(|v| v.is_finite() && v.abs() <= 1.0));
        }
    }

    #[test]
    fn flavor_symmetry_at_zero_holds_for_any_epsilon(physics in physics_strategy()) {
        // Two-pion rates of both flavors coincide at t = 0 for any epsilon.
        let a = wwa::two_pion_rate(Flavor::K0, 0.0, &physics).unwrap();
        let b = wwa::two_pion_rate(Flavor::K0Bar, 0.0, &physics).unwrap();
        let half_width = physics.gamma_k1_to_2pi * physics.tau_s / 2.0;
        prop_assert!((a - b).abs() <= 1e-12 * half_width);
        prop_assert!((a - half_width).abs() <= 1e-12 * half_width);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn coupled_mode_norm_is_conserved(
        detunings in proptest::collection::vec(-4.0..4.0f64, 1..5),
        couplings in proptest::collection::vec(0.01..0.8f64, 1..5),
        phases in proptest::collection::vec(0.0..std::f64::consts::TAU, 1..5),
    ) {
        let n = detunings.len().min(couplings.len()).min(phases.len());
        let channels: Vec<ModeChannel> = (0..n)
            .map(|i| ModeChannel {
                species: i % 2,
                omega: detunings[i],
                coupling: C64::from_polar(couplings[i], phases[i]),
            })
            .collect();
        let sys = ModeSystem::new(0.0, channels).unwrap();
        let traj = integrate(&sys, 4.0, 1600).unwrap();
        for i in 0..traj.times.len() {
            let norm = traj.c_in[i].norm_sqr() + traj.norm_out(i);
            prop_assert!((norm - 1.0).abs() < 1e-6, "norm = {} at step {}", norm, i);
        }
    }
}

/// Binned Monte Carlo asymmetry tracks the analytic curve at three sigma
/// with a million events per flavor. The three-sigma logic applies to the
/// well-populated bins where the binomial errors are Gaussian; the sparse
/// interference-dip bins (a handful of counts) are only required to stay
/// inside the physical range.
#[test]
fn binned_asymmetry_tracks_the_analytic_prediction() {
    let p = KaonPhysics::default();
    let n = 1_000_000;
    let k0 = sample(Model::Wwa, Flavor::K0, n, 271, 4000.0, &p).unwrap();
    let k0bar = sample(Model::Wwa, Flavor::K0Bar, n, 272, 4000.0, &p).unwrap();
    let edges: Vec<f64> = (0..=19).map(|i| 1.0 + i as f64).collect();
    let binned = bin_asymmetry(&k0, &k0bar, &edges, Channel::TwoPion).unwrap();
    let prediction = binned_prediction(Model::Wwa, &edges, &p).unwrap();
    let mut gaussian_bins = 0;
    for (i, value, sigma) in binned.occupied() {
        assert!(value.abs() <= 1.0);
        if binned.counts_k0[i] + binned.counts_k0bar[i] >= 100 {
            let pull = (value - prediction[i]) / sigma;
            assert!(pull.abs() < 3.0, "bin {i}: value {value}, prediction {}, pull {pull}", prediction[i]);
            gaussian_bins += 1;
        }
    }
    assert!(gaussian_bins >= 7, "only {gaussian_bins} well-populated bins");
}

/// Ensemble consistency: across twenty seeds at 1e5 events per flavor the
/// bias of the fitted |epsilon| stays below one statistical sigma (the
/// uncertainty a single fit reports).
#[test]
fn fitted_epsilon_is_unbiased_within_its_statistical_error() {
    let p = KaonPhysics::default();
    let edges: Vec<f64> = (0..=19).map(|i| 1.0 + i as f64).collect();
    let mut fitted = Vec::new();
    let mut reported_sigma = Vec::new();
    for seed in 0..20u64 {
        let k0 = sample(Model::Wwa, Flavor::K0, 100_000, 1000 + 2 * seed, 4000.0, &p).unwrap();
        let k0bar = sample(Model::Wwa, Flavor::K0Bar, 100_000, 1001 + 2 * seed, 4000.0, &p).unwrap();
        let binned = bin_asymmetry(&k0, &k0bar, &edges, Channel::TwoPion).unwrap();
        let fit = fit_epsilon(&binned, &p).unwrap();
        assert!(fit.converged, "seed {seed} did not converge");
        fitted.push(fit.epsilon_hat.norm());
        reported_sigma.push(fit.sigma_abs_epsilon());
    }
    let n = fitted.len() as f64;
    let mean = fitted.iter().sum::<f64>() / n;
    let sigma_single = reported_sigma.iter().sum::<f64>() / n;
    let bias = mean - 2.228e-3;
    assert!(
        bias.abs() < sigma_single,
        "mean |eps_hat| = {mean:.6e}, bias {bias:.3e} vs statistical sigma {sigma_single:.3e}"
    );
    // The ensemble scatter should match what the fits claim.
    let var = fitted.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    assert!(
        var.sqrt() < 2.0 * sigma_single,
        "ensemble scatter {:.3e} wildly exceeds reported sigma {sigma_single:.3e}",
        var.sqrt()
    );
}
