//! Epsilon estimation and fixed-model chi-square tests on binned
//! asymmetry data.
//!
//! The model prediction for a bin is the count-weighted average
//! asymmetry, i.e. the ratio of exactly integrated rates over the bin,
//! which is what the binned count estimator actually estimates. Only
//! epsilon floats (two real parameters); lifetimes and Delta m stay
//! fixed, and the temporal-wave-function parameters are always derived
//! from epsilon rather than fitted.

use num_complex::Complex64 as C64;
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::asymmetry::Model;
use crate::error::{Error, Result};
use crate::events::BinnedAsymmetry;
use crate::evolution::RateLaw;
use crate::params::KaonPhysics;
use crate::twf;
use crate::wwa::{self, Channel, Flavor};

/// Count-weighted model asymmetry per bin: the ratio of the exact rate
/// integrals of the width-stripped two-pion kernels over each bin.
pub fn binned_prediction(model: Model, edges: &[f64], physics: &KaonPhysics) -> Result<Vec<f64>> {
    if edges.len() < 2 || edges.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("bin edges must be strictly increasing with at least 2 entries".into()));
    }
    let (k0, k0bar): (RateLaw, RateLaw) = match model {
        Model::Wwa => (
            wwa::channel_law(Flavor::K0, Channel::TwoPion, physics).with_prefactor(1.0),
            wwa::channel_law(Flavor::K0Bar, Channel::TwoPion, physics).with_prefactor(1.0),
        ),
        Model::Twf(variant) => {
            let p = twf::constrain(physics, variant);
            (
                twf::two_pion_kernel(Flavor::K0, physics, &p)?,
                twf::two_pion_kernel(Flavor::K0Bar, physics, &p)?,
            )
        }
    };
    Ok(edges
        .windows(2)
        .map(|w| {
            let i = k0.integral(w[0], w[1]);
            let ibar = k0bar.integral(w[0], w[1]);
            (ibar - i) / (i + ibar)
        })
        .collect())
}

/// chi^2 of binned data against per-bin predictions, over occupied bins
/// with positive uncertainty. Returns (chi2, bins used).
fn chi_square(data: &BinnedAsymmetry, prediction: &[f64]) -> (f64, usize) {
    let mut chi2 = 0.0;
    let mut used = 0;
    for (i, value, sigma) in data.occupied() {
        if sigma > 0.0 {
            let pull = (value - prediction[i]) / sigma;
            chi2 += pull * pull;
            used += 1;
        }
    }
    (chi2, used)
}

#[derive(Debug, Clone, Copy)]
pub struct FitResult {
    pub epsilon_hat: C64,
    pub chi2: f64,
    pub ndf: usize,
    /// 2x2 covariance of (Re eps, Im eps) from the chi^2 curvature.
    pub covariance: [[f64; 2]; 2],
    pub converged: bool,
}

impl FitResult {
    /// One-sigma uncertainty on |epsilon| by error propagation.
    pub fn sigma_abs_epsilon(&self) -> f64 {
        let (re, im) = (self.epsilon_hat.re, self.epsilon_hat.im);
        let norm = self.epsilon_hat.norm();
        if norm == 0.0 {
            return self.covariance[0][0].max(self.covariance[1][1]).sqrt();
        }
        let var = (re * re * self.covariance[0][0]
            + 2.0 * re * im * self.covariance[0][1]
            + im * im * self.covariance[1][1])
            / (norm * norm);
        var.max(0.0).sqrt()
    }
}

impl Serialize for FitResult {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("FitResult", 7)?;
        st.serialize_field("epsilon_re", &self.epsilon_hat.re)?;
        st.serialize_field("epsilon_im", &self.epsilon_hat.im)?;
        st.serialize_field("abs_epsilon", &self.epsilon_hat.norm())?;
        st.serialize_field("arg_epsilon_degrees", &self.epsilon_hat.arg().to_degrees())?;
        st.serialize_field("chi2", &self.chi2)?;
        st.serialize_field("ndf", &self.ndf)?;
        st.serialize_field("covariance", &self.covariance)?;
        st.serialize_field("converged", &self.converged)?;
        st.end()
    }
}

/// Nelder-Mead on a 2-parameter function. Returns (best point, best value,
/// converged flag).
fn nelder_mead(
    mut f: impl FnMut([f64; 2]) -> f64,
    start: [f64; 2],
    step: f64,
    max_iter: usize,
) -> ([f64; 2], f64, bool) {
    let mut simplex = [
        (start, f(start)),
        ([start[0] + step, start[1]], f([start[0] + step, start[1]])),
        ([start[0], start[1] + step], f([start[0], start[1] + step])),
    ];
    let mut converged = false;
    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let [best, mid, worst] = simplex;
        let diameter = simplex
            .iter()
            .flat_map(|(p, _)| {
                let b = best.0;
                [(p[0] - b[0]).abs(), (p[1] - b[1]).abs()]
            })
            .fold(0.0, f64::max);
        if (worst.1 - best.1).abs() <= 1e-12 * (1.0 + best.1.abs()) && diameter <= 1e-10 {
            converged = true;
            break;
        }
        let centroid = [(best.0[0] + mid.0[0]) / 2.0, (best.0[1] + mid.0[1]) / 2.0];
        let reflect = [2.0 * centroid[0] - worst.0[0], 2.0 * centroid[1] - worst.0[1]];
        let fr = f(reflect);
        if fr < best.1 {
            let expand = [
                centroid[0] + 2.0 * (reflect[0] - centroid[0]),
                centroid[1] + 2.0 * (reflect[1] - centroid[1]),
            ];
            let fe = f(expand);
            simplex[2] = if fe < fr { (expand, fe) } else { (reflect, fr) };
        } else if fr < mid.1 {
            simplex[2] = (reflect, fr);
        } else {
            let contract = [
                centroid[0] + 0.5 * (worst.0[0] - centroid[0]),
                centroid[1] + 0.5 * (worst.0[1] - centroid[1]),
            ];
            let fc = f(contract);
            if fc < worst.1 {
                simplex[2] = (contract, fc);
            } else {
                // Shrink toward the best vertex.
                for v in simplex.iter_mut().skip(1) {
                    v.0 = [
                        best.0[0] + 0.5 * (v.0[0] - best.0[0]),
                        best.0[1] + 0.5 * (v.0[1] - best.0[1]),
                    ];
                    v.1 = f(v.0);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    (simplex[0].0, simplex[0].1, converged)
}

/// Fits (Re eps, Im eps) to binned asymmetry data by a coarse polar grid
/// scan (21 x 21 over |eps| <= 0.01, arg in [0, 90] degrees) followed by
/// simplex descent. The covariance comes from the finite-difference
/// curvature of chi^2 at the minimum.
pub fn fit_epsilon(data: &BinnedAsymmetry, physics: &KaonPhysics) -> Result<FitResult> {
    let usable = data
        .occupied()
        .filter(|&(_, _, sigma)| sigma > 0.0)
        .count();
    if usable < 5 {
        return Err(Error::InsufficientData(format!(
            "epsilon fit needs at least 5 non-empty bins with positive sigma, got {usable}"
        )));
    }

    let mut objective = |point: [f64; 2]| -> f64 {
        let eps = C64::new(point[0], point[1]);
        if eps.norm() >= 0.5 {
            return f64::INFINITY;
        }
        let trial = physics.with_epsilon(eps);
        match binned_prediction(Model::Wwa, &data.edges, &trial) {
            Ok(pred) => chi_square(data, &pred).0,
            Err(_) => f64::INFINITY,
        }
    };

    // Coarse pre-scan, seeded at eps = 0.
    let mut best = ([0.0, 0.0], objective([0.0, 0.0]));
    for i in 0..=20 {
        let r = 0.01 * i as f64 / 20.0;
        for j in 0..=20 {
            if r == 0.0 && j > 0 {
                break;
            }
            let arg = (90.0 * j as f64 / 20.0).to_radians();
            let point = [r * arg.cos(), r * arg.sin()];
            let value = objective(point);
            if value < best.1 {
                best = (point, value);
            }
        }
    }

    let (point, chi2, converged) = nelder_mead(&mut objective, best.0, 5e-4, 2000);

    // Curvature by central differences; cov = 2 H^{-1}.
    let h = 1e-5;
    let f0 = chi2;
    let fxx = (objective([point[0] + h, point[1]]) - 2.0 * f0 + objective([point[0] - h, point[1]])) / (h * h);
    let fyy = (objective([point[0], point[1] + h]) - 2.0 * f0 + objective([point[0], point[1] - h])) / (h * h);
    let fxy = (objective([point[0] + h, point[1] + h]) - objective([point[0] + h, point[1] - h])
        - objective([point[0] - h, point[1] + h])
        + objective([point[0] - h, point[1] - h]))
        / (4.0 * h * h);
    let det = fxx * fyy - fxy * fxy;
    let (covariance, curvature_ok) = if det > 0.0 && fxx > 0.0 {
        (
            [
                [2.0 * fyy / det, -2.0 * fxy / det],
                [-2.0 * fxy / det, 2.0 * fxx / det],
            ],
            true,
        )
    } else {
        ([[f64::INFINITY, 0.0], [0.0, f64::INFINITY]], false)
    };

    Ok(FitResult {
        epsilon_hat: C64::new(point[0], point[1]),
        chi2,
        ndf: usable.saturating_sub(2),
        covariance,
        converged: converged && curvature_ok,
    })
}

/// Goodness of a fully parameterized model against binned data.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ModelChi2 {
    pub chi2: f64,
    pub ndf: usize,
    /// (chi2 - ndf) / sqrt(2 ndf).
    pub n_sigma: f64,
}

pub fn model_chi2(model: Model, data: &BinnedAsymmetry, physics: &KaonPhysics) -> Result<ModelChi2> {
    let prediction = binned_prediction(model, &data.edges, physics)?;
    let (chi2, used) = chi_square(data, &prediction);
    if used == 0 {
        return Err(Error::InsufficientData("model test needs at least one occupied bin".into()));
    }
    let ndf = used;
    Ok(ModelChi2 { chi2, ndf, n_sigma: (chi2 - ndf as f64) / (2.0 * ndf as f64).sqrt() })
}
