//! End-to-end model-discrimination study.
//!
//! One call derives the temporal-wave-function parameters, evaluates both
//! asymmetry curves and their limits, generates synthetic event samples
//! under the standard description (the stand-in for measured data), bins
//! the two-pion asymmetry, fits epsilon, scores both models with fixed
//! chi-square tests, and writes every artifact to an output directory:
//! `report.json`, `wwa_curve.csv`, `twf_curve.csv`, `events_k0.csv`,
//! `events_k0bar.csv` (with `.json` sidecars) and `fit.json`.
//!
//! Identical configuration and seed produce byte-identical outputs. A
//! model is declared falsified when its chi-square test exceeds five
//! standard deviations; the raw significance is always reported alongside.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::asymmetry::{self, AsymmetryCurve, Discrepancy, Model};
use crate::error::{Error, Result};
use crate::events::{self, SampleMeta};
use crate::fit::{self, FitResult, ModelChi2};
use crate::kv::KvDoc;
use crate::params::{load_physics, KaonPhysics};
use crate::twf::TwfVariant;
use crate::wwa::{Channel, Flavor};

/// Significance above which a model is declared falsified.
pub const FALSIFICATION_THRESHOLD: f64 = 5.0;

#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub physics: KaonPhysics,
    pub twf_variant: TwfVariant,
    pub n_events: u64,
    pub seed: u64,
    /// Sampling window for event generation, units tau_S.
    pub t_max: f64,
    pub bin_t_min: f64,
    pub bin_t_max: f64,
    pub bin_width: f64,
    pub curve_t_min: f64,
    pub curve_t_max: f64,
    pub curve_points: usize,
}

impl StudyConfig {
    /// Reads a study configuration: the physics keys (or `defaults = true`)
    /// plus `twf_variant` (required), `n_events`, `seed`,
    /// `t_max_over_tau_s`, `bin_t_min`, `bin_t_max`, `bin_width`,
    /// `curve_t_min`, `curve_t_max`, `curve_points`.
    pub fn from_kv(doc: &KvDoc, seed_override: Option<u64>) -> Result<Self> {
        let physics = load_physics(doc)?;
        let variant = doc
            .get_str("twf_variant")
            .ok_or_else(|| Error::MissingKey("twf_variant".into()))?;
        let twf_variant = TwfVariant::parse(variant)?;
        let seed = match seed_override.or(doc.get_u64("seed")?) {
            Some(s) => s,
            None => return Err(Error::MissingKey("seed".into())),
        };
        let cfg = Self {
            physics,
            twf_variant,
            n_events: doc.get_u64("n_events")?.unwrap_or(1_000_000),
            seed,
            t_max: doc.get_f64("t_max_over_tau_s")?.unwrap_or(4000.0),
            bin_t_min: doc.get_f64("bin_t_min")?.unwrap_or(1.0),
            bin_t_max: doc.get_f64("bin_t_max")?.unwrap_or(20.0),
            bin_width: doc.get_f64("bin_width")?.unwrap_or(1.0),
            curve_t_min: doc.get_f64("curve_t_min")?.unwrap_or(0.0),
            curve_t_max: doc.get_f64("curve_t_max")?.unwrap_or(40.0),
            curve_points: doc.get_u64("curve_points")?.unwrap_or(401) as usize,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn defaults_with_seed(seed: u64) -> Self {
        Self {
            physics: KaonPhysics::default(),
            twf_variant: TwfVariant::MatchedLargeT,
            n_events: 1_000_000,
            seed,
            t_max: 4000.0,
            bin_t_min: 1.0,
            bin_t_max: 20.0,
            bin_width: 1.0,
            curve_t_min: 0.0,
            curve_t_max: 40.0,
            curve_points: 401,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bin_width > 0.0 && self.bin_t_max > self.bin_t_min && self.bin_t_min >= 0.0) {
            return Err(Error::Config("bin window must satisfy 0 <= bin_t_min < bin_t_max, bin_width > 0".into()));
        }
        if self.n_events == 0 {
            return Err(Error::Config("n_events must be >= 1".into()));
        }
        Ok(())
    }

    pub fn bin_edges(&self) -> Vec<f64> {
        events::uniform_edges(self.bin_t_min, self.bin_t_max, self.bin_width)
            .expect("validated bin layout")
    }

    fn echo(&self) -> ConfigEcho {
        ConfigEcho {
            physics: self.physics.config_echo(),
            twf_variant: self.twf_variant.as_str().to_string(),
            n_events: self.n_events,
            seed: self.seed,
            t_max_over_tau_s: self.t_max,
            bin_t_min: self.bin_t_min,
            bin_t_max: self.bin_t_max,
            bin_width: self.bin_width,
            curve_t_min: self.curve_t_min,
            curve_t_max: self.curve_t_max,
            curve_points: self.curve_points,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConfigEcho {
    pub physics: BTreeMap<&'static str, f64>,
    pub twf_variant: String,
    pub n_events: u64,
    pub seed: u64,
    pub t_max_over_tau_s: f64,
    pub bin_t_min: f64,
    pub bin_t_max: f64,
    pub bin_width: f64,
    pub curve_t_min: f64,
    pub curve_t_max: f64,
    pub curve_points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum Verdict {
    Consistent,
    Falsified { n_sigma: f64 },
}

impl Verdict {
    fn from_test(test: &ModelChi2) -> Self {
        if test.n_sigma > FALSIFICATION_THRESHOLD {
            Verdict::Falsified { n_sigma: test.n_sigma }
        } else {
            Verdict::Consistent
        }
    }

    pub fn is_falsified(&self) -> bool {
        matches!(self, Verdict::Falsified { .. })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelAssessment {
    pub model: String,
    pub small_t_asymmetry: f64,
    pub large_t_limit: f64,
    pub chi2: f64,
    pub ndf: usize,
    pub n_sigma: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct StudyReport {
    pub config: ConfigEcho,
    pub wwa: ModelAssessment,
    pub twf: ModelAssessment,
    pub discrepancy_1_10: Discrepancy,
    pub discrepancy_10_40: Discrepancy,
    pub fit: FitResult,
    pub wwa_curve: AsymmetryCurve,
    pub twf_curve: AsymmetryCurve,
}

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| e.in_stage(name))
}

/// Runs the whole study and writes all artifacts under `out_dir`.
pub fn run_study(cfg: &StudyConfig, out_dir: &Path) -> Result<StudyReport> {
    cfg.validate()?;
    fs::create_dir_all(out_dir)?;
    let physics = &cfg.physics;
    let twf_model = Model::Twf(cfg.twf_variant);

    let wwa_curve = stage(
        "curves",
        asymmetry::curve(Model::Wwa, cfg.curve_t_min, cfg.curve_t_max, cfg.curve_points, physics),
    )?;
    let twf_curve = stage(
        "curves",
        asymmetry::curve(twf_model, cfg.curve_t_min, cfg.curve_t_max, cfg.curve_points, physics),
    )?;

    let small_t_wwa = stage("limits", asymmetry::asymmetry_at(Model::Wwa, 0.0, physics))?;
    let small_t_twf = stage("limits", asymmetry::asymmetry_at(twf_model, 0.0, physics))?;

    let discrepancy_1_10 = stage("discrepancy", asymmetry::discrepancy(&wwa_curve, &twf_curve, (1.0, 10.0)))?;
    let discrepancy_10_40 = stage("discrepancy", asymmetry::discrepancy(&wwa_curve, &twf_curve, (10.0, 40.0)))?;

    // Synthetic data: the standard description plays the measured sample.
    let events_k0 = stage(
        "events",
        events::sample(Model::Wwa, Flavor::K0, cfg.n_events, cfg.seed, cfg.t_max, physics),
    )?;
    let events_k0bar = stage(
        "events",
        events::sample(Model::Wwa, Flavor::K0Bar, cfg.n_events, cfg.seed + 1, cfg.t_max, physics),
    )?;

    let edges = cfg.bin_edges();
    let binned = stage("binning", events::bin_asymmetry(&events_k0, &events_k0bar, &edges, Channel::TwoPion))?;

    let fit_result = stage("fit", fit::fit_epsilon(&binned, physics))?;
    let wwa_test = stage("model-tests", fit::model_chi2(Model::Wwa, &binned, physics))?;
    let twf_test = stage("model-tests", fit::model_chi2(twf_model, &binned, physics))?;

    let report = StudyReport {
        config: cfg.echo(),
        wwa: ModelAssessment {
            model: Model::Wwa.label(),
            small_t_asymmetry: small_t_wwa,
            large_t_limit: asymmetry::large_t_limit(Model::Wwa, physics),
            chi2: wwa_test.chi2,
            ndf: wwa_test.ndf,
            n_sigma: wwa_test.n_sigma,
            verdict: Verdict::from_test(&wwa_test),
        },
        twf: ModelAssessment {
            model: twf_model.label(),
            small_t_asymmetry: small_t_twf,
            large_t_limit: asymmetry::large_t_limit(twf_model, physics),
            chi2: twf_test.chi2,
            ndf: twf_test.ndf,
            n_sigma: twf_test.n_sigma,
            verdict: Verdict::from_test(&twf_test),
        },
        discrepancy_1_10,
        discrepancy_10_40,
        fit: fit_result,
        wwa_curve,
        twf_curve,
    };

    stage("write", write_artifacts(cfg, &report, &events_k0, &events_k0bar, out_dir))?;
    Ok(report)
}

fn write_artifacts(
    cfg: &StudyConfig,
    report: &StudyReport,
    events_k0: &[events::DecayEvent],
    events_k0bar: &[events::DecayEvent],
    out_dir: &Path,
) -> Result<()> {
    let mut sorted_k0 = events_k0.to_vec();
    let mut sorted_k0bar = events_k0bar.to_vec();
    sorted_k0.sort_by(|a, b| a.time.total_cmp(&b.time));
    sorted_k0bar.sort_by(|a, b| a.time.total_cmp(&b.time));

    let mut buf = Vec::new();
    report.wwa_curve.write_csv(&mut buf)?;
    fs::write(out_dir.join("wwa_curve.csv"), &buf)?;
    buf.clear();
    report.twf_curve.write_csv(&mut buf)?;
    fs::write(out_dir.join("twf_curve.csv"), &buf)?;

    buf.clear();
    events::write_events_csv(&sorted_k0, &mut buf)?;
    fs::write(out_dir.join("events_k0.csv"), &buf)?;
    buf.clear();
    events::write_events_csv(&sorted_k0bar, &mut buf)?;
    fs::write(out_dir.join("events_k0bar.csv"), &buf)?;

    let meta_k0 = SampleMeta::new(Model::Wwa, Flavor::K0, cfg.n_events, cfg.seed, cfg.t_max, &cfg.physics);
    fs::write(out_dir.join("events_k0.json"), pretty_json(&meta_k0)?)?;
    let meta_k0bar =
        SampleMeta::new(Model::Wwa, Flavor::K0Bar, cfg.n_events, cfg.seed + 1, cfg.t_max, &cfg.physics);
    fs::write(out_dir.join("events_k0bar.json"), pretty_json(&meta_k0bar)?)?;

    fs::write(out_dir.join("fit.json"), pretty_json(&report.fit)?)?;
    fs::write(out_dir.join("report.json"), pretty_json(report)?)?;
    Ok(())
}

fn pretty_json<T: Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64 as C64;

    fn out_dir(tag: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("kaonlab-study-{}-{tag}", std::process::id()));
        let _ = fs::remove_dir_all(&dir);
        dir
    }

    fn quick_config(seed: u64) -> StudyConfig {
        StudyConfig { n_events: 20_000, ..StudyConfig::defaults_with_seed(seed) }
    }

    #[test]
    fn study_discriminates_the_models() {
        let cfg = StudyConfig { n_events: 100_000, ..StudyConfig::defaults_with_seed(42) };
        let dir = out_dir("discriminate");
        let report = run_study(&cfg, &dir).unwrap();
        assert!(!report.wwa.verdict.is_falsified(), "wwa: {:?}", report.wwa.verdict);
        assert!(report.twf.verdict.is_falsified(), "twf: {:?}", report.twf.verdict);
        assert!(report.discrepancy_1_10.max_abs_diff > 0.01);
        for name in [
            "report.json",
            "wwa_curve.csv",
            "twf_curve.csv",
            "events_k0.csv",
            "events_k0bar.csv",
            "events_k0.json",
            "events_k0bar.json",
            "fit.json",
        ] {
            assert!(dir.join(name).exists(), "missing artifact {name}");
        }
        let _ = fs::remove_dir_all(&dir);
    }

    #[test]
    fn the_other_variant_is_falsified_too() {
        // The early window drives the verdict; eps_s_tilde barely enters
        // there, so both variants fail the same way.
        let cfg = StudyConfig {
            n_events: 100_000,
            twf_variant: TwfVariant::MatchedThreePion,
            ..StudyConfig::defaults_with_seed(42)
        };
        let dir = out_dir("three-pion");
        let report = run_study(&cfg, &dir).unwrap();
        assert!(report.twf.verdict.is_falsified());
        assert!(!report.wwa.verdict.is_falsified());
        let _ = fs::remove_dir_all(&dir);
    }

    #[test]
    fn study_without_cp_violation_clears_both_models() {
        let mut cfg = quick_config(7);
        cfg.physics = KaonPhysics { epsilon: C64::new(0.0, 0.0), ..cfg.physics };
        let dir = out_dir("eps0");
        let report = run_study(&cfg, &dir).unwrap();
        assert!(!report.wwa.verdict.is_falsified());
        assert!(!report.twf.verdict.is_falsified());
        assert_eq!(report.wwa_curve.values, report.twf_curve.values);
        let _ = fs::remove_dir_all(&dir);
    }

    #[test]
    fn reports_are_byte_identical_for_identical_config() {
        let cfg = quick_config(123);
        let dir_a = out_dir("repro-a");
        let dir_b = out_dir("repro-b");
        run_study(&cfg, &dir_a).unwrap();
        run_study(&cfg, &dir_b).unwrap();
        for name in ["report.json", "wwa_curve.csv", "twf_curve.csv", "events_k0.csv", "fit.json"] {
            let a = fs::read(dir_a.join(name)).unwrap();
            let b = fs::read(dir_b.join(name)).unwrap();
            assert_eq!(a, b, "{name} differs between identical runs");
        }
        let _ = fs::remove_dir_all(&dir_a);
        let _ = fs::remove_dir_all(&dir_b);
    }

    #[test]
    fn report_curves_equal_standalone_curves() {
        let cfg = quick_config(9);
        let dir = out_dir("stage-isolation");
        let report = run_study(&cfg, &dir).unwrap();
        let standalone =
            asymmetry::curve(Model::Wwa, cfg.curve_t_min, cfg.curve_t_max, cfg.curve_points, &cfg.physics)
                .unwrap();
        assert_eq!(report.wwa_curve.values, standalone.values);
        let _ = fs::remove_dir_all(&dir);
    }

    #[test]
    fn config_requires_a_variant_and_a_seed() {
        let doc = KvDoc::parse("defaults = true\n").unwrap();
        match StudyConfig::from_kv(&doc, Some(1)) {
            Err(Error::MissingKey(k)) => assert_eq!(k, "twf_variant"),
            other => panic!("expected MissingKey(twf_variant), got {other:?}"),
        }
        let doc = KvDoc::parse("defaults = true\ntwf_variant = matched-large-t\n").unwrap();
        match StudyConfig::from_kv(&doc, None) {
            Err(Error::MissingKey(k)) => assert_eq!(k, "seed"),
            other => panic!("expected MissingKey(seed), got {other:?}"),
        }
        let cfg = StudyConfig::from_kv(&doc, Some(5)).unwrap();
        assert_eq!(cfg.seed, 5);
        assert_eq!(cfg.bin_edges().len(), 20);
    }

    #[test]
    fn stage_errors_name_the_stage() {
        let mut cfg = quick_config(3);
        cfg.t_max = 50.0; // passes the floor, fails the tail-mass check
        let dir = out_dir("stage-name");
        match run_study(&cfg, &dir) {
            Err(Error::Stage { stage, .. }) => assert_eq!(stage, "events"),
            other => panic!("expected a stage error, got {other:?}"),
        }
        let _ = fs::remove_dir_all(&dir);
    }
}
