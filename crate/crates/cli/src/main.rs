//! kaonlab command line: rate curves, asymmetries, golden-rule combs,
//! spectral checks, event generation, fits and the full study pipeline.
//!
//! All times on the command line are in units of tau_S. Exit codes:
//! 0 success, 1 invalid input, 2 runtime failure.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use kaonlab::asymmetry::{self, Model};
use kaonlab::events;
use kaonlab::fit;
use kaonlab::golden_rule::{self, Scenario};
use kaonlab::kv::KvDoc;
use kaonlab::params::{load_physics, KaonPhysics};
use kaonlab::pipeline::{run_study, StudyConfig};
use kaonlab::spectral::{self, BreitWignerParams, EnergyAmplitude, GridSpec};
use kaonlab::twf::{self, TwfVariant};
use kaonlab::wwa::{self, Channel, Flavor, LeptonSign};
use kaonlab::{Error, Result};

#[derive(Parser)]
#[command(name = "kaonlab", version, about = "Neutral-kaon decay laboratory")]
struct Cli {
    /// Physics constants file (`key = value`; set `defaults = true` to
    /// inherit built-in constants). Omitted: built-in defaults.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Upper bound on worker threads. Evaluations are deterministic for
    /// any value; the current implementation runs single-threaded.
    #[arg(long, global = true, default_value_t = 1, value_name = "N")]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Wwa,
    Twf,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    #[value(name = "matched-large-t", alias = "large-t")]
    MatchedLargeT,
    #[value(name = "matched-three-pion", alias = "three-pion")]
    MatchedThreePion,
}

impl From<VariantArg> for TwfVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::MatchedLargeT => TwfVariant::MatchedLargeT,
            VariantArg::MatchedThreePion => TwfVariant::MatchedThreePion,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FlavorArg {
    K0,
    K0bar,
}

impl From<FlavorArg> for Flavor {
    fn from(f: FlavorArg) -> Self {
        match f {
            FlavorArg::K0 => Flavor::K0,
            FlavorArg::K0bar => Flavor::K0Bar,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ChannelArg {
    #[value(name = "2pi")]
    TwoPion,
    #[value(name = "3pi")]
    ThreePion,
    #[value(name = "semileptonic-plus")]
    SemileptonicPlus,
    #[value(name = "semileptonic-minus")]
    SemileptonicMinus,
}

impl From<ChannelArg> for Channel {
    fn from(c: ChannelArg) -> Self {
        match c {
            ChannelArg::TwoPion => Channel::TwoPion,
            ChannelArg::ThreePion => Channel::ThreePion,
            ChannelArg::SemileptonicPlus => Channel::SemileptonicPlus,
            ChannelArg::SemileptonicMinus => Channel::SemileptonicMinus,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate a channel production rate for one model.
    Rates {
        #[arg(long, value_enum)]
        model: ModelArg,
        /// Required when --model twf.
        #[arg(long, value_enum)]
        twf_variant: Option<VariantArg>,
        #[arg(long, value_enum, default_value = "k0")]
        initial: FlavorArg,
        #[arg(long, value_enum)]
        channel: ChannelArg,
        #[arg(long, default_value_t = 0.0)]
        t_min: f64,
        #[arg(long, default_value_t = 20.0)]
        t_max: f64,
        #[arg(long, default_value_t = 200)]
        points: usize,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Sample the two-pion asymmetry A_pipi(t) for one model.
    Asymmetry {
        #[arg(long, value_enum)]
        model: ModelArg,
        /// Required when --model twf.
        #[arg(long, value_enum)]
        twf_variant: Option<VariantArg>,
        #[arg(long, default_value_t = 0.0)]
        t_min: f64,
        #[arg(long, default_value_t = 20.0)]
        t_max: f64,
        #[arg(long, default_value_t = 200)]
        points: usize,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Integrate a multi-channel flat-comb decay scenario.
    GoldenRule {
        /// Scenario file: species count, per-species gamma targets,
        /// spacing_over_gamma, bandwidth_over_gamma, t_max_gamma.
        #[arg(long, value_name = "FILE")]
        scenario: PathBuf,
        /// Trajectory CSV (t, c_in, per-species outgoing norms).
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Optional JSON summary (golden-rule budget, fitted decay
        /// constant, branching fractions).
        #[arg(long, value_name = "FILE")]
        summary: Option<PathBuf>,
    },
    /// Breit-Wigner density, survival curves and the equivalence report.
    Spectral {
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(long, default_value_t = 0.0)]
        m: f64,
        /// Energy half-window (units of gamma) for the survival pathway.
        #[arg(long, default_value_t = 1500.0)]
        half_width_gammas: f64,
        #[arg(long, default_value_t = 30_001)]
        energy_points: usize,
        #[arg(long, default_value_t = 5.0)]
        t_max_gammas: f64,
        #[arg(long, default_value_t = 251)]
        time_points: usize,
        /// Plot-range half-window (units of gamma) for the density export.
        #[arg(long, default_value_t = 50.0)]
        density_half_width_gammas: f64,
        #[arg(long, default_value_t = 2001)]
        density_points: usize,
        #[arg(long, value_name = "FILE")]
        density_out: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        survival_out: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        report_out: Option<PathBuf>,
    },
    /// Generate Monte Carlo decay events.
    Generate {
        #[arg(long, value_enum)]
        model: ModelArg,
        /// Required when --model twf.
        #[arg(long, value_enum)]
        twf_variant: Option<VariantArg>,
        #[arg(long, value_enum, default_value = "k0")]
        initial: FlavorArg,
        #[arg(long)]
        n: u64,
        #[arg(long)]
        seed: u64,
        /// Sampling window; must keep the truncated tail mass below 1e-3.
        #[arg(long, default_value_t = 4000.0)]
        t_max: f64,
        /// Event CSV; a reproducibility sidecar is written next to it
        /// with the extension `.json`.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Fit epsilon to binned two-pion asymmetry data and score both models.
    Fit {
        #[arg(long, value_name = "FILE")]
        events_k0: PathBuf,
        #[arg(long, value_name = "FILE")]
        events_k0bar: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        t_min: f64,
        #[arg(long, default_value_t = 20.0)]
        t_max: f64,
        #[arg(long, default_value_t = 1.0)]
        bin_width: f64,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Run the end-to-end falsification study.
    Study {
        /// Seed override (takes precedence over the config key).
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for report.json, curves, events and fit.json.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                std::process::exit(0);
            }
            let _ = e.print();
            std::process::exit(1);
        }
    };
    if let Err(err) = run(cli) {
        eprintln!("error: {err}");
        std::process::exit(if err.is_validation() { 1 } else { 2 });
    }
}

fn load_config(path: &Option<PathBuf>) -> Result<KaonPhysics> {
    match path {
        Some(p) => load_physics(&KvDoc::from_path(p)?),
        None => Ok(KaonPhysics::default()),
    }
}

fn resolve_model(model: ModelArg, variant: Option<VariantArg>) -> Result<Model> {
    match model {
        ModelArg::Wwa => Ok(Model::Wwa),
        ModelArg::Twf => match variant {
            Some(v) => Ok(Model::Twf(v.into())),
            None => Err(Error::Config(
                "`--model twf` requires `--twf-variant` (matched-large-t | matched-three-pion)".into(),
            )),
        },
    }
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if cli.threads == 0 {
        return Err(Error::Config("--threads must be >= 1".into()));
    }
    match cli.command {
        Command::Rates { model, twf_variant, initial, channel, t_min, t_max, points, out } => {
            let physics = load_config(&cli.config)?;
            let model = resolve_model(model, twf_variant)?;
            let initial: Flavor = initial.into();
            let channel: Channel = channel.into();
            let curve = match model {
                Model::Wwa => wwa::rate_curve(initial, channel, t_min, t_max, points, &physics)?,
                Model::Twf(variant) => {
                    twf_rate_curve(initial, channel, variant, t_min, t_max, points, &physics)?
                }
            };
            let mut buf = String::from("t_over_tau_s,value\n");
            for (t, r) in curve.times.iter().zip(&curve.rates) {
                buf.push_str(&format!("{t:.11e},{r:.11e}\n"));
            }
            fs::write(&out, buf)?;
            println!("wrote {} ({} points)", out.display(), points);
        }

        Command::Asymmetry { model, twf_variant, t_min, t_max, points, out } => {
            let physics = load_config(&cli.config)?;
            let model = resolve_model(model, twf_variant)?;
            let curve = asymmetry::curve(model, t_min, t_max, points, &physics)?;
            let mut buf = Vec::new();
            curve.write_csv(&mut buf)?;
            fs::write(&out, buf)?;
            println!("wrote {} ({} points, model {})", out.display(), points, model.label());
        }

        Command::GoldenRule { scenario, out, summary } => {
            let sc = Scenario::from_kv(&KvDoc::from_path(&scenario)?)?;
            let (system, tables) = sc.build()?;
            let budget = golden_rule::golden_rule_gamma(&tables, sc.omega_in)?;
            let trajectory = golden_rule::integrate(&system, sc.t_max(), sc.recommended_steps())?;
            let gamma = sc.gamma_total();
            let fitted = golden_rule::fit_decay_constant(&trajectory, (0.5 / gamma, 3.0 / gamma))?;
            let last = trajectory.times.len() - 1;
            let norms: Vec<f64> = (0..system.n_species)
                .map(|s| trajectory.species_norm_out[s][last])
                .collect();
            let total_out: f64 = norms.iter().sum();
            let branching: Vec<f64> = norms.iter().map(|n| n / total_out).collect();

            let mut buf = Vec::new();
            trajectory.write_csv(&mut buf)?;
            fs::write(&out, buf)?;
            println!(
                "wrote {} ({} channels, {} steps)",
                out.display(),
                system.channels.len(),
                trajectory.times.len() - 1
            );
            println!("golden-rule total = {:.6}, fitted decay constant = {fitted:.6}", budget.total);
            println!("branching fractions = {branching:?}");
            if let Some(path) = summary {
                write_json(
                    &path,
                    &json!({
                        "golden_rule": budget,
                        "fitted_decay_constant": fitted,
                        "branching_fractions": branching,
                        "channels": system.channels.len(),
                        "steps": trajectory.times.len() - 1,
                        "t_max": sc.t_max(),
                    }),
                )?;
                println!("wrote {}", path.display());
            }
        }

        Command::Spectral {
            gamma,
            m,
            half_width_gammas,
            energy_points,
            t_max_gammas,
            time_points,
            density_half_width_gammas,
            density_points,
            density_out,
            survival_out,
            report_out,
        } => {
            let params = BreitWignerParams::new(m, gamma)?;
            if energy_points < 2 || time_points < 2 {
                return Err(Error::Config(
                    "--energy-points and --time-points must both be >= 2".into(),
                ));
            }
            let grid = GridSpec {
                half_width_over_gamma: half_width_gammas,
                energy_points,
                t_max_over_gamma: t_max_gammas,
                time_points,
            };
            if let Some(path) = &density_out {
                let psi =
                    EnergyAmplitude::sampled_breit_wigner(&params, density_half_width_gammas, density_points)?;
                let mut buf = Vec::new();
                psi.write_csv(&mut buf)?;
                fs::write(path, buf)?;
                println!("wrote {}", path.display());
            }
            if let Some(path) = &survival_out {
                let psi = EnergyAmplitude::sampled_breit_wigner(&params, half_width_gammas, energy_points)?;
                let times: Vec<f64> = (0..time_points)
                    .map(|j| t_max_gammas / gamma * j as f64 / (time_points.max(2) - 1) as f64)
                    .collect();
                let values: Vec<f64> = times
                    .iter()
                    .map(|&t| spectral::survival_from_energy_density(&psi, t))
                    .collect::<Result<_>>()?;
                let mut buf = Vec::new();
                spectral::write_survival_csv(&times, &values, &mut buf)?;
                fs::write(path, buf)?;
                println!("wrote {}", path.display());
            }
            let report = spectral::equivalence_report(&params, &grid)?;
            println!(
                "max density deviation = {:.3e}, max survival deviation = {:.3e}",
                report.max_density_deviation, report.max_survival_deviation
            );
            if let Some(path) = &report_out {
                write_json(path, &report)?;
                println!("wrote {}", path.display());
            }
        }

        Command::Generate { model, twf_variant, initial, n, seed, t_max, out } => {
            let physics = load_config(&cli.config)?;
            let model = resolve_model(model, twf_variant)?;
            let initial: Flavor = initial.into();
            let mut events = events::sample(model, initial, n, seed, t_max, &physics)?;
            events.sort_by(|a, b| a.time.total_cmp(&b.time));
            let mut buf = Vec::new();
            events::write_events_csv(&events, &mut buf)?;
            fs::write(&out, buf)?;
            let sidecar = out.with_extension("json");
            write_json(&sidecar, &events::SampleMeta::new(model, initial, n, seed, t_max, &physics))?;
            println!("wrote {} ({n} events) and {}", out.display(), sidecar.display());
        }

        Command::Fit { events_k0, events_k0bar, t_min, t_max, bin_width, out } => {
            let physics = load_config(&cli.config)?;
            let k0 = events::read_events_csv(BufReader::new(fs::File::open(&events_k0)?), Model::Wwa)?;
            let k0bar =
                events::read_events_csv(BufReader::new(fs::File::open(&events_k0bar)?), Model::Wwa)?;
            let edges = events::uniform_edges(t_min, t_max, bin_width)?;
            let binned = events::bin_asymmetry(&k0, &k0bar, &edges, Channel::TwoPion)?;
            let result = fit::fit_epsilon(&binned, &physics)?;
            let tests = json!({
                "wwa": fit::model_chi2(Model::Wwa, &binned, &physics)?,
                "twf_matched_large_t":
                    fit::model_chi2(Model::Twf(TwfVariant::MatchedLargeT), &binned, &physics)?,
                "twf_matched_three_pion":
                    fit::model_chi2(Model::Twf(TwfVariant::MatchedThreePion), &binned, &physics)?,
            });
            write_json(&out, &json!({ "fit": result, "model_tests": tests }))?;
            println!(
                "wrote {}: |eps| = {:.4e} +- {:.1e}, chi2/ndf = {:.2}/{}",
                out.display(),
                result.epsilon_hat.norm(),
                result.sigma_abs_epsilon(),
                result.chi2,
                result.ndf
            );
        }

        Command::Study { seed, out } => {
            let path = cli.config.as_ref().ok_or_else(|| {
                Error::Config("`study` requires `--config` with a study configuration file".into())
            })?;
            let cfg = StudyConfig::from_kv(&KvDoc::from_path(path)?, seed)?;
            let report = run_study(&cfg, &out)?;
            println!("study written to {}", out.display());
            println!(
                "wwa: chi2/ndf = {:.1}/{} (n_sigma {:+.2}) -> {}",
                report.wwa.chi2,
                report.wwa.ndf,
                report.wwa.n_sigma,
                if report.wwa.verdict.is_falsified() { "falsified" } else { "consistent" }
            );
            println!(
                "twf ({}): chi2/ndf = {:.1}/{} (n_sigma {:+.2}) -> {}",
                cfg.twf_variant.as_str(),
                report.twf.chi2,
                report.twf.ndf,
                report.twf.n_sigma,
                if report.twf.verdict.is_falsified() { "falsified" } else { "consistent" }
            );
        }
    }
    Ok(())
}

/// Rate curve under the temporal-wave-function model; semileptonic
/// channels exist only in the CP-respecting limit and error otherwise.
fn twf_rate_curve(
    initial: Flavor,
    channel: Channel,
    variant: TwfVariant,
    t_min: f64,
    t_max: f64,
    points: usize,
    physics: &KaonPhysics,
) -> Result<wwa::RateCurve> {
    if !(t_min >= 0.0 && t_max > t_min) || points < 2 {
        return Err(Error::Config(format!(
            "rate grid requires 0 <= t_min < t_max and points >= 2, got [{t_min}, {t_max}] x {points}"
        )));
    }
    let params = twf::constrain(physics, variant);
    let step = (t_max - t_min) / (points - 1) as f64;
    let times: Vec<f64> = (0..points).map(|i| t_min + i as f64 * step).collect();
    let mut rates = Vec::with_capacity(points);
    for &t in &times {
        let rate = match channel {
            Channel::TwoPion => twf::two_pion_rate(initial, t, physics, &params)?,
            Channel::ThreePion => twf::three_pion_rate(initial, t, physics, &params)?,
            Channel::SemileptonicPlus => {
                twf::semileptonic_rate(initial, LeptonSign::Plus, t, physics, &params)?
            }
            Channel::SemileptonicMinus => {
                twf::semileptonic_rate(initial, LeptonSign::Minus, t, physics, &params)?
            }
        };
        rates.push(rate);
    }
    wwa::RateCurve::new(channel, times, rates)
}
