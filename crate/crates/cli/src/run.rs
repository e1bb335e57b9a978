//! Runs an experiment end to end: simulate, fit every declared run, forecast,
//! map the hidden oscillator, and evaluate the acceptance checks.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{anyhow, ensure, Context, Result};
use oscnet::io::{mapping_records, write_forecast, write_mapping, write_report, write_trajectories, MappingRecord};
use oscnet::mapping::{exact_backward_stencil, forecast_partial};
use oscnet::simulator::{add_noise, simulate_chain, InitialState};
use oscnet::solver::{
    forecast_with, free_forecast, CoupledCanonical, CoupledCombined, Parametrization, RetrainPolicy, SingleCanonical,
    SingleConservative,
};
use oscnet::training::{fit, fit_partial, EulerResNet, FitReport, FullObservation, MappingMode, Recurrent};
use oscnet::types::combined_init;
use oscnet::{canonical_to_combined, CanonicalWeights, FitReport64, Trajectory64};
use serde_json::json;

use crate::config::{
    AcceptanceConfig, ExperimentConfig, Kind, MappingConfig, ModelVariant, Observed, RunConfig, System, TrainingWindow,
};

/// Simulated observations split into a training window and its continuation.
#[derive(Debug, Clone)]
pub struct Data {
    pub channels: Vec<Trajectory64>,
    pub n_train: usize,
}

impl Data {
    pub fn train(&self) -> Result<Vec<Trajectory64>> {
        Ok(self
            .channels
            .iter()
            .map(|c| c.head(self.n_train))
            .collect::<oscnet::Result<_>>()?)
    }

    pub fn future(&self) -> Result<Vec<Trajectory64>> {
        let n = self.channels[0].len() - self.n_train;
        Ok(self.channels.iter().map(|c| c.tail(n)).collect::<oscnet::Result<_>>()?)
    }
}

fn training_len(config: &ExperimentConfig, truth: &[CanonicalWeights<f64>]) -> Result<usize> {
    match config.training_window {
        None => Ok(config.n_train),
        Some(TrainingWindow::QuarterPeriod) => {
            let omega = truth[0]
                .damped_frequency()
                .context("quarter-period window needs an underdamped oscillator")?;
            let quarter = std::f64::consts::FRAC_PI_2 / omega;
            let mut n = 5;
            while (n as f64) * config.delta < quarter {
                n += 1;
            }
            Ok(n)
        }
    }
}

pub fn simulate(config: &ExperimentConfig) -> Result<Data> {
    ensure!(
        config.kind == Kind::Fit,
        "{} has no trajectories to simulate",
        config.name
    );
    let truth = config.truth.as_ref().context("missing [truth]")?.weights()?;
    let init = match &config.initial_state {
        Some(s) => {
            let v = s.velocities.clone().unwrap_or_else(|| vec![0.0; s.positions.len()]);
            InitialState::new(s.positions.clone(), v)?
        }
        None if truth.len() == 1 => InitialState::single_default(),
        None => InitialState::coupled_default(),
    };
    let n_train = training_len(config, &truth)?;
    let clean = simulate_chain(&truth, &init, config.delta, n_train + config.n_forecast)?;
    let channels = clean
        .iter()
        .enumerate()
        .map(|(i, c)| add_noise(c, config.noise_std, config.seed.wrapping_add(i as u64)))
        .collect::<oscnet::Result<_>>()?;
    Ok(Data { channels, n_train })
}

#[derive(Debug, Clone)]
pub struct MappingOutput {
    pub records: Vec<MappingRecord>,
    /// Forecast of x₁ in the requested IFL mode, if it stayed bounded.
    pub forecast: Option<Trajectory64>,
    pub rmse_ifl: Option<f64>,
    pub rmse_frozen: Option<f64>,
    pub note: Option<String>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub label: String,
    pub mapping_config: Option<MappingConfig>,
    pub report: FitReport64,
    pub forecast: Option<Vec<Trajectory64>>,
    /// Forecast RMSE relative to the peak of the whole series.
    pub forecast_rmse: Option<f64>,
    /// Relative peak-amplitude change, second half vs first half: (forecast, truth).
    pub amplitude_change: Option<(f64, f64)>,
    pub mapping: Option<MappingOutput>,
}

fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |a, v| a.max(v.abs()))
}

fn rmse(a: &[f64], b: &[f64]) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
}

/// Mean parabola-interpolated positive peak height.
fn peak_level(x: &[f64]) -> Option<f64> {
    let peaks: Vec<f64> = (1..x.len().saturating_sub(1))
        .filter(|&i| x[i] > x[i - 1] && x[i] >= x[i + 1] && x[i] > 0.0)
        .map(|i| {
            let (a, b, c) = (x[i - 1], x[i], x[i + 1]);
            let denom = a - 2.0 * b + c;
            if denom == 0.0 {
                b
            } else {
                b - (a - c).powi(2) / (8.0 * denom)
            }
        })
        .collect();
    (!peaks.is_empty()).then(|| peaks.iter().sum::<f64>() / peaks.len() as f64)
}

fn amplitude_change(x: &[f64]) -> Option<f64> {
    let mid = x.len() / 2;
    Some(peak_level(&x[mid..])? / peak_level(&x[..mid])? - 1.0)
}

fn truth_vector(config: &ExperimentConfig, truth: &[CanonicalWeights<f64>]) -> Result<Option<Vec<f64>>> {
    Ok(match (config.system, config.model) {
        (System::Single, ModelVariant::Dissipative) => Some(vec![truth[0].mass, truth[0].damping, truth[0].spring]),
        (System::Single, ModelVariant::Conservative) => Some(vec![truth[0].mass, truth[0].spring]),
        (System::Single, ModelVariant::Euler) => None,
        (System::Coupled, _) => Some(match config.parametrization {
            oscnet::training::ParametrizationKind::Canonical => vec![
                truth[0].mass,
                truth[1].mass,
                truth[0].damping,
                truth[1].damping,
                truth[0].spring,
                truth[1].spring,
            ],
            oscnet::training::ParametrizationKind::Combined => {
                canonical_to_combined(&truth[0], &truth[1], config.delta)?
                    .to_array()
                    .to_vec()
            }
        }),
    })
}

/// Pads `values` with NaN for parameters it does not cover (kernel taps).
fn padded(values: &[f64], len: usize) -> Vec<f64> {
    let mut v = values.to_vec();
    v.resize(len, f64::NAN);
    v
}

fn annotate(
    report: FitReport64,
    truth: Option<&[f64]>,
    reference: &std::collections::BTreeMap<String, f64>,
) -> FitReport64 {
    let n = report.names.len();
    let mut report = match truth {
        Some(t) => report.with_truth(padded(t, n)),
        None => report,
    };
    if !reference.is_empty() {
        let r = report
            .names
            .iter()
            .map(|name| reference.get(name).copied().unwrap_or(f64::NAN))
            .collect();
        report = report.with_reference(r);
    }
    report
}

fn run_full<M: Recurrent<f64> + Clone>(
    model: M,
    config: &ExperimentConfig,
    data: &Data,
    truth: Option<&[f64]>,
    run: &RunConfig,
) -> Result<RunOutput> {
    let train = data.train()?;
    let mut outcome = fit(model, &train, &config.fit_config())?;
    let report = annotate(outcome.report.clone(), truth, &run.reference);
    let (mut forecast, mut forecast_rmse, mut amplitude) = (None, None, None);
    if config.n_forecast > 0 {
        let f = match config.forecast.retrain {
            RetrainPolicy::None => forecast_with(outcome.model(), &train, config.n_forecast)?,
            policy => free_forecast(&mut outcome.trainer, &train, config.n_forecast, policy)?,
        };
        let future = data.future()?;
        let peak = data.channels.iter().fold(0.0f64, |a, c| a.max(max_abs(c.samples())));
        let sq: f64 = f
            .iter()
            .zip(&future)
            .map(|(p, t)| rmse(p.samples(), t.samples()).powi(2))
            .sum::<f64>()
            / f.len() as f64;
        forecast_rmse = Some(sq.sqrt() / peak);
        amplitude = amplitude_change(f[0].samples()).zip(amplitude_change(future[0].samples()));
        forecast = Some(f);
    }
    Ok(RunOutput {
        label: run.label.clone(),
        mapping_config: None,
        report,
        forecast,
        forecast_rmse,
        amplitude_change: amplitude,
        mapping: None,
    })
}

fn run_partial<P: Parametrization<f64>>(
    solver: P,
    config: &ExperimentConfig,
    data: &Data,
    truth: Option<&[f64]>,
    run: &RunConfig,
) -> Result<RunOutput> {
    let mapping = config.mapping_for(run);
    let setup = mapping.setup()?;
    let train = data.train()?;
    let outcome = fit_partial(solver, &train[0], &setup, &config.fit_config())?;
    let report = annotate(outcome.report.clone(), truth, &run.reference);
    let model = outcome.model();
    let mapped = model.mapped(&train[0])?;
    let mode = match setup.mode {
        MappingMode::Shared => "shared".to_string(),
        MappingMode::Wide { kernel } => format!("wide{kernel}"),
    };
    let records = mapping_records(&train[0], &train[1], &mapped, &mode, setup.padding)?;
    let mut out = MappingOutput {
        records,
        forecast: None,
        rmse_ifl: None,
        rmse_frozen: None,
        note: None,
    };
    if config.n_forecast > 0 {
        let future = data.future()?;
        let amp = max_abs(train[0].samples());
        let mut notes = Vec::new();
        for ifl in [true, false] {
            match forecast_partial(model, &train[0], config.n_forecast, ifl) {
                Ok(f) => {
                    let e = rmse(f.samples(), future[0].samples()) / amp;
                    if ifl {
                        out.rmse_ifl = Some(e);
                    } else {
                        out.rmse_frozen = Some(e);
                    }
                    if ifl == mapping.ifl {
                        out.forecast = Some(f);
                    }
                }
                Err(e @ oscnet::Error::DivergedForecast { .. }) => {
                    notes.push(format!("{} forecast: {e}", if ifl { "IFL" } else { "frozen" }));
                }
                Err(e) => return Err(e.into()),
            }
        }
        out.note = (!notes.is_empty()).then(|| notes.join("; "));
    }
    Ok(RunOutput {
        label: run.label.clone(),
        mapping_config: Some(mapping),
        report,
        forecast: out.forecast.clone().map(|f| vec![f]),
        forecast_rmse: None,
        amplitude_change: None,
        mapping: Some(out),
    })
}

pub fn fit_run(config: &ExperimentConfig, data: &Data, run: &RunConfig) -> Result<RunOutput> {
    let truth = config.truth.as_ref().context("missing [truth]")?.weights()?;
    let init = config.init.as_ref().context("missing [init]")?.weights()?;
    let tv = truth_vector(config, &truth)?;
    let tv = tv.as_deref();
    let delta = config.delta;
    use oscnet::training::ParametrizationKind::{Canonical, Combined};
    match (config.system, config.model, config.observed, config.parametrization) {
        (System::Single, ModelVariant::Dissipative, _, _) => run_full(
            FullObservation::new(SingleCanonical {
                weights: init[0],
                delta,
            }),
            config,
            data,
            tv,
            run,
        ),
        (System::Single, ModelVariant::Conservative, _, _) => {
            let p = SingleConservative {
                mass: init[0].mass,
                spring: init[0].spring,
                delta,
            };
            run_full(FullObservation::new(p), config, data, tv, run)
        }
        (System::Single, ModelVariant::Euler, _, _) => {
            run_full(EulerResNet::new(vec![0.0], delta)?, config, data, tv, run)
        }
        (System::Coupled, _, observed, kind) => {
            let canonical = CoupledCanonical {
                weights: [init[0], init[1]],
                delta,
            };
            let combined = || -> Result<CoupledCombined<f64>> {
                Ok(CoupledCombined {
                    weights: combined_init([&init[0], &init[1]], &truth[1], delta, config.combined_init)?,
                })
            };
            match (observed, kind) {
                (Observed::All, Canonical) => run_full(FullObservation::new(canonical), config, data, tv, run),
                (Observed::All, Combined) => run_full(FullObservation::new(combined()?), config, data, tv, run),
                (Observed::First, Canonical) => run_partial(canonical, config, data, tv, run),
                (Observed::First, Combined) => run_partial(combined()?, config, data, tv, run),
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

fn lookup(report: &FitReport64, name: &str) -> Result<usize> {
    report
        .names
        .iter()
        .position(|n| n == name)
        .ok_or_else(|| anyhow!("acceptance refers to unknown parameter {name:?}"))
}

pub fn evaluate(acceptance: &AcceptanceConfig, out: &RunOutput) -> Result<Vec<Check>> {
    let r = &out.report;
    let prefix = if out.label.is_empty() {
        String::new()
    } else {
        format!("{}: ", out.label)
    };
    let mut checks = Vec::new();
    let mut push = |name: &str, pass: bool, detail: String| {
        checks.push(Check {
            name: format!("{prefix}{name}"),
            pass,
            detail,
        })
    };
    if let Some(tol) = acceptance.truth_rel_tol {
        let errors = r
            .rel_error
            .as_ref()
            .context("truth check needs a model with known true values")?;
        let mut worst = 0.0f64;
        let mut parts = Vec::new();
        for (i, e) in errors.iter().enumerate().filter(|(_, e)| e.is_finite()) {
            worst = worst.max(*e);
            parts.push(format!("{}={:.4} ({:.1}%)", r.names[i], r.learned[i], 100.0 * e));
        }
        push(
            &format!("learned within {:.0}% of truth", 100.0 * tol),
            worst <= tol,
            parts.join(", "),
        );
    }
    for name in &acceptance.frozen {
        let i = lookup(r, name)?;
        push(
            &format!("{name} frozen"),
            r.learned[i] == r.init[i],
            format!("init {} learned {}", r.init[i], r.learned[i]),
        );
    }
    for (name, tol) in &acceptance.near_init {
        let i = lookup(r, name)?;
        let d = (r.learned[i] - r.init[i]).abs();
        push(
            &format!("{name} within {tol} of init"),
            d <= *tol,
            format!("learned {:.6}, |change| {d:.1e}", r.learned[i]),
        );
    }
    for t in &acceptance.targets {
        let i = lookup(r, &t.parameter)?;
        let e = (r.learned[i] - t.value).abs() / t.value.abs();
        push(
            &format!("{} within {:.0}% of {}", t.parameter, 100.0 * t.rel_tol, t.value),
            e <= t.rel_tol,
            format!("learned {:.4} ({:.1}%)", r.learned[i], 100.0 * e),
        );
    }
    if let Some(tol) = acceptance.forecast_rmse_tol {
        let e = out
            .forecast_rmse
            .context("forecast check needs n_forecast > 0 and full observation")?;
        push(
            &format!("forecast RMSE within {:.0}% of peak", 100.0 * tol),
            e <= tol,
            format!("{:.3}%", 100.0 * e),
        );
    }
    if acceptance.max_amplitude_change.is_some() || acceptance.min_truth_decay.is_some() {
        let (model, truth) = out
            .amplitude_change
            .context("amplitude check needs a forecast with visible peaks")?;
        if let Some(tol) = acceptance.max_amplitude_change {
            push(
                "forecast amplitude preserved",
                model.abs() <= tol,
                format!("change {:.2}%", 100.0 * model),
            );
        }
        if let Some(min) = acceptance.min_truth_decay {
            push(
                "true continuation decays",
                -truth >= min,
                format!("change {:.1}%", 100.0 * truth),
            );
        }
    }
    if acceptance.ifl_improves {
        let m = out
            .mapping
            .as_ref()
            .context("IFL check needs a partially observed system")?;
        let (pass, detail) = match (m.rmse_ifl, m.rmse_frozen) {
            (Some(a), Some(b)) => (
                a < b,
                format!("RMSE with IFL {:.1}%, without {:.1}%", 100.0 * a, 100.0 * b),
            ),
            _ => (false, m.note.clone().unwrap_or_else(|| "no forecast".into())),
        };
        push("IFL forecast beats frozen hidden state", pass, detail);
    }
    Ok(checks)
}

/// Checks Σ cⱼ gⱼ^q = d!·[q = d] for q < len in exact arithmetic.
fn moments_exact(s: &oscnet::ExactStencil) -> (bool, String) {
    use num_traits::{One, Zero};
    type Q = num_rational::BigRational;
    let d = s.derivative_order();
    let mut failures = Vec::new();
    for q in 0..s.len() {
        let sum = s.coefficients().iter().zip(s.grid()).fold(Q::zero(), |acc, (c, g)| {
            acc + c * num_traits::pow(Q::from_integer(g.into()), q)
        });
        let expected = if q == d {
            (1..=d).fold(Q::one(), |a, k| a * Q::from_integer(k.into()))
        } else {
            Q::zero()
        };
        if sum != expected {
            failures.push(format!("degree {q}: {sum}"));
        }
    }
    let detail = if failures.is_empty() {
        format!("degrees 0..{} exact", s.len() - 1)
    } else {
        failures.join(", ")
    };
    (failures.is_empty(), detail)
}

/// Stencil table: exact coefficients of one accuracy order.
pub fn stencils(config: &ExperimentConfig) -> Result<(String, Vec<Check>, serde_json::Value)> {
    let s = config.stencils.as_ref().context("missing [stencils]")?;
    let d1 = exact_backward_stencil(1, s.order)?;
    let d2 = exact_backward_stencil(2, s.order)?;
    let strings = |c: &oscnet::ExactStencil| c.coefficients().iter().map(|q| q.to_string()).collect::<Vec<_>>();
    let floats = |c: &oscnet::ExactStencil| c.to_scalar::<f64>().coefficients().to_vec();
    let (s1, s2) = (strings(&d1), strings(&d2));
    let mut text = String::new();
    let _ = writeln!(text, "backward stencils, accuracy order {}", s.order);
    let _ = writeln!(text, "{:<8} {:>6} coefficient", "d/dt", "offset");
    for (label, st, coeff) in [("first", &d1, &s1), ("second", &d2, &s2)] {
        for (g, c) in st.grid().iter().zip(coeff) {
            let _ = writeln!(text, "{label:<8} {g:>6} {c}");
        }
    }
    let mut checks = Vec::new();
    for (label, st, coeff, expected) in [
        ("first", &d1, &s1, &s.expected_d1),
        ("second", &d2, &s2, &s.expected_d2),
    ] {
        if let Some(expected) = expected {
            checks.push(Check {
                name: format!("{label}-derivative stencil exact"),
                pass: coeff == expected,
                detail: format!("[{}]", coeff.join(", ")),
            });
        }
        let (pass, detail) = moments_exact(st);
        checks.push(Check {
            name: format!("{label}-derivative moment conditions"),
            pass,
            detail,
        });
    }
    let json = json!({
        "order": s.order,
        "d1": { "exact": s1, "value": floats(&d1) },
        "d2": { "exact": s2, "value": floats(&d2) },
    });
    Ok((text, checks, json))
}

fn file_stem(base: &str, label: &str) -> String {
    if label.is_empty() {
        base.to_string()
    } else {
        let slug: String = label
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() {
                    c.to_ascii_lowercase()
                } else {
                    '_'
                }
            })
            .collect();
        format!("{base}_{slug}")
    }
}

/// Which artifacts a command writes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Outputs {
    pub report: bool,
    pub forecast: bool,
    pub mapping: bool,
}

impl Outputs {
    pub const ALL: Self = Self {
        report: true,
        forecast: true,
        mapping: true,
    };
}

pub fn write_run(dir: &Path, data: &Data, run: &RunOutput, outputs: Outputs) -> Result<Vec<std::path::PathBuf>> {
    let mut written = Vec::new();
    if outputs.report {
        let p = dir.join(format!("{}.json", file_stem("report", &run.label)));
        write_report(&p, &run.report)?;
        written.push(p);
    }
    if outputs.forecast {
        if let Some(f) = &run.forecast {
            let future = data.future()?;
            let truth: Vec<_> = future.into_iter().take(f.len()).collect();
            let p = dir.join(format!("{}.csv", file_stem("forecast", &run.label)));
            write_forecast(&p, &truth, f)?;
            written.push(p);
        }
    }
    if outputs.mapping {
        if let Some(m) = &run.mapping {
            let p = dir.join(format!("{}.csv", file_stem("mapping", &run.label)));
            write_mapping(&p, &m.records)?;
            written.push(p);
        }
    }
    Ok(written)
}

/// Physical parameters only; kernel taps stay in the JSON report.
pub fn summary_table(run: &RunOutput, title: &str) -> String {
    let keep: Vec<usize> = (0..run.report.names.len())
        .filter(|&i| !run.report.names[i].starts_with("kernel_"))
        .collect();
    let pick = |v: &[f64]| keep.iter().map(|&i| v[i]).collect::<Vec<_>>();
    let r = &run.report;
    let mut t = FitReport::new(
        keep.iter().map(|&i| r.names[i].clone()).collect(),
        pick(&r.init),
        pick(&r.learned),
        r.loss_history.clone(),
        r.iterations,
        r.converged,
    );
    t.truth = r.truth.as_deref().map(pick);
    t.rel_error = r.rel_error.as_deref().map(pick);
    t.reference = r.reference.as_deref().map(pick);
    let mut text = t.table(title);
    if let Some(m) = &run.mapping_config {
        let _ = writeln!(
            text,
            "mapping: kernel {}, {} padding, stencil order {}, IFL {}",
            m.kernel,
            m.padding.as_str(),
            m.stencil_order,
            if m.ifl { "on" } else { "off" }
        );
    }
    if let Some(e) = run.forecast_rmse {
        let _ = writeln!(text, "forecast RMSE {:.3}% of peak", 100.0 * e);
    }
    if let Some(m) = &run.mapping {
        if let (Some(a), Some(b)) = (m.rmse_ifl, m.rmse_frozen) {
            let _ = writeln!(
                text,
                "x1 forecast RMSE: IFL {:.2}%, frozen {:.2}% of amplitude",
                100.0 * a,
                100.0 * b
            );
        }
        if let Some(n) = &m.note {
            let _ = writeln!(text, "{n}");
        }
    }
    text
}

/// Result of a reproduction: printable text and whether every check passed.
#[derive(Debug, Clone)]
pub struct Reproduction {
    pub text: String,
    pub checks: Vec<Check>,
}

impl Reproduction {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

pub fn reproduce(config: &ExperimentConfig, dir: &Path) -> Result<Reproduction> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let title = if config.title.is_empty() {
        config.name.clone()
    } else {
        format!("{}: {}", config.name, config.title)
    };
    let mut text = format!("== {title} ==\n");
    let mut checks = Vec::new();
    match config.kind {
        Kind::Stencils => {
            let (t, c, json) = stencils(config)?;
            text.push_str(&t);
            checks.extend(c);
            let p = dir.join("stencils.json");
            std::fs::write(&p, serde_json::to_string_pretty(&json)? + "\n")?;
        }
        Kind::Fit => {
            let data = simulate(config)?;
            write_trajectories(&dir.join("trajectory.csv"), &data.channels)?;
            let _ = writeln!(text, "{} training samples at delta = {}", data.n_train, config.delta);
            for run in config.runs() {
                let out = fit_run(config, &data, &run)?;
                let heading = if run.label.is_empty() {
                    "fit".to_string()
                } else {
                    run.label.clone()
                };
                text.push_str(&summary_table(&out, &format!("-- {heading} --")));
                write_run(dir, &data, &out, Outputs::ALL)?;
                checks.extend(evaluate(&config.acceptance, &out)?);
            }
        }
    }
    for c in &checks {
        let _ = writeln!(
            text,
            "[{}] {}: {}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    let passed = checks.iter().filter(|c| c.pass).count();
    if checks.is_empty() {
        let _ = writeln!(text, "{}: no acceptance checks declared", config.name);
    } else {
        let _ = writeln!(text, "{}: {passed} of {} checks passed", config.name, checks.len());
    }
    Ok(Reproduction { text, checks })
}
